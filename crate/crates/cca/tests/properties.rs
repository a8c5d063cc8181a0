//! Property tests over generated programs and the file formats.

mod support;

use cca::formats::{self, KeysFile};
use cca_core::analysis::{self, AnalysisTask, Policy};
use cca_core::index::IndexMode;
use cca_core::{oracle, DeveloperKeys, EncryptedIndex, HashMode, MasterKeySet};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encrypted_analysis_matches_oracle(seed in 1000usize..100_000, size in 2usize..10, xss: bool) {
        let code = support::gen::program(seed, size);
        let c = support::compile_str("p.php", &code);
        let task = if xss { AnalysisTask::xss() } else { AnalysisTask::sqli() };
        let want = oracle::plaintext_analyse(&c.dcfg, &task).unwrap();
        let mut rng = StdRng::seed_from_u64(seed as u64);
        let mk = MasterKeySet::generate(128, HashMode::Sha256, &mut rng).unwrap();
        for mode in [IndexMode::Plain, IndexMode::DetRnd] {
            let idx = cca_core::build_index(&c.dcfg, &mk, mode, &mut rng).unwrap();
            let idx = EncryptedIndex::from_bytes(&idx.to_bytes()).unwrap();
            let q = analysis::authorise(&task, &mk, mode, &Policy::allow_all(), "p").unwrap();
            let q = formats::query_from_text(&formats::query_to_text(&q)).unwrap();
            let r = analysis::analyse(&idx, &q).unwrap();
            let r = formats::report_from_json(&formats::report_to_json(&r)).unwrap();
            let got = analysis::decrypt_report(&r, &DeveloperKeys::new(mk.clone(), &c.dcfg)).unwrap();
            prop_assert_eq!(&got, &want, "{}\n{}", mode, code);
        }
    }

    #[test]
    fn keys_file_roundtrip(seed: u64, lambda in prop::sample::select(vec![128u32, 256]), sha256: bool) {
        let hash = if sha256 { HashMode::Sha256 } else { HashMode::Sha1 };
        let mk = MasterKeySet::generate(lambda, hash, &mut StdRng::seed_from_u64(seed)).unwrap();
        let c = support::compile_str("k.php", &support::gen::program(seed as usize % 1000, 4));
        let kf = KeysFile { mode: IndexMode::Full, developer: DeveloperKeys::new(mk, &c.dcfg), files: c.files.clone() };
        let back = KeysFile::from_text(&kf.to_text()).unwrap();
        prop_assert_eq!(back.developer.mk, kf.developer.mk);
        prop_assert_eq!(back.developer.labels, kf.developer.labels);
        prop_assert_eq!(back.developer.pair_files, kf.developer.pair_files);
        prop_assert_eq!(back.files, kf.files);
    }
}
