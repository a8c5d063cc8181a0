//! The whole pipeline through the public API.

use cca_core::analysis::{self, AnalysisError, AnalysisTask, Policy};
use cca_core::dcfg::{annotate_control_flow, Dcfg};
use cca_core::index::IndexMode;
use cca_core::itl::TaskKnowledge;
use cca_core::{
    build_dcfg, build_index, decrypt_report, lex, oracle, translate, DeveloperKeys, EncryptedIndex, HashMode,
    MasterKeySet, PlainReport, RuleSet, SourceFile,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn dcfg_of(files: &[(&str, &str)]) -> Dcfg {
    let parts = files.iter().enumerate().map(|(i, (name, code))| {
        let src = SourceFile::new(*name, *code, i as u32);
        let toks = lex(&src).unwrap();
        let itl = translate(&src, &toks, &RuleSet::default(), &TaskKnowledge::default()).unwrap();
        let d = build_dcfg(&itl).unwrap();
        if files.len() > 1 {
            d.scoped(i as u32)
        } else {
            d
        }
    });
    Dcfg::merge(parts)
}

fn run(dcfg: &Dcfg, mode: IndexMode, task: &AnalysisTask, seed: u64) -> PlainReport {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mk = MasterKeySet::generate(128, HashMode::Sha1, &mut rng).unwrap();
    let idx = build_index(dcfg, &mk, mode, &mut rng).unwrap();
    let idx = EncryptedIndex::from_bytes(&idx.to_bytes()).unwrap();
    let q = analysis::authorise(task, &mk, mode, &Policy::allow_all(), "t").unwrap();
    let r = analysis::analyse(&idx, &q).unwrap();
    decrypt_report(&r, &DeveloperKeys::new(mk, dcfg)).unwrap()
}

const REASSIGN: &str = "<?php $a = $_GET['user'];\n$b = \"hello\";\n$c = $a;\n$c = $b;\necho $a;\necho $c;\n";

#[test]
fn reassign_in_every_mode() {
    let d = dcfg_of(&[("f.php", REASSIGN)]);
    assert_eq!(d.len(), 6);
    for mode in IndexMode::ALL {
        let r = run(&d, mode, &AnalysisTask::xss(), 3);
        let lines: Vec<(u32, u32)> = r.findings.iter().map(|f| (f.sink_line, f.source_line)).collect();
        assert_eq!(lines, [(5, 1)], "{mode}");
        assert_eq!(r, oracle::plaintext_analyse(&d, &AnalysisTask::xss()).unwrap());
        assert!(run(&d, mode, &AnalysisTask::sqli(), 3).findings.is_empty());
    }
}

#[test]
fn findings_keep_their_file() {
    let d = dcfg_of(&[
        ("a.php", "<?php\n$x = \"safe\";\necho $x;\n"),
        ("b.php", "<?php\n$x = $_POST['m'];\n\necho $x;\n"),
    ]);
    let r = run(&d, IndexMode::DetRnd, &AnalysisTask::xss(), 4);
    let got: Vec<(Option<u32>, u32, u32)> = r.findings.iter().map(|f| (f.file_id, f.sink_line, f.source_line)).collect();
    assert_eq!(got, [(Some(1), 4, 2)]);
}

#[test]
fn control_flow_positions() {
    let code = "<?php\nif ($a == 1) {\n    $b = 1;\n} else {\n    while ($c) {\n        $b = 2;\n    }\n}\n$b = 3;\n";
    let src = SourceFile::new("c.php", code, 0);
    let itl = translate(&src, &lex(&src).unwrap(), &RuleSet::default(), &TaskKnowledge::default()).unwrap();
    let ann = annotate_control_flow(&itl).unwrap();
    let at = |line: u32| ann.iter().find(|a| a.line == line).map(|a| (a.scope.depth, a.scope.cf_type)).unwrap();
    assert_eq!(at(3), (1, 1));
    // loops do not open a branch
    assert_eq!(at(6), (1, -1));
    assert_eq!(at(9), (0, 0));
}

#[test]
fn query_for_another_index_is_rejected_or_empty() {
    let d = dcfg_of(&[("f.php", REASSIGN)]);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mk = MasterKeySet::generate(128, HashMode::Sha1, &mut rng).unwrap();
    let other = MasterKeySet::generate(128, HashMode::Sha1, &mut rng).unwrap();
    let idx = build_index(&d, &mk, IndexMode::Full, &mut rng).unwrap();
    let q = analysis::authorise(&AnalysisTask::xss(), &other, IndexMode::Full, &Policy::allow_all(), "t").unwrap();
    let r = analysis::analyse(&idx, &q).unwrap();
    assert!(r.paths.is_empty());
    assert_eq!((r.stats.probes, r.stats.misses), (1, 1));
    let q = analysis::authorise(&AnalysisTask::xss(), &mk, IndexMode::DetRnd, &Policy::allow_all(), "t").unwrap();
    assert!(matches!(analysis::analyse(&idx, &q), Err(AnalysisError::Mismatch(_))));
}

fn program() -> impl Strategy<Value = String> {
    let var = prop::sample::select(vec!["$a", "$b", "$c", "$d"]);
    let value = prop_oneof![
        Just("$_GET['x']".to_string()),
        Just("\"lit\"".to_string()),
        var.clone().prop_map(String::from),
        var.clone().prop_map(|v| format!("htmlentities({v})")),
        var.clone().prop_map(|v| format!("mysql_real_escape_string({v})")),
        (var.clone(), var.clone()).prop_map(|(v, w)| format!("{v} . {w}")),
    ];
    let stmt = prop_oneof![
        (var.clone(), value).prop_map(|(v, e)| format!("{v} = {e};")),
        var.clone().prop_map(|v| format!("echo {v};")),
        var.clone().prop_map(|v| format!("mysql_query(\"q\" . {v});")),
        (var.clone(), var.clone())
            .prop_map(|(c, v)| format!("if ({c}) {{\n{v} = $_POST['y'];\n}} else {{\necho {v};\n}}")),
    ];
    prop::collection::vec(stmt, 1..10).prop_map(|s| format!("<?php\n{}\n", s.join("\n")))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_mode_agrees_with_the_oracle(code in program(), seed: u64) {
        let d = dcfg_of(&[("p.php", &code)]);
        for task in [AnalysisTask::xss(), AnalysisTask::sqli()] {
            let want = oracle::plaintext_analyse(&d, &task).unwrap();
            for mode in [IndexMode::Plain, IndexMode::DetRnd] {
                prop_assert_eq!(&run(&d, mode, &task, seed), &want, "{}\n{}", mode, code);
            }
        }
    }
}

#[test]
fn full_mode_agrees_on_a_branchy_program() {
    let code = "<?php\n$a = $_GET['x'];\nif ($a) {\n$b = $a;\n} else {\n$b = htmlentities($a);\n}\necho $b;\nmysql_query($a);\n";
    let d = dcfg_of(&[("p.php", code)]);
    for task in [AnalysisTask::xss(), AnalysisTask::sqli()] {
        assert_eq!(run(&d, IndexMode::Full, &task, 9), oracle::plaintext_analyse(&d, &task).unwrap());
    }
}
