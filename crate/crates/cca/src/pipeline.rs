//! Source tree to DCFG to index, with per-stage timing.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use cca_core::dcfg::{build_dcfg, Dcfg};
use cca_core::index::{build_index, EncryptedIndex, IndexMode};
use cca_core::itl::{translate, ItlStream, RuleSet, TaskKnowledge};
use cca_core::lexer::{lex, LexErrorKind, LexToken};
use cca_core::MasterKeySet;
use rand::{CryptoRng, RngCore};

use crate::sources::SourceSet;
use crate::Error;

/// Wall time per stage, summed over files.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub lexer: Duration,
    pub itl: Duration,
    pub dcfg: Duration,
    pub index: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.lexer + self.itl + self.dcfg + self.index
    }
}

#[derive(Debug, Clone)]
pub struct CompiledFile {
    pub file_id: u32,
    pub path: String,
    pub tokens: Vec<LexToken>,
    pub itl: ItlStream,
    pub dcfg: Dcfg,
}

/// Compiled application: the merged DCFG and whatever each file produced.
#[derive(Debug, Clone, Default)]
pub struct Compiled {
    /// Every collected path, indexed by `file_id`.
    pub files: Vec<String>,
    pub compiled: Vec<CompiledFile>,
    pub dcfg: Dcfg,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

/// Lex, translate and build the DCFG of every file. Files using unsupported
/// syntax (or holding no code) are skipped with a warning; any other error
/// aborts with the failing stage.
///
/// With more than one file, abstract tokens are namespaced by `file_id`.
pub fn compile(sources: &SourceSet, rules: &RuleSet, tk: &TaskKnowledge) -> Result<Compiled, Error> {
    let mut out = Compiled {
        files: sources.files.iter().map(|f| f.path.clone()).collect(),
        warnings: sources.warnings.clone(),
        ..Default::default()
    };
    let multi = sources.files.len() > 1;
    for src in &sources.files {
        let t = Instant::now();
        let lexed = lex(src);
        out.timings.lexer += t.elapsed();
        let tokens = match lexed {
            Ok(t) => t,
            Err(e) if e.is_unsupported() || e.kind == LexErrorKind::EmptySource => {
                out.warnings.push(format!("{e}; file skipped"));
                continue;
            }
            Err(e) => return Err(Error::stage("lexer", e)),
        };
        let t = Instant::now();
        let itl = translate(src, &tokens, rules, tk).map_err(|e| Error::stage("itl", e));
        out.timings.itl += t.elapsed();
        let itl = itl?;
        let t = Instant::now();
        let dcfg = build_dcfg(&itl).map_err(|e| Error::stage("dcfg", format!("{}:{e}", src.path)));
        out.timings.dcfg += t.elapsed();
        let dcfg = dcfg?;
        let dcfg = if multi { dcfg.scoped(src.file_id) } else { dcfg };
        out.compiled.push(CompiledFile { file_id: src.file_id, path: src.path.clone(), tokens, itl, dcfg });
    }
    out.dcfg = Dcfg::merge(out.compiled.iter().map(|c| c.dcfg.clone()));
    Ok(out)
}

/// Build the index, adding its time to `compiled.timings.index`.
pub fn encrypt<R: RngCore + CryptoRng>(
    compiled: &mut Compiled,
    mk: &MasterKeySet,
    mode: IndexMode,
    rng: &mut R,
) -> Result<EncryptedIndex, Error> {
    let t = Instant::now();
    let idx = build_index(&compiled.dcfg, mk, mode, rng).map_err(|e| Error::stage("index", e));
    compiled.timings.index += t.elapsed();
    idx
}

/// `line<TAB>KIND<TAB>value`, one token per line, files separated by a header.
pub fn dump_lextokens(c: &Compiled) -> String {
    let mut s = String::new();
    for f in &c.compiled {
        let _ = writeln!(s, "# {}", f.path);
        for t in &f.tokens {
            let _ = writeln!(s, "{}\t{}\t{}", t.line, t.kind.name(), t.value);
        }
    }
    s
}

pub fn dump_itl(c: &Compiled) -> String {
    let mut s = String::new();
    for f in &c.compiled {
        let _ = writeln!(s, "# {}", f.path);
        s.push_str(&f.itl.dump());
    }
    s
}

pub fn dump_dcfg(c: &Compiled) -> String {
    let mut s = String::new();
    for f in &c.compiled {
        let _ = writeln!(s, "# {}", f.path);
        s.push_str(&f.dcfg.dump());
    }
    s
}
