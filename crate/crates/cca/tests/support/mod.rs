#![allow(dead_code)]

pub mod enumerator;
pub mod gen;

use std::path::{Path, PathBuf};

use cca::pipeline::{self, Compiled};
use cca::sources;
use cca_core::{RuleSet, TaskKnowledge};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Every directory holding one program of the bundled corpus.
pub fn corpus_programs() -> Vec<PathBuf> {
    let root = corpus_dir();
    let mut out = vec![root.join("reassign"), root.join("branches")];
    let mut apps: Vec<_> = std::fs::read_dir(root.join("apps")).unwrap().map(|e| e.unwrap().path()).collect();
    apps.sort();
    out.extend(apps);
    out
}

pub fn compile_dir(dir: &Path) -> Compiled {
    let set = sources::collect_sources(dir).unwrap();
    pipeline::compile(&set, &RuleSet::default(), &TaskKnowledge::default()).unwrap()
}

pub fn compile_str(name: &str, code: &str) -> Compiled {
    let set = sources::SourceSet {
        total_bytes: code.len() as u64,
        files: vec![cca_core::SourceFile::new(name, code, 0)],
        warnings: vec![],
    };
    pipeline::compile(&set, &RuleSet::default(), &TaskKnowledge::default())
        .unwrap_or_else(|e| panic!("{name}: {e}\n{code}"))
}
