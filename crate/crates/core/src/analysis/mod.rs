//! Vulnerability detection over the encrypted index.
//!
//! The developer [`authorise`]s a task, producing a [`Query`] that holds the
//! task's token handles. The analyser runs [`analyse`] with nothing but the
//! query and the index; the resulting [`Report`] stays opaque until the
//! developer applies [`decrypt_report`].

pub mod policy;
pub mod steps;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::crypto::{from_offset_binary, ore, CryptoError, HashMode, MasterKeySet, TokenKeyPair};
use crate::dcfg::{Dcfg, Symbol};
use crate::index::{decode_value, entry_key, token_handle, EncryptedIndex, Field, IndexError, IndexMeta, IndexMode};
use crate::itl::{ItlToken, TaskKnowledge};

pub use policy::{Policy, PolicyError};
use steps::{EntrySource, Path, TraversalError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("policy denies task {task} for analyser {analyser}")]
    Denied { task: String, analyser: String },
    #[error("unknown analysis task {0}")]
    UnknownTask(String),
    #[error("query does not match index: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("path enumeration exceeded {0} paths")]
    TooManyPaths(usize),
    #[error("report token not found in the symbol dictionary")]
    UnknownToken,
    #[error("cannot decrypt report field: {0}")]
    Field(CryptoError),
}

/// A vulnerability class: its sink, sanitizer and the user input source.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnalysisTask {
    pub name: String,
    pub input: Symbol,
    pub sens: Symbol,
    pub san: Symbol,
}

impl AnalysisTask {
    pub fn new(class: &str) -> AnalysisTask {
        AnalysisTask {
            name: class.into(),
            input: Symbol::new(ItlToken::Input),
            sens: Symbol::new(ItlToken::Sens(class.into())),
            san: Symbol::new(ItlToken::San(class.into())),
        }
    }

    pub fn xss() -> AnalysisTask {
        AnalysisTask::new("XSS")
    }

    pub fn sqli() -> AnalysisTask {
        AnalysisTask::new("SQLi")
    }

    /// Look a class up by name, ignoring case.
    pub fn from_knowledge(tk: &TaskKnowledge, name: &str) -> Result<AnalysisTask, AnalysisError> {
        tk.classes()
            .into_iter()
            .find(|c| c.eq_ignore_ascii_case(name))
            .map(|c| AnalysisTask::new(&c))
            .ok_or_else(|| AnalysisError::UnknownTask(name.into()))
    }
}

/// What the analyser receives for one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub task: String,
    pub mode: IndexMode,
    pub hash: HashMode,
    pub lambda: u32,
    /// `(D, R)` of the sensitive token: the traversal starts here.
    pub sens: TokenKeyPair,
    /// `D` of the input token.
    pub input: Vec<u8>,
    /// `D` of the sanitizer token.
    pub san: Vec<u8>,
}

/// Issue a query if `policy` lets `analyser` run `task`.
pub fn authorise(
    task: &AnalysisTask,
    mk: &MasterKeySet,
    mode: IndexMode,
    policy: &Policy,
    analyser: &str,
) -> Result<Query, AnalysisError> {
    if !policy.permits(&task.name, analyser) {
        return Err(AnalysisError::Denied { task: task.name.clone(), analyser: analyser.into() });
    }
    let h = |s: &Symbol| token_handle(mode, mk, &s.label());
    Ok(Query {
        task: task.name.clone(),
        mode,
        hash: mk.hash,
        lambda: mk.lambda,
        sens: h(&task.sens),
        input: h(&task.input).d,
        san: h(&task.san).d,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathNode {
    /// `D` of the token.
    pub token: Vec<u8>,
    pub fields: [Field; 4],
}

/// A vulnerable path, `nodes[0]` being the sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedPath {
    pub sink_counter: u32,
    pub nodes: Vec<PathNode>,
}

/// Intermediate counts of one analysis run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnalysisStats {
    pub probes: usize,
    pub misses: usize,
    pub raw_paths: usize,
    pub valid_paths: usize,
    /// Path count of each sink group, in sink-line order.
    pub groups: Vec<usize>,
    pub selected: usize,
    pub vulnerable: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub task: String,
    pub meta: IndexMeta,
    pub paths: Vec<EncryptedPath>,
    pub stats: AnalysisStats,
}

/// Steps after path enumeration, shared with the oracle.
pub(crate) fn select_vulnerable<T: Clone + PartialEq, F: Clone>(
    raw: Vec<Path<T, F>>,
    input: &T,
    san: &T,
    cmp: &impl Fn(&F, &F) -> Ordering,
    stats: &mut AnalysisStats,
) -> Vec<Path<T, F>> {
    stats.raw_paths = raw.len();
    let valid = steps::remove_invalid(raw, cmp);
    stats.valid_paths = valid.len();
    let groups = steps::aggregate(valid, cmp);
    stats.groups = groups.iter().map(Vec::len).collect();
    let mut out = Vec::new();
    for g in groups {
        let selected = steps::resolve_control_flow(g, cmp);
        stats.selected += selected.len();
        out.extend(selected.into_iter().filter(|p| steps::is_vulnerable(p, input, san)));
    }
    stats.vulnerable = out.len();
    out
}

/// Every intermediate result of one run, for inspection and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace<T, F> {
    pub raw: Vec<Path<T, F>>,
    pub valid: Vec<Path<T, F>>,
    /// Sink groups in sink-line order.
    pub groups: Vec<Vec<Path<T, F>>>,
    /// Paths kept by control-flow resolution, per group.
    pub selected: Vec<Vec<Path<T, F>>>,
    pub vulnerable: Vec<Path<T, F>>,
}

pub(crate) fn trace_steps<T: Clone + PartialEq, F: Clone>(
    raw: Vec<Path<T, F>>,
    input: &T,
    san: &T,
    cmp: &impl Fn(&F, &F) -> Ordering,
) -> Trace<T, F> {
    let valid = steps::remove_invalid(raw.clone(), cmp);
    let groups = steps::aggregate(valid.clone(), cmp);
    let selected: Vec<_> = groups.iter().map(|g| steps::resolve_control_flow(g.clone(), cmp)).collect();
    let vulnerable = selected.iter().flatten().filter(|p| steps::is_vulnerable(p, input, san)).cloned().collect();
    Trace { raw, valid, groups, selected, vulnerable }
}

struct IndexSource<'a> {
    index: &'a EncryptedIndex,
    probed: BTreeSet<Vec<u8>>,
    probes: usize,
    misses: usize,
}

impl EntrySource for IndexSource<'_> {
    type Token = TokenKeyPair;
    type Field = Field;
    type Error = IndexError;

    fn probe(&mut self, token: &TokenKeyPair, counter: u32) -> Result<Option<(TokenKeyPair, [Field; 4])>, IndexError> {
        let meta = self.index.meta();
        let key = entry_key(meta, &token.d, counter);
        self.probes += 1;
        let found = self.index.lookup(&key);
        self.probed.insert(key);
        match found {
            None => {
                self.misses += 1;
                Ok(None)
            }
            Some(v) => {
                let e = decode_value(meta, &token.r, v)?;
                Ok(Some((e.next, e.fields)))
            }
        }
    }
}

fn check_meta(index: &EncryptedIndex, query: &Query) -> Result<IndexMeta, AnalysisError> {
    let meta = *index.meta();
    if (meta.mode, meta.hash, meta.lambda) != (query.mode, query.hash, query.lambda) {
        return Err(AnalysisError::Mismatch(format!(
            "index is {}/{}/{}, query is {}/{}/{}",
            meta.mode,
            meta.hash.name(),
            meta.lambda,
            query.mode,
            query.hash.name(),
            query.lambda
        )));
    }
    Ok(meta)
}

/// Traverse from the query's sink token; paths carry `D` values only.
fn raw_paths<'a>(
    index: &'a EncryptedIndex,
    query: &Query,
) -> Result<(Vec<Path<Vec<u8>, Field>>, IndexSource<'a>), AnalysisError> {
    let mut src = IndexSource { index, probed: BTreeSet::new(), probes: 0, misses: 0 };
    let raw = steps::find_paths(&mut src, &query.sens).map_err(|e| match e {
        TraversalError::Source(e) => AnalysisError::Index(e),
        TraversalError::TooManyPaths(n) => AnalysisError::TooManyPaths(n),
    })?;
    let raw = raw
        .into_iter()
        .map(|p| Path {
            sink_counter: p.sink_counter,
            nodes: p.nodes.into_iter().map(|n| steps::Node { token: n.token.d, fields: n.fields }).collect(),
        })
        .collect();
    Ok((raw, src))
}

/// Convert generic paths to report paths.
pub fn encrypted_paths(paths: Vec<Path<Vec<u8>, Field>>) -> Vec<EncryptedPath> {
    paths
        .into_iter()
        .map(|p| EncryptedPath {
            sink_counter: p.sink_counter,
            nodes: p.nodes.into_iter().map(|n| PathNode { token: n.token, fields: n.fields }).collect(),
        })
        .collect()
}

/// Run a task; also returns every `key_ind` probed.
pub fn analyse_traced(index: &EncryptedIndex, query: &Query) -> Result<(Report, BTreeSet<Vec<u8>>), AnalysisError> {
    let meta = check_meta(index, query)?;
    let (raw, src) = raw_paths(index, query)?;
    let mut stats = AnalysisStats { probes: src.probes, misses: src.misses, ..Default::default() };
    let found = select_vulnerable(raw, &query.input, &query.san, &Field::compare, &mut stats);
    let report = Report { task: query.task.clone(), meta, paths: encrypted_paths(found), stats };
    Ok((report, src.probed))
}

/// Like [`analyse`], keeping every intermediate result.
pub fn trace(index: &EncryptedIndex, query: &Query) -> Result<Trace<Vec<u8>, Field>, AnalysisError> {
    check_meta(index, query)?;
    let (raw, _) = raw_paths(index, query)?;
    Ok(trace_steps(raw, &query.input, &query.san, &Field::compare))
}

pub fn analyse(index: &EncryptedIndex, query: &Query) -> Result<Report, AnalysisError> {
    analyse_traced(index, query).map(|(r, _)| r)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlainNode {
    pub label: String,
    pub line: u32,
    pub depth: u32,
    pub order: u32,
    pub cf_type: i32,
}

/// A decrypted vulnerable path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlainFinding {
    /// File holding the sink, when known.
    pub file_id: Option<u32>,
    pub sink_line: u32,
    pub source_line: u32,
    /// Sink first, input source last.
    pub nodes: Vec<PlainNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainReport {
    pub task: String,
    /// Sorted.
    pub findings: Vec<PlainFinding>,
}

impl PlainReport {
    pub fn new(task: String, mut findings: Vec<PlainFinding>) -> PlainReport {
        findings.sort();
        PlainReport { task, findings }
    }
}

/// Developer-side material for reading reports: the master keys, every
/// symbol label of the application and, per left symbol, the file of each
/// of its pairs in counter order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeveloperKeys {
    pub mk: MasterKeySet,
    pub labels: BTreeSet<String>,
    pub pair_files: BTreeMap<String, Vec<u32>>,
}

impl DeveloperKeys {
    pub fn new(mk: MasterKeySet, dcfg: &Dcfg) -> DeveloperKeys {
        let labels = dcfg.symbols().iter().map(Symbol::label).collect();
        DeveloperKeys { mk, labels, pair_files: pair_files(dcfg) }
    }
}

/// Left label to the file of each of its pairs, counter 1 first.
pub fn pair_files(dcfg: &Dcfg) -> BTreeMap<String, Vec<u32>> {
    let mut out: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for p in &dcfg.pairs {
        out.entry(p.left.label()).or_default().push(p.file_id);
    }
    out
}

pub(crate) fn finding(file_id: Option<u32>, nodes: Vec<PlainNode>) -> PlainFinding {
    PlainFinding {
        file_id,
        sink_line: nodes[0].line,
        source_line: nodes.last().map_or(0, |n| n.line),
        nodes,
    }
}

pub fn decrypt_report(report: &Report, keys: &DeveloperKeys) -> Result<PlainReport, AnalysisError> {
    let mode = report.meta.mode;
    let dict: BTreeMap<Vec<u8>, &String> = keys.labels.iter().map(|l| (token_handle(mode, &keys.mk, l).d, l)).collect();
    let ore_keys = keys.mk.ore_keys();
    let mut findings = Vec::new();
    for p in &report.paths {
        let mut nodes = Vec::with_capacity(p.nodes.len());
        for n in &p.nodes {
            let label = *dict.get(&n.token).ok_or(AnalysisError::UnknownToken)?;
            let mut v = [0u32; 4];
            for (i, f) in n.fields.iter().enumerate() {
                v[i] = match f {
                    Field::Plain(x) => *x,
                    Field::Ore(c) => ore::ore_decrypt(ore_keys[i], c).map_err(AnalysisError::Field)?,
                };
            }
            nodes.push(PlainNode { label: label.clone(), line: v[0], depth: v[1], order: v[2], cf_type: from_offset_binary(v[3]) });
        }
        if nodes.is_empty() {
            continue;
        }
        let file_id = keys.pair_files.get(&nodes[0].label).and_then(|f| f.get(p.sink_counter as usize - 1)).copied();
        findings.push(finding(file_id, nodes));
    }
    Ok(PlainReport::new(report.task.clone(), findings))
}
