//! On-disk artifacts: index, keys, query and reports.
//!
//! The index is the binary `CCAIDX1` container from `cca_core::index`. Keys
//! and queries are a magic line followed by JSON; reports are JSON. See
//! `docs/formats.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use cca_core::analysis::{AnalysisStats, DeveloperKeys, EncryptedPath, PathNode, PlainReport, Query, Report};
use cca_core::crypto::{HashMode, MasterKeySet, OreCiphertext, TokenKeyPair};
use cca_core::index::{EncryptedIndex, Field, IndexMeta, IndexMode};
use serde::{Deserialize, Serialize};

use crate::Error;

pub const KEYS_MAGIC: &str = "CCAKEYS1";
pub const QUERY_MAGIC: &str = "CCAQRY1";
pub const REPORT_FORMAT: &str = "CCARPT1";

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8], private: bool) -> Result<(), Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    if private {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    #[cfg(not(unix))]
    let _ = private;
    let mut f = opts.open(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn unhex(s: &str, what: &str) -> Result<Vec<u8>, Error> {
    hex::decode(s).map_err(|_| Error::Format(format!("{what}: invalid hex")))
}

fn split_magic<'a>(text: &'a str, magic: &str, what: &str) -> Result<&'a str, Error> {
    match text.split_once('\n') {
        Some((first, rest)) if first.trim_end() == magic => Ok(rest),
        _ => Err(Error::Format(format!("not a {what} file (expected {magic} header)"))),
    }
}

fn hash_from(name: &str) -> Result<HashMode, Error> {
    HashMode::from_name(name).ok_or_else(|| Error::Format(format!("unknown hash mode {name}")))
}

fn mode_from(name: &str) -> Result<IndexMode, Error> {
    IndexMode::from_name(name).ok_or_else(|| Error::Format(format!("unknown index mode {name}")))
}

// ---- index ----

pub fn write_index(path: &Path, idx: &EncryptedIndex) -> Result<(), Error> {
    write_atomic(path, &idx.to_bytes(), false)
}

pub fn read_index(path: &Path) -> Result<EncryptedIndex, Error> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EncryptedIndex::from_bytes(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

// ---- keys ----

/// Everything the developer keeps: master keys, the index mode they were
/// used with, the symbol dictionary and the file table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeysFile {
    pub mode: IndexMode,
    pub developer: DeveloperKeys,
    pub files: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct KeysJson {
    lambda: u32,
    hash: String,
    mode: String,
    keys: BTreeMap<String, String>,
    labels: BTreeSet<String>,
    pair_files: BTreeMap<String, Vec<u32>>,
    files: Vec<String>,
}

const KEY_NAMES: [&str; 6] = ["k_d", "k_r", "k_line", "k_depth", "k_order", "k_type"];

impl KeysFile {
    pub fn to_text(&self) -> String {
        let mk = &self.developer.mk;
        let keys = KEY_NAMES.iter().zip(mk.keys()).map(|(n, k)| (n.to_string(), hex::encode(k))).collect();
        let j = KeysJson {
            lambda: mk.lambda,
            hash: mk.hash.name().into(),
            mode: self.mode.name().into(),
            keys,
            labels: self.developer.labels.clone(),
            pair_files: self.developer.pair_files.clone(),
            files: self.files.clone(),
        };
        format!("{KEYS_MAGIC}\n{}\n", serde_json::to_string_pretty(&j).expect("serializable"))
    }

    pub fn from_text(text: &str) -> Result<KeysFile, Error> {
        let body = split_magic(text, KEYS_MAGIC, "keys")?;
        let j: KeysJson = serde_json::from_str(body).map_err(|e| Error::Format(format!("keys file: {e}")))?;
        let mut keys = Vec::new();
        for n in KEY_NAMES {
            let k = j.keys.get(n).ok_or_else(|| Error::Format(format!("keys file: missing {n}")))?;
            keys.push(unhex(k, n)?);
        }
        let keys: [Vec<u8>; 6] = keys.try_into().expect("six keys");
        let mk = MasterKeySet::from_keys(j.lambda, hash_from(&j.hash)?, keys)
            .map_err(|e| Error::Format(format!("keys file: {e}")))?;
        Ok(KeysFile {
            mode: mode_from(&j.mode)?,
            developer: DeveloperKeys { mk, labels: j.labels, pair_files: j.pair_files },
            files: j.files,
        })
    }
}

pub fn write_keys(path: &Path, keys: &KeysFile) -> Result<(), Error> {
    write_atomic(path, keys.to_text().as_bytes(), true)
}

pub fn read_keys(path: &Path) -> Result<KeysFile, Error> {
    KeysFile::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

// ---- query ----

#[derive(Serialize, Deserialize)]
struct QueryJson {
    task: String,
    mode: String,
    hash: String,
    lambda: u32,
    sens_d: String,
    sens_r: String,
    input: String,
    san: String,
}

pub fn query_to_text(q: &Query) -> String {
    let j = QueryJson {
        task: q.task.clone(),
        mode: q.mode.name().into(),
        hash: q.hash.name().into(),
        lambda: q.lambda,
        sens_d: hex::encode(&q.sens.d),
        sens_r: hex::encode(&q.sens.r),
        input: hex::encode(&q.input),
        san: hex::encode(&q.san),
    };
    format!("{QUERY_MAGIC}\n{}\n", serde_json::to_string_pretty(&j).expect("serializable"))
}

pub fn query_from_text(text: &str) -> Result<Query, Error> {
    let body = split_magic(text, QUERY_MAGIC, "query")?;
    let j: QueryJson = serde_json::from_str(body).map_err(|e| Error::Format(format!("query file: {e}")))?;
    Ok(Query {
        task: j.task,
        mode: mode_from(&j.mode)?,
        hash: hash_from(&j.hash)?,
        lambda: j.lambda,
        sens: TokenKeyPair { d: unhex(&j.sens_d, "sens_d")?, r: unhex(&j.sens_r, "sens_r")? },
        input: unhex(&j.input, "input")?,
        san: unhex(&j.san, "san")?,
    })
}

// ---- encrypted report ----

#[derive(Serialize, Deserialize)]
struct ReportJson {
    format: String,
    task: String,
    mode: String,
    hash: String,
    lambda: u32,
    ore_width: u8,
    paths: Vec<PathJson>,
    stats: StatsJson,
}

#[derive(Serialize, Deserialize)]
struct PathJson {
    sink_counter: u32,
    nodes: Vec<NodeJson>,
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    token: String,
    fields: [String; 4],
}

#[derive(Serialize, Deserialize)]
pub struct StatsJson {
    pub probes: usize,
    pub misses: usize,
    pub raw_paths: usize,
    pub valid_paths: usize,
    pub groups: Vec<usize>,
    pub selected: usize,
    pub vulnerable: usize,
}

impl From<&AnalysisStats> for StatsJson {
    fn from(s: &AnalysisStats) -> StatsJson {
        StatsJson {
            probes: s.probes,
            misses: s.misses,
            raw_paths: s.raw_paths,
            valid_paths: s.valid_paths,
            groups: s.groups.clone(),
            selected: s.selected,
            vulnerable: s.vulnerable,
        }
    }
}

pub fn report_to_json(r: &Report) -> String {
    let paths = r
        .paths
        .iter()
        .map(|p| PathJson {
            sink_counter: p.sink_counter,
            nodes: p
                .nodes
                .iter()
                .map(|n| NodeJson {
                    token: hex::encode(&n.token),
                    fields: std::array::from_fn(|i| hex::encode(n.fields[i].to_bytes())),
                })
                .collect(),
        })
        .collect();
    let j = ReportJson {
        format: REPORT_FORMAT.into(),
        task: r.task.clone(),
        mode: r.meta.mode.name().into(),
        hash: r.meta.hash.name().into(),
        lambda: r.meta.lambda,
        ore_width: r.meta.ore_width,
        paths,
        stats: (&r.stats).into(),
    };
    serde_json::to_string_pretty(&j).expect("serializable") + "\n"
}

pub fn report_from_json(text: &str) -> Result<Report, Error> {
    let j: ReportJson = serde_json::from_str(text).map_err(|e| Error::Format(format!("report file: {e}")))?;
    if j.format != REPORT_FORMAT {
        return Err(Error::Format(format!("report file: unknown format {}", j.format)));
    }
    let meta = IndexMeta { mode: mode_from(&j.mode)?, hash: hash_from(&j.hash)?, lambda: j.lambda, ore_width: j.ore_width };
    let field = |s: &str| -> Result<Field, Error> {
        let b = unhex(s, "field")?;
        match meta.mode {
            IndexMode::Full => OreCiphertext::from_bytes(&b)
                .map(Field::Ore)
                .map_err(|e| Error::Format(format!("report field: {e}"))),
            _ => b
                .try_into()
                .map(|a: [u8; 4]| Field::Plain(u32::from_be_bytes(a)))
                .map_err(|_| Error::Format("report field: expected 4 bytes".into())),
        }
    };
    let mut paths = Vec::new();
    for p in j.paths {
        let mut nodes = Vec::new();
        for n in p.nodes {
            let f = [field(&n.fields[0])?, field(&n.fields[1])?, field(&n.fields[2])?, field(&n.fields[3])?];
            nodes.push(PathNode { token: unhex(&n.token, "token")?, fields: f });
        }
        paths.push(EncryptedPath { sink_counter: p.sink_counter, nodes });
    }
    let s = j.stats;
    let stats = AnalysisStats {
        probes: s.probes,
        misses: s.misses,
        raw_paths: s.raw_paths,
        valid_paths: s.valid_paths,
        groups: s.groups,
        selected: s.selected,
        vulnerable: s.vulnerable,
    };
    Ok(Report { task: j.task, meta, paths, stats })
}

// ---- plaintext report ----

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PlainReportJson {
    pub task: String,
    pub findings: Vec<FindingJson>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FindingJson {
    pub file: Option<String>,
    pub sink_line: u32,
    pub source_line: u32,
    pub path: Vec<PlainNodeJson>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct PlainNodeJson {
    pub token: String,
    pub line: u32,
    pub depth: u32,
    pub order: u32,
    pub cf_type: i32,
}

pub fn plain_report_json(r: &PlainReport, files: &[String]) -> PlainReportJson {
    PlainReportJson {
        task: r.task.clone(),
        findings: r
            .findings
            .iter()
            .map(|f| FindingJson {
                file: f.file_id.and_then(|i| files.get(i as usize).cloned()),
                sink_line: f.sink_line,
                source_line: f.source_line,
                path: f
                    .nodes
                    .iter()
                    .map(|n| PlainNodeJson {
                        token: n.label.clone(),
                        line: n.line,
                        depth: n.depth,
                        order: n.order,
                        cf_type: n.cf_type,
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn plain_report_to_json(r: &PlainReport, files: &[String]) -> String {
    serde_json::to_string_pretty(&plain_report_json(r, files)).expect("serializable") + "\n"
}

/// One line per finding: `TASK file:sink <- source: TOKEN(line) <- ...`.
pub fn plain_report_to_text(r: &PlainReport, files: &[String]) -> String {
    let mut s = String::new();
    for f in &plain_report_json(r, files).findings {
        let chain: Vec<String> = f.path.iter().map(|n| format!("{}({})", n.token, n.line)).collect();
        s.push_str(&format!(
            "{} {}:{} <- line {}: {}\n",
            r.task,
            f.file.as_deref().unwrap_or("?"),
            f.sink_line,
            f.source_line,
            chain.join(" <- ")
        ));
    }
    if r.findings.is_empty() {
        s.push_str(&format!("{}: no findings\n", r.task));
    }
    s
}
