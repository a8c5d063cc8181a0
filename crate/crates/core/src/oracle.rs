//! Plaintext reference analysis.
//!
//! Runs the same steps as [`crate::analysis::analyse`] directly on the DCFG,
//! without keys or an index. Findings of both must agree.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::convert::Infallible;

use crate::analysis::steps::{self, EntrySource, TraversalError};
use crate::analysis::steps::Path;
use crate::analysis::{
    finding, select_vulnerable, trace_steps, AnalysisError, AnalysisStats, AnalysisTask, PlainNode, PlainReport, Trace,
};
use crate::crypto::{from_offset_binary, offset_binary};
use crate::dcfg::{Dcfg, DcfgPair, Symbol};

struct DcfgSource<'a> {
    by_left: BTreeMap<&'a Symbol, Vec<&'a DcfgPair>>,
}

impl EntrySource for DcfgSource<'_> {
    type Token = Symbol;
    type Field = u32;
    type Error = Infallible;

    fn probe(&mut self, token: &Symbol, counter: u32) -> Result<Option<(Symbol, [u32; 4])>, Infallible> {
        let pair = self.by_left.get(token).and_then(|v| v.get(counter as usize - 1));
        Ok(pair.map(|p| {
            let r = &p.right;
            (r.symbol.clone(), [r.line, r.depth, r.order, offset_binary(r.cf_type)])
        }))
    }
}

fn source(dcfg: &Dcfg) -> DcfgSource<'_> {
    let mut by_left: BTreeMap<&Symbol, Vec<&DcfgPair>> = BTreeMap::new();
    for p in &dcfg.pairs {
        by_left.entry(&p.left).or_default().push(p);
    }
    DcfgSource { by_left }
}

fn raw_paths(src: &mut DcfgSource<'_>, task: &AnalysisTask) -> Result<Vec<Path<Symbol, u32>>, AnalysisError> {
    steps::find_paths(src, &task.sens).map_err(|e| match e {
        TraversalError::TooManyPaths(n) => AnalysisError::TooManyPaths(n),
        TraversalError::Source(never) => match never {},
    })
}

/// Findings of `task` on `dcfg`, with the intermediate counts.
pub fn plaintext_analyse_with_stats(dcfg: &Dcfg, task: &AnalysisTask) -> Result<(PlainReport, AnalysisStats), AnalysisError> {
    let mut src = source(dcfg);
    let raw = raw_paths(&mut src, task)?;
    let mut stats = AnalysisStats::default();
    let found = select_vulnerable(raw, &task.input, &task.san, &u32::cmp, &mut stats);
    let findings = found.into_iter().map(|p| plain_finding(&src, task, p)).collect();
    Ok((PlainReport::new(task.name.clone(), findings), stats))
}

fn plain_finding(src: &DcfgSource<'_>, task: &AnalysisTask, p: Path<Symbol, u32>) -> crate::analysis::PlainFinding {
    let file_id = src.by_left.get(&task.sens).and_then(|v| v.get(p.sink_counter as usize - 1)).map(|s| s.file_id);
    let nodes = p
        .nodes
        .into_iter()
        .map(|n| PlainNode {
            label: n.token.label(),
            line: n.fields[0],
            depth: n.fields[1],
            order: n.fields[2],
            cf_type: from_offset_binary(n.fields[3]),
        })
        .collect();
    finding(file_id, nodes)
}

/// Every intermediate result of the plaintext run.
pub fn plaintext_trace(dcfg: &Dcfg, task: &AnalysisTask) -> Result<Trace<Symbol, u32>, AnalysisError> {
    let mut src = source(dcfg);
    let raw = raw_paths(&mut src, task)?;
    Ok(trace_steps(raw, &task.input, &task.san, &u32::cmp))
}

pub fn plaintext_analyse(dcfg: &Dcfg, task: &AnalysisTask) -> Result<PlainReport, AnalysisError> {
    plaintext_analyse_with_stats(dcfg, task).map(|(r, _)| r)
}
