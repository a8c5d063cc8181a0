//! Timing and storage of the code-privacy phase in the three index modes.

use std::fmt::Write as _;
use std::time::Duration;

use cca_core::index::IndexMode;
use cca_core::itl::{RuleSet, TaskKnowledge};
use cca_core::{HashMode, MasterKeySet};
use rand::SeedableRng;

use crate::pipeline::{self, Timings};
use crate::sources::SourceSet;
use crate::Error;

pub const DEFAULT_RUNS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRow {
    pub mode: IndexMode,
    /// Mean over the runs.
    pub timings: Timings,
    pub index_bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub runs: usize,
    pub source_bytes: u64,
    pub pairs: usize,
    /// Plain, DET+RND, full; in that order.
    pub rows: Vec<ModeRow>,
}

/// `(t - t_plain) / t_plain * 100`.
pub fn overhead_pct(t: Duration, plain: Duration) -> f64 {
    if plain.is_zero() {
        return 0.0;
    }
    (t.as_secs_f64() - plain.as_secs_f64()) / plain.as_secs_f64() * 100.0
}

impl BenchReport {
    pub fn row(&self, mode: IndexMode) -> &ModeRow {
        self.rows.iter().find(|r| r.mode == mode).expect("every mode is measured")
    }

    pub fn overhead(&self, mode: IndexMode) -> f64 {
        overhead_pct(self.row(mode).timings.total(), self.row(IndexMode::Plain).timings.total())
    }

    pub fn to_table(&self) -> String {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let mut s = String::new();
        let _ = writeln!(s, "source: {} bytes, {} DCFG pairs, mean of {} runs", self.source_bytes, self.pairs, self.runs);
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12}",
            "mode", "lexer ms", "itl ms", "dcfg ms", "index ms", "total ms", "enc OH %", "index bytes"
        );
        for r in &self.rows {
            let t = &r.timings;
            let oh = match r.mode {
                IndexMode::Plain => "-".to_string(),
                m => format!("{:.2}", self.overhead(m)),
            };
            let _ = writeln!(
                s,
                "{:<8} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10} {:>12}",
                r.mode.name(),
                ms(t.lexer),
                ms(t.itl),
                ms(t.dcfg),
                ms(t.index),
                ms(t.total()),
                oh,
                r.index_bytes
            );
        }
        s
    }
}

/// Run the full code-privacy phase `runs` times per mode (modes interleaved,
/// after one untimed warm-up pass) and average.
pub fn bench(sources: &SourceSet, rules: &RuleSet, tk: &TaskKnowledge, runs: usize) -> Result<BenchReport, Error> {
    if runs == 0 {
        return Err(Error::Usage("--runs must be at least 1".into()));
    }
    let mut rng = rand::rngs::StdRng::from_entropy();
    let mk = MasterKeySet::generate(128, HashMode::Sha1, &mut rng).map_err(|e| Error::stage("keys", e))?;
    let mut sums = [Timings::default(); 3];
    let mut sizes = [0usize; 3];
    let mut pairs = 0;
    for round in 0..=runs {
        for (i, mode) in IndexMode::ALL.into_iter().enumerate() {
            let mut c = pipeline::compile(sources, rules, tk)?;
            let idx = pipeline::encrypt(&mut c, &mk, mode, &mut rng)?;
            pairs = c.dcfg.len();
            sizes[i] = idx.stats().bytes;
            if round == 0 {
                continue;
            }
            let s = &mut sums[i];
            s.lexer += c.timings.lexer;
            s.itl += c.timings.itl;
            s.dcfg += c.timings.dcfg;
            s.index += c.timings.index;
        }
    }
    let n = runs as u32;
    let rows = IndexMode::ALL
        .into_iter()
        .enumerate()
        .map(|(i, mode)| {
            let s = sums[i];
            ModeRow {
                mode,
                timings: Timings { lexer: s.lexer / n, itl: s.itl / n, dcfg: s.dcfg / n, index: s.index / n },
                index_bytes: sizes[i],
            }
        })
        .collect();
    Ok(BenchReport { runs, source_bytes: sources.total_bytes, pairs, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overhead_definition() {
        assert!((overhead_pct(Duration::from_millis(150), Duration::from_millis(100)) - 50.0).abs() < 1e-9);
        assert_eq!(overhead_pct(Duration::from_millis(1), Duration::ZERO), 0.0);
    }

    #[test]
    fn table_has_every_mode() {
        let src = SourceSet {
            files: vec![cca_core::SourceFile::new("a.php", "<?php $a = $_GET['x'];\necho $a;\n", 0)],
            ..Default::default()
        };
        let r = bench(&src, &RuleSet::default(), &TaskKnowledge::default(), 2).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.pairs, 2);
        let t = r.to_table();
        for m in ["plain", "det-rnd", "full", "enc OH %"] {
            assert!(t.contains(m), "{t}");
        }
        assert!(r.row(IndexMode::Full).index_bytes > r.row(IndexMode::DetRnd).index_bytes);
        assert!(bench(&src, &RuleSet::default(), &TaskKnowledge::default(), 0).is_err());
    }
}
