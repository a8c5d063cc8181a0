//! Brute-force reference for the detection result, written from the rules
//! alone and sharing no code with the library's analysis steps.
//!
//! Paths are built with an explicit work list instead of recursion, and
//! closest-path selection is decided per path by quantifying over the other
//! paths of its class instead of walking a prefix tree.

use cca_core::dcfg::Dcfg;

/// `(label, line, depth, order, cf_type)`.
pub type Tuple = (String, u32, u32, u32, i32);

#[derive(Clone)]
struct Step {
    pair: usize,
    node: Tuple,
}

/// Every vulnerable path of the task, as sorted node tuple lists.
pub fn vulnerable_paths(dcfg: &Dcfg, sens: &str, input: &str, san: &str) -> Vec<Vec<Tuple>> {
    let left: Vec<String> = dcfg.pairs.iter().map(|p| p.left.label()).collect();
    let node = |i: usize| {
        let r = &dcfg.pairs[i].right;
        (r.symbol.label(), r.line, r.depth, r.order, r.cf_type)
    };
    let outgoing = |label: &str| -> Vec<usize> { (0..left.len()).filter(|&i| left[i] == label).collect() };

    let mut complete: Vec<Vec<Tuple>> = Vec::new();
    let mut work: Vec<Vec<Step>> = Vec::new();
    for i in outgoing(sens) {
        let n = node(i);
        let sink = (sens.to_string(), n.1, n.2, n.3, n.4);
        work.push(vec![Step { pair: usize::MAX, node: sink }, Step { pair: i, node: n }]);
    }
    while let Some(path) = work.pop() {
        let last = &path.last().unwrap().node.0;
        let next: Vec<usize> = outgoing(last).into_iter().filter(|i| path.iter().all(|s| s.pair != *i)).collect();
        if next.is_empty() {
            complete.push(path.iter().map(|s| s.node.clone()).collect());
            continue;
        }
        for i in next {
            let mut p = path.clone();
            p.push(Step { pair: i, node: node(i) });
            work.push(p);
        }
    }

    let branch = |t: &Tuple| (t.2, t.3, t.4);
    let valid: Vec<Vec<Tuple>> = complete
        .into_iter()
        .filter(|p| p[1..].iter().all(|n| !(n.1 > p[0].1 && branch(n) == branch(&p[0]))))
        .collect();

    let mut out = Vec::new();
    for p in &valid {
        let sink_line = p[0].1;
        let class: Vec<&Vec<Tuple>> = valid
            .iter()
            .filter(|q| {
                q[0].0 == p[0].0
                    && q[0].1 == sink_line
                    && q.len() == p.len()
                    && q[1..].iter().zip(&p[1..]).all(|(a, b)| branch(a) == branch(b))
            })
            .collect();
        let kept = (1..p.len()).all(|i| {
            let lines: Vec<u32> = class.iter().filter(|q| q[1..i] == p[1..i]).map(|q| q[i].1).collect();
            let before = lines.iter().copied().filter(|&l| l < sink_line).max();
            let chosen = before.unwrap_or_else(|| lines.iter().copied().max().unwrap());
            p[i].1 == chosen
        });
        let vulnerable = p.last().unwrap().0 == input && p.iter().all(|n| n.0 != san);
        if kept && vulnerable {
            out.push(p.clone());
        }
    }
    out.sort();
    out
}
