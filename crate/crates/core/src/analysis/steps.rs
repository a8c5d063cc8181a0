//! The analysis steps, generic over how tokens are named and how the four
//! numeric fields are compared. The encrypted analyser instantiates them
//! with DET handles and ORE ciphertexts, the reference oracle with
//! plaintext symbols and integers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

/// Index of each field in a node's `fields` array.
pub const LINE: usize = 0;
pub const DEPTH: usize = 1;
pub const ORDER: usize = 2;
pub const TYPE: usize = 3;

/// Upper bound on enumerated paths before traversal gives up.
pub const MAX_PATHS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node<T, F> {
    pub token: T,
    /// line, depth, order, cf_type
    pub fields: [F; 4],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path<T, F> {
    /// Counter of the sensitive-token entry the path starts from.
    pub sink_counter: u32,
    /// `nodes[0]` is the sensitive token carrying the sink position.
    pub nodes: Vec<Node<T, F>>,
}

impl<T, F> Path<T, F> {
    pub fn sink(&self) -> &Node<T, F> {
        &self.nodes[0]
    }

    pub fn leaf(&self) -> &Node<T, F> {
        self.nodes.last().expect("paths are never empty")
    }
}

/// Lookup of `(token, counter)` entries.
pub trait EntrySource {
    type Token: Clone + Ord;
    type Field: Clone;
    type Error;

    fn probe(&mut self, token: &Self::Token, counter: u32) -> Result<Option<(Self::Token, [Self::Field; 4])>, Self::Error>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraversalError<E> {
    Source(E),
    TooManyPaths(usize),
}

type Entries<S> = Vec<(
    u32,
    <S as EntrySource>::Token,
    [<S as EntrySource>::Field; 4],
)>;

struct Walker<'s, S: EntrySource> {
    src: &'s mut S,
    cache: BTreeMap<S::Token, Entries<S>>,
    visited: BTreeSet<(S::Token, u32)>,
    out: Vec<Path<S::Token, S::Field>>,
}

impl<S: EntrySource> Walker<'_, S> {
    fn entries(&mut self, token: &S::Token) -> Result<Entries<S>, S::Error> {
        if let Some(e) = self.cache.get(token) {
            return Ok(e.clone());
        }
        let mut found = Vec::new();
        let mut c = 1;
        while let Some((next, fields)) = self.src.probe(token, c)? {
            found.push((c, next, fields));
            c += 1;
        }
        self.cache.insert(token.clone(), found.clone());
        Ok(found)
    }

    fn emit(&mut self, sink_counter: u32, nodes: &[Node<S::Token, S::Field>]) -> Result<(), TraversalError<S::Error>> {
        if self.out.len() >= MAX_PATHS {
            return Err(TraversalError::TooManyPaths(MAX_PATHS));
        }
        self.out.push(Path { sink_counter, nodes: nodes.to_vec() });
        Ok(())
    }

    fn walk(&mut self, sink_counter: u32, prefix: &mut Vec<Node<S::Token, S::Field>>) -> Result<(), TraversalError<S::Error>> {
        let token = prefix.last().expect("non-empty prefix").token.clone();
        let entries = self.entries(&token).map_err(TraversalError::Source)?;
        let mut followed = false;
        for (c, next, fields) in entries {
            let key = (token.clone(), c);
            if self.visited.contains(&key) {
                continue;
            }
            followed = true;
            self.visited.insert(key.clone());
            prefix.push(Node { token: next, fields });
            self.walk(sink_counter, prefix)?;
            prefix.pop();
            self.visited.remove(&key);
        }
        if !followed {
            self.emit(sink_counter, prefix)?;
        }
        Ok(())
    }
}

/// Enumerate every path starting at an entry of `sens`. A path ends at a
/// token without entries, or where every remaining entry was already used
/// on the same path (cycles are cut). Each token's entries are probed once,
/// counters `1, 2, ...` up to the first miss.
pub fn find_paths<S: EntrySource>(src: &mut S, sens: &S::Token) -> Result<Vec<Path<S::Token, S::Field>>, TraversalError<S::Error>> {
    let mut w = Walker { src, cache: BTreeMap::new(), visited: BTreeSet::new(), out: Vec::new() };
    let sinks = w.entries(sens).map_err(TraversalError::Source)?;
    for (c, next, fields) in sinks {
        let mut prefix = vec![Node { token: sens.clone(), fields: fields.clone() }, Node { token: next, fields }];
        w.visited.insert((sens.clone(), c));
        w.walk(c, &mut prefix)?;
        w.visited.remove(&(sens.clone(), c));
    }
    Ok(w.out)
}

fn same_branch<T, F>(a: &Node<T, F>, b: &Node<T, F>, cmp: &impl Fn(&F, &F) -> Ordering) -> bool {
    [DEPTH, ORDER, TYPE].iter().all(|&i| cmp(&a.fields[i], &b.fields[i]) == Ordering::Equal)
}

/// Drop paths that pass a token written after the sink in the sink's own
/// branch: such a value cannot reach the sink.
pub fn remove_invalid<T, F>(paths: Vec<Path<T, F>>, cmp: &impl Fn(&F, &F) -> Ordering) -> Vec<Path<T, F>> {
    paths
        .into_iter()
        .filter(|p| {
            let sink = p.sink();
            !p.nodes[1..]
                .iter()
                .any(|n| cmp(&n.fields[LINE], &sink.fields[LINE]) == Ordering::Greater && same_branch(n, sink, cmp))
        })
        .collect()
}

/// Group paths by sink (token and line), ordered by sink line.
pub fn aggregate<T: PartialEq, F>(paths: Vec<Path<T, F>>, cmp: &impl Fn(&F, &F) -> Ordering) -> Vec<Vec<Path<T, F>>> {
    let mut groups: Vec<Vec<Path<T, F>>> = Vec::new();
    for p in paths {
        let slot = groups.iter_mut().find(|g| {
            let s = g[0].sink();
            s.token == p.sink().token && cmp(&s.fields[LINE], &p.sink().fields[LINE]) == Ordering::Equal
        });
        match slot {
            Some(g) => g.push(p),
            None => groups.push(vec![p]),
        }
    }
    groups.sort_by(|a, b| cmp(&a[0].sink().fields[LINE], &b[0].sink().fields[LINE]));
    groups
}

fn same_signature<T, F>(a: &Path<T, F>, b: &Path<T, F>, cmp: &impl Fn(&F, &F) -> Ordering) -> bool {
    a.nodes.len() == b.nodes.len() && a.nodes[1..].iter().zip(&b.nodes[1..]).all(|(x, y)| same_branch(x, y, cmp))
}

fn same_node<T: PartialEq, F>(a: &Node<T, F>, b: &Node<T, F>, cmp: &impl Fn(&F, &F) -> Ordering) -> bool {
    a.token == b.token && a.fields.iter().zip(&b.fields).all(|(x, y)| cmp(x, y) == Ordering::Equal)
}

/// Resolve control flow inside one sink group.
///
/// Paths are split into classes sharing the same sequence of branch
/// positions. Within a class, wherever the paths fork, only the alternatives
/// whose token is the latest one still written before the sink survive
/// (ties are all kept); if no alternative precedes the sink, the latest one
/// overall is kept.
pub fn resolve_control_flow<T: PartialEq + Clone, F: Clone>(
    group: Vec<Path<T, F>>,
    cmp: &impl Fn(&F, &F) -> Ordering,
) -> Vec<Path<T, F>> {
    let mut classes: Vec<Vec<Path<T, F>>> = Vec::new();
    for p in group {
        match classes.iter_mut().find(|c| same_signature(&c[0], &p, cmp)) {
            Some(c) => c.push(p),
            None => classes.push(vec![p]),
        }
    }
    let mut out = Vec::new();
    for class in classes {
        let sink_line = class[0].sink().fields[LINE].clone();
        let refs: Vec<&Path<T, F>> = class.iter().collect();
        for p in select(refs, 1, &sink_line, cmp) {
            out.push(p.clone());
        }
    }
    out
}

fn select<'a, T: PartialEq, F>(
    paths: Vec<&'a Path<T, F>>,
    level: usize,
    sink_line: &F,
    cmp: &impl Fn(&F, &F) -> Ordering,
) -> Vec<&'a Path<T, F>> {
    if paths.len() <= 1 || level >= paths[0].nodes.len() {
        return paths;
    }
    let mut children: Vec<Vec<&'a Path<T, F>>> = Vec::new();
    for p in paths {
        match children.iter_mut().find(|c| same_node(&c[0].nodes[level], &p.nodes[level], cmp)) {
            Some(c) => c.push(p),
            None => children.push(vec![p]),
        }
    }
    if children.len() > 1 {
        let line = |c: &Vec<&'a Path<T, F>>| &c[0].nodes[level].fields[LINE];
        let before: Vec<_> = children.iter().filter(|c| cmp(line(c), sink_line) == Ordering::Less).cloned().collect();
        let pool = if before.is_empty() { children } else { before };
        let mut best = 0;
        for (i, c) in pool.iter().enumerate().skip(1) {
            if cmp(line(c), line(&pool[best])) == Ordering::Greater {
                best = i;
            }
        }
        let top = &pool[best];
        children = pool.iter().filter(|c| cmp(line(c), line(top)) == Ordering::Equal).cloned().collect();
    }
    children.into_iter().flat_map(|c| select(c, level + 1, sink_line, cmp)).collect()
}

/// A selected path is vulnerable when it starts at user input and never
/// passes the sanitizer.
pub fn is_vulnerable<T: PartialEq, F>(path: &Path<T, F>, input: &T, san: &T) -> bool {
    path.leaf().token == *input && path.nodes.iter().all(|n| n.token != *san)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;

    /// Hand-written graph: token -> list of (next, line, depth, order, type).
    struct Graph(BTreeMap<&'static str, Vec<(&'static str, [u32; 4])>>, usize);

    impl EntrySource for Graph {
        type Token = &'static str;
        type Field = u32;
        type Error = ();
        fn probe(&mut self, t: &&'static str, c: u32) -> Result<Option<(&'static str, [u32; 4])>, ()> {
            self.1 += 1;
            Ok(self.0.get(t).and_then(|v| v.get(c as usize - 1)).copied())
        }
    }

    fn graph(edges: &[(&'static str, &'static str, [u32; 4])]) -> Graph {
        let mut m: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for &(l, r, f) in edges {
            m.entry(l).or_default().push((r, f));
        }
        Graph(m, 0)
    }

    fn tokens(p: &Path<&'static str, u32>) -> Vec<&'static str> {
        p.nodes.iter().map(|n| n.token).collect()
    }

    #[test]
    fn cycles_are_cut_and_probes_are_cached() {
        let mut g = graph(&[("S", "A", [3, 0, 0, 0]), ("A", "B", [2, 0, 0, 0]), ("B", "A", [1, 0, 0, 0])]);
        let paths = find_paths(&mut g, &"S").unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(tokens(&paths[0]), ["S", "A", "B", "A"]);
        // S: 2 probes, A: 2, B: 2
        assert_eq!(g.1, 6);
    }

    #[test]
    fn no_sink_entries_no_paths() {
        let mut g = graph(&[("A", "B", [1, 0, 0, 0])]);
        assert!(find_paths(&mut g, &"S").unwrap().is_empty());
    }

    #[test]
    fn later_write_in_sink_branch_is_invalid() {
        let mut g = graph(&[
            ("S", "A", [5, 0, 0, 0]),
            ("A", "X", [2, 0, 0, 0]),
            ("A", "Y", [7, 0, 0, 0]),
            ("A", "Z", [7, 1, 0, 1]),
        ]);
        let paths = remove_invalid(find_paths(&mut g, &"S").unwrap(), &u32::cmp);
        let leaves: Vec<_> = paths.iter().map(|p| p.leaf().token).collect();
        assert_eq!(leaves, ["X", "Z"]);
    }

    #[test]
    fn closest_preceding_definition_wins() {
        let mut g = graph(&[
            ("S", "C", [6, 0, 0, 0]),
            ("C", "A", [3, 0, 0, 0]),
            ("C", "B", [4, 0, 0, 0]),
            ("C", "D", [9, 0, 0, 0]),
        ]);
        let paths = remove_invalid(find_paths(&mut g, &"S").unwrap(), &u32::cmp);
        let groups = aggregate(paths, &u32::cmp);
        assert_eq!(groups.len(), 1);
        let chosen = resolve_control_flow(groups.into_iter().next().unwrap(), &u32::cmp);
        assert_eq!(chosen.len(), 1);
        assert_eq!(tokens(&chosen[0]), ["S", "C", "B"]);
    }

    #[test]
    fn distinct_branches_are_all_kept() {
        let mut g = graph(&[
            ("S", "C", [8, 0, 0, 0]),
            ("C", "A", [3, 1, 0, 1]),
            ("C", "B", [5, 1, 0, 2]),
        ]);
        let paths = find_paths(&mut g, &"S").unwrap();
        let chosen = resolve_control_flow(paths, &u32::cmp);
        assert_eq!(chosen.len(), 2);
    }

    #[test]
    fn equal_lines_are_ties() {
        let mut g = graph(&[("S", "C", [8, 0, 0, 0]), ("C", "A", [3, 0, 0, 0]), ("C", "B", [3, 0, 0, 0])]);
        let chosen = resolve_control_flow(find_paths(&mut g, &"S").unwrap(), &u32::cmp);
        assert_eq!(chosen.len(), 2);
    }

    #[test]
    fn no_preceding_alternative_keeps_latest() {
        let mut g = graph(&[("S", "C", [2, 0, 0, 0]), ("C", "A", [4, 0, 0, 0]), ("C", "B", [6, 0, 0, 0])]);
        let chosen = resolve_control_flow(find_paths(&mut g, &"S").unwrap(), &u32::cmp);
        assert_eq!(chosen.len(), 1);
        assert_eq!(chosen[0].leaf().token, "B");
    }

    #[test]
    fn groups_sorted_by_sink_line() {
        let mut g = graph(&[("S", "A", [9, 0, 0, 0]), ("S", "B", [4, 0, 0, 0]), ("S", "C", [9, 0, 0, 0])]);
        let groups = aggregate(find_paths(&mut g, &"S").unwrap(), &u32::cmp);
        let sizes: Vec<_> = groups.iter().map(|g| (g[0].sink().fields[LINE], g.len())).collect();
        assert_eq!(sizes, [(4, 1), (9, 2)]);
        assert_eq!(groups[1][0].sink_counter, 1);
        assert_eq!(groups[1][1].sink_counter, 3);
    }

    #[test]
    fn vulnerability_check() {
        let mut g = graph(&[("S", "IN", [1, 0, 0, 0]), ("S", "SAN", [2, 0, 0, 0]), ("SAN", "IN", [2, 0, 0, 0])]);
        let paths = find_paths(&mut g, &"S").unwrap();
        let v: Vec<_> = paths.iter().map(|p| is_vulnerable(p, &"IN", &"SAN")).collect();
        assert_eq!(v, [true, false]);
    }
}
