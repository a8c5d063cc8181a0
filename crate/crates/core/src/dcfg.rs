//! Data and Control Flow Graph.
//!
//! Tokens are first annotated with their branch position `(depth, order,
//! cf_type)`; statements are then scanned for data dependencies, each
//! becoming a `left -> right` pair pointing from the dependent token to the
//! token it depends on.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::itl::{Ending, ItlStream, ItlToken, Keyword};

/// A DCFG vertex: an ITL token, optionally namespaced by file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub token: ItlToken,
    /// File namespace; only abstract tokens carry one.
    pub scope: Option<u32>,
}

impl Symbol {
    pub fn new(token: ItlToken) -> Self {
        Symbol { token, scope: None }
    }

    pub fn scoped(token: ItlToken, file_id: u32) -> Self {
        let scope = token.is_abstract().then_some(file_id);
        Symbol { token, scope }
    }

    /// Identifier used for key derivation, e.g. `VAR0`, `VAR0#2`, `INPUT`.
    pub fn label(&self) -> String {
        match self.scope {
            Some(s) => format!("{}#{s}", self.token),
            None => self.token.to_string(),
        }
    }

    pub fn parse_label(label: &str) -> Option<Symbol> {
        match label.split_once('#') {
            Some((tok, scope)) => {
                let token = ItlToken::parse(tok).filter(ItlToken::is_abstract)?;
                if scope.is_empty() || !scope.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                Some(Symbol { token, scope: Some(scope.parse().ok()?) })
            }
            None => ItlToken::parse(label).map(Symbol::new),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Branch position of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BranchScope {
    pub depth: u32,
    pub order: u32,
    pub cf_type: i32,
}

impl BranchScope {
    pub const TOP: BranchScope = BranchScope { depth: 0, order: 0, cf_type: 0 };

    pub fn new(depth: u32, order: u32, cf_type: i32) -> Self {
        BranchScope { depth, order, cf_type }
    }
}

impl fmt::Display for BranchScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.depth, self.order, self.cf_type)
    }
}

/// Right-hand side of a pair: the depended-on token where it is used.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtendedToken {
    pub symbol: Symbol,
    pub line: u32,
    pub depth: u32,
    pub order: u32,
    pub cf_type: i32,
}

impl ExtendedToken {
    pub fn scope(&self) -> BranchScope {
        BranchScope::new(self.depth, self.order, self.cf_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DcfgPair {
    pub left: Symbol,
    pub right: ExtendedToken,
    /// Source file the pair came from (not part of the pair identity).
    pub file_id: u32,
}

impl fmt::Display for DcfgPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.right;
        write!(
            f,
            "{} -> ({},{},{},{},{})",
            self.left, r.symbol, r.line, r.depth, r.order, r.cf_type
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dcfg {
    pub pairs: Vec<DcfgPair>,
}

impl Dcfg {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Namespace every abstract token by `file_id`.
    pub fn scoped(mut self, file_id: u32) -> Dcfg {
        for p in &mut self.pairs {
            if p.left.token.is_abstract() {
                p.left.scope = Some(file_id);
            }
            if p.right.symbol.token.is_abstract() {
                p.right.symbol.scope = Some(file_id);
            }
        }
        self
    }

    /// Concatenate per-file graphs in the given order.
    pub fn merge(parts: impl IntoIterator<Item = Dcfg>) -> Dcfg {
        let mut pairs = Vec::new();
        for p in parts {
            pairs.extend(p.pairs);
        }
        Dcfg { pairs }
    }

    /// Pairs whose left side is `sym`, in graph order (counter 1, 2, ...).
    pub fn entries<'a>(&'a self, sym: &'a Symbol) -> impl Iterator<Item = &'a DcfgPair> + 'a {
        self.pairs.iter().filter(move |p| p.left == *sym)
    }

    /// Every symbol occurring on either side.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for p in &self.pairs {
            out.insert(p.left.clone());
            out.insert(p.right.symbol.clone());
        }
        out
    }

    /// `LEFT -> (RIGHT,line,depth,order,type)`, one pair per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            out.push_str(&p.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct StructureError {
    pub line: u32,
    pub message: String,
}

/// An ITL token with its line and branch position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotated {
    pub token: ItlToken,
    pub line: u32,
    pub scope: BranchScope,
}

impl Annotated {
    fn extended(&self) -> ExtendedToken {
        ExtendedToken {
            symbol: Symbol::new(self.token.clone()),
            line: self.line,
            depth: self.scope.depth,
            order: self.scope.order,
            cf_type: self.scope.cf_type,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HeaderKind {
    Branch(BranchScope),
    Switch(BranchScope),
    Loop,
    Function,
}

#[derive(Debug)]
enum Frame {
    /// Root or a branch body; counts the if-chains opened directly inside it.
    Container {
        scope: BranchScope,
        chains: u32,
        /// Scope of a just-closed branch that an elseif / else may continue.
        last: Option<BranchScope>,
    },
    Header(HeaderKind),
    SwitchBody { scope: BranchScope, next_type: i32 },
    Loop,
    Function,
}

struct Annotator {
    stack: Vec<Frame>,
}

impl Annotator {
    fn err(line: u32, message: impl Into<String>) -> StructureError {
        StructureError { line, message: message.into() }
    }

    fn container(&mut self) -> (&mut u32, &mut Option<BranchScope>, BranchScope) {
        for f in self.stack.iter_mut().rev() {
            if let Frame::Container { scope, chains, last } = f {
                return (chains, last, *scope);
            }
        }
        unreachable!("root container is never popped")
    }

    fn current_scope(&self) -> BranchScope {
        for f in self.stack.iter().rev() {
            if let Frame::Container { scope, .. } = f {
                return *scope;
            }
        }
        BranchScope::TOP
    }

    fn new_chain(&mut self) -> BranchScope {
        let (chains, _, parent) = self.container();
        *chains += 1;
        BranchScope::new(parent.depth + 1, *chains, 1)
    }

    fn close_branch(&mut self, line: u32, ending: Ending) -> Result<(), StructureError> {
        let scope = match self.stack.last() {
            Some(Frame::Container { scope, .. }) if self.stack.len() > 1 => *scope,
            _ => return Err(Self::err(line, format!("{} without open branch", ending.name()))),
        };
        self.stack.pop();
        if matches!(ending, Ending::If | Ending::ElseIf | Ending::Else) {
            *self.container().1 = Some(scope);
        }
        Ok(())
    }

    fn step(&mut self, token: &ItlToken, line: u32) -> Result<BranchScope, StructureError> {
        let continues_chain = matches!(
            token,
            ItlToken::Keyword(Keyword::ElseIf | Keyword::Else)
        );
        let in_header = matches!(self.stack.last(), Some(Frame::Header(_)));
        if !continues_chain && !in_header {
            *self.container().1 = None;
        }
        let here = self.current_scope();
        match token {
            ItlToken::Keyword(Keyword::If) => {
                let scope = self.new_chain();
                self.stack.push(Frame::Header(HeaderKind::Branch(scope)));
            }
            ItlToken::Keyword(kw @ (Keyword::ElseIf | Keyword::Else)) if !in_header => {
                let (_, last, _) = self.container();
                let prev = last
                    .take()
                    .filter(|s| s.cf_type > 0)
                    .ok_or_else(|| Self::err(line, format!("{} without preceding if", kw.name())))?;
                let cf_type = if *kw == Keyword::Else { -1 } else { prev.cf_type + 1 };
                let scope = BranchScope::new(prev.depth, prev.order, cf_type);
                self.stack.push(Frame::Header(HeaderKind::Branch(scope)));
            }
            ItlToken::Keyword(Keyword::Switch) => {
                let scope = self.new_chain();
                self.stack.push(Frame::Header(HeaderKind::Switch(scope)));
            }
            ItlToken::Keyword(kw @ (Keyword::Case | Keyword::Default)) if !in_header => {
                let Some(Frame::SwitchBody { scope, next_type }) = self.stack.last_mut() else {
                    return Err(Self::err(line, format!("{} outside switch", kw.name())));
                };
                let cf_type = if *kw == Keyword::Default {
                    -1
                } else {
                    let t = *next_type;
                    *next_type += 1;
                    t
                };
                let scope = BranchScope::new(scope.depth, scope.order, cf_type);
                self.stack.push(Frame::Header(HeaderKind::Branch(scope)));
            }
            ItlToken::Keyword(Keyword::While | Keyword::For | Keyword::Foreach | Keyword::Do)
                if !in_header =>
            {
                self.stack.push(Frame::Header(HeaderKind::Loop));
            }
            ItlToken::Keyword(Keyword::Function) if !in_header => {
                self.stack.push(Frame::Header(HeaderKind::Function));
            }
            ItlToken::End(Ending::Cond) => {
                let Some(Frame::Header(kind)) = self.stack.pop() else {
                    return Err(Self::err(line, "END_COND without header"));
                };
                self.stack.push(match kind {
                    HeaderKind::Branch(scope) => Frame::Container { scope, chains: 0, last: None },
                    HeaderKind::Switch(scope) => Frame::SwitchBody { scope, next_type: 1 },
                    HeaderKind::Loop => Frame::Loop,
                    HeaderKind::Function => Frame::Function,
                });
            }
            ItlToken::End(e @ (Ending::If | Ending::ElseIf | Ending::Else | Ending::Case)) => {
                self.close_branch(line, *e)?;
            }
            ItlToken::End(Ending::Switch) => {
                if !matches!(self.stack.pop(), Some(Frame::SwitchBody { .. })) {
                    return Err(Self::err(line, "END_SWITCH without switch"));
                }
            }
            ItlToken::End(Ending::Loop) => {
                if !matches!(self.stack.pop(), Some(Frame::Loop)) {
                    return Err(Self::err(line, "END_LOOP without loop"));
                }
            }
            ItlToken::End(Ending::Function) => {
                if !matches!(self.stack.pop(), Some(Frame::Function)) {
                    return Err(Self::err(line, "END_FUNCTION without function"));
                }
            }
            _ => {}
        }
        Ok(here)
    }
}

/// Attach `(depth, order, cf_type)` to every token of the stream.
pub fn annotate_control_flow(stream: &ItlStream) -> Result<Vec<Annotated>, StructureError> {
    let mut a = Annotator {
        stack: alloc::vec![Frame::Container { scope: BranchScope::TOP, chains: 0, last: None }],
    };
    let mut out = Vec::with_capacity(stream.items.len());
    for item in &stream.items {
        let scope = a.step(&item.token, item.line)?;
        out.push(Annotated { token: item.token.clone(), line: item.line, scope });
    }
    if a.stack.len() != 1 {
        let line = stream.items.last().map_or(1, |i| i.line);
        return Err(Annotator::err(line, "unclosed control structure at end of file"));
    }
    Ok(out)
}

struct Finder<'a> {
    stream: &'a ItlStream,
    pairs: Vec<DcfgPair>,
    seen: BTreeSet<(Symbol, ExtendedToken)>,
    functions: Vec<ItlToken>,
}

impl Finder<'_> {
    fn pair(&mut self, left: &ItlToken, right: &Annotated) {
        let left = Symbol::new(left.clone());
        let right = right.extended();
        if self.seen.insert((left.clone(), right.clone())) {
            self.pairs.push(DcfgPair { left, right, file_id: self.stream.file_id });
        }
    }

    /// Innermost enclosing call of each token, or `None` at top level.
    fn parents(seg: &[Annotated]) -> Vec<Option<usize>> {
        let mut open: Vec<usize> = Vec::new();
        let mut out = Vec::with_capacity(seg.len());
        let skip_name = seg.first().map(|a| &a.token) == Some(&ItlToken::Keyword(Keyword::Function));
        for (j, a) in seg.iter().enumerate() {
            out.push(open.last().copied());
            if a.token.is_call() && !(skip_name && j == 1) {
                open.push(j);
            } else if a.token == ItlToken::End(Ending::Call) {
                open.pop();
            }
        }
        out
    }

    fn call_pairs(&mut self, seg: &[Annotated], parents: &[Option<usize>]) {
        for (j, a) in seg.iter().enumerate() {
            if let Some(p) = parents[j] {
                if a.token.is_value() {
                    self.pair(&seg[p].token, a);
                }
            }
        }
    }

    fn segment(&mut self, seg: &[Annotated], term: Ending) {
        let parents = Self::parents(seg);
        let top = |j: usize| parents[j].is_none();
        let first = seg.first().and_then(|a| a.token.keyword());
        match (term, first) {
            (Ending::Cond, Some(Keyword::Function)) => {
                if let Some(name) = seg.get(1) {
                    self.functions.push(name.token.clone());
                }
            }
            (Ending::Cond, Some(Keyword::Foreach)) => {
                let as_at = seg
                    .iter()
                    .position(|a| a.token == ItlToken::Keyword(Keyword::As))
                    .unwrap_or(seg.len());
                let targets: Vec<&Annotated> = (as_at..seg.len())
                    .filter(|&j| top(j) && matches!(seg[j].token, ItlToken::Var(_)))
                    .map(|j| &seg[j])
                    .collect();
                for t in targets {
                    for j in 1..as_at {
                        if top(j) && seg[j].token.is_value() {
                            self.pair(&t.token, &seg[j]);
                        }
                    }
                }
                self.call_pairs(seg, &parents);
            }
            (Ending::Return, _) => {
                if let Some(f) = self.functions.last().cloned() {
                    for (j, a) in seg.iter().enumerate() {
                        if top(j) && a.token.is_value() {
                            self.pair(&f, a);
                        }
                    }
                }
                self.call_pairs(seg, &parents);
            }
            (Ending::Function, _) => {
                self.functions.pop();
                self.call_pairs(seg, &parents);
            }
            (Ending::Assign | Ending::Stmt | Ending::Call, _) => {
                let ops: Vec<usize> = (0..seg.len())
                    .filter(|&j| top(j) && self.stream.is_assignment_op(&seg[j].token))
                    .collect();
                let mut bounds = Vec::with_capacity(ops.len() + 2);
                bounds.push(0usize);
                bounds.extend(ops.iter().map(|&o| o + 1));
                for (i, &op) in ops.iter().enumerate() {
                    let part = bounds[i]..op;
                    let Some(target) = part.clone().find(|&j| top(j) && matches!(seg[j].token, ItlToken::Var(_)))
                    else {
                        continue;
                    };
                    let rhs_end = ops.get(i + 1).copied().unwrap_or(seg.len());
                    let left = seg[target].token.clone();
                    for j in op + 1..rhs_end {
                        if top(j) && seg[j].token.is_value() {
                            self.pair(&left, &seg[j]);
                        }
                    }
                    let compound = matches!(
                        seg[op].token,
                        ItlToken::Op(k) if self.stream.op_role(k) == crate::itl::OpRole::CompoundAssign
                    );
                    if compound {
                        self.pair(&left, &seg[target]);
                    }
                }
                self.call_pairs(seg, &parents);
            }
            _ => self.call_pairs(seg, &parents),
        }
    }
}

/// Scan an annotated stream for data dependencies.
pub fn find_data_dependencies(stream: &ItlStream, annotated: &[Annotated]) -> Dcfg {
    let mut f = Finder { stream, pairs: Vec::new(), seen: BTreeSet::new(), functions: Vec::new() };
    let mut start = 0;
    let mut depth = 0usize;
    for (i, a) in annotated.iter().enumerate() {
        let skip_name = i == start + 1
            && annotated[start].token == ItlToken::Keyword(Keyword::Function);
        if a.token.is_call() && !skip_name {
            depth += 1;
            continue;
        }
        match a.token.ending() {
            Some(Ending::Call) => {
                depth = depth.saturating_sub(1);
                // a bare call statement has no ending of its own
                if depth == 0 && annotated[start].token.is_call() {
                    f.segment(&annotated[start..=i], Ending::Call);
                    start = i + 1;
                }
            }
            Some(e) => {
                f.segment(&annotated[start..i], e);
                start = i + 1;
                depth = 0;
            }
            None => {}
        }
    }
    if start < annotated.len() {
        f.segment(&annotated[start..], Ending::Stmt);
    }
    Dcfg { pairs: f.pairs }
}

/// Annotate and extract dependencies in one go.
pub fn build_dcfg(stream: &ItlStream) -> Result<Dcfg, StructureError> {
    let annotated = annotate_control_flow(stream)?;
    Ok(find_data_dependencies(stream, &annotated))
}
