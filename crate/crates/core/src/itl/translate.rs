//! LexToken stream to ITL stream.
//!
//! A statement-level recursive descent over the lexer output. Metacharacters
//! disappear, names are abstracted into counters, task knowledge names become
//! task tokens and ending tokens are inserted where instructions stop.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Ending, ItlItem, ItlStream, ItlToken, Keyword, OpRole, RuleSet, TaskKnowledge};
use crate::lexer::{LexGroup, LexKind, LexToken, SourceFile, CONSTRUCT_CALLS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{file}:{line}: {message} (at {token})")]
pub struct TranslateError {
    pub file: String,
    pub line: u32,
    pub token: String,
    pub message: String,
}

const CASTS: &[&str] = &[
    "int", "integer", "bool", "boolean", "float", "double", "real", "string", "array", "object",
    "unset", "binary",
];

/// Translate the lexer output of `src` into an ITL stream.
pub fn translate(
    src: &SourceFile,
    tokens: &[LexToken],
    rules: &RuleSet,
    tk: &TaskKnowledge,
) -> Result<ItlStream, TranslateError> {
    let mut tr = Translator {
        toks: tokens,
        pos: 0,
        rules,
        tk,
        file: &src.path,
        out: Vec::new(),
        vars: BTreeMap::new(),
        ops: BTreeMap::new(),
        op_kinds: Vec::new(),
        funcs: BTreeMap::new(),
    };
    while tr.pos < tr.toks.len() {
        tr.statement()?;
    }
    Ok(ItlStream {
        file_id: src.file_id,
        items: tr.out,
        op_kinds: tr.op_kinds,
    })
}

struct Translator<'a> {
    toks: &'a [LexToken],
    pos: usize,
    rules: &'a RuleSet,
    tk: &'a TaskKnowledge,
    file: &'a str,
    out: Vec<ItlItem>,
    vars: BTreeMap<String, u32>,
    ops: BTreeMap<String, u32>,
    op_kinds: Vec<LexKind>,
    funcs: BTreeMap<String, u32>,
}

type Res<T = ()> = Result<T, TranslateError>;

impl<'a> Translator<'a> {
    fn peek(&self) -> Option<&'a LexToken> {
        self.toks.get(self.pos)
    }

    fn peek_kind(&self) -> Option<LexKind> {
        self.peek().map(|t| t.kind)
    }

    fn peek_at(&self, n: usize) -> Option<&'a LexToken> {
        self.toks.get(self.pos + n)
    }

    fn last_line(&self) -> u32 {
        self.pos
            .checked_sub(1)
            .and_then(|i| self.toks.get(i))
            .or_else(|| self.toks.last())
            .map_or(1, |t| t.line)
    }

    fn err_at(&self, tok: Option<&LexToken>, message: impl Into<String>) -> TranslateError {
        let (line, token) = match tok {
            Some(t) => (t.line, alloc::format!("{} {:?}", t.kind, t.value)),
            None => (self.last_line(), "end of file".to_string()),
        };
        TranslateError {
            file: self.file.to_string(),
            line,
            token,
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Res<&'a LexToken> {
        let t = self
            .peek()
            .ok_or_else(|| self.err_at(None, "unexpected end of file"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, kind: LexKind) -> Res<&'a LexToken> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(t)
            }
            other => Err(self.err_at(other, alloc::format!("expected {kind}"))),
        }
    }

    fn emit(&mut self, token: ItlToken, line: u32) {
        self.out.push(ItlItem { token, line });
    }

    fn emit_kw(&mut self, kw: Keyword, line: u32) {
        self.emit(ItlToken::Keyword(kw), line);
    }

    fn emit_end(&mut self, e: Ending, line: u32) {
        debug_assert!(self.rules.endings.contains(&e));
        self.emit(ItlToken::End(e), line);
    }

    fn var_token(&mut self, name: &str) -> ItlToken {
        if let Some(t) = self.tk.lookup_var(name) {
            return t.clone();
        }
        let next = self.vars.len() as u32;
        ItlToken::Var(*self.vars.entry(name.to_string()).or_insert(next))
    }

    fn call_token(&mut self, name: &str) -> ItlToken {
        if let Some(t) = self.tk.lookup_call(name) {
            return t.clone();
        }
        let next = self.funcs.len() as u32;
        ItlToken::FuncCall(*self.funcs.entry(name.to_ascii_lowercase()).or_insert(next))
    }

    fn op_token(&mut self, tok: &LexToken) -> ItlToken {
        let key = tok.value.to_ascii_lowercase();
        if let Some(k) = self.ops.get(&key) {
            return ItlToken::Op(*k);
        }
        let k = self.op_kinds.len() as u32;
        self.op_kinds.push(tok.kind);
        self.ops.insert(key, k);
        ItlToken::Op(k)
    }

    fn is_assign(&self, token: &ItlToken) -> bool {
        match token {
            ItlToken::Op(k) => self
                .op_kinds
                .get(*k as usize)
                .is_some_and(|kind| OpRole::of(*kind).is_assignment()),
            _ => false,
        }
    }

    /// An assignment operator outside any call's arguments in `out[start..]`.
    fn has_top_assign(&self, start: usize) -> bool {
        let mut depth = 0usize;
        for item in &self.out[start..] {
            if item.token.is_call() {
                depth += 1;
            } else if item.token == ItlToken::End(Ending::Call) {
                depth = depth.saturating_sub(1);
            } else if depth == 0 && self.is_assign(&item.token) {
                return true;
            }
        }
        false
    }

    /// `out[start..]` is exactly one call with its arguments.
    fn is_single_call(&self, start: usize) -> bool {
        if !self.out.get(start).is_some_and(|i| i.token.is_call()) {
            return false;
        }
        let mut depth = 0usize;
        for (i, item) in self.out.iter().enumerate().skip(start) {
            if item.token.is_call() {
                depth += 1;
            } else if item.token == ItlToken::End(Ending::Call) {
                depth -= 1;
                if depth == 0 {
                    return i + 1 == self.out.len();
                }
            }
        }
        false
    }

    // ---- statements ----

    fn statement(&mut self) -> Res {
        let Some(t) = self.peek() else {
            return Err(self.err_at(None, "expected statement"));
        };
        match t.kind {
            LexKind::If => self.if_stmt(),
            LexKind::Switch => self.switch_stmt(),
            LexKind::While => {
                let t = self.bump()?;
                self.emit_kw(Keyword::While, t.line);
                self.condition()?;
                self.body(Ending::Loop)
            }
            LexKind::Do => self.do_stmt(),
            LexKind::For => self.for_stmt(),
            LexKind::Foreach => self.foreach_stmt(),
            LexKind::Function => self.function_def(),
            LexKind::Return => {
                let t = self.bump()?;
                self.emit_kw(Keyword::Return, t.line);
                self.expr(&[LexKind::Semi])?;
                let semi = self.expect(LexKind::Semi)?;
                self.emit_end(Ending::Return, semi.line);
                Ok(())
            }
            LexKind::Break | LexKind::Continue => {
                let t = self.bump()?;
                let kw = if t.kind == LexKind::Break { Keyword::Break } else { Keyword::Continue };
                self.emit_kw(kw, t.line);
                if self.peek_kind() == Some(LexKind::IntLiteral) {
                    self.pos += 1;
                }
                let semi = self.expect(LexKind::Semi)?;
                self.emit_end(Ending::Stmt, semi.line);
                Ok(())
            }
            LexKind::Global => {
                let t = self.bump()?;
                self.emit_kw(Keyword::Global, t.line);
                loop {
                    let t = self.bump()?;
                    match t.kind {
                        LexKind::Var => {
                            let tok = self.var_token(&t.value);
                            self.emit(tok, t.line);
                        }
                        LexKind::Comma => {}
                        LexKind::Semi => {
                            self.emit_end(Ending::Stmt, t.line);
                            return Ok(());
                        }
                        _ => return Err(self.err_at(Some(t), "expected variable in global list")),
                    }
                }
            }
            LexKind::LBrace => {
                self.pos += 1;
                self.block_until_rbrace()?;
                Ok(())
            }
            LexKind::Semi => {
                self.pos += 1;
                Ok(())
            }
            LexKind::Else
            | LexKind::ElseIf
            | LexKind::Case
            | LexKind::Default
            | LexKind::As
            | LexKind::RBrace
            | LexKind::RParen
            | LexKind::RBracket => Err(self.err_at(Some(t), "unexpected token")),
            _ => self.expr_stmt(),
        }
    }

    /// Statements up to and including the matching `}`; returns the brace.
    fn block_until_rbrace(&mut self) -> Res<&'a LexToken> {
        loop {
            match self.peek_kind() {
                Some(LexKind::RBrace) => return self.bump(),
                Some(_) => self.statement()?,
                None => return Err(self.err_at(None, "unclosed block")),
            }
        }
    }

    fn body(&mut self, ending: Ending) -> Res {
        match self.peek_kind() {
            Some(LexKind::LBrace) => {
                self.pos += 1;
                let close = self.block_until_rbrace()?;
                self.emit_end(ending, close.line);
            }
            Some(LexKind::Colon) => {
                return Err(self.err_at(self.peek(), "alternative control syntax is not supported"))
            }
            _ => {
                self.statement()?;
                let line = self.last_line();
                self.emit_end(ending, line);
            }
        }
        Ok(())
    }

    /// `( expr )` followed by END_COND on the closing parenthesis line.
    fn condition(&mut self) -> Res {
        self.expect(LexKind::LParen)?;
        self.expr(&[LexKind::RParen])?;
        let close = self.expect(LexKind::RParen)?;
        self.emit_end(Ending::Cond, close.line);
        Ok(())
    }

    fn if_stmt(&mut self) -> Res {
        let t = self.bump()?;
        self.emit_kw(Keyword::If, t.line);
        self.condition()?;
        self.body(Ending::If)?;
        loop {
            match self.peek_kind() {
                Some(LexKind::ElseIf) => {
                    let t = self.bump()?;
                    self.emit_kw(Keyword::ElseIf, t.line);
                    self.condition()?;
                    self.body(Ending::ElseIf)?;
                }
                Some(LexKind::Else) if self.peek_at(1).map(|t| t.kind) == Some(LexKind::If) => {
                    let t = self.bump()?;
                    self.pos += 1;
                    self.emit_kw(Keyword::ElseIf, t.line);
                    self.condition()?;
                    self.body(Ending::ElseIf)?;
                }
                Some(LexKind::Else) => {
                    let t = self.bump()?;
                    self.emit_kw(Keyword::Else, t.line);
                    self.emit_end(Ending::Cond, t.line);
                    self.body(Ending::Else)?;
                    return Ok(());
                }
                _ => return Ok(()),
            }
        }
    }

    fn switch_stmt(&mut self) -> Res {
        let t = self.bump()?;
        self.emit_kw(Keyword::Switch, t.line);
        self.condition()?;
        self.expect(LexKind::LBrace)?;
        loop {
            let t = self.bump()?;
            match t.kind {
                LexKind::Case | LexKind::Default => {
                    let kw = if t.kind == LexKind::Case { Keyword::Case } else { Keyword::Default };
                    self.emit_kw(kw, t.line);
                    if kw == Keyword::Case {
                        self.expr(&[LexKind::Colon, LexKind::Semi])?;
                    }
                    let sep = self.bump()?;
                    if !matches!(sep.kind, LexKind::Colon | LexKind::Semi) {
                        return Err(self.err_at(Some(sep), "expected ':' after case label"));
                    }
                    self.emit_end(Ending::Cond, sep.line);
                    let mut last = sep.line;
                    while !matches!(
                        self.peek_kind(),
                        Some(LexKind::Case | LexKind::Default | LexKind::RBrace) | None
                    ) {
                        self.statement()?;
                        last = self.last_line();
                    }
                    self.emit_end(Ending::Case, last);
                }
                LexKind::RBrace => {
                    self.emit_end(Ending::Switch, t.line);
                    return Ok(());
                }
                _ => return Err(self.err_at(Some(t), "expected case or default")),
            }
        }
    }

    fn do_stmt(&mut self) -> Res {
        let t = self.bump()?;
        self.emit_kw(Keyword::Do, t.line);
        self.emit_end(Ending::Cond, t.line);
        self.statement()?;
        self.expect(LexKind::While)?;
        self.expect(LexKind::LParen)?;
        self.expr(&[LexKind::RParen])?;
        self.expect(LexKind::RParen)?;
        let semi = self.expect(LexKind::Semi)?;
        self.emit_end(Ending::Loop, semi.line);
        Ok(())
    }

    fn for_stmt(&mut self) -> Res {
        let t = self.bump()?;
        self.emit_kw(Keyword::For, t.line);
        self.expect(LexKind::LParen)?;
        let mut close_line = t.line;
        for stop in [LexKind::Semi, LexKind::Semi, LexKind::RParen] {
            let start = self.out.len();
            self.expr(&[stop])?;
            let end = self.expect(stop)?;
            if self.out.len() > start {
                let e = if self.has_top_assign(start) { Ending::Assign } else { Ending::Stmt };
                self.emit_end(e, end.line);
            }
            close_line = end.line;
        }
        self.emit_end(Ending::Cond, close_line);
        self.body(Ending::Loop)
    }

    fn foreach_stmt(&mut self) -> Res {
        let t = self.bump()?;
        self.emit_kw(Keyword::Foreach, t.line);
        self.expect(LexKind::LParen)?;
        self.expr(&[LexKind::As])?;
        let as_tok = self.expect(LexKind::As)?;
        self.emit_kw(Keyword::As, as_tok.line);
        self.expr(&[LexKind::RParen])?;
        let close = self.expect(LexKind::RParen)?;
        self.emit_end(Ending::Cond, close.line);
        self.body(Ending::Loop)
    }

    fn function_def(&mut self) -> Res {
        let t = self.bump()?;
        self.emit_kw(Keyword::Function, t.line);
        let name = self.bump()?;
        if !matches!(name.kind, LexKind::FuncCall | LexKind::Ident) {
            return Err(self.err_at(Some(name), "anonymous functions are not supported"));
        }
        let tok = self.call_token(&name.value);
        self.emit(tok, name.line);
        self.expect(LexKind::LParen)?;
        loop {
            let p = self.bump()?;
            match p.kind {
                LexKind::RParen => {
                    if self.peek_kind() == Some(LexKind::Colon) {
                        self.pos += 1;
                        self.expect(LexKind::Ident)?;
                    }
                    self.emit_end(Ending::Cond, p.line);
                    break;
                }
                LexKind::Var => {
                    let tok = self.var_token(&p.value);
                    self.emit(tok, p.line);
                }
                LexKind::Ident | LexKind::Comma => {}
                LexKind::Equals => self.skip_default()?,
                _ => return Err(self.err_at(Some(p), "unexpected token in parameter list")),
            }
        }
        self.expect(LexKind::LBrace)?;
        let close = self.block_until_rbrace()?;
        self.emit_end(Ending::Function, close.line);
        Ok(())
    }

    /// Skip a parameter default value up to the next `,` or `)`.
    fn skip_default(&mut self) -> Res {
        let mut depth = 0usize;
        loop {
            match self.peek_kind() {
                Some(LexKind::Comma | LexKind::RParen) if depth == 0 => return Ok(()),
                Some(LexKind::LParen | LexKind::LBracket) => depth += 1,
                Some(LexKind::RParen | LexKind::RBracket) => depth -= 1,
                Some(_) => {}
                None => return Err(self.err_at(None, "unterminated parameter list")),
            }
            self.pos += 1;
        }
    }

    fn expr_stmt(&mut self) -> Res {
        let start = self.out.len();
        self.expr(&[LexKind::Semi])?;
        let semi = self.expect(LexKind::Semi)?;
        if self.out.len() == start {
            return Ok(());
        }
        if self.has_top_assign(start) {
            self.emit_end(Ending::Assign, semi.line);
        } else if !self.is_single_call(start) {
            self.emit_end(Ending::Stmt, semi.line);
        }
        Ok(())
    }

    // ---- expressions ----

    /// Translate tokens until one of `stop` at this nesting level (not consumed).
    fn expr(&mut self, stop: &[LexKind]) -> Res {
        // two operands in a row mean a missing operator or `;`
        let mut after_operand = false;
        while let Some(t) = self.peek() {
            if stop.contains(&t.kind) {
                return Ok(());
            }
            let operand = matches!(
                t.kind,
                LexKind::Var
                    | LexKind::FuncCall
                    | LexKind::LParen
                    | LexKind::LBracket
                    | LexKind::String
                    | LexKind::IntLiteral
                    | LexKind::FloatLiteral
                    | LexKind::Ident
            );
            if operand && after_operand && !self.is_cast() {
                return Err(self.err_at(Some(t), "missing operator"));
            }
            match t.kind {
                LexKind::Var => self.variable()?,
                LexKind::FuncCall => self.call()?,
                LexKind::LParen => {
                    if self.is_cast() {
                        self.pos += 3;
                        continue;
                    }
                    self.pos += 1;
                    self.expr(&[LexKind::RParen])?;
                    self.expect(LexKind::RParen)?;
                }
                LexKind::LBracket => {
                    self.pos += 1;
                    self.expr(&[LexKind::RBracket])?;
                    self.expect(LexKind::RBracket)?;
                }
                LexKind::Comma | LexKind::Colon => self.pos += 1,
                LexKind::String => self.string()?,
                LexKind::IntLiteral => self.literal(ItlToken::Int),
                LexKind::FloatLiteral => self.literal(ItlToken::Float),
                LexKind::Ident => self.literal(ItlToken::Const),
                k if k.group() == LexGroup::Operator => {
                    self.pos += 1;
                    let tok = self.op_token(t);
                    self.emit(tok, t.line);
                    if OpRole::of(k) != OpRole::IncDec {
                        after_operand = false;
                    }
                    continue;
                }
                _ => return Err(self.err_at(Some(t), "unexpected token in expression")),
            }
            after_operand = !matches!(t.kind, LexKind::Comma | LexKind::Colon);
        }
        Ok(())
    }

    fn literal(&mut self, tok: ItlToken) {
        let line = self.toks[self.pos].line;
        self.pos += 1;
        self.emit(tok, line);
    }

    fn is_cast(&self) -> bool {
        matches!(
            (self.peek_at(1), self.peek_at(2)),
            (Some(a), Some(b)) if a.kind == LexKind::Ident
                && b.kind == LexKind::RParen
                && CASTS.contains(&a.value.to_ascii_lowercase().as_str())
        )
    }

    fn variable(&mut self) -> Res {
        let t = self.bump()?;
        let tok = self.var_token(&t.value);
        let entry_point = tok == ItlToken::Input;
        self.emit(tok, t.line);
        while self.peek_kind() == Some(LexKind::LBracket) {
            if entry_point {
                // the accessor is part of the entry point
                self.skip_brackets()?;
                continue;
            }
            self.pos += 1;
            let start = self.out.len();
            self.expr(&[LexKind::RBracket])?;
            self.expect(LexKind::RBracket)?;
            if !self.out[start..].iter().any(|i| i.token.is_call()) {
                let mut kept = Vec::new();
                for item in self.out.drain(start..) {
                    if matches!(item.token, ItlToken::Var(_) | ItlToken::Input) {
                        kept.push(item);
                    }
                }
                self.out.extend(kept);
            }
        }
        Ok(())
    }

    fn skip_brackets(&mut self) -> Res {
        let mut depth = 0usize;
        loop {
            let t = self.bump()?;
            match t.kind {
                LexKind::LBracket => depth += 1,
                LexKind::RBracket => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(());
                    }
                }
                _ => {}
            }
        }
    }

    fn call(&mut self) -> Res {
        let t = self.bump()?;
        let tok = self.call_token(&t.value);
        self.emit(tok, t.line);
        let lower = t.value.to_ascii_lowercase();
        if CONSTRUCT_CALLS.contains(&lower.as_str()) {
            self.expr(&[LexKind::Semi, LexKind::RParen, LexKind::RBracket, LexKind::RBrace])?;
            let line = self.peek().map_or(self.last_line(), |t| t.line);
            self.emit_end(Ending::Call, line);
        } else {
            self.expect(LexKind::LParen)?;
            self.expr(&[LexKind::RParen])?;
            let close = self.expect(LexKind::RParen)?;
            self.emit_end(Ending::Call, close.line);
        }
        Ok(())
    }

    fn string(&mut self) -> Res {
        let t = self.bump()?;
        let raw = t.value.as_str();
        let double = raw.starts_with('"');
        if !double || !self.rules.split_interpolation {
            self.emit(ItlToken::Str, t.line);
            return Ok(());
        }
        let inner = &raw[1..raw.len() - 1];
        let mut emitted = false;
        for part in interpolation_parts(inner) {
            let tok = match part {
                Part::Text => ItlToken::Str,
                Part::Var(name) => self.var_token(&name),
            };
            self.emit(tok, t.line);
            emitted = true;
        }
        if !emitted {
            self.emit(ItlToken::Str, t.line);
        }
        Ok(())
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Part {
    Text,
    Var(String),
}

fn ident_len(b: &[u8]) -> usize {
    let mut n = 0;
    while n < b.len() && (b[n].is_ascii_alphanumeric() || b[n] == b'_' || b[n] >= 0x80) {
        n += 1;
    }
    if n > 0 && b[0].is_ascii_digit() {
        0
    } else {
        n
    }
}

/// Split the body of a double-quoted string into literal and variable parts.
fn interpolation_parts(inner: &str) -> Vec<Part> {
    let b = inner.as_bytes();
    let mut parts = Vec::new();
    let mut text = false;
    let mut i = 0;
    let push_var = |parts: &mut Vec<Part>, text: &mut bool, name: String| {
        if *text {
            parts.push(Part::Text);
            *text = false;
        }
        parts.push(Part::Var(name));
    };
    while i < b.len() {
        match b[i] {
            b'\\' => {
                text = true;
                i += 2;
            }
            b'$' if ident_len(&b[i + 1..]) > 0 => {
                let n = ident_len(&b[i + 1..]);
                push_var(&mut parts, &mut text, inner[i..i + 1 + n].to_string());
                i += 1 + n;
                if b.get(i) == Some(&b'[') {
                    if let Some(close) = inner[i..].find(']') {
                        i += close + 1;
                    }
                }
            }
            b'$' if b.get(i + 1) == Some(&b'{') => {
                let n = ident_len(&b[i + 2..]);
                match inner[i..].find('}') {
                    Some(close) if n > 0 => {
                        push_var(&mut parts, &mut text, alloc::format!("${}", &inner[i + 2..i + 2 + n]));
                        i += close + 1;
                    }
                    _ => {
                        text = true;
                        i += 1;
                    }
                }
            }
            b'{' if b.get(i + 1) == Some(&b'$') && ident_len(&b[i + 2..]) > 0 => {
                let n = ident_len(&b[i + 2..]);
                let name = inner[i + 1..i + 2 + n].to_string();
                let mut depth = 0usize;
                let mut j = i;
                while j < b.len() {
                    match b[j] {
                        b'{' => depth += 1,
                        b'}' => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                    j += 1;
                }
                push_var(&mut parts, &mut text, name);
                i = j + 1;
            }
            _ => {
                text = true;
                i += 1;
            }
        }
    }
    if text {
        parts.push(Part::Text);
    }
    parts
}
