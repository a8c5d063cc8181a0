//! Intermediate Token Language: vocabulary, databases and the translator.

mod knowledge;
mod rules;
mod translate;

pub use knowledge::{KnowledgeError, TaskKnowledge, DEFAULT_TASK_KNOWLEDGE};
pub use rules::{RuleSections, RuleSet, RulesError};
pub use translate::{translate, TranslateError};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::lexer::LexKind;

/// Reserved words that survive translation as their own ITL token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Keyword {
    If,
    ElseIf,
    Else,
    Switch,
    Case,
    Default,
    Break,
    Continue,
    While,
    Do,
    For,
    Foreach,
    As,
    Function,
    Return,
    Global,
}

impl Keyword {
    pub const ALL: [Keyword; 16] = [
        Keyword::If,
        Keyword::ElseIf,
        Keyword::Else,
        Keyword::Switch,
        Keyword::Case,
        Keyword::Default,
        Keyword::Break,
        Keyword::Continue,
        Keyword::While,
        Keyword::Do,
        Keyword::For,
        Keyword::Foreach,
        Keyword::As,
        Keyword::Function,
        Keyword::Return,
        Keyword::Global,
    ];

    pub fn name(self) -> &'static str {
        self.lex_kind().name()
    }

    pub fn lex_kind(self) -> LexKind {
        match self {
            Keyword::If => LexKind::If,
            Keyword::ElseIf => LexKind::ElseIf,
            Keyword::Else => LexKind::Else,
            Keyword::Switch => LexKind::Switch,
            Keyword::Case => LexKind::Case,
            Keyword::Default => LexKind::Default,
            Keyword::Break => LexKind::Break,
            Keyword::Continue => LexKind::Continue,
            Keyword::While => LexKind::While,
            Keyword::Do => LexKind::Do,
            Keyword::For => LexKind::For,
            Keyword::Foreach => LexKind::Foreach,
            Keyword::As => LexKind::As,
            Keyword::Function => LexKind::Function,
            Keyword::Return => LexKind::Return,
            Keyword::Global => LexKind::Global,
        }
    }

    pub fn from_name(name: &str) -> Option<Keyword> {
        Keyword::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Ending tokens mark where an instruction stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ending {
    Assign,
    Call,
    Stmt,
    Cond,
    If,
    ElseIf,
    Else,
    Switch,
    Case,
    Loop,
    Function,
    Return,
}

impl Ending {
    pub const ALL: [Ending; 12] = [
        Ending::Assign,
        Ending::Call,
        Ending::Stmt,
        Ending::Cond,
        Ending::If,
        Ending::ElseIf,
        Ending::Else,
        Ending::Switch,
        Ending::Case,
        Ending::Loop,
        Ending::Function,
        Ending::Return,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ending::Assign => "END_ASSIGN",
            Ending::Call => "END_CALL",
            Ending::Stmt => "END_STMT",
            Ending::Cond => "END_COND",
            Ending::If => "END_IF",
            Ending::ElseIf => "END_ELSEIF",
            Ending::Else => "END_ELSE",
            Ending::Switch => "END_SWITCH",
            Ending::Case => "END_CASE",
            Ending::Loop => "END_LOOP",
            Ending::Function => "END_FUNCTION",
            Ending::Return => "END_RETURN",
        }
    }

    pub fn from_name(name: &str) -> Option<Ending> {
        Ending::ALL.into_iter().find(|e| e.name() == name)
    }
}

/// One ITL token. Abstract tokens (`VARk`, `OPk`, `FUNC_CALLk`) carry their
/// per-file counter; task tokens carry the vulnerability class they serve.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItlToken {
    Var(u32),
    Op(u32),
    FuncCall(u32),
    Str,
    Int,
    Float,
    Const,
    Keyword(Keyword),
    End(Ending),
    Input,
    Sens(String),
    San(String),
}

/// Families derived from lexer tokens: the abstract and literal tokens plus
/// the reserved words.
pub const LEX_FAMILIES: [&str; 7] = [
    "VAR",
    "OP",
    "FUNC_CALL",
    "STRING",
    "INT_LITERAL",
    "FLOAT_LITERAL",
    "CONST",
];

impl ItlToken {
    pub fn is_abstract(&self) -> bool {
        matches!(self, ItlToken::Var(_) | ItlToken::Op(_) | ItlToken::FuncCall(_))
    }

    pub fn is_call(&self) -> bool {
        matches!(
            self,
            ItlToken::FuncCall(_) | ItlToken::Sens(_) | ItlToken::San(_)
        )
    }

    pub fn is_task(&self) -> bool {
        matches!(self, ItlToken::Input | ItlToken::Sens(_) | ItlToken::San(_))
    }

    /// Tokens that stand for a value flowing into an assignment or call.
    pub fn is_value(&self) -> bool {
        matches!(
            self,
            ItlToken::Var(_)
                | ItlToken::FuncCall(_)
                | ItlToken::Str
                | ItlToken::Int
                | ItlToken::Float
                | ItlToken::Const
                | ItlToken::Input
                | ItlToken::Sens(_)
                | ItlToken::San(_)
        )
    }

    pub fn ending(&self) -> Option<Ending> {
        match self {
            ItlToken::End(e) => Some(*e),
            _ => None,
        }
    }

    pub fn keyword(&self) -> Option<Keyword> {
        match self {
            ItlToken::Keyword(k) => Some(*k),
            _ => None,
        }
    }

    /// Family name, i.e. the token id without its counter.
    pub fn family(&self) -> String {
        match self {
            ItlToken::Var(_) => "VAR".to_string(),
            ItlToken::Op(_) => "OP".to_string(),
            ItlToken::FuncCall(_) => "FUNC_CALL".to_string(),
            ItlToken::Str => "STRING".to_string(),
            ItlToken::Int => "INT_LITERAL".to_string(),
            ItlToken::Float => "FLOAT_LITERAL".to_string(),
            ItlToken::Const => "CONST".to_string(),
            ItlToken::Keyword(k) => k.name().to_string(),
            ItlToken::End(e) => e.name().to_string(),
            other => other.to_string(),
        }
    }

    /// Parse a token id such as `VAR3`, `END_CALL` or `SQLi_SAN`.
    pub fn parse(id: &str) -> Option<ItlToken> {
        let counter = |prefix: &str| -> Option<u32> {
            let digits = id.strip_prefix(prefix)?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            if digits.len() > 1 && digits.starts_with('0') {
                return None;
            }
            digits.parse().ok()
        };
        if let Some(k) = counter("FUNC_CALL") {
            return Some(ItlToken::FuncCall(k));
        }
        if let Some(k) = counter("VAR") {
            return Some(ItlToken::Var(k));
        }
        if let Some(k) = counter("OP") {
            return Some(ItlToken::Op(k));
        }
        let tok = match id {
            "STRING" => ItlToken::Str,
            "INT_LITERAL" => ItlToken::Int,
            "FLOAT_LITERAL" => ItlToken::Float,
            "CONST" => ItlToken::Const,
            "INPUT" => ItlToken::Input,
            _ => {
                if let Some(k) = Keyword::from_name(id) {
                    ItlToken::Keyword(k)
                } else if let Some(e) = Ending::from_name(id) {
                    ItlToken::End(e)
                } else if let Some(class) = id.strip_suffix("_SENS").filter(|c| valid_class(c)) {
                    ItlToken::Sens(class.to_string())
                } else if let Some(class) = id.strip_suffix("_SAN").filter(|c| valid_class(c)) {
                    ItlToken::San(class.to_string())
                } else {
                    return None;
                }
            }
        };
        Some(tok)
    }
}

pub(crate) fn valid_class(class: &str) -> bool {
    !class.is_empty()
        && class.bytes().all(|b| b.is_ascii_alphanumeric())
        && class.as_bytes()[0].is_ascii_alphabetic()
}

impl fmt::Display for ItlToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItlToken::Var(k) => write!(f, "VAR{k}"),
            ItlToken::Op(k) => write!(f, "OP{k}"),
            ItlToken::FuncCall(k) => write!(f, "FUNC_CALL{k}"),
            ItlToken::Str => f.write_str("STRING"),
            ItlToken::Int => f.write_str("INT_LITERAL"),
            ItlToken::Float => f.write_str("FLOAT_LITERAL"),
            ItlToken::Const => f.write_str("CONST"),
            ItlToken::Keyword(k) => f.write_str(k.name()),
            ItlToken::End(e) => f.write_str(e.name()),
            ItlToken::Input => f.write_str("INPUT"),
            ItlToken::Sens(c) => write!(f, "{c}_SENS"),
            ItlToken::San(c) => write!(f, "{c}_SAN"),
        }
    }
}

/// An ITL token with the source line it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ItlItem {
    pub token: ItlToken,
    pub line: u32,
}

/// What an `OPk` token does; kept beside the stream so later stages can spot
/// assignments without seeing operator text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpRole {
    Assign,
    CompoundAssign,
    IncDec,
    Other,
}

impl OpRole {
    pub fn of(kind: LexKind) -> OpRole {
        match kind {
            LexKind::Equals => OpRole::Assign,
            LexKind::OpAssign => OpRole::CompoundAssign,
            LexKind::IncDec => OpRole::IncDec,
            _ => OpRole::Other,
        }
    }

    pub fn is_assignment(self) -> bool {
        matches!(self, OpRole::Assign | OpRole::CompoundAssign)
    }
}

/// Translated file: ITL tokens in source order plus the operator metadata.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ItlStream {
    pub file_id: u32,
    pub items: Vec<ItlItem>,
    /// `op_kinds[k]` is the lexer kind behind `OPk`.
    pub op_kinds: Vec<LexKind>,
}

impl ItlStream {
    pub fn op_role(&self, k: u32) -> OpRole {
        self.op_kinds
            .get(k as usize)
            .map_or(OpRole::Other, |kind| OpRole::of(*kind))
    }

    pub fn is_assignment_op(&self, token: &ItlToken) -> bool {
        match token {
            ItlToken::Op(k) => self.op_role(*k).is_assignment(),
            _ => false,
        }
    }

    /// All tokens of one source line.
    pub fn line(&self, line: u32) -> Vec<&ItlToken> {
        self.items
            .iter()
            .filter(|i| i.line == line)
            .map(|i| &i.token)
            .collect()
    }

    /// `(TOKEN,line)` tuples, one output line per source line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut current = None;
        for item in &self.items {
            if current.is_some() && current != Some(item.line) {
                out.push('\n');
            }
            current = Some(item.line);
            out.push_str(&format!("({},{})", item.token, item.line));
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }
}
