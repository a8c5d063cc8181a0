//! Authorisation policy for query issuance.
//!
//! One rule per line, `allow|deny <task|*> [analyser|*]`; `#` starts a
//! comment. The first matching rule decides, no match means deny.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("policy line {line}: {message}")]
pub struct PolicyError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rule {
    allow: bool,
    task: Option<String>,
    analyser: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Policy {
    rules: Vec<Rule>,
}

fn pattern(s: Option<&str>) -> Option<String> {
    s.filter(|p| *p != "*").map(|p| p.to_ascii_lowercase())
}

impl Policy {
    /// A policy that permits every task for every analyser.
    pub fn allow_all() -> Policy {
        Policy { rules: alloc::vec![Rule { allow: true, task: None, analyser: None }] }
    }

    pub fn parse(text: &str) -> Result<Policy, PolicyError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| PolicyError { line: i + 1, message: m };
            let words: Vec<&str> = line.split_whitespace().collect();
            let allow = match words[0] {
                "allow" => true,
                "deny" => false,
                w => return Err(err(format!("expected allow or deny, found `{w}`"))),
            };
            if words.len() < 2 || words.len() > 3 {
                return Err(err("expected `allow|deny <task|*> [analyser|*]`".to_string()));
            }
            rules.push(Rule { allow, task: pattern(words.get(1).copied()), analyser: pattern(words.get(2).copied()) });
        }
        Ok(Policy { rules })
    }

    /// Task names compare case-insensitively, as do analyser names.
    pub fn permits(&self, task: &str, analyser: &str) -> bool {
        let (task, analyser) = (task.to_ascii_lowercase(), analyser.to_ascii_lowercase());
        self.rules
            .iter()
            .find(|r| {
                r.task.as_deref().map_or(true, |t| t == task) && r.analyser.as_deref().map_or(true, |a| a == analyser)
            })
            .is_some_and(|r| r.allow)
    }
}
