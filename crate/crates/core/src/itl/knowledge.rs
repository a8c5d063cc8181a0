use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ItlToken;

/// Default entry points, sinks and sanitizers.
pub const DEFAULT_TASK_KNOWLEDGE: &[(&str, &[&str])] = &[
    (
        "INPUT",
        &[
            "$_SERVER",
            "$_GET",
            "$_POST",
            "$_FILES",
            "$_REQUEST",
            "$_SESSION",
            "$_ENV",
            "$_COOKIE",
            "$php_errormsg",
            "$http_response_header",
        ],
    ),
    ("XSS_SENS", &["echo", "print", "exit"]),
    (
        "SQLi_SENS",
        &[
            "mysql_query",
            "mysql_unbuffered_query",
            "mysql_db_query",
            "mysqli_query",
            "mysqli_real_query",
            "mysqli_master_query",
            "mysqli_multi_query",
            "mysqli_stmt_execute",
            "mysqli_execute",
        ],
    ),
    (
        "XSS_SAN",
        &[
            "encodeForHTML",
            "htmlentities",
            "htmlspecialchars",
            "strip_tags",
            "urlencode",
        ],
    ),
    (
        "SQLi_SAN",
        &[
            "mysql_escape_string",
            "mysql_real_escape_string",
            "mysqli_escape_string",
            "mysqli_real_escape_string",
            "mysqli_stmt_bind_param",
        ],
    ),
];

/// Task knowledge database: which concrete names map to which task token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskKnowledge {
    sets: BTreeMap<ItlToken, BTreeSet<String>>,
    vars: BTreeMap<String, ItlToken>,
    calls: BTreeMap<String, ItlToken>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KnowledgeError {
    #[error("unknown task token {0:?}")]
    UnknownToken(String),
    #[error("invalid name {name:?} under {token}")]
    InvalidName { token: String, name: String },
    #[error("name {name:?} appears under both {first} and {second}")]
    Overlap {
        name: String,
        first: String,
        second: String,
    },
    #[error("entry point names must start with '$', function names must not: {0:?}")]
    WrongNameKind(String),
    #[error("missing required sections: INPUT")]
    MissingInput,
}

fn valid_name(name: &str) -> bool {
    let body = name.strip_prefix('$').unwrap_or(name);
    let mut bytes = body.bytes();
    matches!(bytes.next(), Some(b) if b.is_ascii_alphabetic() || b == b'_')
        && bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

impl Default for TaskKnowledge {
    fn default() -> Self {
        let sections = DEFAULT_TASK_KNOWLEDGE
            .iter()
            .map(|(t, names)| (t.to_string(), names.iter().map(|n| n.to_string()).collect()));
        TaskKnowledge::from_sections(sections).expect("default task knowledge is valid")
    }
}

impl TaskKnowledge {
    /// Build from `(task token, names)` sections.
    pub fn from_sections(
        sections: impl IntoIterator<Item = (String, Vec<String>)>,
    ) -> Result<TaskKnowledge, KnowledgeError> {
        let mut sets: BTreeMap<ItlToken, BTreeSet<String>> = BTreeMap::new();
        let mut owner: BTreeMap<String, String> = BTreeMap::new();
        let mut vars = BTreeMap::new();
        let mut calls = BTreeMap::new();
        for (token_name, names) in sections {
            let token = ItlToken::parse(&token_name)
                .filter(ItlToken::is_task)
                .ok_or_else(|| KnowledgeError::UnknownToken(token_name.clone()))?;
            let set = sets.entry(token.clone()).or_default();
            for name in names {
                if !valid_name(&name) {
                    return Err(KnowledgeError::InvalidName {
                        token: token_name,
                        name,
                    });
                }
                let is_var = name.starts_with('$');
                if is_var != (token == ItlToken::Input) {
                    return Err(KnowledgeError::WrongNameKind(name));
                }
                // variables are case sensitive, function names are not
                let key = if is_var { name.clone() } else { name.to_ascii_lowercase() };
                if let Some(first) = owner.get(&key) {
                    if *first != token_name {
                        return Err(KnowledgeError::Overlap {
                            name,
                            first: first.clone(),
                            second: token_name,
                        });
                    }
                }
                owner.insert(key.clone(), token_name.clone());
                if is_var {
                    vars.insert(key, token.clone());
                } else {
                    calls.insert(key, token.clone());
                }
                set.insert(name);
            }
        }
        if !sets.contains_key(&ItlToken::Input) {
            return Err(KnowledgeError::MissingInput);
        }
        Ok(TaskKnowledge { sets, vars, calls })
    }

    /// Task token for a variable name such as `$_GET`.
    pub fn lookup_var(&self, name: &str) -> Option<&ItlToken> {
        self.vars.get(name)
    }

    /// Task token for a called function name (case-insensitive).
    pub fn lookup_call(&self, name: &str) -> Option<&ItlToken> {
        self.calls.get(&name.to_ascii_lowercase())
    }

    pub fn names(&self, token: &ItlToken) -> Option<&BTreeSet<String>> {
        self.sets.get(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &ItlToken> {
        self.sets.keys()
    }

    /// Vulnerability classes with both a sink and a sanitizer token.
    pub fn classes(&self) -> Vec<String> {
        self.sets
            .keys()
            .filter_map(|t| match t {
                ItlToken::Sens(c) if self.sets.contains_key(&ItlToken::San(c.clone())) => {
                    Some(c.clone())
                }
                _ => None,
            })
            .collect()
    }

    /// Sections in canonical form, e.g. for writing a database file.
    pub fn sections(&self) -> Vec<(String, Vec<String>)> {
        self.sets
            .iter()
            .map(|(t, names)| (format!("{t}"), names.iter().cloned().collect()))
            .collect()
    }
}
