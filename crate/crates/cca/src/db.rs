//! Rules and task-knowledge database files (TOML).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cca_core::itl::{RuleSections, RuleSet, TaskKnowledge};
use serde::Deserialize;

use crate::Error;

pub const DEFAULT_RULES: &str = include_str!("../data/rules.toml");
pub const DEFAULT_KNOWLEDGE: &str = include_str!("../data/knowledge.toml");
pub const DEFAULT_POLICY: &str = include_str!("../data/policy.txt");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    metacharacters: Option<DropSection>,
    endings: Option<EndingSection>,
    strings: Option<StringSection>,
    names: Option<NameSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DropSection {
    drop: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EndingSection {
    tokens: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StringSection {
    split_interpolation: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NameSection {
    counter_scope: String,
}

pub fn parse_rules(text: &str) -> Result<RuleSet, Error> {
    let f: RulesFile = toml::from_str(text).map_err(|e| Error::Config(format!("rules file: {e}")))?;
    let sections = RuleSections {
        drop: f.metacharacters.map(|s| s.drop),
        endings: f.endings.map(|s| s.tokens),
        split_interpolation: f.strings.map(|s| s.split_interpolation),
        counter_scope: f.names.map(|s| s.counter_scope),
    };
    RuleSet::from_sections(sections).map_err(|e| Error::Config(format!("rules file: {e}")))
}

pub fn parse_knowledge(text: &str) -> Result<TaskKnowledge, Error> {
    let f: BTreeMap<String, Vec<String>> =
        toml::from_str(text).map_err(|e| Error::Config(format!("task knowledge file: {e}")))?;
    TaskKnowledge::from_sections(f).map_err(|e| Error::Config(format!("task knowledge file: {e}")))
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Rules from `path`, or the shipped defaults.
pub fn load_rules(path: Option<&Path>) -> Result<RuleSet, Error> {
    match path {
        Some(p) => parse_rules(&read(p)?),
        None => parse_rules(DEFAULT_RULES),
    }
}

pub fn load_task_knowledge(path: Option<&Path>) -> Result<TaskKnowledge, Error> {
    match path {
        Some(p) => parse_knowledge(&read(p)?),
        None => parse_knowledge(DEFAULT_KNOWLEDGE),
    }
}

/// Render task knowledge in the file format.
pub fn knowledge_to_toml(tk: &TaskKnowledge) -> String {
    let map: BTreeMap<String, Vec<String>> = tk.sections().into_iter().collect();
    toml::to_string(&map).expect("string lists always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use cca_core::itl::Ending;

    #[test]
    fn shipped_files_match_builtin_defaults() {
        let r = parse_rules(DEFAULT_RULES).unwrap();
        assert_eq!(r, RuleSet::default());
        assert_eq!(r.endings.len(), Ending::ALL.len());
        assert_eq!(parse_knowledge(DEFAULT_KNOWLEDGE).unwrap(), TaskKnowledge::default());
    }

    #[test]
    fn rules_validation() {
        let err = parse_rules("").unwrap_err().to_string();
        assert!(err.contains("missing required sections"), "{err}");
        let bogus = DEFAULT_RULES.replace("\"END_RETURN\"", "\"END_RETURN\", \"END_BOGUS\"");
        assert!(parse_rules(&bogus).unwrap_err().to_string().contains("END_BOGUS"));
        assert!(parse_rules("[colours]\nx = 1\n").is_err());
    }

    #[test]
    fn knowledge_validation() {
        let overlap = "INPUT = [\"$_GET\"]\nXSS_SENS = [\"echo\"]\nXSS_SAN = [\"echo\"]\n";
        assert!(parse_knowledge(overlap).is_err());
        let tk = TaskKnowledge::default();
        assert_eq!(parse_knowledge(&knowledge_to_toml(&tk)).unwrap(), tk);
    }
}
