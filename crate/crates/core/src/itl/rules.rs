use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Ending;
use crate::lexer::{LexGroup, LexKind};

/// Translation rules database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    /// Metacharacters removed before mapping.
    pub drop: BTreeSet<LexKind>,
    /// Ending tokens the translator may emit.
    pub endings: BTreeSet<Ending>,
    /// Split interpolated double-quoted strings into STRING / VAR parts.
    pub split_interpolation: bool,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            drop: LexKind::ALL
                .iter()
                .copied()
                .filter(|k| k.group() == LexGroup::Metacharacter)
                .collect(),
            endings: Ending::ALL.into_iter().collect(),
            split_interpolation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RulesError {
    #[error("missing required sections: {}", .0.join(", "))]
    MissingSections(Vec<String>),
    #[error("unknown token names: {}", .0.join(", "))]
    UnknownTokens(Vec<String>),
    #[error("{0}")]
    Invalid(String),
}

/// Raw sections of a rules file, before validation.
#[derive(Debug, Clone, Default)]
pub struct RuleSections {
    pub drop: Option<Vec<String>>,
    pub endings: Option<Vec<String>>,
    pub split_interpolation: Option<bool>,
    pub counter_scope: Option<String>,
}

impl RuleSet {
    /// Validate parsed sections.
    pub fn from_sections(s: RuleSections) -> Result<RuleSet, RulesError> {
        let mut missing = Vec::new();
        if s.drop.is_none() {
            missing.push("metacharacters".to_string());
        }
        if s.endings.is_none() {
            missing.push("endings".to_string());
        }
        if !missing.is_empty() {
            return Err(RulesError::MissingSections(missing));
        }
        let mut unknown = Vec::new();
        let mut drop = BTreeSet::new();
        for name in s.drop.unwrap_or_default() {
            match LexKind::from_name(&name) {
                Some(k) if k.group() == LexGroup::Metacharacter => {
                    drop.insert(k);
                }
                _ => unknown.push(name),
            }
        }
        let mut endings = BTreeSet::new();
        for name in s.endings.unwrap_or_default() {
            match Ending::from_name(&name) {
                Some(e) => {
                    endings.insert(e);
                }
                None => unknown.push(name),
            }
        }
        if !unknown.is_empty() {
            return Err(RulesError::UnknownTokens(unknown));
        }
        // The translator has no ITL mapping for metacharacters, so none may be kept.
        let kept: Vec<String> = LexKind::ALL
            .iter()
            .filter(|k| k.group() == LexGroup::Metacharacter && !drop.contains(k))
            .map(|k| k.name().to_string())
            .collect();
        if !kept.is_empty() {
            return Err(RulesError::Invalid(format!(
                "metacharacters without ITL mapping must be dropped: {}",
                kept.join(", ")
            )));
        }
        let absent: Vec<String> = Ending::ALL
            .iter()
            .filter(|e| !endings.contains(e))
            .map(|e| e.name().to_string())
            .collect();
        if !absent.is_empty() {
            return Err(RulesError::Invalid(format!(
                "ending tokens required by the translator are not declared: {}",
                absent.join(", ")
            )));
        }
        match s.counter_scope.as_deref() {
            None | Some("file") => {}
            Some(other) => {
                return Err(RulesError::Invalid(format!(
                    "unsupported counter_scope {other:?} (only \"file\")"
                )))
            }
        }
        Ok(RuleSet {
            drop,
            endings,
            split_interpolation: s.split_interpolation.unwrap_or(true),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn names<T: Copy>(xs: impl IntoIterator<Item = T>, f: fn(T) -> &'static str) -> Vec<String> {
        xs.into_iter().map(|x| f(x).to_string()).collect()
    }

    fn full() -> RuleSections {
        RuleSections {
            drop: Some(names(RuleSet::default().drop, LexKind::name)),
            endings: Some(names(Ending::ALL, Ending::name)),
            split_interpolation: Some(true),
            counter_scope: Some("file".into()),
        }
    }

    #[test]
    fn default_sections_validate() {
        let rs = RuleSet::from_sections(full()).unwrap();
        assert_eq!(rs, RuleSet::default());
        assert_eq!(rs.endings.len(), 12);
        assert_eq!(rs.drop.len(), 9);
    }

    #[test]
    fn bogus_ending_is_rejected() {
        let mut s = full();
        s.endings.as_mut().unwrap().push("END_BOGUS".into());
        assert_eq!(
            RuleSet::from_sections(s),
            Err(RulesError::UnknownTokens(vec!["END_BOGUS".into()]))
        );
    }

    #[test]
    fn empty_is_missing_sections() {
        let err = RuleSet::from_sections(RuleSections::default()).unwrap_err();
        assert!(err.to_string().starts_with("missing required sections"));
    }

    #[test]
    fn kept_metacharacter_is_rejected() {
        let mut s = full();
        s.drop.as_mut().unwrap().retain(|n| n != "SEMI");
        assert!(matches!(RuleSet::from_sections(s), Err(RulesError::Invalid(_))));
    }
}
