//! Run configuration and role separation.
//!
//! Developer commands may touch the master keys; analyser commands see the
//! index and a query file only. An analyser configuration carrying a keys
//! path is rejected outright, and every file an analyser reads is checked
//! not to be a keys file.

use std::fs;
use std::path::{Path, PathBuf};

use cca_core::analysis::Query;
use cca_core::index::{EncryptedIndex, IndexMode};
use cca_core::itl::{RuleSet, TaskKnowledge};

use crate::formats::{self, KeysFile, KEYS_MAGIC};
use crate::{db, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Developer,
    Analyser,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub role: Role,
    pub rules: Option<PathBuf>,
    pub knowledge: Option<PathBuf>,
    pub keys: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub query: Option<PathBuf>,
    pub no_encryption: bool,
    pub no_ore: bool,
}

impl RunConfig {
    pub fn developer() -> RunConfig {
        RunConfig {
            role: Role::Developer,
            rules: None,
            knowledge: None,
            keys: None,
            index: None,
            policy: None,
            query: None,
            no_encryption: false,
            no_ore: false,
        }
    }

    pub fn analyser(index: PathBuf, query: PathBuf) -> RunConfig {
        RunConfig { role: Role::Analyser, index: Some(index), query: Some(query), ..RunConfig::developer() }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.role == Role::Analyser {
            if self.keys.is_some() {
                return Err(Error::Usage("the analyser role must not be given the master key file".into()));
            }
            if self.policy.is_some() || self.rules.is_some() || self.knowledge.is_some() {
                return Err(Error::Usage("the analyser role takes only an index and a query".into()));
            }
        }
        if self.no_encryption && self.no_ore {
            return Err(Error::Usage("--no-encryption and --no-ore are mutually exclusive".into()));
        }
        Ok(())
    }

    /// Evaluation mode selected by the flags.
    pub fn mode(&self) -> IndexMode {
        match (self.no_encryption, self.no_ore) {
            (true, _) => IndexMode::Plain,
            (false, true) => IndexMode::DetRnd,
            (false, false) => IndexMode::Full,
        }
    }

    fn need<'a>(&self, p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, Error> {
        p.as_deref().ok_or_else(|| Error::Usage(format!("missing {what} path")))
    }

    /// Bytes of an analyser input, refusing anything that looks like keys.
    fn analyser_read(&self, path: &Path) -> Result<Vec<u8>, Error> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(KEYS_MAGIC.as_bytes()) {
            return Err(Error::Usage(format!("{}: refusing to read a master key file", path.display())));
        }
        Ok(bytes)
    }

    pub fn load_index(&self) -> Result<EncryptedIndex, Error> {
        self.validate()?;
        let path = self.need(&self.index, "index")?;
        let bytes = match self.role {
            Role::Analyser => self.analyser_read(path)?,
            Role::Developer => fs::read(path).map_err(|e| Error::io(path, e))?,
        };
        EncryptedIndex::from_bytes(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn load_query(&self) -> Result<Query, Error> {
        self.validate()?;
        let path = self.need(&self.query, "query")?;
        let bytes = self.analyser_read(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Format(format!("{}: not a query file", path.display())))?;
        formats::query_from_text(&text)
    }

    pub fn load_keys(&self) -> Result<KeysFile, Error> {
        self.validate()?;
        if self.role != Role::Developer {
            return Err(Error::Usage("master keys are only available to the developer role".into()));
        }
        formats::read_keys(self.need(&self.keys, "keys")?)
    }

    pub fn load_rules(&self) -> Result<RuleSet, Error> {
        db::load_rules(self.rules.as_deref())
    }

    pub fn load_knowledge(&self) -> Result<TaskKnowledge, Error> {
        db::load_task_knowledge(self.knowledge.as_deref())
    }
}
