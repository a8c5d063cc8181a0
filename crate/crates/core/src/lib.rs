//! Confidential code analysis over an encrypted inverted index.
//!
//! PHP source is lexed, translated into an intermediate token language (ITL),
//! turned into a data and control flow graph (DCFG) and finally encrypted into
//! a searchable index. An analyser holding only the index and a task query can
//! find XSS / SQLi data flows without learning the code.
//!
//! The crate is `no_std` (with `alloc`); file IO, configuration files and the
//! command line live in the `cca` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod analysis;
pub mod crypto;
pub mod dcfg;
pub mod index;
pub mod itl;
pub mod lexer;
pub mod oracle;

pub use analysis::{
    analyse, authorise, decrypt_report, AnalysisTask, DeveloperKeys, EncryptedPath, Policy,
    PlainFinding, PlainReport, Query, Report,
};
pub use crypto::{HashMode, MasterKeySet, TokenKeyPair};
pub use dcfg::{build_dcfg, Dcfg, DcfgPair, ExtendedToken, Symbol};
pub use index::{build_index, EncryptedIndex, IndexEntry, IndexMode};
pub use itl::{translate, ItlStream, ItlToken, RuleSet, TaskKnowledge};
pub use lexer::{lex, LexKind, LexToken, SourceFile};
pub use oracle::plaintext_analyse;
