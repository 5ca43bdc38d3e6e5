//! Psychometric core for administering personality questionnaires to
//! language models and checking whether the answers behave like valid
//! test data.
//!
//! The crate is pure and I/O-light so it can be shared by the command-line
//! harness and the browser demo:
//!
//! - [`catalog`]: instrument banks, response scales, criterion maps
//! - [`prompts`]: administration prompts and trait-shaping personas
//! - [`respondent`]: deterministic synthetic respondents used as an oracle
//! - [`scoring`]: reverse keying and subscale score matrices
//! - [`stats`]: correlations, significance, distribution summaries
//! - [`psychometrics`]: reliability, MTMM validity, structural checks, shaping efficacy

pub mod builtin;
pub mod catalog;
pub mod domain;
pub mod prompts;
pub mod psychometrics;
pub mod respondent;
pub mod scoring;
pub mod stats;

pub use catalog::{Catalog, CriterionMap, Instrument, Item, Keying, ResponseScale, Subscale};
pub use domain::Domain;
