//! Experiment harness: backends, the resumable results log, the runner and
//! report writers behind the `synthpersona` command.

pub mod gateway;
pub mod http;
pub mod mock;
pub mod log;
pub mod runner;
pub mod analysis;
pub mod downstream;
pub mod report;
