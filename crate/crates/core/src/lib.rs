//! Toolchain for a workflow-automation DSL and the models that generate it.
//!
//! * [`dsl`] parses, serializes and compiles flow programs.
//! * [`catalog`] holds the valid connector operations and flags hallucinations.
//! * [`metrics`] scores flows (LCS similarity), parse rates and latency percentiles.
//! * [`retrieval`] and [`prompting`] assemble enriched generation prompts.
//! * [`harms`] recognizes the model's harmful-content flag.
//! * [`backends`] abstracts over replayed, synthetic and HTTP model endpoints.
//! * [`eval`] runs batch evaluations; [`load`] drives ramp-up load tests.

pub mod backends;
pub mod catalog;
pub mod dsl;
pub mod eval;
pub mod harms;
pub mod load;
pub mod metrics;
pub mod prompting;
pub mod retrieval;
