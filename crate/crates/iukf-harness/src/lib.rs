//! Monte Carlo experiment harness for the forward/inverse filtering library.
//!
//! The library crate supplies the filters, bound recursions, and scenario
//! definitions; this crate turns them into batches of paired, seeded runs
//! ([`experiment`]), resolves TOML configurations into executable plans
//! ([`config`]), writes and re-reads the result tables ([`output`]), and
//! checks error sequences for exponential boundedness ([`diagnostics`]).

pub mod config;
pub mod diagnostics;
pub mod experiment;
pub mod output;
