//! Anytime-valid experimentation engine.
//!
//! This crate implements sequential hypothesis tests whose evidence measure is
//! an e-value: a non-negative statistic `E` with `E[E] <= 1` under the null.
//! Ville's inequality bounds the probability that a test supermartingale ever
//! exceeds `1/alpha` by `alpha`, so the rule "reject the first time
//! `E >= 1/alpha`" keeps its type I guarantee under continuous monitoring,
//! optional stopping, and optional continuation. That is the property the
//! classical fixed-horizon tests in [`classical`] lose the moment anyone peeks
//! at interim results.
//!
//! The pieces:
//!
//! * [`numerics`]: the special-function kernels everything else stands on
//!   (log-gamma, regularized incomplete beta/gamma, Student-t and chi-square
//!   tails, normal quantile, confluent hypergeometric 1F1 with a signed
//!   log-space companion).
//! * [`eprocess`]: log-scale e-value accumulation with sticky rejection state
//!   and the running-minimum p-value dual.
//! * [`classical`]: Welch t, Cohen's d, Pearson chi-square, fixed-horizon
//!   sizing. Baselines, and the yardstick the sequential tests are measured
//!   against.
//! * [`safe_t`]: the safe t-test, a two-sided t-test whose e-value is built
//!   from the 1F1 function; includes design-time batch sizing and stopping
//!   time simulation.
//! * [`safe_prop`]: safe tests for two-sample proportions and the one-sample
//!   sample-ratio-mismatch (SRM) monitor with conjugate Beta updating.
//! * [`msprt`]: the mixture sequential probability ratio test with a normal
//!   mixing prior, the main prior-art comparator.
//! * [`simlab`]: deterministic Monte Carlo studies (peeking inflation, error
//!   rates, stopping-time grids, decision agreement).
//! * [`experiment_io`]: snapshot CSV ingestion, group-sequential replay over
//!   daily cumulative statistics, SRM replay, persistent test state.
//! * [`cli`]: the `safetest` command-line front end over all of the above.

pub mod classical;
pub mod cli;
pub mod eprocess;
pub mod error;
pub mod experiment_io;
pub mod msprt;
pub mod numerics;
pub mod safe_prop;
pub mod safe_t;
pub mod simlab;

pub use error::{Error, Result};
