//! Two-sided safe t-test: an e-value for H0 "equal means, common unknown
//! variance" that stays valid under continuous monitoring.
//!
//! With pooled t-statistic t on nu = n + m - 2 degrees of freedom, effective
//! sample size n_delta = (1/n + 1/m)^-1, prior effect delta, and
//! w = n_delta delta^2 / 2, the e-value is the Bayes factor
//!
//! ```text
//! E = exp(-w) . 1F1((nu+1)/2; 1/2; a w),    a = t^2 / (nu + t^2).
//! ```
//!
//! The production path applies Kummer's transformation,
//! `log E = (a - 1) w + ln 1F1(-nu/2; 1/2; -a w)`, whose series has no
//! sign changes in the test's domain (a <= 1, w >= 0), so it is stable for
//! nu up to 1e7 and beyond. Both forms are implemented; they must agree to
//! 1e-9 relative, and tests enforce that. Note `a - 1` is computed directly
//! as `-nu / (nu + t^2)` to avoid cancellation at small t.

use std::io::Write as IoWrite;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{fixed_horizon_sample_size, pooled_var, RunningStats, SummaryStats};
use crate::eprocess::{check_alpha, log_ville_threshold, EValue};
use crate::error::{Error, Result};
use crate::numerics::ln_hyp1f1;
use crate::simlab::{
    power_quantile_horizon, replication_rng, safe_t_crossing, StoppingSummary, SALT_SAFE_T,
};

/// Prior effect size and level of a safe t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeTConfig {
    /// Standardized effect delta > 0 the test is designed to detect. Under
    /// the GROW design this is the minimal effect of interest.
    pub delta: f64,
    pub alpha: f64,
}

impl SafeTConfig {
    pub fn new(delta: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::domain(format!("delta must be > 0, got {delta}")));
        }
        Ok(SafeTConfig { delta, alpha })
    }
}

/// Summary statistics of the two groups; all the test needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeTState {
    pub group_x: SummaryStats,
    pub group_y: SummaryStats,
}

/// log E from the pooled t-statistic. `n`, `m` are the group sizes behind
/// `t`; requires nu = n + m - 2 >= 1.
pub fn safe_t_log_evalue_from_t(t: f64, n: u64, m: u64, delta: f64) -> Result<f64> {
    if n == 0 || m == 0 || n + m < 3 {
        return Err(Error::invalid(
            "safe t-test needs n, m >= 1 and n + m >= 3 (at least one degree of freedom)",
        ));
    }
    if !t.is_finite() {
        return Err(Error::domain(format!("t must be finite, got {t}")));
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::domain(format!("delta must be > 0, got {delta}")));
    }
    let nu = (n + m - 2) as f64;
    let n_delta = 1.0 / (1.0 / n as f64 + 1.0 / m as f64);
    let w = n_delta * delta * delta / 2.0;
    let t2 = t * t;
    let a = t2 / (nu + t2);
    let a_minus_1 = -nu / (nu + t2);
    let f = ln_hyp1f1(-nu / 2.0, 0.5, -a * w)?;
    // The series for (a <= 0, z <= 0) has positive terms only; a negative
    // sign here would mean a kernel bug, not a data condition.
    if f.sign <= 0.0 {
        return Err(Error::NoConvergence(
            "confluent hypergeometric kernel returned a non-positive value".into(),
        ));
    }
    Ok(a_minus_1 * w + f.ln_abs)
}

/// log E from group summary statistics. Errors with
/// [`Error::Degenerate`] when the pooled variance is zero (t undefined).
pub fn safe_t_log_evalue(x: &SummaryStats, y: &SummaryStats, delta: f64) -> Result<f64> {
    let sp2 = pooled_var(x, y)?;
    if sp2 <= 0.0 {
        return Err(Error::degenerate("zero pooled variance; safe t e-value is undefined"));
    }
    let n_delta = 1.0 / (1.0 / x.n as f64 + 1.0 / y.n as f64);
    let t = (x.mean - y.mean) * n_delta.sqrt() / sp2.sqrt();
    safe_t_log_evalue_from_t(t, x.n, y.n, delta)
}

/// E-value of the safe t-test at the current state.
pub fn safe_t_evalue(state: &SafeTState, config: &SafeTConfig) -> Result<EValue> {
    EValue::from_log(safe_t_log_evalue(&state.group_x, &state.group_y, config.delta)?)
}

/// One emitted point of a streamed trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Per-group sample size at this point.
    pub n: u64,
    pub log_e: f64,
    pub e: f64,
    /// True once the process has crossed 1/alpha (sticky).
    pub rejected: bool,
}

/// E-value trajectory over paired streams, with the first 1/alpha crossing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub alpha: f64,
    pub points: Vec<TrajectoryPoint>,
    /// Per-group n at the first crossing of 1/alpha, if any.
    pub first_crossing: Option<u64>,
}

impl Trajectory {
    /// CSV with columns `n,log_e,e,decision`; decision is `running` or
    /// `rejected_null`, sticky after the first crossing.
    pub fn to_csv<W: IoWrite>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "log_e", "e", "decision"])?;
        for p in &self.points {
            w.write_record([
                p.n.to_string(),
                format!("{:.17e}", p.log_e),
                format!("{:.17e}", p.e),
                if p.rejected { "rejected_null" } else { "running" }.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Streams paired observations and emits the e-value after every pair.
///
/// Points begin at the first pair index >= 2 where the pooled variance is
/// positive; until then the statistic is degenerate and nothing is emitted
/// (two identical constant streams yield an empty trajectory).
pub fn safe_t_from_raw(xs: &[f64], ys: &[f64], config: &SafeTConfig) -> Result<Trajectory> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "paired streams must have equal length, got {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("need at least 2 observation pairs"));
    }
    let log_thr = log_ville_threshold(config.alpha)?;
    let mut sx = RunningStats::new();
    let mut sy = RunningStats::new();
    let mut points = Vec::with_capacity(xs.len().saturating_sub(1));
    let mut first_crossing = None;
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        sx.push(x)?;
        sy.push(y)?;
        let n = (i + 1) as u64;
        if n < 2 {
            continue;
        }
        let gx = sx.summary()?;
        let gy = sy.summary()?;
        match safe_t_log_evalue(&gx, &gy, config.delta) {
            Ok(log_e) => {
                if first_crossing.is_none() && log_e >= log_thr {
                    first_crossing = Some(n);
                }
                points.push(TrajectoryPoint {
                    n,
                    log_e,
                    e: EValue::from_log(log_e)?.value(),
                    rejected: first_crossing.is_some(),
                });
            }
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory { alpha: config.alpha, points, first_crossing })
}

/// log E at the design point: per-group size n with the observed
/// standardized effect exactly delta, i.e. t = delta sqrt(n/2).
fn design_log_e(n: u64, delta: f64) -> Result<f64> {
    let t = delta * (n as f64 / 2.0).sqrt();
    safe_t_log_evalue_from_t(t, n, n, delta)
}

/// Smallest equal per-group n at which the e-value reaches 1/alpha when the
/// observed effect is exactly delta. Binary search over n with a boundary
/// polish, so the result equals a linear scan from n = 2.
///
/// Returns [`Error::NotReachable`] when no n <= cap suffices.
pub fn design_batch_n(config: &SafeTConfig, cap: u64) -> Result<u64> {
    if cap < 2 {
        return Err(Error::invalid("design cap must be >= 2"));
    }
    let log_thr = log_ville_threshold(config.alpha)?;
    let reaches = |n: u64| -> Result<bool> { Ok(design_log_e(n, config.delta)? >= log_thr) };
    if reaches(2)? {
        return Ok(2);
    }
    // Exponential search for a bracket [lo, hi] with reaches(lo) false.
    let mut lo = 2u64;
    let mut hi = 4u64;
    loop {
        if hi >= cap {
            hi = cap;
            if !reaches(hi)? {
                return Err(Error::NotReachable { cap });
            }
            break;
        }
        if reaches(hi)? {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // log E at the design point grows in n; the polish guards the boundary
    // so the result matches the scan even at a flat step.
    let mut n = hi;
    while n > 2 && reaches(n - 1)? {
        n -= 1;
    }
    Ok(n)
}

/// Default cap for [`design_batch_n`] when the caller has no opinion.
pub const DESIGN_CAP_DEFAULT: u64 = 16_777_216;

/// Simulates streamed safe t-tests under a true standardized effect and
/// summarizes first-crossing times against the (1-beta) power horizon.
///
/// Data are unit-variance normal pairs with mean difference `true_effect`.
/// Replications cap at four times the classical fixed-horizon n for the
/// reference effect (`true_effect` if nonzero, else the design delta).
/// Deterministic given `seed` and independent of thread count.
pub fn power_stopping_simulation(
    config: &SafeTConfig,
    true_effect: f64,
    beta: f64,
    n_sims: u64,
    seed: u64,
) -> Result<StoppingSummary> {
    if n_sims == 0 {
        return Err(Error::invalid("n_sims must be >= 1"));
    }
    if !true_effect.is_finite() {
        return Err(Error::invalid("true_effect must be finite"));
    }
    let reference = if true_effect != 0.0 { true_effect.abs() } else { config.delta };
    let cap = 4 * fixed_horizon_sample_size(config.alpha, beta, reference)?;
    let crossings: Vec<Option<u64>> = (0..n_sims)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, SALT_SAFE_T, rep);
            safe_t_crossing(config, true_effect, cap, &mut rng)
        })
        .collect::<Result<_>>()?;
    let horizon = power_quantile_horizon(&crossings, beta, cap)?;
    StoppingSummary::from_crossings(&crossings, horizon)
}
