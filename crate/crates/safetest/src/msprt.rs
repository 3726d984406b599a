//! Two-sample mixture sequential probability ratio test (mSPRT) with a
//! normal mixing distribution.
//!
//! For paired streams with mean difference theta and null theta0, mixing
//! the likelihood ratio over H = N(theta0, gamma^2) gives the closed form
//!
//! ```text
//! Lambda_n = sqrt(2 sigma^2 / (2 sigma^2 + n gamma^2))
//!            . exp{ n^2 gamma^2 (Ybar - Xbar - theta0)^2
//!                   / (4 sigma^2 (2 sigma^2 + n gamma^2)) }.
//! ```
//!
//! Under H0 with known sigma^2 and a gamma^2 chosen without looking at the
//! data, Lambda is a nonnegative martingale with mean 1, so Ville's
//! inequality applies and `p_n = min(1, 1/max_k Lambda_k)` is an
//! always-valid p-value. The common practice of plugging in the pooled
//! sample variance and selecting gamma^2 from a data prefix (both
//! supported here, and both defaults) trades a little of that exactness
//! for practicality; the strict-martingale configuration remains available
//! for validity checks.

use std::io::Write as IoWrite;

use serde::{Deserialize, Serialize};

use crate::classical::{cohens_d, pooled_var, RunningStats, SummaryStats};
use crate::eprocess::{check_alpha, EProcess, EValue};
use crate::error::{Error, Result};

/// Where the observation variance sigma^2 comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// Fixed, known sigma^2; the exact-martingale configuration.
    Known { sigma2: f64 },
    /// Pooled sample variance of all pairs seen so far, recomputed per
    /// step.
    PlugInPooled,
}

/// How the mixing variance gamma^2 is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma2Mode {
    /// User-supplied constant, fixed before any data.
    Fixed { gamma2: f64 },
    /// After `pairs` warmup pairs, freeze gamma^2 = |d| s_p^2 computed on
    /// that prefix ([`select_gamma2`]); Lambda stays 1 during warmup.
    FreezeAfterWarmup { pairs: u64 },
    /// Recompute gamma^2 = |d| s_p^2 from all data at every step. Not
    /// predictable, hence not an exact e-process; kept as a documented
    /// reproduction knob.
    Continuous,
}

/// mSPRT configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsprtConfig {
    /// Null mean difference (metric units).
    pub theta0: f64,
    pub variance: VarianceMode,
    pub gamma2: Gamma2Mode,
    /// Mixing variance used when the gamma^2 rule degenerates (zero
    /// observed effect or zero variance on the selection data).
    pub fallback_gamma2: f64,
}

impl Default for MsprtConfig {
    fn default() -> Self {
        MsprtConfig {
            theta0: 0.0,
            variance: VarianceMode::PlugInPooled,
            gamma2: Gamma2Mode::FreezeAfterWarmup { pairs: 100 },
            fallback_gamma2: 1.0,
        }
    }
}

impl MsprtConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.theta0.is_finite() {
            return Err(Error::domain("theta0 must be finite"));
        }
        if let VarianceMode::Known { sigma2 } = self.variance {
            if !sigma2.is_finite() || sigma2 <= 0.0 {
                return Err(Error::domain(format!("sigma2 must be > 0, got {sigma2}")));
            }
        }
        match self.gamma2 {
            Gamma2Mode::Fixed { gamma2 } => {
                if !gamma2.is_finite() || gamma2 <= 0.0 {
                    return Err(Error::domain(format!("gamma2 must be > 0, got {gamma2}")));
                }
            }
            Gamma2Mode::FreezeAfterWarmup { pairs } => {
                if pairs < 2 {
                    return Err(Error::invalid("warmup needs at least 2 pairs"));
                }
            }
            Gamma2Mode::Continuous => {}
        }
        if !self.fallback_gamma2.is_finite() || self.fallback_gamma2 <= 0.0 {
            return Err(Error::domain(format!(
                "fallback_gamma2 must be > 0, got {}",
                self.fallback_gamma2
            )));
        }
        Ok(())
    }
}

/// log Lambda_n for mean difference `mean_diff` = Ybar - Xbar over n pairs.
pub fn msprt_log_lambda(
    n: u64,
    mean_diff: f64,
    theta0: f64,
    sigma2: f64,
    gamma2: f64,
) -> Result<f64> {
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::domain(format!("sigma2 must be > 0, got {sigma2}")));
    }
    if !gamma2.is_finite() || gamma2 <= 0.0 {
        return Err(Error::domain(format!("gamma2 must be > 0, got {gamma2}")));
    }
    if !mean_diff.is_finite() || !theta0.is_finite() {
        return Err(Error::domain("mean_diff and theta0 must be finite"));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let two_s = 2.0 * sigma2;
    let denom = two_s + nf * gamma2;
    let centered = mean_diff - theta0;
    Ok(0.5 * (two_s / denom).ln() + nf * nf * gamma2 * centered * centered / (2.0 * two_s * denom))
}

/// [`msprt_log_lambda`] as an [`EValue`].
pub fn msprt_lambda(
    n: u64,
    mean_diff: f64,
    theta0: f64,
    sigma2: f64,
    gamma2: f64,
) -> Result<EValue> {
    EValue::from_log(msprt_log_lambda(n, mean_diff, theta0, sigma2, gamma2)?)
}

/// gamma^2 selection rule: |Cohen's d| times the pooled sample variance of
/// the selection prefix. Degenerate when the observed effect or the pooled
/// variance is zero; callers fall back to a configured constant.
pub fn select_gamma2(x: &SummaryStats, y: &SummaryStats) -> Result<f64> {
    let sp2 = pooled_var(x, y)?;
    if sp2 <= 0.0 {
        return Err(Error::degenerate("zero pooled variance on the gamma2 selection prefix"));
    }
    let d = cohens_d(x, y)?;
    if d == 0.0 {
        return Err(Error::degenerate("zero observed effect on the gamma2 selection prefix"));
    }
    Ok(d.abs() * sp2)
}

/// One emitted point of an mSPRT trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsprtPoint {
    /// Pairs seen.
    pub n: u64,
    pub log_lambda: f64,
    pub lambda: f64,
    /// Running-min always-valid p-value.
    pub p_value: f64,
    pub rejected: bool,
}

/// Full trajectory of a streamed mSPRT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsprtTrajectory {
    pub alpha: f64,
    pub points: Vec<MsprtPoint>,
    /// Pair count at the first crossing of 1/alpha, if any.
    pub first_crossing: Option<u64>,
}

impl MsprtTrajectory {
    /// CSV with the same `n,log_e,e,decision` columns as the safe t-test
    /// trajectory, for side-by-side plotting.
    pub fn to_csv<W: IoWrite>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "log_e", "e", "decision"])?;
        for p in &self.points {
            w.write_record([
                p.n.to_string(),
                format!("{:.17e}", p.log_lambda),
                format!("{:.17e}", p.lambda),
                if p.rejected { "rejected_null" } else { "running" }.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Streaming mSPRT over observation pairs.
///
/// Lambda is recomputed from the running summary at every pair; the
/// internal [`EProcess`] is driven by telescoped log increments so its
/// cumulative log equals the current log Lambda exactly, giving the same
/// sticky rejection bookkeeping as the safe tests. Until gamma^2 is
/// available (warmup) or the plug-in variance is positive, Lambda is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsprtStream {
    config: MsprtConfig,
    stats_x: RunningStats,
    stats_y: RunningStats,
    gamma2_frozen: Option<f64>,
    log_lambda: f64,
    max_log_lambda: f64,
    process: EProcess,
}

impl MsprtStream {
    pub fn new(config: MsprtConfig, alpha: f64) -> Result<Self> {
        config.validate()?;
        check_alpha(alpha)?;
        let gamma2_frozen = match config.gamma2 {
            Gamma2Mode::Fixed { gamma2 } => Some(gamma2),
            _ => None,
        };
        Ok(MsprtStream {
            config,
            stats_x: RunningStats::new(),
            stats_y: RunningStats::new(),
            gamma2_frozen,
            log_lambda: 0.0,
            max_log_lambda: 0.0,
            process: EProcess::new(alpha)?,
        })
    }

    /// Feeds one (x, y) pair and returns the resulting log Lambda.
    pub fn push_pair(&mut self, x: f64, y: f64) -> Result<f64> {
        self.stats_x.push(x)?;
        self.stats_y.push(y)?;
        let n = self.stats_x.n();
        if self.gamma2_frozen.is_none() {
            if let Gamma2Mode::FreezeAfterWarmup { pairs } = self.config.gamma2 {
                if n == pairs {
                    self.gamma2_frozen = Some(self.gamma2_or_fallback()?);
                }
            }
        }
        let log_lambda = self.evaluate()?;
        let increment = log_lambda - self.log_lambda;
        self.log_lambda = log_lambda;
        self.max_log_lambda = self.max_log_lambda.max(log_lambda);
        self.process.update(EValue::from_log(increment)?, 1);
        Ok(log_lambda)
    }

    fn gamma2_or_fallback(&self) -> Result<f64> {
        match select_gamma2(&self.stats_x.summary()?, &self.stats_y.summary()?) {
            Ok(g) => Ok(g),
            Err(Error::Degenerate(_)) => Ok(self.config.fallback_gamma2),
            Err(e) => Err(e),
        }
    }

    fn current_gamma2(&self) -> Result<Option<f64>> {
        if let Some(g) = self.gamma2_frozen {
            return Ok(Some(g));
        }
        match self.config.gamma2 {
            Gamma2Mode::Continuous => {
                if self.stats_x.n() + self.stats_y.n() < 3 {
                    return Ok(None);
                }
                Ok(Some(self.gamma2_or_fallback()?))
            }
            // Still inside the warmup prefix.
            Gamma2Mode::FreezeAfterWarmup { .. } => Ok(None),
            Gamma2Mode::Fixed { .. } => unreachable!("fixed gamma2 is frozen at construction"),
        }
    }

    fn current_sigma2(&self) -> Result<Option<f64>> {
        match self.config.variance {
            VarianceMode::Known { sigma2 } => Ok(Some(sigma2)),
            VarianceMode::PlugInPooled => {
                if self.stats_x.n() + self.stats_y.n() < 3 {
                    return Ok(None);
                }
                let sp2 = pooled_var(&self.stats_x.summary()?, &self.stats_y.summary()?)?;
                Ok((sp2 > 0.0).then_some(sp2))
            }
        }
    }

    fn evaluate(&self) -> Result<f64> {
        let (Some(gamma2), Some(sigma2)) = (self.current_gamma2()?, self.current_sigma2()?)
        else {
            return Ok(0.0);
        };
        let mean_diff = self.stats_y.mean() - self.stats_x.mean();
        msprt_log_lambda(self.stats_x.n(), mean_diff, self.config.theta0, sigma2, gamma2)
    }

    pub fn n(&self) -> u64 {
        self.stats_x.n()
    }

    pub fn log_lambda(&self) -> f64 {
        self.log_lambda
    }

    /// Running-min always-valid p-value.
    pub fn p_value(&self) -> f64 {
        (-self.max_log_lambda.max(0.0)).exp()
    }

    /// The mixing variance in force, if already determined.
    pub fn gamma2(&self) -> Option<f64> {
        self.gamma2_frozen
    }

    pub fn process(&self) -> &EProcess {
        &self.process
    }

    pub fn first_crossing(&self) -> Option<u64> {
        self.process.rejected_at()
    }
}

/// Runs the mSPRT over whole paired streams and records the trajectory.
pub fn msprt_stream(
    xs: &[f64],
    ys: &[f64],
    config: &MsprtConfig,
    alpha: f64,
) -> Result<MsprtTrajectory> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "paired streams must have equal length, got {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let mut stream = MsprtStream::new(*config, alpha)?;
    let mut points = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        let log_lambda = stream.push_pair(x, y)?;
        points.push(MsprtPoint {
            n: stream.n(),
            log_lambda,
            lambda: EValue::from_log(log_lambda)?.value(),
            p_value: stream.p_value(),
            rejected: stream.first_crossing().is_some(),
        });
    }
    Ok(MsprtTrajectory { alpha, points, first_crossing: stream.first_crossing() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn frozen_reference_values() {
        // mpmath at 40 digits.
        let l = msprt_log_lambda(1, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!((l.exp() - 0.8164965809277260327324).abs() < 1e-15);
        let l = msprt_log_lambda(2, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert!((l.exp() - 0.9079430793557843257142).abs() < 1e-15);
        let cases: &[(u64, f64, f64, f64, f64)] = &[
            (100, 0.3, 0.0, 1.0, 0.01),
            (5000, 0.1, 0.05, 2.0, 0.05),
            (7, -0.9, 0.1, 0.5, 1.3),
        ];
        let want = [
            0.5472674459459177604387,
            -0.5376262521619212622455,
            1.997197634611046752242,
        ];
        for (&(n, diff, theta0, s2, g2), &w) in cases.iter().zip(&want) {
            let got = msprt_log_lambda(n, diff, theta0, s2, g2).unwrap();
            assert!((got - w).abs() < 1e-13 * (1.0 + w.abs()), "got {got}, want {w}");
        }
    }

    #[test]
    fn no_data_means_unit_lambda() {
        assert_eq!(msprt_log_lambda(0, 0.7, 0.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn group_exchange_with_negated_theta0_is_exact() {
        for &(n, diff, theta0) in &[(5u64, 0.4, 0.1), (50, -1.3, 0.2), (7, 0.0, -0.3)] {
            let a = msprt_log_lambda(n, diff, theta0, 1.7, 0.3).unwrap();
            let b = msprt_log_lambda(n, -diff, -theta0, 1.7, 0.3).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn increasing_in_centered_difference() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..30 {
            let diff = 0.05 * i as f64;
            let l = msprt_log_lambda(40, diff, 0.0, 1.0, 0.5).unwrap();
            assert!(l > prev || (i == 0 && l >= prev));
            prev = l;
        }
    }

    #[test]
    fn log_matches_direct_evaluation() {
        for &(n, diff, s2, g2) in
            &[(1u64, 0.3, 1.0, 1.0), (25, -0.6, 2.5, 0.04), (400, 0.05, 0.7, 0.01)]
        {
            let log = msprt_log_lambda(n, diff, 0.0, s2, g2).unwrap();
            let nf = n as f64;
            let direct = (2.0 * s2 / (2.0 * s2 + nf * g2)).sqrt()
                * (nf * nf * g2 * diff * diff / (4.0 * s2 * (2.0 * s2 + nf * g2))).exp();
            assert!((log.exp() - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(msprt_log_lambda(1, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(msprt_log_lambda(1, 0.0, 0.0, 1.0, -1.0).is_err());
        assert!(msprt_log_lambda(1, f64::NAN, 0.0, 1.0, 1.0).is_err());
        let bad = MsprtConfig {
            fallback_gamma2: 0.0,
            ..MsprtConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn gamma2_rule() {
        let x = SummaryStats::new(100, 1.0, 1.0).unwrap();
        let y = SummaryStats::new(100, 0.0, 1.0).unwrap();
        assert!((select_gamma2(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let x = SummaryStats::new(50, 0.02, 4.0).unwrap();
        let y = SummaryStats::new(50, 0.0, 4.0).unwrap();
        // d = 0.02/2 = 0.01, s_p^2 = 4.
        assert!((select_gamma2(&x, &y).unwrap() - 0.04).abs() < 1e-15);
        let y2 = SummaryStats::new(50, 0.02, 4.0).unwrap();
        assert!(matches!(select_gamma2(&x, &y2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn warmup_freezes_the_prefix_rule() {
        let config = MsprtConfig {
            gamma2: Gamma2Mode::FreezeAfterWarmup { pairs: 10 },
            ..MsprtConfig::default()
        };
        let mut stream = MsprtStream::new(config, 0.05).unwrap();
        let mut rng = crate::simlab::replication_rng(3, 0x7E57, 0);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..25u64 {
            let x: f64 = rng.sample::<f64, _>(StandardNormal) + 0.4;
            let y: f64 = rng.sample(StandardNormal);
            xs.push(x);
            ys.push(y);
            let log_lambda = stream.push_pair(x, y).unwrap();
            if i < 9 {
                // Warmup: Lambda pinned at 1.
                assert_eq!(log_lambda, 0.0);
                assert!(stream.gamma2().is_none());
            }
        }
        let gx = SummaryStats::from_sample(&xs[..10]).unwrap();
        let gy = SummaryStats::from_sample(&ys[..10]).unwrap();
        let expect = select_gamma2(&gx, &gy).unwrap();
        assert_eq!(stream.gamma2().unwrap(), expect);
        // Telescoped process log equals the current log Lambda.
        assert!((stream.process().log_e() - stream.log_lambda()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_warmup_engages_fallback() {
        let config = MsprtConfig {
            gamma2: Gamma2Mode::FreezeAfterWarmup { pairs: 4 },
            fallback_gamma2: 0.25,
            ..MsprtConfig::default()
        };
        let mut stream = MsprtStream::new(config, 0.05).unwrap();
        // Same values in both groups: d = 0 on the warmup prefix.
        for v in [1.0, 2.0, 3.0, 4.0, 5.0] {
            stream.push_pair(v, v).unwrap();
        }
        assert_eq!(stream.gamma2(), Some(0.25));
    }

    #[test]
    fn stream_rejects_and_p_values_decrease() {
        let config = MsprtConfig {
            variance: VarianceMode::Known { sigma2: 1.0 },
            gamma2: Gamma2Mode::Fixed { gamma2: 0.5 },
            ..MsprtConfig::default()
        };
        let n = 200;
        let mut rng = crate::simlab::replication_rng(11, 0x7E57, 1);
        let xs: Vec<f64> =
            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + 1.0).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        // x has the larger mean; Lambda grows in (ybar - xbar - theta0)^2
        // symmetrically, so the direction does not matter.
        let traj = msprt_stream(&xs, &ys, &config, 0.05).unwrap();
        let cross = traj.first_crossing.expect("strong effect must cross");
        for w in traj.points.windows(2) {
            assert!(w[1].p_value <= w[0].p_value + 1e-15);
        }
        for p in &traj.points {
            assert!(p.p_value <= 1.0);
            assert_eq!(p.rejected, p.n >= cross);
        }
        let mut buf = Vec::new();
        traj.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,log_e,e,decision\n"));
        assert_eq!(text.lines().count(), 1 + traj.points.len());
    }

    #[test]
    fn fixed_n_lambda_mean_stays_near_one_under_null() {
        // Known sigma^2 and fixed gamma^2: Lambda_n is an exact mean-one
        // e-variable at fixed n. Smoke-scale Monte Carlo; the full-powered
        // check runs in the acceptance suite.
        let reps = 800;
        let n = 50;
        let mut sum = 0.0;
        for rep in 0..reps {
            let mut rng = crate::simlab::replication_rng(21, 0x7E57_0002, rep);
            let mut sx = 0.0;
            let mut sy = 0.0;
            for _ in 0..n {
                sx += rng.sample::<f64, _>(StandardNormal);
                sy += rng.sample::<f64, _>(StandardNormal);
            }
            let diff = (sy - sx) / n as f64;
            sum += msprt_log_lambda(n, diff, 0.0, 1.0, 0.1).unwrap().exp();
        }
        let mean = sum / reps as f64;
        assert!(mean < 1.35, "null mean Lambda suspiciously large: {mean}");
        assert!(mean > 0.5, "null mean Lambda suspiciously small: {mean}");
    }

    #[test]
    fn config_serde_round_trip() {
        let config = MsprtConfig {
            theta0: 0.05,
            variance: VarianceMode::Known { sigma2: 2.0 },
            gamma2: Gamma2Mode::FreezeAfterWarmup { pairs: 64 },
            fallback_gamma2: 0.5,
        };
        let json = serde_json::to_string(&config).unwrap();
        let back: MsprtConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }
}
