//! Classical fixed-horizon tests and effect-size helpers.
//!
//! These are the baselines the sequential tests are compared against: the
//! two-sample t-test on summary statistics, Cohen's d, the Pearson chi-square
//! goodness-of-fit test, and the textbook normal-approximation sample size
//! for a two-sided two-sample test. Their guarantees hold only when the
//! sample size is fixed in advance; evaluating them repeatedly on growing
//! data inflates the false positive rate, which is precisely what
//! [`crate::simlab::peeking_fp_curve`] measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{chi2_sf, normal_quantile, student_t_sf};

/// Count, mean, and (n-1)-denominator sample variance of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: u64,
    pub mean: f64,
    pub var: f64,
}

impl SummaryStats {
    pub fn new(n: u64, mean: f64, var: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("summary statistics require n >= 1"));
        }
        if !mean.is_finite() {
            return Err(Error::invalid(format!("mean must be finite, got {mean}")));
        }
        if !var.is_finite() || var < 0.0 {
            return Err(Error::invalid(format!("variance must be >= 0, got {var}")));
        }
        Ok(SummaryStats { n, mean, var })
    }

    /// Summarizes a raw sample. The sample variance of a single observation
    /// is taken as 0.
    pub fn from_sample(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::invalid("cannot summarize an empty sample"));
        }
        let mut acc = RunningStats::new();
        for &x in xs {
            acc.push(x)?;
        }
        acc.summary()
    }
}

/// Welford accumulator for streaming mean/variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::invalid(format!("observation must be finite, got {x}")));
        }
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        Ok(())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (n-1 denominator); 0 while fewer than two points.
    pub fn sample_var(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn summary(&self) -> Result<SummaryStats> {
        SummaryStats::new(self.n, self.mean, self.sample_var())
    }
}

/// Degrees-of-freedom rule for the two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DfMethod {
    /// `n + m - 2`, the equal-variance convention (default).
    #[default]
    Pooled,
    /// Welch-Satterthwaite approximation; generally non-integer.
    WelchSatterthwaite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestReport {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Point estimate of the mean difference (x - y).
    pub mean_diff: f64,
}

/// Two-sample t-test on summary statistics with unpooled standard error
/// `sqrt(vx/n + vy/m)`.
pub fn welch_t(x: &SummaryStats, y: &SummaryStats, df: DfMethod) -> Result<TTestReport> {
    if x.n + y.n < 3 {
        return Err(Error::invalid("t-test requires n + m >= 3"));
    }
    let (nx, ny) = (x.n as f64, y.n as f64);
    let se2 = x.var / nx + y.var / ny;
    if se2 <= 0.0 {
        return Err(Error::degenerate("zero variance in both groups; t is undefined"));
    }
    let df = match df {
        DfMethod::Pooled => nx + ny - 2.0,
        DfMethod::WelchSatterthwaite => {
            if x.n < 2 || y.n < 2 {
                return Err(Error::invalid(
                    "Welch-Satterthwaite df requires at least 2 observations per group",
                ));
            }
            let rx = x.var / nx;
            let ry = y.var / ny;
            se2 * se2 / (rx * rx / (nx - 1.0) + ry * ry / (ny - 1.0))
        }
    };
    let mean_diff = x.mean - y.mean;
    let t = mean_diff / se2.sqrt();
    let p_value = 2.0 * student_t_sf(t.abs(), df)?;
    Ok(TTestReport { t, df, p_value, mean_diff })
}

/// Cohen's d with the pooled standard deviation:
/// `d = (mean_x - mean_y) / s_p`, `s_p^2 = ((n-1)vx + (m-1)vy) / (n+m-2)`.
pub fn cohens_d(x: &SummaryStats, y: &SummaryStats) -> Result<f64> {
    let sp2 = pooled_var(x, y)?;
    if sp2 <= 0.0 {
        return Err(Error::degenerate("zero pooled variance; Cohen's d is undefined"));
    }
    Ok((x.mean - y.mean) / sp2.sqrt())
}

/// Pooled sample variance of two groups; requires `n + m >= 3`.
pub fn pooled_var(x: &SummaryStats, y: &SummaryStats) -> Result<f64> {
    if x.n + y.n < 3 {
        return Err(Error::invalid("pooled variance requires n + m >= 3"));
    }
    let (nx, ny) = (x.n as f64, y.n as f64);
    Ok(((nx - 1.0) * x.var + (ny - 1.0) * y.var) / (nx + ny - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Report {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
}

/// Pearson chi-square goodness-of-fit: `sum (O - E)^2 / E` against the
/// chi-square distribution with `len - 1` degrees of freedom. Expected
/// counts must be strictly positive; observed counts non-negative.
pub fn chi2_test(observed: &[f64], expected: &[f64]) -> Result<Chi2Report> {
    if observed.len() != expected.len() {
        return Err(Error::invalid(format!(
            "observed ({}) and expected ({}) cell counts differ",
            observed.len(),
            expected.len()
        )));
    }
    if observed.len() < 2 {
        return Err(Error::invalid("chi-square needs at least 2 cells"));
    }
    let mut statistic = 0.0;
    for (i, (&o, &e)) in observed.iter().zip(expected).enumerate() {
        if !o.is_finite() || o < 0.0 {
            return Err(Error::invalid(format!("observed cell {i} must be >= 0, got {o}")));
        }
        if !e.is_finite() || e <= 0.0 {
            return Err(Error::invalid(format!("expected cell {i} must be > 0, got {e}")));
        }
        let d = o - e;
        statistic += d * d / e;
    }
    let df = (observed.len() - 1) as u64;
    let p_value = chi2_sf(statistic, df as f64)?;
    Ok(Chi2Report { statistic, df, p_value })
}

/// Per-group sample size for the two-sided two-sample design:
/// `n = ceil( 2 (z_{1-alpha/2} + z_{1-beta})^2 / delta^2 )`
/// where `delta` is the standardized minimal effect.
pub fn fixed_horizon_sample_size(alpha: f64, beta: f64, delta: f64) -> Result<u64> {
    crate::eprocess::check_alpha(alpha)?;
    if !beta.is_finite() || beta <= 0.0 || beta >= 1.0 {
        return Err(Error::domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::domain(format!(
            "standardized effect delta must be > 0, got {delta}"
        )));
    }
    let z_a = normal_quantile(1.0 - alpha / 2.0)?;
    let z_b = normal_quantile(1.0 - beta)?;
    let s = z_a + z_b;
    let n = (2.0 * s * s / (delta * delta)).ceil();
    if n > 2f64.powi(53) {
        return Err(Error::domain(format!(
            "required sample size overflows: delta = {delta} is too small"
        )));
    }
    Ok(n as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_t_known_case() {
        let x = SummaryStats::new(100, 1.0, 1.0).unwrap();
        let y = SummaryStats::new(100, 0.0, 1.0).unwrap();
        let r = welch_t(&x, &y, DfMethod::Pooled).unwrap();
        assert!((r.t - 7.0710678118654755).abs() < 1e-12);
        assert_eq!(r.df, 198.0);
        // mpmath: 2 * t_sf(7.0710678..., 198) at 40 digits.
        assert!((r.p_value - 2.580616521936650073147e-11).abs() < 1e-22);
    }

    #[test]
    fn welch_t_identical_groups_gives_p_one() {
        let x = SummaryStats::new(50, 3.2, 1.7).unwrap();
        let r = welch_t(&x, &x, DfMethod::Pooled).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn welch_satterthwaite_df() {
        let x = SummaryStats::new(10, 0.0, 4.0).unwrap();
        let y = SummaryStats::new(20, 0.0, 1.0).unwrap();
        let r = welch_t(&x, &y, DfMethod::WelchSatterthwaite).unwrap();
        // mpmath: (4/10 + 1/20)^2 / ((4/10)^2/9 + (1/20)^2/19).
        assert!((r.df - 11.30693877551020408163).abs() < 1e-12);
        let pooled = welch_t(&x, &y, DfMethod::Pooled).unwrap();
        assert_eq!(pooled.df, 28.0);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let x = SummaryStats::new(10, 1.0, 0.0).unwrap();
        let y = SummaryStats::new(10, 0.0, 0.0).unwrap();
        assert!(matches!(welch_t(&x, &y, DfMethod::Pooled), Err(Error::Degenerate(_))));
        assert!(matches!(cohens_d(&x, &y), Err(Error::Degenerate(_))));
    }

    #[test]
    fn cohens_d_known_case() {
        let x = SummaryStats::new(3, 2.0, 4.0).unwrap();
        let y = SummaryStats::new(3, 0.0, 1.0).unwrap();
        // s_p^2 = (2*4 + 2*1)/4 = 2.5; d = 2/sqrt(2.5).
        let d = cohens_d(&x, &y).unwrap();
        assert!((d - 1.2649110640673517328).abs() < 1e-12);
    }

    #[test]
    fn chi2_known_cases() {
        let r = chi2_test(&[10.0, 20.0], &[15.0, 15.0]).unwrap();
        assert!((r.statistic - 10.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.df, 1);
        // mpmath chi2_sf(10/3, 1).
        assert!((r.p_value - 0.06788915486182901753524).abs() < 1e-12);

        let r = chi2_test(&[530.0, 470.0], &[500.0, 500.0]).unwrap();
        assert!((r.statistic - 3.6).abs() < 1e-12);
        assert!((r.p_value - 0.05777957112359724059557).abs() < 1e-12);
    }

    #[test]
    fn chi2_rejects_bad_cells() {
        assert!(chi2_test(&[1.0], &[1.0]).is_err());
        assert!(chi2_test(&[1.0, 2.0], &[1.0]).is_err());
        assert!(chi2_test(&[1.0, -2.0], &[1.0, 1.0]).is_err());
        assert!(chi2_test(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn sample_size_known_cases() {
        assert_eq!(fixed_horizon_sample_size(0.05, 0.2, 1.0).unwrap(), 16);
        assert_eq!(fixed_horizon_sample_size(0.05, 0.2, 0.5).unwrap(), 63);
        assert_eq!(fixed_horizon_sample_size(0.05, 0.2, 0.1).unwrap(), 1570);
        assert_eq!(fixed_horizon_sample_size(0.05, 0.2, 0.01).unwrap(), 156_978);
    }

    #[test]
    fn sample_size_rejects_bad_domain() {
        assert!(fixed_horizon_sample_size(0.0, 0.2, 0.1).is_err());
        assert!(fixed_horizon_sample_size(0.05, 1.0, 0.1).is_err());
        assert!(fixed_horizon_sample_size(0.05, 0.2, 0.0).is_err());
        assert!(fixed_horizon_sample_size(0.05, 0.2, -1.0).is_err());
    }

    #[test]
    fn running_stats_matches_two_pass() {
        let xs = [1.5, -2.0, 0.25, 4.0, 4.0, -1.0];
        let s = SummaryStats::from_sample(&xs).unwrap();
        let mean: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 =
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((s.mean - mean).abs() < 1e-14);
        assert!((s.var - var).abs() < 1e-14);
        assert_eq!(s.n, 6);
    }
}
