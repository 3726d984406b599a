//! E-values and e-processes.
//!
//! An e-value is a non-negative statistic with expectation at most 1 under
//! the null hypothesis. Products of e-values computed on disjoint data
//! segments (each conditionally valid given the past) form a test
//! supermartingale, and Ville's inequality bounds the chance it ever reaches
//! `1/alpha` by `alpha`. Rejection is therefore declared the first time the
//! accumulated e-value crosses `1/alpha`, and that decision is *sticky*:
//! later evidence may shrink the product, but the type I guarantee covers the
//! first crossing, so the rejection stands.
//!
//! Everything here lives in log space. Multiplying thousands of segment
//! e-values in linear space would overflow f64 around `e^709`; adding their
//! logs never does, and saturating addition keeps even adversarial inputs
//! finite (which also keeps the state JSON-serializable).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cap on |log e-value|; far beyond any decision threshold while keeping
/// sums of a few capped values finite.
const LOG_E_CAP: f64 = 1e300;

/// A single e-value, stored as its natural log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EValue {
    log_e: f64,
}

impl EValue {
    /// Wraps a log-scale e-value. NaN is rejected; infinite inputs saturate
    /// to a finite cap so that downstream arithmetic and serialization stay
    /// well defined.
    pub fn from_log(log_e: f64) -> Result<Self> {
        if log_e.is_nan() {
            return Err(Error::domain("e-value log must not be NaN"));
        }
        Ok(EValue { log_e: log_e.clamp(-LOG_E_CAP, LOG_E_CAP) })
    }

    /// Wraps a linear-scale e-value `e >= 0`.
    pub fn from_value(e: f64) -> Result<Self> {
        if e.is_nan() || e < 0.0 {
            return Err(Error::domain(format!("e-value must be >= 0, got {e}")));
        }
        Self::from_log(e.ln())
    }

    /// The multiplicative identity, E = 1.
    pub fn one() -> Self {
        EValue { log_e: 0.0 }
    }

    /// Natural log of the e-value.
    pub fn log(&self) -> f64 {
        self.log_e
    }

    /// Linear-scale value; may round to 0 or saturate to +inf for display.
    pub fn value(&self) -> f64 {
        self.log_e.exp()
    }

    /// Product of two e-values (sum of logs, saturating).
    #[must_use]
    pub fn combine(&self, other: &EValue) -> EValue {
        EValue { log_e: (self.log_e + other.log_e).clamp(-LOG_E_CAP, LOG_E_CAP) }
    }
}

/// Ville threshold `1/alpha` for `alpha` in (0, 1).
pub fn ville_threshold(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(1.0 / alpha)
}

/// `ln(1/alpha)`, the crossing level in log space.
pub fn log_ville_threshold(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-alpha.ln())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Lifecycle of a sequential test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestState {
    /// Evidence has stayed below `1/alpha` so far; keep monitoring.
    Running,
    /// Evidence reached `1/alpha` after `at` observations; final.
    RejectedNull { at: u64 },
}

/// Log-scale accumulator for segment e-values with sticky rejection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EProcess {
    log_e: f64,
    n: u64,
    alpha: f64,
    state: TestState,
}

impl EProcess {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(EProcess { log_e: 0.0, n: 0, alpha, state: TestState::Running })
    }

    /// Folds in the e-value of a data segment covering `observations` new
    /// observations. Rejection triggers exactly when the accumulated
    /// e-value is `>= 1/alpha` and is recorded at the current count.
    pub fn update(&mut self, segment: EValue, observations: u64) {
        self.log_e = (self.log_e + segment.log()).clamp(-LOG_E_CAP, LOG_E_CAP);
        self.n += observations;
        if self.state == TestState::Running && self.log_e >= -self.alpha.ln() {
            self.state = TestState::RejectedNull { at: self.n };
        }
    }

    /// Current accumulated log e-value.
    pub fn log_e(&self) -> f64 {
        self.log_e
    }

    /// Observations consumed so far.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Current decision state. `RejectedNull` is final even if the
    /// accumulated e-value has since dropped below the threshold.
    pub fn decision(&self) -> TestState {
        self.state
    }

    /// Observation count at the first threshold crossing, if any.
    pub fn rejected_at(&self) -> Option<u64> {
        match self.state {
            TestState::Running => None,
            TestState::RejectedNull { at } => Some(at),
        }
    }
}

/// Running-minimum p-value process dual to a sequence of e/likelihood-ratio
/// statistics: `p_0 = 1`, `p_n = min(p_{n-1}, 1/lambda_n)`, clamped to [0, 1].
/// `P(exists n: p_n <= alpha) <= alpha` under the null.
pub fn running_min_pvalue(lambdas: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(lambdas.len());
    let mut p = 1.0f64;
    for (i, &lam) in lambdas.iter().enumerate() {
        if lam.is_nan() || lam < 0.0 {
            return Err(Error::domain(format!(
                "lambda trajectory must be non-negative, got {lam} at index {i}"
            )));
        }
        if lam > 0.0 {
            p = p.min((1.0 / lam).min(1.0));
        }
        out.push(p);
    }
    Ok(out)
}

/// Log-space twin of [`running_min_pvalue`] for trajectories that overflow
/// linear scale: consumes `ln lambda_n`, emits `p_n`.
pub fn running_min_pvalue_from_log(log_lambdas: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(log_lambdas.len());
    let mut max_log = f64::NEG_INFINITY;
    for &ll in log_lambdas {
        max_log = max_log.max(ll);
        out.push((-max_log).exp().min(1.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubles_reject_at_fifth_segment() {
        // threshold 1/alpha = 20; cumulative E: 2, 4, 8, 16, 32.
        let mut p = EProcess::new(0.05).unwrap();
        let two = EValue::from_value(2.0).unwrap();
        for i in 1..=4u64 {
            p.update(two, 1);
            assert_eq!(p.decision(), TestState::Running, "not yet at segment {i}");
        }
        p.update(two, 1);
        assert_eq!(p.decision(), TestState::RejectedNull { at: 5 });
        assert_eq!(p.n(), 5);
    }

    #[test]
    fn rejection_is_sticky() {
        let mut p = EProcess::new(0.05).unwrap();
        p.update(EValue::from_value(3.0).unwrap(), 1);
        p.update(EValue::from_value(10.0).unwrap(), 1);
        assert_eq!(p.decision(), TestState::RejectedNull { at: 2 });
        p.update(EValue::from_value(0.01).unwrap(), 1);
        assert_eq!(
            p.decision(),
            TestState::RejectedNull { at: 2 },
            "rejection must survive later shrinkage"
        );
        assert!(p.log_e() < log_ville_threshold(0.05).unwrap());
    }

    #[test]
    fn rejects_exactly_at_threshold() {
        // E = 20 == 1/alpha must reject (the rule is >=).
        let mut p = EProcess::new(0.05).unwrap();
        p.update(EValue::from_log(-0.05f64.ln()).unwrap(), 1);
        assert_eq!(p.decision(), TestState::RejectedNull { at: 1 });
    }

    #[test]
    fn update_counts_segment_observations() {
        let mut p = EProcess::new(0.01).unwrap();
        p.update(EValue::one(), 10);
        p.update(EValue::from_value(0.5).unwrap(), 7);
        assert_eq!(p.n(), 17);
        assert_eq!(p.decision(), TestState::Running);
    }

    #[test]
    fn saturating_arithmetic_stays_finite() {
        let mut p = EProcess::new(0.05).unwrap();
        let huge = EValue::from_log(f64::INFINITY).unwrap();
        p.update(huge, 1);
        p.update(huge, 1);
        assert!(p.log_e().is_finite());
        let tiny = EValue::from_log(f64::NEG_INFINITY).unwrap();
        let mut q = EProcess::new(0.05).unwrap();
        q.update(tiny, 1);
        q.update(tiny, 1);
        assert!(q.log_e().is_finite());
    }

    #[test]
    fn constructors_reject_nan_and_bad_alpha() {
        assert!(EValue::from_log(f64::NAN).is_err());
        assert!(EValue::from_value(-0.1).is_err());
        assert!(EProcess::new(0.0).is_err());
        assert!(EProcess::new(1.0).is_err());
        assert!(ville_threshold(0.05).unwrap() == 20.0);
        assert!(ville_threshold(1.2).is_err());
    }

    #[test]
    fn running_min_pvalue_example() {
        let p = running_min_pvalue(&[0.5, 4.0, 2.0]).unwrap();
        assert_eq!(p, vec![1.0, 0.25, 0.25]);
    }

    #[test]
    fn running_min_pvalue_log_twin_agrees() {
        let lams: [f64; 5] = [0.5, 4.0, 2.0, 100.0, 3.0];
        let logs: Vec<f64> = lams.iter().map(|l| l.ln()).collect();
        let a = running_min_pvalue(&lams).unwrap();
        let b = running_min_pvalue_from_log(&logs);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut p = EProcess::new(0.05).unwrap();
        p.update(EValue::from_log(1.234567890123456789).unwrap(), 3);
        p.update(EValue::from_log(-0.000012345678901234).unwrap(), 2);
        let json = serde_json::to_string(&p).unwrap();
        let back: EProcess = serde_json::from_str(&json).unwrap();
        assert_eq!(p.log_e().to_bits(), back.log_e().to_bits());
        assert_eq!(p, back);

        let e = EValue::from_log(std::f64::consts::LN_2).unwrap();
        let json = serde_json::to_string(&e).unwrap();
        let back: EValue = serde_json::from_str(&json).unwrap();
        assert_eq!(e.log().to_bits(), back.log().to_bits());
    }
}
