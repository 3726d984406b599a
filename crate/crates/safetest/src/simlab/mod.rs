//! Monte Carlo laboratory: peeking curves, stopping-time studies, error-rate
//! tracking, and decision-agreement summaries.
//!
//! Every study is deterministic given its seed: each replication draws from
//! a ChaCha8 stream keyed by `(seed ^ salt, replication)`, so results do not
//! depend on thread count or scheduling. Aggregation is order-independent.

mod studies;

pub use studies::{
    agreement_study, delta_grid_study, delta_grid_study_with, error_rate_study,
    error_rate_study_with, peeking_fp_curve, peeking_fp_curve_with, DecisionSubset, DeltaGridRow,
    DeltaGridStudy, ErrorRateRow, ErrorRateStudy, PeekingCurve, PeekingPoint, StudyOptions,
};
pub(crate) use studies::safe_t_crossing;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distinct salt per consumer so unrelated studies never share a stream.
pub(crate) const SALT_SAFE_T: u64 = 0x5AFE_0001;
pub(crate) const SALT_PEEK: u64 = 0x5AFE_0006;
/// Head-to-head studies feed every test the same observations per
/// replication; they all draw from this one salt.
pub(crate) const SALT_SHARED_DATA: u64 = 0x5AFE_0007;

/// RNG for one replication of one study. Distinct `(salt, replication)`
/// pairs yield independent ChaCha8 streams; the same pair always yields the
/// same stream, regardless of how replications are scheduled across threads.
pub fn replication_rng(seed: u64, salt: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(replication);
    rng
}

/// Which test a simulation exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    ClassicalT,
    SafeT,
    Msprt,
    Chi2,
    SafeProp,
    Srm,
}

impl TestKind {
    pub fn name(&self) -> &'static str {
        match self {
            TestKind::ClassicalT => "classical_t",
            TestKind::SafeT => "safe_t",
            TestKind::Msprt => "msprt",
            TestKind::Chi2 => "chi2",
            TestKind::SafeProp => "safe_prop",
            TestKind::Srm => "srm",
        }
    }
}

/// When a replication that has not yet rejected is stopped and H0 accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonPolicy {
    /// Stop at the classical fixed-horizon sample size for (alpha, beta,
    /// effect).
    ClassicalN,
    /// Stop at the empirical (1-beta) quantile of this study's own crossing
    /// times.
    PowerQuantile,
    /// Stop at an explicit per-group count.
    Fixed { n: u64 },
}

/// Declarative description of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub test_kind: TestKind,
    pub alpha: f64,
    pub beta: f64,
    /// True standardized effect of the simulated data (0 under H0).
    pub effect: f64,
    pub n_sims: u64,
    pub seed: u64,
    pub horizon_policy: HorizonPolicy,
    /// Peek counts for peeking studies; ignored elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peek_schedule: Option<Vec<u64>>,
    /// Effect the test under study is designed to detect (the safe t-test's
    /// delta, the classical-n horizon's sizing effect). Defaults to `effect`,
    /// which is right under the alternative but must be set explicitly for
    /// H0 runs, where `effect` is 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_effect: Option<f64>,
}

impl SimulationSpec {
    /// The design effect, falling back to the simulated one.
    pub fn design_effect_or_true(&self) -> f64 {
        self.design_effect.unwrap_or(self.effect)
    }

    pub fn validate(&self) -> Result<()> {
        crate::eprocess::check_alpha(self.alpha)?;
        if !self.beta.is_finite() || self.beta <= 0.0 || self.beta >= 1.0 {
            return Err(Error::domain(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !self.effect.is_finite() {
            return Err(Error::invalid("effect must be finite"));
        }
        if self.n_sims == 0 {
            return Err(Error::invalid("n_sims must be >= 1"));
        }
        if let Some(peeks) = &self.peek_schedule {
            if peeks.is_empty() || peeks.contains(&0) {
                return Err(Error::invalid("peek_schedule entries must be >= 1"));
            }
        }
        if let Some(d) = self.design_effect {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::invalid(format!(
                    "design_effect must be positive and finite, got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Equal-width binning of stopping times for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges, ascending.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        assert!(bins >= 1, "histogram needs at least one bin");
        if values.is_empty() {
            return Histogram { edges: vec![0.0, 0.0], counts: vec![0] };
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            return Histogram { edges: vec![lo, hi], counts: vec![values.len() as u64] };
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        Histogram { edges, counts }
    }
}

/// Aggregate of per-replication first-crossing times against a horizon.
///
/// A replication rejects H0 iff its e-process crossed `1/alpha` at or before
/// `power_quantile_stop` (the horizon); otherwise it stops there and accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSummary {
    pub n_sims: u64,
    /// Horizon used for the accept decision. Under the power-quantile policy
    /// this is the empirical (1-beta) quantile of crossing times.
    pub power_quantile_stop: u64,
    pub mean_stop: f64,
    pub reject_fraction: f64,
    /// Mean stop among rejecting replications; None if none rejected.
    pub mean_stop_reject: Option<f64>,
    /// Mean stop among accepting replications; None if all rejected.
    pub mean_stop_accept: Option<f64>,
    pub histogram: Histogram,
}

/// Smallest time h with `#(crossings <= h) >= ceil((1-beta) n)`, or `cap`
/// when too few replications crossed. `None` entries never crossed by `cap`.
pub fn power_quantile_horizon(crossings: &[Option<u64>], beta: f64, cap: u64) -> Result<u64> {
    if crossings.is_empty() {
        return Err(Error::invalid("need at least one replication"));
    }
    if !beta.is_finite() || beta <= 0.0 || beta >= 1.0 {
        return Err(Error::domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    let mut crossed: Vec<u64> = crossings.iter().flatten().cloned().collect();
    crossed.sort_unstable();
    let need = ((1.0 - beta) * crossings.len() as f64).ceil() as usize;
    // need >= 1 because beta < 1 and len >= 1.
    if crossed.len() < need {
        return Ok(cap);
    }
    Ok(crossed[need - 1].min(cap))
}

impl StoppingSummary {
    /// Decides every replication at `horizon`: reject iff it crossed at or
    /// before it, stop time `min(crossing, horizon)`.
    pub fn from_crossings(crossings: &[Option<u64>], horizon: u64) -> Result<Self> {
        if crossings.is_empty() {
            return Err(Error::invalid("need at least one replication"));
        }
        let n_sims = crossings.len() as u64;
        let mut stops = Vec::with_capacity(crossings.len());
        let mut n_reject = 0u64;
        let mut sum_reject = 0.0;
        let mut sum_accept = 0.0;
        for &c in crossings {
            match c {
                Some(t) if t <= horizon => {
                    n_reject += 1;
                    sum_reject += t as f64;
                    stops.push(t as f64);
                }
                _ => {
                    sum_accept += horizon as f64;
                    stops.push(horizon as f64);
                }
            }
        }
        let n_accept = n_sims - n_reject;
        Ok(StoppingSummary {
            n_sims,
            power_quantile_stop: horizon,
            mean_stop: (sum_reject + sum_accept) / n_sims as f64,
            reject_fraction: n_reject as f64 / n_sims as f64,
            mean_stop_reject: (n_reject > 0).then(|| sum_reject / n_reject as f64),
            mean_stop_accept: (n_accept > 0).then(|| sum_accept / n_accept as f64),
            histogram: Histogram::from_values(&stops, 30),
        })
    }
}

/// 2x2 cross-tabulation of two tests' reject decisions.
///
/// Layout: `counts[a][b]` with index 1 = reject, 0 = accept, so
/// `counts[1][1]` is "both reject".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub counts: [[u64; 2]; 2],
    pub phi: f64,
}

impl AgreementMatrix {
    pub fn from_decisions(a: &[bool], b: &[bool]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "decision sequences differ in length: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        if a.is_empty() {
            return Err(Error::invalid("need at least one decision pair"));
        }
        let mut counts = [[0u64; 2]; 2];
        for (&da, &db) in a.iter().zip(b) {
            counts[da as usize][db as usize] += 1;
        }
        Ok(AgreementMatrix { counts, phi: phi_coefficient(&counts) })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Phi (mean square contingency) coefficient of a 2x2 table; 0 when any
/// marginal is empty, where the ratio is otherwise 0/0.
pub fn phi_coefficient(counts: &[[u64; 2]; 2]) -> f64 {
    let n11 = counts[1][1] as f64;
    let n10 = counts[1][0] as f64;
    let n01 = counts[0][1] as f64;
    let n00 = counts[0][0] as f64;
    let denom = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00);
    if denom == 0.0 {
        return 0.0;
    }
    (n11 * n00 - n10 * n01) / denom.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn replication_streams_are_independent_and_reproducible() {
        let mut a = replication_rng(7, SALT_SAFE_T, 0);
        let mut a2 = replication_rng(7, SALT_SAFE_T, 0);
        let mut b = replication_rng(7, SALT_SAFE_T, 1);
        let mut c = replication_rng(7, SALT_PEEK, 0);
        let xa: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let xa2: Vec<u64> = (0..4).map(|_| a2.next_u64()).collect();
        let xb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..4).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xa2);
        assert_ne!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn phi_extremes() {
        let same = AgreementMatrix::from_decisions(
            &[true, false, true, false],
            &[true, false, true, false],
        )
        .unwrap();
        assert_eq!(same.phi, 1.0);
        let opposite =
            AgreementMatrix::from_decisions(&[true, false, true], &[false, true, false]).unwrap();
        assert_eq!(opposite.phi, -1.0);
        let degenerate =
            AgreementMatrix::from_decisions(&[true, true], &[true, false]).unwrap();
        assert_eq!(degenerate.phi, 0.0);
        assert_eq!(degenerate.total(), 2);
    }

    #[test]
    fn phi_known_table() {
        // Agreement-table layout check: rows (A reject, A accept) x columns
        // (B reject, B accept) with counts 228, 48, 21, 84.
        let counts = [[84, 21], [48, 228]];
        let phi = phi_coefficient(&counts);
        let (n11, n10, n01, n00): (f64, f64, f64, f64) = (228.0, 48.0, 21.0, 84.0);
        let expect: f64 = (n11 * n00 - n10 * n01)
            / ((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)).sqrt();
        assert!((phi - expect).abs() < 1e-15);
        assert!(phi > 0.5);
    }

    #[test]
    fn power_quantile_basic() {
        // 10 replications, two never cross. 1-beta = 0.8 needs 8 crossings.
        let crossings: Vec<Option<u64>> =
            vec![Some(5), Some(3), None, Some(8), Some(2), Some(9), Some(4), None, Some(7), Some(6)];
        let h = power_quantile_horizon(&crossings, 0.2, 100).unwrap();
        assert_eq!(h, 9);
        // Only 8 crossed; asking for 0.9 power is unreachable: horizon = cap.
        let h = power_quantile_horizon(&crossings, 0.1, 100).unwrap();
        assert_eq!(h, 100);
    }

    #[test]
    fn stopping_summary_consistency() {
        let crossings: Vec<Option<u64>> =
            vec![Some(5), Some(3), None, Some(8), Some(2), Some(9), Some(4), None, Some(7), Some(6)];
        let s = StoppingSummary::from_crossings(&crossings, 8).unwrap();
        assert_eq!(s.power_quantile_stop, 8);
        // Crossings <= 8: times 5,3,8,2,4,7,6 -> 7 rejections.
        assert!((s.reject_fraction - 0.7).abs() < 1e-15);
        let rf = s.reject_fraction;
        let recombined =
            rf * s.mean_stop_reject.unwrap() + (1.0 - rf) * s.mean_stop_accept.unwrap();
        assert!((s.mean_stop - recombined).abs() < 1e-12);
        assert_eq!(s.mean_stop_accept.unwrap(), 8.0);
        assert_eq!(s.histogram.counts.iter().sum::<u64>(), 10);
    }

    #[test]
    fn stopping_summary_all_reject() {
        let crossings: Vec<Option<u64>> = vec![Some(1), Some(2)];
        let s = StoppingSummary::from_crossings(&crossings, 10).unwrap();
        assert_eq!(s.reject_fraction, 1.0);
        assert!(s.mean_stop_accept.is_none());
        assert_eq!(s.mean_stop, 1.5);
    }

    #[test]
    fn histogram_edges() {
        let h = Histogram::from_values(&[1.0, 1.0, 1.0], 5);
        assert_eq!(h.counts, vec![3]);
        let h = Histogram::from_values(&[0.0, 1.0, 2.0, 3.0, 4.0], 4);
        assert_eq!(h.counts.iter().sum::<u64>(), 5);
        assert_eq!(h.edges.len(), 5);
        // Max value lands in the last bin, not out of range.
        assert_eq!(*h.counts.last().unwrap(), 2);
    }

    #[test]
    fn spec_validation() {
        let mut spec = SimulationSpec {
            test_kind: TestKind::SafeT,
            alpha: 0.05,
            beta: 0.2,
            effect: 0.0,
            n_sims: 10,
            seed: 1,
            horizon_policy: HorizonPolicy::PowerQuantile,
            peek_schedule: None,
            design_effect: None,
        };
        assert!(spec.validate().is_ok());
        spec.n_sims = 0;
        assert!(spec.validate().is_err());
        spec.n_sims = 1;
        spec.alpha = 1.0;
        assert!(spec.validate().is_err());
        spec.alpha = 0.05;
        spec.peek_schedule = Some(vec![1, 0]);
        assert!(spec.validate().is_err());
        spec.peek_schedule = None;
        spec.design_effect = Some(0.0);
        assert!(spec.validate().is_err());
        spec.design_effect = Some(0.3);
        assert!(spec.validate().is_ok());
        assert_eq!(spec.design_effect_or_true(), 0.3);
    }
}
