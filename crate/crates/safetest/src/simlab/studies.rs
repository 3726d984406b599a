//! The lab's canned studies: peeking inflation curves, head-to-head error
//! rates at a shared horizon, and stopping-time grids over effect sizes.
//!
//! Head-to-head fairness: within one replication every test reads the same
//! simulated observations (same ChaCha8 stream, same draw order), so sample
//! size and decision comparisons are paired rather than independent. Each
//! effect size on a grid mixes its bit pattern into the salt, giving every
//! grid point fresh data while keeping the pairing across tests.

use std::collections::BTreeSet;
use std::io::Write as IoWrite;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{fixed_horizon_sample_size, welch_t, DfMethod, RunningStats};
use crate::eprocess::log_ville_threshold;
use crate::error::{Error, Result};
use crate::msprt::{Gamma2Mode, MsprtConfig, MsprtStream};
use crate::safe_t::{safe_t_log_evalue, SafeTConfig};
use crate::simlab::{
    power_quantile_horizon, replication_rng, AgreementMatrix, Histogram, HorizonPolicy,
    SimulationSpec, StoppingSummary, TestKind, SALT_PEEK, SALT_SHARED_DATA,
};

/// Condition tags mixed into the shared-data salt: the null and alternative
/// worlds draw independent streams, while within each world all tests still
/// read identical observations.
const NULL_COND: u64 = 0x4E55_4C4C;
const ALT_COND: u64 = 0x414C_5400;

/// Tuning knobs shared by the head-to-head studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    /// mSPRT configuration used whenever a study simulates that test.
    pub msprt: MsprtConfig,
    /// Crossing searches give up at `cap_multiplier` times the classical
    /// fixed-horizon n; replications still uncrossed there accept at the
    /// horizon like any other.
    pub cap_multiplier: u64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            // Recomputing gamma^2 from the running Cohen's d tracks the
            // simulated effect instead of the warmup noise floor, which is
            // what the reference stopping-time tables require.
            msprt: MsprtConfig { gamma2: Gamma2Mode::Continuous, ..MsprtConfig::default() },
            cap_multiplier: 4,
        }
    }
}

impl StudyOptions {
    fn validate(&self) -> Result<()> {
        self.msprt.validate()?;
        if self.cap_multiplier == 0 {
            return Err(Error::invalid("cap_multiplier must be >= 1"));
        }
        Ok(())
    }
}

/// One simulated observation pair: treatment draw first, then control, both
/// unit-variance normal, with `effect` added to the treatment arm.
#[inline]
fn draw_pair(rng: &mut ChaCha8Rng, effect: f64) -> (f64, f64) {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    (x + effect, y)
}

/// First per-group n <= cap at which the safe t-test crosses 1/alpha on one
/// simulated stream, or None if it never does.
pub(crate) fn safe_t_crossing(
    config: &SafeTConfig,
    effect: f64,
    cap: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<u64>> {
    let log_thr = log_ville_threshold(config.alpha)?;
    let mut sx = RunningStats::new();
    let mut sy = RunningStats::new();
    for n in 1..=cap {
        let (x, y) = draw_pair(rng, effect);
        sx.push(x)?;
        sy.push(y)?;
        if n < 2 {
            continue;
        }
        match safe_t_log_evalue(&sx.summary()?, &sy.summary()?, config.delta) {
            Ok(log_e) if log_e >= log_thr => return Ok(Some(n)),
            Ok(_) => {}
            Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// mSPRT analogue of [`safe_t_crossing`], consuming pairs in the same order.
pub(crate) fn msprt_crossing(
    config: &MsprtConfig,
    alpha: f64,
    effect: f64,
    cap: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<u64>> {
    let mut stream = MsprtStream::new(config.clone(), alpha)?;
    for _ in 1..=cap {
        let (x, y) = draw_pair(rng, effect);
        stream.push_pair(x, y)?;
        if let Some(at) = stream.first_crossing() {
            return Ok(Some(at));
        }
    }
    Ok(None)
}

/// Classical fixed-horizon decision: pooled two-sided t-test after exactly
/// `n` pairs of the stream. A degenerate sample (no variance) accepts.
fn classical_rejects_at(n: u64, alpha: f64, effect: f64, rng: &mut ChaCha8Rng) -> Result<bool> {
    let mut sx = RunningStats::new();
    let mut sy = RunningStats::new();
    for _ in 0..n {
        let (x, y) = draw_pair(rng, effect);
        sx.push(x)?;
        sy.push(y)?;
    }
    match welch_t(&sx.summary()?, &sy.summary()?, DfMethod::Pooled) {
        Ok(report) => Ok(report.p_value < alpha),
        Err(Error::Degenerate(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// False-positive rate of one peeking schedule entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeekingPoint {
    pub peeks: u64,
    pub fp_rate: f64,
}

/// FP rate as a function of peek count for one test under H0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeekingCurve {
    pub test_kind: TestKind,
    pub alpha: f64,
    pub n_sims: u64,
    pub horizon: u64,
    pub points: Vec<PeekingPoint>,
}

impl PeekingCurve {
    pub fn to_csv<W: IoWrite>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["test", "alpha", "n_sims", "horizon", "peeks", "fp_rate"])?;
        for p in &self.points {
            w.write_record([
                self.test_kind.name().to_string(),
                format!("{}", self.alpha),
                format!("{}", self.n_sims),
                format!("{}", self.horizon),
                format!("{}", p.peeks),
                format!("{}", p.fp_rate),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evenly spaced peek times over the horizon: peek j of k lands at
/// round(horizon * j / k), clamped to [2, horizon] (a t-test needs two
/// observations per group). When the horizon is a multiple of every k in the
/// schedule the peek sets nest, so the per-replication rejection indicator
/// is monotone in k by construction, not merely in expectation.
fn peek_indices(horizon: u64, peeks: u64) -> Vec<u64> {
    let mut idx: Vec<u64> = (1..=peeks)
        .map(|j| ((horizon as f64 * j as f64 / peeks as f64).round() as u64).clamp(2, horizon))
        .collect();
    idx.dedup();
    idx
}

/// Simulates a fixed-horizon experiment repeatedly inspected mid-flight.
///
/// The test rejects if it is past its own threshold at any peek: p < alpha
/// at one of the k evenly spaced looks for the classical t-test, e-value or
/// likelihood ratio at or above 1/alpha for the anytime-valid tests. The
/// curve records that rejection fraction per schedule entry. With
/// `effect = 0` the points are false-positive rates; the anytime-valid tests
/// hold alpha at every k while the classical rate climbs.
pub fn peeking_fp_curve(spec: &SimulationSpec) -> Result<PeekingCurve> {
    peeking_fp_curve_with(spec, &StudyOptions::default())
}

/// [`peeking_fp_curve`] with explicit study options (mSPRT tuning).
pub fn peeking_fp_curve_with(
    spec: &SimulationSpec,
    options: &StudyOptions,
) -> Result<PeekingCurve> {
    spec.validate()?;
    options.validate()?;
    let schedule = spec.peek_schedule.clone().unwrap_or_else(|| vec![1, 5, 20, 100]);
    let horizon = match spec.horizon_policy {
        HorizonPolicy::Fixed { n } => n,
        HorizonPolicy::ClassicalN => {
            fixed_horizon_sample_size(spec.alpha, spec.beta, spec.design_effect_or_true())?
        }
        HorizonPolicy::PowerQuantile => {
            return Err(Error::invalid("peeking studies need a fixed or classical-n horizon"));
        }
    };
    if horizon < 2 {
        return Err(Error::invalid("peeking horizon must be >= 2 pairs"));
    }
    let delta = spec.design_effect_or_true();
    if spec.test_kind == TestKind::SafeT && delta <= 0.0 {
        return Err(Error::invalid("safe t peeking needs a positive design effect"));
    }
    if !matches!(spec.test_kind, TestKind::ClassicalT | TestKind::SafeT | TestKind::Msprt) {
        return Err(Error::invalid(format!(
            "peeking study supports classical_t, safe_t, msprt; got {}",
            spec.test_kind.name()
        )));
    }
    let log_thr = log_ville_threshold(spec.alpha)?;

    let per_k: Vec<Vec<u64>> = schedule.iter().map(|&k| peek_indices(horizon, k)).collect();
    let union: Vec<u64> = per_k.iter().flatten().cloned().collect::<BTreeSet<u64>>().into_iter().collect();
    let positions: Vec<Vec<usize>> = per_k
        .iter()
        .map(|v| v.iter().map(|t| union.binary_search(t).unwrap()).collect())
        .collect();

    let flags: Vec<Vec<bool>> = (0..spec.n_sims)
        .into_par_iter()
        .map(|rep| -> Result<Vec<bool>> {
            let mut rng = replication_rng(spec.seed, SALT_PEEK, rep);
            let mut sx = RunningStats::new();
            let mut sy = RunningStats::new();
            let mut msprt = match spec.test_kind {
                TestKind::Msprt => Some(MsprtStream::new(options.msprt.clone(), spec.alpha)?),
                _ => None,
            };
            let mut out = vec![false; union.len()];
            let mut next = 0usize;
            for n in 1..=horizon {
                let (x, y) = draw_pair(&mut rng, spec.effect);
                sx.push(x)?;
                sy.push(y)?;
                if let Some(stream) = msprt.as_mut() {
                    stream.push_pair(x, y)?;
                }
                if next < union.len() && union[next] == n {
                    out[next] = match spec.test_kind {
                        TestKind::ClassicalT => {
                            match welch_t(&sx.summary()?, &sy.summary()?, DfMethod::Pooled) {
                                Ok(report) => report.p_value < spec.alpha,
                                Err(Error::Degenerate(_)) => false,
                                Err(e) => return Err(e),
                            }
                        }
                        TestKind::SafeT => {
                            match safe_t_log_evalue(&sx.summary()?, &sy.summary()?, delta) {
                                Ok(log_e) => log_e >= log_thr,
                                Err(Error::Degenerate(_)) => false,
                                Err(e) => return Err(e),
                            }
                        }
                        TestKind::Msprt => msprt.as_ref().unwrap().log_lambda() >= log_thr,
                        _ => unreachable!(),
                    };
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let points = schedule
        .iter()
        .zip(&positions)
        .map(|(&k, pos)| {
            let hits = flags.iter().filter(|f| pos.iter().any(|&p| f[p])).count();
            PeekingPoint { peeks: k, fp_rate: hits as f64 / spec.n_sims as f64 }
        })
        .collect();
    Ok(PeekingCurve {
        test_kind: spec.test_kind,
        alpha: spec.alpha,
        n_sims: spec.n_sims,
        horizon,
        points,
    })
}

/// Error rates of one decision rule in the head-to-head study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateRow {
    /// Test name, or "either_rejects" for the combined rule.
    pub rule: String,
    pub type_i: f64,
    pub type_ii: f64,
}

/// Two tests run on identical streams under H0 and under the alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateStudy {
    pub classical_n: u64,
    /// Accept horizon of each test (classical tests decide exactly there).
    pub horizon_a: u64,
    pub horizon_b: u64,
    pub rows: Vec<ErrorRateRow>,
    /// Cross-tabulated decisions under H0 and under the alternative.
    pub null_agreement: AgreementMatrix,
    pub alt_agreement: AgreementMatrix,
}

impl ErrorRateStudy {
    pub fn to_csv<W: IoWrite>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rule", "type_i", "type_ii"])?;
        for row in &self.rows {
            w.write_record([
                row.rule.clone(),
                format!("{}", row.type_i),
                format!("{}", row.type_ii),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-condition decisions of one test plus the horizon it decided at.
struct KindRun {
    null_decisions: Vec<bool>,
    alt_decisions: Vec<bool>,
    horizon: u64,
}

fn run_error_rate_kind(
    spec: &SimulationSpec,
    options: &StudyOptions,
    n_c: u64,
    cap: u64,
) -> Result<KindRun> {
    let alt = spec.effect;
    match spec.test_kind {
        TestKind::ClassicalT => {
            let decide = |cond_salt: u64, effect: f64| -> Result<Vec<bool>> {
                (0..spec.n_sims)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng = replication_rng(spec.seed, cond_salt, rep);
                        classical_rejects_at(n_c, spec.alpha, effect, &mut rng)
                    })
                    .collect()
            };
            Ok(KindRun {
                null_decisions: decide(SALT_SHARED_DATA ^ NULL_COND, 0.0)?,
                alt_decisions: decide(SALT_SHARED_DATA ^ ALT_COND, alt)?,
                horizon: n_c,
            })
        }
        TestKind::SafeT | TestKind::Msprt => {
            let cross = |cond_salt: u64, effect: f64| -> Result<Vec<Option<u64>>> {
                (0..spec.n_sims)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng = replication_rng(spec.seed, cond_salt, rep);
                        match spec.test_kind {
                            TestKind::SafeT => {
                                let config =
                                    SafeTConfig::new(spec.design_effect_or_true(), spec.alpha)?;
                                safe_t_crossing(&config, effect, cap, &mut rng)
                            }
                            TestKind::Msprt => {
                                msprt_crossing(&options.msprt, spec.alpha, effect, cap, &mut rng)
                            }
                            _ => unreachable!(),
                        }
                    })
                    .collect()
            };
            let alt_crossings = cross(SALT_SHARED_DATA ^ ALT_COND, alt)?;
            let null_crossings = cross(SALT_SHARED_DATA ^ NULL_COND, 0.0)?;
            let horizon = match spec.horizon_policy {
                HorizonPolicy::ClassicalN => n_c,
                HorizonPolicy::Fixed { n } => n,
                HorizonPolicy::PowerQuantile => {
                    power_quantile_horizon(&alt_crossings, spec.beta, cap)?
                }
            };
            let decide =
                |cs: &[Option<u64>]| cs.iter().map(|c| matches!(c, Some(t) if *t <= horizon)).collect();
            Ok(KindRun {
                null_decisions: decide(&null_crossings),
                alt_decisions: decide(&alt_crossings),
                horizon,
            })
        }
        other => Err(Error::invalid(format!(
            "error-rate study supports classical_t, safe_t, msprt; got {}",
            other.name()
        ))),
    }
}

fn reject_fraction(decisions: &[bool]) -> f64 {
    decisions.iter().filter(|&&d| d).count() as f64 / decisions.len() as f64
}

/// Runs two tests on identical data under H0 and under the alternative and
/// tabulates Type I/II error rates, including the "either rejects" rule.
///
/// Both specs must agree on alpha, beta, effect (the alternative), n_sims,
/// and seed; `effect` must be positive. Sequential tests accept at their
/// horizon policy's stop; the classical test decides at the fixed-horizon n
/// for (alpha, beta, effect). Combining two valid tests by rejecting when
/// either does inflates Type I, which is the point of the study.
pub fn error_rate_study(
    spec_a: &SimulationSpec,
    spec_b: &SimulationSpec,
) -> Result<ErrorRateStudy> {
    error_rate_study_with(spec_a, spec_b, &StudyOptions::default())
}

/// [`error_rate_study`] with explicit study options (mSPRT tuning, cap).
pub fn error_rate_study_with(
    spec_a: &SimulationSpec,
    spec_b: &SimulationSpec,
    options: &StudyOptions,
) -> Result<ErrorRateStudy> {
    spec_a.validate()?;
    spec_b.validate()?;
    options.validate()?;
    let shared = [
        (spec_a.alpha == spec_b.alpha, "alpha"),
        (spec_a.beta == spec_b.beta, "beta"),
        (spec_a.effect == spec_b.effect, "effect"),
        (spec_a.n_sims == spec_b.n_sims, "n_sims"),
        (spec_a.seed == spec_b.seed, "seed"),
        (spec_a.design_effect == spec_b.design_effect, "design_effect"),
    ];
    for (ok, what) in shared {
        if !ok {
            return Err(Error::invalid(format!("specs must agree on {what}")));
        }
    }
    if spec_a.effect <= 0.0 {
        return Err(Error::invalid("error-rate study needs a positive alternative effect"));
    }
    let n_c = fixed_horizon_sample_size(spec_a.alpha, spec_a.beta, spec_a.design_effect_or_true())?;
    let cap = n_c
        .checked_mul(options.cap_multiplier)
        .ok_or_else(|| Error::invalid("cap overflows u64"))?;
    let a = run_error_rate_kind(spec_a, options, n_c, cap)?;
    let b = run_error_rate_kind(spec_b, options, n_c, cap)?;

    let either_null: Vec<bool> =
        a.null_decisions.iter().zip(&b.null_decisions).map(|(&x, &y)| x || y).collect();
    let either_alt: Vec<bool> =
        a.alt_decisions.iter().zip(&b.alt_decisions).map(|(&x, &y)| x || y).collect();
    let row = |rule: &str, null: &[bool], alt: &[bool]| ErrorRateRow {
        rule: rule.to_string(),
        type_i: reject_fraction(null),
        type_ii: 1.0 - reject_fraction(alt),
    };
    Ok(ErrorRateStudy {
        classical_n: n_c,
        horizon_a: a.horizon,
        horizon_b: b.horizon,
        rows: vec![
            row(spec_a.test_kind.name(), &a.null_decisions, &a.alt_decisions),
            row(spec_b.test_kind.name(), &b.null_decisions, &b.alt_decisions),
            row("either_rejects", &either_null, &either_alt),
        ],
        null_agreement: AgreementMatrix::from_decisions(&a.null_decisions, &b.null_decisions)?,
        alt_agreement: AgreementMatrix::from_decisions(&a.alt_decisions, &b.alt_decisions)?,
    })
}

/// Which replications a sample-size ratio averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSubset {
    Reject,
    Accept,
    Either,
}

/// Stopping summary of one test at one effect size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaGridRow {
    pub delta: f64,
    pub test_kind: TestKind,
    /// Classical fixed-horizon n for (alpha, beta, delta); the normalizer.
    pub classical_n: u64,
    pub summary: StoppingSummary,
}

impl DeltaGridRow {
    /// Mean samples used, normalized by the classical fixed-horizon n, over
    /// one decision subset. None when no replication landed in the subset.
    pub fn ratio(&self, subset: DecisionSubset) -> Option<f64> {
        let n_c = self.classical_n as f64;
        match subset {
            DecisionSubset::Reject => self.summary.mean_stop_reject.map(|m| m / n_c),
            DecisionSubset::Accept => self.summary.mean_stop_accept.map(|m| m / n_c),
            DecisionSubset::Either => Some(self.summary.mean_stop / n_c),
        }
    }
}

/// Stopping-time comparison across an effect-size grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaGridStudy {
    pub alpha: f64,
    pub beta: f64,
    pub n_sims: u64,
    pub seed: u64,
    pub rows: Vec<DeltaGridRow>,
}

impl DeltaGridStudy {
    /// Grid-mean of [`DeltaGridRow::ratio`] for one test, one subset.
    pub fn aggregate(&self, kind: TestKind, subset: DecisionSubset) -> Option<f64> {
        self.aggregate_over(kind, subset, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// [`Self::aggregate`] restricted to grid points with lo <= delta <= hi.
    pub fn aggregate_over(
        &self,
        kind: TestKind,
        subset: DecisionSubset,
        lo: f64,
        hi: f64,
    ) -> Option<f64> {
        let ratios: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.test_kind == kind && r.delta >= lo && r.delta <= hi)
            .filter_map(|r| r.ratio(subset))
            .collect();
        if ratios.is_empty() {
            return None;
        }
        Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
    }

    pub fn row(&self, delta: f64, kind: TestKind) -> Option<&DeltaGridRow> {
        self.rows.iter().find(|r| r.delta == delta && r.test_kind == kind)
    }

    pub fn to_csv<W: IoWrite>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "delta",
            "test",
            "classical_n",
            "horizon",
            "n_sims",
            "reject_fraction",
            "mean_stop",
            "mean_stop_reject",
            "mean_stop_accept",
            "ratio_reject",
            "ratio_accept",
            "ratio_either",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                format!("{}", r.delta),
                r.test_kind.name().to_string(),
                format!("{}", r.classical_n),
                format!("{}", r.summary.power_quantile_stop),
                format!("{}", r.summary.n_sims),
                format!("{}", r.summary.reject_fraction),
                format!("{}", r.summary.mean_stop),
                opt(r.summary.mean_stop_reject),
                opt(r.summary.mean_stop_accept),
                opt(r.ratio(DecisionSubset::Reject)),
                opt(r.ratio(DecisionSubset::Accept)),
                opt(r.ratio(DecisionSubset::Either)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stopping-time grid: for each effect size, runs every requested test on
/// identical per-replication streams and summarizes stops against the
/// classical fixed-horizon n.
///
/// Sequential tests accept at the empirical (1-beta) quantile of their own
/// crossing times (so accepting replications stop exactly at the power
/// horizon); the classical test always decides at its fixed-horizon n, which
/// pins its ratio to 1 and makes it the normalization row.
pub fn delta_grid_study(
    deltas: &[f64],
    tests: &[TestKind],
    alpha: f64,
    beta: f64,
    n_sims: u64,
    seed: u64,
) -> Result<DeltaGridStudy> {
    delta_grid_study_with(deltas, tests, alpha, beta, n_sims, seed, &StudyOptions::default())
}

/// [`delta_grid_study`] with explicit study options (mSPRT tuning, cap).
#[allow(clippy::too_many_arguments)]
pub fn delta_grid_study_with(
    deltas: &[f64],
    tests: &[TestKind],
    alpha: f64,
    beta: f64,
    n_sims: u64,
    seed: u64,
    options: &StudyOptions,
) -> Result<DeltaGridStudy> {
    crate::eprocess::check_alpha(alpha)?;
    if !beta.is_finite() || beta <= 0.0 || beta >= 1.0 {
        return Err(Error::domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    if deltas.is_empty() || tests.is_empty() {
        return Err(Error::invalid("need at least one delta and one test"));
    }
    if n_sims == 0 {
        return Err(Error::invalid("n_sims must be >= 1"));
    }
    options.validate()?;
    for &d in deltas {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::invalid(format!("grid deltas must be positive, got {d}")));
        }
    }
    let mut rows = Vec::with_capacity(deltas.len() * tests.len());
    for &delta in deltas {
        let n_c = fixed_horizon_sample_size(alpha, beta, delta)?;
        let cap = n_c
            .checked_mul(options.cap_multiplier)
            .ok_or_else(|| Error::invalid("cap overflows u64"))?;
        let salt = SALT_SHARED_DATA ^ delta.to_bits();
        for &kind in tests {
            let summary = match kind {
                TestKind::ClassicalT => {
                    let rejects: Vec<bool> = (0..n_sims)
                        .into_par_iter()
                        .map(|rep| {
                            let mut rng = replication_rng(seed, salt, rep);
                            classical_rejects_at(n_c, alpha, delta, &mut rng)
                        })
                        .collect::<Result<_>>()?;
                    classical_summary(&rejects, n_c)
                }
                TestKind::SafeT | TestKind::Msprt => {
                    let crossings: Vec<Option<u64>> = (0..n_sims)
                        .into_par_iter()
                        .map(|rep| {
                            let mut rng = replication_rng(seed, salt, rep);
                            match kind {
                                TestKind::SafeT => {
                                    let config = SafeTConfig::new(delta, alpha)?;
                                    safe_t_crossing(&config, delta, cap, &mut rng)
                                }
                                TestKind::Msprt => {
                                    msprt_crossing(&options.msprt, alpha, delta, cap, &mut rng)
                                }
                                _ => unreachable!(),
                            }
                        })
                        .collect::<Result<_>>()?;
                    let horizon = power_quantile_horizon(&crossings, beta, cap)?;
                    StoppingSummary::from_crossings(&crossings, horizon)?
                }
                other => {
                    return Err(Error::invalid(format!(
                        "delta-grid study supports classical_t, safe_t, msprt; got {}",
                        other.name()
                    )));
                }
            };
            rows.push(DeltaGridRow { delta, test_kind: kind, classical_n: n_c, summary });
        }
    }
    Ok(DeltaGridStudy { alpha, beta, n_sims, seed, rows })
}

/// Degenerate stopping summary for the fixed-horizon test: every replication
/// stops at n_c whatever it decides.
fn classical_summary(rejects: &[bool], n_c: u64) -> StoppingSummary {
    let n_sims = rejects.len() as u64;
    let n_reject = rejects.iter().filter(|&&d| d).count() as u64;
    let stop = n_c as f64;
    StoppingSummary {
        n_sims,
        power_quantile_stop: n_c,
        mean_stop: stop,
        reject_fraction: n_reject as f64 / n_sims as f64,
        mean_stop_reject: (n_reject > 0).then_some(stop),
        mean_stop_accept: (n_reject < n_sims).then_some(stop),
        histogram: Histogram::from_values(&vec![stop; rejects.len()], 30),
    }
}

/// Cross-tabulates two tests' reject decisions (phi coefficient included).
pub fn agreement_study(a: &[bool], b: &[bool]) -> Result<AgreementMatrix> {
    AgreementMatrix::from_decisions(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peek_indices_shapes() {
        assert_eq!(peek_indices(100, 1), vec![100]);
        assert_eq!(peek_indices(100, 4), vec![25, 50, 75, 100]);
        // Clamping to >= 2 merges the earliest peeks.
        assert_eq!(peek_indices(10, 10), vec![2, 3, 4, 5, 6, 7, 8, 9, 10]);
        // Nesting: every index of the coarse schedule appears in the fine one.
        let coarse = peek_indices(1000, 5);
        let fine = peek_indices(1000, 20);
        assert!(coarse.iter().all(|t| fine.contains(t)));
    }

    fn peek_spec(kind: TestKind, schedule: Vec<u64>) -> SimulationSpec {
        SimulationSpec {
            test_kind: kind,
            alpha: 0.05,
            beta: 0.2,
            effect: 0.0,
            n_sims: 600,
            seed: 42,
            horizon_policy: HorizonPolicy::Fixed { n: 60 },
            peek_schedule: Some(schedule),
            design_effect: Some(0.5),
        }
    }

    #[test]
    fn classical_peeking_inflates() {
        let curve = peeking_fp_curve(&peek_spec(TestKind::ClassicalT, vec![1, 6, 30])).unwrap();
        let fp: Vec<f64> = curve.points.iter().map(|p| p.fp_rate).collect();
        // One look is the textbook test: FP near alpha.
        assert!(fp[0] > 0.01 && fp[0] < 0.09, "fp at one peek: {}", fp[0]);
        // 60 divides by 6 and 30, so the peek sets nest and the indicator is
        // monotone per replication; strictness has MC slack on top.
        assert!(fp[1] > fp[0]);
        assert!(fp[2] > fp[1]);
        assert!(fp[2] >= 0.10, "fp at 30 peeks: {}", fp[2]);
    }

    #[test]
    fn safe_peeking_holds_alpha() {
        let curve = peeking_fp_curve(&peek_spec(TestKind::SafeT, vec![1, 30])).unwrap();
        for p in &curve.points {
            // Anytime-valid: even peeking at every step stays near alpha
            // (3 SE of MC noise above it at worst).
            assert!(p.fp_rate <= 0.05 + 3.0 * (0.05f64 * 0.95 / 600.0).sqrt());
        }
    }

    #[test]
    fn msprt_peeking_holds_alpha() {
        // Exact-martingale mode: known variance, frozen gamma^2. The plug-in
        // modes are only asymptotically valid and can drift at n this small.
        let options = StudyOptions {
            msprt: MsprtConfig {
                theta0: 0.0,
                variance: crate::msprt::VarianceMode::Known { sigma2: 1.0 },
                gamma2: Gamma2Mode::Fixed { gamma2: 1.0 },
                fallback_gamma2: 1.0,
            },
            cap_multiplier: 4,
        };
        let curve =
            peeking_fp_curve_with(&peek_spec(TestKind::Msprt, vec![30]), &options).unwrap();
        assert!(curve.points[0].fp_rate <= 0.05 + 3.0 * (0.05f64 * 0.95 / 600.0).sqrt());
    }

    #[test]
    fn peeking_deterministic_and_csv() {
        let spec = peek_spec(TestKind::ClassicalT, vec![1, 5]);
        let a = peeking_fp_curve(&spec).unwrap();
        let b = peeking_fp_curve(&spec).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("test,alpha,n_sims,horizon,peeks,fp_rate\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn peeking_rejects_bad_specs() {
        let mut spec = peek_spec(TestKind::Srm, vec![1]);
        assert!(peeking_fp_curve(&spec).is_err());
        spec.test_kind = TestKind::ClassicalT;
        spec.horizon_policy = HorizonPolicy::PowerQuantile;
        assert!(peeking_fp_curve(&spec).is_err());
    }

    fn error_spec(kind: TestKind) -> SimulationSpec {
        SimulationSpec {
            test_kind: kind,
            alpha: 0.05,
            beta: 0.2,
            effect: 0.5,
            n_sims: 400,
            seed: 7,
            horizon_policy: HorizonPolicy::ClassicalN,
            peek_schedule: None,
            design_effect: None,
        }
    }

    #[test]
    fn error_rate_study_classical_vs_safe() {
        let study =
            error_rate_study(&error_spec(TestKind::ClassicalT), &error_spec(TestKind::SafeT))
                .unwrap();
        assert_eq!(study.classical_n, 63);
        assert_eq!(study.horizon_a, 63);
        assert_eq!(study.horizon_b, 63);
        assert_eq!(study.rows.len(), 3);
        let by_rule = |rule: &str| study.rows.iter().find(|r| r.rule == rule).unwrap().clone();
        let classical = by_rule("classical_t");
        let safe = by_rule("safe_t");
        let either = by_rule("either_rejects");
        // Fixed-horizon test at its designed n: both error rates near spec.
        assert!(classical.type_i > 0.01 && classical.type_i < 0.10);
        assert!(classical.type_ii < 0.30);
        // The safe test keeps its alpha with room to spare.
        assert!(safe.type_i <= 0.05 + 3.0 * (0.05f64 * 0.95 / 400.0).sqrt());
        // The OR rule can only reject more often than either component.
        assert!(either.type_i >= classical.type_i.max(safe.type_i));
        assert!(either.type_ii <= classical.type_ii.min(safe.type_ii));
        assert_eq!(study.null_agreement.total(), 400);
        assert_eq!(study.alt_agreement.total(), 400);
        let again =
            error_rate_study(&error_spec(TestKind::ClassicalT), &error_spec(TestKind::SafeT))
                .unwrap();
        assert_eq!(study, again);
    }

    #[test]
    fn error_rate_study_rejects_mismatched_specs() {
        let a = error_spec(TestKind::ClassicalT);
        let mut b = error_spec(TestKind::SafeT);
        b.seed = 8;
        assert!(error_rate_study(&a, &b).is_err());
        let mut c = error_spec(TestKind::SafeT);
        c.effect = 0.0;
        let mut a0 = a.clone();
        a0.effect = 0.0;
        assert!(error_rate_study(&a0, &c).is_err());
    }

    #[test]
    fn delta_grid_smoke() {
        let tests = [TestKind::ClassicalT, TestKind::SafeT, TestKind::Msprt];
        let study = delta_grid_study(&[0.4], &tests, 0.05, 0.2, 150, 3).unwrap();
        assert_eq!(study.rows.len(), 3);
        let classical = study.row(0.4, TestKind::ClassicalT).unwrap();
        // Normalization row: every replication stops at n_c by construction.
        assert_eq!(classical.ratio(DecisionSubset::Either), Some(1.0));
        assert!(classical.summary.reject_fraction > 0.6);
        let safe = study.row(0.4, TestKind::SafeT).unwrap();
        // Power horizon: close to 1 - beta of replications reject at it.
        assert!(safe.summary.reject_fraction >= 0.7, "{}", safe.summary.reject_fraction);
        let either = safe.ratio(DecisionSubset::Either).unwrap();
        assert!(either > 0.3 && either < 1.5, "safe either ratio {either}");
        assert!(study.row(0.4, TestKind::Msprt).is_some());
        // Single-delta grid: aggregate equals the row ratio.
        assert_eq!(study.aggregate(TestKind::SafeT, DecisionSubset::Either), Some(either));
        let again = delta_grid_study(&[0.4], &tests, 0.05, 0.2, 150, 3).unwrap();
        assert_eq!(study, again);
    }

    #[test]
    fn delta_grid_accept_stops_at_horizon() {
        let study = delta_grid_study(&[0.3], &[TestKind::SafeT], 0.05, 0.2, 200, 11).unwrap();
        let row = &study.rows[0];
        // Accepting replications stop exactly at the power-quantile horizon.
        if row.summary.reject_fraction < 1.0 {
            assert_eq!(
                row.summary.mean_stop_accept.unwrap(),
                row.summary.power_quantile_stop as f64
            );
        }
        assert_eq!(
            row.ratio(DecisionSubset::Accept).unwrap(),
            row.summary.power_quantile_stop as f64 / row.classical_n as f64
        );
    }

    #[test]
    fn delta_grid_csv_shape() {
        let study =
            delta_grid_study(&[0.4], &[TestKind::ClassicalT, TestKind::SafeT], 0.05, 0.2, 50, 1)
                .unwrap();
        let mut buf = Vec::new();
        study.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "delta,test,classical_n,horizon,n_sims,reject_fraction,mean_stop,\
             mean_stop_reject,mean_stop_accept,ratio_reject,ratio_accept,ratio_either"
        );
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn delta_grid_rejects_bad_input() {
        assert!(delta_grid_study(&[], &[TestKind::SafeT], 0.05, 0.2, 10, 1).is_err());
        assert!(delta_grid_study(&[0.2], &[], 0.05, 0.2, 10, 1).is_err());
        assert!(delta_grid_study(&[0.0], &[TestKind::SafeT], 0.05, 0.2, 10, 1).is_err());
        assert!(delta_grid_study(&[0.2], &[TestKind::Srm], 0.05, 0.2, 10, 1).is_err());
    }
}
