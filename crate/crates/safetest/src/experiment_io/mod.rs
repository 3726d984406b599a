//! Snapshot ingestion and group-sequential replay.
//!
//! Experimentation platforms rarely expose raw observations. What they
//! expose is the cumulative daily snapshot: per metric and group, the
//! sample size, mean, and standard deviation through the end of each day,
//! plus daily assignment counts for sample-ratio checks. This module parses
//! those two CSV shapes, replays the sequential tests over them, and
//! persists monitor state (see [`state`]) so a monitor can be stopped today
//! and resumed tomorrow without losing its guarantee.
//!
//! Replay over cumulative summaries is semi-sequential: each day the
//! full-data statistic is recomputed from the cumulative summary and its
//! running max is compared against `1/alpha`. That is how snapshot-only
//! deployments operate, but it is not a strict e-process: consecutive days
//! share data, so the daily statistics are not independent segments. Where
//! per-day increments are recoverable, which for a 0/1 metric they are,
//! [`bernoulli_strict_replay`] feeds the increments through the safe
//! proportion test instead, and that one is a strict e-process under
//! optional stopping and continuation.
//!
//! Experiments with several treatment variants are represented as separate
//! (experiment, variant) series, each re-listing the shared control rows,
//! and each replayed as an independent verdict.

use std::io;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::classical::{chi2_test, pooled_var, welch_t, DfMethod, SummaryStats};
use crate::eprocess::{check_alpha, log_ville_threshold, TestState};
use crate::error::{Error, Result};
use crate::msprt::{select_gamma2, Gamma2Mode, MsprtConfig, VarianceMode};
use crate::safe_prop::{BetaPrior, PropBatch, SequentialTwoSampleProp, SrmConfig, SrmMonitor};
use crate::safe_t::safe_t_log_evalue;
use crate::simlab::TestKind;

pub mod state;

pub use state::{MonitorState, PersistedState, StateStore, STATE_SCHEMA_VERSION};

/// Arm of the experiment a snapshot row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Control,
    Treatment,
}

/// One row of a snapshot CSV: cumulative summary statistics of one group of
/// one metric through the end of `day`. Within (experiment, metric, group),
/// `n` is non-decreasing over days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub experiment_id: String,
    pub metric_id: String,
    pub day: NaiveDate,
    pub group: Group,
    pub n: u64,
    pub mean: f64,
    pub stddev: f64,
}

/// One day of assignment counts, as daily increments (the canonical form).
/// Platforms exporting running totals should parse with
/// [`AssignmentShape::Cumulative`], which differences them back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub experiment_id: String,
    pub day: NaiveDate,
    pub n_control: u64,
    pub n_treatment: u64,
}

/// How the totals in an assignment CSV are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentShape {
    /// Each row holds that day's new assignments.
    Increments,
    /// Each row holds running totals; parsing differences them into daily
    /// increments and rejects any per-group decrease.
    Cumulative,
}

const SNAPSHOT_HEADER: [&str; 7] =
    ["experiment_id", "metric_id", "day", "group", "n", "mean", "stddev"];
const ASSIGNMENT_HEADER: [&str; 4] = ["experiment_id", "day", "n_control", "n_treatment"];

fn check_header(got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got_fields: Vec<&str> = got.iter().map(str::trim).collect();
    if got_fields != want {
        return Err(Error::invalid(format!(
            "bad header: expected `{}`, got `{}`",
            want.join(","),
            got_fields.join(",")
        )));
    }
    Ok(())
}

/// Typed rows plus their 1-based file line numbers (the header is line 1).
fn read_rows<R: io::Read, T: serde::de::DeserializeOwned>(
    reader: R,
    header: &[&str],
) -> Result<Vec<(u64, T)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, header)?;
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    let mut raw = csv::StringRecord::new();
    while rdr.read_record(&mut raw)? {
        let line = raw.position().map_or(0, |p| p.line());
        let row: T = raw.deserialize(Some(&headers))?;
        out.push((line, row));
    }
    Ok(out)
}

fn validation(row: u64, msg: impl Into<String>) -> Error {
    Error::Validation { row, msg: msg.into() }
}

/// Parses and validates a snapshot CSV.
///
/// Beyond per-field type checks this enforces: finite mean, nonnegative
/// finite stddev, nonempty ids, no duplicate (experiment, metric, day,
/// group) rows, both groups present on every (experiment, metric) day, and
/// cumulative monotone `n` within (experiment, metric, group). Violations
/// name the offending file line. Records come back in canonical
/// (experiment, metric, day, group) order, so downstream verdicts do not
/// depend on the input row order.
pub fn parse_snapshots<R: io::Read>(reader: R) -> Result<Vec<SnapshotRecord>> {
    let mut rows: Vec<(u64, SnapshotRecord)> = read_rows(reader, &SNAPSHOT_HEADER)?;
    for (line, r) in &rows {
        if r.experiment_id.is_empty() || r.metric_id.is_empty() {
            return Err(validation(*line, "empty experiment_id or metric_id"));
        }
        if !r.mean.is_finite() {
            return Err(validation(*line, format!("mean must be finite, got {}", r.mean)));
        }
        if !r.stddev.is_finite() || r.stddev < 0.0 {
            return Err(validation(*line, format!("stddev must be >= 0, got {}", r.stddev)));
        }
    }
    rows.sort_by(|a, b| {
        let ka = (&a.1.experiment_id, &a.1.metric_id, a.1.day, a.1.group);
        ka.cmp(&(&b.1.experiment_id, &b.1.metric_id, b.1.day, b.1.group))
    });
    for w in rows.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        if a.experiment_id == b.experiment_id
            && a.metric_id == b.metric_id
            && a.day == b.day
            && a.group == b.group
        {
            return Err(validation(
                w[1].0,
                format!(
                    "duplicate snapshot row for {}/{}/{} {:?}",
                    a.experiment_id, a.metric_id, a.day, a.group
                ),
            ));
        }
    }
    // With duplicates ruled out, a day must contribute exactly the
    // control/treatment pair; a singleton day is a missing-pair error.
    let mut i = 0;
    while i < rows.len() {
        let (line, r) = &rows[i];
        let mut j = i + 1;
        while j < rows.len()
            && rows[j].1.experiment_id == r.experiment_id
            && rows[j].1.metric_id == r.metric_id
            && rows[j].1.day == r.day
        {
            j += 1;
        }
        if j - i != 2 {
            let missing = match r.group {
                Group::Control => "treatment",
                Group::Treatment => "control",
            };
            return Err(validation(
                *line,
                format!(
                    "missing {missing} row for {}/{} on {}",
                    r.experiment_id, r.metric_id, r.day
                ),
            ));
        }
        i = j;
    }
    // Monotone cumulative n, checked in per-group day order.
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| {
        let ka = (&rows[a].1.experiment_id, &rows[a].1.metric_id, rows[a].1.group, rows[a].1.day);
        ka.cmp(&(&rows[b].1.experiment_id, &rows[b].1.metric_id, rows[b].1.group, rows[b].1.day))
    });
    for w in idx.windows(2) {
        let (_, a) = &rows[w[0]];
        let (pb, b) = &rows[w[1]];
        if a.experiment_id == b.experiment_id
            && a.metric_id == b.metric_id
            && a.group == b.group
            && b.n < a.n
        {
            return Err(validation(
                *pb,
                format!(
                    "cumulative n decreased from {} to {} for {}/{} {:?}",
                    a.n, b.n, b.experiment_id, b.metric_id, b.group
                ),
            ));
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// [`parse_snapshots`] from a file path.
pub fn parse_snapshots_path(path: &Path) -> Result<Vec<SnapshotRecord>> {
    parse_snapshots(std::fs::File::open(path)?)
}

/// Parses an assignment CSV into daily increments, sorted by (experiment,
/// day). Duplicate days are rejected; with [`AssignmentShape::Cumulative`]
/// any per-group decrease is rejected and rows are differenced, so summing
/// the returned increments reproduces the final totals exactly.
pub fn parse_assignments<R: io::Read>(
    reader: R,
    shape: AssignmentShape,
) -> Result<Vec<AssignmentRecord>> {
    let mut rows: Vec<(u64, AssignmentRecord)> = read_rows(reader, &ASSIGNMENT_HEADER)?;
    rows.sort_by(|a, b| {
        (&a.1.experiment_id, a.1.day).cmp(&(&b.1.experiment_id, b.1.day))
    });
    for w in rows.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        if a.experiment_id == b.experiment_id && a.day == b.day {
            return Err(validation(
                w[1].0,
                format!("duplicate assignment row for {} on {}", a.experiment_id, a.day),
            ));
        }
    }
    if shape == AssignmentShape::Cumulative {
        difference_in_place(&mut rows)?;
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// [`parse_assignments`] from a file path.
pub fn parse_assignments_path(path: &Path, shape: AssignmentShape) -> Result<Vec<AssignmentRecord>> {
    parse_assignments(std::fs::File::open(path)?, shape)
}

/// Converts already-parsed cumulative assignment records into daily
/// increments. Validation errors name the 1-based record index.
pub fn assignments_from_cumulative(records: &[AssignmentRecord]) -> Result<Vec<AssignmentRecord>> {
    let mut rows: Vec<(u64, AssignmentRecord)> =
        records.iter().cloned().enumerate().map(|(i, r)| (i as u64 + 1, r)).collect();
    rows.sort_by(|a, b| {
        (&a.1.experiment_id, a.1.day).cmp(&(&b.1.experiment_id, b.1.day))
    });
    difference_in_place(&mut rows)?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

fn difference_in_place(rows: &mut [(u64, AssignmentRecord)]) -> Result<()> {
    let mut prev: Option<(String, u64, u64)> = None;
    for (line, r) in rows.iter_mut() {
        let (base_c, base_t) = match &prev {
            Some((id, c, t)) if *id == r.experiment_id => (*c, *t),
            _ => (0, 0),
        };
        if r.n_control < base_c || r.n_treatment < base_t {
            return Err(validation(
                *line,
                format!(
                    "cumulative assignment counts decreased for {} on {}: control {} -> {}, treatment {} -> {}",
                    r.experiment_id, r.day, base_c, r.n_control, base_t, r.n_treatment
                ),
            ));
        }
        prev = Some((r.experiment_id.clone(), r.n_control, r.n_treatment));
        r.n_control -= base_c;
        r.n_treatment -= base_t;
    }
    Ok(())
}

/// Writes snapshot records in the canonical schema.
pub fn write_snapshots_csv<W: io::Write>(records: &[SnapshotRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes assignment records in the canonical schema.
pub fn write_assignments_csv<W: io::Write>(records: &[AssignmentRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Splits validated snapshot records into per-(experiment, metric) series
/// in canonical order.
pub fn partition_metrics(records: &[SnapshotRecord]) -> Vec<Vec<SnapshotRecord>> {
    let mut sorted: Vec<&SnapshotRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        let ka = (&a.experiment_id, &a.metric_id, a.day, a.group);
        ka.cmp(&(&b.experiment_id, &b.metric_id, b.day, b.group))
    });
    let mut out: Vec<Vec<SnapshotRecord>> = Vec::new();
    for r in sorted {
        match out.last_mut() {
            Some(series)
                if series[0].experiment_id == r.experiment_id
                    && series[0].metric_id == r.metric_id =>
            {
                series.push(r.clone())
            }
            _ => out.push(vec![r.clone()]),
        }
    }
    out
}

/// Cumulative statistics of both groups through the end of one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayPair {
    pub day: NaiveDate,
    pub control: SummaryStats,
    pub treatment: SummaryStats,
}

/// Pivots snapshot records of one (experiment, metric) series into
/// day-ordered group pairs. Days where a group has no observations yet are
/// dropped (nothing lost: snapshots are cumulative). Statistical
/// degeneracies like zero variance are the replay's business, not this
/// function's.
pub fn day_pairs(records: &[SnapshotRecord]) -> Result<Vec<DayPair>> {
    let first = records.first().ok_or_else(|| Error::invalid("no snapshot records"))?;
    if records.iter().any(|r| {
        r.experiment_id != first.experiment_id || r.metric_id != first.metric_id
    }) {
        return Err(Error::invalid(
            "records span multiple (experiment, metric) series; partition them first",
        ));
    }
    let mut sorted: Vec<&SnapshotRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.day, r.group));
    let mut pairs = Vec::new();
    let mut last_n = [0u64; 2];
    for chunk in sorted.chunks(2) {
        let [c, t] = match chunk {
            [c, t] if c.day == t.day && c.group == Group::Control && t.group == Group::Treatment => {
                [c, t]
            }
            _ => {
                return Err(Error::invalid(format!(
                    "day {} of {}/{} is not a control/treatment pair",
                    chunk[0].day, first.experiment_id, first.metric_id
                )))
            }
        };
        if c.n < last_n[0] || t.n < last_n[1] {
            return Err(Error::invalid(format!(
                "cumulative n decreased on {} of {}/{}",
                c.day, first.experiment_id, first.metric_id
            )));
        }
        last_n = [c.n, t.n];
        if c.n == 0 || t.n == 0 {
            continue;
        }
        pairs.push(DayPair {
            day: c.day,
            control: SummaryStats::new(c.n, c.mean, c.stddev * c.stddev)?,
            treatment: SummaryStats::new(t.n, t.mean, t.stddev * t.stddev)?,
        });
    }
    Ok(pairs)
}

/// Test parameters for a snapshot replay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub alpha: f64,
    /// Minimal standardized effect the safe t-test is designed to detect.
    pub delta: f64,
    pub msprt: MsprtConfig,
}

impl ReplayConfig {
    pub fn new(alpha: f64, delta: f64) -> Result<Self> {
        let config = ReplayConfig { alpha, delta, msprt: MsprtConfig::default() };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::domain(format!("delta must be > 0, got {}", self.delta)));
        }
        self.msprt.validate()
    }
}

/// Outcome of one test replayed over one (experiment, metric) series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentVerdict {
    pub experiment_id: String,
    pub metric_id: String,
    pub test: TestKind,
    /// True iff the running statistic ever crossed its rejection bound
    /// (for the classical t-test: final-day p < alpha).
    pub rejected: bool,
    /// First day the bound was crossed; never after `last_day`.
    pub first_rejection_day: Option<NaiveDate>,
    /// Log e-value (log Lambda for mSPRT) on the last evaluated day. `None`
    /// for the classical test and when every day was skipped.
    pub final_log_e: Option<f64>,
    /// Largest log statistic reached during the replay.
    pub max_log_e: Option<f64>,
    /// Classical: the final-day p-value. Sequential: the anytime-valid dual
    /// `exp(-max(0, max log E))`.
    pub p_value: f64,
    pub days_evaluated: u64,
    pub days_skipped: u64,
    pub last_day: NaiveDate,
}

struct ReplayAcc {
    log_thr: f64,
    final_log_e: Option<f64>,
    max_log_e: Option<f64>,
    first_rejection_day: Option<NaiveDate>,
    evaluated: u64,
    skipped: u64,
}

impl ReplayAcc {
    fn new(alpha: f64) -> Result<Self> {
        Ok(ReplayAcc {
            log_thr: log_ville_threshold(alpha)?,
            final_log_e: None,
            max_log_e: None,
            first_rejection_day: None,
            evaluated: 0,
            skipped: 0,
        })
    }

    fn record(&mut self, day: NaiveDate, log_e: f64) {
        self.evaluated += 1;
        self.final_log_e = Some(log_e);
        self.max_log_e = Some(self.max_log_e.map_or(log_e, |m| m.max(log_e)));
        if self.first_rejection_day.is_none() && log_e >= self.log_thr {
            self.first_rejection_day = Some(day);
        }
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }

    fn verdict(self, experiment_id: &str, metric_id: &str, test: TestKind, last_day: NaiveDate) -> ExperimentVerdict {
        ExperimentVerdict {
            experiment_id: experiment_id.to_owned(),
            metric_id: metric_id.to_owned(),
            test,
            rejected: self.first_rejection_day.is_some(),
            first_rejection_day: self.first_rejection_day,
            final_log_e: self.final_log_e,
            max_log_e: self.max_log_e,
            p_value: self.max_log_e.map_or(1.0, |m| (-m.max(0.0)).exp()),
            days_evaluated: self.evaluated,
            days_skipped: self.skipped,
            last_day,
        }
    }
}

/// Replays the requested tests over the cumulative day pairs of one
/// (experiment, metric) series.
///
/// Sequential tests (safe t, mSPRT) are recomputed each day on the
/// cumulative statistics and reject the first day their running statistic
/// reaches `1/alpha`; the classical t-test is evaluated on the final day
/// only. Days where a group has fewer than two observations, or where the
/// statistic is degenerate (zero pooled variance), are skipped and counted
/// in `days_skipped`. Only `SafeT`, `Msprt`, and `ClassicalT` can replay
/// summary snapshots; for 0/1 metrics see [`bernoulli_strict_replay`].
pub fn group_sequential_replay(
    records: &[SnapshotRecord],
    tests: &[TestKind],
    config: &ReplayConfig,
) -> Result<Vec<ExperimentVerdict>> {
    config.validate()?;
    if tests.is_empty() {
        return Err(Error::invalid("no tests requested"));
    }
    let pairs = day_pairs(records)?;
    if pairs.is_empty() {
        return Err(Error::invalid("no day with observations in both groups"));
    }
    let experiment_id = &records[0].experiment_id;
    let metric_id = &records[0].metric_id;
    tests
        .iter()
        .map(|&test| match test {
            TestKind::SafeT => replay_safe_t(&pairs, config, experiment_id, metric_id),
            TestKind::Msprt => replay_msprt(&pairs, config, experiment_id, metric_id),
            TestKind::ClassicalT => replay_classical(&pairs, config, experiment_id, metric_id),
            other => Err(Error::invalid(format!(
                "{} cannot replay cumulative summary snapshots",
                other.name()
            ))),
        })
        .collect()
}

fn usable(pair: &DayPair) -> bool {
    pair.control.n >= 2 && pair.treatment.n >= 2
}

fn replay_safe_t(
    pairs: &[DayPair],
    config: &ReplayConfig,
    experiment_id: &str,
    metric_id: &str,
) -> Result<ExperimentVerdict> {
    let mut acc = ReplayAcc::new(config.alpha)?;
    for pair in pairs {
        if !usable(pair) {
            acc.skip();
            continue;
        }
        match safe_t_log_evalue(&pair.treatment, &pair.control, config.delta) {
            Ok(log_e) => acc.record(pair.day, log_e),
            Err(Error::Degenerate(_)) => acc.skip(),
            Err(e) => return Err(e),
        }
    }
    Ok(acc.verdict(experiment_id, metric_id, TestKind::SafeT, pairs[pairs.len() - 1].day))
}

fn replay_msprt(
    pairs: &[DayPair],
    config: &ReplayConfig,
    experiment_id: &str,
    metric_id: &str,
) -> Result<ExperimentVerdict> {
    let mut acc = ReplayAcc::new(config.alpha)?;
    let mut frozen = match config.msprt.gamma2 {
        Gamma2Mode::Fixed { gamma2 } => Some(gamma2),
        _ => None,
    };
    for pair in pairs {
        if !usable(pair) {
            acc.skip();
            continue;
        }
        // Cumulative pair count; snapshots carry no per-user pairing, so
        // the smaller group size stands in for n.
        let n = pair.control.n.min(pair.treatment.n);
        let sigma2 = match config.msprt.variance {
            VarianceMode::Known { sigma2 } => sigma2,
            VarianceMode::PlugInPooled => match pooled_var(&pair.treatment, &pair.control) {
                Ok(v) if v > 0.0 => v,
                Ok(_) | Err(Error::Degenerate(_)) => {
                    acc.skip();
                    continue;
                }
                Err(e) => return Err(e),
            },
        };
        let gamma2 = match frozen {
            Some(g) => Some(g),
            None => match config.msprt.gamma2 {
                Gamma2Mode::Fixed { .. } => unreachable!("fixed gamma2 is frozen above"),
                Gamma2Mode::FreezeAfterWarmup { pairs: warmup } => {
                    if n >= warmup {
                        let g = gamma2_or_fallback(pair, config.msprt.fallback_gamma2)?;
                        frozen = Some(g);
                        Some(g)
                    } else {
                        None
                    }
                }
                Gamma2Mode::Continuous => {
                    Some(gamma2_or_fallback(pair, config.msprt.fallback_gamma2)?)
                }
            },
        };
        let log_lambda = match gamma2 {
            // Warmup: the mixture is not formed yet, Lambda is pinned at 1.
            None => 0.0,
            Some(g) => crate::msprt::msprt_log_lambda(
                n,
                pair.treatment.mean - pair.control.mean,
                config.msprt.theta0,
                sigma2,
                g,
            )?,
        };
        acc.record(pair.day, log_lambda);
    }
    Ok(acc.verdict(experiment_id, metric_id, TestKind::Msprt, pairs[pairs.len() - 1].day))
}

fn gamma2_or_fallback(pair: &DayPair, fallback: f64) -> Result<f64> {
    match select_gamma2(&pair.treatment, &pair.control) {
        Ok(g) => Ok(g),
        Err(Error::Degenerate(_)) => Ok(fallback),
        Err(e) => Err(e),
    }
}

fn replay_classical(
    pairs: &[DayPair],
    config: &ReplayConfig,
    experiment_id: &str,
    metric_id: &str,
) -> Result<ExperimentVerdict> {
    let last = &pairs[pairs.len() - 1];
    let mut verdict = ExperimentVerdict {
        experiment_id: experiment_id.to_owned(),
        metric_id: metric_id.to_owned(),
        test: TestKind::ClassicalT,
        rejected: false,
        first_rejection_day: None,
        final_log_e: None,
        max_log_e: None,
        p_value: 1.0,
        days_evaluated: 0,
        days_skipped: 0,
        last_day: last.day,
    };
    if !usable(last) {
        verdict.days_skipped = 1;
        return Ok(verdict);
    }
    match welch_t(&last.treatment, &last.control, DfMethod::Pooled) {
        Ok(report) => {
            verdict.days_evaluated = 1;
            verdict.p_value = report.p_value;
            verdict.rejected = report.p_value < config.alpha;
            if verdict.rejected {
                verdict.first_rejection_day = Some(last.day);
            }
        }
        // A degenerate final day carries no evidence against H0.
        Err(Error::Degenerate(_)) => verdict.days_skipped = 1,
        Err(e) => return Err(e),
    }
    Ok(verdict)
}

/// One day of an SRM replay, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmDayRow {
    pub day: NaiveDate,
    pub n_control: u64,
    pub n_treatment: u64,
    pub cum_control: u64,
    pub cum_treatment: u64,
    /// Accumulated log e-value after this day.
    pub log_e: f64,
}

/// Verdicts of an SRM replay: the safe sequential monitor over daily
/// increments, and the chi-square test on the final cumulative counts.
/// `monitor` is the end-of-replay monitor, ready to persist and resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmReplayReport {
    pub safe: ExperimentVerdict,
    pub chi2: ExperimentVerdict,
    pub n_control: u64,
    pub n_treatment: u64,
    pub days: Vec<SrmDayRow>,
    pub monitor: SrmMonitor,
}

/// Replays the SRM monitor over one experiment's daily assignment
/// increments, then runs the final-day chi-square check against the same
/// `theta0`. Group a of the monitor is the treatment arm, so
/// `config.theta0` is the intended treatment share.
pub fn srm_replay(records: &[AssignmentRecord], config: &SrmConfig) -> Result<SrmReplayReport> {
    srm_replay_core(records, SrmMonitor::new(*config)?, None)
}

/// Continues an SRM replay from a persisted monitor. Records on or before
/// `resume_after` are skipped as already consumed; cumulative totals for
/// the chi-square check are reconstructed from the monitor's posterior, so
/// a split stream ends in exactly the state of an unsplit one. On a
/// monitor that had already rejected, the verdict stays rejected but the
/// detection day is reported only if the crossing happens in this window.
pub fn srm_replay_resume(
    records: &[AssignmentRecord],
    monitor: SrmMonitor,
    resume_after: Option<NaiveDate>,
) -> Result<SrmReplayReport> {
    srm_replay_core(records, monitor, resume_after)
}

fn srm_replay_core(
    records: &[AssignmentRecord],
    mut monitor: SrmMonitor,
    resume_after: Option<NaiveDate>,
) -> Result<SrmReplayReport> {
    let first = records.first().ok_or_else(|| Error::invalid("no assignment records"))?;
    if records.iter().any(|r| r.experiment_id != first.experiment_id) {
        return Err(Error::invalid("assignment records span multiple experiments"));
    }
    let mut sorted: Vec<&AssignmentRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.day);
    for w in sorted.windows(2) {
        if w[0].day == w[1].day {
            return Err(Error::invalid(format!(
                "duplicate assignment day {} for {}",
                w[0].day, first.experiment_id
            )));
        }
    }
    if let Some(cursor) = resume_after {
        sorted.retain(|r| r.day > cursor);
        if sorted.is_empty() {
            return Err(Error::invalid(format!(
                "no assignment days after the resume point {cursor}"
            )));
        }
    }
    let config = *monitor.config();
    // Totals consumed in earlier sessions live in the posterior: it started
    // at the prior and has absorbed treatment as successes ever since.
    let prior = config.prior()?;
    let mut cum_t = (monitor.posterior().alpha - prior.alpha1).round() as u64;
    let mut cum_c = (monitor.posterior().beta - prior.beta1).round() as u64;
    let already_rejected = monitor.rejected_at().is_some();
    let mut acc = ReplayAcc::new(config.alpha)?;
    let mut days = Vec::with_capacity(sorted.len());
    for r in &sorted {
        monitor.observe(r.n_treatment, r.n_control)?;
        cum_c += r.n_control;
        cum_t += r.n_treatment;
        acc.record(r.day, monitor.log_e());
        days.push(SrmDayRow {
            day: r.day,
            n_control: r.n_control,
            n_treatment: r.n_treatment,
            cum_control: cum_c,
            cum_treatment: cum_t,
            log_e: monitor.log_e(),
        });
    }
    debug_assert_eq!(
        already_rejected || acc.first_rejection_day.is_some(),
        monitor.decision() != TestState::Running
    );
    let last_day = sorted[sorted.len() - 1].day;
    let mut safe = acc.verdict(&first.experiment_id, "assignments", TestKind::Srm, last_day);
    if already_rejected {
        safe.rejected = true;
        safe.first_rejection_day = None;
    }
    let total = cum_c + cum_t;
    if total == 0 {
        return Err(Error::invalid("no assignments observed"));
    }
    let report = chi2_test(
        &[cum_t as f64, cum_c as f64],
        &[config.theta0 * total as f64, (1.0 - config.theta0) * total as f64],
    )?;
    let chi2_rejected = report.p_value < config.alpha;
    let chi2 = ExperimentVerdict {
        experiment_id: first.experiment_id.clone(),
        metric_id: "assignments".to_owned(),
        test: TestKind::Chi2,
        rejected: chi2_rejected,
        first_rejection_day: chi2_rejected.then_some(last_day),
        final_log_e: None,
        max_log_e: None,
        p_value: report.p_value,
        days_evaluated: 1,
        days_skipped: 0,
        last_day,
    };
    Ok(SrmReplayReport { safe, chi2, n_control: cum_c, n_treatment: cum_t, days, monitor })
}

/// Strict-sequential replay for 0/1 metrics.
///
/// Recovers per-day increment batches from the cumulative snapshots
/// (cumulative successes are `round(n * mean)`, which must be integral) and
/// feeds them through the safe two-sample proportion test. Unlike the
/// semi-sequential summary replay this is a strict e-process: each day is
/// an independent data segment given the past.
pub fn bernoulli_strict_replay(
    records: &[SnapshotRecord],
    prior: BetaPrior,
    alpha: f64,
) -> Result<ExperimentVerdict> {
    let pairs = day_pairs(records)?;
    if pairs.is_empty() {
        return Err(Error::invalid("no day with observations in both groups"));
    }
    let experiment_id = &records[0].experiment_id;
    let metric_id = &records[0].metric_id;
    let mut seq = SequentialTwoSampleProp::new(prior, alpha)?;
    let mut acc = ReplayAcc::new(alpha)?;
    let (mut prev_c, mut prev_t) = ((0u64, 0u64), (0u64, 0u64));
    for pair in &pairs {
        let c = bernoulli_counts(&pair.control, metric_id, pair.day)?;
        let t = bernoulli_counts(&pair.treatment, metric_id, pair.day)?;
        for (now, before) in [(c, prev_c), (t, prev_t)] {
            if now.1 < before.1 || now.1 - before.1 > now.0 - before.0 {
                return Err(Error::invalid(format!(
                    "cumulative successes of {metric_id} are inconsistent on {}",
                    pair.day
                )));
            }
        }
        let batch =
            PropBatch::new(t.0 - prev_t.0, t.1 - prev_t.1, c.0 - prev_c.0, c.1 - prev_c.1)?;
        (prev_c, prev_t) = (c, t);
        if batch.total() == 0 {
            acc.skip();
            continue;
        }
        seq.update(&batch)?;
        acc.record(pair.day, seq.process().log_e());
    }
    Ok(acc.verdict(experiment_id, metric_id, TestKind::SafeProp, pairs[pairs.len() - 1].day))
}

/// (n, successes) of one group-day, requiring the metric to be 0/1.
fn bernoulli_counts(stats: &SummaryStats, metric_id: &str, day: NaiveDate) -> Result<(u64, u64)> {
    if !(0.0..=1.0).contains(&stats.mean) {
        return Err(Error::invalid(format!(
            "metric {metric_id} is not 0/1 on {day}: mean {} outside [0, 1]",
            stats.mean
        )));
    }
    let s = stats.mean * stats.n as f64;
    let rounded = s.round();
    if (s - rounded).abs() > 1e-6 * (stats.n as f64).max(1.0) {
        return Err(Error::invalid(format!(
            "metric {metric_id} is not 0/1 on {day}: n * mean = {s} is not an integer"
        )));
    }
    Ok((stats.n, (rounded as u64).min(stats.n)))
}

pub mod fixtures {
    //! Deterministic synthetic datasets exercising the replay paths: a flat
    //! null, a constant strong effect, a novelty effect that decays away, a
    //! 0/1 metric, and balanced/imbalanced assignment streams.

    use super::{AssignmentRecord, Group, SnapshotRecord};
    use chrono::{Days, NaiveDate};

    /// First day of every fixture.
    pub fn start_day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 6, 1).expect("valid fixture date")
    }

    fn day(i: u32) -> NaiveDate {
        start_day().checked_add_days(Days::new(i as u64)).expect("fixture day in range")
    }

    fn snapshot_series(
        experiment_id: &str,
        metric_id: &str,
        days: u32,
        per_day: u64,
        treatment_mean: impl Fn(u32) -> f64,
    ) -> Vec<SnapshotRecord> {
        let mut out = Vec::with_capacity(2 * days as usize);
        for d in 1..=days {
            let n = per_day * d as u64;
            for (group, mean) in
                [(Group::Control, 0.0), (Group::Treatment, treatment_mean(d))]
            {
                out.push(SnapshotRecord {
                    experiment_id: experiment_id.to_owned(),
                    metric_id: metric_id.to_owned(),
                    day: day(d - 1),
                    group,
                    n,
                    mean,
                    stddev: 1.0,
                });
            }
        }
        out
    }

    /// Identical groups: mean 0, stddev 1, `per_day` new users per group
    /// per day.
    pub fn null_snapshots(
        experiment_id: &str,
        metric_id: &str,
        days: u32,
        per_day: u64,
    ) -> Vec<SnapshotRecord> {
        snapshot_series(experiment_id, metric_id, days, per_day, |_| 0.0)
    }

    /// Constant standardized effect on the treatment arm.
    pub fn strong_effect_snapshots(
        experiment_id: &str,
        metric_id: &str,
        days: u32,
        per_day: u64,
        effect: f64,
    ) -> Vec<SnapshotRecord> {
        snapshot_series(experiment_id, metric_id, days, per_day, move |_| effect)
    }

    /// Novelty effect: the cumulative treatment mean starts at
    /// `initial_effect` and decays as `1/d^2`, so early days look like a
    /// strong win that the full horizon no longer supports.
    pub fn novelty_snapshots(
        experiment_id: &str,
        metric_id: &str,
        days: u32,
        per_day: u64,
        initial_effect: f64,
    ) -> Vec<SnapshotRecord> {
        snapshot_series(experiment_id, metric_id, days, per_day, move |d| {
            initial_effect / f64::from(d * d)
        })
    }

    /// 0/1 metric with exact integral success counts: cumulative successes
    /// are `round(p * n)` per group.
    pub fn bernoulli_snapshots(
        experiment_id: &str,
        metric_id: &str,
        days: u32,
        per_day: u64,
        p_control: f64,
        p_treatment: f64,
    ) -> Vec<SnapshotRecord> {
        let mut out = Vec::with_capacity(2 * days as usize);
        for d in 1..=days {
            let n = per_day * d as u64;
            for (group, p) in [(Group::Control, p_control), (Group::Treatment, p_treatment)] {
                let s = (p * n as f64).round();
                let mean = s / n as f64;
                // (n-1)-denominator sample variance of s ones among n.
                let var = if n > 1 { s * (n as f64 - s) / (n as f64 * (n as f64 - 1.0)) } else { 0.0 };
                out.push(SnapshotRecord {
                    experiment_id: experiment_id.to_owned(),
                    metric_id: metric_id.to_owned(),
                    day: day(d - 1),
                    group,
                    n,
                    mean,
                    stddev: var.sqrt(),
                });
            }
        }
        out
    }

    /// `per_group` assignments per group per day.
    pub fn balanced_assignments(
        experiment_id: &str,
        days: u32,
        per_group: u64,
    ) -> Vec<AssignmentRecord> {
        (1..=days)
            .map(|d| AssignmentRecord {
                experiment_id: experiment_id.to_owned(),
                day: day(d - 1),
                n_control: per_group,
                n_treatment: per_group,
            })
            .collect()
    }

    /// `total_per_day` assignments split `treatment_share` to treatment,
    /// the rest to control.
    pub fn imbalanced_assignments(
        experiment_id: &str,
        days: u32,
        total_per_day: u64,
        treatment_share: f64,
    ) -> Vec<AssignmentRecord> {
        (1..=days)
            .map(|d| {
                let n_t = (total_per_day as f64 * treatment_share).round() as u64;
                AssignmentRecord {
                    experiment_id: experiment_id.to_owned(),
                    day: day(d - 1),
                    n_control: total_per_day - n_t,
                    n_treatment: n_t,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::AgreementMatrix;

    fn replay_config() -> ReplayConfig {
        ReplayConfig::new(0.05, 0.2).unwrap()
    }

    fn parse_str(csv: &str) -> Result<Vec<SnapshotRecord>> {
        parse_snapshots(csv.as_bytes())
    }

    #[test]
    fn parse_empty_with_header() {
        let records = parse_str("experiment_id,metric_id,day,group,n,mean,stddev\n").unwrap();
        assert!(records.is_empty());
        // A fully empty file has no header at all: rejected.
        assert!(matches!(parse_str(""), Err(Error::InvalidInput(_))));
        // Wrong schema (assignment header) is rejected up front.
        let err = parse_snapshots("experiment_id,day,n_control,n_treatment\n".as_bytes());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn parse_round_trips_and_canonicalizes() {
        let mut records = fixtures::null_snapshots("exp1", "m1", 3, 100);
        // Shuffle rows; parse must restore canonical order.
        records.reverse();
        let mut bytes = Vec::new();
        write_snapshots_csv(&records, &mut bytes).unwrap();
        let parsed = parse_snapshots(bytes.as_slice()).unwrap();
        let canonical = fixtures::null_snapshots("exp1", "m1", 3, 100);
        assert_eq!(parsed, canonical);
    }

    #[test]
    fn parse_rejects_bad_rows() {
        let base = "experiment_id,metric_id,day,group,n,mean,stddev\n";
        // Cumulative n decreases on the second day: line 3 is at fault.
        let decreasing = format!(
            "{base}exp,m,2025-06-01,control,100,0.0,1.0\n\
             exp,m,2025-06-02,control,90,0.0,1.0\n\
             exp,m,2025-06-01,treatment,100,0.0,1.0\n\
             exp,m,2025-06-02,treatment,110,0.0,1.0\n"
        );
        match parse_str(&decreasing) {
            Err(Error::Validation { row, msg }) => {
                assert_eq!(row, 3);
                assert!(msg.contains("decreased"), "{msg}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
        // Missing treatment row for the day.
        let missing = format!("{base}exp,m,2025-06-01,control,100,0.0,1.0\n");
        match parse_str(&missing) {
            Err(Error::Validation { row, msg }) => {
                assert_eq!(row, 2);
                assert!(msg.contains("missing treatment"), "{msg}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
        // Duplicate (experiment, metric, day, group).
        let duplicate = format!(
            "{base}exp,m,2025-06-01,control,100,0.0,1.0\n\
             exp,m,2025-06-01,treatment,100,0.0,1.0\n\
             exp,m,2025-06-01,control,100,0.0,1.0\n"
        );
        assert!(matches!(parse_str(&duplicate), Err(Error::Validation { .. })));
        // Negative stddev.
        let negative = format!("{base}exp,m,2025-06-01,control,100,0.0,-1.0\n");
        assert!(matches!(parse_str(&negative), Err(Error::Validation { row: 2, .. })));
        // Unknown group label is a csv-level deserialize error.
        let bad_group = format!("{base}exp,m,2025-06-01,variant_b,100,0.0,1.0\n");
        assert!(matches!(parse_str(&bad_group), Err(Error::Csv(_))));
    }

    #[test]
    fn two_day_fixture_groups_into_two_day_pairs() {
        let records = fixtures::null_snapshots("exp1", "m1", 2, 50);
        assert_eq!(records.len(), 4);
        let pairs = day_pairs(&records).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].control.n, 50);
        assert_eq!(pairs[1].treatment.n, 100);
        assert!(pairs[0].day < pairs[1].day);
    }

    #[test]
    fn assignments_cumulative_differencing() {
        let csv = "experiment_id,day,n_control,n_treatment\n\
                   exp,2025-06-01,100,100\n\
                   exp,2025-06-02,250,240\n\
                   exp,2025-06-03,300,310\n";
        let inc = parse_assignments(csv.as_bytes(), AssignmentShape::Cumulative).unwrap();
        assert_eq!(inc[1].n_control, 150);
        assert_eq!(inc[2].n_treatment, 70);
        // Increments telescope back to the final totals exactly.
        let (c, t): (u64, u64) =
            inc.iter().fold((0, 0), |(c, t), r| (c + r.n_control, t + r.n_treatment));
        assert_eq!((c, t), (300, 310));

        let shrinking = "experiment_id,day,n_control,n_treatment\n\
                         exp,2025-06-01,100,100\n\
                         exp,2025-06-02,90,140\n";
        match parse_assignments(shrinking.as_bytes(), AssignmentShape::Cumulative) {
            Err(Error::Validation { row: 3, .. }) => {}
            other => panic!("expected validation error at row 3, got {other:?}"),
        }

        // Increments shape passes the same totals through untouched.
        let inc2 = parse_assignments(csv.as_bytes(), AssignmentShape::Increments).unwrap();
        assert_eq!(inc2[1].n_control, 250);
    }

    #[test]
    fn replay_huge_effect_rejects_on_day_one() {
        let records = fixtures::strong_effect_snapshots("exp1", "m1", 3, 1000, 1.0);
        let tests = [TestKind::SafeT, TestKind::Msprt, TestKind::ClassicalT];
        let verdicts = group_sequential_replay(&records, &tests, &replay_config()).unwrap();
        for v in &verdicts {
            assert!(v.rejected, "{:?} should reject", v.test);
            assert!(v.first_rejection_day.unwrap() <= v.last_day);
        }
        assert_eq!(verdicts[0].first_rejection_day, Some(fixtures::start_day()));
        assert_eq!(verdicts[1].first_rejection_day, Some(fixtures::start_day()));
        // Classical only ever decides on the final day.
        assert_eq!(verdicts[2].first_rejection_day, Some(verdicts[2].last_day));
    }

    #[test]
    fn replay_flat_null_accepts_everywhere() {
        let records = fixtures::null_snapshots("exp1", "m1", 5, 500);
        let tests = [TestKind::SafeT, TestKind::Msprt, TestKind::ClassicalT];
        let verdicts = group_sequential_replay(&records, &tests, &replay_config()).unwrap();
        for v in &verdicts {
            assert!(!v.rejected, "{:?} should accept", v.test);
            assert_eq!(v.first_rejection_day, None);
            assert_eq!(v.days_evaluated + v.days_skipped, if v.test == TestKind::ClassicalT { 1 } else { 5 });
        }
        // Identical groups: e-value below 1, classical p at its maximum.
        assert!(verdicts[0].final_log_e.unwrap() < 0.0);
        assert_eq!(verdicts[0].p_value, 1.0);
        assert_eq!(verdicts[2].p_value, 1.0);
    }

    #[test]
    fn replay_novelty_effect_splits_the_tests() {
        // Day 1 shows a 0.5 sd lift that later data dilutes as 1/d^2. The
        // safe test monitors daily and catches the early spike; the
        // classical test sees only the final day, where the cumulative
        // effect has shrunk to 0.5/196 sd, and accepts.
        let records = fixtures::novelty_snapshots("exp1", "m1", 14, 1000, 0.5);
        let tests = [TestKind::SafeT, TestKind::ClassicalT];
        let verdicts = group_sequential_replay(&records, &tests, &replay_config()).unwrap();
        let (safe, classical) = (&verdicts[0], &verdicts[1]);
        assert!(safe.rejected);
        assert_eq!(safe.first_rejection_day, Some(fixtures::start_day()));
        assert!(!classical.rejected);
        assert!(classical.p_value > 0.5);
    }

    #[test]
    fn replay_is_invariant_to_row_order() {
        let mut records = fixtures::novelty_snapshots("exp1", "m1", 6, 400, 0.4);
        let tests = [TestKind::SafeT, TestKind::Msprt, TestKind::ClassicalT];
        let before = group_sequential_replay(&records, &tests, &replay_config()).unwrap();
        records.reverse();
        records.swap(1, 7);
        let after = group_sequential_replay(&records, &tests, &replay_config()).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn replay_skips_degenerate_days() {
        // Day 1 has zero variance in both groups and identical means: no
        // t-statistic exists. Day 2 is healthy.
        let mut records = fixtures::null_snapshots("exp1", "m1", 2, 100);
        for r in records.iter_mut().filter(|r| r.day == fixtures::start_day()) {
            r.stddev = 0.0;
        }
        let tests = [TestKind::SafeT, TestKind::Msprt];
        let verdicts = group_sequential_replay(&records, &tests, &replay_config()).unwrap();
        for v in &verdicts {
            assert_eq!(v.days_skipped, 1, "{:?}", v.test);
            assert_eq!(v.days_evaluated, 1);
            assert!(!v.rejected);
        }
    }

    #[test]
    fn replay_rejects_foreign_kinds_and_mixed_series() {
        let records = fixtures::null_snapshots("exp1", "m1", 2, 100);
        let err = group_sequential_replay(&records, &[TestKind::Srm], &replay_config());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        let mut mixed = records.clone();
        mixed.extend(fixtures::null_snapshots("exp2", "m1", 2, 100));
        let err = group_sequential_replay(&mixed, &[TestKind::SafeT], &replay_config());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        // partition_metrics splits the mixed set back into clean series.
        let parts = partition_metrics(&mixed);
        assert_eq!(parts.len(), 2);
        assert!(group_sequential_replay(&parts[0], &[TestKind::SafeT], &replay_config()).is_ok());
    }

    #[test]
    fn srm_balanced_accepts_imbalanced_rejects() {
        let config = SrmConfig::new(0.5, 0.01, 0.01).unwrap();
        let balanced = fixtures::balanced_assignments("exp1", 10, 250);
        let report = srm_replay(&balanced, &config).unwrap();
        assert!(!report.safe.rejected);
        assert!(!report.chi2.rejected);
        assert_eq!((report.n_control, report.n_treatment), (2500, 2500));
        // Perfectly balanced data favors theta0: e-value below 1.
        assert!(report.safe.final_log_e.unwrap() < 0.0);

        let skewed = fixtures::imbalanced_assignments("exp1", 10, 500, 0.6);
        let report = srm_replay(&skewed, &config).unwrap();
        assert!(report.safe.rejected);
        assert!(report.chi2.rejected);
        let detection = report.safe.first_rejection_day.unwrap();
        assert!(detection <= report.safe.last_day);
        // The chi2 test only fires at the horizon; the monitor's detection
        // day is recorded for the comparison tables.
        assert_eq!(report.chi2.first_rejection_day, Some(report.chi2.last_day));
        assert_eq!(report.days.len(), 10);
        assert!(report.days[9].cum_control < report.days[9].cum_treatment);
    }

    #[test]
    fn srm_agreement_table_layout() {
        // Structural stand-in for the safe-vs-chi2 agreement table: counts
        // sum to the number of experiments and land on the diagonal when
        // the fixtures are clear-cut.
        let config = SrmConfig::new(0.5, 0.01, 0.01).unwrap();
        let mut decisions = Vec::new();
        for i in 0..3 {
            let id = format!("balanced{i}");
            let report = srm_replay(&fixtures::balanced_assignments(&id, 8, 300), &config).unwrap();
            decisions.push((report.safe.rejected, report.chi2.rejected));
        }
        for i in 0..3 {
            let id = format!("skewed{i}");
            let report =
                srm_replay(&fixtures::imbalanced_assignments(&id, 8, 600, 0.58), &config).unwrap();
            decisions.push((report.safe.rejected, report.chi2.rejected));
        }
        let (safe, chi): (Vec<bool>, Vec<bool>) = decisions.into_iter().unzip();
        let matrix = AgreementMatrix::from_decisions(&safe, &chi).unwrap();
        assert_eq!(matrix.total(), 6);
        // counts[a][b]: diagonal cells are the agreements.
        assert_eq!(matrix.counts[0][0] + matrix.counts[1][1], 6);
    }

    #[test]
    fn bernoulli_strict_replay_detects_and_validates() {
        let effect = fixtures::bernoulli_snapshots("exp1", "conv", 10, 500, 0.5, 0.6);
        let prior = BetaPrior::new(1.0, 1.0).unwrap();
        let verdict = bernoulli_strict_replay(&effect, prior, 0.05).unwrap();
        assert_eq!(verdict.test, TestKind::SafeProp);
        assert!(verdict.rejected);
        assert!(verdict.first_rejection_day.unwrap() <= verdict.last_day);

        let null = fixtures::bernoulli_snapshots("exp1", "conv", 10, 500, 0.5, 0.5);
        let verdict = bernoulli_strict_replay(&null, prior, 0.05).unwrap();
        assert!(!verdict.rejected);

        // A metric whose n * mean is fractional is not 0/1 data.
        let continuous = fixtures::null_snapshots("exp1", "m1", 2, 100);
        let mut bad = continuous.clone();
        bad[1].mean = 0.371115;
        assert!(matches!(
            bernoulli_strict_replay(&bad, prior, 0.05),
            Err(Error::InvalidInput(_))
        ));
    }
}
