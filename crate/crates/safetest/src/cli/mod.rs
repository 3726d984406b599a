//! Command-line front end.
//!
//! Four subcommands over the library: `design` (sample sizing), `analyze`
//! (snapshot replay), `srm` (assignment-count monitoring), and `simulate`
//! (the Monte Carlo studies). Each is a thin wrapper: the library call with
//! the same parameters produces the same numbers, and for a fixed seed the
//! emitted bytes are identical across runs and thread counts.
//!
//! Option resolution: explicit flags beat the `--config` TOML file, which
//! beats `SAFETEST_*` environment variables, which beat built-in defaults.
//!
//! Output goes to stdout, or one file per table under `--output-dir`. CSV
//! tables start with a `# schema: safetest.<table>.v1` comment line (gnuplot
//! treats it as a comment); JSON documents carry the same tag in a `schema`
//! field. Exit codes: 0 success, 1 data/validation failure, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::classical::fixed_horizon_sample_size;
use crate::error::{Error, Result};
use crate::experiment_io::{
    group_sequential_replay, parse_assignments_path, parse_snapshots_path, partition_metrics,
    srm_replay, srm_replay_resume, AssignmentRecord, AssignmentShape, ExperimentVerdict,
    MonitorState, PersistedState, ReplayConfig, SrmReplayReport, StateStore,
    STATE_SCHEMA_VERSION,
};
use crate::safe_prop::SrmConfig;
use crate::safe_t::{design_batch_n, power_stopping_simulation, SafeTConfig};
use crate::simlab::{
    delta_grid_study, error_rate_study, peeking_fp_curve, AgreementMatrix, HorizonPolicy,
    PeekingCurve, SimulationSpec, StoppingSummary, TestKind,
};

/// Version tag of every emitted table and JSON document.
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

/// Cap for the safe-t design search; far beyond any practical batch size.
const DESIGN_CAP: u64 = 1_000_000_000;

const ENV_PREFIX: &str = "SAFETEST_";

/// Runs the CLI on the given argument list and returns the process exit
/// code. `main` is one line over this; tests call it in-process.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

#[derive(Debug)]
enum Failure {
    /// Bad flags, config, or environment: exit 2.
    Usage(String),
    /// Bad input data or I/O while processing it: exit 1.
    Data(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "safetest",
    about = "Anytime-valid A/B testing: safe sequential tests, snapshot replay, SRM monitoring, simulation studies",
    disable_version_flag = true
)]
struct Cli {
    /// Print the version and schema versions as JSON, then exit.
    #[arg(long)]
    version: bool,
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// TOML file with default option values (flat keys: alpha, beta, ...).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write each output table to a file in this directory instead of stdout.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Print gnuplot-ready column notes for each emitted table to stderr.
    #[arg(long, global = true)]
    gnuplot_hints: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-group sample size for a fixed-horizon or safe design.
    Design(DesignArgs),
    /// Replay sequential tests over cumulative snapshot CSVs.
    Analyze(AnalyzeArgs),
    /// Sample-ratio-mismatch monitoring over assignment-count CSVs.
    Srm(SrmArgs),
    /// Deterministic Monte Carlo studies.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct DesignArgs {
    /// Which test to size.
    #[arg(long, value_enum)]
    test: DesignTest,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Minimal standardized effect the design must detect.
    #[arg(long)]
    delta: Option<f64>,
    /// Replications behind the simulated safe-t stopping horizon.
    #[arg(long)]
    sims: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DesignTest {
    SafeT,
    ClassicalT,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Snapshot CSV (experiment_id,metric_id,day,group,n,mean,stddev).
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// Tests to replay (comma-separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    tests: Vec<AnalyzeTest>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Safe-t design effect.
    #[arg(long)]
    delta: Option<f64>,
    /// Directory for per-series evidence snapshots (safe-t running max).
    #[arg(long, value_name = "DIR")]
    state_dir: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum AnalyzeTest {
    SafeT,
    Msprt,
    ClassicalT,
}

impl AnalyzeTest {
    fn kind(self) -> TestKind {
        match self {
            AnalyzeTest::SafeT => TestKind::SafeT,
            AnalyzeTest::Msprt => TestKind::Msprt,
            AnalyzeTest::ClassicalT => TestKind::ClassicalT,
        }
    }
}

#[derive(Args, Debug)]
struct SrmArgs {
    /// Assignment CSV (experiment_id,day,n_control,n_treatment).
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// Intended treatment share.
    #[arg(long)]
    theta0: Option<f64>,
    /// Minimal detectable deviation; sets the Beta prior to
    /// (1/(10 eps^2), 1/(10 eps^2)).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Directory of resumable monitor state, keyed by experiment id.
    #[arg(long, value_name = "DIR")]
    state_dir: Option<PathBuf>,
    /// Input rows hold running totals rather than daily increments.
    #[arg(long)]
    cumulative: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Which study to run.
    #[arg(long, value_enum)]
    study: Study,
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per condition.
    #[arg(long)]
    sims: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// True/design effect (stopping, error-rates).
    #[arg(long)]
    delta: Option<f64>,
    /// Delta grid (comma-separated; delta-grid study).
    #[arg(long, value_delimiter = ',')]
    deltas: Vec<f64>,
    /// Monitoring horizon in pairs (peeking study).
    #[arg(long)]
    horizon: Option<u64>,
    /// Peek counts (comma-separated; peeking study).
    #[arg(long, value_delimiter = ',')]
    peeks: Vec<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Study {
    Peeking,
    Stopping,
    DeltaGrid,
    ErrorRates,
}

/// Layered option lookup: flag, then config file, then environment, then
/// default. The environment reader is injected so tests stay hermetic.
struct Settings {
    table: toml::Table,
    env: Box<dyn Fn(&str) -> Option<String>>,
}

const KNOWN_CONFIG_KEYS: [&str; 12] = [
    "alpha", "beta", "delta", "deltas", "epsilon", "format", "horizon", "output_dir", "peeks",
    "seed", "sims", "theta0",
];

impl Settings {
    fn load(path: Option<&Path>) -> std::result::Result<Self, Failure> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| usage(format!("config {}: {e}", p.display())))?
            }
        };
        if let Some(unknown) = table.keys().find(|k| !KNOWN_CONFIG_KEYS.contains(&k.as_str())) {
            return Err(usage(format!(
                "unknown config key `{unknown}` (known: {})",
                KNOWN_CONFIG_KEYS.join(", ")
            )));
        }
        Ok(Settings { table, env: Box::new(|key| std::env::var(key).ok()) })
    }

    fn env_value(&self, key: &str) -> Option<String> {
        (self.env)(&format!("{ENV_PREFIX}{}", key.to_uppercase()))
    }

    fn f64(&self, flag: Option<f64>, key: &str, default: f64) -> std::result::Result<f64, Failure> {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(v) = self.table.get(key) {
            return v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| usage(format!("config key `{key}` must be a number")));
        }
        if let Some(s) = self.env_value(key) {
            return s
                .parse()
                .map_err(|_| usage(format!("{ENV_PREFIX}{} must be a number, got `{s}`", key.to_uppercase())));
        }
        Ok(default)
    }

    fn u64(&self, flag: Option<u64>, key: &str, default: u64) -> std::result::Result<u64, Failure> {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(v) = self.table.get(key) {
            return v
                .as_integer()
                .and_then(|i| u64::try_from(i).ok())
                .ok_or_else(|| usage(format!("config key `{key}` must be a nonnegative integer")));
        }
        if let Some(s) = self.env_value(key) {
            return s.parse().map_err(|_| {
                usage(format!("{ENV_PREFIX}{} must be a nonnegative integer, got `{s}`", key.to_uppercase()))
            });
        }
        Ok(default)
    }

    fn format(&self, flag: Option<FormatArg>) -> std::result::Result<FormatArg, Failure> {
        if let Some(f) = flag {
            return Ok(f);
        }
        let from_str = |s: &str| match s {
            "csv" => Ok(FormatArg::Csv),
            "json" => Ok(FormatArg::Json),
            other => Err(usage(format!("format must be csv or json, got `{other}`"))),
        };
        if let Some(v) = self.table.get("format") {
            return from_str(v.as_str().ok_or_else(|| usage("config key `format` must be a string"))?);
        }
        if let Some(s) = self.env_value("format") {
            return from_str(&s);
        }
        Ok(FormatArg::Csv)
    }

    fn output_dir(&self, flag: Option<PathBuf>) -> std::result::Result<Option<PathBuf>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        if let Some(v) = self.table.get("output_dir") {
            let s = v.as_str().ok_or_else(|| usage("config key `output_dir` must be a string"))?;
            return Ok(Some(PathBuf::from(s)));
        }
        Ok(self.env_value("output_dir").map(PathBuf::from))
    }
}

/// One emitted table: schema-tagged CSV body plus a gnuplot hint.
struct Table {
    name: &'static str,
    csv: String,
    hint: &'static str,
}

struct Output {
    dir: Option<PathBuf>,
    format: FormatArg,
    hints: bool,
}

impl Output {
    /// Emits a command's tables (CSV mode) or its single JSON document.
    fn emit(
        &self,
        command: &'static str,
        tables: Vec<Table>,
        json: serde_json::Value,
    ) -> std::result::Result<(), Failure> {
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir).map_err(data)?;
        }
        match self.format {
            FormatArg::Csv => {
                let mut stdout_blocks = Vec::new();
                for t in &tables {
                    let content = format!(
                        "# schema: safetest.{}.v{OUTPUT_SCHEMA_VERSION}\n{}",
                        t.name, t.csv
                    );
                    match &self.dir {
                        Some(dir) => {
                            fs::write(dir.join(format!("{}.csv", t.name)), &content)
                                .map_err(data)?;
                        }
                        None => stdout_blocks.push(content),
                    }
                }
                if self.dir.is_none() {
                    let mut out = std::io::stdout().lock();
                    out.write_all(stdout_blocks.join("\n").as_bytes()).map_err(data)?;
                }
            }
            FormatArg::Json => {
                let doc = json!({
                    "schema": format!("safetest.{command}.v{OUTPUT_SCHEMA_VERSION}"),
                    "data": json,
                });
                let mut text = serde_json::to_string_pretty(&doc).map_err(data)?;
                text.push('\n');
                match &self.dir {
                    Some(dir) => {
                        fs::write(dir.join(format!("{command}.json")), text).map_err(data)?
                    }
                    None => {
                        let mut out = std::io::stdout().lock();
                        out.write_all(text.as_bytes()).map_err(data)?;
                    }
                }
            }
        }
        if self.hints {
            for t in &tables {
                eprintln!("# {}.csv: {}", t.name, t.hint);
            }
        }
        Ok(())
    }
}

fn execute(cli: Cli) -> std::result::Result<(), Failure> {
    if cli.version {
        println!(
            "{}",
            json!({
                "name": "safetest",
                "version": env!("CARGO_PKG_VERSION"),
                "output_schema_version": OUTPUT_SCHEMA_VERSION,
                "state_schema_version": STATE_SCHEMA_VERSION,
            })
        );
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(usage("missing subcommand; see --help"));
    };
    let settings = Settings::load(cli.common.config.as_deref())?;
    let output = Output {
        dir: settings.output_dir(cli.common.output_dir.clone())?,
        format: settings.format(cli.common.format)?,
        hints: cli.common.gnuplot_hints,
    };
    match command {
        Command::Design(args) => cmd_design(args, &settings, &output),
        Command::Analyze(args) => cmd_analyze(args, &settings, &output),
        Command::Srm(args) => cmd_srm(args, &settings, &output),
        Command::Simulate(args) => cmd_simulate(args, &settings, &output),
    }
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

#[derive(Serialize)]
struct DesignReport {
    test: &'static str,
    alpha: f64,
    beta: f64,
    delta: f64,
    /// Per-group batch size of the design.
    n_per_group: u64,
    /// Decision point: the classical n, or the simulated (1-beta) quantile
    /// of safe-t crossing times at true effect delta.
    horizon: u64,
    sims: u64,
    seed: u64,
}

fn cmd_design(
    args: DesignArgs,
    settings: &Settings,
    output: &Output,
) -> std::result::Result<(), Failure> {
    let alpha = settings.f64(args.alpha, "alpha", 0.05)?;
    let beta = settings.f64(args.beta, "beta", 0.2)?;
    let delta = settings.f64(args.delta, "delta", f64::NAN)?;
    if delta.is_nan() {
        return Err(usage("design requires --delta (or a config/env default)"));
    }
    let sims = settings.u64(args.sims, "sims", 500)?;
    let seed = settings.u64(args.seed, "seed", 1)?;
    let report = match args.test {
        DesignTest::ClassicalT => {
            let n = fixed_horizon_sample_size(alpha, beta, delta).map_err(usage)?;
            DesignReport { test: "classical_t", alpha, beta, delta, n_per_group: n, horizon: n, sims: 0, seed: 0 }
        }
        DesignTest::SafeT => {
            let config = SafeTConfig::new(delta, alpha).map_err(usage)?;
            if sims == 0 {
                return Err(usage("--sims must be >= 1"));
            }
            let n = design_batch_n(&config, DESIGN_CAP).map_err(data)?;
            let summary =
                power_stopping_simulation(&config, delta, beta, sims, seed).map_err(data)?;
            DesignReport {
                test: "safe_t",
                alpha,
                beta,
                delta,
                n_per_group: n,
                horizon: summary.power_quantile_stop,
                sims,
                seed,
            }
        }
    };
    let mut csv = String::from("test,alpha,beta,delta,n_per_group,horizon,sims,seed\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{}",
        report.test,
        report.alpha,
        report.beta,
        report.delta,
        report.n_per_group,
        report.horizon,
        report.sims,
        report.seed
    );
    let json = serde_json::to_value(&report).map_err(data)?;
    output.emit(
        "design",
        vec![Table {
            name: "design",
            csv,
            hint: "columns test,alpha,beta,delta,n_per_group,horizon,sims,seed; single row",
        }],
        json,
    )
}

#[derive(Serialize)]
struct AgreementRow {
    test_a: &'static str,
    test_b: &'static str,
    both_reject: u64,
    a_only_rejects: u64,
    b_only_rejects: u64,
    both_accept: u64,
    phi: f64,
}

fn cmd_analyze(
    args: AnalyzeArgs,
    settings: &Settings,
    output: &Output,
) -> std::result::Result<(), Failure> {
    let alpha = settings.f64(args.alpha, "alpha", 0.05)?;
    let delta = settings.f64(args.delta, "delta", 0.1)?;
    let config = ReplayConfig::new(alpha, delta).map_err(usage)?;
    let tests: Vec<TestKind> = if args.tests.is_empty() {
        vec![TestKind::SafeT, TestKind::Msprt, TestKind::ClassicalT]
    } else {
        args.tests.iter().map(|t| t.kind()).collect()
    };
    let records = parse_snapshots_path(&args.input).map_err(data)?;
    let series = partition_metrics(&records);
    let mut verdicts: Vec<Vec<ExperimentVerdict>> = Vec::with_capacity(series.len());
    for s in &series {
        verdicts.push(group_sequential_replay(s, &tests, &config).map_err(data)?);
    }

    if let Some(dir) = &args.state_dir {
        let store = StateStore::open(dir).map_err(data)?;
        for vs in &verdicts {
            for v in vs {
                if v.test != TestKind::SafeT {
                    continue;
                }
                let mut process = crate::eprocess::EProcess::new(alpha).map_err(data)?;
                if let Some(max) = v.max_log_e {
                    let e = crate::eprocess::EValue::from_log(max).map_err(data)?;
                    process.update(e, v.days_evaluated);
                }
                let state =
                    PersistedState::new(format!("{}:{}", v.experiment_id, v.metric_id), MonitorState::Process(process))
                        .with_cursor(v.last_day);
                store.save(&state).map_err(data)?;
            }
        }
    }

    let mut csv = String::from(
        "experiment_id,metric_id,test,decision,first_rejection_day,final_log_e,p_value,days_evaluated,days_skipped,last_day\n",
    );
    for v in verdicts.iter().flatten() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            v.experiment_id,
            v.metric_id,
            v.test.name(),
            if v.rejected { "reject" } else { "accept" },
            fmt_opt(v.first_rejection_day),
            fmt_opt(v.final_log_e),
            v.p_value,
            v.days_evaluated,
            v.days_skipped,
            v.last_day
        );
    }

    // Pairwise decision agreement across all replayed series.
    let mut agreement_rows = Vec::new();
    if !verdicts.is_empty() {
        for (i, &ta) in tests.iter().enumerate() {
            for &tb in &tests[i + 1..] {
                let a: Vec<bool> = verdicts
                    .iter()
                    .map(|vs| vs.iter().find(|v| v.test == ta).expect("verdict per test").rejected)
                    .collect();
                let b: Vec<bool> = verdicts
                    .iter()
                    .map(|vs| vs.iter().find(|v| v.test == tb).expect("verdict per test").rejected)
                    .collect();
                let m = AgreementMatrix::from_decisions(&a, &b).map_err(data)?;
                agreement_rows.push(AgreementRow {
                    test_a: ta.name(),
                    test_b: tb.name(),
                    both_reject: m.counts[1][1],
                    a_only_rejects: m.counts[1][0],
                    b_only_rejects: m.counts[0][1],
                    both_accept: m.counts[0][0],
                    phi: m.phi,
                });
            }
        }
    }
    let mut agreement_csv =
        String::from("test_a,test_b,both_reject,a_only_rejects,b_only_rejects,both_accept,phi\n");
    for r in &agreement_rows {
        let _ = writeln!(
            agreement_csv,
            "{},{},{},{},{},{},{}",
            r.test_a, r.test_b, r.both_reject, r.a_only_rejects, r.b_only_rejects, r.both_accept, r.phi
        );
    }

    let json = json!({
        "alpha": alpha,
        "delta": delta,
        "verdicts": verdicts.iter().flatten().collect::<Vec<_>>(),
        "agreement": agreement_rows,
    });
    output.emit(
        "analyze",
        vec![
            Table {
                name: "analyze",
                csv,
                hint: "one row per (experiment, metric, test); decision in column 4",
            },
            Table {
                name: "agreement",
                csv: agreement_csv,
                hint: "2x2 decision agreement per test pair with phi coefficient",
            },
        ],
        json,
    )
}

fn cmd_srm(
    args: SrmArgs,
    settings: &Settings,
    output: &Output,
) -> std::result::Result<(), Failure> {
    let theta0 = settings.f64(args.theta0, "theta0", 0.5)?;
    let epsilon = settings.f64(args.epsilon, "epsilon", 0.01)?;
    let alpha = settings.f64(args.alpha, "alpha", 0.01)?;
    let config = SrmConfig::new(theta0, epsilon, alpha).map_err(usage)?;
    let prior = config.prior().map_err(usage)?;
    let shape = if args.cumulative { AssignmentShape::Cumulative } else { AssignmentShape::Increments };
    let records = parse_assignments_path(&args.input, shape).map_err(data)?;
    if records.is_empty() {
        return Err(data("no assignment records in input"));
    }

    let store = match &args.state_dir {
        Some(dir) => Some(StateStore::open(dir).map_err(data)?),
        None => None,
    };

    // Records arrive sorted by (experiment, day): replay each run.
    let mut reports: Vec<SrmReplayReport> = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].experiment_id != records[start].experiment_id {
            let group: &[AssignmentRecord] = &records[start..i];
            let report = match &store {
                None => srm_replay(group, &config).map_err(data)?,
                Some(store) => {
                    match store.load(&group[0].experiment_id) {
                        Ok(saved) => {
                            let MonitorState::Srm(monitor) = saved.state else {
                                return Err(data(format!(
                                    "state for {} is not an SRM monitor",
                                    group[0].experiment_id
                                )));
                            };
                            if monitor.config() != &config {
                                return Err(usage(format!(
                                    "saved SRM config for {} differs from the requested one",
                                    group[0].experiment_id
                                )));
                            }
                            srm_replay_resume(group, monitor, saved.cursor_day).map_err(data)?
                        }
                        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
                            srm_replay(group, &config).map_err(data)?
                        }
                        Err(e) => return Err(data(e)),
                    }
                }
            };
            if let Some(store) = &store {
                let state = PersistedState::new(
                    group[0].experiment_id.clone(),
                    MonitorState::Srm(report.monitor.clone()),
                )
                .with_cursor(report.safe.last_day);
                store.save(&state).map_err(data)?;
            }
            reports.push(report);
            start = i;
        }
    }

    let config_line = format!(
        "# config: theta0={} epsilon={} alpha={} prior=Beta({}, {})\n",
        theta0, epsilon, alpha, prior.alpha1, prior.beta1
    );
    let mut csv = config_line.clone();
    csv.push_str("experiment_id,test,decision,detection_day,log_e,p_value,n_control,n_treatment,days\n");
    for r in &reports {
        for v in [&r.safe, &r.chi2] {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                v.experiment_id,
                v.test.name(),
                if v.rejected { "reject" } else { "accept" },
                fmt_opt(v.first_rejection_day),
                fmt_opt(v.final_log_e),
                v.p_value,
                r.n_control,
                r.n_treatment,
                r.days.len()
            );
        }
    }

    let mut day_csv = config_line;
    day_csv.push_str("experiment_id,day,n_control,n_treatment,cum_control,cum_treatment,diff,log_e\n");
    for r in &reports {
        for d in &r.days {
            let _ = writeln!(
                day_csv,
                "{},{},{},{},{},{},{},{}",
                r.safe.experiment_id,
                d.day,
                d.n_control,
                d.n_treatment,
                d.cum_control,
                d.cum_treatment,
                d.cum_treatment as i64 - d.cum_control as i64,
                d.log_e
            );
        }
    }

    let json = json!({
        "theta0": theta0,
        "epsilon": epsilon,
        "alpha": alpha,
        "prior": { "alpha1": prior.alpha1, "beta1": prior.beta1 },
        "experiments": reports.iter().map(|r| json!({
            "safe": r.safe,
            "chi2": r.chi2,
            "n_control": r.n_control,
            "n_treatment": r.n_treatment,
            "days": r.days,
        })).collect::<Vec<_>>(),
    });
    output.emit(
        "srm",
        vec![
            Table {
                name: "srm",
                csv,
                hint: "safe monitor and final-day chi2 verdicts per experiment",
            },
            Table {
                name: "srm_days",
                csv: day_csv,
                hint: "per-day counts; diff = cum_treatment - cum_control; log_e is the running evidence",
            },
        ],
        json,
    )
}

fn cmd_simulate(
    args: SimulateArgs,
    settings: &Settings,
    output: &Output,
) -> std::result::Result<(), Failure> {
    let alpha = settings.f64(args.alpha, "alpha", 0.05)?;
    let beta = settings.f64(args.beta, "beta", 0.2)?;
    let seed = settings.u64(args.seed, "seed", 1)?;
    match args.study {
        Study::Peeking => {
            let sims = settings.u64(args.sims, "sims", 2000)?;
            let horizon = settings.u64(args.horizon, "horizon", 1000)?;
            let delta = settings.f64(args.delta, "delta", 0.1)?;
            let peeks = if args.peeks.is_empty() { vec![1, 5, 20, 100] } else { args.peeks.clone() };
            if peeks.iter().any(|&k| k == 0) {
                return Err(usage("--peeks entries must be >= 1"));
            }
            let mut curves = Vec::new();
            for kind in [TestKind::ClassicalT, TestKind::SafeT, TestKind::Msprt] {
                let spec = SimulationSpec {
                    test_kind: kind,
                    alpha,
                    beta,
                    effect: 0.0,
                    n_sims: sims,
                    seed,
                    horizon_policy: HorizonPolicy::Fixed { n: horizon },
                    peek_schedule: Some(peeks.clone()),
                    design_effect: Some(delta),
                };
                curves.push(peeking_fp_curve(&spec).map_err(usage)?);
            }
            let csv = peeking_csv(&curves).map_err(data)?;
            let json = json!({ "curves": curves });
            output.emit(
                "peeking",
                vec![Table {
                    name: "peeking",
                    csv,
                    hint: "false-positive rate vs peek count per test; plot using 5:6",
                }],
                json,
            )
        }
        Study::Stopping => {
            let sims = settings.u64(args.sims, "sims", 500)?;
            let delta = settings.f64(args.delta, "delta", 0.1)?;
            let config = SafeTConfig::new(delta, alpha).map_err(usage)?;
            if sims == 0 {
                return Err(usage("--sims must be >= 1"));
            }
            let summary =
                power_stopping_simulation(&config, delta, beta, sims, seed).map_err(data)?;
            let mut csv = String::from(
                "delta,alpha,beta,n_sims,seed,reject_fraction,mean_stop,mean_stop_reject,mean_stop_accept,horizon\n",
            );
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                delta,
                alpha,
                beta,
                summary.n_sims,
                seed,
                summary.reject_fraction,
                summary.mean_stop,
                fmt_opt(summary.mean_stop_reject),
                fmt_opt(summary.mean_stop_accept),
                summary.power_quantile_stop
            );
            let hist_csv = histogram_csv(&summary);
            let json = json!({
                "delta": delta, "alpha": alpha, "beta": beta, "seed": seed,
                "summary": summary,
            });
            output.emit(
                "stopping",
                vec![
                    Table {
                        name: "stopping",
                        csv,
                        hint: "safe-t stopping summary at the true effect; single row",
                    },
                    Table {
                        name: "stopping_hist",
                        csv: hist_csv,
                        hint: "stopping-time histogram; plot bin_lo:count with boxes",
                    },
                ],
                json,
            )
        }
        Study::DeltaGrid => {
            let sims = settings.u64(args.sims, "sims", 200)?;
            let deltas = if args.deltas.is_empty() {
                vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
            } else {
                args.deltas.clone()
            };
            let tests = [TestKind::ClassicalT, TestKind::SafeT, TestKind::Msprt];
            let study =
                delta_grid_study(&deltas, &tests, alpha, beta, sims, seed).map_err(usage)?;
            let mut csv_bytes = Vec::new();
            study.to_csv(&mut csv_bytes).map_err(data)?;
            let csv = String::from_utf8(csv_bytes).map_err(data)?;
            let json = serde_json::to_value(&study).map_err(data)?;
            output.emit(
                "delta_grid",
                vec![Table {
                    name: "delta_grid",
                    csv,
                    hint: "stopping-time ratios vs classical n per delta and test",
                }],
                json,
            )
        }
        Study::ErrorRates => {
            let sims = settings.u64(args.sims, "sims", 500)?;
            let delta = settings.f64(args.delta, "delta", 0.1)?;
            let spec = |kind| SimulationSpec {
                test_kind: kind,
                alpha,
                beta,
                effect: delta,
                n_sims: sims,
                seed,
                horizon_policy: HorizonPolicy::ClassicalN,
                peek_schedule: None,
                design_effect: Some(delta),
            };
            let study = error_rate_study(&spec(TestKind::ClassicalT), &spec(TestKind::SafeT))
                .map_err(usage)?;
            let mut csv_bytes = Vec::new();
            study.to_csv(&mut csv_bytes).map_err(data)?;
            let csv = String::from_utf8(csv_bytes).map_err(data)?;
            let mut agreement_csv = String::from(
                "condition,both_reject,a_only_rejects,b_only_rejects,both_accept,phi\n",
            );
            for (cond, m) in [("null", &study.null_agreement), ("alternative", &study.alt_agreement)]
            {
                let _ = writeln!(
                    agreement_csv,
                    "{},{},{},{},{},{}",
                    cond, m.counts[1][1], m.counts[1][0], m.counts[0][1], m.counts[0][0], m.phi
                );
            }
            let json = serde_json::to_value(&study).map_err(data)?;
            output.emit(
                "error_rates",
                vec![
                    Table {
                        name: "error_rates",
                        csv,
                        hint: "type I/II per rule (classical_t, safe_t, either_rejects)",
                    },
                    Table {
                        name: "error_rates_agreement",
                        csv: agreement_csv,
                        hint: "decision agreement under the null and the alternative",
                    },
                ],
                json,
            )
        }
    }
}

fn peeking_csv(curves: &[PeekingCurve]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["test", "alpha", "n_sims", "horizon", "peeks", "fp_rate"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.test_kind.name().to_string(),
                format!("{}", c.alpha),
                format!("{}", c.n_sims),
                format!("{}", c.horizon),
                format!("{}", p.peeks),
                format!("{}", p.fp_rate),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn histogram_csv(summary: &StoppingSummary) -> String {
    let mut csv = String::from("bin_lo,bin_hi,count\n");
    let h = &summary.histogram;
    for (i, &count) in h.counts.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", h.edges[i], h.edges[i + 1], count);
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings_with(toml_text: &str, env: Vec<(&'static str, &'static str)>) -> Settings {
        Settings {
            table: toml_text.parse().unwrap(),
            env: Box::new(move |key| {
                env.iter().find(|(k, _)| *k == key).map(|(_, v)| v.to_string())
            }),
        }
    }

    #[test]
    fn settings_precedence_is_flag_config_env_default() {
        let s = settings_with("alpha = 0.01\n", vec![("SAFETEST_ALPHA", "0.2"), ("SAFETEST_BETA", "0.3")]);
        // Flag wins over everything.
        assert_eq!(s.f64(Some(0.07), "alpha", 0.05).unwrap(), 0.07);
        // Config wins over env.
        assert_eq!(s.f64(None, "alpha", 0.05).unwrap(), 0.01);
        // Env wins over default.
        assert_eq!(s.f64(None, "beta", 0.2).unwrap(), 0.3);
        // Default last.
        assert_eq!(s.f64(None, "delta", 0.1).unwrap(), 0.1);
        // Integers promote from TOML integer values.
        let s = settings_with("seed = 9\n", vec![]);
        assert_eq!(s.u64(None, "seed", 1).unwrap(), 9);
        assert_eq!(s.f64(None, "seed", 0.0).unwrap(), 9.0);
    }

    #[test]
    fn settings_reject_malformed_values() {
        let s = settings_with("alpha = \"high\"\n", vec![("SAFETEST_SIMS", "many")]);
        assert!(matches!(s.f64(None, "alpha", 0.05), Err(Failure::Usage(_))));
        assert!(matches!(s.u64(None, "sims", 10), Err(Failure::Usage(_))));
        let s = settings_with("", vec![("SAFETEST_FORMAT", "yaml")]);
        assert!(matches!(s.format(None), Err(Failure::Usage(_))));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "alhpa = 0.05\n").unwrap();
        assert!(matches!(Settings::load(Some(&path)), Err(Failure::Usage(_))));
        std::fs::write(&path, "alpha = 0.05\nseed = 3\n").unwrap();
        assert!(Settings::load(Some(&path)).is_ok());
    }

    #[test]
    fn run_reports_usage_errors_with_exit_2() {
        assert_eq!(run(["safetest", "design", "--test", "bogus"]), 2);
        assert_eq!(run(["safetest", "nonsense"]), 2);
        assert_eq!(run(["safetest", "design", "--test", "safe-t", "--delta", "0"]), 2);
        assert_eq!(run(["safetest", "design", "--test", "classical-t"]), 2);
        assert_eq!(run(["safetest", "--help"]), 0);
    }
}
