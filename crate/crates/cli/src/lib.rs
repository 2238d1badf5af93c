//! Command implementations behind the `mmse-lab` binary. Every command
//! returns its process exit code and writes to caller-supplied streams.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmse_lab::lab::{
    builtin_scenarios, find_scenario, make_grid, run_scenario, ConvergenceReport, DiagnosticsBundle, ExpectedOutcome,
    GridSpacing, LimitRow, Metric, OutcomeKind, ScenarioSequence,
};
use mmse_lab::selftest::{run_selftest, Fault, SelftestOptions};
use mmse_lab::Error;
use rayon::prelude::*;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ENGINE: i32 = 3;

pub const CSV_HEADER: [&str; 8] =
    ["scenario", "n", "mmse", "std_err", "second_moment_x", "second_moment_y", "limit_mmse", "verdict"];

#[derive(Debug, Parser)]
#[command(name = "mmse-lab", version, about = "MMSE continuity scenarios, engine self-tests and reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List registered scenarios, optionally filtered by a name substring.
    List { filter: Option<String> },
    /// Run scenarios and write one report file per scenario.
    Run(RunArgs),
    /// Run the randomized engine invariant suites.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    Geometric,
}

impl From<Spacing> for GridSpacing {
    fn from(s: Spacing) -> Self {
        match s {
            Spacing::Linear => GridSpacing::Linear,
            Spacing::Geometric => GridSpacing::Geometric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario names; `all` selects the whole registry.
    #[arg(value_name = "SCENARIO")]
    pub names: Vec<String>,
    /// Comma-separated scenario names (added to the positional ones).
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Vec<String>,
    /// First index of the grid (default 1 when any grid flag is given).
    #[arg(long)]
    pub n_start: Option<u64>,
    /// Last index of the grid (default 64 when any grid flag is given).
    #[arg(long)]
    pub n_stop: Option<u64>,
    /// Grid spacing (default geometric when any grid flag is given).
    #[arg(long, value_enum)]
    pub n_spacing: Option<Spacing>,
    #[arg(long, env = "MMSE_LAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, env = "MMSE_LAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Corrupt the engine on purpose (negative control).
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    Orthogonality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub start: u64,
    pub stop: u64,
    pub spacing: GridSpacing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario_names: Vec<String>,
    /// `None` uses each scenario's own default grid.
    pub grid: Option<GridSpec>,
    pub seed: u64,
    pub tol_abs: f64,
    pub output_dir: PathBuf,
    pub format: Format,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Self {
        let grid = (args.n_start.is_some() || args.n_stop.is_some() || args.n_spacing.is_some()).then(|| GridSpec {
            start: args.n_start.unwrap_or(1),
            stop: args.n_stop.unwrap_or(64),
            spacing: args.n_spacing.unwrap_or(Spacing::Geometric).into(),
        });
        let mut scenario_names = args.names.clone();
        scenario_names.extend(args.scenarios.iter().filter(|s| !s.is_empty()).cloned());
        Self {
            scenario_names,
            grid,
            seed: args.seed,
            tol_abs: args.tol,
            output_dir: args.out.clone(),
            format: args.format,
            jobs: args.jobs,
        }
    }
}

pub fn main_with(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cli.command {
        Command::List { filter } => cmd_list(filter.as_deref(), out),
        Command::Run(args) => cmd_run(&RunConfig::from_args(&args), out, err),
        Command::Selftest(args) => {
            let fault = args.inject_fault.map(|FaultArg::Orthogonality| Fault::BrokenOrthogonality);
            cmd_selftest(args.seed, fault, out)
        }
    }
}

fn expected_summary(e: &ExpectedOutcome) -> String {
    format!("{} (limit {}, sequence {})", e.kind, e.limit_mmse, e.sequence_limit_mmse)
}

pub fn cmd_list(filter: Option<&str>, out: &mut dyn Write) -> i32 {
    let rows: Vec<ScenarioSequence> =
        builtin_scenarios().into_iter().filter(|s| filter.is_none_or(|f| s.name().contains(f))).collect();
    let summaries: Vec<String> = rows.iter().map(|s| expected_summary(s.expected())).collect();
    let width = rows.iter().map(|s| s.name().len()).max().unwrap_or(0).max("scenario".len());
    let ew = summaries.iter().map(|s| s.chars().count()).max().unwrap_or(0).max("expected".len());
    let mut text = format!("{:<width$}  {:<ew$}  {}\n", "scenario", "expected", "basis");
    for (s, summary) in rows.iter().zip(&summaries) {
        text.push_str(&format!("{:<width$}  {:<ew$}  {}\n", s.name(), summary, s.expected().source));
    }
    match out.write_all(text.as_bytes()) {
        Ok(()) => EXIT_OK,
        Err(_) => EXIT_ENGINE,
    }
}

#[derive(Serialize)]
struct JsonRow {
    n: u64,
    mmse: f64,
    std_err: f64,
    second_moment_x: f64,
    second_moment_y: f64,
    limit_mmse: f64,
}

#[derive(Serialize)]
struct JsonVerdict<'a> {
    matches_expected: bool,
    metric: Metric,
    expected: &'a ExpectedOutcome,
    observed_kind: OutcomeKind,
    limit: &'a LimitRow,
    tail_window: usize,
    tail_mean: f64,
    tail_max: f64,
    tol_abs: f64,
    seed: u64,
    mismatches: &'a [String],
}

#[derive(Serialize)]
struct JsonReport<'a> {
    scenario: &'a str,
    rows: Vec<JsonRow>,
    diagnostics: &'a DiagnosticsBundle,
    verdict: JsonVerdict<'a>,
}

fn verdict_label(report: &ConvergenceReport) -> &'static str {
    if report.verdict {
        "match"
    } else {
        "mismatch"
    }
}

/// CSV rendering of a report; floats use the shortest round-trip form.
pub fn report_csv(report: &ConvergenceReport) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            report.scenario.clone(),
            r.n.to_string(),
            r.mmse.to_string(),
            r.std_err.to_string(),
            r.second_moment_x.to_string(),
            r.second_moment_y.to_string(),
            report.limit.mmse.to_string(),
            verdict_label(report).to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn report_json(report: &ConvergenceReport) -> serde_json::Result<Vec<u8>> {
    let doc = JsonReport {
        scenario: &report.scenario,
        rows: report
            .rows
            .iter()
            .map(|r| JsonRow {
                n: r.n,
                mmse: r.mmse,
                std_err: r.std_err,
                second_moment_x: r.second_moment_x,
                second_moment_y: r.second_moment_y,
                limit_mmse: report.limit.mmse,
            })
            .collect(),
        diagnostics: &report.diagnostics,
        verdict: JsonVerdict {
            matches_expected: report.verdict,
            metric: report.metric,
            expected: &report.expected,
            observed_kind: report.observed_kind,
            limit: &report.limit,
            tail_window: report.tail_window,
            tail_mean: report.tail_mean,
            tail_max: report.tail_max,
            tol_abs: report.tol_abs,
            seed: report.seed,
            mismatches: &report.mismatches,
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn resolve(names: &[String]) -> Result<Vec<ScenarioSequence>, Error> {
    let mut out: Vec<ScenarioSequence> = Vec::new();
    for name in names {
        let picked = if name == "all" { builtin_scenarios() } else { vec![find_scenario(name)?] };
        for s in picked {
            if !out.iter().any(|o| o.name() == s.name()) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn write_report(dir: &Path, report: &ConvergenceReport, format: Format) -> Result<PathBuf, String> {
    let path = dir.join(format!("{}.{}", report.scenario, format.extension()));
    let bytes = match format {
        Format::Csv => report_csv(report).map_err(|e| e.to_string()),
        Format::Json => report_json(report).map_err(|e| e.to_string()),
    }
    .map_err(|e| format!("cannot render {}: {e}", path.display()))?;
    fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(path)
}

pub fn cmd_run(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    macro_rules! usage {
        ($($t:tt)*) => {{
            let _ = writeln!(err, "error: {}", format!($($t)*));
            let _ = writeln!(err, "usage: mmse-lab run <SCENARIO>... [--scenarios a,b] [--n-start N] [--n-stop N] [--n-spacing linear|geometric] [--seed S] [--tol T] [--out DIR] [--format csv|json] [--jobs J]");
            return EXIT_USAGE;
        }};
    }
    if config.scenario_names.is_empty() {
        usage!("no scenarios given");
    }
    if config.tol_abs <= 0.0 || !config.tol_abs.is_finite() {
        usage!("--tol must be positive and finite, got {}", config.tol_abs);
    }
    if config.jobs == Some(0) {
        usage!("--jobs must be at least 1");
    }
    let grid = match config.grid.map(|g| make_grid(g.start, g.stop, g.spacing)).transpose() {
        Ok(g) => g,
        Err(e) => usage!("{e}"),
    };
    let scenarios = match resolve(&config.scenario_names) {
        Ok(s) => s,
        Err(e) => usage!("{e}; see `mmse-lab list`"),
    };
    if let Err(e) = fs::create_dir_all(&config.output_dir) {
        usage!("cannot create output directory {}: {e}", config.output_dir.display());
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = config.jobs {
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_ENGINE;
        }
    };
    let results: Vec<Result<ConvergenceReport, Error>> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| {
                let g = grid.as_deref().unwrap_or(s.default_grid());
                run_scenario(s, g, config.tol_abs, config.seed)
            })
            .collect()
    });

    let mut code = EXIT_OK;
    let mut mismatched = Vec::new();
    for (s, result) in scenarios.iter().zip(results) {
        match result {
            Ok(report) => {
                match write_report(&config.output_dir, &report, config.format) {
                    Ok(path) => {
                        let _ = writeln!(
                            out,
                            "{}: {} (observed {}, expected {}) -> {}",
                            report.scenario,
                            verdict_label(&report),
                            report.observed_kind,
                            report.expected.kind,
                            path.display()
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(err, "error: {e}");
                        code = code.max(EXIT_USAGE);
                    }
                }
                if !report.verdict {
                    mismatched.push(report);
                }
            }
            Err(e) => {
                let _ = writeln!(err, "engine error in {}: {e}", s.name());
                code = EXIT_ENGINE;
            }
        }
    }
    if !mismatched.is_empty() {
        for r in &mismatched {
            let _ = writeln!(err, "mismatch: {}", r.scenario);
            for m in &r.mismatches {
                let _ = writeln!(err, "    {m}");
            }
        }
        if code == EXIT_OK {
            code = EXIT_MISMATCH;
        }
    }
    code
}

pub fn cmd_selftest(seed: u64, fault: Option<Fault>, out: &mut dyn Write) -> i32 {
    let report = run_selftest(SelftestOptions { seed, fault });
    if writeln!(out, "{report}").is_err() {
        return EXIT_ENGINE;
    }
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_MISMATCH
    }
}
