//! Command-line interface.
//!
//! Exit codes: 0 success, 1 bad flags, 2 scenario errors, 3 advisor
//! configuration errors, 4 failed experiment (tolerance miss, errored grid
//! cell, unwritable output).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::advisor::AdvisorError;
use crate::detector::DetectorConfig;
use crate::driver::{write_summary_csv, CampaignConfig, Mode};
use crate::error::Error;
use crate::escape::EscapeConfig;
use crate::harness::experiments::{
    self, AdvisorSpec, CellError, ComparisonSummary, ExperimentSpec,
};
use crate::harness::plot::coverage_svg;
use crate::memory::MemoryConfig;
use crate::sim::{generate, load_scenario, motivating, AppModel, GeneratorParams};

#[derive(Debug, Parser)]
#[command(
    name = "tarpit-escape",
    version,
    about = "Hybrid random/advisor GUI exploration on simulated apps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one campaign and write its report.
    Run(RunArgs),
    /// Recompute the podcast example's trap and bug probabilities.
    Reproduce(ReproduceArgs),
    /// Run a mode x seed grid and summarize it.
    Compare(CompareArgs),
    /// Write a generated benchmark scenario.
    Generate(GenerateArgs),
    /// Write the built-in podcast example scenario.
    Example(ExampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AdvisorKind {
    Oracle,
    Scripted,
    Http,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    Hybrid,
    RandomOnly,
    NoReuse,
    NoLlm,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Hybrid => Mode::Hybrid,
            ModeArg::RandomOnly => Mode::RandomOnly,
            ModeArg::NoReuse => Mode::NoReuse,
            ModeArg::NoLlm => Mode::NoLlm,
        }
    }
}

#[derive(Debug, Args)]
struct AdvisorArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    advisor: AdvisorKind,
    /// Probability that the oracle answers a random id.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Canned response for the scripted advisor (repeatable, used in order).
    #[arg(long = "script")]
    script: Vec<String>,
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long, default_value = "gpt-4o")]
    llm_model: String,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    llm_timeout: f64,
    /// Cassette file: replayed by `replay`, recorded by `http`.
    #[arg(long)]
    cassette: Option<PathBuf>,
}

impl AdvisorArgs {
    fn spec(&self) -> Result<AdvisorSpec, CliError> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(CliError::Usage(format!(
                "--noise {} outside [0, 1]",
                self.noise
            )));
        }
        Ok(match self.advisor {
            AdvisorKind::Oracle => AdvisorSpec::Oracle { noise: self.noise },
            AdvisorKind::Scripted => {
                if self.script.is_empty() {
                    return Err(CliError::Advisor(
                        "the scripted advisor needs at least one --script".into(),
                    ));
                }
                AdvisorSpec::Scripted {
                    responses: self.script.clone(),
                }
            }
            AdvisorKind::Http => AdvisorSpec::Http {
                endpoint: self.llm_endpoint.clone().ok_or_else(|| {
                    CliError::Advisor("--advisor http requires --llm-endpoint".into())
                })?,
                model: self.llm_model.clone(),
                timeout_secs: self.llm_timeout,
                cassette: self.cassette.as_ref().map(|p| p.display().to_string()),
            },
            AdvisorKind::Replay => AdvisorSpec::Replay {
                cassette: self
                    .cassette
                    .as_ref()
                    .ok_or_else(|| {
                        CliError::Advisor("--advisor replay requires --cassette".into())
                    })?
                    .display()
                    .to_string(),
            },
        })
    }
}

#[derive(Debug, Args)]
struct EngineArgs {
    /// Detection window length in states.
    #[arg(long, default_value_t = 8)]
    window: usize,
    /// Screenshot similarity threshold for detection.
    #[arg(long, default_value_t = 0.95)]
    theta: f64,
    /// Similarity threshold for memory lookup.
    #[arg(long, default_value_t = 0.99)]
    theta_mem: f64,
    /// Probability of reusing a remembered escape.
    #[arg(long, default_value_t = 0.8)]
    p_reuse: f64,
    #[arg(long, default_value_t = 10)]
    max_retry: usize,
}

impl EngineArgs {
    fn config(&self, mode: Mode, seed: u64, budget: usize) -> Result<CampaignConfig, CliError> {
        let usage = |e: Error| CliError::Usage(e.to_string());
        Ok(CampaignConfig {
            detector: DetectorConfig::new(self.window, self.theta).map_err(usage)?,
            memory: MemoryConfig::new(self.theta_mem, self.p_reuse).map_err(usage)?,
            escape: EscapeConfig::new(self.max_retry).map_err(usage)?,
            ..CampaignConfig::new(mode, seed, budget)
        })
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "generate")]
    scenario: Option<PathBuf>,
    /// Generated app, e.g. `screens=20,tarpit-factor=0.9,seed=1`.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long, value_enum, default_value = "hybrid")]
    mode: ModeArg,
    #[command(flatten)]
    advisor: AdvisorArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Event budget.
    #[arg(long, default_value_t = 5000)]
    budget: usize,
    /// Optional wall-clock limit in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Also write the tarpit memory to memory.json.
    #[arg(long)]
    export_memory: bool,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Trials for the trap-probability estimate.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Trials for the bug-probability estimate.
    #[arg(long, default_value_t = 1_000_000)]
    bug_trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the results as JSON to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Scenario JSON files (repeatable).
    #[arg(long)]
    scenario: Vec<PathBuf>,
    /// Generated apps, e.g. `screens=30,tarpit-factor=0.85,seed=1`.
    #[arg(long)]
    generate: Option<String>,
    /// Number of generated apps (seeds counted up from the generator seed).
    #[arg(long, default_value_t = 1)]
    apps: usize,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "hybrid,no_reuse,no_llm"
    )]
    modes: Vec<ModeArg>,
    /// Campaign seeds 0..N per app and mode.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 5000)]
    budget: usize,
    #[command(flatten)]
    advisor: AdvisorArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Worker threads (default: logical CPUs).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    screens: usize,
    #[arg(long, default_value_t = 0.85)]
    tarpit_factor: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of crash transitions (default: screens / 5).
    #[arg(long)]
    crashes: Option<usize>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExampleArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Scenario(String),
    Advisor(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Scenario(_) => 2,
            CliError::Advisor(_) => 3,
            CliError::Failed(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Scenario(m)
            | CliError::Advisor(m)
            | CliError::Failed(m) => m,
        }
    }
}

impl From<AdvisorError> for CliError {
    fn from(e: AdvisorError) -> Self {
        CliError::Advisor(e.to_string())
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Failed(format!("cannot write {}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| output_error(path, e))
}

/// Parses `key=value` pairs for the generator.
fn parse_generate(text: &str) -> Result<GeneratorParams, CliError> {
    let mut params = GeneratorParams::new(0, 0.85, 0);
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--generate expects key=value pairs, got {part:?}"))
        })?;
        let bad = |_| CliError::Usage(format!("bad value for {key}: {value:?}"));
        match key.trim().replace('_', "-").as_str() {
            "screens" => {
                params.screens = value
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
            }
            "tarpit-factor" => {
                params.tarpit_factor = value
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
            }
            "seed" => {
                params.seed = value
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
            }
            "crashes" => {
                params.crashes = Some(
                    value
                        .trim()
                        .parse()
                        .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                )
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown generator parameter {other:?}"
                )))
            }
        }
    }
    Ok(params)
}

fn generated_model(params: &GeneratorParams) -> Result<AppModel, CliError> {
    let scenario = generate::generate(params).map_err(|e| CliError::Usage(e.to_string()))?;
    AppModel::from_scenario(scenario).map_err(|e| CliError::Scenario(e.to_string()))
}

fn load_app(scenario: Option<&Path>, generate: Option<&str>) -> Result<AppModel, CliError> {
    match (scenario, generate) {
        (Some(path), _) => load_scenario(path).map_err(|e| CliError::Scenario(e.to_string())),
        (None, Some(g)) => generated_model(&parse_generate(g)?),
        (None, None) => Err(CliError::Usage(
            "one of --scenario or --generate is required".into(),
        )),
    }
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(
        || crate::driver::NOT_APPLICABLE.to_string(),
        |x| format!("{x:.4}"),
    )
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let advisor = args.advisor.spec()?;
    let model = Arc::new(load_app(
        args.scenario.as_deref(),
        args.generate.as_deref(),
    )?);
    let mut cfg = args
        .engine
        .config(args.mode.into(), args.seed, args.budget)?;
    if let Some(secs) = args.time_budget {
        if !(secs.is_finite() && secs > 0.0) {
            return Err(CliError::Usage(format!(
                "--time-budget {secs} must be positive"
            )));
        }
        cfg.time_budget = Some(Duration::from_secs_f64(secs));
    }
    let (report, metrics) =
        experiments::run_single(&model, &cfg, &advisor).map_err(|e| match e {
            CellError::Advisor(a) => CliError::from(a),
            CellError::Engine(e) => CliError::Failed(e.to_string()),
        })?;

    fs::create_dir_all(&args.out_dir).map_err(|e| output_error(&args.out_dir, e))?;
    let report_path = args.out_dir.join("report.json");
    write_file(
        &report_path,
        report
            .to_json()
            .map_err(|e| CliError::Failed(e.to_string()))?
            .as_bytes(),
    )?;
    let mut trace = Vec::new();
    report
        .write_trace_csv(&mut trace)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    write_file(&args.out_dir.join("trace.csv"), &trace)?;
    let mut summary = Vec::new();
    write_summary_csv(std::slice::from_ref(&metrics), &mut summary)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    write_file(&args.out_dir.join("summary.csv"), &summary)?;
    let title = format!("{} ({}, seed {})", report.app, report.mode, report.seed);
    write_file(
        &args.out_dir.join("curves.svg"),
        coverage_svg(&[&report], &title).as_bytes(),
    )?;
    if args.export_memory {
        let json = report
            .memory
            .to_json()
            .map_err(|e| CliError::Failed(e.to_string()))?;
        write_file(
            &args.out_dir.join("memory.json"),
            format!("{json}\n").as_bytes(),
        )?;
    }

    let _ = writeln!(out, "app                {}", report.app);
    let _ = writeln!(out, "mode               {}", report.mode);
    let _ = writeln!(out, "seed               {}", report.seed);
    let _ = writeln!(out, "events             {}", metrics.events);
    let _ = writeln!(
        out,
        "unique screens     {} / {} ({:.1}%)",
        metrics.unique_screens,
        model.screens().len(),
        100.0 * metrics.screen_coverage
    );
    let _ = writeln!(out, "unique crashes     {}", metrics.unique_crashes);
    let _ = writeln!(
        out,
        "first crash after  {}",
        metrics
            .events_to_first_crash
            .map_or_else(|| "-".to_string(), |n| format!("{n} events"))
    );
    let _ = writeln!(
        out,
        "tarpit episodes    {} (escaped {})",
        metrics.episodes, metrics.escaped
    );
    let _ = writeln!(out, "ESR                {}", fmt_rate(metrics.esr));
    let _ = writeln!(out, "FAER               {}", fmt_rate(metrics.faer));
    let _ = writeln!(out, "TDP                {}", fmt_rate(metrics.tdp));
    let _ = writeln!(
        out,
        "time in tarpit     {}",
        fmt_rate(metrics.time_in_tarpit)
    );
    let _ = writeln!(out, "advisor queries    {}", metrics.advisor_queries);
    let _ = writeln!(out, "report             {}", report_path.display());
    Ok(())
}

fn cmd_reproduce(args: ReproduceArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.trials == 0 || args.bug_trials == 0 {
        return Err(CliError::Usage("trial counts must be positive".into()));
    }
    let r = experiments::reproduce(args.trials, args.bug_trials, args.seed);
    let a = r.analytic;
    let _ = writeln!(out, "page b widget events      {}", a.events_b);
    let _ = writeln!(out, "page c widget events      {}", a.events_c);
    let _ = writeln!(
        out,
        "p (stay on b)             {}/{} = {:.4}",
        a.events_b - a.exits_b,
        a.events_b,
        a.p_stay
    );
    let _ = writeln!(out, "p^8 (trapped, analytic)   {:.4}", a.p_trapped);
    let _ = writeln!(out, "p_b (bug, analytic)       {:.3e}", a.p_bug);
    let _ = writeln!(
        out,
        "trapped (Monte Carlo)     {:.4} [{:.4}, {:.4}] over {} trials  tolerance +/-{:.2}  {}",
        r.trapped.value,
        r.trapped.ci_low,
        r.trapped.ci_high,
        r.trapped.trials,
        r.trapped_tolerance,
        if r.trapped_ok() { "PASS" } else { "FAIL" }
    );
    let _ = writeln!(
        out,
        "bug (Monte Carlo)         {:.3e} [{:.3e}, {:.3e}] over {} trials ({} hits)  {}",
        r.bug.value,
        r.bug.ci_low,
        r.bug.ci_high,
        r.bug.trials,
        r.bug.hits,
        if r.bug_ok() { "PASS" } else { "FAIL" }
    );
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&r).expect("reproduction serializes");
        write_file(path, format!("{json}\n").as_bytes())?;
    }
    if r.trapped_ok() && r.bug_ok() {
        Ok(())
    } else {
        Err(CliError::Failed(
            "Monte-Carlo estimate outside tolerance".into(),
        ))
    }
}

fn cmd_compare(args: CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let advisor = args.advisor.spec()?;
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let mut apps = Vec::new();
    for path in &args.scenario {
        apps.push(Arc::new(
            load_scenario(path).map_err(|e| CliError::Scenario(e.to_string()))?,
        ));
    }
    if let Some(g) = &args.generate {
        let base = parse_generate(g)?;
        for i in 0..args.apps as u64 {
            let params = GeneratorParams {
                seed: base.seed + i,
                ..base
            };
            apps.push(Arc::new(generated_model(&params)?));
        }
    }
    if apps.is_empty() {
        return Err(CliError::Usage(
            "give at least one --scenario or --generate".into(),
        ));
    }
    let modes: Vec<Mode> = args.modes.iter().map(|&m| m.into()).collect();
    let mut spec = ExperimentSpec::new(
        apps,
        modes.clone(),
        (0..args.seeds).collect(),
        args.budget,
        advisor,
    );
    spec.workers = args.workers;
    spec.base = args.engine.config(Mode::Hybrid, 0, args.budget)?;
    // Surface advisor misconfiguration once instead of per cell.
    spec.advisor
        .build(&crate::sim::SimRuntime::new(spec.apps[0].clone()), 0)
        .map_err(CliError::from)?;
    let cells = experiments::run_grid(&spec).map_err(|e| CliError::Usage(e.to_string()))?;

    let reports_dir = args.out_dir.join("reports");
    fs::create_dir_all(&reports_dir).map_err(|e| output_error(&reports_dir, e))?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for cell in &cells {
        let app = spec.apps[cell.app].name();
        match &cell.outcome {
            Ok((report, metrics)) => {
                let path = reports_dir.join(format!("{app}_{}_{}.json", cell.mode, cell.seed));
                write_file(
                    &path,
                    report
                        .to_json()
                        .map_err(|e| CliError::Failed(e.to_string()))?
                        .as_bytes(),
                )?;
                rows.push(metrics.clone());
                reports.push(report);
            }
            Err(e) => failures.push(format!("{app} {} seed {}: {e}", cell.mode, cell.seed)),
        }
    }
    let summary = ComparisonSummary::from_rows(&modes, rows);
    let mut buf = Vec::new();
    write_summary_csv(&summary.rows, &mut buf).map_err(|e| CliError::Failed(e.to_string()))?;
    write_file(&args.out_dir.join("summary.csv"), &buf)?;
    let mut buf = Vec::new();
    summary
        .write_aggregate_csv(&mut buf)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    write_file(&args.out_dir.join("aggregate.csv"), &buf)?;
    let title = format!("coverage, {} campaigns", reports.len());
    write_file(
        &args.out_dir.join("curves.svg"),
        coverage_svg(&reports, &title).as_bytes(),
    )?;

    let _ = writeln!(
        out,
        "{:<12} {:>9} {:>14} {:>14} {:>8} {:>8}",
        "mode", "campaigns", "screens (med)", "crashes (med)", "ESR", "FAER"
    );
    for a in &summary.aggregates {
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>14} {:>14} {:>8} {:>8}",
            a.mode.as_str(),
            a.campaigns,
            a.unique_screens
                .map_or("-".into(), |q| format!("{:.1}", q.median)),
            a.unique_crashes
                .map_or("-".into(), |q| format!("{:.1}", q.median)),
            fmt_rate(a.esr),
            fmt_rate(a.faer)
        );
    }
    let _ = writeln!(
        out,
        "summary            {}",
        args.out_dir.join("summary.csv").display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            let _ = writeln!(out, "cell failed: {f}");
        }
        Err(CliError::Failed(format!(
            "{} grid cells failed",
            failures.len()
        )))
    }
}

fn write_scenario(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Failed(format!("stdout: {e}"))),
    }
}

fn cmd_generate(args: GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = GeneratorParams {
        screens: args.screens,
        tarpit_factor: args.tarpit_factor,
        seed: args.seed,
        crashes: args.crashes,
    };
    let model = generated_model(&params)?;
    let text = model
        .scenario()
        .to_json()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    write_scenario(&text, args.out.as_deref(), out)
}

fn cmd_example(args: ExampleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = motivating::motivating_scenario()
        .to_json()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    write_scenario(&text, args.out.as_deref(), out)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, &mut out),
        Command::Reproduce(a) => cmd_reproduce(a, &mut out),
        Command::Compare(a) => cmd_compare(a, &mut out),
        Command::Generate(a) => cmd_generate(a, &mut out),
        Command::Example(a) => cmd_example(a, &mut out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
