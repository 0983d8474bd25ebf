//! Command-line front end: `run`, `validate` and `sweep`.
//!
//! Every command resolves a [`RunConfig`] (optional TOML file, then explicit
//! flags on top), computes everything in memory and only then writes its
//! artifacts, so a failed run leaves no partial tables behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{ExperimentKind, Length, ProfileSpec, RunConfig};
use crate::diagnostics::{fmt_sci, EntropySummary, RunSummary};
use crate::error::{Error, Result};
use crate::exec::{with_threads, Execution};
use crate::experiments::{conservation_defect, example1, example2, origin_flux_drift, Case, Example1Result, Example2Result, Snapshot};
use crate::model::CflMode;

/// Relative mass-balance defect above which a run is reported as failing.
pub const CONSERVATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "nltraffic", version, about = "Non-local traffic flow with a flux discontinuity at x = 0")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its tables, snapshots and summary.json.
    Run(CommonArgs),
    /// Run a single resolution with runtime checks and report violations.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Check the discrete entropy inequality (same as --entropy-sweep).
        #[arg(long)]
        entropy: bool,
    },
    /// Run both cases of one or both examples.
    Sweep(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// example1, example2 or custom.
    #[arg(long)]
    pub experiment: Option<String>,
    /// I or II.
    #[arg(long)]
    pub case: Option<Case>,
    /// Mesh size(s), comma separated; accepts ratios such as 1/320.
    #[arg(long, value_delimiter = ',')]
    pub dx: Vec<Length>,
    /// Kernel support(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eta: Vec<Length>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Time-step bound: basic or bv-strict.
    #[arg(long, value_parser = parse_cfl_mode)]
    pub cfl_mode: Option<CflMode>,
    /// Fraction of the CFL bound used as the step, in (0, 1].
    #[arg(long)]
    pub cfl_safety: Option<f64>,
    /// Slowdown factor: a name (1-rho, 1-rho^2, (1-rho)^2) or coefficients c0,c1,...
    #[arg(long)]
    pub g_profile: Option<ProfileSpec>,
    /// Check the discrete entropy inequality at every step.
    #[arg(long)]
    pub entropy_sweep: bool,
    /// Use the reduced-size reference configuration.
    #[arg(long)]
    pub desk_scale: bool,
    /// Worker threads (0 = all available).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Disable data-parallel sweeps.
    #[arg(long)]
    pub sequential: bool,
}

fn parse_cfl_mode(s: &str) -> std::result::Result<CflMode, String> {
    match s {
        "basic" => Ok(CflMode::Basic),
        "bv-strict" => Ok(CflMode::BvStrict),
        other => Err(format!("unknown CFL mode {other:?} (expected basic or bv-strict)")),
    }
}

impl CommonArgs {
    /// Config file (or defaults) with explicit flags applied on top.
    pub fn resolve(&self, default_experiment: &str) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let case = self.case.unwrap_or(Case::I);
                let name = self.experiment.as_deref().unwrap_or(default_experiment);
                RunConfig::new(ExperimentKind::select(name, case)?)
            }
        };
        if self.experiment.is_some() || self.case.is_some() {
            let name = match (&self.experiment, config.experiment.example()) {
                (Some(e), _) => e.clone(),
                (None, Some(n)) => format!("example{n}"),
                (None, None) => "custom".to_owned(),
            };
            config.experiment = ExperimentKind::select(&name, self.case.unwrap_or(config.case()))?;
        }
        if self.desk_scale {
            config.apply_desk_scale();
        }
        if !self.dx.is_empty() {
            match config.experiment.example() {
                Some(2) => config.dx = self.dx[0].clone(),
                _ => config.resolutions = self.dx.clone(),
            }
        }
        if !self.eta.is_empty() {
            match config.experiment.example() {
                Some(2) => config.etas = self.eta.clone(),
                _ => config.kernel.eta = self.eta[0].clone(),
            }
        }
        if let Some(t) = self.t_final {
            config.t_final = t;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if let Some(mode) = self.cfl_mode {
            config.cfl.mode = mode;
        }
        if let Some(s) = self.cfl_safety {
            config.cfl.safety = s;
        }
        if let Some(g) = &self.g_profile {
            config.model.g = g.clone();
        }
        if self.entropy_sweep {
            config.entropy_sweep = true;
        }
        if let Some(t) = self.threads {
            config.threads = t;
        }
        if self.sequential {
            config.execution = Execution::Sequential;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Structured report written as `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub example1: Vec<Example1Report>,
    pub example2: Vec<Example2Report>,
    pub custom: Option<CustomReport>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Example1Report {
    pub case: Case,
    pub reference: String,
    pub desk_scale: bool,
    pub rows: Vec<crate::diagnostics::ErrorRow>,
    pub runs: Vec<RunSummary>,
    pub reference_run: RunSummary,
    pub max_conservation_defect: f64,
    pub snapshot_files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Example2Report {
    pub case: Case,
    pub dx: f64,
    pub t_final: f64,
    pub distances: Vec<(f64, f64)>,
    pub local_run: RunSummary,
    pub runs: Vec<RunSummary>,
    pub snapshot_files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CustomReport {
    pub dx: f64,
    pub run: RunSummary,
    pub conservation_defect: f64,
    pub origin_flux_drift: f64,
    pub snapshot_file: String,
}

/// In-memory artifacts: file name and contents.
#[derive(Debug, Default)]
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, name: String, bytes: Vec<u8>) {
        self.files.push((name, bytes));
    }

    fn add_snapshot(&mut self, snap: &Snapshot) -> Result<String> {
        let name = format!("snapshots_{}.csv", snap.label);
        let mut buf = Vec::new();
        snap.write_csv(&mut buf)?;
        self.add(name.clone(), buf);
        Ok(name)
    }

    fn write_all(&self, dir: &Path) -> Result<()> {
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Creates `dir` if needed and proves it is writable before any compute.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".nltraffic-write-probe");
    fs::File::create(&probe)
        .and_then(|mut f| f.write_all(b""))
        .map_err(|e| Error::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))?;
    Ok(())
}

fn entropy_violation(case: Case, s: &EntropySummary) -> Option<String> {
    (!s.passed()).then(|| {
        format!(
            "case {case}: entropy residual {} exceeds {} (step {}, cell {}, c = {})",
            fmt_sci(s.max_residual),
            fmt_sci(s.tolerance),
            s.worst_step,
            s.worst_cell,
            s.worst_c
        )
    })
}

fn check_run(label: &str, s: &RunSummary, defect: f64, rho_max: f64, violations: &mut Vec<String>) {
    if defect > CONSERVATION_TOLERANCE {
        violations.push(format!("{label}: relative mass-balance defect {}", fmt_sci(defect)));
    }
    let slack = crate::scheme::MAX_PRINCIPLE_SLACK;
    if s.min < -slack || s.max > rho_max + slack {
        violations.push(format!("{label}: values left [0, {rho_max}]: [{}, {}]", fmt_sci(s.min), fmt_sci(s.max)));
    }
}

fn table1(result: &Example1Result, rho_max: f64, art: &mut Artifacts, violations: &mut Vec<String>) -> Result<Example1Report> {
    let case = result.case;
    let mut buf = Vec::new();
    result.table.write_csv(&mut buf)?;
    art.add(format!("table1_case{case}.csv"), buf);
    let mut files = Vec::new();
    for snap in &result.snapshots {
        files.push(art.add_snapshot(snap)?);
    }
    if result.max_conservation_defect > CONSERVATION_TOLERANCE {
        violations.push(format!(
            "example 1 case {case}: relative mass-balance defect {}",
            fmt_sci(result.max_conservation_defect)
        ));
    }
    for s in result.runs.iter().chain([&result.reference]) {
        check_run(&format!("example 1 case {case}, dt {}", fmt_sci(s.dt)), s, 0.0, rho_max, violations);
        if let Some(e) = &s.entropy {
            violations.extend(entropy_violation(case, e));
        }
    }
    Ok(Example1Report {
        case,
        reference: result.table.reference.clone(),
        desk_scale: result.desk_scale,
        rows: result.table.rows.clone(),
        runs: result.runs.clone(),
        reference_run: result.reference.clone(),
        max_conservation_defect: result.max_conservation_defect,
        snapshot_files: files,
    })
}

fn table2(results: &[Example2Result], art: &mut Artifacts) -> Result<Vec<Example2Report>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["case", "eta", "l1_distance"])?;
    let mut reports = Vec::new();
    for r in results {
        for &(eta, d) in &r.distances {
            out.write_record([r.case.label().to_owned(), fmt_sci(eta), fmt_sci(d)])?;
        }
        let mut files = Vec::new();
        for snap in r.overlay.iter().chain(&r.figure) {
            files.push(art.add_snapshot(snap)?);
        }
        reports.push(Example2Report {
            case: r.case,
            dx: r.dx,
            t_final: r.t_final,
            distances: r.distances.clone(),
            local_run: r.local.clone(),
            runs: r.runs.clone(),
            snapshot_files: files,
        });
    }
    let bytes = out.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    art.add("table2.csv".into(), bytes);
    Ok(reports)
}

fn config_for(base: &RunConfig, example: &str, case: Case) -> Result<RunConfig> {
    let mut c = base.clone();
    c.experiment = ExperimentKind::select(example, case)?;
    c.model.k_l = None;
    c.model.k_r = None;
    Ok(c)
}

/// Runs the experiments selected by `configs` and writes all artifacts.
fn execute(report_config: &RunConfig, configs: &[RunConfig]) -> Result<Report> {
    ensure_writable(&report_config.out)?;
    let mut art = Artifacts::default();
    let mut report = Report {
        config: report_config.clone(),
        example1: Vec::new(),
        example2: Vec::new(),
        custom: None,
        violations: Vec::new(),
    };
    let mut ex2 = Vec::new();
    for config in configs {
        let problem = config.problem()?;
        let rho_max = problem.model.rho_max;
        match config.experiment.example() {
            Some(1) => {
                let result = example1(&problem, &config.example1())?;
                report.example1.push(table1(&result, rho_max, &mut art, &mut report.violations)?);
            }
            Some(2) => ex2.push(example2(&problem, &config.example2())?),
            _ => {
                let dx = config.resolutions[0].value();
                let (mesh, run) = if config.entropy_sweep {
                    problem.run_with_entropy(dx, config.t_final)?
                } else {
                    problem.run(dx, config.t_final, &mut [])?
                };
                let snap = Snapshot::new(format!("custom_t{}", config.t_final), &mesh, &run.final_state);
                let file = art.add_snapshot(&snap)?;
                let mut series = Vec::new();
                run.write_series_csv(&mut series)?;
                art.add("series_custom.csv".into(), series);
                let summary = run.summary();
                let defect = conservation_defect(&run);
                check_run("custom run", &summary, defect, rho_max, &mut report.violations);
                if let Some(e) = &summary.entropy {
                    report.violations.extend(entropy_violation(config.case(), e));
                }
                report.custom = Some(CustomReport {
                    dx,
                    conservation_defect: defect,
                    origin_flux_drift: origin_flux_drift(&run, 0.1),
                    run: summary,
                    snapshot_file: file,
                });
            }
        }
    }
    if !ex2.is_empty() {
        report.example2 = table2(&ex2, &mut art)?;
    }
    let json = serde_json::to_vec_pretty(&report)?;
    art.add("summary.json".into(), json);
    art.write_all(&report_config.out)?;
    Ok(report)
}

/// Summary printed by `validate`.
#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    pub case: Case,
    pub dx: f64,
    pub run: RunSummary,
    pub conservation_defect: f64,
    pub violations: Vec<String>,
}

pub fn validate(config: &RunConfig, entropy: bool) -> Result<Validation> {
    let problem = config.problem()?;
    let dx = match config.experiment.example() {
        Some(2) => config.dx.value(),
        _ => config.resolutions[0].value(),
    };
    let (_, run) = if entropy || config.entropy_sweep {
        problem.run_with_entropy(dx, config.t_final)?
    } else {
        problem.run(dx, config.t_final, &mut [])?
    };
    let summary = run.summary();
    let defect = conservation_defect(&run);
    let mut violations = Vec::new();
    check_run("validation run", &summary, defect, problem.model.rho_max, &mut violations);
    if let Some(e) = &summary.entropy {
        violations.extend(entropy_violation(config.case(), e));
    }
    Ok(Validation {
        case: config.case(),
        dx,
        run: summary,
        conservation_defect: defect,
        violations,
    })
}

fn run_command(cli: &Cli) -> Result<Vec<String>> {
    match &cli.command {
        Command::Run(args) => {
            let config = args.resolve("example1")?;
            with_threads(config.threads, || execute(&config, std::slice::from_ref(&config)))
                .map(|r| r.violations)
        }
        Command::Validate { common, entropy } => {
            let mut common = common.clone();
            if common.dx.is_empty() && common.config.is_none() {
                common.dx = vec!["1/40".parse()?];
            }
            let config = common.resolve("example1")?;
            let v = with_threads(config.threads, || validate(&config, *entropy))?;
            let text = serde_json::to_string_pretty(&v)?;
            // A closed pipe (e.g. `| head`) is not an error.
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(Error::io("<stdout>", e)),
                _ => {}
            }
            Ok(v.violations)
        }
        Command::Sweep(args) => {
            let base = args.resolve("example1")?;
            let examples: Vec<&str> = match args.experiment.as_deref() {
                Some(e) => vec![e],
                None if args.config.is_some() => match base.experiment.example() {
                    Some(1) => vec!["example1"],
                    Some(2) => vec!["example2"],
                    _ => vec!["custom"],
                },
                None => vec!["example1", "example2"],
            };
            let cases = match args.case {
                Some(c) => vec![c],
                None => vec![Case::I, Case::II],
            };
            let mut configs = Vec::new();
            for ex in &examples {
                for &case in &cases {
                    let mut c = config_for(&base, ex, case)?;
                    if args.desk_scale {
                        c.apply_desk_scale();
                    }
                    c.validate()?;
                    configs.push(c);
                }
            }
            with_threads(base.threads, || execute(&base, &configs)).map(|r| r.violations)
        }
    }
}

/// Entry point shared by the binary and the integration tests.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run_command(&cli) {
        Ok(violations) if violations.is_empty() => ExitCode::SUCCESS,
        Ok(violations) => {
            for v in violations {
                eprintln!("invariant violation: {v}");
            }
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
