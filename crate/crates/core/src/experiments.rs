//! Canned numerical experiments.
//!
//! * Example 1: initial datum `0.9` on `[-0.5, 1.5]`, `0.1` elsewhere; linear
//!   kernel with `eta = 0.4`; `psi = 1 - rho`. Case I uses `k_l = 3, k_r = 1`,
//!   Case II `k_l = 1, k_r = 3`. Produces an L1 error / EOA table at `T = 2`
//!   against a fine reference run, plus profile snapshots.
//! * Example 2: same datum and cases, kernel support shrinking towards zero,
//!   compared with the Godunov solution of the local problem.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    entropy_c_values, l1_error, ErrorTable, EntropyObserver, RunReport, RunSummary,
    ENTROPY_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::godunov::GodunovScheme;
use crate::kernel::{discretize_kernel, support_cells, KernelSpec};
use crate::mesh::{project_initial_datum, Mesh, PiecewiseConstant};
use crate::model::{CflMode, ModelSpec, Profile, DEFAULT_CFL_SAFETY};
use crate::scheme::{Scheme, State, StepObserver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
}

impl Case {
    /// `(k_l, k_r)`.
    pub fn speeds(self) -> (f64, f64) {
        match self {
            Case::I => (3.0, 1.0),
            Case::II => (1.0, 3.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Case::I => "I",
            Case::II => "II",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "1" => Ok(Case::I),
            "II" | "ii" | "2" => Ok(Case::II),
            other => Err(Error::InvalidArgument(format!("unknown case {other:?} (expected I or II)"))),
        }
    }
}

/// Datum shared by both examples.
pub fn example_datum() -> PiecewiseConstant {
    PiecewiseConstant::new(vec![-0.5, 1.5], vec![0.1, 0.9, 0.1]).expect("valid datum")
}

pub const EXAMPLE1_RESOLUTIONS: [f64; 5] = [1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0, 1.0 / 320.0, 1.0 / 640.0];
pub const EXAMPLE1_REFERENCE_DX: f64 = 1.0 / 1280.0;
pub const EXAMPLE1_ETA: f64 = 0.4;
pub const EXAMPLE2_ETAS: [f64; 3] = [0.1, 0.02, 0.005];
pub const EXAMPLE2_DX: f64 = 1.0 / 1600.0;
pub const DEFAULT_T_FINAL: f64 = 2.0;
pub const DEFAULT_DOMAIN: (f64, f64) = (3.0, 5.0);

/// Model, kernel, datum and numerical knobs common to every run of an
/// experiment. `kernel.eta` is overridden per run in Example 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub model: ModelSpec,
    pub kernel: KernelSpec,
    pub datum: PiecewiseConstant,
    /// Extent of the domain to the left and right of `x = 0`.
    pub domain: (f64, f64),
    pub cfl_mode: CflMode,
    pub cfl_safety: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl Problem {
    pub fn example(case: Case, g: Profile) -> Result<Self> {
        let (k_l, k_r) = case.speeds();
        Ok(Self {
            model: ModelSpec::new(k_l, k_r, Profile::one_minus(1.0), g, 1.0)?,
            kernel: KernelSpec::linear(EXAMPLE1_ETA),
            datum: example_datum(),
            domain: DEFAULT_DOMAIN,
            cfl_mode: CflMode::Basic,
            cfl_safety: DEFAULT_CFL_SAFETY,
            execution: Execution::default(),
        })
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        let mut p = self.clone();
        p.kernel.eta = eta;
        p
    }

    pub fn mesh(&self, dx: f64) -> Result<Mesh> {
        Mesh::covering(dx, self.domain.0, self.domain.1)
    }

    pub fn initial_state(&self, mesh: &Mesh) -> Result<State> {
        project_initial_datum(&self.datum, mesh, self.model.rho_max)
    }

    pub fn scheme(&self, dx: f64) -> Result<Scheme> {
        let mesh = self.mesh(dx)?;
        let weights = discretize_kernel(&self.kernel, dx)?;
        Ok(Scheme::new(mesh, self.model.clone(), weights, self.cfl_mode)?.with_execution(self.execution))
    }

    /// Runs the non-local scheme from the projected datum to `t_final`.
    pub fn run(&self, dx: f64, t_final: f64, observers: &mut [&mut dyn StepObserver]) -> Result<(Mesh, RunReport)> {
        let scheme = self.scheme(dx)?;
        let state0 = self.initial_state(scheme.mesh())?;
        let dt = scheme.cfl_dt(self.cfl_safety)?;
        let report = scheme.run(&state0, t_final, dt, observers)?;
        Ok((*scheme.mesh(), report))
    }

    /// Same run with the entropy sweep attached.
    pub fn run_with_entropy(&self, dx: f64, t_final: f64) -> Result<(Mesh, RunReport)> {
        let mut obs = EntropyObserver::new(self.entropy_c_values(), ENTROPY_TOLERANCE);
        let (mesh, mut report) = self.run(dx, t_final, &mut [&mut obs])?;
        report.entropy = Some(obs.into_summary());
        Ok((mesh, report))
    }

    /// Runs the local Godunov oracle from the projected datum.
    pub fn run_local(&self, dx: f64, t_final: f64) -> Result<(Mesh, RunReport)> {
        let mesh = self.mesh(dx)?;
        let scheme = GodunovScheme::new(mesh, &self.model)?.with_execution(self.execution);
        let state0 = self.initial_state(&mesh)?;
        let dt = scheme.cfl_dt(self.cfl_safety)?;
        Ok((mesh, scheme.run(&state0, t_final, dt)?))
    }

    /// Eleven equispaced levels plus the datum's plateau values.
    pub fn entropy_c_values(&self) -> Vec<f64> {
        entropy_c_values(self.model.rho_max, 11, self.datum.values())
    }
}

/// `|final - initial - (inflow - outflow)| / initial`.
pub fn conservation_defect(report: &RunReport) -> f64 {
    let change = report.final_mass() - report.initial_mass();
    (change - (report.inflow - report.outflow)).abs() / report.initial_mass().abs().max(f64::MIN_POSITIVE)
}

/// Largest deviation of `(F_{-1/2}, F_{1/2})` from their final values over
/// the last `fraction` of the steps.
pub fn origin_flux_drift(report: &RunReport, fraction: f64) -> f64 {
    let fl = &report.origin_fluxes;
    let Some(&(l_end, r_end)) = fl.last() else {
        return 0.0;
    };
    let start = fl.len() - ((fl.len() as f64 * fraction).ceil() as usize).clamp(1, fl.len());
    fl[start..]
        .iter()
        .map(|&(l, r)| (l - l_end).abs().max((r - r_end).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub label: String,
    pub time: f64,
    pub dx: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Snapshot {
    pub fn new(label: impl Into<String>, mesh: &Mesh, state: &State) -> Self {
        Self {
            label: label.into(),
            time: state.time(),
            dx: mesh.dx(),
            x: mesh.centers().collect(),
            rho: state.values().to_vec(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        use crate::diagnostics::fmt_sci;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "rho"])?;
        for (x, r) in self.x.iter().zip(&self.rho) {
            out.write_record([fmt_sci(*x), fmt_sci(*r)])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Config {
    pub case: Case,
    pub resolutions: Vec<f64>,
    pub reference_dx: f64,
    pub t_final: f64,
    pub snapshot_dx: f64,
    pub snapshot_times: Vec<f64>,
    pub entropy_sweep: bool,
    /// Marks the reduced-size reference configuration in the output.
    pub desk_scale: bool,
}

impl Example1Config {
    pub fn new(case: Case) -> Self {
        let snapshot_times = match case {
            Case::I => vec![0.5, 1.0, 1.5, 2.0],
            Case::II => vec![1.0, 2.0],
        };
        Self {
            case,
            resolutions: EXAMPLE1_RESOLUTIONS.to_vec(),
            reference_dx: EXAMPLE1_REFERENCE_DX,
            t_final: DEFAULT_T_FINAL,
            snapshot_dx: 1.0 / 320.0,
            snapshot_times,
            entropy_sweep: false,
            desk_scale: false,
        }
    }

    /// Reference at `1/640` with the `1/320`-and-coarser rows.
    pub fn desk_scale(case: Case) -> Self {
        Self {
            resolutions: EXAMPLE1_RESOLUTIONS[..4].to_vec(),
            reference_dx: 1.0 / 640.0,
            desk_scale: true,
            ..Self::new(case)
        }
    }

    pub fn reference_tag(&self) -> String {
        let tag = format!("1/{}", (1.0 / self.reference_dx).round());
        if self.desk_scale {
            format!("{tag} (desk-scale fallback)")
        } else {
            tag
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Result {
    pub case: Case,
    pub table: ErrorTable,
    pub runs: Vec<RunSummary>,
    pub reference: RunSummary,
    pub snapshots: Vec<Snapshot>,
    pub max_conservation_defect: f64,
    pub desk_scale: bool,
}

fn check_divisible(eta: f64, resolutions: &[f64]) -> Result<()> {
    for &dx in resolutions {
        support_cells(eta, dx)?;
    }
    Ok(())
}

/// Error table and snapshots for Example 1.
///
/// `t_final = 0` is accepted: the errors are then projection differences
/// only and the table is flagged as degenerate.
pub fn example1(problem: &Problem, config: &Example1Config) -> Result<Example1Result> {
    if !(config.t_final >= 0.0) || !config.t_final.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "final time must be non-negative, got {}",
            config.t_final
        )));
    }
    if config.snapshot_times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("snapshot times must be positive".into()));
    }
    let mut all = config.resolutions.clone();
    all.push(config.reference_dx);
    all.push(config.snapshot_dx);
    check_divisible(problem.kernel.eta, &all)?;
    for &dx in &config.resolutions {
        crate::diagnostics::refinement_ratio(dx, config.reference_dx)?;
    }

    // Reference first, then every resolution, as independent jobs.
    let mut jobs: Vec<f64> = vec![config.reference_dx];
    jobs.extend(&config.resolutions);
    let runs = problem.execution.map(&jobs, |&dx| {
        if config.entropy_sweep {
            problem.run_with_entropy(dx, config.t_final)
        } else {
            problem.run(dx, config.t_final, &mut [])
        }
    });
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let (ref_mesh, ref_report) = runs.remove(0);

    let mut errors = Vec::with_capacity(runs.len());
    let mut max_defect = conservation_defect(&ref_report);
    for (mesh, report) in &runs {
        let e = l1_error(&report.final_state, mesh, &ref_report.final_state, &ref_mesh)?;
        errors.push((mesh.dx(), e));
        max_defect = max_defect.max(conservation_defect(report));
    }
    let mut table = ErrorTable::from_errors(&errors, config.reference_dx, config.reference_tag())?;
    table.degenerate = config.t_final == 0.0;

    let snaps = problem.execution.map(&config.snapshot_times, |&t| {
        problem.run(config.snapshot_dx, t, &mut []).map(|(mesh, report)| {
            Snapshot::new(
                format!("example1_case{}_t{}", config.case, t),
                &mesh,
                &report.final_state,
            )
        })
    });

    Ok(Example1Result {
        case: config.case,
        table,
        runs: runs.iter().map(|(_, r)| r.summary()).collect(),
        reference: ref_report.summary(),
        snapshots: snaps.into_iter().collect::<Result<Vec<_>>>()?,
        max_conservation_defect: max_defect,
        desk_scale: config.desk_scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example2Config {
    pub case: Case,
    pub etas: Vec<f64>,
    pub dx: f64,
    pub t_final: f64,
    /// Optional extra overlay dataset `(dx, T)`.
    pub figure: Option<(f64, f64)>,
}

impl Example2Config {
    pub fn new(case: Case) -> Self {
        Self {
            case,
            etas: EXAMPLE2_ETAS.to_vec(),
            dx: EXAMPLE2_DX,
            t_final: DEFAULT_T_FINAL,
            figure: Some((1.0 / 3200.0, 0.7)),
        }
    }

    /// `dx = 1/400` with `eta` in `{0.1, 0.02, 0.01}`.
    pub fn desk_scale(case: Case) -> Self {
        Self {
            etas: vec![0.1, 0.02, 0.01],
            dx: 1.0 / 400.0,
            figure: None,
            ..Self::new(case)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example2Result {
    pub case: Case,
    pub dx: f64,
    pub t_final: f64,
    /// `(eta, L1 distance to the local solution)`.
    pub distances: Vec<(f64, f64)>,
    pub overlay: Vec<Snapshot>,
    pub figure: Vec<Snapshot>,
    pub local: RunSummary,
    pub runs: Vec<RunSummary>,
}

type Runs = (Vec<(Mesh, RunReport)>, (Mesh, RunReport));

fn overlay(problem: &Problem, etas: &[f64], dx: f64, t: f64) -> Result<Runs> {
    check_divisible_etas(etas, dx)?;
    // Non-local runs for each eta plus one local run (eta = None).
    let mut jobs: Vec<Option<f64>> = etas.iter().copied().map(Some).collect();
    jobs.push(None);
    let mut runs = problem
        .execution
        .map(&jobs, |job| match job {
            Some(eta) => problem.with_eta(*eta).run(dx, t, &mut []),
            None => problem.run_local(dx, t),
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let local = runs.pop().expect("local run present");
    Ok((runs, local))
}

fn check_divisible_etas(etas: &[f64], dx: f64) -> Result<()> {
    for &eta in etas {
        support_cells(eta, dx)?;
    }
    Ok(())
}

/// L1 distance between the non-local and the local solution as the kernel
/// support shrinks.
pub fn example2(problem: &Problem, config: &Example2Config) -> Result<Example2Result> {
    if !(config.t_final > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "final time must be positive, got {}",
            config.t_final
        )));
    }
    check_divisible_etas(&config.etas, config.dx)?;
    if let Some((fdx, _)) = config.figure {
        check_divisible_etas(&config.etas, fdx)?;
    }
    let (runs, (local_mesh, local)) = overlay(problem, &config.etas, config.dx, config.t_final)?;
    let mut distances = Vec::with_capacity(runs.len());
    let mut snaps = Vec::with_capacity(runs.len() + 1);
    for (&eta, (mesh, report)) in config.etas.iter().zip(&runs) {
        let d = l1_error(&report.final_state, mesh, &local.final_state, &local_mesh)?;
        distances.push((eta, d));
        snaps.push(Snapshot::new(
            format!("example2_case{}_t{}_eta{}", config.case, config.t_final, eta),
            mesh,
            &report.final_state,
        ));
    }
    snaps.push(Snapshot::new(
        format!("example2_case{}_t{}_local", config.case, config.t_final),
        &local_mesh,
        &local.final_state,
    ));

    let mut figure = Vec::new();
    if let Some((fdx, ft)) = config.figure {
        let (fruns, (fmesh, flocal)) = overlay(problem, &config.etas, fdx, ft)?;
        for (&eta, (mesh, report)) in config.etas.iter().zip(&fruns) {
            figure.push(Snapshot::new(
                format!("example2_case{}_t{}_eta{}", config.case, ft, eta),
                mesh,
                &report.final_state,
            ));
        }
        figure.push(Snapshot::new(
            format!("example2_case{}_t{}_local", config.case, ft),
            &fmesh,
            &flocal.final_state,
        ));
    }

    Ok(Example2Result {
        case: config.case,
        dx: config.dx,
        t_final: config.t_final,
        distances,
        overlay: snaps,
        figure,
        local: local.summary(),
        runs: runs.iter().map(|(_, r)| r.summary()).collect(),
    })
}
