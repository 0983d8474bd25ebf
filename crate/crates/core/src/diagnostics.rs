//! Measured quantities: L1 norm and error, total variation, experimental
//! order of accuracy, per-step run series and the discrete entropy residual.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{convolve_all, padded, KernelWeights};
use crate::mesh::Mesh;
use crate::model::{FluxSide, ModelSpec};
use crate::scheme::{Scheme, State, StepEvent, StepObserver};

/// Scientific notation with 8 significant digits.
pub fn fmt_sci(x: f64) -> String {
    format!("{x:.7e}")
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `dx * sum_j |rho_j|`.
pub fn l1_norm(state: &State, mesh: &Mesh) -> f64 {
    mesh.dx() * compensated_sum(state.values().iter().map(|v| v.abs()))
}

/// `sum_j |rho_{j+1} - rho_j|` over the physical cells.
pub fn total_variation(state: &State) -> f64 {
    state
        .values()
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum()
}

/// Total variation over the pairs of cells whose centers both lie in `[a, b]`.
pub fn total_variation_window(state: &State, mesh: &Mesh, a: f64, b: f64) -> f64 {
    let v = state.values();
    (0..v.len().saturating_sub(1))
        .filter(|&i| {
            let x0 = mesh.center(mesh.cell(i));
            let x1 = mesh.center(mesh.cell(i + 1));
            x0 >= a && x1 <= b
        })
        .map(|i| (v[i + 1] - v[i]).abs())
        .sum()
}

/// Integer refinement ratio `dx / dx_ref`.
pub fn refinement_ratio(coarse: f64, fine: f64) -> Result<usize> {
    let ratio = coarse / fine;
    let r = ratio.round();
    if r < 1.0 || (ratio - r).abs() > 1e-9 * r {
        return Err(Error::RefinementRatio {
            coarse,
            fine,
            ratio,
        });
    }
    Ok(r as usize)
}

/// Exact cell averages of the fine piecewise-constant solution on the coarse
/// mesh. Both meshes are centered on `x = 0`, so the overlaps are integers
/// in units of half a fine cell. Beyond its domain the fine solution is
/// extended by its absorbing ghost values.
pub fn project_onto(reference: &State, fine: &Mesh, coarse: &Mesh) -> Result<Vec<f64>> {
    let r = refinement_ratio(coarse.dx(), fine.dx())? as i64;
    let last = reference.len() as i64 - 1;
    let vals = reference.values();
    let fine_value = |i: i64| vals[(i - fine.first_cell()).clamp(0, last) as usize];
    let out = (coarse.first_cell()..=coarse.last_cell())
        .map(|j| {
            // Coarse cell j spans [(2j-1) r, (2j+1) r]; fine cell i spans [2i-1, 2i+1].
            let (lo, hi) = ((2 * j - 1) * r, (2 * j + 1) * r);
            let i_lo = (lo + 1).div_euclid(2);
            let i_hi = (hi - 1 + 1).div_euclid(2);
            let mut acc = 0.0;
            for i in i_lo..=i_hi {
                let overlap = (hi.min(2 * i + 1) - lo.max(2 * i - 1)).max(0);
                if overlap > 0 {
                    acc += overlap as f64 * fine_value(i);
                }
            }
            acc / (2 * r) as f64
        })
        .collect();
    Ok(out)
}

/// `dx * sum_j |coarse_j - P(reference)_j|` with `P` the exact averaging onto
/// the coarse mesh.
pub fn l1_error(coarse: &State, coarse_mesh: &Mesh, reference: &State, fine_mesh: &Mesh) -> Result<f64> {
    if coarse.len() != coarse_mesh.len() || reference.len() != fine_mesh.len() {
        return Err(Error::InvalidArgument("state and mesh sizes disagree".into()));
    }
    let projected = project_onto(reference, fine_mesh, coarse_mesh)?;
    Ok(coarse_mesh.dx()
        * compensated_sum(
            coarse
                .values()
                .iter()
                .zip(&projected)
                .map(|(a, b)| (a - b).abs()),
        ))
}

/// Experimental orders `ln(e_{i-1}/e_i) / ln(dx_{i-1}/dx_i)`; the first entry
/// and any entry involving a zero or non-finite error are `None`.
pub fn eoa(errors: &[(f64, f64)]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(errors.len());
    for i in 0..errors.len() {
        if i == 0 {
            out.push(None);
            continue;
        }
        let (dx0, e0) = errors[i - 1];
        let (dx1, e1) = errors[i];
        let ok = e0 > 0.0 && e1 > 0.0 && e0.is_finite() && e1.is_finite() && dx0 > dx1;
        out.push(ok.then(|| (e0 / e1).ln() / (dx0 / dx1).ln()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub dx: f64,
    pub l1_error: f64,
    pub eoa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    pub reference_dx: f64,
    /// Free-form tag for the reference run, e.g. `1/1280`.
    pub reference: String,
    /// Set when the comparison carries no convergence information (zero
    /// final time: the errors are pure projection differences).
    #[serde(default)]
    pub degenerate: bool,
}

impl ErrorTable {
    /// Rows must be given with strictly decreasing `dx`.
    pub fn from_errors(errors: &[(f64, f64)], reference_dx: f64, reference: impl Into<String>) -> Result<Self> {
        if errors.windows(2).any(|w| !(w[1].0 < w[0].0)) {
            return Err(Error::InvalidArgument(
                "error table rows need strictly decreasing dx".into(),
            ));
        }
        let orders = eoa(errors);
        Ok(Self {
            rows: errors
                .iter()
                .zip(orders)
                .map(|(&(dx, l1_error), eoa)| ErrorRow { dx, l1_error, eoa })
                .collect(),
            reference_dx,
            reference: reference.into(),
            degenerate: false,
        })
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.l1_error).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["dx", "l1_error", "eoa"])?;
        for row in &self.rows {
            let eoa = row.eoa.map(fmt_sci).unwrap_or_default();
            out.write_record([fmt_sci(row.dx), fmt_sci(row.l1_error), eoa])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time: f64,
    pub mass: f64,
    pub min: f64,
    pub max: f64,
    pub tv: f64,
}

impl SeriesPoint {
    fn of(state: &State, mesh: &Mesh, time: f64) -> Self {
        Self {
            time,
            mass: l1_norm(state, mesh),
            min: state.min(),
            max: state.max(),
            tv: total_variation(state),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary {
    pub tolerance: f64,
    pub c_values: Vec<f64>,
    pub max_residual: f64,
    pub worst_step: usize,
    pub worst_cell: i64,
    pub worst_c: f64,
    pub checks: u64,
    pub violations: u64,
}

impl EntropySummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// One point per time level, `n_steps + 1` in total.
    pub series: Vec<SeriesPoint>,
    pub final_state: State,
    pub dt: f64,
    pub n_steps: usize,
    /// `int F dt` through the left boundary interface.
    pub inflow: f64,
    /// `int F dt` through the right boundary interface.
    pub outflow: f64,
    /// `(F_{-1/2}, F_{1/2})` at every step.
    pub origin_fluxes: Vec<(f64, f64)>,
    pub entropy: Option<EntropySummary>,
}

impl RunReport {
    pub fn initial_mass(&self) -> f64 {
        self.series[0].mass
    }

    pub fn final_mass(&self) -> f64 {
        self.series.last().map(|p| p.mass).unwrap_or(f64::NAN)
    }

    pub fn global_min(&self) -> f64 {
        self.series.iter().map(|p| p.min).fold(f64::INFINITY, f64::min)
    }

    pub fn global_max(&self) -> f64 {
        self.series.iter().map(|p| p.max).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rows `step,time,mass,min,max,tv`.
    pub fn write_series_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "time", "mass", "min", "max", "tv"])?;
        for (n, p) in self.series.iter().enumerate() {
            out.write_record([
                n.to_string(),
                fmt_sci(p.time),
                fmt_sci(p.mass),
                fmt_sci(p.min),
                fmt_sci(p.max),
                fmt_sci(p.tv),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            dt: self.dt,
            n_steps: self.n_steps,
            t_final: self.final_state.time(),
            initial_mass: self.initial_mass(),
            final_mass: self.final_mass(),
            inflow: self.inflow,
            outflow: self.outflow,
            min: self.global_min(),
            max: self.global_max(),
            final_tv: self.series.last().map(|p| p.tv).unwrap_or(f64::NAN),
            entropy: self.entropy.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dt: f64,
    pub n_steps: usize,
    pub t_final: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub min: f64,
    pub max: f64,
    pub final_tv: f64,
    pub entropy: Option<EntropySummary>,
}

pub(crate) struct SeriesRecorder {
    series: Vec<SeriesPoint>,
    inflow: f64,
    outflow: f64,
    origin_fluxes: Vec<(f64, f64)>,
    origin: usize,
    time: f64,
    n_steps: usize,
}

impl SeriesRecorder {
    pub(crate) fn new(mesh: &Mesh, state0: &State, n_steps: usize) -> Self {
        let mut series = Vec::with_capacity(n_steps + 1);
        series.push(SeriesPoint::of(state0, mesh, state0.time()));
        Self {
            series,
            inflow: 0.0,
            outflow: 0.0,
            origin_fluxes: Vec::with_capacity(n_steps),
            // Flux vector index of x_{-1/2}.
            origin: mesh.n_left(),
            time: state0.time(),
            n_steps: 0,
        }
    }

    pub(crate) fn record(&mut self, mesh: &Mesh, dt: f64, fluxes: &[f64], after: &State) {
        self.time += dt;
        self.n_steps += 1;
        self.inflow += dt * fluxes[0];
        self.outflow += dt * fluxes[fluxes.len() - 1];
        self.origin_fluxes
            .push((fluxes[self.origin], fluxes[self.origin + 1]));
        self.series.push(SeriesPoint::of(after, mesh, self.time));
    }

    pub(crate) fn finish(mut self, final_state: State, dt: f64) -> RunReport {
        if let Some(last) = self.series.last_mut() {
            last.time = final_state.time();
        }
        RunReport {
            series: self.series,
            final_state,
            dt,
            n_steps: self.n_steps,
            inflow: self.inflow,
            outflow: self.outflow,
            origin_fluxes: self.origin_fluxes,
            entropy: None,
        }
    }
}

/// Per-cell left-hand side of the discrete entropy inequality
///
/// ```text
/// |rho_j^{n+1} - c| - |rho_j^n - c|
///   + lambda (Phi_{j+1/2} - Phi_{j-1/2})
///   + lambda sgn(rho_j^{n+1} - c) c g(c) (v_{j+1/2} - v_{j-1/2})
/// ```
///
/// with the numerical entropy flux
/// `Phi_{j+1/2} = F_{j+1/2}(rho_j v c, rho_{j+1} v c) - F_{j+1/2}(rho_j ^ c, rho_{j+1} ^ c)`,
/// `F_{j+1/2}(a, b) = a g(b) v_{j+1/2}` and `v_{j+1/2} = v_s(R^n_{j+1/2})`.
/// On a locally constant state this reduces to `G(u v c) - G(u ^ c)` with
/// `G(u) = u g(u) v_{j+1/2}`.
pub fn entropy_residual(
    before: &State,
    after: &State,
    c: f64,
    dt: f64,
    mesh: &Mesh,
    model: &ModelSpec,
    weights: &KernelWeights,
) -> Vec<f64> {
    let field = convolve_all(before, mesh, weights);
    let first = field.first_interface();
    let v: Vec<f64> = field
        .values()
        .iter()
        .enumerate()
        .map(|(p, &r)| model.velocity_unchecked(FluxSide::of_interface(first + p as i64), r))
        .collect();
    residual_from_velocities(before.values(), after.values(), c, dt / mesh.dx(), model, &v)
}

fn residual_from_velocities(
    before: &[f64],
    after: &[f64],
    c: f64,
    lambda: f64,
    model: &ModelSpec,
    v: &[f64],
) -> Vec<f64> {
    let ext = padded(before, 1);
    let g = |u: f64| model.g.eval(u);
    let entropy_flux = |a: f64, b: f64, vel: f64| {
        a.max(c) * g(b.max(c)) * vel - a.min(c) * g(b.min(c)) * vel
    };
    let cgc = c * g(c);
    (0..before.len())
        .map(|i| {
            let (left, mid, right) = (ext[i], ext[i + 1], ext[i + 2]);
            let (v_minus, v_plus) = (v[i], v[i + 1]);
            let jump = after[i] - c;
            let sign = if jump > 0.0 {
                1.0
            } else if jump < 0.0 {
                -1.0
            } else {
                0.0
            };
            jump.abs() - (mid - c).abs()
                + lambda * (entropy_flux(mid, right, v_plus) - entropy_flux(left, mid, v_minus))
                + lambda * sign * cgc * (v_plus - v_minus)
        })
        .collect()
}

/// Default entropy tolerance per cell and step.
pub const ENTROPY_TOLERANCE: f64 = 1e-10;

/// `count` equispaced values on `[0, rho_max]` plus `extra`, sorted and
/// deduplicated.
pub fn entropy_c_values(rho_max: f64, count: usize, extra: &[f64]) -> Vec<f64> {
    let mut cs: Vec<f64> = (0..count)
        .map(|i| rho_max * i as f64 / (count.max(2) - 1) as f64)
        .chain(extra.iter().copied())
        .collect();
    cs.sort_by(f64::total_cmp);
    cs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    cs
}

/// Observer evaluating the entropy residual for every `c` at every step.
#[derive(Debug, Clone)]
pub struct EntropyObserver {
    summary: EntropySummary,
}

impl EntropyObserver {
    pub fn new(c_values: Vec<f64>, tolerance: f64) -> Self {
        Self {
            summary: EntropySummary {
                tolerance,
                c_values,
                max_residual: f64::NEG_INFINITY,
                worst_step: 0,
                worst_cell: 0,
                worst_c: f64::NAN,
                checks: 0,
                violations: 0,
            },
        }
    }

    pub fn summary(&self) -> &EntropySummary {
        &self.summary
    }

    pub fn into_summary(self) -> EntropySummary {
        self.summary
    }
}

impl StepObserver for EntropyObserver {
    fn observe(&mut self, scheme: &Scheme, event: &StepEvent<'_>) -> Result<()> {
        let mesh = scheme.mesh();
        let model = scheme.model();
        let first = event.field.first_interface();
        let v: Vec<f64> = event
            .field
            .values()
            .iter()
            .enumerate()
            .map(|(p, &r)| model.velocity_unchecked(FluxSide::of_interface(first + p as i64), r))
            .collect();
        let lambda = event.dt / mesh.dx();
        let s = &mut self.summary;
        for &c in &s.c_values.clone() {
            let res = residual_from_velocities(
                event.before.values(),
                event.after.values(),
                c,
                lambda,
                model,
                &v,
            );
            for (i, r) in res.into_iter().enumerate() {
                s.checks += 1;
                if r > s.tolerance {
                    s.violations += 1;
                }
                if r > s.max_residual {
                    s.max_residual = r;
                    s.worst_step = event.step;
                    s.worst_cell = mesh.cell(i);
                    s.worst_c = c;
                }
            }
        }
        Ok(())
    }
}

/// Observer recording boundary-adjacent cell values, used to certify that
/// no wave has reached the boundary.
#[derive(Debug, Clone, Default)]
pub struct BoundaryMonitor {
    initial: Option<(f64, f64)>,
    pub max_deviation: f64,
}

impl StepObserver for BoundaryMonitor {
    fn observe(&mut self, _scheme: &Scheme, event: &StepEvent<'_>) -> Result<()> {
        let v = event.after.values();
        let b = event.before.values();
        let (l0, r0) = *self.initial.get_or_insert((b[0], b[b.len() - 1]));
        let dev = (v[0] - l0).abs().max((v[v.len() - 1] - r0).abs());
        self.max_deviation = self.max_deviation.max(dev);
        Ok(())
    }
}
