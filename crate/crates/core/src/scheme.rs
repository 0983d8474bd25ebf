//! Upwind finite-volume scheme for the non-local flux
//!
//! ```text
//! rho_j^{n+1} = rho_j^n - lambda (F_{j+1/2} - F_{j-1/2})
//! F_{j+1/2}   = rho_j g(rho_{j+1}) k_s psi(R_{j+1/2}),  s = side of x_{j+1/2}
//! ```
//!
//! Boundaries are absorbing: ghost cells copy the outermost physical value.
//! One ghost is needed on the left (upwind density of the first interface)
//! and `N` on the right to fill the convolution window.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{RunReport, SeriesRecorder};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::{padded, ConvolutionField, KernelWeights};
use crate::mesh::{Mesh, TimeGrid};
use crate::model::{CflMode, FluxSide, ModelSpec};

/// Slack allowed on `[0, rho_max]` after each step.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GhostPolicy {
    #[default]
    Absorbing,
}

/// Cell densities at one time level, stored from `j = -n_left` upward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    values: Vec<f64>,
    time: f64,
    #[serde(default)]
    ghost_policy: GhostPolicy,
}

impl State {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        assert!(!values.is_empty(), "state needs at least one cell");
        Self {
            values,
            time,
            ghost_policy: GhostPolicy::Absorbing,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn ghost_policy(&self) -> GhostPolicy {
        self.ghost_policy
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks every value lies in `[0, rho_max]` up to `slack`.
    pub fn check_bounds(&self, mesh: &Mesh, rho_max: f64, slack: f64) -> Result<()> {
        for (i, &v) in self.values.iter().enumerate() {
            if !(v >= -slack && v <= rho_max + slack) {
                return Err(Error::MaxPrinciple {
                    cell: mesh.cell(i),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Left,
    Right,
}

/// Absorbing ghost values: `count` copies of the outermost cell.
pub fn ghost_values(state: &State, side: Boundary, count: usize) -> Vec<f64> {
    let v = match side {
        Boundary::Left => state.values[0],
        Boundary::Right => state.values[state.values.len() - 1],
    };
    vec![v; count]
}

/// Upwind flux at `x_{j+1/2}`.
#[inline]
pub fn numerical_flux(j: i64, rho_up: f64, rho_down: f64, r: f64, model: &ModelSpec) -> f64 {
    rho_up * model.g.eval(rho_down) * model.velocity_unchecked(FluxSide::of_interface(j), r)
}

/// Everything one step computed, handed to observers.
pub struct StepEvent<'a> {
    pub step: usize,
    pub dt: f64,
    pub before: &'a State,
    pub after: &'a State,
    pub field: &'a ConvolutionField,
    /// `F_{j+1/2}` for `j = first_cell - 1 ..= last_cell`.
    pub fluxes: &'a [f64],
}

/// Per-step hook receiving read-only snapshots.
pub trait StepObserver {
    fn observe(&mut self, scheme: &Scheme, event: &StepEvent<'_>) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub field: ConvolutionField,
    pub fluxes: Vec<f64>,
}

/// Applies `rho_i - lambda (F_{i+1} - F_i)` where `fluxes` holds one more
/// entry than `values`.
pub(crate) fn conservative_update(
    values: &[f64],
    fluxes: &[f64],
    lambda: f64,
    exec: Execution,
) -> Vec<f64> {
    debug_assert_eq!(fluxes.len(), values.len() + 1);
    let mut out = vec![0.0; values.len()];
    exec.fill(&mut out, |i| values[i] - lambda * (fluxes[i + 1] - fluxes[i]));
    out
}

/// The configured scheme: mesh, model, kernel weights and CFL policy.
#[derive(Debug, Clone)]
pub struct Scheme {
    mesh: Mesh,
    model: ModelSpec,
    weights: KernelWeights,
    cfl_mode: CflMode,
    dt_limit: f64,
    exec: Execution,
}

impl Scheme {
    pub fn new(mesh: Mesh, model: ModelSpec, weights: KernelWeights, cfl_mode: CflMode) -> Result<Self> {
        model.validate()?;
        let rel = (weights.dx() - mesh.dx()).abs() / mesh.dx();
        if rel > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "kernel weights were built for dx = {}, mesh has dx = {}",
                weights.dx(),
                mesh.dx()
            )));
        }
        let dt_limit = model.cfl_dt(mesh.dx(), cfl_mode, &weights, 1.0)?;
        Ok(Self {
            mesh,
            model,
            weights,
            cfl_mode,
            dt_limit,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn weights(&self) -> &KernelWeights {
        &self.weights
    }

    pub fn cfl_mode(&self) -> CflMode {
        self.cfl_mode
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    /// CFL time step for the configured mode scaled by `safety`.
    pub fn cfl_dt(&self, safety: f64) -> Result<f64> {
        self.model
            .cfl_dt(self.mesh.dx(), self.cfl_mode, &self.weights, safety)
    }

    /// `R_{j+1/2}` and `F_{j+1/2}` at every interface of `state`.
    pub fn interface_fluxes(&self, state: &State) -> (ConvolutionField, Vec<f64>) {
        let n = self.weights.len();
        let ext = padded(state.values(), n);
        let first = self.mesh.first_cell() - 1;
        let n_interfaces = self.mesh.len() + 1;
        let field =
            crate::kernel::convolve_padded(&ext, &self.weights, first, n_interfaces, self.exec);
        let r = field.values();
        let model = &self.model;
        let mut fluxes = vec![0.0; n_interfaces];
        self.exec.fill(&mut fluxes, |p| {
            numerical_flux(first + p as i64, ext[p], ext[p + 1], r[p], model)
        });
        (field, fluxes)
    }

    pub fn step_detailed(&self, state: &State, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0) || dt > self.dt_limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation {
                dt,
                limit: self.dt_limit,
            });
        }
        if state.len() != self.mesh.len() {
            return Err(Error::InvalidArgument(format!(
                "state has {} cells, mesh has {}",
                state.len(),
                self.mesh.len()
            )));
        }
        let (field, fluxes) = self.interface_fluxes(state);
        let lambda = dt / self.mesh.dx();
        let values = conservative_update(state.values(), &fluxes, lambda, self.exec);
        let next = State::new(values, state.time() + dt);
        next.check_bounds(&self.mesh, self.model.rho_max, MAX_PRINCIPLE_SLACK)?;
        Ok(StepOutcome {
            state: next,
            field,
            fluxes,
        })
    }

    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        self.step_detailed(state, dt).map(|o| o.state)
    }

    /// Advances `state0` to exactly `t_final` with steps of `dt` (shortening
    /// only the last one).
    pub fn run(
        &self,
        state0: &State,
        t_final: f64,
        dt: f64,
        observers: &mut [&mut dyn StepObserver],
    ) -> Result<RunReport> {
        let span = t_final - state0.time();
        if span < -1e-14 * t_final.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "final time {t_final} precedes state time {}",
                state0.time()
            )));
        }
        let grid = TimeGrid::new(dt, self.mesh.dx(), span.max(0.0))?;
        let mut recorder = SeriesRecorder::new(&self.mesh, state0, grid.n_steps);
        let mut state = state0.clone();
        for n in 0..grid.n_steps {
            let h = grid.step_size(n);
            let outcome = self.step_detailed(&state, h).map_err(|e| e.at_step(n))?;
            let event = StepEvent {
                step: n,
                dt: h,
                before: &state,
                after: &outcome.state,
                field: &outcome.field,
                fluxes: &outcome.fluxes,
            };
            for obs in observers.iter_mut() {
                obs.observe(self, &event).map_err(|e| e.at_step(n))?;
            }
            recorder.record(&self.mesh, h, &outcome.fluxes, &outcome.state);
            state = outcome.state;
        }
        if grid.n_steps > 0 {
            state = State::new(state.into_values(), t_final);
        }
        Ok(recorder.finish(state, dt))
    }
}

/// One scheme step (spec-level convenience around [`Scheme::step`]).
pub fn step(
    state: &State,
    mesh: &Mesh,
    dt: f64,
    model: &ModelSpec,
    weights: &KernelWeights,
) -> Result<State> {
    Scheme::new(*mesh, model.clone(), weights.clone(), CflMode::Basic)?.step(state, dt)
}

/// Runs with the basic-CFL time step scaled by `safety`.
pub fn run(
    state0: &State,
    mesh: &Mesh,
    model: &ModelSpec,
    weights: &KernelWeights,
    t_final: f64,
    safety: f64,
    observers: &mut [&mut dyn StepObserver],
) -> Result<RunReport> {
    let scheme = Scheme::new(*mesh, model.clone(), weights.clone(), CflMode::Basic)?;
    let dt = scheme.cfl_dt(safety)?;
    scheme.run(state0, t_final, dt, observers)
}
