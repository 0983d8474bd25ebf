//! Godunov (demand/supply) solver for the local limit
//! `rho_t + (k(x) rho g(rho) psi(rho))_x = 0`, with `k = k_l` for `x < 0`
//! and `k_r` for `x > 0`.
//!
//! Cell `I_j` carries the left flux for `j < 0` and the right flux for
//! `j >= 0`, matching the side of its outgoing interface in the non-local
//! scheme. The two fluxes therefore couple at `x_{-1/2}`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{RunReport, SeriesRecorder};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::padded;
use crate::mesh::{Mesh, TimeGrid};
use crate::model::{FluxSide, ModelSpec, Profile};
use crate::scheme::{conservative_update, State, MAX_PRINCIPLE_SLACK};

const UNIMODAL_SAMPLES: usize = 2000;
const DERIVATIVE_MARGIN: f64 = 1.01;

/// `f(rho) = k rho g(rho) psi(rho)` on one side of the discontinuity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFlux {
    k: f64,
    g: Profile,
    psi: Profile,
    rho_max: f64,
    rho_star: f64,
    f_star: f64,
    max_speed: f64,
}

impl LocalFlux {
    pub fn new(model: &ModelSpec, side: FluxSide) -> Result<Self> {
        let mut flux = Self {
            k: model.k(side),
            g: model.g.clone(),
            psi: model.psi.clone(),
            rho_max: model.rho_max,
            rho_star: 0.0,
            f_star: 0.0,
            max_speed: 0.0,
        };
        flux.analyze()?;
        Ok(flux)
    }

    pub fn pair(model: &ModelSpec) -> Result<(Self, Self)> {
        Ok((Self::new(model, FluxSide::Left)?, Self::new(model, FluxSide::Right)?))
    }

    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        self.k * rho * self.g.eval(rho) * self.psi.eval(rho)
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        let (g, psi) = (self.g.eval(rho), self.psi.eval(rho));
        let (dg, dpsi) = (self.g.eval_derivative(rho), self.psi.eval_derivative(rho));
        self.k * (g * psi + rho * (dg * psi + g * dpsi))
    }

    pub fn rho_star(&self) -> f64 {
        self.rho_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    /// Upper bound on `|f'|` over `[0, rho_max]`.
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    #[inline]
    pub fn demand(&self, rho: f64) -> f64 {
        if rho <= self.rho_star {
            self.eval(rho)
        } else {
            self.f_star
        }
    }

    #[inline]
    pub fn supply(&self, rho: f64) -> f64 {
        if rho <= self.rho_star {
            self.f_star
        } else {
            self.eval(rho)
        }
    }

    fn analyze(&mut self) -> Result<()> {
        let n = UNIMODAL_SAMPLES;
        let h = self.rho_max / n as f64;
        let derivs: Vec<f64> = (0..=n).map(|i| self.derivative(i as f64 * h)).collect();
        let scale = derivs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if scale == 0.0 {
            return Err(Error::NotUnimodal("flux is identically zero".into()));
        }
        self.max_speed = scale * DERIVATIVE_MARGIN;

        let tol = 1e-12 * scale;
        let signs: Vec<i8> = derivs[1..n]
            .iter()
            .filter(|d| d.abs() > tol)
            .map(|&d| if d > 0.0 { 1 } else { -1 })
            .collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        if signs.first() != Some(&1) || signs.last() != Some(&-1) || changes != 1 {
            return Err(Error::NotUnimodal(format!(
                "derivative changes sign {changes} times on the sample grid"
            )));
        }

        let best = (0..=n)
            .max_by(|&a, &b| self.eval(a as f64 * h).total_cmp(&self.eval(b as f64 * h)))
            .expect("non-empty sample");
        let lo = (best.saturating_sub(1)) as f64 * h;
        let hi = ((best + 1).min(n)) as f64 * h;
        let guess = golden_section_max(|r| self.eval(r), lo, hi, 1e-12);
        // Values are flat near the peak, so golden section alone only pins the
        // argmax to ~sqrt(eps); bisecting on the sign of f' sharpens it.
        self.rho_star = bisect_derivative(|r| self.derivative(r), lo, hi).unwrap_or(guess);
        self.f_star = self.eval(self.rho_star);
        Ok(())
    }
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Root of a decreasing-through-zero `df` on `[a, b]`, if it brackets one.
fn bisect_derivative(df: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    if !(df(a) > 0.0 && df(b) < 0.0) {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if df(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// `min(Demand_L(rho_l), Supply_R(rho_r))`.
#[inline]
pub fn godunov_interface_flux(rho_l: f64, rho_r: f64, flux_l: &LocalFlux, flux_r: &LocalFlux) -> f64 {
    flux_l.demand(rho_l).min(flux_r.supply(rho_r))
}

/// Godunov scheme on the same mesh layout as the non-local scheme.
#[derive(Debug, Clone)]
pub struct GodunovScheme {
    mesh: Mesh,
    left: LocalFlux,
    right: LocalFlux,
    rho_max: f64,
    dt_limit: f64,
    exec: Execution,
}

impl GodunovScheme {
    pub fn new(mesh: Mesh, model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let (left, right) = LocalFlux::pair(model)?;
        let dt_limit = mesh.dx() / left.max_speed().max(right.max_speed());
        Ok(Self {
            mesh,
            left,
            right,
            rho_max: model.rho_max,
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

    pub fn fluxes(&self) -> (&LocalFlux, &LocalFlux) {
        (&self.left, &self.right)
    }

    /// `safety * dx / max |f'|`.
    pub fn cfl_dt(&self, safety: f64) -> Result<f64> {
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "CFL safety factor must lie in (0, 1], got {safety}"
            )));
        }
        Ok(safety * self.dt_limit)
    }

    fn cell_flux(&self, j: i64) -> &LocalFlux {
        if j < 0 {
            &self.left
        } else {
            &self.right
        }
    }

    /// Godunov fluxes at `x_{j+1/2}` for `j = first_cell - 1 ..= last_cell`.
    pub fn interface_fluxes(&self, state: &State) -> Vec<f64> {
        let ext = padded(state.values(), 1);
        let first = self.mesh.first_cell() - 1;
        let mut fluxes = vec![0.0; self.mesh.len() + 1];
        self.exec.fill(&mut fluxes, |p| {
            let j = first + p as i64;
            godunov_interface_flux(ext[p], ext[p + 1], self.cell_flux(j), self.cell_flux(j + 1))
        });
        fluxes
    }

    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        self.step_with_fluxes(state, dt).map(|(s, _)| s)
    }

    fn step_with_fluxes(&self, state: &State, dt: f64) -> Result<(State, Vec<f64>)> {
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
        let fluxes = self.interface_fluxes(state);
        let values = conservative_update(state.values(), &fluxes, dt / self.mesh.dx(), self.exec);
        let next = State::new(values, state.time() + dt);
        next.check_bounds(&self.mesh, self.rho_max, MAX_PRINCIPLE_SLACK)?;
        Ok((next, fluxes))
    }

    pub fn run(&self, state0: &State, t_final: f64, dt: f64) -> Result<RunReport> {
        let span = (t_final - state0.time()).max(0.0);
        let grid = TimeGrid::new(dt, self.mesh.dx(), span)?;
        let mut recorder = SeriesRecorder::new(&self.mesh, state0, grid.n_steps);
        let mut state = state0.clone();
        for n in 0..grid.n_steps {
            let h = grid.step_size(n);
            let (next, fluxes) = self.step_with_fluxes(&state, h).map_err(|e| e.at_step(n))?;
            recorder.record(&self.mesh, h, &fluxes, &next);
            state = next;
        }
        if grid.n_steps > 0 {
            state = State::new(state.into_values(), t_final);
        }
        Ok(recorder.finish(state, dt))
    }
}

/// One Godunov step for the flux pair of `model`.
pub fn godunov_step(state: &State, mesh: &Mesh, dt: f64, model: &ModelSpec) -> Result<State> {
    GodunovScheme::new(*mesh, model)?.step(state, dt)
}
