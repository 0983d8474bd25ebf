//! Uniform 1D grid aligned on the flux discontinuity, plus time-step
//! bookkeeping and projection of initial data onto cell averages.
//!
//! Cells are indexed by signed `j` from `-n_left` to `n_right`. Cell `I_j`
//! is centered at `x_j = j * dx`, so `x = 0` is the midpoint of `I_0` and no
//! interface ever sits on the discontinuity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::State;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    dx: f64,
    n_left: usize,
    n_right: usize,
}

impl Mesh {
    pub fn new(dx: f64, n_left: usize, n_right: usize) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
        }
        if n_left == 0 || n_right == 0 {
            return Err(Error::InvalidArgument(format!(
                "cell counts must be at least 1 (n_left = {n_left}, n_right = {n_right})"
            )));
        }
        Ok(Self { dx, n_left, n_right })
    }

    /// Mesh whose domain approximately covers `[-left, right]`; the cell
    /// counts are rounded to the nearest integer number of cells.
    pub fn covering(dx: f64, left: f64, right: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
        }
        if !(left > 0.0 && right > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "domain extents must be positive, got left = {left}, right = {right}"
            )));
        }
        let n_left = (left / dx).round() as usize;
        let n_right = (right / dx).round() as usize;
        Self::new(dx, n_left.max(1), n_right.max(1))
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    /// Number of physical cells.
    pub fn len(&self) -> usize {
        self.n_left + self.n_right + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_cell(&self) -> i64 {
        -(self.n_left as i64)
    }

    pub fn last_cell(&self) -> i64 {
        self.n_right as i64
    }

    /// Storage offset of cell `j`.
    pub fn offset(&self, j: i64) -> usize {
        debug_assert!(j >= self.first_cell() && j <= self.last_cell());
        (j + self.n_left as i64) as usize
    }

    /// Signed cell index of storage offset `i`.
    pub fn cell(&self, i: usize) -> i64 {
        i as i64 - self.n_left as i64
    }

    pub fn center(&self, j: i64) -> f64 {
        j as f64 * self.dx
    }

    /// Position of `x_{j+1/2}`.
    pub fn interface(&self, j: i64) -> f64 {
        (j as f64 + 0.5) * self.dx
    }

    pub fn domain(&self) -> (f64, f64) {
        (
            -(self.n_left as f64 + 0.5) * self.dx,
            (self.n_right as f64 + 0.5) * self.dx,
        )
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (self.first_cell()..=self.last_cell()).map(move |j| self.center(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub lambda: f64,
    pub t_final: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// Steps of `dt` up to `t_final`. If `t_final` is not a multiple of `dt`
    /// the final step is shortened so the run ends exactly at `t_final`.
    pub fn new(dt: f64, dx: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !(dx > 0.0) {
            return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
        }
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "final time must be non-negative, got {t_final}"
            )));
        }
        let q = t_final / dt;
        let n_steps = if (q - q.round()).abs() <= 1e-9 * q.max(1.0) {
            q.round() as usize
        } else {
            q.ceil() as usize
        };
        Ok(Self {
            dt,
            lambda: dt / dx,
            t_final,
            n_steps,
        })
    }

    /// Size of step `n` (0-based).
    pub fn step_size(&self, n: usize) -> f64 {
        debug_assert!(n < self.n_steps);
        if n + 1 < self.n_steps {
            return self.dt;
        }
        let rest = self.t_final - (self.n_steps - 1) as f64 * self.dt;
        // Exact multiples keep every step at dt.
        if (rest - self.dt).abs() <= 1e-9 * self.dt {
            self.dt
        } else {
            rest.min(self.dt)
        }
    }
}

/// Piecewise-constant function: `values[0]` on `(-inf, breakpoints[0])`,
/// `values[k]` on `[breakpoints[k-1], breakpoints[k])`, and the last value
/// on `[breakpoints.last(), +inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "piecewise-constant datum needs {} values for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("datum contains non-finite entries".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        self.values[k]
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        let mut lo = a;
        let first = self.breakpoints.partition_point(|&bp| bp <= a);
        for k in first..=self.breakpoints.len() {
            let hi = self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY).min(b);
            if hi > lo {
                total += (hi - lo) * self.values[k];
            }
            lo = hi;
            if lo >= b {
                break;
            }
        }
        total
    }
}

fn check_range(values: &[f64], rho_max: f64) -> Result<()> {
    for &v in values {
        if !(0.0..=rho_max).contains(&v) {
            return Err(Error::Domain {
                what: "initial density",
                value: v,
                lo: 0.0,
                hi: rho_max,
            });
        }
    }
    Ok(())
}

/// Exact cell averages of a piecewise-constant datum.
pub fn project_initial_datum(rho0: &PiecewiseConstant, mesh: &Mesh, rho_max: f64) -> Result<State> {
    check_range(rho0.values(), rho_max)?;
    let dx = mesh.dx();
    let values = (mesh.first_cell()..=mesh.last_cell())
        .map(|j| {
            let a = mesh.interface(j - 1);
            let b = mesh.interface(j);
            // Cells inside a single piece take its value exactly.
            let k = rho0.breakpoints.partition_point(|&bp| bp <= a);
            if rho0.breakpoints.get(k).is_none_or(|&bp| bp >= b) {
                return rho0.values[k];
            }
            (rho0.integral(a, b) / dx).clamp(0.0, rho_max)
        })
        .collect();
    Ok(State::new(values, 0.0))
}

const GAUSS_LEGENDRE_5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Cell averages of a general datum by 5-point Gauss-Legendre per cell.
pub fn project_function<F>(rho0: F, mesh: &Mesh, rho_max: f64) -> Result<State>
where
    F: Fn(f64) -> f64,
{
    let half = 0.5 * mesh.dx();
    let mut values = Vec::with_capacity(mesh.len());
    for j in mesh.first_cell()..=mesh.last_cell() {
        let c = mesh.center(j);
        let mut avg = 0.0;
        for (node, weight) in GAUSS_LEGENDRE_5 {
            let v = rho0(c + half * node);
            if !(0.0..=rho_max).contains(&v) {
                return Err(Error::Domain {
                    what: "initial density",
                    value: v,
                    lo: 0.0,
                    hi: rho_max,
                });
            }
            avg += 0.5 * weight * v;
        }
        values.push(avg.clamp(0.0, rho_max));
    }
    Ok(State::new(values, 0.0))
}

/// Parses a length written either as a decimal (`0.025`) or a ratio of
/// decimals (`1/320`).
pub fn parse_length(s: &str) -> Result<f64> {
    let bad = || Error::InvalidArgument(format!("cannot parse length {s:?}"));
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            num / den
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidArgument(format!("length must be positive, got {s:?}")));
    }
    Ok(value)
}
