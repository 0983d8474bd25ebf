//! Independent reference transcriptions shared by the integration tests.
//!
//! Nothing here calls into the solver's numerics: the update, the flux and
//! the convolution are written out directly from their definitions.

#![allow(dead_code)]

use proptest::prelude::*;

/// Polynomial `sum_i c_i x^i`.
pub fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().map(|(i, a)| a * x.powi(i as i32)).sum()
}

/// Exact cell averages of `w(y) = 2 (eta - y) / eta^2` over `[k dx, (k+1) dx]`.
pub fn linear_kernel_weights(eta: f64, dx: f64) -> Vec<f64> {
    let n = (eta / dx).round() as usize;
    (0..n)
        .map(|k| 2.0 / (eta * eta) * (eta - (k as f64 + 0.5) * dx))
        .collect()
}

/// Parameters of one direct-transcription step.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n_left: usize,
    pub n_right: usize,
    pub dx: f64,
    pub eta_cells: usize,
    pub k_l: f64,
    pub k_r: f64,
    pub psi: Vec<f64>,
    pub g: Vec<f64>,
}

impl Instance {
    pub fn eta(&self) -> f64 {
        self.eta_cells as f64 * self.dx
    }
}

/// One step of the upwind scheme written straight from its definition:
/// cells `j = -n_left ..= n_right`, absorbing (copy) ghosts on both sides,
/// `R_{j+1/2} = dx sum_k w_k rho_{j+k+1}`,
/// `F_{j+1/2} = rho_j g(rho_{j+1}) k_{l|r} psi(R_{j+1/2})` with `k_l` for
/// `x_{j+1/2} < 0`.
pub fn direct_step(inst: &Instance, rho: &[f64], dt: f64) -> Vec<f64> {
    let m = rho.len() as i64;
    let first = -(inst.n_left as i64);
    let at = |j: i64| rho[(j - first).clamp(0, m - 1) as usize];
    let w = linear_kernel_weights(inst.eta(), inst.dx);
    let flux = |j: i64| {
        let mut r = 0.0;
        for (k, wk) in w.iter().enumerate() {
            r += wk * at(j + k as i64 + 1);
        }
        r *= inst.dx;
        let x = (j as f64 + 0.5) * inst.dx;
        let k = if x < 0.0 { inst.k_l } else { inst.k_r };
        at(j) * poly(&inst.g, at(j + 1)) * k * poly(&inst.psi, r)
    };
    let lambda = dt / inst.dx;
    (0..m)
        .map(|i| {
            let j = first + i;
            rho[i as usize] - lambda * (flux(j) - flux(j - 1))
        })
        .collect()
}

/// Classical Godunov flux for the single unimodal flux
/// `f(u) = k u (1 - u)^2` with maximum at `u = 1/3`.
pub fn classical_godunov_flux(k: f64, a: f64, b: f64) -> f64 {
    let f = |u: f64| k * u * (1.0 - u) * (1.0 - u);
    let star = 1.0 / 3.0;
    if a <= b {
        f(a).min(f(b))
    } else if b <= star && star <= a {
        f(star)
    } else {
        f(a).max(f(b))
    }
}

/// One classical Godunov step with copy ghosts.
pub fn classical_godunov_step(k: f64, rho: &[f64], dx: f64, dt: f64) -> Vec<f64> {
    let m = rho.len() as i64;
    let at = |i: i64| rho[i.clamp(0, m - 1) as usize];
    let lambda = dt / dx;
    (0..m)
        .map(|i| {
            let right = classical_godunov_flux(k, at(i), at(i + 1));
            let left = classical_godunov_flux(k, at(i - 1), at(i));
            rho[i as usize] - lambda * (right - left)
        })
        .collect()
}

/// Basic CFL bound transcribed directly for affine `psi` and `g`:
/// `min_s min(dx / (rho_max k_s |g'| |psi|), dx / (k_s |g| |psi|))`.
pub fn basic_cfl_bound(k_l: f64, k_r: f64, psi_sup: f64, g_sup: f64, g_prime_sup: f64, dx: f64) -> f64 {
    [k_l, k_r]
        .into_iter()
        .flat_map(|k| [dx / (k * g_prime_sup * psi_sup), dx / (k * g_sup * psi_sup)])
        .fold(f64::INFINITY, f64::min)
}

/// Random admissible small instances: at most 15 cells, `psi = a - b rho`
/// with `0 <= b <= a`, affine or quadratic `g`.
pub fn instance() -> impl Strategy<Value = Instance> {
    (
        1usize..8,
        1usize..8,
        prop::sample::select(vec![0.05, 0.1, 0.2, 0.25]),
        1usize..5,
        0.2f64..3.0,
        0.2f64..3.0,
        // psi = a - b rho with 0 <= b <= a, so psi' <= 0 and psi(1) >= 0.
        (0.3f64..1.5, 0.0f64..1.0),
        prop::bool::ANY,
    )
        .prop_map(|(n_left, n_right, dx, eta_cells, k_l, k_r, (a, frac), quadratic_g)| Instance {
            n_left,
            n_right,
            dx,
            eta_cells,
            k_l,
            k_r,
            psi: vec![a, -a * frac],
            g: if quadratic_g {
                vec![1.0, 0.0, -1.0]
            } else {
                vec![1.0, -1.0]
            },
        })
}

pub fn states(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0],
        len,
    )
}

pub fn instance_with_state() -> impl Strategy<Value = (Instance, Vec<f64>, f64, usize)> {
    instance().prop_flat_map(|inst| {
        let len = inst.n_left + inst.n_right + 1;
        (Just(inst), states(len), 0.05f64..=1.0, 1usize..=5)
    })
}
