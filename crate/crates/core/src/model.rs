//! Velocity laws `v_s = k_s psi`, the slowdown factor `g`, the flux and the
//! two CFL bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelWeights;

const NORM_SAMPLES: usize = 10_000;
const SAMPLED_NORM_MARGIN: f64 = 1.01;

/// Polynomial profile in `rho` on `[0, rho_max]` with cached sup-norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    coefficients: Vec<f64>,
    sup: f64,
    sup_derivative: f64,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, a)| i as f64 * a)
        .collect()
}

fn degree(c: &[f64]) -> usize {
    c.iter().rposition(|&a| a != 0.0).unwrap_or(0)
}

/// `max |p|` on `[0, hi]`: analytic up to degree 2, sampled with a margin above.
fn sup_abs(c: &[f64], hi: f64) -> f64 {
    match degree(c) {
        0 | 1 => horner(c, 0.0).abs().max(horner(c, hi).abs()),
        2 => {
            let mut m = horner(c, 0.0).abs().max(horner(c, hi).abs());
            let vertex = -c[1] / (2.0 * c[2]);
            if vertex > 0.0 && vertex < hi {
                m = m.max(horner(c, vertex).abs());
            }
            m
        }
        _ => {
            let m = (0..=NORM_SAMPLES)
                .map(|i| horner(c, hi * i as f64 / NORM_SAMPLES as f64).abs())
                .fold(0.0, f64::max);
            m * SAMPLED_NORM_MARGIN
        }
    }
}

impl Profile {
    pub fn new(coefficients: Vec<f64>, rho_max: f64) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProfile(
                "coefficients must be finite and non-empty".into(),
            ));
        }
        let sup = sup_abs(&coefficients, rho_max);
        let sup_derivative = sup_abs(&derivative(&coefficients), rho_max);
        Ok(Self {
            coefficients,
            sup,
            sup_derivative,
        })
    }

    /// `1 - rho / rho_max`.
    pub fn one_minus(rho_max: f64) -> Self {
        Self::new(vec![1.0, -1.0 / rho_max], rho_max).expect("affine profile is valid")
    }

    /// Parses `1-rho`, `1-rho^2`, `(1-rho)^2` or `1`, scaled to `rho_max`.
    pub fn named(name: &str, rho_max: f64) -> Result<Self> {
        let compact: String = name.chars().filter(|c| !c.is_whitespace()).collect();
        let inv = 1.0 / rho_max;
        let coefficients = match compact.as_str() {
            "1-rho" => vec![1.0, -inv],
            "1-rho^2" => vec![1.0, 0.0, -inv * inv],
            "(1-rho)^2" => vec![1.0, -2.0 * inv, inv * inv],
            "1" => vec![1.0],
            _ => {
                return Err(Error::InvalidProfile(format!(
                    "unknown profile {name:?} (expected 1-rho, 1-rho^2, (1-rho)^2, 1 or coefficients)"
                )))
            }
        };
        Self::new(coefficients, rho_max)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        horner(&self.coefficients, rho)
    }

    pub fn eval_derivative(&self, rho: f64) -> f64 {
        horner(&derivative(&self.coefficients), rho)
    }

    /// `||p||_inf` on `[0, rho_max]`.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    /// `||p'||_inf` on `[0, rho_max]`.
    pub fn sup_derivative(&self) -> f64 {
        self.sup_derivative
    }

    fn is_non_increasing(&self, rho_max: f64) -> bool {
        let d = derivative(&self.coefficients);
        let tol = 1e-12 * self.sup_derivative.max(1.0);
        (0..=1000).all(|i| horner(&d, rho_max * i as f64 / 1000.0) <= tol)
    }
}

/// Which velocity factor applies; decided by the sign of the position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluxSide {
    Left,
    Right,
}

impl FluxSide {
    /// Side of interface `x_{j+1/2}`: negative for `j < 0`, positive otherwise.
    #[inline]
    pub fn of_interface(j: i64) -> Self {
        if j < 0 {
            FluxSide::Left
        } else {
            FluxSide::Right
        }
    }

    pub fn of_position(x: f64) -> Result<Self> {
        if x < 0.0 {
            Ok(FluxSide::Left)
        } else if x > 0.0 {
            Ok(FluxSide::Right)
        } else {
            Err(Error::UndefinedSide)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CflMode {
    /// Bound guaranteeing the maximum principle.
    #[default]
    Basic,
    /// Stricter bound guaranteeing L1 continuity in time.
    BvStrict,
}

pub const DEFAULT_CFL_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub k_l: f64,
    pub k_r: f64,
    pub psi: Profile,
    pub g: Profile,
    pub rho_max: f64,
}

impl ModelSpec {
    pub fn new(k_l: f64, k_r: f64, psi: Profile, g: Profile, rho_max: f64) -> Result<Self> {
        let m = Self {
            k_l,
            k_r,
            psi,
            g,
            rho_max,
        };
        m.validate()?;
        Ok(m)
    }

    /// `psi = g = 1 - rho`, `rho_max = 1`.
    pub fn traffic(k_l: f64, k_r: f64) -> Self {
        Self::new(k_l, k_r, Profile::one_minus(1.0), Profile::one_minus(1.0), 1.0)
            .expect("standard traffic model is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_max > 0.0) || !self.rho_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "rho_max must be positive, got {}",
                self.rho_max
            )));
        }
        for (name, k) in [("k_l", self.k_l), ("k_r", self.k_r)] {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {k}")));
            }
        }
        if !self.psi.is_non_increasing(self.rho_max) {
            return Err(Error::InvalidProfile("psi must be non-increasing on [0, rho_max]".into()));
        }
        if self.psi.eval(self.rho_max) < -1e-12 {
            return Err(Error::InvalidProfile("psi must be non-negative on [0, rho_max]".into()));
        }
        if !self.g.is_non_increasing(self.rho_max) {
            return Err(Error::InvalidProfile("g must be non-increasing on [0, rho_max]".into()));
        }
        if self.g.eval(self.rho_max).abs() > 1e-12 {
            return Err(Error::InvalidProfile(format!(
                "g(rho_max) must vanish, got {}",
                self.g.eval(self.rho_max)
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn k(&self, side: FluxSide) -> f64 {
        match side {
            FluxSide::Left => self.k_l,
            FluxSide::Right => self.k_r,
        }
    }

    #[inline]
    pub(crate) fn velocity_unchecked(&self, side: FluxSide, r: f64) -> f64 {
        self.k(side) * self.psi.eval(r)
    }

    /// `v_s(R) = k_s psi(R)`.
    pub fn velocity(&self, side: FluxSide, r: f64) -> Result<f64> {
        self.check_density("convolution value", r)?;
        Ok(self.velocity_unchecked(side, r))
    }

    fn check_density(&self, what: &'static str, v: f64) -> Result<()> {
        const SLACK: f64 = 1e-10;
        if v < -SLACK || v > self.rho_max + SLACK || !v.is_finite() {
            return Err(Error::Domain {
                what,
                value: v,
                lo: 0.0,
                hi: self.rho_max,
            });
        }
        Ok(())
    }

    /// `rho g(rho) v_s(R)` with the side chosen by the sign of `x`.
    pub fn exact_flux(&self, x: f64, rho: f64, r: f64) -> Result<f64> {
        let side = FluxSide::of_position(x)?;
        self.check_density("density", rho)?;
        Ok(rho * self.g.eval(rho) * self.velocity(side, r)?)
    }

    /// Largest admissible time step, already multiplied by `safety`.
    pub fn cfl_dt(
        &self,
        dx: f64,
        mode: CflMode,
        kernel: &KernelWeights,
        safety: f64,
    ) -> Result<f64> {
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "CFL safety factor must lie in (0, 1], got {safety}"
            )));
        }
        if !(dx > 0.0) {
            return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
        }
        let (psi, dpsi) = (self.psi.sup(), self.psi.sup_derivative());
        let (g, dg) = (self.g.sup(), self.g.sup_derivative());
        let rho_max = self.rho_max;
        let mut bound = f64::INFINITY;
        for k in [self.k_l, self.k_r] {
            let denominators: Vec<f64> = match mode {
                CflMode::Basic => vec![rho_max * k * dg * psi, k * g * psi],
                CflMode::BvStrict => vec![
                    rho_max * k * psi * (g + dg)
                        + dx * rho_max * kernel.value_at_zero() * k * dpsi * g,
                ],
            };
            for d in denominators {
                if d > 0.0 {
                    bound = bound.min(dx / d);
                }
            }
        }
        if !bound.is_finite() {
            return Err(Error::DegenerateModel(
                "every CFL denominator vanishes (is psi or g identically zero?)".into(),
            ));
        }
        Ok(safety * bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{discretize_kernel, KernelSpec};

    fn kernel() -> KernelWeights {
        discretize_kernel(&KernelSpec::linear(0.4), 1.0 / 40.0).unwrap()
    }

    #[test]
    fn velocity_examples() {
        let m = ModelSpec::traffic(3.0, 1.0);
        assert_eq!(m.velocity(FluxSide::Left, 0.0).unwrap(), 3.0);
        assert_eq!(m.velocity(FluxSide::Left, 1.0).unwrap(), 0.0);
        assert_eq!(m.velocity(FluxSide::Right, 1.0).unwrap(), 0.0);
        assert_eq!(m.velocity(FluxSide::Right, 0.5).unwrap(), 0.5);
        assert!(matches!(m.velocity(FluxSide::Left, 1.1), Err(Error::Domain { .. })));
        assert!(m.velocity(FluxSide::Left, 1.0 + 1e-11).is_ok());
    }

    #[test]
    fn affine_norms() {
        let p = Profile::named("1-rho", 1.0).unwrap();
        assert_eq!(p.sup(), 1.0);
        assert_eq!(p.sup_derivative(), 1.0);
        let q = Profile::named("1-rho^2", 1.0).unwrap();
        assert_eq!(q.sup(), 1.0);
        assert_eq!(q.sup_derivative(), 2.0);
        let r = Profile::named("(1-rho)^2", 2.0).unwrap();
        assert!((r.eval(2.0)).abs() < 1e-15);
        assert!((r.sup_derivative() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_norm_is_conservative() {
        // (1 - rho)^3 expanded; exact sup 1, sup of derivative 3.
        let p = Profile::new(vec![1.0, -3.0, 3.0, -1.0], 1.0).unwrap();
        assert!(p.sup() >= 1.0 && p.sup() <= 1.0101);
        assert!(p.sup_derivative() >= 3.0 && p.sup_derivative() <= 3.0301 * 1.0001);
    }

    #[test]
    fn basic_cfl_bounds() {
        let w = kernel();
        let dx = 1.0 / 40.0;
        let m = ModelSpec::traffic(3.0, 1.0);
        let dt = m.cfl_dt(dx, CflMode::Basic, &w, 0.9).unwrap();
        assert!((dt - 0.9 * dx / 3.0).abs() < 1e-16);
        let m = ModelSpec::traffic(1.0, 1.0);
        let dt = m.cfl_dt(dx, CflMode::Basic, &w, 1.0).unwrap();
        assert!((dt - dx).abs() < 1e-16);
    }

    #[test]
    fn bv_strict_cfl_bound() {
        let w = kernel();
        let dx = 1.0 / 40.0;
        let m = ModelSpec::traffic(3.0, 3.0);
        let dt = m.cfl_dt(dx, CflMode::BvStrict, &w, 0.5).unwrap();
        // 3 (1 + 1) + dx * 5 * 3 = 6.375
        assert!((dt - 0.5 * dx / 6.375).abs() < 1e-16);
    }

    #[test]
    fn cfl_rejects_bad_safety_and_degenerate_model() {
        let w = kernel();
        let m = ModelSpec::traffic(1.0, 1.0);
        assert!(m.cfl_dt(0.1, CflMode::Basic, &w, 0.0).is_err());
        assert!(m.cfl_dt(0.1, CflMode::Basic, &w, 1.5).is_err());
        let zero = Profile::new(vec![0.0], 1.0).unwrap();
        let m = ModelSpec::new(1.0, 1.0, zero, Profile::one_minus(1.0), 1.0).unwrap();
        assert!(matches!(
            m.cfl_dt(0.1, CflMode::Basic, &w, 0.9),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn exact_flux_examples() {
        let m = ModelSpec::traffic(3.0, 1.0);
        assert_eq!(m.exact_flux(-1.0, 1.0, 0.3).unwrap(), 0.0);
        assert_eq!(m.exact_flux(1.0, 0.0, 0.3).unwrap(), 0.0);
        let f = m.exact_flux(-0.2, 0.5, 0.5).unwrap();
        assert!((f - 0.375).abs() < 1e-15);
        assert!(matches!(m.exact_flux(0.0, 0.5, 0.5), Err(Error::UndefinedSide)));
    }

    #[test]
    fn model_validation() {
        let inc = Profile::new(vec![0.5, 0.5], 1.0).unwrap();
        assert!(ModelSpec::new(1.0, 1.0, inc, Profile::one_minus(1.0), 1.0).is_err());
        let g_bad = Profile::new(vec![1.0], 1.0).unwrap();
        assert!(ModelSpec::new(1.0, 1.0, Profile::one_minus(1.0), g_bad, 1.0).is_err());
        assert!(ModelSpec::new(0.0, 1.0, Profile::one_minus(1.0), Profile::one_minus(1.0), 1.0).is_err());
        assert!(Profile::named("rho", 1.0).is_err());
    }

    #[test]
    fn interface_sides() {
        assert_eq!(FluxSide::of_interface(-1), FluxSide::Left);
        assert_eq!(FluxSide::of_interface(0), FluxSide::Right);
        assert_eq!(FluxSide::of_position(-1e-9).unwrap(), FluxSide::Left);
    }
}
