//! Look-ahead kernel discretization and the discrete convolution
//! `R_{j+1/2} = dx * sum_k w_k rho_{j+k+1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mesh::Mesh;
use crate::scheme::State;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind {
    /// `w(y) = 2 (eta - y) / eta^2`.
    LinearDecreasing,
    /// `w(y) = 1 / eta`.
    Constant,
    /// `w(y) = sum_i c_i y^i` on `[0, eta]`.
    CustomPolynomial { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub eta: f64,
    #[serde(flatten)]
    pub kind: KernelKind,
}

const KERNEL_SAMPLES: usize = 1000;

impl KernelSpec {
    pub fn linear(eta: f64) -> Self {
        Self {
            eta,
            kind: KernelKind::LinearDecreasing,
        }
    }

    pub fn constant(eta: f64) -> Self {
        Self {
            eta,
            kind: KernelKind::Constant,
        }
    }

    pub fn polynomial(eta: f64, coefficients: Vec<f64>) -> Self {
        Self {
            eta,
            kind: KernelKind::CustomPolynomial { coefficients },
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let eta = self.eta;
        match &self.kind {
            KernelKind::LinearDecreasing => 2.0 * (eta - y) / (eta * eta),
            KernelKind::Constant => 1.0 / eta,
            KernelKind::CustomPolynomial { coefficients } => horner(coefficients, y),
        }
    }

    /// `int_0^y w`.
    fn antiderivative(&self, y: f64) -> f64 {
        let eta = self.eta;
        match &self.kind {
            KernelKind::LinearDecreasing => 2.0 * (eta * y - 0.5 * y * y) / (eta * eta),
            KernelKind::Constant => y / eta,
            KernelKind::CustomPolynomial { coefficients } => {
                let integrated: Vec<f64> = std::iter::once(0.0)
                    .chain(
                        coefficients
                            .iter()
                            .enumerate()
                            .map(|(i, c)| c / (i as f64 + 1.0)),
                    )
                    .collect();
                horner(&integrated, y)
            }
        }
    }

    /// Checks positivity of support, and for custom kernels samples
    /// non-negativity, monotonicity, `w(eta) = 0` and unit mass.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "support eta must be positive, got {}",
                self.eta
            )));
        }
        let KernelKind::CustomPolynomial { coefficients } = &self.kind else {
            return Ok(());
        };
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidKernel("coefficients must be finite and non-empty".into()));
        }
        let scale = 1.0 / self.eta;
        let mut prev = f64::INFINITY;
        for i in 0..=KERNEL_SAMPLES {
            let y = self.eta * i as f64 / KERNEL_SAMPLES as f64;
            let w = self.eval(y);
            if w < -1e-12 * scale {
                return Err(Error::InvalidKernel(format!("kernel is negative at y = {y}: {w}")));
            }
            if w > prev + 1e-12 * scale {
                return Err(Error::InvalidKernel(format!("kernel increases near y = {y}")));
            }
            prev = w;
        }
        let end = self.eval(self.eta);
        if end.abs() > 1e-9 * scale {
            return Err(Error::InvalidKernel(format!("kernel at eta is {end}, expected 0")));
        }
        let mass = self.antiderivative(self.eta);
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidKernel(format!(
                "kernel integrates to {mass} over [0, eta], expected 1"
            )));
        }
        Ok(())
    }
}

fn horner(coefficients: &[f64], y: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

/// Number of cells `N` in the kernel support, or a divisibility error.
pub fn support_cells(eta: f64, dx: f64) -> Result<usize> {
    let ratio = eta / dx;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::Divisibility {
            eta,
            dx,
            ratio,
            nearest: eta / n.max(1.0),
        });
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelWeights {
    weights: Vec<f64>,
    dx: f64,
    eta: f64,
    value_at_zero: f64,
}

impl KernelWeights {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of support cells `N`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `w_eta(0)`, needed by the stricter CFL bound.
    pub fn value_at_zero(&self) -> f64 {
        self.value_at_zero
    }

    /// `dx * sum_k w_k window[k]` for a window of at least `N` values.
    #[inline]
    pub fn apply(&self, window: &[f64]) -> f64 {
        self.dx * dot(&self.weights, &window[..self.weights.len()])
    }
}

/// Four-lane dot product; the fixed association order keeps every caller
/// bit-identical.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (a4, a_tail) = a.split_at(a.len() - a.len() % 4);
    let (b4, b_tail) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a_tail.iter().zip(b_tail) {
        sum += x * y;
    }
    sum
}

/// `w_k = (1/dx) int_{k dx}^{(k+1) dx} w(y) dy`, integrated analytically.
pub fn discretize_kernel(spec: &KernelSpec, dx: f64) -> Result<KernelWeights> {
    spec.validate()?;
    if !(dx > 0.0) {
        return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
    }
    let n = support_cells(spec.eta, dx)?;
    let weights = match spec.kind {
        // Midpoint value is the exact cell average of an affine kernel.
        KernelKind::LinearDecreasing => {
            let eta = spec.eta;
            (0..n)
                .map(|k| 2.0 * (eta - (k as f64 + 0.5) * dx) / (eta * eta))
                .collect()
        }
        KernelKind::Constant => vec![1.0 / spec.eta; n],
        KernelKind::CustomPolynomial { .. } => (0..n)
            .map(|k| {
                let a = spec.antiderivative(k as f64 * dx);
                let b = spec.antiderivative((k + 1) as f64 * dx);
                ((b - a) / dx).max(0.0)
            })
            .collect(),
    };
    Ok(KernelWeights {
        weights,
        dx,
        eta: spec.eta,
        value_at_zero: spec.eval(0.0),
    })
}

/// Per-interface convolution values `R_{j+1/2}` for
/// `j = first_cell - 1 ..= last_cell`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionField {
    first: i64,
    values: Vec<f64>,
}

impl ConvolutionField {
    /// `R_{j+1/2}`.
    pub fn at(&self, j: i64) -> f64 {
        self.values[(j - self.first) as usize]
    }

    pub fn first_interface(&self) -> i64 {
        self.first
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cell values with one left ghost and `right` right ghosts from the
/// absorbing (zero-order extrapolation) policy.
pub(crate) fn padded(values: &[f64], right: usize) -> Vec<f64> {
    let first = values[0];
    let last = *values.last().expect("state has at least one cell");
    let mut out = Vec::with_capacity(values.len() + 1 + right);
    out.push(first);
    out.extend_from_slice(values);
    out.extend(std::iter::repeat_n(last, right));
    out
}

/// `R_{j+1/2}` for one interface; cells past the right boundary are filled
/// by the absorbing ghost policy.
pub fn convolve(state: &State, mesh: &Mesh, weights: &KernelWeights, j: i64) -> f64 {
    let values = state.values();
    let last = values.len() - 1;
    let window: Vec<f64> = (1..=weights.len() as i64)
        .map(|k| {
            let idx = (j + k - mesh.first_cell()).clamp(0, last as i64) as usize;
            values[idx]
        })
        .collect();
    weights.apply(&window)
}

pub(crate) fn convolve_padded(
    padded: &[f64],
    weights: &KernelWeights,
    first: i64,
    out_len: usize,
    exec: Execution,
) -> ConvolutionField {
    let mut values = vec![0.0; out_len];
    // Interface p (0-based) reads padded[p + 1 .. p + 1 + N].
    exec.fill(&mut values, |p| weights.apply(&padded[p + 1..]));
    ConvolutionField { first, values }
}

/// `R_{j+1/2}` at every interface a scheme step needs.
pub fn convolve_all(state: &State, mesh: &Mesh, weights: &KernelWeights) -> ConvolutionField {
    convolve_all_with(state, mesh, weights, Execution::default())
}

pub fn convolve_all_with(
    state: &State,
    mesh: &Mesh,
    weights: &KernelWeights,
    exec: Execution,
) -> ConvolutionField {
    let ext = padded(state.values(), weights.len());
    convolve_padded(&ext, weights, mesh.first_cell() - 1, mesh.len() + 1, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn linear_kernel_weights() {
        let w = discretize_kernel(&KernelSpec::linear(0.4), 0.1).unwrap();
        let expected = [4.375, 3.125, 1.875, 0.625];
        assert_eq!(w.len(), 4);
        for (a, b) in w.weights().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let mass: f64 = w.dx() * w.weights().iter().sum::<f64>();
        assert!((mass - 1.0).abs() < 1e-13);
        assert!((w.value_at_zero() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn linear_weights_match_quadrature_oracle() {
        let spec = KernelSpec::linear(0.4);
        let dx = 1.0 / 40.0;
        let w = discretize_kernel(&spec, dx).unwrap();
        for (k, wk) in w.weights().iter().enumerate() {
            let a = k as f64 * dx;
            let q = simpson(|y| 2.0 * (0.4 - y) / 0.16, a, a + dx, 64) / dx;
            assert!((wk - q).abs() < 1e-12);
        }
        assert!(w.weights().windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn constant_kernel_weights() {
        let w = discretize_kernel(&KernelSpec::constant(0.5), 0.05).unwrap();
        assert_eq!(w.len(), 10);
        assert!(w.weights().iter().all(|&v| v == 2.0));
        assert!((w.dx() * w.weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn divisibility_error() {
        let err = discretize_kernel(&KernelSpec::linear(0.4), 0.15).unwrap_err();
        match err {
            Error::Divisibility { nearest, .. } => assert!((nearest - 0.4 / 3.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn custom_polynomial_kernel() {
        // 3 (eta - y)^2 / eta^3 with eta = 1: 3 - 6 y + 3 y^2.
        let spec = KernelSpec::polynomial(1.0, vec![3.0, -6.0, 3.0]);
        let dx = 0.125;
        let w = discretize_kernel(&spec, dx).unwrap();
        for (k, wk) in w.weights().iter().enumerate() {
            let a = k as f64 * dx;
            let q = simpson(|y| 3.0 * (1.0 - y).powi(2), a, a + dx, 2) / dx;
            assert!((wk - q).abs() < 1e-13);
        }
        assert!((dx * w.weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn custom_kernel_validation() {
        // Increasing.
        assert!(KernelSpec::polynomial(1.0, vec![0.0, 2.0]).validate().is_err());
        // Not normalized.
        assert!(KernelSpec::polynomial(1.0, vec![1.0, -1.0]).validate().is_err());
        // Endpoint not zero (constant).
        assert!(KernelSpec::polynomial(1.0, vec![1.0]).validate().is_err());
        assert!(KernelSpec::polynomial(1.0, vec![2.0, -2.0]).validate().is_ok());
        assert!(KernelSpec::linear(0.0).validate().is_err());
    }

    #[test]
    fn convolution_normalization_and_two_term_case() {
        let mesh = Mesh::new(0.1, 3, 3).unwrap();
        let w = discretize_kernel(&KernelSpec::linear(0.2), 0.1).unwrap();
        let c = State::new(vec![0.3; 7], 0.0);
        for j in -4..=3 {
            assert!((convolve(&c, &mesh, &w, j) - 0.3).abs() < 1e-15);
        }
        let z = State::new(vec![0.0; 7], 0.0);
        assert_eq!(convolve(&z, &mesh, &w, 0), 0.0);

        let s = State::new(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7], 0.0);
        let (w0, w1) = (w.weights()[0], w.weights()[1]);
        // j = 0 reads cells 1, 2 at offsets 4, 5.
        let expected = 0.1 * (w0 * 0.5 + w1 * 0.6);
        assert!((convolve(&s, &mesh, &w, 0) - expected).abs() < 1e-15);
        // j = 2 reads cell 3 and one right ghost.
        let expected = 0.1 * (w0 * 0.7 + w1 * 0.7);
        assert!((convolve(&s, &mesh, &w, 2) - expected).abs() < 1e-15);
    }

    #[test]
    fn batched_matches_pointwise() {
        let mesh = Mesh::new(0.05, 20, 30).unwrap();
        let w = discretize_kernel(&KernelSpec::linear(0.35), 0.05).unwrap();
        let values: Vec<f64> = (0..mesh.len()).map(|i| ((i * 7919) % 101) as f64 / 100.0).collect();
        let s = State::new(values, 0.0);
        let field = convolve_all(&s, &mesh, &w);
        for j in mesh.first_cell() - 1..=mesh.last_cell() {
            assert_eq!(field.at(j).to_bits(), convolve(&s, &mesh, &w, j).to_bits());
        }
        let seq = convolve_all_with(&s, &mesh, &w, Execution::Sequential);
        assert_eq!(seq, field);
    }

    #[test]
    fn monotone_state_field_is_bounded() {
        let mesh = Mesh::new(0.1, 10, 10).unwrap();
        let w = discretize_kernel(&KernelSpec::linear(0.5), 0.1).unwrap();
        let values: Vec<f64> = (0..21).map(|i| 0.9 - 0.04 * i as f64).collect();
        let s = State::new(values, 0.0);
        let field = convolve_all(&s, &mesh, &w);
        let lo = s.min();
        let hi = s.max();
        assert!(field.values().iter().all(|&r| r >= lo - 1e-15 && r <= hi + 1e-15));
    }
}
