//! Upwind finite-volume solver for a 1D non-local traffic model whose flux
//! changes at `x = 0`, with a local Godunov oracle, runtime diagnostics and
//! canned numerical experiments.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod godunov;
pub mod kernel;
pub mod mesh;
pub mod model;
pub mod scheme;

pub use error::{Error, Result};
pub use exec::Execution;
pub use kernel::{discretize_kernel, ConvolutionField, KernelKind, KernelSpec, KernelWeights};
pub use mesh::{project_initial_datum, Mesh, PiecewiseConstant, TimeGrid};
pub use model::{CflMode, FluxSide, ModelSpec, Profile};
pub use scheme::{Scheme, State, StepObserver};
