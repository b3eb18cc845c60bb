//! Ensemble-trained physics-informed neural networks with agreement-gated
//! domain expansion, plus vanilla, time-marching and causality-weighted
//! baselines, evaluated against analytic/numerical reference solutions.
//!
//! The math layers are generic over the floating-point scalar (see
//! [`scalar::Scalar`]); the experiment layers and all shipped binaries use
//! `f64` (second-derivative chains amplify rounding, and the target error
//! levels need the headroom). Concrete aliases are exported below.

pub mod autodiff;
pub mod domain;
pub mod error;
mod kernels;
pub mod network;
pub mod pde;
pub mod rng;
pub mod scalar;

pub use autodiff::{evaluate_jet, evaluate_jets, loss_gradient, GradientEngine};
pub use error::{CoreError, Result};
pub use network::DEFAULT_WIDTHS;
pub use rng::SeededRng;

/// `f64` jet, the type used by the experiment layer.
pub type Jet64 = autodiff::Jet<f64>;
/// `f32` jet.
pub type Jet32 = autodiff::Jet<f32>;
/// `f64` network.
pub type Mlp64 = network::Mlp<f64>;
/// `f64` domain box.
pub type Domain64 = domain::Domain<f64>;
/// `f64` benchmark problem description.
pub type PdeSpec64 = pde::PdeSpec<f64>;
