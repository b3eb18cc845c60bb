//! Benchmark systems: residual forms, initial conditions, boundary
//! operators, domains and constants.
//!
//! All systems live on `x in [0, 2*pi]`, `t in [0, T]` and have the
//! first-order-in-time form `du/dt = f(d2u/dx2, du/dx, u)`:
//!
//! * convection:          `du/dt = -beta * du/dx`
//! * reaction:            `du/dt = rho * u * (1 - u)`
//! * reaction-diffusion:  `du/dt = nu * d2u/dx2 + rho * u * (1 - u)`
//! * diffusion:           `du/dt = (1/d^2) * d2u/dx2`

use crate::autodiff::{evaluate_jet, Jet};
use crate::domain::Domain;
use crate::error::{CoreError, Result};
use crate::network::Mlp;
use crate::scalar::Scalar;

/// Which benchmark system a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeKind {
    Convection,
    Reaction,
    ReactionDiffusion,
    Diffusion,
}

/// Boundary operator shape at `x = x_min` / `x = x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    /// `u(x_min, t) = u(x_max, t)`
    PeriodicValue,
    /// periodic in value and slope
    PeriodicValueAndSlope,
    /// `u(x_min, t) = u(x_max, t) = 0`
    DirichletZero,
}

impl BcKind {
    /// Number of residual components per boundary time sample.
    pub fn components(self) -> usize {
        match self {
            BcKind::PeriodicValue => 1,
            BcKind::PeriodicValueAndSlope => 2,
            BcKind::DirichletZero => 2,
        }
    }
}

/// System constants; only the constants a kind uses are present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum System<S> {
    Convection { beta: S },
    Reaction { rho: S },
    ReactionDiffusion { rho: S, nu: S },
    Diffusion { d: S },
}

/// A fully specified benchmark problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSpec<S> {
    pub system: System<S>,
    pub domain: Domain<S>,
    pub bc: BcKind,
}

fn positive<S: Scalar>(name: &str, v: S) -> Result<S> {
    if v > S::zero() && v.is_finite() {
        Ok(v)
    } else {
        Err(CoreError::Config(format!(
            "constant {name} must be strictly positive and finite, got {v}"
        )))
    }
}

impl<S: Scalar> PdeSpec<S> {
    pub fn convection(beta: S, t_max: S) -> Result<Self> {
        Ok(Self {
            system: System::Convection {
                beta: positive("beta", beta)?,
            },
            domain: Domain::standard(t_max)?,
            bc: BcKind::PeriodicValue,
        })
    }

    pub fn reaction(rho: S, t_max: S) -> Result<Self> {
        Ok(Self {
            system: System::Reaction {
                rho: positive("rho", rho)?,
            },
            domain: Domain::standard(t_max)?,
            bc: BcKind::PeriodicValue,
        })
    }

    pub fn reaction_diffusion(rho: S, nu: S, t_max: S) -> Result<Self> {
        Ok(Self {
            system: System::ReactionDiffusion {
                rho: positive("rho", rho)?,
                nu: positive("nu", nu)?,
            },
            domain: Domain::standard(t_max)?,
            bc: BcKind::PeriodicValueAndSlope,
        })
    }

    pub fn diffusion(d: S, dirichlet: bool, t_max: S) -> Result<Self> {
        Ok(Self {
            system: System::Diffusion {
                d: positive("d", d)?,
            },
            domain: Domain::standard(t_max)?,
            bc: if dirichlet {
                BcKind::DirichletZero
            } else {
                BcKind::PeriodicValueAndSlope
            },
        })
    }

    pub fn kind(&self) -> PdeKind {
        match self.system {
            System::Convection { .. } => PdeKind::Convection,
            System::Reaction { .. } => PdeKind::Reaction,
            System::ReactionDiffusion { .. } => PdeKind::ReactionDiffusion,
            System::Diffusion { .. } => PdeKind::Diffusion,
        }
    }
}

/// PDE defect `du/dt - f(d2u/dx2, du/dx, u)` of a jet.
#[inline]
pub fn residual<S: Scalar>(spec: &PdeSpec<S>, jet: &Jet<S>) -> S {
    match spec.system {
        System::Convection { beta } => jet.ut + beta * jet.ux,
        System::Reaction { rho } => jet.ut - rho * jet.u * (S::one() - jet.u),
        System::ReactionDiffusion { rho, nu } => {
            jet.ut - nu * jet.uxx - rho * jet.u * (S::one() - jet.u)
        }
        System::Diffusion { d } => jet.ut - jet.uxx / (d * d),
    }
}

/// Partial derivatives of the residual with respect to the jet fields.
#[inline]
pub fn residual_jet_adjoint<S: Scalar>(spec: &PdeSpec<S>, jet: &Jet<S>) -> Jet<S> {
    let two = S::from_f64(2.0);
    match spec.system {
        System::Convection { beta } => Jet::new(S::zero(), beta, S::one(), S::zero()),
        System::Reaction { rho } => Jet::new(
            -rho * (S::one() - two * jet.u),
            S::zero(),
            S::one(),
            S::zero(),
        ),
        System::ReactionDiffusion { rho, nu } => Jet::new(
            -rho * (S::one() - two * jet.u),
            S::zero(),
            S::one(),
            -nu,
        ),
        System::Diffusion { d } => Jet::new(S::zero(), S::zero(), S::one(), -(d * d).recip()),
    }
}

/// Initial condition `u0(x)` of the system.
#[inline]
pub fn initial_value<S: Scalar>(spec: &PdeSpec<S>, x: S) -> S {
    match spec.system {
        System::Convection { .. } => x.sin(),
        System::Reaction { .. } | System::ReactionDiffusion { .. } => gaussian_bump(x),
        System::Diffusion { d } => (d * x).sin(),
    }
}

/// `exp(-8 (x - pi)^2 / pi^2)`, the reaction-family initial condition.
#[inline]
pub fn gaussian_bump<S: Scalar>(x: S) -> S {
    let pi = S::PI();
    let z = x - pi;
    (S::from_f64(-8.0) * z * z / (pi * pi)).exp()
}

/// Boundary residual components of `g` at the given jets.
///
/// `left`/`right` are the jets at `(x_min, t)` and `(x_max, t)`.
#[inline]
pub fn boundary_components<S: Scalar>(bc: BcKind, left: &Jet<S>, right: &Jet<S>) -> [S; 2] {
    match bc {
        BcKind::PeriodicValue => [left.u - right.u, S::zero()],
        BcKind::PeriodicValueAndSlope => [left.u - right.u, left.ux - right.ux],
        BcKind::DirichletZero => [left.u, right.u],
    }
}

/// Evaluate the boundary residual vector of a network at one boundary time.
pub fn boundary_residuals<S: Scalar>(spec: &PdeSpec<S>, net: &Mlp<S>, t: S) -> Result<Vec<S>> {
    let left = evaluate_jet(net, spec.domain.x_min, t)?;
    let right = evaluate_jet(net, spec.domain.x_max, t)?;
    let comps = boundary_components(spec.bc, &left, &right);
    Ok(comps[..spec.bc.components()].to_vec())
}
