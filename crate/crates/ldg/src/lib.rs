//! Landau-de Gennes Q-tensor numerics: symmetric-traceless tensor algebra,
//! bulk/elastic energies, director-field constructors, Euler-Lagrange residual
//! evaluators (isotropic and elastically anisotropic), and the constructive
//! solvers (radial-hedgehog boundary-value problem, escape-profile ODE,
//! order-parameter fitting, gradient-flow minimization).
//!
//! Everything works in the reduced variables of the dimensionless functional
//!
//! ```text
//! F[Q] = ∫ (t/2) tr Q² − √6 tr Q³ + (1/2)(tr Q²)² + (1/2)|∇Q|²
//!        + (L2/2) (div Q)² dx
//! ```
//!
//! with reduced temperature t and elastic anisotropy L2.

pub mod error;
pub mod tensor;
pub mod model;
pub mod field;
pub mod grid;
pub mod analytic;
pub mod escape;
pub mod residual;
pub mod projection;
pub mod interp;
pub mod hedgehog;
pub mod euler_ode;
pub mod flow;
pub mod fit;
pub mod audit;
pub mod report;
pub mod suite;

pub use error::{GridError, ModelError, ResidualError, SolverError, TensorError};
