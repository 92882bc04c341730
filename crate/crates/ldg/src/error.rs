//! Error types shared across the crate.

use thiserror::Error;

/// Errors from symmetric-traceless tensor operations.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum TensorError {
    #[error("input matrix is not symmetric (max asymmetry {asymmetry:.3e} vs norm {norm:.3e})")]
    NotSymmetric { asymmetry: f64, norm: f64 },
    #[error("input matrix is not traceless (|tr| = {trace:.3e} vs norm {norm:.3e})")]
    NotTraceless { trace: f64, norm: f64 },
    #[error("director is not a unit vector (|n| = {norm})")]
    NonUnitDirector { norm: f64 },
    #[error("tensor is genuinely biaxial (beta_tilde/|Q|^6 = {relative_biaxiality:.3e} exceeds tolerance {tolerance:.3e})")]
    BiaxialInput {
        relative_biaxiality: f64,
        tolerance: f64,
    },
    #[error("frame vectors are not orthonormal (max deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
}

/// Errors from model-parameter handling.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("material constant {name} must be positive (got {value})")]
    NonPositiveConstant { name: &'static str, value: f64 },
    #[error("reduced temperature t = {t} exceeds 9/8; s_plus is undefined")]
    TemperatureAboveSpinodal { t: f64 },
    #[error("elastic anisotropy L2 = {l2} violates 1 + (2/3)L2 > 0; the anisotropic operator loses ellipticity")]
    EllipticityLost { l2: f64 },
    #[error("parameter {name} is not finite")]
    NotFinite { name: &'static str },
}

/// Errors from grid construction and discrete operators.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum GridError {
    #[error("grid axis {axis} needs at least {required} nodes (got {got})")]
    TooFewNodes {
        axis: &'static str,
        required: usize,
        got: usize,
    },
    #[error("spherical grid needs r_inner > 0 and r_outer > r_inner (got [{r_inner}, {r_outer}])")]
    BadRadialExtent { r_inner: f64, r_outer: f64 },
    #[error("spherical grid needs an even theta node count for pole crossing (got {got})")]
    OddThetaCount { got: usize },
    #[error("grid spacing must be positive on axis {axis}")]
    BadSpacing { axis: &'static str },
    #[error("field length {field_len} does not match grid size {grid_len}")]
    DimensionMismatch { field_len: usize, grid_len: usize },
}

/// Errors from the ODE/BVP/flow solvers.
#[derive(Error, Debug)]
pub enum SolverError {
    #[error("Newton iteration diverged after {iterations} steps (best residual {best_residual:.3e})")]
    NewtonDiverged {
        iterations: usize,
        best_residual: f64,
    },
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
    #[error("escape profile evaluated outside its domain [{lo}, {hi}] (rho = {rho})")]
    OutOfDomain { rho: f64, lo: f64, hi: f64 },
    #[error("descent step underflow at iteration {iteration}: direction is not a descent direction")]
    StepUnderflow { iteration: usize },
    #[error("Gauss-Newton stagnated at normalized residual {residual:.3e} after {iterations} iterations")]
    GaussNewtonStagnated { iterations: usize, residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Errors from residual evaluators and projections.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum ResidualError {
    #[error("separated-coefficient fit residual {residual:.3e} exceeds 1e-8: input director is not s-independent")]
    StructureViolated { residual: f64 },
    #[error("director field is not unit length (max | |n|^2 - 1 | = {deviation:.3e})")]
    NonUnitDirectorField { deviation: f64 },
    #[error("sin(phi) = {value:.3e} below threshold at an evaluation node")]
    PolarSingularity { value: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}
