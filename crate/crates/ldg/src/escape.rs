//! The escape-into-third-dimension profile: ρ dΨ/dρ = cos Ψ on (0, 1],
//! solved by an implicit midpoint march from ρ = 1 inward, plus the angle
//! fields f = π/2 − Ψ(r sin φ), g = θ built from it.

use crate::error::SolverError;
use crate::field::{AngleField, ScalarField};
use crate::grid::SphericalGrid;
use crate::interp::lagrange4;

/// Tabulated solution of ρΨ′ = cos Ψ on [ρ_min, 1] with Ψ(1) given.
#[derive(Debug, Clone)]
pub struct EscapeProfile {
    /// Uniform ρ nodes, innermost first; ρ_min = 1/nodes.
    pub rho: Vec<f64>,
    pub psi: Vec<f64>,
    /// Boundary value Ψ(1).
    pub bc: f64,
    /// Largest midpoint-scheme residual left by the Newton solves.
    pub max_scheme_residual: f64,
}

/// Solves the escape ODE by an implicit midpoint scheme with a scalar Newton
/// solve per step, marching inward from ρ = 1. The singular point ρ = 0 is
/// never evaluated; the innermost node is ρ = 1/nodes.
pub fn solve_escape_profile(nodes: usize, bc: f64) -> Result<EscapeProfile, SolverError> {
    if nodes < 16 {
        return Err(SolverError::InvalidParameter(format!(
            "escape profile needs at least 16 nodes (got {nodes})"
        )));
    }
    let h = 1.0 / nodes as f64;
    let rho: Vec<f64> = (1..=nodes).map(|i| i as f64 * h).collect();
    let mut psi = vec![0.0; nodes];
    psi[nodes - 1] = bc;
    let mut max_residual = 0.0f64;

    for i in (0..nodes - 1).rev() {
        let r_hi = rho[i + 1];
        let r_mid = 0.5 * (rho[i] + r_hi);
        let p_hi = psi[i + 1];
        // midpoint relation: r_mid (p_hi − p_lo)/h = cos((p_hi + p_lo)/2)
        let mut p_lo = p_hi - h * ((p_hi).cos() / r_hi);
        let mut converged = false;
        for _ in 0..50 {
            let mid = 0.5 * (p_hi + p_lo);
            let f = r_mid * (p_hi - p_lo) / h - mid.cos();
            let df = -r_mid / h + 0.5 * mid.sin();
            let step = f / df;
            p_lo -= step;
            if step.abs() < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SolverError::NewtonDiverged {
                iterations: 50,
                best_residual: {
                    let mid = 0.5 * (p_hi + p_lo);
                    (r_mid * (p_hi - p_lo) / h - mid.cos()).abs()
                },
            });
        }
        let mid = 0.5 * (p_hi + p_lo);
        max_residual = max_residual.max((r_mid * (p_hi - p_lo) / h - mid.cos()).abs());
        psi[i] = p_lo;
    }

    Ok(EscapeProfile {
        rho,
        psi,
        bc,
        max_scheme_residual: max_residual,
    })
}

impl EscapeProfile {
    pub fn rho_min(&self) -> f64 {
        self.rho[0]
    }

    /// Ψ(ρ) by local cubic (4-point Lagrange) interpolation.
    pub fn eval(&self, rho: f64) -> Result<f64, SolverError> {
        let lo = self.rho_min();
        let hi = 1.0;
        if !(lo..=hi + 1e-12).contains(&rho) {
            return Err(SolverError::OutOfDomain { rho, lo, hi });
        }
        Ok(lagrange4(&self.rho, &self.psi, rho))
    }

    /// dΨ/dρ from the ODE itself: cos Ψ / ρ.
    pub fn eval_derivative(&self, rho: f64) -> Result<f64, SolverError> {
        Ok(self.eval(rho)?.cos() / rho)
    }
}

/// f = φ, g = θ: the radial-hedgehog director angles.
pub fn radial_hedgehog_angles(grid: &SphericalGrid) -> AngleField {
    let dims = [grid.nr, grid.nphi, grid.ntheta];
    AngleField {
        f: ScalarField::from_fn(dims, |_, j, _| grid.phi(j)),
        g: ScalarField::from_fn(dims, |_, _, k| grid.theta(k)),
    }
}

/// f = π/2 − Ψ(r sin φ), g = θ: the escape director angles. Every node must
/// satisfy r sin φ ∈ [ρ_min, 1].
pub fn escape_angles(
    grid: &SphericalGrid,
    profile: &EscapeProfile,
) -> Result<AngleField, SolverError> {
    let dims = [grid.nr, grid.nphi, grid.ntheta];
    let mut f = ScalarField::zeros(dims);
    let g = ScalarField::from_fn(dims, |_, _, k| grid.theta(k));
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            let rho = grid.r(i) * grid.phi(j).sin();
            let psi = profile.eval(rho)?;
            let val = std::f64::consts::FRAC_PI_2 - psi;
            for k in 0..dims[2] {
                f.set(i, j, k, val);
            }
        }
    }
    Ok(AngleField { f, g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::EscapeDirector;
    use approx::assert_relative_eq;

    #[test]
    fn matches_closed_form_branch() {
        // Ψ(1) = 0 branch is 2 arctan ρ − π/2.
        let profile = solve_escape_profile(20000, 0.0).unwrap();
        let exact = EscapeDirector::from_boundary(0.0);
        let mut worst = 0.0f64;
        for (rho, psi) in profile.rho.iter().zip(profile.psi.iter()) {
            worst = worst.max((psi - exact.psi(*rho)).abs());
        }
        assert!(worst < 1e-9, "max deviation {worst:.3e}");
        assert_relative_eq!(profile.eval(1.0).unwrap(), 0.0, epsilon = 1e-12);
        // dΨ/dρ at ρ = 1 equals cos Ψ(1) = 1.
        assert_relative_eq!(profile.eval_derivative(1.0).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn scheme_residual_small() {
        let profile = solve_escape_profile(512, 0.3).unwrap();
        assert!(profile.max_scheme_residual < 1e-12);
        // closed form for general bc
        let exact = EscapeDirector::from_boundary(0.3);
        let mid = profile.rho.len() / 2;
        assert_relative_eq!(
            profile.psi[mid],
            exact.psi(profile.rho[mid]),
            epsilon = 1e-5
        );
    }

    #[test]
    fn approaches_asymptote_inward() {
        // Ψ → −π/2 as ρ → 0 on the escaped branch.
        let profile = solve_escape_profile(4096, 0.0).unwrap();
        assert!((profile.psi[0] + std::f64::consts::FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn eval_rejects_out_of_domain() {
        let profile = solve_escape_profile(64, 0.0).unwrap();
        assert!(profile.eval(1.5).is_err());
        assert!(profile.eval(1e-4).is_err());
    }

    #[test]
    fn rejects_too_few_nodes() {
        assert!(solve_escape_profile(8, 0.0).is_err());
    }

    #[test]
    fn hedgehog_angles_give_radial_director() {
        let g = SphericalGrid::new(0.5, 2.0, 6, 8, 8).unwrap();
        let angles = radial_hedgehog_angles(&g);
        for i in 0..g.nr {
            for j in 0..g.nphi {
                for k in 0..g.ntheta {
                    let n = angles.frame_at(i, j, k).n;
                    let x = g.coord(i, j, k);
                    assert!((n - x / x.norm()).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn escape_angles_match_formula() {
        let g = SphericalGrid::new(0.2, 0.9, 6, 8, 8).unwrap();
        let profile = solve_escape_profile(4096, 0.0).unwrap();
        let angles = escape_angles(&g, &profile).unwrap();
        // at the equator, f = π/2 − Ψ(r)
        let j = g.nphi / 2;
        for i in 0..g.nr {
            let rho = g.r(i) * g.phi(j).sin();
            let expect = std::f64::consts::FRAC_PI_2 - profile.eval(rho).unwrap();
            assert_relative_eq!(angles.f.get(i, j, 0), expect, epsilon = 1e-12);
        }
    }
}
