//! Least-squares fitting of the scalar order parameter for a prescribed
//! director: minimizes the residuals of the (s, n) system over s with n
//! fixed, by Gauss-Newton on the grid unknowns.
//!
//! For an admissible director (radial hedgehog) the normalized residual
//! vanishes under refinement and the fit recovers the radial profile; for
//! the escape director no nontrivial s is compatible and the normalized
//! residual stays bounded away from zero — the fit measures that floor.

use crate::analytic::AnalyticDirector;
use crate::error::SolverError;
use crate::field::ScalarField;
use crate::grid::DiffGrid;
use crate::model::{psi, psi_prime};
use crate::tensor::Vec3;

/// Outcome of the order-parameter fit.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub s: ScalarField,
    /// RMS of the (s, n) residuals divided by max(RMS(s), 0.01·s_scale) at
    /// the final iterate.
    pub normalized_residual: f64,
    /// Smallest normalized residual seen over all Gauss-Newton iterates.
    pub min_iterate_residual: f64,
    pub gauss_newton_iterations: usize,
    pub converged: bool,
}

struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    rows: usize,
    cols_n: usize,
}

impl Csr {
    fn from_triplets(rows: usize, cols_n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Csr {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets.iter() {
            if !cols.is_empty() && row_ptr[r + 1] > row_ptr[r] && *cols.last().unwrap() == c
                && row_ptr[r + 1] == cols.len()
            {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] = cols.len();
            }
        }
        // prefix-fill empty rows
        for r in 0..rows {
            if row_ptr[r + 1] < row_ptr[r] {
                row_ptr[r + 1] = row_ptr[r];
            }
            row_ptr[r + 1] = row_ptr[r + 1].max(row_ptr[r]);
        }
        Csr {
            row_ptr,
            cols,
            vals,
            rows,
            cols_n,
        }
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.rows {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            out[r] = acc;
        }
    }

    fn matvec_t(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.rows {
            let yr = y[r];
            if yr == 0.0 {
                continue;
            }
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.cols[p]] += self.vals[p] * yr;
            }
        }
    }

    fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols_n];
        for (c, v) in self.cols.iter().zip(self.vals.iter()) {
            out[*c] += v * v;
        }
        out
    }
}

/// Precomputed director data and the linear part of the residual map.
struct FitSystem {
    a: Csr,
    /// constant contribution per row (Dirichlet boundary values).
    c: Vec<f64>,
    /// free-node flat indices; row r < n_free is the scalar equation of
    /// free node r.
    free_nodes: Vec<usize>,
    n_free: usize,
}

fn build_system(
    grid: &impl DiffGrid,
    director: &impl AnalyticDirector,
    boundary: &ScalarField,
) -> FitSystem {
    let dims = grid.dims();
    let total = dims[0] * dims[1] * dims[2];
    let mut free_of = vec![usize::MAX; total];
    let mut free_nodes = Vec::new();
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                if grid.is_interior(i, j, k, 1) {
                    let idx = (i * dims[1] + j) * dims[2] + k;
                    free_of[idx] = free_nodes.len();
                    free_nodes.push(idx);
                }
            }
        }
    }
    let n_free = free_nodes.len();
    let rows = 4 * n_free;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut cvec = vec![0.0; rows];

    let mut row = 0usize;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                if !grid.is_interior(i, j, k, 1) {
                    continue;
                }
                let x = grid.position(i, j, k);
                let nv = director.director(&x);
                let gn = director.grad(&x);
                let ln = director.laplacian_n(&x);
                let gn2 = gn.norm_squared();

                // scalar equation: Δs − 3|∇n|² s (ψ handled separately)
                grid.visit_laplacian_stencil(i, j, k, &mut |m, coeff| {
                    if free_of[m] != usize::MAX {
                        triplets.push((row, free_of[m], coeff));
                    } else {
                        cvec[row] += coeff * boundary.data[m];
                    }
                });
                let center = (i * dims[1] + j) * dims[2] + k;
                triplets.push((row, free_of[center], -3.0 * gn2));

                // vector equations: s(Δn_c + |∇n|² n_c) + 2 (∇n ∇s)_c
                for comp in 0..3 {
                    let vrow = row + (comp + 1) * n_free;
                    triplets.push((vrow, free_of[center], ln[comp] + gn2 * nv[comp]));
                    let grow = Vec3::new(gn[(comp, 0)], gn[(comp, 1)], gn[(comp, 2)]);
                    grid.visit_gradient_stencil(i, j, k, &mut |m, cvec3| {
                        let coeff = 2.0 * grow.dot(&cvec3);
                        if free_of[m] != usize::MAX {
                            triplets.push((vrow, free_of[m], coeff));
                        } else {
                            cvec[vrow] += coeff * boundary.data[m];
                        }
                    });
                }
                row += 1;
            }
        }
    }

    FitSystem {
        a: Csr::from_triplets(rows, n_free, &mut triplets),
        c: cvec,
        free_nodes,
        n_free,
    }
}

impl FitSystem {
    /// residual R(s) with the cubic ψ on the scalar block.
    fn residual(&self, s_free: &[f64], t: f64, out: &mut [f64]) {
        self.a.matvec(s_free, out);
        for (r, (o, c)) in out.iter_mut().zip(self.c.iter()).enumerate() {
            *o += c;
            if r < self.n_free {
                *o -= psi(s_free[r], t);
            }
        }
    }

    /// J x with J = A − diag(ψ′(s)) on the scalar block.
    fn jac_vec(&self, s_free: &[f64], t: f64, x: &[f64], out: &mut [f64]) {
        self.a.matvec(x, out);
        for r in 0..self.n_free {
            out[r] -= psi_prime(s_free[r], t) * x[r];
        }
    }

    fn jac_t_vec(&self, s_free: &[f64], t: f64, y: &[f64], out: &mut [f64]) {
        self.a.matvec_t(y, out);
        for r in 0..self.n_free {
            out[r] -= psi_prime(s_free[r], t) * y[r];
        }
    }
}

/// Conjugate gradient on the Gauss-Newton normal equations JᵀJ δ = −JᵀR.
#[allow(clippy::too_many_arguments)]
fn solve_normal_equations(
    sys: &FitSystem,
    s_free: &[f64],
    t: f64,
    rhs: &[f64],
    precond: &[f64],
    tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let n = sys.n_free;
    let rows = sys.a.rows;
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(precond.iter()).map(|(a, m)| a / m).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut jp = vec![0.0; rows];
    let mut jtjp = vec![0.0; n];
    for _ in 0..max_iter {
        sys.jac_vec(s_free, t, &p, &mut jp);
        sys.jac_t_vec(s_free, t, &jp, &mut jtjp);
        let pap: f64 = p.iter().zip(jtjp.iter()).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * jtjp[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm < tol * rhs_norm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / precond[i];
        }
        let rz_new: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Fits s to the (s, n) system for a fixed director, with Dirichlet data
/// `boundary` on non-interior nodes and `s_scale` setting the triviality
/// floor of the normalization (use s₊(t)).
pub fn fit_order_parameter(
    grid: &impl DiffGrid,
    director: &impl AnalyticDirector,
    t: f64,
    boundary: &ScalarField,
    initial: &ScalarField,
    s_scale: f64,
) -> Result<FitOutcome, SolverError> {
    let dims = grid.dims();
    if boundary.dims != dims || initial.dims != dims {
        return Err(SolverError::InvalidParameter(
            "boundary/initial dimensions do not match the grid".into(),
        ));
    }
    let sys = build_system(grid, director, boundary);
    let n = sys.n_free;
    if n == 0 {
        return Err(SolverError::InvalidParameter("no interior nodes".into()));
    }
    let rows = sys.a.rows;

    let mut s_free: Vec<f64> = sys.free_nodes.iter().map(|&m| initial.data[m]).collect();
    let mut residual = vec![0.0; rows];
    let mut grad = vec![0.0; n];

    // Jacobi preconditioner from the linear part's column norms.
    let mut precond = sys.a.column_sq_norms();
    for p in &mut precond {
        *p = p.max(1e-12);
    }

    let normalized = |s_free: &[f64], res: &[f64]| -> f64 {
        let rms_r = (res.iter().map(|v| v * v).sum::<f64>() / rows as f64).sqrt();
        let mut s_sq = 0.0;
        for v in s_free {
            s_sq += v * v;
        }
        // boundary values participate in the s scale
        let total = grid.len();
        let mut bc_sq = 0.0;
        for idx in 0..total {
            if !sys.free_nodes.binary_search(&idx).is_ok() {
                bc_sq += boundary.data[idx] * boundary.data[idx];
            }
        }
        let rms_s = ((s_sq + bc_sq) / total as f64).sqrt();
        rms_r / rms_s.max(0.01 * s_scale)
    };

    sys.residual(&s_free, t, &mut residual);
    let mut norm_res = normalized(&s_free, &residual);
    let mut min_iterate = norm_res;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..30 {
        iterations = iter + 1;
        // rhs = −JᵀR
        sys.jac_t_vec(&s_free, t, &residual, &mut grad);
        let grad_norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        let res_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm < 1e-12 * (1.0 + res_norm) {
            converged = true;
            break;
        }
        let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        let delta = solve_normal_equations(&sys, &s_free, t, &rhs, &precond, 1e-8, 4000);

        // damped update
        let mut alpha = 1.0;
        let mut improved = false;
        let mut trial = vec![0.0; n];
        let mut trial_res = vec![0.0; rows];
        for _ in 0..20 {
            for i in 0..n {
                trial[i] = s_free[i] + alpha * delta[i];
            }
            sys.residual(&trial, t, &mut trial_res);
            let new_norm = trial_res.iter().map(|v| v * v).sum::<f64>().sqrt();
            if new_norm < res_norm * (1.0 - 1e-4 * alpha) {
                s_free.copy_from_slice(&trial);
                residual.copy_from_slice(&trial_res);
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        norm_res = normalized(&s_free, &residual);
        min_iterate = min_iterate.min(norm_res);
        if !improved {
            // stationary point of the least-squares objective
            converged = true;
            break;
        }
        let res_new = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (res_norm - res_new).abs() < 1e-12 * res_norm.max(1e-300) {
            converged = true;
            break;
        }
    }

    let mut s_out = boundary.clone();
    for (slot, &m) in s_free.iter().zip(sys.free_nodes.iter()) {
        s_out.data[m] = *slot;
    }
    Ok(FitOutcome {
        s: s_out,
        normalized_residual: norm_res,
        min_iterate_residual: min_iterate,
        gauss_newton_iterations: iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{ConstantDirector, EscapeDirector, RadialDirector};
    use crate::grid::{CartesianGrid, SphericalGrid};
    use crate::hedgehog::{solve_radial_bvp, RadialBvp};
    use crate::model::s_plus;

    #[test]
    fn radial_director_fit_recovers_ode_profile() {
        let t = 0.0;
        let sp = s_plus(t).unwrap();
        let grid = SphericalGrid::new(1.5, 4.5, 36, 10, 12).unwrap();
        let dims = grid.dims();
        let boundary = ScalarField::from_fn(dims, |_, _, _| sp);
        let out = fit_order_parameter(&grid, &RadialDirector, t, &boundary, &boundary, sp)
            .unwrap();
        assert!(out.converged);
        // oracle: the radial BVP with the same Dirichlet data
        let bvp = RadialBvp {
            t,
            l2: 0.0,
            r_inner: 1.5,
            r_outer: 4.5,
            inner_value: sp,
            outer_value: sp,
            nodes: 2001,
        };
        let oracle = solve_radial_bvp(&bvp, |_| sp).unwrap();
        let mut worst = 0.0f64;
        for i in 0..grid.nr {
            for j in 0..grid.nphi {
                for k in 0..grid.ntheta {
                    worst = worst
                        .max((out.s.get(i, j, k) - oracle.eval(grid.r(i))).abs());
                }
            }
        }
        assert!(worst / sp < 5e-3, "fit vs ODE profile: {:.3e}", worst / sp);
        assert!(
            out.normalized_residual < 0.05,
            "radial normalized residual {:.3e}",
            out.normalized_residual
        );
    }

    #[test]
    fn radial_fit_profile_error_decays_under_refinement() {
        // For the radial director the discrete system is exactly solvable
        // (the fit residual is machine zero at any resolution); the distance
        // to the continuum ODE profile is what refines away.
        let t = 0.0;
        let sp = s_plus(t).unwrap();
        let bvp = RadialBvp {
            t,
            l2: 0.0,
            r_inner: 1.5,
            r_outer: 4.5,
            inner_value: sp,
            outer_value: sp,
            nodes: 3001,
        };
        let oracle = solve_radial_bvp(&bvp, |_| sp).unwrap();
        let err_of = |nr: usize| -> f64 {
            let grid = SphericalGrid::new(1.5, 4.5, nr, 6, 8).unwrap();
            let boundary = ScalarField::from_fn(grid.dims(), |_, _, _| sp);
            let out = fit_order_parameter(&grid, &RadialDirector, t, &boundary, &boundary, sp)
                .unwrap();
            assert!(
                out.normalized_residual < 1e-9,
                "radial fit residual should be machine-level, got {:.3e}",
                out.normalized_residual
            );
            let mut worst = 0.0f64;
            for i in 0..grid.nr {
                worst = worst.max((out.s.get(i, 2, 3) - oracle.eval(grid.r(i))).abs());
            }
            worst
        };
        let e1 = err_of(20);
        let e2 = err_of(40);
        assert!(
            e2 < 0.4 * e1,
            "profile error did not refine: {e1:.3e} -> {e2:.3e}"
        );
    }

    #[test]
    fn escape_director_fit_has_residual_floor() {
        let t = 1.0;
        let sp = s_plus(t).unwrap();
        // box inside the unit cylinder, away from the axis
        let grid = CartesianGrid::new([0.15, 0.12, 0.0], [0.55, 0.45, 0.6], [14, 12, 12])
            .unwrap();
        let dims = grid.dims();
        let boundary = ScalarField::from_fn(dims, |_, _, _| sp);
        let escape = EscapeDirector::from_boundary(0.0);
        let out =
            fit_order_parameter(&grid, &escape, t, &boundary, &boundary, sp).unwrap();
        assert!(
            out.min_iterate_residual > 0.01,
            "escape floor {:.3e} should exceed 0.01",
            out.min_iterate_residual
        );
    }

    #[test]
    fn constant_director_fit_solves_laplace_like_problem() {
        // constant n: residuals reduce to Δs = ψ(s) plus zero vector block.
        let t = 0.2;
        let sp = s_plus(t).unwrap();
        let grid = CartesianGrid::cube(0.0, 1.0, 12).unwrap();
        let boundary = ScalarField::from_fn(grid.dims(), |_, _, _| sp);
        let out = fit_order_parameter(
            &grid,
            &ConstantDirector(Vec3::z()),
            t,
            &boundary,
            &boundary,
            sp,
        )
        .unwrap();
        // s ≡ s₊ solves Δs = ψ(s) with this boundary data
        for v in &out.s.data {
            assert!((v - sp).abs() < 1e-8, "constant fit drifted: {v}");
        }
        assert!(out.normalized_residual < 1e-10);
    }
}
