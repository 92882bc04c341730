//! Structured grids and second-order finite-difference operators.
//!
//! Two grid types: a uniform Cartesian box and a spherical-shell grid
//! (r, φ, θ) with x = (r cosθ sinφ, r sinθ sinφ, r cosφ). The spherical grid
//! excludes the poles by half a cell; θ is periodic, and stencils cross the
//! poles by the exact identity u(r, −φ, θ) = u(r, φ, θ+π) valid for any
//! single-valued field of position. Radial boundaries use one-sided
//! second-order closures when no Dirichlet data applies.

use crate::error::GridError;
use crate::field::{ScalarField, SymTensorField, VectorField3};
use crate::tensor::{Mat3, Vec3};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGrid {
    pub n: [usize; 3],
    pub origin: [f64; 3],
    pub h: [f64; 3],
}

impl CartesianGrid {
    pub fn new(origin: [f64; 3], extent: [f64; 3], n: [usize; 3]) -> Result<Self, GridError> {
        for (axis, (&count, name)) in n.iter().zip(["x", "y", "z"]).enumerate() {
            if count < 4 {
                return Err(GridError::TooFewNodes {
                    axis: ["x", "y", "z"][axis],
                    required: 4,
                    got: count,
                });
            }
            if extent[axis] <= 0.0 {
                return Err(GridError::BadSpacing { axis: name });
            }
        }
        let h = std::array::from_fn(|a| extent[a] / (n[a] - 1) as f64);
        Ok(CartesianGrid { n, origin, h })
    }

    /// Cube [lo, hi]³ with the same node count per axis.
    pub fn cube(lo: f64, hi: f64, nodes: usize) -> Result<Self, GridError> {
        Self::new([lo; 3], [hi - lo; 3], [nodes; 3])
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + i as f64 * self.h[0],
            self.origin[1] + j as f64 * self.h[1],
            self.origin[2] + k as f64 * self.h[2],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalGrid {
    pub nr: usize,
    pub nphi: usize,
    pub ntheta: usize,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl SphericalGrid {
    pub fn new(
        r_inner: f64,
        r_outer: f64,
        nr: usize,
        nphi: usize,
        ntheta: usize,
    ) -> Result<Self, GridError> {
        if r_inner <= 0.0 || r_outer <= r_inner {
            return Err(GridError::BadRadialExtent { r_inner, r_outer });
        }
        for (name, count) in [("r", nr), ("phi", nphi), ("theta", ntheta)] {
            if count < 4 {
                return Err(GridError::TooFewNodes {
                    axis: name,
                    required: 4,
                    got: count,
                });
            }
        }
        if ntheta % 2 != 0 {
            return Err(GridError::OddThetaCount { got: ntheta });
        }
        Ok(SphericalGrid {
            nr,
            nphi,
            ntheta,
            r_inner,
            r_outer,
        })
    }

    #[inline]
    pub fn dr(&self) -> f64 {
        (self.r_outer - self.r_inner) / (self.nr - 1) as f64
    }

    #[inline]
    pub fn dphi(&self) -> f64 {
        PI / self.nphi as f64
    }

    #[inline]
    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r_inner + i as f64 * self.dr()
    }

    /// φ nodes exclude the poles by half a cell: φ_j = (j + 1/2) π / nφ.
    #[inline]
    pub fn phi(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dphi()
    }

    #[inline]
    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.dtheta()
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let r = self.r(i);
        let (sp, cp) = self.phi(j).sin_cos();
        let (st, ct) = self.theta(k).sin_cos();
        Vec3::new(r * ct * sp, r * st * sp, r * cp)
    }

    /// Maps an out-of-range (φ index, θ index) pair across the poles /
    /// the periodic seam, for fields that are single-valued in space.
    #[inline]
    pub fn wrap_angular(&self, j: i64, k: i64) -> (usize, usize) {
        let nphi = self.nphi as i64;
        let ntheta = self.ntheta as i64;
        let (j2, shift) = if j < 0 {
            (-1 - j, ntheta / 2)
        } else if j >= nphi {
            (2 * nphi - 1 - j, ntheta / 2)
        } else {
            (j, 0)
        };
        debug_assert!((0..nphi).contains(&j2));
        let k2 = (k + shift).rem_euclid(ntheta);
        (j2 as usize, k2 as usize)
    }

    /// Field value with angular wrapping; `i` must be a valid r index.
    #[inline]
    pub fn sample(&self, f: &ScalarField, i: usize, j: i64, k: i64) -> f64 {
        let (j2, k2) = self.wrap_angular(j, k);
        f.get(i, j2, k2)
    }
}

/// Second-order discrete calculus shared by both grid types.
pub trait DiffGrid: Sync {
    fn dims(&self) -> [usize; 3];
    fn position(&self, i: usize, j: usize, k: usize) -> Vec3;
    fn volume_weight(&self, i: usize, j: usize, k: usize) -> f64;
    /// Nodes at least `margin` layers away from every non-periodic boundary.
    fn is_interior(&self, i: usize, j: usize, k: usize, margin: usize) -> bool;
    fn laplacian(&self, f: &ScalarField) -> ScalarField;
    /// Cartesian gradient components (∂x, ∂y, ∂z).
    fn cart_gradient(&self, f: &ScalarField) -> VectorField3;
    /// Cartesian Hessian (xx, yy, zz, xy, xz, yz).
    fn cart_hessian(&self, f: &ScalarField) -> SymTensorField;
    /// Laplacian stencil of an interior node (margin ≥ 1) as
    /// (flat neighbor index, coefficient) pairs.
    fn visit_laplacian_stencil(&self, i: usize, j: usize, k: usize, visit: &mut dyn FnMut(usize, f64));
    /// Cartesian-gradient stencil of an interior node: (flat neighbor index,
    /// contribution vector c) with ∂ₐf(node) = Σ c[a]·f(neighbor).
    fn visit_gradient_stencil(&self, i: usize, j: usize, k: usize, visit: &mut dyn FnMut(usize, Vec3));

    fn len(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[inline]
fn split_idx(dims: [usize; 3], idx: usize) -> (usize, usize, usize) {
    let k = idx % dims[2];
    let j = (idx / dims[2]) % dims[1];
    let i = idx / (dims[1] * dims[2]);
    (i, j, k)
}

/// Applies `f(i, j, k) -> f64` over all nodes in parallel.
fn par_fill(dims: [usize; 3], f: impl Fn(usize, usize, usize) -> f64 + Sync) -> ScalarField {
    let mut out = ScalarField::zeros(dims);
    out.data
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, slot)| {
            let (i, j, k) = split_idx(dims, idx);
            *slot = f(i, j, k);
        });
    out
}

// ---------------------------------------------------------------------------
// 1D stencil helpers over an index-access closure.
// ---------------------------------------------------------------------------

/// Central first derivative with one-sided second-order fallback at the ends.
#[inline]
fn d1_line(get: impl Fn(i64) -> f64, i: usize, n: usize, h: f64) -> f64 {
    let i = i as i64;
    if i == 0 {
        (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
    } else if i == n as i64 - 1 {
        (3.0 * get(i) - 4.0 * get(i - 1) + get(i - 2)) / (2.0 * h)
    } else {
        (get(i + 1) - get(i - 1)) / (2.0 * h)
    }
}

/// Central second derivative with one-sided second-order fallback at the ends.
#[inline]
fn d2_line(get: impl Fn(i64) -> f64, i: usize, n: usize, h: f64) -> f64 {
    let i = i as i64;
    let h2 = h * h;
    if i == 0 {
        (2.0 * get(0) - 5.0 * get(1) + 4.0 * get(2) - get(3)) / h2
    } else if i == n as i64 - 1 {
        (2.0 * get(i) - 5.0 * get(i - 1) + 4.0 * get(i - 2) - get(i - 3)) / h2
    } else {
        (get(i + 1) - 2.0 * get(i) + get(i - 1)) / h2
    }
}

/// Periodic / wrapped first and second derivatives (no boundary handling).
#[inline]
fn d1_wrapped(get: impl Fn(i64) -> f64, i: i64, h: f64) -> f64 {
    (get(i + 1) - get(i - 1)) / (2.0 * h)
}

#[inline]
fn d2_wrapped(get: impl Fn(i64) -> f64, i: i64, h: f64) -> f64 {
    (get(i + 1) - 2.0 * get(i) + get(i - 1)) / (h * h)
}

// ---------------------------------------------------------------------------
// Cartesian operators
// ---------------------------------------------------------------------------

impl CartesianGrid {
    fn d1_axis(&self, f: &ScalarField, axis: usize) -> ScalarField {
        let n = self.n;
        let h = self.h[axis];
        par_fill(n, |i, j, k| {
            let pos = [i, j, k];
            let line = |q: i64| {
                let mut p = pos;
                p[axis] = q as usize;
                f.get(p[0], p[1], p[2])
            };
            d1_line(line, pos[axis], n[axis], h)
        })
    }

    fn d2_axis(&self, f: &ScalarField, axis: usize) -> ScalarField {
        let n = self.n;
        let h = self.h[axis];
        par_fill(n, |i, j, k| {
            let pos = [i, j, k];
            let line = |q: i64| {
                let mut p = pos;
                p[axis] = q as usize;
                f.get(p[0], p[1], p[2])
            };
            d2_line(line, pos[axis], n[axis], h)
        })
    }
}

impl DiffGrid for CartesianGrid {
    fn dims(&self) -> [usize; 3] {
        self.n
    }

    fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.coord(i, j, k)
    }

    fn volume_weight(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut w = self.h[0] * self.h[1] * self.h[2];
        for (axis, &idx) in [i, j, k].iter().enumerate() {
            if idx == 0 || idx == self.n[axis] - 1 {
                w *= 0.5;
            }
        }
        w
    }

    fn is_interior(&self, i: usize, j: usize, k: usize, margin: usize) -> bool {
        [i, j, k]
            .iter()
            .zip(self.n.iter())
            .all(|(&idx, &n)| idx >= margin && idx + margin < n)
    }

    fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let n = self.n;
        let h = self.h;
        par_fill(n, |i, j, k| {
            let pos = [i, j, k];
            let mut sum = 0.0;
            for axis in 0..3 {
                let line = |q: i64| {
                    let mut p = pos;
                    p[axis] = q as usize;
                    f.get(p[0], p[1], p[2])
                };
                sum += d2_line(line, pos[axis], n[axis], h[axis]);
            }
            sum
        })
    }

    fn cart_gradient(&self, f: &ScalarField) -> VectorField3 {
        VectorField3 {
            comps: [self.d1_axis(f, 0), self.d1_axis(f, 1), self.d1_axis(f, 2)],
        }
    }

    fn cart_hessian(&self, f: &ScalarField) -> SymTensorField {
        let dx = self.d1_axis(f, 0);
        let dy = self.d1_axis(f, 1);
        SymTensorField {
            comps: [
                self.d2_axis(f, 0),
                self.d2_axis(f, 1),
                self.d2_axis(f, 2),
                self.d1_axis(&dx, 1),
                self.d1_axis(&dx, 2),
                self.d1_axis(&dy, 2),
            ],
        }
    }

    fn visit_laplacian_stencil(
        &self,
        i: usize,
        j: usize,
        k: usize,
        visit: &mut dyn FnMut(usize, f64),
    ) {
        debug_assert!(self.is_interior(i, j, k, 1));
        let n = self.n;
        let idx = |p: [usize; 3]| (p[0] * n[1] + p[1]) * n[2] + p[2];
        let pos = [i, j, k];
        let mut center = 0.0;
        for axis in 0..3 {
            let h2 = self.h[axis] * self.h[axis];
            let mut lo = pos;
            lo[axis] -= 1;
            let mut hi = pos;
            hi[axis] += 1;
            visit(idx(lo), 1.0 / h2);
            visit(idx(hi), 1.0 / h2);
            center -= 2.0 / h2;
        }
        visit(idx(pos), center);
    }

    fn visit_gradient_stencil(
        &self,
        i: usize,
        j: usize,
        k: usize,
        visit: &mut dyn FnMut(usize, Vec3),
    ) {
        debug_assert!(self.is_interior(i, j, k, 1));
        let n = self.n;
        let idx = |p: [usize; 3]| (p[0] * n[1] + p[1]) * n[2] + p[2];
        let pos = [i, j, k];
        for axis in 0..3 {
            let c = 1.0 / (2.0 * self.h[axis]);
            let mut dir = Vec3::zeros();
            dir[axis] = c;
            let mut lo = pos;
            lo[axis] -= 1;
            let mut hi = pos;
            hi[axis] += 1;
            visit(idx(hi), dir);
            visit(idx(lo), -dir);
        }
    }
}

// ---------------------------------------------------------------------------
// Spherical operators
// ---------------------------------------------------------------------------

/// Spherical partial derivatives of a scalar field at one node.
#[derive(Debug, Clone, Copy, Default)]
pub struct SphPartials {
    pub d_r: f64,
    pub d_phi: f64,
    pub d_theta: f64,
    pub d_rr: f64,
    pub d_phiphi: f64,
    pub d_thetatheta: f64,
}

impl SphericalGrid {
    #[inline]
    fn line_r<'a>(
        &'a self,
        f: &'a ScalarField,
        j: usize,
        k: usize,
    ) -> impl Fn(i64) -> f64 + 'a {
        move |q: i64| f.get(q as usize, j, k)
    }

    #[inline]
    fn line_phi<'a>(
        &'a self,
        f: &'a ScalarField,
        i: usize,
        k: usize,
    ) -> impl Fn(i64) -> f64 + 'a {
        move |q: i64| self.sample(f, i, q, k as i64)
    }

    #[inline]
    fn line_theta<'a>(
        &'a self,
        f: &'a ScalarField,
        i: usize,
        j: usize,
    ) -> impl Fn(i64) -> f64 + 'a {
        move |q: i64| self.sample(f, i, j as i64, q)
    }

    pub fn d1_r(&self, f: &ScalarField) -> ScalarField {
        par_fill([self.nr, self.nphi, self.ntheta], |i, j, k| {
            d1_line(self.line_r(f, j, k), i, self.nr, self.dr())
        })
    }

    pub fn d2_r(&self, f: &ScalarField) -> ScalarField {
        par_fill([self.nr, self.nphi, self.ntheta], |i, j, k| {
            d2_line(self.line_r(f, j, k), i, self.nr, self.dr())
        })
    }

    pub fn d1_phi(&self, f: &ScalarField) -> ScalarField {
        par_fill([self.nr, self.nphi, self.ntheta], |i, j, k| {
            d1_wrapped(self.line_phi(f, i, k), j as i64, self.dphi())
        })
    }

    pub fn d2_phi(&self, f: &ScalarField) -> ScalarField {
        par_fill([self.nr, self.nphi, self.ntheta], |i, j, k| {
            d2_wrapped(self.line_phi(f, i, k), j as i64, self.dphi())
        })
    }

    pub fn d1_theta(&self, f: &ScalarField) -> ScalarField {
        par_fill([self.nr, self.nphi, self.ntheta], |i, j, k| {
            d1_wrapped(self.line_theta(f, i, j), k as i64, self.dtheta())
        })
    }

    pub fn d2_theta(&self, f: &ScalarField) -> ScalarField {
        par_fill([self.nr, self.nphi, self.ntheta], |i, j, k| {
            d2_wrapped(self.line_theta(f, i, j), k as i64, self.dtheta())
        })
    }

    /// All first and pure second spherical partials in one pass.
    pub fn sph_partials(&self, f: &ScalarField) -> [ScalarField; 6] {
        [
            self.d1_r(f),
            self.d1_phi(f),
            self.d1_theta(f),
            self.d2_r(f),
            self.d2_phi(f),
            self.d2_theta(f),
        ]
    }

    /// Orthonormal spherical frame at a node.
    #[inline]
    pub fn frame_vectors(&self, j: usize, k: usize) -> (Vec3, Vec3, Vec3) {
        let (sp, cp) = self.phi(j).sin_cos();
        let (st, ct) = self.theta(k).sin_cos();
        let e_r = Vec3::new(ct * sp, st * sp, cp);
        let e_phi = Vec3::new(ct * cp, st * cp, -sp);
        let e_theta = Vec3::new(-st, ct, 0.0);
        (e_r, e_phi, e_theta)
    }

    /// Wrap-aware angular derivatives for angle-valued fields (period 2π,
    /// no pole crossing; one-sided at the φ ends).
    pub fn angle_gradient_sq(&self, a: &ScalarField, b: &ScalarField) -> ScalarField {
        // ∇a·∇b = a_r b_r + a_φ b_φ / r² + a_θ b_θ / (r² sin²φ)
        let dims = [self.nr, self.nphi, self.ntheta];
        par_fill(dims, |i, j, k| {
            let (ar, ap, at) = self.angle_first_partials(a, i, j, k);
            let (br, bp, bt) = self.angle_first_partials(b, i, j, k);
            let r = self.r(i);
            let sp = self.phi(j).sin();
            ar * br + ap * bp / (r * r) + at * bt / (r * r * sp * sp)
        })
    }

    /// First spherical partials of an angle field, unwrapping 2π jumps.
    pub fn angle_first_partials(
        &self,
        f: &ScalarField,
        i: usize,
        j: usize,
        k: usize,
    ) -> (f64, f64, f64) {
        let d_r = d1_line(self.line_r(f, j, k), i, self.nr, self.dr());
        let center = f.get(i, j, k);
        let dphi = self.dphi();
        let d_phi = if j == 0 {
            let p = |q: usize| f.get(i, q, k);
            (-3.0 * p(0) + 4.0 * wrap_near(p(1), p(0)) - wrap_near(p(2), p(0))) / (2.0 * dphi)
        } else if j == self.nphi - 1 {
            let p = |q: usize| f.get(i, q, k);
            (3.0 * p(j) - 4.0 * wrap_near(p(j - 1), p(j)) + wrap_near(p(j - 2), p(j)))
                / (2.0 * dphi)
        } else {
            let hi = wrap_near(f.get(i, j + 1, k), center);
            let lo = wrap_near(f.get(i, j - 1, k), center);
            (hi - lo) / (2.0 * dphi)
        };
        let kp = (k + 1) % self.ntheta;
        let km = (k + self.ntheta - 1) % self.ntheta;
        let hi = wrap_near(f.get(i, j, kp), center);
        let lo = wrap_near(f.get(i, j, km), center);
        let d_theta = (hi - lo) / (2.0 * self.dtheta());
        (d_r, d_phi, d_theta)
    }

    /// Laplacian of an angle field (wrap-aware, one-sided at φ ends).
    pub fn angle_laplacian(&self, f: &ScalarField) -> ScalarField {
        let dims = [self.nr, self.nphi, self.ntheta];
        par_fill(dims, |i, j, k| {
            let center = f.get(i, j, k);
            let r = self.r(i);
            let phi = self.phi(j);
            let d_r = d1_line(self.line_r(f, j, k), i, self.nr, self.dr());
            let d_rr = d2_line(self.line_r(f, j, k), i, self.nr, self.dr());
            let dphi = self.dphi();
            let (d_phi, d_phiphi) = if j == 0 || j == self.nphi - 1 {
                let line = |q: i64| wrap_near(f.get(i, q as usize, k), center);
                (
                    d1_line(&line, j, self.nphi, dphi),
                    d2_line(&line, j, self.nphi, dphi),
                )
            } else {
                let hi = wrap_near(f.get(i, j + 1, k), center);
                let lo = wrap_near(f.get(i, j - 1, k), center);
                (
                    (hi - lo) / (2.0 * dphi),
                    (hi - 2.0 * center + lo) / (dphi * dphi),
                )
            };
            let kp = (k + 1) % self.ntheta;
            let km = (k + self.ntheta - 1) % self.ntheta;
            let hi = wrap_near(f.get(i, j, kp), center);
            let lo = wrap_near(f.get(i, j, km), center);
            let dth = self.dtheta();
            let d_thth = (hi - 2.0 * center + lo) / (dth * dth);
            let sp = phi.sin();
            d_rr + 2.0 * d_r / r + (d_phiphi + d_phi * phi.cos() / sp) / (r * r)
                + d_thth / (r * r * sp * sp)
        })
    }
}

/// Shifts `v` by multiples of 2π so it lies within π of `reference`.
#[inline]
pub fn wrap_near(v: f64, reference: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut d = v - reference;
    while d > PI {
        d -= two_pi;
    }
    while d < -PI {
        d += two_pi;
    }
    reference + d
}

impl DiffGrid for SphericalGrid {
    fn dims(&self) -> [usize; 3] {
        [self.nr, self.nphi, self.ntheta]
    }

    fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.coord(i, j, k)
    }

    fn volume_weight(&self, i: usize, j: usize, _k: usize) -> f64 {
        let r = self.r(i);
        let mut w = r * r * self.phi(j).sin() * self.dr() * self.dphi() * self.dtheta();
        if i == 0 || i == self.nr - 1 {
            w *= 0.5;
        }
        w
    }

    fn is_interior(&self, i: usize, _j: usize, _k: usize, margin: usize) -> bool {
        i >= margin && i + margin < self.nr
    }

    fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let dims = [self.nr, self.nphi, self.ntheta];
        par_fill(dims, |i, j, k| {
            let r = self.r(i);
            let phi = self.phi(j);
            let sp = phi.sin();
            let d_r = d1_line(self.line_r(f, j, k), i, self.nr, self.dr());
            let d_rr = d2_line(self.line_r(f, j, k), i, self.nr, self.dr());
            let d_phi = d1_wrapped(self.line_phi(f, i, k), j as i64, self.dphi());
            let d_pp = d2_wrapped(self.line_phi(f, i, k), j as i64, self.dphi());
            let d_tt = d2_wrapped(self.line_theta(f, i, j), k as i64, self.dtheta());
            d_rr + 2.0 * d_r / r + (d_pp + d_phi * phi.cos() / sp) / (r * r)
                + d_tt / (r * r * sp * sp)
        })
    }

    fn cart_gradient(&self, f: &ScalarField) -> VectorField3 {
        let dims = [self.nr, self.nphi, self.ntheta];
        let mut out = VectorField3::zeros(dims);
        let comps: Vec<[f64; 3]> = (0..dims[0] * dims[1] * dims[2])
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = split_idx(dims, idx);
                let r = self.r(i);
                let sp = self.phi(j).sin();
                let d_r = d1_line(self.line_r(f, j, k), i, self.nr, self.dr());
                let d_phi = d1_wrapped(self.line_phi(f, i, k), j as i64, self.dphi());
                let d_theta = d1_wrapped(self.line_theta(f, i, j), k as i64, self.dtheta());
                let (e_r, e_phi, e_theta) = self.frame_vectors(j, k);
                let g = e_r * d_r + e_phi * (d_phi / r) + e_theta * (d_theta / (r * sp));
                [g.x, g.y, g.z]
            })
            .collect();
        for (idx, c) in comps.iter().enumerate() {
            out.comps[0].data[idx] = c[0];
            out.comps[1].data[idx] = c[1];
            out.comps[2].data[idx] = c[2];
        }
        out
    }

    fn cart_hessian(&self, f: &ScalarField) -> SymTensorField {
        let dims = [self.nr, self.nphi, self.ntheta];
        // Mixed partials by nesting; φ-differencing is always applied to
        // even-parity fields (values and r/θ-derivatives of scalars).
        let d_r = self.d1_r(f);
        let d_theta = self.d1_theta(f);
        let d_rphi = self.d1_phi(&d_r);
        let d_rtheta = self.d1_theta(&d_r);
        let d_phitheta = self.d1_phi(&d_theta);

        let mut out = SymTensorField::zeros(dims);
        let rows: Vec<[f64; 6]> = (0..dims[0] * dims[1] * dims[2])
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = split_idx(dims, idx);
                let r = self.r(i);
                let phi = self.phi(j);
                let sp = phi.sin();
                let cot = phi.cos() / sp;
                let u_r = d1_line(self.line_r(f, j, k), i, self.nr, self.dr());
                let u_rr = d2_line(self.line_r(f, j, k), i, self.nr, self.dr());
                let u_phi = d1_wrapped(self.line_phi(f, i, k), j as i64, self.dphi());
                let u_pp = d2_wrapped(self.line_phi(f, i, k), j as i64, self.dphi());
                let u_theta = d1_wrapped(self.line_theta(f, i, j), k as i64, self.dtheta());
                let u_tt = d2_wrapped(self.line_theta(f, i, j), k as i64, self.dtheta());
                let u_rp = d_rphi.data[idx];
                let u_rt = d_rtheta.data[idx];
                let u_pt = d_phitheta.data[idx];

                // Orthonormal-frame Hessian components.
                let h_rr = u_rr;
                let h_pp = u_pp / (r * r) + u_r / r;
                let h_tt = u_tt / (r * r * sp * sp) + u_r / r + u_phi * cot / (r * r);
                let h_rp = u_rp / r - u_phi / (r * r);
                let h_rt = u_rt / (r * sp) - u_theta / (r * r * sp);
                let h_pt = u_pt / (r * r * sp) - u_theta * cot / (r * r * sp);

                let (e_r, e_phi, e_theta) = self.frame_vectors(j, k);
                let m = outer_sym(&e_r, &e_r) * h_rr
                    + outer_sym(&e_phi, &e_phi) * h_pp
                    + outer_sym(&e_theta, &e_theta) * h_tt
                    + outer_pair(&e_r, &e_phi) * h_rp
                    + outer_pair(&e_r, &e_theta) * h_rt
                    + outer_pair(&e_phi, &e_theta) * h_pt;
                [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(0, 1)], m[(0, 2)], m[(1, 2)]]
            })
            .collect();
        for (idx, row) in rows.iter().enumerate() {
            for c in 0..6 {
                out.comps[c].data[idx] = row[c];
            }
        }
        out
    }

    fn visit_laplacian_stencil(
        &self,
        i: usize,
        j: usize,
        k: usize,
        visit: &mut dyn FnMut(usize, f64),
    ) {
        debug_assert!(self.is_interior(i, j, k, 1));
        let dims = self.dims();
        let idx = |i: usize, j: usize, k: usize| (i * dims[1] + j) * dims[2] + k;
        let r = self.r(i);
        let phi = self.phi(j);
        let (sp, cp) = phi.sin_cos();
        let dr = self.dr();
        let dphi = self.dphi();
        let dtheta = self.dtheta();

        visit(idx(i + 1, j, k), 1.0 / (dr * dr) + 1.0 / (r * dr));
        visit(idx(i - 1, j, k), 1.0 / (dr * dr) - 1.0 / (r * dr));
        let cot = cp / sp;
        let cpp = 1.0 / (r * r * dphi * dphi);
        let cp1 = cot / (2.0 * r * r * dphi);
        let (jp, kp) = self.wrap_angular(j as i64 + 1, k as i64);
        visit(idx(i, jp, kp), cpp + cp1);
        let (jm, km) = self.wrap_angular(j as i64 - 1, k as i64);
        visit(idx(i, jm, km), cpp - cp1);
        let ctt = 1.0 / (r * r * sp * sp * dtheta * dtheta);
        visit(idx(i, j, (k + 1) % dims[2]), ctt);
        visit(idx(i, j, (k + dims[2] - 1) % dims[2]), ctt);
        visit(
            idx(i, j, k),
            -2.0 / (dr * dr) - 2.0 * cpp - 2.0 * ctt,
        );
    }

    fn visit_gradient_stencil(
        &self,
        i: usize,
        j: usize,
        k: usize,
        visit: &mut dyn FnMut(usize, Vec3),
    ) {
        debug_assert!(self.is_interior(i, j, k, 1));
        let dims = self.dims();
        let idx = |i: usize, j: usize, k: usize| (i * dims[1] + j) * dims[2] + k;
        let r = self.r(i);
        let sp = self.phi(j).sin();
        let (e_r, e_p, e_t) = self.frame_vectors(j, k);
        let cr = 1.0 / (2.0 * self.dr());
        visit(idx(i + 1, j, k), e_r * cr);
        visit(idx(i - 1, j, k), -e_r * cr);
        let cphi = 1.0 / (2.0 * self.dphi() * r);
        let (jp, kp) = self.wrap_angular(j as i64 + 1, k as i64);
        visit(idx(i, jp, kp), e_p * cphi);
        let (jm, km) = self.wrap_angular(j as i64 - 1, k as i64);
        visit(idx(i, jm, km), -e_p * cphi);
        let ct = 1.0 / (2.0 * self.dtheta() * r * sp);
        visit(idx(i, j, (k + 1) % dims[2]), e_t * ct);
        visit(idx(i, j, (k + dims[2] - 1) % dims[2]), -e_t * ct);
    }
}

#[inline]
fn outer_sym(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.transpose()
}

#[inline]
fn outer_pair(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.transpose() + b * a.transpose()
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

/// Max |f| over nodes at least `margin` layers inside non-periodic boundaries.
pub fn interior_max_abs(grid: &impl DiffGrid, f: &ScalarField, margin: usize) -> f64 {
    let dims = grid.dims();
    let mut worst: f64 = 0.0;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                if grid.is_interior(i, j, k, margin) {
                    worst = worst.max(f.get(i, j, k).abs());
                }
            }
        }
    }
    worst
}

/// Max |f| over nodes selected by a caller-supplied predicate. Used to
/// exclude pole-adjacent layers on spherical grids, where the singular-pair
/// terms of the Laplacian/Hessian are only first-order accurate.
pub fn max_abs_where(
    f: &ScalarField,
    pred: impl Fn(usize, usize, usize) -> bool,
) -> f64 {
    let dims = f.dims;
    let mut worst: f64 = 0.0;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                if pred(i, j, k) {
                    worst = worst.max(f.get(i, j, k).abs());
                }
            }
        }
    }
    worst
}

/// Volume-weighted interior L² norm.
pub fn interior_l2(grid: &impl DiffGrid, f: &ScalarField, margin: usize) -> f64 {
    let dims = grid.dims();
    let mut sum = 0.0;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                if grid.is_interior(i, j, k, margin) {
                    let v = f.get(i, j, k);
                    sum += grid.volume_weight(i, j, k) * v * v;
                }
            }
        }
    }
    sum.sqrt()
}
