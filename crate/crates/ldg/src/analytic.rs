//! Closed-form scalar profiles and director families with exact Cartesian
//! derivatives.
//!
//! The residual evaluators have analytic fast paths for the closed-form
//! families (radial hedgehog, escape, constant, helical, angle-parameterized
//! directors): the sharpest statements — residuals exactly zero — are only
//! testable without discretization noise. Everything here supplies values,
//! gradients, and second derivatives in Cartesian components.

use crate::tensor::{Frame, Mat3, Vec3};

// ---------------------------------------------------------------------------
// Scalar fields
// ---------------------------------------------------------------------------

pub trait AnalyticScalar: Sync {
    fn value(&self, x: &Vec3) -> f64;
    fn gradient(&self, x: &Vec3) -> Vec3;
    fn hessian(&self, x: &Vec3) -> Mat3;

    fn laplacian(&self, x: &Vec3) -> f64 {
        self.hessian(x).trace()
    }
}

/// Radial function r ↦ (s, s′, s″).
pub trait RadialFn: Sync {
    fn eval(&self, r: f64) -> (f64, f64, f64);
}

/// Scalar field s(|x|) from a radial function.
pub struct RadialScalar<F: RadialFn>(pub F);

impl<F: RadialFn> AnalyticScalar for RadialScalar<F> {
    fn value(&self, x: &Vec3) -> f64 {
        self.0.eval(x.norm()).0
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        let r = x.norm();
        let (_, ds, _) = self.0.eval(r);
        x * (ds / r)
    }

    fn hessian(&self, x: &Vec3) -> Mat3 {
        let r = x.norm();
        let (_, ds, dds) = self.0.eval(r);
        let er = x / r;
        let proj = Mat3::identity() - er * er.transpose();
        er * er.transpose() * dds + proj * (ds / r)
    }
}

/// s(r) = amp · r² / (1 + r²): the standard smooth hedgehog-like test profile
/// with the correct r² indicial behavior at the origin.
pub struct BumpProfile {
    pub amp: f64,
}

impl RadialFn for BumpProfile {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let w = 1.0 + r * r;
        (
            self.amp * r * r / w,
            2.0 * self.amp * r / (w * w),
            2.0 * self.amp * (1.0 - 3.0 * r * r) / (w * w * w),
        )
    }
}

/// Monomial profile s(r) = rᵖ (test profiles of the separated-coefficient fit).
pub struct PowerProfile {
    pub p: i32,
}

impl RadialFn for PowerProfile {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let p = self.p as f64;
        (
            r.powi(self.p),
            p * r.powi(self.p - 1),
            p * (p - 1.0) * r.powi(self.p - 2),
        )
    }
}

pub struct ConstScalar(pub f64);

impl AnalyticScalar for ConstScalar {
    fn value(&self, _x: &Vec3) -> f64 {
        self.0
    }
    fn gradient(&self, _x: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
    fn hessian(&self, _x: &Vec3) -> Mat3 {
        Mat3::zeros()
    }
}

/// Smooth trigonometric series Σ aₘ sin(kₘ·x + δₘ); used for randomized
/// identity audits.
pub struct TrigScalar {
    pub modes: Vec<(f64, Vec3, f64)>,
    pub offset: f64,
}

impl AnalyticScalar for TrigScalar {
    fn value(&self, x: &Vec3) -> f64 {
        self.offset
            + self
                .modes
                .iter()
                .map(|(a, k, d)| a * (k.dot(x) + d).sin())
                .sum::<f64>()
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        let mut g = Vec3::zeros();
        for (a, k, d) in &self.modes {
            g += k * (*a * (k.dot(x) + d).cos());
        }
        g
    }

    fn hessian(&self, x: &Vec3) -> Mat3 {
        let mut h = Mat3::zeros();
        for (a, k, d) in &self.modes {
            h += k * k.transpose() * (-*a * (k.dot(x) + d).sin());
        }
        h
    }
}

// ---------------------------------------------------------------------------
// Spherical chain rule
// ---------------------------------------------------------------------------

/// Value and partial derivatives of a function of (r, φ, θ).
#[derive(Debug, Clone, Copy, Default)]
pub struct SphDerivs {
    pub v: f64,
    pub d_r: f64,
    pub d_phi: f64,
    pub d_theta: f64,
    pub d_rr: f64,
    pub d_phiphi: f64,
    pub d_thetatheta: f64,
    pub d_rphi: f64,
    pub d_rtheta: f64,
    pub d_phitheta: f64,
}

pub trait SphFn: Sync {
    fn eval(&self, r: f64, phi: f64, theta: f64) -> SphDerivs;
}

/// Spherical coordinates (r, φ, θ) of a point, with the paper's convention
/// x = (r cosθ sinφ, r sinθ sinφ, r cosφ).
pub fn spherical_of(x: &Vec3) -> (f64, f64, f64) {
    let r = x.norm();
    let phi = (x.z / r).clamp(-1.0, 1.0).acos();
    let theta = x.y.atan2(x.x);
    (r, phi, theta)
}

/// Orthonormal spherical frame at angles (φ, θ).
pub fn spherical_frame(phi: f64, theta: f64) -> (Vec3, Vec3, Vec3) {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    (
        Vec3::new(ct * sp, st * sp, cp),
        Vec3::new(ct * cp, st * cp, -sp),
        Vec3::new(-st, ct, 0.0),
    )
}

/// Converts spherical partials of a scalar into its Cartesian value,
/// gradient, and Hessian at radius r and angles (φ, θ).
pub fn sph_to_cartesian(d: &SphDerivs, r: f64, phi: f64, theta: f64) -> (f64, Vec3, Mat3) {
    let (e_r, e_p, e_t) = spherical_frame(phi, theta);
    let sp = phi.sin();
    let cot = phi.cos() / sp;
    let grad = e_r * d.d_r + e_p * (d.d_phi / r) + e_t * (d.d_theta / (r * sp));

    let h_rr = d.d_rr;
    let h_pp = d.d_phiphi / (r * r) + d.d_r / r;
    let h_tt = d.d_thetatheta / (r * r * sp * sp) + d.d_r / r + d.d_phi * cot / (r * r);
    let h_rp = d.d_rphi / r - d.d_phi / (r * r);
    let h_rt = d.d_rtheta / (r * sp) - d.d_theta / (r * r * sp);
    let h_pt = d.d_phitheta / (r * r * sp) - d.d_theta * cot / (r * r * sp);

    let hess = e_r * e_r.transpose() * h_rr
        + e_p * e_p.transpose() * h_pp
        + e_t * e_t.transpose() * h_tt
        + (e_r * e_p.transpose() + e_p * e_r.transpose()) * h_rp
        + (e_r * e_t.transpose() + e_t * e_r.transpose()) * h_rt
        + (e_p * e_t.transpose() + e_t * e_p.transpose()) * h_pt;
    (d.v, grad, hess)
}

/// f(r, φ, θ) = φ.
pub struct PolarAngle;

impl SphFn for PolarAngle {
    fn eval(&self, _r: f64, phi: f64, _theta: f64) -> SphDerivs {
        SphDerivs {
            v: phi,
            d_phi: 1.0,
            ..Default::default()
        }
    }
}

/// f(r, φ, θ) = φ + c (tilted polar angle).
pub struct OffsetPolar(pub f64);

impl SphFn for OffsetPolar {
    fn eval(&self, _r: f64, phi: f64, _theta: f64) -> SphDerivs {
        SphDerivs {
            v: phi + self.0,
            d_phi: 1.0,
            ..Default::default()
        }
    }
}

/// g(r, φ, θ) = m·θ.
pub struct ScaledAzimuth(pub f64);

impl SphFn for ScaledAzimuth {
    fn eval(&self, _r: f64, _phi: f64, theta: f64) -> SphDerivs {
        SphDerivs {
            v: self.0 * theta,
            d_theta: self.0,
            ..Default::default()
        }
    }
}

/// Smooth angle function c₀ + c₁φ + c₂θ + a₀ sinφ cosθ + a₁ cosφ + a₂ sinφ sinθ,
/// used for randomized frame/angle audits.
pub struct TrigAngle {
    pub c0: f64,
    pub c_phi: f64,
    pub c_theta: f64,
    pub a: [f64; 3],
}

impl SphFn for TrigAngle {
    fn eval(&self, _r: f64, phi: f64, theta: f64) -> SphDerivs {
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let [a0, a1, a2] = self.a;
        SphDerivs {
            v: self.c0 + self.c_phi * phi + self.c_theta * theta + a0 * sp * ct + a1 * cp
                + a2 * sp * st,
            d_r: 0.0,
            d_phi: self.c_phi + a0 * cp * ct - a1 * sp + a2 * cp * st,
            d_theta: self.c_theta - a0 * sp * st + a2 * sp * ct,
            d_rr: 0.0,
            d_phiphi: -a0 * sp * ct - a1 * cp - a2 * sp * st,
            d_thetatheta: -a0 * sp * ct - a2 * sp * st,
            d_rphi: 0.0,
            d_rtheta: 0.0,
            d_phitheta: -a0 * cp * st + a2 * cp * ct,
        }
    }
}

// ---------------------------------------------------------------------------
// Directors
// ---------------------------------------------------------------------------

pub trait AnalyticDirector: Sync {
    fn director(&self, x: &Vec3) -> Vec3;
    /// (∇n)ᵢⱼ = ∂nᵢ/∂xⱼ.
    fn grad(&self, x: &Vec3) -> Mat3;
    /// second(x)[i][(j, k)] = n_{i,jk}.
    fn second(&self, x: &Vec3) -> [Mat3; 3];
    /// The (n, m, p) frame at x; for angle-parameterized families this is the
    /// frame built from (f, g).
    fn frame(&self, x: &Vec3) -> Frame;

    fn laplacian_n(&self, x: &Vec3) -> Vec3 {
        let s = self.second(x);
        Vec3::new(s[0].trace(), s[1].trace(), s[2].trace())
    }

    fn div(&self, x: &Vec3) -> f64 {
        self.grad(x).trace()
    }

    /// ∇(∇·n): component j is Σᵢ n_{i,ij}.
    fn grad_div(&self, x: &Vec3) -> Vec3 {
        let s = self.second(x);
        Vec3::new(
            s[0][(0, 0)] + s[1][(1, 0)] + s[2][(2, 0)],
            s[0][(0, 1)] + s[1][(1, 1)] + s[2][(2, 1)],
            s[0][(0, 2)] + s[1][(1, 2)] + s[2][(2, 2)],
        )
    }

    fn grad_norm_sq(&self, x: &Vec3) -> f64 {
        self.grad(x).norm_squared()
    }
}

/// n = x/|x| (the radial hedgehog director).
pub struct RadialDirector;

impl AnalyticDirector for RadialDirector {
    fn director(&self, x: &Vec3) -> Vec3 {
        x / x.norm()
    }

    fn grad(&self, x: &Vec3) -> Mat3 {
        let r = x.norm();
        let n = x / r;
        (Mat3::identity() - n * n.transpose()) / r
    }

    fn second(&self, x: &Vec3) -> [Mat3; 3] {
        // n_{i,jk} = [3 nᵢnⱼnₖ − (δᵢⱼnₖ + δᵢₖnⱼ + δⱼₖnᵢ)] / r².
        let r = x.norm();
        let n = x / r;
        let r2 = r * r;
        std::array::from_fn(|i| {
            let mut m = Mat3::zeros();
            for j in 0..3 {
                for k in 0..3 {
                    let mut v = 3.0 * n[i] * n[j] * n[k];
                    if i == j {
                        v -= n[k];
                    }
                    if i == k {
                        v -= n[j];
                    }
                    if j == k {
                        v -= n[i];
                    }
                    m[(j, k)] = v / r2;
                }
            }
            m
        })
    }

    fn frame(&self, x: &Vec3) -> Frame {
        let (_, phi, theta) = spherical_of(x);
        Frame::from_angles(phi, theta)
    }
}

/// Constant director field.
pub struct ConstantDirector(pub Vec3);

impl AnalyticDirector for ConstantDirector {
    fn director(&self, _x: &Vec3) -> Vec3 {
        self.0
    }
    fn grad(&self, _x: &Vec3) -> Mat3 {
        Mat3::zeros()
    }
    fn second(&self, _x: &Vec3) -> [Mat3; 3] {
        [Mat3::zeros(); 3]
    }
    fn frame(&self, _x: &Vec3) -> Frame {
        let n = self.0;
        // deterministic orthonormal completion
        let aux = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let m = (aux - n * n.dot(&aux)).normalize();
        let p = n.cross(&m);
        Frame { n, m, p }
    }
}

/// Helical director n = (cos κz, sin κz, 0).
pub struct HelicalDirector {
    pub pitch: f64,
}

impl AnalyticDirector for HelicalDirector {
    fn director(&self, x: &Vec3) -> Vec3 {
        let (s, c) = (self.pitch * x.z).sin_cos();
        Vec3::new(c, s, 0.0)
    }

    fn grad(&self, x: &Vec3) -> Mat3 {
        let (s, c) = (self.pitch * x.z).sin_cos();
        let mut m = Mat3::zeros();
        m[(0, 2)] = -self.pitch * s;
        m[(1, 2)] = self.pitch * c;
        m
    }

    fn second(&self, x: &Vec3) -> [Mat3; 3] {
        let (s, c) = (self.pitch * x.z).sin_cos();
        let k2 = self.pitch * self.pitch;
        let mut mx = Mat3::zeros();
        let mut my = Mat3::zeros();
        mx[(2, 2)] = -k2 * c;
        my[(2, 2)] = -k2 * s;
        [mx, my, Mat3::zeros()]
    }

    fn frame(&self, x: &Vec3) -> Frame {
        // f = π/2, g = κz in the angle parameterization.
        Frame::from_angles(std::f64::consts::FRAC_PI_2, self.pitch * x.z)
    }
}

/// Escape-into-third-dimension director in closed form:
/// n = (2kx, 2ky, k²ρ² − 1)/(1 + k²ρ²), ρ² = x² + y², which is
/// cos Ψ e_ρ + sin Ψ e_z with Ψ(ρ) = 2 arctan(kρ) − π/2.
pub struct EscapeDirector {
    pub k: f64,
}

impl EscapeDirector {
    /// k from the boundary condition Ψ(1) = ψ₁.
    pub fn from_boundary(psi1: f64) -> Self {
        EscapeDirector {
            k: ((psi1 + std::f64::consts::FRAC_PI_2) / 2.0).tan(),
        }
    }

    pub fn psi(&self, rho: f64) -> f64 {
        2.0 * (self.k * rho).atan() - std::f64::consts::FRAC_PI_2
    }

    fn parts(&self, x: &Vec3) -> ([f64; 3], [[f64; 3]; 3], f64, [f64; 3]) {
        let k = self.k;
        let rho2 = x.x * x.x + x.y * x.y;
        let p = [2.0 * k * x.x, 2.0 * k * x.y, k * k * rho2 - 1.0];
        // dp[i][a] = ∂Pᵢ/∂xₐ
        let dp = [
            [2.0 * k, 0.0, 0.0],
            [0.0, 2.0 * k, 0.0],
            [2.0 * k * k * x.x, 2.0 * k * k * x.y, 0.0],
        ];
        let w = 1.0 + k * k * rho2;
        let dw = [2.0 * k * k * x.x, 2.0 * k * k * x.y, 0.0];
        (p, dp, w, dw)
    }
}

impl AnalyticDirector for EscapeDirector {
    fn director(&self, x: &Vec3) -> Vec3 {
        let (p, _, w, _) = self.parts(x);
        Vec3::new(p[0] / w, p[1] / w, p[2] / w)
    }

    fn grad(&self, x: &Vec3) -> Mat3 {
        let (p, dp, w, dw) = self.parts(x);
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for a in 0..3 {
                m[(i, a)] = dp[i][a] / w - p[i] * dw[a] / (w * w);
            }
        }
        m
    }

    fn second(&self, x: &Vec3) -> [Mat3; 3] {
        let (p, dp, w, dw) = self.parts(x);
        let k2 = self.k * self.k;
        // ∂²Pᵢ/∂xₐ∂x_b: only P₃ has nonzero ones (2k² on xx and yy).
        let ddp = |i: usize, a: usize, b: usize| -> f64 {
            if i == 2 && a == b && a < 2 {
                2.0 * k2
            } else {
                0.0
            }
        };
        // ∂²w/∂xₐ∂x_b = 2k² δₐ_b for a, b < 2.
        let ddw = |a: usize, b: usize| -> f64 {
            if a == b && a < 2 {
                2.0 * k2
            } else {
                0.0
            }
        };
        std::array::from_fn(|i| {
            let mut m = Mat3::zeros();
            for a in 0..3 {
                for b in 0..3 {
                    m[(a, b)] = ddp(i, a, b) / w
                        - (dp[i][a] * dw[b] + dp[i][b] * dw[a] + p[i] * ddw(a, b)) / (w * w)
                        + 2.0 * p[i] * dw[a] * dw[b] / (w * w * w);
                }
            }
            m
        })
    }

    fn frame(&self, x: &Vec3) -> Frame {
        // f = π/2 − Ψ(ρ), g = θ.
        let rho = (x.x * x.x + x.y * x.y).sqrt();
        let f = std::f64::consts::FRAC_PI_2 - self.psi(rho);
        let g = x.y.atan2(x.x);
        Frame::from_angles(f, g)
    }
}

/// Director from angle functions f, g of (r, φ, θ):
/// n = (sin f cos g, sin f sin g, cos f).
pub struct AngleDirector<F: SphFn, G: SphFn> {
    pub f: F,
    pub g: G,
}

impl<F: SphFn, G: SphFn> AngleDirector<F, G> {
    fn angle_derivs(&self, x: &Vec3) -> (SphDerivs, SphDerivs, f64, f64, f64) {
        let (r, phi, theta) = spherical_of(x);
        (
            self.f.eval(r, phi, theta),
            self.g.eval(r, phi, theta),
            r,
            phi,
            theta,
        )
    }
}

impl<F: SphFn, G: SphFn> AnalyticDirector for AngleDirector<F, G> {
    fn director(&self, x: &Vec3) -> Vec3 {
        let (fd, gd, ..) = self.angle_derivs(x);
        Frame::from_angles(fd.v, gd.v).n
    }

    fn grad(&self, x: &Vec3) -> Mat3 {
        let (fd, gd, r, phi, theta) = self.angle_derivs(x);
        let (_, gf, _) = sph_to_cartesian(&fd, r, phi, theta);
        let (_, gg, _) = sph_to_cartesian(&gd, r, phi, theta);
        let fr = Frame::from_angles(fd.v, gd.v);
        // ∇n = m⊗∇f + sin f · p⊗∇g
        fr.m * gf.transpose() + fr.p * gg.transpose() * fd.v.sin()
    }

    fn second(&self, x: &Vec3) -> [Mat3; 3] {
        let (fd, gd, r, phi, theta) = self.angle_derivs(x);
        let (_, gf, hf) = sph_to_cartesian(&fd, r, phi, theta);
        let (_, gg, hg) = sph_to_cartesian(&gd, r, phi, theta);
        let fr = Frame::from_angles(fd.v, gd.v);
        let (sf, cf) = fd.v.sin_cos();
        let ff = gf * gf.transpose();
        let fg = gf * gg.transpose() + gg * gf.transpose();
        let gg2 = gg * gg.transpose();
        // n_{i,jk} = mᵢ f_{jk} + sin f pᵢ g_{jk} − nᵢ (∇f⊗∇f)
        //          + cos f pᵢ (∇f⊗∇g + ∇g⊗∇f) − sin f (sin f nᵢ + cos f mᵢ)(∇g⊗∇g)
        std::array::from_fn(|i| {
            hf * fr.m[i] + hg * (sf * fr.p[i]) - ff * fr.n[i] + fg * (cf * fr.p[i])
                - gg2 * (sf * (sf * fr.n[i] + cf * fr.m[i]))
        })
    }

    fn frame(&self, x: &Vec3) -> Frame {
        let (fd, gd, ..) = self.angle_derivs(x);
        Frame::from_angles(fd.v, gd.v)
    }
}

/// The radial hedgehog as an angle director (f = φ, g = θ); equal to
/// [`RadialDirector`] but exercising the angle chain rule.
pub fn hedgehog_angles() -> AngleDirector<PolarAngle, ScaledAzimuth> {
    AngleDirector {
        f: PolarAngle,
        g: ScaledAzimuth(1.0),
    }
}

// ---------------------------------------------------------------------------
// Uniaxial Q-field derivatives
// ---------------------------------------------------------------------------

/// Value, first, and second Cartesian derivatives of Q = s(n⊗n − I/3).
pub struct UniaxialQDerivs {
    pub value: Mat3,
    /// first[k] = ∂ₖQ.
    pub first: [Mat3; 3],
    /// second[k][l] = ∂ₖ∂ₗQ.
    pub second: [[Mat3; 3]; 3],
}

impl UniaxialQDerivs {
    pub fn laplacian(&self) -> Mat3 {
        self.second[0][0] + self.second[1][1] + self.second[2][2]
    }

    /// M with Mᵢⱼ = Q_{ik,kj} = ∂ⱼ (div Q)ᵢ.
    pub fn grad_div(&self) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for k in 0..3 {
                    v += self.second[k][j][(i, k)];
                }
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Assembles exact derivatives of the composed uniaxial field at x.
pub fn uniaxial_q_derivs(
    s: &impl AnalyticScalar,
    n: &impl AnalyticDirector,
    x: &Vec3,
) -> UniaxialQDerivs {
    let sv = s.value(x);
    let gs = s.gradient(x);
    let hs = s.hessian(x);
    let nv = n.director(x);
    let gn = n.grad(x);
    let sn = n.second(x);

    let a = nv * nv.transpose() - Mat3::identity() / 3.0;
    // A_{ij,k} = n_{i,k} n_j + n_i n_{j,k}
    let da: [Mat3; 3] = std::array::from_fn(|k| {
        let col = gn.column(k);
        let dn = Vec3::from(col);
        dn * nv.transpose() + nv * dn.transpose()
    });
    let dda: [[Mat3; 3]; 3] = std::array::from_fn(|k| {
        std::array::from_fn(|l| {
            let dnk = Vec3::from(gn.column(k));
            let dnl = Vec3::from(gn.column(l));
            let ddn = Vec3::new(sn[0][(k, l)], sn[1][(k, l)], sn[2][(k, l)]);
            ddn * nv.transpose() + nv * ddn.transpose() + dnk * dnl.transpose()
                + dnl * dnk.transpose()
        })
    });

    let value = a * sv;
    let first: [Mat3; 3] = std::array::from_fn(|k| a * gs[k] + da[k] * sv);
    let second: [[Mat3; 3]; 3] = std::array::from_fn(|k| {
        std::array::from_fn(|l| {
            a * hs[(k, l)] + da[l] * gs[k] + da[k] * gs[l] + dda[k][l] * sv
        })
    });
    UniaxialQDerivs {
        value,
        first,
        second,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd_grad(d: &dyn Fn(&Vec3) -> f64, x: &Vec3) -> Vec3 {
        let h = 1e-5;
        let mut g = Vec3::zeros();
        for a in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[a] += h;
            xm[a] -= h;
            g[a] = (d(&xp) - d(&xm)) / (2.0 * h);
        }
        g
    }

    fn check_director_derivs(d: &impl AnalyticDirector, x: &Vec3, tol: f64) {
        let g = d.grad(x);
        let s = d.second(x);
        for i in 0..3 {
            let gi = fd_grad(&|y: &Vec3| d.director(y)[i], x);
            for a in 0..3 {
                assert_relative_eq!(g[(i, a)], gi[a], epsilon = tol, max_relative = tol);
            }
            for a in 0..3 {
                let si = fd_grad(&|y: &Vec3| d.grad(y)[(i, a)], x);
                for b in 0..3 {
                    assert_relative_eq!(
                        s[i][(a, b)],
                        si[b],
                        epsilon = tol,
                        max_relative = tol
                    );
                }
            }
        }
        // unit-length identities
        assert_relative_eq!(d.director(x).norm(), 1.0, epsilon = 1e-12);
        let ng = g.transpose() * d.director(x);
        assert!(ng.norm() < 1e-12, "(∇n)ᵀ n = {ng:?}");
    }

    #[test]
    fn radial_director_derivatives() {
        let x = Vec3::new(0.7, -0.4, 1.1);
        check_director_derivs(&RadialDirector, &x, 1e-6);
    }

    #[test]
    fn escape_director_derivatives_and_psi() {
        let d = EscapeDirector::from_boundary(0.0);
        assert_relative_eq!(d.k, 1.0, epsilon = 1e-14);
        let x = Vec3::new(0.4, 0.25, 0.9);
        check_director_derivs(&d, &x, 1e-6);
        // cos Ψ(ρ) = 2ρ/(1+ρ²) satisfies ρΨ' = cos Ψ for the closed form.
        for rho in [0.1, 0.5, 0.95] {
            let dpsi = 2.0 / (1.0 + rho * rho);
            assert_relative_eq!(rho * dpsi, d.psi(rho).cos(), epsilon = 1e-13);
        }
        // n matches cos Ψ e_ρ + sin Ψ e_z
        let rho = (x.x * x.x + x.y * x.y).sqrt();
        let e_rho = Vec3::new(x.x / rho, x.y / rho, 0.0);
        let psi = d.psi(rho);
        let expect = e_rho * psi.cos() + Vec3::z() * psi.sin();
        assert!((d.director(&x) - expect).norm() < 1e-13);
        // smooth on the axis
        let on_axis = d.director(&Vec3::new(0.0, 0.0, 0.3));
        assert!((on_axis - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn helical_director_derivatives() {
        let d = HelicalDirector { pitch: 1.0 };
        check_director_derivs(&d, &Vec3::new(0.3, 0.4, 0.9), 1e-6);
        assert_relative_eq!(d.grad_norm_sq(&Vec3::new(0.0, 0.0, 0.5)), 1.0);
    }

    #[test]
    fn angle_director_matches_radial() {
        let hh = hedgehog_angles();
        let x = Vec3::new(0.5, 0.8, -0.6);
        assert!((hh.director(&x) - RadialDirector.director(&x)).norm() < 1e-13);
        assert!((hh.grad(&x) - RadialDirector.grad(&x)).norm() < 1e-11);
        let s1 = hh.second(&x);
        let s2 = RadialDirector.second(&x);
        for i in 0..3 {
            assert!((s1[i] - s2[i]).norm() < 1e-10, "component {i}");
        }
    }

    #[test]
    fn angle_director_general_field_derivatives() {
        let d = AngleDirector {
            f: TrigAngle {
                c0: 0.9,
                c_phi: 0.7,
                c_theta: 0.0,
                a: [0.13, -0.21, 0.08],
            },
            g: TrigAngle {
                c0: -0.4,
                c_phi: 0.0,
                c_theta: 1.0,
                a: [0.05, 0.17, -0.12],
            },
        };
        check_director_derivs(&d, &Vec3::new(0.8, 0.5, 0.9), 2e-5);
    }

    #[test]
    fn radial_scalar_derivatives() {
        let s = RadialScalar(BumpProfile { amp: 1.3 });
        let x = Vec3::new(0.9, -0.2, 0.5);
        let g = s.gradient(&x);
        let gfd = fd_grad(&|y: &Vec3| s.value(y), &x);
        assert!((g - gfd).norm() < 1e-8);
        let h = s.hessian(&x);
        for a in 0..3 {
            let col = fd_grad(&|y: &Vec3| s.gradient(y)[a], &x);
            for b in 0..3 {
                assert_relative_eq!(h[(a, b)], col[b], epsilon = 1e-7, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn trig_scalar_derivatives() {
        let s = TrigScalar {
            modes: vec![
                (0.8, Vec3::new(1.0, 0.4, -0.3), 0.2),
                (-0.3, Vec3::new(0.2, -1.1, 0.8), 1.4),
            ],
            offset: 0.5,
        };
        let x = Vec3::new(0.3, 0.9, -0.7);
        let gfd = fd_grad(&|y: &Vec3| s.value(y), &x);
        assert!((s.gradient(&x) - gfd).norm() < 1e-9);
        assert_relative_eq!(
            s.laplacian(&x),
            s.hessian(&x).trace(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn uniaxial_q_derivs_match_finite_differences() {
        let s = RadialScalar(BumpProfile { amp: 1.1 });
        let n = RadialDirector;
        let x = Vec3::new(0.6, 0.9, -0.4);
        let d = uniaxial_q_derivs(&s, &n, &x);
        let h = 1e-5;
        let q_at = |y: &Vec3| {
            let nv = n.director(y);
            (nv * nv.transpose() - Mat3::identity() / 3.0) * s.value(y)
        };
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (q_at(&xp) - q_at(&xm)) / (2.0 * h);
            assert!((d.first[k] - fd).norm() < 1e-8, "first[{k}]");
            let fd2 = (q_at(&xp) - d.value * 2.0 + q_at(&xm)) / (h * h);
            assert!((d.second[k][k] - fd2).norm() < 1e-5, "second[{k}][{k}]");
        }
    }
}
