//! Model parameters, nondimensionalization, and the bulk/elastic energy
//! densities of the dimensionless Landau-de Gennes functional
//!
//! ```text
//! F[Q] = ∫ (t/2) tr(Q²) − √6 tr(Q³) + (1/2)(tr Q²)²
//!        + (1/2)|∇Q|² + (L2/2) Q_{ij,j} Q_{ik,k} dx.
//! ```

use crate::error::ModelError;
use crate::tensor::{basis, st_matrix, QTensor};

const SQRT6: f64 = 2.449489742783178;

/// Dimensional material constants of the LdG free energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Coefficient of the (T − T*) tr(Q²) term.
    pub alpha: f64,
    /// Cubic bulk constant b².
    pub b2: f64,
    /// Quartic bulk constant c².
    pub c2: f64,
    /// Absolute temperature.
    pub temperature: f64,
    /// Supercooling temperature T*.
    pub t_star: f64,
    /// Elastic constant L.
    pub elastic_l: f64,
    /// Elastic anisotropy ratio L2 (dimensionless).
    pub l2: f64,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("b2", self.b2),
            ("c2", self.c2),
            ("L", self.elastic_l),
        ] {
            if !value.is_finite() {
                return Err(ModelError::NotFinite { name });
            }
            if value <= 0.0 {
                return Err(ModelError::NonPositiveConstant { name, value });
            }
        }
        if !self.temperature.is_finite() || !self.t_star.is_finite() {
            return Err(ModelError::NotFinite { name: "T" });
        }
        Ok(())
    }

    /// Reduced temperature t = 27 α (T − T*) c² / b⁴ and the characteristic
    /// length ξ = √(27 c² L / b⁴); L2 passes through unchanged.
    pub fn nondimensionalize(&self) -> Result<(ReducedParams, f64), ModelError> {
        self.validate()?;
        let b4 = self.b2 * self.b2;
        let t = 27.0 * self.alpha * (self.temperature - self.t_star) * self.c2 / b4;
        let xi = (27.0 * self.c2 * self.elastic_l / b4).sqrt();
        Ok((ReducedParams::new(t, self.l2)?, xi))
    }
}

/// Reduced (dimensionless) parameters: temperature t and elastic anisotropy L2.
///
/// Construction enforces 1 + (2/3) L2 > 0, the ellipticity condition of the
/// anisotropic radial operator. Temperatures above the nematic range t ≤ 1 are
/// accepted (s₊ exists up to t = 9/8) but flagged by [`ReducedParams::in_nematic_range`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedParams {
    t: f64,
    l2: f64,
}

impl ReducedParams {
    pub fn new(t: f64, l2: f64) -> Result<Self, ModelError> {
        if !t.is_finite() {
            return Err(ModelError::NotFinite { name: "t" });
        }
        if !l2.is_finite() {
            return Err(ModelError::NotFinite { name: "L2" });
        }
        if 1.0 + 2.0 * l2 / 3.0 <= 0.0 {
            return Err(ModelError::EllipticityLost { l2 });
        }
        Ok(ReducedParams { t, l2 })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    /// Whether t ≤ 1, i.e. below the nematic-isotropic transition.
    pub fn in_nematic_range(&self) -> bool {
        self.t <= 1.0
    }
}

/// Nonzero bulk-minimizing order parameter s₊(t) = √(3/2)(3 + √(9 − 8t))/4.
pub fn s_plus(t: f64) -> Result<f64, ModelError> {
    let disc = 9.0 - 8.0 * t;
    if disc < 0.0 {
        return Err(ModelError::TemperatureAboveSpinodal { t });
    }
    Ok((1.5f64).sqrt() * (3.0 + disc.sqrt()) / 4.0)
}

/// ψ(s) = t s − √6 s² + (4/3) s³, the bulk derivative along the uniaxial branch.
pub fn psi(s: f64, t: f64) -> f64 {
    t * s - SQRT6 * s * s + 4.0 / 3.0 * s * s * s
}

/// dψ/ds = t − 2√6 s + 4 s².
pub fn psi_prime(s: f64, t: f64) -> f64 {
    t - 2.0 * SQRT6 * s + 4.0 * s * s
}

/// Bulk energy density (t/2) tr Q² − √6 tr Q³ + (1/2)(tr Q²)².
pub fn bulk_energy_density(q: &QTensor, t: f64) -> f64 {
    let t2 = q.trace_q2();
    0.5 * t * t2 - SQRT6 * q.trace_q3() + 0.5 * t2 * t2
}

/// Gradient of the bulk density on the symmetric-traceless space:
/// t Q − 3√6 ST(Q²) + 2 Q tr(Q²).
pub fn bulk_gradient(q: &QTensor, t: f64) -> QTensor {
    let m = q.to_matrix();
    let q2 = st_matrix(&(m * m));
    let t2 = q.trace_q2();
    let grad = m * t - q2 * (3.0 * SQRT6) + m * (2.0 * t2);
    QTensor::project_matrix(&grad)
}

/// Elastic energy density from the 5×3 array of basis-coefficient partials:
/// (1/2) Σᵢ |∇qᵢ|² + (L2/2) (div Q)·(div Q).
pub fn elastic_energy_density(grad_q: &[[f64; 3]; 5], l2: f64) -> f64 {
    let mut iso = 0.0;
    for row in grad_q {
        for v in row {
            iso += v * v;
        }
    }
    let mut div = [0.0f64; 3];
    let e = basis();
    for i in 0..3 {
        for (k, row) in grad_q.iter().enumerate() {
            for (j, dj) in row.iter().enumerate() {
                div[i] += e[k][(i, j)] * dj;
            }
        }
    }
    let div2: f64 = div.iter().map(|v| v * v).sum();
    0.5 * iso + 0.5 * l2 * div2
}

/// Gradient data of the (n, m, p) frame needed by the restricted energy:
/// |∇n|² and |(∇m)ᵀ p|².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameGradInvariants {
    pub grad_n_sq: f64,
    pub grad_m_t_p_sq: f64,
}

/// Integrand of the restricted energy over Q = s(n⊗n − I/3) + β(m⊗m − p⊗p)
/// with a director satisfying the extra equation:
///
/// ```text
/// (t/2)((6/9)s² + 2β²) + √6 (2β² − (2/9)s²) s + (2/9)(s² + 3β²)²
/// + (1/3)|∇s|² + |∇β|² + s²|∇n|² + β²(|∇n|² + 4|(∇m)ᵀp|²)
/// ```
pub fn restricted_energy_density(
    s: f64,
    beta: f64,
    grad_s_sq: f64,
    grad_beta_sq: f64,
    frame: &FrameGradInvariants,
    t: f64,
) -> f64 {
    let b2 = beta * beta;
    let s2 = s * s;
    0.5 * t * (6.0 / 9.0 * s2 + 2.0 * b2)
        + SQRT6 * (2.0 * b2 - 2.0 / 9.0 * s2) * s
        + 2.0 / 9.0 * (s2 + 3.0 * b2) * (s2 + 3.0 * b2)
        + grad_s_sq / 3.0
        + grad_beta_sq
        + s2 * frame.grad_n_sq
        + b2 * (frame.grad_n_sq + 4.0 * frame.grad_m_t_p_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{uniaxial_compose, Vec3};
    use approx::assert_relative_eq;

    #[test]
    fn nondimensionalize_reference_points() {
        let base = MaterialParams {
            alpha: 1.0,
            b2: 1.0,
            c2: 1.0,
            temperature: 1.0 / 27.0,
            t_star: 0.0,
            elastic_l: 1.0,
            l2: 0.0,
        };
        let (red, _) = base.nondimensionalize().unwrap();
        assert_relative_eq!(red.t(), 1.0, max_relative = 1e-14);

        let at_star = MaterialParams {
            temperature: 5.0,
            t_star: 5.0,
            ..base
        };
        let (red, _) = at_star.nondimensionalize().unwrap();
        assert_eq!(red.t(), 0.0);

        // t = 27·1·1·3 / (2²) = 81/4, ξ = sqrt(27·3·1/4) = 9/2.
        let p = MaterialParams {
            alpha: 1.0,
            b2: 2.0,
            c2: 3.0,
            temperature: 1.0,
            t_star: 0.0,
            elastic_l: 1.0,
            l2: 0.0,
        };
        let (red, xi) = p.nondimensionalize().unwrap();
        assert_relative_eq!(red.t(), 81.0 / 4.0, max_relative = 1e-14);
        assert_relative_eq!(xi, 4.5, max_relative = 1e-14);
    }

    #[test]
    fn nondimensionalize_rejects_bad_constants() {
        let p = MaterialParams {
            alpha: -1.0,
            b2: 1.0,
            c2: 1.0,
            temperature: 0.0,
            t_star: 0.0,
            elastic_l: 1.0,
            l2: 0.0,
        };
        assert!(matches!(
            p.nondimensionalize(),
            Err(ModelError::NonPositiveConstant { name: "alpha", .. })
        ));
    }

    #[test]
    fn reduced_params_guard_ellipticity() {
        assert!(ReducedParams::new(0.0, -2.0).is_err());
        assert!(ReducedParams::new(0.0, -1.4).is_ok());
        assert!(!ReducedParams::new(1.05, 0.0).unwrap().in_nematic_range());
    }

    #[test]
    fn s_plus_closed_form() {
        assert_relative_eq!(s_plus(1.0).unwrap(), (1.5f64).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(
            s_plus(0.0).unwrap(),
            1.5 * (1.5f64).sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            s_plus(9.0 / 8.0).unwrap(),
            0.75 * (1.5f64).sqrt(),
            max_relative = 1e-15
        );
        assert!(s_plus(1.2).is_err());
    }

    #[test]
    fn psi_roots_and_values() {
        assert_eq!(psi(0.0, 0.7), 0.0);
        for t in [-2.0, 0.0, 1.0] {
            let sp = s_plus(t).unwrap();
            assert!(psi(sp, t).abs() < 1e-12, "psi(s+) = {}", psi(sp, t));
        }
        // −√6 + 4/3
        assert_relative_eq!(psi(1.0, 0.0), -SQRT6 + 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(psi(1.0, 0.0), -1.1161564094498447, max_relative = 1e-15);
    }

    #[test]
    fn bulk_density_uniaxial_closed_form() {
        assert_eq!(bulk_energy_density(&QTensor::ZERO, 0.3), 0.0);
        let n = Vec3::new(0.0, 0.6, 0.8);
        for (s, t) in [(0.5, 1.0), (-1.1, 0.0), (1.7, -2.0)] {
            let q = uniaxial_compose(s, &n).unwrap();
            let expect = t / 3.0 * s * s - 2.0 * SQRT6 / 9.0 * s.powi(3) + 2.0 / 9.0 * s.powi(4);
            assert_relative_eq!(bulk_energy_density(&q, t), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn bulk_gradient_uniaxial_is_psi_times_base() {
        let n = Vec3::new(1.0, -2.0, 2.0).normalize();
        for (s, t) in [(0.8, 1.0), (-0.6, 0.0)] {
            let q = uniaxial_compose(s, &n).unwrap();
            let g = bulk_gradient(&q, t);
            let base = uniaxial_compose(1.0, &n).unwrap();
            let expect = base.scale(psi(s, t));
            assert!((g - expect).norm() < 1e-12 * g.norm().max(1.0));
        }
        assert_eq!(bulk_gradient(&QTensor::ZERO, 1.0).coeffs(), [0.0; 5]);
    }

    #[test]
    fn bulk_gradient_matches_finite_differences() {
        let q = QTensor::from_coeffs([0.4, -0.9, 0.2, 0.6, -0.3]);
        let t = 0.5;
        let g = bulk_gradient(&q, t);
        let h = 1e-6;
        for k in 0..5 {
            let mut qp = q.coeffs();
            let mut qm = q.coeffs();
            qp[k] += h;
            qm[k] -= h;
            let fd = (bulk_energy_density(&QTensor::from_coeffs(qp), t)
                - bulk_energy_density(&QTensor::from_coeffs(qm), t))
                / (2.0 * h);
            assert_relative_eq!(g.coeffs()[k], fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn elastic_density_isotropic_reduction() {
        let grad = [
            [0.1, -0.2, 0.3],
            [0.0, 0.5, -0.1],
            [0.7, 0.0, 0.2],
            [-0.4, 0.1, 0.0],
            [0.2, 0.2, -0.6],
        ];
        let mut sum = 0.0;
        for row in &grad {
            for v in row {
                sum += v * v;
            }
        }
        assert_relative_eq!(
            elastic_energy_density(&grad, 0.0),
            0.5 * sum,
            max_relative = 1e-14
        );
        assert_eq!(elastic_energy_density(&[[0.0; 3]; 5], 1.7), 0.0);
    }

    #[test]
    fn restricted_density_reductions() {
        // s = β = 0, zero gradients → 0
        let fr = FrameGradInvariants {
            grad_n_sq: 0.9,
            grad_m_t_p_sq: 0.4,
        };
        assert_eq!(restricted_energy_density(0.0, 0.0, 0.0, 0.0, &fr, 1.0), 0.0);

        // β = 0 reduces to the (s, n) integrand.
        for (s, gs2, gn2, t) in [(0.7, 0.3, 1.2, 1.0), (-1.3, 0.0, 0.5, -2.0)] {
            let fr = FrameGradInvariants {
                grad_n_sq: gn2,
                grad_m_t_p_sq: 0.77,
            };
            let got = restricted_energy_density(s, 0.0, gs2, 0.0, &fr, t);
            let expect = t / 3.0 * s * s - 2.0 * SQRT6 / 9.0 * s.powi(3)
                + 2.0 / 9.0 * s.powi(4)
                + gs2 / 3.0
                + s * s * gn2;
            assert_relative_eq!(got, expect, max_relative = 1e-13);
        }

        // constant frame, β = 0, s = s₊: equals the bulk density of
        // uniaxial_compose(s₊, n).
        let t = 0.4;
        let sp = s_plus(t).unwrap();
        let fr = FrameGradInvariants::default();
        let got = restricted_energy_density(sp, 0.0, 0.0, 0.0, &fr, t);
        let q = uniaxial_compose(sp, &Vec3::z()).unwrap();
        assert_relative_eq!(got, bulk_energy_density(&q, t), max_relative = 1e-12);
    }
}
