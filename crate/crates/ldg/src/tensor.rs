//! Symmetric-traceless 3x3 tensor algebra in the orthonormal five-component basis.
//!
//! A Q-tensor is stored as its five coefficients in the basis
//!
//! ```text
//! E1 = sqrt(3/2) (ez⊗ez − I/3),   E2 = sqrt(1/2) (ex⊗ex − ey⊗ey),
//! E3 = sqrt(1/2) (ex⊗ey + ey⊗ex), E4 = sqrt(1/2) (ex⊗ez + ez⊗ex),
//! E5 = sqrt(1/2) (ey⊗ez + ez⊗ey),
//! ```
//!
//! so tracelessness is structural and the invariants tr(Q²), tr(Q³) are
//! polynomials in the stored coefficients.

use crate::error::TensorError;
use nalgebra::{Matrix3, Vector3};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

const SQRT6: f64 = 2.449489742783178;
const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Default relative tolerance on the biaxiality invariant below which a tensor
/// is treated as uniaxial. Exactly uniaxial inputs come out at O(1e-14) after a
/// float eigensolve; 1e-10 leaves margin without admitting biaxial states.
pub const UNIAXIALITY_TOL: f64 = 1e-10;

/// Symmetric traceless 3x3 tensor, stored as five basis coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QTensor {
    q: [f64; 5],
}

/// The orthonormal basis E1..E5 as explicit matrices.
pub fn basis() -> [Mat3; 5] {
    let s6 = 1.0 / 6.0_f64.sqrt();
    let s2 = 1.0 / SQRT2;
    [
        Mat3::from_diagonal(&Vec3::new(-s6, -s6, 2.0 * s6)),
        Mat3::from_diagonal(&Vec3::new(s2, -s2, 0.0)),
        Mat3::new(0.0, s2, 0.0, s2, 0.0, 0.0, 0.0, 0.0, 0.0),
        Mat3::new(0.0, 0.0, s2, 0.0, 0.0, 0.0, s2, 0.0, 0.0),
        Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, s2, 0.0, s2, 0.0),
    ]
}

impl QTensor {
    pub const ZERO: QTensor = QTensor { q: [0.0; 5] };

    pub fn from_coeffs(q: [f64; 5]) -> Self {
        QTensor { q }
    }

    pub fn coeffs(&self) -> [f64; 5] {
        self.q
    }

    /// Projects a symmetric traceless matrix onto the basis. Rejects inputs
    /// whose asymmetry or trace exceed 1e-12 relative to the Frobenius norm.
    pub fn from_matrix(m: &Mat3) -> Result<Self, TensorError> {
        let norm = m.norm().max(1.0);
        let asym = (m - m.transpose()).norm();
        if asym > 1e-12 * norm {
            return Err(TensorError::NotSymmetric {
                asymmetry: asym,
                norm: m.norm(),
            });
        }
        let tr = m.trace();
        if tr.abs() > 1e-12 * norm {
            return Err(TensorError::NotTraceless {
                trace: tr.abs(),
                norm: m.norm(),
            });
        }
        Ok(Self::project_matrix(m))
    }

    /// Basis projection without validation; callers guarantee symmetry and
    /// tracelessness (used internally where both hold by construction).
    pub fn project_matrix(m: &Mat3) -> Self {
        let s6 = 6.0_f64.sqrt();
        QTensor {
            q: [
                (-m[(0, 0)] - m[(1, 1)] + 2.0 * m[(2, 2)]) / s6,
                (m[(0, 0)] - m[(1, 1)]) / SQRT2,
                (m[(0, 1)] + m[(1, 0)]) / SQRT2,
                (m[(0, 2)] + m[(2, 0)]) / SQRT2,
                (m[(1, 2)] + m[(2, 1)]) / SQRT2,
            ],
        }
    }

    pub fn to_matrix(&self) -> Mat3 {
        let [q1, q2, q3, q4, q5] = self.q;
        let s6 = 6.0_f64.sqrt();
        let a = -q1 / s6;
        Mat3::new(
            a + q2 / SQRT2,
            q3 / SQRT2,
            q4 / SQRT2,
            q3 / SQRT2,
            a - q2 / SQRT2,
            q5 / SQRT2,
            q4 / SQRT2,
            q5 / SQRT2,
            2.0 * q1 / s6,
        )
    }

    /// tr(Q²) = Σ qᵢ².
    pub fn trace_q2(&self) -> f64 {
        self.q.iter().map(|v| v * v).sum()
    }

    /// tr(Q³) as the basis-coefficient cubic polynomial.
    pub fn trace_q3(&self) -> f64 {
        let [q1, q2, q3, q4, q5] = self.q;
        SQRT6 / 6.0 * q1.powi(3) - SQRT6 / 2.0 * (q2 * q2 + q3 * q3) * q1
            + (SQRT6 / 4.0 * q1 + 3.0 * SQRT2 / 4.0 * q2) * q4 * q4
            + (SQRT6 / 4.0 * q1 - 3.0 * SQRT2 / 4.0 * q2) * q5 * q5
            + 3.0 * SQRT2 / 2.0 * q3 * q4 * q5
    }

    /// Biaxiality invariant β̃(Q) = (tr Q²)³ − 6 (tr Q³)²; zero exactly on
    /// uniaxial-or-isotropic tensors, nonnegative otherwise.
    pub fn biaxiality(&self) -> f64 {
        let t2 = self.trace_q2();
        let t3 = self.trace_q3();
        t2.powi(3) - 6.0 * t3 * t3
    }

    /// Biaxiality normalized by (tr Q²)³; in [0, 1] up to rounding, 0 for
    /// uniaxial states. Returns 0 for the zero tensor.
    pub fn biaxiality_normalized(&self) -> f64 {
        let t2 = self.trace_q2();
        if t2 == 0.0 {
            0.0
        } else {
            self.biaxiality() / t2.powi(3)
        }
    }

    /// Frobenius norm (= sqrt(tr Q²) since the basis is orthonormal).
    pub fn norm(&self) -> f64 {
        self.trace_q2().sqrt()
    }

    pub fn dot(&self, other: &QTensor) -> f64 {
        self.q.iter().zip(other.q.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, c: f64) -> QTensor {
        let mut q = self.q;
        for v in &mut q {
            *v *= c;
        }
        QTensor { q }
    }
}

impl std::ops::Add for QTensor {
    type Output = QTensor;
    fn add(self, rhs: QTensor) -> QTensor {
        let mut q = self.q;
        for (a, b) in q.iter_mut().zip(rhs.q.iter()) {
            *a += b;
        }
        QTensor { q }
    }
}

impl std::ops::Sub for QTensor {
    type Output = QTensor;
    fn sub(self, rhs: QTensor) -> QTensor {
        let mut q = self.q;
        for (a, b) in q.iter_mut().zip(rhs.q.iter()) {
            *a -= b;
        }
        QTensor { q }
    }
}

/// Scalar order parameter + distinguished eigenvector of a uniaxial tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniaxialPair {
    pub s: f64,
    pub n: Vec3,
}

/// Result of `uniaxial_decompose`; `degenerate` flags a near-isotropic input
/// returned as s = 0, n = e_z by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniaxialDecomposition {
    pub s: f64,
    pub n: Vec3,
    pub degenerate: bool,
}

/// Q = s (n⊗n − I/3) in basis coefficients. Rejects non-unit directors.
pub fn uniaxial_compose(s: f64, n: &Vec3) -> Result<QTensor, TensorError> {
    let norm = n.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(TensorError::NonUnitDirector { norm });
    }
    Ok(uniaxial_compose_unchecked(s, n))
}

/// Same as `uniaxial_compose` for callers that guarantee |n| = 1.
pub fn uniaxial_compose_unchecked(s: f64, n: &Vec3) -> QTensor {
    let s6 = 6.0_f64.sqrt();
    QTensor::from_coeffs([
        s * (n.z * n.z - 1.0 / 3.0) * s6 / 2.0,
        s * (n.x * n.x - n.y * n.y) / SQRT2,
        s * SQRT2 * n.x * n.y,
        s * SQRT2 * n.x * n.z,
        s * SQRT2 * n.y * n.z,
    ])
}

/// Fixes the sign of an eigenvector so its first nonzero component is
/// positive (n and −n represent the same director).
pub fn canonical_director_sign(v: &Vec3) -> Vec3 {
    for c in [v.x, v.y, v.z] {
        if c.abs() > 1e-9 {
            return if c < 0.0 { -v } else { *v };
        }
    }
    *v
}

/// Recovers (s, n) from a uniaxial tensor. The director is the eigenvector of
/// the largest-magnitude eigenvalue, sign-fixed by `canonical_director_sign`.
///
/// `tol` bounds the admissible biaxiality relative to |Q|^6 (use
/// [`UNIAXIALITY_TOL`] unless there is a reason not to).
pub fn uniaxial_decompose(
    q: &QTensor,
    tol: f64,
) -> Result<UniaxialDecomposition, TensorError> {
    let norm = q.norm();
    if norm < tol.max(1e-300) {
        return Ok(UniaxialDecomposition {
            s: 0.0,
            n: Vec3::z(),
            degenerate: true,
        });
    }
    let rel_biax = q.biaxiality() / norm.powi(6);
    if rel_biax > tol {
        return Err(TensorError::BiaxialInput {
            relative_biaxiality: rel_biax,
            tolerance: tol,
        });
    }
    let eig = q.to_matrix().symmetric_eigen();
    // Pick the largest-magnitude eigenvalue; ties broken by lexicographic
    // eigenvector order for determinism.
    let mut best = 0;
    for i in 1..3 {
        let a = eig.eigenvalues[i].abs();
        let b = eig.eigenvalues[best].abs();
        if a > b + 1e-15 * norm {
            best = i;
        } else if (a - b).abs() <= 1e-15 * norm {
            let vi = eig.eigenvectors.column(i);
            let vb = eig.eigenvectors.column(best);
            for k in 0..3 {
                if vi[k] < vb[k] - 1e-15 {
                    best = i;
                    break;
                }
                if vi[k] > vb[k] + 1e-15 {
                    break;
                }
            }
        }
    }
    let lambda = eig.eigenvalues[best];
    let n = canonical_director_sign(&Vec3::from(eig.eigenvectors.column(best)).normalize());
    Ok(UniaxialDecomposition {
        s: 1.5 * lambda,
        n,
        degenerate: false,
    })
}

/// Symmetric part S(A) = (A + Aᵀ)/2.
pub fn sym_part(a: &Mat3) -> Mat3 {
    (a + a.transpose()) * 0.5
}

/// Symmetric traceless part as a matrix.
pub fn st_matrix(a: &Mat3) -> Mat3 {
    sym_part(a) - Mat3::identity() * (a.trace() / 3.0)
}

/// Symmetric traceless part ST(A) = (A + Aᵀ)/2 − (tr A/3) I, in the basis.
pub fn sym_traceless_part(a: &Mat3) -> QTensor {
    QTensor::project_matrix(&st_matrix(a))
}

/// Symmetric tensor product (u ⊙ v)ᵢⱼ = (uᵢvⱼ + uⱼvᵢ)/2.
pub fn sym_outer(u: &Vec3, v: &Vec3) -> Mat3 {
    let uv = u * v.transpose();
    (uv + uv.transpose()) * 0.5
}

/// Orthonormal frame (n, m, p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub n: Vec3,
    pub m: Vec3,
    pub p: Vec3,
}

impl Frame {
    /// Frame from director angles: n = (sin f cos g, sin f sin g, cos f),
    /// m = (cos f cos g, cos f sin g, −sin f), p = (−sin g, cos g, 0).
    pub fn from_angles(f: f64, g: f64) -> Frame {
        let (sf, cf) = f.sin_cos();
        let (sg, cg) = g.sin_cos();
        Frame {
            n: Vec3::new(sf * cg, sf * sg, cf),
            m: Vec3::new(cf * cg, cf * sg, -sf),
            p: Vec3::new(-sg, cg, 0.0),
        }
    }

    /// Largest pairwise-orthogonality / completeness defect.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        worst = worst.max(self.n.dot(&self.m).abs());
        worst = worst.max(self.n.dot(&self.p).abs());
        worst = worst.max(self.m.dot(&self.p).abs());
        let completeness = self.n * self.n.transpose()
            + self.m * self.m.transpose()
            + self.p * self.p.transpose()
            - Mat3::identity();
        worst.max(completeness.norm())
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        let d = self.orthonormality_defect();
        if d > 1e-10 {
            Err(TensorError::NotOrthonormal { deviation: d })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn basis_is_orthonormal() {
        let e = basis();
        for i in 0..5 {
            for j in 0..5 {
                let dot = e[i].dot(&e[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (dot - expect).abs() < 1e-15,
                    "<E{},E{}> = {}",
                    i + 1,
                    j + 1,
                    dot
                );
            }
        }
    }

    #[test]
    fn from_matrix_zero_and_e1() {
        let z = QTensor::from_matrix(&Mat3::zeros()).unwrap();
        assert_eq!(z.coeffs(), [0.0; 5]);

        // sqrt(3/2)(ez⊗ez − I/3) is exactly E1.
        let e1 = basis()[0];
        let q = QTensor::from_matrix(&e1).unwrap();
        assert_relative_eq!(q.coeffs()[0], 1.0, max_relative = 1e-14);
        for k in 1..5 {
            assert!(q.coeffs()[k].abs() < 1e-15);
        }
    }

    #[test]
    fn from_matrix_uniaxial_ez() {
        // uniaxial_compose(1, e_z) projects onto E1 with coefficient sqrt(2/3).
        let q = uniaxial_compose(1.0, &Vec3::z()).unwrap();
        assert_relative_eq!(q.coeffs()[0], (2.0f64 / 3.0).sqrt(), max_relative = 1e-14);
        for k in 1..5 {
            assert!(q.coeffs()[k].abs() < 1e-15);
        }
    }

    #[test]
    fn from_matrix_rejects_bad_input() {
        let asym = Mat3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            QTensor::from_matrix(&asym),
            Err(TensorError::NotSymmetric { .. })
        ));
        let traced = Mat3::identity();
        assert!(matches!(
            QTensor::from_matrix(&traced),
            Err(TensorError::NotTraceless { .. })
        ));
    }

    #[test]
    fn matrix_roundtrip() {
        let q = QTensor::from_coeffs([0.3, -1.2, 0.7, 0.05, -0.4]);
        let back = QTensor::from_matrix(&q.to_matrix()).unwrap();
        for k in 0..5 {
            assert_relative_eq!(back.coeffs()[k], q.coeffs()[k], epsilon = 1e-14);
        }
        let m = q.to_matrix();
        assert!(m.trace().abs() < 1e-14 * m.norm().max(1.0));
        assert!((m - m.transpose()).norm() < 1e-15);
    }

    #[test]
    fn trace_invariants_match_matrix_level() {
        let q = QTensor::from_coeffs([0.9, -0.2, 0.31, -0.77, 0.12]);
        let m = q.to_matrix();
        assert_relative_eq!(q.trace_q2(), (m * m).trace(), max_relative = 1e-13);
        assert_relative_eq!(q.trace_q3(), (m * m * m).trace(), max_relative = 1e-13);
    }

    #[test]
    fn trace_q2_uniaxial_values() {
        assert_eq!(QTensor::ZERO.trace_q2(), 0.0);
        let q1 = uniaxial_compose(1.0, &Vec3::z()).unwrap();
        assert_relative_eq!(q1.trace_q2(), 2.0 / 3.0, max_relative = 1e-14);
        // 2 s² / 3 with s = 3.
        let n = Vec3::new(1.0, 2.0, -2.0).normalize();
        let q3 = uniaxial_compose(3.0, &n).unwrap();
        assert_relative_eq!(q3.trace_q2(), 6.0, max_relative = 1e-13);
    }

    #[test]
    fn trace_q3_values() {
        assert_eq!(QTensor::ZERO.trace_q3(), 0.0);
        // eigenvalue cubes: (2/3)³ + 2(−1/3)³ = 2/9 for s = 1.
        let n = Vec3::new(0.6, 0.0, 0.8);
        let q = uniaxial_compose(1.0, &n).unwrap();
        assert_relative_eq!(q.trace_q3(), 2.0 / 9.0, max_relative = 1e-13);
        // diag(c, 0, −c): cubes cancel.
        let c = 0.83;
        let m = Mat3::from_diagonal(&Vec3::new(c, 0.0, -c));
        let q = QTensor::from_matrix(&m).unwrap();
        assert!(q.trace_q3().abs() < 1e-15);
    }

    #[test]
    fn biaxiality_values() {
        assert_eq!(QTensor::ZERO.biaxiality(), 0.0);
        // uniaxial: |β̃| < 1e-12 max(1, s⁶)
        let n = Vec3::new(-0.48, 0.6, 0.64).normalize();
        for s in [-2.0, 0.3, 1.7] {
            let q = uniaxial_compose(s, &n).unwrap();
            let bound = 1e-12 * s.powi(6).max(1.0);
            assert!(q.biaxiality().abs() < bound, "β̃ = {}", q.biaxiality());
        }
        // maximally biaxial diag(c, 0, −c): β̃ = 8 c⁶.
        let c = 1.3;
        let q = QTensor::from_matrix(&Mat3::from_diagonal(&Vec3::new(c, 0.0, -c))).unwrap();
        assert_relative_eq!(q.biaxiality(), 8.0 * c.powi(6), max_relative = 1e-12);
    }

    #[test]
    fn compose_eigenvalues() {
        // (1, e_z) → diag(−1/3, −1/3, 2/3)
        let q = uniaxial_compose(1.0, &Vec3::z()).unwrap().to_matrix();
        assert_relative_eq!(q[(2, 2)], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(q[(0, 0)], -1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(q[(1, 1)], -1.0 / 3.0, max_relative = 1e-14);
        // (−2, e_x) → diag(−4/3, 2/3, 2/3)
        let q = uniaxial_compose(-2.0, &Vec3::x()).unwrap().to_matrix();
        assert_relative_eq!(q[(0, 0)], -4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(q[(1, 1)], 2.0 / 3.0, max_relative = 1e-14);
        // (0, n) → 0
        let q = uniaxial_compose(0.0, &Vec3::y()).unwrap();
        assert_eq!(q.coeffs(), [0.0; 5]);
        // non-unit director rejected
        assert!(uniaxial_compose(1.0, &Vec3::new(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn decompose_roundtrip() {
        let d = uniaxial_decompose(
            &QTensor::from_matrix(&Mat3::from_diagonal(&Vec3::new(
                -1.0 / 3.0,
                -1.0 / 3.0,
                2.0 / 3.0,
            )))
            .unwrap(),
            UNIAXIALITY_TOL,
        )
        .unwrap();
        assert_relative_eq!(d.s, 1.0, max_relative = 1e-12);
        assert_relative_eq!(d.n.z, 1.0, max_relative = 1e-12);
        assert!(!d.degenerate);

        let q = uniaxial_compose(-0.7, &Vec3::x()).unwrap();
        let d = uniaxial_decompose(&q, UNIAXIALITY_TOL).unwrap();
        assert_relative_eq!(d.s, -0.7, max_relative = 1e-12);
        assert_relative_eq!(d.n.x, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn decompose_rejects_biaxial() {
        let c = 0.5;
        let q = QTensor::from_matrix(&Mat3::from_diagonal(&Vec3::new(c, 0.0, -c))).unwrap();
        assert!(matches!(
            uniaxial_decompose(&q, UNIAXIALITY_TOL),
            Err(TensorError::BiaxialInput { .. })
        ));
    }

    #[test]
    fn decompose_degenerate_isotropic() {
        let d = uniaxial_decompose(&QTensor::ZERO, UNIAXIALITY_TOL).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.s, 0.0);
        assert_eq!(d.n, Vec3::z());
    }

    #[test]
    fn st_operators() {
        assert!(st_matrix(&Mat3::identity()).norm() < 1e-15);
        // e_x ⊙ e_y = E3 / sqrt(2)
        let m = sym_outer(&Vec3::x(), &Vec3::y());
        assert!((m - basis()[2] / SQRT2).norm() < 1e-15);
        // ST(n⊗n) = n⊙n − I/3 for unit n
        let n = Vec3::new(2.0, -1.0, 2.0).normalize();
        let st = st_matrix(&(n * n.transpose()));
        let expect = sym_outer(&n, &n) - Mat3::identity() / 3.0;
        assert!((st - expect).norm() < 1e-15);
    }

    #[test]
    fn frame_from_angles_is_orthonormal() {
        for (f, g) in [(0.3, 1.1), (1.5, -2.0), (2.8, 4.4)] {
            let fr = Frame::from_angles(f, g);
            assert!(fr.orthonormality_defect() < 1e-12);
        }
    }
}
