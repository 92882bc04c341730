//! Classification of the homogeneous Euler equation A s″ + B s′/r + C s/r² = 0
//! through its indicial quadratic A α(α−1) + B α + C = 0.

use crate::error::SolverError;

/// The three solution forms of the Euler equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EulerSolutionForm {
    /// γ₁ r^α₁ + γ₂ r^α₂ with distinct real exponents.
    DistinctReal { alpha1: f64, alpha2: f64 },
    /// (γ₁ + γ₂ ln r) r^α.
    RepeatedRoot { alpha: f64 },
    /// r^a (γ₁ cos(b ln r) + γ₂ sin(b ln r)).
    ComplexPair { real: f64, imag: f64 },
}

/// Classifies A s″ + B s′/r + C s/r² = 0 (A ≠ 0) by its indicial roots.
pub fn euler_ode_exponents(a: f64, b: f64, c: f64) -> Result<EulerSolutionForm, SolverError> {
    if a == 0.0 {
        return Err(SolverError::InvalidParameter(
            "Euler classification needs A ≠ 0 (use the first-order reduction)".into(),
        ));
    }
    // A α² + (B − A) α + C = 0
    let p = b - a;
    let disc = p * p - 4.0 * a * c;
    let scale = p * p + (4.0 * a * c).abs() + 1e-300;
    if disc.abs() <= 1e-12 * scale {
        Ok(EulerSolutionForm::RepeatedRoot { alpha: -p / (2.0 * a) })
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        let alpha1 = (-p + sq) / (2.0 * a);
        let alpha2 = (-p - sq) / (2.0 * a);
        Ok(EulerSolutionForm::DistinctReal { alpha1, alpha2 })
    } else {
        Ok(EulerSolutionForm::ComplexPair {
            real: -p / (2.0 * a),
            imag: (-disc).sqrt() / (2.0 * a.abs()),
        })
    }
}

impl EulerSolutionForm {
    /// (s, s′, s″) of the closed-form solution with coefficients (γ₁, γ₂).
    pub fn evaluate(&self, gamma1: f64, gamma2: f64, r: f64) -> (f64, f64, f64) {
        match *self {
            EulerSolutionForm::DistinctReal { alpha1, alpha2 } => {
                let term = |g: f64, al: f64| {
                    (
                        g * r.powf(al),
                        g * al * r.powf(al - 1.0),
                        g * al * (al - 1.0) * r.powf(al - 2.0),
                    )
                };
                let t1 = term(gamma1, alpha1);
                let t2 = term(gamma2, alpha2);
                (t1.0 + t2.0, t1.1 + t2.1, t1.2 + t2.2)
            }
            EulerSolutionForm::RepeatedRoot { alpha } => {
                let l = r.ln();
                let s = (gamma1 + gamma2 * l) * r.powf(alpha);
                let ds = r.powf(alpha - 1.0) * (gamma2 + alpha * (gamma1 + gamma2 * l));
                let dds = r.powf(alpha - 2.0)
                    * ((2.0 * alpha - 1.0) * gamma2
                        + alpha * (alpha - 1.0) * (gamma1 + gamma2 * l));
                (s, ds, dds)
            }
            EulerSolutionForm::ComplexPair { real: a, imag: b } => {
                let l = r.ln();
                let (sin, cos) = (b * l).sin_cos();
                let s = r.powf(a) * (gamma1 * cos + gamma2 * sin);
                let c1 = a * gamma1 + b * gamma2;
                let c2 = a * gamma2 - b * gamma1;
                let ds = r.powf(a - 1.0) * (c1 * cos + c2 * sin);
                let d1 = (a - 1.0) * c1 + b * c2;
                let d2 = (a - 1.0) * c2 - b * c1;
                let dds = r.powf(a - 2.0) * (d1 * cos + d2 * sin);
                (s, ds, dds)
            }
        }
    }
}
