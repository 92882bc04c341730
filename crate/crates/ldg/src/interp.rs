//! Local cubic interpolation on uniform tables.

/// 4-point Lagrange interpolation on a uniform ascending table.
pub fn lagrange4(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    debug_assert!(n >= 4);
    let h = xs[1] - xs[0];
    let pos = ((x - xs[0]) / h).floor() as isize;
    let start = pos.saturating_sub(1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (x - xs[start + b]) / (xs[start + a] - xs[start + b]);
            }
        }
        acc += w * ys[start + a];
    }
    acc
}

/// Derivative of the 4-point Lagrange interpolant.
pub fn lagrange4_derivative(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    debug_assert!(n >= 4);
    let h = xs[1] - xs[0];
    let pos = ((x - xs[0]) / h).floor() as isize;
    let start = pos.saturating_sub(1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut dw = 0.0;
        for c in 0..4 {
            if c == a {
                continue;
            }
            let mut term = 1.0 / (xs[start + a] - xs[start + c]);
            for b in 0..4 {
                if b != a && b != c {
                    term *= (x - xs[start + b]) / (xs[start + a] - xs[start + b]);
                }
            }
            dw += term;
        }
        acc += dw * ys[start + a];
    }
    acc
}
