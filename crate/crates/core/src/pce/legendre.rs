//! Normalized Legendre polynomials, orthonormal under the uniform
//! probability measure on `[-1, 1]`: `phi_n = sqrt(2n + 1) P_n`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Affine map of `nu` in `[a, b]` onto `[-1, 1]`.
pub fn scale_to_reference<T: Scalar>(nu: T, a: T, b: T) -> Result<T> {
    if !(a < b) {
        return Err(Error::DegenerateBounds {
            row: 0,
            name: String::new(),
            lower: a.as_f64(),
            upper: b.as_f64(),
        });
    }
    Ok(T::lit(2.0) * (nu - a) / (b - a) - T::one())
}

/// `phi_n(x)` for `|x| <= 1` (up to a 1e-12 slack).
pub fn legendre_normalized<T: Scalar>(degree: usize, x: T) -> Result<T> {
    if !(x.abs() <= T::one() + T::lit(1e-12)) {
        return Err(Error::invalid(format!("legendre argument {x} outside [-1, 1]")));
    }
    let mut buf = vec![T::zero(); degree + 1];
    fill_normalized(x, &mut buf);
    Ok(buf[degree])
}

/// Writes `phi_0(x) .. phi_{len-1}(x)` into `out` without range checks;
/// surrogate evaluation extrapolates outside `[-1, 1]` through this path.
pub fn fill_normalized<T: Scalar>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    // classical recurrence (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}
    out[0] = T::one();
    if out.len() > 1 {
        out[1] = x;
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = T::from_usize_lossy(n);
        out[n + 1] = ((nf + nf + T::one()) * x * out[n] - nf * out[n - 1]) / (nf + T::one());
    }
    for (n, p) in out.iter_mut().enumerate().skip(1) {
        *p *= T::from_usize_lossy(2 * n + 1).sqrt();
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (weights sum to 2), by
/// Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
