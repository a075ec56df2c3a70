//! Thin SVD by QR preconditioning and one-sided Jacobi rotations.
//!
//! nalgebra's bidiagonal SVD reconstructs tall matrices only to about 1e-11 relative
//! error; the Jacobi sweep here converges to working precision.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::DMatrix;

const MAX_SWEEPS: usize = 80;

/// `a = u * diag(s) * v^T` with `s` descending, `u` is `m x k`, `v` is `n x k`, `k = min(m, n)`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    if a.nrows() < a.ncols() {
        let t = thin_svd(&a.transpose());
        return ThinSvd { u: t.v, s: t.s, v: t.u };
    }
    let (m, n) = a.shape();
    if n == 0 {
        return ThinSvd { u: DMatrix::zeros(m, 0), s: Vec::new(), v: DMatrix::zeros(0, 0) };
    }
    let (q, r) = if m > n {
        let qr = a.clone().qr();
        (Some(qr.q()), qr.r())
    } else {
        (None, a.clone())
    };
    let (w, s, v) = jacobi(r);
    let u = match q {
        Some(q) => q * w,
        None => w,
    };
    ThinSvd { u, s, v }
}

/// One-sided Jacobi on the columns of a square-or-tall matrix.
fn jacobi(mut w: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let n = w.ncols();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = f64::EPSILON * (w.nrows() as f64).sqrt();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (w.column(p), w.column(q));
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let u = DMatrix::from_fn(w.nrows(), n, |r, k| {
        let j = order[k];
        if norms[j] > 0.0 {
            w[(r, j)] / norms[j]
        } else {
            0.0
        }
    });
    let vv = DMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    (u, order.iter().map(|&j| norms[j]).collect(), vv)
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (a, b) = (m[(r, p)], m[(r, q)]);
        m[(r, p)] = c * a - s * b;
        m[(r, q)] = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(a: &DMatrix<f64>) {
        let t = thin_svd(a);
        let k = a.nrows().min(a.ncols());
        assert_eq!((t.u.shape(), t.v.shape(), t.s.len()), ((a.nrows(), k), (a.ncols(), k), k));
        let rec = &t.u * DMatrix::from_diagonal(&crate::DVector::from_vec(t.s.clone())) * t.v.transpose();
        assert!((rec - a).amax() <= 1e-14 * a.amax().max(1.0) * k as f64);
        assert!((t.u.transpose() * &t.u - DMatrix::identity(k, k)).amax() < 1e-13);
        assert!((t.v.transpose() * &t.v - DMatrix::identity(k, k)).amax() < 1e-13);
        assert!(t.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn reconstructs_tall_wide_and_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (m, n) in [(30, 5), (5, 30), (7, 7), (1, 4), (40, 1)] {
            check(&DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() - 0.5));
        }
    }

    #[test]
    fn matches_known_singular_values() {
        let a = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 4.0, 0.0, 0.0]);
        let t = thin_svd(&a);
        assert!((t.s[0] - 4.0).abs() < 1e-15 && (t.s[1] - 3.0).abs() < 1e-15);
    }
}
