//! Independent reference solvers shared by the oracle tests and the acceptance suite.
//!
//! Nothing here calls the library's solvers: canonical correlation goes through Cholesky
//! factors and nalgebra's SVD, the trace maximum through projected gradient ascent, and
//! the SVM dual through an accelerated projected-gradient QP.

#![allow(dead_code)]

use planefinder_core::DMatrix;
use rand::Rng;

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

pub fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

/// Textbook CCA on centered data: with `Cxx = Lx Lx^T`, `Cyy = Ly Ly^T`, the SVD of
/// `Lx^-1 Cxy Ly^-T` gives the canonical directions `Lx^-T U` and `Ly^-T V`.
pub fn cca_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>, c: usize) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let (xc, yc) = (centered(x), centered(y));
    let cxx = xc.transpose() * &xc / n;
    let cyy = yc.transpose() * &yc / n;
    let cxy = xc.transpose() * &yc / n;
    let lx = cxx.cholesky().expect("Cxx positive definite").l();
    let ly = cyy.cholesky().expect("Cyy positive definite").l();
    let lx_inv = lx.clone().try_inverse().unwrap();
    let ly_inv = ly.clone().try_inverse().unwrap();
    let k = &lx_inv * cxy * ly_inv.transpose();
    let svd = k.svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let ux = DMatrix::from_fn(u.nrows(), c, |i, j| u[(i, order[j])]);
    let vy = DMatrix::from_fn(vt.ncols(), c, |i, j| vt[(order[j], i)]);
    let rho = order[..c].iter().map(|&i| svd.singular_values[i]).collect();
    (lx_inv.transpose() * ux, ly_inv.transpose() * vy, rho)
}

fn orthonormal_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let q = a.clone().qr().q();
    q.columns(0, a.ncols()).into_owned()
}

/// Largest principal angle between the column spaces of `a` and `b`, via the sine of the
/// residual of `b`'s basis after projecting onto `a`'s (accurate for tiny angles).
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let s = resid.singular_values();
    s.iter().cloned().fold(0.0, f64::max).min(1.0).asin()
}

/// Best `a^T M b` with `a^T Cx a = b^T Cy b = 1`, by gradient ascent in the metric of
/// each constraint followed by rescaling back onto it, from `restarts` random starting
/// points. `xc`, `yc` must already be centered.
pub fn max_trace_projected_gradient(
    xc: &DMatrix<f64>,
    yc: &DMatrix<f64>,
    s: &DMatrix<f64>,
    restarts: usize,
    iterations: usize,
    rng: &mut impl Rng,
) -> f64 {
    let n = xc.nrows() as f64;
    let cx = xc.transpose() * xc / n;
    let cy = yc.transpose() * yc / n;
    let m = xc.transpose() * s * yc;
    let ga_map = cx.clone().try_inverse().expect("Cx invertible") * &m;
    let gb_map = cy.clone().try_inverse().expect("Cy invertible") * m.transpose();
    let step = 1.0 / ga_map.norm().max(gb_map.norm()).max(1e-12);
    let project = |v: DMatrix<f64>, c: &DMatrix<f64>| {
        let q = (v.transpose() * c * &v)[(0, 0)];
        v / q.sqrt()
    };
    let mut best = f64::NEG_INFINITY;
    for _ in 0..restarts {
        let mut a = project(random_matrix(rng, xc.ncols(), 1), &cx);
        let mut b = project(random_matrix(rng, yc.ncols(), 1), &cy);
        for _ in 0..iterations {
            let ga = &ga_map * &b;
            let gb = &gb_map * &a;
            a = project(&a + ga * step, &cx);
            b = project(&b + gb * step, &cy);
        }
        best = best.max((a.transpose() * &m * &b)[(0, 0)]);
    }
    best
}

/// Projection onto `{0 <= a <= upper, y^T a = 0}` by bisection on the multiplier.
fn project_feasible(v: &[f64], y: &[f64], upper: &[f64]) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> { v.iter().zip(y).zip(upper).map(|((&vi, &yi), &u)| (vi - nu * yi).clamp(0.0, u)).collect() };
    let g = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(&at(lo)) < 0.0 {
        lo *= 2.0;
    }
    while g(&at(hi)) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximizes `sum a - 1/2 a^T Q a`, `Q_ij = y_i y_j K_ij`, over the SVM dual feasible set
/// with restarted FISTA. Returns `(alpha, objective)`.
pub fn svm_dual_qp(gram: &[f64], y: &[f64], upper: &[f64], iterations: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * gram[i * n + j]);
    let lipschitz = q.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(1e-12, f64::max);
    let objective = |a: &[f64]| {
        let av = DMatrix::from_column_slice(n, 1, a);
        a.iter().sum::<f64>() - 0.5 * (av.transpose() * &q * &av)[(0, 0)]
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&a);
    for _ in 0..iterations {
        let zv = DMatrix::from_column_slice(n, 1, &z);
        let qz = &q * zv;
        let stepped: Vec<f64> = (0..n).map(|i| z[i] + (1.0 - qz[i]) / lipschitz).collect();
        let next = project_feasible(&stepped, y, upper);
        let f_next = objective(&next);
        if f_next < f_prev {
            // restart momentum when the objective drops
            t = 1.0;
            z = a.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - a[i])).collect();
        a = next;
        t = t_next;
        f_prev = f_next;
    }
    let f = objective(&a);
    (a, f)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}
