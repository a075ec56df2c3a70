//! Supervised two-view embedding.
//!
//! Both bag-of-words views are projected into a shared `c`-dimensional space by
//! maximizing `tr(Wx^T X^T S Y Wy)` subject to `(X Wx)^T (X Wx) = n I` and the same for
//! `Y`, where `S` holds the pairwise semantic similarity of the training planes. The
//! problem has a closed form: whiten each view, take the SVD of the whitened cross
//! matrix, and map the top singular vectors back.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::thin_svd;
use crate::{DMatrix, Error, Result};

/// One-hot plane label (last slot = not a standard plane) and one-hot diagnosis label
/// (last slot = normal).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticLabels {
    plane: Vec<u8>,
    diagnosis: Vec<u8>,
}

fn one_hot_index(v: &[u8]) -> Option<usize> {
    let ones = v.iter().filter(|&&x| x == 1).count();
    let zeros = v.iter().filter(|&&x| x == 0).count();
    (ones == 1 && ones + zeros == v.len()).then(|| v.iter().position(|&x| x == 1).unwrap())
}

impl SemanticLabels {
    pub fn new(plane: Vec<u8>, diagnosis: Vec<u8>) -> Result<Self> {
        if one_hot_index(&plane).is_none() || one_hot_index(&diagnosis).is_none() {
            return Err(Error::InvalidArgument(format!("labels must be one-hot: {plane:?} {diagnosis:?}")));
        }
        Ok(Self { plane, diagnosis })
    }

    /// `plane_slots = n_p + 1`, `diagnosis_slots = n_d + 1`.
    pub fn one_hot(plane: usize, plane_slots: usize, diagnosis: usize, diagnosis_slots: usize) -> Result<Self> {
        if plane >= plane_slots || diagnosis >= diagnosis_slots {
            return Err(Error::InvalidArgument(format!(
                "label index out of range: plane {plane}/{plane_slots}, diagnosis {diagnosis}/{diagnosis_slots}"
            )));
        }
        let mut p = vec![0; plane_slots];
        let mut d = vec![0; diagnosis_slots];
        p[plane] = 1;
        d[diagnosis] = 1;
        Ok(Self { plane: p, diagnosis: d })
    }

    pub fn plane(&self) -> &[u8] {
        &self.plane
    }

    pub fn diagnosis(&self) -> &[u8] {
        &self.diagnosis
    }

    pub fn plane_index(&self) -> usize {
        one_hot_index(&self.plane).expect("validated")
    }

    pub fn diagnosis_index(&self) -> usize {
        one_hot_index(&self.diagnosis).expect("validated")
    }

    /// Number of standard-plane classes `n_p`.
    pub fn plane_classes(&self) -> usize {
        self.plane.len() - 1
    }

    /// Standard-plane class id, or `None` for the "not a standard plane" slot.
    pub fn standard_class(&self) -> Option<usize> {
        let i = self.plane_index();
        (i < self.plane_classes()).then_some(i)
    }

    /// True when the last diagnosis slot (normal) is set.
    pub fn is_normal(&self) -> bool {
        self.diagnosis_index() == self.diagnosis.len() - 1
    }
}

fn dot_u8(a: &[u8], b: &[u8]) -> u32 {
    a.iter().zip(b).map(|(&x, &y)| x as u32 * y as u32).sum()
}

/// 0 for different planes, `1 + (Ld_a . Ld_b)` for the same plane.
pub fn semantic_similarity(a: &SemanticLabels, b: &SemanticLabels) -> Result<f64> {
    if a.plane.len() != b.plane.len() {
        return Err(Error::DimensionMismatch { expected: a.plane.len(), got: b.plane.len() });
    }
    if a.diagnosis.len() != b.diagnosis.len() {
        return Err(Error::DimensionMismatch { expected: a.diagnosis.len(), got: b.diagnosis.len() });
    }
    if dot_u8(&a.plane, &b.plane) == 0 {
        return Ok(0.0);
    }
    Ok(1.0 + dot_u8(&a.diagnosis, &b.diagnosis) as f64)
}

/// Symmetric `n x n` similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch { expected: values.nrows(), got: values.ncols() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("similarity matrix"));
        }
        Ok(Self { values })
    }

    /// Every sample its own class; reduces the fit to classical CCA.
    pub fn identity(n: usize) -> Self {
        Self { values: DMatrix::identity(n, n) }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

pub fn build_similarity_matrix(labels: &[SemanticLabels]) -> Result<SimilarityMatrix> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 labeled samples, got {n}")));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s = semantic_similarity(&labels[i], &labels[j])?;
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    Ok(SimilarityMatrix { values: m })
}

/// Ridge added to each view's covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Absolute(f64),
    /// `factor * trace(C) / d`, computed per view.
    Relative(f64),
}

impl Default for Epsilon {
    fn default() -> Self {
        Epsilon::Relative(1e-6)
    }
}

/// Which code feeds the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum View {
    Static,
    Spacetime,
    /// Elementwise mean of the two codes.
    Fused,
}

impl View {
    pub fn name(self) -> &'static str {
        match self {
            View::Static => "static",
            View::Spacetime => "spacetime",
            View::Fused => "fused",
        }
    }
}

impl FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(View::Static),
            "spacetime" => Ok(View::Spacetime),
            "fused" => Ok(View::Fused),
            other => Err(Error::InvalidArgument(format!("unknown view `{other}` (static|spacetime|fused)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub wx: DMatrix<f64>,
    pub wy: DMatrix<f64>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    pub c: usize,
    pub epsilon_x: f64,
    pub epsilon_y: f64,
    pub train_n: usize,
    /// Top `c` singular values of the whitened cross matrix, descending.
    pub correlations: Vec<f64>,
}

struct Factor {
    /// Left singular vectors of the centered, `1/sqrt(n)`-scaled data (`n x r`).
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    /// Right singular vectors (`d x r`).
    v: DMatrix<f64>,
    mean: Vec<f64>,
    epsilon: f64,
}

fn column_means(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows() as f64;
    m.column_iter().map(|c| c.sum() / n).collect()
}

fn factor(m: &DMatrix<f64>, eps: Epsilon, view: &'static str, c: usize) -> Result<Factor> {
    let (n, d) = m.shape();
    let mean = column_means(m);
    let mut centered = m.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    centered /= (n as f64).sqrt();
    let trace = centered.norm_squared();
    let epsilon = match eps {
        Epsilon::Absolute(e) => e,
        Epsilon::Relative(f) => f * trace / d as f64,
    };
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    let svd = thin_svd(&centered);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let tol = smax * f64::EPSILON * n.max(d) as f64;
    let r = svd.s.iter().take_while(|&&v| v > tol && smax > 0.0).count();
    if r < c {
        return Err(Error::RankDeficient { view, rank: r, code_len: c });
    }
    let u = svd.u.columns(0, r).into_owned();
    let v = svd.v.columns(0, r).into_owned();
    let sigma = svd.s[..r].to_vec();
    Ok(Factor { u, sigma, v, mean, epsilon })
}

impl Factor {
    /// `sigma_i / sqrt(sigma_i^2 + epsilon)`: the whitened scale of each retained direction.
    fn whitened_scale(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s / (s * s + self.epsilon).sqrt()).collect()
    }

    fn inverse_root(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| 1.0 / (s * s + self.epsilon).sqrt()).collect()
    }
}

/// Closed-form fit. `x` is `n x d_x`, `y` is `n x d_y`, both one row per training plane.
pub fn fit_embedding(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    s: &SimilarityMatrix,
    c: usize,
    eps: Epsilon,
) -> Result<EmbeddingModel> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.nrows() });
    }
    if s.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: s.n() });
    }
    if c == 0 || c > x.ncols().min(y.ncols()).min(n) {
        return Err(Error::InvalidArgument(format!(
            "code length {c} must be in 1..=min(d_x={}, d_y={}, n={n})",
            x.ncols(),
            y.ncols()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding input"));
    }
    let fx = factor(x, eps, "static", c)?;
    let fy = factor(y, eps, "spacetime", c)?;
    // Whitened cross matrix restricted to the data ranges:
    // diag(gx) Ux^T S Uy diag(gy), with g = sigma / sqrt(sigma^2 + eps).
    let mut core = fx.u.transpose() * s.matrix() * &fy.u;
    for (i, g) in fx.whitened_scale().into_iter().enumerate() {
        core.row_mut(i).scale_mut(g);
    }
    for (j, g) in fy.whitened_scale().into_iter().enumerate() {
        core.column_mut(j).scale_mut(g);
    }
    let svd = thin_svd(&core);
    if svd.s.len() < c {
        return Err(Error::RankDeficient { view: "cross", rank: svd.s.len(), code_len: c });
    }
    let mut a = svd.u.columns(0, c).into_owned();
    let mut b = svd.v.columns(0, c).into_owned();
    let correlations = svd.s[..c].to_vec();

    // Sign convention on the whitened basis Vx A: largest-magnitude entry positive.
    let basis = &fx.v * &a;
    for k in 0..c {
        let col = basis.column(k);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            a.column_mut(k).neg_mut();
            b.column_mut(k).neg_mut();
        }
    }

    let project = |f: &Factor, coef: &DMatrix<f64>| {
        let mut scaled = coef.clone();
        for (i, g) in f.inverse_root().into_iter().enumerate() {
            scaled.row_mut(i).scale_mut(g);
        }
        &f.v * scaled
    };
    let wx = project(&fx, &a);
    let wy = project(&fy, &b);
    Ok(EmbeddingModel {
        wx,
        wy,
        mean_x: fx.mean,
        mean_y: fy.mean,
        c,
        epsilon_x: fx.epsilon,
        epsilon_y: fy.epsilon,
        train_n: n,
        correlations,
    })
}

fn project_row(v: &[f64], mean: &[f64], w: &DMatrix<f64>) -> Result<Vec<f64>> {
    if v.len() != w.nrows() {
        return Err(Error::DimensionMismatch { expected: w.nrows(), got: v.len() });
    }
    let centered: Vec<f64> = v.iter().zip(mean).map(|(a, m)| a - m).collect();
    Ok(w.column_iter().map(|col| col.iter().zip(&centered).map(|(p, q)| p * q).sum()).collect())
}

impl EmbeddingModel {
    pub fn dim_x(&self) -> usize {
        self.wx.nrows()
    }

    pub fn dim_y(&self) -> usize {
        self.wy.nrows()
    }

    /// Checks that all parts agree on `c` and the input dimensions.
    pub fn validate(&self) -> Result<()> {
        let c = self.c;
        if self.wx.ncols() != c || self.wy.ncols() != c || self.correlations.len() != c {
            return Err(Error::DimensionMismatch { expected: c, got: self.wx.ncols() });
        }
        if self.mean_x.len() != self.wx.nrows() {
            return Err(Error::DimensionMismatch { expected: self.wx.nrows(), got: self.mean_x.len() });
        }
        if self.mean_y.len() != self.wy.nrows() {
            return Err(Error::DimensionMismatch { expected: self.wy.nrows(), got: self.mean_y.len() });
        }
        if self.wx.iter().chain(self.wy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding projection"));
        }
        Ok(())
    }

    /// `(x - mean_x) Wx`.
    pub fn embed_static(&self, x: &[f64]) -> Result<Vec<f64>> {
        project_row(x, &self.mean_x, &self.wx)
    }

    /// `(y - mean_y) Wy`.
    pub fn embed_spacetime(&self, y: &[f64]) -> Result<Vec<f64>> {
        project_row(y, &self.mean_y, &self.wy)
    }

    pub fn embed(&self, x: Option<&[f64]>, y: Option<&[f64]>, view: View) -> Result<Vec<f64>> {
        let missing = |name: &str| Error::InvalidArgument(format!("view `{}` needs the {name} features", view.name()));
        match view {
            View::Static => self.embed_static(x.ok_or_else(|| missing("static"))?),
            View::Spacetime => self.embed_spacetime(y.ok_or_else(|| missing("spacetime"))?),
            View::Fused => {
                let zx = self.embed_static(x.ok_or_else(|| missing("static"))?)?;
                let zy = self.embed_spacetime(y.ok_or_else(|| missing("spacetime"))?)?;
                Ok(zx.iter().zip(&zy).map(|(a, b)| 0.5 * (a + b)).collect())
            }
        }
    }

    /// Codes for every row of `x` (static view) as an `n x c` matrix.
    pub fn embed_rows_static(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        embed_rows(x, &self.mean_x, &self.wx)
    }

    pub fn embed_rows_spacetime(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        embed_rows(y, &self.mean_y, &self.wy)
    }
}

fn embed_rows(m: &DMatrix<f64>, mean: &[f64], w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.ncols() != w.nrows() {
        return Err(Error::DimensionMismatch { expected: w.nrows(), got: m.ncols() });
    }
    let mut centered = m.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    Ok(centered * w)
}

fn check_shapes(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    wx: &DMatrix<f64>,
    wy: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<()> {
    let n = x.nrows();
    let checks = [
        (n, y.nrows()),
        (n, s.nrows()),
        (n, s.ncols()),
        (x.ncols(), wx.nrows()),
        (y.ncols(), wy.nrows()),
        (wx.ncols(), wy.ncols()),
    ];
    for (expected, got) in checks {
        if expected != got {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }
    Ok(())
}

/// `|| (1/c) (X Wx)(Y Wy)^T - S ||_F^2`, with `X` and `Y` used as given.
pub fn embedding_objective(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    wx: &DMatrix<f64>,
    wy: &DMatrix<f64>,
    s: &DMatrix<f64>,
    c: usize,
) -> Result<f64> {
    check_shapes(x, y, wx, wy, s)?;
    if c == 0 {
        return Err(Error::InvalidArgument("code length must be positive".into()));
    }
    let p = (x * wx) * (y * wy).transpose() / c as f64;
    Ok((p - s).norm_squared())
}

/// `tr(Wx^T X^T S Y Wy)`, with `X` and `Y` used as given.
pub fn trace_objective(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    wx: &DMatrix<f64>,
    wy: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<f64> {
    check_shapes(x, y, wx, wy, s)?;
    let zx = x * wx;
    let zy = y * wy;
    Ok((zx.transpose() * s * zy).trace())
}

/// Subtracts the stored column means from `m`.
pub fn center_rows(m: &DMatrix<f64>, mean: &[f64]) -> Result<DMatrix<f64>> {
    if m.ncols() != mean.len() {
        return Err(Error::DimensionMismatch { expected: mean.len(), got: m.ncols() });
    }
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    Ok(out)
}
