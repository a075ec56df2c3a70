//! Histogram-intersection and linear kernel SVMs trained by SMO, combined one-vs-rest.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Gram matrices up to this many samples are precomputed; larger problems compute rows on demand.
pub const FULL_GRAM_LIMIT: usize = 8192;
const TAU: f64 = 1e-12;
/// Dual coefficients at or below this are dropped from the model.
pub const ALPHA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Hik,
    Linear,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Hik => "hik",
            KernelKind::Linear => "linear",
        }
    }

    #[inline]
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelKind::Hik => a.iter().zip(b).map(|(x, y)| x.min(*y)).sum(),
            KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hik" => Ok(KernelKind::Hik),
            "linear" => Ok(KernelKind::Linear),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}` (hik|linear)"))),
        }
    }
}

fn check_nonnegative(v: &[f64]) -> Result<()> {
    match v.iter().position(|&x| x < 0.0) {
        Some(index) => Err(Error::NegativeEntry { index, value: v[index] }),
        None => Ok(()),
    }
}

/// Histogram intersection `sum_i min(a_i, b_i)`.
pub fn hik(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    check_nonnegative(a)?;
    check_nonnegative(b)?;
    Ok(KernelKind::Hik.eval(a, b))
}

/// Per-dimension min-max scaling to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("scaler input"))?;
        let d = first.len();
        let mut min = first.clone();
        let mut max = first.clone();
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("scaler input"));
            }
            for (i, &v) in r.iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// `(v - min) / (max - min)` clamped to `[0, 1]`; constant dimensions map to 0.5.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(v.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| if hi > lo { ((x - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassWeights {
    /// `w+ = #neg / #pos`, `w- = 1`.
    Balanced,
    Fixed { positive: f64, negative: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    pub kernel: KernelKind,
    pub weights: ClassWeights,
    /// Stop when the maximal KKT violation is at most this.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Fit a min-max scaler on the training features (needed for signed inputs under HIK).
    pub scale: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 1.0, kernel: KernelKind::Hik, weights: ClassWeights::Balanced, tolerance: 1e-4, max_iter: 10_000_000, scale: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// `(positive, negative)`.
    pub class_weights: (f64, f64),
    pub kernel: KernelKind,
    pub scaler: Option<FeatureScaler>,
}

/// A trained model plus the full dual solution over the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub model: SvmModel,
    pub alpha: Vec<f64>,
    pub upper: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// Kernel rows, either all precomputed or computed on demand with a bounded cache.
struct KernelRows<'a> {
    data: &'a [Vec<f64>],
    kernel: KernelKind,
    full: Option<Vec<f64>>,
    cache: Vec<Option<Vec<f64>>>,
    order: Vec<usize>,
    capacity: usize,
    diag: Vec<f64>,
}

impl<'a> KernelRows<'a> {
    fn new(data: &'a [Vec<f64>], kernel: KernelKind) -> Self {
        let n = data.len();
        let diag = data.iter().map(|r| kernel.eval(r, r)).collect();
        let full = (n <= FULL_GRAM_LIMIT).then(|| {
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let k = kernel.eval(&data[i], &data[j]);
                    g[i * n + j] = k;
                    g[j * n + i] = k;
                }
            }
            g
        });
        let cache = if full.is_some() { Vec::new() } else { vec![None; n] };
        Self { data, kernel, full, cache, order: Vec::new(), capacity: 512, diag }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        let n = self.data.len();
        if let Some(g) = &self.full {
            return &g[i * n..(i + 1) * n];
        }
        if self.cache[i].is_none() {
            if self.order.len() >= self.capacity {
                let old = self.order.remove(0);
                self.cache[old] = None;
            }
            let r = self.data.iter().map(|x| self.kernel.eval(&self.data[i], x)).collect();
            self.cache[i] = Some(r);
            self.order.push(i);
        }
        self.cache[i].as_deref().expect("filled")
    }
}

/// `sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij` for a dense row-major Gram matrix.
pub fn dual_objective(alpha: &[f64], y: &[f64], gram: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[i * n + j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Sequential minimal optimization with second-order working-set selection.
///
/// Minimizes `1/2 a^T Q a - e^T a` with `Q_ij = y_i y_j K_ij`, `0 <= a_i <= upper_i` and
/// `y^T a = 0`. Labels are +1/-1.
fn smo(rows: &mut KernelRows<'_>, y: &[f64], upper: &[f64], tol: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < upper[t]) || (y[t] < 0.0 && a[t] > 0.0);
    let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < upper[t]);
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(t, &alpha) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let qi: Vec<f64> = rows.row(i).to_vec();
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..n {
            if !in_low(t, &alpha) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut a = rows.diag[i] + rows.diag[t] - 2.0 * qi[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        if gmax - gmin <= tol || j == usize::MAX {
            break;
        }
        iterations += 1;
        let qj: Vec<f64> = rows.row(j).to_vec();
        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kii = rows.diag[i];
        let kjj = rows.diag[j];
        let kij = qi[j];
        if y[i] != y[j] {
            let mut quad = kii + kjj - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = kii + kjj - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * qi[t] * di + y[j] * qj[t] * dj);
        }
    }
    // Bias: average over free vectors, else the midpoint of the feasible interval.
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < upper[t] {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= upper[t] && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { 0.5 * (ub + lb) };
    SmoSolution { alpha, bias: -rho, iterations }
}

/// Solves the dual for a precomputed dense Gram matrix (row-major `n x n`).
pub fn solve_dual(gram: &[f64], y: &[f64], upper: &[f64], tol: f64) -> Result<SmoSolution> {
    let n = y.len();
    if gram.len() != n * n || upper.len() != n {
        return Err(Error::DimensionMismatch { expected: n * n, got: gram.len() });
    }
    let data: Vec<Vec<f64>> = (0..n).map(|i| gram[i * n..(i + 1) * n].to_vec()).collect();
    let mut rows = KernelRows {
        data: &data,
        kernel: KernelKind::Linear,
        full: Some(gram.to_vec()),
        cache: Vec::new(),
        order: Vec::new(),
        capacity: 0,
        diag: (0..n).map(|i| gram[i * n + i]).collect(),
    };
    Ok(smo(&mut rows, y, upper, tol, usize::MAX))
}

fn validate_training(z: &[Vec<f64>], labels: &[f64]) -> Result<usize> {
    let n = z.len();
    if n != labels.len() {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 training samples, got {n}")));
    }
    let d = z[0].len();
    for r in z {
        if r.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("svm features"));
        }
    }
    if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
    }
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    Ok(d)
}

/// Trains a binary SVM on features used as given; `cfg.scale` is ignored here.
pub fn train_svm_raw(z: &[Vec<f64>], labels: &[f64], cfg: &SvmConfig) -> Result<SvmFit> {
    validate_training(z, labels)?;
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {}", cfg.c)));
    }
    if cfg.kernel == KernelKind::Hik {
        for r in z {
            check_nonnegative(r)?;
        }
    }
    let pos = labels.iter().filter(|&&l| l > 0.0).count() as f64;
    let neg = labels.len() as f64 - pos;
    let (wp, wn) = match cfg.weights {
        ClassWeights::Balanced => (neg / pos, 1.0),
        ClassWeights::Fixed { positive, negative } => (positive, negative),
    };
    if !(wp > 0.0 && wn > 0.0) {
        return Err(Error::InvalidArgument("class weights must be positive".into()));
    }
    let upper: Vec<f64> = labels.iter().map(|&l| cfg.c * if l > 0.0 { wp } else { wn }).collect();
    let mut rows = KernelRows::new(z, cfg.kernel);
    let sol = smo(&mut rows, labels, &upper, cfg.tolerance, cfg.max_iter);
    let keep: Vec<usize> = (0..z.len()).filter(|&i| sol.alpha[i] > ALPHA_EPS).collect();
    let model = SvmModel {
        support_vectors: keep.iter().map(|&i| z[i].clone()).collect(),
        dual_coefs: keep.iter().map(|&i| sol.alpha[i] * labels[i]).collect(),
        bias: sol.bias,
        c: cfg.c,
        class_weights: (wp, wn),
        kernel: cfg.kernel,
        scaler: None,
    };
    Ok(SvmFit { model, alpha: sol.alpha, upper, iterations: sol.iterations })
}

/// Trains a binary SVM, fitting a min-max scaler first when `cfg.scale` is set.
pub fn train_svm(z: &[Vec<f64>], labels: &[f64], cfg: &SvmConfig) -> Result<SvmFit> {
    validate_training(z, labels)?;
    if !cfg.scale {
        return train_svm_raw(z, labels, cfg);
    }
    let scaler = FeatureScaler::fit(z)?;
    let scaled = z.iter().map(|r| scaler.apply(r)).collect::<Result<Vec<_>>>()?;
    let mut fit = train_svm_raw(&scaled, labels, cfg)?;
    fit.model.scaler = Some(scaler);
    Ok(fit)
}

impl SvmModel {
    pub fn dim(&self) -> Option<usize> {
        self.scaler.as_ref().map(|s| s.dim()).or_else(|| self.support_vectors.first().map(|v| v.len()))
    }

    /// Decision value on features that are already scaled.
    pub fn decision_scaled(&self, z: &[f64]) -> f64 {
        self.support_vectors.iter().zip(&self.dual_coefs).map(|(sv, c)| c * self.kernel.eval(sv, z)).sum::<f64>()
            + self.bias
    }

    pub fn decision_value(&self, z: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            if z.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: z.len() });
            }
        }
        let scaled;
        let input = match &self.scaler {
            Some(s) => {
                scaled = s.apply(z)?;
                &scaled[..]
            }
            None => z,
        };
        if self.kernel == KernelKind::Hik {
            check_nonnegative(input)?;
        }
        Ok(self.decision_scaled(input))
    }

    /// `sign(f)`, with `sign(0) = +1`.
    pub fn predict(&self, z: &[f64]) -> Result<i8> {
        Ok(if self.decision_value(z)? >= 0.0 { 1 } else { -1 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    /// One machine per standard-plane class; machines hold no scaler of their own.
    pub machines: Vec<SvmModel>,
    pub scaler: Option<FeatureScaler>,
    pub kernel: KernelKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: Option<usize>,
    pub decisions: Vec<f64>,
}

/// Binary labels for class `k`: +1 for that plane, -1 for everything else.
pub fn one_vs_rest_labels(plane_labels: &[Option<usize>], k: usize) -> Vec<f64> {
    plane_labels.iter().map(|&l| if l == Some(k) { 1.0 } else { -1.0 }).collect()
}

/// Fits the shared scaler (when configured) and returns the training features it produces.
pub fn prepare_multiclass(z: &[Vec<f64>], cfg: &SvmConfig) -> Result<(Option<FeatureScaler>, Vec<Vec<f64>>)> {
    if !cfg.scale {
        return Ok((None, z.to_vec()));
    }
    let scaler = FeatureScaler::fit(z)?;
    let scaled = z.iter().map(|r| scaler.apply(r)).collect::<Result<Vec<_>>>()?;
    Ok((Some(scaler), scaled))
}

/// Checks the label set before one-vs-rest training.
pub fn check_multiclass_labels(plane_labels: &[Option<usize>], classes: usize) -> Result<()> {
    if classes == 0 {
        return Err(Error::InvalidArgument("need at least one standard-plane class".into()));
    }
    if let Some(bad) = plane_labels.iter().flatten().find(|&&k| k >= classes) {
        return Err(Error::InvalidArgument(format!("plane label {bad} out of range for {classes} classes")));
    }
    let mut represented: Vec<bool> = vec![false; classes + 1];
    for l in plane_labels {
        represented[l.unwrap_or(classes)] = true;
    }
    if represented.iter().filter(|&&r| r).count() < 2 {
        return Err(Error::SingleClass);
    }
    if let Some(k) = (0..classes).find(|&k| !represented[k]) {
        return Err(Error::NoPositives(k));
    }
    Ok(())
}

/// One binary machine per class in `0..classes`. `None` marks non-standard planes.
pub fn train_multiclass(z: &[Vec<f64>], plane_labels: &[Option<usize>], classes: usize, cfg: &SvmConfig) -> Result<MulticlassModel> {
    if z.len() != plane_labels.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), got: plane_labels.len() });
    }
    check_multiclass_labels(plane_labels, classes)?;
    let (scaler, scaled) = prepare_multiclass(z, cfg)?;
    let machines = (0..classes)
        .map(|k| train_svm_raw(&scaled, &one_vs_rest_labels(plane_labels, k), cfg).map(|f| f.model))
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassModel { machines, scaler, kernel: cfg.kernel })
}

impl MulticlassModel {
    pub fn classes(&self) -> usize {
        self.machines.len()
    }

    pub fn dim(&self) -> Option<usize> {
        self.scaler.as_ref().map(|s| s.dim()).or_else(|| self.machines.iter().find_map(|m| m.dim()))
    }

    pub fn decision_values(&self, z: &[f64]) -> Result<Vec<f64>> {
        if let Some(d) = self.dim() {
            if z.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: z.len() });
            }
        }
        let scaled;
        let input = match &self.scaler {
            Some(s) => {
                scaled = s.apply(z)?;
                &scaled[..]
            }
            None => z,
        };
        if self.kernel == KernelKind::Hik {
            check_nonnegative(input)?;
        }
        Ok(self.machines.iter().map(|m| m.decision_scaled(input)).collect())
    }

    /// Argmax class when any decision value is positive (ties to the lowest id), else `None`.
    pub fn classify(&self, z: &[f64]) -> Result<Classification> {
        let decisions = self.decision_values(z)?;
        Ok(Classification { class: pick_class(&decisions), decisions })
    }
}

pub fn pick_class(decisions: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in decisions.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|b| v > decisions[b]) {
            best = Some(k);
        }
    }
    best
}
