//! L0 gradient-minimization smoothing.
//!
//! Approximately minimizes `sum_p (S_p - I_p)^2 + lambda * #{p : grad S_p != 0}` by
//! half-quadratic splitting. Each outer iteration at penalty `beta` hard-thresholds the
//! auxiliary gradient field `(h, v)` and then solves the quadratic problem for `S`
//! exactly in the Fourier domain. Boundaries are periodic throughout; gradients are
//! periodic forward differences so that the FFT diagonalizes them.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::fft::{forward_difference_power, Fft2d};
use crate::volume::PlaneSequence;
use crate::{Error, GrayImage, Result};

/// Gradient magnitude (`|dx| + |dy|`) below which a pixel counts as flat.
pub const FLAT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    pub lambda: f64,
    pub kappa: f64,
    pub beta0: f64,
    pub beta_max: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self::with_lambda(0.02)
    }
}

impl SmoothingConfig {
    /// Conventional settings for a given sparsity weight: `kappa = 2`, `beta0 = 2 lambda`, `beta_max = 1e5`.
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, kappa: 2.0, beta0: 2.0 * lambda, beta_max: 1e5 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda > 0.0
            && self.kappa > 1.0
            && self.beta0 > 0.0
            && self.beta_max > self.beta0
            && [self.lambda, self.kappa, self.beta0, self.beta_max].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "smoothing needs lambda > 0, kappa > 1, beta0 > 0 and beta_max > beta0".into(),
            ))
        }
    }

    /// Number of outer iterations, `ceil(log(beta_max / beta0) / log(kappa))`.
    pub fn iterations(&self) -> usize {
        ((self.beta_max / self.beta0).ln() / self.kappa.ln()).ceil().max(1.0) as usize
    }
}

/// Periodic forward differences `(S[x+1,y] - S[x,y], S[x,y+1] - S[x,y])`.
pub fn gradients(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let d = img.data();
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h {
        let yn = if y + 1 == h { 0 } else { y + 1 };
        for x in 0..w {
            let xn = if x + 1 == w { 0 } else { x + 1 };
            let v = d[y * w + x];
            gx.push(d[y * w + xn] - v);
            gy.push(d[yn * w + x] - v);
        }
    }
    (gx, gy)
}

/// Adjoint of [`gradients`]: `dx^T h + dy^T v` with periodic wrap.
pub fn divergence_adjoint(h: &[f64], v: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let yp = if y == 0 { height - 1 } else { y - 1 };
        for x in 0..width {
            let xp = if x == 0 { width - 1 } else { x - 1 };
            let i = y * width + x;
            out.push(h[y * width + xp] - h[i] + v[yp * width + x] - v[i]);
        }
    }
    out
}

/// Number of pixels whose periodic gradient magnitude `|dx| + |dy|` exceeds `tol`.
pub fn gradient_count(img: &GrayImage, tol: f64) -> usize {
    let (gx, gy) = gradients(img);
    gx.iter().zip(&gy).filter(|(a, b)| a.abs() + b.abs() > tol).count()
}

/// The `(h, v)` subproblem: per pixel, keep the gradient of `s` when
/// `dx^2 + dy^2 > lambda / beta`, else zero it.
pub fn solve_gradient_subproblem(s: &GrayImage, lambda: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let (mut gx, mut gy) = gradients(s);
    let threshold = lambda / beta;
    for (a, b) in gx.iter_mut().zip(gy.iter_mut()) {
        if *a * *a + *b * *b <= threshold {
            *a = 0.0;
            *b = 0.0;
        }
    }
    (gx, gy)
}

struct FourierSolver {
    plan: Fft2d,
    input_spectrum: Vec<Complex64>,
    operator_power: Vec<f64>,
}

impl FourierSolver {
    fn new(input: &GrayImage) -> Self {
        let (w, h) = (input.width(), input.height());
        let plan = Fft2d::new(w, h);
        let mut input_spectrum: Vec<Complex64> = input.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plan.forward(&mut input_spectrum);
        let px = forward_difference_power(w);
        let py = forward_difference_power(h);
        let mut operator_power = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                operator_power.push(px[x] + py[y]);
            }
        }
        Self { plan, input_spectrum, operator_power }
    }

    fn solve(&self, h: &[f64], v: &[f64], beta: f64) -> GrayImage {
        let (w, ht) = (self.plan.width(), self.plan.height());
        let rhs = divergence_adjoint(h, v, w, ht);
        let mut buf: Vec<Complex64> = rhs.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        self.plan.forward(&mut buf);
        for ((b, fi), p) in buf.iter_mut().zip(&self.input_spectrum).zip(&self.operator_power) {
            *b = (*fi + *b * beta) / (1.0 + beta * p);
        }
        self.plan.inverse(&mut buf);
        GrayImage::from_vec(w, ht, buf.iter().map(|c| c.re).collect()).expect("sizes agree")
    }
}

/// The `S` subproblem: `argmin_S |S - I|^2 + beta (|dx S - h|^2 + |dy S - v|^2)`, solved exactly.
pub fn solve_image_subproblem(input: &GrayImage, h: &[f64], v: &[f64], beta: f64) -> GrayImage {
    FourierSolver::new(input).solve(h, v, beta)
}

pub fn l0_smooth(image: &GrayImage, config: &SmoothingConfig) -> Result<GrayImage> {
    config.validate()?;
    if !image.is_finite() {
        return Err(Error::NonFinite("image"));
    }
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::Empty("image"));
    }
    let solver = FourierSolver::new(image);
    let mut s = image.clone();
    let mut beta = config.beta0;
    let mut last_beta = beta;
    for _ in 0..config.iterations() {
        let (h, v) = solve_gradient_subproblem(&s, config.lambda, beta);
        s = solver.solve(&h, &v, beta);
        last_beta = beta;
        beta *= config.kappa;
    }
    let (h, v) = solve_gradient_subproblem(&s, config.lambda, last_beta);
    Ok(flatten_regions(image, &h, &v))
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Replaces every region of pixels joined by zeroed `(h, v)` pairs with the mean of `input`
/// over that region. The splitting iterations leave a faint low-frequency drift inside flat
/// regions; this removes it so flat regions are exactly flat.
pub fn flatten_regions(input: &GrayImage, h: &[f64], v: &[f64]) -> GrayImage {
    let (w, ht) = (input.width(), input.height());
    let n = w * ht;
    let mut parent: Vec<usize> = (0..n).collect();
    for y in 0..ht {
        for x in 0..w {
            let p = y * w + x;
            if h[p] != 0.0 || v[p] != 0.0 {
                continue;
            }
            for q in [y * w + (x + 1) % w, ((y + 1) % ht) * w + x] {
                let (a, b) = (find(&mut parent, p), find(&mut parent, q));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut sum = alloc::vec![0.0; n];
    let mut count = alloc::vec![0usize; n];
    let roots: Vec<usize> = (0..n).map(|p| find(&mut parent, p)).collect();
    for (p, &r) in roots.iter().enumerate() {
        sum[r] += input.data()[p];
        count[r] += 1;
    }
    let data = roots.iter().map(|&r| sum[r] / count[r] as f64).collect();
    GrayImage::from_vec(w, ht, data).expect("sizes agree")
}

/// Filters every frame independently; plane parameters are carried over.
pub fn smooth_sequence(seq: &PlaneSequence, config: &SmoothingConfig) -> Result<PlaneSequence> {
    let frames = seq.frames.iter().map(|f| l0_smooth(f, config)).collect::<Result<Vec<_>>>()?;
    Ok(PlaneSequence { params: seq.params, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::PlaneParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy_step(size: usize, sigma: f64, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        GrayImage::from_fn(size, size, |_, y| if y < size / 2 { 0.2 } else { 0.8 } + noise.sample(&mut rng))
    }

    #[test]
    fn iteration_count() {
        let c = SmoothingConfig::with_lambda(0.02);
        assert_eq!(c.iterations(), 22);
        assert!(SmoothingConfig { kappa: 1.0, ..c }.validate().is_err());
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = GrayImage::filled(16, 12, 0.37);
        for lambda in [0.001, 0.02, 1.0] {
            let out = l0_smooth(&img, &SmoothingConfig::with_lambda(lambda)).unwrap();
            assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn tiny_lambda_is_identity() {
        let img = noisy_step(32, 0.05, 3);
        let out = l0_smooth(&img, &SmoothingConfig::with_lambda(1e-12)).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn rejects_non_finite_pixels() {
        let mut img = GrayImage::filled(8, 8, 0.5);
        img.set(3, 3, f64::NAN);
        assert_eq!(l0_smooth(&img, &SmoothingConfig::default()), Err(Error::NonFinite("image")));
    }

    #[test]
    fn step_edge_survives_and_noise_flattens() {
        let img = noisy_step(64, 0.05, 11);
        let out = l0_smooth(&img, &SmoothingConfig::with_lambda(0.02)).unwrap();
        let before = gradient_count(&img, FLAT_TOLERANCE);
        let after = gradient_count(&out, FLAT_TOLERANCE);
        assert!((after as f64) < 0.15 * before as f64, "{after} vs {before}");
        let edge_row = |im: &GrayImage| {
            (0..im.height() - 1)
                .max_by(|&a, &b| {
                    let ga: f64 = (0..im.width()).map(|x| im.get(x, a + 1) - im.get(x, a)).sum();
                    let gb: f64 = (0..im.width()).map(|x| im.get(x, b + 1) - im.get(x, b)).sum();
                    ga.total_cmp(&gb)
                })
                .unwrap()
        };
        assert_eq!(edge_row(&out), edge_row(&img));
        assert_eq!(edge_row(&img), 31);
    }

    #[test]
    fn sequence_smoothing_is_per_frame() {
        let a = noisy_step(16, 0.05, 1);
        let b = noisy_step(16, 0.05, 2);
        let params = PlaneParams::centered([8.0; 3], [0.0, 0.0, 1.0], 16, 16, 1.0);
        let cfg = SmoothingConfig::default();
        let seq = PlaneSequence { params, frames: alloc::vec![a.clone(), b.clone()] };
        let rev = PlaneSequence { params, frames: alloc::vec![b, a.clone()] };
        let s1 = smooth_sequence(&seq, &cfg).unwrap();
        let s2 = smooth_sequence(&rev, &cfg).unwrap();
        assert_eq!(s1.frames[0], s2.frames[1]);
        assert_eq!(s1.frames[1], s2.frames[0]);
        assert_eq!(s1.frames[0], l0_smooth(&a, &cfg).unwrap());
        assert_eq!(s1.params, params);
    }
}
