use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::GrayImage;

/// Normalized Gaussian taps truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Convolves `len` samples spaced `stride` apart starting at `start`, clamping at the ends.
pub(crate) fn convolve_line(data: &mut [f64], start: usize, len: usize, stride: usize, kernel: &[f64], scratch: &mut Vec<f64>) {
    if kernel.len() == 1 {
        return;
    }
    let radius = (kernel.len() / 2) as isize;
    scratch.clear();
    scratch.extend((0..len).map(|i| data[start + i * stride]));
    let last = len as isize - 1;
    for i in 0..len as isize {
        let mut acc = 0.0;
        for (k, w) in kernel.iter().enumerate() {
            let j = (i + k as isize - radius).clamp(0, last) as usize;
            acc += w * scratch[j];
        }
        data[start + i as usize * stride] = acc;
    }
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn blur_image(img: &GrayImage, sigma: f64) -> GrayImage {
    let kernel = gaussian_kernel(sigma);
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    let mut scratch = Vec::new();
    let data = out.data_mut();
    for y in 0..h {
        convolve_line(data, y * w, w, 1, &kernel, &mut scratch);
    }
    for x in 0..w {
        convolve_line(data, x, h, w, &kernel, &mut scratch);
    }
    out
}

/// Separable blur of a `t x h x w` stack (frame-major) with spatial and temporal sigmas.
pub(crate) fn blur_stack(data: &[f64], w: usize, h: usize, t: usize, sigma_s: f64, sigma_t: f64) -> Vec<f64> {
    let mut out = data.to_vec();
    let ks = gaussian_kernel(sigma_s);
    let kt = gaussian_kernel(sigma_t);
    let mut scratch = Vec::new();
    for f in 0..t {
        for y in 0..h {
            convolve_line(&mut out, (f * h + y) * w, w, 1, &ks, &mut scratch);
        }
        for x in 0..w {
            convolve_line(&mut out, f * h * w + x, h, w, &ks, &mut scratch);
        }
    }
    for p in 0..w * h {
        convolve_line(&mut out, p, t, w * h, &kt, &mut scratch);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn blur_preserves_constants_and_mirror() {
        let c = GrayImage::filled(9, 7, 0.4);
        assert!(blur_image(&c, 2.0).data().iter().all(|v| (v - 0.4).abs() < 1e-12));
        let img = GrayImage::from_fn(10, 6, |x, y| ((x * 3 + y * 5) % 7) as f64);
        let a = blur_image(&img, 1.3).mirrored();
        let b = blur_image(&img.mirrored(), 1.3);
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
