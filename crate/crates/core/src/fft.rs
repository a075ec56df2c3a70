//! Complex FFTs for arbitrary lengths.
//!
//! Power-of-two lengths use an iterative radix-2 transform; every other length goes
//! through Bluestein's chirp-z reformulation on a padded power-of-two transform. Both
//! directions are unnormalized; [`Fft2d::inverse`] divides by the pixel count.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { n, twiddles, bitrev }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

#[derive(Debug, Clone)]
enum Plan {
    Radix2(Radix2),
    Bluestein {
        inner: Radix2,
        chirp: Vec<Complex64>,
        kernel_spectrum: Vec<Complex64>,
    },
}

/// A reusable 1-D FFT plan.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    plan: Plan,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        if n.is_power_of_two() {
            return Self { n, plan: Plan::Radix2(Radix2::new(n)) };
        }
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // chirp[k] = exp(-i*pi*k^2/n); k^2 reduced mod 2n keeps the angle accurate.
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                let kk = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
                Complex64::from_polar(1.0, -PI * kk / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self { n, plan: Plan::Bluestein { inner, chirp, kernel_spectrum: kernel } }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform, `X[k] = sum_j x[j] exp(-2 pi i jk/n)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        match &self.plan {
            Plan::Radix2(r) => r.forward(buf),
            Plan::Bluestein { inner, chirp, kernel_spectrum } => {
                let m = inner.n;
                let mut a = vec![Complex64::new(0.0, 0.0); m];
                for k in 0..self.n {
                    a[k] = buf[k] * chirp[k];
                }
                inner.forward(&mut a);
                for (x, k) in a.iter_mut().zip(kernel_spectrum) {
                    *x *= k;
                }
                // inverse of length m via conjugation
                for x in a.iter_mut() {
                    *x = x.conj();
                }
                inner.forward(&mut a);
                let scale = 1.0 / m as f64;
                for k in 0..self.n {
                    buf[k] = a[k].conj() * scale * chirp[k];
                }
            }
        }
    }

    /// In-place unnormalized inverse transform.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for x in buf.iter_mut() {
            *x = x.conj();
        }
        self.forward(buf);
        for x in buf.iter_mut() {
            *x = x.conj();
        }
    }
}

/// Separable 2-D FFT over a row-major `width x height` grid.
#[derive(Debug, Clone)]
pub struct Fft2d {
    width: usize,
    height: usize,
    rows: Fft,
    cols: Fft,
}

impl Fft2d {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, rows: Fft::new(width), cols: Fft::new(height) }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, false);
    }

    /// Normalized inverse: `inverse(forward(x)) == x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, true);
        let scale = 1.0 / (self.width * self.height) as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
    }

    fn apply(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.width * self.height);
        for row in data.chunks_exact_mut(self.width) {
            if inverse {
                self.rows.inverse(row);
            } else {
                self.rows.forward(row);
            }
        }
        let mut column = vec![Complex64::new(0.0, 0.0); self.height];
        for x in 0..self.width {
            for y in 0..self.height {
                column[y] = data[y * self.width + x];
            }
            if inverse {
                self.cols.inverse(&mut column);
            } else {
                self.cols.forward(&mut column);
            }
            for y in 0..self.height {
                data[y * self.width + x] = column[y];
            }
        }
    }
}

/// `|F(d)|^2` for the periodic forward difference `d[k] = x[k+1] - x[k]` of length `n`.
pub fn forward_difference_power(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()).collect()
}
