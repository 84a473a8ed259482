//! Circular 2-D convolution through the FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Kernel;

/// Convolution with a fixed kernel on an h x w torus, diagonalized by the 2-D DFT.
#[derive(Clone)]
pub(crate) struct CirculantConv {
    h: usize,
    w: usize,
    spectrum: Vec<Complex64>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantConv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantConv")
            .field("h", &self.h)
            .field("w", &self.w)
            .finish()
    }
}

impl CirculantConv {
    pub fn new(kernel: &Kernel, h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        let mut conv = CirculantConv {
            h,
            w,
            spectrum: Vec::new(),
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
        };
        // Tap (a, b) shifts the input by (a - c, b - c); larger-than-image
        // kernels wrap around and accumulate.
        let k = kernel.size();
        let c = k / 2;
        let mut psf = vec![Complex64::new(0.0, 0.0); h * w];
        for a in 0..k {
            for b in 0..k {
                let r = (a + h * k - c) % h;
                let s = (b + w * k - c) % w;
                psf[r * w + s].re += kernel.tap(a, b);
            }
        }
        conv.fft2(&mut psf, true);
        conv.spectrum = psf;
        conv
    }

    fn fft2(&self, buf: &mut [Complex64], forward: bool) {
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        row.process(buf);
        let mut t = transpose(buf, self.h, self.w);
        col.process(&mut t);
        let back = transpose(&t, self.w, self.h);
        buf.copy_from_slice(&back);
    }

    fn filter(&self, x: &[f64], conjugate: bool) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut buf, true);
        for (z, k) in buf.iter_mut().zip(&self.spectrum) {
            *z *= if conjugate { k.conj() } else { *k };
        }
        self.fft2(&mut buf, false);
        let norm = 1.0 / (self.h * self.w) as f64;
        buf.iter().map(|z| z.re * norm).collect()
    }

    /// Squared magnitude of the transfer function, row-major over frequencies.
    pub fn power_spectrum(&self) -> Vec<f64> {
        self.spectrum.iter().map(|z| z.norm_sqr()).collect()
    }

    /// y = k * x (circular convolution).
    pub fn convolve(&self, x: &[f64]) -> Vec<f64> {
        self.filter(x, false)
    }

    /// Transpose of [`convolve`](Self::convolve): circular correlation.
    pub fn correlate(&self, x: &[f64]) -> Vec<f64> {
        self.filter(x, true)
    }
}

fn transpose(buf: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = buf[r * cols + c];
        }
    }
    out
}
