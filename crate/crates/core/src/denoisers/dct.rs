//! Blockwise orthonormal DCT-II shrinkage.
//!
//! The image is tiled into non-overlapping `patch x patch` blocks; blocks on
//! the right and bottom border shrink to whatever fits, each with its own
//! orthonormal transform, so the tiling as a whole stays orthonormal.

use crate::imaging::Image;

fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let alpha = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            m[k * n + i] = alpha
                * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    m
}

/// Block coefficient layout: one entry per pixel, block-local (row, col)
/// frequency order, DC first in every block.
pub(crate) struct BlockDct {
    height: usize,
    width: usize,
    patch: usize,
}

impl BlockDct {
    pub fn new(height: usize, width: usize, patch: usize) -> Self {
        BlockDct {
            height,
            width,
            patch,
        }
    }

    fn blocks(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let p = self.patch;
        (0..self.height).step_by(p).flat_map(move |r| {
            (0..self.width)
                .step_by(p)
                .map(move |c| (r, c, p.min(self.height - r), p.min(self.width - c)))
        })
    }

    /// Coefficients stored at the pixel positions of their block; the DC of
    /// each block sits at the block's top-left pixel.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.transform(x, true)
    }

    pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
        self.transform(c, false)
    }

    /// Mask of DC positions.
    pub fn is_dc(&self, idx: usize) -> bool {
        let (r, c) = (idx / self.width, idx % self.width);
        r % self.patch == 0 && c % self.patch == 0
    }

    fn transform(&self, x: &[f64], forward: bool) -> Vec<f64> {
        let w = self.width;
        let mut out = vec![0.0; x.len()];
        let mut cache: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut mat = |n: usize| -> Vec<f64> {
            if let Some((_, m)) = cache.iter().find(|(k, _)| *k == n) {
                return m.clone();
            }
            let m = dct_matrix(n);
            cache.push((n, m.clone()));
            m
        };
        for (r0, c0, bh, bw) in self.blocks() {
            let mh = mat(bh);
            let mw = mat(bw);
            // forward: C_h B C_wᵀ ; inverse: C_hᵀ B C_w
            let mut tmp = vec![0.0; bh * bw];
            for i in 0..bh {
                for j in 0..bw {
                    let mut s = 0.0;
                    for k in 0..bw {
                        let coef = if forward {
                            mw[j * bw + k]
                        } else {
                            mw[k * bw + j]
                        };
                        s += x[(r0 + i) * w + c0 + k] * coef;
                    }
                    tmp[i * bw + j] = s;
                }
            }
            for i in 0..bh {
                for j in 0..bw {
                    let mut s = 0.0;
                    for k in 0..bh {
                        let coef = if forward {
                            mh[i * bh + k]
                        } else {
                            mh[k * bh + i]
                        };
                        s += coef * tmp[k * bw + j];
                    }
                    out[(r0 + i) * w + c0 + j] = s;
                }
            }
        }
        out
    }
}

pub(crate) fn soft_threshold(img: &Image, patch: usize, tau: f64) -> Image {
    let t = BlockDct::new(img.height(), img.width(), patch);
    let mut coef = t.forward(img.data());
    for (i, c) in coef.iter_mut().enumerate() {
        if !t.is_dc(i) {
            *c = c.signum() * (c.abs() - tau).max(0.0);
        }
    }
    Image::from_parts(img.height(), img.width(), t.inverse(&coef), img.peak())
}

/// Sum of absolute AC coefficients.
pub(crate) fn l1_ac(img: &Image, patch: usize) -> f64 {
    let t = BlockDct::new(img.height(), img.width(), patch);
    t.forward(img.data())
        .iter()
        .enumerate()
        .filter(|(i, _)| !t.is_dc(*i))
        .map(|(_, c)| c.abs())
        .sum()
}

/// `l1_ac(a) - l1_ac(b)` evaluated from the difference `a - b` so the
/// result stays accurate when `a` and `b` are close.
pub(crate) fn l1_ac_difference(a: &Image, b: &Image, patch: usize) -> f64 {
    let t = BlockDct::new(a.height(), a.width(), patch);
    let ca = t.forward(a.data());
    let cd = t.forward(a.sub(b).data());
    ca.iter()
        .zip(&cd)
        .enumerate()
        .filter(|(i, _)| !t.is_dc(*i))
        .map(|(_, (&x, &d))| abs_difference(x, x - d, d))
        .sum()
}

/// |a| - |b| given `diff = a - b`.
pub(crate) fn abs_difference(a: f64, b: f64, diff: f64) -> f64 {
    let denom = a.abs() + b.abs();
    if denom == 0.0 {
        0.0
    } else {
        diff * (a + b) / denom
    }
}
