//! Isotropic total variation and its proximal map.
//!
//! Forward differences with a zero last row/column (Neumann boundary);
//! `divergence` is the negative transpose of `gradient`. The prox
//! `argmin_v ½‖v - x‖² + λ TV(v)` is computed with Chambolle's dual
//! projection iteration for a fixed number of steps.

use crate::imaging::Image;

const TAU: f64 = 0.125;

pub(crate) fn gradient(v: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                gx[i] = v[i + 1] - v[i];
            }
            if r + 1 < h {
                gy[i] = v[i + w] - v[i];
            }
        }
    }
    (gx, gy)
}

pub(crate) fn divergence(px: &[f64], py: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut d = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let mut s = 0.0;
            if c + 1 < w {
                s += px[i];
            }
            if c > 0 {
                s -= px[i - 1];
            }
            if r + 1 < h {
                s += py[i];
            }
            if r > 0 {
                s -= py[i - w];
            }
            d[i] = s;
        }
    }
    d
}

pub(crate) fn total_variation(v: &Image) -> f64 {
    let (gx, gy) = gradient(v.data(), v.height(), v.width());
    gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).sum()
}

/// `TV(a) - TV(b)` computed from the gradient of `a - b`.
pub(crate) fn total_variation_difference(a: &Image, b: &Image) -> f64 {
    let (h, w) = a.shape();
    let (ax, ay) = gradient(a.data(), h, w);
    let (dx, dy) = gradient(a.sub(b).data(), h, w);
    let mut total = 0.0;
    for i in 0..h * w {
        let (bx, by) = (ax[i] - dx[i], ay[i] - dy[i]);
        let na = ax[i].hypot(ay[i]);
        let nb = bx.hypot(by);
        if na + nb > 0.0 {
            total += (dx[i] * (ax[i] + bx) + dy[i] * (ay[i] + by)) / (na + nb);
        }
    }
    total
}

pub(crate) fn rof_prox(x: &Image, lambda: f64, iters: usize) -> Image {
    if lambda == 0.0 {
        return x.clone();
    }
    let (h, w) = x.shape();
    let n = h * w;
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let scaled: Vec<f64> = x.data().iter().map(|v| v / lambda).collect();
    for _ in 0..iters {
        let div = divergence(&px, &py, h, w);
        let u: Vec<f64> = div.iter().zip(&scaled).map(|(d, s)| d - s).collect();
        let (gx, gy) = gradient(&u, h, w);
        for i in 0..n {
            let norm = gx[i].hypot(gy[i]);
            let denom = 1.0 + TAU * norm;
            px[i] = (px[i] + TAU * gx[i]) / denom;
            py[i] = (py[i] + TAU * gy[i]) / denom;
        }
    }
    let div = divergence(&px, &py, h, w);
    let data = x
        .data()
        .iter()
        .zip(&div)
        .map(|(v, d)| v - lambda * d)
        .collect();
    Image::from_parts(h, w, data, x.peak())
}
