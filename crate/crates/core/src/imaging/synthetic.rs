use super::{Image, DEFAULT_PEAK};
use crate::rng::Rng;

/// Deterministic piecewise-smooth test scene on the [0, 255] scale: a tilted
/// gradient, a low-frequency ripple and a handful of flat discs and boxes.
pub fn synthetic_scene(height: usize, width: usize, rng: &mut Rng) -> Image {
    let gx = rng.uniform() * 2.0 - 1.0;
    let gy = rng.uniform() * 2.0 - 1.0;
    let base = 60.0 + 80.0 * rng.uniform();
    let ripple_amp = 10.0 + 15.0 * rng.uniform();
    let fx = 1.0 + 2.0 * rng.uniform();
    let fy = 1.0 + 2.0 * rng.uniform();
    let phase = 2.0 * std::f64::consts::PI * rng.uniform();

    let mut data = vec![0.0; height * width];
    for r in 0..height {
        for c in 0..width {
            let u = c as f64 / width as f64;
            let v = r as f64 / height as f64;
            data[r * width + c] = base
                + 50.0 * (gx * u + gy * v)
                + ripple_amp * (2.0 * std::f64::consts::PI * (fx * u + fy * v) + phase).sin();
        }
    }

    let shapes = 3 + rng.below(4);
    for _ in 0..shapes {
        let level = 255.0 * rng.uniform();
        let cy = rng.uniform() * height as f64;
        let cx = rng.uniform() * width as f64;
        let size = (0.1 + 0.25 * rng.uniform()) * height.min(width) as f64;
        let disc = rng.uniform() < 0.5;
        for r in 0..height {
            for c in 0..width {
                let dy = r as f64 + 0.5 - cy;
                let dx = c as f64 + 0.5 - cx;
                let inside = if disc {
                    dx * dx + dy * dy <= size * size
                } else {
                    dx.abs() <= size && dy.abs() <= 0.6 * size
                };
                if inside {
                    data[r * width + c] = level;
                }
            }
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, DEFAULT_PEAK);
    }
    Image::from_parts(height, width, data, DEFAULT_PEAK)
}
