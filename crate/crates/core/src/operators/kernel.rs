use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Centered square convolution kernel with odd side length.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    size: usize,
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        if taps.len() != size * size {
            return Err(Error::InvalidArgument(format!(
                "kernel of size {size} needs {} taps, got {}",
                size * size,
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite kernel tap".into()));
        }
        Ok(Kernel { size, taps })
    }

    /// 1x1 unit kernel.
    pub fn delta() -> Self {
        Kernel {
            size: 1,
            taps: vec![1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn tap(&self, row: usize, col: usize) -> f64 {
        self.taps[row * self.size + col]
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Rescales taps to sum to one.
    pub fn normalized(mut self) -> Result<Self> {
        let s = self.sum();
        if s == 0.0 || !s.is_finite() {
            return Err(Error::InvalidArgument("kernel taps sum to zero".into()));
        }
        self.taps.iter_mut().for_each(|t| *t /= s);
        Ok(self)
    }

    /// Writes the plain-text kernel format read by [`load_kernel`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.size, self.size);
        for row in self.taps.chunks(self.size) {
            let line: Vec<String> = row.iter().map(|t| format!("{t:e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Camera-shake style blur: a random walk with slowly turning velocity,
/// splatted bilinearly onto the grid and normalized to unit sum.
pub fn motion_kernel(size: usize, rng: &mut Rng) -> Result<Kernel> {
    if size < 3 || size % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "motion kernel size must be odd and >= 3, got {size}"
        )));
    }
    let hi = (size - 1) as f64;
    let mut taps = vec![0.0; size * size];
    let (mut y, mut x) = (hi / 2.0, hi / 2.0);
    let angle = 2.0 * std::f64::consts::PI * rng.uniform();
    let (mut vy, mut vx) = (angle.sin(), angle.cos());
    for _ in 0..4 * size {
        vy += 0.35 * rng.normal();
        vx += 0.35 * rng.normal();
        let speed = vy.hypot(vx).max(1e-12);
        vy /= speed;
        vx /= speed;
        y = (y + 0.5 * vy).clamp(0.0, hi);
        x = (x + 0.5 * vx).clamp(0.0, hi);
        let (r0, c0) = (y.floor() as usize, x.floor() as usize);
        let (fy, fx) = (y - r0 as f64, x - c0 as f64);
        let (r1, c1) = ((r0 + 1).min(size - 1), (c0 + 1).min(size - 1));
        taps[r0 * size + c0] += (1.0 - fy) * (1.0 - fx);
        taps[r0 * size + c1] += (1.0 - fy) * fx;
        taps[r1 * size + c0] += fy * (1.0 - fx);
        taps[r1 * size + c1] += fy * fx;
    }
    Kernel::new(size, taps)?.normalized()
}

/// Isotropic Gaussian `exp(-(i^2 + j^2) / (2 sigma^2))` on a centered grid,
/// normalized to unit sum.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Kernel> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    if size % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "kernel size must be odd, got {size}"
        )));
    }
    let c = (size / 2) as f64;
    let mut taps = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            taps.push((-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp());
        }
    }
    Kernel::new(size, taps)?.normalized()
}

/// Reads "k k" followed by k rows of k reals; taps are renormalized to sum 1.
pub fn load_kernel(path: impl AsRef<Path>) -> Result<Kernel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kernel(&text)
}

pub fn parse_kernel(text: &str) -> Result<Kernel> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Malformed("empty kernel file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Malformed(format!("bad kernel header {header:?}")))?;
    let k = match dims.as_slice() {
        [a, b] if a == b => *a,
        _ => {
            return Err(Error::Malformed(format!(
                "kernel header must be \"k k\", got {header:?}"
            )))
        }
    };
    if k == 0 || k % 2 == 0 {
        return Err(Error::Malformed(format!(
            "kernel size must be odd, got {k}"
        )));
    }
    let mut taps = Vec::with_capacity(k * k);
    for row in 0..k {
        let line = lines
            .next()
            .ok_or_else(|| Error::Malformed(format!("kernel row {row} missing")))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Malformed(format!("bad kernel row {row}")))?;
        if values.len() != k {
            return Err(Error::Malformed(format!(
                "kernel row {row} has {} values, expected {k}",
                values.len()
            )));
        }
        taps.extend(values);
    }
    if lines.next().is_some() {
        return Err(Error::Malformed("trailing data after kernel rows".into()));
    }
    Kernel::new(k, taps)
        .map_err(|e| Error::Malformed(e.to_string()))?
        .normalized()
        .map_err(|e| Error::Malformed(e.to_string()))
}
