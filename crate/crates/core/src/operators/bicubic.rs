//! Separable bicubic resampling (Keys kernel, a = -0.5) with replicated borders.

/// One output sample as a short weighted sum over input indices.
type Row = Vec<(usize, f64)>;

fn cubic(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// 1-D resampling matrix from `n_in` to `n_out` samples with pixel-center
/// alignment: output i reads input position (i + 0.5) * n_in / n_out - 0.5.
#[derive(Clone, Debug)]
pub(crate) struct Resampler1d {
    n_in: usize,
    rows: Vec<Row>,
}

impl Resampler1d {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        let ratio = n_in as f64 / n_out as f64;
        let rows = (0..n_out)
            .map(|i| {
                let src = (i as f64 + 0.5) * ratio - 0.5;
                let base = src.floor();
                let mut row: Row = Vec::with_capacity(4);
                for k in -1i64..=2 {
                    let pos = base as i64 + k;
                    let weight = cubic(src - pos as f64);
                    if weight == 0.0 {
                        continue;
                    }
                    let idx = pos.clamp(0, n_in as i64 - 1) as usize;
                    match row.iter_mut().find(|(j, _)| *j == idx) {
                        Some(entry) => entry.1 += weight,
                        None => row.push((idx, weight)),
                    }
                }
                row
            })
            .collect();
        Resampler1d { n_in, rows }
    }

    fn n_out(&self) -> usize {
        self.rows.len()
    }
}

/// Separable 2-D resampler: rows along the width, then columns along the height.
#[derive(Clone, Debug)]
pub(crate) struct Resampler2d {
    along_h: Resampler1d,
    along_w: Resampler1d,
}

impl Resampler2d {
    pub fn new(in_shape: (usize, usize), out_shape: (usize, usize)) -> Self {
        Resampler2d {
            along_h: Resampler1d::new(in_shape.0, out_shape.0),
            along_w: Resampler1d::new(in_shape.1, out_shape.1),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (hi, wi) = (self.along_h.n_in, self.along_w.n_in);
        let (ho, wo) = (self.along_h.n_out(), self.along_w.n_out());
        let mut tmp = vec![0.0; hi * wo];
        for r in 0..hi {
            for (c, row) in self.along_w.rows.iter().enumerate() {
                tmp[r * wo + c] = row.iter().map(|&(j, wt)| wt * x[r * wi + j]).sum();
            }
        }
        let mut out = vec![0.0; ho * wo];
        for (r, row) in self.along_h.rows.iter().enumerate() {
            for &(j, wt) in row {
                for c in 0..wo {
                    out[r * wo + c] += wt * tmp[j * wo + c];
                }
            }
        }
        out
    }

    /// Exact transpose of [`apply`](Self::apply).
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let (hi, wi) = (self.along_h.n_in, self.along_w.n_in);
        let wo = self.along_w.n_out();
        let mut tmp = vec![0.0; hi * wo];
        for (r, row) in self.along_h.rows.iter().enumerate() {
            for &(j, wt) in row {
                for c in 0..wo {
                    tmp[j * wo + c] += wt * y[r * wo + c];
                }
            }
        }
        let mut out = vec![0.0; hi * wi];
        for r in 0..hi {
            for (c, row) in self.along_w.rows.iter().enumerate() {
                let v = tmp[r * wo + c];
                for &(j, wt) in row {
                    out[r * wi + j] += wt * v;
                }
            }
        }
        out
    }
}
