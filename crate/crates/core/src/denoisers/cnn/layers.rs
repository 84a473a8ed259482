//! Convolution primitives on channel-major feature maps, via im2col + GEMM.

/// C x H x W feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Channel concatenation `[self; other]`.
    pub fn concat(&self, other: &FeatureMap) -> FeatureMap {
        debug_assert_eq!((self.height, self.width), (other.height, other.width));
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        FeatureMap {
            channels: self.channels + other.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Splits the channels at `at`, inverse of [`concat`](Self::concat).
    pub fn split(&self, at: usize) -> (FeatureMap, FeatureMap) {
        let p = self.plane();
        let (a, b) = self.data.split_at(at * p);
        (
            FeatureMap {
                channels: at,
                height: self.height,
                width: self.width,
                data: a.to_vec(),
            },
            FeatureMap {
                channels: self.channels - at,
                height: self.height,
                width: self.width,
                data: b.to_vec(),
            },
        )
    }
}

/// c (m x n) = op(a) (m x k) * op(b) (k x n), optionally accumulating into c.
/// All buffers are row-major; `ta`/`tb` read the stored matrix transposed.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: strides describe exactly the row-major buffers whose lengths
    // were checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a square-kernel convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.k * self.k
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.k) / self.stride + 1,
            (w + 2 * self.pad - self.k) / self.stride + 1,
        )
    }

    fn im2col(&self, x: &FeatureMap) -> (Vec<f64>, usize, usize) {
        let (ho, wo) = self.out_dims(x.height, x.width);
        let p = ho * wo;
        let kk = self.k * self.k;
        let mut cols = vec![0.0; self.cin * kk * p];
        for ci in 0..self.cin {
            let plane = &x.data[ci * x.plane()..(ci + 1) * x.plane()];
            for a in 0..self.k {
                for b in 0..self.k {
                    let row = &mut cols[((ci * kk) + a * self.k + b) * p..][..p];
                    for oh in 0..ho {
                        let ih = (oh * self.stride + a) as isize - self.pad as isize;
                        if ih < 0 || ih >= x.height as isize {
                            continue;
                        }
                        let src = &plane[ih as usize * x.width..][..x.width];
                        let dst = &mut row[oh * wo..][..wo];
                        for (ow, d) in dst.iter_mut().enumerate() {
                            let iw = (ow * self.stride + b) as isize - self.pad as isize;
                            if iw >= 0 && iw < x.width as isize {
                                *d = src[iw as usize];
                            }
                        }
                    }
                }
            }
        }
        (cols, ho, wo)
    }

    fn col2im(&self, cols: &[f64], h: usize, w: usize, ho: usize, wo: usize) -> FeatureMap {
        let p = ho * wo;
        let kk = self.k * self.k;
        let mut out = FeatureMap::zeros(self.cin, h, w);
        for ci in 0..self.cin {
            let plane = &mut out.data[ci * h * w..(ci + 1) * h * w];
            for a in 0..self.k {
                for b in 0..self.k {
                    let row = &cols[((ci * kk) + a * self.k + b) * p..][..p];
                    for oh in 0..ho {
                        let ih = (oh * self.stride + a) as isize - self.pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        for ow in 0..wo {
                            let iw = (ow * self.stride + b) as isize - self.pad as isize;
                            if iw >= 0 && iw < w as isize {
                                plane[ih as usize * w + iw as usize] += row[oh * wo + ow];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Weights are laid out (cout, cin, k, k).
    pub fn forward(&self, x: &FeatureMap, weight: &[f64], bias: &[f64]) -> FeatureMap {
        debug_assert_eq!(x.channels, self.cin);
        let (cols, ho, wo) = self.im2col(x);
        let p = ho * wo;
        let mut out = FeatureMap::zeros(self.cout, ho, wo);
        for (co, &b) in bias.iter().enumerate() {
            out.data[co * p..(co + 1) * p].fill(b);
        }
        gemm(
            self.cout,
            self.cin * self.k * self.k,
            p,
            weight,
            false,
            &cols,
            false,
            &mut out.data,
            true,
        );
        out
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(
        &self,
        x: &FeatureMap,
        weight: &[f64],
        grad_out: &FeatureMap,
        grad_weight: &mut [f64],
        grad_bias: &mut [f64],
    ) -> FeatureMap {
        let (cols, ho, wo) = self.im2col(x);
        let p = ho * wo;
        let kdim = self.cin * self.k * self.k;
        for (co, gb) in grad_bias.iter_mut().enumerate() {
            *gb += grad_out.data[co * p..(co + 1) * p].iter().sum::<f64>();
        }
        gemm(
            self.cout,
            p,
            kdim,
            &grad_out.data,
            false,
            &cols,
            true,
            grad_weight,
            true,
        );
        let mut gcols = vec![0.0; kdim * p];
        gemm(
            kdim,
            self.cout,
            p,
            weight,
            true,
            &grad_out.data,
            false,
            &mut gcols,
            false,
        );
        self.col2im(&gcols, x.height, x.width, ho, wo)
    }
}

/// 2x2 stride-2 transposed convolution doubling the spatial size.
/// Weights are laid out (cin, cout, 2, 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeconvGeom {
    pub cin: usize,
    pub cout: usize,
}

impl DeconvGeom {
    pub fn weight_len(&self) -> usize {
        self.cin * self.cout * 4
    }

    pub fn forward(&self, x: &FeatureMap, weight: &[f64], bias: &[f64]) -> FeatureMap {
        let (h, w) = (x.height, x.width);
        let hw = h * w;
        let rows = self.cout * 4;
        let mut tmp = vec![0.0; rows * hw];
        gemm(
            rows, self.cin, hw, weight, true, &x.data, false, &mut tmp, false,
        );
        let mut out = FeatureMap::zeros(self.cout, 2 * h, 2 * w);
        let ow = 2 * w;
        for co in 0..self.cout {
            let plane = &mut out.data[co * 4 * hw..(co + 1) * 4 * hw];
            for ab in 0..4 {
                let (a, b) = (ab / 2, ab % 2);
                let src = &tmp[(co * 4 + ab) * hw..][..hw];
                for i in 0..h {
                    for j in 0..w {
                        plane[(2 * i + a) * ow + 2 * j + b] = src[i * w + j] + bias[co];
                    }
                }
            }
        }
        out
    }

    pub fn backward(
        &self,
        x: &FeatureMap,
        weight: &[f64],
        grad_out: &FeatureMap,
        grad_weight: &mut [f64],
        grad_bias: &mut [f64],
    ) -> FeatureMap {
        let (h, w) = (x.height, x.width);
        let hw = h * w;
        let ow = 2 * w;
        let rows = self.cout * 4;
        let mut gtmp = vec![0.0; rows * hw];
        for co in 0..self.cout {
            let plane = &grad_out.data[co * 4 * hw..(co + 1) * 4 * hw];
            grad_bias[co] += plane.iter().sum::<f64>();
            for ab in 0..4 {
                let (a, b) = (ab / 2, ab % 2);
                let dst = &mut gtmp[(co * 4 + ab) * hw..][..hw];
                for i in 0..h {
                    for j in 0..w {
                        dst[i * w + j] = plane[(2 * i + a) * ow + 2 * j + b];
                    }
                }
            }
        }
        gemm(
            self.cin,
            hw,
            rows,
            &x.data,
            false,
            &gtmp,
            true,
            grad_weight,
            true,
        );
        let mut gx = FeatureMap::zeros(self.cin, h, w);
        gemm(
            self.cin,
            rows,
            hw,
            weight,
            false,
            &gtmp,
            false,
            &mut gx.data,
            false,
        );
        gx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_map(c: usize, h: usize, w: usize, rng: &mut Rng) -> FeatureMap {
        FeatureMap {
            channels: c,
            height: h,
            width: w,
            data: (0..c * h * w).map(|_| rng.normal()).collect(),
        }
    }

    /// Direct-loop convolution used as an independent reference.
    fn naive_conv(g: &ConvGeom, x: &FeatureMap, wt: &[f64], bias: &[f64]) -> FeatureMap {
        let (ho, wo) = g.out_dims(x.height, x.width);
        let mut out = FeatureMap::zeros(g.cout, ho, wo);
        for co in 0..g.cout {
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut s = bias[co];
                    for ci in 0..g.cin {
                        for a in 0..g.k {
                            for b in 0..g.k {
                                let ih = (oh * g.stride + a) as isize - g.pad as isize;
                                let iw = (ow * g.stride + b) as isize - g.pad as isize;
                                if ih >= 0
                                    && iw >= 0
                                    && (ih as usize) < x.height
                                    && (iw as usize) < x.width
                                {
                                    s += wt[((co * g.cin + ci) * g.k + a) * g.k + b]
                                        * x.data
                                            [(ci * x.height + ih as usize) * x.width + iw as usize];
                                }
                            }
                        }
                    }
                    out.data[(co * ho + oh) * wo + ow] = s;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive() {
        let mut rng = Rng::new(1);
        for g in [
            ConvGeom {
                cin: 3,
                cout: 4,
                k: 3,
                stride: 1,
                pad: 1,
            },
            ConvGeom {
                cin: 2,
                cout: 5,
                k: 2,
                stride: 2,
                pad: 0,
            },
        ] {
            let x = random_map(g.cin, 6, 8, &mut rng);
            let wt: Vec<f64> = (0..g.weight_len()).map(|_| rng.normal()).collect();
            let b: Vec<f64> = (0..g.cout).map(|_| rng.normal()).collect();
            let fast = g.forward(&x, &wt, &b);
            let slow = naive_conv(&g, &x, &wt, &b);
            assert_eq!((fast.height, fast.width), (slow.height, slow.width));
            for (p, q) in fast.data.iter().zip(&slow.data) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_inner_products() {
        let mut rng = Rng::new(2);
        let g = ConvGeom {
            cin: 2,
            cout: 3,
            k: 3,
            stride: 1,
            pad: 1,
        };
        let x = random_map(2, 5, 4, &mut rng);
        let wt: Vec<f64> = (0..g.weight_len()).map(|_| rng.normal()).collect();
        let zero_b = vec![0.0; 3];
        let gy = random_map(3, 5, 4, &mut rng);
        let mut gw = vec![0.0; g.weight_len()];
        let mut gb = vec![0.0; 3];
        let gx = g.backward(&x, &wt, &gy, &mut gw, &mut gb);
        // linear in x: <conv(x), gy> = <x, gx>
        let y = g.forward(&x, &wt, &zero_b);
        let lhs: f64 = y.data.iter().zip(&gy.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&gx.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        // linear in w: <conv_w(x), gy> = <w, gw>
        let rhs_w: f64 = wt.iter().zip(&gw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs_w).abs() < 1e-10);
        let sum_gy: Vec<f64> = (0..3)
            .map(|c| gy.data[c * 20..(c + 1) * 20].iter().sum())
            .collect();
        assert_eq!(gb, sum_gy);
    }

    #[test]
    fn deconv_backward_inner_products() {
        let mut rng = Rng::new(3);
        let g = DeconvGeom { cin: 3, cout: 2 };
        let x = random_map(3, 3, 4, &mut rng);
        let wt: Vec<f64> = (0..g.weight_len()).map(|_| rng.normal()).collect();
        let y = g.forward(&x, &wt, &[0.0, 0.0]);
        assert_eq!((y.height, y.width), (6, 8));
        let gy = random_map(2, 6, 8, &mut rng);
        let mut gw = vec![0.0; g.weight_len()];
        let mut gb = vec![0.0; 2];
        let gx = g.backward(&x, &wt, &gy, &mut gw, &mut gb);
        let lhs: f64 = y.data.iter().zip(&gy.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&gx.data).map(|(a, b)| a * b).sum();
        let rhs_w: f64 = wt.iter().zip(&gw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        assert!((lhs - rhs_w).abs() < 1e-10);
    }

    #[test]
    fn deconv_places_taps() {
        // one input pixel, one channel in/out: output is the 2x2 kernel itself
        let g = DeconvGeom { cin: 1, cout: 1 };
        let x = FeatureMap {
            channels: 1,
            height: 1,
            width: 1,
            data: vec![2.0],
        };
        let y = g.forward(&x, &[1.0, 2.0, 3.0, 4.0], &[0.5]);
        assert_eq!(y.data, vec![2.5, 4.5, 6.5, 8.5]);
    }

    #[test]
    fn concat_split_round_trip() {
        let mut rng = Rng::new(4);
        let a = random_map(2, 3, 3, &mut rng);
        let b = random_map(3, 3, 3, &mut rng);
        let (a2, b2) = a.concat(&b).split(2);
        assert_eq!((a2, b2), (a, b));
    }
}
