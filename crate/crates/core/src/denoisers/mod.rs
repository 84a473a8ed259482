//! Plug-in denoisers for the `v` update.
//!
//! Every denoiser except the learned one is the exact (or, for total
//! variation, iterative) minimizer of `(eta/2)||x - v||^2 + lambda * J(v)` for
//! some prior `J`, so the solver can evaluate the full objective.

pub mod cnn;
mod dct;
mod tv;

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Closed-form minimizer of `eta * ||v - x||^2 + (lambda / 2) * ||v||^2`.
pub fn prox_quadratic(x: &Image, eta: f64, lambda: f64) -> Result<Image> {
    if !(eta > 0.0) || !(lambda >= 0.0) || !eta.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "prox_quadratic needs eta > 0 and lambda >= 0, got eta={eta}, lambda={lambda}"
        )));
    }
    Ok(x.scale(2.0 * eta / (2.0 * eta + lambda)))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Denoiser {
    /// Always returns zero; the prior is the indicator of `{0}`.
    Zero,
    /// Shrinkage `eta / (eta + lambda) * x`, prior `||v||^2 / 2`.
    QuadraticProx { lambda: f64 },
    /// Soft-thresholds the AC coefficients of a blockwise DCT at `tau`;
    /// prior is their l1 norm with weight `eta * tau`.
    DctSoftThreshold { patch: usize, tau: f64 },
    /// Isotropic ROF denoising with weight `lambda_tv` by a fixed number of
    /// dual projection steps; prior is total variation with weight
    /// `eta * lambda_tv`.
    TvProx { lambda_tv: f64, iters: usize },
    /// Learned network applied as `s * net(x / s)` with `s = input_scale`.
    Cnn {
        spec: cnn::NetSpec,
        params: Vec<f64>,
        input_scale: f64,
    },
}

impl Denoiser {
    /// DCT shrinkage matching prior weight `lambda` at coupling `eta`.
    pub fn dct_for(patch: usize, eta: f64, lambda: f64) -> Denoiser {
        Denoiser::DctSoftThreshold {
            patch,
            tau: lambda / eta,
        }
    }

    /// TV denoiser matching prior weight `lambda` at coupling `eta`.
    pub fn tv_for(eta: f64, lambda: f64, iters: usize) -> Denoiser {
        Denoiser::TvProx {
            lambda_tv: lambda / eta,
            iters,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Denoiser::Zero => "zero",
            Denoiser::QuadraticProx { .. } => "quadratic",
            Denoiser::DctSoftThreshold { .. } => "dct",
            Denoiser::TvProx { .. } => "tv",
            Denoiser::Cnn { .. } => "cnn",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            Denoiser::Zero => Ok(()),
            Denoiser::QuadraticProx { lambda } if !(*lambda >= 0.0 && lambda.is_finite()) => {
                bad(format!("quadratic prior weight must be >= 0, got {lambda}"))
            }
            Denoiser::DctSoftThreshold { patch, tau } => {
                if *patch == 0 {
                    bad("DCT patch size must be positive".into())
                } else if !(*tau >= 0.0 && tau.is_finite()) {
                    bad(format!("DCT threshold must be >= 0, got {tau}"))
                } else {
                    Ok(())
                }
            }
            Denoiser::TvProx { lambda_tv, .. } if !(*lambda_tv >= 0.0 && lambda_tv.is_finite()) => {
                bad(format!("TV weight must be >= 0, got {lambda_tv}"))
            }
            Denoiser::Cnn {
                spec,
                params,
                input_scale,
            } => {
                spec.validate()?;
                if params.len() != spec.param_count() {
                    return bad(format!(
                        "network expects {} parameters, got {}",
                        spec.param_count(),
                        params.len()
                    ));
                }
                if !(*input_scale > 0.0 && input_scale.is_finite()) {
                    return bad(format!("input scale must be positive, got {input_scale}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn denoise(&self, x: &Image, eta: f64) -> Result<Image> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eta must be positive, got {eta}"
            )));
        }
        self.validate()?;
        match self {
            Denoiser::Zero => Ok(Image::from_parts(
                x.height(),
                x.width(),
                vec![0.0; x.len()],
                x.peak(),
            )),
            Denoiser::QuadraticProx { lambda } => prox_quadratic(x, eta / 2.0, *lambda),
            Denoiser::DctSoftThreshold { patch, tau } => Ok(dct::soft_threshold(x, *patch, *tau)),
            Denoiser::TvProx { lambda_tv, iters } => Ok(tv::rof_prox(x, *lambda_tv, *iters)),
            Denoiser::Cnn {
                spec,
                params,
                input_scale,
            } => {
                cnn_padded(spec, params, &x.scale(1.0 / input_scale)).map(|y| y.scale(*input_scale))
            }
        }
    }

    /// Prior weight `lambda` this denoiser minimizes for at coupling `eta`,
    /// or `None` when any weight is consistent (zero) or no prior exists.
    pub fn implied_lambda(&self, eta: f64) -> Option<f64> {
        match self {
            Denoiser::Zero | Denoiser::Cnn { .. } => None,
            Denoiser::QuadraticProx { lambda } => Some(*lambda),
            Denoiser::DctSoftThreshold { tau, .. } => Some(eta * tau),
            Denoiser::TvProx { lambda_tv, .. } => Some(eta * lambda_tv),
        }
    }

    /// Whether `denoise` returns the exact minimizer.
    pub fn is_exact_prox(&self) -> bool {
        matches!(
            self,
            Denoiser::Zero | Denoiser::QuadraticProx { .. } | Denoiser::DctSoftThreshold { .. }
        )
    }

    pub fn has_prior(&self) -> bool {
        !matches!(self, Denoiser::Cnn { .. })
    }

    /// The prior `J(v)` (without its weight), `None` for the learned network.
    pub fn prior(&self, v: &Image) -> Option<f64> {
        match self {
            Denoiser::Zero => Some(if v.data().iter().all(|&a| a == 0.0) {
                0.0
            } else {
                f64::INFINITY
            }),
            Denoiser::QuadraticProx { .. } => Some(0.5 * v.norm_sq()),
            Denoiser::DctSoftThreshold { patch, .. } => Some(dct::l1_ac(v, *patch)),
            Denoiser::TvProx { .. } => Some(tv::total_variation(v)),
            Denoiser::Cnn { .. } => None,
        }
    }

    /// `J(a) - J(b)`, computed so the rounding error scales with `a - b`.
    pub fn prior_difference(&self, a: &Image, b: &Image) -> Option<f64> {
        match self {
            Denoiser::Zero => {
                let (ja, jb) = (self.prior(a)?, self.prior(b)?);
                Some(if ja == jb { 0.0 } else { ja - jb })
            }
            Denoiser::QuadraticProx { .. } => Some(0.5 * a.sub(b).dot(&a.add(b))),
            Denoiser::DctSoftThreshold { patch, .. } => Some(dct::l1_ac_difference(a, b, *patch)),
            Denoiser::TvProx { .. } => Some(tv::total_variation_difference(a, b)),
            Denoiser::Cnn { .. } => None,
        }
    }
}

/// Decrease of `F(v) = (eta/2)||x - v||^2 + lambda * J(v)` from `v_old` to
/// `v_new`. For the learned network only the quadratic part is available;
/// the second field reports whether the value is partial.
pub fn descent_gap(
    denoiser: &Denoiser,
    x: &Image,
    v_old: &Image,
    v_new: &Image,
    eta: f64,
    lambda: f64,
) -> (f64, bool) {
    // (x - v_old) - (x - v_new) = v_new - v_old
    let r_old = x.sub(v_old);
    let r_new = x.sub(v_new);
    let quad = 0.5 * eta * v_new.sub(v_old).dot(&r_old.add(&r_new));
    match denoiser.prior_difference(v_old, v_new) {
        Some(d) => (quad + lambda * d, false),
        None => (quad, true),
    }
}

/// Replicates the border so both dimensions become multiples of the network
/// divisor, runs the network and crops back.
fn cnn_padded(spec: &cnn::NetSpec, params: &[f64], x: &Image) -> Result<Image> {
    let d = spec.divisor();
    let (h, w) = x.shape();
    let (hp, wp) = (h.div_ceil(d) * d, w.div_ceil(d) * d);
    if (hp, wp) == (h, w) {
        return cnn::forward(spec, params, x);
    }
    let mut data = Vec::with_capacity(hp * wp);
    for r in 0..hp {
        for c in 0..wp {
            data.push(x.get(r.min(h - 1), c.min(w - 1)));
        }
    }
    let padded = Image::from_parts(hp, wp, data, x.peak());
    cnn::forward(spec, params, &padded)?.crop(0, 0, h, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = Rng::new(seed);
        Image::new(h, w, (0..h * w).map(|_| rng.normal()).collect(), 1.0).unwrap()
    }

    fn objective(d: &Denoiser, x: &Image, v: &Image, eta: f64, lambda: f64) -> f64 {
        0.5 * eta * x.sub(v).norm_sq() + lambda * d.prior(v).unwrap()
    }

    #[test]
    fn prox_quadratic_examples() {
        let x = Image::new(1, 2, vec![2.0, -4.0], 1.0).unwrap();
        let v = prox_quadratic(&x, 1.0, 2.0).unwrap();
        assert_eq!(v.data(), &[1.0, -2.0]);
        assert_eq!(prox_quadratic(&x, 1.0, 0.0).unwrap(), x);
        assert!(prox_quadratic(&x, 0.0, 1.0).is_err());
        assert!(prox_quadratic(&x, 1.0, -1.0).is_err());
    }

    #[test]
    fn quadratic_denoiser_matches_objective_weight() {
        let x = random(3, 3, 1);
        let d = Denoiser::QuadraticProx { lambda: 3.0 };
        let v = d.denoise(&x, 0.5).unwrap();
        for (a, b) in v.data().iter().zip(x.data()) {
            assert!((a - b * 0.5 / 3.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_denoiser() {
        let x = random(2, 3, 2);
        let v = Denoiser::Zero.denoise(&x, 1.0).unwrap();
        assert!(v.data().iter().all(|&a| a == 0.0));
        assert_eq!(Denoiser::Zero.prior(&v), Some(0.0));
        assert_eq!(Denoiser::Zero.prior(&x), Some(f64::INFINITY));
    }

    #[test]
    fn implied_weights() {
        let eta = 0.4;
        assert_eq!(
            Denoiser::dct_for(8, eta, 2.0).implied_lambda(eta),
            Some(2.0)
        );
        let tv = Denoiser::tv_for(eta, 2.0, 10).implied_lambda(eta).unwrap();
        assert!((tv - 2.0).abs() < 1e-15);
        assert_eq!(Denoiser::Zero.implied_lambda(eta), None);
    }

    #[test]
    fn tv_prox_descends_its_objective() {
        let x = random(12, 12, 5);
        let (eta, lambda) = (1.0, 0.3);
        let d = Denoiser::tv_for(eta, lambda, 300);
        let v = d.denoise(&x, eta).unwrap();
        let base = objective(&d, &x, &v, eta, lambda);
        assert!(base < objective(&d, &x, &x, eta, lambda));
        let mut rng = Rng::new(8);
        for _ in 0..20 {
            let p =
                Image::new(12, 12, (0..144).map(|_| 1e-3 * rng.normal()).collect(), 1.0).unwrap();
            assert!(objective(&d, &x, &v.add(&p), eta, lambda) > base - 1e-6);
        }
    }

    #[test]
    fn cnn_denoiser_pads_odd_shapes() {
        let spec = cnn::NetSpec::tiny();
        let params = cnn::init_params(&spec, &mut Rng::new(1));
        let d = Denoiser::Cnn {
            spec,
            params: params.clone(),
            input_scale: 255.0,
        };
        let x = random(5, 7, 3).scale(255.0);
        let y = d.denoise(&x, 1.0).unwrap();
        assert_eq!(y.shape(), (5, 7));
        let zero = Denoiser::Cnn {
            spec,
            params: vec![0.0; params.len()],
            input_scale: 255.0,
        };
        let y0 = zero.denoise(&x, 1.0).unwrap();
        for (a, b) in y0.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_difference_form_matches_direct() {
        let x = random(8, 8, 11);
        let a = random(8, 8, 12);
        let b = random(8, 8, 13);
        for d in [
            Denoiser::QuadraticProx { lambda: 0.7 },
            Denoiser::dct_for(4, 1.0, 0.7),
            Denoiser::tv_for(1.0, 0.7, 5),
        ] {
            let (gap, partial) = descent_gap(&d, &x, &a, &b, 1.3, 0.7);
            assert!(!partial);
            let direct = objective(&d, &x, &a, 1.3, 0.7) - objective(&d, &x, &b, 1.3, 0.7);
            assert!(
                (gap - direct).abs() < 1e-10 * direct.abs().max(1.0),
                "{}",
                d.name()
            );
        }
    }

    proptest! {
        #[test]
        fn exact_proxes_are_minimizers(
            seed in 0u64..1000,
            eta in 0.1f64..3.0,
            lambda in 0.0f64..2.0,
            which in 0usize..2,
        ) {
            let x = random(8, 8, seed);
            let d = if which == 0 {
                Denoiser::QuadraticProx { lambda }
            } else {
                Denoiser::dct_for(4, eta, lambda)
            };
            let v = d.denoise(&x, eta).unwrap();
            let base = objective(&d, &x, &v, eta, lambda);
            let mut rng = Rng::new(seed ^ 0xabc);
            for _ in 0..5 {
                let p = Image::new(8, 8, (0..64).map(|_| 1e-2 * rng.normal()).collect(), 1.0).unwrap();
                prop_assert!(objective(&d, &x, &v.add(&p), eta, lambda) >= base - 1e-12);
            }
        }
    }
}
