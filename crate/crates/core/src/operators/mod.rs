//! Linear degradation operators `A` with forward and adjoint application.
//!
//! Blur operators use circular boundaries so `A` has an exact transpose.
//! Bicubic resizing pairs a 1/s downscale with an s upscale standing in for
//! the adjoint; that pair is not a true transpose and is excluded from
//! inner-product checks.

mod bicubic;
mod circulant;
mod kernel;

use std::sync::Arc;

pub use kernel::{gaussian_kernel, load_kernel, motion_kernel, parse_kernel, Kernel};

use bicubic::Resampler2d;
use circulant::CirculantConv;

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::rng::Rng;

/// Default power-iteration count for [`operator_norm_sq`].
pub const DEFAULT_NORM_ITERS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    Identity,
    Blur(Kernel),
    BlurDownsample(Kernel, usize),
    BicubicResize(usize),
}

#[derive(Clone, Debug)]
enum Engine {
    None,
    Conv(Arc<CirculantConv>),
    Bicubic {
        down: Arc<Resampler2d>,
        up: Arc<Resampler2d>,
    },
}

/// A degradation operator bound to an input shape.
#[derive(Clone, Debug)]
pub struct DegradationOp {
    kind: OpKind,
    input_shape: (usize, usize),
    output_shape: (usize, usize),
    engine: Engine,
}

impl PartialEq for DegradationOp {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.input_shape == other.input_shape
    }
}

fn check_factor(shape: (usize, usize), s: usize) -> Result<(usize, usize)> {
    if s == 0 || shape.0 % s != 0 || shape.1 % s != 0 {
        return Err(Error::InvalidArgument(format!(
            "scale factor {s} does not divide {}x{}",
            shape.0, shape.1
        )));
    }
    Ok((shape.0 / s, shape.1 / s))
}

impl DegradationOp {
    pub fn new(kind: OpKind, input_shape: (usize, usize)) -> Result<Self> {
        if input_shape.0 == 0 || input_shape.1 == 0 {
            return Err(Error::InvalidArgument("empty operator shape".into()));
        }
        let (h, w) = input_shape;
        let (output_shape, engine) = match &kind {
            OpKind::Identity => (input_shape, Engine::None),
            OpKind::Blur(k) => (
                input_shape,
                Engine::Conv(Arc::new(CirculantConv::new(k, h, w))),
            ),
            OpKind::BlurDownsample(k, s) => (
                check_factor(input_shape, *s)?,
                Engine::Conv(Arc::new(CirculantConv::new(k, h, w))),
            ),
            OpKind::BicubicResize(s) => {
                let out = check_factor(input_shape, *s)?;
                (
                    out,
                    Engine::Bicubic {
                        down: Arc::new(Resampler2d::new(input_shape, out)),
                        up: Arc::new(Resampler2d::new(out, input_shape)),
                    },
                )
            }
        };
        Ok(DegradationOp {
            kind,
            input_shape,
            output_shape,
            engine,
        })
    }

    pub fn identity(shape: (usize, usize)) -> Self {
        DegradationOp::new(OpKind::Identity, shape).expect("identity on non-empty shape")
    }

    pub fn blur(kernel: Kernel, shape: (usize, usize)) -> Result<Self> {
        DegradationOp::new(OpKind::Blur(kernel), shape)
    }

    pub fn blur_downsample(kernel: Kernel, factor: usize, shape: (usize, usize)) -> Result<Self> {
        DegradationOp::new(OpKind::BlurDownsample(kernel, factor), shape)
    }

    pub fn bicubic(factor: usize, shape: (usize, usize)) -> Result<Self> {
        DegradationOp::new(OpKind::BicubicResize(factor), shape)
    }

    /// Same operator rebuilt for another input shape.
    pub fn with_input_shape(&self, shape: (usize, usize)) -> Result<Self> {
        DegradationOp::new(self.kind.clone(), shape)
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn input_shape(&self) -> (usize, usize) {
        self.input_shape
    }

    pub fn output_shape(&self) -> (usize, usize) {
        self.output_shape
    }

    /// True when [`adjoint`](Self::adjoint) is the exact transpose of [`apply`](Self::apply).
    pub fn has_exact_adjoint(&self) -> bool {
        !matches!(self.kind, OpKind::BicubicResize(_))
    }

    fn wrap(&self, like: &Image, shape: (usize, usize), data: Vec<f64>) -> Image {
        Image::from_parts(shape.0, shape.1, data, like.peak())
    }

    /// y = A x
    pub fn apply(&self, x: &Image) -> Result<Image> {
        x.check_shape(self.input_shape)?;
        Ok(match (&self.kind, &self.engine) {
            (OpKind::Identity, _) => x.clone(),
            (OpKind::Blur(_), Engine::Conv(conv)) => {
                self.wrap(x, self.output_shape, conv.convolve(x.data()))
            }
            (OpKind::BlurDownsample(_, s), Engine::Conv(conv)) => {
                let blurred = conv.convolve(x.data());
                let w = self.input_shape.1;
                let (ho, wo) = self.output_shape;
                let mut out = Vec::with_capacity(ho * wo);
                for r in 0..ho {
                    for c in 0..wo {
                        out.push(blurred[r * s * w + c * s]);
                    }
                }
                self.wrap(x, self.output_shape, out)
            }
            (OpKind::BicubicResize(_), Engine::Bicubic { down, .. }) => {
                self.wrap(x, self.output_shape, down.apply(x.data()))
            }
            _ => unreachable!("engine matches kind by construction"),
        })
    }

    /// Adjoint action. Exact transpose except for bicubic resizing, which
    /// upsamples by s with the same bicubic interpolator.
    pub fn adjoint(&self, y: &Image) -> Result<Image> {
        y.check_shape(self.output_shape)?;
        Ok(match (&self.kind, &self.engine) {
            (OpKind::Identity, _) => y.clone(),
            (OpKind::Blur(_), Engine::Conv(conv)) => {
                self.wrap(y, self.input_shape, conv.correlate(y.data()))
            }
            (OpKind::BlurDownsample(_, s), Engine::Conv(conv)) => {
                let (h, w) = self.input_shape;
                let (ho, wo) = self.output_shape;
                let mut up = vec![0.0; h * w];
                for r in 0..ho {
                    for c in 0..wo {
                        up[r * s * w + c * s] = y.data()[r * wo + c];
                    }
                }
                self.wrap(y, self.input_shape, conv.correlate(&up))
            }
            (OpKind::BicubicResize(_), Engine::Bicubic { up, .. }) => {
                self.wrap(y, self.input_shape, up.apply(y.data()))
            }
            _ => unreachable!("engine matches kind by construction"),
        })
    }

    /// Exact transpose of [`apply`](Self::apply); equals `adjoint` for all
    /// kinds except bicubic resizing.
    pub fn apply_transpose(&self, y: &Image) -> Result<Image> {
        match (&self.kind, &self.engine) {
            (OpKind::BicubicResize(_), Engine::Bicubic { down, .. }) => {
                y.check_shape(self.output_shape)?;
                Ok(self.wrap(y, self.input_shape, down.apply_transpose(y.data())))
            }
            _ => self.adjoint(y),
        }
    }

    /// Exact transpose of [`adjoint`](Self::adjoint).
    pub fn adjoint_transpose(&self, x: &Image) -> Result<Image> {
        match (&self.kind, &self.engine) {
            (OpKind::BicubicResize(_), Engine::Bicubic { up, .. }) => {
                x.check_shape(self.input_shape)?;
                Ok(self.wrap(x, self.output_shape, up.apply_transpose(x.data())))
            }
            _ => self.apply(x),
        }
    }

    /// Exact `‖AᵀA‖` from the Fourier diagonalization; `None` for bicubic
    /// resizing, which is not shift invariant.
    pub fn normal_norm_exact(&self) -> Option<f64> {
        match (&self.kind, &self.engine) {
            (OpKind::Identity, _) => Some(1.0),
            (OpKind::Blur(_), Engine::Conv(conv)) => {
                Some(conv.power_spectrum().into_iter().fold(0.0, f64::max))
            }
            (OpKind::BlurDownsample(_, s), Engine::Conv(conv)) => {
                // A Aᵀ is circulant on the coarse grid; its eigenvalues
                // average the fine power spectrum over the s x s aliases.
                let p = conv.power_spectrum();
                let (h, w) = self.input_shape;
                let (ho, wo) = self.output_shape;
                let mut best: f64 = 0.0;
                for r in 0..ho {
                    for c in 0..wo {
                        let mut sum = 0.0;
                        for a in 0..*s {
                            for b in 0..*s {
                                sum += p[(r + a * ho) * w + c + b * wo];
                            }
                        }
                        best = best.max(sum / (s * s) as f64);
                    }
                }
                debug_assert_eq!(h, ho * s);
                Some(best)
            }
            _ => None,
        }
    }

    /// `x -> adjoint(apply(x))`
    pub fn normal(&self, x: &Image) -> Result<Image> {
        self.adjoint(&self.apply(x)?)
    }

    /// `x -> apply_transpose(apply(x))`, symmetric for every kind.
    pub fn normal_exact(&self, x: &Image) -> Result<Image> {
        self.apply_transpose(&self.apply(x)?)
    }
}

/// `Ā x = (1 - delta*eta) x - delta * Aᵀ A x`, the linear part of one gradient
/// step on the x-subproblem.
pub fn apply_abar(op: &DegradationOp, delta: f64, eta: f64, x: &Image) -> Result<Image> {
    let ata = op.normal(x)?;
    let mut out = x.scale(1.0 - delta * eta);
    out.axpy(-delta, &ata);
    Ok(out)
}

/// Transpose of [`apply_abar`]; identical to it whenever the adjoint is exact.
pub fn apply_abar_transpose(op: &DegradationOp, delta: f64, eta: f64, g: &Image) -> Result<Image> {
    let inner = op.apply_transpose(&op.adjoint_transpose(g)?)?;
    let mut out = g.scale(1.0 - delta * eta);
    out.axpy(-delta, &inner);
    Ok(out)
}

/// Result of a power-iteration run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
}

/// Power-iteration estimate of `‖AᵀA‖` (with the exact transpose) and a
/// Rayleigh-quotient readout. The seeded start vector makes the result
/// deterministic and the estimate never decreases as `iters` grows. Stops
/// early once the readout changes by less than one part in 1e15.
pub fn operator_norm_sq(op: &DegradationOp, iters: usize, rng: &mut Rng) -> NormEstimate {
    let iters = iters.max(1);
    let (h, w) = op.input_shape();
    let mut x = Image::from_parts(h, w, (0..h * w).map(|_| rng.normal()).collect(), 1.0);
    let n = x.norm();
    x = x.scale(1.0 / n);
    let mut value: f64 = 0.0;
    for i in 1..=iters {
        let z = op.normal_exact(&x).expect("shape is the operator's own");
        let next = x.dot(&z);
        let zn = z.norm();
        if zn == 0.0 {
            return NormEstimate {
                value: 0.0,
                iterations: i,
            };
        }
        let settled = i > 1 && (next - value).abs() <= 1e-15 * next.abs();
        value = next;
        if settled {
            return NormEstimate {
                value,
                iterations: i,
            };
        }
        x = z.scale(1.0 / zn);
    }
    NormEstimate {
        value,
        iterations: iters,
    }
}
