use rayon::prelude::*;

use crate::denoisers::cnn::{self, NetSpec, Tape};
use crate::denoisers::Denoiser;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::operators::{apply_abar, apply_abar_transpose, DegradationOp};

/// Denoiser shared by all stages.
#[derive(Clone, Debug, PartialEq)]
pub enum StageDenoiser {
    /// Network whose parameters are the trainable `theta`, applied as
    /// `s * net(x / s)` with `s = input_scale`.
    Learned { spec: NetSpec, input_scale: f64 },
    /// A fixed denoiser; only the linear ones (zero, quadratic) support the
    /// reverse pass.
    Fixed(Denoiser),
}

/// Architecture of the unrolled network: `stages` copies of
/// `x_k = Ā x_{k-1} + a_k x_0 + b_k v_{k-1}`, `v_k = f(x_k)`, where
/// `Ā = (1 - abar_delta * eta) I - abar_delta AᵀA` and `x_0 = Aᵀy`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnrolledNet {
    pub stages: usize,
    pub eta: f64,
    pub abar_delta: f64,
    pub denoiser: StageDenoiser,
}

/// Trainable weights. Stage 1 uses `delta1` on `x_0` and has no `v_0` term, so
/// its pair is carried but inert; stage `k >= 2` uses `stage_weights[k-1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    pub delta1: f64,
    pub stage_weights: Vec<(f64, f64)>,
    pub theta: Vec<f64>,
}

impl NetParams {
    /// The weights for which the network runs the splitting iteration exactly:
    /// every `x_0` weight `delta`, every `v` weight `delta * eta`.
    pub fn from_solver(stages: usize, delta: f64, eta: f64, theta: Vec<f64>) -> Self {
        NetParams {
            delta1: delta,
            stage_weights: vec![(delta, delta * eta); stages],
            theta,
        }
    }

    pub fn len(&self) -> usize {
        1 + 2 * self.stage_weights.len() + self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat order: `delta1`, the pairs, then `theta`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.push(self.delta1);
        for &(a, b) in &self.stage_weights {
            out.push(a);
            out.push(b);
        }
        out.extend_from_slice(&self.theta);
        out
    }

    pub fn from_flat(stages: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() < 1 + 2 * stages {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot hold {stages} stages",
                flat.len()
            )));
        }
        Ok(NetParams {
            delta1: flat[0],
            stage_weights: (0..stages)
                .map(|k| (flat[1 + 2 * k], flat[2 + 2 * k]))
                .collect(),
            theta: flat[1 + 2 * stages..].to_vec(),
        })
    }

    fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

impl UnrolledNet {
    pub fn validate(&self, params: &NetParams) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::InvalidArgument("at least one stage required".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) || !self.abar_delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bad eta {} or step {}",
                self.eta, self.abar_delta
            )));
        }
        if params.stage_weights.len() != self.stages {
            return Err(Error::InvalidArgument(format!(
                "expected {} stage weight pairs, got {}",
                self.stages,
                params.stage_weights.len()
            )));
        }
        let theta_len = match &self.denoiser {
            StageDenoiser::Learned { spec, input_scale } => {
                spec.validate()?;
                if !(*input_scale > 0.0 && input_scale.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "input scale must be positive, got {input_scale}"
                    )));
                }
                spec.param_count()
            }
            StageDenoiser::Fixed(d) => {
                d.validate()?;
                0
            }
        };
        if params.theta.len() != theta_len {
            return Err(Error::InvalidArgument(format!(
                "denoiser expects {theta_len} parameters, got {}",
                params.theta.len()
            )));
        }
        if !params.is_finite() {
            return Err(Error::InvalidArgument("non-finite network weight".into()));
        }
        Ok(())
    }
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct StageTape {
    fingerprint: u64,
    x0: Image,
    /// `x_1, ..., x_K`
    xs: Vec<Image>,
    /// `v_0 = 0, v_1, ..., v_K`
    vs: Vec<Image>,
    cnn: Vec<Tape>,
}

impl StageTape {
    pub fn output(&self) -> &Image {
        self.vs.last().expect("at least one stage")
    }

    /// Stage iterate `x_k`, `k` in `0..=K`.
    pub fn x(&self, k: usize) -> &Image {
        if k == 0 {
            &self.x0
        } else {
            &self.xs[k - 1]
        }
    }

    /// Denoised iterate `v_k`, `k` in `0..=K`.
    pub fn v(&self, k: usize) -> &Image {
        &self.vs[k]
    }
}

fn fingerprint(params: &NetParams) -> u64 {
    crate::denoisers::cnn::fingerprint(&params.to_flat())
}

fn finite(img: Image, stage: usize) -> Result<Image> {
    if img.is_finite() {
        Ok(img)
    } else {
        Err(Error::NonFinite { iteration: stage })
    }
}

fn run(
    net: &UnrolledNet,
    params: &NetParams,
    y: &Image,
    op: &DegradationOp,
    taped: bool,
) -> Result<StageTape> {
    net.validate(params)?;
    let x0 = op.adjoint(y)?;
    let mut x = x0.clone();
    let mut vs = vec![x0.scale(0.0)];
    let mut tapes = Vec::new();
    let mut xs = Vec::new();
    for k in 1..=net.stages {
        let mut next = apply_abar(op, net.abar_delta, net.eta, &x)?;
        if k == 1 {
            next.axpy(params.delta1, &x0);
        } else {
            let (a, b) = params.stage_weights[k - 1];
            next.axpy(a, &x0);
            next.axpy(b, &vs[k - 1]);
        }
        x = finite(next, k)?;
        if taped {
            xs.push(x.clone());
        }
        let v = match &net.denoiser {
            StageDenoiser::Learned { spec, input_scale } => {
                let input = x.scale(1.0 / input_scale);
                let out = if taped {
                    let (out, tape) = cnn::forward_taped(spec, &params.theta, &input)?;
                    tapes.push(tape);
                    out
                } else {
                    cnn::forward(spec, &params.theta, &input)?
                };
                out.scale(*input_scale)
            }
            StageDenoiser::Fixed(d) => d.denoise(&x, net.eta)?,
        };
        vs.push(finite(v, k)?);
    }
    Ok(StageTape {
        fingerprint: fingerprint(params),
        x0,
        xs,
        vs,
        cnn: tapes,
    })
}

/// Runs the network on observation `y`, returning `v_K` and the tape.
pub fn unrolled_forward(
    net: &UnrolledNet,
    params: &NetParams,
    y: &Image,
    op: &DegradationOp,
) -> Result<(Image, StageTape)> {
    let tape = run(net, params, y, op, true)?;
    Ok((tape.output().clone(), tape))
}

/// Forward pass without recording a tape.
pub fn unrolled_apply(
    net: &UnrolledNet,
    params: &NetParams,
    y: &Image,
    op: &DegradationOp,
) -> Result<Image> {
    let tape = run(net, params, y, op, false)?;
    Ok(tape.vs.into_iter().next_back().expect("at least one stage"))
}

/// Gradient of a scalar loss with respect to the flat parameters, given
/// `grad_out` = d(loss)/d(output) for the pass recorded in `tape`.
pub fn unrolled_backward(
    net: &UnrolledNet,
    params: &NetParams,
    op: &DegradationOp,
    tape: &StageTape,
    grad_out: &Image,
) -> Result<Vec<f64>> {
    if tape.fingerprint != fingerprint(params) || tape.vs.len() != net.stages + 1 {
        return Err(Error::StaleTape);
    }
    grad_out.check_shape(tape.x0.shape())?;
    let k_total = net.stages;
    let theta_off = 1 + 2 * k_total;
    let mut grad = vec![0.0; params.len()];
    // gradient w.r.t. v_k flowing in from the output and from stage k + 1
    let mut gv = grad_out.clone();
    let mut gx_next: Option<Image> = None;
    for k in (1..=k_total).rev() {
        let mut gx = match &net.denoiser {
            StageDenoiser::Learned { spec, input_scale } => {
                let g = gv.scale(*input_scale);
                let gin = cnn::backward(
                    spec,
                    &params.theta,
                    &tape.cnn[k - 1],
                    &g,
                    &mut grad[theta_off..],
                )?;
                gin.scale(1.0 / input_scale)
            }
            StageDenoiser::Fixed(Denoiser::Zero) => gv.scale(0.0),
            StageDenoiser::Fixed(Denoiser::QuadraticProx { lambda }) => {
                gv.scale(net.eta / (net.eta + lambda))
            }
            StageDenoiser::Fixed(d) => {
                return Err(Error::InvalidArgument(format!(
                    "the {} denoiser has no reverse pass",
                    d.name()
                )))
            }
        };
        if let Some(g) = &gx_next {
            gx.axpy(1.0, &apply_abar_transpose(op, net.abar_delta, net.eta, g)?);
        }
        if k == 1 {
            grad[0] += gx.dot(&tape.x0);
            gv = gx.scale(0.0);
        } else {
            let (_, b) = params.stage_weights[k - 1];
            grad[1 + 2 * (k - 1)] += gx.dot(&tape.x0);
            grad[2 + 2 * (k - 1)] += gx.dot(&tape.vs[k - 1]);
            gv = gx.scale(b);
        }
        gx_next = Some(gx);
    }
    Ok(grad)
}

fn check_batch(batch: &[(Image, Image)]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    Ok(())
}

/// `(1 / (B N)) * sum_i ‖F(y_i) - x_i‖²` over a batch of
/// (observation, truth) pairs with `N` pixels each.
pub fn mse_loss(
    net: &UnrolledNet,
    params: &NetParams,
    batch: &[(Image, Image)],
    op: &DegradationOp,
) -> Result<f64> {
    check_batch(batch)?;
    let per: Vec<f64> = batch
        .par_iter()
        .map(|(y, x)| {
            let out = unrolled_apply(net, params, y, op)?;
            x.check_shape(out.shape())?;
            Ok(out.sub(x).norm_sq())
        })
        .collect::<Result<_>>()?;
    let n = batch[0].1.len() as f64;
    Ok(per.iter().sum::<f64>() / (batch.len() as f64 * n))
}

/// Loss and its gradient; items run in parallel, the reduction runs in batch
/// order so the result does not depend on the thread count.
pub fn loss_and_gradient(
    net: &UnrolledNet,
    params: &NetParams,
    batch: &[(Image, Image)],
    op: &DegradationOp,
) -> Result<(f64, Vec<f64>)> {
    check_batch(batch)?;
    let scale = 1.0 / (batch.len() as f64 * batch[0].1.len() as f64);
    let items: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|(y, x)| {
            let (out, tape) = unrolled_forward(net, params, y, op)?;
            x.check_shape(out.shape())?;
            let resid = out.sub(x);
            let g = unrolled_backward(net, params, op, &tape, &resid.scale(2.0 * scale))?;
            Ok((resid.norm_sq(), g))
        })
        .collect::<Result<_>>()?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (l, g) in items {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((loss * scale, grad))
}
