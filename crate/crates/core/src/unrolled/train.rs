use super::adam::{adam_step, AdamState, TrainConfig};
use super::net::{loss_and_gradient, mse_loss, NetParams, StageDenoiser, UnrolledNet};
use crate::denoisers::cnn;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::operators::{operator_norm_sq, DegradationOp};
use crate::rng::Rng;

/// Parameters plus optimizer state: everything needed to resume exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: NetParams,
    pub adam: AdamState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRow {
    /// Number of updates completed before this one.
    pub step: u64,
    /// Minibatch loss before the update.
    pub loss: f64,
    pub lr: f64,
}

pub const LOSS_HEADER: &str = "step,loss,lr";

pub fn loss_csv_row(r: &LossRow) -> String {
    format!("{},{:.16e},{:.16e}", r.step, r.loss, r.lr)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Last state with finite loss and parameters.
    pub state: TrainState,
    pub curve: Vec<LossRow>,
    /// Update index at which the loss or parameters became non-finite.
    pub diverged_at: Option<u64>,
}

/// Largest admissible gradient step of the splitting iteration for `op`.
pub fn feasible_step(op: &DegradationOp, eta: f64) -> f64 {
    let norm = op
        .normal_norm_exact()
        .unwrap_or_else(|| operator_norm_sq(op, 1000, &mut Rng::new(0x6e6f726d)).value);
    2.0 / (norm + eta)
}

/// Network with `Ā` built from `0.9 * max_step`, and the matching initial
/// state: solver-equivalent stage weights and He-initialized denoiser parameters.
pub fn initialize(
    stages: usize,
    eta: f64,
    denoiser: StageDenoiser,
    op: &DegradationOp,
    seed: u64,
) -> Result<(UnrolledNet, TrainState)> {
    let delta = 0.9 * feasible_step(op, eta);
    let theta = match &denoiser {
        StageDenoiser::Learned { spec, .. } => cnn::init_params(spec, &mut Rng::new(seed)),
        StageDenoiser::Fixed(_) => Vec::new(),
    };
    let net = UnrolledNet {
        stages,
        eta,
        abar_delta: delta,
        denoiser,
    };
    let params = NetParams::from_solver(stages, delta, eta, theta);
    net.validate(&params)?;
    let adam = AdamState::new(params.len());
    Ok((net, TrainState { params, adam }))
}

/// Dataset indices of the minibatch for update `step`: consecutive slices of
/// an endless sequence of permutations, the `e`-th drawn from `seed` and `e`.
pub fn batch_indices(n: usize, batch_size: usize, seed: u64, step: u64) -> Vec<usize> {
    let mut cache: Option<(u64, Vec<usize>)> = None;
    let start = step * batch_size as u64;
    (0..batch_size as u64)
        .map(|i| {
            let pos = start + i;
            let epoch = pos / n as u64;
            if cache.as_ref().is_none_or(|(e, _)| *e != epoch) {
                cache = Some((epoch, permutation(n, seed, epoch)));
            }
            cache.as_ref().expect("just filled").1[(pos % n as u64) as usize]
        })
        .collect()
}

fn permutation(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::new(seed).fork(epoch).shuffle(&mut idx);
    idx
}

/// Minibatch ADAM on the mean squared error, continuing from `start` until
/// `cfg.steps` updates have been made in total. `observer` sees the state
/// after every update.
pub fn train(
    net: &UnrolledNet,
    start: TrainState,
    data: &[(Image, Image)],
    op: &DegradationOp,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&TrainState, &LossRow) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    net.validate(&start.params)?;
    if start.adam.m.len() != start.params.len() {
        return Err(Error::InvalidArgument(
            "optimizer state does not match parameters".into(),
        ));
    }
    let stages = net.stages;
    let mut state = start;
    let mut curve = Vec::new();
    let mut diverged_at = None;
    while state.adam.t < cfg.steps {
        let step = state.adam.t;
        let batch: Vec<(Image, Image)> = batch_indices(data.len(), cfg.batch_size, cfg.seed, step)
            .into_iter()
            .map(|i| data[i].clone())
            .collect();
        let (loss, grad) = match loss_and_gradient(net, &state.params, &batch, op) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => {
                diverged_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            diverged_at = Some(step);
            break;
        }
        let mut flat = state.params.to_flat();
        let mut adam = state.adam.clone();
        let lr = adam_step(&mut adam, &mut flat, &grad, cfg)?;
        if flat.iter().any(|p| !p.is_finite()) {
            diverged_at = Some(step);
            break;
        }
        state = TrainState {
            params: NetParams::from_flat(stages, &flat)?,
            adam,
        };
        let row = LossRow { step, loss, lr };
        curve.push(row);
        observer(&state, &row)?;
    }
    Ok(TrainOutcome {
        state,
        curve,
        diverged_at,
    })
}

/// Largest relative error between the reverse-mode gradient and central
/// differences with step `h`, over every coordinate or, above 1000
/// parameters, 200 coordinates drawn from `seed`. Denominators are floored
/// at 1e-8.
pub fn grad_check(
    net: &UnrolledNet,
    params: &NetParams,
    batch: &[(Image, Image)],
    op: &DegradationOp,
    h: f64,
    seed: u64,
) -> Result<f64> {
    let (_, grad) = loss_and_gradient(net, params, batch, op)?;
    let flat = params.to_flat();
    let mut coords: Vec<usize> = (0..flat.len()).collect();
    if flat.len() > 1000 {
        Rng::new(seed).shuffle(&mut coords);
        coords.truncate(200);
        coords.sort_unstable();
    }
    let stages = net.stages;
    let mut worst: f64 = 0.0;
    for i in coords {
        let mut p = flat.clone();
        p[i] = flat[i] + h;
        let up = mse_loss(net, &NetParams::from_flat(stages, &p)?, batch, op)?;
        p[i] = flat[i] - h;
        let down = mse_loss(net, &NetParams::from_flat(stages, &p)?, batch, op)?;
        let numeric = (up - down) / (2.0 * h);
        let denom = grad[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((grad[i] - numeric).abs() / denom);
    }
    Ok(worst)
}
