use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use unroll_core::imaging::{add_gaussian_noise, augment8, extract_patches, load_image};
use unroll_core::operators::DegradationOp;
use unroll_core::unrolled::{
    initialize, load_checkpoint, loss_csv_row, save_checkpoint, train as run_training,
    StageDenoiser, TrainConfig, TrainState, UnrolledNet, LOSS_HEADER,
};
use unroll_core::{Image, Rng};

use crate::config::{build_op, Loaded};
use crate::error::{CliError, Result};
use crate::{ensure_dir, list_images};

pub const CHECKPOINT_FILE: &str = "checkpoint.unr";
pub const LOSS_FILE: &str = "loss.csv";

/// Stream used to pick the `max_pairs` subset; noise for pair `i` uses stream `i`.
const SUBSET_STREAM: u64 = u64::MAX;

/// (observation, truth) pairs on the [0, 1] scale.
fn training_pairs(l: &Loaded, op: &DegradationOp) -> Result<Vec<(Image, Image)>> {
    let t = &l.config.training;
    let input = l.input()?;
    let names = list_images(input)?;
    if names.is_empty() {
        return Err(CliError::Config(format!(
            "no images in {}",
            input.display()
        )));
    }
    let mut clean = Vec::new();
    for name in &names {
        let img = load_image(input.join(name))?;
        let scaled = img.scale(1.0 / img.peak()).with_peak(1.0);
        for p in extract_patches(&scaled, t.patch_size, t.stride)?.patches {
            if t.augment {
                clean.extend(augment8(&p)?);
            } else {
                clean.push(p);
            }
        }
    }
    if let Some(n) = t.max_pairs {
        if n < clean.len() {
            Rng::new(l.config.seed)
                .fork(SUBSET_STREAM)
                .shuffle(&mut clean);
            clean.truncate(n);
        }
    }
    let sigma = t.noise_sigma.unwrap_or(l.config.noise_sigma) / 255.0;
    let rng = Rng::new(l.config.seed);
    clean
        .into_par_iter()
        .enumerate()
        .map(|(i, x)| {
            let y = add_gaussian_noise(&op.apply(&x)?, sigma, &mut rng.fork(i as u64))?;
            Ok((y, x))
        })
        .collect()
}

/// Loss rows already recorded before update `t`, for a resumed run.
fn previous_rows(path: &Path, t: u64) -> Result<Vec<String>> {
    let Ok(text) = fs::read_to_string(path) else {
        return Ok(Vec::new());
    };
    let mut lines = text.lines();
    if lines.next() != Some(LOSS_HEADER) {
        return Err(CliError::malformed("loss curve", "missing header"));
    }
    let mut rows = Vec::new();
    for line in lines {
        let step: u64 = line
            .split(',')
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::malformed("loss curve", format!("bad row {line:?}")))?;
        if step < t {
            rows.push(line.to_string());
        }
    }
    Ok(rows)
}

/// Trains the unrolled network on noisy/clean patch pairs cut from the
/// images in --input and writes the checkpoint and loss curve to --output.
/// An existing checkpoint there is resumed unless `training.resume` is off.
pub fn train(l: &Loaded) -> Result<u8> {
    let t = &l.config.training;
    let output = l.output()?;
    ensure_dir(output)?;
    let kind = l.operator_kind()?.ok_or(CliError::OperatorUnspecified)?;
    let op = build_op(&kind, (t.patch_size, t.patch_size))?;
    let data = training_pairs(l, &op)?;
    let cfg = TrainConfig {
        lr0: t.lr0,
        halve_every: t.halve_every,
        batch_size: t.batch_size,
        steps: t.steps,
        seed: l.config.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;

    let ck_path = output.join(CHECKPOINT_FILE);
    let loss_path = output.join(LOSS_FILE);
    let (net, start): (UnrolledNet, TrainState) = if t.resume && ck_path.exists() {
        let ck = load_checkpoint(&ck_path)?;
        let state = ck.train_state().ok_or_else(|| {
            CliError::malformed("checkpoint", "no optimizer state to resume from")
        })?;
        (ck.net, state)
    } else {
        let denoiser = StageDenoiser::Learned {
            spec: t.net.spec(),
            input_scale: 1.0,
        };
        let init_seed = t.init_seed.unwrap_or(l.config.seed);
        initialize(t.stages, t.eta, denoiser, &op, init_seed)?
    };
    let kept = previous_rows(&loss_path, start.adam.t)?;

    let file = File::create(&loss_path).map_err(|e| CliError::io(&loss_path, e))?;
    let mut loss = BufWriter::new(file);
    let io_err = |e: std::io::Error| CliError::io(&loss_path, e);
    writeln!(loss, "{LOSS_HEADER}").map_err(io_err)?;
    for row in &kept {
        writeln!(loss, "{row}").map_err(io_err)?;
    }
    save_checkpoint(&ck_path, &net, &start.params, Some(&start.adam))?;

    let every = t.checkpoint_every;
    let mut observer = |state: &TrainState, row: &unroll_core::unrolled::LossRow| {
        writeln!(loss, "{}", loss_csv_row(row))
            .map_err(|e| unroll_core::Error::InvalidArgument(format!("writing loss curve: {e}")))?;
        if every > 0 && state.adam.t % every == 0 {
            loss.flush().map_err(|e| {
                unroll_core::Error::InvalidArgument(format!("writing loss curve: {e}"))
            })?;
            save_checkpoint(&ck_path, &net, &state.params, Some(&state.adam))?;
        }
        Ok(())
    };
    let outcome = run_training(&net, start, &data, &op, &cfg, &mut observer)?;
    loss.flush().map_err(io_err)?;
    save_checkpoint(
        &ck_path,
        &net,
        &outcome.state.params,
        Some(&outcome.state.adam),
    )?;
    l.write_resolved(output)?;
    if let Some(step) = outcome.diverged_at {
        return Err(CliError::Diverged {
            step,
            checkpoint: ck_path,
        });
    }
    match outcome.curve.last() {
        Some(r) => println!("trained to step {} (loss {:.6e})", r.step + 1, r.loss),
        None => println!(
            "nothing to do: checkpoint already at step {}",
            outcome.state.adam.t
        ),
    }
    Ok(0)
}
