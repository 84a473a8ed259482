use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use unroll_core::denoisers::cnn::load_weights;
use unroll_core::denoisers::Denoiser;
use unroll_core::imaging::{load_image, psnr, save_image, ssim};
use unroll_core::operators::OpKind;
use unroll_core::solver::{max_step, solve, Problem, SolverConfig, SOLVER_NORM_ITERS};
use unroll_core::unrolled::{load_checkpoint, unrolled_apply, Checkpoint};
use unroll_core::Image;

use crate::config::{build_op, input_shape, DenoiserKind, Loaded};
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::report::{EvalReport, ReportRow};
use crate::{ensure_dir, list_images, stem};

enum Method {
    Solver(Denoiser),
    Unrolled(Checkpoint),
}

fn method(l: &Loaded) -> Result<Method> {
    let d = &l.config.denoiser;
    let s = &l.config.solver;
    let weights = || {
        d.weights
            .as_deref()
            .map(|p| l.resolve(p))
            .ok_or_else(|| CliError::Config(format!("denoiser {:?} needs a weights path", d.kind)))
    };
    let denoiser = match d.kind {
        DenoiserKind::Zero => Denoiser::Zero,
        DenoiserKind::Quadratic => Denoiser::QuadraticProx { lambda: s.lambda },
        DenoiserKind::Dct => Denoiser::dct_for(d.patch, s.eta, s.lambda),
        DenoiserKind::Tv => Denoiser::tv_for(s.eta, s.lambda, d.tv_iters),
        DenoiserKind::Cnn => {
            let (spec, params) = load_weights(&weights()?)?;
            Denoiser::Cnn {
                spec,
                params,
                input_scale: d.input_scale,
            }
        }
        DenoiserKind::Unrolled => return Ok(Method::Unrolled(load_checkpoint(&weights()?)?)),
    };
    denoiser.validate()?;
    Ok(Method::Solver(denoiser))
}

struct Restored {
    image: Image,
    trace_csv: Option<String>,
    iterations: usize,
    seconds: f64,
}

fn restore_one(l: &Loaded, m: &Method, kind: &OpKind, y: Image) -> Result<Restored> {
    let started = Instant::now();
    let op = build_op(kind, input_shape(kind, y.shape()))?;
    let s = &l.config.solver;
    let (image, trace_csv, iterations) = match m {
        Method::Solver(d) => {
            let p = Problem::new(y, op, s.lambda, s.eta)?;
            let cfg = SolverConfig {
                delta: s.delta.unwrap_or_else(|| s.step_fraction * max_step(&p)),
                max_iters: s.iters,
                tol: s.tol,
                mode: s.mode(),
                norm_iters: SOLVER_NORM_ITERS,
            };
            let sol = solve(&p, &cfg, d)?;
            (sol.x, Some(sol.trace.to_csv()), sol.iterations)
        }
        Method::Unrolled(ck) => {
            // The network was trained on [0, 1] intensities.
            let scale = y.peak();
            let out = unrolled_apply(&ck.net, &ck.params, &y.scale(1.0 / scale), &op)?;
            (out.scale(scale), None, ck.net.stages)
        }
    };
    Ok(Restored {
        image,
        trace_csv,
        iterations,
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Restores every degraded image. The operator comes from the input
/// directory's manifest or, failing that, from the config.
pub fn restore(l: &Loaded) -> Result<u8> {
    let input = l.input()?;
    let output = l.output()?;
    let manifest_path = input.join(MANIFEST_FILE);
    let (kind, names) = if manifest_path.exists() {
        let m = Manifest::load(&manifest_path)?;
        let names = m.images.iter().map(|i| i.name.clone()).collect();
        (m.operator.to_kind()?, names)
    } else {
        let op = l
            .config
            .operator
            .as_ref()
            .ok_or(CliError::OperatorUnspecified)?;
        (op.build(l)?, list_images(input)?)
    };
    if names.is_empty() {
        return Err(CliError::Config(format!(
            "no images in {}",
            input.display()
        )));
    }
    let m = method(l)?;
    let truth = l.config.io.truth.as_deref();
    ensure_dir(output)?;

    let rows = names
        .par_iter()
        .map(|name| -> Result<Option<ReportRow>> {
            let y = load_image(input.join(name))?;
            let r = restore_one(l, &m, &kind, y.clone())?;
            let out_path = output.join(name);
            save_image(&r.image, &out_path)?;
            if let Some(csv) = &r.trace_csv {
                write_text(&output.join(format!("{}.trace.csv", stem(name))), csv)?;
            }
            let Some(truth) = truth else { return Ok(None) };
            let x = load_image(truth.join(name))?;
            let saved = load_image(&out_path)?;
            let input_psnr = (y.shape() == x.shape()).then(|| psnr(&y, &x)).transpose()?;
            Ok(Some(ReportRow {
                name: name.clone(),
                psnr: psnr(&saved, &x)?,
                ssim: ssim(&saved, &x)?,
                input_psnr,
                runtime_s: l.config.report_runtime.then_some(r.seconds),
                iterations: Some(r.iterations),
            }))
        })
        .collect::<Result<Vec<_>>>()?;

    l.write_resolved(output)?;
    if truth.is_some() {
        let report = EvalReport::new(rows.into_iter().flatten().collect())?;
        report.write(output, "report")?;
        print!("{}", report.to_table());
    } else {
        println!(
            "restored {} image(s) into {}",
            names.len(),
            output.display()
        );
    }
    Ok(0)
}
