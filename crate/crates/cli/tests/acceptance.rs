//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! measured value and tolerance; the process exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use tempfile::TempDir;
use unroll_cli::report::EvalReport;
use unroll_core::denoisers::cnn::{
    backward, forward, forward_taped, init_params, Activation, NetSpec,
};
use unroll_core::denoisers::Denoiser;
use unroll_core::imaging::{add_gaussian_noise, synthetic_scene};
use unroll_core::operators::{apply_abar, gaussian_kernel, operator_norm_sq, DegradationOp};
use unroll_core::solver::{admm_solve, hqs_solve, Mode, Problem, SolverConfig};
use unroll_core::unrolled::{
    grad_check, initialize, mse_loss, train, unrolled_forward, NetParams, StageDenoiser,
    TrainConfig, UnrolledNet,
};
use unroll_core::{Image, Rng};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("adjoint identity", adjoint_suite),
        ("dense operator oracle", dense_oracle),
        ("solver descent diagnostics", descent_diagnostics),
        ("joint quadratic minimizer", joint_quadratic),
        ("gradient exactness", gradient_exactness),
        ("unrolling equivalence", unrolling_equivalence),
        ("desk-scale training", desk_training),
        ("fixture restoration", fixture_restoration),
        ("CLI determinism", cli_determinism),
    ];
    // Keep panic messages out of the report; they are folded into the FAIL line.
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {} {} {name}: {} [{:.1} s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- helpers

fn random_image(h: usize, w: usize, rng: &mut Rng) -> Image {
    Image::new(h, w, (0..h * w).map(|_| rng.normal()).collect(), 1.0).unwrap()
}

fn vec_of(img: &Image) -> DVector<f64> {
    DVector::from_column_slice(img.data())
}

/// Dense matrix of a linear map between images, probed column by column.
fn probe(input: (usize, usize), f: impl Fn(&Image) -> Image) -> DMatrix<f64> {
    let n = input.0 * input.1;
    let cols: Vec<DVector<f64>> = (0..n)
        .map(|j| {
            let mut e = Image::zeros(input.0, input.1);
            e.data_mut()[j] = 1.0;
            vec_of(&f(&e))
        })
        .collect();
    DMatrix::from_columns(&cols)
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn unit_scene(size: usize, rng: &mut Rng) -> Image {
    synthetic_scene(size, size, rng)
        .scale(1.0 / 255.0)
        .with_peak(1.0)
}

// ---------------------------------------------------------------- 1

fn adjoint_suite() -> Verdict {
    const TOL: f64 = 1e-8;
    let start = Instant::now();
    let mut rng = Rng::new(1);
    let mut worst: f64 = 0.0;
    let mut bicubic: f64 = 0.0;
    for kind in 0..4 {
        for _ in 0..100 {
            let h = 8 + rng.below(25);
            let w = 8 + rng.below(25);
            let op = match kind {
                0 => DegradationOp::identity((h, w)),
                1 => {
                    let size = 1 + 2 * rng.below(4);
                    DegradationOp::blur(gaussian_kernel(size, 0.5 + rng.uniform()).unwrap(), (h, w))
                        .unwrap()
                }
                2 => {
                    let (h, w) = (h - h % 2, w - w % 2);
                    DegradationOp::blur_downsample(gaussian_kernel(5, 1.0).unwrap(), 2, (h, w))
                        .unwrap()
                }
                _ => {
                    let (h, w) = (h - h % 2, w - w % 2);
                    DegradationOp::bicubic(2, (h, w)).unwrap()
                }
            };
            let (ih, iw) = op.input_shape();
            let (oh, ow) = op.output_shape();
            let x = random_image(ih, iw, &mut rng);
            let y = random_image(oh, ow, &mut rng);
            let lhs = op.apply(&x).unwrap().dot(&y);
            let rhs = x.dot(&op.adjoint(&y).unwrap());
            let r = (lhs - rhs).abs() / (x.norm() * y.norm());
            if kind == 3 {
                bicubic = bicubic.max(r);
            } else {
                worst = worst.max(r);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= TOL && secs < 5.0,
        format!(
            "max relative violation {worst:.2e} (tol {TOL:.0e}), {secs:.2} s (limit 5 s); \
             bicubic upsampling surrogate, not checked: {bicubic:.2e}"
        ),
    )
}

// ---------------------------------------------------------------- 2

fn dense_oracle() -> Verdict {
    const ENTRY_TOL: f64 = 1e-10;
    const NORM_TOL: f64 = 1e-6;
    let shape = (8, 8);
    let ops = [
        DegradationOp::identity(shape),
        DegradationOp::blur(gaussian_kernel(5, 1.2).unwrap(), shape).unwrap(),
        DegradationOp::blur_downsample(gaussian_kernel(3, 0.8).unwrap(), 2, shape).unwrap(),
    ];
    let (delta, eta) = (0.3, 0.7);
    let mut entry: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for op in &ops {
        let a = probe(shape, |x| op.apply(x).unwrap());
        let at = probe(op.output_shape(), |y| op.adjoint(y).unwrap());
        let abar = probe(shape, |x| apply_abar(op, delta, eta, x).unwrap());
        let ata = a.transpose() * &a;
        let n = ata.nrows();
        let abar_dense = DMatrix::identity(n, n) * (1.0 - delta * eta) - &ata * delta;
        entry = entry
            .max((&at - a.transpose()).amax())
            .max((&abar - abar_dense).amax());
        let top = SymmetricEigen::new(ata).eigenvalues.max();
        let est = operator_norm_sq(op, 1000, &mut Rng::new(2)).value;
        norm = norm.max((est - top).abs() / top);
    }
    verdict(
        entry <= ENTRY_TOL && norm <= NORM_TOL,
        format!(
            "max entry error {entry:.2e} (tol {ENTRY_TOL:.0e}), \
             norm relative error {norm:.2e} (tol {NORM_TOL:.0e})"
        ),
    )
}

// ---------------------------------------------------------------- 3

fn descent_diagnostics() -> Verdict {
    const ENERGY_TOL: f64 = 1e-10;
    const DESCENT_TOL: f64 = 1e-10;
    const GAP_TOL: f64 = 1e-12;
    let start = Instant::now();
    let (eta, lambda) = (1.0, 0.05);
    let kernel = gaussian_kernel(7, 1.6).unwrap();
    let mut worst_energy = f64::INFINITY;
    let mut worst_descent = f64::INFINITY;
    let mut worst_gap = f64::INFINITY;
    let mut runs = 0;
    for seed in 0..10u64 {
        let mut rng = Rng::new(1000 + seed);
        let clean = unit_scene(32, &mut rng);
        let tasks = [
            (DegradationOp::identity((32, 32)), 25.0),
            (DegradationOp::blur(kernel.clone(), (32, 32)).unwrap(), 2.0),
            (
                DegradationOp::blur_downsample(kernel.clone(), 2, (32, 32)).unwrap(),
                0.0,
            ),
        ];
        for (op, sigma) in &tasks {
            let y =
                add_gaussian_noise(&op.apply(&clean).unwrap(), sigma / 255.0, &mut rng).unwrap();
            let p = Problem::new(y, op.clone(), lambda, eta).unwrap();
            for d in [
                Denoiser::QuadraticProx { lambda },
                Denoiser::dct_for(8, eta, lambda),
                Denoiser::tv_for(eta, lambda, 50),
            ] {
                let cfg = SolverConfig {
                    max_iters: 200,
                    tol: 0.0,
                    ..SolverConfig::step_fraction(&p, 0.9)
                };
                let sol = hqs_solve(&p, &cfg, &d).unwrap();
                assert_eq!(sol.trace.len(), 200);
                for (i, r) in sol.trace.rows.iter().enumerate() {
                    assert!(!r.partial);
                    worst_energy = worst_energy.min(sol.trace.energy_drop(i));
                    worst_descent = worst_descent.min(r.c1_resid);
                    worst_gap = worst_gap.min(r.gap);
                }
                runs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_energy >= -ENERGY_TOL
            && worst_descent >= -DESCENT_TOL
            && worst_gap >= -GAP_TOL
            && secs < 60.0,
        format!(
            "{runs} runs x 200 iterations: min energy drop {worst_energy:.2e} (tol -{ENERGY_TOL:.0e}), \
             min descent residual {worst_descent:.2e} (tol -{DESCENT_TOL:.0e}), \
             min gap {worst_gap:.2e} (tol -{GAP_TOL:.0e}), {secs:.1} s (limit 60 s)"
        ),
    )
}

// ---------------------------------------------------------------- 4

fn joint_quadratic() -> Verdict {
    const MUTUAL_TOL: f64 = 1e-4;
    const ORACLE_TOL: f64 = 1e-5;
    let mut rng = Rng::new(4);
    let op = DegradationOp::blur(gaussian_kernel(5, 1.0).unwrap(), (16, 16)).unwrap();
    let y = add_gaussian_noise(
        &op.apply(&unit_scene(16, &mut rng)).unwrap(),
        0.01,
        &mut rng,
    )
    .unwrap();
    let (eta, lambda) = (0.5, 0.2);
    let p = Problem::new(y.clone(), op.clone(), lambda, eta).unwrap();
    let d = Denoiser::QuadraticProx { lambda };

    let a = probe((16, 16), |x| op.apply(x).unwrap());
    let reduced = eta * lambda / (eta + lambda);
    let lhs = a.transpose() * &a + DMatrix::identity(256, 256) * reduced;
    let oracle = lhs.lu().solve(&(a.transpose() * vec_of(&y))).unwrap();

    let long = |mode| SolverConfig {
        max_iters: 20_000,
        tol: 1e-13,
        mode,
        ..SolverConfig::step_fraction(&p, 0.9)
    };
    let hqs = hqs_solve(&p, &long(Mode::GradStep), &d).unwrap();
    let exact = hqs_solve(
        &p,
        &long(Mode::ExactCg {
            cg_tol: 1e-14,
            cg_maxit: 1000,
        }),
        &d,
    )
    .unwrap();
    // ADMM minimizes the reduced problem, whose prior weight is `reduced`.
    let pa = Problem::new(y, op, reduced, eta).unwrap();
    let admm = admm_solve(
        &pa,
        &long(Mode::Admm { rho: 1.0 }),
        &Denoiser::QuadraticProx { lambda: reduced },
    )
    .unwrap();
    let xs = [vec_of(&hqs.x), vec_of(&exact.x), vec_of(&admm.x)];
    let to_oracle = xs.iter().map(|x| rel_err(x, &oracle)).fold(0.0, f64::max);
    let mut mutual: f64 = 0.0;
    for i in 0..3 {
        for j in 0..i {
            mutual = mutual.max(rel_err(&xs[i], &xs[j]));
        }
    }
    verdict(
        to_oracle <= ORACLE_TOL && mutual <= MUTUAL_TOL,
        format!(
            "max error to oracle {to_oracle:.2e} (tol {ORACLE_TOL:.0e}), \
             max mutual error {mutual:.2e} (tol {MUTUAL_TOL:.0e})"
        ),
    )
}

// ---------------------------------------------------------------- 5

const H: f64 = 1e-4;

/// Largest relative error of the network's reverse pass against central
/// differences of `<c, net(x)>`, over parameters and input.
fn cnn_grad_error(spec: NetSpec, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let params: Vec<f64> = init_params(&spec, &mut rng)
        .into_iter()
        .map(|p| p + 0.05 * rng.normal())
        .collect();
    let x = random_image(8, 8, &mut rng);
    let c = random_image(8, 8, &mut rng);
    let loss = |p: &[f64], x: &Image| forward(&spec, p, x).unwrap().dot(&c);
    let (_, tape) = forward_taped(&spec, &params, &x).unwrap();
    let mut gp = vec![0.0; params.len()];
    let gx = backward(&spec, &params, &tape, &c, &mut gp).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += H;
        let up = loss(&p, &x);
        p[i] -= 2.0 * H;
        let down = loss(&p, &x);
        worst = worst.max(rel((up - down) / (2.0 * H), gp[i]));
    }
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += H;
        let up = loss(&params, &xp);
        xp.data_mut()[i] -= 2.0 * H;
        let down = loss(&params, &xp);
        worst = worst.max(rel((up - down) / (2.0 * H), gx.data()[i]));
    }
    worst
}

fn unrolled_grad_error(spec: NetSpec, stages: usize, seed: u64) -> f64 {
    let op = DegradationOp::blur(gaussian_kernel(3, 0.8).unwrap(), (8, 8)).unwrap();
    let mut rng = Rng::new(seed);
    let batch: Vec<(Image, Image)> = (0..2)
        .map(|_| {
            let clean = unit_scene(8, &mut rng);
            (op.apply(&clean).unwrap(), clean)
        })
        .collect();
    let net = UnrolledNet {
        stages,
        eta: 0.6,
        abar_delta: 0.8,
        denoiser: StageDenoiser::Learned {
            spec,
            input_scale: 1.0,
        },
    };
    let mut params = NetParams::from_solver(stages, 0.8, 0.6, init_params(&spec, &mut rng));
    params.delta1 += 0.05 * rng.normal();
    for w in &mut params.stage_weights {
        w.0 += 0.05 * rng.normal();
        w.1 += 0.05 * rng.normal();
    }
    grad_check(&net, &params, &batch, &op, H, seed).unwrap()
}

fn gradient_exactness() -> Verdict {
    const TOL: f64 = 1e-4;
    const LINEAR_TOL: f64 = 1e-7;
    let linear = NetSpec {
        activation: Activation::Identity,
        ..NetSpec::tiny()
    };
    // A one-stage linear network is linear in each single weight, so central
    // differences are exact up to rounding; deeper or ReLU configurations
    // carry truncation error and get the general tolerance.
    let lin = cnn_grad_error(linear, 11).max(unrolled_grad_error(linear, 1, 12));
    let general = cnn_grad_error(NetSpec::tiny(), 13)
        .max(cnn_grad_error(
            NetSpec {
                blocks: 2,
                convs_per_block: 2,
                ..NetSpec::tiny()
            },
            14,
        ))
        .max(unrolled_grad_error(linear, 2, 15))
        .max(unrolled_grad_error(NetSpec::tiny(), 2, 16));
    verdict(
        lin <= LINEAR_TOL && general <= TOL,
        format!(
            "linear {lin:.2e} (tol {LINEAR_TOL:.0e}), ReLU and multi-stage {general:.2e} (tol {TOL:.0e}), h = {H:.0e}"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn unrolling_equivalence() -> Verdict {
    const TOL: f64 = 1e-12;
    let mut rng = Rng::new(6);
    let ops = [
        DegradationOp::identity((8, 8)),
        DegradationOp::blur(gaussian_kernel(5, 1.2).unwrap(), (12, 10)).unwrap(),
        DegradationOp::blur_downsample(gaussian_kernel(5, 1.0).unwrap(), 2, (8, 8)).unwrap(),
    ];
    let eta = 0.7;
    let mut worst: f64 = 0.0;
    for op in &ops {
        let (h, w) = op.input_shape();
        let y = op.apply(&random_image(h, w, &mut rng)).unwrap();
        for (d, lambda) in [
            (Denoiser::Zero, 0.0),
            (Denoiser::QuadraticProx { lambda: 0.4 }, 0.4),
        ] {
            let p = Problem::new(y.clone(), op.clone(), lambda, eta).unwrap();
            for k in [1, 3, 5] {
                let cfg = SolverConfig {
                    max_iters: k,
                    tol: 0.0,
                    ..SolverConfig::step_fraction(&p, 0.9)
                };
                let sol = hqs_solve(&p, &cfg, &d).unwrap();
                let net = UnrolledNet {
                    stages: k,
                    eta,
                    abar_delta: cfg.delta,
                    denoiser: StageDenoiser::Fixed(d.clone()),
                };
                let params = NetParams::from_solver(k, cfg.delta, eta, vec![]);
                let (out, tape) = unrolled_forward(&net, &params, &y, op).unwrap();
                for (a, b) in tape
                    .x(k)
                    .data()
                    .iter()
                    .zip(sol.x.data())
                    .chain(out.data().iter().zip(sol.v.data()))
                {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    verdict(
        worst <= TOL,
        format!("max deviation {worst:.2e} (tol {TOL:.0e}), K in 1, 3, 5"),
    )
}

// ---------------------------------------------------------------- 7

fn denoise_pairs(n: usize, sigma: f64, seed: u64) -> Vec<(Image, Image)> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|_| {
            let clean = unit_scene(32, &mut rng);
            let noisy = add_gaussian_noise(&clean, sigma, &mut rng).unwrap();
            (noisy, clean)
        })
        .collect()
}

fn desk_training() -> Verdict {
    const MIN_GAIN_DB: f64 = 2.0;
    const MAX_RATIO: f64 = 0.5;
    const LIMIT: Duration = Duration::from_secs(30 * 60);
    let sigma = 25.0 / 255.0;
    let data = denoise_pairs(200, sigma, 4);
    let validation = denoise_pairs(50, sigma, 2);
    let op = DegradationOp::identity((32, 32));
    let cfg = TrainConfig {
        lr0: 1e-3,
        batch_size: 8,
        steps: 2000,
        seed: 4,
        ..TrainConfig::default()
    };
    let denoiser = StageDenoiser::Learned {
        spec: NetSpec::tiny(),
        input_scale: 1.0,
    };
    let (net, start) = initialize(3, 0.5, denoiser, &op, 3).unwrap();
    let initial = mse_loss(&net, &start.params, &validation, &op).unwrap();
    let run = || {
        let t = Instant::now();
        let out = train(&net, start.clone(), &data, &op, &cfg, &mut |_, _| Ok(())).unwrap();
        (out, t.elapsed())
    };
    let (first, elapsed) = run();
    let (second, _) = run();
    let deterministic = first.state.params.to_flat() == second.state.params.to_flat()
        && first.curve == second.curve
        && first.diverged_at.is_none();
    let noisy = validation
        .iter()
        .map(|(y, x)| y.sub(x).norm_sq())
        .sum::<f64>()
        / (validation.len() * 32 * 32) as f64;
    let fin = mse_loss(&net, &first.state.params, &validation, &op).unwrap();
    let gain = 10.0 * (noisy / fin).log10();
    let ratio = fin / initial;
    verdict(
        deterministic && ratio <= MAX_RATIO && gain >= MIN_GAIN_DB && elapsed < LIMIT,
        format!(
            "validation MSE {initial:.3e} -> {fin:.3e}, ratio {ratio:.3} (max {MAX_RATIO}), \
             gain over noisy input {gain:.2} dB (min {MIN_GAIN_DB}), repeat run identical: {deterministic}, \
             {:.0} s (limit 1800 s)",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- CLI

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Runs the binary; returns stdout, panicking on a nonzero exit.
fn cli(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_unroll-restore"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Degrades the fixture scenes with `config` and restores them; returns the
/// per-image gains in dB over the degraded input.
fn restore_fixtures(config: &str, dir: &Path) -> Vec<f64> {
    let cfg = s(&repo().join("configs").join(config));
    let truth = s(&repo().join("fixtures/images"));
    let (deg, res) = (dir.join("deg"), dir.join("res"));
    cli(&[
        "degrade",
        "--config",
        &cfg,
        "--input",
        &truth,
        "--output",
        &s(&deg),
    ]);
    cli(&[
        "restore",
        "--config",
        &cfg,
        "--input",
        &s(&deg),
        "--output",
        &s(&res),
        "--truth",
        &truth,
    ]);
    let report: EvalReport =
        serde_json::from_str(&fs::read_to_string(res.join("report.json")).unwrap()).unwrap();
    report
        .rows
        .iter()
        .map(|r| r.psnr - r.input_psnr.unwrap())
        .collect()
}

// ---------------------------------------------------------------- 8

/// Mean gains of the first verified build.
const DEBLUR_GOLDEN_DB: f64 = 2.849507;
const DENOISE_GOLDEN_DB: f64 = 3.682137;
/// Slack on the pinned means for last-digit differences in libm.
const GOLDEN_TOL_DB: f64 = 1e-3;

fn fixture_restoration() -> Verdict {
    let t = TempDir::new().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (config, min, golden) in [
        ("deblur_gaussian.json", 2.0, DEBLUR_GOLDEN_DB),
        ("denoise_dct.json", 1.5, DENOISE_GOLDEN_DB),
    ] {
        let gains = restore_fixtures(config, &t.path().join(config));
        let worst = gains.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = gains.iter().sum::<f64>() / gains.len() as f64;
        pass &= worst >= min && (mean - golden).abs() <= GOLDEN_TOL_DB;
        parts.push(format!(
            "{config}: min gain {worst:.3} dB (min {min}), mean {mean:.6} dB (golden {golden:.6} +- {GOLDEN_TOL_DB:.0e})"
        ));
    }
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------- 9

/// Every file under `dir`, relative path to contents.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

/// One pass over every command; returns the output tree and the stdout of
/// the commands that only print.
fn cli_pass(root: &Path) -> (BTreeMap<PathBuf, Vec<u8>>, String) {
    let out = root.join("out");
    let truth = s(&repo().join("fixtures/images"));
    let configs = repo().join("configs");
    let train_cfg = root.join("train.json");
    let text = fs::read_to_string(configs.join("train_tiny.json")).unwrap();
    fs::write(&train_cfg, text.replace("\"steps\": 2000", "\"steps\": 20")).unwrap();

    let deg = s(&out.join("deg"));
    let res = s(&out.join("res"));
    let cfg = s(&configs.join("deblur_motion_tv.json"));
    cli(&[
        "degrade", "--config", &cfg, "--input", &truth, "--output", &deg,
    ]);
    cli(&[
        "restore", "--config", &cfg, "--input", &deg, "--output", &res, "--truth", &truth,
    ]);
    let sr = s(&configs.join("sr_x2.json"));
    let (sr_deg, sr_res) = (s(&out.join("sr_deg")), s(&out.join("sr_res")));
    cli(&[
        "degrade", "--config", &sr, "--input", &truth, "--output", &sr_deg,
    ]);
    cli(&[
        "restore", "--config", &sr, "--input", &sr_deg, "--output", &sr_res, "--truth", &truth,
    ]);
    cli(&[
        "train",
        "--config",
        &s(&train_cfg),
        "--input",
        &truth,
        "--output",
        &s(&out.join("train")),
    ]);
    // Relative to the config file, so both passes use the same config text.
    let unrolled_cfg = root.join("unrolled.json");
    fs::write(
        &unrolled_cfg,
        r#"{"denoiser":{"kind":"unrolled","weights":"out/train/checkpoint.unr"}}"#,
    )
    .unwrap();
    let dn = s(&configs.join("denoise_dct.json"));
    let dn_deg = s(&out.join("dn_deg"));
    cli(&[
        "degrade", "--config", &dn, "--input", &truth, "--output", &dn_deg,
    ]);
    cli(&[
        "restore",
        "--config",
        &s(&unrolled_cfg),
        "--input",
        &dn_deg,
        "--output",
        &s(&out.join("dn_res")),
        "--truth",
        &truth,
    ]);
    cli(&[
        "eval",
        "--input",
        &res,
        "--truth",
        &truth,
        "--output",
        &s(&out.join("eval")),
    ]);
    let diag = cli(&[
        "diagnose",
        "--input",
        &s(&out.join("res/scene_a.trace.csv")),
    ]);
    (snapshot(&out), diag)
}

fn cli_determinism() -> Verdict {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (first, diag_a) = cli_pass(a.path());
    let (second, diag_b) = cli_pass(b.path());
    let differing: Vec<String> = first
        .keys()
        .chain(second.keys())
        .filter(|k| first.get(*k) != second.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let pass = differing.is_empty() && diag_a == diag_b && !first.is_empty();
    verdict(
        pass,
        format!(
            "{} output files compared across two runs, {} differ{}; diagnose output identical: {}",
            first.len(),
            differing.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(" ({})", differing.join(", "))
            },
            diag_a == diag_b
        ),
    )
}
