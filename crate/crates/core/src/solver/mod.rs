//! Half-quadratic splitting with a single gradient step per x-update, its
//! exact-solve variant, and an ADMM baseline, all instrumented with the
//! energy `xi(x, v) = ½‖y - Ax‖² + (eta/2)‖x - v‖² + lambda J(v)`.

mod cg;
mod trace;

pub use cg::{conjugate_gradient, CgResult};
pub use trace::{
    diagnose, Check, CheckStatus, Diagnosis, SolverTrace, TraceRow, ENERGY_TOL, GAP_TOL,
    TRACE_HEADER, X_DESCENT_TOL,
};

use crate::denoisers::{descent_gap, Denoiser};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::operators::{operator_norm_sq, DegradationOp};
use crate::rng::Rng;

/// Power iterations used when no closed-form `‖AᵀA‖` exists.
pub const SOLVER_NORM_ITERS: usize = 1000;
const NORM_SEED: u64 = 0x6e6f726d;

#[derive(Clone, Debug)]
pub struct Problem {
    pub y: Image,
    pub op: DegradationOp,
    /// Prior weight.
    pub lambda: f64,
    /// Splitting weight coupling `x` and `v`.
    pub eta: f64,
}

impl Problem {
    pub fn new(y: Image, op: DegradationOp, lambda: f64, eta: f64) -> Result<Self> {
        let p = Problem { y, op, lambda, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.y.check_shape(self.op.output_shape())?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !self.y.is_finite() {
            return Err(Error::InvalidImage(
                "observation has non-finite pixels".into(),
            ));
        }
        Ok(())
    }

    /// `‖AᵀA‖`, closed form where available, power iteration otherwise.
    pub fn normal_norm(&self, iters: usize) -> f64 {
        self.op
            .normal_norm_exact()
            .unwrap_or_else(|| operator_norm_sq(&self.op, iters, &mut Rng::new(NORM_SEED)).value)
    }
}

/// Largest admissible gradient step, `2 / (‖AᵀA‖ + eta)`.
pub fn max_step(p: &Problem) -> f64 {
    2.0 / (p.normal_norm(SOLVER_NORM_ITERS) + p.eta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// One gradient step on x per iteration.
    GradStep,
    /// Exact x-subproblem by conjugate gradient.
    ExactCg { cg_tol: f64, cg_maxit: usize },
    /// ADMM with scaled multiplier step `rho`.
    Admm { rho: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub delta: f64,
    pub max_iters: usize,
    /// Stop once `‖x_{t+1} - x_t‖ / ‖x_t‖ < tol`.
    pub tol: f64,
    pub mode: Mode,
    pub norm_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            delta: 0.5,
            max_iters: 500,
            tol: 1e-8,
            mode: Mode::GradStep,
            norm_iters: SOLVER_NORM_ITERS,
        }
    }
}

impl SolverConfig {
    /// Gradient-step configuration with `delta = fraction * max_step(p)`.
    pub fn step_fraction(p: &Problem, fraction: f64) -> Self {
        SolverConfig {
            delta: fraction * max_step(p),
            ..SolverConfig::default()
        }
    }
}

/// Energy value, flagged when the prior term is unavailable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub value: f64,
    pub partial: bool,
}

/// `xi(x, v)`; for denoisers without an explicit prior only the two
/// quadratic terms.
pub fn energy(p: &Problem, x: &Image, v: &Image, d: &Denoiser) -> Result<Energy> {
    let r = p.y.sub(&p.op.apply(x)?);
    let quad = 0.5 * r.norm_sq() + 0.5 * p.eta * x.sub(v).norm_sq();
    if p.lambda == 0.0 && !matches!(d, Denoiser::Zero) {
        return Ok(Energy {
            value: quad,
            partial: !d.has_prior(),
        });
    }
    Ok(match d.prior(v) {
        Some(j) => Energy {
            value: quad + p.lambda * j,
            partial: false,
        },
        None => Energy {
            value: quad,
            partial: true,
        },
    })
}

/// Solves `(AᵀA + eta I) x = Aᵀy + eta v`, the exact x-subproblem, starting
/// from `x0`.
pub fn cg_solve_x(
    p: &Problem,
    v: &Image,
    x0: &Image,
    cg_tol: f64,
    cg_maxit: usize,
) -> Result<CgResult> {
    let mut b = p.op.apply_transpose(&p.y)?;
    b.axpy(p.eta, v);
    conjugate_gradient(
        |z| {
            let mut out = p.op.normal_exact(z)?;
            out.axpy(p.eta, z);
            Ok(out)
        },
        &b,
        x0,
        cg_tol,
        cg_maxit,
    )
}

/// Outcome of a solver run.
#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Image,
    pub v: Image,
    pub trace: SolverTrace,
    pub iterations: usize,
    /// Whether the relative-change tolerance was met before `max_iters`.
    pub converged: bool,
    /// Inner CG solves that hit their iteration cap.
    pub cg_warnings: usize,
}

fn check_weight(p: &Problem, d: &Denoiser) -> Result<()> {
    d.validate()?;
    if let Some(implied) = d.implied_lambda(p.eta) {
        if (implied - p.lambda).abs() > 1e-12 * implied.abs().max(p.lambda.abs()).max(1.0) {
            return Err(Error::PriorWeightMismatch {
                denoiser: implied,
                problem: p.lambda,
            });
        }
    }
    Ok(())
}

fn finite_or(img: &Image, iteration: usize) -> Result<()> {
    if img.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration })
    }
}

fn relative_change(dx2: f64, x: &Image) -> f64 {
    let n = x.norm();
    if n == 0.0 {
        dx2.sqrt()
    } else {
        dx2.sqrt() / n
    }
}

/// Energy decrease of the x-step `x -> x + dx` at fixed `v`, written in
/// difference form so rounding scales with the step.
fn x_step_drop(p: &Problem, x: &Image, dx: &Image, v: &Image, r: &Image) -> Result<(f64, Image)> {
    let adx = p.op.apply(dx)?;
    let r_new = r.sub(&adx);
    let d = x.sub(v);
    let d_new = d.add(dx);
    let drop = 0.5 * adx.dot(&r.add(&r_new)) - 0.5 * p.eta * dx.dot(&d.add(&d_new));
    Ok((drop, r_new))
}

/// Splitting iteration: `x <- x - delta * grad_x xi(x, v)` (or the exact x-minimizer in
/// CG mode) followed by `v <- f(x)`, from `x = Aᵀy`, `v = 0`.
///
/// An inexact denoiser output that would raise the v-subproblem objective is
/// rejected and the previous `v` kept; such iterations are listed in the
/// trace.
pub fn hqs_solve(p: &Problem, cfg: &SolverConfig, d: &Denoiser) -> Result<Solution> {
    p.validate()?;
    check_weight(p, d)?;
    let norm = p.normal_norm(cfg.norm_iters);
    let c1 = match cfg.mode {
        Mode::GradStep => {
            let max = 2.0 / (norm + p.eta);
            if !(cfg.delta > 0.0 && cfg.delta < max) {
                return Err(Error::StepSizeViolation {
                    delta: cfg.delta,
                    max_step: max,
                });
            }
            1.0 / cfg.delta - (norm + p.eta) / 2.0
        }
        // The exact minimizer of a strongly convex quadratic with Hessian
        // AᵀA + eta I descends by at least (eta/2)‖dx‖².
        Mode::ExactCg { .. } => p.eta / 2.0,
        Mode::Admm { .. } => {
            return Err(Error::InvalidArgument(
                "hqs_solve does not run ADMM; use admm_solve".into(),
            ))
        }
    };
    let aty = p.op.apply_transpose(&p.y)?;
    let mut x = aty.clone();
    let mut v = aty.scale(0.0);
    let mut r = p.y.sub(&p.op.apply(&x)?);
    let mut trace = SolverTrace {
        c1,
        ..SolverTrace::default()
    };
    let mut converged = false;
    let mut cg_warnings = 0;
    let mut iterations = 0;
    for t in 0..cfg.max_iters {
        let e = energy(p, &x, &v, d)?;
        let x_new = match cfg.mode {
            Mode::GradStep => {
                let mut g = p.op.apply_transpose(&r)?.scale(-1.0);
                g.axpy(p.eta, &x.sub(&v));
                let mut xn = x.clone();
                xn.axpy(-cfg.delta, &g);
                xn
            }
            Mode::ExactCg { cg_tol, cg_maxit } => {
                let res = cg_solve_x(p, &v, &x, cg_tol, cg_maxit)?;
                if !res.converged {
                    cg_warnings += 1;
                }
                res.x
            }
            Mode::Admm { .. } => unreachable!(),
        };
        finite_or(&x_new, t + 1)?;
        let dx = x_new.sub(&x);
        let dx2 = dx.norm_sq();
        let (xdrop, r_new) = x_step_drop(p, &x, &dx, &v, &r)?;
        let candidate = d.denoise(&x_new, p.eta)?;
        finite_or(&candidate, t + 1)?;
        let (mut gap, partial) = descent_gap(d, &x_new, &v, &candidate, p.eta, p.lambda);
        if !d.is_exact_prox() && d.has_prior() && gap < 0.0 {
            trace.rejected_v_steps.push(t);
            gap = 0.0;
        } else {
            v = candidate;
        }
        trace.rows.push(TraceRow {
            t,
            xi: e.value,
            dx2,
            gap,
            c1_resid: xdrop - c1 * dx2,
            partial: e.partial || partial,
        });
        let rel = relative_change(dx2, &x);
        x = x_new;
        r = r_new;
        iterations = t + 1;
        if rel < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        x,
        v,
        trace,
        iterations,
        converged,
        cg_warnings,
    })
}

/// ADMM baseline: x by CG on `(AᵀA + eta I) x = Aᵀy + eta (v - u)`, then
/// `v = f(x + u)` and `u <- u + rho (x - v)`.
///
/// Trace rows record the energy of `(x, v)`, the step size and the
/// v-subproblem gap at `x + u`; the x-step is not a descent step on `xi`, so
/// `c1_resid` is reported as zero.
pub fn admm_solve(p: &Problem, cfg: &SolverConfig, d: &Denoiser) -> Result<Solution> {
    p.validate()?;
    check_weight(p, d)?;
    let rho = match cfg.mode {
        Mode::Admm { rho } if rho > 0.0 && rho.is_finite() => rho,
        Mode::Admm { rho } => {
            return Err(Error::InvalidArgument(format!(
                "ADMM rho must be positive, got {rho}"
            )))
        }
        _ => return Err(Error::InvalidArgument("admm_solve needs ADMM mode".into())),
    };
    let (cg_tol, cg_maxit) = (1e-12, 1000);
    let aty = p.op.apply_transpose(&p.y)?;
    let mut x = aty.clone();
    let mut v = aty.scale(0.0);
    let mut u = aty.scale(0.0);
    let mut trace = SolverTrace::default();
    let mut converged = false;
    let mut cg_warnings = 0;
    let mut iterations = 0;
    for t in 0..cfg.max_iters {
        let e = energy(p, &x, &v, d)?;
        let res = cg_solve_x(p, &v.sub(&u), &x, cg_tol, cg_maxit)?;
        if !res.converged {
            cg_warnings += 1;
        }
        let x_new = res.x;
        finite_or(&x_new, t + 1)?;
        let dx2 = x_new.sub(&x).norm_sq();
        let z = x_new.add(&u);
        let v_new = d.denoise(&z, p.eta)?;
        finite_or(&v_new, t + 1)?;
        let (gap, partial) = descent_gap(d, &z, &v, &v_new, p.eta, p.lambda);
        u.axpy(rho, &x_new.sub(&v_new));
        trace.rows.push(TraceRow {
            t,
            xi: e.value,
            dx2,
            gap,
            c1_resid: 0.0,
            partial: e.partial || partial,
        });
        let rel = relative_change(dx2, &x);
        x = x_new;
        v = v_new;
        iterations = t + 1;
        if rel < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        x,
        v,
        trace,
        iterations,
        converged,
        cg_warnings,
    })
}

/// Dispatches on the configured mode.
pub fn solve(p: &Problem, cfg: &SolverConfig, d: &Denoiser) -> Result<Solution> {
    match cfg.mode {
        Mode::Admm { .. } => admm_solve(p, cfg, d),
        _ => hqs_solve(p, cfg, d),
    }
}
