//! JSON run configuration. Every section is optional and falls back to the
//! defaults below; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unroll_core::denoisers::cnn::NetSpec;
use unroll_core::operators::{gaussian_kernel, load_kernel, DegradationOp, OpKind};
use unroll_core::solver::Mode;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Denoise,
    Deblur,
    Sr,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub seed: u64,
    pub operator: Option<OperatorConfig>,
    /// Noise standard deviation on the 0..255 scale.
    pub noise_sigma: f64,
    pub solver: SolverSection,
    pub denoiser: DenoiserSection,
    pub training: TrainingSection,
    /// Paths are left out of the resolved config so that outputs do not
    /// depend on where a run was started.
    #[serde(skip_serializing)]
    pub io: IoSection,
    /// Record wall-clock time per image in reports (off keeps reports
    /// byte-reproducible).
    pub report_runtime: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Identity,
    Blur,
    BlurDownsample,
    Bicubic,
}

/// Blur kernels come from `kernel_path` (relative to the config file) or are
/// Gaussian with `kernel_size` and `kernel_sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// One gradient step on x per iteration.
    Hqs,
    /// Exact x-update by conjugate gradient.
    HqsCg,
    Admm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub mode: SolverMode,
    /// Explicit step; when absent `step_fraction * max_step` is used.
    pub delta: Option<f64>,
    pub step_fraction: f64,
    pub eta: f64,
    pub lambda: f64,
    pub iters: usize,
    pub tol: f64,
    pub cg_tol: f64,
    pub cg_maxit: usize,
    pub rho: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            mode: SolverMode::Hqs,
            delta: None,
            step_fraction: 0.9,
            eta: 1.0,
            lambda: 0.0,
            iters: 200,
            tol: 1e-8,
            cg_tol: 1e-10,
            cg_maxit: 500,
            rho: 1.0,
        }
    }
}

impl SolverSection {
    pub fn mode(&self) -> Mode {
        match self.mode {
            SolverMode::Hqs => Mode::GradStep,
            SolverMode::HqsCg => Mode::ExactCg {
                cg_tol: self.cg_tol,
                cg_maxit: self.cg_maxit,
            },
            SolverMode::Admm => Mode::Admm { rho: self.rho },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    Zero,
    Quadratic,
    Dct,
    Tv,
    /// A weights file, plugged into the solver.
    Cnn,
    /// A trained unrolled-network checkpoint; replaces the solver.
    Unrolled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserSection {
    pub kind: DenoiserKind,
    pub patch: usize,
    pub tv_iters: usize,
    /// Weights file (`cnn`) or checkpoint (`unrolled`), relative to the config.
    pub weights: Option<String>,
    /// Intensity scale the network was trained at (255 for [0, 1] training).
    pub input_scale: f64,
}

impl Default for DenoiserSection {
    fn default() -> Self {
        DenoiserSection {
            kind: DenoiserKind::Dct,
            patch: 8,
            tv_iters: 100,
            weights: None,
            input_scale: 255.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetSize {
    Tiny,
    Desk,
    Full,
}

impl NetSize {
    pub fn spec(self) -> NetSpec {
        match self {
            NetSize::Tiny => NetSpec::tiny(),
            NetSize::Desk => NetSpec::default(),
            NetSize::Full => NetSpec::full_scale(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub stages: usize,
    pub net: NetSize,
    pub patch_size: usize,
    pub stride: usize,
    /// Add the eight flips and rotations of every patch.
    pub augment: bool,
    /// Keep a seeded random subset of this many patches.
    pub max_pairs: Option<usize>,
    /// Overrides the top-level `noise_sigma` for training pairs.
    pub noise_sigma: Option<f64>,
    pub eta: f64,
    pub lr0: f64,
    pub halve_every: u64,
    pub batch_size: usize,
    pub steps: u64,
    /// Seed for the denoiser initialization; defaults to the run seed.
    pub init_seed: Option<u64>,
    pub checkpoint_every: u64,
    /// Continue from an existing checkpoint in the output directory.
    pub resume: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            stages: 5,
            net: NetSize::Tiny,
            patch_size: 32,
            stride: 32,
            augment: false,
            max_pairs: None,
            noise_sigma: None,
            eta: 0.5,
            lr0: 1e-4,
            halve_every: 2000,
            batch_size: 16,
            steps: 2000,
            init_seed: None,
            checkpoint_every: 100,
            resume: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

/// A parsed config together with the directory relative paths resolve against.
#[derive(Clone, Debug, Default)]
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn from_file(path: &Path) -> Result<Loaded> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut loaded = Loaded { config, base };
        let io = &mut loaded.config.io;
        for p in [&mut io.input, &mut io.output, &mut io.truth]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = loaded.base.join(&*p);
            }
        }
        Ok(loaded)
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        self.base.join(p)
    }

    pub fn input(&self) -> Result<&Path> {
        self.config
            .io
            .input
            .as_deref()
            .ok_or_else(|| CliError::Config("no input directory (use --input)".into()))
    }

    pub fn output(&self) -> Result<&Path> {
        self.config
            .io
            .output
            .as_deref()
            .ok_or_else(|| CliError::Config("no output directory (use --output)".into()))
    }

    /// Operator from the config section, or identity for a denoising task.
    pub fn operator_kind(&self) -> Result<Option<OpKind>> {
        match (&self.config.operator, self.config.task) {
            (Some(op), _) => op.build(self).map(Some),
            (None, Some(Task::Denoise)) => Ok(Some(OpKind::Identity)),
            (None, _) => Ok(None),
        }
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        let path = dir.join("resolved_config.json");
        let mut text = serde_json::to_string_pretty(&self.config)
            .map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(path, e))
    }
}

impl OperatorConfig {
    fn kernel(&self, loaded: &Loaded) -> Result<unroll_core::operators::Kernel> {
        match (&self.kernel_path, self.kernel_size, self.kernel_sigma) {
            (Some(p), None, None) => Ok(load_kernel(loaded.resolve(p))?),
            (None, Some(size), Some(sigma)) => Ok(gaussian_kernel(size, sigma)?),
            _ => Err(CliError::Config(
                "blur operators need either kernel_path or kernel_size with kernel_sigma".into(),
            )),
        }
    }

    fn scale(&self) -> Result<usize> {
        self.scale
            .ok_or_else(|| CliError::Config("operator needs a scale factor".into()))
    }

    pub fn build(&self, loaded: &Loaded) -> Result<OpKind> {
        let no_kernel =
            self.kernel_path.is_none() && self.kernel_size.is_none() && self.kernel_sigma.is_none();
        let kind = match self.kind {
            OperatorKind::Identity if no_kernel && self.scale.is_none() => OpKind::Identity,
            OperatorKind::Blur if self.scale.is_none() => OpKind::Blur(self.kernel(loaded)?),
            OperatorKind::BlurDownsample => {
                OpKind::BlurDownsample(self.kernel(loaded)?, self.scale()?)
            }
            OperatorKind::Bicubic if no_kernel => OpKind::BicubicResize(self.scale()?),
            _ => {
                let extra = match self.kind {
                    OperatorKind::Identity | OperatorKind::Bicubic if !no_kernel => "kernel",
                    _ => "scale",
                };
                return Err(CliError::Config(format!(
                    "operator {:?} takes no {extra}",
                    self.kind
                )));
            }
        };
        Ok(kind)
    }
}

/// Full-resolution shape for an observation of `observed` pixels.
pub fn input_shape(kind: &OpKind, observed: (usize, usize)) -> (usize, usize) {
    match kind {
        OpKind::Identity | OpKind::Blur(_) => observed,
        OpKind::BlurDownsample(_, s) | OpKind::BicubicResize(s) => (observed.0 * s, observed.1 * s),
    }
}

pub fn build_op(kind: &OpKind, shape: (usize, usize)) -> Result<DegradationOp> {
    Ok(DegradationOp::new(kind.clone(), shape)?)
}
