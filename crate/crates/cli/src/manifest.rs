//! `manifest.json`, written by `degrade` next to the degraded images. It
//! carries the exact operator (kernel taps inline), noise level and seed.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unroll_core::operators::{Kernel, OpKind};

use crate::config::Task;
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "unroll-manifest-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTaps {
    pub size: usize,
    pub taps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestOperator {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelTaps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestImage {
    pub name: String,
    /// (height, width) of the clean image.
    pub shape: [usize; 2],
    /// (height, width) of the degraded image.
    pub observed_shape: [usize; 2],
    /// Noise for this image is drawn from the run seed forked by this index.
    pub noise_stream: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub operator: ManifestOperator,
    pub noise_sigma: f64,
    pub seed: u64,
    pub images: Vec<ManifestImage>,
}

fn taps(k: &Kernel) -> KernelTaps {
    KernelTaps {
        size: k.size(),
        taps: k.taps().to_vec(),
    }
}

impl ManifestOperator {
    pub fn from_kind(kind: &OpKind) -> Self {
        let (name, kernel, scale) = match kind {
            OpKind::Identity => ("identity", None, None),
            OpKind::Blur(k) => ("blur", Some(taps(k)), None),
            OpKind::BlurDownsample(k, s) => ("blur_downsample", Some(taps(k)), Some(*s)),
            OpKind::BicubicResize(s) => ("bicubic", None, Some(*s)),
        };
        ManifestOperator {
            kind: name.into(),
            kernel,
            scale,
        }
    }

    /// Rebuilds the operator; taps are used verbatim, not renormalized.
    pub fn to_kind(&self) -> Result<OpKind> {
        let bad = |d: &str| CliError::malformed("manifest operator", d);
        let kernel = || -> Result<Kernel> {
            let k = self.kernel.as_ref().ok_or_else(|| bad("kernel missing"))?;
            Kernel::new(k.size, k.taps.clone()).map_err(|e| bad(&e.to_string()))
        };
        let scale = || self.scale.ok_or_else(|| bad("scale missing"));
        match self.kind.as_str() {
            "identity" => Ok(OpKind::Identity),
            "blur" => Ok(OpKind::Blur(kernel()?)),
            "blur_downsample" => Ok(OpKind::BlurDownsample(kernel()?, scale()?)),
            "bicubic" => Ok(OpKind::BicubicResize(scale()?)),
            other => Err(bad(&format!("unknown kind {other:?}"))),
        }
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::malformed("manifest", e))?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::malformed(
                "manifest",
                format!("unknown format {:?}", m.format),
            ));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| CliError::malformed("manifest", e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use unroll_core::operators::gaussian_kernel;

    #[test]
    fn operator_round_trips_bit_exactly() {
        let k = gaussian_kernel(7, 1.6).unwrap();
        for kind in [
            OpKind::Identity,
            OpKind::Blur(k.clone()),
            OpKind::BlurDownsample(k, 2),
            OpKind::BicubicResize(3),
        ] {
            let m = ManifestOperator::from_kind(&kind);
            let text = serde_json::to_string(&m).unwrap();
            let back: ManifestOperator = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_kind().unwrap(), kind);
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"kind":"identity","extra":1}"#;
        assert!(serde_json::from_str::<ManifestOperator>(text).is_err());
    }
}
