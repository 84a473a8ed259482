use rayon::prelude::*;
use unroll_core::imaging::{add_gaussian_noise, load_image, save_image};
use unroll_core::Rng;

use crate::config::{build_op, Loaded};
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, ManifestImage, ManifestOperator, MANIFEST_FILE, MANIFEST_FORMAT};
use crate::{ensure_dir, list_images};

/// Writes `A x + n` for every input image plus a manifest. Image `i` (in name
/// order) draws its noise from the run seed forked by `i`.
pub fn degrade(l: &Loaded) -> Result<u8> {
    let input = l.input()?;
    let output = l.output()?;
    let kind = l.operator_kind()?.ok_or(CliError::OperatorUnspecified)?;
    let sigma = l.config.noise_sigma;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CliError::Config(format!(
            "noise_sigma must be >= 0, got {sigma}"
        )));
    }
    let names = list_images(input)?;
    if names.is_empty() {
        return Err(CliError::Config(format!(
            "no images in {}",
            input.display()
        )));
    }
    if input.canonicalize().ok() == output.canonicalize().ok() {
        return Err(CliError::Config(
            "output directory must differ from input".into(),
        ));
    }
    ensure_dir(output)?;

    let rng = Rng::new(l.config.seed);
    let images = names
        .par_iter()
        .enumerate()
        .map(|(i, name)| {
            let x = load_image(input.join(name))?;
            let op = build_op(&kind, x.shape())?;
            let y = add_gaussian_noise(&op.apply(&x)?, sigma, &mut rng.fork(i as u64))?;
            save_image(&y, output.join(name))?;
            Ok(ManifestImage {
                name: name.clone(),
                shape: [x.height(), x.width()],
                observed_shape: [y.height(), y.width()],
                noise_stream: i as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        task: l.config.task,
        operator: ManifestOperator::from_kind(&kind),
        noise_sigma: sigma,
        seed: l.config.seed,
        images,
    };
    manifest.save(&output.join(MANIFEST_FILE))?;
    l.write_resolved(output)?;
    println!(
        "degraded {} image(s) into {}",
        names.len(),
        output.display()
    );
    Ok(0)
}
