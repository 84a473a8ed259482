use rayon::prelude::*;
use unroll_core::imaging::{load_image, psnr, ssim};

use crate::config::Loaded;
use crate::error::{CliError, Result};
use crate::list_images;
use crate::report::{EvalReport, ReportRow};

/// PSNR/SSIM of every restored image against the same-named truth image.
/// Writes `eval.json` and `eval.txt` to --output (default: the restored dir).
pub fn eval(l: &Loaded) -> Result<u8> {
    let restored = l.input()?;
    let truth = l
        .config
        .io
        .truth
        .as_deref()
        .ok_or_else(|| CliError::Config("no truth directory (use --truth)".into()))?;
    let names = list_images(restored)?;
    let truth_names = list_images(truth)?;
    if names != truth_names {
        let only = |a: &[String], b: &[String]| -> Vec<String> {
            a.iter().filter(|n| !b.contains(n)).cloned().collect()
        };
        return Err(CliError::Config(format!(
            "filename mismatch: only restored {:?}, only truth {:?}",
            only(&names, &truth_names),
            only(&truth_names, &names)
        )));
    }
    if names.is_empty() {
        return Err(CliError::Config(format!(
            "no images in {}",
            restored.display()
        )));
    }
    let rows = names
        .par_iter()
        .map(|name| {
            let a = load_image(restored.join(name))?;
            let b = load_image(truth.join(name))?;
            Ok(ReportRow {
                name: name.clone(),
                psnr: psnr(&a, &b)?,
                ssim: ssim(&a, &b)?,
                input_psnr: None,
                runtime_s: None,
                iterations: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport::new(rows)?;
    let out = l.config.io.output.as_deref().unwrap_or(restored);
    crate::ensure_dir(out)?;
    report.write(out, "eval")?;
    print!("{}", report.to_table());
    Ok(0)
}
