use std::fs;

use unroll_core::solver::{diagnose as run_checks, SolverTrace};

use crate::config::Loaded;
use crate::error::{CliError, Result};

/// Prints one PASS/FAIL/SKIP line per convergence check of the trace given
/// by --input; exit 0 iff nothing failed.
pub fn diagnose(l: &Loaded) -> Result<u8> {
    let path = l.input()?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let trace = SolverTrace::from_csv(&text)?;
    let report = run_checks(&trace);
    for c in &report.checks {
        println!("{:<4}  {}: {}", c.status.to_string(), c.name, c.detail);
    }
    Ok(if report.all_passed() { 0 } else { 1 })
}
