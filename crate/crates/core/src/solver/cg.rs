use crate::error::Result;
use crate::imaging::Image;

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgResult {
    pub x: Image,
    pub iterations: usize,
    /// Final `‖b - Mx‖ / ‖b‖`.
    pub relative_residual: f64,
    /// False when `maxit` ran out before reaching the tolerance; `x` is then
    /// the best iterate found.
    pub converged: bool,
}

/// Solves `M x = b` for a symmetric positive definite `M` given as a closure.
pub fn conjugate_gradient(
    apply: impl Fn(&Image) -> Result<Image>,
    b: &Image,
    x0: &Image,
    tol: f64,
    maxit: usize,
) -> Result<CgResult> {
    let bn = b.norm();
    if bn == 0.0 {
        return Ok(CgResult {
            x: b.scale(0.0),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut x = x0.clone();
    let mut r = b.sub(&apply(&x)?);
    let mut rr = r.norm_sq();
    let mut best = (rr.sqrt() / bn, x.clone());
    if best.0 <= tol {
        return Ok(CgResult {
            x,
            iterations: 0,
            relative_residual: best.0,
            converged: true,
        });
    }
    let mut p = r.clone();
    let mut used = 0;
    for it in 1..=maxit {
        used = it;
        let mp = apply(&p)?;
        let pmp = p.dot(&mp);
        if !(pmp > 0.0) {
            break;
        }
        let alpha = rr / pmp;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &mp);
        let rr_new = r.norm_sq();
        let rel = rr_new.sqrt() / bn;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= tol {
            return Ok(CgResult {
                x,
                iterations: it,
                relative_residual: rel,
                converged: true,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p = r.zip_map(&p, |ri, pi| ri + beta * pi);
    }
    Ok(CgResult {
        x: best.1,
        iterations: used,
        relative_residual: best.0,
        converged: false,
    })
}
