use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Halve the learning rate after this many updates; 0 disables decay.
    pub halve_every: u64,
    pub batch_size: usize,
    pub steps: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            halve_every: 2000,
            batch_size: 16,
            steps: 2000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be >= 0, got {}", self.lr0));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad(format!(
                "betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            ));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        Ok(())
    }

    /// Learning rate for the update that follows `completed` updates.
    pub fn learning_rate(&self, completed: u64) -> f64 {
        match completed.checked_div(self.halve_every) {
            Some(halvings) => self.lr0 * 0.5f64.powi(halvings.min(2000) as i32),
            None => self.lr0,
        }
    }
}

/// Moment estimates for bias-corrected ADAM.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One ADAM update in place; returns the learning rate used.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grad: &[f64],
    cfg: &TrainConfig,
) -> Result<f64> {
    let n = params.len();
    if grad.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::InvalidArgument(format!(
            "ADAM sizes disagree: {n} parameters, gradient {}, moments {}/{}",
            grad.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    let lr = cfg.learning_rate(state.t);
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powf(state.t as f64);
    let c2 = 1.0 - cfg.beta2.powf(state.t as f64);
    for i in 0..n {
        let g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (vhat.sqrt() + cfg.eps);
    }
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 3.0];
        adam_step(&mut s, &mut p, &[0.0; 3], &TrainConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        let cfg = TrainConfig {
            lr0: 0.01,
            ..Default::default()
        };
        for g in [1e-3, 0.5, -7.0, 1e4] {
            let mut s = AdamState::new(1);
            let mut p = vec![0.0];
            adam_step(&mut s, &mut p, &[g], &cfg).unwrap();
            let expected = -0.01 * g / (g.abs() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-15);
            // eps shortens the step by eps / |g| <= 1e-5 relative here.
            assert!(p[0].abs() <= 0.01 && p[0].abs() >= 0.01 * (1.0 - 1e-5 - 1e-12));
        }
    }

    #[test]
    fn schedule_halves() {
        let cfg = TrainConfig {
            lr0: 1.0,
            halve_every: 10,
            ..Default::default()
        };
        assert_eq!(cfg.learning_rate(0), 1.0);
        assert_eq!(cfg.learning_rate(9), 1.0);
        assert_eq!(cfg.learning_rate(10), 0.5);
        assert_eq!(cfg.learning_rate(35), 0.125);
        let flat = TrainConfig {
            halve_every: 0,
            ..cfg
        };
        assert_eq!(flat.learning_rate(1_000_000), 1.0);
    }

    #[test]
    fn size_mismatch() {
        let mut s = AdamState::new(2);
        assert!(adam_step(&mut s, &mut [0.0; 2], &[0.0; 3], &TrainConfig::default()).is_err());
    }
}
