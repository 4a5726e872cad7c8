//! First-order adaptive-moment optimizer used by the geometry and texture
//! fits.

/// Adam state: first/second moment estimates plus the step count used for
/// bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(n_params: usize, betas: (f64, f64), epsilon: f64) -> Self {
        assert!((0.0..1.0).contains(&betas.0), "beta1 must be in [0,1)");
        assert!((0.0..1.0).contains(&betas.1), "beta2 must be in [0,1)");
        assert!(epsilon > 0.0);
        Adam {
            beta1: betas.0,
            beta2: betas.1,
            epsilon,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update in place: p -= lr * m_hat / (sqrt(v_hat) + eps).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter/state shape mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient/state shape mismatch");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Cosine-annealed learning rate: starts at `lr`, ends at `lr * floor_fraction`
/// after `total` iterations. `floor_fraction = 1` gives a constant rate.
pub fn cosine_lr(lr: f64, floor_fraction: f64, iter: usize, total: usize) -> f64 {
    if total <= 1 || floor_fraction >= 1.0 {
        return lr;
    }
    let t = iter as f64 / (total - 1) as f64;
    let w = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
    lr * (floor_fraction + (1.0 - floor_fraction) * w)
}

/// Linear warmup over the first 5% of the schedule. Damps the transient while
/// the moment estimates settle; without it the first full-size steps overshoot
/// whenever parameters start near their optimum.
pub fn warmup_factor(iter: usize, total: usize) -> f64 {
    let warmup = (total / 20).max(1);
    ((iter + 1) as f64 / warmup as f64).min(1.0)
}
