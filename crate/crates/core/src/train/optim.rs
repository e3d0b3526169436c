use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub lookahead_alpha: f64,
    pub lookahead_k: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale the gradient to this L2 norm when it is larger. Off by default.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            lookahead_alpha: 0.5,
            lookahead_k: 6,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be non-negative".into()));
        }
        if !(self.lookahead_alpha > 0.0 && self.lookahead_alpha <= 1.0) {
            return Err(Error::InvalidConfig("lookahead alpha must lie in (0, 1]".into()));
        }
        if self.lookahead_k == 0 {
            return Err(Error::InvalidConfig("lookahead k must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("Adam epsilon must be positive".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig("clip norm must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Adam on the fast weights, wrapped in Lookahead.
#[derive(Debug, Clone)]
pub struct Lookahead {
    cfg: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    slow: Vec<f64>,
    inner: usize,
}

impl Lookahead {
    pub fn new(cfg: OptimizerConfig, initial: &[f64]) -> Self {
        Self {
            cfg,
            m: vec![0.0; initial.len()],
            v: vec![0.0; initial.len()],
            t: 0,
            slow: initial.to_vec(),
            inner: 0,
        }
    }

    /// One Adam step on `fast`; every `k` steps the slow weights move
    /// `α` of the way toward the fast ones and the fast weights restart there.
    pub fn step(&mut self, fast: &mut [f64], grad: &[f64]) {
        let c = self.cfg;
        let mut scale = 1.0;
        if let Some(max) = c.clip_norm {
            let n = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if n > max {
                scale = max / n;
            }
        }
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for (((x, g), m), v) in fast.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            let g = g * scale;
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *x -= c.learning_rate * mh / (vh.sqrt() + c.epsilon);
        }
        self.inner += 1;
        if self.inner == c.lookahead_k {
            self.inner = 0;
            for (s, x) in self.slow.iter_mut().zip(fast.iter_mut()) {
                *s += c.lookahead_alpha * (*x - *s);
                *x = *s;
            }
        }
    }

    /// Applies the same elementwise map to slow and (by the caller) fast
    /// weights, for projections such as clamping.
    pub fn project_slow(&mut self, f: impl Fn(usize, f64) -> f64) {
        for (k, s) in self.slow.iter_mut().enumerate() {
            *s = f(k, *s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lr_leaves_weights() {
        let cfg = OptimizerConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let mut x = vec![0.3, -0.2];
        let mut opt = Lookahead::new(cfg, &x);
        for _ in 0..20 {
            opt.step(&mut x, &[1.0, -2.0]);
        }
        assert_eq!(x, vec![0.3, -0.2]);
    }

    #[test]
    fn alpha_one_is_plain_adam() {
        let la = OptimizerConfig {
            lookahead_alpha: 1.0,
            lookahead_k: 3,
            ..Default::default()
        };
        let plain = OptimizerConfig {
            lookahead_k: usize::MAX,
            ..la
        };
        let mut a = vec![1.0, 2.0];
        let mut b = a.clone();
        let mut oa = Lookahead::new(la, &a);
        let mut ob = Lookahead::new(plain, &b);
        for k in 0..17 {
            let g = [a[0] - 0.5 * k as f64, a[1] * 0.1];
            let gb = [b[0] - 0.5 * k as f64, b[1] * 0.1];
            oa.step(&mut a, &g);
            ob.step(&mut b, &gb);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn first_adam_step_is_lr_times_sign() {
        let cfg = OptimizerConfig {
            lookahead_k: 100,
            ..Default::default()
        };
        let mut x = vec![0.0, 0.0];
        let mut opt = Lookahead::new(cfg, &x);
        opt.step(&mut x, &[3.0, -0.01]);
        assert!((x[0] + 0.005).abs() < 1e-9);
        assert!((x[1] - 0.005).abs() < 1e-6);
    }

    #[test]
    fn lookahead_pulls_back_halfway() {
        let cfg = OptimizerConfig {
            lookahead_k: 1,
            ..Default::default()
        };
        let mut x = vec![0.0];
        let mut opt = Lookahead::new(cfg, &x);
        opt.step(&mut x, &[1.0]);
        assert!((x[0] + 0.0025).abs() < 1e-9);
    }

    #[test]
    fn minimizes_quadratic() {
        let cfg = OptimizerConfig {
            learning_rate: 0.05,
            ..Default::default()
        };
        let mut x = vec![2.0, -1.5];
        let mut opt = Lookahead::new(cfg, &x);
        for _ in 0..3000 {
            let g = [2.0 * (x[0] - 0.3), 2.0 * (x[1] + 0.7)];
            opt.step(&mut x, &g);
        }
        assert!((x[0] - 0.3).abs() < 1e-2 && (x[1] + 0.7).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = OptimizerConfig {
            lookahead_alpha: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig::default().validate().is_ok());
    }
}
