//! Hardware parameter grid: `p_q = round(p / Δq) · Δq`, saturated to the range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Range and step of a fixed-point parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub step: f64,
}

/// Synaptic weights: `[-1, 1 - 1/256]`, step `2/256`.
pub const WEIGHT_SPEC: QuantSpec = QuantSpec {
    q_min: -1.0,
    q_max: 1.0 - 1.0 / 256.0,
    step: 2.0 / 256.0,
};

/// Membrane and synaptic decays: `[0, 1]`, step `1/4096`.
pub const DECAY_SPEC: QuantSpec = QuantSpec {
    q_min: 0.0,
    q_max: 1.0,
    step: 1.0 / 4096.0,
};

const GRID_TOL: f64 = 1e-12;

impl QuantSpec {
    pub fn new(q_min: f64, q_max: f64, step: f64) -> Result<Self> {
        let spec = Self { q_min, q_max, step };
        if !(q_min < q_max) || !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "quantization spec needs q_min < q_max and step > 0 (got [{q_min}, {q_max}], {step})"
            )));
        }
        if spec.k_min() > spec.k_max() {
            return Err(Error::InvalidConfig(
                "quantization range contains no grid point".into(),
            ));
        }
        Ok(spec)
    }

    /// Smallest integer code inside the range.
    pub fn k_min(&self) -> i64 {
        (self.q_min / self.step - GRID_TOL).ceil() as i64
    }

    /// Largest integer code inside the range. For the weight grid the upper
    /// bound `1 - 1/256` lies between grid points, so this is 127.
    pub fn k_max(&self) -> i64 {
        (self.q_max / self.step + GRID_TOL).floor() as i64
    }

    /// Nearest grid value, ties away from zero, saturated to the outermost
    /// grid points inside `[q_min, q_max]`.
    pub fn quantize(&self, p: f64) -> f64 {
        let k = (p / self.step).round();
        let k = k.clamp(self.k_min() as f64, self.k_max() as f64);
        // `+ 0.0` folds -0.0 into the single hardware zero.
        k * self.step + 0.0
    }

    pub fn quantize_in_place(&self, values: &mut [f64]) {
        for v in values {
            *v = self.quantize(*v);
        }
    }

    /// Integer code `k` with `p_q = k · Δq`.
    pub fn to_hardware_integer(&self, p_q: f64) -> Result<i64> {
        let k = p_q / self.step;
        let r = k.round();
        if !((k - r).abs() <= GRID_TOL) || r < self.k_min() as f64 || r > self.k_max() as f64 {
            return Err(Error::OffGrid { value: p_q });
        }
        Ok(r as i64)
    }

    pub fn dequantize(&self, k: i64) -> f64 {
        k as f64 * self.step
    }

    pub fn is_on_grid(&self, p: f64) -> bool {
        self.to_hardware_integer(p).is_ok()
    }

    /// Backward rule for quantization in the training loop: the gradient
    /// passes straight through, as if quantization were the identity.
    #[inline]
    pub fn straight_through(&self, upstream: f64) -> f64 {
        upstream
    }
}
