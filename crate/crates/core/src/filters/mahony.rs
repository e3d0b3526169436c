use serde::{Deserialize, Serialize};

use super::gyro_propagate;
use crate::domain::{cross, norm3, ImuSample, Quaternion, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MahonyParams {
    pub k_p: f64,
    pub k_i: f64,
    /// Running gyro bias estimate `b̂`.
    #[serde(default)]
    pub bias: Vec3,
}

impl Default for MahonyParams {
    fn default() -> Self {
        Self::new(1.0, 0.05)
    }
}

impl MahonyParams {
    pub fn new(k_p: f64, k_i: f64) -> Self {
        Self {
            k_p,
            k_i,
            bias: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_p >= 0.0 && self.k_i >= 0.0) {
            return Err(Error::InvalidConfig("Mahony gains must be non-negative".into()));
        }
        Ok(())
    }
}

/// Measured-versus-predicted gravity error `â × v̂`; zero if the
/// accelerometer reading carries no direction.
pub fn mahony_error(q: &Quaternion, accel: Vec3) -> Vec3 {
    let n = norm3(accel);
    if !(n > 0.1) {
        return [0.0; 3];
    }
    let a = [accel[0] / n, accel[1] / n, accel[2] / n];
    cross(a, q.gravity_direction())
}

/// Bias update first, then the corrected rate drives the quaternion:
/// `b̂ ← b̂ − k_I e Δt`, `q ← q + ½ q ⊗ p(ω − b̂ + k_P e) Δt`.
pub fn mahony_step(q: &Quaternion, params: &mut MahonyParams, sample: &ImuSample, dt: f64) -> Quaternion {
    let e = mahony_error(q, sample.accel);
    let mut w = sample.gyro;
    for k in 0..3 {
        params.bias[k] -= params.k_i * e[k] * dt;
        w[k] += -params.bias[k] + params.k_p * e[k];
    }
    gyro_propagate(q, w, dt)
}
