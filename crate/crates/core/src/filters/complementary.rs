use serde::{Deserialize, Serialize};

use super::gyro_propagate;
use crate::domain::{accel_to_angles, norm3, wrap_angle, EulerAngles, ImuSample, Quaternion};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplementaryParams {
    /// Weight of the gyro-propagated angle; `1 - gamma` goes to the accel tilt.
    pub gamma: f64,
    pub adaptive: bool,
    pub k_a: f64,
    /// Adaptation is active only while `‖ω‖` is below this, in rad/s.
    pub omega_gate: f64,
}

impl Default for ComplementaryParams {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            adaptive: false,
            k_a: 0.01,
            omega_gate: 0.1,
        }
    }
}

impl ComplementaryParams {
    pub fn plain(gamma: f64) -> Self {
        Self {
            gamma,
            ..Default::default()
        }
    }

    pub fn adaptive(gamma: f64) -> Self {
        Self {
            gamma,
            adaptive: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(self.k_a >= 0.0) || !(self.omega_gate >= 0.0) {
            return Err(Error::InvalidConfig("k_a and omega_gate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Pitch and roll estimate plus the gyro-integrated yaw needed to propagate
/// body rates correctly. Yaw is never corrected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplementaryState {
    pub angles: EulerAngles,
    pub yaw: f64,
}

impl ComplementaryState {
    pub fn new(angles: EulerAngles) -> Self {
        Self { angles, yaw: 0.0 }
    }
}

/// Effective gyro weight for one axis. `gap` is `|θ̂ − θ_acc|` in radians.
/// Saturates at `[0, gamma]`: large disagreement while the vehicle is slow
/// shifts trust toward the accelerometer.
pub fn adaptive_gamma(params: &ComplementaryParams, gap: f64, omega_norm: f64) -> f64 {
    if !params.adaptive || omega_norm >= params.omega_gate {
        return params.gamma;
    }
    (params.gamma - params.k_a * gap).clamp(0.0, params.gamma)
}

/// `θ̂_k = γ(θ̂_{k−1} + ωΔt) + (1 − γ)θ_acc` per axis. The gyro term is the
/// full attitude kinematics rather than a per-axis rate sum, so with
/// `gamma = 1` the output is exactly the quaternion gyro integral.
pub fn complementary_step(
    state: ComplementaryState,
    params: &ComplementaryParams,
    sample: &ImuSample,
    dt: f64,
) -> ComplementaryState {
    let q = Quaternion::from_euler_zyx(state.angles.roll, state.angles.pitch, state.yaw);
    let (roll, pitch, yaw) = gyro_propagate(&q, sample.gyro, dt).to_euler_zyx();
    let Ok(acc) = accel_to_angles(sample.accel) else {
        return ComplementaryState {
            angles: EulerAngles::new(pitch, roll),
            yaw,
        };
    };
    let w = norm3(sample.gyro);
    let dp = wrap_angle(acc.pitch - pitch);
    let dr = wrap_angle(acc.roll - roll);
    let gp = adaptive_gamma(params, dp.abs(), w);
    let gr = adaptive_gamma(params, dr.abs(), w);
    ComplementaryState {
        angles: EulerAngles::new(pitch + (1.0 - gp) * dp, roll + (1.0 - gr) * dr),
        yaw,
    }
}
