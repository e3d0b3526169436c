//! Quaternion-only EKF: gyro-driven random-walk prediction, accelerometer
//! gravity-direction update.

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Matrix4x3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::madgwick::gravity_jacobian;
use crate::domain::{norm3, ImuSample, Quaternion, Vec3};
use crate::error::{Error, Result};

/// Initial state covariance scale, `P₀ = 0.5·I`.
pub const P0_SCALE: f64 = 0.5;

/// Relative growth of `P` when an update has to be skipped.
const SKIP_INFLATION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EkfParams {
    /// Gyro noise variance scale driving the process noise.
    pub q_proc: f64,
    /// Accelerometer direction noise variance. Non-finite disables updates.
    pub r_meas: f64,
    #[serde(skip, default = "initial_covariance")]
    pub p: Matrix4<f64>,
}

fn initial_covariance() -> Matrix4<f64> {
    Matrix4::identity() * P0_SCALE
}

impl Default for EkfParams {
    fn default() -> Self {
        Self::new(1e-3, 1e-1)
    }
}

impl EkfParams {
    pub fn new(q_proc: f64, r_meas: f64) -> Self {
        Self {
            q_proc,
            r_meas,
            p: initial_covariance(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_proc >= 0.0) || !(self.r_meas >= 0.0) {
            return Err(Error::InvalidConfig("EKF noise scales must be non-negative".into()));
        }
        Ok(())
    }

    pub fn reset_covariance(&mut self) {
        self.p = initial_covariance();
    }
}

/// `Ω(ω)` with `q ⊗ p(ω) = Ω(ω) q`.
fn omega_matrix(w: Vec3) -> Matrix4<f64> {
    let [x, y, z] = w;
    Matrix4::new(
        0.0, -x, -y, -z, //
        x, 0.0, z, -y, //
        y, -z, 0.0, x, //
        z, y, -x, 0.0,
    )
}

/// `Ξ(q)` with `q ⊗ p(v) = Ξ(q) v`.
fn xi_matrix(q: &Quaternion) -> Matrix4x3<f64> {
    let Quaternion { w, x, y, z } = *q;
    Matrix4x3::new(
        -x, -y, -z, //
        w, -z, y, //
        z, w, -x, //
        -y, x, w,
    )
}

fn to_vec(q: &Quaternion) -> Vector4<f64> {
    Vector4::new(q.w, q.x, q.y, q.z)
}

fn from_vec(v: &Vector4<f64>) -> Quaternion {
    Quaternion::new(v[0], v[1], v[2], v[3])
}

pub fn ekf_step(q: &Quaternion, params: &EkfParams, sample: &ImuSample, dt: f64) -> (Quaternion, EkfParams) {
    let mut out = *params;

    // Predict.
    let f = Matrix4::identity() + omega_matrix(sample.gyro) * (0.5 * dt);
    let xi = xi_matrix(q);
    let qn = xi * xi.transpose() * (params.q_proc * 0.25 * dt * dt);
    let mut x = from_vec(&(f * to_vec(q))).normalized();
    let mut p = f * params.p * f.transpose() + qn;

    // Update.
    let n = norm3(sample.accel);
    if params.r_meas.is_finite() && n > 0.1 {
        let z = Vector3::new(sample.accel[0] / n, sample.accel[1] / n, sample.accel[2] / n);
        let h = Vector3::from(x.gravity_direction());
        let jac = gravity_jacobian(&x);
        let hm = Matrix3x4::from_fn(|r, c| jac[r][c]);
        let r = Matrix3::identity() * params.r_meas;
        let s = hm * p * hm.transpose() + r;
        match s.try_inverse() {
            Some(s_inv) if s_inv.iter().all(|v| v.is_finite()) => {
                let k = p * hm.transpose() * s_inv;
                x = from_vec(&(to_vec(&x) + k * (z - h))).normalized();
                let ikh = Matrix4::identity() - k * hm;
                p = ikh * p * ikh.transpose() + k * r * k.transpose();
            }
            _ => p *= 1.0 + SKIP_INFLATION,
        }
    }
    out.p = (p + p.transpose()) * 0.5;
    (x, out)
}
