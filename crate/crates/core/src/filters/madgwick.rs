use serde::{Deserialize, Serialize};

use crate::domain::{norm3, ImuSample, Quaternion, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MadgwickParams {
    pub beta: f64,
}

impl Default for MadgwickParams {
    fn default() -> Self {
        Self { beta: 0.1 }
    }
}

impl MadgwickParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidConfig("Madgwick beta must be non-negative".into()));
        }
        Ok(())
    }
}

/// Jacobian of [`Quaternion::gravity_direction`] with respect to `(w, x, y, z)`.
pub fn gravity_jacobian(q: &Quaternion) -> [[f64; 4]; 3] {
    let Quaternion { w, x, y, z } = *q;
    [
        [-2.0 * y, 2.0 * z, -2.0 * w, 2.0 * x],
        [2.0 * x, 2.0 * w, 2.0 * z, 2.0 * y],
        [0.0, -4.0 * x, -4.0 * y, 0.0],
    ]
}

/// `½ Jᵀ f` for `f = g(q) − â`, or `None` if the accelerometer is unusable.
pub fn madgwick_gradient(q: &Quaternion, accel: Vec3) -> Option<[f64; 4]> {
    let n = norm3(accel);
    if !(n > 0.1) {
        return None;
    }
    let g = q.gravity_direction();
    let f = [g[0] - accel[0] / n, g[1] - accel[1] / n, g[2] - accel[2] / n];
    let j = gravity_jacobian(q);
    let mut grad = [0.0; 4];
    for (c, gc) in grad.iter_mut().enumerate() {
        *gc = 0.5 * (j[0][c] * f[0] + j[1][c] * f[1] + j[2][c] * f[2]);
    }
    Some(grad)
}

pub fn madgwick_step(q: &Quaternion, params: &MadgwickParams, sample: &ImuSample, dt: f64) -> Quaternion {
    let mut qdot = q.hamilton(&Quaternion::pure(sample.gyro)).scale(0.5);
    if let Some(grad) = madgwick_gradient(q, sample.accel) {
        let n = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n >= 1e-12 && params.beta > 0.0 {
            let s = params.beta / n;
            qdot = qdot.add(&Quaternion::from_array(grad).scale(-s));
        }
    }
    q.add(&qdot.scale(dt)).normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GRAVITY;

    #[test]
    fn jacobian_matches_finite_difference() {
        let q = Quaternion::new(0.9, 0.2, -0.3, 0.1).normalized();
        let j = gravity_jacobian(&q);
        let h = 1e-7;
        for c in 0..4 {
            let mut a = q.to_array();
            a[c] += h;
            let gp = Quaternion::from_array(a).gravity_direction();
            a[c] -= 2.0 * h;
            let gm = Quaternion::from_array(a).gravity_direction();
            for r in 0..3 {
                let fd = (gp[r] - gm[r]) / (2.0 * h);
                assert!((fd - j[r][c]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn stays_at_truth_when_level() {
        let p = MadgwickParams { beta: 0.5 };
        let mut q = Quaternion::identity();
        for k in 0..500 {
            let s = ImuSample {
                t: k as f64 * 0.005,
                gyro: [0.0; 3],
                accel: [0.0, 0.0, GRAVITY],
            };
            q = madgwick_step(&q, &p, &s, 0.005);
        }
        assert_eq!(q, Quaternion::identity());
    }

    #[test]
    fn pitch_offset_shrinks_monotonically() {
        let p = MadgwickParams { beta: 0.1 };
        let mut q = Quaternion::from_euler_zyx(0.0, 20f64.to_radians(), 0.0);
        let mut prev = q.to_euler().unwrap().pitch.abs();
        let mut steps = 0;
        while prev > 0.1f64.to_radians() {
            let s = ImuSample {
                t: 0.0,
                gyro: [0.0; 3],
                accel: [0.0, 0.0, GRAVITY],
            };
            q = madgwick_step(&q, &p, &s, 0.005);
            let e = q.to_euler().unwrap().pitch.abs();
            assert!(e < prev, "step {steps}: {e} !< {prev}");
            prev = e;
            steps += 1;
            assert!(steps < 10_000);
        }
    }
}
