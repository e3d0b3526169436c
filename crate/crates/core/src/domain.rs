//! Attitude value types and the rotation math shared by every estimator.
//!
//! Frames follow flight-controller conventions: body x forward, y right,
//! z down, with the accelerometer reporting the gravity direction (a level,
//! resting sensor reads `(0, 0, +g)`). Euler angles use the aerospace ZYX
//! (yaw-pitch-roll) sequence; only pitch and roll are exposed.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity in m/s².
pub const GRAVITY: f64 = 9.81;

/// Default sample period (200 Hz).
pub const DEFAULT_DT: f64 = 1.0 / 200.0;

/// Number of IMU channels fed to the network: `gx, gy, gz, ax, ay, az`.
pub const IMU_CHANNELS: usize = 6;

pub type Vec3 = [f64; 3];

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Pitch and roll in radians. Yaw is deliberately not represented.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub pitch: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub fn new(pitch: f64, roll: f64) -> Self {
        Self {
            pitch: wrap_angle(pitch),
            roll: wrap_angle(roll),
        }
    }

    pub fn from_degrees(pitch: f64, roll: f64) -> Self {
        Self::new(pitch.to_radians(), roll.to_radians())
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

/// Hamilton quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// The pure quaternion `[0, v]`.
    pub const fn pure(v: Vec3) -> Self {
        Self::new(0.0, v[0], v[1], v[2])
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = norm3(axis);
        if n == 0.0 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    /// Body-to-world rotation for the ZYX sequence `yaw`, `pitch`, `roll`.
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (0.5 * roll).sin_cos();
        let (sp, cp) = (0.5 * pitch).sin_cos();
        let (sy, cy) = (0.5 * yaw).sin_cos();
        Self::new(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        )
    }

    pub fn from_euler(angles: EulerAngles) -> Self {
        Self::from_euler_zyx(angles.roll, angles.pitch, 0.0)
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn hamilton(&self, rhs: &Quaternion) -> Quaternion {
        let (a, b) = (self, rhs);
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Returns the unit quaternion in the same direction; the identity if the
    /// norm is zero or non-finite.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Self::identity();
        }
        self.scale(1.0 / n)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn add(&self, o: &Quaternion) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Rotates a body-frame vector into the world frame: `q v q*`.
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let r = self.hamilton(&Quaternion::pure(v)).hamilton(&self.conjugate());
        [r.x, r.y, r.z]
    }

    /// Rotates a world-frame vector into the body frame: `q* v q`.
    pub fn rotate_inverse(&self, v: Vec3) -> Vec3 {
        self.conjugate().rotate(v)
    }

    /// Unit gravity direction as seen in the body frame, matching the
    /// accelerometer convention (`(0, 0, 1)` when level).
    pub fn gravity_direction(&self) -> Vec3 {
        let Quaternion { w, x, y, z } = *self;
        [
            2.0 * (x * z - w * y),
            2.0 * (w * x + y * z),
            1.0 - 2.0 * (x * x + y * y),
        ]
    }

    /// `(roll, pitch, yaw)` of the ZYX decomposition. Pitch saturates at
    /// ±pi/2 at gimbal lock. Does not check the norm.
    pub fn to_euler_zyx(&self) -> (f64, f64, f64) {
        let Quaternion { w, x, y, z } = *self;
        let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let sp = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
        let pitch = sp.asin().clamp(-FRAC_PI_2, FRAC_PI_2);
        let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        (roll, pitch, yaw)
    }

    /// Pitch and roll of a unit quaternion.
    pub fn to_euler(&self) -> Result<EulerAngles> {
        let n = self.norm();
        if !((n - 1.0).abs() <= 1e-6) {
            return Err(Error::NonUnitQuaternion { norm: n });
        }
        let (roll, pitch, _) = self.to_euler_zyx();
        Ok(EulerAngles::new(pitch, roll))
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Quaternion) -> Quaternion {
        self.hamilton(&rhs)
    }
}

pub fn norm3(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Tilt angles from an accelerometer reading under the weak-acceleration
/// assumption. Returns [`Error::Unobservable`] for norms at or below 0.1 m/s².
pub fn accel_to_angles(accel: Vec3) -> Result<EulerAngles> {
    let n = norm3(accel);
    if !(n > 0.1) {
        return Err(Error::Unobservable { norm: n });
    }
    let [ax, ay, az] = accel;
    let roll = ay.atan2(az);
    let pitch = (-ax).atan2((ay * ay + az * az).sqrt());
    Ok(EulerAngles::new(pitch, roll))
}

/// One timestamped 6-DOF reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// Seconds.
    pub t: f64,
    /// Angular rate in rad/s.
    pub gyro: Vec3,
    /// Gravity-direction acceleration in m/s².
    pub accel: Vec3,
}

impl ImuSample {
    pub fn channels(&self) -> [f64; IMU_CHANNELS] {
        [
            self.gyro[0],
            self.gyro[1],
            self.gyro[2],
            self.accel[0],
            self.accel[1],
            self.accel[2],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.channels().iter().all(|v| v.is_finite())
    }
}

/// A run of IMU samples with ground-truth attitude, the dataset unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    samples: Vec<ImuSample>,
    truth: Vec<EulerAngles>,
    dt: f64,
}

impl Sequence {
    pub fn new(samples: Vec<ImuSample>, truth: Vec<EulerAngles>, dt: f64) -> Result<Self> {
        if samples.len() != truth.len() {
            return Err(Error::LengthMismatch {
                left: samples.len(),
                right: truth.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        for (k, s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::Schema(format!("non-finite sample at row {k}")));
            }
            if k > 0 && !(s.t > samples[k - 1].t) {
                return Err(Error::Schema(format!(
                    "timestamps not strictly increasing at row {k}"
                )));
            }
        }
        if let Some(k) = truth
            .iter()
            .position(|a| !(a.pitch.is_finite() && a.roll.is_finite()))
        {
            return Err(Error::Schema(format!("non-finite ground truth at row {k}")));
        }
        Ok(Self { samples, truth, dt })
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn truth(&self) -> &[EulerAngles] {
        &self.truth
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Replaces the samples while keeping ground truth and timing.
    pub fn with_samples(&self, samples: Vec<ImuSample>) -> Result<Self> {
        Self::new(samples, self.truth.clone(), self.dt)
    }

    /// Splits into consecutive non-overlapping windows of `len` samples,
    /// dropping the incomplete tail.
    pub fn windows(&self, len: usize) -> Vec<Sequence> {
        if len == 0 {
            return Vec::new();
        }
        self.samples
            .chunks_exact(len)
            .zip(self.truth.chunks_exact(len))
            .map(|(s, t)| Sequence {
                samples: s.to_vec(),
                truth: t.to_vec(),
                dt: self.dt,
            })
            .collect()
    }

    /// Sub-sequence `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Sequence {
        let end = (start + len).min(self.len());
        Sequence {
            samples: self.samples[start..end].to_vec(),
            truth: self.truth[start..end].to_vec(),
            dt: self.dt,
        }
    }
}

/// Per-channel min-max bounds for mapping IMU data onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub x_min: [f64; IMU_CHANNELS],
    pub x_max: [f64; IMU_CHANNELS],
}

impl Default for NormalizationSpec {
    /// MEMS full-scale ranges: ±2000 °/s gyro, ±16 g accelerometer.
    fn default() -> Self {
        const G: f64 = 34.9;
        const A: f64 = 156.9;
        Self {
            x_min: [-G, -G, -G, -A, -A, -A],
            x_max: [G, G, G, A, A, A],
        }
    }
}

impl NormalizationSpec {
    pub fn new(x_min: [f64; IMU_CHANNELS], x_max: [f64; IMU_CHANNELS]) -> Result<Self> {
        for c in 0..IMU_CHANNELS {
            if !(x_max[c] > x_min[c]) || !x_min[c].is_finite() || !x_max[c].is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "normalization channel {c}: need finite x_max > x_min"
                )));
            }
        }
        Ok(Self { x_min, x_max })
    }

    /// Bounds spanning the observed range of `sequences`, widened by
    /// `margin` (a fraction of the span) on each side.
    pub fn fit<'a>(
        sequences: impl IntoIterator<Item = &'a Sequence>,
        margin: f64,
    ) -> Result<Self> {
        let mut lo = [f64::INFINITY; IMU_CHANNELS];
        let mut hi = [f64::NEG_INFINITY; IMU_CHANNELS];
        for seq in sequences {
            for s in seq.samples() {
                for (c, v) in s.channels().into_iter().enumerate() {
                    lo[c] = lo[c].min(v);
                    hi[c] = hi[c].max(v);
                }
            }
        }
        if lo.iter().any(|v| v.is_infinite()) {
            return Err(Error::EmptyDataset);
        }
        for c in 0..IMU_CHANNELS {
            let span = (hi[c] - lo[c]).max(1e-3);
            lo[c] -= margin * span;
            hi[c] += margin * span;
        }
        Self::new(lo, hi)
    }

    /// Min-max maps each channel onto `[-1, 1]`. Values outside the bounds
    /// go through the same affine map; nothing is clamped.
    pub fn normalize(&self, sample: &ImuSample) -> Result<[f64; IMU_CHANNELS]> {
        self.normalize_channels(sample.channels())
    }

    pub fn normalize_channels(&self, x: [f64; IMU_CHANNELS]) -> Result<[f64; IMU_CHANNELS]> {
        let mut out = [0.0; IMU_CHANNELS];
        for c in 0..IMU_CHANNELS {
            if !x[c].is_finite() {
                return Err(Error::NonFinite { channel: c });
            }
            out[c] = 2.0 * (x[c] - self.x_min[c]) / (self.x_max[c] - self.x_min[c]) - 1.0;
        }
        Ok(out)
    }

    pub fn normalize_sequence(&self, seq: &Sequence) -> Result<Vec<[f64; IMU_CHANNELS]>> {
        seq.samples().iter().map(|s| self.normalize(s)).collect()
    }
}
