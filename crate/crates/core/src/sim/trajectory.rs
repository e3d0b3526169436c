use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{EulerAngles, Quaternion, Vec3, DEFAULT_DT, GRAVITY};
use crate::error::{Error, Result};

/// How the attitude evolves over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Maneuver {
    /// Sum of random-phase sinusoids per axis with log-uniform frequencies
    /// in `[f_min, f_max]` Hz. Amplitudes fall off as `1/(1+f)` and add up
    /// to `max_tilt`, so the tilt never exceeds it. The whole program is
    /// faded in from level hover over the first `ramp` seconds.
    Random {
        harmonics: usize,
        f_min: f64,
        f_max: f64,
        #[serde(default)]
        ramp: f64,
    },
    /// Fixed attitude for the whole run.
    Constant { pitch: f64, roll: f64 },
    /// Level until `start`, then a quintic blend to the target over
    /// `duration` seconds, then hold.
    Step {
        pitch: f64,
        roll: f64,
        start: f64,
        duration: f64,
    },
}

impl Default for Maneuver {
    fn default() -> Self {
        Maneuver::Random {
            harmonics: 6,
            f_min: 0.05,
            f_max: 2.0,
            ramp: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub duration: f64,
    pub rate: f64,
    pub max_tilt: f64,
    pub maneuver: Maneuver,
    /// Peak yaw excursion of the random program, radians. Zero keeps yaw fixed.
    pub yaw_amplitude: f64,
    /// Linear drag per unit mass, 1/s.
    pub drag: f64,
    pub seed: u64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            duration: 100.0,
            rate: 1.0 / DEFAULT_DT,
            max_tilt: 0.79,
            maneuver: Maneuver::default(),
            yaw_amplitude: 0.0,
            drag: 0.5,
            seed: 0,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidConfig("rate must be positive".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidConfig("duration must be positive".into()));
        }
        if !(0.0..FRAC_PI_2).contains(&self.max_tilt) {
            return Err(Error::InvalidConfig("max_tilt must lie in [0, pi/2)".into()));
        }
        if !(self.drag > 0.0) {
            return Err(Error::InvalidConfig("drag must be positive".into()));
        }
        match self.maneuver {
            Maneuver::Random {
                harmonics,
                f_min,
                f_max,
                ramp,
            } => {
                if harmonics == 0 || !(f_min > 0.0 && f_max >= f_min) || !(ramp >= 0.0) {
                    return Err(Error::InvalidConfig("invalid random maneuver band".into()));
                }
            }
            Maneuver::Constant { pitch, roll } | Maneuver::Step { pitch, roll, .. } => {
                if pitch.abs() >= FRAC_PI_2 || roll.abs() >= FRAC_PI_2 {
                    return Err(Error::InvalidConfig("attitude must stay below 90 degrees".into()));
                }
            }
        }
        if let Maneuver::Step { duration, .. } = self.maneuver {
            if !(duration > 0.0) {
                return Err(Error::InvalidConfig("step duration must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Harmonic {
    amp: f64,
    omega: f64,
    phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Program {
    Harmonics { axes: [Vec<Harmonic>; 3], ramp: f64 },
    Constant(f64, f64),
    Step {
        target: (f64, f64),
        start: f64,
        duration: f64,
    },
}

/// Value and first derivative of each Euler angle `(roll, pitch, yaw)`.
type AngleState = [(f64, f64); 3];

fn smoothstep(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0)
    } else if s >= 1.0 {
        (1.0, 0.0)
    } else {
        let v = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let d = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        (v, d)
    }
}

/// Analytic attitude program.
#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeProgram {
    program: Program,
}

impl AttitudeProgram {
    pub fn new(cfg: &TrajectoryConfig) -> Result<Self> {
        cfg.validate()?;
        let program = match cfg.maneuver {
            Maneuver::Random {
                harmonics,
                f_min,
                f_max,
                ramp,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut axis = |peak: f64| -> Vec<Harmonic> {
                    let freqs: Vec<f64> = (0..harmonics)
                        .map(|_| {
                            let u: f64 = rng.random();
                            f_min * (f_max / f_min).powf(u)
                        })
                        .collect();
                    let weights: Vec<f64> = freqs.iter().map(|f| 1.0 / (1.0 + f)).collect();
                    let total: f64 = weights.iter().sum();
                    freqs
                        .iter()
                        .zip(&weights)
                        .map(|(f, w)| Harmonic {
                            amp: peak * w / total,
                            omega: TAU * f,
                            phase: rng.random_range(0.0..TAU),
                        })
                        .collect()
                };
                let roll = axis(cfg.max_tilt);
                let pitch = axis(cfg.max_tilt);
                let yaw = axis(cfg.yaw_amplitude);
                Program::Harmonics {
                    axes: [roll, pitch, yaw],
                    ramp,
                }
            }
            Maneuver::Constant { pitch, roll } => Program::Constant(roll, pitch),
            Maneuver::Step {
                pitch,
                roll,
                start,
                duration,
            } => Program::Step {
                target: (roll, pitch),
                start,
                duration,
            },
        };
        Ok(Self { program })
    }

    fn state(&self, t: f64) -> AngleState {
        match &self.program {
            Program::Harmonics { axes, ramp } => {
                let (e, de) = if *ramp > 0.0 {
                    let (e, de) = smoothstep(t / ramp);
                    (e, de / ramp)
                } else {
                    (1.0, 0.0)
                };
                std::array::from_fn(|a| {
                    let (v, d) = axes[a].iter().fold((0.0, 0.0), |(v, d), h| {
                        let (s, c) = (h.omega * t + h.phase).sin_cos();
                        (v + h.amp * s, d + h.amp * h.omega * c)
                    });
                    (e * v, e * d + de * v)
                })
            }
            Program::Constant(r, p) => [(*r, 0.0), (*p, 0.0), (0.0, 0.0)],
            Program::Step {
                target,
                start,
                duration,
            } => {
                let (s, ds) = smoothstep((t - start) / duration);
                let ds = ds / duration;
                [(target.0 * s, target.0 * ds), (target.1 * s, target.1 * ds), (0.0, 0.0)]
            }
        }
    }

    /// `(roll, pitch, yaw)` at time `t`.
    pub fn angles(&self, t: f64) -> Vec3 {
        self.state(t).map(|(v, _)| v)
    }

    pub fn quaternion(&self, t: f64) -> Quaternion {
        let [r, p, y] = self.angles(t);
        Quaternion::from_euler_zyx(r, p, y)
    }

    /// Body angular rate, the exact kinematic image of the Euler rates.
    pub fn body_rates(&self, t: f64) -> Vec3 {
        let [(phi, dphi), (theta, dtheta), (_, dpsi)] = self.state(t);
        let (sphi, cphi) = phi.sin_cos();
        let (sth, cth) = theta.sin_cos();
        [
            dphi - dpsi * sth,
            dtheta * cphi + dpsi * cth * sphi,
            -dtheta * sphi + dpsi * cth * cphi,
        ]
    }

    /// Horizontal thrust acceleration (world x, y) when the vertical thrust
    /// component balances gravity.
    fn thrust_horizontal(&self, t: f64) -> [f64; 2] {
        let [r, p, y] = self.angles(t);
        let thrust = GRAVITY / (r.cos() * p.cos());
        let f = Quaternion::from_euler_zyx(r, p, y).rotate([0.0, 0.0, -thrust]);
        [f[0], f[1]]
    }
}

/// Noise-free traces sampled at the configured rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrace {
    pub dt: f64,
    pub t: Vec<f64>,
    pub attitude: Vec<Quaternion>,
    pub angles: Vec<EulerAngles>,
    pub body_rates: Vec<Vec3>,
    /// Accelerometer reading without noise, gravity-direction convention.
    pub accel: Vec<Vec3>,
    /// Horizontal world velocity of the point mass.
    pub velocity: Vec<[f64; 2]>,
}

impl TruthTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Samples the attitude program and the point-mass translational response.
///
/// Thrust is along body `-z` with magnitude `g / (cos φ cos θ)`, so altitude
/// is held and tilt turns into horizontal acceleration; linear drag
/// `-k_d v` bounds the velocity. The run starts at the terminal velocity of
/// the initial attitude. The accelerometer sees `Rᵀ(g_w − a_w)`.
pub fn generate_trajectory(cfg: &TrajectoryConfig) -> Result<TruthTrace> {
    let program = AttitudeProgram::new(cfg)?;
    let n = cfg.steps();
    let dt = 1.0 / cfg.rate;
    let k = cfg.drag;
    let accel_h = |t: f64, v: [f64; 2]| {
        let f = program.thrust_horizontal(t);
        [f[0] - k * v[0], f[1] - k * v[1]]
    };

    let mut out = TruthTrace {
        dt,
        t: Vec::with_capacity(n),
        attitude: Vec::with_capacity(n),
        angles: Vec::with_capacity(n),
        body_rates: Vec::with_capacity(n),
        accel: Vec::with_capacity(n),
        velocity: Vec::with_capacity(n),
    };
    let f0 = program.thrust_horizontal(0.0);
    let mut v = [f0[0] / k, f0[1] / k];
    for step in 0..n {
        let t = step as f64 * dt;
        let q = program.quaternion(t);
        let [roll, pitch, _] = program.angles(t);
        let a = accel_h(t, v);
        let body = q.rotate_inverse([-a[0], -a[1], GRAVITY]);
        out.t.push(t);
        out.attitude.push(q);
        out.angles.push(EulerAngles::new(pitch, roll));
        out.body_rates.push(program.body_rates(t));
        out.accel.push(body);
        out.velocity.push(v);

        // RK4 on the horizontal velocity.
        let add = |v: [f64; 2], d: [f64; 2], h: f64| [v[0] + h * d[0], v[1] + h * d[1]];
        let k1 = a;
        let k2 = accel_h(t + 0.5 * dt, add(v, k1, 0.5 * dt));
        let k3 = accel_h(t + 0.5 * dt, add(v, k2, 0.5 * dt));
        let k4 = accel_h(t + dt, add(v, k3, dt));
        for c in 0..2 {
            v[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::accel_to_angles;

    #[test]
    fn zero_tilt_is_hover() {
        let cfg = TrajectoryConfig {
            duration: 5.0,
            max_tilt: 0.0,
            ..Default::default()
        };
        let tr = generate_trajectory(&cfg).unwrap();
        assert_eq!(tr.len(), 1000);
        for k in 0..tr.len() {
            assert_eq!(tr.angles[k], EulerAngles::zero());
            assert_eq!(tr.body_rates[k], [0.0; 3]);
            assert_eq!(tr.accel[k], [0.0, 0.0, GRAVITY]);
        }
    }

    #[test]
    fn stays_within_max_tilt() {
        let cfg = TrajectoryConfig {
            duration: 60.0,
            seed: 4,
            ..Default::default()
        };
        let tr = generate_trajectory(&cfg).unwrap();
        for a in &tr.angles {
            assert!(a.pitch.abs() <= cfg.max_tilt + 1e-12 && a.roll.abs() <= cfg.max_tilt + 1e-12);
        }
    }

    #[test]
    fn euler_rates_match_finite_difference_of_quaternion() {
        // ω = 2 Im(q* q̇), q̇ by central differences.
        let cfg = TrajectoryConfig {
            yaw_amplitude: 0.5,
            seed: 2,
            ..Default::default()
        };
        let p = AttitudeProgram::new(&cfg).unwrap();
        let h = 1e-6;
        for k in 0..50 {
            let t = 0.37 * k as f64;
            let q = p.quaternion(t);
            let qp = p.quaternion(t + h);
            let qm = p.quaternion(t - h);
            let dq = qp.add(&qm.scale(-1.0)).scale(1.0 / (2.0 * h));
            let w = q.conjugate().hamilton(&dq).scale(2.0);
            let b = p.body_rates(t);
            assert!((w.x - b[0]).abs() < 1e-6 && (w.y - b[1]).abs() < 1e-6 && (w.z - b[2]).abs() < 1e-6);
        }
    }

    #[test]
    fn static_tilt_reads_true_after_transient() {
        let cfg = TrajectoryConfig {
            duration: 40.0,
            maneuver: Maneuver::Step {
                pitch: 20f64.to_radians(),
                roll: 0.0,
                start: 1.0,
                duration: 1.0,
            },
            ..Default::default()
        };
        let tr = generate_trajectory(&cfg).unwrap();
        let last = accel_to_angles(*tr.accel.last().unwrap()).unwrap();
        assert!((last.pitch.to_degrees() - 20.0).abs() < 1e-3);
        // During the transient the accelerometer disagrees with the attitude.
        let mid = accel_to_angles(tr.accel[600]).unwrap();
        assert!((mid.pitch - tr.angles[600].pitch).abs() > 1f64.to_radians());
    }

    #[test]
    fn constant_attitude_starts_at_terminal_velocity() {
        let cfg = TrajectoryConfig {
            duration: 2.0,
            maneuver: Maneuver::Constant {
                pitch: 0.3,
                roll: -0.2,
            },
            ..Default::default()
        };
        let tr = generate_trajectory(&cfg).unwrap();
        for (a, truth) in tr.accel.iter().zip(&tr.angles) {
            let m = accel_to_angles(*a).unwrap();
            assert!((m.pitch - truth.pitch).abs() < 1e-9 && (m.roll - truth.roll).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = TrajectoryConfig {
            rate: 0.0,
            ..Default::default()
        };
        assert!(generate_trajectory(&bad).is_err());
    }
}
