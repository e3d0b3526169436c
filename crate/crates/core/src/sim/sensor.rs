use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::trajectory::TruthTrace;
use crate::domain::{EulerAngles, ImuSample, Sequence, Vec3};
use crate::error::{Error, Result};

/// White noise plus constant bias on each of the six channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// rad/s/√Hz.
    pub gyro_noise_density: f64,
    /// m/s²/√Hz.
    pub accel_noise_density: f64,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    pub seed: u64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            gyro_noise_density: 0.003,
            accel_noise_density: 0.02,
            gyro_bias: [0.0; 3],
            accel_bias: [0.0; 3],
            seed: 0,
        }
    }
}

impl SensorModel {
    /// No noise and no bias.
    pub fn ideal() -> Self {
        Self {
            gyro_noise_density: 0.0,
            accel_noise_density: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gyro_noise_density >= 0.0 && self.accel_noise_density >= 0.0) {
            return Err(Error::InvalidConfig("noise densities must be non-negative".into()));
        }
        if !self.gyro_bias.iter().chain(&self.accel_bias).all(|b| b.is_finite()) {
            return Err(Error::InvalidConfig("biases must be finite".into()));
        }
        Ok(())
    }
}

/// Changes applied by [`augment`]: biases are added, noise densities are
/// extra independent noise on top of what the sequence already has.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorDeltas {
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    pub gyro_noise_density: f64,
    pub accel_noise_density: f64,
}

fn corrupt(
    samples: &mut [ImuSample],
    rate: f64,
    gyro: (f64, Vec3),
    accel: (f64, Vec3),
    seed: u64,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sg = gyro.0 * rate.sqrt();
    let sa = accel.0 * rate.sqrt();
    let mut draw = |sigma: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    };
    for s in samples {
        for c in 0..3 {
            if sg > 0.0 {
                s.gyro[c] += draw(sg);
            }
            s.gyro[c] += gyro.1[c];
        }
        for c in 0..3 {
            if sa > 0.0 {
                s.accel[c] += draw(sa);
            }
            s.accel[c] += accel.1[c];
        }
    }
}

/// Noisy, biased IMU readings over a truth trace. Per-sample noise standard
/// deviation is `density·√rate`.
pub fn synthesize_imu(truth: &TruthTrace, model: &SensorModel) -> Result<Sequence> {
    model.validate()?;
    let mut samples: Vec<ImuSample> = (0..truth.len())
        .map(|k| ImuSample {
            t: truth.t[k],
            gyro: truth.body_rates[k],
            accel: truth.accel[k],
        })
        .collect();
    corrupt(
        &mut samples,
        1.0 / truth.dt,
        (model.gyro_noise_density, model.gyro_bias),
        (model.accel_noise_density, model.accel_bias),
        model.seed,
    );
    Sequence::new(samples, truth.angles.clone(), truth.dt)
}

/// Re-biased and re-noised copy of `seq`. Ground truth is untouched.
pub fn augment(seq: &Sequence, deltas: &SensorDeltas, seed: u64) -> Result<Sequence> {
    if !(deltas.gyro_noise_density >= 0.0 && deltas.accel_noise_density >= 0.0) {
        return Err(Error::InvalidConfig("noise densities must be non-negative".into()));
    }
    let mut samples = seq.samples().to_vec();
    corrupt(
        &mut samples,
        1.0 / seq.dt(),
        (deltas.gyro_noise_density, deltas.gyro_bias),
        (deltas.accel_noise_density, deltas.accel_bias),
        seed,
    );
    seq.with_samples(samples)
}

/// Reflection of a flight through the body x-z plane (`flip_roll`) and/or
/// the y-z plane (`flip_pitch`). Gravity and drag are symmetric under both,
/// so the result is another physically valid flight: reflected vectors
/// negate one component, angular rates (pseudo-vectors) the other two.
pub fn mirror(seq: &Sequence, flip_pitch: bool, flip_roll: bool) -> Result<Sequence> {
    let sign = |flip: bool| if flip { -1.0 } else { 1.0 };
    let (sp, sr) = (sign(flip_pitch), sign(flip_roll));
    let samples = seq
        .samples()
        .iter()
        .map(|s| ImuSample {
            t: s.t,
            gyro: [s.gyro[0] * sr, s.gyro[1] * sp, s.gyro[2] * sp * sr],
            accel: [s.accel[0] * sp, s.accel[1] * sr, s.accel[2]],
        })
        .collect();
    let truth = seq
        .truth()
        .iter()
        .map(|a| EulerAngles::new(a.pitch * sp, a.roll * sr))
        .collect();
    Sequence::new(samples, truth, seq.dt())
}

/// Each flight followed by its three reflections.
pub fn mirror_augment(seqs: &[Sequence]) -> Result<Vec<Sequence>> {
    let mut out = Vec::with_capacity(4 * seqs.len());
    for s in seqs {
        for (fp, fr) in [(false, false), (true, false), (false, true), (true, true)] {
            out.push(mirror(s, fp, fr)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trajectory::{generate_trajectory, TrajectoryConfig};

    fn truth(secs: f64) -> TruthTrace {
        generate_trajectory(&TrajectoryConfig {
            duration: secs,
            seed: 3,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn ideal_sensor_is_truth() {
        let tr = truth(5.0);
        let seq = synthesize_imu(&tr, &SensorModel::ideal()).unwrap();
        for (k, s) in seq.samples().iter().enumerate() {
            assert_eq!(s.gyro, tr.body_rates[k]);
            assert_eq!(s.accel, tr.accel[k]);
        }
    }

    #[test]
    fn noise_std_matches_density() {
        let tr = truth(50.0);
        let model = SensorModel {
            seed: 11,
            ..Default::default()
        };
        let seq = synthesize_imu(&tr, &model).unwrap();
        let n = seq.len() as f64;
        for c in 0..6 {
            let err: Vec<f64> = seq
                .samples()
                .iter()
                .enumerate()
                .map(|(k, s)| s.channels()[c] - [tr.body_rates[k], tr.accel[k]].concat()[c])
                .collect();
            let mean = err.iter().sum::<f64>() / n;
            let sd = (err.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let want = if c < 3 { 0.003 } else { 0.02 } * 200f64.sqrt();
            assert!((sd / want - 1.0).abs() < 0.05, "channel {c}: {sd} vs {want}");
        }
    }

    #[test]
    fn bias_shifts_mean() {
        let tr = truth(50.0);
        let model = SensorModel {
            gyro_bias: [0.01, -0.02, 0.005],
            accel_bias: [0.3, 0.0, -0.1],
            seed: 5,
            ..Default::default()
        };
        let seq = synthesize_imu(&tr, &model).unwrap();
        let n = seq.len() as f64;
        for c in 0..6 {
            let mean = seq
                .samples()
                .iter()
                .enumerate()
                .map(|(k, s)| s.channels()[c] - [tr.body_rates[k], tr.accel[k]].concat()[c])
                .sum::<f64>()
                / n;
            let bias = [model.gyro_bias, model.accel_bias].concat()[c];
            let sigma = if c < 3 { 0.003 } else { 0.02 } * 200f64.sqrt() / n.sqrt();
            assert!((mean - bias).abs() < 3.0 * sigma, "channel {c}");
        }
    }

    #[test]
    fn augmentation() {
        let tr = truth(10.0);
        let seq = synthesize_imu(&tr, &SensorModel::default()).unwrap();
        assert_eq!(augment(&seq, &SensorDeltas::default(), 1).unwrap(), seq);

        let d = SensorDeltas {
            accel_bias: [0.3, 0.0, 0.0],
            ..Default::default()
        };
        let shifted = augment(&seq, &d, 1).unwrap();
        let n = seq.len() as f64;
        let shift: f64 = shifted
            .samples()
            .iter()
            .zip(seq.samples())
            .map(|(a, b)| a.accel[0] - b.accel[0])
            .sum::<f64>()
            / n;
        assert!((shift - 0.3).abs() < 1e-12);
        assert_eq!(shifted.truth(), seq.truth());

        let noisy = SensorDeltas {
            gyro_noise_density: 0.01,
            ..Default::default()
        };
        assert_eq!(augment(&seq, &noisy, 9).unwrap(), augment(&seq, &noisy, 9).unwrap());
        assert_ne!(augment(&seq, &noisy, 9).unwrap(), augment(&seq, &noisy, 10).unwrap());
    }

    #[test]
    fn mirrored_flights_stay_kinematically_consistent() {
        use crate::filters::{gyro_integrate, InitialState};
        let tr = generate_trajectory(&TrajectoryConfig {
            duration: 5.0,
            yaw_amplitude: 0.5,
            seed: 11,
            ..Default::default()
        })
        .unwrap();
        let seq = synthesize_imu(&tr, &SensorModel::ideal()).unwrap();
        let all = mirror_augment(std::slice::from_ref(&seq)).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(all[0], seq);
        // Gyro integration drifts from the mirrored truth exactly as it
        // drifts from the original.
        let worst = |m: &Sequence| {
            gyro_integrate(m, InitialState::Truth)
                .iter()
                .zip(m.truth())
                .map(|(e, t)| (e.pitch - t.pitch).abs().max((e.roll - t.roll).abs()))
                .fold(0.0, f64::max)
        };
        let base = worst(&seq);
        assert!(base < 0.01);
        for m in &all[1..] {
            assert!((worst(m) - base).abs() < 1e-12);
        }
        assert_eq!(mirror(&all[3], true, true).unwrap(), seq);
    }
}
