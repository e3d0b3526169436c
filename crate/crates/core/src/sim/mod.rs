//! Synthetic quadrotor flights: an analytic attitude program, a point-mass
//! response under a quasi-static thrust model, and a noisy biased IMU.

mod sensor;
mod trajectory;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use sensor::{augment, mirror, mirror_augment, synthesize_imu, SensorDeltas, SensorModel};
pub use trajectory::{generate_trajectory, AttitudeProgram, Maneuver, TrajectoryConfig, TruthTrace};

use crate::domain::Sequence;
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "neuro-attitude/manifest/v1";

/// Two data flavours standing in for simulated and real flights. The second
/// has yaw motion, stronger noise and larger turn-on biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Sim,
    Px4Like,
}

impl DataSource {
    pub fn name(&self) -> &'static str {
        match self {
            DataSource::Sim => "sim",
            DataSource::Px4Like => "px4",
        }
    }
}

/// Recipe for a set of flights. Each flight gets its own trajectory seed,
/// noise seed and biases drawn from zero-mean normals with the given spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub source: DataSource,
    pub n: usize,
    pub trajectory: TrajectoryConfig,
    pub sensor: SensorModel,
    pub gyro_bias_sd: f64,
    pub accel_bias_sd: f64,
}

impl DatasetSpec {
    pub fn preset(source: DataSource, n: usize, duration: f64) -> Self {
        match source {
            DataSource::Sim => Self {
                source,
                n,
                trajectory: TrajectoryConfig {
                    duration,
                    ..Default::default()
                },
                sensor: SensorModel::default(),
                gyro_bias_sd: 0.005,
                accel_bias_sd: 0.1,
            },
            DataSource::Px4Like => Self {
                source,
                n,
                trajectory: TrajectoryConfig {
                    duration,
                    yaw_amplitude: 0.5,
                    drag: 0.4,
                    ..Default::default()
                },
                sensor: SensorModel {
                    gyro_noise_density: 0.005,
                    accel_noise_density: 0.04,
                    ..Default::default()
                },
                gyro_bias_sd: 0.01,
                accel_bias_sd: 0.2,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub trajectory_seed: u64,
    pub sensor: SensorModel,
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub seed: u64,
    pub spec: DatasetSpec,
    pub sequences: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Format(format!("cannot parse manifest: {e}")))?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!("unexpected manifest format `{}`", m.format)));
        }
        Ok(m)
    }
}

/// Builds the flights of `spec`; all randomness derives from `seed`.
pub fn generate_dataset(spec: &DatasetSpec, seed: u64) -> Result<(Vec<Sequence>, Manifest)> {
    use rayon::prelude::*;

    spec.trajectory.validate()?;
    spec.sensor.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gyro = Normal::new(0.0, spec.gyro_bias_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let accel = Normal::new(0.0, spec.accel_bias_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let entries: Vec<ManifestEntry> = (0..spec.n)
        .map(|i| {
            let trajectory_seed = rng.random();
            let sensor = SensorModel {
                gyro_bias: std::array::from_fn(|_| gyro.sample(&mut rng)),
                accel_bias: std::array::from_fn(|_| accel.sample(&mut rng)),
                seed: rng.random(),
                ..spec.sensor.clone()
            };
            ManifestEntry {
                file: format!("{}_{i:03}.csv", spec.source.name()),
                trajectory_seed,
                sensor,
            }
        })
        .collect();
    let seqs: Result<Vec<Sequence>> = entries
        .par_iter()
        .map(|e| regenerate(spec, e))
        .collect();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        seed,
        spec: spec.clone(),
        sequences: entries,
    };
    Ok((seqs?, manifest))
}

/// One flight from its manifest entry.
pub fn regenerate(spec: &DatasetSpec, entry: &ManifestEntry) -> Result<Sequence> {
    let cfg = TrajectoryConfig {
        seed: entry.trajectory_seed,
        ..spec.trajectory.clone()
    };
    synthesize_imu(&generate_trajectory(&cfg)?, &entry.sensor)
}

/// Disjoint index partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn pick<'a, T>(&self, items: &'a [T]) -> (Vec<&'a T>, Vec<&'a T>, Vec<&'a T>) {
        let get = |ix: &[usize]| ix.iter().map(|&i| &items[i]).collect();
        (get(&self.train), get(&self.val), get(&self.test))
    }
}

/// Shuffled 70/20/10 partition of `0..n`; counts are rounded and the test
/// set takes the remainder.
pub fn split_70_20_10(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    split_ordered(idx)
}

/// 70/20/10 partition of an already ordered index list.
pub fn split_ordered(mut idx: Vec<usize>) -> Split {
    let n = idx.len();
    let n_train = ((0.7 * n as f64) + 0.5).floor() as usize;
    let n_val = (((0.2 * n as f64) + 0.5).floor() as usize).min(n - n_train);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Split { train: idx, val, test }
}
