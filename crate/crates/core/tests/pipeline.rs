//! End-to-end checks across modules: simulator kinematics against an
//! independent integrator, and a dataset -> train -> checkpoint -> eval
//! round trip.

use nalgebra::{Quaternion as NQuat, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use neuro_attitude::dataset::{read_dir, write_sequence_file};
use neuro_attitude::domain::NormalizationSpec;
use neuro_attitude::eval::{evaluate, mean_error, SnnEstimator};
use neuro_attitude::filters::{ComplementaryParams, FilterParams, InitialState};
use neuro_attitude::sim::{generate_dataset, generate_trajectory, split_70_20_10, DataSource, DatasetSpec, TrajectoryConfig};
use neuro_attitude::snn::{Checkpoint, NetworkParams};
use neuro_attitude::train::{train, Example, OptimizerConfig, TrainConfig, DECAY_INIT};

fn rate(q: NQuat<f64>, w: [f64; 3]) -> NQuat<f64> {
    q * NQuat::new(0.0, w[0], w[1], w[2]) * 0.5
}

#[test]
fn body_rates_integrate_to_ground_truth_over_100_s() {
    // Sampled at 4 kHz so every RK4 step of 2 samples has its midpoint rate.
    let tr = generate_trajectory(&TrajectoryConfig {
        duration: 100.0,
        rate: 4000.0,
        yaw_amplitude: 0.5,
        seed: 21,
        ..Default::default()
    })
    .unwrap();
    let a0 = tr.angles[0];
    let mut q = *UnitQuaternion::from_euler_angles(a0.roll, a0.pitch, tr_yaw(&tr, 0)).quaternion();
    let h = 2.0 * tr.dt;
    let mut worst: f64 = 0.0;
    let mut k = 0;
    while k + 2 < tr.len() {
        let (w0, w1, w2) = (tr.body_rates[k], tr.body_rates[k + 1], tr.body_rates[k + 2]);
        let k1 = rate(q, w0);
        let k2 = rate(q + k1 * (h / 2.0), w1);
        let k3 = rate(q + k2 * (h / 2.0), w1);
        let k4 = rate(q + k3 * h, w2);
        q = (q + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)).normalize();
        k += 2;
        let (roll, pitch, _) = UnitQuaternion::new_unchecked(q).euler_angles();
        let t = tr.angles[k];
        worst = worst.max((pitch - t.pitch).abs()).max((roll - t.roll).abs());
    }
    assert!(worst < 1e-6, "integrated attitude drifted {worst:.2e} rad");
}

fn tr_yaw(tr: &neuro_attitude::sim::TruthTrace, k: usize) -> f64 {
    tr.attitude[k].to_euler_zyx().2
}

#[test]
fn dataset_to_checkpoint_round_trip() {
    let spec = DatasetSpec::preset(DataSource::Sim, 6, 2.0);
    let (seqs, _) = generate_dataset(&spec, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (k, s) in seqs.iter().enumerate() {
        write_sequence_file(&dir.path().join(format!("f{k}.csv")), s).unwrap();
    }
    let back = read_dir(dir.path()).unwrap();
    assert_eq!(back, seqs);

    let split = split_70_20_10(back.len(), 8);
    let (tr, va, te) = split.pick(&back);
    let tr: Vec<_> = tr.into_iter().cloned().collect();
    let norm = NormalizationSpec::fit(&tr, 0.05).unwrap();
    let ex = |s: &[&neuro_attitude::domain::Sequence]| -> Vec<Example> {
        s.iter().map(|q| Example::from_sequence(q, &norm).unwrap()).collect()
    };
    let p0 = NetworkParams::random(8, 8, DECAY_INIT, &mut ChaCha8Rng::seed_from_u64(8));
    let cfg = TrainConfig {
        max_epochs: 3,
        batches_per_epoch: 2,
        ..Default::default()
    };
    let out = train(&p0, &ex(&tr.iter().collect::<Vec<_>>()), &ex(&va), &cfg, &OptimizerConfig::default()).unwrap();
    assert_eq!(out.history.len(), 3);

    let ck = Checkpoint::new(out.params.clone(), norm, true);
    let path = dir.path().join("ck.json");
    ck.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded, ck);

    // The reloaded estimator scores exactly like the in-memory one.
    let test: Vec<_> = te.into_iter().cloned().collect();
    let a = mean_error(&SnnEstimator::from_checkpoint(&ck), &test, InitialState::Uninformed).unwrap();
    let b = mean_error(&SnnEstimator::from_checkpoint(&loaded), &test, InitialState::Uninformed).unwrap();
    assert_eq!(a, b);

    let named: Vec<(String, _)> = test.iter().enumerate().map(|(k, s)| (format!("t{k}"), s.clone())).collect();
    let cf = FilterParams::Complementary(ComplementaryParams::plain(0.98));
    let (report, pooled) = evaluate(&cf, &named, InitialState::Truth).unwrap();
    assert_eq!(report.rows.len(), named.len() + 1);
    assert!(pooled.mean.is_finite() && pooled.mean >= 0.0);
}
