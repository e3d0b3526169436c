use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{abs_errors_deg, mean_error, Estimator, ErrorStats, SnnEstimator};
use crate::domain::{ImuSample, Sequence, GRAVITY};
use crate::error::{Error, Result};
use crate::filters::InitialState;
use crate::sim::{split_ordered, Split};
use crate::snn::{network_forward, prune, NeuronActivity};

/// Flights from one data source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceGroup {
    pub name: String,
    pub sequences: Vec<Sequence>,
}

/// Sequences of one fold as `(group, index)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub name: String,
    pub train: Vec<(usize, usize)>,
    pub val: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
}

impl FoldSpec {
    fn resolve<'a>(groups: &'a [SourceGroup], ix: &[(usize, usize)]) -> Vec<&'a Sequence> {
        ix.iter().map(|&(g, i)| &groups[g].sequences[i]).collect()
    }
}

/// Mean and spread of per-sequence mean errors, degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: String,
    pub n_train: usize,
    pub n_test: usize,
    pub train_mean: f64,
    pub train_sd: f64,
    pub test_mean: f64,
    pub test_sd: f64,
}

/// `k` rotated 70/20/10 folds over every group pooled per group, then one
/// cross-source fold per ordered pair of groups (train and validate on all
/// of A, 80/20, test on all of B).
pub fn kfold_folds(groups: &[SourceGroup], k: usize, seed: u64) -> Result<Vec<FoldSpec>> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData("need at least two source groups".into()));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orders: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let mut idx: Vec<usize> = (0..g.sequences.len()).collect();
            idx.shuffle(&mut rng);
            idx
        })
        .collect();

    let mut folds = Vec::new();
    for f in 0..k {
        let mut spec = FoldSpec {
            name: format!("fold{}", f + 1),
            train: vec![],
            val: vec![],
            test: vec![],
        };
        for (g, order) in orders.iter().enumerate() {
            let n = order.len();
            let mut rotated = order.clone();
            rotated.rotate_left(if n == 0 { 0 } else { (f * n / k) % n });
            let Split { train, val, test } = split_ordered(rotated);
            if train.is_empty() || val.is_empty() || test.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "group `{}` has {n} sequences, too few for a 70/20/10 split",
                    groups[g].name
                )));
            }
            spec.train.extend(train.into_iter().map(|i| (g, i)));
            spec.val.extend(val.into_iter().map(|i| (g, i)));
            spec.test.extend(test.into_iter().map(|i| (g, i)));
        }
        folds.push(spec);
    }

    for (a, ga) in groups.iter().enumerate() {
        for (b, gb) in groups.iter().enumerate() {
            if a == b {
                continue;
            }
            let order = &orders[a];
            let n_train = ((0.8 * order.len() as f64) + 0.5).floor() as usize;
            let (tr, va) = order.split_at(n_train.min(order.len()));
            if tr.is_empty() || va.is_empty() || gb.sequences.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "cross-source fold {} -> {} lacks data",
                    ga.name, gb.name
                )));
            }
            folds.push(FoldSpec {
                name: format!("{}->{}", ga.name, gb.name),
                train: tr.iter().map(|&i| (a, i)).collect(),
                val: va.iter().map(|&i| (a, i)).collect(),
                test: (0..gb.sequences.len()).map(|i| (b, i)).collect(),
            });
        }
    }
    Ok(folds)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

fn per_sequence_means(est: &dyn Estimator, seqs: &[&Sequence]) -> Result<Vec<f64>> {
    seqs.par_iter()
        .map(|s| {
            let e = abs_errors_deg(&est.estimate(s, InitialState::Uninformed)?, s.truth())?;
            Ok(e.iter().sum::<f64>() / e.len().max(1) as f64)
        })
        .collect()
}

/// Fits one estimator per fold with `fit(train, val, fold_seed)` and reports
/// train and test errors.
pub fn kfold_protocol<F>(groups: &[SourceGroup], k: usize, seed: u64, fit: F) -> Result<Vec<FoldReport>>
where
    F: Fn(&[&Sequence], &[&Sequence], u64) -> Result<Box<dyn Estimator>>,
{
    let folds = kfold_folds(groups, k, seed)?;
    let mut out = Vec::with_capacity(folds.len());
    for (f, spec) in folds.iter().enumerate() {
        let train = FoldSpec::resolve(groups, &spec.train);
        let val = FoldSpec::resolve(groups, &spec.val);
        let test = FoldSpec::resolve(groups, &spec.test);
        let est = fit(&train, &val, seed.wrapping_add(f as u64))?;
        let (train_mean, train_sd) = mean_sd(&per_sequence_means(est.as_ref(), &train)?);
        let (test_mean, test_sd) = mean_sd(&per_sequence_means(est.as_ref(), &test)?);
        out.push(FoldReport {
            fold: spec.name.clone(),
            n_train: train.len(),
            n_test: test.len(),
            train_mean,
            train_sd,
            test_mean,
            test_sd,
        });
    }
    Ok(out)
}

/// Pitch trace of one estimator from a given start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetTrace {
    pub estimator: String,
    pub dt: f64,
    /// Degrees.
    pub pitch_est: Vec<f64>,
    /// Absolute pitch error, degrees.
    pub pitch_err: Vec<f64>,
    /// Seconds until the error drops below the threshold for good; `None`
    /// if it never settles.
    pub time_to_threshold: Option<f64>,
}

/// First time after which every error is below `threshold`.
pub fn time_to_converge(errors: &[f64], dt: f64, threshold: f64) -> Option<f64> {
    let last_bad = errors.iter().rposition(|e| !(*e < threshold));
    match last_bad {
        None => Some(0.0),
        Some(k) if k + 1 < errors.len() => Some((k + 1) as f64 * dt),
        Some(_) => None,
    }
}

/// Runs each estimator from its own initial state and measures how long the
/// pitch error takes to settle below `threshold_deg`.
pub fn initial_offset_study(
    estimators: &[(&dyn Estimator, InitialState)],
    seq: &Sequence,
    threshold_deg: f64,
) -> Result<Vec<OffsetTrace>> {
    estimators
        .par_iter()
        .map(|(est, init)| {
            let trace = est.estimate(seq, *init)?;
            let pitch_est: Vec<f64> = trace.iter().map(|a| a.pitch.to_degrees()).collect();
            let pitch_err: Vec<f64> = trace
                .iter()
                .zip(seq.truth())
                .map(|(a, b)| (a.pitch - b.pitch).abs().to_degrees())
                .collect();
            Ok(OffsetTrace {
                estimator: est.name(),
                dt: seq.dt(),
                time_to_threshold: time_to_converge(&pitch_err, seq.dt(), threshold_deg),
                pitch_est,
                pitch_err,
            })
        })
        .collect()
}

/// Fraction of timesteps on which each neuron spiked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeActivityReport {
    pub enc: Vec<f64>,
    pub hid: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ActivityRow<'a> {
    layer: &'a str,
    neuron: usize,
    fraction: f64,
}

impl SpikeActivityReport {
    /// Step-weighted mean of two reports over disjoint data.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.enc.len() != other.enc.len() || self.hid.len() != other.hid.len() {
            return Err(Error::DimensionMismatch {
                what: "activity report",
                expected: self.enc.len() + self.hid.len(),
                found: other.enc.len() + other.hid.len(),
            });
        }
        let steps = self.steps + other.steps;
        let (wa, wb) = if steps == 0 {
            (0.0, 0.0)
        } else {
            (self.steps as f64 / steps as f64, other.steps as f64 / steps as f64)
        };
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect();
        Ok(Self {
            enc: mix(&self.enc, &other.enc),
            hid: mix(&self.hid, &other.hid),
            steps,
        })
    }

    pub fn activity(&self) -> NeuronActivity {
        NeuronActivity {
            enc: self.enc.clone(),
            hid: self.hid.clone(),
        }
    }

    /// Counts of all neurons (both layers) per equal-width bin on `[0, 1]`.
    pub fn histogram(&self, bins: usize) -> Vec<usize> {
        let mut h = vec![0; bins];
        if bins == 0 {
            return h;
        }
        for &f in self.enc.iter().chain(&self.hid) {
            h[((f * bins as f64) as usize).min(bins - 1)] += 1;
        }
        h
    }

    /// Share of neurons below `threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        let n = self.enc.len() + self.hid.len();
        let k = self.enc.iter().chain(&self.hid).filter(|f| **f < threshold).count();
        k as f64 / n.max(1) as f64
    }

    /// Long format: `layer,neuron,fraction`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let rows = self
            .enc
            .iter()
            .enumerate()
            .map(|(k, f)| ActivityRow { layer: "encoding", neuron: k, fraction: *f })
            .chain(
                self.hid
                    .iter()
                    .enumerate()
                    .map(|(k, f)| ActivityRow { layer: "recurrent", neuron: k, fraction: *f }),
            );
        super::write_csv_rows(rows, out)
    }
}

/// Mean firing fraction per neuron over every step of every sequence.
pub fn spike_activity(snn: &SnnEstimator, seqs: &[Sequence]) -> Result<SpikeActivityReport> {
    let p = &snn.params;
    let per: Vec<Result<(Vec<u64>, Vec<u64>, usize)>> = seqs
        .par_iter()
        .map(|s| {
            let out = network_forward(p, &snn.normalization.normalize_sequence(s)?)?;
            Ok((out.spikes.enc_counts(), out.spikes.hid_counts(), out.spikes.steps))
        })
        .collect();
    let mut enc = vec![0u64; p.n_enc()];
    let mut hid = vec![0u64; p.n_hid()];
    let mut steps = 0;
    for r in per {
        let (e, h, t) = r?;
        enc.iter_mut().zip(e).for_each(|(a, b)| *a += b);
        hid.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        steps += t;
    }
    let frac = |c: Vec<u64>| c.into_iter().map(|x| x as f64 / steps.max(1) as f64).collect();
    Ok(SpikeActivityReport {
        enc: frac(enc),
        hid: frac(hid),
        steps,
    })
}

/// Outcome of pruning at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub threshold: f64,
    pub kept_enc: usize,
    pub kept_hid: usize,
    pub pruned_fraction: f64,
    /// Mean angle error in degrees on the evaluation set; empty when the
    /// threshold wiped out a layer.
    pub mean_error: Option<f64>,
    pub note: Option<String>,
}

/// Measures activity on `calib`, prunes at each threshold and re-evaluates
/// on `eval`. An emptied layer is recorded on its row and the sweep goes on.
pub fn ablation_sweep(
    snn: &SnnEstimator,
    calib: &[Sequence],
    eval: &[Sequence],
    thresholds: &[f64],
) -> Result<Vec<AblationPoint>> {
    if calib.iter().any(|c| eval.contains(c)) {
        return Err(Error::InvalidConfig(
            "calibration and evaluation sequences must be disjoint".into(),
        ));
    }
    let activity = spike_activity(snn, calib)?.activity();
    let total = snn.params.n_enc() + snn.params.n_hid();
    thresholds
        .iter()
        .map(|&th| match prune(&snn.params, &activity, th) {
            Ok((pruned, outcome)) => {
                let est = SnnEstimator::new(pruned, snn.normalization);
                Ok(AblationPoint {
                    threshold: th,
                    kept_enc: outcome.kept_enc.len(),
                    kept_hid: outcome.kept_hid.len(),
                    pruned_fraction: outcome.removed(&snn.params) as f64 / total as f64,
                    mean_error: Some(mean_error(&est, eval, InitialState::Uninformed)?),
                    note: None,
                })
            }
            Err(e @ Error::EmptyLayer { .. }) => {
                let below = |a: &[f64]| a.iter().filter(|f| **f >= th).count();
                Ok(AblationPoint {
                    threshold: th,
                    kept_enc: below(&activity.enc),
                    kept_hid: below(&activity.hid),
                    pruned_fraction: 1.0
                        - (below(&activity.enc) + below(&activity.hid)) as f64 / total as f64,
                    mean_error: None,
                    note: Some(e.to_string()),
                })
            }
            Err(e) => Err(e),
        })
        .collect()
}

/// Sensor channels replaced before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    None,
    ZeroGyro,
    ZeroAccel,
    /// Specific force of magnitude `|a|` straight down the body z axis, as
    /// a level vehicle would read.
    GravityAccel,
}

impl InputMode {
    pub const ALL: [InputMode; 4] = [
        InputMode::None,
        InputMode::ZeroGyro,
        InputMode::ZeroAccel,
        InputMode::GravityAccel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            InputMode::None => "none",
            InputMode::ZeroGyro => "zero_gyro",
            InputMode::ZeroAccel => "zero_accel",
            InputMode::GravityAccel => "gravity_accel",
        }
    }
}

impl std::str::FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown input mode `{s}`")))
    }
}

/// Copy of `seq` with the channels of `mode` replaced.
pub fn manipulate(seq: &Sequence, mode: InputMode) -> Result<Sequence> {
    let f = |s: &ImuSample| -> ImuSample {
        let mut s = *s;
        match mode {
            InputMode::None => {}
            InputMode::ZeroGyro => s.gyro = [0.0; 3],
            InputMode::ZeroAccel => s.accel = [0.0; 3],
            InputMode::GravityAccel => {
                let n = crate::domain::norm3(s.accel);
                s.accel = [0.0, 0.0, if n > 0.0 { n } else { GRAVITY }];
            }
        }
        s
    };
    seq.with_samples(seq.samples().iter().map(f).collect())
}

/// Runs `est` on the manipulated sequence and scores it against the
/// original truth.
pub fn input_manipulation(
    est: &dyn Estimator,
    seq: &Sequence,
    mode: InputMode,
) -> Result<(Vec<crate::domain::EulerAngles>, ErrorStats)> {
    let trace = est.estimate(&manipulate(seq, mode)?, InitialState::Uninformed)?;
    let stats = ErrorStats::from_errors(abs_errors_deg(&trace, seq.truth())?);
    Ok((trace, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlopMethod {
    Snn,
    Gru,
}

/// Per-step cost of a recurrent layer of `m` units fed by `n` inputs.
pub fn flop_count(method: FlopMethod, m: u64, n: u64) -> u64 {
    match method {
        FlopMethod::Snn => m * m + m * n + 2 * m,
        FlopMethod::Gru => 3 * m * m + 3 * m * n + 3 * m,
    }
}
