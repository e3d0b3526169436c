//! Supervised training: BPTT through the spiking network with a surrogate
//! spike derivative, Adam wrapped in Lookahead, optional quantization in the
//! loop, and moving-average early stopping.

mod bptt;
mod optim;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bptt::{
    bptt_gradients, example_gradients, mse_loss, per_step_mse, superspike_grad, Example, Gradients,
    SurrogateSpec,
};
pub use optim::{Lookahead, OptimizerConfig};

use crate::error::{Error, Result};
use crate::quant::WEIGHT_SPEC;
use crate::snn::{network_forward, NetworkParams};

/// Range for uniformly drawn initial decay factors.
pub const DECAY_INIT: (f64, f64) = (0.5, 0.95);

/// Hidden synaptic decays are drawn log-uniformly in `1 - tau` over this range,
/// giving the recurrent layer a spread of memories up to ~1000 steps.
pub const HIDDEN_SYN_INIT: (f64, f64) = (0.9, 0.999);

/// Starting point used by the CLI and the reference runs. Compared with
/// [`NetworkParams::random`]: long hidden synaptic memories, a decoder with
/// moderate gain, and output weights scaled down so the initial estimate is
/// close to zero.
pub fn initial_network(n_enc: usize, n_hid: usize, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = NetworkParams::random(n_enc, n_hid, DECAY_INIT, &mut rng);
    let (lo, hi) = HIDDEN_SYN_INIT;
    for t in p.hid_lif.tau_syn.iter_mut() {
        let u: f64 = rng.random_range(0.0..1.0);
        *t = 1.0 - (1.0 - lo) * ((1.0 - hi) / (1.0 - lo)).powf(u);
    }
    p.out_li.tau_mem = 0.8;
    p.out_li.tau_syn = 0.2;
    p.out_weights.map_in_place(|w| w * 0.3);
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub stop_window: usize,
    pub stop_ratio: f64,
    pub stop_patience: usize,
    pub quantize_in_loop: bool,
    pub max_epochs: usize,
    /// The moving-average rule is not applied before this epoch.
    pub min_epochs: usize,
    pub seed: u64,
    /// Train on random windows of this many steps instead of whole sequences.
    pub window: Option<usize>,
    pub divergence_limit: f64,
    pub surrogate: SurrogateSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batches_per_epoch: 15,
            batch_size: 40,
            stop_window: 20,
            stop_ratio: 1.10,
            stop_patience: 50,
            quantize_in_loop: true,
            max_epochs: 500,
            min_epochs: 20,
            seed: 42,
            window: None,
            divergence_limit: 1e6,
            surrogate: SurrogateSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batches_per_epoch", self.batches_per_epoch),
            ("batch_size", self.batch_size),
            ("stop_window", self.stop_window),
            ("stop_patience", self.stop_patience),
            ("max_epochs", self.max_epochs),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.stop_ratio > 0.0) {
            return Err(Error::InvalidConfig("stop_ratio must be positive".into()));
        }
        if self.window == Some(0) {
            return Err(Error::InvalidConfig("window must be positive".into()));
        }
        if !(self.surrogate.width > 0.0) {
            return Err(Error::InvalidConfig("surrogate width must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Per-step MSE averaged over the epoch's batches.
    pub train_loss: f64,
    /// Per-step MSE over the validation set.
    pub val_loss: f64,
    pub val_moving_avg: f64,
    pub stopped: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Full-resolution parameters of the best validation epoch.
    pub params: NetworkParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

pub fn write_train_log<W: Write>(history: &[EpochRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for r in history {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Parameters the forward pass sees: the hardware-grid copy under QAT.
pub fn effective_params(master: &NetworkParams, quantize_in_loop: bool) -> NetworkParams {
    if quantize_in_loop {
        master.quantized()
    } else {
        master.clone()
    }
}

/// Per-step MSE averaged over examples.
pub fn evaluate_loss(params: &NetworkParams, examples: &[Example]) -> Result<f64> {
    use rayon::prelude::*;

    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let losses: Vec<Result<f64>> = examples
        .par_iter()
        .map(|ex| {
            let out = network_forward(params, &ex.inputs)?;
            per_step_mse(&out.estimates, &ex.targets)
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / examples.len() as f64)
}

const DECAY_EPS: f64 = 1e-6;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(DECAY_EPS, 1.0 - DECAY_EPS);
    (p / (1.0 - p)).ln()
}

/// Number of leading weight entries in the raw vector.
fn weight_len(p: &NetworkParams) -> usize {
    p.weight_matrices().iter().map(|m| m.len()).sum()
}

/// Unconstrained optimizer vector: weights as they are, decays as logits.
/// Layout follows [`Gradients::blocks`].
fn to_raw(p: &NetworkParams) -> Vec<f64> {
    let mut raw = Vec::new();
    for m in p.weight_matrices() {
        raw.extend_from_slice(m.as_slice());
    }
    for d in decays(p) {
        raw.push(logit(d));
    }
    raw
}

fn decays(p: &NetworkParams) -> Vec<f64> {
    let mut d = Vec::new();
    for l in [&p.enc_lif, &p.hid_lif] {
        d.extend_from_slice(&l.tau_mem);
        d.extend_from_slice(&l.tau_syn);
    }
    d.push(p.out_li.tau_mem);
    d.push(p.out_li.tau_syn);
    d
}

fn decay_slots(p: &mut NetworkParams) -> Vec<&mut f64> {
    let mut s: Vec<&mut f64> = Vec::new();
    let NetworkParams {
        enc_lif,
        hid_lif,
        out_li,
        ..
    } = p;
    s.extend(enc_lif.tau_mem.iter_mut());
    s.extend(enc_lif.tau_syn.iter_mut());
    s.extend(hid_lif.tau_mem.iter_mut());
    s.extend(hid_lif.tau_syn.iter_mut());
    s.push(&mut out_li.tau_mem);
    s.push(&mut out_li.tau_syn);
    s
}

/// Writes changed raw entries back. Untouched decays keep their exact value
/// rather than a sigmoid/logit round trip.
fn apply_raw(p: &mut NetworkParams, old: &[f64], new: &[f64]) {
    let nw = weight_len(p);
    let mut k = 0;
    for m in p.weight_matrices_mut() {
        for w in m.as_mut_slice() {
            *w = new[k];
            k += 1;
        }
    }
    for (slot, (o, n)) in decay_slots(p).into_iter().zip(old[nw..].iter().zip(&new[nw..])) {
        if o != n {
            *slot = sigmoid(*n);
        }
    }
}

/// Chain rule from effective-parameter gradients to the raw vector. The
/// quantizer passes gradients straight through.
fn raw_gradient(p: &NetworkParams, g: &Gradients) -> Vec<f64> {
    let mut raw = g.flatten();
    let nw = weight_len(p);
    for (r, tau) in raw[nw..].iter_mut().zip(decays(p)) {
        *r *= tau * (1.0 - tau);
    }
    raw
}

fn sample_batch(train: &[Example], cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Example>> {
    let mut idx: Vec<usize> = (0..train.len()).collect();
    idx.shuffle(rng);
    idx.truncate(cfg.batch_size.min(train.len()));
    idx.into_iter()
        .map(|k| {
            let ex = &train[k];
            match cfg.window {
                None => Ok(ex.clone()),
                Some(w) if ex.len() < w => Err(Error::InsufficientData(format!(
                    "training sequence of {} steps is shorter than the {w}-step window",
                    ex.len()
                ))),
                Some(w) => {
                    let start = rng.random_range(0..=ex.len() - w);
                    Ok(ex.slice(start, w))
                }
            }
        })
        .collect()
}

/// Moving-average overfitting detector: fires once the mean validation loss
/// of the last `stop_window` epochs exceeds `stop_ratio` times the lowest
/// such mean seen so far.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    window: usize,
    ratio: f64,
    min_epochs: usize,
    recent: std::collections::VecDeque<f64>,
    lowest: f64,
}

impl EarlyStopping {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            window: cfg.stop_window,
            ratio: cfg.stop_ratio,
            min_epochs: cfg.min_epochs,
            recent: Default::default(),
            lowest: f64::INFINITY,
        }
    }

    /// Records one epoch; returns the current moving average and whether
    /// to stop.
    pub fn update(&mut self, epoch: usize, val_loss: f64) -> (f64, bool) {
        self.recent.push_back(val_loss);
        if self.recent.len() > self.window {
            self.recent.pop_front();
        }
        let avg = self.recent.iter().sum::<f64>() / self.recent.len() as f64;
        if self.recent.len() < self.window {
            return (avg, false);
        }
        self.lowest = self.lowest.min(avg);
        (avg, epoch >= self.min_epochs && avg > self.ratio * self.lowest)
    }
}

pub fn train(
    params: &NetworkParams,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
    opt: &OptimizerConfig,
) -> Result<TrainOutcome> {
    train_with_observer(params, train_set, val_set, cfg, opt, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_observer(
    params: &NetworkParams,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
    opt: &OptimizerConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    opt.validate()?;
    params.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut master = params.clone();
    let mut raw = to_raw(&master);
    let mut optimizer = Lookahead::new(*opt, &raw);
    let nw = weight_len(&master);
    let (w_lo, w_hi) = (
        WEIGHT_SPEC.dequantize(WEIGHT_SPEC.k_min()),
        WEIGHT_SPEC.dequantize(WEIGHT_SPEC.k_max()),
    );

    let mut history: Vec<EpochRecord> = Vec::new();
    let mut best = (master.clone(), 0usize, f64::INFINITY);
    let mut stopper = EarlyStopping::new(cfg);

    for epoch in 1..=cfg.max_epochs {
        let mut train_loss = 0.0;
        for _ in 0..cfg.batches_per_epoch {
            let batch = sample_batch(train_set, cfg, &mut rng)?;
            let eff = effective_params(&master, cfg.quantize_in_loop);
            let (loss, grads) = bptt_gradients(&eff, &batch, cfg.surrogate)?;
            let per_step = loss / batch[0].len().max(1) as f64;
            if !per_step.is_finite() || per_step > cfg.divergence_limit {
                return Err(Error::Divergence { loss: per_step });
            }
            train_loss += per_step;
            let g = raw_gradient(&master, &grads);
            let old = raw.clone();
            optimizer.step(&mut raw, &g);
            if cfg.quantize_in_loop {
                // Masters outside the grid range would all quantize to the
                // same saturated value and stop receiving useful updates.
                for w in &mut raw[..nw] {
                    *w = w.clamp(w_lo, w_hi);
                }
                optimizer.project_slow(|k, v| if k < nw { v.clamp(w_lo, w_hi) } else { v });
            }
            apply_raw(&mut master, &old, &raw);
        }
        train_loss /= cfg.batches_per_epoch as f64;

        let val_loss = evaluate_loss(&effective_params(&master, cfg.quantize_in_loop), val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence { loss: val_loss });
        }
        if val_loss < best.2 {
            best = (master.clone(), epoch, val_loss);
        }
        let (val_moving_avg, overfit) = stopper.update(epoch, val_loss);
        let stale = epoch - best.1 >= cfg.stop_patience;
        let stopped = overfit || stale || epoch == cfg.max_epochs;

        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_moving_avg,
            stopped,
        };
        observer(&record);
        history.push(record);
        if stopped {
            break;
        }
    }

    Ok(TrainOutcome {
        params: best.0,
        history,
        best_epoch: best.1,
        best_val_loss: best.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EulerAngles;

    fn toy_examples(seed: u64, n: usize, len: usize) -> Vec<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(-0.5..0.5);
                let b: f64 = rng.random_range(-0.5..0.5);
                Example {
                    inputs: (0..len).map(|_| [a, b, 0.0, -a, b, 0.5]).collect(),
                    targets: vec![EulerAngles::new(0.3 * a, 0.3 * b); len],
                }
            })
            .collect()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batches_per_epoch: 2,
            batch_size: 4,
            max_epochs: 5,
            ..Default::default()
        }
    }

    fn net(seed: u64) -> NetworkParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = NetworkParams::random(6, 6, (0.6, 0.95), &mut rng);
        for m in p.weight_matrices_mut() {
            m.map_in_place(|w| 2.0 * w);
        }
        p
    }

    #[test]
    fn raw_round_trip_keeps_untouched_values() {
        let p = net(1);
        let raw = to_raw(&p);
        let mut q = p.clone();
        apply_raw(&mut q, &raw, &raw);
        assert_eq!(q, p);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let p = net(2);
        let data = toy_examples(3, 6, 20);
        let opt = OptimizerConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let out = train(&p, &data, &data[..2], &small_cfg(), &opt).unwrap();
        assert_eq!(out.params, p);
    }

    #[test]
    fn same_seed_same_history() {
        let p = net(4);
        let data = toy_examples(5, 8, 20);
        let cfg = small_cfg();
        let a = train(&p, &data, &data[..3], &cfg, &OptimizerConfig::default()).unwrap();
        let b = train(&p, &data, &data[..3], &cfg, &OptimizerConfig::default()).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn returns_best_validation_params() {
        let p = net(6);
        let data = toy_examples(7, 8, 20);
        let cfg = TrainConfig {
            max_epochs: 8,
            ..small_cfg()
        };
        let out = train(&p, &data, &data[..3], &cfg, &OptimizerConfig::default()).unwrap();
        let min = out.history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_val_loss, min);
        let again = evaluate_loss(&effective_params(&out.params, true), &data[..3]).unwrap();
        assert_eq!(again, min);
        assert!(out.history.last().unwrap().stopped);
    }

    #[test]
    fn patience_stops_training() {
        let p = net(8);
        let data = toy_examples(9, 4, 10);
        let cfg = TrainConfig {
            max_epochs: 1000,
            stop_patience: 3,
            ..small_cfg()
        };
        let opt = OptimizerConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let out = train(&p, &data, &data, &cfg, &opt).unwrap();
        // Constant validation loss: best stays at epoch 1.
        assert_eq!(out.history.len(), 4);
    }

    #[test]
    fn decoder_decays_stay_shared() {
        let p = net(10);
        let data = toy_examples(11, 6, 20);
        let out = train(&p, &data, &data[..2], &small_cfg(), &OptimizerConfig::default()).unwrap();
        // Shared by construction: one scalar pair drives both output neurons.
        let (_, neurons) = out.params.parameter_counts();
        assert_eq!(neurons, 2 * 6 + 2 * 6 + 2);
        assert!((0.0..=1.0).contains(&out.params.out_li.tau_mem));
    }

    #[test]
    fn empty_sets_rejected() {
        let p = net(12);
        let data = toy_examples(13, 2, 5);
        let cfg = small_cfg();
        let opt = OptimizerConfig::default();
        assert!(matches!(train(&p, &[], &data, &cfg, &opt), Err(Error::EmptyDataset)));
        assert!(matches!(train(&p, &data, &[], &cfg, &opt), Err(Error::EmptyDataset)));
    }

    #[test]
    fn qat_masters_stay_in_weight_range() {
        let p = net(14);
        let data = toy_examples(15, 6, 20);
        let opt = OptimizerConfig {
            learning_rate: 0.5,
            ..Default::default()
        };
        let out = train(&p, &data, &data[..2], &small_cfg(), &opt).unwrap();
        for m in out.params.weight_matrices() {
            assert!(m.as_slice().iter().all(|w| (-1.0..=1.0).contains(w)));
        }
    }

    #[test]
    fn moving_average_rule() {
        let cfg = TrainConfig {
            stop_window: 3,
            min_epochs: 0,
            ..Default::default()
        };
        let mut es = EarlyStopping::new(&cfg);
        // Early high losses never trigger on their own.
        for (e, v) in [10.0, 5.0, 1.0, 1.0, 1.0].into_iter().enumerate() {
            assert!(!es.update(e + 1, v).1);
        }
        assert!(!es.update(6, 1.2).1); // avg 1.0667
        let (avg, stop) = es.update(7, 1.2); // avg 1.1333 > 1.1
        assert!((avg - 3.4 / 3.0).abs() < 1e-12);
        assert!(stop);
    }

    #[test]
    fn log_csv_header() {
        let rows = vec![EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            val_loss: 0.25,
            val_moving_avg: 0.25,
            stopped: true,
        }];
        let mut buf = Vec::new();
        write_train_log(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("epoch,train_loss,val_loss,val_moving_avg,stopped\n"));
        assert!(s.contains("1,0.5,0.25,0.25,true"));
    }

    #[test]
    fn initial_network_is_seeded_and_in_range() {
        let p = initial_network(6, 9, 3);
        assert_eq!(p, initial_network(6, 9, 3));
        assert_ne!(p, initial_network(6, 9, 4));
        let (lo, hi) = HIDDEN_SYN_INIT;
        assert!(p.hid_lif.tau_syn.iter().all(|t| (lo..=hi).contains(t)));
        assert!(p.enc_lif.tau_mem.iter().all(|t| (DECAY_INIT.0..=DECAY_INIT.1).contains(t)));
        assert_eq!((p.out_li.tau_mem, p.out_li.tau_syn), (0.8, 0.2));
        let bound = 0.3 / (9f64).sqrt();
        assert!(p.out_weights.as_slice().iter().all(|w| w.abs() <= bound + 1e-15));
    }
}
