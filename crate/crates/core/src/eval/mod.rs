//! Error statistics, a common estimator interface, and the studies built on
//! top of them.

mod study;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use study::{
    ablation_sweep, flop_count, initial_offset_study, input_manipulation, kfold_folds, kfold_protocol, manipulate,
    spike_activity, time_to_converge, AblationPoint, FlopMethod, FoldReport, FoldSpec, InputMode,
    OffsetTrace, SourceGroup, SpikeActivityReport,
};

use crate::domain::{EulerAngles, NormalizationSpec, Sequence};
use crate::error::{Error, Result};
use crate::filters::{run_filter, FilterParams, InitialState};
use crate::snn::{network_forward, Checkpoint, NetworkParams};

/// Absolute pitch and roll errors pooled together, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub count: usize,
}

impl ErrorStats {
    pub fn from_errors(mut errs: Vec<f64>) -> Self {
        let n = errs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = errs.iter().sum::<f64>() / n as f64;
        let sd = (errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64).sqrt();
        errs.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            errs[n / 2]
        } else {
            0.5 * (errs[n / 2 - 1] + errs[n / 2])
        };
        Self {
            mean,
            median,
            sd,
            count: n,
        }
    }
}

/// `|θ̂ − θ|` and `|φ̂ − φ|` in degrees, pitch errors first.
pub fn abs_errors_deg(est: &[EulerAngles], truth: &[EulerAngles]) -> Result<Vec<f64>> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: truth.len(),
        });
    }
    let mut e: Vec<f64> = est
        .iter()
        .zip(truth)
        .map(|(a, b)| (a.pitch - b.pitch).abs().to_degrees())
        .collect();
    e.extend(
        est.iter()
            .zip(truth)
            .map(|(a, b)| (a.roll - b.roll).abs().to_degrees()),
    );
    Ok(e)
}

pub fn angle_error_stats(est: &[EulerAngles], truth: &[EulerAngles]) -> Result<ErrorStats> {
    Ok(ErrorStats::from_errors(abs_errors_deg(est, truth)?))
}

/// Anything that turns a sequence into a pitch/roll trace.
pub trait Estimator: Sync {
    fn name(&self) -> String;

    /// `init` is ignored by estimators that cannot be seeded.
    fn estimate(&self, seq: &Sequence, init: InitialState) -> Result<Vec<EulerAngles>>;
}

impl Estimator for FilterParams {
    fn name(&self) -> String {
        match self {
            FilterParams::Complementary(p) if p.adaptive => "complementary_adaptive".into(),
            p => p.kind().name().into(),
        }
    }

    fn estimate(&self, seq: &Sequence, init: InitialState) -> Result<Vec<EulerAngles>> {
        run_filter(self, seq, init)
    }
}

/// The spiking network with its input normalization. Always starts from rest.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnEstimator {
    pub params: NetworkParams,
    pub normalization: NormalizationSpec,
}

impl SnnEstimator {
    pub fn new(params: NetworkParams, normalization: NormalizationSpec) -> Self {
        Self { params, normalization }
    }

    /// Uses the grid-snapped parameters when the checkpoint is quantized.
    pub fn from_checkpoint(ck: &Checkpoint) -> Self {
        Self::new(ck.runtime_params(), ck.normalization)
    }
}

impl Estimator for SnnEstimator {
    fn name(&self) -> String {
        "snn".into()
    }

    fn estimate(&self, seq: &Sequence, _init: InitialState) -> Result<Vec<EulerAngles>> {
        let x = self.normalization.normalize_sequence(seq)?;
        Ok(network_forward(&self.params, &x)?.estimates)
    }
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub estimator: String,
    pub sequence: String,
    pub known_initial: bool,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv_rows(&self.rows, out)
    }
}

/// Serializes `rows` as CSV with a header line.
pub fn write_csv_rows<T: Serialize, W: Write>(rows: impl IntoIterator<Item = T>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-sequence statistics plus an `all` row pooling every error.
pub fn evaluate(
    est: &dyn Estimator,
    seqs: &[(String, Sequence)],
    init: InitialState,
) -> Result<(EvalReport, ErrorStats)> {
    use rayon::prelude::*;

    if seqs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let known = !matches!(init, InitialState::Uninformed);
    let per: Vec<Result<Vec<f64>>> = seqs
        .par_iter()
        .map(|(_, s)| abs_errors_deg(&est.estimate(s, init)?, s.truth()))
        .collect();
    let mut rows = Vec::new();
    let mut pooled = Vec::new();
    for ((name, _), errs) in seqs.iter().zip(per) {
        let errs = errs?;
        let st = ErrorStats::from_errors(errs.clone());
        rows.push(EvalRow {
            estimator: est.name(),
            sequence: name.clone(),
            known_initial: known,
            mean: st.mean,
            median: st.median,
            sd: st.sd,
        });
        pooled.extend(errs);
    }
    let all = ErrorStats::from_errors(pooled);
    rows.push(EvalRow {
        estimator: est.name(),
        sequence: "all".into(),
        known_initial: known,
        mean: all.mean,
        median: all.median,
        sd: all.sd,
    });
    Ok((EvalReport { rows }, all))
}

/// Pooled mean error in degrees over a set of sequences.
pub fn mean_error(est: &dyn Estimator, seqs: &[Sequence], init: InitialState) -> Result<f64> {
    let named: Vec<(String, Sequence)> = seqs
        .iter()
        .enumerate()
        .map(|(k, s)| (k.to_string(), s.clone()))
        .collect();
    Ok(evaluate(est, &named, init)?.1.mean)
}
