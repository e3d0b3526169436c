use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lif::{li_neuron, lif_neuron, LiDecays, LifParams, UpdateOrder};
use super::matrix::Matrix;
use crate::domain::{EulerAngles, IMU_CHANNELS};
use crate::error::{Error, Result};
use crate::quant::{DECAY_SPEC, WEIGHT_SPEC};

/// Number of decoder neurons: pitch, then roll.
pub const N_OUT: usize = 2;

/// Firing threshold used for every spiking neuron.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// All trainable and fixed parameters of the encoder → recurrent → decoder network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// `n_enc × 6`.
    pub enc_weights: Matrix,
    /// `n_hid × n_enc`.
    pub hid_weights_ff: Matrix,
    /// `n_hid × n_hid`; column `j` carries neuron `j`'s spike from the previous step.
    pub hid_weights_rec: Matrix,
    /// `2 × n_hid`.
    pub out_weights: Matrix,
    pub enc_lif: LifParams,
    pub hid_lif: LifParams,
    pub out_li: LiDecays,
    #[serde(default)]
    pub update_order: UpdateOrder,
}

impl NetworkParams {
    /// All weights zero, uniform decays, threshold 0.5.
    pub fn zeros(n_enc: usize, n_hid: usize) -> Self {
        Self {
            enc_weights: Matrix::zeros(n_enc, IMU_CHANNELS),
            hid_weights_ff: Matrix::zeros(n_hid, n_enc),
            hid_weights_rec: Matrix::zeros(n_hid, n_hid),
            out_weights: Matrix::zeros(N_OUT, n_hid),
            enc_lif: LifParams::uniform(n_enc, 0.9, 0.8, DEFAULT_THRESHOLD),
            hid_lif: LifParams::uniform(n_hid, 0.9, 0.8, DEFAULT_THRESHOLD),
            out_li: LiDecays {
                tau_mem: 0.95,
                tau_syn: 0.5,
            },
            update_order: UpdateOrder::default(),
        }
    }

    /// Weights uniform in `±1/√fan_in`, decays uniform in `decay_range`.
    pub fn random<R: Rng + ?Sized>(
        n_enc: usize,
        n_hid: usize,
        decay_range: (f64, f64),
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(n_enc, n_hid);
        let fill = |m: &mut Matrix, fan_in: usize, rng: &mut R| {
            let b = 1.0 / (fan_in.max(1) as f64).sqrt();
            for w in m.as_mut_slice() {
                *w = rng.random_range(-b..=b);
            }
        };
        fill(&mut p.enc_weights, IMU_CHANNELS, rng);
        fill(&mut p.hid_weights_ff, n_enc + n_hid, rng);
        fill(&mut p.hid_weights_rec, n_enc + n_hid, rng);
        fill(&mut p.out_weights, n_hid, rng);
        let (lo, hi) = decay_range;
        for layer in [&mut p.enc_lif, &mut p.hid_lif] {
            for t in layer.tau_mem.iter_mut().chain(layer.tau_syn.iter_mut()) {
                *t = rng.random_range(lo..=hi);
            }
        }
        p
    }

    pub fn n_enc(&self) -> usize {
        self.enc_lif.len()
    }

    pub fn n_hid(&self) -> usize {
        self.hid_lif.len()
    }

    /// `(weights, neuron parameters)`: decays are counted per neuron, plus
    /// the two shared decoder decays. Thresholds are fixed and not counted.
    pub fn parameter_counts(&self) -> (usize, usize) {
        let weights = self.enc_weights.len()
            + self.hid_weights_ff.len()
            + self.hid_weights_rec.len()
            + self.out_weights.len();
        let neurons = 2 * self.n_enc() + 2 * self.n_hid() + 2;
        (weights, neurons)
    }

    pub fn validate(&self) -> Result<()> {
        let (ne, nh) = (self.n_enc(), self.n_hid());
        let shapes = [
            ("enc_weights", self.enc_weights.shape(), (ne, IMU_CHANNELS)),
            ("hid_weights_ff", self.hid_weights_ff.shape(), (nh, ne)),
            ("hid_weights_rec", self.hid_weights_rec.shape(), (nh, nh)),
            ("out_weights", self.out_weights.shape(), (N_OUT, nh)),
        ];
        for (what, found, expected) in shapes {
            if found.0 != expected.0 {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: expected.0,
                    found: found.0,
                });
            }
            if found.1 != expected.1 {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: expected.1,
                    found: found.1,
                });
            }
        }
        self.enc_lif.validate()?;
        self.hid_lif.validate()?;
        let d = self.out_li;
        if !(0.0..=1.0).contains(&d.tau_mem) || !(0.0..=1.0).contains(&d.tau_syn) {
            return Err(Error::InvalidConfig("decoder decays must lie in [0, 1]".into()));
        }
        for m in self.weight_matrices() {
            if !m.all_finite() {
                return Err(Error::InvalidConfig("non-finite weight".into()));
            }
        }
        Ok(())
    }

    pub fn weight_matrices(&self) -> [&Matrix; 4] {
        [
            &self.enc_weights,
            &self.hid_weights_ff,
            &self.hid_weights_rec,
            &self.out_weights,
        ]
    }

    pub fn weight_matrices_mut(&mut self) -> [&mut Matrix; 4] {
        [
            &mut self.enc_weights,
            &mut self.hid_weights_ff,
            &mut self.hid_weights_rec,
            &mut self.out_weights,
        ]
    }

    /// Copy with every weight and decay snapped to the hardware grid.
    /// Thresholds are left as they are.
    pub fn quantized(&self) -> Self {
        let mut q = self.clone();
        for m in q.weight_matrices_mut() {
            WEIGHT_SPEC.quantize_in_place(m.as_mut_slice());
        }
        for layer in [&mut q.enc_lif, &mut q.hid_lif] {
            DECAY_SPEC.quantize_in_place(&mut layer.tau_mem);
            DECAY_SPEC.quantize_in_place(&mut layer.tau_syn);
        }
        q.out_li.tau_mem = DECAY_SPEC.quantize(q.out_li.tau_mem);
        q.out_li.tau_syn = DECAY_SPEC.quantize(q.out_li.tau_syn);
        q
    }

    /// True if every weight and decay lies on its hardware grid.
    pub fn is_on_grid(&self) -> bool {
        let weights = self
            .weight_matrices()
            .iter()
            .all(|m| m.as_slice().iter().all(|w| WEIGHT_SPEC.is_on_grid(*w)));
        let decays = [&self.enc_lif, &self.hid_lif].iter().all(|l| {
            l.tau_mem
                .iter()
                .chain(&l.tau_syn)
                .all(|t| DECAY_SPEC.is_on_grid(*t))
        });
        weights
            && decays
            && DECAY_SPEC.is_on_grid(self.out_li.tau_mem)
            && DECAY_SPEC.is_on_grid(self.out_li.tau_syn)
    }
}

/// Spike trains of both spiking layers, one byte per neuron per step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeRecord {
    pub steps: usize,
    pub n_enc: usize,
    pub n_hid: usize,
    pub enc: Vec<u8>,
    pub hid: Vec<u8>,
}

impl SpikeRecord {
    fn with_capacity(steps: usize, n_enc: usize, n_hid: usize) -> Self {
        Self {
            steps: 0,
            n_enc,
            n_hid,
            enc: Vec::with_capacity(steps * n_enc),
            hid: Vec::with_capacity(steps * n_hid),
        }
    }

    pub fn enc_at(&self, t: usize) -> &[u8] {
        &self.enc[t * self.n_enc..(t + 1) * self.n_enc]
    }

    pub fn hid_at(&self, t: usize) -> &[u8] {
        &self.hid[t * self.n_hid..(t + 1) * self.n_hid]
    }

    fn counts(data: &[u8], n: usize) -> Vec<u64> {
        let mut c = vec![0u64; n];
        if n == 0 {
            return c;
        }
        for row in data.chunks_exact(n) {
            for (ci, s) in c.iter_mut().zip(row) {
                *ci += *s as u64;
            }
        }
        c
    }

    pub fn enc_counts(&self) -> Vec<u64> {
        Self::counts(&self.enc, self.n_enc)
    }

    pub fn hid_counts(&self) -> Vec<u64> {
        Self::counts(&self.hid, self.n_hid)
    }
}

/// Estimates plus spike trains of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub estimates: Vec<EulerAngles>,
    pub spikes: SpikeRecord,
}

/// Per-step internals kept for backpropagation through time.
#[derive(Debug, Default)]
pub(crate) struct LayerTrace {
    /// Pre-reset membrane potential, `T × n`.
    pub u: Vec<f64>,
    /// Synaptic current after the step, `T × n`.
    pub i: Vec<f64>,
    /// Indices of spiking neurons per step, flattened; `offsets` has `T + 1` entries.
    pub active: Vec<u32>,
    pub offsets: Vec<usize>,
}

impl LayerTrace {
    fn clear(&mut self) {
        self.u.clear();
        self.i.clear();
        self.active.clear();
        self.offsets.clear();
        self.offsets.push(0);
    }

    pub fn active_at(&self, t: usize) -> &[u32] {
        &self.active[self.offsets[t]..self.offsets[t + 1]]
    }
}

#[derive(Debug, Default)]
pub(crate) struct Trace {
    pub enc: LayerTrace,
    pub hid: LayerTrace,
    /// Decoder membrane potential and current per step, `T × 2`.
    pub out_v: Vec<f64>,
    pub out_i: Vec<f64>,
}

impl Trace {
    fn clear(&mut self) {
        self.enc.clear();
        self.hid.clear();
        self.out_v.clear();
        self.out_i.clear();
    }
}

/// Runs the network from the all-zero state over a sequence of normalized
/// 6-channel inputs.
pub fn network_forward(params: &NetworkParams, inputs: &[[f64; IMU_CHANNELS]]) -> Result<ForwardOutput> {
    run(params, inputs, None)
}

pub(crate) fn run(
    params: &NetworkParams,
    inputs: &[[f64; IMU_CHANNELS]],
    mut trace: Option<&mut Trace>,
) -> Result<ForwardOutput> {
    let (ne, nh) = (params.n_enc(), params.n_hid());
    let order = params.update_order;
    let steps = inputs.len();

    let (mut ve, mut ie) = (vec![0.0; ne], vec![0.0; ne]);
    let (mut vh, mut ih) = (vec![0.0; nh], vec![0.0; nh]);
    let (mut vo, mut io) = ([0.0; N_OUT], [0.0; N_OUT]);
    let mut cur_e = vec![0.0; ne];
    let mut cur_h = vec![0.0; nh];
    let mut cur_o = [0.0; N_OUT];
    let mut act_e: Vec<usize> = Vec::with_capacity(ne);
    let mut act_h: Vec<usize> = Vec::with_capacity(nh);
    let mut act_h_prev: Vec<usize> = Vec::with_capacity(nh);

    let mut record = SpikeRecord::with_capacity(steps, ne, nh);
    let mut estimates = Vec::with_capacity(steps);
    if let Some(tr) = trace.as_deref_mut() {
        tr.clear();
    }

    for (t, x) in inputs.iter().enumerate() {
        // Encoding layer: input enters as synaptic current.
        cur_e.fill(0.0);
        params.enc_weights.mul_add_dense(x, &mut cur_e);
        act_e.clear();
        for n in 0..ne {
            let (u, s) = lif_neuron(
                &mut ve[n],
                &mut ie[n],
                params.enc_lif.tau_mem[n],
                params.enc_lif.tau_syn[n],
                params.enc_lif.threshold[n],
                cur_e[n],
                order,
            );
            if s {
                act_e.push(n);
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.enc.u.push(u);
                tr.enc.i.push(ie[n]);
            }
        }

        // Recurrent layer: feed-forward spikes from this step, recurrent
        // spikes from the previous one.
        cur_h.fill(0.0);
        params.hid_weights_ff.mul_add_spikes(&act_e, &mut cur_h);
        params.hid_weights_rec.mul_add_spikes(&act_h_prev, &mut cur_h);
        act_h.clear();
        for n in 0..nh {
            let (u, s) = lif_neuron(
                &mut vh[n],
                &mut ih[n],
                params.hid_lif.tau_mem[n],
                params.hid_lif.tau_syn[n],
                params.hid_lif.threshold[n],
                cur_h[n],
                order,
            );
            if s {
                act_h.push(n);
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.hid.u.push(u);
                tr.hid.i.push(ih[n]);
            }
        }

        cur_o.fill(0.0);
        params.out_weights.mul_add_spikes(&act_h, &mut cur_o);
        for k in 0..N_OUT {
            li_neuron(&mut vo[k], &mut io[k], params.out_li, cur_o[k], order);
        }
        if !(vo[0].is_finite() && vo[1].is_finite()) {
            return Err(Error::NonFiniteState {
                layer: "decoder",
                timestep: t,
            });
        }
        if !(ve.iter().all(|v| v.is_finite()) && vh.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFiniteState {
                layer: "spiking",
                timestep: t,
            });
        }

        let mut row = vec![0u8; ne];
        for &n in &act_e {
            row[n] = 1;
        }
        record.enc.extend_from_slice(&row);
        let mut row = vec![0u8; nh];
        for &n in &act_h {
            row[n] = 1;
        }
        record.hid.extend_from_slice(&row);
        record.steps += 1;

        if let Some(tr) = trace.as_deref_mut() {
            tr.enc.active.extend(act_e.iter().map(|&n| n as u32));
            tr.enc.offsets.push(tr.enc.active.len());
            tr.hid.active.extend(act_h.iter().map(|&n| n as u32));
            tr.hid.offsets.push(tr.hid.active.len());
            tr.out_v.extend_from_slice(&vo);
            tr.out_i.extend_from_slice(&io);
        }

        estimates.push(EulerAngles {
            pitch: vo[0],
            roll: vo[1],
        });
        std::mem::swap(&mut act_h, &mut act_h_prev);
    }

    Ok(ForwardOutput {
        estimates,
        spikes: record,
    })
}

/// Mean firing fraction per neuron of both spiking layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronActivity {
    pub enc: Vec<f64>,
    pub hid: Vec<f64>,
}

/// Indices of the neurons that survived pruning, per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub kept_enc: Vec<usize>,
    pub kept_hid: Vec<usize>,
}

impl PruneOutcome {
    pub fn removed(&self, original: &NetworkParams) -> usize {
        original.n_enc() + original.n_hid() - self.kept_enc.len() - self.kept_hid.len()
    }
}

/// Removes every spiking neuron whose mean activity is below `threshold`
/// (a firing fraction, so `0.005` is 0.5 %), together with all of its
/// incoming and outgoing synapses.
pub fn prune(
    params: &NetworkParams,
    activity: &NeuronActivity,
    threshold: f64,
) -> Result<(NetworkParams, PruneOutcome)> {
    if activity.enc.len() != params.n_enc() {
        return Err(Error::DimensionMismatch {
            what: "encoder activity",
            expected: params.n_enc(),
            found: activity.enc.len(),
        });
    }
    if activity.hid.len() != params.n_hid() {
        return Err(Error::DimensionMismatch {
            what: "recurrent activity",
            expected: params.n_hid(),
            found: activity.hid.len(),
        });
    }
    let keep = |a: &[f64]| -> Vec<usize> {
        a.iter()
            .enumerate()
            .filter_map(|(k, r)| (*r >= threshold).then_some(k))
            .collect()
    };
    let kept_enc = keep(&activity.enc);
    let kept_hid = keep(&activity.hid);
    if kept_enc.is_empty() {
        return Err(Error::EmptyLayer { layer: "encoding" });
    }
    if kept_hid.is_empty() {
        return Err(Error::EmptyLayer { layer: "recurrent" });
    }
    let inputs: Vec<usize> = (0..IMU_CHANNELS).collect();
    let outputs: Vec<usize> = (0..N_OUT).collect();
    let pruned = NetworkParams {
        enc_weights: params.enc_weights.select(&kept_enc, &inputs),
        hid_weights_ff: params.hid_weights_ff.select(&kept_hid, &kept_enc),
        hid_weights_rec: params.hid_weights_rec.select(&kept_hid, &kept_hid),
        out_weights: params.out_weights.select(&outputs, &kept_hid),
        enc_lif: params.enc_lif.select(&kept_enc),
        hid_lif: params.hid_lif.select(&kept_hid),
        out_li: params.out_li,
        update_order: params.update_order,
    };
    Ok((pruned, PruneOutcome { kept_enc, kept_hid }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(seed: u64, ne: usize, nh: usize) -> NetworkParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = NetworkParams::random(ne, nh, (0.5, 0.99), &mut rng);
        // Scale up so the small test nets actually spike.
        for m in p.weight_matrices_mut() {
            m.map_in_place(|w| 3.0 * w);
        }
        p
    }

    fn random_inputs(seed: u64, steps: usize) -> Vec<[f64; 6]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..steps)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn default_parameter_count() {
        let p = NetworkParams::zeros(100, 100);
        assert_eq!(p.parameter_counts(), (20_800, 402));
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let p = random_net(1, 10, 10);
        let out = network_forward(&p, &vec![[0.0; 6]; 50]).unwrap();
        assert!(out.estimates.iter().all(|e| *e == EulerAngles::zero()));
        assert!(out.spikes.enc.iter().all(|s| *s == 0));
    }

    #[test]
    fn zero_decoder_weights_give_zero_output() {
        let mut p = random_net(2, 10, 10);
        p.out_weights = Matrix::zeros(2, 10);
        let out = network_forward(&p, &random_inputs(3, 100)).unwrap();
        assert!(out.estimates.iter().all(|e| *e == EulerAngles::zero()));
        assert!(out.spikes.enc.iter().any(|s| *s == 1));
    }

    /// Step-by-step per-neuron re-simulation written directly from the
    /// difference equations, sharing nothing with the runtime.
    fn scalar_oracle(p: &NetworkParams, inputs: &[[f64; 6]]) -> Vec<(f64, f64)> {
        let (ne, nh) = (p.n_enc(), p.n_hid());
        let (mut ve, mut ie) = (vec![0.0; ne], vec![0.0; ne]);
        let (mut vh, mut ih) = (vec![0.0; nh], vec![0.0; nh]);
        let mut sh_prev = vec![0.0; nh];
        let (mut vo, mut io) = ([0.0f64; 2], [0.0f64; 2]);
        let mut out = Vec::new();
        for x in inputs {
            let mut se = vec![0.0; ne];
            for n in 0..ne {
                let mut c = 0.0;
                for k in 0..6 {
                    c += p.enc_weights.get(n, k) * x[k];
                }
                ie[n] = p.enc_lif.tau_syn[n] * ie[n] + c;
                ve[n] = p.enc_lif.tau_mem[n] * ve[n] + ie[n];
                if ve[n] - p.enc_lif.threshold[n] > 0.0 {
                    se[n] = 1.0;
                    ve[n] = 0.0;
                }
            }
            let mut sh = vec![0.0; nh];
            for n in 0..nh {
                let mut c = 0.0;
                for j in 0..ne {
                    if se[j] == 1.0 {
                        c += p.hid_weights_ff.get(n, j);
                    }
                }
                let mut r = 0.0;
                for j in 0..nh {
                    if sh_prev[j] == 1.0 {
                        r += p.hid_weights_rec.get(n, j);
                    }
                }
                ih[n] = p.hid_lif.tau_syn[n] * ih[n] + (c + r);
                vh[n] = p.hid_lif.tau_mem[n] * vh[n] + ih[n];
                if vh[n] - p.hid_lif.threshold[n] > 0.0 {
                    sh[n] = 1.0;
                    vh[n] = 0.0;
                }
            }
            for k in 0..2 {
                let mut c = 0.0;
                for j in 0..nh {
                    if sh[j] == 1.0 {
                        c += p.out_weights.get(k, j);
                    }
                }
                io[k] = p.out_li.tau_syn * io[k] + c;
                vo[k] = p.out_li.tau_mem * vo[k] + io[k];
            }
            out.push((vo[0], vo[1]));
            sh_prev = sh;
        }
        out
    }

    #[test]
    fn matches_scalar_oracle_exactly() {
        for seed in 0..20 {
            let p = random_net(seed, 5, 4);
            let inputs = random_inputs(100 + seed, 10);
            let out = network_forward(&p, &inputs).unwrap();
            let want = scalar_oracle(&p, &inputs);
            for (e, (pitch, roll)) in out.estimates.iter().zip(want) {
                assert_eq!(e.pitch, pitch);
                assert_eq!(e.roll, roll);
            }
        }
    }

    #[test]
    fn deterministic_and_resets() {
        let p = random_net(4, 8, 8);
        let inputs = random_inputs(5, 200);
        let a = network_forward(&p, &inputs).unwrap();
        let b = network_forward(&p, &inputs).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn recurrence_has_one_step_delay() {
        // A single recurrent neuron driven once: its own recurrent input
        // arrives on the next step only.
        let mut p = NetworkParams::zeros(1, 2);
        p.enc_lif = LifParams::uniform(1, 0.0, 0.0, 0.5);
        p.hid_lif = LifParams::uniform(2, 0.0, 0.0, 0.5);
        p.enc_weights.set(0, 0, 1.0);
        p.hid_weights_ff.set(0, 0, 1.0);
        p.hid_weights_rec.set(1, 0, 1.0);
        let mut inputs = vec![[0.0; 6]; 4];
        inputs[0][0] = 1.0;
        let out = network_forward(&p, &inputs).unwrap();
        assert_eq!(out.spikes.hid_at(0), &[1, 0]);
        assert_eq!(out.spikes.hid_at(1), &[0, 1]);
    }

    #[test]
    fn raising_threshold_never_adds_spikes() {
        let base = random_net(6, 6, 6);
        let inputs = random_inputs(7, 300);
        let before = network_forward(&base, &inputs).unwrap();
        let mut raised = base.clone();
        raised.enc_lif.threshold[2] = 0.9;
        let after = network_forward(&raised, &inputs).unwrap();
        assert!(after.spikes.enc_counts()[2] <= before.spikes.enc_counts()[2]);
    }

    #[test]
    fn quantized_params_are_on_grid() {
        let p = random_net(8, 10, 10);
        assert!(!p.is_on_grid());
        let q = p.quantized();
        assert!(q.is_on_grid());
        assert_eq!(q.quantized(), q);
    }

    #[test]
    fn prune_threshold_zero_is_identity() {
        let p = random_net(9, 6, 7);
        let act = NeuronActivity {
            enc: vec![0.0; 6],
            hid: vec![0.0; 7],
        };
        let (q, outcome) = prune(&p, &act, 0.0).unwrap();
        assert_eq!(q, p);
        assert_eq!(outcome.removed(&p), 0);
    }

    #[test]
    fn pruned_equals_masked_original() {
        let p = random_net(10, 8, 8);
        let inputs = random_inputs(11, 100);
        let act = NeuronActivity {
            enc: vec![0.1, 0.0, 0.2, 0.0, 0.3, 0.3, 0.01, 0.5],
            hid: vec![0.0, 0.2, 0.2, 0.001, 0.3, 0.4, 0.0, 0.5],
        };
        let (pruned, outcome) = prune(&p, &act, 0.005).unwrap();
        assert_eq!(pruned.n_enc(), 6);
        assert_eq!(pruned.n_hid(), 5);
        // Masking oracle: silence removed neurons by zeroing their outgoing synapses.
        let mut masked = p.clone();
        for j in (0..8).filter(|j| !outcome.kept_enc.contains(j)) {
            for r in 0..8 {
                masked.hid_weights_ff.set(r, j, 0.0);
            }
        }
        for j in (0..8).filter(|j| !outcome.kept_hid.contains(j)) {
            for r in 0..8 {
                masked.hid_weights_rec.set(r, j, 0.0);
            }
            for k in 0..2 {
                masked.out_weights.set(k, j, 0.0);
            }
        }
        let a = network_forward(&pruned, &inputs).unwrap();
        let b = network_forward(&masked, &inputs).unwrap();
        assert_eq!(a.estimates, b.estimates);
    }

    #[test]
    fn pruning_everything_is_an_error() {
        let p = random_net(12, 3, 3);
        let act = NeuronActivity {
            enc: vec![0.0; 3],
            hid: vec![0.5; 3],
        };
        assert!(matches!(prune(&p, &act, 0.01), Err(Error::EmptyLayer { .. })));
    }
}
