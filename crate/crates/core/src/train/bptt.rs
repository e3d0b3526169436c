//! Reverse-mode gradients through the unrolled network, with the Heaviside
//! derivative replaced by the SuperSpike pseudo-derivative.

use serde::{Deserialize, Serialize};

use crate::domain::{EulerAngles, NormalizationSpec, Sequence, IMU_CHANNELS};
use crate::error::{Error, Result};
use crate::snn::{run, LiDecays, LifParams, Matrix, NetworkParams, SpikeRecord, Trace, UpdateOrder};

/// Sharpness of the SuperSpike pseudo-derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub width: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self { width: 20.0 }
    }
}

/// `1 / (1 + width·|x|)²`, evaluated at `x = v - θ`. Used on the backward pass only.
#[inline]
pub fn superspike_grad(v_minus_thr: f64, spec: SurrogateSpec) -> f64 {
    let d = 1.0 + spec.width * v_minus_thr.abs();
    1.0 / (d * d)
}

/// Summed squared error of a sequence, pitch and roll weighted evenly:
/// `Σ_k ((θ̂_k − θ_k)² + (φ̂_k − φ_k)²) / 2`.
pub fn mse_loss(estimates: &[EulerAngles], truth: &[EulerAngles]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: truth.len(),
        });
    }
    Ok(estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let dp = e.pitch - t.pitch;
            let dr = e.roll - t.roll;
            (dp * dp + dr * dr) / 2.0
        })
        .sum())
}

/// [`mse_loss`] divided by the sequence length.
pub fn per_step_mse(estimates: &[EulerAngles], truth: &[EulerAngles]) -> Result<f64> {
    let total = mse_loss(estimates, truth)?;
    Ok(if truth.is_empty() {
        0.0
    } else {
        total / truth.len() as f64
    })
}

/// A normalized input sequence with its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub inputs: Vec<[f64; IMU_CHANNELS]>,
    pub targets: Vec<EulerAngles>,
}

impl Example {
    pub fn from_sequence(seq: &Sequence, norm: &NormalizationSpec) -> Result<Self> {
        Ok(Self {
            inputs: norm.normalize_sequence(seq)?,
            targets: seq.truth().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn slice(&self, start: usize, len: usize) -> Self {
        let end = (start + len).min(self.len());
        Self {
            inputs: self.inputs[start..end].to_vec(),
            targets: self.targets[start..end].to_vec(),
        }
    }
}

/// Gradients with respect to the effective (forward-pass) parameters.
/// Thresholds are fixed and have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub enc_weights: Matrix,
    pub hid_weights_ff: Matrix,
    pub hid_weights_rec: Matrix,
    pub out_weights: Matrix,
    pub enc_tau_mem: Vec<f64>,
    pub enc_tau_syn: Vec<f64>,
    pub hid_tau_mem: Vec<f64>,
    pub hid_tau_syn: Vec<f64>,
    /// Shared by both decoder neurons.
    pub out_tau_mem: f64,
    pub out_tau_syn: f64,
}

impl Gradients {
    pub fn zeros_like(p: &NetworkParams) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Self {
            enc_weights: z(&p.enc_weights),
            hid_weights_ff: z(&p.hid_weights_ff),
            hid_weights_rec: z(&p.hid_weights_rec),
            out_weights: z(&p.out_weights),
            enc_tau_mem: vec![0.0; p.n_enc()],
            enc_tau_syn: vec![0.0; p.n_enc()],
            hid_tau_mem: vec![0.0; p.n_hid()],
            hid_tau_syn: vec![0.0; p.n_hid()],
            out_tau_mem: 0.0,
            out_tau_syn: 0.0,
        }
    }

    /// Blocks in a fixed order with their names.
    pub fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("enc_weights", self.enc_weights.as_slice()),
            ("hid_weights_ff", self.hid_weights_ff.as_slice()),
            ("hid_weights_rec", self.hid_weights_rec.as_slice()),
            ("out_weights", self.out_weights.as_slice()),
            ("enc_tau_mem", &self.enc_tau_mem),
            ("enc_tau_syn", &self.enc_tau_syn),
            ("hid_tau_mem", &self.hid_tau_mem),
            ("hid_tau_syn", &self.hid_tau_syn),
            ("out_tau_mem", std::slice::from_ref(&self.out_tau_mem)),
            ("out_tau_syn", std::slice::from_ref(&self.out_tau_syn)),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.enc_weights.as_mut_slice(),
            self.hid_weights_ff.as_mut_slice(),
            self.hid_weights_rec.as_mut_slice(),
            self.out_weights.as_mut_slice(),
            &mut self.enc_tau_mem,
            &mut self.enc_tau_syn,
            &mut self.hid_tau_mem,
            &mut self.hid_tau_syn,
            std::slice::from_mut(&mut self.out_tau_mem),
            std::slice::from_mut(&mut self.out_tau_syn),
        ]
    }

    /// All entries concatenated in [`Gradients::blocks`] order.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().into_iter().flat_map(|(_, b)| b.iter().copied()).collect()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b.1) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for b in self.blocks_mut() {
            for x in b {
                *x *= s;
            }
        }
    }

    fn check_finite(&self) -> Result<()> {
        for (name, b) in self.blocks() {
            if !b.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    block: name,
                    timestep: 0,
                });
            }
        }
        Ok(())
    }
}

/// Reverse-sweep state of one spiking layer.
struct LayerGrad {
    g_v: Vec<f64>,
    g_i: Vec<f64>,
    g_cur: Vec<f64>,
}

impl LayerGrad {
    fn new(n: usize) -> Self {
        Self {
            g_v: vec![0.0; n],
            g_i: vec![0.0; n],
            g_cur: vec![0.0; n],
        }
    }
}

struct LayerView<'a> {
    lif: &'a LifParams,
    u: &'a [f64],
    i: &'a [f64],
    spikes: &'a [u8],
    n: usize,
}

impl LayerView<'_> {
    #[inline]
    fn u(&self, t: usize, n: usize) -> f64 {
        self.u[t * self.n + n]
    }

    #[inline]
    fn i_prev(&self, t: usize, n: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.i[(t - 1) * self.n + n]
        }
    }

    #[inline]
    fn spiked(&self, t: usize, n: usize) -> bool {
        self.spikes[t * self.n + n] != 0
    }

    /// Post-reset membrane potential after step `t - 1`.
    #[inline]
    fn v_prev(&self, t: usize, n: usize) -> f64 {
        if t == 0 || self.spiked(t - 1, n) {
            0.0
        } else {
            self.u(t - 1, n)
        }
    }
}

/// Backward through one LIF layer at step `t`. `g_s` is the gradient
/// arriving at this step's spikes; on return `st.g_cur` holds the gradient
/// of this step's input current.
#[allow(clippy::too_many_arguments)]
fn lif_backward(
    view: &LayerView<'_>,
    t: usize,
    g_s: &[f64],
    st: &mut LayerGrad,
    g_tau_mem: &mut [f64],
    g_tau_syn: &mut [f64],
    order: UpdateOrder,
    surrogate: SurrogateSpec,
) {
    for n in 0..view.n {
        let u = view.u(t, n);
        let s = if view.spiked(t, n) { 1.0 } else { 0.0 };
        let sg = superspike_grad(u - view.lif.threshold[n], surrogate);
        let g_v_next = st.g_v[n];
        // v = u·(1 − s), s = H(u − θ)
        let g_u = g_v_next * (1.0 - s) + (g_s[n] - g_v_next * u) * sg;
        g_tau_mem[n] += g_u * view.v_prev(t, n);
        st.g_v[n] = g_u * view.lif.tau_mem[n];
        let i_prev = view.i_prev(t, n);
        match order {
            UpdateOrder::SynapseFirst => {
                let g_i = st.g_i[n] + g_u;
                g_tau_syn[n] += g_i * i_prev;
                st.g_i[n] = g_i * view.lif.tau_syn[n];
                st.g_cur[n] = g_i;
            }
            UpdateOrder::MembraneFirst => {
                let g_i = st.g_i[n];
                g_tau_syn[n] += g_i * i_prev;
                st.g_cur[n] = g_i;
                st.g_i[n] = g_i * view.lif.tau_syn[n] + g_u;
            }
        }
    }
}

/// Forward pass plus full reverse sweep for one example. Returns the
/// summed loss and the gradients of that loss.
pub fn example_gradients(
    params: &NetworkParams,
    example: &Example,
    surrogate: SurrogateSpec,
) -> Result<(f64, Gradients)> {
    let mut trace = Trace::default();
    let out = run(params, &example.inputs, Some(&mut trace))?;
    let loss = mse_loss(&out.estimates, &example.targets)?;
    let grads = backward(params, example, &trace, &out.spikes, surrogate)?;
    Ok((loss, grads))
}

fn backward(
    params: &NetworkParams,
    example: &Example,
    trace: &Trace,
    spikes: &SpikeRecord,
    surrogate: SurrogateSpec,
) -> Result<Gradients> {
    let (ne, nh) = (params.n_enc(), params.n_hid());
    let order = params.update_order;
    let steps = example.len();
    let mut g = Gradients::zeros_like(params);

    let enc = LayerView {
        lif: &params.enc_lif,
        u: &trace.enc.u,
        i: &trace.enc.i,
        spikes: &spikes.enc,
        n: ne,
    };
    let hid = LayerView {
        lif: &params.hid_lif,
        u: &trace.hid.u,
        i: &trace.hid.i,
        spikes: &spikes.hid,
        n: nh,
    };
    let LiDecays {
        tau_mem: out_b,
        tau_syn: out_a,
    } = params.out_li;

    let mut ge = LayerGrad::new(ne);
    let mut gh = LayerGrad::new(nh);
    let (mut go_v, mut go_i) = ([0.0f64; 2], [0.0f64; 2]);
    let mut g_s_h = vec![0.0; nh];
    // W_rec^T · g_cur_h from step t + 1, landing on the spikes of step t.
    let mut g_s_h_rec = vec![0.0; nh];
    let mut g_s_e = vec![0.0; ne];

    for t in (0..steps).rev() {
        // Decoder.
        let mut g_cur_o = [0.0f64; 2];
        for k in 0..2 {
            let y = trace.out_v[2 * t + k];
            let target = if k == 0 {
                example.targets[t].pitch
            } else {
                example.targets[t].roll
            };
            let g_v = go_v[k] + (y - target);
            let (v_prev, i_prev) = if t == 0 {
                (0.0, 0.0)
            } else {
                (trace.out_v[2 * (t - 1) + k], trace.out_i[2 * (t - 1) + k])
            };
            g.out_tau_mem += g_v * v_prev;
            go_v[k] = g_v * out_b;
            match order {
                UpdateOrder::SynapseFirst => {
                    let g_i = go_i[k] + g_v;
                    g.out_tau_syn += g_i * i_prev;
                    go_i[k] = g_i * out_a;
                    g_cur_o[k] = g_i;
                }
                UpdateOrder::MembraneFirst => {
                    let g_i = go_i[k];
                    g.out_tau_syn += g_i * i_prev;
                    g_cur_o[k] = g_i;
                    go_i[k] = g_i * out_a + g_v;
                }
            }
        }
        if !(go_v[0].is_finite() && go_v[1].is_finite() && go_i[0].is_finite() && go_i[1].is_finite()) {
            return Err(Error::NonFiniteGradient {
                block: "decoder",
                timestep: t,
            });
        }
        let act_h: Vec<usize> = trace.hid.active_at(t).iter().map(|&n| n as usize).collect();
        g.out_weights.add_outer_spikes(&g_cur_o, &act_h);

        // Recurrent layer.
        g_s_h.copy_from_slice(&g_s_h_rec);
        params.out_weights.transpose_mul_add(&g_cur_o, &mut g_s_h);
        lif_backward(
            &hid,
            t,
            &g_s_h,
            &mut gh,
            &mut g.hid_tau_mem,
            &mut g.hid_tau_syn,
            order,
            surrogate,
        );
        if !gh.g_cur.iter().chain(&gh.g_v).all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                block: "recurrent layer",
                timestep: t,
            });
        }
        let act_e: Vec<usize> = trace.enc.active_at(t).iter().map(|&n| n as usize).collect();
        g.hid_weights_ff.add_outer_spikes(&gh.g_cur, &act_e);
        if t > 0 {
            let act_prev: Vec<usize> = trace.hid.active_at(t - 1).iter().map(|&n| n as usize).collect();
            g.hid_weights_rec.add_outer_spikes(&gh.g_cur, &act_prev);
        }
        g_s_h_rec.fill(0.0);
        params.hid_weights_rec.transpose_mul_add(&gh.g_cur, &mut g_s_h_rec);

        // Encoding layer.
        g_s_e.fill(0.0);
        params.hid_weights_ff.transpose_mul_add(&gh.g_cur, &mut g_s_e);
        lif_backward(
            &enc,
            t,
            &g_s_e,
            &mut ge,
            &mut g.enc_tau_mem,
            &mut g.enc_tau_syn,
            order,
            surrogate,
        );
        if !ge.g_cur.iter().chain(&ge.g_v).all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                block: "encoding layer",
                timestep: t,
            });
        }
        g.enc_weights.add_outer_dense(&ge.g_cur, &example.inputs[t]);
    }
    g.check_finite()?;
    Ok(g)
}

/// Mean loss and mean gradients over a batch of equal-length examples.
/// Per-example work runs in parallel; the reduction is sequential in batch
/// order so results do not depend on thread scheduling.
pub fn bptt_gradients(
    params: &NetworkParams,
    batch: &[Example],
    surrogate: SurrogateSpec,
) -> Result<(f64, Gradients)> {
    use rayon::prelude::*;

    let first = batch.first().ok_or(Error::EmptyDataset)?;
    if let Some(bad) = batch.iter().find(|e| e.len() != first.len()) {
        return Err(Error::LengthMismatch {
            left: first.len(),
            right: bad.len(),
        });
    }
    let parts: Vec<Result<(f64, Gradients)>> = batch
        .par_iter()
        .map(|ex| example_gradients(params, ex, surrogate))
        .collect();
    let mut total = Gradients::zeros_like(params);
    let mut loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        total.add_assign(&g);
    }
    let scale = 1.0 / batch.len() as f64;
    total.scale(scale);
    Ok((loss * scale, total))
}
