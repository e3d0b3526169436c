//! Discrete-time leaky integrate-and-fire (LIF) and leaky integrator (LI) units.
//!
//! Per neuron, with synaptic decay `a`, membrane decay `b` and input current `I`:
//!
//! ```text
//! i' = a·i + I
//! v' = b·v + i'          (UpdateOrder::SynapseFirst)
//! s  = H(v' - θ)         strict: v' = θ does not fire
//! v' = 0 where s = 1     reset to zero
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which synaptic current feeds the membrane update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Accumulate this step's input into the current first, then integrate
    /// the updated current into the membrane.
    #[default]
    SynapseFirst,
    /// Integrate the previous step's current into the membrane, then
    /// accumulate the input.
    MembraneFirst,
}

/// Per-neuron decays and thresholds of one LIF layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    pub tau_mem: Vec<f64>,
    pub tau_syn: Vec<f64>,
    pub threshold: Vec<f64>,
}

impl LifParams {
    pub fn uniform(n: usize, tau_mem: f64, tau_syn: f64, threshold: f64) -> Self {
        Self {
            tau_mem: vec![tau_mem; n],
            tau_syn: vec![tau_syn; n],
            threshold: vec![threshold; n],
        }
    }

    pub fn len(&self) -> usize {
        self.tau_mem.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_mem.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for (what, v) in [("tau_syn", &self.tau_syn), ("threshold", &self.threshold)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        let in_unit = |x: &f64| (0.0..=1.0).contains(x);
        if !self.tau_mem.iter().all(in_unit) || !self.tau_syn.iter().all(in_unit) {
            return Err(Error::InvalidConfig("LIF decays must lie in [0, 1]".into()));
        }
        if !self.threshold.iter().all(|t| *t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidConfig("LIF thresholds must be positive".into()));
        }
        Ok(())
    }

    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            tau_mem: keep.iter().map(|&k| self.tau_mem[k]).collect(),
            tau_syn: keep.iter().map(|&k| self.tau_syn[k]).collect(),
            threshold: keep.iter().map(|&k| self.threshold[k]).collect(),
        }
    }
}

/// Membrane potential and synaptic current of a layer.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LifState {
    pub v: Vec<f64>,
    pub i: Vec<f64>,
}

impl LifState {
    pub fn zeros(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            i: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn reset(&mut self) {
        self.v.fill(0.0);
        self.i.fill(0.0);
    }
}

/// Binary activations of a layer for one step.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpikeVector(pub Vec<bool>);

impl SpikeVector {
    pub fn active(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.then_some(k))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|s| **s).count()
    }
}

/// Membrane and synaptic decay shared by both output integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiDecays {
    pub tau_mem: f64,
    pub tau_syn: f64,
}

/// Advances one LIF neuron in place, returning the pre-reset membrane
/// potential and whether it fired.
#[inline(always)]
pub(crate) fn lif_neuron(
    v: &mut f64,
    i: &mut f64,
    tau_mem: f64,
    tau_syn: f64,
    threshold: f64,
    current: f64,
    order: UpdateOrder,
) -> (f64, bool) {
    let u = match order {
        UpdateOrder::SynapseFirst => {
            *i = tau_syn * *i + current;
            tau_mem * *v + *i
        }
        UpdateOrder::MembraneFirst => {
            let u = tau_mem * *v + *i;
            *i = tau_syn * *i + current;
            u
        }
    };
    let spike = u - threshold > 0.0;
    *v = if spike { 0.0 } else { u };
    (u, spike)
}

#[inline(always)]
pub(crate) fn li_neuron(v: &mut f64, i: &mut f64, d: LiDecays, current: f64, order: UpdateOrder) {
    match order {
        UpdateOrder::SynapseFirst => {
            *i = d.tau_syn * *i + current;
            *v = d.tau_mem * *v + *i;
        }
        UpdateOrder::MembraneFirst => {
            *v = d.tau_mem * *v + *i;
            *i = d.tau_syn * *i + current;
        }
    }
}

fn check_dims(state: &LifState, n: usize, input: &[f64]) -> Result<()> {
    for (what, found) in [
        ("state.v", state.v.len()),
        ("state.i", state.i.len()),
        ("input_current", input.len()),
    ] {
        if found != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found,
            });
        }
    }
    Ok(())
}

/// One step of a LIF layer with the default update order.
pub fn lif_step(
    state: &LifState,
    params: &LifParams,
    input_current: &[f64],
) -> Result<(LifState, SpikeVector)> {
    lif_step_ordered(state, params, input_current, UpdateOrder::default())
}

pub fn lif_step_ordered(
    state: &LifState,
    params: &LifParams,
    input_current: &[f64],
    order: UpdateOrder,
) -> Result<(LifState, SpikeVector)> {
    check_dims(state, params.len(), input_current)?;
    let mut next = state.clone();
    let mut spikes = vec![false; params.len()];
    for n in 0..params.len() {
        let (_, s) = lif_neuron(
            &mut next.v[n],
            &mut next.i[n],
            params.tau_mem[n],
            params.tau_syn[n],
            params.threshold[n],
            input_current[n],
            order,
        );
        spikes[n] = s;
    }
    Ok((next, SpikeVector(spikes)))
}

/// One step of the non-spiking output layer. The membrane potential is the
/// layer output.
pub fn li_step(state: &LifState, decays: LiDecays, input_current: &[f64]) -> Result<LifState> {
    check_dims(state, state.len(), input_current)?;
    let mut next = state.clone();
    for n in 0..next.len() {
        li_neuron(
            &mut next.v[n],
            &mut next.i[n],
            decays,
            input_current[n],
            UpdateOrder::default(),
        );
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_is_fixed_point() {
        let p = LifParams::uniform(3, 0.9, 0.8, 0.5);
        let (s, spikes) = lif_step(&LifState::zeros(3), &p, &[0.0; 3]).unwrap();
        assert_eq!(s, LifState::zeros(3));
        assert_eq!(spikes.count(), 0);
    }

    #[test]
    fn fires_and_resets() {
        let p = LifParams::uniform(1, 1.0, 0.5, 0.5);
        let st = LifState {
            v: vec![0.8],
            i: vec![0.0],
        };
        let (s, spikes) = lif_step(&st, &p, &[0.0]).unwrap();
        assert_eq!(spikes.0, vec![true]);
        assert_eq!(s.v[0], 0.0);
    }

    #[test]
    fn threshold_is_strict() {
        let p = LifParams::uniform(1, 1.0, 0.0, 0.5);
        let st = LifState {
            v: vec![0.5],
            i: vec![0.0],
        };
        let (s, spikes) = lif_step(&st, &p, &[0.0]).unwrap();
        assert_eq!(spikes.0, vec![false]);
        assert_eq!(s.v[0], 0.5);
    }

    #[test]
    fn update_orders_differ_by_one_step_of_current() {
        let p = LifParams::uniform(1, 0.5, 0.5, 10.0);
        let st = LifState::zeros(1);
        let (a, _) = lif_step_ordered(&st, &p, &[1.0], UpdateOrder::SynapseFirst).unwrap();
        let (b, _) = lif_step_ordered(&st, &p, &[1.0], UpdateOrder::MembraneFirst).unwrap();
        assert_eq!(a.v[0], 1.0);
        assert_eq!(b.v[0], 0.0);
        assert_eq!(a.i, b.i);
    }

    #[test]
    fn dimension_mismatch() {
        let p = LifParams::uniform(2, 0.5, 0.5, 0.5);
        assert!(matches!(
            lif_step(&LifState::zeros(2), &p, &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn li_zero_input_from_rest() {
        let d = LiDecays {
            tau_mem: 0.9,
            tau_syn: 0.7,
        };
        let s = li_step(&LifState::zeros(2), d, &[0.0, 0.0]).unwrap();
        assert_eq!(s.v, vec![0.0, 0.0]);
    }

    #[test]
    fn li_constant_input_converges_to_geometric_limit() {
        let d = LiDecays {
            tau_mem: 0.9,
            tau_syn: 0.6,
        };
        let c = 0.3;
        let limit = c / (1.0 - d.tau_syn) / (1.0 - d.tau_mem);
        let mut s = LifState::zeros(1);
        let mut prev_gap = f64::INFINITY;
        for _ in 0..600 {
            s = li_step(&s, d, &[c]).unwrap();
            let gap = (limit - s.v[0]).abs();
            assert!(gap <= prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-12 * limit.max(1.0) * 100.0);
    }

    #[test]
    fn li_impulse_response_is_double_exponential() {
        // Convolution oracle: v[t] = Σ_{k=0..t} b^(t-k) a^k for a unit impulse at t=0.
        let (a, b) = (0.7, 0.9);
        let d = LiDecays {
            tau_mem: b,
            tau_syn: a,
        };
        let mut s = LifState::zeros(1);
        for t in 0..50usize {
            let input = if t == 0 { 1.0 } else { 0.0 };
            s = li_step(&s, d, &[input]).unwrap();
            let want: f64 = (0..=t).map(|k| b.powi((t - k) as i32) * a.powi(k as i32)).sum();
            assert!((s.v[0] - want).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn validation() {
        assert!(LifParams::uniform(2, 1.2, 0.5, 0.5).validate().is_err());
        assert!(LifParams::uniform(2, 0.2, 0.5, 0.0).validate().is_err());
        assert!(LifParams::uniform(2, 0.2, 0.5, 0.5).validate().is_ok());
    }
}
