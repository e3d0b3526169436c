//! Forward-pass engine of the spiking attitude estimator: a current-driven
//! LIF encoding layer, a recurrent LIF layer and a two-neuron leaky
//! integrator decoder whose membrane potentials are the pitch and roll
//! estimates in radians.

mod checkpoint;
mod lif;
mod matrix;
mod network;

pub use checkpoint::{Checkpoint, FORMAT_TAG};
pub use lif::{
    li_step, lif_step, lif_step_ordered, LiDecays, LifParams, LifState, SpikeVector, UpdateOrder,
};
pub use matrix::Matrix;
pub use network::{
    network_forward, prune, ForwardOutput, NetworkParams, NeuronActivity, PruneOutcome,
    SpikeRecord, DEFAULT_THRESHOLD, N_OUT,
};

pub(crate) use network::{run, Trace};
