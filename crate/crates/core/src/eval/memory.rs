//! Storage footprint of a network at a given word length.
//!
//! Every synapse is counted as a stored entry, including the fixed inhibitory
//! wiring. Lateral mode stores `n_exc * (n_exc - 1)` inhibitory synapses. The
//! layered mode stores a dense `n_exc * n_exc` excitatory-to-inhibitory matrix
//! and `n_exc * (n_exc - 1)` inhibitory-to-excitatory synapses. Each stored
//! neuron keeps V, theta, g_e and g_i.

use crate::quantize::Precision;
use crate::topology::{InhibitionMode, Network};

/// State variables stored per neuron.
pub const STATE_VARS_PER_NEURON: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryGroup {
    pub name: &'static str,
    pub entries: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryReport {
    pub wordlength: u8,
    pub synapse_bytes: u64,
    pub neuron_state_bytes: u64,
    pub total_bytes: u64,
    pub groups: Vec<MemoryGroup>,
}

fn group(name: &'static str, entries: u64, bits: u64) -> MemoryGroup {
    MemoryGroup {
        name,
        entries,
        bytes: (entries * bits).div_ceil(8),
    }
}

/// Memory report from the network shape alone.
pub fn memory_model(n_input: usize, n_exc: usize, mode: InhibitionMode, precision: Precision) -> MemoryReport {
    let bits = precision.wordlength() as u64;
    let (n_in, n) = (n_input as u64, n_exc as u64);
    let fan_out = n * n.saturating_sub(1);
    let mut synapses = vec![group("input_to_exc", n_in * n, bits)];
    let neurons = match mode {
        InhibitionMode::LateralDirect => {
            synapses.push(group("lateral", fan_out, bits));
            n
        }
        InhibitionMode::InhibitoryLayer => {
            synapses.push(group("exc_to_inh", n * n, bits));
            synapses.push(group("inh_to_exc", fan_out, bits));
            2 * n
        }
    };
    let state = group("neuron_state", STATE_VARS_PER_NEURON * neurons, bits);
    let synapse_bytes = synapses.iter().map(|g| g.bytes).sum();
    let neuron_state_bytes = state.bytes;
    synapses.push(state);
    MemoryReport {
        wordlength: precision.wordlength(),
        synapse_bytes,
        neuron_state_bytes,
        total_bytes: synapse_bytes + neuron_state_bytes,
        groups: synapses,
    }
}

pub fn memory_report(network: &Network, precision: Precision) -> MemoryReport {
    memory_model(network.n_input(), network.n_exc(), network.mode(), precision)
}
