use std::ops::{Add, AddAssign};

/// Relative cost of each counted operation in the energy proxy.
pub const INTEGRATION_WEIGHT: f64 = 1.0;
pub const CONDUCTANCE_WEIGHT: f64 = 0.5;
pub const TRACE_WEIGHT: f64 = 0.5;
pub const WEIGHT_UPDATE_WEIGHT: f64 = 2.0;

/// Operation counts gathered while simulating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunCounters {
    /// One per neuron per simulated timestep.
    pub integration_steps: u64,
    /// One per synaptic conductance increment (input → excitatory, lateral, layered).
    pub conductance_accumulations: u64,
    /// One per trace reset caused by a spike while learning.
    pub trace_updates: u64,
    /// One per synapse a plasticity rule evaluated.
    pub weight_update_events: u64,
}

impl Add for RunCounters {
    type Output = RunCounters;

    fn add(self, o: RunCounters) -> RunCounters {
        RunCounters {
            integration_steps: self.integration_steps + o.integration_steps,
            conductance_accumulations: self.conductance_accumulations + o.conductance_accumulations,
            trace_updates: self.trace_updates + o.trace_updates,
            weight_update_events: self.weight_update_events + o.weight_update_events,
        }
    }
}

impl AddAssign for RunCounters {
    fn add_assign(&mut self, o: RunCounters) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyProxyReport {
    pub counters: RunCounters,
    pub total: f64,
}

/// Weighted operation count standing in for measured energy. Unitless.
pub fn energy_proxy(counters: &RunCounters) -> EnergyProxyReport {
    let total = INTEGRATION_WEIGHT * counters.integration_steps as f64
        + CONDUCTANCE_WEIGHT * counters.conductance_accumulations as f64
        + TRACE_WEIGHT * counters.trace_updates as f64
        + WEIGHT_UPDATE_WEIGHT * counters.weight_update_events as f64;
    EnergyProxyReport {
        counters: *counters,
        total,
    }
}
