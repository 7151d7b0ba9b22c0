//! Exponentially decaying pre- and postsynaptic spike traces.

use crate::error::{check_len, Result};

/// Trace time constant in ms.
pub const DEFAULT_TAU_TRACE: f32 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    /// One trace per input channel.
    pub x_pre: Vec<f32>,
    /// One trace per excitatory neuron.
    pub x_post: Vec<f32>,
    pub tau_trace: f32,
}

impl TraceState {
    pub fn new(n_input: usize, n_exc: usize, tau_trace: f32) -> Self {
        TraceState {
            x_pre: vec![0.0; n_input],
            x_post: vec![0.0; n_exc],
            tau_trace,
        }
    }

    pub fn decay_factor(&self, dt: f32) -> f32 {
        (-(dt as f64) / self.tau_trace as f64).exp() as f32
    }

    pub fn reset(&mut self) {
        self.x_pre.fill(0.0);
        self.x_post.fill(0.0);
    }

    /// Decay every trace by `exp(-dt / tau_trace)`, then set the traces of
    /// spiking channels to 1.
    pub fn update(&mut self, pre_spikes: &[bool], post_spikes: &[bool], dt: f32) -> Result<()> {
        check_len("presynaptic spike flags", pre_spikes.len(), self.x_pre.len())?;
        check_len("postsynaptic spike flags", post_spikes.len(), self.x_post.len())?;
        let decay = self.decay_factor(dt);
        for (x, &s) in self.x_pre.iter_mut().zip(pre_spikes) {
            *x = if s { 1.0 } else { *x * decay };
        }
        for (x, &s) in self.x_post.iter_mut().zip(post_spikes) {
            *x = if s { 1.0 } else { *x * decay };
        }
        Ok(())
    }

    /// Same as [`update`](Self::update) but with the input spikes given as a
    /// list of active channel indices and the decay factor precomputed.
    pub(crate) fn update_sparse(&mut self, pre_active: &[u32], post_spikes: &[bool], decay: f32) {
        for x in self.x_pre.iter_mut() {
            *x *= decay;
        }
        for &i in pre_active {
            self.x_pre[i as usize] = 1.0;
        }
        for (x, &s) in self.x_post.iter_mut().zip(post_spikes) {
            *x = if s { 1.0 } else { *x * decay };
        }
    }
}

/// Free-function form of [`TraceState::update`].
pub fn update_traces(traces: &mut TraceState, pre_spikes: &[bool], post_spikes: &[bool], dt: f32) -> Result<()> {
    traces.update(pre_spikes, post_spikes, dt)
}
