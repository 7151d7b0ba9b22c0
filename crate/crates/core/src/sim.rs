//! Clock-driven presentation of spike trains to a network.
//!
//! Each timestep of [`Simulator::present`]:
//!
//! 1. input spikes of the step add `g_exc_strength * w[i][j]` to `g_e[j]`;
//! 2. inhibition produced on the previous step is added to `g_i`;
//! 3. excitatory neurons integrate and fire;
//! 4. lateral mode: the new spikes schedule inhibition for the next step.
//!    Layered mode: inhibitory neurons integrate the excitatory spikes of the
//!    previous step, and their spikes schedule inhibition for the next step;
//! 5. when learning, traces are updated and the plasticity rule runs.
//!
//! Conductances, traces, pending inhibition, and the batched-rule counters are
//! cleared at image onset. Membrane potentials and thresholds carry over.

use crate::encoding::{encode_poisson, EncodingParams, RetryPolicy, SpikeTrain};
use crate::error::{check_len, Result};
use crate::eval::energy::RunCounters;
use crate::learning::{
    baseline_stdp_step, fspinn_accumulate, fspinn_update, normalize_columns, post_only_stdp_step, LearningScratch,
    Rule, StdpParams,
};
use crate::neuron::Integrator;
use crate::topology::{InhibitionStructure, Network};
use crate::trace::TraceState;

/// Reusable buffers and settings for presenting images to one network shape.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub stdp: StdpParams,
    /// Operation counts accumulated since construction (or the last [`take_counters`](Self::take_counters)).
    pub counters: RunCounters,
    exc_integrator: Integrator,
    inh_integrator: Option<Integrator>,
    trace_decay: f32,
    traces: TraceState,
    scratch: LearningScratch,
    exc_increment: Vec<f32>,
    pending_inhibition: Vec<f32>,
    exc_spikes: Vec<bool>,
    prev_exc_spikes: Vec<bool>,
    inh_spikes: Vec<bool>,
    inh_increment: Vec<f32>,
    zeros: Vec<f32>,
}

impl Simulator {
    pub fn new(network: &Network, stdp: StdpParams, tau_trace: f32) -> Result<Self> {
        stdp.validate()?;
        let n_input = network.n_input();
        let n_exc = network.n_exc();
        let exc_integrator = Integrator::new(network.config.exc_params)?;
        let inh_integrator = match network.inh {
            Some(_) => {
                let mut integ = Integrator::new(network.config.inh_params)?;
                integ.adapt_threshold = false;
                Some(integ)
            }
            None => None,
        };
        let traces = TraceState::new(n_input, n_exc, tau_trace);
        Ok(Simulator {
            stdp,
            counters: RunCounters::default(),
            trace_decay: traces.decay_factor(network.config.exc_params.dt),
            exc_integrator,
            inh_integrator,
            traces,
            scratch: LearningScratch::new(n_input, n_exc),
            exc_increment: vec![0.0; n_exc],
            pending_inhibition: vec![0.0; n_exc],
            exc_spikes: vec![false; n_exc],
            prev_exc_spikes: vec![false; n_exc],
            inh_spikes: vec![false; n_exc],
            inh_increment: vec![0.0; n_exc],
            zeros: vec![0.0; n_exc],
        })
    }

    /// Simulator for frozen-network passes; the plasticity settings are never consulted.
    pub fn inference(network: &Network) -> Result<Self> {
        Simulator::new(network, StdpParams::fspinn(), crate::trace::DEFAULT_TAU_TRACE)
    }

    pub fn take_counters(&mut self) -> RunCounters {
        std::mem::take(&mut self.counters)
    }

    fn begin_image(&mut self, net: &mut Network) {
        net.exc.clear_conductances();
        if let Some(inh) = net.inh.as_mut() {
            inh.clear_conductances();
        }
        self.traces.reset();
        self.scratch.reset();
        self.pending_inhibition.fill(0.0);
        self.prev_exc_spikes.fill(false);
    }

    /// Encode `image` on random stream `stream` and present it, retrying at
    /// higher input rates per `encoding.retry`. Returns the spike counts of the last attempt.
    pub fn present_image(
        &mut self,
        net: &mut Network,
        image: &[u8],
        encoding: &EncodingParams,
        stream: u64,
        learn: bool,
    ) -> Result<Vec<u32>> {
        let retry = encoding.retry;
        let mut enc = EncodingParams {
            retry: RetryPolicy::OFF,
            ..*encoding
        };
        let mut attempt = 0;
        loop {
            let train = encode_poisson(image, &enc, stream)?;
            let counts = self.present(net, &train, learn)?;
            if attempt >= retry.max_retries || counts.iter().sum::<u32>() >= retry.min_spikes {
                return Ok(counts);
            }
            attempt += 1;
            enc.rate_scale += retry.rate_step;
        }
    }

    /// Present one spike train and return the spike count of every excitatory
    /// neuron. With `learn` set the plasticity rule runs and thresholds adapt;
    /// otherwise weights and thresholds are frozen.
    pub fn present(&mut self, net: &mut Network, train: &SpikeTrain, learn: bool) -> Result<Vec<u32>> {
        check_len("spike train channels", train.n_input(), net.n_input())?;
        check_len("simulator neurons", self.exc_spikes.len(), net.n_exc())?;
        self.begin_image(net);
        self.exc_integrator.adapt_threshold = learn;
        if learn {
            if let Some(target) = self.stdp.norm_target {
                normalize_columns(&mut net.weights, target)?;
            }
        }

        let n_exc = net.n_exc();
        let g_scale = net.config.g_exc_strength;
        let mut counts = vec![0u32; n_exc];
        let mut c = RunCounters::default();

        for t in 0..train.steps() {
            let active = train.active(t);

            self.exc_increment.fill(0.0);
            for &i in active {
                for (acc, &w) in self.exc_increment.iter_mut().zip(net.weights.row(i as usize)) {
                    *acc += w;
                }
            }
            if g_scale != 1.0 {
                for acc in &mut self.exc_increment {
                    *acc *= g_scale;
                }
            }
            c.conductance_accumulations += (active.len() * n_exc) as u64;

            let fired = self.exc_integrator.step(
                &mut net.exc,
                &self.exc_increment,
                &self.pending_inhibition,
                &mut self.exc_spikes,
            )?;
            c.integration_steps += n_exc as u64;
            if fired > 0 {
                for (n, &s) in counts.iter_mut().zip(&self.exc_spikes) {
                    *n += s as u32;
                }
            }

            match net.inhibition {
                InhibitionStructure::Lateral { .. } => {
                    if fired > 0 {
                        net.inhibition
                            .propagate(&self.exc_spikes, &mut self.pending_inhibition)?;
                        c.conductance_accumulations += (fired * (n_exc - 1)) as u64;
                    } else {
                        self.pending_inhibition.fill(0.0);
                    }
                }
                InhibitionStructure::Layer { exc_to_inh, .. } => {
                    let integ = self
                        .inh_integrator
                        .as_ref()
                        .expect("layered network has inhibitory integrator");
                    let inh = net.inh.as_mut().expect("layered network has inhibitory neurons");
                    let mut relayed = 0u64;
                    for (inc, &s) in self.inh_increment.iter_mut().zip(&self.prev_exc_spikes) {
                        *inc = if s { exc_to_inh } else { 0.0 };
                        relayed += s as u64;
                    }
                    let inh_fired = integ.step(inh, &self.inh_increment, &self.zeros, &mut self.inh_spikes)?;
                    c.integration_steps += n_exc as u64;
                    c.conductance_accumulations += relayed;
                    if inh_fired > 0 {
                        net.inhibition
                            .propagate(&self.inh_spikes, &mut self.pending_inhibition)?;
                        c.conductance_accumulations += (inh_fired * (n_exc - 1)) as u64;
                    } else {
                        self.pending_inhibition.fill(0.0);
                    }
                    self.prev_exc_spikes.copy_from_slice(&self.exc_spikes);
                }
            }

            if learn {
                self.traces.update_sparse(active, &self.exc_spikes, self.trace_decay);
                c.trace_updates += (active.len() + fired) as u64;
                c.weight_update_events += match self.stdp.rule {
                    Rule::BaselinePairwise => {
                        baseline_stdp_step(&mut net.weights, &self.traces, active, &self.exc_spikes, &self.stdp)?
                    }
                    Rule::PostOnly => {
                        if fired > 0 {
                            post_only_stdp_step(&mut net.weights, &self.traces, &self.exc_spikes, &self.stdp)?
                        } else {
                            0
                        }
                    }
                    Rule::FSpiNN => {
                        if fired > 0 {
                            fspinn_accumulate(&mut self.scratch, &self.traces, &self.exc_spikes)?;
                        }
                        fspinn_update(&mut net.weights, &mut self.scratch, &self.stdp, t)?
                    }
                };
            }
        }
        self.counters += c;
        Ok(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode_poisson, EncodingParams};
    use crate::topology::{build_network, InhibitionMode, NetworkConfig};

    fn blob_image() -> Vec<u8> {
        (0..64)
            .map(|k| if (k / 8 + k % 8) % 3 == 0 { 255 } else { 0 })
            .collect()
    }

    fn net(mode: InhibitionMode) -> Network {
        let mut cfg = NetworkConfig::new(64, 6, mode);
        cfg.weight_init.seed = 3;
        cfg.weight_init.max_fraction = 1.0;
        build_network(&cfg).unwrap()
    }

    fn train_for(seed: u64) -> SpikeTrain {
        let p = EncodingParams {
            seed,
            ..Default::default()
        };
        encode_poisson(&blob_image(), &p, 0).unwrap()
    }

    #[test]
    fn silent_input_only_integrates() {
        let mut n = net(InhibitionMode::LateralDirect);
        let mut sim = Simulator::new(&n, StdpParams::fspinn(), 20.0).unwrap();
        let train = encode_poisson(&[0u8; 64], &EncodingParams::default(), 0).unwrap();
        let counts = sim.present(&mut n, &train, true).unwrap();
        assert!(counts.iter().all(|&c| c == 0));
        assert_eq!(
            sim.counters,
            RunCounters {
                integration_steps: 350 * 6,
                ..Default::default()
            }
        );
    }

    #[test]
    fn inference_freezes_weights_and_theta() {
        let mut n = net(InhibitionMode::LateralDirect);
        let mut sim = Simulator::new(&n, StdpParams::fspinn(), 20.0).unwrap();
        let w0 = n.weights.clone();
        let theta0 = n.exc.theta.clone();
        let counts = sim.present(&mut n, &train_for(1), false).unwrap();
        assert!(counts.iter().sum::<u32>() > 0);
        assert_eq!(n.weights, w0);
        assert_eq!(n.exc.theta, theta0);
        assert_eq!(sim.counters.weight_update_events, 0);
    }

    #[test]
    fn presentation_is_deterministic() {
        for mode in [InhibitionMode::LateralDirect, InhibitionMode::InhibitoryLayer] {
            for rule in [Rule::BaselinePairwise, Rule::PostOnly, Rule::FSpiNN] {
                let run = || {
                    let mut n = net(mode);
                    let mut sim = Simulator::new(&n, StdpParams::for_rule(rule), 20.0).unwrap();
                    let mut all = Vec::new();
                    for seed in 0..3 {
                        all.push(sim.present(&mut n, &train_for(seed), true).unwrap());
                    }
                    (all, n, sim.counters)
                };
                let (a, na, ca) = run();
                let (b, nb, cb) = run();
                assert_eq!(a, b);
                assert_eq!(na.weights.as_slice(), nb.weights.as_slice());
                assert_eq!(na.exc, nb.exc);
                assert_eq!(ca, cb);
            }
        }
    }

    #[test]
    fn update_counts_follow_rule_ordering() {
        let counts = |rule| {
            let mut n = net(InhibitionMode::LateralDirect);
            let mut sim = Simulator::new(&n, StdpParams::for_rule(rule), 20.0).unwrap();
            for seed in 0..4 {
                sim.present(&mut n, &train_for(seed), true).unwrap();
            }
            sim.counters.weight_update_events
        };
        let f = counts(Rule::FSpiNN);
        let p = counts(Rule::PostOnly);
        let b = counts(Rule::BaselinePairwise);
        assert!(f > 0);
        assert!(f <= p && p <= b, "{f} {p} {b}");
    }

    #[test]
    fn spike_train_width_checked() {
        let mut n = net(InhibitionMode::LateralDirect);
        let mut sim = Simulator::new(&n, StdpParams::fspinn(), 20.0).unwrap();
        let train = encode_poisson(&[10u8; 10], &EncodingParams::default(), 0).unwrap();
        assert!(sim.present(&mut n, &train, false).is_err());
    }
}
