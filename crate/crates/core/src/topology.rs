//! Network construction: input → excitatory synapses plus a fixed inhibition scheme.
//!
//! Two inhibition schemes are supported. [`InhibitionMode::InhibitoryLayer`]
//! pairs each excitatory neuron with an inhibitory neuron that, once it
//! fires, inhibits every excitatory neuron except its partner.
//! [`InhibitionMode::LateralDirect`] drops the inhibitory population and lets
//! each excitatory spike inhibit all other excitatory neurons directly with
//! strength `inhibition_ratio * g_exc_strength`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::neuron::{NeuronParams, NeuronState};
use crate::quantize::Precision;

pub const MIN_INHIBITION_RATIO: f32 = 2.0;
pub const MAX_INHIBITION_RATIO: f32 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InhibitionMode {
    InhibitoryLayer,
    LateralDirect,
}

impl InhibitionMode {
    pub fn code(self) -> u8 {
        match self {
            InhibitionMode::InhibitoryLayer => 0,
            InhibitionMode::LateralDirect => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(InhibitionMode::InhibitoryLayer),
            1 => Some(InhibitionMode::LateralDirect),
            _ => None,
        }
    }
}

/// Uniform initial weights in `[0, max_fraction * w_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightInit {
    pub max_fraction: f32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n_input: usize,
    pub n_exc: usize,
    pub inhibition_mode: InhibitionMode,
    pub inhibition_ratio: f32,
    pub g_exc_strength: f32,
    pub w_max: f32,
    pub weight_init: WeightInit,
    pub exc_params: NeuronParams,
    pub inh_params: NeuronParams,
    /// One-to-one excitatory → inhibitory coupling (layered mode only).
    pub exc_to_inh: f32,
    /// Inhibitory → excitatory fan-out strength (layered mode only).
    pub inh_to_exc: f32,
}

impl NetworkConfig {
    pub fn new(n_input: usize, n_exc: usize, inhibition_mode: InhibitionMode) -> Self {
        NetworkConfig {
            n_input,
            n_exc,
            inhibition_mode,
            inhibition_ratio: 3.0,
            g_exc_strength: 1.0,
            w_max: 1.0,
            weight_init: WeightInit {
                max_fraction: 0.3,
                seed: 0,
            },
            exc_params: NeuronParams::excitatory(),
            inh_params: NeuronParams::inhibitory(),
            exc_to_inh: 22.5,
            inh_to_exc: 17.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_input == 0 || self.n_exc == 0 {
            return Err(Error::config(format!(
                "n_input and n_exc must be at least 1, got {} and {}",
                self.n_input, self.n_exc
            )));
        }
        check_ratio(self.inhibition_ratio)?;
        if !(self.w_max > 0.0) || !(self.g_exc_strength >= 0.0) {
            return Err(Error::config("w_max must be positive and g_exc_strength non-negative"));
        }
        if !(0.0..=1.0).contains(&self.weight_init.max_fraction) {
            return Err(Error::config("weight init fraction must lie in [0, 1]"));
        }
        if !(self.exc_to_inh >= 0.0 && self.inh_to_exc >= 0.0) {
            return Err(Error::config("inhibitory coupling strengths must be non-negative"));
        }
        self.exc_params.validate()?;
        if self.inhibition_mode == InhibitionMode::InhibitoryLayer {
            self.inh_params.validate()?;
        }
        Ok(())
    }
}

fn check_ratio(r: f32) -> Result<()> {
    if (MIN_INHIBITION_RATIO..=MAX_INHIBITION_RATIO).contains(&r) {
        Ok(())
    } else {
        Err(Error::Range {
            name: "inhibition_ratio",
            value: r as f64,
            min: MIN_INHIBITION_RATIO as f64,
            max: MAX_INHIBITION_RATIO as f64,
        })
    }
}

/// Dense `n_input × n_exc` plastic weight matrix, row-major (one row per input channel).
#[derive(Debug, Clone, PartialEq)]
pub struct SynapticMatrix {
    n_input: usize,
    n_exc: usize,
    w: Vec<f32>,
    w_max: f32,
}

impl SynapticMatrix {
    pub fn zeros(n_input: usize, n_exc: usize, w_max: f32) -> Self {
        SynapticMatrix {
            n_input,
            n_exc,
            w: vec![0.0; n_input * n_exc],
            w_max,
        }
    }

    pub fn from_vec(n_input: usize, n_exc: usize, w_max: f32, w: Vec<f32>) -> Result<Self> {
        check_len("weight matrix", w.len(), n_input * n_exc)?;
        if let Some(bad) = w.iter().find(|&&x| !(0.0..=w_max).contains(&x)) {
            return Err(Error::structural(format!("weight {bad} lies outside [0, {w_max}]")));
        }
        Ok(SynapticMatrix {
            n_input,
            n_exc,
            w,
            w_max,
        })
    }

    pub fn n_input(&self) -> usize {
        self.n_input
    }

    pub fn n_exc(&self) -> usize {
        self.n_exc
    }

    pub fn w_max(&self) -> f32 {
        self.w_max
    }

    pub fn get(&self, input: usize, neuron: usize) -> f32 {
        self.w[input * self.n_exc + neuron]
    }

    pub fn set(&mut self, input: usize, neuron: usize, value: f32) {
        self.w[input * self.n_exc + neuron] = value.clamp(0.0, self.w_max);
    }

    /// All outgoing weights of one input channel.
    pub fn row(&self, input: usize) -> &[f32] {
        &self.w[input * self.n_exc..(input + 1) * self.n_exc]
    }

    pub(crate) fn row_mut(&mut self, input: usize) -> &mut [f32] {
        &mut self.w[input * self.n_exc..(input + 1) * self.n_exc]
    }

    /// Incoming weights of one excitatory neuron, copied out.
    pub fn column(&self, neuron: usize) -> Vec<f32> {
        (0..self.n_input).map(|i| self.get(i, neuron)).collect()
    }

    pub fn column_sum(&self, neuron: usize) -> f64 {
        (0..self.n_input).map(|i| self.get(i, neuron) as f64).sum()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.w
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.w
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match self.w.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::NumericalFault(format!(
                "weight ({}, {}) is {}",
                k / self.n_exc,
                k % self.n_exc,
                self.w[k]
            ))),
        }
    }
}

/// Fixed (non-plastic) inhibition wiring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InhibitionStructure {
    /// Each excitatory spike adds `strength` to the inhibitory conductance of every other excitatory neuron.
    Lateral { strength: f32 },
    /// One inhibitory neuron per excitatory neuron.
    Layer { exc_to_inh: f32, inh_to_exc: f32 },
}

impl InhibitionStructure {
    pub fn mode(&self) -> InhibitionMode {
        match self {
            InhibitionStructure::Lateral { .. } => InhibitionMode::LateralDirect,
            InhibitionStructure::Layer { .. } => InhibitionMode::InhibitoryLayer,
        }
    }

    /// Strength of the all-but-self fan-out onto the excitatory population.
    pub fn fan_out_strength(&self) -> f32 {
        match *self {
            InhibitionStructure::Lateral { strength } => strength,
            InhibitionStructure::Layer { inh_to_exc, .. } => inh_to_exc,
        }
    }

    /// Inhibitory conductance increments for the excitatory population.
    ///
    /// `source_spikes` are the excitatory spikes in lateral mode and the
    /// inhibitory-neuron spikes in layered mode; either way neuron `j`
    /// receives `strength` for every spiking source other than its own.
    pub fn propagate(&self, source_spikes: &[bool], out: &mut [f32]) -> Result<()> {
        check_len("inhibition output", out.len(), source_spikes.len())?;
        let s = self.fan_out_strength();
        let total = source_spikes.iter().filter(|&&x| x).count() as f32;
        for (o, &spiked) in out.iter_mut().zip(source_spikes) {
            *o = s * (total - spiked as u8 as f32);
        }
        Ok(())
    }
}

/// Free-function form of [`InhibitionStructure::propagate`].
pub fn propagate_inhibition(structure: &InhibitionStructure, spikes: &[bool]) -> Result<Vec<f32>> {
    let mut out = vec![0.0; spikes.len()];
    structure.propagate(spikes, &mut out)?;
    Ok(out)
}

/// A complete network: plastic weights, neuron state, and the inhibition scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub weights: SynapticMatrix,
    pub exc: NeuronState,
    /// Present only for [`InhibitionMode::InhibitoryLayer`].
    pub inh: Option<NeuronState>,
    pub inhibition: InhibitionStructure,
    /// Storage precision of the weights.
    pub precision: Precision,
    /// Storage precision of the adaptive thresholds.
    pub theta_precision: Precision,
}

impl Network {
    pub fn n_input(&self) -> usize {
        self.config.n_input
    }

    pub fn n_exc(&self) -> usize {
        self.config.n_exc
    }

    /// Number of stored neuron states (excitatory plus inhibitory).
    pub fn neuron_count(&self) -> usize {
        self.exc.len() + self.inh.as_ref().map_or(0, NeuronState::len)
    }

    pub fn mode(&self) -> InhibitionMode {
        self.config.inhibition_mode
    }

    /// Put every neuron back at rest with zero conductance. Weights and theta are kept.
    pub fn reset_state(&mut self) {
        let theta = std::mem::take(&mut self.exc.theta);
        self.exc = NeuronState::resting(self.config.n_exc, &self.config.exc_params);
        self.exc.theta = theta;
        if let Some(inh) = self.inh.as_mut() {
            *inh = NeuronState::resting(self.config.n_exc, &self.config.inh_params);
        }
    }

    pub fn set_inhibition_ratio(&mut self, r: f32) -> Result<()> {
        check_ratio(r)?;
        self.config.inhibition_ratio = r;
        if let InhibitionStructure::Lateral { strength } = &mut self.inhibition {
            *strength = r * self.config.g_exc_strength;
        }
        Ok(())
    }
}

pub fn build_network(config: &NetworkConfig) -> Result<Network> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.weight_init.seed);
    let hi = config.weight_init.max_fraction * config.w_max;
    let w = (0..config.n_input * config.n_exc)
        .map(|_| rng.random::<f32>() * hi)
        .collect();
    let weights = SynapticMatrix::from_vec(config.n_input, config.n_exc, config.w_max, w)?;

    let (inh, inhibition) = match config.inhibition_mode {
        InhibitionMode::LateralDirect => (
            None,
            InhibitionStructure::Lateral {
                strength: config.inhibition_ratio * config.g_exc_strength,
            },
        ),
        InhibitionMode::InhibitoryLayer => (
            Some(NeuronState::resting(config.n_exc, &config.inh_params)),
            InhibitionStructure::Layer {
                exc_to_inh: config.exc_to_inh,
                inh_to_exc: config.inh_to_exc,
            },
        ),
    };
    Ok(Network {
        config: config.clone(),
        weights,
        exc: NeuronState::resting(config.n_exc, &config.exc_params),
        inh,
        inhibition,
        precision: Precision::Reference,
        theta_precision: Precision::Reference,
    })
}

/// Free-function form of [`Network::set_inhibition_ratio`], returning the updated structure.
pub fn set_inhibition_ratio(network: &mut Network, r: f32) -> Result<InhibitionStructure> {
    network.set_inhibition_ratio(r)?;
    Ok(network.inhibition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lateral_network_has_no_inhibitory_neurons() {
        let net = build_network(&NetworkConfig::new(784, 100, InhibitionMode::LateralDirect)).unwrap();
        assert_eq!(net.neuron_count(), 100);
        assert!(net.inh.is_none());
    }

    #[test]
    fn layered_network_doubles_neuron_count() {
        let net = build_network(&NetworkConfig::new(784, 100, InhibitionMode::InhibitoryLayer)).unwrap();
        assert_eq!(net.neuron_count(), 200);
    }

    #[test]
    fn seeded_init_is_reproducible_and_bounded() {
        let mut cfg = NetworkConfig::new(50, 20, InhibitionMode::LateralDirect);
        cfg.weight_init.seed = 9;
        let a = build_network(&cfg).unwrap();
        let b = build_network(&cfg).unwrap();
        assert_eq!(a.weights, b.weights);
        assert!(a.weights.as_slice().iter().all(|&w| (0.0..=0.3).contains(&w)));
        cfg.weight_init.seed = 10;
        assert_ne!(build_network(&cfg).unwrap().weights, a.weights);
    }

    #[test]
    fn invalid_counts_rejected() {
        let cfg = NetworkConfig::new(0, 10, InhibitionMode::LateralDirect);
        assert!(matches!(build_network(&cfg), Err(Error::Config(_))));
        let mut cfg = NetworkConfig::new(4, 10, InhibitionMode::LateralDirect);
        cfg.inhibition_ratio = 1.0;
        assert!(matches!(build_network(&cfg), Err(Error::Range { .. })));
    }

    #[test]
    fn lateral_examples() {
        let s = 1.5;
        let st = InhibitionStructure::Lateral { strength: s };
        assert!(propagate_inhibition(&st, &[false; 10])
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));

        let mut spikes = [false; 10];
        spikes[5] = true;
        let inc = propagate_inhibition(&st, &spikes).unwrap();
        for (j, &x) in inc.iter().enumerate() {
            assert_eq!(x, if j == 5 { 0.0 } else { s });
        }

        let mut spikes = [false; 10];
        spikes[2] = true;
        spikes[7] = true;
        let inc = propagate_inhibition(&st, &spikes).unwrap();
        // pairwise enumeration: each source contributes s to everyone but itself
        let mut expected = [0.0f32; 10];
        for src in [2usize, 7] {
            for (j, e) in expected.iter_mut().enumerate() {
                if j != src {
                    *e += s;
                }
            }
        }
        assert_eq!(inc, expected.to_vec());
        assert_eq!(inc[2], s);
        assert_eq!(inc[0], 2.0 * s);
    }

    #[test]
    fn ratio_updates() {
        let mut net = build_network(&NetworkConfig::new(4, 3, InhibitionMode::LateralDirect)).unwrap();
        let w0 = net.weights.clone();
        assert_eq!(
            set_inhibition_ratio(&mut net, 3.0).unwrap(),
            InhibitionStructure::Lateral { strength: 3.0 }
        );
        let once = set_inhibition_ratio(&mut net, 2.0).unwrap();
        let twice = set_inhibition_ratio(&mut net, 2.0).unwrap();
        assert_eq!(once, twice);
        assert_eq!(net.weights, w0);
        assert!(matches!(net.set_inhibition_ratio(10.0), Err(Error::Range { .. })));
    }

    proptest! {
        #[test]
        fn no_self_inhibition(spikes in proptest::collection::vec(any::<bool>(), 1..64), s in 0.1f32..10.0) {
            let st = InhibitionStructure::Lateral { strength: s };
            let inc = propagate_inhibition(&st, &spikes).unwrap();
            let total = spikes.iter().filter(|&&x| x).count() as f32;
            for (j, &x) in inc.iter().enumerate() {
                let others = total - spikes[j] as u8 as f32;
                prop_assert!((x - s * others).abs() < 1e-4);
                prop_assert!(x >= 0.0);
            }
        }

        #[test]
        fn inhibition_is_linear_over_disjoint_sets(mask in proptest::collection::vec(0u8..3, 1..64)) {
            let st = InhibitionStructure::Lateral { strength: 2.5 };
            let a: Vec<bool> = mask.iter().map(|&m| m == 1).collect();
            let b: Vec<bool> = mask.iter().map(|&m| m == 2).collect();
            let union: Vec<bool> = mask.iter().map(|&m| m != 0).collect();
            let pa = propagate_inhibition(&st, &a).unwrap();
            let pb = propagate_inhibition(&st, &b).unwrap();
            let pu = propagate_inhibition(&st, &union).unwrap();
            for k in 0..mask.len() {
                prop_assert!((pu[k] - (pa[k] + pb[k])).abs() < 1e-3);
            }
        }
    }
}
