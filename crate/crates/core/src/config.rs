//! Flat `key = value` run configuration covering every tunable.
//!
//! The document is parsed as TOML, so `#` starts a comment and strings are
//! quoted. Every key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoding::{EncodingParams, RetryPolicy};
use crate::error::{Error, Result};
use crate::learning::{Rule, StdpParams};
use crate::neuron::NeuronParams;
use crate::quantize::{FixedPointFormat, Precision};
use crate::topology::{InhibitionMode, NetworkConfig, WeightInit};
use crate::train::TrainOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    // topology
    pub n_input: usize,
    pub n_exc: usize,
    pub inhibition_mode: InhibitionMode,
    pub inhibition_ratio: f32,
    pub g_exc_strength: f32,
    pub exc_to_inh: f32,
    pub inh_to_exc: f32,
    pub w_max: f32,
    pub init_max_fraction: f32,

    // excitatory neurons
    pub exc_tau_v: f32,
    pub exc_e_rest: f32,
    pub exc_e_exc: f32,
    pub exc_e_inh: f32,
    pub exc_v_reset: f32,
    pub exc_v_th: f32,
    pub exc_theta_plus: f32,
    pub exc_tau_theta: f32,
    pub exc_t_refrac: f32,
    pub exc_tau_ge: f32,
    pub exc_tau_gi: f32,

    // inhibitory neurons (layered topology only)
    pub inh_tau_v: f32,
    pub inh_e_rest: f32,
    pub inh_e_exc: f32,
    pub inh_e_inh: f32,
    pub inh_v_reset: f32,
    pub inh_v_th: f32,
    pub inh_t_refrac: f32,
    pub inh_tau_ge: f32,
    pub inh_tau_gi: f32,

    // encoding
    pub dt: f32,
    pub t_sim: f32,
    pub rate_scale: f32,
    /// Images drawing fewer excitatory spikes than this are presented again at a higher rate (0 = never).
    pub min_spikes: u32,
    pub rate_step: f32,
    pub max_retries: u32,

    // plasticity
    pub rule: Rule,
    pub eta_pre: f32,
    pub eta_post: f32,
    /// Weight-dependence exponent of the pairwise rules. The batched rule always uses 1.
    pub mu: f32,
    pub tau_trace: f32,
    pub t_step: u32,
    pub n_spikes_th: u32,
    pub normalize: bool,
    /// Normalization target as a fraction of `n_input * w_max`.
    pub norm_fraction: f32,
    pub require_window_spike: bool,

    // training and evaluation
    pub train_samples: usize,
    pub epochs: usize,
    pub metrics_interval: usize,
    pub assign_samples: usize,
    pub test_samples: usize,

    // quantization
    /// Word length used for memory accounting and the design-space scan; 32 means reference precision.
    pub wordlength: u8,
    pub quantize_theta: bool,
    pub sweep_formats: String,

    // design-space exploration
    pub dse_mem_bytes: u64,
    pub dse_e_train: f64,
    pub dse_e_inf: f64,
    pub dse_n_add: usize,

    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = NeuronParams::excitatory();
        let i = NeuronParams::inhibitory();
        let net = NetworkConfig::new(784, 100, InhibitionMode::LateralDirect);
        let enc = EncodingParams::default();
        let stdp = StdpParams::baseline();
        RunConfig {
            seed: 0,
            n_input: net.n_input,
            n_exc: net.n_exc,
            inhibition_mode: net.inhibition_mode,
            inhibition_ratio: net.inhibition_ratio,
            g_exc_strength: net.g_exc_strength,
            exc_to_inh: net.exc_to_inh,
            inh_to_exc: net.inh_to_exc,
            w_max: net.w_max,
            init_max_fraction: net.weight_init.max_fraction,
            exc_tau_v: e.tau_v,
            exc_e_rest: e.e_rest,
            exc_e_exc: e.e_exc,
            exc_e_inh: e.e_inh,
            exc_v_reset: e.v_reset,
            exc_v_th: e.v_th,
            exc_theta_plus: e.theta_plus,
            exc_tau_theta: e.tau_theta,
            exc_t_refrac: e.t_refrac,
            exc_tau_ge: e.tau_ge,
            exc_tau_gi: e.tau_gi,
            inh_tau_v: i.tau_v,
            inh_e_rest: i.e_rest,
            inh_e_exc: i.e_exc,
            inh_e_inh: i.e_inh,
            inh_v_reset: i.v_reset,
            inh_v_th: i.v_th,
            inh_t_refrac: i.t_refrac,
            inh_tau_ge: i.tau_ge,
            inh_tau_gi: i.tau_gi,
            dt: enc.dt,
            t_sim: enc.t_sim,
            rate_scale: enc.rate_scale,
            min_spikes: enc.retry.min_spikes,
            rate_step: enc.retry.rate_step,
            max_retries: enc.retry.max_retries,
            rule: Rule::FSpiNN,
            eta_pre: stdp.eta_pre,
            eta_post: stdp.eta_post,
            mu: stdp.mu,
            tau_trace: crate::trace::DEFAULT_TAU_TRACE,
            t_step: stdp.t_step,
            n_spikes_th: stdp.n_spikes_th,
            normalize: true,
            norm_fraction: 0.1,
            require_window_spike: stdp.require_window_spike,
            train_samples: 10_000,
            epochs: 1,
            metrics_interval: 1_000,
            assign_samples: 10_000,
            test_samples: 10_000,
            wordlength: 8,
            quantize_theta: true,
            sweep_formats: "4,8,16,32".into(),
            dse_mem_bytes: 1_000_000,
            dse_e_train: f64::INFINITY,
            dse_e_inf: f64::INFINITY,
            dse_n_add: 100,
            threads: 1,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        RunConfig::from_toml(&text)
    }

    /// The effective configuration as a document that [`RunConfig::from_toml`] reads back unchanged.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.network_config().validate()?;
        self.encoding().validate()?;
        self.stdp_params().validate()?;
        self.precision()?;
        self.sweep_precisions()?;
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.tau_trace > 0.0) {
            return Err(Error::config("tau_trace must be positive"));
        }
        if !(self.norm_fraction > 0.0) {
            return Err(Error::config("norm_fraction must be positive"));
        }
        if !(self.dse_e_train >= 0.0 && self.dse_e_inf >= 0.0) {
            return Err(Error::config("energy budgets must be non-negative"));
        }
        if self.threads == 0 {
            return Err(Error::config("threads must be at least 1"));
        }
        Ok(())
    }

    pub fn exc_params(&self) -> NeuronParams {
        NeuronParams {
            tau_v: self.exc_tau_v,
            e_rest: self.exc_e_rest,
            e_exc: self.exc_e_exc,
            e_inh: self.exc_e_inh,
            v_reset: self.exc_v_reset,
            v_th: self.exc_v_th,
            theta_plus: self.exc_theta_plus,
            tau_theta: self.exc_tau_theta,
            t_refrac: self.exc_t_refrac,
            tau_ge: self.exc_tau_ge,
            tau_gi: self.exc_tau_gi,
            dt: self.dt,
        }
    }

    pub fn inh_params(&self) -> NeuronParams {
        NeuronParams {
            tau_v: self.inh_tau_v,
            e_rest: self.inh_e_rest,
            e_exc: self.inh_e_exc,
            e_inh: self.inh_e_inh,
            v_reset: self.inh_v_reset,
            v_th: self.inh_v_th,
            theta_plus: 0.0,
            tau_theta: self.exc_tau_theta,
            t_refrac: self.inh_t_refrac,
            tau_ge: self.inh_tau_ge,
            tau_gi: self.inh_tau_gi,
            dt: self.dt,
        }
    }

    pub fn network_config(&self) -> NetworkConfig {
        self.network_config_with(self.n_exc)
    }

    pub fn network_config_with(&self, n_exc: usize) -> NetworkConfig {
        NetworkConfig {
            n_input: self.n_input,
            n_exc,
            inhibition_mode: self.inhibition_mode,
            inhibition_ratio: self.inhibition_ratio,
            g_exc_strength: self.g_exc_strength,
            w_max: self.w_max,
            weight_init: WeightInit {
                max_fraction: self.init_max_fraction,
                seed: self.seed,
            },
            exc_params: self.exc_params(),
            inh_params: self.inh_params(),
            exc_to_inh: self.exc_to_inh,
            inh_to_exc: self.inh_to_exc,
        }
    }

    pub fn encoding(&self) -> EncodingParams {
        EncodingParams {
            t_sim: self.t_sim,
            dt: self.dt,
            rate_scale: self.rate_scale,
            seed: self.seed,
            retry: RetryPolicy {
                min_spikes: self.min_spikes,
                rate_step: self.rate_step,
                max_retries: self.max_retries,
            },
        }
    }

    pub fn stdp_params(&self) -> StdpParams {
        StdpParams {
            rule: self.rule,
            eta_pre: self.eta_pre,
            eta_post: self.eta_post,
            mu: if self.rule == Rule::FSpiNN { 1.0 } else { self.mu },
            w_max: self.w_max,
            t_step: self.t_step,
            n_spikes_th: self.n_spikes_th,
            norm_target: self
                .normalize
                .then_some(self.norm_fraction * self.n_input as f32 * self.w_max),
            require_window_spike: self.require_window_spike,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            samples: self.train_samples,
            epochs: self.epochs,
            metrics_interval: self.metrics_interval,
            encoding: self.encoding(),
            stdp: self.stdp_params(),
            tau_trace: self.tau_trace,
        }
    }

    pub fn precision(&self) -> Result<Precision> {
        match self.wordlength {
            32 => Ok(Precision::Reference),
            n => Ok(Precision::Fixed(FixedPointFormat::weight(n)?)),
        }
    }

    pub fn sweep_precisions(&self) -> Result<Vec<Precision>> {
        parse_format_list(&self.sweep_formats)
    }
}

/// Parse a comma-separated list of word lengths; `ref`, `fp32` and `32` mean reference precision.
pub fn parse_format_list(list: &str) -> Result<Vec<Precision>> {
    let formats = list
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| match t.trim() {
            "32" => Ok(Precision::Reference),
            t => Precision::parse_weight(t),
        })
        .collect::<Result<Vec<_>>>()?;
    if formats.is_empty() {
        return Err(Error::config("format list is empty"));
    }
    Ok(formats)
}
