//! Conductance-based leaky integrate-and-fire neurons with an adaptive threshold.
//!
//! The membrane obeys
//!
//! ```text
//! tau_v dV/dt = (E_rest - V) + g_e (E_exc - V) + g_i (E_inh - V)
//! ```
//!
//! and both conductances decay exponentially between increments. The kernel
//! advances one explicit-Euler step per call; every exponential decay is a
//! factor `exp(-dt / tau)` computed once when the [`Integrator`] is built.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Physical constants of one neuron population. Times in ms, potentials in mV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub tau_v: f32,
    pub e_rest: f32,
    pub e_exc: f32,
    pub e_inh: f32,
    pub v_reset: f32,
    pub v_th: f32,
    pub theta_plus: f32,
    pub tau_theta: f32,
    pub t_refrac: f32,
    pub tau_ge: f32,
    pub tau_gi: f32,
    pub dt: f32,
}

impl NeuronParams {
    /// Excitatory population defaults (adaptive threshold enabled).
    pub fn excitatory() -> Self {
        NeuronParams {
            tau_v: 100.0,
            e_rest: -65.0,
            e_exc: 0.0,
            e_inh: -100.0,
            v_reset: -60.0,
            v_th: -52.0,
            theta_plus: 0.05,
            tau_theta: 1e7,
            t_refrac: 5.0,
            tau_ge: 1.0,
            tau_gi: 2.0,
            dt: 1.0,
        }
    }

    /// Inhibitory population of the layered topology: fast membrane, no threshold adaptation.
    pub fn inhibitory() -> Self {
        NeuronParams {
            tau_v: 10.0,
            e_rest: -60.0,
            e_exc: 0.0,
            e_inh: -85.0,
            v_reset: -45.0,
            v_th: -40.0,
            theta_plus: 0.0,
            tau_theta: 1e7,
            t_refrac: 2.0,
            tau_ge: 1.0,
            tau_gi: 2.0,
            dt: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_v", self.tau_v),
            ("tau_ge", self.tau_ge),
            ("tau_gi", self.tau_gi),
            ("tau_theta", self.tau_theta),
            ("dt", self.dt),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.e_inh < self.e_rest && self.e_rest < self.e_exc) {
            return Err(Error::config(format!(
                "equilibrium potentials must satisfy E_inh < E_rest < E_exc, got {} / {} / {}",
                self.e_inh, self.e_rest, self.e_exc
            )));
        }
        if !(self.v_reset < self.v_th) {
            return Err(Error::config(format!(
                "V_reset ({}) must lie below V_th ({})",
                self.v_reset, self.v_th
            )));
        }
        if !(self.t_refrac >= 0.0) || !(self.theta_plus >= 0.0) {
            return Err(Error::config("t_refrac and theta_plus must be non-negative"));
        }
        Ok(())
    }

    /// Number of whole timesteps a neuron stays refractory after a spike.
    pub fn refractory_steps(&self) -> u32 {
        (self.t_refrac / self.dt).ceil() as u32
    }
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams::excitatory()
    }
}

/// Per-neuron dynamic state, stored as parallel arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState {
    pub v: Vec<f32>,
    pub theta: Vec<f32>,
    pub g_e: Vec<f32>,
    pub g_i: Vec<f32>,
    pub refrac_left: Vec<u32>,
}

impl NeuronState {
    /// `n` neurons resting at `E_rest` with zero threshold offset.
    pub fn resting(n: usize, params: &NeuronParams) -> Self {
        NeuronState {
            v: vec![params.e_rest; n],
            theta: vec![0.0; n],
            g_e: vec![0.0; n],
            g_i: vec![0.0; n],
            refrac_left: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn clear_conductances(&mut self) {
        self.g_e.fill(0.0);
        self.g_i.fill(0.0);
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.v.len();
        check_len("theta", self.theta.len(), n)?;
        check_len("g_e", self.g_e.len(), n)?;
        check_len("g_i", self.g_i.len(), n)?;
        check_len("refrac_left", self.refrac_left.len(), n)
    }
}

/// A neuron population's parameters with the per-step decay factors precomputed.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: NeuronParams,
    leak_rate: f32,
    decay_ge: f32,
    decay_gi: f32,
    decay_theta: f32,
    refrac_steps: u32,
    /// When false, theta neither grows on spikes nor decays (frozen for inference).
    pub adapt_threshold: bool,
}

impl Integrator {
    pub fn new(params: NeuronParams) -> Result<Self> {
        params.validate()?;
        let decay = |tau: f32| (-(params.dt as f64) / tau as f64).exp() as f32;
        Ok(Integrator {
            leak_rate: params.dt / params.tau_v,
            decay_ge: decay(params.tau_ge),
            decay_gi: decay(params.tau_gi),
            decay_theta: decay(params.tau_theta),
            refrac_steps: params.refractory_steps(),
            adapt_threshold: true,
            params,
        })
    }

    pub fn params(&self) -> &NeuronParams {
        &self.params
    }

    /// Advance every neuron by one timestep.
    ///
    /// Conductances decay and then receive the increments; non-refractory
    /// neurons take one Euler step of the membrane equation, bounded to
    /// `[e_inh, e_exc]`, and fire when `V >= V_th + theta`. Spike flags are written into `spikes`; the return
    /// value is the number of neurons that fired.
    pub fn step(
        &self,
        state: &mut NeuronState,
        exc_increment: &[f32],
        inh_increment: &[f32],
        spikes: &mut [bool],
    ) -> Result<usize> {
        let n = state.len();
        state.check_shape()?;
        check_len("excitatory increment", exc_increment.len(), n)?;
        check_len("inhibitory increment", inh_increment.len(), n)?;
        check_len("spike buffer", spikes.len(), n)?;

        let p = &self.params;
        let mut fired = 0;
        for idx in 0..n {
            let ge = state.g_e[idx] * self.decay_ge + exc_increment[idx];
            let gi = state.g_i[idx] * self.decay_gi + inh_increment[idx];
            state.g_e[idx] = ge;
            state.g_i[idx] = gi;

            let mut spiked = false;
            if state.refrac_left[idx] > 0 {
                state.v[idx] = p.v_reset;
                state.refrac_left[idx] -= 1;
            } else {
                let v = state.v[idx];
                let dv = (p.e_rest - v) + ge * (p.e_exc - v) + gi * (p.e_inh - v);
                // Explicit Euler overshoots when many inhibitory spikes land at
                // once; the exact solution never leaves the reversal interval.
                let v = (v + self.leak_rate * dv).clamp(p.e_inh, p.e_exc);
                if !v.is_finite() {
                    return Err(Error::NumericalFault(format!(
                        "membrane potential of neuron {idx} became {v}"
                    )));
                }
                if v >= p.v_th + state.theta[idx] {
                    spiked = true;
                    state.v[idx] = p.v_reset;
                    state.refrac_left[idx] = self.refrac_steps;
                    if self.adapt_threshold {
                        state.theta[idx] += p.theta_plus;
                    }
                } else {
                    state.v[idx] = v;
                }
            }
            if self.adapt_threshold {
                state.theta[idx] *= self.decay_theta;
            }
            spikes[idx] = spiked;
            fired += spiked as usize;
        }
        Ok(fired)
    }
}

/// One-shot convenience wrapper: builds an [`Integrator`] and advances a single step.
pub fn integrate_timestep(
    state: &mut NeuronState,
    params: &NeuronParams,
    exc_increment: &[f32],
    inh_increment: &[f32],
) -> Result<Vec<bool>> {
    if exc_increment
        .iter()
        .chain(inh_increment)
        .any(|&x| !(x >= 0.0) || !x.is_finite())
    {
        return Err(Error::NumericalFault(
            "conductance increments must be finite and non-negative".into(),
        ));
    }
    let integrator = Integrator::new(*params)?;
    let mut spikes = vec![false; state.len()];
    integrator.step(state, exc_increment, inh_increment, &mut spikes)?;
    Ok(spikes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f32) -> NeuronState {
        let mut s = NeuronState::resting(1, &NeuronParams::excitatory());
        s.v[0] = v;
        s
    }

    #[test]
    fn leak_moves_toward_rest_without_crossing() {
        let params = NeuronParams::excitatory();
        let integ = Integrator::new(params).unwrap();
        let mut s = single(-60.0);
        let mut spikes = [false];
        let mut prev = s.v[0];
        for _ in 0..1000 {
            integ.step(&mut s, &[0.0], &[0.0], &mut spikes).unwrap();
            assert!(s.v[0] <= prev);
            assert!(s.v[0] >= params.e_rest);
            prev = s.v[0];
        }
    }

    #[test]
    fn leak_matches_euler_recurrence() {
        let params = NeuronParams::excitatory();
        let integ = Integrator::new(params).unwrap();
        let mut s = single(-60.0);
        let mut spikes = [false];
        for _ in 0..100 {
            integ.step(&mut s, &[0.0], &[0.0], &mut spikes).unwrap();
        }
        // independent scalar oracle in f64
        let mut v = -60.0_f64;
        for _ in 0..100 {
            v = -65.0 + (v + 65.0) * (1.0 - 1.0 / 100.0);
        }
        let closed = -65.0 + 5.0 * (1.0f64 - 0.01).powi(100);
        assert!((v - closed).abs() < 1e-9);
        assert!((s.v[0] as f64 - closed).abs() < 1e-4, "{} vs {closed}", s.v[0]);
    }

    #[test]
    fn refractory_neuron_cannot_fire() {
        let params = NeuronParams::excitatory();
        let mut s = single(0.0);
        s.refrac_left[0] = 3;
        let spikes = integrate_timestep(&mut s, &params, &[5.0], &[0.0]).unwrap();
        assert!(!spikes[0]);
        assert_eq!(s.refrac_left[0], 2);
        assert_eq!(s.v[0], params.v_reset);
    }

    #[test]
    fn spike_resets_and_raises_threshold() {
        let params = NeuronParams::excitatory();
        let mut s = single(-52.5);
        let spikes = integrate_timestep(&mut s, &params, &[10.0], &[0.0]).unwrap();
        assert!(spikes[0]);
        assert_eq!(s.v[0], params.v_reset);
        assert_eq!(s.refrac_left[0], 5);
        assert!(s.theta[0] > 0.0 && s.theta[0] <= params.theta_plus);
    }

    #[test]
    fn massive_inhibition_does_not_ring() {
        // a whole inhibitory layer firing at once: g_i * dt / tau_v far above 2
        let params = NeuronParams::excitatory();
        let integ = Integrator::new(params).unwrap();
        let mut s = single(-60.0);
        let mut spikes = [false];
        integ.step(&mut s, &[0.0], &[1700.0], &mut spikes).unwrap();
        assert_eq!(s.v[0], params.e_inh);
        for _ in 0..20 {
            integ.step(&mut s, &[0.0], &[0.0], &mut spikes).unwrap();
            assert!(!spikes[0]);
            assert!(s.v[0] >= params.e_inh && s.v[0] < params.e_rest);
        }
    }

    #[test]
    fn conductances_decay_without_input() {
        let params = NeuronParams::excitatory();
        let mut s = single(-65.0);
        s.g_e[0] = 2.0;
        s.g_i[0] = 1.0;
        integrate_timestep(&mut s, &params, &[0.0], &[0.0]).unwrap();
        assert!((s.g_e[0] - 2.0 * (-1.0f32).exp()).abs() < 1e-6);
        assert!((s.g_i[0] - (-0.5f32).exp()).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_structural() {
        let params = NeuronParams::excitatory();
        let mut s = NeuronState::resting(3, &params);
        let err = integrate_timestep(&mut s, &params, &[0.0; 2], &[0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }

    #[test]
    fn non_finite_state_is_a_fault() {
        let params = NeuronParams::excitatory();
        let mut s = single(f32::NAN);
        let err = integrate_timestep(&mut s, &params, &[0.0], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::NumericalFault(_)));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = NeuronParams::excitatory();
        p.e_inh = -50.0;
        assert!(p.validate().is_err());
        let mut p = NeuronParams::excitatory();
        p.v_reset = -40.0;
        assert!(p.validate().is_err());
        let mut p = NeuronParams::excitatory();
        p.dt = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn halving_dt_halves_leak_error() {
        // max deviation from E_rest + (V0 - E_rest) exp(-t / tau_v) over 200 ms
        let max_err = |dt: f32| {
            let mut params = NeuronParams::excitatory();
            params.dt = dt;
            let integ = Integrator::new(params).unwrap();
            let mut s = single(-55.0);
            let mut spikes = [false];
            let steps = (200.0 / dt) as usize;
            let mut worst = 0.0f64;
            for k in 1..=steps {
                integ.step(&mut s, &[0.0], &[0.0], &mut spikes).unwrap();
                let t = k as f64 * dt as f64;
                let exact = -65.0 + 10.0 * (-t / 100.0).exp();
                worst = worst.max((s.v[0] as f64 - exact).abs());
            }
            worst
        };
        let coarse = max_err(1.0);
        let fine = max_err(0.5);
        // first order: the error halves, up to f32 rounding
        assert!(fine < 0.55 * coarse, "coarse {coarse}, fine {fine}");
    }
}
