//! Poisson rate coding of pixel intensities.
//!
//! Channel `i` fires independently in every timestep with probability
//! `intensity_i * rate_scale * dt / 1000`. Spike times are drawn as geometric
//! inter-spike gaps, which gives exactly the same Bernoulli-per-step process
//! while only touching the random number generator once per spike.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};

pub const MAX_INTENSITY: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingParams {
    /// Presentation time per image, ms.
    pub t_sim: f32,
    pub dt: f32,
    /// Firing rate in Hz per intensity unit.
    pub rate_scale: f32,
    pub seed: u64,
    pub retry: RetryPolicy,
}

impl Default for EncodingParams {
    fn default() -> Self {
        EncodingParams {
            t_sim: 350.0,
            dt: 1.0,
            rate_scale: 0.25,
            seed: 0,
            retry: RetryPolicy::default(),
        }
    }
}

impl EncodingParams {
    pub fn steps(&self) -> usize {
        (self.t_sim / self.dt).round() as usize
    }

    pub fn spike_probability(&self, intensity: u8) -> f64 {
        intensity as f64 * self.rate_scale as f64 * self.dt as f64 / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_sim > 0.0 && self.dt > 0.0) {
            return Err(Error::config("t_sim and dt must be positive"));
        }
        if !(self.rate_scale >= 0.0) || !self.rate_scale.is_finite() {
            return Err(Error::config("rate_scale must be a non-negative number"));
        }
        if !(self.retry.rate_step >= 0.0) {
            return Err(Error::config("rate_step must be non-negative"));
        }
        let boosted = self.rate_scale + self.retry.max_retries as f32 * self.retry.rate_step;
        let p_max = MAX_INTENSITY as f64 * boosted as f64 * self.dt as f64 / 1000.0;
        if p_max > 1.0 + 1e-6 {
            return Err(Error::config(format!(
                "per-step spike probability at full intensity is {p_max}, which exceeds 1"
            )));
        }
        Ok(())
    }
}

/// Re-presentation of images that draw too few spikes.
///
/// When an image produces fewer than `min_spikes` excitatory spikes it is
/// encoded again with `rate_scale` raised by `rate_step` and presented again,
/// at most `max_retries` times. `min_spikes = 0` disables the rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub min_spikes: u32,
    pub rate_step: f32,
    pub max_retries: u32,
}

impl RetryPolicy {
    pub const OFF: RetryPolicy = RetryPolicy {
        min_spikes: 0,
        rate_step: 0.0,
        max_retries: 0,
    };
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            min_spikes: 5,
            rate_step: 0.125,
            max_retries: 16,
        }
    }
}

/// Boolean `steps × n_input` spike raster stored as per-step lists of active channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    n_input: usize,
    offsets: Vec<u32>,
    channels: Vec<u32>,
}

impl SpikeTrain {
    /// Build from per-step active channel lists. Duplicates within a step are collapsed.
    pub fn from_steps(n_input: usize, steps: &[Vec<u32>]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(steps.len() + 1);
        let mut channels = Vec::new();
        offsets.push(0);
        for active in steps {
            let mut sorted = active.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if let Some(&c) = sorted.last() {
                if c as usize >= n_input {
                    return Err(Error::structural(format!(
                        "channel {c} out of range for {n_input} inputs"
                    )));
                }
            }
            channels.extend(sorted);
            offsets.push(channels.len() as u32);
        }
        Ok(SpikeTrain {
            n_input,
            offsets,
            channels,
        })
    }

    pub fn steps(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_input(&self) -> usize {
        self.n_input
    }

    /// Channels that fire at step `t`, ascending.
    pub fn active(&self, t: usize) -> &[u32] {
        &self.channels[self.offsets[t] as usize..self.offsets[t + 1] as usize]
    }

    pub fn is_spike(&self, t: usize, channel: usize) -> bool {
        self.active(t).binary_search(&(channel as u32)).is_ok()
    }

    pub fn total_spikes(&self) -> usize {
        self.channels.len()
    }

    pub fn channel_counts(&self) -> Vec<u32> {
        let mut counts = vec![0; self.n_input];
        for &c in &self.channels {
            counts[c as usize] += 1;
        }
        counts
    }

    /// Dense boolean row for step `t`.
    pub fn step_flags(&self, t: usize) -> Vec<bool> {
        let mut flags = vec![false; self.n_input];
        for &c in self.active(t) {
            flags[c as usize] = true;
        }
        flags
    }
}

/// Which pass an image is encoded for. Each pass draws from its own family of streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train = 0,
    Assign = 1,
    Test = 2,
}

/// Stream id for image `index` of a pass. Training uses `epoch * n + i` as the index.
pub fn stream_id(phase: Phase, index: u64) -> u64 {
    ((phase as u64) << 40) | index
}

/// Encode one image. `stream` selects an independent random stream under
/// `params.seed`, so image `k` of a dataset can be encoded as stream `k`.
pub fn encode_poisson(image: &[u8], params: &EncodingParams, stream: u64) -> Result<SpikeTrain> {
    params.validate()?;
    let steps = params.steps();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(stream);

    let mut events: Vec<(u32, u32)> = Vec::new();
    for (channel, &intensity) in image.iter().enumerate() {
        let p = params.spike_probability(intensity);
        if p <= 0.0 {
            continue;
        }
        if p >= 1.0 {
            events.extend((0..steps as u32).map(|t| (t, channel as u32)));
            continue;
        }
        let gaps = Geometric::new(p).map_err(|e| Error::config(e.to_string()))?;
        let mut t: u64 = 0;
        loop {
            t += gaps.sample(&mut rng);
            if t >= steps as u64 {
                break;
            }
            events.push((t as u32, channel as u32));
            t += 1;
        }
    }

    // counting sort by step; channels stay ascending within a step
    let mut offsets = vec![0u32; steps + 1];
    for &(t, _) in &events {
        offsets[t as usize + 1] += 1;
    }
    for k in 0..steps {
        offsets[k + 1] += offsets[k];
    }
    let mut cursor = offsets.clone();
    let mut channels = vec![0u32; events.len()];
    for &(t, c) in &events {
        let slot = &mut cursor[t as usize];
        channels[*slot as usize] = c;
        *slot += 1;
    }
    Ok(SpikeTrain {
        n_input: image.len(),
        offsets,
        channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_image_is_silent() {
        let train = encode_poisson(&[0u8; 784], &EncodingParams::default(), 0).unwrap();
        assert_eq!(train.steps(), 350);
        assert_eq!(train.total_spikes(), 0);
    }

    #[test]
    fn seeded_determinism() {
        let img: Vec<u8> = (0..784).map(|k| (k % 256) as u8).collect();
        let p = EncodingParams {
            seed: 17,
            ..Default::default()
        };
        assert_eq!(
            encode_poisson(&img, &p, 3).unwrap(),
            encode_poisson(&img, &p, 3).unwrap()
        );
        assert_ne!(
            encode_poisson(&img, &p, 3).unwrap(),
            encode_poisson(&img, &p, 4).unwrap()
        );
    }

    #[test]
    fn probability_bound_enforced() {
        let p = EncodingParams {
            rate_scale: 5.0,
            ..Default::default()
        };
        assert!(matches!(encode_poisson(&[1], &p, 0), Err(Error::Config(_))));
    }

    #[test]
    fn certain_firing_fills_every_step() {
        let p = EncodingParams {
            rate_scale: 1000.0 / 255.0,
            t_sim: 10.0,
            retry: RetryPolicy::OFF,
            ..Default::default()
        };
        let train = encode_poisson(&[255, 0], &p, 0).unwrap();
        assert_eq!(train.channel_counts(), vec![10, 0]);
    }

    #[test]
    fn full_intensity_mean_count() {
        // expected count = 63.75 Hz * 0.35 s
        let expected = 255.0 * 0.25 * 0.350;
        let p = EncodingParams {
            seed: 5,
            ..Default::default()
        };
        let trials = 10_000;
        let total: u64 = (0..trials)
            .map(|k| encode_poisson(&[255], &p, k).unwrap().total_spikes() as u64)
            .sum();
        let mean = total as f64 / trials as f64;
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "mean {mean}, expected {expected}"
        );
    }

    #[test]
    fn rate_is_monotone_and_proportional() {
        let p = EncodingParams {
            seed: 11,
            ..Default::default()
        };
        let img = [32u8, 64, 128, 255];
        let trials = 4000u64;
        let mut sums = [0u64; 4];
        for k in 0..trials {
            for (s, c) in sums
                .iter_mut()
                .zip(encode_poisson(&img, &p, k).unwrap().channel_counts())
            {
                *s += c as u64;
            }
        }
        let steps = p.steps() as f64;
        for w in 0..3 {
            assert!(sums[w + 1] >= sums[w]);
        }
        for (k, &intensity) in img.iter().enumerate() {
            let prob = p.spike_probability(intensity);
            let mean = sums[k] as f64 / trials as f64;
            let sd = (steps * prob * (1.0 - prob) / trials as f64).sqrt();
            assert!((mean - steps * prob).abs() < 3.0 * sd, "channel {k}: {mean}");
        }
    }

    #[test]
    fn from_steps_round_trip() {
        let train = SpikeTrain::from_steps(4, &[vec![3, 1], vec![], vec![0]]).unwrap();
        assert_eq!(train.active(0), &[1, 3]);
        assert!(train.is_spike(2, 0));
        assert!(!train.is_spike(1, 0));
        assert_eq!(train.step_flags(0), vec![false, true, false, true]);
        assert!(SpikeTrain::from_steps(2, &[vec![2]]).is_err());
    }
}
