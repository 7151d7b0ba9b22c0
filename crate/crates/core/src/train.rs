//! Unsupervised training loop with periodic accuracy and cost metrics.

use crate::encoding::{stream_id, EncodingParams, Phase};
use crate::error::{Error, Result};
use crate::eval::{energy_proxy, memory_report, ClassAssignment, RunCounters};
use crate::idx::{IdxDataset, N_CLASSES};
use crate::learning::StdpParams;
use crate::sim::Simulator;
use crate::topology::Network;

pub const METRICS_CSV_HEADER: &str = "epoch,samples_seen,accuracy,proxy_energy,bytes";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Images per epoch, taken from the front of the dataset (0 = all).
    pub samples: usize,
    pub epochs: usize,
    /// Emit a metrics row every this many images (0 = only at the end).
    pub metrics_interval: usize,
    pub encoding: EncodingParams,
    pub stdp: StdpParams,
    pub tau_trace: f32,
}

/// One point of the learning curve.
///
/// `accuracy` is the running training accuracy over the images of the last
/// interval, each classified with the neuron labels learned from the interval
/// before it; the first interval therefore scores 0. `proxy_energy` is
/// cumulative since the start of training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub samples_seen: usize,
    pub accuracy: f64,
    pub proxy_energy: f64,
    pub bytes: u64,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.6},{:.1},{}",
            self.epoch, self.samples_seen, self.accuracy, self.proxy_energy, self.bytes
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub metrics: Vec<MetricsRow>,
    pub counters: RunCounters,
    pub samples_seen: usize,
}

struct Window {
    counts: Vec<Vec<u32>>,
    labels: Vec<u8>,
    previous: Option<ClassAssignment>,
}

impl Window {
    fn close(&mut self, n_exc: usize) -> f64 {
        let accuracy = match &self.previous {
            Some(a) if a.assigned_count() > 0 => {
                let correct = self
                    .counts
                    .iter()
                    .zip(&self.labels)
                    .filter(|(c, &l)| {
                        a.classify(c)
                            .map(|p| !p.low_confidence && p.class == l)
                            .unwrap_or(false)
                    })
                    .count();
                correct as f64 / self.labels.len() as f64
            }
            _ => 0.0,
        };
        let mut responses = vec![[0u64; N_CLASSES]; n_exc];
        for (c, &l) in self.counts.iter().zip(&self.labels) {
            for (row, &n) in responses.iter_mut().zip(c) {
                row[l as usize] += n as u64;
            }
        }
        self.previous = Some(ClassAssignment::from_responses(responses));
        self.counts.clear();
        self.labels.clear();
        accuracy
    }
}

/// Train `net` in place. `on_row` sees every metrics row as soon as it is produced.
pub fn train(
    net: &mut Network,
    dataset: &IdxDataset,
    opts: &TrainOptions,
    mut on_row: impl FnMut(&MetricsRow) -> Result<()>,
) -> Result<TrainOutcome> {
    let n = dataset.effective_len(opts.samples);
    if n == 0 {
        return Err(Error::config("training set is empty"));
    }
    if dataset.pixels() != net.n_input() {
        return Err(Error::structural(format!(
            "training images have {} pixels but the network has {} inputs",
            dataset.pixels(),
            net.n_input()
        )));
    }
    let mut sim = Simulator::new(net, opts.stdp, opts.tau_trace)?;
    let bytes = memory_report(net, net.precision).total_bytes;
    let mut window = Window {
        counts: Vec::new(),
        labels: Vec::new(),
        previous: None,
    };
    let mut metrics = Vec::new();
    let mut seen = 0;
    for epoch in 0..opts.epochs {
        for k in 0..n {
            let stream = stream_id(Phase::Train, (epoch * n + k) as u64);
            let counts = sim.present_image(net, dataset.image(k), &opts.encoding, stream, true)?;
            window.counts.push(counts);
            window.labels.push(dataset.label(k));
            seen += 1;
            let last = epoch + 1 == opts.epochs && k + 1 == n;
            let due = opts.metrics_interval > 0 && seen % opts.metrics_interval == 0;
            if due || (last && !window.labels.is_empty()) {
                let row = MetricsRow {
                    epoch,
                    samples_seen: seen,
                    accuracy: window.close(net.n_exc()),
                    proxy_energy: energy_proxy(&sim.counters).total,
                    bytes,
                };
                on_row(&row)?;
                metrics.push(row);
            }
        }
    }
    net.weights.check_finite()?;
    Ok(TrainOutcome {
        metrics,
        counters: sim.take_counters(),
        samples_seen: seen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_network, InhibitionMode, NetworkConfig};

    fn toy_set(n: usize) -> IdxDataset {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for k in 0..n {
            let class = (k % 2) as u8;
            images.extend((0..16).map(|p| if (p < 8) == (class == 0) { 200 } else { 0 }));
            labels.push(class);
        }
        IdxDataset::new(4, 4, images, labels).unwrap()
    }

    fn opts() -> TrainOptions {
        TrainOptions {
            samples: 0,
            epochs: 1,
            metrics_interval: 4,
            encoding: EncodingParams::default(),
            stdp: StdpParams::fspinn(),
            tau_trace: 20.0,
        }
    }

    #[test]
    fn metrics_rows_per_interval() {
        let mut net = build_network(&NetworkConfig::new(16, 4, InhibitionMode::LateralDirect)).unwrap();
        let mut seen_rows = 0;
        let out = train(&mut net, &toy_set(10), &opts(), |_| {
            seen_rows += 1;
            Ok(())
        })
        .unwrap();
        let at: Vec<usize> = out.metrics.iter().map(|r| r.samples_seen).collect();
        assert_eq!(at, vec![4, 8, 10]);
        assert_eq!(seen_rows, 3);
        assert_eq!(out.metrics[0].accuracy, 0.0);
        assert!(out.metrics.windows(2).all(|w| w[0].proxy_energy <= w[1].proxy_energy));
        assert!(out.counters.integration_steps >= 10 * 350 * 4);
    }

    #[test]
    fn empty_set_rejected() {
        let mut net = build_network(&NetworkConfig::new(16, 4, InhibitionMode::LateralDirect)).unwrap();
        let empty = IdxDataset::new(4, 4, vec![], vec![]).unwrap();
        assert!(matches!(
            train(&mut net, &empty, &opts(), |_| Ok(())),
            Err(Error::Config(_))
        ));
    }
}
