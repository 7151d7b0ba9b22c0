//! Class assignment, inference, and the cost models used to compare networks.

pub mod energy;
pub mod memory;
pub mod pgm;

pub use energy::{energy_proxy, EnergyProxyReport, RunCounters};
pub use memory::{memory_model, memory_report, MemoryGroup, MemoryReport};

use std::fmt;

use crate::encoding::{stream_id, EncodingParams, Phase};
use crate::error::{Error, Result};
use crate::idx::{IdxDataset, N_CLASSES};
use crate::sim::Simulator;
use crate::topology::Network;

/// Per-neuron class labels plus the responses they were derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassAssignment {
    /// `None` for neurons that never fired during assignment.
    pub labels: Vec<Option<u8>>,
    /// Spike counts per neuron and class, `n_exc` rows of `N_CLASSES`.
    pub responses: Vec<[u64; N_CLASSES]>,
}

/// Outcome of classifying one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub class: u8,
    /// Every class scored zero; `class` is then 0.
    pub low_confidence: bool,
}

impl ClassAssignment {
    /// Label each neuron with the class it responded to most. Ties go to the lower class.
    pub fn from_responses(responses: Vec<[u64; N_CLASSES]>) -> Self {
        let labels = responses
            .iter()
            .map(|row| {
                let (best, &max) = row
                    .iter()
                    .enumerate()
                    .fold((0, &0), |acc, (c, v)| if *v > *acc.1 { (c, v) } else { acc });
                (max > 0).then_some(best as u8)
            })
            .collect();
        ClassAssignment { labels, responses }
    }

    /// Assignment restored from stored labels; the response matrix is left empty.
    pub fn from_labels(labels: Vec<Option<u8>>) -> Result<Self> {
        if let Some(bad) = labels.iter().flatten().find(|&&l| l as usize >= N_CLASSES) {
            return Err(Error::structural(format!("class label {bad} out of range")));
        }
        let responses = vec![[0; N_CLASSES]; labels.len()];
        Ok(ClassAssignment { labels, responses })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn assigned_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    /// Neurons per class.
    pub fn class_sizes(&self) -> [usize; N_CLASSES] {
        let mut sizes = [0; N_CLASSES];
        for l in self.labels.iter().flatten() {
            sizes[*l as usize] += 1;
        }
        sizes
    }

    /// Score each class by the mean spike count of its neurons and pick the best.
    pub fn classify(&self, spike_counts: &[u32]) -> Result<Prediction> {
        if spike_counts.len() != self.labels.len() {
            return Err(Error::structural(format!(
                "{} spike counts for {} assigned neurons",
                spike_counts.len(),
                self.labels.len()
            )));
        }
        let sizes = self.class_sizes();
        if sizes.iter().all(|&s| s == 0) {
            return Err(Error::InferenceImpossible("no neuron has a class label".into()));
        }
        let mut sums = [0u64; N_CLASSES];
        for (label, &n) in self.labels.iter().zip(spike_counts) {
            if let Some(l) = label {
                sums[*l as usize] += n as u64;
            }
        }
        let mut best = 0;
        let mut best_score = -1.0f64;
        for c in 0..N_CLASSES {
            if sizes[c] == 0 {
                continue;
            }
            let score = sums[c] as f64 / sizes[c] as f64;
            if score > best_score {
                best = c;
                best_score = score;
            }
        }
        if best_score <= 0.0 {
            return Ok(Prediction {
                class: 0,
                low_confidence: true,
            });
        }
        Ok(Prediction {
            class: best as u8,
            low_confidence: false,
        })
    }
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_CLASSES]; N_CLASSES],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: u8, predicted: u8) {
        self.counts[truth as usize][predicted as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..N_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn row_sums(&self) -> [u64; N_CLASSES] {
        self.counts.map(|row| row.iter().sum())
    }
}

impl fmt::Display for ConfusionMatrix {
    /// Plain-text grid with a header row of predicted classes.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.total().max(1).to_string().len().max(3);
        write!(f, "{:>5}", "t\\p")?;
        for c in 0..N_CLASSES {
            write!(f, " {c:>width$}")?;
        }
        writeln!(f)?;
        for (t, row) in self.counts.iter().enumerate() {
            write!(f, "{t:>5}")?;
            for n in row {
                write!(f, " {n:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Images for which every class scored zero.
    pub low_confidence: usize,
    pub counters: RunCounters,
}

fn check_samples(dataset: &IdxDataset, net: &Network, samples: usize, what: &str) -> Result<usize> {
    let n = dataset.effective_len(samples);
    if n == 0 {
        return Err(Error::config(format!("{what} set is empty")));
    }
    if dataset.pixels() != net.n_input() {
        return Err(Error::structural(format!(
            "{what} images have {} pixels but the network has {} inputs",
            dataset.pixels(),
            net.n_input()
        )));
    }
    Ok(n)
}

/// Present the first `samples` images (0 = all) with learning off and label
/// every neuron by its strongest class response.
pub fn assign_classes(
    net: &mut Network,
    dataset: &IdxDataset,
    samples: usize,
    encoding: &EncodingParams,
) -> Result<ClassAssignment> {
    let n = check_samples(dataset, net, samples, "assignment")?;
    net.reset_state();
    let mut sim = Simulator::inference(net)?;
    let mut responses = vec![[0u64; N_CLASSES]; net.n_exc()];
    for k in 0..n {
        let stream = stream_id(Phase::Assign, k as u64);
        let counts = sim.present_image(net, dataset.image(k), encoding, stream, false)?;
        let class = dataset.label(k) as usize;
        for (row, c) in responses.iter_mut().zip(counts) {
            row[class] += c as u64;
        }
    }
    Ok(ClassAssignment::from_responses(responses))
}

/// Classify a single image with learning off.
pub fn predict(
    net: &mut Network,
    assignment: &ClassAssignment,
    image: &[u8],
    encoding: &EncodingParams,
    stream: u64,
) -> Result<Prediction> {
    if assignment.assigned_count() == 0 {
        return Err(Error::InferenceImpossible("no neuron has a class label".into()));
    }
    let mut sim = Simulator::inference(net)?;
    let counts = sim.present_image(net, image, encoding, stream, false)?;
    assignment.classify(&counts)
}

/// Classify the first `samples` test images (0 = all) and tally the results.
pub fn evaluate(
    net: &mut Network,
    assignment: &ClassAssignment,
    test_set: &IdxDataset,
    samples: usize,
    encoding: &EncodingParams,
) -> Result<Evaluation> {
    let n = check_samples(test_set, net, samples, "test")?;
    if assignment.len() != net.n_exc() {
        return Err(Error::structural(format!(
            "assignment covers {} neurons but the network has {}",
            assignment.len(),
            net.n_exc()
        )));
    }
    if assignment.assigned_count() == 0 {
        return Err(Error::InferenceImpossible("no neuron has a class label".into()));
    }
    net.reset_state();
    let mut sim = Simulator::inference(net)?;
    let mut confusion = ConfusionMatrix::default();
    let mut low_confidence = 0;
    for k in 0..n {
        let stream = stream_id(Phase::Test, k as u64);
        let counts = sim.present_image(net, test_set.image(k), encoding, stream, false)?;
        let p = assignment.classify(&counts)?;
        low_confidence += p.low_confidence as usize;
        confusion.record(test_set.label(k), p.class);
    }
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        confusion,
        low_confidence,
        counters: sim.take_counters(),
    })
}
