//! Budget-constrained search over the number of excitatory neurons.
//!
//! Candidates `n_add, 2 n_add, ...` are visited in ascending order while their
//! projected memory fits the budget. Each candidate is trained; inference runs
//! only if the training energy fits; the candidate is kept when both energy
//! budgets hold and its accuracy strictly beats the best kept so far.

use crate::error::{Error, Result};
use crate::eval::{assign_classes, energy_proxy, evaluate, memory_model, ClassAssignment};
use crate::idx::IdxDataset;
use crate::quantize::{quantize_model, Precision};
use crate::topology::{build_network, Network};
use crate::train::train;
use crate::RunConfig;

pub const DSE_CSV_HEADER: &str = "n_exc,bytes,e_train_proxy,e_inf_proxy,accuracy,feasible,saved";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub mem: u64,
    pub e_train: f64,
    pub e_inf: f64,
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_train >= 0.0 && self.e_inf >= 0.0) {
            return Err(Error::config("energy budgets must be non-negative"));
        }
        Ok(())
    }
}

/// Result of training one candidate.
#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    pub e_train: f64,
}

/// Result of evaluating one trained candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inferred {
    pub e_inf: f64,
    pub accuracy: f64,
}

/// The three things the search needs to know about a candidate size.
pub trait CandidateEvaluator {
    type Model;
    fn projected_bytes(&self, n_exc: usize) -> u64;
    fn train(&mut self, n_exc: usize) -> Result<Trained<Self::Model>>;
    fn infer(&mut self, n_exc: usize, model: &mut Self::Model) -> Result<Inferred>;
}

#[derive(Debug, Clone)]
pub struct ModelRecord<M> {
    pub n_exc: usize,
    pub bytes: u64,
    pub e_train: f64,
    /// `None` when the training budget failed and inference was skipped.
    pub e_inf: Option<f64>,
    pub accuracy: Option<f64>,
    pub fits_train: bool,
    pub fits_inf: bool,
    pub saved: bool,
    pub model: M,
}

impl<M> ModelRecord<M> {
    pub fn feasible(&self) -> bool {
        self.fits_train && self.fits_inf
    }

    pub fn csv_line(&self) -> String {
        let opt = |x: Option<f64>, prec: usize| x.map(|v| format!("{v:.prec$}")).unwrap_or_default();
        format!(
            "{},{},{:.1},{},{},{},{}",
            self.n_exc,
            self.bytes,
            self.e_train,
            opt(self.e_inf, 1),
            opt(self.accuracy, 6),
            self.feasible(),
            self.saved
        )
    }
}

#[derive(Debug, Clone)]
pub struct DseOutcome<M> {
    /// Every visited candidate, in scan order. Only the saved one keeps its model.
    pub records: Vec<ModelRecord<Option<M>>>,
    pub best: Option<ModelRecord<M>>,
}

/// Train and, if the training budget allows, evaluate one candidate.
pub fn measure_candidate<E: CandidateEvaluator>(
    n_exc: usize,
    budget: &Budget,
    evaluator: &mut E,
) -> Result<ModelRecord<E::Model>> {
    if n_exc == 0 {
        return Err(Error::config("candidate needs at least one neuron"));
    }
    let attach = |e: Error| Error::Candidate {
        n_exc,
        source: Box::new(e),
    };
    let bytes = evaluator.projected_bytes(n_exc);
    let Trained { mut model, e_train } = evaluator.train(n_exc).map_err(attach)?;
    let fits_train = e_train <= budget.e_train;
    let (e_inf, accuracy, fits_inf) = if fits_train {
        let r = evaluator.infer(n_exc, &mut model).map_err(attach)?;
        (Some(r.e_inf), Some(r.accuracy), r.e_inf <= budget.e_inf)
    } else {
        (None, None, false)
    };
    Ok(ModelRecord {
        n_exc,
        bytes,
        e_train,
        e_inf,
        accuracy,
        fits_train,
        fits_inf,
        saved: false,
        model,
    })
}

pub fn run_dse<E: CandidateEvaluator>(
    budget: &Budget,
    n_add: usize,
    evaluator: &mut E,
) -> Result<DseOutcome<E::Model>> {
    budget.validate()?;
    if n_add == 0 {
        return Err(Error::config("n_add must be at least 1"));
    }
    let mut records: Vec<ModelRecord<Option<E::Model>>> = Vec::new();
    let mut best: Option<ModelRecord<E::Model>> = None;
    let mut acc_saved = 0.0;
    let mut n_exc = n_add;
    while evaluator.projected_bytes(n_exc) <= budget.mem {
        let mut rec = measure_candidate(n_exc, budget, evaluator)?;
        let acc = rec.accuracy.unwrap_or(0.0);
        if rec.feasible() && acc > acc_saved {
            acc_saved = acc;
            for r in &mut records {
                r.saved = false;
            }
            rec.saved = true;
            let (summary, model) = rec.split();
            records.push(summary);
            best = Some(records.last().unwrap().with_model(model));
        } else {
            records.push(rec.split().0);
        }
        n_exc += n_add;
    }
    Ok(DseOutcome { records, best })
}

impl<M> ModelRecord<M> {
    fn with_model<N>(&self, model: N) -> ModelRecord<N> {
        ModelRecord {
            n_exc: self.n_exc,
            bytes: self.bytes,
            e_train: self.e_train,
            e_inf: self.e_inf,
            accuracy: self.accuracy,
            fits_train: self.fits_train,
            fits_inf: self.fits_inf,
            saved: self.saved,
            model,
        }
    }

    fn split<N>(self) -> (ModelRecord<Option<N>>, M) {
        let summary = self.with_model(None);
        (summary, self.model)
    }
}

/// A trained network together with its class labels.
#[derive(Debug, Clone)]
pub struct TrainedNetwork {
    pub network: Network,
    pub assignment: Option<ClassAssignment>,
}

/// Candidate evaluation on real data: train on the training set, label
/// neurons on the first `assign_samples` training images, quantize to the
/// configured word length, and classify the test set.
pub struct NetworkEvaluator<'a> {
    pub config: &'a RunConfig,
    pub train_set: &'a IdxDataset,
    pub test_set: &'a IdxDataset,
    pub precision: Precision,
}

impl CandidateEvaluator for NetworkEvaluator<'_> {
    type Model = TrainedNetwork;

    fn projected_bytes(&self, n_exc: usize) -> u64 {
        memory_model(self.config.n_input, n_exc, self.config.inhibition_mode, self.precision).total_bytes
    }

    fn train(&mut self, n_exc: usize) -> Result<Trained<TrainedNetwork>> {
        let mut network = build_network(&self.config.network_config_with(n_exc))?;
        let out = train(&mut network, self.train_set, &self.config.train_options(), |_| Ok(()))?;
        Ok(Trained {
            model: TrainedNetwork {
                network,
                assignment: None,
            },
            e_train: energy_proxy(&out.counters).total,
        })
    }

    fn infer(&mut self, _n_exc: usize, model: &mut TrainedNetwork) -> Result<Inferred> {
        let enc = self.config.encoding();
        let mut q = quantize_model(&model.network, self.precision, self.config.quantize_theta)?;
        let assignment = assign_classes(&mut q, self.train_set, self.config.assign_samples, &enc)?;
        let eval = evaluate(&mut q, &assignment, self.test_set, self.config.test_samples, &enc)?;
        model.network = q;
        model.assignment = Some(assignment);
        Ok(Inferred {
            e_inf: energy_proxy(&eval.counters).total,
            accuracy: eval.accuracy,
        })
    }
}
