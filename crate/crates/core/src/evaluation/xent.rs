use serde::{Deserialize, Serialize};

use crate::corpus::Inventory;
use crate::error::{Error, Result};
use crate::inference::{enumerate_exact, estimate_log_partition, BernoulliProposal};
use crate::pointprocess::{Family, PointProcess, TrainedModel};

/// How the MPP partition function is obtained at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    /// Importance samples for the MPP partition function.
    pub samples: usize,
    /// Enumerate exactly when the universe has at most this many vowels.
    pub exact_limit: usize,
    /// Cloze deletions drawn per language.
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { samples: 10_000, exact_limit: 16, repetitions: 1, seed: 0 }
    }
}

/// Normalizer used for a cross-entropy computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionInfo {
    pub log_partition: f64,
    /// `None` when exact.
    pub samples: Option<usize>,
    pub effective_samples: Option<f64>,
}

/// Held-out cross-entropy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossEntropyReport {
    /// Mean negative log-probability in nats; `inf` when some language has
    /// probability zero.
    pub nats: f64,
    /// `(language, log p(V))` in input order.
    pub per_language: Vec<(String, f64)>,
    pub zero_probability: Vec<String>,
    pub partition: PartitionInfo,
}

/// `log Z` of a point process. BPP and DPP are closed form; an MPP is
/// enumerated when small, otherwise importance sampled from `proposal`
/// (uniform when absent).
pub fn log_partition(
    process: &PointProcess,
    proposal: Option<&BernoulliProposal>,
    settings: &EvalSettings,
) -> Result<PartitionInfo> {
    if let Some(z) = process.log_normalizer() {
        return Ok(PartitionInfo { log_partition: z, samples: None, effective_samples: None });
    }
    if process.len() <= settings.exact_limit {
        let exact = enumerate_exact(process, settings.exact_limit)?;
        return Ok(PartitionInfo { log_partition: exact.log_partition, samples: None, effective_samples: None });
    }
    let uniform;
    let q = match proposal {
        Some(q) => q,
        None => {
            uniform = BernoulliProposal::uniform(process.len());
            &uniform
        }
    };
    let est = estimate_log_partition(process, q, settings.samples, settings.seed)?;
    log::info!(
        "MPP log Z = {:.4} from {} importance samples (ESS {:.1})",
        est.log_partition,
        est.samples,
        est.effective_samples
    );
    Ok(PartitionInfo {
        log_partition: est.log_partition,
        samples: Some(est.samples),
        effective_samples: Some(est.effective_samples),
    })
}

/// Mean `-log p(V)` of `test` under a point process.
pub fn cross_entropy_process(
    process: &PointProcess,
    proposal: Option<&BernoulliProposal>,
    test: &[Inventory],
    settings: &EvalSettings,
) -> Result<CrossEntropyReport> {
    if test.is_empty() {
        return Err(Error::Config("cross-entropy needs at least one test language".into()));
    }
    let partition = log_partition(process, proposal, settings)?;
    let z = (process.family() == Family::Mpp).then_some(partition.log_partition);
    let mut per_language = Vec::with_capacity(test.len());
    let mut zero_probability = Vec::new();
    let mut total = 0.0;
    for inv in test {
        if inv.vowels.span() > process.len() {
            return Err(Error::Config(format!("inventory of {} lies outside the model's universe", inv.language)));
        }
        let lp = process.log_prob(inv.vowels, z)?;
        if lp == f64::NEG_INFINITY {
            zero_probability.push(inv.language.clone());
        }
        total -= lp;
        per_language.push((inv.language.clone(), lp));
    }
    if !zero_probability.is_empty() {
        log::warn!("{} test languages have probability zero: {:?}", zero_probability.len(), zero_probability);
    }
    Ok(CrossEntropyReport { nats: total / test.len() as f64, per_language, zero_probability, partition })
}

/// Cross-entropy of a trained model; an MPP uses its stored proposal.
pub fn cross_entropy(model: &TrainedModel, test: &[Inventory], settings: &EvalSettings) -> Result<CrossEntropyReport> {
    let proposal = model.proposal_phi.clone().map(BernoulliProposal::new).transpose()?;
    cross_entropy_process(&model.process, proposal.as_ref(), test, settings)
}
