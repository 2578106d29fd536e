use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;
use crate::pointprocess::{Family, PointProcess};
use crate::rng::{self, Rng};
use crate::vowelset::VowelSet;

/// A Bernoulli point process used as an importance-sampling proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliProposal {
    phi: Vec<f64>,
    #[serde(skip)]
    log_phi: Vec<f64>,
}

impl BernoulliProposal {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if phi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config("proposal potentials must be finite and non-negative".into()));
        }
        let log_phi = phi.iter().map(|p| p.ln()).collect();
        Ok(BernoulliProposal { phi, log_phi })
    }

    /// `phi = 1` everywhere: every subset equally likely.
    pub fn uniform(n: usize) -> Self {
        Self::new(vec![1.0; n]).expect("unit potentials")
    }

    /// The BPP sharing a model's unary potentials.
    pub fn from_process(model: &PointProcess) -> Result<Self> {
        Self::new(model.phis().to_vec())
    }

    /// Smoothed empirical marginals of a set of inventories:
    /// `q_i = (count_i + 1/2) / (M + 1)`, `phi_i = q_i / (1 - q_i)`.
    pub fn from_marginals(n: usize, sets: &[VowelSet]) -> Self {
        let mut counts = vec![0usize; n];
        for s in sets {
            for i in *s {
                counts[i] += 1;
            }
        }
        let m = sets.len() as f64;
        let phi = counts
            .into_iter()
            .map(|c| {
                let q = (c as f64 + 0.5) / (m + 1.0);
                q / (1.0 - q)
            })
            .collect();
        Self::new(phi).expect("positive potentials")
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    fn ensure_logs(&mut self) {
        if self.log_phi.len() != self.phi.len() {
            self.log_phi = self.phi.iter().map(|p| p.ln()).collect();
        }
    }

    pub fn log_normalizer(&self) -> f64 {
        self.phi.iter().map(|p| p.ln_1p()).sum()
    }

    pub fn log_score(&self, v: VowelSet) -> f64 {
        if self.log_phi.len() == self.phi.len() {
            v.iter().map(|i| self.log_phi[i]).sum()
        } else {
            v.iter().map(|i| self.phi[i].ln()).sum()
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> VowelSet {
        let mut s = VowelSet::EMPTY;
        for (i, &p) in self.phi.iter().enumerate() {
            if rng.random::<f64>() < p / (1.0 + p) {
                s.insert(i);
            }
        }
        s
    }

    /// Reject a proposal that cannot reach sets the target can.
    pub fn check_covers(&self, target: &PointProcess) -> Result<()> {
        if self.len() != target.len() {
            return Err(Error::Dimension { expected: target.len(), got: self.len() });
        }
        for i in 0..self.len() {
            if self.phi[i] == 0.0 && target.phi(i) > 0.0 {
                return Err(Error::Config(format!(
                    "proposal assigns zero potential to vowel {i}, which the target can include"
                )));
            }
        }
        Ok(())
    }
}

impl BernoulliProposal {
    /// Rebuild cached logs after deserialization.
    pub fn restored(mut self) -> Self {
        self.ensure_logs();
        self
    }
}

/// An importance-sampled log-partition estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub log_partition: f64,
    pub samples: usize,
    /// Effective sample size of the normalized weights.
    pub effective_samples: f64,
    pub seed: u64,
}

/// `log Z_MPP ≈ log Z_q + log mean_s exp(s_MPP(V_s) - s_q(V_s))` with
/// `V_s ~ q`. The mean weight is unbiased for `Z_MPP / Z_q`; its log is
/// biased low by a term that vanishes as the sample count grows.
pub fn estimate_log_partition(
    mpp: &PointProcess,
    proposal: &BernoulliProposal,
    n_samples: usize,
    seed: u64,
) -> Result<PartitionEstimate> {
    if n_samples == 0 {
        return Err(Error::Config("importance sampling needs at least one sample".into()));
    }
    if mpp.family() != Family::Mpp {
        return Err(Error::Config(format!("importance sampling targets an MPP, got a {}", mpp.family())));
    }
    proposal.check_covers(mpp)?;
    let mut proposal = proposal.clone();
    proposal.ensure_logs();
    let mut rng = rng::stream(seed, rng::streams::EVAL);
    let log_w: Vec<f64> = (0..n_samples)
        .map(|_| {
            let v = proposal.sample(&mut rng);
            mpp.mpp_log_unnormalized(v) - proposal.log_score(v)
        })
        .collect();
    let lse = log_sum_exp(&log_w);
    let log_partition = proposal.log_normalizer() + lse - (n_samples as f64).ln();
    let lse2 = log_sum_exp(&log_w.iter().map(|w| 2.0 * w).collect::<Vec<_>>());
    let effective_samples = if lse.is_finite() { (2.0 * lse - lse2).exp() } else { 0.0 };
    Ok(PartitionEstimate { log_partition, samples: n_samples, effective_samples, seed })
}
