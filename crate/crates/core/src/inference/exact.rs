use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;
use crate::pointprocess::PointProcess;
use crate::vowelset::VowelSet;

pub const DEFAULT_ENUMERATION_LIMIT: usize = 20;

/// The full distribution over all `2^N` subsets of a small universe.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub n: usize,
    /// Indexed by subset bitmask.
    pub log_probs: Vec<f64>,
    pub log_partition: f64,
}

impl ExactDistribution {
    pub fn log_prob(&self, v: VowelSet) -> f64 {
        self.log_probs[v.bits() as usize]
    }

    pub fn prob(&self, v: VowelSet) -> f64 {
        self.log_prob(v).exp()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VowelSet, f64)> + '_ {
        self.log_probs.iter().enumerate().map(|(b, &lp)| (VowelSet::from_bits(b as u128), lp.exp()))
    }

    /// `P(i in V)`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.iter().filter(|(v, _)| v.contains(i)).map(|(_, p)| p).sum()
    }

    /// `P(i in V and j in V)`.
    pub fn pair_marginal(&self, i: usize, j: usize) -> f64 {
        self.iter().filter(|(v, _)| v.contains(i) && v.contains(j)).map(|(_, p)| p).sum()
    }

    /// Entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.log_probs.iter().filter(|lp| lp.is_finite()).map(|&lp| -lp.exp() * lp).sum()
    }
}

/// Normalize a model by summing over every subset.
pub fn enumerate_exact(model: &PointProcess, limit: usize) -> Result<ExactDistribution> {
    let n = model.len();
    if n > limit || n >= 63 {
        return Err(Error::Config(format!("cannot enumerate {n} vowels (limit {limit})")));
    }
    let scores = model.enumerate_log_scores();
    let log_partition = log_sum_exp(&scores);
    if !log_partition.is_finite() {
        return Err(Error::Numerical(format!("partition function is {log_partition}")));
    }
    let log_probs = scores.into_iter().map(|s| s - log_partition).collect();
    Ok(ExactDistribution { n, log_probs, log_partition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointprocess::{embeddings_from_columns, Family};

    #[test]
    fn uniform_bpp_quarters() {
        let m = PointProcess::from_potentials(Family::Bpp, vec![1.0, 1.0], None).unwrap();
        let d = enumerate_exact(&m, 20).unwrap();
        for (_, p) in d.iter() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn dpp_diagonal() {
        let e = embeddings_from_columns(&[&[2f64.sqrt(), 0.0], &[0.0, 3f64.sqrt()]]);
        let m = PointProcess::from_embeddings(Family::Dpp, e, 0.0).unwrap();
        let d = enumerate_exact(&m, 20).unwrap();
        let want = [1.0, 2.0, 3.0, 6.0];
        for (b, w) in want.iter().enumerate() {
            assert!((d.log_probs[b].exp() - w / 12.0).abs() < 1e-14);
        }
        assert!((d.log_partition - 12f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn empty_universe_has_one_subset() {
        let m = PointProcess::from_potentials(Family::Bpp, vec![], None).unwrap();
        let d = enumerate_exact(&m, 20).unwrap();
        assert_eq!(d.log_probs, vec![0.0]);
    }

    #[test]
    fn over_limit_is_an_error() {
        let m = PointProcess::from_potentials(Family::Bpp, vec![1.0; 5], None).unwrap();
        assert!(enumerate_exact(&m, 4).is_err());
    }
}
