use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointprocess::PointProcess;
use crate::rng::{self, Rng};
use crate::vowelset::VowelSet;

/// Schedule of a single-site Gibbs chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    /// Steps discarded before the first kept sample.
    pub burn_in: usize,
    /// Number of kept samples.
    pub samples: usize,
    /// Steps between kept samples.
    pub thin: usize,
    pub seed: u64,
}

impl GibbsConfig {
    /// Burn-in `50 N`, thinning `N`.
    pub fn for_universe(n: usize, samples: usize, seed: u64) -> Self {
        let n = n.max(1);
        GibbsConfig { burn_in: 50 * n, samples, thin: n, seed }
    }

    pub fn total_steps(&self) -> usize {
        self.burn_in + self.samples * self.thin
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thin == 0 {
            return Err(Error::Config("Gibbs samples and thinning must be positive".into()));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability that toggling vowel `i` replaces `v`:
/// `p(V') / (p(V) + p(V'))`.
pub fn replacement_probability(model: &PointProcess, v: VowelSet, i: usize) -> Result<f64> {
    let s = model.log_score(v);
    let s_bar = model.log_score(v.toggled(i));
    if s == f64::NEG_INFINITY && s_bar == f64::NEG_INFINITY {
        return Err(Error::Numerical("both the current and the toggled set have zero probability".into()));
    }
    Ok(sigmoid(s_bar - s))
}

/// One Gibbs update at site `i`.
pub fn gibbs_step(model: &PointProcess, v: VowelSet, i: usize, rng: &mut Rng) -> Result<VowelSet> {
    let p = replacement_probability(model, v, i)?;
    Ok(if rng.random::<f64>() < p { v.toggled(i) } else { v })
}

/// A Gibbs chain yielding thinned samples after burn-in.
pub struct GibbsChain<'a> {
    model: &'a PointProcess,
    config: GibbsConfig,
    rng: Rng,
    state: VowelSet,
    score: f64,
    emitted: usize,
    burned: bool,
}

impl GibbsChain<'_> {
    pub fn state(&self) -> VowelSet {
        self.state
    }

    fn step(&mut self) -> Result<()> {
        let n = self.model.len();
        if n == 0 {
            return Ok(());
        }
        let i = self.rng.random_range(0..n);
        let next = self.state.toggled(i);
        let (delta, next_score) = if self.score.is_finite() {
            match self.model.toggle_delta(self.state, i) {
                Some(d) => (d, self.score + d),
                None => {
                    let s = self.model.log_score(next);
                    (s - self.score, s)
                }
            }
        } else {
            let s = self.model.log_score(next);
            if s == f64::NEG_INFINITY {
                return Err(Error::Numerical(
                    "both the current and the toggled set have zero probability".into(),
                ));
            }
            (f64::INFINITY, s)
        };
        let p = sigmoid(delta);
        if self.rng.random::<f64>() < p {
            self.state = next;
            self.score = next_score;
        }
        Ok(())
    }
}

impl Iterator for GibbsChain<'_> {
    type Item = Result<VowelSet>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.emitted >= self.config.samples {
            return None;
        }
        let steps = if self.burned { self.config.thin } else { self.config.burn_in + self.config.thin };
        self.burned = true;
        for _ in 0..steps {
            if let Err(e) = self.step() {
                self.emitted = self.config.samples;
                return Some(Err(e));
            }
        }
        self.emitted += 1;
        Some(Ok(self.state))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.config.samples - self.emitted;
        (0, Some(left))
    }
}

/// Start a chain at `init`. Sites are chosen uniformly at random.
pub fn gibbs_chain(model: &PointProcess, init: VowelSet, config: GibbsConfig) -> Result<GibbsChain<'_>> {
    config.validate()?;
    if init.span() > model.len() {
        return Err(Error::Config("initial set is outside the universe".into()));
    }
    Ok(GibbsChain {
        model,
        config,
        rng: rng::stream(config.seed, rng::streams::EVAL),
        state: init,
        score: model.log_score(init),
        emitted: 0,
        burned: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointprocess::Family;
    use nalgebra::DMatrix;

    #[test]
    fn symmetric_and_blocked_replacements() {
        let m = PointProcess::from_potentials(Family::Bpp, vec![1.0, 0.0], None).unwrap();
        let v = VowelSet::EMPTY;
        assert_eq!(replacement_probability(&m, v, 0).unwrap(), 0.5);
        assert_eq!(replacement_probability(&m, v, 1).unwrap(), 0.0);
        // from {1} (score -inf) to {0,1} (score -inf)
        assert!(replacement_probability(&m, v.with(1), 0).is_err());
    }

    #[test]
    fn empirical_toggle_frequency_matches_ratio() {
        // p(V') / (p(V) + p(V')) = 3 / 4 for phi = 3
        let m = PointProcess::from_potentials(Family::Bpp, vec![3.0], None).unwrap();
        let mut r = rng::stream(17, 0);
        let trials = 100_000;
        let mut hits = 0;
        for _ in 0..trials {
            if gibbs_step(&m, VowelSet::EMPTY, 0, &mut r).unwrap().contains(0) {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.75).abs() < 0.005, "{freq}");
    }

    #[test]
    fn fair_coins_with_unit_psi() {
        let m = PointProcess::from_potentials(Family::Mpp, vec![1.0; 6], Some(DMatrix::from_element(6, 6, 1.0)))
            .unwrap();
        let cfg = GibbsConfig::for_universe(6, 100_000, 5);
        let mut counts = [0usize; 6];
        for s in gibbs_chain(&m, VowelSet::EMPTY, cfg).unwrap() {
            for i in s.unwrap() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / 100_000.0;
            assert!((f - 0.5).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn chains_are_reproducible() {
        let psi = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.3 + 0.1 * (i + j) as f64 });
        let m = PointProcess::from_potentials(Family::Mpp, vec![0.5, 2.0, 1.0, 3.0], Some(psi)).unwrap();
        let cfg = GibbsConfig { burn_in: 10, samples: 200, thin: 3, seed: 42 };
        let a: Vec<_> = gibbs_chain(&m, VowelSet::EMPTY, cfg).unwrap().map(|s| s.unwrap()).collect();
        let b: Vec<_> = gibbs_chain(&m, VowelSet::EMPTY, cfg).unwrap().map(|s| s.unwrap()).collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        assert!(gibbs_chain(&m, VowelSet::EMPTY, GibbsConfig { thin: 0, ..cfg }).is_err());
    }
}
