use crate::error::{Error, Result};
use crate::pointprocess::PointProcess;
use crate::vowelset::{binomial, Combinations, VowelSet};

pub const DEFAULT_MAP_BUDGET: u128 = 10_000_000;

/// Highest-scoring subset of exactly `n` vowels, by brute force.
///
/// Combinations are visited in lexicographic index order and only a
/// strictly better score replaces the incumbent, so ties resolve to the
/// lexicographically smallest symbol sequence.
pub fn map_inventory(model: &PointProcess, n: usize, budget: u128) -> Result<VowelSet> {
    let universe = model.len();
    if n > universe {
        return Err(Error::Config(format!("cannot choose {n} of {universe} vowels")));
    }
    let count = binomial(universe, n);
    if count > budget {
        return Err(Error::BudgetExceeded { count, budget });
    }
    let mut best: Option<(VowelSet, f64)> = None;
    for v in Combinations::new(universe, n) {
        let s = model.log_score(v);
        if s.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((v, s)),
        }
    }
    best.map(|(v, _)| v).ok_or_else(|| Error::Numerical("every candidate scored NaN".into()))
}
