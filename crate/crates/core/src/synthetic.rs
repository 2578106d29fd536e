//! Synthetic universes and corpora for tests, benchmarks and smoke runs.

use rand::Rng as _;

use crate::corpus::{Inventory, LanguageListing, VowelRecord, VowelTable};
use crate::error::Result;
use crate::inference::{BernoulliProposal, ExactDistribution};
use crate::rng::{self, Rng};
use crate::vowelset::VowelSet;

/// Common vowels with textbook `(F1, F2)` values in Hz.
pub const REFERENCE_VOWELS: [(&str, f64, f64); 28] = [
    ("i", 280.0, 2250.0),
    ("y", 280.0, 1900.0),
    ("ɨ", 300.0, 1650.0),
    ("ʉ", 300.0, 1500.0),
    ("ɯ", 310.0, 1350.0),
    ("u", 300.0, 750.0),
    ("ɪ", 390.0, 2000.0),
    ("ʏ", 390.0, 1750.0),
    ("ʊ", 400.0, 1000.0),
    ("e", 410.0, 2100.0),
    ("ø", 410.0, 1700.0),
    ("ɘ", 430.0, 1600.0),
    ("ɵ", 430.0, 1400.0),
    ("ɤ", 450.0, 1200.0),
    ("o", 450.0, 800.0),
    ("ə", 500.0, 1500.0),
    ("ɛ", 560.0, 1900.0),
    ("œ", 560.0, 1600.0),
    ("ɜ", 570.0, 1550.0),
    ("ɞ", 580.0, 1350.0),
    ("ʌ", 600.0, 1200.0),
    ("ɔ", 600.0, 900.0),
    ("æ", 690.0, 1750.0),
    ("ɐ", 700.0, 1400.0),
    ("a", 800.0, 1450.0),
    ("ɶ", 780.0, 1300.0),
    ("ɑ", 750.0, 1100.0),
    ("ɒ", 700.0, 950.0),
];

/// A universe of `n` vowels: reference vowels first, then `vNN` symbols with
/// random formants.
pub fn vowel_table(n: usize, seed: u64) -> Result<VowelTable> {
    let mut rng = rng::stream(seed, 0);
    let mut symbols = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    for i in 0..n {
        if let Some(&(s, f1, f2)) = REFERENCE_VOWELS.get(i) {
            symbols.push(s.to_string());
            means.push([f1, f2]);
        } else {
            symbols.push(format!("v{i:03}"));
            let f1 = rng.random_range(250.0..850.0);
            means.push([f1, rng.random_range(f1 + 300.0..2500.0)]);
        }
    }
    VowelTable::from_means(symbols, means)
}

/// Draw `m` sets from an exactly enumerated distribution.
pub fn sample_exact(dist: &ExactDistribution, m: usize, rng: &mut Rng) -> Vec<VowelSet> {
    let mut cdf = Vec::with_capacity(dist.log_probs.len());
    let mut acc = 0.0;
    for lp in &dist.log_probs {
        acc += lp.exp();
        cdf.push(acc);
    }
    (0..m)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let b = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            VowelSet::from_bits(b as u128)
        })
        .collect()
}

/// Draw `m` sets from a Bernoulli point process.
pub fn sample_bpp(phi: &[f64], m: usize, rng: &mut Rng) -> Result<Vec<VowelSet>> {
    let q = BernoulliProposal::new(phi.to_vec())?;
    Ok((0..m).map(|_| q.sample(rng)).collect())
}

/// Name sets `lang0000`, `lang0001`, ...
pub fn as_inventories(sets: &[VowelSet]) -> Vec<Inventory> {
    sets.iter().enumerate().map(|(i, &v)| Inventory::new(format!("lang{i:04}"), v)).collect()
}

/// Corpus listings for `sets`, with each vowel's formants jittered around
/// the table means.
pub fn as_listings(table: &VowelTable, sets: &[VowelSet], rng: &mut Rng) -> Vec<LanguageListing> {
    as_inventories(sets)
        .into_iter()
        .map(|inv| LanguageListing {
            language: inv.language,
            vowels: inv
                .vowels
                .iter()
                .map(|i| {
                    let [f1, f2] = table.mean_formants[i];
                    VowelRecord {
                        ipa: table.symbols[i].clone(),
                        formants: vec![f1 + rng.random_range(-20.0..20.0), f2 + rng.random_range(-20.0..20.0)],
                    }
                })
                .collect(),
        })
        .collect()
}
