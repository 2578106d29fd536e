use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Inventory;
use crate::error::{Error, Result};
use crate::linalg::SINGULAR_PIVOT_TOL;
use crate::pointprocess::{Family, PointProcess};
use crate::rng::{self, streams};
use crate::vowelset::VowelSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClozeVariant {
    /// Exactly one vowel hidden.
    #[serde(rename = "cloze-1")]
    One,
    /// Zero or one vowel hidden.
    #[serde(rename = "cloze-01")]
    ZeroOne,
    /// Zero, one or two vowels hidden.
    #[serde(rename = "cloze-012")]
    ZeroOneTwo,
}

impl ClozeVariant {
    pub const ALL: [ClozeVariant; 3] = [ClozeVariant::One, ClozeVariant::ZeroOne, ClozeVariant::ZeroOneTwo];

    pub fn sizes(self) -> &'static [usize] {
        match self {
            ClozeVariant::One => &[1],
            ClozeVariant::ZeroOne => &[0, 1],
            ClozeVariant::ZeroOneTwo => &[0, 1, 2],
        }
    }

    pub fn allows(self, size: usize) -> bool {
        self.sizes().contains(&size)
    }

    pub fn name(self) -> &'static str {
        match self {
            ClozeVariant::One => "cloze-1",
            ClozeVariant::ZeroOne => "cloze-01",
            ClozeVariant::ZeroOneTwo => "cloze-012",
        }
    }
}

impl std::str::FromStr for ClozeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches("cloze-") {
            "1" => Ok(ClozeVariant::One),
            "01" => Ok(ClozeVariant::ZeroOne),
            "012" => Ok(ClozeVariant::ZeroOneTwo),
            other => Err(Error::Config(format!("unknown cloze variant {other:?} (expected 1, 01 or 012)"))),
        }
    }
}

impl std::fmt::Display for ClozeVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeInstance {
    pub language: String,
    pub observed: VowelSet,
    pub hidden: VowelSet,
    pub variant: ClozeVariant,
}

/// Delete a random hidden set from each inventory: the size is uniform over
/// the variant's sizes, then the elements are uniform. Inventories too small
/// for the drawn size are skipped.
pub fn make_cloze_instances(
    test: &[Inventory],
    variant: ClozeVariant,
    seed: u64,
    repetitions: usize,
) -> Vec<ClozeInstance> {
    let mut rng = rng::stream(seed, streams::CLOZE);
    let mut out = Vec::with_capacity(test.len() * repetitions);
    for _ in 0..repetitions {
        for inv in test {
            let sizes = variant.sizes();
            let size = sizes[rng.random_range(0..sizes.len())];
            let members = inv.vowels.to_vec();
            if members.len() < size {
                log::warn!("skipping {}: cannot hide {size} of {} vowels", inv.language, members.len());
                continue;
            }
            let hidden: VowelSet = index::sample(&mut rng, members.len(), size).into_iter().map(|p| members[p]).collect();
            out.push(ClozeInstance {
                language: inv.language.clone(),
                observed: inv.vowels.difference(hidden),
                hidden,
                variant,
            });
        }
    }
    out
}

/// Candidate completions of `observed`, smallest index sequences first.
fn candidates(n: usize, observed: VowelSet, variant: ClozeVariant) -> Vec<Vec<usize>> {
    let rest: Vec<usize> = (0..n).filter(|&i| !observed.contains(i)).collect();
    let mut out = Vec::new();
    if variant.allows(0) {
        out.push(Vec::new());
    }
    for (a, &i) in rest.iter().enumerate() {
        if variant.allows(1) {
            out.push(vec![i]);
        }
        if variant.allows(2) {
            for &j in &rest[a + 1..] {
                out.push(vec![i, j]);
            }
        }
    }
    out.sort();
    out
}

fn argmax(cands: Vec<Vec<usize>>, mut score: impl FnMut(&[usize]) -> f64) -> VowelSet {
    let mut best: Option<(f64, Vec<usize>)> = None;
    // candidates arrive in lexicographic order, so only strict improvements win
    for c in cands {
        let s = score(&c);
        let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
        match &best {
            Some((b, _)) if s <= *b => {}
            _ => best = Some((s, c)),
        }
    }
    best.map(|(_, c)| c.into_iter().collect()).unwrap_or(VowelSet::EMPTY)
}

/// Completion of `observed` maximizing `p(observed + D)` over the variant's
/// candidate sets; ties go to the lexicographically smallest index sequence.
pub fn cloze_predict(model: &PointProcess, observed: VowelSet, variant: ClozeVariant) -> VowelSet {
    let n = model.len();
    let cands = candidates(n, observed, variant);
    match model.family() {
        Family::Bpp | Family::Mpp if model.log_score(observed) == f64::NEG_INFINITY => {
            argmax(cands, |_| f64::NEG_INFINITY)
        }
        Family::Bpp | Family::Mpp => {
            // toggle gains relative to the observed set
            let gains: Vec<f64> = (0..n)
                .map(|i| if observed.contains(i) { 0.0 } else { model.toggle_delta(observed, i).unwrap_or(f64::NAN) })
                .collect();
            argmax(cands, |d| match d {
                [] => 0.0,
                [i] => gains[*i],
                [i, j] => gains[*i] + gains[*j] + model.log_psi(*i, *j),
                _ => unreachable!(),
            })
        }
        Family::Dpp => {
            // det L_{O+D} = det L_O det C_D with C the Schur complement
            // L_RR - L_RO L_O^-1 L_OR on the remaining vowels. Pivots are
            // judged against the kernel's scale on O + D, as the full score is.
            let l = model.kernel().expect("DPP kernel");
            let obs = observed.to_vec();
            let lo = l.select_rows(&obs).select_columns(&obs);
            let Some(chol) = nalgebra::Cholesky::new(lo) else {
                return argmax(cands, |_| f64::NEG_INFINITY);
            };
            let min_pivot = chol.l_dirty().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
            let scale_o = obs.iter().map(|&i| l[(i, i)]).fold(0.0, f64::max);
            let inv = chol.inverse();
            let all: Vec<usize> = (0..n).collect();
            let l_ao = l.select_rows(&all).select_columns(&obs);
            let cond: DMatrix<f64> = l - &l_ao * inv * l_ao.transpose();
            argmax(cands, |d| {
                let scale = d.iter().map(|&i| l[(i, i)]).fold(scale_o, f64::max);
                let tol = SINGULAR_PIVOT_TOL * scale;
                let pivots: Vec<f64> = match d {
                    [] => vec![],
                    [i] => vec![cond[(*i, *i)]],
                    [i, j] => {
                        let a = cond[(*i, *i)];
                        vec![a, cond[(*j, *j)] - cond[(*i, *j)] * cond[(*j, *i)] / a]
                    }
                    _ => unreachable!(),
                };
                if !(min_pivot > tol) || pivots.iter().any(|p| !(*p > tol)) {
                    f64::NEG_INFINITY
                } else {
                    pivots.iter().map(|p| p.ln()).sum()
                }
            })
        }
    }
}

/// Exhaustive version of [`cloze_predict`] scoring every candidate with the
/// full model score.
pub fn cloze_predict_brute_force(model: &PointProcess, observed: VowelSet, variant: ClozeVariant) -> VowelSet {
    let cands = candidates(model.len(), observed, variant);
    argmax(cands, |d| model.log_score(d.iter().fold(observed, |v, &i| v.with(i))))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClozeOutcome {
    pub language: String,
    pub observed: VowelSet,
    pub hidden: VowelSet,
    pub predicted: VowelSet,
    pub correct: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClozeReport {
    pub variant: ClozeVariant,
    /// Percentage of exact-set matches.
    pub accuracy: f64,
    pub outcomes: Vec<ClozeOutcome>,
}

/// Percentage of instances whose hidden set is predicted exactly.
pub fn cloze_accuracy(model: &PointProcess, instances: &[ClozeInstance]) -> Result<ClozeReport> {
    let Some(first) = instances.first() else {
        return Err(Error::Config("cloze accuracy needs at least one instance".into()));
    };
    let outcomes: Vec<ClozeOutcome> = instances
        .par_iter()
        .map(|c| {
            let predicted = cloze_predict(model, c.observed, c.variant);
            ClozeOutcome {
                language: c.language.clone(),
                observed: c.observed,
                hidden: c.hidden,
                predicted,
                correct: predicted == c.hidden,
            }
        })
        .collect();
    let hits = outcomes.iter().filter(|o| o.correct).count();
    Ok(ClozeReport { variant: first.variant, accuracy: 100.0 * hits as f64 / outcomes.len() as f64, outcomes })
}
