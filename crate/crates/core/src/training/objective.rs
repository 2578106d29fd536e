//! Regularized negative log-likelihood and its gradient.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Inventory, VowelTable, FEATURE_DIM};
use crate::embedding::{EmbedTape, Embedder, Layout, ParameterVector};
use crate::error::{Error, Result};
use crate::inference::BernoulliProposal;
use crate::linalg::{cholesky_psd, gram_log_det_with_gradient, log_det_from_cholesky, log_sum_exp};
use crate::pointprocess::{log_psi_from_dist2, Family, ModelSpec, Potential};
use crate::rng::{self, streams};
use crate::training::LbfgsConfig;
use crate::vowelset::VowelSet;

/// Everything needed to fit one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub spec: ModelSpec,
    /// L2 coefficient on the embedding parameters.
    pub lambda: f64,
    #[serde(default)]
    pub optimizer: LbfgsConfig,
    /// Importance samples in the MPP partition surrogate.
    #[serde(default = "default_surrogate_samples")]
    pub surrogate_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_surrogate_samples() -> usize {
    10_000
}

impl TrainConfig {
    pub fn new(spec: ModelSpec, lambda: f64, seed: u64) -> Self {
        TrainConfig {
            spec,
            lambda,
            optimizer: LbfgsConfig::default(),
            surrogate_samples: default_surrogate_samples(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("L2 coefficient must be non-negative, got {}", self.lambda)));
        }
        if self.spec.family == Family::Mpp && self.surrogate_samples == 0 {
            return Err(Error::Config("MPP training needs at least one surrogate sample".into()));
        }
        self.optimizer.validate()
    }
}

/// Training data reduced to what the likelihood needs.
#[derive(Debug, Clone)]
struct DataSummary {
    languages: f64,
    counts: Vec<f64>,
    pair_counts: DMatrix<f64>,
    /// Distinct inventories with multiplicity and one language exhibiting each.
    distinct: Vec<(VowelSet, f64, String)>,
}

impl DataSummary {
    fn new(n: usize, train: &[Inventory]) -> Result<Self> {
        let mut counts = vec![0.0; n];
        let mut pair_counts = DMatrix::zeros(n, n);
        let mut groups: BTreeMap<u128, (f64, String)> = BTreeMap::new();
        for inv in train {
            if inv.vowels.span() > n {
                return Err(Error::Config(format!("inventory of {} lies outside the vowel table", inv.language)));
            }
            let v = inv.vowels.to_vec();
            for (a, &i) in v.iter().enumerate() {
                counts[i] += 1.0;
                for &j in &v[a + 1..] {
                    pair_counts[(i, j)] += 1.0;
                    pair_counts[(j, i)] += 1.0;
                }
            }
            groups.entry(inv.vowels.bits()).or_insert_with(|| (0.0, inv.language.clone())).0 += 1.0;
        }
        let distinct = groups.into_iter().map(|(b, (m, l))| (VowelSet::from_bits(b), m, l)).collect();
        Ok(DataSummary { languages: train.len() as f64, counts, pair_counts, distinct })
    }

    fn language_with(&self, pred: impl Fn(VowelSet) -> bool) -> String {
        self.distinct.iter().find(|(v, _, _)| pred(*v)).map_or_else(String::new, |(_, _, l)| l.clone())
    }
}

/// Sets over which the MPP partition function is evaluated.
#[derive(Debug, Clone)]
enum Surrogate {
    /// Every subset; the partition function is exact.
    Exact(Vec<VowelSet>),
    /// A fixed draw from a Bernoulli proposal, with multiplicities.
    Sampled {
        sets: Vec<(VowelSet, f64)>,
        proposal_log_scores: Vec<f64>,
        proposal_log_normalizer: f64,
        draws: f64,
    },
}

impl Surrogate {
    fn build(n: usize, samples: usize, proposal: &BernoulliProposal, seed: u64) -> Self {
        if n < 63 && (1u64 << n) as u128 <= samples as u128 {
            return Surrogate::Exact((0..1u128 << n).map(VowelSet::from_bits).collect());
        }
        let mut rng = rng::stream(seed, streams::SURROGATE);
        let mut counts: BTreeMap<u128, f64> = BTreeMap::new();
        for _ in 0..samples {
            *counts.entry(proposal.sample(&mut rng).bits()).or_default() += 1.0;
        }
        let sets: Vec<(VowelSet, f64)> = counts.into_iter().map(|(b, c)| (VowelSet::from_bits(b), c)).collect();
        let proposal_log_scores = sets.iter().map(|(v, _)| proposal.log_score(*v)).collect();
        Surrogate::Sampled {
            sets,
            proposal_log_scores,
            proposal_log_normalizer: proposal.log_normalizer(),
            draws: samples as f64,
        }
    }
}

/// `-sum log p(V) + lambda |theta|^2` over a training set, for one
/// configuration. For an MPP the log-partition is the importance-sampling
/// estimate over a sample set fixed at construction, so the objective is
/// deterministic and its gradient exact.
#[derive(Debug, Clone)]
pub struct NllObjective<'a> {
    spec: ModelSpec,
    lambda: f64,
    layout: Layout,
    table: &'a VowelTable,
    data: DataSummary,
    surrogate: Option<Surrogate>,
}

struct Forward {
    tapes: Vec<EmbedTape>,
    /// Points entering the pair potentials.
    pair_points: Vec<DVector<f64>>,
}

impl<'a> NllObjective<'a> {
    /// `proposal` is required for an MPP whose universe is too large to
    /// enumerate within the surrogate sample budget.
    pub fn new(
        config: &TrainConfig,
        table: &'a VowelTable,
        train: &[Inventory],
        proposal: Option<&BernoulliProposal>,
    ) -> Result<Self> {
        config.validate()?;
        let n = table.len();
        let layout = config.spec.layout(n, FEATURE_DIM)?;
        let data = DataSummary::new(n, train)?;
        let surrogate = (config.spec.family == Family::Mpp).then(|| {
            let fallback;
            let q = match proposal {
                Some(q) => q,
                None => {
                    fallback = BernoulliProposal::uniform(n);
                    &fallback
                }
            };
            Surrogate::build(n, config.surrogate_samples, q, config.seed)
        });
        Ok(NllObjective { spec: config.spec, lambda: config.lambda, layout, table, data, surrogate })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Whether the MPP partition function is computed exactly.
    pub fn exact_partition(&self) -> bool {
        matches!(self.surrogate, Some(Surrogate::Exact(_)) | None)
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        self.evaluate(theta).map(|(v, _)| v)
    }

    fn forward(&self, emb: &Embedder<'_>) -> Result<Forward> {
        let n = self.table.len();
        let mut tapes = Vec::with_capacity(n);
        for i in 0..n {
            tapes.push(emb.forward(i, self.table.feature(i))?);
        }
        let pair_points = tapes
            .iter()
            .map(|t| if self.spec.pairs_in_metric_space() { t.x.clone().unwrap() } else { t.e.clone() })
            .collect();
        Ok(Forward { tapes, pair_points })
    }

    /// Value and gradient at `theta` (laid out as [`Self::layout`]).
    pub fn evaluate(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if theta.len() != self.layout.len() {
            return Err(Error::Dimension { expected: self.layout.len(), got: theta.len() });
        }
        let emb_len = self.layout.embedding_len();
        let emb = Embedder::new(&self.layout, &theta[..emb_len])?;
        let fwd = self.forward(&emb)?;
        let n = self.table.len();
        let r = self.layout.output_dim();
        let mut ge: Vec<DVector<f64>> = vec![DVector::zeros(r); n];
        let mut gp: Vec<DVector<f64>> = fwd.pair_points.iter().map(|p| DVector::zeros(p.len())).collect();
        let mut grad = vec![0.0; theta.len()];

        let mut value = match self.spec.family {
            Family::Dpp => self.dpp_terms(&fwd, &mut ge)?,
            Family::Bpp | Family::Mpp => {
                let log_t = self.layout.log_temperature_index().map(|i| theta[i]);
                let (v, g_log_t) = self.markov_terms(&fwd, log_t, &mut ge, &mut gp)?;
                if let Some(i) = self.layout.log_temperature_index() {
                    grad[i] = g_log_t;
                }
                v
            }
        };

        let pairs_are_x = self.spec.pairs_in_metric_space();
        for i in 0..n {
            let (ue, ux) = if pairs_are_x { (&ge[i], Some(&gp[i])) } else { (&(&ge[i] + &gp[i]), None) };
            emb.backward(&fwd.tapes[i], ue, ux, &mut grad[..emb_len]);
        }

        if self.lambda > 0.0 {
            for (g, t) in grad[..emb_len].iter_mut().zip(&theta[..emb_len]) {
                value += self.lambda * t * t;
                *g += 2.0 * self.lambda * t;
            }
        }
        if !value.is_finite() {
            return Err(Error::Numerical(format!("objective is {value}")));
        }
        Ok((value, grad))
    }

    /// BPP and MPP likelihood terms. Accumulates gradients with respect to
    /// embeddings (`ge`) and pair points (`gp`); returns the value and the
    /// derivative with respect to `log T`.
    fn markov_terms(
        &self,
        fwd: &Forward,
        log_t: Option<f64>,
        ge: &mut [DVector<f64>],
        gp: &mut [DVector<f64>],
    ) -> Result<(f64, f64)> {
        let n = self.table.len();
        let d = &self.data;
        let m = d.languages;
        let potential = self.spec.potential();
        let phi: Vec<f64> = fwd
            .tapes
            .iter()
            .map(|t| match potential {
                Potential::Norm => t.e.norm(),
                Potential::MixtureDensity => t.e.sum(),
            })
            .collect();
        let log_phi: Vec<f64> = phi.iter().map(|p| p.ln()).collect();

        let mut value = 0.0;
        for i in 0..n {
            if d.counts[i] > 0.0 {
                if !(phi[i] > 0.0) {
                    return Err(Error::ZeroProbability { language: d.language_with(|v| v.contains(i)) });
                }
                value -= d.counts[i] * log_phi[i];
            }
        }
        // gradient with respect to log phi_i (BPP) or phi_i directly
        let mut g_log_phi = vec![0.0; n];
        let mut g_log_t = 0.0;

        match self.spec.family {
            Family::Bpp => {
                for i in 0..n {
                    value += m * phi[i].ln_1p();
                    g_log_phi[i] = -d.counts[i] + m * phi[i] / (1.0 + phi[i]);
                }
            }
            Family::Mpp => {
                let log_t = log_t.expect("MPP layout carries log T");
                let t = log_t.exp();
                let mut log_psi = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in i + 1..n {
                        let d2 = (&fwd.pair_points[i] - &fwd.pair_points[j]).norm_squared();
                        let lp = log_psi_from_dist2(d2, t);
                        log_psi[(i, j)] = lp;
                        log_psi[(j, i)] = lp;
                        if d.pair_counts[(i, j)] > 0.0 {
                            if lp == f64::NEG_INFINITY {
                                return Err(Error::ZeroProbability {
                                    language: d.language_with(|v| v.contains(i) && v.contains(j)),
                                });
                            }
                            value -= d.pair_counts[(i, j)] * lp;
                        }
                    }
                }
                let score = |v: VowelSet| -> f64 {
                    let idx = v.to_vec();
                    let mut s = 0.0;
                    for (a, &i) in idx.iter().enumerate() {
                        s += log_phi[i];
                        for &j in &idx[a + 1..] {
                            s += log_psi[(i, j)];
                        }
                    }
                    s
                };
                let (sets, log_w, log_z): (Vec<VowelSet>, Vec<f64>, f64) = match self.surrogate.as_ref().unwrap() {
                    Surrogate::Exact(all) => {
                        let lw: Vec<f64> = all.iter().map(|&v| score(v)).collect();
                        let lz = log_sum_exp(&lw);
                        (all.clone(), lw, lz)
                    }
                    Surrogate::Sampled { sets, proposal_log_scores, proposal_log_normalizer, draws } => {
                        let lw: Vec<f64> = sets
                            .iter()
                            .zip(proposal_log_scores)
                            .map(|((v, c), lq)| score(*v) - lq + c.ln())
                            .collect();
                        let lz = proposal_log_normalizer + log_sum_exp(&lw) - draws.ln();
                        (sets.iter().map(|(v, _)| *v).collect(), lw, lz)
                    }
                };
                let lse = log_sum_exp(&log_w);
                if !lse.is_finite() {
                    return Err(Error::Numerical("every surrogate sample has zero weight".into()));
                }
                value += m * log_z;
                // expected inclusion counts under the normalized weights
                let mut a = vec![0.0; n];
                let mut a2 = DMatrix::<f64>::zeros(n, n);
                for (v, lw) in sets.iter().zip(&log_w) {
                    let w = (lw - lse).exp();
                    if w == 0.0 {
                        continue;
                    }
                    let idx = v.to_vec();
                    for (p, &i) in idx.iter().enumerate() {
                        a[i] += w;
                        for &j in &idx[p + 1..] {
                            a2[(i, j)] += w;
                        }
                    }
                }
                for i in 0..n {
                    g_log_phi[i] = -d.counts[i] + m * a[i];
                }
                for i in 0..n {
                    for j in i + 1..n {
                        let g = -d.pair_counts[(i, j)] + m * a2[(i, j)];
                        if g == 0.0 {
                            continue;
                        }
                        let lp = log_psi[(i, j)];
                        // log psi = -1 / (T d^2)
                        g_log_t += g * -lp;
                        let diff = &fwd.pair_points[i] - &fwd.pair_points[j];
                        let d2 = diff.norm_squared();
                        let c = g * 2.0 / (t * d2 * d2);
                        gp[i].axpy(c, &diff, 1.0);
                        gp[j].axpy(-c, &diff, 1.0);
                    }
                }
            }
            Family::Dpp => unreachable!(),
        }

        for i in 0..n {
            let g = g_log_phi[i];
            if g == 0.0 {
                continue;
            }
            let e = &fwd.tapes[i].e;
            match potential {
                // d log|e| / de = e / |e|^2
                Potential::Norm => {
                    let nn = e.norm_squared();
                    if nn > 0.0 {
                        ge[i].axpy(g / nn, e, 1.0);
                    }
                }
                Potential::MixtureDensity => {
                    if phi[i] > 0.0 {
                        ge[i].add_scalar_mut(g / phi[i]);
                    }
                }
            }
        }
        Ok((value, g_log_t))
    }

    /// DPP likelihood terms; accumulates gradients into `ge`.
    fn dpp_terms(&self, fwd: &Forward, ge: &mut [DVector<f64>]) -> Result<f64> {
        let n = self.table.len();
        let r = self.layout.output_dim();
        let d = &self.data;
        let e = DMatrix::from_fn(r, n, |a, b| fwd.tapes[b].e[a]);
        let l = e.tr_mul(&e);
        let mut value = 0.0;
        let mut g = DMatrix::zeros(r, n);
        for (v, mult, lang) in &d.distinct {
            if v.is_empty() {
                continue;
            }
            let idx = v.to_vec();
            let ev = e.select_columns(&idx);
            let (lv, gv) =
                gram_log_det_with_gradient(&ev).ok_or_else(|| Error::ZeroProbability { language: lang.clone() })?;
            value -= mult * lv;
            for (c, &i) in idx.iter().enumerate() {
                let mut col = g.column_mut(i);
                col.axpy(-mult, &gv.column(c), 1.0);
            }
        }
        let li = l + DMatrix::identity(n, n);
        let chol = cholesky_psd(&li).ok_or_else(|| Error::Numerical("L + I is not positive definite".into()))?;
        value += d.languages * log_det_from_cholesky(&chol);
        g += &e * chol.inverse() * (2.0 * d.languages);
        for (i, gi) in ge.iter_mut().enumerate() {
            *gi += g.column(i);
        }
        Ok(value)
    }
}

/// Value and gradient of the training objective at `params`.
pub fn nll_objective(
    config: &TrainConfig,
    params: &ParameterVector,
    table: &VowelTable,
    train: &[Inventory],
    proposal: Option<&BernoulliProposal>,
) -> Result<(f64, Vec<f64>)> {
    let obj = NllObjective::new(config, table, train, proposal)?;
    if params.layout != *obj.layout() {
        return Err(Error::Config("parameter layout does not match the training configuration".into()));
    }
    obj.evaluate(&params.values)
}

/// Random parameters in `(-scale, scale)`; used by gradient checks.
pub fn random_parameters(layout: &Layout, scale: f64, seed: u64) -> ParameterVector {
    let mut r = rng::stream(seed, streams::INIT);
    let values = (0..layout.len()).map(|_| r.random_range(-scale..scale)).collect();
    ParameterVector { layout: layout.clone(), values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingKind;
    use crate::pointprocess::TrainedModel;
    use crate::synthetic;

    fn inv(ix: &[usize]) -> Inventory {
        Inventory::new(format!("{ix:?}"), ix.iter().copied().collect())
    }

    fn fd_check(obj: &NllObjective<'_>, theta: &[f64]) -> f64 {
        let (_, g) = obj.evaluate(theta).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..theta.len() {
            let mut p = theta.to_vec();
            p[k] += h;
            let fp = obj.value(&p).unwrap();
            p[k] -= 2.0 * h;
            let fm = obj.value(&p).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-3));
        }
        worst
    }

    #[test]
    fn bpp_gradient_on_three_vowels() {
        let table = synthetic::vowel_table(3, 0).unwrap();
        let train = vec![inv(&[0, 1]), inv(&[2]), inv(&[0, 1, 2]), inv(&[])];
        let cfg = TrainConfig::new(ModelSpec::new(Family::Bpp, EmbeddingKind::Neural, 3, 1), 0.01, 0);
        let obj = NllObjective::new(&cfg, &table, &train, None).unwrap();
        for seed in 0..3 {
            let p = random_parameters(obj.layout(), 0.8, seed);
            assert!(fd_check(&obj, &p.values) < 1e-5);
        }
    }

    #[test]
    fn value_matches_model_log_probabilities() {
        let table = synthetic::vowel_table(5, 1).unwrap();
        let train = vec![inv(&[0, 3]), inv(&[1, 2, 4]), inv(&[4])];
        for family in [Family::Bpp, Family::Mpp, Family::Dpp] {
            let spec = ModelSpec::new(family, EmbeddingKind::Tabular, 5, 0);
            let cfg = TrainConfig::new(spec, 0.0, 0);
            let obj = NllObjective::new(&cfg, &table, &train, None).unwrap();
            assert!(obj.exact_partition());
            let p = random_parameters(obj.layout(), 1.0, 7);
            let model = TrainedModel::build(spec, p.clone(), table.clone(), None).unwrap();
            let z = model.process.log_partition_exact();
            let want: f64 = train.iter().map(|i| -model.process.log_prob(i.vowels, Some(z)).unwrap()).sum();
            let got = obj.value(&p.values).unwrap();
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{family}: {got} vs {want}");
        }
    }

    #[test]
    fn dpp_full_universe_single_term() {
        let table = synthetic::vowel_table(3, 2).unwrap();
        let train = vec![inv(&[0, 1, 2])];
        let spec = ModelSpec::new(Family::Dpp, EmbeddingKind::Tabular, 3, 0);
        let lambda = 0.05;
        let cfg = TrainConfig::new(spec, lambda, 0);
        let p = random_parameters(&spec.layout(3, 2).unwrap(), 1.0, 3);
        let (v, _) = nll_objective(&cfg, &p, &table, &train, None).unwrap();
        let model = TrainedModel::build(spec, p.clone(), table.clone(), None).unwrap();
        let norm2: f64 = p.values.iter().map(|x| x * x).sum();
        let want = -model.process.dpp_log_prob(VowelSet::full(3)) + lambda * norm2;
        assert!((v - want).abs() < 1e-10);
    }

    #[test]
    fn zero_probability_training_language_is_named() {
        let table = synthetic::vowel_table(4, 0).unwrap();
        let train = vec![inv(&[0]), Inventory::new("big", [0, 1, 2].into_iter().collect())];
        // rank-2 DPP cannot produce three vowels
        let spec = ModelSpec::new(Family::Dpp, EmbeddingKind::Tabular, 2, 0);
        let cfg = TrainConfig::new(spec, 0.0, 0);
        let obj = NllObjective::new(&cfg, &table, &train, None).unwrap();
        let p = random_parameters(obj.layout(), 1.0, 0);
        match obj.evaluate(&p.values) {
            Err(Error::ZeroProbability { language }) => assert_eq!(language, "big"),
            other => panic!("{other:?}"),
        }
    }
}
