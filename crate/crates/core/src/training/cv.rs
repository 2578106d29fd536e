//! Grid search over hyperparameters and K-fold cross-validation.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{make_folds, Inventory, VowelTable};
use crate::embedding::EmbeddingKind;
use crate::error::{Error, Result};
use crate::evaluation::{cloze_accuracy, cross_entropy, make_cloze_instances, ClozeVariant, EvalSettings};
use crate::pointprocess::{Family, ModelSpec, TrainedModel};
use crate::rng::child_seed;
use crate::training::fit::fit;
use crate::training::lbfgs::LbfgsConfig;
use crate::training::objective::TrainConfig;

/// Model-selection criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Nats per language; lower is better.
    CrossEntropy,
    /// Percent exact matches; higher is better.
    Cloze(ClozeVariant),
}

impl Metric {
    /// `Less` when `a` is the better score.
    fn compare(self, a: f64, b: f64) -> Ordering {
        match self {
            Metric::CrossEntropy => a.total_cmp(&b),
            Metric::Cloze(_) => b.total_cmp(&a),
        }
    }

    /// Score of `model` on `data`.
    pub fn score(self, model: &TrainedModel, data: &[Inventory], settings: &EvalSettings) -> Result<f64> {
        match self {
            Metric::CrossEntropy => Ok(cross_entropy(model, data, settings)?.nats),
            Metric::Cloze(v) => {
                let inst = make_cloze_instances(data, v, settings.seed, settings.repetitions.max(1));
                Ok(cloze_accuracy(&model.process, &inst)?.accuracy)
            }
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xent" | "cross-entropy" => Ok(Metric::CrossEntropy),
            other => other.parse().map(Metric::Cloze),
        }
    }
}

/// A hyperparameter grid for one family and embedding kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub family: Family,
    pub embedding: EmbeddingKind,
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub optimizer: LbfgsConfig,
    #[serde(default = "default_surrogate")]
    pub surrogate_samples: usize,
}

fn default_surrogate() -> usize {
    10_000
}

pub const DEFAULT_LAMBDAS: [f64; 5] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1];

impl GridSpec {
    /// The full sweep for a family and embedding kind.
    pub fn standard(family: Family, embedding: EmbeddingKind) -> Self {
        let (widths, depths) = match embedding {
            EmbeddingKind::Tabular => (vec![1], vec![0]),
            EmbeddingKind::Neural => (vec![2, 10, 50, 100, 150, 200], vec![0, 1, 2, 3]),
            EmbeddingKind::Interpretable => (vec![crate::corpus::FEATURE_DIM], vec![0, 1, 2, 3]),
            EmbeddingKind::Prototype => (vec![20, 30, 40, 50], vec![0, 1, 2, 3]),
        };
        GridSpec {
            family,
            embedding,
            widths,
            depths,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            optimizer: LbfgsConfig::default(),
            surrogate_samples: default_surrogate(),
        }
    }

    /// Every grid point, ordered by width, then depth, then lambda.
    pub fn configs(&self, seed: u64) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &width in &self.widths {
            for &depth in &self.depths {
                for &lambda in &self.lambdas {
                    out.push(TrainConfig {
                        spec: ModelSpec::new(self.family, self.embedding, width, depth),
                        lambda,
                        optimizer: self.optimizer,
                        surrogate_samples: self.surrogate_samples,
                        seed,
                    });
                }
            }
        }
        out
    }
}

/// Outcome of one grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub config: TrainConfig,
    pub dev_score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub config: TrainConfig,
    pub model: TrainedModel,
    pub dev_score: f64,
    pub candidates: Vec<Candidate>,
}

/// Train every configuration on `train` and keep the best on `dev`. Ties go
/// to smaller `r`, then smaller `d`, then grid order.
pub fn grid_search(
    train: &[Inventory],
    dev: &[Inventory],
    table: &VowelTable,
    grid: &[TrainConfig],
    metric: Metric,
    settings: &EvalSettings,
) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    let results: Vec<Result<(TrainedModel, f64)>> = grid
        .par_iter()
        .map(|cfg| {
            let model = fit(cfg, train, table)?;
            let score = metric.score(&model, dev, settings)?;
            if score.is_nan() {
                return Err(Error::Numerical("development score is NaN".into()));
            }
            Ok((model, score))
        })
        .collect();

    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, TrainedModel, f64)> = None;
    for (idx, (cfg, res)) in grid.iter().zip(results).enumerate() {
        match res {
            Ok((model, score)) => {
                candidates.push(Candidate { config: cfg.clone(), dev_score: Some(score), error: None });
                let better = match &best {
                    None => true,
                    Some((b, _, bs)) => {
                        let bc = &grid[*b];
                        metric
                            .compare(score, *bs)
                            .then(cfg.spec.width.cmp(&bc.spec.width))
                            .then(cfg.spec.depth.cmp(&bc.spec.depth))
                            .then(idx.cmp(b))
                            == Ordering::Less
                    }
                };
                if better {
                    best = Some((idx, model, score));
                }
            }
            Err(e) => {
                log::warn!("grid point {} r={} d={} failed: {e}", cfg.spec.tag(), cfg.spec.width, cfg.spec.depth);
                candidates.push(Candidate { config: cfg.clone(), dev_score: None, error: Some(e.to_string()) });
            }
        }
    }
    let (idx, model, dev_score) =
        best.ok_or_else(|| Error::Numerical("every grid point failed to train".into()))?;
    Ok(Selection { config: grid[idx].clone(), model, dev_score, candidates })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvRow {
    pub fold: usize,
    pub dev_fold: usize,
    pub train_languages: usize,
    pub test_languages: usize,
    pub selected: TrainConfig,
    pub dev_metric: f64,
    pub test_metric: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub metric: Metric,
    pub rows: Vec<CvRow>,
    pub mean_dev: f64,
    pub mean_test: f64,
}

/// K-fold cross-validation: for test fold `t`, the next fold is the
/// development fold and the rest train.
pub fn cross_validate(
    inventories: &[Inventory],
    table: &VowelTable,
    grid: &GridSpec,
    k: usize,
    seed: u64,
    metric: Metric,
    settings: &EvalSettings,
) -> Result<CvReport> {
    if k < 3 {
        return Err(Error::Config(format!("cross-validation needs at least 3 folds, got {k}")));
    }
    let folds = make_folds(inventories, k, seed)?;
    let rows: Vec<Result<CvRow>> = (0..k)
        .into_par_iter()
        .map(|t| {
            let split = folds.split(inventories, t);
            let fold_seed = child_seed(seed, t as u64);
            let configs = grid.configs(fold_seed);
            let eval = EvalSettings { seed: child_seed(fold_seed, 1), ..*settings };
            let sel = grid_search(&split.train, &split.dev, table, &configs, metric, &eval)?;
            let test_metric = metric.score(&sel.model, &split.test, &eval)?;
            log::info!("fold {t}: selected r={} d={} lambda={}, test {test_metric:.4}", sel.config.spec.width, sel.config.spec.depth, sel.config.lambda);
            Ok(CvRow {
                fold: t,
                dev_fold: folds.dev_fold(t),
                train_languages: split.train.len(),
                test_languages: split.test.len(),
                selected: sel.config,
                dev_metric: sel.dev_score,
                test_metric,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mean = |f: fn(&CvRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    Ok(CvReport { k, seed, metric, mean_dev: mean(|r| r.dev_metric), mean_test: mean(|r| r.test_metric), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::synthetic;

    fn corpus(m: usize) -> (VowelTable, Vec<Inventory>) {
        let table = synthetic::vowel_table(5, 0).unwrap();
        let mut g = rng::stream(2, 0);
        let sets = synthetic::sample_bpp(&[3.0, 0.4, 1.5, 0.2, 2.0], m, &mut g).unwrap();
        (table, synthetic::as_inventories(&sets))
    }

    fn tabular_grid(widths: Vec<usize>, lambdas: Vec<f64>) -> GridSpec {
        GridSpec { widths, lambdas, ..GridSpec::standard(Family::Bpp, EmbeddingKind::Tabular) }
    }

    #[test]
    fn standard_grid_sizes() {
        assert_eq!(GridSpec::standard(Family::Dpp, EmbeddingKind::Neural).configs(0).len(), 6 * 4 * 5);
        assert_eq!(GridSpec::standard(Family::Bpp, EmbeddingKind::Tabular).configs(0).len(), 5);
        assert_eq!(GridSpec::standard(Family::Mpp, EmbeddingKind::Prototype).configs(0).len(), 4 * 4 * 5);
        let cfgs = GridSpec::standard(Family::Mpp, EmbeddingKind::Interpretable).configs(7);
        assert!(cfgs.iter().all(|c| c.spec.width == 2 && c.seed == 7));
    }

    #[test]
    fn three_folds_on_nine_languages() {
        let (table, inv) = corpus(9);
        let grid = tabular_grid(vec![1], vec![0.0, 1e-2]);
        let report = cross_validate(&inv, &table, &grid, 3, 4, Metric::CrossEntropy, &EvalSettings::default()).unwrap();
        assert_eq!(report.rows.len(), 3);
        for (t, row) in report.rows.iter().enumerate() {
            assert_eq!(row.fold, t);
            assert_eq!(row.dev_fold, (t + 1) % 3);
            assert_eq!(row.test_languages, 3);
            assert_eq!(row.train_languages, 3);
        }
        let mean = report.rows.iter().map(|r| r.test_metric).sum::<f64>() / 3.0;
        assert_eq!(report.mean_test, mean);
        let again = cross_validate(&inv, &table, &grid, 3, 4, Metric::CrossEntropy, &EvalSettings::default()).unwrap();
        assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn too_few_folds_or_empty_grid() {
        let (table, inv) = corpus(9);
        let grid = tabular_grid(vec![1], vec![0.0]);
        assert!(cross_validate(&inv, &table, &grid, 2, 0, Metric::CrossEntropy, &EvalSettings::default()).is_err());
        assert!(grid_search(&inv, &inv, &table, &[], Metric::CrossEntropy, &EvalSettings::default()).is_err());
    }

    #[test]
    fn singleton_grid_selects_its_only_point() {
        let (table, inv) = corpus(40);
        let grid = tabular_grid(vec![1], vec![1e-3]).configs(1);
        let sel = grid_search(&inv[..30], &inv[30..], &table, &grid, Metric::CrossEntropy, &EvalSettings::default()).unwrap();
        assert_eq!(sel.config, grid[0]);
        assert_eq!(sel.candidates.len(), 1);
        let direct = cross_entropy(&sel.model, &inv[30..], &EvalSettings::default()).unwrap().nats;
        assert_eq!(sel.dev_score, direct);
    }

    #[test]
    fn tied_scores_prefer_the_smaller_width() {
        // a BPP's cloze answer depends only on the order of its unary
        // potentials, which follows the training counts when they are distinct
        let (table, inv) = corpus(300);
        let mut counts = vec![0; table.len()];
        for i in inv[..200].iter().flat_map(|i| i.vowels) {
            counts[i] += 1;
        }
        let mut distinct = counts.clone();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), counts.len(), "{counts:?}");

        let grid = tabular_grid(vec![3, 1], vec![1e-3]).configs(1);
        let metric = Metric::Cloze(ClozeVariant::One);
        let sel = grid_search(&inv[..200], &inv[200..], &table, &grid, metric, &EvalSettings::default()).unwrap();
        let scores: Vec<f64> = sel.candidates.iter().map(|c| c.dev_score.unwrap()).collect();
        assert_eq!(scores[0], scores[1]);
        assert_eq!(sel.config.spec.width, 1);
    }

    #[test]
    fn metric_parsing_and_direction() {
        assert_eq!("xent".parse::<Metric>().unwrap(), Metric::CrossEntropy);
        assert_eq!("cloze-01".parse::<Metric>().unwrap(), Metric::Cloze(ClozeVariant::ZeroOne));
        assert!("accuracy".parse::<Metric>().is_err());
        assert_eq!(Metric::CrossEntropy.compare(1.0, 2.0), Ordering::Less);
        assert_eq!(Metric::Cloze(ClozeVariant::One).compare(1.0, 2.0), Ordering::Greater);
    }
}
