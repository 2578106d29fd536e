#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng as _;

use vowelpp::corpus::{Inventory, VowelTable};
use vowelpp::embedding::EmbeddingKind;
use vowelpp::pointprocess::{embeddings_from_columns, Family, ModelSpec, PointProcess};
use vowelpp::rng::{self, Rng};
use vowelpp::training::{random_parameters, NllObjective, TrainConfig};
use vowelpp::VowelSet;

pub fn rng(seed: u64) -> Rng {
    rng::stream(seed, 99)
}

pub fn random_embeddings(r: usize, n: usize, g: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, n, |_, _| g.random_range(-1.0..1.0))
}

pub fn random_phi(n: usize, g: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| g.random_range(0.2..3.0)).collect()
}

/// Symmetric pair potentials in `[lo, 1)`.
pub fn random_psi(n: usize, lo: f64, g: &mut Rng) -> DMatrix<f64> {
    let mut psi = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        for j in i + 1..n {
            let v = g.random_range(lo..1.0);
            psi[(i, j)] = v;
            psi[(j, i)] = v;
        }
    }
    psi
}

pub fn random_process(family: Family, n: usize, g: &mut Rng) -> PointProcess {
    match family {
        Family::Bpp => PointProcess::from_potentials(Family::Bpp, random_phi(n, g), None).unwrap(),
        Family::Mpp => PointProcess::from_potentials(Family::Mpp, random_phi(n, g), Some(random_psi(n, 0.2, g))).unwrap(),
        Family::Dpp => {
            let r = g.random_range(1..=n.max(1) + 2);
            PointProcess::from_embeddings(Family::Dpp, random_embeddings(r, n, g), 0.0).unwrap()
        }
    }
}

pub fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

pub fn dpp_from_columns(cols: &[Vec<f64>]) -> PointProcess {
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    PointProcess::from_embeddings(Family::Dpp, embeddings_from_columns(&refs), 0.0).unwrap()
}

/// Random inventories with sizes in `[0, max_size]`.
pub fn random_inventories(n: usize, m: usize, max_size: usize, g: &mut Rng) -> Vec<Inventory> {
    (0..m)
        .map(|l| {
            let size = g.random_range(0..=max_size.min(n));
            let v: VowelSet = rand::seq::index::sample(g, n, size).into_iter().collect();
            Inventory::new(format!("l{l}"), v)
        })
        .collect()
}

/// Largest componentwise relative error between the analytic gradient and
/// central differences with step `h`.
///
/// Central differences carry rounding noise of about `eps |f| / h`, so a
/// component smaller than that divided by `tol` cannot be resolved to `tol`;
/// such components are measured against that resolution instead.
pub fn max_gradient_error(obj: &NllObjective<'_>, theta: &[f64], h: f64, tol: f64) -> f64 {
    let (f, g) = obj.evaluate(theta).unwrap();
    let floor = 4.0 * f64::EPSILON * f.abs().max(1.0) / (h * tol);
    let mut worst: f64 = 0.0;
    let mut p = theta.to_vec();
    for k in 0..theta.len() {
        p[k] = theta[k] + h;
        let fp = obj.value(&p).unwrap();
        p[k] = theta[k] - h;
        let fm = obj.value(&p).unwrap();
        p[k] = theta[k];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(floor));
    }
    worst
}

/// The combinations of family and embedding reported by the model suite.
pub fn in_scope_specs() -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for family in [Family::Bpp, Family::Mpp, Family::Dpp] {
        out.push(ModelSpec::new(family, EmbeddingKind::Neural, 6, 2));
        out.push(ModelSpec::new(family, EmbeddingKind::Interpretable, 2, 2));
        out.push(ModelSpec::new(family, EmbeddingKind::Prototype, 5, 1));
    }
    out
}

/// Objective inputs for a gradient check of `spec`.
pub fn gradient_problem(spec: ModelSpec, n: usize, seed: u64) -> (VowelTable, Vec<Inventory>, TrainConfig) {
    let table = vowelpp::synthetic::vowel_table(n, seed).unwrap();
    let mut g = rng(seed);
    // a DPP gives zero mass to sets larger than the embedding width, and sets
    // near that size make the log-determinant too ill-conditioned for
    // finite differences
    let max_size = match spec.family {
        Family::Dpp if spec.embedding == EmbeddingKind::Interpretable => 2,
        Family::Dpp => spec.width.saturating_sub(2).clamp(1, 5),
        _ => 5,
    };
    let train = random_inventories(n, 30, max_size, &mut g);
    let mut cfg = TrainConfig::new(spec, 0.01, seed);
    cfg.surrogate_samples = 500;
    (table, train, cfg)
}

/// Random parameters; an MPP temperature is drawn from `log T` in `[1, 3]` so
/// that pair potentials stay in the range seen during training.
pub fn random_theta(obj: &NllObjective<'_>, seed: u64) -> Vec<f64> {
    let mut theta = random_parameters(obj.layout(), 0.7, seed).values;
    if let Some(idx) = obj.layout().log_temperature_index() {
        theta[idx] = rng(seed).random_range(1.0..3.0);
    }
    theta
}
