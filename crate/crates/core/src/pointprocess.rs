//! Bernoulli, Markov and determinantal point processes over the vowel
//! universe.
//!
//! * BPP: `p(V) = prod_{i in V} phi_i / prod_i (1 + phi_i)`.
//! * MPP: `p(V) ∝ prod_{i in V} phi_i * prod_{i<j in V} psi_ij`, with
//!   `psi_ij = exp(-1 / (T |p_i - p_j|^2))`.
//! * DPP: `p(V) = det L_V / det(L + I)` with `L = E^T E`.
//!
//! The unary potential is `phi_i = |e_i|` (norm) or, for prototype
//! embeddings, the mixture density `sum_l e_il`. Pair potentials use the
//! embeddings themselves, except for prototype embeddings where distances
//! are taken in the `k`-dimensional metric space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::VowelTable;
use crate::embedding::{EmbeddingKind, Layout, ParameterVector};
use crate::error::{Error, Result};
use crate::linalg::{gram_log_det, log_det_psd, log_sum_exp};
use crate::vowelset::{VowelSet, MAX_UNIVERSE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Bpp,
    Mpp,
    Dpp,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpp" => Ok(Family::Bpp),
            "mpp" => Ok(Family::Mpp),
            "dpp" => Ok(Family::Dpp),
            other => Err(Error::Config(format!("unknown model family {other:?}"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Bpp => "BPP",
            Family::Mpp => "MPP",
            Family::Dpp => "DPP",
        })
    }
}

/// How the unary potential is read off an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    /// `phi = |e|`.
    Norm,
    /// `phi = sum_l e_l`, a Gaussian-mixture density.
    MixtureDensity,
}

/// Model family plus embedding hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub embedding: EmbeddingKind,
    /// `r`: embedding width, or prototype count.
    pub width: usize,
    /// `d`: network depth (ignored for tabular).
    pub depth: usize,
}

impl ModelSpec {
    pub fn new(family: Family, embedding: EmbeddingKind, width: usize, depth: usize) -> Self {
        ModelSpec { family, embedding, width, depth }
    }

    pub fn potential(&self) -> Potential {
        match (self.family, self.embedding) {
            (Family::Bpp | Family::Mpp, EmbeddingKind::Prototype) => Potential::MixtureDensity,
            _ => Potential::Norm,
        }
    }

    /// Whether pair potentials are measured in the metric space `x`.
    pub fn pairs_in_metric_space(&self) -> bool {
        self.embedding == EmbeddingKind::Prototype
    }

    pub fn layout(&self, n_vowels: usize, input_dim: usize) -> Result<Layout> {
        let width = if self.embedding == EmbeddingKind::Interpretable { input_dim } else { self.width };
        if self.embedding == EmbeddingKind::Interpretable && self.width != input_dim {
            return Err(Error::Config(format!(
                "interpretable embedding needs r = k = {input_dim}, got r = {}",
                self.width
            )));
        }
        Layout::new(self.embedding, n_vowels, input_dim, width, self.depth, self.family == Family::Mpp)
    }

    /// Reject a DPP whose embeddings cannot span the largest inventory.
    pub fn check_capacity(&self, input_dim: usize, max_inventory: usize) -> Result<()> {
        if self.family == Family::Dpp {
            let rank = match self.embedding {
                EmbeddingKind::Interpretable => input_dim,
                _ => self.width,
            };
            if rank < max_inventory {
                return Err(Error::Config(format!(
                    "DPP with {rank}-dimensional embeddings assigns zero probability to inventories of size {max_inventory}"
                )));
            }
        }
        Ok(())
    }

    /// Short tag such as `uDPP` or `BPP` (tabular).
    pub fn tag(&self) -> String {
        let prefix = match self.embedding {
            EmbeddingKind::Tabular => "",
            EmbeddingKind::Neural => "u",
            EmbeddingKind::Interpretable => "i",
            EmbeddingKind::Prototype => "p",
        };
        format!("{prefix}{}", self.family)
    }
}

/// A point process with all per-vowel quantities cached.
#[derive(Debug, Clone)]
pub struct PointProcess {
    family: Family,
    potential: Potential,
    /// `r x N`, column `i` is `e_i`.
    embeddings: DMatrix<f64>,
    /// Points whose distances drive `psi` (`q x N`).
    pair_points: DMatrix<f64>,
    log_temperature: f64,
    phi: Vec<f64>,
    log_phi: Vec<f64>,
    log_psi: Option<DMatrix<f64>>,
    kernel: Option<DMatrix<f64>>,
    log_normalizer: Option<f64>,
}

/// `log psi` for squared distance `d2`.
pub fn log_psi_from_dist2(d2: f64, temperature: f64) -> f64 {
    if d2 == 0.0 {
        return f64::NEG_INFINITY;
    }
    -1.0 / (temperature * d2)
}

impl PointProcess {
    /// Build from embeddings. `pair_points` defaults to the embeddings.
    pub fn new(
        family: Family,
        potential: Potential,
        embeddings: DMatrix<f64>,
        pair_points: Option<DMatrix<f64>>,
        log_temperature: f64,
    ) -> Result<Self> {
        let n = embeddings.ncols();
        if n > MAX_UNIVERSE {
            return Err(Error::UniverseTooLarge(n));
        }
        let pair_points = pair_points.unwrap_or_else(|| embeddings.clone());
        if pair_points.ncols() != n {
            return Err(Error::Dimension { expected: n, got: pair_points.ncols() });
        }
        let phi: Vec<f64> = (0..n)
            .map(|i| match potential {
                Potential::Norm => embeddings.column(i).norm(),
                Potential::MixtureDensity => embeddings.column(i).sum(),
            })
            .collect();
        let log_psi = (family == Family::Mpp).then(|| {
            let t = log_temperature.exp();
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    let d2 = (pair_points.column(i) - pair_points.column(j)).norm_squared();
                    let v = log_psi_from_dist2(d2, t);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        });
        let kernel = (family == Family::Dpp).then(|| embeddings.tr_mul(&embeddings));
        let mut pp = PointProcess {
            family,
            potential,
            embeddings,
            pair_points,
            log_temperature,
            log_phi: phi.iter().map(|p| p.ln()).collect(),
            phi,
            log_psi,
            kernel,
            log_normalizer: None,
        };
        pp.log_normalizer = match family {
            Family::Bpp => Some(pp.phi.iter().map(|p| p.ln_1p()).sum()),
            Family::Dpp => {
                let k = pp.kernel.as_ref().unwrap();
                Some(log_det_psd(&(k + DMatrix::identity(n, n))))
            }
            Family::Mpp => None,
        };
        Ok(pp)
    }

    /// Norm potentials, pair points equal to the embeddings.
    pub fn from_embeddings(family: Family, embeddings: DMatrix<f64>, log_temperature: f64) -> Result<Self> {
        Self::new(family, Potential::Norm, embeddings, None, log_temperature)
    }

    /// A BPP or MPP given directly by its potentials. `psi` must be
    /// symmetric with entries in `[0, 1]`; it is ignored for a BPP.
    pub fn from_potentials(family: Family, phi: Vec<f64>, psi: Option<DMatrix<f64>>) -> Result<Self> {
        if family == Family::Dpp {
            return Err(Error::Config("a DPP is defined by its embeddings".into()));
        }
        let n = phi.len();
        let embeddings = DMatrix::from_row_slice(1, n, &phi);
        let mut pp = Self::new(Family::Bpp, Potential::Norm, embeddings, None, 0.0)?;
        pp.phi = phi;
        pp.log_phi = pp.phi.iter().map(|p| p.ln()).collect();
        pp.log_normalizer = Some(pp.phi.iter().map(|p| p.ln_1p()).sum());
        if family == Family::Mpp {
            let psi = psi.unwrap_or_else(|| DMatrix::from_element(n, n, 1.0));
            if psi.shape() != (n, n) {
                return Err(Error::Dimension { expected: n, got: psi.nrows() });
            }
            let mut lp = psi.map(f64::ln);
            lp.fill_diagonal(0.0);
            pp.family = Family::Mpp;
            pp.log_psi = Some(lp);
            pp.log_normalizer = None;
        }
        Ok(pp)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn potential(&self) -> Potential {
        self.potential
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn embeddings(&self) -> &DMatrix<f64> {
        &self.embeddings
    }

    pub fn pair_points(&self) -> &DMatrix<f64> {
        &self.pair_points
    }

    pub fn log_temperature(&self) -> f64 {
        self.log_temperature
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    /// `L = E^T E` (DPP only).
    pub fn kernel(&self) -> Option<&DMatrix<f64>> {
        self.kernel.as_ref()
    }

    pub fn phi(&self, i: usize) -> f64 {
        self.phi[i]
    }

    pub fn phis(&self) -> &[f64] {
        &self.phi
    }

    pub fn log_phi(&self, i: usize) -> f64 {
        self.log_phi[i]
    }

    /// `log psi_ij` (0 for a BPP or DPP, where there are no pair terms).
    pub fn log_psi(&self, i: usize, j: usize) -> f64 {
        match &self.log_psi {
            Some(m) if i != j => m[(i, j)],
            _ => 0.0,
        }
    }

    /// Pair potential in `[0, 1]`; exactly 0 for coincident points.
    pub fn psi(&self, i: usize, j: usize) -> f64 {
        match &self.log_psi {
            Some(m) => m[(i, j)].exp(),
            None => {
                let d2 = (self.pair_points.column(i) - self.pair_points.column(j)).norm_squared();
                log_psi_from_dist2(d2, self.temperature()).exp()
            }
        }
    }

    /// Exact `log Z` for BPP and DPP; `None` for an MPP.
    pub fn log_normalizer(&self) -> Option<f64> {
        self.log_normalizer
    }

    /// Log of the unnormalized score: `sum log phi (+ sum log psi)` for BPP
    /// and MPP, `log det L_V` for a DPP.
    pub fn log_score(&self, v: VowelSet) -> f64 {
        match self.family {
            Family::Bpp => self.bpp_log_unnormalized(v),
            Family::Mpp => self.mpp_log_unnormalized(v),
            Family::Dpp => self.dpp_log_det(v),
        }
    }

    pub fn bpp_log_unnormalized(&self, v: VowelSet) -> f64 {
        v.iter().map(|i| self.log_phi[i]).sum()
    }

    /// `sum_{i in V} log phi_i - sum_i log(1 + phi_i)`.
    pub fn bpp_log_prob(&self, v: VowelSet) -> f64 {
        let z: f64 = self.phi.iter().map(|p| p.ln_1p()).sum();
        self.bpp_log_unnormalized(v) - z
    }

    pub fn bpp_marginal(&self, i: usize) -> f64 {
        let p = self.phi[i];
        p / (1.0 + p)
    }

    pub fn mpp_log_unnormalized(&self, v: VowelSet) -> f64 {
        let members = v.to_vec();
        let mut s: f64 = members.iter().map(|&i| self.log_phi[i]).sum();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                s += self.log_psi(i, j);
            }
        }
        s
    }

    /// Submatrix `L_V`.
    pub fn kernel_submatrix(&self, v: VowelSet) -> DMatrix<f64> {
        let idx = v.to_vec();
        let e = self.embeddings.select_columns(&idx);
        e.tr_mul(&e)
    }

    pub fn dpp_log_det(&self, v: VowelSet) -> f64 {
        gram_log_det(&self.embeddings.select_columns(&v.to_vec()))
    }

    /// `log det L_V - log det(L + I)`.
    pub fn dpp_log_prob(&self, v: VowelSet) -> f64 {
        let z = self.log_normalizer.unwrap_or_else(|| {
            let n = self.len();
            log_det_psd(&(self.embeddings.tr_mul(&self.embeddings) + DMatrix::identity(n, n)))
        });
        self.dpp_log_det(v) - z
    }

    /// Normalized log-probability. An MPP needs `log_partition`.
    pub fn log_prob(&self, v: VowelSet, log_partition: Option<f64>) -> Result<f64> {
        match self.family {
            Family::Bpp => Ok(self.bpp_log_prob(v)),
            Family::Dpp => Ok(self.dpp_log_prob(v)),
            Family::Mpp => {
                let z = log_partition.ok_or(Error::MissingPartition)?;
                Ok(self.mpp_log_unnormalized(v) - z)
            }
        }
    }

    /// Change in `log_score` when vowel `i` is toggled.
    ///
    /// Returns `None` when the change is undefined (both scores infinite);
    /// callers should then compare full scores.
    pub fn toggle_delta(&self, v: VowelSet, i: usize) -> Option<f64> {
        match self.family {
            Family::Bpp | Family::Mpp => {
                let rest = {
                    let mut r = v;
                    r.remove(i);
                    r
                };
                let mut gain = self.log_phi[i];
                if self.family == Family::Mpp {
                    for j in rest {
                        gain += self.log_psi(i, j);
                    }
                }
                if gain.is_nan() {
                    return None;
                }
                Some(if v.contains(i) { -gain } else { gain })
            }
            Family::Dpp => {
                let a = self.dpp_log_det(v);
                let b = self.dpp_log_det(v.toggled(i));
                let d = b - a;
                (!d.is_nan()).then_some(d)
            }
        }
    }

    /// Log-probabilities of every subset, by enumeration. Intended for
    /// small universes.
    pub fn enumerate_log_scores(&self) -> Vec<f64> {
        let n = self.len();
        assert!(n < 64, "enumeration over {n} vowels is not supported");
        (0..1u64 << n).map(|bits| self.log_score(VowelSet::from_bits(bits as u128))).collect()
    }

    /// Exact `log Z` by enumeration.
    pub fn log_partition_exact(&self) -> f64 {
        log_sum_exp(&self.enumerate_log_scores())
    }
}

/// A trained model: specification, parameters, the table it was trained
/// against, and the cached point process.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: ParameterVector,
    pub table: VowelTable,
    /// Unary potentials of the Bernoulli proposal used to estimate the MPP
    /// partition function.
    pub proposal_phi: Option<Vec<f64>>,
    pub process: PointProcess,
    /// Metric-space coordinates `x(v)` (`k x N`), when the embedding has them.
    pub metric_points: Option<DMatrix<f64>>,
}

impl TrainedModel {
    pub fn build(
        spec: ModelSpec,
        params: ParameterVector,
        table: VowelTable,
        proposal_phi: Option<Vec<f64>>,
    ) -> Result<Self> {
        let expected = spec.layout(table.len(), crate::corpus::FEATURE_DIM)?;
        if params.layout != expected {
            return Err(Error::Config("parameter layout does not match the model specification".into()));
        }
        let emb = params.embedder();
        let n = table.len();
        let mut embeddings = DMatrix::zeros(params.layout.output_dim(), n);
        let metric_dim = params.layout.metric_dim();
        let mut metric = metric_dim.map(|k| DMatrix::zeros(k, n));
        for i in 0..n {
            let tape = emb.forward(i, table.feature(i))?;
            if let Some(m) = metric.as_mut() {
                match &tape.x {
                    Some(x) => m.set_column(i, x),
                    None => m.set_column(i, &tape.e),
                }
            }
            embeddings.set_column(i, &tape.e);
        }
        let pair_points = if spec.pairs_in_metric_space() { metric.clone() } else { None };
        let log_t = params.log_temperature().unwrap_or(0.0);
        let process = PointProcess::new(spec.family, spec.potential(), embeddings, pair_points, log_t)?;
        Ok(TrainedModel { spec, params, table, proposal_phi, process, metric_points: metric })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            spec: self.spec,
            input_dim: self.params.layout.input_dim,
            params: self.params.clone(),
            table: self.table.clone(),
            proposal_phi: self.proposal_phi.clone(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format {:?}", c.format)));
        }
        Self::build(c.spec, c.params, c.table, c.proposal_phi)
    }
}

pub const CHECKPOINT_FORMAT: &str = "vowelpp-checkpoint-v1";

/// Serialized form of a [`TrainedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub spec: ModelSpec,
    pub input_dim: usize,
    pub params: ParameterVector,
    pub table: VowelTable,
    pub proposal_phi: Option<Vec<f64>>,
}

/// Embedding matrix whose columns are the given vectors.
pub fn embeddings_from_columns(cols: &[&[f64]]) -> DMatrix<f64> {
    let r = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(r, cols.len(), |i, j| cols[j][i])
}
