use crate::corpus::{Inventory, VowelTable, FEATURE_DIM};
use crate::embedding::{init_params, spread_first_layer, ParameterVector};
use crate::error::Result;
use crate::inference::BernoulliProposal;
use crate::pointprocess::{Family, ModelSpec, TrainedModel};
use crate::rng::{self, streams};
use crate::training::lbfgs::{minimize, Termination};
use crate::training::objective::{NllObjective, TrainConfig};
use crate::vowelset::VowelSet;

/// Target `log psi` of the closest initial pair; every other pair starts
/// weaker.
const INITIAL_CLOSEST_LOG_PSI: f64 = -0.1;

/// First-layer init range for neural DPP nets.
const DPP_FIRST_LAYER_WEIGHT: f64 = 3.0;
const DPP_FIRST_LAYER_BIAS: f64 = 1.0;

/// A fitted model with optimizer diagnostics.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TrainedModel,
    pub objective: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub history: Vec<f64>,
}

/// Initialize, minimize, and cache a model on `train`.
pub fn fit(config: &TrainConfig, train: &[Inventory], table: &VowelTable) -> Result<TrainedModel> {
    fit_detailed(config, train, table).map(|o| o.model)
}

pub fn fit_detailed(config: &TrainConfig, train: &[Inventory], table: &VowelTable) -> Result<FitOutcome> {
    config.validate()?;
    let spec = config.spec;
    let n = table.len();
    let max_inventory = train.iter().map(|i| i.vowels.len()).max().unwrap_or(0);
    spec.check_capacity(FEATURE_DIM, max_inventory)?;
    let layout = spec.layout(n, FEATURE_DIM)?;

    let attested: VowelSet = train.iter().fold(VowelSet::EMPTY, |acc, i| acc.union(i.vowels));
    let mut rng = rng::stream(config.seed, streams::INIT);
    let mut params = init_params(&layout, table, &attested.to_vec(), &mut rng)?;
    if spec.family == Family::Dpp {
        spread_first_layer(&mut params, DPP_FIRST_LAYER_WEIGHT, DPP_FIRST_LAYER_BIAS, &mut rng);
    }
    if spec.family == Family::Mpp {
        // start from the Bernoulli fit of the same embedding, which the MPP
        // contains as its high-temperature limit
        let bpp = TrainConfig { spec: ModelSpec { family: Family::Bpp, ..spec }, ..config.clone() };
        let warm = fit_detailed(&bpp, train, table)?;
        let len = layout.embedding_len();
        params.values[..len].copy_from_slice(warm.model.params.embedding());
    }
    if let Some(idx) = layout.log_temperature_index() {
        params.values[idx] = initial_log_temperature(&params, table)?;
    }

    let proposal = (spec.family == Family::Mpp)
        .then(|| BernoulliProposal::from_marginals(n, &train.iter().map(|i| i.vowels).collect::<Vec<_>>()));
    let objective = NllObjective::new(config, table, train, proposal.as_ref())?;
    let min = minimize(|x| objective.evaluate(x), params.values, &config.optimizer)?;
    log::debug!(
        "fit {} r={} d={} lambda={}: f={:.6} after {} iterations ({:?})",
        spec.tag(),
        spec.width,
        spec.depth,
        config.lambda,
        min.value,
        min.iterations,
        min.termination
    );
    let params = ParameterVector { layout, values: min.x };
    let model = TrainedModel::build(spec, params, table.clone(), proposal.map(|p| p.phi().to_vec()))?;
    Ok(FitOutcome {
        model,
        objective: min.value,
        iterations: min.iterations,
        termination: min.termination,
        history: min.history,
    })
}

/// `log T` such that the closest pair of distinct initial points has
/// `log psi = INITIAL_CLOSEST_LOG_PSI`.
fn initial_log_temperature(params: &ParameterVector, table: &VowelTable) -> Result<f64> {
    let emb = params.embedder();
    let mut points = Vec::with_capacity(table.len());
    for i in 0..table.len() {
        let tape = emb.forward(i, table.feature(i))?;
        points.push(match (params.layout.kind, tape.x) {
            (crate::embedding::EmbeddingKind::Prototype, Some(x)) => x,
            _ => tape.e,
        });
    }
    let mut closest = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (&points[i] - &points[j]).norm_squared();
            if d > 0.0 {
                closest = closest.min(d);
            }
        }
    }
    if closest.is_infinite() {
        return Ok(0.0);
    }
    // -1 / (T closest) = target
    Ok((-1.0 / (INITIAL_CLOSEST_LOG_PSI * closest)).ln())
}
