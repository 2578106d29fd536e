mod run;

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use vowelpp::baseline::{minimize_energy, EnergyConfig, EnergyRun};
use vowelpp::corpus::{self, corpus_stats, dedupe_languages, make_folds, Inventory, LanguageListing};
use vowelpp::embedding::EmbeddingKind;
use vowelpp::evaluation::{
    cloze_accuracy, cross_entropy, export_metric_space, make_cloze_instances, ClozeVariant, EvalSettings, MetricsReport,
};
use vowelpp::inference::{map_inventory, DEFAULT_MAP_BUDGET};
use vowelpp::pointprocess::{Checkpoint, Family, ModelSpec, TrainedModel};
use vowelpp::training::{cross_validate, fit_detailed, GridSpec, Metric, TrainConfig};

use run::RunDir;

#[derive(Parser)]
#[command(name = "vowelpp", version, about = "Point-process models of vowel inventories")]
struct Cli {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for folds and grid points (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vowel table and corpus statistics.
    Ingest(IngestArgs),
    /// Fit one model and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on held-out languages.
    Eval(EvalArgs),
    /// K-fold cross-validation over a hyperparameter grid.
    Cv(CvArgs),
    /// Export a model's metric space aligned to formant space.
    Viz(VizArgs),
    /// Minimize the dispersion energy baseline.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// JSON-lines corpus.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Restrict to the languages outside (train) or inside (eval) one fold.
#[derive(Args, Clone, Copy, Serialize)]
struct SplitArgs {
    #[arg(long, requires = "test_fold")]
    folds: Option<usize>,
    #[arg(long, requires = "folds")]
    test_fold: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON training configuration; replaces the model flags.
    #[arg(long, conflicts_with_all = ["family", "embedding", "width", "depth", "lambda"])]
    config: Option<PathBuf>,
    /// bpp, mpp or dpp.
    #[arg(long, required_unless_present = "config")]
    family: Option<Family>,
    /// tabular, neural, interpretable or prototype.
    #[arg(long, default_value = "neural")]
    embedding: EmbeddingKind,
    #[arg(long, default_value_t = 10)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    /// Held-out cross-entropy (the default when no metric is given).
    #[arg(long)]
    xent: bool,
    /// Cloze variant: 1, 01 or 012. Repeatable.
    #[arg(long)]
    cloze: Vec<ClozeVariant>,
    /// MAP inventory of this size. Repeatable.
    #[arg(long)]
    map_n: Vec<usize>,
    /// Importance samples for an MPP partition function.
    #[arg(long, default_value_t = EvalSettings::default().samples)]
    samples: usize,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON grid; replaces the standard grid of --family/--embedding.
    #[arg(long, conflicts_with_all = ["family", "embedding"])]
    grid: Option<PathBuf>,
    #[arg(long, required_unless_present = "grid")]
    family: Option<Family>,
    #[arg(long, default_value = "neural")]
    embedding: EmbeddingKind,
    #[arg(long, short = 'k', default_value_t = 10)]
    folds: usize,
    /// xent, or a cloze variant (1, 01, 012).
    #[arg(long, default_value = "xent")]
    metric: Metric,
    #[arg(long, default_value_t = EvalSettings::default().samples)]
    samples: usize,
}

#[derive(Args)]
struct VizArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON grid specification; replaces the grid flags.
    #[arg(long, conflicts_with_all = ["nx", "ny", "margin", "allow_reflection"])]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    nx: usize,
    #[arg(long, default_value_t = 20)]
    ny: usize,
    #[arg(long, default_value_t = 0.1)]
    margin: f64,
    #[arg(long)]
    allow_reflection: bool,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    out: PathBuf,
    /// JSON energy configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Point counts to minimize; defaults to the configuration's.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
}

/// A malformed invocation or configuration file.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    use vowelpp::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) | E::BudgetExceeded { .. } => EXIT_USAGE,
                E::ZeroProbability { .. } | E::Numerical(_) | E::MissingPartition => EXIT_NUMERICAL,
                E::Parse { .. }
                | E::DuplicateVowel { .. }
                | E::NoFormants(_)
                | E::UnknownSymbol(_)
                | E::UniverseTooLarge(_)
                | E::Dimension { .. }
                | E::Degenerate(_)
                | E::Io(_)
                | E::Json(_) => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global()?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a, seed),
        Command::Train(a) => cmd_train(a, seed),
        Command::Eval(a) => cmd_eval(a, seed),
        Command::Cv(a) => cmd_cv(a, seed),
        Command::Viz(a) => cmd_viz(a, seed),
        Command::Baseline(a) => cmd_baseline(a, seed),
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

fn read_listings(path: &Path) -> Result<Vec<LanguageListing>> {
    let file = File::open(path).with_context(|| format!("cannot open corpus {}", path.display()))?;
    corpus::parse_corpus(BufReader::new(file)).with_context(|| format!("corpus {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    let file = File::open(path).with_context(|| format!("cannot open checkpoint {}", path.display()))?;
    let c: Checkpoint = serde_json::from_reader(BufReader::new(file))
        .map_err(vowelpp::Error::from)
        .with_context(|| format!("checkpoint {}", path.display()))?;
    Ok(TrainedModel::from_checkpoint(c)?)
}

/// `(train, test)` languages under the split; everything trains when unsplit.
fn apply_split(inventories: Vec<Inventory>, split: SplitArgs, seed: u64) -> Result<(Vec<Inventory>, Vec<Inventory>)> {
    match (split.folds, split.test_fold) {
        (Some(k), Some(t)) => {
            if t >= k {
                return Err(UsageError(format!("test fold {t} is out of range for {k} folds")).into());
            }
            let folds = make_folds(&inventories, k, seed)?;
            Ok((folds.outside(&inventories, t), folds.fold(&inventories, t)))
        }
        _ => Ok((inventories.clone(), inventories)),
    }
}

fn cmd_ingest(a: IngestArgs, seed: u64) -> Result<()> {
    let corpus = corpus::ingest(read_listings(&a.corpus)?, seed)?;
    let stats = corpus_stats(&corpus.table, &corpus.inventories);
    let mut dir = RunDir::create(&a.out)?;

    let mut table = Vec::new();
    corpus.table.write_tsv(&mut table)?;
    dir.write("vowel_table.tsv", &table)?;

    let mut freq = String::from("symbol\tpercent\n");
    for (s, p) in &stats.vowel_frequency {
        writeln!(freq, "{s}\t{p}")?;
    }
    dir.write("vowel_frequency.tsv", freq.as_bytes())?;

    let mut hist = String::from("size\tlanguages\n");
    for (size, count) in &stats.size_histogram {
        writeln!(hist, "{size}\t{count}")?;
    }
    dir.write("size_histogram.tsv", hist.as_bytes())?;
    dir.write_json("stats.json", &stats)?;
    dir.finish("ingest", json!({}), seed, &[&a.corpus])?;

    println!(
        "{} languages, {} vowels, sizes {}-{}, mean {:.2}, mode {}",
        stats.languages, stats.universe, stats.min_size, stats.max_size, stats.mean_size, stats.mode_size
    );
    Ok(())
}

fn cmd_train(a: TrainArgs, seed: u64) -> Result<()> {
    let mut config = match (&a.config, a.family) {
        (Some(path), _) => read_config::<TrainConfig>(path)?,
        (None, Some(family)) => TrainConfig::new(ModelSpec::new(family, a.embedding, a.width, a.depth), a.lambda, seed),
        (None, None) => unreachable!("clap requires --family without --config"),
    };
    config.seed = seed;
    let corpus = corpus::ingest(read_listings(&a.corpus)?, seed)?;
    let (train, _) = apply_split(corpus.inventories, a.split, seed)?;

    let outcome = fit_detailed(&config, &train, &corpus.table)?;
    let mut dir = RunDir::create(&a.out)?;
    dir.write_json("checkpoint.json", &outcome.model.checkpoint())?;
    let mut log = String::from("iteration\tobjective\n");
    for (i, f) in outcome.history.iter().enumerate() {
        writeln!(log, "{i}\t{f}")?;
    }
    dir.write("training_log.tsv", log.as_bytes())?;
    dir.write_json(
        "fit.json",
        &json!({
            "objective": outcome.objective,
            "iterations": outcome.iterations,
            "termination": outcome.termination,
            "train_languages": train.len(),
        }),
    )?;
    dir.finish("train", json!({ "train": config, "split": a.split }), seed, &[&a.corpus])?;
    println!(
        "{} trained on {} languages: objective {:.6} after {} iterations ({:?})",
        config.spec.tag(),
        train.len(),
        outcome.objective,
        outcome.iterations,
        outcome.termination
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs, seed: u64) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let listings = dedupe_languages(read_listings(&a.corpus)?, seed);
    let inventories = model
        .table
        .inventories(&listings)
        .context("corpus does not match the checkpoint's vowel table")?;
    let (_, test) = apply_split(inventories, a.split, seed)?;
    let settings = EvalSettings { samples: a.samples, seed, ..EvalSettings::default() };
    let xent = a.xent || (a.cloze.is_empty() && a.map_n.is_empty());

    let mut report = MetricsReport { model: model.spec.tag(), test_languages: test.len(), ..Default::default() };
    if xent {
        let r = cross_entropy(&model, &test, &settings)?;
        println!("xent {} nats", r.nats);
        report.cross_entropy = Some(r);
    }
    for &variant in &a.cloze {
        let instances = make_cloze_instances(&test, variant, seed, settings.repetitions);
        let r = cloze_accuracy(&model.process, &instances)?;
        println!("{variant} {:.2}% of {}", r.accuracy, r.outcomes.len());
        report.cloze.push(r);
    }
    for &n in &a.map_n {
        let v = map_inventory(&model.process, n, DEFAULT_MAP_BUDGET)?;
        let symbols: Vec<String> = model.table.symbols_of(v).into_iter().map(String::from).collect();
        println!("map-{n} {{{}}}", symbols.join(", "));
        report.map.push((n, symbols));
    }

    let mut dir = RunDir::create(&a.out)?;
    dir.write_json("metrics.json", &report)?;
    let config = json!({
        "split": a.split,
        "xent": xent,
        "cloze": a.cloze,
        "map_n": a.map_n,
        "settings": settings,
    });
    dir.finish("eval", config, seed, &[&a.checkpoint, &a.corpus])
}

fn cmd_cv(a: CvArgs, seed: u64) -> Result<()> {
    let grid = match (&a.grid, a.family) {
        (Some(path), _) => read_config::<GridSpec>(path)?,
        (None, Some(family)) => GridSpec::standard(family, a.embedding),
        (None, None) => unreachable!("clap requires --family without --grid"),
    };
    let corpus = corpus::ingest(read_listings(&a.corpus)?, seed)?;
    let settings = EvalSettings { samples: a.samples, seed, ..EvalSettings::default() };
    let report = cross_validate(&corpus.inventories, &corpus.table, &grid, a.folds, seed, a.metric, &settings)?;

    let mut dir = RunDir::create(&a.out)?;
    for row in &report.rows {
        dir.write_json(&format!("folds/fold_{:02}.json", row.fold), row)?;
    }
    dir.write_json("cv_report.json", &report)?;
    let config = json!({ "grid": grid, "folds": a.folds, "metric": a.metric, "settings": settings });
    dir.finish("cv", config, seed, &[&a.corpus])?;
    println!("{}-fold mean test {}, mean dev {}", report.k, report.mean_test, report.mean_dev);
    Ok(())
}

fn cmd_viz(a: VizArgs, seed: u64) -> Result<()> {
    let grid = match &a.grid {
        Some(path) => read_config(path)?,
        None => vowelpp::evaluation::GridSpec {
            nx: a.nx,
            ny: a.ny,
            margin: a.margin,
            allow_reflection: a.allow_reflection,
        },
    };
    let model = load_checkpoint(&a.checkpoint)?;
    let export = export_metric_space(&model, &grid)?;
    let mut dir = RunDir::create(&a.out)?;
    let mut tsv = Vec::new();
    export.write_tsv(&mut tsv)?;
    dir.write("metric_space.tsv", &tsv)?;
    dir.write_json("alignment.json", &export.alignment)?;
    dir.finish("viz", json!({ "grid": grid }), seed, &[&a.checkpoint])?;
    println!("{} rows, alignment scale {}", export.rows.len(), export.alignment.scale);
    Ok(())
}

#[derive(Serialize)]
struct BaselineResult {
    m: usize,
    energy: f64,
    points: Vec<Vec<f64>>,
    runs: Vec<EnergyRun>,
}

fn cmd_baseline(a: BaselineArgs, seed: u64) -> Result<()> {
    let mut base: EnergyConfig = match &a.config {
        Some(path) => read_config(path)?,
        None => EnergyConfig::default(),
    };
    base.seed = seed;
    let ms = if a.m.is_empty() { vec![base.m] } else { a.m.clone() };
    let mut results = Vec::with_capacity(ms.len());
    for &m in &ms {
        let runs = minimize_energy(&EnergyConfig { m, ..base.clone() })?;
        let best = runs
            .iter()
            .min_by(|x, y| x.energy.total_cmp(&y.energy))
            .ok_or_else(|| vowelpp::Error::Numerical("no restart completed".into()))?;
        println!("m={m} energy {}", best.energy);
        results.push(BaselineResult { m, energy: best.energy, points: best.points.clone(), runs: runs.clone() });
    }
    let mut dir = RunDir::create(&a.out)?;
    dir.write_json("baseline.json", &results)?;
    dir.finish("baseline", json!({ "energy": base, "m": ms }), seed, &[])
}
