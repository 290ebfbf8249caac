//! Command-line surface: argument parsing and dispatch onto `desalt_core`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use desalt_core::dataset::{parse_csv, write_csv, Dataset, Target};
use desalt_core::model::{Algorithm, HyperValue, Hyperparameters, ModelConfig};
use desalt_core::model_selection::{
    evaluate, grid_search, loo_predictions, parse_grid, GridSpec, SelectionMetric, SplitPlan,
};
use desalt_core::physics::{generate_synthetic, PhysicsParams, SynthConfig};
use desalt_core::pipeline::{
    chain_predict, compare_approaches, feature_importance_table, feature_matrix, report_table,
    run_benchmark, BenchmarkRow, BenchmarkTable, CompareConfigs, PresetRegistry, SaltStage,
};

/// Exit status for malformed command lines.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for bad data, failed fits and I/O problems.
pub const EXIT_DATA: i32 = 2;

/// A flag combination that parses but makes no sense (e.g. `--gamma` for a tree).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "desalt",
    version,
    about = "Predict porosity, permeability and salt content of rocks after salt ablation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic core-sample dataset.
    GenSynth(GenSynthArgs),
    /// Exhaustive hyperparameter search with repeated random-permutation CV.
    Gridsearch(GridsearchArgs),
    /// Cross-validated R2/MAE/MSE of one model.
    Evaluate(EvaluateArgs),
    /// Leave-one-out predictions for every sample.
    LooPredict(LooArgs),
    /// Predict salts from routine features, then the target from predicted salts.
    ChainPredict(ChainArgs),
    /// Evaluate several models on shared splits.
    Benchmark(BenchmarkArgs),
    /// Compare measured-salt ML, predicted-salt ML and the cubic baseline.
    Compare(CompareArgs),
    /// Split-count feature importance of a tree ensemble.
    Importance(ImportanceArgs),
}

fn parse_target(s: &str) -> Result<Target, String> {
    Target::parse(s).map_err(|e| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    Algorithm::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone)]
struct AlgorithmList(Vec<Algorithm>);

#[derive(Debug, Clone)]
struct TargetList(Vec<Target>);

fn parse_algorithm_list(s: &str) -> Result<AlgorithmList, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(AlgorithmList(Algorithm::ALL.to_vec()));
    }
    s.split(',')
        .map(parse_algorithm)
        .collect::<Result<_, _>>()
        .map(AlgorithmList)
}

fn parse_target_list(s: &str) -> Result<TargetList, String> {
    s.split(',')
        .map(parse_target)
        .collect::<Result<_, _>>()
        .map(TargetList)
}

#[derive(Debug, Clone)]
struct LayerSizes(Vec<usize>);

fn parse_sizes(s: &str) -> Result<LayerSizes, String> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    let sizes: Vec<usize> = inner
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad layer width {t:?}"))
        })
        .collect::<Result<_, _>>()?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err("layer widths must be positive".into());
    }
    Ok(LayerSizes(sizes))
}

fn parse_param(s: &str) -> Result<(String, HyperValue), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let value = HyperValue::parse(v).map_err(|e| e.to_string())?;
    Ok((k.trim().to_string(), value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetSource {
    /// Tuned hyperparameters from the published grid searches.
    #[value(name = "paper")]
    Published,
}

#[derive(Debug, Args)]
struct GenSynthArgs {
    /// Number of samples (default 102, or the config file's value).
    #[arg(long)]
    n: Option<usize>,
    /// Relative target noise (default 0, or the config file's value).
    #[arg(long)]
    noise: Option<f64>,
    /// Random seed (default 42, or the config file's value).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// TOML file overriding generator settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long = "test-fraction", default_value_t = 0.35)]
    test_fraction: f64,
}

/// Individual hyperparameter flags; each one overrides the preset value.
#[derive(Debug, Args, Default)]
struct HyperArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "max-depth")]
    max_depth: Option<usize>,
    #[arg(long = "min-samples-leaf")]
    min_samples_leaf: Option<usize>,
    #[arg(long = "n-estimators")]
    n_estimators: Option<usize>,
    #[arg(long = "learning-rate")]
    learning_rate: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long = "max-features")]
    max_features: Option<f64>,
    #[arg(long = "reg-lambda")]
    reg_lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Hidden layer widths, e.g. `2,4`.
    #[arg(long, value_parser = parse_sizes)]
    hidden: Option<LayerSizes>,
    #[arg(long = "max-epochs")]
    max_epochs: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    /// Any hyperparameter as `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, HyperValue)>,
}

impl HyperArgs {
    fn to_map(&self) -> Hyperparameters {
        let mut h = Hyperparameters::new();
        let mut num = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                h.insert(name.to_string(), HyperValue::Num(v));
            }
        };
        num("lambda", self.lambda);
        num("max_depth", self.max_depth.map(|v| v as f64));
        num("min_samples_leaf", self.min_samples_leaf.map(|v| v as f64));
        num("n_estimators", self.n_estimators.map(|v| v as f64));
        num("learning_rate", self.learning_rate);
        num("subsample", self.subsample);
        num("max_features", self.max_features);
        num("reg_lambda", self.reg_lambda);
        num("gamma", self.gamma);
        num("c", self.c);
        num("epsilon", self.epsilon);
        num("max_epochs", self.max_epochs.map(|v| v as f64));
        num("batch_size", self.batch_size.map(|v| v as f64));
        num("l2", self.l2);
        if let Some(sizes) = &self.hidden {
            h.insert("hidden".into(), HyperValue::Sizes(sizes.0.clone()));
        }
        for (k, v) in &self.params {
            h.insert(k.clone(), v.clone());
        }
        h
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, value_parser = parse_target)]
    target: Target,
    #[arg(long, value_parser = parse_algorithm)]
    model: Algorithm,
    /// Start from the published tuned hyperparameters.
    #[arg(long, value_enum)]
    preset: Option<PresetSource>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Disable feature standardization.
    #[arg(long = "no-normalize")]
    no_normalize: bool,
}

impl ModelArgs {
    fn config(&self, seed: u64) -> anyhow::Result<ModelConfig> {
        let usage = |e: desalt_core::Error| UsageError(e.to_string());
        let mut cfg = match self.preset {
            Some(PresetSource::Published) => PresetRegistry::published()
                .config(self.target, self.model, seed)
                .map_err(usage)?,
            None => ModelConfig::new(self.model).with_seed(seed),
        };
        cfg = cfg.with_hyperparameters(&self.hyper.to_map());
        if self.no_normalize {
            cfg.normalize_features = false;
        }
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct GridsearchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_target)]
    target: Target,
    #[arg(long, value_parser = parse_algorithm)]
    model: Algorithm,
    /// Grid file: one `name = v1, v2, ...` per line.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[command(flatten)]
    split: SplitArgs,
    /// Selection criterion: r2, mae or mse.
    #[arg(long, default_value = "r2")]
    metric: String,
    /// CSV with the report of every grid point.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[command(flatten)]
    split: SplitArgs,
    /// CSV copy of the report row.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LooArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ChainArgs {
    /// Training data with measured salts and targets.
    #[arg(long)]
    train: PathBuf,
    /// Samples to predict; only routine measurements are needed.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_target)]
    target: Target,
    #[arg(long = "salt-model", value_parser = parse_algorithm)]
    salt_model: Algorithm,
    #[arg(long = "target-model", value_parser = parse_algorithm)]
    target_model: Algorithm,
    /// Use the published tuned hyperparameters for both stages.
    #[arg(long, value_enum)]
    preset: Option<PresetSource>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_target)]
    target: Target,
    /// Comma-separated model names, or `all`.
    #[arg(long, default_value = "all", value_parser = parse_algorithm_list)]
    models: AlgorithmList,
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[command(flatten)]
    split: SplitArgs,
    /// Use algorithm defaults instead of the published presets.
    #[arg(long = "no-presets")]
    no_presets: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(
        long,
        default_value = "porosity_after,permeability_after",
        value_parser = parse_target_list
    )]
    targets: TargetList,
    /// Algorithm for both stages; presets are used where they exist.
    #[arg(long, default_value = "mlp", value_parser = parse_algorithm)]
    model: Algorithm,
    /// Overrides the salt-stage algorithm.
    #[arg(long = "salt-model", value_parser = parse_algorithm)]
    salt_model: Option<Algorithm>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// CSV of per-sample leave-one-out predictions of every approach.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ImportanceArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_target)]
    target: Target,
    /// Tree ensemble to inspect; presets are used where they exist.
    #[arg(long, default_value = "gbm_regularized", value_parser = parse_algorithm)]
    model: Algorithm,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn read_dataset(path: &Path) -> anyhow::Result<Dataset> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    parse_csv(BufReader::new(file))
        .with_context(|| format!("cannot read dataset {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn gen_synth(a: &GenSynthArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            SynthConfig::from_toml_str(&text)?
        }
        None => SynthConfig::default(),
    };
    if let Some(n) = a.n {
        cfg.n_samples = n;
    }
    if let Some(noise) = a.noise {
        cfg.noise_rel = noise;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let params = PhysicsParams::new(cfg.salt_density)?;
    let ds = generate_synthetic(&cfg, &params)?;
    let mut buf = Vec::new();
    write_csv(&ds, &mut buf)?;
    fs::write(&a.out, buf).with_context(|| format!("cannot write {}", a.out.display()))?;
    writeln!(out, "wrote {} samples to {}", ds.len(), a.out.display())?;
    Ok(())
}

fn gridsearch(a: &GridsearchArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let ds = read_dataset(&a.data)?;
    let fm = feature_matrix(&ds, a.target)?;
    let grid_file =
        File::open(&a.grid).with_context(|| format!("cannot open {}", a.grid.display()))?;
    let axes = parse_grid(BufReader::new(grid_file))
        .with_context(|| format!("cannot read grid {}", a.grid.display()))?;
    let mut spec = GridSpec::new(
        axes,
        SplitPlan::shuffle(a.split.test_fraction, a.repeats, a.split.seed),
    );
    spec.metric = SelectionMetric::parse(&a.metric).map_err(|e| UsageError(e.to_string()))?;
    let template = ModelConfig::new(a.model).with_seed(a.split.seed);
    for point in spec.points().map_err(|e| UsageError(e.to_string()))? {
        template
            .clone()
            .with_hyperparameters(&point)
            .validate()
            .map_err(|e| UsageError(e.to_string()))?;
    }
    let result = grid_search(&spec, &template, &fm)?;
    let rows = result
        .points
        .iter()
        .map(|(p, r)| {
            let config = template.clone().with_hyperparameters(p);
            BenchmarkRow {
                label: config.label(),
                config,
                result: r.clone(),
            }
        })
        .collect();
    let table = BenchmarkTable {
        target_name: fm.target_name.clone(),
        rows,
    };
    write!(out, "{}", table.to_text())?;
    let best = template.clone().with_hyperparameters(&result.best);
    writeln!(out, "best: {}", best.label())?;
    if let Some(path) = &a.out {
        write_file(path, &table.to_csv())?;
    }
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let ds = read_dataset(&a.data)?;
    let fm = feature_matrix(&ds, a.model.target)?;
    let cfg = a.model.config(a.split.seed)?;
    let plan = SplitPlan::shuffle(a.split.test_fraction, a.repeats, a.split.seed);
    let report = evaluate(&cfg, &fm, &plan)?;
    let table = report_table(&cfg.label(), &cfg, &fm.target_name, &report);
    write!(out, "{}", table.to_text())?;
    if let Some(path) = &a.out {
        write_file(path, &table.to_csv())?;
    }
    Ok(())
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn loo_cmd(a: &LooArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let ds = read_dataset(&a.data)?;
    let fm = feature_matrix(&ds, a.model.target)?;
    let cfg = a.model.config(a.seed)?;
    let pred = loo_predictions(&cfg, &fm)?;
    let actual = fm.targets()?;
    let mut csv = String::from("sample_id,actual,predicted\n");
    for ((s, y), p) in ds.samples.iter().zip(actual).zip(&pred) {
        csv.push_str(&format!("{},{y},{p}\n", csv_cell(&s.sample_id)));
    }
    write_file(&a.out, &csv)?;
    let m = desalt_core::metrics::score(actual.as_slice().expect("contiguous"), &pred)?;
    writeln!(
        out,
        "{} leave-one-out on {}: R2 {:.3}  MAE {}  MSE {}",
        cfg.label(),
        fm.target_name,
        m.r2,
        desalt_core::pipeline::format_sig3(m.mae),
        desalt_core::pipeline::format_sig3(m.mse)
    )?;
    Ok(())
}

fn chain_cmd(a: &ChainArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    let train = read_dataset(&a.train)?;
    let data = read_dataset(&a.data)?;
    let registry = PresetRegistry::published();
    let pick = |target: Target, alg: Algorithm| match a.preset {
        Some(PresetSource::Published) => registry.config(target, alg, a.seed),
        None => Ok(ModelConfig::new(alg).with_seed(a.seed)),
    };
    let salt_cfg =
        pick(Target::SaltConcentration, a.salt_model).map_err(|e| UsageError(e.to_string()))?;
    let target_cfg = pick(a.target, a.target_model).map_err(|e| UsageError(e.to_string()))?;
    let result = chain_predict(
        &train,
        &data,
        a.target,
        SaltStage::Model(&salt_cfg),
        &target_cfg,
    )?;
    let mut csv = format!(
        "sample_id,predicted_salt_concentration,predicted_{}\n",
        a.target.name()
    );
    for ((s, c), t) in data.samples.iter().zip(&result.salt).zip(&result.target) {
        csv.push_str(&format!("{},{c},{t}\n", csv_cell(&s.sample_id)));
    }
    write_file(&a.out, &csv)?;
    if result.floored_salts > 0 {
        writeln!(
            err,
            "warning: {} negative stage-1 salt predictions floored at 0",
            result.floored_salts
        )?;
    }
    writeln!(
        out,
        "wrote {} predictions to {}",
        data.len(),
        a.out.display()
    )?;
    Ok(())
}

fn benchmark_cmd(a: &BenchmarkArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let ds = read_dataset(&a.data)?;
    let fm = feature_matrix(&ds, a.target)?;
    let registry = PresetRegistry::published();
    let configs: Vec<ModelConfig> = a
        .models
        .0
        .iter()
        .map(|&alg| {
            if a.no_presets {
                ModelConfig::new(alg).with_seed(a.split.seed)
            } else {
                registry.config_or_default(a.target, alg, a.split.seed)
            }
        })
        .collect();
    let plan = SplitPlan::shuffle(a.split.test_fraction, a.repeats, a.split.seed);
    let table = run_benchmark(&fm, &configs, &plan)?;
    write!(out, "{}", table.to_text())?;
    write_file(&a.out, &table.to_csv())?;
    Ok(())
}

fn compare_cmd(a: &CompareArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let ds = read_dataset(&a.data)?;
    let registry = PresetRegistry::published();
    let mut configs = CompareConfigs::from_presets(&registry, a.model, &a.targets.0, a.seed);
    if let Some(alg) = a.salt_model {
        configs.salt_model = registry.config_or_default(Target::SaltConcentration, alg, a.seed);
    }
    let report = compare_approaches(&ds, &a.targets.0, &configs)?;
    write!(out, "{}", report.to_text())?;
    write_file(&a.out, &report.to_csv())?;
    if let Some(path) = &a.predictions {
        write_file(path, &report.predictions_csv())?;
    }
    Ok(())
}

fn importance_cmd(a: &ImportanceArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if !a.model.is_tree_ensemble() && a.model != Algorithm::Tree {
        return Err(UsageError(format!(
            "importance needs a tree model (tree, forest, gbm, gbm_regularized), got {}",
            a.model.name()
        ))
        .into());
    }
    let ds = read_dataset(&a.data)?;
    let fm = feature_matrix(&ds, a.target)?;
    let cfg = PresetRegistry::published().config_or_default(a.target, a.model, a.seed);
    let table = feature_importance_table(&fm, &cfg)?;
    let mut csv = String::from("feature,fscore,rank\n");
    for (name, score, rank) in &table {
        csv.push_str(&format!("{},{score},{rank}\n", csv_cell(name)));
    }
    write_file(&a.out, &csv)?;
    for (name, score, rank) in table.iter().take(5) {
        writeln!(out, "{rank:>2}  {name:<28} {score}")?;
    }
    Ok(())
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.command {
        Command::GenSynth(a) => gen_synth(a, out),
        Command::Gridsearch(a) => gridsearch(a, out),
        Command::Evaluate(a) => evaluate_cmd(a, out),
        Command::LooPredict(a) => loo_cmd(a, out),
        Command::ChainPredict(a) => chain_cmd(a, out, err),
        Command::Benchmark(a) => benchmark_cmd(a, out),
        Command::Compare(a) => compare_cmd(a, out),
        Command::Importance(a) => importance_cmd(a, out),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) if e.is::<UsageError>() => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_DATA
        }
    }
}

/// Runs against the process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
