//! End-to-end workflows: tuned presets, two-stage salt-then-target prediction,
//! benchmark tables and the three-way approach comparison.

use std::fmt::Write as _;

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::dataset::{encode_features, Dataset, FeatureMatrix, Target};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricTriple};
use crate::model::{fit_model, Algorithm, HyperValue, Hyperparameters, ModelConfig};
use crate::model_selection::{evaluate, loo_predictions_for, CvReport, SplitPlan};
use crate::physics::{fit_cubic_baseline, predict_cubic, CubicTarget};

/// Tuned hyperparameters per (target, algorithm).
#[derive(Debug, Clone, PartialEq)]
pub struct PresetRegistry {
    entries: Vec<(Target, Algorithm, Hyperparameters)>,
}

fn hp(pairs: &[(&str, HyperValue)]) -> Hyperparameters {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn n(v: f64) -> HyperValue {
    HyperValue::Num(v)
}

impl PresetRegistry {
    /// The published optimum of every algorithm for every target.
    pub fn published() -> Self {
        use Algorithm::*;
        use Target::*;
        let sizes = |v: &[usize]| HyperValue::Sizes(v.to_vec());
        let entries = vec![
            (PorosityAfter, Lasso, hp(&[("lambda", n(0.001))])),
            (PorosityAfter, Tree, hp(&[("max_depth", n(7.0))])),
            (
                PorosityAfter,
                Forest,
                hp(&[("n_estimators", n(150.0)), ("max_depth", n(8.0))]),
            ),
            (
                PorosityAfter,
                GbmRegularized,
                hp(&[
                    ("n_estimators", n(16000.0)),
                    ("max_depth", n(2.0)),
                    ("subsample", n(0.7)),
                    ("max_features", n(0.9)),
                    ("reg_lambda", n(0.001)),
                ]),
            ),
            (
                PorosityAfter,
                Svr,
                hp(&[("gamma", n(1e-4)), ("c", n(40000.0))]),
            ),
            (PorosityAfter, Mlp, hp(&[("hidden", sizes(&[2, 4]))])),
            (PermeabilityAfter, Lasso, hp(&[("lambda", n(10.0))])),
            (PermeabilityAfter, Tree, hp(&[("max_depth", n(10.0))])),
            (
                PermeabilityAfter,
                Forest,
                hp(&[("n_estimators", n(25.0)), ("max_depth", n(8.0))]),
            ),
            (
                PermeabilityAfter,
                GbmRegularized,
                hp(&[
                    ("n_estimators", n(300.0)),
                    ("max_depth", n(2.0)),
                    ("subsample", n(0.8)),
                    ("max_features", n(0.9)),
                    ("reg_lambda", n(0.1)),
                ]),
            ),
            (
                PermeabilityAfter,
                Svr,
                hp(&[("gamma", n(1e-4)), ("c", n(50000.0))]),
            ),
            (PermeabilityAfter, Mlp, hp(&[("hidden", sizes(&[77, 102]))])),
            (SaltConcentration, Lasso, hp(&[("lambda", n(1.0))])),
            (SaltConcentration, Tree, hp(&[("max_depth", n(9.0))])),
            (
                SaltConcentration,
                Forest,
                hp(&[("n_estimators", n(10.0)), ("max_depth", n(1.0))]),
            ),
            (
                SaltConcentration,
                GbmRegularized,
                hp(&[
                    ("n_estimators", n(300.0)),
                    ("max_depth", n(10.0)),
                    ("subsample", n(0.95)),
                    ("max_features", n(0.5)),
                    ("reg_lambda", n(1e-5)),
                ]),
            ),
            (
                SaltConcentration,
                Svr,
                hp(&[("gamma", n(0.1)), ("c", n(25.0))]),
            ),
            (
                SaltConcentration,
                Mlp,
                hp(&[("hidden", sizes(&[55, 10, 86]))]),
            ),
        ];
        Self { entries }
    }

    pub fn get(&self, target: Target, algorithm: Algorithm) -> Option<&Hyperparameters> {
        self.entries
            .iter()
            .find(|(t, a, _)| *t == target && *a == algorithm)
            .map(|(_, _, h)| h)
    }

    pub fn entries(&self) -> impl Iterator<Item = (Target, Algorithm, &Hyperparameters)> {
        self.entries.iter().map(|(t, a, h)| (*t, *a, h))
    }

    /// A ready-to-fit configuration carrying the preset.
    pub fn config(&self, target: Target, algorithm: Algorithm, seed: u64) -> Result<ModelConfig> {
        let h = self.get(target, algorithm).ok_or_else(|| {
            let known: Vec<&str> = self
                .entries
                .iter()
                .filter(|(t, _, _)| *t == target)
                .map(|(_, a, _)| a.name())
                .collect();
            Error::invalid(format!(
                "no preset for {algorithm} on {}; presets exist for {}",
                target.name(),
                known.join(", ")
            ))
        })?;
        Ok(ModelConfig::new(algorithm)
            .with_seed(seed)
            .with_hyperparameters(h))
    }

    /// Preset when one exists, the algorithm defaults otherwise.
    pub fn config_or_default(
        &self,
        target: Target,
        algorithm: Algorithm,
        seed: u64,
    ) -> ModelConfig {
        self.config(target, algorithm, seed)
            .unwrap_or_else(|_| ModelConfig::new(algorithm).with_seed(seed))
    }
}

/// True for boosting configurations that rely on the default learning rate.
pub fn uses_assumed_learning_rate(config: &ModelConfig) -> bool {
    matches!(config.algorithm, Algorithm::Gbm | Algorithm::GbmRegularized)
        && !config.hyperparameters.contains_key("learning_rate")
}

pub const ASSUMED_LR_NOTE: &str =
    "assumed-lr: learning rate 0.01 assumed; the tuned boosting presets do not report one";

/// Encodes `ds` for predicting `target`: salt is a feature unless it is the target.
pub fn feature_matrix(ds: &Dataset, target: Target) -> Result<FeatureMatrix> {
    encode_features(ds, target.uses_salt_feature())?.with_target(ds, target)
}

/// Where stage 1 gets its salt concentrations.
#[derive(Debug, Clone, Copy)]
pub enum SaltStage<'a> {
    Model(&'a ModelConfig),
    /// Supplied values, used verbatim (no flooring).
    Oracle(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub salt: Vec<f64>,
    pub target: Vec<f64>,
    /// Stage-1 predictions below zero that were raised to zero.
    pub floored_salts: usize,
}

fn floor_salts(values: &mut [f64]) -> usize {
    let mut count = 0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
            count += 1;
        }
    }
    count
}

fn check_chain_target(target: Target) -> Result<()> {
    if !target.uses_salt_feature() {
        return Err(Error::invalid(
            "chained prediction targets porosity_after or permeability_after",
        ));
    }
    Ok(())
}

/// Copy of `rows` (17-column encoding) with column 0 replaced by `salt`.
fn inject_salt(rows: ArrayView2<f64>, salt: &[f64]) -> Array2<f64> {
    let mut out = rows.to_owned();
    out.column_mut(0).assign(&ArrayView1::from(salt));
    out
}

/// Salt-free encoding of `ds` plus the 17-column encoding with a zero salt column.
fn chain_inputs(ds: &Dataset) -> Result<(FeatureMatrix, Array2<f64>)> {
    let no_salt = encode_features(ds, false)?;
    let mut with_salt = Array2::<f64>::zeros((ds.len(), no_salt.rows.ncols() + 1));
    with_salt.slice_mut(s![.., 1..]).assign(&no_salt.rows);
    Ok((no_salt, with_salt))
}

/// Prediction mode: both stages are trained on `train` (which has measured
/// salts and targets) and applied to `data` (which needs only routine features).
pub fn chain_predict(
    train: &Dataset,
    data: &Dataset,
    target: Target,
    salt_stage: SaltStage<'_>,
    target_model: &ModelConfig,
) -> Result<ChainOutput> {
    check_chain_target(target)?;
    let (data_plain, data_with_zero_salt) =
        chain_inputs(data).map_err(|e| e.context("stage 1 (salt concentration): encoding"))?;
    let (salt, floored_salts) = match salt_stage {
        SaltStage::Oracle(values) => {
            if values.len() != data.len() {
                return Err(Error::LengthMismatch {
                    left: values.len(),
                    right: data.len(),
                }
                .context("stage 1 (salt concentration)"));
            }
            (values.to_vec(), 0)
        }
        SaltStage::Model(cfg) => {
            let stage1 = || -> Result<Vec<f64>> {
                let fm = feature_matrix(train, Target::SaltConcentration)?;
                let model = fit_model(cfg, fm.rows.view(), fm.targets()?.view())?;
                Ok(model.predict(data_plain.rows.view())?.to_vec())
            };
            let mut salt = stage1().map_err(|e| e.context("stage 1 (salt concentration)"))?;
            let floored = floor_salts(&mut salt);
            (salt, floored)
        }
    };
    let stage2 = || -> Result<Vec<f64>> {
        let fm = feature_matrix(train, target)?;
        let model = fit_model(target_model, fm.rows.view(), fm.targets()?.view())?;
        let x = inject_salt(data_with_zero_salt.view(), &salt);
        Ok(model.predict(x.view())?.to_vec())
    };
    let target_pred = stage2().map_err(|e| e.context(format!("stage 2 ({})", target.name())))?;
    Ok(ChainOutput {
        salt,
        target: target_pred,
        floored_salts,
    })
}

/// For every sample `i`, fits `config` on all other rows of `x` and predicts
/// row `i` of each matrix in `eval`.
fn loo_multi_predict(
    config: &ModelConfig,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    eval: &[ArrayView2<f64>],
) -> Result<Vec<Vec<f64>>> {
    let n = x.nrows();
    if n < 3 {
        return Err(Error::invalid(format!(
            "leave-one-out needs at least 3 samples, got {n}"
        )));
    }
    let per_sample: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let train: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let model = fit_model(
                config,
                x.select(Axis(0), &train).view(),
                y.select(Axis(0), &train).view(),
            )
            .map_err(|e| e.context(format!("leave-one-out fit without sample index {i}")))?;
            eval.iter()
                .map(|m| Ok(model.predict(m.slice(s![i..i + 1, ..]))?[0]))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..eval.len())
        .map(|k| per_sample.iter().map(|p| p[k]).collect())
        .collect())
}

/// Evaluation mode: leave-one-out in both stages, so no sample's own salt or
/// target measurement reaches its prediction.
pub fn chain_loo(
    ds: &Dataset,
    target: Target,
    salt_stage: SaltStage<'_>,
    target_model: &ModelConfig,
) -> Result<ChainOutput> {
    check_chain_target(target)?;
    let (salt, floored_salts) = stage1_loo(ds, salt_stage)?;
    let fm = feature_matrix(ds, target)
        .map_err(|e| e.context(format!("stage 2 ({})", target.name())))?;
    let x_pred = inject_salt(fm.rows.view(), &salt);
    let out = loo_multi_predict(
        target_model,
        fm.rows.view(),
        fm.targets()?.view(),
        &[x_pred.view()],
    )
    .map_err(|e| e.context(format!("stage 2 ({})", target.name())))?;
    Ok(ChainOutput {
        salt,
        target: out.into_iter().next().expect("one evaluation matrix"),
        floored_salts,
    })
}

fn stage1_loo(ds: &Dataset, salt_stage: SaltStage<'_>) -> Result<(Vec<f64>, usize)> {
    match salt_stage {
        SaltStage::Oracle(values) => {
            if values.len() != ds.len() {
                return Err(Error::LengthMismatch {
                    left: values.len(),
                    right: ds.len(),
                }
                .context("stage 1 (salt concentration)"));
            }
            Ok((values.to_vec(), 0))
        }
        SaltStage::Model(cfg) => {
            let run = || -> Result<Vec<f64>> {
                let fm = feature_matrix(ds, Target::SaltConcentration)?;
                loo_predictions_for(cfg, fm.rows.view(), fm.targets()?.view())
            };
            let mut salt = run().map_err(|e| e.context("stage 1 (salt concentration)"))?;
            let floored = floor_salts(&mut salt);
            Ok((salt, floored))
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub label: String,
    pub config: ModelConfig,
    pub result: std::result::Result<CvReport, String>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkTable {
    pub target_name: String,
    pub rows: Vec<BenchmarkRow>,
}

/// Evaluates every configuration on the same split sequence.
pub fn run_benchmark(
    fm: &FeatureMatrix,
    configs: &[ModelConfig],
    plan: &SplitPlan,
) -> Result<BenchmarkTable> {
    fm.targets()?;
    let rows = configs
        .iter()
        .map(|c| BenchmarkRow {
            label: c.algorithm.name().to_string(),
            config: c.clone(),
            result: evaluate(c, fm, plan).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(BenchmarkTable {
        target_name: fm.target_name.clone(),
        rows,
    })
}

/// `v` rounded to three significant figures.
pub fn format_sig3(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-4..9).contains(&exp) {
        return format!("{v:.2e}");
    }
    let scale = 10f64.powi(exp - 2);
    let rounded = (v / scale).round() * scale;
    // Rounding can carry into the next decade (9.996 -> 10.0).
    let exp = rounded.abs().log10().floor() as i32;
    let decimals = (2 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

pub fn format_r2(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

/// Left-aligns the first `left` columns and right-aligns the rest.
fn aligned(header: &[&str], rows: &[Vec<String>], left: usize) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i < left {
                    format!("{c:<w$}", w = widths[i])
                } else {
                    format!("{c:>w$}", w = widths[i])
                }
            })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(rule.iter().map(String::as_str).collect());
    for r in rows {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl BenchmarkTable {
    pub fn to_text(&self) -> String {
        let header = ["#", "Model", "R2", "σR2", "MAE", "σMAE", "MSE", "σMSE"];
        let mut footnote = false;
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut label = r.label.clone();
                if uses_assumed_learning_rate(&r.config) {
                    label.push_str(" [assumed-lr]");
                    footnote = true;
                }
                match &r.result {
                    Ok(rep) => vec![
                        (i + 1).to_string(),
                        label,
                        format_r2(rep.r2),
                        format_r2(rep.sigma_r2),
                        format_sig3(rep.mae),
                        format_sig3(rep.sigma_mae),
                        format_sig3(rep.mse),
                        format_sig3(rep.sigma_mse),
                    ],
                    Err(_) => {
                        let mut v = vec![(i + 1).to_string(), label];
                        v.extend(std::iter::repeat_n("failed".to_string(), 6));
                        v
                    }
                }
            })
            .collect();
        let mut out = format!("Target: {}\n", self.target_name);
        out.push_str(&aligned(&header, &rows, 2));
        for (i, r) in self.rows.iter().enumerate() {
            match &r.result {
                Err(e) => {
                    let _ = writeln!(out, "row {} ({}) failed: {e}", i + 1, r.label);
                }
                Ok(rep) if rep.excluded_r2_folds > 0 => {
                    let _ = writeln!(
                        out,
                        "row {} ({}): r2 undefined in {} of {} folds (constant test targets), excluded",
                        i + 1,
                        r.label,
                        rep.excluded_r2_folds,
                        rep.fold_scores.len()
                    );
                }
                Ok(_) => {}
            }
        }
        if footnote {
            let _ = writeln!(out, "{ASSUMED_LR_NOTE}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model,hyperparameters,r2,sigma_r2,mae,sigma_mae,mse,sigma_mse,folds,excluded_r2_folds,note\n",
        );
        for r in &self.rows {
            let note = match &r.result {
                Err(e) => format!("failed: {e}"),
                Ok(_) if uses_assumed_learning_rate(&r.config) => "assumed-lr".to_string(),
                Ok(_) => String::new(),
            };
            let hyper = crate::model::format_hyperparameters(&r.config.hyperparameters);
            let cells = match &r.result {
                Ok(rep) => vec![
                    opt(rep.r2),
                    opt(rep.sigma_r2),
                    rep.mae.to_string(),
                    rep.sigma_mae.to_string(),
                    rep.mse.to_string(),
                    rep.sigma_mse.to_string(),
                    rep.fold_scores.len().to_string(),
                    rep.excluded_r2_folds.to_string(),
                ],
                Err(_) => vec![String::new(); 8],
            };
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_field(&r.label),
                csv_field(&hyper),
                cells.join(","),
                csv_field(&note)
            );
        }
        out
    }
}

/// Formats a single evaluation as a one-row table.
pub fn report_table(
    label: &str,
    config: &ModelConfig,
    target_name: &str,
    report: &CvReport,
) -> BenchmarkTable {
    BenchmarkTable {
        target_name: target_name.to_string(),
        rows: vec![BenchmarkRow {
            label: label.to_string(),
            config: config.clone(),
            result: Ok(report.clone()),
        }],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    MlSaltKnown,
    MlSaltPredicted,
    OneFeatureCubic,
}

impl Approach {
    pub const ALL: [Approach; 3] = [
        Approach::MlSaltKnown,
        Approach::MlSaltPredicted,
        Approach::OneFeatureCubic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Approach::MlSaltKnown => "ml_salt_known",
            Approach::MlSaltPredicted => "ml_salt_predicted",
            Approach::OneFeatureCubic => "one_feature_cubic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry {
    pub approach: Approach,
    pub target: Target,
    pub metrics: MetricTriple<f64>,
    /// Leave-one-out predictions in dataset order.
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub sample_ids: Vec<String>,
    pub actual: Vec<(Target, Vec<f64>)>,
    pub entries: Vec<ComparisonEntry>,
    /// Leave-one-out salt predictions shared by every target.
    pub predicted_salt: Vec<f64>,
    pub floored_salts: usize,
}

/// Models used by `compare_approaches`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfigs {
    pub salt_model: ModelConfig,
    pub target_models: Vec<(Target, ModelConfig)>,
}

impl CompareConfigs {
    /// The same algorithm for every stage, with presets where they exist.
    pub fn from_presets(
        registry: &PresetRegistry,
        algorithm: Algorithm,
        targets: &[Target],
        seed: u64,
    ) -> Self {
        Self {
            salt_model: registry.config_or_default(Target::SaltConcentration, algorithm, seed),
            target_models: targets
                .iter()
                .map(|&t| (t, registry.config_or_default(t, algorithm, seed)))
                .collect(),
        }
    }

    pub fn model_for(&self, target: Target) -> Result<&ModelConfig> {
        self.target_models
            .iter()
            .find(|(t, _)| *t == target)
            .map(|(_, c)| c)
            .ok_or_else(|| Error::invalid(format!("no model configured for {}", target.name())))
    }
}

/// Leave-one-out comparison of measured-salt ML, chained predicted-salt ML and
/// the cubic one-feature baseline, all on the same sample order.
pub fn compare_approaches(
    ds: &Dataset,
    targets: &[Target],
    configs: &CompareConfigs,
) -> Result<ComparisonReport> {
    if targets.is_empty() {
        return Err(Error::invalid("no targets to compare"));
    }
    for &t in targets {
        check_chain_target(t)?;
    }
    let (predicted_salt, floored_salts) = stage1_loo(ds, SaltStage::Model(&configs.salt_model))?;
    let measured_salt = ds.target_values(Target::SaltConcentration)?;
    let mut entries = Vec::new();
    let mut actual = Vec::new();
    for &target in targets {
        let fm = feature_matrix(ds, target)?;
        let y = fm.targets()?.to_vec();
        let x_pred = inject_salt(fm.rows.view(), &predicted_salt);
        let mut both = loo_multi_predict(
            configs.model_for(target)?,
            fm.rows.view(),
            fm.targets()?.view(),
            &[fm.rows.view(), x_pred.view()],
        )
        .map_err(|e| e.context(format!("comparison for {}", target.name())))?;
        let chained = both.pop().expect("two evaluation matrices");
        let known = both.pop().expect("two evaluation matrices");
        let cubic = cubic_loo(ds, target, &measured_salt)?;
        for (approach, predictions) in [
            (Approach::MlSaltKnown, known),
            (Approach::MlSaltPredicted, chained),
            (Approach::OneFeatureCubic, cubic),
        ] {
            entries.push(ComparisonEntry {
                approach,
                target,
                metrics: metrics::score(&y, &predictions)?,
                predictions,
            });
        }
        actual.push((target, y));
    }
    Ok(ComparisonReport {
        sample_ids: ds.samples.iter().map(|s| s.sample_id.clone()).collect(),
        actual,
        entries,
        predicted_salt,
        floored_salts,
    })
}

/// Leave-one-out cubic baseline: `initial + Δ(C)` with Δ fitted on the other samples.
pub fn cubic_loo(ds: &Dataset, target: Target, salt: &[f64]) -> Result<Vec<f64>> {
    let kind = match target {
        Target::PorosityAfter => CubicTarget::PorosityDelta,
        Target::PermeabilityAfter => CubicTarget::PermeabilityDelta,
        Target::SaltConcentration => return Err(Error::invalid("no cubic baseline for salt")),
    };
    let after = ds.target_values(target)?;
    let initial: Vec<f64> = ds
        .samples
        .iter()
        .map(|s| {
            target
                .initial_value(s)
                .expect("porosity and permeability have initial values")
        })
        .collect();
    let delta: Vec<f64> = after.iter().zip(&initial).map(|(a, b)| a - b).collect();
    let n = ds.len();
    (0..n)
        .map(|i| {
            let keep = |v: &[f64]| -> Vec<f64> {
                v.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &x)| x)
                    .collect()
            };
            let b = fit_cubic_baseline(&keep(salt), &keep(&delta), kind)
                .map_err(|e| e.context(format!("cubic fit without sample index {i}")))?;
            Ok(predict_cubic(&b, &salt[i..=i], &initial[i..=i])?[0])
        })
        .collect()
}

impl ComparisonReport {
    pub fn entry(&self, approach: Approach, target: Target) -> Option<&ComparisonEntry> {
        self.entries
            .iter()
            .find(|e| e.approach == approach && e.target == target)
    }

    pub fn to_text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .entries
            .iter()
            .map(|e| {
                vec![
                    e.target.name().to_string(),
                    e.approach.name().to_string(),
                    format!("{:.3}", e.metrics.r2),
                    format_sig3(e.metrics.mae),
                    format_sig3(e.metrics.mse),
                ]
            })
            .collect();
        let mut out = aligned(&["Target", "Approach", "R2", "MAE", "MSE"], &rows, 2);
        if self.floored_salts > 0 {
            let _ = writeln!(
                out,
                "warning: {} negative stage-1 salt predictions floored at 0",
                self.floored_salts
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,approach,r2,mae,mse\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.target.name(),
                e.approach.name(),
                e.metrics.r2,
                e.metrics.mae,
                e.metrics.mse
            );
        }
        out
    }

    /// Per-sample actual and predicted values (the data behind actual-vs-predicted plots).
    pub fn predictions_csv(&self) -> String {
        let mut header = vec!["sample_id".to_string(), "predicted_salt".to_string()];
        for (t, _) in &self.actual {
            header.push(format!("{}_actual", t.name()));
            for a in Approach::ALL {
                header.push(format!("{}_{}", t.name(), a.name()));
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        for (i, id) in self.sample_ids.iter().enumerate() {
            let mut cells = vec![csv_field(id), self.predicted_salt[i].to_string()];
            for (t, y) in &self.actual {
                cells.push(y[i].to_string());
                for a in Approach::ALL {
                    let e = self.entry(a, *t).expect("every approach evaluated");
                    cells.push(e.predictions[i].to_string());
                }
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Split-count importance of a tree ensemble trained on all rows, with feature names.
pub fn feature_importance_table(
    fm: &FeatureMatrix,
    config: &ModelConfig,
) -> Result<Vec<(String, usize, usize)>> {
    if !config.algorithm.is_tree_ensemble() && config.algorithm != Algorithm::Tree {
        return Err(Error::invalid(format!(
            "feature importance needs a tree model, got {}",
            config.algorithm
        )));
    }
    let model = fit_model(config, fm.rows.view(), fm.targets()?.view())?;
    let imp = model
        .feature_importance()
        .expect("tree models expose split counts");
    let ranks = imp.ranks();
    Ok(imp
        .ranking
        .iter()
        .map(|&f| (fm.schema.column_names[f].clone(), imp.counts[f], ranks[f]))
        .collect())
}
