//! Repeated random-permutation and k-fold cross-validation, exhaustive grid
//! search and leave-one-out prediction.

use std::io::BufRead;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{FeatureMatrix, Scaler};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{fit_model, HyperValue, Hyperparameters, ModelConfig, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitKind {
    Shuffle { test_fraction: f64, repeats: usize },
    KFold { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub seed: u64,
}

impl SplitPlan {
    pub fn shuffle(test_fraction: f64, repeats: usize, seed: u64) -> Self {
        Self {
            kind: SplitKind::Shuffle {
                test_fraction,
                repeats,
            },
            seed,
        }
    }

    pub fn kfold(k: usize, seed: u64) -> Self {
        Self {
            kind: SplitKind::KFold { k },
            seed,
        }
    }

    /// Ten repeats holding out 35%: the grid-search protocol.
    pub fn grid_default(seed: u64) -> Self {
        Self::shuffle(0.35, 10, seed)
    }

    /// One hundred repeats holding out 35%: the final evaluation protocol.
    pub fn evaluation_default(seed: u64) -> Self {
        Self::shuffle(0.35, 100, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random stream for repeat `index` of a plan seeded with `seed`.
fn repeat_stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Test-set size of a shuffle split: `⌊fraction·n⌋` with a guard against
/// representation error in the product.
pub fn shuffle_test_size(test_fraction: f64, n: usize) -> usize {
    let raw = test_fraction * n as f64;
    let nearest = raw.round();
    if (raw - nearest).abs() <= 1e-9 * raw.abs().max(1.0) {
        nearest as usize
    } else {
        raw.floor() as usize
    }
}

pub fn make_splits(n: usize, plan: &SplitPlan) -> Result<Vec<Split>> {
    if n < 3 {
        return Err(Error::invalid(format!(
            "cross-validation needs at least 3 samples, got {n}"
        )));
    }
    match plan.kind {
        SplitKind::Shuffle {
            test_fraction,
            repeats,
        } => {
            if !(test_fraction > 0.0 && test_fraction < 1.0) {
                return Err(Error::invalid(format!(
                    "test fraction must lie in (0, 1), got {test_fraction}"
                )));
            }
            if repeats < 1 {
                return Err(Error::invalid("repeats must be at least 1"));
            }
            let t = shuffle_test_size(test_fraction, n);
            if t < 1 || t >= n {
                return Err(Error::invalid(format!(
                    "test fraction {test_fraction} gives {t} test rows out of {n}"
                )));
            }
            Ok((0..repeats)
                .map(|r| {
                    let mut perm: Vec<usize> = (0..n).collect();
                    perm.shuffle(&mut repeat_stream(plan.seed, r));
                    let mut test = perm[..t].to_vec();
                    let mut train = perm[t..].to_vec();
                    test.sort_unstable();
                    train.sort_unstable();
                    Split { train, test }
                })
                .collect())
        }
        SplitKind::KFold { k } => {
            if k < 2 || k > n {
                return Err(Error::invalid(format!(
                    "k-fold needs 2 <= k <= n, got k={k}, n={n}"
                )));
            }
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut repeat_stream(plan.seed, 0));
            let (base, extra) = (n / k, n % k);
            let mut start = 0;
            Ok((0..k)
                .map(|f| {
                    let size = base + usize::from(f < extra);
                    let mut test = perm[start..start + size].to_vec();
                    start += size;
                    test.sort_unstable();
                    let mut in_test = vec![false; n];
                    for &i in &test {
                        in_test[i] = true;
                    }
                    let train = (0..n).filter(|&i| !in_test[i]).collect();
                    Split { train, test }
                })
                .collect())
        }
    }
}

/// Metrics of one fold; `r2` is `None` when the fold's test targets are constant
/// (or the fold holds a single row).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldScore {
    pub r2: Option<f64>,
    pub mae: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub r2: Option<f64>,
    pub sigma_r2: Option<f64>,
    pub mae: f64,
    pub sigma_mae: f64,
    pub mse: f64,
    pub sigma_mse: f64,
    pub fold_scores: Vec<FoldScore>,
    /// Folds whose r2 was undefined and left out of the r2 aggregate.
    pub excluded_r2_folds: usize,
    /// Out-of-fold prediction for every sample when the plan is k-fold.
    pub out_of_fold: Option<Vec<f64>>,
}

/// Population mean and standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl CvReport {
    pub fn from_folds(fold_scores: Vec<FoldScore>, out_of_fold: Option<Vec<f64>>) -> Result<Self> {
        if fold_scores.is_empty() {
            return Err(Error::invalid("no folds to aggregate"));
        }
        let r2s: Vec<f64> = fold_scores.iter().filter_map(|f| f.r2).collect();
        let maes: Vec<f64> = fold_scores.iter().map(|f| f.mae).collect();
        let mses: Vec<f64> = fold_scores.iter().map(|f| f.mse).collect();
        let (r2, sigma_r2) = if r2s.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_and_std(&r2s);
            (Some(m), Some(s))
        };
        let (mae, sigma_mae) = mean_and_std(&maes);
        let (mse, sigma_mse) = mean_and_std(&mses);
        Ok(Self {
            r2,
            sigma_r2,
            mae,
            sigma_mae,
            mse,
            sigma_mse,
            excluded_r2_folds: fold_scores.len() - r2s.len(),
            fold_scores,
            out_of_fold,
        })
    }

    /// Metrics of the pooled out-of-fold predictions (k-fold plans only).
    pub fn pooled(&self, actual: &[f64]) -> Option<Result<metrics::MetricTriple<f64>>> {
        self.out_of_fold.as_ref().map(|p| metrics::score(actual, p))
    }
}

/// What `evaluate` saw in one fold; lets tests audit preprocessing.
#[derive(Debug)]
pub struct FoldTrace<'a> {
    pub fold: usize,
    pub split: &'a Split,
    pub model: &'a TrainedModel,
}

fn rows(x: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

fn values(y: ArrayView1<f64>, idx: &[usize]) -> Array1<f64> {
    y.select(Axis(0), idx)
}

pub fn evaluate(config: &ModelConfig, fm: &FeatureMatrix, plan: &SplitPlan) -> Result<CvReport> {
    evaluate_traced(config, fm, plan, |_| {})
}

/// `evaluate` with a callback that receives every fitted fold model.
pub fn evaluate_traced(
    config: &ModelConfig,
    fm: &FeatureMatrix,
    plan: &SplitPlan,
    on_fold: impl Fn(&FoldTrace<'_>) + Sync,
) -> Result<CvReport> {
    config.validate()?;
    let y = fm.targets()?;
    let x = fm.rows.view();
    let splits = make_splits(fm.n_rows(), plan)?;
    let folds: Vec<Result<(FoldScore, Array1<f64>)>> = splits
        .par_iter()
        .enumerate()
        .map(|(f, split)| {
            let xt = rows(x, &split.train);
            let yt = values(y.view(), &split.train);
            let model = fit_model(config, xt.view(), yt.view())
                .map_err(|e| e.context(format!("fold {f}")))?;
            on_fold(&FoldTrace {
                fold: f,
                split,
                model: &model,
            });
            let pred = model.predict(rows(x, &split.test).view())?;
            let actual = values(y.view(), &split.test);
            let (a, p) = (actual.as_slice().unwrap(), pred.as_slice().unwrap());
            let r2 = match metrics::r2(a, p) {
                Ok(v) => Some(v),
                Err(Error::ConstantTarget) => None,
                Err(Error::InvalidInput(_)) if a.len() < 2 => None,
                Err(e) => return Err(e),
            };
            Ok((
                FoldScore {
                    r2,
                    mae: metrics::mae(a, p)?,
                    mse: metrics::mse(a, p)?,
                },
                pred,
            ))
        })
        .collect();
    let mut scores = Vec::with_capacity(splits.len());
    let mut oof = matches!(plan.kind, SplitKind::KFold { .. }).then(|| vec![0.0; fm.n_rows()]);
    for (split, fold) in splits.iter().zip(folds) {
        let (score, pred) = fold?;
        if let Some(o) = oof.as_mut() {
            for (&i, &p) in split.test.iter().zip(&pred) {
                o[i] = p;
            }
        }
        scores.push(score);
    }
    CvReport::from_folds(scores, oof)
}

/// Model-selection criterion for grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    #[default]
    R2,
    Mae,
    Mse,
}

impl SelectionMetric {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "r2" => Ok(Self::R2),
            "mae" => Ok(Self::Mae),
            "mse" => Ok(Self::Mse),
            other => Err(Error::invalid(format!(
                "unknown selection metric {other:?}; expected r2, mae or mse"
            ))),
        }
    }

    /// Larger is better.
    fn utility(self, r: &CvReport) -> Option<f64> {
        match self {
            Self::R2 => r.r2,
            Self::Mae => Some(-r.mae),
            Self::Mse => Some(-r.mse),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Axes in declaration order; the first axis varies slowest.
    pub axes: Vec<(String, Vec<HyperValue>)>,
    pub plan: SplitPlan,
    pub metric: SelectionMetric,
}

impl GridSpec {
    pub fn new(axes: Vec<(String, Vec<HyperValue>)>, plan: SplitPlan) -> Self {
        Self {
            axes,
            plan,
            metric: SelectionMetric::R2,
        }
    }

    /// Every Cartesian point in lexicographic order.
    pub fn points(&self) -> Result<Vec<Hyperparameters>> {
        for (name, vals) in &self.axes {
            if vals.is_empty() {
                return Err(Error::invalid(format!("grid axis {name:?} has no values")));
            }
        }
        let mut out = vec![Hyperparameters::new()];
        for (name, vals) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(name.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        Ok(out)
    }
}

/// Reads a grid file: one `name = v1, v2, ...` per line, `#` comments, tuples
/// like `(2,4)` for layer widths.
pub fn parse_grid<R: BufRead>(source: R) -> Result<Vec<(String, Vec<HyperValue>)>> {
    let mut axes: Vec<(String, Vec<HyperValue>)> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let row_err = |message: String| Error::Row {
            row: i + 1,
            message,
        };
        let (name, rest) = content
            .split_once('=')
            .ok_or_else(|| row_err(format!("expected `name = values`, got {content:?}")))?;
        let name = name.trim().to_string();
        if name.is_empty() {
            return Err(row_err("empty hyperparameter name".into()));
        }
        if axes.iter().any(|(n, _)| *n == name) {
            return Err(row_err(format!("hyperparameter {name:?} listed twice")));
        }
        let values = split_top_level(rest)
            .into_iter()
            .map(|tok| HyperValue::parse(&tok).map_err(|e| row_err(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(row_err(format!("hyperparameter {name:?} has no values")));
        }
        axes.push((name, values));
    }
    if axes.is_empty() {
        return Err(Error::invalid("grid file declares no hyperparameters"));
    }
    Ok(axes)
}

/// Splits on commas outside parentheses.
fn split_top_level(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur);
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: Hyperparameters,
    pub report: CvReport,
    /// Every point with its report or the reason it failed, in grid order.
    pub points: Vec<(Hyperparameters, std::result::Result<CvReport, String>)>,
}

pub fn grid_search(
    grid: &GridSpec,
    template: &ModelConfig,
    fm: &FeatureMatrix,
) -> Result<GridResult> {
    let points = grid.points()?;
    let results: Vec<Result<CvReport>> = points
        .par_iter()
        .map(|p| evaluate(&template.clone().with_hyperparameters(p), fm, &grid.plan))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.iter().enumerate() {
        if let Some(u) = r.as_ref().ok().and_then(|r| grid.metric.utility(r)) {
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((i, u));
            }
        }
    }
    let recorded: Vec<_> = points
        .iter()
        .cloned()
        .zip(results.iter().map(|r| match r {
            Ok(rep) => Ok(rep.clone()),
            Err(e) => Err(e.to_string()),
        }))
        .collect();
    match best {
        Some((i, _)) => Ok(GridResult {
            best: points[i].clone(),
            report: results[i]
                .as_ref()
                .expect("selected point succeeded")
                .clone(),
            points: recorded,
        }),
        None => {
            let reasons: Vec<String> = recorded
                .iter()
                .map(|(p, r)| {
                    let why = match r {
                        Err(e) => e.clone(),
                        Ok(_) => "metric undefined".to_string(),
                    };
                    format!("[{}] {why}", crate::model::format_hyperparameters(p))
                })
                .collect();
            Err(Error::invalid(format!(
                "every grid point failed: {}",
                reasons.join("; ")
            )))
        }
    }
}

/// Prediction for every sample from a model trained without it.
pub fn loo_predictions(config: &ModelConfig, fm: &FeatureMatrix) -> Result<Vec<f64>> {
    config.validate()?;
    let y = fm.targets()?;
    loo_predictions_for(config, fm.rows.view(), y.view())
}

/// Leave-one-out on raw arrays.
pub fn loo_predictions_for(
    config: &ModelConfig,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<Vec<f64>> {
    let n = x.nrows();
    if n < 3 {
        return Err(Error::invalid(format!(
            "leave-one-out needs at least 3 samples, got {n}"
        )));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let train: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let model = fit_model(config, rows(x, &train).view(), values(y, &train).view())
                .map_err(|e| e.context(format!("leave-one-out fit without sample index {i}")))?;
            Ok(model.predict(x.slice(ndarray::s![i..i + 1, ..]))?[0])
        })
        .collect()
}

/// Scaler that training-fold statistics must reproduce; exposed for audits.
pub fn expected_scaler(x: ArrayView2<f64>, train: &[usize]) -> Result<Scaler<f64>> {
    Scaler::fit(rows(x, train).view())
}
