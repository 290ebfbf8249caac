//! Algorithm tags, hyperparameter maps and a uniform fit/predict facade over
//! every regressor in the crate.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::dataset::Scaler;
use crate::ensemble::{
    feature_fscore, fit_forest, fit_gbm, fit_tree, FeatureImportance, ForestModel, ForestParams,
    GbmModel, GbmParams, RegressionTree,
};
use crate::error::{Error, Result};
use crate::linear::{fit_lasso, fit_plain, fit_ridge, LinearModel};
use crate::mlp::{fit_mlp, MlpModel, Optimizer, TrainConfig};
use crate::svr::{fit_svr, SvrModel, SvrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Lasso,
    Ridge,
    Plain,
    Tree,
    Forest,
    Gbm,
    GbmRegularized,
    Svr,
    Mlp,
    /// Predicts the training mean; a reference row for benchmarks.
    Mean,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Algorithm::Lasso,
        Algorithm::Ridge,
        Algorithm::Plain,
        Algorithm::Tree,
        Algorithm::Forest,
        Algorithm::Gbm,
        Algorithm::GbmRegularized,
        Algorithm::Svr,
        Algorithm::Mlp,
        Algorithm::Mean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lasso => "lasso",
            Algorithm::Ridge => "ridge",
            Algorithm::Plain => "plain",
            Algorithm::Tree => "tree",
            Algorithm::Forest => "forest",
            Algorithm::Gbm => "gbm",
            Algorithm::GbmRegularized => "gbm_regularized",
            Algorithm::Svr => "svr",
            Algorithm::Mlp => "mlp",
            Algorithm::Mean => "mean",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let key = name.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown model {name:?}; expected one of {}",
                    Self::ALL.map(|a| a.name()).join(", ")
                ))
            })
    }

    /// Hyperparameter names this algorithm accepts.
    pub fn hyperparameter_names(self) -> &'static [&'static str] {
        match self {
            Algorithm::Lasso | Algorithm::Ridge => &["lambda"],
            Algorithm::Plain | Algorithm::Mean => &[],
            Algorithm::Tree => &["max_depth", "min_samples_leaf"],
            Algorithm::Forest => &["n_estimators", "max_depth", "min_samples_leaf"],
            Algorithm::Gbm => &[
                "n_estimators",
                "max_depth",
                "learning_rate",
                "subsample",
                "min_samples_leaf",
            ],
            Algorithm::GbmRegularized => &[
                "n_estimators",
                "max_depth",
                "learning_rate",
                "subsample",
                "max_features",
                "reg_lambda",
                "min_samples_leaf",
            ],
            Algorithm::Svr => &["gamma", "c", "epsilon"],
            Algorithm::Mlp => &["hidden", "learning_rate", "max_epochs", "batch_size", "l2"],
        }
    }

    pub fn normalizes_by_default(self) -> bool {
        matches!(self, Algorithm::Svr | Algorithm::Mlp)
    }

    pub fn is_tree_ensemble(self) -> bool {
        matches!(
            self,
            Algorithm::Forest | Algorithm::Gbm | Algorithm::GbmRegularized
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single hyperparameter value: a number or a tuple of layer widths.
#[derive(Debug, Clone, PartialEq)]
pub enum HyperValue {
    Num(f64),
    Sizes(Vec<usize>),
}

impl HyperValue {
    /// Parses `0.001`, `16000`, `(2,4)` or `(55, 10, 86)`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(inner) = t.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
            let sizes = inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::invalid(format!("bad layer width {s:?} in {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(HyperValue::Sizes(sizes));
        }
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(HyperValue::Num)
            .ok_or_else(|| Error::invalid(format!("bad hyperparameter value {t:?}")))
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Num(v) => write!(f, "{v}"),
            HyperValue::Sizes(s) => {
                let parts: Vec<String> = s.iter().map(|v| v.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
        }
    }
}

impl From<f64> for HyperValue {
    fn from(v: f64) -> Self {
        HyperValue::Num(v)
    }
}

impl From<Vec<usize>> for HyperValue {
    fn from(v: Vec<usize>) -> Self {
        HyperValue::Sizes(v)
    }
}

pub type Hyperparameters = BTreeMap<String, HyperValue>;

/// Renders `a=1, b=(2,3)` in key order.
pub fn format_hyperparameters(h: &Hyperparameters) -> String {
    h.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub algorithm: Algorithm,
    pub hyperparameters: Hyperparameters,
    /// z-score features with training-row statistics.
    pub normalize_features: bool,
    /// z-score the target with training-row statistics and invert predictions.
    pub normalize_target: bool,
    /// Seed for stochastic learners; identical for every fold.
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            hyperparameters: Hyperparameters::new(),
            normalize_features: algorithm.normalizes_by_default(),
            normalize_target: algorithm == Algorithm::Mlp,
            seed: 42,
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<HyperValue>) -> Self {
        self.hyperparameters.insert(name.to_string(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_hyperparameters(mut self, h: &Hyperparameters) -> Self {
        for (k, v) in h {
            self.hyperparameters.insert(k.clone(), v.clone());
        }
        self
    }

    /// Rejects names the algorithm does not know and values of the wrong kind.
    pub fn validate(&self) -> Result<()> {
        let allowed = self.algorithm.hyperparameter_names();
        for (name, value) in &self.hyperparameters {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::invalid(format!(
                    "{} does not accept hyperparameter {name:?} (accepted: {})",
                    self.algorithm,
                    if allowed.is_empty() {
                        "none".to_string()
                    } else {
                        allowed.join(", ")
                    }
                )));
            }
            let is_sizes = matches!(value, HyperValue::Sizes(_));
            if is_sizes != (name == "hidden") {
                return Err(Error::invalid(format!(
                    "hyperparameter {name:?} has the wrong kind of value {value}"
                )));
            }
        }
        Ok(())
    }

    fn num(&self, name: &str, default: f64) -> Result<f64> {
        match self.hyperparameters.get(name) {
            None => Ok(default),
            Some(HyperValue::Num(v)) => Ok(*v),
            Some(other) => Err(Error::invalid(format!(
                "hyperparameter {name:?} must be a number, got {other}"
            ))),
        }
    }

    fn count(&self, name: &str, default: usize) -> Result<usize> {
        let v = self.num(name, default as f64)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "hyperparameter {name:?} must be a non-negative integer, got {v}"
            )));
        }
        Ok(v as usize)
    }

    fn hidden(&self) -> Result<Vec<usize>> {
        match self.hyperparameters.get("hidden") {
            None => Ok(vec![16]),
            Some(HyperValue::Sizes(s)) if !s.is_empty() => Ok(s.clone()),
            Some(other) => Err(Error::invalid(format!(
                "hyperparameter \"hidden\" must be a non-empty tuple, got {other}"
            ))),
        }
    }

    fn forest_params(&self) -> Result<ForestParams> {
        Ok(ForestParams {
            n_estimators: self.count("n_estimators", 100)?,
            max_depth: self.count("max_depth", 8)?,
            min_samples_leaf: self.count("min_samples_leaf", 1)?,
            seed: self.seed,
        })
    }

    fn gbm_params(&self) -> Result<GbmParams> {
        let regularized = self.algorithm == Algorithm::GbmRegularized;
        Ok(GbmParams {
            n_estimators: self.count("n_estimators", 1000)?,
            max_depth: self.count("max_depth", 3)?,
            learning_rate: self.num("learning_rate", 0.01)?,
            subsample: self.num("subsample", 1.0)?,
            max_features: if regularized {
                self.num("max_features", 1.0)?
            } else {
                1.0
            },
            reg_lambda: if regularized {
                self.num("reg_lambda", 0.0)?
            } else {
                0.0
            },
            min_samples_leaf: self.count("min_samples_leaf", 1)?,
            seed: self.seed,
        })
    }

    fn svr_params(&self) -> Result<SvrParams> {
        Ok(SvrParams {
            c: self.num("c", 1.0)?,
            gamma: self.num("gamma", 0.1)?,
            epsilon: self.num("epsilon", 0.1)?,
            ..SvrParams::default()
        })
    }

    fn train_config(&self) -> Result<TrainConfig> {
        let batch = self.count("batch_size", 0)?;
        Ok(TrainConfig {
            learning_rate: self.num("learning_rate", 1e-3)?,
            max_epochs: self.count("max_epochs", 2000)?,
            batch_size: (batch > 0).then_some(batch),
            l2: self.num("l2", 0.0)?,
            optimizer: Optimizer::Adam,
            ..TrainConfig::default()
        })
    }

    /// Human-readable label such as `svr(c=40000, gamma=0.0001)`.
    pub fn label(&self) -> String {
        if self.hyperparameters.is_empty() {
            self.algorithm.name().to_string()
        } else {
            format!(
                "{}({})",
                self.algorithm,
                format_hyperparameters(&self.hyperparameters)
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Linear(LinearModel<f64>),
    Tree(RegressionTree<f64>),
    Forest(ForestModel<f64>),
    Gbm(GbmModel<f64>),
    Svr(SvrModel<f64>),
    Mlp(MlpModel<f64>),
    Mean(f64),
}

/// A fitted estimator plus the preprocessing learned from its training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub estimator: Estimator,
    pub feature_scaler: Option<Scaler<f64>>,
    /// (mean, std) used to standardize the target.
    pub target_scaling: Option<(f64, f64)>,
}

/// Fits `config` on the given rows.
pub fn fit_model(
    config: &ModelConfig,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<TrainedModel> {
    config.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    let feature_scaler = if config.normalize_features {
        Some(Scaler::fit(x)?)
    } else {
        None
    };
    let xs = match &feature_scaler {
        Some(s) => s.apply(x)?,
        None => x.to_owned(),
    };
    let target_scaling = if config.normalize_target {
        let n = y.len().max(1) as f64;
        let mean = y.sum() / n;
        let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        Some((mean, if sd > 0.0 { sd } else { 1.0 }))
    } else {
        None
    };
    let ys: Array1<f64> = match target_scaling {
        Some((m, s)) => y.mapv(|v| (v - m) / s),
        None => y.to_owned(),
    };
    let (xv, yv) = (xs.view(), ys.view());
    let estimator = match config.algorithm {
        Algorithm::Plain => Estimator::Linear(fit_plain(xv, yv)?),
        Algorithm::Ridge => Estimator::Linear(fit_ridge(xv, yv, config.num("lambda", 1.0)?)?),
        Algorithm::Lasso => Estimator::Linear(fit_lasso(xv, yv, config.num("lambda", 1.0)?)?),
        Algorithm::Tree => Estimator::Tree(fit_tree(
            xv,
            yv,
            config.count("max_depth", 5)?,
            config.count("min_samples_leaf", 1)?,
        )?),
        Algorithm::Forest => Estimator::Forest(fit_forest(xv, yv, &config.forest_params()?)?),
        Algorithm::Gbm | Algorithm::GbmRegularized => {
            Estimator::Gbm(fit_gbm(xv, yv, &config.gbm_params()?)?)
        }
        Algorithm::Svr => Estimator::Svr(fit_svr(xv, yv, &config.svr_params()?)?),
        Algorithm::Mlp => Estimator::Mlp(fit_mlp(
            xv,
            yv,
            &config.hidden()?,
            &config.train_config()?,
            config.seed,
        )?),
        Algorithm::Mean => {
            if yv.is_empty() {
                return Err(Error::invalid("mean model needs at least one row"));
            }
            Estimator::Mean(yv.sum() / yv.len() as f64)
        }
    };
    Ok(TrainedModel {
        estimator,
        feature_scaler,
        target_scaling,
    })
}

impl TrainedModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let scaled;
        let xv = match &self.feature_scaler {
            Some(s) => {
                scaled = s.apply(x)?;
                scaled.view()
            }
            None => x,
        };
        let mut p = match &self.estimator {
            Estimator::Linear(m) => m.predict(xv)?,
            Estimator::Tree(m) => m.predict(xv)?,
            Estimator::Forest(m) => m.predict(xv)?,
            Estimator::Gbm(m) => m.predict(xv)?,
            Estimator::Svr(m) => m.predict(xv)?,
            Estimator::Mlp(m) => m.predict(xv)?,
            Estimator::Mean(v) => Array1::from_elem(xv.nrows(), *v),
        };
        if let Some((m, s)) = self.target_scaling {
            p.mapv_inplace(|v| v * s + m);
        }
        Ok(p)
    }

    /// Split-count importance for tree ensembles and single trees.
    pub fn feature_importance(&self) -> Option<FeatureImportance> {
        match &self.estimator {
            Estimator::Forest(m) => Some(feature_fscore(m)),
            Estimator::Gbm(m) => Some(feature_fscore(m)),
            Estimator::Tree(t) => Some(FeatureImportance::from_trees(
                t.n_features,
                std::iter::once(t),
            )),
            _ => None,
        }
    }
}
