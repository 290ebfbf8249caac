//! Fully connected feed-forward regressor: ReLU hidden layers, linear output,
//! trained on mean squared error by reverse-mode gradients.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<F> {
    /// Input width, hidden widths, then 1.
    pub layer_sizes: Vec<usize>,
    /// Layer `l` maps `layer_sizes[l]` inputs to `layer_sizes[l + 1]` outputs (shape out × in).
    pub weights: Vec<Array2<F>>,
    pub biases: Vec<Array1<F>>,
    pub seed: u64,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub weights: Vec<Array2<F>>,
    pub biases: Vec<Array1<F>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Minimum training-loss improvement that resets the patience counter.
    pub tolerance: f64,
    /// Consecutive epochs without sufficient improvement before stopping.
    pub patience: usize,
    pub optimizer: Optimizer,
    /// Weight-decay coefficient on the sum of squared weights.
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 2000,
            batch_size: None,
            tolerance: 1e-8,
            patience: 10,
            optimizer: Optimizer::Adam,
            l2: 0.0,
        }
    }
}

impl<F: Real> MlpModel<F> {
    /// Symmetric uniform initialization with bound `√(6 / (fan_in + fan_out))`.
    pub fn init(input_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if hidden.contains(&0) {
            return Err(Error::invalid("hidden layer sizes must be positive"));
        }
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(input_dim);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                F::lit(rng.random_range(-bound..bound))
            }));
            biases.push(Array1::from_shape_simple_fn(fan_out, || {
                F::lit(rng.random_range(-bound..bound))
            }));
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn check_input(&self, x: ArrayView2<F>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Pre-activations of every layer.
    fn pre_activations(&self, x: ArrayView2<F>) -> Vec<Array2<F>> {
        let last = self.weights.len() - 1;
        let mut zs: Vec<Array2<F>> = Vec::with_capacity(self.weights.len());
        let mut a = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = a.dot(&w.t()) + b;
            if l < last {
                a = z.mapv(relu);
            }
            zs.push(z);
        }
        zs
    }

    pub fn forward(&self, x: ArrayView2<F>) -> Result<Array1<F>> {
        self.check_input(x)?;
        let zs = self.pre_activations(x);
        Ok(zs.last().expect("at least one layer").column(0).to_owned())
    }

    pub fn predict(&self, x: ArrayView2<F>) -> Result<Array1<F>> {
        self.forward(x)
    }

    pub fn loss(&self, x: ArrayView2<F>, y: ArrayView1<F>) -> Result<F> {
        let p = self.forward(x)?;
        check_targets(x, y)?;
        Ok(mean_squared(&p, y))
    }

    /// MSE over the batch and its gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<F>,
        y: ArrayView1<F>,
    ) -> Result<(F, Gradients<F>)> {
        self.check_input(x)?;
        check_targets(x, y)?;
        let n = F::from_count(x.nrows());
        let zs = self.pre_activations(x);
        let out = zs.last().expect("at least one layer").column(0).to_owned();
        let loss = mean_squared(&out, y);

        let layers = self.weights.len();
        let mut grad_w = Vec::with_capacity(layers);
        let mut grad_b = Vec::with_capacity(layers);
        // d loss / d output
        let mut delta: Array2<F> = (&out - &y)
            .mapv(|r| F::lit(2.0) * r / n)
            .insert_axis(Axis(1));
        for l in (0..layers).rev() {
            if l == 0 {
                grad_w.push(delta.t().dot(&x));
            } else {
                grad_w.push(delta.t().dot(&zs[l - 1].mapv(relu)));
            }
            grad_b.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                back.zip_mut_with(&zs[l - 1], |d, &z| {
                    if z <= F::zero() {
                        *d = F::zero();
                    }
                });
                delta = back;
            }
        }
        grad_w.reverse();
        grad_b.reverse();
        Ok((
            loss,
            Gradients {
                weights: grad_w,
                biases: grad_b,
            },
        ))
    }

    /// Flattened parameter vector (weights then bias, layer by layer).
    pub fn parameters(&self) -> Vec<F> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[F]) {
        let mut it = values.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut().chain(b.iter_mut()) {
                *v = it.next().expect("parameter vector length");
            }
        }
    }
}

impl<F: Real> Gradients<F> {
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

#[inline]
fn relu<F: Real>(z: F) -> F {
    if z > F::zero() {
        z
    } else {
        F::zero()
    }
}

fn mean_squared<F: Real>(p: &Array1<F>, y: ArrayView1<F>) -> F {
    p.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<F>() / F::from_count(y.len().max(1))
}

fn check_targets<F>(x: ArrayView2<F>, y: ArrayView1<F>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    Ok(())
}

pub fn forward<F: Real>(model: &MlpModel<F>, x: ArrayView2<F>) -> Result<Array1<F>> {
    model.forward(x)
}

pub fn loss_and_gradients<F: Real>(
    model: &MlpModel<F>,
    x: ArrayView2<F>,
    y: ArrayView1<F>,
) -> Result<(F, Gradients<F>)> {
    model.loss_and_gradients(x, y)
}

struct AdamState<F> {
    m: Vec<F>,
    v: Vec<F>,
    t: i32,
}

/// Best-so-far bookkeeping and the patience rule.
struct Monitor<F> {
    best_loss: F,
    best_params: Vec<F>,
    stale: usize,
    tol: F,
    patience: usize,
}

impl<F: Real> Monitor<F> {
    /// Records the objective of `params`; returns true when training should stop.
    fn observe(&mut self, epoch: usize, loss: F, params: &[F]) -> Result<bool> {
        if !loss.is_finite() || params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        if loss < self.best_loss - self.tol {
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_params.clear();
            self.best_params.extend_from_slice(params);
        }
        Ok(self.stale >= self.patience)
    }
}

/// Trains a network with the given hidden widths by minimizing
/// `MSE + l2·Σ w²` (weights only); returns the parameters with the lowest
/// objective observed, initialization included.
pub fn fit_mlp<F: Real>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    hidden: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<MlpModel<F>> {
    check_targets(x, y)?;
    if x.nrows() < 2 {
        return Err(Error::invalid("mlp needs at least 2 training rows"));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::invalid("learning_rate must be positive"));
    }
    if !(config.l2 >= 0.0) {
        return Err(Error::invalid("l2 penalty must be non-negative"));
    }
    if config.batch_size == Some(0) {
        return Err(Error::invalid("batch_size must be positive"));
    }
    let n = x.nrows();
    let mut model = MlpModel::<F>::init(x.ncols(), hidden, seed)?;
    if config.max_epochs == 0 {
        return Ok(model);
    }
    // Shuffling draws from its own stream so the initialization is unaffected.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle_rng.set_stream(1);

    let lr = F::lit(config.learning_rate);
    let l2 = F::lit(config.l2);
    let (beta1, beta2, adam_eps) = (F::lit(0.9), F::lit(0.999), F::lit(1e-8));
    let mut params = model.parameters();
    let is_weight: Vec<bool> = model
        .weights
        .iter()
        .zip(&model.biases)
        .flat_map(|(w, b)| {
            std::iter::repeat_n(true, w.len()).chain(std::iter::repeat_n(false, b.len()))
        })
        .collect();
    let penalty = |p: &[F]| -> F {
        if config.l2 == 0.0 {
            return F::zero();
        }
        l2 * p
            .iter()
            .zip(&is_weight)
            .filter(|(_, &w)| w)
            .map(|(&v, _)| v * v)
            .sum::<F>()
    };
    let mut adam = AdamState {
        m: vec![F::zero(); params.len()],
        v: vec![F::zero(); params.len()],
        t: 0,
    };
    let mut monitor = Monitor {
        best_loss: F::infinity(),
        best_params: params.clone(),
        stale: 0,
        tol: F::lit(config.tolerance),
        patience: config.patience.max(1),
    };

    let batch = config.batch_size.unwrap_or(n).min(n);
    let full_batch = batch == n;
    let mut order: Vec<usize> = (0..n).collect();
    if !full_batch {
        monitor.observe(0, model.loss(x, y)? + penalty(&params), &params)?;
    }
    let mut stopped = false;

    'epochs: for epoch in 1..=config.max_epochs {
        if !full_batch {
            order.shuffle(&mut shuffle_rng);
        }
        for chunk in order.chunks(batch) {
            let grads = if full_batch {
                // The full-batch loss belongs to the parameters left by the previous epoch.
                let (loss, g) = model.loss_and_gradients(x, y)?;
                if monitor.observe(epoch - 1, loss + penalty(&params), &params)? {
                    stopped = true;
                    break 'epochs;
                }
                g
            } else {
                let xb = x.select(Axis(0), chunk);
                let yb = y.select(Axis(0), chunk);
                model.loss_and_gradients(xb.view(), yb.view())?.1
            };
            let mut g = grads.flatten();
            if config.l2 > 0.0 {
                for ((gk, &pk), &w) in g.iter_mut().zip(&params).zip(&is_weight) {
                    if w {
                        *gk = *gk + F::lit(2.0) * l2 * pk;
                    }
                }
            }
            match config.optimizer {
                Optimizer::Sgd => {
                    for (p, &gi) in params.iter_mut().zip(&g) {
                        *p = *p - lr * gi;
                    }
                }
                Optimizer::Adam => {
                    adam.t += 1;
                    let c1 = F::one() - beta1.powi(adam.t);
                    let c2 = F::one() - beta2.powi(adam.t);
                    for k in 0..params.len() {
                        adam.m[k] = beta1 * adam.m[k] + (F::one() - beta1) * g[k];
                        adam.v[k] = beta2 * adam.v[k] + (F::one() - beta2) * g[k] * g[k];
                        let m_hat = adam.m[k] / c1;
                        let v_hat = adam.v[k] / c2;
                        params[k] = params[k] - lr * m_hat / (v_hat.sqrt() + adam_eps);
                    }
                }
            }
            model.set_parameters(&params);
        }
        if !full_batch && monitor.observe(epoch, model.loss(x, y)? + penalty(&params), &params)? {
            stopped = true;
            break;
        }
    }
    if full_batch && !stopped {
        monitor.observe(
            config.max_epochs,
            model.loss(x, y)? + penalty(&params),
            &params,
        )?;
    }
    model.set_parameters(&monitor.best_params);
    Ok(model)
}
