//! ε-insensitive support vector regression with a Gaussian kernel.
//!
//! The dual is solved by sequential minimal optimization over the stacked
//! multiplier vector `a = [α′; α]` with signs `s = [+1; −1]`:
//!
//! ```text
//! min ½ aᵀQa + pᵀa   s.t.  Σ s_t a_t = 0,  0 ≤ a_t ≤ C
//! Q_ts = s_t s_s K(x_t, x_s),  p = [ε − y; ε + y]
//! ```
//!
//! which is the negated dual of the primal with slacks. Working pairs are
//! chosen with second-order information; the full kernel matrix is cached.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<F> {
    pub gamma: F,
}

impl<F: Real> KernelSpec<F> {
    pub fn gaussian(gamma: F) -> Result<Self> {
        if !(gamma > F::zero()) || !gamma.is_finite() {
            return Err(Error::invalid(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    /// Gaussian kernel from its width: `gamma = 1 / (2σ²)`.
    pub fn from_sigma(sigma: F) -> Result<Self> {
        Self::gaussian(F::one() / (F::lit(2.0) * sigma * sigma))
    }

    #[inline]
    fn eval_unchecked(&self, a: ArrayView1<F>, b: ArrayView1<F>) -> F {
        let d2 = a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum::<F>();
        (-self.gamma * d2).exp()
    }

    pub fn eval(&self, a: ArrayView1<F>, b: ArrayView1<F>) -> Result<F> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        Ok(self.eval_unchecked(a, b))
    }

    pub fn matrix(&self, x: ArrayView2<F>) -> Array2<F> {
        let n = x.nrows();
        let mut k = Array2::<F>::zeros((n, n));
        for i in 0..n {
            k[[i, i]] = F::one();
            for j in (i + 1)..n {
                let v = self.eval_unchecked(x.row(i), x.row(j));
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        k
    }
}

pub fn kernel_eval<F: Real>(spec: &KernelSpec<F>, a: ArrayView1<F>, b: ArrayView1<F>) -> Result<F> {
    spec.eval(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrParams {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tolerance: f64,
    /// Pair updates allowed per training row.
    pub max_iter_per_row: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 0.1,
            epsilon: 0.1,
            tolerance: 1e-3,
            max_iter_per_row: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel<F> {
    pub support_vectors: Array2<F>,
    /// `α′ − α` for every support vector.
    pub dual_coefs: Array1<F>,
    pub bias: F,
    pub kernel: KernelSpec<F>,
    pub c: F,
    pub epsilon: F,
    /// Full multiplier vectors over the training rows.
    pub alpha: Array1<F>,
    pub alpha_star: Array1<F>,
    /// Maximal KKT violation at termination.
    pub kkt_violation: F,
    pub iterations: usize,
}

/// Solver state after each pair update, for instrumentation.
pub struct SolverStep<'a, F> {
    pub iteration: usize,
    /// `α′`
    pub alpha_star: &'a [F],
    /// `α`
    pub alpha: &'a [F],
    pub dual_objective: F,
}

struct Smo<F> {
    n: usize,
    kernel: Array2<F>,
    p: Vec<F>,
    a: Vec<F>,
    grad: Vec<F>,
    c: F,
}

impl<F: Real> Smo<F> {
    #[inline]
    fn sign(&self, t: usize) -> F {
        if t < self.n {
            F::one()
        } else {
            -F::one()
        }
    }

    #[inline]
    fn q(&self, t: usize, s: usize) -> F {
        self.sign(t) * self.sign(s) * self.kernel[[t % self.n, s % self.n]]
    }

    fn in_up(&self, t: usize) -> bool {
        if t < self.n {
            self.a[t] < self.c
        } else {
            self.a[t] > F::zero()
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if t < self.n {
            self.a[t] > F::zero()
        } else {
            self.a[t] < self.c
        }
    }

    /// Dual objective to maximize: −(½aᵀQa + pᵀa).
    fn dual_objective(&self) -> F {
        let half = F::lit(0.5);
        -(0..2 * self.n)
            .map(|t| self.a[t] * (self.grad[t] + self.p[t]) * half)
            .sum::<F>()
    }

    /// Returns the working pair and the current maximal violation.
    fn select(&self) -> (Option<(usize, usize)>, F) {
        let tau = F::lit(1e-12);
        let mut gmax = F::neg_infinity();
        let mut i_sel = None;
        for t in 0..2 * self.n {
            if self.in_up(t) {
                let v = -self.sign(t) * self.grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmin = F::infinity();
        let mut best_obj = F::infinity();
        let mut j_sel = None;
        for t in 0..2 * self.n {
            if !self.in_low(t) {
                continue;
            }
            let v = -self.sign(t) * self.grad[t];
            if v < gmin {
                gmin = v;
            }
            if let Some(i) = i_sel {
                let b = gmax - v;
                if b > F::zero() {
                    let ki = i % self.n;
                    let kt = t % self.n;
                    let mut quad = self.kernel[[ki, ki]] + self.kernel[[kt, kt]]
                        - F::lit(2.0) * self.kernel[[ki, kt]];
                    if quad <= F::zero() {
                        quad = tau;
                    }
                    let obj = -(b * b) / quad;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let violation = if gmax.is_finite() && gmin.is_finite() {
            gmax - gmin
        } else {
            F::zero()
        };
        match (i_sel, j_sel) {
            (Some(i), Some(j)) => (Some((i, j)), violation),
            _ => (None, violation),
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let tau = F::lit(1e-12);
        let c = self.c;
        let (old_i, old_j) = (self.a[i], self.a[j]);
        let (qii, qjj, qij) = (self.q(i, i), self.q(j, j), self.q(i, j));
        if self.sign(i) != self.sign(j) {
            let mut quad = qii + qjj + F::lit(2.0) * qij;
            if quad <= F::zero() {
                quad = tau;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = self.a[i] - self.a[j];
            self.a[i] = self.a[i] + delta;
            self.a[j] = self.a[j] + delta;
            if diff > F::zero() {
                if self.a[j] < F::zero() {
                    self.a[j] = F::zero();
                    self.a[i] = diff;
                }
            } else if self.a[i] < F::zero() {
                self.a[i] = F::zero();
                self.a[j] = -diff;
            }
            if diff > F::zero() {
                if self.a[i] > c {
                    self.a[i] = c;
                    self.a[j] = c - diff;
                }
            } else if self.a[j] > c {
                self.a[j] = c;
                self.a[i] = c + diff;
            }
        } else {
            let mut quad = qii + qjj - F::lit(2.0) * qij;
            if quad <= F::zero() {
                quad = tau;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = self.a[i] + self.a[j];
            self.a[i] = self.a[i] - delta;
            self.a[j] = self.a[j] + delta;
            if sum > c {
                if self.a[i] > c {
                    self.a[i] = c;
                    self.a[j] = sum - c;
                }
            } else if self.a[j] < F::zero() {
                self.a[j] = F::zero();
                self.a[i] = sum;
            }
            if sum > c {
                if self.a[j] > c {
                    self.a[j] = c;
                    self.a[i] = sum - c;
                }
            } else if self.a[i] < F::zero() {
                self.a[i] = F::zero();
                self.a[j] = sum;
            }
        }
        let (di, dj) = (self.a[i] - old_i, self.a[j] - old_j);
        for t in 0..2 * self.n {
            self.grad[t] = self.grad[t] + self.q(t, i) * di + self.q(t, j) * dj;
        }
    }

    fn bias(&self) -> F {
        let mut ub = F::infinity();
        let mut lb = F::neg_infinity();
        let mut free_sum = F::zero();
        let mut free = 0usize;
        for t in 0..2 * self.n {
            let yg = self.sign(t) * self.grad[t];
            let positive = t < self.n;
            if self.a[t] >= self.c {
                if positive {
                    lb = lb.max(yg);
                } else {
                    ub = ub.min(yg);
                }
            } else if self.a[t] <= F::zero() {
                if positive {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum = free_sum + yg;
            }
        }
        let rho = if free > 0 {
            free_sum / F::from_count(free)
        } else {
            (ub + lb) / F::lit(2.0)
        };
        -rho
    }
}

fn check_params(p: &SvrParams) -> Result<()> {
    if !(p.c > 0.0) || !p.c.is_finite() {
        return Err(Error::invalid(format!("C must be positive, got {}", p.c)));
    }
    if !(p.epsilon >= 0.0) || !p.epsilon.is_finite() {
        return Err(Error::invalid(format!(
            "epsilon must be non-negative, got {}",
            p.epsilon
        )));
    }
    if !(p.tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    Ok(())
}

pub fn fit_svr<F: Real>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    params: &SvrParams,
) -> Result<SvrModel<F>> {
    fit_svr_traced(x, y, params, |_| {})
}

/// As [`fit_svr`], reporting the multipliers after every pair update.
pub fn fit_svr_traced<F: Real>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    params: &SvrParams,
    mut on_step: impl FnMut(&SolverStep<'_, F>),
) -> Result<SvrModel<F>> {
    check_params(params)?;
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    let n = x.nrows();
    if n == 0 {
        return Err(Error::invalid("cannot fit on an empty dataset"));
    }
    let kernel = KernelSpec::gaussian(F::lit(params.gamma))?;
    let eps = F::lit(params.epsilon);
    let c = F::lit(params.c);
    let tol = F::lit(params.tolerance);

    let mut p = Vec::with_capacity(2 * n);
    p.extend(y.iter().map(|&v| eps - v));
    p.extend(y.iter().map(|&v| eps + v));
    let mut smo = Smo {
        n,
        kernel: kernel.matrix(x),
        grad: p.clone(),
        p,
        a: vec![F::zero(); 2 * n],
        c,
    };

    let max_iter = params.max_iter_per_row.saturating_mul(n).max(1);
    let mut iterations = 0usize;
    let violation = loop {
        let (pair, violation) = smo.select();
        let Some((i, j)) = pair.filter(|_| violation >= tol) else {
            break violation;
        };
        if iterations >= max_iter {
            let (alpha_star, alpha) = smo.a.split_at(n);
            return Err(Error::SvrNotConverged {
                iterations,
                violation: violation.as_f64(),
                last_coefficients: alpha_star
                    .iter()
                    .zip(alpha)
                    .map(|(&s, &a)| (s - a).as_f64())
                    .collect(),
                last_bias: smo.bias().as_f64(),
            });
        }
        smo.update(i, j);
        iterations += 1;
        let (alpha_star, alpha) = smo.a.split_at(n);
        on_step(&SolverStep {
            iteration: iterations,
            alpha_star,
            alpha,
            dual_objective: smo.dual_objective(),
        });
    };

    let bias = smo.bias();
    // α and α′ active together only raise the ε term; cancel the overlap.
    let mut alpha_star = Array1::from(smo.a[..n].to_vec());
    let mut alpha = Array1::from(smo.a[n..].to_vec());
    for k in 0..n {
        let overlap = alpha_star[k].min(alpha[k]);
        if overlap > F::zero() {
            alpha_star[k] = alpha_star[k] - overlap;
            alpha[k] = alpha[k] - overlap;
        }
    }
    let support: Vec<usize> = (0..n)
        .filter(|&k| alpha_star[k] - alpha[k] != F::zero())
        .collect();
    let mut support_vectors = Array2::<F>::zeros((support.len(), x.ncols()));
    for (r, &k) in support.iter().enumerate() {
        support_vectors.row_mut(r).assign(&x.row(k));
    }
    let dual_coefs = support.iter().map(|&k| alpha_star[k] - alpha[k]).collect();
    Ok(SvrModel {
        support_vectors,
        dual_coefs,
        bias,
        kernel,
        c,
        epsilon: eps,
        alpha,
        alpha_star,
        kkt_violation: violation,
        iterations,
    })
}

/// Dual objective `−½βᵀKβ − εΣ(α + α′) + yᵀβ` with `β = α′ − α`.
pub fn dual_objective<F: Real>(
    kernel: ArrayView2<F>,
    y: ArrayView1<F>,
    alpha_star: ArrayView1<F>,
    alpha: ArrayView1<F>,
    epsilon: F,
) -> F {
    let beta = &alpha_star - &alpha;
    let kb = kernel.dot(&beta);
    -F::lit(0.5) * beta.dot(&kb) - epsilon * (alpha_star.sum() + alpha.sum()) + y.dot(&beta)
}

impl<F: Real> SvrModel<F> {
    pub fn predict(&self, x: ArrayView2<F>) -> Result<Array1<F>> {
        let dim = self.support_vectors.ncols();
        if !self.dual_coefs.is_empty() && x.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.ncols(),
            });
        }
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                self.support_vectors
                    .rows()
                    .into_iter()
                    .zip(&self.dual_coefs)
                    .map(|(sv, &coef)| coef * self.kernel.eval_unchecked(sv, row))
                    .sum::<F>()
                    + self.bias
            })
            .collect())
    }

    /// Upper bound on the Lipschitz constant of the decision function.
    pub fn lipschitz_bound(&self) -> F {
        // |d/dx exp(−γ‖x−s‖²)| ≤ √(2γ) e^{−1/2}
        let per_kernel = (F::lit(2.0) * self.kernel.gamma).sqrt() * F::lit((-0.5f64).exp());
        self.dual_coefs.iter().map(|c| c.abs()).sum::<F>() * per_kernel
    }
}

pub fn predict_svr<F: Real>(model: &SvrModel<F>, x: ArrayView2<F>) -> Result<Array1<F>> {
    model.predict(x)
}
