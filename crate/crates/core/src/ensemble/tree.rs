use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum Node<F> {
    Leaf {
        value: F,
    },
    Split {
        feature: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
}

/// CART regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree<F> {
    pub nodes: Vec<Node<F>>,
    pub max_depth: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_samples_leaf: 1,
        }
    }
}

/// Best split found at a node, expressed as the reduction of the sum of squared errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice<F> {
    pub feature: usize,
    pub threshold: F,
    pub gain: F,
}

/// Relative tolerance under which two split gains are considered tied.
pub fn tie_tolerance<F: Real>(parent_sse: F) -> F {
    F::epsilon() * F::lit(64.0) * parent_sse
}

/// Midpoint of two consecutive distinct values that still routes `lo` left and `hi` right.
pub fn midpoint<F: Real>(lo: F, hi: F) -> F {
    let mid = (lo + hi) / F::lit(2.0);
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Searches every feature in `features` (ascending) and every midpoint between
/// consecutive distinct values; the largest SSE reduction wins, ties go to the
/// lowest feature index and then the lowest threshold.
pub fn best_split<F: Real>(
    x: ArrayView2<F>,
    y: &[F],
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitChoice<F>> {
    let n = rows.len();
    if n < 2 || n < 2 * min_samples_leaf.max(1) {
        return None;
    }
    let nf = F::from_count(n);
    let mean = rows.iter().map(|&i| y[i]).sum::<F>() / nf;
    let parent_sse = rows
        .iter()
        .map(|&i| (y[i] - mean) * (y[i] - mean))
        .sum::<F>();
    if parent_sse <= F::zero() {
        return None;
    }
    let tol = tie_tolerance(parent_sse);

    let mut best: Option<SplitChoice<F>> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for &feature in features {
        order.sort_by(|&a, &b| {
            x[[a, feature]]
                .partial_cmp(&x[[b, feature]])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        // With node-centered targets the right-hand sum is the negated left sum,
        // so the gain is sum_left² (1/n_left + 1/n_right).
        let mut left_sum = F::zero();
        for k in 0..n - 1 {
            left_sum = left_sum + (y[order[k]] - mean);
            let n_left = k + 1;
            let n_right = n - n_left;
            let lo = x[[order[k], feature]];
            let hi = x[[order[k + 1], feature]];
            if !(hi > lo) || n_left < min_samples_leaf || n_right < min_samples_leaf {
                continue;
            }
            let gain = left_sum
                * left_sum
                * (F::one() / F::from_count(n_left) + F::one() / F::from_count(n_right));
            let better = match best {
                None => gain > tol,
                Some(b) => gain > b.gain + tol,
            };
            if better {
                best = Some(SplitChoice {
                    feature,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best
}

pub(crate) struct TreeBuilder<'a, F> {
    pub x: ArrayView2<'a, F>,
    pub y: &'a [F],
    pub features: &'a [usize],
    pub params: TreeParams,
    /// L2 shrinkage of leaf values: leaf = Σy / (count + leaf_reg).
    pub leaf_reg: F,
}

impl<F: Real> TreeBuilder<'_, F> {
    pub fn build(&self, rows: Vec<usize>) -> RegressionTree<F> {
        let mut nodes = Vec::new();
        self.grow(&mut nodes, rows, 0);
        RegressionTree {
            nodes,
            max_depth: self.params.max_depth,
            n_features: self.x.ncols(),
        }
    }

    fn leaf_value(&self, rows: &[usize]) -> F {
        let sum = rows.iter().map(|&i| self.y[i]).sum::<F>();
        sum / (F::from_count(rows.len()) + self.leaf_reg)
    }

    fn grow(&self, nodes: &mut Vec<Node<F>>, rows: Vec<usize>, depth: usize) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf {
            value: self.leaf_value(&rows),
        });
        if depth >= self.params.max_depth {
            return id;
        }
        let Some(split) = best_split(
            self.x,
            self.y,
            &rows,
            self.features,
            self.params.min_samples_leaf,
        ) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[[i, split.feature]] <= split.threshold);
        let left = self.grow(nodes, left_rows, depth + 1);
        let right = self.grow(nodes, right_rows, depth + 1);
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

pub(crate) fn check_training<F>(x: ArrayView2<F>, y: ArrayView1<F>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::invalid("cannot fit on an empty dataset"));
    }
    Ok(())
}

/// Greedy CART regression tree with the squared-error criterion.
pub fn fit_tree<F: Real>(
    x: ArrayView2<F>,
    y: ArrayView1<F>,
    max_depth: usize,
    min_samples_leaf: usize,
) -> Result<RegressionTree<F>> {
    check_training(x, y)?;
    if max_depth < 1 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    let y = y.to_vec();
    let features: Vec<usize> = (0..x.ncols()).collect();
    let builder = TreeBuilder {
        x,
        y: &y,
        features: &features,
        params: TreeParams {
            max_depth,
            min_samples_leaf: min_samples_leaf.max(1),
        },
        leaf_reg: F::zero(),
    };
    Ok(builder.build((0..x.nrows()).collect()))
}

impl<F: Real> RegressionTree<F> {
    pub fn predict_row(&self, row: ArrayView1<F>) -> F {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<F>) -> Result<Array1<F>> {
        let needed = self.required_features();
        if x.ncols() < needed {
            return Err(Error::DimensionMismatch {
                expected: needed,
                got: x.ncols(),
            });
        }
        Ok(x.rows().into_iter().map(|r| self.predict_row(r)).collect())
    }

    /// One past the highest feature index used by a split.
    pub fn required_features(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(feature + 1),
                Node::Leaf { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        fn walk<F>(nodes: &[Node<F>], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }
}

pub fn predict_tree<F: Real>(t: &RegressionTree<F>, x: ArrayView2<F>) -> Result<Array1<F>> {
    t.predict(x)
}
