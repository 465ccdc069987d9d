//! CART regression trees: greedy variance-reduction splits, then minimal
//! cost-complexity pruning.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scaling::check_columns;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => ((p as f64).sqrt() as usize).max(1),
            MaxFeatures::Count(k) => k.clamp(1, p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; more are tried only if none of
    /// these admits a split.
    pub max_features: MaxFeatures,
    /// Complexity penalty per leaf, in units of mean squared error.
    pub ccp_alpha: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            ccp_alpha: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub value: f64,
    pub n_samples: usize,
    /// Sum of squared deviations from `value` over the node's rows.
    pub sse: f64,
    pub split: Option<Split>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub n_features: usize,
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

/// Best split of `rows` on one feature: (total child SSE, threshold).
pub(crate) fn best_split_on_feature(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    rows: &[usize],
    feature: usize,
    min_leaf: usize,
    mean: f64,
) -> Option<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = rows.iter().map(|&r| (x[[r, feature]], y[r] - mean)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let (total_sum, total_sq) = pairs
        .iter()
        .fold((0.0, 0.0), |(s, q), &(_, v)| (s + v, q + v * v));
    let mut best: Option<(f64, f64)> = None;
    let (mut sum, mut sq) = (0.0, 0.0);
    for k in 1..n {
        let v = pairs[k - 1].1;
        sum += v;
        sq += v * v;
        if k < min_leaf || n - k < min_leaf || pairs[k - 1].0 == pairs[k].0 {
            continue;
        }
        let (nl, nr) = (k as f64, (n - k) as f64);
        let left = sq - sum * sum / nl;
        let rsum = total_sum - sum;
        let right = (total_sq - sq) - rsum * rsum / nr;
        let cost = left.max(0.0) + right.max(0.0);
        if best.is_none_or(|(c, _)| cost < c) {
            let (a, b) = (pairs[k - 1].0, pairs[k].0);
            let mid = a + (b - a) / 2.0;
            let threshold = if mid < b { mid } else { a };
            best = Some((cost, threshold));
        }
    }
    best
}

struct Builder<'a, R> {
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    params: &'a TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / n as f64;
        let sse: f64 = rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        let id = self.nodes.len();
        self.nodes.push(Node {
            value: mean,
            n_samples: n,
            sse,
            split: None,
        });
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || n < self.params.min_samples_split.max(2) || sse <= 0.0 {
            return id;
        }
        let Some((feature, threshold)) = self.choose_split(&rows, mean, sse) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x[[r, feature]] <= threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id].split = Some(Split {
            feature,
            threshold,
            left,
            right,
        });
        id
    }

    fn choose_split(&mut self, rows: &[usize], mean: f64, sse: f64) -> Option<(usize, f64)> {
        let p = self.x.ncols();
        let mut order: Vec<usize> = (0..p).collect();
        let k = self.params.max_features.resolve(p);
        if k < p {
            order.shuffle(self.rng);
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for (tried, &f) in order.iter().enumerate() {
            if tried >= k && best.is_some() {
                break;
            }
            if let Some((cost, t)) =
                best_split_on_feature(self.x, self.y, rows, f, self.params.min_samples_leaf.max(1), mean)
            {
                // only strict reductions count as splits
                if cost < sse * (1.0 - 1e-12) && best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Grows one tree on `rows` (repeats allowed).
pub fn fit_tree_on<R: Rng>(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> RegressionTree {
    let n_total = rows.len();
    let mut builder = Builder {
        x,
        y,
        params,
        rng,
        nodes: Vec::new(),
    };
    builder.grow(rows, 0);
    let mut tree = RegressionTree {
        n_features: x.ncols(),
        nodes: builder.nodes,
    };
    tree.prune(params.ccp_alpha, n_total);
    tree
}

pub fn fit_tree<R: Rng>(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    params: &TreeParams,
    rng: &mut R,
) -> Result<RegressionTree> {
    crate::scaling::check_training(x, y, 1)?;
    Ok(fit_tree_on(x, y, (0..x.nrows()).collect(), params, rng))
}

impl RegressionTree {
    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i].split {
                None => 0,
                Some(s) => 1 + go(nodes, s.left).max(go(nodes, s.right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match &node.split {
                None => return node.value,
                Some(s) => {
                    i = if row[s.feature] <= s.threshold {
                        s.left
                    } else {
                        s.right
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_columns(x, self.n_features)?;
        Ok(x.rows().into_iter().map(|r| self.predict_row(r)).collect())
    }

    /// Replaces every subtree whose error reduction does not pay for its
    /// extra leaves at `alpha` per leaf (errors scaled by `1 / n_total`),
    /// giving the minimal cost-complexity subtree.
    pub fn prune(&mut self, alpha: f64, n_total: usize) {
        let scale = 1.0 / n_total.max(1) as f64;
        // returns the pruned subtree's error plus alpha per leaf
        fn visit(nodes: &mut [Node], i: usize, alpha: f64, scale: f64) -> f64 {
            let own = nodes[i].sse * scale + alpha;
            let Some((l, r)) = nodes[i].split.as_ref().map(|s| (s.left, s.right)) else {
                return own;
            };
            let below = visit(nodes, l, alpha, scale) + visit(nodes, r, alpha, scale);
            if own <= below {
                nodes[i].split = None;
                own
            } else {
                below
            }
        }
        if self.nodes.is_empty() {
            return;
        }
        visit(&mut self.nodes, 0, alpha, scale);
        self.compact();
    }

    /// Drops nodes unreachable from the root, keeping preorder numbering.
    fn compact(&mut self) {
        let mut out = Vec::with_capacity(self.nodes.len());
        fn copy(src: &[Node], i: usize, out: &mut Vec<Node>) -> usize {
            let id = out.len();
            let mut node = src[i].clone();
            let split = node.split.take();
            out.push(node);
            if let Some(mut s) = split {
                s.left = copy(src, s.left, out);
                s.right = copy(src, s.right, out);
                out[id].split = Some(s);
            }
            id
        }
        copy(&self.nodes, 0, &mut out);
        self.nodes = out;
    }
}
