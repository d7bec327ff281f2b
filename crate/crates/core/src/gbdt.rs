//! Gradient-boosted decision trees for binary classification.
//!
//! Newton boosting on the logistic loss with quantile-binned split
//! candidates. Small and deterministic: given the same rows in the same
//! order, fitting produces the same model.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_child_hessian: f64,
    /// Split candidates per feature.
    pub max_bins: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            rounds: 60,
            max_depth: 3,
            learning_rate: 0.2,
            lambda: 1.0,
            min_child_hessian: 0.5,
            max_bins: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedClassifier {
    n_features: usize,
    base_score: f64,
    trees: Vec<Tree>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Split thresholds for one feature column: midpoints between distinct
/// values, thinned to at most `max_bins` quantiles.
fn thresholds(column: &mut [f64], max_bins: usize) -> Vec<f64> {
    column.sort_by(f64::total_cmp);
    let mut uniq: Vec<f64> = Vec::new();
    for &v in column.iter() {
        if uniq.last() != Some(&v) {
            uniq.push(v);
        }
    }
    if uniq.len() < 2 {
        return Vec::new();
    }
    let mids: Vec<f64> = uniq.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if mids.len() <= max_bins {
        return mids;
    }
    let mut out: Vec<f64> = (1..=max_bins)
        .map(|k| mids[(k * mids.len()) / (max_bins + 1)])
        .collect();
    out.dedup();
    out
}

struct Builder<'a> {
    bins: &'a [Vec<u16>],
    cuts: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a BoostParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&self, g: f64, h: f64) -> Node {
        Node::Leaf(-self.params.learning_rate * g / (h + self.params.lambda))
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let id = self.nodes.len();
        self.nodes.push(self.leaf(g, h));
        if depth >= self.params.max_depth || rows.len() < 2 {
            return id;
        }
        let lambda = self.params.lambda;
        let parent = g * g / (h + lambda);
        let mut best: Option<(f64, usize, usize)> = None;
        for (f, cuts) in self.cuts.iter().enumerate() {
            if cuts.is_empty() {
                continue;
            }
            let mut hg = vec![0.0; cuts.len() + 1];
            let mut hh = vec![0.0; cuts.len() + 1];
            for &r in rows {
                let b = usize::from(self.bins[f][r]);
                hg[b] += self.grad[r];
                hh[b] += self.hess[r];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for t in 0..cuts.len() {
                gl += hg[t];
                hl += hh[t];
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.params.min_child_hessian || hr < self.params.min_child_hessian {
                    continue;
                }
                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, f, t));
                }
            }
        }
        let Some((_, feature, t)) = best else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| usize::from(self.bins[feature][r]) <= t);
        let left = self.build(&left_rows, depth + 1);
        let right = self.build(&right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold: self.cuts[feature][t],
            left,
            right,
        };
        id
    }
}

impl BoostedClassifier {
    /// Fits on rows `x` with labels `y`. Single-class data yields a constant
    /// model.
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &BoostParams) -> Self {
        assert_eq!(x.len(), y.len(), "one label per row");
        let n = x.len();
        let n_features = x.first().map_or(0, Vec::len);
        let pos = y.iter().filter(|&&v| v).count() as f64;
        let base_score = ((pos + 0.5) / (n as f64 - pos + 0.5)).ln();
        let mut model = Self {
            n_features,
            base_score,
            trees: Vec::new(),
        };
        if pos == 0.0 || pos == n as f64 {
            return model;
        }
        let cuts: Vec<Vec<f64>> = (0..n_features)
            .map(|f| {
                let mut col: Vec<f64> = x.iter().map(|r| r[f]).collect();
                thresholds(&mut col, params.max_bins)
            })
            .collect();
        let bins: Vec<Vec<u16>> = (0..n_features)
            .map(|f| {
                x.iter()
                    .map(|r| cuts[f].partition_point(|&t| t < r[f]) as u16)
                    .collect()
            })
            .collect();
        let mut score = vec![base_score; n];
        let rows: Vec<usize> = (0..n).collect();
        for _ in 0..params.rounds {
            let p: Vec<f64> = score.iter().map(|&s| sigmoid(s)).collect();
            let grad: Vec<f64> = p
                .iter()
                .zip(y)
                .map(|(&p, &t)| p - f64::from(u8::from(t)))
                .collect();
            let hess: Vec<f64> = p.iter().map(|&p| (p * (1.0 - p)).max(1e-12)).collect();
            let mut b = Builder {
                bins: &bins,
                cuts: &cuts,
                grad: &grad,
                hess: &hess,
                params,
                nodes: Vec::new(),
            };
            b.build(&rows, 0);
            let tree = Tree { nodes: b.nodes };
            for (s, row) in score.iter_mut().zip(x) {
                *s += tree.eval(row);
            }
            model.trees.push(tree);
        }
        model
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.base_score + self.trees.iter().map(|t| t.eval(x)).sum::<f64>())
    }
}
