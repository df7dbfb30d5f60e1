use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineError, Result};
use crate::parallel::{derive_seed, map_indexed, Execution};
use crate::training::class_weight_vector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    /// `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    /// Weight classes by `N / (C * n_c)` inside the impurity.
    pub balanced: bool,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            features_per_split: None,
            balanced: true,
            bootstrap: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A CART classification tree with weighted Gini splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(c) => return c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((at, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { left, right, .. } = self.nodes[at] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_classes: usize,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Majority vote over trees; the lowest class index wins ties.
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict_row(row)] += 1;
        }
        argmax_first(votes.iter().map(|&v| v as f64))
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<usize> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn gini(w: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - w.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

struct Fit<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    /// Class weight times bootstrap multiplicity.
    w: Vec<f64>,
    n_classes: usize,
    k: usize,
    max_depth: Option<usize>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    /// Position in the sorted sample list where the right child starts.
    cut: usize,
    order: Vec<usize>,
}

impl Fit<'_> {
    fn class_weights(&self, samples: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for &i in samples {
            out[self.y[i]] += self.w[i];
        }
        out
    }

    fn best_split_on(&self, samples: &[usize], feature: usize) -> Option<(f64, SplitChoice)> {
        let mut order = samples.to_vec();
        order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]).then(a.cmp(&b)));
        let parent = self.class_weights(samples);
        let total: f64 = parent.iter().sum();
        let base = total * gini(&parent, total);
        let mut left = vec![0.0; self.n_classes];
        let mut lw = 0.0;
        let mut best: Option<(f64, usize)> = None;
        for pos in 1..order.len() {
            let prev = order[pos - 1];
            left[self.y[prev]] += self.w[prev];
            lw += self.w[prev];
            let (a, b) = (self.x[prev][feature], self.x[order[pos]][feature]);
            if a == b {
                continue;
            }
            let right: Vec<f64> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let rw = total - lw;
            let gain = base - lw * gini(&left, lw) - rw * gini(&right, rw);
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, pos));
            }
        }
        best.map(|(gain, cut)| {
            let threshold = (self.x[order[cut - 1]][feature] + self.x[order[cut]][feature]) / 2.0;
            (
                gain,
                SplitChoice {
                    feature,
                    threshold,
                    cut,
                    order,
                },
            )
        })
    }

    fn choose(&self, samples: &[usize], rng: &mut ChaCha8Rng) -> Option<SplitChoice> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let mut best: Option<(f64, SplitChoice)> = None;
        // keep drawing past k while no candidate feature varies
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.k && best.is_some() {
                break;
            }
            if let Some((gain, choice)) = self.best_split_on(samples, f) {
                if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                    best = Some((gain, choice));
                }
            }
        }
        best.map(|(_, c)| c)
    }

    fn grow(&self, samples: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = vec![Node::Leaf(0)];
        let mut stack = vec![(0usize, samples, 0usize)];
        while let Some((at, samples, depth)) = stack.pop() {
            let cw = self.class_weights(&samples);
            let majority = argmax_first(cw.iter().copied());
            let pure = cw.iter().filter(|&&w| w > 0.0).count() <= 1;
            let capped = self.max_depth.is_some_and(|m| depth >= m);
            let split = if pure || capped || samples.len() < 2 {
                None
            } else {
                self.choose(&samples, rng)
            };
            match split {
                None => nodes[at] = Node::Leaf(majority),
                Some(c) => {
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf(0));
                    nodes.push(Node::Leaf(0));
                    nodes[at] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: l,
                        right: r,
                    };
                    let right = c.order[c.cut..].to_vec();
                    let mut left = c.order;
                    left.truncate(c.cut);
                    stack.push((r, right, depth + 1));
                    stack.push((l, left, depth + 1));
                }
            }
        }
        Tree { nodes }
    }
}

/// Bootstrap-sampled CART trees with per-split feature subsampling. Trees are
/// grown independently (in parallel under `exec`) from per-tree seeds.
pub fn forest_fit(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    config: &ForestConfig,
    seed: u64,
    exec: Execution,
) -> Result<Forest> {
    if config.n_trees == 0 {
        return Err(BaselineError::Input("a forest needs at least one tree".into()));
    }
    if x.is_empty() || x.len() != y.len() {
        return Err(BaselineError::Input(format!("{} rows with {} labels", x.len(), y.len())));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(BaselineError::Input("rows must share a non-zero width".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(BaselineError::Input("features must be finite".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(BaselineError::Input(format!("label {bad} out of range for {n_classes} classes")));
    }
    let class_w = if config.balanced {
        class_weight_vector(y, n_classes)?
    } else {
        vec![1.0; n_classes]
    };
    let k = config
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let trees = map_indexed(exec, config.n_trees, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 30, t as u64));
        let mut mult = vec![0usize; x.len()];
        if config.bootstrap {
            for _ in 0..x.len() {
                mult[rng.gen_range(0..x.len())] += 1;
            }
        } else {
            mult.fill(1);
        }
        let fit = Fit {
            x,
            y,
            w: mult.iter().zip(y).map(|(&m, &c)| m as f64 * class_w[c]).collect(),
            n_classes,
            k,
            max_depth: config.max_depth,
        };
        let samples: Vec<usize> = (0..x.len()).filter(|&i| mult[i] > 0).collect();
        fit.grow(samples, &mut rng)
    });
    Ok(Forest {
        n_classes,
        n_features: d,
        trees,
    })
}
