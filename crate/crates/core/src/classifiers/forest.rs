//! Random forest of Gini-impurity decision trees grown on bootstrap samples.

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ClassProbs;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Bootstrap class counts that reached this leaf.
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: Vec<String>,
    pub n_features: usize,
    /// Features examined per split: ceil(sqrt(n_features)).
    pub max_features: usize,
    pub seed: u64,
    pub trees: Vec<DecisionTree>,
}

fn gini(counts: &[u32], total: u32) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = f64::from(total);
    1.0 - counts.iter().map(|&c| (f64::from(c) / t).powi(2)).sum::<f64>()
}

struct Grower<'a, R> {
    x: &'a Array2<f64>,
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> Grower<'_, R> {
    fn counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    /// Best `(feature, threshold, weighted child impurity)` strictly below
    /// the parent impurity, if any.
    fn best_split(&mut self, rows: &[usize], parent: f64) -> Option<(usize, f64, f64)> {
        let n_features = self.x.ncols();
        let candidates = sample(&mut self.rng, n_features, self.max_features.min(n_features));
        let n = rows.len() as u32;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(rows.len());

        for feature in candidates.iter() {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x[[r, feature]], self.y[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut left = vec![0u32; self.n_classes];
            let mut right = vec![0u32; self.n_classes];
            for &(_, c) in &sorted {
                right[c] += 1;
            }
            for i in 0..sorted.len() - 1 {
                let (v, c) = sorted[i];
                left[c] += 1;
                right[c] -= 1;
                let next = sorted[i + 1].0;
                if next <= v {
                    continue;
                }
                let nl = i as u32 + 1;
                let nr = n - nl;
                let impurity =
                    (f64::from(nl) * gini(&left, nl) + f64::from(nr) * gini(&right, nr)) / f64::from(n);
                let bound = best.map_or(parent, |b| b.2);
                if impurity < bound {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some((feature, threshold, impurity));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>) -> usize {
        let counts = self.counts(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        let parent = gini(&counts, rows.len() as u32);
        if parent == 0.0 {
            return id;
        }
        let Some((feature, threshold, _)) = self.best_split(&rows, parent) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[[i, feature]] <= threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    pub fn leaf_counts(&self, x: ArrayView1<'_, f64>) -> &[u32] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

impl ForestModel {
    pub fn fit(matrix: &Array2<f64>, labels: &[String], cfg: &ForestConfig) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || labels.len() != n {
            return Err(Error::InvalidArgument(format!(
                "forest needs matching non-empty rows and labels ({n} vs {})",
                labels.len()
            )));
        }
        if cfg.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be positive".into()));
        }
        let mut classes = labels.to_vec();
        classes.sort();
        classes.dedup();
        let y: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label present"))
            .collect();
        let max_features = ((matrix.ncols() as f64).sqrt().ceil() as usize).max(1);

        let trees = par::map_range(cfg.n_trees, |t| {
            let mut rng = seeded(derive_seed(cfg.seed, &[t as u64]));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut grower = Grower {
                x: matrix,
                y: &y,
                n_classes: classes.len(),
                max_features,
                rng,
                nodes: Vec::new(),
            };
            grower.grow(rows);
            DecisionTree { nodes: grower.nodes }
        });

        Ok(ForestModel {
            classes,
            n_features: matrix.ncols(),
            max_features,
            seed: cfg.seed,
            trees,
        })
    }

    /// Mean over trees of each leaf's class distribution.
    pub fn predict_proba(&self, x: &[f64]) -> Result<ClassProbs> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        let view = ArrayView1::from(x);
        let mut acc = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            let counts = tree.leaf_counts(view);
            let total: u32 = counts.iter().sum();
            for (a, &c) in acc.iter_mut().zip(counts) {
                *a += f64::from(c) / f64::from(total);
            }
        }
        let n = self.trees.len() as f64;
        Ok(self
            .classes
            .iter()
            .zip(acc)
            .map(|(c, a)| (c.clone(), a / n))
            .collect())
    }
}

pub fn forest_fit(data: &LabeledDataset, cfg: &ForestConfig) -> Result<ForestModel> {
    ForestModel::fit(&data.matrix, &data.labels, cfg)
}
