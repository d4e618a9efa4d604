//! Random-forest regression with per-leaf variance.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_training_set, ModelError, Prediction, Surrogate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForestPreset {
    /// Algorithm configuration: bootstrapped, feature-subsampled, larger leaves.
    Ac,
    /// Hyperparameter optimization: every point in every tree, all features.
    Hpo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Fraction of features considered at each split.
    pub feature_ratio: f64,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl ForestConfig {
    pub fn preset(preset: ForestPreset) -> Self {
        match preset {
            ForestPreset::Ac => Self {
                n_trees: 10,
                bootstrap: true,
                feature_ratio: 5.0 / 6.0,
                min_samples_split: 3,
                min_samples_leaf: 3,
            },
            ForestPreset::Hpo => Self {
                n_trees: 10,
                bootstrap: false,
                feature_ratio: 1.0,
                min_samples_split: 2,
                min_samples_leaf: 1,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf {
    pub mean: f64,
    pub variance: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Leaf),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> &Leaf {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(l) => return l,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            _ => None,
        })
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: &'a ForestConfig,
    n_features: usize,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
}

fn leaf_of(y: &[f64], idx: &[usize]) -> Leaf {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let variance = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>() / n;
    Leaf {
        mean,
        variance,
        count: idx.len(),
    }
}

impl Builder<'_> {
    fn build(&mut self, idx: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let leaf = leaf_of(self.y, &idx);
        self.nodes.push(Node::Leaf(leaf));
        if idx.len() < self.cfg.min_samples_split || leaf.variance <= 0.0 {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.build(l);
        let right = self.build(r);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Best variance-reducing split over a random feature subset; the
    /// threshold is drawn uniformly inside the winning gap.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = sample(self.rng, d, self.n_features).into_vec();
        features.sort_unstable();
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total * total / n as f64;

        let mut best: Option<(f64, usize, f64, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let yi = self.y[order[k]];
                s += yi;
                sq += yi * yi;
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                let nl = k + 1;
                let nr = n - nl;
                if lo == hi || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let sse = (sq - s * s / nl as f64) + ((total_sq - sq) - (total - s).powi(2) / nr as f64);
                let gain = parent_sse - sse;
                if best.is_none_or(|b| gain > b.0 + 1e-12 * parent_sse.abs().max(1e-300)) {
                    best = Some((gain, f, lo, hi));
                }
            }
        }
        let (gain, f, lo, hi) = best?;
        if gain <= 0.0 {
            return None;
        }
        let u: f64 = self.rng.random();
        let t = lo + u * (hi - lo);
        Some((f, if t < hi { t } else { lo }))
    }
}

/// A fitted forest.
#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree>,
    dim: usize,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &ForestConfig, seed: u64) -> Result<RandomForest, ModelError> {
        let dim = check_training_set(x, y, 2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_features = ((dim as f64 * config.feature_ratio).ceil() as usize).clamp(1, dim.max(1));
        let n = x.len();
        let mut trees = Vec::with_capacity(config.n_trees);
        for _ in 0..config.n_trees.max(1) {
            let idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                x,
                y,
                cfg: config,
                n_features,
                rng: &mut rng,
                nodes: Vec::new(),
            };
            b.build(idx);
            trees.push(Tree { nodes: b.nodes });
        }
        Ok(RandomForest { trees, dim })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Combines per-tree leaves by the law of total variance.
    pub fn combine(leaves: &[Leaf]) -> Prediction {
        let k = leaves.len() as f64;
        let mean = leaves.iter().map(|l| l.mean).sum::<f64>() / k;
        let within = leaves.iter().map(|l| l.variance).sum::<f64>() / k;
        let between = leaves.iter().map(|l| (l.mean - mean).powi(2)).sum::<f64>() / k;
        Prediction {
            mean,
            variance: (within + between).max(0.0),
        }
    }
}

impl Surrogate for RandomForest {
    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        if x.len() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let leaves: Vec<Leaf> = self.trees.iter().map(|t| *t.leaf(x)).collect();
        Ok(Self::combine(&leaves))
    }
}
