//! Least-squares gradient-boosted regression trees.
//!
//! Plain residual fitting: every tree is grown on the current residuals with an
//! exhaustive split search (all features, midpoints between consecutive
//! distinct values), leaves hold the mean residual, and the ensemble adds
//! `learning_rate · leaf` per tree. No row or column subsampling and no
//! regularization, so a fit is fully determined by its data and
//! hyperparameters.

mod persist;
mod tree;

use crate::error::{Error, Result};

pub use tree::{Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtHyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl GbtHyperparams {
    pub fn new(n_trees: usize, max_depth: usize, learning_rate: f64) -> Result<Self> {
        let hp = Self {
            n_trees,
            max_depth,
            learning_rate,
            min_samples_leaf: 2,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Indoor humidity sub-models: 300 trees, depth 5, learning rate 0.05.
    pub fn humidity() -> Self {
        Self {
            n_trees: 300,
            max_depth: 5,
            learning_rate: 0.05,
            min_samples_leaf: 2,
        }
    }

    /// Coil effectiveness residual: 100 trees, depth 3, learning rate 0.1.
    pub fn coil_residual() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be >= 1"));
        }
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "learning_rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be >= 1"));
        }
        Ok(())
    }
}

/// A fitted boosted ensemble. Immutable after [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub(crate) base_value: f64,
    pub(crate) trees: Vec<Tree>,
    pub(crate) hyperparams: GbtHyperparams,
    pub(crate) feature_count: usize,
    pub(crate) seed: u64,
}

impl GbtModel {
    /// A model with no trees; predicts `base_value` everywhere.
    pub fn constant(base_value: f64, feature_count: usize, hyperparams: GbtHyperparams) -> Self {
        Self {
            base_value,
            trees: Vec::new(),
            hyperparams,
            feature_count,
            seed: 0,
        }
    }

    pub fn base_value(&self) -> f64 {
        self.base_value
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn hyperparams(&self) -> &GbtHyperparams {
        &self.hyperparams
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                actual: features.len(),
            });
        }
        Ok(self.predict_staged(features, self.trees.len()))
    }

    /// Prediction using only the first `n_trees` trees.
    pub fn predict_staged(&self, features: &[f64], n_trees: usize) -> f64 {
        let lr = self.hyperparams.learning_rate;
        self.trees[..n_trees.min(self.trees.len())]
            .iter()
            .fold(self.base_value, |acc, t| acc + lr * t.leaf_value(features))
    }

    /// Training-set MSE after 0, 1, …, n trees.
    pub fn staged_mse(&self, features: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
        let lr = self.hyperparams.learning_rate;
        let mut preds = vec![self.base_value; targets.len()];
        let mse = |p: &[f64]| p.iter().zip(targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / targets.len() as f64;
        let mut out = vec![mse(&preds)];
        for tree in &self.trees {
            for (p, x) in preds.iter_mut().zip(features) {
                *p += lr * tree.leaf_value(x);
            }
            out.push(mse(&preds));
        }
        out
    }

    /// Deepest root-to-leaf path (edges) over all trees.
    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }
}

/// Fit a boosted ensemble on row-major `features` (n × d) and `targets` (n).
///
/// The seed is recorded in the model; the algorithm itself has no random
/// component.
pub fn fit(features: &[Vec<f64>], targets: &[f64], hp: GbtHyperparams, seed: u64) -> Result<GbtModel> {
    hp.validate()?;
    let n = targets.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            model: "gradient-boosted regressor",
            required: 2,
            actual: n,
        });
    }
    if features.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: features.len(),
        });
    }
    let d = features[0].len();
    if d == 0 {
        return Err(Error::invalid("feature rows are empty"));
    }
    for (i, row) in features.iter().enumerate() {
        if row.len() != d {
            return Err(Error::invalid(format!(
                "row {i} has {} features, expected {d}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {i} contains a non-finite feature")));
        }
    }
    if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("target {i} is not finite")));
    }

    let base_value = if targets.iter().all(|&y| y == targets[0]) {
        targets[0]
    } else {
        targets.iter().sum::<f64>() / n as f64
    };

    let columns: Vec<Vec<f64>> = (0..d).map(|f| features.iter().map(|row| row[f]).collect()).collect();
    let sorted: Vec<Vec<u32>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut residuals: Vec<f64> = targets.iter().map(|y| y - base_value).collect();
    let mut trees = Vec::with_capacity(hp.n_trees);
    let grower = tree::Grower {
        columns: &columns,
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
    };
    for _ in 0..hp.n_trees {
        let tree = grower.grow(&sorted, &residuals);
        for (r, row) in residuals.iter_mut().zip(features) {
            *r -= hp.learning_rate * tree.leaf_value(row);
        }
        trees.push(tree);
    }

    Ok(GbtModel {
        base_value,
        trees,
        hyperparams: hp,
        feature_count: d,
        seed,
    })
}
