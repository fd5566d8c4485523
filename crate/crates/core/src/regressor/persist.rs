//! Text dump of a boosted ensemble.
//!
//! ```text
//! gbt-model v1
//! feature_count 4
//! seed 0
//! n_trees 100
//! max_depth 3
//! learning_rate 0.1
//! min_samples_leaf 2
//! base_value -0.0123
//! tree 0 3
//! split 2 7.5 1 2
//! leaf 0.004
//! leaf -0.001
//! ...
//! end
//! ```
//!
//! Numbers use Rust's shortest round-trip float formatting, so a dump reloads
//! to a bit-identical model.

use std::fmt::Write as _;
use std::path::Path;

use super::{GbtHyperparams, GbtModel, Node, Tree};
use crate::error::{Error, Result};

const MAGIC: &str = "gbt-model v1";

impl GbtModel {
    pub fn to_text(&self) -> String {
        let hp = &self.hyperparams;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "feature_count {}", self.feature_count);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "n_trees {}", hp.n_trees);
        let _ = writeln!(s, "max_depth {}", hp.max_depth);
        let _ = writeln!(s, "learning_rate {}", hp.learning_rate);
        let _ = writeln!(s, "min_samples_leaf {}", hp.min_samples_leaf);
        let _ = writeln!(s, "base_value {}", self.base_value);
        for (t, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(s, "tree {t} {}", tree.nodes.len());
            for node in &tree.nodes {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(s, "split {feature} {threshold} {left} {right}");
                    }
                    Node::Leaf { value } => {
                        let _ = writeln!(s, "leaf {value}");
                    }
                }
            }
        }
        s.push_str("end\n");
        s
    }

    /// Parse a dump produced by [`GbtModel::to_text`]. Trailing content after
    /// `end` is ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::ModelStore(format!("unexpected end of model dump, expected {what}")))
        };
        if next("header")? != MAGIC {
            return Err(Error::ModelStore(format!("not a `{MAGIC}` dump")));
        }
        let feature_count: usize = keyed(next("feature_count")?, "feature_count")?;
        let seed: u64 = keyed(next("seed")?, "seed")?;
        let n_trees: usize = keyed(next("n_trees")?, "n_trees")?;
        let max_depth: usize = keyed(next("max_depth")?, "max_depth")?;
        let learning_rate: f64 = keyed(next("learning_rate")?, "learning_rate")?;
        let min_samples_leaf: usize = keyed(next("min_samples_leaf")?, "min_samples_leaf")?;
        let base_value: f64 = keyed(next("base_value")?, "base_value")?;
        let hyperparams = GbtHyperparams {
            n_trees,
            max_depth,
            learning_rate,
            min_samples_leaf,
        };
        hyperparams.validate().map_err(|e| Error::ModelStore(e.to_string()))?;

        let mut trees = Vec::new();
        loop {
            let line = next("tree or end")?;
            if line == "end" {
                break;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "tree" {
                return Err(Error::ModelStore(format!("bad tree header `{line}`")));
            }
            let count: usize = num(parts[2])?;
            let mut nodes = Vec::with_capacity(count);
            for _ in 0..count {
                let line = next("node")?;
                let p: Vec<&str> = line.split_whitespace().collect();
                let node = match p.as_slice() {
                    ["leaf", v] => Node::Leaf { value: num(v)? },
                    ["split", f, t, l, r] => Node::Split {
                        feature: num(f)?,
                        threshold: num(t)?,
                        left: num(l)?,
                        right: num(r)?,
                    },
                    _ => return Err(Error::ModelStore(format!("bad node `{line}`"))),
                };
                nodes.push(node);
            }
            for node in &nodes {
                if let Node::Split {
                    feature, left, right, ..
                } = node
                {
                    if *feature >= feature_count || *left >= count || *right >= count {
                        return Err(Error::ModelStore("node index out of range".into()));
                    }
                }
            }
            trees.push(Tree { nodes });
        }
        Ok(GbtModel {
            base_value,
            trees,
            hyperparams,
            feature_count,
            seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|_| Error::MissingModel(path.display().to_string()))?;
        Self::from_text(&text)
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::ModelStore(format!("cannot parse `{s}`")))
}

fn keyed<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    match line.split_once(' ') {
        Some((k, v)) if k == key => num(v.trim()),
        _ => Err(Error::ModelStore(format!("expected `{key} <value>`, found `{line}`"))),
    }
}
