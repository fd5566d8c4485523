/// A node of an axis-aligned regression tree. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub(crate) fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Longest root-to-leaf path in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) struct Grower<'a> {
    pub columns: &'a [Vec<f64>],
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    /// Grow one tree on `residuals`. `sorted[f]` lists all sample indices in
    /// ascending order of feature `f`.
    pub fn grow(&self, sorted: &[Vec<u32>], residuals: &[f64]) -> Tree {
        let mut nodes = Vec::new();
        self.build(sorted.to_vec(), residuals, 0, &mut nodes);
        Tree { nodes }
    }

    fn build(&self, sorted: Vec<Vec<u32>>, residuals: &[f64], depth: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let members = &sorted[0];
        let n = members.len();
        let sum: f64 = members.iter().map(|&i| residuals[i as usize]).sum();
        let mean = sum / n as f64;
        nodes.push(Node::Leaf { value: mean });

        if depth >= self.max_depth || n < 2 * self.min_samples_leaf {
            return id;
        }
        let Some(choice) = self.best_split(&sorted, residuals, sum) else {
            return id;
        };

        let col = &self.columns[choice.feature];
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = sorted
            .into_iter()
            .map(|list| list.into_iter().partition(|&i| col[i as usize] <= choice.threshold))
            .unzip();

        let l = self.build(left, residuals, depth + 1, nodes);
        let r = self.build(right, residuals, depth + 1, nodes);
        nodes[id] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn best_split(&self, sorted: &[Vec<u32>], residuals: &[f64], sum: f64) -> Option<SplitChoice> {
        let n = sorted[0].len();
        let sumsq: f64 = sorted[0].iter().map(|&i| residuals[i as usize].powi(2)).sum();
        let parent = sum * sum / n as f64;
        // splits that only shuffle rounding noise are not splits
        let min_gain = 1e-12 * sumsq + f64::MIN_POSITIVE;
        let mut best: Option<SplitChoice> = None;

        for (feature, list) in sorted.iter().enumerate() {
            let col = &self.columns[feature];
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                let i = list[k] as usize;
                left_sum += residuals[i];
                let nl = k + 1;
                let nr = n - nl;
                if nl < self.min_samples_leaf {
                    continue;
                }
                if nr < self.min_samples_leaf {
                    break;
                }
                let v = col[i];
                let v_next = col[list[k + 1] as usize];
                if v == v_next {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - parent;
                if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (v + v_next);
                    if threshold >= v_next {
                        threshold = v;
                    }
                    best = Some(SplitChoice {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}
