//! Greedy CART trees used as one-step-ahead predictors for whitening.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeKind {
    Regression,
    Classification { n_classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    kind: TreeKind,
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Fits on rows of `x` against `y`. Classification targets are class ids
    /// stored as `f64`.
    pub fn fit(x: &Array2<f64>, y: &[f64], kind: TreeKind, params: TreeParams) -> Self {
        assert_eq!(x.nrows(), y.len(), "feature rows and targets must align");
        assert!(!y.is_empty(), "cannot fit a tree on zero samples");
        let mut builder = Builder {
            x,
            y,
            kind,
            params,
            nodes: Vec::new(),
        };
        let idx: Vec<usize> = (0..y.len()).collect();
        builder.grow(idx, 0);
        DecisionTree {
            kind,
            nodes: builder.nodes,
        }
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    y: &'a [f64],
    kind: TreeKind,
    params: TreeParams,
    nodes: Vec<Node>,
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&idx),
        });
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf.max(1) || self.is_pure(&idx) {
            return id;
        }
        let Some(best) = self.best_split(&idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[[i, best.feature]] <= best.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        match self.kind {
            TreeKind::Regression => idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64,
            TreeKind::Classification { n_classes } => {
                let mut counts = vec![0usize; n_classes];
                for &i in idx {
                    counts[self.y[i] as usize] += 1;
                }
                // ties go to the lowest class id
                let mut best = 0;
                for (c, &n) in counts.iter().enumerate() {
                    if n > counts[best] {
                        best = c;
                    }
                }
                best as f64
            }
        }
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        let first = self.y[idx[0]];
        match self.kind {
            TreeKind::Classification { .. } => idx.iter().all(|&i| self.y[i] == first),
            TreeKind::Regression => {
                let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
                let sse: f64 = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
                sse <= 1e-12 * idx.len() as f64
            }
        }
    }

    /// Split maximizing the impurity decrease. Scores are the "between"
    /// term (sum of squared side totals over side sizes), larger is better.
    fn best_split(&self, idx: &[usize]) -> Option<Candidate> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let parent = self.score(idx.iter().copied(), n);
        let mut best: Option<Candidate> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.ncols() {
            order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]).then(a.cmp(&b)));
            let mut scan = Scan::new(self.kind, self.y, &order);
            for split in 1..n {
                scan.push(order[split - 1]);
                if split < min_leaf || n - split < min_leaf {
                    continue;
                }
                let lo = self.x[[order[split - 1], f]];
                let hi = self.x[[order[split], f]];
                if lo == hi {
                    continue;
                }
                let score = scan.score(split, n);
                let improves = score > parent + 1e-12 * parent.abs().max(1.0);
                if improves && best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        score,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn score(&self, idx: impl Iterator<Item = usize>, n: usize) -> f64 {
        match self.kind {
            TreeKind::Regression => {
                let s: f64 = idx.map(|i| self.y[i]).sum();
                s * s / n as f64
            }
            TreeKind::Classification { n_classes } => {
                let mut counts = vec![0f64; n_classes];
                for i in idx {
                    counts[self.y[i] as usize] += 1.0;
                }
                counts.iter().map(|c| c * c).sum::<f64>() / n as f64
            }
        }
    }
}

/// Running left/right sufficient statistics for one sorted feature.
struct Scan<'a> {
    y: &'a [f64],
    stats: ScanStats,
}

enum ScanStats {
    Regression { left: f64, total: f64 },
    Classification { left: Vec<f64>, total: Vec<f64> },
}

impl<'a> Scan<'a> {
    fn new(kind: TreeKind, y: &'a [f64], order: &[usize]) -> Self {
        let stats = match kind {
            TreeKind::Regression => ScanStats::Regression {
                left: 0.0,
                total: order.iter().map(|&i| y[i]).sum(),
            },
            TreeKind::Classification { n_classes } => {
                let mut total = vec![0.0; n_classes];
                for &i in order {
                    total[y[i] as usize] += 1.0;
                }
                ScanStats::Classification {
                    left: vec![0.0; n_classes],
                    total,
                }
            }
        };
        Scan { y, stats }
    }

    fn push(&mut self, i: usize) {
        match &mut self.stats {
            ScanStats::Regression { left, .. } => *left += self.y[i],
            ScanStats::Classification { left, .. } => left[self.y[i] as usize] += 1.0,
        }
    }

    fn score(&self, split: usize, n: usize) -> f64 {
        let (nl, nr) = (split as f64, (n - split) as f64);
        match &self.stats {
            ScanStats::Regression { left, total } => {
                let right = total - left;
                left * left / nl + right * right / nr
            }
            ScanStats::Classification { left, total } => {
                let l: f64 = left.iter().map(|c| c * c).sum();
                let r: f64 = left.iter().zip(total).map(|(a, t)| (t - a) * (t - a)).sum();
                l / nl + r / nr
            }
        }
    }
}
