//! Correlation-structure graph over encoded feature dimensions and its
//! normalized Laplacian.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::EncodedDim;
use crate::emi::{parse_labeled_matrix, EmiMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// Keep raw-column pairs whose min-max normalized EMI is at least `tau`.
    Threshold { tau: f64 },
    /// Threshold at the median of the normalized off-diagonal EMI.
    MedianThreshold,
    /// Each column keeps its `k` highest-EMI partners; the union is
    /// symmetrized.
    TopK { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyPolicy {
    #[serde(flatten)]
    pub mode: AdjacencyMode,
    /// Weighted edges carry the normalized EMI, unweighted ones weight 1.
    pub weighted: bool,
}

impl Default for AdjacencyPolicy {
    fn default() -> Self {
        AdjacencyPolicy {
            mode: AdjacencyMode::MedianThreshold,
            weighted: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationGraph {
    pub names: Vec<String>,
    pub adjacency: Array2<f64>,
    /// Diagonal of D.
    pub degree: Array1<f64>,
    pub laplacian: Array2<f64>,
}

/// Off-diagonal EMI rescaled to [0, 1]. A constant matrix maps to all ones.
fn normalized_emi(emi: &EmiMatrix) -> Array2<f64> {
    let n = emi.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                lo = lo.min(emi.get(i, j));
                hi = hi.max(emi.get(i, j));
            }
        }
    }
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else if hi > lo {
            (emi.get(i, j) - lo) / (hi - lo)
        } else {
            1.0
        }
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Edge weights between raw columns under `policy`.
pub fn raw_adjacency(emi: &EmiMatrix, policy: &AdjacencyPolicy) -> Result<Array2<f64>> {
    let n = emi.dim();
    for i in 0..n {
        for j in 0..i {
            if (emi.get(i, j) - emi.get(j, i)).abs() > 1e-9 {
                return Err(Error::AsymmetricInput(i, j));
            }
        }
    }
    let norm = normalized_emi(emi);
    let mut keep = Array2::<bool>::from_elem((n, n), false);
    let threshold = |tau: f64, keep: &mut Array2<bool>| {
        for i in 0..n {
            for j in 0..n {
                keep[[i, j]] = i != j && norm[[i, j]] >= tau;
            }
        }
    };
    match policy.mode {
        AdjacencyMode::Threshold { tau } => {
            if !(tau >= 0.0) {
                return Err(Error::InvalidConfig(format!("threshold {tau} must be >= 0")));
            }
            threshold(tau, &mut keep);
        }
        AdjacencyMode::MedianThreshold => {
            let upper = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| norm[[i, j]])
                .collect();
            threshold(median(upper), &mut keep);
        }
        AdjacencyMode::TopK { k } => {
            if k == 0 {
                return Err(Error::InvalidConfig("top-k needs k >= 1".into()));
            }
            for i in 0..n {
                let mut partners: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                partners.sort_by(|&a, &b| emi.get(i, b).total_cmp(&emi.get(i, a)).then(a.cmp(&b)));
                for &j in partners.iter().take(k) {
                    keep[[i, j]] = true;
                    keep[[j, i]] = true;
                }
            }
        }
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        if keep[[i, j]] {
            if policy.weighted {
                norm[[i, j]]
            } else {
                1.0
            }
        } else {
            0.0
        }
    }))
}

/// Lifts raw-column edges to encoded dimensions: each dimension inherits its
/// source column's edges and one-hot siblings are joined with weight 1.
pub fn build_adjacency(emi: &EmiMatrix, feature_map: &[EncodedDim], policy: &AdjacencyPolicy) -> Result<Array2<f64>> {
    let raw = raw_adjacency(emi, policy)?;
    let m = feature_map.len();
    if let Some(bad) = feature_map.iter().find(|d| d.column >= emi.dim()) {
        return Err(Error::DimensionMismatch {
            expected: emi.dim(),
            actual: bad.column + 1,
        });
    }
    let a = Array2::from_shape_fn((m, m), |(i, j)| {
        let (ci, cj) = (feature_map[i].column, feature_map[j].column);
        if i == j {
            0.0
        } else if ci == cj {
            1.0
        } else {
            raw[[ci, cj]]
        }
    });
    if a.iter().all(|&w| w == 0.0) {
        log::warn!("correlation graph has no edges");
    }
    Ok(a)
}

/// `L = I - D^{-1/2} A D^{-1/2}`; isolated nodes get `L_ii = 1` and zero
/// off-diagonals.
pub fn normalized_laplacian(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, cols) = a.dim();
    if n != cols {
        return Err(Error::ShapeMismatch {
            op: "normalized_laplacian",
            lhs: (n, cols),
            rhs: (cols, n),
        });
    }
    for i in 0..n {
        for j in 0..n {
            if a[[i, j]] < 0.0 || !a[[i, j]].is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "adjacency entry ({i}, {j}) = {} is not a nonnegative weight",
                    a[[i, j]]
                )));
            }
            if j < i && a[[i, j]] != a[[j, i]] {
                return Err(Error::AsymmetricInput(i, j));
            }
        }
    }
    let inv_sqrt: Vec<f64> = a
        .rows()
        .into_iter()
        .map(|r| {
            let d: f64 = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        // canonical operand order keeps L bitwise symmetric
        let (p, q) = (i.min(j), i.max(j));
        let off = a[[p, q]] * (inv_sqrt[p] * inv_sqrt[q]);
        if i == j {
            1.0 - off
        } else {
            -off
        }
    }))
}

impl CorrelationGraph {
    pub fn from_adjacency(names: Vec<String>, adjacency: Array2<f64>) -> Result<Self> {
        if names.len() != adjacency.nrows() {
            return Err(Error::DimensionMismatch {
                expected: adjacency.nrows(),
                actual: names.len(),
            });
        }
        let laplacian = normalized_laplacian(&adjacency)?;
        let degree = adjacency.sum_axis(ndarray::Axis(1));
        Ok(CorrelationGraph {
            names,
            adjacency,
            degree,
            laplacian,
        })
    }

    pub fn build(
        emi: &EmiMatrix,
        feature_map: &[EncodedDim],
        names: Vec<String>,
        policy: &AdjacencyPolicy,
    ) -> Result<Self> {
        let a = build_adjacency(emi, feature_map, policy)?;
        Self::from_adjacency(names, a)
    }

    /// Graph without edges; its Laplacian is the identity.
    pub fn empty(names: Vec<String>) -> Self {
        let m = names.len();
        Self::from_adjacency(names, Array2::zeros((m, m))).expect("empty graph is valid")
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[[i, j]] != 0.0)
            .count()
    }

    pub fn adjacency_csv(&self) -> String {
        let mut out = String::from("node");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, n) in self.names.iter().enumerate() {
            out.push_str(n);
            for j in 0..self.dim() {
                let _ = write!(out, ",{}", self.adjacency[[i, j]]);
            }
            out.push('\n');
        }
        out
    }

    /// `nodeA,nodeB,weight` for each nonzero edge with `A < B`.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            for j in i + 1..self.dim() {
                let w = self.adjacency[[i, j]];
                if w != 0.0 {
                    let _ = writeln!(out, "{},{},{}", self.names[i], self.names[j], w);
                }
            }
        }
        out
    }

    pub fn from_adjacency_csv(text: &str) -> Result<Self> {
        let (names, a) = parse_labeled_matrix(text)?;
        Self::from_adjacency(names, a)
    }

    /// Rebuilds from an edge list over the given node names.
    pub fn from_edge_list(names: Vec<String>, text: &str) -> Result<Self> {
        let n = names.len();
        let index = |s: &str| {
            names
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| Error::MissingColumn(s.to_string()))
        };
        let mut a = Array2::<f64>::zeros((n, n));
        for (row, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut parts = line.rsplitn(2, ',');
            let w = parts.next().unwrap_or("");
            let pair = parts.next().unwrap_or("");
            let (u, v) = pair
                .split_once(',')
                .ok_or_else(|| Error::InvalidConfig(format!("edge list line {row} is not `a,b,w`")))?;
            let w: f64 = w.parse().map_err(|_| Error::UnparsableNumber {
                row,
                column: "weight".into(),
                value: w.to_string(),
            })?;
            let (i, j) = (index(u)?, index(v)?);
            a[[i, j]] = w;
            a[[j, i]] = w;
        }
        Self::from_adjacency(names, a)
    }

    pub fn write(&self, adjacency_path: &Path, edges_path: &Path) -> Result<()> {
        std::fs::write(adjacency_path, self.adjacency_csv()).map_err(|e| Error::io(adjacency_path, e))?;
        std::fs::write(edges_path, self.edge_list()).map_err(|e| Error::io(edges_path, e))
    }

    pub fn read(adjacency_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(adjacency_path).map_err(|e| Error::io(adjacency_path, e))?;
        Self::from_adjacency_csv(&text)
    }
}
