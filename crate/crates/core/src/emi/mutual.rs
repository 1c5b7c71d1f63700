use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{estimate_density, estimate_joint_density, DensityModel, Obs, DENSITY_FLOOR};
use super::residual::{fit_tree_predictor, whiten, ResidualSeries};
use super::tree::TreeParams;
use crate::data::{EncodedMatrix, RawColumn};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmiParams {
    /// Lag window of the whitening predictors.
    pub window: usize,
    pub tree: TreeParams,
    /// Residual series longer than this are thinned with a fixed stride
    /// before density estimation.
    pub max_samples: usize,
}

impl Default for EmiParams {
    fn default() -> Self {
        EmiParams {
            window: 5,
            tree: TreeParams::default(),
            max_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Sequential,
    Parallel,
}

fn obs(r: &ResidualSeries, t: usize) -> Obs {
    match r {
        ResidualSeries::Continuous(v) => Obs::Value(v[t]),
        ResidualSeries::Discrete { states, .. } => Obs::State(states[t]),
    }
}

/// Average log-ratio of joint to product-of-marginals density over the
/// residual steps.
fn average_log_ratio(
    joint_a: &ResidualSeries,
    joint_b: &ResidualSeries,
    marg_a: &ResidualSeries,
    marg_b: &ResidualSeries,
    max_samples: usize,
) -> Result<f64> {
    let n = joint_a.len();
    let stride = if max_samples > 0 && n > max_samples {
        n.div_ceil(max_samples)
    } else {
        1
    };
    let (ja, jb, ma, mb) = (
        joint_a.strided(stride),
        joint_b.strided(stride),
        marg_a.strided(stride),
        marg_b.strided(stride),
    );
    let joint = estimate_joint_density(&ja, &jb)?;
    let pa = estimate_density(&ma)?;
    let pb = estimate_density(&mb)?;
    let ln = |p: f64| p.max(DENSITY_FLOOR).ln();
    let steps = ja.len();
    let total: f64 = (0..steps)
        .map(|t| {
            let lj = ln(density_pair(&joint, &ja, &jb, t));
            let lm = ln(pa.density(&[obs(&ma, t)])) + ln(pb.density(&[obs(&mb, t)]));
            lj - lm
        })
        .sum();
    Ok(total / steps as f64)
}

fn density_pair(model: &DensityModel, a: &ResidualSeries, b: &ResidualSeries, t: usize) -> f64 {
    model.density(&[obs(a, t), obs(b, t)])
}

/// Content order used to present a pair to the estimators the same way
/// whichever argument comes first. Tree fitting breaks gain ties by
/// feature position, so the order of the joint history matters.
fn column_order(a: &RawColumn, b: &RawColumn) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a, b) {
        (RawColumn::Continuous(x), RawColumn::Continuous(y)) => x
            .iter()
            .zip(y)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal),
        (
            RawColumn::Discrete {
                states: x,
                cardinality: cx,
            },
            RawColumn::Discrete {
                states: y,
                cardinality: cy,
            },
        ) => cx.cmp(cy).then_with(|| x.cmp(y)),
        (RawColumn::Continuous(_), RawColumn::Discrete { .. }) => Ordering::Less,
        (RawColumn::Discrete { .. }, RawColumn::Continuous(_)) => Ordering::Greater,
    }
}

/// Extended mutual information between two columns, in nats per step.
/// Symmetric: the pair is put in a canonical order first.
///
/// Time series are whitened first: marginal predictors give the marginal
/// residuals and a joint predictor over both histories gives the joint
/// residuals. Static columns are treated as i.i.d. samples and used as
/// their own residuals.
pub fn emi_pair(x: &RawColumn, y: &RawColumn, params: &EmiParams, is_timeseries: bool) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let (x, y) = if column_order(x, y).is_gt() { (y, x) } else { (x, y) };
    let n = x.len();
    if !is_timeseries {
        if n < 2 {
            return Err(Error::SeriesTooShort { len: n, needed: 1 });
        }
        let (rx, ry) = (ResidualSeries::from_column(x), ResidualSeries::from_column(y));
        return average_log_ratio(&rx, &ry, &rx, &ry, params.max_samples);
    }
    let w = params.window;
    if n <= w + 1 {
        return Err(Error::SeriesTooShort { len: n, needed: w + 1 });
    }
    let tree = params.tree;
    let px = fit_tree_predictor(&[x], x, w, tree)?;
    let py = fit_tree_predictor(&[y], y, w, tree)?;
    let pxj = fit_tree_predictor(&[x, y], x, w, tree)?;
    let pyj = fit_tree_predictor(&[x, y], y, w, tree)?;
    let ex = whiten(&[x], x, &px)?;
    let ey = whiten(&[y], y, &py)?;
    let exj = whiten(&[x, y], x, &pxj)?;
    let eyj = whiten(&[x, y], y, &pyj)?;
    average_log_ratio(&exj, &eyj, &ex, &ey, params.max_samples)
}

/// Symmetric EMI over raw (pre-one-hot) columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EmiMatrix {
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

impl EmiMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("column");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, n) in self.names.iter().enumerate() {
            out.push_str(n);
            for j in 0..self.dim() {
                let _ = write!(out, ",{}", self.values[[i, j]]);
            }
            out.push('\n');
        }
        out
    }

    /// `colA,colB,emi_value` for every unordered pair `A < B`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            for j in i + 1..self.dim() {
                let _ = writeln!(out, "{},{},{}", self.names[i], self.names[j], self.values[[i, j]]);
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (names, values) = parse_labeled_matrix(text)?;
        Ok(EmiMatrix { names, values })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Parses a square matrix CSV with a header row of names and the name of
/// each row in its first cell.
pub(crate) fn parse_labeled_matrix(text: &str) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let names: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let n = names.len();
    let mut values = Array2::<f64>::zeros((n, n));
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i >= n || rec.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                actual: rec.len(),
            });
        }
        for j in 0..n {
            let cell = &rec[j + 1];
            values[[i, j]] = cell.parse().map_err(|_| Error::UnparsableNumber {
                row: i,
                column: names[j].clone(),
                value: cell.to_string(),
            })?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rows,
        });
    }
    Ok((names, values))
}

/// EMI between every pair of raw columns (discrete columns count once, not
/// per one-hot dimension). Pairs are computed with the lower column index
/// first, and the result does not depend on the schedule.
pub fn build_emi_matrix(
    matrix: &EncodedMatrix,
    names: &[String],
    params: &EmiParams,
    is_timeseries: bool,
    schedule: Schedule,
) -> Result<EmiMatrix> {
    let columns = matrix.decode_columns();
    emi_matrix_from_columns(&columns, names, params, is_timeseries, schedule)
}

pub fn emi_matrix_from_columns(
    columns: &[RawColumn],
    names: &[String],
    params: &EmiParams,
    is_timeseries: bool,
    schedule: Schedule,
) -> Result<EmiMatrix> {
    let m = columns.len();
    if m < 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: m });
    }
    if names.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: names.len(),
        });
    }
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let job = |&(i, j): &(usize, usize)| -> Result<f64> {
        emi_pair(&columns[i], &columns[j], params, is_timeseries).map_err(|e| Error::EmiPair {
            col_a: names[i].clone(),
            col_b: names[j].clone(),
            source: Box::new(e),
        })
    };
    let results: Vec<f64> = match schedule {
        Schedule::Sequential => pairs.iter().map(job).collect::<Result<_>>()?,
        Schedule::Parallel => pairs.par_iter().map(job).collect::<Result<_>>()?,
    };
    let mut values = Array2::<f64>::zeros((m, m));
    for (&(i, j), v) in pairs.iter().zip(results) {
        values[[i, j]] = v;
        values[[j, i]] = v;
    }
    Ok(EmiMatrix {
        names: names.to_vec(),
        values,
    })
}
