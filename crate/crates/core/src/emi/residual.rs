//! Temporal whitening: a tree predicts each step from a lagged window and the
//! residual between prediction and observation is kept.

use ndarray::Array2;

use super::tree::{DecisionTree, TreeKind, TreeParams};
use crate::data::RawColumn;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ResidualSeries {
    Continuous(Vec<f64>),
    Discrete { states: Vec<usize>, alphabet: usize },
}

impl ResidualSeries {
    pub fn len(&self) -> usize {
        match self {
            ResidualSeries::Continuous(v) => v.len(),
            ResidualSeries::Discrete { states, .. } => states.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Raw values taken as residuals directly (no temporal model).
    pub fn from_column(col: &RawColumn) -> Self {
        match col {
            RawColumn::Continuous(v) => ResidualSeries::Continuous(v.clone()),
            RawColumn::Discrete { states, cardinality } => ResidualSeries::Discrete {
                states: states.clone(),
                alphabet: *cardinality,
            },
        }
    }

    /// Keeps every `stride`-th element.
    pub fn strided(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        match self {
            ResidualSeries::Continuous(v) => ResidualSeries::Continuous(v.iter().copied().step_by(stride).collect()),
            ResidualSeries::Discrete { states, alphabet } => ResidualSeries::Discrete {
                states: states.iter().copied().step_by(stride).collect(),
                alphabet: *alphabet,
            },
        }
    }
}

/// Alphabet size of discrete residuals for a variable with `m` states.
pub fn residual_alphabet(m: usize) -> usize {
    m * m - m + 1
}

/// Encodes the one-hot difference `actual - predicted` as a state id.
///
/// Ordered pairs with `predicted != actual` map injectively onto
/// `0..m*(m-1)`; every pair with `predicted == actual` maps to the reserved
/// id `m*(m-1)`.
pub fn encode_discrete_residual(predicted: usize, actual: usize, m: usize) -> Result<usize> {
    for state in [predicted, actual] {
        if state >= m {
            return Err(Error::StateOutOfRange { state, cardinality: m });
        }
    }
    if predicted == actual {
        return Ok(m * (m - 1));
    }
    let offset = if actual < predicted { actual } else { actual - 1 };
    Ok(predicted * (m - 1) + offset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputShape {
    Continuous,
    Discrete(usize),
}

impl InputShape {
    fn of(col: &RawColumn) -> Self {
        match col.cardinality() {
            None => InputShape::Continuous,
            Some(m) => InputShape::Discrete(m),
        }
    }

    fn width(self) -> usize {
        match self {
            InputShape::Continuous => 1,
            InputShape::Discrete(m) => m,
        }
    }
}

/// Tree predicting one series from the previous `window` steps of one or
/// more history series. Discrete history enters one-hot encoded so that
/// threshold splits act as category tests.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePredictor {
    tree: DecisionTree,
    window: usize,
    inputs: Vec<InputShape>,
}

impl TreePredictor {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn tree(&self) -> &DecisionTree {
        &self.tree
    }

    pub fn fit(history: &[&RawColumn], target: &RawColumn, window: usize, params: TreeParams) -> Result<Self> {
        let n = check_lengths(history, target)?;
        if window == 0 || n <= window {
            return Err(Error::SeriesTooShort { len: n, needed: window });
        }
        let inputs: Vec<InputShape> = history.iter().map(|c| InputShape::of(c)).collect();
        let x = lagged_features(history, &inputs, window);
        let (y, kind) = match target {
            RawColumn::Continuous(v) => (v[window..].to_vec(), TreeKind::Regression),
            RawColumn::Discrete { states, cardinality } => (
                states[window..].iter().map(|&s| s as f64).collect(),
                TreeKind::Classification {
                    n_classes: *cardinality,
                },
            ),
        };
        Ok(TreePredictor {
            tree: DecisionTree::fit(&x, &y, kind, params),
            window,
            inputs,
        })
    }

    /// One prediction per step `t >= window`.
    pub fn predict(&self, history: &[&RawColumn]) -> Result<Vec<f64>> {
        let n = history.first().map_or(0, |c| c.len());
        if self.window >= n {
            return Err(Error::WindowExceedsSeries {
                window: self.window,
                len: n,
            });
        }
        let shapes: Vec<InputShape> = history.iter().map(|c| InputShape::of(c)).collect();
        if shapes != self.inputs {
            return Err(Error::DimensionMismatch {
                expected: self.inputs.len(),
                actual: shapes.len(),
            });
        }
        let x = lagged_features(history, &self.inputs, self.window);
        Ok(self.tree.predict(&x))
    }
}

fn check_lengths(history: &[&RawColumn], target: &RawColumn) -> Result<usize> {
    let n = target.len();
    for c in history {
        if c.len() != n {
            return Err(Error::LengthMismatch(c.len(), n));
        }
    }
    Ok(n)
}

/// Row `t - window` holds lags `1..=window` of every history series at step t.
fn lagged_features(history: &[&RawColumn], shapes: &[InputShape], window: usize) -> Array2<f64> {
    let n = history[0].len();
    let per_step: usize = shapes.iter().map(|s| s.width()).sum();
    let mut x = Array2::<f64>::zeros((n - window, per_step * window));
    for t in window..n {
        let row = t - window;
        let mut col = 0;
        for lag in 1..=window {
            for series in history {
                match series {
                    RawColumn::Continuous(v) => {
                        x[[row, col]] = v[t - lag];
                        col += 1;
                    }
                    RawColumn::Discrete { states, cardinality } => {
                        x[[row, col + states[t - lag]]] = 1.0;
                        col += cardinality;
                    }
                }
            }
        }
    }
    x
}

pub fn fit_tree_predictor(
    history: &[&RawColumn],
    target: &RawColumn,
    window: usize,
    params: TreeParams,
) -> Result<TreePredictor> {
    TreePredictor::fit(history, target, window, params)
}

/// Residuals of `target` against the predictor's one-step forecasts.
/// Output length is `len - window`.
pub fn whiten(history: &[&RawColumn], target: &RawColumn, predictor: &TreePredictor) -> Result<ResidualSeries> {
    check_lengths(history, target)?;
    let w = predictor.window();
    let preds = predictor.predict(history)?;
    match target {
        RawColumn::Continuous(v) => Ok(ResidualSeries::Continuous(
            v[w..].iter().zip(&preds).map(|(x, p)| x - p).collect(),
        )),
        RawColumn::Discrete { states, cardinality } => {
            let m = *cardinality;
            let states = states[w..]
                .iter()
                .zip(&preds)
                .map(|(&a, &p)| encode_discrete_residual(p as usize, a, m))
                .collect::<Result<Vec<_>>>()?;
            Ok(ResidualSeries::Discrete {
                states,
                alphabet: residual_alphabet(m),
            })
        }
    }
}
