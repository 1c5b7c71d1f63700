//! Central finite-difference gradient checks.
//!
//! The relative error of one entry is `|analytic - numeric| / max(|analytic|,
//! |numeric|, 1e-6)`, so entries below the floor are judged absolutely.

use ndarray::Array2;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;

pub const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Input or parameter index, row, column of the worst entry.
    pub worst: Option<(usize, usize, usize)>,
    pub checked: usize,
}

impl GradCheckReport {
    fn new() -> Self {
        GradCheckReport {
            max_rel_error: 0.0,
            worst: None,
            checked: 0,
        }
    }

    fn record(&mut self, at: (usize, usize, usize), analytic: f64, numeric: f64) {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR);
        self.checked += 1;
        if err > self.max_rel_error || err.is_nan() {
            self.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
            self.worst = Some(at);
        }
    }
}

fn scalar(t: &Tape, v: Var) -> f64 {
    t.value(v)[[0, 0]]
}

/// Checks gradients with respect to every entry of every input.
pub fn check_gradients(
    inputs: &[Array2<f64>],
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> Result<GradCheckReport> {
    let eval = |vals: &[Array2<f64>]| -> Result<f64> {
        let mut t = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|v| t.leaf(v.clone())).collect();
        let loss = f(&mut t, &vars)?;
        Ok(scalar(&t, loss))
    };
    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|v| t.leaf(v.clone())).collect();
    let loss = f(&mut t, &vars)?;
    let grads = t.backward(loss)?;
    let mut report = GradCheckReport::new();
    let mut work = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        let zeros = Array2::zeros(input.dim());
        let analytic = grads.get(vars[k]).unwrap_or(&zeros).clone();
        for ((r, c), &orig) in input.indexed_iter() {
            work[k][[r, c]] = orig + STEP;
            let up = eval(&work)?;
            work[k][[r, c]] = orig - STEP;
            let down = eval(&work)?;
            work[k][[r, c]] = orig;
            report.record((k, r, c), analytic[[r, c]], (up - down) / (2.0 * STEP));
        }
    }
    Ok(report)
}

/// Checks gradients with respect to every trainable parameter in `store`.
/// `f` may mutate non-trainable buffers; they are restored between calls.
pub fn check_param_gradients(
    store: &mut ParamStore,
    mut f: impl FnMut(&mut Tape, &mut ParamStore) -> Result<Var>,
) -> Result<GradCheckReport> {
    let snapshot = store.clone();
    let mut t = Tape::new();
    let loss = f(&mut t, store)?;
    let grads = t.backward(loss)?;
    *store = snapshot.clone();
    let mut report = GradCheckReport::new();
    let ids: Vec<_> = store.trainable_ids().collect();
    for id in ids {
        let zeros = Array2::zeros(store.get(id).dim());
        let analytic = grads.param(id).unwrap_or(&zeros).clone();
        let dim = store.get(id).dim();
        for r in 0..dim.0 {
            for c in 0..dim.1 {
                let mut probe = |delta: f64| -> Result<f64> {
                    *store = snapshot.clone();
                    store.get_mut(id)[[r, c]] += delta;
                    let mut t = Tape::new();
                    let loss = f(&mut t, store)?;
                    Ok(scalar(&t, loss))
                };
                let up = probe(STEP)?;
                let down = probe(-STEP)?;
                report.record((id.index(), r, c), analytic[[r, c]], (up - down) / (2.0 * STEP));
            }
        }
    }
    *store = snapshot;
    Ok(report)
}
