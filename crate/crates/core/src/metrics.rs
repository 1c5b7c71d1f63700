//! Detection metrics. Positive means "anomaly": a false positive is a
//! normal sample flagged as anomalous, a false negative a missed anomaly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_labels(predicted: &[bool], truth: &[bool]) -> Self {
        assert_eq!(predicted.len(), truth.len());
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Zero when nothing was flagged.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Zero when there are no anomalies.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub confusion: Confusion,
    /// Wall-clock seconds per stage; excluded from determinism checks.
    pub timings: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn new(confusion: Confusion) -> Self {
        EvalReport {
            precision: confusion.precision(),
            recall: confusion.recall(),
            f1: confusion.f1(),
            confusion,
            timings: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let c = &self.confusion;
        let mut out = String::new();
        let _ = writeln!(out, "precision  {:.4}", self.precision);
        let _ = writeln!(out, "recall     {:.4}", self.recall);
        let _ = writeln!(out, "f1         {:.4}", self.f1);
        let _ = writeln!(
            out,
            "tp {}  fp {}  fn {}  tn {}  (n = {})",
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            c.total()
        );
        for (stage, secs) in &self.timings {
            let _ = writeln!(out, "time {stage:<12} {secs:.2}s");
        }
        out
    }
}

/// Scores id-aligned `(id, predicted)` and `(id, truth)` sequences.
pub fn evaluate(predicted: &[(usize, bool)], truth: &[(usize, bool)]) -> Result<EvalReport> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch(predicted.len(), truth.len()));
    }
    if let Some(position) = predicted.iter().zip(truth).position(|(p, t)| p.0 != t.0) {
        return Err(Error::IdMismatch { position });
    }
    let p: Vec<bool> = predicted.iter().map(|x| x.1).collect();
    let t: Vec<bool> = truth.iter().map(|x| x.1).collect();
    Ok(EvalReport::new(Confusion::from_labels(&p, &t)))
}
