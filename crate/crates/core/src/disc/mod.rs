//! Self-labeled discrimination. Samples are ranked by `‖d‖₂` and `‖σ_z‖₂`;
//! the least anomalous half trains as the normal class, a small anomalous
//! tail as the anomaly class, and a small network maps the measures to an
//! anomaly probability.

mod model;
mod selection;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use model::DiscModel;
pub use selection::{
    select_training_samples, CombineRule, LabelingPolicy, Provenance, RankRow, Role, TrainingSelection,
};

/// Probability above which a sample is labeled anomalous.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// `false` drops the σ stack; the head then sees only the 5 d features.
    pub use_sigma: bool,
}

impl Default for DiscConfig {
    fn default() -> Self {
        DiscConfig {
            epochs: 200,
            batch_size: 256,
            lr: 1e-3,
            use_sigma: true,
        }
    }
}

impl DiscConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(
                "disc: batch_size must be >= 2 for batch norm".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig("disc: lr must be > 0".into()));
        }
        Ok(())
    }
}

pub fn decide(probability: f64) -> bool {
    probability > DECISION_THRESHOLD
}

/// `sample_id,probability,label,d_norm,sigma_norm`, label as 0/1.
pub fn predictions_csv(ids: &[usize], probabilities: &[f64], d_norms: &[f64], sigma_norms: &[f64]) -> String {
    assert!(ids.len() == probabilities.len() && ids.len() == d_norms.len() && ids.len() == sigma_norms.len());
    let mut out = String::from("sample_id,probability,label,d_norm,sigma_norm\n");
    for i in 0..ids.len() {
        let p = probabilities[i];
        let _ = writeln!(
            out,
            "{},{p},{},{},{}",
            ids[i],
            u8::from(decide(p)),
            d_norms[i],
            sigma_norms[i]
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: usize,
    pub probability: f64,
    pub label: bool,
}

/// Reads the `sample_id`, `probability` and `label` columns of a
/// predictions file; other columns are ignored.
pub fn read_predictions(text: &str) -> Result<Vec<Prediction>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let (ci, cp, cl) = (col("sample_id")?, col("probability")?, col("label")?);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |c: usize| Error::UnparsableNumber {
            row,
            column: header[c].to_string(),
            value: rec[c].to_string(),
        };
        out.push(Prediction {
            id: rec[ci].parse().map_err(|_| bad(ci))?,
            probability: rec[cp].parse().map_err(|_| bad(cp))?,
            label: match &rec[cl] {
                "0" => false,
                "1" => true,
                _ => return Err(bad(cl)),
            },
        });
    }
    Ok(out)
}
