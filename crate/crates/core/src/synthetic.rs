//! Labeled synthetic datasets whose anomalies are broken correlations
//! rather than unusual values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Column, FeatureSchema};
use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "label";
pub const ANOMALY: &str = "anomaly";
pub const NORMAL: &str = "normal";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub schema: FeatureSchema,
    /// CSV text with a header row and the label column last.
    pub csv: String,
    pub anomalies: Vec<bool>,
}

impl SyntheticDataset {
    fn from_rows(schema: FeatureSchema, rows: Vec<Vec<String>>, anomalies: Vec<bool>) -> Self {
        let mut csv = String::new();
        for c in &schema.columns {
            let _ = write!(csv, "{},", c.name);
        }
        csv.push_str(LABEL_COLUMN);
        csv.push('\n');
        for (row, &a) in rows.iter().zip(&anomalies) {
            for v in row {
                let _ = write!(csv, "{v},");
            }
            csv.push_str(if a { ANOMALY } else { NORMAL });
            csv.push('\n');
        }
        SyntheticDataset { schema, csv, anomalies }
    }

    /// Writes `<stem>.csv` and `<stem>.schema.toml` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let data = dir.join(format!("{stem}.csv"));
        let schema = dir.join(format!("{stem}.schema.toml"));
        std::fs::write(&data, &self.csv).map_err(|e| Error::io(&data, e))?;
        std::fs::write(&schema, self.schema.to_toml_string()).map_err(|e| Error::io(&schema, e))?;
        Ok((data, schema))
    }

    pub fn anomaly_rate(&self) -> f64 {
        self.anomalies.iter().filter(|&&a| a).count() as f64 / self.anomalies.len().max(1) as f64
    }
}

fn labeled(columns: Vec<Column>) -> FeatureSchema {
    FeatureSchema::new(columns)
        .and_then(|s| s.with_label(LABEL_COLUMN, ANOMALY))
        .expect("fixture schema is valid")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SinusoidConfig {
    pub length: usize,
    pub period: f64,
    pub noise: f64,
    /// Number of decorrelation windows.
    pub windows: usize,
    pub window_length: usize,
    /// Extra unrelated sinusoid channels at the periods listed, each with
    /// the same additive noise. They give the model context to predict and
    /// carry no anomalies.
    pub context_periods: Vec<f64>,
}

impl Default for SinusoidConfig {
    fn default() -> Self {
        SinusoidConfig {
            length: 4000,
            period: 40.0,
            noise: 0.05,
            windows: 10,
            window_length: 20,
            context_periods: vec![400.0, 20.0],
        }
    }
}

/// Two phase-locked sinusoids `s1 = sin(ωt)`, `s2 = sin(ωt + 0.3)` with
/// additive Gaussian noise, plus unrelated context sinusoids. Inside each
/// decorrelation window `s2` runs at a different frequency from a random
/// phase, so both channels keep their marginal range while their mutual
/// correlation disappears. Windows sit at evenly spaced positions with
/// random jitter and never overlap.
pub fn decorrelated_sinusoids(config: &SinusoidConfig, seed: u64) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.length;
    let w = 2.0 * std::f64::consts::PI / config.period;
    let mut anomalies = vec![false; n];
    let slot = n / config.windows.max(1);
    let mut starts = Vec::new();
    for i in 0..config.windows {
        let room = slot.saturating_sub(config.window_length + 1).max(1);
        let start = i * slot + rng.gen_range(0..room);
        starts.push(start);
        for a in anomalies.iter_mut().skip(start).take(config.window_length) {
            *a = true;
        }
    }
    let phases: Vec<f64> = starts
        .iter()
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    let mut window_of = vec![None; n];
    for (k, &s) in starts.iter().enumerate() {
        for slot in window_of.iter_mut().skip(s).take(config.window_length) {
            *slot = Some(k);
        }
    }
    let mut rows = Vec::with_capacity(n);
    for (t, window) in window_of.iter().enumerate() {
        let tf = t as f64;
        let s1 = (w * tf).sin() + config.noise * normal(&mut rng);
        let base = match *window {
            Some(k) => (2.7 * w * tf + phases[k]).sin(),
            None => (w * tf + 0.3).sin(),
        };
        let s2 = base + config.noise * normal(&mut rng);
        let mut row = vec![format!("{s1:.6}"), format!("{s2:.6}")];
        for &p in &config.context_periods {
            let v = (std::f64::consts::TAU * tf / p).sin() + config.noise * normal(&mut rng);
            row.push(format!("{v:.6}"));
        }
        rows.push(row);
    }
    let mut columns = vec![Column::continuous("s1"), Column::continuous("s2")];
    columns.extend((0..config.context_periods.len()).map(|i| Column::continuous(format!("context{i}"))));
    SyntheticDataset::from_rows(labeled(columns), rows, anomalies)
}

/// Static rows from three latent factors, each driving a group of
/// correlated continuous features, plus a discrete column whose category
/// follows the sign pattern of two factors. An anomalous row drives one
/// group from the negated factor plus noise, so each value stays plausible
/// while the group disagrees with the rest of the row and with `regime`.
pub fn correlated_groups(n: usize, anomaly_fraction: f64, seed: u64) -> SyntheticDataset {
    const GROUPS: [&[&str]; 3] = [&["a0", "a1", "a2"], &["b0", "b1", "b2"], &["c0", "c1"]];
    const LOADINGS: [f64; 3] = [1.0, 0.8, -0.9];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut anomalies = Vec::with_capacity(n);
    for _ in 0..n {
        let z: [f64; 3] = std::array::from_fn(|_| normal(&mut rng));
        // the factors share a common component so groups correlate too
        let common = normal(&mut rng);
        let factors: [f64; 3] = std::array::from_fn(|g| 0.6 * common + 0.8 * z[g]);
        let anomalous = rng.gen::<f64>() < anomaly_fraction;
        let broken = if anomalous {
            Some(rng.gen_range(0..GROUPS.len()))
        } else {
            None
        };
        let mut row = Vec::new();
        for (g, names) in GROUPS.iter().enumerate() {
            let f = if broken == Some(g) {
                -factors[g] + 0.5 * normal(&mut rng)
            } else {
                factors[g]
            };
            for (j, _) in names.iter().enumerate() {
                let v = LOADINGS[j % 3] * f + 0.2 * normal(&mut rng);
                row.push(format!("{v:.6}"));
            }
        }
        let cat = match (factors[0] > 0.0, factors[1] > 0.0) {
            (true, true) => "hi",
            (false, false) => "lo",
            _ => "mixed",
        };
        row.push(cat.to_string());
        rows.push(row);
        anomalies.push(anomalous);
    }
    let mut columns: Vec<Column> = GROUPS
        .iter()
        .flat_map(|g| g.iter().map(|n| Column::continuous(*n)))
        .collect();
    columns.push(Column::discrete("regime", ["hi", "lo", "mixed"]));
    SyntheticDataset::from_rows(labeled(columns), rows, anomalies)
}
