//! One-hot expansion of discrete columns and z-scoring of continuous ones.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, FeatureSchema};
use super::table::{RawColumn, RawTable};
use crate::error::{Error, Result};

/// Source of one encoded dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedDim {
    pub column: usize,
    /// Category index for one-hot dimensions, `None` for continuous ones.
    pub category: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub stddev: f64,
}

/// Normalization statistics fitted on one table and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub schema: FeatureSchema,
    /// Per raw column; `None` for discrete columns.
    pub norm_stats: Vec<Option<NormStats>>,
    /// Continuous columns whose training stddev was zero; these encode to 0.
    pub constant_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub values: Array2<f64>,
    pub feature_map: Vec<EncodedDim>,
    pub norm_stats: Vec<Option<NormStats>>,
    pub labels: Option<Vec<bool>>,
}

const CONSTANT_TOL: f64 = 1e-12;

pub fn feature_map(schema: &FeatureSchema) -> Vec<EncodedDim> {
    let mut map = Vec::with_capacity(schema.encoded_width());
    for (column, col) in schema.columns.iter().enumerate() {
        match &col.kind {
            ColumnKind::Continuous => map.push(EncodedDim { column, category: None }),
            ColumnKind::Discrete { categories } => {
                map.extend((0..categories.len()).map(|c| EncodedDim {
                    column,
                    category: Some(c),
                }));
            }
        }
    }
    map
}

/// Node names for encoded dimensions: `col` or `col=category`.
pub fn encoded_names(schema: &FeatureSchema) -> Vec<String> {
    feature_map(schema)
        .iter()
        .map(|d| {
            let col = &schema.columns[d.column];
            match (&col.kind, d.category) {
                (ColumnKind::Discrete { categories }, Some(c)) => {
                    format!("{}={}", col.name, categories[c])
                }
                _ => col.name.clone(),
            }
        })
        .collect()
}

impl Encoder {
    pub fn fit(table: &RawTable, schema: &FeatureSchema) -> Result<Self> {
        check_table(table, schema)?;
        let mut constant_columns = Vec::new();
        let norm_stats = table
            .columns
            .iter()
            .zip(&schema.columns)
            .map(|(col, meta)| match col {
                RawColumn::Continuous(v) => {
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = if v.len() > 1 {
                        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
                    } else {
                        0.0
                    };
                    let stddev = var.sqrt();
                    if stddev <= CONSTANT_TOL * mean.abs().max(1.0) {
                        log::warn!("column `{}` is constant; encoding it as zeros", meta.name);
                        constant_columns.push(meta.name.clone());
                        Some(NormStats { mean, stddev: 0.0 })
                    } else {
                        Some(NormStats { mean, stddev })
                    }
                }
                RawColumn::Discrete { .. } => None,
            })
            .collect();
        Ok(Encoder {
            schema: schema.clone(),
            norm_stats,
            constant_columns,
        })
    }

    pub fn transform(&self, table: &RawTable) -> Result<EncodedMatrix> {
        check_table(table, &self.schema)?;
        let n = table.n_rows();
        let map = feature_map(&self.schema);
        let mut values = Array2::<f64>::zeros((n, map.len()));
        let mut offset = 0;
        for (col, stats) in table.columns.iter().zip(&self.norm_stats) {
            match col {
                RawColumn::Continuous(v) => {
                    let s = stats.expect("continuous column has stats");
                    if s.stddev > 0.0 {
                        for (r, x) in v.iter().enumerate() {
                            values[[r, offset]] = (x - s.mean) / s.stddev;
                        }
                    }
                    offset += 1;
                }
                RawColumn::Discrete { states, cardinality } => {
                    for (r, &s) in states.iter().enumerate() {
                        values[[r, offset + s]] = 1.0;
                    }
                    offset += cardinality;
                }
            }
        }
        Ok(EncodedMatrix {
            values,
            feature_map: map,
            norm_stats: self.norm_stats.clone(),
            labels: table.labels.clone(),
        })
    }
}

fn check_table(table: &RawTable, schema: &FeatureSchema) -> Result<()> {
    if table.columns.len() != schema.columns.len() {
        return Err(Error::DimensionMismatch {
            expected: schema.columns.len(),
            actual: table.columns.len(),
        });
    }
    for (col, meta) in table.columns.iter().zip(&schema.columns) {
        if col.cardinality() != meta.kind.cardinality() {
            return Err(Error::InvalidSchema(format!(
                "column `{}` does not match its schema kind",
                meta.name
            )));
        }
    }
    Ok(())
}

/// Fits normalization on `table` itself and encodes it.
pub fn encode(table: &RawTable, schema: &FeatureSchema) -> Result<EncodedMatrix> {
    Encoder::fit(table, schema)?.transform(table)
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            values: self.values.select(ndarray::Axis(0), rows),
            feature_map: self.feature_map.clone(),
            norm_stats: self.norm_stats.clone(),
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect()),
        }
    }

    pub fn raw_column_count(&self) -> usize {
        self.feature_map.last().map_or(0, |d| d.column + 1)
    }

    /// Recovers raw columns: continuous columns stay z-scored, one-hot groups
    /// collapse back to category indices.
    pub fn decode_columns(&self) -> Vec<RawColumn> {
        let mut out = Vec::new();
        let mut j = 0;
        while j < self.feature_map.len() {
            let dim = self.feature_map[j];
            match dim.category {
                None => {
                    out.push(RawColumn::Continuous(self.values.column(j).to_vec()));
                    j += 1;
                }
                Some(_) => {
                    let width = self.feature_map[j..]
                        .iter()
                        .take_while(|d| d.column == dim.column)
                        .count();
                    let states = self
                        .values
                        .rows()
                        .into_iter()
                        .map(|row| {
                            (0..width)
                                .max_by(|&a, &b| row[j + a].total_cmp(&row[j + b]).then(b.cmp(&a)))
                                .unwrap_or(0)
                        })
                        .collect();
                    out.push(RawColumn::Discrete {
                        states,
                        cardinality: width,
                    });
                    j += width;
                }
            }
        }
        out
    }
}
