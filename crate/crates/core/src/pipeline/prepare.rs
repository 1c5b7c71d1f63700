//! Loading, splitting and encoding a dataset for the model stages.
//!
//! Sample ids are 0-based row indices of the source CSV. Time-series
//! samples are windows identified by the row they predict.

use std::path::Path;

use crate::data::{
    encoded_names, feature_map, load_csv, make_windows, split_indices, EncodedDim, EncodedMatrix, Encoder,
    FeatureSchema, RawTable,
};
use crate::error::Result;
use crate::recon::{ReconData, Variant};

#[derive(Debug, Clone)]
pub struct Samples {
    pub data: ReconData,
    pub ids: Vec<usize>,
    pub labels: Option<Vec<bool>>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub schema: FeatureSchema,
    pub encoder: Encoder,
    /// Raw column names, in schema order.
    pub columns: Vec<String>,
    pub encoded_names: Vec<String>,
    pub feature_map: Vec<EncodedDim>,
    /// Encoded training rows in time order for time series; mined for EMI.
    pub train_matrix: EncodedMatrix,
    pub train: Samples,
    pub test: Samples,
}

fn windows_of(matrix: &EncodedMatrix, k: usize, keep: impl Fn(usize) -> bool) -> Result<Samples> {
    let w = make_windows(matrix, k)?;
    let rows: Vec<usize> = (0..w.len()).filter(|&i| keep(w.target_rows[i])).collect();
    Ok(Samples {
        data: ReconData::from_windows(&w).select_rows(&rows),
        ids: rows.iter().map(|&i| w.target_rows[i]).collect(),
        labels: w.labels.as_ref().map(|l| rows.iter().map(|&i| l[i]).collect()),
    })
}

/// Static data is split uniformly at random under `seed`. Time series keep
/// the first `train_fraction` of rows for training; test windows may draw
/// their history from the end of the training prefix.
pub fn prepare(
    dataset: &Path,
    schema: &FeatureSchema,
    mode: Variant,
    train_fraction: f64,
    seed: u64,
) -> Result<Prepared> {
    let table = load_csv(dataset, schema)?;
    let n = table.n_rows();
    let temporal = matches!(mode, Variant::TimeSeries { .. });
    let (train_rows, test_rows) = split_indices(n, train_fraction, seed, temporal)?;
    let encoder = Encoder::fit(&table.select_rows(&train_rows), schema)?;
    let train_matrix = encoder.transform(&table.select_rows(&train_rows))?;
    let (train, test) = match mode {
        Variant::Static => {
            let test_matrix = encoder.transform(&table.select_rows(&test_rows))?;
            let samples = |m: &EncodedMatrix, ids: Vec<usize>| Samples {
                data: ReconData::from_static(&m.values),
                ids,
                labels: m.labels.clone(),
            };
            (samples(&train_matrix, train_rows), samples(&test_matrix, test_rows))
        }
        Variant::TimeSeries { k } => {
            let full = encoder.transform(&table)?;
            let cut = train_rows.len();
            (windows_of(&full, k, |r| r < cut)?, windows_of(&full, k, |r| r >= cut)?)
        }
    };
    Ok(Prepared {
        schema: schema.clone(),
        encoder,
        columns: schema.columns.iter().map(|c| c.name.clone()).collect(),
        encoded_names: encoded_names(schema),
        feature_map: feature_map(schema),
        train_matrix,
        train,
        test,
    })
}

/// Encodes a separate input file with a fitted encoder. Every row (or
/// every window target) becomes a sample.
pub fn prepare_input(table: &RawTable, encoder: &Encoder, mode: Variant) -> Result<Samples> {
    let matrix = encoder.transform(table)?;
    match mode {
        Variant::Static => Ok(Samples {
            data: ReconData::from_static(&matrix.values),
            ids: (0..matrix.n_rows()).collect(),
            labels: matrix.labels.clone(),
        }),
        Variant::TimeSeries { k } => windows_of(&matrix, k, |_| true),
    }
}
