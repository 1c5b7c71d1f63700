use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::encode::EncodedMatrix;
use crate::error::{Error, Result};

/// Row indices for a train/test split.
///
/// Static data is shuffled uniformly under `seed`; temporal data keeps the
/// first `floor(n * f)` rows for training and the rest for testing.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64, temporal: bool) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n_train = (n as f64 * train_fraction).floor() as usize;
    let n_test = n - n_train;
    if n_train == 0 || n_test == 0 {
        return Err(Error::DegenerateSplit {
            train: n_train,
            test: n_test,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    if !temporal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let test = order.split_off(n_train);
    Ok((order, test))
}

pub fn split(matrix: &EncodedMatrix, train_fraction: f64, seed: u64) -> Result<(EncodedMatrix, EncodedMatrix)> {
    let (train, test) = split_indices(matrix.n_rows(), train_fraction, seed, false)?;
    Ok((matrix.select_rows(&train), matrix.select_rows(&test)))
}
