use ndarray::{s, Array2};

use super::encode::EncodedMatrix;
use crate::error::{Error, Result};

/// Sliding windows of `k` consecutive rows, each paired with the row that
/// follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSeries {
    pub windows: Vec<Array2<f64>>,
    /// Row `i` is the step following window `i`.
    pub targets: Array2<f64>,
    /// Index of each target in the source matrix.
    pub target_rows: Vec<usize>,
    pub labels: Option<Vec<bool>>,
    pub k: usize,
}

impl WindowedSeries {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.targets.ncols()
    }
}

pub fn make_windows(matrix: &EncodedMatrix, k: usize) -> Result<WindowedSeries> {
    let n = matrix.n_rows();
    if k == 0 || n <= k {
        return Err(Error::SeriesTooShort { len: n, needed: k });
    }
    let count = n - k;
    let windows = (0..count)
        .map(|i| matrix.values.slice(s![i..i + k, ..]).to_owned())
        .collect();
    let targets = matrix.values.slice(s![k.., ..]).to_owned();
    let target_rows: Vec<usize> = (k..n).collect();
    let labels = matrix
        .labels
        .as_ref()
        .map(|l| target_rows.iter().map(|&r| l[r]).collect());
    Ok(WindowedSeries {
        windows,
        targets,
        target_rows,
        labels,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::encode::EncodedDim;

    fn series(n: usize) -> EncodedMatrix {
        EncodedMatrix {
            values: Array2::from_shape_fn((n, 2), |(r, c)| (r * 10 + c) as f64),
            feature_map: vec![
                EncodedDim {
                    column: 0,
                    category: None,
                },
                EncodedDim {
                    column: 1,
                    category: None,
                },
            ],
            norm_stats: vec![None, None],
            labels: Some((0..n).map(|r| r % 2 == 0).collect()),
        }
    }

    #[test]
    fn count_and_contiguity() {
        let w = make_windows(&series(5), 2).unwrap();
        assert_eq!(w.len(), 3);
        for (i, win) in w.windows.iter().enumerate() {
            assert_eq!(win[[0, 0]], (i * 10) as f64);
            assert_eq!(win[[1, 0]], ((i + 1) * 10) as f64);
            assert_eq!(w.targets[[i, 1]], ((i + 2) * 10 + 1) as f64);
        }
        assert_eq!(w.labels, Some(vec![true, false, true]));
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            make_windows(&series(3), 3),
            Err(Error::SeriesTooShort { len: 3, needed: 3 })
        ));
    }

    #[test]
    fn unit_windows_shift_by_one() {
        let m = series(4);
        let w = make_windows(&m, 1).unwrap();
        assert_eq!(w.len(), 3);
        for i in 0..3 {
            assert_eq!(w.windows[i].row(0), m.values.row(i));
            assert_eq!(w.targets.row(i), m.values.row(i + 1));
        }
    }
}
