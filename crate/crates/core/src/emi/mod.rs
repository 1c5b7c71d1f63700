//! Extended mutual information between mixed-type, possibly temporal,
//! feature columns.
//!
//! Each column is whitened by a CART one-step predictor (continuous columns
//! by subtraction, discrete columns through a residual alphabet of
//! `m^2 - m + 1` states), residual densities are estimated with KDE or
//! smoothed frequencies, and the EMI is the average log-ratio of joint to
//! marginal residual density.

mod density;
mod mutual;
mod residual;
mod tree;

pub use density::{
    estimate_density, estimate_joint_density, silverman_bandwidth, DensityModel, Frequency, Kde, Kde2, Obs,
    DENSITY_FLOOR, MIN_BANDWIDTH,
};
pub(crate) use mutual::parse_labeled_matrix;
pub use mutual::{build_emi_matrix, emi_matrix_from_columns, emi_pair, EmiMatrix, EmiParams, Schedule};
pub use residual::{
    encode_discrete_residual, fit_tree_predictor, residual_alphabet, whiten, ResidualSeries, TreePredictor,
};
pub use tree::{DecisionTree, TreeKind, TreeParams};
