//! Dataset ingestion: schema-checked CSV loading, one-hot/z-score encoding,
//! train/test splitting and time windows.

mod encode;
mod schema;
mod split;
mod table;
mod window;

pub use encode::{encode, encoded_names, feature_map, EncodedDim, EncodedMatrix, Encoder, NormStats};
pub use schema::{Column, ColumnKind, FeatureSchema};
pub use split::{split, split_indices};
pub use table::{load_csv, read_csv, RawColumn, RawTable};
pub use window::{make_windows, WindowedSeries};
