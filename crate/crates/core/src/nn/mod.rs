//! A small differentiable-compute engine: a reverse-mode tape over dense
//! `f64` matrices, the layers the detector needs, Adam, and a text
//! checkpoint format.

pub mod checkpoint;
pub mod gradcheck;
mod layers;
mod optim;
mod params;
mod tape;

pub use layers::{gcn_forward, Activation, BatchNorm, GraphConv, Linear, Lstm, LstmLayer, Mode};
pub use optim::{Adam, AdamConfig};
pub use params::{glorot_uniform, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
