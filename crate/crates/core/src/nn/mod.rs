//! A small reverse-mode automatic differentiation engine over dense
//! `f64` matrices, sufficient for the classifier families in
//! [`crate::models`].
//!
//! A [`Graph`] is built per batch on top of a borrowed [`ParamStore`];
//! calling [`Graph::backward`] yields [`Gradients`] keyed by parameter,
//! which [`AdamW`] applies to the store.

mod graph;
pub mod init;
mod optim;
mod params;

pub use graph::{softmax_rows, Gradients, Graph, NodeId};
pub use optim::AdamW;
pub use params::{Param, ParamId, ParamStore};

pub type Matrix = ndarray::Array2<f64>;
