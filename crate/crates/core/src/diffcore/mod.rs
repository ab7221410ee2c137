//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Only the operators the adaptation model needs are provided: affine
//! layers, activations, a clamped log, reductions, row gathering for MIL
//! pooling, and the gradient-reversal node.
//!
//! ```
//! use wsdaor::diffcore::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
//! let sq = g.square(x);
//! let root = g.sum(sq);
//! g.backward(root).unwrap();
//! assert_eq!(g.grad(x).data(), &[2.0, 4.0]);
//! ```

pub mod gradcheck;
mod graph;
mod tensor;

pub use graph::{Graph, NodeId, LOG_FLOOR};
pub use tensor::Tensor;
