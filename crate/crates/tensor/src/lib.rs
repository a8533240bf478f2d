//! Dense tensors generic over the element type, a reverse-mode tape, and the
//! optimizer used to train every network in the workspace.
//!
//! ```
//! use eegspeech_tensor::{Graph, Tensor};
//!
//! let g = Graph::<f64>::new();
//! let x = g.input(Tensor::from_f64(&[3], &[1.0, 2.0, 3.0]));
//! let y = g.sum_all(g.square(x));
//! let grads = g.backward(y);
//! assert_eq!(grads.wrt(x).unwrap().to_f64_vec(), vec![2.0, 4.0, 6.0]);
//! ```

pub mod check;
mod graph;
mod ops;
mod optim;
mod params;
mod scalar;
mod tensor;

pub use graph::{BackwardFn, Gradients, Graph, Var};
pub use ops::conv::Conv1dSpec;
pub use ops::linalg::mm;
pub use ops::norm::{log_softmax_rows, softmax_rows};
pub use optim::{AdamW, AdamWConfig};
pub use params::{ParamId, ParamStore};
pub use scalar::Scalar;
pub use tensor::{broadcast_shape, Tensor};

/// Single-precision tensor, the training default.
pub type Tensor32 = Tensor<f32>;
/// Double-precision tensor, used by oracle and gradient checks.
pub type Tensor64 = Tensor<f64>;
