//! Dense `f64` matrices and a dynamic reverse-mode tape.
//!
//! Everything the model computes is expressed as two-dimensional tensors; vectors are
//! single rows. The tape is rebuilt for each forward pass, so variable-length sentences
//! need no padding or masking.

mod tape;
mod tensor;

use thiserror::Error;

pub use tape::{sigmoid, CustomOp, Gradients, Tape, Var};
pub use tensor::{argmax, log_sum_exp, softmax, Shape, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    Dimension { op: &'static str, left: Shape, right: Shape },
    #[error("{0}")]
    Contract(String),
}

/// Matrix product as a free function on plain tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, NumError> {
    a.matmul(b)
}

/// Softmax of a `1 × n` tensor.
pub fn softmax_row(x: &Tensor) -> Result<Tensor, NumError> {
    if x.rows() != 1 {
        return Err(NumError::Contract(format!("softmax_row expects one row, got {}", x.shape())));
    }
    Tensor::new(x.shape(), softmax(x.data())?)
}
