//! Dense tensors with reverse-mode differentiation.
//!
//! Computations are recorded on a [`Tape`] that borrows a
//! [`ParameterStore`] immutably; [`Tape::backward`] returns the parameter
//! [`Gradients`], which are folded into the store before an Adam step. This
//! split lets many threads run inference against one store while training
//! stays sequential.

mod kernels;
mod store;
mod tape;

pub use store::{AdamConfig, Gradients, ParamId, ParameterStore, MODEL_MAGIC, MODEL_VERSION};
pub use tape::{Tape, Var};

use thiserror::Error;

pub type Shape = (usize, usize);

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("{op}: index {index} out of range for shape {shape:?}")]
    Index {
        op: &'static str,
        index: usize,
        shape: Shape,
    },

    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("backward requires a (1, 1) loss, got {0:?}")]
    NotScalar(Shape),

    #[error("backward already ran on this tape; clear it first")]
    AlreadyBackpropagated,

    #[error("{op}: {len} values do not fill shape {shape:?}")]
    DataLength {
        op: &'static str,
        len: usize,
        shape: Shape,
    },

    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),

    #[error("unknown parameter `{0}`")]
    UnknownName(String),

    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: Shape,
        found: Shape,
    },

    #[error("parameter file does not start with the expected magic bytes")]
    BadMagic,

    #[error("unsupported parameter file version {0}")]
    UnsupportedVersion(u32),

    #[error("parameter file is truncated")]
    Truncated,

    #[error("parameter file has {0} unexpected trailing bytes")]
    TrailingBytes(usize),

    #[error("parameter file: {0}")]
    Malformed(String),

    #[error("parameter `{0}` missing from file")]
    MissingName(String),
}

/// A dense row-major matrix. Vectors are `(n, 1)` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::DataLength {
                op: "from_vec",
                len: data.len(),
                shape: (rows, cols),
            });
        }
        Ok(Tensor { rows, cols, data })
    }

    /// A column vector.
    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> Shape {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
