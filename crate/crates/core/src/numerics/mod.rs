//! Dense double-precision tensors and a small reverse-mode tape covering the
//! operators the models use.

pub mod gradcheck;
mod kernels;
mod tape;
mod tensor;

pub use kernels::{
    add, block_matmul, block_matmul_nt, concat_rows, layer_norm, matmul, matmul_nt, matmul_tn, mul, relu, scale,
    softmax_rows, LAYER_NORM_EPS,
};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
