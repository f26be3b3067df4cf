//! A small numeric engine: tensors, a reverse-mode tape, GRU and dense
//! layers, dropout and Adam.

mod adam;
mod layers;
mod tape;
mod tensor;

pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use layers::{
    bidir_encode, dense, dropout, embed, glorot, gru_run, gru_step, non_empty, uniform, Activation, GruParams, GruVars,
};
pub use tape::{Gradients, ParamId, ParamStore, Tape, Var};
pub use tensor::Tensor;
