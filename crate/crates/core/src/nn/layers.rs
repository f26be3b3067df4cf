//! Layers built from tape primitives.

use rand::Rng as _;

use super::tape::{ParamId, ParamStore, Tape, Var};
use super::tensor::Tensor;
use crate::data::PAD_ID;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Glorot-uniform matrix of shape `[rows, cols]`.
pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(vec![rows, cols], data).expect("sized")
}

pub fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(vec![rows, cols], data).expect("sized")
}

/// GRU weights: input matrices `w_*` are `[hidden, input]`, recurrent
/// matrices `u_*` are `[hidden, hidden]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruParams {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

impl GruParams {
    pub fn init(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut mat = |name: &str, cols: usize, rng: &mut Rng| store_add(store, prefix, name, glorot(hidden, cols, rng));
        let w_z = mat("w_z", input, rng);
        let u_z = mat("u_z", hidden, rng);
        let w_r = mat("w_r", input, rng);
        let u_r = mat("u_r", hidden, rng);
        let w_h = mat("w_h", input, rng);
        let u_h = mat("u_h", hidden, rng);
        let b_z = store_add(store, prefix, "b_z", Tensor::zeros(&[hidden]));
        let b_r = store_add(store, prefix, "b_r", Tensor::zeros(&[hidden]));
        let b_h = store_add(store, prefix, "b_h", Tensor::zeros(&[hidden]));
        Self {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
        }
    }

    pub fn ids(&self) -> [ParamId; 9] {
        [
            self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r, self.w_h, self.u_h, self.b_h,
        ]
    }

    pub fn hidden(&self, store: &ParamStore) -> usize {
        store.get(self.b_z).len()
    }

    pub fn on_tape(&self, tape: &mut Tape<'_>) -> GruVars {
        GruVars {
            w_z: tape.param(self.w_z),
            u_z: tape.param(self.u_z),
            b_z: tape.param(self.b_z),
            w_r: tape.param(self.w_r),
            u_r: tape.param(self.u_r),
            b_r: tape.param(self.b_r),
            w_h: tape.param(self.w_h),
            u_h: tape.param(self.u_h),
            b_h: tape.param(self.b_h),
            hidden: tape.params().get(self.b_z).len(),
        }
    }
}

fn store_add(store: &mut ParamStore, prefix: &str, name: &str, t: Tensor) -> ParamId {
    store.add(format!("{prefix}.{name}"), t)
}

/// GRU parameters registered on one tape.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
    pub hidden: usize,
}

/// Embedding rows for `tokens`.
pub fn embed(tape: &mut Tape<'_>, table: Var, tokens: &[usize]) -> Result<Vec<Var>> {
    tokens.iter().map(|&t| tape.row(table, t)).collect()
}

fn affine3(tape: &mut Tape<'_>, w: Var, x: Var, u: Var, h: Var, b: Var) -> Result<Var> {
    let wx = tape.matvec(w, x)?;
    let uh = tape.matvec(u, h)?;
    tape.add_all(&[wx, uh, b])
}

/// One GRU step:
/// `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
/// `h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h)`, `h' = (1 − z) ⊙ h + z ⊙ h̃`.
pub fn gru_step(tape: &mut Tape<'_>, x: Var, h_prev: Var, p: &GruVars) -> Result<Var> {
    if tape.value(h_prev).len() != p.hidden {
        return Err(Error::Shape(format!(
            "gru_step: state of width {} for hidden width {}",
            tape.value(h_prev).len(),
            p.hidden
        )));
    }
    let z_pre = affine3(tape, p.w_z, x, p.u_z, h_prev, p.b_z)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = affine3(tape, p.w_r, x, p.u_r, h_prev, p.b_r)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h_prev)?;
    let cand_pre = affine3(tape, p.w_h, x, p.u_h, rh, p.b_h)?;
    let cand = tape.tanh(cand_pre);
    let keep = tape.one_minus(z);
    let kept = tape.mul(keep, h_prev)?;
    let fresh = tape.mul(z, cand)?;
    tape.add(kept, fresh)
}

/// Final state of a GRU run over `inputs` from a zero state.
pub fn gru_run(tape: &mut Tape<'_>, inputs: impl IntoIterator<Item = Var>, p: &GruVars) -> Result<Var> {
    let mut h = tape.constant(vec![0.0; p.hidden]);
    for x in inputs {
        h = gru_step(tape, x, h, p)?;
    }
    Ok(h)
}

/// `[forward final state; backward final state]` over embedded inputs.
pub fn bidir_encode(tape: &mut Tape<'_>, inputs: &[Var], fwd: &GruVars, bwd: &GruVars) -> Result<Var> {
    let f = gru_run(tape, inputs.iter().copied(), fwd)?;
    let b = gru_run(tape, inputs.iter().rev().copied(), bwd)?;
    Ok(tape.concat(&[f, b]))
}

/// Token ids for encoding; empty sequences become a single `<pad>`.
pub fn non_empty(tokens: &[usize]) -> std::borrow::Cow<'_, [usize]> {
    if tokens.is_empty() {
        std::borrow::Cow::Owned(vec![PAD_ID])
    } else {
        std::borrow::Cow::Borrowed(tokens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        })
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// `activation(W x + b)`.
pub fn dense(tape: &mut Tape<'_>, x: Var, w: Var, b: Var, activation: Activation) -> Result<Var> {
    let wx = tape.matvec(w, x)?;
    let pre = tape.add(wx, b)?;
    Ok(match activation {
        Activation::Tanh => tape.tanh(pre),
        Activation::Identity => pre,
    })
}

/// Inverted dropout: in training mode each element is zeroed with
/// probability `1 - keep_rate` and survivors are scaled by `1 / keep_rate`.
/// Evaluation mode is the identity.
pub fn dropout(tape: &mut Tape<'_>, x: Var, keep_rate: f64, train_mode: bool, rng: &mut Rng) -> Result<Var> {
    if !(keep_rate > 0.0 && keep_rate <= 1.0) {
        return Err(Error::Config(format!("dropout keep rate {keep_rate} not in (0, 1]")));
    }
    if !train_mode || keep_rate == 1.0 {
        return Ok(x);
    }
    let len = tape.value(x).len();
    let mask = (0..len)
        .map(|_| if rng.gen::<f64>() < keep_rate { 1.0 / keep_rate } else { 0.0 })
        .collect();
    tape.mask(x, mask)
}
