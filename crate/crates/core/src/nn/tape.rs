//! Reverse-mode automatic differentiation over vector-valued nodes.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order; `backward` walks it once in reverse. Parameters live
//! in a [`ParamStore`] outside the tape and are referenced, never copied;
//! their gradients are accumulated into a [`Gradients`] buffer.

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub type ParamId = usize;

/// Named parameter tensors in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        self.tensors.len() - 1
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (i, n.as_str(), t))
    }

    pub fn total_size(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// Per-parameter gradient accumulators; `None` means untouched (zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn for_store(store: &ParamStore) -> Self {
        Self {
            grads: vec![None; store.len()],
            shapes: store.tensors.iter().map(|t| t.shape().to_vec()).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads[id].as_ref()
    }

    /// Gradient as a dense tensor, zeros when untouched.
    pub fn dense(&self, id: ParamId) -> Tensor {
        self.grads[id].clone().unwrap_or_else(|| Tensor::zeros(&self.shapes[id]))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn clear(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn slot(&mut self, id: ParamId) -> &mut [f64] {
        let shape = &self.shapes[id];
        self.grads[id].get_or_insert_with(|| Tensor::zeros(shape)).data_mut()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Square(Var),
    OneMinus(Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Row(Var, usize),
    Mask(Var, Vec<f64>),
    Sum(Var),
    AddAll(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    /// `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
}

/// Dot product with four independent partial sums (a fixed summation order,
/// so results stay deterministic).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ar, br) = (ac.remainder(), bc.remainder());
    for (x, y) in ac.zip(bc) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ar.iter().zip(br).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

fn same_len(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: operand lengths {} and {}", a.len(), b.len())))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value: Some(value) });
        Var(self.nodes.len() - 1)
    }

    pub fn tensor(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            (None, _) => unreachable!("only parameter leaves are stored by reference"),
        }
    }

    pub fn value(&self, v: Var) -> &[f64] {
        self.tensor(v).data()
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(Op::Input, value)
    }

    pub fn constant(&mut self, values: Vec<f64>) -> Var {
        self.push(Op::Input, Tensor::vector(values))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// `W · x` for a matrix `W` of shape `[m, n]` and an `n`-vector `x`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let wt = self.tensor(w);
        let (m, n) = wt.dims2()?;
        let xv = self.value(x);
        if xv.len() != n {
            return Err(Error::Shape(format!("matvec: matrix [{m}, {n}] times vector of {}", xv.len())));
        }
        let wd = wt.data();
        let out: Vec<f64> = (0..m)
            .map(|i| dot(&wd[i * n..(i + 1) * n], xv))
            .collect();
        Ok(self.push(Op::MatVec(w, x), Tensor::vector(out)))
    }

    fn zip_with(&mut self, a: Var, b: Var, what: &str, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_len(av, bv, what)?;
        let out = av.iter().zip(bv).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.push(op, Tensor::vector(out)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "add", Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "sub", Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "mul", Op::Mul(a, b), |x, y| x * y)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out = self.value(a).iter().map(|x| f(*x)).collect();
        self.push(op, Tensor::vector(out))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, Op::Square(a), |x| x * x)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        self.map(a, Op::OneMinus(a), |x| 1.0 - x)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::Scale(a, c), |x| c * x)
    }

    /// Elementwise product with a constant mask (no gradient to the mask).
    pub fn mask(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        let av = self.value(a);
        same_len(av, &mask, "mask")?;
        let out = av.iter().zip(&mask).map(|(x, m)| x * m).collect();
        Ok(self.push(Op::Mask(a, mask), Tensor::vector(out)))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::new();
        for p in parts {
            out.extend_from_slice(self.value(*p));
        }
        self.push(Op::Concat(parts.to_vec()), Tensor::vector(out))
    }

    /// Row `index` of a matrix node.
    pub fn row(&mut self, table: Var, index: usize) -> Result<Var> {
        let row = self.tensor(table).row(index)?.to_vec();
        Ok(self.push(Op::Row(table, index), Tensor::vector(row)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    /// Elementwise sum of equally sized nodes.
    pub fn add_all(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(Error::Empty("add_all operands"))?;
        let mut out = self.value(*first).to_vec();
        for p in &parts[1..] {
            let v = self.value(*p);
            same_len(&out, v, "add_all")?;
            out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
        }
        Ok(self.push(Op::AddAll(parts.to_vec()), Tensor::vector(out)))
    }

    /// Reverse pass from `root`. A non-scalar root needs an explicit seed.
    pub fn backward(&self, root: Var, seed: Option<&[f64]>) -> Result<Gradients> {
        let mut grads = Gradients::for_store(self.params);
        self.backward_into(root, seed, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Reverse pass accumulating `scale * d(root)/d(param)` into `grads`.
    pub fn backward_into(&self, root: Var, seed: Option<&[f64]>, scale: f64, grads: &mut Gradients) -> Result<()> {
        let root_len = self.value(root).len();
        let seed: Vec<f64> = match seed {
            Some(s) if s.len() == root_len => s.iter().map(|g| g * scale).collect(),
            Some(s) => {
                return Err(Error::Shape(format!("seed of length {} for root of length {root_len}", s.len())));
            }
            None if root_len == 1 => vec![scale],
            None => return Err(Error::NonScalarRoot(self.tensor(root).shape().to_vec())),
        };

        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        if let Op::Param(id) = self.nodes[root.0].op {
            grads.slot(id).iter_mut().zip(&seed).for_each(|(g, s)| *g += s);
            return Ok(());
        }
        node_grads[root.0] = Some(seed);

        for i in (0..=root.0).rev() {
            let Some(g) = node_grads[i].take() else { continue };
            let node = &self.nodes[i];
            let out = node.value.as_ref().map(Tensor::data);
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| match self.nodes[v.0].op {
                Op::Param(id) => f(grads.slot(id)),
                _ => {
                    let len = self.value(v).len();
                    f(node_grads[v.0].get_or_insert_with(|| vec![0.0; len]))
                }
            };
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::MatVec(w, x) => {
                    let (m, n) = self.tensor(*w).dims2()?;
                    let wd = self.value(*w);
                    let xv = self.value(*x);
                    acc(*w, &mut |gw| {
                        for r in 0..m {
                            let gr = g[r];
                            if gr != 0.0 {
                                gw[r * n..(r + 1) * n].iter_mut().zip(xv).for_each(|(a, b)| *a += gr * b);
                            }
                        }
                    });
                    acc(*x, &mut |gx| {
                        for r in 0..m {
                            let gr = g[r];
                            if gr != 0.0 {
                                gx.iter_mut().zip(&wd[r * n..(r + 1) * n]).for_each(|(a, b)| *a += gr * b);
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc(*a, &mut |ga| ga.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                    acc(*b, &mut |gb| gb.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                }
                Op::Sub(a, b) => {
                    acc(*a, &mut |ga| ga.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                    acc(*b, &mut |gb| gb.iter_mut().zip(&g).for_each(|(x, y)| *x -= y));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(*a, &mut |ga| {
                        for k in 0..ga.len() {
                            ga[k] += g[k] * bv[k];
                        }
                    });
                    acc(*b, &mut |gb| {
                        for k in 0..gb.len() {
                            gb[k] += g[k] * av[k];
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let y = out.expect("owned");
                    acc(*a, &mut |ga| {
                        for k in 0..ga.len() {
                            ga[k] += g[k] * y[k] * (1.0 - y[k]);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = out.expect("owned");
                    acc(*a, &mut |ga| {
                        for k in 0..ga.len() {
                            ga[k] += g[k] * (1.0 - y[k] * y[k]);
                        }
                    });
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    acc(*a, &mut |ga| {
                        for k in 0..ga.len() {
                            if x[k] > 0.0 {
                                ga[k] += g[k];
                            }
                        }
                    });
                }
                Op::Square(a) => {
                    let x = self.value(*a);
                    acc(*a, &mut |ga| {
                        for k in 0..ga.len() {
                            ga[k] += 2.0 * x[k] * g[k];
                        }
                    });
                }
                Op::OneMinus(a) => acc(*a, &mut |ga| ga.iter_mut().zip(&g).for_each(|(x, y)| *x -= y)),
                Op::Scale(a, c) => acc(*a, &mut |ga| ga.iter_mut().zip(&g).for_each(|(x, y)| *x += c * y)),
                Op::Mask(a, m) => acc(*a, &mut |ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k] * m[k];
                    }
                }),
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = self.value(*p).len();
                        let slice = &g[offset..offset + len];
                        acc(*p, &mut |gp| gp.iter_mut().zip(slice).for_each(|(x, y)| *x += y));
                        offset += len;
                    }
                }
                Op::Row(table, index) => {
                    let (_, cols) = self.tensor(*table).dims2()?;
                    let start = index * cols;
                    acc(*table, &mut |gt| {
                        gt[start..start + cols].iter_mut().zip(&g).for_each(|(x, y)| *x += y)
                    });
                }
                Op::Sum(a) => acc(*a, &mut |ga| ga.iter_mut().for_each(|x| *x += g[0])),
                Op::AddAll(parts) => {
                    for p in parts {
                        acc(*p, &mut |gp| gp.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[(&str, Tensor)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (n, t) in values {
            s.add(*n, t.clone());
        }
        s
    }

    #[test]
    fn square_gradient() {
        let store = store_with(&[("x", Tensor::scalar(3.0))]);
        let mut tape = Tape::new(&store);
        let x = tape.param(0);
        let y = tape.mul(x, x).unwrap();
        assert_eq!(tape.scalar(y), 9.0);
        let g = tape.backward(y, None).unwrap();
        assert_eq!(g.dense(0).data(), [6.0]);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let store = store_with(&[("x", Tensor::scalar(3.0))]);
        let mut tape = Tape::new(&store);
        let _x = tape.param(0);
        let c = tape.constant(vec![5.0]);
        let y = tape.square(c);
        let g = tape.backward(y, None).unwrap();
        assert!(g.get(0).is_none());
        assert_eq!(g.dense(0).data(), [0.0]);
    }

    #[test]
    fn non_scalar_root_needs_seed() {
        let store = store_with(&[("v", Tensor::vector(vec![1.0, 2.0]))]);
        let mut tape = Tape::new(&store);
        let v = tape.param(0);
        let y = tape.tanh(v);
        assert!(matches!(tape.backward(y, None), Err(Error::NonScalarRoot(_))));
        let g = tape.backward(y, Some(&[1.0, 0.0])).unwrap();
        let d = g.dense(0);
        assert!((d.data()[0] - (1.0 - 1f64.tanh().powi(2))).abs() < 1e-15);
        assert_eq!(d.data()[1], 0.0);
    }

    #[test]
    fn shared_node_accumulates() {
        // y = sum(W x) + sum(W x) through one matvec used twice
        let store = store_with(&[
            ("w", Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()),
            ("x", Tensor::vector(vec![0.5, -1.0])),
        ]);
        let mut tape = Tape::new(&store);
        let (w, x) = (tape.param(0), tape.param(1));
        let wx = tape.matvec(w, x).unwrap();
        let both = tape.add(wx, wx).unwrap();
        let y = tape.sum(both);
        let g = tape.backward(y, None).unwrap();
        assert_eq!(g.dense(0).data(), [1.0, -2.0, 1.0, -2.0]);
        assert_eq!(g.dense(1).data(), [8.0, 12.0]);
    }

    #[test]
    fn shape_errors() {
        let store = store_with(&[
            ("w", Tensor::zeros(&[2, 3])),
            ("x", Tensor::vector(vec![1.0, 2.0])),
        ]);
        let mut tape = Tape::new(&store);
        let (w, x) = (tape.param(0), tape.param(1));
        assert!(tape.matvec(w, x).is_err());
        let c = tape.constant(vec![1.0]);
        assert!(tape.add(x, c).is_err());
        assert!(matches!(tape.row(w, 5), Err(Error::IndexOutOfRange { index: 5, rows: 2 })));
    }

    #[test]
    fn scaled_accumulation() {
        let store = store_with(&[("x", Tensor::scalar(2.0))]);
        let mut grads = Gradients::for_store(&store);
        for _ in 0..4 {
            let mut tape = Tape::new(&store);
            let x = tape.param(0);
            let y = tape.square(x);
            tape.backward_into(y, None, 0.25, &mut grads).unwrap();
        }
        assert_eq!(grads.dense(0).data(), [4.0]);
    }
}
