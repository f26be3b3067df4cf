use super::tape::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || store.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        Self {
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    /// One bias-corrected Adam update of every parameter. Untouched
    /// parameters see a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.len() != store.len() || self.first_moment.len() != store.len() {
            return Err(Error::Shape(format!(
                "adam: {} parameters, {} gradients, {} moment slots",
                store.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for id in 0..store.len() {
            let m = self.first_moment[id].data_mut();
            let v = self.second_moment[id].data_mut();
            let p = store.get_mut(id).data_mut();
            if m.len() != p.len() {
                return Err(Error::Shape(format!("adam: moment/parameter size mismatch for parameter {id}")));
            }
            match grads.get(id) {
                Some(g) => {
                    for (((pi, mi), vi), gi) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g.data()) {
                        *mi = b1 * *mi + (1.0 - b1) * gi;
                        *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                        *pi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                    }
                }
                None => {
                    for ((pi, mi), vi) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi *= b1;
                        *vi *= b2;
                        if *mi != 0.0 {
                            *pi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                        }
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
    use crate::nn::Tape;

    fn one_param(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("x", Tensor::scalar(v));
        s
    }

    fn grads_of(store: &ParamStore, g: f64) -> Gradients {
        // d/dx (g * x) = g
        let mut tape = Tape::new(store);
        let x = tape.param(0);
        let y = tape.scale(x, g);
        tape.backward(y, None).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut store = one_param(1.5);
        let mut state = AdamState::new(&store);
        let g = grads_of(&store, 0.0);
        state.step(&mut store, &g, 1e-4).unwrap();
        assert_eq!(store.get(0).data(), [1.5]);
        let empty = Gradients::for_store(&store);
        state.step(&mut store, &empty, 1e-4).unwrap();
        assert_eq!(store.get(0).data(), [1.5]);
    }

    #[test]
    fn first_step_is_signed_lr() {
        for g in [3.0, -0.2, 1e-3] {
            let mut store = one_param(0.0);
            let mut state = AdamState::new(&store);
            let grads = grads_of(&store, g);
            state.step(&mut store, &grads, 1e-4).unwrap();
            // m̂ = g, v̂ = g², update = lr * g / (|g| + eps)
            let expected = -1e-4 * g / (g.abs() + 1e-8);
            assert!((store.get(0).data()[0] - expected).abs() < 1e-15);
            assert!((store.get(0).data()[0] + 1e-4 * g.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn two_steps_follow_recurrence() {
        let (g, lr) = (0.5, 0.01);
        let mut store = one_param(1.0);
        let mut state = AdamState::new(&store);
        for _ in 0..2 {
            let grads = grads_of(&store, g);
            state.step(&mut store, &grads, lr).unwrap();
        }
        assert_eq!(state.step, 2);
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= lr * mh / (vh.sqrt() + 1e-8);
        }
        assert!((state.first_moment[0].data()[0] - m).abs() < 1e-15);
        assert!((state.second_moment[0].data()[0] - v).abs() < 1e-15);
        assert!((store.get(0).data()[0] - x).abs() < 1e-15);
    }
}
