use qerank_core::nn::{bidir_encode, dense, dropout, embed, gru_run, gru_step, Activation, GruParams, ParamStore, Tape, Tensor};
use qerank_core::rng::rng_from;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gru(store: &mut ParamStore, input: usize, hidden: usize, seed: u64) -> GruParams {
    GruParams::init(store, "gru", input, hidden, &mut rng_from(seed))
}

#[test]
fn zero_weight_gru_stays_at_zero_state() {
    let mut store = ParamStore::new();
    let g = gru(&mut store, 3, 4, 1);
    for id in g.ids() {
        store.get_mut(id).fill(0.0);
    }
    let mut tape = Tape::new(&store);
    let p = g.on_tape(&mut tape);
    let xs: Vec<_> = (0..5).map(|i| tape.constant(vec![i as f64, -1.0, 2.0])).collect();
    let h = gru_run(&mut tape, xs, &p).unwrap();
    assert_eq!(tape.value(h), &[0.0; 4]);
}

#[test]
fn candidate_bias_alone_follows_the_halving_recurrence() {
    // z = σ(0) = 1/2 and h̃ = tanh(c): h_t = h_{t-1}/2 + tanh(c)/2
    let mut store = ParamStore::new();
    let g = gru(&mut store, 2, 1, 2);
    for id in g.ids() {
        store.get_mut(id).fill(0.0);
    }
    let c = 0.7;
    store.get_mut(g.ids()[8]).fill(c);
    let mut tape = Tape::new(&store);
    let p = g.on_tape(&mut tape);
    let mut expected = 0.0;
    let mut h = tape.constant(vec![0.0]);
    for _ in 0..4 {
        let x = tape.constant(vec![1.0, 2.0]);
        h = gru_step(&mut tape, x, h, &p).unwrap();
        expected = expected / 2.0 + c.tanh() / 2.0;
        assert!((tape.scalar(h) - expected).abs() < 1e-15);
    }
}

#[test]
fn scalar_gru_step_matches_hand_computation() {
    let mut store = ParamStore::new();
    let g = gru(&mut store, 1, 1, 3);
    let vals = [0.3, -0.8, 0.1, 1.2, 0.5, -0.2, -0.6, 0.9, 0.05];
    for (id, v) in g.ids().into_iter().zip(vals) {
        store.get_mut(id).fill(v);
    }
    let [wz, uz, bz, wr, ur, br, wh, uh, bh] = vals;
    let (x, h0) = (0.75, -0.4);
    let z = sigmoid(wz * x + uz * h0 + bz);
    let r = sigmoid(wr * x + ur * h0 + br);
    let cand = (wh * x + uh * (r * h0) + bh).tanh();
    let want = (1.0 - z) * h0 + z * cand;

    let mut tape = Tape::new(&store);
    let p = g.on_tape(&mut tape);
    let xv = tape.constant(vec![x]);
    let hv = tape.constant(vec![h0]);
    let got = gru_step(&mut tape, xv, hv, &p).unwrap();
    assert!((tape.scalar(got) - want).abs() < 1e-15);
}

#[test]
fn saturated_update_gate_copies_the_previous_state() {
    let mut store = ParamStore::new();
    let g = gru(&mut store, 2, 3, 4);
    store.get_mut(g.ids()[2]).fill(-60.0);
    let mut tape = Tape::new(&store);
    let p = g.on_tape(&mut tape);
    let h0 = tape.constant(vec![0.2, -0.5, 0.9]);
    let x = tape.constant(vec![1.0, -1.0]);
    let h = gru_step(&mut tape, x, h0, &p).unwrap();
    for (a, b) in tape.value(h).iter().zip([0.2, -0.5, 0.9]) {
        assert!((a - b).abs() < 1e-20);
    }
}

#[test]
fn wrong_state_width_is_a_shape_error() {
    let mut store = ParamStore::new();
    let g = gru(&mut store, 2, 3, 5);
    let mut tape = Tape::new(&store);
    let p = g.on_tape(&mut tape);
    let x = tape.constant(vec![1.0, 1.0]);
    let h = tape.constant(vec![0.0; 2]);
    assert!(matches!(gru_step(&mut tape, x, h, &p), Err(qerank_core::Error::Shape(_))));
}

#[test]
fn bidirectional_halves_swap_when_input_is_reversed() {
    let mut store = ParamStore::new();
    let g = gru(&mut store, 2, 3, 6);
    let mut tape = Tape::new(&store);
    let p = g.on_tape(&mut tape);
    let xs: Vec<_> = (0..4).map(|i| tape.constant(vec![i as f64 * 0.3, 1.0 - i as f64])).collect();
    let rev: Vec<_> = xs.iter().rev().copied().collect();
    let a = bidir_encode(&mut tape, &xs, &p, &p).unwrap();
    let b = bidir_encode(&mut tape, &rev, &p, &p).unwrap();
    let (a, b) = (tape.value(a).to_vec(), tape.value(b).to_vec());
    assert_eq!(a[..3], b[3..]);
    assert_eq!(a[3..], b[..3]);
}

#[test]
fn dense_layer_matches_manual_affine_tanh() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::new(vec![2, 3], vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap());
    let b = store.add("b", Tensor::vector(vec![0.05, -0.05]));
    let mut tape = Tape::new(&store);
    let (wv, bv) = (tape.param(w), tape.param(b));
    let x = tape.constant(vec![1.0, 2.0, -1.0]);
    let y = dense(&mut tape, x, wv, bv, Activation::Tanh).unwrap();
    let lin = dense(&mut tape, x, wv, bv, Activation::Identity).unwrap();
    let pre = [0.1 - 0.4 - 0.3 + 0.05, 0.4 + 1.0 + 0.6 - 0.05];
    assert_eq!(tape.value(lin), &pre);
    assert_eq!(tape.value(y), &[pre[0].tanh(), pre[1].tanh()]);
}

#[test]
fn embedding_gradient_counts_row_uses() {
    let mut store = ParamStore::new();
    let table = store.add("emb", Tensor::new(vec![4, 2], (0..8).map(f64::from).collect()).unwrap());
    let mut tape = Tape::new(&store);
    let t = tape.param(table);
    let rows = embed(&mut tape, t, &[1, 3, 1]).unwrap();
    assert_eq!(tape.value(rows[1]), &[6.0, 7.0]);
    let all = tape.concat(&rows);
    let total = tape.sum(all);
    let grads = tape.backward(total, None).unwrap();
    assert_eq!(grads.dense(table).data(), &[0.0, 0.0, 2.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
    assert!(embed(&mut tape, t, &[4]).is_err());
}

#[test]
fn dropout_keeps_the_expected_fraction_and_rescales() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let x = tape.constant(vec![1.0; 10_000]);
    let mut rng = rng_from(9);
    let y = dropout(&mut tape, x, 0.8, true, &mut rng).unwrap();
    let v = tape.value(y);
    let kept = v.iter().filter(|e| **e != 0.0).count() as f64 / v.len() as f64;
    assert!((kept - 0.8).abs() < 0.02, "kept {kept}");
    assert!(v.iter().all(|e| *e == 0.0 || (*e - 1.25).abs() < 1e-15));
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean - 1.0).abs() < 0.025);

    let z = dropout(&mut tape, x, 0.8, false, &mut rng).unwrap();
    assert_eq!(z, x);
    assert!(dropout(&mut tape, x, 0.0, true, &mut rng).is_err());
}

#[test]
fn backward_requires_scalar_root_or_seed() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let x = tape.constant(vec![1.0, 2.0]);
    let y = tape.square(x);
    assert!(matches!(tape.backward(y, None), Err(qerank_core::Error::NonScalarRoot(_))));
    assert!(tape.backward(y, Some(&[1.0, 1.0])).is_ok());
}
