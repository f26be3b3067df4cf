mod common;

use common::{gradient_check, random_instance, toy_model, toy_vocab};
use qerank_core::delex::RuleSet;
use qerank_core::nn::{Activation, AdamState, Gradients};
use qerank_core::rng::rng_from;
use qerank_core::{Decision, MeaningRepresentation, QeModel, TextOutput, TrainConfig};

fn mr() -> MeaningRepresentation {
    "inform(name='The Eagle', food='chinese')".parse().unwrap()
}

#[test]
fn zero_parameters_score_zero() {
    let mut model = toy_model(8, 1);
    let ids: Vec<_> = model.params().iter().map(|(id, _, _)| id).collect();
    for id in ids {
        model.params_mut().get_mut(id).fill(0.0);
    }
    for text in ["the eagle serves chinese food .", "", "unknownword"] {
        assert_eq!(model.score(&mr(), &TextOutput::new(text)).unwrap(), 0.0);
    }
}

#[test]
fn exactly_one_copy_of_each_parameter() {
    let model = toy_model(8, 2);
    let names: Vec<&str> = model.params().iter().map(|(_, n, _)| n).collect();
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
    // embedding, four GRUs of nine tensors, one dense layer, output layer
    assert_eq!(names.len(), 1 + 4 * 9 + 2 + 2);
}

#[test]
fn ranking_branches_agree_with_single_scores() {
    let model = toy_model(8, 3);
    let a = TextOutput::new("the eagle serves chinese food .");
    let b = TextOutput::new("eagle eagle food");
    let (decision, margin) = model.rank_pair(&mr(), &a, &b).unwrap();
    let sa = model.score(&mr(), &a).unwrap();
    let sb = model.score(&mr(), &b).unwrap();
    assert_eq!(margin, sa - sb);
    assert_eq!(decision, Decision::from_margin(sa - sb));
    let (flipped, m2) = model.rank_pair(&mr(), &b, &a).unwrap();
    assert_eq!(m2, -margin);
    assert_ne!(flipped, decision);
    let (tie, zero) = model.rank_pair(&mr(), &a, &a).unwrap();
    assert_eq!((tie, zero), (Decision::Tie, 0.0));
}

#[test]
fn nbest_order_is_consistent_with_pairwise_decisions() {
    let model = toy_model(8, 4);
    let texts: Vec<TextOutput> = ["the eagle .", "eagle serves food", "a pub near the mill", "cheap cheap", "."]
        .iter()
        .map(|t| TextOutput::new(*t))
        .collect();
    let order = model.rank_n(&mr(), &texts).unwrap();
    for w in order.windows(2) {
        let (d, _) = model.rank_pair(&mr(), &texts[w[0]], &texts[w[1]]).unwrap();
        assert_ne!(d, Decision::BBetter);
    }
}

#[test]
fn evaluation_scores_ignore_the_rng_and_are_repeatable() {
    let model = toy_model(8, 5);
    let t = TextOutput::new("the eagle serves chinese food .");
    assert_eq!(model.score(&mr(), &t).unwrap(), model.score(&mr(), &t).unwrap());
}

#[test]
fn gradients_match_finite_differences_with_two_identity_dense_layers() {
    let config = TrainConfig {
        width: 5,
        dense_layers: 2,
        dense_activation: Activation::Identity,
        ..TrainConfig::default()
    };
    let mut model = QeModel::new(toy_vocab(), config, RuleSet::default(), 11).unwrap();
    let mut rng = rng_from(12);
    for (i, ranking) in [false, true, false, true].into_iter().enumerate() {
        let inst = random_instance(&mut rng, model.vocab.len(), ranking);
        let worst = gradient_check(&mut model, &inst, 40 + i as u64, 4, 1e-5);
        assert!(worst < 1e-4, "relative error {worst}");
    }
}

#[test]
fn first_adam_step_moves_each_touched_weight_by_the_learning_rate() {
    let mut model = toy_model(6, 6);
    let inst = random_instance(&mut rng_from(13), model.vocab.len(), false);
    let mut grads = Gradients::for_store(model.params());
    model.accumulate_gradient(&inst, false, &mut rng_from(0), 1.0, &mut grads).unwrap();
    let before = model.params().clone();
    let mut adam = AdamState::new(model.params());
    adam.step(model.params_mut(), &grads, 1e-3).unwrap();
    for (id, _, t) in model.params().iter() {
        let g = grads.dense(id);
        for ((new, old), g) in t.data().iter().zip(before.get(id).data()).zip(g.data()) {
            let moved = old - new;
            if *g == 0.0 {
                assert_eq!(moved, 0.0);
            } else if g.abs() > 1e-6 {
                // bias-corrected first step: lr * g / (|g| + eps)
                assert!((moved - 1e-3 * g.signum()).abs() < 1e-5, "moved {moved} for grad {g}");
            }
        }
    }
}

#[test]
fn delexicalising_model_sees_placeholders() {
    let config = TrainConfig {
        width: 4,
        delex: true,
        ..TrainConfig::default()
    };
    let vocab = qerank_core::Vocabulary::from_entries(["x-name", "serves", "food", "inform", "name"]).unwrap();
    let model = QeModel::new(vocab.clone(), config, RuleSet::default(), 1).unwrap();
    let mr: MeaningRepresentation = "inform(name='The Eagle')".parse().unwrap();
    let (m, t) = model.prepare_text(&mr, &TextOutput::new("The Eagle serves food"));
    assert_eq!(t, vec![vocab.id("x-name"), vocab.id("serves"), vocab.id("food")]);
    assert!(m.contains(&vocab.id("x-name")));
}
