use qerank_core::delex::RuleSet;
use qerank_core::trainer::train;
use qerank_core::{Criterion, Dataset, Error, MeaningRepresentation, QeInstance, TextOutput, TrainConfig};

fn data() -> (Dataset, Dataset) {
    let mr: MeaningRepresentation = "inform(name='The Eagle', food='chinese')".parse().unwrap();
    let good = TextOutput::new("the eagle serves chinese food .");
    let bad = TextOutput::new("the eagle eagle serves .");
    let mut train = vec![
        QeInstance::rating(mr.clone(), good.clone(), 6.0, "rating:a").unwrap(),
        QeInstance::rating(mr.clone(), bad.clone(), 2.0, "rating:b").unwrap(),
        QeInstance::ranking(mr.clone(), good.clone(), bad.clone(), "rank:a>b"),
    ];
    for k in 1..=3 {
        let mut s = QeInstance::rating(mr.clone(), TextOutput::new("eagle food food"), 6.0 - k as f64, format!("synth:rating:output:{k}")).unwrap();
        s.is_synthetic = true;
        train.push(s);
    }
    let dev = vec![
        QeInstance::rating(mr.clone(), good, 5.0, "rating:a").unwrap(),
        QeInstance::rating(mr, bad, 3.0, "rating:b").unwrap(),
    ];
    (Dataset::new(train, Criterion::Quality), Dataset::new(dev, Criterion::Quality))
}

fn config(seed: u64) -> TrainConfig {
    TrainConfig {
        width: 6,
        batch_size: 2,
        max_epochs: 6,
        synthetic_epochs: 3,
        learning_rate: 1e-2,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let (t, d) = data();
    let (a, ha) = train(&t, &d, &config(3), &RuleSet::default()).unwrap();
    let (b, hb) = train(&t, &d, &config(3), &RuleSet::default()).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(ha.epochs, hb.epochs);
    let (c, _) = train(&t, &d, &config(4), &RuleSet::default()).unwrap();
    assert_ne!(a.to_bytes(), c.to_bytes());
}

#[test]
fn synthetic_instances_leave_after_their_epochs() {
    let (t, d) = data();
    let (_, h) = train(&t, &d, &config(1), &RuleSet::default()).unwrap();
    let counts: Vec<usize> = h.epochs.iter().map(|e| e.instances).collect();
    assert_eq!(counts, vec![6, 6, 6, 3, 3, 3]);
}

#[test]
fn selected_epoch_is_the_earliest_best_dev_score() {
    let (t, d) = data();
    let (ck, h) = train(&t, &d, &config(2), &RuleSet::default()).unwrap();
    let metrics: Vec<f64> = h.epochs.iter().map(|e| e.dev_metric.unwrap_or(f64::NEG_INFINITY)).collect();
    let best = metrics.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = metrics.iter().position(|m| *m == best).unwrap();
    assert_eq!(h.selected, first);
    assert_eq!(ck.metadata.epoch, first + 1);
}

#[test]
fn synthetic_dev_data_is_rejected() {
    let (t, _) = data();
    let err = train(&t, &t, &config(1), &RuleSet::default()).unwrap_err();
    assert!(matches!(err, Error::SyntheticInEvaluation(_)), "{err:?}");
}

#[test]
fn training_lowers_the_loss_on_a_tiny_set() {
    let (t, d) = data();
    let cfg = TrainConfig {
        max_epochs: 40,
        synthetic_epochs: 0,
        ..config(5)
    };
    let (_, h) = train(&t, &d, &cfg, &RuleSet::default()).unwrap();
    assert!(h.epochs.last().unwrap().train_loss < h.epochs[0].train_loss);
}
