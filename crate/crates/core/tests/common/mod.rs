#![allow(dead_code)]

use qerank_core::delex::RuleSet;
use qerank_core::model::PreparedInstance;
use qerank_core::nn::Gradients;
use qerank_core::rng::rng_from;
use qerank_core::{QeModel, TrainConfig, Vocabulary};
use rand::Rng as _;

pub const WORDS: &[&str] = &[
    "the", "a", "eagle", "serves", "chinese", "food", "in", "riverside", "is", "cheap", "pub", "near", "mill", "family",
    "friendly", "not", ".", ",", "inform", "name", "eattype", "area", "pricerange",
];

pub fn toy_vocab() -> Vocabulary {
    Vocabulary::from_entries(WORDS.iter().copied()).unwrap()
}

pub fn small_config(width: usize) -> TrainConfig {
    TrainConfig {
        width,
        ..TrainConfig::default()
    }
}

pub fn toy_model(width: usize, seed: u64) -> QeModel {
    QeModel::new(toy_vocab(), small_config(width), RuleSet::default(), seed).unwrap()
}

pub fn random_ids(rng: &mut impl rand::Rng, vocab: usize, min: usize, max: usize) -> Vec<usize> {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| rng.gen_range(0..vocab)).collect()
}

pub fn random_instance(rng: &mut impl rand::Rng, vocab: usize, ranking: bool) -> PreparedInstance {
    PreparedInstance {
        mr: random_ids(rng, vocab, 1, 7),
        text_a: random_ids(rng, vocab, 1, 9),
        text_b: ranking.then(|| random_ids(rng, vocab, 1, 9)),
        rating: (!ranking).then(|| rng.gen_range(1.0..=6.0)),
        is_ranking: ranking,
        is_synthetic: false,
    }
}

/// Loss with a fixed dropout stream so repeated evaluations agree.
pub fn loss_at(model: &QeModel, inst: &PreparedInstance, dropout_seed: u64) -> f64 {
    model.loss_value(inst, true, &mut rng_from(dropout_seed)).unwrap()
}

/// Denominator floor for relative gradient errors: central differences at
/// step 1e-5 carry roughly 1e-9 of roundoff on losses of order 10-30.
pub const GRADIENT_FLOOR: f64 = 1e-5;

/// Largest relative error between the analytic gradient and central
/// differences over `coords_per_param` sampled coordinates of each tensor.
pub fn gradient_check(model: &mut QeModel, inst: &PreparedInstance, dropout_seed: u64, coords_per_param: usize, step: f64) -> f64 {
    let mut grads = Gradients::for_store(model.params());
    model
        .accumulate_gradient(inst, true, &mut rng_from(dropout_seed), 1.0, &mut grads)
        .unwrap();
    let ids: Vec<_> = model.params().iter().map(|(id, _, _)| id).collect();
    let mut pick = rng_from(dropout_seed ^ 0x5eed);
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = grads.dense(id);
        let len = model.params().get(id).len();
        let mut coords: Vec<usize> = (0..coords_per_param).map(|_| pick.gen_range(0..len)).collect();
        if model.params().name(id) == "embedding" {
            // rows of tokens actually used
            let width = model.config.width;
            let used: Vec<usize> = inst.mr.iter().chain(&inst.text_a).chain(inst.text_b.iter().flatten()).copied().collect();
            coords = (0..coords_per_param)
                .map(|_| used[pick.gen_range(0..used.len())] * width + pick.gen_range(0..width))
                .collect();
        }
        for c in coords {
            let orig = model.params().get(id).data()[c];
            model.params_mut().get_mut(id).data_mut()[c] = orig + step;
            let up = loss_at(model, inst, dropout_seed);
            model.params_mut().get_mut(id).data_mut()[c] = orig - step;
            let down = loss_at(model, inst, dropout_seed);
            model.params_mut().get_mut(id).data_mut()[c] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic.data()[c];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADIENT_FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Word-level Levenshtein distance.
pub fn edit_distance(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

pub mod brute {
    pub fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let (mx, my) = (mean(x), mean(y));
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for i in 0..x.len() {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx).powi(2);
            syy += (y[i] - my).powi(2);
        }
        sxy / (sxx * syy).sqrt()
    }

    /// Rank = 1 + #smaller + (#equal − 1) / 2.
    pub fn ranks(x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|v| {
                let less = x.iter().filter(|w| *w < v).count() as f64;
                let eq = x.iter().filter(|w| *w == v).count() as f64;
                1.0 + less + (eq - 1.0) / 2.0
            })
            .collect()
    }

    pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
        pearson(&ranks(x), &ranks(y))
    }

    pub fn mae(p: &[f64], g: &[f64]) -> f64 {
        p.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64
    }

    pub fn rmse(p: &[f64], g: &[f64]) -> f64 {
        (p.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64).sqrt()
    }

    pub fn accuracy(margins: &[f64]) -> f64 {
        margins.iter().filter(|m| **m > 0.0).count() as f64 / margins.len() as f64
    }

    /// Mean score difference (worse minus better) over wrongly ranked pairs.
    pub fn ranking_loss(margins: &[f64]) -> f64 {
        let wrong: Vec<f64> = margins.iter().filter(|m| **m <= 0.0).map(|m| -m).collect();
        if wrong.is_empty() {
            0.0
        } else {
            mean(&wrong)
        }
    }
}
