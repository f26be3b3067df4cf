//! Training loop: shuffled mixed rating/ranking batches, one Adam step per
//! batch on the batch-mean loss, synthetic data dropped after
//! `synthetic_epochs`, and best-epoch selection on the dev set.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::checkpoint::{Checkpoint, TrainingMetadata};
use crate::config::{SelectionMetric, TrainConfig};
use crate::data::{build_vocabulary, Dataset};
use crate::delex::{delexicalize, RuleSet};
use crate::error::{Error, Result};
use crate::eval::{average_reports, evaluate, pearson, MetricReport, Task};
use crate::model::{PreparedInstance, QeModel};
use crate::nn::{AdamState, Gradients};
use crate::rng::derived_rng;

#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Instances used in this epoch.
    pub instances: usize,
    pub train_loss: f64,
    pub dev_metric: Option<f64>,
    pub seconds: f64,
}

/// Wall time is not part of the trajectory and is ignored by equality.
impl PartialEq for EpochRecord {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.instances == other.instances
            && self.train_loss.to_bits() == other.train_loss.to_bits()
            && self.dev_metric.map(f64::to_bits) == other.dev_metric.map(f64::to_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the selected epoch.
    pub selected: usize,
    pub selection_metric: SelectionMetric,
}

impl TrainHistory {
    pub fn selected_epoch(&self) -> &EpochRecord {
        &self.epochs[self.selected]
    }
}

/// Applies delexicalisation to every instance.
pub fn delexicalize_dataset(dataset: &Dataset, rules: &RuleSet) -> Dataset {
    let instances = dataset
        .iter()
        .map(|inst| {
            let a = delexicalize(&inst.mr, &inst.text_a, rules);
            let mut out = inst.clone();
            out.text_b = inst.text_b.as_ref().map(|b| delexicalize(&inst.mr, b, rules).text);
            out.mr = a.mr;
            out.text_a = a.text;
            out
        })
        .collect();
    Dataset::new(instances, dataset.criterion)
}

fn resolve_selection(config: &TrainConfig, dev: &Dataset) -> SelectionMetric {
    match config.selection_metric {
        SelectionMetric::Auto if dev.ranking_count() > 0 && dev.ranking_count() == dev.len() => SelectionMetric::Accuracy,
        SelectionMetric::Auto => SelectionMetric::Pearson,
        other => other,
    }
}

/// Dev-set selection metric; `None` when undefined (e.g. constant scores).
fn dev_metric(model: &QeModel, dev: &[PreparedInstance], metric: SelectionMetric) -> Result<Option<f64>> {
    if dev.is_empty() {
        return Ok(None);
    }
    let scores = dev.iter().map(|i| model.score_prepared(i)).collect::<Result<Vec<_>>>()?;
    match metric {
        SelectionMetric::Accuracy => {
            let ranked: Vec<f64> = scores.iter().filter_map(|s| s.margin()).collect();
            if ranked.is_empty() {
                return Ok(None);
            }
            Ok(Some(ranked.iter().filter(|m| **m > 0.0).count() as f64 / ranked.len() as f64))
        }
        _ => {
            let (preds, golds): (Vec<f64>, Vec<f64>) = dev
                .iter()
                .zip(&scores)
                .filter_map(|(i, s)| i.rating.map(|y| (model.postprocess(s.score_a), y)))
                .unzip();
            Ok(pearson(&preds, &golds).ok())
        }
    }
}

/// Trains a fresh model on `train_set`, selecting the epoch with the best
/// dev metric (earliest on ties; the last epoch when there is no dev set).
pub fn train(train_set: &Dataset, dev_set: &Dataset, config: &TrainConfig, rules: &RuleSet) -> Result<(Checkpoint, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    dev_set.ensure_no_synthetic("the dev set")?;
    for inst in train_set.iter() {
        inst.validate()?;
    }

    let vocab = if config.delex {
        build_vocabulary(&[&delexicalize_dataset(train_set, rules)], config.min_count)?
    } else {
        build_vocabulary(&[train_set], config.min_count)?
    };
    let mut model = QeModel::new(vocab, config.clone(), rules.clone(), config.seed)?;
    let prepared: Vec<PreparedInstance> = train_set.iter().map(|i| model.prepare(i)).collect();
    let dev: Vec<PreparedInstance> = dev_set.iter().map(|i| model.prepare(i)).collect();
    let selection = resolve_selection(config, dev_set);

    let mut adam = AdamState::new(model.params());
    let mut grads = Gradients::for_store(model.params());
    let mut shuffle_rng = derived_rng(config.seed, "shuffle", 0);
    let mut dropout_rng = derived_rng(config.seed, "dropout", 0);

    let mut epochs = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(usize, Option<f64>, crate::nn::ParamStore)> = None;
    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        let use_synthetic = epoch <= config.synthetic_epochs;
        let mut order: Vec<usize> = (0..prepared.len())
            .filter(|&i| use_synthetic || !prepared[i].is_synthetic)
            .collect();
        if order.is_empty() {
            return Err(Error::Empty("non-synthetic training instances"));
        }
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                loss_sum += model.accumulate_gradient(&prepared[i], true, &mut dropout_rng, scale, &mut grads)?;
            }
            adam.step(model.params_mut(), &grads, config.learning_rate)?;
        }

        let metric = dev_metric(&model, &dev, selection)?;
        let record = EpochRecord {
            epoch,
            instances: order.len(),
            train_loss: loss_sum / order.len() as f64,
            dev_metric: metric,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: {} instances, loss {:.4}, dev {selection} {:?}",
            record.instances,
            record.train_loss,
            record.dev_metric
        );
        epochs.push(record);

        let improves = match (&best, metric) {
            (None, _) => true,
            _ if dev.is_empty() => true,
            (Some((_, None, _)), Some(_)) => true,
            (Some((_, Some(b), _)), Some(m)) => m > *b,
            (Some(_), None) => false,
        };
        if improves {
            best = Some((epoch - 1, metric, model.params().clone()));
        }
    }

    let (selected, dev_value, params) = best.expect("at least one epoch");
    *model.params_mut() = params;
    let history = TrainHistory {
        epochs,
        selected,
        selection_metric: selection,
    };
    let checkpoint = Checkpoint {
        model,
        metadata: TrainingMetadata {
            epoch: selected + 1,
            dev_metric: dev_value,
            seed: config.seed,
        },
    };
    Ok((checkpoint, history))
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub report: MetricReport,
    pub history: TrainHistory,
    pub checkpoint: Checkpoint,
}

#[derive(Debug, Clone)]
pub struct MultiSeedResult {
    /// Per-metric means, with `<metric>_std` entries.
    pub mean: MetricReport,
    pub runs: Vec<SeedRun>,
}

impl MultiSeedResult {
    pub fn per_seed(&self) -> impl Iterator<Item = (u64, &MetricReport)> {
        self.runs.iter().map(|r| (r.seed, &r.report))
    }
}

/// Trains once per seed, evaluates each selected model on `test_set` and
/// averages the metrics. Runs are independent and execute in parallel.
pub fn multi_seed_run(
    train_set: &Dataset,
    dev_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
    rules: &RuleSet,
    seeds: &[u64],
) -> Result<MultiSeedResult> {
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let mut distinct = seeds.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != seeds.len() {
        return Err(Error::Config("seeds must be distinct".into()));
    }
    test_set.ensure_no_synthetic("the test set")?;

    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = TrainConfig { seed, ..config.clone() };
            let (checkpoint, history) = train(train_set, dev_set, &cfg, rules)?;
            let (report, _) = evaluate(&checkpoint.model, test_set)?;
            Ok(SeedRun {
                seed,
                report,
                history,
                checkpoint,
            })
        })
        .collect::<Result<_>>()?;
    let reports: Vec<MetricReport> = runs.iter().map(|r| r.report.clone()).collect();
    Ok(MultiSeedResult {
        mean: average_reports(&reports)?,
        runs,
    })
}

/// Task of a dataset for reporting purposes.
pub fn task_of(dataset: &Dataset) -> Task {
    if dataset.ranking_count() > 0 && dataset.ranking_count() == dataset.len() {
        Task::Ranking
    } else {
        Task::Rating
    }
}
