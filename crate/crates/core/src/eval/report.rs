use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{mae, mean_ranking_loss, pearson, ranking_accuracy, rmse, spearman, RankingResult};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Decision, QeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Rating,
    Ranking,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rating" => Ok(Task::Rating),
            "ranking" => Ok(Task::Ranking),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

/// Named metric values; serialises to one flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: Task,
    pub n: usize,
    #[serde(flatten)]
    pub metrics: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("finite metrics serialise")
    }
}

/// Pearson, Spearman, MAE and RMSE; correlations are left out when
/// undefined (constant predictions or golds).
pub fn rating_report(preds: &[f64], golds: &[f64]) -> Result<MetricReport> {
    let mut metrics = BTreeMap::new();
    if let Ok(r) = pearson(preds, golds) {
        metrics.insert("pearson".to_string(), r);
    }
    if let Ok(r) = spearman(preds, golds) {
        metrics.insert("spearman".to_string(), r);
    }
    metrics.insert("mae".to_string(), mae(preds, golds)?);
    metrics.insert("rmse".to_string(), rmse(preds, golds)?);
    Ok(MetricReport {
        task: Task::Rating,
        n: preds.len(),
        metrics,
    })
}

pub fn ranking_report(results: &[RankingResult]) -> Result<MetricReport> {
    let mut metrics = BTreeMap::new();
    metrics.insert("accuracy".to_string(), ranking_accuracy(results)?);
    metrics.insert("mean_ranking_loss".to_string(), mean_ranking_loss(results)?);
    Ok(MetricReport {
        task: Task::Ranking,
        n: results.len(),
        metrics,
    })
}

/// Predicting `mean` for every instance.
pub fn constant_baseline_with(mean: f64, golds: &[f64]) -> Result<MetricReport> {
    let preds = vec![mean; golds.len()];
    let mut metrics = BTreeMap::new();
    metrics.insert("mae".to_string(), mae(&preds, golds)?);
    metrics.insert("rmse".to_string(), rmse(&preds, golds)?);
    Ok(MetricReport {
        task: Task::Rating,
        n: golds.len(),
        metrics,
    })
}

/// Mean-rating baseline over `golds`.
pub fn constant_baseline(golds: &[f64]) -> Result<MetricReport> {
    if golds.is_empty() {
        return Err(Error::Empty("gold ratings"));
    }
    constant_baseline_with(golds.iter().sum::<f64>() / golds.len() as f64, golds)
}

/// Per-instance model output aligned with a gold dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Rating(Vec<f64>),
    /// `(decision, score(text_a) − score(text_b))`.
    Ranking(Vec<(Decision, f64)>),
}

impl Predictions {
    pub fn task(&self) -> Task {
        match self {
            Predictions::Rating(_) => Task::Rating,
            Predictions::Ranking(_) => Task::Ranking,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Predictions::Rating(p) => p.len(),
            Predictions::Ranking(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether each ranking decision names `text_a`.
    pub fn ranking_outcomes(&self) -> Result<Vec<bool>> {
        match self {
            Predictions::Ranking(p) => Ok(p.iter().map(|(d, _)| *d == Decision::ABetter).collect()),
            Predictions::Rating(_) => Err(Error::Data("rating predictions have no ranking outcomes".into())),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        match self {
            Predictions::Rating(p) => {
                for (i, v) in p.iter().enumerate() {
                    writeln!(s, "{i}\t{v:?}").expect("string write");
                }
            }
            Predictions::Ranking(p) => {
                for (i, (d, m)) in p.iter().enumerate() {
                    writeln!(s, "{i}\t{}\t{m:?}", d.as_str()).expect("string write");
                }
            }
        }
        s
    }

    pub fn parse_tsv(text: &str, task: Task, origin: &Path) -> Result<Self> {
        let mut rating = BTreeMap::new();
        let mut ranking = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |m: &str| Error::parse(origin, n + 1, m.to_string());
            let id: usize = cols[0].trim().parse().map_err(|_| bad("bad instance id"))?;
            let dup = match task {
                Task::Rating => {
                    if cols.len() != 2 {
                        return Err(bad("expected instance_id<TAB>prediction"));
                    }
                    let v: f64 = cols[1].trim().parse().map_err(|_| bad("bad prediction"))?;
                    rating.insert(id, v).is_some()
                }
                Task::Ranking => {
                    if cols.len() != 3 {
                        return Err(bad("expected instance_id<TAB>decision<TAB>margin"));
                    }
                    let d: Decision = cols[1].trim().parse().map_err(|e: Error| bad(&e.to_string()))?;
                    let m: f64 = cols[2].trim().parse().map_err(|_| bad("bad margin"))?;
                    ranking.insert(id, (d, m)).is_some()
                }
            };
            if dup {
                return Err(bad("duplicate instance id"));
            }
        }
        let dense = |ids: Vec<usize>| -> Result<()> {
            if ids.iter().enumerate().any(|(i, id)| i != *id) {
                return Err(Error::Data(format!("{}: instance ids must be 0..n without gaps", origin.display())));
            }
            Ok(())
        };
        Ok(match task {
            Task::Rating => {
                dense(rating.keys().copied().collect())?;
                Predictions::Rating(rating.into_values().collect())
            }
            Task::Ranking => {
                dense(ranking.keys().copied().collect())?;
                Predictions::Ranking(ranking.into_values().collect())
            }
        })
    }

    pub fn load(path: &Path, task: Task) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text, task, path)
    }
}

/// The single task of an evaluation set; mixed sets are rejected.
pub fn dataset_task(gold: &Dataset) -> Result<Task> {
    let ranking = gold.ranking_count();
    match (ranking, gold.len()) {
        (_, 0) => Err(Error::Empty("evaluation set")),
        (0, _) => Ok(Task::Rating),
        (r, n) if r == n => Ok(Task::Ranking),
        _ => Err(Error::Data("evaluation set mixes rating and ranking instances".into())),
    }
}

/// Scores predictions against the gold dataset they are aligned with.
pub fn score_predictions(preds: &Predictions, gold: &Dataset) -> Result<MetricReport> {
    gold.ensure_no_synthetic("evaluation data")?;
    let task = dataset_task(gold)?;
    if preds.task() != task {
        return Err(Error::Data(format!("{:?} predictions for a {task:?} gold set", preds.task())));
    }
    if preds.len() != gold.len() {
        return Err(Error::LengthMismatch(preds.len(), gold.len()));
    }
    match preds {
        Predictions::Rating(p) => {
            let golds: Vec<f64> = gold.iter().map(|i| i.rating.expect("rating set")).collect();
            rating_report(p, &golds)
        }
        Predictions::Ranking(p) => {
            if let Some(i) = p.iter().position(|(d, m)| Decision::from_margin(*m) != *d) {
                return Err(Error::Data(format!("instance {i}: decision disagrees with the sign of its margin")));
            }
            let results: Vec<RankingResult> = p.iter().map(|(_, m)| RankingResult { margin: *m }).collect();
            ranking_report(&results)
        }
    }
}

/// Evaluation-mode predictions of `model` on every instance of `gold`.
pub fn predict_dataset(model: &QeModel, gold: &Dataset) -> Result<Predictions> {
    let task = dataset_task(gold)?;
    match task {
        Task::Rating => gold
            .iter()
            .map(|i| model.predict(&i.mr, &i.text_a))
            .collect::<Result<Vec<_>>>()
            .map(Predictions::Rating),
        Task::Ranking => gold
            .iter()
            .map(|i| model.rank_pair(&i.mr, &i.text_a, i.text_b.as_ref().expect("ranking set")))
            .collect::<Result<Vec<_>>>()
            .map(Predictions::Ranking),
    }
}

pub fn evaluate(model: &QeModel, gold: &Dataset) -> Result<(MetricReport, Predictions)> {
    gold.ensure_no_synthetic("evaluation data")?;
    let preds = predict_dataset(model, gold)?;
    let report = score_predictions(&preds, gold)?;
    Ok((report, preds))
}

/// Per-metric arithmetic means (and population standard deviations, keyed
/// `<metric>_std`) over reports of the same task. Metrics missing from any
/// report are dropped.
pub fn average_reports(reports: &[MetricReport]) -> Result<MetricReport> {
    let first = reports.first().ok_or(Error::Empty("reports to average"))?;
    if reports.iter().any(|r| r.task != first.task) {
        return Err(Error::Data("cannot average reports of different tasks".into()));
    }
    let mut metrics = BTreeMap::new();
    for name in first.metrics.keys() {
        let values: Option<Vec<f64>> = reports.iter().map(|r| r.get(name)).collect();
        if let Some(values) = values {
            let k = values.len() as f64;
            let mean = values.iter().sum::<f64>() / k;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
            metrics.insert(name.clone(), mean);
            metrics.insert(format!("{name}_std"), var.sqrt());
        }
    }
    Ok(MetricReport {
        task: first.task,
        n: first.n,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_baseline_fixtures() {
        let r = constant_baseline(&[3.0, 3.0, 3.0]).unwrap();
        assert_eq!((r.get("mae"), r.get("rmse")), (Some(0.0), Some(0.0)));
        let r = constant_baseline(&[1.0, 5.0]).unwrap();
        assert_eq!((r.get("mae"), r.get("rmse")), (Some(2.0), Some(2.0)));
        assert!(r.get("pearson").is_none());
        assert!(constant_baseline(&[]).is_err());
    }

    #[test]
    fn report_json_is_flat() {
        let r = rating_report(&[1.0, 2.0, 3.0], &[1.0, 2.5, 3.5]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["task"], "rating");
        assert_eq!(v["n"], 3);
        assert!(v["pearson"].as_f64().unwrap() > 0.9);
        let back: MetricReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn prediction_tsv_round_trip() {
        let p = Predictions::Ranking(vec![(Decision::ABetter, 0.25), (Decision::Tie, 0.0), (Decision::BBetter, -1.5)]);
        let back = Predictions::parse_tsv(&p.to_tsv(), Task::Ranking, Path::new("p")).unwrap();
        assert_eq!(back, p);
        let r = Predictions::Rating(vec![3.25, 1.0 / 3.0]);
        assert_eq!(Predictions::parse_tsv(&r.to_tsv(), Task::Rating, Path::new("p")).unwrap(), r);
        assert!(Predictions::parse_tsv("0\t1\n0\t2\n", Task::Rating, Path::new("p")).is_err());
        assert!(Predictions::parse_tsv("1\t1\n", Task::Rating, Path::new("p")).is_err());
        assert!(Predictions::parse_tsv("0\tmaybe\t1\n", Task::Ranking, Path::new("p")).is_err());
    }

    #[test]
    fn averaging() {
        let mk = |a: f64| MetricReport {
            task: Task::Ranking,
            n: 10,
            metrics: [("accuracy".to_string(), a)].into_iter().collect(),
        };
        let avg = average_reports(&[mk(0.6), mk(0.8)]).unwrap();
        assert!((avg.get("accuracy").unwrap() - 0.7).abs() < 1e-15);
        assert!((avg.get("accuracy_std").unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(average_reports(&[mk(0.6)]).unwrap().get("accuracy"), Some(0.6));
    }
}
