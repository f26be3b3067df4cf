use crate::error::{Error, Result};

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    if xs.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two samples"));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson over average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

pub fn mae(preds: &[f64], golds: &[f64]) -> Result<f64> {
    check_pair(preds, golds)?;
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    Ok(preds.iter().zip(golds).map(|(p, g)| (p - g).abs()).sum::<f64>() / preds.len() as f64)
}

pub fn rmse(preds: &[f64], golds: &[f64]) -> Result<f64> {
    check_pair(preds, golds)?;
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let mse = preds.iter().zip(golds).map(|(p, g)| (p - g).powi(2)).sum::<f64>() / preds.len() as f64;
    Ok(mse.sqrt())
}

/// Outcome of one ranking instance. `margin` is score(preferred) −
/// score(other); the model is right iff it is strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingResult {
    pub margin: f64,
}

impl RankingResult {
    pub fn correct(&self) -> bool {
        self.margin > 0.0
    }
}

/// Fraction of instances ranked correctly; ties count as wrong.
pub fn ranking_accuracy(results: &[RankingResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Empty("ranking results"));
    }
    Ok(results.iter().filter(|r| r.correct()).count() as f64 / results.len() as f64)
}

/// Mean of `score(worse) − score(better)` over wrongly ranked instances
/// (0 when nothing is wrong). With `over_all`, divides by all instances.
pub fn mean_ranking_loss_with(results: &[RankingResult], over_all: bool) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Empty("ranking results"));
    }
    let wrong: Vec<f64> = results.iter().filter(|r| !r.correct()).map(|r| -r.margin).collect();
    if wrong.is_empty() {
        return Ok(0.0);
    }
    let denom = if over_all { results.len() } else { wrong.len() };
    Ok(wrong.iter().sum::<f64>() / denom as f64)
}

pub fn mean_ranking_loss(results: &[RankingResult]) -> Result<f64> {
    mean_ranking_loss_with(results, false)
}
