use rand::Rng as _;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom, via
/// the regularised incomplete beta function.
pub fn student_t_upper_tail(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilliamsResult {
    pub t: f64,
    /// One-tailed p for `r12 > r13`.
    pub p: f64,
    pub df: f64,
}

/// Williams test for two dependent correlations `r12` and `r13` sharing
/// variable 1, where `r23` correlates the two competitors.
pub fn williams_test(r12: f64, r13: f64, r23: f64, n: usize) -> Result<WilliamsResult> {
    if n < 4 {
        return Err(Error::Degenerate(format!("williams test needs n >= 4, got {n}")));
    }
    for r in [r12, r13, r23] {
        if !(r > -1.0 && r < 1.0) {
            return Err(Error::Degenerate(format!("correlation {r} outside (-1, 1)")));
        }
    }
    let k = 1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23;
    if k <= 0.0 {
        return Err(Error::Degenerate(format!("correlation matrix determinant {k} <= 0")));
    }
    let nf = n as f64;
    let rbar = (r12 + r13) / 2.0;
    let denom = 2.0 * k * (nf - 1.0) / (nf - 3.0) + rbar * rbar * (1.0 - r23).powi(3);
    let t = (r12 - r13) * ((nf - 1.0) * (1.0 + r23) / denom).sqrt();
    let df = nf - 3.0;
    Ok(WilliamsResult {
        t,
        p: student_t_upper_tail(t, df),
        df,
    })
}

/// Paired bootstrap: the fraction of `n_resamples` index resamples in which
/// system `a` is not more accurate than system `b`. Small values support
/// `a` being better.
pub fn bootstrap_compare(outcomes_a: &[bool], outcomes_b: &[bool], n_resamples: usize, seed: u64) -> Result<f64> {
    if outcomes_a.len() != outcomes_b.len() {
        return Err(Error::LengthMismatch(outcomes_a.len(), outcomes_b.len()));
    }
    if outcomes_a.is_empty() {
        return Err(Error::Empty("bootstrap outcomes"));
    }
    if n_resamples == 0 {
        return Err(Error::Empty("bootstrap resamples"));
    }
    let n = outcomes_a.len();
    let mut rng = rng_from(seed);
    let mut not_better = 0usize;
    for _ in 0..n_resamples {
        let mut diff: i64 = 0;
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            diff += i64::from(outcomes_a[i]) - i64::from(outcomes_b[i]);
        }
        if diff <= 0 {
            not_better += 1;
        }
    }
    Ok(not_better as f64 / n_resamples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_correlations_give_half() {
        let w = williams_test(0.3, 0.3, 0.5, 100).unwrap();
        assert_eq!(w.t, 0.0);
        assert_eq!(w.p, 0.5);
    }

    #[test]
    fn swapping_negates_t() {
        let a = williams_test(0.347, 0.283, 0.6, 2460).unwrap();
        let b = williams_test(0.283, 0.347, 0.6, 2460).unwrap();
        assert!((a.t + b.t).abs() < 1e-12);
        assert!((a.p + b.p - 1.0).abs() < 1e-12);
        assert!(a.t > 0.0 && a.p < 0.01);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(williams_test(0.3, 0.2, 0.1, 3).is_err());
        assert!(williams_test(1.0, 0.2, 0.1, 30).is_err());
        assert!(williams_test(0.9, -0.9, 0.9, 30).is_err());
    }

    #[test]
    fn t_tail_known_values() {
        // df = 1 is Cauchy: P(T > 1) = 1/4
        assert!((student_t_upper_tail(1.0, 1.0) - 0.25).abs() < 1e-12);
        // df = 2 has a closed form: 1/2 - t / (2 sqrt(2 + t^2))
        let t: f64 = 1.5;
        let exact = 0.5 - t / (2.0 * (2.0 + t * t).sqrt());
        assert!((student_t_upper_tail(t, 2.0) - exact).abs() < 1e-12);
        assert!((student_t_upper_tail(-t, 2.0) - (1.0 - exact)).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_fixtures() {
        let all = vec![true; 50];
        let none = vec![false; 50];
        assert_eq!(bootstrap_compare(&all, &none, 1000, 1).unwrap(), 0.0);
        assert_eq!(bootstrap_compare(&all, &all, 1000, 1).unwrap(), 1.0);
        assert_eq!(bootstrap_compare(&none, &all, 1000, 1).unwrap(), 1.0);
        assert!(bootstrap_compare(&[], &[], 10, 1).is_err());
        assert!(bootstrap_compare(&[true], &[], 10, 1).is_err());
    }
}
