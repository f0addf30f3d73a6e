//! Bootstrap intervals, forecast-comparison tests and the hypothesis
//! verdict rules.

mod hypotheses;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

pub use hypotheses::{hypothesis_report, HypothesisInputs, HypothesisReport, HypothesisResult, Verdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("confidence level must be in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("series differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("variance of the differences is zero")]
    DegenerateVariance,
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("replication count must be at least 1")]
    NoReplications,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub reps: usize,
}

/// Percentile bootstrap of `statistic` over resamples with replacement.
pub fn bootstrap_ci<F>(samples: &[f64], statistic: F, level: f64, reps: usize, seed: u64) -> Result<Interval, StatsError>
where
    F: Fn(&[f64]) -> f64,
{
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: samples.len() });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    if reps == 0 {
        return Err(StatsError::NoReplications);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; samples.len()];
    let mut stats: Vec<f64> = (0..reps)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = samples[rng.random_range(0..samples.len())];
            }
            statistic(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval {
        estimate: statistic(samples),
        lower: crate::forecast::nearest_rank(&stats, alpha),
        upper: crate::forecast::nearest_rank(&stats, 1.0 - alpha),
        level,
        reps,
    })
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    #[default]
    Squared,
    Absolute,
}

impl Loss {
    fn apply(self, e: f64) -> f64 {
        match self {
            Loss::Squared => e * e,
            Loss::Absolute => e.abs(),
        }
    }
}

/// Diebold–Mariano test with squared-error loss. Positive statistics mean
/// `errors_a` is the worse forecast.
pub fn diebold_mariano(errors_a: &[f64], errors_b: &[f64], horizon: usize) -> Result<TestResult, StatsError> {
    diebold_mariano_with(errors_a, errors_b, horizon, Loss::Squared)
}

pub fn diebold_mariano_with(
    errors_a: &[f64],
    errors_b: &[f64],
    horizon: usize,
    loss: Loss,
) -> Result<TestResult, StatsError> {
    if errors_a.len() != errors_b.len() {
        return Err(StatsError::LengthMismatch(errors_a.len(), errors_b.len()));
    }
    let n = errors_a.len();
    if n < 4 {
        return Err(StatsError::TooFewSamples { needed: 4, got: n });
    }
    if horizon == 0 {
        return Err(StatsError::InvalidHorizon);
    }
    let d: Vec<f64> = errors_a.iter().zip(errors_b).map(|(&a, &b)| loss.apply(a) - loss.apply(b)).collect();
    let d_bar = mean(&d);
    let autocov = |lag: usize| -> f64 {
        (lag..n).map(|t| (d[t] - d_bar) * (d[t - lag] - d_bar)).sum::<f64>() / n as f64
    };
    let variance = autocov(0) + 2.0 * (1..horizon.min(n)).map(autocov).sum::<f64>();
    if !(variance > 0.0) {
        return Err(StatsError::DegenerateVariance);
    }
    let statistic = d_bar / (variance / n as f64).sqrt();
    let p_value = (2.0 * (1.0 - Normal::standard().cdf(statistic.abs()))).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic,
        p_value,
        method: format!("diebold-mariano(h={horizon})"),
        n,
    })
}

/// Paired t test on `x - y`, two-sided.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let m = mean(&d);
    let var = d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(StatsError::DegenerateVariance);
    }
    let statistic = m / (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("degrees of freedom positive");
    let p_value = (2.0 * (1.0 - t.cdf(statistic.abs()))).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic,
        p_value,
        method: "paired-t".into(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_samples_give_point_interval() {
        let ci = bootstrap_ci(&[4.0; 10], mean, 0.95, 500, 1).unwrap();
        assert_eq!((ci.lower, ci.upper, ci.estimate), (4.0, 4.0, 4.0));
    }

    #[test]
    fn half_level_contains_estimate() {
        let x: Vec<f64> = (1..=30).map(f64::from).collect();
        let ci = bootstrap_ci(&x, mean, 0.5, 2000, 3).unwrap();
        assert!(ci.lower <= ci.estimate && ci.estimate <= ci.upper);
    }

    #[test]
    fn bootstrap_preconditions() {
        assert!(matches!(bootstrap_ci(&[1.0], mean, 0.9, 10, 1), Err(StatsError::TooFewSamples { .. })));
        assert!(matches!(bootstrap_ci(&[1.0, 2.0], mean, 1.0, 10, 1), Err(StatsError::InvalidLevel(_))));
    }

    #[test]
    fn bootstrap_is_seeded() {
        let x: Vec<f64> = (1..=50).map(f64::from).collect();
        assert_eq!(bootstrap_ci(&x, mean, 0.9, 300, 7).unwrap(), bootstrap_ci(&x, mean, 0.9, 300, 7).unwrap());
    }

    #[test]
    fn bootstrap_width_shrinks_with_n() {
        use rand_distr::{Distribution, StandardNormal};
        let mut narrower = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let big: Vec<f64> = (0..400).map(|_| StandardNormal.sample(&mut rng)).collect();
            let small = &big[..100];
            let w_small = bootstrap_ci(small, mean, 0.95, 400, seed).map(|c| c.upper - c.lower).unwrap();
            let w_big = bootstrap_ci(&big, mean, 0.95, 400, seed).map(|c| c.upper - c.lower).unwrap();
            if w_big < w_small {
                narrower += 1;
            }
        }
        assert!(narrower > 10, "{narrower}");
    }

    #[test]
    fn paired_t_hand_value() {
        let r = paired_t(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap();
        // mean 2.5, sd 1.2910, t = 2.5 / (1.2910 / 2)
        assert_abs_diff_eq!(r.statistic, 3.873, epsilon = 1e-3);
        assert_abs_diff_eq!(r.p_value, 0.030_466, epsilon = 1e-5);
        let s = paired_t(&[0.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.statistic, -r.statistic);
        assert_eq!(paired_t(&[1.0, 2.0], &[1.0, 2.0]).unwrap_err(), StatsError::DegenerateVariance);
    }

    #[test]
    fn dm_sign_and_antisymmetry() {
        let b = [1.0, -0.5, 0.8, -1.2, 0.3, 0.9, -0.7, 0.4];
        let a: Vec<f64> = b.iter().enumerate().map(|(i, v)| 2.0 * v + if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let ab = diebold_mariano(&a, &b, 1).unwrap();
        assert!(ab.statistic > 0.0);
        let ba = diebold_mariano(&b, &a, 1).unwrap();
        assert_eq!(ba.statistic, -ab.statistic);
        assert_eq!(diebold_mariano(&b, &b, 1).unwrap_err(), StatsError::DegenerateVariance);
        assert!(diebold_mariano(&b[..3], &b[..3], 1).is_err());
    }

    #[test]
    fn dm_hand_value_lag_one() {
        // d = a^2 - b^2 = [3, -1, 3, -1]: mean 1, gamma0 4, stat 1/sqrt(4/4) = 1
        let a = [2.0, 0.0, 2.0, 0.0];
        let b = [1.0, 1.0, 1.0, 1.0];
        assert_abs_diff_eq!(diebold_mariano(&a, &b, 1).unwrap().statistic, 1.0, epsilon = 1e-12);
        // gamma1 = (-2*2 + 2*-2 + -2*2)/4 = -3; variance 4 - 6 < 0
        assert_eq!(diebold_mariano(&a, &b, 2).unwrap_err(), StatsError::DegenerateVariance);
    }

    #[test]
    fn dm_size_under_null() {
        use rand_distr::{Distribution, StandardNormal};
        let mut inside = 0;
        for seed in 0..500u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..60).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..60).map(|_| StandardNormal.sample(&mut rng)).collect();
            if diebold_mariano(&a, &b, 1).unwrap().statistic.abs() < 2.58 {
                inside += 1;
            }
        }
        assert!(inside >= 490, "{inside}");
    }
}
