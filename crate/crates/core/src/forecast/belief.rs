use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ForecastError;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionFamily {
    /// Normal with the mass below zero removed.
    #[default]
    TruncatedNormal,
    /// Symmetric triangular with the same mean and standard deviation,
    /// clipped at zero.
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Provenance {
    Prior,
    Posterior { week: u32 },
    /// Activity finished; the belief is pinned to the observed duration.
    Actual { week: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBelief<T> {
    pub activity_id: String,
    pub mean: T,
    pub sd: T,
    #[serde(default)]
    pub family: DistributionFamily,
    pub provenance: Provenance,
}

pub type BeliefSet<T> = BTreeMap<String, DurationBelief<T>>;

impl<T: Scalar> DurationBelief<T> {
    pub fn prior(activity_id: impl Into<String>, mean: T, sd: T) -> Self {
        Self {
            activity_id: activity_id.into(),
            mean,
            sd: sd.max(T::zero()),
            family: DistributionFamily::TruncatedNormal,
            provenance: Provenance::Prior,
        }
    }

    pub fn pinned(activity_id: impl Into<String>, actual: T, week: u32) -> Self {
        Self {
            activity_id: activity_id.into(),
            mean: actual.max(T::zero()),
            sd: T::zero(),
            family: DistributionFamily::TruncatedNormal,
            provenance: Provenance::Actual { week },
        }
    }

    pub fn with_family(mut self, family: DistributionFamily) -> Self {
        self.family = family;
        self
    }

    pub fn is_pinned(&self) -> bool {
        self.sd <= T::zero()
    }

    /// Inverse-CDF draw for `u` in (0, 1). Never negative. One uniform per
    /// draw keeps paired simulations aligned.
    pub fn quantile(&self, u: f64) -> T {
        let mean = self.mean.to_f64_lossy();
        let sd = self.sd.to_f64_lossy();
        if sd <= 0.0 {
            return T::lit(mean.max(0.0));
        }
        let x = match self.family {
            DistributionFamily::TruncatedNormal => truncated_normal_quantile(mean, sd, u),
            DistributionFamily::Triangular => {
                let half = sd * 6f64.sqrt();
                let (lo, hi) = (mean - half, mean + half);
                let x = if u < 0.5 {
                    lo + (2.0 * u).sqrt() * half
                } else {
                    hi - (2.0 * (1.0 - u)).sqrt() * half
                };
                x.max(0.0)
            }
        };
        T::lit(x)
    }
}

fn truncated_normal_quantile(mean: f64, sd: f64, u: f64) -> f64 {
    let std = Normal::standard();
    let floor = std.cdf(-mean / sd);
    let p = (floor + u * (1.0 - floor)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    (mean + sd * std.inverse_cdf(p)).max(0.0)
}

/// Progress observation for one activity at a weekly status date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvidence<T> {
    pub week: u32,
    pub activity_id: String,
    pub percent_complete: T,
    /// Working days spent on the activity so far.
    pub elapsed: T,
    /// Measurement noise on the implied duration. `None` selects the
    /// default: current belief sd times the remaining fraction.
    pub observation_sd: Option<T>,
}

impl<T: Scalar> ProgressEvidence<T> {
    pub fn new(week: u32, activity_id: impl Into<String>, percent_complete: T, elapsed: T) -> Self {
        Self {
            week,
            activity_id: activity_id.into(),
            percent_complete,
            elapsed,
            observation_sd: None,
        }
    }

    pub fn with_observation_sd(mut self, sd: T) -> Self {
        self.observation_sd = Some(sd);
        self
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |reason: &str| ForecastError::InvalidEvidence {
            activity: self.activity_id.clone(),
            reason: reason.to_string(),
        };
        if self.week < 1 {
            return Err(bad("week must be at least 1"));
        }
        if !(self.percent_complete >= T::zero() && self.percent_complete <= T::one()) {
            return Err(bad("percent_complete outside [0, 1]"));
        }
        if !(self.elapsed >= T::zero()) || !self.elapsed.is_finite() {
            return Err(bad("elapsed must be non-negative"));
        }
        if let Some(sd) = self.observation_sd {
            if !(sd > T::zero()) {
                return Err(bad("observation_sd must be positive"));
            }
        }
        Ok(())
    }
}

/// Projected total duration at the current production rate.
pub fn implied_duration<T: Scalar>(evidence: &ProgressEvidence<T>) -> Result<T, ForecastError> {
    evidence.validate()?;
    if evidence.percent_complete <= T::zero() {
        return Err(ForecastError::ZeroProgress(evidence.activity_id.clone()));
    }
    Ok(evidence.elapsed / evidence.percent_complete)
}

/// Precision-weighted conjugate normal update.
pub fn bayesian_update<T: Scalar>(
    prior: &DurationBelief<T>,
    observed: T,
    observation_sd: T,
) -> Result<DurationBelief<T>, ForecastError> {
    if !(prior.sd > T::zero()) {
        return Err(ForecastError::NonPositiveSd(prior.sd.to_f64_lossy()));
    }
    if !(observation_sd > T::zero()) {
        return Err(ForecastError::NonPositiveSd(observation_sd.to_f64_lossy()));
    }
    let prior_precision = (prior.sd * prior.sd).recip();
    let obs_precision = (observation_sd * observation_sd).recip();
    let precision = prior_precision + obs_precision;
    let mean = (prior.mean * prior_precision + observed * obs_precision) / precision;
    let sd = precision.sqrt().recip();
    let week = match prior.provenance {
        Provenance::Posterior { week } | Provenance::Actual { week } => week,
        Provenance::Prior => 0,
    };
    Ok(DurationBelief {
        activity_id: prior.activity_id.clone(),
        mean,
        // a huge observation_sd can round sd back up to the prior's
        sd: sd.min(prior.sd),
        family: DistributionFamily::TruncatedNormal,
        provenance: Provenance::Posterior { week },
    })
}

/// Applies one evidence row to a belief with the rate-projection model.
/// Completed activities pin to their elapsed duration; zero-progress rows
/// and already pinned beliefs are left as they are.
pub fn apply_evidence<T: Scalar>(
    belief: &DurationBelief<T>,
    evidence: &ProgressEvidence<T>,
) -> Result<DurationBelief<T>, ForecastError> {
    evidence.validate()?;
    if belief.is_pinned() {
        return Ok(belief.clone());
    }
    if evidence.percent_complete >= T::one() {
        return Ok(DurationBelief::pinned(
            belief.activity_id.clone(),
            evidence.elapsed,
            evidence.week,
        ));
    }
    let observed = match implied_duration(evidence) {
        Ok(d) => d,
        Err(ForecastError::ZeroProgress(_)) => return Ok(belief.clone()),
        Err(e) => return Err(e),
    };
    let obs_sd = evidence
        .observation_sd
        .unwrap_or_else(|| belief.sd * (T::one() - evidence.percent_complete));
    let mut posterior = bayesian_update(belief, observed, obs_sd)?;
    posterior.provenance = Provenance::Posterior { week: evidence.week };
    Ok(posterior)
}
