use serde::{Deserialize, Serialize};

use super::{apply_evidence, monte_carlo_forecast, BeliefSet, ForecastConfig, ForecastError, ProgressEvidence};
use crate::network::ActivityNetwork;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyForecast<T> {
    pub week: u32,
    pub p50: T,
    pub p80: T,
    /// Beliefs changed by this week's evidence.
    pub updated: usize,
}

/// Applies one week's evidence rows in order. Returns the new belief set and
/// the number of beliefs that changed.
pub fn apply_week<T: Scalar>(
    beliefs: &BeliefSet<T>,
    rows: &[ProgressEvidence<T>],
) -> Result<(BeliefSet<T>, usize), ForecastError> {
    let mut next = beliefs.clone();
    let mut changed = std::collections::BTreeSet::new();
    for row in rows {
        let current = next
            .get(&row.activity_id)
            .ok_or_else(|| ForecastError::UnknownActivity(row.activity_id.clone()))?;
        let updated = apply_evidence(current, row)?;
        if &updated != current {
            changed.insert(row.activity_id.clone());
            next.insert(row.activity_id.clone(), updated);
        }
    }
    Ok((next, changed.len()))
}

/// Replays the weekly control loop: each week's updates, then a forecast
/// with the same seed. Returns the series and the final beliefs.
pub fn weekly_forecast_series<T: Scalar>(
    network: &ActivityNetwork,
    priors: &BeliefSet<T>,
    evidence_log: &[ProgressEvidence<T>],
    weeks: u32,
    config: &ForecastConfig,
) -> Result<(Vec<WeeklyForecast<T>>, BeliefSet<T>), ForecastError> {
    if evidence_log.windows(2).any(|w| w[0].week > w[1].week) {
        return Err(ForecastError::UnsortedEvidence);
    }
    let mut beliefs = priors.clone();
    let mut series = Vec::with_capacity(weeks as usize);
    let mut cursor = 0;
    for week in 1..=weeks {
        let start = cursor;
        while cursor < evidence_log.len() && evidence_log[cursor].week <= week {
            cursor += 1;
        }
        let (next, updated) = apply_week(&beliefs, &evidence_log[start..cursor])?;
        beliefs = next;
        let forecast = monte_carlo_forecast(network, &beliefs, config)?;
        series.push(WeeklyForecast {
            week,
            p50: forecast.p50_finish,
            p80: forecast.p80_finish,
            updated,
        });
    }
    Ok((series, beliefs))
}
