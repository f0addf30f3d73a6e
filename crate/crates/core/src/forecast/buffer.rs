use serde::{Deserialize, Serialize};

use super::ForecastError;
use crate::Scalar;

/// Buffer sizes and the planned finishes they protect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferBaseline<T> {
    pub project_buffer_size: T,
    pub feeding_buffer_size: T,
    /// Planned project finish without the project buffer.
    pub baseline_finish: T,
    /// Planned finish of the feeding chain's last activity.
    pub feeding_baseline_finish: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferObservation<T> {
    pub week: u32,
    pub project_finish: T,
    pub feeding_finish: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry<T> {
    pub week: u32,
    pub project_delta: T,
    pub feeding_delta: T,
    pub project_cumulative: T,
    pub feeding_cumulative: T,
    pub project_percent_used: T,
    pub feeding_percent_used: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferState<T> {
    pub project_buffer_size: T,
    pub feeding_buffer_size: T,
    /// Highest finish already charged against each buffer.
    pub project_reference: T,
    pub feeding_reference: T,
    pub entries: Vec<BufferEntry<T>>,
}

impl<T: Scalar> BufferState<T> {
    pub fn new(baseline: &BufferBaseline<T>) -> Result<Self, ForecastError> {
        if !(baseline.project_buffer_size > T::zero()) || !(baseline.feeding_buffer_size > T::zero()) {
            return Err(ForecastError::InvalidBufferSize);
        }
        Ok(Self {
            project_buffer_size: baseline.project_buffer_size,
            feeding_buffer_size: baseline.feeding_buffer_size,
            project_reference: baseline.baseline_finish,
            feeding_reference: baseline.feeding_baseline_finish,
            entries: Vec::new(),
        })
    }

    pub fn project_cumulative(&self) -> T {
        self.entries.last().map_or(T::zero(), |e| e.project_cumulative)
    }

    pub fn feeding_cumulative(&self) -> T {
        self.entries.last().map_or(T::zero(), |e| e.feeding_cumulative)
    }

    pub fn percent_used(&self) -> T {
        self.project_cumulative() / self.project_buffer_size * T::lit(100.0)
    }

    pub fn feeding_percent_used(&self) -> T {
        self.feeding_cumulative() / self.feeding_buffer_size * T::lit(100.0)
    }

    /// Charges a week with explicit deltas. Negative deltas are clamped to 0.
    pub fn charge(&self, week: u32, project_delta: T, feeding_delta: T) -> Self {
        let project_delta = project_delta.max(T::zero());
        let feeding_delta = feeding_delta.max(T::zero());
        let project_cumulative = self.project_cumulative() + project_delta;
        let feeding_cumulative = self.feeding_cumulative() + feeding_delta;
        let hundred = T::lit(100.0);
        let mut next = self.clone();
        next.entries.push(BufferEntry {
            week,
            project_delta,
            feeding_delta,
            project_cumulative,
            feeding_cumulative,
            project_percent_used: project_cumulative / self.project_buffer_size * hundred,
            feeding_percent_used: feeding_cumulative / self.feeding_buffer_size * hundred,
        });
        next
    }
}

/// Charges the growth of the forecast finish beyond anything already
/// charged. A finish that falls and recovers is not charged twice.
pub fn buffer_update<T: Scalar>(previous: &BufferState<T>, observation: &BufferObservation<T>) -> BufferState<T> {
    let project_delta = (observation.project_finish - previous.project_reference).max(T::zero());
    let feeding_delta = observation
        .feeding_finish
        .map_or(T::zero(), |f| (f - previous.feeding_reference).max(T::zero()));
    let mut next = previous.charge(observation.week, project_delta, feeding_delta);
    next.project_reference = previous.project_reference.max(observation.project_finish);
    if let Some(f) = observation.feeding_finish {
        next.feeding_reference = previous.feeding_reference.max(f);
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn baseline() -> BufferBaseline<f64> {
        BufferBaseline {
            project_buffer_size: 20.0,
            feeding_buffer_size: 27.0,
            baseline_finish: 100.0,
            feeding_baseline_finish: 60.0,
        }
    }

    #[test]
    fn unchanged_forecast_charges_nothing() {
        let s = BufferState::new(&baseline()).unwrap();
        let obs = BufferObservation { week: 1, project_finish: 100.0, feeding_finish: Some(60.0) };
        let s = buffer_update(&s, &obs);
        let s = buffer_update(&s, &BufferObservation { week: 2, ..obs });
        assert_eq!(s.percent_used(), 0.0);
        assert!(s.entries.iter().all(|e| e.project_delta == 0.0 && e.feeding_delta == 0.0));
    }

    #[test]
    fn six_days_of_twenty_is_thirty_percent() {
        let s = BufferState::new(&baseline()).unwrap().charge(1, 6.0, 0.0);
        assert_abs_diff_eq!(s.percent_used(), 30.0, epsilon = 1e-12);
    }

    #[test]
    fn dip_and_recovery_not_double_charged() {
        let mut s = BufferState::new(&baseline()).unwrap();
        for (w, f) in [(1, 102.0), (2, 101.0), (3, 102.5)] {
            s = buffer_update(&s, &BufferObservation { week: w, project_finish: f, feeding_finish: None });
        }
        assert_abs_diff_eq!(s.project_cumulative(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn sizes_must_be_positive() {
        let mut b = baseline();
        b.project_buffer_size = 0.0;
        assert_eq!(BufferState::new(&b).unwrap_err(), ForecastError::InvalidBufferSize);
    }
}
