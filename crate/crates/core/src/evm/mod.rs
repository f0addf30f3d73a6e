//! Earned-value metrics, S-curves, scan quantity reconciliation and
//! forecast accuracy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvmError {
    #[error("{0} must be positive")]
    ZeroDenominator(&'static str),
    #[error("negative value in period {0}")]
    NegativeValue(u32),
    #[error("periods must be strictly increasing (period {0})")]
    UnsortedPeriods(u32),
    #[error("planned quantity must be positive for {0}")]
    ZeroPlanned(String),
    #[error("forecasts and actuals differ in length ({forecasts} vs {actuals})")]
    LengthMismatch { forecasts: usize, actuals: usize },
    #[error("actual value at position {0} is zero")]
    ZeroActual(usize),
    #[error("no values supplied")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvmPoint<T> {
    pub period: u32,
    pub pv: T,
    pub ev: T,
    pub ac: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvmMetrics<T> {
    pub period: u32,
    pub spi: T,
    pub cpi: T,
    pub sv_pct: T,
    pub cv_pct: T,
}

pub fn compute_metrics<T: Scalar>(point: &EvmPoint<T>) -> Result<EvmMetrics<T>, EvmError> {
    for (name, v) in [("pv", point.pv), ("ev", point.ev), ("ac", point.ac)] {
        if !(v > T::zero()) {
            return Err(EvmError::ZeroDenominator(name));
        }
    }
    let hundred = T::lit(100.0);
    Ok(EvmMetrics {
        period: point.period,
        spi: point.ev / point.pv,
        cpi: point.ev / point.ac,
        sv_pct: (point.ev - point.pv) / point.pv * hundred,
        cv_pct: (point.ev - point.ac) / point.ev * hundred,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCurves<T> {
    pub periods: Vec<u32>,
    pub pv: Vec<T>,
    pub ev: Vec<T>,
    pub ac: Vec<T>,
    /// First period where cumulative EV reaches cumulative PV.
    pub crossover: Option<u32>,
}

impl<T: Scalar> SCurves<T> {
    pub fn cumulative_point(&self, i: usize) -> EvmPoint<T> {
        EvmPoint {
            period: self.periods[i],
            pv: self.pv[i],
            ev: self.ev[i],
            ac: self.ac[i],
        }
    }
}

/// Cumulative PV/EV/AC from per-period increments.
pub fn s_curves<T: Scalar>(points: &[EvmPoint<T>]) -> Result<SCurves<T>, EvmError> {
    let mut curves = SCurves {
        periods: Vec::with_capacity(points.len()),
        pv: Vec::with_capacity(points.len()),
        ev: Vec::with_capacity(points.len()),
        ac: Vec::with_capacity(points.len()),
        crossover: None,
    };
    let (mut pv, mut ev, mut ac) = (T::zero(), T::zero(), T::zero());
    for (i, p) in points.iter().enumerate() {
        if i > 0 && p.period <= points[i - 1].period {
            return Err(EvmError::UnsortedPeriods(p.period));
        }
        if p.pv < T::zero() || p.ev < T::zero() || p.ac < T::zero() {
            return Err(EvmError::NegativeValue(p.period));
        }
        pv = pv + p.pv;
        ev = ev + p.ev;
        ac = ac + p.ac;
        curves.periods.push(p.period);
        curves.pv.push(pv);
        curves.ev.push(ev);
        curves.ac.push(ac);
        if curves.crossover.is_none() && pv > T::zero() && ev >= pv {
            curves.crossover = Some(p.period);
        }
    }
    Ok(curves)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvmReport<T> {
    pub curves: SCurves<T>,
    pub metrics: Vec<EvmMetrics<T>>,
}

/// S-curves plus metrics on the cumulative values of every period.
pub fn evm_report<T: Scalar>(points: &[EvmPoint<T>]) -> Result<EvmReport<T>, EvmError> {
    let curves = s_curves(points)?;
    let metrics = (0..curves.periods.len())
        .map(|i| compute_metrics(&curves.cumulative_point(i)))
        .collect::<Result<_, _>>()?;
    Ok(EvmReport { curves, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityRecord<T> {
    pub work_package: String,
    pub planned: T,
    pub measured: T,
    /// Signed percent, rounded to one decimal.
    pub variance_pct: T,
}

impl<T: Scalar> QuantityRecord<T> {
    pub fn within(&self, band_pct: T) -> bool {
        self.variance_pct.abs() <= band_pct
    }
}

pub fn reconcile<T: Scalar>(
    work_package: impl Into<String>,
    planned: T,
    measured: T,
) -> Result<QuantityRecord<T>, EvmError> {
    let work_package = work_package.into();
    if !(planned > T::zero()) {
        return Err(EvmError::ZeroPlanned(work_package));
    }
    let raw = (measured - planned) / planned * T::lit(100.0);
    let ten = T::lit(10.0);
    Ok(QuantityRecord {
        work_package,
        planned,
        measured,
        variance_pct: (raw * ten).round() / ten,
    })
}

/// Mean absolute percentage error, in percent.
pub fn mape<T: Scalar>(forecasts: &[T], actuals: &[T]) -> Result<T, EvmError> {
    if forecasts.len() != actuals.len() {
        return Err(EvmError::LengthMismatch {
            forecasts: forecasts.len(),
            actuals: actuals.len(),
        });
    }
    if actuals.is_empty() {
        return Err(EvmError::Empty);
    }
    let mut total = T::zero();
    for (i, (&f, &a)) in forecasts.iter().zip(actuals).enumerate() {
        if a == T::zero() {
            return Err(EvmError::ZeroActual(i));
        }
        total = total + ((f - a) / a).abs();
    }
    Ok(total / T::lit(actuals.len() as f64) * T::lit(100.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pt(pv: f64, ev: f64, ac: f64) -> EvmPoint<f64> {
        EvmPoint { period: 1, pv, ev, ac }
    }

    #[test]
    fn month_one_values() {
        let m = compute_metrics(&pt(100.0, 92.0, 91.09)).unwrap();
        assert_abs_diff_eq!(m.spi, 0.92, epsilon = 1e-12);
        assert_abs_diff_eq!(m.sv_pct, -8.0, epsilon = 1e-12);
    }

    #[test]
    fn on_plan_is_neutral() {
        let m = compute_metrics(&pt(50.0, 50.0, 50.0)).unwrap();
        assert_eq!((m.spi, m.cpi, m.sv_pct, m.cv_pct), (1.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn ahead_and_under_budget() {
        let m = compute_metrics(&pt(100.0, 103.0, 100.98)).unwrap();
        assert_abs_diff_eq!(m.spi, 1.03, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cpi, 1.02, epsilon = 1e-4);
        assert_abs_diff_eq!(m.sv_pct, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.cv_pct, 1.96, epsilon = 5e-3);
    }

    #[test]
    fn zero_denominators_rejected() {
        assert_eq!(compute_metrics(&pt(0.0, 1.0, 1.0)).unwrap_err(), EvmError::ZeroDenominator("pv"));
        assert_eq!(compute_metrics(&pt(1.0, 1.0, 0.0)).unwrap_err(), EvmError::ZeroDenominator("ac"));
    }

    #[test]
    fn reconcile_rows() {
        assert_eq!(reconcile("CONCRETE", 1540.0, 1523.0).unwrap().variance_pct, -1.1);
        assert_eq!(reconcile("X", 10.0, 10.0).unwrap().variance_pct, 0.0);
        assert_eq!(reconcile("PAINT", 1260.0, 1275.0).unwrap().variance_pct, 1.2);
        assert!(reconcile("X", 0.0, 1.0).is_err());
    }

    #[test]
    fn s_curve_cases() {
        let one = s_curves(&[EvmPoint { period: 1, pv: 5.0, ev: 4.0, ac: 3.0 }]).unwrap();
        assert_eq!((one.pv[0], one.ev[0], one.ac[0]), (5.0, 4.0, 3.0));
        assert_eq!(one.crossover, None);
        let zeros = s_curves(&[EvmPoint { period: 1, pv: 0.0, ev: 0.0, ac: 0.0 }; 1]).unwrap();
        assert_eq!(zeros.crossover, None);
        let bad = [EvmPoint { period: 2, pv: 1.0, ev: 1.0, ac: 1.0 }, EvmPoint { period: 1, pv: 1.0, ev: 1.0, ac: 1.0 }];
        assert_eq!(s_curves(&bad).unwrap_err(), EvmError::UnsortedPeriods(1));
    }

    #[test]
    fn mape_cases() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(mape(&[110.0], &[100.0]).unwrap(), 10.0, epsilon = 1e-12);
        assert!(mape(&[1.0], &[0.0]).is_err());
        assert!(mape(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn weekly_p50_against_constant_finish() {
        let p50 = [120.0, 121.0, 122.0, 123.0, 124.0, 125.0, 126.0, 126.0, 127.0, 127.0, 127.0, 127.0, 128.0, 128.0, 128.0, 128.0];
        let actual = [128.0; 16];
        // absolute errors sum to 41
        assert_abs_diff_eq!(mape(&p50, &actual).unwrap(), 41.0 / 16.0 / 128.0 * 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mape(&p50, &actual).unwrap(), 2.002, epsilon = 5e-4);
    }

    proptest! {
        #[test]
        fn metrics_scale_invariant(pv in 0.1f64..1e6, ev in 0.1f64..1e6, ac in 0.1f64..1e6, k in 0.01f64..1e3) {
            let a = compute_metrics(&pt(pv, ev, ac)).unwrap();
            let b = compute_metrics(&pt(pv * k, ev * k, ac * k)).unwrap();
            prop_assert!((a.spi - b.spi).abs() <= 1e-9 * a.spi.abs().max(1.0));
            prop_assert!((a.cpi - b.cpi).abs() <= 1e-9 * a.cpi.abs().max(1.0));
            prop_assert!((a.sv_pct - b.sv_pct).abs() <= 1e-7 * a.sv_pct.abs().max(1.0));
            prop_assert!((a.cv_pct - b.cv_pct).abs() <= 1e-7 * a.cv_pct.abs().max(1.0));
        }

        #[test]
        fn percent_identities(pv in 0.1f64..1e6, ev in 0.1f64..1e6, ac in 0.1f64..1e6) {
            let m = compute_metrics(&pt(pv, ev, ac)).unwrap();
            prop_assert!((m.sv_pct - (m.spi - 1.0) * 100.0).abs() <= 1e-9 * m.sv_pct.abs().max(1.0));
            prop_assert!((m.cv_pct - (1.0 - 1.0 / m.cpi) * 100.0).abs() <= 1e-9 * m.cv_pct.abs().max(1.0));
        }

        #[test]
        fn mape_non_negative(v in proptest::collection::vec((1.0f64..1e3, 1.0f64..1e3), 1..20)) {
            let (f, a): (Vec<_>, Vec<_>) = v.into_iter().unzip();
            let m = mape(&f, &a).unwrap();
            prop_assert!(m >= 0.0);
            prop_assert_eq!(mape(&a, &a).unwrap(), 0.0);
        }
    }
}
