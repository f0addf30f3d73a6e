use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::NetworkError;

/// Inclusive range of dates on which no work happens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarHold {
    pub from: NaiveDate,
    pub to: NaiveDate,
    #[serde(default)]
    pub reason: String,
}

impl CalendarHold {
    pub fn new(from: NaiveDate, to: NaiveDate, reason: impl Into<String>) -> Self {
        Self {
            from,
            to,
            reason: reason.into(),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.from <= date && date <= self.to
    }
}

/// Working-day calendar. The first `workdays_per_week` weekdays starting
/// Monday are working days, minus dated holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub start: NaiveDate,
    pub workdays_per_week: u8,
    #[serde(default)]
    pub holds: Vec<CalendarHold>,
}

impl Calendar {
    pub fn five_day(start: NaiveDate) -> Self {
        Self {
            start,
            workdays_per_week: 5,
            holds: Vec::new(),
        }
    }

    pub fn with_hold(mut self, hold: CalendarHold) -> Self {
        self.holds.push(hold);
        self
    }

    pub(crate) fn validate(&self) -> Result<(), NetworkError> {
        if !(1..=7).contains(&self.workdays_per_week) {
            return Err(NetworkError::InvalidCalendar(format!(
                "workdays_per_week must be 1..=7, got {}",
                self.workdays_per_week
            )));
        }
        if let Some(h) = self.holds.iter().find(|h| h.to < h.from) {
            return Err(NetworkError::InvalidCalendar(format!(
                "hold {}..{} ends before it starts",
                h.from, h.to
            )));
        }
        Ok(())
    }

    pub fn is_working(&self, date: NaiveDate) -> bool {
        let weekday = date.weekday().num_days_from_monday() as u8;
        weekday < self.workdays_per_week && !self.holds.iter().any(|h| h.contains(date))
    }

    /// Date of the working day with the given zero-based index.
    pub fn date_of(&self, working_day_index: u32) -> NaiveDate {
        let mut date = self.start;
        let mut remaining = working_day_index;
        loop {
            if self.is_working(date) {
                if remaining == 0 {
                    return date;
                }
                remaining -= 1;
            }
            date = date + Days::new(1);
        }
    }

    /// Date on which work finishing at a fractional working-day offset is
    /// complete. Offsets round up to whole days here and nowhere else.
    pub fn finish_date(&self, offset: f64) -> NaiveDate {
        let days = offset.max(0.0).ceil() as u32;
        self.date_of(days.saturating_sub(1))
    }

    /// Number of working days before `date` (the index of `date` when it is
    /// itself a working day).
    pub fn working_index(&self, date: NaiveDate) -> u32 {
        let mut d = self.start;
        let mut count = 0;
        while d < date {
            if self.is_working(d) {
                count += 1;
            }
            d = d + Days::new(1);
        }
        count
    }

    /// Re-expresses an offset on this calendar as an offset on `baseline`:
    /// every baseline working day this calendar holds before the work is
    /// done pushes the finish one baseline day later.
    pub fn offset_on(&self, baseline: &Calendar, offset: f64) -> f64 {
        if offset <= 0.0 {
            return offset;
        }
        let last = self.finish_date(offset);
        let mut extra = 0u32;
        let mut d = self.start;
        while d < last {
            if baseline.is_working(d) && !self.is_working(d) {
                extra += 1;
            }
            d = d + Days::new(1);
        }
        offset + extra as f64
    }
}
