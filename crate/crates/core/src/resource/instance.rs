use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ResourceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: String,
    /// Units available per day at regular time.
    pub capacity: f64,
    /// Overtime hours allowed per period.
    pub overtime_cap: f64,
    pub hourly_cost: f64,
    /// One-day capacity additions on window days.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_shifts: Vec<ExtraShift>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraShift {
    pub day: u32,
    pub units: f64,
}

impl Resource {
    pub fn new(id: impl Into<String>, capacity: f64, overtime_cap: f64) -> Self {
        Self {
            id: id.into(),
            capacity,
            overtime_cap,
            hourly_cost: 0.0,
            extra_shifts: Vec::new(),
        }
    }

    /// Regular-time units on a window day, extra shifts included.
    pub fn capacity_on(&self, day: u32) -> f64 {
        self.capacity + self.extra_shifts.iter().filter(|s| s.day == day).map(|s| s.units).sum::<f64>()
    }
}

/// Work to place inside a look-ahead window. Days are relative to the
/// window start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub activity_id: String,
    /// Earliest day the work can physically start.
    pub release: u32,
    /// Day the crew is booked to start; never earlier than `release`.
    pub planned_start: u32,
    pub duration: u32,
    /// (resource id, units per day)
    pub demands: Vec<(String, f64)>,
    /// Finishing later than this slips the project.
    pub latest_finish: u32,
    /// Tasks in this instance that must finish first.
    pub predecessors: Vec<String>,
}

impl Task {
    pub fn new(id: impl Into<String>, duration: u32, latest_finish: u32) -> Self {
        let id = id.into();
        Self {
            activity_id: id.clone(),
            id,
            release: 0,
            planned_start: 0,
            duration,
            demands: Vec::new(),
            latest_finish,
            predecessors: Vec::new(),
        }
    }

    pub fn with_demand(mut self, resource: impl Into<String>, units: f64) -> Self {
        self.demands.push((resource.into(), units));
        self
    }

    pub fn after(mut self, predecessor: impl Into<String>) -> Self {
        self.predecessors.push(predecessor.into());
        self
    }

    pub fn released(mut self, day: u32) -> Self {
        self.release = day;
        self.planned_start = self.planned_start.max(day);
        self
    }

    pub fn demand_for(&self, resource: &str) -> f64 {
        self.demands.iter().filter(|(r, _)| r == resource).map(|(_, u)| u).sum()
    }

    pub fn earliest(&self) -> u32 {
        self.release.max(self.planned_start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookaheadInstance {
    pub start_week: u32,
    pub horizon_weeks: u32,
    pub days_per_week: u32,
    pub hours_per_day: f64,
    /// Fraction of the project elapsed at the window start, in [0, 1].
    pub progress: f64,
    pub tasks: Vec<Task>,
    pub resources: Vec<Resource>,
}

impl LookaheadInstance {
    pub fn window_days(&self) -> u32 {
        self.horizon_weeks * self.days_per_week
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    pub fn resource(&self, id: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.id == id)
    }

    pub fn validate(&self) -> Result<(), ResourceError> {
        if self.horizon_weeks == 0 || self.days_per_week == 0 {
            return Err(ResourceError::InvalidInstance("window must span at least one day".into()));
        }
        if !(self.hours_per_day > 0.0) {
            return Err(ResourceError::InvalidInstance("hours_per_day must be positive".into()));
        }
        for r in &self.resources {
            if !(r.capacity > 0.0) || !(r.overtime_cap >= 0.0) {
                return Err(ResourceError::InvalidInstance(format!("resource {} has invalid capacity", r.id)));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tasks {
            if !seen.insert(t.id.as_str()) {
                return Err(ResourceError::InvalidInstance(format!("duplicate task {}", t.id)));
            }
            if t.planned_start < t.release {
                return Err(ResourceError::InvalidInstance(format!("task {} planned before release", t.id)));
            }
            for (res, units) in &t.demands {
                let r = self.resource(res).ok_or_else(|| ResourceError::UnknownResource(res.clone()))?;
                if !(*units >= 0.0) {
                    return Err(ResourceError::InvalidInstance(format!("negative demand on task {}", t.id)));
                }
                // alone on an empty timeline the task must fit under the cap
                let days = t.duration.min(self.days_per_week) as f64;
                if (units - r.capacity).max(0.0) * self.hours_per_day * days > r.overtime_cap + 1e-9 {
                    return Err(ResourceError::InvalidInstance(format!(
                        "task {} needs more than capacity plus overtime of {}",
                        t.id, r.id
                    )));
                }
            }
        }
        for t in &self.tasks {
            if let Some(p) = t.predecessors.iter().find(|p| !seen.contains(p.as_str())) {
                return Err(ResourceError::UnknownTask(p.clone()));
            }
        }
        if self.precedence_order().is_none() {
            return Err(ResourceError::CycleDetected);
        }
        Ok(())
    }

    /// Task indices in a precedence-respecting order, or `None` on a cycle.
    pub fn precedence_order(&self) -> Option<Vec<usize>> {
        let n = self.tasks.len();
        let mut indeg = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for (i, t) in self.tasks.iter().enumerate() {
            for p in &t.predecessors {
                let j = self.task_index(p)?;
                succ[j].push(i);
                indeg[i] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &s in &succ[i] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push(s);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Random single-window instance, used for training and oracle checks.
/// Every task fits the overtime cap on its own.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, tasks: usize, resources: usize) -> LookaheadInstance {
    let days_per_week = 5;
    let resources: Vec<Resource> = (0..resources.max(1))
        .map(|k| Resource::new(format!("R{k}"), rng.random_range(3..=6) as f64, 40.0))
        .collect();
    let mut out = Vec::with_capacity(tasks);
    for i in 0..tasks {
        let duration = rng.random_range(1..=4);
        let release = rng.random_range(0..=3);
        let mut t = Task::new(format!("T{i}"), duration, release + duration + rng.random_range(0..=4)).released(release);
        for r in &resources {
            if rng.random_bool(0.8) {
                let extra = rng.random_range(0..=2) as f64;
                t = t.with_demand(r.id.clone(), (r.capacity - 2.0 + extra).max(1.0));
            }
        }
        if i > 0 && rng.random_bool(0.3) {
            t = t.after(format!("T{}", rng.random_range(0..i)));
        }
        out.push(t);
    }
    LookaheadInstance {
        start_week: 1,
        horizon_weeks: 2,
        days_per_week,
        hours_per_day: 8.0,
        progress: rng.random_range(0.0..1.0),
        tasks: out,
        resources,
    }
}
