use serde::{Deserialize, Serialize};

use super::{baseline_schedule, ExtraShift, LookaheadInstance, PriorityRule, ResourceError, ScheduleOutcome, Task};

/// Typed resource move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum ResourceAction {
    NoOp,
    /// Move a crew's booked start; negative values start earlier.
    ShiftCrew { activity: String, days: i32 },
    /// Extra regular-time units for one window day (a night or weekend shift).
    AddShift { resource: String, units: f64, day: u32 },
    /// Run two tasks back to back as one, saving a setup day.
    Merge { first: String, second: String },
    /// Make `second` wait for `first`.
    Resequence { first: String, second: String },
    /// Cut a task in two so the second half can slide into slack.
    Split { activity: String },
    /// Pull one day of a task's work forward as preparation.
    PreStage { activity: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    NoOp,
    ShiftCrew,
    AddShift,
    Merge,
    Resequence,
    Split,
    PreStage,
}

impl ActionKind {
    pub const ALL: [ActionKind; 7] = [
        ActionKind::NoOp,
        ActionKind::ShiftCrew,
        ActionKind::AddShift,
        ActionKind::Merge,
        ActionKind::Resequence,
        ActionKind::Split,
        ActionKind::PreStage,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl ResourceAction {
    pub fn kind(&self) -> ActionKind {
        match self {
            ResourceAction::NoOp => ActionKind::NoOp,
            ResourceAction::ShiftCrew { .. } => ActionKind::ShiftCrew,
            ResourceAction::AddShift { .. } => ActionKind::AddShift,
            ResourceAction::Merge { .. } => ActionKind::Merge,
            ResourceAction::Resequence { .. } => ActionKind::Resequence,
            ResourceAction::Split { .. } => ActionKind::Split,
            ResourceAction::PreStage { .. } => ActionKind::PreStage,
        }
    }
}

/// Tasks of an activity in the instance: the task itself or its parts.
fn task_of<'a>(inst: &'a LookaheadInstance, activity: &str) -> Option<&'a Task> {
    inst.task(activity).or_else(|| inst.tasks.iter().find(|t| t.activity_id == activity))
}

fn task_index_of(inst: &LookaheadInstance, activity: &str) -> Result<usize, ResourceError> {
    let id = task_of(inst, activity)
        .ok_or_else(|| ResourceError::UnknownTask(activity.to_string()))?
        .id
        .clone();
    Ok(inst.task_index(&id).expect("task exists"))
}

/// Applies an action to a copy of the instance.
pub fn apply_action(inst: &LookaheadInstance, action: &ResourceAction) -> Result<LookaheadInstance, ResourceError> {
    let mut out = inst.clone();
    match action {
        ResourceAction::NoOp => {}
        ResourceAction::ShiftCrew { activity, days } => {
            let i = task_index_of(&out, activity)?;
            let t = &mut out.tasks[i];
            let shifted = (t.planned_start as i64 + *days as i64).max(t.release as i64);
            t.planned_start = shifted as u32;
        }
        ResourceAction::AddShift { resource, units, day } => {
            if !(*units > 0.0) {
                return Err(ResourceError::InvalidAction("added units must be positive".into()));
            }
            let r = out
                .resources
                .iter_mut()
                .find(|r| &r.id == resource)
                .ok_or_else(|| ResourceError::UnknownResource(resource.clone()))?;
            r.extra_shifts.push(ExtraShift { day: *day, units: *units });
        }
        ResourceAction::Merge { first, second } => {
            let a = task_index_of(&out, first)?;
            let b = task_index_of(&out, second)?;
            if a == b {
                return Err(ResourceError::InvalidAction("cannot merge a task with itself".into()));
            }
            let tb = out.tasks[b].clone();
            let ta = &mut out.tasks[a];
            ta.duration = (ta.duration + tb.duration).saturating_sub(1).max(ta.duration.max(tb.duration));
            ta.latest_finish = ta.latest_finish.max(tb.latest_finish);
            for (r, u) in tb.demands {
                match ta.demands.iter_mut().find(|(x, _)| *x == r) {
                    Some(d) => d.1 = d.1.max(u),
                    None => ta.demands.push((r, u)),
                }
            }
            let (a_id, b_id) = (ta.id.clone(), tb.id.clone());
            for p in tb.predecessors {
                if p != a_id && !ta.predecessors.contains(&p) {
                    ta.predecessors.push(p);
                }
            }
            out.tasks.remove(b);
            for t in out.tasks.iter_mut() {
                for p in t.predecessors.iter_mut() {
                    if *p == b_id {
                        *p = a_id.clone();
                    }
                }
                let own = t.id.clone();
                t.predecessors.retain(|p| *p != own);
                t.predecessors.dedup();
            }
        }
        ResourceAction::Resequence { first, second } => {
            let a = task_index_of(&out, first)?;
            let b = task_index_of(&out, second)?;
            if a == b {
                return Err(ResourceError::InvalidAction("cannot resequence a task after itself".into()));
            }
            let a_id = out.tasks[a].id.clone();
            let tb = &mut out.tasks[b];
            if !tb.predecessors.contains(&a_id) {
                tb.predecessors.push(a_id);
            }
            if out.precedence_order().is_none() {
                return Err(ResourceError::CycleDetected);
            }
        }
        ResourceAction::Split { activity } => {
            let i = task_index_of(&out, activity)?;
            let t = out.tasks[i].clone();
            if t.duration < 2 {
                return Err(ResourceError::InvalidAction(format!("task {} is too short to split", t.id)));
            }
            let head = t.duration.div_ceil(2);
            let mut tail = t.clone();
            tail.id = format!("{}/2", t.id);
            tail.duration = t.duration - head;
            tail.predecessors = vec![t.id.clone()];
            let tail_id = tail.id.clone();
            out.tasks[i].duration = head;
            out.tasks[i].latest_finish = t.latest_finish.saturating_sub(tail.duration);
            for s in out.tasks.iter_mut() {
                for p in s.predecessors.iter_mut() {
                    if *p == t.id {
                        *p = tail_id.clone();
                    }
                }
            }
            out.tasks.push(tail);
        }
        ResourceAction::PreStage { activity } => {
            let i = task_index_of(&out, activity)?;
            let t = out.tasks[i].clone();
            if t.duration < 2 {
                return Err(ResourceError::InvalidAction(format!("task {} is too short to pre-stage", t.id)));
            }
            let prep = Task {
                id: format!("{}/prep", t.id),
                activity_id: t.activity_id.clone(),
                release: 0,
                planned_start: 0,
                duration: 1,
                demands: t.demands.clone(),
                latest_finish: t.latest_finish.saturating_sub(t.duration - 1),
                predecessors: Vec::new(),
            };
            out.tasks[i].duration -= 1;
            out.tasks[i].predecessors.push(prep.id.clone());
            out.tasks.push(prep);
        }
    }
    out.validate()?;
    Ok(out)
}

/// One-step simulation of an action against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEffect {
    pub baseline: ScheduleOutcome,
    pub outcome: ScheduleOutcome,
    /// Change in current-period overtime hours.
    pub overtime_delta: f64,
    pub window_overtime_delta: f64,
    pub idle_delta: f64,
    pub slip_delta: i64,
}

pub fn simulate_action(
    inst: &LookaheadInstance,
    action: &ResourceAction,
    rule: PriorityRule,
) -> Result<ActionEffect, ResourceError> {
    let baseline = baseline_schedule(inst, rule);
    let outcome = baseline_schedule(&apply_action(inst, action)?, rule);
    Ok(ActionEffect {
        overtime_delta: outcome.current_overtime() - baseline.current_overtime(),
        window_overtime_delta: outcome.overtime_hours - baseline.overtime_hours,
        idle_delta: outcome.idle_hours - baseline.idle_hours,
        slip_delta: outcome.slip_days as i64 - baseline.slip_days as i64,
        baseline,
        outcome,
    })
}

/// Concrete action of a given kind aimed at the worst overtime day of the
/// baseline schedule, if one applies.
pub fn candidate_action(inst: &LookaheadInstance, kind: ActionKind, rule: PriorityRule) -> Option<ResourceAction> {
    if kind == ActionKind::NoOp {
        return Some(ResourceAction::NoOp);
    }
    let base = baseline_schedule(inst, rule);
    let (res_idx, day, excess) = peak_overload(inst, &base)?;
    let resource = inst.resources[res_idx].id.clone();
    let on_peak: Vec<&Task> = inst
        .tasks
        .iter()
        .filter(|t| t.demand_for(&resource) > 0.0)
        .filter(|t| {
            let a = base.assignment(&t.id).expect("scheduled");
            a.start <= day && day < a.finish
        })
        .collect();
    let slack = |t: &Task| t.latest_finish as i64 - base.assignment(&t.id).map_or(0, |a| a.finish as i64);
    match kind {
        ActionKind::NoOp => unreachable!(),
        ActionKind::ShiftCrew => on_peak
            .iter()
            .filter(|t| slack(t) >= 1)
            .max_by(|a, b| slack(a).cmp(&slack(b)).then(b.id.cmp(&a.id)))
            .map(|t| {
                // one day past where the scheduler actually put it
                let start = base.assignment(&t.id).map_or(t.planned_start, |a| a.start);
                ResourceAction::ShiftCrew {
                    activity: t.id.clone(),
                    days: (start + 1) as i32 - t.planned_start as i32,
                }
            }),
        ActionKind::AddShift => Some(ResourceAction::AddShift { resource, units: excess.ceil(), day }),
        ActionKind::Merge => {
            let mut pairs: Vec<(&Task, &Task)> = Vec::new();
            for b in &inst.tasks {
                for p in &b.predecessors {
                    if let Some(a) = inst.task(p) {
                        if a.demand_for(&resource) > 0.0 && b.demand_for(&resource) > 0.0 {
                            pairs.push((a, b));
                        }
                    }
                }
            }
            pairs.sort_by(|x, y| (&x.0.id, &x.1.id).cmp(&(&y.0.id, &y.1.id)));
            pairs.first().map(|(a, b)| ResourceAction::Merge { first: a.id.clone(), second: b.id.clone() })
        }
        ActionKind::Resequence => {
            if on_peak.len() < 2 {
                return None;
            }
            let mut by_slack = on_peak.clone();
            by_slack.sort_by(|a, b| slack(a).cmp(&slack(b)).then(a.id.cmp(&b.id)));
            Some(ResourceAction::Resequence {
                first: by_slack[0].id.clone(),
                second: by_slack[1].id.clone(),
            })
        }
        ActionKind::Split => on_peak
            .iter()
            .filter(|t| t.duration >= 2)
            .max_by(|a, b| a.duration.cmp(&b.duration).then(b.id.cmp(&a.id)))
            .map(|t| ResourceAction::Split { activity: t.id.clone() }),
        ActionKind::PreStage => on_peak
            .iter()
            .filter(|t| t.duration >= 2 && base.assignment(&t.id).is_some_and(|a| a.start > 0))
            .max_by(|a, b| a.demand_for(&resource).total_cmp(&b.demand_for(&resource)).then(b.id.cmp(&a.id)))
            .map(|t| ResourceAction::PreStage { activity: t.id.clone() }),
    }
}

/// (resource index, day, units above capacity) of the largest overload,
/// looking at the current period first and the rest of the window after.
fn peak_overload(inst: &LookaheadInstance, s: &ScheduleOutcome) -> Option<(usize, u32, f64)> {
    let first = inst.days_per_week.min(inst.window_days());
    overload_in(inst, s, 0..first).or_else(|| overload_in(inst, s, first..inst.window_days()))
}

fn overload_in(
    inst: &LookaheadInstance,
    s: &ScheduleOutcome,
    days: std::ops::Range<u32>,
) -> Option<(usize, u32, f64)> {
    let mut best: Option<(usize, u32, f64)> = None;
    for (r, res) in inst.resources.iter().enumerate() {
        for day in days.clone() {
            let usage: f64 = inst
                .tasks
                .iter()
                .filter(|t| s.assignment(&t.id).is_some_and(|a| a.start <= day && day < a.finish))
                .map(|t| t.demand_for(&res.id))
                .sum();
            let excess = usage - res.capacity_on(day);
            if excess > 1e-9 && best.is_none_or(|b| excess > b.2) {
                best = Some((r, day, excess));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::Resource;

    fn inst() -> LookaheadInstance {
        LookaheadInstance {
            start_week: 3,
            horizon_weeks: 2,
            days_per_week: 5,
            hours_per_day: 8.0,
            progress: 0.2,
            tasks: vec![
                Task::new("form", 4, 6).with_demand("carp", 5.0),
                Task::new("strip", 3, 9).with_demand("carp", 5.0),
                Task::new("pour", 2, 8).with_demand("carp", 2.0).after("form"),
            ],
            resources: vec![Resource::new("carp", 8.0, 40.0)],
        }
    }

    #[test]
    fn add_shift_covers_peak_day() {
        let mut i = inst();
        i.resources[0].overtime_cap = 100.0;
        let a = candidate_action(&i, ActionKind::AddShift, PriorityRule::MinSlack).unwrap();
        let ResourceAction::AddShift { ref resource, units, .. } = a else {
            panic!("{a:?}");
        };
        assert_eq!((resource.as_str(), units), ("carp", 2.0));
        // one day of two units at eight hours
        let e = simulate_action(&i, &a, PriorityRule::MinSlack).unwrap();
        assert!(e.baseline.current_overtime() > 0.0);
        assert_eq!(e.overtime_delta, -16.0);
    }

    #[test]
    fn shift_crew_moves_booking() {
        let out = apply_action(&inst(), &ResourceAction::ShiftCrew { activity: "strip".into(), days: 2 }).unwrap();
        assert_eq!(out.task("strip").unwrap().planned_start, 2);
        let back = apply_action(&out, &ResourceAction::ShiftCrew { activity: "strip".into(), days: -5 }).unwrap();
        assert_eq!(back.task("strip").unwrap().planned_start, 0);
    }

    #[test]
    fn merge_saves_a_day_and_rewires() {
        let out = apply_action(&inst(), &ResourceAction::Merge { first: "form".into(), second: "pour".into() }).unwrap();
        assert_eq!(out.tasks.len(), 2);
        assert_eq!(out.task("form").unwrap().duration, 5);
    }

    #[test]
    fn resequence_cycle_rejected() {
        let e = apply_action(&inst(), &ResourceAction::Resequence { first: "pour".into(), second: "form".into() });
        assert_eq!(e.unwrap_err(), ResourceError::CycleDetected);
    }

    #[test]
    fn split_and_prestage_keep_total_work() {
        let i = inst();
        let s = apply_action(&i, &ResourceAction::Split { activity: "form".into() }).unwrap();
        assert_eq!(s.task("form").unwrap().duration + s.task("form/2").unwrap().duration, 4);
        assert_eq!(s.task("pour").unwrap().predecessors, vec!["form/2".to_string()]);
        let p = apply_action(&i, &ResourceAction::PreStage { activity: "strip".into() }).unwrap();
        assert_eq!(p.task("strip").unwrap().duration, 2);
        assert_eq!(p.task("strip/prep").unwrap().duration, 1);
    }

    #[test]
    fn unknown_targets_rejected() {
        assert!(apply_action(&inst(), &ResourceAction::Split { activity: "zzz".into() }).is_err());
        assert!(apply_action(&inst(), &ResourceAction::AddShift { resource: "zzz".into(), units: 1.0, day: 0 }).is_err());
    }

    #[test]
    fn no_conflict_has_no_candidates() {
        let mut i = inst();
        i.resources[0].capacity = 20.0;
        assert_eq!(candidate_action(&i, ActionKind::AddShift, PriorityRule::MinSlack), None);
        assert_eq!(candidate_action(&i, ActionKind::NoOp, PriorityRule::MinSlack), Some(ResourceAction::NoOp));
    }
}
