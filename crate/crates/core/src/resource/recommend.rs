use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::qlearn::encode_state;
use super::{
    apply_action, baseline_schedule, candidate_action, simulate_action, ActionKind, LookaheadInstance, Policy,
    PriorityRule, Resource, ResourceAction, ResourceError, Task,
};
use crate::forecast::BeliefSet;
use crate::network::{ActivityNetwork, CpmKernel};

/// Window geometry for weekly look-aheads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookaheadSettings {
    pub horizon_weeks: u32,
    /// Working days per control period.
    pub days_per_week: u32,
    pub hours_per_day: f64,
}

impl Default for LookaheadSettings {
    fn default() -> Self {
        Self {
            horizon_weeks: 2,
            days_per_week: 8,
            hours_per_day: 8.0,
        }
    }
}

/// Cuts the remaining work visible from the start of `week` into a
/// look-ahead instance. Durations are current belief means; `progress`
/// holds the latest percent complete per activity.
pub fn build_lookahead(
    network: &ActivityNetwork,
    beliefs: &BeliefSet<f64>,
    progress: &BTreeMap<String, f64>,
    resources: &[Resource],
    week: u32,
    settings: LookaheadSettings,
) -> Result<LookaheadInstance, ResourceError> {
    if week == 0 {
        return Err(ResourceError::InvalidInstance("weeks start at 1".into()));
    }
    let status = (settings.days_per_week * (week - 1)) as f64;
    let window = (settings.days_per_week * settings.horizon_weeks) as f64;
    let durations: Vec<f64> = network
        .activities()
        .iter()
        .map(|a| beliefs.get(&a.id).map_or(a.base_duration, |b| b.mean))
        .collect();
    let mut cpm = CpmKernel::new(network.len());
    let makespan = cpm.run(network, &durations);
    if status >= makespan {
        return Err(ResourceError::EmptyWindow(week));
    }
    let mut tasks: Vec<Task> = Vec::new();
    let mut included = vec![false; network.len()];
    for (i, act) in network.activities().iter().enumerate() {
        let pct = match progress.get(&act.id) {
            Some(p) => *p,
            None if beliefs.get(&act.id).is_some_and(|b| b.is_pinned()) => 1.0,
            None => 0.0,
        };
        if pct >= 1.0 || cpm.early_finish(i) <= status {
            continue;
        }
        let remaining = if pct > 0.0 {
            durations[i] * (1.0 - pct)
        } else {
            cpm.early_finish(i) - cpm.early_start(i).max(status)
        };
        let release = (cpm.early_start(i) - status).max(0.0);
        if remaining <= 1e-9 || release >= window {
            continue;
        }
        included[i] = true;
        let lf = (cpm.late_finish(i) - status).max(0.0).floor() as u32;
        let mut t = Task::new(act.id.clone(), (remaining - 1e-9).ceil().max(1.0) as u32, lf)
            .released(if pct > 0.0 { 0 } else { release.round() as u32 });
        for d in &act.resource_demands {
            if d.units > 0.0 {
                t = t.with_demand(d.resource.clone(), d.units);
            }
        }
        tasks.push(t);
    }
    if tasks.is_empty() {
        return Err(ResourceError::EmptyWindow(week));
    }
    for t in tasks.iter_mut() {
        let i = network.index_of(&t.id).expect("task comes from network");
        t.predecessors = network
            .predecessors(i)
            .iter()
            .filter(|&&p| included[p])
            .map(|&p| network.activities()[p].id.clone())
            .collect();
    }
    let inst = LookaheadInstance {
        start_week: week,
        horizon_weeks: settings.horizon_weeks,
        days_per_week: settings.days_per_week,
        hours_per_day: settings.hours_per_day,
        progress: (status / makespan).clamp(0.0, 1.0),
        tasks,
        resources: resources.to_vec(),
    };
    inst.validate()?;
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "reason")]
pub enum RecommendationStatus {
    Proposed,
    Adopted,
    Rejected(String),
}

impl fmt::Display for RecommendationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecommendationStatus::Proposed => f.write_str("proposed"),
            RecommendationStatus::Adopted => f.write_str("adopted"),
            RecommendationStatus::Rejected(_) => f.write_str("rejected"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub action_id: String,
    pub week: u32,
    pub action: ResourceAction,
    #[serde(default)]
    pub summary: String,
    /// Change in this week's overtime hours from a one-step simulation.
    pub predicted_overtime_delta: f64,
    #[serde(default)]
    pub predicted_slip_delta: i64,
    #[serde(flatten)]
    pub status: RecommendationStatus,
}

impl Recommendation {
    pub fn is_adopted(&self) -> bool {
        self.status == RecommendationStatus::Adopted
    }
}

impl fmt::Display for ResourceAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceAction::NoOp => f.write_str("no change"),
            ResourceAction::ShiftCrew { activity, days } if *days < 0 => {
                write!(f, "start {activity} crew {} day(s) earlier", -days)
            }
            ResourceAction::ShiftCrew { activity, days } => write!(f, "shift {activity} crew {days} day(s) later"),
            ResourceAction::AddShift { resource, units, day } => {
                write!(f, "add shift of {units} {resource} on day {}", day + 1)
            }
            ResourceAction::Merge { first, second } => write!(f, "merge {first} with {second}"),
            ResourceAction::Resequence { first, second } => write!(f, "run {second} after {first}"),
            ResourceAction::Split { activity } => write!(f, "split {activity} crews"),
            ResourceAction::PreStage { activity } => write!(f, "pre-stage {activity}"),
        }
    }
}

pub fn action_id(week: u32, n: usize) -> String {
    if n == 0 {
        format!("RL-{week:03}")
    } else {
        format!("RL-{week:03}-{}", n + 1)
    }
}

/// Up to `k` moves, in policy order, that cut this week's overtime without
/// pushing any task past its latest finish.
pub fn recommend(
    policy: &Policy,
    inst: &LookaheadInstance,
    k: usize,
    rule: PriorityRule,
) -> Result<Vec<Recommendation>, ResourceError> {
    if k == 0 {
        return Err(ResourceError::InvalidConfig("k must be at least 1".into()));
    }
    let state = encode_state(inst, &baseline_schedule(inst, rule));
    let mut out = Vec::new();
    for a in policy.ranked(state) {
        let kind = ActionKind::ALL[a];
        if kind == ActionKind::NoOp {
            continue;
        }
        let Some(action) = candidate_action(inst, kind, rule) else { continue };
        let Ok(effect) = simulate_action(inst, &action, rule) else { continue };
        if effect.overtime_delta >= -1e-9 || effect.slip_delta > 0 {
            continue;
        }
        out.push(Recommendation {
            action_id: action_id(inst.start_week, out.len()),
            week: inst.start_week,
            summary: action.to_string(),
            action,
            predicted_overtime_delta: effect.overtime_delta,
            predicted_slip_delta: effect.slip_delta,
            status: RecommendationStatus::Proposed,
        });
        if out.len() == k {
            break;
        }
    }
    Ok(out)
}

/// Records a decision. Adoption returns the instance with the action
/// applied and is refused when it would push work past its latest finish.
pub fn decide(
    rec: &mut Recommendation,
    inst: &LookaheadInstance,
    adopted: bool,
    reason: &str,
    rule: PriorityRule,
) -> Result<Option<LookaheadInstance>, ResourceError> {
    if rec.status != RecommendationStatus::Proposed {
        return Err(ResourceError::AlreadyDecided(rec.action_id.clone()));
    }
    if !adopted {
        rec.status = RecommendationStatus::Rejected(reason.to_string());
        return Ok(None);
    }
    let effect = simulate_action(inst, &rec.action, rule)?;
    if effect.slip_delta > 0 {
        return Err(ResourceError::MakespanExtension(effect.slip_delta as u32));
    }
    rec.status = RecommendationStatus::Adopted;
    Ok(Some(apply_action(inst, &rec.action)?))
}

/// One week's look-ahead with the recommendations made for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekPlan {
    pub instance: LookaheadInstance,
    pub recommendations: Vec<Recommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekOvertime {
    pub week: u32,
    pub baseline_hours: f64,
    pub optimized_hours: f64,
    pub baseline_idle_hours: f64,
    pub optimized_idle_hours: f64,
    pub baseline_slip_days: u32,
    pub optimized_slip_days: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvertimeReport {
    pub weeks: Vec<WeekOvertime>,
    pub baseline_total: f64,
    pub optimized_total: f64,
    pub reduction_hours: f64,
    pub reduction_pct: f64,
    pub idle_reduction_hours: f64,
    pub proposed: usize,
    pub adopted: usize,
    /// `None` when nothing was recommended.
    pub adoption_rate: Option<f64>,
    /// No week's slip grew under the adopted actions.
    pub makespan_unchanged: bool,
}

/// Overtime in each week's first period with and without the adopted
/// actions.
pub fn overtime_report(plans: &[WeekPlan], rule: PriorityRule) -> Result<OvertimeReport, ResourceError> {
    let mut weeks = Vec::with_capacity(plans.len());
    let (mut proposed, mut adopted) = (0, 0);
    for plan in plans {
        let base = baseline_schedule(&plan.instance, rule);
        let mut inst = plan.instance.clone();
        for rec in &plan.recommendations {
            proposed += 1;
            if rec.is_adopted() {
                adopted += 1;
                inst = apply_action(&inst, &rec.action)?;
            }
        }
        let opt = baseline_schedule(&inst, rule);
        weeks.push(WeekOvertime {
            week: plan.instance.start_week,
            baseline_hours: base.current_overtime(),
            optimized_hours: opt.current_overtime(),
            baseline_idle_hours: base.idle_hours,
            optimized_idle_hours: opt.idle_hours,
            baseline_slip_days: base.slip_days,
            optimized_slip_days: opt.slip_days,
        });
    }
    let baseline_total: f64 = weeks.iter().map(|w| w.baseline_hours).sum();
    let optimized_total: f64 = weeks.iter().map(|w| w.optimized_hours).sum();
    let reduction_hours = baseline_total - optimized_total;
    Ok(OvertimeReport {
        reduction_pct: if baseline_total > 0.0 {
            100.0 * reduction_hours / baseline_total
        } else {
            0.0
        },
        idle_reduction_hours: weeks.iter().map(|w| w.baseline_idle_hours - w.optimized_idle_hours).sum(),
        makespan_unchanged: weeks.iter().all(|w| w.optimized_slip_days <= w.baseline_slip_days),
        adoption_rate: (proposed > 0).then(|| adopted as f64 / proposed as f64),
        weeks,
        baseline_total,
        optimized_total,
        reduction_hours,
        proposed,
        adopted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::{q_learning, LookaheadEnv, QConfig};
    use rand_chacha::ChaCha8Rng;

    fn formwork() -> LookaheadInstance {
        LookaheadInstance {
            start_week: 3,
            horizon_weeks: 2,
            days_per_week: 5,
            hours_per_day: 8.0,
            progress: 0.2,
            tasks: vec![
                Task::new("form", 4, 6).with_demand("carp", 5.0),
                Task::new("strip", 3, 9).with_demand("carp", 5.0),
            ],
            resources: vec![Resource::new("carp", 8.0, 40.0)],
        }
    }

    fn trained() -> Policy {
        let mut env = LookaheadEnv::new(|_: &mut ChaCha8Rng| formwork());
        q_learning(&mut env, &QConfig::default()).unwrap()
    }

    #[test]
    fn recommendations_cut_overtime() {
        let recs = recommend(&trained(), &formwork(), 7, PriorityRule::MinSlack).unwrap();
        assert!(!recs.is_empty());
        assert_eq!(recs[0].action_id, "RL-003");
        assert!(recs.iter().all(|r| r.predicted_overtime_delta < 0.0));
    }

    #[test]
    fn no_conflict_no_recommendations() {
        let mut i = formwork();
        i.resources[0].capacity = 20.0;
        assert!(recommend(&trained(), &i, 3, PriorityRule::MinSlack).unwrap().is_empty());
    }

    #[test]
    fn decide_once() {
        let inst = formwork();
        let mut recs = recommend(&trained(), &inst, 1, PriorityRule::MinSlack).unwrap();
        let r = &mut recs[0];
        assert_eq!(decide(r, &inst, false, "Supervisor preference", PriorityRule::MinSlack).unwrap(), None);
        assert_eq!(r.status, RecommendationStatus::Rejected("Supervisor preference".into()));
        assert_eq!(
            decide(r, &inst, true, "", PriorityRule::MinSlack),
            Err(ResourceError::AlreadyDecided("RL-003".into()))
        );
    }

    #[test]
    fn adoption_that_slips_is_refused() {
        let inst = formwork();
        let mut r = Recommendation {
            action_id: "RL-009".into(),
            week: 3,
            action: ResourceAction::ShiftCrew { activity: "form".into(), days: 4 },
            summary: String::new(),
            predicted_overtime_delta: 0.0,
            predicted_slip_delta: 0,
            status: RecommendationStatus::Proposed,
        };
        assert!(matches!(
            decide(&mut r, &inst, true, "", PriorityRule::MinSlack),
            Err(ResourceError::MakespanExtension(_))
        ));
        assert_eq!(r.status, RecommendationStatus::Proposed);
    }

    #[test]
    fn report_without_recommendations() {
        let plans = vec![WeekPlan { instance: formwork(), recommendations: vec![] }];
        let rep = overtime_report(&plans, PriorityRule::MinSlack).unwrap();
        assert_eq!(rep.reduction_hours, 0.0);
        assert_eq!(rep.adoption_rate, None);
    }

    #[test]
    fn report_counts_adopted_only() {
        let inst = formwork();
        let mut recs = recommend(&trained(), &inst, 2, PriorityRule::MinSlack).unwrap();
        recs[0].status = RecommendationStatus::Adopted;
        let plans = vec![WeekPlan { instance: inst, recommendations: recs.clone() }];
        let rep = overtime_report(&plans, PriorityRule::MinSlack).unwrap();
        assert!((rep.reduction_hours + recs[0].predicted_overtime_delta).abs() < 1e-9);
        assert_eq!(rep.adopted, 1);
    }

    #[test]
    fn status_serialises_with_reason() {
        let s = serde_json::to_string(&RecommendationStatus::Rejected("Overtime cap".into())).unwrap();
        assert_eq!(s, r#"{"status":"rejected","reason":"Overtime cap"}"#);
    }
}
