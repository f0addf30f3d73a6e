use serde::{Deserialize, Serialize};

use super::LookaheadInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorityRule {
    MinSlack,
    ShortestDuration,
    MostDemand,
}

impl PriorityRule {
    pub const ALL: [PriorityRule; 3] = [
        PriorityRule::MinSlack,
        PriorityRule::ShortestDuration,
        PriorityRule::MostDemand,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub task_id: String,
    pub start: u32,
    pub finish: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub assignments: Vec<Assignment>,
    pub makespan: u32,
    /// Overtime hours per period, all resources, from the window start.
    pub overtime_by_period: Vec<f64>,
    /// Overtime hours inside the window.
    pub overtime_hours: f64,
    /// Unassigned capacity-hours on days a crew is on site, inside the window.
    pub idle_hours: f64,
    /// Days the latest task runs past its latest finish.
    pub slip_days: u32,
}

impl ScheduleOutcome {
    pub fn assignment(&self, task_id: &str) -> Option<&Assignment> {
        self.assignments.iter().find(|a| a.task_id == task_id)
    }

    /// Overtime in the first period of the window.
    pub fn current_overtime(&self) -> f64 {
        self.overtime_by_period.first().copied().unwrap_or(0.0)
    }
}

struct Timeline<'a> {
    inst: &'a LookaheadInstance,
    usage: Vec<Vec<f64>>,
    overtime: Vec<Vec<f64>>,
}

const EPS: f64 = 1e-9;

impl<'a> Timeline<'a> {
    fn new(inst: &'a LookaheadInstance) -> Self {
        Self {
            inst,
            usage: vec![Vec::new(); inst.resources.len()],
            overtime: vec![Vec::new(); inst.resources.len()],
        }
    }

    fn usage_at(&self, r: usize, day: usize) -> f64 {
        self.usage[r].get(day).copied().unwrap_or(0.0)
    }

    fn overtime_in(&self, r: usize, period: usize) -> f64 {
        self.overtime[r].get(period).copied().unwrap_or(0.0)
    }

    fn extra_hours(&self, r: usize, day: usize, units: f64) -> f64 {
        let cap = self.inst.resources[r].capacity_on(day as u32);
        let old = self.usage_at(r, day);
        ((old + units - cap).max(0.0) - (old - cap).max(0.0)) * self.inst.hours_per_day
    }

    fn fits(&self, demands: &[(usize, f64)], start: u32, duration: u32) -> bool {
        let dpw = self.inst.days_per_week as usize;
        for &(r, units) in demands {
            let mut added: Vec<(usize, f64)> = Vec::new();
            for day in start as usize..(start + duration) as usize {
                let extra = self.extra_hours(r, day, units);
                if extra > 0.0 {
                    let p = day / dpw;
                    match added.last_mut() {
                        Some((q, h)) if *q == p => *h += extra,
                        _ => added.push((p, extra)),
                    }
                }
            }
            let cap = self.inst.resources[r].overtime_cap;
            if added.iter().any(|&(p, h)| self.overtime_in(r, p) + h > cap + EPS) {
                return false;
            }
        }
        true
    }

    fn place(&mut self, demands: &[(usize, f64)], start: u32, duration: u32) {
        let dpw = self.inst.days_per_week as usize;
        for &(r, units) in demands {
            for day in start as usize..(start + duration) as usize {
                let extra = self.extra_hours(r, day, units);
                if self.usage[r].len() <= day {
                    self.usage[r].resize(day + 1, 0.0);
                }
                self.usage[r][day] += units;
                let p = day / dpw;
                if self.overtime[r].len() <= p {
                    self.overtime[r].resize(p + 1, 0.0);
                }
                self.overtime[r][p] += extra;
            }
        }
    }
}

fn resolved_demands(inst: &LookaheadInstance, task: usize) -> Vec<(usize, f64)> {
    inst.tasks[task]
        .demands
        .iter()
        .filter(|(_, u)| *u > 0.0)
        .filter_map(|(r, u)| inst.resources.iter().position(|x| &x.id == r).map(|i| (i, *u)))
        .collect()
}

/// Places tasks in the given order, each at its earliest start that
/// respects precedence and keeps every period's overtime under the cap.
/// `order` must list every task after its predecessors.
pub fn schedule_in_order(inst: &LookaheadInstance, order: &[usize]) -> ScheduleOutcome {
    let n = inst.tasks.len();
    let mut finish: Vec<Option<u32>> = vec![None; n];
    let mut start_of = vec![0u32; n];
    let mut timeline = Timeline::new(inst);
    for &i in order {
        let task = &inst.tasks[i];
        let ready = task
            .predecessors
            .iter()
            .filter_map(|p| inst.task_index(p))
            .map(|j| finish[j].expect("order respects precedence"))
            .max()
            .unwrap_or(0);
        let demands = resolved_demands(inst, i);
        let mut t = task.earliest().max(ready);
        // an empty stretch always fits, so this terminates
        while !timeline.fits(&demands, t, task.duration) {
            t += 1;
        }
        timeline.place(&demands, t, task.duration);
        start_of[i] = t;
        finish[i] = Some(t + task.duration);
    }
    summarize(inst, &timeline, &start_of, &finish)
}

fn summarize(
    inst: &LookaheadInstance,
    timeline: &Timeline<'_>,
    start_of: &[u32],
    finish: &[Option<u32>],
) -> ScheduleOutcome {
    let periods = timeline.overtime.iter().map(Vec::len).max().unwrap_or(0);
    let overtime_by_period: Vec<f64> = (0..periods)
        .map(|p| (0..inst.resources.len()).map(|r| timeline.overtime_in(r, p)).sum())
        .collect();
    let overtime_hours = overtime_by_period.iter().take(inst.horizon_weeks as usize).sum();
    let window = inst.window_days() as usize;
    let mut idle_hours = 0.0;
    for (r, res) in inst.resources.iter().enumerate() {
        let used: Vec<usize> = (0..window).filter(|&d| timeline.usage_at(r, d) > EPS).collect();
        if let (Some(&first), Some(&last)) = (used.first(), used.last()) {
            idle_hours += (first..=last)
                .map(|d| (res.capacity_on(d as u32) - timeline.usage_at(r, d)).max(0.0) * inst.hours_per_day)
                .sum::<f64>();
        }
    }
    let mut slip_days = 0;
    let mut makespan = 0;
    let assignments = inst
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let f = finish[i].unwrap_or(0);
            makespan = makespan.max(f);
            slip_days = slip_days.max(f.saturating_sub(t.latest_finish));
            Assignment {
                task_id: t.id.clone(),
                start: start_of[i],
                finish: f,
            }
        })
        .collect();
    ScheduleOutcome {
        assignments,
        makespan,
        overtime_by_period,
        overtime_hours,
        idle_hours,
        slip_days,
    }
}

/// Serial schedule generation: repeatedly takes the best eligible task
/// under `rule` (ties by id).
pub fn baseline_schedule(inst: &LookaheadInstance, rule: PriorityRule) -> ScheduleOutcome {
    let order = priority_order(inst, rule);
    schedule_in_order(inst, &order)
}

pub fn priority_order(inst: &LookaheadInstance, rule: PriorityRule) -> Vec<usize> {
    let n = inst.tasks.len();
    let key = |i: usize| -> (i64, &str) {
        let t = &inst.tasks[i];
        let k = match rule {
            PriorityRule::MinSlack => t.latest_finish as i64 - t.earliest() as i64 - t.duration as i64,
            PriorityRule::ShortestDuration => t.duration as i64,
            PriorityRule::MostDemand => {
                let load: f64 = t.demands.iter().map(|(_, u)| u).sum::<f64>() * t.duration as f64;
                -(load * 1000.0).round() as i64
            }
        };
        (k, t.id.as_str())
    };
    let preds: Vec<Vec<usize>> = inst
        .tasks
        .iter()
        .map(|t| t.predecessors.iter().filter_map(|p| inst.task_index(p)).collect())
        .collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n)
            .filter(|&i| !done[i] && preds[i].iter().all(|&p| done[p]))
            .min_by(|&a, &b| key(a).cmp(&key(b)))
            .expect("instance is acyclic");
        done[next] = true;
        order.push(next);
    }
    order
}

/// Lowest-overtime schedule over every precedence-feasible order; ties by
/// makespan. Exponential: meant for small instances.
pub fn exhaustive_best(inst: &LookaheadInstance) -> ScheduleOutcome {
    let n = inst.tasks.len();
    let preds: Vec<Vec<usize>> = inst
        .tasks
        .iter()
        .map(|t| t.predecessors.iter().filter_map(|p| inst.task_index(p)).collect())
        .collect();
    let mut best: Option<ScheduleOutcome> = None;
    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn rec(
        inst: &LookaheadInstance,
        preds: &[Vec<usize>],
        order: &mut Vec<usize>,
        used: &mut [bool],
        best: &mut Option<ScheduleOutcome>,
    ) {
        if order.len() == used.len() {
            let s = schedule_in_order(inst, order);
            let better = best.as_ref().is_none_or(|b| {
                s.overtime_hours < b.overtime_hours - EPS
                    || ((s.overtime_hours - b.overtime_hours).abs() <= EPS && s.makespan < b.makespan)
            });
            if better {
                *best = Some(s);
            }
            return;
        }
        for i in 0..used.len() {
            if !used[i] && preds[i].iter().all(|&p| used[p]) {
                used[i] = true;
                order.push(i);
                rec(inst, preds, order, used, best);
                order.pop();
                used[i] = false;
            }
        }
    }
    rec(inst, &preds, &mut order, &mut used, &mut best);
    best.unwrap_or_else(|| schedule_in_order(inst, &[]))
}

/// Best of the three priority rules by window overtime, then makespan.
pub fn best_rule_schedule(inst: &LookaheadInstance) -> (PriorityRule, ScheduleOutcome) {
    PriorityRule::ALL
        .iter()
        .map(|&r| (r, baseline_schedule(inst, r)))
        .min_by(|a, b| {
            a.1.overtime_hours
                .total_cmp(&b.1.overtime_hours)
                .then(a.1.makespan.cmp(&b.1.makespan))
        })
        .expect("three rules")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::{random_instance, Resource, Task};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inst(tasks: Vec<Task>, resources: Vec<Resource>) -> LookaheadInstance {
        LookaheadInstance {
            start_week: 1,
            horizon_weeks: 2,
            days_per_week: 5,
            hours_per_day: 8.0,
            progress: 0.0,
            tasks,
            resources,
        }
    }

    #[test]
    fn within_capacity_has_no_overtime() {
        let i = inst(
            vec![Task::new("a", 3, 10).with_demand("crew", 3.0), Task::new("b", 2, 10).with_demand("crew", 4.0)],
            vec![Resource::new("crew", 8.0, 16.0)],
        );
        let s = baseline_schedule(&i, PriorityRule::MinSlack);
        assert_eq!(s.overtime_hours, 0.0);
        assert_eq!(s.makespan, 3);
    }

    #[test]
    fn overtime_is_units_above_capacity_times_hours() {
        let i = inst(vec![Task::new("a", 1, 5).with_demand("crew", 10.0)], vec![Resource::new("crew", 8.0, 16.0)]);
        let s = baseline_schedule(&i, PriorityRule::MinSlack);
        assert_eq!(s.overtime_hours, 16.0);
        assert_eq!(s.assignment("a").unwrap().start, 0);
    }

    #[test]
    fn cap_delays_instead_of_exceeding() {
        // both days together would need 32 h in one period against a 16 h cap
        let i = inst(
            vec![Task::new("a", 1, 9).with_demand("crew", 10.0), Task::new("b", 1, 9).with_demand("crew", 10.0)],
            vec![Resource::new("crew", 8.0, 16.0)],
        );
        let s = baseline_schedule(&i, PriorityRule::MinSlack);
        assert_eq!(s.assignment("a").unwrap().start, 0);
        assert_eq!(s.assignment("b").unwrap().start, 5);
        assert_eq!(s.overtime_by_period, vec![16.0, 16.0]);
    }

    #[test]
    fn precedence_respected() {
        let i = inst(
            vec![Task::new("a", 3, 10).with_demand("crew", 1.0), Task::new("b", 2, 10).after("a")],
            vec![Resource::new("crew", 8.0, 0.0)],
        );
        let s = baseline_schedule(&i, PriorityRule::ShortestDuration);
        assert_eq!(s.assignment("b").unwrap().start, 3);
    }

    #[test]
    fn four_task_instance_matches_exhaustive_makespan() {
        let i = inst(
            vec![
                Task::new("a", 2, 4).with_demand("crew", 5.0),
                Task::new("b", 3, 6).with_demand("crew", 4.0),
                Task::new("c", 1, 3).with_demand("crew", 3.0).after("a"),
                Task::new("d", 2, 8).with_demand("crew", 5.0),
            ],
            vec![Resource::new("crew", 8.0, 0.0)],
        );
        let ex = exhaustive_best(&i);
        let ms = baseline_schedule(&i, PriorityRule::MinSlack);
        assert_eq!(ms.overtime_hours, ex.overtime_hours);
        assert_eq!(ms.makespan, ex.makespan);
    }

    #[test]
    fn exhaustive_never_beaten_by_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let i = random_instance(&mut rng, 5, 1);
            let ex = exhaustive_best(&i);
            for rule in PriorityRule::ALL {
                assert!(baseline_schedule(&i, rule).overtime_hours >= ex.overtime_hours - 1e-9);
            }
        }
    }

    #[test]
    fn idle_counts_gaps_between_assignments() {
        let i = inst(
            vec![Task::new("a", 1, 10).with_demand("crew", 2.0), Task::new("b", 1, 10).with_demand("crew", 2.0).released(2)],
            vec![Resource::new("crew", 2.0, 0.0)],
        );
        let s = baseline_schedule(&i, PriorityRule::MinSlack);
        // day 1 is empty between two fully used days
        assert_eq!(s.idle_hours, 16.0);
    }
}
