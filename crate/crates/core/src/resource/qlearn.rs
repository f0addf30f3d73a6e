use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    apply_action, baseline_schedule, candidate_action, ActionKind, LookaheadInstance, PriorityRule, ResourceError,
    ScheduleOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next_state: usize,
    pub reward: f64,
    pub done: bool,
}

/// Finite episodic environment for tabular learning.
pub trait Environment {
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> usize;
    /// Actions that make sense in the current state. Defaults to all.
    fn available(&self) -> Vec<usize> {
        (0..self.action_count()).collect()
    }
    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Transition;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "alpha")]
pub enum StepSize {
    /// 1 / visit count.
    SampleAverage,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QConfig {
    pub episodes: u32,
    pub max_steps: u32,
    pub gamma: f64,
    pub step_size: StepSize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub seed: u64,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            max_steps: 20,
            gamma: 0.9,
            step_size: StepSize::SampleAverage,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            seed: 7,
        }
    }
}

impl QConfig {
    fn validate(&self) -> Result<(), ResourceError> {
        let bad = |m: &str| Err(ResourceError::InvalidConfig(m.to_string()));
        if self.episodes == 0 || self.max_steps == 0 {
            return bad("episodes and max_steps must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon must lie in [0, 1]");
        }
        if let StepSize::Constant(a) = self.step_size {
            if !(a > 0.0 && a <= 1.0) {
                return bad("step size must lie in (0, 1]");
            }
        }
        Ok(())
    }

    /// Exploration rate for an episode, linear from start to end.
    pub fn epsilon(&self, episode: u32) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_end;
        }
        let t = episode as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub q: Vec<Vec<f64>>,
    pub visits: Vec<Vec<u64>>,
    pub episodes: u32,
    pub seed: u64,
}

impl Policy {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            q: vec![vec![0.0; actions]; states],
            visits: vec![vec![0; actions]; states],
            episodes: 0,
            seed: 0,
        }
    }

    /// Best tried action among `allowed`; ties and untried states fall to
    /// the lowest index.
    pub fn greedy_among(&self, state: usize, allowed: &[usize]) -> usize {
        let mut best: Option<usize> = None;
        for &a in allowed {
            if self.visits[state][a] == 0 {
                continue;
            }
            if best.is_none_or(|b| self.q[state][a] > self.q[state][b] || (self.q[state][a] == self.q[state][b] && a < b)) {
                best = Some(a);
            }
        }
        best.or_else(|| allowed.iter().copied().min()).unwrap_or(0)
    }

    pub fn greedy(&self, state: usize) -> usize {
        let all: Vec<usize> = (0..self.q[state].len()).collect();
        self.greedy_among(state, &all)
    }

    /// Actions ordered by value, tried ones first.
    pub fn ranked(&self, state: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.q[state].len()).collect();
        idx.sort_by(|&a, &b| {
            let (va, vb) = (self.visits[state][a] > 0, self.visits[state][b] > 0);
            vb.cmp(&va)
                .then(self.q[state][b].total_cmp(&self.q[state][a]))
                .then(a.cmp(&b))
        });
        idx
    }

    fn best_value(&self, state: usize, allowed: &[usize]) -> f64 {
        allowed
            .iter()
            .filter(|&&a| self.visits[state][a] > 0)
            .map(|&a| self.q[state][a])
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .unwrap_or(0.0)
    }
}

/// Tabular Q-learning with an epsilon-greedy behaviour policy.
pub fn q_learning<E: Environment>(env: &mut E, config: &QConfig) -> Result<Policy, ResourceError> {
    config.validate()?;
    let mut policy = Policy::new(env.state_count(), env.action_count());
    policy.seed = config.seed;
    policy.episodes = config.episodes;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for ep in 0..config.episodes {
        let eps = config.epsilon(ep);
        let mut s = env.reset(&mut rng);
        for _ in 0..config.max_steps {
            let allowed = env.available();
            if allowed.is_empty() {
                break;
            }
            let a = if rng.random::<f64>() < eps {
                allowed[rng.random_range(0..allowed.len())]
            } else {
                policy.greedy_among(s, &allowed)
            };
            let tr = env.step(a, &mut rng);
            let future = if tr.done {
                0.0
            } else {
                policy.best_value(tr.next_state, &env.available())
            };
            policy.visits[s][a] += 1;
            let alpha = match config.step_size {
                StepSize::SampleAverage => 1.0 / policy.visits[s][a] as f64,
                StepSize::Constant(a) => a,
            };
            let target = tr.reward + config.gamma * future;
            policy.q[s][a] += alpha * (target - policy.q[s][a]);
            if tr.done {
                break;
            }
            s = tr.next_state;
        }
    }
    Ok(policy)
}

/// Small MDP given by explicit transition tables, for oracle checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    /// `transitions[s][a]` lists (probability, next state, reward).
    pub transitions: Vec<Vec<Vec<(f64, usize, f64)>>>,
    /// Fixed start state; `None` starts uniformly at random.
    pub start: Option<usize>,
    #[serde(skip)]
    state: usize,
}

impl TabularMdp {
    pub fn new(transitions: Vec<Vec<Vec<(f64, usize, f64)>>>) -> Self {
        Self {
            transitions,
            start: None,
            state: 0,
        }
    }

    fn expected(&self, s: usize, a: usize, v: &[f64], gamma: f64) -> f64 {
        self.transitions[s][a].iter().map(|&(p, n, r)| p * (r + gamma * v[n])).sum()
    }

    /// Optimal state values and greedy actions by value iteration.
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> (Vec<f64>, Vec<usize>) {
        let n = self.transitions.len();
        let mut v = vec![0.0; n];
        loop {
            let next: Vec<f64> = (0..n)
                .map(|s| {
                    (0..self.transitions[s].len())
                        .map(|a| self.expected(s, a, &v, gamma))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if diff < tol {
                break;
            }
        }
        let pi = (0..n)
            .map(|s| {
                let mut best = 0;
                for a in 1..self.transitions[s].len() {
                    if self.expected(s, a, &v, gamma) > self.expected(s, best, &v, gamma) + tol {
                        best = a;
                    }
                }
                best
            })
            .collect();
        (v, pi)
    }

    /// State values of a fixed policy.
    pub fn policy_values(&self, actions: &[usize], gamma: f64, tol: f64) -> Vec<f64> {
        let n = self.transitions.len();
        let mut v = vec![0.0; n];
        loop {
            let next: Vec<f64> = (0..n).map(|s| self.expected(s, actions[s], &v, gamma)).collect();
            let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if diff < tol {
                return v;
            }
        }
    }
}

impl Environment for TabularMdp {
    fn state_count(&self) -> usize {
        self.transitions.len()
    }

    fn action_count(&self) -> usize {
        self.transitions.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> usize {
        self.state = self.start.unwrap_or_else(|| rng.random_range(0..self.transitions.len()));
        self.state
    }

    fn available(&self) -> Vec<usize> {
        (0..self.transitions[self.state].len()).collect()
    }

    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Transition {
        let u: f64 = rng.random();
        let outcomes = &self.transitions[self.state][action];
        let mut acc = 0.0;
        let mut pick = outcomes[outcomes.len() - 1];
        for &o in outcomes {
            acc += o.0;
            if u < acc {
                pick = o;
                break;
            }
        }
        self.state = pick.1;
        Transition {
            next_state: pick.1,
            reward: pick.2,
            done: false,
        }
    }
}

/// Weights of the per-week cost the agent minimises.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub idle: f64,
    pub slip: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { idle: 0.5, slip: 10.0 }
    }
}

impl RewardWeights {
    pub fn reward(&self, s: &ScheduleOutcome) -> f64 {
        -(s.current_overtime() + self.idle * s.idle_hours + self.slip * s.slip_days as f64)
    }
}

/// phase (3) × peak utilisation (4) × lag (3)
pub const STATE_COUNT: usize = 36;

/// Discrete state of an instance under its baseline schedule.
pub fn encode_state(inst: &LookaheadInstance, s: &ScheduleOutcome) -> usize {
    let phase = ((inst.progress.clamp(0.0, 1.0) * 3.0) as usize).min(2);
    let mut peak: f64 = 0.0;
    for r in &inst.resources {
        for day in 0..inst.window_days() {
            let used: f64 = inst
                .tasks
                .iter()
                .filter(|t| s.assignment(&t.id).is_some_and(|a| a.start <= day && day < a.finish))
                .map(|t| t.demand_for(&r.id))
                .sum();
            peak = peak.max(used / r.capacity);
        }
    }
    let util = match peak {
        p if p < 0.8 => 0,
        p if p < 1.0 + 1e-9 => 1,
        p if p < 1.2 => 2,
        _ => 3,
    };
    let lag = match s.slip_days {
        0 => 0,
        1..=2 => 1,
        _ => 2,
    };
    phase * 12 + util * 3 + lag
}

/// Weekly look-ahead as an environment: each step applies one move to the
/// current instance and scores the rescheduled week.
pub struct LookaheadEnv<G> {
    generator: G,
    pub rule: PriorityRule,
    pub weights: RewardWeights,
    current: Option<LookaheadInstance>,
}

impl<G> LookaheadEnv<G>
where
    G: FnMut(&mut ChaCha8Rng) -> LookaheadInstance,
{
    pub fn new(generator: G) -> Self {
        Self {
            generator,
            rule: PriorityRule::MinSlack,
            weights: RewardWeights::default(),
            current: None,
        }
    }

    fn instance(&self) -> &LookaheadInstance {
        self.current.as_ref().expect("reset before step")
    }
}

impl<G> Environment for LookaheadEnv<G>
where
    G: FnMut(&mut ChaCha8Rng) -> LookaheadInstance,
{
    fn state_count(&self) -> usize {
        STATE_COUNT
    }

    fn action_count(&self) -> usize {
        ActionKind::ALL.len()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> usize {
        let inst = (self.generator)(rng);
        let s = encode_state(&inst, &baseline_schedule(&inst, self.rule));
        self.current = Some(inst);
        s
    }

    fn available(&self) -> Vec<usize> {
        let inst = self.instance();
        ActionKind::ALL
            .iter()
            .filter(|&&k| {
                candidate_action(inst, k, self.rule).is_some_and(|a| apply_action(inst, &a).is_ok())
            })
            .map(|k| k.index())
            .collect()
    }

    fn step(&mut self, action: usize, _rng: &mut ChaCha8Rng) -> Transition {
        let inst = self.instance().clone();
        let kind = ActionKind::ALL[action];
        let next = candidate_action(&inst, kind, self.rule)
            .and_then(|a| apply_action(&inst, &a).ok())
            .unwrap_or(inst);
        let sched = baseline_schedule(&next, self.rule);
        let reward = self.weights.reward(&sched);
        let state = encode_state(&next, &sched);
        self.current = Some(next);
        // Every step is a simulated week; an episode always runs to
        // `max_steps`, so holding a costly plan keeps paying for it.
        Transition {
            next_state: state,
            reward,
            done: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::{random_instance, Resource, Task};

    fn two_state() -> TabularMdp {
        // state 0: stay pays 1, move to 1 pays 0; state 1: stay pays 2, back pays 0
        TabularMdp::new(vec![
            vec![vec![(1.0, 0, 1.0)], vec![(1.0, 1, 0.0)]],
            vec![vec![(1.0, 1, 2.0)], vec![(1.0, 0, 0.0)]],
        ])
    }

    #[test]
    fn value_iteration_on_toy() {
        // V(1) = 2 / (1 - 0.9) = 20, V(0) = 0.9 * 20 = 18 > 1 / 0.1
        let (v, pi) = two_state().value_iteration(0.9, 1e-10);
        assert!((v[1] - 20.0).abs() < 1e-6);
        assert!((v[0] - 18.0).abs() < 1e-6);
        assert_eq!(pi, vec![1, 0]);
    }

    #[test]
    fn q_learning_finds_toy_optimum() {
        let mut mdp = two_state();
        let cfg = QConfig {
            episodes: 500,
            ..QConfig::default()
        };
        let p = q_learning(&mut mdp, &cfg).unwrap();
        let (_, pi) = mdp.value_iteration(0.9, 1e-10);
        assert_eq!((0..2).map(|s| p.greedy(s)).collect::<Vec<_>>(), pi);
    }

    #[test]
    fn same_seed_same_table() {
        let cfg = QConfig::default();
        let a = q_learning(&mut two_state(), &cfg).unwrap();
        let b = q_learning(&mut two_state(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn epsilon_decays_linearly() {
        let cfg = QConfig {
            episodes: 11,
            epsilon_start: 1.0,
            epsilon_end: 0.0,
            ..QConfig::default()
        };
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(5) - 0.5).abs() < 1e-12);
        assert_eq!(cfg.epsilon(10), 0.0);
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = QConfig {
            episodes: 0,
            ..QConfig::default()
        };
        assert!(q_learning(&mut two_state(), &cfg).is_err());
    }

    #[test]
    fn conflict_free_generator_learns_noop() {
        let gen = |rng: &mut ChaCha8Rng| {
            let mut i = random_instance(rng, 4, 1);
            i.resources[0].capacity = 100.0;
            i
        };
        let mut env = LookaheadEnv::new(gen);
        let p = q_learning(&mut env, &QConfig { episodes: 50, ..QConfig::default() }).unwrap();
        for s in 0..STATE_COUNT {
            assert_eq!(p.greedy(s), ActionKind::NoOp.index());
        }
    }

    #[test]
    fn lookahead_env_learns_to_relieve_overload() {
        let gen = |_: &mut ChaCha8Rng| LookaheadInstance {
            start_week: 1,
            horizon_weeks: 2,
            days_per_week: 5,
            hours_per_day: 8.0,
            progress: 0.5,
            tasks: vec![Task::new("a", 4, 6).with_demand("crew", 10.0)],
            resources: vec![Resource::new("crew", 8.0, 100.0)],
        };
        let mut env = LookaheadEnv::new(gen);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s0 = env.reset(&mut rng);
        let p = q_learning(&mut env, &QConfig::default()).unwrap();
        assert_ne!(p.greedy(s0), ActionKind::NoOp.index());
    }
}
