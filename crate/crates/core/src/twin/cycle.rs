use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::analysis::{evm_as_of, Component};
use super::state::{DecisionRecord, TwinState, WeeklyCycleResult};
use super::TwinError;
use crate::forecast::{
    apply_week, buffer_update, monte_carlo_forecast, BufferObservation, BufferState, ForecastConfig, ProgressEvidence,
};
use crate::network::CpmKernel;
use crate::resource::{
    build_lookahead, decide, q_learning, random_instance, recommend, LookaheadEnv, ResourceError,
};

/// Evidence as the progress model would see it. Without measured progress
/// every activity is assumed to be exactly on plan.
fn effective_evidence(state: &TwinState, rows: &[ProgressEvidence<f64>]) -> Vec<ProgressEvidence<f64>> {
    if !state.ablated(Component::Cv) {
        return rows.to_vec();
    }
    rows.iter()
        .map(|e| {
            let planned = state.priors.get(&e.activity_id).map_or(0.0, |b| b.mean);
            let pct = if planned > 0.0 { (e.elapsed / planned).min(1.0) } else { 1.0 };
            let mut out = ProgressEvidence::new(e.week, e.activity_id.clone(), pct, e.elapsed);
            out.observation_sd = e.observation_sd;
            out
        })
        .collect()
}

/// One control cycle: belief updates, forecast, buffers, EVM, look-ahead and
/// recommendations. `state.version` must already be the new version.
pub(crate) fn run_week(state: &mut TwinState, week: u32, config: &ForecastConfig) -> Result<WeeklyCycleResult, TwinError> {
    let expected = state.last_week() + 1;
    if week != expected {
        return Err(TwinError::WeekOutOfOrder { expected, got: week });
    }
    let network = state.network()?.clone();
    if state.priors.is_empty() {
        return Err(TwinError::MissingInput("priors"));
    }

    let rows: Vec<ProgressEvidence<f64>> = state.evidence.iter().filter(|e| e.week == week).cloned().collect();
    let updated = if state.ablated(Component::Bayes) {
        0
    } else {
        let (next, updated) = apply_week(&state.beliefs, &effective_evidence(state, &rows))?;
        state.beliefs = next;
        updated
    };

    let forecast = monte_carlo_forecast(&network, &state.beliefs, config)?;
    let means: Vec<f64> = network
        .activities()
        .iter()
        .map(|a| state.beliefs.get(&a.id).map_or(a.base_duration, |b| b.mean))
        .collect();
    let mut cpm = CpmKernel::new(network.len());
    let deterministic_finish = cpm.run(&network, &means);
    let deterministic_critical = network
        .activities()
        .iter()
        .enumerate()
        .filter(|(i, _)| cpm.is_critical(*i))
        .map(|(_, a)| a.id.clone())
        .collect();

    let buffer = if state.config.buffers.baseline_finish > 0.0 {
        let prev = match state.buffer.take() {
            Some(b) => b,
            None => BufferState::new(&state.config.buffers)?,
        };
        let obs = BufferObservation {
            week,
            project_finish: forecast.p50_finish,
            feeding_finish: state
                .config
                .feeding_activity
                .as_ref()
                .and_then(|a| forecast.activity_p50_finish.get(a).copied()),
        };
        let next = buffer_update(&prev, &obs);
        let entry = next.entries.last().cloned();
        state.buffer = Some(next);
        entry
    } else {
        None
    };

    let evm = evm_as_of(state, week)?.and_then(|r| r.metrics.last().cloned());

    let mut issued = Vec::new();
    if !state.resources.is_empty() {
        let progress = state.progress_at(week);
        match build_lookahead(
            &network,
            &state.beliefs,
            &progress,
            &state.resources,
            week,
            state.config.lookahead,
        ) {
            Ok(inst) if state.ablated(Component::Drl) => {
                state.lookaheads.insert(week, inst);
            }
            Ok(inst) => {
                if state.policy.is_none() {
                    state.policy = Some(train_policy(state)?);
                }
                let policy = state.policy.as_ref().expect("trained above");
                let recs = recommend(
                    policy,
                    &inst,
                    state.config.recommendations_per_week.max(1),
                    state.config.priority_rule,
                )?;
                issued = recs.iter().map(|r| r.action_id.clone()).collect();
                state.recommendations.extend(recs);
                state.lookaheads.insert(week, inst);
            }
            Err(ResourceError::EmptyWindow(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }

    let result = WeeklyCycleResult {
        week,
        version: state.version,
        evidence_rows: rows.len(),
        updated_beliefs: updated,
        missing_evidence: rows.is_empty(),
        forecast,
        deterministic_finish,
        deterministic_critical,
        evm,
        buffer,
        recommendations: issued,
    };
    state.weeks.insert(week, result.clone());
    Ok(result)
}

/// Policy trained on random look-aheads shaped like the project's crews.
fn train_policy(state: &TwinState) -> Result<crate::resource::Policy, TwinError> {
    let days = state.config.lookahead.days_per_week;
    let hours = state.config.lookahead.hours_per_day;
    let generator = move |rng: &mut ChaCha8Rng| {
        let tasks = rng.random_range(3..=6);
        let resources = rng.random_range(1..=2);
        let mut inst = random_instance(rng, tasks, resources);
        inst.days_per_week = days;
        inst.hours_per_day = hours;
        for r in inst.resources.iter_mut() {
            r.overtime_cap = r.overtime_cap.max(hours * days as f64);
        }
        inst
    };
    let mut env = LookaheadEnv::new(generator);
    env.rule = state.config.priority_rule;
    Ok(q_learning(&mut env, &state.config.training)?)
}

pub(crate) fn decide_recommendation(
    state: &mut TwinState,
    action_id: &str,
    adopted: bool,
    reason: &str,
    timestamp: &str,
) -> Result<DecisionRecord, TwinError> {
    let idx = state
        .recommendations
        .iter()
        .position(|r| r.action_id == action_id)
        .ok_or_else(|| TwinError::UnknownRecommendation(action_id.to_string()))?;
    let week = state.recommendations[idx].week;
    let current = match state.adopted_plans.get(&week).or_else(|| state.lookaheads.get(&week)) {
        Some(i) => i.clone(),
        None => return Err(TwinError::UnknownRecommendation(action_id.to_string())),
    };
    let rule = state.config.priority_rule;
    let rec = &mut state.recommendations[idx];
    if let Some(next) = decide(rec, &current, adopted, reason, rule)? {
        state.adopted_plans.insert(week, next);
    }
    let rec = &state.recommendations[idx];
    let record = DecisionRecord {
        week,
        action_id: rec.action_id.clone(),
        summary: rec.summary.clone(),
        status: rec.status.to_string(),
        reason: if adopted { String::new() } else { reason.to_string() },
        timestamp: timestamp.to_string(),
    };
    state.decision_log.push(record.clone());
    Ok(record)
}
