//! What-if scenarios evaluated against a baseline with common random
//! numbers, and tornado ranking of the results.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::{nearest_rank, replication_stream, BeliefSet, DurationBelief, ForecastConfig};
use crate::network::{ActivityNetwork, CalendarHold, CpmKernel, Edge, NetworkError};
use crate::Scalar;

const CHUNK: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SandboxError {
    #[error("unknown activity {0}")]
    UnknownActivity(String),
    #[error("unknown resource {0}")]
    UnknownResource(String),
    #[error("invalid perturbation in {scenario}: {reason}")]
    InvalidPerturbation { scenario: String, reason: String },
    #[error("missing belief for {0}")]
    MissingBelief(String),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("no results to rank")]
    NoResults,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("scenario file: {0}")]
    Parse(String),
}

impl SandboxError {
    /// Resequencing that closes a loop.
    pub fn is_cycle(&self) -> bool {
        matches!(self, SandboxError::Network(NetworkError::CycleDetected(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Perturbation {
    /// Shifts the activity's duration belief.
    DurationOffset { activity: String, days: f64 },
    /// Work waits this many days after it is otherwise ready to start.
    DeliveryOffset { activity: String, days: f64 },
    /// No work on these dates.
    CalendarHold {
        from: NaiveDate,
        to: NaiveDate,
        #[serde(default)]
        reason: String,
    },
    /// Crew size change; activities using the resource stretch or shrink
    /// in proportion.
    ResourceDelta { resource: String, units: f64 },
    /// Scales duration and direct cost of the listed activities.
    ScopeMultiplier { activities: Vec<String>, factor: f64 },
    /// Replaces precedence links.
    Resequence {
        #[serde(default)]
        remove: Vec<Edge>,
        #[serde(default)]
        add: Vec<Edge>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub notes: String,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
}

impl Scenario {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            notes: String::new(),
            perturbations: Vec::new(),
        }
    }

    pub fn with(mut self, p: Perturbation) -> Self {
        self.perturbations.push(p);
        self
    }
}

/// Scenario file: a named list of scenarios plus the schedule-driven cost
/// rates used to price finish deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default)]
    pub cost_model: CostModel,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, SandboxError> {
        serde_json::from_str(text).map_err(|e| SandboxError::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRate {
    pub item: String,
    /// Currency per working day of extension.
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(default)]
    pub daily_rates: Vec<DailyRate>,
    /// Direct cost per activity, scaled by scope multipliers.
    #[serde(default)]
    pub direct_costs: BTreeMap<String, f64>,
}

impl CostModel {
    pub fn daily_total(&self) -> f64 {
        self.daily_rates.iter().map(|r| r.rate).sum()
    }
}

/// Network and beliefs with a scenario applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedModel<T> {
    pub network: ActivityNetwork,
    pub beliefs: BeliefSet<T>,
    /// Start lag per activity.
    pub lags: BTreeMap<String, T>,
    /// Change in direct cost from scope changes.
    pub direct_cost_delta: f64,
}

fn scale_belief<T: Scalar>(b: &mut DurationBelief<T>, factor: f64) {
    let f = T::lit(factor);
    b.mean = b.mean * f;
    b.sd = b.sd * f;
}

/// Applies every perturbation to copies of the network and beliefs.
pub fn apply_perturbations<T: Scalar>(
    network: &ActivityNetwork,
    beliefs: &BeliefSet<T>,
    scenario: &Scenario,
    costs: &CostModel,
) -> Result<PerturbedModel<T>, SandboxError> {
    let mut net = network.clone();
    let mut beliefs = beliefs.clone();
    let mut lags: BTreeMap<String, T> = BTreeMap::new();
    let mut direct_cost_delta = 0.0;
    let invalid = |reason: String| SandboxError::InvalidPerturbation {
        scenario: scenario.name.clone(),
        reason,
    };
    let belief_of = |beliefs: &mut BeliefSet<T>, id: &str| -> Result<(), SandboxError> {
        if network.index_of(id).is_none() {
            return Err(SandboxError::UnknownActivity(id.to_string()));
        }
        if !beliefs.contains_key(id) {
            return Err(SandboxError::MissingBelief(id.to_string()));
        }
        Ok(())
    };
    for p in &scenario.perturbations {
        match p {
            Perturbation::DurationOffset { activity, days } => {
                if !days.is_finite() {
                    return Err(invalid(format!("offset on {activity} is not finite")));
                }
                belief_of(&mut beliefs, activity)?;
                let b = beliefs.get_mut(activity).expect("checked");
                b.mean = (b.mean + T::lit(*days)).max(T::zero());
            }
            Perturbation::DeliveryOffset { activity, days } => {
                if !days.is_finite() {
                    return Err(invalid(format!("delivery offset on {activity} is not finite")));
                }
                belief_of(&mut beliefs, activity)?;
                let lag = lags.entry(activity.clone()).or_insert(T::zero());
                *lag = (*lag + T::lit(*days)).max(T::zero());
            }
            Perturbation::CalendarHold { from, to, reason } => {
                let cal = net.calendar().clone().with_hold(CalendarHold::new(*from, *to, reason.clone()));
                net = net.with_calendar(cal)?;
            }
            Perturbation::ResourceDelta { resource, units } => {
                if !units.is_finite() {
                    return Err(invalid(format!("resource delta on {resource} is not finite")));
                }
                let users: Vec<(String, f64)> = network
                    .activities()
                    .iter()
                    .filter(|a| a.demand_for(resource) > 0.0)
                    .map(|a| (a.id.clone(), a.demand_for(resource)))
                    .collect();
                if users.is_empty() {
                    return Err(SandboxError::UnknownResource(resource.clone()));
                }
                for (id, demand) in users {
                    if demand + units <= 0.0 {
                        return Err(invalid(format!("{id} would have no {resource} left")));
                    }
                    belief_of(&mut beliefs, &id)?;
                    scale_belief(beliefs.get_mut(&id).expect("checked"), demand / (demand + units));
                }
            }
            Perturbation::ScopeMultiplier { activities, factor } => {
                if !(*factor > 0.0) || !factor.is_finite() {
                    return Err(invalid(format!("scope factor {factor} must be positive")));
                }
                for id in activities {
                    belief_of(&mut beliefs, id)?;
                    scale_belief(beliefs.get_mut(id).expect("checked"), *factor);
                    direct_cost_delta += costs.direct_costs.get(id).copied().unwrap_or(0.0) * (factor - 1.0);
                }
            }
            Perturbation::Resequence { remove, add } => {
                for e in remove.iter().chain(add) {
                    for id in [&e.from, &e.to] {
                        if network.index_of(id).is_none() {
                            return Err(SandboxError::UnknownActivity(id.clone()));
                        }
                    }
                }
                let mut edges: Vec<Edge> = net.edges().iter().filter(|e| !remove.contains(e)).cloned().collect();
                for e in add {
                    if !edges.contains(e) {
                        edges.push(e.clone());
                    }
                }
                net = net.with_edges(edges)?;
            }
        }
    }
    Ok(PerturbedModel {
        network: net,
        beliefs,
        lags,
        direct_cost_delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub d_finish_p50: f64,
    pub d_finish_p80: f64,
    /// Thousands of currency units.
    pub d_cost_p50: f64,
    pub d_cost_p80: f64,
    #[serde(default)]
    pub notes: String,
}

/// Paired finish quantiles of baseline and perturbed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedFinish<T> {
    pub baseline_p50: T,
    pub baseline_p80: T,
    pub scenario_p50: T,
    pub scenario_p80: T,
}

fn ordered<'a, T: Scalar>(
    network: &ActivityNetwork,
    beliefs: &'a BeliefSet<T>,
) -> Result<Vec<&'a DurationBelief<T>>, SandboxError> {
    network
        .activities()
        .iter()
        .map(|a| beliefs.get(&a.id).ok_or_else(|| SandboxError::MissingBelief(a.id.clone())))
        .collect()
}

/// Runs baseline and scenario on the same uniforms per replication, so an
/// empty scenario gives identical samples.
pub fn paired_finish<T: Scalar>(
    network: &ActivityNetwork,
    beliefs: &BeliefSet<T>,
    model: &PerturbedModel<T>,
    config: &ForecastConfig,
) -> Result<PairedFinish<T>, SandboxError> {
    if config.samples == 0 {
        return Err(SandboxError::NoSamples);
    }
    let base = ordered(network, beliefs)?;
    let pert = ordered(&model.network, &model.beliefs)?;
    let lags: Vec<T> = model
        .network
        .activities()
        .iter()
        .map(|a| model.lags.get(&a.id).copied().unwrap_or(T::zero()))
        .collect();
    // every perturbation keeps the activity list and its order
    debug_assert!(network.activities().iter().zip(model.network.activities()).all(|(a, b)| a.id == b.id));
    let held = model.network.calendar() != network.calendar();
    let n = network.len();
    let half_ulp = 0.5 / (1u64 << 53) as f64;
    let chunk = |range: std::ops::Range<usize>| -> Vec<(T, T)> {
        let mut kb = CpmKernel::new(n);
        let mut kp = CpmKernel::new(n);
        let mut db = vec![T::zero(); n];
        let mut dp = vec![T::zero(); n];
        range
            .map(|r| {
                let mut rng = replication_stream(config.seed, r as u64);
                for i in 0..n {
                    let u: f64 = rng.random::<f64>() + half_ulp;
                    db[i] = base[i].quantile(u);
                    dp[i] = pert[i].quantile(u) + lags[i];
                }
                let b = kb.run(network, &db);
                let mut p = kp.run(&model.network, &dp);
                if held {
                    p = T::lit(model.network.calendar().offset_on(network.calendar(), p.to_f64().unwrap_or(0.0)));
                }
                (b, p)
            })
            .collect()
    };
    let ranges: Vec<_> = (0..config.samples)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(config.samples))
        .collect();
    let run = || -> Vec<Vec<(T, T)>> { ranges.par_iter().map(|r| chunk(r.clone())).collect() };
    let pairs: Vec<(T, T)> = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| run()),
        None => run(),
    }
    .into_iter()
    .flatten()
    .collect();
    let sorted = |mut v: Vec<T>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        v
    };
    let b = sorted(pairs.iter().map(|p| p.0).collect());
    let p = sorted(pairs.iter().map(|p| p.1).collect());
    Ok(PairedFinish {
        baseline_p50: nearest_rank(&b, 0.5),
        baseline_p80: nearest_rank(&b, 0.8),
        scenario_p50: nearest_rank(&p, 0.5),
        scenario_p80: nearest_rank(&p, 0.8),
    })
}

/// Finish and cost deltas of a scenario against the unperturbed model.
pub fn evaluate<T: Scalar>(
    network: &ActivityNetwork,
    beliefs: &BeliefSet<T>,
    scenario: &Scenario,
    costs: &CostModel,
    config: &ForecastConfig,
) -> Result<ScenarioResult, SandboxError> {
    let model = apply_perturbations(network, beliefs, scenario, costs)?;
    let f = paired_finish(network, beliefs, &model, config)?;
    let d50 = (f.scenario_p50 - f.baseline_p50).to_f64().unwrap_or(f64::NAN);
    let d80 = (f.scenario_p80 - f.baseline_p80).to_f64().unwrap_or(f64::NAN);
    let rate = costs.daily_total();
    Ok(ScenarioResult {
        name: scenario.name.clone(),
        d_finish_p50: d50,
        d_finish_p80: d80,
        d_cost_p50: (rate * d50 + model.direct_cost_delta) / 1000.0,
        d_cost_p80: (rate * d80 + model.direct_cost_delta) / 1000.0,
        notes: scenario.notes.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TornadoRow {
    pub rank: usize,
    pub name: String,
    pub d_finish_p50: f64,
    pub d_finish_p80: f64,
    pub d_cost_p50: f64,
    pub d_cost_p80: f64,
}

/// Results by descending |ΔFinish p50|, ties by name.
pub fn tornado(results: &[ScenarioResult]) -> Result<Vec<TornadoRow>, SandboxError> {
    if results.is_empty() {
        return Err(SandboxError::NoResults);
    }
    let mut sorted: Vec<&ScenarioResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        b.d_finish_p50
            .abs()
            .total_cmp(&a.d_finish_p50.abs())
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, r)| TornadoRow {
            rank: i + 1,
            name: r.name.clone(),
            d_finish_p50: r.d_finish_p50,
            d_finish_p80: r.d_finish_p80,
            d_cost_p50: r.d_cost_p50,
            d_cost_p80: r.d_cost_p80,
        })
        .collect())
}

/// Tab-separated export with a header row.
pub fn tornado_table(rows: &[TornadoRow]) -> String {
    let mut out = String::from("rank\tname\td_finish_p50\td_finish_p80\td_cost_p50\td_cost_p80\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{:+.2}\t{:+.2}\t{:+.2}\t{:+.2}",
            r.rank, r.name, r.d_finish_p50, r.d_finish_p80, r.d_cost_p50, r.d_cost_p80
        );
    }
    out
}
