use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::state::TwinState;
use super::store::{RunOptions, Twin};
use super::TwinError;
use crate::cost::{classify, evaluate_corpus, labor_savings, DivisionMetrics, LaborSavings, UNCLASSIFIED};
use crate::evm::{evm_report, mape, EvmPoint, EvmReport};
use crate::forecast::{monte_carlo_forecast, ForecastConfig, ForecastResult};
use crate::graph::{rollup_cost, CostKind, CostSource};
use crate::resource::{overtime_report, OvertimeReport, WeekPlan};
use crate::sandbox::{evaluate, tornado, CostModel, Scenario, ScenarioResult, TornadoRow};
use crate::stats::{hypothesis_report, HypothesisInputs, HypothesisReport};

/// Pipeline stages that can be switched off for ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    /// Spec-text classification and estimating automation.
    Nlp,
    /// Measured progress and quantities.
    Cv,
    /// Belief updating.
    Bayes,
    /// Look-ahead recommendations.
    Drl,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::Nlp, Component::Cv, Component::Bayes, Component::Drl];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Nlp => "nlp",
            Component::Cv => "cv",
            Component::Bayes => "bayes",
            Component::Drl => "drl",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Component {
    type Err = TwinError;

    fn from_str(s: &str) -> Result<Self, TwinError> {
        Component::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| TwinError::UnknownComponent(s.to_string()))
    }
}

/// EVM over the months reported by the end of `week`.
pub fn evm_as_of(state: &TwinState, week: u32) -> Result<Option<EvmReport<f64>>, TwinError> {
    let per_month = state.config.weeks_per_month.max(1);
    let months = week.div_ceil(per_month) as usize;
    let mut points: Vec<EvmPoint<f64>> = state.evm.iter().take(months).copied().collect();
    if points.is_empty() {
        return Ok(None);
    }
    if state.ablated(Component::Cv) {
        for p in points.iter_mut() {
            p.ev = p.pv;
        }
    }
    Ok(Some(evm_report(&points)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisionCost {
    pub division: String,
    pub estimate: f64,
    pub actual: f64,
    pub abs_pct_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub divisions: Vec<DivisionCost>,
    pub mape_pct: f64,
    pub unclassified_estimate: f64,
}

/// Estimate lines classified by their text against ledger actuals, per
/// division, both index-adjusted.
pub fn cost_mape(state: &TwinState) -> Result<CostComparison, TwinError> {
    let index = &state.indices;
    let mut actual: BTreeMap<String, f64> = BTreeMap::new();
    for item in state.graph.cost_items().filter(|c| c.source == CostSource::Ledger) {
        *actual.entry(item.csi_division.clone()).or_default() += item.adjusted_cost(index);
    }
    if actual.is_empty() {
        return Err(TwinError::MissingInput("ledger"));
    }
    let mut estimate: BTreeMap<String, f64> = BTreeMap::new();
    for e in &state.estimates {
        let division = match (&state.ruleset, state.ablated(Component::Nlp)) {
            (Some(rules), false) => classify(&e.description, rules),
            _ => UNCLASSIFIED.to_string(),
        };
        let m = match e.kind {
            CostKind::Material => index.cci_multiplier,
            CostKind::Labor => index.wage_multiplier,
        };
        *estimate.entry(division).or_default() += e.unit_cost * e.quantity * m;
    }
    let divisions: Vec<DivisionCost> = actual
        .iter()
        .filter(|(_, a)| **a > 0.0)
        .map(|(d, a)| {
            let est = estimate.get(d).copied().unwrap_or(0.0);
            DivisionCost {
                division: d.clone(),
                estimate: est,
                actual: *a,
                abs_pct_error: (est - a).abs() / a * 100.0,
            }
        })
        .collect();
    let est: Vec<f64> = divisions.iter().map(|d| d.estimate).collect();
    let act: Vec<f64> = divisions.iter().map(|d| d.actual).collect();
    Ok(CostComparison {
        mape_pct: mape(&est, &act)?,
        unclassified_estimate: estimate.get(UNCLASSIFIED).copied().unwrap_or(0.0),
        divisions,
    })
}

impl TwinState {
    pub fn labor(&self) -> Result<LaborSavings, TwinError> {
        if self.ablated(Component::Nlp) {
            let manual: Vec<_> = self
                .labor
                .iter()
                .map(|p| crate::cost::PhaseHours::new(p.phase.clone(), p.manual_hours, p.manual_hours))
                .collect();
            return Ok(labor_savings(&manual)?);
        }
        Ok(labor_savings(&self.labor)?)
    }

    pub fn classification(&self) -> Result<DivisionMetrics, TwinError> {
        let rules = self.ruleset.as_ref().ok_or(TwinError::MissingInput("ruleset"))?;
        Ok(evaluate_corpus(&self.corpus, rules)?)
    }

    pub fn overtime(&self) -> Result<OvertimeReport, TwinError> {
        let plans: Vec<WeekPlan> = self
            .lookaheads
            .iter()
            .map(|(week, inst)| WeekPlan {
                instance: inst.clone(),
                recommendations: self.recommendations.iter().filter(|r| r.week == *week).cloned().collect(),
            })
            .collect();
        Ok(overtime_report(&plans, self.config.priority_rule)?)
    }

    /// Scenario cost model with direct costs filled from the cost graph
    /// where the scenario file does not give them.
    pub fn scenario_costs(&self) -> CostModel {
        let mut model = self.scenarios.cost_model.clone();
        if let Some(network) = &self.network {
            for a in network.activities() {
                if !model.direct_costs.contains_key(&a.id) {
                    if let Ok(c) = rollup_cost(&self.graph, &a.id, &self.indices) {
                        if c > 0.0 {
                            model.direct_costs.insert(a.id.clone(), c);
                        }
                    }
                }
            }
        }
        model
    }

    fn forecast_config(&self, opts: RunOptions) -> ForecastConfig {
        let cfg = ForecastConfig::new(
            opts.samples.unwrap_or(self.config.samples),
            opts.seed.unwrap_or(self.config.seed),
        );
        match opts.threads {
            Some(t) => cfg.with_threads(t),
            None => cfg,
        }
    }

    /// Forecast from the current beliefs, without recording anything.
    pub fn forecast_now(&self, opts: RunOptions) -> Result<ForecastResult<f64>, TwinError> {
        if self.priors.is_empty() {
            return Err(TwinError::MissingInput("priors"));
        }
        Ok(monte_carlo_forecast(self.network()?, &self.beliefs, &self.forecast_config(opts))?)
    }

    /// Evaluates a scenario against the current beliefs without changing
    /// the twin.
    pub fn evaluate_scenario(&self, scenario: &Scenario, opts: RunOptions) -> Result<ScenarioResult, TwinError> {
        let network = self.network()?;
        let cfg = self.forecast_config(opts);
        Ok(evaluate(network, &self.beliefs, scenario, &self.scenario_costs(), &cfg)?)
    }

    pub fn scenario_results(&self, opts: RunOptions) -> Result<Vec<ScenarioResult>, TwinError> {
        self.scenarios
            .scenarios
            .iter()
            .map(|s| self.evaluate_scenario(s, opts))
            .collect()
    }

    pub fn tornado(&self, opts: RunOptions) -> Result<Vec<TornadoRow>, TwinError> {
        Ok(tornado(&self.scenario_results(opts)?)?)
    }

    pub fn p50_series(&self) -> Vec<f64> {
        self.weeks.values().map(|w| w.forecast.p50_finish).collect()
    }

    pub fn hypothesis_inputs(&self) -> Result<HypothesisInputs, TwinError> {
        let weeks = self.config.weeks;
        if self.last_week() < weeks {
            return Err(TwinError::IncompleteReplay(weeks));
        }
        let actual = self.config.actual_finish.ok_or(TwinError::NoActualFinish)?;
        let err = |w: &super::WeeklyCycleResult| (w.forecast.p50_finish - actual).abs();
        let late: Vec<f64> = self.weeks.values().filter(|w| w.week > weeks - weeks / 4).map(err).collect();
        let overtime = self.overtime()?;
        let first_change = |key: &dyn Fn(&super::WeeklyCycleResult) -> Vec<String>| {
            let rows: Vec<_> = self.weeks.values().collect();
            rows.windows(2).find(|p| key(p[0]) != key(p[1])).map(|p| p[1].week)
        };
        Ok(HypothesisInputs {
            labor_reduction_pct: self.labor()?.average_pct,
            cost_mape_pct: cost_mape(self)?.mape_pct,
            week1_error: self.weeks.get(&1).map(err).unwrap_or(f64::NAN),
            late_error: late.iter().sum::<f64>() / late.len().max(1) as f64,
            overtime_reduction_pct: overtime.reduction_pct,
            makespan_extended: !overtime.makespan_unchanged,
            ranking_change_week: first_change(&|w| w.top_critical(2)),
            deterministic_change_week: first_change(&|w| w.deterministic_critical.clone()),
            weeks,
        })
    }

    pub fn hypotheses(&self) -> Result<HypothesisReport, TwinError> {
        Ok(hypothesis_report(&self.hypothesis_inputs()?))
    }

    pub fn summary(&self) -> ProjectSummary {
        let latest = self.weeks.values().next_back();
        ProjectSummary {
            project_id: self.config.project_id.clone(),
            version: self.version,
            weeks_run: self.last_week(),
            weeks_planned: self.config.weeks,
            activities: self.network.as_ref().map_or(0, |n| n.len()),
            evidence_rows: self.evidence.len(),
            p50_finish: latest.map(|w| w.forecast.p50_finish),
            p80_finish: latest.map(|w| w.forecast.p80_finish),
            project_buffer_used_pct: self.buffer.as_ref().map(|b| b.percent_used()),
            recommendations: self.recommendations.len(),
            decisions: self.decision_log.len(),
            ablation: self.config.ablation.iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub project_id: String,
    pub version: u64,
    pub weeks_run: u32,
    pub weeks_planned: u32,
    pub activities: usize,
    pub evidence_rows: usize,
    pub p50_finish: Option<f64>,
    pub p80_finish: Option<f64>,
    pub project_buffer_used_pct: Option<f64>,
    pub recommendations: usize,
    pub decisions: usize,
    pub ablation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub removed: Vec<String>,
    pub p50_series: Vec<f64>,
    /// Forecast error against the actual finish, if one is configured.
    pub schedule_mape_pct: Option<f64>,
    pub cost_mape_pct: Option<f64>,
    pub labor_reduction_pct: Option<f64>,
    pub final_spi: Option<f64>,
    pub final_cpi: Option<f64>,
    pub overtime_hours: f64,
    pub baseline_overtime_hours: f64,
}

/// Replays the twin's history with the given components switched off.
pub fn run_ablation(twin: &Twin, removed: &BTreeSet<Component>) -> Result<AblationRow, TwinError> {
    let state = if removed.is_empty() {
        Twin::replay(twin.initial().clone(), twin.events())?.state().clone()
    } else {
        let mut initial = twin.initial().clone();
        initial.config.ablation = removed.clone();
        Twin::replay_lenient(initial, twin.events())?.state().clone()
    };
    let p50_series = state.p50_series();
    let schedule_mape_pct = match state.config.actual_finish {
        Some(a) if !p50_series.is_empty() => Some(mape(&p50_series, &vec![a; p50_series.len()])?),
        _ => None,
    };
    let evm = evm_as_of(&state, state.last_week())?;
    let last = evm.as_ref().and_then(|r| r.metrics.last());
    let overtime = state.overtime()?;
    Ok(AblationRow {
        removed: removed.iter().map(|c| c.to_string()).collect(),
        p50_series,
        schedule_mape_pct,
        cost_mape_pct: cost_mape(&state).ok().map(|c| c.mape_pct),
        labor_reduction_pct: state.labor().ok().map(|l| l.average_pct),
        final_spi: last.map(|m| m.spi),
        final_cpi: last.map(|m| m.cpi),
        overtime_hours: overtime.optimized_total,
        baseline_overtime_hours: overtime.baseline_total,
    })
}
