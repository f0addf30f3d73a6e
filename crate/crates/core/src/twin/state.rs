use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::analysis::Component;
use crate::cost::{PhaseHours, Ruleset, SpecLine};
use crate::evm::{EvmMetrics, EvmPoint, QuantityRecord};
use crate::forecast::{BeliefSet, BufferBaseline, BufferEntry, BufferState, ForecastResult, ProgressEvidence};
use crate::graph::{CostKind, IndexTable, KnowledgeGraph};
use crate::network::ActivityNetwork;
use crate::resource::{
    LookaheadInstance, LookaheadSettings, Policy, PriorityRule, QConfig, Recommendation, Resource,
};
use crate::sandbox::ScenarioFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwinConfig {
    pub project_id: String,
    pub weeks: u32,
    pub samples: usize,
    pub seed: u64,
    /// Control weeks per EVM reporting month.
    pub weeks_per_month: u32,
    pub lookahead: LookaheadSettings,
    pub priority_rule: PriorityRule,
    pub recommendations_per_week: usize,
    pub training: QConfig,
    pub buffers: BufferBaseline<f64>,
    /// Last activity of the feeding chain charged against the feeding buffer.
    pub feeding_activity: Option<String>,
    /// Observed completion, in working days, for accuracy metrics.
    pub actual_finish: Option<f64>,
    /// Components replaced by their null behaviour.
    pub ablation: BTreeSet<Component>,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            project_id: "project".into(),
            weeks: 16,
            samples: crate::forecast::DEFAULT_SAMPLES,
            seed: 0,
            weeks_per_month: 4,
            lookahead: LookaheadSettings::default(),
            priority_rule: PriorityRule::MinSlack,
            recommendations_per_week: 1,
            training: QConfig::default(),
            buffers: BufferBaseline {
                project_buffer_size: 20.0,
                feeding_buffer_size: 27.0,
                baseline_finish: 0.0,
                feeding_baseline_finish: 0.0,
            },
            feeding_activity: None,
            actual_finish: None,
            ablation: BTreeSet::new(),
        }
    }
}

/// Priced line from the estimate, before classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateItem {
    pub id: String,
    pub description: String,
    pub unit_cost: f64,
    pub quantity: f64,
    pub kind: CostKind,
    #[serde(default)]
    pub activity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub week: u32,
    pub action_id: String,
    pub summary: String,
    pub status: String,
    #[serde(default)]
    pub reason: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyCycleResult {
    pub week: u32,
    /// State version after the cycle.
    pub version: u64,
    pub evidence_rows: usize,
    pub updated_beliefs: usize,
    /// No evidence arrived for the week; the forecast reuses last week's beliefs.
    pub missing_evidence: bool,
    pub forecast: ForecastResult<f64>,
    /// CPM on belief means.
    pub deterministic_finish: f64,
    pub deterministic_critical: Vec<String>,
    pub evm: Option<EvmMetrics<f64>>,
    pub buffer: Option<BufferEntry<f64>>,
    pub recommendations: Vec<String>,
}

impl WeeklyCycleResult {
    pub fn top_critical(&self, n: usize) -> Vec<String> {
        self.forecast.criticality_ranking().into_iter().take(n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinState {
    pub version: u64,
    pub config: TwinConfig,
    pub network: Option<ActivityNetwork>,
    pub priors: BeliefSet<f64>,
    pub beliefs: BeliefSet<f64>,
    pub evidence: Vec<ProgressEvidence<f64>>,
    pub evm: Vec<EvmPoint<f64>>,
    pub quantities: Vec<QuantityRecord<f64>>,
    pub graph: KnowledgeGraph,
    pub indices: IndexTable,
    pub estimates: Vec<EstimateItem>,
    pub corpus: Vec<SpecLine>,
    pub ruleset: Option<Ruleset>,
    pub labor: Vec<PhaseHours>,
    pub resources: Vec<Resource>,
    pub scenarios: ScenarioFile,
    pub policy: Option<Policy>,
    pub buffer: Option<BufferState<f64>>,
    pub weeks: BTreeMap<u32, WeeklyCycleResult>,
    pub lookaheads: BTreeMap<u32, LookaheadInstance>,
    /// Look-aheads with the adopted actions applied.
    pub adopted_plans: BTreeMap<u32, LookaheadInstance>,
    pub recommendations: Vec<Recommendation>,
    pub decision_log: Vec<DecisionRecord>,
}

impl TwinState {
    pub fn new(config: TwinConfig) -> Self {
        Self {
            version: 0,
            config,
            network: None,
            priors: BeliefSet::new(),
            beliefs: BeliefSet::new(),
            evidence: Vec::new(),
            evm: Vec::new(),
            quantities: Vec::new(),
            graph: KnowledgeGraph::new(),
            indices: IndexTable::IDENTITY,
            estimates: Vec::new(),
            corpus: Vec::new(),
            ruleset: None,
            labor: Vec::new(),
            resources: Vec::new(),
            scenarios: ScenarioFile {
                cost_model: Default::default(),
                scenarios: Vec::new(),
            },
            policy: None,
            buffer: None,
            weeks: BTreeMap::new(),
            lookaheads: BTreeMap::new(),
            adopted_plans: BTreeMap::new(),
            recommendations: Vec::new(),
            decision_log: Vec::new(),
        }
    }

    pub fn network(&self) -> Result<&ActivityNetwork, super::TwinError> {
        self.network.as_ref().ok_or(super::TwinError::MissingInput("network"))
    }

    pub fn last_week(&self) -> u32 {
        self.weeks.keys().next_back().copied().unwrap_or(0)
    }

    pub fn ablated(&self, c: Component) -> bool {
        self.config.ablation.contains(&c)
    }

    /// Latest percent complete per activity up to and including `week`.
    pub fn progress_at(&self, week: u32) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for e in self.evidence.iter().filter(|e| e.week <= week) {
            out.insert(e.activity_id.clone(), e.percent_complete);
        }
        out
    }

    pub fn recommendation(&self, action_id: &str) -> Option<&Recommendation> {
        self.recommendations.iter().find(|r| r.action_id == action_id)
    }
}
