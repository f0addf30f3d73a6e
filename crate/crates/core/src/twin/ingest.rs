use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::state::{EstimateItem, TwinState};
use super::TwinError;
use crate::cost::{PhaseHours, Ruleset, SpecLine};
use crate::evm::{reconcile, s_curves, EvmPoint};
use crate::forecast::{DistributionFamily, DurationBelief, ProgressEvidence};
use crate::graph::{CostItem, CostKind, CostSource, GraphEdge, IndexTable, KnowledgeGraph, Node, Relation};
use crate::network::ActivityNetwork;
use crate::resource::Resource;
use crate::sandbox::{apply_perturbations, ScenarioFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Network,
    Priors,
    Evidence,
    Evm,
    Quantities,
    Ledger,
    PriceBook,
    Indices,
    Corpus,
    Ruleset,
    Labor,
    Resources,
    Scenarios,
    Graph,
}

impl SourceKind {
    pub const ALL: [SourceKind; 14] = [
        SourceKind::Network,
        SourceKind::Priors,
        SourceKind::Evidence,
        SourceKind::Evm,
        SourceKind::Quantities,
        SourceKind::Ledger,
        SourceKind::PriceBook,
        SourceKind::Indices,
        SourceKind::Corpus,
        SourceKind::Ruleset,
        SourceKind::Labor,
        SourceKind::Resources,
        SourceKind::Scenarios,
        SourceKind::Graph,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Network => "network",
            SourceKind::Priors => "priors",
            SourceKind::Evidence => "evidence",
            SourceKind::Evm => "evm",
            SourceKind::Quantities => "quantities",
            SourceKind::Ledger => "ledger",
            SourceKind::PriceBook => "price-book",
            SourceKind::Indices => "indices",
            SourceKind::Corpus => "corpus",
            SourceKind::Ruleset => "ruleset",
            SourceKind::Labor => "labor",
            SourceKind::Resources => "resources",
            SourceKind::Scenarios => "scenarios",
            SourceKind::Graph => "graph",
        }
    }

    /// Whether the payload is CSV rather than JSON.
    pub fn is_tabular(self) -> bool {
        matches!(
            self,
            SourceKind::Priors
                | SourceKind::Evidence
                | SourceKind::Evm
                | SourceKind::Quantities
                | SourceKind::Ledger
                | SourceKind::Corpus
                | SourceKind::Labor
        )
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = TwinError;

    fn from_str(s: &str) -> Result<Self, TwinError> {
        SourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| TwinError::UnknownKind(s.to_string()))
    }
}

fn violation(kind: SourceKind, row: usize, column: &str, reason: impl Into<String>) -> TwinError {
    TwinError::SchemaViolation {
        kind: kind.to_string(),
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

/// Parses every data row (numbered from 1) or reports the first bad one.
fn read_rows<R: DeserializeOwned>(kind: SourceKind, text: &str) -> Result<Vec<(usize, R)>, TwinError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| violation(kind, 0, "", e.to_string()))?
        .clone();
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| violation(kind, row, "", e.to_string()))?;
        let parsed = record.deserialize(Some(&headers)).map_err(|e| {
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.field().and_then(|f| headers.get(f as usize)),
                _ => None,
            }
            .unwrap_or("");
            violation(kind, row, column, e.to_string())
        })?;
        out.push((row, parsed));
    }
    Ok(out)
}

fn read_json<R: DeserializeOwned>(kind: SourceKind, text: &str) -> Result<R, TwinError> {
    serde_json::from_str(text).map_err(|e| violation(kind, e.line(), "", e.to_string()))
}

#[derive(Deserialize)]
struct PriorRow {
    activity_id: String,
    mean: f64,
    sd: f64,
    #[serde(default)]
    family: Option<DistributionFamily>,
}

#[derive(Deserialize)]
struct EvidenceRow {
    week: u32,
    activity_id: String,
    percent_complete: f64,
    elapsed_days: f64,
    #[serde(default)]
    observation_sd: Option<f64>,
}

#[derive(Deserialize)]
struct EvmRow {
    period: u32,
    pv: f64,
    ev: f64,
    ac: f64,
}

#[derive(Deserialize)]
struct QuantityRow {
    work_package: String,
    planned: f64,
    measured: f64,
}

#[derive(Deserialize)]
struct LedgerRow {
    id: String,
    csi: String,
    #[serde(default)]
    description: String,
    unit_cost: f64,
    quantity: f64,
    kind: CostKind,
    #[serde(default)]
    activity: Option<String>,
}

fn check_activity(state: &TwinState, kind: SourceKind, row: usize, column: &str, id: &str) -> Result<(), TwinError> {
    match &state.network {
        Some(n) if n.index_of(id).is_none() => Err(violation(kind, row, column, format!("unknown activity {id}"))),
        _ => Ok(()),
    }
}

/// Validates a payload and merges it into `state`. On error `state` may be
/// partly modified; callers work on a copy.
pub(crate) fn merge(state: &mut TwinState, kind: SourceKind, payload: &str) -> Result<(), TwinError> {
    match kind {
        SourceKind::Network => {
            let network: ActivityNetwork =
                ActivityNetwork::from_json(payload).map_err(|e| violation(kind, 0, "", e.to_string()))?;
            for a in network.activities() {
                state.graph.register(Node::Activity {
                    id: a.id.clone(),
                    name: a.name.clone(),
                })?;
            }
            state.network = Some(network);
        }
        SourceKind::Priors => {
            if state.last_week() > 0 {
                return Err(violation(kind, 0, "", "priors are fixed once weeks have run"));
            }
            let rows: Vec<(usize, PriorRow)> = read_rows(kind, payload)?;
            let mut priors = state.priors.clone();
            for (row, r) in rows {
                check_activity(state, kind, row, "activity_id", &r.activity_id)?;
                if !(r.mean >= 0.0) || !r.mean.is_finite() {
                    return Err(violation(kind, row, "mean", "mean must be a non-negative number"));
                }
                if !(r.sd >= 0.0) || !r.sd.is_finite() {
                    return Err(violation(kind, row, "sd", "sd must be a non-negative number"));
                }
                let b = DurationBelief::prior(r.activity_id.clone(), r.mean, r.sd)
                    .with_family(r.family.unwrap_or_default());
                priors.insert(r.activity_id, b);
            }
            state.beliefs = priors.clone();
            state.priors = priors;
        }
        SourceKind::Evidence => {
            let rows: Vec<(usize, EvidenceRow)> = read_rows(kind, payload)?;
            let mut parsed = Vec::with_capacity(rows.len());
            for (row, r) in rows {
                if r.week < 1 {
                    return Err(violation(kind, row, "week", "weeks start at 1"));
                }
                if r.week <= state.last_week() {
                    return Err(violation(kind, row, "week", format!("week {} has already run", r.week)));
                }
                check_activity(state, kind, row, "activity_id", &r.activity_id)?;
                if !(0.0..=1.0).contains(&r.percent_complete) {
                    return Err(violation(kind, row, "percent_complete", format!("{} is outside [0, 1]", r.percent_complete)));
                }
                if !(r.elapsed_days >= 0.0) || !r.elapsed_days.is_finite() {
                    return Err(violation(kind, row, "elapsed_days", "must be non-negative"));
                }
                if r.observation_sd.is_some_and(|s| !(s > 0.0)) {
                    return Err(violation(kind, row, "observation_sd", "must be positive when given"));
                }
                let mut e = ProgressEvidence::new(r.week, r.activity_id, r.percent_complete, r.elapsed_days);
                e.observation_sd = r.observation_sd;
                parsed.push(e);
            }
            state.evidence.extend(parsed);
            state.evidence.sort_by_key(|e| e.week);
        }
        SourceKind::Evm => {
            let rows: Vec<(usize, EvmRow)> = read_rows(kind, payload)?;
            let mut points: Vec<EvmPoint<f64>> = rows
                .into_iter()
                .map(|(_, r)| EvmPoint {
                    period: r.period,
                    pv: r.pv,
                    ev: r.ev,
                    ac: r.ac,
                })
                .collect();
            points.sort_by_key(|p| p.period);
            if !points.is_empty() {
                s_curves(&points)?;
            }
            state.evm = points;
        }
        SourceKind::Quantities => {
            let rows: Vec<(usize, QuantityRow)> = read_rows(kind, payload)?;
            let mut records = Vec::with_capacity(rows.len());
            for (row, r) in rows {
                let rec = reconcile(r.work_package.clone(), r.planned, r.measured)
                    .map_err(|e| violation(kind, row, "planned", e.to_string()))?;
                if !(r.measured >= 0.0) {
                    return Err(violation(kind, row, "measured", "must be non-negative"));
                }
                let m_id = format!("{}/measured", r.work_package);
                state.graph.register(Node::WorkPackage {
                    id: r.work_package.clone(),
                    name: r.work_package.clone(),
                })?;
                state.graph.register(Node::Measurement {
                    id: m_id.clone(),
                    planned: r.planned,
                    measured: r.measured,
                })?;
                state.graph.link(GraphEdge::new(r.work_package, m_id, Relation::MeasuredBy))?;
                records.push(rec);
            }
            state.quantities = records;
        }
        SourceKind::Ledger => {
            let rows: Vec<(usize, LedgerRow)> = read_rows(kind, payload)?;
            for (row, r) in rows {
                let item = CostItem {
                    id: r.id.clone(),
                    csi_division: r.csi,
                    description: r.description,
                    unit_cost: r.unit_cost,
                    quantity: r.quantity,
                    kind: r.kind,
                    source: CostSource::Ledger,
                };
                item.validate().map_err(|e| {
                    let column = if r.unit_cost >= 0.0 { "quantity" } else { "unit_cost" };
                    violation(kind, row, column, e.to_string())
                })?;
                state
                    .graph
                    .register(Node::CostItem(item))
                    .map_err(|e| violation(kind, row, "id", e.to_string()))?;
                if let Some(a) = r.activity.filter(|a| !a.is_empty()) {
                    if state.network.is_none() {
                        return Err(violation(kind, row, "activity", "load the network before mapping costs"));
                    }
                    check_activity(state, kind, row, "activity", &a)?;
                    state.graph.link(GraphEdge::new(r.id, a, Relation::MapsTo))?;
                }
            }
        }
        SourceKind::PriceBook => {
            let items: Vec<EstimateItem> = read_json(kind, payload)?;
            for (i, item) in items.iter().enumerate() {
                if !(item.unit_cost >= 0.0) || !(item.quantity >= 0.0) {
                    return Err(violation(kind, i + 1, "unit_cost", "costs and quantities must be non-negative"));
                }
            }
            state.estimates = items;
        }
        SourceKind::Indices => {
            let table: IndexTable = read_json(kind, payload)?;
            table.validate()?;
            state.indices = table;
        }
        SourceKind::Corpus => {
            let rows: Vec<(usize, SpecLine)> = read_rows(kind, payload)?;
            if let Some((row, _)) = rows.iter().find(|(_, l)| l.text.trim().is_empty()) {
                return Err(violation(kind, *row, "text", "empty text"));
            }
            state.corpus = rows.into_iter().map(|(_, l)| l).collect();
        }
        SourceKind::Ruleset => {
            state.ruleset = Some(Ruleset::from_json(payload)?);
        }
        SourceKind::Labor => {
            let rows: Vec<(usize, PhaseHours)> = read_rows(kind, payload)?;
            if let Some((row, _)) = rows.iter().find(|(_, p)| !(p.manual_hours > 0.0)) {
                return Err(violation(kind, *row, "manual_hours", "must be positive"));
            }
            state.labor = rows.into_iter().map(|(_, p)| p).collect();
        }
        SourceKind::Resources => {
            let resources: Vec<Resource> = read_json(kind, payload)?;
            for (i, r) in resources.iter().enumerate() {
                if !(r.capacity > 0.0) {
                    return Err(violation(kind, i + 1, "capacity", "must be positive"));
                }
                if !(r.overtime_cap >= 0.0) {
                    return Err(violation(kind, i + 1, "overtime_cap", "must be non-negative"));
                }
            }
            state.resources = resources;
        }
        SourceKind::Scenarios => {
            let file: ScenarioFile = read_json(kind, payload)?;
            if let (Some(network), false) = (&state.network, state.priors.is_empty()) {
                for (i, s) in file.scenarios.iter().enumerate() {
                    apply_perturbations(network, &state.priors, s, &file.cost_model)
                        .map_err(|e| violation(kind, i + 1, "perturbations", e.to_string()))?;
                }
            }
            for s in &file.scenarios {
                state.graph.register(Node::Scenario {
                    id: format!("scenario/{}", s.name),
                    name: s.name.clone(),
                })?;
            }
            state.scenarios = file;
        }
        SourceKind::Graph => {
            let incoming = KnowledgeGraph::from_json(payload)?;
            for n in incoming.nodes() {
                state.graph.register(n.clone())?;
            }
            for e in incoming.edges() {
                state.graph.link(e.clone())?;
            }
        }
    }
    Ok(())
}
