//! Activity network: the precedence DAG, its working-day calendar and the
//! deterministic critical-path passes.

mod calendar;
mod cpm;

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calendar::{Calendar, CalendarHold};
pub use cpm::{cpm_indexed, cpm_pass, ActivityTiming, CpmKernel, CpmResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("precedence cycle: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("edge {from} -> {to} references unknown activity {missing}")]
    DanglingEdge { from: String, to: String, missing: String },
    #[error("duplicate activity id {0}")]
    DuplicateId(String),
    #[error("network has no activities")]
    Empty,
    #[error("activity {id}: {reason}")]
    InvalidActivity { id: String, reason: String },
    #[error("no duration supplied for activity {0}")]
    MissingDuration(String),
    #[error("negative duration {value} for activity {id}")]
    NegativeDuration { id: String, value: f64 },
    #[error("invalid calendar: {0}")]
    InvalidCalendar(String),
    #[error("network file: {0}")]
    Parse(String),
}

/// Units of a resource an activity needs on each of its working days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceDemand {
    pub resource: String,
    pub units: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    pub name: String,
    /// Planned duration in working days.
    pub base_duration: f64,
    #[serde(default)]
    pub resource_demands: Vec<ResourceDemand>,
    #[serde(default)]
    pub cost_item_refs: Vec<String>,
}

impl Activity {
    pub fn new(id: impl Into<String>, name: impl Into<String>, base_duration: f64) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            base_duration,
            resource_demands: Vec::new(),
            cost_item_refs: Vec::new(),
        }
    }

    pub fn with_demand(mut self, resource: impl Into<String>, units: f64) -> Self {
        self.resource_demands.push(ResourceDemand {
            resource: resource.into(),
            units,
        });
        self
    }

    pub fn demand_for(&self, resource: &str) -> f64 {
        self.resource_demands
            .iter()
            .filter(|d| d.resource == resource)
            .map(|d| d.units)
            .sum()
    }
}

/// Finish-to-start precedence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
        }
    }
}

/// On-disk shape of a network document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub activities: Vec<Activity>,
    pub edges: Vec<Edge>,
    pub calendar: Calendar,
}

/// Validated precedence network with cached topological order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct ActivityNetwork {
    activities: Vec<Activity>,
    edges: Vec<Edge>,
    calendar: Calendar,
    index: HashMap<String, usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl PartialEq for ActivityNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.activities == other.activities
            && self.edges == other.edges
            && self.calendar == other.calendar
    }
}

impl TryFrom<NetworkFile> for ActivityNetwork {
    type Error = NetworkError;

    fn try_from(file: NetworkFile) -> Result<Self, Self::Error> {
        build_network(file.activities, file.edges, file.calendar)
    }
}

impl From<ActivityNetwork> for NetworkFile {
    fn from(net: ActivityNetwork) -> Self {
        NetworkFile {
            activities: net.activities,
            edges: net.edges,
            calendar: net.calendar,
        }
    }
}

/// Validates activities and precedence and caches the topological order.
pub fn build_network(
    activities: Vec<Activity>,
    precedence: Vec<Edge>,
    calendar: Calendar,
) -> Result<ActivityNetwork, NetworkError> {
    if activities.is_empty() {
        return Err(NetworkError::Empty);
    }
    calendar.validate()?;

    let mut index = HashMap::with_capacity(activities.len());
    for (i, a) in activities.iter().enumerate() {
        if a.id.trim().is_empty() {
            return Err(NetworkError::InvalidActivity {
                id: a.id.clone(),
                reason: "empty id".into(),
            });
        }
        if !(a.base_duration >= 0.0) || !a.base_duration.is_finite() {
            return Err(NetworkError::NegativeDuration {
                id: a.id.clone(),
                value: a.base_duration,
            });
        }
        if let Some(d) = a.resource_demands.iter().find(|d| !(d.units >= 0.0)) {
            return Err(NetworkError::InvalidActivity {
                id: a.id.clone(),
                reason: format!("negative demand {} for {}", d.units, d.resource),
            });
        }
        if index.insert(a.id.clone(), i).is_some() {
            return Err(NetworkError::DuplicateId(a.id.clone()));
        }
    }

    let n = activities.len();
    let mut preds = vec![Vec::new(); n];
    let mut succs = vec![Vec::new(); n];
    for e in &precedence {
        let from = *index.get(&e.from).ok_or_else(|| NetworkError::DanglingEdge {
            from: e.from.clone(),
            to: e.to.clone(),
            missing: e.from.clone(),
        })?;
        let to = *index.get(&e.to).ok_or_else(|| NetworkError::DanglingEdge {
            from: e.from.clone(),
            to: e.to.clone(),
            missing: e.to.clone(),
        })?;
        if !succs[from].contains(&to) {
            succs[from].push(to);
            preds[to].push(from);
        }
    }

    let topo = topological_order(&preds, &succs)
        .map_err(|cycle| NetworkError::CycleDetected(cycle.iter().map(|&i| activities[i].id.clone()).collect()))?;

    Ok(ActivityNetwork {
        activities,
        edges: precedence,
        calendar,
        index,
        preds,
        succs,
        topo,
    })
}

/// Kahn's algorithm with a lowest-index-first queue so the order is stable.
/// On failure returns one cycle (first node repeated at the end).
fn topological_order(preds: &[Vec<usize>], succs: &[Vec<usize>]) -> Result<Vec<usize>, Vec<usize>> {
    let n = preds.len();
    let mut indegree: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_front() {
        order.push(i);
        for &s in &succs[i] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push_back(s);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // every remaining node has a remaining predecessor; walk back until a repeat
    let start = (0..n).find(|&i| indegree[i] > 0).expect("unprocessed node");
    let mut seen = HashMap::new();
    let mut path = Vec::new();
    let mut cur = start;
    loop {
        if let Some(&pos) = seen.get(&cur) {
            let mut cycle: Vec<usize> = path[pos..].to_vec();
            cycle.reverse();
            cycle.push(cycle[0]);
            return Err(cycle);
        }
        seen.insert(cur, path.len());
        path.push(cur);
        cur = *preds[cur]
            .iter()
            .find(|&&p| indegree[p] > 0)
            .expect("cyclic remainder");
    }
}

impl ActivityNetwork {
    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn activities(&self) -> &[Activity] {
        &self.activities
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn calendar(&self) -> &Calendar {
        &self.calendar
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn activity(&self, id: &str) -> Option<&Activity> {
        self.index_of(id).map(|i| &self.activities[i])
    }

    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.preds[i].is_empty())
    }

    pub fn sinks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.succs[i].is_empty())
    }

    pub fn base_durations(&self) -> BTreeMap<String, f64> {
        self.activities
            .iter()
            .map(|a| (a.id.clone(), a.base_duration))
            .collect()
    }

    /// Rebuilds the network with a different edge list (used by resequencing).
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        build_network(self.activities.clone(), edges, self.calendar.clone())
    }

    pub fn with_calendar(&self, calendar: Calendar) -> Result<Self, NetworkError> {
        build_network(self.activities.clone(), self.edges.clone(), calendar)
    }

    pub fn with_activities(&self, activities: Vec<Activity>) -> Result<Self, NetworkError> {
        build_network(activities, self.edges.clone(), self.calendar.clone())
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }
}

/// Maps a working-day offset to a calendar date on the network's calendar.
pub fn calendar_to_date(network: &ActivityNetwork, working_day_index: u32) -> chrono::NaiveDate {
    network.calendar.date_of(working_day_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> Calendar {
        Calendar::five_day(chrono::NaiveDate::from_ymd_opt(2025, 1, 6).unwrap())
    }

    #[test]
    fn single_activity_is_valid() {
        let net = build_network(vec![Activity::new("A", "only", 3.0)], vec![], cal()).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.sources().count(), 1);
        assert_eq!(net.sinks().count(), 1);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let acts = vec![Activity::new("A", "a", 1.0), Activity::new("B", "b", 1.0)];
        let err = build_network(acts, vec![Edge::new("A", "B"), Edge::new("B", "A")], cal()).unwrap_err();
        match err {
            NetworkError::CycleDetected(c) => {
                assert_eq!(c.len(), 3);
                assert_eq!(c.first(), c.last());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_cycle_members_in_longer_loop() {
        let acts = ["S", "A", "B", "C"].iter().map(|id| Activity::new(*id, *id, 1.0)).collect();
        let edges = vec![Edge::new("S", "A"), Edge::new("A", "B"), Edge::new("B", "C"), Edge::new("C", "A")];
        let NetworkError::CycleDetected(c) = build_network(acts, edges, cal()).unwrap_err() else {
            panic!("expected cycle")
        };
        let mut members: Vec<_> = c[..c.len() - 1].to_vec();
        members.sort();
        assert_eq!(members, vec!["A", "B", "C"]);
    }

    #[test]
    fn dangling_and_duplicate() {
        let err = build_network(vec![Activity::new("A", "a", 1.0)], vec![Edge::new("A", "Z")], cal()).unwrap_err();
        assert!(matches!(err, NetworkError::DanglingEdge { missing, .. } if missing == "Z"));
        let err = build_network(
            vec![Activity::new("A", "a", 1.0), Activity::new("A", "b", 2.0)],
            vec![],
            cal(),
        )
        .unwrap_err();
        assert_eq!(err, NetworkError::DuplicateId("A".into()));
    }

    #[test]
    fn negative_values_rejected() {
        let err = build_network(vec![Activity::new("A", "a", -1.0)], vec![], cal()).unwrap_err();
        assert!(matches!(err, NetworkError::NegativeDuration { .. }));
        let err = build_network(vec![Activity::new("A", "a", 1.0).with_demand("crew", -2.0)], vec![], cal())
            .unwrap_err();
        assert!(matches!(err, NetworkError::InvalidActivity { .. }));
        assert_eq!(build_network(vec![], vec![], cal()).unwrap_err(), NetworkError::Empty);
    }

    #[test]
    fn json_round_trip_is_stable() {
        let acts = vec![
            Activity::new("A", "first", 2.0).with_demand("crew", 3.0),
            Activity::new("B", "second", 4.5),
        ];
        let net = build_network(acts, vec![Edge::new("A", "B")], cal()).unwrap();
        let text = net.to_json();
        let back = ActivityNetwork::from_json(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json(), text);
    }
}
