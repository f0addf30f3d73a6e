//! Typed knowledge graph linking cost items, activities, work packages,
//! measurements and scenarios, with index-adjusted cost rollups.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {0} already registered with a different payload")]
    ConflictingNode(String),
    #[error("node {node} is not a {expected}")]
    WrongKind { node: String, expected: &'static str },
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("invalid index table: {0}")]
    InvalidIndex(String),
    #[error("invalid cost item {id}: {reason}")]
    InvalidCostItem { id: String, reason: String },
    #[error("graph file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    Material,
    Labor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostSource {
    #[default]
    Ledger,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostItem {
    pub id: String,
    pub csi_division: String,
    #[serde(default)]
    pub description: String,
    pub unit_cost: f64,
    pub quantity: f64,
    pub kind: CostKind,
    #[serde(default)]
    pub source: CostSource,
}

impl CostItem {
    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |reason: &str| GraphError::InvalidCostItem { id: self.id.clone(), reason: reason.into() };
        if !(self.unit_cost >= 0.0) {
            return Err(bad("unit_cost must be non-negative"));
        }
        if !(self.quantity >= 0.0) {
            return Err(bad("quantity must be non-negative"));
        }
        Ok(())
    }

    /// Index-adjusted extended cost.
    pub fn adjusted_cost(&self, index: &IndexTable) -> f64 {
        let m = match self.kind {
            CostKind::Material => index.cci_multiplier,
            CostKind::Labor => index.wage_multiplier,
        };
        self.unit_cost * self.quantity * m
    }
}

/// Location/vintage cost indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexTable {
    pub cci_multiplier: f64,
    pub wage_multiplier: f64,
    pub vintage: u16,
}

impl IndexTable {
    pub const IDENTITY: IndexTable = IndexTable {
        cci_multiplier: 1.0,
        wage_multiplier: 1.0,
        vintage: 0,
    };

    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.cci_multiplier > 0.0) || !(self.wage_multiplier > 0.0) {
            return Err(GraphError::InvalidIndex("multipliers must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "node")]
pub enum Node {
    Activity { id: String, name: String },
    CostItem(CostItem),
    WorkPackage { id: String, name: String },
    Measurement { id: String, planned: f64, measured: f64 },
    Scenario { id: String, name: String },
}

impl Node {
    pub fn id(&self) -> &str {
        match self {
            Node::Activity { id, .. }
            | Node::WorkPackage { id, .. }
            | Node::Measurement { id, .. }
            | Node::Scenario { id, .. } => id,
            Node::CostItem(item) => &item.id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    MapsTo,
    MeasuredBy,
    Feeds,
    Affects,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from_node: String,
    pub to_node: String,
    pub relation: Relation,
}

impl GraphEdge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, relation: Relation) -> Self {
        Self {
            from_node: from.into(),
            to_node: to.into(),
            relation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<Node>,
    edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct KnowledgeGraph {
    nodes: BTreeMap<String, Node>,
    edges: BTreeSet<GraphEdge>,
}

impl TryFrom<GraphFile> for KnowledgeGraph {
    type Error = GraphError;

    fn try_from(file: GraphFile) -> Result<Self, GraphError> {
        let mut g = KnowledgeGraph::default();
        for n in file.nodes {
            g.register(n)?;
        }
        for e in file.edges {
            g.link(e)?;
        }
        Ok(g)
    }
}

impl From<KnowledgeGraph> for GraphFile {
    fn from(g: KnowledgeGraph) -> Self {
        GraphFile {
            nodes: g.nodes.into_values().collect(),
            edges: g.edges.into_iter().collect(),
        }
    }
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node. Re-registering an identical node is a no-op.
    pub fn register(&mut self, node: Node) -> Result<(), GraphError> {
        if let Node::CostItem(item) = &node {
            item.validate()?;
        }
        match self.nodes.get(node.id()) {
            Some(existing) if existing == &node => Ok(()),
            Some(_) => Err(GraphError::ConflictingNode(node.id().to_string())),
            None => {
                self.nodes.insert(node.id().to_string(), node);
                Ok(())
            }
        }
    }

    /// Adds an edge; duplicates collapse.
    pub fn link(&mut self, edge: GraphEdge) -> Result<(), GraphError> {
        for id in [&edge.from_node, &edge.to_node] {
            if !self.nodes.contains_key(id) {
                return Err(GraphError::UnknownNode(id.clone()));
            }
        }
        self.edges.insert(edge);
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn cost_items(&self) -> impl Iterator<Item = &CostItem> {
        self.nodes.values().filter_map(|n| match n {
            Node::CostItem(c) => Some(c),
            _ => None,
        })
    }

    /// Cost items mapped to an activity.
    pub fn items_for(&self, activity_id: &str) -> Result<Vec<&CostItem>, GraphError> {
        match self.nodes.get(activity_id) {
            Some(Node::Activity { .. }) => {}
            Some(_) => {
                return Err(GraphError::WrongKind {
                    node: activity_id.into(),
                    expected: "activity",
                })
            }
            None => return Err(GraphError::UnknownNode(activity_id.into())),
        }
        Ok(self
            .edges
            .iter()
            .filter(|e| e.relation == Relation::MapsTo && e.to_node == activity_id)
            .filter_map(|e| match self.nodes.get(&e.from_node) {
                Some(Node::CostItem(c)) => Some(c),
                _ => None,
            })
            .collect())
    }

    fn successors<'a>(&'a self, id: &'a str, relation: Relation) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.relation == relation && e.from_node == id)
            .map(|e| e.to_node.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }
}

/// Sum of the index-adjusted costs of the items mapped to an activity.
pub fn rollup_cost(graph: &KnowledgeGraph, activity_id: &str, index: &IndexTable) -> Result<f64, GraphError> {
    index.validate()?;
    Ok(graph.items_for(activity_id)?.iter().map(|c| c.adjusted_cost(index)).sum())
}

/// All directed paths along `relation` starting at `node_id`, up to `depth`
/// edges, in lexicographic order of node ids.
pub fn trace(
    graph: &KnowledgeGraph,
    node_id: &str,
    relation: Relation,
    depth: usize,
) -> Result<Vec<Vec<String>>, GraphError> {
    if depth == 0 {
        return Err(GraphError::ZeroDepth);
    }
    if graph.node(node_id).is_none() {
        return Err(GraphError::UnknownNode(node_id.into()));
    }
    let mut out = Vec::new();
    let mut path = vec![node_id.to_string()];
    walk(graph, relation, depth, &mut path, &mut out);
    Ok(out)
}

fn walk(graph: &KnowledgeGraph, relation: Relation, depth: usize, path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    if path.len() > depth {
        return;
    }
    let last = path.last().expect("path is never empty").clone();
    let mut next: Vec<&str> = graph.successors(&last, relation).collect();
    next.sort_unstable();
    for n in next {
        if path.iter().any(|p| p == n) {
            continue;
        }
        path.push(n.to_string());
        out.push(path.clone());
        walk(graph, relation, depth, path, out);
        path.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn activity(id: &str) -> Node {
        Node::Activity { id: id.into(), name: id.into() }
    }

    fn item(id: &str, unit_cost: f64, quantity: f64, kind: CostKind) -> Node {
        Node::CostItem(CostItem {
            id: id.into(),
            csi_division: "03".into(),
            description: String::new(),
            unit_cost,
            quantity,
            kind,
            source: CostSource::Ledger,
        })
    }

    #[test]
    fn link_is_idempotent_and_checked() {
        let mut g = KnowledgeGraph::new();
        g.register(activity("A010")).unwrap();
        g.register(item("C1", 100.0, 10.0, CostKind::Material)).unwrap();
        g.link(GraphEdge::new("C1", "A010", Relation::MapsTo)).unwrap();
        assert_eq!(g.edge_count(), 1);
        g.link(GraphEdge::new("C1", "A010", Relation::MapsTo)).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(
            g.link(GraphEdge::new("C1", "A999", Relation::MapsTo)).unwrap_err(),
            GraphError::UnknownNode("A999".into())
        );
    }

    #[test]
    fn rollup_examples() {
        let mut g = KnowledgeGraph::new();
        g.register(activity("A")).unwrap();
        let idx = IndexTable { cci_multiplier: 1.05, wage_multiplier: 1.1, vintage: 2025 };
        assert_eq!(rollup_cost(&g, "A", &idx).unwrap(), 0.0);
        g.register(item("C1", 100.0, 10.0, CostKind::Material)).unwrap();
        g.link(GraphEdge::new("C1", "A", Relation::MapsTo)).unwrap();
        assert_abs_diff_eq!(rollup_cost(&g, "A", &idx).unwrap(), 1050.0, epsilon = 1e-9);
        g.register(item("L1", 50.0, 4.0, CostKind::Labor)).unwrap();
        g.link(GraphEdge::new("L1", "A", Relation::MapsTo)).unwrap();
        assert_abs_diff_eq!(rollup_cost(&g, "A", &IndexTable::IDENTITY).unwrap(), 1200.0, epsilon = 1e-9);
        assert!(rollup_cost(&g, "nope", &idx).is_err());
    }

    #[test]
    fn trace_examples() {
        let mut g = KnowledgeGraph::new();
        for id in ["a", "b", "c", "d", "x"] {
            g.register(activity(id)).unwrap();
        }
        assert!(trace(&g, "x", Relation::Feeds, 3).unwrap().is_empty());
        g.link(GraphEdge::new("a", "b", Relation::Feeds)).unwrap();
        g.link(GraphEdge::new("b", "c", Relation::Feeds)).unwrap();
        let p = trace(&g, "a", Relation::Feeds, 2).unwrap();
        assert_eq!(p, vec![vec!["a", "b"], vec!["a", "b", "c"]]);

        let mut g = KnowledgeGraph::new();
        for id in ["a", "b", "c", "d"] {
            g.register(activity(id)).unwrap();
        }
        for (f, t) in [("a", "c"), ("a", "b"), ("b", "d"), ("c", "d")] {
            g.link(GraphEdge::new(f, t, Relation::Feeds)).unwrap();
        }
        let p = trace(&g, "a", Relation::Feeds, 2).unwrap();
        assert_eq!(
            p,
            vec![vec!["a", "b"], vec!["a", "b", "d"], vec!["a", "c"], vec!["a", "c", "d"]]
        );
        assert_eq!(trace(&g, "a", Relation::Feeds, 0).unwrap_err(), GraphError::ZeroDepth);
        assert!(trace(&g, "q", Relation::Feeds, 1).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let mut g = KnowledgeGraph::new();
        g.register(activity("A")).unwrap();
        g.register(item("C1", 100.0, 10.0, CostKind::Material)).unwrap();
        g.register(Node::Measurement { id: "M1".into(), planned: 10.0, measured: 9.5 }).unwrap();
        g.link(GraphEdge::new("C1", "A", Relation::MapsTo)).unwrap();
        g.link(GraphEdge::new("A", "M1", Relation::MeasuredBy)).unwrap();
        let back = KnowledgeGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(), g.to_json());
    }

    proptest! {
        #[test]
        fn rollup_additive_and_scales(items in proptest::collection::vec((0.0f64..1e4, 0.0f64..1e3, any::<bool>()), 0..12),
                                      cci in 0.1f64..3.0, wage in 0.1f64..3.0, k in 0.1f64..5.0) {
            let mut g = KnowledgeGraph::new();
            g.register(activity("A")).unwrap();
            let idx = IndexTable { cci_multiplier: cci, wage_multiplier: wage, vintage: 2025 };
            let mut singles = 0.0;
            for (i, (u, q, labor)) in items.iter().enumerate() {
                let kind = if *labor { CostKind::Labor } else { CostKind::Material };
                let id = format!("C{i}");
                g.register(item(&id, *u, *q, kind)).unwrap();
                g.link(GraphEdge::new(&id, "A", Relation::MapsTo)).unwrap();
                let mut solo = KnowledgeGraph::new();
                solo.register(activity("A")).unwrap();
                solo.register(item(&id, *u, *q, kind)).unwrap();
                solo.link(GraphEdge::new(&id, "A", Relation::MapsTo)).unwrap();
                singles += rollup_cost(&solo, "A", &idx).unwrap();
            }
            let total = rollup_cost(&g, "A", &idx).unwrap();
            prop_assert!((total - singles).abs() <= 1e-9 * total.abs().max(1.0));
            let scaled = IndexTable { cci_multiplier: cci * k, wage_multiplier: wage * k, vintage: 2025 };
            let t2 = rollup_cost(&g, "A", &scaled).unwrap();
            prop_assert!((t2 - k * total).abs() <= 1e-9 * t2.abs().max(1.0));
        }
    }
}
