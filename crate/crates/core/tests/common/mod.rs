#![allow(dead_code)]

use std::path::PathBuf;

use ptwin_core::twin::{RunOptions, SourceKind, Twin, TwinConfig};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn config() -> TwinConfig {
    serde_json::from_str(&fixture("project.json")).expect("project.json")
}

/// Every fixture input except the evidence log, in dependency order.
pub const INPUTS: &[(SourceKind, &str)] = &[
    (SourceKind::Network, "network.json"),
    (SourceKind::Priors, "priors.csv"),
    (SourceKind::Resources, "resources.json"),
    (SourceKind::Evm, "evm.csv"),
    (SourceKind::Quantities, "quantities.csv"),
    (SourceKind::Indices, "indices.json"),
    (SourceKind::Ledger, "ledger.csv"),
    (SourceKind::PriceBook, "price_book.json"),
    (SourceKind::Corpus, "corpus.csv"),
    (SourceKind::Ruleset, "ruleset.json"),
    (SourceKind::Labor, "labor.csv"),
    (SourceKind::Scenarios, "scenarios.json"),
];

pub fn loaded_twin() -> Twin {
    let mut twin = Twin::new(config());
    for (kind, file) in INPUTS {
        if fixture_dir().join(file).exists() {
            twin.ingest(*kind, &fixture(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
        }
    }
    twin.ingest(SourceKind::Evidence, &fixture("evidence.csv")).expect("evidence");
    twin
}

#[derive(serde::Deserialize)]
pub struct Decision {
    pub action_id: String,
    pub adopted: bool,
    pub reason: String,
    pub timestamp: String,
}

pub fn decisions() -> Vec<Decision> {
    fixture("decisions.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("decision line"))
        .collect()
}

/// Runs every fixture week, deciding each week's recommendations as logged.
pub fn replay(twin: &mut Twin, opts: RunOptions) {
    let log = decisions();
    for week in 1..=twin.state().config.weeks {
        let result = twin.run_week(week, opts).unwrap_or_else(|e| panic!("week {week}: {e}"));
        for id in &result.recommendations {
            if let Some(d) = log.iter().find(|d| &d.action_id == id) {
                twin.decide(&d.action_id, d.adopted, &d.reason, &d.timestamp).expect("decision");
            }
        }
    }
}
