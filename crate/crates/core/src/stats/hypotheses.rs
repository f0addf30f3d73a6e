use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Met,
    PartiallyMet,
    NotMet,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Met => "met",
            Verdict::PartiallyMet => "partially met",
            Verdict::NotMet => "not met",
        })
    }
}

/// Measured quantities from a completed replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisInputs {
    pub labor_reduction_pct: f64,
    pub cost_mape_pct: f64,
    /// |p50 - actual| at the first week.
    pub week1_error: f64,
    /// Mean |p50 - actual| over the last quarter of the weeks.
    pub late_error: f64,
    pub overtime_reduction_pct: f64,
    pub makespan_extended: bool,
    /// First week the top-2 criticality ranking changed.
    pub ranking_change_week: Option<u32>,
    /// First week the deterministic critical set changed.
    pub deterministic_change_week: Option<u32>,
    pub weeks: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub id: String,
    pub threshold: String,
    pub observed: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub hypotheses: Vec<HypothesisResult>,
}

impl HypothesisReport {
    pub fn get(&self, id: &str) -> Option<&HypothesisResult> {
        self.hypotheses.iter().find(|h| h.id == id)
    }
}

pub fn hypothesis_report(inputs: &HypothesisInputs) -> HypothesisReport {
    let h1 = if inputs.labor_reduction_pct >= 40.0 && inputs.cost_mape_pct <= 10.0 {
        Verdict::Met
    } else {
        Verdict::NotMet
    };

    let ratio = if inputs.week1_error > 0.0 {
        inputs.late_error / inputs.week1_error
    } else {
        f64::INFINITY
    };
    let h2 = if ratio <= 0.7 { Verdict::Met } else { Verdict::NotMet };

    let ot = inputs.overtime_reduction_pct;
    let h3 = if ot >= 10.0 && !inputs.makespan_extended {
        Verdict::Met
    } else if (3.0..10.0).contains(&ot) && !inputs.makespan_extended {
        Verdict::PartiallyMet
    } else {
        Verdict::NotMet
    };

    // lead of the probabilistic flag over the deterministic change; a
    // deterministic path that never moves counts as the end of the replay
    let lead = inputs.ranking_change_week.map(|flag| {
        let det = inputs.deterministic_change_week.unwrap_or(inputs.weeks + 1);
        i64::from(det) - i64::from(flag)
    });
    let h4 = if lead.is_some_and(|l| l >= 2) { Verdict::Met } else { Verdict::NotMet };

    HypothesisReport {
        hypotheses: vec![
            HypothesisResult {
                id: "H1".into(),
                threshold: "labor reduction >= 40% and cost MAPE <= 10%".into(),
                observed: inputs.labor_reduction_pct,
                verdict: h1,
            },
            HypothesisResult {
                id: "H2".into(),
                threshold: "late-phase error <= 70% of week-1 error".into(),
                observed: ratio,
                verdict: h2,
            },
            HypothesisResult {
                id: "H3".into(),
                threshold: "overtime reduction >= 10% (partial: 3-10%) without extension".into(),
                observed: ot,
                verdict: h3,
            },
            HypothesisResult {
                id: "H4".into(),
                threshold: "criticality ranking change flagged >= 2 weeks before the deterministic path".into(),
                observed: lead.map_or(f64::NAN, |l| l as f64),
                verdict: h4,
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> HypothesisInputs {
        HypothesisInputs {
            labor_reduction_pct: 43.5,
            cost_mape_pct: 4.0,
            week1_error: 8.0,
            late_error: 0.1,
            overtime_reduction_pct: 6.0,
            makespan_extended: false,
            ranking_change_week: Some(3),
            deterministic_change_week: Some(9),
            weeks: 16,
        }
    }

    #[test]
    fn verdict_rules() {
        let r = hypothesis_report(&base());
        assert_eq!(r.get("H1").unwrap().verdict, Verdict::Met);
        assert_eq!(r.get("H2").unwrap().verdict, Verdict::Met);
        assert_eq!(r.get("H3").unwrap().verdict, Verdict::PartiallyMet);
        assert_eq!(r.get("H4").unwrap().verdict, Verdict::Met);
        let mut i = base();
        i.overtime_reduction_pct = 12.0;
        assert_eq!(hypothesis_report(&i).get("H3").unwrap().verdict, Verdict::Met);
        i.makespan_extended = true;
        assert_eq!(hypothesis_report(&i).get("H3").unwrap().verdict, Verdict::NotMet);
        let mut i = base();
        i.deterministic_change_week = Some(4);
        assert_eq!(hypothesis_report(&i).get("H4").unwrap().verdict, Verdict::NotMet);
    }

    #[test]
    fn no_improvement_is_not_met_everywhere() {
        let i = HypothesisInputs {
            labor_reduction_pct: 0.0,
            cost_mape_pct: 30.0,
            week1_error: 5.0,
            late_error: 5.0,
            overtime_reduction_pct: 0.0,
            makespan_extended: false,
            ranking_change_week: None,
            deterministic_change_week: None,
            weeks: 16,
        };
        assert!(hypothesis_report(&i).hypotheses.iter().all(|h| h.verdict == Verdict::NotMet));
    }
}
