use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{ArgGroup, Parser, Subcommand};
use ptwin_core::sandbox::{tornado as rank, tornado_table, Scenario, ScenarioFile};
use ptwin_core::twin::{evm_as_of, run_ablation, ProjectStore, RunOptions, SourceKind, Twin, TwinConfig, TwinError};
use serde::Serialize;
use serde_json::json;

use crate::api::{parse_components, router, AppState};

#[derive(Debug, Parser)]
#[command(name = "ptwin", version, about = "Project control twin: forecasting, earned value, resource levelling and what-if analysis")]
pub struct Cli {
    /// Project directory.
    #[arg(long, global = true, env = "PTWIN_PROJECT", default_value = ".")]
    pub project: PathBuf,
    /// Override the configured random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the configured Monte Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Sampling worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty project.
    Init {
        /// Project configuration (JSON). Defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Validate and merge an input file.
    Ingest { kind: String, file: PathBuf },
    /// Run the weekly control cycle for week N.
    Week { n: u32 },
    /// Latest forecast, or the prior forecast before any week has run.
    Forecast,
    /// Earned-value curves and indices.
    Evm,
    /// List resource recommendations.
    Recommend {
        #[arg(long)]
        week: Option<u32>,
    },
    /// Adopt or reject a recommendation.
    #[command(group(ArgGroup::new("choice").required(true).args(["adopt", "reject"])))]
    Decide {
        id: String,
        #[arg(long)]
        adopt: bool,
        #[arg(long)]
        reject: bool,
        #[arg(long, default_value = "")]
        reason: String,
        /// RFC 3339 time of the decision. Defaults to now.
        #[arg(long)]
        timestamp: Option<String>,
    },
    /// Evaluate scenarios from a file against the current state.
    Whatif { file: PathBuf },
    /// Rank the ingested scenarios by finish impact.
    Tornado,
    /// Project summary and hypothesis checks.
    Report,
    /// Replay the project with components replaced by their null behaviour.
    Ablate {
        /// Comma-separated components (nlp, cv, bayes, drl). Omit for every single one.
        #[arg(long)]
        remove: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Twin(e) if e.is_data_error() => 2,
            CliError::Data(_) => 2,
            _ => 1,
        }
    }
}

type CliResult = Result<String, CliError>;

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(out) => {
            if !out.is_empty() {
                // A closed pipe (`ptwin forecast | head`) is not an error.
                let _ = writeln!(std::io::stdout().lock(), "{}", out.trim_end());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes")
}

fn run(cli: Cli) -> CliResult {
    let store = ProjectStore::new(&cli.project);
    let opts = RunOptions {
        seed: cli.seed,
        samples: cli.samples,
        threads: cli.threads,
    };
    if let Command::Init { config } = &cli.command {
        if store.exists() {
            return Err(CliError::Usage(format!("{} already holds a project", cli.project.display())));
        }
        let config: TwinConfig = match config {
            Some(p) => serde_json::from_str(&read(p)?).map_err(|e| CliError::Data(format!("config: {e}")))?,
            None => TwinConfig::default(),
        };
        let twin = store.init(config)?;
        return Ok(format!("initialised {} at version {}", store.dir().display(), twin.version()));
    }
    if !store.exists() {
        return Err(CliError::Usage(format!(
            "no project in {}; run `ptwin init` first",
            cli.project.display()
        )));
    }
    let mut twin = store.load()?;
    match cli.command {
        Command::Init { .. } => unreachable!(),
        Command::Ingest { kind, file } => {
            let kind: SourceKind = kind.parse()?;
            let payload = read(&file)?;
            let version = twin.ingest(kind, &payload)?;
            store.save(&twin)?;
            Ok(format!("ingested {kind}; version {version}"))
        }
        Command::Week { n } => {
            let result = twin.run_week(n, opts)?;
            store.save(&twin)?;
            if cli.json {
                return Ok(to_json(&result));
            }
            let mut s = String::new();
            writeln!(s, "week {} (version {})", result.week, result.version).unwrap();
            if result.missing_evidence {
                writeln!(s, "  no evidence this week; forecast from current beliefs").unwrap();
            }
            writeln!(s, "  beliefs updated  {}", result.updated_beliefs).unwrap();
            writeln!(s, "  p50 finish       {:.2}", result.forecast.p50_finish).unwrap();
            writeln!(s, "  p80 finish       {:.2}", result.forecast.p80_finish).unwrap();
            if let Some(m) = &result.evm {
                writeln!(s, "  SPI / CPI        {:.3} / {:.3}", m.spi, m.cpi).unwrap();
            }
            if let Some(b) = &result.buffer {
                writeln!(s, "  buffer used      {:.1}%", b.project_percent_used).unwrap();
            }
            for id in &result.recommendations {
                if let Some(r) = twin.state().recommendation(id) {
                    writeln!(s, "  {id}: {}", r.summary).unwrap();
                }
            }
            Ok(s)
        }
        Command::Forecast => {
            let state = twin.state();
            let current = match state.weeks.values().next_back() {
                Some(w) => w.forecast.clone(),
                None => state.forecast_now(opts)?,
            };
            if cli.json {
                return Ok(to_json(&json!({ "weeks": state.weeks.values().map(|w| json!({
                    "week": w.week, "p50_finish": w.forecast.p50_finish, "p80_finish": w.forecast.p80_finish,
                })).collect::<Vec<_>>(), "current": current })));
            }
            let mut s = String::new();
            writeln!(s, "week\tp50\tp80").unwrap();
            for w in state.weeks.values() {
                writeln!(s, "{}\t{:.2}\t{:.2}", w.week, w.forecast.p50_finish, w.forecast.p80_finish).unwrap();
            }
            writeln!(s).unwrap();
            writeln!(s, "quantile\tfinish").unwrap();
            for q in &current.finish_histogram {
                writeln!(s, "{:.2}\t{:.2}", q.probability, q.finish).unwrap();
            }
            writeln!(s).unwrap();
            writeln!(s, "activity\tcriticality_pct").unwrap();
            for id in current.criticality_ranking() {
                writeln!(s, "{id}\t{:.1}", current.criticality[&id]).unwrap();
            }
            Ok(s)
        }
        Command::Evm => {
            let state = twin.state();
            let report = evm_as_of(state, state.config.weeks.max(state.last_week()))?
                .ok_or(TwinError::MissingInput("evm"))?;
            if cli.json {
                return Ok(to_json(&json!({ "report": report, "quantities": state.quantities })));
            }
            let mut s = String::new();
            writeln!(s, "period\tSPI\tCPI\tSV%\tCV%").unwrap();
            for m in &report.metrics {
                writeln!(s, "{}\t{:.3}\t{:.3}\t{:.2}\t{:.2}", m.period, m.spi, m.cpi, m.sv_pct, m.cv_pct).unwrap();
            }
            if !state.quantities.is_empty() {
                writeln!(s).unwrap();
                writeln!(s, "work_package\tplanned\tmeasured\tvariance_pct").unwrap();
                for q in &state.quantities {
                    writeln!(s, "{}\t{}\t{}\t{:.1}", q.work_package, q.planned, q.measured, q.variance_pct).unwrap();
                }
            }
            Ok(s)
        }
        Command::Recommend { week } => {
            let state = twin.state();
            let recs: Vec<_> = state
                .recommendations
                .iter()
                .filter(|r| week.is_none_or(|w| r.week == w))
                .collect();
            if cli.json {
                return Ok(to_json(&recs));
            }
            let mut s = String::new();
            for r in recs {
                let status = serde_json::to_value(&r.status).ok();
                let status = status
                    .as_ref()
                    .and_then(|v| v.get("status"))
                    .and_then(|v| v.as_str())
                    .unwrap_or("proposed");
                writeln!(
                    s,
                    "{}\tweek {}\t{}\t{}\tovertime {:+.1} h",
                    r.action_id, r.week, status, r.summary, r.predicted_overtime_delta
                )
                .unwrap();
            }
            Ok(s)
        }
        Command::Decide {
            id,
            adopt,
            reject: _,
            reason,
            timestamp,
        } => {
            let timestamp =
                timestamp.unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
            let record = twin.decide(&id, adopt, &reason, &timestamp)?;
            store.save(&twin)?;
            if cli.json {
                return Ok(to_json(&record));
            }
            Ok(format!("{} {}; version {}", record.action_id, record.status, twin.version()))
        }
        Command::Whatif { file } => {
            let text = read(&file)?;
            let scenarios = parse_scenarios(&text)?;
            let state = twin.state();
            let results = scenarios
                .iter()
                .map(|sc| state.evaluate_scenario(sc, opts))
                .collect::<Result<Vec<_>, _>>()?;
            if cli.json {
                return Ok(to_json(&results));
            }
            let rows = rank(&results).map_err(TwinError::from)?;
            Ok(tornado_table(&rows))
        }
        Command::Tornado => {
            let rows = twin.state().tornado(opts)?;
            if cli.json {
                return Ok(to_json(&rows));
            }
            Ok(tornado_table(&rows))
        }
        Command::Report => {
            let state = twin.state();
            let summary = state.summary();
            let hypotheses = state.hypotheses().ok();
            if cli.json {
                return Ok(to_json(&json!({ "summary": summary, "hypotheses": hypotheses })));
            }
            let mut s = String::new();
            writeln!(s, "{} (version {})", summary.project_id, summary.version).unwrap();
            writeln!(s, "  weeks run        {}/{}", summary.weeks_run, summary.weeks_planned).unwrap();
            writeln!(s, "  activities       {}", summary.activities).unwrap();
            if let (Some(p50), Some(p80)) = (summary.p50_finish, summary.p80_finish) {
                writeln!(s, "  finish p50/p80   {p50:.2} / {p80:.2}").unwrap();
            }
            if let Some(b) = summary.project_buffer_used_pct {
                writeln!(s, "  buffer used      {b:.1}%").unwrap();
            }
            writeln!(s, "  recommendations  {} ({} decided)", summary.recommendations, summary.decisions).unwrap();
            if let Some(h) = hypotheses {
                for r in &h.hypotheses {
                    writeln!(s, "  {}  {:.3}  ({})  {}", r.id, r.observed, r.threshold, r.verdict).unwrap();
                }
            }
            Ok(s)
        }
        Command::Ablate { remove } => {
            let sets: Vec<BTreeSet<_>> = match remove {
                Some(list) => vec![parse_components(&list)?],
                None => std::iter::once(BTreeSet::new())
                    .chain(ptwin_core::twin::Component::ALL.iter().map(|c| BTreeSet::from([*c])))
                    .collect(),
            };
            let rows = sets
                .iter()
                .map(|s| run_ablation(&twin, s))
                .collect::<Result<Vec<_>, _>>()?;
            if cli.json {
                return Ok(to_json(&rows));
            }
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
            let mut s = String::new();
            writeln!(s, "removed\tschedule_mape\tcost_mape\tlabor_reduction\tspi\tcpi\tovertime_h").unwrap();
            for r in rows {
                let removed = if r.removed.is_empty() {
                    "none".to_string()
                } else {
                    r.removed.join(",")
                };
                writeln!(
                    s,
                    "{removed}\t{}\t{}\t{}\t{}\t{}\t{:.0}",
                    fmt(r.schedule_mape_pct),
                    fmt(r.cost_mape_pct),
                    fmt(r.labor_reduction_pct),
                    fmt(r.final_spi),
                    fmt(r.final_cpi),
                    r.overtime_hours
                )
                .unwrap();
            }
            Ok(s)
        }
        Command::Serve { bind } => serve(twin, store, opts, &bind),
    }
}

fn parse_scenarios(text: &str) -> Result<Vec<Scenario>, CliError> {
    if let Ok(file) = serde_json::from_str::<ScenarioFile>(text) {
        return Ok(file.scenarios);
    }
    if let Ok(list) = serde_json::from_str::<Vec<Scenario>>(text) {
        return Ok(list);
    }
    serde_json::from_str::<Scenario>(text)
        .map(|s| vec![s])
        .map_err(|e| CliError::Data(format!("scenario file: {e}")))
}

fn serve(twin: Twin, store: ProjectStore, opts: RunOptions, bind: &str) -> CliResult {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {bind}: {e}")))?;
        eprintln!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
        let app = router(AppState::new(twin, Some(store), opts));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Data(e.to_string()))?;
        Ok(String::new())
    })
}
