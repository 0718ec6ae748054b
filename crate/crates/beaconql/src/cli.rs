//! Command-line entry points shared by the `beaconql` and `eval` binaries.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use beaconql_core::cohort::{generate_fixture, CohortFixture, FixtureSpec};
use beaconql_core::draft::Workflow;
use beaconql_core::eval::{emit_report, evaluate, rouge1_prf, EvalConfig, MetricsReport, Prediction, ReportFormat};
use beaconql_core::mock_beacon::MockBeacon;
use beaconql_core::template::TemplateRegistry;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{load_provider, ProviderConfig, ServiceConfig};
use crate::dataset::{load_dataset, load_predictions, write_predictions};
use crate::extract::extract;
use crate::provider::build_provider;
use crate::sdk::HttpTransport;
use crate::service::{router, AppState, EventLog, ServiceOptions};

/// Exit status for malformed input files.
pub const EXIT_FORMAT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "beaconql", version, about = "Natural-language queries for Beacon v2 endpoints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `bind` from the config file.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Serve the synthetic cohort as a Beacon endpoint.
    MockBeacon {
        #[arg(long, default_value = "127.0.0.1:9000")]
        bind: String,
        /// Bearer token the endpoint accepts.
        #[arg(long, env = "BEACONQL_MOCK_TOKEN")]
        token: String,
        /// Cohort JSON; the built-in cohort when absent.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Print the built-in cohort as JSON.
    Fixture,
    /// Extract query fields from one question and print the draft.
    Extract {
        question: String,
        #[arg(long, value_enum, default_value = "parallel")]
        workflow: WorkflowArg,
        /// Provider TOML; the shipped mock when absent.
        #[arg(long)]
        provider: Option<PathBuf>,
    },
    /// Evaluation tools.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum WorkflowArg {
    Parallel,
    Multistep,
}

impl From<WorkflowArg> for Workflow {
    fn from(w: WorkflowArg) -> Self {
        match w {
            WorkflowArg::Parallel => Workflow::Parallel,
            WorkflowArg::Multistep => Workflow::Multistep,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Score prediction files against a dataset.
    Run(RunArgs),
    /// ROUGE-1 of one candidate against one reference.
    Score {
        #[arg(long)]
        candidate: String,
        #[arg(long)]
        reference: String,
    },
    /// Print the predictions of a perfect model for a dataset.
    Oracle {
        #[arg(long)]
        dataset: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, default_value = "table")]
    pub format: ReportFormat,
    /// ROUGE-1 F1 needed for a term match.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

/// Runs an eval subcommand, returning the exit status.
pub fn run_eval(command: EvalCommand, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match command {
        EvalCommand::Score { candidate, reference } => {
            let prf = rouge1_prf(&candidate, &reference);
            let _ = writeln!(out, "precision\t{:.4}\nrecall\t{:.4}\nf1\t{:.4}", prf.precision, prf.recall, prf.f1);
            0
        }
        EvalCommand::Oracle { dataset } => match load_dataset(&dataset) {
            Ok(data) => {
                let preds: Vec<Prediction> = data.cases.iter().map(Prediction::oracle).collect();
                let _ = out.write_all(write_predictions(&preds).as_bytes());
                0
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_FORMAT
            }
        },
        EvalCommand::Run(args) => {
            let data = match load_dataset(&args.dataset) {
                Ok(d) => d,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_FORMAT;
                }
            };
            let counts: Vec<String> = data.counts().iter().map(|(t, n)| format!("{t}={n}")).collect();
            let _ = writeln!(err, "{} cases ({})", data.cases.len(), counts.join(", "));
            let config = EvalConfig { match_threshold: args.threshold };
            let mut report = MetricsReport::default();
            for path in &args.predictions {
                let (model, preds) = match load_predictions(path) {
                    Ok(p) => p,
                    Err(e) => {
                        let _ = writeln!(err, "error: {e}");
                        return EXIT_FORMAT;
                    }
                };
                match evaluate(&model, &data.cases, &preds, &config) {
                    Ok(r) => report.models.push(r),
                    Err(e) => {
                        let _ = writeln!(err, "error: {}: {e}", path.display());
                        return EXIT_FORMAT;
                    }
                }
            }
            let _ = out.write_all(emit_report(&report, args.format).as_bytes());
            0
        }
    }
}

fn load_fixture(path: Option<&PathBuf>) -> Result<CohortFixture, String> {
    let fixture = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str::<CohortFixture>(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => generate_fixture(&FixtureSpec::default_spec()).map_err(|e| e.to_string())?,
    };
    fixture.check().map_err(|e| e.to_string())?;
    Ok(fixture)
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("tokio runtime")
}

fn serve_app(bind: &str, app: axum::Router) -> Result<(), String> {
    runtime().block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| format!("bind {bind}: {e}"))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| e.to_string())?);
        axum::serve(listener, app).await.map_err(|e| e.to_string())
    })
}

fn serve(config: PathBuf, bind: Option<String>) -> Result<(), String> {
    let config = ServiceConfig::load(&config).map_err(|e| e.to_string())?;
    let provider = build_provider(&config.provider).map_err(|e| e.to_string())?;
    let transport = Arc::new(HttpTransport::new(&config.beacon_endpoint, Duration::from_secs(60)));
    let event_log = match &config.event_log_dir {
        Some(dir) => Some(EventLog::open(dir).map_err(|e| format!("{}: {e}", dir.display()))?),
        None => None,
    };
    let options = ServiceOptions { workflow: config.workflow, analytics: config.analytics.clone(), event_log };
    let state = AppState::new(provider, transport, options).map_err(|e| e.to_string())?;
    serve_app(bind.as_deref().unwrap_or(&config.bind), router(state))
}

fn extract_one(question: &str, workflow: Workflow, provider: Option<PathBuf>, out: &mut dyn Write) -> Result<(), String> {
    let config = match provider {
        Some(p) => load_provider(&p).map_err(|e| e.to_string())?,
        None => ProviderConfig::mock(),
    };
    let provider = build_provider(&config).map_err(|e| e.to_string())?;
    let (draft, trace) = extract(workflow, question, provider.as_ref(), &TemplateRegistry::builtin());
    let doc = json!({ "draft": draft, "trace": trace });
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("draft serializes")).map_err(|e| e.to_string())
}

/// Dispatches a parsed command line; returns the exit status.
pub fn run(cli: Cli) -> i32 {
    let stdout = &mut std::io::stdout();
    let stderr = &mut std::io::stderr();
    let outcome = match cli.command {
        Command::Eval(cmd) => return run_eval(cmd, stdout, stderr),
        Command::Serve { config, bind } => serve(config, bind),
        Command::MockBeacon { bind, token, fixture } => load_fixture(fixture.as_ref())
            .and_then(|f| serve_app(&bind, crate::beacon_server::router(Arc::new(MockBeacon::new(f)), &token))),
        Command::Fixture => load_fixture(None).and_then(|f| write!(stdout, "{}", f.to_json_text()).map_err(|e| e.to_string())),
        Command::Extract { question, workflow, provider } => extract_one(&question, workflow.into(), provider, stdout),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}
