//! Command-line orchestration: `ingest`, `simulate`, `analyze`, `detect`
//! (and `run` for all four), driven by a TOML run configuration.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 call budget exhausted.

pub mod config;
pub mod manifest;
mod stages;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::gateway::live::{LiveChat, LiveConfig, LiveEmbedder};
use crate::gateway::mock::{HashedBowEmbedder, ScriptedMock};
use crate::gateway::{Budget, Gateway, GatewayConfig, GatewayError, RateLimiter, ResponseCache, SystemClock};

pub use config::{BackendKind, ConfigError, Overrides, RunConfig};
pub use manifest::{RunManifest, StageRecord, StageStatus};
pub use stages::{cmd_analyze, cmd_detect, cmd_ingest, cmd_simulate};

#[derive(Debug, Parser)]
#[command(name = "threadsim", version, about = "Simulate and analyze model-generated replies in discussion threads")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Maximum number of backend calls in this invocation.
    #[arg(long, global = true)]
    pub max_calls: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Manifest timestamp in Unix seconds; defaults to SOURCE_DATE_EPOCH,
    /// then the current time.
    #[arg(long, global = true)]
    pub timestamp: Option<i64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SimulateArgs {
    /// Comma-separated temperature list.
    #[arg(long = "temperature", value_delimiter = ',')]
    pub temperatures: Vec<f64>,
    /// Generations per target and scenario.
    #[arg(long)]
    pub n_runs: Option<u32>,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct DetectArgs {
    /// Repeated train/test splits.
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse dumps and write forests, user histories and targets.
    Ingest,
    /// Build prompts and generate replies.
    Simulate(SimulateArgs),
    /// Classify, compute text statistics and embedding-space tables.
    Analyze,
    /// Train and evaluate the linear detector on user centroids.
    Detect(DetectArgs),
    /// All four stages in order.
    Run {
        #[command(flatten)]
        simulate: SimulateArgs,
        #[command(flatten)]
        detect: DetectArgs,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("call budget exhausted: {0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Validated configuration plus invocation-wide settings.
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub timestamp: i64,
}

impl Context {
    pub fn new(mut cfg: RunConfig, overrides: &Overrides, timestamp: Option<i64>) -> Result<Context, CliError> {
        cfg.apply(overrides);
        cfg.validate()?;
        let timestamp = timestamp
            .or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()))
            .unwrap_or_else(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs() as i64)
            });
        let out = cfg.out();
        Ok(Context { cfg, out, timestamp })
    }

    pub fn load(config: &Path, overrides: &Overrides, timestamp: Option<i64>) -> Result<Context, CliError> {
        Context::new(RunConfig::load(config)?, overrides, timestamp)
    }

    pub fn manifest(&self) -> RunManifest {
        RunManifest::load_or_new(&self.out, &self.cfg.digest(), self.cfg.seed, backend_name(self.cfg.backend))
    }

    pub(crate) fn record_stage(&self, stage: &str, record: StageRecord) -> Result<(), CliError> {
        let mut m = self.manifest();
        m.stages.insert(stage.to_string(), record);
        m.save(&self.out)?;
        Ok(())
    }

    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))
    }

    pub fn cache_path(&self) -> PathBuf {
        self.out.join("cache").join("responses.jsonl")
    }

    /// Gateway over the configured backend, sharing the run's response cache.
    pub fn gateway(&self) -> Result<Gateway, CliError> {
        let cfg = &self.cfg;
        let gcfg = GatewayConfig {
            retry: Default::default(),
            limiter: RateLimiter::new(cfg.budget.max_in_flight, cfg.budget.requests_per_minute),
            budget: Budget::new(cfg.budget.max_calls),
            clock: Arc::new(SystemClock::default()),
        };
        let live = match cfg.backend {
            BackendKind::Live => {
                let mut lc = LiveConfig::from_env(&cfg.live.base_url, &cfg.live.api_key_env)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                lc.timeout = std::time::Duration::from_secs(cfg.live.timeout_secs);
                Some(lc)
            }
            BackendKind::Mock => None,
        };
        let cache = ResponseCache::open(self.cache_path())?;
        Ok(match live {
            None => Gateway::new(
                Arc::new(ScriptedMock::new(crate::seed::derive(cfg.seed, "mock-chat", 0))),
                cache,
                gcfg,
            )
            .with_embedder(Arc::new(HashedBowEmbedder::new(cfg.embedding.mock_dim))),
            Some(lc) => Gateway::new(Arc::new(LiveChat::new(lc.clone())), cache, gcfg).with_embedder(Arc::new(
                LiveEmbedder::new(lc, &cfg.embedding.model, cfg.embedding.dim),
            )),
        })
    }
}

pub fn backend_name(b: BackendKind) -> &'static str {
    match b {
        BackendKind::Mock => "mock",
        BackendKind::Live => "live",
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut overrides = Overrides {
        backend: cli.backend,
        seed: cli.seed,
        out_dir: cli.out.clone(),
        max_calls: cli.max_calls,
        workers: cli.workers,
        ..Default::default()
    };
    let (sim, det) = match &cli.command {
        Command::Simulate(s) => (Some(s.clone()), None),
        Command::Detect(d) => (None, Some(d.clone())),
        Command::Run { simulate, detect } => (Some(simulate.clone()), Some(detect.clone())),
        _ => (None, None),
    };
    if let Some(s) = sim {
        if !s.temperatures.is_empty() {
            overrides.temperatures = Some(s.temperatures);
        }
        overrides.n_runs = s.n_runs;
    }
    if let Some(d) = det {
        overrides.detector_runs = d.runs;
    }
    let ctx = Context::load(config, &overrides, cli.timestamp)?;
    match cli.command {
        Command::Ingest => cmd_ingest(&ctx),
        Command::Simulate(_) => cmd_simulate(&ctx),
        Command::Analyze => cmd_analyze(&ctx),
        Command::Detect(_) => cmd_detect(&ctx),
        Command::Run { .. } => {
            cmd_ingest(&ctx)?;
            cmd_simulate(&ctx)?;
            cmd_analyze(&ctx)?;
            cmd_detect(&ctx)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
