//! Declarative run configuration (TOML, schema version 1).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::ShareMode;
use crate::corpus::TimeWindow;
use crate::gateway::live::DEFAULT_KEY_ENV;
use crate::scenario::{Candidate, ScenarioKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(rename = "subreddit")]
    pub subreddits: Vec<SubredditConfig>,
    pub windows: WindowsConfig,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub classification: ClassificationConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub live: LiveSettings,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubredditConfig {
    pub name: String,
    pub candidate: Candidate,
    pub posts: PathBuf,
    pub comments: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DateRange {
    /// Inclusive, `YYYY-MM-DD` UTC.
    pub start: String,
    /// Exclusive, `YYYY-MM-DD` UTC.
    pub end: String,
}

impl DateRange {
    pub fn window(&self) -> Result<TimeWindow, ConfigError> {
        let ts = |s: &str| -> Result<i64, ConfigError> {
            chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp())
                .map_err(|e| ConfigError(format!("bad date {s:?}: {e}")))
        };
        let w = TimeWindow::new(ts(&self.start)?, ts(&self.end)?);
        if w.start >= w.end {
            return err(format!("window {}..{} is empty", self.start, self.end));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsConfig {
    pub history: DateRange,
    pub target: DateRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub scenarios: Vec<ScenarioKind>,
    pub temperatures: Vec<f64>,
    pub top_p: f64,
    pub model: String,
    pub n_runs: u32,
    pub max_prompt_tokens: Option<usize>,
    pub anonymize_authors: bool,
    pub max_targets_per_user: Option<usize>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            scenarios: ScenarioKind::ALL.to_vec(),
            temperatures: vec![0.0],
            top_p: 1.0,
            model: "gpt-4-turbo".into(),
            n_runs: 5,
            max_prompt_tokens: None,
            anonymize_authors: false,
            max_targets_per_user: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationConfig {
    /// Classification repeats per text.
    pub n_runs: u32,
    pub temperature: f64,
    pub model: String,
    pub share_mode: ShareMode,
    pub histogram_bins: usize,
    pub length_bin_width: usize,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        ClassificationConfig {
            n_runs: 1,
            temperature: 0.0,
            model: "gpt-4-turbo".into(),
            share_mode: ShareMode::Modal,
            histogram_bins: 20,
            length_bin_width: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub model: String,
    pub dim: usize,
    pub mock_dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            model: "text-embedding-3-small".into(),
            dim: 1536,
            mock_dim: 384,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub max_calls: Option<u64>,
    pub max_in_flight: usize,
    pub requests_per_minute: Option<usize>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            max_calls: None,
            max_in_flight: 4,
            requests_per_minute: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveSettings {
    pub base_url: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for LiveSettings {
    fn default() -> Self {
        LiveSettings {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: DEFAULT_KEY_ENV.into(),
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub zipf_min_count: u64,
    pub write_ngram_tables: bool,
    pub shuffles: usize,
    pub perplexity: f64,
    pub tsne_iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub pca_dims: usize,
    /// Also project every comment, not only user centroids.
    pub project_comments: bool,
    pub svg: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let t = crate::embedspace::TsneParams::default();
        AnalysisConfig {
            zipf_min_count: crate::textstats::DEFAULT_MIN_COUNT,
            write_ngram_tables: true,
            shuffles: crate::embedspace::DEFAULT_SHUFFLES,
            perplexity: t.perplexity,
            tsne_iterations: t.iterations,
            learning_rate: t.learning_rate,
            early_exaggeration: t.early_exaggeration,
            exaggeration_iters: t.exaggeration_iters,
            pca_dims: t.pca_dims,
            project_comments: false,
            svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub runs: usize,
    pub split_fraction: f64,
    pub c: f64,
    pub tol: f64,
    pub max_epochs: usize,
    pub normalize: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let s = crate::detector::SvmParams::default();
        DetectorConfig {
            runs: 10,
            split_fraction: 0.8,
            c: s.c,
            tol: s.tol,
            max_epochs: s.max_epochs,
            normalize: true,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub max_calls: Option<u64>,
    pub workers: Option<usize>,
    pub temperatures: Option<Vec<f64>>,
    pub n_runs: Option<u32>,
    pub detector_runs: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::from_toml(&text, &base)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(b) = o.backend {
            self.backend = b;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            // command-line paths are relative to the working directory
            self.out_dir = std::path::absolute(d).unwrap_or_else(|_| d.clone());
        }
        if o.max_calls.is_some() {
            self.budget.max_calls = o.max_calls;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(t) = &o.temperatures {
            self.generation.temperatures = t.clone();
        }
        if let Some(n) = o.n_runs {
            self.generation.n_runs = n;
        }
        if let Some(r) = o.detector_runs {
            self.detector.runs = r;
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn history_window(&self) -> Result<TimeWindow, ConfigError> {
        self.windows.history.window()
    }

    pub fn target_window(&self) -> Result<TimeWindow, ConfigError> {
        self.windows.target.window()
    }

    /// Digest of everything that determines results; the output location,
    /// worker count and call limits are excluded.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.workers = 0;
        c.budget = BudgetConfig::default();
        crate::io::sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return err(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.subreddits.is_empty() {
            return err("at least one [[subreddit]] is required");
        }
        let mut names = HashSet::new();
        for s in &self.subreddits {
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return err(format!("subreddit name {:?} must be non-empty ASCII letters, digits, _ or -", s.name));
            }
            if !names.insert(&s.name) {
                return err(format!("subreddit {:?} listed twice", s.name));
            }
            for p in [&s.posts, &s.comments] {
                let full = self.resolve(p);
                if !full.is_file() {
                    return err(format!("input file {} does not exist", full.display()));
                }
            }
        }
        self.history_window()?;
        self.target_window()?;
        let g = &self.generation;
        if g.scenarios.is_empty() {
            return err("generation.scenarios is empty");
        }
        if g.scenarios.iter().collect::<HashSet<_>>().len() != g.scenarios.len() {
            return err("generation.scenarios has duplicates");
        }
        if g.temperatures.is_empty() {
            return err("generation.temperatures is empty");
        }
        let mut tags = HashSet::new();
        for &t in &g.temperatures {
            if !(0.0..=2.0).contains(&t) {
                return err(format!("temperature {t} outside [0, 2]"));
            }
            if !tags.insert(temperature_tag(t)) {
                return err(format!("temperature {t} duplicates another at two decimals"));
            }
        }
        if !(g.top_p > 0.0 && g.top_p <= 1.0) {
            return err(format!("top_p {} outside (0, 1]", g.top_p));
        }
        if g.n_runs == 0 {
            return err("generation.n_runs must be at least 1");
        }
        let c = &self.classification;
        if c.n_runs == 0 || c.histogram_bins == 0 || c.length_bin_width == 0 {
            return err("classification n_runs, histogram_bins and length_bin_width must be positive");
        }
        if self.embedding.dim == 0 || self.embedding.mock_dim == 0 {
            return err("embedding dimensions must be positive");
        }
        if self.workers == 0 || self.budget.max_in_flight == 0 {
            return err("workers and budget.max_in_flight must be positive");
        }
        let a = &self.analysis;
        if !(a.perplexity > 0.0) || !(a.learning_rate > 0.0) || a.pca_dims == 0 || a.shuffles == 0 {
            return err("analysis perplexity, learning_rate, pca_dims and shuffles must be positive");
        }
        let d = &self.detector;
        if !(d.split_fraction > 0.0 && d.split_fraction < 1.0) || d.runs == 0 || !(d.c > 0.0) || d.max_epochs == 0 {
            return err("detector needs split_fraction in (0, 1), runs >= 1, c > 0, max_epochs >= 1");
        }
        Ok(())
    }
}

/// Directory name for a temperature, e.g. `t0.50`.
pub fn temperature_tag(t: f64) -> String {
    format!("t{t:.2}")
}
