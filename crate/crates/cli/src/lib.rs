//! `evd` command-line front end: argument parsing, settings resolution,
//! provider construction and run manifests around the core pipeline.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use evd_core::providers::{
    CacheMode, Clock, Credentials, FixtureTransport, FrozenClock, LiveTransport, ProviderPolicy, Service,
    SystemClock, Transport,
};

mod commands;
pub mod manifest;
pub mod settings;

use manifest::{dir_hash, file_hash, manifest_path, sha256_hex, RunManifest};
use settings::{ProviderMode, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or inputs; exit code 2.
    Config(String),
    /// Failure while running; exit code 2.
    Run(String),
    /// Outputs were written but too many records carry errors; exit code 1.
    ErrorRate { rate: f64, max: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ErrorRate { .. } => 1,
            CliError::Config(_) | CliError::Run(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "error: {m}"),
            CliError::ErrorRate { rate, max } => {
                write!(f, "error rate {:.4} exceeds --max-error-rate {max}", rate)
            }
        }
    }
}

impl From<evd_core::Error> for CliError {
    fn from(e: evd_core::Error) -> Self {
        use evd_core::Error as E;
        match e {
            E::Config(_) | E::Parse { .. } | E::Schema(_) | E::DuplicateId { .. } | E::Precondition(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Run(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "evd", version, about = "Validate, deduplicate and enrich fake-news corpora with web evidence")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Common {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub provider: Option<ProviderMode>,
    /// Recorded responses used with `--provider fixture`.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// read_write, read_only or bypass.
    #[arg(long, global = true)]
    pub cache_mode: Option<String>,
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Exit with status 1 when the share of records with errors is higher.
    #[arg(long, global = true)]
    pub max_error_rate: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the validation stages and emit the review queue.
    Validate(commands::ValidateArgs),
    /// Find near-duplicate clusters.
    Dedup(commands::DedupArgs),
    /// List or adjudicate review queue items.
    Review(commands::ReviewArgs),
    /// Search for evidence for every record.
    Enrich(commands::EnrichArgs),
    /// Descriptive statistics over enriched records.
    Analyze(commands::AnalyzeArgs),
    /// Train/validation/test split.
    Split(commands::SplitArgs),
    /// Export classification instances for a data configuration.
    BuildConfig(commands::BuildConfigArgs),
    /// Few-shot classification and scoring.
    Evaluate(commands::EvaluateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Dedup(_) => "dedup",
            Command::Review(_) => "review",
            Command::Enrich(_) => "enrich",
            Command::Analyze(_) => "analyze",
            Command::Split(_) => "split",
            Command::BuildConfig(_) => "build-config",
            Command::Evaluate(_) => "evaluate",
        }
    }
}

/// Defaults for every scalar setting.
fn defaults() -> Settings {
    Settings {
        provider: Some(ProviderMode::None),
        cache_mode: Some("read_write".into()),
        parallelism: Some(1),
        max_error_rate: Some(1.0),
        seed: Some(3),
        max_retries: Some(3),
        initial_backoff_ms: Some(500),
        backoff_multiplier: Some(2.0),
        rate_limit: Some(5),
        model: Some("gemini-1.5-flash".into()),
        min_content_tokens: Some(15),
        auto_remove_confidence: Some(0.95),
        sample_size: Some(100),
        match_threshold: Some(0.8),
        dedup_threshold: Some(0.7),
        num_permutations: Some(100),
        bands: Some(50),
        claim_template: Some("main".into()),
        ..Settings::default()
    }
}

/// Per-run state: resolved settings plus what the manifest needs.
pub struct Ctx {
    pub settings: Settings,
    subcommand: &'static str,
    started_at: DateTime<Utc>,
    resources: RefCell<BTreeMap<String, String>>,
    inputs: RefCell<BTreeMap<String, String>>,
    notes: RefCell<Vec<String>>,
    cache_hash: Option<String>,
    transport: Option<Arc<dyn Transport>>,
}

macro_rules! get {
    ($ctx:expr, $f:ident) => {
        $ctx.settings.$f.clone().expect(concat!(stringify!($f), " has a default"))
    };
}
pub(crate) use get;

impl Ctx {
    fn new(
        subcommand: &'static str,
        settings: Settings,
        transport: Option<Arc<dyn Transport>>,
    ) -> Result<Self, CliError> {
        let cache_hash = match &settings.cache_dir {
            Some(d) if settings.provider != Some(ProviderMode::None) => Some(dir_hash(d)?),
            _ => None,
        };
        Ok(Ctx {
            settings,
            subcommand,
            started_at: Utc::now(),
            resources: RefCell::default(),
            inputs: RefCell::default(),
            notes: RefCell::default(),
            cache_hash,
            transport,
        })
    }

    /// Loads an optional resource override, or the built-in text, and
    /// records its hash.
    pub fn resource(&self, name: &str, path: Option<&Path>, builtin: &str) -> Result<String, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("read {name} {}: {e}", p.display())))?,
            None => builtin.to_string(),
        };
        self.resources.borrow_mut().insert(name.to_string(), sha256_hex(text.as_bytes()));
        Ok(text)
    }

    pub fn input(&self, path: &Path) -> Result<(), CliError> {
        if !path.is_file() {
            return Err(CliError::Config(format!("input {} does not exist", path.display())));
        }
        self.inputs.borrow_mut().insert(path.display().to_string(), file_hash(path)?);
        Ok(())
    }

    pub fn note(&self, s: impl Into<String>) {
        self.notes.borrow_mut().push(s.into());
    }

    pub fn policy(&self) -> Result<ProviderPolicy, CliError> {
        let p = ProviderPolicy {
            max_retries: get!(self, max_retries),
            initial_backoff_ms: get!(self, initial_backoff_ms),
            backoff_multiplier: get!(self, backoff_multiplier),
            rate_limit: get!(self, rate_limit),
            cache_mode: get!(self, cache_mode).parse::<CacheMode>().map_err(CliError::Config)?,
        };
        p.validate()?;
        Ok(p)
    }

    /// The configured provider service; `None` when the mode is `none`.
    pub fn service(&self) -> Result<Option<Service>, CliError> {
        let mode = get!(self, provider);
        let (transport, clock): (Arc<dyn Transport>, Arc<dyn Clock>) = match (mode, &self.transport) {
            (ProviderMode::None, _) => return Ok(None),
            (_, Some(t)) => (t.clone(), Arc::new(FrozenClock(DateTime::UNIX_EPOCH))),
            (ProviderMode::Fixture, None) => {
                let dir = self
                    .settings
                    .fixtures
                    .as_ref()
                    .ok_or_else(|| CliError::Config("--provider fixture needs --fixtures".into()))?;
                let t = FixtureTransport::new(dir).map_err(|e| CliError::Config(e.to_string()))?;
                (Arc::new(t), Arc::new(FrozenClock(DateTime::UNIX_EPOCH)))
            }
            (ProviderMode::Live, None) => {
                let t = LiveTransport::new(Credentials::from_env()).map_err(|e| CliError::Config(e.to_string()))?;
                (Arc::new(t), Arc::new(SystemClock))
            }
        };
        let mut svc = Service::new(transport, self.policy()?, clock);
        if let Some(dir) = &self.settings.cache_dir {
            svc = svc.with_cache(dir);
        }
        Ok(Some(svc))
    }

    pub fn require_service(&self) -> Result<Service, CliError> {
        self.service()?
            .ok_or_else(|| CliError::Config(format!("{} needs --provider fixture or live", self.subcommand)))
    }

    pub fn parallelism(&self) -> Result<usize, CliError> {
        match get!(self, parallelism) {
            0 => Err(CliError::Config("--parallelism must be >= 1".into())),
            n => Ok(n),
        }
    }

    /// Writes the manifest next to `primary` covering `outputs`.
    pub fn finish(&self, args: &impl Serialize, primary: &Path, outputs: &[&Path]) -> Result<(), CliError> {
        let mut hashes = BTreeMap::new();
        for o in outputs {
            let h = if o.is_dir() { dir_hash(o)? } else { file_hash(o)? };
            hashes.insert(o.display().to_string(), h);
        }
        let mode = get!(self, provider);
        let m = RunManifest {
            subcommand: self.subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            provider_mode: mode.as_str().to_string(),
            config: serde_json::json!({ "settings": self.settings, "args": args }),
            resources: self.resources.borrow().clone(),
            inputs: self.inputs.borrow().clone(),
            outputs: hashes,
            fixtures_hash: match (&self.settings.fixtures, mode) {
                (Some(d), ProviderMode::Fixture) => Some(dir_hash(d)?),
                _ => None,
            },
            cache_hash: self.cache_hash.clone(),
            notes: self.notes.borrow().clone(),
            started_at: self.started_at,
            finished_at: Utc::now(),
        };
        m.write(&manifest_path(primary))
    }

    pub fn check_error_rate(&self, with_errors: usize, total: usize) -> Result<(), CliError> {
        let max = get!(self, max_error_rate);
        let rate = if total == 0 { 0.0 } else { with_errors as f64 / total as f64 };
        if rate > max {
            return Err(CliError::ErrorRate { rate, max });
        }
        Ok(())
    }
}

fn common_settings(c: &Common) -> Settings {
    Settings {
        provider: c.provider,
        fixtures: c.fixtures.clone(),
        cache_dir: c.cache_dir.clone(),
        cache_mode: c.cache_mode.clone(),
        parallelism: c.parallelism,
        max_error_rate: c.max_error_rate,
        seed: c.seed,
        ..Settings::default()
    }
}

fn dispatch(cli: Cli, transport: Option<Arc<dyn Transport>>) -> Result<(), CliError> {
    let file = match &cli.common.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let flags = commands::flag_settings(&cli.command).over(common_settings(&cli.common));
    let ctx = Ctx::new(cli.command.name(), flags.over(file).over(defaults()), transport)?;
    commands::run(&ctx, &cli.command)
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_inner(argv, None)
}

/// Like [`run`], but every provider call goes to `transport` (unless the
/// provider mode is `none`). Used to record fixtures from a scripted backend.
pub fn run_with_transport<I, T>(argv: I, transport: Arc<dyn Transport>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_inner(argv, Some(transport))
}

fn run_inner<I, T>(argv: I, transport: Option<Arc<dyn Transport>>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli, transport) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("evd: {e}");
            e.exit_code()
        }
    }
}
