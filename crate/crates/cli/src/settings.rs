//! Flat key/value run settings. Values come from command-line flags, then
//! the config file, then built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    None,
    Fixture,
    Live,
}

impl ProviderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderMode::None => "none",
            ProviderMode::Fixture => "fixture",
            ProviderMode::Live => "live",
        }
    }
}

/// Every key is optional; unset keys fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub provider: Option<ProviderMode>,
    pub fixtures: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub cache_mode: Option<String>,
    pub parallelism: Option<usize>,
    pub max_error_rate: Option<f64>,
    pub seed: Option<u64>,

    pub max_retries: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
    pub backoff_multiplier: Option<f64>,
    pub rate_limit: Option<u32>,
    pub model: Option<String>,

    pub min_content_tokens: Option<usize>,
    pub auto_remove_confidence: Option<f64>,
    pub sample_size: Option<usize>,
    pub match_threshold: Option<f64>,
    pub dedup_threshold: Option<f64>,
    pub num_permutations: Option<usize>,
    pub bands: Option<usize>,
    pub claim_template: Option<String>,

    pub stopwords: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub domain_rules: Option<PathBuf>,
    pub social_domains: Option<PathBuf>,
    pub incomplete_ids: Option<PathBuf>,
    pub claim_prompt: Option<PathBuf>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($f:ident),* $(,)?) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("read config {}: {e}", path.display())))?;
        let mut s: Settings =
            toml::from_str(&src).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut s.fixtures,
            &mut s.cache_dir,
            &mut s.stopwords,
            &mut s.ratings,
            &mut s.domain_rules,
            &mut s.social_domains,
            &mut s.incomplete_ids,
            &mut s.claim_prompt,
        ] {
            if let Some(v) = p.as_mut().filter(|v| v.is_relative()) {
                *v = base.join(&*v);
            }
        }
        Ok(s)
    }

    /// Values set in `self` win over `base`.
    pub fn over(self, base: Settings) -> Settings {
        overlay!(
            self,
            base,
            provider,
            fixtures,
            cache_dir,
            cache_mode,
            parallelism,
            max_error_rate,
            seed,
            max_retries,
            initial_backoff_ms,
            backoff_multiplier,
            rate_limit,
            model,
            min_content_tokens,
            auto_remove_confidence,
            sample_size,
            match_threshold,
            dedup_threshold,
            num_permutations,
            bands,
            claim_template,
            stopwords,
            ratings,
            domain_rules,
            social_domains,
            incomplete_ids,
            claim_prompt,
        )
    }
}
