//! Language identification contract and a character-trigram naive Bayes
//! baseline trained on short shipped samples.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::textprep::strip_urls;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// ISO 639-1 code.
    pub lang: String,
    /// Posterior probability of `lang` in [0, 1].
    pub confidence: f64,
}

pub trait LanguageDetector: Send + Sync {
    fn detect(&self, text: &str) -> Result<Detection, String>;
}

const SAMPLES: [(&str, &str); 3] = [
    ("pt", include_str!("../resources/lang/pt.txt")),
    ("es", include_str!("../resources/lang/es.txt")),
    ("en", include_str!("../resources/lang/en.txt")),
];

/// Lowercased words made of letters only, URLs removed.
fn words(text: &str) -> Vec<String> {
    strip_urls(text)
        .to_lowercase()
        .split(|c: char| !c.is_alphabetic())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn trigrams(text: &str) -> HashMap<String, u32> {
    let mut out = HashMap::new();
    for w in words(text) {
        let padded: Vec<char> = format!(" {w} ").chars().collect();
        for g in padded.windows(3) {
            *out.entry(g.iter().collect()).or_insert(0) += 1;
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Profile {
    lang: String,
    log_prob: HashMap<String, f64>,
    unseen: f64,
}

#[derive(Debug, Clone)]
pub struct NgramDetector {
    profiles: Vec<Profile>,
}

impl NgramDetector {
    /// Builds add-one smoothed profiles from `(lang, sample text)` pairs.
    pub fn from_samples(samples: &[(&str, &str)]) -> Self {
        let counts: Vec<(String, HashMap<String, u32>)> = samples
            .iter()
            .map(|(lang, text)| (lang.to_string(), trigrams(text)))
            .collect();
        let vocab: std::collections::HashSet<&String> = counts.iter().flat_map(|(_, c)| c.keys()).collect();
        let v = vocab.len() as f64 + 1.0;
        let profiles = counts
            .into_iter()
            .map(|(lang, c)| {
                let total: f64 = c.values().map(|&n| n as f64).sum();
                let denom = total + v;
                Profile {
                    lang,
                    log_prob: c.into_iter().map(|(g, n)| (g, ((n as f64 + 1.0) / denom).ln())).collect(),
                    unseen: (1.0 / denom).ln(),
                }
            })
            .collect();
        NgramDetector { profiles }
    }

    pub fn languages(&self) -> Vec<&str> {
        self.profiles.iter().map(|p| p.lang.as_str()).collect()
    }
}

impl Default for NgramDetector {
    fn default() -> Self {
        Self::from_samples(&SAMPLES)
    }
}

impl LanguageDetector for NgramDetector {
    fn detect(&self, text: &str) -> Result<Detection, String> {
        let grams = trigrams(text);
        if grams.is_empty() {
            return Err("no alphabetic content".into());
        }
        let scores: Vec<f64> = self
            .profiles
            .iter()
            .map(|p| {
                grams
                    .iter()
                    .map(|(g, &n)| n as f64 * p.log_prob.get(g).copied().unwrap_or(p.unseen))
                    .sum()
            })
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let (best, _) = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one profile");
        Ok(Detection {
            lang: self.profiles[best].lang.clone(),
            confidence: 1.0 / z,
        })
    }
}
