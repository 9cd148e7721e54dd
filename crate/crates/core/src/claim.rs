//! Claim extraction: prompt construction, LLM invocation and clean-up of the
//! model output into a short single claim.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{LlmRequest, ProviderError, Service};
use crate::textprep::{is_quote, llm_input, word_count, LlmInputConfig};

pub const PLACEHOLDER: &str = "{TEXTO DE ENTRADA}";

/// Appended to the prompt when the first answer is empty or too long.
const REINFORCEMENT: &str = "\nResponda somente com a alegação, em no máximo {N} palavras.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Main,
    Detection,
    RoleFramed,
    QueryExtraction,
    FewShot,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::Main,
        TemplateId::Detection,
        TemplateId::RoleFramed,
        TemplateId::QueryExtraction,
        TemplateId::FewShot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Main => "main",
            TemplateId::Detection => "detection",
            TemplateId::RoleFramed => "role_framed",
            TemplateId::QueryExtraction => "query_extraction",
            TemplateId::FewShot => "few_shot",
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            TemplateId::Main => include_str!("../resources/prompts/claim_main.txt"),
            TemplateId::Detection => include_str!("../resources/prompts/claim_detection.txt"),
            TemplateId::RoleFramed => include_str!("../resources/prompts/claim_role_framed.txt"),
            TemplateId::QueryExtraction => {
                include_str!("../resources/prompts/claim_query_extraction.txt")
            }
            TemplateId::FewShot => include_str!("../resources/prompts/claim_few_shot.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown claim template {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimPromptTemplate {
    pub template_id: TemplateId,
    pub body: String,
    pub max_claim_words: usize,
}

impl ClaimPromptTemplate {
    pub fn new(template_id: TemplateId, body: impl Into<String>, max_claim_words: usize) -> Result<Self> {
        let body = body.into();
        let n = body.matches(PLACEHOLDER).count();
        if n != 1 {
            return Err(Error::Config(format!(
                "claim template {template_id} must contain {PLACEHOLDER} exactly once (found {n})"
            )));
        }
        if max_claim_words == 0 {
            return Err(Error::Config("max_claim_words must be >= 1".into()));
        }
        Ok(ClaimPromptTemplate {
            template_id,
            body,
            max_claim_words,
        })
    }

    pub fn builtin(id: TemplateId) -> Self {
        let body = id.builtin_body().strip_suffix('\n').unwrap_or(id.builtin_body());
        Self::new(id, body, 20).expect("shipped templates are valid")
    }

    pub fn from_file(id: TemplateId, path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        let body = body.strip_suffix('\n').unwrap_or(&body).to_string();
        Self::new(id, body, 20)
    }
}

impl Default for ClaimPromptTemplate {
    fn default() -> Self {
        Self::builtin(TemplateId::Main)
    }
}

/// The template with its placeholder replaced by the truncated text.
pub fn build_prompt(text: &str, tpl: &ClaimPromptTemplate, cfg: &LlmInputConfig) -> String {
    tpl.body.replacen(PLACEHOLDER, &llm_input(text, cfg), 1)
}

static LEADING_LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(?:alega[çc][ãa]o(?:\s+extra[íi]da)?|afirma[çc][ãa]o|claim|resposta|busca)\s*:\s*").unwrap()
});

fn strip_emphasis(s: &str) -> String {
    let s = s.replace("**", "").replace("__", "").replace('`', "");
    let s = s.trim_start_matches(|c: char| c == '#' || c.is_whitespace());
    let s = s.strip_prefix("- ").unwrap_or(s);
    s.trim_matches(|c: char| c == '*' || c == '_').to_string()
}

fn strip_surrounding_quotes(s: &str) -> &str {
    let mut chars = s.chars();
    match (chars.next(), chars.next_back()) {
        (Some(a), Some(b)) if is_quote(a) && is_quote(b) => &s[a.len_utf8()..s.len() - b.len_utf8()],
        _ => s,
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalizes a model answer: drops surrounding quotes, leading labels such
/// as `Alegação:`, markdown emphasis, and collapses whitespace. Runs to a
/// fixed point, so applying it twice changes nothing.
pub fn clean_output(raw: &str) -> String {
    let mut cur = collapse_ws(raw);
    loop {
        let mut next = LEADING_LABEL.replace(&cur, "").into_owned();
        next = strip_emphasis(&next);
        next = strip_surrounding_quotes(next.trim()).to_string();
        next = collapse_ws(&next);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn first_words(s: &str, n: usize) -> String {
    s.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimResult {
    pub claim: String,
    pub word_count: usize,
    pub raw_output: String,
    pub attempts: u32,
    /// The stored claim differs from the trimmed model output.
    pub enforced: bool,
    pub captured_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClaimError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("claim constraint violated: {0}")]
    Constraint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClaimSettings {
    pub template: TemplateId,
    pub input: LlmInputConfig,
    pub model: String,
    pub knobs: BTreeMap<String, String>,
}

impl Default for ClaimSettings {
    fn default() -> Self {
        ClaimSettings {
            template: TemplateId::Main,
            input: LlmInputConfig::default(),
            model: "gemini-1.5-flash".into(),
            knobs: BTreeMap::new(),
        }
    }
}

impl ClaimSettings {
    pub fn request(&self, prompt: String) -> LlmRequest {
        let mut r = LlmRequest::new(prompt);
        r.model = self.model.clone();
        r.knobs = self.knobs.clone();
        r
    }
}

/// Asks the model for the central claim of `text`. An empty or over-long
/// answer is retried once with a reinforced instruction; a still over-long
/// answer is cut to the word cap.
pub fn extract_claim(
    text: &str,
    tpl: &ClaimPromptTemplate,
    settings: &ClaimSettings,
    service: &Service,
) -> std::result::Result<ClaimResult, ClaimError> {
    let cap = tpl.max_claim_words;
    let prompt = build_prompt(text, tpl, &settings.input);
    let mut attempts = 0;
    let mut last: Option<(String, String, DateTime<Utc>)> = None;
    for round in 0..2 {
        let p = if round == 0 {
            prompt.clone()
        } else {
            format!("{prompt}{}", REINFORCEMENT.replace("{N}", &cap.to_string()))
        };
        let resp = match service.llm_generate(&settings.request(p)) {
            Ok(r) => r,
            // a failed retry still leaves the first answer to cut down
            Err(_) if last.as_ref().is_some_and(|(c, _, _)| !c.is_empty()) => break,
            Err(e) => return Err(e.into()),
        };
        attempts += 1;
        let mut cleaned = clean_output(&resp.value);
        if !cleaned.chars().any(char::is_alphanumeric) {
            cleaned.clear();
        }
        let n = word_count(&cleaned);
        let ok = n > 0 && n <= cap;
        if ok || (n > 0 && round == 1) || last.as_ref().map_or(true, |(c, _, _)| c.is_empty()) {
            last = Some((cleaned, resp.value, resp.captured_at));
        }
        if ok {
            break;
        }
    }
    let (cleaned, raw, captured_at) = last.expect("at least one attempt");
    if cleaned.is_empty() {
        return Err(ClaimError::Constraint(format!(
            "empty claim after {attempts} attempts"
        )));
    }
    let claim = first_words(&cleaned, cap);
    Ok(ClaimResult {
        word_count: word_count(&claim),
        enforced: claim != raw.trim(),
        claim,
        raw_output: raw,
        attempts,
        captured_at,
    })
}
