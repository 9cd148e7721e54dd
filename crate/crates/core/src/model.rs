//! Canonical record types shared by every pipeline stage.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

/// Source corpus of a record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Corpus {
    FakeBr,
    Covid19Br,
    MuminPt,
    Other(String),
}

impl Corpus {
    pub fn as_str(&self) -> &str {
        match self {
            Corpus::FakeBr => "fakebr",
            Corpus::Covid19Br => "covid19br",
            Corpus::MuminPt => "mumin_pt",
            Corpus::Other(name) => name,
        }
    }
}

impl From<String> for Corpus {
    fn from(s: String) -> Self {
        match s.as_str() {
            "fakebr" => Corpus::FakeBr,
            "covid19br" => Corpus::Covid19Br,
            "mumin_pt" => Corpus::MuminPt,
            _ => Corpus::Other(s),
        }
    }
}

impl From<&str> for Corpus {
    fn from(s: &str) -> Self {
        Corpus::from(s.to_string())
    }
}

impl From<Corpus> for String {
    fn from(c: Corpus) -> Self {
        c.as_str().to_string()
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary veracity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake,
    True,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fake => "fake",
            Label::True => "true",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "fake" => Some(Label::Fake),
            "true" => Some(Label::True),
            _ => None,
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Fake => Label::True,
            Label::True => Label::Fake,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub id: String,
    pub corpus: Corpus,
    pub text: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_at: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
    /// Fields not covered by the schema, kept verbatim.
    #[serde(flatten)]
    pub unknown: serde_json::Map<String, serde_json::Value>,
}

impl NewsItem {
    pub fn new(id: impl Into<String>, corpus: Corpus, text: impl Into<String>, label: Label) -> Self {
        NewsItem {
            id: id.into(),
            corpus,
            text: text.into(),
            label,
            pair_id: None,
            source_url: None,
            published_at: None,
            extra: BTreeMap::new(),
            unknown: serde_json::Map::new(),
        }
    }

    pub fn with_pair(mut self, pair_id: impl Into<String>) -> Self {
        self.pair_id = Some(pair_id.into());
        self
    }

    pub fn with_source_url(mut self, url: impl Into<String>) -> Self {
        self.source_url = Some(url.into());
        self
    }

    /// Text before URL stripping, if the validation pipeline changed it.
    pub fn raw_text(&self) -> &str {
        self.extra.get("text_raw").map(String::as_str).unwrap_or(&self.text)
    }

    /// Checks the per-record invariants.
    pub fn check(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.text.trim().is_empty() {
            return Err(format!("record {:?} has empty text", self.id));
        }
        if self.corpus == Corpus::FakeBr && self.pair_id.as_deref().map_or(true, str::is_empty) {
            return Err(format!("fakebr record {:?} has no pair_id", self.id));
        }
        Ok(())
    }
}

/// One web-search hit. `title` and `snippet` keep `<b>` markers raw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebResult {
    pub title: String,
    pub link: String,
    pub snippet: String,
    pub rank: u32,
}

/// First review of one claim returned by the fact-check search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimReviewResult {
    pub claim_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimant: Option<String>,
    pub publisher_name: String,
    pub publisher_site: String,
    pub textual_rating: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_date: Option<NaiveDate>,
    pub review_url: String,
    pub rank: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    FullText,
    FirstSentence,
    FirstParagraph,
    First20Words,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    InitialSearch,
    ClaimExtraction,
    ClaimSearch,
    FactcheckSearch,
    /// Few-shot classification calls made by the evaluation kit.
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    EmptyResults,
    ProviderFailure,
    ConstraintViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub detail: String,
}

impl ErrorEvent {
    pub fn new(stage: Stage, kind: ErrorKind, detail: impl Into<String>) -> Self {
        ErrorEvent {
            stage,
            kind,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactcheckQuery {
    Original,
    Claim,
    None,
}

/// A record plus everything the enrichment flow gathered for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedRecord {
    pub item: NewsItem,
    pub query: String,
    pub query_kind: QueryKind,
    pub initial_results: Vec<WebResult>,
    pub match_score_per_result: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_results: Option<Vec<WebResult>>,
    pub factcheck_results: Vec<ClaimReviewResult>,
    pub factcheck_query_used: FactcheckQuery,
    pub errors: Vec<ErrorEvent>,
    pub timestamps: BTreeMap<Stage, DateTime<Utc>>,
}

impl EnrichedRecord {
    /// An enriched record with nothing gathered yet.
    pub fn bare(item: NewsItem, query: String, query_kind: QueryKind) -> Self {
        EnrichedRecord {
            item,
            query,
            query_kind,
            initial_results: Vec::new(),
            match_score_per_result: Vec::new(),
            match_index: None,
            claim: None,
            claim_results: None,
            factcheck_results: Vec::new(),
            factcheck_query_used: FactcheckQuery::None,
            errors: Vec::new(),
            timestamps: BTreeMap::new(),
        }
    }

    /// Checks the cross-field invariants given the match threshold used.
    pub fn check(&self, match_threshold: f64, max_claim_words: usize) -> Result<(), String> {
        let id = &self.item.id;
        let strong = self
            .match_score_per_result
            .iter()
            .any(|s| crate::matching::meets(*s, match_threshold));
        if self.match_index.is_some() != strong {
            return Err(format!("{id}: match_index presence disagrees with scores"));
        }
        if self.claim.is_some() && self.match_index.is_some() {
            return Err(format!("{id}: claim present together with match_index"));
        }
        if let Some(claim) = &self.claim {
            let n = claim.split_whitespace().count();
            if n == 0 || n > max_claim_words {
                return Err(format!("{id}: claim has {n} words"));
            }
        }
        if self.factcheck_query_used == FactcheckQuery::Claim && self.claim.is_none() {
            return Err(format!("{id}: factcheck used the claim but no claim is stored"));
        }
        for list in std::iter::once(&self.initial_results).chain(self.claim_results.iter()) {
            if list.windows(2).any(|w| w[0].rank >= w[1].rank) {
                return Err(format!("{id}: result ranks not strictly increasing"));
            }
        }
        Ok(())
    }
}
