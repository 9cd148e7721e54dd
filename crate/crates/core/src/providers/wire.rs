//! Response-body parsers for the three provider APIs.

use chrono::{DateTime, NaiveDate};
use serde::Deserialize;

use super::{ProviderError, ProviderKind};
use crate::model::{ClaimReviewResult, WebResult};

fn decode<T: for<'de> Deserialize<'de>>(provider: ProviderKind, body: &str) -> Result<T, ProviderError> {
    serde_json::from_str(body).map_err(|e| ProviderError::Decode {
        provider,
        message: e.to_string(),
    })
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CseBody {
    #[serde(default)]
    items: Vec<CseItem>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CseItem {
    #[serde(default)]
    title: String,
    html_title: Option<String>,
    #[serde(default)]
    link: String,
    #[serde(default)]
    snippet: String,
    html_snippet: Option<String>,
}

/// Custom Search results, truncated to `num`. The highlighted `html*`
/// variants are preferred since they carry the `<b>` markers.
pub fn parse_web(body: &str, num: u32) -> Result<Vec<WebResult>, ProviderError> {
    let parsed: CseBody = decode(ProviderKind::WebSearch, body)?;
    Ok(parsed
        .items
        .into_iter()
        .take(num as usize)
        .enumerate()
        .map(|(i, it)| WebResult {
            title: it.html_title.unwrap_or(it.title),
            link: it.link,
            snippet: it.html_snippet.unwrap_or(it.snippet),
            rank: i as u32 + 1,
        })
        .collect())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ClaimsBody {
    #[serde(default)]
    claims: Vec<Claim>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Claim {
    #[serde(default)]
    text: String,
    claimant: Option<String>,
    #[serde(default)]
    claim_review: Vec<Review>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Review {
    #[serde(default)]
    publisher: Publisher,
    #[serde(default)]
    url: String,
    review_date: Option<String>,
    #[serde(default)]
    textual_rating: String,
}

#[derive(Deserialize, Default)]
struct Publisher {
    #[serde(default)]
    name: String,
    #[serde(default)]
    site: String,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.date_naive())
        .ok()
        .or_else(|| NaiveDate::parse_from_str(s.get(..10)?, "%Y-%m-%d").ok())
}

/// Fact-check claims, keeping only the first review of each claim.
pub fn parse_factcheck(body: &str, page_size: u32) -> Result<Vec<ClaimReviewResult>, ProviderError> {
    let parsed: ClaimsBody = decode(ProviderKind::FactCheck, body)?;
    Ok(parsed
        .claims
        .into_iter()
        .filter_map(|c| {
            let review = c.claim_review.into_iter().next()?;
            Some((c.text, c.claimant, review))
        })
        .take(page_size as usize)
        .enumerate()
        .map(|(i, (text, claimant, r))| ClaimReviewResult {
            claim_text: text,
            claimant,
            publisher_name: r.publisher.name,
            publisher_site: r.publisher.site,
            textual_rating: r.textual_rating,
            review_date: r.review_date.as_deref().and_then(parse_date),
            review_url: r.url,
            rank: i as u32 + 1,
        })
        .collect())
}

#[derive(Deserialize)]
struct GenBody {
    #[serde(default)]
    candidates: Vec<Candidate>,
}

#[derive(Deserialize)]
struct Candidate {
    content: Option<Content>,
}

#[derive(Deserialize)]
struct Content {
    #[serde(default)]
    parts: Vec<Part>,
}

#[derive(Deserialize)]
struct Part {
    #[serde(default)]
    text: String,
}

/// Text of the first candidate; empty when the model returned nothing.
pub fn parse_llm(body: &str) -> Result<String, ProviderError> {
    let parsed: GenBody = decode(ProviderKind::Llm, body)?;
    Ok(parsed
        .candidates
        .into_iter()
        .next()
        .and_then(|c| c.content)
        .map(|c| c.parts.into_iter().map(|p| p.text).collect())
        .unwrap_or_default())
}
