//! The 80% highlighted-term rule deciding whether a web result strongly
//! corresponds to the query.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WebResult;
use crate::textprep::{trim_punct, word_tokens, Stopwords};

const OPEN: &str = "<b>";
const CLOSE: &str = "</b>";

/// Tolerance for the `>=` threshold comparison, so that 4/5 meets 0.8.
const EPS: f64 = 1e-12;

/// `score >= threshold`, robust to floating-point rounding of simple ratios.
pub fn meets(score: f64, threshold: f64) -> bool {
    score + EPS >= threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fields {
    pub title: bool,
    pub snippet: bool,
}

impl Default for Fields {
    fn default() -> Self {
        Fields {
            title: true,
            snippet: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatchConfig {
    pub threshold: f64,
    pub stopwords: Stopwords,
    pub fields: Fields,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            threshold: 0.8,
            stopwords: Stopwords::default(),
            fields: Fields::default(),
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "match threshold {} outside (0, 1]",
                self.threshold
            )));
        }
        if !self.fields.title && !self.fields.snippet {
            return Err(Error::Config("match must consider title or snippet".into()));
        }
        Ok(())
    }
}

/// A field split into runs of plain and highlighted text, entities decoded.
fn segments(field: &str) -> Vec<(String, bool)> {
    let mut out = Vec::new();
    let mut rest = field;
    let mut bold = false;
    loop {
        let marker = if bold { CLOSE } else { OPEN };
        let stray = if bold { OPEN } else { CLOSE };
        let next = rest.find(marker);
        let next_stray = rest.find(stray);
        match (next, next_stray) {
            (Some(i), Some(j)) if j < i => {
                out.push((rest[..j].to_string(), bold));
                rest = &rest[j + stray.len()..];
            }
            (Some(i), _) => {
                out.push((rest[..i].to_string(), bold));
                rest = &rest[i + marker.len()..];
                bold = !bold;
            }
            (None, Some(j)) => {
                out.push((rest[..j].to_string(), bold));
                rest = &rest[j + stray.len()..];
            }
            (None, None) => {
                out.push((rest.to_string(), bold));
                break;
            }
        }
    }
    out.retain(|(s, _)| !s.is_empty());
    out.into_iter()
        .map(|(s, b)| (html_escape::decode_html_entities(&s).into_owned(), b))
        .collect()
}

/// Removes `<b>`/`</b>` markers and decodes HTML entities.
pub fn strip_markers(field: &str) -> String {
    segments(field).into_iter().map(|(s, _)| s).collect()
}

fn field_fragments(field: &str, out: &mut Vec<String>) {
    out.extend(segments(field).into_iter().filter(|(_, b)| *b).map(|(s, _)| s));
}

/// Highlighted substrings of the title then the snippet, in order.
/// A `<b>` without a closing marker extends to the end of its field.
pub fn highlighted_fragments(result: &WebResult) -> Vec<String> {
    let mut out = Vec::new();
    field_fragments(&result.title, &mut out);
    field_fragments(&result.snippet, &mut out);
    out
}

fn normalize_term(token: &str) -> Option<String> {
    let t = trim_punct(token);
    (!t.is_empty()).then(|| t.to_lowercase())
}

/// Terms a highlighted field makes available: the words of each fragment,
/// plus every whitespace token whose letters and digits are all highlighted
/// (so `<b>Covid</b>-<b>19</b>` yields `covid-19`).
fn field_terms(field: &str, terms: &mut HashSet<String>) {
    let segs = segments(field);
    for (s, bold) in &segs {
        if *bold {
            terms.extend(word_tokens(s).into_iter().filter_map(normalize_term));
        }
    }
    let mut token = String::new();
    let mut all_bold = true;
    let mut any_alnum = false;
    let mut flush = |token: &mut String, all_bold: &mut bool, any_alnum: &mut bool| {
        if !token.is_empty() && *all_bold && *any_alnum {
            if let Some(t) = normalize_term(token) {
                terms.insert(t);
            }
        }
        token.clear();
        *all_bold = true;
        *any_alnum = false;
    };
    for (s, bold) in &segs {
        for c in s.chars() {
            if c.is_whitespace() {
                flush(&mut token, &mut all_bold, &mut any_alnum);
                continue;
            }
            if c.is_alphanumeric() {
                any_alnum = true;
                all_bold &= *bold;
            }
            token.push(c);
        }
    }
    flush(&mut token, &mut all_bold, &mut any_alnum);
}

/// Highlighted terms of one result, lowercased and punctuation-trimmed.
pub fn highlighted_terms(result: &WebResult, fields: Fields) -> HashSet<String> {
    let mut terms = HashSet::new();
    if fields.title {
        field_terms(&result.title, &mut terms);
    }
    if fields.snippet {
        field_terms(&result.snippet, &mut terms);
    }
    terms
}

/// Unique non-stopword query terms, lowercased and punctuation-trimmed.
pub fn query_terms(query: &str, stopwords: &Stopwords) -> HashSet<String> {
    word_tokens(query)
        .into_iter()
        .filter_map(normalize_term)
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Fraction of unique non-stopword query terms that are highlighted in the
/// result. A query with no such terms scores 0.
pub fn match_score(query: &str, result: &WebResult, cfg: &MatchConfig) -> f64 {
    let wanted = query_terms(query, &cfg.stopwords);
    if wanted.is_empty() {
        return 0.0;
    }
    let have = highlighted_terms(result, cfg.fields);
    let present = wanted.iter().filter(|t| have.contains(*t)).count();
    present as f64 / wanted.len() as f64
}

pub fn score_all(query: &str, results: &[WebResult], cfg: &MatchConfig) -> Vec<f64> {
    results.iter().map(|r| match_score(query, r, cfg)).collect()
}

/// 1-based position of the first result meeting the threshold, with its score.
pub fn first_match(query: &str, results: &[WebResult], cfg: &MatchConfig) -> Option<(u32, f64)> {
    first_meeting(&score_all(query, results, cfg), cfg.threshold)
}

pub fn first_meeting(scores: &[f64], threshold: f64) -> Option<(u32, f64)> {
    scores
        .iter()
        .position(|s| meets(*s, threshold))
        .map(|i| (i as u32 + 1, scores[i]))
}
