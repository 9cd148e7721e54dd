//! Text normalization: quote/emoji/URL stripping, tokenization, stopwords,
//! sentence segmentation, search-query construction and LLM-input truncation.

use std::collections::HashSet;
use std::path::Path;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QueryKind;

pub const STOPWORDS_PT: &str = include_str!("../resources/stopwords_pt.txt");
pub const QUOTES: &str = include_str!("../resources/quotes.txt");
pub const EMOJI_RANGES: &str = include_str!("../resources/emoji_ranges.txt");
pub const ABBREVIATIONS_PT: &str = include_str!("../resources/abbreviations_pt.txt");

fn resource_lines(src: &str) -> impl Iterator<Item = &str> {
    src.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn parse_hex(s: &str) -> u32 {
    u32::from_str_radix(s, 16).unwrap_or_else(|_| panic!("bad hex code point {s:?} in resource"))
}

static QUOTE_SET: LazyLock<HashSet<char>> = LazyLock::new(|| {
    resource_lines(QUOTES)
        .filter_map(|l| l.split_whitespace().next())
        .filter_map(|h| char::from_u32(parse_hex(h)))
        .collect()
});

static EMOJI_TABLE: LazyLock<Vec<(u32, u32)>> = LazyLock::new(|| {
    let mut ranges: Vec<(u32, u32)> = resource_lines(EMOJI_RANGES)
        .filter_map(|l| l.split_whitespace().next())
        .map(|r| match r.split_once("..") {
            Some((a, b)) => (parse_hex(a), parse_hex(b)),
            None => (parse_hex(r), parse_hex(r)),
        })
        .collect();
    ranges.sort_unstable();
    ranges
});

static ABBREVIATIONS: LazyLock<HashSet<String>> =
    LazyLock::new(|| resource_lines(ABBREVIATIONS_PT).map(str::to_lowercase).collect());

static DEFAULT_STOPWORDS: LazyLock<Stopwords> =
    LazyLock::new(|| Stopwords::parse(STOPWORDS_PT).expect("shipped stopword list is valid"));

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|ftp://|\bwww\.)\S+").unwrap());

/// Case-insensitive Portuguese stopword set.
#[derive(Debug, Clone)]
pub struct Stopwords(Arc<HashSet<String>>);

impl Stopwords {
    pub fn parse(src: &str) -> Result<Self> {
        let set: HashSet<String> = resource_lines(src).map(str::to_lowercase).collect();
        if set.is_empty() {
            return Err(Error::Config("stopword list is empty".into()));
        }
        Ok(Stopwords(Arc::new(set)))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        Self::parse(&src)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        DEFAULT_STOPWORDS.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryConfig {
    pub passthrough_max_words: usize,
    pub min_first_sentence_words: usize,
    pub min_first_paragraph_words: usize,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            passthrough_max_words: 20,
            min_first_sentence_words: 7,
            min_first_paragraph_words: 20,
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.passthrough_max_words == 0
            || self.min_first_sentence_words == 0
            || self.min_first_paragraph_words == 0
        {
            return Err(Error::Config("query thresholds must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmInputConfig {
    pub max_paragraphs: usize,
    pub max_words: usize,
}

impl Default for LlmInputConfig {
    fn default() -> Self {
        LlmInputConfig {
            max_paragraphs: 3,
            max_words: 75,
        }
    }
}

impl LlmInputConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_paragraphs == 0 || self.max_words == 0 {
            return Err(Error::Config("LLM input caps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TokenFilterConfig {
    pub stopwords: Stopwords,
    pub min_content_tokens: usize,
}

impl Default for TokenFilterConfig {
    fn default() -> Self {
        TokenFilterConfig {
            stopwords: Stopwords::default(),
            min_content_tokens: 15,
        }
    }
}

pub fn is_quote(c: char) -> bool {
    QUOTE_SET.contains(&c)
}

pub fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    let table = &*EMOJI_TABLE;
    let idx = table.partition_point(|&(start, _)| start <= cp);
    idx > 0 && cp <= table[idx - 1].1
}

pub fn strip_quotes(text: &str) -> String {
    text.chars().filter(|c| !is_quote(*c)).collect()
}

pub fn strip_emoji(text: &str) -> String {
    text.chars().filter(|c| !is_emoji(*c)).collect()
}

pub fn contains_url(text: &str) -> bool {
    URL_RE.is_match(text)
}

pub fn find_urls(text: &str) -> Vec<&str> {
    URL_RE.find_iter(text).map(|m| m.as_str()).collect()
}

fn is_hspace(c: char) -> bool {
    c.is_whitespace() && c != '\n' && c != '\r'
}

/// Removes scheme-prefixed and `www.` URLs. Horizontal whitespace around a
/// removed URL collapses to one space, or to nothing at a line edge.
pub fn strip_urls(text: &str) -> String {
    if !URL_RE.is_match(text) {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = 0;
    for m in URL_RE.find_iter(text) {
        if m.start() < rest {
            continue;
        }
        out.push_str(&text[rest..m.start()]);
        let trimmed_len = out.trim_end_matches(is_hspace).len();
        out.truncate(trimmed_len);
        let after = &text[m.end()..];
        let skip = after.len() - after.trim_start_matches(is_hspace).len();
        rest = m.end() + skip;
        let next = text[rest..].chars().next();
        let at_line_start = out.is_empty() || out.ends_with(['\n', '\r']);
        let at_line_end = matches!(next, None | Some('\n') | Some('\r'));
        if !at_line_start && !at_line_end {
            out.push(' ');
        }
    }
    out.push_str(&text[rest..]);
    out
}

/// Maximal runs of non-whitespace.
pub fn word_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '}' | '"' | '\'' | '»' | '”' | '’')
}

/// Rule-based Portuguese sentence segmentation.
///
/// A sentence ends after a run of `.`, `!`, `?` or `…` (plus closing quotes or
/// brackets) that is followed by whitespace or the end of the text. A lone
/// period after a listed abbreviation (`Sr.`, `Dra.`, `etc.`) does not split.
/// Line breaks always end a sentence, so no sentence spans two paragraphs.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for line in text.split('\n') {
        split_line(line, &mut out);
    }
    out
}

fn split_line<'a>(text: &'a str, out: &mut Vec<&'a str>) {
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if !is_terminator(c) {
            continue;
        }
        let mut end = i + c.len_utf8();
        let mut run_is_single_dot = c == '.';
        while let Some(&(j, d)) = iter.peek() {
            if is_terminator(d) {
                run_is_single_dot = false;
                end = j + d.len_utf8();
                iter.next();
            } else {
                break;
            }
        }
        while let Some(&(j, d)) = iter.peek() {
            if is_closer(d) {
                end = j + d.len_utf8();
                iter.next();
            } else {
                break;
            }
        }
        let at_boundary = text[end..].chars().next().map_or(true, char::is_whitespace);
        if !at_boundary {
            continue;
        }
        if run_is_single_dot && is_abbreviation(&text[start..i]) {
            continue;
        }
        let sentence = text[start..end].trim();
        if !sentence.is_empty() {
            out.push(sentence);
        }
        start = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
}

fn is_abbreviation(before_dot: &str) -> bool {
    let word = before_dot
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric());
    !word.is_empty() && ABBREVIATIONS.contains(&word.to_lowercase())
}

/// Paragraphs separated by runs of newlines.
pub fn paragraphs(text: &str) -> impl Iterator<Item = &str> {
    text.split('\n').filter(|p| !p.is_empty())
}

/// Builds the search query for a text that is already quote- and emoji-stripped.
pub fn build_query(text: &str, cfg: &QueryConfig) -> Result<(String, QueryKind)> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Precondition("query text is empty".into()));
    }
    let words = word_tokens(text);
    if words.len() <= cfg.passthrough_max_words {
        return Ok((text.to_string(), QueryKind::FullText));
    }
    let first_sentence = split_sentences(text).into_iter().next().unwrap_or(text);
    if word_count(first_sentence) >= cfg.min_first_sentence_words {
        return Ok((first_sentence.to_string(), QueryKind::FirstSentence));
    }
    let first_paragraph = paragraphs(text).next().unwrap_or(text);
    if word_count(first_paragraph) < cfg.min_first_paragraph_words {
        let head = words[..cfg.passthrough_max_words].join(" ");
        Ok((head, QueryKind::First20Words))
    } else {
        Ok((first_paragraph.to_string(), QueryKind::FirstParagraph))
    }
}

/// The first `max_paragraphs` paragraphs, cut to at most `max_words` words
/// without splitting a word. Original spacing inside the kept span is preserved.
pub fn llm_input(text: &str, cfg: &LlmInputConfig) -> String {
    let text = text.trim();
    let mut end = text.len();
    let mut seen = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let content = line.trim_end_matches(['\n', '\r']);
        if !content.trim().is_empty() {
            seen += 1;
            if seen == cfg.max_paragraphs {
                end = offset + content.len();
                break;
            }
        }
        offset += line.len();
    }
    let kept = &text[..end];
    let mut words = 0;
    let mut cut = kept.len();
    let mut in_word = false;
    for (i, c) in kept.char_indices() {
        if c.is_whitespace() {
            if in_word && words == cfg.max_words {
                cut = i;
                break;
            }
            in_word = false;
        } else if !in_word {
            in_word = true;
            words += 1;
        }
    }
    kept[..cut].trim_end().to_string()
}

/// Strips non-alphanumeric characters from both ends of a token.
pub fn trim_punct(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Number of non-stopword tokens left after removing emoji, URLs and
/// every non-alphanumeric character.
pub fn content_token_count(text: &str, cfg: &TokenFilterConfig) -> usize {
    let cleaned = strip_urls(&strip_emoji(text));
    cleaned
        .split_whitespace()
        .map(|t| t.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
        .filter(|t| !t.is_empty() && !cfg.stopwords.contains(t))
        .count()
}
