//! Descriptive statistics over validated and enriched records. Every figure
//! is a pure fold over its input.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dedup::DedupCluster;
use crate::error::{Error, Result};
use crate::model::{Corpus, EnrichedRecord, Label, NewsItem, WebResult};
use crate::ratings::{RatingClass, RatingTable};
use crate::textprep::{contains_url, split_sentences, trim_punct, word_tokens};

pub const DOMAIN_RULES: &str = include_str!("../resources/domain_rules.txt");

/// Bucket for links without a parseable host.
pub const INVALID_BUCKET: &str = "invalid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub corpus: Corpus,
    /// `None` for the row covering both labels.
    pub label: Option<Label>,
    pub records: usize,
    pub mean_words: f64,
    /// Characters per word, punctuation trimmed, over all words in the group.
    pub mean_word_length: f64,
    pub mean_sentences: f64,
    /// Total words over total sentences.
    pub mean_words_per_sentence: f64,
    pub url_rate: f64,
}

#[derive(Debug, Default, Clone, Copy)]
struct TextAcc {
    records: usize,
    words: usize,
    chars: usize,
    sentences: usize,
    with_url: usize,
}

impl TextAcc {
    fn add(&mut self, it: &NewsItem) {
        let words = word_tokens(&it.text);
        self.records += 1;
        self.words += words.len();
        self.chars += words.iter().map(|w| trim_punct(w).chars().count()).sum::<usize>();
        self.sentences += split_sentences(&it.text).len();
        self.with_url += usize::from(contains_url(it.raw_text()));
    }

    fn merge(&mut self, o: TextAcc) {
        self.records += o.records;
        self.words += o.words;
        self.chars += o.chars;
        self.sentences += o.sentences;
        self.with_url += o.with_url;
    }

    fn row(&self, corpus: Corpus, label: Option<Label>) -> StatsRow {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        StatsRow {
            corpus,
            label,
            records: self.records,
            mean_words: ratio(self.words, self.records),
            mean_word_length: ratio(self.chars, self.words),
            mean_sentences: ratio(self.sentences, self.records),
            mean_words_per_sentence: ratio(self.words, self.sentences),
            url_rate: ratio(self.with_url, self.records),
        }
    }
}

/// One row per (corpus, label) plus one per corpus with `label: None`.
/// URL presence looks at `text_raw` when a record carries it.
pub fn text_stats(items: &[NewsItem]) -> Vec<StatsRow> {
    let mut groups: BTreeMap<(String, Option<Label>), (Corpus, TextAcc)> = BTreeMap::new();
    for it in items {
        let mut one = TextAcc::default();
        one.add(it);
        for label in [Some(it.label), None] {
            groups
                .entry((it.corpus.as_str().to_string(), label))
                .or_insert_with(|| (it.corpus.clone(), TextAcc::default()))
                .1
                .merge(one);
        }
    }
    groups.into_iter().map(|((_, l), (c, acc))| acc.row(c, l)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainRules(Vec<(String, String)>);

impl DomainRules {
    pub fn parse(src: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (n, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (suffix, bucket) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("domain rules line {}: expected suffix<TAB>bucket", n + 1)))?;
            rules.push((suffix.trim().to_lowercase(), bucket.trim().to_string()));
        }
        Ok(DomainRules(rules))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        Self::parse(&src)
    }

    /// First matching suffix rule, else the registrable domain, else the
    /// host itself (IP addresses, unknown suffixes).
    pub fn bucket(&self, link: &str) -> String {
        let parsed = url::Url::parse(link.trim()).ok();
        let host = match parsed.as_ref().and_then(|u| u.host()) {
            Some(url::Host::Domain(d)) if !d.trim_end_matches('.').is_empty() => d.trim_end_matches('.').to_lowercase(),
            Some(url::Host::Domain(_)) | None => return INVALID_BUCKET.to_string(),
            Some(ip) => return ip.to_string(),
        };
        for (suffix, bucket) in &self.0 {
            if host == *suffix || host.ends_with(&format!(".{suffix}")) {
                return bucket.clone();
            }
        }
        psl::domain_str(&host).unwrap_or(&host).to_string()
    }
}

impl Default for DomainRules {
    fn default() -> Self {
        Self::parse(DOMAIN_RULES).expect("builtin domain rules parse")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainDistribution {
    pub initial: BTreeMap<String, usize>,
    pub claim: BTreeMap<String, usize>,
    pub combined: BTreeMap<String, usize>,
}

pub fn domain_distribution(records: &[EnrichedRecord], rules: &DomainRules) -> DomainDistribution {
    let mut d = DomainDistribution::default();
    let count = |into: &mut BTreeMap<String, usize>, combined: &mut BTreeMap<String, usize>, rs: &[WebResult]| {
        for r in rs {
            let b = rules.bucket(&r.link);
            *combined.entry(b.clone()).or_default() += 1;
            *into.entry(b).or_default() += 1;
        }
    };
    for r in records {
        count(&mut d.initial, &mut d.combined, &r.initial_results);
        if let Some(cr) = &r.claim_results {
            count(&mut d.claim, &mut d.combined, cr);
        }
    }
    d
}

/// Trim and lowercase; used for publisher names and ratings alike.
pub fn normalize_key(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingDistribution {
    /// (publisher, rating) → count; both keys trimmed and lowercased.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub total: usize,
    /// Results whose rating maps to `true` in the shared rating table.
    pub true_count: usize,
}

impl RatingDistribution {
    pub fn publisher_total(&self, publisher: &str) -> usize {
        self.counts.get(&normalize_key(publisher)).map_or(0, |m| m.values().sum())
    }

    pub fn true_share(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.true_count as f64 / self.total as f64
        }
    }
}

pub fn rating_distribution(records: &[EnrichedRecord], table: &RatingTable) -> RatingDistribution {
    let mut d = RatingDistribution::default();
    for r in records.iter().flat_map(|r| &r.factcheck_results) {
        *d.counts
            .entry(normalize_key(&r.publisher_name))
            .or_default()
            .entry(normalize_key(&r.textual_rating))
            .or_default() += 1;
        d.total += 1;
        if table.classify(&r.textual_rating) == RatingClass::True {
            d.true_count += 1;
        }
    }
    d
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histograms {
    pub match_index: BTreeMap<u32, usize>,
    pub review_year: BTreeMap<i32, usize>,
    pub reviews_without_date: usize,
    pub cluster_size: BTreeMap<usize, usize>,
}

pub fn histograms(records: &[EnrichedRecord], clusters: &[DedupCluster]) -> Histograms {
    use chrono::Datelike;
    let mut h = Histograms::default();
    for r in records {
        if let Some(i) = r.match_index {
            *h.match_index.entry(i).or_default() += 1;
        }
        for f in &r.factcheck_results {
            match f.review_date {
                Some(d) => *h.review_year.entry(d.year()).or_default() += 1,
                None => h.reviews_without_date += 1,
            }
        }
    }
    for c in clusters {
        *h.cluster_size.entry(c.member_ids.len()).or_default() += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub text: Vec<StatsRow>,
    pub domains: DomainDistribution,
    pub ratings: RatingDistribution,
    pub histograms: Histograms,
}

pub fn analyze(
    records: &[EnrichedRecord],
    clusters: &[DedupCluster],
    rules: &DomainRules,
    table: &RatingTable,
) -> AnalyticsReport {
    let items: Vec<NewsItem> = records.iter().map(|r| r.item.clone()).collect();
    AnalyticsReport {
        text: text_stats(&items),
        domains: domain_distribution(records, rules),
        ratings: rating_distribution(records, table),
        histograms: histograms(records, clusters),
    }
}

impl AnalyticsReport {
    /// Plain-text rendering, one table per section.
    pub fn render(&self) -> String {
        let mut o = String::from("# text statistics\ncorpus\tlabel\trecords\twords\tword_len\tsentences\twords_per_sentence\turl_rate\n");
        for r in &self.text {
            o.push_str(&format!(
                "{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.3}\n",
                r.corpus,
                r.label.map_or("all", Label::as_str),
                r.records,
                r.mean_words,
                r.mean_word_length,
                r.mean_sentences,
                r.mean_words_per_sentence,
                r.url_rate
            ));
        }
        let mut domains: Vec<(&String, &usize)> = self.domains.combined.iter().collect();
        domains.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        o.push_str("\n# domains\nbucket\tinitial\tclaim\tcombined\n");
        for (b, n) in domains {
            let get = |m: &BTreeMap<String, usize>| m.get(b).copied().unwrap_or(0);
            o.push_str(&format!("{b}\t{}\t{}\t{n}\n", get(&self.domains.initial), get(&self.domains.claim)));
        }
        o.push_str("\n# ratings\npublisher\trating\tcount\n");
        for (p, m) in &self.ratings.counts {
            for (r, n) in m {
                o.push_str(&format!("{p}\t{r}\t{n}\n"));
            }
        }
        o.push_str(&format!(
            "true\t{}\tof\t{}\n",
            self.ratings.true_count, self.ratings.total
        ));
        let h = &self.histograms;
        o.push_str("\n# match position\n");
        for (k, v) in &h.match_index {
            o.push_str(&format!("{k}\t{v}\n"));
        }
        o.push_str("\n# review year\n");
        for (k, v) in &h.review_year {
            o.push_str(&format!("{k}\t{v}\n"));
        }
        o.push_str(&format!("undated\t{}\n", h.reviews_without_date));
        o.push_str("\n# cluster size\n");
        for (k, v) in &h.cluster_size {
            o.push_str(&format!("{k}\t{v}\n"));
        }
        o
    }
}
