//! The per-record evidence flow: query, web search, match decision, claim
//! extraction fallback, claim search and fact-check search.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::claim::{extract_claim, ClaimError, ClaimPromptTemplate, ClaimSettings};
use crate::error::{Error, Result};
use crate::matching::{first_meeting, score_all, MatchConfig};
use crate::model::{
    ClaimReviewResult, EnrichedRecord, ErrorEvent, ErrorKind, FactcheckQuery, NewsItem, QueryKind,
    Stage, WebResult,
};
use crate::providers::{FactCheckRequest, ProviderError, Response, Service, WebSearchRequest};
use crate::textprep::{build_query, strip_emoji, strip_quotes, QueryConfig};

#[derive(Debug, Clone)]
pub struct EnrichConfig {
    pub query: QueryConfig,
    pub matching: MatchConfig,
    pub template: ClaimPromptTemplate,
    pub claim: ClaimSettings,
    pub num_results: u32,
    pub factcheck_page_size: u32,
    /// Optional country restriction for web search; off by default.
    pub country: Option<String>,
}

impl Default for EnrichConfig {
    fn default() -> Self {
        EnrichConfig {
            query: QueryConfig::default(),
            matching: MatchConfig::default(),
            template: ClaimPromptTemplate::default(),
            claim: ClaimSettings::default(),
            num_results: 5,
            factcheck_page_size: 5,
            country: None,
        }
    }
}

impl EnrichConfig {
    pub fn validate(&self) -> Result<()> {
        self.query.validate()?;
        self.matching.validate()?;
        self.claim.input.validate()?;
        if !(1..=10).contains(&self.num_results) || !(1..=10).contains(&self.factcheck_page_size) {
            return Err(Error::Config("result counts must lie in 1..=10".into()));
        }
        Ok(())
    }

    fn web_request(&self, query: &str) -> WebSearchRequest {
        let mut r = WebSearchRequest::new(query);
        r.num = self.num_results;
        r.country = self.country.clone();
        r
    }

    fn factcheck_request(&self, query: &str) -> FactCheckRequest {
        let mut r = FactCheckRequest::new(query);
        r.page_size = self.factcheck_page_size;
        r
    }
}

/// Search text for a string: quotes and emoji removed, trimmed.
fn search_text(s: &str) -> String {
    strip_emoji(&strip_quotes(s)).trim().to_string()
}

struct Run<'a> {
    rec: EnrichedRecord,
    svc: &'a Service,
}

impl Run<'_> {
    fn error(&mut self, stage: Stage, kind: ErrorKind, detail: impl Into<String>) {
        self.rec.errors.push(ErrorEvent::new(stage, kind, detail));
    }

    /// Records the outcome timestamp; a fatal provider error aborts the run.
    fn settle<T>(
        &mut self,
        stage: Stage,
        outcome: std::result::Result<Response<T>, ProviderError>,
    ) -> Result<Option<T>> {
        match outcome {
            Ok(resp) => {
                self.rec.timestamps.insert(stage, resp.captured_at);
                Ok(Some(resp.value))
            }
            Err(e) if e.is_fatal() => Err(e.into()),
            Err(e) => {
                self.rec.timestamps.insert(stage, self.svc.clock().now());
                self.error(stage, ErrorKind::ProviderFailure, e.to_string());
                Ok(None)
            }
        }
    }

    fn web(&mut self, stage: Stage, cfg: &EnrichConfig, query: &str) -> Result<Option<Vec<WebResult>>> {
        let out = self.svc.web_search(&cfg.web_request(query));
        let results = self.settle(stage, out)?;
        if results.as_ref().is_some_and(Vec::is_empty) {
            self.error(stage, ErrorKind::EmptyResults, format!("no results for {query:?}"));
        }
        Ok(results)
    }

    fn factcheck(&mut self, cfg: &EnrichConfig, query: &str) -> Result<Vec<ClaimReviewResult>> {
        let out = self.svc.factcheck_search(&cfg.factcheck_request(query));
        Ok(self.settle(Stage::FactcheckSearch, out)?.unwrap_or_default())
    }
}

/// Runs the full flow for one record. Provider trouble is recorded on the
/// record; only configuration or fixture-store errors are returned.
pub fn enrich_one(item: &NewsItem, cfg: &EnrichConfig, svc: &Service) -> Result<EnrichedRecord> {
    let cleaned = search_text(&item.text);
    let (query, kind) = match build_query(&cleaned, &cfg.query) {
        Ok(q) => q,
        Err(_) => {
            let mut rec = EnrichedRecord::bare(item.clone(), String::new(), QueryKind::FullText);
            rec.timestamps.insert(Stage::InitialSearch, svc.clock().now());
            rec.errors.push(ErrorEvent::new(
                Stage::InitialSearch,
                ErrorKind::ConstraintViolation,
                "text is empty after removing quotes and emoji",
            ));
            return Ok(rec);
        }
    };
    let mut run = Run {
        rec: EnrichedRecord::bare(item.clone(), query.clone(), kind),
        svc,
    };

    let initial = run.web(Stage::InitialSearch, cfg, &query)?.unwrap_or_default();
    let scores = score_all(&query, &initial, &cfg.matching);
    run.rec.match_index = first_meeting(&scores, cfg.matching.threshold).map(|(i, _)| i);
    run.rec.initial_results = initial;
    run.rec.match_score_per_result = scores;

    let mut claim_query = None;
    if run.rec.match_index.is_none() {
        match extract_claim(&item.text, &cfg.template, &cfg.claim, svc) {
            Ok(c) => {
                run.rec.timestamps.insert(Stage::ClaimExtraction, c.captured_at);
                let q = search_text(&c.claim);
                run.rec.claim = Some(c.claim);
                if q.is_empty() {
                    run.error(Stage::ClaimSearch, ErrorKind::EmptyResults, "claim is empty after removing quotes");
                    run.rec.claim_results = Some(Vec::new());
                } else {
                    run.rec.claim_results = run.web(Stage::ClaimSearch, cfg, &q)?;
                    claim_query = Some(q);
                }
            }
            Err(ClaimError::Provider(e)) if e.is_fatal() => return Err(e.into()),
            Err(e) => {
                run.rec.timestamps.insert(Stage::ClaimExtraction, svc.clock().now());
                let kind = match e {
                    ClaimError::Constraint(_) => ErrorKind::ConstraintViolation,
                    ClaimError::Provider(_) => ErrorKind::ProviderFailure,
                };
                run.error(Stage::ClaimExtraction, kind, e.to_string());
            }
        }
    }

    let mut reviews = run.factcheck(cfg, &query)?;
    if !reviews.is_empty() {
        run.rec.factcheck_query_used = FactcheckQuery::Original;
    } else if let Some(q) = &claim_query {
        reviews = run.factcheck(cfg, q)?;
        if !reviews.is_empty() {
            run.rec.factcheck_query_used = FactcheckQuery::Claim;
        }
    }
    run.rec.factcheck_results = reviews;
    debug_assert_eq!(
        run.rec.check(cfg.matching.threshold, cfg.template.max_claim_words),
        Ok(())
    );
    Ok(run.rec)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelStats {
    pub total: usize,
    pub matched_direct: usize,
    pub extraction_needed: usize,
    /// Records with neither a direct match nor an extracted claim.
    pub hard_failed: usize,
    pub claim_search_errors: usize,
    pub factcheck_hits_original: usize,
    pub factcheck_hits_claim: usize,
    /// Records carrying at least one error event.
    pub records_with_errors: usize,
    pub match_index_histogram: BTreeMap<u32, usize>,
}

impl FunnelStats {
    pub fn add(&mut self, r: &EnrichedRecord) {
        self.total += 1;
        if let Some(i) = r.match_index {
            self.matched_direct += 1;
            *self.match_index_histogram.entry(i).or_default() += 1;
        } else if r.claim.is_some() {
            self.extraction_needed += 1;
        } else {
            self.hard_failed += 1;
        }
        if r.errors.iter().any(|e| e.stage == Stage::ClaimSearch) {
            self.claim_search_errors += 1;
        }
        match r.factcheck_query_used {
            FactcheckQuery::Original => self.factcheck_hits_original += 1,
            FactcheckQuery::Claim => self.factcheck_hits_claim += 1,
            FactcheckQuery::None => {}
        }
        if !r.errors.is_empty() {
            self.records_with_errors += 1;
        }
    }

    pub fn from_records(records: &[EnrichedRecord]) -> Self {
        let mut s = FunnelStats::default();
        records.iter().for_each(|r| s.add(r));
        s
    }

    pub fn error_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.records_with_errors as f64 / self.total as f64
        }
    }
}

/// Enriches every item with up to `parallelism` workers. Output order is the
/// input order; stats are accumulated as records are collected.
pub fn enrich_corpus(
    items: &[NewsItem],
    cfg: &EnrichConfig,
    svc: &Service,
    parallelism: usize,
) -> Result<(Vec<EnrichedRecord>, FunnelStats)> {
    cfg.validate()?;
    let records = crate::par::try_map(items, parallelism, |item| enrich_one(item, cfg, svc))?;
    let mut stats = FunnelStats::default();
    records.iter().for_each(|r| stats.add(r));
    Ok((records, stats))
}
