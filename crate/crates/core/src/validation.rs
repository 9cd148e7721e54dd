//! Staged corpus validation: automatic filters, contradiction and external
//! label checks feeding a human review queue, decision application,
//! Fake.br pair rules and final URL removal.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dedup::{find_near_duplicates, DedupCluster, DedupConfig};
use crate::error::{Error, Result};
use crate::langid::LanguageDetector;
use crate::model::{Corpus, ErrorEvent, ErrorKind, Label, NewsItem, Stage};
use crate::providers::{FactCheckRequest, Service};
use crate::ratings::RatingTable;
use crate::textprep::{
    build_query, content_token_count, find_urls, strip_emoji, strip_quotes, strip_urls, QueryConfig,
    TokenFilterConfig,
};

/// Rows of the validation summary, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStage {
    InitialFilter,
    LanguageFilter,
    ContradictionResolution,
    ExternalLabelCheck,
    SubsetInspection,
    FakebrSpecific,
}

impl ValidationStage {
    pub const ALL: [ValidationStage; 6] = [
        ValidationStage::InitialFilter,
        ValidationStage::LanguageFilter,
        ValidationStage::ContradictionResolution,
        ValidationStage::ExternalLabelCheck,
        ValidationStage::SubsetInspection,
        ValidationStage::FakebrSpecific,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValidationStage::InitialFilter => "initial_filter",
            ValidationStage::LanguageFilter => "language_filter",
            ValidationStage::ContradictionResolution => "contradiction_resolution",
            ValidationStage::ExternalLabelCheck => "external_label_check",
            ValidationStage::SubsetInspection => "subset_inspection",
            ValidationStage::FakebrSpecific => "fakebr_specific",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub id: String,
    pub old_label: Label,
    pub new_label: Label,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    /// Records removed or corrected at this stage.
    pub count: usize,
    pub removed: Vec<Removal>,
    pub corrected: Vec<Correction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub input_count: usize,
    pub output_count: usize,
    pub stages: BTreeMap<ValidationStage, StageEntry>,
}

impl ValidationReport {
    pub fn new(input_count: usize) -> Self {
        ValidationReport {
            input_count,
            output_count: input_count,
            stages: ValidationStage::ALL.iter().map(|s| (*s, StageEntry::default())).collect(),
        }
    }

    fn entry(&mut self, stage: ValidationStage) -> &mut StageEntry {
        self.stages.entry(stage).or_default()
    }

    pub fn remove(&mut self, stage: ValidationStage, id: &str, reason: impl Into<String>) {
        let e = self.entry(stage);
        e.removed.push(Removal {
            id: id.to_string(),
            reason: reason.into(),
        });
        e.count += 1;
        self.output_count -= 1;
    }

    pub fn correct(&mut self, stage: ValidationStage, c: Correction) {
        let e = self.entry(stage);
        e.corrected.push(c);
        e.count += 1;
    }

    /// Folds a fragment produced on this report's current output.
    pub fn absorb(&mut self, frag: ValidationReport) {
        debug_assert_eq!(frag.input_count, self.output_count);
        for (stage, e) in frag.stages {
            let mine = self.entry(stage);
            mine.count += e.count;
            mine.removed.extend(e.removed);
            mine.corrected.extend(e.corrected);
        }
        self.output_count = frag.output_count;
    }

    pub fn count(&self, stage: ValidationStage) -> usize {
        self.stages.get(&stage).map_or(0, |e| e.count)
    }

    pub fn removed_ids(&self, stage: ValidationStage) -> Vec<&str> {
        self.stages
            .get(&stage)
            .map(|e| e.removed.iter().map(|r| r.id.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn total_removed(&self) -> usize {
        self.stages.values().map(|e| e.removed.len()).sum()
    }

    /// Counter/list agreement, unique removal stage per id, conservation.
    pub fn check(&self) -> std::result::Result<(), String> {
        let mut seen = HashSet::new();
        for (stage, e) in &self.stages {
            if e.count != e.removed.len() + e.corrected.len() {
                return Err(format!("{} counter disagrees with its lists", stage.as_str()));
            }
            for r in &e.removed {
                if !seen.insert(r.id.as_str()) {
                    return Err(format!("{} removed more than once", r.id));
                }
            }
        }
        if self.input_count != self.output_count + self.total_removed() {
            return Err(format!(
                "input {} != output {} + removed {}",
                self.input_count,
                self.output_count,
                self.total_removed()
            ));
        }
        Ok(())
    }

    /// Plain-text table with one row per stage.
    pub fn summary(&self) -> String {
        let mut out = String::from("stage\tremoved\tcorrected\ttotal\n");
        for s in ValidationStage::ALL {
            let e = self.stages.get(&s).cloned().unwrap_or_default();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                s.as_str(),
                e.removed.len(),
                e.corrected.len(),
                e.count
            ));
        }
        out.push_str(&format!("input\t{}\noutput\t{}\n", self.input_count, self.output_count));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewKind {
    NearDupConflict,
    SharedUrlConflict,
    ExternalLabelConflict,
    RandomInspection,
    LanguageReview,
}

impl ReviewKind {
    pub fn stage(self) -> ValidationStage {
        match self {
            ReviewKind::NearDupConflict | ReviewKind::SharedUrlConflict => ValidationStage::ContradictionResolution,
            ReviewKind::ExternalLabelConflict => ValidationStage::ExternalLabelCheck,
            ReviewKind::RandomInspection => ValidationStage::SubsetInspection,
            ReviewKind::LanguageReview => ValidationStage::LanguageFilter,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ReviewKind::NearDupConflict => "near_dup_conflict",
            ReviewKind::SharedUrlConflict => "shared_url_conflict",
            ReviewKind::ExternalLabelConflict => "external_label_conflict",
            ReviewKind::RandomInspection => "random_inspection",
            ReviewKind::LanguageReview => "language_review",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Relabel,
    Remove,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    /// Subset of the item's ids the action applies to; empty means all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<String>,
    /// New label for `relabel`; defaults to the suggested label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    pub decider: String,
    pub decided_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub review_id: String,
    pub kind: ReviewKind,
    pub item_ids: Vec<String>,
    pub evidence: String,
    pub suggested_action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
}

impl ReviewItem {
    /// The id hashes the kind and the sorted member ids, so regenerating
    /// the queue on the same input yields the same ids.
    pub fn new(kind: ReviewKind, mut item_ids: Vec<String>, evidence: impl Into<String>, action: Action) -> Self {
        item_ids.sort();
        item_ids.dedup();
        let mut h = Sha256::new();
        h.update(kind.as_str());
        for id in &item_ids {
            h.update([0x1f]);
            h.update(id);
        }
        ReviewItem {
            review_id: hex::encode(&h.finalize()[..8]),
            kind,
            item_ids,
            evidence: evidence.into(),
            suggested_action: action,
            suggested_label: None,
            decision: None,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.suggested_label = Some(label);
        self
    }

    pub fn adjudicate(&mut self, d: Decision) -> Result<()> {
        if self.decision.is_some() {
            return Err(Error::AlreadyAdjudicated(self.review_id.clone()));
        }
        if let Some(t) = d.targets.iter().find(|t| !self.item_ids.contains(t)) {
            return Err(Error::UnknownId(format!("{t} is not part of review {}", self.review_id)));
        }
        if d.action == Action::Relabel && d.label.or(self.suggested_label).is_none() {
            return Err(Error::Precondition(format!(
                "relabel decision for {} needs a label",
                self.review_id
            )));
        }
        self.decision = Some(d);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LanguageConfig {
    pub target: String,
    /// Non-target detections at or above this confidence are removed
    /// automatically; below it they go to review.
    pub auto_remove_confidence: f64,
}

impl Default for LanguageConfig {
    fn default() -> Self {
        LanguageConfig {
            target: "pt".into(),
            auto_remove_confidence: 0.95,
        }
    }
}

/// Removes exact text duplicates (lowest id kept), URL-only texts and texts
/// with too few content tokens.
pub fn filter_initial(items: Vec<NewsItem>, cfg: &TokenFilterConfig) -> (Vec<NewsItem>, ValidationReport) {
    let mut report = ValidationReport::new(items.len());
    let stage = ValidationStage::InitialFilter;
    let mut keeper: HashMap<&str, &str> = HashMap::new();
    for it in &items {
        keeper
            .entry(it.text.as_str())
            .and_modify(|k| {
                if it.id.as_str() < *k {
                    *k = it.id.as_str();
                }
            })
            .or_insert(it.id.as_str());
    }
    let mut drop: HashMap<String, String> = HashMap::new();
    for it in &items {
        let k = keeper[it.text.as_str()];
        let reason = if k != it.id {
            format!("exact duplicate of {k}")
        } else if strip_urls(&it.text).trim().is_empty() {
            "text is only URLs".into()
        } else {
            let n = content_token_count(&it.text, cfg);
            if n >= cfg.min_content_tokens {
                continue;
            }
            format!("{n} content tokens")
        };
        drop.insert(it.id.clone(), reason);
    }
    let kept = items
        .into_iter()
        .filter(|it| match drop.remove(&it.id) {
            Some(reason) => {
                report.remove(stage, &it.id, reason);
                false
            }
            None => true,
        })
        .collect();
    (kept, report)
}

/// Removes confident non-target detections; sends borderline detections and
/// detector failures to review.
pub fn filter_language(
    items: Vec<NewsItem>,
    detector: &dyn LanguageDetector,
    cfg: &LanguageConfig,
) -> (Vec<NewsItem>, Vec<ReviewItem>, ValidationReport) {
    let mut report = ValidationReport::new(items.len());
    let mut review = Vec::new();
    let mut kept = Vec::with_capacity(items.len());
    for it in items {
        match detector.detect(&it.text) {
            Ok(d) if d.lang == cfg.target => kept.push(it),
            Ok(d) if d.confidence >= cfg.auto_remove_confidence => {
                report.remove(
                    ValidationStage::LanguageFilter,
                    &it.id,
                    format!("detected {} ({:.3})", d.lang, d.confidence),
                );
            }
            Ok(d) => {
                review.push(ReviewItem::new(
                    ReviewKind::LanguageReview,
                    vec![it.id.clone()],
                    format!("detected {} ({:.3})", d.lang, d.confidence),
                    Action::Remove,
                ));
                kept.push(it);
            }
            Err(e) => {
                review.push(ReviewItem::new(
                    ReviewKind::LanguageReview,
                    vec![it.id.clone()],
                    format!("detector failed: {e}"),
                    Action::Keep,
                ));
                kept.push(it);
            }
        }
    }
    (kept, review, report)
}

fn normalize_url(u: &str) -> String {
    u.trim_end_matches(|c: char| "'\".,;:!?)]}>".contains(c))
        .trim_end_matches('/')
        .to_lowercase()
}

fn labels_of<'a>(ids: impl Iterator<Item = &'a str>, by_id: &HashMap<&str, &NewsItem>) -> String {
    ids.filter_map(|id| by_id.get(id).map(|it| format!("{id}={}", it.label)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Review items for near-duplicate clusters and shared URLs whose records
/// carry both labels.
pub fn flag_contradictions(items: &[NewsItem], clusters: &[DedupCluster]) -> Vec<ReviewItem> {
    let by_id: HashMap<&str, &NewsItem> = items.iter().map(|it| (it.id.as_str(), it)).collect();
    let mixed = |ids: &[&str]| {
        let labels: HashSet<Label> = ids.iter().filter_map(|id| by_id.get(id)).map(|it| it.label).collect();
        labels.len() == 2
    };
    let mut out = Vec::new();
    for c in clusters {
        let ids: Vec<&str> = c.member_ids.iter().map(String::as_str).collect();
        if mixed(&ids) {
            out.push(ReviewItem::new(
                ReviewKind::NearDupConflict,
                ids.iter().map(|s| s.to_string()).collect(),
                format!(
                    "near duplicates (min jaccard {:.3}) with labels {}",
                    c.pairwise_min_jaccard,
                    labels_of(ids.iter().copied(), &by_id)
                ),
                Action::Remove,
            ));
        }
    }
    let mut by_url: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for it in items {
        for u in find_urls(&it.text) {
            by_url.entry(normalize_url(u)).or_default().insert(it.id.as_str());
        }
    }
    for (url, ids) in by_url {
        let ids: Vec<&str> = ids.into_iter().collect();
        if ids.len() > 1 && mixed(&ids) {
            out.push(ReviewItem::new(
                ReviewKind::SharedUrlConflict,
                ids.iter().map(|s| s.to_string()).collect(),
                format!("{url} cited with labels {}", labels_of(ids.iter().copied(), &by_id)),
                Action::Remove,
            ));
        }
    }
    out
}

/// Fact-check lookups whose first decisive rating contradicts the record
/// label. Never relabels; provider trouble is reported per record.
pub fn check_external_labels(
    items: &[NewsItem],
    svc: &Service,
    ratings: &RatingTable,
    query: &QueryConfig,
    parallelism: usize,
) -> Result<(Vec<ReviewItem>, Vec<(String, ErrorEvent)>)> {
    enum Outcome {
        Item(ReviewItem),
        Error(ErrorEvent),
        Nothing,
    }
    let outcomes = crate::par::try_map(items, parallelism, |it| {
        let Ok((q, _)) = build_query(&strip_emoji(&strip_quotes(&it.text)), query) else {
            return Ok(Outcome::Nothing);
        };
        let reviews = match svc.factcheck_search(&FactCheckRequest::new(q)) {
            Ok(r) => r.value,
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => {
                return Ok(Outcome::Error(ErrorEvent::new(
                    Stage::FactcheckSearch,
                    ErrorKind::ProviderFailure,
                    e.to_string(),
                )))
            }
        };
        let decisive = reviews
            .iter()
            .find_map(|r| ratings.classify(&r.textual_rating).label().map(|l| (r, l)));
        Ok(match decisive {
            Some((r, l)) if l != it.label => Outcome::Item(
                ReviewItem::new(
                    ReviewKind::ExternalLabelConflict,
                    vec![it.id.clone()],
                    format!("{}: {} ({})", r.publisher_name, r.textual_rating, r.claim_text),
                    Action::Relabel,
                )
                .with_label(l),
            ),
            _ => Outcome::Nothing,
        })
    })?;
    let mut review = Vec::new();
    let mut errors = Vec::new();
    for (it, o) in items.iter().zip(outcomes) {
        match o {
            Outcome::Item(r) => review.push(r),
            Outcome::Error(e) => errors.push((it.id.clone(), e)),
            Outcome::Nothing => {}
        }
    }
    Ok((review, errors))
}

/// Seeded uniform sample of records for manual inspection.
pub fn sample_for_inspection(items: &[NewsItem], size: usize, seed: u64) -> Vec<ReviewItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, items.len(), size.min(items.len())).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| {
            ReviewItem::new(
                ReviewKind::RandomInspection,
                vec![items[i].id.clone()],
                "random inspection sample",
                Action::Keep,
            )
        })
        .collect()
}

/// Applies adjudicated review items. Removals and relabels are attributed
/// to the stage that raised the item.
pub fn apply_decisions(items: Vec<NewsItem>, reviews: &[ReviewItem]) -> Result<(Vec<NewsItem>, ValidationReport)> {
    let mut report = ValidationReport::new(items.len());
    let index: HashMap<String, usize> = items.iter().enumerate().map(|(i, it)| (it.id.clone(), i)).collect();
    let mut items: Vec<Option<NewsItem>> = items.into_iter().map(Some).collect();
    for r in reviews {
        let d = r
            .decision
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("review {} has no decision", r.review_id)))?;
        let targets: &[String] = if d.targets.is_empty() { &r.item_ids } else { &d.targets };
        let stage = r.kind.stage();
        for t in targets {
            let &i = index
                .get(t)
                .ok_or_else(|| Error::UnknownId(format!("review {} refers to {t}", r.review_id)))?;
            let Some(it) = items[i].as_mut() else { continue };
            match d.action {
                Action::Keep => {}
                Action::Remove => {
                    report.remove(stage, t, format!("review {} by {}", r.review_id, d.decider));
                    items[i] = None;
                }
                Action::Relabel => {
                    let new = d.label.or(r.suggested_label).ok_or_else(|| {
                        Error::Precondition(format!("relabel decision for {} needs a label", r.review_id))
                    })?;
                    if new != it.label {
                        report.correct(
                            stage,
                            Correction {
                                id: t.clone(),
                                old_label: it.label,
                                new_label: new,
                                reason: format!("review {} by {}", r.review_id, d.decider),
                            },
                        );
                        it.label = new;
                    }
                }
            }
        }
    }
    Ok((items.into_iter().flatten().collect(), report))
}

/// Fake.br rules: near duplicates sharing a source URL keep the lowest id;
/// listed incomplete records go; then every record without an intact
/// fake/true partner goes.
pub fn fakebr_rules(
    items: Vec<NewsItem>,
    clusters: &[DedupCluster],
    incomplete_ids: &BTreeSet<String>,
) -> Result<(Vec<NewsItem>, ValidationReport)> {
    let stage = ValidationStage::FakebrSpecific;
    let mut report = ValidationReport::new(items.len());
    let is_fakebr = |it: &NewsItem| it.corpus == Corpus::FakeBr;
    if let Some(it) = items.iter().find(|it| is_fakebr(it) && it.pair_id.is_none()) {
        return Err(Error::Schema(format!("Fake.br record {} has no pair_id", it.id)));
    }
    let by_id: HashMap<&str, &NewsItem> = items.iter().map(|it| (it.id.as_str(), it)).collect();
    let mut drop: BTreeMap<String, String> = BTreeMap::new();
    for c in clusters {
        let mut by_source: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for id in &c.member_ids {
            if let Some(it) = by_id.get(id.as_str()).filter(|it| is_fakebr(it)) {
                if let Some(src) = it.source_url.as_deref() {
                    by_source.entry(src).or_default().push(id);
                }
            }
        }
        for ids in by_source.values() {
            // member_ids is ordered, so ids[0] is the lowest.
            for id in &ids[1..] {
                drop.entry(id.to_string())
                    .or_insert_with(|| format!("near duplicate of {} with the same source URL", ids[0]));
            }
        }
    }
    for it in &items {
        if incomplete_ids.contains(&it.id) {
            drop.entry(it.id.clone()).or_insert_with(|| "listed as incomplete".into());
        }
    }
    let mut pairs: BTreeMap<&str, Vec<&NewsItem>> = BTreeMap::new();
    for it in items.iter().filter(|it| is_fakebr(it) && !drop.contains_key(&it.id)) {
        pairs.entry(it.pair_id.as_deref().unwrap()).or_default().push(it);
    }
    for (pid, members) in &pairs {
        match members.as_slice() {
            [a, b] if a.label != b.label => {}
            [_] => {
                drop.insert(members[0].id.clone(), format!("pair {pid} lost its partner"));
            }
            [_, _] => {
                for m in members {
                    drop.insert(m.id.clone(), format!("pair {pid} has matching labels"));
                }
            }
            _ => return Err(Error::Schema(format!("pair {pid} has {} members", members.len()))),
        }
    }
    let kept = items
        .into_iter()
        .filter(|it| match drop.remove(&it.id) {
            Some(reason) => {
                report.remove(stage, &it.id, reason);
                false
            }
            None => true,
        })
        .collect();
    Ok((kept, report))
}

/// Removes URLs from every text, keeping the original under `text_raw`
/// when something changed.
pub fn strip_record_urls(items: Vec<NewsItem>) -> Vec<NewsItem> {
    items
        .into_iter()
        .map(|mut it| {
            let stripped = strip_urls(&it.text).trim().to_string();
            if stripped != it.text {
                let raw = std::mem::replace(&mut it.text, stripped);
                it.extra.entry("text_raw".into()).or_insert(raw);
            }
            it
        })
        .collect()
}

/// Reads a list of record ids, one per line; `#` starts a comment.
pub fn read_id_list(path: &Path) -> Result<BTreeSet<String>> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    Ok(src
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub tokens: TokenFilterConfig,
    pub language: LanguageConfig,
    pub dedup: DedupConfig,
    pub query: QueryConfig,
    pub ratings: RatingTable,
    pub sample_size: usize,
    pub sample_seed: u64,
    pub incomplete_ids: BTreeSet<String>,
    pub parallelism: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            tokens: TokenFilterConfig::default(),
            language: LanguageConfig::default(),
            dedup: DedupConfig::default(),
            query: QueryConfig::default(),
            ratings: RatingTable::default(),
            sample_size: 100,
            sample_seed: 3,
            incomplete_ids: BTreeSet::new(),
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationOutcome {
    pub records: Vec<NewsItem>,
    pub report: ValidationReport,
    /// Every item raised this run, with decisions merged in by review id,
    /// followed by supplied decisions that were not regenerated.
    pub review_queue: Vec<ReviewItem>,
    pub errors: Vec<(String, ErrorEvent)>,
}

fn clusters_of(items: &[NewsItem], cfg: &DedupConfig) -> Result<Vec<DedupCluster>> {
    let docs: Vec<(&str, String)> = items.iter().map(|it| (it.id.as_str(), strip_quotes(&it.text))).collect();
    Ok(find_near_duplicates(&docs, cfg)?.clusters)
}

/// Runs every stage in order. Pending review items leave records as they
/// are; `decisions` carries adjudicated items from an earlier queue.
pub fn run_pipeline(
    items: Vec<NewsItem>,
    cfg: &ValidationConfig,
    detector: &dyn LanguageDetector,
    factcheck: Option<&Service>,
    decisions: &[ReviewItem],
) -> Result<ValidationOutcome> {
    let mut report = ValidationReport::new(items.len());
    let (items, frag) = filter_initial(items, &cfg.tokens);
    report.absorb(frag);
    let (items, mut queue, frag) = filter_language(items, detector, &cfg.language);
    report.absorb(frag);
    queue.extend(flag_contradictions(&items, &clusters_of(&items, &cfg.dedup)?));
    let mut errors = Vec::new();
    if let Some(svc) = factcheck {
        let (r, e) = check_external_labels(&items, svc, &cfg.ratings, &cfg.query, cfg.parallelism)?;
        queue.extend(r);
        errors = e;
    }
    queue.extend(sample_for_inspection(&items, cfg.sample_size, cfg.sample_seed));

    let decided: HashMap<&str, &ReviewItem> = decisions
        .iter()
        .filter(|r| r.decision.is_some())
        .map(|r| (r.review_id.as_str(), r))
        .collect();
    let mut seen = HashSet::new();
    for q in &mut queue {
        if let Some(d) = decided.get(q.review_id.as_str()) {
            q.decision = d.decision.clone();
        }
        seen.insert(q.review_id.clone());
    }
    queue.extend(decisions.iter().filter(|r| r.decision.is_some() && !seen.contains(&r.review_id)).cloned());

    let adjudicated: Vec<ReviewItem> = queue.iter().filter(|r| r.decision.is_some()).cloned().collect();
    let (items, frag) = apply_decisions(items, &adjudicated)?;
    report.absorb(frag);
    let clusters = clusters_of(&items, &cfg.dedup)?;
    let (items, frag) = fakebr_rules(items, &clusters, &cfg.incomplete_ids)?;
    report.absorb(frag);
    let records = strip_record_urls(items);
    debug_assert_eq!(report.check(), Ok(()));
    Ok(ValidationOutcome {
        records,
        report,
        review_queue: queue,
        errors,
    })
}
