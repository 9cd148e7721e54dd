//! Train/validation/test splits, classification data configurations,
//! few-shot LLM classification and accuracy / macro-F1 scoring.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::strip_markers;
use crate::model::{Corpus, EnrichedRecord, ErrorEvent, ErrorKind, Label, NewsItem, Stage, WebResult};
use crate::providers::{LlmRequest, Service};

pub const SOCIAL_DOMAINS: &str = include_str!("../resources/social_domains.txt");
pub const PROMPT_BASE: &str = include_str!("../resources/prompts/classify_base.txt");
pub const PROMPT_CONTEXT: &str = include_str!("../resources/prompts/classify_context.txt");
pub const PROMPT_ANSWER: &str = include_str!("../resources/prompts/classify_answer.txt");

pub const SHOT_COUNT: usize = 15;
pub const TAG_FAKE: &str = "FAKE NEWS";
pub const TAG_TRUE: &str = "VERDADEIRO";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    /// Keep both members of a pair in the same partition.
    pub pair_preserving: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: 3,
            pair_preserving: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|x| !(0.0..=1.0).contains(x)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios {r:?} must be in [0,1] and sum to 1")));
        }
        Ok(())
    }

    /// Partition sizes for `units` units: floors of the exact shares, with
    /// the leftover units going to the largest fractional parts.
    pub fn sizes(&self, units: usize) -> [usize; 3] {
        let exact = [self.train, self.val, self.test].map(|r| r * units as f64);
        let mut sizes = exact.map(|x| x.floor() as usize);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let mut left = units - sizes.iter().sum::<usize>();
        for i in order.into_iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffles units (records, or pairs when pair-preserving) with the seed and
/// cuts them by `spec.sizes`. Records keep their input order inside each
/// partition.
pub fn split<T: Clone>(records: &[T], item: impl Fn(&T) -> &NewsItem, spec: &SplitSpec) -> Result<Splits<T>> {
    spec.validate()?;
    let mut units: Vec<Vec<usize>> = if spec.pair_preserving {
        let mut by_pair: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        let mut units = Vec::new();
        for (i, r) in records.iter().enumerate() {
            let it = item(r);
            match it.pair_id.as_deref() {
                Some(pid) => by_pair.entry(pid).or_default().push(i),
                None if it.corpus == Corpus::FakeBr => {
                    return Err(Error::Schema(format!("record {} has no pair_id", it.id)))
                }
                // Unpaired records from other corpora are their own unit.
                None => units.push(vec![i]),
            }
        }
        for (pid, members) in by_pair {
            let labels: HashSet<Label> = members.iter().map(|&i| item(&records[i]).label).collect();
            if members.len() != 2 || labels.len() != 2 {
                return Err(Error::Schema(format!("pair {pid} is not one fake and one true record")));
            }
            units.push(members);
        }
        units
    } else {
        if let Some(r) = records.iter().find(|r| item(r).corpus == Corpus::FakeBr) {
            return Err(Error::Precondition(format!(
                "Fake.br record {} requires a pair-preserving split",
                item(r).id
            )));
        }
        (0..records.len()).map(|i| vec![i]).collect()
    };
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let [a, b, _] = spec.sizes(units.len());
    let mut part = vec![0u8; records.len()];
    for (u, members) in units.iter().enumerate() {
        let p = if u < a { 0 } else if u < a + b { 1 } else { 2 };
        members.iter().for_each(|&i| part[i] = p);
    }
    let mut out = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (r, p) in records.iter().zip(part) {
        match p {
            0 => out.train.push(r.clone()),
            1 => out.val.push(r.clone()),
            _ => out.test.push(r.clone()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigKind {
    Original,
    Validated,
    EnrichedFull,
    EnrichedFiltered,
}

impl ConfigKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConfigKind::Original => "original",
            ConfigKind::Validated => "validated",
            ConfigKind::EnrichedFull => "enriched_full",
            ConfigKind::EnrichedFiltered => "enriched_filtered",
        }
    }

    pub fn is_enriched(self) -> bool {
        matches!(self, ConfigKind::EnrichedFull | ConfigKind::EnrichedFiltered)
    }
}

impl FromStr for ConfigKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "original" => ConfigKind::Original,
            "validated" => ConfigKind::Validated,
            "enriched_full" | "enriched-full" => ConfigKind::EnrichedFull,
            "enriched_filtered" | "enriched-filtered" => ConfigKind::EnrichedFiltered,
            _ => return Err(Error::Config(format!("unknown data configuration {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSource {
    None,
    FirstResult,
    FirstResultNoSocial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataConfiguration {
    pub kind: ConfigKind,
    pub context_source: ContextSource,
    /// Registrable domains skipped by `FirstResultNoSocial`.
    pub social_domains: HashSet<String>,
}

pub fn parse_domain_list(src: &str) -> HashSet<String> {
    src.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

impl DataConfiguration {
    /// The context source implied by the kind, with the shipped social list.
    pub fn new(kind: ConfigKind) -> Self {
        DataConfiguration {
            kind,
            context_source: match kind {
                ConfigKind::Original | ConfigKind::Validated => ContextSource::None,
                ConfigKind::EnrichedFull => ContextSource::FirstResult,
                ConfigKind::EnrichedFiltered => ContextSource::FirstResultNoSocial,
            },
            social_domains: parse_domain_list(SOCIAL_DOMAINS),
        }
    }

    pub fn with_social_file(mut self, path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        self.social_domains = parse_domain_list(&src);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kind.is_enriched() && self.context_source != ContextSource::None {
            return Err(Error::Config(format!(
                "{} configuration cannot carry context",
                self.kind.as_str()
            )));
        }
        Ok(())
    }

    fn is_social(&self, link: &str) -> bool {
        let host = url::Url::parse(link)
            .ok()
            .and_then(|u| u.host_str().map(str::to_lowercase))
            .unwrap_or_default();
        let domain = psl::domain_str(&host).unwrap_or(&host);
        self.social_domains.contains(domain)
    }
}

/// One classification example: the record plus its evidence context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(flatten)]
    pub item: NewsItem,
    pub context: String,
}

pub fn instances_from_items(items: &[NewsItem]) -> Vec<Instance> {
    items
        .iter()
        .map(|it| Instance {
            item: it.clone(),
            context: String::new(),
        })
        .collect()
}

fn result_line(r: &WebResult) -> String {
    let title = strip_markers(&r.title);
    let snippet = strip_markers(&r.snippet);
    format!("{} {}", title.trim(), snippet.trim()).trim().to_string()
}

/// Context for one record: first usable web result from the branch that
/// fired, then the first fact-check rating when present.
pub fn context_for(rec: &EnrichedRecord, cfg: &DataConfiguration) -> String {
    let results: &[WebResult] = match (&rec.claim, &rec.claim_results) {
        (Some(_), Some(cr)) => cr,
        (Some(_), None) => &[],
        (None, _) => &rec.initial_results,
    };
    let mut lines = Vec::new();
    let first = match cfg.context_source {
        ContextSource::None => return String::new(),
        ContextSource::FirstResult => results.first(),
        ContextSource::FirstResultNoSocial => results.iter().find(|r| !cfg.is_social(&r.link)),
    };
    if let Some(r) = first {
        lines.push(result_line(r));
    }
    if let Some(f) = rec.factcheck_results.first() {
        lines.push(format!("{}: {} ({})", f.publisher_name, f.textual_rating, f.claim_text));
    }
    lines.retain(|l| !l.is_empty());
    lines.join("\n")
}

pub fn build_config(records: &[EnrichedRecord], cfg: &DataConfiguration) -> Result<Vec<Instance>> {
    cfg.validate()?;
    Ok(records
        .iter()
        .map(|r| Instance {
            item: r.item.clone(),
            context: context_for(r, cfg),
        })
        .collect())
}

/// Seeded draw of exactly `SHOT_COUNT` shots from the training partition.
pub fn draw_shots(train: &[Instance], seed: u64) -> Result<Vec<Instance>> {
    if train.len() < SHOT_COUNT {
        return Err(Error::Precondition(format!(
            "{} training instances, {SHOT_COUNT} shots needed",
            train.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, train.len(), SHOT_COUNT).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| train[i].clone()).collect())
}

fn tag(label: Label) -> &'static str {
    match label {
        Label::Fake => TAG_FAKE,
        Label::True => TAG_TRUE,
    }
}

fn block(out: &mut String, inst: &Instance, with_context: bool, answer: Option<Label>) {
    out.push_str("Texto: ");
    out.push_str(inst.item.text.trim());
    out.push('\n');
    if with_context {
        out.push_str("Contexto: ");
        out.push_str(inst.context.trim());
        out.push('\n');
    }
    out.push_str("Resposta:");
    if let Some(l) = answer {
        out.push(' ');
        out.push_str(tag(l));
    }
}

/// Base instructions, the context clause when the target has context, the
/// answer instruction, the shots and finally the open target block.
pub fn classification_prompt(shots: &[Instance], target: &Instance) -> String {
    let with_context = !target.context.trim().is_empty();
    let mut p = String::from(PROMPT_BASE.trim_end());
    if with_context {
        p.push_str("\n\n");
        p.push_str(PROMPT_CONTEXT.trim_end());
    }
    p.push_str("\n\n");
    p.push_str(PROMPT_ANSWER.trim_end());
    for s in shots {
        p.push_str("\n\n");
        block(&mut p, s, with_context, Some(s.item.label));
    }
    p.push_str("\n\n");
    block(&mut p, target, with_context, None);
    p
}

/// Label of the last exact, case-sensitive tag in the output.
pub fn parse_tag(output: &str) -> Option<Label> {
    match (output.rfind(TAG_FAKE), output.rfind(TAG_TRUE)) {
        (Some(f), Some(t)) => Some(if f > t { Label::Fake } else { Label::True }),
        (Some(_), None) => Some(Label::Fake),
        (None, Some(_)) => Some(Label::True),
        (None, None) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    /// `None` is an abstention.
    pub label: Option<Label>,
    pub raw_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorEvent>,
}

#[derive(Debug, Clone)]
pub struct ClassifySettings {
    pub model: String,
    pub knobs: BTreeMap<String, String>,
    pub parallelism: usize,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        ClassifySettings {
            model: "gemini-1.5-flash".into(),
            knobs: BTreeMap::new(),
            parallelism: 1,
        }
    }
}

pub fn few_shot_classify(
    instances: &[Instance],
    shots: &[Instance],
    svc: &Service,
    settings: &ClassifySettings,
) -> Result<Vec<Prediction>> {
    if shots.len() != SHOT_COUNT {
        return Err(Error::Precondition(format!("{} shots given, exactly {SHOT_COUNT} required", shots.len())));
    }
    let shot_ids: HashSet<&str> = shots.iter().map(|s| s.item.id.as_str()).collect();
    if let Some(i) = instances.iter().find(|i| shot_ids.contains(i.item.id.as_str())) {
        return Err(Error::Precondition(format!("instance {} is also a shot", i.item.id)));
    }
    crate::par::try_map(instances, settings.parallelism, |inst| {
        let mut req = LlmRequest::new(classification_prompt(shots, inst));
        req.model = settings.model.clone();
        req.knobs = settings.knobs.clone();
        Ok(match svc.llm_generate(&req) {
            Ok(resp) => Prediction {
                id: inst.item.id.clone(),
                label: parse_tag(&resp.value),
                raw_output: resp.value,
                error: None,
            },
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => Prediction {
                id: inst.item.id.clone(),
                label: None,
                raw_output: String::new(),
                error: Some(ErrorEvent::new(Stage::Classification, ErrorKind::ProviderFailure, e.to_string())),
            },
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// `confusion[gold][predicted]`, index 0 = fake, 1 = true.
    pub confusion: [[usize; 2]; 2],
    pub abstentions: usize,
    pub per_class_f1: BTreeMap<Label, f64>,
}

fn idx(l: Label) -> usize {
    match l {
        Label::Fake => 0,
        Label::True => 1,
    }
}

/// Accuracy and macro-F1. Abstentions count as wrong: a false negative for
/// the gold class and nobody's false positive. Macro-F1 averages the
/// classes that occur in gold or predictions.
pub fn score(predictions: &[Option<Label>], gold: &[Label]) -> Result<EvalResult> {
    if predictions.len() != gold.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::Precondition("nothing to score".into()));
    }
    let mut confusion = [[0usize; 2]; 2];
    let mut abstain_by_gold = [0usize; 2];
    for (p, g) in predictions.iter().zip(gold) {
        match p {
            Some(p) => confusion[idx(*g)][idx(*p)] += 1,
            None => abstain_by_gold[idx(*g)] += 1,
        }
    }
    let n = gold.len();
    let correct = confusion[0][0] + confusion[1][1];
    let mut per_class_f1 = BTreeMap::new();
    for l in [Label::Fake, Label::True] {
        let c = idx(l);
        let tp = confusion[c][c];
        let fp = confusion[1 - c][c];
        let fn_ = confusion[c][1 - c] + abstain_by_gold[c];
        let present = gold.contains(&l) || predictions.contains(&Some(l));
        if present {
            per_class_f1.insert(l, 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
        }
    }
    let macro_f1 = per_class_f1.values().sum::<f64>() / per_class_f1.len() as f64;
    Ok(EvalResult {
        n,
        accuracy: correct as f64 / n as f64,
        macro_f1,
        confusion,
        abstentions: abstain_by_gold.iter().sum(),
        per_class_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClaimReviewResult, QueryKind};
    use crate::providers::{llm_body, FnTransport, ProviderPolicy, ProviderRequest, VirtualClock};
    use std::sync::Arc;

    fn plain(n: usize) -> Vec<NewsItem> {
        (0..n)
            .map(|i| NewsItem::new(format!("r{i}"), Corpus::MuminPt, format!("texto {i}"), if i % 2 == 0 { Label::Fake } else { Label::True }))
            .collect()
    }

    fn paired(n: usize) -> Vec<NewsItem> {
        (0..n)
            .flat_map(|i| {
                [Label::Fake, Label::True].map(|l| {
                    NewsItem::new(format!("{l}_{i}"), Corpus::FakeBr, format!("texto {l} {i}"), l).with_pair(i.to_string())
                })
            })
            .collect()
    }

    #[test]
    fn sizes_follow_largest_remainder() {
        let s = SplitSpec::default();
        assert_eq!(s.sizes(10), [8, 1, 1]);
        assert_eq!(s.sizes(0), [0, 0, 0]);
        assert_eq!(s.sizes(7), [5, 1, 1]);
        for n in 0..200 {
            let z = s.sizes(n);
            assert_eq!(z.iter().sum::<usize>(), n);
            assert!((z[0] as f64 - 0.8 * n as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn unpaired_split_is_exact_and_seeded() {
        let items = plain(10);
        let s = split(&items, |x| x, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        assert_eq!(s, split(&items, |x| x, &SplitSpec::default()).unwrap());
    }

    #[test]
    fn paired_split_keeps_pairs_together() {
        let items = paired(10);
        let spec = SplitSpec {
            pair_preserving: true,
            ..SplitSpec::default()
        };
        let s = split(&items, |x| x, &spec).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (16, 2, 2));
        for part in [&s.train, &s.val, &s.test] {
            let mut pids: Vec<&str> = part.iter().map(|i| i.pair_id.as_deref().unwrap()).collect();
            pids.sort();
            assert!(pids.chunks(2).all(|c| c.len() == 2 && c[0] == c[1]));
        }
    }

    #[test]
    fn paired_split_treats_unpaired_records_as_units() {
        let mut items = paired(4);
        items.extend(plain(2));
        let spec = SplitSpec {
            pair_preserving: true,
            ..SplitSpec::default()
        };
        let s = split(&items, |x| x, &spec).unwrap();
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 10);
        for part in [&s.train, &s.val, &s.test] {
            let mut pids: Vec<&str> = part.iter().filter_map(|i| i.pair_id.as_deref()).collect();
            pids.sort();
            assert!(pids.chunks(2).all(|c| c.len() == 2 && c[0] == c[1]));
        }
    }

    #[test]
    fn split_errors() {
        let mut items = paired(3);
        items.pop();
        let spec = SplitSpec {
            pair_preserving: true,
            ..SplitSpec::default()
        };
        assert!(split(&items, |x| x, &spec).is_err());
        assert!(split(&paired(3), |x| x, &SplitSpec::default()).is_err());
        let bad = SplitSpec {
            train: 0.9,
            ..SplitSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    fn web(link: &str, title: &str) -> WebResult {
        WebResult {
            title: title.into(),
            link: link.into(),
            snippet: "trecho &amp; <b>mais</b>".into(),
            rank: 1,
        }
    }

    fn enriched() -> EnrichedRecord {
        let item = NewsItem::new("a", Corpus::MuminPt, "texto", Label::Fake);
        let mut r = EnrichedRecord::bare(item, "texto".into(), QueryKind::FullText);
        r.initial_results = vec![
            web("https://www.facebook.com/post/1", "Post"),
            web("https://g1.globo.com/x", "<b>Notícia</b>"),
        ];
        r.match_score_per_result = vec![1.0, 0.0];
        r.match_index = Some(1);
        r
    }

    #[test]
    fn contexts() {
        let r = enriched();
        let full = build_config(std::slice::from_ref(&r), &DataConfiguration::new(ConfigKind::EnrichedFull)).unwrap();
        assert_eq!(full[0].context, "Post trecho & mais");
        let filt = build_config(std::slice::from_ref(&r), &DataConfiguration::new(ConfigKind::EnrichedFiltered)).unwrap();
        assert_eq!(filt[0].context, "Notícia trecho & mais");
        let val = build_config(std::slice::from_ref(&r), &DataConfiguration::new(ConfigKind::Validated)).unwrap();
        assert_eq!(val[0].context, "");
        let mut bad = DataConfiguration::new(ConfigKind::Original);
        bad.context_source = ContextSource::FirstResult;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn context_includes_factcheck_and_claim_branch() {
        let mut r = enriched();
        r.match_index = None;
        r.claim = Some("alegação".into());
        r.claim_results = Some(vec![web("https://aosfatos.org/y", "Checagem")]);
        r.factcheck_results = vec![ClaimReviewResult {
            claim_text: "alegação".into(),
            claimant: None,
            publisher_name: "Aos Fatos".into(),
            publisher_site: "aosfatos.org".into(),
            textual_rating: "Falso".into(),
            review_date: None,
            review_url: String::new(),
            rank: 1,
        }];
        let c = context_for(&r, &DataConfiguration::new(ConfigKind::EnrichedFull));
        assert_eq!(c, "Checagem trecho & mais\nAos Fatos: Falso (alegação)");
    }

    #[test]
    fn instance_roundtrip_keeps_context() {
        let inst = Instance {
            item: NewsItem::new("a", Corpus::Covid19Br, "t", Label::True),
            context: "ctx".into(),
        };
        let s = serde_json::to_string(&inst).unwrap();
        assert_eq!(serde_json::from_str::<Instance>(&s).unwrap(), inst);
    }

    #[test]
    fn tag_parsing() {
        assert_eq!(parse_tag("FAKE NEWS"), Some(Label::Fake));
        assert_eq!(parse_tag("Resposta: VERDADEIRO."), Some(Label::True));
        assert_eq!(parse_tag("não sei"), None);
        assert_eq!(parse_tag("fake news"), None);
        assert_eq!(parse_tag("Não é VERDADEIRO, é FAKE NEWS"), Some(Label::Fake));
        assert_eq!(parse_tag("FAKE NEWS? Não: VERDADEIRO"), Some(Label::True));
    }

    #[test]
    fn prompt_context_clause_follows_target() {
        let shots = instances_from_items(&plain(SHOT_COUNT));
        let mut target = instances_from_items(&[NewsItem::new("t", Corpus::MuminPt, "alvo", Label::Fake)]).remove(0);
        let p = classification_prompt(&shots, &target);
        assert!(!p.contains(PROMPT_CONTEXT.trim()));
        assert!(p.starts_with(PROMPT_BASE.trim()));
        assert!(p.ends_with("Texto: alvo\nResposta:"));
        assert_eq!(p.matches("Resposta: FAKE NEWS").count() + p.matches("Resposta: VERDADEIRO").count(), SHOT_COUNT);
        target.context = "resultado".into();
        let p = classification_prompt(&shots, &target);
        assert!(p.contains(PROMPT_CONTEXT.trim()));
        assert!(p.ends_with("Contexto: resultado\nResposta:"));
    }

    #[test]
    fn classify_with_stub() {
        let t = FnTransport(|_: &ProviderRequest| Ok(llm_body("FAKE NEWS")));
        let svc = Service::new(Arc::new(t), ProviderPolicy::default(), Arc::new(VirtualClock::default()));
        let all = instances_from_items(&plain(20));
        let (shots, rest) = all.split_at(SHOT_COUNT);
        let preds = few_shot_classify(rest, shots, &svc, &ClassifySettings::default()).unwrap();
        assert!(preds.iter().all(|p| p.label == Some(Label::Fake)));
        assert!(few_shot_classify(rest, &shots[1..], &svc, &ClassifySettings::default()).is_err());
        assert!(few_shot_classify(shots, shots, &svc, &ClassifySettings::default()).is_err());
    }

    #[test]
    fn score_examples() {
        let gold = [Label::Fake, Label::True, Label::Fake, Label::True];
        let r = score(&gold.map(Some), &gold).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (1.0, 1.0));
        let r = score(&[Some(Label::Fake); 4], &gold).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
        let r = score(&[None, Some(Label::True), Some(Label::Fake), Some(Label::True)], &gold).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.abstentions, 1);
        assert!(score(&[], &[]).is_err());
        assert!(matches!(score(&[None], &[]), Err(Error::LengthMismatch { .. })));
    }
}
