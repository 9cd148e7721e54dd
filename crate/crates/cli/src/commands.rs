use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::Args;
use serde::Serialize;

use evd_core::analytics::{analyze, DomainRules, DOMAIN_RULES};
use evd_core::claim::{ClaimPromptTemplate, TemplateId};
use evd_core::dedup::{find_near_duplicates, DedupCluster, DedupConfig};
use evd_core::enrich::{enrich_corpus, EnrichConfig};
use evd_core::eval::{
    build_config, draw_shots, few_shot_classify, instances_from_items, parse_domain_list, score, split,
    ClassifySettings, ConfigKind, DataConfiguration, Instance, SplitSpec, SOCIAL_DOMAINS,
};
use evd_core::langid::NgramDetector;
use evd_core::model::{Corpus, EnrichedRecord, Label, NewsItem};
use evd_core::ratings::{RatingTable, RATINGS_PT};
use evd_core::records::{read_jsonl, write_jsonl};
use evd_core::textprep::{strip_quotes, Stopwords, TokenFilterConfig, STOPWORDS_PT};
use evd_core::validation::{read_id_list, run_pipeline, Action, Decision, LanguageConfig, ReviewItem, ValidationConfig};

use crate::settings::Settings;
use crate::{get, CliError, Command, Ctx};

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Default: `<out>.review.jsonl`.
    #[arg(long)]
    pub review_out: Option<PathBuf>,
    /// Default: `<out>.report.json`.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Review queue with adjudicated items from an earlier run.
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    #[arg(long)]
    pub incomplete_ids: Option<PathBuf>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub min_content_tokens: Option<usize>,
    #[arg(long)]
    pub ratings: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DedupArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Cluster file, one JSON object per line.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub bands: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReviewArgs {
    #[arg(long)]
    pub queue: PathBuf,
    /// Print pending items and exit.
    #[arg(long, conflicts_with = "id")]
    pub list: bool,
    #[arg(long, requires = "action")]
    pub id: Option<String>,
    /// relabel, remove or keep.
    #[arg(long, requires = "id")]
    pub action: Option<String>,
    #[arg(long)]
    pub label: Option<String>,
    /// Comma-separated subset of the item's record ids.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    #[arg(long, default_value = "unknown")]
    pub decider: String,
    /// RFC 3339 decision time; defaults to now.
    #[arg(long)]
    pub at: Option<DateTime<Utc>>,
}

#[derive(Debug, Args, Serialize)]
pub struct EnrichArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Default: `<out>.stats.json`.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
    #[arg(long)]
    pub match_threshold: Option<f64>,
    #[arg(long)]
    pub claim_template: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Enriched records.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Cluster file from `evd dedup`.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Default: `<out>.txt`.
    #[arg(long)]
    pub text_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// Plain or enriched records.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test: f64,
    /// Default: on when the input holds Fake.br records.
    #[arg(long)]
    pub pair_preserving: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildConfigArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// original, validated, enriched_full or enriched_filtered.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub kind: String,
    /// Predictions, one per test record.
    #[arg(long)]
    pub out: PathBuf,
    /// Default: `<out>.metrics.json`.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
}

/// Settings carried by subcommand flags.
pub fn flag_settings(cmd: &Command) -> Settings {
    let mut s = Settings::default();
    match cmd {
        Command::Validate(a) => {
            s.incomplete_ids = a.incomplete_ids.clone();
            s.sample_size = a.sample_size;
            s.min_content_tokens = a.min_content_tokens;
            s.ratings = a.ratings.clone();
        }
        Command::Dedup(a) => {
            s.dedup_threshold = a.threshold;
            s.num_permutations = a.permutations;
            s.bands = a.bands;
        }
        Command::Enrich(a) => {
            s.match_threshold = a.match_threshold;
            s.claim_template = a.claim_template.clone();
            s.model = a.model.clone();
        }
        Command::Evaluate(a) => s.model = a.model.clone(),
        Command::Review(_) | Command::Analyze(_) | Command::Split(_) | Command::BuildConfig(_) => {}
    }
    s
}

pub fn run(ctx: &Ctx, cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Validate(a) => validate(ctx, a),
        Command::Dedup(a) => dedup(ctx, a),
        Command::Review(a) => review(ctx, a),
        Command::Enrich(a) => enrich(ctx, a),
        Command::Analyze(a) => analyze_cmd(ctx, a),
        Command::Split(a) => split_cmd(ctx, a),
        Command::BuildConfig(a) => build_config_cmd(ctx, a),
        Command::Evaluate(a) => evaluate(ctx, a),
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut name = p.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    p.with_file_name(name)
}

fn prepare(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Run(format!("create {}: {e}", dir.display()))),
        _ => Ok(()),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    prepare(path)?;
    let body = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, body + "\n").map_err(|e| CliError::Run(format!("write {}: {e}", path.display())))
}

fn write_lines<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    prepare(path)?;
    Ok(write_jsonl(path, rows)?)
}

/// One input line: plain corpus record or enriched record.
#[derive(Clone)]
pub struct Row {
    pub line: String,
    pub item: NewsItem,
    pub enriched: Option<EnrichedRecord>,
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Config(format!("open {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Run(format!("read {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |m: String| CliError::Config(format!("{}:{}: {m}", path.display(), idx + 1));
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        let (item, enriched) = if value.get("item").is_some() {
            let rec: EnrichedRecord = serde_json::from_value(value).map_err(|e| at(e.to_string()))?;
            (rec.item.clone(), Some(rec))
        } else {
            (serde_json::from_value::<NewsItem>(value).map_err(|e| at(e.to_string()))?, None)
        };
        item.check().map_err(at)?;
        if let Some(first) = seen.insert(item.id.clone(), idx + 1) {
            return Err(at(format!("duplicate id {:?} (first on line {first})", item.id)));
        }
        rows.push(Row { line, item, enriched });
    }
    Ok(rows)
}

fn stopwords(ctx: &Ctx) -> Result<Stopwords, CliError> {
    let src = ctx.resource("stopwords", ctx.settings.stopwords.as_deref(), STOPWORDS_PT)?;
    Ok(Stopwords::parse(&src)?)
}

fn rating_table(ctx: &Ctx) -> Result<RatingTable, CliError> {
    let src = ctx.resource("ratings", ctx.settings.ratings.as_deref(), RATINGS_PT)?;
    Ok(RatingTable::parse(&src)?)
}

fn dedup_config(ctx: &Ctx) -> Result<DedupConfig, CliError> {
    let cfg = DedupConfig {
        seed: get!(ctx, seed),
        jaccard_threshold: get!(ctx, dedup_threshold),
        permutations: get!(ctx, num_permutations),
        bands: get!(ctx, bands),
        ..DedupConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn validate(ctx: &Ctx, a: &ValidateArgs) -> Result<(), CliError> {
    ctx.input(&a.input)?;
    let items: Vec<NewsItem> = read_rows(&a.input)?.into_iter().map(|r| r.item).collect();
    let decisions: Vec<ReviewItem> = match &a.decisions {
        Some(p) => {
            ctx.input(p)?;
            read_jsonl(p)?
        }
        None => Vec::new(),
    };
    let incomplete_ids = match &ctx.settings.incomplete_ids {
        Some(p) => {
            ctx.input(p)?;
            read_id_list(p)?
        }
        None => BTreeSet::new(),
    };
    let cfg = ValidationConfig {
        tokens: TokenFilterConfig {
            stopwords: stopwords(ctx)?,
            min_content_tokens: get!(ctx, min_content_tokens),
        },
        language: LanguageConfig {
            auto_remove_confidence: get!(ctx, auto_remove_confidence),
            ..LanguageConfig::default()
        },
        dedup: dedup_config(ctx)?,
        ratings: rating_table(ctx)?,
        sample_size: get!(ctx, sample_size),
        sample_seed: get!(ctx, seed),
        incomplete_ids,
        parallelism: ctx.parallelism()?,
        ..ValidationConfig::default()
    };
    let svc = ctx.service()?;
    if svc.is_none() {
        ctx.note("external label check skipped: no provider configured");
    }
    let detector = NgramDetector::default();
    let outcome = run_pipeline(items, &cfg, &detector, svc.as_ref(), &decisions)?;

    let review_out = a.review_out.clone().unwrap_or_else(|| with_suffix(&a.out, ".review.jsonl"));
    let report_out = a.report_out.clone().unwrap_or_else(|| with_suffix(&a.out, ".report.json"));
    write_lines(&a.out, &outcome.records)?;
    write_lines(&review_out, &outcome.review_queue)?;
    write_json(&report_out, &outcome.report)?;
    ctx.finish(a, &a.out, &[&a.out, &review_out, &report_out])?;

    print!("{}", outcome.report.summary());
    let pending = outcome.review_queue.iter().filter(|r| r.decision.is_none()).count();
    println!("review\t{pending} pending of {}", outcome.review_queue.len());
    let failed: BTreeSet<&str> = outcome.errors.iter().map(|(id, _)| id.as_str()).collect();
    ctx.check_error_rate(failed.len(), outcome.report.input_count)
}

fn dedup(ctx: &Ctx, a: &DedupArgs) -> Result<(), CliError> {
    ctx.input(&a.input)?;
    let rows = read_rows(&a.input)?;
    let docs: Vec<(&str, String)> = rows.iter().map(|r| (r.item.id.as_str(), strip_quotes(&r.item.text))).collect();
    let outcome = find_near_duplicates(&docs, &dedup_config(ctx)?)?;
    write_lines(&a.out, &outcome.clusters)?;
    ctx.finish(a, &a.out, &[&a.out])?;
    println!(
        "candidates\t{}\nconfirmed\t{}\nclusters\t{}",
        outcome.candidates,
        outcome.confirmed.len(),
        outcome.clusters.len()
    );
    Ok(())
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Config(format!("unknown {what} {s:?}")))
}

fn review(ctx: &Ctx, a: &ReviewArgs) -> Result<(), CliError> {
    ctx.input(&a.queue)?;
    let mut queue: Vec<ReviewItem> = read_jsonl(&a.queue)?;
    let Some(id) = &a.id else {
        for r in queue.iter().filter(|r| r.decision.is_none()) {
            let kind = serde_json::to_value(r.kind).expect("kind serializes");
            println!(
                "{}\t{}\t{}\t{}",
                r.review_id,
                kind.as_str().unwrap_or_default(),
                r.item_ids.join(","),
                r.evidence
            );
        }
        return Ok(());
    };
    let action: Action = parse_enum("action", a.action.as_deref().unwrap_or_default())?;
    let label = match &a.label {
        Some(l) => Some(Label::parse(l).ok_or_else(|| CliError::Config(format!("unknown label {l:?}")))?),
        None => None,
    };
    let item = queue
        .iter_mut()
        .find(|r| &r.review_id == id)
        .ok_or_else(|| CliError::Config(format!("no review item {id} in {}", a.queue.display())))?;
    item.adjudicate(Decision {
        action,
        targets: a.targets.clone(),
        label,
        decider: a.decider.clone(),
        decided_at: a.at.unwrap_or_else(Utc::now),
    })?;
    write_lines(&a.queue, &queue)?;
    ctx.finish(a, &a.queue, &[&a.queue])
}

fn claim_template(ctx: &Ctx) -> Result<ClaimPromptTemplate, CliError> {
    let id: TemplateId = get!(ctx, claim_template).parse().map_err(CliError::Config)?;
    let builtin = ClaimPromptTemplate::builtin(id);
    let body = ctx.resource("claim_prompt", ctx.settings.claim_prompt.as_deref(), &builtin.body)?;
    let body = body.strip_suffix('\n').unwrap_or(&body);
    Ok(ClaimPromptTemplate::new(id, body, builtin.max_claim_words)?)
}

fn enrich(ctx: &Ctx, a: &EnrichArgs) -> Result<(), CliError> {
    ctx.input(&a.input)?;
    let items: Vec<NewsItem> = read_rows(&a.input)?.into_iter().map(|r| r.item).collect();
    let mut cfg = EnrichConfig::default();
    cfg.matching.threshold = get!(ctx, match_threshold);
    cfg.matching.stopwords = stopwords(ctx)?;
    cfg.template = claim_template(ctx)?;
    cfg.claim.template = cfg.template.template_id;
    cfg.claim.model = get!(ctx, model);
    let svc = ctx.require_service()?;
    let (records, stats) = enrich_corpus(&items, &cfg, &svc, ctx.parallelism()?)?;

    let stats_out = a.stats_out.clone().unwrap_or_else(|| with_suffix(&a.out, ".stats.json"));
    write_lines(&a.out, &records)?;
    write_json(&stats_out, &stats)?;
    ctx.finish(a, &a.out, &[&a.out, &stats_out])?;
    println!(
        "total\t{}\nmatched_direct\t{}\nextraction_needed\t{}\nhard_failed\t{}\nrecords_with_errors\t{}",
        stats.total, stats.matched_direct, stats.extraction_needed, stats.hard_failed, stats.records_with_errors
    );
    ctx.check_error_rate(stats.records_with_errors, stats.total)
}

fn enriched_only(rows: Vec<Row>, path: &Path) -> Result<Vec<EnrichedRecord>, CliError> {
    rows.into_iter()
        .map(|r| {
            r.enriched.ok_or_else(|| {
                CliError::Config(format!("{}: record {:?} is not an enriched record", path.display(), r.item.id))
            })
        })
        .collect()
}

fn analyze_cmd(ctx: &Ctx, a: &AnalyzeArgs) -> Result<(), CliError> {
    ctx.input(&a.input)?;
    let records = enriched_only(read_rows(&a.input)?, &a.input)?;
    let clusters: Vec<DedupCluster> = match &a.clusters {
        Some(p) => {
            ctx.input(p)?;
            read_jsonl(p)?
        }
        None => Vec::new(),
    };
    let rules = DomainRules::parse(&ctx.resource("domain_rules", ctx.settings.domain_rules.as_deref(), DOMAIN_RULES)?)?;
    let report = analyze(&records, &clusters, &rules, &rating_table(ctx)?);
    let text_out = a.text_out.clone().unwrap_or_else(|| with_suffix(&a.out, ".txt"));
    write_json(&a.out, &report)?;
    std::fs::write(&text_out, report.render()).map_err(|e| CliError::Run(format!("write {}: {e}", text_out.display())))?;
    ctx.finish(a, &a.out, &[&a.out, &text_out])
}

fn write_raw(path: &Path, lines: &[&str]) -> Result<(), CliError> {
    prepare(path)?;
    let mut body = String::new();
    for l in lines {
        body.push_str(l);
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| CliError::Run(format!("write {}: {e}", path.display())))
}

fn split_cmd(ctx: &Ctx, a: &SplitArgs) -> Result<(), CliError> {
    ctx.input(&a.input)?;
    let rows = read_rows(&a.input)?;
    let has_fakebr = rows.iter().any(|r| r.item.corpus == Corpus::FakeBr);
    let spec = SplitSpec {
        train: a.train,
        val: a.val,
        test: a.test,
        seed: get!(ctx, seed),
        pair_preserving: a.pair_preserving.unwrap_or(has_fakebr),
    };
    let parts = split(&rows, |r: &Row| &r.item, &spec)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::Run(format!("create {}: {e}", a.out_dir.display())))?;
    let mut outputs = Vec::new();
    for (name, part) in [("train", &parts.train), ("val", &parts.val), ("test", &parts.test)] {
        let path = a.out_dir.join(format!("{name}.jsonl"));
        write_raw(&path, &part.iter().map(|r| r.line.as_str()).collect::<Vec<_>>())?;
        println!("{name}\t{}", part.len());
        outputs.push(path);
    }
    if spec.pair_preserving {
        ctx.note("pair-preserving split");
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    ctx.finish(&(a, &spec), &a.out_dir.join("split"), &refs)
}

fn data_configuration(ctx: &Ctx, kind: &str) -> Result<DataConfiguration, CliError> {
    let kind: ConfigKind = kind.parse()?;
    let mut cfg = DataConfiguration::new(kind);
    if kind == ConfigKind::EnrichedFiltered {
        let src = ctx.resource("social_domains", ctx.settings.social_domains.as_deref(), SOCIAL_DOMAINS)?;
        cfg.social_domains = parse_domain_list(&src);
    }
    Ok(cfg)
}

fn instances(rows: Vec<Row>, path: &Path, cfg: &DataConfiguration) -> Result<Vec<Instance>, CliError> {
    if cfg.kind.is_enriched() {
        Ok(build_config(&enriched_only(rows, path)?, cfg)?)
    } else {
        let items: Vec<NewsItem> = rows.into_iter().map(|r| r.item).collect();
        Ok(instances_from_items(&items))
    }
}

fn build_config_cmd(ctx: &Ctx, a: &BuildConfigArgs) -> Result<(), CliError> {
    ctx.input(&a.input)?;
    let cfg = data_configuration(ctx, &a.kind)?;
    let inst = instances(read_rows(&a.input)?, &a.input, &cfg)?;
    write_lines(&a.out, &inst)?;
    ctx.finish(a, &a.out, &[&a.out])
}

#[derive(Serialize)]
struct Metrics<'a> {
    kind: &'a str,
    shot_ids: Vec<&'a str>,
    #[serde(flatten)]
    result: evd_core::eval::EvalResult,
    errors: usize,
}

fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<(), CliError> {
    ctx.input(&a.train)?;
    ctx.input(&a.test)?;
    let cfg = data_configuration(ctx, &a.kind)?;
    let train = instances(read_rows(&a.train)?, &a.train, &cfg)?;
    let test = instances(read_rows(&a.test)?, &a.test, &cfg)?;
    let shots = draw_shots(&train, get!(ctx, seed))?;
    ctx.note("shots drawn from the training partition");
    let svc = ctx.require_service()?;
    let settings = ClassifySettings {
        model: get!(ctx, model),
        parallelism: ctx.parallelism()?,
        ..ClassifySettings::default()
    };
    let preds = few_shot_classify(&test, &shots, &svc, &settings)?;
    let gold: Vec<Label> = test.iter().map(|i| i.item.label).collect();
    let labels: Vec<Option<Label>> = preds.iter().map(|p| p.label).collect();
    let result = score(&labels, &gold)?;
    let errors = preds.iter().filter(|p| p.error.is_some()).count();

    let metrics_out = a.metrics_out.clone().unwrap_or_else(|| with_suffix(&a.out, ".metrics.json"));
    write_lines(&a.out, &preds)?;
    println!("n\t{}\naccuracy\t{:.4}\nmacro_f1\t{:.4}", result.n, result.accuracy, result.macro_f1);
    write_json(
        &metrics_out,
        &Metrics {
            kind: cfg.kind.as_str(),
            shot_ids: shots.iter().map(|s| s.item.id.as_str()).collect(),
            result,
            errors,
        },
    )?;
    ctx.finish(a, &a.out, &[&a.out, &metrics_out])?;
    ctx.check_error_rate(errors, preds.len())
}
