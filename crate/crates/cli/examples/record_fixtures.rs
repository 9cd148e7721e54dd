//! Regenerates `fixtures/cassettes` from a scripted provider backend.
//!
//! Runs the CLI chain over `fixtures/corpus.jsonl` with every provider call
//! answered by the script below and cached into the cassette directory, then
//! replays the chain in fixture mode and checks the outputs match.
//!
//!     cargo run -p evd-cli --example record_fixtures [-- <fixtures-dir>]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};

use evd_core::eval::PROMPT_BASE;
use evd_core::providers::{llm_body, FnTransport, ProviderError, ProviderRequest};

struct Rec {
    id: String,
    text: String,
    label: String,
}

fn key(text: &str) -> String {
    text.split_whitespace().take(6).collect::<Vec<_>>().join(" ")
}

fn squash(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

fn item(title: &str, link: &str, snippet: &str) -> Value {
    json!({ "htmlTitle": title, "link": link, "htmlSnippet": snippet })
}

fn review(claim: &str, publisher: &str, site: &str, rating: &str, url: &str, date: &str) -> Value {
    json!({ "claims": [{ "text": claim, "claimReview": [{
        "publisher": { "name": publisher, "site": site },
        "url": url, "reviewDate": date, "textualRating": rating }] }] })
}

/// Scripted web results, keyed by a case-sensitive substring of the query.
fn web_script() -> Vec<(&'static str, Value)> {
    vec![
        ("encomendas enviadas da China", json!({ "items": [
            item("<b>O novo coronavírus</b> não sobrevive em <b>encomendas enviadas</b> pelo ...",
                 "https://www.aosfatos.org/noticias/coronavirus-nao-sobrevive-em-encomendas/",
                 "4 de mar. de 2020 <b>...</b> ... <b>coronavírus pode ser transmitido através de encomendas enviadas</b> pelo correio da <b>China</b> para outros países. A alegação, que serviu de base &nbsp;..."),
            item("Coronavírus: é seguro receber <b>encomendas</b> da <b>China</b>?",
                 "https://g1.globo.com/bemestar/coronavirus/encomendas-china.ghtml",
                 "Especialistas explicam por que o risco de contágio por pacotes é baixo."),
        ]})),
        ("Governo Temer irá acabar com a farmácia popular", json!({ "items": [
            item("<b>Governo Temer</b> fecha <b>Farmácia Popular</b> e pretende extinguir o SUS ...",
                 "https://www.pt.org.br/governo-temer-fecha-farmacia-popular/",
                 "Feb 22, 2018 <b>...</b> Você <b>vai</b> deixar? Notícias &middot; ascom ... O Ministério da Saúde <b>acaba</b> de fechar as 517 <b>farmácias</b> populares mantidas pelo <b>governo</b> federal no país."),
        ]})),
        ("programa Farmácia Popular", json!({ "items": [
            item("<b>Farmácia Popular</b> segue com rede credenciada, diz <b>governo</b>",
                 "https://www.gov.br/saude/pt-br/assuntos/noticias/farmacia-popular-rede-credenciada",
                 "O Ministério da Saúde esclarece que o <b>programa</b> continua ativo nas farmácias conveniadas."),
        ]})),
        ("conectesus", json!({ "items": [
            item("Obter o Certificado Nacional de <b>Vacinação</b> COVID-19",
                 "https://www.gov.br/pt-br/servicos/obter-o-certificado-nacional-de-vacinacao-covid-19",
                 "Os dados já foram enviados, mas possui algum erro de informação. Quais os possíveis erros: CNS duplicado no <b>cadastro</b> do SUS.O cidadão deverá se dirigir a&nbsp;..."),
        ]})),
        ("tivemos pacientes", json!({ "items": [
            item("<b>Hospital Oswaldo Cruz</b> amplia testagem para <b>COVID-19</b>",
                 "https://www.hospitaloswaldocruz.org.br/imprensa/noticias/testagem-covid",
                 "O hospital passou a oferecer o <b>teste rápido</b> em sua unidade central."),
        ]})),
        ("falsos negativos", json!({ "items": [
            item("<b>Covid</b>-<b>19</b>: Pesquisador da Fiocruz tira dúvidas sobre <b>testes</b> de ...",
                 "https://portal.fiocruz.br/noticia/covid-19-pesquisador-da-fiocruz-tira-duvidas-sobre-testes",
                 "Jan 15, 2021 <b>...</b> ... <b>falsos negativos podem</b> se dever à baixa especificidade e baixa sensibilidade analítica do <b>teste</b>."),
        ]})),
        ("Associação Médica Americana", json!({ "items": [
            item("<b>Hidroxicloroquina</b> não é recomendada como tratamento precoce ...",
                 "https://www.aosfatos.org/noticias/hidroxicloroquina-nao-e-recomendada/",
                 "1 day ago <b>...</b> De tempos em tempos, o medicamento <b>hidroxicloroquina</b> volta a ser apontado como tratamento precoce eficaz <b>contra a Covid</b>-<b>19</b>."),
        ]})),
        ("A cura do coronavírus existe", json!({ "items": [
            item("Não existe <b>cura</b> escondida para o <b>coronavírus</b>",
                 "https://www.boatos.org/saude/cura-coronavirus-corpo.html",
                 "Mensagem que circula no WhatsApp diz que a <b>cura</b> está <b>dentro</b> do <b>corpo</b>; não há evidência."),
            item("<b>Coronavírus</b>: o que se sabe sobre tratamentos",
                 "https://twitter.com/minsaude/status/1240000000000000000",
                 "Ministério da Saúde lista as orientações oficiais."),
        ]})),
    ]
}

fn factcheck_script() -> Vec<(&'static str, Value)> {
    vec![
        ("Governo Temer irá acabar com a farmácia popular", review(
            "Temer não 'oficializa fim do projeto Farmácia Popular'", "Lupa", "lupa.uol.com.br", "Falso",
            "https://lupa.uol.com.br/jornalismo/2017/05/16/farmacia-popular", "2017-05-16T00:00:00Z")),
        ("Associação Médica Americana", review(
            "Associação Médica Americana não recomenda hidroxicloroquina ...", "Aos Fatos", "aosfatos.org", "Falso",
            "https://www.aosfatos.org/noticias/associacao-medica-americana-hidroxicloroquina/", "2020-09-02T00:00:00Z")),
        ("A cura do coronavírus existe", review(
            "A cura do coronavírus está dentro do nosso corpo", "Estadão Verifica", "estadao.com.br", "Falso",
            "https://politica.estadao.com.br/blogs/estadao-verifica/cura-coronavirus-corpo/", "2020-04-03T00:00:00Z")),
        ("440 mil crianças", review(
            "Há 440 mil crianças sem vaga na educação infantil", "Lupa", "lupa.uol.com.br", "Verdadeiro",
            "https://lupa.uol.com.br/jornalismo/2021/03/10/criancas-sem-vaga", "2021-03-10T00:00:00Z")),
        ("seiscentos reais", review(
            "Auxílio emergencial de R$ 600 começa a ser pago", "Aos Fatos", "aosfatos.org", "Verdadeiro",
            "https://www.aosfatos.org/noticias/auxilio-emergencial-pagamento/", "2020-04-08T00:00:00Z")),
        ("microchips", review(
            "Vacinas contra covid-19 implantam microchips", "AFP Checamos", "checamos.afp.com", "Falso",
            "https://checamos.afp.com/vacinas-microchips", "2020-12-01T00:00:00Z")),
        ("ivermectina", review(
            "Estudo de Harvard comprova eficácia da ivermectina", "Comprova", "projetocomprova.com.br", "Enganoso",
            "https://projetocomprova.com.br/publicacoes/ivermectina-harvard/", "2021-02-12T00:00:00Z")),
        ("Caixões", review(
            "Caixões enterrados vazios em Manaus", "Aos Fatos", "aosfatos.org", "Falso",
            "https://www.aosfatos.org/noticias/caixoes-vazios-manaus/", "2020-05-05T00:00:00Z")),
    ]
}

fn claim_script() -> Vec<(&'static str, &'static str)> {
    vec![
        ("BOM DIA A TODOS", "A cura do coronavírus existe e está dentro do nosso próprio corpo."),
        ("440 mil crianças", "Há 440 mil crianças sem vaga na educação infantil no Brasil."),
        ("conectesus", "Pessoal, todo mundo precisa se cadastrar no conectesus para vacinar."),
        ("tivemos pacientes", "Exames de COVID-19 podem apresentar falsos negativos, mesmo com testes em laboratórios renomados."),
        ("Associação Médica Americana", "A Associação Médica Americana recomenda a hidroxicloroquina contra a covid-19."),
        ("farmácia popular", "O governo Temer vai acabar com o programa Farmácia Popular."),
    ]
}

const DOMAINS: [&str; 8] = [
    "https://g1.globo.com/",
    "https://www.gov.br/saude/",
    "https://twitter.com/",
    "https://www.aosfatos.org/noticias/",
    "https://www.bbc.com/portuguese/",
    "https://noticias.uol.com.br/",
    "https://www.facebook.com/",
    "https://www.estadao.com.br/",
];

/// A few weakly matching hits for unscripted queries; one query in four gets none.
fn generic_web(query: &str) -> Value {
    let h = fnv(query);
    if h % 4 == 0 {
        return json!({});
    }
    let words: Vec<&str> = query.split_whitespace().collect();
    let head = words.iter().take(2).copied().collect::<Vec<_>>().join(" ");
    let rest = words.iter().skip(2).take(4).copied().collect::<Vec<_>>().join(" ");
    let items: Vec<Value> = (0..3u64)
        .map(|i| {
            let d = DOMAINS[((h >> (8 * i)) % DOMAINS.len() as u64) as usize];
            item(
                &format!("<b>{head}</b> {rest} ..."),
                &format!("{d}{:x}", (h >> i) & 0xffff),
                &format!("... {} ...", words.iter().skip(1).take(7).copied().collect::<Vec<_>>().join(" ")),
            )
        })
        .collect();
    json!({ "items": items })
}

fn first_words(text: &str, n: usize) -> String {
    let s = text.split_whitespace().take(n).collect::<Vec<_>>().join(" ");
    format!("{}.", s.trim_end_matches(|c: char| !c.is_alphanumeric()))
}

fn respond(req: &ProviderRequest, corpus: &[Rec]) -> String {
    let lookup = |q: &str, script: Vec<(&'static str, Value)>| {
        script.into_iter().find(|(k, _)| q.contains(k)).map(|(_, v)| v.to_string())
    };
    match req {
        ProviderRequest::WebSearch(r) => lookup(&r.query, web_script()).unwrap_or_else(|| generic_web(&r.query).to_string()),
        ProviderRequest::FactCheck(r) => lookup(&r.query, factcheck_script()).unwrap_or_else(|| "{}".into()),
        ProviderRequest::Llm(r) if r.prompt.starts_with(PROMPT_BASE.trim_end()) => {
            let target = squash(r.prompt.rsplit("\n\nTexto: ").next().unwrap_or_default());
            let rec = corpus.iter().find(|c| target.starts_with(&key(&c.text)));
            let answer = match rec {
                Some(c) => {
                    let flip = fnv(&c.id) % 5 == 0;
                    match (c.label.as_str(), flip) {
                        ("fake", false) | ("true", true) => "FAKE NEWS",
                        _ => "VERDADEIRO",
                    }
                }
                None => "Não sei.",
            };
            llm_body(answer)
        }
        ProviderRequest::Llm(r) => {
            if let Some((_, claim)) = claim_script().into_iter().find(|(k, _)| r.prompt.contains(k)) {
                return llm_body(claim);
            }
            let prompt = squash(&r.prompt);
            match corpus.iter().find(|c| prompt.contains(&key(&c.text))) {
                Some(c) => llm_body(&first_words(&c.text, 14)),
                None => llm_body(""),
            }
        }
    }
}

fn read_corpus(path: &Path) -> Vec<Rec> {
    std::fs::read_to_string(path)
        .expect("corpus readable")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Value = serde_json::from_str(l).expect("corpus line parses");
            Rec {
                id: v["id"].as_str().unwrap().to_string(),
                text: v["text"].as_str().unwrap().to_string(),
                label: v["label"].as_str().unwrap().to_string(),
            }
        })
        .collect()
}

const KINDS: [&str; 4] = ["original", "validated", "enriched_full", "enriched_filtered"];

/// The CLI chain; `extra` goes right after the program name.
fn chain(fixtures: &Path, work: &Path, extra: &[String], run: &dyn Fn(Vec<String>) -> i32) {
    let p = |name: &str| work.join(name).display().to_string();
    let config = fixtures.join("evd.toml").display().to_string();
    let corpus = fixtures.join("corpus.jsonl").display().to_string();
    let mut steps: Vec<Vec<String>> = vec![
        vec!["validate".into(), "--in".into(), corpus, "--out".into(), p("validated.jsonl")],
        vec!["enrich".into(), "--in".into(), p("validated.jsonl"), "--out".into(), p("enriched.jsonl")],
        vec!["split".into(), "--in".into(), p("enriched.jsonl"), "--out-dir".into(), p("split")],
    ];
    for kind in KINDS {
        steps.push(vec![
            "evaluate".into(),
            "--train".into(),
            p("split/train.jsonl"),
            "--test".into(),
            p("split/test.jsonl"),
            "--kind".into(),
            kind.into(),
            "--out".into(),
            p(&format!("pred_{kind}.jsonl")),
        ]);
    }
    for step in steps {
        let mut argv = vec!["evd".to_string(), "--config".into(), config.clone()];
        argv.extend(extra.iter().cloned());
        argv.extend(step.iter().cloned());
        let code = run(argv.clone());
        assert_eq!(code, 0, "{argv:?} exited with {code}");
    }
}

/// Drops recorded search misses; the fixture backend answers those with an
/// empty body anyway.
fn prune_empty(dir: &Path) -> usize {
    let mut n = 0;
    for sub in std::fs::read_dir(dir).expect("cassette dir") {
        for f in std::fs::read_dir(sub.unwrap().path()).unwrap() {
            let path = f.unwrap().path();
            let raw = std::fs::read_to_string(&path).unwrap();
            if raw.split_once('\n').map(|(_, b)| b) == Some("{}") {
                std::fs::remove_file(&path).unwrap();
                n += 1;
            }
        }
    }
    n
}

fn main() {
    let fixtures: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    let cassettes = fixtures.join("cassettes");
    if cassettes.exists() {
        std::fs::remove_dir_all(&cassettes).expect("clear old cassettes");
    }
    let corpus = Arc::new(read_corpus(&fixtures.join("corpus.jsonl")));
    let c = corpus.clone();
    let transport = Arc::new(FnTransport(move |req: &ProviderRequest| -> Result<String, ProviderError> {
        Ok(respond(req, &c))
    }));

    let rec_dir = tempfile::tempdir().expect("tempdir");
    let extra = vec!["--cache-dir".to_string(), cassettes.display().to_string()];
    chain(&fixtures, rec_dir.path(), &extra, &|argv| evd_cli::run_with_transport(argv, transport.clone()));
    let pruned = prune_empty(&cassettes);

    let replay_dir = tempfile::tempdir().expect("tempdir");
    chain(&fixtures, replay_dir.path(), &[], &|argv| evd_cli::run(argv));
    let mut files = vec!["validated.jsonl".to_string(), "enriched.jsonl".to_string()];
    files.extend(KINDS.iter().map(|k| format!("pred_{k}.jsonl")));
    for name in files {
        let a = std::fs::read(rec_dir.path().join(&name)).unwrap();
        let b = std::fs::read(replay_dir.path().join(&name)).unwrap();
        assert!(a == b, "{name} differs between recording and replay");
    }
    let kept = walk_count(&cassettes);
    println!("recorded {kept} cassettes ({pruned} empty search responses pruned); replay matches");
}

fn walk_count(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|s| std::fs::read_dir(s.unwrap().path()).unwrap().count())
        .sum()
}
