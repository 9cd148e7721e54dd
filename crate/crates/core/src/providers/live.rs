//! HTTP clients for the public search, fact-check and generation APIs.
//! Credentials come from environment variables only.

use std::time::Duration;

use chrono::Utc;
use serde_json::{json, Value};

use super::{Fetched, ProviderError, ProviderRequest, Transport};

pub const ENV_SEARCH_KEY: &str = "EVD_SEARCH_KEY";
pub const ENV_SEARCH_CX: &str = "EVD_SEARCH_CX";
pub const ENV_FACTCHECK_KEY: &str = "EVD_FACTCHECK_KEY";
pub const ENV_LLM_KEY: &str = "EVD_LLM_KEY";

const CSE_URL: &str = "https://www.googleapis.com/customsearch/v1";
const FACTCHECK_URL: &str = "https://factchecktools.googleapis.com/v1alpha1/claims:search";
const GEMINI_URL: &str = "https://generativelanguage.googleapis.com/v1beta/models";

const SAFETY_CATEGORIES: [&str; 4] = [
    "HARM_CATEGORY_HARASSMENT",
    "HARM_CATEGORY_HATE_SPEECH",
    "HARM_CATEGORY_SEXUALLY_EXPLICIT",
    "HARM_CATEGORY_DANGEROUS_CONTENT",
];

#[derive(Debug, Clone, Default)]
pub struct Credentials {
    pub search_key: Option<String>,
    pub search_cx: Option<String>,
    pub factcheck_key: Option<String>,
    pub llm_key: Option<String>,
}

impl Credentials {
    pub fn from_env() -> Self {
        let var = |k| std::env::var(k).ok().filter(|v: &String| !v.is_empty());
        Credentials {
            search_key: var(ENV_SEARCH_KEY),
            search_cx: var(ENV_SEARCH_CX),
            factcheck_key: var(ENV_FACTCHECK_KEY),
            llm_key: var(ENV_LLM_KEY),
        }
    }
}

fn need<'a>(v: &'a Option<String>, name: &str) -> Result<&'a str, ProviderError> {
    v.as_deref()
        .ok_or_else(|| ProviderError::Config(format!("environment variable {name} is not set")))
}

pub struct LiveTransport {
    client: reqwest::blocking::Client,
    creds: Credentials,
}

impl LiveTransport {
    pub fn new(creds: Credentials) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| ProviderError::Config(format!("HTTP client: {e}")))?;
        Ok(LiveTransport { client, creds })
    }

    fn build(&self, req: &ProviderRequest) -> Result<reqwest::blocking::RequestBuilder, ProviderError> {
        Ok(match req {
            ProviderRequest::WebSearch(r) => {
                let mut q = vec![
                    ("key", need(&self.creds.search_key, ENV_SEARCH_KEY)?.to_string()),
                    ("cx", need(&self.creds.search_cx, ENV_SEARCH_CX)?.to_string()),
                    ("q", r.query.clone()),
                    ("num", r.num.to_string()),
                    ("gl", r.geo.clone()),
                    ("lr", r.lang_restrict.clone()),
                ];
                if let Some(cr) = &r.country {
                    q.push(("cr", cr.clone()));
                }
                self.client.get(CSE_URL).query(&q)
            }
            ProviderRequest::FactCheck(r) => self.client.get(FACTCHECK_URL).query(&[
                ("query", r.query.clone()),
                ("languageCode", r.language_code.clone()),
                ("pageSize", r.page_size.to_string()),
                ("key", need(&self.creds.factcheck_key, ENV_FACTCHECK_KEY)?.to_string()),
            ]),
            ProviderRequest::Llm(r) => {
                let key = need(&self.creds.llm_key, ENV_LLM_KEY)?;
                let mut body = json!({ "contents": [{ "parts": [{ "text": r.prompt }] }] });
                if r.safety_off {
                    body["safetySettings"] = SAFETY_CATEGORIES
                        .iter()
                        .map(|c| json!({ "category": c, "threshold": "BLOCK_NONE" }))
                        .collect();
                }
                if !r.knobs.is_empty() {
                    let cfg: serde_json::Map<String, Value> = r
                        .knobs
                        .iter()
                        .map(|(k, v)| (k.clone(), serde_json::from_str(v).unwrap_or(Value::String(v.clone()))))
                        .collect();
                    body["generationConfig"] = Value::Object(cfg);
                }
                self.client
                    .post(format!("{GEMINI_URL}/{}:generateContent", r.model))
                    .query(&[("key", key)])
                    .json(&body)
            }
        })
    }
}

impl Transport for LiveTransport {
    fn send(&self, req: &ProviderRequest) -> Result<Fetched, ProviderError> {
        let provider = req.kind();
        let transport = |e: reqwest::Error| ProviderError::Transport {
            provider,
            message: e.without_url().to_string(),
        };
        let resp = self.build(req)?.send().map_err(transport)?;
        let status = resp.status();
        let body = resp.text().map_err(transport)?;
        if !status.is_success() {
            return Err(ProviderError::Http {
                provider,
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        Ok(Fetched {
            body,
            captured_at: Utc::now(),
        })
    }
}

impl std::fmt::Debug for LiveTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveTransport").finish_non_exhaustive()
    }
}
