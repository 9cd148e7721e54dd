//! Request-hash keyed response files, shared by the fixture backend and the
//! response cache.
//!
//! Each file is `<dir>/<provider>/<request-hash>.resp`: one JSON header line
//! (`request_hash`, `provider`, `captured`, `request`) followed by the
//! response body exactly as received.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Fetched, ProviderError, ProviderKind, ProviderRequest, Transport};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    request_hash: String,
    provider: ProviderKind,
    captured: DateTime<Utc>,
    request: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct CassetteStore {
    dir: PathBuf,
}

impl CassetteStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CassetteStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, req: &ProviderRequest) -> PathBuf {
        self.dir
            .join(req.kind().as_str())
            .join(format!("{}.resp", req.hash()))
    }

    pub fn load(&self, req: &ProviderRequest) -> Result<Option<Fetched>, ProviderError> {
        let path = self.path_for(req);
        let raw = match fs::read_to_string(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ProviderError::Store(format!("read {}: {e}", path.display()))),
        };
        let (head, body) = raw.split_once('\n').unwrap_or((raw.as_str(), ""));
        let header: Header = serde_json::from_str(head)
            .map_err(|e| ProviderError::Store(format!("bad header in {}: {e}", path.display())))?;
        if header.request_hash != req.hash() {
            return Err(ProviderError::Store(format!(
                "{} holds request {} instead of {}",
                path.display(),
                header.request_hash,
                req.hash()
            )));
        }
        Ok(Some(Fetched {
            body: body.to_string(),
            captured_at: header.captured,
        }))
    }

    pub fn save(&self, req: &ProviderRequest, fetched: &Fetched) -> Result<(), ProviderError> {
        let path = self.path_for(req);
        let store_err = |e: std::io::Error| ProviderError::Store(format!("write {}: {e}", path.display()));
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(store_err)?;
        }
        let header = Header {
            request_hash: req.hash(),
            provider: req.kind(),
            captured: fetched.captured_at,
            request: serde_json::to_value(req).expect("requests serialize"),
        };
        let mut out = serde_json::to_string(&header).expect("headers serialize");
        out.push('\n');
        out.push_str(&fetched.body);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, out).map_err(store_err)?;
        fs::rename(&tmp, &path).map_err(store_err)
    }
}

/// Serves recorded responses. A search request with no recording yields an
/// empty result list; an LLM request with no recording is a failure.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    store: CassetteStore,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(ProviderError::Store(format!(
                "fixture directory {} does not exist",
                dir.display()
            )));
        }
        Ok(FixtureTransport {
            store: CassetteStore::new(dir),
        })
    }
}

impl Transport for FixtureTransport {
    fn send(&self, req: &ProviderRequest) -> Result<Fetched, ProviderError> {
        if let Some(hit) = self.store.load(req)? {
            return Ok(hit);
        }
        match req.kind() {
            ProviderKind::Llm => Err(ProviderError::FixtureMissing {
                provider: ProviderKind::Llm,
                hash: req.hash(),
            }),
            _ => Ok(Fetched {
                body: "{}".into(),
                captured_at: DateTime::UNIX_EPOCH,
            }),
        }
    }

    fn is_live(&self) -> bool {
        false
    }
}
