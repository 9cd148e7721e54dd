//! Mapping from free-form fact-checker ratings to the binary label space.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Label;

pub const RATINGS_PT: &str = include_str!("../resources/ratings_pt.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingClass {
    Fake,
    True,
    Other,
}

impl RatingClass {
    pub fn label(self) -> Option<Label> {
        match self {
            RatingClass::Fake => Some(Label::Fake),
            RatingClass::True => Some(Label::True),
            RatingClass::Other => None,
        }
    }
}

/// Lowercases, turns punctuation into spaces and collapses whitespace, so
/// "Verdadeiro, mas" and "verdadeiro mas" compare equal.
pub fn normalize_rating(rating: &str) -> String {
    let lowered: String = rating
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone)]
pub struct RatingTable(Arc<HashMap<String, RatingClass>>);

impl RatingTable {
    pub fn parse(src: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (n, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (rating, class) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::Config(format!("ratings line {}: expected rating<TAB>class", n + 1)))?;
            let class = match class.trim() {
                "fake" => RatingClass::Fake,
                "true" => RatingClass::True,
                "other" => RatingClass::Other,
                c => return Err(Error::Config(format!("ratings line {}: unknown class {c:?}", n + 1))),
            };
            map.insert(normalize_rating(rating), class);
        }
        Ok(RatingTable(Arc::new(map)))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        Self::parse(&src)
    }

    pub fn classify(&self, rating: &str) -> RatingClass {
        self.0
            .get(&normalize_rating(rating))
            .copied()
            .unwrap_or(RatingClass::Other)
    }
}

impl Default for RatingTable {
    fn default() -> Self {
        Self::parse(RATINGS_PT).expect("builtin rating table parses")
    }
}
