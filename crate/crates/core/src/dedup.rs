//! Near-duplicate detection: character-shingle MinHash, banded LSH,
//! exact-Jaccard confirmation and connected-component clustering.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mersenne prime 2^61 - 1, the modulus of the universal hash family.
const P61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgramKind {
    Char,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupConfig {
    pub seed: u64,
    pub ngram_kind: NgramKind,
    pub ngram_size: usize,
    pub hash_bits: u32,
    pub permutations: usize,
    pub bands: usize,
    pub jaccard_threshold: f64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            seed: 3,
            ngram_kind: NgramKind::Char,
            ngram_size: 5,
            hash_bits: 128,
            permutations: 100,
            bands: 50,
            jaccard_threshold: 0.7,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 || self.permutations == 0 || self.permutations % self.bands != 0 {
            return Err(Error::Config(format!(
                "permutations ({}) must be a positive multiple of bands ({})",
                self.permutations, self.bands
            )));
        }
        if self.ngram_size == 0 {
            return Err(Error::Config("ngram_size must be >= 1".into()));
        }
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "jaccard_threshold {} outside (0, 1]",
                self.jaccard_threshold
            )));
        }
        if self.hash_bits != 64 && self.hash_bits != 128 {
            return Err(Error::Config("hash_bits must be 64 or 128".into()));
        }
        Ok(())
    }

    pub fn rows_per_band(&self) -> usize {
        self.permutations / self.bands
    }
}

/// All contiguous code-point n-grams of `text`.
pub fn shingles(text: &str, cfg: &DedupConfig) -> HashSet<String> {
    let chars: Vec<char> = text.chars().collect();
    chars
        .windows(cfg.ngram_size)
        .map(|w| w.iter().collect())
        .collect()
}

pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Stable 64-bit hash of a shingle: FNV-1a followed by a splitmix64 finalizer.
fn base_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

fn universal(a: u64, b: u64, x: u64) -> u64 {
    ((u128::from(a) * u128::from(x) + u128::from(b)) % u128::from(P61)) as u64
}

/// A seeded family of MinHash permutations.
#[derive(Debug, Clone)]
pub struct MinHasher {
    cfg: DedupConfig,
    /// Per permutation, one (a, b) draw per 64-bit half.
    params: Vec<[(u64, u64); 2]>,
}

impl MinHasher {
    pub fn new(cfg: &DedupConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut draw = || (rng.gen_range(1..P61), rng.gen_range(0..P61));
        let params = (0..cfg.permutations).map(|_| [draw(), draw()]).collect();
        Ok(MinHasher {
            cfg: cfg.clone(),
            params,
        })
    }

    pub fn config(&self) -> &DedupConfig {
        &self.cfg
    }

    /// One value per permutation. With `hash_bits = 64` the high half is zero.
    pub fn signature(&self, text: &str) -> Result<Vec<u128>> {
        let sh = shingles(text, &self.cfg);
        if sh.is_empty() {
            return Err(Error::DegenerateInput {
                id: String::new(),
                reason: format!("fewer than {} characters, no shingles", self.cfg.ngram_size),
            });
        }
        let xs: Vec<u64> = sh.iter().map(|s| base_hash(s) % P61).collect();
        let wide = self.cfg.hash_bits == 128;
        Ok(self
            .params
            .iter()
            .map(|[(a0, b0), (a1, b1)]| {
                let mut best = u128::MAX;
                for &x in &xs {
                    let lo = u128::from(universal(*a0, *b0, x));
                    let hi = if wide { u128::from(universal(*a1, *b1, x)) } else { 0 };
                    best = best.min(hi << 64 | lo);
                }
                best
            })
            .collect())
    }
}

pub fn signature(text: &str, cfg: &DedupConfig) -> Result<Vec<u128>> {
    MinHasher::new(cfg)?.signature(text)
}

/// Fraction of positions where two signatures agree.
pub fn agreement(a: &[u128], b: &[u128]) -> f64 {
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    same as f64 / a.len().max(1) as f64
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Pairs whose signatures agree on every row of at least one band.
pub fn candidate_pairs<S: AsRef<str>, T: AsRef<str>>(
    records: &[(S, T)],
    cfg: &DedupConfig,
) -> Result<BTreeSet<(String, String)>> {
    let hasher = MinHasher::new(cfg)?;
    let mut sigs = Vec::with_capacity(records.len());
    for (id, text) in records {
        let sig = hasher.signature(text.as_ref()).map_err(|e| match e {
            Error::DegenerateInput { reason, .. } => Error::DegenerateInput {
                id: id.as_ref().to_string(),
                reason,
            },
            other => other,
        })?;
        sigs.push(sig);
    }
    let rows = cfg.rows_per_band();
    let mut pairs = BTreeSet::new();
    for band in 0..cfg.bands {
        let mut buckets: HashMap<&[u128], Vec<usize>> = HashMap::new();
        for (i, sig) in sigs.iter().enumerate() {
            buckets.entry(&sig[band * rows..(band + 1) * rows]).or_default().push(i);
        }
        for members in buckets.values().filter(|m| m.len() > 1) {
            for (k, &i) in members.iter().enumerate() {
                for &j in &members[k + 1..] {
                    pairs.insert(ordered(records[i].0.as_ref(), records[j].0.as_ref()));
                }
            }
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmedPair {
    pub a: String,
    pub b: String,
    pub jaccard: f64,
}

/// Keeps the candidates whose exact shingle-set Jaccard meets the threshold.
pub fn confirm_pairs<S: AsRef<str>, T: AsRef<str>>(
    candidates: &BTreeSet<(String, String)>,
    records: &[(S, T)],
    cfg: &DedupConfig,
) -> Result<Vec<ConfirmedPair>> {
    let texts: HashMap<&str, &str> = records.iter().map(|(i, t)| (i.as_ref(), t.as_ref())).collect();
    let mut cache: HashMap<&str, HashSet<String>> = HashMap::new();
    let mut out = Vec::new();
    for (a, b) in candidates {
        for id in [a, b] {
            if !cache.contains_key(id.as_str()) {
                let (key, text) = texts
                    .get_key_value(id.as_str())
                    .ok_or_else(|| Error::UnknownId(id.clone()))?;
                cache.insert(key, shingles(text, cfg));
            }
        }
        let j = jaccard(&cache[a.as_str()], &cache[b.as_str()]);
        if j >= cfg.jaccard_threshold {
            out.push(ConfirmedPair {
                a: a.clone(),
                b: b.clone(),
                jaccard: j,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupCluster {
    pub member_ids: BTreeSet<String>,
    /// Smallest exact Jaccard among the confirmed pairs inside the cluster.
    pub pairwise_min_jaccard: f64,
}

/// Connected components of the confirmed-pair graph, ordered by smallest id.
pub fn cluster(confirmed: &[ConfirmedPair]) -> Vec<DedupCluster> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for p in confirmed {
        adj.entry(&p.a).or_default().push(&p.b);
        adj.entry(&p.b).or_default().push(&p.a);
    }
    let mut seen: HashSet<&str> = HashSet::new();
    let mut clusters = Vec::new();
    for &start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut members = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            members.insert(n.to_string());
            for &m in &adj[n] {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        let min = confirmed
            .iter()
            .filter(|p| members.contains(&p.a))
            .map(|p| p.jaccard)
            .fold(f64::INFINITY, f64::min);
        clusters.push(DedupCluster {
            member_ids: members,
            pairwise_min_jaccard: min,
        });
    }
    clusters
}

/// Candidate generation, confirmation and clustering in one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupOutcome {
    pub candidates: usize,
    pub confirmed: Vec<ConfirmedPair>,
    pub clusters: Vec<DedupCluster>,
}

pub fn find_near_duplicates<S: AsRef<str>, T: AsRef<str>>(
    records: &[(S, T)],
    cfg: &DedupConfig,
) -> Result<DedupOutcome> {
    let candidates = candidate_pairs(records, cfg)?;
    let confirmed = confirm_pairs(&candidates, records, cfg)?;
    let clusters = cluster(&confirmed);
    Ok(DedupOutcome {
        candidates: candidates.len(),
        confirmed,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_shingles(text: &str, n: usize) -> HashSet<String> {
        let c: Vec<char> = text.chars().collect();
        let mut out = HashSet::new();
        for i in 0..c.len().saturating_sub(n - 1) {
            if i + n <= c.len() {
                out.insert(c[i..i + n].iter().collect());
            }
        }
        out
    }

    fn brute_jaccard(a: &str, b: &str) -> f64 {
        let (x, y) = (brute_shingles(a, 5), brute_shingles(b, 5));
        let inter = x.iter().filter(|s| y.contains(*s)).count();
        let union = x.len() + y.len() - inter;
        inter as f64 / union as f64
    }

    fn distinct(start: u32, len: usize) -> String {
        (0..len as u32).map(|i| char::from_u32(0x4E00 + start + i).unwrap()).collect()
    }

    /// Two strings of distinct characters differing in the last `k` positions,
    /// with `m + 4` characters each: J = (m - k) / (m + k).
    fn pair_with(m: usize, k: usize) -> (String, String) {
        let base = distinct(0, m + 4);
        let prefix: String = base.chars().take(m + 4 - k).collect();
        (base, format!("{prefix}{}", distinct(5000, k)))
    }

    #[test]
    fn shingle_windows() {
        let cfg = DedupConfig::default();
        assert_eq!(shingles("abcde", &cfg), HashSet::from(["abcde".to_string()]));
        assert!(shingles("abcd", &cfg).is_empty());
        assert_eq!(
            shingles("abcdef", &cfg),
            HashSet::from(["abcde".to_string(), "bcdef".to_string()])
        );
        assert_eq!(shingles("ação é", &cfg), brute_shingles("ação é", 5));
    }

    #[test]
    fn signature_determinism_and_degenerate() {
        let cfg = DedupConfig::default();
        let a = signature("um texto qualquer", &cfg).unwrap();
        assert_eq!(a, signature("um texto qualquer", &cfg).unwrap());
        assert_eq!(a.len(), 100);
        assert!(matches!(signature("abc", &cfg), Err(Error::DegenerateInput { .. })));
    }

    #[test]
    fn rejects_bad_banding() {
        let cfg = DedupConfig {
            permutations: 101,
            ..DedupConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn constructed_fixtures_land_on_target() {
        let (a, b) = pair_with(169, 31);
        assert!((brute_jaccard(&a, &b) - 0.69).abs() < 1e-12);
        let (c, d) = pair_with(171, 29);
        assert!((brute_jaccard(&c, &d) - 0.71).abs() < 1e-12);
    }

    #[test]
    fn confirmation_threshold() {
        let cfg = DedupConfig::default();
        let (a, b) = pair_with(169, 31);
        let (c, d) = pair_with(171, 29);
        let records = vec![("a", a), ("b", b), ("c", c), ("d", d), ("e", "igual igual".into()), ("f", "igual igual".into())];
        let cands: BTreeSet<(String, String)> = [("a", "b"), ("c", "d"), ("e", "f")]
            .iter()
            .map(|(x, y)| (x.to_string(), y.to_string()))
            .collect();
        let kept = confirm_pairs(&cands, &records, &cfg).unwrap();
        let ids: Vec<(&str, &str)> = kept.iter().map(|p| (p.a.as_str(), p.b.as_str())).collect();
        assert_eq!(ids, [("c", "d"), ("e", "f")]);
        assert!((kept[0].jaccard - 0.71).abs() < 1e-12);
        assert_eq!(kept[1].jaccard, 1.0);
    }

    #[test]
    fn identical_texts_are_candidates() {
        let cfg = DedupConfig::default();
        let recs = [("x", "mesmo texto repetido"), ("y", "mesmo texto repetido")];
        let c = candidate_pairs(&recs, &cfg).unwrap();
        assert!(c.contains(&("x".to_string(), "y".to_string())));
    }

    #[test]
    fn unrelated_random_strings_not_candidates() {
        let cfg = DedupConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut rand_text = || -> String {
            (0..500).map(|_| char::from(rng.gen_range(b'a'..=b'z'))).collect()
        };
        let recs = [("p", rand_text()), ("q", rand_text())];
        assert!(candidate_pairs(&recs, &cfg).unwrap().is_empty());
    }

    #[test]
    fn degenerate_error_names_record() {
        let recs = [("ok", "texto suficiente"), ("curto", "ab")];
        match candidate_pairs(&recs, &DedupConfig::default()) {
            Err(Error::DegenerateInput { id, .. }) => assert_eq!(id, "curto"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn pair(a: &str, b: &str, j: f64) -> ConfirmedPair {
        ConfirmedPair {
            a: a.into(),
            b: b.into(),
            jaccard: j,
        }
    }

    #[test]
    fn clustering() {
        assert!(cluster(&[]).is_empty());
        let c = cluster(&[pair("a", "b", 0.9), pair("b", "c", 0.75)]);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].member_ids.len(), 3);
        assert_eq!(c[0].pairwise_min_jaccard, 0.75);

        let chain: Vec<ConfirmedPair> = (0..11)
            .map(|i| pair(&format!("n{i:02}"), &format!("n{:02}", i + 1), 0.8))
            .collect();
        let c = cluster(&chain);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].member_ids.len(), 12);
    }

    #[test]
    fn separate_components() {
        let c = cluster(&[pair("a", "b", 0.9), pair("x", "y", 0.8)]);
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].pairwise_min_jaccard, 0.8);
    }
}
