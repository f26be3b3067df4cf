use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::instance::Dataset;
use super::mr::SLOT_MARKER;
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

const RESERVED: [&str; 3] = [PAD, UNK, SLOT_MARKER];

/// Shared token/index mapping for MR and text tokens. Indices `0..3` are
/// reserved for `<pad>`, `<unk>` and `<slot>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn reserved_only() -> Self {
        Self::from_entries(std::iter::empty::<String>()).expect("reserved tokens are distinct")
    }

    /// Builds a vocabulary from non-reserved entries in index order.
    pub fn from_entries<S: Into<String>>(entries: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(entries.into_iter().map(Into::into));
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Data(format!("invalid vocabulary token {tok:?}")));
            }
            if index.insert(tok.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Self { index, tokens })
    }

    /// Non-reserved entries only, in index order.
    pub fn entries(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Hex SHA-256 over the full token list.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for tok in &self.tokens {
            hasher.update(tok.as_bytes());
            hasher.update([b'\n']);
        }
        hex::encode(hasher.finalize())
    }
}

/// Counts every MR-linearisation and text token; keeps those seen at least
/// `min_count` times, ordered by descending frequency then lexicographically.
pub fn build_vocabulary(datasets: &[&Dataset], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut add = |tok: &str| *counts.entry(tok.to_string()).or_default() += 1;
    for ds in datasets {
        for inst in ds.iter() {
            inst.mr.linearize().iter().for_each(|t| add(t));
            inst.text_a.tokens().iter().for_each(|t| add(t));
            if let Some(b) = &inst.text_b {
                b.tokens().iter().for_each(|t| add(t));
            }
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(tok, c)| *c >= min_count && !RESERVED.contains(&tok.as_str()))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_entries(kept.into_iter().map(|(t, _)| t))
}
