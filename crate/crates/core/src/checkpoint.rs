//! Versioned checkpoint files.
//!
//! Layout: a UTF-8 header of `key = value` lines and named sections, ending
//! with a line `end-header`, followed by every parameter tensor in
//! declaration order as little-endian `f64` values.
//!
//! ```text
//! qerank-checkpoint
//! version = 1
//! [config]
//! width = 50
//! ...
//! [metadata]
//! epoch = 12
//! dev_metric = 0.41
//! seed = 7
//! [delex]
//! area<TAB>names_only<TAB>city centre,riverside
//! [vocab]
//! hash = <sha256 hex>
//! size = 1234
//! <one token per line>
//! [params]
//! embedding 1234 50
//! ...
//! end-header
//! <binary>
//! ```

use std::fs;
use std::path::Path;

use crate::config::TrainConfig;
use crate::data::Vocabulary;
use crate::delex::RuleSet;
use crate::error::{Error, Result};
use crate::model::QeModel;
use crate::nn::Tensor;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "qerank-checkpoint";
const END: &str = "end-header";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMetadata {
    pub epoch: usize,
    pub dev_metric: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: QeModel,
    pub metadata: TrainingMetadata,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let mut h = String::new();
        h.push_str(MAGIC);
        h.push('\n');
        h.push_str(&format!("version = {FORMAT_VERSION}\n"));
        h.push_str("[config]\n");
        h.push_str(&m.config.to_text());
        h.push_str("[metadata]\n");
        h.push_str(&format!("epoch = {}\n", self.metadata.epoch));
        match self.metadata.dev_metric {
            Some(v) => h.push_str(&format!("dev_metric = {v:?}\n")),
            None => h.push_str("dev_metric = none\n"),
        }
        h.push_str(&format!("seed = {}\n", self.metadata.seed));
        h.push_str("[delex]\n");
        h.push_str(&m.rules.to_file_string());
        h.push_str("[vocab]\n");
        h.push_str(&format!("hash = {}\n", m.vocab.content_hash()));
        h.push_str(&format!("size = {}\n", m.vocab.entries().len()));
        for tok in m.vocab.entries() {
            h.push_str(tok);
            h.push('\n');
        }
        h.push_str("[params]\n");
        for (_, name, t) in m.params().iter() {
            let dims: Vec<String> = t.shape().iter().map(ToString::to_string).collect();
            h.push_str(&format!("{name} {}\n", dims.join(" ")));
        }
        h.push_str(END);
        h.push('\n');

        let mut bytes = h.into_bytes();
        bytes.reserve(m.params().total_size() * 8);
        for (_, _, t) in m.params().iter() {
            for v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let marker = format!("\n{END}\n");
        let split = bytes
            .windows(marker.len())
            .position(|w| w == marker.as_bytes())
            .ok_or_else(|| corrupt("header terminator not found"))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| corrupt("header is not UTF-8"))?;
        let body = &bytes[split + marker.len()..];

        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(corrupt("missing magic line"));
        }
        let version_line = lines.next().ok_or_else(|| corrupt("missing version"))?;
        let version: u32 = version_line
            .strip_prefix("version = ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| corrupt("malformed version line"))?;
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }

        let mut sections: Vec<(&str, Vec<&str>)> = Vec::new();
        for line in lines {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                sections.push((name, Vec::new()));
            } else {
                let (_, body) = sections.last_mut().ok_or_else(|| corrupt("content before first section"))?;
                body.push(line);
            }
        }
        let section = |name: &str| -> Result<&Vec<&str>> {
            sections
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, b)| b)
                .ok_or_else(|| corrupt(format!("missing [{name}] section")))
        };
        let kv = |lines: &[&str], key: &str| -> Result<String> {
            lines
                .iter()
                .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
                .ok_or_else(|| corrupt(format!("missing key {key}")))
        };

        let config = TrainConfig::parse(&section("config")?.join("\n"), Path::new("<checkpoint config>"))
            .map_err(|e| corrupt(e.to_string()))?;

        let meta = section("metadata")?;
        let metadata = TrainingMetadata {
            epoch: kv(meta, "epoch")?.parse().map_err(|_| corrupt("bad epoch"))?,
            dev_metric: match kv(meta, "dev_metric")?.as_str() {
                "none" => None,
                v => Some(v.parse().map_err(|_| corrupt("bad dev_metric"))?),
            },
            seed: kv(meta, "seed")?.parse().map_err(|_| corrupt("bad seed"))?,
        };

        let rules = RuleSet::parse(&section("delex")?.join("\n"), Path::new("<checkpoint delex>"))
            .map_err(|e| corrupt(e.to_string()))?;

        let vocab_lines = section("vocab")?;
        if vocab_lines.len() < 2 {
            return Err(corrupt("truncated vocabulary section"));
        }
        let expected_hash = kv(&vocab_lines[..1], "hash")?;
        let size: usize = kv(&vocab_lines[1..2], "size")?.parse().map_err(|_| corrupt("bad vocabulary size"))?;
        let tokens = &vocab_lines[2..];
        if tokens.len() != size {
            return Err(corrupt(format!("vocabulary lists {} tokens, header says {size}", tokens.len())));
        }
        let vocab = Vocabulary::from_entries(tokens.iter().copied()).map_err(|e| corrupt(e.to_string()))?;
        let actual = vocab.content_hash();
        if actual != expected_hash {
            return Err(Error::VocabularyMismatch {
                expected: expected_hash,
                actual,
            });
        }

        let (mut params, layout) = QeModel::skeleton(vocab.len(), &config);
        let declared = section("params")?;
        if declared.len() != params.len() {
            return Err(corrupt(format!(
                "{} parameter tensors declared, configuration implies {}",
                declared.len(),
                params.len()
            )));
        }
        let mut offset = 0;
        for (id, line) in declared.iter().enumerate() {
            let mut parts = line.split(' ');
            let name = parts.next().unwrap_or_default();
            let dims: Vec<usize> = parts
                .map(|d| d.parse().map_err(|_| corrupt(format!("bad dimension in {line:?}"))))
                .collect::<Result<_>>()?;
            let expected = params.get(id);
            if name != params.name(id) || dims != expected.shape() {
                return Err(corrupt(format!(
                    "parameter {id} is {name} {dims:?}, expected {} {:?}",
                    params.name(id),
                    expected.shape()
                )));
            }
            let n: usize = dims.iter().product();
            let end = offset + n * 8;
            let chunk = body.get(offset..end).ok_or_else(|| corrupt("parameter data truncated"))?;
            let values = chunk
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            *params.get_mut(id) = Tensor::new(dims, values)?;
            offset = end;
        }
        if offset != body.len() {
            return Err(corrupt(format!("{} trailing bytes after parameter data", body.len() - offset)));
        }

        Ok(Self {
            model: QeModel::from_parts(vocab, config, rules, params, layout),
            metadata,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
