//! Synthetic training data from corrupted texts.
//!
//! A text is distorted with `k` word-level errors (deletion, duplication in
//! place or at a random position, replacement by or insertion of a random
//! dictionary word). Rating instances lower the source score by `k` (one
//! extra point off a top score); ranking instances pair two corruption
//! levels of the same text, the less corrupted one preferred.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng as _;

use crate::data::{is_article, is_punctuation, MeaningRepresentation, QeInstance, TextOutput, RATING_MAX, RATING_MIN};
use crate::delex::is_placeholder;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, Rng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptionDictionary {
    pool: Vec<String>,
}

impl CorruptionDictionary {
    /// Every non-punctuation, non-placeholder token type, sorted.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a TextOutput>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for t in texts {
            for tok in t.tokens() {
                if !is_punctuation(tok) && !is_placeholder(tok) && !tok.starts_with('<') {
                    seen.insert(tok.clone());
                }
            }
        }
        if seen.is_empty() {
            return Err(Error::Empty("corruption dictionary corpus"));
        }
        Ok(Self {
            pool: seen.into_iter().collect(),
        })
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    fn draw(&self, rng: &mut Rng) -> &str {
        &self.pool[rng.gen_range(0..self.pool.len())]
    }

    /// A dictionary word different from `avoid` when the pool allows it.
    fn draw_other(&self, rng: &mut Rng, avoid: &str) -> &str {
        if self.pool.len() == 1 {
            return &self.pool[0];
        }
        loop {
            let w = self.draw(rng);
            if w != avoid {
                return w;
            }
        }
    }
}

/// Tokens changes prefer: anything but articles and punctuation.
pub fn is_preferred_target(token: &str) -> bool {
    !is_article(token) && !is_punctuation(token)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditKind {
    Delete,
    DuplicateInPlace,
    DuplicateRandom,
    Replace,
    Insert,
}

const EDITS: [EditKind; 5] = [
    EditKind::Delete,
    EditKind::DuplicateInPlace,
    EditKind::DuplicateRandom,
    EditKind::Replace,
    EditKind::Insert,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionSpec {
    pub n_errors: usize,
    pub seed: u64,
}

/// Candidate targets in order of preference: untouched preferred tokens,
/// untouched tokens, preferred tokens, any token.
fn pick_target(tokens: &[String], touched: &[bool], rng: &mut Rng) -> usize {
    let tiers: [&dyn Fn(usize) -> bool; 3] = [
        &|i| !touched[i] && is_preferred_target(&tokens[i]),
        &|i| !touched[i],
        &|i| is_preferred_target(&tokens[i]),
    ];
    for keep in tiers {
        let candidates: Vec<usize> = (0..tokens.len()).filter(|&i| keep(i)).collect();
        if !candidates.is_empty() {
            return candidates[rng.gen_range(0..candidates.len())];
        }
    }
    rng.gen_range(0..tokens.len())
}

/// Insertion slot whose neighbours were not touched by earlier edits.
fn pick_slot(touched: &[bool], rng: &mut Rng) -> usize {
    let free: Vec<usize> = (0..=touched.len())
        .filter(|&p| (p == 0 || !touched[p - 1]) && (p == touched.len() || !touched[p]))
        .collect();
    if free.is_empty() {
        rng.gen_range(0..=touched.len())
    } else {
        free[rng.gen_range(0..free.len())]
    }
}

/// Records an inserted token together with its neighbours.
fn mark_insertion(touched: &mut Vec<bool>, pos: usize) {
    touched.insert(pos, true);
    if pos > 0 {
        touched[pos - 1] = true;
    }
    if pos + 1 < touched.len() {
        touched[pos + 1] = true;
    }
}

/// Applies `n_errors` random edits to the token sequence. Each edit avoids
/// tokens and gaps touched by earlier ones while any remain, so edits do
/// not undo or merge with each other.
pub fn corrupt_tokens(tokens: &[String], n_errors: usize, dict: &CorruptionDictionary, rng: &mut Rng) -> Vec<String> {
    let mut out = tokens.to_vec();
    let mut touched = vec![false; out.len()];
    for _ in 0..n_errors {
        let mut kind = EDITS[rng.gen_range(0..EDITS.len())];
        if out.is_empty() {
            out.push(dict.draw(rng).to_string());
            touched.push(true);
            continue;
        }
        if kind == EditKind::Delete && out.len() == 1 {
            kind = EDITS[1 + rng.gen_range(0..EDITS.len() - 1)];
        }
        match kind {
            EditKind::Delete => {
                let t = pick_target(&out, &touched, rng);
                out.remove(t);
                touched.remove(t);
                if t > 0 {
                    touched[t - 1] = true;
                }
                if t < touched.len() {
                    touched[t] = true;
                }
            }
            EditKind::DuplicateInPlace => {
                let t = pick_target(&out, &touched, rng);
                let w = out[t].clone();
                out.insert(t + 1, w);
                touched[t] = true;
                touched.insert(t + 1, true);
            }
            EditKind::DuplicateRandom => {
                let t = pick_target(&out, &touched, rng);
                let w = out[t].clone();
                touched[t] = true;
                let pos = pick_slot(&touched, rng);
                out.insert(pos, w);
                mark_insertion(&mut touched, pos);
            }
            EditKind::Replace => {
                let t = pick_target(&out, &touched, rng);
                out[t] = dict.draw_other(rng, &out[t]).to_string();
                touched[t] = true;
            }
            EditKind::Insert => {
                let w = dict.draw(rng).to_string();
                let pos = pick_slot(&touched, rng);
                out.insert(pos, w);
                mark_insertion(&mut touched, pos);
            }
        }
    }
    out
}

pub fn corrupt(text: &TextOutput, spec: CorruptionSpec, dict: &CorruptionDictionary) -> TextOutput {
    if spec.n_errors == 0 {
        return text.clone();
    }
    let mut rng = derived_rng(spec.seed, "corrupt", spec.n_errors as u64);
    TextOutput::from_tokens(corrupt_tokens(text.tokens(), spec.n_errors, dict, &mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SystemOutputTrain,
    HumanReferenceTrain,
    HumanReferenceTest,
}

impl Provenance {
    fn tag(self) -> &'static str {
        match self {
            Provenance::SystemOutputTrain => "output",
            Provenance::HumanReferenceTrain => "train-ref",
            Provenance::HumanReferenceTest => "test-ref",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSource {
    pub mr: MeaningRepresentation,
    pub text: TextOutput,
    pub base_score: f64,
    pub provenance: Provenance,
}

impl SyntheticSource {
    pub fn new(mr: MeaningRepresentation, text: TextOutput, base_score: f64, provenance: Provenance) -> Result<Self> {
        crate::data::check_rating(base_score)?;
        Ok(Self {
            mr,
            text,
            base_score,
            provenance,
        })
    }

    /// Human references are taken as top-of-scale.
    pub fn reference(mr: MeaningRepresentation, text: TextOutput, provenance: Provenance) -> Self {
        Self {
            mr,
            text,
            base_score: RATING_MAX,
            provenance,
        }
    }
}

/// Target score after `k` errors.
pub fn lowered_score(base: f64, k: usize) -> f64 {
    let top_penalty = if base == RATING_MAX { 1.0 } else { 0.0 };
    (base - k as f64 - top_penalty).clamp(RATING_MIN, RATING_MAX)
}

/// One rating instance per error level `1..=max_errors`.
pub fn synth_ratings(source: &SyntheticSource, max_errors: usize, dict: &CorruptionDictionary, seed: u64) -> Vec<QeInstance> {
    (1..=max_errors)
        .map(|k| {
            let text = corrupt(&source.text, CorruptionSpec { n_errors: k, seed }, dict);
            QeInstance::rating(
                source.mr.clone(),
                text,
                lowered_score(source.base_score, k),
                format!("synth:rating:{}:{k}", source.provenance.tag()),
            )
            .expect("lowered score stays on the scale")
            .synthetic()
        })
        .collect()
}

/// Ranking pairs between corruption levels `0..=max_errors` of one text:
/// every level against the clean text, plus `n_random_pairs` of the other
/// level pairs drawn without replacement.
pub fn synth_pairs(
    source: &SyntheticSource,
    max_errors: usize,
    n_random_pairs: usize,
    dict: &CorruptionDictionary,
    seed: u64,
) -> Vec<QeInstance> {
    let variants: Vec<TextOutput> = (0..=max_errors)
        .map(|k| corrupt(&source.text, CorruptionSpec { n_errors: k, seed }, dict))
        .collect();
    let mut pairs: Vec<(usize, usize)> = (1..=max_errors).map(|k| (0, k)).collect();
    let rest: Vec<(usize, usize)> = (1..=max_errors)
        .flat_map(|i| (i + 1..=max_errors).map(move |j| (i, j)))
        .collect();
    let mut rng = derived_rng(seed, "pairs", 0);
    let take = n_random_pairs.min(rest.len());
    let mut chosen: Vec<usize> = sample(&mut rng, rest.len(), take).into_vec();
    chosen.sort_unstable();
    pairs.extend(chosen.into_iter().map(|i| rest[i]));

    pairs
        .into_iter()
        .map(|(i, j)| {
            QeInstance::ranking(
                source.mr.clone(),
                variants[i].clone(),
                variants[j].clone(),
                format!("synth:pair:{}:{i}-{j}", source.provenance.tag()),
            )
            .synthetic()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthMode {
    Ratings,
    Pairs,
    Both,
}

impl std::str::FromStr for SynthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratings" => Ok(SynthMode::Ratings),
            "pairs" => Ok(SynthMode::Pairs),
            "both" => Ok(SynthMode::Both),
            other => Err(Error::Config(format!("unknown synth mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthOptions {
    pub mode: SynthMode,
    pub max_errors: usize,
    pub n_random_pairs: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            mode: SynthMode::Both,
            max_errors: 4,
            n_random_pairs: 5,
            seed: 0,
        }
    }
}

/// Runs the generator over every source with per-source derived seeds.
pub fn synthesize(sources: &[SyntheticSource], dict: &CorruptionDictionary, opts: &SynthOptions) -> Vec<QeInstance> {
    let mut out = Vec::new();
    for (i, src) in sources.iter().enumerate() {
        let seed = crate::rng::derive_seed(opts.seed, "source", i as u64);
        if matches!(opts.mode, SynthMode::Ratings | SynthMode::Both) {
            out.extend(synth_ratings(src, opts.max_errors, dict, seed));
        }
        if matches!(opts.mode, SynthMode::Pairs | SynthMode::Both) {
            out.extend(synth_pairs(src, opts.max_errors, opts.n_random_pairs, dict, seed));
        }
    }
    out
}

/// Distinct (MR, text) sources from the non-synthetic instances of a
/// training set. Rating instances carry their human score; texts seen only
/// in ranking instances get the top of the scale.
pub fn sources_from_instances<'a>(instances: impl IntoIterator<Item = &'a QeInstance>) -> Vec<SyntheticSource> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for inst in instances {
        if inst.is_synthetic {
            continue;
        }
        let texts = std::iter::once(&inst.text_a).chain(inst.text_b.as_ref());
        for text in texts {
            if text.tokens().is_empty() || !seen.insert((inst.mr.to_string(), text.raw().to_string())) {
                continue;
            }
            out.push(SyntheticSource {
                mr: inst.mr.clone(),
                text: text.clone(),
                base_score: inst.rating.unwrap_or(RATING_MAX),
                provenance: Provenance::SystemOutputTrain,
            });
        }
    }
    out
}
