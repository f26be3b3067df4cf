//! A reproducible template-generated restaurant domain for exercising the
//! full pipeline without external corpora.
//!
//! MRs are drawn from a small attribute inventory and realised by
//! templates into human-reference texts. Simulated NLG systems distort the
//! reference with a known number of errors (dropped slot phrases, wrong
//! values, repeated, deleted or stray words); simulated judges rank the
//! outputs of each MR by error count blurred with Gaussian noise.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::corpus::{record_to_pairs, RankedOutput, RawRankingRecord};
use crate::data::{Criterion, Dataset, MeaningRepresentation, TextOutput};
use crate::error::Result;
use crate::rng::{derived_rng, Rng};
use crate::synth::{Provenance, SyntheticSource};

const NAMES: &[&str] = &[
    "The Eagle", "The Mill", "Blue Spice", "Zizzi", "Aromi", "The Punter", "Wildwood", "Cotto", "Giraffe", "Alimentum",
    "Bibimbap House", "Browns Cambridge", "Clowns", "Fitzbillies", "Green Man", "Loch Fyne", "Midsummer House",
    "Strada", "Taste of Cambridge", "The Vaults", "Travellers Rest Beefeater", "The Waterman", "The Olive Grove",
    "The Phoenix", "The Plough", "The Golden Curry", "The Rice Boat", "The Twenty Two", "The Wrestlers", "Cocum",
];
const EAT_TYPES: &[&str] = &["restaurant", "pub", "coffee shop"];
const FOODS: &[&str] = &["italian", "chinese", "french", "indian", "japanese", "english", "fast food"];
const AREAS: &[&str] = &["city centre", "riverside"];
const PRICES: &[&str] = &["cheap", "moderate", "high"];
const FAMILY: &[&str] = &["yes", "no"];
const FILLER: &[&str] = &[
    "very", "also", "food", "area", "place", "nice", "great", "and", "located", "serves", "offers", "price", "family",
    "friendly", "near", "is", "in",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    pub train_mrs: usize,
    pub dev_mrs: usize,
    pub test_mrs: usize,
    /// Systems (outputs) per MR, at most 5.
    pub systems: usize,
    /// Standard deviation of the judges' noise on the error count.
    pub judge_noise: f64,
    /// Judge noise for the dev and test sections; zero ranks by true error count.
    pub eval_noise: f64,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            train_mrs: 240,
            dev_mrs: 30,
            test_mrs: 65,
            systems: 5,
            judge_noise: 1.0,
            eval_noise: 0.0,
            seed: 2019,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    /// One human reference per training MR.
    pub train_references: Vec<SyntheticSource>,
}

fn pick<'a>(rng: &mut Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

#[derive(Debug, Clone)]
struct WorldMr {
    mr: MeaningRepresentation,
    slots: Vec<(&'static str, String)>,
}

fn random_mr(rng: &mut Rng) -> WorldMr {
    let mut slots: Vec<(&'static str, String)> = vec![("name", pick(rng, NAMES).to_string())];
    let mut optional: Vec<(&'static str, &[&str])> = vec![
        ("eatType", EAT_TYPES),
        ("food", FOODS),
        ("area", AREAS),
        ("priceRange", PRICES),
        ("familyFriendly", FAMILY),
        ("near", NAMES),
    ];
    optional.shuffle(rng);
    let n = rng.gen_range(2..=4);
    let mut chosen: Vec<(&'static str, &[&str])> = optional.into_iter().take(n).collect();
    chosen.sort_by_key(|(a, _)| ["eatType", "food", "area", "priceRange", "familyFriendly", "near"].iter().position(|x| x == a));
    for (attr, values) in chosen {
        let mut v = pick(rng, values).to_string();
        while attr == "near" && v == slots[0].1 {
            v = pick(rng, values).to_string();
        }
        slots.push((attr, v));
    }
    let mr = MeaningRepresentation::from_pairs("inform", slots.iter().map(|(a, v)| (*a, v.as_str()))).expect("valid");
    WorldMr { mr, slots }
}

/// Phrases realising each slot; the name phrase comes first.
fn realise(slots: &[(&str, String)], rng: &mut Rng) -> Vec<Vec<String>> {
    let mut phrases = Vec::new();
    for (attr, v) in slots {
        let p = match *attr {
            "name" => v.clone(),
            "eatType" => format!("{} {v}", pick(rng, &["is a", "is a nice"])),
            "food" => format!("{} {v} food", pick(rng, &["serving", "that serves", "with"])),
            "area" => format!("in the {v}"),
            "priceRange" => format!("with {v} prices"),
            "familyFriendly" if v == "yes" => "which is family friendly".to_string(),
            "familyFriendly" => "which is not family friendly".to_string(),
            "near" => format!("near {v}"),
            _ => unreachable!("closed attribute set"),
        };
        phrases.push(TextOutput::new(p).tokens().to_vec());
    }
    if !slots.iter().any(|(a, _)| *a == "eatType") {
        phrases[0].push("is a place".to_string());
        let toks = TextOutput::new(phrases[0].join(" ")).tokens().to_vec();
        phrases[0] = toks;
    }
    phrases
}

fn join(phrases: &[Vec<String>]) -> Vec<String> {
    let mut out: Vec<String> = phrases.iter().flatten().cloned().collect();
    out.push(".".to_string());
    out
}

fn wrong_value(attr: &str, current: &str, rng: &mut Rng) -> String {
    let pool: &[&str] = match attr {
        "name" | "near" => NAMES,
        "eatType" => EAT_TYPES,
        "food" => FOODS,
        "area" => AREAS,
        "priceRange" => PRICES,
        _ => FAMILY,
    };
    loop {
        let v = pick(rng, pool);
        if !v.eq_ignore_ascii_case(current) {
            return v.to_string();
        }
    }
}

/// A system output with exactly `errors` simulated mistakes.
fn system_output(world: &WorldMr, errors: usize, rng: &mut Rng) -> TextOutput {
    let mut slots = world.slots.clone();
    let mut word_errors = 0;
    for _ in 0..errors {
        match rng.gen_range(0..4) {
            // drop a non-name slot
            0 if slots.len() > 2 => {
                let i = rng.gen_range(1..slots.len());
                slots.remove(i);
            }
            // wrong value for a non-binary slot
            1 => {
                let candidates: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].0 != "familyFriendly").collect();
                let i = candidates[rng.gen_range(0..candidates.len())];
                slots[i].1 = wrong_value(slots[i].0, &slots[i].1, rng);
            }
            _ => word_errors += 1,
        }
    }
    let mut tokens = join(&realise(&slots, rng));
    for _ in 0..word_errors {
        match rng.gen_range(0..3) {
            0 => {
                let i = rng.gen_range(0..tokens.len() - 1);
                let w = tokens[i].clone();
                tokens.insert(i + 1, w);
            }
            1 if tokens.len() > 3 => {
                let i = rng.gen_range(0..tokens.len() - 1);
                tokens.remove(i);
            }
            _ => {
                let i = rng.gen_range(0..tokens.len());
                tokens.insert(i, pick(rng, FILLER).to_string());
            }
        }
    }
    TextOutput::from_tokens(tokens)
}

fn reference(world: &WorldMr, rng: &mut Rng) -> TextOutput {
    TextOutput::from_tokens(join(&realise(&world.slots, rng)))
}

fn ranking_section(worlds: &[WorldMr], spec: &BenchmarkSpec, sigma: f64, rng: &mut Rng) -> Dataset {
    let noise = Normal::new(0.0, sigma.max(1e-12)).expect("valid sigma");
    let mut instances = Vec::new();
    for world in worlds {
        let mut judged: Vec<(String, f64)> = (0..spec.systems.clamp(2, 5))
            .map(|_| {
                let errors = rng.gen_range(0..=4);
                let text = system_output(world, errors, rng).raw().to_string();
                let perceived = errors as f64 + if sigma > 0.0 { noise.sample(rng) } else { 0.0 };
                (text, perceived)
            })
            .collect();
        judged.dedup_by(|x, y| x.0 == y.0);
        let mut order: Vec<f64> = judged.iter().map(|(_, p)| *p).collect();
        order.sort_by(|a, b| a.total_cmp(b));
        order.dedup();
        let outputs = judged
            .iter()
            .enumerate()
            .map(|(s, (text, p))| RankedOutput {
                system: format!("sys{s}"),
                text: text.clone(),
                rank: order.iter().position(|q| q == p).expect("present") as u32 + 1,
            })
            .collect();
        let record = RawRankingRecord {
            mr: world.mr.to_string(),
            outputs,
        };
        instances.extend(record_to_pairs(&world.mr, &record).into_iter().filter(|i| i.text_b.as_ref() != Some(&i.text_a)));
    }
    Dataset::new(instances, Criterion::Quality)
}

pub fn generate(spec: &BenchmarkSpec) -> Result<Benchmark> {
    let mut rng = derived_rng(spec.seed, "benchmark", 0);
    let mut worlds: Vec<WorldMr> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let total = spec.train_mrs + spec.dev_mrs + spec.test_mrs;
    while worlds.len() < total {
        let w = random_mr(&mut rng);
        if seen.insert(w.mr.to_string()) {
            worlds.push(w);
        }
    }
    let (train_w, rest) = worlds.split_at(spec.train_mrs);
    let (dev_w, test_w) = rest.split_at(spec.dev_mrs);
    let train_references = train_w
        .iter()
        .map(|w| SyntheticSource::reference(w.mr.clone(), reference(w, &mut rng), Provenance::HumanReferenceTrain))
        .collect();
    Ok(Benchmark {
        train: ranking_section(train_w, spec, spec.judge_noise, &mut rng),
        dev: ranking_section(dev_w, spec, spec.eval_noise, &mut rng),
        test: ranking_section(test_w, spec, spec.eval_noise, &mut rng),
        train_references,
    })
}
