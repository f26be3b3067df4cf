//! Corpus ingestion (ratings and rankings TSV), canonical JSONL I/O, and
//! MR-disjoint splitting.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::data::{check_rating, Criterion, Dataset, MeaningRepresentation, QeInstance, TextOutput};
use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const MAX_RANKED_OUTPUTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRatingsRecord {
    pub mr: String,
    pub system: Option<String>,
    pub text: String,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedOutput {
    pub system: String,
    pub text: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRankingRecord {
    pub mr: String,
    pub outputs: Vec<RankedOutput>,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

/// Data lines with 1-based line numbers, header and blank lines skipped.
fn data_lines(lines: &[String]) -> impl Iterator<Item = (usize, &str)> {
    lines
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_mr(path: &Path, line: usize, s: &str) -> Result<MeaningRepresentation> {
    s.parse().map_err(|e: Error| Error::parse(path, line, e.to_string()))
}

pub fn read_ratings_tsv(path: &Path) -> Result<Vec<RawRatingsRecord>> {
    let lines = read_lines(path)?;
    let mut out = Vec::new();
    for (n, line) in data_lines(&lines) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(path, n, format!("expected 4 columns, found {}", cols.len())));
        }
        let rating: f64 = cols[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, n, format!("non-numeric rating {:?}", cols[3])))?;
        check_rating(rating).map_err(|e| Error::parse(path, n, e.to_string()))?;
        out.push(RawRatingsRecord {
            mr: cols[0].to_string(),
            system: Some(cols[1].to_string()).filter(|s| !s.is_empty()),
            text: cols[2].to_string(),
            rating,
        });
    }
    Ok(out)
}

pub fn read_rankings_tsv(path: &Path) -> Result<Vec<RawRankingRecord>> {
    let lines = read_lines(path)?;
    let mut out = Vec::new();
    for (n, line) in data_lines(&lines) {
        let cols: Vec<&str> = line.split('\t').collect();
        let triples = &cols[1..];
        if triples.len() % 3 != 0 {
            return Err(Error::parse(path, n, "outputs must come in system/text/rank triples"));
        }
        let mut outputs = Vec::new();
        for t in triples.chunks(3) {
            if t.iter().all(|c| c.trim().is_empty()) {
                continue;
            }
            let rank: u32 = t[2]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, n, format!("non-numeric rank {:?}", t[2])))?;
            if rank == 0 {
                return Err(Error::parse(path, n, "ranks must be positive"));
            }
            outputs.push(RankedOutput {
                system: t[0].to_string(),
                text: t[1].to_string(),
                rank,
            });
        }
        if outputs.len() < 2 {
            return Err(Error::parse(path, n, format!("need at least 2 outputs, found {}", outputs.len())));
        }
        if outputs.len() > MAX_RANKED_OUTPUTS {
            return Err(Error::parse(path, n, format!("at most {MAX_RANKED_OUTPUTS} outputs per record")));
        }
        out.push(RawRankingRecord {
            mr: cols[0].to_string(),
            outputs,
        });
    }
    Ok(out)
}

/// One rating instance per TSV record.
pub fn load_ratings(path: &Path, criterion: Criterion) -> Result<Dataset> {
    let records = read_ratings_tsv(path)?;
    let mut instances = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        let mr = parse_mr(path, i + 2, &r.mr)?;
        let tag = r.system.map_or_else(|| "rating".to_string(), |s| format!("rating:{s}"));
        instances.push(QeInstance::rating(mr, TextOutput::new(r.text), r.rating, tag)?);
    }
    Ok(Dataset::new(instances, criterion))
}

/// Pairwise instances from one ranked record: one per output pair with
/// different ranks, the better-ranked output first. Ties are dropped.
pub fn record_to_pairs(mr: &MeaningRepresentation, record: &RawRankingRecord) -> Vec<QeInstance> {
    let mut out = Vec::new();
    let outs = &record.outputs;
    for i in 0..outs.len() {
        for j in i + 1..outs.len() {
            let (a, b) = (&outs[i], &outs[j]);
            if a.rank == b.rank {
                continue;
            }
            let (better, worse) = if a.rank < b.rank { (a, b) } else { (b, a) };
            out.push(QeInstance::ranking(
                mr.clone(),
                TextOutput::new(better.text.clone()),
                TextOutput::new(worse.text.clone()),
                format!("rank:{}>{}", better.system, worse.system),
            ));
        }
    }
    out
}

pub fn load_rankings(path: &Path, criterion: Criterion) -> Result<Dataset> {
    let records = read_rankings_tsv(path)?;
    let mut instances = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let mr = parse_mr(path, i + 2, &r.mr)?;
        instances.extend(record_to_pairs(&mr, r));
    }
    Ok(Dataset::new(instances, criterion))
}

pub fn read_jsonl(path: &Path, criterion: Criterion) -> Result<Dataset> {
    let lines = read_lines(path)?;
    let mut instances = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: QeInstance = serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        instances.push(inst);
    }
    Ok(Dataset::new(instances, criterion))
}

pub fn write_jsonl(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for inst in dataset.iter() {
        let line = serde_json::to_string(inst).expect("instances serialise");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Section ratios (proportional, need not sum to anything) plus seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, dev: f64, test: f64, seed: u64) -> Result<Self> {
        if [train, dev, test].iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::Config("split ratios must be positive".into()));
        }
        Ok(Self { train, dev, test, seed })
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 8.0,
            dev: 1.0,
            test: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

/// Instance indices grouped by canonical MR string, in first-seen order.
fn group_by_mr(dataset: &Dataset) -> Vec<Vec<usize>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, inst) in dataset.iter().enumerate() {
        let key = inst.mr.to_string();
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(i);
    }
    order.into_iter().map(|k| groups.remove(&k).expect("grouped")).collect()
}

fn shuffled_groups(dataset: &Dataset, seed: u64) -> Vec<Vec<usize>> {
    let mut groups = group_by_mr(dataset);
    // sort by key first so the shuffle does not depend on input order quirks
    groups.sort_by_key(|g| dataset.instances[g[0]].mr.to_string());
    groups.shuffle(&mut rng_from(seed));
    groups
}

fn collect(dataset: &Dataset, groups: &[Vec<usize>]) -> Dataset {
    let mut idx: Vec<usize> = groups.iter().flatten().copied().collect();
    idx.sort_unstable();
    Dataset::new(
        idx.into_iter().map(|i| dataset.instances[i].clone()).collect(),
        dataset.criterion,
    )
}

/// Largest-remainder apportionment of `total` items over `weights`, with
/// every section getting at least one.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| (e.floor() as usize).max(1)).collect();
    while counts.iter().sum::<usize>() > total {
        let (i, _) = counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 1)
            .max_by(|a, b| (*a.1 as f64 - exact[a.0]).total_cmp(&(*b.1 as f64 - exact[b.0])))
            .expect("total >= sections");
        counts[i] -= 1;
    }
    while counts.iter().sum::<usize>() < total {
        let (i, _) = counts
            .iter()
            .enumerate()
            .max_by(|a, b| (exact[a.0] - *a.1 as f64).total_cmp(&(exact[b.0] - *b.1 as f64)).then(b.0.cmp(&a.0)))
            .expect("nonempty");
        counts[i] += 1;
    }
    counts
}

/// Shuffles the distinct MRs and partitions them by the split ratios; each
/// instance follows its MR.
pub fn split_by_mr(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset to split"));
    }
    let groups = shuffled_groups(dataset, spec.seed);
    if groups.len() < 3 {
        return Err(Error::TooFewMrs {
            available: groups.len(),
            required: 3,
        });
    }
    let counts = apportion(groups.len(), &[spec.train, spec.dev, spec.test]);
    let (train, rest) = groups.split_at(counts[0]);
    let (dev, test) = rest.split_at(counts[1]);
    Ok(Split {
        train: collect(dataset, train),
        dev: collect(dataset, dev),
        test: collect(dataset, test),
    })
}

/// `k` folds over MR blocks: fold `i` tests on block `i`, validates on block
/// `(i + 1) mod k` and trains on the rest.
pub fn cv_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 3 {
        return Err(Error::Config(format!("cross-validation needs k >= 3, got {k}")));
    }
    if dataset.is_empty() {
        return Err(Error::Empty("dataset to split"));
    }
    let groups = shuffled_groups(dataset, seed);
    if groups.len() < k {
        return Err(Error::TooFewMrs {
            available: groups.len(),
            required: k,
        });
    }
    let sizes = apportion(groups.len(), &vec![1.0; k]);
    let mut blocks: Vec<&[Vec<usize>]> = Vec::with_capacity(k);
    let mut start = 0;
    for s in sizes {
        blocks.push(&groups[start..start + s]);
        start += s;
    }
    Ok((0..k)
        .map(|i| {
            let dev_block = (i + 1) % k;
            let train: Vec<Vec<usize>> = (0..k)
                .filter(|&b| b != i && b != dev_block)
                .flat_map(|b| blocks[b].iter().cloned())
                .collect();
            Split {
                train: collect(dataset, &train),
                dev: collect(dataset, blocks[dev_block]),
                test: collect(dataset, blocks[i]),
            }
        })
        .collect())
}

/// Count of instances per canonical MR string.
pub fn mr_histogram(dataset: &Dataset) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for inst in dataset.iter() {
        *h.entry(inst.mr.to_string()).or_insert(0) += 1;
    }
    h
}
