use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use qerank_core::corpus::{cv_folds, load_rankings, load_ratings, read_jsonl, split_by_mr, write_jsonl, SplitSpec};
use qerank_core::delex::RuleSet;
use qerank_core::eval::{
    bootstrap_compare, pearson, predict_dataset, score_predictions, williams_test, Predictions, Task,
};
use qerank_core::rng::derive_seed;
use qerank_core::synth::{
    sources_from_instances, synthesize, CorruptionDictionary, Provenance, SynthOptions, SyntheticSource,
};
use qerank_core::trainer::{delexicalize_dataset, multi_seed_run, train};
use qerank_core::{Checkpoint, Dataset, Error, MeaningRepresentation, TextOutput, TrainConfig};

use crate::manifest::RunManifest;
use crate::{
    CompareArgs, CompareTest, ConfigArgs, CorpusFormat, EvalArgs, IngestArgs, MultiseedArgs, PredictArgs, RankArgs,
    SourceKind, SplitArgs, SynthArgs, TrainArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(io_err(path))?;
    Ok(())
}

fn load_rules(path: Option<&Path>, manifest: &mut RunManifest) -> CliResult<RuleSet> {
    match path {
        Some(p) => {
            manifest.input(p)?;
            Ok(RuleSet::load(p)?)
        }
        None => Ok(RuleSet::default()),
    }
}

pub fn ingest(args: &IngestArgs, seed: u64) -> CliResult {
    let mut manifest = RunManifest::new("ingest", seed);
    manifest.input(&args.input)?;
    let mut data = match args.format {
        CorpusFormat::Nem => load_ratings(&args.input, args.criterion)?,
        CorpusFormat::E2e => load_rankings(&args.input, args.criterion)?,
    };
    if args.delex {
        let rules = load_rules(args.rules.as_deref(), &mut manifest)?;
        data = delexicalize_dataset(&data, &rules);
    }
    write_jsonl(&args.out, &data)?;
    manifest.artifact(&args.out);
    log::info!("wrote {} instances to {}", data.len(), args.out.display());
    manifest.emit(Some(&args.out))?;
    Ok(())
}

pub fn split(args: &SplitArgs, seed: u64) -> CliResult {
    let mut manifest = RunManifest::new("split", seed);
    manifest.input(&args.input)?;
    let data = read_jsonl(&args.input, args.criterion)?;
    fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    let split_seed = derive_seed(seed, "split", 0);
    let splits = match args.cv {
        Some(k) => cv_folds(&data, k, split_seed)?,
        None => {
            let ratio: Vec<f64> = args
                .ratio
                .split(':')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| CliError::Usage(format!("bad --ratio {:?}; expected e.g. 8:1:1", args.ratio)))?;
            if ratio.len() != 3 {
                return Err(CliError::Usage(format!("bad --ratio {:?}; expected three parts", args.ratio)));
            }
            vec![split_by_mr(&data, &SplitSpec::new(ratio[0], ratio[1], ratio[2], split_seed)?)?]
        }
    };
    let many = splits.len() > 1;
    for (i, s) in splits.iter().enumerate() {
        for (name, part) in [("train", &s.train), ("dev", &s.dev), ("test", &s.test)] {
            let file = if many { format!("fold{i}.{name}.jsonl") } else { format!("{name}.jsonl") };
            let path = args.out_dir.join(file);
            write_jsonl(&path, part)?;
            manifest.artifact(&path);
        }
    }
    manifest.emit(Some(&args.out_dir.join("split")))?;
    Ok(())
}

/// Reference file: header `mr<TAB>text`, one human reference per line.
fn read_references(path: &Path, provenance: Provenance) -> CliResult<Vec<SyntheticSource>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: m,
        };
        let (mr, txt) = line.split_once('\t').ok_or_else(|| bad("expected mr<TAB>text".into()))?;
        let mr: MeaningRepresentation = mr.parse().map_err(|e: Error| bad(e.to_string()))?;
        out.push(SyntheticSource::reference(mr, TextOutput::new(txt), provenance));
    }
    Ok(out)
}

pub fn synth(args: &SynthArgs, seed: u64) -> CliResult {
    let mut manifest = RunManifest::new("synth", seed);
    manifest.input(&args.input)?;
    let data = read_jsonl(&args.input, args.criterion)?;
    let sources = match args.sources {
        SourceKind::Outputs => sources_from_instances(data.iter()),
        SourceKind::TrainRefs | SourceKind::TestRefs => {
            let refs = args
                .refs
                .as_deref()
                .ok_or_else(|| CliError::Usage("--sources train-refs/test-refs needs --refs".into()))?;
            manifest.input(refs)?;
            let provenance = if args.sources == SourceKind::TrainRefs {
                Provenance::HumanReferenceTrain
            } else {
                Provenance::HumanReferenceTest
            };
            read_references(refs, provenance)?
        }
    };
    let dict = CorruptionDictionary::build(data.iter().flat_map(|i| std::iter::once(&i.text_a).chain(&i.text_b)))?;
    let opts = SynthOptions {
        mode: args.mode,
        max_errors: args.max_errors,
        n_random_pairs: args.random_pairs,
        seed: derive_seed(seed, "synth", 0),
    };
    let synthetic = synthesize(&sources, &dict, &opts);
    let instances = if args.append {
        data.instances.iter().cloned().chain(synthetic).collect()
    } else {
        synthetic
    };
    let out = Dataset::new(instances, data.criterion);
    write_jsonl(&args.out, &out)?;
    manifest.artifact(&args.out);
    log::info!("{} sources -> {} instances", sources.len(), out.len());
    manifest.emit(Some(&args.out))?;
    Ok(())
}

fn resolve_config(args: &ConfigArgs, seed: Option<u64>, manifest: &mut RunManifest) -> CliResult<TrainConfig> {
    let path = args
        .config
        .clone()
        .or_else(|| std::env::var_os("QE_CONFIG").map(PathBuf::from));
    let mut config = match &path {
        Some(p) => {
            manifest.input(p)?;
            TrainConfig::load(p)?
        }
        None => TrainConfig::default(),
    };
    for (key, value) in args.overrides() {
        config.set(key, &value)?;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {kv:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    manifest.config_text(&config.to_text());
    Ok(config)
}

pub fn train_cmd(args: &TrainArgs, seed: Option<u64>) -> CliResult {
    let mut manifest = RunManifest::new("train", seed.unwrap_or(0));
    let config = resolve_config(&args.config, seed, &mut manifest)?;
    manifest.seed = config.seed;
    manifest.input(&args.train)?;
    manifest.input(&args.dev)?;
    let rules = load_rules(args.rules.as_deref(), &mut manifest)?;
    let train_set = read_jsonl(&args.train, args.criterion)?;
    let dev_set = read_jsonl(&args.dev, args.criterion)?;
    let (checkpoint, history) = train(&train_set, &dev_set, &config, &rules)?;
    checkpoint.save(&args.out)?;
    manifest.artifact(&args.out);
    if let Some(h) = &args.history {
        let mut text = String::from("epoch\tinstances\ttrain_loss\tdev_metric\n");
        for e in &history.epochs {
            text.push_str(&format!(
                "{}\t{}\t{:?}\t{}\n",
                e.epoch,
                e.instances,
                e.train_loss,
                e.dev_metric.map(|v| format!("{v:?}")).unwrap_or_else(|| "nan".into())
            ));
        }
        write_file(h, &text)?;
        manifest.artifact(h);
    }
    let sel = history.selected_epoch();
    log::info!("selected epoch {} ({} = {:?})", sel.epoch, history.selection_metric, sel.dev_metric);
    manifest.emit(Some(&args.out))?;
    Ok(())
}

pub fn predict(args: &PredictArgs, seed: u64) -> CliResult {
    let mut manifest = RunManifest::new("predict", seed);
    manifest.input(&args.model)?;
    manifest.input(&args.input)?;
    let model = Checkpoint::load(&args.model)?.model;
    let data = read_jsonl(&args.input, args.criterion)?;
    let preds = data
        .iter()
        .map(|i| model.predict(&i.mr, &i.text_a))
        .collect::<qerank_core::Result<Vec<f64>>>()?;
    let text = Predictions::Rating(preds).to_tsv();
    finish_output(&mut manifest, args.out.as_deref(), &text)
}

fn finish_output(manifest: &mut RunManifest, out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => {
            write_file(p, text)?;
            manifest.artifact(p);
        }
        None => {
            print!("{text}");
            std::io::stdout().flush().ok();
        }
    }
    manifest.emit(out)?;
    Ok(())
}

pub fn rank(args: &RankArgs, seed: u64) -> CliResult {
    let mut manifest = RunManifest::new("rank", seed);
    manifest.input(&args.model)?;
    let model = Checkpoint::load(&args.model)?.model;
    let text = if let Some(input) = &args.input {
        manifest.input(input)?;
        let data = read_jsonl(input, args.criterion)?;
        predict_dataset(&model, &data)?.to_tsv()
    } else {
        let mr: MeaningRepresentation = args
            .mr
            .as_deref()
            .ok_or_else(|| CliError::Usage("rank needs --input or --mr".into()))?
            .parse()?;
        if !args.pair.is_empty() {
            let (a, b) = (TextOutput::new(&args.pair[0]), TextOutput::new(&args.pair[1]));
            let (decision, margin) = model.rank_pair(&mr, &a, &b)?;
            format!("{}\t{margin:?}\n", decision.as_str())
        } else if !args.nbest.is_empty() {
            let texts: Vec<TextOutput> = args.nbest.iter().map(TextOutput::new).collect();
            let order = model.rank_n(&mr, &texts)?;
            let mut s = String::new();
            for (place, i) in order.iter().enumerate() {
                let score = model.predict(&mr, &texts[*i])?;
                s.push_str(&format!("{}\t{i}\t{score:?}\t{}\n", place + 1, texts[*i].raw()));
            }
            s
        } else {
            return Err(CliError::Usage("rank --mr needs --pair A B or --nbest T1 T2 ...".into()));
        }
    };
    finish_output(&mut manifest, args.out.as_deref(), &text)
}

pub fn eval(args: &EvalArgs, seed: u64) -> CliResult {
    let mut manifest = RunManifest::new("eval", seed);
    manifest.input(&args.pred)?;
    manifest.input(&args.gold)?;
    let gold = read_jsonl(&args.gold, args.criterion)?;
    gold.ensure_no_synthetic("evaluation data")?;
    let preds = Predictions::load(&args.pred, args.task)?;
    let report = score_predictions(&preds, &gold)?;
    finish_output(&mut manifest, args.out.as_deref(), &(report.to_json() + "\n"))
}

pub fn compare(args: &CompareArgs, seed: u64) -> CliResult {
    let mut manifest = RunManifest::new("compare", seed);
    for p in [&args.pred_a, &args.pred_b, &args.gold] {
        manifest.input(p)?;
    }
    let gold = read_jsonl(&args.gold, args.criterion)?;
    let json = match args.test {
        CompareTest::Williams => {
            let a = rating_values(&Predictions::load(&args.pred_a, Task::Rating)?, gold.len())?;
            let b = rating_values(&Predictions::load(&args.pred_b, Task::Rating)?, gold.len())?;
            let human: Vec<f64> = gold
                .iter()
                .map(|i| i.rating.ok_or_else(|| Error::Data("williams test needs rating gold data".into())))
                .collect::<qerank_core::Result<_>>()?;
            let (r12, r13, r23) = (pearson(&human, &a)?, pearson(&human, &b)?, pearson(&a, &b)?);
            let w = williams_test(r12, r13, r23, human.len())?;
            serde_json::json!({
                "test": "williams", "n": human.len(), "r_a": r12, "r_b": r13, "r_ab": r23,
                "t": w.t, "df": w.df, "p": w.p,
            })
        }
        CompareTest::Bootstrap => {
            let a = Predictions::load(&args.pred_a, Task::Ranking)?.ranking_outcomes()?;
            let b = Predictions::load(&args.pred_b, Task::Ranking)?.ranking_outcomes()?;
            if a.len() != gold.len() || b.len() != gold.len() {
                return Err(Error::LengthMismatch(gold.len(), a.len().min(b.len())).into());
            }
            let p = bootstrap_compare(&a, &b, args.resamples, derive_seed(seed, "bootstrap", 0))?;
            let acc = |v: &[bool]| v.iter().filter(|x| **x).count() as f64 / v.len() as f64;
            serde_json::json!({
                "test": "bootstrap", "n": a.len(), "accuracy_a": acc(&a), "accuracy_b": acc(&b),
                "resamples": args.resamples, "p": p,
            })
        }
    };
    let text = serde_json::to_string_pretty(&json).expect("json") + "\n";
    finish_output(&mut manifest, args.out.as_deref(), &text)
}

fn rating_values(preds: &Predictions, expected: usize) -> CliResult<Vec<f64>> {
    match preds {
        Predictions::Rating(v) if v.len() == expected => Ok(v.clone()),
        Predictions::Rating(v) => Err(Error::LengthMismatch(expected, v.len()).into()),
        Predictions::Ranking(_) => Err(Error::Data("expected rating predictions".into()).into()),
    }
}

pub fn multiseed(args: &MultiseedArgs, seed: Option<u64>) -> CliResult {
    let root = seed.unwrap_or(0);
    let mut manifest = RunManifest::new("multiseed", root);
    let config = resolve_config(&args.config, None, &mut manifest)?;
    for p in [&args.train, &args.dev, &args.test] {
        manifest.input(p)?;
    }
    let rules = load_rules(args.rules.as_deref(), &mut manifest)?;
    let seeds: Vec<u64> = match &args.seeds {
        Some(list) => list.clone(),
        None => (0..args.runs as u64).map(|i| derive_seed(root, "multiseed", i)).collect(),
    };
    let train_set = read_jsonl(&args.train, args.criterion)?;
    let dev_set = read_jsonl(&args.dev, args.criterion)?;
    let test_set = read_jsonl(&args.test, args.criterion)?;
    let result = multi_seed_run(&train_set, &dev_set, &test_set, &config, &rules, &seeds)?;
    let per_seed: Vec<serde_json::Value> = result
        .per_seed()
        .map(|(s, r)| serde_json::json!({"seed": s, "report": r}))
        .collect();
    let json = serde_json::json!({"mean": result.mean, "runs": per_seed});
    let text = serde_json::to_string_pretty(&json).expect("json") + "\n";
    finish_output(&mut manifest, args.out.as_deref(), &text)
}
