use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use milrp::autonet::io::{read_model, write_model};
use milrp::autonet::{predict, train, CnnModel, ModelMeta};
use milrp::config::RunConfig;
use milrp::cspbase::write_baseline;
use milrp::featmap::{default_grid, ChannelGrid, FeatureTensor};
use milrp::harness::{
    cached_tensors, mean_accuracy, plan_folds, preprocess_set, round2, run_experiment, run_pipeline, CnnPipeline,
    CspPipeline, Dataset, RunOptions,
};
use milrp::lrp::{aggregate, explain, read_relevance_table, write_relevance_table, RelevanceMap};
use milrp::synth::{generate, SynthConfig};
use milrp::topoviz::{annotate, side_by_side, TopoPlot};
use milrp::trialio::{cache_tensors, write_trialset, TrialSet};
use milrp::{Label, Session, SubjectId};

use crate::args::{subject_ids, DataArgs, ExplainArgs, SynthArgs, TopoArgs};
use crate::{Failure, ResultExt};

const TABLE_FILE: &str = "relevance.tsv";

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .input()
}

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, body)
        .with_context(|| format!("writing {}", path.display()))
        .input()
}

fn load_config(protocol: &crate::args::Protocol, dataset: Option<&Dataset>) -> Result<RunConfig, Failure> {
    let config = protocol.to_config();
    let fs = dataset
        .and_then(|d| d.sets.values().next())
        .map_or(250.0, |s| s.sample_rate);
    config.validate(fs).map_err(|e| Failure::Input(anyhow!(e)))?;
    Ok(config)
}

fn load_dataset(root: &Path) -> Result<Dataset, Failure> {
    Dataset::load(root)
        .with_context(|| format!("loading dataset {}", root.display()))
        .input()
}

fn check_subjects(dataset: &Dataset, wanted: &[SubjectId]) -> Result<(), Failure> {
    let all = dataset.subjects();
    for s in wanted {
        if !all.contains(s) {
            return Err(Failure::Input(anyhow!("subject {s} is not in the dataset")));
        }
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<(), Failure> {
    create_dir(&a.out)?;
    let cfg = SynthConfig {
        subjects: a.n_subjects,
        trials_per_session: a.trials,
        seed: a.seed,
        ..SynthConfig::default()
    };
    for set in generate(&cfg) {
        let path = a.out.join(format!("{}.mits", set.key()));
        write_trialset(&set, &path).input()?;
        println!("{}\t{} trials", set.key(), set.trials.len());
    }
    Ok(())
}

pub fn preprocess(a: &DataArgs) -> Result<(), Failure> {
    let dataset = load_dataset(&a.dataset)?;
    let config = load_config(&a.protocol, Some(&dataset))?;
    let grid = default_grid();
    let wanted = subject_ids(&a.subjects);
    check_subjects(&dataset, &wanted)?;
    create_dir(&a.out)?;
    let digest = config.digest();
    for ((subject, _), set) in &dataset.sets {
        if !wanted.is_empty() && !wanted.contains(subject) {
            continue;
        }
        let key = set.key();
        write_trialset(set, &a.out.join(format!("{key}.mits"))).input()?;
        let tensors = preprocess_set(set, &config, &grid)
            .map_err(|e| Failure::Input(anyhow!("{key}: {e}")))?;
        cache_tensors(&tensors, grid.hash(), digest.0, &a.out.join(format!("{key}.mitc"))).input()?;
        let skipped = set.trials.len() - set.usable(config.include_rejected).count();
        println!("{key}\t{} trials\t{skipped} rejected skipped", tensors.len());
    }
    println!("config {digest}");
    Ok(())
}

/// Fails early when a tensor cache next to the data was built under other flags.
fn check_caches(dir: &Path, dataset: &Dataset, config: &RunConfig, grid: &ChannelGrid) -> Result<(), Failure> {
    for set in dataset.sets.values() {
        cached_tensors(dir, set, config, grid).map_err(|e| {
            Failure::Input(anyhow!("{e} (re-run preprocess with the same protocol flags)"))
        })?;
    }
    Ok(())
}

fn tensors_for(dir: &Path, set: &TrialSet, config: &RunConfig, grid: &ChannelGrid) -> Result<Vec<FeatureTensor>, Failure> {
    match cached_tensors(dir, set, config, grid)
        .map_err(|e| Failure::Input(anyhow!("{e} (re-run preprocess with the same protocol flags)")))?
    {
        Some(t) => Ok(t),
        None => preprocess_set(set, config, grid).map_err(|e| Failure::Input(anyhow!("{}: {e}", set.key()))),
    }
}

pub fn train_cmd(a: &DataArgs) -> Result<(), Failure> {
    let dataset = load_dataset(&a.dataset)?;
    let config = load_config(&a.protocol, Some(&dataset))?;
    let grid = default_grid();
    let wanted = subject_ids(&a.subjects);
    check_subjects(&dataset, &wanted)?;
    let mut tensors = Vec::new();
    for ((subject, _), set) in &dataset.sets {
        if wanted.is_empty() || wanted.contains(subject) {
            tensors.extend(tensors_for(&a.dataset, set, &config, &grid)?);
        }
    }
    let meta = ModelMeta {
        seed: config.seed,
        bands: config.bands.clone(),
        grid_hash: grid.hash(),
        config_digest: config.digest().0,
    };
    let outcome = train(CnnModel::init(meta), &tensors, &config.train_config(config.seed)).runtime()?;
    let correct = tensors
        .iter()
        .map(|t| predict(&outcome.model, t).map(|(p, _)| p == t.label))
        .collect::<Result<Vec<_>, _>>()
        .runtime()?
        .into_iter()
        .filter(|ok| *ok)
        .count();
    create_dir(&a.out)?;
    let path = a.out.join("model.micn");
    write_model(&outcome.model, &path).input()?;
    let first = outcome.loss_trace.first().copied().unwrap_or(f64::NAN);
    let last = outcome.loss_trace.last().copied().unwrap_or(f64::NAN);
    println!("trained on {} trials: loss {first:.4} -> {last:.4}", tensors.len());
    println!(
        "training accuracy {:.2}",
        round2(100.0 * correct as f64 / tensors.len() as f64)
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn eval(a: &DataArgs) -> Result<(), Failure> {
    let dataset = load_dataset(&a.dataset)?;
    let config = load_config(&a.protocol, Some(&dataset))?;
    let options = RunOptions {
        only: subject_ids(&a.subjects),
        jobs: a.jobs,
    };
    check_caches(&a.dataset, &dataset, &config, &default_grid())?;
    let cnn = CnnPipeline::new(config.clone(), default_grid()).with_cache(&a.dataset);
    let csp = CspPipeline { config: config.clone() };
    let run = run_experiment(&dataset, &config, &cnn, &csp, &options).input()?;
    let models = a.out.join("models");
    create_dir(&models)?;
    for (fold, (m, b)) in run
        .folds
        .iter()
        .zip(run.proposed_models.iter().zip(&run.baseline_models))
    {
        if let Some(m) = m {
            write_model(m, &models.join(format!("{}.micn", fold.evaluated))).input()?;
        }
        if let Some(b) = b {
            write_baseline(b, &models.join(format!("{}.cspb", fold.evaluated))).input()?;
        }
    }
    let table = run.report.to_table();
    write_file(&a.out.join("report.txt"), &table)?;
    write_file(&a.out.join("report.json"), run.report.to_json())?;
    print!("{table}");
    if run.report.partial {
        return Err(Failure::Runtime(anyhow!("some folds failed; report marked partial")));
    }
    Ok(())
}

pub fn baseline(a: &DataArgs) -> Result<(), Failure> {
    let dataset = load_dataset(&a.dataset)?;
    let config = load_config(&a.protocol, Some(&dataset))?;
    let options = RunOptions {
        only: subject_ids(&a.subjects),
        jobs: a.jobs,
    };
    let folds = plan_folds(&dataset, &options).input()?;
    let csp = CspPipeline { config: config.clone() };
    let results = run_pipeline(&dataset, &folds, &config, &csp, a.jobs).input()?;
    let models = a.out.join("models");
    create_dir(&models)?;
    let mut out = format!("config {}\n{:<8} {:>10} {:>6}\n", config.digest(), "subject", "baseline", "test");
    for (fold, (r, m)) in folds.iter().zip(&results) {
        if let Some(m) = m {
            write_baseline(m, &models.join(format!("{}.cspb", fold.evaluated))).input()?;
        }
        let acc = r.accuracy.map_or_else(|| "failed".into(), |v| format!("{v:.2}"));
        out.push_str(&format!("{:<8} {:>10} {:>6}\n", fold.evaluated, acc, r.test_trials));
        if let Some(e) = &r.error {
            log::error!("{}: {e}", fold.evaluated);
        }
    }
    let just: Vec<_> = results.iter().map(|(r, _)| r.clone()).collect();
    let mean = mean_accuracy(&just).map_or_else(|| "failed".into(), |v| format!("{v:.2}"));
    out.push_str(&format!("{:<8} {:>10}\n", "mean", mean));
    write_file(&a.out.join("baseline.txt"), &out)?;
    print!("{out}");
    if just.iter().any(|r| r.error.is_some()) {
        return Err(Failure::Runtime(anyhow!("some folds failed")));
    }
    Ok(())
}

fn model_for(path: &Path, subject: &SubjectId) -> PathBuf {
    if path.is_dir() {
        path.join(format!("{subject}.micn"))
    } else {
        path.to_path_buf()
    }
}

fn check_model(model: &CnnModel, path: &Path, config: &RunConfig, grid: &ChannelGrid) -> Result<(), Failure> {
    let digest = config.digest().0;
    if model.meta.config_digest != digest {
        return Err(Failure::Input(anyhow!(
            "{}: model built under config {:016x}, current config is {digest:016x}",
            path.display(),
            model.meta.config_digest
        )));
    }
    if model.meta.grid_hash != grid.hash() {
        return Err(Failure::Input(anyhow!("{}: model built for a different channel grid", path.display())));
    }
    Ok(())
}

fn aggregate_rows(
    group: &str,
    maps: &[RelevanceMap],
    preds: &[Label],
    labels: &[Label],
    grid: &ChannelGrid,
    out: &mut Vec<RelevanceMap>,
) -> Result<(), Failure> {
    for agg in aggregate(maps, preds, labels, grid).runtime()? {
        match agg.mean {
            Some(mut m) => {
                m.source.trial = group.to_string();
                out.push(m);
            }
            None => eprintln!(
                "{group}: no correctly classified {} trials; no {} aggregate written",
                agg.class, agg.class
            ),
        }
    }
    Ok(())
}

pub fn explain_cmd(a: &ExplainArgs) -> Result<(), Failure> {
    let dataset = load_dataset(&a.dataset)?;
    let config = load_config(&a.protocol, Some(&dataset))?;
    let grid = default_grid();
    let mut subjects = subject_ids(&a.subjects);
    check_subjects(&dataset, &subjects)?;
    if subjects.is_empty() {
        subjects = dataset.subjects();
    }
    let mut rows: Vec<RelevanceMap> = Vec::new();
    let mut aggregates: Vec<RelevanceMap> = Vec::new();
    let (mut all_maps, mut all_preds, mut all_labels) = (Vec::new(), Vec::new(), Vec::new());
    for subject in &subjects {
        let key = (subject.clone(), Session::E);
        let Some(set) = dataset.sets.get(&key) else {
            return Err(Failure::Input(anyhow!("subject {subject} has no E session")));
        };
        let path = model_for(&a.model, subject);
        let model = read_model(&path)
            .with_context(|| format!("reading {}", path.display()))
            .input()?;
        check_model(&model, &path, &config, &grid)?;
        let tensors = tensors_for(&a.dataset, set, &config, &grid)?;
        let (mut maps, mut preds, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (i, t) in tensors.iter().enumerate() {
            let (pred, _) = predict(&model, t).runtime()?;
            let id = format!("{}-{:03}", set.key(), i + 1);
            let e = explain(&model, t, pred, config.lrp_rule, &grid, &id).runtime()?;
            maps.push(e.map);
            preds.push(pred);
            labels.push(t.label);
        }
        aggregate_rows(&format!("mean:{subject}"), &maps, &preds, &labels, &grid, &mut aggregates)?;
        rows.extend(maps.iter().cloned());
        all_maps.extend(maps);
        all_preds.extend(preds);
        all_labels.extend(labels);
    }
    let mut grand = Vec::new();
    aggregate_rows("mean", &all_maps, &all_preds, &all_labels, &grid, &mut grand)?;
    create_dir(&a.out)?;
    let mut body = format!("# config {}\n", config.digest()).into_bytes();
    let mut all = grand;
    all.extend(aggregates);
    all.extend(rows);
    write_relevance_table(&mut body, &all).runtime()?;
    let path = a.out.join(TABLE_FILE);
    write_file(&path, body)?;
    println!("explained {} trials of {} subjects; wrote {}", all_maps.len(), subjects.len(), path.display());
    Ok(())
}

fn table_digest(text: &str) -> Option<&str> {
    text.lines()
        .find_map(|l| l.strip_prefix("# config "))
        .map(str::trim)
}

pub fn topoplot(a: &TopoArgs) -> Result<(), Failure> {
    let config = load_config(&a.protocol, None)?;
    let text = fs::read_to_string(&a.table)
        .with_context(|| format!("reading {}", a.table.display()))
        .input()?;
    let digest = config.digest().to_string();
    match table_digest(&text) {
        Some(d) if d == digest => {}
        Some(d) => {
            return Err(Failure::Input(anyhow!(
                "{}: table built under config {d}, current config is {digest}",
                a.table.display()
            )))
        }
        None => return Err(Failure::Input(anyhow!("{}: missing config line", a.table.display()))),
    }
    let rows = read_relevance_table(text.as_bytes()).input()?;
    let mut groups: BTreeMap<String, [Vec<(String, f64)>; 2]> = BTreeMap::new();
    for r in rows {
        if r.trial == "mean" || r.trial.starts_with("mean:") {
            groups.entry(r.trial.clone()).or_default()[r.class.index()].push((r.channel, r.relevance));
        }
    }
    let wanted = subject_ids(&a.subjects);
    let grid = default_grid();
    create_dir(&a.out)?;
    let mut written = 0;
    let mut missing = 0;
    for (group, per_class) in &groups {
        let (name, caption) = match group.strip_prefix("mean:") {
            Some(s) => {
                if !wanted.is_empty() && !wanted.iter().any(|w| w.as_str() == s) {
                    continue;
                }
                (s.to_string(), s.to_string())
            }
            None => ("grand".to_string(), "grand average".to_string()),
        };
        if let Some(class) = Label::ALL.into_iter().find(|c| per_class[c.index()].is_empty()) {
            eprintln!("{caption}: no correctly classified {class} trials; figure skipped");
            missing += 1;
            continue;
        }
        let plot = |c: Label| TopoPlot::new(&per_class[c.index()], &grid, config.range, c.as_str());
        let svg = side_by_side(&plot(Label::Left).input()?, &plot(Label::Right).input()?, &caption).input()?;
        let path = a.out.join(format!("topo_{name}.svg"));
        write_file(&path, annotate(&svg, &format!("milrp config {digest}")))?;
        println!("wrote {}", path.display());
        written += 1;
    }
    for w in &wanted {
        if !groups.contains_key(&format!("mean:{w}")) {
            eprintln!("{w}: no aggregate rows in {}", a.table.display());
            missing += 1;
        }
    }
    if written == 0 {
        return Err(Failure::Input(anyhow!("nothing to plot ({missing} groups lacked data)")));
    }
    Ok(())
}
