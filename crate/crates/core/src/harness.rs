//! Leave-one-subject-out evaluation.
//!
//! For an evaluated subject the test set is that subject's `E` session; the
//! training set is both sessions of every other subject. Each session is
//! preprocessed once and shared by all folds. Folds run in parallel and the
//! report is assembled in subject order, so execution order never shows in
//! the output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autonet::{predict, train, CnnModel, ModelMeta};
use crate::config::RunConfig;
use crate::cspbase::{baseline_segments, fit_stats, csp_features_stats, lda_predict, CspLdaModel, TrialStats};
use crate::dsp::{band_segments, design_bandpass, FilterBank};
use crate::featmap::{build_feature_tensor, ChannelGrid, FeatureTensor};
use crate::trialio::{import_text, load_tensors, read_trialset, TrialIoError, TrialSet, MANIFEST_FILE};
use crate::types::{Label, Session, SubjectId};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("subject {subject} has no {session} session")]
    MissingSession { subject: SubjectId, session: Session },
    #[error("LOSO needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("subject {0} listed twice")]
    DuplicateSubject(SubjectId),
    #[error("subject {0} is not in the dataset")]
    UnknownSubject(SubjectId),
    #[error("accuracy of an empty prediction list")]
    EmptyAccuracy,
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("preprocessing {key} for {method}: {source}")]
    Prepare {
        key: String,
        method: &'static str,
        source: BoxError,
    },
    #[error("no dataset files found under {0}")]
    EmptyDataset(String),
    #[error(transparent)]
    Io(#[from] TrialIoError),
    #[error("{0}")]
    Pool(String),
}

/// One LOSO split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LosoFold {
    pub index: usize,
    pub evaluated: SubjectId,
    pub train: Vec<(SubjectId, Session)>,
    pub test: Vec<(SubjectId, Session)>,
}

/// One fold per subject, in the given order.
pub fn make_folds(subjects: &[SubjectId], present: &[(SubjectId, Session)]) -> Result<Vec<LosoFold>, HarnessError> {
    if subjects.len() < 2 {
        return Err(HarnessError::TooFewSubjects(subjects.len()));
    }
    for (i, s) in subjects.iter().enumerate() {
        if subjects[..i].contains(s) {
            return Err(HarnessError::DuplicateSubject(s.clone()));
        }
        for session in [Session::T, Session::E] {
            if !present.iter().any(|(p, ps)| p == s && *ps == session) {
                return Err(HarnessError::MissingSession {
                    subject: s.clone(),
                    session,
                });
            }
        }
    }
    Ok(subjects
        .iter()
        .enumerate()
        .map(|(index, evaluated)| LosoFold {
            index,
            evaluated: evaluated.clone(),
            train: subjects
                .iter()
                .filter(|s| *s != evaluated)
                .flat_map(|s| [(s.clone(), Session::T), (s.clone(), Session::E)])
                .collect(),
            test: vec![(evaluated.clone(), Session::E)],
        })
        .collect())
}

/// `100 × correct / n`, unrounded.
pub fn accuracy(predictions: &[Label], labels: &[Label]) -> Result<f64, HarnessError> {
    if predictions.len() != labels.len() {
        return Err(HarnessError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(HarnessError::EmptyAccuracy);
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}

/// Half-up rounding to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0 + 0.5).floor() / 100.0
}

/// All sessions of an experiment keyed by subject and session.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub sets: BTreeMap<(SubjectId, Session), TrialSet>,
}

impl Dataset {
    pub fn from_sets(sets: impl IntoIterator<Item = TrialSet>) -> Self {
        Dataset {
            sets: sets
                .into_iter()
                .map(|s| ((s.subject.clone(), s.session), s))
                .collect(),
        }
    }

    /// Reads every `*.mits` file and every text-import session directory
    /// directly under `root`. A `root` holding a manifest is itself one session.
    pub fn load(root: &Path) -> Result<Self, HarnessError> {
        if root.join(MANIFEST_FILE).is_file() {
            return Ok(Self::from_sets([import_text(root)?]));
        }
        let entries = std::fs::read_dir(root).map_err(|source| TrialIoError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        let mut sets = Vec::new();
        for p in paths {
            if p.is_dir() {
                sets.push(import_text(&p)?);
            } else if p.extension().is_some_and(|e| e == "mits") {
                sets.push(read_trialset(&p)?);
            }
        }
        if sets.is_empty() {
            return Err(HarnessError::EmptyDataset(format!(
                "{} (expected *.mits files or session directories with {MANIFEST_FILE})",
                root.display()
            )));
        }
        Ok(Self::from_sets(sets))
    }

    pub fn subjects(&self) -> Vec<SubjectId> {
        let mut s: Vec<SubjectId> = self.sets.keys().map(|(s, _)| s.clone()).collect();
        s.dedup();
        s
    }

    pub fn present(&self) -> Vec<(SubjectId, Session)> {
        self.sets.keys().cloned().collect()
    }
}

/// A classifier family evaluated by the harness.
pub trait Pipeline: Sync {
    /// Per-session preprocessed data.
    type Prepared: Send + Sync;
    type Model: Send;

    fn name(&self) -> &'static str;
    fn prepare(&self, set: &TrialSet) -> Result<Self::Prepared, BoxError>;
    fn n_trials(&self, prepared: &Self::Prepared) -> usize;
    fn fit(&self, train: &[&Self::Prepared], seed: u64) -> Result<Self::Model, BoxError>;
    /// Predictions and true labels for every trial of `test`.
    fn predict(&self, model: &Self::Model, test: &Self::Prepared) -> Result<(Vec<Label>, Vec<Label>), BoxError>;
}

/// The convolutional classifier on 6×7×12 extreme-value tensors.
#[derive(Debug, Clone)]
pub struct CnnPipeline {
    pub config: RunConfig,
    pub grid: ChannelGrid,
    /// Directory searched for `<subject><session>.mitc` tensor caches.
    pub cache_dir: Option<PathBuf>,
}

impl CnnPipeline {
    pub fn new(config: RunConfig, grid: ChannelGrid) -> Self {
        CnnPipeline {
            config,
            grid,
            cache_dir: None,
        }
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{path}: built under config {found:016x}, current config is {expected:016x}")]
pub struct DigestMismatch {
    pub path: String,
    pub found: u64,
    pub expected: u64,
}

/// Cached tensors for `set` when a matching cache exists. A cache from another
/// grid is ignored; one from another config is an error.
pub fn cached_tensors(
    dir: &Path,
    set: &TrialSet,
    config: &RunConfig,
    grid: &ChannelGrid,
) -> Result<Option<Vec<FeatureTensor>>, BoxError> {
    let path = dir.join(format!("{}.mitc", set.key()));
    if !path.is_file() {
        return Ok(None);
    }
    let cache = load_tensors(&path, grid.hash())?;
    if cache.stale {
        return Ok(None);
    }
    let expected = config.digest().0;
    if cache.config_digest != expected {
        return Err(Box::new(DigestMismatch {
            path: path.display().to_string(),
            found: cache.config_digest,
            expected,
        }));
    }
    Ok(Some(cache.tensors))
}

/// Filter, segment, re-reference and tensorize every usable trial.
pub fn preprocess_set(set: &TrialSet, config: &RunConfig, grid: &ChannelGrid) -> Result<Vec<FeatureTensor>, BoxError> {
    let bank = FilterBank::new(&config.bands, set.sample_rate, config.filter_order)?;
    set.usable(config.include_rejected)
        .enumerate()
        .map(|(i, t)| {
            let segs = band_segments(&bank, &t.channels_f64(), t.cue_sample, config.window).map_err(|e| e.with_trial(i))?;
            Ok(build_feature_tensor(&segs, &set.channels, grid, t.label)?)
        })
        .collect()
}

impl Pipeline for CnnPipeline {
    type Prepared = Vec<FeatureTensor>;
    type Model = CnnModel;

    fn name(&self) -> &'static str {
        "proposed"
    }

    fn prepare(&self, set: &TrialSet) -> Result<Self::Prepared, BoxError> {
        if let Some(dir) = &self.cache_dir {
            if let Some(t) = cached_tensors(dir, set, &self.config, &self.grid)? {
                return Ok(t);
            }
        }
        preprocess_set(set, &self.config, &self.grid)
    }

    fn n_trials(&self, prepared: &Self::Prepared) -> usize {
        prepared.len()
    }

    fn fit(&self, train_sets: &[&Self::Prepared], seed: u64) -> Result<CnnModel, BoxError> {
        let tensors: Vec<FeatureTensor> = train_sets.iter().flat_map(|p| p.iter().cloned()).collect();
        let meta = ModelMeta {
            seed,
            bands: self.config.bands.clone(),
            grid_hash: self.grid.hash(),
            config_digest: self.config.digest().0,
        };
        let outcome = train(CnnModel::init(meta), &tensors, &self.config.train_config(seed))?;
        Ok(outcome.model)
    }

    fn predict(&self, model: &CnnModel, test: &Self::Prepared) -> Result<(Vec<Label>, Vec<Label>), BoxError> {
        let mut preds = Vec::with_capacity(test.len());
        for t in test {
            preds.push(predict(model, t)?.0);
        }
        Ok((preds, test.iter().map(|t| t.label).collect()))
    }
}

/// CSP + LDA on μ-band segments.
#[derive(Debug, Clone)]
pub struct CspPipeline {
    pub config: RunConfig,
}

impl Pipeline for CspPipeline {
    type Prepared = Vec<TrialStats>;
    type Model = CspLdaModel;

    fn name(&self) -> &'static str {
        "baseline"
    }

    fn prepare(&self, set: &TrialSet) -> Result<Self::Prepared, BoxError> {
        let cfg = self.config.baseline_config();
        let sections = design_bandpass(cfg.band, set.sample_rate, cfg.order)?;
        let segs = baseline_segments(set, &sections, cfg.window, cfg.include_rejected)?;
        Ok(segs.iter().map(|(s, l)| TrialStats::from_segment(s, *l)).collect())
    }

    fn n_trials(&self, prepared: &Self::Prepared) -> usize {
        prepared.len()
    }

    fn fit(&self, train_sets: &[&Self::Prepared], _seed: u64) -> Result<CspLdaModel, BoxError> {
        let cfg = self.config.baseline_config();
        let all: Vec<&TrialStats> = train_sets.iter().flat_map(|p| p.iter()).collect();
        let (csp, lda) = fit_stats(&all, cfg.pairs)?;
        Ok(CspLdaModel {
            csp,
            lda,
            band: cfg.band,
            window: cfg.window,
            config_digest: self.config.digest().0,
        })
    }

    fn predict(&self, model: &CspLdaModel, test: &Self::Prepared) -> Result<(Vec<Label>, Vec<Label>), BoxError> {
        let mut preds = Vec::with_capacity(test.len());
        for s in test {
            preds.push(lda_predict(&model.lda, &csp_features_stats(&model.csp, s)?));
        }
        Ok((preds, test.iter().map(|s| s.label).collect()))
    }
}

/// Ignores the data and guesses uniformly.
#[derive(Debug, Clone, Copy)]
pub struct CoinFlip;

impl Pipeline for CoinFlip {
    type Prepared = Vec<Label>;
    type Model = u64;

    fn name(&self) -> &'static str {
        "coin-flip"
    }

    fn prepare(&self, set: &TrialSet) -> Result<Vec<Label>, BoxError> {
        Ok(set.trials.iter().map(|t| t.label).collect())
    }

    fn n_trials(&self, prepared: &Vec<Label>) -> usize {
        prepared.len()
    }

    fn fit(&self, _train: &[&Vec<Label>], seed: u64) -> Result<u64, BoxError> {
        Ok(seed)
    }

    fn predict(&self, seed: &u64, test: &Vec<Label>) -> Result<(Vec<Label>, Vec<Label>), BoxError> {
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        let preds = test
            .iter()
            .map(|_| if rng.random_bool(0.5) { Label::Right } else { Label::Left })
            .collect();
        Ok((preds, test.clone()))
    }
}

/// Outcome of one method on one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    /// Percent, rounded to two decimals.
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub test_trials: usize,
    pub train_trials: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub subject: SubjectId,
    pub seed: u64,
    pub proposed: MethodResult,
    pub baseline: MethodResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_digest: String,
    pub base_seed: u64,
    pub proposed_name: String,
    pub baseline_name: String,
    pub subjects: Vec<SubjectResult>,
    /// Mean of the rounded per-subject accuracies, over successful folds.
    pub proposed_mean: Option<f64>,
    pub baseline_mean: Option<f64>,
    /// Some fold failed for at least one method.
    pub partial: bool,
}

impl ExperimentReport {
    /// Aligned text table with one row per subject and a mean row.
    pub fn to_table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), |a| format!("{a:.2}"));
        let mut s = String::new();
        let _ = writeln!(s, "config {}  seed {}", self.config_digest, self.base_seed);
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>6} {:>6}",
            "subject", self.baseline_name, self.proposed_name, "train", "test"
        );
        for r in &self.subjects {
            let _ = writeln!(
                s,
                "{:<8} {:>10} {:>10} {:>6} {:>6}",
                r.subject,
                cell(r.baseline.accuracy),
                cell(r.proposed.accuracy),
                r.proposed.train_trials,
                r.proposed.test_trials
            );
        }
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10}",
            "mean",
            cell(self.baseline_mean),
            cell(self.proposed_mean)
        );
        if self.partial {
            for r in &self.subjects {
                for (name, m) in [(&self.proposed_name, &r.proposed), (&self.baseline_name, &r.baseline)] {
                    if let Some(e) = &m.error {
                        let _ = writeln!(s, "error {} {}: {}", r.subject, name, e);
                    }
                }
            }
            let _ = writeln!(s, "PARTIAL: some folds failed");
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| round2(v.iter().sum::<f64>() / v.len() as f64))
}

/// Everything produced by one experiment.
pub struct ExperimentRun<P: Pipeline, B: Pipeline> {
    pub report: ExperimentReport,
    pub folds: Vec<LosoFold>,
    /// Fitted models per evaluated fold, aligned with `folds`.
    pub proposed_models: Vec<Option<P::Model>>,
    pub baseline_models: Vec<Option<B::Model>>,
}

/// Experiment knobs not covered by [`RunConfig`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Evaluate only these subjects (all when empty). Training sets still
    /// include every other subject.
    pub only: Vec<SubjectId>,
    /// Worker threads for folds; machine parallelism when `None`.
    pub jobs: Option<usize>,
}

type Prepared<P> = BTreeMap<(SubjectId, Session), Result<<P as Pipeline>::Prepared, String>>;

fn prepare_all<P: Pipeline>(p: &P, dataset: &Dataset, keys: &[(SubjectId, Session)]) -> Prepared<P> {
    keys.par_iter()
        .map(|k| {
            let r = p.prepare(&dataset.sets[k]).map_err(|e| {
                HarnessError::Prepare {
                    key: format!("{}{}", k.0, k.1),
                    method: p.name(),
                    source: e,
                }
                .to_string()
            });
            (k.clone(), r)
        })
        .collect()
}

fn run_method<P: Pipeline>(p: &P, prepared: &Prepared<P>, fold: &LosoFold, seed: u64) -> (MethodResult, Option<P::Model>) {
    let mut result = MethodResult {
        accuracy: None,
        correct: 0,
        test_trials: 0,
        train_trials: 0,
        error: None,
    };
    let outcome = (|| -> Result<P::Model, String> {
        let get = |k: &(SubjectId, Session)| prepared[k].as_ref().map_err(Clone::clone);
        let train: Vec<&P::Prepared> = fold.train.iter().map(get).collect::<Result<_, _>>()?;
        let test = get(&fold.test[0])?;
        result.train_trials = train.iter().map(|t| p.n_trials(t)).sum();
        result.test_trials = p.n_trials(test);
        let model = p.fit(&train, seed).map_err(|e| format!("training: {e}"))?;
        let (preds, labels) = p.predict(&model, test).map_err(|e| format!("prediction: {e}"))?;
        let acc = accuracy(&preds, &labels).map_err(|e| e.to_string())?;
        result.correct = preds.iter().zip(&labels).filter(|(a, b)| a == b).count();
        result.accuracy = Some(round2(acc));
        Ok(model)
    })();
    match outcome {
        Ok(m) => (result, Some(m)),
        Err(e) => {
            log::warn!("fold {} {}: {}", fold.evaluated, p.name(), e);
            result.error = Some(e);
            (result, None)
        }
    }
}

/// Folds selected by `options`, with the sessions they touch.
pub fn plan_folds(dataset: &Dataset, options: &RunOptions) -> Result<Vec<LosoFold>, HarnessError> {
    let subjects = dataset.subjects();
    for s in &options.only {
        if !subjects.contains(s) {
            return Err(HarnessError::UnknownSubject(s.clone()));
        }
    }
    Ok(make_folds(&subjects, &dataset.present())?
        .into_iter()
        .filter(|f| options.only.is_empty() || options.only.contains(&f.evaluated))
        .collect())
}

fn fold_keys(folds: &[LosoFold]) -> Vec<(SubjectId, Session)> {
    let mut keys: Vec<(SubjectId, Session)> = folds
        .iter()
        .flat_map(|f| f.train.iter().chain(&f.test).cloned())
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    builder.build().map_err(|e| HarnessError::Pool(e.to_string()))
}

/// Fold seed: base seed plus fold index.
pub fn fold_seed(config: &RunConfig, fold: &LosoFold) -> u64 {
    config.seed.wrapping_add(fold.index as u64)
}

/// Runs one pipeline over `folds`; results aligned with `folds`.
/// Result of one fold and the model fitted for it, if any.
pub type FoldOutcome<M> = (MethodResult, Option<M>);

pub fn run_pipeline<P: Pipeline>(
    dataset: &Dataset,
    folds: &[LosoFold],
    config: &RunConfig,
    pipeline: &P,
    jobs: Option<usize>,
) -> Result<Vec<FoldOutcome<P::Model>>, HarnessError> {
    let keys = fold_keys(folds);
    Ok(pool(jobs)?.install(|| {
        let prepared = prepare_all(pipeline, dataset, &keys);
        folds
            .par_iter()
            .map(|fold| run_method(pipeline, &prepared, fold, fold_seed(config, fold)))
            .collect()
    }))
}

/// Runs both pipelines on every selected LOSO fold. Fold `i` (position of
/// the evaluated subject among all dataset subjects) trains with seed
/// `config.seed + i`.
pub fn run_experiment<P: Pipeline, B: Pipeline>(
    dataset: &Dataset,
    config: &RunConfig,
    proposed: &P,
    baseline: &B,
    options: &RunOptions,
) -> Result<ExperimentRun<P, B>, HarnessError> {
    let folds = plan_folds(dataset, options)?;
    let (rp, proposed_models): (Vec<_>, Vec<_>) =
        run_pipeline(dataset, &folds, config, proposed, options.jobs)?.into_iter().unzip();
    let (rb, baseline_models): (Vec<_>, Vec<_>) =
        run_pipeline(dataset, &folds, config, baseline, options.jobs)?.into_iter().unzip();
    let subjects_out: Vec<SubjectResult> = folds
        .iter()
        .zip(rp.into_iter().zip(rb))
        .map(|(fold, (proposed, baseline))| SubjectResult {
            subject: fold.evaluated.clone(),
            seed: fold_seed(config, fold),
            proposed,
            baseline,
        })
        .collect();
    let partial = subjects_out
        .iter()
        .any(|r| r.proposed.error.is_some() || r.baseline.error.is_some());
    let report = ExperimentReport {
        config_digest: config.digest().to_string(),
        base_seed: config.seed,
        proposed_name: proposed.name().to_string(),
        baseline_name: baseline.name().to_string(),
        proposed_mean: mean_of(subjects_out.iter().map(|r| r.proposed.accuracy)),
        baseline_mean: mean_of(subjects_out.iter().map(|r| r.baseline.accuracy)),
        subjects: subjects_out,
        partial,
    };
    Ok(ExperimentRun {
        report,
        folds,
        proposed_models,
        baseline_models,
    })
}

/// Mean of the successful rounded accuracies, rounded.
pub fn mean_accuracy(results: &[MethodResult]) -> Option<f64> {
    mean_of(results.iter().map(|r| r.accuracy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, subject_id, SynthConfig};

    fn ids(n: usize) -> Vec<SubjectId> {
        (0..n).map(subject_id).collect()
    }

    fn all_present(s: &[SubjectId]) -> Vec<(SubjectId, Session)> {
        s.iter()
            .flat_map(|x| [(x.clone(), Session::T), (x.clone(), Session::E)])
            .collect()
    }

    #[test]
    fn fold_for_subject_three() {
        let s = ids(9);
        let folds = make_folds(&s, &all_present(&s)).unwrap();
        let f = &folds[2];
        assert_eq!(f.evaluated.as_str(), "A03");
        assert_eq!(f.train.len(), 16);
        assert_eq!(f.test, vec![(SubjectId::new("A03"), Session::E)]);
        assert!(f.train.iter().all(|(x, _)| x.as_str() != "A03"));
    }

    #[test]
    fn folds_cover_every_e_session_once() {
        let s = ids(9);
        let folds = make_folds(&s, &all_present(&s)).unwrap();
        let mut tests: Vec<_> = folds.iter().flat_map(|f| f.test.clone()).collect();
        tests.sort();
        let mut expect: Vec<_> = s.iter().map(|x| (x.clone(), Session::E)).collect();
        expect.sort();
        assert_eq!(tests, expect);
        for f in &folds {
            assert!(!f.train.iter().any(|(x, _)| *x == f.evaluated));
        }
    }

    #[test]
    fn missing_session_named() {
        let s = ids(3);
        let mut present = all_present(&s);
        present.retain(|(x, ses)| !(x.as_str() == "A02" && *ses == Session::T));
        let err = make_folds(&s, &present).unwrap_err();
        assert_eq!(err.to_string(), "subject A02 has no T session");
    }

    #[test]
    fn accuracy_examples() {
        use Label::*;
        assert_eq!(round2(accuracy(&[Left, Right], &[Left, Right]).unwrap()), 100.0);
        assert_eq!(accuracy(&[Left, Right], &[Right, Left]).unwrap(), 0.0);
        let labels = vec![Left; 144];
        let mut preds = vec![Left; 127];
        preds.extend(vec![Right; 17]);
        assert_eq!(round2(accuracy(&preds, &labels).unwrap()), 88.19);
        assert!(matches!(accuracy(&[], &[]), Err(HarnessError::EmptyAccuracy)));
        assert_eq!(round2(0.125), 0.13);
    }

    #[test]
    fn coin_flip_is_near_chance() {
        let cfg = SynthConfig {
            subjects: 4,
            trials_per_session: 100,
            n_samples: 10,
            cue_sample: 0,
            ..Default::default()
        };
        let ds = Dataset::from_sets(generate(&cfg));
        let run = run_experiment(&ds, &RunConfig::default(), &CoinFlip, &CoinFlip, &RunOptions::default()).unwrap();
        let correct: usize = run.report.subjects.iter().map(|r| r.proposed.correct).sum();
        let total: usize = run.report.subjects.iter().map(|r| r.proposed.test_trials).sum();
        assert_eq!(total, 400);
        let acc = 100.0 * correct as f64 / total as f64;
        assert!((acc - 50.0).abs() <= 5.0, "{acc}");
        let mean = run.report.proposed_mean.unwrap();
        let direct: f64 =
            run.report.subjects.iter().map(|r| r.proposed.accuracy.unwrap()).sum::<f64>() / 4.0;
        assert!((mean - direct).abs() <= 0.005);
    }

    #[test]
    fn failures_mark_report_partial() {
        let cfg = SynthConfig {
            subjects: 3,
            trials_per_session: 6,
            n_samples: 20,
            cue_sample: 0,
            ..Default::default()
        };
        let ds = Dataset::from_sets(generate(&cfg));
        // 20-sample trials cannot hold the 0.5–2.5 s window
        let rc = RunConfig::default();
        let run = run_experiment(&ds, &rc, &CoinFlip, &CspPipeline { config: rc.clone() }, &RunOptions::default()).unwrap();
        assert!(run.report.partial);
        assert!(run.report.baseline_mean.is_none());
        assert!(run.report.proposed_mean.is_some());
        assert!(run.report.to_table().contains("PARTIAL"));
    }

    #[test]
    fn subject_filter_and_order_independence() {
        let cfg = SynthConfig {
            subjects: 3,
            trials_per_session: 20,
            n_samples: 10,
            cue_sample: 0,
            ..Default::default()
        };
        let ds = Dataset::from_sets(generate(&cfg));
        let rc = RunConfig::default();
        let full = run_experiment(&ds, &rc, &CoinFlip, &CoinFlip, &RunOptions::default()).unwrap();
        let one = run_experiment(
            &ds,
            &rc,
            &CoinFlip,
            &CoinFlip,
            &RunOptions {
                only: vec![SubjectId::new("A02")],
                jobs: Some(1),
            },
        )
        .unwrap();
        assert_eq!(one.report.subjects.len(), 1);
        assert_eq!(one.report.subjects[0], full.report.subjects[1]);
        let again = run_experiment(&ds, &rc, &CoinFlip, &CoinFlip, &RunOptions { only: vec![], jobs: Some(3) }).unwrap();
        assert_eq!(again.report.to_json(), full.report.to_json());
        let back = ExperimentReport::from_json(&full.report.to_json()).unwrap();
        assert_eq!(back, full.report);
    }
}
