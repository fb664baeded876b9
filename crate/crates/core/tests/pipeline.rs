use milrp::autonet::{predict, train, ModelMeta};
use milrp::featmap::default_grid;
use milrp::harness::{preprocess_set, run_experiment, CnnPipeline, CspPipeline, Dataset, RunOptions};
use milrp::lrp::{aggregate, explain};
use milrp::synth::{generate, SynthConfig};
use milrp::{CnnModel, RunConfig, Session};

fn small() -> Dataset {
    Dataset::from_sets(generate(&SynthConfig {
        subjects: 3,
        trials_per_session: 40,
        seed: 11,
        ..SynthConfig::default()
    }))
}

#[test]
fn tensors_train_and_explain() {
    let data = small();
    let config = RunConfig::default();
    let grid = default_grid();
    let train_set = &data.sets[&("A01".into(), Session::T)];
    let test_set = &data.sets[&("A01".into(), Session::E)];
    let tensors = preprocess_set(train_set, &config, &grid).unwrap();
    assert_eq!(tensors.len(), 40);
    let model = CnnModel::init(ModelMeta::default());
    let outcome = train(model, &tensors, &config.train_config(3)).unwrap();
    let test = preprocess_set(test_set, &config, &grid).unwrap();
    let (mut maps, mut preds, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for t in &test {
        let (p, _) = predict(&outcome.model, t).unwrap();
        maps.push(explain(&outcome.model, t, p, config.lrp_rule, &grid, "t").unwrap().map);
        preds.push(p);
        labels.push(t.label);
    }
    let correct = preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
    assert!(correct >= 30, "{correct}/40");
    let aggs = aggregate(&maps, &preds, &labels, &grid).unwrap();
    for a in &aggs {
        let mean = a.mean.as_ref().unwrap();
        assert_eq!(mean.per_channel.len(), 22);
        assert!((mean.total() - mean.source.logit).abs() <= mean.leak_bound + 1e-9);
    }
}

#[test]
fn small_loso_runs_both_methods() {
    let data = small();
    let config = RunConfig {
        iterations: 80,
        ..RunConfig::default()
    };
    let cnn = CnnPipeline::new(config.clone(), default_grid());
    let csp = CspPipeline { config: config.clone() };
    let run = run_experiment(&data, &config, &cnn, &csp, &RunOptions { only: vec![], jobs: Some(1) }).unwrap();
    let r = &run.report;
    assert!(!r.partial);
    assert_eq!(r.subjects.len(), 3);
    assert_eq!(r.config_digest, config.digest().to_string());
    for (i, s) in r.subjects.iter().enumerate() {
        assert_eq!(s.seed, config.seed + i as u64);
        assert_eq!(s.proposed.test_trials, 40);
        assert_eq!(s.baseline.train_trials, 160);
    }
    assert!(r.baseline_mean.unwrap() > 70.0);
    assert!(r.proposed_mean.unwrap() > 60.0);
    let again = run_experiment(&data, &config, &cnn, &csp, &RunOptions { only: vec![], jobs: Some(1) }).unwrap();
    assert_eq!(again.report.to_json(), r.to_json());
}
