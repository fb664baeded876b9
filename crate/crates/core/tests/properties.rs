use milrp::autonet::model::ModelMeta;
use milrp::cspbase::{baseline_from_bytes, baseline_to_bytes, csp_fit, CspLdaModel, Mat};
use milrp::dsp::{design_bandpass, BandSpec, Window, DEFAULT_BANDS};
use milrp::harness::{accuracy, make_folds, mean_accuracy, round2, MethodResult};
use milrp::lrp::{propagate, LrpRule};
use milrp::{CnnModel, CspModel, Label, LdaModel, Session, SubjectId, Tensor3};
use proptest::prelude::*;

fn tensor(values: Vec<f64>) -> Tensor3 {
    Tensor3::from_vec(6, 7, 12, values)
}

fn spd(n: usize, raw: &[f64]) -> Mat {
    let m = raw.len() / n;
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = (0..m).map(|k| raw[i * m + k] * raw[j * m + k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
        }
    }
    Mat::from_vec(n, n, d)
}

fn quad(w: &[f64], c: &Mat) -> f64 {
    let n = w.len();
    (0..n).map(|i| (0..n).map(|j| w[i] * c.row(i)[j] * w[j]).sum::<f64>()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn default_bands_stable_at_common_rates(band in 0usize..6, fs in prop::sample::select(vec![100.0, 250.0, 512.0]), order in prop::sample::select(vec![2usize, 4, 6, 8])) {
        let sections = design_bandpass(DEFAULT_BANDS[band], fs, order).unwrap();
        prop_assert_eq!(sections.len(), order / 2);
        for s in &sections {
            prop_assert!(s.is_stable());
            prop_assert!(s.poles().iter().all(|p| p.norm() < 1.0));
        }
    }

    #[test]
    fn random_bands_stable(lo in 0.5f64..40.0, width in 0.5f64..60.0, fs in 150.0f64..1000.0) {
        let band = BandSpec::new(lo, lo + width);
        prop_assume!(band.high_hz < fs / 2.0 * 0.95);
        for s in design_bandpass(band, fs, 4).unwrap() {
            prop_assert!(s.is_stable());
        }
    }

    #[test]
    fn lrp_start_scales_linearly(seed in any::<u64>(), values in prop::collection::vec(-2.0f64..2.0, 504), k in -4i32..5) {
        let model = CnnModel::init(ModelMeta { seed, ..ModelMeta::default() });
        let x = tensor(values);
        let logits = model.logits(&x).unwrap();
        let s = 2f64.powi(k);
        let rule = LrpRule::default();
        let (a, ..) = propagate(&model, &x, [logits[0], 0.0], LrpRule::Epsilon { epsilon: 1e-300 }).unwrap();
        let (b, ..) = propagate(&model, &x, [s * logits[0], 0.0], LrpRule::Epsilon { epsilon: 1e-300 }).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            prop_assert_eq!(s * u, *v);
        }
        let (c, ..) = propagate(&model, &x, [0.0, 0.3], rule).unwrap();
        let (d, ..) = propagate(&model, &x, [0.0, 0.3 * 1.7], rule).unwrap();
        let scale = d.data().iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (u, v) in c.data().iter().zip(d.data()) {
            prop_assert!((1.7 * u - v).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn csp_eigenvalues_pair_to_one(raw1 in prop::collection::vec(-1.0f64..1.0, 6 * 9), raw2 in prop::collection::vec(-1.0f64..1.0, 6 * 9)) {
        let (c1, c2) = (spd(6, &raw1), spd(6, &raw2));
        let model = csp_fit(&c1, &c2, 3).unwrap();
        for (r, lambda) in model.eigenvalues.iter().enumerate() {
            let w = model.filters.row(r);
            let (a, b) = (quad(w, &c1), quad(w, &c2));
            prop_assert!((a + b - 1.0).abs() < 1e-8);
            prop_assert!((a - lambda).abs() < 1e-8);
        }
        prop_assert!(model.eigenvalues.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn folds_never_leak(n in 2usize..12) {
        let subjects: Vec<SubjectId> = (0..n).map(|i| SubjectId::from(format!("S{i:02}").as_str())).collect();
        let present: Vec<_> = subjects.iter().flat_map(|s| [(s.clone(), Session::T), (s.clone(), Session::E)]).collect();
        let folds = make_folds(&subjects, &present).unwrap();
        prop_assert_eq!(folds.len(), n);
        for f in &folds {
            prop_assert!(f.train.iter().all(|(s, _)| s != &f.evaluated));
            prop_assert_eq!(&f.test, &vec![(f.evaluated.clone(), Session::E)]);
            prop_assert_eq!(f.train.len(), 2 * (n - 1));
        }
    }

    #[test]
    fn mean_matches_subjects(counts in prop::collection::vec((0usize..=144, 1usize..=144), 9)) {
        let results: Vec<MethodResult> = counts
            .iter()
            .map(|&(c, t)| {
                let c = c.min(t);
                let labels = vec![Label::Left; t];
                let preds: Vec<Label> = (0..t).map(|i| if i < c { Label::Left } else { Label::Right }).collect();
                MethodResult { accuracy: Some(round2(accuracy(&preds, &labels).unwrap())), correct: c, test_trials: t, train_trials: 0, error: None }
            })
            .collect();
        let mean = mean_accuracy(&results).unwrap();
        let direct = results.iter().map(|r| r.accuracy.unwrap()).sum::<f64>() / 9.0;
        prop_assert!((mean - direct).abs() <= 0.005);
    }

    #[test]
    fn baseline_files_round_trip(vals in prop::collection::vec(any::<f64>(), 22 * 6 + 6 + 6 + 1), digest in any::<u64>(), ridge in any::<f64>()) {
        let model = CspLdaModel {
            csp: CspModel {
                filters: Mat::from_vec(6, 22, vals[..132].to_vec()),
                eigenvalues: vals[132..138].to_vec(),
                pairs: 3,
                ridge,
            },
            lda: LdaModel { weights: vals[138..144].to_vec(), bias: vals[144] },
            band: BandSpec::new(8.0, 12.0),
            window: Window::default(),
            config_digest: digest,
        };
        let bytes = baseline_to_bytes(&model);
        let back = baseline_from_bytes(&bytes).unwrap();
        prop_assert_eq!(baseline_to_bytes(&back), bytes);
    }
}
