//! CSP + LDA baseline on μ-band segments.
//!
//! Every trial is band-passed to 8–12 Hz, cut to the analysis window (no
//! re-referencing), projected onto `2m` CSP filters and reduced to
//! normalized log-variances, which an LDA separates. Left is class 1 of the
//! CSP problem; a positive LDA score means Right.

pub mod csp;
pub mod lda;
pub mod linalg;

use std::path::Path;

pub use csp::{class_covariance, csp_features, csp_fit, features_from_variances, CspModel};
pub use lda::{lda_fit, lda_predict, LdaModel};
pub use linalg::Mat;

use crate::binfmt::{limit, BinError, ByteReader, ByteWriter};
use crate::dsp::{design_bandpass, filtfilt, segment, BandSpec, Biquad, DspError, Segment, Window, DEFAULT_ORDER, MU_BAND};
use crate::trialio::TrialSet;
use crate::types::Label;

pub const MAGIC: &[u8; 4] = b"CSPB";
pub const VERSION: u32 = 1;
pub const DEFAULT_PAIRS: usize = 3;
const MAX_CHANNELS: usize = 512;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CspError {
    #[error("no trials for covariance estimate")]
    NoTrials,
    #[error("trial {index} has zero total power")]
    ZeroTrace { index: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{pairs} filter pairs requested for {channels} channels")]
    Pairs { pairs: usize, channels: usize },
    #[error("composite covariance not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("projected variances sum to zero")]
    ZeroVariance,
    #[error("class {class} has {count} samples, LDA needs at least 2")]
    TooFewSamples { class: Label, count: usize },
    #[error("pooled covariance singular after ridge")]
    SingularPooled,
    #[error("train and test sets differ in {0}")]
    Montage(&'static str),
    #[error("test set has no usable trials")]
    EmptyTest,
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Baseline protocol knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub band: BandSpec,
    pub window: Window,
    pub pairs: usize,
    pub order: usize,
    pub include_rejected: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            band: MU_BAND,
            window: Window::default(),
            pairs: DEFAULT_PAIRS,
            order: DEFAULT_ORDER,
            include_rejected: false,
        }
    }
}

/// Fitted baseline: filters, classifier and the preprocessing they assume.
#[derive(Debug, Clone, PartialEq)]
pub struct CspLdaModel {
    pub csp: CspModel,
    pub lda: LdaModel,
    pub band: BandSpec,
    pub window: Window,
    pub config_digest: u64,
}

impl CspLdaModel {
    pub fn predict(&self, segment: &Segment) -> Result<Label, CspError> {
        let f = csp_features(&self.csp, segment)?;
        Ok(lda_predict(&self.lda, &f))
    }
}

/// μ-band segments of the usable trials in `set`.
pub fn baseline_segments(
    set: &TrialSet,
    sections: &[Biquad],
    window: Window,
    include_rejected: bool,
) -> Result<Vec<(Segment, Label)>, CspError> {
    set.usable(include_rejected)
        .enumerate()
        .map(|(i, t)| {
            let filtered = t
                .channels_f64()
                .iter()
                .map(|c| filtfilt(sections, c))
                .collect::<Result<Vec<_>, _>>()?;
            let seg = segment(&filtered, t.cue_sample, window, set.sample_rate).map_err(|e| e.with_trial(i))?;
            Ok((seg, t.label))
        })
        .collect()
}

/// Second-order summary of one segment: enough to compute both its
/// trace-normalized covariance and the variance of any spatial projection.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    /// `X Xᵀ`.
    pub scatter: Mat,
    /// Per-channel sample mean.
    pub mean: Vec<f64>,
    pub n_samples: usize,
    pub label: Label,
}

impl TrialStats {
    pub fn from_segment(seg: &Segment, label: Label) -> Self {
        let n = seg.n_channels();
        let t = seg.n_samples();
        let mut scatter = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = linalg::dot(&seg.data[i], &seg.data[j]);
                scatter[(i, j)] = v;
                scatter[(j, i)] = v;
            }
        }
        let mean = seg.data.iter().map(|c| c.iter().sum::<f64>() / t.max(1) as f64).collect();
        TrialStats {
            scatter,
            mean,
            n_samples: t,
            label,
        }
    }

    /// Variance of `wᵀX` over time.
    pub fn projected_variance(&self, w: &[f64]) -> f64 {
        let t = self.n_samples as f64;
        let sw = self.scatter.matvec(w);
        let m = linalg::dot(w, &self.mean);
        (linalg::dot(w, &sw) / t - m * m).max(0.0)
    }
}

/// Mean trace-normalized scatter of the trials of one class.
pub fn class_covariance_stats<'a, I>(stats: I) -> Result<Mat, CspError>
where
    I: IntoIterator<Item = &'a TrialStats>,
{
    let mut acc: Option<Mat> = None;
    let mut count = 0usize;
    for (index, s) in stats.into_iter().enumerate() {
        let tr = s.scatter.trace();
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(CspError::ZeroTrace { index });
        }
        let c = s.scatter.scale(1.0 / tr);
        acc = Some(match acc {
            None => c,
            Some(a) if a.rows() == c.rows() => a.add(&c),
            Some(a) => {
                return Err(CspError::Dimension {
                    expected: a.rows(),
                    got: c.rows(),
                })
            }
        });
        count += 1;
    }
    Ok(acc.ok_or(CspError::NoTrials)?.scale(1.0 / count as f64))
}

pub fn csp_features_stats(model: &CspModel, stats: &TrialStats) -> Result<Vec<f64>, CspError> {
    if stats.mean.len() != model.filters.cols() {
        return Err(CspError::Dimension {
            expected: model.filters.cols(),
            got: stats.mean.len(),
        });
    }
    let vars: Vec<f64> = (0..model.filters.rows())
        .map(|f| stats.projected_variance(model.filters.row(f)))
        .collect();
    features_from_variances(&vars)
}

/// Fit CSP and LDA on per-trial statistics.
pub fn fit_stats(data: &[&TrialStats], pairs: usize) -> Result<(CspModel, LdaModel), CspError> {
    let by_class = |l: Label| data.iter().copied().filter(move |s| s.label == l);
    let c1 = class_covariance_stats(by_class(Label::Left))?;
    let c2 = class_covariance_stats(by_class(Label::Right))?;
    let csp = csp_fit(&c1, &c2, pairs)?;
    let mut feats: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for s in data {
        feats[s.label.index()].push(csp_features_stats(&csp, s)?);
    }
    let lda = lda_fit(&feats[0], &feats[1])?;
    Ok((csp, lda))
}

/// Fit CSP and LDA on labeled segments.
pub fn fit_segments(data: &[(Segment, Label)], pairs: usize) -> Result<(CspModel, LdaModel), CspError> {
    let by_class = |l: Label| data.iter().filter(move |(_, lab)| *lab == l).map(|(s, _)| s);
    let c1 = class_covariance(by_class(Label::Left))?;
    let c2 = class_covariance(by_class(Label::Right))?;
    let csp = csp_fit(&c1, &c2, pairs)?;
    let mut feats: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for (s, l) in data {
        feats[l.index()].push(csp_features(&csp, s)?);
    }
    let lda = lda_fit(&feats[0], &feats[1])?;
    Ok((csp, lda))
}

fn check_montage(a: &TrialSet, b: &TrialSet) -> Result<(), CspError> {
    if a.channels != b.channels {
        return Err(CspError::Montage("channel montage"));
    }
    if a.sample_rate != b.sample_rate {
        return Err(CspError::Montage("sample rate"));
    }
    Ok(())
}

/// Fit the baseline on every set in `train` (pooled).
pub fn fit_baseline(train: &[&TrialSet], cfg: &BaselineConfig) -> Result<CspLdaModel, CspError> {
    let first = train.first().ok_or(CspError::NoTrials)?;
    for s in &train[1..] {
        check_montage(first, s)?;
    }
    let sections = design_bandpass(cfg.band, first.sample_rate, cfg.order)?;
    let mut data = Vec::new();
    for s in train {
        data.extend(baseline_segments(s, &sections, cfg.window, cfg.include_rejected)?);
    }
    let (csp, lda) = fit_segments(&data, cfg.pairs)?;
    Ok(CspLdaModel {
        csp,
        lda,
        band: cfg.band,
        window: cfg.window,
        config_digest: 0,
    })
}

/// Correct and total predictions of `model` on `test`.
pub fn evaluate_baseline(model: &CspLdaModel, test: &TrialSet, cfg: &BaselineConfig) -> Result<(usize, usize), CspError> {
    let sections = design_bandpass(model.band, test.sample_rate, cfg.order)?;
    let data = baseline_segments(test, &sections, model.window, cfg.include_rejected)?;
    if data.is_empty() {
        return Err(CspError::EmptyTest);
    }
    let mut correct = 0;
    for (s, l) in &data {
        if model.predict(s)? == *l {
            correct += 1;
        }
    }
    Ok((correct, data.len()))
}

/// Train on `train`, test on `test`; accuracy in percent.
pub fn baseline_pipeline(train: &TrialSet, test: &TrialSet, cfg: &BaselineConfig) -> Result<f64, CspError> {
    check_montage(train, test)?;
    let model = fit_baseline(&[train], cfg)?;
    let (correct, total) = evaluate_baseline(&model, test, cfg)?;
    Ok(100.0 * correct as f64 / total as f64)
}

/// `CSPB` layout: magic, `u32` version, `f64` band low/high, `f64` window
/// start/end, `u64` config digest, `u32` pairs, `u32` channels, `f64` ridge,
/// `2m` eigenvalues, the `2m × n` filter matrix row-major, `2m` LDA weights,
/// LDA bias.
pub fn baseline_to_bytes(model: &CspLdaModel) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.magic(MAGIC).u32(VERSION);
    w.f64(model.band.low_hz).f64(model.band.high_hz);
    w.f64(model.window.start_s).f64(model.window.end_s);
    w.u64(model.config_digest);
    w.u32(model.csp.pairs as u32).u32(model.csp.filters.cols() as u32);
    w.f64(model.csp.ridge);
    w.f64s(&model.csp.eigenvalues);
    w.f64s(model.csp.filters.data());
    w.f64s(&model.lda.weights);
    w.f64(model.lda.bias);
    w.into_bytes()
}

pub fn baseline_from_bytes(bytes: &[u8]) -> Result<CspLdaModel, BinError> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let band = BandSpec::new(r.f64()?, r.f64()?);
    let window = Window {
        start_s: r.f64()?,
        end_s: r.f64()?,
    };
    let config_digest = r.u64()?;
    let pairs = r.u32()? as usize;
    let n = r.u32()? as usize;
    limit("channel count", n, MAX_CHANNELS)?;
    if pairs == 0 || 2 * pairs > n {
        return Err(BinError::Invalid(format!("{pairs} filter pairs for {n} channels")));
    }
    let ridge = r.f64()?;
    let eigenvalues = r.f64s(2 * pairs)?;
    let filters = Mat::from_vec(2 * pairs, n, r.f64s(2 * pairs * n)?);
    let weights = r.f64s(2 * pairs)?;
    let bias = r.f64()?;
    r.finish()?;
    Ok(CspLdaModel {
        csp: CspModel {
            filters,
            eigenvalues,
            pairs,
            ridge,
        },
        lda: LdaModel { weights, bias },
        band,
        window,
        config_digest,
    })
}

pub fn write_baseline(model: &CspLdaModel, path: &Path) -> Result<(), BinError> {
    std::fs::write(path, baseline_to_bytes(model))?;
    Ok(())
}

pub fn read_baseline(path: &Path) -> Result<CspLdaModel, BinError> {
    baseline_from_bytes(&std::fs::read(path)?)
}
