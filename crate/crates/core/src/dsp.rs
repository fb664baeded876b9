//! Band-pass filter bank, zero-phase filtering, segmentation and local
//! average referencing.
//!
//! Filters are Butterworth band-passes designed from the analog prototype
//! with frequency pre-warping and the bilinear transform, kept as cascades
//! of second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("invalid band: {edge} edge {value} Hz {reason}")]
    InvalidBand {
        edge: &'static str,
        value: f64,
        reason: String,
    },
    #[error("filter order {0} unsupported (expected 2, 4, 6 or 8)")]
    UnsupportedOrder(usize),
    #[error("signal of {len} samples too short for edge padding of {padlen} samples")]
    SignalTooShort { len: usize, padlen: usize },
    #[error("{}window needs samples up to {needed} but only {available} exist", trial_prefix(*.trial))]
    WindowOutOfBounds {
        trial: Option<usize>,
        needed: usize,
        available: usize,
    },
    #[error("invalid window {start_s}..{end_s} s")]
    InvalidWindow { start_s: f64, end_s: f64 },
    #[error("local average reference needs at least 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("channels have unequal lengths")]
    RaggedChannels,
}

fn trial_prefix(trial: Option<usize>) -> String {
    trial.map(|t| format!("trial {t}: ")).unwrap_or_default()
}

impl DspError {
    /// Attach a trial index to a segmentation error.
    pub fn with_trial(self, index: usize) -> Self {
        match self {
            DspError::WindowOutOfBounds {
                needed, available, ..
            } => DspError::WindowOutOfBounds {
                trial: Some(index),
                needed,
                available,
            },
            other => other,
        }
    }
}

/// A pass band in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub low_hz: f64,
    pub high_hz: f64,
}

/// The six bands of the feature map, in plane order: θ, α, β, θ+α, α+β,
/// θ+α+β.
pub const DEFAULT_BANDS: [BandSpec; 6] = [
    BandSpec::new(4.0, 8.0),
    BandSpec::new(8.0, 13.0),
    BandSpec::new(13.0, 30.0),
    BandSpec::new(4.0, 13.0),
    BandSpec::new(8.0, 30.0),
    BandSpec::new(4.0, 30.0),
];

/// The μ band used by the CSP baseline.
pub const MU_BAND: BandSpec = BandSpec::new(8.0, 12.0);

/// Default Butterworth band-pass order.
pub const DEFAULT_ORDER: usize = 4;

impl BandSpec {
    pub const fn new(low_hz: f64, high_hz: f64) -> Self {
        BandSpec { low_hz, high_hz }
    }

    /// Checks `0 < low < high < sample_rate / 2`.
    pub fn validate(&self, sample_rate: f64) -> Result<(), DspError> {
        let nyquist = sample_rate / 2.0;
        if !(self.low_hz.is_finite() && self.low_hz > 0.0) {
            return Err(DspError::InvalidBand {
                edge: "low",
                value: self.low_hz,
                reason: "must be positive".into(),
            });
        }
        if !(self.high_hz.is_finite() && self.high_hz > self.low_hz) {
            return Err(DspError::InvalidBand {
                edge: "high",
                value: self.high_hz,
                reason: format!("must exceed the low edge {}", self.low_hz),
            });
        }
        if self.high_hz >= nyquist {
            return Err(DspError::InvalidBand {
                edge: "high",
                value: self.high_hz,
                reason: format!("must be below Nyquist {nyquist}"),
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for BandSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.low_hz, self.high_hz)
    }
}

/// Second-order section with `a0 = 1`:
/// `y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Frequency response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Transposed direct form II state reached after a unit step settles.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b2 - self.a2 * g;
        let z1 = self.b1 - self.a1 * g + z2;
        [z1, z2]
    }
}

/// Magnitude response of a cascade at `freq_hz`.
pub fn cascade_magnitude(sections: &[Biquad], freq_hz: f64, sample_rate: f64) -> f64 {
    let omega = 2.0 * PI * freq_hz / sample_rate;
    sections
        .iter()
        .map(|s| s.response(omega))
        .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
        .norm()
}

/// Butterworth band-pass of total order `order` as `order / 2` biquads.
///
/// The composite response is normalized to unit gain at the digital image of
/// the analog center frequency, so the pre-warped band edges sit at -3.01 dB.
pub fn design_bandpass(
    band: BandSpec,
    sample_rate: f64,
    order: usize,
) -> Result<Vec<Biquad>, DspError> {
    if !matches!(order, 2 | 4 | 6 | 8) {
        return Err(DspError::UnsupportedOrder(order));
    }
    band.validate(sample_rate)?;
    let n = order / 2;
    let fs2 = 2.0 * sample_rate;
    let w1 = fs2 * (PI * band.low_hz / sample_rate).tan();
    let w2 = fs2 * (PI * band.high_hz / sample_rate).tan();
    let bw = w2 - w1;
    let w0_sq = w1 * w2;

    let mut z_poles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * (bw / 2.0);
        let root = (half * half - w0_sq).sqrt();
        for s in [half + root, half - root] {
            z_poles.push((fs2 + s) / (fs2 - s));
        }
    }

    let mut denominators = Vec::with_capacity(n);
    let mut real_poles = Vec::new();
    for p in &z_poles {
        if p.im > 1e-12 {
            denominators.push((-2.0 * p.re, p.norm_sqr()));
        } else if p.im.abs() <= 1e-12 {
            real_poles.push(p.re);
        }
    }
    real_poles.sort_by(f64::total_cmp);
    for pair in real_poles.chunks(2) {
        match pair {
            [r1, r2] => denominators.push((-(r1 + r2), r1 * r2)),
            // a lone real pole cannot occur: poles come from n conjugate-symmetric pairs
            [r] => denominators.push((-r, 0.0)),
            _ => unreachable!(),
        }
    }
    debug_assert_eq!(denominators.len(), n);

    let omega0 = 2.0 * (w0_sq.sqrt() / fs2).atan();
    let sections = denominators
        .into_iter()
        .map(|(a1, a2)| {
            let raw = Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1,
                a2,
            };
            let g = 1.0 / raw.response(omega0).norm();
            Biquad {
                b0: g,
                b1: 0.0,
                b2: -g,
                ..raw
            }
        })
        .collect();
    Ok(sections)
}

/// Initial state for [`filter_forward`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Zero,
    /// Steady state for a constant input equal to the first sample.
    SteadyStep,
}

/// Causal cascade filtering (transposed direct form II per section).
pub fn filter_forward(sections: &[Biquad], signal: &[f64], init: InitialState) -> Vec<f64> {
    let mut out = signal.to_vec();
    let x0 = signal.first().copied().unwrap_or(0.0);
    let mut scale = x0;
    for s in sections {
        let [mut z1, mut z2] = match init {
            InitialState::Zero => [0.0, 0.0],
            InitialState::SteadyStep => {
                let st = s.step_state();
                [st[0] * scale, st[1] * scale]
            }
        };
        scale *= s.dc_gain();
        for v in out.iter_mut() {
            let x = *v;
            let y = s.b0 * x + z1;
            z1 = s.b1 * x - s.a1 * y + z2;
            z2 = s.b2 * x - s.a2 * y;
            *v = y;
        }
    }
    out
}

/// Edge padding used by [`filtfilt`]: three times the filter order.
pub fn padlen(sections: &[Biquad]) -> usize {
    3 * 2 * sections.len()
}

/// Odd reflection about each end point.
pub fn odd_extend(signal: &[f64], pad: usize) -> Vec<f64> {
    let n = signal.len();
    let first = signal[0];
    let last = signal[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));
    ext
}

/// Zero-phase forward-backward filtering with odd edge extension.
pub fn filtfilt(sections: &[Biquad], signal: &[f64]) -> Result<Vec<f64>, DspError> {
    let pad = padlen(sections);
    if signal.len() <= pad {
        return Err(DspError::SignalTooShort {
            len: signal.len(),
            padlen: pad,
        });
    }
    let ext = odd_extend(signal, pad);
    let mut y = filter_forward(sections, &ext, InitialState::SteadyStep);
    y.reverse();
    let mut y = filter_forward(sections, &y, InitialState::SteadyStep);
    y.reverse();
    Ok(y[pad..pad + signal.len()].to_vec())
}

/// Bands with their designed sections.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub bands: Vec<BandSpec>,
    pub sections: Vec<Vec<Biquad>>,
    pub sample_rate: f64,
}

impl FilterBank {
    pub fn new(bands: &[BandSpec], sample_rate: f64, order: usize) -> Result<Self, DspError> {
        let sections = bands
            .iter()
            .map(|b| design_bandpass(*b, sample_rate, order))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FilterBank {
            bands: bands.to_vec(),
            sections,
            sample_rate,
        })
    }

    /// The six feature-map bands with 4th-order Butterworth filters.
    pub fn standard(sample_rate: f64) -> Result<Self, DspError> {
        Self::new(&DEFAULT_BANDS, sample_rate, DEFAULT_ORDER)
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Filters every channel with one band.
    pub fn apply_band(&self, band: usize, channels: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DspError> {
        channels
            .iter()
            .map(|ch| filtfilt(&self.sections[band], ch))
            .collect()
    }
}

/// Analysis window relative to cue onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start_s: f64,
    pub end_s: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            start_s: 0.5,
            end_s: 2.5,
        }
    }
}

impl Window {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.start_s.is_finite() && self.end_s.is_finite() && self.start_s >= 0.0 && self.end_s > self.start_s {
            Ok(())
        } else {
            Err(DspError::InvalidWindow {
                start_s: self.start_s,
                end_s: self.end_s,
            })
        }
    }

    pub fn offset_samples(&self, sample_rate: f64) -> usize {
        (self.start_s * sample_rate).round() as usize
    }

    pub fn len_samples(&self, sample_rate: f64) -> usize {
        ((self.end_s - self.start_s) * sample_rate).round() as usize
    }
}

/// Cue-locked slice of a multichannel recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// One row per channel.
    pub data: Vec<Vec<f64>>,
    pub t_start_s: f64,
    pub t_end_s: f64,
}

impl Segment {
    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }
}

/// Cuts `[cue + start, cue + start + len)` out of every channel.
pub fn segment(
    channels: &[Vec<f64>],
    cue_sample: usize,
    window: Window,
    sample_rate: f64,
) -> Result<Segment, DspError> {
    window.validate()?;
    let available = channels.first().map_or(0, Vec::len);
    if channels.iter().any(|c| c.len() != available) {
        return Err(DspError::RaggedChannels);
    }
    let start = cue_sample + window.offset_samples(sample_rate);
    let end = start + window.len_samples(sample_rate);
    if end > available {
        return Err(DspError::WindowOutOfBounds {
            trial: None,
            needed: end,
            available,
        });
    }
    Ok(Segment {
        data: channels.iter().map(|c| c[start..end].to_vec()).collect(),
        t_start_s: window.start_s,
        t_end_s: window.end_s,
    })
}

/// Subtracts the cross-channel mean at every time sample.
pub fn local_average_reference(segment: &Segment) -> Result<Segment, DspError> {
    let n_ch = segment.n_channels();
    if n_ch < 2 {
        return Err(DspError::TooFewChannels(n_ch));
    }
    let n = segment.n_samples();
    if segment.data.iter().any(|c| c.len() != n) {
        return Err(DspError::RaggedChannels);
    }
    let mut mean = vec![0.0; n];
    for ch in &segment.data {
        for (m, v) in mean.iter_mut().zip(ch) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_ch as f64;
    }
    let data = segment
        .data
        .iter()
        .map(|ch| ch.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    Ok(Segment {
        data,
        t_start_s: segment.t_start_s,
        t_end_s: segment.t_end_s,
    })
}

/// Filter, segment and re-reference one trial in every band of `bank`.
pub fn band_segments(
    bank: &FilterBank,
    channels: &[Vec<f64>],
    cue_sample: usize,
    window: Window,
) -> Result<Vec<Segment>, DspError> {
    (0..bank.len())
        .map(|b| {
            let filtered = bank.apply_band(b, channels)?;
            let seg = segment(&filtered, cue_sample, window, bank.sample_rate)?;
            local_average_reference(&seg)
        })
        .collect()
}
