//! Synthetic two-class recordings with a lateralized μ/α effect.
//!
//! Every channel carries white noise plus a weak background rhythm in
//! 8–13 Hz. Left trials amplify that rhythm on C3, right trials on C4.
//! Subjects differ by a random overall gain and effect strength.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::featmap::iv2a_channels;
use crate::trialio::{Trial, TrialSet};
use crate::types::{Label, Session, SubjectId};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub subjects: usize,
    /// Per session, split evenly between the classes.
    pub trials_per_session: usize,
    pub sample_rate: f64,
    pub n_samples: usize,
    pub cue_sample: usize,
    pub noise_std: f64,
    /// Amplitude of the shared background rhythm.
    pub background: f64,
    /// Amplitude multiplier of the rhythm on the lateralized channel.
    pub boost: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            subjects: 9,
            trials_per_session: 144,
            sample_rate: 250.0,
            n_samples: 875,
            cue_sample: 250,
            noise_std: 1.0,
            background: 1.0,
            boost: 3.0,
            seed: 0,
        }
    }
}

pub fn subject_id(index: usize) -> SubjectId {
    SubjectId::new(format!("A{:02}", index + 1))
}

/// Channel receiving the boost for each class.
pub fn boosted_channel(label: Label) -> &'static str {
    match label {
        Label::Left => "C3",
        Label::Right => "C4",
    }
}

/// Sessions ordered by subject then T, E.
pub fn generate(cfg: &SynthConfig) -> Vec<TrialSet> {
    let channels = iv2a_channels();
    let mut out = Vec::with_capacity(cfg.subjects * 2);
    for s in 0..cfg.subjects {
        let mut subj_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        subj_rng.set_stream(1000 + s as u64);
        let gain = subj_rng.random_range(0.8..1.25);
        let effect = cfg.boost * subj_rng.random_range(0.85..1.15);
        for (k, session) in [Session::T, Session::E].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(2 * s as u64 + k as u64 + 1);
            out.push(generate_session(cfg, &channels, subject_id(s), session, gain, effect, &mut rng));
        }
    }
    out
}

fn generate_session(
    cfg: &SynthConfig,
    channels: &[String],
    subject: SubjectId,
    session: Session,
    gain: f64,
    effect: f64,
    rng: &mut ChaCha8Rng,
) -> TrialSet {
    let mut labels: Vec<Label> = (0..cfg.trials_per_session)
        .map(|i| if i % 2 == 0 { Label::Left } else { Label::Right })
        .collect();
    labels.shuffle(rng);
    let noise = Normal::new(0.0, cfg.noise_std).unwrap();
    let n = cfg.n_samples;
    let trials = labels
        .into_iter()
        .map(|label| {
            let hot = boosted_channel(label);
            let mut data = Vec::with_capacity(channels.len() * n);
            for name in channels {
                let amp = if name == hot {
                    cfg.background * effect
                } else {
                    cfg.background
                };
                // two random components inside 8–13 Hz
                let comps: Vec<(f64, f64)> = (0..2)
                    .map(|_| (rng.random_range(8.5..12.5), rng.random_range(0.0..2.0 * PI)))
                    .collect();
                for t in 0..n {
                    let time = t as f64 / cfg.sample_rate;
                    let rhythm: f64 = comps
                        .iter()
                        .map(|(f, ph)| (2.0 * PI * f * time + ph).sin())
                        .sum::<f64>()
                        * amp
                        / 2f64.sqrt();
                    data.push((gain * (rhythm + noise.sample(rng))) as f32);
                }
            }
            Trial {
                data,
                n_samples: n,
                cue_sample: cfg.cue_sample,
                label,
                rejected: false,
            }
        })
        .collect();
    TrialSet {
        subject,
        session,
        sample_rate: cfg.sample_rate,
        channels: channels.to_vec(),
        trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            subjects: 2,
            trials_per_session: 10,
            ..Default::default()
        }
    }

    #[test]
    fn shape_and_balance() {
        let sets = generate(&small());
        assert_eq!(sets.len(), 4);
        assert_eq!(sets[0].key(), "A01T");
        assert_eq!(sets[3].key(), "A02E");
        for s in &sets {
            s.validate().unwrap();
            assert_eq!(s.n_channels(), 22);
            let left = s.trials.iter().filter(|t| t.label == Label::Left).count();
            assert_eq!(left, 5);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&small()), generate(&small()));
        let other = SynthConfig { seed: 1, ..small() };
        assert_ne!(generate(&small()), generate(&other));
    }

    #[test]
    fn boosted_channel_is_louder() {
        let cfg = SynthConfig {
            subjects: 1,
            trials_per_session: 40,
            ..Default::default()
        };
        let set = &generate(&cfg)[0];
        let c3 = set.channels.iter().position(|c| c == "C3").unwrap();
        let c4 = set.channels.iter().position(|c| c == "C4").unwrap();
        let power = |t: &Trial, c: usize| t.channel(c).iter().map(|v| (*v as f64).powi(2)).sum::<f64>();
        let mut ratio = [0.0; 2];
        for t in &set.trials {
            ratio[t.label.index()] += (power(t, c3) / power(t, c4)).ln();
        }
        assert!(ratio[Label::Left.index()] > 20.0);
        assert!(ratio[Label::Right.index()] < -20.0);
    }
}
