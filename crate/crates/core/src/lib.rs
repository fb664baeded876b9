//! Interpretable motor-imagery EEG decoding.
//!
//! The crate covers the whole path from raw two-class EEG trials to an
//! explained decision:
//!
//! - [`dsp`]: Butterworth band-pass filter bank, zero-phase filtering,
//!   cue-locked segmentation and local average referencing.
//! - [`featmap`]: projection of the 22 IV-2a channels onto a 6×7 scalp grid
//!   and the 6×7×12 max/min feature tensor.
//! - [`autonet`]: a small from-scratch CNN (four VALID convolutions and a
//!   dense layer) trained with softmax cross-entropy and Adam.
//! - [`lrp`]: layer-wise relevance propagation back to the input tensor and
//!   class-wise aggregation.
//! - [`cspbase`]: the CSP + LDA baseline.
//! - [`harness`]: leave-one-subject-out folds and experiment reports.
//! - [`trialio`]: the `MITS` trial container, text import and tensor caches.
//! - [`topoviz`]: SVG scalp topographies.
//!
//! All numeric work is done in `f64`. Raw samples are stored as `f32`.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autonet;
pub mod binfmt;
pub mod config;
pub mod cspbase;
pub mod dsp;
pub mod featmap;
pub mod harness;
pub mod lrp;
pub mod synth;
pub mod topoviz;
pub mod trialio;
mod types;

pub use autonet::{AdamState, CnnModel, ConvLayer, DenseLayer, Tensor3, TrainConfig};
pub use config::RunConfig;
pub use cspbase::{CspModel, LdaModel};
pub use dsp::{BandSpec, Biquad, Segment, Window};
pub use featmap::{ChannelGrid, FeatureTensor};
pub use harness::{ExperimentReport, LosoFold};
pub use lrp::{LrpRule, RelevanceMap};
pub use trialio::{Trial, TrialSet};
pub use types::{Label, ParseLabelError, Session, SubjectId};
