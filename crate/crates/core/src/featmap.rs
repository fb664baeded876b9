//! Scalp-grid projection and the 6×7×12 max/min feature tensor.

use sha2::{Digest, Sha256};

use crate::autonet::Tensor3;
use crate::dsp::Segment;
use crate::Label;

pub const GRID_ROWS: usize = 6;
pub const GRID_COLS: usize = 7;
pub const N_BANDS: usize = 6;
pub const N_PLANES: usize = 2 * N_BANDS;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatError {
    #[error("expected {N_BANDS} band segments, got {0}")]
    SegmentCount(usize),
    #[error("channel {0:?} is placed on the grid but missing from the segment")]
    MissingChannel(String),
    #[error("segment has {rows} rows but {names} channel names")]
    ChannelCountMismatch { rows: usize, names: usize },
    #[error("band segments disagree in channel count")]
    InconsistentSegments,
    #[error("grid cell ({row}, {col}) is outside the 6×7 grid or used twice")]
    BadPlacement { row: usize, col: usize },
}

/// Channel-name to grid-cell map on the fixed 6×7 layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelGrid {
    placements: Vec<(String, (usize, usize))>,
}

const IV2A_LAYOUT: [(&str, (usize, usize)); 22] = [
    ("Fz", (0, 3)),
    ("FC3", (1, 1)),
    ("FC1", (1, 2)),
    ("FCz", (1, 3)),
    ("FC2", (1, 4)),
    ("FC4", (1, 5)),
    ("C5", (2, 0)),
    ("C3", (2, 1)),
    ("C1", (2, 2)),
    ("Cz", (2, 3)),
    ("C2", (2, 4)),
    ("C4", (2, 5)),
    ("C6", (2, 6)),
    ("CP3", (3, 1)),
    ("CP1", (3, 2)),
    ("CPz", (3, 3)),
    ("CP2", (3, 4)),
    ("CP4", (3, 5)),
    ("P1", (4, 2)),
    ("Pz", (4, 3)),
    ("P2", (4, 4)),
    ("POz", (5, 3)),
];

/// The 22 EEG channels of the IV-2a montage in recording order.
pub fn iv2a_channels() -> Vec<String> {
    IV2A_LAYOUT.iter().map(|(n, _)| n.to_string()).collect()
}

impl Default for ChannelGrid {
    fn default() -> Self {
        default_grid()
    }
}

/// The IV-2a montage projected onto the grid.
pub fn default_grid() -> ChannelGrid {
    ChannelGrid {
        placements: IV2A_LAYOUT
            .iter()
            .map(|(n, rc)| (n.to_string(), *rc))
            .collect(),
    }
}

impl ChannelGrid {
    pub fn new(placements: Vec<(String, (usize, usize))>) -> Result<Self, FeatError> {
        let mut used = [[false; GRID_COLS]; GRID_ROWS];
        for (_, (r, c)) in &placements {
            let (r, c) = (*r, *c);
            if r >= GRID_ROWS || c >= GRID_COLS || used[r][c] {
                return Err(FeatError::BadPlacement { row: r, col: c });
            }
            used[r][c] = true;
        }
        Ok(ChannelGrid { placements })
    }

    pub fn lookup(&self, channel: &str) -> Option<(usize, usize)> {
        self.placements
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(channel))
            .map(|(_, rc)| *rc)
    }

    pub fn placements(&self) -> &[(String, (usize, usize))] {
        &self.placements
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.placements.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn is_placed(&self, row: usize, col: usize) -> bool {
        self.placements.iter().any(|(_, rc)| *rc == (row, col))
    }

    /// Stable identity of the layout, stored in caches and model files.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        for (name, (r, c)) in &self.placements {
            h.update(format!("{name}@{r},{c};").as_bytes());
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }
}

/// One trial's network input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    /// `GRID_ROWS × GRID_COLS × N_PLANES`; plane `2b` holds band-`b` maxima
    /// and plane `2b + 1` the minima.
    pub planes: Tensor3,
    pub label: Label,
}

impl FeatureTensor {
    pub fn zeros(label: Label) -> Self {
        FeatureTensor {
            planes: Tensor3::zeros(GRID_ROWS, GRID_COLS, N_PLANES),
            label,
        }
    }
}

/// Per-channel maximum and minimum over time.
pub fn extremes(segment: &Segment) -> (Vec<f64>, Vec<f64>) {
    segment
        .data
        .iter()
        .map(|ch| {
            ch.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), v| {
                (hi.max(*v), lo.min(*v))
            })
        })
        .unzip()
}

/// Places the per-band extremes of every grid channel into a feature tensor.
///
/// `channels` names the rows of each segment; their order does not matter.
pub fn build_feature_tensor(
    segments: &[Segment],
    channels: &[String],
    grid: &ChannelGrid,
    label: Label,
) -> Result<FeatureTensor, FeatError> {
    if segments.len() != N_BANDS {
        return Err(FeatError::SegmentCount(segments.len()));
    }
    let rows = segments[0].n_channels();
    if segments.iter().any(|s| s.n_channels() != rows) {
        return Err(FeatError::InconsistentSegments);
    }
    if rows != channels.len() {
        return Err(FeatError::ChannelCountMismatch {
            rows,
            names: channels.len(),
        });
    }
    let rows_for: Vec<(usize, (usize, usize))> = grid
        .placements()
        .iter()
        .map(|(name, rc)| {
            channels
                .iter()
                .position(|c| c.eq_ignore_ascii_case(name))
                .map(|i| (i, *rc))
                .ok_or_else(|| FeatError::MissingChannel(name.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut out = FeatureTensor::zeros(label);
    for (b, seg) in segments.iter().enumerate() {
        let (hi, lo) = extremes(seg);
        for &(i, (r, c)) in &rows_for {
            *out.planes.at_mut(r, c, 2 * b) = hi[i];
            *out.planes.at_mut(r, c, 2 * b + 1) = lo[i];
        }
    }
    Ok(out)
}
