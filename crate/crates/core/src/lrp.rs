//! Layer-wise relevance propagation for the fixed CNN.
//!
//! Relevance starts at the raw logit of the explained class and is
//! redistributed layer by layer in proportion to each input's contribution
//! `a_j w_jk` to the pre-activation `z_k`. Bias shares are not passed down;
//! the amount they (and the ε stabilizer) absorb is reported as `leak`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::autonet::{CnnModel, ConvLayer, DenseLayer, NetError, Shape3, Tensor3};
use crate::featmap::{ChannelGrid, FeatureTensor, GRID_COLS, GRID_ROWS};
use crate::Label;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LrpError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invalid LRP rule: {0}")]
    InvalidRule(String),
    #[error("{maps} relevance maps but {predictions} predictions and {labels} labels")]
    Misaligned {
        maps: usize,
        predictions: usize,
        labels: usize,
    },
    #[error("relevance table line {line}: {message}")]
    Table { line: usize, message: String },
}

/// Redistribution rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LrpRule {
    /// `R_j = Σ_k a_j w_jk / (z_k + ε·sign z_k) · R_k`
    Epsilon { epsilon: f64 },
    /// `R_j = Σ_k (α (a_j w_jk)⁺ / z_k⁺ − β (a_j w_jk)⁻ / z_k⁻) · R_k`, biases ignored.
    AlphaBeta { alpha: f64, beta: f64 },
}

pub const DEFAULT_EPSILON: f64 = 1e-6;

impl Default for LrpRule {
    fn default() -> Self {
        LrpRule::Epsilon {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl LrpRule {
    pub fn epsilon(epsilon: f64) -> Result<Self, LrpError> {
        let r = LrpRule::Epsilon { epsilon };
        r.validate()?;
        Ok(r)
    }

    pub fn alpha_beta(alpha: f64, beta: f64) -> Result<Self, LrpError> {
        let r = LrpRule::AlphaBeta { alpha, beta };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), LrpError> {
        match *self {
            LrpRule::Epsilon { epsilon } if !(epsilon.is_finite() && epsilon > 0.0) => Err(
                LrpError::InvalidRule(format!("epsilon must be positive, got {epsilon}")),
            ),
            LrpRule::AlphaBeta { alpha, beta }
                if !(alpha.is_finite() && beta >= 0.0 && ((alpha - beta) - 1.0).abs() < 1e-12) =>
            {
                Err(LrpError::InvalidRule(format!(
                    "alpha - beta must equal 1 with beta >= 0, got alpha={alpha} beta={beta}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[inline]
fn stabilized(z: f64, eps: f64) -> f64 {
    if z >= 0.0 {
        z + eps
    } else {
        z - eps
    }
}

/// Relevance at a layer's input plus what the layer failed to pass down.
#[derive(Debug, Clone, PartialEq)]
pub struct Redistribution<T> {
    pub relevance: T,
    /// Σ_k |relevance of output k not assigned to any input|.
    pub leak: f64,
}

/// Alpha-beta share of one output unit over its contributions.
fn alpha_beta_unit(contribs: &[f64], r: f64, alpha: f64, beta: f64, out: &mut [f64]) -> f64 {
    let zp: f64 = contribs.iter().filter(|c| **c > 0.0).sum();
    let zn: f64 = contribs.iter().filter(|c| **c < 0.0).sum();
    let sp = if zp > 0.0 { alpha * r / zp } else { 0.0 };
    let sn = if zn < 0.0 { beta * r / zn } else { 0.0 };
    let mut passed = 0.0;
    for (o, c) in out.iter_mut().zip(contribs) {
        let v = if *c > 0.0 {
            c * sp
        } else if *c < 0.0 {
            -c * sn
        } else {
            0.0
        };
        *o += v;
        passed += v;
    }
    (r - passed).abs()
}

/// Relevance of a dense layer's inputs.
pub fn lrp_dense(
    activations: &[f64],
    layer: &DenseLayer,
    upstream: &[f64],
    rule: LrpRule,
) -> Result<Redistribution<Vec<f64>>, LrpError> {
    rule.validate()?;
    let z = layer.forward(activations)?;
    if upstream.len() != layer.out_dim {
        return Err(NetError::Shape {
            context: "dense upstream relevance",
            expected: layer.out_dim.to_string(),
            got: upstream.len().to_string(),
        }
        .into());
    }
    let mut rel = vec![0.0; layer.in_dim];
    let mut leak = 0.0;
    match rule {
        LrpRule::Epsilon { epsilon } => {
            for k in 0..layer.out_dim {
                let den = stabilized(z[k], epsilon);
                let s = upstream[k] / den;
                for (j, a) in activations.iter().enumerate() {
                    rel[j] += a * layer.w(j, k) * s;
                }
                leak += (upstream[k] * (layer.bias[k] + (den - z[k])) / den).abs();
            }
        }
        LrpRule::AlphaBeta { alpha, beta } => {
            let mut contribs = vec![0.0; layer.in_dim];
            for (k, r) in upstream.iter().enumerate() {
                for (j, a) in activations.iter().enumerate() {
                    contribs[j] = a * layer.w(j, k);
                }
                leak += alpha_beta_unit(&contribs, *r, alpha, beta, &mut rel);
            }
        }
    }
    Ok(Redistribution {
        relevance: rel,
        leak,
    })
}

/// Relevance of a convolution's inputs; overlapping windows add up.
pub fn lrp_conv(
    activations: &Tensor3,
    layer: &ConvLayer,
    upstream: &Tensor3,
    rule: LrpRule,
) -> Result<Redistribution<Tensor3>, LrpError> {
    rule.validate()?;
    let z = layer.forward(activations)?;
    if upstream.shape() != z.shape() {
        return Err(NetError::Shape {
            context: "conv upstream relevance",
            expected: z.shape().to_string(),
            got: upstream.shape().to_string(),
        }
        .into());
    }
    let Shape3(oh, ow, oc) = z.shape();
    match rule {
        LrpRule::Epsilon { epsilon } => {
            // R_in = a ⊙ Wᵀ s with s_k = R_k / (z_k + ε sign z_k)
            let mut s = Tensor3::zeros(oh, ow, oc);
            let mut leak = 0.0;
            for ((sv, zv), (rv, bq)) in s
                .data_mut()
                .iter_mut()
                .zip(z.data())
                .zip(upstream.data().iter().zip(layer.bias.iter().cycle()))
            {
                let den = stabilized(*zv, epsilon);
                *sv = rv / den;
                leak += (rv * (bq + (den - zv)) / den).abs();
            }
            let (mut rel, _) = layer.backward(activations, &s)?;
            for (r, a) in rel.data_mut().iter_mut().zip(activations.data()) {
                *r *= a;
            }
            Ok(Redistribution {
                relevance: rel,
                leak,
            })
        }
        LrpRule::AlphaBeta { alpha, beta } => {
            let mut rel = Tensor3::zeros(activations.height(), activations.width(), activations.channels());
            let win = layer.kh * layer.kw * layer.in_planes;
            let mut contribs = vec![0.0; win];
            let mut shares = vec![0.0; win];
            let mut leak = 0.0;
            for y in 0..oh {
                for x in 0..ow {
                    for q in 0..oc {
                        let mut idx = 0;
                        for i in 0..layer.kh {
                            for j in 0..layer.kw {
                                for (p, a) in activations.pixel(y + i, x + j).iter().enumerate() {
                                    contribs[idx] = a * layer.weights[layer.widx(i, j, p, q)];
                                    idx += 1;
                                }
                            }
                        }
                        shares.iter_mut().for_each(|v| *v = 0.0);
                        leak += alpha_beta_unit(&contribs, upstream.at(y, x, q), alpha, beta, &mut shares);
                        let mut idx = 0;
                        for i in 0..layer.kh {
                            for j in 0..layer.kw {
                                for r in rel.pixel_mut(y + i, x + j) {
                                    *r += shares[idx];
                                    idx += 1;
                                }
                            }
                        }
                    }
                }
            }
            Ok(Redistribution {
                relevance: rel,
                leak,
            })
        }
    }
}

/// Where a relevance map came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceSource {
    pub trial: String,
    pub class: Label,
    pub logit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMap {
    /// Input-shaped relevance, 6×7×12.
    pub planes: Tensor3,
    /// Mean over planes, row-major 6×7.
    pub plane_avg: Vec<f64>,
    /// `plane_avg` read at each placed channel's cell, in grid order.
    pub per_channel: Vec<(String, f64)>,
    pub source: RelevanceSource,
    /// Upper bound on |Σ input relevance − logit|.
    pub leak_bound: f64,
}

impl RelevanceMap {
    pub fn from_planes(planes: Tensor3, grid: &ChannelGrid, source: RelevanceSource, leak_bound: f64) -> Self {
        let np = planes.channels() as f64;
        let mut plane_avg = vec![0.0; GRID_ROWS * GRID_COLS];
        for r in 0..GRID_ROWS.min(planes.height()) {
            for c in 0..GRID_COLS.min(planes.width()) {
                plane_avg[r * GRID_COLS + c] = planes.pixel(r, c).iter().sum::<f64>() / np;
            }
        }
        let per_channel = grid
            .placements()
            .iter()
            .map(|(name, (r, c))| (name.clone(), plane_avg[r * GRID_COLS + c]))
            .collect();
        RelevanceMap {
            planes,
            plane_avg,
            per_channel,
            source,
            leak_bound,
        }
    }

    pub fn avg_at(&self, row: usize, col: usize) -> f64 {
        self.plane_avg[row * GRID_COLS + col]
    }

    pub fn channel(&self, name: &str) -> Option<f64> {
        self.per_channel.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn total(&self) -> f64 {
        self.planes.sum()
    }
}

/// A relevance map plus the per-stage bookkeeping of its propagation.
#[derive(Debug, Clone)]
pub struct Explanation {
    pub map: RelevanceMap,
    /// Relevance shapes from the output back to the input.
    pub stage_shapes: Vec<Shape3>,
    /// Leak of each redistribution step, dense first.
    pub layer_leaks: Vec<f64>,
}

/// Input relevance, stage shapes, per-step leaks and the logits.
pub type Propagation = (Tensor3, Vec<Shape3>, Vec<f64>, [f64; 2]);

/// Propagates an arbitrary starting relevance vector over the two logits.
pub fn propagate(
    model: &CnnModel,
    input: &Tensor3,
    start: [f64; 2],
    rule: LrpRule,
) -> Result<Propagation, LrpError> {
    let trace = model.forward(input)?;
    let mut shapes = vec![Shape3(1, 1, start.len())];
    let mut leaks = Vec::with_capacity(5);
    let d = lrp_dense(&trace.dense_input, &model.dense, &start, rule)?;
    leaks.push(d.leak);
    let Shape3(h, w, c) = trace.pre[3].shape();
    let mut rel = Tensor3::from_vec(h, w, c, d.relevance);
    shapes.push(rel.shape());
    for l in (0..4).rev() {
        let step = lrp_conv(&trace.layer_inputs[l], &model.convs[l], &rel, rule)?;
        leaks.push(step.leak);
        rel = step.relevance;
        shapes.push(rel.shape());
    }
    Ok((rel, shapes, leaks, [trace.logits[0], trace.logits[1]]))
}

/// Explains the logit of `target` for one input tensor.
pub fn explain(
    model: &CnnModel,
    tensor: &FeatureTensor,
    target: Label,
    rule: LrpRule,
    grid: &ChannelGrid,
    trial: &str,
) -> Result<Explanation, LrpError> {
    let logits = model.logits(&tensor.planes)?;
    let mut start = [0.0; 2];
    start[target.index()] = logits[target.index()];
    let (planes, stage_shapes, layer_leaks, _) = propagate(model, &tensor.planes, start, rule)?;
    let leak_bound = layer_leaks.iter().sum();
    let source = RelevanceSource {
        trial: trial.to_string(),
        class: target,
        logit: logits[target.index()],
    };
    Ok(Explanation {
        map: RelevanceMap::from_planes(planes, grid, source, leak_bound),
        stage_shapes,
        layer_leaks,
    })
}

#[derive(Debug, Clone)]
pub struct ClassAggregate {
    pub class: Label,
    /// Correctly classified trials that went into the mean.
    pub count: usize,
    /// `None` when the class has no correctly classified trial.
    pub mean: Option<RelevanceMap>,
}

/// Per-class mean over trials whose prediction equals their label.
pub fn aggregate(
    maps: &[RelevanceMap],
    predictions: &[Label],
    labels: &[Label],
    grid: &ChannelGrid,
) -> Result<[ClassAggregate; 2], LrpError> {
    if maps.len() != predictions.len() || maps.len() != labels.len() {
        return Err(LrpError::Misaligned {
            maps: maps.len(),
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    Ok(Label::ALL.map(|class| {
        let chosen: Vec<&RelevanceMap> = maps
            .iter()
            .zip(predictions.iter().zip(labels))
            .filter(|(_, (p, l))| **p == class && **l == class)
            .map(|(m, _)| m)
            .collect();
        let count = chosen.len();
        let mean = (count > 0).then(|| {
            let first = &chosen[0].planes;
            let mut acc = Tensor3::zeros(first.height(), first.width(), first.channels());
            let (mut logit, mut leak) = (0.0, 0.0);
            for m in &chosen {
                for (a, v) in acc.data_mut().iter_mut().zip(m.planes.data()) {
                    *a += v;
                }
                logit += m.source.logit;
                leak += m.leak_bound;
            }
            let inv = 1.0 / count as f64;
            acc.data_mut().iter_mut().for_each(|v| *v *= inv);
            let source = RelevanceSource {
                trial: "mean".into(),
                class,
                logit: logit * inv,
            };
            RelevanceMap::from_planes(acc, grid, source, leak * inv)
        });
        ClassAggregate { class, count, mean }
    }))
}

/// One line of the relevance table.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceRow {
    pub trial: String,
    pub class: Label,
    pub channel: String,
    pub relevance: f64,
}

pub const TABLE_HEADER: &str = "trial\tclass\tchannel\trelevance";

/// Tab-separated table, one row per map per channel, values with 17
/// significant digits.
pub fn write_relevance_table<W: Write>(mut out: W, maps: &[RelevanceMap]) -> std::io::Result<()> {
    writeln!(out, "{TABLE_HEADER}")?;
    for m in maps {
        for (ch, v) in &m.per_channel {
            writeln!(out, "{}\t{}\t{}\t{:.16e}", m.source.trial, m.source.class, ch, v)?;
        }
    }
    Ok(())
}

pub fn read_relevance_table<R: BufRead>(input: R) -> Result<Vec<RelevanceRow>, LrpError> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| LrpError::Table {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() || line.starts_with('#') || line.trim() == TABLE_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [trial, class, channel, value] = fields[..] else {
            return Err(LrpError::Table {
                line: line_no,
                message: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        };
        let err = |message: String| LrpError::Table {
            line: line_no,
            message,
        };
        rows.push(RelevanceRow {
            trial: trial.to_string(),
            class: class.parse().map_err(|e: crate::ParseLabelError| err(e.to_string()))?,
            channel: channel.to_string(),
            relevance: value
                .trim()
                .parse()
                .map_err(|_| err(format!("not a number: {value:?}")))?,
        });
    }
    Ok(rows)
}
