use super::linalg::{cholesky, cholesky_solve, dot, Mat};
use super::CspError;
use crate::types::Label;

/// Fisher discriminant: `score = w·x + bias`, positive means [`Label::Right`].
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Diagonal loading on the pooled covariance, relative to its mean variance.
pub const LDA_RIDGE: f64 = 1e-6;

/// `features[k]` holds the samples of class `Label::from_index(k)`.
pub fn lda_fit(left: &[Vec<f64>], right: &[Vec<f64>]) -> Result<LdaModel, CspError> {
    for (label, set) in [(Label::Left, left), (Label::Right, right)] {
        if set.len() < 2 {
            return Err(CspError::TooFewSamples {
                class: label,
                count: set.len(),
            });
        }
    }
    let d = left[0].len();
    if let Some(bad) = left.iter().chain(right).find(|x| x.len() != d) {
        return Err(CspError::Dimension {
            expected: d,
            got: bad.len(),
        });
    }
    let mean = |set: &[Vec<f64>]| {
        let mut m = vec![0.0; d];
        for x in set {
            for (a, v) in m.iter_mut().zip(x) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= set.len() as f64);
        m
    };
    let mu_l = mean(left);
    let mu_r = mean(right);
    let mut pooled = Mat::zeros(d, d);
    for (set, mu) in [(left, &mu_l), (right, &mu_r)] {
        for x in set {
            for i in 0..d {
                let di = x[i] - mu[i];
                for j in 0..d {
                    pooled[(i, j)] += di * (x[j] - mu[j]);
                }
            }
        }
    }
    let dof = (left.len() + right.len() - 2) as f64;
    let mut pooled = pooled.scale(1.0 / dof);
    let avg_var = pooled.trace() / d as f64;
    let ridge = if avg_var > 0.0 { LDA_RIDGE * avg_var } else { LDA_RIDGE };
    for i in 0..d {
        pooled[(i, i)] += ridge;
    }
    let chol = cholesky(&pooled).ok_or(CspError::SingularPooled)?;
    let diff: Vec<f64> = mu_r.iter().zip(&mu_l).map(|(r, l)| r - l).collect();
    let weights = cholesky_solve(&chol, &diff);
    let midpoint: Vec<f64> = mu_r.iter().zip(&mu_l).map(|(r, l)| 0.5 * (r + l)).collect();
    let bias = -dot(&weights, &midpoint);
    if !(bias.is_finite() && weights.iter().all(|w| w.is_finite())) {
        return Err(CspError::SingularPooled);
    }
    Ok(LdaModel { weights, bias })
}

impl LdaModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

pub fn lda_predict(model: &LdaModel, x: &[f64]) -> Label {
    if model.score(x) > 0.0 {
        Label::Right
    } else {
        Label::Left
    }
}
