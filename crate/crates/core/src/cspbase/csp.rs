use super::linalg::{jacobi_eigen, Mat};
use super::CspError;
use crate::dsp::Segment;

/// Spatial filters, one per row, ordered by decreasing eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct CspModel {
    pub filters: Mat,
    /// Generalized eigenvalue `wᵀC₁w / wᵀ(C₁+C₂)w` of each filter.
    pub eigenvalues: Vec<f64>,
    pub pairs: usize,
    /// Diagonal loading that was added to `C₁ + C₂` (0 when none was needed).
    pub ridge: f64,
}

/// Ridge scale relative to the mean composite eigenvalue.
pub const RIDGE_FACTOR: f64 = 1e-8;
/// Below this relative smallest eigenvalue the composite is treated as singular
/// and the ridge is applied.
pub const CONDITION_FLOOR: f64 = 1e-10;

/// Mean over trials of `X Xᵀ / trace(X Xᵀ)`.
pub fn class_covariance<'a, I>(segments: I) -> Result<Mat, CspError>
where
    I: IntoIterator<Item = &'a Segment>,
{
    let mut acc: Option<Mat> = None;
    let mut count = 0usize;
    for (idx, seg) in segments.into_iter().enumerate() {
        let n = seg.n_channels();
        let mut c = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = seg.data[i].iter().zip(&seg.data[j]).map(|(a, b)| a * b).sum();
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        let tr = c.trace();
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(CspError::ZeroTrace { index: idx });
        }
        let c = c.scale(1.0 / tr);
        acc = Some(match acc {
            None => c,
            Some(a) if a.rows() == n => a.add(&c),
            Some(a) => {
                return Err(CspError::Dimension {
                    expected: a.rows(),
                    got: n,
                })
            }
        });
        count += 1;
    }
    let acc = acc.ok_or(CspError::NoTrials)?;
    Ok(acc.scale(1.0 / count as f64))
}

/// Solves `C₁ w = λ (C₁ + C₂) w` by whitening the composite and
/// diagonalizing the whitened `C₁`; keeps the `pairs` largest and smallest.
pub fn csp_fit(cov1: &Mat, cov2: &Mat, pairs: usize) -> Result<CspModel, CspError> {
    let n = cov1.rows();
    if cov1.cols() != n || cov2.rows() != n || cov2.cols() != n {
        return Err(CspError::Dimension {
            expected: n,
            got: cov2.rows(),
        });
    }
    if pairs == 0 || 2 * pairs > n {
        return Err(CspError::Pairs { pairs, channels: n });
    }
    let mut composite = cov1.add(cov2);
    let mean_eig = composite.trace() / n as f64;
    if !(mean_eig > 0.0 && mean_eig.is_finite()) {
        return Err(CspError::NotPositiveDefinite { min_eigenvalue: mean_eig });
    }
    let mut eig = jacobi_eigen(&composite);
    let mut ridge = 0.0;
    if eig.values[0] <= CONDITION_FLOOR * mean_eig {
        ridge = RIDGE_FACTOR * mean_eig;
        composite = composite.add(&Mat::identity(n).scale(ridge));
        eig = jacobi_eigen(&composite);
    }
    if !(eig.values[0] > 0.0) {
        return Err(CspError::NotPositiveDefinite {
            min_eigenvalue: eig.values[0],
        });
    }
    // P = Λ^{-1/2} Uᵀ
    let mut whiten = eig.vectors.transpose();
    for i in 0..n {
        let s = 1.0 / eig.values[i].sqrt();
        for j in 0..n {
            whiten[(i, j)] *= s;
        }
    }
    let s1 = whiten.congruence(cov1);
    let inner = jacobi_eigen(&s1);
    // W = Vᵀ P, rows in descending eigenvalue order
    let all = inner.vectors.transpose().matmul(&whiten);
    let keep: Vec<usize> = (0..pairs).map(|k| n - 1 - k).chain((0..pairs).rev()).collect();
    let mut filters = Mat::zeros(2 * pairs, n);
    let mut eigenvalues = Vec::with_capacity(2 * pairs);
    for (row, &src) in keep.iter().enumerate() {
        for j in 0..n {
            filters[(row, j)] = all[(src, j)];
        }
        eigenvalues.push(inner.values[src]);
    }
    Ok(CspModel {
        filters,
        eigenvalues,
        pairs,
        ridge,
    })
}

/// Normalized log-variance of each filter's projection.
pub fn csp_features(model: &CspModel, segment: &Segment) -> Result<Vec<f64>, CspError> {
    let n = model.filters.cols();
    if segment.n_channels() != n {
        return Err(CspError::Dimension {
            expected: n,
            got: segment.n_channels(),
        });
    }
    let t = segment.n_samples();
    let vars: Vec<f64> = (0..model.filters.rows())
        .map(|f| {
            let w = model.filters.row(f);
            let mut proj = vec![0.0; t];
            for (wc, ch) in w.iter().zip(&segment.data) {
                for (p, v) in proj.iter_mut().zip(ch) {
                    *p += wc * v;
                }
            }
            let mean = proj.iter().sum::<f64>() / t as f64;
            proj.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / t as f64
        })
        .collect();
    features_from_variances(&vars)
}

/// `log(var_i / Σ var)`.
pub fn features_from_variances(vars: &[f64]) -> Result<Vec<f64>, CspError> {
    let total: f64 = vars.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(CspError::ZeroVariance);
    }
    Ok(vars.iter().map(|v| (v / total).ln()).collect())
}
