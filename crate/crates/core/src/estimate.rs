//! Moment estimation on panels and bootstrap replicates, covariance repair and
//! empirical confidence boxes over `(μ, Σ)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::ReturnPanel;
use crate::resample::{generate_indices, BootstrapSpec, IndexPath};
use crate::stats::type1_rank;

/// Mean vector and covariance matrix, both per period.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl MomentEstimate {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: sigma.nrows(),
            });
        }
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Sample moments over the rows yielded by `rows`; the covariance uses
/// divisor `n - 1` and is exactly symmetric.
fn moments_of_rows(values: &DMatrix<f64>, rows: &[usize]) -> Result<MomentEstimate> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Estimation(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    let d = values.ncols();
    let mut mu = DVector::zeros(d);
    for &t in rows {
        for k in 0..d {
            mu[k] += values[(t, k)];
        }
    }
    mu /= n as f64;

    let mut sigma = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for &t in rows {
        for k in 0..d {
            centered[k] = values[(t, k)] - mu[k];
        }
        for j in 0..d {
            let cj = centered[j];
            for i in 0..=j {
                sigma[(i, j)] += centered[i] * cj;
            }
        }
    }
    let denom = (n - 1) as f64;
    for j in 0..d {
        for i in 0..=j {
            let v = sigma[(i, j)] / denom;
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    Ok(MomentEstimate { mu, sigma })
}

/// Column means and unbiased sample covariance.
pub fn sample_moments(returns: &ReturnPanel) -> Result<MomentEstimate> {
    let rows: Vec<usize> = (0..returns.len()).collect();
    moments_of_rows(returns.values(), &rows)
}

/// Moments of the replicate selected by `path`, without materializing it.
/// Identical to `sample_moments(&materialize(returns, path)?)`.
pub fn path_moments(returns: &ReturnPanel, path: &IndexPath) -> Result<MomentEstimate> {
    if path.len() != returns.len() {
        return Err(Error::Dimension {
            expected: returns.len(),
            got: path.len(),
        });
    }
    moments_of_rows(returns.values(), path.indices())
}

/// Per-replicate moment estimates for one bootstrap run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateEnsemble {
    pub estimates: Vec<MomentEstimate>,
    pub spec: BootstrapSpec,
}

impl ReplicateEnsemble {
    /// Wraps precomputed estimates; they must be non-empty and share a dimension.
    pub fn new(estimates: Vec<MomentEstimate>, spec: BootstrapSpec) -> Result<Self> {
        let first = estimates
            .first()
            .ok_or_else(|| Error::Estimation("empty ensemble".into()))?;
        let d = first.dim();
        if let Some(bad) = estimates.iter().find(|e| e.dim() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: bad.dim(),
            });
        }
        Ok(Self { estimates, spec })
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.estimates[0].dim()
    }

    /// Applies [`psd_repair`] to every replicate covariance.
    pub fn repaired(&self, floor: f64) -> Result<Self> {
        let estimates = self
            .estimates
            .iter()
            .map(|e| psd_repair(e, floor))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            estimates,
            spec: self.spec,
        })
    }

    /// Average of replicate means and covariances.
    pub fn mean_estimate(&self) -> MomentEstimate {
        let s = self.len() as f64;
        let d = self.dim();
        let mut mu = DVector::zeros(d);
        let mut sigma = DMatrix::zeros(d, d);
        for e in &self.estimates {
            mu += &e.mu;
            sigma += &e.sigma;
        }
        MomentEstimate {
            mu: mu / s,
            sigma: sigma / s,
        }
    }

    /// One row per replicate: the mean vector followed by the upper triangle
    /// of the covariance in row-major order.
    pub fn write_csv<W: Write>(&self, writer: W, assets: &[String]) -> Result<()> {
        let d = self.dim();
        if assets.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: assets.len(),
            });
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = assets.iter().map(|a| format!("mu_{a}")).collect();
        for i in 0..d {
            for j in i..d {
                header.push(format!("sigma_{}_{}", assets[i], assets[j]));
            }
        }
        w.write_record(&header)?;
        for e in &self.estimates {
            let mut rec: Vec<String> = e.mu.iter().map(|v| v.to_string()).collect();
            for i in 0..d {
                for j in i..d {
                    rec.push(e.sigma[(i, j)].to_string());
                }
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Bootstrap moment ensemble: replicate `i` is the sample moments of the
/// panel resampled along `generate_indices(spec, T, i)`.
pub fn ensemble_moments(returns: &ReturnPanel, spec: &BootstrapSpec) -> Result<ReplicateEnsemble> {
    let t = returns.len();
    spec.validate(t)?;
    let estimates = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let path = generate_indices(spec, t, i)?;
            path_moments(returns, &path)
        })
        .collect::<Result<Vec<_>>>()?;
    ReplicateEnsemble::new(estimates, *spec)
}

/// Which covariance entries a [`QuantileBoxRegion`] constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegionScope {
    #[default]
    Full,
    DiagonalOnly,
}

/// Elementwise confidence box over ensemble means and covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBoxRegion {
    pub gamma: f64,
    pub scope: RegionScope,
    pub mu_lo: DVector<f64>,
    pub mu_hi: DVector<f64>,
    pub sigma_lo: DMatrix<f64>,
    pub sigma_hi: DMatrix<f64>,
}

fn rank_pair(gamma: f64, s: usize) -> (usize, usize) {
    let tail = (1.0 - gamma) / 2.0;
    (type1_rank(tail, s) - 1, type1_rank(1.0 - tail, s) - 1)
}

/// Type-1 quantile box at levels `(1-γ)/2` and `1-(1-γ)/2`, per coordinate.
pub fn quantile_box(ensemble: &ReplicateEnsemble, gamma: f64) -> Result<QuantileBoxRegion> {
    quantile_box_with_scope(ensemble, gamma, RegionScope::Full)
}

pub fn quantile_box_with_scope(
    ensemble: &ReplicateEnsemble,
    gamma: f64,
    scope: RegionScope,
) -> Result<QuantileBoxRegion> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level {gamma} outside (0, 1)"
        )));
    }
    let s = ensemble.len();
    if s < 2 {
        return Err(Error::InvalidParameter(format!(
            "quantile box needs at least 2 replicates, got {s}"
        )));
    }
    let (lo, hi) = rank_pair(gamma, s);
    let d = ensemble.dim();
    let mut buf = vec![0.0; s];
    let mut bounds = |get: &dyn Fn(&MomentEstimate) -> f64| {
        for (slot, e) in buf.iter_mut().zip(&ensemble.estimates) {
            *slot = get(e);
        }
        buf.sort_by(f64::total_cmp);
        (buf[lo], buf[hi])
    };
    let mut mu_lo = DVector::zeros(d);
    let mut mu_hi = DVector::zeros(d);
    for k in 0..d {
        (mu_lo[k], mu_hi[k]) = bounds(&|e| e.mu[k]);
    }
    let mut sigma_lo = DMatrix::zeros(d, d);
    let mut sigma_hi = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            let (a, b) = bounds(&|e| e.sigma[(i, j)]);
            sigma_lo[(i, j)] = a;
            sigma_lo[(j, i)] = a;
            sigma_hi[(i, j)] = b;
            sigma_hi[(j, i)] = b;
        }
    }
    Ok(QuantileBoxRegion {
        gamma,
        scope,
        mu_lo,
        mu_hi,
        sigma_lo,
        sigma_hi,
    })
}

/// Inclusive membership of `m` in `region`.
pub fn in_region(m: &MomentEstimate, region: &QuantileBoxRegion) -> Result<bool> {
    let d = region.mu_lo.len();
    if m.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: m.dim(),
        });
    }
    let inside = |v: f64, lo: f64, hi: f64| lo <= v && v <= hi;
    for k in 0..d {
        if !inside(m.mu[k], region.mu_lo[k], region.mu_hi[k]) {
            return Ok(false);
        }
    }
    for j in 0..d {
        for i in 0..=j {
            if region.scope == RegionScope::DiagonalOnly && i != j {
                continue;
            }
            if !inside(m.sigma[(i, j)], region.sigma_lo[(i, j)], region.sigma_hi[(i, j)]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Nearest symmetric matrix with eigenvalues at least `floor`; `mu` is untouched.
pub fn psd_repair(m: &MomentEstimate, floor: f64) -> Result<MomentEstimate> {
    if m.sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("covariance has non-finite entries".into()));
    }
    let sym = (&m.sigma + m.sigma.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("eigendecomposition did not converge".into()))?;
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    let sigma = (&rebuilt + rebuilt.transpose()) * 0.5;
    Ok(MomentEstimate {
        mu: m.mu.clone(),
        sigma,
    })
}

/// Covariance of the mean estimator, `Σ̂ / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationCovariance {
    pub omega: DMatrix<f64>,
}

pub fn estimation_covariance(returns: &ReturnPanel) -> Result<EstimationCovariance> {
    let m = sample_moments(returns)?;
    Ok(EstimationCovariance {
        omega: m.sigma / returns.len() as f64,
    })
}
