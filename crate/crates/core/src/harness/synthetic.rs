use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::ReturnPanel;

/// Drift multiplier applied from a fraction of the sample onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeShift {
    pub at: f64,
    pub drift_multiplier: f64,
}

/// Gaussian AR(1) return panel.
///
/// `drift` and `vol` hold one value per asset, or a single value shared by
/// all assets. Cross-sectional dependence is either an equicorrelation
/// `correlation` or a full `correlation_matrix`, which takes precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub t: usize,
    pub d: usize,
    pub drift: Vec<f64>,
    pub vol: Vec<f64>,
    pub ar: f64,
    pub correlation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub shift: Option<RegimeShift>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            t: 1000,
            d: 5,
            drift: vec![3e-4],
            vol: vec![0.01],
            ar: 0.0,
            correlation: 0.0,
            correlation_matrix: None,
            shift: None,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    /// 21 correlated assets over two years of daily data.
    pub fn portfolio_default() -> Self {
        Self {
            t: 504,
            d: 21,
            drift: (0..21).map(|k| 1e-4 + 2e-5 * k as f64).collect(),
            vol: (0..21).map(|k| 0.008 + 4e-4 * k as f64).collect(),
            ar: 0.02,
            correlation: 0.3,
            ..Self::default()
        }
    }

    /// Ten trending assets whose drift reverses for the last 20% of the
    /// sample.
    pub fn tuning_default() -> Self {
        Self {
            t: 2000,
            d: 10,
            drift: vec![4e-4],
            vol: vec![0.01],
            ar: 0.05,
            correlation: 0.2,
            shift: Some(RegimeShift {
                at: 0.8,
                drift_multiplier: -1.0,
            }),
            ..Self::default()
        }
    }

    fn per_asset(&self, v: &[f64], name: &str) -> Result<Vec<f64>> {
        match v.len() {
            1 => Ok(vec![v[0]; self.d]),
            n if n == self.d => Ok(v.to_vec()),
            n => Err(Error::Config(format!(
                "{name} has {n} entries for {} assets",
                self.d
            ))),
        }
    }

    fn correlation(&self) -> Result<DMatrix<f64>> {
        let d = self.d;
        let c = match &self.correlation_matrix {
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Config(format!("correlation matrix must be {d}x{d}")));
                }
                DMatrix::from_fn(d, d, |i, j| rows[i][j])
            }
            None => DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { self.correlation }),
        };
        for i in 0..d {
            if c[(i, i)] != 1.0 {
                return Err(Error::Config("correlation diagonal must be 1".into()));
            }
            for j in 0..i {
                if c[(i, j)] != c[(j, i)] || !(c[(i, j)].abs() <= 1.0) {
                    return Err(Error::Config("correlation matrix must be symmetric in [-1, 1]".into()));
                }
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 2 || self.d == 0 {
            return Err(Error::Config(format!(
                "need at least 2 periods and 1 asset, got T={} d={}",
                self.t, self.d
            )));
        }
        if !(self.ar.abs() < 1.0) {
            return Err(Error::Config(format!("AR coefficient {} must be inside (-1, 1)", self.ar)));
        }
        let vol = self.per_asset(&self.vol, "vol")?;
        let drift = self.per_asset(&self.drift, "drift")?;
        if vol.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || drift.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("drift and vol must be finite, vol nonnegative".into()));
        }
        if let Some(s) = self.shift {
            if !(s.at > 0.0 && s.at < 1.0) || !s.drift_multiplier.is_finite() {
                return Err(Error::Config("regime shift fraction must be in (0, 1)".into()));
            }
        }
        self.correlation()?;
        Ok(())
    }

    /// First row of the shifted regime.
    pub fn shift_row(&self) -> Option<usize> {
        self.shift.map(|s| (s.at * self.t as f64).floor() as usize)
    }
}

/// Symmetric square root of a PSD matrix; errors when an eigenvalue is below
/// `-1e-10`.
fn psd_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(c.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return Err(Error::Config(format!(
            "correlation matrix is not positive semidefinite (min eigenvalue {min:e})"
        )));
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// Draws the panel: `r_t = drift·m_t + vol ⊙ e_t` with
/// `e_t = φ·e_{t−1} + √(1−φ²)·C^{1/2} z_t`, started from its stationary law.
/// `m_t` is the drift multiplier after the regime shift and 1 before.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<ReturnPanel> {
    spec.validate()?;
    let d = spec.d;
    let drift = DVector::from_vec(spec.per_asset(&spec.drift, "drift")?);
    let vol = DVector::from_vec(spec.per_asset(&spec.vol, "vol")?);
    let root = psd_sqrt(&spec.correlation()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let innov = (1.0 - spec.ar * spec.ar).sqrt();
    let shift_row = spec.shift_row();
    let mult = spec.shift.map_or(1.0, |s| s.drift_multiplier);

    let mut values = DMatrix::zeros(spec.t, d);
    let mut e = DVector::zeros(d);
    for t in 0..spec.t {
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let shock = &root * z;
        e = if t == 0 { shock } else { e * spec.ar + shock * innov };
        let m = if shift_row.is_some_and(|s| t >= s) { mult } else { 1.0 };
        for k in 0..d {
            values[(t, k)] = drift[k] * m + vol[k] * e[k];
        }
    }
    let assets = (1..=d).map(|k| format!("A{k:02}")).collect();
    ReturnPanel::from_matrix(assets, values)
}
