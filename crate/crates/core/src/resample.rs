//! Dependence-preserving bootstrap index generators.
//!
//! Every replicate draws from its own ChaCha8 stream: the generator is keyed
//! with `ChaCha8Rng::seed_from_u64(seed)` and its 64-bit stream id is set to
//! the replicate id. Replicates are therefore independent of generation order
//! and can be produced in parallel with identical results.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{synthetic_dates, ReturnPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMethod {
    MovingBlock,
    CircularBlock,
    #[default]
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub method: BootstrapMethod,
    /// Block length `L`; the expected block length for the stationary method.
    pub block_length: usize,
    /// Number of replicates `S`.
    pub count: usize,
    pub seed: u64,
}

/// `⌈T^{1/3}⌉`, never below 1.
pub fn default_block_length(t: usize) -> usize {
    let cube = (t as f64).cbrt().ceil() as usize;
    // guard against cbrt rounding just above an exact cube
    let exact = (1..=cube).find(|l| l * l * l >= t).unwrap_or(cube);
    exact.max(1)
}

impl BootstrapSpec {
    pub fn new(method: BootstrapMethod, block_length: usize, count: usize, seed: u64) -> Self {
        Self {
            method,
            block_length,
            count,
            seed,
        }
    }

    /// Checks the spec against a series of length `t`.
    pub fn validate(&self, t: usize) -> Result<()> {
        if self.block_length == 0 {
            return Err(Error::BootstrapSpec("block length must be at least 1".into()));
        }
        if self.count == 0 {
            return Err(Error::BootstrapSpec("replicate count must be at least 1".into()));
        }
        if t == 0 {
            return Err(Error::BootstrapSpec("cannot resample an empty series".into()));
        }
        if self.method == BootstrapMethod::MovingBlock && self.block_length > t {
            return Err(Error::BootstrapSpec(format!(
                "moving-block length {} exceeds series length {t}",
                self.block_length
            )));
        }
        Ok(())
    }

    /// Generator for replicate `replicate_id`.
    pub fn replicate_rng(&self, replicate_id: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replicate_id as u64);
        rng
    }
}

/// Row indices of one bootstrap replicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexPath {
    indices: Vec<usize>,
}

impl IndexPath {
    /// Wraps explicit indices; every index must lie in `[0, t)` and the
    /// path must have length `t`.
    pub fn new(indices: Vec<usize>, t: usize) -> Result<Self> {
        if indices.len() != t {
            return Err(Error::Dimension {
                expected: t,
                got: indices.len(),
            });
        }
        if let Some(bad) = indices.iter().find(|&&i| i >= t) {
            return Err(Error::Numeric(format!("index {bad} outside [0, {t})")));
        }
        Ok(Self { indices })
    }

    pub fn identity(t: usize) -> Self {
        Self {
            indices: (0..t).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// One-column CSV dump, header `index`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "index")?;
        for i in &self.indices {
            writeln!(writer, "{i}")?;
        }
        Ok(())
    }
}

/// Index path for replicate `replicate_id` of a series of length `t`.
pub fn generate_indices(spec: &BootstrapSpec, t: usize, replicate_id: usize) -> Result<IndexPath> {
    spec.validate(t)?;
    if replicate_id >= spec.count {
        return Err(Error::BootstrapSpec(format!(
            "replicate id {replicate_id} outside 0..{}",
            spec.count
        )));
    }
    let mut rng = spec.replicate_rng(replicate_id);
    let l = spec.block_length;
    let mut indices = Vec::with_capacity(t);
    match spec.method {
        BootstrapMethod::MovingBlock => {
            while indices.len() < t {
                let start = rng.random_range(0..=t - l);
                let take = l.min(t - indices.len());
                indices.extend(start..start + take);
            }
        }
        BootstrapMethod::CircularBlock => {
            while indices.len() < t {
                let start = rng.random_range(0..t);
                let take = l.min(t - indices.len());
                indices.extend((start..start + take).map(|i| i % t));
            }
        }
        BootstrapMethod::Stationary => {
            let restart = 1.0 / l as f64;
            let mut current = rng.random_range(0..t);
            indices.push(current);
            while indices.len() < t {
                current = if rng.random::<f64>() < restart {
                    rng.random_range(0..t)
                } else {
                    (current + 1) % t
                };
                indices.push(current);
            }
        }
    }
    Ok(IndexPath { indices })
}

/// All `spec.count` paths, generated in parallel.
pub fn generate_all(spec: &BootstrapSpec, t: usize) -> Result<Vec<IndexPath>> {
    spec.validate(t)?;
    (0..spec.count)
        .into_par_iter()
        .map(|i| generate_indices(spec, t, i))
        .collect()
}

/// Gathers rows of `returns` along `path`. Dates become synthetic labels.
pub fn materialize(returns: &ReturnPanel, path: &IndexPath) -> Result<ReturnPanel> {
    let t = returns.len();
    if path.len() != t {
        return Err(Error::Dimension {
            expected: t,
            got: path.len(),
        });
    }
    if let Some(bad) = path.indices.iter().find(|&&i| i >= t) {
        return Err(Error::Numeric(format!(
            "index path breaches its invariant: {bad} outside [0, {t})"
        )));
    }
    let src = returns.values();
    let values = DMatrix::from_fn(t, returns.n_assets(), |row, k| src[(path.indices[row], k)]);
    ReturnPanel::new(synthetic_dates(t), returns.assets().to_vec(), values)
}

/// Gathers a plain series along `path`.
pub fn materialize_series(series: &[f64], path: &IndexPath) -> Vec<f64> {
    path.indices.iter().map(|&i| series[i]).collect()
}

/// SplitMix64 finalizer; derives independent sub-seeds from a base seed and a tag.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(method: BootstrapMethod, l: usize) -> BootstrapSpec {
        BootstrapSpec::new(method, l, 8, 11)
    }

    #[test]
    fn default_block_length_is_cube_root_ceiling() {
        assert_eq!(default_block_length(1), 1);
        assert_eq!(default_block_length(8), 2);
        assert_eq!(default_block_length(9), 3);
        assert_eq!(default_block_length(27), 3);
        assert_eq!(default_block_length(1000), 10);
        assert_eq!(default_block_length(1001), 11);
    }

    #[test]
    fn full_length_moving_block_is_identity() {
        for id in 0..8 {
            let p = generate_indices(&spec(BootstrapMethod::MovingBlock, 20), 20, id).unwrap();
            assert_eq!(p, IndexPath::identity(20));
        }
    }

    #[test]
    fn paths_are_deterministic_per_replicate() {
        for m in [
            BootstrapMethod::MovingBlock,
            BootstrapMethod::CircularBlock,
            BootstrapMethod::Stationary,
        ] {
            let s = spec(m, 4);
            let a = generate_indices(&s, 50, 3).unwrap();
            let b = generate_indices(&s, 50, 3).unwrap();
            let c = generate_indices(&s, 50, 4).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn moving_blocks_are_runs_of_consecutive_indices() {
        let p = generate_indices(&spec(BootstrapMethod::MovingBlock, 5), 23, 0).unwrap();
        for block in p.indices().chunks(5) {
            assert!(block.windows(2).all(|w| w[1] == w[0] + 1));
            assert!(block[0] + 5 <= 23);
        }
    }

    #[test]
    fn circular_blocks_wrap() {
        let p = generate_indices(&spec(BootstrapMethod::CircularBlock, 6), 10, 1).unwrap();
        for block in p.indices().chunks(6) {
            assert!(block.windows(2).all(|w| w[1] == (w[0] + 1) % 10));
        }
    }

    #[test]
    fn spec_errors() {
        assert!(matches!(
            generate_indices(&spec(BootstrapMethod::MovingBlock, 11), 10, 0),
            Err(Error::BootstrapSpec(_))
        ));
        assert!(generate_indices(&spec(BootstrapMethod::CircularBlock, 11), 10, 0).is_ok());
        assert!(generate_indices(&spec(BootstrapMethod::Stationary, 0), 10, 0).is_err());
        assert!(generate_indices(&spec(BootstrapMethod::Stationary, 3), 10, 8).is_err());
    }

    fn three_rows() -> ReturnPanel {
        ReturnPanel::from_matrix(
            vec!["a".into(), "b".into()],
            DMatrix::from_row_slice(3, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0]),
        )
        .unwrap()
    }

    #[test]
    fn materialize_permutes_rows() {
        let r = three_rows();
        let out = materialize(&r, &IndexPath::new(vec![2, 0, 1], 3).unwrap()).unwrap();
        assert_eq!(
            out.values(),
            &DMatrix::from_row_slice(3, 2, &[3.0, 30.0, 1.0, 10.0, 2.0, 20.0])
        );
        assert_eq!(out.assets(), r.assets());
        assert_eq!(out.dates(), ["0", "1", "2"]);

        let same = materialize(&r, &IndexPath::identity(3)).unwrap();
        assert_eq!(same.values(), r.values());

        let flat = materialize(&r, &IndexPath::new(vec![1, 1, 1], 3).unwrap()).unwrap();
        assert!(flat.values().row_iter().all(|row| row[0] == 2.0 && row[1] == 20.0));
    }

    #[test]
    fn materialize_rejects_wrong_length() {
        assert!(materialize(&three_rows(), &IndexPath::identity(4)).is_err());
    }

    #[test]
    fn index_path_csv_dump() {
        let mut buf = Vec::new();
        IndexPath::new(vec![2, 0, 1], 3).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index\n2\n0\n1\n");
    }
}
