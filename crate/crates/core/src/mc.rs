//! Monte Carlo MMSE through a regressogram estimate of `E[X | Y]`.
//!
//! The measurement range is split into equal-width bins per coordinate; the
//! sample mean of `X` inside a bin is the regression estimate for every
//! sample in it. Bins with fewer than `min_bin_count` samples are discarded
//! from both the numerator and the denominator. All accumulation runs in
//! sample-index order so that a fixed seed gives bit-identical output.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::mmse_exact;
use crate::numeric::{squared_distance, vector_key};
use crate::prob::{FiniteJoint, Sampler};

/// Largest supported measurement dimension for grid binning.
pub const MAX_GRID_DIM: usize = 3;

/// How the measurement space is partitioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// `⌈n^{1/3}⌉` equal-width bins per coordinate.
    CubeRoot,
    /// A fixed number of equal-width bins per coordinate.
    PerDimension(usize),
    /// One bin per distinct measurement value (for finite laws).
    Atoms,
}

impl Binning {
    pub fn bins_per_dimension(&self, n: usize) -> Option<usize> {
        match *self {
            Binning::CubeRoot => Some(ceil_cube_root(n)),
            Binning::PerDimension(b) => Some(b),
            Binning::Atoms => None,
        }
    }
}

fn ceil_cube_root(n: usize) -> usize {
    let mut b = (n as f64).cbrt().round() as usize;
    while b.saturating_pow(3) < n {
        b += 1;
    }
    while b > 1 && (b - 1).saturating_pow(3) >= n {
        b -= 1;
    }
    b.max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionConfig {
    pub binning: Binning,
    pub min_bin_count: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl RegressionConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self { binning: Binning::CubeRoot, min_bin_count: 5, n_samples, seed }
    }

    pub fn with_binning(mut self, binning: Binning) -> Self {
        self.binning = binning;
        self
    }

    pub fn with_min_bin_count(mut self, min_bin_count: usize) -> Self {
        self.min_bin_count = min_bin_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_bin_count == 0 {
            return Err(Error::InvalidConfig("min_bin_count must be at least 1".into()));
        }
        if self.binning == Binning::PerDimension(0) {
            return Err(Error::InvalidConfig("bin count must be at least 1".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McMmseEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_effective: usize,
    pub bins_retained: usize,
    /// Every measurement sample was identical; `value` is then the variance of `X`.
    pub degenerate_range: bool,
    pub config: RegressionConfig,
}

#[derive(Default, Clone)]
struct Bin {
    count: usize,
    sum: Vec<f64>,
}

/// Regressogram MMSE over an explicit sample set.
pub fn mc_mmse_samples(samples: &[(Vec<f64>, Vec<f64>)], config: &RegressionConfig) -> Result<McMmseEstimate> {
    config.validate()?;
    let Some((x0, y0)) = samples.first() else {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    };
    let (k, m) = (x0.len(), y0.len());
    if let Some(i) = samples.iter().position(|(x, y)| x.len() != k || y.len() != m) {
        return Err(Error::DimensionMismatch(format!("sample {i} has inconsistent dimensions")));
    }

    let mut degenerate_range = false;
    let bin_of: Vec<usize> = match config.binning.bins_per_dimension(samples.len()) {
        None => {
            let mut ids: HashMap<Vec<u64>, usize> = HashMap::new();
            samples
                .iter()
                .map(|(_, y)| {
                    let next = ids.len();
                    *ids.entry(vector_key(y)).or_insert(next)
                })
                .collect()
        }
        Some(bins) => {
            if m > MAX_GRID_DIM {
                return Err(Error::InvalidConfig(format!(
                    "grid binning supports at most {MAX_GRID_DIM} measurement dimensions, got {m}"
                )));
            }
            let mut lo = vec![f64::INFINITY; m];
            let mut hi = vec![f64::NEG_INFINITY; m];
            for (_, y) in samples {
                for d in 0..m {
                    lo[d] = lo[d].min(y[d]);
                    hi[d] = hi[d].max(y[d]);
                }
            }
            degenerate_range = (0..m).all(|d| hi[d] == lo[d]);
            let width: Vec<f64> = (0..m).map(|d| (hi[d] - lo[d]) / bins as f64).collect();
            let mut ids: HashMap<u64, usize> = HashMap::new();
            samples
                .iter()
                .map(|(_, y)| {
                    let mut flat: u64 = 0;
                    for d in 0..m {
                        let idx = if width[d] > 0.0 {
                            (((y[d] - lo[d]) / width[d]).floor() as usize).min(bins - 1)
                        } else {
                            0
                        };
                        flat = flat * bins as u64 + idx as u64;
                    }
                    let next = ids.len();
                    *ids.entry(flat).or_insert(next)
                })
                .collect()
        }
    };

    let n_bins = bin_of.iter().copied().max().map_or(0, |b| b + 1);
    let mut bins = vec![Bin { count: 0, sum: vec![0.0; k] }; n_bins];
    for ((x, _), &b) in samples.iter().zip(&bin_of) {
        let bin = &mut bins[b];
        bin.count += 1;
        for (s, v) in bin.sum.iter_mut().zip(x) {
            *s += v;
        }
    }
    let means: Vec<Option<Vec<f64>>> = bins
        .iter()
        .map(|b| (b.count >= config.min_bin_count).then(|| b.sum.iter().map(|s| s / b.count as f64).collect()))
        .collect();
    let bins_retained = means.iter().filter(|m| m.is_some()).count();

    let residuals: Vec<f64> = samples
        .iter()
        .zip(&bin_of)
        .filter_map(|((x, _), &b)| means[b].as_ref().map(|mean| squared_distance(x, mean)))
        .collect();
    if residuals.is_empty() {
        return Err(Error::InsufficientSamples { needed: config.min_bin_count, got: samples.len() });
    }
    let n_eff = residuals.len();
    let value = residuals.iter().sum::<f64>() / n_eff as f64;
    let std_error = if n_eff > 1 {
        let ss: f64 = residuals.iter().map(|r| (r - value) * (r - value)).sum();
        (ss / (n_eff - 1) as f64).sqrt() / (n_eff as f64).sqrt()
    } else {
        0.0
    };
    Ok(McMmseEstimate {
        value: value.max(0.0),
        std_error,
        n_effective: n_eff,
        bins_retained,
        degenerate_range,
        config: config.clone(),
    })
}

/// Draws `config.n_samples` pairs from `sampler` and estimates the MMSE.
pub fn mc_mmse(sampler: &Sampler, config: &RegressionConfig) -> Result<McMmseEstimate> {
    config.validate()?;
    mc_mmse_samples(&sampler.sample(config.n_samples, config.seed), config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McVsExact {
    pub mc: McMmseEstimate,
    pub exact: f64,
    pub z_score: f64,
}

/// Runs the regressogram on draws from a finite joint with one bin per
/// measurement atom and compares against the exact MMSE.
pub fn mc_mmse_vs_exact(joint: &FiniteJoint, config: &RegressionConfig) -> Result<McVsExact> {
    let config = config.clone().with_binning(Binning::Atoms);
    let mc = mc_mmse(&joint.sampler(), &config)?;
    let exact = mmse_exact(joint)?.mmse;
    let diff = mc.value - exact;
    let z_score = if mc.std_error > 0.0 {
        diff / mc.std_error
    } else if diff.abs() <= 1e-12 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(McVsExact { mc, exact, z_score })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws;
    use crate::prob::uniform;

    fn v(x: f64) -> Vec<f64> {
        vec![x]
    }

    #[test]
    fn cube_root_rule() {
        assert_eq!(ceil_cube_root(1), 1);
        assert_eq!(ceil_cube_root(8), 2);
        assert_eq!(ceil_cube_root(9), 3);
        assert_eq!(ceil_cube_root(1000), 10);
        assert_eq!(ceil_cube_root(100_000), 47);
    }

    #[test]
    fn config_validation() {
        assert!(RegressionConfig::new(10, 0).with_min_bin_count(0).validate().is_err());
        assert!(RegressionConfig::new(10, 0).with_binning(Binning::PerDimension(0)).validate().is_err());
        assert!(RegressionConfig::new(0, 0).validate().is_err());
    }

    #[test]
    fn perfect_continuous_measurement() {
        let s = Sampler::new("Y = X uniform", |rng| {
            let x = uniform(rng, 0.0, 1.0);
            (v(x), v(x))
        });
        let r = mc_mmse(&s, &RegressionConfig::new(100_000, 5)).unwrap();
        assert!(r.value <= 0.01, "{r:?}");
        assert!(r.n_effective <= 100_000);
    }

    #[test]
    fn rademacher_sum_sampled() {
        let r = mc_mmse(&laws::rademacher_sum().sampler(), &RegressionConfig::new(100_000, 11)).unwrap();
        assert!((r.value - 0.5).abs() <= 3.0 * r.std_error + 0.01, "{r:?}");
    }

    #[test]
    fn independent_uniforms() {
        let s = Sampler::new("independent uniforms", |rng| {
            (v(uniform(rng, 0.0, 1.0)), v(uniform(rng, 0.0, 1.0)))
        });
        let r = mc_mmse(&s, &RegressionConfig::new(100_000, 12)).unwrap();
        assert!((r.value - 1.0 / 12.0).abs() <= 3.0 * r.std_error + 0.01, "{r:?}");
    }

    #[test]
    fn degenerate_range_returns_variance() {
        let s = Sampler::new("constant Y", |rng| (v(uniform(rng, 0.0, 1.0)), v(3.0)));
        let r = mc_mmse(&s, &RegressionConfig::new(50_000, 1)).unwrap();
        assert!(r.degenerate_range);
        assert!((r.value - 1.0 / 12.0).abs() < 0.005);
    }

    #[test]
    fn no_retained_bin_is_an_error() {
        let samples = vec![(v(0.0), v(0.0)), (v(1.0), v(1.0))];
        let cfg = RegressionConfig::new(2, 0).with_binning(Binning::Atoms);
        assert!(matches!(mc_mmse_samples(&samples, &cfg), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn high_dimensional_grid_is_rejected() {
        let samples = vec![(v(0.0), vec![0.0; 4]); 10];
        assert!(matches!(
            mc_mmse_samples(&samples, &RegressionConfig::new(10, 0)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn single_atom_versus_exact() {
        let j = FiniteJoint::point_mass(v(1.5), v(2.0)).unwrap();
        let r = mc_mmse_vs_exact(&j, &RegressionConfig::new(1000, 3)).unwrap();
        assert_eq!(r.mc.value, 0.0);
        assert_eq!(r.exact, 0.0);
        assert_eq!(r.z_score, 0.0);
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let s = laws::bsc_joint(0.2).sampler();
        let cfg = RegressionConfig::new(20_000, 99);
        assert_eq!(mc_mmse(&s, &cfg).unwrap(), mc_mmse(&s, &cfg).unwrap());
    }
}
