//! Synthetic regression datasets with a known informative feature set.
//!
//! Fifty features are drawn i.i.d. from U[0, 1). The target depends on ten of
//! them through a sum of elementary functions; the other forty are noise. The
//! biased variant destroys most of the signal in feature 20, the
//! multicollinear variant replaces five noise columns with noisy linear
//! combinations of informative and noise columns.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Matrix, TaskKind};
use crate::error::{Error, Result};
use crate::rng::{self, stream};

pub const SYNTH_FEATURES: usize = 50;

/// 1-based indices of the features the target depends on.
pub const INFORMATIVE: [usize; 10] = [27, 49, 31, 46, 14, 40, 18, 20, 26, 33];

/// 1-based indices of the columns rewritten by the multicollinear variant.
pub const COLLINEAR: [usize; 5] = [13, 5, 38, 9, 4];

/// `(target column, [(source column, weight); 4])`, all 1-based.
const COLLINEAR_RECIPES: [(usize, [(usize, f64); 4]); 5] = [
    (13, [(14, 0.1), (40, 0.2), (7, 0.3), (42, 0.4)]),
    (5, [(31, 0.4), (46, 0.2), (47, 0.3), (48, 0.1)]),
    (38, [(18, 0.1), (49, 0.3), (16, 0.2), (10, 0.4)]),
    (9, [(27, 0.4), (26, 0.3), (17, 0.2), (25, 0.1)]),
    (4, [(33, 0.2), (20, 0.4), (35, 0.1), (32, 0.3)]),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Direct,
    Biased,
    Multicollinear,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Variant::Direct),
            "biased" => Ok(Variant::Biased),
            "multicollinear" | "collinear" => Ok(Variant::Multicollinear),
            other => Err(Error::InvalidParameter(format!(
                "unknown variant '{other}' (expected direct, biased or multicollinear)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub seed: u64,
    pub variant: Variant,
    /// Standard deviation of the target noise.
    pub noise_sigma1: f64,
    /// Standard deviation of the noise added to the collinear columns.
    pub noise_sigma2: f64,
    pub bias_fraction: f64,
    pub bias_value: f64,
}

impl SyntheticSpec {
    pub fn new(n_samples: usize, seed: u64, variant: Variant) -> Self {
        Self {
            n_samples,
            seed,
            variant,
            noise_sigma1: 0.00001,
            noise_sigma2: 0.01,
            bias_fraction: 0.99,
            bias_value: -1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
        }
        if !(self.noise_sigma1 >= 0.0 && self.noise_sigma2 >= 0.0) {
            return Err(Error::InvalidParameter("noise sigmas must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.bias_fraction) {
            return Err(Error::InvalidParameter("bias_fraction must lie in [0, 1]".into()));
        }
        if !self.bias_value.is_finite() {
            return Err(Error::InvalidParameter("bias_value must be finite".into()));
        }
        Ok(())
    }
}

pub fn feature_name(one_based: usize) -> String {
    format!("feature-{one_based}")
}

/// Noise-free target for one row of 50 features.
pub fn target_function(x: &[f64]) -> f64 {
    let f = |i: usize| x[i - 1];
    5.0 * f(27).powi(3) + 4.0 * f(49).powi(2) + 5.0 * f(31) * f(46) + 2.0 * f(14) - 2.5 * f(40)
        + 3.5 * f(18).cbrt()
        + f(20).exp()
        + 2.0 * (3.14 * f(26)).sin()
        + 5.0 * (3.14 * f(33)).cos()
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DataMatrix> {
    spec.validate()?;
    let n = spec.n_samples;
    let p = SYNTH_FEATURES;

    let mut x_rng = rng::rng_from(spec.seed, &[stream::SYNTH_X]);
    let data: Vec<f64> = (0..n * p).map(|_| x_rng.random::<f64>()).collect();
    let mut values = Matrix::new(n, p, data)?;

    let eps1 = normal(spec.noise_sigma1)?;
    let mut noise_rng = rng::rng_from(spec.seed, &[stream::SYNTH_NOISE]);
    let target: Vec<f64> = (0..n)
        .map(|r| target_function(values.row(r)) + eps1.sample(&mut noise_rng))
        .collect();

    match spec.variant {
        Variant::Direct => {}
        Variant::Biased => {
            let count = (spec.bias_fraction * n as f64).floor() as usize;
            let mut bias_rng = rng::rng_from(spec.seed, &[stream::SYNTH_BIAS]);
            for r in index::sample(&mut bias_rng, n, count.min(n)) {
                values.set(r, 20 - 1, spec.bias_value);
            }
        }
        Variant::Multicollinear => {
            let eps2 = normal(spec.noise_sigma2)?;
            let mut col_rng = rng::rng_from(spec.seed, &[stream::SYNTH_COLLINEAR]);
            for r in 0..n {
                for (dest, sources) in COLLINEAR_RECIPES {
                    let v = sources.iter().map(|&(src, w)| w * values.get(r, src - 1)).sum::<f64>()
                        + eps2.sample(&mut col_rng);
                    values.set(r, dest - 1, v);
                }
            }
        }
    }

    let names = (1..=p).map(feature_name).collect();
    DataMatrix::new(values, target, names, TaskKind::Regression)
}

/// Uniform features with a smooth target on the first `min(p, 10)` columns.
/// Used by the scaling benchmark, where `p` varies.
pub fn generate_scaling(n: usize, p: usize, seed: u64) -> Result<DataMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("benchmark size must be positive".into()));
    }
    let mut x_rng = rng::rng_from(seed, &[stream::SYNTH_X]);
    let data: Vec<f64> = (0..n * p).map(|_| x_rng.random::<f64>()).collect();
    let values = Matrix::new(n, p, data)?;
    let informative = p.min(10);
    let target = (0..n)
        .map(|r| {
            let row = values.row(r);
            (0..informative).map(|j| (j + 1) as f64 * (3.14 * row[j]).sin()).sum()
        })
        .collect();
    let names = (1..=p).map(feature_name).collect();
    DataMatrix::new(values, target, names, TaskKind::Regression)
}
