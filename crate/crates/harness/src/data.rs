//! Synthetic data models.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use smoothtrim::NoiseSpec;

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum DataModel {
    Gaussian { mu: f64, variance: f64 },
    /// `mu + scale * L` for a standard Laplace `L` (variance `2 scale^2`).
    Laplace { mu: f64, scale: f64 },
    /// `N(mu, variance2)` with probability `weight`, else `N(mu, variance1)`.
    GaussianMixture { mu: f64, variance1: f64, variance2: f64, weight: f64 },
}

impl DataModel {
    pub fn standard_gaussian() -> Self {
        DataModel::Gaussian { mu: 0.0, variance: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Spec(m.to_string()));
        match *self {
            DataModel::Gaussian { mu, variance } => {
                if !mu.is_finite() || !(variance > 0.0 && variance.is_finite()) {
                    return bad("gaussian needs finite mu and positive variance");
                }
            }
            DataModel::Laplace { mu, scale } => {
                if !mu.is_finite() || !(scale > 0.0 && scale.is_finite()) {
                    return bad("laplace needs finite mu and positive scale");
                }
            }
            DataModel::GaussianMixture { mu, variance1, variance2, weight } => {
                if !mu.is_finite() || !(variance1 > 0.0) || !(variance2 > 0.0) {
                    return bad("mixture needs finite mu and positive variances");
                }
                if !(weight > 0.0 && weight < 1.0) {
                    return bad("mixture weight must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DataModel::Gaussian { mu, .. }
            | DataModel::Laplace { mu, .. }
            | DataModel::GaussianMixture { mu, .. } => mu,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DataModel::Gaussian { variance, .. } => variance,
            DataModel::Laplace { scale, .. } => 2.0 * scale * scale,
            DataModel::GaussianMixture { variance1, variance2, weight, .. } => {
                (1.0 - weight) * variance1 + weight * variance2
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DataModel::Gaussian { mu, variance } => {
                let g: f64 = rng.sample(StandardNormal);
                mu + variance.sqrt() * g
            }
            DataModel::Laplace { mu, scale } => mu + scale * NoiseSpec::laplace().sample(rng),
            DataModel::GaussianMixture { mu, variance1, variance2, weight } => {
                let second = rng.random::<f64>() < weight;
                let g: f64 = rng.sample(StandardNormal);
                mu + if second { variance2 } else { variance1 }.sqrt() * g
            }
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Reads numeric values from a CSV or whitespace-free list file: every
/// field of every record is a value. A first record that does not parse is
/// taken as a header and skipped.
pub fn read_values(path: &std::path::Path) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| HarnessError::Csv { path: path.to_path_buf(), source })?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().filter(|f| !f.is_empty()).map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => out.extend(v),
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(HarnessError::Parse { path: path.to_path_buf(), message: format!("record {}: {e}", i + 1) })
            }
        }
    }
    if out.is_empty() {
        return Err(HarnessError::Parse { path: path.to_path_buf(), message: "no values".into() });
    }
    Ok(out)
}
