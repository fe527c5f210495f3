//! The private trimmed-mean release `trim + (S_t / s) Z`.

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::accounting::PrivacyBudget;
use crate::calibration::paired_budget;
use crate::distributions::{CostOptions, DistortionPair, NoiseSpec};
use crate::error::bail;
use crate::sensitivity::{
    smooth_sensitivity_input_trunc, smooth_sensitivity_output_trunc, trimmed_mean, SortedDataset,
    TrimSpec, TruncationMode,
};
use crate::Result;

/// A release configuration whose noise is certified to meet `budget`.
/// The constructor refuses configurations that do not.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MechanismConfig {
    noise: NoiseSpec,
    trim: TrimSpec,
    t: f64,
    s: f64,
    budget: PrivacyBudget,
    cost_options: CostOptions,
    clamp_release: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReleaseRecord {
    pub estimate: f64,
    pub noise_draw: f64,
    pub smooth_sens: f64,
    pub seed: u64,
}

impl MechanismConfig {
    pub fn new(
        noise: NoiseSpec,
        trim: TrimSpec,
        t: f64,
        s: f64,
        budget: PrivacyBudget,
        cost_options: CostOptions,
    ) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            bail!(PrivacyContract, "t must be finite and nonnegative, got {t}");
        }
        if !(s > 0.0 && s.is_finite()) {
            bail!(PrivacyContract, "s must be positive and finite, got {s}");
        }
        let cost = noise
            .privacy_cost(DistortionPair::new(t, s), &cost_options)
            .map_err(|e| crate::Error::PrivacyContract(alloc::format!("{e}")))?;
        if !cost.satisfies(&budget) {
            bail!(PrivacyContract, "certified {cost:?} does not meet declared {budget:?}");
        }
        Ok(Self { noise, trim, t, s, budget, cost_options, clamp_release: false })
    }

    /// Largest admissible `s` for `noise` at `t` under the budget paired
    /// with `epsilon` for the noise family.
    pub fn calibrated(
        noise: NoiseSpec,
        trim: TrimSpec,
        t: f64,
        epsilon: f64,
        cost_options: CostOptions,
    ) -> Result<Self> {
        let s = noise.calibrate_scale(t, epsilon, &cost_options)?;
        let budget = paired_budget(noise.family(), epsilon, &cost_options)?;
        Self::new(noise, trim, t, s, budget, cost_options)
    }

    /// Clamp the noised release to `[a, b]`. Postprocessing, so privacy is
    /// unaffected, but the error distribution changes; off by default.
    pub fn with_clamped_release(mut self, clamp: bool) -> Self {
        self.clamp_release = clamp;
        self
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }
    pub fn trim(&self) -> TrimSpec {
        self.trim
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn budget(&self) -> PrivacyBudget {
        self.budget
    }

    /// The non-private point estimate and the smooth sensitivity (or its
    /// certified bound in output mode) used to scale the noise.
    pub fn point_and_sensitivity(&self, x: &[f64]) -> Result<(f64, f64)> {
        let raw = SortedDataset::from_slice(x)?;
        let (a, b, m) = (self.trim.a(), self.trim.b(), self.trim.m());
        match self.trim.mode() {
            TruncationMode::Input => {
                let clamped = raw.truncated(a, b);
                let sens = smooth_sensitivity_input_trunc(&clamped, &self.trim, self.t)?.smooth;
                Ok((trimmed_mean(&clamped, m)?, sens))
            }
            TruncationMode::Output => {
                let sens = smooth_sensitivity_output_trunc(&raw, &self.trim, self.t)?;
                Ok((trimmed_mean(&raw, m)?.clamp(a, b), sens))
            }
        }
    }

    pub fn release_with_rng<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<(f64, f64, f64)> {
        let (point, sens) = self.point_and_sensitivity(x)?;
        let z = self.noise.sample(rng);
        let mut estimate = point + sens / self.s * z;
        if self.clamp_release {
            estimate = estimate.clamp(self.trim.a(), self.trim.b());
        }
        Ok((estimate, z, sens))
    }

    /// One release, reproducible from `seed`.
    pub fn release(&self, x: &[f64], seed: u64) -> Result<ReleaseRecord> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (estimate, noise_draw, smooth_sens) = self.release_with_rng(x, &mut rng)?;
        Ok(ReleaseRecord { estimate, noise_draw, smooth_sens, seed })
    }
}

/// Standard deviation of the Gaussian noise for the global-sensitivity
/// baseline: sensitivity `(b - a)/n` at `eps^2/2`-CDP.
pub fn global_sensitivity_noise_sd(n: usize, a: f64, b: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) || n == 0 || !(a < b) {
        bail!(InvalidParameter, "need eps > 0, n >= 1, a < b");
    }
    Ok((b - a) / (n as f64 * epsilon))
}

/// Mean of the `[a, b]`-clamped data plus Gaussian noise at `eps^2/2`-CDP.
pub fn global_sensitivity_baseline<R: Rng + ?Sized>(
    x: &[f64],
    a: f64,
    b: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<f64> {
    let sd = global_sensitivity_noise_sd(x.len(), a, b, epsilon)?;
    let mean = x.iter().map(|v| v.clamp(a, b)).sum::<f64>() / x.len() as f64;
    let g: f64 = rng.sample(StandardNormal);
    Ok(mean + sd * g)
}
