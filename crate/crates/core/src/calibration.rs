//! Choosing free parameters: the LLN shape, the noise scale, and `t`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::accounting::PrivacyBudget;
use crate::distributions::{arsinh_normal_default_sigma, CostOptions, NoiseFamily, NoiseSpec};
use crate::error::bail;
use crate::{Error, Result};

/// `(5 eps / t) sigma^3 - 5 sigma^2 - 1`, evaluated as
/// `sigma^2 (5 eps sigma / t - 5) - 1` to limit cancellation near the root.
pub fn lln_sigma_cubic(epsilon: f64, t: f64, sigma: f64) -> f64 {
    sigma * sigma * (5.0 * epsilon * sigma / t - 5.0) - 1.0
}

/// Noise variance per unit sensitivity for LLN at its calibrated scale,
/// `2 e^{5 sigma^2} / (eps - t/sigma)^2`. Infinite when `eps sigma <= t`.
pub fn lln_variance_objective(epsilon: f64, t: f64, sigma: f64) -> f64 {
    let gap = epsilon - t / sigma;
    if !(gap > 0.0) {
        return f64::INFINITY;
    }
    2.0 * (5.0 * sigma * sigma).exp() / (gap * gap)
}

/// The LLN shape minimizing [`lln_variance_objective`]: the unique positive
/// root of the cubic, bracketed by `t/eps` (negative) and
/// `max(2t/eps, 1/2)` (positive).
pub fn optimize_lln_sigma(epsilon: f64, t: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite() && t > 0.0 && t.is_finite()) {
        bail!(InvalidParameter, "need eps > 0 and t > 0, got eps = {epsilon}, t = {t}");
    }
    let mut lo = t / epsilon;
    let mut hi = (2.0 * t / epsilon).max(0.5);
    if !(lln_sigma_cubic(epsilon, t, lo) < 0.0 && lln_sigma_cubic(epsilon, t, hi) > 0.0) {
        bail!(Calibration, "cubic bracket failed for eps = {epsilon}, t = {t}");
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lln_sigma_cubic(epsilon, t, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // lo keeps eps sigma > t strictly; take hi only if it is closer.
    let (rl, rh) = (lln_sigma_cubic(epsilon, t, lo).abs(), lln_sigma_cubic(epsilon, t, hi).abs());
    Ok(if rh < rl { hi } else { lo })
}

/// The budget each family is held to when comparing at a common `eps`:
/// pure DP for Student's T, `eps^2/2`-CDP for the log-normal and arsinh
/// families, `(eps^2/2, omega)`-tCDP for Gaussian, `(eps, delta)`-DP for
/// Laplace.
pub fn paired_budget(family: NoiseFamily, epsilon: f64, opts: &CostOptions) -> Result<PrivacyBudget> {
    match family {
        NoiseFamily::StudentT => PrivacyBudget::pure(epsilon),
        NoiseFamily::LaplaceLogNormal | NoiseFamily::UniformLogNormal | NoiseFamily::ArsinhNormal => {
            PrivacyBudget::cdp(0.5 * epsilon * epsilon)
        }
        NoiseFamily::Gaussian => PrivacyBudget::tcdp(0.5 * epsilon * epsilon, opts.omega),
        NoiseFamily::Laplace => PrivacyBudget::approx(epsilon, opts.delta),
    }
}

/// The noise used for `family` at `(eps, t)`: LLN's sigma is optimized,
/// ULN uses `sqrt 2`, ArsinhNormal `2/sqrt 3`, Student's T three degrees of
/// freedom.
pub fn default_noise(family: NoiseFamily, epsilon: f64, t: f64) -> Result<NoiseSpec> {
    match family {
        NoiseFamily::LaplaceLogNormal => NoiseSpec::laplace_log_normal(optimize_lln_sigma(epsilon, t)?),
        NoiseFamily::UniformLogNormal => NoiseSpec::uniform_log_normal(core::f64::consts::SQRT_2),
        NoiseFamily::ArsinhNormal => NoiseSpec::arsinh_normal(arsinh_normal_default_sigma()),
        NoiseFamily::StudentT => NoiseSpec::student_t(3.0),
        NoiseFamily::Laplace => Ok(NoiseSpec::laplace()),
        NoiseFamily::Gaussian => Ok(NoiseSpec::gaussian()),
    }
}

/// Log-spaced smoothing grid with both endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for TGrid {
    fn default() -> Self {
        Self { min: 1e-9, max: 9.0, count: 150 }
    }
}

impl TGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        let g = Self { min, max, count };
        g.validate()?;
        Ok(g)
    }

    pub fn single(t: f64) -> Result<Self> {
        Self::new(t, t, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) || self.count == 0 {
            bail!(
                InvalidParameter,
                "t-grid needs 0 < min <= max and count >= 1, got [{}, {}] x {}",
                self.min,
                self.max,
                self.count
            );
        }
        if self.count > 1 && self.max == self.min {
            bail!(InvalidParameter, "t-grid with several points needs min < max");
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        crate::math::logspace(self.min, self.max, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationProblem {
    pub epsilon: f64,
    pub family: NoiseFamily,
    pub grid: TGrid,
    pub cost_options: CostOptions,
}

/// Noise spec and scale for one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibratedNoise {
    pub t: f64,
    pub s: f64,
    pub noise: NoiseSpec,
}

impl CalibratedNoise {
    /// `Var(Z) / s^2`: noise variance per unit of squared smooth sensitivity.
    pub fn variance_factor(&self) -> Result<f64> {
        Ok(self.noise.variance()? / (self.s * self.s))
    }
}

impl CalibrationProblem {
    pub fn new(epsilon: f64, family: NoiseFamily, grid: TGrid, cost_options: CostOptions) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            bail!(InvalidParameter, "epsilon must be positive, got {epsilon}");
        }
        grid.validate()?;
        Ok(Self { epsilon, family, grid, cost_options })
    }

    pub fn at(&self, t: f64) -> Result<CalibratedNoise> {
        let noise = default_noise(self.family, self.epsilon, t)?;
        let s = noise.calibrate_scale(t, self.epsilon, &self.cost_options)?;
        Ok(CalibratedNoise { t, s, noise })
    }

    /// Calibration at every grid point; infeasible points are `Err`.
    pub fn calibrate_grid(&self) -> Vec<Result<CalibratedNoise>> {
        self.grid.points().into_iter().map(|t| self.at(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridChoice {
    pub index: usize,
    pub point: CalibratedNoise,
    pub objective: f64,
}

/// Minimizes `objective` over the feasible grid points. Ties go to the
/// lowest index, so the result does not depend on evaluation order.
pub fn grid_search<F>(problem: &CalibrationProblem, mut objective: F) -> Result<GridChoice>
where
    F: FnMut(&CalibratedNoise) -> f64,
{
    let mut best: Option<GridChoice> = None;
    for (index, point) in problem.calibrate_grid().into_iter().enumerate() {
        let Ok(point) = point else { continue };
        let value = objective(&point);
        if value.is_nan() {
            continue;
        }
        if best.is_none_or(|b| value < b.objective) {
            best = Some(GridChoice { index, point, objective: value });
        }
    }
    best.ok_or_else(|| {
        Error::Infeasible(alloc::format!(
            "no t in the grid is feasible for {:?} at eps = {}",
            problem.family,
            problem.epsilon
        ))
    })
}
