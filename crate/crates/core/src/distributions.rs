//! Noise distributions that can be scaled to smooth sensitivity.
//!
//! Each [`NoiseSpec`] knows how to sample, evaluate its log density, and
//! report the privacy budget certified for a distortion `(t, s)`, meaning
//! the divergence between `Z` and `e^t Z + s`.

#[allow(unused_imports)]
use num_traits::Float;
use rand::distr::{Open01, StandardUniform};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::accounting::PrivacyBudget;
use crate::error::bail;
use crate::math::{self, LN_2, LN_SQRT_2PI};
use crate::quadrature::{self, Tolerance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NoiseFamily {
    /// Standard Laplace times `exp(sigma * N(0,1))`.
    LaplaceLogNormal,
    /// Uniform on `[-1, 1]` times `exp(sigma * N(0,1))`.
    UniformLogNormal,
    /// `sinh(sigma * N(0,1)) / sigma`.
    ArsinhNormal,
    StudentT,
    Laplace,
    Gaussian,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 6] = [
        NoiseFamily::LaplaceLogNormal,
        NoiseFamily::UniformLogNormal,
        NoiseFamily::ArsinhNormal,
        NoiseFamily::StudentT,
        NoiseFamily::Laplace,
        NoiseFamily::Gaussian,
    ];

    pub fn has_shape(self) -> bool {
        !matches!(self, NoiseFamily::Laplace | NoiseFamily::Gaussian)
    }

    /// Families whose certificate is a concentrated-DP bound for all orders.
    pub fn is_concentrated(self) -> bool {
        matches!(
            self,
            NoiseFamily::LaplaceLogNormal
                | NoiseFamily::UniformLogNormal
                | NoiseFamily::ArsinhNormal
                | NoiseFamily::StudentT
        )
    }
}

/// The multiplicative (`t`) and additive (`s`) distortion applied to the noise.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistortionPair {
    pub t: f64,
    pub s: f64,
}

impl DistortionPair {
    pub fn new(t: f64, s: f64) -> Self {
        Self { t, s }
    }
}

/// Side parameters for the relaxed guarantees (Laplace and Gaussian).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostOptions {
    pub delta: f64,
    pub omega: f64,
}

impl Default for CostOptions {
    fn default() -> Self {
        Self { delta: 1e-6, omega: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseSpec {
    family: NoiseFamily,
    shape: f64,
}

impl NoiseSpec {
    /// `shape` is sigma for the log-normal and arsinh families, the degrees of
    /// freedom for Student's T, and ignored for Laplace and Gaussian.
    pub fn new(family: NoiseFamily, shape: f64) -> Result<Self> {
        if family.has_shape() {
            if !(shape.is_finite() && shape > 0.0) {
                bail!(InvalidParameter, "{family:?} shape must be positive and finite, got {shape}");
            }
            Ok(Self { family, shape })
        } else {
            Ok(Self { family, shape: 1.0 })
        }
    }

    pub fn laplace_log_normal(sigma: f64) -> Result<Self> {
        Self::new(NoiseFamily::LaplaceLogNormal, sigma)
    }
    pub fn uniform_log_normal(sigma: f64) -> Result<Self> {
        Self::new(NoiseFamily::UniformLogNormal, sigma)
    }
    pub fn arsinh_normal(sigma: f64) -> Result<Self> {
        Self::new(NoiseFamily::ArsinhNormal, sigma)
    }
    pub fn student_t(d: f64) -> Result<Self> {
        Self::new(NoiseFamily::StudentT, d)
    }
    pub fn laplace() -> Self {
        Self { family: NoiseFamily::Laplace, shape: 1.0 }
    }
    pub fn gaussian() -> Self {
        Self { family: NoiseFamily::Gaussian, shape: 1.0 }
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    /// `None` for the shapeless families.
    pub fn shape(&self) -> Option<f64> {
        self.family.has_shape().then_some(self.shape)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sigma = self.shape;
        match self.family {
            NoiseFamily::LaplaceLogNormal => {
                let y: f64 = rng.sample(StandardNormal);
                sample_laplace(rng) * (sigma * y).exp()
            }
            NoiseFamily::UniformLogNormal => {
                let u: f64 = rng.sample(StandardUniform);
                let y: f64 = rng.sample(StandardNormal);
                (2.0 * u - 1.0) * (sigma * y).exp()
            }
            NoiseFamily::ArsinhNormal => {
                let y: f64 = rng.sample(StandardNormal);
                (sigma * y).sinh() / sigma
            }
            NoiseFamily::StudentT => {
                let d = self.shape;
                let num: f64 = rng.sample(StandardNormal);
                let chi2 = if d.fract() == 0.0 && d <= 64.0 {
                    (0..d as usize)
                        .map(|_| {
                            let g: f64 = rng.sample(StandardNormal);
                            g * g
                        })
                        .sum::<f64>()
                } else {
                    ChiSquared::new(d).expect("d > 0").sample(rng)
                };
                num / (chi2 / d).sqrt()
            }
            NoiseFamily::Laplace => sample_laplace(rng),
            NoiseFamily::Gaussian => rng.sample(StandardNormal),
        }
    }

    pub fn variance(&self) -> Result<f64> {
        let sigma = self.shape;
        Ok(match self.family {
            NoiseFamily::LaplaceLogNormal => 2.0 * (2.0 * sigma * sigma).exp(),
            NoiseFamily::UniformLogNormal => (2.0 * sigma * sigma).exp() / 3.0,
            NoiseFamily::ArsinhNormal => (2.0 * sigma * sigma).exp_m1() / (2.0 * sigma * sigma),
            NoiseFamily::StudentT => {
                let d = self.shape;
                if d <= 2.0 {
                    return Err(Error::InfiniteVariance { degrees_of_freedom: d });
                }
                d / (d - 2.0)
            }
            NoiseFamily::Laplace => 2.0,
            NoiseFamily::Gaussian => 1.0,
        })
    }

    /// `E|Z|^p` where a closed form exists.
    pub fn abs_moment(&self, p: f64) -> Result<f64> {
        if !(p.is_finite() && p >= 0.0) {
            bail!(InvalidParameter, "moment order must be finite and nonnegative, got {p}");
        }
        let sigma = self.shape;
        Ok(match self.family {
            NoiseFamily::LaplaceLogNormal => {
                math::ln_gamma(p + 1.0).exp() * (0.5 * sigma * sigma * p * p).exp()
            }
            NoiseFamily::UniformLogNormal => (0.5 * sigma * sigma * p * p).exp() / (p + 1.0),
            NoiseFamily::Laplace => math::ln_gamma(p + 1.0).exp(),
            NoiseFamily::Gaussian => {
                (0.5 * p * LN_2 + math::ln_gamma(0.5 * (p + 1.0))).exp()
                    / core::f64::consts::PI.sqrt()
            }
            NoiseFamily::StudentT => {
                let d = self.shape;
                if p >= d {
                    return Ok(f64::INFINITY);
                }
                (0.5 * p * d.ln() + math::ln_gamma(0.5 * (p + 1.0)) + math::ln_gamma(0.5 * (d - p))
                    - math::ln_gamma(0.5 * d))
                    .exp()
                    / core::f64::consts::PI.sqrt()
            }
            NoiseFamily::ArsinhNormal => {
                bail!(InvalidParameter, "no closed-form absolute moment for ArsinhNormal")
            }
        })
    }

    /// Natural log of the density at `z`. Exactly symmetric in `z`.
    pub fn log_density(&self, z: f64) -> f64 {
        let x = z.abs();
        let sigma = self.shape;
        match self.family {
            NoiseFamily::LaplaceLogNormal => lln_log_density(sigma, x),
            NoiseFamily::UniformLogNormal => {
                if x == 0.0 {
                    0.5 * sigma * sigma - LN_2
                } else {
                    0.5 * sigma * sigma - LN_2 + math::ln_normal_sf(sigma + x.ln() / sigma)
                }
            }
            NoiseFamily::ArsinhNormal => {
                let u = sigma * x;
                let a = u.asinh();
                -LN_SQRT_2PI - a * a / (2.0 * sigma * sigma) - 0.5 * (u * u).ln_1p()
            }
            NoiseFamily::StudentT => {
                let d = self.shape;
                math::ln_gamma(0.5 * (d + 1.0))
                    - math::ln_gamma(0.5 * d)
                    - 0.5 * (core::f64::consts::PI * d).ln()
                    - 0.5 * (d + 1.0) * (x * x / d).ln_1p()
            }
            NoiseFamily::Laplace => -LN_2 - x,
            NoiseFamily::Gaussian => -LN_SQRT_2PI - 0.5 * x * x,
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        self.log_density(z).exp()
    }

    /// The family's native privacy parameter for distortion `d`.
    ///
    /// For the concentrated families this is the `eps` of a `eps^2/2`-CDP
    /// guarantee, for Student's T the pure-DP `eps`, for Laplace the
    /// approximate-DP `eps` at `opts.delta`, and for Gaussian `sqrt(2 rho)`
    /// of the truncated-CDP `rho` at `opts.omega`.
    pub fn certified_epsilon(&self, d: DistortionPair, opts: &CostOptions) -> Result<f64> {
        check_distortion(d)?;
        let (t, s) = (d.t.abs(), d.s.abs());
        match self.family {
            NoiseFamily::Gaussian => Ok((2.0 * gaussian_tcdp_rho(t, s, opts.omega)?).sqrt()),
            _ => {
                let (base, slope) = self.affine_cost(t, opts)?;
                Ok(base + slope * s)
            }
        }
    }

    /// The tightest budget certified for noise distorted by `d`.
    pub fn privacy_cost(&self, d: DistortionPair, opts: &CostOptions) -> Result<PrivacyBudget> {
        let eps = self.certified_epsilon(d, opts)?;
        Ok(match self.family {
            NoiseFamily::LaplaceLogNormal
            | NoiseFamily::UniformLogNormal
            | NoiseFamily::ArsinhNormal => PrivacyBudget::Cdp { rho: 0.5 * eps * eps },
            NoiseFamily::StudentT => PrivacyBudget::PureDp { epsilon: eps },
            NoiseFamily::Laplace => PrivacyBudget::ApproxDp { epsilon: eps, delta: opts.delta },
            NoiseFamily::Gaussian => PrivacyBudget::TCdp { rho: 0.5 * eps * eps, omega: opts.omega },
        })
    }

    /// Largest `s` with `certified_epsilon((t, s)) <= target_epsilon`.
    pub fn calibrate_scale(&self, t: f64, target_epsilon: f64, opts: &CostOptions) -> Result<f64> {
        if !(target_epsilon.is_finite() && target_epsilon > 0.0) {
            bail!(InvalidParameter, "target epsilon must be positive, got {target_epsilon}");
        }
        check_distortion(DistortionPair::new(t, 0.0))?;
        let t = t.abs();
        let base = self.certified_epsilon(DistortionPair::new(t, 0.0), opts)?;
        if base >= target_epsilon {
            bail!(
                Infeasible,
                "{:?} at t = {t} already costs {base} >= {target_epsilon} with s = 0",
                self.family
            );
        }
        match self.family {
            NoiseFamily::Gaussian => {
                let eps_at = |s: f64| {
                    (2.0 * gaussian_tcdp_rho(t, s, opts.omega).expect("checked above")).sqrt()
                };
                let mut hi = target_epsilon.max(1.0);
                while eps_at(hi) < target_epsilon {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                loop {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if eps_at(mid) <= target_epsilon {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(lo)
            }
            _ => {
                let (_, slope) = self.affine_cost(t, opts)?;
                Ok((target_epsilon - base) / slope)
            }
        }
    }

    /// `(eps at s = 0, d eps / d|s|)` for the families whose bound is affine
    /// in `|s|`. `t` must already be nonnegative.
    fn affine_cost(&self, t: f64, opts: &CostOptions) -> Result<(f64, f64)> {
        let sigma = self.shape;
        Ok(match self.family {
            NoiseFamily::LaplaceLogNormal => (t / sigma, (1.5 * sigma * sigma).exp()),
            NoiseFamily::UniformLogNormal => {
                if sigma < core::f64::consts::SQRT_2 {
                    bail!(Calibration, "UniformLogNormal needs sigma >= sqrt(2), got {sigma}");
                }
                let slope = (1.5 * sigma * sigma).exp()
                    * (2.0 / (core::f64::consts::PI * sigma * sigma)).sqrt();
                (t / sigma, slope)
            }
            NoiseFamily::ArsinhNormal => (
                (t * (t / (sigma * sigma) + 1.0 / sigma + 2.0)).sqrt(),
                2.0 / (3.0 * sigma) + 0.5 * sigma,
            ),
            NoiseFamily::StudentT => {
                let d = self.shape;
                (t * (d + 1.0), (d + 1.0) / (2.0 * d.sqrt()))
            }
            NoiseFamily::Laplace => {
                let delta = opts.delta;
                if !(delta > 0.0 && delta < (-2.0f64).exp()) {
                    bail!(Calibration, "Laplace needs delta in (0, e^-2), got {delta}");
                }
                (t.exp_m1() * (1.0 / delta).ln() - t, 1.0)
            }
            NoiseFamily::Gaussian => unreachable!("Gaussian cost is not affine in s"),
        })
    }
}

/// Simplified ArsinhNormal bound for `sigma = 2/sqrt(3)` and `|t| <= 1/2`.
pub fn arsinh_normal_simplified_epsilon(d: DistortionPair) -> Result<f64> {
    check_distortion(d)?;
    if d.t.abs() > 0.5 {
        bail!(Calibration, "simplified ArsinhNormal bound needs |t| <= 1/2, got {}", d.t);
    }
    Ok(1.81 * d.t.abs().sqrt() + 1.16 * d.s.abs())
}

/// The shape used for ArsinhNormal in the comparison experiments.
pub fn arsinh_normal_default_sigma() -> f64 {
    2.0 / 3.0f64.sqrt()
}

fn check_distortion(d: DistortionPair) -> Result<()> {
    if !(d.t.is_finite() && d.s.is_finite()) {
        bail!(InvalidParameter, "distortion must be finite, got t = {}, s = {}", d.t, d.s);
    }
    Ok(())
}

/// Truncated-CDP `rho` for Gaussian noise distorted by `(t, s)`, `t >= 0`,
/// treating both signs of `t` and both divergence directions.
///
/// The worst case is the reverse direction with the smaller variance on the
/// right, which binds the admissible orders to `omega < 1 / (1 - e^{-2t})`.
/// The bound is decreasing in the free parameter, so the supremum over
/// orders sits at the admissible endpoint.
pub(crate) fn gaussian_tcdp_rho(t: f64, s: f64, omega: f64) -> Result<f64> {
    if !(omega > 1.0) {
        bail!(Calibration, "Gaussian needs omega > 1, got {omega}");
    }
    let shrink = -(-2.0 * t).exp_m1();
    let gamma = 1.0 - omega * shrink;
    if !(gamma > 0.0) {
        bail!(
            Calibration,
            "Gaussian needs omega < 1/(1 - e^(-2t)) = {}, got omega = {omega} at t = {t}",
            1.0 / shrink
        );
    }
    Ok(s * s / (2.0 * gamma) + t * t / (gamma * gamma))
}

fn sample_laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    if u < 0.5 {
        (2.0 * u).ln()
    } else {
        -(2.0 * (1.0 - u)).ln()
    }
}

/// Log density of the Laplace log-normal at `x >= 0`.
///
/// `f(x) = e^{sigma^2/2}/2 * E[exp(-x e^{sigma^2} e^{sigma Y})]`. The
/// integrand over `y` is log-concave with a peak at `y* = -W(c sigma^2)/sigma`
/// (`c = x e^{sigma^2}`); we factor out the peak value and integrate the
/// remaining bounded bump adaptively, which stays accurate for any `x`.
fn lln_log_density(sigma: f64, x: f64) -> f64 {
    let s2 = sigma * sigma;
    let (w, peak) = if x == 0.0 {
        (0.0, 0.0)
    } else {
        let w = math::lambert_w0_from_ln(x.ln() + s2 + 2.0 * sigma.ln());
        let y = -w / sigma;
        (w, -0.5 * y * y + y / sigma)
    };
    let k = w / s2;
    // rel(u) <= -u^2/2, so a half-width of 14 loses under e^-98.
    let rel = |u: f64| {
        let q = -0.5 * u * u;
        if k == 0.0 {
            q.exp()
        } else {
            let v = sigma * u;
            (q - k * (v.exp_m1() - v)).exp()
        }
    };
    let width = 1.0 / (1.0 + w).sqrt();
    let breaks = [-4.0 * width, -width, 0.0, width, 4.0 * width];
    let tol = Tolerance { abs: 0.0, rel: 1e-13, max_intervals: 500 };
    let integral = quadrature::integrate(rel, -14.0, 14.0, &breaks, tol).value;
    0.5 * s2 - LN_2 - LN_SQRT_2PI + peak + integral.ln()
}
