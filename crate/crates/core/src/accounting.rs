//! Privacy budgets and the conversions between them.
//!
//! Conversions are explicit functions; nothing here silently re-expresses a
//! guarantee under a different definition.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::bail;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind"))]
pub enum PrivacyBudget {
    PureDp { epsilon: f64 },
    Cdp { rho: f64 },
    /// Truncated CDP: `D_alpha / alpha <= rho` for `alpha in (1, omega)`.
    TCdp { rho: f64, omega: f64 },
    ApproxDp { epsilon: f64, delta: f64 },
}

/// Relative slack used by [`PrivacyBudget::satisfies`], so a budget
/// recomputed from a calibrated scale is not rejected over rounding.
pub const BUDGET_RELATIVE_SLACK: f64 = 1e-12;

fn within(actual: f64, limit: f64) -> bool {
    actual <= limit * (1.0 + BUDGET_RELATIVE_SLACK)
}

impl PrivacyBudget {
    pub fn pure(epsilon: f64) -> Result<Self> {
        check_nonneg("epsilon", epsilon)?;
        Ok(Self::PureDp { epsilon })
    }

    pub fn cdp(rho: f64) -> Result<Self> {
        check_nonneg("rho", rho)?;
        Ok(Self::Cdp { rho })
    }

    pub fn tcdp(rho: f64, omega: f64) -> Result<Self> {
        check_nonneg("rho", rho)?;
        if !(omega > 1.0) {
            bail!(InvalidParameter, "omega must exceed 1, got {omega}");
        }
        Ok(Self::TCdp { rho, omega })
    }

    pub fn approx(epsilon: f64, delta: f64) -> Result<Self> {
        check_nonneg("epsilon", epsilon)?;
        if !(0.0..1.0).contains(&delta) {
            bail!(InvalidParameter, "delta must lie in [0, 1), got {delta}");
        }
        Ok(Self::ApproxDp { epsilon, delta })
    }

    /// Whether holding `self` implies `claim`, using only the conversions
    /// this module implements.
    pub fn satisfies(&self, claim: &PrivacyBudget) -> bool {
        use PrivacyBudget::*;
        match (*self, *claim) {
            (PureDp { epsilon }, PureDp { epsilon: e }) => within(epsilon, e),
            (PureDp { epsilon }, Cdp { rho } | TCdp { rho, .. }) => within(0.5 * epsilon * epsilon, rho),
            (PureDp { epsilon }, ApproxDp { epsilon: e, delta }) => {
                within(epsilon, e)
                    || (delta > 0.0
                        && cdp_to_approx(0.5 * epsilon * epsilon, delta).is_ok_and(|x| within(x, e)))
            }
            (Cdp { rho }, Cdp { rho: r } | TCdp { rho: r, .. }) => within(rho, r),
            (Cdp { rho }, ApproxDp { epsilon, delta }) => {
                delta > 0.0 && cdp_to_approx(rho, delta).is_ok_and(|x| within(x, epsilon))
            }
            (TCdp { rho, omega }, TCdp { rho: r, omega: w }) => within(rho, r) && omega >= w,
            (ApproxDp { epsilon, delta }, ApproxDp { epsilon: e, delta: d }) => {
                within(epsilon, e) && delta <= d
            }
            _ => false,
        }
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        bail!(InvalidParameter, "{name} must be finite and nonnegative, got {v}");
    }
    Ok(())
}

/// `eps`-DP implies `eps^2/2`-CDP. Returns `rho`.
pub fn pure_to_cdp(epsilon: f64) -> Result<f64> {
    check_nonneg("epsilon", epsilon)?;
    Ok(0.5 * epsilon * epsilon)
}

/// `rho`-CDP implies `(rho + 2 sqrt(rho ln(1/delta)), delta)`-DP. Returns the
/// approximate-DP epsilon.
pub fn cdp_to_approx(rho: f64, delta: f64) -> Result<f64> {
    check_nonneg("rho", rho)?;
    if !(delta > 0.0 && delta < 1.0) {
        bail!(InvalidParameter, "delta must lie in (0, 1), got {delta}");
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

/// A Rényi bound of the form `D_alpha <= a * alpha`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RenyiCurve {
    coefficient: f64,
}

impl RenyiCurve {
    pub fn new(coefficient: f64) -> Result<Self> {
        check_nonneg("coefficient", coefficient)?;
        Ok(Self { coefficient })
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn at(&self, alpha: f64) -> f64 {
        self.coefficient * alpha
    }

    /// Triangle-like inequality: chaining two curves gives `(sqrt a + sqrt b)^2`.
    pub fn compose_group(self, other: RenyiCurve) -> RenyiCurve {
        let (a, b) = (self.coefficient, other.coefficient);
        if a == 0.0 || b == 0.0 {
            return RenyiCurve { coefficient: a + b };
        }
        let r = a.sqrt() + b.sqrt();
        RenyiCurve { coefficient: r * r }
    }

    /// `k`-fold chaining of the same curve, coefficient `a k^2`.
    pub fn iterate_group(self, k: u32) -> Result<RenyiCurve> {
        if k == 0 {
            bail!(InvalidParameter, "group size must be at least 1");
        }
        let k = k as f64;
        Ok(RenyiCurve { coefficient: self.coefficient * k * k })
    }
}
