//! Closed-form error upper bounds and noise lower bounds.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::bail;
use crate::math::ln_add_exp;
use crate::sensitivity::TruncationMode;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundInputs {
    pub n: usize,
    pub m: usize,
    pub a: f64,
    pub b: f64,
    /// Standard deviation of the data.
    pub sigma: f64,
    /// Subgaussian parameter of the data.
    pub sigma_bar: f64,
    pub mu: f64,
    pub t: f64,
    pub s: f64,
}

fn kept(n: usize, m: usize) -> Result<f64> {
    match n.checked_sub(2 * m) {
        Some(w) if w > 0 => Ok(w as f64),
        _ => bail!(InvalidParameter, "need n > 2m, got n = {n}, m = {m}"),
    }
}

/// `n / (n - 2m)^2 * E[X^2]` for data symmetric about zero.
pub fn trim_var_bound_symmetric(n: usize, m: usize, second_moment: f64) -> Result<f64> {
    let w = kept(n, m)?;
    Ok(n as f64 / (w * w) * second_moment)
}

/// `n (1 + sqrt(8) m) / (n - 2m)^2 * sigma^2` for any distribution.
pub fn trim_var_bound_general(n: usize, m: usize, variance: f64) -> Result<f64> {
    let w = kept(n, m)?;
    Ok(n as f64 * (1.0 + 8f64.sqrt() * m as f64) / (w * w) * variance)
}

/// Mean squared effect of clamping `sigma_bar`-subgaussian inputs to `[a, b]`
/// on the trimmed mean.
pub fn truncation_error_bound(n: usize, m: usize, sigma_bar: f64, a: f64, b: f64, mu: f64) -> Result<f64> {
    let w = kept(n, m)?;
    if !(a < mu && mu < b) {
        bail!(InvalidParameter, "need a < mu < b, got a = {a}, mu = {mu}, b = {b}");
    }
    Ok(2.0 * n as f64 / w * sigma_bar * sigma_bar * tails(sigma_bar, a, b, mu))
}

fn tails(sigma_bar: f64, a: f64, b: f64, mu: f64) -> f64 {
    let v = 2.0 * sigma_bar * sigma_bar;
    (-(b - mu).powi(2) / v).exp() + (-(mu - a).powi(2) / v).exp()
}

/// Bound on `E[S^2]`. `scale` is the subgaussian parameter in input mode and
/// the standard deviation in output mode. Input mode uses `log(2n)`.
pub fn ss_second_moment_bound(
    mode: TruncationMode,
    n: usize,
    m: usize,
    t: f64,
    a: f64,
    b: f64,
    scale: f64,
) -> Result<f64> {
    let w = kept(n, m)?;
    let pad = (-2.0 * m as f64 * t).exp() * (b - a) * (b - a);
    Ok(match mode {
        TruncationMode::Input => (8.0 * scale * scale * (2.0 * n as f64).ln() + pad) / (w * w),
        TruncationMode::Output => scale * scale * 2.0 * n as f64 / (w * w) + pad,
    })
}

/// Upper bound on the mean squared error of the full mechanism. Input mode
/// assumes data symmetric about `mu`; output mode only a finite variance.
pub fn mechanism_mse_bound(mode: TruncationMode, p: &BoundInputs, noise_variance: f64) -> Result<f64> {
    let w = kept(p.n, p.m)?;
    let n = p.n as f64;
    let s2 = p.s * p.s;
    match mode {
        TruncationMode::Input => {
            if !(p.a < p.mu && p.mu < p.b) {
                bail!(InvalidParameter, "need a < mu < b");
            }
            let ratio = p.sigma_bar * p.sigma_bar / (p.sigma * p.sigma);
            let trunc = (ratio * 2.0 * n * n / w * tails(p.sigma_bar, p.a, p.b, p.mu)).sqrt();
            let factor = 1.0 + 2.0 * p.m as f64 / w + trunc;
            let est = p.sigma * p.sigma / n * factor * factor;
            let ss = ss_second_moment_bound(mode, p.n, p.m, p.t, p.a, p.b, p.sigma_bar)?;
            Ok(est + ss / s2 * noise_variance)
        }
        TruncationMode::Output => {
            let est = trim_var_bound_general(p.n, p.m, p.sigma * p.sigma)?;
            let ss = ss_second_moment_bound(mode, p.n, p.m, p.t, p.a, p.b, p.sigma)?;
            Ok(est + ss / s2 * noise_variance)
        }
    }
}

fn check_positive(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v > 0.0 && v.is_finite()) {
            bail!(InvalidParameter, "{name} must be positive and finite, got {v}");
        }
    }
    Ok(())
}

/// Lower bound on `P(|Z| > x)` for any `Z` that is `eps^2/2`-CDP under
/// distortion `(t, s)`.
pub fn lower_bound_tail(s: f64, t: f64, epsilon: f64, x: f64) -> Result<f64> {
    check_positive(&[("s", s), ("t", t), ("epsilon", epsilon), ("x", x)])?;
    let k = ((x / s * t.exp_m1()).ln_1p() / t).ceil().max(1.0);
    Ok(0.25 * (-epsilon * epsilon * k * k).exp())
}

/// Cap on the indices `k, l` searched by [`lower_bound_variance`].
pub fn lower_bound_index_cap(epsilon: f64) -> usize {
    ((10.0 / epsilon).ceil() as usize).clamp(1, 200)
}

fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// Lower bound on `E[Z^2]` for any centered `Z` that is `eps^2/2`-CDP under
/// distortion `(t, s)`, maximized over the two group-privacy indices.
///
/// Evaluated in logs; can be `+inf` when no such `Z` exists at these
/// parameters.
pub fn lower_bound_variance(s: f64, t: f64, epsilon: f64) -> Result<f64> {
    check_positive(&[("s", s), ("t", t), ("epsilon", epsilon)])?;
    let cap = lower_bound_index_cap(epsilon);
    let ln_pre = 2.0 * s.ln() - 2.0 * (-(-t).exp_m1()).ln();
    let mut best = f64::NEG_INFINITY;
    for k in 0..=cap {
        for l in 0..=cap {
            if k + l == 0 {
                continue;
            }
            let (kf, lf) = (k as f64, l as f64);
            // num = e^{(l-1)t} (e^{kt} - 1) + (e^{lt} - 1)
            let ln_num = ln_add_exp((lf - 1.0) * t + ln_expm1(kf * t), ln_expm1(lf * t));
            let ln_a = 2.0 * ln_num - ln_expm1(epsilon * epsilon * (kf + lf) * (kf + lf));
            let ln_b = 2.0 * ln_expm1(lf * t);
            if !(ln_a > ln_b) {
                continue;
            }
            let ln_diff = ln_a + (-(ln_b - ln_a).exp_m1()).ln();
            best = best.max(ln_pre + ln_diff);
        }
    }
    Ok(if best == f64::NEG_INFINITY { 0.0 } else { best.exp() })
}
