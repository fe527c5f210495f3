//! Special functions used across the crate.

#[allow(unused_imports)]
use num_traits::Float;

pub const LN_2: f64 = core::f64::consts::LN_2;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the standard normal upper tail, `ln P(N(0,1) > g)`.
///
/// Stable for every finite `g`; beyond `g = 5` the Mills ratio continued
/// fraction replaces `erfc`, which would underflow near `g = 38`.
pub fn ln_normal_sf(g: f64) -> f64 {
    if g.is_nan() {
        return f64::NAN;
    }
    if g == f64::NEG_INFINITY {
        return 0.0;
    }
    if g == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if g < 0.0 {
        (-0.5 * libm::erfc(-g * core::f64::consts::FRAC_1_SQRT_2)).ln_1p()
    } else if g < 5.0 {
        (0.5 * libm::erfc(g * core::f64::consts::FRAC_1_SQRT_2)).ln()
    } else {
        -0.5 * g * g - LN_SQRT_2PI + mills_ratio(g).ln()
    }
}

/// `P(N > g) / phi(g)` for `g >= 5`, by backward evaluation of the
/// Laplace continued fraction.
fn mills_ratio(g: f64) -> f64 {
    let mut acc = g;
    for k in (1..=120).rev() {
        acc = g + k as f64 / acc;
    }
    1.0 / acc
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// Principal branch of the Lambert W function evaluated at `exp(ln_x)`.
///
/// Taking the argument in log form lets callers pass values far beyond the
/// f64 range, which the log-normal mixtures need for large `|z|`.
pub fn lambert_w0_from_ln(ln_x: f64) -> f64 {
    if ln_x == f64::NEG_INFINITY {
        return 0.0;
    }
    if ln_x > 1.0 {
        // Solve w + ln w = ln_x by Newton, starting from the asymptotic form.
        let mut w = ln_x - ln_x.ln();
        for _ in 0..50 {
            let f = w + w.ln() - ln_x;
            let step = f / (1.0 + 1.0 / w);
            w -= step;
            if step.abs() <= 4.0 * f64::EPSILON * w {
                break;
            }
        }
        w
    } else {
        let x = ln_x.exp();
        let mut w = x.ln_1p();
        for _ in 0..50 {
            let ew = w.exp();
            let f = w * ew - x;
            let denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
            let step = f / denom;
            w -= step;
            if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        w
    }
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `count` points between `lo` and `hi` inclusive, evenly spaced in log.
pub fn logspace(lo: f64, hi: f64, count: usize) -> alloc::vec::Vec<f64> {
    match count {
        0 => alloc::vec::Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / (count - 1) as f64;
            (0..count)
                .map(|i| match i {
                    0 => lo,
                    i if i == count - 1 => hi,
                    i => (a + step * i as f64).exp(),
                })
                .collect()
        }
    }
}
