//! Numerical Rényi divergences between a noise distribution and its
//! distorted copy `e^t Z + s`, used to check privacy certificates.
//!
//! Integration is composite Simpson on a grid that is log-spaced around both
//! centers (0 and `s`), carried out in the log domain. Mass beyond the grid
//! is estimated from the local power-law decay at the outermost points and
//! added, so truncation can only raise the reported divergence.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::distributions::{DistortionPair, NoiseSpec};
use crate::error::bail;
use crate::math::logspace;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenyiGrid {
    pub min: f64,
    pub max: f64,
    pub per_decade: usize,
}

impl Default for RenyiGrid {
    fn default() -> Self {
        Self { min: 1e-6, max: 1e6, per_decade: 400 }
    }
}

impl RenyiGrid {
    /// Sorted evaluation points covering `±[min, max]` around 0 and `center`.
    pub fn points(&self, center: f64) -> Vec<f64> {
        let decades = (self.max / self.min).log10();
        let count = (decades * self.per_decade as f64).ceil() as usize + 1;
        let radii = logspace(self.min, self.max, count);
        let mut pts = Vec::with_capacity(4 * count + 2);
        for c in [0.0, center] {
            pts.push(c);
            for &r in &radii {
                pts.push(c + r);
                pts.push(c - r);
            }
        }
        pts.sort_unstable_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceEstimate {
    pub alpha: f64,
    /// `D_alpha(Z || e^t Z + s)`.
    pub forward: f64,
    /// `D_alpha(e^t Z + s || Z)`.
    pub reverse: f64,
}

/// Non-uniform composite Simpson weights for `xs`, never straddling one
/// of the `kinks` (which must be nodes).
fn simpson_weights(xs: &[f64], kinks: &[f64]) -> Vec<f64> {
    let mut w = alloc::vec![0.0; xs.len()];
    let mut cuts: Vec<usize> = alloc::vec![0];
    for (i, x) in xs.iter().enumerate().skip(1).take(xs.len().saturating_sub(2)) {
        if kinks.contains(x) {
            cuts.push(i);
        }
    }
    cuts.push(xs.len() - 1);
    for seg in cuts.windows(2) {
        let (mut i, end) = (seg[0], seg[1]);
        if end - i == 1 {
            let h = xs[end] - xs[i];
            w[i] += 0.5 * h;
            w[end] += 0.5 * h;
            continue;
        }
        while i + 2 <= end {
            let (h0, h1) = (xs[i + 1] - xs[i], xs[i + 2] - xs[i + 1]);
            let c = (h0 + h1) / 6.0;
            w[i] += c * (2.0 - h1 / h0);
            w[i + 1] += c * (h0 + h1) * (h0 + h1) / (h0 * h1);
            w[i + 2] += c * (2.0 - h0 / h1);
            i += 2;
        }
        if i < end {
            // Last lone interval: parabola through the previous three nodes.
            let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            w[i - 1] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
            w[i] += h1 * h1 / (6.0 * h0) + 0.5 * h1;
            w[i + 1] += (h1 * h1 / 3.0 + 0.5 * h0 * h1) / (h0 + h1);
        }
    }
    w
}

/// `ln` of the integral of `exp(values)` given quadrature `weights`, plus an
/// estimate of the mass beyond the ends.
fn ln_integral(xs: &[f64], weights: &[f64], values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    let mut sum: f64 = weights.iter().zip(values).map(|(w, v)| w * (v - top).exp()).sum();
    let n = xs.len();
    for (outer, inner) in [(n - 1, n - 2), (0, 1)] {
        let (xo, xi) = (xs[outer].abs(), xs[inner].abs());
        let go = values[outer] - top;
        let decay = (values[inner] - values[outer]) / (xo / xi).ln();
        // Power-law tail g(x) ~ g(xo) (x/xo)^-decay.
        let tail = if decay > 1.0 {
            go.exp() * xo / (decay - 1.0)
        } else if go.exp() == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        sum += tail;
    }
    top + sum.ln()
}

/// Divergences in both directions between `Z ~ spec` and `e^t Z + s`.
pub fn distortion_divergences(
    spec: &NoiseSpec,
    d: DistortionPair,
    alphas: &[f64],
    grid: &RenyiGrid,
) -> Result<Vec<DivergenceEstimate>> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 1.0 && a.is_finite())) {
        bail!(InvalidParameter, "Rényi order must be finite and above 1, got {a}");
    }
    let xs = grid.points(d.s);
    let weights = simpson_weights(&xs, &[0.0, d.s]);
    let lp: Vec<f64> = xs.iter().map(|&z| spec.log_density(z)).collect();
    let scale = (-d.t).exp();
    let lq: Vec<f64> = xs.iter().map(|&z| -d.t + spec.log_density((z - d.s) * scale)).collect();
    Ok(alphas
        .iter()
        .map(|&alpha| {
            let mix = |u: &[f64], v: &[f64]| -> Vec<f64> {
                u.iter().zip(v).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect()
            };
            let forward = ln_integral(&xs, &weights, &mix(&lp, &lq)) / (alpha - 1.0);
            let reverse = ln_integral(&xs, &weights, &mix(&lq, &lp)) / (alpha - 1.0);
            DivergenceEstimate { alpha, forward, reverse }
        })
        .collect())
}

/// Closed-form `D_alpha(N(mu0, v0) || N(mu1, v1))`, infinite past the
/// order where it diverges.
pub fn gaussian_renyi(alpha: f64, mu0: f64, v0: f64, mu1: f64, v1: f64) -> f64 {
    let va = alpha * v1 + (1.0 - alpha) * v0;
    if !(va > 0.0) {
        return f64::INFINITY;
    }
    0.5 * (v1 / v0).ln() + (v1 / va).ln() / (2.0 * (alpha - 1.0)) + alpha * (mu0 - mu1).powi(2) / (2.0 * va)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::CostOptions;

    #[test]
    fn gaussian_matches_closed_form() {
        let spec = NoiseSpec::gaussian();
        let grid = RenyiGrid::default();
        for &(t, s) in &[(0.0, 0.5), (0.05, 0.2), (-0.05, 1.0)] {
            let e = distortion_divergences(&spec, DistortionPair::new(t, s), &[1.5, 2.0, 5.0], &grid).unwrap();
            let v = (2.0f64 * t).exp();
            for est in e {
                let fwd = gaussian_renyi(est.alpha, 0.0, 1.0, s, v);
                let rev = gaussian_renyi(est.alpha, s, v, 0.0, 1.0);
                assert!((est.forward - fwd).abs() < 1e-5 * fwd.max(1e-3), "{t} {s} {est:?} {fwd}");
                assert!((est.reverse - rev).abs() < 1e-5 * rev.max(1e-3), "{t} {s} {est:?} {rev}");
            }
        }
    }

    #[test]
    fn gaussian_tcdp_certificate_holds_exactly() {
        let o = CostOptions::default();
        let spec = NoiseSpec::gaussian();
        for &t in &[1e-4, 0.01, 0.03, 0.05] {
            for &s in &[0.0, 0.1, 1.0, 3.0] {
                let eps = spec.certified_epsilon(DistortionPair::new(t, s), &o).unwrap();
                let rho = 0.5 * eps * eps;
                for sign in [1.0, -1.0] {
                    let v = (2.0 * sign * t).exp();
                    for i in 1..200 {
                        let alpha = 1.0 + (o.omega - 1.0) * i as f64 / 200.0;
                        let worst = gaussian_renyi(alpha, 0.0, 1.0, s, v).max(gaussian_renyi(alpha, s, v, 0.0, 1.0));
                        assert!(worst / alpha <= rho * (1.0 + 1e-12), "t={t} s={s} alpha={alpha}");
                    }
                }
            }
        }
    }

    #[test]
    fn laplace_tail_is_integrated() {
        // D_alpha between Laplace(0,1) and Laplace(s,1) has a closed form.
        let spec = NoiseSpec::laplace();
        let s: f64 = 0.7;
        let alpha: f64 = 2.0;
        let e = distortion_divergences(&spec, DistortionPair::new(0.0, s), &[alpha], &RenyiGrid::default()).unwrap();
        let exact = ((alpha / (2.0 * alpha - 1.0)) * ((alpha - 1.0) * s).exp()
            + ((alpha - 1.0) / (2.0 * alpha - 1.0)) * (-alpha * s).exp())
        .ln()
            / (alpha - 1.0);
        assert!((e[0].forward - exact).abs() < 1e-6 * exact, "{} vs {exact}", e[0].forward);
    }
}
