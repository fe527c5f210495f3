//! Local, distance-k and smooth sensitivity of the trimmed mean.
//!
//! Order statistics are 1-based in the comments below, with the padding
//! convention `x(i) = a` for `i <= 0` and `x(i) = b` for `i > n`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::bail;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SortedDataset {
    values: Vec<f64>,
}

impl SortedDataset {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            bail!(InvalidParameter, "dataset must be nonempty");
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            bail!(InvalidParameter, "dataset contains a non-finite value {v}");
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Clamps every value to `[a, b]`; clamping preserves the order.
    pub fn truncated(&self, a: f64, b: f64) -> SortedDataset {
        SortedDataset { values: self.values.iter().map(|v| v.clamp(a, b)).collect() }
    }

    pub fn is_within(&self, a: f64, b: f64) -> bool {
        self.values[0] >= a && self.values[self.values.len() - 1] <= b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TruncationMode {
    /// Clamp the inputs, then trim. Exact smooth sensitivity.
    Input,
    /// Trim the raw inputs, then clamp the estimate. Certified upper bound.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrimSpec {
    m: usize,
    a: f64,
    b: f64,
    mode: TruncationMode,
}

impl TrimSpec {
    pub fn new(m: usize, a: f64, b: f64, mode: TruncationMode) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            bail!(InvalidParameter, "truncation interval needs finite a < b, got [{a}, {b}]");
        }
        Ok(Self { m, a, b, mode })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn mode(&self) -> TruncationMode {
        self.mode
    }

    /// Number of order statistics kept, `n - 2m`, if positive.
    pub fn kept(&self, n: usize) -> Result<usize> {
        check_trim(n, self.m)
    }
}

fn check_trim(n: usize, m: usize) -> Result<usize> {
    match n.checked_sub(2 * m) {
        Some(w) if w > 0 => Ok(w),
        _ => bail!(InvalidParameter, "trimming needs n > 2m, got n = {n}, m = {m}"),
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        bail!(InvalidParameter, "smoothing parameter must be finite and nonnegative, got {t}");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensitivityReport {
    pub local: f64,
    /// `LS^k` for `k = 0..=n`.
    pub per_distance: Vec<f64>,
    pub smooth: f64,
    pub t: f64,
    pub argmax_k: usize,
}

pub fn trimmed_mean(x: &SortedDataset, m: usize) -> Result<f64> {
    let n = x.len();
    let w = check_trim(n, m)?;
    Ok(x.values[m..n - m].iter().sum::<f64>() / w as f64)
}

/// `LS^k` of the trimmed mean on `[a, b]`-valued inputs, `k = 0..=n`.
///
/// For `k >= 2m + 1` the padded pair `(x(0), x(n+1))` is reachable and the
/// value is the plateau `(b - a)/(n - 2m)`, so only the first `2m + 1`
/// entries need the inner maximum.
pub fn distance_profile(x: &SortedDataset, spec: &TrimSpec) -> Result<Vec<f64>> {
    let n = x.len();
    let w = spec.kept(n)?;
    check_inputs_truncated(x, spec)?;
    let (m, a, b) = (spec.m, spec.a, spec.b);
    let v = &x.values;
    let at = |i: isize| -> f64 {
        if i <= 0 {
            a
        } else if i as usize > n {
            b
        } else {
            v[i as usize - 1]
        }
    };
    let wf = w as f64;
    let plateau = (b - a) / wf;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 2 * m {
            out.push(plateau);
            continue;
        }
        let mut best = 0.0f64;
        for l in 0..=(k + 1) {
            let hi = at((n - m + 1 + k) as isize - l as isize);
            let lo = at((m + 1) as isize - l as isize);
            best = best.max(hi - lo);
        }
        out.push(best / wf);
    }
    Ok(out)
}

fn check_inputs_truncated(x: &SortedDataset, spec: &TrimSpec) -> Result<()> {
    if !x.is_within(spec.a, spec.b) {
        bail!(
            ContractViolation,
            "input-truncated sensitivity needs values in [{}, {}], got range [{}, {}]",
            spec.a,
            spec.b,
            x.values[0],
            x.values[x.len() - 1]
        );
    }
    Ok(())
}

/// Exact `t`-smooth sensitivity of the trimmed mean of `[a, b]`-clamped data.
pub fn smooth_sensitivity_input_trunc(
    x: &SortedDataset,
    spec: &TrimSpec,
    t: f64,
) -> Result<SensitivityReport> {
    check_t(t)?;
    let per_distance = distance_profile(x, spec)?;
    let mut smooth = per_distance[0];
    let mut argmax_k = 0;
    for (k, &ls) in per_distance.iter().enumerate().skip(1) {
        let v = (-(k as f64) * t).exp() * ls;
        if v > smooth {
            smooth = v;
            argmax_k = k;
        }
    }
    Ok(SensitivityReport { local: per_distance[0], per_distance, smooth, t, argmax_k })
}

/// Upper bound on the smooth sensitivity of `[trim_m(x)]_{[a,b]}` for raw data.
pub fn smooth_sensitivity_output_trunc(x: &SortedDataset, spec: &TrimSpec, t: f64) -> Result<f64> {
    check_t(t)?;
    let n = x.len();
    let w = spec.kept(n)? as f64;
    let spread = (x.values[n - 1] - x.values[0]) / w;
    Ok(spread.max((-(spec.m as f64) * t).exp() * (spec.b - spec.a)))
}

/// `t -> S_t(x)` for one dataset and trim level, for evaluating many `t`.
///
/// Keeps only the `(k, LS^k)` pairs that can be the maximizer for some
/// `t >= 0`: the upper concave hull of `(k, ln LS^k)`. Distances whose
/// candidates are dominated by `LS^0` or by the padded entries at `k = m`
/// for every `t` are never evaluated, which keeps construction close to
/// linear in `m` on typical data.
#[derive(Debug, Clone)]
pub struct SmoothSensitivityCurve {
    // (k, LS^k, ln LS^k) with strictly decreasing slopes.
    hull: Vec<(usize, f64, f64)>,
}

impl SmoothSensitivityCurve {
    pub fn new(x: &SortedDataset, spec: &TrimSpec) -> Result<Self> {
        let n = x.len();
        let w = spec.kept(n)?;
        check_inputs_truncated(x, spec)?;
        let (m, a, b) = (spec.m, spec.a, spec.b);
        let v = &x.values;
        let xs = |i: usize| v[i - 1];

        // best[k] = max raw difference at distance k, for k = 0..=2m+1.
        let mut best = alloc::vec![0.0f64; 2 * m + 2];
        fn bump(best: &mut [f64], k: usize, d: f64) {
            if d > best[k] {
                best[k] = d;
            }
        }
        for h in (n - m)..=(n + 1) {
            let xh = if h == n + 1 { b } else { xs(h) };
            bump(&mut best, h - w, xh - a);
        }
        for i in 1..=(m + 1) {
            bump(&mut best, 2 * m + 1 - i, b - xs(i));
        }
        let real = |k: usize| -> f64 {
            let lo = m.saturating_sub(k).max(1);
            let hi = (m + 1).min(2 * m - k);
            (lo..=hi).map(|i| xs(i + w + k) - xs(i)).fold(0.0, f64::max)
        };
        if m >= 1 {
            let r0 = real(0);
            bump(&mut best, 0, r0);
            let l0 = best[0];
            let span = xs(n) - xs(1);
            let pad = best[m];
            for k in 1..(2 * m) {
                if span <= 0.0 {
                    break;
                }
                let kf = k as f64;
                let mut t_high = if l0 > 0.0 {
                    if span <= l0 {
                        break;
                    }
                    (span / l0).ln() / kf
                } else {
                    f64::INFINITY
                };
                let mut t_low = 0.0f64;
                if k < m {
                    if pad > 0.0 {
                        t_low = ((pad / span).ln() / (m - k) as f64).max(0.0);
                    }
                } else {
                    if span <= pad {
                        continue;
                    }
                    if k > m && pad > 0.0 {
                        t_high = t_high.min((span / pad).ln() / (k - m) as f64);
                    }
                }
                if t_low < t_high * (1.0 + 1e-9) + 1e-12 {
                    let r = real(k);
                    bump(&mut best, k, r);
                }
            }
        }

        let wf = w as f64;
        let mut hull: Vec<(usize, f64, f64)> = Vec::new();
        for (k, &d) in best.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            let ls = d / wf;
            let y = ls.ln();
            while hull.len() >= 2 {
                let (k1, _, y1) = hull[hull.len() - 2];
                let (k2, _, y2) = hull[hull.len() - 1];
                // Drop the middle point if it lies on or below the chord.
                let lhs = (y2 - y1) * (k - k1) as f64;
                let rhs = (y - y1) * (k2 - k1) as f64;
                if lhs <= rhs {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((k, ls, y));
        }
        Ok(Self { hull })
    }

    pub fn at(&self, t: f64) -> f64 {
        let h = &self.hull;
        if h.is_empty() {
            return 0.0;
        }
        // First vertex whose outgoing slope is at most t.
        let (mut lo, mut hi) = (0usize, h.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let slope = (h[mid + 1].2 - h[mid].2) / (h[mid + 1].0 - h[mid].0) as f64;
            if slope <= t {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let eval = |j: usize| (-(h[j].0 as f64) * t).exp() * h[j].1;
        let mut best = eval(lo);
        if lo > 0 {
            best = best.max(eval(lo - 1));
        }
        if lo + 1 < h.len() {
            best = best.max(eval(lo + 1));
        }
        best
    }

    /// Distances that can attain the maximum for some `t`.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.hull.iter().map(|p| p.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    /// Maximum number of function evaluations allowed.
    pub budget: u128,
    /// Treat datasets as multisets, so distance is measured up to reordering
    /// and `f` always receives sorted input.
    pub permutation_invariant: bool,
    /// A bound on `|f(x) - f(y)|` over neighbors, used only to skip datasets
    /// whose discounted contribution cannot beat the running maximum.
    pub neighbor_bound: Option<f64>,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self { budget: 50_000_000, permutation_invariant: true, neighbor_bound: None }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Grid-restricted smooth sensitivity by exhaustive search:
/// `max over x' with d(x, x') <= max_distance of e^{-t d(x,x')} LS(f, x')`,
/// where `x'` and the replaced entry range over `grid` together with the
/// values of `x`.
pub fn brute_force_smooth_sensitivity<F: Fn(&[f64]) -> f64>(
    f: F,
    x: &[f64],
    grid: &[f64],
    t: f64,
    max_distance: usize,
    opts: &EnumerationOptions,
) -> Result<f64> {
    check_t(t)?;
    let n = x.len();
    if n == 0 {
        bail!(InvalidParameter, "dataset must be nonempty");
    }
    let mut universe: Vec<f64> = grid.iter().chain(x.iter()).copied().collect();
    if universe.iter().any(|v| !v.is_finite()) {
        bail!(InvalidParameter, "dataset and grid must be finite");
    }
    universe.sort_unstable_by(f64::total_cmp);
    universe.dedup();
    let u = universe.len();
    let index = |v: f64| universe.binary_search_by(|p| p.total_cmp(&v)).expect("value in universe");

    if opts.permutation_invariant {
        let required = binomial((n + u - 1) as u128, n as u128)
            .saturating_mul((u * u) as u128);
        if required > opts.budget {
            return Err(crate::Error::EnumerationBudget { required, budget: opts.budget });
        }
        let mut base = alloc::vec![0usize; u];
        for &v in x {
            base[index(v)] += 1;
        }
        let mut counts = alloc::vec![0usize; u];
        let mut state = MultisetSearch {
            f: &f,
            universe: &universe,
            base: &base,
            t,
            max_distance,
            bound: opts.neighbor_bound,
            best: 0.0,
            buf: Vec::with_capacity(n),
        };
        state.recurse(&mut counts, 0, n);
        Ok(state.best)
    } else {
        let required = (u as u128)
            .checked_pow(n as u32)
            .and_then(|c| c.checked_mul((n * u) as u128))
            .unwrap_or(u128::MAX);
        if required > opts.budget {
            return Err(crate::Error::EnumerationBudget { required, budget: opts.budget });
        }
        let mut cur = x.to_vec();
        let mut best = 0.0f64;
        tuples(&f, x, &universe, &mut cur, 0, 0, t, max_distance, opts.neighbor_bound, &mut best);
        Ok(best)
    }
}

struct MultisetSearch<'a, F> {
    f: &'a F,
    universe: &'a [f64],
    base: &'a [usize],
    t: f64,
    max_distance: usize,
    bound: Option<f64>,
    best: f64,
    buf: Vec<f64>,
}

impl<F: Fn(&[f64]) -> f64> MultisetSearch<'_, F> {
    fn recurse(&mut self, counts: &mut [usize], j: usize, left: usize) {
        let u = self.universe.len();
        if j == u - 1 {
            counts[j] = left;
            self.visit(counts);
            counts[j] = 0;
            return;
        }
        for c in 0..=left {
            counts[j] = c;
            self.recurse(counts, j + 1, left - c);
        }
        counts[j] = 0;
    }

    fn fill(&mut self, counts: &[usize]) {
        self.buf.clear();
        for (j, &c) in counts.iter().enumerate() {
            self.buf.extend(core::iter::repeat_n(self.universe[j], c));
        }
    }

    fn visit(&mut self, counts: &mut [usize]) {
        let n: usize = counts.iter().sum();
        let shared: usize = counts.iter().zip(self.base).map(|(c, b)| (*c).min(*b)).sum();
        let d = n - shared;
        if d > self.max_distance {
            return;
        }
        let weight = (-(d as f64) * self.t).exp();
        if let Some(bound) = self.bound {
            if weight * bound <= self.best {
                return;
            }
        }
        self.fill(counts);
        let here = (self.f)(&self.buf);
        let u = self.universe.len();
        for out in 0..u {
            if counts[out] == 0 {
                continue;
            }
            for inn in 0..u {
                if inn == out {
                    continue;
                }
                counts[out] -= 1;
                counts[inn] += 1;
                self.fill(counts);
                let there = (self.f)(&self.buf);
                counts[inn] -= 1;
                counts[out] += 1;
                let v = weight * (there - here).abs();
                if v > self.best {
                    self.best = v;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn tuples<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    universe: &[f64],
    cur: &mut Vec<f64>,
    pos: usize,
    changed: usize,
    t: f64,
    max_distance: usize,
    bound: Option<f64>,
    best: &mut f64,
) {
    if pos == x.len() {
        let weight = (-(changed as f64) * t).exp();
        if bound.is_some_and(|b| weight * b <= *best) {
            return;
        }
        let here = f(cur);
        for i in 0..cur.len() {
            let keep = cur[i];
            for &g in universe {
                if g == keep {
                    continue;
                }
                cur[i] = g;
                let v = weight * (f(cur) - here).abs();
                if v > *best {
                    *best = v;
                }
            }
            cur[i] = keep;
        }
        return;
    }
    for &g in universe {
        let moved = usize::from(g != x[pos]);
        if changed + moved > max_distance {
            continue;
        }
        cur[pos] = g;
        tuples(f, x, universe, cur, pos + 1, changed + moved, t, max_distance, bound, best);
    }
    cur[pos] = x[pos];
}
