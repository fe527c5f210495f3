//! Monte Carlo evaluation of the private trimmed mean and its baselines.
//!
//! Every algorithm sees the same datasets (replicate `r` draws from the
//! stream seeded by `(seed, DATA_STREAM, r)`), so differences between rows
//! are not blurred by independent data noise. Replicates are processed in
//! fixed-size chunks and reduced in chunk order, which makes the sums
//! independent of the thread count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smoothtrim::bounds::lower_bound_variance;
use smoothtrim::calibration::{CalibratedNoise, CalibrationProblem, TGrid};
use smoothtrim::mechanism::global_sensitivity_noise_sd;
use smoothtrim::sensitivity::{smooth_sensitivity_output_trunc, trimmed_mean, SmoothSensitivityCurve};
use smoothtrim::{CostOptions, NoiseFamily, SortedDataset, TrimSpec, TruncationMode};

use crate::data::DataModel;
use crate::seeds::{stream_seed, DATA_STREAM, GLOBAL_SENS_STREAM, NOISE_STREAM_BASE};
use crate::{HarnessError, Result};

const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    LLN,
    ULN,
    ArsinhNormal,
    StudentT,
    Laplace,
    Gaussian,
    TrimNonPrivate,
    GlobalSens,
    LowerBound,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::LLN,
        Algorithm::ULN,
        Algorithm::ArsinhNormal,
        Algorithm::StudentT,
        Algorithm::Laplace,
        Algorithm::Gaussian,
        Algorithm::TrimNonPrivate,
        Algorithm::GlobalSens,
        Algorithm::LowerBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LLN => "LLN",
            Algorithm::ULN => "ULN",
            Algorithm::ArsinhNormal => "ArsinhNormal",
            Algorithm::StudentT => "StudentT",
            Algorithm::Laplace => "Laplace",
            Algorithm::Gaussian => "Gaussian",
            Algorithm::TrimNonPrivate => "TrimNonPrivate",
            Algorithm::GlobalSens => "GlobalSens",
            Algorithm::LowerBound => "LowerBound",
        }
    }

    pub fn noise_family(self) -> Option<NoiseFamily> {
        Some(match self {
            Algorithm::LLN => NoiseFamily::LaplaceLogNormal,
            Algorithm::ULN => NoiseFamily::UniformLogNormal,
            Algorithm::ArsinhNormal => NoiseFamily::ArsinhNormal,
            Algorithm::StudentT => NoiseFamily::StudentT,
            Algorithm::Laplace => NoiseFamily::Laplace,
            Algorithm::Gaussian => NoiseFamily::Gaussian,
            _ => return None,
        })
    }

    /// Whether the row is tuned over the t-grid.
    pub fn uses_t(self) -> bool {
        self.noise_family().is_some() || self == Algorithm::LowerBound
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// How the noise term enters the MSE.
///
/// `Analytic` uses `E[(e + S Z / s)^2] = E[e^2] + Var(Z)/s^2 * E[S^2]`,
/// which holds because `Z` is centered and independent of the data; only
/// the data are simulated. `Sampled` draws the noise too.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseEvaluation {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub data: DataModel,
    pub n: usize,
    pub reps: usize,
    pub epsilon: f64,
    pub algorithms: Vec<Algorithm>,
    pub m_grid: Vec<usize>,
    pub t_grid: TGrid,
    pub a: f64,
    pub b: f64,
    pub seed: u64,
    pub truncation: TruncationMode,
    pub cost_options: CostOptions,
    pub noise_evaluation: NoiseEvaluation,
}

impl ExperimentSpec {
    /// Standard normal data, `[a, b] = [-50, 1050]`, `eps = 1`, every
    /// algorithm, 20 trim levels and the default t-grid.
    pub fn standard(n: usize, reps: usize, seed: u64) -> Self {
        ExperimentSpec {
            data: DataModel::standard_gaussian(),
            n,
            reps,
            epsilon: 1.0,
            algorithms: Algorithm::ALL.to_vec(),
            m_grid: even_m_grid(n, 20),
            t_grid: TGrid::default(),
            a: -50.0,
            b: 1050.0,
            seed,
            truncation: TruncationMode::Input,
            cost_options: CostOptions::default(),
            noise_evaluation: NoiseEvaluation::Analytic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Spec(m));
        self.data.validate()?;
        if self.n == 0 || self.reps == 0 {
            return bad(format!("need n >= 1 and reps >= 1, got n = {}, reps = {}", self.n, self.reps));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.algorithms.is_empty() || self.m_grid.is_empty() {
            return bad("algorithm list and m-grid must be nonempty".into());
        }
        if let Some(&m) = self.m_grid.iter().find(|&&m| 2 * m >= self.n) {
            return bad(format!("trim level m = {m} leaves nothing of n = {}", self.n));
        }
        let mu = self.data.mean();
        if !(self.a < self.b && self.a <= mu && mu <= self.b) {
            return bad(format!("[a, b] = [{}, {}] must contain the mean {mu}", self.a, self.b));
        }
        self.t_grid.validate()?;
        Ok(())
    }
}

/// `steps` trim levels spread evenly over `0..=(n-1)/2`, deduplicated.
pub fn even_m_grid(n: usize, steps: usize) -> Vec<usize> {
    let top = n.saturating_sub(1) / 2;
    if steps <= 1 {
        return vec![0];
    }
    let mut out: Vec<usize> = (0..steps)
        .map(|i| ((i as f64) * top as f64 / (steps - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// One evaluated `(algorithm, m, t)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub algorithm: Algorithm,
    pub m: usize,
    pub t: Option<f64>,
    pub s: Option<f64>,
    pub shape: Option<f64>,
    /// `n * MSE - 1`.
    pub excess_var: f64,
    pub stderr: f64,
}

impl SurfacePoint {
    pub fn mse(&self, n: usize) -> f64 {
        (self.excess_var + 1.0) / n as f64
    }
}

/// Best-t summary per `(algorithm, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub m: usize,
    pub t_best: Option<f64>,
    pub s: Option<f64>,
    pub shape: Option<f64>,
    pub excess_var: f64,
    pub stderr: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub n: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub reps: usize,
    pub cells: Vec<CellResult>,
}

impl ExperimentResult {
    pub fn cell(&self, algorithm: Algorithm, m: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.algorithm == algorithm && c.m == m)
    }

    pub fn best(&self, algorithm: Algorithm) -> Option<&CellResult> {
        self.cells
            .iter()
            .filter(|c| c.algorithm == algorithm)
            .min_by(|x, y| x.excess_var.total_cmp(&y.excess_var))
    }
}

/// Running `Σ X` and `Σ X^2` of a replicate-level quantity.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, o: &Moments) {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }
}

/// Mean of `X` and its standard error from `Σ X`, `Σ X^2` over `r` draws.
fn mean_and_se(sum: f64, sum_sq: f64, r: usize) -> (f64, f64) {
    let rf = r as f64;
    let mean = sum / rf;
    if r < 2 {
        return (mean, f64::NAN);
    }
    let var = ((sum_sq - rf * mean * mean) / (rf - 1.0)).max(0.0);
    (mean, (var / rf).sqrt())
}

/// Per-t noise calibration of one algorithm.
#[derive(Debug, Clone)]
struct Calibrated {
    algorithm: Algorithm,
    // (t index, calibration, Var(Z)/s^2)
    points: Vec<(usize, Option<CalibratedNoise>, f64)>,
}

struct Plan<'a> {
    spec: &'a ExperimentSpec,
    ts: Vec<f64>,
    calibrated: Vec<Calibrated>,
    need_sens: bool,
    global: bool,
    sampled: bool,
}

/// Sufficient statistics for one chunk of replicates.
#[derive(Debug, Clone)]
struct Accum {
    // per m
    e2: Vec<Moments>,
    // per (m, t): Σ S^2, Σ S^4, Σ e^2 S^2
    s2: Vec<f64>,
    s4: Vec<f64>,
    e2s2: Vec<f64>,
    // per (calibrated algorithm, m, t), sampled mode only
    noisy: Vec<Moments>,
    global: Moments,
}

impl Accum {
    fn new(plan: &Plan<'_>) -> Self {
        let nm = plan.spec.m_grid.len();
        let nt = plan.ts.len();
        let sens = if plan.need_sens { nm * nt } else { 0 };
        let noisy = if plan.sampled { plan.calibrated.len() * nm * nt } else { 0 };
        Accum {
            e2: vec![Moments::default(); nm],
            s2: vec![0.0; sens],
            s4: vec![0.0; sens],
            e2s2: vec![0.0; sens],
            noisy: vec![Moments::default(); noisy],
            global: Moments::default(),
        }
    }

    fn merge(&mut self, o: &Accum) {
        for (x, y) in self.e2.iter_mut().zip(&o.e2) {
            x.merge(y);
        }
        for (x, y) in self.noisy.iter_mut().zip(&o.noisy) {
            x.merge(y);
        }
        let add = |x: &mut Vec<f64>, y: &Vec<f64>| x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
        add(&mut self.s2, &o.s2);
        add(&mut self.s4, &o.s4);
        add(&mut self.e2s2, &o.e2s2);
        self.global.merge(&o.global);
    }
}

impl Plan<'_> {
    fn replicate(&self, r: usize, acc: &mut Accum, sens_buf: &mut [f64]) -> Result<()> {
        let spec = self.spec;
        let (a, b, n) = (spec.a, spec.b, spec.n);
        let mu = spec.data.mean();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, DATA_STREAM, r as u64));
        let raw = SortedDataset::new(spec.data.generate(n, &mut rng))?;
        let clamped = raw.truncated(a, b);
        let nt = self.ts.len();

        // Noise draws shared across trim levels so that the m-curves of a
        // sampled run are smooth.
        let mut draws: Vec<f64> = Vec::new();
        if self.sampled {
            draws.reserve(self.calibrated.len() * nt);
            for (ci, cal) in self.calibrated.iter().enumerate() {
                let stream = NOISE_STREAM_BASE + ci as u64;
                let mut nrng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, stream, r as u64));
                for (_, point, _) in &cal.points {
                    draws.push(point.map_or(0.0, |p| p.noise.sample(&mut nrng)));
                }
            }
        }

        for (mi, &m) in spec.m_grid.iter().enumerate() {
            let trim = TrimSpec::new(m, a, b, spec.truncation)?;
            let point = match spec.truncation {
                TruncationMode::Input => trimmed_mean(&clamped, m)?,
                TruncationMode::Output => trimmed_mean(&raw, m)?.clamp(a, b),
            };
            let e = point - mu;
            let e2 = e * e;
            acc.e2[mi].push(e2);
            if !self.need_sens {
                continue;
            }
            match spec.truncation {
                TruncationMode::Input => {
                    let curve = SmoothSensitivityCurve::new(&clamped, &trim)?;
                    for (slot, &t) in sens_buf.iter_mut().zip(&self.ts) {
                        *slot = curve.at(t);
                    }
                }
                TruncationMode::Output => {
                    for (slot, &t) in sens_buf.iter_mut().zip(&self.ts) {
                        *slot = smooth_sensitivity_output_trunc(&raw, &trim, t)?;
                    }
                }
            }
            let base = mi * nt;
            for (j, &sv) in sens_buf.iter().enumerate() {
                let s2 = sv * sv;
                acc.s2[base + j] += s2;
                acc.s4[base + j] += s2 * s2;
                acc.e2s2[base + j] += e2 * s2;
            }
            if self.sampled {
                for (ci, cal) in self.calibrated.iter().enumerate() {
                    for (j, point) in cal.points.iter().enumerate() {
                        let Some(p) = point.1 else { continue };
                        let v = e + sens_buf[j] / p.s * draws[ci * nt + j];
                        acc.noisy[(ci * spec.m_grid.len() + mi) * nt + j].push(v * v);
                    }
                }
            }
        }

        if self.global {
            let sd = global_sensitivity_noise_sd(n, a, b, spec.epsilon)?;
            let mean = clamped.values().iter().sum::<f64>() / n as f64;
            let e = mean - mu;
            let v = if self.sampled {
                let mut grng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, GLOBAL_SENS_STREAM, r as u64));
                let g: f64 = grng.sample(StandardNormal);
                (e + sd * g).powi(2)
            } else {
                e * e + sd * sd
            };
            acc.global.push(v);
        }
        Ok(())
    }
}

fn calibrate(spec: &ExperimentSpec, algorithm: Algorithm, ts: &[f64]) -> Result<Calibrated> {
    let mut points = Vec::with_capacity(ts.len());
    if algorithm == Algorithm::LowerBound {
        for (j, &t) in ts.iter().enumerate() {
            let c = lower_bound_variance(1.0, t, spec.epsilon)?;
            points.push((j, None, c));
        }
        return Ok(Calibrated { algorithm, points });
    }
    let family = algorithm.noise_family().expect("noise algorithm");
    let problem = CalibrationProblem::new(spec.epsilon, family, spec.t_grid, spec.cost_options)?;
    for (j, &t) in ts.iter().enumerate() {
        // Infeasible grid points are skipped, as are noises without a
        // finite variance.
        let entry = problem
            .at(t)
            .ok()
            .and_then(|p| p.variance_factor().ok().map(|c| (Some(p), c)));
        match entry {
            Some((p, c)) => points.push((j, p, c)),
            None => points.push((j, None, f64::INFINITY)),
        }
    }
    Ok(Calibrated { algorithm, points })
}

/// Every `(algorithm, m, t)` point of the experiment. Points whose
/// calibration is infeasible are absent.
pub fn run_surface(spec: &ExperimentSpec) -> Result<Vec<SurfacePoint>> {
    spec.validate()?;
    let mut algorithms = spec.algorithms.clone();
    algorithms.sort_by_key(|a| a.name());
    algorithms.dedup();

    let ts = spec.t_grid.points();
    let mut calibrated = Vec::new();
    for &alg in &algorithms {
        if alg.uses_t() {
            calibrated.push(calibrate(spec, alg, &ts)?);
        }
    }
    let sampled = spec.noise_evaluation == NoiseEvaluation::Sampled;
    // Sampled mode keeps LowerBound analytic; it has no noise to draw.
    let sampled_cal: Vec<Calibrated> = if sampled {
        calibrated.iter().filter(|c| c.algorithm != Algorithm::LowerBound).cloned().collect()
    } else {
        Vec::new()
    };
    let plan = Plan {
        spec,
        ts: ts.clone(),
        calibrated: sampled_cal,
        need_sens: !calibrated.is_empty(),
        global: algorithms.contains(&Algorithm::GlobalSens),
        sampled,
    };

    let chunks = spec.reps.div_ceil(CHUNK);
    let partials: Vec<Result<Accum>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accum::new(&plan);
            let mut buf = vec![0.0; ts.len()];
            for r in (c * CHUNK)..((c + 1) * CHUNK).min(spec.reps) {
                plan.replicate(r, &mut acc, &mut buf)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accum::new(&plan);
    for p in partials {
        total.merge(&p?);
    }

    let n = spec.n as f64;
    let reps = spec.reps;
    let nt = ts.len();
    let nm = spec.m_grid.len();
    let mut out = Vec::new();
    for &alg in &algorithms {
        match alg {
            Algorithm::TrimNonPrivate => {
                for (mi, &m) in spec.m_grid.iter().enumerate() {
                    let (mse, se) = mean_and_se(total.e2[mi].sum, total.e2[mi].sum_sq, reps);
                    out.push(point(alg, m, None, None, None, n * mse - 1.0, n * se));
                }
            }
            Algorithm::GlobalSens => {
                let (mse, se) = mean_and_se(total.global.sum, total.global.sum_sq, reps);
                for &m in &spec.m_grid {
                    out.push(point(alg, m, None, None, None, n * mse - 1.0, n * se));
                }
            }
            _ => {
                let cal = calibrated.iter().find(|c| c.algorithm == alg).expect("calibrated");
                let si = plan.calibrated.iter().position(|c| c.algorithm == alg);
                for (mi, &m) in spec.m_grid.iter().enumerate() {
                    for &(j, p, c) in &cal.points {
                        if !c.is_finite() {
                            continue;
                        }
                        let k = mi * nt + j;
                        let (mse, se) = match si {
                            Some(si) => {
                                let mo = total.noisy[(si * nm + mi) * nt + j];
                                mean_and_se(mo.sum, mo.sum_sq, reps)
                            }
                            None => {
                                // X = e^2 + c S^2
                                let sum = total.e2[mi].sum + c * total.s2[k];
                                let sum_sq =
                                    total.e2[mi].sum_sq + 2.0 * c * total.e2s2[k] + c * c * total.s4[k];
                                mean_and_se(sum, sum_sq, reps)
                            }
                        };
                        let s = p.map(|p| p.s);
                        let shape = p.and_then(|p| p.noise.shape());
                        out.push(point(alg, m, Some(ts[j]), s, shape, n * mse - 1.0, n * se));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn point(
    algorithm: Algorithm,
    m: usize,
    t: Option<f64>,
    s: Option<f64>,
    shape: Option<f64>,
    excess_var: f64,
    stderr: f64,
) -> SurfacePoint {
    SurfacePoint { algorithm, m, t, s, shape, excess_var, stderr }
}

/// Runs the experiment and keeps the best grid `t` for each `(algorithm, m)`.
/// Ties go to the smaller `t`. Rows are ordered by algorithm name, then `m`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let surface = run_surface(spec)?;
    let mut cells: Vec<CellResult> = Vec::new();
    for p in surface {
        let cell = CellResult {
            algorithm: p.algorithm,
            m: p.m,
            t_best: p.t,
            s: p.s,
            shape: p.shape,
            excess_var: p.excess_var,
            stderr: p.stderr,
            reps: spec.reps,
        };
        match cells.iter_mut().find(|c| c.algorithm == p.algorithm && c.m == p.m) {
            Some(c) if cell.excess_var < c.excess_var => *c = cell,
            Some(_) => {}
            None => cells.push(cell),
        }
    }
    cells.sort_by(|x, y| x.algorithm.name().cmp(y.algorithm.name()).then(x.m.cmp(&y.m)));
    Ok(ExperimentResult { n: spec.n, epsilon: spec.epsilon, seed: spec.seed, reps: spec.reps, cells })
}
