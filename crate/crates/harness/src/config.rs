//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment. Repeated or unknown keys
//! are errors. Lists are comma separated.
//!
//! ```text
//! n = 201
//! reps = 10000
//! eps = 1
//! data = gaussian
//! algorithms = LLN, StudentT, TrimNonPrivate
//! m_steps = 20
//! t_min = 1e-9
//! t_max = 9
//! t_count = 30
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use smoothtrim::calibration::TGrid;
use smoothtrim::{NoiseFamily, NoiseSpec, TruncationMode};

use crate::data::DataModel;
use crate::experiment::{even_m_grid, Algorithm, ExperimentSpec, NoiseEvaluation};
use crate::{HarnessError, Result};

/// Parsed assignments with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(HarnessError::Config { line: i + 1, message: format!("expected key = value, got {line:?}") });
            };
            let key = k.trim().to_ascii_lowercase();
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(HarnessError::Config { line: i + 1, message: format!("duplicate key {key:?}") });
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| HarnessError::Config {
                line,
                message: format!("{key}: cannot parse {v:?}: {e}"),
            }),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((line, v)) = self.take(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|e| HarnessError::Config { line, message: format!("{key}: {s:?}: {e}") })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(HarnessError::Config { line, message: format!("unknown key {k:?}") }),
        }
    }
}

fn parse_mode(line: usize, v: &str) -> Result<TruncationMode> {
    match v.to_ascii_lowercase().as_str() {
        "input" => Ok(TruncationMode::Input),
        "output" => Ok(TruncationMode::Output),
        _ => Err(HarnessError::Config { line, message: format!("truncation must be input or output, got {v:?}") }),
    }
}

fn data_model(c: &mut Config) -> Result<DataModel> {
    let (line, family) = c.take("data").unwrap_or((0, "gaussian".into()));
    let mu = c.get("mu")?.unwrap_or(0.0);
    Ok(match family.to_ascii_lowercase().as_str() {
        "gaussian" => DataModel::Gaussian { mu, variance: c.get("variance")?.unwrap_or(1.0) },
        "laplace" => DataModel::Laplace { mu, scale: c.get("scale")?.unwrap_or(1.0) },
        "mixture" => DataModel::GaussianMixture {
            mu,
            variance1: c.get("variance1")?.unwrap_or(1.0),
            variance2: c.get("variance2")?.unwrap_or(9.0),
            weight: c.get("weight")?.unwrap_or(0.1),
        },
        other => {
            return Err(HarnessError::Config {
                line,
                message: format!("data must be gaussian, laplace or mixture, got {other:?}"),
            })
        }
    })
}

/// Builds an experiment from `config`, starting from
/// [`ExperimentSpec::standard`]. `m` (an explicit list) and `m_steps` are
/// exclusive.
pub fn experiment_spec(mut c: Config) -> Result<ExperimentSpec> {
    let n: usize = c.get("n")?.unwrap_or(201);
    let reps = c.get("reps")?.unwrap_or(10_000);
    let seed = c.get("seed")?.unwrap_or(0);
    let mut spec = ExperimentSpec::standard(n, reps, seed);
    spec.data = data_model(&mut c)?;
    if let Some(e) = c.get("eps")? {
        spec.epsilon = e;
    }
    if let Some(a) = c.list::<Algorithm>("algorithms")? {
        spec.algorithms = a;
    }
    let steps: Option<usize> = c.get("m_steps")?;
    match (c.list::<usize>("m")?, steps) {
        (Some(_), Some(_)) => return Err(HarnessError::Spec("give either m or m_steps, not both".into())),
        (Some(m), None) => spec.m_grid = m,
        (None, Some(k)) => spec.m_grid = even_m_grid(n, k),
        (None, None) => {}
    }
    let d = TGrid::default();
    spec.t_grid = TGrid {
        min: c.get("t_min")?.unwrap_or(d.min),
        max: c.get("t_max")?.unwrap_or(d.max),
        count: c.get("t_count")?.unwrap_or(d.count),
    };
    spec.a = c.get("a")?.unwrap_or(spec.a);
    spec.b = c.get("b")?.unwrap_or(spec.b);
    if let Some((line, v)) = c.take("truncation") {
        spec.truncation = parse_mode(line, &v)?;
    }
    if let Some(delta) = c.get("delta")? {
        spec.cost_options.delta = delta;
    }
    if let Some(omega) = c.get("omega")? {
        spec.cost_options.omega = omega;
    }
    if let Some((line, v)) = c.take("noise") {
        spec.noise_evaluation = match v.to_ascii_lowercase().as_str() {
            "analytic" => NoiseEvaluation::Analytic,
            "sampled" => NoiseEvaluation::Sampled,
            _ => return Err(HarnessError::Config { line, message: format!("noise must be analytic or sampled, got {v:?}") }),
        };
    }
    c.finish()?;
    spec.validate()?;
    Ok(spec)
}

/// Settings for a single release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseSpec {
    pub family: NoiseFamily,
    /// `None` picks the family's default (the optimized sigma for LLN).
    pub shape: Option<f64>,
    pub epsilon: f64,
    pub m: usize,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub truncation: TruncationMode,
    pub delta: f64,
    pub omega: f64,
    pub seed: u64,
    pub clamp: bool,
}

fn parse_family(line: usize, v: &str) -> Result<NoiseFamily> {
    let alg: Algorithm = v.parse().map_err(|message| HarnessError::Config { line, message })?;
    alg.noise_family()
        .ok_or_else(|| HarnessError::Config { line, message: format!("{v:?} is not a noise family") })
}

pub fn release_spec(mut c: Config) -> Result<ReleaseSpec> {
    let (line, fam) = c.take("family").unwrap_or((0, "LLN".into()));
    let family = parse_family(line, &fam)?;
    let defaults = smoothtrim::CostOptions::default();
    let spec = ReleaseSpec {
        family,
        shape: c.get("shape")?,
        epsilon: c.get("eps")?.unwrap_or(1.0),
        m: c.get("m")?.unwrap_or(0),
        t: c.get("t")?.unwrap_or(0.1),
        a: c.get("a")?.unwrap_or(-50.0),
        b: c.get("b")?.unwrap_or(1050.0),
        truncation: match c.take("truncation") {
            Some((line, v)) => parse_mode(line, &v)?,
            None => TruncationMode::Input,
        },
        delta: c.get("delta")?.unwrap_or(defaults.delta),
        omega: c.get("omega")?.unwrap_or(defaults.omega),
        seed: c.get("seed")?.unwrap_or(0),
        clamp: c.get("clamp")?.unwrap_or(false),
    };
    c.finish()?;
    Ok(spec)
}

impl ReleaseSpec {
    pub fn noise(&self) -> Result<NoiseSpec> {
        Ok(match self.shape {
            Some(shape) => NoiseSpec::new(self.family, shape)?,
            None => smoothtrim::calibration::default_noise(self.family, self.epsilon, self.t)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_experiment() {
        let text = "# desk run\nn = 101\nreps=20\neps = 0.5\ndata = mixture\nweight = 0.2\n\
                    algorithms = LLN, TrimNonPrivate\nm_steps = 5\nt_count = 4 # short\nseed = 9\n";
        let spec = experiment_spec(Config::parse(text).unwrap()).unwrap();
        assert_eq!(spec.n, 101);
        assert_eq!(spec.m_grid, vec![0, 13, 25, 38, 50]);
        assert_eq!(spec.algorithms, vec![Algorithm::LLN, Algorithm::TrimNonPrivate]);
        assert_eq!(spec.t_grid.count, 4);
        assert!(matches!(spec.data, DataModel::GaussianMixture { weight, .. } if weight == 0.2));
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let e = experiment_spec(Config::parse("n = 10\nbogus = 1\n").unwrap()).unwrap_err();
        assert!(matches!(e, HarnessError::Config { line: 2, .. }), "{e}");
        assert!(Config::parse("n = 1\nn = 2\n").is_err());
        assert!(Config::parse("n 1\n").is_err());
        assert!(experiment_spec(Config::parse("n = ten\n").unwrap()).is_err());
        assert!(experiment_spec(Config::parse("m = 1\nm_steps = 3\n").unwrap()).is_err());
    }

    #[test]
    fn parses_release() {
        let r = release_spec(Config::parse("family = StudentT\nshape = 4\nm = 2\nt = 0.3\n").unwrap()).unwrap();
        assert_eq!(r.family, NoiseFamily::StudentT);
        assert_eq!(r.noise().unwrap().shape(), Some(4.0));
        assert!(release_spec(Config::parse("family = TrimNonPrivate\n").unwrap()).is_err());
    }
}
