//! Flat `key = value` run configuration. `#` starts a comment; unknown keys
//! are rejected so typos surface early.

use crate::error::{CliError, Result};
use moment_mrf::model::Metric;
use moment_mrf::poly::Interval;
use moment_mrf::rounding::MeanVariant;
use moment_mrf::solver::SolverOptions;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    ModeMean,
    Mean(MeanVariant),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub metric: Metric,
    pub interval: Interval,
    pub width: usize,
    pub height: usize,
    /// `(pieces, degree)` per entry, solved in order; empty means one entry
    /// built from `pieces` and `degree`.
    pub hierarchy: Vec<(usize, usize)>,
    pub pieces: Option<usize>,
    pub degree: usize,
    /// Degree of the synthetic random unaries, or of the fitted pieces for
    /// cost volumes; the defaults are 4 and 3.
    pub unary_degree: Option<usize>,
    pub weight: f64,
    pub seed: u64,
    pub solver: SolverOptions,
    pub rounding: Rounding,
    /// Carry each entry's solution into the next.
    pub warm_start: bool,
    /// Write zero run times so that equal configs give equal CSV bytes.
    pub deterministic: bool,
    pub volume: Option<PathBuf>,
    pub output: PathBuf,
    /// Labels of a synthetic cost volume.
    pub labels: usize,
    /// Amplitude of uniform noise added to synthetic costs.
    pub noise: f64,
    /// Resolution of the chain oracle.
    pub grid_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Tv,
            interval: Interval::unit(),
            width: 8,
            height: 8,
            hierarchy: Vec::new(),
            pieces: None,
            degree: 1,
            unary_degree: None,
            weight: 1.0,
            seed: 0,
            solver: SolverOptions::default(),
            rounding: Rounding::ModeMean,
            warm_start: true,
            deterministic: false,
            volume: None,
            output: PathBuf::from("."),
            labels: 32,
            noise: 0.0,
            grid_points: 2001,
        }
    }
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("bad value {value:?} for {key}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // Relative paths are taken from the config file's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        if let Some(v) = cfg.volume.as_mut() {
            if v.is_relative() {
                *v = base.join(&*v);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut degree_given = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "metric" => {
                    cfg.metric = match value {
                        "tv" => Metric::Tv,
                        "potts" => Metric::Potts,
                        _ => return Err(bad(key, value)),
                    }
                }
                "interval" => {
                    let (a, b) = value.split_once(',').ok_or_else(|| bad(key, value))?;
                    cfg.interval = Interval::new(num(key, a)?, num(key, b)?).map_err(|_| bad(key, value))?;
                }
                "grid" => {
                    let (w, h) = value.split_once('x').ok_or_else(|| bad(key, value))?;
                    cfg.width = num(key, w)?;
                    cfg.height = num(key, h)?;
                }
                "pieces" => cfg.pieces = Some(num(key, value)?),
                "degree" => {
                    cfg.degree = num(key, value)?;
                    degree_given = true;
                }
                "hierarchy" => {
                    let entries = value
                        .split(',')
                        .map(|e| {
                            let (k, d) = e.split_once(':').ok_or_else(|| bad(key, value))?;
                            Ok((num(key, k)?, num(key, d)?))
                        })
                        .collect::<Result<Vec<(usize, usize)>>>()?;
                    cfg.hierarchy = entries;
                }
                "unary_degree" => cfg.unary_degree = Some(num(key, value)?),
                "weight" => cfg.weight = num(key, value)?,
                "seed" => cfg.seed = num(key, value)?,
                "max_iters" => cfg.solver.max_iters = num(key, value)?,
                "check_every" => cfg.solver.check_every = num(key, value)?,
                "rel_tol" => cfg.solver.rel_tol = num(key, value)?,
                "gap_tol" => cfg.solver.gap_tol = num(key, value)?,
                "precondition" => cfg.solver.precondition = num(key, value)?,
                "tau" => cfg.solver.tau = Some(num(key, value)?),
                "sigma" => cfg.solver.sigma = Some(num(key, value)?),
                "rounding" => {
                    cfg.rounding = match value {
                        "mode-mean" => Rounding::ModeMean,
                        "mean" => Rounding::Mean(MeanVariant::MomentMean),
                        "knot-mean" => Rounding::Mean(MeanVariant::KnotWeighted),
                        _ => return Err(bad(key, value)),
                    }
                }
                "warm_start" => cfg.warm_start = num(key, value)?,
                "deterministic" => cfg.deterministic = num(key, value)?,
                "volume" => cfg.volume = Some(PathBuf::from(value)),
                "output" => cfg.output = PathBuf::from(value),
                "labels" => cfg.labels = num(key, value)?,
                "noise" => cfg.noise = num(key, value)?,
                "grid_points" => cfg.grid_points = num(key, value)?,
                _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
            }
        }
        if !cfg.hierarchy.is_empty() && (cfg.pieces.is_some() || degree_given) {
            return Err(CliError::Config("give either hierarchy or pieces/degree".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The entries to solve, `default_pieces` filling in an unset `pieces`.
    pub fn entries(&self, default_pieces: usize) -> Vec<(usize, usize)> {
        if self.hierarchy.is_empty() {
            vec![(self.pieces.unwrap_or(default_pieces), self.degree)]
        } else {
            self.hierarchy.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.pieces == Some(0) || self.hierarchy.iter().any(|&(k, _)| k == 0) {
            return Err(CliError::Config("hierarchy entries need at least one piece".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CliError::Config("grid dimensions must be positive".into()));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(CliError::Config("weight must be finite and nonnegative".into()));
        }
        if self.labels < 2 || self.grid_points < 2 {
            return Err(CliError::Config("need at least two labels and grid points".into()));
        }
        Ok(())
    }
}
