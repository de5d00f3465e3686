//! The experiment drivers behind each subcommand.

use crate::config::{Rounding, RunConfig};
use crate::error::{CliError, Result};
use crate::volume::{pgm_bytes, CostVolume};
use moment_mrf::graph::{grid_graph, Graph};
use moment_mrf::model::{assemble, DualConfig, Problem};
use moment_mrf::oracle::{dp_chain, GridSpec};
use moment_mrf::poly::{fit_piecewise_under_approx, uniform_knots, Interval, PiecewisePolynomial};
use moment_mrf::rounding::{round_mean, rounded_energy, Labeling};
use moment_mrf::solver::{pdhg_solve_with, Solution, WarmStart};
use moment_mrf::synth::random_unaries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::time::Instant;

pub const CSV_HEADER: &str = "K,deg,dual_energy,rounded_energy,iters,seconds";
const SYNTH_UNARY_DEGREE: usize = 4;
const FIT_UNARY_DEGREE: usize = 3;
const STEREO_PIECES: usize = 30;

/// One solved hierarchy entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub pieces: usize,
    pub deg: usize,
    pub dual_energy: f64,
    pub rounded_energy: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub labels: Labeling,
}

pub fn csv(rows: &[Row], deterministic: bool) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        let secs = if deterministic { 0.0 } else { r.seconds };
        writeln!(out, "{},{},{:.9},{:.9},{},{:.3}", r.pieces, r.deg, r.dual_energy, r.rounded_energy, r.iterations, secs).unwrap();
    }
    out
}

fn synthetic_problem(cfg: &RunConfig, graph: &Graph, k: usize, deg: usize) -> Result<Problem> {
    let knots = uniform_knots(&cfg.interval, k);
    let deg_u = cfg.unary_degree.unwrap_or(SYNTH_UNARY_DEGREE);
    let unaries = random_unaries(graph.num_vertices(), deg_u, &knots, cfg.seed)?;
    let dual = DualConfig::for_metric(cfg.metric, knots, deg)?;
    Ok(Problem::with_edge_weights(graph.clone(), unaries, cfg.metric, dual, vec![cfg.weight; graph.num_edges()])?)
}

/// Per-pixel under-approximations of the costs on `k` uniform pieces.
pub fn volume_problem(cfg: &RunConfig, vol: &CostVolume, k: usize, deg: usize) -> Result<Problem> {
    let knots = uniform_knots(&vol.range, k);
    let deg_u = cfg.unary_degree.unwrap_or(FIT_UNARY_DEGREE);
    let unaries = (0..vol.height)
        .flat_map(|r| (0..vol.width).map(move |c| (r, c)))
        .map(|(r, c)| fit_piecewise_under_approx(&vol.samples(r, c), &knots, deg_u))
        .collect::<moment_mrf::Result<Vec<PiecewisePolynomial>>>()?;
    let graph = grid_graph(vol.width, vol.height);
    let dual = DualConfig::for_metric(cfg.metric, knots, deg)?;
    let w = vec![cfg.weight; graph.num_edges()];
    Ok(Problem::with_edge_weights(graph, unaries, cfg.metric, dual, w)?)
}

/// Labeling reported for a solution: the configured rounding of the final
/// moments, unless the solver already saw a cheaper one.
fn report_labels(sol: &Solution, problem: &Problem, rounding: Rounding) -> Result<(Labeling, f64)> {
    let best = (sol.labels.clone(), sol.rounded_energy);
    match rounding {
        Rounding::ModeMean => Ok(best),
        Rounding::Mean(v) => {
            let x = round_mean(&sol.moments, problem.config(), v)?;
            let e = rounded_energy(&x, problem);
            Ok(if e < best.1 { (x, e) } else { best })
        }
    }
}

/// Solves the problems in order, warm-starting each entry from the previous
/// one when configured and the spaces nest.
pub fn solve_entries(cfg: &RunConfig, problems: &[Problem]) -> Result<Vec<Row>> {
    let mut rows = Vec::with_capacity(problems.len());
    let mut prev: Option<Solution> = None;
    for (i, p) in problems.iter().enumerate() {
        let t = Instant::now();
        let warm = match (&prev, cfg.warm_start) {
            (Some(s), true) => WarmStart::from_solution(s, &problems[i - 1], p).ok(),
            _ => None,
        };
        let sol = pdhg_solve_with(&assemble(p)?, p, &cfg.solver, warm.as_ref(), None)?;
        let (labels, rounded) = report_labels(&sol, p, cfg.rounding)?;
        rows.push(Row {
            pieces: p.config().pieces(),
            deg: p.config().deg(),
            dual_energy: sol.dual_energy,
            rounded_energy: rounded,
            iterations: sol.iterations,
            seconds: t.elapsed().as_secs_f64(),
            labels,
        });
        prev = Some(sol);
    }
    Ok(rows)
}

fn write_output(cfg: &RunConfig, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(&cfg.output)?;
    std::fs::write(cfg.output.join(name), bytes)?;
    Ok(())
}

/// Seeded random unaries on a `width x height` grid; writes `hierarchy.csv`.
pub fn run_hierarchy(cfg: &RunConfig) -> Result<Vec<Row>> {
    let graph = grid_graph(cfg.width, cfg.height);
    let problems = cfg
        .entries(1)
        .iter()
        .map(|&(k, d)| synthetic_problem(cfg, &graph, k, d))
        .collect::<Result<Vec<_>>>()?;
    let rows = solve_entries(cfg, &problems)?;
    write_output(cfg, "hierarchy.csv", csv(&rows, cfg.deterministic).as_bytes())?;
    Ok(rows)
}

/// Fits and solves the configured cost volume; writes `stereo.csv` and
/// `disparity.pgm`, the latter from the last entry.
pub fn run_stereo(cfg: &RunConfig) -> Result<Vec<Row>> {
    let path = cfg.volume.as_ref().ok_or_else(|| CliError::Config("stereo needs volume = <path>".into()))?;
    let vol = CostVolume::read(path)?;
    let problems = cfg
        .entries(STEREO_PIECES)
        .iter()
        .map(|&(k, d)| volume_problem(cfg, &vol, k, d))
        .collect::<Result<Vec<_>>>()?;
    let rows = solve_entries(cfg, &problems)?;
    write_output(cfg, "stereo.csv", csv(&rows, cfg.deterministic).as_bytes())?;
    let last = rows.last().expect("at least one entry");
    write_output(cfg, "disparity.pgm", &pgm_bytes(&last.labels, vol.width, vol.height, &vol.range))?;
    Ok(rows)
}

/// Solver bound against the grid dynamic program on a chain of
/// `width * height` vertices; writes `oracle.csv`.
pub fn oracle_compare(cfg: &RunConfig) -> Result<String> {
    let graph = Graph::chain(cfg.width * cfg.height);
    let grid = GridSpec::new(cfg.grid_points)?;
    let problems = cfg
        .entries(1)
        .iter()
        .map(|&(k, d)| synthetic_problem(cfg, &graph, k, d))
        .collect::<Result<Vec<_>>>()?;
    let rows = solve_entries(cfg, &problems)?;
    let mut out = String::from("K,deg,dual_energy,dp_value,gap\n");
    for (r, p) in rows.iter().zip(&problems) {
        let dp = dp_chain(p, grid)?.1;
        writeln!(out, "{},{},{:.9},{:.9},{:.3e}", r.pieces, r.deg, r.dual_energy, dp, dp - r.dual_energy).unwrap();
    }
    write_output(cfg, "oracle.csv", out.as_bytes())?;
    Ok(out)
}

/// Ground-truth disparity plane of [`make_synth`].
pub fn synth_plane(width: usize, height: usize, range: &Interval) -> Vec<f64> {
    let frac = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
    (0..height)
        .flat_map(|r| (0..width).map(move |c| (r, c)))
        .map(|(r, c)| range.a + range.width() * (0.25 + 0.5 * (0.6 * frac(c, width) + 0.4 * frac(r, height))))
        .collect()
}

/// Quadratic costs around [`synth_plane`] plus seeded uniform noise;
/// writes `synth.mcv`.
pub fn make_synth(cfg: &RunConfig) -> Result<CostVolume> {
    let range = cfg.interval;
    let truth = synth_plane(cfg.width, cfg.height, &range);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels: Vec<f64> = (0..cfg.labels).map(|l| range.a + range.width() * l as f64 / (cfg.labels - 1) as f64).collect();
    let mut values = Vec::with_capacity(truth.len() * labels.len());
    for &d in &truth {
        for &x in &labels {
            let t = (x - d) / range.width();
            let n = if cfg.noise > 0.0 { rng.gen_range(0.0..cfg.noise) } else { 0.0 };
            values.push((10.0 * t * t + n) as f32);
        }
    }
    let vol = CostVolume::new(cfg.width, cfg.height, cfg.labels, range, values)?;
    write_output(cfg, "synth.mcv", &vol.to_bytes())?;
    Ok(vol)
}
