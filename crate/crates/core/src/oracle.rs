//! Brute-force references on label grids: exact chain dynamic programming
//! and exhaustive minimization.

use crate::error::{Error, Result};
use crate::model::{Metric, Problem};
use crate::poly::{Interval, PiecewisePolynomial};
use crate::rounding::Labeling;

/// `points` equally spaced labels spanning the domain, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    points: usize,
}

impl GridSpec {
    pub fn new(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidInput("a grid needs at least two points".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn labels(&self, iv: &Interval) -> Vec<f64> {
        let g = self.points;
        (0..g)
            .map(|i| if i + 1 == g { iv.b } else { iv.a + iv.width() * i as f64 / (g - 1) as f64 })
            .collect()
    }
}

/// Exhaustive minimum over the grid; ties go to the smaller label.
pub fn grid_min(f: &PiecewisePolynomial, grid: GridSpec) -> (f64, f64) {
    grid.labels(&f.domain()).into_iter().map(|x| (x, f.eval(x))).fold((f64::NAN, f64::INFINITY), |best, c| {
        if c.1 < best.1 {
            c
        } else {
            best
        }
    })
}

/// `out[i] = min_j cost[j] + w * d(l_i, l_j)` for sorted labels, exact.
fn min_convolve(cost: &[f64], labels: &[f64], metric: Metric, w: f64) -> (Vec<f64>, Vec<usize>) {
    let g = cost.len();
    let mut val = cost.to_vec();
    let mut arg: Vec<usize> = (0..g).collect();
    match metric {
        Metric::Tv => {
            for i in 1..g {
                let cand = val[i - 1] + w * (labels[i] - labels[i - 1]);
                if cand < val[i] {
                    val[i] = cand;
                    arg[i] = arg[i - 1];
                }
            }
            for i in (0..g - 1).rev() {
                let cand = val[i + 1] + w * (labels[i + 1] - labels[i]);
                if cand < val[i] {
                    val[i] = cand;
                    arg[i] = arg[i + 1];
                }
            }
        }
        Metric::Potts => {
            let (jmin, vmin) = cost.iter().copied().enumerate().fold((0, f64::INFINITY), |b, (j, v)| if v < b.1 { (j, v) } else { b });
            for i in 0..g {
                if vmin + w < val[i] {
                    val[i] = vmin + w;
                    arg[i] = jmin;
                }
            }
        }
    }
    (val, arg)
}

/// Exact minimizer of the energy restricted to grid labels on a path graph.
pub fn dp_chain(problem: &Problem, grid: GridSpec) -> Result<(Labeling, f64)> {
    let g = problem.graph();
    let order = g.path_order().ok_or(Error::NotAChain)?;
    let labels = grid.labels(&problem.config().domain());
    let unary = |u: usize| -> Vec<f64> { labels.iter().map(|&x| problem.unaries()[u].eval(x)).collect() };
    let weight = |a: usize, b: usize| -> f64 {
        g.edges()
            .iter()
            .position(|&(u, v)| (u, v) == (a, b) || (u, v) == (b, a))
            .map(|e| problem.edge_weights()[e])
            .expect("consecutive path vertices share an edge")
    };
    // forward messages: acc[i] = best energy of the prefix ending in label i
    let mut acc = unary(order[0]);
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(order.len());
    for w in order.windows(2) {
        let (msg, arg) = min_convolve(&acc, &labels, problem.metric(), weight(w[0], w[1]));
        let un = unary(w[1]);
        acc = msg.iter().zip(&un).map(|(a, b)| a + b).collect();
        back.push(arg);
    }
    let (mut best, value) = acc.iter().copied().enumerate().fold((0, f64::INFINITY), |b, (i, v)| if v < b.1 { (i, v) } else { b });
    let mut x = vec![0.0; g.num_vertices()];
    x[*order.last().unwrap()] = labels[best];
    for (step, arg) in back.iter().enumerate().rev() {
        best = arg[best];
        x[order[step]] = labels[best];
    }
    Ok((x, value))
}

/// Value of the local-polytope LP over grid labels on a chain. For TV on
/// ordered labels the pairwise terms are submodular, so the LP is tight
/// and this equals the [`dp_chain`] value.
pub fn relaxation_value_chain(problem: &Problem, grid: GridSpec) -> Result<f64> {
    if problem.metric() != Metric::Tv {
        return Err(Error::InvalidInput("the chain LP equivalence holds for TV only".into()));
    }
    Ok(dp_chain(problem, grid)?.1)
}
