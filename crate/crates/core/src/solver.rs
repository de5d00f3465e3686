//! Primal-dual hybrid gradient on assembled conic programs, feasibility
//! post-processing of the edge duals, and exact dual-energy evaluation.

use crate::cones::{project_psd_svec, PsdScratch, SosTemplate, SymmetricMatrix, packed_len, packed_index};
use crate::error::{Error, Result};
use crate::graph::{divergence, gradient, CoeffField, DualCoefficients};
use crate::model::{assemble, Block, ConeKind, ConicProgram, DualConfig, EdgeRow, EdgeTemplate, Layout, Metric, Problem, ProgramBuilder};
use crate::poly::{minimize_on_interval, Interval, Polynomial, ROOT_TOL};
use crate::rounding::{round_mode_mean, rounded_energy, Labeling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Residual magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e8;
/// Relative slack accepted by the Lipschitz check in [`dual_energy`].
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Scalar primal step; `None` picks `0.99 / ||B||` (ignored when
    /// preconditioning).
    pub tau: Option<f64>,
    /// Scalar dual step, as `tau`.
    pub sigma: Option<f64>,
    pub theta: f64,
    pub check_every: usize,
    /// Stop once both relative iterate changes fall below this.
    pub rel_tol: f64,
    /// Stop once the best rounded energy is within this relative distance of
    /// the best dual energy (the relaxation is then solved exactly).
    pub gap_tol: f64,
    /// Block-constant diagonal step sizes from the row/column sums of `B`.
    pub precondition: bool,
    /// Ratio between primal and dual step scales when preconditioning.
    pub primal_weight: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tau: None,
            sigma: None,
            theta: 1.0,
            check_every: 100,
            rel_tol: 1e-6,
            gap_tol: 1e-9,
            precondition: true,
            primal_weight: 1.0,
        }
    }
}

/// One logged check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// Energy of the post-processed current dual (a valid lower bound).
    pub dual_energy: f64,
    /// Energy of the mode-mean rounding of the current moments.
    pub rounded_energy: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Moments of the last iterate, per vertex.
    pub moments: CoeffField,
    /// Best feasible dual seen.
    pub dual: DualCoefficients,
    pub dual_energy: f64,
    /// Filled in by [`relaxed_objective`] on demand.
    pub relaxed_objective: Option<f64>,
    /// Lowest-energy rounding seen.
    pub labels: Labeling,
    pub rounded_energy: f64,
    pub history: Vec<HistoryEntry>,
    pub iterations: usize,
    pub converged: bool,
    pub(crate) x: Vec<f64>,
    pub(crate) z: Vec<f64>,
}

/// Initial moments and/or duals, shaped for the target problem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WarmStart {
    pub moments: Option<CoeffField>,
    pub dual: Option<DualCoefficients>,
    /// A labeling to start the best-rounding record from.
    pub labels: Option<Labeling>,
}

impl WarmStart {
    /// Re-expresses a solution of `from` on the (nested) subspace of `to`:
    /// the knots of `to` must refine those of `from` and its degree must not
    /// be lower. The dual is carried over exactly, so its energy is kept.
    pub fn from_solution(sol: &Solution, from: &Problem, to: &Problem) -> Result<Self> {
        let (cf, ct) = (from.config(), to.config());
        if ct.deg() < cf.deg() || from.graph() != to.graph() {
            return Err(Error::ConfigMismatch("warm start needs the same graph and a degree that does not drop".into()));
        }
        let parent = parent_pieces(cf, ct)?;
        let (ne, kt, wt) = (to.graph().num_edges(), ct.pieces(), ct.deg() + 1);
        let mut dual = CoeffField::zeros(ne, kt, wt);
        for e in 0..ne {
            for (k, &pk) in parent.iter().enumerate() {
                let (big, small) = (cf.piece_interval(pk), ct.piece_interval(k));
                let q = Polynomial::new(sol.dual.piece(e, pk).to_vec());
                let alpha = (small.center() - big.center()) / big.half_width();
                let beta = small.half_width() / big.half_width();
                let r = q.compose_affine(alpha, beta).padded(wt - 1);
                dual.piece_mut(e, k).copy_from_slice(&r.coeffs()[..wt]);
            }
        }
        let mt = to.moment_deg();
        let mut moments = CoeffField::zeros(to.graph().num_vertices(), kt, mt + 1);
        for u in 0..to.graph().num_vertices() {
            for pk in 0..cf.pieces() {
                let m = sol.moments.piece(u, pk);
                let mass = m[0].max(0.0);
                if mass <= 0.0 {
                    continue;
                }
                let big = cf.piece_interval(pk);
                let x = big.clamp(big.from_local((m[1] / mass).clamp(-1.0, 1.0)));
                let k = parent
                    .iter()
                    .enumerate()
                    .find(|&(k, &p)| p == pk && x <= ct.knots()[k + 1])
                    .or_else(|| parent.iter().enumerate().rev().find(|&(_, &p)| p == pk))
                    .map(|(k, _)| k)
                    .expect("every parent has a child");
                let s = ct.piece_interval(k).to_local(x).clamp(-1.0, 1.0);
                for (j, v) in moments.piece_mut(u, k).iter_mut().enumerate() {
                    *v += mass * s.powi(j as i32);
                }
            }
        }
        Ok(Self { moments: Some(moments), dual: Some(dual), labels: Some(sol.labels.clone()) })
    }
}

/// For every piece of `fine`, the piece of `coarse` containing it.
fn parent_pieces(coarse: &DualConfig, fine: &DualConfig) -> Result<Vec<usize>> {
    let eps = 1e-12 * coarse.domain().width().max(1.0);
    (0..fine.pieces())
        .map(|k| {
            let iv = fine.piece_interval(k);
            (0..coarse.pieces())
                .find(|&p| {
                    let c = coarse.piece_interval(p);
                    iv.a >= c.a - eps && iv.b <= c.b + eps
                })
                .ok_or_else(|| Error::ConfigMismatch("knots are not a refinement".into()))
        })
        .collect()
}

/// Iteration state of PDHG on one program.
pub(crate) struct Engine<'a> {
    prog: &'a ConicProgram,
    tau: Vec<f64>,
    sigma: Vec<f64>,
    theta: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    x_bar: Vec<f64>,
    x_prev: Vec<f64>,
    z_prev: Vec<f64>,
    bx: Vec<f64>,
    btz: Vec<f64>,
    scratch: PsdScratch,
}

impl<'a> Engine<'a> {
    pub fn new(prog: &'a ConicProgram, opts: &SolverOptions) -> Result<Self> {
        if !(0.0..=1.0).contains(&opts.theta) {
            return Err(Error::InvalidInput(format!("theta {} outside [0, 1]", opts.theta)));
        }
        let (nx, nz) = (prog.nx(), prog.nz());
        let (tau, sigma) = if opts.precondition && opts.tau.is_none() && opts.sigma.is_none() {
            diagonal_steps(prog, opts.primal_weight)
        } else {
            let norm = operator_norm(prog);
            let safe = if norm > 0.0 { 0.99 / norm } else { 1.0 };
            let tau = opts.tau.unwrap_or(safe);
            let sigma = opts.sigma.unwrap_or(safe);
            if tau <= 0.0 || sigma <= 0.0 || tau * sigma * norm * norm > 1.0 {
                return Err(Error::StepSizeViolation { tau, sigma, norm });
            }
            (vec![tau; nx], vec![sigma; nz])
        };
        Ok(Self {
            prog,
            tau,
            sigma,
            theta: opts.theta,
            x: vec![0.0; nx],
            z: vec![0.0; nz],
            x_bar: vec![0.0; nx],
            x_prev: vec![0.0; nx],
            z_prev: vec![0.0; nz],
            bx: vec![0.0; nz],
            btz: vec![0.0; nx],
            scratch: PsdScratch::default(),
        })
    }

    /// Projects the current point and resets the extrapolation.
    pub fn reset(&mut self) -> Result<()> {
        project(&self.prog.x_blocks, &mut self.x, &self.tau, &mut self.scratch)?;
        project(&self.prog.z_blocks, &mut self.z, &self.sigma, &mut self.scratch)?;
        self.x_bar.copy_from_slice(&self.x);
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        let p = self.prog;
        self.z_prev.copy_from_slice(&self.z);
        p.b.mul_into(&self.x_bar, &mut self.bx);
        for i in 0..self.z.len() {
            self.z[i] += self.sigma[i] * (self.bx[i] - p.d[i]);
        }
        project(&p.z_blocks, &mut self.z, &self.sigma, &mut self.scratch)?;

        self.x_prev.copy_from_slice(&self.x);
        p.bt.mul_into(&self.z, &mut self.btz);
        for j in 0..self.x.len() {
            self.x[j] -= self.tau[j] * (p.c[j] + self.btz[j]);
        }
        project(&p.x_blocks, &mut self.x, &self.tau, &mut self.scratch)?;
        for j in 0..self.x.len() {
            self.x_bar[j] = self.x[j] + self.theta * (self.x[j] - self.x_prev[j]);
        }
        Ok(())
    }

    /// Relative changes of the last step, primal then dual.
    pub fn residuals(&self) -> (f64, f64) {
        (rel_change(&self.x, &self.x_prev), rel_change(&self.z, &self.z_prev))
    }
}

fn rel_change(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / n.max(1.0)
}

fn project(blocks: &[Block], v: &mut [f64], steps: &[f64], scratch: &mut PsdScratch) -> Result<()> {
    for b in blocks {
        match b.kind {
            ConeKind::Free => {}
            ConeKind::Psd(n) => project_psd_svec(&mut v[b.start..b.start + b.len], n, scratch)?,
            ConeKind::SumToOne { stride, count } => {
                // Projection in the metric of the (diagonal) step sizes.
                let idx = (0..count).map(|k| b.start + k * stride);
                let (s, w) = idx.clone().fold((0.0, 0.0), |(s, w), i| (s + v[i], w + steps[i]));
                let lambda = (s - 1.0) / w;
                for i in idx {
                    v[i] -= steps[i] * lambda;
                }
            }
        }
    }
    Ok(())
}

/// Diagonal steps `tau_j = 1 / (w * sum_i |B_ij|)`, `sigma_i = w / sum_j |B_ij|`,
/// made constant on PSD blocks by taking the most conservative entry.
fn diagonal_steps(prog: &ConicProgram, weight: f64) -> (Vec<f64>, Vec<f64>) {
    let inv = |s: f64| if s > 0.0 { 1.0 / s } else { 1.0 };
    let mut tau: Vec<f64> = prog.bt.row_abs_sums().into_iter().map(|s| 0.99 * inv(s) / weight).collect();
    let mut sigma: Vec<f64> = prog.b.row_abs_sums().into_iter().map(|s| inv(s) * weight).collect();
    for (blocks, steps) in [(&prog.x_blocks, &mut tau), (&prog.z_blocks, &mut sigma)] {
        for b in blocks.iter() {
            if let ConeKind::Psd(_) = b.kind {
                let seg = &mut steps[b.start..b.start + b.len];
                let m = seg.iter().copied().fold(f64::INFINITY, f64::min);
                seg.iter_mut().for_each(|s| *s = m);
            }
        }
    }
    (tau, sigma)
}

/// Power-iteration estimate of `||B||`, inflated by 1%.
pub fn operator_norm(prog: &ConicProgram) -> f64 {
    let nx = prog.nx();
    if nx == 0 || prog.b.nnz() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b5e);
    let mut x: Vec<f64> = (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut bx = vec![0.0; prog.nz()];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= n);
        prog.b.mul_into(&x, &mut bx);
        prog.bt.mul_into(&bx, &mut x);
        lambda = bx.iter().map(|v| v * v).sum::<f64>();
    }
    lambda.sqrt() * 1.01
}

/// Moves an edge dual into its Lipschitz set. TV: constants are shifted so
/// that `lambda(a) = 0` and adjacent pieces meet, then everything is scaled
/// by `1 / max(1, L / weight)` with `L` the exact largest slope. Potts: the
/// exact range is shifted, or affinely squeezed, into `[0, weight]`.
pub(crate) fn feasible_edge(block: &mut [f64], metric: Metric, cfg: &DualConfig, weight: f64) {
    let w = cfg.deg() + 1;
    let unit = Interval::unit();
    match metric {
        Metric::Tv => {
            let mut prev_end = 0.0;
            let mut slope = 0.0f64;
            for k in 0..cfg.pieces() {
                let q = &mut block[k * w..(k + 1) * w];
                let start: f64 = q.iter().enumerate().map(|(j, c)| if j % 2 == 0 { *c } else { -c }).sum();
                q[0] += prev_end - start;
                prev_end = q.iter().sum();
                let dq = Polynomial::new(q.to_vec()).derivative();
                let lo = minimize_on_interval(&dq, &unit, ROOT_TOL).1;
                let hi = -minimize_on_interval(&-&dq, &unit, ROOT_TOL).1;
                slope = slope.max(hi.max(-lo) / cfg.piece_interval(k).half_width());
            }
            if slope > weight {
                let s = weight / slope;
                block.iter_mut().for_each(|c| *c *= s);
            }
        }
        Metric::Potts => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..cfg.pieces() {
                let q = Polynomial::new(block[k * w..(k + 1) * w].to_vec());
                lo = lo.min(minimize_on_interval(&q, &unit, ROOT_TOL).1);
                hi = hi.max(-minimize_on_interval(&-&q, &unit, ROOT_TOL).1);
            }
            let (scale, shift) = if hi - lo > weight {
                (weight / (hi - lo), -lo)
            } else if lo < 0.0 {
                (1.0, -lo)
            } else if hi > weight {
                (1.0, weight - hi)
            } else {
                (1.0, 0.0)
            };
            for k in 0..cfg.pieces() {
                let q = &mut block[k * w..(k + 1) * w];
                q[0] += shift;
                q.iter_mut().for_each(|c| *c *= scale);
            }
        }
    }
}

/// Post-processes `p` into the feasible set, edge by edge.
pub fn make_dual_feasible(p: &DualCoefficients, problem: &Problem) -> DualCoefficients {
    let mut out = p.clone();
    for e in 0..p.num_blocks() {
        feasible_edge(out.block_mut(e), problem.metric(), problem.config(), problem.edge_weights()[e]);
    }
    out
}

/// Exact Lipschitz check of one edge dual; returns the violation, if any.
fn edge_violation(block: &[f64], metric: Metric, cfg: &DualConfig, weight: f64) -> Option<String> {
    let w = cfg.deg() + 1;
    let unit = Interval::unit();
    let tol = FEASIBILITY_TOL * weight.max(1.0);
    match metric {
        Metric::Tv => {
            for k in 0..cfg.pieces() {
                let q = Polynomial::new(block[k * w..(k + 1) * w].to_vec());
                let dq = q.derivative();
                let h = cfg.piece_interval(k).half_width();
                let lo = minimize_on_interval(&dq, &unit, ROOT_TOL).1;
                let hi = -minimize_on_interval(&-&dq, &unit, ROOT_TOL).1;
                if hi.max(-lo) / h > weight + tol {
                    return Some(format!("slope {} on piece {k} exceeds {weight}", hi.max(-lo) / h));
                }
                if k + 1 < cfg.pieces() {
                    let next = Polynomial::new(block[(k + 1) * w..(k + 2) * w].to_vec());
                    let jump = q.eval(1.0) - next.eval(-1.0);
                    if jump.abs() > tol {
                        return Some(format!("jump {jump} at knot {}", k + 1));
                    }
                }
            }
        }
        Metric::Potts => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..cfg.pieces() {
                let q = Polynomial::new(block[k * w..(k + 1) * w].to_vec());
                lo = lo.min(minimize_on_interval(&q, &unit, ROOT_TOL).1);
                hi = hi.max(-minimize_on_interval(&-&q, &unit, ROOT_TOL).1);
            }
            if hi - lo > weight + tol {
                return Some(format!("range {} exceeds {weight}", hi - lo));
            }
        }
    }
    None
}

/// `sum_u min_x f_u(x) - (Div p)_u(x)`, each piece minimized exactly.
/// Fails with `InfeasibleDual` when `p` violates its Lipschitz bound.
pub fn dual_energy(p: &DualCoefficients, problem: &Problem) -> Result<f64> {
    for e in 0..p.num_blocks() {
        if let Some(msg) = edge_violation(p.block(e), problem.metric(), problem.config(), problem.edge_weights()[e]) {
            return Err(Error::InfeasibleDual(format!("edge {e}: {msg}")));
        }
    }
    energy_unchecked(p, problem)
}

fn energy_unchecked(p: &DualCoefficients, problem: &Problem) -> Result<f64> {
    let cfg = problem.config();
    let expected = (problem.graph().num_edges(), cfg.pieces(), cfg.deg() + 1);
    if (p.num_blocks(), p.pieces(), p.width()) != expected {
        return Err(Error::ShapeMismatch(format!("dual of shape {:?}, expected {:?}", (p.num_blocks(), p.pieces(), p.width()), expected)));
    }
    let div = divergence(problem.graph(), p)?;
    let unit = Interval::unit();
    let mut total = 0.0;
    for u in 0..problem.graph().num_vertices() {
        let mut best = f64::INFINITY;
        for k in 0..cfg.pieces() {
            let mut c = problem.local_unary(u, k).coeffs().to_vec();
            for (cj, dj) in c.iter_mut().zip(div.piece(u, k)) {
                *cj -= dj;
            }
            best = best.min(minimize_on_interval(&Polynomial::new(c), &unit, ROOT_TOL).1);
        }
        total += best;
    }
    Ok(total)
}

/// Assembles and solves from the default starting point.
pub fn solve(problem: &Problem, opts: &SolverOptions) -> Result<Solution> {
    let prog = assemble(problem)?;
    pdhg_solve(&prog, problem, opts)
}

pub fn pdhg_solve(program: &ConicProgram, problem: &Problem, opts: &SolverOptions) -> Result<Solution> {
    pdhg_solve_with(program, problem, opts, None, None)
}

/// PDHG with an optional warm start and progress callback
/// `(iteration, dual_energy, primal_residual, dual_residual)`.
pub fn pdhg_solve_with(
    program: &ConicProgram,
    problem: &Problem,
    opts: &SolverOptions,
    warm: Option<&WarmStart>,
    mut callback: Option<&mut dyn FnMut(usize, f64, f64, f64)>,
) -> Result<Solution> {
    let l = program.layout;
    let cfg = problem.config();
    let expect = Layout {
        vertices: problem.graph().num_vertices(),
        edges: problem.graph().num_edges(),
        pieces: cfg.pieces(),
        moment_deg: problem.moment_deg(),
        dual_deg: cfg.deg(),
    };
    if l != expect {
        return Err(Error::ShapeMismatch("program was assembled for a different problem".into()));
    }
    let mut eng = Engine::new(program, opts)?;
    let y_width = l.moment_deg + 1;
    for u in 0..l.vertices {
        for k in 0..l.pieces {
            eng.x[(u * l.pieces + k) * y_width] = 1.0 / l.pieces as f64;
        }
    }
    if let Some(w) = warm {
        if let Some(m) = &w.moments {
            if m.data().len() != l.y_len() || m.width() != y_width {
                return Err(Error::ShapeMismatch("warm-start moments".into()));
            }
            eng.x[..l.y_len()].copy_from_slice(m.data());
        }
        if let Some(p) = &w.dual {
            if p.data().len() != l.p_len() || p.width() != l.dual_deg + 1 {
                return Err(Error::ShapeMismatch("warm-start dual".into()));
            }
            eng.z[..l.p_len()].copy_from_slice(p.data());
        }
    }
    eng.reset()?;

    let mut best_dual = make_dual_feasible(&program.dual(&eng.z), problem);
    let mut best_energy = energy_unchecked(&best_dual, problem)?;
    let mut best_labels = round_mode_mean(&program.moments(&eng.x), cfg)?;
    let mut best_rounded = rounded_energy(&best_labels, problem);
    if let Some(x) = warm.and_then(|w| w.labels.as_ref()) {
        if x.len() != l.vertices {
            return Err(Error::ShapeMismatch("warm-start labels".into()));
        }
        let e = rounded_energy(x, problem);
        if e < best_rounded {
            best_rounded = e;
            best_labels = x.clone();
        }
    }
    let mut history = vec![HistoryEntry {
        iteration: 0,
        dual_energy: best_energy,
        rounded_energy: best_rounded,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
    }];
    let check_every = opts.check_every.max(1);
    let mut converged = false;
    let mut it = 0;
    while it < opts.max_iters {
        eng.step()?;
        it += 1;
        if it % check_every != 0 && it != opts.max_iters {
            continue;
        }
        let (rp, rd) = eng.residuals();
        if !rp.is_finite() || !rd.is_finite() || rp > DIVERGENCE_LIMIT || rd > DIVERGENCE_LIMIT {
            return Err(Error::Diverged(it));
        }
        let pf = make_dual_feasible(&program.dual(&eng.z), problem);
        let de = energy_unchecked(&pf, problem)?;
        if de > best_energy {
            best_energy = de;
            best_dual = pf;
        }
        let labels = round_mode_mean(&program.moments(&eng.x), cfg)?;
        let re = rounded_energy(&labels, problem);
        if re < best_rounded {
            best_rounded = re;
            best_labels = labels;
        }
        history.push(HistoryEntry { iteration: it, dual_energy: de, rounded_energy: re, primal_residual: rp, dual_residual: rd });
        if let Some(cb) = callback.as_mut() {
            cb(it, de, rp, rd);
        }
        let gap = best_rounded - best_energy;
        if gap <= opts.gap_tol * best_energy.abs().max(1.0) || (rp < opts.rel_tol && rd < opts.rel_tol) {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        moments: program.moments(&eng.x),
        dual: best_dual,
        dual_energy: best_energy,
        relaxed_objective: None,
        labels: best_labels,
        rounded_energy: best_rounded,
        history,
        iterations: it,
        converged,
        x: eng.x,
        z: eng.z,
    })
}

/// Solves a sequence of problems, warm-starting each from its predecessor
/// when [`WarmStart::from_solution`] accepts the pair. With nested dual
/// spaces the reported dual energies are then nondecreasing.
pub fn solve_hierarchy(problems: &[Problem], opts: &SolverOptions) -> Result<Vec<Solution>> {
    let mut out: Vec<Solution> = Vec::with_capacity(problems.len());
    for (i, p) in problems.iter().enumerate() {
        let prog = assemble(p)?;
        let warm = match i {
            0 => None,
            _ => WarmStart::from_solution(&out[i - 1], &problems[i - 1], p).ok(),
        };
        out.push(pdhg_solve_with(&prog, p, opts, warm.as_ref(), None)?);
    }
    Ok(out)
}

/// `max <p, delta>` over one edge's Lipschitz set with unit weight, from
/// below: the best post-processed feasible iterate is reported.
pub fn support_lipschitz(delta: &[f64], problem: &Problem, opts: &SolverOptions) -> Result<f64> {
    let cfg = problem.config();
    let tpl = EdgeTemplate::new(problem.metric(), cfg);
    if delta.len() != tpl.p_len {
        return Err(Error::LengthMismatch { expected: tpl.p_len, got: delta.len() });
    }
    if delta.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut bld = ProgramBuilder::default();
    let p0 = bld.z_block(tpl.p_len, ConeKind::Free);
    for (i, &v) in delta.iter().enumerate() {
        bld.set_d(p0 + i, -v);
    }
    bld.edge_constraints(&tpl, 1.0, |i| p0 + i);
    let layout = Layout { vertices: 0, edges: 1, pieces: cfg.pieces(), moment_deg: cfg.deg(), dual_deg: cfg.deg() };
    let prog = bld.build(layout);
    let mut eng = Engine::new(&prog, opts)?;
    eng.reset()?;
    let value = |z: &[f64]| {
        let mut p = z[..tpl.p_len].to_vec();
        feasible_edge(&mut p, problem.metric(), cfg, 1.0);
        p.iter().zip(delta).map(|(a, b)| a * b).sum::<f64>()
    };
    let mut best = value(&eng.z);
    let check = opts.check_every.max(1);
    for it in 1..=opts.max_iters {
        eng.step()?;
        if it % check == 0 || it == opts.max_iters {
            let (rp, rd) = eng.residuals();
            if !rp.is_finite() || !rd.is_finite() || rp > DIVERGENCE_LIMIT || rd > DIVERGENCE_LIMIT {
                return Err(Error::Diverged(it));
            }
            best = best.max(value(&eng.z));
            if rp < opts.rel_tol && rd < opts.rel_tol {
                break;
            }
        }
    }
    Ok(best)
}

/// `<y, w> + sum_e w_e sigma_K((grad y)_e)`, one conic solve per edge.
pub fn relaxed_objective(moments: &CoeffField, problem: &Problem, opts: &SolverOptions) -> Result<f64> {
    let cfg = problem.config();
    let mut total = 0.0;
    for u in 0..moments.num_blocks() {
        for k in 0..cfg.pieces() {
            total += moments.piece(u, k).iter().zip(problem.local_unary(u, k).coeffs()).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let d = cfg.deg();
    let mut trunc = CoeffField::zeros(moments.num_blocks(), cfg.pieces(), d + 1);
    for u in 0..moments.num_blocks() {
        for k in 0..cfg.pieces() {
            trunc.piece_mut(u, k).copy_from_slice(&moments.piece(u, k)[..=d]);
        }
    }
    let grad = gradient(problem.graph(), &trunc)?;
    for e in 0..grad.num_blocks() {
        total += problem.edge_weights()[e] * support_lipschitz(grad.block(e), problem, opts)?;
    }
    Ok(total)
}

/// Lower bound on `min p` over an interval from an SOS certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SosBound {
    /// Last iterate of the certificate offset.
    pub gamma: f64,
    /// `gamma` minus the coefficient residual of the certificate: a rigorous
    /// lower bound on `min p`.
    pub certified: f64,
    pub iterations: usize,
}

/// Maximizes `gamma` such that `p - gamma` has a nonnegativity certificate
/// on `iv`. Stops early once `certified >= stop_above`.
pub fn sos_lower_bound(p: &Polynomial, iv: &Interval, opts: &SolverOptions, stop_above: f64) -> Result<SosBound> {
    let q = p.to_local(iv).trimmed();
    let deg = q.degree();
    if deg == 0 {
        return Ok(SosBound { gamma: q.coeff(0), certified: q.coeff(0), iterations: 0 });
    }
    let tpl = SosTemplate::new(deg, &Interval::unit());
    let mut rows: Vec<EdgeRow> =
        (0..=deg).map(|k| EdgeRow { p_terms: Vec::new(), gram_terms: Vec::new(), constant: q.coeff(k) }).collect();
    rows[0].p_terms.push((0, -1.0));
    for (b, i, j, k, m) in tpl.coefficient_terms() {
        rows[k].gram_terms.push((b, i, j, -m));
    }
    let grams: Vec<usize> = tpl.blocks.iter().map(|(d, _)| *d).collect();
    let etpl = EdgeTemplate { p_len: 1, grams: grams.clone(), rows };
    let mut bld = ProgramBuilder::default();
    let g = bld.z_block(1, ConeKind::Free);
    bld.set_d(g, -1.0);
    bld.edge_constraints(&etpl, 1.0, |_| g);
    let prog = bld.build(Layout { vertices: 0, edges: 0, pieces: 0, moment_deg: 0, dual_deg: 0 });
    let mut eng = Engine::new(&prog, opts)?;
    eng.reset()?;

    let certify = |z: &[f64]| {
        let gamma = z[0];
        let mut off = 1;
        let mats: Vec<SymmetricMatrix> = grams
            .iter()
            .map(|&n| {
                let s = &z[off..off + packed_len(n)];
                off += packed_len(n);
                SymmetricMatrix::from_fn(n, |i, j| {
                    let v = s[packed_index(n, i, j)];
                    if i == j { v } else { v / std::f64::consts::SQRT_2 }
                })
            })
            .collect();
        let cert = tpl.polynomial(&mats);
        let resid: f64 = (0..=deg).map(|k| (q.coeff(k) - cert.coeff(k) - if k == 0 { gamma } else { 0.0 }).abs()).sum();
        (gamma, gamma - resid)
    };
    let (mut gamma, mut best) = certify(&eng.z);
    let check = opts.check_every.max(1);
    let mut it = 0;
    while it < opts.max_iters && best < stop_above {
        eng.step()?;
        it += 1;
        if it % check == 0 || it == opts.max_iters {
            let (rp, rd) = eng.residuals();
            if !rp.is_finite() || !rd.is_finite() || rp > DIVERGENCE_LIMIT || rd > DIVERGENCE_LIMIT {
                return Err(Error::Diverged(it));
            }
            let (g, c) = certify(&eng.z);
            gamma = g;
            best = best.max(c);
            if rp < opts.rel_tol && rd < opts.rel_tol {
                break;
            }
        }
    }
    Ok(SosBound { gamma, certified: best, iterations: it })
}

/// Whether `p >= -tol` on `iv` is certified by sums of squares.
pub fn sos_nonneg(p: &Polynomial, iv: &Interval, tol: f64, opts: &SolverOptions) -> Result<bool> {
    Ok(sos_lower_bound(p, iv, opts, -tol)?.certified >= -tol)
}
