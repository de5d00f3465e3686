//! Problem data and its assembly into a conic saddle-point program
//!
//! ```text
//! min_{X in cone_X} max_{Z in cone_Z}  <c, X> + <Z, B X> - <d, Z>
//! ```
//!
//! For an MRF problem `X = (y, H, nu)` holds the per-piece moments, the
//! auxiliary Hankel matrices and the multipliers of the dual-side linear
//! equations; `Z = (p, G, eta)` holds the per-edge dual coefficients, the Gram
//! matrices certifying the Lipschitz bounds and the multipliers tying `H` to
//! the Hankel images of `y`. PSD variables are stored in scaled packed form.

use crate::cones::{moment_cone_description, packed_index, packed_len, ConeDescription, PsdMap, AffineEq, SosTemplate};
use crate::error::{Error, Result};
use crate::graph::{CoeffField, DualCoefficients, Graph};
use crate::poly::{validate_knots, Interval, PiecewisePolynomial, Polynomial};
use std::f64::consts::SQRT_2;

/// Pairwise distance `d(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// `|x - y|`
    Tv,
    /// `[x != y]`
    Potts,
}

impl Metric {
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match self {
            Metric::Tv => (x - y).abs(),
            Metric::Potts => {
                if (x - y).abs() > POTTS_EQUAL_TOL {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Labels closer than this are equal under the Potts metric.
pub const POTTS_EQUAL_TOL: f64 = 1e-9;

/// Piecewise-polynomial dual subspace: knots, per-piece degree, and whether
/// adjacent pieces must agree at shared knots.
#[derive(Debug, Clone, PartialEq)]
pub struct DualConfig {
    knots: Vec<f64>,
    deg: usize,
    continuity: bool,
}

impl DualConfig {
    pub fn new(knots: Vec<f64>, deg: usize, continuity: bool) -> Result<Self> {
        validate_knots(&knots)?;
        if deg < 1 {
            return Err(Error::DegreeTooSmall(deg));
        }
        Ok(Self { knots, deg, continuity })
    }

    /// Continuity on for TV, off for Potts.
    pub fn for_metric(metric: Metric, knots: Vec<f64>, deg: usize) -> Result<Self> {
        Self::new(knots, deg, metric == Metric::Tv)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn continuity(&self) -> bool {
        self.continuity
    }

    pub fn pieces(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn piece_interval(&self, k: usize) -> Interval {
        Interval { a: self.knots[k], b: self.knots[k + 1] }
    }

    pub fn domain(&self) -> Interval {
        Interval { a: self.knots[0], b: self.knots[self.knots.len() - 1] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    graph: Graph,
    unaries: Vec<PiecewisePolynomial>,
    metric: Metric,
    config: DualConfig,
    edge_weights: Vec<f64>,
    /// `local[u][k]`: unary of vertex `u` on piece `k` in local coordinates,
    /// padded to the moment degree.
    local: Vec<Vec<Polynomial>>,
    moment_deg: usize,
}

impl Problem {
    /// Unit edge weights. Unary knots must match the configured knots; a
    /// unary degree above the dual degree raises the moment degree instead
    /// of being rejected.
    pub fn new(graph: Graph, unaries: Vec<PiecewisePolynomial>, metric: Metric, config: DualConfig) -> Result<Self> {
        let w = vec![1.0; graph.num_edges()];
        Self::with_edge_weights(graph, unaries, metric, config, w)
    }

    pub fn with_edge_weights(
        graph: Graph,
        unaries: Vec<PiecewisePolynomial>,
        metric: Metric,
        config: DualConfig,
        edge_weights: Vec<f64>,
    ) -> Result<Self> {
        if unaries.len() != graph.num_vertices() {
            return Err(Error::LengthMismatch { expected: graph.num_vertices(), got: unaries.len() });
        }
        if edge_weights.len() != graph.num_edges() {
            return Err(Error::LengthMismatch { expected: graph.num_edges(), got: edge_weights.len() });
        }
        if edge_weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("edge weights must be positive".into()));
        }
        let span = config.domain().width();
        for (u, f) in unaries.iter().enumerate() {
            let same = f.knots().len() == config.knots.len()
                && f.knots().iter().zip(&config.knots).all(|(a, b)| (a - b).abs() <= 1e-12 * span.max(1.0));
            if !same {
                return Err(Error::ConfigMismatch(format!("unary {u} knots differ from the dual knots")));
            }
        }
        let unary_deg = unaries.iter().map(|f| f.max_degree()).max().unwrap_or(0);
        let moment_deg = config.deg.max(unary_deg);
        let local = unaries
            .iter()
            .map(|f| {
                (0..config.pieces())
                    .map(|k| {
                        let p = f.pieces()[k].trimmed().to_local(&config.piece_interval(k)).padded(moment_deg);
                        Polynomial::new(p.coeffs()[..=moment_deg].to_vec())
                    })
                    .collect()
            })
            .collect();
        Ok(Self { graph, unaries, metric, config, edge_weights, local, moment_deg })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn unaries(&self) -> &[PiecewisePolynomial] {
        &self.unaries
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn config(&self) -> &DualConfig {
        &self.config
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    /// Degree of the moment blocks: the larger of the dual and unary degrees.
    pub fn moment_deg(&self) -> usize {
        self.moment_deg
    }

    /// Unary of `u` on piece `k` in local coordinates, `moment_deg + 1` coefficients.
    pub fn local_unary(&self, u: usize, k: usize) -> &Polynomial {
        &self.local[u][k]
    }

    /// Same problem with every edge weight multiplied by `gamma`.
    pub fn scaled_weights(&self, gamma: f64) -> Result<Self> {
        let w = self.edge_weights.iter().map(|x| x * gamma).collect();
        Self::with_edge_weights(self.graph.clone(), self.unaries.clone(), self.metric, self.config.clone(), w)
    }

    /// The dual variable of edge `e` as a global piecewise polynomial.
    pub fn dual_function(&self, p: &DualCoefficients, e: usize) -> PiecewisePolynomial {
        let pieces = (0..self.config.pieces())
            .map(|k| Polynomial::new(p.piece(e, k).to_vec()).from_local(&self.config.piece_interval(k)))
            .collect();
        PiecewisePolynomial::new(self.config.knots.clone(), pieces).expect("validated knots")
    }

    pub fn zero_dual(&self) -> DualCoefficients {
        CoeffField::zeros(self.graph.num_edges(), self.config.pieces(), self.config.deg + 1)
    }
}

/// One linear equation on a single edge's variables:
/// `sum p_terms * p + weight * constant + sum gram_terms * Q_ij = 0`, with the
/// Gram entries addressed as `(block, i, j)` in plain (unscaled) form.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EdgeRow {
    pub p_terms: Vec<(usize, f64)>,
    pub gram_terms: Vec<(usize, usize, usize, f64)>,
    pub constant: f64,
}

/// Lipschitz constraints of one edge, before weighting.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EdgeTemplate {
    pub p_len: usize,
    pub grams: Vec<usize>,
    pub rows: Vec<EdgeRow>,
}

impl EdgeTemplate {
    pub fn new(metric: Metric, config: &DualConfig) -> Self {
        let d = config.deg;
        let w = d + 1;
        let unit = Interval::unit();
        let mut grams = Vec::new();
        let mut rows = Vec::new();
        for k in 0..config.pieces() {
            let h = config.piece_interval(k).half_width();
            // (sign, constant) pairs; each certified polynomial is
            // constant * e_0 + sign * L(lambda)
            let (cert_deg, certs): (usize, [(f64, f64); 2]) = match metric {
                // h -/+ d lambda / ds
                Metric::Tv => (d - 1, [(-1.0, h), (1.0, h)]),
                // lambda, 1 - lambda
                Metric::Potts => (d, [(1.0, 0.0), (-1.0, 1.0)]),
            };
            let tpl = SosTemplate::new(cert_deg, &unit);
            for (sign, constant) in certs {
                let first = grams.len();
                grams.extend(tpl.blocks.iter().map(|(dim, _)| *dim));
                let mut cert_rows: Vec<EdgeRow> = (0..=cert_deg)
                    .map(|j| {
                        let p_terms = match metric {
                            Metric::Tv => vec![(k * w + j + 1, sign * (j + 1) as f64)],
                            Metric::Potts => vec![(k * w + j, sign)],
                        };
                        EdgeRow { p_terms, gram_terms: Vec::new(), constant: if j == 0 { constant } else { 0.0 } }
                    })
                    .collect();
                for (b, i, jj, c, m) in tpl.coefficient_terms() {
                    cert_rows[c].gram_terms.push((first + b, i, jj, -m));
                }
                rows.extend(cert_rows);
            }
        }
        if config.continuity {
            for k in 0..config.pieces() - 1 {
                // lambda_k(s = 1) - lambda_{k+1}(s = -1) = 0
                let mut p_terms: Vec<(usize, f64)> = (0..w).map(|j| (k * w + j, 1.0)).collect();
                p_terms.extend((0..w).map(|j| ((k + 1) * w + j, -sign_pow(j))));
                rows.push(EdgeRow { p_terms, gram_terms: Vec::new(), constant: 0.0 });
            }
        }
        if metric == Metric::Tv {
            // gauge: lambda_0(s = -1) = 0
            rows.push(EdgeRow { p_terms: (0..w).map(|j| (j, sign_pow(j))).collect(), gram_terms: Vec::new(), constant: 0.0 });
        }
        Self { p_len: config.pieces() * w, grams, rows }
    }

    fn description(&self, weight: f64) -> ConeDescription {
        let mut offsets = Vec::new();
        let mut off = self.p_len;
        let mut psd_maps = Vec::new();
        for &dim in &self.grams {
            offsets.push(off);
            psd_maps.push(PsdMap::extract(dim, off));
            off += packed_len(dim);
        }
        let affine_eqs = self
            .rows
            .iter()
            .map(|r| {
                let mut terms = r.p_terms.clone();
                terms.extend(r.gram_terms.iter().map(|&(b, i, j, c)| (offsets[b] + packed_index(self.grams[b], i, j), c)));
                AffineEq { terms, rhs: -weight * r.constant }
            })
            .collect();
        ConeDescription { num_vars: off, psd_maps, affine_eqs }
    }
}

fn sign_pow(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Lipschitz set of one edge dual under `metric` with bound `weight`, in
/// variables `(p coefficients piece by piece, Gram blocks...)`.
pub fn lipschitz_description(metric: Metric, config: &DualConfig, weight: f64) -> ConeDescription {
    EdgeTemplate::new(metric, config).description(weight)
}

/// `|lambda'| <= 1` per piece, continuity if configured, `lambda(a) = 0`.
pub fn lipschitz_description_tv(config: &DualConfig) -> ConeDescription {
    lipschitz_description(Metric::Tv, config, 1.0)
}

/// `0 <= lambda <= 1` per piece, continuity if configured, no gauge.
pub fn lipschitz_description_potts(config: &DualConfig) -> ConeDescription {
    lipschitz_description(Metric::Potts, config, 1.0)
}

/// Projection applied to a contiguous block of variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Free,
    /// Scaled packed `n x n` PSD matrix.
    Psd(usize),
    /// `count` consecutive groups of `stride` entries whose first entries sum
    /// to one; everything else is free.
    SumToOne { stride: usize, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub len: usize,
    pub kind: ConeKind,
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Duplicate entries are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self { rows, cols, indptr, indices, values }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                t.push((self.indices[k], r, self.values[k]));
            }
        }
        Self::from_triplets(self.cols, self.rows, t)
    }

    /// `out = A x`.
    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.rows {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            out[r] = s;
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_abs_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.values[self.indptr[r]..self.indptr[r + 1]].iter().map(|v| v.abs()).sum())
            .collect()
    }
}

/// Where the MRF variables sit inside the program vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub vertices: usize,
    pub edges: usize,
    pub pieces: usize,
    pub moment_deg: usize,
    pub dual_deg: usize,
}

impl Layout {
    /// `X[0..y_len()]` are the moments, vertex-major then piece-major.
    pub fn y_len(&self) -> usize {
        self.vertices * self.pieces * (self.moment_deg + 1)
    }

    /// `Z[0..p_len()]` are the dual coefficients, edge-major then piece-major.
    pub fn p_len(&self) -> usize {
        self.edges * self.pieces * (self.dual_deg + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub b: SparseMatrix,
    pub bt: SparseMatrix,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub x_blocks: Vec<Block>,
    pub z_blocks: Vec<Block>,
    pub layout: Layout,
}

impl ConicProgram {
    pub fn nx(&self) -> usize {
        self.c.len()
    }

    pub fn nz(&self) -> usize {
        self.d.len()
    }

    /// Moments as a field over vertices.
    pub fn moments(&self, x: &[f64]) -> CoeffField {
        let l = &self.layout;
        CoeffField::from_vec(l.vertices, l.pieces, l.moment_deg + 1, x[..l.y_len()].to_vec()).expect("layout")
    }

    /// Dual coefficients as a field over edges.
    pub fn dual(&self, z: &[f64]) -> DualCoefficients {
        let l = &self.layout;
        CoeffField::from_vec(l.edges, l.pieces, l.dual_deg + 1, z[..l.p_len()].to_vec()).expect("layout")
    }
}

/// Incremental construction of a [`ConicProgram`].
#[derive(Debug, Default)]
pub(crate) struct ProgramBuilder {
    x_blocks: Vec<Block>,
    z_blocks: Vec<Block>,
    nx: usize,
    nz: usize,
    triplets: Vec<(usize, usize, f64)>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl ProgramBuilder {
    pub fn x_block(&mut self, len: usize, kind: ConeKind) -> usize {
        let start = self.nx;
        self.x_blocks.push(Block { start, len, kind });
        self.nx += len;
        self.c.resize(self.nx, 0.0);
        start
    }

    pub fn z_block(&mut self, len: usize, kind: ConeKind) -> usize {
        let start = self.nz;
        self.z_blocks.push(Block { start, len, kind });
        self.nz += len;
        self.d.resize(self.nz, 0.0);
        start
    }

    /// `B[z, x] += v`.
    pub fn entry(&mut self, z: usize, x: usize, v: f64) {
        if v != 0.0 {
            self.triplets.push((z, x, v));
        }
    }

    pub fn set_c(&mut self, x: usize, v: f64) {
        self.c[x] = v;
    }

    pub fn set_d(&mut self, z: usize, v: f64) {
        self.d[z] = v;
    }

    /// Adds Gram blocks and multipliers for an edge template. `p_col(i)`
    /// gives the `Z` index of the template's `i`-th dual coefficient.
    pub fn edge_constraints(&mut self, tpl: &EdgeTemplate, weight: f64, p_index: impl Fn(usize) -> usize) {
        let gram_starts: Vec<usize> = tpl.grams.iter().map(|&n| self.z_block(packed_len(n), ConeKind::Psd(n))).collect();
        let nu = self.x_block(tpl.rows.len(), ConeKind::Free);
        for (r, row) in tpl.rows.iter().enumerate() {
            for &(i, v) in &row.p_terms {
                self.entry(p_index(i), nu + r, v);
            }
            for &(b, i, j, v) in &row.gram_terms {
                let scale = if i == j { 1.0 } else { 1.0 / SQRT_2 };
                self.entry(gram_starts[b] + packed_index(tpl.grams[b], i, j), nu + r, v * scale);
            }
            self.set_c(nu + r, weight * row.constant);
        }
    }

    /// Adds an auxiliary PSD variable and its multipliers for every map of
    /// `desc`; `var_index(i)` gives the `X` index of description variable `i`.
    pub fn psd_linking(&mut self, desc: &ConeDescription, var_index: impl Fn(usize) -> usize) {
        for map in &desc.psd_maps {
            let n = map.dim;
            let h = self.x_block(packed_len(n), ConeKind::Psd(n));
            let eta = self.z_block(packed_len(n), ConeKind::Free);
            for i in 0..n {
                for j in i..n {
                    let e = packed_index(n, i, j);
                    let scale = if i == j { 1.0 } else { SQRT_2 };
                    for &(var, coef) in &map.terms[e] {
                        self.entry(eta + e, var_index(var), scale * coef);
                    }
                    self.entry(eta + e, h + e, -1.0);
                }
            }
        }
    }

    pub fn build(self, layout: Layout) -> ConicProgram {
        let b = SparseMatrix::from_triplets(self.nz, self.nx, self.triplets);
        let bt = b.transpose();
        ConicProgram { b, bt, c: self.c, d: self.d, x_blocks: self.x_blocks, z_blocks: self.z_blocks, layout }
    }
}

/// Builds the saddle-point program whose value is the discretized dual.
pub fn assemble(problem: &Problem) -> Result<ConicProgram> {
    let g = problem.graph();
    let cfg = problem.config();
    let (nv, ne, kk) = (g.num_vertices(), g.num_edges(), cfg.pieces());
    let m = problem.moment_deg();
    let d = cfg.deg();
    let layout = Layout { vertices: nv, edges: ne, pieces: kk, moment_deg: m, dual_deg: d };
    let mut bld = ProgramBuilder::default();

    let y_at = |u: usize, k: usize, j: usize| (u * kk + k) * (m + 1) + j;
    for u in 0..nv {
        let start = bld.x_block(kk * (m + 1), ConeKind::SumToOne { stride: m + 1, count: kk });
        debug_assert_eq!(start, y_at(u, 0, 0));
        for k in 0..kk {
            for (j, &w) in problem.local_unary(u, k).coeffs().iter().enumerate() {
                bld.set_c(y_at(u, k, j), w);
            }
        }
    }
    let p_at = |e: usize, k: usize, j: usize| (e * kk + k) * (d + 1) + j;
    if ne > 0 {
        bld.z_block(ne * kk * (d + 1), ConeKind::Free);
    }
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        for k in 0..kk {
            for j in 0..=d {
                bld.entry(p_at(e, k, j), y_at(u, k, j), 1.0);
                bld.entry(p_at(e, k, j), y_at(v, k, j), -1.0);
            }
        }
    }

    let moment_desc = moment_cone_description(m, &Interval::unit())?;
    for u in 0..nv {
        for k in 0..kk {
            bld.psd_linking(&moment_desc, |j| y_at(u, k, j));
        }
    }

    let tpl = EdgeTemplate::new(problem.metric(), cfg);
    for e in 0..ne {
        let w = problem.edge_weights()[e];
        bld.edge_constraints(&tpl, w, |i| e * kk * (d + 1) + i);
    }
    Ok(bld.build(layout))
}
