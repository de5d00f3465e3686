//! Oriented graphs, per-vertex / per-edge coefficient fields, and the
//! divergence/gradient pair acting blockwise on them.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Power iterations used by [`operator_norm_estimate`].
pub const POWER_ITERS: usize = 100;
/// Safety factor applied to the power-iteration estimate.
pub const NORM_SAFETY: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Rejects self-loops, duplicate undirected pairs and out-of-range indices.
    pub fn new(num_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for &(u, v) in &edges {
            if u >= num_vertices || v >= num_vertices {
                return Err(Error::InvalidInput(format!("edge ({u},{v}) out of range")));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidInput(format!("duplicate edge ({u},{v})")));
            }
        }
        Ok(Self { num_vertices, edges })
    }

    /// Path `0 -> 1 -> ... -> n-1`.
    pub fn chain(n: usize) -> Self {
        Self { num_vertices: n, edges: (1..n).map(|i| (i - 1, i)).collect() }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, u: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == u || b == u).count()
    }

    /// Vertex order along the path if the graph is a single path (edges in
    /// any orientation), `None` otherwise.
    pub fn path_order(&self) -> Option<Vec<usize>> {
        let n = self.num_vertices;
        if n == 0 || self.edges.len() != n - 1 {
            return None;
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        if adj.iter().any(|a| a.len() > 2) {
            return None;
        }
        let start = if n == 1 { 0 } else { (0..n).find(|&u| adj[u].len() == 1)? };
        let mut order = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        while let Some(&next) = adj[cur].iter().find(|&&w| w != prev) {
            order.push(next);
            prev = cur;
            cur = next;
            if order.len() > n {
                return None;
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// 4-neighbourhood grid, row-major vertex ids, horizontal edges left to
/// right and vertical edges top to bottom.
pub fn grid_graph(width: usize, height: usize) -> Graph {
    let id = |x: usize, y: usize| y * width + x;
    let mut edges = Vec::with_capacity(width * height.saturating_sub(1) + height * width.saturating_sub(1));
    for y in 0..height {
        for x in 0..width {
            if x + 1 < width {
                edges.push((id(x, y), id(x + 1, y)));
            }
            if y + 1 < height {
                edges.push((id(x, y), id(x, y + 1)));
            }
        }
    }
    Graph { num_vertices: width * height, edges }
}

/// Uniformly shaped blocks of `pieces x width` reals, one per vertex or edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffField {
    pieces: usize,
    width: usize,
    data: Vec<f64>,
}

/// Per-edge, per-piece coefficients of the Lipschitz dual variable, each
/// piece in its local coordinate `s in [-1, 1]`.
pub type DualCoefficients = CoeffField;

impl CoeffField {
    pub fn zeros(blocks: usize, pieces: usize, width: usize) -> Self {
        Self { pieces, width, data: vec![0.0; blocks * pieces * width] }
    }

    pub fn from_vec(blocks: usize, pieces: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != blocks * pieces * width {
            return Err(Error::LengthMismatch { expected: blocks * pieces * width, got: data.len() });
        }
        Ok(Self { pieces, width, data })
    }

    pub fn num_blocks(&self) -> usize {
        if self.pieces * self.width == 0 {
            0
        } else {
            self.data.len() / (self.pieces * self.width)
        }
    }

    pub fn pieces(&self) -> usize {
        self.pieces
    }

    /// Coefficients per piece (`deg + 1`).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let n = self.pieces * self.width;
        &self.data[i * n..(i + 1) * n]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.pieces * self.width;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn piece(&self, i: usize, k: usize) -> &[f64] {
        let start = (i * self.pieces + k) * self.width;
        &self.data[start..start + self.width]
    }

    pub fn piece_mut(&mut self, i: usize, k: usize) -> &mut [f64] {
        let start = (i * self.pieces + k) * self.width;
        &mut self.data[start..start + self.width]
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.pieces != other.pieces || self.width != other.width || self.data.len() != other.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.num_blocks(),
                self.pieces,
                self.width,
                other.num_blocks(),
                other.pieces,
                other.width
            )));
        }
        Ok(())
    }
}

/// `(Div p)_u = -(sum of outgoing p_e - sum of incoming p_e)`.
pub fn divergence(g: &Graph, p: &CoeffField) -> Result<CoeffField> {
    if p.num_blocks() != g.num_edges() {
        return Err(Error::ShapeMismatch(format!("{} edge blocks for {} edges", p.num_blocks(), g.num_edges())));
    }
    let mut out = CoeffField::zeros(g.num_vertices(), p.pieces, p.width);
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let pe = p.block(e);
        for (o, x) in out.block_mut(u).iter_mut().zip(pe) {
            *o -= x;
        }
        for (o, x) in out.block_mut(v).iter_mut().zip(pe) {
            *o += x;
        }
    }
    Ok(out)
}

/// `(grad y)_(u,v) = y_u - y_v`, the negative adjoint of [`divergence`].
pub fn gradient(g: &Graph, y: &CoeffField) -> Result<CoeffField> {
    if y.num_blocks() != g.num_vertices() {
        return Err(Error::ShapeMismatch(format!("{} vertex blocks for {} vertices", y.num_blocks(), g.num_vertices())));
    }
    let mut out = CoeffField::zeros(g.num_edges(), y.pieces, y.width);
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let (yu, yv) = (y.block(u), y.block(v));
        for ((o, a), b) in out.block_mut(e).iter_mut().zip(yu).zip(yv) {
            *o = a - b;
        }
    }
    Ok(out)
}

/// Upper estimate of the spectral norm of the scalar graph gradient
/// (blockwise application does not change it).
pub fn operator_norm_estimate(g: &Graph) -> f64 {
    let n = g.num_vertices();
    if g.num_edges() == 0 || n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERS {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        // x <- grad^T grad x (graph Laplacian)
        let mut next = vec![0.0; n];
        for &(u, v) in g.edges() {
            let d = x[u] - x[v];
            next[u] += d;
            next[v] -= d;
        }
        lambda = next.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        x = next;
    }
    lambda.max(0.0).sqrt() * NORM_SAFETY
}
