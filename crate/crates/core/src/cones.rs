//! Conic building blocks on an interval: Hankel moment matrices, the
//! moment-cone description, sum-of-squares certificates with explicit Gram
//! blocks, and Euclidean projection onto the PSD cone.
//!
//! All matrices here are tiny (dimension at most nine for degree sixteen), so
//! eigendecompositions use cyclic Jacobi rotations on dense scratch storage.

use crate::error::{Error, Result};
use crate::poly::{minimize_on_interval, Interval, Polynomial, ROOT_TOL};

/// Sweep budget for the Jacobi eigensolver.
pub const JACOBI_SWEEPS: usize = 50;
/// Default relative tolerance on the minimum eigenvalue for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Dense symmetric matrix stored as its upper triangle, row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Position of `(i, j)`, `i <= j`, in packed upper-triangular storage.
#[inline]
pub fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * dim + 1 - i) / 2 + j - i
}

pub fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; packed_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.entries[packed_index(dim, i, j)] = f(i, j);
            }
        }
        m
    }

    /// From row-major dense storage; the lower triangle is ignored.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("matrix rows must be square".into()));
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn from_packed(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != packed_len(dim) {
            return Err(Error::LengthMismatch { expected: packed_len(dim), got: entries.len() });
        }
        Ok(Self { dim, entries })
    }

    /// `v v^T`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[packed_index(self.dim, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[packed_index(self.dim, i, j)] = v;
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!("{} vs {}", self.dim, other.dim)));
        }
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + alpha * b).collect(),
        })
    }

    pub fn quadratic_form(&self, z: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += z[i] * self.get(i, j) * z[j];
            }
        }
        s
    }

    /// Eigenvalues ascending, with matching eigenvectors (column `k` of the
    /// returned row-major matrix belongs to eigenvalue `k`).
    pub fn eigen(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.get(i, j);
            }
        }
        let mut v = vec![0.0; n * n];
        jacobi_eigen(&mut a, &mut v, n)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| a[p * n + p].total_cmp(&a[q * n + q]));
        let values = order.iter().map(|&k| a[k * n + k]).collect();
        let mut vectors = vec![0.0; n * n];
        for (col, &k) in order.iter().enumerate() {
            for r in 0..n {
                vectors[r * n + col] = v[r * n + k];
            }
        }
        Ok((values, vectors))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        if self.dim == 0 {
            return Ok(0.0);
        }
        Ok(self.eigen()?.0[0])
    }
}

/// Cyclic Jacobi on a dense row-major symmetric `n x n` buffer. On return the
/// diagonal of `a` holds the eigenvalues and the columns of `v` the vectors.
pub(crate) fn jacobi_eigen(a: &mut [f64], v: &mut [f64], n: usize) -> Result<()> {
    for x in v.iter_mut() {
        *x = 0.0;
    }
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n <= 1 {
        return Ok(());
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return Ok(());
    }
    let thresh = (f64::EPSILON * f64::EPSILON) * total;
    for _ in 0..JACOBI_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off <= thresh {
            return Ok(());
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut off = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            off += a[i * n + j] * a[i * n + j];
        }
    }
    if off <= 1e3 * thresh {
        Ok(())
    } else {
        Err(Error::EigenFailure(JACOBI_SWEEPS))
    }
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clamped to zero.
pub fn project_psd(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let n = m.dim;
    let (vals, vecs) = m.eigen()?;
    Ok(SymmetricMatrix::from_fn(n, |i, j| {
        (0..n)
            .filter(|&k| vals[k] > 0.0)
            .map(|k| vals[k] * vecs[i * n + k] * vecs[j * n + k])
            .sum()
    }))
}

/// In-place PSD projection of a matrix in scaled packed form ("svec":
/// off-diagonals multiplied by `sqrt(2)`), so that Euclidean distance on the
/// vector equals Frobenius distance on the matrix.
pub(crate) fn project_psd_svec(x: &mut [f64], n: usize, scratch: &mut PsdScratch) -> Result<()> {
    let s2 = std::f64::consts::SQRT_2;
    match n {
        0 => return Ok(()),
        1 => {
            x[0] = x[0].max(0.0);
            return Ok(());
        }
        2 => {
            let (p, q, r) = (x[0], x[1] / s2, x[2]);
            let m = 0.5 * (p + r);
            let d = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            let (lo, hi) = (m - d, m + d);
            if lo >= 0.0 {
                return Ok(());
            }
            if hi <= 0.0 {
                x.iter_mut().for_each(|v| *v = 0.0);
                return Ok(());
            }
            // hi * v v^T = hi / (hi - lo) * (M - lo I)
            let f = hi / (2.0 * d);
            x[0] = f * (p - lo);
            x[1] = f * q * s2;
            x[2] = f * (r - lo);
            return Ok(());
        }
        _ => {}
    }
    scratch.resize(n);
    let (a, v) = (&mut scratch.a, &mut scratch.v);
    for i in 0..n {
        for j in i..n {
            let val = x[packed_index(n, i, j)];
            let val = if i == j { val } else { val / s2 };
            a[i * n + j] = val;
            a[j * n + i] = val;
        }
    }
    if cholesky_succeeds(a, v, n, 1.0) {
        return Ok(());
    }
    if cholesky_succeeds(a, v, n, -1.0) {
        x.iter_mut().for_each(|t| *t = 0.0);
        return Ok(());
    }
    jacobi_eigen(a, v, n)?;
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..n {
                let lam = a[k * n + k];
                if lam > 0.0 {
                    s += lam * v[i * n + k] * v[j * n + k];
                }
            }
            x[packed_index(n, i, j)] = if i == j { s } else { s * s2 };
        }
    }
    Ok(())
}

/// Whether `sign * a` is positive definite, by attempting a Cholesky
/// factorization into the scratch buffer `l`.
fn cholesky_succeeds(a: &[f64], l: &mut [f64], n: usize, sign: f64) -> bool {
    for i in 0..n {
        for j in 0..=i {
            let mut s = sign * a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

/// Reusable buffers for [`project_psd_svec`].
#[derive(Debug, Default, Clone)]
pub(crate) struct PsdScratch {
    a: Vec<f64>,
    v: Vec<f64>,
}

impl PsdScratch {
    fn resize(&mut self, n: usize) {
        if self.a.len() < n * n {
            self.a.resize(n * n, 0.0);
            self.v.resize(n * n, 0.0);
        }
    }
}

/// Hankel matrix `M_{i,n}(y)`: `(n+1) x (n+1)` with entry `(r, c) = y[i + r + c]`.
pub fn hankel(y: &[f64], i: usize, n: usize) -> Result<SymmetricMatrix> {
    let need = i + 2 * n + 1;
    if y.len() < need {
        return Err(Error::LengthMismatch { expected: need, got: y.len() });
    }
    Ok(SymmetricMatrix::from_fn(n + 1, |r, c| y[i + r + c]))
}

/// Affine map from a variable vector into symmetric matrices:
/// `M(v) = constant + sum_t coeff_t * v[var_t] * E_t`, stored per packed entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMap {
    pub dim: usize,
    /// For every packed entry, the `(variable, coefficient)` terms.
    pub terms: Vec<Vec<(usize, f64)>>,
    pub constant: Vec<f64>,
}

impl PsdMap {
    fn new(dim: usize) -> Self {
        Self { dim, terms: vec![Vec::new(); packed_len(dim)], constant: vec![0.0; packed_len(dim)] }
    }

    /// Identity extraction of a packed block starting at `offset`.
    pub fn extract(dim: usize, offset: usize) -> Self {
        let mut m = Self::new(dim);
        for (e, t) in m.terms.iter_mut().enumerate() {
            t.push((offset + e, 1.0));
        }
        m
    }

    pub fn apply(&self, v: &[f64]) -> SymmetricMatrix {
        let entries = self
            .terms
            .iter()
            .zip(&self.constant)
            .map(|(t, c)| c + t.iter().map(|&(k, a)| a * v[k]).sum::<f64>())
            .collect();
        SymmetricMatrix { dim: self.dim, entries }
    }
}

/// Linear equation `sum coeff * v[var] = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineEq {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl AffineEq {
    pub fn residual(&self, v: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, a)| a * v[k]).sum::<f64>() - self.rhs
    }
}

/// A convex set given by PSD images and affine equations of one vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeDescription {
    pub num_vars: usize,
    pub psd_maps: Vec<PsdMap>,
    pub affine_eqs: Vec<AffineEq>,
}

impl ConeDescription {
    /// True iff every PSD image has min eigenvalue >= `-tol * max(1, trace)`
    /// and every equation holds to `tol`.
    pub fn holds(&self, v: &[f64], tol: f64) -> Result<bool> {
        if v.len() < self.num_vars {
            return Err(Error::LengthMismatch { expected: self.num_vars, got: v.len() });
        }
        for m in &self.psd_maps {
            let mat = m.apply(v);
            if mat.min_eigenvalue()? < -tol * mat.trace().abs().max(1.0) {
                return Ok(false);
            }
        }
        Ok(self.affine_eqs.iter().all(|e| e.residual(v).abs() <= tol))
    }
}

/// Linear combination of Hankel matrices `sum_t w_t * M_{i_t, n}(y)`.
fn hankel_combo(n: usize, parts: &[(usize, f64)]) -> PsdMap {
    let mut m = PsdMap::new(n + 1);
    for r in 0..=n {
        for c in r..=n {
            let e = packed_index(n + 1, r, c);
            for &(shift, w) in parts {
                if w != 0.0 {
                    m.terms[e].push((shift + r + c, w));
                }
            }
        }
    }
    m
}

/// PSD maps characterizing moment vectors `y_0..y_deg` of nonnegative
/// measures on `iv`.
///
/// Odd `deg = 2n+1`: `b M_{0,n} - M_{1,n}` and `M_{1,n} - a M_{0,n}`.
/// Even `deg = 2n`: `M_{0,n}` and `(a+b) M_{1,n-1} - ab M_{0,n-1} - M_{2,n-1}`.
pub fn moment_cone_description(deg: usize, iv: &Interval) -> Result<ConeDescription> {
    if deg < 1 {
        return Err(Error::DegreeTooSmall(deg));
    }
    let (a, b) = (iv.a, iv.b);
    let psd_maps = if deg % 2 == 1 {
        let n = (deg - 1) / 2;
        vec![hankel_combo(n, &[(0, b), (1, -1.0)]), hankel_combo(n, &[(1, 1.0), (0, -a)])]
    } else {
        let n = deg / 2;
        vec![
            hankel_combo(n, &[(0, 1.0)]),
            hankel_combo(n - 1, &[(1, a + b), (0, -a * b), (2, -1.0)]),
        ]
    };
    Ok(ConeDescription { num_vars: deg + 1, psd_maps, affine_eqs: Vec::new() })
}

/// Truncated moment sequence of a nonnegative measure on one piece,
/// expressed in the piece's local coordinate `s in [-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBlock {
    pub moments: Vec<f64>,
    pub piece: Interval,
}

impl MomentBlock {
    /// Moments of `mass * delta_x`, `x` in global coordinates.
    pub fn dirac(x: f64, mass: f64, deg: usize, piece: Interval) -> Self {
        let s = piece.to_local(x);
        Self { moments: (0..=deg).map(|k| mass * s.powi(k as i32)).collect(), piece }
    }

    /// Converts global moments `int x^k dmu` to local ones.
    pub fn from_global(global: &[f64], piece: Interval) -> Self {
        // s^k = ((x - c)/h)^k expanded binomially.
        let (c, h) = (piece.center(), piece.half_width());
        let moments = (0..global.len())
            .map(|k| {
                let mut acc = 0.0;
                let mut binom = 1.0;
                for j in 0..=k {
                    acc += binom * (-c).powi((k - j) as i32) * global[j];
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
                acc / h.powi(k as i32)
            })
            .collect();
        Self { moments, piece }
    }

    pub fn degree(&self) -> usize {
        self.moments.len().saturating_sub(1)
    }

    pub fn mass(&self) -> f64 {
        self.moments.first().copied().unwrap_or(0.0)
    }

    /// Mass-normalized mean in global coordinates.
    pub fn mean(&self) -> Option<f64> {
        let m = self.mass();
        if m <= 0.0 || self.moments.len() < 2 {
            return None;
        }
        Some(self.piece.from_local(self.moments[1] / m))
    }

    /// First global moment `int x dmu`.
    pub fn global_first_moment(&self) -> f64 {
        let m1 = self.moments.get(1).copied().unwrap_or(0.0);
        self.piece.center() * self.mass() + self.piece.half_width() * m1
    }
}

/// Moment-cone membership via the Hankel description on `[-1, 1]`; the
/// minimum eigenvalue of each map may dip to `-tol * max(1, trace)`.
pub fn moment_cone_check(y: &MomentBlock, tol: f64) -> bool {
    if y.moments.len() < 2 {
        return y.moments.first().map_or(true, |m| *m >= -tol);
    }
    match moment_cone_description(y.degree(), &Interval::unit()) {
        Ok(d) => d.holds(&y.moments, tol).unwrap_or(false),
        Err(_) => false,
    }
}

/// Gram-block layout of a degree-`deg` nonnegativity certificate on `iv`:
/// each block contributes `weight(x) * z(x)^T Q z(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosTemplate {
    pub deg: usize,
    pub blocks: Vec<(usize, Polynomial)>,
}

impl SosTemplate {
    /// Even `deg = 2n`: `s + (x-a)(b-x) t` with Gram sizes `n+1` and `n`.
    /// Odd `deg = 2n+1`: `(x-a) s + (b-x) t`, both of size `n+1`.
    pub fn new(deg: usize, iv: &Interval) -> Self {
        let (a, b) = (iv.a, iv.b);
        let blocks = if deg % 2 == 0 {
            let n = deg / 2;
            let mut blocks = vec![(n + 1, Polynomial::constant(1.0))];
            if n >= 1 {
                blocks.push((n, Polynomial::new(vec![-a * b, a + b, -1.0])));
            }
            blocks
        } else {
            let n = (deg - 1) / 2;
            vec![(n + 1, Polynomial::new(vec![-a, 1.0])), (n + 1, Polynomial::new(vec![b, -1.0]))]
        };
        Self { deg, blocks }
    }

    /// Terms `(block, i, j, k, m)` meaning coefficient `k` gains `m * Q_ij`
    /// (`i <= j`; off-diagonal multiplicity already folded into `m`).
    pub fn coefficient_terms(&self) -> Vec<(usize, usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (bi, (dim, w)) in self.blocks.iter().enumerate() {
            for i in 0..*dim {
                for j in i..*dim {
                    let mult = if i == j { 1.0 } else { 2.0 };
                    for (l, &wl) in w.coeffs().iter().enumerate() {
                        if wl != 0.0 {
                            out.push((bi, i, j, i + j + l, mult * wl));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn gram_vars(&self) -> usize {
        self.blocks.iter().map(|(d, _)| packed_len(*d)).sum()
    }

    /// The certified polynomial for given Gram matrices.
    pub fn polynomial(&self, grams: &[SymmetricMatrix]) -> Polynomial {
        let mut acc = Polynomial::zero().padded(self.deg);
        for ((_, w), q) in self.blocks.iter().zip(grams) {
            acc = &acc + &(w * &gram_to_coeffs(q));
        }
        acc
    }
}

/// Description in variables `(p_0..p_deg, Gram blocks...)` of polynomials
/// nonnegative on `iv`, with affine equations linking `p` to the Gram blocks.
pub fn sos_certificate_description(deg: usize, iv: &Interval) -> ConeDescription {
    let tpl = SosTemplate::new(deg, iv);
    let mut offsets = Vec::new();
    let mut off = deg + 1;
    let mut psd_maps = Vec::new();
    for (dim, _) in &tpl.blocks {
        offsets.push(off);
        psd_maps.push(PsdMap::extract(*dim, off));
        off += packed_len(*dim);
    }
    let mut affine_eqs: Vec<AffineEq> =
        (0..=deg).map(|k| AffineEq { terms: vec![(k, 1.0)], rhs: 0.0 }).collect();
    for (bi, i, j, k, m) in tpl.coefficient_terms() {
        let dim = tpl.blocks[bi].0;
        affine_eqs[k].terms.push((offsets[bi] + packed_index(dim, i, j), -m));
    }
    ConeDescription { num_vars: off, psd_maps, affine_eqs }
}

/// Coefficient `k` is the `k`-th anti-diagonal sum of `Q`.
pub fn gram_to_coeffs(q: &SymmetricMatrix) -> Polynomial {
    let n = q.dim();
    if n == 0 {
        return Polynomial::zero();
    }
    let mut c = vec![0.0; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            c[i + j] += q.get(i, j);
        }
    }
    Polynomial::new(c)
}

/// Exact nonnegativity test by root isolation of the derivative.
pub fn is_nonneg_on_interval(p: &Polynomial, iv: &Interval, tol: f64) -> bool {
    minimize_on_interval(p, iv, ROOT_TOL).1 >= -tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &SymmetricMatrix, b: &[Vec<f64>], tol: f64) -> bool {
        let d = a.to_dense();
        d.iter().zip(b).all(|(r, s)| r.iter().zip(s).all(|(x, y)| (x - y).abs() <= tol))
    }

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
        let vals: Vec<f64> = (0..packed_len(n)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SymmetricMatrix::from_packed(n, vals).unwrap()
    }

    #[test]
    fn packed_layout() {
        let n = 4;
        let mut seen = vec![false; packed_len(n)];
        for i in 0..n {
            for j in i..n {
                let k = packed_index(n, i, j);
                assert!(!seen[k]);
                seen[k] = true;
                assert_eq!(k, packed_index(n, j, i));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn hankel_examples() {
        let h = hankel(&[1.0, 0.5, 0.25], 0, 1).unwrap();
        assert!(close(&h, &[vec![1.0, 0.5], vec![0.5, 0.25]], 0.0));
        let h = hankel(&[1.0, 0.0, 1.0 / 3.0, 0.0, 0.2], 1, 1).unwrap();
        assert!(close(&h, &[vec![0.0, 1.0 / 3.0], vec![1.0 / 3.0, 0.0]], 0.0));
        let h = hankel(&[1.0, 0.0, 0.0], 0, 1).unwrap();
        assert!(close(&h, &[vec![1.0, 0.0], vec![0.0, 0.0]], 0.0));
        assert!(matches!(hankel(&[1.0, 0.0], 0, 1), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn moment_description_examples() {
        let iv = Interval::unit();
        let d = moment_cone_description(1, &iv).unwrap();
        assert!(d.holds(&[1.0, 0.3], 1e-12).unwrap());
        let m = d.psd_maps.iter().map(|m| m.apply(&[1.0, 0.3]).get(0, 0)).collect::<Vec<_>>();
        assert!((m[0] - 0.7).abs() < 1e-15 && (m[1] - 1.3).abs() < 1e-15);

        let d = moment_cone_description(2, &iv).unwrap();
        assert!(!d.holds(&[1.0, 2.0, 4.0], 1e-9).unwrap());
        assert!(d.psd_maps[0].apply(&[1.0, 2.0, 4.0]).min_eigenvalue().unwrap() > -1e-12);

        let d = moment_cone_description(4, &iv).unwrap();
        assert!(d.holds(&[1.0, 0.0, 0.25, 0.0, 0.0625], 1e-9).unwrap());
        assert_eq!(moment_cone_description(0, &iv), Err(Error::DegreeTooSmall(0)));
    }

    #[test]
    fn moment_check_examples() {
        let iv = Interval::new(-2.0, 3.0).unwrap();
        for x in [-2.0, -0.5, 0.0, 1.7, 3.0] {
            assert!(moment_cone_check(&MomentBlock::dirac(x, 1.0, 6, iv), MEMBERSHIP_TOL));
        }
        let bad = MomentBlock { moments: vec![1.0, 0.0, 0.0, 0.0, 1.0], piece: Interval::unit() };
        assert!(!moment_cone_check(&bad, MEMBERSHIP_TOL));
    }

    #[test]
    fn moment_check_accepts_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let iv = Interval::unit();
        for _ in 0..1000 {
            let deg = rng.gen_range(1..=7);
            let atoms = rng.gen_range(1..=5);
            let mut w: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            let mut y = vec![0.0; deg + 1];
            for wi in w {
                let x: f64 = rng.gen_range(-1.0..=1.0);
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += wi * x.powi(k as i32);
                }
            }
            assert!(moment_cone_check(&MomentBlock { moments: y, piece: iv }, MEMBERSHIP_TOL));
        }
    }

    #[test]
    fn global_local_moments_agree() {
        let piece = Interval::new(1.0, 4.0).unwrap();
        let x: f64 = 2.2;
        let global: Vec<f64> = (0..5).map(|k| x.powi(k)).collect();
        let local = MomentBlock::from_global(&global, piece);
        let direct = MomentBlock::dirac(x, 1.0, 4, piece);
        for (a, b) in local.moments.iter().zip(&direct.moments) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((local.mean().unwrap() - x).abs() < 1e-12);
        assert!((local.global_first_moment() - x).abs() < 1e-12);
    }

    #[test]
    fn gram_examples() {
        assert_eq!(gram_to_coeffs(&SymmetricMatrix::identity(2)).coeffs(), &[1.0, 0.0, 1.0]);
        assert_eq!(gram_to_coeffs(&SymmetricMatrix::zeros(2)).coeffs(), &[0.0, 0.0, 0.0]);
        assert_eq!(gram_to_coeffs(&SymmetricMatrix::outer(&[1.0, -1.0])).coeffs(), &[1.0, -2.0, 1.0]);
    }

    #[test]
    fn gram_is_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = rng.gen_range(1..6);
            let q = random_sym(&mut rng, n);
            let x: f64 = rng.gen_range(-2.0..2.0);
            let z: Vec<f64> = (0..n).map(|k| x.powi(k as i32)).collect();
            assert!((gram_to_coeffs(&q).eval(x) - q.quadratic_form(&z)).abs() < 1e-10);
        }
    }

    #[test]
    fn sos_description_examples() {
        let iv = Interval::unit();
        // 1 - x^2 = 0 + (x+1)(1-x) * 1
        let d = sos_certificate_description(2, &iv);
        assert_eq!(d.num_vars, 3 + 3 + 1);
        let v = [1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0];
        assert!(d.holds(&v, 1e-12).unwrap());
        // (x - 0.3)^2 + 0.01: S = v v^T + diag(0.01, 0)
        let p = [0.09 + 0.01, -0.6, 1.0];
        let s = SymmetricMatrix::outer(&[-0.3, 1.0]).add_scaled(0.01, &SymmetricMatrix::from_fn(2, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 })).unwrap();
        let mut v = p.to_vec();
        v.extend_from_slice(s.packed());
        v.push(0.0);
        assert!(d.holds(&v, 1e-12).unwrap());
        let tpl = SosTemplate::new(2, &iv);
        let back = tpl.polynomial(&[s, SymmetricMatrix::zeros(1)]);
        for k in 0..3 {
            assert!((back.coeff(k) - p[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn sos_template_odd_degree() {
        let iv = Interval::new(0.0, 2.0).unwrap();
        let tpl = SosTemplate::new(3, &iv);
        assert_eq!(tpl.blocks.len(), 2);
        assert_eq!(tpl.blocks[0].0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grams: Vec<_> = tpl
            .blocks
            .iter()
            .map(|(d, _)| {
                let v: Vec<f64> = (0..*d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                SymmetricMatrix::outer(&v)
            })
            .collect();
        let p = tpl.polynomial(&grams);
        assert!(p.degree() <= 3);
        assert!(is_nonneg_on_interval(&p, &iv, 1e-12));
        // the description's equations hold for the same certificate
        let d = sos_certificate_description(3, &iv);
        let mut v = p.padded(3).coeffs().to_vec();
        for g in &grams {
            v.extend_from_slice(g.packed());
        }
        assert!(d.holds(&v, 1e-12).unwrap());
    }

    #[test]
    fn nonneg_examples() {
        let iv = Interval::unit();
        assert!(is_nonneg_on_interval(&Polynomial::new(vec![0.0, 0.0, 1.0]), &iv, 1e-9));
        assert!(!is_nonneg_on_interval(&Polynomial::x(), &iv, 1e-9));
    }

    #[test]
    fn psd_projection_examples() {
        let m = SymmetricMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(close(&project_psd(&m).unwrap(), &[vec![1.0, 0.0], vec![0.0, 0.0]], 1e-14));
        let m = SymmetricMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(close(&project_psd(&m).unwrap(), &[vec![0.5, 0.5], vec![0.5, 0.5]], 1e-14));
        let m = SymmetricMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!(close(&project_psd(&m).unwrap(), &m.to_dense(), 1e-12));
    }

    #[test]
    fn eigen_agrees_with_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let n = rng.gen_range(1..=9);
            let m = random_sym(&mut rng, n);
            let (vals, _) = m.eigen().unwrap();
            let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| m.get(i, j));
            let mut reference: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (a, b) in vals.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-10, "{vals:?} vs {reference:?}");
            }
        }
    }

    #[test]
    fn psd_projection_is_idempotent_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let n = rng.gen_range(1..=6);
            let m = random_sym(&mut rng, n);
            let k = random_sym(&mut rng, n);
            let pm = project_psd(&m).unwrap();
            let pk = project_psd(&k).unwrap();
            let ppm = project_psd(&pm).unwrap();
            assert!(ppm.add_scaled(-1.0, &pm).unwrap().frobenius_norm() <= 1e-10);
            let lhs = pm.add_scaled(-1.0, &pk).unwrap().frobenius_norm();
            let rhs = m.add_scaled(-1.0, &k).unwrap().frobenius_norm();
            assert!(lhs <= rhs + 1e-10);
            assert!(pm.min_eigenvalue().unwrap() > -1e-12);
        }
    }

    #[test]
    fn svec_projection_matches_matrix_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut scratch = PsdScratch::default();
        for _ in 0..50 {
            let n = rng.gen_range(1..=5);
            let m = random_sym(&mut rng, n);
            let mut x: Vec<f64> = (0..n)
                .flat_map(|i| (i..n).map(move |j| (i, j)))
                .map(|(i, j)| if i == j { m.get(i, j) } else { m.get(i, j) * std::f64::consts::SQRT_2 })
                .collect();
            project_psd_svec(&mut x, n, &mut scratch).unwrap();
            let p = project_psd(&m).unwrap();
            for i in 0..n {
                for j in i..n {
                    let v = x[packed_index(n, i, j)];
                    let v = if i == j { v } else { v / std::f64::consts::SQRT_2 };
                    assert!((v - p.get(i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dirac_grid_passes_and_convex_combinations_stay_inside() {
        let iv = Interval::unit();
        let blocks: Vec<_> = (0..100)
            .map(|i| MomentBlock::dirac(-1.0 + 2.0 * i as f64 / 99.0, 1.0, 6, iv))
            .collect();
        assert!(blocks.iter().all(|b| moment_cone_check(b, MEMBERSHIP_TOL)));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (a, b) = (&blocks[rng.gen_range(0..100)], &blocks[rng.gen_range(0..100)]);
            let t: f64 = rng.gen_range(0.0..1.0);
            let moments = a.moments.iter().zip(&b.moments).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            assert!(moment_cone_check(&MomentBlock { moments, piece: iv }, MEMBERSHIP_TOL));
        }
    }
}
