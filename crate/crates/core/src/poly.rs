//! Univariate polynomials in the monomial basis and lower-semicontinuous
//! piecewise polynomials over a knot sequence.
//!
//! Coefficients are stored in ascending order (`coeffs[k]` multiplies `x^k`).
//! Minimization on an interval is exact up to root-isolation accuracy: the
//! candidates are the interval endpoints and the real roots of the derivative.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Bisection tolerance used when callers do not pass one explicitly.
pub const ROOT_TOL: f64 = 1e-10;
/// Iteration cap per bracket.
const MAX_BISECTIONS: usize = 200;
/// Least-squares systems with a larger condition estimate are rejected.
const MAX_CONDITION: f64 = 1e12;

/// A closed interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInput(format!("interval [{a}, {b}] is empty")));
        }
        Ok(Self { a, b })
    }

    /// The reference interval `[-1, 1]` all per-piece cone constraints live on.
    pub fn unit() -> Self {
        Self { a: -1.0, b: 1.0 }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    /// Map `x` in this interval to the local coordinate `s` in `[-1, 1]`.
    pub fn to_local(&self, x: f64) -> f64 {
        (x - self.center()) / self.half_width()
    }

    pub fn from_local(&self, s: f64) -> f64 {
        self.center() + self.half_width() * s
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.a, self.b)
    }
}

/// Dense univariate polynomial, ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial; an empty slice yields the zero polynomial `[0]`.
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self::zero();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `x`, the identity polynomial.
    pub fn x() -> Self {
        Self { coeffs: vec![0.0, 1.0] }
    }

    /// Product of `(x - r)` over the given roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Self::constant(1.0), |acc, &r| &acc * &Self::new(vec![-r, 1.0]))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `x^k`, zero past the stored length.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Index of the last stored entry.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Degree after discarding trailing exact zeros.
    pub fn effective_degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Drops trailing exact zeros, keeping at least one coefficient.
    pub fn trimmed(&self) -> Self {
        Self::new(self.coeffs[..=self.effective_degree()].to_vec())
    }

    /// Zero-pads to `deg + 1` coefficients. Never truncates.
    pub fn padded(&self, deg: usize) -> Self {
        let mut c = self.coeffs.clone();
        if c.len() < deg + 1 {
            c.resize(deg + 1, 0.0);
        }
        Self { coeffs: c }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `p(alpha + beta * s)` as a polynomial in `s`.
    pub fn compose_affine(&self, alpha: f64, beta: f64) -> Self {
        let inner = Self::new(vec![alpha, beta]);
        let mut out = Self::zero();
        for &c in self.coeffs.iter().rev() {
            out = &(&out * &inner) + &Self::constant(c);
        }
        // the seed zero leaves one exact-zero coefficient on top
        out.coeffs.truncate(self.coeffs.len());
        out
    }

    /// Re-expresses a polynomial in the global coordinate `x` as a polynomial
    /// in the local coordinate `s` of `iv`, where `x = center + half_width * s`.
    pub fn to_local(&self, iv: &Interval) -> Self {
        self.compose_affine(iv.center(), iv.half_width())
    }

    /// Inverse of [`Polynomial::to_local`].
    pub fn from_local(&self, iv: &Interval) -> Self {
        let h = iv.half_width();
        self.compose_affine(-iv.center() / h, 1.0 / h)
    }

    /// Upper bound on `|p|` over `iv` from the coefficient magnitudes.
    pub fn magnitude_bound(&self, iv: &Interval) -> f64 {
        let m = iv.a.abs().max(iv.b.abs()).max(1.0);
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * m + c.abs())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

pub fn eval(p: &Polynomial, x: f64) -> f64 {
    p.eval(x)
}

pub fn derivative(p: &Polynomial) -> Polynomial {
    p.derivative()
}

/// All real roots of `p` in `[a, b]`, sorted, multiplicities collapsed.
///
/// Monotone brackets come from the roots of the derivative (found
/// recursively); sign changes are refined by bisection. Critical points where
/// `p` vanishes numerically are reported as (even-multiplicity) roots.
pub fn roots_in_interval(p: &Polynomial, iv: &Interval, tol: f64) -> Result<Vec<f64>> {
    if p.is_zero() {
        return Err(Error::IdenticallyZero);
    }
    let p = p.trimmed();
    let tol = if tol > 0.0 { tol } else { ROOT_TOL };
    let mut roots = raw_roots(&p, iv, tol);
    roots.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match out.last() {
            Some(&last) if r - last <= 10.0 * tol => {}
            _ => out.push(r),
        }
    }
    Ok(out)
}

fn raw_roots(p: &Polynomial, iv: &Interval, tol: f64) -> Vec<f64> {
    let deg = p.effective_degree();
    match deg {
        0 => Vec::new(),
        1 => {
            let r = -p.coeff(0) / p.coeff(1);
            if iv.contains(r) {
                vec![r]
            } else {
                Vec::new()
            }
        }
        _ => {
            let crit = raw_roots(&p.derivative().trimmed(), iv, tol);
            let zero_eps = 1e-13 * p.magnitude_bound(iv);
            let mut marks = Vec::with_capacity(crit.len() + 2);
            marks.push(iv.a);
            marks.extend(crit.iter().copied().filter(|c| *c > iv.a && *c < iv.b));
            marks.push(iv.b);
            marks.sort_by(f64::total_cmp);
            let mut roots = Vec::new();
            for w in marks.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let (flo, fhi) = (p.eval(lo), p.eval(hi));
                if flo.abs() <= zero_eps {
                    roots.push(lo);
                }
                if fhi.abs() <= zero_eps {
                    roots.push(hi);
                }
                if flo.abs() > zero_eps && fhi.abs() > zero_eps && (flo < 0.0) != (fhi < 0.0) {
                    roots.push(bisect(p, lo, hi, flo, tol));
                }
            }
            roots
        }
    }
}

fn bisect(p: &Polynomial, mut lo: f64, mut hi: f64, flo: f64, tol: f64) -> f64 {
    let neg_lo = flo < 0.0;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = p.eval(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Global minimum of `p` on `iv`: `(argmin, min)`, ties toward smaller `x`.
pub fn minimize_on_interval(p: &Polynomial, iv: &Interval, tol: f64) -> (f64, f64) {
    let dp = p.derivative();
    let mut candidates = vec![iv.a, iv.b];
    if !dp.is_zero() {
        if let Ok(r) = roots_in_interval(&dp, iv, tol) {
            candidates.extend(r);
        }
    }
    candidates.sort_by(f64::total_cmp);
    let tie = 1e-12 * p.magnitude_bound(iv).max(1e-300);
    let mut best = (candidates[0], p.eval(candidates[0]));
    for &x in &candidates[1..] {
        let v = p.eval(x);
        if v < best.1 - tie {
            best = (x, v);
        }
    }
    best
}

/// Lower-semicontinuous piecewise polynomial: piece `k` lives on
/// `[knots[k], knots[k+1]]`; overlapping endpoints take the smaller value.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    knots: Vec<f64>,
    pieces: Vec<Polynomial>,
}

impl PiecewisePolynomial {
    pub fn new(knots: Vec<f64>, pieces: Vec<Polynomial>) -> Result<Self> {
        validate_knots(&knots)?;
        if pieces.len() + 1 != knots.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} knots need {} pieces, got {}",
                knots.len(),
                knots.len() - 1,
                pieces.len()
            )));
        }
        Ok(Self { knots, pieces })
    }

    /// The same global polynomial on every piece.
    pub fn from_polynomial(p: &Polynomial, knots: Vec<f64>) -> Result<Self> {
        let k = knots.len().saturating_sub(1);
        Self::new(knots, vec![p.clone(); k])
    }

    /// The zero function on the given knots.
    pub fn zero(knots: Vec<f64>) -> Result<Self> {
        Self::from_polynomial(&Polynomial::zero(), knots)
    }

    /// Continuous piecewise-linear interpolant of `values` at `knots`.
    pub fn linear_interpolant(knots: Vec<f64>, values: &[f64]) -> Result<Self> {
        if values.len() != knots.len() {
            return Err(Error::ShapeMismatch("one value per knot".into()));
        }
        validate_knots(&knots)?;
        let pieces = knots
            .windows(2)
            .zip(values.windows(2))
            .map(|(t, v)| {
                let slope = (v[1] - v[0]) / (t[1] - t[0]);
                Polynomial::new(vec![v[0] - slope * t[0], slope])
            })
            .collect();
        Self::new(knots, pieces)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn piece_interval(&self, k: usize) -> Interval {
        Interval { a: self.knots[k], b: self.knots[k + 1] }
    }

    pub fn domain(&self) -> Interval {
        Interval { a: self.knots[0], b: self.knots[self.knots.len() - 1] }
    }

    /// Largest stored per-piece degree.
    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(|p| p.effective_degree()).max().unwrap_or(0)
    }

    /// Minimum over the pieces whose interval contains `x`; `+inf` outside.
    pub fn eval(&self, x: f64) -> f64 {
        let mut best = f64::INFINITY;
        for (k, p) in self.pieces.iter().enumerate() {
            if self.piece_interval(k).contains(x) {
                best = best.min(p.eval(x));
            }
        }
        best
    }

    /// Re-expresses the function on a refinement of its knots. Each new piece
    /// must lie inside one old piece.
    pub fn restrict_to_knots(&self, knots: &[f64]) -> Result<Self> {
        validate_knots(knots)?;
        let span = self.domain().width();
        let eps = 1e-12 * span.max(1.0);
        let mut pieces = Vec::with_capacity(knots.len() - 1);
        for w in knots.windows(2) {
            let k = (0..self.num_pieces())
                .find(|&k| w[0] >= self.knots[k] - eps && w[1] <= self.knots[k + 1] + eps)
                .ok_or_else(|| {
                    Error::ConfigMismatch(format!(
                        "piece [{}, {}] straddles an existing knot",
                        w[0], w[1]
                    ))
                })?;
            pieces.push(self.pieces[k].clone());
        }
        Self::new(knots.to_vec(), pieces)
    }

    pub fn map_pieces(&self, f: impl Fn(usize, &Polynomial) -> Polynomial) -> Self {
        Self {
            knots: self.knots.clone(),
            pieces: self.pieces.iter().enumerate().map(|(k, p)| f(k, p)).collect(),
        }
    }
}

pub(crate) fn validate_knots(knots: &[f64]) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::InvalidInput("need at least two knots".into()));
    }
    if knots.iter().any(|t| !t.is_finite()) || knots.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("knots must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `K + 1` equally spaced knots spanning `iv`.
pub fn uniform_knots(iv: &Interval, pieces: usize) -> Vec<f64> {
    let k = pieces.max(1);
    (0..=k)
        .map(|i| {
            if i == k {
                iv.b
            } else {
                iv.a + iv.width() * i as f64 / k as f64
            }
        })
        .collect()
}

/// Global minimum over all pieces, ties toward smaller `x` then smaller piece.
pub fn piecewise_min(f: &PiecewisePolynomial, tol: f64) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY);
    for (k, p) in f.pieces.iter().enumerate() {
        let iv = f.piece_interval(k);
        let (x, v) = minimize_on_interval(p, &iv, tol);
        let tie = 1e-12 * p.magnitude_bound(&iv).max(1e-300);
        if v < best.1 - tie || ((v - best.1).abs() <= tie && x < best.0) {
            best = (x, v);
        }
    }
    best
}

/// Least-squares polynomial fit of degree `deg` to `(x, value)` samples.
pub fn fit_least_squares(samples: &[(f64, f64)], deg: usize) -> Result<Polynomial> {
    if samples.len() < deg + 1 {
        return Err(Error::InsufficientSamples { piece: 0, have: samples.len(), need: deg + 1 });
    }
    let design = DMatrix::from_fn(samples.len(), deg + 1, |i, j| samples[i].0.powi(j as i32));
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    Ok(Polynomial::new(lstsq(design, rhs)?))
}

/// Solves `min ||A c - b||` by SVD, rejecting numerically singular systems.
fn lstsq(design: DMatrix<f64>, rhs: DVector<f64>) -> Result<Vec<f64>> {
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient(cond));
    }
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(sol.iter().copied().collect())
}

/// Continuous piecewise polynomial lying below every `(label, cost)` sample.
///
/// Each piece is fitted in its local coordinate and shifted under its own
/// samples; adjacent pieces are then joined by averaging the endpoint values
/// and refitting with those values interpolated, and the joined function is
/// shifted down once more by its largest positive residual.
pub fn fit_piecewise_under_approx(
    costs: &[(f64, f64)],
    knots: &[f64],
    deg: usize,
) -> Result<PiecewisePolynomial> {
    validate_knots(knots)?;
    let num_pieces = knots.len() - 1;
    let ivs: Vec<Interval> = knots.windows(2).map(|w| Interval { a: w[0], b: w[1] }).collect();
    let local_samples: Vec<Vec<(f64, f64)>> = ivs
        .iter()
        .map(|iv| {
            costs
                .iter()
                .filter(|(x, _)| iv.contains(*x))
                .map(|&(x, c)| (iv.to_local(x).clamp(-1.0, 1.0), c))
                .collect()
        })
        .collect();
    for (k, s) in local_samples.iter().enumerate() {
        if s.len() < deg + 1 {
            return Err(Error::InsufficientSamples { piece: k, have: s.len(), need: deg + 1 });
        }
    }

    let mut local: Vec<Polynomial> = Vec::with_capacity(num_pieces);
    for s in &local_samples {
        let p = fit_least_squares(s, deg)?;
        let shift = max_excess(&p, s);
        local.push(&p - &Polynomial::constant(shift.max(0.0)));
    }

    // Averaged knot values; domain endpoints keep their single piece value.
    let mut knot_vals = vec![0.0; num_pieces + 1];
    knot_vals[0] = local[0].eval(-1.0);
    knot_vals[num_pieces] = local[num_pieces - 1].eval(1.0);
    for j in 1..num_pieces {
        knot_vals[j] = 0.5 * (local[j - 1].eval(1.0) + local[j].eval(-1.0));
    }

    let mut joined = Vec::with_capacity(num_pieces);
    for (k, s) in local_samples.iter().enumerate() {
        joined.push(fit_with_endpoints(s, deg, knot_vals[k], knot_vals[k + 1])?);
    }
    let shift = joined
        .iter()
        .zip(&local_samples)
        .map(|(p, s)| max_excess(p, s))
        .fold(0.0_f64, f64::max);
    let pieces = joined
        .iter()
        .zip(&ivs)
        .map(|(p, iv)| (&*p - &Polynomial::constant(shift)).from_local(iv))
        .collect();
    PiecewisePolynomial::new(knots.to_vec(), pieces)
}

fn max_excess(p: &Polynomial, samples: &[(f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|&(s, c)| p.eval(s) - c)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Least-squares fit on `[-1, 1]` with `q(-1) = left`, `q(1) = right`:
/// `q = chord + (1 - s^2) r` with `deg r = deg - 2`.
fn fit_with_endpoints(samples: &[(f64, f64)], deg: usize, left: f64, right: f64) -> Result<Polynomial> {
    let chord = Polynomial::new(vec![0.5 * (left + right), 0.5 * (right - left)]);
    if deg < 2 {
        return Ok(chord);
    }
    let bump = Polynomial::new(vec![1.0, 0.0, -1.0]);
    let inner = deg - 2;
    let interior: Vec<&(f64, f64)> = samples.iter().filter(|(s, _)| s.abs() < 1.0).collect();
    if interior.len() < inner + 1 {
        return Ok(chord);
    }
    let design = DMatrix::from_fn(interior.len(), inner + 1, |i, j| {
        let s = interior[i].0;
        (1.0 - s * s) * s.powi(j as i32)
    });
    let rhs = DVector::from_iterator(
        interior.len(),
        interior.iter().map(|&&(s, c)| c - chord.eval(s)),
    );
    let r = Polynomial::new(lstsq(design, rhs)?);
    Ok((&chord + &(&bump * &r)).padded(deg))
}
