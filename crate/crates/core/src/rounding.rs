//! Labelings from (approximately) converged moments, and the original
//! nonconvex energy of a labeling.

use crate::error::{Error, Result};
use crate::graph::CoeffField;
use crate::model::{DualConfig, Problem};

/// Floor used when normalizing a piece's first moment by its mass.
pub const MASS_EPS: f64 = 1e-12;
/// Below this every piece counts as empty.
pub const DEGENERATE_MASS: f64 = 1e-9;

pub type Labeling = Vec<f64>;

/// Which mean [`round_mean`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanVariant {
    /// Mean of the measure, from the first moments of all pieces.
    #[default]
    MomentMean,
    /// Left knot of every piece weighted by the piece mass.
    KnotWeighted,
}

fn check_mass(y: &CoeffField, u: usize) -> Result<()> {
    if (0..y.pieces()).all(|k| y.piece(u, k)[0] < DEGENERATE_MASS) {
        return Err(Error::DegenerateMass(u));
    }
    Ok(())
}

fn check_shape(y: &CoeffField, config: &DualConfig) -> Result<()> {
    if y.pieces() != config.pieces() || y.width() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "moments with {} pieces of width {} for {} pieces",
            y.pieces(),
            y.width(),
            config.pieces()
        )));
    }
    Ok(())
}

/// Picks the piece of largest mass (ties to the smaller index) and returns
/// its mass-normalized mean, clamped to that piece.
pub fn round_mode_mean(y: &CoeffField, config: &DualConfig) -> Result<Labeling> {
    check_shape(y, config)?;
    (0..y.num_blocks())
        .map(|u| {
            check_mass(y, u)?;
            let mut best = 0;
            for k in 1..y.pieces() {
                if y.piece(u, k)[0] > y.piece(u, best)[0] {
                    best = k;
                }
            }
            let m = y.piece(u, best);
            let s = (m[1] / m[0].max(MASS_EPS)).clamp(-1.0, 1.0);
            let iv = config.piece_interval(best);
            Ok(iv.clamp(iv.from_local(s)))
        })
        .collect()
}

/// Mean of each vertex's measure, see [`MeanVariant`], clamped to the domain.
pub fn round_mean(y: &CoeffField, config: &DualConfig, variant: MeanVariant) -> Result<Labeling> {
    check_shape(y, config)?;
    let dom = config.domain();
    (0..y.num_blocks())
        .map(|u| {
            check_mass(y, u)?;
            let mass: f64 = (0..y.pieces()).map(|k| y.piece(u, k)[0]).sum();
            let mean: f64 = (0..y.pieces())
                .map(|k| {
                    let m = y.piece(u, k);
                    let iv = config.piece_interval(k);
                    match variant {
                        MeanVariant::MomentMean => iv.center() * m[0] + iv.half_width() * m[1],
                        MeanVariant::KnotWeighted => iv.a * m[0],
                    }
                })
                .sum();
            Ok(dom.clamp(mean / mass.max(MASS_EPS)))
        })
        .collect()
}

/// `sum_u f_u(x_u) + sum_e w_e d(x_u, x_v)`.
pub fn rounded_energy(x: &[f64], problem: &Problem) -> f64 {
    let unary: f64 = problem.unaries().iter().zip(x).map(|(f, &xu)| f.eval(xu)).sum();
    let pair: f64 = problem
        .graph()
        .edges()
        .iter()
        .zip(problem.edge_weights())
        .map(|(&(u, v), w)| w * problem.metric().distance(x[u], x[v]))
        .sum();
    unary + pair
}

/// Dirac moments of `x` in local coordinates, for tests and warm starts.
pub fn dirac_moments(labels: &[f64], config: &DualConfig, deg: usize) -> CoeffField {
    let kk = config.pieces();
    let mut y = CoeffField::zeros(labels.len(), kk, deg + 1);
    for (u, &x) in labels.iter().enumerate() {
        let k = (0..kk).find(|&k| x <= config.knots()[k + 1]).unwrap_or(kk - 1);
        let s = config.piece_interval(k).to_local(x);
        for (j, v) in y.piece_mut(u, k).iter_mut().enumerate() {
            *v = s.powi(j as i32);
        }
    }
    y
}
