//! Seeded synthetic instances.

use crate::error::Result;
use crate::poly::{Interval, PiecewisePolynomial, Polynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Global polynomials of degree `deg` whose coefficients, in the
/// coordinate that maps `domain` to `[-1, 1]`, are uniform on `[-1, 1]`.
pub fn random_polynomials(n: usize, deg: usize, domain: &Interval, seed: u64) -> Vec<Polynomial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let local = Polynomial::new((0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect());
            local.from_local(domain)
        })
        .collect()
}

/// [`random_polynomials`] laid onto the given knots.
pub fn random_unaries(n: usize, deg: usize, knots: &[f64], seed: u64) -> Result<Vec<PiecewisePolynomial>> {
    let domain = Interval::new(knots[0], knots[knots.len() - 1])?;
    random_polynomials(n, deg, &domain, seed)
        .iter()
        .map(|p| PiecewisePolynomial::from_polynomial(p, knots.to_vec()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let iv = Interval::new(0.0, 4.0).unwrap();
        let a = random_polynomials(3, 4, &iv, 1);
        assert_eq!(a, random_polynomials(3, 4, &iv, 1));
        assert_ne!(a, random_polynomials(3, 4, &iv, 2));
        assert!(a.iter().all(|p| p.degree() == 4));
        for p in &a {
            let local = p.to_local(&iv);
            assert!(local.coeffs().iter().all(|c| c.abs() <= 1.0 + 1e-12));
        }
        let u = random_unaries(2, 4, &[0.0, 1.0, 4.0], 1).unwrap();
        assert_eq!(u[0].num_pieces(), 2);
    }
}
