//! Reproducible random inputs: polynomial metrics, conformal factors, jets.
//!
//! Metrics are `δ + (random terms of degree 1..=max_degree)` so that the
//! base-point value is the identity; this keeps `|ds|²(p)` a perfect square
//! for coordinate defining functions and survives conformal rescaling.

use rand::Rng;

use crate::geometry::MetricJet;
use crate::jet::{Jet, Layout};
use crate::scalar::{Rational, Scalar};
use crate::tensor::{Slot, Symmetry, TensorJet};

/// Random rational in `[-bound, bound]` with denominator at most 4.
pub fn rational_in<R: Rng>(rng: &mut R, bound: i64) -> Rational {
    let den = rng.gen_range(1..=4);
    let num = rng.gen_range(-bound * den..=bound * den);
    Rational::new(num, den)
}

/// Random polynomial jet with terms of degree `min_degree..=max_degree`.
pub fn random_polynomial<R: Rng>(
    rng: &mut R,
    dim: usize,
    order: usize,
    min_degree: usize,
    max_degree: usize,
    bound: i64,
) -> Jet<Rational> {
    let layout = Layout::get(dim, order.max(max_degree));
    let mut terms = Vec::new();
    for k in min_degree..=max_degree.min(order) {
        for i in layout.block(k) {
            terms.push((layout.exponents(i).to_vec(), rational_in(rng, bound)));
        }
    }
    Jet::from_terms(dim, order, terms.iter().map(|(e, c)| (e.as_slice(), c.clone())))
        .expect("dimensions agree")
}

/// `δ_ab + h_ab` with `h` a random symmetric matrix of polynomials of degree `1..=max_degree`.
pub fn random_metric<R: Rng>(
    rng: &mut R,
    dim: usize,
    order: usize,
    max_degree: usize,
) -> MetricJet<Rational> {
    let mut g = vec![vec![Jet::zero(dim, order); dim]; dim];
    for a in 0..dim {
        for b in a..dim {
            let mut h = random_polynomial(rng, dim, order, 1, max_degree, 2);
            if a == b {
                h = &h + &Jet::one(dim, order);
            }
            g[a][b] = h.clone();
            g[b][a] = h;
        }
    }
    MetricJet::new(g).expect("identity at the base point is positive definite")
}

/// Positive conformal factor: a constant in `[1/2, 2]` plus random terms of degree 1..=2.
pub fn random_conformal_factor<R: Rng>(rng: &mut R, dim: usize, order: usize) -> Jet<Rational> {
    let num = rng.gen_range(2..=8);
    let c = Rational::new(num, 4);
    &Jet::constant(dim, order, c) + &random_polynomial(rng, dim, order, 1, 2, 1)
}

/// `ds² + 2 s^k f(y) ds dy + dy² + Σ dx_i²` in coordinates `(s, y, x_2, …)`, expanded at
/// `(0, y0, 0, …)`; `f(y) = Σ f_coeffs[j] y^j`.
pub fn example_family(
    dim: usize,
    order: usize,
    exponent: usize,
    f_coeffs: &[Rational],
    y0: &Rational,
) -> MetricJet<Rational> {
    assert!(dim >= 2, "example family needs s and y");
    let s = Jet::coordinate(dim, order, 0, Rational::zero()).expect("axis 0");
    let y = Jet::coordinate(dim, order, 1, y0.clone()).expect("axis 1");
    let mut f = Jet::zero(dim, order);
    let mut yk = Jet::one(dim, order);
    for c in f_coeffs {
        f = &f + &yk.scale(c);
        yk = yk.mul_to(&y, order);
    }
    let off = s.powi(exponent).mul_to(&f, order);
    let mut g = vec![vec![Jet::zero(dim, order); dim]; dim];
    for (a, row) in g.iter_mut().enumerate() {
        row[a] = Jet::one(dim, order);
    }
    g[0][1] = off.clone();
    g[1][0] = off;
    MetricJet::new(g).expect("identity at the base point")
}

/// `ds² + γ(s, y)` with `γ(p) = δ`: `s = x^0` is a distance function.
pub fn gaussian_metric<R: Rng>(rng: &mut R, dim: usize, order: usize) -> MetricJet<Rational> {
    let mut g = vec![vec![Jet::zero(dim, order); dim]; dim];
    g[0][0] = Jet::one(dim, order);
    for a in 1..dim {
        for b in a..dim {
            let mut e = random_polynomial(rng, dim, order, 1, 2, 1).scale(&Rational::new(1, 2));
            if a == b {
                e = &e + &Jet::one(dim, order);
            }
            g[a][b] = e.clone();
            g[b][a] = e;
        }
    }
    MetricJet::new(g).expect("identity at the base point")
}

/// Random symmetric (0,2) tensor with polynomial entries of degree ≤ 2.
pub fn random_symmetric<R: Rng>(rng: &mut R, dim: usize, order: usize) -> TensorJet<Rational> {
    let mut h = TensorJet::zeros(dim, vec![Slot::Down, Slot::Down], order);
    for a in 0..dim {
        for b in a..dim {
            let e = random_polynomial(rng, dim, order, 0, 2, 2);
            h.set(&[a, b], e.clone());
            h.set(&[b, a], e);
        }
    }
    h.with_symmetry(Symmetry::Symmetric)
}

/// Exact `f64` copy of a rational jet, for finite-difference oracles.
pub fn to_float(j: &Jet<Rational>) -> Jet<f64> {
    j.map(|c| c.to_f64())
}
