//! Fixed-seed inputs shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use willmore_core::samples::{example_family, random_metric, random_polynomial};
use willmore_core::{Jet, MetricJet, Rational, Scalar};

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

/// Random metric and a graph-like defining function `s + quadratic` at order `d + 2`.
pub fn random_instance(d: usize) -> (MetricJet<Rational>, Jet<Rational>) {
    let mut rng = rng();
    let n = d + 2;
    let m = random_metric(&mut rng, d, n, 2);
    let s = &Jet::coordinate(d, n, 0, Rational::zero()).expect("axis 0") + &random_polynomial(&mut rng, d, n, 2, 2, 1);
    (m, s)
}

/// The `s^(d-3) y^3` member of the example family at `y = 0`.
pub fn cubic_example(d: usize) -> (MetricJet<Rational>, Jet<Rational>) {
    let n = d + 2;
    let f: Vec<Rational> = [0, 0, 0, 1].iter().map(|&c| Rational::integer(c)).collect();
    let m = example_family(d, n, d - 3, &f, &Rational::zero());
    (m, Jet::coordinate(d, n, 0, Rational::zero()).expect("axis 0"))
}

/// Two dense random jets for multiplication timings.
pub fn dense_pair(d: usize, n: usize) -> (Jet<Rational>, Jet<Rational>) {
    let mut rng = rng();
    (random_polynomial(&mut rng, d, n, 0, n, 5), random_polynomial(&mut rng, d, n, 0, n, 5))
}
