use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use willmore_core::geometry::curvature_pack;
use willmore_core::samples::{random_conformal_factor, random_metric, random_polynomial};
use willmore_core::yamabe::{i_squared, solve_singular_yamabe, SolverOptions, UpdateBasis};
use willmore_core::{restrict, transverse_order, Jet, Rational, Scalar};

type J = Jet<Rational>;

fn defining_function(rng: &mut ChaCha8Rng, d: usize, n: usize) -> J {
    &J::coordinate(d, n, 0, Rational::zero()).unwrap() + &random_polynomial(rng, d, n, 2, 2, 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn residual_vanishes_to_order_d(seed in any::<u64>(), d in 3usize..=5) {
        let n = d + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_metric(&mut rng, d, n, 2);
        let s = defining_function(&mut rng, d, n);
        let p = curvature_pack(&m).unwrap();
        let sol = solve_singular_yamabe(&p, &s, SolverOptions::default()).unwrap();
        prop_assert!(sol.residual_order >= d);
        prop_assert!(sol.f.constant_term().is_positive());
        // independent recomputation of I² from σ̃
        let i2 = i_squared(&p, &sol.sigma_tilde).unwrap();
        let resid = &i2 - &J::one(d, i2.order());
        prop_assert!(transverse_order(&resid, &s).unwrap().at_least >= d);
    }

    #[test]
    fn b_is_basis_independent_and_has_weight_minus_d(seed in any::<u64>(), d in 3usize..=5) {
        let n = d + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_metric(&mut rng, d, n, 2);
        let s = defining_function(&mut rng, d, n);
        let om = random_conformal_factor(&mut rng, d, n);
        let p = curvature_pack(&m).unwrap();
        let a = solve_singular_yamabe(&p, &s, SolverOptions::default()).unwrap();
        let b = solve_singular_yamabe(&p, &s, SolverOptions { basis: UpdateBasis::Sigma }).unwrap();
        let k = a.b_at_sigma.order().min(b.b_at_sigma.order());
        prop_assert_eq!(a.b_at_sigma.truncate(k), b.b_at_sigma.truncate(k));

        // (Ω²g, Ωσ̃) represents the same density: B picks up Ω^{-d} on Σ.
        let p2 = curvature_pack(&m.conformal_rescale(&om).unwrap()).unwrap();
        let c = solve_singular_yamabe(&p2, &s, SolverOptions::default()).unwrap();
        let moved = &a.b * &om.reciprocal().unwrap().powi(d);
        let (x, _) = restrict(&moved, &s).unwrap();
        let k = x.order().min(c.b_at_sigma.order());
        prop_assert_eq!(x.truncate(k), c.b_at_sigma.truncate(k));
    }
}
