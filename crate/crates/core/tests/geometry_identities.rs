use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use willmore_core::geometry::{covariant_derivative, curvature_pack, kulkarni_nomizu_gp};
use willmore_core::hypersurface::divergence;
use willmore_core::samples::random_metric;
use willmore_core::{Rational, Slot, TensorJet};

type T = TensorJet<Rational>;

fn antisym(r: &T, perm: &[usize], sign: i64) -> bool {
    let p = r.permute(perm).unwrap().scale(&Rational::integer(sign));
    r.sub(&p).unwrap().is_zero()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn curvature_identities(seed in any::<u64>(), d in 3usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_metric(&mut rng, d, 4, 2);
        let p = curvature_pack(&m).unwrap();
        let r = p.riemann();

        prop_assert!(antisym(r, &[1, 0, 2, 3], -1));
        prop_assert!(antisym(r, &[0, 1, 3, 2], -1));
        prop_assert!(antisym(r, &[2, 3, 0, 1], 1));
        let cyc = r.add(&r.permute(&[1, 2, 0, 3]).unwrap()).unwrap().add(&r.permute(&[2, 0, 1, 3]).unwrap()).unwrap();
        prop_assert!(cyc.is_zero(), "first Bianchi");

        // R = W + g∧P and W is totally trace-free.
        let w = p.weyl();
        let resid = r.sub(w).unwrap().sub(&kulkarni_nomizu_gp(m.g(), &p.schouten)).unwrap();
        prop_assert!(resid.is_zero());
        for i in 0..4 {
            for j in i + 1..4 {
                prop_assert!(m.trace(w, i, j).unwrap().is_zero(), "W trace ({i},{j})");
            }
        }

        // tr P = J = Sc / (2(d - 1)).
        let trp = m.trace(&p.schouten, 0, 1).unwrap();
        let j_from_sc = p.sc.scale(&Rational::new(1, 2 * (d as i64 - 1)));
        prop_assert_eq!(trp.as_scalar().unwrap().truncate(p.j.order()), p.j.clone());
        prop_assert_eq!(p.j.truncate(j_from_sc.order()), j_from_sc.truncate(p.j.order()));

        // ∇^a Ric_ab = ½ ∇_b Sc.
        let div_ric = divergence(&p, &p.ricci).unwrap();
        let dsc = T::from_fn(d, vec![Slot::Down], |i| {
            p.sc.differentiate(i[0]).unwrap().scale(&Rational::new(1, 2))
        });
        prop_assert!(div_ric.sub(&dsc).unwrap().is_zero(), "contracted Bianchi");

        // (d - 3) C_abc = ∇^d W_dcab.
        if d >= 4 {
            let div_w = m.trace(&covariant_derivative(&p, w).unwrap(), 0, 1).unwrap();
            let lhs = p.cotton().unwrap().scale(&Rational::integer(d as i64 - 3));
            let rhs = div_w.permute(&[1, 2, 0]).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().is_zero(), "Cotton vs divergence of Weyl");
        }
    }
}
