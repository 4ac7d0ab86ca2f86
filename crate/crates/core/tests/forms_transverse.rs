use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use willmore_core::forms::{
    delta_k_apply, higher_form_leading, tangential_tracefree, third_form, transverse_order_probe,
};
use willmore_core::geometry::{curvature_pack, MetricJet};
use willmore_core::hypersurface::{conormal_data, reduce_on_sigma};
use willmore_core::samples::{gaussian_metric, random_metric, random_polynomial, random_symmetric};
use willmore_core::tractor::TractorBundle;
use willmore_core::yamabe::{solve_singular_yamabe, SolverOptions};
use willmore_core::{EngineError, Jet, Rational, Scalar, Slot, TensorJet};

type Q = Rational;

fn s_coord(d: usize, n: usize) -> Jet<Q> {
    Jet::coordinate(d, n, 0, Q::zero()).unwrap()
}

#[test]
fn forms_have_transverse_order_m_minus_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    for (d, m) in [(4, 2), (5, 2), (4, 3), (5, 3), (6, 4)] {
        let n = m + 2;
        let metric = random_metric(&mut rng, d, n, 2);
        let h = random_symmetric(&mut rng, d, n);
        let form = transverse_order_probe(&metric, &s_coord(d, n), m, &h).unwrap();
        assert_eq!(form.transverse_order_measured, Some(m - 1), "d = {d}, m = {m}");
        assert_eq!(form.weight, 3 - m as i64);
    }
}

#[test]
fn delta_k_has_transverse_order_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(92);
    for d in [4, 6] {
        for k in 1..=3 {
            let n = 2 * k + 2;
            let metric = random_metric(&mut rng, d, n, 2);
            let p = curvature_pack(&metric).unwrap();
            let tb = TractorBundle::new(&p);
            let s = s_coord(d, n);
            let frame = conormal_data(&p, &s).unwrap();
            let v = &Jet::one(d, n) + &random_polynomial(&mut rng, d, n, 1, 2, 2);
            let run = |power: usize| {
                let t = TensorJet::scalar(&s.powi(power) * &v).with_weight(Q::integer(1));
                let r = delta_k_apply(&tb, &frame, &t, k).unwrap();
                reduce_on_sigma(&r, &frame.s).unwrap()
            };
            assert!(!run(k).truncate(0).is_zero(), "d = {d}, k = {k}");
            assert!(run(k + 1).is_zero(), "d = {d}, k = {k}");
        }
    }
}

/// III, `∘⊤` of the middle block of `δ₁ P_AB`, and `∘⊤∇_n IIo^e`, each reduced on Σ.
fn third_form_routes(metric: &MetricJet<Q>) -> [TensorJet<Q>; 3] {
    let (d, n) = (metric.dim(), metric.order());
    let p = curvature_pack(metric).unwrap();
    let sol = solve_singular_yamabe(&p, &s_coord(d, n), SolverOptions::default()).unwrap();
    let f = conormal_data(&p, &sol.sigma_tilde).unwrap();
    let tb = TractorBundle::new(&p);
    let dp = delta_k_apply(&tb, &f, &tb.p_tractor(&sol.sigma_tilde).unwrap(), 1).unwrap();
    let mid = TensorJet::from_fn(d, vec![Slot::Down, Slot::Down], |i| dp.get(&[i[0] + 1, i[1] + 1]).clone());
    let red = |t: &TensorJet<Q>| reduce_on_sigma(t, &f.s).unwrap();
    [
        red(&third_form(&p, &f).unwrap().tensor),
        red(&tangential_tracefree(&p, &f, &mid).unwrap()),
        red(&higher_form_leading(&p, &f, 3).unwrap().tensor),
    ]
}

#[test]
fn third_form_routes_agree_at_leading_order() {
    // Perturbing g by s² h / 2 moves all three routes by the same amount on Σ.
    let mut rng = ChaCha8Rng::seed_from_u64(93);
    for d in [4, 6] {
        let n = d + 2;
        let base = gaussian_metric(&mut rng, d, n);
        let h = random_symmetric(&mut rng, d, n);
        let bump = s_coord(d, n).powi(2).scale(&Q::new(1, 2));
        let mut g = base.matrix();
        for (a, row) in g.iter_mut().enumerate() {
            for (b, e) in row.iter_mut().enumerate() {
                *e = &*e + &h.get(&[a, b]).mul_to(&bump, n);
            }
        }
        let before = third_form_routes(&base);
        let after = third_form_routes(&MetricJet::new(g).unwrap());
        let moved: Vec<TensorJet<Q>> = before
            .iter()
            .zip(&after)
            .map(|(x, y)| {
                let k = x.order().min(y.order());
                y.truncate(k).sub(&x.truncate(k)).unwrap()
            })
            .collect();
        let k = moved.iter().map(TensorJet::order).min().unwrap();
        assert!(!moved[2].truncate(0).is_zero());
        assert_eq!(moved[0].truncate(k), moved[2].truncate(k), "III, d = {d}");
        assert_eq!(moved[1].truncate(k), moved[2].truncate(k), "delta route, d = {d}");
    }
}

#[test]
fn leading_part_range() {
    let (d, n) = (4, 6);
    let p = curvature_pack(&MetricJet::<Q>::flat(d, n)).unwrap();
    let f = conormal_data(&p, &s_coord(d, n)).unwrap();
    assert!(higher_form_leading(&p, &f, 2).unwrap().tensor.is_zero());
    assert!(matches!(higher_form_leading(&p, &f, 4), Err(EngineError::Precondition(_))));
    assert!(matches!(higher_form_leading(&p, &f, 1), Err(EngineError::Precondition(_))));
}
