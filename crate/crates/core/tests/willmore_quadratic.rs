use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use willmore_core::geometry::{curvature_pack, MetricJet};
use willmore_core::samples::rational_in;
use willmore_core::willmore::{quadratic_coefficient, quadratic_display_coefficient};
use willmore_core::yamabe::{solve_singular_yamabe, SolverOptions};
use willmore_core::{Dual, Jet, Rational, Scalar};

type Q = Rational;

fn random_tracefree(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<Q>> {
    let mut h = vec![vec![Q::zero(); m]; m];
    for i in 0..m {
        for j in i..m {
            let c = rational_in(rng, 2);
            h[i][j] = c.clone();
            h[j][i] = c;
        }
    }
    let tr = (0..m).fold(Q::zero(), |t, i| &t + &h[i][i]);
    let shift = &tr * &Q::new(1, m as i64);
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = &row[i] - &shift;
    }
    h
}

fn pairing(a: &[Vec<Q>], b: &[Vec<Q>]) -> Q {
    let mut acc = Q::zero();
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            acc = &acc + &(x * y);
        }
    }
    acc
}

fn factorial(k: usize) -> i64 {
    (1..=k as i64).product()
}

/// `∂_{ε₂} (d!/2 · B(p))` at `ε₁ = t`, using a single dual unit.
fn derivative_at(d: usize, a: usize, h1: &[Vec<Q>], h2: &[Vec<Q>], t: &Q) -> Q {
    let n = d + 2;
    let s = Jet::<Q>::coordinate(d, n, 0, Q::zero()).unwrap();
    let lift = |j: &Jet<Q>| j.map(Dual::from_rational);
    let b = d - a;
    let p1 = lift(&s.powi(a).scale(&Q::new(1, factorial(a))));
    let p2 = lift(&s.powi(b).scale(&Q::new(1, factorial(b))));
    let mut g = vec![vec![Jet::<Dual<Q>>::zero(d, n); d]; d];
    for (i, row) in g.iter_mut().enumerate() {
        row[i] = Jet::one(d, n);
    }
    for i in 1..d {
        for j in 1..d {
            let c1 = Dual::real(t * &h1[i - 1][j - 1]);
            let c2 = Dual::new(Q::zero(), h2[i - 1][j - 1].clone());
            g[i][j] = &(&g[i][j] + &p1.scale(&c1)) + &p2.scale(&c2);
        }
    }
    let pack = curvature_pack(&MetricJet::new(g).unwrap()).unwrap();
    let sol = solve_singular_yamabe(&pack, &lift(&s), SolverOptions::default()).unwrap();
    &sol.b_at_sigma.constant_term().eps * &Q::new(factorial(d), 2)
}

/// Solves the Vandermonde system for the coefficients of the interpolating polynomial.
fn interpolate(ts: &[Q], ys: &[Q]) -> Vec<Q> {
    let k = ts.len();
    let mut m: Vec<Vec<Q>> = ts
        .iter()
        .zip(ys)
        .map(|(t, y)| {
            let mut row: Vec<Q> = (0..k).map(|e| (0..e).fold(Q::one(), |p, _| &p * t)).collect();
            row.push(y.clone());
            row
        })
        .collect();
    for c in 0..k {
        let piv = (c..k).find(|&r| !m[r][c].is_zero()).unwrap();
        m.swap(c, piv);
        let inv = &Q::one() / &m[c][c];
        for x in m[c].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..k {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c].clone();
                for j in 0..=k {
                    let sub = &f * &m[c][j];
                    m[r][j] = &m[r][j] - &sub;
                }
            }
        }
    }
    m.into_iter().map(|r| r[k].clone()).collect()
}

/// Mixed coefficient from the ε₁-polynomial `t ↦ derivative_at(t)`; one extra node
/// confirms the degree bound.
fn oracle(d: usize, a: usize, h1: &[Vec<Q>], h2: &[Vec<Q>]) -> Q {
    let ts: Vec<Q> = (-4..=4).map(Q::integer).collect();
    let ys: Vec<Q> = ts.iter().map(|t| derivative_at(d, a, h1, h2, t)).collect();
    let coeffs = interpolate(&ts, &ys);
    let extra = Q::integer(5);
    let predicted = coeffs.iter().rev().fold(Q::zero(), |acc, c| &(&acc * &extra) + c);
    assert_eq!(predicted, derivative_at(d, a, h1, h2, &extra), "degree bound too small");
    &coeffs[1] / &pairing(h1, h2)
}

#[test]
fn bilinear_coefficients_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    for d in [4, 6] {
        for a in 1..=d / 2 {
            let h1 = random_tracefree(&mut rng, d - 1);
            let h2 = random_tracefree(&mut rng, d - 1);
            let got = quadratic_coefficient(d, a, &h1, &h2).unwrap();
            assert_eq!(got, oracle(d, a, &h1, &h2), "d = {d}, a = {a}");
        }
    }
}

#[test]
fn bilinear_coefficients_depend_only_on_the_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(82);
    for (d, a) in [(4, 1), (4, 2), (6, 2), (6, 3)] {
        let first = {
            let h1 = random_tracefree(&mut rng, d - 1);
            let h2 = random_tracefree(&mut rng, d - 1);
            quadratic_coefficient(d, a, &h1, &h2).unwrap()
        };
        for _ in 0..2 {
            let h1 = random_tracefree(&mut rng, d - 1);
            let h2 = random_tracefree(&mut rng, d - 1);
            assert_eq!(quadratic_coefficient(d, a, &h1, &h2).unwrap(), first, "d = {d}, a = {a}");
        }
    }
}

#[test]
fn quadratic_structure_against_the_display() {
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    // (d, a, measured): every pairing is present with a nonzero coefficient.
    let measured = [(4, 1, Q::new(1, 4)), (4, 2, Q::new(1, 2)), (6, 1, Q::new(1, 4)), (6, 2, Q::integer(1)), (6, 3, Q::new(3, 2))];
    for (d, a, want) in measured {
        let h1 = random_tracefree(&mut rng, d - 1);
        let h2 = random_tracefree(&mut rng, d - 1);
        let got = quadratic_coefficient(d, a, &h1, &h2).unwrap();
        assert_eq!(got, want, "d = {d}, a = {a}");
        assert!(!got.is_zero());
        let display = quadratic_display_coefficient(d, a);
        if a == 2 {
            // The displayed ∂²g·∂^{d-2}g coefficient is off: 3/4 vs 1/2 in d = 4, 15/16 vs 1 in d = 6.
            assert_ne!(got, display, "d = {d}");
        } else {
            assert_eq!(got, display, "d = {d}, a = {a}");
        }
    }
}

#[test]
fn probe_rejects_bad_input() {
    let h = vec![vec![Q::one(), Q::zero(), Q::zero()], vec![Q::zero(); 3], vec![Q::zero(); 3]];
    assert!(quadratic_coefficient(4, 1, &h, &h).is_err());
    let z = vec![vec![Q::zero(); 3]; 3];
    assert!(quadratic_coefficient(4, 1, &z, &z).is_err());
    assert!(quadratic_coefficient(4, 4, &z, &z).is_err());
}
