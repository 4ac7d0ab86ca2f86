//! Willmore invariant pipeline and the structural identities around it.

use crate::error::{EngineError, Result};
use crate::forms::contract_vector;
use crate::geometry::{covariant_derivative, curvature_pack, CurvaturePack, MetricJet};
use crate::hypersurface::{
    conormal_data, divergence, iio_extension, normal_derivative_power, tensor_transverse_order,
    HypersurfaceFrame,
};
use crate::jet::{divmod, Jet, ProductSum};
use crate::scalar::{Dual, Rational, Scalar};
use crate::tensor::{Slot, TensorJet};
use crate::yamabe::{obstruction_density, solve_singular_yamabe, SolverOptions, YamabeSolution};

/// Outcome of one identity or theorem check.
#[derive(Debug, Clone)]
pub struct NamedCheck<S: Scalar> {
    pub name: String,
    pub passed: bool,
    /// Whether a failure counts against the report; findings are informational.
    pub required: bool,
    /// First nonzero residual component on Σ, if any.
    pub residual: Option<Jet<S>>,
}

impl<S: Scalar> NamedCheck<S> {
    fn from_residual(name: &str, r: &TensorJet<S>) -> Self {
        let residual = r.components().iter().find(|c| !c.is_zero()).cloned();
        NamedCheck {
            name: name.to_string(),
            passed: residual.is_none(),
            required: true,
            residual,
        }
    }

    fn finding(mut self) -> Self {
        self.required = false;
        self
    }

    fn flag(name: &str, passed: bool) -> Self {
        NamedCheck {
            name: name.to_string(),
            passed,
            required: true,
            residual: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WillmoreReport<S: Scalar> {
    pub d: usize,
    /// `B` on Σ in the coordinates other than the pivot; the constant term is `B(p)`.
    pub b_value: Jet<S>,
    pub pivot: usize,
    /// Largest `ℓ` with `IIo^e = O(s^ℓ)`, capped at `N - 2`.
    pub ape_iioe_order: usize,
    pub theorem_checks: Vec<NamedCheck<S>>,
}

impl<S: Scalar> WillmoreReport<S> {
    pub fn all_passed(&self) -> bool {
        self.theorem_checks.iter().all(|c| c.passed || !c.required)
    }
}

/// Largest `ℓ ≤ N - 2` with `IIo^e = O(s^ℓ)` for a Yamabe-normalized frame.
pub fn ape_order<S: Scalar>(pack: &CurvaturePack<S>, frame: &HypersurfaceFrame<S>) -> Result<usize> {
    let iioe = iio_extension(frame, pack)?;
    let cap = pack.metric.order().saturating_sub(2);
    Ok(tensor_transverse_order(&iioe, &frame.s)?.at_least.min(cap))
}

/// `(g^{bc} - n^b n^c) ∇_c T_{...b}`, using the unnormalized `n`.
pub fn tangential_divergence<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
    t: &TensorJet<S>,
) -> Result<TensorJet<S>> {
    let r = t.rank();
    if r == 0 || t.slots()[r - 1] != Slot::Down {
        return Err(EngineError::Shape("tangential divergence needs a trailing lower slot".into()));
    }
    let dt = covariant_derivative(pack, t)?;
    let full = pack.metric.trace(&dt, 0, r)?;
    let nn = contract_vector(&contract_vector(&dt, r, &frame.n_up)?, 0, &frame.n_up)?;
    full.sub(&nn)
}

fn scalar_nd<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
    f: &Jet<S>,
    k: usize,
) -> Result<Jet<S>> {
    let t = normal_derivative_power(pack, frame, &TensorJet::scalar(f.clone()), k)?;
    Ok(t.as_scalar()?.clone())
}

fn on_sigma<S: Scalar>(f: &Jet<S>, s: &Jet<S>) -> Result<Jet<S>> {
    Ok(divmod(f, s)?.remainder)
}

fn factorial<S: Scalar>(k: usize) -> S {
    (2..=k).fold(S::one(), |acc, i| acc.mul(&S::from_i64(i as i64)))
}

fn binomial<S: Scalar>(n: usize, k: usize) -> S {
    factorial::<S>(n).mul(&factorial::<S>(k).mul(&factorial::<S>(n - k)).inv().expect("nonzero"))
}

fn scalar_check<S: Scalar>(name: &str, lhs: &Jet<S>, rhs: &Jet<S>, s: &Jet<S>) -> Result<NamedCheck<S>> {
    let k = lhs.order().min(rhs.order());
    let r = on_sigma(&lhs.truncate(k).checked_sub(&rhs.truncate(k))?, s)?;
    Ok(NamedCheck::from_residual(name, &TensorJet::scalar(r)))
}

/// Evaluates the chain of expressions for `d!/2 · B` built from `IIo^e`.
///
/// `frame` must come from the solved `σ̃`. Each check compares one expression with
/// `d!/2 · B` on Σ. The first one is an exact consequence of `I² = 1 + σ̃^d B`;
/// the later rewritings drop terms and are reported, not assumed.
pub fn willmore_formula_check<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
    sol: &YamabeSolution<S>,
) -> Result<Vec<NamedCheck<S>>> {
    let d = pack.dim();
    if d < 4 {
        return Err(EngineError::DimensionTooSmall {
            operation: "willmore formula check",
            required: 4,
            dim: d,
        });
    }
    let s = &frame.s;
    let n = &frame.n_up;
    let iioe = iio_extension(frame, pack)?;
    let n_iioe = contract_vector(&iioe, 0, n)?;
    let nn = contract_vector(&n_iioe, 0, n)?.as_scalar()?.clone();
    let div = divergence(pack, &iioe)?;
    let n_div = contract_vector(&div, 0, n)?.as_scalar()?.clone();
    let target = sol.b.scale(&factorial::<S>(d).mul(&S::from_frac(1, 2)));
    let inv_dm1 = S::from_frac(1, d as i64 - 1);
    let mut out = Vec::new();

    // ½ ∇_n I² = n·IIo^e·n - s n·∇·IIo^e/(d-1), everywhere.
    let half_grad = scalar_nd(pack, frame, &sol.i2, 1)?.scale(&S::from_frac(1, 2));
    let bracket = &nn - &(s * &n_div).scale(&inv_dm1);
    let k = half_grad.order().min(bracket.order());
    let diff = half_grad.truncate(k).checked_sub(&bracket.truncate(k))?;
    out.push(NamedCheck::from_residual("scale_tractor_gradient", &TensorJet::scalar(diff)));

    // d - 1 normal derivatives of the same bracket give d!/2 B on Σ.
    let lhs = scalar_nd(pack, frame, &bracket, d - 1)?;
    out.push(scalar_check("normal_extraction", &lhs, &target, s)?);

    // ∇_n^{d-1}(n·IIo^e·n) - ∇_n^{d-2}(n·∇·IIo^e): drops the ∇_n^j s, j ≥ 2, Leibniz terms.
    let line1 = &scalar_nd(pack, frame, &nn, d - 1)? - &scalar_nd(pack, frame, &n_div, d - 2)?;
    out.push(scalar_check("chain_line_1", &line1, &target, s)?.finding());
    let mut dropped: Option<Jet<S>> = None;
    let mut nd_s = s.clone();
    for j in 1..d {
        nd_s = scalar_nd(pack, frame, &nd_s, 1)?;
        if j >= 2 {
            let y = scalar_nd(pack, frame, &n_div, d - 1 - j)?;
            let term = (&nd_s * &y).scale(&binomial::<S>(d - 1, j));
            dropped = Some(match dropped {
                Some(acc) => &acc + &term,
                None => term,
            });
        }
    }
    let corrected = match dropped {
        Some(x) => &line1 - &x.scale(&inv_dm1),
        None => line1.clone(),
    };
    out.push(scalar_check("chain_line_1_with_leibniz_terms", &corrected, &target, s)?);

    // Five-term bracket under ∇_n^{d-2}.
    let iioe_up = pack.metric.raise(&iioe, 0)?;
    let k_e = pack.metric.trace(&iioe_up.outer(&iioe)?.contract(0, 2)?, 0, 1)?;
    let n_iioe_up = pack.metric.raise(&n_iioe, 0)?;
    let n_sq_n = contract_vector(&n_iioe, 0, &n_iioe_up)?;
    let tan_div_n = tangential_divergence(pack, frame, &n_iioe)?;
    let p_up = pack.metric.raise(&pack.metric.raise(&pack.schouten, 0)?, 1)?;
    let n_p = contract_vector(&pack.schouten, 0, n)?;
    let n_p_up = pack.metric.raise(&n_p, 0)?;
    let drho: Vec<Jet<S>> = (0..d).map(|a| frame.rho.differentiate(a)).collect::<Result<_>>()?;
    let drho = TensorJet::from_fn(d, vec![Slot::Down], |i| drho[i[0]].clone());
    let drho_up = pack.metric.raise(&drho, 0)?;
    let mut s_term = contract_vector(&n_iioe, 0, &n_p_up)?.as_scalar()?.clone();
    s_term = &s_term - &contract_vector(&n_iioe, 0, &drho_up)?.as_scalar()?.scale_i64(2);
    let full_p = full_contract(&iioe, &p_up);
    s_term = &s_term - &full_p;
    let five = &(&(&(k_e.as_scalar()? - n_sq_n.as_scalar()?) - &(&frame.rho * &nn))
        - tan_div_n.as_scalar()?)
        + &(s * &s_term);
    let line5 = scalar_nd(pack, frame, &five, d - 2)?;
    out.push(scalar_check("five_term_bracket", &line5, &target, s)?.finding());
    out.push(scalar_check("five_term_bracket_equals_line_1", &line5, &line1, s)?);
    Ok(out)
}

fn full_contract<S: Scalar>(a: &TensorJet<S>, b_up: &TensorJet<S>) -> Jet<S> {
    let d = a.dim();
    let mut acc = ProductSum::new();
    for i in 0..d {
        for j in 0..d {
            acc.add_product(a.get(&[i, j]), b_up.get(&[i, j]));
        }
    }
    acc.finish(d, a.order().min(b_up.order()))
}

/// `-(d - 2)(∇^{⊤a}∇^{⊤b} + P^{ab}) ∇_n^{d-3} IIo^e_ab`, compared with `d!/2 · B` on Σ.
///
/// Needs `IIo^e = O(s^{d-3})`. In d = 4 the quadratic `K_e` term survives when
/// `∂_y f(p) != 0`, so there the result is reported as a finding only.
pub fn specialized_identity_check<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
    sol: &YamabeSolution<S>,
) -> Result<NamedCheck<S>> {
    let d = pack.dim();
    if d < 4 {
        return Err(EngineError::DimensionTooSmall {
            operation: "specialized identity",
            required: 4,
            dim: d,
        });
    }
    let ape = ape_order(pack, frame)?;
    if ape < d - 3 {
        return Err(EngineError::Precondition(format!(
            "specialized identity needs IIo^e = O(s^{}), measured O(s^{ape})",
            d - 3
        )));
    }
    let t = normal_derivative_power(pack, frame, &iio_extension(frame, pack)?, d - 3)?;
    let v = tangential_divergence(pack, frame, &t)?;
    let vv = tangential_divergence(pack, frame, &v)?;
    let p_up = pack.metric.raise(&pack.metric.raise(&pack.schouten, 0)?, 1)?;
    let pt = full_contract(&t, &p_up);
    let rhs = (vv.as_scalar()? + &pt).scale(&S::from_i64(-(d as i64 - 2)));
    let target = sol.b.scale(&factorial::<S>(d).mul(&S::from_frac(1, 2)));
    let check = scalar_check("specialized_identity", &rhs, &target, &frame.s)?;
    Ok(if d == 4 { check.finding() } else { check })
}

/// With `IIo^e = O(s^ℓ)`, `ℓ ≤ d - 2`: `n·IIo^e` and `∇^⊤·(n·IIo^e)` are `O(s^{ℓ+1})`.
///
/// Errors when `ℓ > d - 2`, when the hypothesis fails, or when the jets are too
/// short to certify the conclusion.
pub fn n_iioe_lemma_check<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
    ell: usize,
) -> Result<Vec<NamedCheck<S>>> {
    let d = pack.dim();
    if ell + 2 > d {
        return Err(EngineError::Precondition(format!("lemma needs l <= d - 2, got l = {ell}")));
    }
    let iioe = iio_extension(frame, pack)?;
    let hyp = tensor_transverse_order(&iioe, &frame.s)?;
    if hyp.at_least < ell {
        return Err(EngineError::Precondition(format!(
            "IIo^e is O(s^{}) only, not O(s^{ell})",
            hyp.at_least
        )));
    }
    let n_iioe = contract_vector(&iioe, 0, &frame.n_up)?;
    let tdiv = tangential_divergence(pack, frame, &n_iioe)?;
    let mut out = Vec::new();
    for (name, t) in [("n_iioe", &n_iioe), ("tangential_divergence_n_iioe", &tdiv)] {
        if t.order() < ell + 1 {
            return Err(EngineError::InsufficientOrder {
                context: "n.IIo^e lemma",
                needed: ell + 1,
                available: t.order(),
            });
        }
        let got = tensor_transverse_order(t, &frame.s)?;
        out.push(NamedCheck::flag(&format!("{name}_order_{}", ell + 1), got.at_least > ell));
    }
    Ok(out)
}

/// Full pipeline: curvature, singular Yamabe solve, `B` on Σ, APE order and checks.
pub fn willmore_invariant<S: Scalar>(metric: &MetricJet<S>, s: &Jet<S>) -> Result<WillmoreReport<S>> {
    let d = metric.dim();
    let n = metric.order().min(s.order());
    if n < d + 2 {
        return Err(EngineError::InsufficientOrder {
            context: "willmore invariant",
            needed: d + 2,
            available: n,
        });
    }
    let pack = curvature_pack(metric)?;
    let sol = solve_singular_yamabe(&pack, s, SolverOptions::default())?;
    let frame = conormal_data(&pack, &sol.sigma_tilde)?;
    let ape = ape_order(&pack, &frame)?;
    let b = sol.b_at_sigma.clone();
    let mut checks = vec![NamedCheck::flag("yamabe_residual", sol.residual_order >= d)];
    let rederived = obstruction_density(&sol)?;
    checks.push(NamedCheck::flag("obstruction_rederived", rederived == b));
    if ape + 2 >= d {
        checks.push(NamedCheck::flag("ape_implies_vanishing", b.is_zero()));
    }
    if d >= 4 {
        checks.extend(willmore_formula_check(&pack, &frame, &sol)?);
        checks.extend(n_iioe_lemma_check(&pack, &frame, ape.min(d - 2))?);
        if ape + 3 >= d {
            checks.push(specialized_identity_check(&pack, &frame, &sol)?);
        }
    }
    Ok(WillmoreReport {
        d,
        b_value: b,
        pivot: sol.pivot,
        ape_iioe_order: ape,
        theorem_checks: checks,
    })
}

/// Coefficient of `ε₁ε₂ (h₁·h₂)` in `d!/2 · B(p)` for the flat metric perturbed tangentially
/// by `ε₁ s^a/a! h₁ + ε₂ s^b/b! h₂`, `a + b = d`.
///
/// `h1`, `h2` are constant symmetric trace-free `(d-1) × (d-1)` matrices with `h₁·h₂ != 0`.
/// Both infinitesimals are carried exactly by nested dual numbers.
pub fn quadratic_coefficient(d: usize, a: usize, h1: &[Vec<Rational>], h2: &[Vec<Rational>]) -> Result<Rational> {
    type DD = Dual<Dual<Rational>>;
    if d < 3 || a == 0 || a >= d {
        return Err(EngineError::Precondition(format!("need 0 < a < d, got a = {a}, d = {d}")));
    }
    let pairing = tangential_pairing(d, h1, h2)?;
    if pairing.is_zero() {
        return Err(EngineError::Precondition("h1·h2 vanishes".into()));
    }
    let n = d + 2;
    let s = Jet::<Rational>::coordinate(d, n, 0, Rational::zero())?;
    let bump = |k: usize| s.powi(k).scale(&factorial::<Rational>(k).inv().expect("nonzero"));
    let lift = |j: &Jet<Rational>| j.map(DD::from_rational);
    let e1 = DD::new(Dual::new(Rational::zero(), Rational::one()), Dual::real(Rational::zero()));
    let e2 = DD::new(Dual::real(Rational::zero()), Dual::real(Rational::one()));
    let (p1, p2) = (lift(&bump(a)).scale(&e1), lift(&bump(d - a)).scale(&e2));
    let mut g = vec![vec![Jet::<DD>::zero(d, n); d]; d];
    for (i, row) in g.iter_mut().enumerate() {
        row[i] = Jet::one(d, n);
    }
    for i in 1..d {
        for j in 1..d {
            let c1 = DD::from_rational(&h1[i - 1][j - 1]);
            let c2 = DD::from_rational(&h2[i - 1][j - 1]);
            g[i][j] = &(&g[i][j] + &p1.scale(&c1)) + &p2.scale(&c2);
        }
    }
    let pack = curvature_pack(&MetricJet::new(g)?)?;
    let sol = solve_singular_yamabe(&pack, &lift(&s), SolverOptions::default())?;
    let mixed = sol.b_at_sigma.constant_term().eps.eps.clone();
    let half_fact = factorial::<Rational>(d).mul(&Rational::new(1, 2));
    Ok(&(&mixed * &half_fact) / &pairing)
}

fn tangential_pairing(d: usize, h1: &[Vec<Rational>], h2: &[Vec<Rational>]) -> Result<Rational> {
    let ok = |h: &[Vec<Rational>]| {
        h.len() == d - 1
            && h.iter().all(|r| r.len() == d - 1)
            && (0..d - 1).all(|i| (0..d - 1).all(|j| h[i][j] == h[j][i]))
            && (0..d - 1).fold(Rational::zero(), |t, i| &t + &h[i][i]).is_zero()
    };
    if !ok(h1) || !ok(h2) {
        return Err(EngineError::Shape("expected symmetric trace-free (d-1)x(d-1) matrices".into()));
    }
    let mut acc = Rational::zero();
    for i in 0..d - 1 {
        for j in 0..d - 1 {
            acc = &acc + &(&h1[i][j] * &h2[i][j]);
        }
    }
    Ok(acc)
}

/// The `ε₁ε₂` coefficient predicted by the displayed quadratic combination
/// `¼ ∂g·∂^{d-1}g + (d-1)(d-3)/(4(d-2)) ∂²g·∂^{d-2}g + ¼ Σ_{k=2}^{d-4} C(d-3,k) ∂^{k+1}g·∂^{d-k-1}g`,
/// for the pairing of `∂_s^a g` with `∂_s^{d-a} g`. A square term counts twice.
pub fn quadratic_display_coefficient(d: usize, a: usize) -> Rational {
    let b = d - a;
    let mut terms: Vec<(usize, usize, Rational)> = vec![
        (1, d - 1, Rational::new(1, 4)),
        (2, d - 2, Rational::new(((d - 1) * (d - 3)) as i64, 4 * (d as i64 - 2))),
    ];
    for k in 2..=d.saturating_sub(4) {
        terms.push((k + 1, d - k - 1, binomial::<Rational>(d - 3, k).mul(&Rational::new(1, 4))));
    }
    let mut acc = Rational::zero();
    for (i, j, c) in terms {
        if (i, j) == (a, b) || (i, j) == (b, a) {
            acc = &acc + &if i == j { &c * &Rational::integer(2) } else { c };
        }
    }
    acc
}
