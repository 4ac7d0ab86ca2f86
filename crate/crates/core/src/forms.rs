//! Higher fundamental forms of a hypersurface and the normal operators
//! `δ_R` and `δ_k` built from the Thomas operator.
//!
//! Forms are returned as ambient extensions with lower indices. Only their
//! values on Σ are meaningful; compare them with [`reduce_on_sigma`].

use crate::error::{EngineError, Result};
use crate::geometry::{
    covariant_derivative, curvature_pack, directional_derivative_with, kulkarni_nomizu_gp, CurvaturePack, MetricJet,
};
use crate::hypersurface::{
    conormal_data, induced_metric, iio_extension, mean_curvature, normal_derivative_power, project_tangential,
    reduce_on_sigma, second_fundamental_form, tracefree_ii, HypersurfaceFrame,
};
use crate::jet::{Jet, ProductSum};
use crate::scalar::{Rational, Scalar};
use crate::tensor::{Slot, Symmetry, TensorJet};
use crate::tractor::TractorBundle;
use crate::yamabe::{solve_singular_yamabe, SolverOptions};

/// A fundamental form `FF^m` together with its conformal weight (lower indices).
#[derive(Debug, Clone)]
pub struct FundamentalForm<S: Scalar> {
    pub m: usize,
    pub weight: i64,
    pub tensor: TensorJet<S>,
    /// Filled by [`transverse_order_probe`]; `None` until probed.
    pub transverse_order_measured: Option<usize>,
}

impl<S: Scalar> FundamentalForm<S> {
    fn new(m: usize, tensor: TensorJet<S>) -> Self {
        let weight = 3 - m as i64;
        FundamentalForm {
            m,
            weight,
            tensor: tensor
                .with_weight(Rational::integer(weight))
                .with_symmetry(Symmetry::Symmetric),
            transverse_order_measured: None,
        }
    }

    /// Components reduced modulo the defining function.
    pub fn on_sigma(&self, s: &Jet<S>) -> Result<TensorJet<S>> {
        reduce_on_sigma(&self.tensor, s)
    }
}

fn require_dim(operation: &'static str, d: usize, required: usize) -> Result<()> {
    if d < required {
        return Err(EngineError::DimensionTooSmall {
            operation,
            required,
            dim: d,
        });
    }
    Ok(())
}

/// `v^e T_{..e..}` on tangent slot `k` (lower) for an upper vector `v`.
pub fn contract_vector<S: Scalar>(t: &TensorJet<S>, k: usize, v: &TensorJet<S>) -> Result<TensorJet<S>> {
    if t.slots().get(k) != Some(&Slot::Down) || v.slots() != [Slot::Up] {
        return Err(EngineError::Shape("contract_vector needs a lower slot and a vector".into()));
    }
    let d = t.dim();
    let mut slots = t.slots().to_vec();
    slots.remove(k);
    let out = TensorJet::from_fn(d, slots, |rest| {
        let mut idx = rest.to_vec();
        idx.insert(k, 0);
        let mut acc = ProductSum::new();
        for e in 0..d {
            idx[k] = e;
            acc.add_product(v.get(&[e]), t.get(&idx));
        }
        acc.finish(d, t.order().min(v.order()))
    });
    Ok(out.with_weight(&t.weight + &v.weight))
}

/// `A_a^c B_cb` for two (0,2) tensors.
fn compose<S: Scalar>(pack: &CurvaturePack<S>, a: &TensorJet<S>, b: &TensorJet<S>) -> Result<TensorJet<S>> {
    let b_up = pack.metric.raise(b, 0)?;
    let d = a.dim();
    let out = TensorJet::from_fn(d, vec![Slot::Down, Slot::Down], |i| {
        let mut acc = ProductSum::new();
        for c in 0..d {
            acc.add_product(a.get(&[i[0], c]), b_up.get(&[c, i[1]]));
        }
        acc.finish(d, a.order().min(b_up.order()))
    });
    Ok(out.with_weight(&a.weight + &b.weight))
}

/// `T_{eabf} U^{ef}` for a rank-4 `T` and a (0,2) `U`.
fn contract_outer_pair<S: Scalar>(pack: &CurvaturePack<S>, t: &TensorJet<S>, u: &TensorJet<S>) -> Result<TensorJet<S>> {
    let u_up = pack.metric.raise(&pack.metric.raise(u, 0)?, 1)?;
    let d = t.dim();
    let out = TensorJet::from_fn(d, vec![Slot::Down, Slot::Down], |i| {
        let mut acc = ProductSum::new();
        for e in 0..d {
            for f in 0..d {
                acc.add_product(t.get(&[e, i[0], i[1], f]), u_up.get(&[e, f]));
            }
        }
        acc.finish(d, t.order().min(u_up.order()))
    });
    Ok(out)
}

/// `∘⊤`: symmetrize, project tangentially and remove the `γ̄`-trace.
pub fn tangential_tracefree<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
    t: &TensorJet<S>,
) -> Result<TensorJet<S>> {
    if t.slots() != [Slot::Down, Slot::Down] {
        return Err(EngineError::Shape("tangential_tracefree needs a (0,2) tensor".into()));
    }
    let d = pack.dim();
    let p = project_tangential(frame, &t.symmetrize2()?)?;
    // p is tangential, so the g-trace is the γ̄-trace.
    let tr = pack.metric.trace(&p, 0, 1)?;
    let corr = induced_metric(frame, pack)
        .mul_jet(tr.as_scalar()?)
        .scale(&S::from_frac(1, d as i64 - 1));
    Ok(p.sub(&corr)?.with_weight(t.weight.clone()).with_symmetry(Symmetry::Symmetric))
}

/// `W_{n̂abn̂}`.
fn weyl_nn<S: Scalar>(pack: &CurvaturePack<S>, frame: &HypersurfaceFrame<S>) -> Result<TensorJet<S>> {
    let w3 = contract_vector(pack.weyl(), 3, &frame.n_hat_up)?;
    contract_vector(&w3, 0, &frame.n_hat_up)
}

/// `III = ∘⊤(-IIo_a^c IIo_cb + W_{n̂abn̂})`, weight 0; needs `d ≥ 4`.
pub fn third_form<S: Scalar>(pack: &CurvaturePack<S>, frame: &HypersurfaceFrame<S>) -> Result<FundamentalForm<S>> {
    require_dim("third fundamental form", pack.dim(), 4)?;
    let iio = tracefree_ii(frame, pack)?;
    let sq = compose(pack, &iio, &iio)?;
    let raw = weyl_nn(pack, frame)?.sub(&sq)?;
    Ok(FundamentalForm::new(3, tangential_tracefree(pack, frame, &raw)?))
}

/// Intrinsic Weyl tensor of Σ from the Gauss equation
/// `R̄_abcd = ⊤R_abcd + II_ac II_bd - II_ad II_bc`, decomposed in dimension `d - 1`.
pub fn hypersurface_weyl<S: Scalar>(pack: &CurvaturePack<S>, frame: &HypersurfaceFrame<S>) -> Result<TensorJet<S>> {
    let d = pack.dim();
    require_dim("hypersurface Weyl tensor", d, 5)?;
    let ii = second_fundamental_form(frame, pack)?;
    let rt = project_tangential(frame, pack.riemann())?;
    let rbar = TensorJet::from_fn(d, vec![Slot::Down; 4], |i| {
        let (a, b, c, e) = (i[0], i[1], i[2], i[3]);
        let q = &(ii.get(&[a, c]) * ii.get(&[b, e])) - &(ii.get(&[a, e]) * ii.get(&[b, c]));
        rt.get(i) + &q
    });
    let n = d as i64 - 1;
    let ric = pack.metric.trace(&rbar, 0, 2)?;
    let sc = pack.metric.trace(&ric, 0, 1)?;
    let jbar = sc.as_scalar()?.scale(&S::from_frac(1, 2 * (n - 1)));
    let gbar = induced_metric(frame, pack);
    let pbar = ric.sub(&gbar.mul_jet(&jbar))?.scale(&S::from_frac(1, n - 2));
    Ok(rbar
        .sub(&kulkarni_nomizu_gp(&gbar, &pbar))?
        .with_weight(Rational::integer(2))
        .with_symmetry(Symmetry::Curvature))
}

/// The seven named summands of `IV` before the final `∘⊤`.
pub fn fourth_form_terms<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
) -> Result<Vec<(&'static str, TensorJet<S>)>> {
    let d = pack.dim();
    require_dim("fourth fundamental form", d, 6)?;
    let di = d as i64;
    let c = |p: i64, q: i64| S::from_frac(p, q);
    let iio = tracefree_ii(frame, pack)?;
    let h = mean_curvature(frame, pack)?;
    let wnn = weyl_nn(pack, frame)?;
    let n = &frame.n_hat_up;

    let cot = contract_vector(pack.cotton()?, 0, n)?.symmetrize2()?;
    let t1 = cot.scale(&c(-(di - 4) * (di - 5), 1));

    let t2 = wnn.mul_jet(&h).scale(&c(-(di - 4) * (di - 5), 1));

    // ∇̄^c V_cab with V = ⊤W_{cabn̂}; Gauss: ∇̄ = ⊤∇ on tangential fields.
    let v = project_tangential(frame, &contract_vector(pack.weyl(), 3, n)?)?;
    let dv = covariant_derivative(pack, &v)?;
    let full = pack.metric.trace(&dv, 0, 1)?;
    let nn = contract_vector(&contract_vector(&dv, 0, n)?, 0, n)?;
    let div = full.sub(&nn)?.symmetrize2()?;
    let t3 = div.scale(&c(-(di - 4), 1));

    let wcnna = contract_vector(&contract_vector(pack.weyl(), 2, n)?, 1, n)?;
    let t4 = compose(pack, &wcnna.permute(&[1, 0])?, &iio)?
        .symmetrize2()?
        .scale(&c(2, 1));

    let iii = third_form(pack, frame)?.tensor;
    let t5 = compose(pack, &iii, &iio)?
        .symmetrize2()?
        .scale(&c(-(di * di - 7 * di + 18), di - 3));

    let wbar = hypersurface_weyl(pack, frame)?;
    let t6 = contract_outer_pair(pack, &wbar, &iio)?.scale(&c(di - 6, 1));

    let k = pack.metric.trace(&pack.metric.raise(&iio, 0)?.outer(&iio)?.contract(0, 2)?, 0, 1)?;
    let k = k.as_scalar()?.clone();
    let t7 = iio
        .mul_jet(&k)
        .scale(&c(di * di * di - 10 * di * di + 25 * di - 10, (di - 1) * (di - 2)));

    Ok(vec![
        ("cotton", t1),
        ("mean_curvature_weyl", t2),
        ("weyl_divergence", t3),
        ("weyl_iio", t4),
        ("third_form_iio", t5),
        ("intrinsic_weyl_iio", t6),
        ("iio_cubed", t7),
    ])
}

/// `IV`, weight -1; needs `d ≥ 6`.
pub fn fourth_form<S: Scalar>(pack: &CurvaturePack<S>, frame: &HypersurfaceFrame<S>) -> Result<FundamentalForm<S>> {
    let terms = fourth_form_terms(pack, frame)?;
    let mut it = terms.into_iter().map(|(_, t)| t);
    let first = it.next().expect("seven terms");
    let sum = it.try_fold(first, |acc, t| acc.add(&t))?;
    Ok(FundamentalForm::new(4, tangential_tracefree(pack, frame, &sum)?))
}

/// `δ_R T = ∇_n̂ T - w H T` for a tractor-valued density of weight `w`.
pub fn delta_r<S: Scalar>(
    bundle: &TractorBundle<'_, S>,
    frame: &HypersurfaceFrame<S>,
    t: &TensorJet<S>,
) -> Result<TensorJet<S>> {
    let pack = bundle.pack();
    let w = S::from_rational(&t.weight);
    let h = mean_curvature(frame, pack)?;
    let conn = pack.tangent_connection();
    let dn = directional_derivative_with(t, frame.n_hat_up.components(), &conn, Some(bundle.connection()))?;
    Ok(dn
        .sub(&t.mul_jet(&h).scale(&w))?
        .with_weight(&t.weight - &Rational::integer(1)))
}

/// `δ_k T = N^{A_2}⋯N^{A_k} δ_R D_{A_2}⋯D_{A_k} T`, weight `w - k`.
///
/// Rejects weights with `d + 2w ∈ {k + 1, …, 2k - 1}`.
pub fn delta_k_apply<S: Scalar>(
    bundle: &TractorBundle<'_, S>,
    frame: &HypersurfaceFrame<S>,
    t: &TensorJet<S>,
    k: usize,
) -> Result<TensorJet<S>> {
    if k == 0 {
        return Err(EngineError::Precondition("delta_k needs k >= 1".into()));
    }
    let d = bundle.dim();
    let h = &Rational::integer(d as i64) + &t.weight.scale_i64(2);
    if (k + 1..2 * k).any(|j| h == Rational::integer(j as i64)) {
        return Err(EngineError::ForbiddenWeight {
            operation: "delta_k",
            weight: t.weight.to_string(),
        });
    }
    let mut cur = t.clone();
    for _ in 1..k {
        cur = bundle.lower(&bundle.thomas_d(&cur)?, 0)?;
    }
    cur = delta_r(bundle, frame, &cur)?;
    let nt = bundle.normal_tractor(frame)?;
    let w = cur.weight.clone();
    for _ in 1..k {
        cur = nt.outer(&cur)?.contract(0, 1)?;
    }
    Ok(cur.with_weight(w))
}

/// `∘⊤ ∇_n^{m-2} IIo^e` for a unit-length (Yamabe) frame, `2 ≤ m ≤ d - 1`.
pub fn higher_form_leading<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
    m: usize,
) -> Result<FundamentalForm<S>> {
    let d = pack.dim();
    if m == d {
        return Err(EngineError::Precondition(
            "m = d: the leading part cancels, use dth_cancellation_check".into(),
        ));
    }
    if m < 2 || m > d {
        return Err(EngineError::Precondition(format!("leading part needs 2 <= m <= d - 1, got {m}")));
    }
    let iioe = iio_extension(frame, pack)?;
    let dn = normal_derivative_power(pack, frame, &iioe, m - 2)?;
    Ok(FundamentalForm::new(m, tangential_tracefree(pack, frame, &dn)?))
}

/// Result of perturbing `g` by `s^{m-1} h / (m-1)!` and watching `∘⊤∇_n^{m-2} IIo^e` on Σ.
#[derive(Debug, Clone)]
pub struct LeadingProbe<S: Scalar> {
    pub m: usize,
    /// Change of `∘⊤∇_n^{m-2} IIo^e`, reduced on Σ.
    pub measured: TensorJet<S>,
    /// `(d - m) / (2(d - 2)) ∘⊤ h`, reduced on Σ.
    pub predicted: TensorJet<S>,
}

impl<S: Scalar> LeadingProbe<S> {
    pub fn matches(&self) -> bool {
        self.measured == self.predicted
    }

    pub fn insensitive(&self) -> bool {
        self.measured.is_zero()
    }
}

/// `∘⊤∇_n^{k} IIo^e` on Σ for `k = 0..=top`, from the Yamabe frame of `s`.
fn leading_chain<S: Scalar>(metric: &MetricJet<S>, s: &Jet<S>, top: usize) -> Result<(Vec<TensorJet<S>>, Jet<S>)> {
    let pack = curvature_pack(metric)?;
    let sol = solve_singular_yamabe(&pack, s, SolverOptions::default())?;
    let frame = conormal_data(&pack, &sol.sigma_tilde)?;
    let mut cur = iio_extension(&frame, &pack)?;
    let mut out = Vec::with_capacity(top + 1);
    for k in 0..=top {
        if k > 0 {
            cur = normal_derivative_power(&pack, &frame, &cur, 1)?;
        }
        out.push(reduce_on_sigma(&tangential_tracefree(&pack, &frame, &cur)?, &frame.s)?);
    }
    Ok((out, frame.s))
}

/// Polarization probes of the leading coefficient of `∇_n^{m-2} IIo^e` in `∂_s^{m-1} g`.
///
/// `s = x^axis` must have unit length along Σ in `base`, and `h` is a symmetric (0,2) tensor.
/// The base metric is solved once; each `m` needs one perturbed solve.
pub fn leading_coefficient_probes<S: Scalar>(
    base: &MetricJet<S>,
    axis: usize,
    h: &TensorJet<S>,
    ms: &[usize],
) -> Result<Vec<LeadingProbe<S>>> {
    let d = base.dim();
    require_dim("leading coefficient probe", d, 3)?;
    if let Some(m) = ms.iter().find(|&&m| m < 3 || m > d) {
        return Err(EngineError::Precondition(format!("m = {m} outside 3..={d}")));
    }
    let top = ms.iter().max().map_or(0, |m| m - 2);
    let n = base.order();
    let s = Jet::coordinate(d, n, axis, S::zero())?;
    let (before, sigma) = leading_chain(base, &s, top)?;
    let pack = curvature_pack(base)?;
    let frame = conormal_data(&pack, &sigma)?;
    let tf_h = reduce_on_sigma(&tangential_tracefree(&pack, &frame, h)?, &frame.s)?;
    let g = base.matrix();
    ms.iter()
        .map(|&m| {
            let mut fact = S::one();
            for i in 2..m {
                fact = fact.mul(&S::from_i64(i as i64));
            }
            let bump = s.powi(m - 1).scale(&fact.inv().expect("nonzero factorial"));
            let perturbed = (0..d)
                .map(|a| (0..d).map(|b| &g[a][b] + &h.get(&[a, b]).mul_to(&bump, n)).collect())
                .collect();
            let (after, _) = leading_chain(&MetricJet::new(perturbed)?, &s, m - 2)?;
            let (a, b) = (&after[m - 2], &before[m - 2]);
            let coef = S::from_frac(d as i64 - m as i64, 2 * (d as i64 - 2));
            let k = a.order().min(b.order()).min(tf_h.order());
            Ok(LeadingProbe {
                m,
                measured: a.truncate(k).sub(&b.truncate(k))?,
                predicted: tf_h.scale(&coef).truncate(k),
            })
        })
        .collect()
}

/// Single-`m` form of [`leading_coefficient_probes`].
pub fn leading_coefficient_probe<S: Scalar>(
    base: &MetricJet<S>,
    axis: usize,
    h: &TensorJet<S>,
    m: usize,
) -> Result<LeadingProbe<S>> {
    Ok(leading_coefficient_probes(base, axis, h, &[m])?.remove(0))
}

/// `∘⊤∇_n^{d-2} IIo^e` does not see `∂_s^{d-1} g`: the probe at `m = d`.
pub fn dth_cancellation_check<S: Scalar>(
    base: &MetricJet<S>,
    axis: usize,
    h: &TensorJet<S>,
) -> Result<LeadingProbe<S>> {
    let d = base.dim();
    if d % 2 != 0 {
        return Err(EngineError::Precondition(format!("cancellation probe needs even d, got {d}")));
    }
    leading_coefficient_probe(base, axis, h, d)
}

/// `FF^m` for `m` in 2..=4 from a metric and a defining function.
pub fn fundamental_form<S: Scalar>(metric: &MetricJet<S>, s: &Jet<S>, m: usize) -> Result<FundamentalForm<S>> {
    let pack = curvature_pack(metric)?;
    let frame = conormal_data(&pack, s)?;
    match m {
        2 => Ok(FundamentalForm::new(2, tracefree_ii(&frame, &pack)?)),
        3 => third_form(&pack, &frame),
        4 => fourth_form(&pack, &frame),
        _ => Err(EngineError::Precondition(format!("no closed form for FF^{m}"))),
    }
}

/// `FF^m` with its transverse order measured: the largest `k ≤ m` for which adding
/// `s^k h / k!` to the metric changes the form on Σ.
pub fn transverse_order_probe<S: Scalar>(
    metric: &MetricJet<S>,
    s: &Jet<S>,
    m: usize,
    h: &TensorJet<S>,
) -> Result<FundamentalForm<S>> {
    let d = metric.dim();
    if h.slots() != [Slot::Down, Slot::Down] || h.dim() != d {
        return Err(EngineError::Shape("perturbation must be a (0,2) tensor".into()));
    }
    let mut form = fundamental_form(metric, s, m)?;
    let base = form.on_sigma(s)?;
    let n = metric.order();
    let mut bump = Jet::one(d, n);
    let mut measured = 0;
    for k in 1..=m {
        bump = bump.mul_to(s, n).scale(&S::from_frac(1, k as i64));
        let mut g = metric.matrix();
        for (a, row) in g.iter_mut().enumerate() {
            for (b, e) in row.iter_mut().enumerate() {
                let hs = h.get(&[a, b]).mul_to(&bump, n);
                *e = &*e + &hs;
            }
        }
        let other = fundamental_form(&MetricJet::new(g)?, s, m)?.on_sigma(s)?;
        let o = base.order().min(other.order());
        if !base.truncate(o).sub(&other.truncate(o))?.is_zero() {
            measured = k;
        }
    }
    form.transverse_order_measured = Some(measured);
    Ok(form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::curvature_pack;

    type J = Jet<Rational>;

    fn at(d: usize, n: usize, a: usize, base: i64) -> J {
        J::coordinate(d, n, a, Rational::integer(base)).unwrap()
    }

    #[test]
    fn hyperplane_forms_vanish_in_flat_space() {
        let d = 6;
        let n = 5;
        let p = curvature_pack(&MetricJet::<Rational>::flat(d, n)).unwrap();
        let f = conormal_data(&p, &at(d, n, 0, 0)).unwrap();
        assert!(third_form(&p, &f).unwrap().tensor.is_zero());
        assert!(fourth_form(&p, &f).unwrap().tensor.is_zero());
        assert_eq!(third_form(&p, &f).unwrap().weight, 0);
    }

    #[test]
    fn round_sphere_is_umbilic_so_forms_vanish() {
        // s = (r² - 1)/2 at (1, 0, ...): the unit sphere.
        let d = 6;
        let n = 5;
        let p = curvature_pack(&MetricJet::<Rational>::flat(d, n)).unwrap();
        let mut r2 = J::zero(d, n);
        for a in 0..d {
            let x = at(d, n, a, i64::from(a == 0));
            r2 = &r2 + &(&x * &x);
        }
        let s = (&r2 - &J::one(d, n)).scale(&Rational::new(1, 2));
        let f = conormal_data(&p, &s).unwrap();
        let on = |t: &TensorJet<Rational>| reduce_on_sigma(t, &f.s).unwrap();
        assert!(on(&third_form(&p, &f).unwrap().tensor).is_zero());
        assert!(on(&fourth_form(&p, &f).unwrap().tensor).is_zero());
        assert!(on(&hypersurface_weyl(&p, &f).unwrap()).is_zero());
    }

    #[test]
    fn forms_are_tangential_and_tracefree() {
        let d = 6;
        let n = 5;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let m = crate::samples::random_metric(&mut rng, d, n, 2);
        let p = curvature_pack(&m).unwrap();
        let s = &at(d, n, 0, 0) + &crate::samples::random_polynomial(&mut rng, d, n, 2, 2, 1);
        let f = conormal_data(&p, &s).unwrap();
        for form in [third_form(&p, &f).unwrap(), fourth_form(&p, &f).unwrap()] {
            let t = &form.tensor;
            assert!(t.verify_symmetry());
            assert!(contract_vector(t, 0, &f.n_hat_up).unwrap().is_zero());
            assert!(p.metric.trace(t, 0, 1).unwrap().is_zero());
        }
    }

    #[test]
    fn dimension_preconditions() {
        let p = curvature_pack(&MetricJet::<Rational>::flat(5, 4)).unwrap();
        let f = conormal_data(&p, &at(5, 4, 0, 0)).unwrap();
        assert!(matches!(fourth_form(&p, &f), Err(EngineError::DimensionTooSmall { .. })));
        let p3 = curvature_pack(&MetricJet::<Rational>::flat(3, 4)).unwrap();
        let f3 = conormal_data(&p3, &at(3, 4, 0, 0)).unwrap();
        assert!(third_form(&p3, &f3).is_err());
    }

    #[test]
    fn delta_one_of_scale_is_one_on_sigma() {
        // Unit normal derivative of a weight-1 defining density minus H s.
        let d = 4;
        let n = 4;
        let p = curvature_pack(&MetricJet::<Rational>::flat(d, n)).unwrap();
        let tb = TractorBundle::new(&p);
        let s = at(d, n, 0, 0);
        let f = conormal_data(&p, &s).unwrap();
        let t = TensorJet::scalar(s.clone()).with_weight(Rational::integer(1));
        let r = delta_k_apply(&tb, &f, &t, 1).unwrap();
        assert_eq!(r.as_scalar().unwrap(), &J::one(d, n - 1));
        assert_eq!(r.weight, Rational::integer(0));
    }

    #[test]
    fn delta_k_rejects_excluded_weights() {
        let d = 4;
        let n = 5;
        let p = curvature_pack(&MetricJet::<Rational>::flat(d, n)).unwrap();
        let tb = TractorBundle::new(&p);
        let f = conormal_data(&p, &at(d, n, 0, 0)).unwrap();
        // k = 3 excludes d + 2w ∈ {4, 5}: w = 0 is out.
        let t = TensorJet::scalar(at(d, n, 1, 0)).with_weight(Rational::integer(0));
        assert!(matches!(delta_k_apply(&tb, &f, &t, 3), Err(EngineError::ForbiddenWeight { .. })));
        assert!(delta_k_apply(&tb, &f, &t, 1).is_ok());
    }
}
