//! Tractor calculus in the splitting determined by the background metric.
//!
//! Tractors are [`TensorJet`]s whose slots are [`Slot::TractorUp`] or
//! [`Slot::TractorDown`]. A tractor index runs over `0` (top, `τ⁺`),
//! `1..=d` (middle, `τ^a`) and `d + 1` (bottom, `τ⁻`) for upper slots; a lower
//! slot holds `h_AB T^B` in the same index positions.

use crate::error::{EngineError, Result};
use crate::geometry::{covariant_derivative_with, divergence_first_with, Connection, CurvaturePack, MetricJet};
use crate::hypersurface::{mean_curvature, HypersurfaceFrame};
use crate::jet::{Jet, ProductSum};
use crate::scalar::{Rational, Scalar};
use crate::tensor::{Slot, Symmetry, TensorJet};

/// Conformal change `g ↦ Ω² g` with `Υ_a = ∂_a log Ω`.
#[derive(Debug, Clone)]
pub struct RescaleSpec<S: Scalar> {
    pub omega: Jet<S>,
    pub upsilon: Vec<Jet<S>>,
}

impl<S: Scalar> RescaleSpec<S> {
    pub fn new(omega: Jet<S>) -> Result<Self> {
        if !omega.constant_term().is_positive() {
            return Err(EngineError::NotPositive("conformal factor"));
        }
        let inv = omega.reciprocal()?;
        let upsilon = (0..omega.dim())
            .map(|a| Ok(&omega.differentiate(a)? * &inv))
            .collect::<Result<_>>()?;
        Ok(RescaleSpec { omega, upsilon })
    }
}

/// Tractor metric, connection and operators for one choice of scale.
pub struct TractorBundle<'p, S: Scalar> {
    pack: &'p CurvaturePack<S>,
    tangent: Connection<S>,
    conn: Connection<S>,
}

fn weight_of<S: Scalar>(t: &TensorJet<S>) -> S {
    S::from_rational(&t.weight)
}

fn only_tractor_slots<S: Scalar>(t: &TensorJet<S>, op: &str) -> Result<()> {
    if t.slots().iter().all(|s| s.is_tractor()) {
        Ok(())
    } else {
        Err(EngineError::Shape(format!("{op} expects tractor slots only")))
    }
}

/// Replaces slot `k` by `new_kind` with components `Σ_e m[i][e] T[.., e, ..]`.
fn map_slot<S: Scalar>(
    t: &TensorJet<S>,
    k: usize,
    new_kind: Slot,
    m: &[Vec<Jet<S>>],
) -> TensorJet<S> {
    let d = t.dim();
    let mut slots = t.slots().to_vec();
    slots[k] = new_kind;
    let out = TensorJet::from_fn(d, slots, |i| {
        let mut j = i.to_vec();
        let mut acc = ProductSum::new();
        for (e, c) in m[i[k]].iter().enumerate() {
            j[k] = e;
            acc.add_product(c, t.get(&j));
        }
        acc.finish(d, t.order())
    });
    out.with_weight(t.weight.clone())
}

impl<'p, S: Scalar> TractorBundle<'p, S> {
    pub fn new(pack: &'p CurvaturePack<S>) -> Self {
        let d = pack.dim();
        let tangent = pack.tangent_connection();
        let order = pack.schouten.order();
        let z = Jet::zero(d, order);
        let one = Jet::one(d, order);
        let bottom = d + 1;
        let mut conn = vec![vec![vec![z.clone(); d + 2]; d + 2]; d];
        for a in 0..d {
            for e in 0..d {
                conn[a][0][1 + e] = -pack.metric.gij(a, e);
                conn[a][bottom][1 + e] = -pack.schouten.get(&[a, e]);
                for b in 0..d {
                    conn[a][1 + b][1 + e] = pack.gamma.get(&[b, a, e]).clone();
                }
            }
            for b in 0..d {
                let mut pab = Jet::zero(d, order);
                for c in 0..d {
                    pab = &pab + &(pack.schouten.get(&[a, c]) * pack.metric.ginv(c, b));
                }
                conn[a][1 + b][0] = pab;
            }
            conn[a][1 + a][bottom] = one.clone();
        }
        TractorBundle { pack, tangent, conn }
    }

    pub fn pack(&self) -> &CurvaturePack<S> {
        self.pack
    }

    pub fn dim(&self) -> usize {
        self.pack.dim()
    }

    /// `∇_a T^B = ∂_a T^B + conn[a][B][E] T^E` on upper tractor slots.
    pub fn connection(&self) -> &Connection<S> {
        &self.conn
    }

    fn order(&self) -> usize {
        self.pack.metric.order()
    }

    /// `h_AB`, or `h^AB` when `upper`.
    pub fn metric(&self, upper: bool) -> TensorJet<S> {
        let d = self.dim();
        let n = self.order();
        let kind = if upper { Slot::TractorUp } else { Slot::TractorDown };
        TensorJet::from_fn(d, vec![kind, kind], |i| match (i[0], i[1]) {
            (0, b) | (b, 0) if b == d + 1 => Jet::one(d, n),
            (a, b) if (1..=d).contains(&a) && (1..=d).contains(&b) => {
                if upper {
                    self.pack.metric.ginv(a - 1, b - 1).clone()
                } else {
                    self.pack.metric.gij(a - 1, b - 1).clone()
                }
            }
            _ => Jet::zero(d, n),
        })
        .with_symmetry(Symmetry::Symmetric)
    }

    fn metric_rows(&self, upper: bool) -> Vec<Vec<Jet<S>>> {
        let h = self.metric(upper);
        let n = self.dim() + 2;
        (0..n)
            .map(|i| (0..n).map(|j| h.get(&[i, j]).clone()).collect())
            .collect()
    }

    /// Canonical tractor `X^A = (0, 0, 1)`, weight 1.
    pub fn canonical_x(&self) -> TensorJet<S> {
        let d = self.dim();
        let n = self.order();
        TensorJet::from_fn(d, vec![Slot::TractorUp], |i| {
            if i[0] == d + 1 {
                Jet::one(d, n)
            } else {
                Jet::zero(d, n)
            }
        })
        .with_weight(Rational::integer(1))
    }

    /// Lowers tractor slot `k` with `h`.
    pub fn lower(&self, t: &TensorJet<S>, k: usize) -> Result<TensorJet<S>> {
        if t.slots().get(k) != Some(&Slot::TractorUp) {
            return Err(EngineError::Shape(format!("slot {k} is not an upper tractor slot")));
        }
        Ok(map_slot(t, k, Slot::TractorDown, &self.metric_rows(false)))
    }

    /// Raises tractor slot `k` with `h^{-1}`.
    pub fn raise(&self, t: &TensorJet<S>, k: usize) -> Result<TensorJet<S>> {
        if t.slots().get(k) != Some(&Slot::TractorDown) {
            return Err(EngineError::Shape(format!("slot {k} is not a lower tractor slot")));
        }
        Ok(map_slot(t, k, Slot::TractorUp, &self.metric_rows(true)))
    }

    /// `h(U, V)` for two rank-1 tractors; weights add.
    pub fn pair(&self, u: &TensorJet<S>, v: &TensorJet<S>) -> Result<Jet<S>> {
        for t in [u, v] {
            if t.rank() != 1 || !t.slots()[0].is_tractor() {
                return Err(EngineError::Shape("pairing needs rank-1 tractors".into()));
            }
            if t.dim() != self.dim() {
                return Err(EngineError::DimensionMismatch {
                    left: t.dim(),
                    right: self.dim(),
                });
            }
        }
        let u = if u.slots()[0] == Slot::TractorUp { self.lower(u, 0)? } else { u.clone() };
        let v = if v.slots()[0] == Slot::TractorDown { self.raise(v, 0)? } else { v.clone() };
        let t = u.outer(&v)?.contract(0, 1)?;
        Ok(t.as_scalar()?.clone())
    }

    /// Tractor-coupled covariant derivative, derivative slot first.
    pub fn nabla(&self, t: &TensorJet<S>) -> Result<TensorJet<S>> {
        covariant_derivative_with(t, &self.tangent, Some(&self.conn))
    }

    /// `Δ T = g^{ab} ∇_a ∇_b T` with the coupled connection.
    pub fn laplacian(&self, t: &TensorJet<S>) -> Result<TensorJet<S>> {
        let grad = self.pack.metric.raise(&self.nabla(t)?, 0)?;
        divergence_first_with(&grad, &self.tangent, Some(&self.conn))
    }

    /// Thomas operator `D^A T`, new upper slot first, weight lowered by one.
    pub fn thomas_d(&self, t: &TensorJet<S>) -> Result<TensorJet<S>> {
        only_tractor_slots(t, "thomas_d")?;
        if t.order() < 2 {
            return Err(EngineError::InsufficientOrder {
                context: "thomas_d",
                needed: 2,
                available: t.order(),
            });
        }
        let d = self.dim();
        let w = weight_of(t);
        let factor = S::from_i64(d as i64 - 2).add(&w.scale_i64(2));
        let grad = self.pack.metric.raise(&self.nabla(t)?, 0)?;
        let lap = self.laplacian(t)?;
        let bottom = lap.add(&t.mul_jet(&self.pack.j).scale(&w))?.neg();
        let top_coef = w.mul(&factor);
        let mut slots = vec![Slot::TractorUp];
        slots.extend_from_slice(t.slots());
        let out = TensorJet::from_fn(d, slots, |i| {
            let rest = &i[1..];
            match i[0] {
                0 => t.get(rest).scale(&top_coef),
                b if b == d + 1 => bottom.get(rest).clone(),
                a => {
                    let mut j = vec![a - 1];
                    j.extend_from_slice(rest);
                    grad.get(&j).scale(&factor)
                }
            }
        });
        Ok(out.with_weight(&t.weight - &Rational::integer(1)))
    }

    /// `D / (d + 2w - 2)`; undefined at `w = 1 - d/2`.
    pub fn hatted_d(&self, t: &TensorJet<S>) -> Result<TensorJet<S>> {
        let d = self.dim() as i64;
        let factor = &Rational::integer(d - 2) + &t.weight.scale_i64(2);
        let inv = factor.recip().ok_or_else(|| EngineError::ForbiddenWeight {
            operation: "hatted_d",
            weight: t.weight.to_string(),
        })?;
        let dt = self.thomas_d(t)?;
        let w = dt.weight.clone();
        Ok(dt.scale(&S::from_rational(&inv)).with_weight(w))
    }

    /// `I^A = ĥD^A σ` for a weight-one representative `σ`.
    pub fn scale_tractor(&self, sigma: &Jet<S>) -> Result<TensorJet<S>> {
        self.hatted_d(&TensorJet::scalar(sigma.clone()).with_weight(Rational::integer(1)))
    }

    /// `N^A = (0, n̂^a, -H)`.
    pub fn normal_tractor(&self, frame: &HypersurfaceFrame<S>) -> Result<TensorJet<S>> {
        let d = self.dim();
        let h = mean_curvature(frame, self.pack)?;
        let n = frame.n_hat_up.order();
        Ok(TensorJet::from_fn(d, vec![Slot::TractorUp], |i| match i[0] {
            0 => Jet::zero(d, n),
            b if b == d + 1 => -&h,
            a => frame.n_hat_up.get(&[a - 1]).clone(),
        }))
    }

    /// `P_AB = ĥD_A I_B`, both slots lower.
    pub fn p_tractor(&self, sigma: &Jet<S>) -> Result<TensorJet<S>> {
        let i_low = self.lower(&self.scale_tractor(sigma)?, 0)?;
        let p = self.hatted_d(&i_low)?;
        self.lower(&p, 0)
    }

    /// `X_C T^{C...}` on the first slot of an upper tractor: its top component.
    fn x_contract_first(&self, t: &TensorJet<S>) -> TensorJet<S> {
        let d = self.dim();
        let out = TensorJet::from_fn(d, t.slots()[1..].to_vec(), |rest| {
            let mut j = vec![0];
            j.extend_from_slice(rest);
            t.get(&j).clone()
        });
        out.with_weight(&t.weight + &Rational::integer(1))
    }

    /// `h_AB S^{AB}` on the first two slots (both upper).
    pub fn trace(&self, t: &TensorJet<S>) -> Result<TensorJet<S>> {
        self.lower(t, 0)?.contract(0, 1)
    }

    /// Symmetric, `h`-trace-free part of a rank-2 upper tractor.
    fn sym_trace_free(&self, t: &TensorJet<S>) -> Result<TensorJet<S>> {
        let sym = t.symmetrize2()?;
        let tr = self.trace(&sym)?;
        let tr = tr.as_scalar()?;
        let f = tr.scale(&S::from_frac(1, self.dim() as i64 + 2));
        let out = sym.sub(&self.metric(true).mul_jet(&f))?;
        Ok(out.with_weight(t.weight.clone()).with_symmetry(Symmetry::Symmetric))
    }

    /// Four-term operator moving the projecting part of a symmetric
    /// trace-free weight-`w` tractor `T^{AB}` into the middle block.
    pub fn r_operator(&self, t: &TensorJet<S>) -> Result<TensorJet<S>> {
        if t.slots() != [Slot::TractorUp, Slot::TractorUp] {
            return Err(EngineError::Shape("r_operator expects T^{AB}".into()));
        }
        let w = t.weight.clone();
        let d = self.dim() as i64;
        let two_w_plus_d = &w.scale_i64(2) + &Rational::integer(d);
        let excluded = w.is_zero()
            || w == Rational::integer(-1)
            || two_w_plus_d.is_zero()
            || two_w_plus_d == Rational::integer(-2)
            || two_w_plus_d == Rational::integer(-4);
        if excluded {
            return Err(EngineError::ForbiddenWeight {
                operation: "r_operator",
                weight: w.to_string(),
            });
        }
        if t.permute(&[1, 0])? != *t {
            return Err(EngineError::Precondition("r_operator input is not symmetric".into()));
        }
        if !self.trace(t)?.is_zero() {
            return Err(EngineError::Precondition("r_operator input is not trace-free".into()));
        }
        let xt = self.x_contract_first(t);
        let term1 = self.sym_trace_free(&self.hatted_d(&xt)?)?;
        let xxt = self.x_contract_first(&xt);
        let term2 = self.sym_trace_free(&self.hatted_d(&self.hatted_d(&xxt)?)?)?;
        let div = self.trace(&self.hatted_d(&xt)?)?;
        let term3 = self.sym_trace_free(&self.canonical_x().outer(&self.hatted_d(&div)?)?)?;

        let c1 = S::from_rational(&(&Rational::integer(2) / &w));
        let c2 = S::from_rational(&(&w * &(&w + &Rational::integer(1))).recip().unwrap());
        let c3 = S::from_rational(
            &(&Rational::integer(8) / &(&(&w * &Rational::integer(d)) * &(&two_w_plus_d + &Rational::integer(2)))),
        );
        let out = t
            .sub(&term1.scale(&c1))?
            .add(&term2.scale(&c2))?
            .sub(&term3.scale(&c3))?;
        Ok(out.with_weight(w).with_symmetry(Symmetry::Symmetric))
    }
}

/// `h(U, V)` computed in the scale of `pack`.
pub fn tractor_pair<S: Scalar>(
    pack: &CurvaturePack<S>,
    u: &TensorJet<S>,
    v: &TensorJet<S>,
) -> Result<Jet<S>> {
    TractorBundle::new(pack).pair(u, v)
}

/// The first block, in splitting order, that is not identically zero.
///
/// Lower tractor slots must be raised first; the block is returned with
/// an upper tangent slot for every middle tractor slot.
pub fn q_star<S: Scalar>(t: &TensorJet<S>) -> Result<TensorJet<S>> {
    if t.slots().iter().any(|s| *s != Slot::TractorUp) {
        return Err(EngineError::Shape("q_star expects upper tractor slots".into()));
    }
    let d = t.dim();
    let r = t.rank();
    let mut blocks: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..r {
        blocks = blocks
            .into_iter()
            .flat_map(|b| {
                (0..3).map(move |l| {
                    let mut b = b.clone();
                    b.push(l);
                    b
                })
            })
            .collect();
    }
    blocks.sort_by_key(|b| (b.iter().sum::<usize>(), b.clone()));
    for block in blocks {
        let slots: Vec<Slot> = block.iter().filter(|&&l| l == 1).map(|_| Slot::Up).collect();
        let to_tractor = |i: &[usize]| -> Vec<usize> {
            let mut k = 0;
            block
                .iter()
                .map(|&l| match l {
                    0 => 0,
                    2 => d + 1,
                    _ => {
                        k += 1;
                        i[k - 1] + 1
                    }
                })
                .collect()
        };
        let out = TensorJet::from_fn(d, slots, |i| t.get(&to_tractor(i)).clone());
        if !out.is_zero() {
            let shift: i64 = block.iter().map(|&l| if l == 0 { 1 } else { -1 }).sum();
            return Ok(out.with_weight(&t.weight + &Rational::integer(shift)));
        }
    }
    Err(EngineError::ZeroTractor)
}

fn omega_power<S: Scalar>(omega: &Jet<S>, k: i64) -> Result<Jet<S>> {
    Ok(if k >= 0 {
        omega.powi(k as usize)
    } else {
        omega.reciprocal()?.powi((-k) as usize)
    })
}

/// Components of `t`, given in the scale `g`, expressed in the scale `Ω² g`.
pub fn apply_rescale<S: Scalar>(
    t: &TensorJet<S>,
    metric: &MetricJet<S>,
    spec: &RescaleSpec<S>,
) -> Result<TensorJet<S>> {
    only_tractor_slots(t, "apply_rescale")?;
    if !spec.omega.constant_term().is_positive() {
        return Err(EngineError::NotPositive("conformal factor"));
    }
    if !t.weight.is_integer() {
        return Err(EngineError::Precondition("apply_rescale needs an integral weight".into()));
    }
    let d = t.dim();
    let n = t.order().min(spec.omega.order());
    let z = Jet::zero(d, n);
    let one = Jet::one(d, n);
    let ups = TensorJet::from_fn(d, vec![Slot::Down], |i| spec.upsilon[i[0]].clone());
    let ups_up = metric.raise(&ups, 0)?;
    let ups2 = metric.inner_covectors(&spec.upsilon, &spec.upsilon);
    let w = t.weight.numer().try_into().map_err(|_| EngineError::Precondition("weight too large".into()))?;
    let o_w = omega_power(&spec.omega, w)?;
    let o_up = spec.omega.clone();
    let o_dn = spec.omega.reciprocal()?;

    // Upper slot: (τ⁺, τ + Υ τ⁺, τ⁻ - Υ·τ - |Υ|²τ⁺/2), then slot weights.
    let mut m = vec![vec![z.clone(); d + 2]; d + 2];
    m[0][0] = o_up.clone();
    for a in 0..d {
        m[1 + a][1 + a] = o_dn.clone();
        m[1 + a][0] = ups_up.get(&[a]) * &o_dn;
        m[d + 1][1 + a] = -&(&spec.upsilon[a] * &o_dn);
    }
    m[d + 1][d + 1] = &one * &o_dn;
    m[d + 1][0] = -&(&ups2 * &o_dn).scale(&S::from_frac(1, 2));

    let bundle_metric = TractorMetric::new(metric);
    let new_metric = TractorMetric::new(&metric.conformal_rescale(&spec.omega)?);
    let mut cur = t.clone();
    for k in 0..t.rank() {
        let down = cur.slots()[k] == Slot::TractorDown;
        if down {
            cur = map_slot(&cur, k, Slot::TractorUp, &bundle_metric.upper);
        }
        cur = map_slot(&cur, k, Slot::TractorUp, &m);
        if down {
            cur = map_slot(&cur, k, Slot::TractorDown, &new_metric.lower);
        }
    }
    Ok(cur.mul_jet(&o_w).with_weight(t.weight.clone()))
}

struct TractorMetric<S> {
    upper: Vec<Vec<Jet<S>>>,
    lower: Vec<Vec<Jet<S>>>,
}

impl<S: Scalar> TractorMetric<S> {
    fn new(m: &MetricJet<S>) -> Self {
        let d = m.dim();
        let n = m.order();
        let build = |f: &dyn Fn(usize, usize) -> Jet<S>| -> Vec<Vec<Jet<S>>> {
            (0..d + 2)
                .map(|i| {
                    (0..d + 2)
                        .map(|j| match (i, j) {
                            (0, b) | (b, 0) if b == d + 1 => Jet::one(d, n),
                            (a, b) if (1..=d).contains(&a) && (1..=d).contains(&b) => f(a - 1, b - 1),
                            _ => Jet::zero(d, n),
                        })
                        .collect()
                })
                .collect()
        };
        TractorMetric {
            upper: build(&|a, b| m.ginv(a, b).clone()),
            lower: build(&|a, b| m.gij(a, b).clone()),
        }
    }
}
