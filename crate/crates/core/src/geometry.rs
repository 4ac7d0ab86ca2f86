//! Curvature of a metric given by jet components.
//!
//! Convention: `R_ab^c_d v^d = [∇_a, ∇_b] v^c`, Ricci is the trace over the
//! first and third slot, and `R_abcd = W_abcd + g_ac P_bd - g_bc P_ad - g_ad P_bc + g_bd P_ac`.
//! The round sphere has positive Ricci curvature and `P = g/2`.

use std::sync::OnceLock;

use crate::error::{EngineError, Result};
use crate::jet::{Jet, ProductSum};
use crate::scalar::{Rational, Scalar};
use crate::tensor::{self, JetMatrix, Slot, Symmetry, TensorJet};

/// Connection coefficients `conn[a][I][J]`: `∇_a V^I = ∂_a V^I + conn[a][I][J] V^J`.
pub type Connection<S> = Vec<Vec<Vec<Jet<S>>>>;

#[derive(Clone, Debug)]
pub struct MetricJet<S: Scalar> {
    g: TensorJet<S>,
    g_inv: TensorJet<S>,
}

impl<S: Scalar> MetricJet<S> {
    /// Validates symmetry and positivity at the base point, then inverts.
    pub fn new(g: JetMatrix<S>) -> Result<Self> {
        let d = g.len();
        if d == 0 || g.iter().any(|r| r.len() != d) {
            return Err(EngineError::Shape("metric must be a square matrix".into()));
        }
        let jdim = g[0][0].dim();
        if jdim != d {
            return Err(EngineError::DimensionMismatch { left: d, right: jdim });
        }
        for a in 0..d {
            for b in 0..a {
                if g[a][b] != g[b][a] {
                    return Err(EngineError::Shape(format!(
                        "metric is not symmetric in components ({a},{b})"
                    )));
                }
            }
        }
        if !leading_minors_positive(&g) {
            return Err(EngineError::NotPositiveDefinite);
        }
        let inv = tensor::invert(&g)?;
        let gt = TensorJet::from_fn(d, vec![Slot::Down, Slot::Down], |i| g[i[0]][i[1]].clone())
            .with_weight(Rational::integer(2))
            .with_symmetry(Symmetry::Symmetric);
        let gi = TensorJet::from_fn(d, vec![Slot::Up, Slot::Up], |i| inv[i[0]][i[1]].clone())
            .with_weight(Rational::integer(-2))
            .with_symmetry(Symmetry::Symmetric);
        Ok(MetricJet { g: gt, g_inv: gi })
    }

    /// The flat metric `δ` to the given order.
    pub fn flat(dim: usize, order: usize) -> Self {
        let g = (0..dim)
            .map(|a| {
                (0..dim)
                    .map(|b| {
                        if a == b {
                            Jet::one(dim, order)
                        } else {
                            Jet::zero(dim, order)
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(g).expect("flat metric is valid")
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn order(&self) -> usize {
        self.g.order()
    }

    pub fn g(&self) -> &TensorJet<S> {
        &self.g
    }

    pub fn g_inv(&self) -> &TensorJet<S> {
        &self.g_inv
    }

    pub fn gij(&self, a: usize, b: usize) -> &Jet<S> {
        self.g.get(&[a, b])
    }

    pub fn ginv(&self, a: usize, b: usize) -> &Jet<S> {
        self.g_inv.get(&[a, b])
    }

    pub fn matrix(&self) -> JetMatrix<S> {
        let d = self.dim();
        (0..d)
            .map(|a| (0..d).map(|b| self.gij(a, b).clone()).collect())
            .collect()
    }

    /// `Ω² g` for a positive scalar jet `Ω`.
    pub fn conformal_rescale(&self, omega: &Jet<S>) -> Result<Self> {
        if !omega.constant_term().is_positive() {
            return Err(EngineError::NotPositive("conformal factor"));
        }
        let o2 = omega * omega;
        Self::new(
            self.matrix()
                .into_iter()
                .map(|r| r.iter().map(|x| x * &o2).collect())
                .collect(),
        )
    }

    /// `g(u, v)` for two vectors.
    pub fn inner_vectors(&self, u: &[Jet<S>], v: &[Jet<S>]) -> Jet<S> {
        contract2(self.g.components(), u, v, self.dim())
    }

    /// `g^{-1}(α, β)` for two covectors.
    pub fn inner_covectors(&self, u: &[Jet<S>], v: &[Jet<S>]) -> Jet<S> {
        contract2(self.g_inv.components(), u, v, self.dim())
    }

    /// Raises a lower tangent slot.
    pub fn raise(&self, t: &TensorJet<S>, slot: usize) -> Result<TensorJet<S>> {
        self.move_index(t, slot, Slot::Down, Slot::Up, &self.g_inv)
    }

    /// Lowers an upper tangent slot.
    pub fn lower(&self, t: &TensorJet<S>, slot: usize) -> Result<TensorJet<S>> {
        self.move_index(t, slot, Slot::Up, Slot::Down, &self.g)
    }

    fn move_index(
        &self,
        t: &TensorJet<S>,
        slot: usize,
        from: Slot,
        to: Slot,
        m: &TensorJet<S>,
    ) -> Result<TensorJet<S>> {
        if t.slots().get(slot) != Some(&from) {
            return Err(EngineError::Shape(format!(
                "slot {slot} of {:?} is not {from:?}",
                t.slots()
            )));
        }
        let d = self.dim();
        let mut slots = t.slots().to_vec();
        slots[slot] = to;
        let out = TensorJet::from_fn(d, slots, |i| {
            let mut j = i.to_vec();
            let mut acc = ProductSum::new();
            for e in 0..d {
                j[slot] = e;
                acc.add_product(m.get(&[i[slot], e]), t.get(&j));
            }
            acc.finish(d, t.order().min(m.order()))
        });
        Ok(out.with_weight(t.weight.clone()))
    }

    /// Trace of two lower slots with `g^{-1}`.
    pub fn trace(&self, t: &TensorJet<S>, i: usize, j: usize) -> Result<TensorJet<S>> {
        self.raise(t, i)?.contract(i, j)
    }

    /// Trace-free part of a symmetric 2-tensor with lower slots.
    pub fn trace_free(&self, t: &TensorJet<S>) -> Result<TensorJet<S>> {
        if t.slots() != [Slot::Down, Slot::Down] {
            return Err(EngineError::Shape("trace_free needs a (0,2) tensor".into()));
        }
        let tr = self.trace(t, 0, 1)?;
        let tr = tr.as_scalar()?;
        let f = tr.scale(&S::from_frac(1, self.dim() as i64));
        let out = t.sub(&self.g.mul_jet(&f).with_weight(t.weight.clone()))?;
        Ok(out.with_weight(t.weight.clone()).with_symmetry(t.symmetry))
    }
}

fn contract2<S: Scalar>(m: &[Jet<S>], u: &[Jet<S>], v: &[Jet<S>], d: usize) -> Jet<S> {
    let dim = u[0].dim();
    let order = u.iter().chain(v).map(Jet::order).min().unwrap_or(0);
    let mut acc = ProductSum::new();
    for a in 0..d {
        let mut row = ProductSum::new();
        for b in 0..d {
            row.add_product(&m[a * d + b], &v[b]);
        }
        acc.add_product(&u[a], &row.finish(dim, order));
    }
    acc.finish(dim, order)
}

fn leading_minors_positive<S: Scalar>(g: &JetMatrix<S>) -> bool {
    // Gaussian elimination without pivoting: pivots are ratios of leading minors.
    let n = g.len();
    let mut m: Vec<Vec<S>> = g
        .iter()
        .map(|r| r.iter().map(|j| j.constant_term().clone()).collect())
        .collect();
    for k in 0..n {
        if !m[k][k].is_positive() {
            return false;
        }
        let inv = m[k][k].inv().unwrap();
        for r in k + 1..n {
            let f = m[r][k].mul(&inv);
            for c in k..n {
                let p = f.mul(&m[k][c]);
                m[r][c] = m[r][c].sub(&p);
            }
        }
    }
    true
}

/// `Γ^c_ab`, slots `[Up, Down, Down]`.
pub fn christoffel<S: Scalar>(m: &MetricJet<S>) -> Result<TensorJet<S>> {
    Ok(christoffel_both(m)?.1)
}

/// Christoffel symbols of the first kind `Γ_{e,ab}` and second kind `Γ^c_ab`.
fn christoffel_both<S: Scalar>(m: &MetricJet<S>) -> Result<(TensorJet<S>, TensorJet<S>)> {
    let d = m.dim();
    if m.order() < 1 {
        return Err(EngineError::InsufficientOrder {
            context: "christoffel",
            needed: 1,
            available: m.order(),
        });
    }
    // dg[c][a][b] = ∂_c g_ab
    let mut dg = vec![vec![vec![Jet::zero(d, 0); d]; d]; d];
    for c in 0..d {
        for a in 0..d {
            for b in a..d {
                let x = m.gij(a, b).differentiate(c)?;
                dg[c][a][b] = x.clone();
                dg[c][b][a] = x;
            }
        }
    }
    let half = S::from_frac(1, 2);
    let mut low = TensorJet::zeros(d, vec![Slot::Down, Slot::Down, Slot::Down], 0);
    for e in 0..d {
        for a in 0..d {
            for b in a..d {
                let v = (&(&dg[a][b][e] + &dg[b][a][e]) - &dg[e][a][b]).scale(&half);
                low.set(&[e, a, b], v.clone());
                low.set(&[e, b, a], v);
            }
        }
    }
    let mut up = TensorJet::zeros(d, vec![Slot::Up, Slot::Down, Slot::Down], 0);
    for c in 0..d {
        for a in 0..d {
            for b in a..d {
                let mut acc = ProductSum::new();
                for e in 0..d {
                    acc.add_product(m.ginv(c, e), low.get(&[e, a, b]));
                }
                let acc = acc.finish(d, m.order() - 1);
                up.set(&[c, a, b], acc.clone());
                up.set(&[c, b, a], acc);
            }
        }
    }
    Ok((low, up))
}

/// Curvature quantities; Riemann, Weyl and Cotton are built on first use.
#[derive(Debug)]
pub struct CurvaturePack<S: Scalar> {
    pub metric: MetricJet<S>,
    /// `Γ^c_ab`.
    pub gamma: TensorJet<S>,
    /// `Γ_{e,ab} = g_ec Γ^c_ab`.
    pub gamma_lower: TensorJet<S>,
    /// `g^ab Γ^c_ab`.
    pub gamma_trace: Vec<Jet<S>>,
    pub ricci: TensorJet<S>,
    pub sc: Jet<S>,
    pub schouten: TensorJet<S>,
    pub j: Jet<S>,
    riemann: OnceLock<TensorJet<S>>,
    weyl: OnceLock<TensorJet<S>>,
    cotton: OnceLock<TensorJet<S>>,
}

impl<S: Scalar> Clone for CurvaturePack<S> {
    fn clone(&self) -> Self {
        CurvaturePack {
            metric: self.metric.clone(),
            gamma: self.gamma.clone(),
            gamma_lower: self.gamma_lower.clone(),
            gamma_trace: self.gamma_trace.clone(),
            ricci: self.ricci.clone(),
            sc: self.sc.clone(),
            schouten: self.schouten.clone(),
            j: self.j.clone(),
            riemann: self.riemann.clone(),
            weyl: self.weyl.clone(),
            cotton: self.cotton.clone(),
        }
    }
}

/// `Ric_bd = ∂_c Γ^c_bd - ∂_b Γ^c_cd + Γ^c_ce Γ^e_bd - Γ^c_be Γ^e_cd`.
fn ricci_from<S: Scalar>(gamma: &TensorJet<S>, d: usize) -> Result<TensorJet<S>> {
    let mut trace = Vec::with_capacity(d);
    for e in 0..d {
        let mut acc = Jet::zero(d, gamma.order());
        for c in 0..d {
            acc = &acc + gamma.get(&[c, c, e]);
        }
        trace.push(acc);
    }
    let mut ric = TensorJet::zeros(d, vec![Slot::Down, Slot::Down], 0);
    for b in 0..d {
        for dd in b..d {
            let mut acc = ProductSum::new();
            for c in 0..d {
                acc.add(&gamma.get(&[c, b, dd]).differentiate(c)?);
            }
            acc.sub(&trace[dd].differentiate(b)?);
            for e in 0..d {
                acc.add_product(&trace[e], gamma.get(&[e, b, dd]));
                for c in 0..d {
                    acc.sub_product(gamma.get(&[c, b, e]), gamma.get(&[e, c, dd]));
                }
            }
            let acc = acc.finish(d, gamma.order() - 1);
            ric.set(&[b, dd], acc.clone());
            ric.set(&[dd, b], acc);
        }
    }
    Ok(ric.with_symmetry(Symmetry::Symmetric))
}

/// `R_abcd` with the sign convention documented at the top of the module.
pub fn riemann<S: Scalar>(m: &MetricJet<S>) -> Result<TensorJet<S>> {
    if m.order() < 2 {
        return Err(EngineError::InsufficientOrder {
            context: "riemann",
            needed: 2,
            available: m.order(),
        });
    }
    let (low, up) = christoffel_both(m)?;
    riemann_from(&low, &up, m.dim())
}

fn riemann_from<S: Scalar>(
    low: &TensorJet<S>,
    up: &TensorJet<S>,
    d: usize,
) -> Result<TensorJet<S>> {
    let slots = vec![Slot::Down; 4];
    let mut r = TensorJet::zeros(d, slots, 0);
    // R_abcd = ∂_a Γ_{c,bd} - ∂_b Γ_{c,ad} - Γ_{e,ac} Γ^e_bd + Γ_{e,bc} Γ^e_ad
    let order = up.order() - 1;
    let mut filled = vec![false; d * d * d * d];
    let flat = |a: usize, b: usize, c: usize, e: usize| ((a * d + b) * d + c) * d + e;
    for a in 0..d {
        for b in a + 1..d {
            for c in 0..d {
                for dd in 0..d {
                    if filled[flat(a, b, c, dd)] {
                        continue;
                    }
                    let mut acc = ProductSum::with_cap(order);
                    acc.add(&low.get(&[c, b, dd]).differentiate(a)?);
                    acc.sub(&low.get(&[c, a, dd]).differentiate(b)?);
                    for e in 0..d {
                        acc.sub_product(low.get(&[e, a, c]), up.get(&[e, b, dd]));
                        acc.add_product(low.get(&[e, b, c]), up.get(&[e, a, dd]));
                    }
                    let acc = acc.finish(d, order);
                    let neg = -&acc;
                    for (idx, v) in [
                        ([a, b, c, dd], &acc),
                        ([b, a, c, dd], &neg),
                        ([a, b, dd, c], &neg),
                        ([b, a, dd, c], &acc),
                        ([c, dd, a, b], &acc),
                        ([dd, c, a, b], &neg),
                        ([c, dd, b, a], &neg),
                        ([dd, c, b, a], &acc),
                    ] {
                        filled[flat(idx[0], idx[1], idx[2], idx[3])] = true;
                        r.set(&idx, v.clone());
                    }
                }
            }
        }
    }
    for a in 0..d {
        for c in 0..d {
            for dd in 0..d {
                if !filled[flat(a, a, c, dd)] {
                    r.set(&[a, a, c, dd], Jet::zero(d, order));
                }
                if !filled[flat(c, dd, a, a)] {
                    r.set(&[c, dd, a, a], Jet::zero(d, order));
                }
            }
        }
    }
    Ok(r.with_weight(Rational::integer(2)).with_symmetry(Symmetry::Curvature))
}

/// Scalar curvature, defined for every dimension.
pub fn scalar_curvature<S: Scalar>(m: &MetricJet<S>) -> Result<Jet<S>> {
    let gamma = christoffel(m)?;
    let ric = ricci_from(&gamma, m.dim())?;
    Ok(m.trace(&ric, 0, 1)?.as_scalar()?.clone())
}

/// Curvature data needed by most consumers; requires `d >= 3`.
pub fn curvature_pack<S: Scalar>(m: &MetricJet<S>) -> Result<CurvaturePack<S>> {
    let d = m.dim();
    if d < 3 {
        return Err(EngineError::DimensionTooSmall {
            operation: "curvature_pack",
            required: 3,
            dim: d,
        });
    }
    if m.order() < 2 {
        return Err(EngineError::InsufficientOrder {
            context: "curvature_pack",
            needed: 2,
            available: m.order(),
        });
    }
    let (gamma_lower, gamma) = christoffel_both(m)?;
    let gamma_trace = (0..d)
        .map(|c| {
            let mut acc = ProductSum::new();
            for a in 0..d {
                for b in 0..d {
                    acc.add_product(m.ginv(a, b), gamma.get(&[c, a, b]));
                }
            }
            acc.finish(d, gamma.order())
        })
        .collect();
    let ricci = ricci_from(&gamma, d)?;
    let sc = m.trace(&ricci, 0, 1)?.as_scalar()?.clone();
    let dm1 = S::from_i64(d as i64 - 1);
    let j = sc.scale(&dm1.scale_i64(2).inv().unwrap());
    let g = m.g();
    let schouten = ricci
        .sub(&g.mul_jet(&j))?
        .scale(&S::from_i64(d as i64 - 2).inv().unwrap())
        .with_symmetry(Symmetry::Symmetric);
    Ok(CurvaturePack {
        metric: m.clone(),
        gamma,
        gamma_lower,
        gamma_trace,
        ricci,
        sc,
        schouten,
        j,
        riemann: OnceLock::new(),
        weyl: OnceLock::new(),
        cotton: OnceLock::new(),
    })
}

/// `g ⋏ P` part of the Riemann decomposition.
pub fn kulkarni_nomizu_gp<S: Scalar>(g: &TensorJet<S>, p: &TensorJet<S>) -> TensorJet<S> {
    let d = g.dim();
    TensorJet::from_fn(d, vec![Slot::Down; 4], |i| {
        let (a, b, c, e) = (i[0], i[1], i[2], i[3]);
        let t1 = g.get(&[a, c]) * p.get(&[b, e]);
        let t2 = g.get(&[b, c]) * p.get(&[a, e]);
        let t3 = g.get(&[a, e]) * p.get(&[b, c]);
        let t4 = g.get(&[b, e]) * p.get(&[a, c]);
        &(&(&t1 - &t2) - &t3) + &t4
    })
}

impl<S: Scalar> CurvaturePack<S> {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn riemann(&self) -> &TensorJet<S> {
        self.riemann.get_or_init(|| {
            riemann_from(&self.gamma_lower, &self.gamma, self.dim())
                .expect("order checked at construction")
        })
    }

    pub fn weyl(&self) -> &TensorJet<S> {
        self.weyl.get_or_init(|| {
            let kn = kulkarni_nomizu_gp(self.metric.g(), &self.schouten);
            self.riemann()
                .sub(&kn)
                .expect("shapes agree")
                .with_weight(Rational::integer(2))
                .with_symmetry(Symmetry::Curvature)
        })
    }

    /// `C_abc = ∇_a P_bc - ∇_b P_ac`, so that `∇^d W_dcab = (d - 3) C_abc`.
    pub fn cotton(&self) -> Result<&TensorJet<S>> {
        if let Some(c) = self.cotton.get() {
            return Ok(c);
        }
        let dp = covariant_derivative(self, &self.schouten)?;
        let swapped = dp.permute(&[1, 0, 2])?;
        let c = dp.sub(&swapped)?.with_symmetry(Symmetry::Antisymmetric);
        Ok(self.cotton.get_or_init(|| c))
    }

    /// Tangent connection in the `[a][I][J]` layout.
    pub fn tangent_connection(&self) -> Connection<S> {
        let d = self.dim();
        (0..d)
            .map(|a| {
                (0..d)
                    .map(|i| (0..d).map(|j| self.gamma.get(&[i, a, j]).clone()).collect())
                    .collect()
            })
            .collect()
    }

    /// `Δf = g^ab ∂_a ∂_b f - Γ^c ∂_c f`.
    pub fn laplacian(&self, f: &Jet<S>) -> Result<Jet<S>> {
        let d = self.dim();
        let df: Vec<Jet<S>> = (0..d).map(|a| f.differentiate(a)).collect::<Result<_>>()?;
        let mut acc = ProductSum::new();
        for a in 0..d {
            for b in a..d {
                let gi = self.metric.ginv(a, b);
                let ddf = df[a].differentiate(b)?;
                if a == b {
                    acc.add_product(gi, &ddf);
                } else {
                    acc.add_product(&gi.scale_i64(2), &ddf);
                }
            }
            acc.sub_product(&self.gamma_trace[a], &df[a]);
        }
        Ok(acc.finish(d, f.order().saturating_sub(2)))
    }
}

/// `∇_a T` with the derivative slot first, for tensors with tangent slots only.
pub fn covariant_derivative<S: Scalar>(
    pack: &CurvaturePack<S>,
    t: &TensorJet<S>,
) -> Result<TensorJet<S>> {
    covariant_derivative_with(t, &pack.tangent_connection(), None)
}

fn check_connections<S: Scalar>(t: &TensorJet<S>, tractor: Option<&Connection<S>>) -> Result<()> {
    if t.order() < 1 {
        return Err(EngineError::InsufficientOrder {
            context: "covariant derivative",
            needed: 1,
            available: t.order(),
        });
    }
    if t.slots().iter().any(|s| s.is_tractor()) && tractor.is_none() {
        return Err(EngineError::Shape(
            "tractor slot needs a tractor connection".into(),
        ));
    }
    Ok(())
}

/// Adds the connection terms of `∇_a` acting on the slots of `t` at index `idx` to `acc`.
/// Products are truncated at `cap`; `skip` excludes one slot.
fn add_connection_terms<S: Scalar>(
    acc: &mut Jet<S>,
    t: &TensorJet<S>,
    idx: &[usize],
    conns: (&[Vec<Jet<S>>], Option<&[Vec<Jet<S>>]>),
    cap: usize,
    skip: Option<usize>,
) {
    let d = t.dim();
    let mut j = idx.to_vec();
    let mut sum = ProductSum::with_cap(cap);
    sum.add(acc);
    for (k, &slot) in t.slots().iter().enumerate() {
        if skip == Some(k) {
            continue;
        }
        let conn = if slot.is_tractor() { conns.1.unwrap() } else { conns.0 };
        let orig = idx[k];
        for e in 0..slot.size(d) {
            let coef = if slot.is_up() { &conn[orig][e] } else { &conn[e][orig] };
            j[k] = e;
            if slot.is_up() {
                sum.add_product(coef, t.get(&j));
            } else {
                sum.sub_product(coef, t.get(&j));
            }
        }
        j[k] = orig;
    }
    *acc = sum.finish(acc.dim(), cap);
}

/// `∇_a T` using `tangent` for tangent slots and `tractor` for tractor slots.
pub fn covariant_derivative_with<S: Scalar>(
    t: &TensorJet<S>,
    tangent: &Connection<S>,
    tractor: Option<&Connection<S>>,
) -> Result<TensorJet<S>> {
    check_connections(t, tractor)?;
    let d = t.dim();
    let mut slots = vec![Slot::Down];
    slots.extend_from_slice(t.slots());
    let out = TensorJet::try_from_fn(d, slots, |i| {
        let a = i[0];
        let rest = &i[1..];
        let mut acc = t.get(rest).differentiate(a)?;
        let cap = acc.order();
        add_connection_terms(
            &mut acc,
            t,
            rest,
            (&tangent[a], tractor.map(|c| c[a].as_slice())),
            cap,
            None,
        );
        Ok(acc)
    })?;
    Ok(out.with_weight(t.weight.clone()))
}

/// `v^a ∇_a T` for a vector field `v`.
pub fn directional_derivative_with<S: Scalar>(
    t: &TensorJet<S>,
    v: &[Jet<S>],
    tangent: &Connection<S>,
    tractor: Option<&Connection<S>>,
) -> Result<TensorJet<S>> {
    check_connections(t, tractor)?;
    let d = t.dim();
    let contract = |conn: &Connection<S>| -> Vec<Vec<Jet<S>>> {
        let n = conn[0].len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut acc = ProductSum::new();
                        for a in 0..d {
                            acc.add_product(&v[a], &conn[a][i][j]);
                        }
                        acc.finish(d, usize::MAX)
                    })
                    .collect()
            })
            .collect()
    };
    let tan_v = contract(tangent);
    let trac_v = tractor.map(contract);
    let out = TensorJet::try_from_fn(d, t.slots().to_vec(), |idx| {
        let comp = t.get(idx);
        let mut sum = ProductSum::new();
        for a in 0..d {
            sum.add_product(&v[a], &comp.differentiate(a)?);
        }
        let mut acc = sum.finish(d, comp.order().saturating_sub(1));
        let cap = acc.order();
        add_connection_terms(&mut acc, t, idx, (&tan_v, trac_v.as_deref()), cap, None);
        Ok(acc)
    })?;
    Ok(out.with_weight(t.weight.clone()).with_symmetry(t.symmetry))
}

/// `∇_a V^{a...}`: divergence on a leading upper tangent slot.
pub fn divergence_first_with<S: Scalar>(
    v: &TensorJet<S>,
    tangent: &Connection<S>,
    tractor: Option<&Connection<S>>,
) -> Result<TensorJet<S>> {
    check_connections(v, tractor)?;
    if v.slots().first() != Some(&Slot::Up) {
        return Err(EngineError::Shape("divergence needs a leading upper slot".into()));
    }
    let d = v.dim();
    let out = TensorJet::try_from_fn(d, v.slots()[1..].to_vec(), |rest| {
        let mut idx = vec![0];
        idx.extend_from_slice(rest);
        let mut acc: Option<Jet<S>> = None;
        for a in 0..d {
            idx[0] = a;
            let mut term = v.get(&idx).differentiate(a)?;
            let cap = term.order();
            // Γ^a_{ae} v^{e...}
            let mut sum = ProductSum::with_cap(cap);
            sum.add(&term);
            for e in 0..d {
                idx[0] = e;
                sum.add_product(&tangent[a][a][e], v.get(&idx));
            }
            term = sum.finish(d, cap);
            idx[0] = a;
            add_connection_terms(
                &mut term,
                v,
                &idx,
                (&tangent[a], tractor.map(|c| c[a].as_slice())),
                cap,
                Some(0),
            );
            acc = Some(match acc {
                Some(x) => &x + &term,
                None => term,
            });
        }
        Ok(acc.expect("dimension is positive"))
    })?;
    Ok(out.with_weight(v.weight.clone()))
}
