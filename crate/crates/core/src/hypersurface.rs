//! Extrinsic data of the zero locus of a defining function `s`.
//!
//! Every quantity is an extension off the hypersurface built from the same
//! formula; comparisons "on Σ" reduce jets modulo `s` (see [`reduce_on_sigma`]).

use crate::error::{EngineError, Result};
use crate::geometry::{covariant_derivative, directional_derivative_with, Connection, CurvaturePack};
use crate::jet::{divmod, transverse_order, Jet, TransverseOrder};
use crate::scalar::{Rational, Scalar};
use crate::tensor::{Slot, Symmetry, TensorJet};

#[derive(Clone, Debug)]
pub struct HypersurfaceFrame<S: Scalar> {
    /// Defining function after the constant rescaling to `|ds|(p) = 1`.
    pub s: Jet<S>,
    /// Constant the raw input was multiplied by.
    pub scale: S,
    /// `n_a = ∂_a s`.
    pub n: TensorJet<S>,
    /// `n^a = g^{ab} n_b`.
    pub n_up: TensorJet<S>,
    pub n_norm2: Jet<S>,
    pub n_hat: TensorJet<S>,
    pub n_hat_up: TensorJet<S>,
    /// `γ̄_a^b = δ_a^b - n̂_a n̂^b`, slots `[Down, Up]`.
    pub projector: TensorJet<S>,
    /// `ρ = -(Δs + J s)/d`.
    pub rho: Jet<S>,
}

/// Conormal, unit conormal, projector and `ρ` for the defining function `s`.
pub fn conormal_data<S: Scalar>(
    pack: &CurvaturePack<S>,
    s: &Jet<S>,
) -> Result<HypersurfaceFrame<S>> {
    let d = pack.dim();
    let m = &pack.metric;
    if s.dim() != d {
        return Err(EngineError::DimensionMismatch {
            left: s.dim(),
            right: d,
        });
    }
    if !s.constant_term().is_zero() {
        return Err(EngineError::DefiningFunction(
            "does not vanish at the base point".into(),
        ));
    }
    if s.order() < 2 {
        return Err(EngineError::InsufficientOrder {
            context: "conormal data",
            needed: 2,
            available: s.order(),
        });
    }
    let raw_n: Vec<Jet<S>> = (0..d).map(|a| s.differentiate(a)).collect::<Result<_>>()?;
    let norm0 = m.inner_covectors(&raw_n, &raw_n).constant_term().clone();
    if norm0.is_zero() {
        return Err(EngineError::DefiningFunction(
            "differential vanishes at the base point".into(),
        ));
    }
    let scale = norm0
        .sqrt()
        .and_then(|r| r.inv())
        .ok_or(EngineError::NoSquareRoot("normalizing |ds| at the base point"))?;
    let s = s.scale(&scale);
    let n = TensorJet::from_fn(d, vec![Slot::Down], |i| raw_n[i[0]].scale(&scale))
        .with_weight(Rational::integer(1));
    let n_up = m.raise(&n, 0)?;
    let n_norm2 = m.inner_covectors(n.components(), n.components());
    let inv_len = n_norm2.sqrt()?.reciprocal()?;
    let n_hat = n.mul_jet(&inv_len);
    let n_hat_up = n_up.mul_jet(&inv_len);
    let projector = TensorJet::from_fn(d, vec![Slot::Down, Slot::Up], |i| {
        let nn = n_hat.get(&[i[0]]) * n_hat_up.get(&[i[1]]);
        if i[0] == i[1] {
            &Jet::one(d, nn.order()) - &nn
        } else {
            -&nn
        }
    });
    let lap = pack.laplacian(&s)?;
    let rho = (&lap + &(&pack.j * &s)).scale(&S::from_frac(-1, d as i64));
    Ok(HypersurfaceFrame {
        s,
        scale,
        n,
        n_up,
        n_norm2,
        n_hat,
        n_hat_up,
        projector,
        rho,
    })
}

/// `∇_a ∇_b f` for a scalar jet.
pub fn hessian<S: Scalar>(pack: &CurvaturePack<S>, f: &Jet<S>) -> Result<TensorJet<S>> {
    let df = covariant_derivative(pack, &TensorJet::scalar(f.clone()))?;
    Ok(covariant_derivative(pack, &df)?.with_symmetry(Symmetry::Symmetric))
}

/// `γ̄_ab = g_ab - n̂_a n̂_b`.
pub fn induced_metric<S: Scalar>(frame: &HypersurfaceFrame<S>, pack: &CurvaturePack<S>) -> TensorJet<S> {
    let g = pack.metric.g();
    TensorJet::from_fn(g.dim(), vec![Slot::Down, Slot::Down], |i| {
        g.get(i) - &(frame.n_hat.get(&[i[0]]) * frame.n_hat.get(&[i[1]]))
    })
    .with_weight(Rational::integer(2))
    .with_symmetry(Symmetry::Symmetric)
}

/// Projects every lower tangent slot with `γ̄`.
pub fn project_tangential<S: Scalar>(
    frame: &HypersurfaceFrame<S>,
    t: &TensorJet<S>,
) -> Result<TensorJet<S>> {
    let d = t.dim();
    let mut out = t.clone();
    for (k, slot) in t.slots().iter().enumerate() {
        if *slot != Slot::Down {
            continue;
        }
        let cur = out.clone();
        out = TensorJet::from_fn(d, t.slots().to_vec(), |i| {
            let mut j = i.to_vec();
            let mut acc = Jet::zero(d, cur.order().min(frame.projector.order()));
            for e in 0..d {
                let p = frame.projector.get(&[i[k], e]);
                if p.is_zero() {
                    continue;
                }
                j[k] = e;
                acc = &acc + &(p * cur.get(&j));
            }
            acc
        })
        .with_weight(t.weight.clone())
        .with_symmetry(t.symmetry);
    }
    Ok(out)
}

/// `H = γ̄^{ab} ∇_a n̂_b / (d - 1)`.
pub fn mean_curvature<S: Scalar>(
    frame: &HypersurfaceFrame<S>,
    pack: &CurvaturePack<S>,
) -> Result<Jet<S>> {
    let d = pack.dim();
    let dn = covariant_derivative(pack, &frame.n_hat)?;
    let mut acc = Jet::zero(d, dn.order());
    for a in 0..d {
        for b in 0..d {
            let gb = &pack.metric.ginv(a, b).truncate(dn.order())
                - &(frame.n_hat_up.get(&[a]) * frame.n_hat_up.get(&[b]));
            if !gb.is_zero() {
                acc = &acc + &(&gb * dn.get(&[a, b]));
            }
        }
    }
    Ok(acc
        .scale(&S::from_i64(d as i64 - 1).inv().unwrap()))
}

/// `II_ab = γ̄_a^c γ̄_b^e ∇_c n̂_e`.
pub fn second_fundamental_form<S: Scalar>(
    frame: &HypersurfaceFrame<S>,
    pack: &CurvaturePack<S>,
) -> Result<TensorJet<S>> {
    let dn = covariant_derivative(pack, &frame.n_hat)?;
    Ok(project_tangential(frame, &dn)?
        .with_weight(Rational::integer(1))
        .with_symmetry(Symmetry::Symmetric))
}

/// `IIo = II - H γ̄`; meaningful on the hypersurface.
pub fn tracefree_ii<S: Scalar>(
    frame: &HypersurfaceFrame<S>,
    pack: &CurvaturePack<S>,
) -> Result<TensorJet<S>> {
    let ii = second_fundamental_form(frame, pack)?;
    let h = mean_curvature(frame, pack)?;
    let gbar = induced_metric(frame, pack);
    Ok(ii
        .sub(&gbar.mul_jet(&h))?
        .with_weight(Rational::integer(1))
        .with_symmetry(Symmetry::Symmetric))
}

/// Trace-free part of `∇∇s + s P`.
pub fn iio_extension<S: Scalar>(
    frame: &HypersurfaceFrame<S>,
    pack: &CurvaturePack<S>,
) -> Result<TensorJet<S>> {
    let hs = hessian(pack, &frame.s)?;
    let sp = pack.schouten.mul_jet(&frame.s);
    let raw = hs.add(&sp)?;
    Ok(pack
        .metric
        .trace_free(&raw)?
        .with_weight(Rational::integer(1))
        .with_symmetry(Symmetry::Symmetric))
}

/// `n^a ∇_a T` using the given connections.
pub fn normal_derivative_with<S: Scalar>(
    frame: &HypersurfaceFrame<S>,
    t: &TensorJet<S>,
    tangent: &Connection<S>,
    tractor: Option<&Connection<S>>,
) -> Result<TensorJet<S>> {
    let v: Vec<Jet<S>> = frame.n_up.components().to_vec();
    directional_derivative_with(t, &v, tangent, tractor)
}

/// `(∇_n)^k T` with the unnormalized `n = ∇s`; tangent slots only.
pub fn normal_derivative_power<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
    t: &TensorJet<S>,
    k: usize,
) -> Result<TensorJet<S>> {
    if t.order() < k {
        return Err(EngineError::InsufficientOrder {
            context: "normal derivative power",
            needed: k,
            available: t.order(),
        });
    }
    let conn = pack.tangent_connection();
    let mut cur = t.clone();
    for _ in 0..k {
        cur = normal_derivative_with(frame, &cur, &conn, None)?;
    }
    Ok(cur)
}

/// `∇^⊤_a T = ∇_a T - n_a ∇_n T`, derivative slot first.
pub fn tangential_derivative<S: Scalar>(
    pack: &CurvaturePack<S>,
    frame: &HypersurfaceFrame<S>,
    t: &TensorJet<S>,
) -> Result<TensorJet<S>> {
    let dt = covariant_derivative(pack, t)?;
    let dn = normal_derivative_power(pack, frame, t, 1)?;
    let corr = frame.n.outer(&dn)?;
    Ok(dt.sub(&corr)?.with_weight(t.weight.clone()))
}

/// `∇^b T_{...b}`: divergence on the last lower slot.
pub fn divergence<S: Scalar>(pack: &CurvaturePack<S>, t: &TensorJet<S>) -> Result<TensorJet<S>> {
    let r = t.rank();
    if r == 0 || t.slots()[r - 1] != Slot::Down {
        return Err(EngineError::Shape("divergence needs a trailing lower slot".into()));
    }
    let dt = covariant_derivative(pack, t)?;
    pack.metric.trace(&dt, 0, r)
}

/// `n^a T_{a...}`: contraction of the first lower slot with `n^a`.
pub fn contract_normal<S: Scalar>(frame: &HypersurfaceFrame<S>, t: &TensorJet<S>) -> Result<TensorJet<S>> {
    frame.n_up.outer(t)?.contract(0, 1)
}

/// Every component reduced modulo `s`; equal reductions mean equal on Σ.
pub fn reduce_on_sigma<S: Scalar>(t: &TensorJet<S>, s: &Jet<S>) -> Result<TensorJet<S>> {
    t.try_map_jets(|j| Ok(divmod(j, s)?.remainder))
}

/// Smallest transverse order over the components of `t`.
pub fn tensor_transverse_order<S: Scalar>(t: &TensorJet<S>, s: &Jet<S>) -> Result<TransverseOrder> {
    let mut best: Option<TransverseOrder> = None;
    for c in t.components() {
        let o = transverse_order(c, s)?;
        best = Some(match best {
            None => o,
            Some(b) if o.at_least < b.at_least => o,
            Some(b) if o.at_least == b.at_least => TransverseOrder {
                at_least: b.at_least,
                sharp: b.sharp || o.sharp,
            },
            Some(b) => b,
        });
    }
    best.ok_or_else(|| EngineError::Shape("empty tensor".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature_pack, MetricJet};

    type J = Jet<Rational>;

    fn at(d: usize, n: usize, a: usize, base: i64) -> J {
        J::coordinate(d, n, a, Rational::integer(base)).unwrap()
    }

    fn on_sigma(t: &TensorJet<Rational>, s: &J) -> TensorJet<Rational> {
        reduce_on_sigma(t, s).unwrap()
    }

    #[test]
    fn flat_hyperplane() {
        let m = MetricJet::<Rational>::flat(3, 4);
        let p = curvature_pack(&m).unwrap();
        let x = at(3, 4, 0, 0).scale_i64(2);
        let f = conormal_data(&p, &x).unwrap();
        assert_eq!(f.scale, Rational::new(1, 2));
        assert_eq!(f.n_hat.get(&[0]), &J::one(3, 3));
        assert_eq!(f.projector.get(&[0, 0]).constant_term(), &Rational::zero());
        assert_eq!(f.projector.get(&[1, 1]).constant_term(), &Rational::one());
        assert!(mean_curvature(&f, &p).unwrap().is_zero());
        assert!(tracefree_ii(&f, &p).unwrap().is_zero());
        assert!(iio_extension(&f, &p).unwrap().is_zero());
    }

    fn radius(d: usize, n: usize, axes: usize) -> J {
        let mut r2 = J::zero(d, n);
        for a in 0..axes {
            let x = at(d, n, a, if a == 0 { 1 } else { 0 });
            r2 = &r2 + &(&x * &x);
        }
        r2.sqrt().unwrap()
    }

    #[test]
    fn unit_sphere_is_umbilic_with_unit_mean_curvature() {
        let m = MetricJet::<Rational>::flat(3, 5);
        let p = curvature_pack(&m).unwrap();
        let s = &radius(3, 5, 3) - &J::one(3, 5);
        let f = conormal_data(&p, &s).unwrap();
        let h = mean_curvature(&f, &p).unwrap();
        assert_eq!(h.constant_term(), &Rational::one());
        assert!(on_sigma(&tracefree_ii(&f, &p).unwrap(), &f.s).is_zero());
    }

    #[test]
    fn cylinder_tracefree_form() {
        let m = MetricJet::<Rational>::flat(3, 5);
        let p = curvature_pack(&m).unwrap();
        let s = &radius(3, 5, 2) - &J::one(3, 5);
        let f = conormal_data(&p, &s).unwrap();
        let iio = tracefree_ii(&f, &p).unwrap();
        let half = Rational::new(1, 2);
        assert_eq!(iio.get(&[0, 0]).constant_term(), &Rational::zero());
        assert_eq!(iio.get(&[1, 1]).constant_term(), &half);
        assert_eq!(iio.get(&[2, 2]).constant_term(), &-&half);
        let tr = p.metric.trace(&iio, 0, 1).unwrap();
        assert!(tr.as_scalar().unwrap().is_zero());
        assert!(iio.verify_symmetry());
    }

    #[test]
    fn unit_normal_and_projector_identities() {
        use crate::samples::random_metric;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = random_metric(&mut rng, 3, 5, 2);
        let p = curvature_pack(&m).unwrap();
        let s = &at(3, 5, 0, 0) + &(&at(3, 5, 1, 0) * &at(3, 5, 2, 0));
        let f = conormal_data(&p, &s).unwrap();
        let nn = p.metric.inner_covectors(f.n_hat.components(), f.n_hat.components());
        assert_eq!(nn, J::one(3, nn.order()));
        // γ̄ n̂^a = 0 and γ̄ is idempotent
        for a in 0..3 {
            let mut acc = J::zero(3, 4);
            for b in 0..3 {
                acc = &acc + &(f.n_hat_up.get(&[b]) * f.projector.get(&[b, a]));
            }
            assert!(acc.is_zero());
        }
        let sq = f.projector.outer(&f.projector).unwrap().contract(1, 2).unwrap();
        let o = sq.order();
        assert_eq!(sq, f.projector.truncate(o));
    }

    #[test]
    fn extension_restricts_to_tracefree_form_for_solved_scale() {
        use crate::yamabe::{solve_singular_yamabe, SolverOptions};
        let d = 3;
        let n = 6;
        let m = MetricJet::<Rational>::flat(d, n);
        let p = curvature_pack(&m).unwrap();
        let s = &radius(d, n, 2) - &J::one(d, n);
        let sol = solve_singular_yamabe(&p, &s, SolverOptions::default()).unwrap();
        let f = conormal_data(&p, &sol.sigma_tilde).unwrap();
        let a = on_sigma(&iio_extension(&f, &p).unwrap(), &f.s);
        let b = on_sigma(&tracefree_ii(&f, &p).unwrap(), &f.s);
        let o = a.order().min(b.order());
        assert!(!b.truncate(o).is_zero());
        assert_eq!(a.truncate(o), b.truncate(o));
    }

    #[test]
    fn normal_derivative_basics() {
        let m = MetricJet::<Rational>::flat(3, 4);
        let p = curvature_pack(&m).unwrap();
        let s = at(3, 4, 0, 0);
        let f = conormal_data(&p, &s).unwrap();
        let t = TensorJet::scalar(s.clone());
        assert_eq!(normal_derivative_power(&p, &f, &t, 0).unwrap(), t);
        let dn = normal_derivative_power(&p, &f, &t, 1).unwrap();
        assert_eq!(dn.as_scalar().unwrap(), &J::one(3, 3));
        assert!(normal_derivative_power(&p, &f, &t, 9).is_err());
    }

    #[test]
    fn rejects_degenerate_defining_functions() {
        let m = MetricJet::<Rational>::flat(3, 4);
        let p = curvature_pack(&m).unwrap();
        let x = at(3, 4, 0, 0);
        assert!(conormal_data(&p, &(&x * &x)).is_err());
        assert!(conormal_data(&p, &(&x + &J::one(3, 4))).is_err());
        // |ds|² = 2 has no rational square root
        let y = at(3, 4, 1, 0);
        assert!(matches!(
            conormal_data(&p, &(&x + &y)),
            Err(EngineError::NoSquareRoot(_))
        ));
    }
}
