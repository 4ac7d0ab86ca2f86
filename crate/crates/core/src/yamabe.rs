//! Formal solution of the singular Yamabe problem near a hypersurface.
//!
//! Given a defining function `s` we build `σ̃ = f s` with
//! `I²(σ̃) = 1 + σ̃^d B`, where `I² = |∇σ|² - (2σ/d)(Δσ + Jσ)` is the squared
//! length of the scale tractor of `σ` computed in the background scale.

use crate::error::{EngineError, Result};
use crate::geometry::CurvaturePack;
use crate::jet::{divmod, exact_div, restrict, transverse_order, Jet};
use crate::scalar::Scalar;

/// `|∇σ|² - (2σ/d)(Δσ + Jσ)`.
pub fn i_squared<S: Scalar>(pack: &CurvaturePack<S>, sigma: &Jet<S>) -> Result<Jet<S>> {
    let d = pack.dim();
    if sigma.order() < 2 {
        return Err(EngineError::InsufficientOrder {
            context: "i_squared",
            needed: 2,
            available: sigma.order(),
        });
    }
    let ds: Vec<Jet<S>> = (0..d)
        .map(|a| sigma.differentiate(a))
        .collect::<Result<_>>()?;
    let grad2 = pack.metric.inner_covectors(&ds, &ds);
    let lap = pack.laplacian(sigma)?;
    let inner = &lap + &(&pack.j * sigma);
    let corr = (sigma * &inner).scale(&S::from_frac(2, d as i64));
    Ok(&grad2 - &corr)
}

/// Which function multiplies the correction at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateBasis {
    /// `f ← f (1 + u s^k)`.
    #[default]
    DefiningFunction,
    /// `σ̃ ← σ̃ (1 + u σ̃^k)`.
    Sigma,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverOptions {
    pub basis: UpdateBasis,
}

#[derive(Debug, Clone)]
pub struct YamabeSolution<S: Scalar> {
    /// Positive factor with `σ̃ = f s`.
    pub f: Jet<S>,
    pub sigma_tilde: Jet<S>,
    /// `I²(σ̃)` in the background scale.
    pub i2: Jet<S>,
    /// Largest `k` with `I² - 1 = O(s^k)` visible at the valid order.
    pub residual_order: usize,
    /// `(I² - 1) / σ̃^d` as a full jet.
    pub b: Jet<S>,
    /// `B` restricted to the hypersurface, in the coordinates other than `pivot`.
    pub b_at_sigma: Jet<S>,
    /// Coordinate eliminated when restricting to the hypersurface.
    pub pivot: usize,
    pub dim: usize,
}

fn check_defining<S: Scalar>(s: &Jet<S>) -> Result<()> {
    if !s.constant_term().is_zero() {
        return Err(EngineError::DefiningFunction(
            "does not vanish at the base point".into(),
        ));
    }
    if s.order() < 1 || (0..s.dim()).all(|a| s.coeff(&unit(s.dim(), a)).is_zero()) {
        return Err(EngineError::DefiningFunction(
            "differential vanishes at the base point".into(),
        ));
    }
    Ok(())
}

fn unit(dim: usize, a: usize) -> Vec<u8> {
    let mut e = vec![0u8; dim];
    e[a] = 1;
    e
}

fn divide_k<S: Scalar>(f: &Jet<S>, by: &Jet<S>, k: usize) -> Result<Jet<S>> {
    let mut q = f.clone();
    for _ in 0..k {
        q = exact_div(&q, by, "yamabe residual")?;
    }
    Ok(q)
}

/// Solves `I²(σ̃) = 1 + O(s^d)` order by order.
pub fn solve_singular_yamabe<S: Scalar>(
    pack: &CurvaturePack<S>,
    s: &Jet<S>,
    opts: SolverOptions,
) -> Result<YamabeSolution<S>> {
    let d = pack.dim();
    check_defining(s)?;
    let n = s.order().min(pack.metric.order());
    if n < d + 1 {
        return Err(EngineError::InsufficientOrder {
            context: "singular Yamabe solve",
            needed: d + 1,
            available: n,
        });
    }
    let s = s.truncate(n);
    let one = Jet::one(d, n);

    // Degree-zero normalization: f = |ds|^{-1} along the hypersurface.
    let i2_s = divmod(&i_squared(pack, &s)?, &s)?.remainder;
    let f0 = i2_s.sqrt()?.reciprocal()?;
    let mut sigma = f0.mul_to(&s, n);

    for k in 1..d {
        let i2 = i_squared(pack, &sigma)?;
        let resid = &i2 - &one;
        // Quotients by σ̃^k are taken as (· / s^k) · f^{-k}; s is usually sparse.
        let scale_k = match opts.basis {
            UpdateBasis::Sigma => Some(exact_div(&sigma, &s, "recovering f")?.reciprocal()?.powi(k)),
            UpdateBasis::DefiningFunction => None,
        };
        let over_basis = |x: &Jet<S>| -> Result<Jet<S>> {
            let q = divide_k(x, &s, k)?;
            Ok(match &scale_k {
                Some(c) => &q * c,
                None => q,
            })
        };
        let e = over_basis(&resid).map_err(|err| match err {
            EngineError::NotDivisible { .. } => {
                EngineError::Precondition(format!("residual not O(s^{k}) at step {k}"))
            }
            other => other,
        })?;
        let bk = match opts.basis {
            UpdateBasis::Sigma => sigma.powi(k),
            UpdateBasis::DefiningFunction => s.powi(k),
        };
        // Linear response of the leading coefficient to σ̃ ← σ̃ + σ̃ b^k.
        let probe = &sigma + &sigma.mul_to(&bk, n);
        let i2p = i_squared(pack, &probe)?;
        let r = over_basis(&(&i2p - &i2))?;
        if r.constant_term().is_zero() {
            return Err(EngineError::SingularUpdate { step: k });
        }
        // Only u mod s affects the s^k coefficient: use the tangential part.
        let e_t = divmod(&e, &s)?.remainder;
        let r_t = divmod(&r, &s)?.remainder;
        let u = -&(&e_t * &r_t.reciprocal()?);
        sigma = (&sigma + &sigma.mul_to(&(&u * &bk), n)).truncate(n);
    }

    let i2 = i_squared(pack, &sigma)?;
    let resid = &i2 - &one;
    let residual_order = transverse_order(&resid, &s)?.at_least;
    let f = exact_div(&sigma, &s, "recovering f")?;
    let b = divide_k(&resid, &s, d)
        .map_err(|_| {
            EngineError::Precondition(format!(
                "residual only O(s^{residual_order}), need O(s^{d})"
            ))
        })?
        .mul_to(&f.reciprocal()?.powi(d), usize::MAX);
    let (b_at_sigma, pivot) = restrict(&b, &s)?;
    Ok(YamabeSolution {
        f,
        sigma_tilde: sigma,
        i2,
        residual_order,
        b,
        b_at_sigma,
        pivot,
        dim: d,
    })
}

/// The obstruction density `B|Σ`, re-derived from the stored solution.
pub fn obstruction_density<S: Scalar>(sol: &YamabeSolution<S>) -> Result<Jet<S>> {
    if sol.residual_order < sol.dim {
        return Err(EngineError::Precondition(format!(
            "residual order {} below {}",
            sol.residual_order, sol.dim
        )));
    }
    let one = Jet::one(sol.dim, sol.i2.order());
    let resid = &sol.i2 - &one;
    let mut q = resid;
    for _ in 0..sol.dim {
        q = exact_div(&q, &sol.sigma_tilde, "obstruction density")?;
    }
    let dm = divmod(&q, &sol.sigma_tilde)?;
    dm.remainder.s_coefficient(0, dm.pivot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature_pack, MetricJet};
    use crate::scalar::Rational;

    type J = Jet<Rational>;

    fn var(d: usize, n: usize, a: usize) -> J {
        J::coordinate(d, n, a, Rational::zero()).unwrap()
    }

    #[test]
    fn flat_coordinate_is_exact() {
        let m = MetricJet::<Rational>::flat(4, 6);
        let p = curvature_pack(&m).unwrap();
        let s = var(4, 6, 0);
        assert_eq!(i_squared(&p, &s).unwrap(), J::one(4, 5));
        let sol = solve_singular_yamabe(&p, &s, SolverOptions::default()).unwrap();
        assert_eq!(sol.f, J::one(4, 5));
        assert!(sol.b.is_zero());
        assert!(sol.residual_order >= 4);
    }

    #[test]
    fn round_structure_has_unit_length() {
        // σ = (r² - 1)/2 expanded at (1, 0, 0)
        let d = 3;
        let n = 5;
        let m = MetricJet::<Rational>::flat(d, n);
        let p = curvature_pack(&m).unwrap();
        let mut r2 = J::zero(d, n);
        for a in 0..d {
            let base = if a == 0 { Rational::one() } else { Rational::zero() };
            let x = J::coordinate(d, n, a, base).unwrap();
            r2 = &r2 + &(&x * &x);
        }
        let sigma = (&r2 - &J::one(d, n)).scale(&Rational::new(1, 2));
        assert_eq!(i_squared(&p, &sigma).unwrap(), J::one(d, n - 1));
    }

    #[test]
    fn rejects_bad_defining_functions() {
        let m = MetricJet::<Rational>::flat(3, 5);
        let p = curvature_pack(&m).unwrap();
        let x = var(3, 5, 0);
        let opts = SolverOptions::default();
        assert!(solve_singular_yamabe(&p, &(&x + &J::one(3, 5)), opts).is_err());
        assert!(solve_singular_yamabe(&p, &(&x * &x), opts).is_err());
        assert!(matches!(
            solve_singular_yamabe(&p, &x.truncate(3), opts),
            Err(EngineError::InsufficientOrder { .. })
        ));
    }

    /// `ds² + 2 s f(y) ds dy + dy² + dx²` with `f = y³` expanded at `y = y0`.
    fn cubic_example(d: usize, n: usize, y0: i64) -> MetricJet<Rational> {
        let s = var(d, n, 0);
        let y = J::coordinate(d, n, 1, Rational::integer(y0)).unwrap();
        let off = &s * &y.powi(3);
        let g = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| match (a, b) {
                        (0, 1) | (1, 0) => off.clone(),
                        _ if a == b => J::one(d, n),
                        _ => J::zero(d, n),
                    })
                    .collect()
            })
            .collect();
        MetricJet::new(g).unwrap()
    }

    #[test]
    fn cubic_example_obstruction() {
        for (y0, want) in [(0, Rational::new(1, 3)), (1, Rational::new(5, 6))] {
            let m = cubic_example(4, 6, y0);
            let p = curvature_pack(&m).unwrap();
            let s = var(4, 6, 0);
            let sol = solve_singular_yamabe(&p, &s, SolverOptions::default()).unwrap();
            assert_eq!(sol.b_at_sigma.constant_term(), &want, "y0 = {y0}");
            assert_eq!(obstruction_density(&sol).unwrap(), sol.b_at_sigma);
        }
    }
}
