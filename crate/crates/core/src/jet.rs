//! Truncated multivariate power series at a base point.
//!
//! A [`Jet`] stores every coefficient of total degree `<= order` densely, in
//! graded order (by total degree, then lexicographically descending within a
//! degree). The enumeration of monomials of degree `<= k` does not depend on
//! the storage cap, so coefficient vectors of different orders share a prefix
//! and truncation is a `Vec::truncate`.
//!
//! `order` is the degree up to which the stored coefficients are correct.
//! Products track it through valuations: if `a` vanishes to degree `va` then
//! `a*b` is known to degree `min(oa + vb, ob + va)`, capped at the larger
//! operand order so that repeated multiplication by the defining function does
//! not grow storage without bound.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{EngineError, Result};
use crate::scalar::Scalar;

/// Exponent vector of a monomial.
pub type MultiIndex = Vec<u8>;

/// Monomial tables for a fixed coordinate count up to a degree cap.
pub struct Layout {
    dim: usize,
    cap: usize,
    exps: Vec<u8>,
    degs: Vec<u8>,
    /// `block_start[k]` = number of monomials of degree `< k`; length `cap + 2`.
    block_start: Vec<usize>,
    index: HashMap<MultiIndex, u32>,
    /// `mul[i][j]` = index of `m_i * m_j` for `deg j <= cap - deg i`.
    mul: Vec<Vec<u32>>,
    /// `shift[axis][i]` = index of `m_i / x_axis` when `x_axis` divides `m_i`.
    shift_down: Vec<Vec<Option<u32>>>,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<u8>, out: &mut Vec<MultiIndex>) {
    if parts == 0 {
        if total == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    if parts == 1 {
        prefix.push(total as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first as u8);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl Layout {
    fn build(dim: usize, cap: usize) -> Layout {
        let mut monos = Vec::new();
        let mut block_start = vec![0];
        for k in 0..=cap {
            compositions(k, dim, &mut Vec::new(), &mut monos);
            block_start.push(monos.len());
        }
        let degs: Vec<u8> = monos
            .iter()
            .map(|m| m.iter().map(|&e| e as usize).sum::<usize>() as u8)
            .collect();
        let index: HashMap<MultiIndex, u32> = monos
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i as u32))
            .collect();
        let count = |k: usize| block_start[k + 1];
        let mul = monos
            .iter()
            .enumerate()
            .map(|(i, mi)| {
                let lim = count(cap - degs[i] as usize);
                (0..lim)
                    .map(|j| {
                        let sum: MultiIndex =
                            mi.iter().zip(&monos[j]).map(|(a, b)| a + b).collect();
                        index[&sum]
                    })
                    .collect()
            })
            .collect();
        let shift_down = (0..dim)
            .map(|axis| {
                monos
                    .iter()
                    .map(|m| {
                        (m[axis] > 0).then(|| {
                            let mut t = m.clone();
                            t[axis] -= 1;
                            index[&t]
                        })
                    })
                    .collect()
            })
            .collect();
        let exps = monos.iter().flatten().copied().collect();
        Layout {
            dim,
            cap,
            exps,
            degs,
            block_start,
            index,
            mul,
            shift_down,
        }
    }

    /// Shared layout for `dim` coordinates able to hold degree `order`.
    pub fn get(dim: usize, order: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Layout>>>> = OnceLock::new();
        let mut cache = CACHE
            .get_or_init(|| Mutex::new(HashMap::new()))
            .lock()
            .expect("layout cache poisoned");
        if let Some(l) = cache.get(&dim) {
            if l.cap >= order {
                return l.clone();
            }
        }
        let l = Arc::new(Layout::build(dim, order.max(4)));
        cache.insert(dim, l.clone());
        l
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of monomials of degree `<= k`.
    pub fn count(&self, k: usize) -> usize {
        self.block_start[k + 1]
    }

    pub fn block(&self, k: usize) -> std::ops::Range<usize> {
        self.block_start[k]..self.block_start[k + 1]
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exps[i * self.dim..(i + 1) * self.dim]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degs[i] as usize
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).map(|&i| i as usize)
    }

    fn product_index(&self, i: usize, j: usize) -> usize {
        self.mul[i][j] as usize
    }
}

/// Truncated power series in `dim` variables, expanded at the base point.
#[derive(Clone)]
pub struct Jet<S> {
    layout: Arc<Layout>,
    order: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> PartialEq for Jet<S> {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.order == other.order && self.coeffs == other.coeffs
    }
}

impl<S: Scalar> fmt::Debug for Jet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(dim={}, order={}) {{", self.dim(), self.order)?;
        let mut first = true;
        for (e, c) in self.terms() {
            if !first {
                write!(f, ",")?;
            }
            first = false;
            write!(f, " {e:?}: {c}")?;
        }
        write!(f, " }}")
    }
}

impl<S: Scalar> Jet<S> {
    pub fn zero(dim: usize, order: usize) -> Self {
        let layout = Layout::get(dim, order);
        let n = layout.count(order);
        Jet {
            layout,
            order,
            coeffs: vec![S::zero(); n],
        }
    }

    pub fn constant(dim: usize, order: usize, c: S) -> Self {
        let mut j = Self::zero(dim, order);
        j.coeffs[0] = c;
        j
    }

    pub fn one(dim: usize, order: usize) -> Self {
        Self::constant(dim, order, S::one())
    }

    /// The coordinate function `base + t_axis`, `t` the displacement from the base point.
    pub fn coordinate(dim: usize, order: usize, axis: usize, base: S) -> Result<Self> {
        if axis >= dim {
            return Err(EngineError::AxisOutOfRange { axis, dim });
        }
        let mut j = Self::constant(dim, order, base);
        if order >= 1 {
            let mut e = vec![0u8; dim];
            e[axis] = 1;
            let i = j.layout.index_of(&e).unwrap();
            j.coeffs[i] = S::one();
        }
        Ok(j)
    }

    /// Builds a jet from `(exponents, coefficient)` pairs; terms above `order` are dropped.
    pub fn from_terms<'a, I>(dim: usize, order: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [u8], S)>,
    {
        let mut j = Self::zero(dim, order);
        for (e, c) in terms {
            if e.len() != dim {
                return Err(EngineError::DimensionMismatch {
                    left: e.len(),
                    right: dim,
                });
            }
            let deg: usize = e.iter().map(|&x| x as usize).sum();
            if deg > order {
                continue;
            }
            let i = j.layout.index_of(e).unwrap();
            j.coeffs[i].add_assign(&c);
        }
        Ok(j)
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn constant_term(&self) -> &S {
        &self.coeffs[0]
    }

    /// Coefficient of `t^exps`, zero above the valid order.
    pub fn coeff(&self, exps: &[u8]) -> S {
        let deg: usize = exps.iter().map(|&x| x as usize).sum();
        if exps.len() != self.dim() || deg > self.order {
            return S::zero();
        }
        self.coeffs[self.layout.index_of(exps).unwrap()].clone()
    }

    /// Nonzero terms in graded order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u8], &S)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.layout.exponents(i), c))
    }

    /// True if every coefficient up to the valid order vanishes.
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_zero)
    }

    /// Lowest degree carrying a nonzero coefficient, `order + 1` if none.
    pub fn valuation(&self) -> usize {
        match self.coeffs.iter().position(|c| !c.is_zero()) {
            Some(i) => self.layout.degree(i),
            None => self.order + 1,
        }
    }

    pub fn truncate(&self, order: usize) -> Self {
        if order >= self.order {
            return self.clone();
        }
        let mut j = self.clone();
        j.order = order;
        j.coeffs.truncate(self.layout.count(order));
        j
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Jet<T> {
        Jet {
            layout: self.layout.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(EngineError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    fn wider_layout(&self, other: &Self) -> Arc<Layout> {
        if self.layout.cap >= other.layout.cap {
            self.layout.clone()
        } else {
            other.layout.clone()
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let order = self.order.min(other.order);
        let n = self.layout.count(order);
        let coeffs = self.coeffs[..n]
            .iter()
            .zip(&other.coeffs[..n])
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Jet {
            layout: self.wider_layout(other),
            order,
            coeffs,
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let order = self.order.min(other.order);
        let n = self.layout.count(order);
        let coeffs = self.coeffs[..n]
            .iter()
            .zip(&other.coeffs[..n])
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Jet {
            layout: self.wider_layout(other),
            order,
            coeffs,
        })
    }

    pub fn scale(&self, c: &S) -> Self {
        self.map(|x| x.mul(c))
    }

    pub fn scale_i64(&self, k: i64) -> Self {
        self.scale(&S::from_i64(k))
    }

    /// Valid order of a product, before any explicit cap.
    pub fn product_order(&self, other: &Self) -> usize {
        let (oa, ob) = (self.order, other.order);
        (oa + other.valuation())
            .min(ob + self.valuation())
            .min(oa.max(ob))
    }

    /// Truncated Cauchy product.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self.mul_to(other, usize::MAX))
    }

    /// Product computed only up to `cap` (or the valid order, if lower).
    pub fn mul_to(&self, other: &Self, cap: usize) -> Self {
        assert_eq!(self.dim(), other.dim(), "jet dimension mismatch");
        let order = self.product_order(other).min(cap);
        let layout = self.wider_layout(other);
        let (va, vb) = (self.valuation(), other.valuation());
        if va <= order && vb <= order {
            if let Some(coeffs) = self
                .mul_scaled(other, &layout, order, va, vb)
                .or_else(|| self.mul_big_scaled(other, &layout, order, va, vb))
            {
                return Jet {
                    layout,
                    order,
                    coeffs,
                };
            }
        }
        let mut out = vec![S::zero(); layout.count(order)];
        if va <= order && vb <= order {
            let nb: Vec<usize> = (0..layout.count(order - va).min(other.coeffs.len()))
                .filter(|&j| !other.coeffs[j].is_zero())
                .collect();
            let na = layout.count(order - vb).min(self.coeffs.len());
            for i in 0..na {
                let ai = &self.coeffs[i];
                if ai.is_zero() {
                    continue;
                }
                let lim = layout.count(order - layout.degree(i));
                let row = &layout.mul[i];
                for &j in &nb {
                    if j >= lim {
                        break;
                    }
                    out[row[j] as usize].mul_add_assign(ai, &other.coeffs[j]);
                }
            }
        }
        Jet {
            layout,
            order,
            coeffs: out,
        }
    }

    /// Integer convolution over common denominators; `None` on overflow or for inexact types.
    fn mul_scaled(
        &self,
        other: &Self,
        layout: &Layout,
        order: usize,
        va: usize,
        vb: usize,
    ) -> Option<Vec<S>> {
        let na = layout.count(order - vb).min(self.coeffs.len());
        let nb = layout.count(order - va).min(other.coeffs.len());
        let (da, a) = S::common_denominator(&self.coeffs[..na])?;
        let (db, b) = S::common_denominator(&other.coeffs[..nb])?;
        let den = da.checked_mul(db)?;
        let b_nz: Vec<usize> = (0..nb).filter(|&j| b[j] != 0).collect();
        let mut out = vec![0i128; layout.count(order)];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0 {
                continue;
            }
            let lim = layout.count(order - layout.degree(i));
            let row = &layout.mul[i];
            for &j in &b_nz {
                if j >= lim {
                    break;
                }
                let t = row[j] as usize;
                out[t] = out[t].checked_add(ai.checked_mul(b[j])?)?;
            }
        }
        Some(out.into_iter().map(|x| S::from_scaled(x, den)).collect())
    }

    /// Big-integer convolution over common denominators: one reduction per
    /// output coefficient instead of one per term.
    fn mul_big_scaled(
        &self,
        other: &Self,
        layout: &Layout,
        order: usize,
        va: usize,
        vb: usize,
    ) -> Option<Vec<S>> {
        let na = layout.count(order - vb).min(self.coeffs.len());
        let nb = layout.count(order - va).min(other.coeffs.len());
        let (da, a) = S::big_common_denominator(&self.coeffs[..na])?;
        let (db, b) = S::big_common_denominator(&other.coeffs[..nb])?;
        let den = da * db;
        let b_nz: Vec<usize> = (0..nb).filter(|&j| !b[j].is_zero()).collect();
        let mut out = vec![BigInt::zero(); layout.count(order)];
        for (i, ai) in a.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            let lim = layout.count(order - layout.degree(i));
            let row = &layout.mul[i];
            for &j in &b_nz {
                if j >= lim {
                    break;
                }
                out[row[j] as usize] += ai * &b[j];
            }
        }
        Some(out.into_iter().map(|x| S::from_big_scaled(x, &den)).collect())
    }

    pub fn powi(&self, k: usize) -> Self {
        let mut acc = Jet::one(self.dim(), self.order);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Formal partial derivative; the valid order drops by one.
    pub fn differentiate(&self, axis: usize) -> Result<Self> {
        if axis >= self.dim() {
            return Err(EngineError::AxisOutOfRange {
                axis,
                dim: self.dim(),
            });
        }
        if self.order == 0 {
            return Err(EngineError::InsufficientOrder {
                context: "differentiate",
                needed: 1,
                available: 0,
            });
        }
        let order = self.order - 1;
        let mut out = vec![S::zero(); self.layout.count(order)];
        for (i, c) in self.coeffs.iter().enumerate().skip(1) {
            if c.is_zero() {
                continue;
            }
            if let Some(t) = self.layout.shift_down[axis][i] {
                let e = self.layout.exponents(i)[axis] as i64;
                out[t as usize] = c.scale_i64(e);
            }
        }
        Ok(Jet {
            layout: self.layout.clone(),
            order,
            coeffs: out,
        })
    }

    /// Multiplicative inverse up to the valid order.
    pub fn reciprocal(&self) -> Result<Self> {
        let r0 = self.coeffs[0]
            .inv()
            .ok_or(EngineError::ZeroConstantTerm("reciprocal"))?;
        let lay = self.layout.clone();
        let mut r = vec![S::zero(); self.coeffs.len()];
        r[0] = r0.clone();
        let neg_r0 = r0.neg();
        let a_nz: Vec<usize> = (1..self.coeffs.len())
            .filter(|&i| !self.coeffs[i].is_zero())
            .collect();
        for m in 1..=self.order {
            for &i in &a_nz {
                let di = lay.degree(i);
                if di > m {
                    break;
                }
                for j in lay.block(m - di) {
                    if r[j].is_zero() {
                        continue;
                    }
                    let t = lay.product_index(i, j);
                    let (ai, rj) = (self.coeffs[i].clone(), r[j].clone());
                    r[t].mul_add_assign(&ai, &rj);
                }
            }
            for t in lay.block(m) {
                if !r[t].is_zero() {
                    r[t] = r[t].mul(&neg_r0);
                }
            }
        }
        Ok(Jet {
            layout: lay,
            order: self.order,
            coeffs: r,
        })
    }

    /// Square root with the positive root at the base point.
    pub fn sqrt(&self) -> Result<Self> {
        if !self.coeffs[0].is_positive() {
            return Err(EngineError::NoSquareRoot("sqrt"));
        }
        let r0 = self.coeffs[0]
            .sqrt()
            .ok_or(EngineError::NoSquareRoot("sqrt"))?;
        let inv_2r0 = r0.scale_i64(2).inv().ok_or(EngineError::NoSquareRoot("sqrt"))?;
        let lay = self.layout.clone();
        let mut r = vec![S::zero(); self.coeffs.len()];
        r[0] = r0;
        for m in 1..=self.order {
            let mut acc: Vec<S> = lay.block(m).map(|t| self.coeffs[t].clone()).collect();
            let base = lay.block_start[m];
            for i in lay.block_start[1]..lay.block_start[m] {
                if r[i].is_zero() {
                    continue;
                }
                let di = lay.degree(i);
                for j in lay.block(m - di) {
                    if r[j].is_zero() {
                        continue;
                    }
                    let t = lay.product_index(i, j) - base;
                    let p = r[i].mul(&r[j]);
                    acc[t] = acc[t].sub(&p);
                }
            }
            for (k, t) in lay.block(m).enumerate() {
                r[t] = acc[k].mul(&inv_2r0);
            }
        }
        Ok(Jet {
            layout: lay,
            order: self.order,
            coeffs: r,
        })
    }

    /// Jet in the remaining `dim - 1` variables multiplying `t_axis^k`.
    pub fn s_coefficient(&self, k: usize, axis: usize) -> Result<Self> {
        if axis >= self.dim() {
            return Err(EngineError::AxisOutOfRange {
                axis,
                dim: self.dim(),
            });
        }
        if k > self.order {
            return Err(EngineError::InsufficientOrder {
                context: "s_coefficient",
                needed: k,
                available: self.order,
            });
        }
        let order = self.order - k;
        let mut out = Jet::zero(self.dim() - 1, order);
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = self.layout.exponents(i);
            if e[axis] as usize != k || c.is_zero() {
                continue;
            }
            let rest = drop_axis(e, axis);
            let t = out.layout.index_of(&rest).unwrap();
            out.coeffs[t] = c.clone();
        }
        Ok(out)
    }

    /// Re-embeds a jet in `dim - 1` variables as one independent of `axis`.
    pub fn insert_axis(&self, axis: usize) -> Self {
        let mut out = Jet::zero(self.dim() + 1, self.order);
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut e = self.layout.exponents(i).to_vec();
            e.insert(axis, 0);
            let t = out.layout.index_of(&e).unwrap();
            out.coeffs[t] = c.clone();
        }
        out
    }

    /// Evaluates the stored polynomial at a displacement from the base point.
    pub fn eval(&self, t: &[S]) -> S {
        let mut acc = S::zero();
        for (e, c) in self.terms() {
            let mut term = c.clone();
            for (x, &k) in t.iter().zip(e) {
                for _ in 0..k {
                    term = term.mul(x);
                }
            }
            acc.add_assign(&term);
        }
        acc
    }
}

fn drop_axis(e: &[u8], axis: usize) -> MultiIndex {
    e.iter()
        .enumerate()
        .filter(|&(i, _)| i != axis)
        .map(|(_, &x)| x)
        .collect()
}

/// `f = q·s + r` with `r` independent of the pivot coordinate.
pub struct DivMod<S> {
    pub quotient: Jet<S>,
    pub remainder: Jet<S>,
    pub pivot: usize,
}

/// Sum of products that skips vanishing factors without losing their order bound.
///
/// A truncated jet that is zero is only known to vanish up to its order, so a
/// skipped product still caps the valid order of the sum.
#[derive(Debug, Clone)]
pub struct ProductSum<S: Scalar> {
    acc: Option<Jet<S>>,
    cap: usize,
}

impl<S: Scalar> Default for ProductSum<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ProductSum<S> {
    pub fn new() -> Self {
        ProductSum {
            acc: None,
            cap: usize::MAX,
        }
    }

    /// Starts with an explicit order cap.
    pub fn with_cap(cap: usize) -> Self {
        ProductSum { acc: None, cap }
    }

    pub fn add_product(&mut self, a: &Jet<S>, b: &Jet<S>) {
        self.push_product(a, b, false);
    }

    pub fn sub_product(&mut self, a: &Jet<S>, b: &Jet<S>) {
        self.push_product(a, b, true);
    }

    fn push_product(&mut self, a: &Jet<S>, b: &Jet<S>, negate: bool) {
        if a.is_zero() || b.is_zero() {
            self.cap = self.cap.min(a.product_order(b));
            return;
        }
        let t = a.mul_to(b, self.cap);
        self.push(t, negate);
    }

    pub fn add(&mut self, t: &Jet<S>) {
        if t.is_zero() {
            self.cap = self.cap.min(t.order());
        } else {
            self.push(t.clone(), false);
        }
    }

    pub fn sub(&mut self, t: &Jet<S>) {
        if t.is_zero() {
            self.cap = self.cap.min(t.order());
        } else {
            self.push(t.clone(), true);
        }
    }

    fn push(&mut self, t: Jet<S>, negate: bool) {
        self.acc = Some(match self.acc.take() {
            None if negate => -&t,
            None => t,
            Some(a) if negate => &a - &t,
            Some(a) => &a + &t,
        });
    }

    /// The sum; an empty sum is zero of order `min(cap, fallback)`.
    pub fn finish(self, dim: usize, fallback: usize) -> Jet<S> {
        match self.acc {
            Some(a) => a.truncate(self.cap),
            None => Jet::zero(dim, self.cap.min(fallback)),
        }
    }
}

/// Division by a defining function `s` with `s(p) = 0` and `ds(p) != 0`.
///
/// Works for any such `s`, not only coordinate functions: the remainder is
/// the restriction of `f` to `{s = 0}`, parametrized by the coordinates other
/// than the pivot axis (the first axis along which `s` has nonzero slope).
pub fn divmod<S: Scalar>(f: &Jet<S>, s: &Jet<S>) -> Result<DivMod<S>> {
    f.check_dim(s)?;
    if !s.coeffs[0].is_zero() {
        return Err(EngineError::DefiningFunction(
            "does not vanish at the base point".into(),
        ));
    }
    let ord = f.order.min(s.order);
    if ord == 0 || s.order == 0 {
        return Err(EngineError::InsufficientOrder {
            context: "division by defining function",
            needed: 1,
            available: ord,
        });
    }
    let lay = f.wider_layout(s);
    let dim = f.dim();
    let lin: Vec<(usize, S)> = lay
        .block(1)
        .filter(|&i| !s.coeffs[i].is_zero())
        .map(|i| {
            let axis = lay.exponents(i).iter().position(|&x| x == 1).unwrap();
            (axis, s.coeffs[i].clone())
        })
        .collect();
    let (pivot, lead) = lin
        .iter()
        .min_by_key(|(a, _)| *a)
        .cloned()
        .ok_or_else(|| EngineError::DefiningFunction("differential vanishes at the base point".into()))?;
    let lead_inv = lead.inv().unwrap();
    let unit = |axis: usize| {
        let mut e = vec![0u8; dim];
        e[axis] = 1;
        lay.index_of(&e).unwrap()
    };
    let lin_idx: Vec<(usize, S)> = lin.iter().map(|(a, c)| (unit(*a), c.clone())).collect();
    let s_high: Vec<usize> = (lay.block_start[2]..s.coeffs.len().min(lay.count(ord)))
        .filter(|&i| !s.coeffs[i].is_zero())
        .collect();

    let mut w: Vec<S> = f.coeffs[..lay.count(ord)].to_vec();
    let mut q = vec![S::zero(); lay.count(ord - 1)];
    let mut r = vec![S::zero(); lay.count(ord)];
    for m in 0..=ord {
        for e in (1..=m).rev() {
            for idx in lay.block(m) {
                if lay.exponents(idx)[pivot] as usize != e || w[idx].is_zero() {
                    continue;
                }
                let c = w[idx].mul(&lead_inv);
                let beta = lay.shift_down[pivot][idx].unwrap() as usize;
                q[beta].add_assign(&c);
                for (li, lc) in &lin_idx {
                    let t = lay.product_index(beta, *li);
                    let p = c.mul(lc);
                    w[t] = w[t].sub(&p);
                }
            }
        }
        for idx in lay.block(m) {
            if lay.exponents(idx)[pivot] == 0 {
                r[idx] = w[idx].clone();
            }
        }
        if m >= 1 && m <= ord {
            for beta in lay.block(m - 1) {
                if q[beta].is_zero() {
                    continue;
                }
                for &g in &s_high {
                    if m - 1 + lay.degree(g) > ord {
                        break;
                    }
                    let t = lay.product_index(beta, g);
                    let p = q[beta].mul(&s.coeffs[g]);
                    w[t] = w[t].sub(&p);
                }
            }
        }
    }
    Ok(DivMod {
        quotient: Jet {
            layout: lay.clone(),
            order: ord - 1,
            coeffs: q,
        },
        remainder: Jet {
            layout: lay,
            order: ord,
            coeffs: r,
        },
        pivot,
    })
}

/// Exact quotient `f / s`; fails if `f` does not vanish on `{s = 0}`.
pub fn exact_div<S: Scalar>(f: &Jet<S>, s: &Jet<S>, context: &'static str) -> Result<Jet<S>> {
    let dm = divmod(f, s)?;
    if !dm.remainder.is_zero() {
        return Err(EngineError::NotDivisible {
            context,
            remainder_order: dm.remainder.valuation(),
        });
    }
    Ok(dm.quotient)
}

/// Restriction of `f` to `{s = 0}` as a jet in the non-pivot coordinates.
pub fn restrict<S: Scalar>(f: &Jet<S>, s: &Jet<S>) -> Result<(Jet<S>, usize)> {
    let dm = divmod(f, s)?;
    let r = dm.remainder.s_coefficient(0, dm.pivot)?;
    Ok((r, dm.pivot))
}

/// How far a jet is known to vanish along `{s = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransverseOrder {
    /// `f = O(s^k)` holds for this `k`.
    pub at_least: usize,
    /// True when `f / s^k` is visibly nonzero on `{s = 0}`, so `k` is sharp.
    pub sharp: bool,
}

pub fn transverse_order<S: Scalar>(f: &Jet<S>, s: &Jet<S>) -> Result<TransverseOrder> {
    let mut cur = f.clone();
    let mut k = 0;
    loop {
        if cur.order == 0 {
            return Ok(TransverseOrder {
                at_least: k,
                sharp: !cur.coeffs[0].is_zero(),
            });
        }
        let dm = divmod(&cur, s)?;
        if !dm.remainder.is_zero() {
            return Ok(TransverseOrder {
                at_least: k,
                sharp: true,
            });
        }
        cur = dm.quotient;
        k += 1;
    }
}

impl<'a, S: Scalar> Add<&'a Jet<S>> for &'a Jet<S> {
    type Output = Jet<S>;
    /// Panics on dimension mismatch; see [`Jet::checked_add`].
    fn add(self, o: &Jet<S>) -> Jet<S> {
        self.checked_add(o).expect("jet dimension mismatch")
    }
}

impl<'a, S: Scalar> Sub<&'a Jet<S>> for &'a Jet<S> {
    type Output = Jet<S>;
    fn sub(self, o: &Jet<S>) -> Jet<S> {
        self.checked_sub(o).expect("jet dimension mismatch")
    }
}

impl<'a, S: Scalar> Mul<&'a Jet<S>> for &'a Jet<S> {
    type Output = Jet<S>;
    fn mul(self, o: &Jet<S>) -> Jet<S> {
        self.checked_mul(o).expect("jet dimension mismatch")
    }
}

impl<S: Scalar> Neg for &Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Jet<S> {
        self.map(|c| c.neg())
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl<S: Scalar> $tr<Jet<S>> for Jet<S> {
            type Output = Jet<S>;
            fn $m(self, o: Jet<S>) -> Jet<S> {
                $tr::$m(&self, &o)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    type J = Jet<Rational>;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    /// Product oracle by explicit exponent addition.
    fn brute_mul(a: &J, b: &J, order: usize) -> J {
        let mut out = J::zero(a.dim(), order);
        for (ea, ca) in a.terms() {
            for (eb, cb) in b.terms() {
                let e: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                let deg: usize = e.iter().map(|&x| x as usize).sum();
                if deg <= order {
                    let i = out.layout.index_of(&e).unwrap();
                    out.coeffs[i] = &out.coeffs[i] + &(ca * cb);
                }
            }
        }
        out
    }

    fn arb_jet(dim: usize, order: usize) -> impl Strategy<Value = J> {
        let n = Layout::get(dim, order).count(order);
        proptest::collection::vec((-4i64..=4, 1i64..=3), n).prop_map(move |v| {
            let mut j = J::zero(dim, order);
            for (i, (a, b)) in v.into_iter().enumerate() {
                j.coeffs[i] = q(a, b);
            }
            j
        })
    }

    #[test]
    fn layout_is_graded_and_prefix_stable() {
        let small = Layout::build(3, 2);
        let big = Layout::build(3, 5);
        assert_eq!(small.count(2), 10);
        for i in 0..small.count(2) {
            assert_eq!(small.exponents(i), big.exponents(i));
        }
        assert_eq!(big.count(5), 56);
    }

    #[test]
    fn coordinate_product() {
        let x = J::coordinate(2, 3, 0, Rational::one()).unwrap();
        let y = J::coordinate(2, 3, 1, Rational::zero()).unwrap();
        let p = &x * &y;
        assert_eq!(p.coeff(&[1, 1]), Rational::one());
        assert_eq!(p.coeff(&[0, 1]), Rational::one());
        assert_eq!(p.coeff(&[0, 0]), Rational::zero());
    }

    #[test]
    fn product_order_uses_valuation() {
        let s = J::coordinate(2, 4, 0, Rational::zero()).unwrap();
        let f = J::one(2, 2);
        // s is exact to order 4 and vanishes at p; f is known to order 2.
        assert_eq!((&s * &f).order(), 3);
        assert_eq!((&s * &s).order(), 4);
    }

    #[test]
    fn differentiate_drops_order() {
        let x = J::coordinate(2, 3, 0, Rational::zero()).unwrap();
        let f = x.powi(3);
        let d = f.differentiate(0).unwrap();
        assert_eq!(d.order(), 2);
        assert_eq!(d.coeff(&[2, 0]), Rational::integer(3));
        let z = J::zero(2, 0);
        assert!(z.differentiate(0).is_err());
        assert!(f.differentiate(5).is_err());
    }

    #[test]
    fn reciprocal_needs_unit() {
        let x = J::coordinate(2, 3, 0, Rational::zero()).unwrap();
        assert!(matches!(
            x.reciprocal(),
            Err(EngineError::ZeroConstantTerm(_))
        ));
    }

    #[test]
    fn divmod_by_curved_defining_function() {
        // s = x + y^2, f = (x + y^2) * (1 + y) + y^3
        let x = J::coordinate(2, 5, 0, Rational::zero()).unwrap();
        let y = J::coordinate(2, 5, 1, Rational::zero()).unwrap();
        let s = &x + &(&y * &y);
        let qf = &J::one(2, 5) + &y;
        let f = &(&s * &qf) + &y.powi(3);
        let dm = divmod(&f, &s).unwrap();
        assert_eq!(dm.pivot, 0);
        assert_eq!(dm.remainder, y.powi(3));
        assert_eq!(dm.quotient, qf.truncate(4));
    }

    #[test]
    fn transverse_order_of_powers() {
        let x = J::coordinate(2, 6, 0, Rational::zero()).unwrap();
        let y = J::coordinate(2, 6, 1, Rational::zero()).unwrap();
        let s = &y + &(&x * &y);
        let f = &s.powi(3) * &(&J::one(2, 6) + &x);
        let t = transverse_order(&f, &s).unwrap();
        assert_eq!(t, TransverseOrder { at_least: 3, sharp: true });
        assert!(divmod(&f, &J::one(2, 6)).is_err());
    }

    #[test]
    fn s_coefficient_and_insert_axis_roundtrip() {
        let x = J::coordinate(3, 4, 0, Rational::zero()).unwrap();
        let z = J::coordinate(3, 4, 2, Rational::zero()).unwrap();
        let f = &(&x * &z) + &z.powi(2);
        let c0 = f.s_coefficient(0, 0).unwrap();
        assert_eq!(c0.dim(), 2);
        assert_eq!(c0.insert_axis(0), z.powi(2));
        let c1 = f.s_coefficient(1, 0).unwrap();
        assert_eq!(c1.coeff(&[0, 1]), Rational::one());
    }

    proptest! {
        #[test]
        fn mul_matches_brute_force(a in arb_jet(3, 4), b in arb_jet(3, 4)) {
            let p = &a * &b;
            prop_assert_eq!(p.clone(), brute_mul(&a, &b, p.order()));
        }

        #[test]
        fn mul_commutes_and_distributes(a in arb_jet(2, 4), b in arb_jet(2, 4), c in arb_jet(2, 4)) {
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        }

        #[test]
        fn reciprocal_multiplies_back(mut a in arb_jet(3, 4)) {
            a.coeffs[0] = Rational::integer(2);
            let r = a.reciprocal().unwrap();
            prop_assert_eq!(&a * &r, J::one(3, 4));
        }

        #[test]
        fn sqrt_squares_back(mut a in arb_jet(2, 5)) {
            a.coeffs[0] = Rational::integer(4);
            let r = a.sqrt().unwrap();
            prop_assert_eq!(&r * &r, a);
        }

        #[test]
        fn divmod_reassembles(f in arb_jet(3, 4), mut s in arb_jet(3, 4)) {
            s.coeffs[0] = Rational::zero();
            prop_assume!(!s.coeffs[1..4].iter().all(|c| c.is_zero()));
            let dm = divmod(&f, &s).unwrap();
            let back = &(&dm.quotient * &s) + &dm.remainder;
            prop_assert_eq!(back, f.truncate(dm.remainder.order()));
            for (e, _) in dm.remainder.terms() {
                prop_assert_eq!(e[dm.pivot], 0);
            }
        }

        #[test]
        fn leibniz_rule(a in arb_jet(2, 4), b in arb_jet(2, 4), axis in 0usize..2) {
            let lhs = (&a * &b).differentiate(axis).unwrap();
            let rhs = &(&a.differentiate(axis).unwrap() * &b) + &(&a * &b.differentiate(axis).unwrap());
            let o = lhs.order().min(rhs.order());
            prop_assert_eq!(lhs.truncate(o), rhs.truncate(o));
        }

        #[test]
        fn mul_associates(a in arb_jet(2, 4), b in arb_jet(2, 4), c in arb_jet(2, 4)) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        }

        #[test]
        fn partial_derivatives_commute(a in arb_jet(3, 4), x in 0usize..3, y in 0usize..3) {
            let xy = a.differentiate(x).unwrap().differentiate(y).unwrap();
            let yx = a.differentiate(y).unwrap().differentiate(x).unwrap();
            prop_assert_eq!(xy, yx);
        }

        #[test]
        fn product_orders_are_sound(
            a in arb_jet(2, 6), b in arb_jet(2, 6), c in arb_jet(2, 6),
            oa in 1usize..5, ob in 1usize..5, va in 0usize..3, kill in 0usize..3,
        ) {
            // Truncate (and optionally zero) the operands; results must agree with the
            // full-order computation up to the order they claim.
            let shift = |j: &J, v: usize| {
                let mut t = j.clone();
                for i in 0..Layout::get(2, 6).count(v.min(6)) {
                    t.coeffs[i] = Rational::zero();
                }
                t
            };
            let a = shift(&a, va);
            let b = if kill == 0 { J::zero(2, 6) } else { b };
            let (ta, tb, tc) = (a.truncate(oa), b.truncate(ob), c.truncate(oa.min(ob)));
            let p = &ta * &tb;
            prop_assert_eq!(p.clone(), (&a * &b).truncate(p.order()));
            let mut sum = ProductSum::new();
            sum.add_product(&ta, &tb);
            sum.sub_product(&tc, &ta);
            sum.add(&tc);
            let got = sum.finish(2, 6);
            let mut full = &a * &b;
            full = &full - &(&c * &a);
            full = &full + &c;
            prop_assert_eq!(got.clone(), full.truncate(got.order()));
        }

        #[test]
        fn eval_is_ring_homomorphism(a in arb_jet(2, 3), b in arb_jet(2, 3), t0 in -3i64..3, t1 in -3i64..3) {
            // compare below truncation: evaluate exact polynomials of degree <= 1
            let a1 = a.truncate(1);
            let b1 = b.truncate(1);
            let t = [Rational::integer(t0), Rational::integer(t1)];
            let p = a1.mul_to(&b1, 2);
            let p = Jet { layout: p.layout.clone(), order: 2, coeffs: brute_mul(&a1, &b1, 2).coeffs };
            prop_assert_eq!(p.eval(&t), &a1.eval(&t) * &b1.eval(&t));
        }
    }
}
