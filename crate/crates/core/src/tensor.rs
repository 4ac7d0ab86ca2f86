//! Tensors whose components are jets.
//!
//! Slots are either tangent (`d` values) or tractor (`d + 2` values) and carry
//! a variance. Components are stored row-major over the slot ranges.

use crate::error::{EngineError, Result};
use crate::jet::{Jet, ProductSum};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Up,
    Down,
    TractorUp,
    TractorDown,
}

impl Slot {
    pub fn size(self, dim: usize) -> usize {
        match self {
            Slot::Up | Slot::Down => dim,
            Slot::TractorUp | Slot::TractorDown => dim + 2,
        }
    }

    pub fn is_tractor(self) -> bool {
        matches!(self, Slot::TractorUp | Slot::TractorDown)
    }

    pub fn is_up(self) -> bool {
        matches!(self, Slot::Up | Slot::TractorUp)
    }

    /// True if an index in `self` may be contracted against one in `other`.
    pub fn pairs_with(self, other: Slot) -> bool {
        matches!(
            (self, other),
            (Slot::Up, Slot::Down)
                | (Slot::Down, Slot::Up)
                | (Slot::TractorUp, Slot::TractorDown)
                | (Slot::TractorDown, Slot::TractorUp)
        )
    }
}

/// Declared index symmetry; checked by [`TensorJet::verify_symmetry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetry {
    #[default]
    None,
    /// Symmetric in the first two slots.
    Symmetric,
    /// Antisymmetric in the first two slots.
    Antisymmetric,
    /// Algebraic curvature tensor symmetries on four lower slots.
    Curvature,
}

/// Row-major iteration over all index tuples of a shape.
pub fn indices(shape: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = shape.iter().product();
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; shape.len()];
        for k in (0..shape.len()).rev() {
            idx[k] = flat % shape[k];
            flat /= shape[k];
        }
        idx
    })
}

#[derive(Clone)]
pub struct TensorJet<S> {
    dim: usize,
    slots: Vec<Slot>,
    shape: Vec<usize>,
    comps: Vec<Jet<S>>,
    pub weight: Rational,
    pub symmetry: Symmetry,
}

impl<S: Scalar> std::fmt::Debug for TensorJet<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TensorJet")
            .field("slots", &self.slots)
            .field("weight", &self.weight)
            .field("comps", &self.comps)
            .finish()
    }
}

impl<S: Scalar> PartialEq for TensorJet<S> {
    fn eq(&self, other: &Self) -> bool {
        self.slots == other.slots && self.comps == other.comps
    }
}

impl<S: Scalar> TensorJet<S> {
    pub fn from_fn(
        dim: usize,
        slots: Vec<Slot>,
        mut f: impl FnMut(&[usize]) -> Jet<S>,
    ) -> Self {
        let shape: Vec<usize> = slots.iter().map(|s| s.size(dim)).collect();
        let comps = indices(&shape).map(|i| f(&i)).collect();
        TensorJet {
            dim,
            slots,
            shape,
            comps,
            weight: Rational::zero(),
            symmetry: Symmetry::None,
        }
    }

    pub fn try_from_fn(
        dim: usize,
        slots: Vec<Slot>,
        mut f: impl FnMut(&[usize]) -> Result<Jet<S>>,
    ) -> Result<Self> {
        let shape: Vec<usize> = slots.iter().map(|s| s.size(dim)).collect();
        let comps = indices(&shape).map(|i| f(&i)).collect::<Result<_>>()?;
        Ok(TensorJet {
            dim,
            slots,
            shape,
            comps,
            weight: Rational::zero(),
            symmetry: Symmetry::None,
        })
    }

    pub fn zeros(dim: usize, slots: Vec<Slot>, order: usize) -> Self {
        Self::from_fn(dim, slots, |_| Jet::zero(dim, order))
    }

    pub fn scalar(f: Jet<S>) -> Self {
        let dim = f.dim();
        let mut f = Some(f);
        Self::from_fn(dim, vec![], |_| f.take().unwrap())
    }

    pub fn with_weight(mut self, w: Rational) -> Self {
        self.weight = w;
        self
    }

    pub fn with_symmetry(mut self, s: Symmetry) -> Self {
        self.symmetry = s;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn components(&self) -> &[Jet<S>] {
        &self.comps
    }

    /// Smallest valid order among the components.
    pub fn order(&self) -> usize {
        self.comps.iter().map(Jet::order).min().unwrap_or(usize::MAX)
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| {
                debug_assert!(i < n);
                acc * n + i
            })
    }

    pub fn get(&self, idx: &[usize]) -> &Jet<S> {
        &self.comps[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Jet<S>) {
        let k = self.flat(idx);
        self.comps[k] = v;
    }

    pub fn as_scalar(&self) -> Result<&Jet<S>> {
        if self.rank() != 0 {
            return Err(EngineError::Shape(format!(
                "expected a scalar, got rank {}",
                self.rank()
            )));
        }
        Ok(&self.comps[0])
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Jet::is_zero)
    }

    pub fn map_jets(&self, f: impl Fn(&Jet<S>) -> Jet<S>) -> Self {
        TensorJet {
            comps: self.comps.iter().map(f).collect(),
            ..self.clone()
        }
    }

    pub fn try_map_jets(&self, f: impl Fn(&Jet<S>) -> Result<Jet<S>>) -> Result<Self> {
        Ok(TensorJet {
            comps: self.comps.iter().map(f).collect::<Result<_>>()?,
            ..self.clone()
        })
    }

    pub fn truncate(&self, order: usize) -> Self {
        self.map_jets(|j| j.truncate(order))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.slots != other.slots {
            return Err(EngineError::Shape(format!(
                "{:?} (dim {}) vs {:?} (dim {})",
                self.slots, self.dim, other.slots, other.dim
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.checked_add(b))
            .collect::<Result<_>>()?;
        Ok(TensorJet {
            comps,
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.checked_sub(b))
            .collect::<Result<_>>()?;
        Ok(TensorJet {
            comps,
            ..self.clone()
        })
    }

    pub fn scale(&self, c: &S) -> Self {
        self.map_jets(|j| j.scale(c))
    }

    pub fn mul_jet(&self, f: &Jet<S>) -> Self {
        self.map_jets(|j| j * f)
    }

    pub fn neg(&self) -> Self {
        self.map_jets(|j| -j)
    }

    /// Outer product, slots of `self` first; weights add.
    pub fn outer(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(EngineError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let r = self.rank();
        let mut slots = self.slots.clone();
        slots.extend_from_slice(&other.slots);
        let t = Self::from_fn(self.dim, slots, |i| {
            self.get(&i[..r]) * other.get(&i[r..])
        });
        Ok(t.with_weight(&self.weight + &other.weight))
    }

    /// Trace over slots `i` and `j`, which must have opposite variance.
    pub fn contract(&self, i: usize, j: usize) -> Result<Self> {
        if i == j || i >= self.rank() || j >= self.rank() {
            return Err(EngineError::Shape(format!(
                "cannot contract slots {i},{j} of rank {}",
                self.rank()
            )));
        }
        if !self.slots[i].pairs_with(self.slots[j]) {
            return Err(EngineError::Shape(format!(
                "slots {:?} and {:?} do not pair",
                self.slots[i], self.slots[j]
            )));
        }
        let keep: Vec<usize> = (0..self.rank()).filter(|&k| k != i && k != j).collect();
        let slots = keep.iter().map(|&k| self.slots[k]).collect();
        let n = self.shape[i];
        let order = self.order();
        let t = Self::from_fn(self.dim, slots, |rest| {
            let mut full = vec![0; self.rank()];
            for (p, &k) in keep.iter().enumerate() {
                full[k] = rest[p];
            }
            let mut acc = ProductSum::new();
            for a in 0..n {
                full[i] = a;
                full[j] = a;
                acc.add(self.get(&full));
            }
            acc.finish(self.dim, order)
        });
        Ok(t.with_weight(self.weight.clone()))
    }

    /// New slot `k` is old slot `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.rank()];
        if perm.len() != self.rank() || perm.iter().any(|&p| p >= self.rank() || std::mem::replace(&mut seen[p], true)) {
            return Err(EngineError::Shape(format!("invalid permutation {perm:?}")));
        }
        let slots = perm.iter().map(|&p| self.slots[p]).collect();
        let t = Self::from_fn(self.dim, slots, |i| {
            let mut old = vec![0; i.len()];
            for (k, &p) in perm.iter().enumerate() {
                old[p] = i[k];
            }
            self.get(&old).clone()
        });
        Ok(t.with_weight(self.weight.clone()))
    }

    /// `(T_ab + T_ba) / 2` on the first two slots.
    pub fn symmetrize2(&self) -> Result<Self> {
        let mut perm: Vec<usize> = (0..self.rank()).collect();
        if perm.len() < 2 {
            return Err(EngineError::Shape("symmetrize needs rank >= 2".into()));
        }
        perm.swap(0, 1);
        let half = S::from_frac(1, 2);
        Ok(self
            .add(&self.permute(&perm)?)?
            .scale(&half)
            .with_weight(self.weight.clone())
            .with_symmetry(Symmetry::Symmetric))
    }

    /// Checks the declared symmetry componentwise.
    pub fn verify_symmetry(&self) -> bool {
        let r = self.rank();
        let swap = |t: &Self, a: usize, b: usize| {
            let mut p: Vec<usize> = (0..r).collect();
            p.swap(a, b);
            t.permute(&p).ok()
        };
        match self.symmetry {
            Symmetry::None => true,
            Symmetry::Symmetric => r >= 2 && swap(self, 0, 1).as_ref() == Some(self),
            Symmetry::Antisymmetric => r >= 2 && swap(self, 0, 1) == Some(self.neg()),
            Symmetry::Curvature => {
                if r != 4 {
                    return false;
                }
                let neg = self.neg();
                let pair = self.permute(&[2, 3, 0, 1]).ok();
                let c1 = self.permute(&[0, 2, 3, 1]).ok();
                let c2 = self.permute(&[0, 3, 1, 2]).ok();
                let bianchi = match (c1, c2) {
                    (Some(a), Some(b)) => self.add(&a).and_then(|x| x.add(&b)).map(|x| x.is_zero()).unwrap_or(false),
                    _ => false,
                };
                swap(self, 0, 1) == Some(neg.clone())
                    && swap(self, 2, 3) == Some(neg)
                    && pair.as_ref() == Some(self)
                    && bianchi
            }
        }
    }
}

/// Square matrix of jets, row-major.
pub type JetMatrix<S> = Vec<Vec<Jet<S>>>;

pub fn mat_mul<S: Scalar>(a: &JetMatrix<S>, b: &JetMatrix<S>) -> JetMatrix<S> {
    let n = a.len();
    let m = b[0].len();
    let order = a
        .iter()
        .chain(b)
        .flatten()
        .map(Jet::order)
        .min()
        .unwrap_or(0);
    let dim = a[0][0].dim();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = Jet::zero(dim, order);
                    for (k, aik) in a[i].iter().enumerate() {
                        if aik.is_zero() || b[k][j].is_zero() {
                            continue;
                        }
                        acc = &acc + &aik.mul_to(&b[k][j], order);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Exact inverse of a constant matrix by Gauss-Jordan elimination.
pub fn invert_constant<S: Scalar>(a: &[Vec<S>]) -> Option<Vec<Vec<S>>> {
    let n = a.len();
    let mut m: Vec<Vec<S>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { S::one() } else { S::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        let inv = m[col][col].inv()?;
        for x in m[col].iter_mut() {
            *x = x.mul(&inv);
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in 0..2 * n {
                    let p = f.mul(&m[col][c]);
                    m[r][c] = m[r][c].sub(&p);
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Inverse of a jet matrix whose constant part is invertible (Newton iteration).
pub fn invert<S: Scalar>(a: &JetMatrix<S>) -> Result<JetMatrix<S>> {
    let n = a.len();
    let dim = a[0][0].dim();
    let order = a.iter().flatten().map(Jet::order).min().unwrap_or(0);
    let c: Vec<Vec<S>> = a
        .iter()
        .map(|r| r.iter().map(|j| j.constant_term().clone()).collect())
        .collect();
    let c_inv = invert_constant(&c).ok_or(EngineError::ZeroConstantTerm("matrix inverse"))?;
    let mut x: JetMatrix<S> = c_inv
        .into_iter()
        .map(|r| r.into_iter().map(|v| Jet::constant(dim, order, v)).collect())
        .collect();
    let mut valid = 0usize;
    while valid < order {
        let ax = mat_mul(a, &x);
        let two_minus: JetMatrix<S> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let id = if i == j { S::from_i64(2) } else { S::zero() };
                        &Jet::constant(dim, order, id) - &ax[i][j]
                    })
                    .collect()
            })
            .collect();
        x = mat_mul(&x, &two_minus);
        valid = 2 * valid + 1;
    }
    Ok(x)
}
