//! Coefficient fields for jets.
//!
//! Everything in the engine is generic over [`Scalar`]. Three families are
//! provided: exact [`Rational`] numbers (the default), `f64` (used only by
//! finite-difference oracles), and [`Dual`] numbers over any scalar, which
//! give exact first-order perturbation responses. `Dual<Dual<Rational>>`
//! carries two independent infinitesimals and is used for bilinear probes.

use std::cmp::Ordering;
use std::fmt;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Field operations needed by the jet kernel.
pub trait Scalar: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_frac(num: i64, den: i64) -> Self;
    fn from_rational(q: &Rational) -> Self;

    fn is_zero(&self) -> bool;
    /// Sign test on the "real" part; drives positivity preconditions.
    fn is_positive(&self) -> bool;

    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn inv(&self) -> Option<Self>;
    /// Square root when it exists in the field.
    fn sqrt(&self) -> Option<Self>;

    fn add_assign(&mut self, other: &Self) {
        *self = Scalar::add(self, other);
    }

    /// Writes `xs` as integer numerators over one positive denominator, when
    /// the type is exact and everything fits in `i128`.
    fn common_denominator(_xs: &[Self]) -> Option<(i128, Vec<i128>)> {
        None
    }

    /// Inverse of [`Scalar::common_denominator`]; only called when that returned `Some`.
    fn from_scaled(_num: i128, _den: i128) -> Self {
        unreachable!("from_scaled without common_denominator")
    }

    /// Arbitrary-size form of [`Scalar::common_denominator`].
    fn big_common_denominator(_xs: &[Self]) -> Option<(BigInt, Vec<BigInt>)> {
        None
    }

    /// Inverse of [`Scalar::big_common_denominator`].
    fn from_big_scaled(_num: BigInt, _den: &BigInt) -> Self {
        unreachable!("from_big_scaled without big_common_denominator")
    }

    /// `self += a * b`
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        let p = Scalar::mul(a, b);
        self.add_assign(&p);
    }

    fn scale_i64(&self, k: i64) -> Self {
        Scalar::mul(self, &Self::from_i64(k))
    }

    fn to_f64(&self) -> f64;

    /// Name used in reports.
    fn mode_name() -> &'static str;
}

// ---------------------------------------------------------------------------
// Rational

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    /// Reduced, denominator > 0.
    Small(i64, i64),
    /// Only used when the reduced value does not fit `Small`.
    Big(Box<BigRational>),
}

/// Exact rational number with an allocation-free fast path for values whose
/// reduced numerator and denominator fit in `i64`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rational(Repr);

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    if a == 0 || b == 0 {
        return a | b;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    if let (Ok(x), Ok(y)) = (u64::try_from(a), u64::try_from(b)) {
        return gcd_u64(x, y) as u128;
    }
    if a == 0 {
        return b;
    }
    if b == 0 {
        return a;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    gcd_u128(a.unsigned_abs() as u128, b.unsigned_abs() as u128) as i64
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Self::from_i128(num as i128, den as i128)
    }

    pub fn integer(v: i64) -> Self {
        Rational(Repr::Small(v, 1))
    }

    fn from_i128(num: i128, den: i128) -> Self {
        let (mut n, mut d) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd_u128(n.unsigned_abs(), d as u128) as i128;
        if g > 1 {
            n /= g;
            d /= g;
        }
        if n == 0 {
            return Rational(Repr::Small(0, 1));
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(n), Ok(d)) => Rational(Repr::Small(n, d)),
            _ => Rational(Repr::Big(Box::new(BigRational::new_raw(
                BigInt::from(n),
                BigInt::from(d),
            )))),
        }
    }

    pub fn from_big(q: BigRational) -> Self {
        // BigRational arithmetic keeps values reduced with positive denominator.
        match (q.numer().to_i64(), q.denom().to_i64()) {
            (Some(n), Some(d)) => Rational(Repr::Small(n, d)),
            _ => Rational(Repr::Big(Box::new(q))),
        }
    }

    pub fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(b) => (**b).clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => BigInt::from(*n),
            Repr::Big(b) => b.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => BigInt::from(*d),
            Repr::Big(b) => b.denom().clone(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(_, d) => *d == 1,
            Repr::Big(b) => b.is_integer(),
        }
    }

    pub fn signum(&self) -> i32 {
        match &self.0 {
            Repr::Small(n, _) => n.signum() as i32,
            Repr::Big(b) => {
                if b.is_positive() {
                    1
                } else if b.is_negative() {
                    -1
                } else {
                    0
                }
            }
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn pow(&self, e: i32) -> Self {
        let base = if e < 0 {
            self.recip().expect("negative power of zero")
        } else {
            self.clone()
        };
        let mut acc = Rational::integer(1);
        for _ in 0..e.unsigned_abs() {
            acc = &acc * &base;
        }
        acc
    }

    pub fn recip(&self) -> Option<Self> {
        match &self.0 {
            Repr::Small(0, _) => None,
            Repr::Small(n, d) => Some(Self::from_i128(*d as i128, *n as i128)),
            Repr::Big(b) => Some(Self::from_big(b.recip())),
        }
    }

    /// Exact square root of a non-negative perfect square.
    pub fn sqrt_exact(&self) -> Option<Self> {
        if self.signum() < 0 {
            return None;
        }
        let (n, d) = (self.numer(), self.denom());
        let (rn, rd) = (n.sqrt(), d.sqrt());
        if &rn * &rn == n && &rd * &rd == d {
            Some(Self::from_big(BigRational::new(rn, rd)))
        } else {
            None
        }
    }

    pub fn binomial(n: u64, k: u64) -> Self {
        let mut acc = BigInt::one();
        for i in 0..k {
            acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
        }
        Self::from_big(BigRational::from_integer(acc))
    }

    pub fn factorial(n: u64) -> Self {
        let mut acc = BigInt::one();
        for i in 2..=n {
            acc *= BigInt::from(i);
        }
        Self::from_big(BigRational::from_integer(acc))
    }

    fn big_op(a: &Self, b: &Self, op: impl Fn(&BigRational, &BigRational) -> BigRational) -> Self {
        Self::from_big(op(&a.to_big(), &b.to_big()))
    }
}

impl Default for Rational {
    fn default() -> Self {
        Rational::integer(0)
    }
}

impl<'a> Add<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn add(self, o: &Rational) -> Rational {
        match (&self.0, &o.0) {
            (Repr::Small(a, 1), Repr::Small(c, 1)) => match a.checked_add(*c) {
                Some(v) => Rational(Repr::Small(v, 1)),
                None => Rational::from_i128(*a as i128 + *c as i128, 1),
            },
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
                if b == d {
                    Rational::from_i128(a + c, b)
                } else {
                    Rational::from_i128(a * d + c * b, b * d)
                }
            }
            _ => Rational::big_op(self, o, |x, y| x + y),
        }
    }
}

impl<'a> Sub<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn sub(self, o: &Rational) -> Rational {
        self + &(-o)
    }
}

impl<'a> Mul<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn mul(self, o: &Rational) -> Rational {
        match (&self.0, &o.0) {
            (Repr::Small(0, _), _) | (_, Repr::Small(0, _)) => Rational::integer(0),
            (Repr::Small(a, 1), Repr::Small(c, 1)) => match a.checked_mul(*c) {
                Some(v) => Rational(Repr::Small(v, 1)),
                None => Rational::from_i128(*a as i128 * *c as i128, 1),
            },
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                let g1 = gcd_i64(*a, *d);
                let g2 = gcd_i64(*c, *b);
                let n = (*a / g1) as i128 * (*c / g2) as i128;
                let m = (*b / g2) as i128 * (*d / g1) as i128;
                match (i64::try_from(n), i64::try_from(m)) {
                    (Ok(n), Ok(m)) => Rational(Repr::Small(n, m)),
                    _ => Rational::from_i128(n, m),
                }
            }
            _ => Rational::big_op(self, o, |x, y| x * y),
        }
    }
}

impl<'a> Div<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn div(self, o: &Rational) -> Rational {
        self * &o.recip().expect("division by zero")
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match &self.0 {
            Repr::Small(n, d) => match n.checked_neg() {
                Some(v) => Rational(Repr::Small(v, *d)),
                None => Rational::from_i128(-(*n as i128), *d as i128),
            },
            Repr::Big(b) => Rational::from_big(-(**b).clone()),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $m(self, o: Rational) -> Rational {
                $tr::$m(&self, &o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128))
            }
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, 1) => write!(f, "{n}"),
            Repr::Small(n, d) => write!(f, "{n}/{d}"),
            Repr::Big(b) if b.is_integer() => write!(f, "{}", b.numer()),
            Repr::Big(b) => write!(f, "{}/{}", b.numer(), b.denom()),
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(String);

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `p`, `p/q` and finite decimals such as `-1.25`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRationalError(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Rational::from_big(BigRational::new(n, d)));
        }
        if let Some((ip, fp)) = t.split_once('.') {
            if fp.is_empty() || !fp.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let neg = ip.starts_with('-');
            let ip = ip.trim_start_matches(['-', '+']);
            let ip = if ip.is_empty() { "0" } else { ip };
            let digits: BigInt = format!("{ip}{fp}").parse().map_err(|_| err())?;
            let den = num_traits::pow(BigInt::from(10), fp.len());
            let q = BigRational::new(digits, den);
            return Ok(Rational::from_big(if neg { -q } else { q }));
        }
        let n: BigInt = t.parse().map_err(|_| err())?;
        Ok(Rational::from_big(BigRational::from_integer(n)))
    }
}

impl Scalar for Rational {
    fn zero() -> Self {
        Rational::integer(0)
    }
    fn one() -> Self {
        Rational::integer(1)
    }
    fn from_i64(v: i64) -> Self {
        Rational::integer(v)
    }
    fn from_frac(num: i64, den: i64) -> Self {
        Rational::new(num, den)
    }
    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }
    fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }
    fn is_positive(&self) -> bool {
        self.signum() > 0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        self.recip()
    }
    fn sqrt(&self) -> Option<Self> {
        self.sqrt_exact()
    }
    fn common_denominator(xs: &[Self]) -> Option<(i128, Vec<i128>)> {
        let mut den: i128 = 1;
        for x in xs {
            match x.0 {
                Repr::Small(0, _) | Repr::Small(_, 1) => {}
                Repr::Small(_, d) => {
                    let g = gcd_u128(den as u128, d as u128) as i128;
                    den = den.checked_mul(d as i128 / g)?;
                    if den > i64::MAX as i128 {
                        return None;
                    }
                }
                Repr::Big(_) => return None,
            }
        }
        xs.iter()
            .map(|x| match x.0 {
                Repr::Small(n, d) => (n as i128).checked_mul(den / d as i128),
                Repr::Big(_) => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| (den, v))
    }
    fn from_scaled(num: i128, den: i128) -> Self {
        Rational::from_i128(num, den)
    }
    fn big_common_denominator(xs: &[Self]) -> Option<(BigInt, Vec<BigInt>)> {
        let mut den = BigInt::one();
        for x in xs {
            match &x.0 {
                Repr::Small(0, _) | Repr::Small(_, 1) => {}
                Repr::Small(_, d) => {
                    let d = BigInt::from(*d);
                    if !(&den % &d).is_zero() {
                        den = den.lcm(&d);
                    }
                }
                Repr::Big(b) => {
                    if !(&den % b.denom()).is_zero() {
                        den = den.lcm(b.denom());
                    }
                }
            }
        }
        let nums = xs
            .iter()
            .map(|x| match &x.0 {
                Repr::Small(0, _) => BigInt::zero(),
                Repr::Small(n, d) => BigInt::from(*n) * (&den / BigInt::from(*d)),
                Repr::Big(b) => b.numer() * (&den / b.denom()),
            })
            .collect();
        Some((den, nums))
    }
    fn from_big_scaled(num: BigInt, den: &BigInt) -> Self {
        Rational::from_big(BigRational::new(num, den.clone()))
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        if let (Repr::Small(x, 1), Repr::Small(y, 1), Repr::Small(z, 1)) = (&self.0, &a.0, &b.0) {
            if let Some(v) = y.checked_mul(*z).and_then(|p| p.checked_add(*x)) {
                self.0 = Repr::Small(v, 1);
                return;
            }
        }
        let p = a * b;
        *self = &*self + &p;
    }
    fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(n, d) => *n as f64 / *d as f64,
            Repr::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }
    fn mode_name() -> &'static str {
        "rational"
    }
}

// ---------------------------------------------------------------------------
// f64

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_frac(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_rational(q: &Rational) -> Self {
        q.to_f64()
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_positive(&self) -> bool {
        *self > 0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        (*self != 0.0).then(|| 1.0 / self)
    }
    fn sqrt(&self) -> Option<Self> {
        (*self >= 0.0).then(|| f64::sqrt(*self))
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn mode_name() -> &'static str {
        "float"
    }
}

// ---------------------------------------------------------------------------
// Float with a zero tolerance

/// `f64` whose zero test has an absolute tolerance of [`Float::TOLERANCE`].
///
/// Exact divisions by a defining function leave round-off remainders; this
/// type lets the whole pipeline run in floating point with those treated as
/// zero. Plain `f64` keeps the exact test.
#[derive(Clone, Copy, PartialEq, PartialOrd, Debug, Default)]
pub struct Float(pub f64);

impl Float {
    pub const TOLERANCE: f64 = 1e-9;
}

impl fmt::Display for Float {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl Scalar for Float {
    fn zero() -> Self {
        Float(0.0)
    }
    fn one() -> Self {
        Float(1.0)
    }
    fn from_i64(v: i64) -> Self {
        Float(v as f64)
    }
    fn from_frac(num: i64, den: i64) -> Self {
        Float(num as f64 / den as f64)
    }
    fn from_rational(q: &Rational) -> Self {
        Float(q.to_f64())
    }
    fn is_zero(&self) -> bool {
        self.0.abs() <= Self::TOLERANCE
    }
    fn is_positive(&self) -> bool {
        self.0 > Self::TOLERANCE
    }
    fn add(&self, o: &Self) -> Self {
        Float(self.0 + o.0)
    }
    fn sub(&self, o: &Self) -> Self {
        Float(self.0 - o.0)
    }
    fn mul(&self, o: &Self) -> Self {
        Float(self.0 * o.0)
    }
    fn neg(&self) -> Self {
        Float(-self.0)
    }
    fn inv(&self) -> Option<Self> {
        (!self.is_zero()).then(|| Float(1.0 / self.0))
    }
    fn sqrt(&self) -> Option<Self> {
        (self.0 >= 0.0).then(|| Float(self.0.sqrt()))
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        self.0 += a.0 * b.0;
    }
    fn to_f64(&self) -> f64 {
        self.0
    }
    fn mode_name() -> &'static str {
        "float"
    }
}

// ---------------------------------------------------------------------------
// Dual numbers

/// `re + eps·ε` with `ε² = 0`.
#[derive(Clone, PartialEq, Debug)]
pub struct Dual<S> {
    pub re: S,
    pub eps: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(re: S, eps: S) -> Self {
        Dual { re, eps }
    }

    pub fn real(re: S) -> Self {
        Dual { re, eps: S::zero() }
    }

    /// The infinitesimal itself.
    pub fn epsilon() -> Self {
        Dual { re: S::zero(), eps: S::one() }
    }
}

impl<S: Scalar> fmt::Display for Dual<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}ε)", self.re, self.eps)
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn zero() -> Self {
        Dual::real(S::zero())
    }
    fn one() -> Self {
        Dual::real(S::one())
    }
    fn from_i64(v: i64) -> Self {
        Dual::real(S::from_i64(v))
    }
    fn from_frac(num: i64, den: i64) -> Self {
        Dual::real(S::from_frac(num, den))
    }
    fn from_rational(q: &Rational) -> Self {
        Dual::real(S::from_rational(q))
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.is_zero()
    }
    fn is_positive(&self) -> bool {
        self.re.is_positive()
    }
    fn add(&self, o: &Self) -> Self {
        Dual::new(self.re.add(&o.re), self.eps.add(&o.eps))
    }
    fn sub(&self, o: &Self) -> Self {
        Dual::new(self.re.sub(&o.re), self.eps.sub(&o.eps))
    }
    fn mul(&self, o: &Self) -> Self {
        let mut eps = self.re.mul(&o.eps);
        eps.mul_add_assign(&self.eps, &o.re);
        Dual::new(self.re.mul(&o.re), eps)
    }
    fn neg(&self) -> Self {
        Dual::new(self.re.neg(), self.eps.neg())
    }
    fn inv(&self) -> Option<Self> {
        let r = self.re.inv()?;
        let eps = self.eps.mul(&r).mul(&r).neg();
        Some(Dual::new(r, eps))
    }
    fn sqrt(&self) -> Option<Self> {
        let r = self.re.sqrt()?;
        let two_r_inv = r.scale_i64(2).inv()?;
        let eps = self.eps.mul(&two_r_inv);
        Some(Dual::new(r, eps))
    }
    fn add_assign(&mut self, o: &Self) {
        self.re.add_assign(&o.re);
        self.eps.add_assign(&o.eps);
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        self.re.mul_add_assign(&a.re, &b.re);
        self.eps.mul_add_assign(&a.re, &b.eps);
        self.eps.mul_add_assign(&a.eps, &b.re);
    }
    fn to_f64(&self) -> f64 {
        self.re.to_f64()
    }
    fn mode_name() -> &'static str {
        "dual"
    }
}
