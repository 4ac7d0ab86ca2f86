//! Polynomial expressions over named coordinates with exact rational coefficients.
//!
//! Grammar: sums and differences of products and quotients of factors, where a
//! factor is an optionally signed power `atom ^ n` and an atom is a number
//! (`3`, `1/2` via division, `0.25`), a coordinate name or a parenthesized
//! expression. `*` and `·` both multiply; division is only by nonzero constants.

use std::collections::BTreeMap;
use std::fmt;

use willmore_core::{Jet, Rational, Result as EngineResult, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("column {column}: {message}")]
pub struct ExprError {
    /// 1-based character column inside the expression.
    pub column: usize,
    pub message: String,
}

/// Polynomial in `n` variables; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, Rational::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(exponents, coefficient)` pairs in exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Rational)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&vec![0; self.nvars]).cloned(),
            _ => None,
        }
    }

    fn add_term(&mut self, e: Vec<u32>, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e).or_insert_with(Rational::zero);
        *slot = &*slot + &c;
        if slot.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(e.clone(), c.clone());
        }
        r
    }

    pub fn neg(&self) -> Self {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                r.add_term(e, ca * cb);
            }
        }
        r
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut r = Self::zero(self.nvars);
        for (e, x) in &self.terms {
            r.add_term(e.clone(), x * c);
        }
        r
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(self.nvars, Rational::one()), |acc, _| acc.mul(self))
    }

    /// Value at a point.
    pub fn eval(&self, at: &[Rational]) -> Rational {
        self.terms.iter().fold(Rational::zero(), |acc, (e, c)| {
            let m = e.iter().zip(at).fold(c.clone(), |m, (&k, x)| (0..k).fold(m, |m, _| &m * x));
            &acc + &m
        })
    }

    /// Taylor jet at `base` to the given order.
    pub fn to_jet<S: Scalar>(&self, base: &[Rational], order: usize) -> EngineResult<Jet<S>> {
        let d = self.nvars;
        let coords: Vec<Jet<S>> = (0..d)
            .map(|a| Jet::coordinate(d, order, a, S::from_rational(&base[a])))
            .collect::<EngineResult<_>>()?;
        let mut powers: Vec<Vec<Jet<S>>> = coords.iter().map(|x| vec![Jet::one(d, order), x.clone()]).collect();
        let mut acc = Jet::zero(d, order);
        for (e, c) in &self.terms {
            let mut m = Jet::constant(d, order, S::from_rational(c));
            for (a, &k) in e.iter().enumerate() {
                while powers[a].len() <= k as usize {
                    let next = powers[a].last().unwrap() * &coords[a];
                    powers[a].push(next);
                }
                if k > 0 {
                    m = &m * &powers[a][k as usize];
                }
            }
            acc = &acc + &m;
        }
        Ok(acc)
    }

    /// Canonical text using the given coordinate names; parses back to `self`.
    pub fn display<'a>(&'a self, names: &'a [String]) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, names }
    }
}

pub struct PolyDisplay<'a> {
    poly: &'a Poly,
    names: &'a [String],
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return f.write_str("0");
        }
        // graded, then the earlier coordinate first
        let mut terms: Vec<_> = self.poly.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            da.cmp(&db).then_with(|| b.cmp(a))
        });
        for (i, (e, c)) in terms.into_iter().enumerate() {
            let negative = c.signum() < 0;
            let mag = if negative { -c } else { c.clone() };
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let mut factors: Vec<String> = Vec::new();
            for (a, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => factors.push(self.names[a].clone()),
                    _ => factors.push(format!("{}^{k}", self.names[a])),
                }
            }
            if factors.is_empty() || mag != Rational::one() {
                factors.insert(0, mag.to_string());
            }
            f.write_str(&factors.join("*"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn err(column: usize, message: impl Into<String>) -> ExprError {
    ExprError { column, message: message.into() }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' | '−' => Some(Tok::Minus),
            '*' | '·' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, col));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let q = text.parse::<Rational>().map_err(|_| err(col, format!("invalid number `{text}`")))?;
            out.push((Tok::Num(q), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            return Err(err(col, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    names: &'a [String],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, c)| *c)
    }

    fn expr(&mut self) -> Result<Poly, ExprError> {
        let mut acc = self.term()?;
        while let Some(t) = self.peek() {
            let minus = match t {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            acc = if minus { acc.sub(&rhs) } else { acc.add(&rhs) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly, ExprError> {
        let mut acc = self.factor()?;
        while let Some(t) = self.peek() {
            let divide = match t {
                Tok::Star => false,
                Tok::Slash => true,
                _ => break,
            };
            self.pos += 1;
            let col = self.column();
            let rhs = self.factor()?;
            acc = if divide {
                match rhs.as_constant() {
                    Some(c) if !c.is_zero() => acc.scale(&(&Rational::one() / &c)),
                    Some(_) => return Err(err(col, "division by zero")),
                    None => return Err(err(col, "division by a non-constant expression")),
                }
            } else {
                acc.mul(&rhs)
            };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Poly, ExprError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(self.factor()?.neg())
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.factor()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Poly, ExprError> {
        let base = self.atom()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let col = self.column();
        match self.toks.get(self.pos) {
            Some((Tok::Num(q), _)) if q.is_integer() && q.signum() >= 0 => {
                let k: u32 = q
                    .numer()
                    .try_into()
                    .ok()
                    .filter(|&k| k <= 64)
                    .ok_or_else(|| err(col, "exponent too large"))?;
                self.pos += 1;
                Ok(base.pow(k))
            }
            _ => Err(err(col, "expected a non-negative integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<Poly, ExprError> {
        let col = self.column();
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return Err(err(col, "unexpected end of expression"));
        };
        self.pos += 1;
        let n = self.names.len();
        match tok {
            Tok::Num(q) => Ok(Poly::constant(n, q)),
            Tok::Ident(name) => match self.names.iter().position(|x| *x == name) {
                Some(i) => Ok(Poly::var(n, i)),
                None => Err(err(col, format!("unknown coordinate `{name}`"))),
            },
            Tok::LParen => {
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(err(self.column(), "expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => Err(err(col, "expected a number, coordinate or `(`")),
        }
    }
}

/// Parses `src` as a polynomial in the named coordinates.
pub fn parse_poly(src: &str, names: &[String]) -> Result<Poly, ExprError> {
    let toks = tokenize(src)?;
    let end = src.chars().count() + 1;
    let mut p = Parser { toks, pos: 0, names, end };
    let out = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(err(p.column(), "unexpected trailing input"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        ["s", "y", "x1"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_and_prints_canonically() {
        let n = names();
        let p = parse_poly("2*(s*y^3) - y^3*s + 1/2 - x1·x1", &n).unwrap();
        assert_eq!(p.display(&n).to_string(), "1/2 - x1^2 + s*y^3");
        assert_eq!(parse_poly("-(s - 1)^2", &n).unwrap().display(&n).to_string(), "-1 + 2*s - s^2");
        assert_eq!(parse_poly("0.25*y", &n).unwrap(), parse_poly("y/4", &n).unwrap());
        assert!(parse_poly("s - s", &n).unwrap().is_zero());
    }

    #[test]
    fn reports_columns() {
        let n = names();
        assert_eq!(parse_poly("s + z", &n).unwrap_err().column, 5);
        assert_eq!(parse_poly("s / y", &n).unwrap_err().column, 5);
        assert_eq!(parse_poly("(s + y", &n).unwrap_err().column, 7);
        assert_eq!(parse_poly("s^-1", &n).unwrap_err().column, 3);
        assert_eq!(parse_poly("s $", &n).unwrap_err().column, 3);
        assert!(parse_poly("", &n).is_err());
    }

    #[test]
    fn jets_agree_with_evaluation() {
        let n = names();
        let p = parse_poly("s*y^3 + 2*x1 - 3", &n).unwrap();
        let base = vec![Rational::integer(1), Rational::integer(2), Rational::new(1, 3)];
        let j: Jet<Rational> = p.to_jet(&base, 4).unwrap();
        assert_eq!(j.constant_term(), &p.eval(&base));
        // ∂_y (s y³) = 3 s y² = 12 at the base point
        assert_eq!(j.coeff(&[0, 1, 0]), Rational::integer(12));
    }
}
