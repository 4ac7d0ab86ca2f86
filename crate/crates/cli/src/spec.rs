//! Metric specifications: JSON documents describing a metric jet, a defining
//! function and optional conformal factor at a base point.

use std::collections::BTreeMap;

use serde::Deserialize;
use willmore_core::{EngineError, Jet, MetricJet, Rational, Scalar};

use crate::expr::{parse_poly, Poly};
use crate::report::Value;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rational,
    Float,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rational => "rational",
            Mode::Float => "float",
        }
    }
}

/// One metric component: a polynomial, or Taylor coefficients at the base
/// point keyed by exponent multi-index (`"1,0,2,0"`), for non-polynomial data.
#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Poly(Poly),
    Table(BTreeMap<Vec<u8>, Rational>),
}

impl Entry {
    fn to_jet<S: Scalar>(&self, d: usize, base: &[Rational], order: usize) -> Result<Jet<S>, EngineError> {
        match self {
            Entry::Poly(p) => p.to_jet(base, order),
            Entry::Table(t) => Jet::from_terms(d, order, t.iter().map(|(e, c)| (e.as_slice(), S::from_rational(c)))),
        }
    }

    fn is_table(&self) -> bool {
        matches!(self, Entry::Table(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub name: Option<String>,
    pub d: usize,
    /// Jet order `N`.
    pub order: usize,
    pub mode: Mode,
    pub coordinates: Vec<String>,
    pub metric: Vec<Vec<Entry>>,
    pub defining_function: Poly,
    pub base_point: Vec<Rational>,
    pub rescale: Option<Poly>,
    /// Expected values checked by the commands, e.g. `{"B": "1/3"}`.
    pub expect: BTreeMap<String, Rational>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Int(i64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Int(i64),
    Text(String),
    Table(BTreeMap<String, RawNumber>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: Option<String>,
    d: usize,
    order: Option<usize>,
    mode: Option<Mode>,
    coordinates: Option<Vec<String>>,
    metric: Vec<Vec<RawEntry>>,
    defining_function: Option<String>,
    base_point: Option<Vec<RawNumber>>,
    rescale: Option<String>,
    expect: Option<BTreeMap<String, RawNumber>>,
}

/// Locates errors inside string values of the source document.
struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    /// Line and column of character `offset` (0-based) inside the first
    /// occurrence of `needle` as a JSON string literal.
    fn find(&self, needle: &str, offset: usize) -> (usize, usize) {
        let quoted = serde_json::to_string(needle).unwrap_or_default();
        let Some(start) = self.text.find(&quoted) else {
            return (0, 0);
        };
        let before = &self.text[..start];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let col = self.text[line_start..start].chars().count() + 2 + offset;
        (line, col)
    }

    fn expr_error(&self, field: &str, src: &str, e: crate::expr::ExprError) -> CliError {
        let (line, column) = self.find(src, e.column - 1);
        CliError::Parse { line, column, message: format!("{field}: {}", e.message) }
    }

    fn invalid(&self, field: &str, src: Option<&str>, message: impl Into<String>) -> CliError {
        let (line, column) = src.map_or((0, 0), |s| self.find(s, 0));
        CliError::Parse { line, column, message: format!("{field}: {}", message.into()) }
    }
}

fn default_coordinates(d: usize) -> Vec<String> {
    let mut names = vec!["s".to_string(), "y".to_string()];
    names.extend((1..d.saturating_sub(1)).map(|i| format!("x{i}")));
    names.truncate(d);
    names
}

fn parse_rational(loc: &Locator, field: &str, raw: &RawNumber) -> Result<Rational, CliError> {
    match raw {
        RawNumber::Int(v) => Ok(Rational::integer(*v)),
        RawNumber::Text(t) => t.parse().map_err(|_| loc.invalid(field, Some(t), format!("invalid rational `{t}`"))),
    }
}

fn parse_key(loc: &Locator, field: &str, key: &str, d: usize) -> Result<Vec<u8>, CliError> {
    let parts: Option<Vec<u8>> = key.split(',').map(|p| p.trim().parse().ok()).collect();
    match parts {
        Some(e) if e.len() == d => Ok(e),
        _ => Err(loc.invalid(field, Some(key), format!("multi-index `{key}` must list {d} exponents"))),
    }
}

impl MetricSpec {
    /// Parses and validates a JSON metric specification.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(CliError::from_json)?;
        Self::from_value(value, text)
    }

    /// Validates an already-decoded document; `source` is used to locate errors.
    pub fn from_value(value: serde_json::Value, source: &str) -> Result<Self, CliError> {
        let loc = Locator { text: source };
        let raw: RawSpec = serde_json::from_value(value).map_err(|e| CliError::Parse {
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        let d = raw.d;
        if d < 3 {
            return Err(CliError::Invalid(format!("d = {d}: need at least 3 dimensions")));
        }
        let coordinates = raw.coordinates.unwrap_or_else(|| default_coordinates(d));
        if coordinates.len() != d {
            return Err(CliError::Invalid(format!("{} coordinate names for d = {d}", coordinates.len())));
        }
        for (i, c) in coordinates.iter().enumerate() {
            let ok = c.chars().next().is_some_and(|x| x.is_alphabetic() || x == '_')
                && c.chars().all(|x| x.is_alphanumeric() || x == '_');
            if !ok {
                return Err(loc.invalid("coordinates", Some(c), format!("`{c}` is not an identifier")));
            }
            if coordinates[..i].contains(c) {
                return Err(loc.invalid("coordinates", Some(c), format!("`{c}` declared twice")));
            }
        }
        let poly = |field: &str, src: &str| parse_poly(src, &coordinates).map_err(|e| loc.expr_error(field, src, e));

        if raw.metric.len() != d || raw.metric.iter().any(|r| r.len() != d) {
            return Err(CliError::Invalid(format!("metric must be a {d}x{d} table")));
        }
        let mut metric = Vec::with_capacity(d);
        for (a, row) in raw.metric.iter().enumerate() {
            let mut out = Vec::with_capacity(d);
            for (b, e) in row.iter().enumerate() {
                let field = format!("metric[{a}][{b}]");
                out.push(match e {
                    RawEntry::Int(v) => Entry::Poly(Poly::constant(d, Rational::integer(*v))),
                    RawEntry::Text(t) => Entry::Poly(poly(&field, t)?),
                    RawEntry::Table(t) => {
                        let mut table = BTreeMap::new();
                        for (k, v) in t {
                            let c = parse_rational(&loc, &field, v)?;
                            if !c.is_zero() {
                                table.insert(parse_key(&loc, &field, k, d)?, c);
                            }
                        }
                        Entry::Table(table)
                    }
                });
            }
            metric.push(out);
        }
        let defining_function = match &raw.defining_function {
            Some(t) => poly("defining_function", t)?,
            None => Poly::var(d, 0),
        };
        let rescale = raw.rescale.as_deref().map(|t| poly("rescale", t)).transpose()?;
        let base_point = match &raw.base_point {
            Some(v) if v.len() != d => {
                return Err(CliError::Invalid(format!("base_point has {} entries for d = {d}", v.len())))
            }
            Some(v) => v.iter().map(|x| parse_rational(&loc, "base_point", x)).collect::<Result<_, _>>()?,
            None => vec![Rational::zero(); d],
        };
        let expect = raw
            .expect
            .unwrap_or_default()
            .iter()
            .map(|(k, v)| Ok((k.clone(), parse_rational(&loc, "expect", v)?)))
            .collect::<Result<_, CliError>>()?;
        let spec = MetricSpec {
            name: raw.name,
            d,
            order: raw.order.unwrap_or(d + 2),
            mode: raw.mode.unwrap_or(Mode::Rational),
            coordinates,
            metric,
            defining_function,
            base_point,
            rescale,
            expect,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Symmetry, nondegeneracy and defining-function checks.
    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.d;
        for a in 0..d {
            for b in a + 1..d {
                let (x, y) = (&self.metric[a][b], &self.metric[b][a]);
                let same = x == y || {
                    let jx: Jet<Rational> = x.to_jet(d, &self.base_point, self.order)?;
                    jx == y.to_jet(d, &self.base_point, self.order)?
                };
                if !same {
                    return Err(CliError::Invalid(format!(
                        "metric is not symmetric: entries ({a},{b}) and ({b},{a}) differ"
                    )));
                }
            }
        }
        MetricJet::new(self.metric_jets::<Rational>(0)?).map_err(|e| match e {
            EngineError::NotPositiveDefinite => {
                CliError::Invalid("metric is not positive definite at the base point".into())
            }
            e => CliError::engine("spec", e),
        })?;
        if !self.defining_function.eval(&self.base_point).is_zero() {
            return Err(CliError::Invalid("defining_function does not vanish at the base point".into()));
        }
        let s: Jet<Rational> = self.defining_function.to_jet(&self.base_point, 1)?;
        if s.is_zero() {
            return Err(CliError::Invalid("defining_function has zero differential at the base point".into()));
        }
        if let Some(k) = self.expect.keys().find(|k| k.as_str() != "B") {
            return Err(CliError::Invalid(format!("unknown expectation `{k}` (supported: B)")));
        }
        if let Some(om) = &self.rescale {
            if om.eval(&self.base_point).signum() <= 0 {
                return Err(CliError::Invalid("rescale must be positive at the base point".into()));
            }
        }
        Ok(())
    }

    fn metric_jets<S: Scalar>(&self, order: usize) -> Result<Vec<Vec<Jet<S>>>, EngineError> {
        self.metric
            .iter()
            .map(|row| row.iter().map(|e| e.to_jet(self.d, &self.base_point, order)).collect())
            .collect()
    }

    pub fn metric_jet<S: Scalar>(&self) -> Result<MetricJet<S>, EngineError> {
        MetricJet::new(self.metric_jets(self.order)?)
    }

    pub fn defining_jet<S: Scalar>(&self) -> Result<Jet<S>, EngineError> {
        self.defining_function.to_jet(&self.base_point, self.order)
    }

    pub fn rescale_jet<S: Scalar>(&self) -> Result<Option<Jet<S>>, EngineError> {
        self.rescale.as_ref().map(|p| p.to_jet(&self.base_point, self.order)).transpose()
    }

    /// Moves the expansion point. Coefficient tables are tied to their base point.
    pub fn with_base_point(mut self, p: Vec<Rational>) -> Result<Self, CliError> {
        if p.len() != self.d {
            return Err(CliError::Invalid(format!("base point has {} entries for d = {}", p.len(), self.d)));
        }
        if p != self.base_point && self.metric.iter().flatten().any(Entry::is_table) {
            return Err(CliError::Invalid("coefficient tables cannot be moved to another base point".into()));
        }
        self.base_point = p;
        self.validate()?;
        Ok(self)
    }

    /// Canonical JSON form; parsing it gives back an equal spec.
    pub fn to_value(&self) -> Value {
        let names = &self.coordinates;
        let entry = |e: &Entry| match e {
            Entry::Poly(p) => Value::Text(p.display(names).to_string()),
            Entry::Table(t) => Value::Map(
                t.iter()
                    .map(|(k, c)| (multi_index(k), Value::Text(c.to_string())))
                    .collect(),
            ),
        };
        let mut fields = Vec::new();
        if let Some(n) = &self.name {
            fields.push(("name".to_string(), Value::Text(n.clone())));
        }
        fields.push(("d".into(), Value::Int(self.d as i64)));
        fields.push(("order".into(), Value::Int(self.order as i64)));
        fields.push(("mode".into(), Value::Text(self.mode.name().into())));
        fields.push(("coordinates".into(), Value::List(names.iter().map(|c| Value::Text(c.clone())).collect())));
        fields.push((
            "metric".into(),
            Value::List(self.metric.iter().map(|r| Value::List(r.iter().map(entry).collect())).collect()),
        ));
        fields.push(("defining_function".into(), Value::Text(self.defining_function.display(names).to_string())));
        fields.push((
            "base_point".into(),
            Value::List(self.base_point.iter().map(|x| Value::Text(x.to_string())).collect()),
        ));
        if let Some(om) = &self.rescale {
            fields.push(("rescale".into(), Value::Text(om.display(names).to_string())));
        }
        if !self.expect.is_empty() {
            fields.push((
                "expect".into(),
                Value::Map(self.expect.iter().map(|(k, v)| (k.clone(), Value::Text(v.to_string()))).collect()),
            ));
        }
        Value::Map(fields)
    }

    pub fn to_json(&self) -> String {
        self.to_value().to_json_pretty()
    }
}

pub fn multi_index(e: &[u8]) -> String {
    e.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
}

/// `(Ω² g, Ω s)` for the spec's `rescale` factor `Ω`. Polynomial entries are
/// multiplied exactly; coefficient tables are multiplied as jets and truncated
/// at the spec's order. The result has no rescale and no expectations.
pub fn conformal_rescale(spec: &MetricSpec) -> Result<MetricSpec, CliError> {
    let om = spec
        .rescale
        .as_ref()
        .ok_or_else(|| CliError::Invalid("conformal rescale needs a `rescale` factor".into()))?;
    if om.eval(&spec.base_point).signum() <= 0 {
        return Err(CliError::engine("conformal_rescale", EngineError::NotPositive("conformal factor")));
    }
    let om2 = om.mul(om);
    let om2_jet: Jet<Rational> = om2.to_jet(&spec.base_point, spec.order)?;
    let metric = spec
        .metric
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| match e {
                    Entry::Poly(p) => Ok(Entry::Poly(om2.mul(p))),
                    Entry::Table(_) => {
                        let j = &om2_jet * &e.to_jet::<Rational>(spec.d, &spec.base_point, spec.order)?;
                        Ok(Entry::Table(
                            j.terms().filter(|(_, c)| !c.is_zero()).map(|(k, c)| (k.to_vec(), c.clone())).collect(),
                        ))
                    }
                })
                .collect::<Result<Vec<_>, EngineError>>()
        })
        .collect::<Result<Vec<_>, EngineError>>()?;
    let out = MetricSpec {
        name: spec.name.as_ref().map(|n| format!("{n} (rescaled)")),
        metric,
        defining_function: om.mul(&spec.defining_function),
        rescale: None,
        expect: BTreeMap::new(),
        ..spec.clone()
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(f: &str) -> String {
        format!(
            r#"{{"d": 4, "coordinates": ["s", "y", "x1", "x2"],
  "metric": [["1", "s*({f})", 0, 0], ["s*({f})", "1", 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]}}"#
        )
    }

    #[test]
    fn example_metric_parses() {
        let spec = MetricSpec::parse(&example("y^3")).unwrap();
        assert_eq!(spec.order, 6);
        assert_eq!(spec.mode, Mode::Rational);
        let Entry::Poly(p) = &spec.metric[0][1] else { panic!() };
        assert_eq!(p.display(&spec.coordinates).to_string(), "s*y^3");
        assert_eq!(spec.defining_function, Poly::var(4, 0));
    }

    #[test]
    fn rejects_invalid_documents() {
        let asym = r#"{"d": 3, "metric": [["1", "s", 0], [0, 1, 0], [0, 0, 1]]}"#;
        assert!(matches!(MetricSpec::parse(asym), Err(CliError::Invalid(m)) if m.contains("symmetric")));
        let degenerate = r#"{"d": 3, "metric": [[1, 1, 0], [1, 1, 0], [0, 0, 1]]}"#;
        assert!(matches!(MetricSpec::parse(degenerate), Err(CliError::Invalid(m)) if m.contains("positive")));
        let unknown = "{\"d\": 3,\n \"metric\": [[1, 0, 0], [0, \"1 + q\", 0], [0, 0, 1]]}";
        match MetricSpec::parse(unknown) {
            Err(CliError::Parse { line, column, message }) => {
                assert_eq!((line, column), (2, 33), "{message}");
                assert!(message.contains("unknown coordinate `q`"));
            }
            other => panic!("{other:?}"),
        }
        match MetricSpec::parse("{\"d\": 3,\n \"metric\": [}") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let extra = r#"{"d": 3, "metric": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "colour": 1}"#;
        assert!(MetricSpec::parse(extra).is_err());
        let bad_s = r#"{"d": 3, "metric": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "defining_function": "s + 1"}"#;
        assert!(MetricSpec::parse(bad_s).is_err());
    }

    #[test]
    fn canonical_form_round_trips() {
        let spec = MetricSpec::parse(&example("y^2 + y^3")).unwrap();
        let text = spec.to_json();
        let again = MetricSpec::parse(&text).unwrap();
        assert_eq!(again, spec);
        assert_eq!(again.to_json(), text);
    }

    #[test]
    fn unit_rescale_is_the_identity() {
        let mut spec = MetricSpec::parse(&example("y^3")).unwrap();
        spec.rescale = Some(Poly::constant(4, Rational::one()));
        let out = conformal_rescale(&spec).unwrap();
        assert_eq!(out.metric, spec.metric);
        assert_eq!(out.defining_function, spec.defining_function);
        spec.rescale = Some(Poly::constant(4, Rational::integer(-1)));
        assert!(conformal_rescale(&spec).is_err());
    }

    #[test]
    fn tables_and_polynomials_agree() {
        let table = r#"{"d": 3, "metric": [[1, 0, 0], [0, {"0,0,0": 1, "2,0,0": "1/2"}, 0], [0, 0, 1]]}"#;
        let poly = r#"{"d": 3, "metric": [[1, 0, 0], [0, "1 + s^2/2", 0], [0, 0, 1]]}"#;
        let a = MetricSpec::parse(table).unwrap();
        let b = MetricSpec::parse(poly).unwrap();
        assert_eq!(a.metric_jet::<Rational>().unwrap().matrix(), b.metric_jet::<Rational>().unwrap().matrix());
        assert_eq!(MetricSpec::parse(&a.to_json()).unwrap(), a);
        assert!(a.clone().with_base_point(vec![Rational::zero(), Rational::one(), Rational::zero()]).is_err());
        assert!(b.with_base_point(vec![Rational::zero(), Rational::one(), Rational::zero()]).is_ok());
    }
}
