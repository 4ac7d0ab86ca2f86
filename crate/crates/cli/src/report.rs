//! Deterministic JSON reports. Maps keep insertion order; exact numbers are
//! written as `"p/q"` strings, floats as JSON numbers.

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use willmore_core::{Float, Jet, Rational, Scalar, TensorJet};

use crate::spec::multi_index;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<Value>),
    Map(Vec<(String, Value)>),
}

impl Serialize for Value {
    fn serialize<Se: Serializer>(&self, s: Se) -> Result<Se::Ok, Se::Error> {
        match self {
            Value::Null => s.serialize_unit(),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Int(i) => s.serialize_i64(*i),
            Value::Float(x) => s.serialize_f64(*x),
            Value::Text(t) => s.serialize_str(t),
            Value::List(xs) => {
                let mut seq = s.serialize_seq(Some(xs.len()))?;
                for x in xs {
                    seq.serialize_element(x)?;
                }
                seq.end()
            }
            Value::Map(kv) => {
                let mut m = s.serialize_map(Some(kv.len()))?;
                for (k, v) in kv {
                    m.serialize_entry(k, v)?;
                }
                m.end()
            }
        }
    }
}

impl Value {
    pub fn to_json_pretty(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report values always serialize");
        out.push('\n');
        out
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Map(kv) => kv.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }
}

/// Scalars that can appear in reports.
pub trait ReportScalar: Scalar {
    fn to_value(&self) -> Value;
    /// Exact rational value, when the scalar has one.
    fn as_rational(&self) -> Option<Rational>;
}

impl ReportScalar for Rational {
    fn to_value(&self) -> Value {
        Value::Text(self.to_string())
    }
    fn as_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
}

impl ReportScalar for Float {
    fn to_value(&self) -> Value {
        Value::Float(self.0)
    }
    fn as_rational(&self) -> Option<Rational> {
        None
    }
}

/// `{multi-index: coefficient}` over the nonzero coefficients, in graded order.
pub fn jet_value<S: ReportScalar>(j: &Jet<S>) -> Value {
    Value::Map(
        j.terms()
            .filter(|(_, c)| !c.is_zero())
            .map(|(e, c)| (multi_index(e), c.to_value()))
            .collect(),
    )
}

fn component_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in shape {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

fn index_key(idx: &[usize]) -> String {
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// `{component: jet}` over the nonzero components.
pub fn tensor_value<S: ReportScalar>(t: &TensorJet<S>) -> Value {
    Value::Map(
        component_indices(t.shape())
            .into_iter()
            .filter(|i| !t.get(i).is_zero())
            .map(|i| (index_key(&i), jet_value(t.get(&i))))
            .collect(),
    )
}

/// `{component: value at the base point}` over the nonzero components.
pub fn tensor_at_point<S: ReportScalar>(t: &TensorJet<S>) -> Value {
    Value::Map(
        component_indices(t.shape())
            .into_iter()
            .filter(|i| !t.get(i).constant_term().is_zero())
            .map(|i| (index_key(&i), t.get(&i).constant_term().to_value()))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Failures of non-required checks are reported but do not fail the run.
    pub required: bool,
    pub detail: Option<Value>,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool) -> Self {
        Check { name: name.into(), passed, required: true, detail: None }
    }

    pub fn with_detail(mut self, v: Value) -> Self {
        self.detail = Some(v);
        self
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }

    fn to_value(&self) -> Value {
        let mut kv = vec![
            ("name".to_string(), Value::Text(self.name.clone())),
            ("passed".to_string(), Value::Bool(self.passed)),
            ("required".to_string(), Value::Bool(self.required)),
        ];
        if let Some(d) = &self.detail {
            kv.push(("detail".to_string(), d.clone()));
        }
        Value::Map(kv)
    }
}

/// Result of one command on one spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub input: Value,
    pub outputs: Vec<(String, Value)>,
    pub residuals: Vec<(String, Value)>,
    pub checks: Vec<Check>,
    /// Engine or validation error that stopped the command.
    pub error: Option<String>,
    pub timing_ms: Option<u128>,
}

impl Report {
    pub fn new(command: &str, input: Value) -> Self {
        Report {
            command: command.to_string(),
            input,
            outputs: Vec::new(),
            residuals: Vec::new(),
            checks: Vec::new(),
            error: None,
            timing_ms: None,
        }
    }

    pub fn output(&mut self, name: &str, v: Value) {
        self.outputs.push((name.to_string(), v));
    }

    pub fn residual(&mut self, name: &str, v: Value) {
        self.residuals.push((name.to_string(), v));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed || !c.required)
    }

    pub fn to_value(&self) -> Value {
        let mut kv = vec![
            ("command".to_string(), Value::Text(self.command.clone())),
            ("engine_version".to_string(), Value::Text(crate::ENGINE_VERSION.to_string())),
            ("input".to_string(), self.input.clone()),
            ("outputs".to_string(), Value::Map(self.outputs.clone())),
            ("residuals".to_string(), Value::Map(self.residuals.clone())),
            ("checks".to_string(), Value::List(self.checks.iter().map(Check::to_value).collect())),
            ("passed".to_string(), Value::Bool(self.passed())),
        ];
        if let Some(e) = &self.error {
            kv.push(("error".to_string(), Value::Text(e.clone())));
        }
        if let Some(t) = self.timing_ms {
            kv.push(("timing_ms".to_string(), Value::Int(t as i64)));
        }
        Value::Map(kv)
    }

    pub fn to_json(&self) -> String {
        self.to_value().to_json_pretty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_keep_insertion_order() {
        let v = Value::Map(vec![("z".into(), Value::Int(1)), ("a".into(), Value::Text("1/3".into()))]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"z":1,"a":"1/3"}"#);
    }

    #[test]
    fn jets_list_nonzero_coefficients() {
        let x = Jet::<Rational>::coordinate(2, 2, 1, Rational::new(1, 2)).unwrap();
        let j = &x * &x;
        let v = jet_value(&j);
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"0,0":"1/4","0,1":"1","0,2":"1"}"#
        );
    }
}
