//! Batch runs over a suite file: `{"name": ..., "instances": [spec, ...]}`.

use rayon::prelude::*;
use serde::Deserialize;

use crate::commands::{run_or_report, Command, RunOptions};
use crate::report::{Report, Value};
use crate::spec::MetricSpec;
use crate::{CliError, Overrides};

#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    pub specs: Vec<MetricSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    name: String,
    instances: Vec<serde_json::Value>,
}

pub fn parse_suite(text: &str) -> Result<Suite, CliError> {
    let raw: RawSuite = serde_json::from_str(text).map_err(CliError::from_json)?;
    let specs = raw
        .instances
        .into_iter()
        .enumerate()
        .map(|(i, v)| MetricSpec::from_value(v, text).map_err(|e| e.in_instance(i)))
        .collect::<Result<_, _>>()?;
    Ok(Suite { name: raw.name, specs })
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub command: String,
    pub reports: Vec<Report>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(Report::passed)
    }

    pub fn any_error(&self) -> bool {
        self.reports.iter().any(|r| r.error.is_some())
    }

    pub fn to_json(&self) -> String {
        Value::Map(vec![
            ("suite".into(), Value::Text(self.name.clone())),
            ("command".into(), Value::Text(self.command.clone())),
            ("engine_version".into(), Value::Text(crate::ENGINE_VERSION.into())),
            ("instances".into(), Value::Int(self.reports.len() as i64)),
            ("passed".into(), Value::Bool(self.passed())),
            ("reports".into(), Value::List(self.reports.iter().map(Report::to_value).collect())),
        ])
        .to_json_pretty()
    }
}

/// Runs every instance in parallel; reports keep the suite's order.
pub fn run_suite(cmd: Command, suite: &Suite, overrides: &Overrides, opts: RunOptions) -> SuiteReport {
    let reports = suite
        .specs
        .par_iter()
        .map(|spec| match overrides.apply(spec.clone()) {
            Ok(spec) => run_or_report(cmd, &spec, opts),
            Err(e) => {
                let mut r = Report::new(cmd.name(), spec.to_value());
                r.error = Some(e.to_string());
                r
            }
        })
        .collect();
    SuiteReport { name: suite.name.clone(), command: cmd.name().into(), reports }
}
