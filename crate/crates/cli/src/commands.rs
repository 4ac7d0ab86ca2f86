//! Command dispatch: each command evaluates one spec and fills a [`Report`].

use std::time::Instant;

use willmore_core::geometry::kulkarni_nomizu_gp;
use willmore_core::hypersurface::reduce_on_sigma;
use willmore_core::tractor::TractorBundle;
use willmore_core::{
    conormal_data, curvature_pack, fourth_form, i_squared, restrict, solve_singular_yamabe,
    third_form, tracefree_ii, willmore_invariant, CurvaturePack, EngineError, Float, HypersurfaceFrame, Jet,
    Rational, Scalar, SolverOptions, TensorJet,
};

use crate::report::{jet_value, tensor_at_point, tensor_value, Check, ReportScalar, Report, Value};
use crate::spec::{conformal_rescale, MetricSpec, Mode};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Curvature of the metric jet and decomposition identities.
    Curvature,
    /// Singular Yamabe normalization and the obstruction density.
    Yamabe,
    /// Obstruction density with the theorem and formula checks.
    Willmore,
    /// Trace-free second, third and fourth fundamental forms on the hypersurface.
    Forms,
    /// Recompute under the spec's rescale and compare with the weight law.
    Invariance,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Yamabe => "yamabe",
            Command::Willmore => "willmore",
            Command::Forms => "forms",
            Command::Invariance => "invariance",
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall time in the report. Off by default so reports are reproducible.
    pub timing: bool,
}

trait Provenance<T> {
    fn ctx(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> Provenance<T> for Result<T, EngineError> {
    fn ctx(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::engine(module, e))
    }
}

/// Runs `cmd` on `spec`. Engine failures carry the module they came from.
pub fn run_command(cmd: Command, spec: &MetricSpec, opts: RunOptions) -> Result<Report, CliError> {
    let start = Instant::now();
    let mut report = Report::new(cmd.name(), spec.to_value());
    match spec.mode {
        Mode::Rational => dispatch::<Rational>(cmd, spec, &mut report)?,
        Mode::Float => dispatch::<Float>(cmd, spec, &mut report)?,
    }
    if opts.timing {
        report.timing_ms = Some(start.elapsed().as_millis());
    }
    Ok(report)
}

/// Like [`run_command`], but records a failure inside the report.
pub fn run_or_report(cmd: Command, spec: &MetricSpec, opts: RunOptions) -> Report {
    run_command(cmd, spec, opts).unwrap_or_else(|e| {
        let mut r = Report::new(cmd.name(), spec.to_value());
        r.error = Some(e.to_string());
        r
    })
}

fn dispatch<S: ReportScalar>(cmd: Command, spec: &MetricSpec, report: &mut Report) -> Result<(), CliError> {
    match cmd {
        Command::Curvature => curvature::<S>(spec, report),
        Command::Yamabe => yamabe::<S>(spec, report),
        Command::Willmore => willmore::<S>(spec, report),
        Command::Forms => forms::<S>(spec, report),
        Command::Invariance => invariance::<S>(spec, report),
    }
}

fn pack_of<S: ReportScalar>(spec: &MetricSpec) -> Result<CurvaturePack<S>, CliError> {
    let m = spec.metric_jet::<S>().ctx("geometry")?;
    curvature_pack(&m).ctx("geometry")
}

/// Agreement up to the smaller valid order, with the scalar's own zero test.
fn agree<S: ReportScalar>(a: &Jet<S>, b: &Jet<S>) -> bool {
    let k = a.order().min(b.order());
    (&a.truncate(k) - &b.truncate(k)).is_zero()
}

fn first_nonzero<S: ReportScalar>(t: &TensorJet<S>) -> Option<Value> {
    t.components().iter().find(|c| !c.is_zero()).map(jet_value)
}

fn zero_check<S: ReportScalar>(name: &str, t: &TensorJet<S>) -> Check {
    let r = first_nonzero(t);
    let c = Check::new(name, r.is_none());
    match r {
        Some(v) => c.with_detail(v),
        None => c,
    }
}

/// Compares the expected `B(p)`, exactly or within the float tolerance.
fn expect_b<S: ReportScalar>(spec: &MetricSpec, got: &S, report: &mut Report) {
    let Some(want) = spec.expect.get("B") else { return };
    let passed = match got.as_rational() {
        Some(q) => q == *want,
        None => (got.to_f64() - want.to_f64()).abs() <= Float::TOLERANCE,
    };
    report.check(Check::new("expected_B", passed).with_detail(Value::Text(want.to_string())));
}

fn curvature<S: ReportScalar>(spec: &MetricSpec, report: &mut Report) -> Result<(), CliError> {
    let p = pack_of::<S>(spec)?;
    let m = &p.metric;
    report.output("scalar_curvature", jet_value(&p.sc));
    report.output("J", jet_value(&p.j));
    report.output("schouten", tensor_value(&p.schouten));
    report.output("weyl_at_p", tensor_at_point(p.weyl()));
    report.output("cotton_at_p", tensor_at_point(p.cotton().ctx("geometry")?));

    let decomposition = p
        .riemann()
        .sub(p.weyl())
        .and_then(|r| r.sub(&kulkarni_nomizu_gp(m.g(), &p.schouten)))
        .ctx("geometry")?;
    report.check(zero_check("riemann_equals_weyl_plus_g_wedge_p", &decomposition));
    let mut traces_vanish = true;
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        traces_vanish &= m.trace(p.weyl(), i, j).ctx("geometry")?.is_zero();
    }
    report.check(Check::new("weyl_trace_free", traces_vanish));
    let tr = m.trace(&p.schouten, 0, 1).ctx("geometry")?;
    let tr = tr.as_scalar().ctx("geometry")?;
    report.check(Check::new("schouten_trace_is_j", agree(tr, &p.j)));
    Ok(())
}

fn yamabe<S: ReportScalar>(spec: &MetricSpec, report: &mut Report) -> Result<(), CliError> {
    let p = pack_of::<S>(spec)?;
    let s = spec.defining_jet::<S>().ctx("spec")?;
    let sol = solve_singular_yamabe(&p, &s, SolverOptions::default()).ctx("yamabe")?;
    let d = spec.d;
    report.output("f", jet_value(&sol.f));
    report.output("sigma_tilde", jet_value(&sol.sigma_tilde));
    report.output("I_squared", jet_value(&sol.i2));
    report.output("residual_order", Value::Int(sol.residual_order as i64));
    report.output("pivot", Value::Text(spec.coordinates[sol.pivot].clone()));
    report.output("B_at_p", sol.b_at_sigma.constant_term().to_value());
    report.output("B_on_sigma", jet_value(&sol.b_at_sigma));

    let resid = &sol.i2 - &Jet::one(d, sol.i2.order());
    report.residual("I_squared_minus_one", jet_value(&resid));
    report.check(
        Check::new("residual_vanishes_to_order_d", sol.residual_order >= d)
            .with_detail(Value::Int(sol.residual_order as i64)),
    );
    let tb = TractorBundle::new(&p);
    let scale = tb.scale_tractor(&sol.sigma_tilde).ctx("tractor")?;
    let paired = tb.pair(&scale, &scale).ctx("tractor")?;
    let direct = i_squared(&p, &sol.sigma_tilde).ctx("yamabe")?;
    report.check(Check::new("i_squared_equals_tractor_pair", agree(&paired, &direct)));
    expect_b(spec, sol.b_at_sigma.constant_term(), report);
    Ok(())
}

fn willmore<S: ReportScalar>(spec: &MetricSpec, report: &mut Report) -> Result<(), CliError> {
    let m = spec.metric_jet::<S>().ctx("geometry")?;
    let s = spec.defining_jet::<S>().ctx("spec")?;
    let r = willmore_invariant(&m, &s).ctx("willmore")?;
    report.output("B_at_p", r.b_value.constant_term().to_value());
    report.output("B_on_sigma", jet_value(&r.b_value));
    report.output("ape_iioe_order", Value::Int(r.ape_iioe_order as i64));
    report.output("pivot", Value::Text(spec.coordinates[r.pivot].clone()));
    for c in &r.theorem_checks {
        let mut check = Check::new(c.name.clone(), c.passed);
        if !c.required {
            check = check.optional();
        }
        if let Some(res) = &c.residual {
            check = check.with_detail(jet_value(res));
        }
        report.check(check);
    }
    expect_b(spec, r.b_value.constant_term(), report);
    Ok(())
}

/// `(name, weight, tensor)` for the forms defined in this dimension.
fn form_list<S: ReportScalar>(
    p: &CurvaturePack<S>,
    f: &HypersurfaceFrame<S>,
) -> Result<Vec<(&'static str, i64, TensorJet<S>)>, CliError> {
    let d = p.dim();
    let mut out = vec![("IIo", 1, tracefree_ii(f, p).ctx("hypersurface")?)];
    if d >= 4 {
        out.push(("III", 0, third_form(p, f).ctx("forms")?.tensor));
    }
    if d >= 6 {
        out.push(("IV", -1, fourth_form(p, f).ctx("forms")?.tensor));
    }
    Ok(out)
}

fn forms<S: ReportScalar>(spec: &MetricSpec, report: &mut Report) -> Result<(), CliError> {
    let p = pack_of::<S>(spec)?;
    let s = spec.defining_jet::<S>().ctx("spec")?;
    let f = conormal_data(&p, &s).ctx("hypersurface")?;
    for (name, weight, t) in form_list(&p, &f)? {
        let on = reduce_on_sigma(&t, &f.s).ctx("hypersurface")?;
        report.output(&format!("{name}_weight"), Value::Int(weight));
        report.output(&format!("{name}_at_p"), tensor_at_point(&on));
        report.output(&format!("{name}_on_sigma"), tensor_value(&on));
        let trace = p.metric.trace(&t, 0, 1).ctx("geometry")?;
        let trace = reduce_on_sigma(&trace, &f.s).ctx("hypersurface")?;
        report.check(zero_check(&format!("{name}_trace_free_on_sigma"), &trace));
        let normal = f.n_up.outer(&t).and_then(|x| x.contract(0, 1)).ctx("hypersurface")?;
        let normal = reduce_on_sigma(&normal, &f.s).ctx("hypersurface")?;
        report.check(zero_check(&format!("{name}_tangential_on_sigma"), &normal));
        let swapped = t.permute(&[1, 0]).and_then(|x| x.sub(&t)).ctx("hypersurface")?;
        report.check(zero_check(&format!("{name}_symmetric"), &swapped));
    }
    Ok(())
}

fn power<S: ReportScalar>(om: &Jet<S>, k: i64) -> Result<Jet<S>, CliError> {
    if k >= 0 {
        Ok(om.powi(k as usize))
    } else {
        Ok(om.reciprocal().ctx("invariance")?.powi((-k) as usize))
    }
}

fn invariance<S: ReportScalar>(spec: &MetricSpec, report: &mut Report) -> Result<(), CliError> {
    let om = spec
        .rescale_jet::<S>()
        .ctx("spec")?
        .ok_or_else(|| CliError::Invalid("invariance needs a `rescale` factor".into()))?;
    let rescaled = conformal_rescale(spec)?;
    report.output("rescaled_input", rescaled.to_value());
    let d = spec.d as i64;

    let p = pack_of::<S>(spec)?;
    let p2 = pack_of::<S>(&rescaled)?;
    let s = spec.defining_jet::<S>().ctx("spec")?;
    let s2 = rescaled.defining_jet::<S>().ctx("spec")?;
    // the spec's own Ω²g must agree with the rescaled document
    let direct = p.metric.conformal_rescale(&om).ctx("geometry")?;
    let same = direct.matrix().iter().flatten().zip(p2.metric.matrix().iter().flatten()).all(|(a, b)| agree(a, b));
    report.check(Check::new("rescaled_metric_matches", same));

    // B: weight -d
    let a = solve_singular_yamabe(&p, &s, SolverOptions::default()).ctx("yamabe")?;
    let b = solve_singular_yamabe(&p2, &s2, SolverOptions::default()).ctx("yamabe")?;
    let moved = &a.b * &power(&om, -d)?;
    let (x, _) = restrict(&moved, &s).ctx("yamabe")?;
    let k = x.order().min(b.b_at_sigma.order());
    let diff = &x.truncate(k) - &b.b_at_sigma.truncate(k);
    report.output("B_at_p", a.b_at_sigma.constant_term().to_value());
    report.output("B_rescaled_at_p", b.b_at_sigma.constant_term().to_value());
    report.residual("B", diff.constant_term().to_value());
    report.check(Check::new("B_weight_minus_d", diff.is_zero()).with_detail(Value::Int(-d)));

    let f = conormal_data(&p, &s).ctx("hypersurface")?;
    let f2 = conormal_data(&p2, &s2).ctx("hypersurface")?;
    let before = form_list(&p, &f)?;
    let after = form_list(&p2, &f2)?;
    for ((name, w, t), (_, _, t2)) in before.into_iter().zip(after) {
        let moved = reduce_on_sigma(&t.mul_jet(&power(&om, w)?), &f.s).ctx("hypersurface")?;
        let other = reduce_on_sigma(&t2, &f2.s).ctx("hypersurface")?;
        let k = moved.order().min(other.order());
        let diff = moved.truncate(k).sub(&other.truncate(k)).ctx("hypersurface")?;
        report.residual(name, tensor_at_point(&diff));
        report.check(
            Check::new(format!("{name}_weight_{w}"), diff.is_zero()).with_detail(Value::Int(w)),
        );
    }
    Ok(())
}
