use std::path::PathBuf;
use std::process::Command as Process;

use proptest::prelude::*;
use serde_json::json;
use willmore_cli::{conformal_rescale, run_command, Command, MetricSpec, RunOptions, Value};

fn cubic_spec() -> String {
    std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/suites/example_d4_cubic.json")).unwrap()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("willmore-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run_bin(args: &[&str]) -> (String, String, i32) {
    let out = Process::new(env!("CARGO_BIN_EXE_willmore")).args(args).output().unwrap();
    (
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
        out.status.code().unwrap(),
    )
}

fn output<'a>(v: &'a Value, key: &str) -> &'a Value {
    v.get("outputs").and_then(|o| o.get(key)).unwrap_or_else(|| panic!("missing output {key}"))
}

fn monomial(names: &[&str], coeff: i64, exps: &[u32]) -> String {
    let mut parts = vec![coeff.to_string()];
    for (n, &e) in names.iter().zip(exps) {
        match e {
            0 => {}
            1 => parts.push(n.to_string()),
            _ => parts.push(format!("{n}^{e}")),
        }
    }
    parts.join("*")
}

/// Random spec document: identity plus small polynomial perturbations vanishing at the origin.
fn spec_document() -> impl Strategy<Value = serde_json::Value> {
    (3usize..=4)
        .prop_flat_map(|d| {
            let entries = d * (d + 1) / 2;
            (
                Just(d),
                prop::collection::vec(prop::collection::vec((-3i64..=3, prop::collection::vec(0u32..=2, d)), 0..3), entries),
                prop::collection::vec(-2i64..=2, 2),
                prop::option::of(1i64..=4),
            )
        })
        .prop_map(|(d, perturb, def, rescale)| {
            let names: Vec<String> = ["s", "u", "v", "w"][..d].iter().map(|s| s.to_string()).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let mut g = vec![vec![String::new(); d]; d];
            let mut k = 0;
            for a in 0..d {
                for b in a..d {
                    let mut terms: Vec<String> = perturb[k]
                        .iter()
                        .filter(|(c, e)| *c != 0 && e.iter().any(|&x| x > 0))
                        .map(|(c, e)| monomial(&refs, *c, e))
                        .collect();
                    if a == b {
                        terms.insert(0, "1".into());
                    }
                    g[a][b] = if terms.is_empty() { "0".into() } else { terms.join(" + ") };
                    g[b][a] = g[a][b].clone();
                    k += 1;
                }
            }
            let mut doc = json!({
                "d": d,
                "coordinates": names,
                "metric": g,
                "defining_function": format!("s + ({})*u^2 + ({})*s*u", def[0], def[1]),
            });
            if let Some(r) = rescale {
                doc["rescale"] = json!(format!("{r}/2 + u"));
            }
            doc
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonical_json_is_a_fixed_point(doc in spec_document()) {
        let spec = MetricSpec::parse(&doc.to_string()).unwrap();
        let once = spec.to_json();
        let again = MetricSpec::parse(&once).unwrap();
        prop_assert_eq!(&again, &spec);
        prop_assert_eq!(again.to_json(), once);
    }
}

#[test]
fn constant_rescale_scales_b_by_inverse_power() {
    let mut doc: serde_json::Value = serde_json::from_str(&cubic_spec()).unwrap();
    doc["rescale"] = json!("2");
    let spec = MetricSpec::parse(&doc.to_string()).unwrap();
    let rescaled = conformal_rescale(&spec).unwrap();
    let opts = RunOptions::default();
    let b = run_command(Command::Willmore, &rescaled, opts).unwrap().to_value();
    assert_eq!(output(&b, "B_at_p"), &Value::Text("1/48".into()));
    let inv = run_command(Command::Invariance, &spec, opts).unwrap();
    assert!(inv.passed(), "{}", inv.to_json());
}

#[test]
fn nonconstant_rescale_passes_the_weight_checks() {
    let spec = MetricSpec::parse(&cubic_spec()).unwrap();
    let report = run_command(Command::Invariance, &spec, RunOptions::default()).unwrap();
    assert!(report.passed(), "{}", report.to_json());
    for name in ["B_weight_minus_d", "IIo_weight_1", "III_weight_0"] {
        assert!(report.checks.iter().any(|c| c.name == name && c.passed), "{name}");
    }
}

#[test]
fn float_mode_agrees_with_rational_mode() {
    let spec = MetricSpec::parse(&cubic_spec()).unwrap();
    let exact = run_command(Command::Yamabe, &spec, RunOptions::default()).unwrap().to_value();
    let mut fspec = spec.clone();
    fspec.mode = willmore_cli::Mode::Float;
    let approx = run_command(Command::Yamabe, &fspec, RunOptions::default()).unwrap().to_value();
    assert_eq!(output(&exact, "B_at_p"), &Value::Text("1/3".into()));
    match output(&approx, "B_at_p") {
        Value::Float(x) => assert!((x - 1.0 / 3.0).abs() < 1e-9, "{x}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn exit_codes_follow_the_outcome() {
    let good = temp_file("good.json", &cubic_spec());
    let (stdout, _, code) = run_bin(&["willmore", good.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.ends_with('\n') && stdout.contains("\"passed\": true"));

    let wrong = temp_file("wrong.json", &cubic_spec().replace("\"1/3\"", "\"1/4\""));
    let (stdout, _, code) = run_bin(&["willmore", wrong.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stdout.contains("\"passed\": false"));

    let (_, stderr, code) = run_bin(&["willmore", good.to_str().unwrap(), "--order", "2"]);
    assert_eq!(code, 3);
    assert!(stderr.contains("insufficient jet order"), "{stderr}");

    let (_, _, code) = run_bin(&["willmore", "/nonexistent/spec.json"]);
    assert_eq!(code, 2);
}

#[test]
fn parse_errors_carry_line_and_column() {
    let doc = "{\n  \"d\": 3,\n  \"metric\": [[\"1\",\"0\",\"0\"],[\"0\",\"1\",\"0\"],[\"0\",\"0\",\"1\"]],\n  \"defining_function\": \"s + q\"\n}\n";
    let path = temp_file("unknown.json", doc);
    let (stdout, stderr, code) = run_bin(&["curvature", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stdout.is_empty());
    assert!(stderr.contains("line 4, column 29") && stderr.contains("unknown coordinate"), "{stderr}");

    let path = temp_file("truncated.json", "{\n  \"d\": 3,\n  \"metric\": [\n");
    let (_, stderr, code) = run_bin(&["curvature", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 4"), "{stderr}");
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let good = temp_file("out_src.json", &cubic_spec());
    let dest = good.with_file_name("report.json");
    let (stdout, _, code) = run_bin(&["forms", good.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (quiet, _, code) = run_bin(&["forms", good.to_str().unwrap(), "--out", dest.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(quiet.is_empty());
    assert_eq!(std::fs::read_to_string(dest).unwrap(), stdout);
}

#[test]
fn base_point_override_moves_the_evaluation() {
    let good = temp_file("moved.json", &cubic_spec());
    let (stdout, _, code) = run_bin(&["yamabe", good.to_str().unwrap(), "--base-point", "0,1,0,0"]);
    // 5/6 at y = 1 against the shipped expectation of 1/3
    assert_eq!(code, 1);
    assert!(stdout.contains("\"B_at_p\": \"5/6\""), "{stdout}");
}
