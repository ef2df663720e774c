//! Acceptance suite: one PASS/FAIL line per criterion, with the measured value,
//! the pinned tolerance and the wall time against its budget.

use conical_spectra::cli::{run, Report, RunConfig};
use conical_spectra::zeta_det::{football_logdet_mellin, football_logdet_oracle};
use serde_json::Value;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn config(json: &str) -> RunConfig {
    RunConfig::from_json(json).expect("acceptance config is valid")
}

fn run_config(json: &str) -> Result<Report, String> {
    run(&config(json)).map_err(|e| e.to_string())
}

/// Summarizes the verdicts whose names start with one of `prefixes`.
fn verdicts(report: &Report, prefixes: &[&str]) -> Outcome {
    let picked: Vec<_> = report.verdicts.iter().filter(|v| prefixes.iter().any(|p| v.name.starts_with(p))).collect();
    let pass = !picked.is_empty() && picked.iter().all(|v| v.pass);
    let detail = picked
        .iter()
        .map(|v| format!("{}={:.2e}/{:.0e}{}", v.name, v.value, v.tolerance, if v.pass { "" } else { "!" }))
        .collect::<Vec<_>>()
        .join(" ");
    Outcome { pass, detail }
}

const FOOTBALL: &str = r#"{ "numerator": [[0, 0], [0, 0], [1, 0]], "denominator": [[1, 0]] }"#;
const F01: &str = r#"{ "family": "degree2", "z1": [0, 0], "z2": [1, 0] }"#;
const CUBIC: &str = r#"{ "numerator": [[-1, 0], [0.25, 0], [0, 1.7320508075688772], [0.1, 0]],
    "denominator": [[0, 0.15], [0, -1.7320508075688772], [0, 0], [1, 0]] }"#;

fn football_spectrum() -> Result<Outcome, String> {
    let r = run_config(&format!(r#"{{ "command": "spectrum", "map": {FOOTBALL}, "L": [24, 32, 40], "J": 14 }}"#))?;
    let mut out = verdicts(&r, &["football_eigenvalues"]);
    let sizes: Vec<usize> = r.results["spectra"][2]["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g.as_array().unwrap().len())
        .collect();
    let ok = sizes == [1, 2, 3, 4, 5];
    out.pass &= ok;
    out.detail.push_str(&format!(" multiplicities={sizes:?}{}", if ok { "" } else { "!" }));
    Ok(out)
}

fn zeta_calibration() -> Result<Outcome, String> {
    let r = run_config(&format!(r#"{{ "command": "logdet", "map": {FOOTBALL}, "L": [32, 40] }}"#))?;
    let mut out = verdicts(&r, &["football_oracle"]);
    let oracle = football_logdet_oracle(10).map_err(|e| e.to_string())?;
    let mellin = football_logdet_mellin(400.0, 0.25).map_err(|e| e.to_string())?;
    let spread = (oracle - mellin).abs();
    out.pass &= spread <= 1e-6;
    out.detail.push_str(&format!(" oracle_two_methods={spread:.2e}/1e-6"));
    Ok(out)
}

fn heat_coefficients() -> Result<Outcome, String> {
    let r = run_config(r#"{ "command": "heat-fit", "source": "football_exact" }"#)?;
    Ok(verdicts(&r, &["c_m1", "c_0", "c_mhalf", "log_t"]))
}

fn eq0_constancy() -> Result<Outcome, String> {
    let r = run_config(
        r#"{ "command": "verify-eq0", "L": [40, 48],
             "configs": [[[0, 0], [1, 0]], [[0, 0], [2, 0]], [[1, 0], [0, 2]], [[0.5, 0.5], [-1, 0]]] }"#,
    )?;
    Ok(verdicts(&r, &["eq0_constancy"]))
}

fn variational_system() -> Result<Outcome, String> {
    let r = run_config(&format!(r#"{{ "command": "verify-system", "map": {CUBIC}, "L": [40], "T": 0.2 }}"#))?;
    Ok(verdicts(&r, &["system_component_"]))
}

fn tau() -> Result<Outcome, String> {
    let segment = run_config(
        r#"{ "command": "tau",
             "path": { "family": "degree2", "nodes": [[[0, 0], [1, 0]], [[0, 0], [0.3, 2]], [[0, 0], [3, -1]]] } }"#,
    )?;
    let circle: Vec<String> = (0..=12)
        .map(|i| {
            let a = std::f64::consts::TAU * (i % 12) as f64 / 12.0;
            format!("[[0, 0], [{}, {}]]", 2.0 + 0.5 * a.cos(), 0.5 * a.sin())
        })
        .collect();
    let degree2_loop = run_config(&format!(
        r#"{{ "command": "tau", "path": {{ "family": "degree2", "nodes": [{}] }} }}"#,
        circle.join(",")
    ))?;
    let cubic_nodes: Vec<String> = (0..=16)
        .map(|i| {
            let a = std::f64::consts::TAU * (i % 16) as f64 / 16.0;
            let (re, im) = (0.25 + 0.05 * a.cos(), 0.05 * a.sin());
            format!(
                r#"{{ "numerator": [[-1, 0], [{re}, {im}], [0, 1.7320508075688772], [0.1, 0]],
                     "denominator": [[0, 0.15], [0, -1.7320508075688772], [0, 0], [1, 0]] }}"#
            )
        })
        .collect();
    let cubic_loop = run_config(&format!(
        r#"{{ "command": "tau", "path": {{ "family": "coeff_curve", "nodes": [{}] }} }}"#,
        cubic_nodes.join(",")
    ))?;
    let parts = [
        verdicts(&segment, &["n2_closed_form"]),
        verdicts(&degree2_loop, &["closed_loop"]),
        verdicts(&cubic_loop, &["closed_loop"]),
    ];
    Ok(Outcome {
        pass: parts.iter().all(|p| p.pass),
        detail: parts.iter().map(|p| p.detail.as_str()).collect::<Vec<_>>().join(" "),
    })
}

fn su2() -> Result<Outcome, String> {
    let r = run_config(&format!(r#"{{ "command": "verify-su2", "map": {F01}, "L": [32, 40], "seed": 11 }}"#))?;
    Ok(verdicts(&r, &["su2_"]))
}

fn perturbation_run() -> Result<Report, String> {
    run_config(&format!(r#"{{ "command": "verify-perturbation", "map": {F01}, "L": [40], "seed": 7 }}"#))
}

fn group_derivatives(r: &Report) -> Outcome {
    verdicts(r, &["group_"])
}

fn model_suite(r: &Report) -> Outcome {
    let mut out = verdicts(r, &["model_", "b_lambda_monotone"]);
    let b = &r.results["b_lambda"];
    let err = |v: &Value| v.as_f64().unwrap_or(f64::NAN);
    let errors: Vec<f64> = b["errors"].as_array().map(|a| a.iter().map(err).collect()).unwrap_or_default();
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    out.detail.push_str(&format!(" |b-binf|=[{}]", shown.join(", ")));
    out
}

fn report(index: usize, title: &str, limit: f64, start: Instant, result: Result<Outcome, String>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match result {
        Ok(o) => (o.pass && secs <= limit, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} [{index}] {title}: {detail} ({secs:.1} s, budget {limit:.0} s)",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn main() {
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "football spectrum exactness", 120.0, t, football_spectrum());
    let t = Instant::now();
    all &= report(2, "zeta pipeline calibration", 120.0, t, zeta_calibration());
    let t = Instant::now();
    all &= report(3, "heat-coefficient fits", 30.0, t, heat_coefficients());
    let t = Instant::now();
    all &= report(4, "log det formula constancy (N = 2)", 600.0, t, eq0_constancy());
    let t = Instant::now();
    all &= report(5, "variational system (N = 3)", 1200.0, t, variational_system());

    // one solve feeds both the group-derivative and the model-solution criteria
    let t = Instant::now();
    let pert = perturbation_run();
    let shared = t.elapsed();
    let t6 = Instant::now() - shared;
    all &= report(6, "eigenvalue group derivatives", 300.0, t6, pert.as_ref().map(group_derivatives).map_err(Clone::clone));

    let t = Instant::now();
    all &= report(7, "tau exactness and closed form", 60.0, t, tau());
    let t = Instant::now();
    all &= report(8, "SU(2) invariance", 300.0, t, su2());
    let t9 = Instant::now() - shared;
    all &= report(9, "model solution suite", 300.0, t9, pert.as_ref().map(model_suite).map_err(Clone::clone));

    if !all {
        std::process::exit(1);
    }
}
