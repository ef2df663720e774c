//! Config-driven front end: each run reads a JSON `RunConfig`, dispatches one
//! command, and produces a `Report` with results and pass/fail verdicts.

use crate::local_frame::{frames, variational_rhs, FrameError};
use crate::perturbation::{
    b_lambda_with, extract_model_expansion, group_derivative_prediction, group_sum_derivative, model_b_a,
    model_residual, ModelParams, PerturbationError, DEFAULT_CUTOFF,
};
use crate::rational_map::{
    critical_data, critical_value_directions, free_coefficients, from_free_coefficients, rotate_target, validate,
    CriticalData, MapDescriptor, MapError, RationalMap, TargetRotation, DISTINCT_TOL,
};
use crate::spectral::{
    assemble, cone_coeffs, solve, solve_with, write_csv, SolveOptions, SpectralError, Spectrum, WeightField,
};
use crate::tau_genus0::{rhs_delta, tau2_n2, ModuliPath, PathFamily, TauError};
use crate::zeta_det::{
    adaptive_split, fit_heat_coeffs, football_logdet_oracle, football_spectrum, heat_trace, log_det_family,
    richardson, universal_model, DetResult, HeatModel, WeylTail, ZetaError,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("rational_map: {0}")]
    Map(#[from] MapError),
    #[error("local_frame: {0}")]
    Frame(#[from] FrameError),
    #[error("spectral: {0}")]
    Spectral(#[from] SpectralError),
    #[error("zeta_det: {0}")]
    Zeta(#[from] ZetaError),
    #[error("tau_genus0: {0}")]
    Tau(#[from] TauError),
    #[error("perturbation: {0}")]
    Perturbation(#[from] PerturbationError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Spectrum,
    HeatFit,
    Logdet,
    Schiffer,
    Tau,
    VerifyEq0,
    VerifySystem,
    VerifyPerturbation,
    VerifySu2,
}

/// Where heat-fit takes its eigenvalues from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    #[default]
    Galerkin,
    FootballExact,
}

/// Verification tolerances; every default is recorded in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub football_eigen_rel: f64,
    pub logdet_oracle_abs: f64,
    pub logdet_stability_abs: f64,
    pub heat_c_m1_rel: f64,
    pub heat_c0_rel: f64,
    pub heat_c_mhalf_abs: f64,
    pub heat_log_abs: f64,
    pub eq0_constancy: f64,
    pub system_rel: f64,
    pub perturbation_rel: f64,
    /// errors below this are treated as discretization noise when checking the step trend
    pub perturbation_floor: f64,
    pub tau_closed_form: f64,
    pub tau_loop: f64,
    pub su2_spectrum_rel: f64,
    pub su2_uncertainty_factor: f64,
    pub su2_rhs: f64,
    pub model_residual: f64,
    pub model_b: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            football_eigen_rel: 1e-4,
            logdet_oracle_abs: 1e-2,
            logdet_stability_abs: 1e-2,
            heat_c_m1_rel: 0.02,
            heat_c0_rel: 0.05,
            heat_c_mhalf_abs: 0.02,
            heat_log_abs: 0.02,
            eq0_constancy: 2e-2,
            system_rel: 3e-2,
            perturbation_rel: 1e-2,
            perturbation_floor: 1e-4,
            tau_closed_form: 1e-8,
            tau_loop: 1e-7,
            su2_spectrum_rel: 1e-8,
            su2_uncertainty_factor: 2.0,
            su2_rhs: 1e-7,
            model_residual: 1e-6,
            model_b: 1e-6,
        }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_degrees() -> Vec<usize> {
    vec![32, 40]
}
fn default_group_tol() -> f64 {
    1e-5
}
fn default_steps() -> Vec<f64> {
    vec![1e-3, 5e-4]
}
fn default_fd_step() -> f64 {
    0.02
}
fn default_lambdas() -> Vec<f64> {
    vec![-50.0, -200.0]
}
fn default_nus() -> Vec<f64> {
    vec![0.25, 0.3, 0.7, 1.2]
}
fn default_window() -> (f64, f64) {
    (0.005, 0.2)
}
fn default_nu_max() -> f64 {
    200.0
}
fn default_groups() -> usize {
    3
}
fn default_rotations() -> usize {
    2
}

/// One run. Unknown fields are rejected; omitted fields take the defaults
/// shown by `RunConfig::resolved`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub command: Command,
    #[serde(default)]
    pub map: Option<MapDescriptor>,
    /// degree-2 configurations (z1, z2) for batch commands
    #[serde(default)]
    pub configs: Option<Vec<[C64; 2]>>,
    #[serde(default)]
    pub path: Option<ModuliPath>,
    #[serde(rename = "L", default = "default_degrees")]
    pub degrees: Vec<usize>,
    /// number of eigenvalues above the zero mode to report; default is the
    /// reliable third of the basis for determinants and 20 otherwise
    #[serde(rename = "J", default)]
    pub j: Option<usize>,
    /// Mellin split point; default adapts to the closest critical values
    #[serde(rename = "T", default)]
    pub split: Option<f64>,
    #[serde(default = "default_group_tol")]
    pub group_tol: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source: SpectrumSource,
    /// heat-fit window in t
    #[serde(default = "default_window")]
    pub window: (f64, f64),
    #[serde(default = "default_nu_max")]
    pub nu_max: f64,
    /// critical point index for perturbation checks
    #[serde(default)]
    pub cone: usize,
    /// step sizes for lambda-group finite differences, largest first
    #[serde(default = "default_steps")]
    pub steps: Vec<f64>,
    /// number of nonzero lambda-groups checked
    #[serde(default = "default_groups")]
    pub groups: usize,
    /// step for log det finite differences in critical values
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_nus")]
    pub nus: Vec<f64>,
    /// random target rotations for verify-su2
    #[serde(default = "default_rotations")]
    pub rotations: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// The config with every default made explicit.
    pub fn resolved(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn check(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.degrees.is_empty() || self.degrees.iter().any(|&l| l < 2) {
            return Err(CliError::Config("L must list degrees >= 2".into()));
        }
        if let Some(t) = self.split {
            if !(t > 0.0) {
                return Err(CliError::Config("T must be positive".into()));
            }
        }
        let needs_map = matches!(
            self.command,
            Command::Validate
                | Command::Spectrum
                | Command::Logdet
                | Command::Schiffer
                | Command::VerifySystem
                | Command::VerifyPerturbation
                | Command::VerifySu2
        ) || (self.command == Command::HeatFit && self.source == SpectrumSource::Galerkin);
        if needs_map && self.map.is_none() {
            return Err(CliError::Config(format!("command {:?} needs a map", self.command)));
        }
        if self.command == Command::Tau && self.path.is_none() {
            return Err(CliError::Config("command tau needs a path".into()));
        }
        if self.command == Command::VerifyEq0 && self.configs.as_ref().map_or(true, |c| c.len() < 2) {
            return Err(CliError::Config("verify-eq0 needs at least two configs".into()));
        }
        Ok(())
    }

    fn sorted_degrees(&self) -> Vec<usize> {
        let mut d = self.degrees.clone();
        d.sort_unstable();
        d.dedup();
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub method: String,
    pub pass: bool,
}

impl Verdict {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64, method: impl Into<String>) -> Self {
        Verdict { name: name.into(), value, tolerance, method: method.into(), pass: value <= tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: Command,
    pub inputs: Value,
    pub results: Value,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub pass: bool,
    pub timing: Timing,
    /// CSV tables keyed by file name
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

impl Report {
    /// Process exit code: 0 when every verdict passes, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }

    /// Writes report.json and the CSV tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(dir.join("report.json"), text)?;
        for (name, body) in &self.tables {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

struct Outcome {
    results: Value,
    verdicts: Vec<Verdict>,
    warnings: Vec<String>,
    tables: Vec<(String, String)>,
}

impl Outcome {
    fn new(results: Value) -> Self {
        Outcome { results, verdicts: Vec::new(), warnings: Vec::new(), tables: Vec::new() }
    }
}

/// Runs one config on a pool of `threads` workers (all cores when None).
pub fn run_with_threads(config: &RunConfig, threads: Option<usize>) -> Result<Report, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| run(config))
}

pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    config.check()?;
    let start = Instant::now();
    let out = match config.command {
        Command::Validate => cmd_validate(config)?,
        Command::Spectrum => cmd_spectrum(config)?,
        Command::HeatFit => cmd_heat_fit(config)?,
        Command::Logdet => cmd_logdet(config)?,
        Command::Schiffer => cmd_schiffer(config)?,
        Command::Tau => cmd_tau(config)?,
        Command::VerifyEq0 => cmd_verify_eq0(config)?,
        Command::VerifySystem => cmd_verify_system(config)?,
        Command::VerifyPerturbation => cmd_verify_perturbation(config)?,
        Command::VerifySu2 => cmd_verify_su2(config)?,
    };
    let pass = out.verdicts.iter().all(|v| v.pass);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: config.command,
        inputs: config.resolved(),
        results: out.results,
        verdicts: out.verdicts,
        warnings: out.warnings,
        pass,
        timing: Timing { total_seconds: start.elapsed().as_secs_f64() },
        tables: out.tables,
    })
}

fn build_map(config: &RunConfig) -> Result<RationalMap, CliError> {
    let desc = config.map.as_ref().ok_or_else(|| CliError::Config("missing map".into()))?;
    Ok(desc.build()?)
}

fn min_chordal(data: &CriticalData) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..data.len() {
        for j in 0..i {
            d = d.min(data.values[i].chordal(data.values[j]));
        }
    }
    d
}

/// A degree-2 map with antipodal critical values is isometric to the football.
fn is_football(map: &RationalMap, data: &CriticalData) -> bool {
    map.degree == 2 && data.len() == 2 && (data.values[0].chordal(data.values[1]) - 2.0).abs() < 1e-9
}

fn reliable_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1) / 3
}

fn spectra_over_degrees(map: &RationalMap, degrees: &[usize], j: usize, tol: f64) -> Result<Vec<Spectrum>, CliError> {
    let wf = WeightField::new(map.clone());
    degrees
        .par_iter()
        .map(|&l| Ok(solve(&wf, l, j.min(reliable_count(l).saturating_sub(1)), tol)?))
        .collect()
}

fn to_csv(spec: &Spectrum) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_csv(spec, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn cmd_validate(config: &RunConfig) -> Result<Outcome, CliError> {
    let map = build_map(config)?;
    let data = critical_data(&map, DISTINCT_TOL)?;
    let report = validate(&map, &data);
    let mut out = Outcome::new(json!({ "degree": map.degree, "critical": data, "validation": report }));
    out.verdicts.push(Verdict {
        name: "solver_admissible".into(),
        value: if report.solver_admissible { 0.0 } else { 1.0 },
        tolerance: 0.0,
        method: "critical-point and pole checks".into(),
        pass: report.solver_admissible,
    });
    if !report.simple_hurwitz {
        out.warnings.extend(report.reasons.iter().cloned());
    }
    Ok(out)
}

fn cmd_spectrum(config: &RunConfig) -> Result<Outcome, CliError> {
    let map = build_map(config)?;
    let data = critical_data(&map, DISTINCT_TOL)?;
    let degrees = config.sorted_degrees();
    let j = config.j.unwrap_or(20);
    let spectra = spectra_over_degrees(&map, &degrees, j, config.group_tol)?;
    let count = spectra.iter().map(|s| s.values.len()).min().unwrap_or(0);
    let extrapolated: Vec<f64> = (0..count)
        .map(|i| richardson(&spectra.iter().map(|s| s.values[i]).collect::<Vec<_>>()))
        .collect();
    let mut out = Outcome::new(json!({
        "spectra": spectra.iter().map(|s| json!({
            "L": s.degree, "values": s.values, "groups": s.groups, "reliable": s.reliable, "ceiling": s.ceiling,
        })).collect::<Vec<_>>(),
        "extrapolated": extrapolated,
    }));
    for s in &spectra {
        out.warnings.extend(s.warnings.iter().cloned());
        out.tables.push((format!("spectrum_L{}.csv", s.degree), to_csv(s)?));
    }
    if is_football(&map, &data) {
        let exact = football_spectrum(((count as f64).sqrt().ceil() + 2.0).max(1.0))?;
        let worst = extrapolated
            .iter()
            .zip(&exact)
            .skip(1)
            .map(|(a, e)| (a - e).abs() / e)
            .fold(0.0, f64::max);
        out.verdicts.push(Verdict::at_most(
            "football_eigenvalues",
            worst,
            config.tolerances.football_eigen_rel,
            "Richardson over L vs nu(nu+1), max relative error",
        ));
    }
    Ok(out)
}

fn cmd_heat_fit(config: &RunConfig) -> Result<Outcome, CliError> {
    let tol = &config.tolerances;
    let mut warnings = Vec::new();
    let mut window = config.window;
    let (values, tail, reference, label, judged) = match config.source {
        SpectrumSource::FootballExact => {
            (football_spectrum(config.nu_max)?, None, universal_model(2, 2), "football exact".to_string(), true)
        }
        SpectrumSource::Galerkin => {
            let map = build_map(config)?;
            let degrees = config.sorted_degrees();
            if degrees.len() < 2 {
                return Err(CliError::Config("heat-fit on a Galerkin spectrum needs two degrees in L".into()));
            }
            let spectra = spectra_over_degrees(&map, &degrees[degrees.len() - 2..], usize::MAX, config.group_tol)?;
            let values = converged_prefix(&spectra[0].values, &spectra[1].values, 1e-4);
            let tail = weyl_tail_with_slope(&values, 1.0 / map.degree as f64)?;
            let t_min = 10.0 / tail.lambda_cut;
            if window.0 < t_min {
                warnings.push(format!(
                    "window start raised from {} to {t_min:.4} (converged spectrum ends at {:.2})",
                    window.0, tail.lambda_cut
                ));
                window = (t_min, window.1.max(4.0 * t_min));
            }
            let label = format!("Galerkin L={:?}, {} converged eigenvalues", &degrees[degrees.len() - 2..], values.len());
            warnings.push(
                "Galerkin traces are converged only for moderate t; fitted coefficients are diagnostic only".into(),
            );
            (values, Some(tail), universal_model(map.degree, 2 * map.degree - 2), label, false)
        }
    };
    let fit = fit_heat_coeffs(&values, tail.as_ref(), window, true)?;
    let mut out = Outcome::new(json!({ "source": label, "window": window, "fit": fit, "reference": reference }));
    out.warnings = warnings;
    if judged {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        out.verdicts.push(Verdict::at_most("c_m1", rel(fit.c_m1(), reference.c_m1()), tol.heat_c_m1_rel, "relative to area/(4 pi)"));
        out.verdicts.push(Verdict::at_most("c_0", rel(fit.c_0(), reference.c_0()), tol.heat_c0_rel, "relative to the exact constant term"));
        out.verdicts.push(Verdict::at_most("c_mhalf", fit.c_mhalf().abs(), tol.heat_c_mhalf_abs, "absolute, no boundary"));
        out.verdicts.push(Verdict::at_most("log_t", fit.log_coeff.abs(), tol.heat_log_abs, "absolute, t^0 log t term"));
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["t", "trace", "model"]).map_err(|e| CliError::Config(e.to_string()))?;
    let (lo, hi) = window;
    for i in 0..40 {
        let t = lo * (hi / lo).powf(i as f64 / 39.0);
        let tr = heat_trace(&values, tail.as_ref(), t, false)?;
        csv.write_record([t.to_string(), tr.to_string(), fit.eval(t).to_string()])
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let body = String::from_utf8(csv.into_inner().map_err(|e| CliError::Config(e.to_string()))?).expect("utf-8");
    out.tables.push(("heat_trace.csv".into(), body));
    Ok(out)
}

/// Leading eigenvalues on which two discretizations agree to `rel`.
fn converged_prefix(coarse: &[f64], fine: &[f64], rel: f64) -> Vec<f64> {
    let n = coarse
        .iter()
        .zip(fine)
        .position(|(a, b)| (a - b).abs() > rel * b.abs().max(1.0))
        .unwrap_or(coarse.len().min(fine.len()));
    fine[..n].to_vec()
}

/// Weyl tail with the slope fixed by the area; only the offset is fitted.
fn weyl_tail_with_slope(values: &[f64], slope: f64) -> Result<WeylTail, CliError> {
    let mut tail = WeylTail::fit(values)?;
    let lo = values.len() / 2;
    let m = (values.len() - lo) as f64;
    tail.offset = (lo..values.len()).map(|j| values[j] - slope * j as f64).sum::<f64>() / m;
    tail.slope = slope;
    Ok(tail)
}

/// log det' of a map over the configured degrees with the universal model.
fn logdet_of(map: &RationalMap, config: &RunConfig) -> Result<(DetResult, HeatModel), CliError> {
    let data = critical_data(map, DISTINCT_TOL)?;
    let t = config.split.unwrap_or_else(|| adaptive_split(min_chordal(&data)));
    let model = universal_model(map.degree, data.len());
    let degrees = config.sorted_degrees();
    let wf = WeightField::new(map.clone());
    let spectra: Vec<(usize, Vec<f64>)> = degrees
        .par_iter()
        .map(|&l| {
            let j = config.j.unwrap_or(reliable_count(l) - 1).min(reliable_count(l) - 1);
            Ok((l, solve(&wf, l, j, config.group_tol)?.values))
        })
        .collect::<Result<_, CliError>>()?;
    Ok((log_det_family(&spectra, &model, t)?, model))
}

fn cmd_logdet(config: &RunConfig) -> Result<Outcome, CliError> {
    let map = build_map(config)?;
    let data = critical_data(&map, DISTINCT_TOL)?;
    let (det, model) = logdet_of(&map, config)?;
    let mut out = Outcome::new(json!({ "det": det, "model": model }));
    out.verdicts.push(Verdict::at_most(
        "logdet_stability",
        det.uncertainty,
        config.tolerances.logdet_stability_abs,
        "max of split (T/2, 2T) and last-L spread",
    ));
    if is_football(&map, &data) {
        let oracle = football_logdet_oracle(10)?;
        out.results["oracle"] = json!(oracle);
        out.verdicts.push(Verdict::at_most(
            "football_oracle",
            (det.logdet - oracle).abs(),
            config.tolerances.logdet_oracle_abs,
            "closed-form football determinant",
        ));
    }
    Ok(out)
}

fn cmd_schiffer(config: &RunConfig) -> Result<Outcome, CliError> {
    let map = build_map(config)?;
    let data = critical_data(&map, DISTINCT_TOL)?;
    let fr = frames(&data)?;
    let rows: Vec<Value> = (0..data.len())
        .map(|k| {
            let rhs = data.values[k].finite().map(|_| variational_rhs(&map, &data, k)).transpose()?;
            Ok(json!({
                "point": data.points[k],
                "value": data.values[k],
                "schiffer": fr[k].schiffer,
                "b0": fr[k].b0,
                "binf": fr[k].binf,
                "rhs": rhs,
            }))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(Outcome::new(json!({ "critical": rows })))
}

fn cmd_tau(config: &RunConfig) -> Result<Outcome, CliError> {
    let path = config.path.as_ref().expect("checked");
    let r = rhs_delta(path)?;
    let tol = &config.tolerances;
    let mut out = Outcome::new(json!({
        "delta_log_tau2": r.delta_log_tau2,
        "rhs_delta": r.rhs_delta,
        "quadrature_error": r.quadrature_error,
        "panels_per_segment": r.panels_per_segment,
    }));
    match &path.family {
        PathFamily::Degree2 { nodes } => {
            let (a, b) = (nodes[0], nodes[nodes.len() - 1]);
            let closed = tau2_n2(b[0], b[1])? - tau2_n2(a[0], a[1])?;
            out.results["closed_form"] = json!(closed);
            out.verdicts.push(Verdict::at_most(
                "n2_closed_form",
                (r.delta_log_tau2 - closed).abs(),
                tol.tau_closed_form,
                "(1/2) log|z1 - z2| difference",
            ));
            if (a[0] - b[0]).norm() + (a[1] - b[1]).norm() < LOOP_CLOSURE {
                out.verdicts.push(Verdict::at_most(
                    "closed_loop",
                    r.delta_log_tau2.abs(),
                    tol.tau_loop,
                    "exactness on a closed loop",
                ));
            }
        }
        PathFamily::CoeffCurve { nodes } => {
            let (a, b) = (&nodes[0], &nodes[nodes.len() - 1]);
            let gap = a
                .numerator
                .iter()
                .zip(&b.numerator)
                .chain(a.denominator.iter().zip(&b.denominator))
                .map(|(x, y)| (x - y).norm())
                .sum::<f64>();
            if a.numerator.len() == b.numerator.len() && a.denominator.len() == b.denominator.len() && gap < LOOP_CLOSURE {
                out.verdicts.push(Verdict::at_most(
                    "closed_loop",
                    r.delta_log_tau2.abs(),
                    tol.tau_loop,
                    "exactness on a closed loop",
                ));
            }
        }
        PathFamily::Rotation { .. } => {
            out.verdicts.push(Verdict::at_most("su2_rhs", r.rhs_delta.abs(), tol.su2_rhs, "rotation orbit"));
        }
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(e.to_string());
    csv.write_record(["t", "integrand"]).map_err(err)?;
    for s in &r.ledger {
        csv.write_record([s.t.to_string(), s.integrand.to_string()]).map_err(err)?;
    }
    let body = String::from_utf8(csv.into_inner().map_err(|e| CliError::Config(e.to_string()))?).expect("utf-8");
    out.tables.push(("tau_samples.csv".into(), body));
    Ok(out)
}

/// Paths whose end nodes differ by less than this are treated as closed loops.
const LOOP_CLOSURE: f64 = 1e-12;

/// (1/2) log|z1 - z2| - (1/4) log(1+|z1|^2) - (1/4) log(1+|z2|^2)
fn eq0_rhs(z1: C64, z2: C64) -> f64 {
    0.5 * (z1 - z2).norm().ln() - 0.25 * (1.0 + z1.norm_sqr()).ln() - 0.25 * (1.0 + z2.norm_sqr()).ln()
}

fn cmd_verify_eq0(config: &RunConfig) -> Result<Outcome, CliError> {
    let configs = config.configs.as_ref().expect("checked");
    let rows: Vec<(f64, f64, f64, DetResult)> = configs
        .par_iter()
        .map(|[z1, z2]| {
            let map = RationalMap::degree2(*z1, *z2)?;
            let (det, _) = logdet_of(&map, config)?;
            let rhs = eq0_rhs(*z1, *z2);
            Ok((det.logdet, rhs, det.logdet - rhs, det))
        })
        .collect::<Result<_, CliError>>()?;
    let mean = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
    let dev = rows.iter().map(|r| (r.2 - mean).abs()).fold(0.0, f64::max);
    let mut out = Outcome::new(json!({
        "configs": configs.iter().zip(&rows).map(|(c, r)| json!({
            "z1": c[0], "z2": c[1], "logdet": r.0, "rhs": r.1, "constant": r.2, "det": r.3,
        })).collect::<Vec<_>>(),
        "mean_constant": mean,
    }));
    out.verdicts.push(Verdict::at_most(
        "eq0_constancy",
        dev,
        config.tolerances.eq0_constancy,
        "max deviation of logdet - rhs from its mean",
    ));
    let mut csv = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(e.to_string());
    csv.write_record(["z1_re", "z1_im", "z2_re", "z2_im", "logdet", "uncertainty", "rhs", "constant"]).map_err(err)?;
    for (c, r) in configs.iter().zip(&rows) {
        csv.write_record([
            c[0].re.to_string(),
            c[0].im.to_string(),
            c[1].re.to_string(),
            c[1].im.to_string(),
            r.0.to_string(),
            r.3.uncertainty.to_string(),
            r.1.to_string(),
            r.2.to_string(),
        ])
        .map_err(err)?;
    }
    let body = String::from_utf8(csv.into_inner().map_err(|e| CliError::Config(e.to_string()))?).expect("utf-8");
    out.tables.push(("eq0.csv".into(), body));
    Ok(out)
}

/// Maps obtained by moving critical value k by a complex step. Degree-2 family
/// descriptors move z_k directly; other maps use minimum-norm coefficient
/// directions.
struct Mover {
    base: RationalMap,
    degree2: Option<(C64, C64)>,
    dirs: Vec<Vec<C64>>,
    coeffs: Vec<C64>,
    data: CriticalData,
}

impl Mover {
    fn new(config: &RunConfig) -> Result<Self, CliError> {
        let base = build_map(config)?;
        let data = critical_data(&base, DISTINCT_TOL)?;
        let degree2 = match config.map.as_ref() {
            Some(MapDescriptor::Family { family, z1, z2 }) if family == "degree2" => Some((*z1, *z2)),
            _ => None,
        };
        let (dirs, coeffs) = if degree2.is_some() {
            (Vec::new(), Vec::new())
        } else {
            (critical_value_directions(&base, &data)?, free_coefficients(&base))
        };
        Ok(Mover { base, degree2, dirs, coeffs, data })
    }

    fn moved(&self, k: usize, h: C64) -> Result<RationalMap, MapError> {
        if let Some((z1, z2)) = self.degree2 {
            let zk = self.data.values[k].finite().ok_or_else(|| MapError::Invalid("infinite critical value".into()))?;
            return if (zk - z1).norm() <= (zk - z2).norm() {
                RationalMap::degree2(z1 + h, z2)
            } else {
                RationalMap::degree2(z1, z2 + h)
            };
        }
        let p: Vec<C64> = self.coeffs.iter().zip(&self.dirs[k]).map(|(a, d)| a + d * h).collect();
        from_free_coefficients(&p, self.base.degree)
    }
}

fn cmd_verify_system(config: &RunConfig) -> Result<Outcome, CliError> {
    let mover = Mover::new(config)?;
    let map = &mover.base;
    let data = &mover.data;
    let report = validate(map, data);
    if !report.simple_hurwitz {
        return Err(CliError::Config(format!("verify-system needs a map in the simple Hurwitz locus: {}", report.reasons.join("; "))));
    }
    let t = config.split.unwrap_or_else(|| adaptive_split(min_chordal(data)));
    let cfg = RunConfig { split: Some(t), ..config.clone() };
    let (base, _) = logdet_of(map, &cfg)?;
    let h = config.fd_step;
    let m = data.len();
    let jobs: Vec<(usize, C64)> = (0..m)
        .flat_map(|k| [C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, h), C64::new(0.0, -h)].map(|s| (k, s)))
        .collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, s)| Ok(logdet_of(&mover.moved(k, s)?, &cfg)?.0.logdet))
        .collect::<Result<_, CliError>>()?;
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for k in 0..m {
        let v = &values[4 * k..4 * k + 4];
        let dx = (v[0] - v[1]) / (2.0 * h);
        let dy = (v[2] - v[3]) / (2.0 * h);
        let fd = C64::new(dx, -dy) / 2.0;
        let rhs = variational_rhs(map, data, k)?;
        let rel = (fd - rhs).norm() / rhs.norm();
        rows.push(json!({ "k": k, "value": data.values[k], "fd": fd, "rhs": rhs, "rel_error": rel }));
        verdicts.push(Verdict::at_most(
            format!("system_component_{k}"),
            rel,
            config.tolerances.system_rel,
            "central differences of log det vs -S/12 - conj(z)/(4(1+|z|^2))",
        ));
    }
    let mut out = Outcome::new(json!({ "T": t, "step": h, "base": base, "components": rows }));
    out.verdicts = verdicts;
    Ok(out)
}

fn cmd_verify_perturbation(config: &RunConfig) -> Result<Outcome, CliError> {
    let tol = &config.tolerances;
    let mover = Mover::new(config)?;
    let map = &mover.base;
    let data = &mover.data;
    let k = config.cone;
    if k >= data.len() {
        return Err(CliError::Config(format!("cone index {k} out of range")));
    }
    let fr = frames(data)?;
    let l = *config.sorted_degrees().last().expect("degrees checked");
    let wf = WeightField::new(map.clone());
    let j = config.j.unwrap_or(20);
    let spec = solve_with(&wf, l, &SolveOptions { j, vectors: j + 1, group_tol: config.group_tol })?;
    let cc = cone_coeffs(&spec, data, &fr, k)?;
    // complete groups above the zero mode, excluding any touching the last computed index
    let groups: Vec<Vec<usize>> = cc
        .groups
        .iter()
        .filter(|g| spec.values[g[0]] > 1e-9 && g.iter().all(|&i| i < j))
        .take(config.groups)
        .cloned()
        .collect();
    if groups.len() < config.groups {
        return Err(CliError::Config(format!("only {} complete groups below J = {j}", groups.len())));
    }
    let preds: Vec<(C64, C64)> = groups.iter().map(|g| group_derivative_prediction(&cc, g)).collect::<Result<_, _>>()?;
    let scale = preds.iter().map(|p| p.0.norm()).fold(0.0, f64::max);
    let mut out = Outcome::new(json!({ "L": l, "cone": k, "reality_defect": cc.reality_defect() }));
    let mut group_rows = Vec::new();
    let mut fd_all = Vec::new();
    for &h in &config.steps {
        let d = group_sum_derivative(|s| mover.moved(k, s), l, &groups, h, config.group_tol)?;
        fd_all.push(d);
    }
    for (g, grp) in groups.iter().enumerate() {
        let (a, b) = preds[g];
        let floor = (1e-3 * scale).max(1e-12);
        let errs: Vec<f64> = fd_all.iter().map(|d| (d.holomorphic(g) - a).norm() / a.norm().max(floor)).collect();
        group_rows.push(json!({
            "indices": grp,
            "lambda": spec.values[grp[0]],
            "A": a,
            "B": b,
            "fd": fd_all.iter().map(|d| json!({ "step": d.step, "d_re": d.d_re[g], "d_im": d.d_im[g], "holomorphic": d.holomorphic(g) })).collect::<Vec<_>>(),
            "rel_error": errs,
        }));
        for (d, e) in fd_all.iter().zip(&errs) {
            out.verdicts.push(Verdict::at_most(
                format!("group_{g}_step_{:e}", d.step),
                *e,
                tol.perturbation_rel,
                "FD of the group sum vs A = 2 pi sum b_j^2, relative (floor 1e-3 max|A|)",
            ));
        }
        if errs.len() >= 2 {
            out.verdicts.push(Verdict::at_most(
                format!("group_{g}_trend"),
                errs[errs.len() - 1],
                errs[errs.len() - 2].max(tol.perturbation_floor),
                "error at the smallest step vs the previous step, or below the discretization floor",
            ));
        }
    }
    out.results["groups"] = json!(group_rows);

    // model solution suite
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pts: Vec<(f64, f64)> =
        (0..20).map(|_| (rng.gen_range(0.3..PI_F - 0.3), rng.gen_range(0.0..2.0 * PI_F))).collect();
    let mut model_rows = Vec::new();
    for &nu in &config.nus {
        let p = ModelParams::new(C64::new(nu, 0.0))?;
        let res = model_residual(&p, &pts, 1e-3)?;
        let fit = extract_model_expansion(&p)?;
        let (_, a, _) = model_b_a(&p)?;
        model_rows.push(json!({ "nu": nu, "residual": res, "b": fit.coeffs.b1, "a_fit": fit.coeffs.a1, "a_exact": a }));
        out.verdicts.push(Verdict::at_most(format!("model_residual_nu_{nu}"), res, tol.model_residual, "5-point stencils at 20 random points"));
        out.verdicts.push(Verdict::at_most(format!("model_b_nu_{nu}"), fit.coeffs.b1.norm(), tol.model_b, "least squares on 1e-3 < |x| < 1e-2"));
    }
    out.results["model"] = json!(model_rows);

    // b(lambda) -> binf
    let asm = assemble(&wf, l)?;
    let bl = b_lambda_with(&asm, &wf, data, &fr, k, &config.lambdas, DEFAULT_CUTOFF)?;
    let errs: Vec<f64> = bl.iter().map(|b| (b.b - b.binf).norm()).collect();
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    out.results["b_lambda"] = json!({ "values": bl, "errors": errs });
    out.verdicts.push(Verdict {
        name: "b_lambda_monotone".into(),
        value: *errs.last().unwrap_or(&0.0),
        tolerance: errs.first().copied().unwrap_or(0.0),
        method: "|b(lambda) - binf| decreasing along the lambda list".into(),
        pass: monotone,
    });
    Ok(out)
}

const PI_F: f64 = std::f64::consts::PI;

fn cmd_verify_su2(config: &RunConfig) -> Result<Outcome, CliError> {
    let tol = &config.tolerances;
    let map = build_map(config)?;
    let data = critical_data(&map, DISTINCT_TOL)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rots: Vec<TargetRotation> = (0..config.rotations)
        .map(|_| {
            let axis = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            TargetRotation::about_axis(axis, rng.gen_range(0.1..PI_F))
        })
        .collect();
    let j = config.j.unwrap_or(20);
    let degrees = config.sorted_degrees();
    let base_spec = spectra_over_degrees(&map, &degrees, j, config.group_tol)?;
    let (base_det, _) = logdet_of(&map, config)?;
    let mut out = Outcome::new(json!({ "base_logdet": base_det }));
    let mut rows = Vec::new();
    for (i, rot) in rots.iter().enumerate() {
        let g = rotate_target(&map, rot)?;
        let spec = spectra_over_degrees(&g, &degrees, j, config.group_tol)?;
        let worst = base_spec
            .iter()
            .zip(&spec)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs() / x.abs().max(1.0)))
            .fold(0.0, f64::max);
        let (det, _) = logdet_of(&g, config)?;
        let diff = (det.logdet - base_det.logdet).abs();
        let allowed = tol.su2_uncertainty_factor * (det.uncertainty + base_det.uncertainty) + 1e-10;
        rows.push(json!({ "rotation": rot, "spectrum_rel": worst, "logdet": det.logdet, "logdet_diff": diff }));
        out.verdicts.push(Verdict::at_most(format!("su2_spectrum_{i}"), worst, tol.su2_spectrum_rel, "eigenvalues of f vs rot o f"));
        out.verdicts.push(Verdict::at_most(format!("su2_logdet_{i}"), diff, allowed, "log det difference vs 2x reported uncertainty"));
    }
    // the determinant formula's right-hand side along a rotation orbit
    let report = validate(&map, &data);
    if report.simple_hurwitz {
        let path = ModuliPath::new(PathFamily::Rotation {
            map: config.map.clone().expect("checked"),
            axis: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 1.0],
            angle: rng.gen_range(0.5..2.0),
        });
        let r = rhs_delta(&path)?;
        out.results["orbit_rhs_delta"] = json!(r.rhs_delta);
        out.verdicts.push(Verdict::at_most("su2_rhs_orbit", r.rhs_delta.abs(), tol.su2_rhs, "tau path along a rotation orbit"));
    } else {
        out.warnings.push("map is outside the simple Hurwitz locus; orbit check of the formula skipped".into());
    }
    out.results["rotations"] = json!(rows);
    Ok(out)
}
