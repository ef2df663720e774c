//! Heat traces, short-time coefficients and zeta-regularized determinants
//! from a truncated spectrum.
//!
//! zeta'(0) is assembled from the Mellin split at t = T:
//! the small-t piece integrates a short-time expansion term by term and the
//! large-t piece is sum_j E1(lambda_j T) plus a Weyl tail.

pub mod special;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};
use special::{bernoulli_2k, e1, zeta_minus_one, EULER_GAMMA, ZETA_PRIME_MINUS_ONE};
use std::f64::consts::PI;
use thiserror::Error;

/// Eigenvalues below this are treated as the zero mode.
pub const ZERO_MODE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZetaError {
    #[error("t = {t} is below 2/lambda_J = {limit}; the truncated trace is unreliable")]
    TailUnreliable { t: f64, limit: f64 },
    #[error("design matrix condition number {0:.3e} exceeds 1e10")]
    IllConditionedFit(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Counting-function tail N(lambda) ~ (lambda - offset)/slope + 1 beyond
/// the last retained eigenvalue (the +1 counts the zero mode).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylTail {
    pub slope: f64,
    pub offset: f64,
    /// last retained eigenvalue
    pub lambda_cut: f64,
    /// number of retained eigenvalues including the zero mode
    pub count: usize,
}

impl WeylTail {
    /// Fits lambda_j = slope j + offset over the upper half of the given
    /// ascending spectrum (zero mode at index 0).
    pub fn fit(values: &[f64]) -> Result<Self, ZetaError> {
        let n = values.len();
        if n < 8 {
            return Err(ZetaError::Invalid("too few eigenvalues for a Weyl tail".into()));
        }
        let lo = n / 2;
        let pts: Vec<(f64, f64)> = (lo..n).map(|j| (j as f64, values[j])).collect();
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        Ok(WeylTail { slope, offset: my - slope * mx, lambda_cut: values[n - 1], count: n })
    }

    /// Smoothed count minus the actual count at the cut.
    fn mismatch(&self) -> f64 {
        (self.lambda_cut - self.offset) / self.slope + 1.0 - self.count as f64
    }

    /// sum over the missing eigenvalues of e^{-lambda t}.
    pub fn heat(&self, t: f64) -> f64 {
        let e = (-self.lambda_cut * t).exp();
        e / (self.slope * t) + self.mismatch() * e
    }

    /// int_T^inf t^{-1} heat(t) dt.
    pub fn zeta_part(&self, t: f64) -> f64 {
        let a = self.lambda_cut * t;
        ((-a).exp() / t - self.lambda_cut * e1(a)) / self.slope + self.mismatch() * e1(a)
    }
}

/// Sum of e^{-lambda t} over the given values plus the tail; the zero mode is
/// included unless `subtract_zero_mode` is set.
pub fn heat_trace(values: &[f64], tail: Option<&WeylTail>, t: f64, subtract_zero_mode: bool) -> Result<f64, ZetaError> {
    if !(t > 0.0) {
        return Err(ZetaError::Invalid(format!("t = {t} must be positive")));
    }
    if let Some(&last) = values.last() {
        if last > 0.0 && t < 2.0 / last {
            return Err(ZetaError::TailUnreliable { t, limit: 2.0 / last });
        }
    }
    let mut s: f64 = values.iter().map(|&v| (-v * t).exp()).sum();
    if let Some(tail) = tail {
        s += tail.heat(t);
    }
    if subtract_zero_mode {
        s -= 1.0;
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    /// exact short-time series of a cover with N sheets and M cone points of angle 4 pi
    Universal { sheets: usize, cones: usize },
    /// least-squares fit on a window of t
    Fitted { t_lo: f64, t_hi: f64 },
}

/// Short-time expansion sum_a c_a t^a + log_coeff log t of the heat trace
/// (zero mode included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatModel {
    pub kind: ModelKind,
    /// (exponent, coefficient) pairs
    pub terms: Vec<(f64, f64)>,
    pub log_coeff: f64,
    pub tail: Option<WeylTail>,
    /// RMS residual of the fit relative to the trace values, 0 for exact series
    pub residual: f64,
    /// condition number of the column-scaled design matrix
    pub condition: f64,
}

impl HeatModel {
    pub fn coeff(&self, exponent: f64) -> f64 {
        self.terms.iter().filter(|(a, _)| (a - exponent).abs() < 1e-12).map(|(_, c)| c).sum()
    }
    pub fn c_m1(&self) -> f64 {
        self.coeff(-1.0)
    }
    pub fn c_mhalf(&self) -> f64 {
        self.coeff(-0.5)
    }
    pub fn c_0(&self) -> f64 {
        self.coeff(0.0)
    }
    pub fn c_half(&self) -> f64 {
        self.coeff(0.5)
    }
    pub fn c_1(&self) -> f64 {
        self.coeff(1.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|(a, c)| c * t.powf(*a)).sum::<f64>() + self.log_coeff * t.ln()
    }

    /// zeta(0) = c_0 - 1.
    pub fn zeta_at_zero(&self) -> f64 {
        self.c_0() - 1.0
    }
}

/// Number of Euler-Maclaurin terms kept in the exact series.
const SERIES_TERMS: usize = 14;

/// sum_{n>=1} n e^{-t n^2/4} e^{t/4}, the football heat trace, as a power series in t.
fn football_series() -> Vec<f64> {
    // index i holds the coefficient of t^{i-1}
    let mut base = vec![0.0; SERIES_TERMS + 1];
    base[0] = 2.0;
    let mut fact = 1.0;
    for k in 1..SERIES_TERMS {
        if k > 1 {
            fact *= (k - 1) as f64;
        }
        let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let coef = -bernoulli_2k(k) * sign / (2.0 * k as f64 * fact);
        base[k] += coef * 0.25f64.powi(k as i32 - 1);
    }
    times_exp_quarter(&base)
}

/// sum_l (2l+1) e^{-t l(l+1)}, the round-sphere heat trace, as a power series in t.
fn sphere_series() -> Vec<f64> {
    let mut base = vec![0.0; SERIES_TERMS + 1];
    base[0] = 1.0;
    let mut fact = 1.0;
    for k in 1..SERIES_TERMS {
        if k > 1 {
            fact *= (k - 1) as f64;
        }
        let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let coef = -(2f64.powi(1 - 2 * k as i32) - 1.0) * bernoulli_2k(k) * sign / (2.0 * k as f64 * fact);
        base[k] += 2.0 * coef;
    }
    times_exp_quarter(&base)
}

fn times_exp_quarter(base: &[f64]) -> Vec<f64> {
    let n = base.len() - 1;
    let mut out = vec![0.0; n];
    for (i, &b) in base.iter().enumerate() {
        let mut f = 1.0;
        for j in 0..n {
            if i + j >= n {
                break;
            }
            if j > 0 {
                f *= 0.25 / j as f64;
            }
            out[i + j] += b * f;
        }
    }
    out
}

/// Exact short-time series for a cover with `sheets` sheets and `cones`
/// simple branch points (cone angle 4 pi):
/// (N - M) * sphere + (M / 2) * football.
pub fn universal_model(sheets: usize, cones: usize) -> HeatModel {
    let fb = football_series();
    let sp = sphere_series();
    let (n, m) = (sheets as f64, cones as f64);
    let terms = (0..fb.len()).map(|i| (i as f64 - 1.0, (n - m) * sp[i] + 0.5 * m * fb[i])).collect();
    HeatModel {
        kind: ModelKind::Universal { sheets, cones },
        terms,
        log_coeff: 0.0,
        tail: None,
        residual: 0.0,
        condition: 1.0,
    }
}

/// Least-squares fit of {t^-1, t^-1/2, 1, t^1/2, t} (and log t if probed)
/// to the heat trace on a log-spaced grid over `t_range`.
pub fn fit_heat_coeffs(
    values: &[f64],
    tail: Option<&WeylTail>,
    t_range: (f64, f64),
    with_log_probe: bool,
) -> Result<HeatModel, ZetaError> {
    let (t_lo, t_hi) = t_range;
    if !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(ZetaError::Invalid(format!("bad t range {t_range:?}")));
    }
    let exps = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let ncol = exps.len() + with_log_probe as usize;
    let npts = 60;
    let ts: Vec<f64> = (0..npts)
        .map(|i| t_lo * (t_hi / t_lo).powf(i as f64 / (npts - 1) as f64))
        .collect();
    let ys = ts.iter().map(|&t| heat_trace(values, tail, t, false)).collect::<Result<Vec<_>, _>>()?;
    let mut a = Mat::<f64>::from_fn(npts, ncol, |i, j| {
        if j < exps.len() {
            ts[i].powf(exps[j])
        } else {
            ts[i].ln()
        }
    });
    let mut scale = vec![0.0; ncol];
    for j in 0..ncol {
        scale[j] = (0..npts).map(|i| a[(i, j)].powi(2)).sum::<f64>().sqrt();
        for i in 0..npts {
            a[(i, j)] /= scale[j];
        }
    }
    let sv = a.singular_values().map_err(|e| ZetaError::Invalid(format!("{e:?}")))?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = smax / smin;
    if condition > 1e10 {
        return Err(ZetaError::IllConditionedFit(condition));
    }
    let rhs = Mat::<f64>::from_fn(npts, 1, |i, _| ys[i]);
    let sol = a.qr().solve_lstsq(&rhs);
    let coef: Vec<f64> = (0..ncol).map(|j| sol[(j, 0)] / scale[j]).collect();
    let mut model = HeatModel {
        kind: ModelKind::Fitted { t_lo, t_hi },
        terms: exps.iter().zip(&coef).map(|(&e, &c)| (e, c)).collect(),
        log_coeff: if with_log_probe { coef[exps.len()] } else { 0.0 },
        tail: tail.copied(),
        residual: 0.0,
        condition,
    };
    let ss: f64 = ts.iter().zip(&ys).map(|(&t, &y)| ((model.eval(t) - y) / y).powi(2)).sum();
    model.residual = (ss / npts as f64).sqrt();
    Ok(model)
}

/// One row of the convergence table over basis degree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LEntry {
    #[serde(rename = "L")]
    pub l: usize,
    pub logdet: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetResult {
    pub logdet: f64,
    pub uncertainty: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "L_table")]
    pub l_table: Vec<LEntry>,
    /// logdet at T/2 and 2T
    pub split_spread: f64,
    pub zeta0: f64,
    pub tail_residual: f64,
}

fn strip_zero_mode(values: &[f64]) -> Vec<f64> {
    values.iter().copied().filter(|&v| v > ZERO_MODE_TOL).collect()
}

/// -zeta'(0) with the Mellin integral split at t.
pub fn log_det_at(values: &[f64], model: &HeatModel, t: f64) -> Result<f64, ZetaError> {
    let pos = strip_zero_mode(values);
    if let Some(&last) = pos.last() {
        if model.tail.is_none() && last * t < 2.0 {
            return Err(ZetaError::TailUnreliable { t, limit: 2.0 / last });
        }
    }
    let mut zp = 0.0;
    for &(a, c) in &model.terms {
        if a.abs() < 1e-12 {
            zp += (c - 1.0) * (EULER_GAMMA + t.ln());
        } else {
            zp += c * t.powf(a) / a;
        }
    }
    if model.log_coeff != 0.0 {
        let l = t.ln();
        zp += model.log_coeff * (0.5 * l * l - 0.5 * EULER_GAMMA * EULER_GAMMA + PI * PI / 12.0);
    }
    zp += pos.iter().map(|&v| e1(v * t)).sum::<f64>();
    if let Some(tail) = &model.tail {
        zp += tail.zeta_part(t);
    }
    Ok(-zp)
}

/// log det' with uncertainty from varying the split point by a factor of 2.
pub fn log_det(values: &[f64], model: &HeatModel, t: f64) -> Result<DetResult, ZetaError> {
    let mid = log_det_at(values, model, t)?;
    let mut spread: f64 = 0.0;
    for s in [0.5, 2.0] {
        if let Ok(v) = log_det_at(values, model, s * t) {
            spread = spread.max((v - mid).abs());
        }
    }
    Ok(DetResult {
        logdet: mid,
        uncertainty: spread,
        t,
        j: strip_zero_mode(values).len(),
        l_table: Vec::new(),
        split_spread: spread,
        zeta0: model.zeta_at_zero(),
        tail_residual: model.residual,
    })
}

/// log det over a sequence of basis degrees; the reported value is the one at
/// the largest degree, and the uncertainty includes the change from the
/// previous degree.
pub fn log_det_family(spectra: &[(usize, Vec<f64>)], model: &HeatModel, t: f64) -> Result<DetResult, ZetaError> {
    if spectra.is_empty() {
        return Err(ZetaError::Invalid("empty spectrum family".into()));
    }
    let mut sorted: Vec<&(usize, Vec<f64>)> = spectra.iter().collect();
    sorted.sort_by_key(|s| s.0);
    let mut table = Vec::new();
    let mut last = None;
    for (l, vals) in sorted {
        let r = log_det(vals, model, t)?;
        table.push(LEntry { l: *l, logdet: r.logdet });
        last = Some(r);
    }
    let mut out = last.unwrap();
    let l_spread = if table.len() >= 2 {
        (table[table.len() - 1].logdet - table[table.len() - 2].logdet).abs()
    } else {
        0.0
    };
    out.uncertainty = out.split_spread.max(l_spread);
    out.l_table = table;
    Ok(out)
}

/// Aitken extrapolation of a sequence of approximations; falls back to the
/// last entry when the differences do not contract.
pub fn richardson(seq: &[f64]) -> f64 {
    let n = seq.len();
    if n < 3 {
        return *seq.last().expect("empty sequence");
    }
    let (a, b, c) = (seq[n - 3], seq[n - 2], seq[n - 1]);
    let (d1, d2) = (b - a, c - b);
    if d1 == 0.0 || d2 == 0.0 {
        return c;
    }
    let r = d2 / d1;
    if r > 0.0 && r < 0.9 {
        c + d2 * r / (1.0 - r)
    } else {
        c
    }
}

/// Split point adapted to the closest pair of cone points: the local heat
/// expansion is accurate up to errors of order exp(-d^2/t).
pub fn adaptive_split(min_distance: f64) -> f64 {
    (min_distance * min_distance / 16.0).min(0.25)
}

/// Exact football spectrum: lambda = nu(nu+1), nu = 0, 1/2, ..., nu_max, each
/// with multiplicity 2 nu + 1.
pub fn football_spectrum(nu_max: f64) -> Result<Vec<f64>, ZetaError> {
    let twice = 2.0 * nu_max;
    if nu_max < 1.0 || (twice - twice.round()).abs() > 1e-12 {
        return Err(ZetaError::Invalid(format!("nu_max = {nu_max} must be a half-integer >= 1")));
    }
    let mut out = Vec::new();
    for j in 0..=(twice.round() as usize) {
        let nu = j as f64 / 2.0;
        for _ in 0..=j {
            out.push(nu * (nu + 1.0));
        }
    }
    Ok(out)
}

/// log det' of the football from the rearranged series
/// zeta(s) = 4^s sum_p (s)_p/p! (zeta_R(2s+2p-1) - 1):
/// zeta'(0) = -(7/12) log 4 + 2 zeta_R'(-1) + gamma - 1 + sum_{p>=2} (zeta_R(2p-1) - 1)/p.
pub fn football_logdet_oracle(precision: u32) -> Result<f64, ZetaError> {
    if precision > 12 {
        return Err(ZetaError::Invalid("precision above 12 digits is not supported".into()));
    }
    let target = 10f64.powi(-(precision as i32) - 2);
    let mut sum = 0.0;
    let mut p = 2u32;
    loop {
        let term = zeta_minus_one(2 * p - 1) / p as f64;
        sum += term;
        // remaining terms are bounded by a geometric series with ratio 1/4
        if term / 3.0 < target {
            break;
        }
        p += 1;
    }
    let zp = -(7.0 / 12.0) * 4f64.ln() + 2.0 * ZETA_PRIME_MINUS_ONE + EULER_GAMMA - 1.0 + sum;
    Ok(-zp)
}

/// Independent route: exact short-time series for t < T and the exact
/// spectrum up to nu_max for t > T.
pub fn football_logdet_mellin(nu_max: f64, t: f64) -> Result<f64, ZetaError> {
    let spec = football_spectrum(nu_max)?;
    log_det_at(&spec, &universal_model(2, 2), t)
}

/// zeta(-1) of the football from the same series. At s = -1 only p = 0, 1
/// survive the zeros of (s)_p, except p = 2 where the zero of s(s+1)/2 meets the
/// pole 1/(2(s+1)) of zeta_R(2s+3) and leaves -1/4.
pub fn football_zeta_at_minus_one() -> f64 {
    let zr_m3 = 1.0 / 120.0;
    let zr_m1 = -1.0 / 12.0;
    let p0 = zr_m3 - 1.0;
    let p1 = -(zr_m1 - 1.0);
    let p2 = -0.25;
    0.25 * (p0 + p1 + p2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_zero_mode_trace() {
        assert_eq!(heat_trace(&[0.0], None, 1.0, false).unwrap(), 1.0);
    }

    #[test]
    fn football_spectrum_counts() {
        assert_eq!(football_spectrum(1.0).unwrap(), vec![0.0, 0.75, 0.75, 2.0, 2.0, 2.0]);
        let s = football_spectrum(5.0).unwrap();
        assert_eq!(s.len(), 11 * 6);
        assert_eq!(s.iter().filter(|&&v| v == 6.0).count(), 5);
        assert!(football_spectrum(1.3).is_err());
    }

    #[test]
    fn universal_constant_terms() {
        let fb = universal_model(2, 2);
        assert!((fb.c_m1() - 2.0).abs() < 1e-15);
        assert!((fb.c_0() - 5.0 / 12.0).abs() < 1e-14);
        let sp = universal_model(1, 0);
        assert!((sp.c_m1() - 1.0).abs() < 1e-15);
        assert!((sp.c_0() - 1.0 / 3.0).abs() < 1e-14);
        let m = universal_model(3, 4);
        assert!((m.c_0() - (1.0 - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn universal_series_matches_exact_traces() {
        let fb = football_spectrum(200.0).unwrap();
        let model = universal_model(2, 2);
        for t in [0.05, 0.2, 0.5] {
            let exact = heat_trace(&fb, None, t, false).unwrap();
            assert!((model.eval(t) - exact).abs() < 1e-10 * exact, "t={t}");
        }
    }

    #[test]
    fn minus_one_probe_matches_heat_coefficient() {
        let z = football_zeta_at_minus_one();
        assert!((z + 19.0 / 480.0).abs() < 1e-15);
        // for the heat expansion sum c_a t^a, zeta(-1) = -c_1
        assert!((universal_model(2, 2).c_1() - 19.0 / 480.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_two_methods_agree() {
        let o = football_logdet_oracle(12).unwrap();
        assert!((o - 1.446_366_817_494_226).abs() < 1e-12, "{o}");
        for t in [0.1, 0.3] {
            let m = football_logdet_mellin(200.0, t).unwrap();
            assert!((m - o).abs() < 1e-9, "t={t}: {m} vs {o}");
        }
    }

    #[test]
    fn sphere_log_det_is_split_independent() {
        let mut sp = Vec::new();
        for l in 0..400usize {
            for _ in 0..(2 * l + 1) {
                sp.push((l * (l + 1)) as f64);
            }
        }
        let m = universal_model(1, 0);
        let a = log_det_at(&sp, &m, 0.1).unwrap();
        let b = log_det_at(&sp, &m, 0.25).unwrap();
        assert!((a - b).abs() < 1e-11, "{a} {b}");
        // known value for the unit round sphere: 1/2 - 4 zeta_R'(-1)
        assert!((a - (0.5 - 4.0 * ZETA_PRIME_MINUS_ONE)).abs() < 1e-10, "{a}");
    }

    #[test]
    fn zero_mode_entry_does_not_change_log_det() {
        let fb = football_spectrum(100.0).unwrap();
        let m = universal_model(2, 2);
        let a = log_det_at(&fb, &m, 0.2).unwrap();
        let b = log_det_at(&fb[1..], &m, 0.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weyl_tail_recovers_linear_spectrum() {
        let vals: Vec<f64> = (0..200).map(|j| 0.5 * j as f64 + if j == 0 { 0.0 } else { 1.0 }).collect();
        let tail = WeylTail::fit(&vals).unwrap();
        assert!((tail.slope - 0.5).abs() < 1e-12);
        assert!((tail.offset - 1.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_accelerates_geometric_sequences() {
        let seq: Vec<f64> = (0..3).map(|k| 1.0 + 0.5f64.powi(k)).collect();
        assert!((richardson(&seq) - 1.0).abs() < 1e-14);
    }
}
