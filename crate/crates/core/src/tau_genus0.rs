//! Genus-0 Bergman tau-function along paths in Hurwitz space.
//!
//! The one-form is d log|tau|^2 = 2 Re sum_k omega_k dz_k with
//! omega_k = -S_k/12, where S_k is the Schwarzian of the cover coordinate in
//! the distinguished parameter at the k-th critical point.

use crate::local_frame::{schiffer_at_critical, FrameError};
use crate::rational_map::{
    critical_data, validate, MapDescriptor, MapError, Point, Poly, RationalMap, TargetRotation, DISTINCT_TOL,
};
use crate::spectral::legendre::gauss_legendre;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MARGIN: f64 = 0.05;
pub const DEFAULT_SAMPLES: usize = 8;
const GAUSS_ORDER: usize = 10;
const MAX_PANELS: usize = 4096;
const QUAD_TOL: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum TauError {
    #[error("critical values coincide")]
    CoincidentValues,
    #[error("critical values approach within {distance:.3e} (margin {margin}) at t = {t}")]
    CollisionDetected { t: f64, distance: f64, margin: f64 },
    #[error("critical value tracking is ambiguous at t = {0}")]
    TrackingLost(f64),
    #[error("map is outside the simple Hurwitz locus: {0}")]
    NotSimpleHurwitz(String),
    #[error("degree changes along the path at t = {0}")]
    DegreeChanged(f64),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Components omega_k = -S_k/12 of the tau one-form, in critical-point order.
pub fn one_form(map: &RationalMap) -> Result<Vec<C64>, TauError> {
    let data = critical_data(map, DISTINCT_TOL)?;
    let report = validate(map, &data);
    if !report.simple_hurwitz {
        return Err(TauError::NotSimpleHurwitz(report.reasons.join("; ")));
    }
    (0..data.len()).map(|k| Ok(-schiffer_at_critical(&data, k)?.schiffer / 12.0)).collect()
}

/// log|tau|^2 = (1/2) log|z1 - z2| for degree 2.
pub fn tau2_n2(z1: C64, z2: C64) -> Result<f64, TauError> {
    let d = (z1 - z2).norm();
    if d == 0.0 || !d.is_finite() {
        return Err(TauError::CoincidentValues);
    }
    Ok(0.5 * d.ln())
}

/// Numerator and denominator coefficient vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapCoeffs {
    pub numerator: Vec<C64>,
    pub denominator: Vec<C64>,
}

/// Explicit curve of maps. Polyline families are parameterized by
/// t in [0, nodes - 1]; the rotation orbit by t in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PathFamily {
    /// Straight segments between (z1, z2) nodes of the degree-2 family.
    Degree2 { nodes: Vec<[C64; 2]> },
    /// Straight segments between coefficient vectors.
    CoeffCurve { nodes: Vec<MapCoeffs> },
    /// t -> R(t * angle) o f for the rotation about `axis`.
    Rotation { map: MapDescriptor, axis: [f64; 3], angle: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuliPath {
    #[serde(flatten)]
    pub family: PathFamily,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

/// Raw coefficients of the map at parameter t and their t-derivatives.
struct PathPoint {
    num: Vec<C64>,
    den: Vec<C64>,
    dnum: Vec<C64>,
    dden: Vec<C64>,
}

fn lerp(a: &[C64], b: &[C64], s: f64) -> (Vec<C64>, Vec<C64>) {
    let n = a.len().max(b.len());
    let get = |v: &[C64], i: usize| v.get(i).copied().unwrap_or_default();
    let val = (0..n).map(|i| get(a, i) * (1.0 - s) + get(b, i) * s).collect();
    let der = (0..n).map(|i| get(b, i) - get(a, i)).collect();
    (val, der)
}

impl ModuliPath {
    pub fn new(family: PathFamily) -> Self {
        ModuliPath { family, samples: DEFAULT_SAMPLES, margin: DEFAULT_MARGIN }
    }

    /// Number of smooth pieces; the parameter runs over [0, segments].
    pub fn segments(&self) -> usize {
        match &self.family {
            PathFamily::Degree2 { nodes } => nodes.len().saturating_sub(1),
            PathFamily::CoeffCurve { nodes } => nodes.len().saturating_sub(1),
            PathFamily::Rotation { .. } => 1,
        }
    }

    fn check(&self) -> Result<(), TauError> {
        if self.segments() == 0 {
            return Err(TauError::InvalidPath("a path needs at least two nodes".into()));
        }
        if self.samples == 0 {
            return Err(TauError::InvalidPath("samples must be positive".into()));
        }
        if !(self.margin > 0.0) {
            return Err(TauError::InvalidPath("margin must be positive".into()));
        }
        Ok(())
    }

    fn point(&self, t: f64) -> Result<PathPoint, TauError> {
        let seg = |len: usize| {
            let i = (t.floor() as usize).min(len - 2);
            (i, t - i as f64)
        };
        match &self.family {
            PathFamily::Degree2 { nodes } => {
                let (i, s) = seg(nodes.len());
                let (z, dz) = lerp(&nodes[i], &nodes[i + 1], s);
                let a = (z[1] - z[0]) / 4.0;
                let c = (z[0] + z[1]) / 2.0;
                let da = (dz[1] - dz[0]) / 4.0;
                let dc = (dz[0] + dz[1]) / 2.0;
                let zero = C64::new(0.0, 0.0);
                Ok(PathPoint {
                    num: vec![a, c, a],
                    den: vec![zero, C64::new(1.0, 0.0)],
                    dnum: vec![da, dc, da],
                    dden: vec![zero, zero],
                })
            }
            PathFamily::CoeffCurve { nodes } => {
                let (i, s) = seg(nodes.len());
                let (num, dnum) = lerp(&nodes[i].numerator, &nodes[i + 1].numerator, s);
                let (den, dden) = lerp(&nodes[i].denominator, &nodes[i + 1].denominator, s);
                Ok(PathPoint { num, den, dnum, dden })
            }
            PathFamily::Rotation { map, axis, angle } => {
                let f = map.build()?;
                let rot = TargetRotation::about_axis(*axis, t * angle);
                let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
                let (x, y, z) = (axis[0] / len, axis[1] / len, axis[2] / len);
                let (s, c) = (0.5 * t * angle).sin_cos();
                let da = C64::new(-s, z * c) * (0.5 * angle);
                let db = C64::new(y * c, x * c) * (0.5 * angle);
                let (p, q) = (&f.numerator.coeffs, &f.denominator.coeffs);
                let n = p.len().max(q.len());
                let get = |v: &[C64], i: usize| v.get(i).copied().unwrap_or_default();
                let comb = |a: C64, b: C64, i: usize| a * get(p, i) + b * get(q, i);
                let num = (0..n).map(|i| comb(rot.a, rot.b, i)).collect();
                let den = (0..n).map(|i| comb(-rot.b.conj(), rot.a.conj(), i)).collect();
                let dnum = (0..n).map(|i| comb(da, db, i)).collect();
                let dden = (0..n).map(|i| comb(-db.conj(), da.conj(), i)).collect();
                Ok(PathPoint { num, den, dnum, dden })
            }
        }
    }

    /// The normalized map at parameter t.
    pub fn map_at(&self, t: f64) -> Result<RationalMap, TauError> {
        let p = self.point(t)?;
        Ok(RationalMap::new(Poly::new(p.num), Poly::new(p.den))?)
    }
}

/// One evaluation of the integrand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    /// critical values in tracked order
    pub values: Vec<C64>,
    /// one-form components in tracked order
    pub omega: Vec<C64>,
    /// d log|tau|^2 / dt
    pub integrand: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    pub delta_log_tau2: f64,
    /// change of log|tau|^2 - (1/4) sum_k log(1+|z_k|^2)
    pub rhs_delta: f64,
    /// difference between the last two refinement levels
    pub quadrature_error: f64,
    pub panels_per_segment: usize,
    /// samples of the final refinement level, in path order
    pub ledger: Vec<PathSample>,
}

struct RawSample {
    t: f64,
    values: Vec<C64>,
    omega: Vec<C64>,
    integrand: f64,
}

fn sample(path: &ModuliPath, t: f64, degree: usize) -> Result<RawSample, TauError> {
    let p = path.point(t)?;
    let map = RationalMap::new(Poly::new(p.num.clone()), Poly::new(p.den.clone()))?;
    if map.degree != degree {
        return Err(TauError::DegreeChanged(t));
    }
    let data = critical_data(&map, DISTINCT_TOL)?;
    let report = validate(&map, &data);
    if !report.simple_hurwitz {
        return Err(TauError::NotSimpleHurwitz(format!("t = {t}: {}", report.reasons.join("; "))));
    }
    let mut min_dist = f64::INFINITY;
    for i in 0..data.len() {
        for j in 0..i {
            min_dist = min_dist.min(data.values[i].chordal(data.values[j]));
        }
    }
    if min_dist < path.margin {
        return Err(TauError::CollisionDetected { t, distance: min_dist, margin: path.margin });
    }
    let (num, den) = (Poly::new(p.num), Poly::new(p.den));
    let (dnum, dden) = (Poly::new(p.dnum), Poly::new(p.dden));
    let n = degree;
    let mut values = Vec::with_capacity(data.len());
    let mut omega = Vec::with_capacity(data.len());
    let mut integrand = 0.0;
    for k in 0..data.len() {
        let z = data.values[k].finite().expect("simple Hurwitz critical values are finite");
        // partial_t f at the (moving) critical point equals dz_k/dt
        let (a, b, da, db) = match data.points[k] {
            Point::Finite(w) => (num.eval(w), den.eval(w), dnum.eval(w), dden.eval(w)),
            Point::Infinity => {
                let zero = C64::new(0.0, 0.0);
                let lead = |q: &Poly| q.reversed(n).eval(zero);
                (lead(&num), lead(&den), lead(&dnum), lead(&dden))
            }
        };
        let zdot = (da * b - a * db) / (b * b);
        let w = -schiffer_at_critical(&data, k)?.schiffer / 12.0;
        integrand += 2.0 * (w * zdot).re;
        values.push(z);
        omega.push(w);
    }
    Ok(RawSample { t, values, omega, integrand })
}

/// Reorders `next` to follow `prev` by nearest-neighbour matching.
fn track(prev: &[C64], next: &mut RawSample) -> Result<(), TauError> {
    let m = prev.len();
    let mut order = Vec::with_capacity(m);
    let mut used = vec![false; m];
    for z in prev {
        let mut dist: Vec<(f64, usize)> = next.values.iter().enumerate().map(|(j, v)| ((v - z).norm(), j)).collect();
        dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (d0, j0) = dist[0];
        if used[j0] || (m > 1 && dist[1].0 < 2.0 * d0) {
            return Err(TauError::TrackingLost(next.t));
        }
        used[j0] = true;
        order.push(j0);
    }
    next.values = order.iter().map(|&j| next.values[j]).collect();
    next.omega = order.iter().map(|&j| next.omega[j]).collect();
    Ok(())
}

fn integrate_level(path: &ModuliPath, panels: usize, degree: usize) -> Result<(f64, Vec<RawSample>), TauError> {
    let (x, w) = gauss_legendre(GAUSS_ORDER);
    let segs = path.segments();
    let h = 1.0 / panels as f64;
    let mut total = 0.0;
    let mut samples: Vec<RawSample> = Vec::with_capacity(segs * panels * (GAUSS_ORDER + 1) + 1);
    let push = |mut s: RawSample, samples: &mut Vec<RawSample>| -> Result<(), TauError> {
        if let Some(prev) = samples.last() {
            track(&prev.values, &mut s)?;
        }
        samples.push(s);
        Ok(())
    };
    push(sample(path, 0.0, degree)?, &mut samples)?;
    for seg in 0..segs {
        for p in 0..panels {
            let t0 = seg as f64 + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                let s = sample(path, t0 + 0.5 * h * (xi + 1.0), degree)?;
                total += 0.5 * h * wi * s.integrand;
                push(s, &mut samples)?;
            }
            let end = if p + 1 == panels { (seg + 1) as f64 } else { t0 + h };
            push(sample(path, end, degree)?, &mut samples)?;
        }
    }
    Ok((total, samples))
}

/// Change of log|tau|^2 along the path by adaptive composite Gauss quadrature.
pub fn integrate_log_tau2(path: &ModuliPath) -> Result<TauResult, TauError> {
    path.check()?;
    let degree = path.map_at(0.0)?.degree;
    let mut panels = path.samples;
    let (mut prev, _) = integrate_level(path, panels, degree)?;
    loop {
        panels *= 2;
        let (cur, samples) = integrate_level(path, panels, degree)?;
        let err = (cur - prev).abs();
        if err <= QUAD_TOL * (1.0 + cur.abs()) || panels >= MAX_PANELS {
            let first = &samples[0].values;
            let last = &samples[samples.len() - 1].values;
            let conf = |v: &[C64]| v.iter().map(|z| (1.0 + z.norm_sqr()).ln()).sum::<f64>();
            let rhs_delta = cur - 0.25 * (conf(last) - conf(first));
            let ledger = samples
                .into_iter()
                .map(|s| PathSample { t: s.t, values: s.values, omega: s.omega, integrand: s.integrand })
                .collect();
            return Ok(TauResult {
                delta_log_tau2: cur,
                rhs_delta,
                quadrature_error: err,
                panels_per_segment: panels,
                ledger,
            });
        }
        prev = cur;
    }
}

/// Change of the logarithm of the genus-0 determinant formula right-hand
/// side, log|tau|^2 - (1/4) sum_k log(1+|z_k|^2), along the path.
pub fn rhs_delta(path: &ModuliPath) -> Result<TauResult, TauError> {
    integrate_log_tau2(path)
}

/// Largest asymmetry |d omega_k/dz_j - d omega_j/dz_k| over all pairs,
/// with derivatives by central differences along critical-value directions.
pub fn mixed_partials_defect(map: &RationalMap, h: f64) -> Result<f64, TauError> {
    use crate::rational_map::{critical_value_directions, free_coefficients, from_free_coefficients};
    let data = critical_data(map, DISTINCT_TOL)?;
    let dirs = critical_value_directions(map, &data)?;
    let base = free_coefficients(map);
    let m = data.len();
    let points: Vec<C64> = data
        .points
        .iter()
        .map(|p| p.finite().ok_or_else(|| TauError::InvalidPath("critical point at infinity".into())))
        .collect::<Result<_, _>>()?;
    // omega in the base ordering for a perturbed map
    let omega_at = |step: f64, dir: &[C64]| -> Result<Vec<C64>, TauError> {
        let p: Vec<C64> = base.iter().zip(dir).map(|(a, d)| a + d * step).collect();
        let g = from_free_coefficients(&p, map.degree)?;
        let dg = critical_data(&g, DISTINCT_TOL)?;
        let om: Vec<C64> =
            (0..dg.len()).map(|k| Ok(-schiffer_at_critical(&dg, k)?.schiffer / 12.0)).collect::<Result<_, TauError>>()?;
        points
            .iter()
            .map(|w| {
                let j = (0..dg.len())
                    .min_by(|&a, &b| {
                        let da = (dg.points[a].finite().unwrap_or(C64::new(f64::INFINITY, 0.0)) - w).norm();
                        let db = (dg.points[b].finite().unwrap_or(C64::new(f64::INFINITY, 0.0)) - w).norm();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                Ok(om[j])
            })
            .collect()
    };
    let mut jac = vec![vec![C64::new(0.0, 0.0); m]; m];
    for (j, dir) in dirs.iter().enumerate() {
        let plus = omega_at(h, dir)?;
        let minus = omega_at(-h, dir)?;
        for k in 0..m {
            jac[k][j] = (plus[k] - minus[k]) / (2.0 * h);
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..m {
        for j in 0..k {
            worst = worst.max((jac[k][j] - jac[j][k]).norm());
        }
    }
    Ok(worst)
}
