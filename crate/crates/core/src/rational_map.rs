//! Rational maps of the Riemann sphere and their Hurwitz data.
//!
//! A map is stored as a pair of polynomials with ascending coefficients,
//! normalized so that the denominator is monic. Points of the sphere carry an
//! explicit tag for infinity instead of a large-magnitude sentinel.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative magnitude below which a trailing coefficient is treated as zero.
const COEFF_EPS: f64 = 1e-14;

/// Two critical values closer than this (chordal metric) count as coincident.
pub const DISTINCT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error("numerator and denominator share a root near {0}")]
    CommonRoot(C64),
    #[error("root polishing stalled (residual {residual:.3e} at {root})")]
    RootFindingFailure { root: C64, residual: f64 },
    #[error("degenerate critical point {index}: not simple (|c2| = {c2_abs:.3e})")]
    DegenerateCritical { index: usize, c2_abs: f64 },
    #[error("rotation is not unitary: |a|^2+|b|^2 = {0}")]
    NotUnitary(f64),
}

/// A point of the Riemann sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Finite(C64),
    Infinity,
}

impl Point {
    pub fn finite(self) -> Option<C64> {
        match self {
            Point::Finite(z) => Some(z),
            Point::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Point::Infinity)
    }

    /// Chordal distance on the unit sphere (diameter 2).
    pub fn chordal(self, other: Point) -> f64 {
        match (self, other) {
            (Point::Infinity, Point::Infinity) => 0.0,
            (Point::Finite(a), Point::Infinity) | (Point::Infinity, Point::Finite(a)) => {
                2.0 / (1.0 + a.norm_sqr()).sqrt()
            }
            (Point::Finite(a), Point::Finite(b)) => {
                2.0 * (a - b).norm() / ((1.0 + a.norm_sqr()) * (1.0 + b.norm_sqr())).sqrt()
            }
        }
    }

    /// Geodesic distance for the round metric 4|dz|^2/(1+|z|^2)^2.
    pub fn spherical(self, other: Point) -> f64 {
        2.0 * (0.5 * self.chordal(other)).min(1.0).asin()
    }
}

impl From<C64> for Point {
    fn from(z: C64) -> Self {
        Point::Finite(z)
    }
}

/// Polynomial with complex coefficients in ascending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<C64>,
}

impl Poly {
    /// Builds a polynomial, dropping leading coefficients that are negligible
    /// relative to the largest one.
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        while coeffs.len() > 1 && coeffs.last().unwrap().norm() <= COEFF_EPS * scale {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        Poly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    pub fn leading(&self) -> C64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Sum of |c_i||z|^i, the natural scale for rounding errors of `eval`.
    pub fn eval_scale(&self, z: C64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn deriv(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly { coeffs: vec![C64::new(0.0, 0.0)] };
        }
        Poly {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly { coeffs: out }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Poly, i: usize| p.coeffs.get(i).copied().unwrap_or_default();
        Poly { coeffs: (0..n).map(|i| get(self, i) + get(other, i)).collect() }
    }

    pub fn scale(&self, s: C64) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    /// Coefficients reversed relative to degree `n`: returns u^n p(1/u).
    pub fn reversed(&self, n: usize) -> Poly {
        let mut out = vec![C64::new(0.0, 0.0); n + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if i <= n {
                out[n - i] = c;
            }
        }
        Poly { coeffs: out }
    }

    /// Coefficients of p(a + u) in powers of u.
    pub fn taylor_shift(&self, a: C64) -> Poly {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let t = c[j + 1] * a;
                c[j] += t;
            }
        }
        Poly { coeffs: c }
    }

    /// Roots via companion-matrix eigenvalues followed by Newton polishing.
    pub fn roots(&self, tol: f64) -> Result<Vec<C64>, MapError> {
        let p = Poly::new(self.coeffs.clone());
        let d = p.degree();
        if d == 0 {
            return Ok(Vec::new());
        }
        let lead = p.leading();
        let mut comp = Mat::<C64>::zeros(d, d);
        for i in 1..d {
            comp[(i, i - 1)] = C64::new(1.0, 0.0);
        }
        for i in 0..d {
            comp[(i, d - 1)] = -p.coeffs[i] / lead;
        }
        let eig = comp
            .eigenvalues()
            .map_err(|_| MapError::RootFindingFailure { root: C64::default(), residual: f64::NAN })?;
        let dp = p.deriv();
        let mut roots = Vec::with_capacity(d);
        for mut r in eig {
            for _ in 0..60 {
                let v = p.eval(r);
                let dv = dp.eval(r);
                if dv.norm() == 0.0 {
                    break;
                }
                let step = v / dv;
                r -= step;
                if step.norm() <= 1e-16 * (1.0 + r.norm()) {
                    break;
                }
            }
            let residual = p.eval(r).norm() / p.eval_scale(r).max(f64::MIN_POSITIVE);
            if !(residual <= tol) {
                return Err(MapError::RootFindingFailure { root: r, residual });
            }
            roots.push(r);
        }
        Ok(roots)
    }
}

/// Truncated Taylor series division a/b, b[0] != 0.
pub(crate) fn series_div(a: &[C64], b: &[C64], order: usize) -> Vec<C64> {
    let get = |v: &[C64], i: usize| v.get(i).copied().unwrap_or_default();
    let mut c = vec![C64::new(0.0, 0.0); order];
    for n in 0..order {
        let mut acc = get(a, n);
        for j in 1..=n {
            acc -= get(b, j) * c[n - j];
        }
        c[n] = acc / b[0];
    }
    c
}

/// Chart used to evaluate a map near a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// the affine coordinate w
    W,
    /// the coordinate 1/w
    InvW,
}

/// Value and affine-chart derivative of a map at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapValue {
    pub value: Point,
    pub derivative: Point,
    pub chart: Chart,
}

/// A rational map p/q of degree N = max(deg p, deg q) >= 2, with q monic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalMap {
    pub numerator: Poly,
    pub denominator: Poly,
    pub degree: usize,
}

impl RationalMap {
    pub fn new(numerator: Poly, denominator: Poly) -> Result<Self, MapError> {
        let numerator = Poly::new(numerator.coeffs);
        let denominator = Poly::new(denominator.coeffs);
        if denominator.is_zero() {
            return Err(MapError::Invalid("zero denominator".into()));
        }
        if numerator.coeffs.iter().chain(&denominator.coeffs).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(MapError::Invalid("non-finite coefficient".into()));
        }
        let degree = numerator.degree().max(denominator.degree());
        if degree < 2 {
            return Err(MapError::Invalid(format!("degree {degree} < 2")));
        }
        let lead = denominator.leading();
        let numerator = numerator.scale(lead.inv());
        let denominator = denominator.scale(lead.inv());
        for r in denominator.roots(1e-8)? {
            let rel = numerator.eval(r).norm() / numerator.eval_scale(r).max(f64::MIN_POSITIVE);
            if rel < 1e-10 {
                return Err(MapError::CommonRoot(r));
            }
        }
        Ok(RationalMap { numerator, denominator, degree })
    }

    /// The degree-2 family F[z1,z2](w) = (z1+z2)/2 + ((z2-z1)/4)(w + 1/w),
    /// with critical points -1, +1 over z1, z2 and poles at 0, infinity.
    pub fn degree2(z1: C64, z2: C64) -> Result<Self, MapError> {
        if (z1 - z2).norm() == 0.0 {
            return Err(MapError::Invalid("coincident critical values".into()));
        }
        let a = (z2 - z1) / 4.0;
        let c = (z1 + z2) / 2.0;
        RationalMap::new(
            Poly::new(vec![a, c, a]),
            Poly::new(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
        )
    }

    /// The monomial w^n.
    pub fn monomial(n: usize) -> Result<Self, MapError> {
        let mut c = vec![C64::new(0.0, 0.0); n + 1];
        c[n] = C64::new(1.0, 0.0);
        RationalMap::new(Poly::new(c), Poly::from_real(&[1.0]))
    }

    /// Numerator and denominator in the chart u = 1/w: f(1/u) = P(u)/Q(u).
    pub fn inverted_chart(&self) -> (Poly, Poly) {
        (self.numerator.reversed(self.degree), self.denominator.reversed(self.degree))
    }

    fn eval_pair(p: &Poly, q: &Poly, z: C64) -> (Point, Point) {
        let (pv, qv) = (p.eval(z), q.eval(z));
        let (dp, dq) = (p.deriv().eval(z), q.deriv().eval(z));
        if qv.norm() == 0.0 {
            return (Point::Infinity, Point::Infinity);
        }
        let f = pv / qv;
        let fp = (dp * qv - pv * dq) / (qv * qv);
        let val = if f.re.is_finite() && f.im.is_finite() { Point::Finite(f) } else { Point::Infinity };
        let der = if fp.re.is_finite() && fp.im.is_finite() { Point::Finite(fp) } else { Point::Infinity };
        (val, der)
    }

    /// Value and df/dw, evaluated in the 1/w chart when |w| > 1.
    pub fn evaluate(&self, w: Point) -> MapValue {
        match w {
            Point::Finite(w) if w.norm() <= 1.0 => {
                let (value, derivative) = Self::eval_pair(&self.numerator, &self.denominator, w);
                MapValue { value, derivative, chart: Chart::W }
            }
            _ => {
                let (p, q) = self.inverted_chart();
                let u = match w {
                    Point::Finite(w) => w.inv(),
                    Point::Infinity => C64::new(0.0, 0.0),
                };
                let (value, dfdu) = Self::eval_pair(&p, &q, u);
                let derivative = match (value, dfdu) {
                    (Point::Infinity, _) | (_, Point::Infinity) => Point::Infinity,
                    (_, Point::Finite(d)) => Point::Finite(-d * u * u),
                };
                MapValue { value, derivative, chart: Chart::InvW }
            }
        }
    }

    /// Spherical derivative squared times the chart factor:
    /// |f'(w)|^2 (1+|w|^2)^2 / (1+|f(w)|^2)^2, evaluated stably at poles and infinity.
    pub fn conformal_weight(&self, w: Point) -> f64 {
        MapCharts::new(self).weight(w)
    }

    /// Poles with multiplicity: roots of the denominator, plus infinity
    /// with multiplicity deg p - deg q when positive.
    pub fn poles(&self) -> Result<Vec<Point>, MapError> {
        let mut out: Vec<Point> = self.denominator.roots(1e-8)?.into_iter().map(Point::Finite).collect();
        let dp = self.numerator.degree();
        let dq = self.denominator.degree();
        for _ in dq..dp {
            out.push(Point::Infinity);
        }
        Ok(out)
    }

    /// Numerator of f' as a polynomial: p'q - pq'.
    pub fn derivative_numerator(&self) -> Poly {
        let (p, q) = (&self.numerator, &self.denominator);
        let a = p.deriv().mul(q);
        let b = p.mul(&q.deriv()).scale(C64::new(-1.0, 0.0));
        Poly::new(a.add(&b).coeffs)
    }
}

/// Precomputed polynomials for repeated evaluation of a map in both charts.
#[derive(Clone, Debug)]
pub struct MapCharts {
    w: [Poly; 4],
    inv: [Poly; 4],
}

impl MapCharts {
    pub fn new(map: &RationalMap) -> Self {
        let (pi, qi) = map.inverted_chart();
        let (p, q) = (map.numerator.clone(), map.denominator.clone());
        MapCharts {
            w: [p.deriv(), q.deriv(), p, q],
            inv: [pi.deriv(), qi.deriv(), pi, qi],
        }
    }

    fn select(&self, w: Point) -> (&[Poly; 4], C64, Chart) {
        match w {
            Point::Finite(w) if w.norm() <= 1.0 => (&self.w, w, Chart::W),
            Point::Finite(w) => (&self.inv, w.inv(), Chart::InvW),
            Point::Infinity => (&self.inv, C64::new(0.0, 0.0), Chart::InvW),
        }
    }

    /// Conformal weight |f'|^2 (1+|w|^2)^2 / (1+|f|^2)^2; the expression is the
    /// same in the 1/w chart, and switching to 1/f where |f| > 1 keeps it
    /// finite at poles.
    pub fn weight(&self, w: Point) -> f64 {
        let (polys, z, _) = self.select(w);
        let [dp, dq, p, q] = polys;
        let (pv, qv, dpv, dqv) = (p.eval(z), q.eval(z), dp.eval(z), dq.eval(z));
        let (num, den, dnum, dden) = if pv.norm() <= qv.norm() { (pv, qv, dpv, dqv) } else { (qv, pv, dqv, dpv) };
        let g = num / den;
        let gp = (dnum * den - num * dden) / (den * den);
        let chart = 1.0 + z.norm_sqr();
        gp.norm_sqr() * chart * chart / (1.0 + g.norm_sqr()).powi(2)
    }

    /// Value of the map at w.
    pub fn value(&self, w: Point) -> Point {
        let (polys, z, _) = self.select(w);
        let (pv, qv) = (polys[2].eval(z), polys[3].eval(z));
        if qv.norm() == 0.0 {
            return Point::Infinity;
        }
        let f = pv / qv;
        if f.re.is_finite() && f.im.is_finite() {
            Point::Finite(f)
        } else {
            Point::Infinity
        }
    }
}

/// Taylor coefficients c_0..c_6 of the local expansion at a critical point.
/// For a finite critical value these are the coefficients of f(w) - z_k;
/// when the critical value is infinite they belong to 1/f instead. When the
/// critical point itself is infinite the local variable is u = 1/w.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Taylor {
    pub c: Vec<C64>,
}

impl Taylor {
    pub fn c2(&self) -> C64 {
        self.c[2]
    }
    pub fn c3(&self) -> C64 {
        self.c[3]
    }
    pub fn c4(&self) -> C64 {
        self.c[4]
    }
}

/// Number of Taylor coefficients kept per critical point.
pub const TAYLOR_ORDER: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub points: Vec<Point>,
    pub values: Vec<Point>,
    pub taylor: Vec<Taylor>,
    /// per point: true when the critical point is simple
    pub simple: Vec<bool>,
}

impl CriticalData {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Finite critical values in order; None if any is infinite.
    pub fn finite_values(&self) -> Option<Vec<C64>> {
        self.values.iter().map(|v| v.finite()).collect()
    }
}

fn local_taylor(p: &Poly, q: &Poly, at: C64) -> (Point, Vec<C64>) {
    let ps = p.taylor_shift(at);
    let qs = q.taylor_shift(at);
    let (a0, b0) = (ps.coeffs[0], qs.coeffs[0]);
    let scale = ps.eval_scale(C64::new(0.0, 0.0)).max(qs.eval_scale(C64::new(0.0, 0.0)));
    if b0.norm() > 1e-12 * scale.max(1e-300) || b0.norm() >= a0.norm() {
        let mut c = series_div(&ps.coeffs, &qs.coeffs, TAYLOR_ORDER);
        let z = c[0];
        c[0] = C64::new(0.0, 0.0);
        (Point::Finite(z), c)
    } else {
        let c = series_div(&qs.coeffs, &ps.coeffs, TAYLOR_ORDER);
        (Point::Infinity, c)
    }
}

/// Critical points, values and local Taylor data of a map.
pub fn critical_data(map: &RationalMap, tol: f64) -> Result<CriticalData, MapError> {
    let d = map.derivative_numerator();
    let finite = d.roots(tol)?;
    let expected = 2 * map.degree - 2;
    let at_infinity = expected.saturating_sub(d.degree());
    if finite.len() + at_infinity != expected {
        return Err(MapError::Invalid(format!(
            "critical count {} does not match 2N-2 = {expected}",
            finite.len() + at_infinity
        )));
    }
    let mut points: Vec<Point> = finite.iter().copied().map(Point::Finite).collect();
    for _ in 0..at_infinity {
        points.push(Point::Infinity);
    }
    let (pi, qi) = map.inverted_chart();
    let mut values = Vec::with_capacity(points.len());
    let mut taylor = Vec::with_capacity(points.len());
    let mut simple = Vec::with_capacity(points.len());
    for (i, pt) in points.iter().enumerate() {
        let (value, c) = match *pt {
            Point::Finite(w) => local_taylor(&map.numerator, &map.denominator, w),
            Point::Infinity => local_taylor(&pi, &qi, C64::new(0.0, 0.0)),
        };
        let clustered = points
            .iter()
            .enumerate()
            .any(|(j, other)| j != i && pt.chordal(*other) < 1e-6);
        let c2_abs = c[2].norm();
        let is_simple = !clustered && c2_abs >= tol && c[1].norm() <= 1e-6 * (1.0 + c2_abs);
        if !is_simple {
            return Err(MapError::DegenerateCritical { index: i, c2_abs });
        }
        values.push(value);
        taylor.push(Taylor { c });
        simple.push(is_simple);
    }
    Ok(CriticalData { points, values, taylor, simple })
}

/// Free coefficients of a map: all numerator coefficients (padded to degree
/// N) followed by the non-leading denominator coefficients.
pub fn free_coefficients(map: &RationalMap) -> Vec<C64> {
    let n = map.degree;
    let mut p: Vec<C64> = (0..=n).map(|i| map.numerator.coeffs.get(i).copied().unwrap_or_default()).collect();
    p.extend((0..n).map(|i| map.denominator.coeffs.get(i).copied().unwrap_or_default()));
    p
}

/// Inverse of `free_coefficients` for a monic denominator of degree N.
pub fn from_free_coefficients(p: &[C64], degree: usize) -> Result<RationalMap, MapError> {
    let num = p[..=degree].to_vec();
    let mut den = p[degree + 1..].to_vec();
    den.push(C64::new(1.0, 0.0));
    RationalMap::new(Poly::new(num), Poly::new(den))
}

/// For each critical value k, the minimum-norm direction d_k in free
/// coefficient space with dz_j(d_k) = delta_jk to first order. Requires the
/// map to be normalized with deg q = N and all critical points finite.
pub fn critical_value_directions(map: &RationalMap, data: &CriticalData) -> Result<Vec<Vec<C64>>, MapError> {
    let n = map.degree;
    if map.denominator.degree() != n {
        return Err(MapError::Invalid("directions need a denominator of full degree".into()));
    }
    let m = data.len();
    let np = 2 * n + 1;
    let mut jac = vec![vec![C64::new(0.0, 0.0); np]; m];
    for (k, pt) in data.points.iter().enumerate() {
        let w = pt.finite().ok_or_else(|| MapError::Invalid("critical point at infinity".into()))?;
        let q = map.denominator.eval(w);
        let f = map.numerator.eval(w) / q;
        let mut wp = C64::new(1.0, 0.0);
        for j in 0..=n {
            jac[k][j] = wp / q;
            if j < n {
                jac[k][n + 1 + j] = -f * wp / q;
            }
            wp *= w;
        }
    }
    // G = J J^H, then d_k = J^H G^{-1} e_k
    let mut g = vec![vec![C64::new(0.0, 0.0); m]; m];
    for a in 0..m {
        for b in 0..m {
            g[a][b] = (0..np).map(|j| jac[a][j] * jac[b][j].conj()).sum();
        }
    }
    let ginv = invert_small(&g).ok_or_else(|| MapError::Invalid("critical values are not independent coordinates".into()))?;
    Ok((0..m)
        .map(|k| (0..np).map(|j| (0..m).map(|a| jac[a][j].conj() * ginv[a][k]).sum()).collect())
        .collect())
}

fn invert_small(a: &[Vec<C64>]) -> Option<Vec<Vec<C64>>> {
    let n = a.len();
    let mut m: Vec<Vec<C64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].norm().partial_cmp(&m[y][col].norm()).unwrap())?;
        if m[piv][col].norm() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        let inv = m[col][col].inv();
        for v in m[col].iter_mut() {
            *v *= inv;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f.norm() != 0.0 {
                    for c in 0..2 * n {
                        let t = m[col][c] * f;
                        m[r][c] -= t;
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// simple critical points, all critical values finite and pairwise distinct,
    /// simple poles that are not critical
    pub simple_hurwitz: bool,
    /// simple critical points; critical values may include infinity
    pub solver_admissible: bool,
    pub critical_points: usize,
    pub poles: Vec<Point>,
    pub reasons: Vec<String>,
}

/// Classifies a map with already computed critical data.
pub fn validate(map: &RationalMap, data: &CriticalData) -> ValidationReport {
    let mut reasons = Vec::new();
    let solver_admissible = data.simple.iter().all(|&s| s) && data.len() == 2 * map.degree - 2;
    if !solver_admissible {
        reasons.push("non-simple critical point".to_string());
    }
    if data.values.iter().any(|v| v.is_infinite()) {
        reasons.push("critical value at infinity".to_string());
    }
    for i in 0..data.values.len() {
        for j in i + 1..data.values.len() {
            if data.values[i].chordal(data.values[j]) <= DISTINCT_TOL {
                reasons.push(format!("critical values {i} and {j} coincide"));
            }
        }
    }
    let poles = map.poles().unwrap_or_default();
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            if poles[i].chordal(poles[j]) < 1e-6 {
                reasons.push(format!("poles {i} and {j} coincide (multiple pole)"));
            }
        }
    }
    ValidationReport {
        simple_hurwitz: solver_admissible && reasons.is_empty(),
        solver_admissible,
        critical_points: data.len(),
        poles,
        reasons,
    }
}

/// The isometry z -> (a z + b)/(-conj(b) z + conj(a)) of the round sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetRotation {
    pub a: C64,
    pub b: C64,
}

impl TargetRotation {
    pub fn new(a: C64, b: C64) -> Result<Self, MapError> {
        let n = a.norm_sqr() + b.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(MapError::NotUnitary(n));
        }
        Ok(TargetRotation { a, b })
    }

    pub fn identity() -> Self {
        TargetRotation { a: C64::new(1.0, 0.0), b: C64::new(0.0, 0.0) }
    }

    /// Rotation by `angle` about the unit axis `n` (as a point of R^3).
    pub fn about_axis(n: [f64; 3], angle: f64) -> Self {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let (s, c) = (0.5 * angle).sin_cos();
        let (x, y, z) = (n[0] / len, n[1] / len, n[2] / len);
        TargetRotation { a: C64::new(c, z * s), b: C64::new(y * s, x * s) }
    }

    /// The rotation applying `self` first and then `then`.
    pub fn then(&self, then: &TargetRotation) -> TargetRotation {
        let (a1, b1, a2, b2) = (self.a, self.b, then.a, then.b);
        TargetRotation { a: a2 * a1 - b2 * b1.conj(), b: a2 * b1 + b2 * a1.conj() }
    }

    pub fn apply(&self, z: Point) -> Point {
        match z {
            Point::Infinity => {
                if self.b.norm() == 0.0 {
                    Point::Infinity
                } else {
                    Point::Finite(-self.a / self.b.conj())
                }
            }
            Point::Finite(z) => {
                let den = -self.b.conj() * z + self.a.conj();
                if den.norm() == 0.0 {
                    Point::Infinity
                } else {
                    Point::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }
}

/// Returns rot o f, normalized.
pub fn rotate_target(map: &RationalMap, rot: &TargetRotation) -> Result<RationalMap, MapError> {
    let (p, q) = (&map.numerator, &map.denominator);
    let num = p.scale(rot.a).add(&q.scale(rot.b));
    let den = p.scale(-rot.b.conj()).add(&q.scale(rot.a.conj()));
    RationalMap::new(num, den)
}

/// JSON description of a map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapDescriptor {
    Family { family: String, z1: C64, z2: C64 },
    Coefficients { numerator: Vec<C64>, denominator: Vec<C64> },
}

impl MapDescriptor {
    pub fn build(&self) -> Result<RationalMap, MapError> {
        match self {
            MapDescriptor::Family { family, z1, z2 } => match family.as_str() {
                "degree2" => RationalMap::degree2(*z1, *z2),
                other => Err(MapError::Invalid(format!("unknown family {other:?}"))),
            },
            MapDescriptor::Coefficients { numerator, denominator } => {
                RationalMap::new(Poly::new(numerator.clone()), Poly::new(denominator.clone()))
            }
        }
    }
}
