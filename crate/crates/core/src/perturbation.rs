//! Model solutions near a 4 pi cone, expansion coefficients, and eigenvalue
//! perturbation under moving a critical value.

use crate::local_frame::FrameData;
use crate::rational_map::{CriticalData, MapError, Point, RationalMap};
use crate::spectral::{assemble, basis_at, solve, Assembly, ConeCoeffs, SpectralError, Trig, WeightField};
use faer::linalg::solvers::SolveLstsq;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

/// Annulus used for least-squares extraction of expansion coefficients.
pub const EXTRACTION_ANNULUS: (f64, f64) = (1e-3, 1e-2);

/// Default inner and outer cutoff radii as fractions of the distance from the
/// critical value to the nearest other critical value.
pub const DEFAULT_CUTOFF: (f64, f64) = (0.3, 0.6);

#[derive(Debug, Error)]
pub enum PerturbationError {
    #[error("cos(nu pi) vanishes for nu = {0}")]
    HalfIntegerNu(C64),
    #[error("indices {0:?} do not form a complete eigenvalue group")]
    IncompleteGroup(Vec<usize>),
    #[error("least-squares extraction failed: {0}")]
    Extraction(String),
    #[error("cone {0} is not supported: {1}")]
    Unsupported(usize, String),
    #[error("branch tracking of the distinguished parameter failed at {0} grid edges")]
    BranchTracking(usize),
    #[error("resolvent solve failed at lambda = {0}")]
    Resolvent(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Parameter of the separated model solution, lambda = nu (nu + 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: C64,
}

impl ModelParams {
    pub fn new(nu: C64) -> Result<Self, PerturbationError> {
        if (nu * PI).cos().norm() < 1e-12 {
            return Err(PerturbationError::HalfIntegerNu(nu));
        }
        Ok(ModelParams { nu })
    }

    /// The root with Re nu >= -1/2.
    pub fn from_lambda(lambda: C64) -> Result<Self, PerturbationError> {
        Self::new((lambda + 0.25).sqrt() - 0.5)
    }

    pub fn lambda(&self) -> C64 {
        self.nu * (self.nu + 1.0)
    }

    fn cos_nu_pi(&self) -> C64 {
        (self.nu * PI).cos()
    }

    /// Radial factor R(r) and dR/dr of Y = R(r) e^{-i arg w}, given r and
    /// c = cot(r/2) = |w|^2 (passed separately to keep precision near r = pi).
    fn radial(&self, r: f64, c: f64) -> (C64, C64) {
        let nu = self.nu;
        let dc = -0.5 * (1.0 + c * c);
        let (cn, sn) = ((nu * r).cos(), (nu * r).sin());
        let (rc, sc) = (c.sqrt(), c.powf(-0.5));
        let den = self.cos_nu_pi();
        let val = (cn * sc + sn * rc) / den;
        let der = (-nu * sn * sc - cn * 0.5 * sc / c * dc + nu * cn * rc + sn * 0.5 * sc * dc) / den;
        (val, der)
    }
}

/// Y = (1/w)(cos(nu r) + sin(nu r)|w|^2)/cos(nu pi) with |w|^2 = cot(r/2) and
/// arg w = psi.
pub fn legendre_y(r: f64, psi: f64, params: &ModelParams) -> Result<C64, PerturbationError> {
    ModelParams::new(params.nu)?;
    let (val, _) = params.radial(r, 1.0 / (0.5 * r).tan());
    Ok(val * C64::from_polar(1.0, -psi))
}

/// Model solution at a cover point w of the football map w -> w^2.
pub fn legendre_y_at(w: C64, params: &ModelParams) -> Result<C64, PerturbationError> {
    ModelParams::new(params.nu)?;
    let c = w.norm_sqr();
    let (val, _) = params.radial(2.0 * (1.0f64).atan2(c), c);
    Ok(val * C64::from_polar(1.0, -w.arg()))
}

/// (b, a, c) of the expansion Y = 1/x + c + a x-bar + b x + ... of the model.
pub fn model_b_a(params: &ModelParams) -> Result<(C64, C64, C64), PerturbationError> {
    ModelParams::new(params.nu)?;
    let nu = params.nu;
    let zero = C64::new(0.0, 0.0);
    Ok((zero, (1.0 + 2.0 * nu) * (nu * PI).tan(), zero))
}

/// The six coefficients a_{-1}, b_{-1}, a_0, b_0, a_1, b_1 of
/// u = a_{-1}/x-bar + b_{-1}/x + a_0 log|x| + b_0 + a_1 x-bar + b_1 x + R.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoeffs {
    pub am1: C64,
    pub bm1: C64,
    pub a0c: C64,
    pub b0c: C64,
    pub a1: C64,
    pub b1: C64,
}

/// q[u, v] = (Delta u, v) - (u, Delta v) in terms of expansion coefficients;
/// v's coefficients play the roles of c_{-1}, d_{-1}, c_0, d_0, c_1, d_1.
pub fn q_pairing(u: &ExpansionCoeffs, v: &ExpansionCoeffs) -> C64 {
    let (c_m1, d_m1, c_0, d_0, c_1, d_1) = (v.am1, v.bm1, v.a0c, v.b0c, v.a1, v.b1);
    4.0 * PI
        * (-u.am1 * d_1.conj() - u.bm1 * c_1.conj() - u.b0c * c_0.conj() / 2.0
            + u.a0c * d_0.conj() / 2.0
            + u.b1 * c_m1.conj()
            + u.a1 * d_m1.conj())
}

/// Least-squares fit of the expansion to samples (x, u(x)) on an annulus.
/// Second and third order remainder terms are fitted and discarded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub coeffs: ExpansionCoeffs,
    /// root-mean-square residual of the fit
    pub residual: f64,
}

pub fn fit_expansion(samples: &[(C64, C64)]) -> Result<ExpansionFit, PerturbationError> {
    type Col = fn(C64) -> C64;
    let cols: [Col; 13] = [
        |x| 1.0 / x.conj(),
        |x| 1.0 / x,
        |x| C64::new(x.norm().ln(), 0.0),
        |_| C64::new(1.0, 0.0),
        |x| x.conj(),
        |x| x,
        |x| x * x,
        |x| x.conj() * x.conj(),
        |x| C64::new(x.norm_sqr(), 0.0),
        |x| x * x.norm_sqr(),
        |x| x.conj() * x.norm_sqr(),
        |x| x * x * x,
        |x| x.conj() * x.conj() * x.conj(),
    ];
    if samples.len() < 2 * cols.len() {
        return Err(PerturbationError::Extraction("too few samples".into()));
    }
    let n = samples.len();
    let mut a = Mat::<C64>::zeros(n, cols.len());
    let mut rhs = Mat::<C64>::zeros(n, 1);
    let mut scale = vec![0.0f64; cols.len()];
    for (i, (x, u)) in samples.iter().enumerate() {
        for (j, f) in cols.iter().enumerate() {
            let v = f(*x);
            a[(i, j)] = v;
            scale[j] = scale[j].max(v.norm());
        }
        rhs[(i, 0)] = *u;
    }
    for (j, s) in scale.iter().enumerate() {
        for i in 0..n {
            a[(i, j)] /= *s;
        }
    }
    let sol = a.qr().solve_lstsq(&rhs);
    let mut resid = 0.0;
    for i in 0..n {
        let fitted: C64 = (0..cols.len()).map(|j| a[(i, j)] * sol[(j, 0)]).sum();
        resid += (fitted - rhs[(i, 0)]).norm_sqr();
    }
    let c: Vec<C64> = (0..cols.len()).map(|j| sol[(j, 0)] / scale[j]).collect();
    if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(PerturbationError::Extraction("non-finite coefficients".into()));
    }
    Ok(ExpansionFit {
        coeffs: ExpansionCoeffs { am1: c[0], bm1: c[1], a0c: c[2], b0c: c[3], a1: c[4], b1: c[5] },
        residual: (resid / n as f64).sqrt(),
    })
}

/// Samples of `u` on a polar grid of the annulus r_in < |x| < r_out.
pub fn annulus_samples<F: Fn(C64) -> C64>(u: F, (r_in, r_out): (f64, f64)) -> Vec<(C64, C64)> {
    let (nr, na) = (12, 24);
    let mut out = Vec::with_capacity(nr * na);
    for i in 0..nr {
        let r = r_in * (r_out / r_in).powf((i as f64 + 0.5) / nr as f64);
        for j in 0..na {
            let x = C64::from_polar(r, 2.0 * PI * (j as f64 + 0.25) / na as f64);
            out.push((x, u(x)));
        }
    }
    out
}

/// Expansion coefficients of the model solution fitted near the cone.
pub fn extract_model_expansion(params: &ModelParams) -> Result<ExpansionFit, PerturbationError> {
    ModelParams::new(params.nu)?;
    let samples = annulus_samples(|x| legendre_y_at(x, params).expect("checked nu"), EXTRACTION_ANNULUS);
    fit_expansion(&samples)
}

/// Largest |(Delta* - lambda) Y| over the given (r, psi) points, with
/// fourth-order five-point stencils in r and psi.
pub fn model_residual(params: &ModelParams, points: &[(f64, f64)], h: f64) -> Result<f64, PerturbationError> {
    ModelParams::new(params.nu)?;
    let y = |r: f64, p: f64| legendre_y(r, p, params).expect("checked nu");
    let d2 = |f: &dyn Fn(f64) -> C64, t: f64| {
        (-f(t + 2.0 * h) + 16.0 * f(t + h) - 30.0 * f(t) + 16.0 * f(t - h) - f(t - 2.0 * h)) / (12.0 * h * h)
    };
    let d1 = |f: &dyn Fn(f64) -> C64, t: f64| (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h);
    let lambda = params.lambda();
    let mut worst: f64 = 0.0;
    for &(r, p) in points {
        let fr = |t: f64| y(t, p);
        let fp = |t: f64| y(r, t);
        // phi = 2 psi is the angular coordinate of the polar form
        let lap = -d2(&fr, r) - d1(&fr, r) / r.tan() - 0.25 * d2(&fp, p) / (r.sin() * r.sin());
        worst = worst.max((lap - lambda * y(r, p)).norm());
    }
    Ok(worst)
}

/// A = 2 pi sum b_j^2 and B = 2 pi sum a_j^2 over a complete group.
pub fn group_derivative_prediction(coeffs: &ConeCoeffs, group: &[usize]) -> Result<(C64, C64), PerturbationError> {
    let mut sorted = group.to_vec();
    sorted.sort_unstable();
    if !coeffs.groups.iter().any(|g| *g == sorted) {
        return Err(PerturbationError::IncompleteGroup(sorted));
    }
    let a: C64 = sorted.iter().map(|&j| coeffs.b[j] * coeffs.b[j]).sum();
    let b: C64 = sorted.iter().map(|&j| coeffs.a[j] * coeffs.a[j]).sum();
    Ok((2.0 * PI * a, 2.0 * PI * b))
}

/// Finite-difference derivative of each group sum in a complex parameter h of
/// a map family, at one step size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDerivative {
    pub step: f64,
    /// d/d(Re h) of each group sum
    pub d_re: Vec<f64>,
    /// d/d(Im h) of each group sum
    pub d_im: Vec<f64>,
}

impl GroupDerivative {
    /// The Wirtinger derivative (d_re - i d_im)/2 of group g.
    pub fn holomorphic(&self, g: usize) -> C64 {
        C64::new(self.d_re[g], -self.d_im[g]) / 2.0
    }
}

/// Central differences of group sums at offsets +-step and +-i step; the
/// four re-solves run on the current rayon pool.
pub fn group_sum_derivative<F>(
    family: F,
    degree: usize,
    groups: &[Vec<usize>],
    step: f64,
    group_tol: f64,
) -> Result<GroupDerivative, PerturbationError>
where
    F: Fn(C64) -> Result<RationalMap, MapError> + Sync,
{
    let j = groups.iter().flatten().copied().max().unwrap_or(0);
    let offsets = [C64::new(step, 0.0), C64::new(-step, 0.0), C64::new(0.0, step), C64::new(0.0, -step)];
    let sums: Vec<Result<Vec<f64>, PerturbationError>> = offsets
        .par_iter()
        .map(|&h| {
            let wf = WeightField::new(family(h)?);
            let spec = solve(&wf, degree, j, group_tol)?;
            Ok(groups.iter().map(|g| g.iter().map(|&i| spec.values[i]).sum()).collect())
        })
        .collect();
    let sums: Vec<Vec<f64>> = sums.into_iter().collect::<Result<_, _>>()?;
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * step)).collect::<Vec<_>>();
    Ok(GroupDerivative { step, d_re: d(&sums[0], &sums[1]), d_im: d(&sums[2], &sums[3]) })
}

/// b(lambda) at one cone from the cutoff model plus a resolvent correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BLambda {
    pub lambda: f64,
    /// from the pairing identity 4 pi (b - binf) = -int G Y dVol, which is
    /// stationary in the Galerkin error of the correction
    pub b: C64,
    /// from the derivative of the correction at the cone; converges slowly in L
    pub b_pointwise: C64,
    pub binf: C64,
    pub support_nodes: usize,
}

fn smooth_step(t: f64) -> (f64, f64, f64) {
    // psi(t) = 1/(1 + e^h), h = 1/t - 1/(1-t); returns psi, psi', psi''
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let h = 1.0 / t - 1.0 / (1.0 - t);
    let h1 = -1.0 / (t * t) - 1.0 / ((1.0 - t) * (1.0 - t));
    let h2 = 2.0 / (t * t * t) - 2.0 / ((1.0 - t) * (1.0 - t) * (1.0 - t));
    let (psi, pq) = if h > 0.0 {
        let e = (-h).exp();
        (e / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
    } else {
        let e = h.exp();
        (1.0 / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
    };
    let d1 = -pq * h1;
    let d2 = -d1 * (1.0 - 2.0 * psi) * h1 - pq * h2;
    (psi, d1, d2)
}

/// Cutoff rho(d) in the spherical distance d to the critical value and its
/// first two d-derivatives.
fn cutoff(d: f64, d1: f64, d2: f64) -> (f64, f64, f64) {
    let w = d2 - d1;
    let (p, p1, p2) = smooth_step((d2 - d) / w);
    (p, -p1 / w, p2 / (w * w))
}

/// Support bookkeeping for one cone: grid nodes of the component of the
/// preimage of the cutoff disc containing the critical point, with the
/// branch of the football coordinate chosen continuously.
struct Support {
    nodes: Vec<(usize, usize)>,
    what: Vec<C64>,
}

fn track_support(
    asm: &Assembly,
    wf: &WeightField,
    data: &CriticalData,
    frame: &FrameData,
    k: usize,
    zk: C64,
    wk: C64,
    d_out: f64,
) -> Result<Support, PerturbationError> {
    let grid = &asm.grid;
    let (nth, nphi) = (grid.x.len(), grid.nphi);
    // squared football coordinate and distance for every node
    let what2 = |w: C64| -> Option<C64> {
        match wf.value(Point::Finite(w)) {
            Point::Finite(z) => Some((z - zk) / (1.0 + zk.conj() * z)),
            Point::Infinity => (zk.norm() > 0.0).then(|| 1.0 / zk.conj()),
        }
    };
    let dist = |q: C64| 2.0 * q.norm().atan();
    // series for the seed region
    let ratio: f64 = (frame.x_of_u.get(2) / frame.x_of_u.get(1)).norm();
    let mut sep = f64::INFINITY;
    for (j, p) in data.points.iter().enumerate() {
        if j != k {
            if let Point::Finite(w) = p {
                sep = sep.min((w - wk).norm());
            }
        }
    }
    let r_seed = (0.2 / ratio.max(1e-12)).min(0.4 * sep);
    let series = |u: C64| {
        let x = frame.x_of_u.eval(u);
        x / (1.0 + zk.norm_sqr() + zk.conj() * x * x).sqrt()
    };
    let mut seed = (0, 0);
    let mut best = f64::INFINITY;
    for r in 0..nth {
        for s in 0..nphi {
            let d = Point::Finite(grid.node(r, s)).chordal(Point::Finite(wk));
            if d < best {
                best = d;
                seed = (r, s);
            }
        }
    }
    let mut value: Vec<Vec<Option<C64>>> = vec![vec![None; nphi]; nth];
    let mut nodes = Vec::new();
    let mut what = Vec::new();
    let mut queue = VecDeque::new();
    let assign = |r: usize, s: usize, parent: Option<C64>| -> Option<C64> {
        let w = grid.node(r, s);
        let q = what2(w)?;
        if dist(q) >= d_out {
            return None;
        }
        let root = q.sqrt();
        let u = w - wk;
        let target = if u.norm() < r_seed { series(u) } else { parent? };
        Some(if (root - target).norm() <= (root + target).norm() { root } else { -root })
    };
    let first = assign(seed.0, seed.1, None)
        .ok_or_else(|| PerturbationError::Unsupported(k, "the grid does not resolve the critical point".into()))?;
    value[seed.0][seed.1] = Some(first);
    queue.push_back(seed);
    while let Some((r, s)) = queue.pop_front() {
        let here = value[r][s].expect("queued nodes are assigned");
        nodes.push((r, s));
        what.push(here);
        let mut nb = vec![(r, (s + 1) % nphi), (r, (s + nphi - 1) % nphi)];
        if r > 0 {
            nb.push((r - 1, s));
        } else {
            nb.push((0, (s + nphi / 2) % nphi));
        }
        if r + 1 < nth {
            nb.push((r + 1, s));
        } else {
            nb.push((r, (s + nphi / 2) % nphi));
        }
        for (a, b) in nb {
            if value[a][b].is_none() {
                if let Some(v) = assign(a, b, Some(here)) {
                    value[a][b] = Some(v);
                    queue.push_back((a, b));
                }
            }
        }
    }
    // every edge inside the support away from the cone must keep the branch
    let mut bad = 0;
    for &(r, s) in &nodes {
        let v = value[r][s].expect("support node");
        for (a, b) in [(r, (s + 1) % nphi), (r + 1, s)] {
            if a >= nth {
                continue;
            }
            if let Some(u) = value[a][b] {
                let near = (grid.node(r, s) - wk).norm() < r_seed || (grid.node(a, b) - wk).norm() < r_seed;
                if !near && (u - v).norm() > (u + v).norm() {
                    bad += 1;
                }
            }
        }
    }
    if bad > 0 {
        return Err(PerturbationError::BranchTracking(bad));
    }
    Ok(Support { nodes, what })
}

/// Computes b(lambda) for lambda < 0 at critical point k. The solution of
/// (Delta* - lambda) Y = 0 with Y ~ 1/x is built as rho Yhat + v, where Yhat
/// is the rotated football solution, rho a radial cutoff in the target, and
/// v solves (Delta - lambda) v = -(Delta* - lambda)(rho Yhat) by Galerkin.
pub fn b_lambda(
    map: &RationalMap,
    data: &CriticalData,
    frames: &[FrameData],
    k: usize,
    lambda: f64,
    degree: usize,
    cut: (f64, f64),
) -> Result<BLambda, PerturbationError> {
    let wf = WeightField::new(map.clone());
    let asm = assemble(&wf, degree)?;
    b_lambda_with(&asm, &wf, data, frames, k, &[lambda], cut).map(|mut v| v.remove(0))
}

/// As `b_lambda` for several lambdas sharing one assembly.
pub fn b_lambda_with(
    asm: &Assembly,
    wf: &WeightField,
    data: &CriticalData,
    frames: &[FrameData],
    k: usize,
    lambdas: &[f64],
    cut: (f64, f64),
) -> Result<Vec<BLambda>, PerturbationError> {
    let zk = data.values[k].finite().ok_or_else(|| PerturbationError::Unsupported(k, "infinite critical value".into()))?;
    let wk = data.points[k].finite().ok_or_else(|| PerturbationError::Unsupported(k, "critical point at infinity".into()))?;
    let frame = &frames[k];
    let binf = frame.binf.expect("finite critical value");
    let dmin = data
        .values
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, v)| v.spherical(Point::Finite(zk)))
        .fold(f64::INFINITY, f64::min);
    let (d_in, d_out) = (cut.0 * dmin, cut.1 * dmin);
    let support = track_support(asm, wf, data, frame, k, zk, wk, d_out)?;
    let norm = (1.0 + zk.norm_sqr()).powf(-0.5);
    let grid = &asm.grid;
    let n = asm.basis.dim;
    let at_cone = basis_at(&asm.basis, Point::Finite(wk));

    // basis values at support nodes, computed once
    let mut phi = Mat::<f64>::zeros(n, support.nodes.len());
    for (c, &(r, s)) in support.nodes.iter().enumerate() {
        let ang = grid.phi(s);
        for (b, &(m, t)) in asm.basis.blocks.iter().enumerate() {
            let trig = match (m, t) {
                (0, _) => 1.0,
                (_, Trig::Cos) => SQRT_2 * (m as f64 * ang).cos(),
                (_, Trig::Sin) => SQRT_2 * (m as f64 * ang).sin(),
            };
            let off = asm.basis.offsets[b];
            for l in m..=asm.basis.degree {
                phi[(off + l - m, c)] = asm.legendre[m][(l - m, r)] * trig;
            }
        }
    }

    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !(lambda < 0.0) {
            return Err(PerturbationError::Resolvent(lambda));
        }
        let params = ModelParams::from_lambda(C64::new(lambda, 0.0))?;
        let mut g = Vec::with_capacity(support.nodes.len());
        let mut rho_y = Vec::with_capacity(support.nodes.len());
        for &what in &support.what {
            let d = 2.0 * what.norm_sqr().atan();
            let r = PI - d;
            let (rho, rho1, rho2) = cutoff(d, d_in, d_out);
            let (rv, rd) = params.radial(r, what.norm_sqr());
            let phase = what.conj() / what.norm();
            let y = norm * rv * phase;
            let yr = norm * rd * phase;
            g.push(y * (-rho2 + rho1 / r.tan()) + 2.0 * rho1 * yr);
            rho_y.push(rho * y);
        }
        // load vector F_i = int G phi_i dVol
        let mut f_re = Mat::<f64>::zeros(n, 1);
        let mut f_im = Mat::<f64>::zeros(n, 1);
        let mut pair = C64::new(0.0, 0.0);
        let mut dv = Vec::with_capacity(support.nodes.len());
        for (c, &(r, s)) in support.nodes.iter().enumerate() {
            let vol = grid.area(r) * asm.mu[r][s];
            let gv = g[c] * vol;
            dv.push(gv);
            pair += gv * rho_y[c];
        }
        for i in 0..n {
            let (mut a, mut b) = (0.0, 0.0);
            for (c, gv) in dv.iter().enumerate() {
                let p = phi[(i, c)];
                a += gv.re * p;
                b += gv.im * p;
            }
            f_re[(i, 0)] = -a;
            f_im[(i, 0)] = -b;
        }
        let mut op = Mat::<f64>::from_fn(n, n, |i, j| -lambda * asm.m[(i, j)]);
        for i in 0..n {
            op[(i, i)] += asm.k[i];
        }
        let llt = op.llt(Side::Lower).map_err(|_| PerturbationError::Resolvent(lambda))?;
        use faer::linalg::solvers::Solve;
        let v_re = llt.solve(&f_re);
        let v_im = llt.solve(&f_im);
        let mut dcone = C64::new(0.0, 0.0);
        for i in 0..n {
            dcone += at_cone.d[i] * C64::new(v_re[(i, 0)], v_im[(i, 0)]);
        }
        for (c, gv) in dv.iter().enumerate() {
            let mut vc = C64::new(0.0, 0.0);
            for i in 0..n {
                vc += C64::new(v_re[(i, 0)], v_im[(i, 0)]) * phi[(i, c)];
            }
            pair += gv * vc;
        }
        out.push(BLambda {
            lambda,
            b: binf - pair / (4.0 * PI),
            b_pointwise: binf + dcone / frame.sqrt_c2,
            binf,
            support_nodes: support.nodes.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_frame::frames;
    use crate::rational_map::{critical_data, DISTINCT_TOL};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn model_value_examples() {
        let p = ModelParams::new(c(1.0, 0.0)).unwrap();
        let y = legendre_y(PI / 2.0, 0.0, &p).unwrap();
        assert!((y - c(-1.0, 0.0)).norm() < 1e-14);
        // Y w -> 1 as w -> 0
        let w = c(1e-5, 0.0);
        assert!((legendre_y_at(w, &p).unwrap() * w - 1.0).norm() < 1e-9);
        assert!(matches!(ModelParams::new(c(0.5, 0.0)), Err(PerturbationError::HalfIntegerNu(_))));
    }

    #[test]
    fn model_coefficients() {
        let (b, a, cc) = model_b_a(&ModelParams::new(c(1.0, 0.0)).unwrap()).unwrap();
        assert!(b.norm() == 0.0 && a.norm() < 1e-15 && cc.norm() == 0.0);
        let (_, a, _) = model_b_a(&ModelParams::new(c(0.25, 0.0)).unwrap()).unwrap();
        assert!((a - c(1.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn extracted_model_coefficients() {
        for nu in [0.25, 0.3, 0.7, 1.2] {
            let p = ModelParams::new(c(nu, 0.0)).unwrap();
            let fit = extract_model_expansion(&p).unwrap();
            let (_, a, _) = model_b_a(&p).unwrap();
            assert!(fit.coeffs.b1.norm() < 1e-6, "nu={nu} b={}", fit.coeffs.b1);
            assert!((fit.coeffs.bm1 - 1.0).norm() < 1e-9);
            assert!((fit.coeffs.a1 - a).norm() < 1e-4, "nu={nu} a={} vs {a}", fit.coeffs.a1);
        }
    }

    #[test]
    fn model_satisfies_the_equation() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (0.4 + 0.11 * i as f64, 0.37 * i as f64)).collect();
        for nu in [c(0.3, 0.0), c(1.2, 0.0), c(-0.5, 3.0)] {
            let p = ModelParams::new(nu).unwrap();
            let res = model_residual(&p, &pts, 1e-3).unwrap();
            assert!(res < 1e-6, "nu={nu} residual {res}");
        }
    }

    #[test]
    fn q_pairing_examples() {
        let one = c(1.0, 0.0);
        let u = ExpansionCoeffs { b1: one, ..Default::default() };
        let v = ExpansionCoeffs { am1: one, ..Default::default() };
        assert!((q_pairing(&u, &v) - 4.0 * PI).norm() < 1e-14);
        let u = ExpansionCoeffs { b0c: one, ..Default::default() };
        let v = ExpansionCoeffs { a0c: one, ..Default::default() };
        assert!((q_pairing(&u, &v) + 2.0 * PI).norm() < 1e-14);
    }

    #[test]
    fn zero_mode_prediction_vanishes() {
        let f = RationalMap::degree2(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let data = critical_data(&f, DISTINCT_TOL).unwrap();
        let fr = frames(&data).unwrap();
        let spec = crate::spectral::solve_with(
            &WeightField::new(f),
            12,
            &crate::spectral::SolveOptions { j: 4, vectors: 5, group_tol: 1e-3 },
        )
        .unwrap();
        let cc = crate::spectral::cone_coeffs(&spec, &data, &fr, 0).unwrap();
        let (a, b) = group_derivative_prediction(&cc, &[0]).unwrap();
        assert!(a.norm() < 1e-10 && b.norm() < 1e-10);
        assert!(matches!(group_derivative_prediction(&cc, &[3]), Err(PerturbationError::IncompleteGroup(_))));
    }

    #[test]
    fn b_lambda_approaches_its_limit() {
        let (z1, z2) = (c(0.3, 0.2), c(1.0, -0.5));
        let f = RationalMap::degree2(z1, z2).unwrap();
        let data = critical_data(&f, DISTINCT_TOL).unwrap();
        let fr = frames(&data).unwrap();
        let k = data.values.iter().position(|v| (v.finite().unwrap() - z1).norm() < 1e-9).unwrap();
        let wf = WeightField::new(f);
        let asm = assemble(&wf, 20).unwrap();
        let r = b_lambda_with(&asm, &wf, &data, &fr, k, &[-10.0, -50.0, -200.0], DEFAULT_CUTOFF).unwrap();
        let expected = 0.5 * z1.conj() / (1.0 + z1.norm_sqr());
        let err: Vec<f64> = r.iter().map(|b| (b.b - expected).norm()).collect();
        assert!(err[0] > err[1] && err[1] > err[2], "{err:?}");
        assert!(err[2] < 1e-5, "{err:?}");
    }

    #[test]
    fn smooth_step_derivatives() {
        for t in [0.1, 0.3, 0.5, 0.8, 0.97] {
            let h = 1e-5;
            let (_, d1, d2) = smooth_step(t);
            let fd1 = (smooth_step(t + h).0 - smooth_step(t - h).0) / (2.0 * h);
            let fd2 = (smooth_step(t + h).1 - smooth_step(t - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((d2 - fd2).abs() < 1e-5 * (1.0 + d2.abs()));
        }
    }
}
