//! Galerkin eigensolver for the Laplacian of the pulled-back metric f*m on
//! the cover sphere.
//!
//! The Dirichlet form is conformally invariant, so in real orthonormal
//! spherical harmonics on the cover the stiffness matrix is diag l(l+1) and
//! the whole metric dependence sits in the mass matrix
//! M_ij = int Y_i Y_j mu dA_round with mu the conformal weight of the map.

pub mod legendre;

use crate::local_frame::FrameData;
use crate::rational_map::{CriticalData, MapCharts, Point, RationalMap};
use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par, Side};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

/// Quadrature oversampling beyond polynomial exactness.
pub const OVERSAMPLE: usize = 2;

/// Default relative tolerance for grouping eigenvalues.
pub const DEFAULT_GROUP_TOL: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("mass matrix is not positive definite at degree {0}")]
    QuadratureUnderflow(usize),
    #[error("basis degree {0} is below the minimum of 2")]
    DegreeTooSmall(usize),
    #[error("requested {requested} eigenpairs but the basis has dimension {dim}")]
    TooManyModes { requested: usize, dim: usize },
    #[error("eigenvector {0} was not computed")]
    MissingVector(usize),
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("spectrum export failed: {0}")]
    Export(String),
}

/// The conformal weight of a map relative to the round metric of the cover.
#[derive(Clone, Debug)]
pub struct WeightField {
    pub map: RationalMap,
    charts: MapCharts,
}

impl WeightField {
    pub fn new(map: RationalMap) -> Self {
        let charts = MapCharts::new(&map);
        WeightField { map, charts }
    }

    pub fn weight(&self, w: Point) -> f64 {
        self.charts.weight(w)
    }

    pub fn value(&self, w: Point) -> Point {
        self.charts.value(w)
    }
}

/// mu(w) = |f'|^2 (1+|w|^2)^2/(1+|f|^2)^2.
pub fn weight(wf: &WeightField, w: Point) -> f64 {
    wf.weight(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trig {
    Cos,
    Sin,
}

/// Real spherical harmonics up to degree L, ordered in blocks (m, trig) with
/// l = m..L inside each block: (0,cos), (1,cos), (1,sin), (2,cos), ...
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub degree: usize,
    pub blocks: Vec<(usize, Trig)>,
    pub offsets: Vec<usize>,
    pub dim: usize,
}

impl Basis {
    pub fn new(degree: usize) -> Self {
        let mut blocks = vec![(0, Trig::Cos)];
        for m in 1..=degree {
            blocks.push((m, Trig::Cos));
            blocks.push((m, Trig::Sin));
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut o = 0;
        for &(m, _) in &blocks {
            offsets.push(o);
            o += degree + 1 - m;
        }
        Basis { degree, blocks, offsets, dim: o }
    }

    /// (l, m, trig) of basis function i.
    pub fn label(&self, i: usize) -> (usize, usize, Trig) {
        let b = self.offsets.partition_point(|&o| o <= i) - 1;
        let (m, t) = self.blocks[b];
        (m + i - self.offsets[b], m, t)
    }

    pub fn stiffness(&self) -> Vec<f64> {
        let mut k = Vec::with_capacity(self.dim);
        for &(m, _) in &self.blocks {
            for l in m..=self.degree {
                k.push((l * (l + 1)) as f64);
            }
        }
        k
    }
}

/// Values and first derivatives of every basis function at one point.
pub struct BasisPoint {
    pub values: Vec<f64>,
    /// d/dw, or d/du with u = 1/w when the point is infinity
    pub d: Vec<C64>,
    /// d/dw-bar, or d/du-bar at infinity
    pub dbar: Vec<C64>,
}

/// Evaluates the basis and its holomorphic/antiholomorphic derivatives.
pub fn basis_at(basis: &Basis, w: Point) -> BasisPoint {
    let (x, s, phi, pref, at_infinity) = match w {
        Point::Finite(w) => {
            let r2 = w.norm_sqr();
            let phi = if r2 == 0.0 { 0.0 } else { w.arg() };
            ((1.0 - r2) / (1.0 + r2), 2.0 * r2.sqrt() / (1.0 + r2), phi, 1.0 / (1.0 + r2), false)
        }
        Point::Infinity => (-1.0, 0.0, 0.0, 1.0, true),
    };
    let tab = legendre::reduced(basis.degree, x);
    let e = C64::from_polar(1.0, -phi);
    let i = C64::new(0.0, 1.0);
    let mut values = Vec::with_capacity(basis.dim);
    let mut d = Vec::with_capacity(basis.dim);
    let mut dbar = Vec::with_capacity(basis.dim);
    for &(m, t) in &basis.blocks {
        let mf = m as f64;
        let (tv, tp) = match (m, t) {
            (0, _) => (1.0, 0.0),
            (_, Trig::Cos) => (SQRT_2 * (mf * phi).cos(), -SQRT_2 * mf * (mf * phi).sin()),
            (_, Trig::Sin) => (SQRT_2 * (mf * phi).sin(), SQRT_2 * mf * (mf * phi).cos()),
        };
        let sm = s.powi(m as i32);
        let sm1 = if m == 0 { 0.0 } else { s.powi(m as i32 - 1) };
        for l in m..=basis.degree {
            let r = tab.r[m][l - m];
            let rx = tab.dr[m][l - m];
            let dtheta = if m == 0 { -s * rx } else { sm1 * (mf * x * r - s * s * rx) };
            let over_s = sm1 * r;
            values.push(sm * r * tv);
            let a = C64::new(dtheta * tv, 0.0);
            let b = i * (over_s * tp);
            if at_infinity {
                // d/du = sin^2(theta/2) e^{i phi} (-d_theta + (i/sin) d_phi)
                d.push(pref * e.conj() * (-a + b));
                dbar.push(pref * e * (-a - b));
            } else {
                // d/dw = cos^2(theta/2) e^{-i phi} (d_theta - (i/sin) d_phi)
                d.push(pref * e * (a - b));
                dbar.push(pref * e.conj() * (a + b));
            }
        }
    }
    BasisPoint { values, d, dbar }
}

/// Tensor grid: Gauss-Legendre in cos(theta) times uniform azimuth.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub x: Vec<f64>,
    pub wx: Vec<f64>,
    pub nphi: usize,
}

impl Grid {
    pub fn for_degree(degree: usize) -> Self {
        let (x, wx) = legendre::gauss_legendre(OVERSAMPLE * (2 * degree + 2));
        Grid { x, wx, nphi: OVERSAMPLE * (4 * degree + 2) }
    }

    pub fn phi(&self, s: usize) -> f64 {
        2.0 * PI * s as f64 / self.nphi as f64
    }

    /// Cover coordinate of node (ring r, azimuth s).
    pub fn node(&self, r: usize, s: usize) -> C64 {
        let x = self.x[r];
        C64::from_polar(((1.0 - x) / (1.0 + x)).sqrt(), self.phi(s))
    }

    /// Area weight of a node for dA_round.
    pub fn area(&self, r: usize) -> f64 {
        self.wx[r] * 2.0 * PI / self.nphi as f64
    }
}

/// Stiffness diagonal, mass matrix and the tables used to build them.
pub struct Assembly {
    pub basis: Basis,
    pub grid: Grid,
    pub k: Vec<f64>,
    pub m: Mat<f64>,
    /// per m: rows l = m..L, columns rings, entries Pbar_l^m(x_r)
    pub legendre: Vec<Mat<f64>>,
    /// conformal weight at each node, [ring][azimuth]
    pub mu: Vec<Vec<f64>>,
}

impl Assembly {
    /// Value of basis function i at grid node (r, s).
    pub fn basis_at_node(&self, i: usize, r: usize, s: usize) -> f64 {
        let (l, m, t) = self.basis.label(i);
        let p = self.legendre[m][(l - m, r)];
        if m == 0 {
            return p;
        }
        let a = m as f64 * self.grid.phi(s);
        SQRT_2 * p * if t == Trig::Cos { a.cos() } else { a.sin() }
    }
}

/// Builds K and M. The azimuthal integrals of products of trigonometric
/// factors reduce to Fourier coefficients of mu on each ring, so each
/// (block, block) pair of M is a single weighted product of Legendre tables.
pub fn assemble(wf: &WeightField, degree: usize) -> Result<Assembly, SpectralError> {
    if degree < 2 {
        return Err(SpectralError::DegreeTooSmall(degree));
    }
    let basis = Basis::new(degree);
    let grid = Grid::for_degree(degree);
    let nth = grid.x.len();
    let nphi = grid.nphi;

    let mu: Vec<Vec<f64>> = (0..nth)
        .map(|r| (0..nphi).map(|s| wf.weight(Point::Finite(grid.node(r, s)))).collect())
        .collect();

    // cos/sin Fourier integrals per ring up to frequency 2L
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nphi);
    let nk = 2 * degree + 1;
    let dphi = 2.0 * PI / nphi as f64;
    let mut cc = vec![vec![0.0; nk]; nth];
    let mut ss = vec![vec![0.0; nk]; nth];
    let mut buf = vec![C64::new(0.0, 0.0); nphi];
    for r in 0..nth {
        for (b, &m) in buf.iter_mut().zip(&mu[r]) {
            *b = C64::new(m, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..nk {
            cc[r][k] = buf[k].re * dphi;
            ss[r][k] = -buf[k].im * dphi;
        }
    }

    let mut legendre_tabs: Vec<Mat<f64>> = (0..=degree).map(|m| Mat::zeros(degree + 1 - m, nth)).collect();
    for r in 0..nth {
        let x = grid.x[r];
        let s = (1.0 - x * x).sqrt();
        let tab = legendre::reduced(degree, x);
        for m in 0..=degree {
            let sm = s.powi(m as i32);
            for l in m..=degree {
                legendre_tabs[m][(l - m, r)] = sm * tab.r[m][l - m];
            }
        }
    }

    let n = basis.dim;
    let mut mass = Mat::<f64>::zeros(n, n);
    let mut scaled = Mat::<f64>::zeros(degree + 1, nth);
    let mut wv = vec![0.0; nth];
    for (b1, &(m1, t1)) in basis.blocks.iter().enumerate() {
        let p1 = &legendre_tabs[m1];
        for (b2, &(m2, t2)) in basis.blocks.iter().enumerate().skip(b1) {
            let p2 = &legendre_tabs[m2];
            let c1 = if m1 > 0 { SQRT_2 } else { 1.0 };
            let c2 = if m2 > 0 { SQRT_2 } else { 1.0 };
            let diff = m1.abs_diff(m2);
            let sum = m1 + m2;
            let sgn = if m1 >= m2 { 1.0 } else { -1.0 };
            for r in 0..nth {
                let v = match (t1, t2) {
                    (Trig::Cos, Trig::Cos) => 0.5 * (cc[r][diff] + cc[r][sum]),
                    (Trig::Sin, Trig::Sin) => 0.5 * (cc[r][diff] - cc[r][sum]),
                    (Trig::Cos, Trig::Sin) => 0.5 * (ss[r][sum] - sgn * ss[r][diff]),
                    (Trig::Sin, Trig::Cos) => 0.5 * (ss[r][sum] + sgn * ss[r][diff]),
                };
                wv[r] = grid.wx[r] * v * c1 * c2;
            }
            let rows = p1.nrows();
            let mut sc = scaled.as_mut().subrows_mut(0, rows);
            for r in 0..nth {
                for i in 0..rows {
                    sc[(i, r)] = p1[(i, r)] * wv[r];
                }
            }
            let (o1, o2) = (basis.offsets[b1], basis.offsets[b2]);
            let dst = mass.as_mut().submatrix_mut(o1, o2, rows, p2.nrows());
            matmul(dst, Accum::Replace, sc.as_ref(), p2.transpose(), 1.0, Par::Seq);
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            mass[(i, j)] = mass[(j, i)];
        }
    }
    Ok(Assembly { k: basis.stiffness(), basis, grid, m: mass, legendre: legendre_tabs, mu })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// number of eigenvalues beyond the zero mode to return
    pub j: usize,
    /// number of eigenvectors to keep (from the bottom)
    pub vectors: usize,
    pub group_tol: f64,
}

/// Output of a Galerkin solve.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub degree: usize,
    pub values: Vec<f64>,
    /// coefficient columns in the basis; present for the lowest `vectors` modes
    pub vectors: Option<Mat<f64>>,
    pub groups: Vec<Vec<usize>>,
    pub reliable: Vec<bool>,
    /// eigenvalue at the reliability ceiling (one third of the basis dimension)
    pub ceiling: f64,
    pub warnings: Vec<String>,
    pub basis: Basis,
}

impl Spectrum {
    pub fn group_of(&self, j: usize) -> usize {
        self.groups.iter().position(|g| g.contains(&j)).unwrap_or(usize::MAX)
    }

    pub fn reliable_values(&self) -> Vec<f64> {
        self.values.iter().zip(&self.reliable).filter(|(_, &r)| r).map(|(&v, _)| v).collect()
    }
}

/// Partition of ascending values into clusters with gaps below tol (1 + lambda).
pub fn group_values(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (j, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (v - values[*g.last().unwrap()]).abs() < tol * (1.0 + v.abs()) => g.push(j),
            _ => groups.push(vec![j]),
        }
    }
    groups
}

/// First J+1 eigenpairs (including the zero mode).
pub fn solve(wf: &WeightField, degree: usize, j: usize, group_tol: f64) -> Result<Spectrum, SpectralError> {
    solve_with(wf, degree, &SolveOptions { j, vectors: j + 1, group_tol })
}

pub fn solve_with(wf: &WeightField, degree: usize, opts: &SolveOptions) -> Result<Spectrum, SpectralError> {
    let asm = assemble(wf, degree)?;
    solve_assembly(&asm, opts)
}

/// Cholesky factor of the mass matrix; fails when M is not positive definite.
pub fn mass_cholesky(asm: &Assembly) -> Result<Mat<f64>, SpectralError> {
    let llt = asm.m.llt(Side::Lower).map_err(|_| SpectralError::QuadratureUnderflow(asm.basis.degree))?;
    Ok(llt.L().to_owned())
}

pub fn solve_assembly(asm: &Assembly, opts: &SolveOptions) -> Result<Spectrum, SpectralError> {
    let n = asm.basis.dim;
    if opts.j + 1 > n {
        return Err(SpectralError::TooManyModes { requested: opts.j + 1, dim: n });
    }
    let l = mass_cholesky(asm)?;
    // A = L^{-1} K L^{-T} = X X^T with X = L^{-1} K^{1/2}
    let mut x = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        x[(i, i)] = asm.k[i].sqrt();
    }
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut a = Mat::<f64>::zeros(n, n);
    matmul(a.as_mut(), Accum::Replace, x.as_ref(), x.transpose(), 1.0, Par::Seq);
    drop(x);

    let nvec = opts.vectors.min(opts.j + 1);
    let (all, vectors) = if nvec == 0 {
        let v = a
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| SpectralError::Eigensolver(format!("{e:?}")))?;
        (v, None)
    } else {
        let eig = a.self_adjoint_eigen(Side::Lower).map_err(|e| SpectralError::Eigensolver(format!("{e:?}")))?;
        let s = eig.S().column_vector();
        let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let mut y = eig.U().subcols(0, nvec).to_owned();
        l.transpose().solve_upper_triangular_in_place(y.as_mut());
        // fix the sign of each vector so its largest coefficient is positive
        for c in 0..nvec {
            let mut best = 0.0f64;
            for r in 0..n {
                if y[(r, c)].abs() > best.abs() {
                    best = y[(r, c)];
                }
            }
            if best < 0.0 {
                for r in 0..n {
                    y[(r, c)] = -y[(r, c)];
                }
            }
        }
        (vals, Some(y))
    };
    let mut all = all;
    // the zero mode is exact up to rounding; clamp tiny negative noise
    if let Some(v0) = all.first_mut() {
        if v0.abs() < 1e-9 {
            *v0 = 0.0;
        }
    }
    let ceiling_index = n / 3;
    let ceiling = all[ceiling_index.min(n - 1)];
    let values: Vec<f64> = all[..=opts.j].to_vec();
    let reliable: Vec<bool> = (0..values.len()).map(|i| i < ceiling_index).collect();
    let mut warnings = Vec::new();
    if values[opts.j] >= 0.95 * ceiling {
        warnings.push(format!(
            "ConvergenceWarning: lambda_J = {:.6} is within 5% of the reliability ceiling {:.6}",
            values[opts.j], ceiling
        ));
    }
    let groups = group_values(&values, opts.group_tol);
    Ok(Spectrum {
        degree: asm.basis.degree,
        values,
        vectors,
        groups,
        reliable,
        ceiling,
        warnings,
        basis: asm.basis.clone(),
    })
}

fn column(spec: &Spectrum, j: usize) -> Result<Vec<f64>, SpectralError> {
    let v = spec.vectors.as_ref().ok_or(SpectralError::MissingVector(j))?;
    if j >= v.ncols() {
        return Err(SpectralError::MissingVector(j));
    }
    Ok((0..v.nrows()).map(|i| v[(i, j)]).collect())
}

/// Phi_j(w).
pub fn eigenfunction_value(spec: &Spectrum, j: usize, w: Point) -> Result<f64, SpectralError> {
    let v = column(spec, j)?;
    let bp = basis_at(&spec.basis, w);
    Ok(v.iter().zip(&bp.values).map(|(a, b)| a * b).sum())
}

/// d Phi_j / dw (or d/du with u = 1/w at infinity), differentiating the basis analytically.
pub fn eigenfunction_deriv(spec: &Spectrum, j: usize, w: Point) -> Result<C64, SpectralError> {
    let v = column(spec, j)?;
    let bp = basis_at(&spec.basis, w);
    Ok(v.iter().zip(&bp.d).map(|(a, b)| b * *a).sum())
}

/// Coefficients of Phi_j = c_j + a_j x-bar + b_j x + ... at one critical point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeCoeffs {
    pub k: usize,
    pub c: Vec<f64>,
    pub b: Vec<C64>,
    pub a: Vec<C64>,
    pub groups: Vec<Vec<usize>>,
}

impl ConeCoeffs {
    /// Largest |a_j - conj(b_j)| over the computed modes.
    pub fn reality_defect(&self) -> f64 {
        self.a.iter().zip(&self.b).map(|(a, b)| (a - b.conj()).norm()).fold(0.0, f64::max)
    }
}

/// Cone coefficients at critical point k for every mode with a computed vector.
pub fn cone_coeffs(
    spec: &Spectrum,
    data: &CriticalData,
    frames: &[FrameData],
    k: usize,
) -> Result<ConeCoeffs, SpectralError> {
    let vecs = spec.vectors.as_ref().ok_or(SpectralError::MissingVector(0))?;
    let bp = basis_at(&spec.basis, data.points[k]);
    let sc2 = frames[k].sqrt_c2;
    let (mut c, mut b, mut a) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..vecs.ncols() {
        let (mut val, mut d, mut dbar) = (0.0, C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for i in 0..vecs.nrows() {
            let v = vecs[(i, j)];
            val += v * bp.values[i];
            d += bp.d[i] * v;
            dbar += bp.dbar[i] * v;
        }
        c.push(val);
        b.push(d / sc2);
        a.push(dbar / sc2.conj());
    }
    let groups = spec.groups.iter().filter(|g| g.iter().all(|&j| j < vecs.ncols())).cloned().collect();
    Ok(ConeCoeffs { k, c, b, a, groups })
}

/// Writes the spectrum as CSV with columns index, lambda, group_id, reliable_flag.
pub fn write_csv<W: std::io::Write>(spec: &Spectrum, out: W) -> Result<(), SpectralError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| SpectralError::Export(e.to_string());
    w.write_record(["index", "lambda", "group_id", "reliable_flag"]).map_err(err)?;
    for (j, v) in spec.values.iter().enumerate() {
        w.write_record([
            j.to_string(),
            format!("{v:.15e}"),
            spec.group_of(j).to_string(),
            (spec.reliable[j] as u8).to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| SpectralError::Export(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational_map::RationalMap;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn weight_examples() {
        let wf = WeightField::new(RationalMap::monomial(2).unwrap());
        assert!((wf.weight(Point::Finite(c(1.0, 0.0))) - 4.0).abs() < 1e-14);
        assert_eq!(wf.weight(Point::Finite(c(0.0, 0.0))), 0.0);
        let wf = WeightField::new(RationalMap::degree2(c(0.0, 0.0), c(1.0, 0.0)).unwrap());
        assert!((wf.weight(Point::Finite(c(0.0, 0.0))) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn basis_labels_and_dimension() {
        let b = Basis::new(4);
        assert_eq!(b.dim, 25);
        assert_eq!(b.label(0), (0, 0, Trig::Cos));
        assert_eq!(b.label(5), (1, 1, Trig::Cos));
        assert_eq!(b.label(9), (1, 1, Trig::Sin));
        assert_eq!(b.label(24), (4, 4, Trig::Sin));
    }

    #[test]
    fn mass_of_area_two_maps() {
        for map in [RationalMap::monomial(2).unwrap(), RationalMap::degree2(c(0.0, 0.0), c(1.0, 0.0)).unwrap()] {
            let asm = assemble(&WeightField::new(map), 8).unwrap();
            assert!((asm.m[(0, 0)] - 2.0).abs() < 1e-10, "{}", asm.m[(0, 0)]);
        }
    }

    #[test]
    fn unit_weight_gives_identity_mass() {
        let basis = Basis::new(6);
        let grid = Grid::for_degree(6);
        let mut m = vec![vec![0.0; basis.dim]; basis.dim];
        for r in 0..grid.x.len() {
            for s in 0..grid.nphi {
                let bp = basis_at(&basis, Point::Finite(grid.node(r, s)));
                for i in 0..basis.dim {
                    for j in 0..basis.dim {
                        m[i][j] += grid.area(r) * bp.values[i] * bp.values[j];
                    }
                }
            }
        }
        for i in 0..basis.dim {
            for j in 0..basis.dim {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((m[i][j] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn basis_derivative_of_degree_one_harmonic_at_origin() {
        // Y_1^0 = sqrt(3/(4 pi)) cos(theta) = sqrt(3/(4 pi)) (1-|w|^2)/(1+|w|^2): d/dw vanishes at 0
        // Y_1^1 cos-type = -sqrt(3/(4 pi)) sin(theta) cos(phi) = -sqrt(3/(4 pi)) (w + w-bar)/(1+|w|^2)
        let basis = Basis::new(2);
        let bp = basis_at(&basis, Point::Finite(c(0.0, 0.0)));
        let k = (3.0 / (4.0 * PI)).sqrt();
        assert!(bp.d[1].norm() < 1e-15);
        assert!((bp.d[3] - c(-k, 0.0)).norm() < 1e-12, "{}", bp.d[3]);
        // sin-type: -k (w - w-bar)/(i(1+|w|^2)) -> d/dw = -k/i = i k
        assert!((bp.d[5] - c(0.0, k)).norm() < 1e-12, "{}", bp.d[5]);
    }

    #[test]
    fn basis_derivative_matches_finite_differences() {
        let basis = Basis::new(6);
        let w0 = c(0.4, -0.7);
        let h = 1e-6;
        let bp = basis_at(&basis, Point::Finite(w0));
        let vx_p = basis_at(&basis, Point::Finite(w0 + h)).values;
        let vx_m = basis_at(&basis, Point::Finite(w0 - h)).values;
        let vy_p = basis_at(&basis, Point::Finite(w0 + c(0.0, h))).values;
        let vy_m = basis_at(&basis, Point::Finite(w0 - c(0.0, h))).values;
        for i in 0..basis.dim {
            let dx = (vx_p[i] - vx_m[i]) / (2.0 * h);
            let dy = (vy_p[i] - vy_m[i]) / (2.0 * h);
            let d = c(dx, -dy) * 0.5;
            assert!((bp.d[i] - d).norm() < 1e-7, "i={i}");
            assert!((bp.dbar[i] - d.conj()).norm() < 1e-7);
        }
    }

    #[test]
    fn infinity_chart_derivative_matches_finite_differences() {
        let basis = Basis::new(5);
        let bp = basis_at(&basis, Point::Infinity);
        let h = 1e-6;
        let at = |u: C64| basis_at(&basis, Point::Finite(u.inv())).values;
        let (xp, xm, yp, ym) = (at(c(h, 0.0)), at(c(-h, 0.0)), at(c(0.0, h)), at(c(0.0, -h)));
        for i in 0..basis.dim {
            let d = c((xp[i] - xm[i]) / (2.0 * h), -(yp[i] - ym[i]) / (2.0 * h)) * 0.5;
            assert!((bp.d[i] - d).norm() < 1e-7, "i={i} {} {}", bp.d[i], d);
        }
    }

    #[test]
    fn football_low_spectrum() {
        let wf = WeightField::new(RationalMap::monomial(2).unwrap());
        let spec = solve(&wf, 16, 14, DEFAULT_GROUP_TOL).unwrap();
        let exact = [0.0, 0.75, 0.75, 2.0, 2.0, 2.0, 3.75, 3.75, 3.75, 3.75, 6.0, 6.0, 6.0, 6.0, 6.0];
        for (v, e) in spec.values.iter().zip(exact) {
            assert!((v - e).abs() < 2e-2 * (1.0 + e), "{v} vs {e}");
        }
        assert_eq!(spec.groups[0], vec![0]);
    }

    #[test]
    fn csv_export_has_header() {
        let wf = WeightField::new(RationalMap::monomial(2).unwrap());
        let spec = solve_with(&wf, 4, &SolveOptions { j: 3, vectors: 0, group_tol: 1e-5 }).unwrap();
        let mut buf = Vec::new();
        write_csv(&spec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,lambda,group_id,reliable_flag\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
