//! Local coordinates at critical points: the distinguished parameter
//! x = sqrt(f - z_k), Schwarzians and the values that enter the variational
//! formulas.

use crate::rational_map::{CriticalData, MapError, Point, RationalMap};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of series coefficients carried internally.
pub const SERIES_ORDER: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("series is not invertible: linear coefficient vanishes")]
    NonInvertible,
    #[error("critical value {0} is at infinity")]
    InfiniteCriticalValue(usize),
    #[error("critical point index {0} out of range")]
    BadIndex(usize),
    #[error("two evaluations of the right-hand side disagree by {0:.3e}")]
    CrossCheck(f64),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Truncated power series sum_{i < len} c_i t^i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    pub coeffs: Vec<C64>,
}

impl PowerSeries {
    pub fn new(coeffs: Vec<C64>) -> Self {
        PowerSeries { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn get(&self, i: usize) -> C64 {
        self.coeffs.get(i).copied().unwrap_or_default()
    }

    pub fn mul(&self, other: &PowerSeries) -> PowerSeries {
        let n = self.order().min(other.order());
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n - i {
                out[i + j] += self.get(i) * other.get(j);
            }
        }
        PowerSeries::new(out)
    }

    /// self(inner(t)) for inner with zero constant term.
    pub fn compose(&self, inner: &PowerSeries) -> PowerSeries {
        let n = self.order().min(inner.order());
        let mut out = vec![C64::new(0.0, 0.0); n];
        let mut power = PowerSeries::new({
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[0] = C64::new(1.0, 0.0);
            v
        });
        for i in 0..n {
            for (o, p) in out.iter_mut().zip(&power.coeffs) {
                *o += self.get(i) * p;
            }
            power = power.mul(inner);
        }
        PowerSeries::new(out)
    }

    /// Principal-branch square root of a series with c_0 = 1.
    pub fn sqrt_unit(&self) -> PowerSeries {
        let n = self.order();
        let mut s = vec![C64::new(0.0, 0.0); n];
        s[0] = C64::new(1.0, 0.0);
        for k in 1..n {
            let mut acc = self.get(k);
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / 2.0;
        }
        PowerSeries::new(s)
    }

    pub fn eval(&self, t: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * t + c)
    }
}

/// Compositional inverse of a series s(t) = s_1 t + s_2 t^2 + ..., to the same order.
pub fn series_invert(s: &PowerSeries) -> Result<PowerSeries, FrameError> {
    let n = s.order();
    let s1 = s.get(1);
    if s1.norm() == 0.0 || s.get(0).norm() != 0.0 {
        return Err(FrameError::NonInvertible);
    }
    let mut t = vec![C64::new(0.0, 0.0); n];
    if n > 1 {
        t[1] = s1.inv();
    }
    for k in 2..n {
        let comp = s.compose(&PowerSeries::new(t.clone()));
        t[k] -= comp.get(k) / s1;
    }
    Ok(PowerSeries::new(t))
}

/// Schwarzian derivative {w, x} at x = 0 of w(x) = sum w_i x^i, w_1 != 0.
pub fn schwarzian_at_zero(w: &PowerSeries) -> Result<C64, FrameError> {
    let w1 = w.get(1);
    if w1.norm() == 0.0 {
        return Err(FrameError::NonInvertible);
    }
    let r = w.get(2) / w1;
    Ok(6.0 * w.get(3) / w1 - 6.0 * r * r)
}

/// Local data at one critical point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameData {
    pub index: usize,
    /// principal square root of c_2; dx/du at the critical point
    pub sqrt_c2: C64,
    /// x as a series in the local cover coordinate u
    pub x_of_u: PowerSeries,
    /// the local cover coordinate as a series in x
    pub u_of_x: PowerSeries,
    /// Schwarzian of the cover coordinate in the distinguished parameter
    pub schiffer: C64,
    /// -schiffer/6
    pub b0: C64,
    /// z-bar/(2(1+|z|^2)); absent when the critical value is infinite
    pub binf: Option<C64>,
}

/// Local frame at critical point k. For an infinite critical value the
/// distinguished parameter is taken in the chart 1/z and `binf` is absent.
pub fn schiffer_at_critical(data: &CriticalData, k: usize) -> Result<FrameData, FrameError> {
    let t = data.taylor.get(k).ok_or(FrameError::BadIndex(k))?;
    let c2 = t.c2();
    if c2.norm() == 0.0 {
        return Err(FrameError::NonInvertible);
    }
    let sqrt_c2 = c2.sqrt();
    // x = sqrt(c2) u sqrt(1 + (c3/c2) u + (c4/c2) u^2 + ...)
    let mut inner = vec![C64::new(0.0, 0.0); SERIES_ORDER];
    for (i, slot) in inner.iter_mut().enumerate() {
        *slot = t.c.get(i + 2).copied().unwrap_or_default() / c2;
    }
    let root = PowerSeries::new(inner).sqrt_unit();
    let mut x = vec![C64::new(0.0, 0.0); SERIES_ORDER];
    for i in 1..SERIES_ORDER {
        x[i] = sqrt_c2 * root.get(i - 1);
    }
    let x_of_u = PowerSeries::new(x);
    let u_of_x = series_invert(&x_of_u)?;
    let schiffer = schwarzian_at_zero(&u_of_x)?;
    let binf = data.values[k].finite().map(|z| 0.5 * z.conj() / (1.0 + z.norm_sqr()));
    Ok(FrameData { index: k, sqrt_c2, x_of_u, u_of_x, schiffer, b0: -schiffer / 6.0, binf })
}

/// Frames at every critical point of a map.
pub fn frames(data: &CriticalData) -> Result<Vec<FrameData>, FrameError> {
    (0..data.len()).map(|k| schiffer_at_critical(data, k)).collect()
}

/// Schwarzian directly from Taylor data: (9/4) c3^2/c2^3 - 3 c4/c2^2.
pub fn schiffer_closed_form(c2: C64, c3: C64, c4: C64) -> C64 {
    2.25 * c3 * c3 / (c2 * c2 * c2) - 3.0 * c4 / (c2 * c2)
}

/// Right-hand side -S/12 - (1/4) z-bar/(1+|z|^2) of the variational formula at
/// critical point k, evaluated through the series route and the closed form.
pub fn variational_rhs(map: &RationalMap, data: &CriticalData, k: usize) -> Result<C64, FrameError> {
    if data.len() != 2 * map.degree - 2 {
        return Err(FrameError::Map(MapError::Invalid("critical data does not belong to this map".into())));
    }
    let z = match data.values.get(k).ok_or(FrameError::BadIndex(k))? {
        Point::Finite(z) => *z,
        Point::Infinity => return Err(FrameError::InfiniteCriticalValue(k)),
    };
    let frame = schiffer_at_critical(data, k)?;
    let t = &data.taylor[k];
    let direct = schiffer_closed_form(t.c2(), t.c3(), t.c4());
    let diff = (direct - frame.schiffer).norm();
    if diff > 1e-12 * (1.0 + direct.norm()) {
        return Err(FrameError::CrossCheck(diff));
    }
    Ok(-frame.schiffer / 12.0 - 0.25 * z.conj() / (1.0 + z.norm_sqr()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational_map::critical_data;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn schwarzian_example() {
        let w = PowerSeries::new(vec![c(0.0), c(1.0), c(-0.5), c(0.125)]);
        assert!((schwarzian_at_zero(&w).unwrap() - c(-0.75)).norm() < 1e-15);
    }

    #[test]
    fn invert_catalan() {
        let s = PowerSeries::new(vec![c(0.0), c(1.0), c(1.0), c(0.0), c(0.0), c(0.0)]);
        let t = series_invert(&s).unwrap();
        let expected = [0.0, 1.0, -1.0, 2.0, -5.0, 14.0];
        for (a, b) in t.coeffs.iter().zip(expected) {
            assert!((a - c(b)).norm() < 1e-12);
        }
    }

    #[test]
    fn invert_requires_linear_term() {
        let s = PowerSeries::new(vec![c(0.0), c(0.0), c(1.0)]);
        assert_eq!(series_invert(&s), Err(FrameError::NonInvertible));
    }

    #[test]
    fn degree2_schiffer_and_rhs() {
        let map = RationalMap::degree2(c(0.0), c(1.0)).unwrap();
        let data = critical_data(&map, 1e-10).unwrap();
        let k = data.points.iter().position(|p| p.finite().unwrap().re < 0.0).unwrap();
        let fr = schiffer_at_critical(&data, k).unwrap();
        assert!((fr.schiffer - c(3.0)).norm() < 1e-12, "{}", fr.schiffer);
        assert!((fr.b0 - c(-0.5)).norm() < 1e-12);
        assert_eq!(fr.binf, Some(c(0.0)));
        let rhs = variational_rhs(&map, &data, k).unwrap();
        assert!((rhs - c(-0.25)).norm() < 1e-12);
    }

    #[test]
    fn monomial_frame_at_origin() {
        let map = RationalMap::monomial(2).unwrap();
        let data = critical_data(&map, 1e-10).unwrap();
        let k = data.points.iter().position(|p| *p == Point::Finite(c(0.0))).unwrap();
        let fr = schiffer_at_critical(&data, k).unwrap();
        assert!(fr.schiffer.norm() < 1e-14);
        assert_eq!(fr.binf, Some(c(0.0)));
        let kinf = 1 - k;
        assert!(schiffer_at_critical(&data, kinf).unwrap().binf.is_none());
        assert!(matches!(variational_rhs(&map, &data, kinf), Err(FrameError::InfiniteCriticalValue(_))));
    }
}
