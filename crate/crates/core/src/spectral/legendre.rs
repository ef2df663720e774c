//! Normalized associated Legendre functions and Gauss-Legendre quadrature.
//!
//! `reduced(lmax, x)` returns R[m][l - m] = Pbar_l^m(x) / sin(theta)^m, where
//! Pbar is normalized so that Pbar_l^m(cos theta) e^{i m phi} has unit L2 norm
//! on the round sphere (Condon-Shortley phase). Dividing out sin^m keeps
//! everything regular at the poles, which is what derivative formulas need.

use std::f64::consts::PI;

/// Reduced functions and their x-derivatives, indexed [m][l - m].
pub struct Reduced {
    pub r: Vec<Vec<f64>>,
    pub dr: Vec<Vec<f64>>,
}

pub fn reduced(lmax: usize, x: f64) -> Reduced {
    let mut r = Vec::with_capacity(lmax + 1);
    let mut dr = Vec::with_capacity(lmax + 1);
    let mut seed = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let k = m as f64;
            seed *= -((2.0 * k + 1.0) / (2.0 * k)).sqrt();
        }
        let len = lmax + 1 - m;
        let mut rm = vec![0.0; len];
        let mut dm = vec![0.0; len];
        rm[0] = seed;
        if len > 1 {
            let c = (2.0 * m as f64 + 3.0).sqrt();
            rm[1] = c * x * seed;
            dm[1] = c * seed;
        }
        let mf = m as f64;
        for i in 2..len {
            let l = (m + i) as f64;
            let a = ((4.0 * l * l - 1.0) / (l * l - mf * mf)).sqrt();
            let b = (((l - 1.0) * (l - 1.0) - mf * mf) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0)).sqrt();
            rm[i] = a * (x * rm[i - 1] - b * rm[i - 2]);
            dm[i] = a * (rm[i - 1] + x * dm[i - 1] - b * dm[i - 2]);
        }
        r.push(rm);
        dr.push(dm);
    }
    Reduced { r, dr }
}

/// Gauss-Legendre nodes (ascending) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m18: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((m18 - 2.0 / 19.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn low_degree_closed_forms() {
        let x = 0.3;
        let t = reduced(3, x);
        let n00 = (1.0 / (4.0 * PI)).sqrt();
        assert!((t.r[0][0] - n00).abs() < 1e-15);
        assert!((t.r[0][1] - (3.0f64).sqrt() * n00 * x).abs() < 1e-15);
        // Pbar_1^1 = -sqrt(3/(8 pi)) sin, so R = -sqrt(3/(8 pi))
        assert!((t.r[1][0] + (3.0 / (8.0 * PI)).sqrt()).abs() < 1e-15);
        // Pbar_2^0 = sqrt(5/(4 pi)) (3x^2 - 1)/2
        let p20 = (5.0 / (4.0 * PI)).sqrt() * (3.0 * x * x - 1.0) / 2.0;
        assert!((t.r[0][2] - p20).abs() < 1e-14);
        assert!((t.dr[0][2] - (5.0 / (4.0 * PI)).sqrt() * 3.0 * x).abs() < 1e-14);
    }

    #[test]
    fn orthonormality_on_the_sphere() {
        let l = 12;
        let (x, w) = gauss_legendre(l + 2);
        for m in [0usize, 3, 7] {
            for a in m..=l {
                for b in m..=l {
                    let mut acc = 0.0;
                    for (xi, wi) in x.iter().zip(&w) {
                        let t = reduced(l, *xi);
                        let s2m = (1.0 - xi * xi).powi(m as i32);
                        acc += wi * s2m * t.r[m][a - m] * t.r[m][b - m];
                    }
                    // azimuthal factor: 2 pi for m = 0, pi for cos^2 with sqrt(2) normalization
                    let expected = if a == b { 1.0 / (2.0 * PI) } else { 0.0 };
                    assert!((acc - expected).abs() < 1e-13, "m={m} a={a} b={b} {acc}");
                }
            }
        }
    }
}
