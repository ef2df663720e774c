//! Special functions and constants used by the determinant pipeline.

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// zeta_R'(-1) = 1/12 - log(Glaisher constant).
pub const ZETA_PRIME_MINUS_ONE: f64 = -0.165_421_143_700_450_93;

/// B_2, B_4, ..., B_28 as exact fractions.
pub const BERNOULLI_EVEN: [(f64, f64); 14] = [
    (1.0, 6.0),
    (-1.0, 30.0),
    (1.0, 42.0),
    (-1.0, 30.0),
    (5.0, 66.0),
    (-691.0, 2730.0),
    (7.0, 6.0),
    (-3617.0, 510.0),
    (43867.0, 798.0),
    (-174611.0, 330.0),
    (854513.0, 138.0),
    (-236364091.0, 2730.0),
    (8553103.0, 6.0),
    (-23749461029.0, 870.0),
];

/// B_{2k} for k = 1..=14.
pub fn bernoulli_2k(k: usize) -> f64 {
    let (n, d) = BERNOULLI_EVEN[k - 1];
    n / d
}

/// Exponential integral E1(x) = int_x^inf e^{-t}/t dt for x > 0.
pub fn e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs a positive argument");
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // modified Lentz evaluation of the continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// zeta_R(n) - 1 for integer n >= 2, by direct summation plus an
/// Euler-Maclaurin tail.
pub fn zeta_minus_one(n: u32) -> f64 {
    assert!(n >= 2);
    let s = n as f64;
    let k0 = 20usize;
    let mut sum = 0.0;
    for k in 2..k0 {
        sum += (k as f64).powf(-s);
    }
    let a = k0 as f64;
    // tail sum_{k >= a} k^{-s}
    let mut tail = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // Bernoulli corrections: B_{2j}/(2j)! * s(s+1)...(s+2j-2) a^{-s-2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    for j in 1..=6 {
        tail += bernoulli_2k(j) / fact * rising * a.powf(-s - 2.0 * j as f64 + 1.0);
        rising *= (s + 2.0 * j as f64 - 1.0) * (s + 2.0 * j as f64);
        fact *= ((2 * j + 1) * (2 * j + 2)) as f64;
    }
    sum + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_reference_values() {
        // A&S table values
        assert!((e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-14);
        assert!((e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
        assert!((e1(2.0) - 0.048_900_510_708_061_12).abs() < 1e-15);
        assert!((e1(10.0) - 4.156_968_929_685_324e-6).abs() < 1e-19);
    }

    #[test]
    fn zeta_values() {
        let pi = std::f64::consts::PI;
        assert!((zeta_minus_one(2) - (pi * pi / 6.0 - 1.0)).abs() < 1e-14);
        assert!((zeta_minus_one(4) - (pi.powi(4) / 90.0 - 1.0)).abs() < 1e-15);
        assert!((zeta_minus_one(3) - 0.202_056_903_159_594_3).abs() < 1e-14);
        let direct: f64 = (2..10).map(|k| (k as f64).powi(-41)).sum();
        assert!((zeta_minus_one(41) - direct).abs() < 1e-14 * direct);
    }
}
