use conical_spectra::local_frame::{frames, schiffer_at_critical, schwarzian_at_zero, series_invert, variational_rhs, PowerSeries};
use conical_spectra::perturbation::{q_pairing, ExpansionCoeffs};
use conical_spectra::rational_map::{
    critical_data, rotate_target, CriticalData, Point, Poly, RationalMap, TargetRotation, DISTINCT_TOL,
};
use conical_spectra::spectral::{assemble, cone_coeffs, solve, solve_assembly, SolveOptions, WeightField};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn complex(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| C64::new(a, b))
}

fn degree2_pair() -> impl Strategy<Value = (C64, C64)> {
    (complex(2.0), complex(2.0)).prop_filter("separated critical values", |(a, b)| (a - b).norm() > 0.1)
}

/// Generic cubic maps p/q with q monic of degree 3.
fn cubic() -> impl Strategy<Value = RationalMap> {
    (prop::collection::vec(complex(1.5), 4), prop::collection::vec(complex(1.5), 3)).prop_filter_map(
        "admissible cubic",
        |(p, mut q)| {
            q.push(C64::new(1.0, 0.0));
            RationalMap::new(Poly::new(p), Poly::new(q)).ok()
        },
    )
}

fn rotation() -> impl Strategy<Value = TargetRotation> {
    ((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 0.1..3.0f64)
        .prop_filter("nonzero axis", |((x, y, z), _)| x * x + y * y + z * z > 1e-2)
        .prop_map(|((x, y, z), angle)| TargetRotation::about_axis([x, y, z], angle))
}

fn expansion() -> impl Strategy<Value = ExpansionCoeffs> {
    prop::collection::vec(complex(3.0), 6).prop_map(|c| ExpansionCoeffs {
        am1: c[0],
        bm1: c[1],
        a0c: c[2],
        b0c: c[3],
        a1: c[4],
        b1: c[5],
    })
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

fn nearest(points: &[Point], p: Point) -> f64 {
    points.iter().map(|q| q.chordal(p)).fold(f64::INFINITY, f64::min)
}

fn data_of(map: &RationalMap) -> Option<CriticalData> {
    critical_data(map, DISTINCT_TOL).ok()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn riemann_hurwitz_count(map in cubic()) {
        if let Some(data) = data_of(&map) {
            prop_assert_eq!(data.len(), 2 * map.degree - 2);
        }
    }

    #[test]
    fn charts_agree_on_the_overlap(map in cubic(), r in 0.51..1.99f64, theta in 0.0..6.28f64) {
        let w = C64::from_polar(r, theta);
        let direct = map.numerator.eval(w) / map.denominator.eval(w);
        let (p, q) = map.inverted_chart();
        let inverted = p.eval(w.inv()) / q.eval(w.inv());
        prop_assert!(close(direct, inverted, 1e-10), "{direct} vs {inverted}");
    }

    #[test]
    fn rotations_compose(map in cubic(), r1 in rotation(), r2 in rotation()) {
        let twice = rotate_target(&rotate_target(&map, &r1).unwrap(), &r2);
        let once = rotate_target(&map, &r1.then(&r2));
        if let (Ok(a), Ok(b)) = (twice, once) {
            let scale = a.numerator.coeffs.iter().chain(&a.denominator.coeffs).map(|c| c.norm()).fold(1.0, f64::max);
            prop_assert_eq!(a.numerator.coeffs.len(), b.numerator.coeffs.len());
            prop_assert_eq!(a.denominator.coeffs.len(), b.denominator.coeffs.len());
            for (x, y) in a.numerator.coeffs.iter().chain(&a.denominator.coeffs)
                .zip(b.numerator.coeffs.iter().chain(&b.denominator.coeffs)) {
                prop_assert!((x - y).norm() <= 1e-10 * scale, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn rotation_maps_critical_values((z1, z2) in degree2_pair(), rot in rotation()) {
        let map = RationalMap::degree2(z1, z2).unwrap();
        let data = data_of(&map).unwrap();
        let rotated = rotate_target(&map, &rot).unwrap();
        let rdata = data_of(&rotated).unwrap();
        prop_assert_eq!(data.len(), rdata.len());
        for (p, v) in data.points.iter().zip(&data.values) {
            prop_assert!(nearest(&rdata.points, *p) < 1e-8);
            prop_assert!(nearest(&rdata.values, rot.apply(*v)) < 1e-8);
        }
    }

    #[test]
    fn schiffer_ignores_the_square_root_branch(map in cubic()) {
        if let Some(data) = data_of(&map) {
            for k in 0..data.len() {
                let Ok(frame) = schiffer_at_critical(&data, k) else { continue };
                let flipped = PowerSeries::new((0..frame.x_of_u.order()).map(|i| -frame.x_of_u.get(i)).collect());
                let s = schwarzian_at_zero(&series_invert(&flipped).unwrap()).unwrap();
                prop_assert!(close(s, frame.schiffer, 1e-12), "{s} vs {}", frame.schiffer);
            }
        }
    }

    #[test]
    fn schwarzian_scales_with_the_parameter(c in prop::collection::vec(complex(1.0), 4), kappa in complex(2.0)) {
        prop_assume!(c[0].norm() > 0.2 && kappa.norm() > 0.2);
        let series = PowerSeries::new(vec![C64::new(0.0, 0.0), c[0], c[1], c[2], c[3]]);
        let scaled = PowerSeries::new((0..5).map(|i| series.get(i) * kappa.powi(-(i as i32))).collect());
        let s = schwarzian_at_zero(&series).unwrap();
        let t = schwarzian_at_zero(&scaled).unwrap();
        prop_assert!(close(t, s / (kappa * kappa), 1e-10), "{t} vs {}", s / (kappa * kappa));
    }

    #[test]
    fn variational_rhs_equals_half_b0_minus_binf(map in cubic()) {
        if let Some(data) = data_of(&map) {
            let Ok(fr) = frames(&data) else { return Ok(()) };
            for k in 0..data.len() {
                let (Ok(rhs), Some(binf)) = (variational_rhs(&map, &data, k), fr[k].binf) else { continue };
                prop_assert!(close(rhs, (fr[k].b0 - binf) / 2.0, 1e-12));
            }
        }
    }

    #[test]
    fn degree2_schiffer_closed_form((z1, z2) in degree2_pair()) {
        let map = RationalMap::degree2(z1, z2).unwrap();
        let data = data_of(&map).unwrap();
        let fr = frames(&data).unwrap();
        for (k, v) in data.values.iter().enumerate() {
            let z = v.finite().unwrap();
            let (own, other) = if (z - z1).norm() < (z - z2).norm() { (z1, z2) } else { (z2, z1) };
            let expected = -3.0 / (own - other);
            prop_assert!((fr[k].schiffer - expected).norm() <= 1e-8 * expected.norm());
        }
    }

    #[test]
    fn q_pairing_is_hermitian_antisymmetric(u in expansion(), v in expansion()) {
        let a = q_pairing(&u, &v);
        let b = q_pairing(&v, &u);
        prop_assert!(close(a, -b.conj(), 1e-13));
    }

    #[test]
    fn q_pairing_is_sesquilinear(u in expansion(), w in expansion(), v in expansion(), s in complex(2.0)) {
        let comb = |x: &ExpansionCoeffs, y: &ExpansionCoeffs| ExpansionCoeffs {
            am1: x.am1 + s * y.am1,
            bm1: x.bm1 + s * y.bm1,
            a0c: x.a0c + s * y.a0c,
            b0c: x.b0c + s * y.b0c,
            a1: x.a1 + s * y.a1,
            b1: x.b1 + s * y.b1,
        };
        let left = q_pairing(&comb(&u, &w), &v);
        prop_assert!(close(left, q_pairing(&u, &v) + s * q_pairing(&w, &v), 1e-12));
        let right = q_pairing(&v, &comb(&u, &w));
        prop_assert!(close(right, q_pairing(&v, &u) + s.conj() * q_pairing(&v, &w), 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn rayleigh_ritz_is_monotone_in_the_degree((z1, z2) in degree2_pair()) {
        let wf = WeightField::new(RationalMap::degree2(z1, z2).unwrap());
        let coarse = solve(&wf, 8, 25, 1e-6).unwrap();
        let fine = solve(&wf, 12, 25, 1e-6).unwrap();
        for j in 0..coarse.values.len() {
            if coarse.reliable[j] {
                prop_assert!(fine.values[j] <= coarse.values[j] + 1e-12, "j={j}: {} > {}", fine.values[j], coarse.values[j]);
            }
        }
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal((z1, z2) in degree2_pair()) {
        let wf = WeightField::new(RationalMap::degree2(z1, z2).unwrap());
        let asm = assemble(&wf, 10).unwrap();
        let spec = solve_assembly(&asm, &SolveOptions { j: 30, vectors: 31, group_tol: 1e-6 }).unwrap();
        let v = spec.vectors.as_ref().unwrap();
        let n = v.nrows();
        for a in 0..v.ncols() {
            if !spec.reliable[a] {
                continue;
            }
            let mv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| asm.m[(i, j)] * v[(j, a)]).sum()).collect();
            let norm = (0..n).map(|i| v[(i, a)].powi(2)).sum::<f64>().sqrt();
            let resid = (0..n)
                .map(|i| (asm.k[i] * v[(i, a)] - spec.values[a] * mv[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            prop_assert!(resid <= 1e-8 * norm.max(1.0), "residual {resid} for mode {a}");
            for b in 0..=a {
                let g: f64 = (0..n).map(|i| v[(i, b)] * mv[i]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                prop_assert!((g - expected).abs() <= 1e-8, "<v{a}, M v{b}> = {g}");
            }
        }
    }

    #[test]
    fn cone_coefficients_are_conjugate((z1, z2) in degree2_pair()) {
        let map = RationalMap::degree2(z1, z2).unwrap();
        let data = data_of(&map).unwrap();
        let fr = frames(&data).unwrap();
        let spec = solve(&WeightField::new(map), 16, 20, 1e-6).unwrap();
        for k in 0..data.len() {
            prop_assert!(cone_coeffs(&spec, &data, &fr, k).unwrap().reality_defect() <= 1e-8);
        }
    }
}
