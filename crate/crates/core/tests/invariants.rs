use num_complex::Complex64;
use proptest::prelude::*;
use warped_disk::bvp::{analyze_trace, FourierSpectrum, ScaledComplex};
use warped_disk::geometry::MetricProfile;
use warped_disk::grid::RadialGrid;
use warped_disk::modes::{exponent_growth_verdict, growth_verdict, ModeTable};
use warped_disk::operators::fornberg_weights;
use warped_disk::quad::{integrate, QuadSettings};

fn cfg() -> ProptestConfig {
    ProptestConfig::with_cases(32)
}

fn coefficients(order: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2 * order + 1)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn fornberg_weights_differentiate_polynomials(
        gaps in prop::collection::vec(0.05..0.5f64, 4),
        pick in 0usize..5,
        coef in prop::collection::vec(-2.0..2.0f64, 5),
    ) {
        let mut nodes = vec![1.0];
        for g in &gaps {
            nodes.push(nodes.last().unwrap() + g);
        }
        let x0 = nodes[pick];
        let w = fornberg_weights(x0, &nodes, 2);
        let p = |x: f64| coef.iter().rev().fold(0.0, |a, c| a * x + c);
        let dp = |x: f64| (1..5).rev().fold(0.0, |a, k| a * x + k as f64 * coef[k]);
        let d2p = |x: f64| (2..5).rev().fold(0.0, |a, k| a * x + (k * (k - 1)) as f64 * coef[k]);
        let apply = |d: usize| w[d].iter().zip(&nodes).map(|(wi, x)| wi * p(*x)).sum::<f64>();
        let scale = 1.0 + coef.iter().map(|c| c.abs()).sum::<f64>() * 100.0;
        prop_assert!((apply(0) - p(x0)).abs() < 1e-10 * scale);
        prop_assert!((apply(1) - dp(x0)).abs() < 1e-8 * scale);
        prop_assert!((apply(2) - d2p(x0)).abs() < 1e-6 * scale);
    }

    #[test]
    fn quadrature_integrates_polynomials(
        a in -3.0..0.0f64,
        len in 0.1..5.0f64,
        coef in prop::collection::vec(-2.0..2.0f64, 8),
    ) {
        let b = a + len;
        let p = |x: f64| coef.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let anti = |x: f64| coef.iter().enumerate().rev().fold(0.0, |acc, (k, c)| acc + c * x.powi(k as i32 + 1) / (k + 1) as f64);
        let q = integrate(p, a, b, QuadSettings::default()).unwrap();
        let exact = anti(b) - anti(a);
        prop_assert!((q.value - exact).abs() <= 1e-11 * (1.0 + exact.abs() + len.powi(8) * 16.0));
    }

    #[test]
    fn trace_round_trip_and_parseval(
        (order, alpha, beta) in (1usize..12).prop_flat_map(|o| (Just(o), coefficients(o), coefficients(o))),
        radius in 0.1..10.0f64,
    ) {
        let spec = FourierSpectrum::from_coefficients(order, alpha.clone(), beta.clone()).unwrap();
        let n = (2 * order + 2).next_power_of_two();
        let trace = spec.synthesize(radius, n).unwrap();
        let back = analyze_trace(&trace, order).unwrap();
        for m in spec.modes() {
            prop_assert!((back.alpha(m) - spec.alpha(m)).norm() < 1e-13);
            prop_assert!((back.beta(m) - spec.beta(m)).norm() < 1e-13);
        }
        let mean_sq = trace.u.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        let coeff_sq = alpha.iter().map(|z| z.norm_sqr()).sum::<f64>();
        prop_assert!((mean_sq - coeff_sq).abs() <= 1e-12 * (1.0 + coeff_sq));
        prop_assert!((back.energy_u - coeff_sq).abs() <= 1e-12 * (1.0 + coeff_sq));
        prop_assert!(back.truncation_u <= 1e-24 * (1.0 + coeff_sq));
    }

    #[test]
    fn real_traces_have_conjugate_spectra(
        samples in prop::collection::vec(-5.0..5.0f64, 16),
        lap in prop::collection::vec(-5.0..5.0f64, 16),
    ) {
        let trace = warped_disk::bvp::BoundaryTrace::from_real(1.0, &samples, &lap).unwrap();
        let s = analyze_trace(&trace, 7).unwrap();
        for m in 1..=7i64 {
            prop_assert!((s.alpha(-m) - s.alpha(m).conj()).norm() < 1e-13);
            prop_assert!((s.beta(-m) - s.beta(m).conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn scaled_complex_keeps_its_logarithm(
        re in -10.0..10.0f64,
        im in -10.0..10.0f64,
        log in -2000.0..2000.0f64,
    ) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let z = Complex64::new(re, im);
        let s = ScaledComplex::scaled(z, log);
        prop_assert!((s.ln_abs() - (z.norm().ln() + log)).abs() <= 1e-12 * (1.0 + log.abs()));
        prop_assert!(s.relative_difference(s) == 0.0);
        let back = s.times_exp(-log);
        prop_assert!((back - z).norm() <= 1e-12 * z.norm() * (1.0 + log.abs()));
    }

    #[test]
    fn verdicts_ignore_scale(
        logs in prop::array::uniform4(-5.0..5.0f64),
        shift in -50.0..50.0f64,
    ) {
        let mut sorted = logs;
        sorted.sort_by(f64::total_cmp);
        let radii = [1.0, 2.0, 4.0, 8.0];
        let shifted = sorted.map(|v| v + shift);
        prop_assert_eq!(growth_verdict(radii, sorted).verdict, growth_verdict(radii, shifted).verdict);
        prop_assert_eq!(exponent_growth_verdict(radii, sorted).verdict, exponent_growth_verdict(radii, shifted).verdict);
    }

    #[test]
    fn doubling_grid_is_geometric(start in 0.01..1.0f64, octaves in 1u32..8, per in 1usize..10) {
        prop_assume!(octaves as usize * per >= 2);
        let end = start * 2f64.powi(octaves as i32);
        let g = RadialGrid::doubling(start, end, per).unwrap();
        prop_assert_eq!(g.len(), octaves as usize * per + 1);
        let ratio = 2f64.powf(1.0 / per as f64);
        for w in g.nodes().windows(2) {
            prop_assert!(((w[1] / w[0]) / ratio - 1.0).abs() < 1e-12);
        }
        for k in 0..=octaves {
            prop_assert!(g.index_of(start * 2f64.powi(k as i32)).is_some());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn modes_are_even_in_m_and_monotone(m in 0i64..6, r0 in 0.05..0.5f64, r1 in 2.0..20.0f64) {
        for (flat, profile) in [(true, MetricProfile::euclidean()), (false, MetricProfile::hyperbolic())] {
            let grid = RadialGrid::geometric(r0, r1, 33).unwrap();
            let table = ModeTable::new(&profile, &grid).unwrap();
            let plus = table.biharmonic(m).unwrap();
            let minus = table.biharmonic(-m).unwrap();
            prop_assert_eq!(&plus.lambda, &minus.lambda);
            prop_assert_eq!(&plus.z, &minus.z);
            for w in plus.z.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
            for w in plus.lambda.windows(2) {
                if m == 0 {
                    prop_assert!(w[1] == w[0]);
                } else {
                    prop_assert!(w[1] > w[0]);
                }
            }
            if flat {
                // ψ_m = r^{|m|+2} / (4|m| + 4) on the plane
                for (r, z) in grid.nodes().iter().zip(&plus.z) {
                    let want = r * r / (4.0 * m as f64 + 4.0);
                    prop_assert!((z / want - 1.0).abs() < 1e-10);
                }
            }
        }
    }
}
