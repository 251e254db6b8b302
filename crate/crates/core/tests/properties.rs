use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use ris_chanest::array::{complex_gaussian_matrix, steering_vector, SpatialAngle, UpaGeometry};
use ris_chanest::config::{pilot_split, SystemConfig};
use ris_chanest::coupling::mc_response;
use ris_chanest::csvio::{parse_phase_csv, write_phase_csv};
use ris_chanest::harness::median;
use ris_chanest::linalg::{wrap_frequency, CMat, CVec, C64};
use ris_chanest::phase::{euclidean_gradient, objective, riemannian_gradient, PhaseSchedule};
use ris_chanest::sparse::{omp, OmpStop};

fn phases(m: usize, tau: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, m * tau)
        .prop_map(move |v| CMat::from_iterator(m, tau, v.into_iter().map(|t| C64::from_polar(1.0, t))))
}

proptest! {
    #[test]
    fn steering_entries_have_unit_modulus(
        h in 1usize..6, v in 1usize..6, z in -0.5f64..0.5, y in -0.5f64..0.5,
    ) {
        let g = UpaGeometry::new(h, v, 0.5).unwrap();
        let a = steering_vector(&g, SpatialAngle::new(z, y));
        prop_assert_eq!(a.len(), h * v);
        for x in a.iter() {
            prop_assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uncoupled_response_is_diagonal(gamma in phases(5, 1)) {
        let g: CVec = gamma.column(0).into_owned();
        let b = mc_response(&g, &CMat::zeros(5, 5)).unwrap();
        prop_assert!((b - CMat::from_diagonal(&g)).norm() < 1e-12);
    }

    #[test]
    fn riemannian_gradient_is_tangent(gamma in phases(4, 3), seed in any::<u64>()) {
        let s = complex_gaussian_matrix(&mut ChaCha20Rng::seed_from_u64(seed), 4, 4, 1e-3);
        let sched = PhaseSchedule::new(gamma.clone(), &s).unwrap();
        let r = riemannian_gradient(&euclidean_gradient(&sched), &gamma);
        for (g, y) in r.iter().zip(gamma.iter()) {
            prop_assert!((g * y.conj()).re.abs() < 1e-8 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn objective_is_nonnegative(gamma in phases(3, 4), seed in any::<u64>()) {
        let s = complex_gaussian_matrix(&mut ChaCha20Rng::seed_from_u64(seed), 3, 3, 1e-2);
        let sched = PhaseSchedule::new(gamma, &s).unwrap();
        prop_assert!(objective(&sched) >= -1e-9);
    }

    #[test]
    fn phase_csv_round_trips(gamma in phases(3, 5)) {
        let mut buf = Vec::new();
        write_phase_csv(&mut buf, &gamma).unwrap();
        let back = parse_phase_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back, gamma);
    }

    #[test]
    fn parsers_never_panic(text in "\\PC{0,200}") {
        let _ = parse_phase_csv(&text);
        let _ = SystemConfig::from_toml_str(&text);
    }

    #[test]
    fn phase_parser_survives_csv_shaped_noise(
        rows in prop::collection::vec((0usize..4, 0usize..4, -2.0f64..2.0, -2.0f64..2.0), 0..12),
    ) {
        let mut text = String::from("m,t,re,im\n");
        for (m, t, re, im) in rows {
            text.push_str(&format!("{m},{t},{re},{im}\n"));
        }
        if let Ok(g) = parse_phase_csv(&text) {
            prop_assert!(g.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-6));
        }
    }

    #[test]
    fn omp_support_respects_cap(seed in any::<u64>(), cap in 0usize..6) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = complex_gaussian_matrix(&mut rng, 8, 20, 1.0);
        let y: CVec = complex_gaussian_matrix(&mut rng, 8, 1, 1.0).column(0).into_owned();
        let sol = omp(&d, &y, OmpStop::new(1e-12, cap));
        prop_assert!(sol.support.len() <= cap);
        prop_assert!(sol.residual_norm <= y.norm() + 1e-12);
    }

    #[test]
    fn median_lies_within_range(v in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let m = median(&v);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= m && m <= hi);
    }

    #[test]
    fn pilot_split_keeps_gap_of_eight(users in 2usize..10, extra in 0.0f64..40.0) {
        let average = 8.0 + extra;
        if let Ok((first, other)) = pilot_split(average, users) {
            prop_assert_eq!(first, other + 8);
        }
    }

    #[test]
    fn wrapped_frequency_is_in_range(f in -1e3f64..1e3) {
        let w = wrap_frequency(f);
        prop_assert!((-0.5..0.5).contains(&w));
        prop_assert!(((f - w) - (f - w).round()).abs() < 1e-9);
    }
}
