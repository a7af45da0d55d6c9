//! Property tests over the metrology and simulation layers.

use proptest::prelude::*;

use snspdkit::countsim::{
    click_probability, simulate_bias_sweep, simulate_fringe_scan, simulate_measurement_set, single_pass_transmission,
    BiasModel, ChipGroundTruth, DetectorTruth, PolarizationTruth,
};
use snspdkit::metrology::{
    calibrate_bidirectional, contrast_from_r_eta, fit_airy, fit_bias_response, fp_loss_extract, jitter_decompose,
    sigmoid_rate, BiasSweep,
};
use snspdkit::profile::Polarization;

fn truth(kl: f64, kr: f64, alpha: f64, absorptions: &[f64], xi: f64) -> ChipGroundTruth {
    let detectors = |scale: f64| -> Vec<DetectorTruth> {
        absorptions
            .iter()
            .enumerate()
            .map(|(i, a)| DetectorTruth {
                z_cm: 0.5 + 0.3 * i as f64,
                absorption: a * scale,
                internal_efficiency: xi,
            })
            .collect()
    };
    ChipGroundTruth {
        chip_length_cm: 2.3,
        facet_reflectance: 0.1422,
        polarizations: vec![
            PolarizationTruth {
                polarization: Polarization::TE,
                kappa_left: kl,
                kappa_right: kr,
                alpha_db_per_cm: alpha,
                detectors: detectors(1.0),
            },
            PolarizationTruth {
                polarization: Polarization::TM,
                kappa_left: kl,
                kappa_right: kr,
                alpha_db_per_cm: 0.5 * alpha,
                detectors: detectors(0.2),
            },
        ],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn click_probability_is_monotone(mu in 0.0f64..20.0, dmu in 0.0f64..5.0, eta in 0.0f64..=1.0, deta in 0.0f64..1.0) {
        let p = click_probability(mu, eta).unwrap();
        prop_assert!((0.0..1.0).contains(&p) || (p == 1.0 && mu * eta > 30.0));
        prop_assert!(click_probability(mu + dmu, eta).unwrap() >= p);
        let eta2 = (eta + deta).min(1.0);
        prop_assert!(click_probability(mu, eta2).unwrap() >= p);
    }

    #[test]
    fn loss_round_trips_through_contrast(alpha in 0.001f64..3.0, r in 0.02f64..0.6, l in 0.2f64..5.0) {
        let eta = single_pass_transmission(alpha, l);
        let k = contrast_from_r_eta(r * eta);
        let est = fp_loss_extract(k, r, l).unwrap();
        prop_assert!((est.alpha_db_per_cm - alpha).abs() < 1e-9 * (1.0 + alpha) + 1e-10 / l);
        prop_assert!((est.r_eta - r * eta).abs() < 1e-12);
    }

    #[test]
    fn noise_free_fringe_fit_recovers_loss(alpha in 0.01f64..1.5, r in 0.05f64..0.5, seed in any::<u64>()) {
        let scan = simulate_fringe_scan(alpha, r, 2.3, 256, 0.0, seed).unwrap();
        let fit = fit_airy(&scan).unwrap();
        let est = fp_loss_extract(fit.contrast, r, 2.3).unwrap();
        prop_assert!((est.alpha_db_per_cm - alpha).abs() < 1e-6, "{} vs {}", est.alpha_db_per_cm, alpha);
    }

    #[test]
    fn calibration_is_exact_without_noise(
        kl in 0.05f64..0.9,
        kr in 0.05f64..0.9,
        alpha in 0.0f64..0.5,
        absorptions in prop::collection::vec(0.001f64..0.2, 2..6),
    ) {
        // Shadowing by the full absorption equals the detected fraction only
        // for unit internal efficiency.
        let t = truth(kl, kr, alpha, &absorptions, 1.0);
        let set = simulate_measurement_set(&t, 0.0, 1).unwrap();
        let cal = calibrate_bidirectional(&set).unwrap();
        for p in &t.polarizations {
            let c = cal.get(p.polarization).unwrap();
            prop_assert!((c.kappa_left - kl).abs() < 1e-8 * kl);
            prop_assert!((c.kappa_right - kr).abs() < 1e-8 * kr);
            for (d, got) in p.detectors.iter().zip(&c.detection_efficiency) {
                let want = d.absorption * d.internal_efficiency;
                prop_assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn simulation_is_deterministic_per_seed(seed in any::<u64>()) {
        let a = simulate_fringe_scan(0.1, 0.14, 2.3, 64, 0.02, seed).unwrap();
        let b = simulate_fringe_scan(0.1, 0.14, 2.3, 64, 0.02, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let c = simulate_fringe_scan(0.1, 0.14, 2.3, 64, 0.02, seed.wrapping_add(1)).unwrap();
        prop_assert_ne!(&a.power_samples, &c.power_samples);
        let t = truth(0.3, 0.5, 0.1, &[0.01, 0.01, 0.01], 1.0);
        prop_assert_eq!(simulate_measurement_set(&t, 0.01, seed).unwrap(), simulate_measurement_set(&t, 0.01, seed).unwrap());
        let m = BiasModel { inflection_ua: 3.0, width_ua: 0.4, plateau_rate: 1e4, dark_scale: 1e-3, dark_exponent_ua: 0.5 };
        let biases: Vec<f64> = (0..30).map(|k| 0.2 * k as f64).collect();
        prop_assert_eq!(simulate_bias_sweep(&m, &biases, 1.0, seed).unwrap(), simulate_bias_sweep(&m, &biases, 1.0, seed).unwrap());
    }

    #[test]
    fn sigmoid_fit_scales_with_rate(i0 in 2.0f64..6.0, w in 0.2f64..0.8, plateau in 1e3f64..1e6, scale in 0.1f64..10.0) {
        let bias: Vec<f64> = (0..71).map(|k| 0.15 * k as f64).collect();
        let sweep = |p: f64| BiasSweep {
            photon_counts: bias.iter().map(|b| sigmoid_rate(*b, i0, w, p)).collect(),
            dark_counts: vec![0.0; bias.len()],
            bias_ua: bias.clone(),
            integration_s: 1.0,
        };
        let a = fit_bias_response(&sweep(plateau)).unwrap();
        let b = fit_bias_response(&sweep(plateau * scale)).unwrap();
        prop_assert!((a.inflection_ua - i0).abs() < 1e-4, "{} vs {}", a.inflection_ua, i0);
        prop_assert!((a.width_ua - w).abs() < 1e-4);
        prop_assert!((b.inflection_ua - a.inflection_ua).abs() < 1e-6);
        prop_assert!((b.plateau_rate / a.plateau_rate - scale).abs() < 1e-6 * scale);
    }

    #[test]
    fn jitter_decomposition_inverts_quadrature(d in 0.0f64..500.0, comps in prop::collection::vec(0.0f64..100.0, 0..4)) {
        let system = (d * d + comps.iter().map(|c| c * c).sum::<f64>()).sqrt();
        let got = jitter_decompose(system, &comps).unwrap();
        prop_assert!((got - d).abs() < 1e-6 * (1.0 + system));
    }
}
