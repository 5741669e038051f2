use num_complex::Complex64;
use proptest::prelude::*;

use ctar::closed_forms::{arma_psi_weights, ArmaSpec};
use ctar::measure::h_eval;
use ctar::simulation::{run_replicates, simulate_increments_stream, LevyDriver};
use ctar::stats::theoretical_acf;
use ctar::{Atom, ConvolveConfig, GammaTerm, SampledKernel, SignedMeasure};

fn measure() -> impl Strategy<Value = SignedMeasure> {
    let atoms = prop::collection::btree_map(0u32..8, -1.0..1.0f64, 0..3).prop_map(|m| {
        m.into_iter()
            .map(|(k, w)| Atom {
                location: k as f64 * 0.25,
                weight: w,
            })
            .collect::<Vec<_>>()
    });
    let gamma = (-1.0..1.0f64, 0.5..3.0f64, 0.5..3.0f64).prop_map(|(c, s, r)| GammaTerm::new(c, s, r));
    (atoms, prop::collection::vec(gamma, 0..3)).prop_map(|(a, g)| SignedMeasure::new(a, g, None).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn h_at_origin_is_minus_total_mass(eta in measure()) {
        let h0 = h_eval(&eta, Complex64::new(0.0, 0.0)).unwrap();
        prop_assert!((h0.re + eta.total_mass()).abs() < 1e-12);
        prop_assert!(h0.im.abs() < 1e-12);
    }

    #[test]
    fn absolute_moment_dominates_signed_moment(eta in measure(), n in 0u32..4) {
        let signed = eta.moment(n, false).unwrap();
        let absolute = eta.moment(n, true).unwrap();
        prop_assert!(signed.abs() <= absolute * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn convolution_multiplies_transforms_and_respects_total_variation(
        mu in measure(),
        nu in measure(),
        y in -3.0..3.0f64,
    ) {
        let cfg = ConvolveConfig { dt: 1.0 / 256.0, ..ConvolveConfig::default() };
        let prod = mu.convolve(&nu, &cfg).unwrap();
        let z = Complex64::new(-0.2, y);
        let lhs = prod.laplace(z).unwrap();
        let rhs = mu.laplace(z).unwrap() * nu.laplace(z).unwrap();
        let scale = mu.total_variation() * nu.total_variation();
        prop_assert!((lhs - rhs).norm() <= 2e-3 * scale.max(1e-12), "{lhs} vs {rhs}");
        prop_assert!(prod.total_variation() <= scale * (1.0 + 2e-3) + 1e-12);
        prop_assert!((prod.total_mass() - mu.total_mass() * nu.total_mass()).abs() <= 2e-3 * scale.max(1e-12));
    }

    #[test]
    fn arma_weights_satisfy_the_recursion(
        phi in prop::collection::vec(-0.3..0.3f64, 0..3),
        theta in prop::collection::vec(-1.0..1.0f64, 0..3),
    ) {
        let spec = ArmaSpec { phi: phi.clone(), theta: theta.clone() };
        let w = arma_psi_weights(&spec, 40).unwrap();
        for j in 0..w.len() {
            let mut r = w[j];
            for (k, p) in phi.iter().enumerate() {
                if j > k {
                    r -= p * w[j - k - 1];
                }
            }
            let t = match j {
                0 => 1.0,
                _ => theta.get(j - 1).copied().unwrap_or(0.0),
            };
            prop_assert!((r - t).abs() < 1e-12, "j = {j}: {r} vs {t}");
        }
    }

    #[test]
    fn theoretical_acf_is_shift_invariant_and_peaks_at_zero(
        values in prop::collection::vec(-1.0..1.0f64, 4..64),
        shift in -20i64..20,
    ) {
        let dt = 0.125;
        let k = SampledKernel::new(dt, 0, values.clone()).unwrap();
        let moved = SampledKernel::new(dt, shift, values).unwrap();
        let lags: Vec<f64> = (0..8).map(|i| i as f64 * dt).collect();
        let a = theoretical_acf(&k, 2.0, &lags);
        let b = theoretical_acf(&moved, 2.0, &lags);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-12 * a.values[0].abs().max(1.0));
        }
        for v in &a.values {
            prop_assert!(v.abs() <= a.values[0] * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn replicates_do_not_depend_on_scheduling(seed in any::<u64>()) {
        let driver = LevyDriver::brownian(1.0);
        let par = run_replicates(6, |r| simulate_increments_stream(&driver, 0.01, 64, 0.0, seed, r as u64).unwrap());
        for (r, p) in par.iter().enumerate() {
            let seq = simulate_increments_stream(&driver, 0.01, 64, 0.0, seed, r as u64).unwrap();
            prop_assert_eq!(&p.values, &seq.values);
        }
        prop_assert_ne!(&par[0].values, &par[1].values);
    }
}
