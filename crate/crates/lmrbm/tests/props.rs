//! Property tests for structural invariants.

use lmrbm::imputation::{complete_dataset, train_pixel_stats, Imputer};
use lmrbm::missingness::{build_masked_dataset, gen_mask, Mechanism, MissingnessSpec};
use lmrbm::rbm::hidden_conditional_observed;
use lmrbm::rng::derive_rng;
use lmrbm::types::{BinaryVector, Mask, RbmParams, Weights};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn arb_mechanism() -> impl Strategy<Value = Mechanism> {
    prop_oneof![
        Just(Mechanism::Im),
        Just(Mechanism::So),
        Just(Mechanism::Pm)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_are_binary_and_shaped(
        mech in arb_mechanism(),
        rate in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let spec = MissingnessSpec::new(mech, rate, 14, 14).unwrap();
        let mask = gen_mask(&spec, &mut derive_rng(seed, &[0]));
        prop_assert_eq!(mask.len(), 196);
        prop_assert!(mask.missing().iter().all(|&b| b <= 1));
        // every mechanism leaves at least something observed below rate 0.95
        prop_assert!(mask.missing_count() < 196);
    }

    #[test]
    fn hidden_conditional_is_a_probability(
        seed in any::<u64>(),
        n in 1usize..10,
        m in 1usize..6,
    ) {
        let mut rng = derive_rng(seed, &[1]);
        let p = RbmParams {
            visible_bias: Array1::from_shape_fn(n, |_| rng.random_range(-3.0..3.0)),
            hidden_bias: Array1::from_shape_fn(m, |_| rng.random_range(-3.0..3.0)),
            weights: Weights::Dense(Array2::from_shape_fn((n, m), |_| rng.random_range(-3.0..3.0))),
            lambda: Array1::from_elem(n, 0.5),
        };
        let mask = Mask::from_missing((0..n).map(|_| rng.random_range(0..=1u8)).collect()).unwrap();
        let v = BinaryVector::from_bits(
            (0..n).map(|i| if mask.missing()[i] == 1 { 0 } else { rng.random_range(0..=1u8) }).collect(),
        ).unwrap();
        let probs = hidden_conditional_observed(&v, &mask, &p).unwrap();
        prop_assert!(probs.probs().iter().all(|&q| (0.0..=1.0).contains(&q) && q.is_finite()));
    }

    #[test]
    fn completions_preserve_observed_pixels_and_stay_in_unit_range(
        seed in any::<u64>(),
        rate in 0.1f64..0.9,
    ) {
        let mut rng = derive_rng(seed, &[2]);
        let images: Vec<BinaryVector> = (0..8)
            .map(|_| BinaryVector::from_bits((0..36).map(|_| rng.random_range(0..=1u8)).collect()).unwrap())
            .collect();
        let labels = vec![0u8; 8];
        let spec = MissingnessSpec::new(Mechanism::Im, rate, 6, 6).unwrap();
        let ds = build_masked_dataset(&images, &labels, &spec, seed, 0).unwrap();
        let stats = train_pixel_stats(&ds).unwrap();
        for imputer in [Imputer::Mean(&stats), Imputer::Diffusion { stats: &stats, iterations: 20 }] {
            let completions = complete_dataset(&imputer, &ds, seed).unwrap();
            for (c, s) in completions.iter().zip(&ds.samples) {
                for i in 0..36 {
                    prop_assert!((0.0..=1.0).contains(&c.values[i]));
                    if s.mask.missing()[i] == 0 {
                        prop_assert_eq!(c.values[i], f64::from(s.pixels.bits()[i]));
                    }
                }
            }
        }
    }
}
