mod common;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use eigenspec::rla::{rsvd, RsvdConfig};
use eigenspec::signal_sim::{simulate_fault_signal, BearingSpec, FaultSimParams, FaultType};
use eigenspec::spectrogram::{assemble_dataset, SpectrogramImage, IMAGE_SIDE};
use eigenspec::svm::{ecoc_train, kkt_violation, solve_dual, Coding, SvmConfig};
use eigenspec::ClassLabel;

fn max_gram_deviation(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let id = DMatrix::<f64>::identity(g.nrows(), g.ncols());
    (g - id).abs().max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rsvd_factors_are_orthonormal_and_sorted(
        seed in 0u64..1000,
        rows in 10usize..80,
        cols in 10usize..60,
        q in 0usize..3,
    ) {
        let mut g = common::rng(seed);
        let a = common::gaussian(rows, cols, &mut g);
        let r = 1 + seed as usize % (rows.min(cols) - 2);
        let cfg = RsvdConfig { target_rank: r, oversampling: 1, power_iterations: q, retained_components: 1, rng_seed: seed };
        let f = rsvd(&a, &cfg).unwrap();
        prop_assert_eq!(f.singular_values.len(), r);
        prop_assert!(max_gram_deviation(&f.u) < 1e-8);
        prop_assert!(max_gram_deviation(&f.v) < 1e-8);
        prop_assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(f.singular_values.iter().all(|&s| s >= 0.0));
        let again = rsvd(&a, &cfg).unwrap();
        prop_assert_eq!(f.singular_values, again.singular_values);
    }

    #[test]
    fn smo_solutions_are_feasible_and_certified(seed in 0u64..1000, n in 4usize..30, dim in 1usize..4) {
        let mut g = common::rng(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| g.random_range(-2.0..2.0)).collect()).collect();
        let mut y: Vec<f64> = x.iter().map(|p| if p[0] + 0.3 * g.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let params = SvmConfig::default();
        let sol = solve_dual(&x, &y, &params).unwrap();
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() < 1e-9);
        prop_assert!(sol.alpha.iter().all(|&a| (0.0..=params.cost).contains(&a)));
        let v = kkt_violation(&x, &y, &sol.alpha, sol.bias, params.cost, &params.kernel);
        prop_assert!(v <= params.tol, "violation {}", v);
    }

    #[test]
    fn ecoc_predictions_follow_class_relabelling(seed in 0u64..500, perm in Just(vec![0usize, 1, 2]).prop_shuffle(), ova in any::<bool>()) {
        let names: Vec<ClassLabel> = ["B1", "IR1", "OR1"].iter().map(|s| s.parse().unwrap()).collect();
        let mut g = common::rng(seed);
        let centres = [[0.0, 0.0], [3.0, 0.5], [0.5, 3.0]];
        let mut x = Vec::new();
        let mut blob = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..12 {
                x.push(vec![centre[0] + g.random_range(-1.2..1.2), centre[1] + g.random_range(-1.2..1.2)]);
                blob.push(c);
            }
        }
        let coding = if ova { Coding::OneVsAll } else { Coding::OneVsOne };
        let params = SvmConfig { coding, ..SvmConfig::default() };
        let plain: Vec<ClassLabel> = blob.iter().map(|&c| names[c].clone()).collect();
        let relabelled: Vec<ClassLabel> = blob.iter().map(|&c| names[perm[c]].clone()).collect();
        let a = ecoc_train(&x, &plain, &params, coding, false).unwrap();
        let b = ecoc_train(&x, &relabelled, &params, coding, false).unwrap();

        let probes: Vec<Vec<f64>> = (0..40).map(|_| vec![g.random_range(-2.0..5.0), g.random_range(-2.0..5.0)]).collect();
        let forward: Vec<ClassLabel> = probes.iter().map(|p| a.predict(p)).collect();
        let backward: Vec<ClassLabel> = probes.iter().rev().map(|p| a.predict(p)).collect();
        prop_assert!(forward.iter().eq(backward.iter().rev()));
        for (p, pred) in probes.iter().zip(&forward) {
            let c = names.iter().position(|n| n == pred).unwrap();
            prop_assert_eq!(b.predict(p), names[perm[c]].clone());
        }
    }

    #[test]
    fn split_keeps_class_proportions(counts in proptest::collection::vec(2usize..12, 1..4), frac in 0.2f64..0.9, seed in any::<u64>()) {
        let names = ["B1", "IR1", "OR1"];
        let mut images = Vec::new();
        for (c, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let img = SpectrogramImage::new(DMatrix::zeros(IMAGE_SIDE, IMAGE_SIDE), Some(names[c].parse().unwrap())).unwrap();
                images.push(img);
            }
        }
        let (train, test) = assemble_dataset(images, frac, seed).unwrap();
        let (tr, te): (BTreeMap<_, _>, BTreeMap<_, _>) = (train.class_counts(), test.class_counts());
        for (c, &count) in counts.iter().enumerate() {
            let label: ClassLabel = names[c].parse().unwrap();
            let n_train = tr[&label];
            prop_assert_eq!(n_train + te[&label], count);
            prop_assert!((n_train as f64 - frac * count as f64).abs() <= 1.0);
            prop_assert!(n_train >= 1 && n_train < count);
        }
    }

    #[test]
    fn simulation_is_bit_reproducible(seed in any::<u64>(), amp in 1u32..5, fault in 0usize..3) {
        let kind = [FaultType::RollingElement, FaultType::InnerRace, FaultType::OuterRace][fault];
        let params = FaultSimParams { duration: 0.05, ..FaultSimParams::numerical(kind, amp as f64, seed) };
        let spec = BearingSpec::skf_22240();
        let a = simulate_fault_signal(&params, &spec).unwrap();
        let b = simulate_fault_signal(&params, &spec).unwrap();
        prop_assert!(a.samples.iter().zip(&b.samples).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
