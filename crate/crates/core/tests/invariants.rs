mod common;

use kerrgate::optics::{apply_parity_coupling, apply_single_qubit, build_parity_coupling_pair};
use kerrgate::state::{coherent_overlap, DEFAULT_PRUNE_EPSILON};
use kerrgate::{ParityBasis, ProbeMode};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_operations_preserve_norm(
        seed in any::<u64>(),
        n in 2usize..=4,
        alpha in 0.0f64..50.0,
        theta in 0.0f64..=std::f64::consts::PI,
        steps in 1usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = common::random_product(&mut rng, n);
        for _ in 0..steps {
            if rng.random::<bool>() || s.probes().len() >= 2 {
                let q = rng.random_range(0..n);
                s = apply_single_qubit(&s, &common::random_gate(&mut rng, q)).unwrap();
            } else {
                let p = s.activate_probe(ProbeMode::new(alpha, theta).unwrap());
                let a = rng.random_range(0..n);
                let b = (a + rng.random_range(1..n)) % n;
                let basis = if rng.random() { ParityBasis::Diagonal } else { ParityBasis::Computational };
                let pair = build_parity_coupling_pair(a, b, p, basis).unwrap();
                s = apply_parity_coupling(&s, &pair).unwrap();
            }
            prop_assert!((s.norm() - 1.0).abs() < 1e-12 + s.pruned_mass().sqrt(), "norm {}", s.norm());
        }
        let configs = 3usize.pow(s.probes().len() as u32).max(1);
        prop_assert!(s.num_branches() <= (1 << n) * configs);
    }

    #[test]
    fn merge_and_prune_is_idempotent(seed in any::<u64>(), eps in 0.0f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_product(&mut rng, 3);
        let (once, _) = s.merge_and_prune(eps).unwrap();
        let (twice, report) = once.merge_and_prune(eps).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(report.removed, 0);
        let (same, r) = s.merge_and_prune(DEFAULT_PRUNE_EPSILON).unwrap();
        prop_assert_eq!(r.removed, 0);
        prop_assert_eq!(same, s);
    }

    #[test]
    fn coherent_overlap_decreases_with_distance(
        re in -5.0f64..5.0,
        im in -5.0f64..5.0,
        angle in 0.0f64..std::f64::consts::TAU,
        d1 in 0.0f64..4.0,
        d2 in 0.0f64..4.0,
    ) {
        let b = C64::new(re, im);
        prop_assert!((coherent_overlap(b, b) - C64::new(1.0, 0.0)).norm() < 1e-12);
        let dir = C64::from_polar(1.0, angle);
        let (near, far) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let o_near = coherent_overlap(b + dir * near, b).norm();
        let o_far = coherent_overlap(b + dir * far, b).norm();
        prop_assert!(o_far <= o_near + 1e-15);
        prop_assert!((o_near - (-near * near / 2.0).exp()).abs() < 1e-12);
    }
}
