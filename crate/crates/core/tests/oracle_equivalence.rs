mod common;

use std::f64::consts::PI;

use kerrgate::measurement::{collapse_at, outcome_density};
use kerrgate::optics::{apply_cross_kerr, apply_parity_coupling, apply_single_qubit, build_parity_coupling_pair, KerrCoupling, KerrSign};
use kerrgate::oracle::{
    oracle_collapse, oracle_cross_kerr, oracle_embed, oracle_homodyne_density, oracle_parity_coupling,
    oracle_single_qubit, FockOracleState,
};
use kerrgate::{HybridState, ParityBasis, Polarization, ProbeMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 60;

fn embed(s: &HybridState) -> FockOracleState {
    oracle_embed(s, N).unwrap()
}

fn assert_commutes(branch: &HybridState, oracle: &FockOracleState, what: &str) {
    let f = embed(branch).fidelity(oracle).unwrap();
    assert!(f >= 1.0 - 1e-9, "{what}: fidelity {f}");
    assert!((oracle.norm_sqr() - branch.norm_sqr()).abs() < 1e-9, "{what}: norm");
}

fn density_deviation(state: &HybridState, probe: usize) -> f64 {
    let branch = outcome_density(state, probe).unwrap();
    let oracle = oracle_homodyne_density(&embed(state), probe).unwrap();
    let (lo, hi) = branch.peak_range();
    let (lo, hi) = (lo - 7.0, hi + 7.0);
    let steps = ((hi - lo) / 0.01) as usize;
    (0..=steps)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / steps as f64;
            (branch.eval(x) - oracle.eval(x)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn optics_and_measurement_commute_with_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..50 {
        let alpha = rng.random_range(0.2..=3.0);
        let theta = rng.random_range(1e-3..=PI);
        let probe = ProbeMode::new(alpha, theta).unwrap();
        let basis = if trial % 2 == 0 {
            ParityBasis::Computational
        } else {
            ParityBasis::Diagonal
        };

        let mut s = common::random_product(&mut rng, 2);
        let p = s.activate_probe(probe);
        let mut o = embed(&s);
        assert_commutes(&s, &o, "embed");

        let pair = build_parity_coupling_pair(0, 1, p, basis).unwrap();
        s = apply_parity_coupling(&s, &pair).unwrap();
        o = oracle_parity_coupling(&o, &pair).unwrap();
        assert_commutes(&s, &o, "parity coupling");

        let gate = common::random_gate(&mut rng, trial % 2);
        s = apply_single_qubit(&s, &gate).unwrap();
        o = oracle_single_qubit(&o, &gate).unwrap();
        assert_commutes(&s, &o, "single-qubit gate");

        let kerr = KerrCoupling {
            qubit: 1 - trial % 2,
            trigger: if rng.random() { Polarization::H } else { Polarization::V },
            probe: p,
            sign: if rng.random() { KerrSign::Positive } else { KerrSign::Negative },
        };
        s = apply_cross_kerr(&s, &kerr).unwrap();
        o = oracle_cross_kerr(&o, &kerr).unwrap();
        assert_commutes(&s, &o, "cross-Kerr");

        let dev = density_deviation(&s, p);
        assert!(dev < 1e-6, "trial {trial}: alpha {alpha} theta {theta}: density deviation {dev}");

        let x = rng.random_range(2.0 * alpha * theta.cos() - 2.0..2.0 * alpha + 2.0);
        let (_, collapsed) = collapse_at(&s, p, x).unwrap();
        let oc = oracle_collapse(&o, p, x).unwrap();
        assert_commutes(&collapsed, &oc, "collapse");
    }
}

#[test]
fn parity_gate_densities_agree_for_small_alpha() {
    let h = num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for (alpha, theta) in [(2.0, 0.5), (3.0, 0.2), (1.0, PI), (3.0, 2.5)] {
        for basis in [ParityBasis::Computational, ParityBasis::Diagonal] {
            let mut s = kerrgate::new_state(&[(h, h), (h, -h)]).unwrap();
            let p = s.activate_probe(ProbeMode::new(alpha, theta).unwrap());
            let pair = build_parity_coupling_pair(0, 1, p, basis).unwrap();
            let s = apply_parity_coupling(&s, &pair).unwrap();
            let dev = density_deviation(&s, p);
            assert!(dev < 1e-6, "alpha {alpha} theta {theta} {basis:?}: {dev}");
        }
    }
}

#[test]
fn two_probe_states_embed_consistently() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut s = common::random_product(&mut rng, 2);
    let p0 = s.activate_probe(ProbeMode::new(1.5, 0.7).unwrap());
    let p1 = s.activate_probe(ProbeMode::new(1.0, 1.9).unwrap());
    let mut o = oracle_embed(&s, 40).unwrap();
    for (p, basis) in [(p0, ParityBasis::Computational), (p1, ParityBasis::Diagonal)] {
        let pair = build_parity_coupling_pair(0, 1, p, basis).unwrap();
        s = apply_parity_coupling(&s, &pair).unwrap();
        o = oracle_parity_coupling(&o, &pair).unwrap();
    }
    let f = oracle_embed(&s, 40).unwrap().fidelity(&o).unwrap();
    assert!(f >= 1.0 - 1e-9, "{f}");
    let (_, c) = collapse_at(&s, p0, 2.2).unwrap();
    let oc = oracle_collapse(&o, p0, 2.2).unwrap();
    assert!(oracle_embed(&c, 40).unwrap().fidelity(&oc).unwrap() >= 1.0 - 1e-9);
    let branch = outcome_density(&s, p1).unwrap();
    let oracle = oracle_homodyne_density(&o, p1).unwrap();
    for x in [-1.5, 0.0, 0.7, 2.0, 3.3] {
        assert!((branch.eval(x) - oracle.eval(x)).abs() < 1e-8, "x = {x}");
    }
}
