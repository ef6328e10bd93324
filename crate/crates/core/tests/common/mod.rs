#![allow(dead_code)]

use std::f64::consts::PI;

use kerrgate::state::HybridState;
use kerrgate::SingleQubitGate;
use num_complex::Complex64 as C64;
use rand::Rng;

/// Normalized single-qubit amplitudes with a random relative phase.
pub fn random_pair(rng: &mut impl Rng) -> (C64, C64) {
    let t = rng.random_range(0.0..PI / 2.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    (C64::new(t.cos(), 0.0), C64::from_polar(t.sin(), phase))
}

pub fn random_product(rng: &mut impl Rng, n: usize) -> HybridState {
    let specs: Vec<_> = (0..n).map(|_| random_pair(rng)).collect();
    HybridState::product(&specs).unwrap()
}

/// Haar-ish random U(2) from three Euler angles and a global phase.
pub fn random_gate(rng: &mut impl Rng, qubit: usize) -> SingleQubitGate {
    let t = rng.random_range(0.0..PI / 2.0);
    let (l, m, g) = (
        rng.random_range(0.0..2.0 * PI),
        rng.random_range(0.0..2.0 * PI),
        rng.random_range(0.0..2.0 * PI),
    );
    let e = |a: f64| C64::from_polar(1.0, a + g);
    SingleQubitGate::new(
        qubit,
        [
            [e(l) * t.cos(), -e(m) * t.sin()],
            [e(-m) * t.sin(), e(-l) * t.cos()],
        ],
    )
    .unwrap()
}
