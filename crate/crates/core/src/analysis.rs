//! Closed-form discrimination figures and the Monte Carlo shot harness.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{validation, Error, Result};
use crate::gates::{cnot, entangler, entangler_45, ideal_cnot, parity_gate, parity_projection, GateTrace, MeasurementEvent};
use crate::measurement::{project_polarization, BornRule, HomodyneRecord, Parity};
use crate::optics::{apply_single_qubit, change_frame, ParityBasis, SingleQubitGate};
use crate::state::{HybridState, Polarization, ProbeMode};

/// Fidelity below which a shot counts as a logical error.
pub const LOGICAL_ERROR_FIDELITY: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationGeometry {
    /// Decision threshold `α(1 + cos θ)`.
    pub x0: f64,
    /// Peak separation `2α(1 − cos θ)`.
    pub xd: f64,
    /// Small-angle approximation of `xd`.
    pub alpha_theta_sq: f64,
}

pub fn geometry(alpha: f64, theta: f64) -> Result<DiscriminationGeometry> {
    let probe = ProbeMode::new(alpha, theta)?;
    let s = (probe.theta() / 2.0).sin();
    Ok(DiscriminationGeometry {
        x0: probe.alpha() * (1.0 + probe.theta().cos()),
        // 4α sin²(θ/2) avoids cancellation in 1 − cos θ at small θ.
        xd: 4.0 * probe.alpha() * s * s,
        alpha_theta_sq: probe.alpha() * probe.theta() * probe.theta(),
    })
}

/// Probability that a parity outcome falls on the wrong side of the
/// threshold: `½ erfc(X_d / (2√2))`.
pub fn p_error(alpha: f64, theta: f64) -> Result<f64> {
    let g = geometry(alpha, theta)?;
    Ok(0.5 * erfc(g.xd / (2.0 * std::f64::consts::SQRT_2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Bare parity detector on two qubits.
    Parity,
    /// {H, V} entangler on two qubits.
    Entangler,
    /// {D, D̄} entangler on two qubits.
    Entangler45,
    /// CNOT from qubit 0 to qubit 1 with an internal ancilla.
    Cnot,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Self::Parity, Self::Entangler, Self::Entangler45, Self::Cnot];

    pub fn name(self) -> &'static str {
        match self {
            Self::Parity => "parity",
            Self::Entangler => "entangler",
            Self::Entangler45 => "entangler45",
            Self::Cnot => "cnot",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotStats {
    pub experiment: Experiment,
    pub alpha: f64,
    pub theta: f64,
    pub shots: u64,
    pub seed: u64,
    pub logical_error_rate: f64,
    /// 3σ binomial half-width of `logical_error_rate`.
    pub error_ci: f64,
    pub mean_fidelity: f64,
    /// Frequencies of (even, odd) for the first parity measurement of each
    /// shot.
    pub parity_frequencies: [f64; 2],
}

/// `3·sqrt(p(1 − p)/n)`.
pub fn binomial_ci(p: f64, n: u64) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Result of one shot of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotOutcome {
    pub trace: GateTrace,
    pub state: HybridState,
    /// Ideal output given the classified measurement outcomes.
    pub ideal: HybridState,
    pub fidelity: f64,
}

impl ShotOutcome {
    pub fn first_parity(&self) -> Option<Parity> {
        self.trace.homodyne_records().next().map(|r| r.parity)
    }
}

fn fidelity_or_zero(state: &HybridState, ideal: &HybridState) -> Result<f64> {
    if ideal.norm_sqr() < 1e-300 {
        return Ok(0.0);
    }
    state.fidelity(ideal)
}

/// Exact parity projection with the ideal (phase-free) feed-forward applied.
fn ideal_entangled(
    input: &HybridState,
    basis: ParityBasis,
    parity: Parity,
    flip_qubit: usize,
) -> Result<HybridState> {
    let p = parity_projection(input, 0, 1, basis, parity)?;
    if parity == Parity::Even {
        return Ok(p);
    }
    let s = change_frame(p, &[flip_qubit], basis)?;
    let s = apply_single_qubit(&s, &SingleQubitGate::bit_flip(flip_qubit))?;
    change_frame(s, &[flip_qubit], basis)
}

fn first_record(trace: &GateTrace) -> HomodyneRecord {
    *trace.homodyne_records().next().expect("experiment records a homodyne outcome")
}

/// Runs one shot of `experiment` on a two-qubit `input` (qubit 0, qubit 1).
/// For `cnot` an ancilla in `(|H⟩ + |V⟩)/√2` is inserted between them, so the
/// output qubits are (control, ancilla, target).
pub fn run_shot(
    experiment: Experiment,
    input: &HybridState,
    probe: ProbeMode,
    source: &mut BornRule<rand_chacha::ChaCha8Rng>,
) -> Result<ShotOutcome> {
    if input.n_qubits() != 2 || !input.probes().is_empty() {
        return validation("experiments take a two-qubit polarization state");
    }
    let (trace, state, ideal) = match experiment {
        Experiment::Parity => {
            let (rec, s) = parity_gate(input, 0, 1, probe, ParityBasis::Computational, source)?;
            let mut ideal = parity_projection(input, 0, 1, ParityBasis::Computational, rec.parity)?;
            if rec.parity == Parity::Odd {
                ideal = apply_single_qubit(&ideal, &SingleQubitGate::kerr_correction(0, -rec.phi))?;
            }
            let trace = GateTrace {
                events: vec![MeasurementEvent::Homodyne(rec)],
                ancilla_consumed: 0,
            };
            (trace, s, ideal)
        }
        Experiment::Entangler => {
            let (trace, s) = entangler(input, 0, 1, probe, ParityBasis::Computational, source)?;
            let ideal = ideal_entangled(input, ParityBasis::Computational, first_record(&trace).parity, 1)?;
            (trace, s, ideal)
        }
        Experiment::Entangler45 => {
            let (trace, s) = entangler_45(input, 0, 1, None, probe, source)?;
            let ideal = ideal_entangled(input, ParityBasis::Diagonal, first_record(&trace).parity, 0)?;
            (trace, s, ideal)
        }
        Experiment::Cnot => {
            let with_ancilla = insert_ancilla(input)?;
            let (trace, s) = cnot(&with_ancilla, 0, 1, 2, [probe, probe], source)?;
            let outcome = trace
                .photon_outcomes()
                .next()
                .map(|(_, o)| o)
                .expect("cnot measures its ancilla");
            let ideal = project_polarization(&ideal_cnot(&with_ancilla, 0, 2)?, 1, outcome)?;
            (trace, s, ideal)
        }
    };
    let fidelity = fidelity_or_zero(&state, &ideal)?;
    Ok(ShotOutcome {
        trace,
        state,
        ideal,
        fidelity,
    })
}

/// (q0, q1) → (q0, D, q1).
fn insert_ancilla(input: &HybridState) -> Result<HybridState> {
    let d = std::f64::consts::FRAC_1_SQRT_2;
    let branches = input.branches().flat_map(|b| {
        [Polarization::H, Polarization::V].map(|p| {
            let labels = [b.basis.get(0), p, b.basis.get(1)];
            crate::state::Branch {
                amplitude: b.amplitude * d,
                basis: crate::state::PolBasis::new(&labels).expect("three labels"),
                probe_phase_units: vec![],
            }
        })
    });
    HybridState::from_branches(3, vec![], branches.collect::<Vec<_>>())
}

/// Runs `shots` independent shots in parallel. Shot `i` draws from
/// [`BornRule::for_shot`]`(seed, i)` and results are reduced in shot order,
/// so the statistics do not depend on scheduling.
pub fn run_shots(
    experiment: Experiment,
    inputs: &[(C64, C64)],
    alpha: f64,
    theta: f64,
    shots: u64,
    seed: u64,
) -> Result<ShotStats> {
    if shots == 0 {
        return validation("shots must be at least 1");
    }
    if inputs.len() != 2 {
        return validation(format!("experiments take two input qubits, got {}", inputs.len()));
    }
    let probe = ProbeMode::new(alpha, theta)?;
    let input = HybridState::product(inputs)?;
    let per_shot: Vec<(f64, Option<Parity>)> = (0..shots)
        .into_par_iter()
        .map(|i| {
            let mut source = BornRule::for_shot(seed, i);
            run_shot(experiment, &input, probe, &mut source).map(|o| (o.fidelity, o.first_parity()))
        })
        .collect::<Result<_>>()?;

    let n = shots as f64;
    let errors = per_shot.iter().filter(|(f, _)| *f < LOGICAL_ERROR_FIDELITY).count() as f64;
    let fidelity_sum: f64 = per_shot.iter().map(|(f, _)| f).sum();
    let odd = per_shot.iter().filter(|(_, p)| *p == Some(Parity::Odd)).count() as f64;
    let rate = errors / n;
    Ok(ShotStats {
        experiment,
        alpha,
        theta,
        shots,
        seed,
        logical_error_rate: rate,
        error_ci: binomial_ci(rate, shots),
        mean_fidelity: fidelity_sum / n,
        parity_frequencies: [1.0 - odd / n, odd / n],
    })
}
