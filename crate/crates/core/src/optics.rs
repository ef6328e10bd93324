//! Unitary primitives: single-qubit polarization gates and the cross-Kerr
//! qubit–probe coupling.
//!
//! The PBS → which-path → Kerr medium → PBS block is reduced to the qubit
//! level. A photon in the trigger polarization rail of a qubit kicks the probe
//! label by `±θ`, and nothing else changes. The which-path rails are never
//! materialized.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::state::{BranchKey, HybridState, Polarization};

const UNITARITY_TOLERANCE: f64 = 1e-12;

/// 2×2 gate on one polarization qubit. `matrix[out][in]` acts on (H, V)
/// amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitGate {
    qubit: usize,
    matrix: [[C64; 2]; 2],
}

impl SingleQubitGate {
    pub fn new(qubit: usize, matrix: [[C64; 2]; 2]) -> Result<Self> {
        for row in &matrix {
            for z in row {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return validation("gate matrix entries must be finite");
                }
            }
        }
        // U U† = I
        for i in 0..2 {
            for j in 0..2 {
                let uu: C64 = (0..2).map(|k| matrix[i][k] * matrix[j][k].conj()).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (uu - C64::new(target, 0.0)).norm() > UNITARITY_TOLERANCE {
                    return validation(format!(
                        "gate on qubit {qubit} is not unitary: (UU†)[{i}][{j}] = {uu}"
                    ));
                }
            }
        }
        Ok(Self { qubit, matrix })
    }

    fn known(qubit: usize, matrix: [[C64; 2]; 2]) -> Self {
        Self { qubit, matrix }
    }

    pub fn identity(qubit: usize) -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        Self::known(qubit, [[o, z], [z, o]])
    }

    /// H ↔ V.
    pub fn bit_flip(qubit: usize) -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        Self::known(qubit, [[z, o], [o, z]])
    }

    /// |V⟩ → −|V⟩.
    pub fn sign_flip(qubit: usize) -> Self {
        Self::phase(qubit, std::f64::consts::PI)
    }

    /// diag(1, e^{iφ}).
    pub fn phase(qubit: usize, phi: f64) -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        Self::known(qubit, [[o, z], [z, C64::from_polar(1.0, phi)]])
    }

    /// diag(e^{−iφ}, e^{iφ}): undoes `e^{iφ}` on branches where this qubit is H
    /// and `e^{−iφ}` where it is V. Equal to `phase(2φ)` up to a global phase.
    pub fn kerr_correction(qubit: usize, phi: f64) -> Self {
        let z = C64::new(0.0, 0.0);
        Self::known(
            qubit,
            [[C64::from_polar(1.0, -phi), z], [z, C64::from_polar(1.0, phi)]],
        )
    }

    /// H → D = (H+V)/√2, V → D̄ = (H−V)/√2. Self-inverse.
    pub fn diagonal_basis(qubit: usize) -> Self {
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        Self::known(qubit, [[s, s], [s, -s]])
    }

    pub fn qubit(&self) -> usize {
        self.qubit
    }

    pub fn matrix(&self) -> &[[C64; 2]; 2] {
        &self.matrix
    }
}

pub fn apply_single_qubit(state: &HybridState, gate: &SingleQubitGate) -> Result<HybridState> {
    state.check_qubit(gate.qubit)?;
    let q = gate.qubit;
    let mut out = state.empty_like();
    for (key, amp) in state.entries() {
        let input = key.basis.get(q).index();
        for p in [Polarization::H, Polarization::V] {
            let m = gate.matrix[p.index()][input];
            if m == C64::new(0.0, 0.0) {
                continue;
            }
            out.insert(
                BranchKey {
                    basis: key.basis.with(q, p),
                    phases: key.phases.clone(),
                },
                amp * m,
            );
        }
    }
    Ok(out.pruned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KerrSign {
    Positive,
    Negative,
}

impl KerrSign {
    pub fn units(self) -> i32 {
        match self {
            KerrSign::Positive => 1,
            KerrSign::Negative => -1,
        }
    }
}

/// Cross-Kerr coupling between the `trigger` rail of a qubit and an active
/// probe: `|trigger⟩|β⟩ → |trigger⟩|β e^{±iθ}⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KerrCoupling {
    pub qubit: usize,
    pub trigger: Polarization,
    pub probe: usize,
    pub sign: KerrSign,
}

pub fn apply_cross_kerr(state: &HybridState, coupling: &KerrCoupling) -> Result<HybridState> {
    state.check_qubit(coupling.qubit)?;
    state.probe(coupling.probe)?;
    let mut out = state.empty_like();
    for (key, amp) in state.entries() {
        let mut key = key.clone();
        if key.basis.get(coupling.qubit) == coupling.trigger {
            key.phases[coupling.probe] += coupling.sign.units();
        }
        out.insert(key, *amp);
    }
    Ok(out)
}

/// Frame in which a parity gate compares two qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParityBasis {
    /// {H, V}.
    Computational,
    /// {D, D̄}, via explicit conjugation by [`SingleQubitGate::diagonal_basis`].
    Diagonal,
}

/// The two cross-Kerr couplings of a two-qubit parity detector:
/// `+θ` on `qubit_a`'s H rail and `−θ` on `qubit_b`'s H rail. HH and VV end
/// with net phase 0, HV with `+θ` and VH with `−θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParityCoupling {
    pub qubit_a: usize,
    pub qubit_b: usize,
    pub basis: ParityBasis,
    pub couplings: [KerrCoupling; 2],
}

pub fn build_parity_coupling_pair(
    qubit_a: usize,
    qubit_b: usize,
    probe: usize,
    basis: ParityBasis,
) -> Result<ParityCoupling> {
    if qubit_a == qubit_b {
        return validation(format!("parity coupling needs two distinct qubits, got {qubit_a} twice"));
    }
    Ok(ParityCoupling {
        qubit_a,
        qubit_b,
        basis,
        couplings: [
            KerrCoupling {
                qubit: qubit_a,
                trigger: Polarization::H,
                probe,
                sign: KerrSign::Positive,
            },
            KerrCoupling {
                qubit: qubit_b,
                trigger: Polarization::H,
                probe,
                sign: KerrSign::Negative,
            },
        ],
    })
}

/// Applies `gate_for(q)` to each listed qubit in turn.
pub(crate) fn apply_each(
    state: HybridState,
    qubits: &[usize],
    gate_for: impl Fn(usize) -> SingleQubitGate,
) -> Result<HybridState> {
    qubits
        .iter()
        .try_fold(state, |s, &q| apply_single_qubit(&s, &gate_for(q)))
}

/// Rotates `qubits` into (or out of, since the map is self-inverse) the
/// requested parity frame.
pub fn change_frame(state: HybridState, qubits: &[usize], basis: ParityBasis) -> Result<HybridState> {
    match basis {
        ParityBasis::Computational => Ok(state),
        ParityBasis::Diagonal => apply_each(state, qubits, SingleQubitGate::diagonal_basis),
    }
}

pub fn apply_parity_coupling(state: &HybridState, pair: &ParityCoupling) -> Result<HybridState> {
    let qubits = [pair.qubit_a, pair.qubit_b];
    let mut s = change_frame(state.clone(), &qubits, pair.basis)?;
    for c in &pair.couplings {
        s = apply_cross_kerr(&s, c)?;
    }
    change_frame(s, &qubits, pair.basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{new_state, PolBasis, ProbeMode};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn b(s: &str) -> PolBasis {
        s.parse().unwrap()
    }

    #[test]
    fn bit_flip_permutes() {
        let s = HybridState::basis("HV").unwrap();
        let out = apply_single_qubit(&s, &SingleQubitGate::bit_flip(1)).unwrap();
        assert_eq!(out, HybridState::basis("HH").unwrap());
    }

    #[test]
    fn diagonal_basis_maps_h_to_d() {
        let s = HybridState::basis("H").unwrap();
        let out = apply_single_qubit(&s, &SingleQubitGate::diagonal_basis(0)).unwrap();
        assert!((out.amplitude(b("H")) - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((out.amplitude(b("V")) - c(FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn diagonal_basis_round_trip_prunes_cancelled_branch() {
        let s = HybridState::basis("H").unwrap();
        let g = SingleQubitGate::diagonal_basis(0);
        let out = apply_single_qubit(&apply_single_qubit(&s, &g).unwrap(), &g).unwrap();
        assert_eq!(out.num_branches(), 1);
        assert!((out.amplitude(b("H")) - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn phase_gate_is_diagonal() {
        let (c0, c1) = (c(0.6), C64::new(0.0, 0.8));
        let s = new_state(&[(c0, c1)]).unwrap();
        let phi = 0.37;
        let out = apply_single_qubit(&s, &SingleQubitGate::phase(0, phi)).unwrap();
        assert_eq!(out.amplitude(b("H")), c0);
        assert!((out.amplitude(b("V")) - c1 * C64::from_polar(1.0, phi)).norm() < 1e-15);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = [[c(1.0), c(0.0)], [c(0.0), c(2.0)]];
        assert!(SingleQubitGate::new(0, m).is_err());
        let s = HybridState::basis("H").unwrap();
        assert!(apply_single_qubit(&s, &SingleQubitGate::bit_flip(3)).is_err());
    }

    #[test]
    fn cross_kerr_kicks_only_trigger_rail() {
        let mut s = new_state(&[(c(0.6), c(0.8))]).unwrap();
        let p = s.activate_probe(ProbeMode::new(2.0, 0.3).unwrap());
        let kick = KerrCoupling {
            qubit: 0,
            trigger: Polarization::V,
            probe: p,
            sign: KerrSign::Positive,
        };
        let out = apply_cross_kerr(&s, &kick).unwrap();
        let branches: Vec<_> = out.branches().collect();
        assert_eq!(branches.len(), 2);
        assert_eq!(branches[0].basis, b("H"));
        assert_eq!(branches[0].probe_phase_units, vec![0]);
        assert_eq!(branches[1].basis, b("V"));
        assert_eq!(branches[1].probe_phase_units, vec![1]);
        assert!((out.norm() - 1.0).abs() < 1e-12);

        let undo = KerrCoupling {
            sign: KerrSign::Negative,
            ..kick
        };
        assert_eq!(apply_cross_kerr(&out, &undo).unwrap(), s);
    }

    #[test]
    fn cross_kerr_on_h_with_v_trigger_is_identity() {
        let mut s = HybridState::basis("H").unwrap();
        let p = s.activate_probe(ProbeMode::new(2.0, 0.3).unwrap());
        let kick = KerrCoupling {
            qubit: 0,
            trigger: Polarization::V,
            probe: p,
            sign: KerrSign::Positive,
        };
        assert_eq!(apply_cross_kerr(&s, &kick).unwrap(), s);
    }

    #[test]
    fn cross_kerr_needs_active_probe() {
        let s = HybridState::basis("H").unwrap();
        let kick = KerrCoupling {
            qubit: 0,
            trigger: Polarization::H,
            probe: 0,
            sign: KerrSign::Positive,
        };
        assert!(matches!(
            apply_cross_kerr(&s, &kick),
            Err(crate::Error::Contract(_))
        ));
    }

    #[test]
    fn parity_pair_phases() {
        let (c0, c1, d0, d1) = (c(0.6), c(0.8), C64::new(0.0, FRAC_1_SQRT_2), c(FRAC_1_SQRT_2));
        let mut s = new_state(&[(c0, c1), (d0, d1)]).unwrap();
        let p = s.activate_probe(ProbeMode::new(3.0, 0.2).unwrap());
        let pair = build_parity_coupling_pair(0, 1, p, ParityBasis::Computational).unwrap();
        let out = apply_parity_coupling(&s, &pair).unwrap();
        let expect = [("HH", c0 * d0, 0), ("VV", c1 * d1, 0), ("HV", c0 * d1, 1), ("VH", c1 * d0, -1)];
        assert_eq!(out.num_branches(), 4);
        for br in out.branches() {
            let (_, amp, k) = expect
                .iter()
                .find(|(l, _, _)| b(l) == br.basis)
                .unwrap();
            assert!((br.amplitude - amp).norm() < 1e-15);
            assert_eq!(br.probe_phase_units, vec![*k]);
        }
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parity_pair_edge_inputs() {
        for (input, k) in [("HH", 0), ("VV", 0), ("VH", -1)] {
            let mut s = HybridState::basis(input).unwrap();
            let p = s.activate_probe(ProbeMode::new(1.0, 0.5).unwrap());
            let pair = build_parity_coupling_pair(0, 1, p, ParityBasis::Computational).unwrap();
            let out = apply_parity_coupling(&s, &pair).unwrap();
            let br: Vec<_> = out.branches().collect();
            assert_eq!(br.len(), 1);
            assert_eq!(br[0].probe_phase_units, vec![k]);
        }
        assert!(build_parity_coupling_pair(1, 1, 0, ParityBasis::Computational).is_err());
    }

    #[test]
    fn diagonal_parity_leaves_dd_unkicked() {
        let d = (c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2));
        let mut s = new_state(&[d, d]).unwrap();
        let p = s.activate_probe(ProbeMode::new(1.0, 0.5).unwrap());
        let pair = build_parity_coupling_pair(0, 1, p, ParityBasis::Diagonal).unwrap();
        let out = apply_parity_coupling(&s, &pair).unwrap();
        assert!(out.branches().all(|br| br.probe_phase_units == vec![0]));
        assert!((out.inner(&s).unwrap() - c(1.0)).norm() < 1e-12);
    }
}
