//! Composite gates: the two-qubit parity QND detector, the entangler with
//! feed-forward, its 45° variant and the near-deterministic CNOT.
//!
//! Feed-forward is applied immediately after the measurement it depends on.
//! A misclassified homodyne outcome is not detected. It triggers the wrong
//! corrections and the gate fails. This is the error mechanism behind
//! [`p_error`](crate::analysis::p_error).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::measurement::{qnd_photon_measure, sample_and_collapse, HomodyneRecord, OutcomeSource, Parity};
use crate::optics::{
    apply_parity_coupling, apply_single_qubit, build_parity_coupling_pair, change_frame, ParityBasis,
    SingleQubitGate,
};
use crate::state::{BranchKey, HybridState, Polarization, ProbeMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasurementEvent {
    Homodyne(HomodyneRecord),
    Photon { qubit: usize, outcome: Polarization },
}

/// Measurement record of one gate execution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GateTrace {
    pub events: Vec<MeasurementEvent>,
    /// Photons removed from the register by the gate.
    pub ancilla_consumed: usize,
}

impl GateTrace {
    pub fn homodyne_records(&self) -> impl Iterator<Item = &HomodyneRecord> {
        self.events.iter().filter_map(|e| match e {
            MeasurementEvent::Homodyne(r) => Some(r),
            _ => None,
        })
    }

    pub fn photon_outcomes(&self) -> impl Iterator<Item = (usize, Polarization)> + '_ {
        self.events.iter().filter_map(|e| match e {
            MeasurementEvent::Photon { qubit, outcome } => Some((*qubit, *outcome)),
            _ => None,
        })
    }

    fn push(&mut self, event: MeasurementEvent) -> usize {
        self.events.push(event);
        self.events.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Parity { record: usize, parity: Parity },
    Photon { record: usize, outcome: Polarization },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    /// `diag(e^{−iφ}, e^{iφ})` with φ taken from homodyne record `record`.
    KerrPhase { qubit: usize, record: usize },
    BitFlip { qubit: usize },
    SignFlip { qubit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionalAction {
    pub condition: Condition,
    pub correction: Correction,
    /// Frame the correction is expressed in; diagonal-frame corrections are
    /// conjugated by the D-basis change on their qubit.
    pub frame: ParityBasis,
}

/// Ordered conditional corrections. An action whose condition is false does
/// nothing, so every plan covers both outcomes of each measurement it reads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeedForwardPlan {
    pub actions: Vec<ConditionalAction>,
}

impl FeedForwardPlan {
    pub fn new(actions: Vec<ConditionalAction>) -> Self {
        Self { actions }
    }

    /// Every action must read an existing record of the right kind.
    pub fn validate(&self, trace: &GateTrace) -> Result<()> {
        for a in &self.actions {
            let (record, want_homodyne) = match a.condition {
                Condition::Parity { record, .. } => (record, true),
                Condition::Photon { record, .. } => (record, false),
            };
            let Some(event) = trace.events.get(record) else {
                return validation(format!("feed-forward reads record {record} before it is measured"));
            };
            if matches!(event, MeasurementEvent::Homodyne(_)) != want_homodyne {
                return validation(format!("feed-forward condition on record {record} has the wrong kind"));
            }
            if let Correction::KerrPhase { record, .. } = a.correction {
                if !matches!(trace.events.get(record), Some(MeasurementEvent::Homodyne(_))) {
                    return validation(format!("phase correction reads record {record}, not a homodyne record"));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, state: HybridState, trace: &GateTrace) -> Result<HybridState> {
        self.validate(trace)?;
        let mut s = state;
        for a in &self.actions {
            let fires = match a.condition {
                Condition::Parity { record, parity } => {
                    matches!(trace.events[record], MeasurementEvent::Homodyne(r) if r.parity == parity)
                }
                Condition::Photon { record, outcome } => {
                    matches!(trace.events[record], MeasurementEvent::Photon { outcome: o, .. } if o == outcome)
                }
            };
            if !fires {
                continue;
            }
            let gate = match a.correction {
                Correction::KerrPhase { qubit, record } => {
                    let MeasurementEvent::Homodyne(r) = trace.events[record] else {
                        unreachable!("checked by validate")
                    };
                    SingleQubitGate::kerr_correction(qubit, r.phi)
                }
                Correction::BitFlip { qubit } => SingleQubitGate::bit_flip(qubit),
                Correction::SignFlip { qubit } => SingleQubitGate::sign_flip(qubit),
            };
            let q = gate.qubit();
            s = change_frame(s, &[q], a.frame)?;
            s = apply_single_qubit(&s, &gate)?;
            s = change_frame(s, &[q], a.frame)?;
        }
        Ok(s)
    }
}

fn check_distinct(qubits: &[usize], state: &HybridState) -> Result<()> {
    for (i, q) in qubits.iter().enumerate() {
        state.check_qubit(*q)?;
        if qubits[..i].contains(q) {
            return validation(format!("qubit {q} used twice in one gate"));
        }
    }
    Ok(())
}

/// Two-qubit parity QND detector: couples both qubits to a fresh probe,
/// measures its X quadrature and returns the record with the conditioned
/// state. No feed-forward.
///
/// The frame change back to {H, V} acts on the qubits only and commutes with
/// the probe measurement, so the measurement is made inside the parity frame.
/// There every basis string carries one probe label and the outcome can be
/// drawn from the exact Gaussian mixture.
pub fn parity_gate(
    state: &HybridState,
    qubit_a: usize,
    qubit_b: usize,
    probe: ProbeMode,
    basis: ParityBasis,
    source: &mut impl OutcomeSource,
) -> Result<(HomodyneRecord, HybridState)> {
    check_distinct(&[qubit_a, qubit_b], state)?;
    let mut s = change_frame(state.clone(), &[qubit_a, qubit_b], basis)?;
    let p = s.activate_probe(probe);
    let pair = build_parity_coupling_pair(qubit_a, qubit_b, p, ParityBasis::Computational)?;
    let s = apply_parity_coupling(&s, &pair)?;
    let (record, s) = sample_and_collapse(&s, p, source)?;
    Ok((record, change_frame(s, &[qubit_a, qubit_b], basis)?))
}

/// Odd outcome: undo the kernel phases, then flip `qubit_b`.
pub fn entangler_plan(qubit_a: usize, qubit_b: usize, basis: ParityBasis, record: usize) -> FeedForwardPlan {
    let odd = Condition::Parity {
        record,
        parity: Parity::Odd,
    };
    FeedForwardPlan::new(vec![
        ConditionalAction {
            condition: odd,
            correction: Correction::KerrPhase { qubit: qubit_a, record },
            frame: basis,
        },
        ConditionalAction {
            condition: odd,
            correction: Correction::BitFlip { qubit: qubit_b },
            frame: basis,
        },
    ])
}

/// Odd outcome of the diagonal-frame entangler: undo the kernel phases, flip
/// `qubit_a` in the {D, D̄} frame (which is `|V⟩ → −|V⟩` on it in the {H, V}
/// frame) and apply `|V⟩ → −|V⟩` on `sign_qubit`.
///
/// The flip lands on `qubit_a`, not `qubit_b`. In the CNOT `qubit_a` is the
/// ancilla, whose D/D̄ component is correlated with the control. The sign
/// change on the control then restores the even-parity form exactly.
/// Flipping `qubit_b` instead would swap the target's `d0 ± d1` weights
/// between the two terms.
pub fn entangler_45_plan(
    qubit_a: usize,
    sign_qubit: Option<usize>,
    record: usize,
) -> FeedForwardPlan {
    let odd = Condition::Parity {
        record,
        parity: Parity::Odd,
    };
    let mut actions = vec![
        ConditionalAction {
            condition: odd,
            correction: Correction::KerrPhase { qubit: qubit_a, record },
            frame: ParityBasis::Diagonal,
        },
        ConditionalAction {
            condition: odd,
            correction: Correction::BitFlip { qubit: qubit_a },
            frame: ParityBasis::Diagonal,
        },
    ];
    if let Some(q) = sign_qubit {
        actions.push(ConditionalAction {
            condition: odd,
            correction: Correction::SignFlip { qubit: q },
            frame: ParityBasis::Computational,
        });
    }
    FeedForwardPlan::new(actions)
}

/// Appends `record` to the trace and applies the plan built for its index.
fn feed_forward(
    trace: &mut GateTrace,
    (record, state): (HomodyneRecord, HybridState),
    plan: impl FnOnce(usize) -> FeedForwardPlan,
) -> Result<HybridState> {
    let idx = trace.push(MeasurementEvent::Homodyne(record));
    plan(idx).apply(state, trace)
}

/// Parity gate plus feed-forward; the output always has the even-parity form
/// (up to misclassification).
pub fn entangler(
    state: &HybridState,
    qubit_a: usize,
    qubit_b: usize,
    probe: ProbeMode,
    basis: ParityBasis,
    source: &mut impl OutcomeSource,
) -> Result<(GateTrace, HybridState)> {
    let mut trace = GateTrace::default();
    let measured = parity_gate(state, qubit_a, qubit_b, probe, basis, source)?;
    let s = feed_forward(&mut trace, measured, |r| entangler_plan(qubit_a, qubit_b, basis, r))?;
    Ok((trace, s))
}

/// Entangler in the {D, D̄} frame; see [`entangler_45_plan`] for the odd
/// outcome corrections.
pub fn entangler_45(
    state: &HybridState,
    qubit_a: usize,
    qubit_b: usize,
    sign_qubit: Option<usize>,
    probe: ProbeMode,
    source: &mut impl OutcomeSource,
) -> Result<(GateTrace, HybridState)> {
    if let Some(q) = sign_qubit {
        check_distinct(&[qubit_a, qubit_b, q], state)?;
    }
    let mut trace = GateTrace::default();
    let measured = parity_gate(state, qubit_a, qubit_b, probe, ParityBasis::Diagonal, source)?;
    let s = feed_forward(&mut trace, measured, |r| entangler_45_plan(qubit_a, sign_qubit, r))?;
    Ok((trace, s))
}

/// Checks the ancilla is unentangled and in `(|H⟩ + |V⟩)/√2` up to a global
/// phase.
fn check_ancilla_ready(state: &HybridState, ancilla: usize) -> Result<()> {
    let ready = matches!(
        state.qubit_factor(ancilla)?,
        Some((a, b)) if (a * b.conj() - C64::new(0.5, 0.0)).norm() < 1e-9
    );
    if !ready {
        return validation(format!("ancilla qubit {ancilla} must be prepared in (|H> + |V>)/sqrt(2)"));
    }
    Ok(())
}

/// Near-deterministic CNOT from `control` to `target` using one ancilla
/// photon and two probe beams:
///
/// 1. entangler(control, ancilla) in {H, V};
/// 2. 45° entangler(ancilla, target) with the sign fix on `control`;
/// 3. QND {H, V} measurement of the ancilla, bit flip on `target` if V.
///
/// The ancilla stays in the register, in the basis state it was found in.
pub fn cnot(
    state: &HybridState,
    control: usize,
    ancilla: usize,
    target: usize,
    probes: [ProbeMode; 2],
    source: &mut impl OutcomeSource,
) -> Result<(GateTrace, HybridState)> {
    check_distinct(&[control, ancilla, target], state)?;
    check_ancilla_ready(state, ancilla)?;
    let qubits_before = state.n_qubits();

    let mut trace = GateTrace::default();
    let measured = parity_gate(state, control, ancilla, probes[0], ParityBasis::Computational, source)?;
    let s = feed_forward(&mut trace, measured, |r| {
        entangler_plan(control, ancilla, ParityBasis::Computational, r)
    })?;
    let measured = parity_gate(&s, ancilla, target, probes[1], ParityBasis::Diagonal, source)?;
    let s = feed_forward(&mut trace, measured, |r| entangler_45_plan(ancilla, Some(control), r))?;

    let (outcome, s) = qnd_photon_measure(&s, ancilla, source)?;
    let record = trace.push(MeasurementEvent::Photon {
        qubit: ancilla,
        outcome,
    });
    let plan = FeedForwardPlan::new(vec![ConditionalAction {
        condition: Condition::Photon {
            record,
            outcome: Polarization::V,
        },
        correction: Correction::BitFlip { qubit: target },
        frame: ParityBasis::Computational,
    }]);
    let s = plan.apply(s, &trace)?;
    trace.ancilla_consumed = qubits_before - s.n_qubits();
    Ok((trace, s))
}

/// Returns a measured ancilla (definite H or V) to `(|H⟩ + |V⟩)/√2` for reuse.
pub fn recycle_ancilla(state: &HybridState, ancilla: usize) -> Result<HybridState> {
    let Some(p) = state.definite_polarization(ancilla)? else {
        return validation(format!("ancilla {ancilla} is not in a definite polarization"));
    };
    let s = match p {
        Polarization::H => state.clone(),
        Polarization::V => apply_single_qubit(state, &SingleQubitGate::bit_flip(ancilla))?,
    };
    apply_single_qubit(&s, &SingleQubitGate::diagonal_basis(ancilla))
}

/// Sequence of CNOTs on `n` logical qubits sharing one recycled ancilla:
/// the register has `n + 1` photons no matter how many gates run.
#[derive(Debug, Clone, Copy)]
pub struct CnotCircuit {
    n_logical: usize,
    probes: [ProbeMode; 2],
}

impl CnotCircuit {
    pub fn new(n_logical: usize, probes: [ProbeMode; 2]) -> Result<Self> {
        if n_logical < 2 {
            return validation("a CNOT circuit needs at least two logical qubits");
        }
        Ok(Self { n_logical, probes })
    }

    pub fn total_qubits(&self) -> usize {
        self.n_logical + 1
    }

    /// The ancilla is the last qubit.
    pub fn ancilla(&self) -> usize {
        self.n_logical
    }

    /// Product of the logical inputs with the ancilla appended in D.
    pub fn prepare(&self, logical: &[(C64, C64)]) -> Result<HybridState> {
        if logical.len() != self.n_logical {
            return validation(format!(
                "expected {} logical inputs, got {}",
                self.n_logical,
                logical.len()
            ));
        }
        let d = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut specs = logical.to_vec();
        specs.push((d, d));
        HybridState::product(&specs)
    }

    pub fn run(
        &self,
        input: &HybridState,
        gates: &[(usize, usize)],
        source: &mut impl OutcomeSource,
    ) -> Result<(Vec<GateTrace>, HybridState)> {
        if input.n_qubits() != self.total_qubits() {
            return validation(format!(
                "circuit state must have {} qubits, got {}",
                self.total_qubits(),
                input.n_qubits()
            ));
        }
        let anc = self.ancilla();
        let mut state = input.clone();
        let mut traces = Vec::with_capacity(gates.len());
        for (i, &(c, t)) in gates.iter().enumerate() {
            if c >= self.n_logical || t >= self.n_logical {
                return validation(format!("gate {i}: ({c}, {t}) must address logical qubits"));
            }
            if i > 0 {
                state = recycle_ancilla(&state, anc)?;
            }
            let (trace, next) = cnot(&state, c, anc, t, self.probes, source)?;
            traces.push(trace);
            state = next;
        }
        Ok((traces, state))
    }
}

/// Exact CNOT on the register: flips `target` on branches where `control` is V.
pub fn ideal_cnot(state: &HybridState, control: usize, target: usize) -> Result<HybridState> {
    check_distinct(&[control, target], state)?;
    let mut out = state.empty_like();
    for (k, a) in state.entries() {
        let basis = if k.basis.get(control) == Polarization::V {
            k.basis.flipped(target)
        } else {
            k.basis
        };
        out.insert(
            BranchKey {
                basis,
                phases: k.phases.clone(),
            },
            *a,
        );
    }
    Ok(out)
}

/// Exact projection onto a parity subspace of two qubits in the given frame.
/// Not normalized.
pub fn parity_projection(
    state: &HybridState,
    qubit_a: usize,
    qubit_b: usize,
    basis: ParityBasis,
    parity: Parity,
) -> Result<HybridState> {
    check_distinct(&[qubit_a, qubit_b], state)?;
    let s = change_frame(state.clone(), &[qubit_a, qubit_b], basis)?;
    let mut out = s.empty_like();
    for (k, a) in s.entries() {
        let even = k.basis.get(qubit_a) == k.basis.get(qubit_b);
        if even == (parity == Parity::Even) {
            out.insert(k.clone(), *a);
        }
    }
    change_frame(out, &[qubit_a, qubit_b], basis)
}
