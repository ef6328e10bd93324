//! Joint polarization-qubit ⊗ coherent-probe states in the branch-label model.
//!
//! A cross-Kerr interaction maps a coherent probe |α⟩ to another coherent state
//! |α e^{ikθ}⟩, so a qubit register coupled to probes stays an exact finite
//! superposition of (polarization basis string) ⊗ (coherent labels). Each
//! branch stores its amplitude, its basis string and one integer phase index
//! `k` per active probe. The probe label is then `α e^{ikθ}`.
//!
//! Branches with different labels are not orthogonal. Every norm and inner
//! product therefore carries the coherent overlap
//! `⟨β'|β⟩ = exp(−|β|²/2 − |β'|²/2 + conj(β')·β)` between probe labels.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{contract, validation, Error, Result};

/// Prune threshold applied after every gate.
pub const DEFAULT_PRUNE_EPSILON: f64 = 1e-14;

/// Tolerance for normalization checks on prepared qubit amplitudes.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Largest register a [`PolBasis`] can address.
pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }

    pub(crate) fn from_bit(bit: bool) -> Self {
        if bit {
            Polarization::V
        } else {
            Polarization::H
        }
    }

    /// Row/column index of this polarization in a 2×2 (H, V) matrix.
    pub(crate) fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::H => write!(f, "H"),
            Polarization::V => write!(f, "V"),
        }
    }
}

/// Polarization basis string |p_0 p_1 … p_{n-1}⟩. Qubit `i` is bit `i`
/// (set = V).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolBasis {
    bits: u64,
    len: u8,
}

impl PolBasis {
    pub fn new(labels: &[Polarization]) -> Result<Self> {
        if labels.is_empty() || labels.len() > MAX_QUBITS {
            return validation(format!(
                "basis string length {} outside 1..={MAX_QUBITS}",
                labels.len()
            ));
        }
        let bits = labels
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == Polarization::V)
            .fold(0u64, |acc, (i, _)| acc | (1 << i));
        Ok(Self {
            bits,
            len: labels.len() as u8,
        })
    }

    /// All-H string of length `len`.
    pub fn horizontal(len: usize) -> Result<Self> {
        Self::new(&vec![Polarization::H; len])
    }

    pub(crate) fn from_bits(bits: u64, len: usize) -> Self {
        debug_assert!((1..=MAX_QUBITS).contains(&len));
        Self {
            bits,
            len: len as u8,
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn get(&self, qubit: usize) -> Polarization {
        Polarization::from_bit(self.bits >> qubit & 1 == 1)
    }

    pub fn with(&self, qubit: usize, p: Polarization) -> Self {
        let bits = match p {
            Polarization::H => self.bits & !(1 << qubit),
            Polarization::V => self.bits | (1 << qubit),
        };
        Self { bits, len: self.len }
    }

    pub fn flipped(&self, qubit: usize) -> Self {
        Self {
            bits: self.bits ^ (1 << qubit),
            len: self.len,
        }
    }

    pub fn labels(&self) -> Vec<Polarization> {
        (0..self.len()).map(|q| self.get(q)).collect()
    }
}

impl FromStr for PolBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let labels = s
            .chars()
            .map(|c| match c {
                'H' | 'h' => Ok(Polarization::H),
                'V' | 'v' => Ok(Polarization::V),
                other => validation(format!("invalid polarization label {other:?}")),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&labels)
    }
}

impl fmt::Display for PolBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.len() {
            write!(f, "{}", self.get(q))?;
        }
        Ok(())
    }
}

/// Coherent probe with real amplitude `alpha` and Kerr phase unit
/// `theta = χt` per signal photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeMode {
    alpha: f64,
    theta: f64,
}

impl ProbeMode {
    /// `theta = 0` is accepted as the degenerate, non-interacting probe.
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return validation(format!("probe amplitude alpha = {alpha} must be finite and >= 0"));
        }
        if !theta.is_finite() || !(0.0..=std::f64::consts::PI).contains(&theta) {
            return validation(format!("Kerr phase theta = {theta} must lie in [0, pi]"));
        }
        Ok(Self { alpha, theta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Coherent label `α e^{ikθ}` for phase index `k`.
    pub fn label(&self, k: i32) -> C64 {
        C64::from_polar(self.alpha, k as f64 * self.theta)
    }

    /// `⟨α e^{i·bra·θ} | α e^{i·ket·θ}⟩ = exp(α² (e^{iΔ} − 1))` with
    /// `Δ = (ket − bra)·θ`.
    pub fn label_overlap(&self, bra: i32, ket: i32) -> C64 {
        if bra == ket {
            return C64::new(1.0, 0.0);
        }
        let delta = (ket - bra) as f64 * self.theta;
        let a2 = self.alpha * self.alpha;
        let half = (0.5 * delta).sin();
        C64::new(-2.0 * a2 * half * half, a2 * delta.sin()).exp()
    }
}

/// `⟨bra|ket⟩` for arbitrary coherent amplitudes.
pub fn coherent_overlap(bra: C64, ket: C64) -> C64 {
    (-0.5 * (bra.norm_sqr() + ket.norm_sqr()) + bra.conj() * ket).exp()
}

/// One superposition term: amplitude, polarization string and one phase
/// index per active probe.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub amplitude: C64,
    pub basis: PolBasis,
    pub probe_phase_units: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct BranchKey {
    pub(crate) basis: PolBasis,
    pub(crate) phases: Vec<i32>,
}

impl BranchKey {
    /// Smallest key carrying `basis`; the start of that basis' run in a
    /// `BTreeMap` ordered by (basis, phases).
    fn first_of(basis: PolBasis) -> Self {
        Self {
            basis,
            phases: Vec::new(),
        }
    }
}

/// Result of [`HybridState::merge_and_prune`].
#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub removed: usize,
    /// Σ |amplitude|² over removed branches.
    pub pruned_mass: f64,
}

/// Superposition of branches over polarization strings, each carrying one
/// coherent label per active (unmeasured) probe.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    n_qubits: usize,
    probes: Vec<ProbeMode>,
    branches: BTreeMap<BranchKey, C64>,
    pruned_mass: f64,
}

/// Product-state preparation; see [`HybridState::product`].
pub fn new_state(qubit_specs: &[(C64, C64)]) -> Result<HybridState> {
    HybridState::product(qubit_specs)
}

impl HybridState {
    /// Product state `⊗_i (c0_i |H⟩ + c1_i |V⟩)` with no active probes.
    /// Zero-amplitude branches are dropped.
    pub fn product(qubit_specs: &[(C64, C64)]) -> Result<Self> {
        let n = qubit_specs.len();
        if n == 0 {
            return validation("a state needs at least one qubit");
        }
        if n > MAX_QUBITS {
            return validation(format!("at most {MAX_QUBITS} qubits are supported"));
        }
        for (i, (c0, c1)) in qubit_specs.iter().enumerate() {
            let norm = c0.norm_sqr() + c1.norm_sqr();
            if !norm.is_finite() || (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return validation(format!(
                    "qubit {i}: |c0|^2 + |c1|^2 = {norm}, expected 1 within {NORMALIZATION_TOLERANCE:e}"
                ));
            }
        }

        let mut terms: Vec<(u64, C64)> = vec![(0, C64::new(1.0, 0.0))];
        for (q, (c0, c1)) in qubit_specs.iter().enumerate() {
            let mut next = Vec::with_capacity(terms.len() * 2);
            for (bits, amp) in terms {
                if *c0 != C64::new(0.0, 0.0) {
                    next.push((bits, amp * c0));
                }
                if *c1 != C64::new(0.0, 0.0) {
                    next.push((bits | 1 << q, amp * c1));
                }
            }
            terms = next;
        }

        let mut state = Self::empty(n, Vec::new());
        for (bits, amp) in terms {
            state.insert(
                BranchKey {
                    basis: PolBasis::from_bits(bits, n),
                    phases: Vec::new(),
                },
                amp,
            );
        }
        Ok(state)
    }

    /// Single basis string with amplitude 1, e.g. `HybridState::basis("HV")`.
    pub fn basis(labels: &str) -> Result<Self> {
        let basis: PolBasis = labels.parse()?;
        let mut state = Self::empty(basis.len(), Vec::new());
        state.insert(BranchKey::first_of(basis), C64::new(1.0, 0.0));
        Ok(state)
    }

    /// Raw constructor. Branches sharing a key are merged; the result is not
    /// renormalized.
    pub fn from_branches(
        n_qubits: usize,
        probes: Vec<ProbeMode>,
        branches: impl IntoIterator<Item = Branch>,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return validation(format!("qubit count {n_qubits} outside 1..={MAX_QUBITS}"));
        }
        let mut state = Self::empty(n_qubits, probes);
        for b in branches {
            if b.basis.len() != n_qubits {
                return validation(format!(
                    "branch basis {} has length {}, state has {n_qubits} qubits",
                    b.basis,
                    b.basis.len()
                ));
            }
            if b.probe_phase_units.len() != state.probes.len() {
                return validation(format!(
                    "branch carries {} probe phases, state has {} active probes",
                    b.probe_phase_units.len(),
                    state.probes.len()
                ));
            }
            if !(b.amplitude.re.is_finite() && b.amplitude.im.is_finite()) {
                return validation("branch amplitude must be finite");
            }
            state.insert(
                BranchKey {
                    basis: b.basis,
                    phases: b.probe_phase_units,
                },
                b.amplitude,
            );
        }
        Ok(state)
    }

    pub(crate) fn empty(n_qubits: usize, probes: Vec<ProbeMode>) -> Self {
        Self {
            n_qubits,
            probes,
            branches: BTreeMap::new(),
            pruned_mass: 0.0,
        }
    }

    /// Same register and probes, no branches, same pruning history.
    pub(crate) fn empty_like(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            probes: self.probes.clone(),
            branches: BTreeMap::new(),
            pruned_mass: self.pruned_mass,
        }
    }

    /// Like [`empty_like`](Self::empty_like) with probe `probe_index` dropped
    /// from the registry.
    pub(crate) fn empty_without_probe(&self, probe_index: usize) -> Self {
        let mut probes = self.probes.clone();
        probes.remove(probe_index);
        Self {
            n_qubits: self.n_qubits,
            probes,
            branches: BTreeMap::new(),
            pruned_mass: self.pruned_mass,
        }
    }

    pub(crate) fn insert(&mut self, key: BranchKey, amp: C64) {
        *self.branches.entry(key).or_insert(C64::new(0.0, 0.0)) += amp;
    }

    pub(crate) fn entries(&self) -> impl Iterator<Item = (&BranchKey, &C64)> {
        self.branches.iter()
    }

    pub(crate) fn entries_for_basis(
        &self,
        basis: PolBasis,
    ) -> impl Iterator<Item = (&BranchKey, &C64)> {
        self.branches
            .range(BranchKey::first_of(basis)..)
            .take_while(move |(k, _)| k.basis == basis)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probes(&self) -> &[ProbeMode] {
        &self.probes
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    /// Probability mass removed by pruning over this state's history.
    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    pub fn branches(&self) -> impl Iterator<Item = Branch> + '_ {
        self.branches.iter().map(|(k, a)| Branch {
            amplitude: *a,
            basis: k.basis,
            probe_phase_units: k.phases.clone(),
        })
    }

    /// Sum of amplitudes on `basis` over all probe labels. For a state with no
    /// active probes this is just ⟨basis|ψ⟩.
    pub fn amplitude(&self, basis: PolBasis) -> C64 {
        self.entries_for_basis(basis).map(|(_, a)| *a).sum()
    }

    pub fn probe(&self, probe_index: usize) -> Result<ProbeMode> {
        match self.probes.get(probe_index) {
            Some(p) => Ok(*p),
            None => contract(format!(
                "probe {probe_index} is not active ({} active probes)",
                self.probes.len()
            )),
        }
    }

    pub(crate) fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return validation(format!(
                "qubit index {qubit} out of range for a {}-qubit state",
                self.n_qubits
            ));
        }
        Ok(())
    }

    /// Registers a probe in its vacuum-phase label |α⟩ and returns its index.
    pub fn activate_probe(&mut self, probe: ProbeMode) -> usize {
        self.probes.push(probe);
        let old = std::mem::take(&mut self.branches);
        for (mut key, amp) in old {
            key.phases.push(0);
            self.insert(key, amp);
        }
        self.probes.len() - 1
    }

    /// `⟨self|ket⟩`, including coherent overlaps between probe labels.
    pub fn inner(&self, ket: &HybridState) -> Result<C64> {
        if self.n_qubits != ket.n_qubits {
            return validation(format!(
                "inner product between {}- and {}-qubit states",
                self.n_qubits, ket.n_qubits
            ));
        }
        if self.probes != ket.probes {
            return contract("inner product requires identical active probes");
        }
        let mut acc = C64::new(0.0, 0.0);
        for (kb, ab) in &self.branches {
            for (kk, ak) in ket.entries_for_basis(kb.basis) {
                let mut term = ab.conj() * ak;
                for (p, probe) in self.probes.iter().enumerate() {
                    term *= probe.label_overlap(kb.phases[p], kk.phases[p]);
                }
                acc += term;
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        let mut keys = self.branches.iter().peekable();
        while let Some((k0, _)) = keys.peek() {
            let basis = k0.basis;
            let group: Vec<(&BranchKey, &C64)> = self.entries_for_basis(basis).collect();
            for _ in 0..group.len() {
                keys.next();
            }
            for (i, (ki, ai)) in group.iter().enumerate() {
                acc += ai.norm_sqr();
                for (kj, aj) in &group[i + 1..] {
                    let mut term = aj.conj() * **ai;
                    for (p, probe) in self.probes.iter().enumerate() {
                        term *= probe.label_overlap(kj.phases[p], ki.phases[p]);
                    }
                    acc += 2.0 * term.re;
                }
            }
        }
        acc.max(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Removes branches with `|amplitude| < epsilon` (keys are already merged on
    /// insert). The state is not renormalized; the removed probability is
    /// reported and added to [`pruned_mass`](Self::pruned_mass).
    pub fn merge_and_prune(&self, epsilon: f64) -> Result<(HybridState, PruneReport)> {
        if !(epsilon >= 0.0) {
            return validation(format!("prune epsilon {epsilon} must be >= 0"));
        }
        let mut out = self.clone();
        let report = out.prune_in_place(epsilon);
        Ok((out, report))
    }

    pub(crate) fn prune_in_place(&mut self, epsilon: f64) -> PruneReport {
        let mut removed = 0;
        let mut mass = 0.0;
        self.branches.retain(|_, a| {
            let keep = a.norm() >= epsilon && a.norm() > 0.0;
            if !keep {
                removed += 1;
                mass += a.norm_sqr();
            }
            keep
        });
        self.pruned_mass += mass;
        PruneReport {
            removed,
            pruned_mass: mass,
        }
    }

    pub(crate) fn pruned(mut self) -> Self {
        self.prune_in_place(DEFAULT_PRUNE_EPSILON);
        self
    }

    pub fn scaled(mut self, factor: C64) -> Self {
        for a in self.branches.values_mut() {
            *a *= factor;
        }
        self
    }

    pub fn normalized(self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return contract(format!("cannot normalize a state with norm {norm}"));
        }
        Ok(self.scaled(C64::new(1.0 / norm, 0.0)))
    }

    /// `|⟨reference|self⟩|²` over the polarization space, both states
    /// normalized first. Both must have all probes measured.
    pub fn fidelity(&self, reference: &HybridState) -> Result<f64> {
        if !self.probes.is_empty() || !reference.probes.is_empty() {
            return contract("fidelity needs pure polarization states: measure all probes first");
        }
        let denom = self.norm_sqr() * reference.norm_sqr();
        if !(denom > 0.0) {
            return contract("fidelity with a zero state is undefined");
        }
        Ok((reference.inner(self)?.norm_sqr() / denom).clamp(0.0, 1.0))
    }

    /// If the state factorizes as `rest ⊗ (a|H⟩ + b|V⟩)` on `qubit`, returns the
    /// normalized `(a, b)` (phase fixed by the first nonzero branch group).
    pub fn qubit_factor(&self, qubit: usize) -> Result<Option<(C64, C64)>> {
        self.check_qubit(qubit)?;
        let mut pairs: BTreeMap<BranchKey, (C64, C64)> = BTreeMap::new();
        for (k, a) in &self.branches {
            let rest = BranchKey {
                basis: k.basis.with(qubit, Polarization::H),
                phases: k.phases.clone(),
            };
            let slot = pairs.entry(rest).or_insert((C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
            match k.basis.get(qubit) {
                Polarization::H => slot.0 += a,
                Polarization::V => slot.1 += a,
            }
        }
        let Some(&(h0, v0)) = pairs
            .values()
            .max_by(|x, y| (x.0.norm_sqr() + x.1.norm_sqr()).total_cmp(&(y.0.norm_sqr() + y.1.norm_sqr())))
        else {
            return Ok(None);
        };
        let n0 = (h0.norm_sqr() + v0.norm_sqr()).sqrt();
        if n0 == 0.0 {
            return Ok(None);
        }
        let (a, b) = (h0 / n0, v0 / n0);
        // Each group must be parallel to (a, b): the 2x2 determinant vanishes.
        let scale = self.branches.values().map(|x| x.norm()).fold(0.0, f64::max);
        for (h, v) in pairs.values() {
            if (h * b - v * a).norm() > 1e-10 * scale.max(1.0) {
                return Ok(None);
            }
        }
        Ok(Some((a, b)))
    }

    /// `Some(p)` when every branch has polarization `p` on `qubit`.
    pub fn definite_polarization(&self, qubit: usize) -> Result<Option<Polarization>> {
        self.check_qubit(qubit)?;
        let mut seen = None;
        for k in self.branches.keys() {
            let p = k.basis.get(qubit);
            match seen {
                None => seen = Some(p),
                Some(s) if s != p => return Ok(None),
                _ => {}
            }
        }
        Ok(seen)
    }
}

impl fmt::Display for HybridState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.branches.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, a)) in self.branches.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i)|{}⟩", a.re, a.im, k.basis)?;
            if !k.phases.is_empty() {
                write!(f, "{:?}", k.phases)?;
            }
        }
        Ok(())
    }
}
