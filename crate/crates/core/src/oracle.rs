//! Dense truncated Fock-space model of qubits ⊗ probes.
//!
//! Used only to cross-check the branch-label model at small α. Every coherent
//! label is expanded into photon-number amplitudes and all operations act on
//! the dense vector directly.

use num_complex::Complex64 as C64;

use crate::error::{validation, Error, Result};
use crate::measurement::KERNEL_PREFACTOR;
use crate::optics::{KerrCoupling, ParityBasis, ParityCoupling, SingleQubitGate};
use crate::state::{HybridState, Polarization, ProbeMode};

/// Largest probe amplitude the dense model accepts.
pub const MAX_ORACLE_ALPHA: f64 = 3.0;

/// Largest permitted `1 − Σ_{n≤N} P(n)` for a coherent label.
pub const MAX_TRUNCATION_LOSS: f64 = 1e-10;

/// Poisson(|β|²) point masses for `n = 0, 1, ...` up to far beyond the bulk.
fn poisson_masses(magnitude: f64) -> Vec<f64> {
    let lambda = magnitude * magnitude;
    if lambda == 0.0 {
        return vec![1.0];
    }
    let ln_lambda = lambda.ln();
    let mut out = Vec::new();
    let mut ln_p = -lambda;
    let mut n = 0usize;
    loop {
        out.push(ln_p.exp());
        if n as f64 > lambda && ln_p < -745.0 {
            return out;
        }
        n += 1;
        ln_p += ln_lambda - (n as f64).ln();
    }
}

/// `1 − Σ_{n≤N} e^{−|β|²}|β|^{2n}/n!`, summed directly over the tail.
pub fn truncation_loss(magnitude: f64, n_trunc: usize) -> f64 {
    poisson_masses(magnitude).iter().skip(n_trunc + 1).rev().sum()
}

/// Smallest `N` whose truncation loss for `|β| = magnitude` is at most `tol`.
pub fn required_truncation(magnitude: f64, tol: f64) -> usize {
    let masses = poisson_masses(magnitude);
    let mut tail = 0.0;
    for n in (0..masses.len()).rev() {
        // tail = Σ_{m>n} masses[m]
        if tail > tol {
            return n + 1;
        }
        tail += masses[n];
    }
    0
}

/// `ψ_0(x) .. ψ_n_max(x)` in the `x̂ = â + â†` convention via the three-term
/// recurrence, with a running log scale so neither tails nor high orders
/// over- or underflow.
pub fn oscillator_eigenfunctions(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut log_scale = KERNEL_PREFACTOR.ln() - x * x / 4.0;
    let (mut prev, mut cur) = (0.0, 1.0);
    for n in 0..=n_max {
        out.push(cur * log_scale.exp());
        let next = (x * cur - (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e100 || (m < 1e-100 && m > 0.0) {
            prev /= m;
            cur /= m;
            log_scale += m.ln();
        }
    }
    out
}

/// Fock amplitudes `e^{−|β|²/2} βⁿ/√n!` for `n ≤ n_trunc`.
pub fn coherent_fock_amplitudes(beta: C64, n_trunc: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(n_trunc + 1);
    let mut c = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..=n_trunc {
        out.push(c);
        c *= beta / ((n + 1) as f64).sqrt();
    }
    out
}

/// Dense amplitude vector over (basis string) × (Fock level per probe).
///
/// Flat index of `(bits, n_0 .. n_{p−1})` is
/// `bits·(N+1)^p + Σ_j n_j (N+1)^{p−1−j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOracleState {
    n_qubits: usize,
    n_trunc: usize,
    probes: Vec<ProbeMode>,
    amps: Vec<C64>,
}

impl FockOracleState {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn probes(&self) -> &[ProbeMode] {
        &self.probes
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    fn levels(&self) -> usize {
        self.n_trunc + 1
    }

    fn fock_block(&self) -> usize {
        self.levels().pow(self.probes.len() as u32)
    }

    /// Fock level of probe `j` at flat index `idx`.
    fn level_of(&self, idx: usize, j: usize) -> usize {
        let stride = self.levels().pow((self.probes.len() - 1 - j) as u32);
        (idx / stride) % self.levels()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits || self.n_trunc != other.n_trunc || self.probes.len() != other.probes.len() {
            return validation("oracle states have different shapes");
        }
        Ok(())
    }

    /// `⟨self|ket⟩`.
    pub fn inner(&self, ket: &Self) -> Result<C64> {
        self.check_compatible(ket)?;
        Ok(self.amps.iter().zip(&ket.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let n = self.norm_sqr() * other.norm_sqr();
        if n == 0.0 {
            return validation("fidelity with a zero oracle state");
        }
        Ok(self.inner(other)?.norm_sqr() / n)
    }
}

pub fn oracle_embed(state: &HybridState, n_trunc: usize) -> Result<FockOracleState> {
    for probe in state.probes() {
        if probe.alpha() > MAX_ORACLE_ALPHA {
            return validation(format!(
                "oracle accepts alpha <= {MAX_ORACLE_ALPHA}, got {}",
                probe.alpha()
            ));
        }
        if truncation_loss(probe.alpha(), n_trunc) > MAX_TRUNCATION_LOSS {
            return Err(Error::Truncation {
                n_trunc,
                magnitude: probe.alpha(),
                required: required_truncation(probe.alpha(), MAX_TRUNCATION_LOSS),
            });
        }
    }
    let probes = state.probes().to_vec();
    let levels = n_trunc + 1;
    let block = levels.pow(probes.len() as u32);
    let mut amps = vec![C64::new(0.0, 0.0); block << state.n_qubits()];
    for branch in state.branches() {
        let factors: Vec<Vec<C64>> = probes
            .iter()
            .zip(&branch.probe_phase_units)
            .map(|(p, &k)| coherent_fock_amplitudes(p.label(k), n_trunc))
            .collect();
        let base = branch.basis.bits() as usize * block;
        for offset in 0..block {
            let mut rem = offset;
            let mut c = branch.amplitude;
            for f in factors.iter().rev() {
                c *= f[rem % levels];
                rem /= levels;
            }
            amps[base + offset] += c;
        }
    }
    Ok(FockOracleState {
        n_qubits: state.n_qubits(),
        n_trunc,
        probes,
        amps,
    })
}

pub fn oracle_single_qubit(state: &FockOracleState, gate: &SingleQubitGate) -> Result<FockOracleState> {
    let q = gate.qubit();
    if q >= state.n_qubits {
        return validation(format!("qubit {q} out of range for {} qubits", state.n_qubits));
    }
    let m = gate.matrix();
    let block = state.fock_block();
    let mask = 1usize << q;
    let mut out = state.clone();
    for bits in (0..1usize << state.n_qubits).filter(|b| b & mask == 0) {
        let (h0, v0) = (bits * block, (bits | mask) * block);
        for f in 0..block {
            let (h, v) = (state.amps[h0 + f], state.amps[v0 + f]);
            out.amps[h0 + f] = m[0][0] * h + m[0][1] * v;
            out.amps[v0 + f] = m[1][0] * h + m[1][1] * v;
        }
    }
    Ok(out)
}

/// Multiplies each component whose basis string triggers the coupling by
/// `e^{i·sign·θ·n}`, with `n` the photon number of the coupled probe.
pub fn oracle_cross_kerr(state: &FockOracleState, coupling: &KerrCoupling) -> Result<FockOracleState> {
    if coupling.qubit >= state.n_qubits {
        return validation(format!("qubit {} out of range", coupling.qubit));
    }
    let Some(probe) = state.probes.get(coupling.probe) else {
        return validation(format!("probe {} is not present in the oracle state", coupling.probe));
    };
    let step = coupling.sign.units() as f64 * probe.theta();
    let rot: Vec<C64> = (0..state.levels()).map(|n| C64::from_polar(1.0, step * n as f64)).collect();
    let block = state.fock_block();
    let mut out = state.clone();
    for (idx, a) in out.amps.iter_mut().enumerate() {
        let bit = (idx / block) >> coupling.qubit & 1 == 1;
        if (bit && coupling.trigger == Polarization::V) || (!bit && coupling.trigger == Polarization::H) {
            *a *= rot[state.level_of(idx, coupling.probe)];
        }
    }
    Ok(out)
}

pub fn oracle_parity_coupling(state: &FockOracleState, pair: &ParityCoupling) -> Result<FockOracleState> {
    let frame = |s: FockOracleState| -> Result<FockOracleState> {
        match pair.basis {
            ParityBasis::Computational => Ok(s),
            ParityBasis::Diagonal => [pair.qubit_a, pair.qubit_b]
                .iter()
                .try_fold(s, |s, &q| oracle_single_qubit(&s, &SingleQubitGate::diagonal_basis(q))),
        }
    };
    let mut s = frame(state.clone())?;
    for c in &pair.couplings {
        s = oracle_cross_kerr(&s, c)?;
    }
    frame(s)
}

/// X-quadrature density of one probe:
/// `p(x) = Σ_g |Σ_n c_{g,n} ψ_n(x)|²`, with `g` running over basis strings
/// and the levels of the other probes.
#[derive(Debug, Clone)]
pub struct OracleDensity {
    n_trunc: usize,
    groups: Vec<Vec<C64>>,
}

impl OracleDensity {
    pub fn eval(&self, x: f64) -> f64 {
        let psi = oscillator_eigenfunctions(x, self.n_trunc);
        self.groups
            .iter()
            .map(|g| g.iter().zip(&psi).map(|(c, p)| c * p).sum::<C64>().norm_sqr())
            .sum()
    }
}

/// Splits the amplitudes into (rest index, level of `probe_index`) pairs.
fn split_probe(state: &FockOracleState, probe_index: usize) -> Result<Vec<Vec<C64>>> {
    let p = state.probes.len();
    if probe_index >= p {
        return validation(format!("probe {probe_index} is not present in the oracle state"));
    }
    let levels = state.levels();
    let inner = levels.pow((p - 1 - probe_index) as u32);
    let mut groups = vec![vec![C64::new(0.0, 0.0); levels]; state.amps.len() / levels];
    for (idx, a) in state.amps.iter().enumerate() {
        let outer = idx / (inner * levels);
        let n = (idx / inner) % levels;
        groups[outer * inner + idx % inner][n] = *a;
    }
    Ok(groups)
}

pub fn oracle_homodyne_density(state: &FockOracleState, probe_index: usize) -> Result<OracleDensity> {
    Ok(OracleDensity {
        n_trunc: state.n_trunc,
        groups: split_probe(state, probe_index)?,
    })
}

/// Conditions on outcome `x` of probe `probe_index`, removes that probe and
/// normalizes.
pub fn oracle_collapse(state: &FockOracleState, probe_index: usize, x: f64) -> Result<FockOracleState> {
    let psi = oscillator_eigenfunctions(x, state.n_trunc);
    let amps: Vec<C64> = split_probe(state, probe_index)?
        .iter()
        .map(|g| g.iter().zip(&psi).map(|(c, p)| c * p).sum())
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return validation(format!("outcome x = {x} has zero density"));
    }
    let mut probes = state.probes.clone();
    probes.remove(probe_index);
    Ok(FockOracleState {
        n_qubits: state.n_qubits,
        n_trunc: state.n_trunc,
        probes,
        amps: amps.into_iter().map(|a| a / norm).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{KerrSign, build_parity_coupling_pair};
    use crate::state::Branch;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    fn with_probe(state: &str, alpha: f64, theta: f64) -> HybridState {
        let mut s = HybridState::basis(state).unwrap();
        s.activate_probe(ProbeMode::new(alpha, theta).unwrap());
        s
    }

    #[test]
    fn eigenfunctions_are_normalized() {
        let n_max = 60;
        let table: Vec<Vec<f64>> = (0..=8000).map(|i| oscillator_eigenfunctions(-25.0 + i as f64 * 50.0 / 8000.0, n_max)).collect();
        for n in 0..=n_max {
            let h = 50.0 / 8000.0;
            let s: f64 = table
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let w = if i == 0 || i == 8000 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * row[n] * row[n]
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((s - 1.0).abs() < 1e-8, "n = {n}: {s}");
        }
        let orth = simpson(|x| {
            let p = oscillator_eigenfunctions(x, 7);
            p[3] * p[7]
        }, -20.0, 20.0, 4000);
        assert!(orth.abs() < 1e-10);
    }

    #[test]
    fn eigenfunctions_stay_finite_far_out() {
        let p = oscillator_eigenfunctions(80.0, 80);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_eq!(p[0], 0.0);
    }

    #[test]
    fn truncation_bounds() {
        assert!(truncation_loss(2.0, 40) < 1e-12);
        assert!(truncation_loss(2.0, 40) > 1e-28);
        assert_eq!(truncation_loss(0.0, 0), 0.0);
        let n = required_truncation(3.0, MAX_TRUNCATION_LOSS);
        assert!(truncation_loss(3.0, n) <= MAX_TRUNCATION_LOSS);
        assert!(truncation_loss(3.0, n - 1) > MAX_TRUNCATION_LOSS);
        assert_eq!(required_truncation(0.0, 1e-10), 0);
    }

    #[test]
    fn vacuum_embeds_into_ground_state() {
        let s = with_probe("H", 0.0, 0.3);
        let o = oracle_embed(&s, 5).unwrap();
        assert_eq!(o.amplitudes()[0], c(1.0));
        assert!(o.amplitudes()[1..].iter().all(|a| *a == c(0.0)));
        let d = oracle_homodyne_density(&o, 0).unwrap();
        for x in [-3.0f64, 0.0, 1.2, 4.0] {
            let want = (-x * x / 2.0).exp() / (2.0 * PI).sqrt();
            assert!((d.eval(x) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn coherent_density_is_unit_gaussian() {
        let o = oracle_embed(&with_probe("H", 2.0, 0.3), 60).unwrap();
        let d = oracle_homodyne_density(&o, 0).unwrap();
        let dev = (0..=2000)
            .map(|i| {
                let x = -6.0 + i as f64 * 0.01;
                (d.eval(x) - (-(x - 4.0) * (x - 4.0) / 2.0).exp() / (2.0 * PI).sqrt()).abs()
            })
            .fold(0.0, f64::max);
        assert!(dev < 1e-8, "{dev}");
    }

    #[test]
    fn embedding_rejects_short_truncation() {
        let err = oracle_embed(&with_probe("H", 3.0, 0.3), 10).unwrap_err();
        assert!(matches!(err, Error::Truncation { n_trunc: 10, required, .. } if required > 10));
        assert!(matches!(oracle_embed(&with_probe("H", 3.5, 0.3), 80), Err(Error::Validation(_))));
    }

    #[test]
    fn embedding_preserves_overlaps() {
        let p = ProbeMode::new(2.0, 0.4).unwrap();
        let s = HybridState::from_branches(
            1,
            vec![p],
            [0, 1].map(|k| Branch {
                amplitude: c(FRAC_1_SQRT_2),
                basis: "H".parse().unwrap(),
                probe_phase_units: vec![k],
            }),
        )
        .unwrap();
        let o = oracle_embed(&s, 60).unwrap();
        assert!((o.norm_sqr() - s.norm_sqr()).abs() < 1e-9);
        assert!((o.norm_sqr().sqrt() - 1.004_773_345_615_645_7).abs() < 1e-9);
    }

    #[test]
    fn cross_kerr_matches_coherent_rotation() {
        let coupling = KerrCoupling {
            qubit: 0,
            trigger: Polarization::V,
            probe: 0,
            sign: KerrSign::Positive,
        };
        let v = oracle_embed(&with_probe("V", 2.0, 0.3), 60).unwrap();
        let rotated = oracle_cross_kerr(&v, &coupling).unwrap();
        let mut want = HybridState::basis("V").unwrap();
        want.activate_probe(ProbeMode::new(2.0, 0.3).unwrap());
        let want = crate::optics::apply_cross_kerr(&want, &coupling).unwrap();
        assert!(rotated.fidelity(&oracle_embed(&want, 60).unwrap()).unwrap() >= 1.0 - 1e-10);

        let h = oracle_embed(&with_probe("H", 2.0, 0.3), 60).unwrap();
        assert_eq!(oracle_cross_kerr(&h, &coupling).unwrap(), h);
    }

    #[test]
    fn parity_gate_density_matches_branch_model() {
        let probe = ProbeMode::new(2.0, 0.5).unwrap();
        let hh = c(FRAC_1_SQRT_2);
        let mut s = HybridState::product(&[(hh, hh), (c(0.6), C64::new(0.0, 0.8))]).unwrap();
        let idx = s.activate_probe(probe);
        let pair = build_parity_coupling_pair(0, 1, idx, ParityBasis::Computational).unwrap();
        let s = crate::optics::apply_parity_coupling(&s, &pair).unwrap();
        let branch = crate::measurement::outcome_density(&s, idx).unwrap();
        let o = oracle_embed(&s, 60).unwrap();
        let d = oracle_homodyne_density(&o, idx).unwrap();
        let dev = (0..=1600)
            .map(|i| {
                let x = -4.0 + i as f64 * 0.01;
                (d.eval(x) - branch.eval(x)).abs()
            })
            .fold(0.0, f64::max);
        assert!(dev < 1e-6, "{dev}");

        for x in [1.0, 3.4, 4.2] {
            let (_, collapsed) = crate::measurement::collapse_at(&s, idx, x).unwrap();
            let oc = oracle_collapse(&o, idx, x).unwrap();
            let f = oc.fidelity(&oracle_embed(&collapsed, 60).unwrap()).unwrap();
            assert!(f > 1.0 - 1e-9, "x = {x}: {f}");
        }
    }
}
