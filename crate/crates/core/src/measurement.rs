//! Homodyne X-quadrature measurement of a probe and nondestructive {H, V}
//! photon measurement of a qubit.
//!
//! # Conventions
//!
//! The quadrature is `x̂ = â + â†`. A coherent state |β⟩ then has outcome
//! density `N(2 Re β, 1)` and position-space wavefunction
//!
//! ```text
//! ⟨x|β⟩ = (2π)^{-1/4} exp(−x²/4 + βx − β²/2 − |β|²/2)
//! ```
//!
//! whose modulus for real β is `exp[−(x − 2β)²/4] / (2π)^{1/4}`.
//!
//! The odd-parity branches of a parity detector carry labels `α e^{±iθ}`.
//! Conditioning on `x` gives them the phases `e^{±iφ(x)}` with
//!
//! ```text
//! φ(x) = α x sin θ − (α²/2) sin 2θ   (mod 2π)
//! ```
//!
//! This is computed from the kernel and is what feed-forward undoes. The
//! frequently quoted form `α x sin θ − α² sin 2θ` differs from it by the
//! x-independent offset `(α²/2) sin 2θ`. That offset does not follow from the
//! kernel above. Using the quoted form for feed-forward would leave a residual
//! relative phase between the HV and VH terms, so it is not used.
//!
//! The parity decision threshold is the midpoint `X₀ = α(1 + cos θ)` of the
//! two peaks at `2α` (even) and `2α cos θ` (odd).

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::state::{BranchKey, HybridState, PolBasis, Polarization, ProbeMode};

/// (2π)^{-1/4}
pub const KERNEL_PREFACTOR: f64 = 0.631_618_777_746_064_7;

/// Minimum grid size for inverse-CDF sampling.
pub const MIN_GRID_POINTS: usize = 4096;
const GRID_SPACING: f64 = 2e-3;
const MAX_GRID_POINTS: usize = 1 << 20;
const GRID_MARGIN: f64 = 8.0;

/// Exponent of the kernel without the prefactor:
/// `−(x − 2a)²/4 + i·b(x − a)` for `β = a + ib`. Algebraically equal to
/// `−x²/4 + βx − β²/2 − |β|²/2` but free of large cancelling terms.
pub fn kernel_log(x: f64, beta: C64) -> C64 {
    let (a, b) = (beta.re, beta.im);
    let d = x - 2.0 * a;
    C64::new(-0.25 * d * d, b * (x - a))
}

/// `⟨x|β⟩` under the `x̂ = â + â†` convention.
pub fn kernel_value(x: f64, beta: C64) -> C64 {
    KERNEL_PREFACTOR * kernel_log(x, beta).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Outcome of one X-quadrature measurement of a parity probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneRecord {
    pub x: f64,
    pub x0: f64,
    pub parity: Parity,
    /// Phase of `⟨x|α e^{iθ}⟩` relative to `⟨x|α⟩`, reduced to [0, 2π).
    pub phi: f64,
}

impl HomodyneRecord {
    pub fn classify(x: f64, probe: &ProbeMode) -> Self {
        let x0 = threshold(probe);
        let parity = if x > x0 { Parity::Even } else { Parity::Odd };
        let phi = (kernel_log(x, probe.label(1)).im - kernel_log(x, probe.label(0)).im).rem_euclid(TAU);
        Self { x, x0, parity, phi }
    }
}

/// `X₀ = α(1 + cos θ)`.
pub fn threshold(probe: &ProbeMode) -> f64 {
    probe.alpha() * (1.0 + probe.theta().cos())
}

/// Centre of the outcome peak for a parity class: `2α` for even, `2α cos θ`
/// for odd.
pub fn parity_peak(probe: &ProbeMode, parity: Parity) -> f64 {
    match parity {
        Parity::Even => 2.0 * probe.alpha(),
        Parity::Odd => 2.0 * probe.alpha() * probe.theta().cos(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingStrategy {
    /// Every basis string carries a single label of the measured probe, so
    /// the density is a Gaussian mixture and can be sampled exactly.
    ExactMixture,
    /// Label interference within a basis string; sample by numerically
    /// inverting the CDF on a fine grid.
    GridInverseCdf,
}

#[derive(Debug, Clone, Copy)]
struct DensityTerm {
    coef: C64,
    ket: i32,
    bra: i32,
}

/// Outcome density `p(x)` for an X-quadrature measurement of one probe.
///
/// `p(x) = Σ_s Σ_{b,b'∈s} a_b conj(a_b') ⟨x|β_b⟩ conj⟨x|β_b'⟩ Π ⟨β'|β⟩`, where
/// `s` runs over basis strings and the product runs over the other active
/// probes.
#[derive(Debug, Clone)]
pub struct OutcomeDensity {
    probe: ProbeMode,
    terms: Vec<DensityTerm>,
    mixture: Option<Vec<(f64, f64)>>,
}

pub fn outcome_density(state: &HybridState, probe_index: usize) -> Result<OutcomeDensity> {
    let probe = state.probe(probe_index)?;
    let others: Vec<(usize, ProbeMode)> = state
        .probes()
        .iter()
        .copied()
        .enumerate()
        .filter(|(i, _)| *i != probe_index)
        .collect();

    let mut groups: BTreeMap<PolBasis, Vec<(&BranchKey, C64)>> = BTreeMap::new();
    for (k, a) in state.entries() {
        groups.entry(k.basis).or_default().push((k, *a));
    }

    let mut coefs: BTreeMap<(i32, i32), C64> = BTreeMap::new();
    let mut single_label = true;
    for group in groups.values() {
        let k0 = group[0].0.phases[probe_index];
        single_label &= group.iter().all(|(k, _)| k.phases[probe_index] == k0);
        for (kb, ab) in group {
            for (kc, ac) in group {
                let mut coef = ab * ac.conj();
                for (p, other) in &others {
                    coef *= other.label_overlap(kc.phases[*p], kb.phases[*p]);
                }
                *coefs
                    .entry((kb.phases[probe_index], kc.phases[probe_index]))
                    .or_insert(C64::new(0.0, 0.0)) += coef;
            }
        }
    }

    let terms: Vec<DensityTerm> = coefs
        .into_iter()
        .map(|((ket, bra), coef)| DensityTerm { coef, ket, bra })
        .collect();
    let mixture = single_label.then(|| {
        terms
            .iter()
            .filter(|t| t.ket == t.bra)
            .map(|t| (t.coef.re.max(0.0), 2.0 * probe.label(t.ket).re))
            .collect()
    });
    Ok(OutcomeDensity {
        probe,
        terms,
        mixture,
    })
}

/// Sampler choice for a given state; see [`SamplingStrategy`].
pub fn sampling_strategy(state: &HybridState, probe_index: usize) -> Result<SamplingStrategy> {
    Ok(outcome_density(state, probe_index)?.strategy())
}

impl OutcomeDensity {
    pub fn probe(&self) -> &ProbeMode {
        &self.probe
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p: f64 = self
            .terms
            .iter()
            .map(|t| {
                let lk = kernel_log(x, self.probe.label(t.ket));
                let lb = kernel_log(x, self.probe.label(t.bra));
                (t.coef * (lk + lb.conj()).exp()).re
            })
            .sum();
        (p * KERNEL_PREFACTOR * KERNEL_PREFACTOR).max(0.0)
    }

    pub fn strategy(&self) -> SamplingStrategy {
        if self.mixture.is_some() {
            SamplingStrategy::ExactMixture
        } else {
            SamplingStrategy::GridInverseCdf
        }
    }

    /// `(weight, mean)` of each Gaussian component, if the density is a pure
    /// mixture.
    pub fn mixture_components(&self) -> Option<&[(f64, f64)]> {
        self.mixture.as_deref()
    }

    /// Smallest and largest peak position `2 Re β` among the labels present.
    pub fn peak_range(&self) -> (f64, f64) {
        self.terms
            .iter()
            .flat_map(|t| [t.ket, t.bra])
            .map(|k| 2.0 * self.probe.label(k).re)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m), hi.max(m)))
    }

    pub fn sampler(&self, strategy: SamplingStrategy) -> Result<QuadratureSampler> {
        match strategy {
            SamplingStrategy::ExactMixture => {
                let Some(components) = &self.mixture else {
                    return contract("exact-mixture sampling needs one probe label per basis string");
                };
                let mut cumulative = Vec::with_capacity(components.len());
                let mut total = 0.0;
                for (w, _) in components {
                    total += w;
                    cumulative.push(total);
                }
                if !(total > 0.0) {
                    return contract("outcome density has zero total weight");
                }
                Ok(QuadratureSampler::Mixture {
                    cumulative,
                    means: components.iter().map(|(_, m)| *m).collect(),
                })
            }
            SamplingStrategy::GridInverseCdf => {
                let (lo, hi) = self.peak_range();
                let (lo, hi) = (lo - GRID_MARGIN, hi + GRID_MARGIN);
                let n = (((hi - lo) / GRID_SPACING).ceil() as usize + 1).clamp(MIN_GRID_POINTS, MAX_GRID_POINTS);
                let dx = (hi - lo) / (n - 1) as f64;
                let xs: Vec<f64> = (0..n).map(|i| lo + dx * i as f64).collect();
                let ps: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
                let mut cdf = Vec::with_capacity(n);
                let mut acc = 0.0;
                cdf.push(0.0);
                for w in ps.windows(2) {
                    acc += 0.5 * (w[0] + w[1]) * dx;
                    cdf.push(acc);
                }
                if !(acc > 0.0) {
                    return contract("outcome density has zero total weight on the grid");
                }
                for c in &mut cdf {
                    *c /= acc;
                }
                Ok(QuadratureSampler::Grid { xs, cdf })
            }
        }
    }
}

/// Draws quadrature outcomes from a fixed [`OutcomeDensity`].
#[derive(Debug, Clone)]
pub enum QuadratureSampler {
    Mixture { cumulative: Vec<f64>, means: Vec<f64> },
    Grid { xs: Vec<f64>, cdf: Vec<f64> },
}

impl QuadratureSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            QuadratureSampler::Mixture { cumulative, means } => {
                let total = *cumulative.last().expect("non-empty mixture");
                let u = rng.random::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c <= u).min(means.len() - 1);
                let z: f64 = rng.sample(StandardNormal);
                means[idx] + z
            }
            QuadratureSampler::Grid { xs, cdf } => {
                let u = rng.random::<f64>();
                let i = cdf.partition_point(|&c| c <= u).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[i - 1], cdf[i]);
                let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                xs[i - 1] + t * (xs[i] - xs[i - 1])
            }
        }
    }
}

/// Multiplies each branch by `⟨x|β_b⟩` of probe `probe_index` and drops the
/// probe. Not normalized: its squared norm is `p(x)`.
pub fn kernel_weighted(state: &HybridState, probe_index: usize, x: f64) -> Result<HybridState> {
    weight_by_kernel(state, probe_index, x, false)
}

fn weight_by_kernel(state: &HybridState, probe_index: usize, x: f64, rescale: bool) -> Result<HybridState> {
    let probe = state.probe(probe_index)?;
    let logs: Vec<C64> = state
        .entries()
        .map(|(k, _)| kernel_log(x, probe.label(k.phases[probe_index])))
        .collect();
    // Rescaling by the largest kernel keeps far-tail outcomes from
    // underflowing; the factor is removed again by normalization.
    let shift = if rescale {
        logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    } else {
        -KERNEL_PREFACTOR.ln()
    };
    let mut out = state.empty_without_probe(probe_index);
    for ((k, a), l) in state.entries().zip(logs) {
        let mut key = k.clone();
        key.phases.remove(probe_index);
        out.insert(key, a * (l - shift).exp());
    }
    Ok(out)
}

/// Conditions the state on quadrature outcome `x` of probe `probe_index`.
pub fn collapse_at(state: &HybridState, probe_index: usize, x: f64) -> Result<(HomodyneRecord, HybridState)> {
    let probe = state.probe(probe_index)?;
    let collapsed = weight_by_kernel(state, probe_index, x, true)?.normalized()?.pruned();
    Ok((HomodyneRecord::classify(x, &probe), collapsed))
}

/// Samples a quadrature outcome from `source` and collapses on it.
pub fn sample_and_collapse(
    state: &HybridState,
    probe_index: usize,
    source: &mut impl OutcomeSource,
) -> Result<(HomodyneRecord, HybridState)> {
    let density = outcome_density(state, probe_index)?;
    let x = source.homodyne(&density)?;
    collapse_at(state, probe_index, x)
}

/// Keeps only branches with polarization `p` on `qubit` (not normalized).
pub fn project_polarization(state: &HybridState, qubit: usize, p: Polarization) -> Result<HybridState> {
    state.check_qubit(qubit)?;
    let mut out = state.empty_like();
    for (k, a) in state.entries() {
        if k.basis.get(qubit) == p {
            out.insert(k.clone(), *a);
        }
    }
    Ok(out)
}

/// Born-rule probability of finding the photon of `qubit` in H.
pub fn photon_probability_h(state: &HybridState, qubit: usize) -> Result<f64> {
    let h = project_polarization(state, qubit, Polarization::H)?.norm_sqr();
    let v = project_polarization(state, qubit, Polarization::V)?.norm_sqr();
    if !(h + v > 0.0) {
        return contract("photon measurement on a zero state");
    }
    Ok(h / (h + v))
}

/// Nondestructive {H, V} measurement: the photon stays in the register,
/// collapsed onto the observed rail.
pub fn qnd_photon_measure(
    state: &HybridState,
    qubit: usize,
    source: &mut impl OutcomeSource,
) -> Result<(Polarization, HybridState)> {
    let p_h = photon_probability_h(state, qubit)?;
    let outcome = source.photon(qubit, p_h)?;
    let collapsed = project_polarization(state, qubit, outcome)?.normalized()?.pruned();
    Ok((outcome, collapsed))
}

/// Supplies measurement outcomes: Born-rule sampling or a forced script.
pub trait OutcomeSource {
    fn homodyne(&mut self, density: &OutcomeDensity) -> Result<f64>;
    fn photon(&mut self, qubit: usize, prob_h: f64) -> Result<Polarization>;
}

impl<S: OutcomeSource + ?Sized> OutcomeSource for &mut S {
    fn homodyne(&mut self, density: &OutcomeDensity) -> Result<f64> {
        (**self).homodyne(density)
    }

    fn photon(&mut self, qubit: usize, prob_h: f64) -> Result<Polarization> {
        (**self).photon(qubit, prob_h)
    }
}

/// Draws every outcome from its exact Born-rule distribution.
#[derive(Debug, Clone)]
pub struct BornRule<R> {
    rng: R,
    strategy: Option<SamplingStrategy>,
}

impl<R: Rng> BornRule<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, strategy: None }
    }

    /// Forces a quadrature sampler instead of the automatic choice.
    pub fn with_strategy(mut self, strategy: SamplingStrategy) -> Self {
        self.strategy = Some(strategy);
        self
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

impl BornRule<ChaCha8Rng> {
    pub fn seeded(seed: u64) -> Self {
        Self::new(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent stream `shot` derived from `seed`.
    pub fn for_shot(seed: u64, shot: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot);
        Self::new(rng)
    }
}

impl<R: Rng> OutcomeSource for BornRule<R> {
    fn homodyne(&mut self, density: &OutcomeDensity) -> Result<f64> {
        let strategy = self.strategy.unwrap_or_else(|| density.strategy());
        Ok(density.sampler(strategy)?.sample(&mut self.rng))
    }

    fn photon(&mut self, _qubit: usize, prob_h: f64) -> Result<Polarization> {
        Ok(if self.rng.random::<f64>() < prob_h {
            Polarization::H
        } else {
            Polarization::V
        })
    }
}

/// A scripted outcome for [`ForcedOutcomes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forced {
    Quadrature(f64),
    /// The quadrature value at the centre of that parity's peak.
    ParityPeak(Parity),
    Photon(Polarization),
}

/// Replays a fixed measurement record, in order.
#[derive(Debug, Clone, Default)]
pub struct ForcedOutcomes {
    script: VecDeque<Forced>,
}

impl ForcedOutcomes {
    pub fn new(script: impl IntoIterator<Item = Forced>) -> Self {
        Self {
            script: script.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.script.len()
    }
}

impl OutcomeSource for ForcedOutcomes {
    fn homodyne(&mut self, density: &OutcomeDensity) -> Result<f64> {
        match self.script.pop_front() {
            Some(Forced::Quadrature(x)) => Ok(x),
            Some(Forced::ParityPeak(p)) => Ok(parity_peak(density.probe(), p)),
            Some(other) => contract(format!("forced script expected a quadrature outcome, found {other:?}")),
            None => contract("forced script exhausted"),
        }
    }

    fn photon(&mut self, qubit: usize, prob_h: f64) -> Result<Polarization> {
        match self.script.pop_front() {
            Some(Forced::Photon(p)) => {
                let prob = match p {
                    Polarization::H => prob_h,
                    Polarization::V => 1.0 - prob_h,
                };
                if prob < 1e-15 {
                    return contract(format!("forced photon outcome {p} on qubit {qubit} has probability {prob}"));
                }
                Ok(p)
            }
            Some(other) => contract(format!("forced script expected a photon outcome, found {other:?}")),
            None => contract("forced script exhausted"),
        }
    }
}
