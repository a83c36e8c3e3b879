//! Exact syndrome-extraction cycles for the d=3 code.
//!
//! A cycle is a plaquette (Z) round followed by a site (X) round. In each
//! round the `d(d-1)` ancillas start in |0⟩, couple to their supports through
//! imperfect CNOTs (site rounds are sandwiched by `H_a`), and are read out
//! together. The decoder's correction is applied right after each round.
//!
//! Two interchangeable kernels evaluate a round:
//!
//! - [`RoundKernel::Circuit`] runs the literal gate sequence on the
//!   `n + d(d-1)` qubit register and measures the ancilla block.
//! - [`RoundKernel::Projected`] uses that consecutive Hadamards cancel: a
//!   plaquette round is diagonal on the data, `φ_j(x) = (-e^{-iπκ})^{|x ∧ S_j|}`,
//!   and outcome `s_j` applies `(1 + (-1)^{s_j} φ_j)/2`; a site round is the
//!   same in the Hadamard-transformed data basis. It never builds the
//!   ancilla register.

use std::collections::HashMap;

use itertools::Itertools;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{usage, Error, Result};
use crate::exec::{self, Execution};
use crate::pauli_algebra::{self, BitMask, PauliString, PauliSum};
use crate::statevector::{Gate, Outcome, StateVector, MIN_BRANCH_PROBABILITY};
use crate::surface_code::{build_layout, logical_operator, prepare_logical_zero, Basis, PrepMode, SurfaceLayout};

/// Ancilla outcomes of one round; bit `j` set means ancilla `j` read −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Syndrome {
    bits: u64,
    len: usize,
}

impl Syndrome {
    pub fn trivial(len: usize) -> Self {
        Self { bits: 0, len }
    }

    pub fn from_bits(bits: u64, len: usize) -> Result<Self> {
        if len > 64 || (len < 64 && bits >> len != 0) {
            return Err(usage(format!("syndrome bits {bits:#b} do not fit {len} ancillas")));
        }
        Ok(Self { bits, len })
    }

    /// Syndrome with the listed ancilla indices reading −1.
    pub fn from_minus(indices: &[usize], len: usize) -> Result<Self> {
        let mut bits = 0u64;
        for &j in indices {
            if j >= len {
                return Err(usage(format!("ancilla index {j} out of range for {len}")));
            }
            bits |= 1 << j;
        }
        Ok(Self { bits, len })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_trivial(&self) -> bool {
        self.bits == 0
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        (0..self.len).map(|j| Outcome::from_bit((self.bits >> j) as usize)).collect()
    }

    pub fn signs(&self) -> Vec<i8> {
        self.outcomes().iter().map(|o| o.sign()).collect()
    }

    pub fn minus_indices(&self) -> Vec<usize> {
        (0..self.len).filter(|j| self.bits >> j & 1 == 1).collect()
    }

    fn as_mask(&self) -> BitMask {
        BitMask::from_indices(self.minus_indices())
    }
}

/// How one round's ancilla readout is resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundMode {
    /// Born sampling with a one-shot seed.
    Sample {
        seed: u64,
    },
    PostselectTrivial,
    Postselect(Syndrome),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum RoundKernel {
    Circuit,
    #[default]
    Projected,
}

#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub state: StateVector,
    pub syndrome: Syndrome,
    pub probability: f64,
}

/// Gate sequence of one round on the data + round-ancilla register. Data
/// qubit `q` is bit `q-1`; ancilla `j` is bit `n + j`.
pub fn round_circuit(layout: &SurfaceLayout, basis: Basis, kappa: f64) -> Vec<Gate> {
    let n = layout.n();
    let mut gates = Vec::new();
    for s in layout.stabilizers(basis) {
        let a = n + s.index;
        match basis {
            Basis::Z => {
                for &q in &s.support {
                    gates.push(Gate::CnotImperfect { control: q - 1, target: a, kappa });
                }
            }
            Basis::X => {
                gates.push(Gate::H(a));
                for &q in &s.support {
                    gates.push(Gate::CnotImperfect { control: a, target: q - 1, kappa });
                }
                gates.push(Gate::H(a));
            }
        }
    }
    gates
}

fn check_round_input(state: &StateVector, layout: &SurfaceLayout, kappa: f64) -> Result<()> {
    crate::surface_code::check_data_state(layout, state)?;
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(usage(format!("κ must be finite and nonnegative, got {kappa}")));
    }
    if layout.round_ancillas() > 20 {
        return Err(Error::Capacity(format!(
            "{} ancillas per round; exact rounds support d=3",
            layout.round_ancillas()
        )));
    }
    Ok(())
}

struct Projector {
    masks: Vec<usize>,
    powers: [Complex64; 5],
}

impl Projector {
    fn new(layout: &SurfaceLayout, basis: Basis, kappa: f64) -> Self {
        let masks =
            layout.stabilizers(basis).iter().map(|s| s.support.iter().map(|q| 1usize << (q - 1)).sum()).collect();
        let p = -Complex64::from_polar(1.0, -std::f64::consts::PI * kappa);
        let mut powers = [Complex64::new(1.0, 0.0); 5];
        for k in 1..5 {
            powers[k] = powers[k - 1] * p;
        }
        Self { masks, powers }
    }

    fn phi(&self, j: usize, x: usize) -> Complex64 {
        self.powers[(x & self.masks[j]).count_ones() as usize]
    }
}

fn transformed(state: &StateVector, basis: Basis) -> StateVector {
    let mut s = state.clone();
    if basis == Basis::X {
        s.hadamard_all();
    }
    s
}

/// Born probabilities of every outcome pattern of one round.
pub fn branch_probabilities(
    state: &StateVector,
    layout: &SurfaceLayout,
    basis: Basis,
    kappa: f64,
    kernel: RoundKernel,
) -> Result<Vec<f64>> {
    check_round_input(state, layout, kappa)?;
    match kernel {
        RoundKernel::Circuit => {
            let mut ext = state.extend_zero(layout.round_ancillas())?;
            ext.apply_gates(&round_circuit(layout, basis, kappa))?;
            ext.high_marginals(layout.n())
        }
        RoundKernel::Projected => {
            let proj = Projector::new(layout, basis, kappa);
            let t = transformed(state, basis);
            let na = layout.round_ancillas();
            let mut probs = vec![0.0; 1 << na];
            let mut buckets = vec![0.0; 1 << na];
            for (x, a) in t.amplitudes().iter().enumerate() {
                let w = a.norm_sqr();
                if w == 0.0 {
                    continue;
                }
                buckets[0] = w;
                for j in 0..na {
                    let phi = proj.phi(j, x);
                    let g0 = (Complex64::new(1.0, 0.0) + phi).norm_sqr() / 4.0;
                    let g1 = (Complex64::new(1.0, 0.0) - phi).norm_sqr() / 4.0;
                    let half = 1 << j;
                    for s in 0..half {
                        let v = buckets[s];
                        buckets[s] = v * g0;
                        buckets[s + half] = v * g1;
                    }
                }
                for (p, b) in probs.iter_mut().zip(&buckets) {
                    *p += b;
                }
            }
            Ok(probs)
        }
    }
}

fn project(
    state: &StateVector,
    layout: &SurfaceLayout,
    basis: Basis,
    kappa: f64,
    kernel: RoundKernel,
    pattern: usize,
) -> Result<(StateVector, f64)> {
    match kernel {
        RoundKernel::Circuit => {
            let mut ext = state.extend_zero(layout.round_ancillas())?;
            ext.apply_gates(&round_circuit(layout, basis, kappa))?;
            ext.project_high(layout.n(), pattern)
        }
        RoundKernel::Projected => {
            let proj = Projector::new(layout, basis, kappa);
            let mut t = transformed(state, basis);
            let na = layout.round_ancillas();
            let half = Complex64::new(0.5, 0.0);
            for (x, a) in t.amplitudes_mut().iter_mut().enumerate() {
                let mut f = Complex64::new(1.0, 0.0);
                for j in 0..na {
                    let phi = proj.phi(j, x);
                    f *= if pattern >> j & 1 == 0 { half + half * phi } else { half - half * phi };
                }
                *a *= f;
            }
            if basis == Basis::X {
                t.hadamard_all();
            }
            let p = t.norm().powi(2);
            if p <= MIN_BRANCH_PROBABILITY {
                return Err(Error::InfeasibleBranch(format!("round pattern {pattern:#b} has probability {p:e}")));
            }
            let exec = t.execution();
            let s = 1.0 / p.sqrt();
            let amps = t.amplitudes().iter().map(|a| a * s).collect();
            Ok((StateVector::from_raw(layout.n(), amps, exec), p))
        }
    }
}

fn sample_pattern(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = i;
        acc += p;
        if target < acc {
            return i;
        }
    }
    last
}

/// One imperfect stabilizer round on a data-only state.
pub fn run_round(
    state: &StateVector,
    layout: &SurfaceLayout,
    basis: Basis,
    kappa: f64,
    mode: RoundMode,
    kernel: RoundKernel,
) -> Result<RoundOutput> {
    check_round_input(state, layout, kappa)?;
    let na = layout.round_ancillas();
    let pattern = match mode {
        RoundMode::Sample { seed } => {
            let probs = branch_probabilities(state, layout, basis, kappa, kernel)?;
            let u: f64 = ChaCha8Rng::seed_from_u64(seed).gen();
            sample_pattern(&probs, u)
        }
        RoundMode::PostselectTrivial => 0,
        RoundMode::Postselect(s) => {
            if s.len() != na {
                return Err(usage(format!("pattern has {} entries, round has {na} ancillas", s.len())));
            }
            s.bits() as usize
        }
    };
    let (state, probability) = project(state, layout, basis, kappa, kernel, pattern)?;
    Ok(RoundOutput { state, syndrome: Syndrome::from_bits(pattern as u64, na)?, probability })
}

/// Minimum-weight lookup decoder for one stabilizer basis.
///
/// Candidate errors are enumerated by weight, then lexicographically by
/// qubit ids; the first error producing a syndrome is kept.
#[derive(Debug, Clone)]
pub struct LookupDecoder {
    basis: Basis,
    ancillas: usize,
    table: HashMap<u64, Vec<usize>>,
}

/// Largest per-round ancilla count the lookup table accepts.
pub const MAX_DECODER_ANCILLAS: usize = 12;

impl LookupDecoder {
    pub fn new(layout: &SurfaceLayout, basis: Basis) -> Result<Self> {
        let na = layout.round_ancillas();
        if na > MAX_DECODER_ANCILLAS {
            return Err(Error::Capacity(format!(
                "lookup decoder supports at most {MAX_DECODER_ANCILLAS} ancillas per round, d={} has {na}",
                layout.d()
            )));
        }
        let columns: Vec<u64> = (1..=layout.n())
            .map(|q| layout.stabilizers(basis).iter().filter(|s| s.support.contains(&q)).map(|s| 1u64 << s.index).sum())
            .collect();
        let want = 1usize << na;
        let mut table = HashMap::with_capacity(want);
        'outer: for w in 0..=layout.n() {
            for combo in (1..=layout.n()).combinations(w) {
                let syn = combo.iter().fold(0u64, |acc, &q| acc ^ columns[q - 1]);
                table.entry(syn).or_insert(combo);
                if table.len() == want {
                    break 'outer;
                }
            }
        }
        Ok(Self { basis, ancillas: na, table })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Correction string: X-type for plaquette syndromes, Z-type for sites.
    pub fn decode(&self, syndrome: &Syndrome) -> Result<PauliString> {
        if syndrome.len() != self.ancillas {
            return Err(usage("syndrome length does not match the decoder"));
        }
        let qs = self
            .table
            .get(&syndrome.bits())
            .ok_or_else(|| Error::Degenerate(format!("syndrome {:#b} has no consistent error", syndrome.bits())))?;
        Ok(match self.basis {
            Basis::Z => PauliString::xs(qs.iter().copied()),
            Basis::X => PauliString::zs(qs.iter().copied()),
        })
    }
}

pub fn decode(layout: &SurfaceLayout, basis: Basis, syndrome: &Syndrome) -> Result<PauliString> {
    LookupDecoder::new(layout, basis)?.decode(syndrome)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementMode {
    Sample {
        seed: Option<u64>,
    },
    PostselectTrivial,
    /// One pattern per round, Z and X rounds alternating.
    Postselect(Vec<Syndrome>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LogicalState {
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Decoder {
    #[default]
    LookupMinWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleConfig {
    pub d: usize,
    pub kappa: f64,
    pub cycles: usize,
    pub measurement: MeasurementMode,
    /// Data-qubit error applied to the initial codeword.
    pub injected_error: PauliString,
    pub initial: LogicalState,
    pub decoder: Decoder,
    pub record_fidelity: bool,
    pub kernel: RoundKernel,
}

impl CycleConfig {
    pub fn new(kappa: f64, cycles: usize, measurement: MeasurementMode) -> Self {
        Self {
            d: 3,
            kappa,
            cycles,
            measurement,
            injected_error: PauliString::identity(),
            initial: LogicalState::Zero,
            decoder: Decoder::LookupMinWeight,
            record_fidelity: true,
            kernel: RoundKernel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != 3 {
            return Err(Error::Capacity(format!(
                "exact cycles are limited to d=3 (got d={}); use the worst-case analytics for larger codes",
                self.d
            )));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(usage(format!("κ must be finite and nonnegative, got {}", self.kappa)));
        }
        if self.cycles == 0 {
            return Err(usage("at least one cycle is required"));
        }
        if !self.injected_error.anc_x.is_empty() {
            return Err(usage("injected error must act on data qubits only"));
        }
        let n = self.d * self.d + (self.d - 1) * (self.d - 1);
        if self.injected_error.max_data_qubit().is_some_and(|q| q > n)
            || self.injected_error.data_x.contains(0)
            || self.injected_error.data_z.contains(0)
        {
            return Err(usage(format!("injected error {} is outside data qubits 1..={n}", self.injected_error)));
        }
        match &self.measurement {
            MeasurementMode::Sample { seed: None } => return Err(Error::MissingSeed),
            MeasurementMode::Postselect(list) if list.len() < 2 * self.cycles => {
                return Err(usage(format!("{} patterns given, {} rounds needed", list.len(), 2 * self.cycles)))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub basis: Basis,
    pub outcomes: Vec<i8>,
    pub probability: f64,
    /// Qubits receiving the correction (X after plaquette rounds, Z after sites).
    pub correction: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub z_round: RoundRecord,
    pub x_round: RoundRecord,
    pub fidelity: Option<f64>,
}

/// Coset of the final state relative to the initial codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LogicalClass {
    I,
    XL,
    ZL,
    XLZL,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub seed: Option<u64>,
    pub cycles: Vec<CycleRecord>,
    pub probability: f64,
    pub final_fidelity: f64,
    pub logical_class: LogicalClass,
    pub logical_error: bool,
    #[serde(skip)]
    pub final_state: StateVector,
}

struct Workspace {
    layout: SurfaceLayout,
    z_decoder: LookupDecoder,
    x_decoder: LookupDecoder,
    zero: StateVector,
    cosets: [PauliString; 4],
}

impl Workspace {
    fn new(d: usize) -> Result<Self> {
        let layout = build_layout(d)?;
        let (zero, _) = prepare_logical_zero(&layout, &PrepMode::Ideal)?;
        let xl = logical_operator(&layout, Basis::X);
        let zl = logical_operator(&layout, Basis::Z);
        let xz = xl.mul(&zl).1;
        Ok(Self {
            z_decoder: LookupDecoder::new(&layout, Basis::Z)?,
            x_decoder: LookupDecoder::new(&layout, Basis::X)?,
            layout,
            zero,
            cosets: [PauliString::identity(), xl, zl, xz],
        })
    }

    fn initial(&self, which: LogicalState) -> Result<StateVector> {
        match which {
            LogicalState::Zero => Ok(self.zero.clone()),
            LogicalState::One => self.zero.apply_pauli_string(&self.cosets[1], self.layout.n()),
        }
    }

    fn classify(&self, ideal: &StateVector, state: &StateVector) -> Result<(LogicalClass, bool)> {
        const CLASSES: [LogicalClass; 4] = [LogicalClass::I, LogicalClass::XL, LogicalClass::ZL, LogicalClass::XLZL];
        let mut best = 0;
        let mut best_val = -1.0;
        let mut images = Vec::with_capacity(4);
        for (k, l) in self.cosets.iter().enumerate() {
            let img = ideal.apply_pauli_string(l, self.layout.n())?;
            let v = img.fidelity(state)?;
            if v > best_val + 1e-12 {
                best = k;
                best_val = v;
            }
            images.push(img);
        }
        // A coset acting trivially on the initial codeword counts as no error.
        let trivial = ideal.fidelity(&images[best])? > 1.0 - 1e-9;
        Ok((CLASSES[best], !trivial))
    }
}

fn run_with_workspace(ws: &Workspace, config: &CycleConfig) -> Result<Trajectory> {
    config.validate()?;
    let n = ws.layout.n();
    let ideal = ws.initial(config.initial)?;
    let mut state = ideal.apply_pauli_string(&config.injected_error, n)?;
    let (seed, mut rng) = match config.measurement {
        MeasurementMode::Sample { seed: Some(s) } => (Some(s), Some(ChaCha8Rng::seed_from_u64(s))),
        _ => (None, None),
    };
    let mut records = Vec::with_capacity(config.cycles);
    let mut probability = 1.0;
    for cycle in 0..config.cycles {
        let mut rounds = Vec::with_capacity(2);
        for (r, basis) in [Basis::Z, Basis::X].into_iter().enumerate() {
            let mode = match (&config.measurement, rng.as_mut()) {
                (MeasurementMode::Sample { .. }, Some(rng)) => RoundMode::Sample { seed: rng.gen() },
                (MeasurementMode::Postselect(list), _) => RoundMode::Postselect(list[2 * cycle + r]),
                _ => RoundMode::PostselectTrivial,
            };
            let out = run_round(&state, &ws.layout, basis, config.kappa, mode, config.kernel)?;
            let decoder = if basis == Basis::Z { &ws.z_decoder } else { &ws.x_decoder };
            let fix = decoder.decode(&out.syndrome)?;
            state = out.state.apply_pauli_string(&fix, n)?;
            probability *= out.probability;
            let correction = match basis {
                Basis::Z => fix.data_x.ones().collect(),
                Basis::X => fix.data_z.ones().collect(),
            };
            rounds.push(RoundRecord {
                basis,
                outcomes: out.syndrome.signs(),
                probability: out.probability,
                correction,
            });
        }
        let fidelity = if config.record_fidelity { Some(ideal.fidelity(&state)?) } else { None };
        let x_round = rounds.pop().expect("two rounds");
        let z_round = rounds.pop().expect("two rounds");
        records.push(CycleRecord { cycle, z_round, x_round, fidelity });
    }
    let final_fidelity = ideal.fidelity(&state)?;
    let (logical_class, logical_error) = ws.classify(&ideal, &state)?;
    Ok(Trajectory {
        seed,
        cycles: records,
        probability,
        final_fidelity,
        logical_class,
        logical_error,
        final_state: state,
    })
}

pub fn run_qec_cycles(config: &CycleConfig) -> Result<Trajectory> {
    config.validate()?;
    let ws = Workspace::new(config.d)?;
    run_with_workspace(&ws, config)
}

/// Run `trials` trajectories. In sample mode trial `t` uses seed `base + t`.
pub fn run_trials(config: &CycleConfig, trials: usize, exec: Execution) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let ws = Workspace::new(config.d)?;
    let configs: Vec<CycleConfig> = (0..trials as u64)
        .map(|t| {
            let mut c = config.clone();
            if let MeasurementMode::Sample { seed: Some(s) } = c.measurement {
                c.measurement = MeasurementMode::Sample { seed: Some(s.wrapping_add(t)) };
            }
            c
        })
        .collect();
    exec::map_collect(exec, &configs, |c| run_with_workspace(&ws, c)).into_iter().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PathologyReport {
    pub kappa: f64,
    /// Joint probability of the trivial plaquette round and the single
    /// flagged site ancilla.
    pub branch_probability: f64,
    pub flagged_ancilla: usize,
    pub correction: String,
    /// First-order residual operator on the data after correction,
    /// `(term, coefficient)` with coefficients in powers of πκ.
    pub symbolic_residual: Vec<(String, String)>,
    /// Weight of the exact corrected state on `P|0̄⟩` for listed `P`.
    pub exact_components: Vec<(String, f64)>,
    pub identity_weight: f64,
    pub unlisted_weight: f64,
}

/// Post-select a trivial plaquette round and a site round with only `a5`
/// flagged, apply the decoder's fix, and decompose what is left.
pub fn correction_pathology_demo(kappa: f64) -> Result<PathologyReport> {
    let layout = build_layout(3)?;
    let na = layout.round_ancillas();
    let flagged =
        layout.sites().iter().find(|s| s.ancilla == 5).map(|s| s.index).ok_or_else(|| usage("site a5 missing"))?;
    let pattern = Syndrome::from_minus(&[flagged], na)?;
    let (zero, _) = prepare_logical_zero(&layout, &PrepMode::Ideal)?;
    let z = run_round(&zero, &layout, Basis::Z, kappa, RoundMode::PostselectTrivial, RoundKernel::default())?;
    let x = run_round(&z.state, &layout, Basis::X, kappa, RoundMode::Postselect(pattern), RoundKernel::default())?;
    let fix = decode(&layout, Basis::X, &pattern)?;
    let state = x.state.apply_pauli_string(&fix, layout.n())?;

    // Same branch at first order in the operator picture.
    let start = PauliSum::identity(layout.n(), 0, 1);
    let after_z = pauli_algebra::propagate_round(&start, &layout, Basis::Z, 1)?;
    let after_x = pauli_algebra::propagate_round(&pauli_algebra::trivial_branch(&after_z), &layout, Basis::X, 1)?;
    let groups = pauli_algebra::group_by_ancilla_config(&after_x);
    let branch = groups.get(&pattern.as_mask()).cloned().unwrap_or_else(|| PauliSum::zero(layout.n(), na, 1));
    let mut fix_op = PauliSum::zero(layout.n(), na, 1);
    fix_op.add_term(fix.clone(), pauli_algebra::KappaPoly::one())?;
    let residual = fix_op.multiply(&branch)?;
    let symbolic_residual = residual.terms().map(|(p, c)| (p.data_part().to_string(), c.to_string())).collect();

    let labels = ["I", "Z3", "Y3", "Z3X5", "Z3X8", "X3", "X5", "X8"];
    let mut exact_components = Vec::new();
    for l in labels {
        let p = PauliString::parse(l)?;
        let img = zero.apply_pauli_string(&p, layout.n())?;
        exact_components.push((l.to_string(), img.inner(&state)?.norm_sqr()));
    }
    let identity_weight = exact_components[0].1;
    let unlisted_weight = (1.0 - exact_components.iter().map(|(_, w)| w).sum::<f64>()).max(0.0);
    Ok(PathologyReport {
        kappa,
        branch_probability: z.probability * x.probability,
        flagged_ancilla: 5,
        correction: fix.to_string(),
        symbolic_residual,
        exact_components,
        identity_weight,
        unlisted_weight,
    })
}
