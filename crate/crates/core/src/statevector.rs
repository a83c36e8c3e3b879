//! Dense statevector simulation of small registers.
//!
//! Qubit `q` is bit `q` of the basis index (bit 0 least significant). Gate
//! matrices returned by [`Gate::matrix`] use the textbook ordering instead:
//! the first listed qubit is the most significant local bit, so the CNOT
//! matrix reads as usual.
//!
//! Two-qubit imperfection follows the controlled-phase model: the ideal CZ is
//! followed by `Φ^κ = diag(1, 1, 1, e^{-iπκ})`, and an imperfect CNOT is
//! `H_t · Φ^κ · CZ · H_t`. Single-qubit gates are ideal.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::exec::{self, Execution};
use crate::pauli_algebra::{PauliString, PauliSum};

/// Largest register the dense simulator will allocate.
pub const MAX_QUBITS: usize = 21;

/// Tolerance on the unit norm after public operations.
pub const NORM_TOL: f64 = 1e-10;

/// Smallest branch probability accepted by post-selection.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-14;

// Registers below this size are never split across threads.
const PARALLEL_MIN_QUBITS: usize = 14;

pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Ancilla readout. `Plus` is the +1 eigenvalue, i.e. the qubit in |0⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn from_bit(bit: usize) -> Self {
        if bit & 1 == 0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn bit(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Z(usize),
    /// `diag(1, e^{iθ})`.
    Phase {
        qubit: usize,
        angle: f64,
    },
    /// Arbitrary single-qubit unitary.
    Unitary {
        qubit: usize,
        matrix: Matrix2,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Cz(usize, usize),
    /// `diag(1, 1, 1, e^{-iπκ})`.
    CzKappa {
        a: usize,
        b: usize,
        kappa: f64,
    },
    /// `H_t · CZ_κ · CZ · H_t`.
    CnotImperfect {
        control: usize,
        target: usize,
        kappa: f64,
    },
    /// Single-qubit unitary on `target` conditioned on `control` = |1⟩.
    Controlled {
        control: usize,
        target: usize,
        matrix: Matrix2,
    },
}

pub fn hadamard() -> Matrix2 {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

/// Phase picked up by |11⟩ under `CZ_κ · CZ`.
fn imperfect_cz_phase(kappa: f64) -> Complex64 {
    -Complex64::from_polar(1.0, -PI * kappa)
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Z(q) => vec![q],
            Gate::Phase { qubit, .. } | Gate::Unitary { qubit, .. } => vec![qubit],
            Gate::Cnot { control, target }
            | Gate::CnotImperfect { control, target, .. }
            | Gate::Controlled { control, target, .. } => vec![control, target],
            Gate::Cz(a, b) | Gate::CzKappa { a, b, .. } => vec![a, b],
        }
    }

    fn single_matrix(&self) -> Option<Matrix2> {
        Some(match *self {
            Gate::H(_) => hadamard(),
            Gate::X(_) => [[ZERO, ONE], [ONE, ZERO]],
            Gate::Z(_) => [[ONE, ZERO], [ZERO, -ONE]],
            Gate::Phase { angle, .. } => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, angle)]],
            Gate::Unitary { matrix, .. } => matrix,
            _ => return None,
        })
    }

    /// Dense matrix in local ordering (first listed qubit most significant).
    pub fn matrix(&self) -> Vec<Vec<Complex64>> {
        if let Some(m) = self.single_matrix() {
            return m.iter().map(|r| r.to_vec()).collect();
        }
        let mut m = vec![vec![ZERO; 4]; 4];
        match self {
            Gate::Cnot { .. } => {
                m[0][0] = ONE;
                m[1][1] = ONE;
                m[2][3] = ONE;
                m[3][2] = ONE;
            }
            Gate::Cz(..) => {
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = if i == 3 { -ONE } else { ONE };
                }
            }
            Gate::CzKappa { kappa, .. } => {
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = if i == 3 { Complex64::from_polar(1.0, -PI * kappa) } else { ONE };
                }
            }
            Gate::CnotImperfect { kappa, .. } => {
                // Control block |1⟩: H · diag(1, p) · H with p = -e^{-iπκ}.
                let p = imperfect_cz_phase(*kappa);
                m[0][0] = ONE;
                m[1][1] = ONE;
                m[2][2] = (ONE + p) * 0.5;
                m[2][3] = (ONE - p) * 0.5;
                m[3][2] = (ONE - p) * 0.5;
                m[3][3] = (ONE + p) * 0.5;
            }
            Gate::Controlled { matrix, .. } => {
                m[0][0] = ONE;
                m[1][1] = ONE;
                for r in 0..2 {
                    for c in 0..2 {
                        m[2 + r][2 + c] = matrix[r][c];
                    }
                }
            }
            _ => unreachable!(),
        }
        m
    }
}

/// Unnormalized amplitudes, e.g. the image of a state under a non-unitary operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitudes {
    pub num_qubits: usize,
    pub values: Vec<Complex64>,
}

impl Amplitudes {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Amplitudes) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn into_state(self) -> Result<StateVector> {
        StateVector::from_amplitudes(self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub outcome: Outcome,
    pub probability: f64,
}

pub enum MeasureMode<'a> {
    Sample(&'a mut dyn RngCore),
    Postselect(Outcome),
}

#[derive(Debug, Clone)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
    exec: Execution,
}

impl PartialEq for StateVector {
    fn eq(&self, other: &Self) -> bool {
        self.num_qubits == other.num_qubits && self.amps == other.amps
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::Capacity(format!("{n} qubits requested, dense simulation is capped at {MAX_QUBITS}")));
    }
    Ok(())
}

impl StateVector {
    /// |0…0⟩ on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_size(n)?;
        if index >> n != 0 {
            return Err(usage(format!("basis index {index} out of range for {n} qubits")));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = ONE;
        Ok(Self { num_qubits: n, amps, exec: Execution::default() })
    }

    /// Normalizes the given amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(usage(format!("amplitude count {} is not a power of two", amps.len())));
        }
        let n = amps.len().trailing_zeros() as usize;
        check_size(n)?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::Degenerate("cannot normalize a zero or non-finite vector".into()));
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(Self { num_qubits: n, amps, exec: Execution::default() })
    }

    /// A random normalized state; not Haar distributed, used for testing.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        check_size(n)?;
        let amps =
            (0..1usize << n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        Self::from_amplitudes(amps)
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn kernel_exec(&self) -> Execution {
        if self.num_qubits >= PARALLEL_MIN_QUBITS {
            self.exec
        } else {
            Execution::Sequential
        }
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(usage(format!("qubit {q} out of range for {} qubits", self.num_qubits)));
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let qs = gate.qubits();
        for &q in &qs {
            self.check_qubit(q)?;
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(usage(format!("gate {gate:?} uses qubit {} twice", qs[0])));
        }
        if let Some(m) = gate.single_matrix() {
            self.apply_single(qs[0], &m);
            return Ok(());
        }
        match *gate {
            Gate::Cnot { control, target } => self.apply_controlled(control, target, &[[ZERO, ONE], [ONE, ZERO]]),
            Gate::Cz(a, b) => self.apply_pair_phase(a, b, -ONE),
            Gate::CzKappa { a, b, kappa } => self.apply_pair_phase(a, b, Complex64::from_polar(1.0, -PI * kappa)),
            Gate::CnotImperfect { control, target, kappa } => {
                let h = hadamard();
                self.apply_single(target, &h);
                self.apply_pair_phase(control, target, imperfect_cz_phase(kappa));
                self.apply_single(target, &h);
            }
            Gate::Controlled { control, target, ref matrix } => self.apply_controlled(control, target, matrix),
            _ => unreachable!(),
        }
        Ok(())
    }

    pub fn apply_gates<'g>(&mut self, gates: impl IntoIterator<Item = &'g Gate>) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    fn apply_single(&mut self, q: usize, m: &Matrix2) {
        let stride = 1usize << q;
        let m = *m;
        exec::for_each_chunk_mut(self.kernel_exec(), &mut self.amps, (2 * stride).max(1 << 12), |_, c| {
            for base in (0..c.len()).step_by(2 * stride) {
                for i in base..base + stride {
                    let (a0, a1) = (c[i], c[i + stride]);
                    c[i] = m[0][0] * a0 + m[0][1] * a1;
                    c[i + stride] = m[1][0] * a0 + m[1][1] * a1;
                }
            }
        });
    }

    /// Multiply amplitudes with both bits set by `phase`.
    fn apply_pair_phase(&mut self, a: usize, b: usize, phase: Complex64) {
        let mask = (1usize << a) | (1usize << b);
        let chunk = 1 << 12;
        exec::for_each_chunk_mut(self.kernel_exec(), &mut self.amps, chunk, |ci, c| {
            let off = ci * chunk;
            for (i, x) in c.iter_mut().enumerate() {
                if (off + i) & mask == mask {
                    *x *= phase;
                }
            }
        });
    }

    fn apply_controlled(&mut self, control: usize, target: usize, m: &Matrix2) {
        let stride = 1usize << target;
        let cbit = 1usize << control;
        let chunk = (2 * stride).max(1 << 12);
        let m = *m;
        exec::for_each_chunk_mut(self.kernel_exec(), &mut self.amps, chunk, |ci, c| {
            let off = ci * chunk;
            for base in (0..c.len()).step_by(2 * stride) {
                for i in base..base + stride {
                    if (off + i) & cbit == 0 {
                        continue;
                    }
                    let (a0, a1) = (c[i], c[i + stride]);
                    c[i] = m[0][0] * a0 + m[0][1] * a1;
                    c[i + stride] = m[1][0] * a0 + m[1][1] * a1;
                }
            }
        });
    }

    /// Born probability of reading `Minus` on `qubit`.
    pub fn probability_minus(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        let amps = &self.amps;
        Ok(exec::blocked_sum(self.kernel_exec(), amps.len(), 1 << 12, |i| {
            if i & bit != 0 {
                amps[i].norm_sqr()
            } else {
                0.0
            }
        }))
    }

    /// Projective Z measurement of one qubit; the state collapses in place.
    pub fn measure_qubit(&mut self, qubit: usize, mode: MeasureMode<'_>) -> Result<Measurement> {
        let p1 = self.probability_minus(qubit)?.clamp(0.0, 1.0);
        let outcome = match mode {
            MeasureMode::Sample(rng) => {
                if rng.gen::<f64>() < p1 {
                    Outcome::Minus
                } else {
                    Outcome::Plus
                }
            }
            MeasureMode::Postselect(o) => o,
        };
        let probability = match outcome {
            Outcome::Plus => 1.0 - p1,
            Outcome::Minus => p1,
        };
        if probability <= MIN_BRANCH_PROBABILITY {
            return Err(Error::InfeasibleBranch(format!(
                "outcome {} on qubit {qubit} has probability {probability:e}",
                outcome.sign()
            )));
        }
        let bit = 1usize << qubit;
        let keep = outcome.bit() * bit;
        let scale = 1.0 / probability.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit == keep {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        Ok(Measurement { outcome, probability })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(usage(format!("register sizes differ: {} vs {}", self.num_qubits, other.num_qubits)));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm().min(1.0))
    }

    /// Append `extra` qubits in |0⟩ as the most significant bits.
    pub fn extend_zero(&self, extra: usize) -> Result<StateVector> {
        let n = self.num_qubits + extra;
        check_size(n)?;
        let mut amps = vec![ZERO; 1 << n];
        amps[..self.amps.len()].copy_from_slice(&self.amps);
        Ok(StateVector { num_qubits: n, amps, exec: self.exec })
    }

    /// Joint distribution of the qubits above the lowest `low`, indexed by their pattern.
    pub fn high_marginals(&self, low: usize) -> Result<Vec<f64>> {
        if low > self.num_qubits {
            return Err(usage("split point beyond register"));
        }
        let block = 1usize << low;
        Ok(self.amps.chunks(block).map(|c| c.iter().map(|a| a.norm_sqr()).sum()).collect())
    }

    /// Project the high qubits onto `pattern`, discard them, and renormalize.
    /// Returns the reduced state and the branch probability.
    pub fn project_high(&self, low: usize, pattern: usize) -> Result<(StateVector, f64)> {
        if low > self.num_qubits || pattern >> (self.num_qubits - low) != 0 {
            return Err(usage(format!("pattern {pattern} does not fit the high register")));
        }
        let block = 1usize << low;
        let slice = &self.amps[pattern * block..(pattern + 1) * block];
        let p: f64 = slice.iter().map(|a| a.norm_sqr()).sum();
        if p <= MIN_BRANCH_PROBABILITY {
            return Err(Error::InfeasibleBranch(format!("high pattern {pattern:#b} has probability {p:e}")));
        }
        let s = 1.0 / p.sqrt();
        let amps = slice.iter().map(|a| a * s).collect();
        Ok((StateVector { num_qubits: low, amps, exec: self.exec }, p))
    }

    /// Apply a Pauli string given as register bitmasks, scaled by `coeff`,
    /// accumulating into `out`. Convention: `σ(x, z) = i^{x·z} X^x Z^z` per qubit.
    fn accumulate_pauli(&self, x: usize, z: usize, coeff: Complex64, out: &mut [Complex64]) {
        let y_phase = match (x & z).count_ones() % 4 {
            0 => ONE,
            1 => Complex64::new(0.0, 1.0),
            2 => -ONE,
            _ => Complex64::new(0.0, -1.0),
        };
        let c = coeff * y_phase;
        for (b, a) in self.amps.iter().enumerate() {
            let v = if (z & b).count_ones() % 2 == 1 { -c * a } else { c * a };
            out[b ^ x] += v;
        }
    }

    fn register_masks(&self, p: &PauliString, data_qubits: usize) -> Result<(usize, usize)> {
        let mut x = 0usize;
        let mut z = 0usize;
        for q in p.data_x.ones() {
            let bit = q.checked_sub(1).ok_or_else(|| usage("data qubit ids start at 1"))?;
            if bit >= data_qubits {
                return Err(usage(format!("data qubit {q} outside the {data_qubits}-qubit data register")));
            }
            x |= 1 << bit;
        }
        for q in p.data_z.ones() {
            let bit = q.checked_sub(1).ok_or_else(|| usage("data qubit ids start at 1"))?;
            if bit >= data_qubits {
                return Err(usage(format!("data qubit {q} outside the {data_qubits}-qubit data register")));
            }
            z |= 1 << bit;
        }
        for j in p.anc_x.ones() {
            let bit = data_qubits + j;
            self.check_qubit(bit)?;
            x |= 1 << bit;
        }
        if (x | z) >> self.num_qubits != 0 {
            return Err(usage("Pauli string exceeds the register"));
        }
        Ok((x, z))
    }

    /// Action of `op` evaluated at κ. Data qubit `q` maps to bit `q-1`,
    /// ancilla `j` of the sum's ancilla register to bit `data_qubits + j`
    /// where `data_qubits` is the sum's data register size.
    pub fn apply_pauli_sum(&self, op: &PauliSum, kappa: f64) -> Result<Amplitudes> {
        if !kappa.is_finite() {
            return Err(usage("κ must be finite"));
        }
        let nd = op.data_qubits();
        if nd + op.ancillas() > self.num_qubits {
            return Err(usage(format!(
                "operator needs {} qubits, register has {}",
                nd + op.ancillas(),
                self.num_qubits
            )));
        }
        let mut out = vec![ZERO; self.amps.len()];
        for (p, poly) in op.terms() {
            let c = poly.eval(kappa);
            if c == ZERO {
                continue;
            }
            let (x, z) = self.register_masks(p, nd)?;
            self.accumulate_pauli(x, z, c, &mut out);
        }
        Ok(Amplitudes { num_qubits: self.num_qubits, values: out })
    }

    /// Apply a single Pauli string (unit coefficient); the result is a normalized state.
    pub fn apply_pauli_string(&self, p: &PauliString, data_qubits: usize) -> Result<StateVector> {
        let (x, z) = self.register_masks(p, data_qubits)?;
        let mut out = vec![ZERO; self.amps.len()];
        self.accumulate_pauli(x, z, ONE, &mut out);
        Ok(StateVector { num_qubits: self.num_qubits, amps: out, exec: self.exec })
    }

    /// `⟨self|op|self⟩` at κ.
    pub fn expectation(&self, op: &PauliSum, kappa: f64) -> Result<Complex64> {
        let image = self.apply_pauli_sum(op, kappa)?;
        Ok(self.amps.iter().zip(&image.values).map(|(a, b)| a.conj() * b).sum())
    }

    /// In-place Hadamard on every qubit.
    pub fn hadamard_all(&mut self) {
        let n = self.amps.len();
        let s = FRAC_1_SQRT_2;
        let mut h = 1;
        while h < n {
            for base in (0..n).step_by(2 * h) {
                for i in base..base + h {
                    let (a, b) = (self.amps[i], self.amps[i + h]);
                    self.amps[i] = (a + b) * s;
                    self.amps[i + h] = (a - b) * s;
                }
            }
            h *= 2;
        }
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub(crate) fn from_raw(num_qubits: usize, amps: Vec<Complex64>, exec: Execution) -> Self {
        debug_assert_eq!(amps.len(), 1 << num_qubits);
        StateVector { num_qubits, amps, exec }
    }

    pub(crate) fn execution(&self) -> Execution {
        self.exec
    }
}
