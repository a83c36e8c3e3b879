//! Planar surface-code geometry.
//!
//! The patch lives on a `(2d-1) × (2d-1)` grid. Data qubits sit at `(r, c)`
//! with `r + c` even and are numbered `1..=n` row-major, so rows alternate
//! between `d` and `d-1` qubits. Every other grid point is a stabilizer
//! center: plaquettes (Z-type) at even rows, sites (X-type) at odd rows, each
//! coupled to its up/down/left/right data neighbors. Ancilla labels `a1, a2,
//! …` follow the row-major order of the centers, which for `d = 3` reproduces
//! the usual 13-qubit picture with `X_L = X1X2X3` and `Z_L = Z1Z6Z11`.

use serde::Serialize;

use crate::error::{usage, Error, Result};
use crate::pauli_algebra::{BitMask, PauliString};
use crate::qec_cycle::{self, RoundKernel, RoundMode};
use crate::statevector::{Outcome, StateVector, MAX_QUBITS};

/// Stabilizer type measured in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
pub enum Basis {
    /// Plaquettes: products of Z, detect X errors.
    Z,
    /// Sites: products of X, detect Z errors.
    X,
}

impl Basis {
    pub fn other(self) -> Basis {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::Z => "z",
            Basis::X => "x",
        }
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z" | "plaquette" => Ok(Basis::Z),
            "x" | "site" => Ok(Basis::X),
            _ => Err(usage(format!("unknown basis {s:?}; expected z or x"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stabilizer {
    /// Lattice-wide label (the `j` in `a_j`).
    pub ancilla: usize,
    /// Position within its round's ancilla register.
    pub index: usize,
    pub basis: Basis,
    /// Data-qubit ids, ascending.
    pub support: Vec<usize>,
    #[serde(skip)]
    pub mask: BitMask,
}

impl Stabilizer {
    pub fn weight(&self) -> usize {
        self.support.len()
    }

    pub fn pauli(&self) -> PauliString {
        match self.basis {
            Basis::Z => PauliString::zs(self.support.iter().copied()),
            Basis::X => PauliString::xs(self.support.iter().copied()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurfaceLayout {
    d: usize,
    n: usize,
    /// `(row, column)` of data qubit `q` at position `q - 1`.
    coords: Vec<(usize, usize)>,
    plaquettes: Vec<Stabilizer>,
    sites: Vec<Stabilizer>,
    logical_x: Vec<usize>,
    logical_z: Vec<usize>,
}

pub fn build_layout(d: usize) -> Result<SurfaceLayout> {
    if d < 3 || d.is_multiple_of(2) {
        return Err(usage(format!("code distance must be odd and at least 3, got {d}")));
    }
    let size = 2 * d - 1;
    let mut id = vec![vec![0usize; size]; size];
    let mut coords = Vec::new();
    for r in 0..size {
        for c in 0..size {
            if (r + c) % 2 == 0 {
                coords.push((r, c));
                id[r][c] = coords.len();
            }
        }
    }
    let mut plaquettes = Vec::new();
    let mut sites = Vec::new();
    let mut label = 0;
    for r in 0..size {
        for c in 0..size {
            if (r + c) % 2 == 0 {
                continue;
            }
            label += 1;
            let mut support = Vec::new();
            if r > 0 {
                support.push(id[r - 1][c]);
            }
            if c > 0 {
                support.push(id[r][c - 1]);
            }
            if c + 1 < size {
                support.push(id[r][c + 1]);
            }
            if r + 1 < size {
                support.push(id[r + 1][c]);
            }
            support.sort_unstable();
            let (basis, list) = if r % 2 == 0 { (Basis::Z, &mut plaquettes) } else { (Basis::X, &mut sites) };
            list.push(Stabilizer {
                ancilla: label,
                index: list.len(),
                basis,
                mask: BitMask::from_indices(support.iter().copied()),
                support,
            });
        }
    }
    let logical_x = (1..=d).collect();
    let logical_z = (0..d).map(|k| id[2 * k][0]).collect();
    Ok(SurfaceLayout { d, n: coords.len(), coords, plaquettes, sites, logical_x, logical_z })
}

impl SurfaceLayout {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ancillas per round, `d(d-1)`.
    pub fn round_ancillas(&self) -> usize {
        self.plaquettes.len()
    }

    pub fn coords(&self, q: usize) -> (usize, usize) {
        self.coords[q - 1]
    }

    pub fn plaquettes(&self) -> &[Stabilizer] {
        &self.plaquettes
    }

    pub fn sites(&self) -> &[Stabilizer] {
        &self.sites
    }

    pub fn stabilizers(&self, basis: Basis) -> &[Stabilizer] {
        match basis {
            Basis::Z => &self.plaquettes,
            Basis::X => &self.sites,
        }
    }

    pub fn logical_support(&self, basis: Basis) -> &[usize] {
        match basis {
            Basis::X => &self.logical_x,
            Basis::Z => &self.logical_z,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("layout serializes")
    }
}

pub fn logical_operator(layout: &SurfaceLayout, basis: Basis) -> PauliString {
    let s = layout.logical_support(basis).iter().copied();
    match basis {
        Basis::X => PauliString::xs(s),
        Basis::Z => PauliString::zs(s),
    }
}

pub fn apply_logical(layout: &SurfaceLayout, state: &StateVector, basis: Basis) -> Result<StateVector> {
    check_data_state(layout, state)?;
    state.apply_pauli_string(&logical_operator(layout, basis), layout.n())
}

pub(crate) fn check_data_state(layout: &SurfaceLayout, state: &StateVector) -> Result<()> {
    if state.num_qubits() != layout.n() {
        return Err(usage(format!("state has {} qubits, layout has {} data qubits", state.num_qubits(), layout.n())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QubitClassification {
    pub basis: Basis,
    /// In one weight-3 stabilizer only.
    pub single_weight3: Vec<usize>,
    /// In one weight-4 stabilizer only.
    pub single_weight4: Vec<usize>,
    /// Shared by two weight-3 stabilizers.
    pub two_weight3: Vec<usize>,
    /// Shared by one weight-3 and one weight-4 stabilizer.
    pub mixed: Vec<usize>,
    /// Shared by two weight-4 stabilizers.
    pub two_weight4: Vec<usize>,
}

impl QubitClassification {
    pub fn sizes(&self) -> [usize; 5] {
        [
            self.single_weight3.len(),
            self.single_weight4.len(),
            self.two_weight3.len(),
            self.mixed.len(),
            self.two_weight4.len(),
        ]
    }

    /// Qubits in exactly one stabilizer of the round.
    pub fn n1(&self) -> usize {
        self.single_weight3.len() + self.single_weight4.len()
    }

    /// Qubits in two stabilizers of the round.
    pub fn n2(&self) -> usize {
        self.two_weight3.len() + self.mixed.len() + self.two_weight4.len()
    }
}

pub fn classify_data_qubits(layout: &SurfaceLayout, basis: Basis) -> QubitClassification {
    let mut w3 = vec![0usize; layout.n() + 1];
    let mut w4 = vec![0usize; layout.n() + 1];
    for s in layout.stabilizers(basis) {
        let counts = if s.weight() == 3 { &mut w3 } else { &mut w4 };
        for &q in &s.support {
            counts[q] += 1;
        }
    }
    let mut out = QubitClassification {
        basis,
        single_weight3: vec![],
        single_weight4: vec![],
        two_weight3: vec![],
        mixed: vec![],
        two_weight4: vec![],
    };
    for q in 1..=layout.n() {
        let group = match (w3[q], w4[q]) {
            (1, 0) => &mut out.single_weight3,
            (0, 1) => &mut out.single_weight4,
            (2, 0) => &mut out.two_weight3,
            (1, 1) => &mut out.mixed,
            (0, 2) => &mut out.two_weight4,
            other => unreachable!("qubit {q} has membership {other:?}"),
        };
        group.push(q);
    }
    out
}

/// Preparation procedure for |0̄⟩.
#[derive(Debug, Clone, PartialEq)]
pub enum PrepMode {
    Ideal,
    /// One imperfect site round from |0…0⟩, then a Z-chain fix.
    Imperfect {
        kappa: f64,
        mode: RoundMode,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepRecord {
    pub outcomes: Vec<Outcome>,
    pub probability: f64,
    /// Data qubits that received a Z fix.
    pub fix: Vec<usize>,
}

/// `Π_s (1 + A_s) |0…0⟩ / norm` exactly, or the imperfect procedure.
pub fn prepare_logical_zero(layout: &SurfaceLayout, mode: &PrepMode) -> Result<(StateVector, Option<PrepRecord>)> {
    if layout.n() > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "|0̄⟩ at d={} needs {} dense qubits (cap {MAX_QUBITS})",
            layout.d(),
            layout.n()
        )));
    }
    match mode {
        PrepMode::Ideal => Ok((ideal_zero(layout)?, None)),
        PrepMode::Imperfect { kappa, mode } => {
            let start = StateVector::zero(layout.n())?;
            let round = qec_cycle::run_round(&start, layout, Basis::X, *kappa, mode.clone(), RoundKernel::default())?;
            let decoder = qec_cycle::LookupDecoder::new(layout, Basis::X)?;
            let fix = decoder.decode(&round.syndrome)?;
            let state = round.state.apply_pauli_string(&fix, layout.n())?;
            let record = PrepRecord {
                outcomes: round.syndrome.outcomes(),
                probability: round.probability,
                fix: fix.data_z.ones().collect(),
            };
            Ok((state, Some(record)))
        }
    }
}

fn ideal_zero(layout: &SurfaceLayout) -> Result<StateVector> {
    // Π (1+A_s)|0⟩ is a uniform superposition over the span of site X-masks.
    let masks: Vec<usize> = layout.sites().iter().map(|s| s.support.iter().map(|q| 1usize << (q - 1)).sum()).collect();
    let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 1 << layout.n()];
    let scale = (0.5f64).powi(masks.len() as i32).sqrt();
    for subset in 0usize..1 << masks.len() {
        let idx = masks.iter().enumerate().filter(|(j, _)| subset >> j & 1 == 1).fold(0, |acc, (_, m)| acc ^ m);
        amps[idx] += scale;
    }
    StateVector::from_amplitudes(amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn supports(stabs: &[Stabilizer]) -> Vec<(usize, Vec<usize>)> {
        stabs.iter().map(|s| (s.ancilla, s.support.clone())).collect()
    }

    #[test]
    fn d3_matches_reference_numbering() {
        let l = build_layout(3).unwrap();
        assert_eq!(l.n(), 13);
        assert_eq!(
            supports(l.plaquettes()),
            vec![
                (1, vec![1, 2, 4]),
                (2, vec![2, 3, 5]),
                (6, vec![4, 6, 7, 9]),
                (7, vec![5, 7, 8, 10]),
                (11, vec![9, 11, 12]),
                (12, vec![10, 12, 13]),
            ]
        );
        assert_eq!(
            supports(l.sites()),
            vec![
                (3, vec![1, 4, 6]),
                (4, vec![2, 4, 5, 7]),
                (5, vec![3, 5, 8]),
                (8, vec![6, 9, 11]),
                (9, vec![7, 9, 10, 12]),
                (10, vec![8, 10, 13]),
            ]
        );
        assert_eq!(l.logical_support(Basis::X), &[1, 2, 3]);
        assert_eq!(l.logical_support(Basis::Z), &[1, 6, 11]);
    }

    #[test]
    fn counts_and_commutation() {
        for d in [3, 5, 7, 9, 11] {
            let l = build_layout(d).unwrap();
            assert_eq!(l.n(), d * d + (d - 1) * (d - 1));
            for basis in [Basis::Z, Basis::X] {
                let st = l.stabilizers(basis);
                assert_eq!(st.len(), d * (d - 1));
                assert_eq!(st.iter().filter(|s| s.weight() == 3).count(), 2 * (d - 1));
                assert_eq!(st.iter().filter(|s| s.weight() == 4).count(), (d - 1) * (d - 2));
                for s in st.iter().filter(|s| s.weight() == 3) {
                    assert!(s.support.iter().any(|&q| {
                        let (r, c) = l.coords(q);
                        r == 0 || c == 0 || r == 2 * d - 2 || c == 2 * d - 2
                    }));
                }
            }
            let all: Vec<PauliString> = l.plaquettes().iter().chain(l.sites()).map(|s| s.pauli()).collect();
            for a in &all {
                for b in &all {
                    assert!(a.commutes_with(b));
                }
            }
            let xl = logical_operator(&l, Basis::X);
            let zl = logical_operator(&l, Basis::Z);
            assert!(!xl.commutes_with(&zl));
            assert!(all.iter().all(|s| s.commutes_with(&xl) && s.commutes_with(&zl)));
            assert_eq!(xl.weight() as usize, d);
            assert_eq!(zl.weight() as usize, d);
        }
    }

    #[test]
    fn classification_sizes() {
        for d in [3usize, 5, 7, 9] {
            let l = build_layout(d).unwrap();
            for basis in [Basis::Z, Basis::X] {
                let c = classify_data_qubits(&l, basis);
                let want = [4, 2 * (d - 2), 2 * (d - 2), 2 * (d - 1), (d - 2) * (d - 2) + (d - 3) * (d - 1)];
                assert_eq!(c.sizes(), want, "d={d} {basis:?}");
                assert_eq!(c.n1(), 2 * d);
                assert_eq!(c.n2(), 2 * d * d - 4 * d + 1);
            }
        }
        let c = classify_data_qubits(&build_layout(3).unwrap(), Basis::Z);
        assert_eq!(c.single_weight3, vec![1, 3, 11, 13]);
        assert_eq!(c.two_weight4, vec![7]);
    }

    #[test]
    fn rejects_bad_distance() {
        assert!(build_layout(4).is_err());
        assert!(build_layout(1).is_err());
    }

    #[test]
    fn ideal_zero_is_code_state() {
        let l = build_layout(3).unwrap();
        let (z, _) = prepare_logical_zero(&l, &PrepMode::Ideal).unwrap();
        assert!((z.norm() - 1.0).abs() < 1e-12);
        for s in l.plaquettes().iter().chain(l.sites()) {
            let img = z.apply_pauli_string(&s.pauli(), l.n()).unwrap();
            assert!((z.inner(&img).unwrap().re - 1.0).abs() < 1e-10);
        }
        let zl = apply_logical(&l, &z, Basis::Z).unwrap();
        assert!((z.inner(&zl).unwrap().re - 1.0).abs() < 1e-10);
        let one = apply_logical(&l, &z, Basis::X).unwrap();
        let one_z = apply_logical(&l, &one, Basis::Z).unwrap();
        assert!((one.inner(&one_z).unwrap().re + 1.0).abs() < 1e-10);
        assert!(z.inner(&one).unwrap().norm() < 1e-12);
        assert!(matches!(prepare_logical_zero(&build_layout(5).unwrap(), &PrepMode::Ideal), Err(Error::Capacity(_))));
    }
}
