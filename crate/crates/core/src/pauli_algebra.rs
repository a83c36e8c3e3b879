//! Pauli sums with exact κ-polynomial coefficients.
//!
//! Every κ in the deviation operators comes with a factor π, so a
//! [`KappaPoly`] stores exact complex rationals `c_j` of the powers
//! `(πκ)^j`. The first-order weight-4 plaquette deviation, for example, has an
//! identity coefficient `1 - i·(πκ)`, stored as `[1, -i]`.
//!
//! A [`PauliString`] is a product over data qubits of `σ(x, z)` with
//! `σ(1, 0) = X`, `σ(0, 1) = Z`, `σ(1, 1) = Y`, times an X-type ancilla part.
//! Phases from multiplication are folded into the coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg};

use num_complex::{Complex, Complex64};
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::surface_code::{Basis, SurfaceLayout};

pub type Rational = Ratio<i64>;
pub type Coef = Complex<Rational>;

pub const DEFAULT_CAP: usize = 2;

pub fn rat(n: i64, d: i64) -> Rational {
    Ratio::new(n, d)
}

pub fn real(n: i64, d: i64) -> Coef {
    Complex::new(rat(n, d), Rational::zero())
}

pub fn imag(n: i64, d: i64) -> Coef {
    Complex::new(Rational::zero(), rat(n, d))
}

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn coef_to_c64(c: &Coef) -> Complex64 {
    Complex64::new(to_f64(&c.re), to_f64(&c.im))
}

fn i_power(k: u32) -> Coef {
    match k % 4 {
        0 => real(1, 1),
        1 => imag(1, 1),
        2 => real(-1, 1),
        _ => imag(-1, 1),
    }
}

/// Growable bit set with a canonical (trailing-zero-free) representation.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitMask(Vec<u64>);

impl BitMask {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(idx: I) -> Self {
        let mut m = Self::new();
        for i in idx {
            m.toggle(i);
        }
        m
    }

    fn trim(&mut self) {
        while self.0.last() == Some(&0) {
            self.0.pop();
        }
    }

    pub fn toggle(&mut self, i: usize) {
        let w = i / 64;
        if self.0.len() <= w {
            self.0.resize(w + 1, 0);
        }
        self.0[w] ^= 1 << (i % 64);
        self.trim();
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    pub fn xor(&self, other: &BitMask) -> BitMask {
        let (long, short) = if self.0.len() >= other.0.len() { (self, other) } else { (other, self) };
        let mut v = long.0.clone();
        for (a, b) in v.iter_mut().zip(&short.0) {
            *a ^= b;
        }
        let mut m = BitMask(v);
        m.trim();
        m
    }

    /// Size of the intersection.
    pub fn overlap(&self, other: &BitMask) -> u32 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a & b).count_ones()).sum()
    }

    pub fn and(&self, other: &BitMask) -> BitMask {
        let mut m = BitMask(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect());
        m.trim();
        m
    }

    pub fn highest(&self) -> Option<usize> {
        self.0.last().map(|w| (self.0.len() - 1) * 64 + 63 - w.leading_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

/// Polynomial in `(πκ)` with exact complex-rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KappaPoly {
    coeffs: Vec<Coef>,
}

impl KappaPoly {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Coef) -> Self {
        Self::monomial(c, 0)
    }

    pub fn one() -> Self {
        Self::constant(Coef::one())
    }

    pub fn monomial(c: Coef, degree: usize) -> Self {
        let mut coeffs = vec![Coef::zero(); degree + 1];
        coeffs[degree] = c;
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn from_coeffs(coeffs: Vec<Coef>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `(πκ)^j`.
    pub fn coeff(&self, j: usize) -> Coef {
        self.coeffs.get(j).cloned().unwrap_or_else(Coef::zero)
    }

    pub fn coeffs(&self) -> &[Coef] {
        &self.coeffs
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn lowest_degree(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut p = self.clone();
        p.coeffs.truncate(order + 1);
        p.trim();
        p
    }

    pub fn scale(&self, c: &Coef) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|x| x * c).collect())
    }

    /// Complex conjugate for real κ.
    pub fn conj(&self) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c.conj()).collect() }
    }

    pub fn mul_truncated(&self, other: &Self, order: usize) -> Self {
        let (Some(da), Some(db)) = (self.degree(), other.degree()) else {
            return Self::zero();
        };
        let top = (da + db).min(order);
        let mut out = vec![Coef::zero(); top + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() || i > top {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(top + 1 - i) {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        Self::from_coeffs(out)
    }

    /// Numerical value at κ.
    pub fn eval(&self, kappa: f64) -> Complex64 {
        let u = std::f64::consts::PI * kappa;
        self.coeffs.iter().rev().fold(Complex64::zero(), |acc, c| acc * u + coef_to_c64(c))
    }
}

impl Add for &KappaPoly {
    type Output = KappaPoly;
    fn add(self, rhs: &KappaPoly) -> KappaPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        KappaPoly::from_coeffs((0..n).map(|j| self.coeff(j) + rhs.coeff(j)).collect())
    }
}

impl Neg for &KappaPoly {
    type Output = KappaPoly;
    fn neg(self) -> KappaPoly {
        KappaPoly { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl Mul for &KappaPoly {
    type Output = KappaPoly;
    /// Untruncated product.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: &KappaPoly) -> KappaPoly {
        self.mul_truncated(rhs, self.coeffs.len() + rhs.coeffs.len())
    }
}

fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn fmt_coef(c: &Coef) -> String {
    match (c.re.is_zero(), c.im.is_zero()) {
        (true, true) => "0".into(),
        (false, true) => fmt_rational(&c.re),
        (true, false) => format!("{}i", fmt_rational(&c.im)),
        (false, false) => {
            let sign = if c.im < Rational::zero() { "-" } else { "+" };
            format!("({}{}{}i)", fmt_rational(&c.re), sign, fmt_rational(&c.im.abs()))
        }
    }
}

impl fmt::Display for KappaPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, c)| match j {
                0 => fmt_coef(c),
                1 => format!("{}·πκ", fmt_coef(c)),
                _ => format!("{}·(πκ)^{j}", fmt_coef(c)),
            })
            .collect();
        for (i, part) in parts.iter().enumerate() {
            match (i, part.strip_prefix('-')) {
                (0, _) => write!(f, "{part}")?,
                (_, Some(rest)) => write!(f, " - {rest}")?,
                (_, None) => write!(f, " + {part}")?,
            }
        }
        Ok(())
    }
}

/// Pauli string over data qubits (ids as given, 1-based for layouts) and
/// round ancillas (0-based index within the round).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    pub data_x: BitMask,
    pub data_z: BitMask,
    pub anc_x: BitMask,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn x(q: usize) -> Self {
        Self { data_x: BitMask::from_indices([q]), ..Self::default() }
    }

    pub fn z(q: usize) -> Self {
        Self { data_z: BitMask::from_indices([q]), ..Self::default() }
    }

    pub fn y(q: usize) -> Self {
        Self { data_x: BitMask::from_indices([q]), data_z: BitMask::from_indices([q]), ..Self::default() }
    }

    pub fn xs<I: IntoIterator<Item = usize>>(qs: I) -> Self {
        Self { data_x: BitMask::from_indices(qs), ..Self::default() }
    }

    pub fn zs<I: IntoIterator<Item = usize>>(qs: I) -> Self {
        Self { data_z: BitMask::from_indices(qs), ..Self::default() }
    }

    pub fn ancilla(j: usize) -> Self {
        Self { anc_x: BitMask::from_indices([j]), ..Self::default() }
    }

    pub fn is_identity(&self) -> bool {
        self.data_x.is_empty() && self.data_z.is_empty() && self.anc_x.is_empty()
    }

    pub fn data_part(&self) -> PauliString {
        Self { data_x: self.data_x.clone(), data_z: self.data_z.clone(), anc_x: BitMask::new() }
    }

    pub fn with_ancillas(&self, anc_x: BitMask) -> PauliString {
        Self { data_x: self.data_x.clone(), data_z: self.data_z.clone(), anc_x }
    }

    /// Number of data qubits acted on nontrivially.
    pub fn weight(&self) -> u32 {
        self.data_x.xor(&self.data_z).count() + self.data_x.overlap(&self.data_z)
    }

    /// `self · other = i^k · result`.
    pub fn mul(&self, other: &PauliString) -> (u32, PauliString) {
        let x = self.data_x.xor(&other.data_x);
        let z = self.data_z.xor(&other.data_z);
        let k = self.data_x.overlap(&self.data_z) as i64
            + other.data_x.overlap(&other.data_z) as i64
            + 2 * self.data_z.overlap(&other.data_x) as i64
            - x.overlap(&z) as i64;
        let prod = PauliString { data_x: x, data_z: z, anc_x: self.anc_x.xor(&other.anc_x) };
        (k.rem_euclid(4) as u32, prod)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        (self.data_x.overlap(&other.data_z) + self.data_z.overlap(&other.data_x)).is_multiple_of(2)
    }

    pub fn max_data_qubit(&self) -> Option<usize> {
        self.data_x.highest().max(self.data_z.highest())
    }

    /// Parse data-qubit labels such as `X7`, `Z3X5`, `Y2 Z4`, or `I`.
    pub fn parse(label: &str) -> Result<PauliString> {
        let s: String = label.chars().filter(|c| !c.is_whitespace() && *c != '*' && *c != '·').collect();
        if s.is_empty() || s == "I" {
            return Ok(PauliString::identity());
        }
        let mut out = PauliString::identity();
        let mut chars = s.chars().peekable();
        while let Some(op) = chars.next() {
            let mut digits = String::new();
            while let Some(c) = chars.peek().filter(|c| c.is_ascii_digit()) {
                digits.push(*c);
                chars.next();
            }
            let q: usize = digits.parse().map_err(|_| usage(format!("bad Pauli label {label:?}")))?;
            let single = match op.to_ascii_uppercase() {
                'X' => PauliString::x(q),
                'Y' => PauliString::y(q),
                'Z' => PauliString::z(q),
                _ => return Err(usage(format!("bad Pauli label {label:?}"))),
            };
            if out.data_x.contains(q) || out.data_z.contains(q) {
                return Err(usage(format!("qubit {q} repeated in {label:?}")));
            }
            out = out.mul(&single).1;
        }
        Ok(out)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut qs: Vec<usize> = self.data_x.ones().chain(self.data_z.ones()).collect();
        qs.sort_unstable();
        qs.dedup();
        let mut parts = Vec::new();
        for q in qs {
            let op = match (self.data_x.contains(q), self.data_z.contains(q)) {
                (true, true) => 'Y',
                (true, false) => 'X',
                _ => 'Z',
            };
            parts.push(format!("{op}{q}"));
        }
        for j in self.anc_x.ones() {
            parts.push(format!("Xa[{j}]"));
        }
        write!(f, "{}", parts.join(""))
    }
}

/// Linear combination of Pauli strings over a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    data_qubits: usize,
    ancillas: usize,
    cap: usize,
    terms: BTreeMap<PauliString, KappaPoly>,
}

impl PauliSum {
    pub fn zero(data_qubits: usize, ancillas: usize, cap: usize) -> Self {
        Self { data_qubits, ancillas, cap, terms: BTreeMap::new() }
    }

    pub fn identity(data_qubits: usize, ancillas: usize, cap: usize) -> Self {
        let mut s = Self::zero(data_qubits, ancillas, cap);
        s.terms.insert(PauliString::identity(), KappaPoly::one());
        s
    }

    pub fn data_qubits(&self) -> usize {
        self.data_qubits
    }

    pub fn ancillas(&self) -> usize {
        self.ancillas
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &KappaPoly)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, p: &PauliString) -> KappaPoly {
        self.terms.get(p).cloned().unwrap_or_default()
    }

    fn check_string(&self, p: &PauliString) -> Result<()> {
        if p.data_x.contains(0) || p.data_z.contains(0) {
            return Err(usage("data qubit ids start at 1"));
        }
        if p.max_data_qubit().is_some_and(|q| q > self.data_qubits) {
            return Err(usage(format!("string {p} exceeds {} data qubits", self.data_qubits)));
        }
        if p.anc_x.highest().is_some_and(|j| j >= self.ancillas) {
            return Err(usage(format!("string {p} exceeds {} ancillas", self.ancillas)));
        }
        Ok(())
    }

    /// Add `c·p`, truncating at the cap.
    pub fn add_term(&mut self, p: PauliString, c: KappaPoly) -> Result<()> {
        self.check_string(&p)?;
        self.accumulate(p, c.truncate(self.cap));
        Ok(())
    }

    fn accumulate(&mut self, p: PauliString, c: KappaPoly) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(p) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get() + &c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    fn check_compatible(&self, other: &PauliSum) -> Result<()> {
        if self.data_qubits != other.data_qubits || self.ancillas != other.ancillas {
            return Err(usage(format!(
                "register mismatch: ({}, {}) vs ({}, {})",
                self.data_qubits, self.ancillas, other.data_qubits, other.ancillas
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.cap = self.cap.min(other.cap);
        out.terms = out.terms.into_iter().map(|(p, c)| (p, c.truncate(out.cap))).collect();
        out.terms.retain(|_, c| !c.is_zero());
        for (p, c) in &other.terms {
            out.accumulate(p.clone(), c.truncate(out.cap));
        }
        Ok(out)
    }

    /// Product `self · other` truncated at the smaller cap.
    pub fn multiply(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_compatible(other)?;
        let cap = self.cap.min(other.cap);
        Ok(self.multiply_unchecked(other, cap))
    }

    fn multiply_unchecked(&self, other: &PauliSum, cap: usize) -> PauliSum {
        let mut out = PauliSum::zero(self.data_qubits, self.ancillas, cap);
        let low_b: Vec<(usize, &PauliString, &KappaPoly)> =
            other.terms.iter().map(|(p, c)| (c.lowest_degree().unwrap_or(0), p, c)).collect();
        for (pa, ca) in &self.terms {
            let la = ca.lowest_degree().unwrap_or(0);
            for &(lb, pb, cb) in &low_b {
                if la + lb > cap {
                    continue;
                }
                let (k, p) = pa.mul(pb);
                let c = ca.mul_truncated(cb, cap).scale(&i_power(k));
                out.accumulate(p, c);
            }
        }
        out
    }

    pub fn scale(&self, c: &KappaPoly) -> PauliSum {
        let mut out = PauliSum::zero(self.data_qubits, self.ancillas, self.cap);
        for (p, x) in &self.terms {
            out.accumulate(p.clone(), x.mul_truncated(c, self.cap));
        }
        out
    }

    /// Hermitian adjoint for real κ. Pauli strings are Hermitian, so only
    /// coefficients conjugate.
    pub fn dagger(&self) -> PauliSum {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.conj();
        }
        out
    }

    pub fn truncate(&self, order: usize) -> PauliSum {
        let mut out = PauliSum::zero(self.data_qubits, self.ancillas, order.min(self.cap));
        for (p, c) in &self.terms {
            out.accumulate(p.clone(), c.truncate(order));
        }
        out
    }

    /// Reinterpret the sum on a register with a different ancilla count.
    pub fn with_ancilla_register(&self, ancillas: usize) -> Result<PauliSum> {
        let mut out = PauliSum::zero(self.data_qubits, ancillas, self.cap);
        for (p, c) in &self.terms {
            out.check_string(p)?;
            out.terms.insert(p.clone(), c.clone());
        }
        Ok(out)
    }

    /// Numerical coefficients at κ, dropping those that vanish.
    pub fn evaluate(&self, kappa: f64) -> Vec<(PauliString, Complex64)> {
        self.terms.iter().map(|(p, c)| (p.clone(), c.eval(kappa))).filter(|(_, v)| *v != Complex64::zero()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(CanonicalSum::from(self)).expect("canonical form serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<PauliSum> {
        let c: CanonicalSum =
            serde_json::from_value(v.clone()).map_err(|e| usage(format!("bad PauliSum JSON: {e}")))?;
        c.try_into()
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(p, c)| format!("[{c}]·{p}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Serialize, Deserialize)]
struct CanonicalTerm {
    data_x: Vec<usize>,
    data_z: Vec<usize>,
    anc_x: Vec<usize>,
    /// `[re, im]` of the `(πκ)^j` coefficient, as reduced rationals.
    coeffs: Vec<[String; 2]>,
}

#[derive(Serialize, Deserialize)]
struct CanonicalSum {
    data_qubits: usize,
    ancillas: usize,
    cap: usize,
    basis: String,
    terms: Vec<CanonicalTerm>,
}

impl From<&PauliSum> for CanonicalSum {
    fn from(s: &PauliSum) -> Self {
        let terms = s
            .terms
            .iter()
            .map(|(p, c)| CanonicalTerm {
                data_x: p.data_x.ones().collect(),
                data_z: p.data_z.ones().collect(),
                anc_x: p.anc_x.ones().collect(),
                coeffs: c.coeffs().iter().map(|x| [fmt_rational(&x.re), fmt_rational(&x.im)]).collect(),
            })
            .collect();
        CanonicalSum {
            data_qubits: s.data_qubits,
            ancillas: s.ancillas,
            cap: s.cap,
            basis: "pi_kappa_powers".into(),
            terms,
        }
    }
}

impl TryFrom<CanonicalSum> for PauliSum {
    type Error = Error;
    fn try_from(c: CanonicalSum) -> Result<PauliSum> {
        let parse = |s: &str| s.parse::<Rational>().map_err(|e| usage(format!("bad rational {s:?}: {e}")));
        let mut out = PauliSum::zero(c.data_qubits, c.ancillas, c.cap);
        for t in c.terms {
            let p = PauliString {
                data_x: BitMask::from_indices(t.data_x),
                data_z: BitMask::from_indices(t.data_z),
                anc_x: BitMask::from_indices(t.anc_x),
            };
            let coeffs =
                t.coeffs.iter().map(|[re, im]| Ok(Complex::new(parse(re)?, parse(im)?))).collect::<Result<Vec<_>>>()?;
            out.add_term(p, KappaPoly::from_coeffs(coeffs))?;
        }
        Ok(out)
    }
}

/// First-order extra operator of one imperfect stabilizer measurement.
///
/// With `w` the weight and `P` the data Pauli of the stabilizer basis:
/// `[(1 - iπκw/4) I + (iπκ/4) Σ P_d] I_a + [(iπκw/4) I - (iπκ/4) Σ P_d] X_a`.
pub fn deviation_for_stabilizer(
    support: &[usize],
    ancilla: usize,
    basis: Basis,
    data_qubits: usize,
    ancillas: usize,
) -> Result<PauliSum> {
    let w = support.len() as i64;
    if !(3..=4).contains(&w) {
        return Err(usage(format!("stabilizer weight {w} unsupported; expected 3 or 4")));
    }
    let mut out = PauliSum::zero(data_qubits, ancillas, DEFAULT_CAP);
    let single = |q: usize| match basis {
        Basis::Z => PauliString::z(q),
        Basis::X => PauliString::x(q),
    };
    let xa = PauliString::ancilla(ancilla);
    let quarter = KappaPoly::monomial(imag(1, 4), 1);
    out.add_term(PauliString::identity(), KappaPoly::from_coeffs(vec![real(1, 1), imag(-w, 4)]))?;
    out.add_term(xa.clone(), KappaPoly::monomial(imag(w, 4), 1))?;
    for &q in support {
        out.add_term(single(q), quarter.clone())?;
        out.add_term(single(q).with_ancillas(xa.anc_x.clone()), -&quarter)?;
    }
    Ok(out)
}

/// Identity-branch amplitude `1 - k·c·iπκ` after `k` trivially projected
/// rounds, with `c = (2d²-3d+1)/2` from the stabilizer weights.
fn accumulated_identity(layout: &SurfaceLayout, basis: Basis, rounds: usize) -> KappaPoly {
    let weight: i64 = layout.stabilizers(basis).iter().map(|s| s.support.len() as i64).sum();
    KappaPoly::from_coeffs(vec![real(1, 1), imag(-(rounds as i64) * weight, 4)])
}

/// Product of all same-basis stabilizer deviations in lattice order,
/// truncated to `order`. For `k > 1` it carries the identity amplitude of the
/// `k-1` preceding trivially projected rounds, so the identity coefficient
/// reads `1 - k(2d²-3d+1)iπκ/2` at first order.
pub fn round_deviation(layout: &SurfaceLayout, basis: Basis, k: usize, order: usize) -> Result<PauliSum> {
    if k == 0 {
        return Err(usage("round index k starts at 1"));
    }
    let n = layout.n();
    let na = layout.round_ancillas();
    let mut acc = PauliSum::identity(n, na, order);
    for stab in layout.stabilizers(basis) {
        let dev = deviation_for_stabilizer(&stab.support, stab.index, basis, n, na)?;
        acc = acc.multiply_unchecked(&dev, order);
    }
    if k > 1 {
        acc = acc.scale(&accumulated_identity(layout, basis, k - 1));
    }
    Ok(acc)
}

/// Syndrome bitmask of a data Pauli under the stabilizers of `basis`.
pub fn syndrome_of(layout: &SurfaceLayout, basis: Basis, p: &PauliString) -> BitMask {
    let detected = match basis {
        Basis::Z => &p.data_x,
        Basis::X => &p.data_z,
    };
    BitMask::from_indices(
        layout.stabilizers(basis).iter().filter(|s| s.mask.overlap(detected) % 2 == 1).map(|s| s.index),
    )
}

/// One imperfect round acting on a data-only operator: each incoming term
/// picks up the ancilla flips of its ideal syndrome, then the round deviation
/// multiplies from the left.
pub fn propagate_round(incoming: &PauliSum, layout: &SurfaceLayout, basis: Basis, order: usize) -> Result<PauliSum> {
    if incoming.data_qubits() != layout.n() {
        return Err(usage("incoming operator does not match the layout"));
    }
    let na = layout.round_ancillas();
    let mut flagged = PauliSum::zero(layout.n(), na, order);
    for (p, c) in incoming.terms() {
        if !p.anc_x.is_empty() {
            return Err(usage("incoming operator must act on data qubits only"));
        }
        flagged.accumulate(p.with_ancillas(syndrome_of(layout, basis, p)), c.truncate(order));
    }
    let dev = round_deviation(layout, basis, 1, order)?;
    Ok(dev.multiply_unchecked(&flagged, order))
}

/// Partition by ancilla configuration.
pub fn group_by_ancilla_config(op: &PauliSum) -> BTreeMap<BitMask, PauliSum> {
    let mut groups: BTreeMap<BitMask, PauliSum> = BTreeMap::new();
    for (p, c) in op.terms() {
        groups
            .entry(p.anc_x.clone())
            .or_insert_with(|| PauliSum::zero(op.data_qubits, op.ancillas, op.cap))
            .terms
            .insert(p.clone(), c.clone());
    }
    groups
}

/// `Σ |c(κ)|²` over the group, truncated at `max_degree` in `(πκ)`.
pub fn config_weight(group: &PauliSum, max_degree: usize) -> KappaPoly {
    group.terms().fold(KappaPoly::zero(), |acc, (_, c)| &acc + &c.conj().mul_truncated(c, max_degree))
}

/// Data part of the trivial-configuration branch.
pub fn trivial_branch(op: &PauliSum) -> PauliSum {
    let mut out = PauliSum::zero(op.data_qubits, 0, op.cap);
    for (p, c) in op.terms() {
        if p.anc_x.is_empty() {
            out.terms.insert(p.clone(), c.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_code::build_layout;

    fn c1(p: &PauliSum, s: &PauliString) -> Coef {
        p.coefficient(s).coeff(1)
    }

    #[test]
    fn pauli_products() {
        let (k, p) = PauliString::x(1).mul(&PauliString::z(1));
        assert_eq!(p, PauliString::y(1));
        assert_eq!(i_power(k), imag(-1, 1));
        let (k, p) = PauliString::z(1).mul(&PauliString::x(1));
        assert_eq!((i_power(k), p), (imag(1, 1), PauliString::y(1)));
        let (k, p) = PauliString::y(2).mul(&PauliString::y(2));
        assert_eq!((k, p), (0, PauliString::identity()));
        let (k, p) = PauliString::x(3).mul(&PauliString::y(3));
        assert_eq!((i_power(k), p), (imag(1, 1), PauliString::z(3)));

        let mut a = PauliSum::zero(1, 0, 2);
        a.add_term(PauliString::x(1), KappaPoly::one()).unwrap();
        let mut b = PauliSum::zero(1, 0, 2);
        b.add_term(PauliString::z(1), KappaPoly::one()).unwrap();
        let ab = a.multiply(&b).unwrap();
        assert_eq!(ab.len(), 1);
        assert_eq!(ab.coefficient(&PauliString::y(1)), KappaPoly::constant(imag(-1, 1)));
    }

    #[test]
    fn truncated_expansion() {
        let mut a = PauliSum::identity(1, 0, 2);
        a.add_term(PauliString::z(1), KappaPoly::monomial(imag(1, 1), 1)).unwrap();
        let b = a.dagger();
        let ab = a.multiply(&b).unwrap();
        assert_eq!(ab.len(), 1);
        assert_eq!(
            ab.coefficient(&PauliString::identity()),
            KappaPoly::from_coeffs(vec![real(1, 1), Coef::zero(), real(1, 1)])
        );
        let mut x = PauliSum::zero(1, 0, 2);
        x.add_term(PauliString::x(1), KappaPoly::monomial(imag(1, 1), 1)).unwrap();
        assert_eq!(x.dagger().coefficient(&PauliString::x(1)), KappaPoly::monomial(imag(-1, 1), 1));
    }

    #[test]
    fn register_mismatch_is_usage_error() {
        let a = PauliSum::identity(3, 0, 2);
        let b = PauliSum::identity(4, 0, 2);
        assert!(matches!(a.multiply(&b), Err(Error::Usage(_))));
        assert!(matches!(a.add(&b), Err(Error::Usage(_))));
        let mut c = PauliSum::zero(3, 1, 2);
        assert!(c.add_term(PauliString::x(4), KappaPoly::one()).is_err());
        assert!(c.add_term(PauliString::ancilla(1), KappaPoly::one()).is_err());
    }

    #[test]
    fn single_stabilizer_deviation() {
        let d4 = deviation_for_stabilizer(&[4, 6, 7, 9], 0, Basis::Z, 13, 1).unwrap();
        assert_eq!(d4.coefficient(&PauliString::identity()), KappaPoly::from_coeffs(vec![real(1, 1), imag(-1, 1)]));
        assert_eq!(c1(&d4, &PauliString::z(6)), imag(1, 4));
        let d3 = deviation_for_stabilizer(&[1, 2, 4], 0, Basis::Z, 13, 1).unwrap();
        assert_eq!(d3.coefficient(&PauliString::identity()), KappaPoly::from_coeffs(vec![real(1, 1), imag(-3, 4)]));
        assert_eq!(c1(&d3, &PauliString::ancilla(0)), imag(3, 4));
        assert_eq!(c1(&d3, &PauliString::z(2).with_ancillas(BitMask::from_indices([0]))), imag(-1, 4));
        let dx = deviation_for_stabilizer(&[2, 4, 5, 7], 0, Basis::X, 13, 1).unwrap();
        assert_eq!(c1(&dx, &PauliString::ancilla(0)), imag(1, 1));
        assert_eq!(c1(&dx, &PauliString::x(5)), imag(1, 4));
        assert!(deviation_for_stabilizer(&[1, 2], 0, Basis::Z, 13, 1).is_err());
    }

    #[test]
    fn round_identity_coefficients() {
        for (d, basis, k, want) in [(3, Basis::Z, 1, 5), (5, Basis::Z, 1, 18), (7, Basis::X, 2, 78)] {
            let layout = build_layout(d).unwrap();
            let dev = round_deviation(&layout, basis, k, 1).unwrap();
            assert_eq!(
                dev.coefficient(&PauliString::identity()),
                KappaPoly::from_coeffs(vec![real(1, 1), imag(-want, 1)]),
                "d={d}"
            );
        }
    }

    #[test]
    fn kappa_zero_is_identity() {
        let layout = build_layout(3).unwrap();
        let dev = round_deviation(&layout, Basis::Z, 1, 1).unwrap();
        let ev = dev.evaluate(0.0);
        assert_eq!(ev.len(), 1);
        assert!(ev[0].0.is_identity());
        let groups = group_by_ancilla_config(&dev);
        let trivial = &groups[&BitMask::new()];
        assert_eq!(config_weight(trivial, 2).eval(0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn groups_partition_the_operator() {
        let layout = build_layout(3).unwrap();
        let dev = round_deviation(&layout, Basis::X, 1, 1).unwrap();
        let groups = group_by_ancilla_config(&dev);
        let total: usize = groups.values().map(|g| g.len()).sum();
        assert_eq!(total, dev.len());
        let mut merged = PauliSum::zero(dev.data_qubits(), dev.ancillas(), dev.cap());
        for g in groups.values() {
            merged = merged.add(g).unwrap();
        }
        assert_eq!(merged, dev);
    }

    #[test]
    fn json_roundtrip() {
        let layout = build_layout(3).unwrap();
        let dev = round_deviation(&layout, Basis::Z, 1, 1).unwrap();
        let back = PauliSum::from_json(&dev.to_json()).unwrap();
        assert_eq!(back, dev);
        let text = serde_json::to_string(&dev.to_json()).unwrap();
        assert!(text.contains("\"anc_x\""));
    }

    #[test]
    fn parse_labels() {
        assert_eq!(PauliString::parse("X7").unwrap(), PauliString::x(7));
        assert_eq!(PauliString::parse("Z3X5").unwrap(), PauliString::z(3).mul(&PauliString::x(5)).1);
        assert_eq!(PauliString::parse("Y2").unwrap(), PauliString::y(2));
        assert!(PauliString::parse("Q1").is_err());
        assert!(PauliString::parse("X1Z1").is_err());
        assert_eq!(PauliString::parse("Z3X5").unwrap().to_string(), "Z3X5");
    }

    #[test]
    fn eval_uses_pi_kappa() {
        let p = KappaPoly::from_coeffs(vec![real(1, 1), imag(-5, 1)]);
        let v = p.eval(0.01);
        assert!((v - Complex64::new(1.0, -5.0 * std::f64::consts::PI * 0.01)).norm() < 1e-15);
    }
}
