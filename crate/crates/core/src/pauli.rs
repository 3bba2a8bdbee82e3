//! Pauli strings, local-subspace bases and dense materialization.
//!
//! A [`PauliString`] stores an X mask, a Z mask and a power of `i`. A site
//! with both bits set carries `Y`, so a string with `phase_pow == 0` is the
//! plain (Hermitian) tensor product of single-site Pauli matrices.
//!
//! Site `k` (0-based; written `k + 1` in text form) maps to bit `n - 1 - k`
//! of a computational basis index, i.e. the first tensor factor is the most
//! significant bit, matching the usual Kronecker ordering.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatMut, MatRef};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Entry, Real};

/// Largest qubit count a single string can address.
pub const MAX_STRING_QUBITS: u32 = 63;
/// Largest qubit count accepted by [`StringBasis::enumerate`].
pub const BASIS_QUBIT_CAP: u32 = 30;
/// Largest qubit count for dense `2^N x 2^N` matrices.
pub const DENSE_QUBIT_CAP: u32 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Axis::X => (true, false),
            Axis::Y => (true, true),
            Axis::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Option<Axis> {
        match (x, z) {
            (true, false) => Some(Axis::X),
            (true, true) => Some(Axis::Y),
            (false, true) => Some(Axis::Z),
            (false, false) => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: u32,
    x: u64,
    z: u64,
    phase: u8,
}

#[inline]
fn site_bit(n_qubits: u32, site: usize) -> u64 {
    1u64 << (n_qubits as usize - 1 - site)
}

#[inline]
fn parity(v: u64) -> u8 {
    (v.count_ones() & 1) as u8
}

impl PauliString {
    pub fn identity(n_qubits: u32) -> Result<Self> {
        Self::from_masks(n_qubits, 0, 0, 0)
    }

    /// Builds a string from raw basis-index masks (see the module docs for
    /// the site-to-bit mapping).
    pub fn from_masks(n_qubits: u32, x_mask: u64, z_mask: u64, phase_pow: u8) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_STRING_QUBITS {
            return Err(Error::QubitsOutOfRange { n: n_qubits, min: 1, max: MAX_STRING_QUBITS });
        }
        let full = (1u64 << n_qubits) - 1;
        if (x_mask | z_mask) & !full != 0 {
            return Err(Error::InvalidArgument(format!(
                "masks {x_mask:#x}/{z_mask:#x} do not fit in {n_qubits} qubits"
            )));
        }
        Ok(Self { n_qubits, x: x_mask, z: z_mask, phase: phase_pow & 3 })
    }

    pub fn single(n_qubits: u32, site: usize, axis: Axis) -> Result<Self> {
        Self::from_factors(n_qubits, &[(site, axis)])
    }

    /// Builds a Hermitian string from `(site, axis)` factors, 0-based sites.
    pub fn from_factors(n_qubits: u32, factors: &[(usize, Axis)]) -> Result<Self> {
        let mut s = Self::identity(n_qubits)?;
        for &(site, axis) in factors {
            if site >= n_qubits as usize {
                return Err(Error::InvalidArgument(format!(
                    "site {} out of range for {n_qubits} qubits",
                    site + 1
                )));
            }
            let bit = site_bit(n_qubits, site);
            if (s.x | s.z) & bit != 0 {
                return Err(Error::InvalidArgument(format!("site {} repeated", site + 1)));
            }
            let (xb, zb) = axis.bits();
            if xb {
                s.x |= bit;
            }
            if zb {
                s.z |= bit;
            }
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }
    pub fn x_mask(&self) -> u64 {
        self.x
    }
    pub fn z_mask(&self) -> u64 {
        self.z
    }
    pub fn phase_pow(&self) -> u8 {
        self.phase
    }
    pub fn dimension(&self) -> usize {
        1usize << self.n_qubits
    }
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }
    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }
    /// Diagonal in the computational basis (only `Z` and identity factors).
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }
    pub fn is_hermitian(&self) -> bool {
        self.phase & 1 == 0
    }
    /// The dense matrix has only real entries.
    pub fn is_real(&self) -> bool {
        (self.y_count() + self.phase as u32) % 2 == 0
    }
    /// Same string with the phase dropped.
    pub fn canonical(&self) -> Self {
        Self { phase: 0, ..*self }
    }

    pub fn factor(&self, site: usize) -> Option<Axis> {
        if site >= self.n_qubits as usize {
            return None;
        }
        let bit = site_bit(self.n_qubits, site);
        Axis::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    /// Non-identity factors in ascending site order.
    pub fn factors(&self) -> Vec<(usize, Axis)> {
        (0..self.n_qubits as usize).filter_map(|s| self.factor(s).map(|a| (s, a))).collect()
    }

    /// Operator product `self * other`.
    pub fn product(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitMismatch { left: self.n_qubits, right: other.n_qubits });
        }
        // sigma(x, z) = i^{xz} X^x Z^z; moving Z^{z1} past X^{x2} costs (-1)^{z1 x2}.
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let pow = self.phase as i64
            + other.phase as i64
            + (self.x & self.z).count_ones() as i64
            + (other.x & other.z).count_ones() as i64
            + 2 * (self.z & other.x).count_ones() as i64
            - (x & z).count_ones() as i64;
        Ok(PauliString { n_qubits: self.n_qubits, x, z, phase: pow.rem_euclid(4) as u8 })
    }

    /// Action on a basis state: `tau |b> = i^p |b ^ x>`; returns `(b ^ x, p)`.
    #[inline]
    pub fn apply(&self, b: usize) -> (usize, u8) {
        let b64 = b as u64;
        let pow = self.phase as u32 + self.y_count() + 2 * parity(b64 & self.z) as u32;
        ((b64 ^ self.x) as usize, (pow & 3) as u8)
    }

    /// Relabels qubits: factor on site `k` moves to site `perm[k]`.
    pub fn permute_sites(&self, perm: &[usize]) -> Result<PauliString> {
        if perm.len() != self.n_qubits as usize {
            return Err(Error::DimensionMismatch { expected: self.n_qubits as usize, got: perm.len() });
        }
        let factors: Vec<(usize, Axis)> =
            self.factors().into_iter().map(|(s, a)| (perm[s], a)).collect();
        let mut out = PauliString::from_factors(self.n_qubits, &factors)?;
        out.phase = self.phase;
        Ok(out)
    }

    pub fn to_dense<T: Real, E: Entry<T>>(&self) -> Result<Mat<E>> {
        check_dense(self.n_qubits)?;
        if !E::IS_COMPLEX && !self.is_real() {
            return Err(Error::ComplexBasis);
        }
        let d = self.dimension();
        let mut m = Mat::<E>::zeros(d, d);
        for b in 0..d {
            let (r, p) = self.apply(b);
            m[(r, b)] = E::from_phase(p, T::one()).ok_or(Error::ComplexBasis)?;
        }
        Ok(m)
    }

    /// Parses the text form, e.g. `"X1*Z3"`, `"I"`, `"-i*Y2"`.
    pub fn parse(n_qubits: u32, text: &str) -> Result<PauliString> {
        let err = |reason: &str| Error::ParsePauli { input: text.to_string(), reason: reason.to_string() };
        let mut rest = text.trim();
        let mut phase = 0u8;
        if let Some(r) = rest.strip_prefix('-') {
            phase = 2;
            rest = r;
        }
        if let Some(r) = rest.strip_prefix("i*") {
            phase = (phase + 1) & 3;
            rest = r;
        }
        let mut factors = Vec::new();
        if rest != "I" && !rest.is_empty() {
            for tok in rest.split('*') {
                let tok = tok.trim();
                let mut chars = tok.chars();
                let axis = match chars.next() {
                    Some('X') => Axis::X,
                    Some('Y') => Axis::Y,
                    Some('Z') => Axis::Z,
                    _ => return Err(err("expected factor like X1")),
                };
                let site: usize = chars.as_str().parse().map_err(|_| err("bad site index"))?;
                if site == 0 {
                    return Err(err("sites are 1-indexed"));
                }
                factors.push((site - 1, axis));
            }
        } else if rest.is_empty() {
            return Err(err("empty"));
        }
        let mut s = PauliString::from_factors(n_qubits, &factors).map_err(|e| err(&e.to_string()))?;
        s.phase = phase;
        Ok(s)
    }

    fn canonical_key(&self) -> (u32, Vec<(usize, Axis)>) {
        (self.weight(), self.factors())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.phase {
            1 => write!(f, "i*")?,
            2 => write!(f, "-")?,
            3 => write!(f, "-i*")?,
            _ => {}
        }
        if self.is_identity() {
            return write!(f, "I");
        }
        let parts: Vec<String> =
            self.factors().iter().map(|(s, a)| format!("{}{}", a.symbol(), s + 1)).collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self}; n={})", self.n_qubits)
    }
}

/// Operator product; see [`PauliString::product`].
pub fn string_product(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    a.product(b)
}

/// `Re Tr(a b)`: `2^N` for equal Hermitian strings, zero for distinct ones.
pub fn pair_trace<T: Real>(a: &PauliString, b: &PauliString) -> Result<T> {
    let p = a.product(b)?;
    if !p.is_identity() {
        return Ok(T::zero());
    }
    let dim = T::of(2.0).powi(a.n_qubits as i32);
    Ok(match p.phase {
        0 => dim,
        2 => -dim,
        _ => T::zero(),
    })
}

fn check_dense(n_qubits: u32) -> Result<()> {
    if n_qubits == 0 || n_qubits > DENSE_QUBIT_CAP {
        return Err(Error::QubitsOutOfRange { n: n_qubits, min: 1, max: DENSE_QUBIT_CAP });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFlavor {
    /// All strings of weight 1 and 2.
    #[serde(rename = "complex_2local")]
    Complex2Local,
    /// Weight 1 and 2 strings with an even number of `Y` factors.
    #[serde(rename = "real_2local")]
    Real2Local,
    /// `Z_i Z_j` pairs only.
    #[serde(rename = "z_only_2local")]
    ZOnly2Local,
    /// `Z_i` only.
    OneLocalZ,
    /// `X_i` and `Z_i`.
    OneLocalReal,
    Custom,
}

impl BasisFlavor {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasisFlavor::Complex2Local => "complex_2local",
            BasisFlavor::Real2Local => "real_2local",
            BasisFlavor::ZOnly2Local => "z_only_2local",
            BasisFlavor::OneLocalZ => "one_local_z",
            BasisFlavor::OneLocalReal => "one_local_real",
            BasisFlavor::Custom => "custom",
        }
    }

    /// Closed-form basis size, `None` for custom bases.
    pub fn expected_len(&self, n_qubits: u32) -> Option<usize> {
        let n = n_qubits as usize;
        let pairs = n * n.saturating_sub(1) / 2;
        match self {
            BasisFlavor::Complex2Local => Some(3 * n + 9 * pairs),
            BasisFlavor::Real2Local => Some(2 * n + 5 * pairs),
            BasisFlavor::ZOnly2Local => Some(pairs),
            BasisFlavor::OneLocalZ => Some(n),
            BasisFlavor::OneLocalReal => Some(2 * n),
            BasisFlavor::Custom => None,
        }
    }
}

impl fmt::Display for BasisFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BasisFlavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "complex_2local" | "complex" | "general" => BasisFlavor::Complex2Local,
            "real_2local" | "real" => BasisFlavor::Real2Local,
            "z_only_2local" | "z_only" | "zz" | "ising" => BasisFlavor::ZOnly2Local,
            "one_local_z" | "1local" | "one_local" => BasisFlavor::OneLocalZ,
            "one_local_real" => BasisFlavor::OneLocalReal,
            "custom" => BasisFlavor::Custom,
            other => return Err(Error::UnsupportedFlavor(other.to_string())),
        })
    }
}

/// Ordered set of Pauli strings spanning a local operator subspace.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "BasisRecord", try_from = "BasisRecord")]
pub struct StringBasis {
    n_qubits: u32,
    flavor: BasisFlavor,
    strings: Vec<PauliString>,
    index: HashMap<PauliString, usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BasisRecord {
    n_qubits: u32,
    flavor: BasisFlavor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strings: Option<Vec<String>>,
}

impl From<StringBasis> for BasisRecord {
    fn from(b: StringBasis) -> Self {
        let strings = (b.flavor == BasisFlavor::Custom)
            .then(|| b.strings.iter().map(|s| s.to_string()).collect());
        BasisRecord { n_qubits: b.n_qubits, flavor: b.flavor, strings }
    }
}

impl TryFrom<BasisRecord> for StringBasis {
    type Error = Error;

    fn try_from(r: BasisRecord) -> Result<Self> {
        match r.flavor {
            BasisFlavor::Custom => {
                let strings = r
                    .strings
                    .ok_or_else(|| Error::InvalidBasis("custom basis without strings".into()))?
                    .iter()
                    .map(|s| PauliString::parse(r.n_qubits, s))
                    .collect::<Result<Vec<_>>>()?;
                StringBasis::custom(r.n_qubits, strings)
            }
            f => StringBasis::enumerate(r.n_qubits, f),
        }
    }
}

impl PartialEq for StringBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n_qubits == other.n_qubits && self.strings == other.strings
    }
}

impl StringBasis {
    /// Enumerates a standard basis in canonical order: weight-1 strings by
    /// `(site, axis)`, then weight-2 strings by `(site_i, site_j, axis_i, axis_j)`.
    pub fn enumerate(n_qubits: u32, flavor: BasisFlavor) -> Result<Self> {
        if n_qubits == 0 || n_qubits > BASIS_QUBIT_CAP {
            return Err(Error::QubitsOutOfRange { n: n_qubits, min: 1, max: BASIS_QUBIT_CAP });
        }
        let (one, two): (&[Axis], &[(Axis, Axis)]) = match flavor {
            BasisFlavor::Complex2Local => (&Axis::ALL, &ALL_PAIRS),
            BasisFlavor::Real2Local => (&[Axis::X, Axis::Z], &REAL_PAIRS),
            BasisFlavor::ZOnly2Local => (&[], &[(Axis::Z, Axis::Z)]),
            BasisFlavor::OneLocalZ => (&[Axis::Z], &[]),
            BasisFlavor::OneLocalReal => (&[Axis::X, Axis::Z], &[]),
            BasisFlavor::Custom => {
                return Err(Error::UnsupportedFlavor("custom bases are built with StringBasis::custom".into()))
            }
        };
        let n = n_qubits as usize;
        let mut strings = Vec::new();
        for site in 0..n {
            for &a in one {
                strings.push(PauliString::single(n_qubits, site, a)?);
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                for &(a, b) in two {
                    strings.push(PauliString::from_factors(n_qubits, &[(i, a), (j, b)])?);
                }
            }
        }
        Ok(Self::from_parts(n_qubits, flavor, strings))
    }

    /// A user-supplied basis. Strings must be distinct, non-identity and
    /// carry no phase; they are kept in the given order.
    pub fn custom(n_qubits: u32, strings: Vec<PauliString>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, s) in strings.iter().enumerate() {
            if s.n_qubits() != n_qubits {
                return Err(Error::QubitMismatch { left: n_qubits, right: s.n_qubits() });
            }
            if s.is_identity() {
                return Err(Error::InvalidBasis("identity string is excluded".into()));
            }
            if s.phase_pow() != 0 {
                return Err(Error::InvalidBasis(format!("string {s} carries a phase")));
            }
            if seen.insert(*s, i).is_some() {
                return Err(Error::InvalidBasis(format!("duplicate string {s}")));
            }
        }
        Ok(Self::from_parts(n_qubits, BasisFlavor::Custom, strings))
    }

    fn from_parts(n_qubits: u32, flavor: BasisFlavor, strings: Vec<PauliString>) -> Self {
        let index = strings.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Self { n_qubits, flavor, strings, index }
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }
    pub fn flavor(&self) -> BasisFlavor {
        self.flavor
    }
    pub fn dimension(&self) -> usize {
        1usize << self.n_qubits
    }
    pub fn len(&self) -> usize {
        self.strings.len()
    }
    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
    pub fn strings(&self) -> &[PauliString] {
        &self.strings
    }
    pub fn get(&self, i: usize) -> Option<&PauliString> {
        self.strings.get(i)
    }
    pub fn index_of(&self, s: &PauliString) -> Option<usize> {
        self.index.get(&s.canonical()).copied()
    }
    /// Every string has a real matrix representation.
    pub fn is_real(&self) -> bool {
        self.strings.iter().all(|s| s.is_real())
    }
    pub fn is_diagonal(&self) -> bool {
        self.strings.iter().all(|s| s.is_diagonal())
    }

    /// For a qubit relabeling `perm`, returns `map` with
    /// `basis[map[i]] == basis[i].permute_sites(perm)`.
    pub fn site_permutation_map(&self, perm: &[usize]) -> Result<Vec<usize>> {
        self.strings
            .iter()
            .map(|s| {
                let p = s.permute_sites(perm)?;
                self.index_of(&p)
                    .ok_or_else(|| Error::InvalidBasis(format!("{p} not in basis after relabeling")))
            })
            .collect()
    }

    /// Strings sorted by weight then factor list; custom bases keep their
    /// own order but this is handy for display.
    pub fn sorted_canonically(&self) -> Vec<PauliString> {
        let mut v = self.strings.clone();
        v.sort_by_key(|s| s.canonical_key());
        v
    }
}

const ALL_PAIRS: [(Axis, Axis); 9] = [
    (Axis::X, Axis::X),
    (Axis::X, Axis::Y),
    (Axis::X, Axis::Z),
    (Axis::Y, Axis::X),
    (Axis::Y, Axis::Y),
    (Axis::Y, Axis::Z),
    (Axis::Z, Axis::X),
    (Axis::Z, Axis::Y),
    (Axis::Z, Axis::Z),
];

const REAL_PAIRS: [(Axis, Axis); 5] = [
    (Axis::X, Axis::X),
    (Axis::X, Axis::Z),
    (Axis::Y, Axis::Y),
    (Axis::Z, Axis::X),
    (Axis::Z, Axis::Z),
];

/// Writes `sum_tau h_tau tau` into `out`.
pub fn materialize_into<T: Real, E: Entry<T>>(
    basis: &StringBasis,
    couplings: &[T],
    mut out: MatMut<'_, E>,
) -> Result<()> {
    let d = basis.dimension();
    if couplings.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: couplings.len() });
    }
    if out.nrows() != d || out.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: out.nrows() });
    }
    if !E::IS_COMPLEX && !basis.is_real() {
        return Err(Error::ComplexBasis);
    }
    out.fill(E::zero());
    for (s, &h) in basis.strings().iter().zip(couplings) {
        if h == T::zero() {
            continue;
        }
        let pos = E::from_phase(0, h).unwrap();
        let neg = -pos;
        let imag = if E::IS_COMPLEX { E::from_phase(1, h) } else { None };
        for b in 0..d {
            let (r, p) = s.apply(b);
            let v = match p {
                0 => pos,
                2 => neg,
                1 => imag.unwrap(),
                _ => -imag.unwrap(),
            };
            out[(r, b)] += v;
        }
    }
    Ok(())
}

/// `h_tau = Re Tr(tau H) / 2^N` for every string of the basis.
pub fn project_onto_subspace<T: Real, E: Entry<T>>(h: MatRef<'_, E>, basis: &StringBasis) -> Result<Vec<T>> {
    let d = basis.dimension();
    if h.nrows() != d || h.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: h.nrows() });
    }
    let inv_d = T::one() / T::of_usize(d);
    Ok(basis
        .strings()
        .iter()
        .map(|s| {
            // Tr(tau H) = sum_c tau[c^x, c] H[c, c^x]
            let mut acc = T::zero();
            for c in 0..d {
                let (r, p) = s.apply(c);
                let v: Complex<T> = h[(c, r)].to_complex();
                acc += match p {
                    0 => v.re,
                    1 => -v.im,
                    2 => -v.re,
                    _ => v.im,
                };
            }
            acc * inv_d
        })
        .collect())
}

/// A basis paired with real couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct LocalHamiltonian<T: Real> {
    basis: StringBasis,
    couplings: Vec<T>,
}

impl<T: Real> LocalHamiltonian<T> {
    pub fn new(basis: StringBasis, couplings: Vec<T>) -> Result<Self> {
        if couplings.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), got: couplings.len() });
        }
        if couplings.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("couplings"));
        }
        Ok(Self { basis, couplings })
    }

    pub fn zeros(basis: StringBasis) -> Self {
        let m = basis.len();
        Self { basis, couplings: vec![T::zero(); m] }
    }

    pub fn basis(&self) -> &StringBasis {
        &self.basis
    }
    pub fn couplings(&self) -> &[T] {
        &self.couplings
    }
    pub fn n_qubits(&self) -> u32 {
        self.basis.n_qubits()
    }

    /// Coupling of a given string, zero if it is not in the basis.
    pub fn coupling(&self, s: &PauliString) -> T {
        self.basis.index_of(s).map_or(T::zero(), |i| self.couplings[i])
    }

    /// Dense `2^N x 2^N` matrix. Real entry types require a real basis.
    pub fn materialize<E: Entry<T>>(&self) -> Result<Mat<E>> {
        check_dense(self.n_qubits())?;
        let d = self.basis.dimension();
        let mut m = Mat::<E>::zeros(d, d);
        materialize_into(&self.basis, &self.couplings, m.as_mut())?;
        Ok(m)
    }

    /// Projects a dense Hermitian matrix onto `basis`.
    pub fn from_projection<E: Entry<T>>(h: MatRef<'_, E>, basis: StringBasis) -> Result<Self> {
        let couplings = project_onto_subspace(h, &basis)?;
        Self::new(basis, couplings)
    }

    /// `sum h^2`, which equals `Tr(H^2) / 2^N`.
    pub fn norm_sqr(&self) -> T {
        self.couplings.iter().map(|&h| h * h).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u32, s: &str) -> PauliString {
        PauliString::parse(n, s).unwrap()
    }

    #[test]
    fn enumerated_counts_at_three_qubits() {
        assert_eq!(StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap().len(), 36);
        assert_eq!(StringBasis::enumerate(3, BasisFlavor::Real2Local).unwrap().len(), 21);
        let zz = StringBasis::enumerate(3, BasisFlavor::ZOnly2Local).unwrap();
        let names: Vec<String> = zz.strings().iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["Z1*Z2", "Z1*Z3", "Z2*Z3"]);
    }

    #[test]
    fn canonical_order_prefix() {
        let b = StringBasis::enumerate(2, BasisFlavor::Complex2Local).unwrap();
        let names: Vec<String> = b.strings().iter().take(8).map(|s| s.to_string()).collect();
        assert_eq!(names, ["X1", "Y1", "Z1", "X2", "Y2", "Z2", "X1*X2", "X1*Y2"]);
        let r = StringBasis::enumerate(2, BasisFlavor::Real2Local).unwrap();
        let names: Vec<String> = r.strings().iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["X1", "Z1", "X2", "Z2", "X1*X2", "X1*Z2", "Y1*Y2", "Z1*X2", "Z1*Z2"]);
    }

    #[test]
    fn enumerate_rejects_out_of_range() {
        assert!(matches!(
            StringBasis::enumerate(0, BasisFlavor::Real2Local),
            Err(Error::QubitsOutOfRange { .. })
        ));
        assert!(StringBasis::enumerate(BASIS_QUBIT_CAP + 1, BasisFlavor::ZOnly2Local).is_err());
        assert!(matches!(
            StringBasis::enumerate(3, BasisFlavor::Custom),
            Err(Error::UnsupportedFlavor(_))
        ));
    }

    #[test]
    fn x_times_z_is_minus_i_y() {
        let x = p(2, "X1");
        let z = p(2, "Z1");
        let c = string_product(&x, &z).unwrap();
        assert_eq!(c.canonical(), p(2, "Y1"));
        assert_eq!(c.phase_pow(), 3);
        assert_eq!(c.to_string(), "-i*Y1");
    }

    #[test]
    fn squares_and_identity() {
        let id = PauliString::identity(3).unwrap();
        for s in StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap().strings() {
            let sq = s.product(s).unwrap();
            assert!(sq.is_identity());
            assert_eq!(sq.phase_pow(), 0);
            assert_eq!(id.product(s).unwrap(), *s);
        }
        assert!(matches!(
            id.product(&PauliString::identity(2).unwrap()),
            Err(Error::QubitMismatch { .. })
        ));
    }

    #[test]
    fn pair_trace_examples() {
        let a = p(3, "X1*Z2");
        assert_eq!(pair_trace::<f64>(&a, &a).unwrap(), 8.0);
        assert_eq!(pair_trace::<f64>(&p(3, "X1"), &p(3, "Z1")).unwrap(), 0.0);
        let id = PauliString::identity(4).unwrap();
        assert_eq!(pair_trace::<f64>(&id, &id).unwrap(), 16.0);
    }

    #[test]
    fn parse_display_roundtrip() {
        for text in ["X1*Z3", "I", "Y2", "-i*Y1*X3", "-Z1*Z2", "i*X2"] {
            assert_eq!(p(3, text).to_string(), text);
        }
        assert!(PauliString::parse(3, "X0").is_err());
        assert!(PauliString::parse(3, "X4").is_err());
        assert!(PauliString::parse(3, "Q1").is_err());
        assert!(PauliString::parse(3, "X1*Z1").is_err());
    }

    #[test]
    fn x_identity_z_has_half_plus_half_minus() {
        let basis = StringBasis::custom(3, vec![p(3, "X1*Z3")]).unwrap();
        let h = LocalHamiltonian::new(basis, vec![1.0f64]).unwrap();
        let m = h.materialize::<f64>().unwrap();
        let vals = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let neg = vals.iter().filter(|v| (**v + 1.0).abs() < 1e-12).count();
        let pos = vals.iter().filter(|v| (**v - 1.0).abs() < 1e-12).count();
        assert_eq!((neg, pos), (4, 4));
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let basis = StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap();
        let m = LocalHamiltonian::<f64>::zeros(basis).materialize::<Complex<f64>>().unwrap();
        assert!(m.col_iter().all(|c| c.iter().all(|v| *v == Complex::new(0.0, 0.0))));
    }

    #[test]
    fn real_entries_need_real_basis() {
        let basis = StringBasis::enumerate(2, BasisFlavor::Complex2Local).unwrap();
        let h = LocalHamiltonian::new(basis, vec![0.5f64; 3 * 2 + 9]).unwrap();
        assert!(matches!(h.materialize::<f64>(), Err(Error::ComplexBasis)));
    }

    #[test]
    fn xxx_projects_to_zero() {
        let xxx = p(3, "X1*X2*X3").to_dense::<f64, Complex<f64>>().unwrap();
        let basis = StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap();
        let h: Vec<f64> = project_onto_subspace(xxx.as_ref(), &basis).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));
        let id = Mat::<f64>::identity(8, 8);
        let h: Vec<f64> = project_onto_subspace(id.as_ref(), &basis).unwrap();
        assert!(h.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn custom_basis_validation() {
        let x = p(2, "X1");
        assert!(StringBasis::custom(2, vec![x, x]).is_err());
        assert!(StringBasis::custom(2, vec![PauliString::identity(2).unwrap()]).is_err());
        assert!(StringBasis::custom(2, vec![p(2, "-X1")]).is_err());
        let three_local = StringBasis::custom(3, vec![p(3, "X1*X2*X3")]).unwrap();
        assert_eq!(three_local.flavor(), BasisFlavor::Custom);
    }

    #[test]
    fn basis_serde_roundtrip() {
        let b = StringBasis::enumerate(4, BasisFlavor::Real2Local).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, r#"{"n_qubits":4,"flavor":"real_2local"}"#);
        let back: StringBasis = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
        let c = StringBasis::custom(3, vec![p(3, "X1*Z3"), p(3, "Y2")]).unwrap();
        let back: StringBasis = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn permutation_map_is_a_bijection() {
        let b = StringBasis::enumerate(4, BasisFlavor::Complex2Local).unwrap();
        let map = b.site_permutation_map(&[2, 0, 3, 1]).unwrap();
        let mut seen = map.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..b.len()).collect::<Vec<_>>());
    }
}
