//! Unsigned Pauli operators in packed symplectic form, Z-type masks, sparse
//! probability tables and the two discrete transforms built on them.
//!
//! A Pauli on `n <= 64` qubits is stored as two words `(x, z)`; bit `i` of
//! each word is qubit `i`. The label map is `I=(0,0)`, `X=(1,0)`, `Z=(0,1)`,
//! `Y=(1,1)`. Text form lists qubit 0 first, so `"XZ"` is `X` on qubit 0 and
//! `Z` on qubit 1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default tolerance used when checking that a table is a distribution.
pub const PROB_TOL: f64 = 1e-12;

/// Largest register for which the dense Walsh-Hadamard path is used.
pub const DENSE_WHT_MAX_QUBITS: usize = 10;

pub const MAX_QUBITS: usize = 64;

#[inline]
pub(crate) fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[inline]
pub(crate) fn parity(v: u64) -> bool {
    v.count_ones() & 1 == 1
}

/// Single-qubit Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'I' | 'i' | '_' => Some(Letter::I),
            'X' | 'x' => Some(Letter::X),
            'Y' | 'y' => Some(Letter::Y),
            'Z' | 'z' => Some(Letter::Z),
            _ => None,
        }
    }
}

/// An n-qubit Pauli operator without sign.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliOp {
    n: u8,
    x: u64,
    z: u64,
}

impl PauliOp {
    pub fn identity(n: usize) -> PauliOp {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits are supported");
        PauliOp {
            n: n as u8,
            x: 0,
            z: 0,
        }
    }

    pub fn new(n: usize, x: u64, z: u64) -> Result<PauliOp> {
        if n > MAX_QUBITS {
            return Err(Error::Dimension(format!(
                "{n} qubits exceeds the {MAX_QUBITS}-qubit limit"
            )));
        }
        let mask = low_mask(n);
        if x & !mask != 0 || z & !mask != 0 {
            return Err(Error::Dimension(format!("bits set outside a {n}-qubit register")));
        }
        Ok(PauliOp { n: n as u8, x, z })
    }

    /// Builds from raw words, silently discarding bits above `n`.
    pub fn from_bits(n: usize, x: u64, z: u64) -> PauliOp {
        let mask = low_mask(n);
        PauliOp {
            n: n as u8,
            x: x & mask,
            z: z & mask,
        }
    }

    pub fn single(n: usize, qubit: usize, letter: Letter) -> PauliOp {
        assert!(qubit < n);
        let (x, z) = letter.bits();
        PauliOp::from_bits(n, (x as u64) << qubit, (z as u64) << qubit)
    }

    /// Z-type operator `Z(c)` on `n` qubits.
    pub fn z_type(n: usize, bits: u64) -> PauliOp {
        PauliOp::from_bits(n, 0, bits)
    }

    /// X-type operator `X(a)` on `n` qubits.
    pub fn x_type(n: usize, bits: u64) -> PauliOp {
        PauliOp::from_bits(n, bits, 0)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn x(&self) -> u64 {
        self.x
    }

    #[inline]
    pub fn z(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Bit mask of qubits acted on nontrivially.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> usize {
        self.support().count_ones() as usize
    }

    pub fn letter(&self, qubit: usize) -> Letter {
        Letter::from_bits((self.x >> qubit) & 1 == 1, (self.z >> qubit) & 1 == 1)
    }

    pub fn with_letter(mut self, qubit: usize, letter: Letter) -> PauliOp {
        let (x, z) = letter.bits();
        self.x = (self.x & !(1 << qubit)) | ((x as u64) << qubit);
        self.z = (self.z & !(1 << qubit)) | ((z as u64) << qubit);
        self
    }

    /// Sign-free product `(x1 ^ x2, z1 ^ z2)`.
    pub fn compose(&self, other: &PauliOp) -> Result<PauliOp> {
        check_same(self, other)?;
        Ok(PauliOp {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        })
    }

    /// Symplectic form: true when the two operators anticommute.
    pub fn anticommutes(&self, other: &PauliOp) -> Result<bool> {
        check_same(self, other)?;
        Ok(symplectic(self, other))
    }

    pub fn commutes(&self, other: &PauliOp) -> Result<bool> {
        self.anticommutes(other).map(|a| !a)
    }

    /// Dense index in `0..4^n`: `x | z << n`.
    pub fn index(&self) -> usize {
        (self.x | (self.z << self.n)) as usize
    }

    pub fn from_index(n: usize, index: usize) -> PauliOp {
        let mask = low_mask(n);
        let idx = index as u64;
        PauliOp::from_bits(n, idx & mask, (idx >> n) & mask)
    }

    /// Iterates over all `4^n` Paulis in index order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliOp> {
        assert!(n <= 16, "refusing to enumerate 4^{n} Paulis");
        (0..1usize << (2 * n)).map(move |i| PauliOp::from_index(n, i))
    }

    /// Restricts to the listed qubits; local qubit `j` is `qubits[j]`.
    pub fn restrict(&self, qubits: &[usize]) -> PauliOp {
        let mut x = 0;
        let mut z = 0;
        for (j, &q) in qubits.iter().enumerate() {
            x |= ((self.x >> q) & 1) << j;
            z |= ((self.z >> q) & 1) << j;
        }
        PauliOp::from_bits(qubits.len(), x, z)
    }

    /// Places a local operator onto the listed qubits of an `n`-qubit register.
    pub fn embed(&self, qubits: &[usize], n: usize) -> PauliOp {
        debug_assert_eq!(qubits.len(), self.num_qubits());
        let mut x = 0;
        let mut z = 0;
        for (j, &q) in qubits.iter().enumerate() {
            x |= ((self.x >> j) & 1) << q;
            z |= ((self.z >> j) & 1) << q;
        }
        PauliOp::from_bits(n, x, z)
    }
}

#[inline]
pub(crate) fn symplectic(p: &PauliOp, q: &PauliOp) -> bool {
    parity((p.x & q.z) ^ (p.z & q.x))
}

fn check_same(p: &PauliOp, q: &PauliOp) -> Result<()> {
    if p.n != q.n {
        return Err(Error::Dimension(format!(
            "{}-qubit and {}-qubit operators",
            p.n, q.n
        )));
    }
    Ok(())
}

/// Sign-free composition of two Paulis.
pub fn compose(p: &PauliOp, q: &PauliOp) -> Result<PauliOp> {
    p.compose(q)
}

/// True iff `p` and `q` commute.
pub fn commutes(p: &PauliOp, q: &PauliOp) -> Result<bool> {
    p.commutes(q)
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.num_qubits() {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n == 0 {
            write!(f, "PauliOp(\"\")")
        } else {
            write!(f, "PauliOp(\"{self}\")")
        }
    }
}

impl FromStr for PauliOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<PauliOp> {
        let letters: Vec<Letter> = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                Letter::from_char(c).ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?} in {s:?}")))
            })
            .collect::<Result<_>>()?;
        if letters.len() > MAX_QUBITS {
            return Err(Error::Dimension(format!("{} qubits in {s:?}", letters.len())));
        }
        let mut p = PauliOp::identity(letters.len());
        for (q, l) in letters.into_iter().enumerate() {
            p = p.with_letter(q, l);
        }
        Ok(p)
    }
}

impl Serialize for PauliOp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliOp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Formats the low `len` bits of `bits` with bit 0 first.
pub fn format_bits(bits: u64, len: usize) -> String {
    (0..len)
        .map(|i| if (bits >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bits(s: &str) -> Result<(u64, usize)> {
    let s = s.trim();
    if s.len() > 64 {
        return Err(Error::Parse(format!("bit string {s:?} longer than 64")));
    }
    let mut v = 0u64;
    for (i, c) in s.chars().enumerate() {
        match c {
            '0' => {}
            '1' => v |= 1 << i,
            _ => return Err(Error::Parse(format!("bad bit {c:?} in {s:?}"))),
        }
    }
    Ok((v, s.len()))
}

/// Z-type operator `Z(c)` on the measured register, stored as the mask `c`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZMask {
    m: u8,
    bits: u64,
}

impl ZMask {
    pub fn new(m: usize, bits: u64) -> Result<ZMask> {
        if m > MAX_QUBITS || bits & !low_mask(m) != 0 {
            return Err(Error::Dimension(format!("mask {bits:#x} does not fit {m} bits")));
        }
        Ok(ZMask { m: m as u8, bits })
    }

    pub fn identity(m: usize) -> ZMask {
        ZMask { m: m as u8, bits: 0 }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.m as usize
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn is_identity(&self) -> bool {
        self.bits == 0
    }

    pub fn as_pauli(&self) -> PauliOp {
        PauliOp::z_type(self.len(), self.bits)
    }

    pub fn all(m: usize) -> impl Iterator<Item = ZMask> {
        (0..1u64 << m).map(move |b| ZMask { m: m as u8, bits: b })
    }
}

impl fmt::Display for ZMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_bits(self.bits, self.len()))
    }
}

impl fmt::Debug for ZMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ZMask({self})")
    }
}

impl FromStr for ZMask {
    type Err = Error;
    fn from_str(s: &str) -> Result<ZMask> {
        let (bits, m) = parse_bits(s)?;
        ZMask::new(m, bits)
    }
}

impl Serialize for ZMask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ZMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pre- and post-measurement bit flip patterns on the measured register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlipPatternPair {
    pub a: u64,
    pub b: u64,
}

impl FlipPatternPair {
    pub const NONE: FlipPatternPair = FlipPatternPair { a: 0, b: 0 };

    pub fn new(a: u64, b: u64) -> FlipPatternPair {
        FlipPatternPair { a, b }
    }
}

/// Sparse map from keys to nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbTable<K: Ord> {
    entries: BTreeMap<K, f64>,
}

impl<K: Ord> Default for ProbTable<K> {
    fn default() -> Self {
        ProbTable {
            entries: BTreeMap::new(),
        }
    }
}

impl<K: Ord + Clone + fmt::Debug> ProbTable<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn delta(key: K) -> Self {
        let mut t = Self::new();
        t.entries.insert(key, 1.0);
        t
    }

    /// Adds `p` to the weight of `key`.
    pub fn add(&mut self, key: K, p: f64) {
        *self.entries.entry(key).or_insert(0.0) += p;
    }

    pub fn get(&self, key: &K) -> f64 {
        self.entries.get(key).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.entries.values_mut() {
            *v *= factor;
        }
    }

    /// Drops exact zeros.
    pub fn prune(&mut self) {
        self.entries.retain(|_, v| *v != 0.0);
    }

    pub fn as_map(&self) -> &BTreeMap<K, f64> {
        &self.entries
    }

    pub fn validate_distribution(&self, tol: f64) -> Result<()> {
        for (k, &v) in &self.entries {
            if v < -tol || !v.is_finite() {
                return Err(Error::NegativeProbability {
                    key: format!("{k:?}"),
                    value: v,
                });
            }
        }
        let sum = self.total();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Normalization { sum });
        }
        Ok(())
    }

    pub fn is_distribution(&self) -> bool {
        self.validate_distribution(PROB_TOL).is_ok()
    }
}

impl<K: Ord> FromIterator<(K, f64)> for ProbTable<K> {
    fn from_iter<I: IntoIterator<Item = (K, f64)>>(iter: I) -> Self {
        let mut entries = BTreeMap::new();
        for (k, v) in iter {
            *entries.entry(k).or_insert(0.0) += v;
        }
        ProbTable { entries }
    }
}

impl ProbTable<PauliOp> {
    pub fn identity_channel(n: usize) -> Self {
        Self::delta(PauliOp::identity(n))
    }

    pub fn num_qubits(&self) -> Option<usize> {
        self.keys().next().map(|p| p.num_qubits())
    }

    /// Probability of the identity term.
    pub fn fidelity(&self) -> f64 {
        self.iter().filter(|(k, _)| k.is_identity()).map(|(_, v)| v).sum()
    }

    /// Distribution of the product of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        let mut out = Self::new();
        for (p, wp) in self.iter() {
            for (q, wq) in other.iter() {
                out.add(p.compose(q)?, wp * wq);
            }
        }
        Ok(out)
    }
}

/// In-place unnormalized Walsh-Hadamard butterfly. `v.len()` must be a power of two.
pub fn fwht(v: &mut [f64]) {
    let n = v.len();
    assert!(n.is_power_of_two(), "fwht needs a power-of-two length");
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*a + *b, *a - *b);
                *a = s;
                *b = d;
            }
        }
        h *= 2;
    }
}

/// Index swapping the x and z halves, so that the plain dot product of
/// `p.index()` with `swapped_index(q)` is the symplectic form.
#[inline]
fn swapped_index(p: &PauliOp) -> usize {
    (p.z() | (p.x() << p.num_qubits())) as usize
}

/// Dense unnormalized transform `out[P.index()] = sum_Q w_Q (-1)^<P,Q>` of
/// arbitrary real weights on `k` qubits.
pub fn pauli_transform_dense<'a, I>(weights: I, k: usize) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = (&'a PauliOp, f64)>,
{
    if k > DENSE_WHT_MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "{k} qubits exceeds the dense transform limit"
        )));
    }
    let mut dense = vec![0.0; 1 << (2 * k)];
    for (q, w) in weights {
        if q.num_qubits() != k {
            return Err(Error::Dimension(format!("key {q} in a {k}-qubit table")));
        }
        dense[swapped_index(q)] += w;
    }
    fwht(&mut dense);
    Ok(dense)
}

/// Single Pauli eigenvalue `sum_Q p_Q (-1)^<P,Q>` by direct summation.
pub fn pauli_eigenvalue(p: &ProbTable<PauliOp>, at: &PauliOp) -> Result<f64> {
    let mut acc = 0.0;
    for (q, w) in p.iter() {
        acc += if q.anticommutes(at)? { -w } else { w };
    }
    Ok(acc)
}

fn check_keys(p: &ProbTable<PauliOp>, k: usize) -> Result<()> {
    for q in p.keys() {
        if q.num_qubits() != k {
            return Err(Error::Dimension(format!("key {q} in a {k}-qubit table")));
        }
    }
    Ok(())
}

/// Eigenvalues `lambda_P = sum_Q p_Q (-1)^<P,Q>` of a Pauli channel, for every
/// `P` on `k` qubits.
pub fn wht_probs_to_eigenvalues(p: &ProbTable<PauliOp>, k: usize) -> Result<BTreeMap<PauliOp, f64>> {
    check_keys(p, k)?;
    p.validate_distribution(PROB_TOL)?;
    if k > DENSE_WHT_MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "dense eigenvalue table over {k} qubits; use pauli_eigenvalue for single entries"
        )));
    }
    let dense = pauli_transform_dense(p.iter(), k)?;
    let mut out: BTreeMap<PauliOp, f64> = dense
        .into_iter()
        .enumerate()
        .map(|(i, v)| (PauliOp::from_index(k, i), v))
        .collect();
    out.insert(PauliOp::identity(k), 1.0);
    Ok(out)
}

/// Inverse of [`wht_probs_to_eigenvalues`]. The eigenvalue table must be complete.
/// The output is not required to be a distribution, since estimated
/// eigenvalues need not correspond to one.
pub fn wht_eigenvalues_to_probs(lambda: &BTreeMap<PauliOp, f64>, k: usize) -> Result<ProbTable<PauliOp>> {
    if k > DENSE_WHT_MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "{k} qubits exceeds the dense transform limit"
        )));
    }
    let size = 1usize << (2 * k);
    let mut dense = vec![0.0; size];
    for (i, slot) in dense.iter_mut().enumerate() {
        let p = PauliOp::from_index(k, i);
        *slot = *lambda
            .get(&p)
            .ok_or_else(|| Error::MissingKey(format!("eigenvalue for {p}")))?;
    }
    fwht(&mut dense);
    let norm = 1.0 / size as f64;
    // dense[j] now holds sum_P lambda_P (-1)^{index(P) . j}; j is the swapped index of Q.
    let mut out = ProbTable::new();
    for (j, v) in dense.into_iter().enumerate() {
        let swapped = PauliOp::from_index(k, j);
        let q = PauliOp::from_bits(k, swapped.z(), swapped.x());
        out.add(q, v * norm);
    }
    Ok(out)
}

fn fourier_dense(m: usize) -> Result<usize> {
    if m > DENSE_WHT_MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "{m} measured qubits exceeds the dense transform limit"
        )));
    }
    Ok(1usize << (2 * m))
}

/// Binary Fourier transform over flip patterns:
/// `tilde[(c, c')] = sum_{a,b} lambda[(a,b)] (-1)^{a.c + b.c'}`. Absent keys read as 0.
pub fn binary_fourier(
    lambda: &BTreeMap<FlipPatternPair, f64>,
    m: usize,
) -> Result<BTreeMap<(ZMask, ZMask), f64>> {
    let size = fourier_dense(m)?;
    let mask = low_mask(m);
    let mut dense = vec![0.0; size];
    for (k, &v) in lambda {
        if k.a & !mask != 0 || k.b & !mask != 0 {
            return Err(Error::Dimension(format!(
                "flip pattern {:?} does not fit {m} bits",
                k
            )));
        }
        dense[(k.a | (k.b << m)) as usize] += v;
    }
    fwht(&mut dense);
    Ok(dense
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let i = i as u64;
            (
                (
                    ZMask {
                        m: m as u8,
                        bits: i & mask,
                    },
                    ZMask {
                        m: m as u8,
                        bits: i >> m,
                    },
                ),
                v,
            )
        })
        .collect())
}

/// Inverse of [`binary_fourier`]: `lambda[(a,b)] = 4^-m sum_{c,c'} tilde (-1)^{a.c + b.c'}`.
pub fn inverse_binary_fourier(
    tilde: &BTreeMap<(ZMask, ZMask), f64>,
    m: usize,
) -> Result<BTreeMap<FlipPatternPair, f64>> {
    let size = fourier_dense(m)?;
    let mut dense = vec![0.0; size];
    for ((c, c2), &v) in tilde {
        if c.len() != m || c2.len() != m {
            return Err(Error::Dimension(format!(
                "mask pair ({c}, {c2}) in an m={m} table"
            )));
        }
        dense[(c.bits | (c2.bits << m)) as usize] += v;
    }
    fwht(&mut dense);
    let norm = 1.0 / size as f64;
    let mask = low_mask(m);
    Ok(dense
        .into_iter()
        .enumerate()
        .map(|(i, v)| (FlipPatternPair::new(i as u64 & mask, i as u64 >> m), v * norm))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliOp {
        s.parse().unwrap()
    }

    #[test]
    fn composition_table() {
        assert_eq!(compose(&p("X"), &p("Z")).unwrap(), p("Y"));
        assert_eq!(compose(&p("XZ"), &p("ZX")).unwrap(), p("YY"));
        for q in PauliOp::all(2) {
            assert!(compose(&q, &q).unwrap().is_identity());
        }
        assert!(matches!(compose(&p("X"), &p("XX")), Err(Error::Dimension(_))));
    }

    #[test]
    fn commutation() {
        assert!(!commutes(&p("X"), &p("Z")).unwrap());
        assert!(commutes(&p("XX"), &p("ZZ")).unwrap());
        for q in PauliOp::all(2) {
            assert!(commutes(&q, &PauliOp::identity(2)).unwrap());
        }
        assert!(commutes(&p("X"), &p("ZZ")).is_err());
    }

    #[test]
    fn text_format() {
        let q = p("IXYZ");
        assert_eq!(q.letter(0), Letter::I);
        assert_eq!(q.letter(2), Letter::Y);
        assert_eq!(q.to_string(), "IXYZ");
        assert_eq!(q.support(), 0b1110);
        assert!("XQ".parse::<PauliOp>().is_err());
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(json, "\"IXYZ\"");
        assert_eq!(serde_json::from_str::<PauliOp>(&json).unwrap(), q);
        let c: ZMask = "101".parse().unwrap();
        assert_eq!(c.bits(), 0b101);
        assert_eq!(c.to_string(), "101");
    }

    #[test]
    fn restrict_and_embed() {
        let q = p("XIZY");
        let local = q.restrict(&[0, 2, 3]);
        assert_eq!(local, p("XZY"));
        assert_eq!(local.embed(&[0, 2, 3], 4), q);
    }

    #[test]
    fn eigenvalues_single_qubit_bitflip() {
        let table: ProbTable<PauliOp> = [(p("I"), 0.9), (p("X"), 0.1)].into_iter().collect();
        let lam = wht_probs_to_eigenvalues(&table, 1).unwrap();
        assert_eq!(lam[&p("I")], 1.0);
        assert!((lam[&p("X")] - 1.0).abs() < 1e-15);
        assert!((lam[&p("Y")] - 0.8).abs() < 1e-15);
        assert!((lam[&p("Z")] - 0.8).abs() < 1e-15);
        let back = wht_eigenvalues_to_probs(&lam, 1).unwrap();
        assert!((back.get(&p("I")) - 0.9).abs() < 1e-15);
        assert!((back.get(&p("X")) - 0.1).abs() < 1e-15);
        assert!(back.get(&p("Z")).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_two_qubit_fixture() {
        let table: ProbTable<PauliOp> = [(p("II"), 0.94), (p("ZZ"), 0.044), (p("ZI"), 0.016)]
            .into_iter()
            .collect();
        let lam = wht_probs_to_eigenvalues(&table, 2).unwrap();
        // ZZ commutes with XX, so only ZI flips the sign there.
        assert!((lam[&p("XX")] - 0.968).abs() < 1e-14);
        assert!((lam[&p("XI")] - 0.88).abs() < 1e-14);
        assert!((lam[&p("YI")] - 0.88).abs() < 1e-14);
        assert!((lam[&p("ZZ")] - 1.0).abs() < 1e-14);
        for q in PauliOp::all(2) {
            let direct = pauli_eigenvalue(&table, &q).unwrap();
            assert!((lam[&q] - direct).abs() < 1e-14, "{q}");
        }
    }

    #[test]
    fn noiseless_transforms() {
        let lam = wht_probs_to_eigenvalues(&ProbTable::identity_channel(2), 2).unwrap();
        assert!(lam.values().all(|&v| v == 1.0));
        let back = wht_eigenvalues_to_probs(&lam, 2).unwrap();
        assert_eq!(back.get(&PauliOp::identity(2)), 1.0);
        assert!(back
            .iter()
            .filter(|(k, _)| !k.is_identity())
            .all(|(_, v)| v == 0.0));
    }

    #[test]
    fn normalization_and_missing_key_errors() {
        let table: ProbTable<PauliOp> = [(p("I"), 0.8)].into_iter().collect();
        assert!(matches!(
            wht_probs_to_eigenvalues(&table, 1),
            Err(Error::Normalization { .. })
        ));
        let mut lam = BTreeMap::new();
        lam.insert(p("I"), 1.0);
        assert!(matches!(
            wht_eigenvalues_to_probs(&lam, 1),
            Err(Error::MissingKey(_))
        ));
    }

    #[test]
    fn binary_fourier_fixture() {
        let lam: BTreeMap<_, _> = [
            (FlipPatternPair::new(0, 0), 0.9),
            (FlipPatternPair::new(1, 0), 0.05),
            (FlipPatternPair::new(0, 1), 0.03),
            (FlipPatternPair::new(1, 1), 0.02),
        ]
        .into_iter()
        .collect();
        let t = binary_fourier(&lam, 1).unwrap();
        let at = |c: u64, c2: u64| t[&(ZMask::new(1, c).unwrap(), ZMask::new(1, c2).unwrap())];
        assert!((at(0, 0) - 1.0).abs() < 1e-15);
        assert!((at(1, 0) - 0.86).abs() < 1e-15);
        assert!((at(0, 1) - 0.90).abs() < 1e-15);
        assert!((at(1, 1) - 0.84).abs() < 1e-15);
        let sum: f64 = t.values().sum();
        assert!((sum / 4.0 - 0.9).abs() < 1e-15);
        let back = inverse_binary_fourier(&t, 1).unwrap();
        assert!((back[&FlipPatternPair::new(1, 0)] - 0.05).abs() < 1e-15);

        let noiseless: BTreeMap<_, _> = [(FlipPatternPair::NONE, 1.0)].into_iter().collect();
        assert!(binary_fourier(&noiseless, 2).unwrap().values().all(|&v| v == 1.0));
    }

    #[test]
    fn convolution_composes_errors() {
        let a: ProbTable<PauliOp> = [(p("I"), 0.9), (p("X"), 0.1)].into_iter().collect();
        let b: ProbTable<PauliOp> = [(p("I"), 0.8), (p("Z"), 0.2)].into_iter().collect();
        let c = a.convolve(&b).unwrap();
        assert!((c.get(&p("Y")) - 0.02).abs() < 1e-15);
        assert!((c.total() - 1.0).abs() < 1e-15);
    }
}
