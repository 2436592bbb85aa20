//! MCM layers, uniform stochastic instruments (USIs), raw error models and
//! the closed-form fidelity and parameter formulas built on them.
//!
//! Measured qubits are indexed locally by their position in
//! [`MCMLayerSpec::measured`]; unmeasured qubits by their position in the
//! sorted complement. Flip patterns `a`, `b` and Z-masks `c` are bit masks
//! over the local measured index.

mod sampler;

pub use sampler::{sample_random_usi, sample_spam, NamedModel, SamplerConfig, SpamConfig, TermCount};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clifford::{self, GateApp};
use crate::error::{Error, Result};
use crate::pauli::{self, low_mask, parity, FlipPatternPair, PauliOp, ProbTable, ZMask, PROB_TOL};

/// Largest `l` tried when searching for the order of `V`.
const MAX_V_ORDER: usize = 1 << 12;

/// An MCM layer: Z measurements on `measured`, Clifford `V` on the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCMLayerSpec {
    pub n: usize,
    pub measured: Vec<usize>,
    #[serde(default)]
    pub v_gates: Vec<GateApp>,
}

impl MCMLayerSpec {
    pub fn new(n: usize, measured: Vec<usize>, v_gates: Vec<GateApp>) -> Result<MCMLayerSpec> {
        let l = MCMLayerSpec { n, measured, v_gates };
        l.validate()?;
        Ok(l)
    }

    /// Idle layer measuring the last `m` of `n` qubits.
    pub fn idle(n: usize, m: usize) -> Result<MCMLayerSpec> {
        if m > n {
            return Err(Error::InvalidLayer(format!("m={m} exceeds n={n}")));
        }
        MCMLayerSpec::new(n, (n - m..n).collect(), vec![])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > pauli::MAX_QUBITS {
            return Err(Error::InvalidLayer(format!("n={} out of range", self.n)));
        }
        let mut seen = 0u64;
        for &q in &self.measured {
            if q >= self.n {
                return Err(Error::InvalidLayer(format!("measured qubit {q} out of range")));
            }
            if seen & (1 << q) != 0 {
                return Err(Error::InvalidLayer(format!("measured qubit {q} repeated")));
            }
            seen |= 1 << q;
        }
        for g in &self.v_gates {
            g.validate(self.n)
                .map_err(|e| Error::InvalidLayer(e.to_string()))?;
            if let Some(q) = g.qubits.iter().find(|&&q| seen & (1 << q) != 0) {
                return Err(Error::InvalidLayer(format!(
                    "{} acts on measured qubit {q}",
                    g.gate
                )));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.measured.len()
    }

    /// Number of unmeasured qubits `n - m`.
    pub fn k(&self) -> usize {
        self.n - self.m()
    }

    pub fn measured_mask(&self) -> u64 {
        self.measured.iter().fold(0, |acc, &q| acc | 1 << q)
    }

    pub fn unmeasured(&self) -> Vec<usize> {
        let mm = self.measured_mask();
        (0..self.n).filter(|q| mm & (1 << q) == 0).collect()
    }

    /// `V` acting on the local unmeasured register.
    pub fn v_local(&self) -> Vec<GateApp> {
        let mut to_local = vec![usize::MAX; self.n];
        for (i, q) in self.unmeasured().into_iter().enumerate() {
            to_local[q] = i;
        }
        clifford::remap(&self.v_gates, &to_local)
    }

    /// Splits an n-qubit Pauli into (measured part, unmeasured part).
    pub fn split(&self, p: &PauliOp) -> (PauliOp, PauliOp) {
        (p.restrict(&self.measured), p.restrict(&self.unmeasured()))
    }

    /// Joins a measured part and an unmeasured part into an n-qubit Pauli.
    pub fn join(&self, meas: &PauliOp, unmeas: &PauliOp) -> PauliOp {
        let a = meas.embed(&self.measured, self.n);
        let b = unmeas.embed(&self.unmeasured(), self.n);
        a.compose(&b).expect("same width")
    }

    /// Unsigned image `V^j[P]` of an unmeasured-register Pauli.
    pub fn v_power(&self, p: &PauliOp, j: usize) -> Result<PauliOp> {
        let v = self.v_local();
        let mut cur = *p;
        for _ in 0..j {
            cur = clifford::conjugate_unsigned(&v, &cur)?;
        }
        Ok(cur)
    }

    /// Smallest positive even `l` with `V^l = I` up to global phase.
    pub fn v_order(&self) -> Result<usize> {
        let k = self.k();
        if k == 0 || self.v_gates.is_empty() {
            return Ok(2);
        }
        let v = self.v_local();
        let gens: Vec<PauliOp> = (0..k)
            .flat_map(|q| {
                [
                    PauliOp::single(k, q, pauli::Letter::X),
                    PauliOp::single(k, q, pauli::Letter::Z),
                ]
            })
            .collect();
        let mut cur: Vec<clifford::SignedPauli> =
            gens.iter().map(|&p| clifford::SignedPauli::positive(p)).collect();
        for l in 1..=MAX_V_ORDER {
            for s in cur.iter_mut() {
                let img = clifford::conjugate(&v, &s.pauli)?;
                *s = clifford::SignedPauli {
                    pauli: img.pauli,
                    negative: img.negative ^ s.negative,
                };
            }
            if l % 2 == 0 && cur.iter().zip(&gens).all(|(s, g)| !s.negative && s.pauli == *g) {
                return Ok(l);
            }
        }
        Err(Error::InvalidLayer(format!("order of V exceeds {MAX_V_ORDER}")))
    }
}

/// Key `(a, b, Q)` of a USI distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UsiKey {
    pub a: u64,
    pub b: u64,
    pub q: PauliOp,
}

/// A uniform stochastic instrument: a distribution over pre-flip `a`,
/// post-flip `b` and unmeasured Pauli error `Q`, together with the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Usi {
    layer: MCMLayerSpec,
    q: ProbTable<UsiKey>,
}

#[derive(Serialize, Deserialize)]
struct UsiEntry {
    a: ZMask,
    b: ZMask,
    q: PauliOp,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct UsiRepr {
    layer: MCMLayerSpec,
    terms: Vec<UsiEntry>,
}

impl Serialize for Usi {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.layer.m();
        let terms = self
            .q
            .iter()
            .map(|(k, p)| UsiEntry {
                a: ZMask::new(m, k.a).expect("valid key"),
                b: ZMask::new(m, k.b).expect("valid key"),
                q: k.q,
                p,
            })
            .collect();
        UsiRepr {
            layer: self.layer.clone(),
            terms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Usi {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = UsiRepr::deserialize(d)?;
        let q = r
            .terms
            .into_iter()
            .map(|t| {
                (
                    UsiKey {
                        a: t.a.bits(),
                        b: t.b.bits(),
                        q: t.q,
                    },
                    t.p,
                )
            })
            .collect();
        Usi::new(r.layer, q).map_err(serde::de::Error::custom)
    }
}

impl Usi {
    pub fn new(layer: MCMLayerSpec, q: ProbTable<UsiKey>) -> Result<Usi> {
        layer.validate()?;
        let (m, k) = (layer.m(), layer.k());
        for key in q.keys() {
            if key.a & !low_mask(m) != 0 || key.b & !low_mask(m) != 0 || key.q.num_qubits() != k {
                return Err(Error::Dimension(format!(
                    "USI key {key:?} inconsistent with m={m}, n-m={k}"
                )));
            }
        }
        q.validate_distribution(PROB_TOL)?;
        Ok(Usi { layer, q })
    }

    pub fn noiseless(layer: MCMLayerSpec) -> Result<Usi> {
        let k = layer.k();
        Usi::new(
            layer,
            ProbTable::delta(UsiKey {
                a: 0,
                b: 0,
                q: PauliOp::identity(k),
            }),
        )
    }

    pub fn layer(&self) -> &MCMLayerSpec {
        &self.layer
    }

    pub fn table(&self) -> &ProbTable<UsiKey> {
        &self.q
    }

    pub fn m(&self) -> usize {
        self.layer.m()
    }

    pub fn k(&self) -> usize {
        self.layer.k()
    }

    pub fn prob(&self, a: u64, b: u64, q: &PauliOp) -> f64 {
        self.q.get(&UsiKey { a, b, q: *q })
    }
}

/// `lambda_{a,b,P} = sum_Q q_{a,b,Q} (-1)^<P,Q>`.
pub fn lambda_eigenvalue(u: &Usi, a: u64, b: u64, p: &PauliOp) -> Result<f64> {
    check_unmeasured(u, p)?;
    let mut acc = 0.0;
    for (key, w) in u.q.iter() {
        if key.a == a && key.b == b {
            acc += if pauli::symplectic(&key.q, p) { -w } else { w };
        }
    }
    Ok(acc)
}

/// Single Fourier parameter `lambda~_{P,(Z(c),Z(c'))}` by direct summation.
pub fn lambda_tilde(u: &Usi, p: &PauliOp, c: u64, c2: u64) -> Result<f64> {
    check_unmeasured(u, p)?;
    let mut acc = 0.0;
    for (key, w) in u.q.iter() {
        let odd = pauli::symplectic(&key.q, p) ^ parity(key.a & c) ^ parity(key.b & c2);
        acc += if odd { -w } else { w };
    }
    Ok(acc)
}

fn check_unmeasured(u: &Usi, p: &PauliOp) -> Result<()> {
    if p.num_qubits() != u.k() {
        return Err(Error::Dimension(format!(
            "P={p} on {} qubits, USI has n-m={}",
            p.num_qubits(),
            u.k()
        )));
    }
    Ok(())
}

/// Dense table of Fourier parameters over every `(P, c, c')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaTildeTable {
    pub m: usize,
    pub k: usize,
    entries: BTreeMap<(PauliOp, ZMask, ZMask), f64>,
}

impl LambdaTildeTable {
    pub fn get(&self, p: &PauliOp, c: u64, c2: u64) -> Option<f64> {
        let c = ZMask::new(self.m, c).ok()?;
        let c2 = ZMask::new(self.m, c2).ok()?;
        self.entries.get(&(*p, c, c2)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(PauliOp, ZMask, ZMask), f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// All Fourier parameters via one Pauli transform per flip class followed by
/// a binary Fourier transform per `P`.
pub fn lambda_tilde_table(u: &Usi) -> Result<LambdaTildeTable> {
    let (m, k) = (u.m(), u.k());
    let mut classes: BTreeMap<FlipPatternPair, Vec<(PauliOp, f64)>> = BTreeMap::new();
    for (key, w) in u.q.iter() {
        classes
            .entry(FlipPatternPair::new(key.a, key.b))
            .or_default()
            .push((key.q, w));
    }
    let mut lambdas: Vec<(FlipPatternPair, Vec<f64>)> = Vec::with_capacity(classes.len());
    for (ab, terms) in &classes {
        lambdas.push((
            *ab,
            pauli::pauli_transform_dense(terms.iter().map(|(q, w)| (q, *w)), k)?,
        ));
    }
    let mut entries = BTreeMap::new();
    for pi in 0..1usize << (2 * k) {
        let p = PauliOp::from_index(k, pi);
        let per_ab: BTreeMap<FlipPatternPair, f64> = lambdas.iter().map(|(ab, v)| (*ab, v[pi])).collect();
        for ((c, c2), v) in pauli::binary_fourier(&per_ab, m)? {
            entries.insert((p, c, c2), v);
        }
    }
    entries.insert(
        (PauliOp::identity(k), ZMask::identity(m), ZMask::identity(m)),
        1.0,
    );
    Ok(LambdaTildeTable { m, k, entries })
}

/// Process fidelity `q_{(0,0,I)}` of a USI.
pub fn usi_fidelity(u: &Usi) -> f64 {
    u.prob(0, 0, &PauliOp::identity(u.k()))
}

/// The same fidelity from the Fourier parameters, `4^-n sum lambda~`.
pub fn usi_fidelity_from_tilde(t: &LambdaTildeTable) -> f64 {
    let n = t.k + t.m;
    t.iter().map(|(_, v)| v).sum::<f64>() / 4f64.powi(n as i32)
}

/// Outcome-conditioned post-measurement error, applied when the raw MCM
/// outcome `k` satisfies `k & mask == value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedError {
    pub mask: ZMask,
    pub value: ZMask,
    pub errors: ProbTable<PauliOp>,
}

impl ConditionedError {
    pub fn applies(&self, outcome: u64) -> bool {
        outcome & self.mask.bits() == self.value.bits()
    }
}

/// Per-qubit bit flip probabilities right after preparation and right before
/// final readout. Empty vectors mean no SPAM error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Spam {
    #[serde(default)]
    pub prep: Vec<f64>,
    #[serde(default)]
    pub meas: Vec<f64>,
}

impl Spam {
    pub fn prep_flip(&self, q: usize) -> f64 {
        self.prep.get(q).copied().unwrap_or(0.0)
    }

    pub fn meas_flip(&self, q: usize) -> f64 {
        self.meas.get(q).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.prep.iter().chain(&self.meas).all(|&p| p == 0.0)
    }
}

/// Layer error model `E_post (T (x) I) L E_pre`, optionally with
/// outcome-conditioned errors, plus SPAM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInstrumentModel {
    #[serde(flatten)]
    pub layer: MCMLayerSpec,
    pub e_pre: ProbTable<PauliOp>,
    pub t_mid: ProbTable<PauliOp>,
    pub e_post: ProbTable<PauliOp>,
    #[serde(default)]
    pub conditioned: Vec<ConditionedError>,
    #[serde(default)]
    pub spam: Spam,
}

#[derive(Deserialize)]
struct ModelFile {
    m: Option<usize>,
    #[serde(flatten)]
    model: RawInstrumentModel,
}

impl RawInstrumentModel {
    pub fn noiseless(layer: MCMLayerSpec) -> RawInstrumentModel {
        let (n, k) = (layer.n, layer.k());
        RawInstrumentModel {
            layer,
            e_pre: ProbTable::identity_channel(n),
            t_mid: ProbTable::identity_channel(k),
            e_post: ProbTable::identity_channel(n),
            conditioned: vec![],
            spam: Spam::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layer.validate()?;
        let (n, m, k) = (self.layer.n, self.layer.m(), self.layer.k());
        let check = |name: &str, t: &ProbTable<PauliOp>, width: usize| -> Result<()> {
            if let Some(p) = t.keys().find(|p| p.num_qubits() != width) {
                return Err(Error::Dimension(format!(
                    "{name} key {p} is not on {width} qubits"
                )));
            }
            t.validate_distribution(PROB_TOL)
        };
        check("e_pre", &self.e_pre, n)?;
        check("t_mid", &self.t_mid, k)?;
        check("e_post", &self.e_post, n)?;
        for c in &self.conditioned {
            if c.mask.len() != m || c.value.len() != m {
                return Err(Error::Dimension(format!("conditioned predicate not on {m} bits")));
            }
            check("conditioned", &c.errors, n)?;
        }
        for &p in self.spam.prep.iter().chain(&self.spam.meas) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("SPAM flip probability {p}")));
            }
        }
        if (!self.spam.prep.is_empty() && self.spam.prep.len() != n)
            || (!self.spam.meas.is_empty() && self.spam.meas.len() != n)
        {
            return Err(Error::Dimension(format!("SPAM vectors must have {n} entries")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<RawInstrumentModel> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(m) = f.m {
            if m != f.model.layer.m() {
                return Err(Error::Dimension(format!(
                    "m={m} but {} measured qubits listed",
                    f.model.layer.m()
                )));
            }
        }
        f.model.validate()?;
        Ok(f.model)
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("model serializes");
        v["m"] = serde_json::json!(self.layer.m());
        serde_json::to_string_pretty(&v).expect("value serializes")
    }
}

/// Convolves an n-qubit post-measurement error table into a USI table.
fn convolve_post(layer: &MCMLayerSpec, acc: &ProbTable<UsiKey>, e: &ProbTable<PauliOp>) -> ProbTable<UsiKey> {
    let split: Vec<(u64, PauliOp, f64)> = e
        .iter()
        .map(|(p, w)| {
            let (meas, un) = layer.split(p);
            (meas.x(), un, w)
        })
        .collect();
    let mut out = ProbTable::new();
    for (key, w) in acc.iter() {
        for &(b, un, we) in &split {
            let q = PauliOp::from_bits(key.q.num_qubits(), key.q.x() ^ un.x(), key.q.z() ^ un.z());
            out.add(
                UsiKey {
                    a: key.a,
                    b: key.b ^ b,
                    q,
                },
                w * we,
            );
        }
    }
    out
}

/// USI table of the model with each conditioned error switched on or off.
fn branch_table(
    r: &RawInstrumentModel,
    active: impl Fn(&ConditionedError) -> bool,
) -> Result<ProbTable<UsiKey>> {
    let layer = &r.layer;
    let v = layer.v_local();
    let mut acc = ProbTable::new();
    for (e, w) in r.e_pre.iter() {
        let (meas, un) = layer.split(e);
        let q = clifford::conjugate_unsigned(&v, &un)?;
        acc.add(UsiKey { a: meas.x(), b: 0, q }, w);
    }
    let mut mid = ProbTable::new();
    for (key, w) in acc.iter() {
        for (t, wt) in r.t_mid.iter() {
            mid.add(
                UsiKey {
                    q: key.q.compose(t)?,
                    ..*key
                },
                w * wt,
            );
        }
    }
    let mut out = convolve_post(layer, &mid, &r.e_post);
    for c in r.conditioned.iter().filter(|c| active(c)) {
        out = convolve_post(layer, &out, &c.errors);
    }
    Ok(out)
}

/// Analytic twirl of an unconditioned raw model into its USI.
pub fn usi_from_raw(r: &RawInstrumentModel) -> Result<Usi> {
    if !r.conditioned.is_empty() {
        return Err(Error::Unsupported(
            "usi_from_raw needs a model without conditioned errors".into(),
        ));
    }
    r.validate()?;
    Usi::new(r.layer.clone(), branch_table(r, |_| false)?)
}

/// USI realized by randomized compiling of any model in the
/// classically-controlled class: the raw outcome seen by the conditioned
/// errors is uniform and independent of the record, so the result is the
/// average of the per-outcome branch tables.
pub fn twirled_usi(r: &RawInstrumentModel) -> Result<Usi> {
    r.validate()?;
    let m = r.layer.m();
    let scale = 1.0 / (1u64 << m) as f64;
    let mut total = ProbTable::new();
    for k in 0..1u64 << m {
        for (key, w) in branch_table(r, |c| c.applies(k))?.iter() {
            total.add(*key, w * scale);
        }
    }
    Usi::new(r.layer.clone(), total)
}

/// Probability of no error in each outcome branch `k` (conditioned errors
/// evaluated at `k`).
pub fn branch_no_error_probabilities(r: &RawInstrumentModel) -> Result<Vec<f64>> {
    r.validate()?;
    let m = r.layer.m();
    let id = UsiKey {
        a: 0,
        b: 0,
        q: PauliOp::identity(r.layer.k()),
    };
    (0..1u64 << m)
        .map(|k| Ok(branch_table(r, |c| c.applies(k))?.get(&id)))
        .collect()
}

/// Branch fidelities `F_k` normalized so that the ideal branch scores `4^-m`.
pub fn branch_fidelities(r: &RawInstrumentModel) -> Result<Vec<f64>> {
    let scale = 1.0 / 4f64.powi(r.layer.m() as i32);
    Ok(branch_no_error_probabilities(r)?
        .into_iter()
        .map(|p| p * scale)
        .collect())
}

/// Fidelity of the randomly compiled instrument: the average over outcomes
/// of the per-branch no-error probability.
pub fn rc_fidelity_from_raw(r: &RawInstrumentModel) -> Result<f64> {
    let p = branch_no_error_probabilities(r)?;
    Ok(p.iter().sum::<f64>() / p.len() as f64)
}

/// Instrument fidelity `(sum_k sqrt(F_k))^2`.
pub fn instrument_fidelity_eq3(r: &RawInstrumentModel) -> Result<f64> {
    let mut s = 0.0;
    for f in branch_fidelities(r)? {
        if f < 0.0 {
            log::warn!("negative branch fidelity {f}, clamped to 0");
        }
        s += f.max(0.0).sqrt();
    }
    Ok(s * s)
}

/// Factors `V` out of a USI: the returned instrument has the same q-table and
/// `V = I`, and its parameter at `V[P]` equals the original PTM element at `P`.
pub fn decompose_general_v(u: &Usi) -> (Usi, Vec<GateApp>) {
    let mut layer = u.layer.clone();
    let v = std::mem::take(&mut layer.v_gates);
    (
        Usi {
            layer,
            q: u.q.clone(),
        },
        v,
    )
}
