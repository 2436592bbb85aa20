//! Aaronson-Gottesman stabilizer tableau on up to 64 qubits.
//!
//! Rows `0..n` are destabilizers, rows `n..2n` stabilizers and row `2n` is
//! scratch space. Each row holds `(-1)^r X^x Z^z` with `Y = iXZ`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{conjugate_row, Gate, GateApp};
use crate::error::{Error, Result};
use crate::pauli::{PauliOp, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Row {
    x: u64,
    z: u64,
    r: bool,
}

impl Row {
    #[inline]
    fn anticommutes(&self, x: u64, z: u64) -> bool {
        ((self.x & z) ^ (self.z & x)).count_ones() & 1 == 1
    }
}

/// Sign of the product `src * dst` given both are Hermitian Paulis whose
/// product is Hermitian: returns the new `r` of `dst`.
#[inline]
fn product_sign(src: &Row, dst: &Row) -> bool {
    let (x1, z1, x2, z2) = (src.x, src.z, dst.x, dst.z);
    let plus = (x1 & z1 & z2 & !x2) | (x1 & !z1 & z2 & x2) | (!x1 & z1 & x2 & !z2);
    let minus = (x1 & z1 & x2 & !z2) | (x1 & !z1 & z2 & !x2) | (!x1 & z1 & x2 & z2);
    let total = 2 * (src.r as i32 + dst.r as i32) + plus.count_ones() as i32 - minus.count_ones() as i32;
    total.rem_euclid(4) == 2
}

#[inline]
fn row_mul(dst: &mut Row, src: &Row) {
    dst.r = product_sign(src, dst);
    dst.x ^= src.x;
    dst.z ^= src.z;
}

/// Single-qubit stabilizer states available for product preparation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrepState {
    #[serde(rename = "+Z")]
    ZPlus,
    #[serde(rename = "-Z")]
    ZMinus,
    #[serde(rename = "+X")]
    XPlus,
    #[serde(rename = "-X")]
    XMinus,
    #[serde(rename = "+Y")]
    YPlus,
    #[serde(rename = "-Y")]
    YMinus,
}

impl PrepState {
    /// Gates preparing the state from `|0>`, first gate first.
    pub fn gates(self) -> &'static [Gate] {
        match self {
            PrepState::ZPlus => &[],
            PrepState::ZMinus => &[Gate::X],
            PrepState::XPlus => &[Gate::H],
            PrepState::XMinus => &[Gate::X, Gate::H],
            PrepState::YPlus => &[Gate::H, Gate::S],
            PrepState::YMinus => &[Gate::X, Gate::H, Gate::S],
        }
    }

    /// Stabilizing Pauli letter and sign.
    pub fn from_letter(letter: crate::pauli::Letter, negative: bool) -> PrepState {
        use crate::pauli::Letter;
        match (letter, negative) {
            (Letter::I | Letter::Z, false) => PrepState::ZPlus,
            (Letter::I | Letter::Z, true) => PrepState::ZMinus,
            (Letter::X, false) => PrepState::XPlus,
            (Letter::X, true) => PrepState::XMinus,
            (Letter::Y, false) => PrepState::YPlus,
            (Letter::Y, true) => PrepState::YMinus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tableau {
    n: usize,
    rows: Vec<Row>,
}

impl Tableau {
    /// The all-zero state `|0...0>`.
    pub fn new(n: usize) -> Result<Tableau> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Dimension(format!(
                "tableau needs 1..={MAX_QUBITS} qubits, got {n}"
            )));
        }
        let mut t = Tableau {
            n,
            rows: vec![Row::default(); 2 * n + 1],
        };
        t.reset();
        Ok(t)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn reset(&mut self) {
        let n = self.n;
        for i in 0..n {
            self.rows[i] = Row {
                x: 1 << i,
                z: 0,
                r: false,
            };
            self.rows[n + i] = Row {
                x: 0,
                z: 1 << i,
                r: false,
            };
        }
        self.rows[2 * n] = Row::default();
    }

    /// Resets and prepares a product of single-qubit stabilizer states.
    pub fn prepare(&mut self, states: &[PrepState]) -> Result<()> {
        if states.len() != self.n {
            return Err(Error::Dimension(format!(
                "{} prep states for {} qubits",
                states.len(),
                self.n
            )));
        }
        self.reset();
        for (q, s) in states.iter().enumerate() {
            for &g in s.gates() {
                self.apply_1q(g, q);
            }
        }
        Ok(())
    }

    #[inline]
    fn apply_1q(&mut self, gate: Gate, q: usize) {
        self.apply_raw(gate, q, 0);
    }

    /// Applies `gate` on `a` (and `b` for two-qubit gates) without validation.
    #[inline]
    pub fn apply_raw(&mut self, gate: Gate, a: usize, b: usize) {
        let two = 2 * self.n;
        for row in &mut self.rows[..two] {
            conjugate_row(gate, a, b, &mut row.x, &mut row.z, &mut row.r);
        }
    }

    /// Applies a gate after validating its qubits.
    pub fn apply(&mut self, g: &GateApp) -> Result<()> {
        g.validate(self.n)?;
        self.apply_unchecked(g);
        Ok(())
    }

    /// Applies a gate whose qubits are already known to be valid.
    #[inline]
    pub fn apply_unchecked(&mut self, g: &GateApp) {
        let b = g.qubits.get(1).copied().unwrap_or(0);
        self.apply_raw(g.gate, g.qubits[0], b);
    }

    /// Applies the Pauli operator `X^x Z^z` to the state.
    #[inline]
    pub fn apply_pauli(&mut self, x: u64, z: u64) {
        if x == 0 && z == 0 {
            return;
        }
        let n = self.n;
        for row in &mut self.rows[n..2 * n] {
            if row.anticommutes(x, z) {
                row.r = !row.r;
            }
        }
    }

    pub fn apply_pauli_op(&mut self, p: &PauliOp) {
        self.apply_pauli(p.x(), p.z());
    }

    /// Outcome of a Z measurement on `q` if it is deterministic.
    pub fn peek_z(&mut self, q: usize) -> Option<bool> {
        let n = self.n;
        let bit = 1u64 << q;
        if self.rows[n..2 * n].iter().any(|r| r.x & bit != 0) {
            return None;
        }
        let mut acc = Row::default();
        for i in 0..n {
            if self.rows[i].x & bit != 0 {
                let src = self.rows[n + i];
                row_mul(&mut acc, &src);
            }
        }
        Some(acc.r)
    }

    /// Measures `Z_q`, returning the outcome bit (`true` for `-1`).
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> bool {
        let n = self.n;
        let bit = 1u64 << q;
        let Some(p) = (n..2 * n).find(|&i| self.rows[i].x & bit != 0) else {
            return self.peek_z(q).expect("deterministic branch");
        };
        let pivot = self.rows[p];
        for i in 0..2 * n {
            if i != p && self.rows[i].x & bit != 0 {
                row_mul(&mut self.rows[i], &pivot);
            }
        }
        self.rows[p - n] = pivot;
        let outcome: bool = rng.gen();
        self.rows[p] = Row {
            x: 0,
            z: bit,
            r: outcome,
        };
        outcome
    }

    /// Expectation of a Pauli observable: `Some(+-1)` when it is in the
    /// stabilizer group up to sign, `None` when the expectation is 0.
    pub fn pauli_expectation(&self, p: &PauliOp) -> Option<i8> {
        let n = self.n;
        let (x, z) = (p.x(), p.z());
        if self.rows[n..2 * n].iter().any(|r| r.anticommutes(x, z)) {
            return None;
        }
        let mut acc = Row::default();
        for i in 0..n {
            if self.rows[i].anticommutes(x, z) {
                let src = self.rows[n + i];
                row_mul(&mut acc, &src);
            }
        }
        debug_assert!(acc.x == x && acc.z == z);
        // Rows use per-qubit Y letters, so acc is exactly (-1)^r P.
        Some(if acc.r { -1 } else { 1 })
    }
}
