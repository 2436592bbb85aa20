//! Clifford gates and their action on signed Pauli operators.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Gate {
    I,
    X,
    Y,
    Z,
    H,
    S,
    #[serde(alias = "SDAG")]
    Sdg,
    #[serde(alias = "CNOT")]
    Cx,
    Cz,
    Swap,
}

impl Gate {
    pub fn arity(self) -> usize {
        match self {
            Gate::Cx | Gate::Cz | Gate::Swap => 2,
            _ => 1,
        }
    }

    pub fn inverse(self) -> Gate {
        match self {
            Gate::S => Gate::Sdg,
            Gate::Sdg => Gate::S,
            g => g,
        }
    }

    pub fn is_pauli(self) -> bool {
        matches!(self, Gate::I | Gate::X | Gate::Y | Gate::Z)
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::I => "I",
            Gate::X => "X",
            Gate::Y => "Y",
            Gate::Z => "Z",
            Gate::H => "H",
            Gate::S => "S",
            Gate::Sdg => "SDG",
            Gate::Cx => "CX",
            Gate::Cz => "CZ",
            Gate::Swap => "SWAP",
        }
    }

    pub fn parse(name: &str) -> Result<Gate> {
        Ok(match name.to_ascii_uppercase().as_str() {
            "I" | "ID" => Gate::I,
            "X" => Gate::X,
            "Y" => Gate::Y,
            "Z" => Gate::Z,
            "H" => Gate::H,
            "S" => Gate::S,
            "SDG" | "SDAG" => Gate::Sdg,
            "CX" | "CNOT" => Gate::Cx,
            "CZ" => Gate::Cz,
            "SWAP" => Gate::Swap,
            _ => return Err(Error::InvalidCircuit(format!("unknown gate {name:?}"))),
        })
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A gate applied to specific qubits. For `CX` the first qubit is the control.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateApp {
    pub gate: Gate,
    pub qubits: Vec<usize>,
}

impl GateApp {
    pub fn new(gate: Gate, qubits: &[usize]) -> GateApp {
        GateApp {
            gate,
            qubits: qubits.to_vec(),
        }
    }

    pub fn one(gate: Gate, q: usize) -> GateApp {
        GateApp {
            gate,
            qubits: vec![q],
        }
    }

    pub fn two(gate: Gate, a: usize, b: usize) -> GateApp {
        GateApp {
            gate,
            qubits: vec![a, b],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.qubits.len() != self.gate.arity() {
            return Err(Error::InvalidCircuit(format!(
                "{} takes {} qubits, got {:?}",
                self.gate,
                self.gate.arity(),
                self.qubits
            )));
        }
        if let Some(&q) = self.qubits.iter().find(|&&q| q >= n) {
            return Err(Error::InvalidCircuit(format!("qubit {q} out of range for n={n}")));
        }
        if self.qubits.len() == 2 && self.qubits[0] == self.qubits[1] {
            return Err(Error::InvalidCircuit(format!(
                "{} on repeated qubit {}",
                self.gate, self.qubits[0]
            )));
        }
        Ok(())
    }

    /// Conjugates one packed row `(-1)^r X^x Z^z` (with `Y = iXZ`), i.e. maps
    /// `P` to `U P U^dagger`.
    #[inline]
    pub fn conjugate_row(&self, x: &mut u64, z: &mut u64, r: &mut bool) {
        let b = self.qubits.get(1).copied().unwrap_or(0);
        conjugate_row(self.gate, self.qubits[0], b, x, z, r);
    }
}

/// Conjugation of one packed row by `gate` on qubits `a` (and `b` for
/// two-qubit gates; `a` is the control of `CX`).
#[inline]
pub fn conjugate_row(gate: Gate, a: usize, b: usize, x: &mut u64, z: &mut u64, r: &mut bool) {
    match gate {
        Gate::I => {}
        Gate::X => *r ^= bit(*z, a),
        Gate::Z => *r ^= bit(*x, a),
        Gate::Y => *r ^= bit(*x, a) ^ bit(*z, a),
        Gate::H => {
            let (xa, za) = (bit(*x, a), bit(*z, a));
            *r ^= xa & za;
            set(x, a, za);
            set(z, a, xa);
        }
        Gate::S => {
            let (xa, za) = (bit(*x, a), bit(*z, a));
            *r ^= xa & za;
            set(z, a, za ^ xa);
        }
        Gate::Sdg => {
            let (xa, za) = (bit(*x, a), bit(*z, a));
            *r ^= xa & !za;
            set(z, a, za ^ xa);
        }
        Gate::Cx => {
            let t = b;
            let (xc, zc, xt, zt) = (bit(*x, a), bit(*z, a), bit(*x, t), bit(*z, t));
            *r ^= xc & zt & !(xt ^ zc);
            set(x, t, xt ^ xc);
            set(z, a, zc ^ zt);
        }
        Gate::Cz => {
            let (xa, za, xb, zb) = (bit(*x, a), bit(*z, a), bit(*x, b), bit(*z, b));
            *r ^= xa & xb & (za ^ zb);
            set(z, a, za ^ xb);
            set(z, b, zb ^ xa);
        }
        Gate::Swap => {
            let (xa, za, xb, zb) = (bit(*x, a), bit(*z, a), bit(*x, b), bit(*z, b));
            set(x, a, xb);
            set(x, b, xa);
            set(z, a, zb);
            set(z, b, za);
        }
    }
}

#[inline]
fn bit(w: u64, i: usize) -> bool {
    (w >> i) & 1 == 1
}

#[inline]
fn set(w: &mut u64, i: usize, v: bool) {
    *w = (*w & !(1 << i)) | ((v as u64) << i);
}

/// Pauli operator with a sign bit: `(-1)^negative P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignedPauli {
    pub pauli: PauliOp,
    pub negative: bool,
}

impl SignedPauli {
    pub fn positive(pauli: PauliOp) -> SignedPauli {
        SignedPauli {
            pauli,
            negative: false,
        }
    }

    pub fn sign(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }
}

/// Conjugates `p` by the gate sequence `gates` (first gate applied first):
/// returns `U P U^dagger` with `U = g_k ... g_1`.
pub fn conjugate(gates: &[GateApp], p: &PauliOp) -> Result<SignedPauli> {
    let n = p.num_qubits();
    let (mut x, mut z, mut r) = (p.x(), p.z(), false);
    for g in gates {
        g.validate(n)?;
        g.conjugate_row(&mut x, &mut z, &mut r);
    }
    Ok(SignedPauli {
        pauli: PauliOp::from_bits(n, x, z),
        negative: r,
    })
}

/// Unsigned image `V[P]`.
pub fn conjugate_unsigned(gates: &[GateApp], p: &PauliOp) -> Result<PauliOp> {
    conjugate(gates, p).map(|s| s.pauli)
}

/// Gate sequence implementing `U^dagger` for `U = gates`.
pub fn inverse(gates: &[GateApp]) -> Vec<GateApp> {
    gates
        .iter()
        .rev()
        .map(|g| GateApp {
            gate: g.gate.inverse(),
            qubits: g.qubits.clone(),
        })
        .collect()
}

/// Relabels gate qubits via `map[local] = global`.
pub fn remap(gates: &[GateApp], map: &[usize]) -> Vec<GateApp> {
    gates
        .iter()
        .map(|g| GateApp {
            gate: g.gate,
            qubits: g.qubits.iter().map(|&q| map[q]).collect(),
        })
        .collect()
}

/// Single-qubit Pauli gates realizing the operator `p` (one gate per non-identity qubit).
pub fn pauli_gates(p: &PauliOp) -> Vec<GateApp> {
    (0..p.num_qubits())
        .filter_map(|q| {
            let g = match p.letter(q) {
                crate::pauli::Letter::I => return None,
                crate::pauli::Letter::X => Gate::X,
                crate::pauli::Letter::Y => Gate::Y,
                crate::pauli::Letter::Z => Gate::Z,
            };
            Some(GateApp::one(g, q))
        })
        .collect()
}
