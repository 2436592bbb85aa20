//! Benchmark circuits and per-shot analysis.
//!
//! A circuit for unmeasured-register Pauli `P` prepares a random eigenstate of
//! `P (x) Z...Z`, runs `d` independently compiled copies of the layer, rotates
//! `P` to Z type and measures every qubit. One circuit serves every
//! `(c1, c2)` analysis for its `P`, since all `Z(c1)` stabilize the prepared
//! state on the measured register.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitIR, Instruction, ShotRecord, Simulator};
use crate::clifford::{Gate, GateApp};
use crate::error::{Error, Result};
use crate::noise::{MCMLayerSpec, RawInstrumentModel};
use crate::pauli::{parity, Letter, PauliOp, ProbTable};
use crate::rc::{append_compiled_layer, compile_rc_layer, merge_adjacent_pauli_layers, RcOptions};
use crate::rng::ShotSeed;
use crate::tableau::PrepState;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepLayer {
    pub states: Vec<PrepState>,
    /// True if the prepared state has eigenvalue -1 for `P (x) Z...Z`.
    pub negative: bool,
}

/// Random eigenstate of `P (x) Z...Z`; `p` acts on the unmeasured register.
pub fn build_prep_layer<R: Rng + ?Sized>(
    layer: &MCMLayerSpec,
    p: &PauliOp,
    rng: &mut R,
) -> Result<PrepLayer> {
    check_unmeasured(layer, p)?;
    let mut states = vec![PrepState::ZPlus; layer.n];
    let mut negative = false;
    for (j, q) in layer.unmeasured().into_iter().enumerate() {
        let neg: bool = rng.gen();
        let letter = p.letter(j);
        if letter != Letter::I {
            negative ^= neg;
        }
        let letter = if letter == Letter::I { Letter::Z } else { letter };
        states[q] = PrepState::from_letter(letter, neg);
    }
    for &q in &layer.measured {
        let neg: bool = rng.gen();
        negative ^= neg;
        states[q] = PrepState::from_letter(Letter::Z, neg);
    }
    Ok(PrepLayer { states, negative })
}

/// Gates rotating `p` to a Z-type Pauli, and that Pauli's support `t_f` over
/// the local unmeasured index.
pub fn build_final_layer(layer: &MCMLayerSpec, p: &PauliOp) -> Result<(Vec<GateApp>, u64)> {
    check_unmeasured(layer, p)?;
    let mut gates = Vec::new();
    for (j, q) in layer.unmeasured().into_iter().enumerate() {
        match p.letter(j) {
            Letter::X => gates.push(GateApp::one(Gate::H, q)),
            Letter::Y => {
                gates.push(GateApp::one(Gate::Sdg, q));
                gates.push(GateApp::one(Gate::H, q));
            }
            Letter::Z | Letter::I => {}
        }
    }
    Ok((gates, p.support()))
}

fn check_unmeasured(layer: &MCMLayerSpec, p: &PauliOp) -> Result<()> {
    if p.num_qubits() != layer.k() {
        return Err(Error::Dimension(format!(
            "Pauli {p} has {} qubits, unmeasured register has {}",
            p.num_qubits(),
            layer.k()
        )));
    }
    Ok(())
}

/// Global n-bit mask of the final-measurement parity: `t_f` on the unmeasured
/// qubits and `c1` on the measured ones.
pub fn final_mask(layer: &MCMLayerSpec, t_f: u64, c1: u64) -> u64 {
    let mut mask = 0u64;
    for (j, q) in layer.unmeasured().into_iter().enumerate() {
        mask |= ((t_f >> j) & 1) << q;
    }
    for (j, &q) in layer.measured.iter().enumerate() {
        mask |= ((c1 >> j) & 1) << q;
    }
    mask
}

/// Depths must be even multiples of the order of `V`.
pub fn validate_depth(layer: &MCMLayerSpec, depth: usize) -> Result<()> {
    let order = layer.v_order()?;
    if depth % 2 != 0 || depth % order != 0 {
        return Err(Error::InvalidArgument(format!(
            "depth {depth} is not a multiple of the V order {order}"
        )));
    }
    Ok(())
}

/// A benchmark circuit with the noiseless reference needed for `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubexperimentCircuit {
    pub p: PauliOp,
    pub depth: usize,
    pub circuit: CircuitIR,
    pub t_f: u64,
    /// Final bits of the noiseless reference execution.
    pub ref_final: u64,
    /// XOR of every recorded MCM outcome in the reference execution.
    pub ref_mcm_xor: u64,
}

impl SubexperimentCircuit {
    /// Sign bit making the noiseless signed outcome `+1` for the analysis
    /// with measured-register masks `c1` and `t_mcm`.
    pub fn t0(&self, layer: &MCMLayerSpec, c1: u64, t_mcm: u64) -> bool {
        parity(final_mask(layer, self.t_f, c1) & self.ref_final) ^ parity(self.ref_mcm_xor & t_mcm)
    }
}

/// Builds one depth-`depth` circuit for `p` under `model`.
pub fn build_subexperiment_circuit<R: Rng + ?Sized>(
    model: &RawInstrumentModel,
    p: &PauliOp,
    depth: usize,
    opts: &RcOptions,
    rng: &mut R,
) -> Result<SubexperimentCircuit> {
    let layer = &model.layer;
    validate_depth(layer, depth)?;
    let n = layer.n;
    let prep = build_prep_layer(layer, p, rng)?;
    let mut c = CircuitIR::new(n);
    c.push(Instruction::Prep { states: prep.states });
    for q in 0..n {
        let f = model.spam.prep_flip(q);
        if f > 0.0 {
            let ch = c.add_channel(flip_channel(f));
            c.push(Instruction::Noise {
                qubits: vec![q],
                channel: ch,
            });
        }
    }
    for j in 0..depth {
        let compiled = compile_rc_layer(layer, rng)?;
        append_compiled_layer(&mut c, model, &compiled, &format!("m{j}"), opts);
    }
    let (gates, t_f) = build_final_layer(layer, p)?;
    for g in &gates {
        c.push_gate(g);
    }
    let readout_flip = if model.spam.meas.iter().any(|&f| f > 0.0) {
        (0..n).map(|q| model.spam.meas_flip(q)).collect()
    } else {
        Vec::new()
    };
    c.push(Instruction::FinalMeasure {
        tag: "final".into(),
        readout_flip,
    });
    let circuit = merge_adjacent_pauli_layers(&c);
    let reference = Simulator::new(&circuit)?.run_noiseless(ShotSeed {
        master: 0,
        circuit: 0,
        shot: 0,
    });
    debug_assert!(!reference.random_mcm);
    let ref_mcm_xor = reference.record.mcm.iter().fold(0, |acc, b| acc ^ b);
    Ok(SubexperimentCircuit {
        p: *p,
        depth,
        circuit,
        t_f,
        ref_final: reference.record.final_bits,
        ref_mcm_xor,
    })
}

fn flip_channel(p: f64) -> ProbTable<PauliOp> {
    [
        (PauliOp::identity(1), 1.0 - p),
        (PauliOp::single(1, 0, Letter::X), p),
    ]
    .into_iter()
    .collect()
}

/// Signed outcome `(-1)^(mask.b_f + t0) prod_i (-1)^(b_i . t_mcm)`.
pub fn analyze_shot(shot: &ShotRecord, layer: &MCMLayerSpec, t_f: u64, c1: u64, t_mcm: u64, t0: bool) -> i8 {
    let mcm_xor = shot.mcm.iter().fold(0, |acc, b| acc ^ b);
    signed_outcome(final_mask(layer, t_f, c1), shot.final_bits, mcm_xor, t_mcm, t0)
}

#[inline]
pub(crate) fn signed_outcome(mask: u64, final_bits: u64, mcm_xor: u64, t_mcm: u64, t0: bool) -> i8 {
    if parity(mask & final_bits) ^ parity(mcm_xor & t_mcm) ^ t0 {
        -1
    } else {
        1
    }
}
