//! Randomized compiling of MCM layers.
//!
//! A compiled layer is `T0`, the noisy layer, then `T0'`. `T0` is a uniformly
//! random Pauli. On unmeasured qubits `T0'` is `V T0 V^dagger`, which undoes
//! `T0` through `V`; on measured qubits it repeats the X part of `T0` (undoing
//! the pre-measurement flip) times a uniformly random Z. Measured qubits where
//! `T0` has X or Y get their recorded outcome flipped.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitIR, Instruction};
use crate::clifford;
use crate::error::Result;
use crate::noise::{MCMLayerSpec, RawInstrumentModel};
use crate::pauli::{PauliOp, ProbTable, ZMask};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledLayer {
    pub pre: PauliOp,
    pub layer: MCMLayerSpec,
    pub post: PauliOp,
    pub flip_mask: ZMask,
}

/// Options for emitting compiled layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RcOptions {
    /// Single-qubit channel applied to every qubit after each twirl layer.
    #[serde(default)]
    pub twirl_noise: Option<ProbTable<PauliOp>>,
}

/// Builds the compiled layer for a given `T0` and random-Z mask (over the
/// local measured index).
pub fn compile_with(layer: &MCMLayerSpec, t0: PauliOp, z_bits: u64) -> Result<CompiledLayer> {
    let n = layer.n;
    let (meas, un) = layer.split(&t0);
    let un_post = clifford::conjugate_unsigned(&layer.v_local(), &un)?;
    let meas_post = PauliOp::from_bits(layer.m(), meas.x(), z_bits);
    let post = layer.join(&meas_post, &un_post);
    debug_assert_eq!(post.num_qubits(), n);
    Ok(CompiledLayer {
        pre: t0,
        layer: layer.clone(),
        post,
        flip_mask: ZMask::new(layer.m(), meas.x())?,
    })
}

pub fn compile_rc_layer<R: Rng + ?Sized>(layer: &MCMLayerSpec, rng: &mut R) -> Result<CompiledLayer> {
    let n = layer.n;
    let mask = crate::pauli::low_mask(n);
    let t0 = PauliOp::from_bits(n, rng.gen::<u64>() & mask, rng.gen::<u64>() & mask);
    let z_bits = rng.gen::<u64>() & crate::pauli::low_mask(layer.m());
    compile_with(layer, t0, z_bits)
}

/// Appends a compiled layer with the model's noise sites.
pub fn append_compiled_layer(
    c: &mut CircuitIR,
    model: &RawInstrumentModel,
    compiled: &CompiledLayer,
    tag: &str,
    opts: &RcOptions,
) {
    let layer = &model.layer;
    let all: Vec<usize> = (0..layer.n).collect();
    let unmeasured = layer.unmeasured();
    push_twirl(c, compiled.pre, opts);
    let pre = c.add_channel(model.e_pre.clone());
    c.push(Instruction::Noise {
        qubits: all.clone(),
        channel: pre,
    });
    for g in &layer.v_gates {
        c.push_gate(g);
    }
    if layer.m() > 0 {
        c.push(Instruction::Mcm {
            qubits: layer.measured.clone(),
            tag: tag.to_string(),
            flip_mask: Some(compiled.flip_mask),
        });
    }
    if !unmeasured.is_empty() {
        let mid = c.add_channel(model.t_mid.clone());
        c.push(Instruction::Noise {
            qubits: unmeasured,
            channel: mid,
        });
    }
    let post = c.add_channel(model.e_post.clone());
    c.push(Instruction::Noise {
        qubits: all.clone(),
        channel: post,
    });
    if layer.m() > 0 {
        for cond in &model.conditioned {
            let ch = c.add_channel(cond.errors.clone());
            c.push(Instruction::Conditioned {
                record: tag.to_string(),
                mask: cond.mask,
                value: cond.value,
                qubits: all.clone(),
                channel: ch,
            });
        }
    }
    push_twirl(c, compiled.post, opts);
}

fn push_twirl(c: &mut CircuitIR, p: PauliOp, opts: &RcOptions) {
    c.push(Instruction::PauliLayer { pauli: p });
    if let Some(t) = &opts.twirl_noise {
        let ch = c.add_channel(t.clone());
        for q in 0..c.n {
            c.push(Instruction::Noise {
                qubits: vec![q],
                channel: ch,
            });
        }
    }
}

/// Fuses runs of consecutive Pauli layers into one (phase-free product);
/// identity results are dropped.
pub fn merge_adjacent_pauli_layers(c: &CircuitIR) -> CircuitIR {
    let mut out = CircuitIR {
        n: c.n,
        channels: c.channels.clone(),
        instructions: Vec::with_capacity(c.instructions.len()),
    };
    let mut pending: Option<PauliOp> = None;
    let flush = |out: &mut CircuitIR, pending: &mut Option<PauliOp>| {
        if let Some(p) = pending.take() {
            if !p.is_identity() {
                out.instructions.push(Instruction::PauliLayer { pauli: p });
            }
        }
    };
    for ins in &c.instructions {
        match ins {
            Instruction::PauliLayer { pauli } => {
                pending = Some(match pending {
                    Some(acc) if acc.num_qubits() == pauli.num_qubits() => {
                        acc.compose(pauli).expect("same width")
                    }
                    Some(acc) => {
                        out.instructions.push(Instruction::PauliLayer { pauli: acc });
                        *pauli
                    }
                    None => *pauli,
                });
            }
            other => {
                flush(&mut out, &mut pending);
                out.instructions.push(other.clone());
            }
        }
    }
    flush(&mut out, &mut pending);
    out
}
