//! Executable circuit description and the shot-based stabilizer engine.
//!
//! A circuit is a flat instruction list over `n` qubits plus a table of
//! Pauli channels that noise instructions refer to by index. Channel keys
//! are Paulis on the instruction's own qubit list.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{Gate, GateApp};
use crate::error::{Error, Result};
use crate::pauli::{format_bits, PauliOp, ProbTable, ZMask, PROB_TOL};
use crate::rng::ShotSeed;
use crate::tableau::{PrepState, Tableau};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Instruction {
    /// Resets every qubit to the given product state.
    Prep {
        states: Vec<PrepState>,
    },
    Gate {
        gate: Gate,
        qubits: Vec<usize>,
    },
    /// Deterministic Pauli layer (twirl gates).
    PauliLayer {
        pauli: PauliOp,
    },
    /// Samples one error from `channels[channel]` and applies it to `qubits`.
    Noise {
        qubits: Vec<usize>,
        channel: usize,
    },
    /// Z measurement of `qubits`; bit `j` of the record is `qubits[j]`. The
    /// recorded value is the raw outcome XOR `flip_mask`.
    Mcm {
        qubits: Vec<usize>,
        tag: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        flip_mask: Option<ZMask>,
    },
    /// Samples from `channels[channel]` when the raw outcome of MCM `record`
    /// satisfies `raw & mask == value`.
    Conditioned {
        record: String,
        mask: ZMask,
        value: ZMask,
        qubits: Vec<usize>,
        channel: usize,
    },
    /// Z measurement of every qubit with per-qubit readout flip probabilities.
    FinalMeasure {
        tag: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        readout_flip: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitIR {
    pub n: usize,
    #[serde(default)]
    pub channels: Vec<ProbTable<PauliOp>>,
    pub instructions: Vec<Instruction>,
}

/// Outcome of one shot. `mcm[i]` is the recorded (flip-corrected) value of
/// the i-th MCM instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotRecord {
    pub mcm: Vec<u64>,
    pub final_bits: u64,
    pub seed: ShotSeed,
}

#[derive(Serialize)]
struct ShotLine<'a> {
    mcm: Vec<String>,
    #[serde(rename = "final")]
    final_bits: String,
    seed: &'a ShotSeed,
}

impl CircuitIR {
    pub fn new(n: usize) -> CircuitIR {
        CircuitIR {
            n,
            channels: vec![],
            instructions: vec![],
        }
    }

    /// Registers a channel and returns its index; identical tables are shared.
    pub fn add_channel(&mut self, table: ProbTable<PauliOp>) -> usize {
        if let Some(i) = self.channels.iter().position(|c| *c == table) {
            return i;
        }
        self.channels.push(table);
        self.channels.len() - 1
    }

    pub fn push(&mut self, ins: Instruction) {
        self.instructions.push(ins);
    }

    pub fn push_gate(&mut self, g: &GateApp) {
        self.instructions.push(Instruction::Gate {
            gate: g.gate,
            qubits: g.qubits.clone(),
        });
    }

    /// Qubit lists of the MCM instructions, in order.
    pub fn mcm_layout(&self) -> Vec<&[usize]> {
        self.instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Mcm { qubits, .. } => Some(qubits.as_slice()),
                _ => None,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 || n > crate::pauli::MAX_QUBITS {
            return Err(Error::InvalidCircuit(format!("n={n} out of range")));
        }
        for (i, c) in self.channels.iter().enumerate() {
            c.validate_distribution(PROB_TOL)
                .map_err(|e| Error::InvalidCircuit(format!("channel {i}: {e}")))?;
        }
        let qubits_ok = |qs: &[usize]| -> Result<()> {
            let mut seen = 0u64;
            for &q in qs {
                if q >= n || seen & (1 << q) != 0 {
                    return Err(Error::InvalidCircuit(format!("bad qubit list {qs:?}")));
                }
                seen |= 1 << q;
            }
            Ok(())
        };
        let channel_ok = |ch: usize, width: usize| -> Result<()> {
            let c = self
                .channels
                .get(ch)
                .ok_or_else(|| Error::InvalidCircuit(format!("no channel {ch}")))?;
            if c.keys().any(|p| p.num_qubits() != width) {
                return Err(Error::InvalidCircuit(format!(
                    "channel {ch} is not on {width} qubits"
                )));
            }
            Ok(())
        };
        let mut tags: HashMap<&str, usize> = HashMap::new();
        let mut final_seen = false;
        for ins in &self.instructions {
            if final_seen {
                return Err(Error::InvalidCircuit(
                    "instructions after the final measurement".into(),
                ));
            }
            match ins {
                Instruction::Prep { states } => {
                    if states.len() != n {
                        return Err(Error::InvalidCircuit(format!(
                            "prep lists {} states for n={n}",
                            states.len()
                        )));
                    }
                }
                Instruction::Gate { gate, qubits } => GateApp::new(*gate, qubits).validate(n)?,
                Instruction::PauliLayer { pauli } => {
                    if pauli.num_qubits() != n {
                        return Err(Error::InvalidCircuit(format!("Pauli layer {pauli} on n={n}")));
                    }
                }
                Instruction::Noise { qubits, channel } => {
                    qubits_ok(qubits)?;
                    channel_ok(*channel, qubits.len())?;
                }
                Instruction::Mcm {
                    qubits,
                    tag,
                    flip_mask,
                } => {
                    qubits_ok(qubits)?;
                    if qubits.is_empty() {
                        return Err(Error::InvalidCircuit("empty MCM".into()));
                    }
                    if let Some(f) = flip_mask {
                        if f.len() != qubits.len() {
                            return Err(Error::InvalidCircuit(format!(
                                "flip mask {f} for {} qubits",
                                qubits.len()
                            )));
                        }
                    }
                    if tags.insert(tag.as_str(), qubits.len()).is_some() {
                        return Err(Error::InvalidCircuit(format!("duplicate record tag {tag:?}")));
                    }
                }
                Instruction::Conditioned {
                    record,
                    mask,
                    value,
                    qubits,
                    channel,
                } => {
                    let width = *tags.get(record.as_str()).ok_or_else(|| {
                        Error::InvalidCircuit(format!("{record:?} is not an earlier MCM record"))
                    })?;
                    if mask.len() != width || value.len() != width {
                        return Err(Error::InvalidCircuit(format!(
                            "predicate width differs from record {record:?}"
                        )));
                    }
                    qubits_ok(qubits)?;
                    channel_ok(*channel, qubits.len())?;
                }
                Instruction::FinalMeasure { tag, readout_flip } => {
                    if !readout_flip.is_empty() && readout_flip.len() != n {
                        return Err(Error::InvalidCircuit(format!(
                            "{} readout flips for n={n}",
                            readout_flip.len()
                        )));
                    }
                    if readout_flip.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err(Error::InvalidCircuit(
                            "readout flip probability outside [0, 1]".into(),
                        ));
                    }
                    if tags.insert(tag.as_str(), n).is_some() {
                        return Err(Error::InvalidCircuit(format!("duplicate record tag {tag:?}")));
                    }
                    final_seen = true;
                }
            }
        }
        if !final_seen {
            return Err(Error::InvalidCircuit("missing final measurement".into()));
        }
        Ok(())
    }

    /// JSON object for one shot, with bit strings sized from the circuit.
    pub fn shot_json(&self, shot: &ShotRecord) -> String {
        let layout = self.mcm_layout();
        let line = ShotLine {
            mcm: shot
                .mcm
                .iter()
                .zip(&layout)
                .map(|(&b, qs)| format_bits(b, qs.len()))
                .collect(),
            final_bits: format_bits(shot.final_bits, self.n),
            seed: &shot.seed,
        };
        serde_json::to_string(&line).expect("shot serializes")
    }
}

/// Alias-free inverse-CDF sampler over pre-embedded n-qubit Paulis.
#[derive(Debug, Clone)]
struct ChannelSampler {
    cum: Vec<f64>,
    ops: Vec<(u64, u64)>,
}

impl ChannelSampler {
    fn new(table: &ProbTable<PauliOp>, qubits: &[usize], n: usize) -> ChannelSampler {
        let mut entries: Vec<(f64, (u64, u64))> = table
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(p, w)| {
                let e = p.embed(qubits, n);
                (w, (e.x(), e.z()))
            })
            .collect();
        // Heaviest term first keeps the common case a single comparison.
        entries.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut acc = 0.0;
        let mut cum = Vec::with_capacity(entries.len());
        let mut ops = Vec::with_capacity(entries.len());
        for (w, op) in entries {
            acc += w;
            cum.push(acc);
            ops.push(op);
        }
        ChannelSampler { cum, ops }
    }

    fn is_trivial(&self) -> bool {
        self.ops.iter().all(|&(x, z)| x == 0 && z == 0)
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let u: f64 = rng.gen::<f64>() * self.cum.last().copied().unwrap_or(1.0);
        if u < self.cum[0] {
            return self.ops[0];
        }
        let i = self.cum.partition_point(|&c| c <= u).min(self.ops.len() - 1);
        self.ops[i]
    }
}

#[derive(Debug, Clone)]
enum Op {
    Prep(Vec<PrepState>),
    Gate(Gate, usize, usize),
    Pauli(u64, u64),
    Noise(ChannelSampler),
    Mcm {
        qubits: Vec<usize>,
        flip: u64,
    },
    Conditioned {
        record: usize,
        mask: u64,
        value: u64,
        sampler: ChannelSampler,
    },
    Final {
        flips: Vec<(usize, f64)>,
    },
}

/// Result of a noiseless execution used to derive analysis constants.
#[derive(Debug, Clone)]
pub struct NoiselessRun {
    pub record: ShotRecord,
    /// State right before the final measurement.
    pub state: Tableau,
    /// True if some MCM outcome was random.
    pub random_mcm: bool,
}

/// Compiled circuit ready for repeated execution.
#[derive(Debug, Clone)]
pub struct Simulator {
    n: usize,
    ops: Vec<Op>,
    n_mcm: usize,
}

impl Simulator {
    pub fn new(c: &CircuitIR) -> Result<Simulator> {
        c.validate()?;
        let n = c.n;
        let mut ops = Vec::with_capacity(c.instructions.len());
        let mut record_index: HashMap<&str, usize> = HashMap::new();
        let mut n_mcm = 0;
        for ins in &c.instructions {
            match ins {
                Instruction::Prep { states } => ops.push(Op::Prep(states.clone())),
                Instruction::Gate { gate, qubits } => {
                    if *gate != Gate::I {
                        ops.push(Op::Gate(*gate, qubits[0], qubits.get(1).copied().unwrap_or(0)));
                    }
                }
                Instruction::PauliLayer { pauli } => {
                    if !pauli.is_identity() {
                        // X^x Z^z and the Hermitian Pauli differ by a phase only.
                        ops.push(Op::Pauli(pauli.x(), pauli.z()));
                    }
                }
                Instruction::Noise { qubits, channel } => {
                    let s = ChannelSampler::new(&c.channels[*channel], qubits, n);
                    if !s.is_trivial() {
                        ops.push(Op::Noise(s));
                    }
                }
                Instruction::Mcm {
                    qubits,
                    tag,
                    flip_mask,
                } => {
                    record_index.insert(tag.as_str(), n_mcm);
                    n_mcm += 1;
                    ops.push(Op::Mcm {
                        qubits: qubits.clone(),
                        flip: flip_mask.map_or(0, |f| f.bits()),
                    });
                }
                Instruction::Conditioned {
                    record,
                    mask,
                    value,
                    qubits,
                    channel,
                } => {
                    let s = ChannelSampler::new(&c.channels[*channel], qubits, n);
                    if !s.is_trivial() {
                        ops.push(Op::Conditioned {
                            record: record_index[record.as_str()],
                            mask: mask.bits(),
                            value: value.bits(),
                            sampler: s,
                        });
                    }
                }
                Instruction::FinalMeasure { readout_flip, .. } => {
                    let flips = readout_flip
                        .iter()
                        .copied()
                        .enumerate()
                        .filter(|&(_, p)| p > 0.0)
                        .collect();
                    ops.push(Op::Final { flips });
                }
            }
        }
        Ok(Simulator { n, ops, n_mcm })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Runs one shot on `tab`, which is reset first.
    pub fn run_shot(&self, tab: &mut Tableau, seed: ShotSeed) -> ShotRecord {
        let mut rng = seed.rng();
        let mut mcm = Vec::with_capacity(self.n_mcm);
        let mut raw = Vec::with_capacity(self.n_mcm);
        let mut final_bits = 0u64;
        tab.reset();
        for op in &self.ops {
            match op {
                Op::Prep(states) => tab.prepare(states).expect("validated prep"),
                Op::Gate(g, a, b) => tab.apply_raw(*g, *a, *b),
                Op::Pauli(x, z) => tab.apply_pauli(*x, *z),
                Op::Noise(s) => {
                    let (x, z) = s.sample(&mut rng);
                    tab.apply_pauli(x, z);
                }
                Op::Mcm { qubits, flip } => {
                    let mut bits = 0u64;
                    for (j, &q) in qubits.iter().enumerate() {
                        bits |= (tab.measure_z(q, &mut rng) as u64) << j;
                    }
                    raw.push(bits);
                    mcm.push(bits ^ flip);
                }
                Op::Conditioned {
                    record,
                    mask,
                    value,
                    sampler,
                } => {
                    if raw[*record] & mask == *value {
                        let (x, z) = sampler.sample(&mut rng);
                        tab.apply_pauli(x, z);
                    }
                }
                Op::Final { flips } => {
                    for q in 0..self.n {
                        final_bits |= (tab.measure_z(q, &mut rng) as u64) << q;
                    }
                    for &(q, p) in flips {
                        if rng.gen::<f64>() < p {
                            final_bits ^= 1 << q;
                        }
                    }
                }
            }
        }
        ShotRecord {
            mcm,
            final_bits,
            seed,
        }
    }

    /// Executes with every noise site, conditioned error and readout flip
    /// switched off.
    pub fn run_noiseless(&self, seed: ShotSeed) -> NoiselessRun {
        let mut rng = seed.rng();
        let mut tab = Tableau::new(self.n).expect("validated width");
        let mut mcm = Vec::with_capacity(self.n_mcm);
        let mut random_mcm = false;
        let mut state = None;
        let mut final_bits = 0u64;
        for op in &self.ops {
            match op {
                Op::Prep(states) => tab.prepare(states).expect("validated prep"),
                Op::Gate(g, a, b) => tab.apply_raw(*g, *a, *b),
                Op::Pauli(x, z) => tab.apply_pauli(*x, *z),
                Op::Noise(_) | Op::Conditioned { .. } => {}
                Op::Mcm { qubits, flip } => {
                    let mut bits = 0u64;
                    for (j, &q) in qubits.iter().enumerate() {
                        random_mcm |= tab.peek_z(q).is_none();
                        bits |= (tab.measure_z(q, &mut rng) as u64) << j;
                    }
                    mcm.push(bits ^ flip);
                }
                Op::Final { .. } => {
                    state = Some(tab.clone());
                    for q in 0..self.n {
                        final_bits |= (tab.measure_z(q, &mut rng) as u64) << q;
                    }
                }
            }
        }
        NoiselessRun {
            record: ShotRecord {
                mcm,
                final_bits,
                seed,
            },
            state: state.expect("validated final measurement"),
            random_mcm,
        }
    }
}

fn seed_for(master: u64, circuit: u64, shot: usize) -> ShotSeed {
    ShotSeed {
        master,
        circuit,
        shot: shot as u64,
    }
}

/// Runs `shots` independent shots. Shot `i` draws only from the stream
/// `(master, circuit_id, i)`, so the output does not depend on the thread count.
pub fn run_shots(c: &CircuitIR, shots: usize, master: u64, circuit_id: u64) -> Result<Vec<ShotRecord>> {
    run_shots_map(c, shots, master, circuit_id, |r| r.clone())
}

/// Like [`run_shots`] but maps each record through `f` without keeping it.
pub fn run_shots_map<T, F>(c: &CircuitIR, shots: usize, master: u64, circuit_id: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&ShotRecord) -> T + Sync,
{
    let sim = Simulator::new(c)?;
    Ok(sim.map_shots(shots, master, circuit_id, f))
}

impl Simulator {
    pub fn map_shots<T, F>(&self, shots: usize, master: u64, circuit_id: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&ShotRecord) -> T + Sync,
    {
        (0..shots)
            .into_par_iter()
            .with_min_len(64)
            .map_init(
                || Tableau::new(self.n).expect("validated width"),
                |tab, i| f(&self.run_shot(tab, seed_for(master, circuit_id, i))),
            )
            .collect()
    }

    /// Sequential variant of [`Simulator::map_shots`] for callers that already run in parallel.
    pub fn map_shots_serial<T, F>(&self, shots: usize, master: u64, circuit_id: u64, mut f: F) -> Vec<T>
    where
        F: FnMut(&ShotRecord) -> T,
    {
        let mut tab = Tableau::new(self.n).expect("validated width");
        (0..shots)
            .map(|i| f(&self.run_shot(&mut tab, seed_for(master, circuit_id, i))))
            .collect()
    }
}
