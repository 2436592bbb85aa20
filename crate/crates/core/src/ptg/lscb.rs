//! Layer-set cycle benchmarking along closed walks of a PTG.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LayerDef, Parameter, Ptg, PtgEdge};
use crate::circuit::{CircuitIR, Instruction, Simulator};
use crate::clifford::{self, Gate, GateApp};
use crate::error::{Error, Result};
use crate::mcmcb::{fit_decay_points, DecayEstimate, DecayPoint};
use crate::noise::{lambda_tilde, twirled_usi};
use crate::pauli::{low_mask, parity, pauli_eigenvalue, Letter, PauliOp};
use crate::rc::{append_compiled_layer, compile_rc_layer, merge_adjacent_pauli_layers, RcOptions};
use crate::rng::{derive_seed, labeled_rng, ShotSeed};
use crate::tableau::PrepState;

/// Single-qubit gates mapping each letter of `from` to the letter of `to` on
/// the same qubit, up to sign.
pub fn connector_gates(from: &PauliOp, to: &PauliOp) -> Result<Vec<GateApp>> {
    if from.num_qubits() != to.num_qubits() || from.support() != to.support() {
        return Err(Error::InvalidCycle(format!(
            "cannot connect {from} to {to}: supports differ"
        )));
    }
    let mut gates = Vec::new();
    for q in 0..from.num_qubits() {
        use Letter::*;
        let seq: &[Gate] = match (from.letter(q), to.letter(q)) {
            (a, b) if a == b => &[],
            (X, Z) | (Z, X) => &[Gate::H],
            (X, Y) => &[Gate::S],
            (Y, X) => &[Gate::Sdg],
            (Z, Y) => &[Gate::H, Gate::S],
            (Y, Z) => &[Gate::Sdg, Gate::H],
            _ => unreachable!("supports match"),
        };
        gates.extend(seq.iter().map(|&g| GateApp::one(g, q)));
    }
    Ok(gates)
}

fn cycle_edges<'a>(g: &'a Ptg, cycle: &[usize]) -> Result<Vec<&'a PtgEdge>> {
    if cycle.is_empty() {
        return Err(Error::InvalidCycle("empty cycle".into()));
    }
    let edges: Vec<&PtgEdge> = cycle.iter().map(|&id| g.edge(id)).collect::<Result<_>>()?;
    for i in 0..edges.len() {
        let (a, b) = (edges[i], edges[(i + 1) % edges.len()]);
        if a.to != b.from {
            return Err(Error::InvalidCycle(format!(
                "edge {} ends where edge {} does not start",
                a.id, b.id
            )));
        }
    }
    Ok(edges)
}

/// A germ-repetition circuit with its analysis constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LscbCircuit {
    pub germs: usize,
    pub circuit: CircuitIR,
    pub final_mask: u64,
    /// Mask applied to each MCM record, in record order.
    pub record_masks: Vec<u64>,
    pub t0: bool,
}

impl LscbCircuit {
    /// Signed outcome of one shot.
    pub fn analyze(&self, mcm: &[u64], final_bits: u64) -> i8 {
        let mut s = parity(self.final_mask & final_bits) ^ self.t0;
        for (b, t) in mcm.iter().zip(&self.record_masks) {
            s ^= parity(b & t);
        }
        if s {
            -1
        } else {
            1
        }
    }
}

/// Builds `S_0 G^germs S_f` for the closed walk `cycle`; each germ applies
/// every edge's layer under fresh randomized compiling followed by the
/// connector to the next edge.
pub fn build_lscb_circuit<R: Rng + ?Sized>(
    g: &Ptg,
    cycle: &[usize],
    germs: usize,
    opts: &RcOptions,
    rng: &mut R,
) -> Result<LscbCircuit> {
    let edges = cycle_edges(g, cycle)?;
    let n = g.n;
    let start = edges[0].pre;
    let mut c = CircuitIR::new(n);
    let states = (0..n)
        .map(|q| {
            let l = start.letter(q);
            PrepState::from_letter(if l == Letter::I { Letter::Z } else { l }, rng.gen())
        })
        .collect();
    c.push(Instruction::Prep { states });
    let connectors: Vec<Vec<GateApp>> = (0..edges.len())
        .map(|i| connector_gates(&edges[i].post, &edges[(i + 1) % edges.len()].pre))
        .collect::<Result<_>>()?;
    let mut record_masks = Vec::new();
    for rep in 0..germs {
        for (j, e) in edges.iter().enumerate() {
            match &g.layers[e.layer] {
                LayerDef::Gate { gates, noise, .. } => {
                    let t =
                        PauliOp::from_bits(n, rng.gen::<u64>() & low_mask(n), rng.gen::<u64>() & low_mask(n));
                    c.push(Instruction::PauliLayer { pauli: t });
                    for gate in gates {
                        c.push_gate(gate);
                    }
                    if let Some(ch) = noise {
                        let id = c.add_channel(ch.clone());
                        c.push(Instruction::Noise {
                            qubits: (0..n).collect(),
                            channel: id,
                        });
                    }
                    c.push(Instruction::PauliLayer {
                        pauli: clifford::conjugate_unsigned(gates, &t)?,
                    });
                }
                LayerDef::Mcm { model, .. } => {
                    let compiled = compile_rc_layer(&model.layer, rng)?;
                    append_compiled_layer(&mut c, model, &compiled, &format!("g{rep}e{j}"), opts);
                    if model.layer.m() > 0 {
                        record_masks.push(e.t_mcm);
                    }
                }
            }
            for gate in &connectors[j] {
                c.push_gate(gate);
            }
        }
    }
    let to_z = connector_gates(&start, &PauliOp::z_type(n, start.support()))?;
    for gate in &to_z {
        c.push_gate(gate);
    }
    c.push(Instruction::FinalMeasure {
        tag: "final".into(),
        readout_flip: vec![],
    });
    let circuit = merge_adjacent_pauli_layers(&c);
    let mut out = LscbCircuit {
        germs,
        circuit,
        final_mask: start.support(),
        record_masks,
        t0: false,
    };
    let reference = Simulator::new(&out.circuit)?.run_noiseless(ShotSeed {
        master: 0,
        circuit: 0,
        shot: 0,
    });
    out.t0 = out.analyze(&reference.record.mcm, reference.record.final_bits) < 0;
    Ok(out)
}

/// Value of the parameter carried by an edge under the layer models.
pub fn edge_value(g: &Ptg, e: &PtgEdge) -> Result<f64> {
    match (&e.param, &g.layers[e.layer]) {
        (Parameter::Gate { q, .. }, LayerDef::Gate { noise, .. }) => match noise {
            Some(ch) => pauli_eigenvalue(ch, q),
            None => Ok(1.0),
        },
        (Parameter::Mcm { p, c1, c2, .. }, LayerDef::Mcm { model, .. }) => {
            let u = twirled_usi(model)?;
            lambda_tilde(&u, &model.layer.v_power(p, 1)?, c1.bits(), c2.bits())
        }
        _ => Err(Error::InvalidLayer(format!(
            "edge {} does not match its layer kind",
            e.id
        ))),
    }
}

/// Per-layer decay `(prod_e value(e))^(1/k)` of the germ for `cycle`.
pub fn predict_lscb_decay(g: &Ptg, cycle: &[usize], delta: f64) -> Result<f64> {
    let edges = cycle_edges(g, cycle)?;
    let mut prod = 1.0;
    for e in &edges {
        let v = edge_value(g, e)?;
        if v < delta {
            return Err(Error::InvalidArgument(format!(
                "parameter {} = {v} is below {delta}",
                e.label
            )));
        }
        prod *= v;
    }
    Ok(prod.powf(1.0 / edges.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LscbConfig {
    /// Germ repetition counts.
    pub germs: Vec<usize>,
    pub circuits_per_depth: usize,
    pub shots: usize,
    pub delta: f64,
    pub seed: u64,
    pub rc: RcOptions,
}

impl Default for LscbConfig {
    fn default() -> Self {
        LscbConfig {
            germs: vec![1, 2, 4, 8, 16],
            circuits_per_depth: 30,
            shots: 1000,
            delta: 0.05,
            seed: 0,
            rc: RcOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LscbResult {
    pub cycle: Vec<usize>,
    pub labels: Vec<String>,
    /// Depths counted in layers (`germs * cycle length`).
    pub points: Vec<DecayPoint>,
    /// Per-layer decay.
    pub estimate: DecayEstimate,
    /// `r^k`: estimate of the product of the cycle's parameters.
    pub germ_decay: f64,
    pub germ_stderr: f64,
    pub predicted: Option<f64>,
}

pub fn run_lscb(g: &Ptg, cycle: &[usize], cfg: &LscbConfig) -> Result<LscbResult> {
    let edges = cycle_edges(g, cycle)?;
    let k = edges.len();
    if cfg.circuits_per_depth == 0 || cfg.shots == 0 {
        return Err(Error::InvalidArgument(
            "circuits_per_depth and shots must be positive".into(),
        ));
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.germs.len())
        .flat_map(|di| (0..cfg.circuits_per_depth).map(move |j| (di, j)))
        .collect();
    let means: Vec<f64> = jobs
        .par_iter()
        .map(|&(di, j)| -> Result<f64> {
            let id = derive_seed(&[di as u64, j as u64]);
            let mut rng = labeled_rng(cfg.seed, "lscb", id);
            let lc = build_lscb_circuit(g, cycle, cfg.germs[di], &cfg.rc, &mut rng)?;
            let sim = Simulator::new(&lc.circuit)?;
            let total: i64 = sim
                .map_shots_serial(cfg.shots, cfg.seed, id, |s| {
                    lc.analyze(&s.mcm, s.final_bits) as i64
                })
                .into_iter()
                .sum();
            Ok(total as f64 / cfg.shots as f64)
        })
        .collect::<Result<_>>()?;
    let points: Vec<DecayPoint> = cfg
        .germs
        .iter()
        .enumerate()
        .map(|(di, &d)| {
            let block = &means[di * cfg.circuits_per_depth..(di + 1) * cfg.circuits_per_depth];
            DecayPoint::from_circuits(d * k, block)
        })
        .collect();
    let estimate = fit_decay_points(&points, cfg.delta)?;
    let r = estimate.r_hat;
    let germ_decay = r.powi(k as i32);
    let germ_stderr = k as f64 * r.powi(k as i32 - 1) * estimate.stderr;
    let predicted = predict_lscb_decay(g, cycle, 0.0).ok();
    Ok(LscbResult {
        cycle: cycle.to_vec(),
        labels: edges.iter().map(|e| e.label.clone()).collect(),
        points,
        estimate,
        germ_decay,
        germ_stderr,
        predicted,
    })
}
