//! Mid-circuit-measurement cycle benchmarking.
//!
//! Each subexperiment is labelled by a triplet `(P, c1, c2)`: `P` on the
//! unmeasured register, `c1` the measured-register final mask and
//! `t = c1 ^ c2` the mask applied to every MCM record. The fitted decay of a
//! triplet estimates [`predict_subexperiment_r`]; the mean over triplets
//! estimates the MCM-CB fidelity.

mod bootstrap;
mod circuits;
mod extract;
mod fit;
mod predict;

pub use bootstrap::{bootstrap_ci, percentile, BootstrapSummary};
pub use circuits::{
    analyze_shot, build_final_layer, build_prep_layer, build_subexperiment_circuit, final_mask,
    validate_depth, PrepLayer, SubexperimentCircuit,
};
pub use extract::{
    decay_stderr_table, decay_table, extract_eigenvalues_m1, extract_pauli_error_rates,
    first_order_flip_probabilities, marginal_subsystem_infidelity, pauli_error_rates_with_sigma,
    FlipProbabilities, M1Eigenvalues, PauliErrorRates,
};
pub use fit::{fit_decay_points, DecayEstimate, DecayPoint};
pub use predict::{analytic_mcmcb_fidelity, predict_r, predict_r_with, predict_subexperiment_r, Prediction};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Simulator;
use crate::error::{Error, Result};
use crate::noise::RawInstrumentModel;
use crate::pauli::{PauliOp, ZMask};
use crate::rc::RcOptions;
use crate::rng::{derive_seed, labeled_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub p: PauliOp,
    pub c1: ZMask,
    pub c2: ZMask,
}

impl Triplet {
    pub fn t_mcm(&self) -> u64 {
        self.c1.bits() ^ self.c2.bits()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode {
    /// `k` triplets drawn uniformly with replacement.
    UniformK { k: usize },
    /// Every triplet; circuits are shared by all triplets with the same `P`.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcbConfig {
    pub depths: Vec<usize>,
    pub circuits_per_depth: usize,
    pub shots: usize,
    pub delta: f64,
    pub sampling: SamplingMode,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    pub rc: RcOptions,
}

impl Default for McmcbConfig {
    fn default() -> Self {
        McmcbConfig {
            depths: vec![2, 4, 8, 16, 32],
            circuits_per_depth: 30,
            shots: 1000,
            delta: 0.05,
            sampling: SamplingMode::UniformK { k: 100 },
            bootstrap_resamples: 200,
            seed: 0,
            rc: RcOptions::default(),
        }
    }
}

impl McmcbConfig {
    pub fn validate(&self, model: &RawInstrumentModel) -> Result<()> {
        let distinct: std::collections::BTreeSet<_> = self.depths.iter().collect();
        if distinct.len() < 2 {
            return Err(Error::InvalidArgument(
                "at least two distinct depths are required".into(),
            ));
        }
        for &d in &self.depths {
            validate_depth(&model.layer, d)?;
        }
        if self.circuits_per_depth == 0 || self.shots == 0 {
            return Err(Error::InvalidArgument(
                "circuits_per_depth and shots must be positive".into(),
            ));
        }
        if let SamplingMode::UniformK { k: 0 } = self.sampling {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        Ok(())
    }
}

/// Per-circuit mean signed outcomes of one triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubexperimentData {
    pub triplet: Triplet,
    /// Triplets sharing a group share circuits.
    pub group: usize,
    pub depths: Vec<usize>,
    /// `circuit_means[i][j]`: circuit `j` at `depths[i]`.
    pub circuit_means: Vec<Vec<f64>>,
}

impl SubexperimentData {
    pub fn points(&self) -> Vec<DecayPoint> {
        self.depths
            .iter()
            .zip(&self.circuit_means)
            .map(|(&d, v)| DecayPoint::from_circuits(d, v))
            .collect()
    }

    pub fn fit(&self, delta: f64) -> Result<DecayEstimate> {
        fit_decay_points(&self.points(), delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletResult {
    pub triplet: Triplet,
    pub points: Vec<DecayPoint>,
    pub estimate: DecayEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcbResult {
    pub n: usize,
    pub m: usize,
    pub config: McmcbConfig,
    pub triplets: Vec<TripletResult>,
    /// Mean fitted decay over the reliable triplets.
    pub f_hat: f64,
    /// Bootstrap standard deviation of `f_hat`.
    pub sigma_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub excluded: usize,
    pub data: Vec<SubexperimentData>,
}

/// Mean `r_hat` over reliable estimates and the number excluded.
pub fn mean_reliable<'a, I: IntoIterator<Item = &'a DecayEstimate>>(estimates: I) -> (f64, usize) {
    let (mut sum, mut count, mut excluded) = (0.0, 0usize, 0usize);
    for e in estimates {
        if e.reliable {
            sum += e.r_hat;
            count += 1;
        } else {
            excluded += 1;
        }
    }
    (if count > 0 { sum / count as f64 } else { f64::NAN }, excluded)
}

/// Triplets measured by the protocol, grouped by shared circuits.
pub fn select_triplets(model: &RawInstrumentModel, cfg: &McmcbConfig) -> Vec<Vec<Triplet>> {
    let (m, k) = (model.layer.m(), model.layer.k());
    match cfg.sampling {
        SamplingMode::Exhaustive => PauliOp::all(k)
            .map(|p| {
                ZMask::all(m)
                    .flat_map(|c1| ZMask::all(m).map(move |c2| Triplet { p, c1, c2 }))
                    .collect()
            })
            .collect(),
        SamplingMode::UniformK { k: count } => {
            let mut rng = labeled_rng(cfg.seed, "triplets", 0);
            let lo = crate::pauli::low_mask;
            (0..count)
                .map(|_| {
                    let p = PauliOp::from_bits(k, rng.gen::<u64>() & lo(k), rng.gen::<u64>() & lo(k));
                    let c1 = ZMask::new(m, rng.gen::<u64>() & lo(m)).expect("masked");
                    let c2 = ZMask::new(m, rng.gen::<u64>() & lo(m)).expect("masked");
                    vec![Triplet { p, c1, c2 }]
                })
                .collect()
        }
    }
}

/// Simulates every circuit and returns per-triplet data, in group order.
pub fn simulate_subexperiments(
    model: &RawInstrumentModel,
    cfg: &McmcbConfig,
    groups: &[Vec<Triplet>],
) -> Result<Vec<SubexperimentData>> {
    cfg.validate(model)?;
    model.validate()?;
    let layer = &model.layer;
    let n_circ = cfg.circuits_per_depth;
    let jobs: Vec<(usize, usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..cfg.depths.len()).flat_map(move |di| (0..n_circ).map(move |j| (g, di, j))))
        .collect();
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(g, di, j)| -> Result<Vec<f64>> {
            let group = &groups[g];
            let id = derive_seed(&[g as u64, di as u64, j as u64]);
            let mut rng = labeled_rng(cfg.seed, "circuit", id);
            let sc = build_subexperiment_circuit(model, &group[0].p, cfg.depths[di], &cfg.rc, &mut rng)?;
            let analyses: Vec<(u64, u64, bool)> = group
                .iter()
                .map(|t| {
                    let mask = final_mask(layer, sc.t_f, t.c1.bits());
                    (mask, t.t_mcm(), sc.t0(layer, t.c1.bits(), t.t_mcm()))
                })
                .collect();
            let sim = Simulator::new(&sc.circuit)?;
            let mut sums = vec![0i64; analyses.len()];
            sim.map_shots_serial(cfg.shots, cfg.seed, id, |shot| {
                let mcm_xor = shot.mcm.iter().fold(0, |acc, b| acc ^ b);
                for (s, &(mask, t, t0)) in sums.iter_mut().zip(&analyses) {
                    *s += circuits::signed_outcome(mask, shot.final_bits, mcm_xor, t, t0) as i64;
                }
            });
            Ok(sums.into_iter().map(|s| s as f64 / cfg.shots as f64).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    let per_group = cfg.depths.len() * n_circ;
    for (g, group) in groups.iter().enumerate() {
        let block = &results[g * per_group..(g + 1) * per_group];
        for (a, t) in group.iter().enumerate() {
            let circuit_means = (0..cfg.depths.len())
                .map(|di| (0..n_circ).map(|j| block[di * n_circ + j][a]).collect())
                .collect();
            out.push(SubexperimentData {
                triplet: *t,
                group: g,
                depths: cfg.depths.clone(),
                circuit_means,
            });
        }
    }
    Ok(out)
}

/// Runs the full protocol: simulation, per-triplet fits and bootstrap.
pub fn run_mcmcb(model: &RawInstrumentModel, cfg: &McmcbConfig) -> Result<McmcbResult> {
    let groups = select_triplets(model, cfg);
    let data = simulate_subexperiments(model, cfg, &groups)?;
    analyze(model.layer.n, model.layer.m(), cfg, data)
}

/// Fits and bootstraps already simulated data.
pub fn analyze(n: usize, m: usize, cfg: &McmcbConfig, data: Vec<SubexperimentData>) -> Result<McmcbResult> {
    let triplets: Vec<TripletResult> = data
        .par_iter()
        .map(|d| {
            Ok(TripletResult {
                triplet: d.triplet,
                points: d.points(),
                estimate: d.fit(cfg.delta)?,
            })
        })
        .collect::<Result<_>>()?;
    let (f_hat, excluded) = mean_reliable(triplets.iter().map(|t| &t.estimate));
    let resample_triplets = matches!(cfg.sampling, SamplingMode::UniformK { .. });
    let boot = bootstrap_ci(
        &data,
        resample_triplets,
        cfg.delta,
        cfg.bootstrap_resamples,
        cfg.seed,
    )?;
    if excluded > 0 {
        log::warn!("{excluded} of {} triplets excluded as unreliable", triplets.len());
    }
    Ok(McmcbResult {
        n,
        m,
        config: cfg.clone(),
        triplets,
        f_hat,
        sigma_hat: boot.sigma,
        ci_low: boot.ci_low,
        ci_high: boot.ci_high,
        excluded,
        data,
    })
}
