//! One function per subcommand.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use mcmlab::circuit::run_shots;
use mcmlab::mcmcb::{
    analytic_mcmcb_fidelity, analyze_shot, build_subexperiment_circuit, decay_table,
    first_order_flip_probabilities, pauli_error_rates_with_sigma, predict_subexperiment_r, run_mcmcb,
    FlipProbabilities, McmcbConfig, McmcbResult, PauliErrorRates,
};
use mcmlab::noise::{twirled_usi, usi_fidelity, RawInstrumentModel};
use mcmlab::pauli::{PauliOp, ZMask};
use mcmlab::ptg::{build_ptg, learnability_report, run_lscb, LearnabilityReport, LscbResult};
use mcmlab::rng::{derive_seed, labeled_rng};

use crate::config::{config_error, read_json, sampled_model, with_rate, Command, RunConfig};
use crate::output::{OutDir, Provenance};
use crate::Result;

/// A loaded config with its seed resolved.
pub struct Context {
    pub command: Command,
    pub config: RunConfig,
    /// Directory relative config paths resolve against.
    pub base: PathBuf,
    pub seed: Option<u64>,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.expect("seed checked when the context was built")
    }

    fn provenance(&self) -> Provenance {
        Provenance::new(self.command, self.seed)
    }

    fn model(&self) -> Result<RawInstrumentModel> {
        RunConfig::require(&self.config.model, "model", self.command)?.resolve(&self.base, self.seed())
    }

    fn protocol(&self) -> McmcbConfig {
        let mut p = self.config.protocol.clone().unwrap_or_default();
        p.seed = self.seed();
        p
    }
}

pub fn run(ctx: &Context, out: &mut OutDir) -> Result<()> {
    match ctx.command {
        Command::Simulate => simulate(ctx, out),
        Command::Mcmcb => mcmcb(ctx, out),
        Command::Sweep => sweep(ctx, out),
        Command::Ptg => ptg(ctx, out),
        Command::Lscb => lscb(ctx, out),
        Command::Report => report(ctx, out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubexperimentSummary {
    pub c1: ZMask,
    pub c2: ZMask,
    /// Mean signed outcome over the shots.
    pub mean: f64,
    /// Analytic decay of the twirled instrument.
    pub predicted_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub provenance: Provenance,
    pub model: RawInstrumentModel,
    pub pauli: PauliOp,
    pub depth: usize,
    pub shots: usize,
    pub subexperiments: Vec<SubexperimentSummary>,
}

/// One circuit for one Pauli, every shot recorded with the signed outcome of
/// each `(c1, c2)` analysis.
fn simulate(ctx: &Context, out: &mut OutDir) -> Result<()> {
    let spec = RunConfig::require(&ctx.config.simulate, "simulate", ctx.command)?;
    let model = ctx.model()?;
    let layer = &model.layer;
    let p: PauliOp = spec.pauli.parse()?;
    if p.num_qubits() != layer.k() {
        return Err(config_error(format!(
            "pauli {p} must act on the {} unmeasured qubits",
            layer.k()
        )));
    }
    if spec.shots == 0 {
        return Err(config_error("shots must be positive"));
    }
    let sc = build_subexperiment_circuit(
        &model,
        &p,
        spec.depth,
        &spec.rc,
        &mut labeled_rng(ctx.seed(), "simulate", 0),
    )?;
    let records = run_shots(&sc.circuit, spec.shots, ctx.seed(), 0)?;
    let m = layer.m();
    let analyses: Vec<(ZMask, ZMask, u64, bool)> = ZMask::all(m)
        .flat_map(|c1| ZMask::all(m).map(move |c2| (c1, c2)))
        .map(|(c1, c2)| {
            let t = c1.bits() ^ c2.bits();
            (c1, c2, t, sc.t0(layer, c1.bits(), t))
        })
        .collect();
    let mut sums = vec![0i64; analyses.len()];
    let mut lines = Vec::with_capacity(records.len());
    for (i, shot) in records.iter().enumerate() {
        let f: Vec<i8> = analyses
            .iter()
            .map(|&(c1, _, t, t0)| analyze_shot(shot, layer, sc.t_f, c1.bits(), t, t0))
            .collect();
        for (s, v) in sums.iter_mut().zip(&f) {
            *s += *v as i64;
        }
        let mut v: serde_json::Value = serde_json::from_str(&sc.circuit.shot_json(shot))?;
        v["shot"] = i.into();
        v["f"] = f.into();
        lines.push(serde_json::to_string(&v)?);
    }
    let u = twirled_usi(&model)?;
    let subexperiments = analyses
        .iter()
        .zip(&sums)
        .map(|(&(c1, c2, _, _), &s)| {
            Ok(SubexperimentSummary {
                c1,
                c2,
                mean: s as f64 / spec.shots as f64,
                predicted_r: predict_subexperiment_r(&u, &p, c1.bits(), c2.bits(), 0.0)?.r,
            })
        })
        .collect::<Result<_>>()?;
    let prov = ctx.provenance();
    if ctx.config.format.shots_jsonl {
        out.jsonl("shots.jsonl", &prov, lines)?;
    }
    let summary = SimulateOutput {
        provenance: prov,
        model,
        pauli: p,
        depth: spec.depth,
        shots: spec.shots,
        subexperiments,
    };
    out.json("simulate.json", &summary)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// Process fidelity of the twirled instrument.
    pub f_true: f64,
    /// Mean analytic decay over every triplet.
    pub f_mcmcb_analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcbOutput {
    pub provenance: Provenance,
    pub model: RawInstrumentModel,
    pub truth: Truth,
    pub result: McmcbResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DecayRow {
    pauli: PauliOp,
    c1: ZMask,
    c2: ZMask,
    depth: usize,
    mean: f64,
    sem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FitRow {
    pauli: PauliOp,
    c1: ZMask,
    c2: ZMask,
    r_hat: f64,
    stderr: f64,
    a_hat: f64,
    reliable: bool,
    r_predicted: f64,
}

#[derive(Serialize)]
struct CircuitLine {
    pauli: PauliOp,
    c1: ZMask,
    c2: ZMask,
    depth: usize,
    circuit: usize,
    shots: usize,
    mean: f64,
}

fn truth(model: &RawInstrumentModel) -> Result<Truth> {
    let u = twirled_usi(model)?;
    Ok(Truth {
        f_true: usi_fidelity(&u),
        f_mcmcb_analytic: analytic_mcmcb_fidelity(&u)?,
    })
}

/// Full protocol. `shots.jsonl` holds one line per circuit with its mean
/// signed outcome; per-shot records come from `simulate`.
fn mcmcb(ctx: &Context, out: &mut OutDir) -> Result<()> {
    let model = ctx.model()?;
    let cfg = ctx.protocol();
    let result = run_mcmcb(&model, &cfg)?;
    let u = twirled_usi(&model)?;
    let prov = ctx.provenance();
    let mut decays = Vec::new();
    let mut fits = Vec::new();
    for t in &result.triplets {
        let (p, c1, c2) = (t.triplet.p, t.triplet.c1, t.triplet.c2);
        for pt in &t.points {
            decays.push(DecayRow {
                pauli: p,
                c1,
                c2,
                depth: pt.depth,
                mean: pt.mean,
                sem: pt.sem,
            });
        }
        fits.push(FitRow {
            pauli: p,
            c1,
            c2,
            r_hat: t.estimate.r_hat,
            stderr: t.estimate.stderr,
            a_hat: t.estimate.a_hat,
            reliable: t.estimate.reliable,
            r_predicted: predict_subexperiment_r(&u, &p, c1.bits(), c2.bits(), 0.0)?.r,
        });
    }
    out.csv("decays.csv", &prov, &decays)?;
    out.csv("fits.csv", &prov, &fits)?;
    if ctx.config.format.shots_jsonl {
        let mut lines = Vec::new();
        for d in &result.data {
            for (depth, means) in d.depths.iter().zip(&d.circuit_means) {
                for (j, &mean) in means.iter().enumerate() {
                    let t = &d.triplet;
                    let line = CircuitLine {
                        pauli: t.p,
                        c1: t.c1,
                        c2: t.c2,
                        depth: *depth,
                        circuit: j,
                        shots: cfg.shots,
                        mean,
                    };
                    lines.push(serde_json::to_string(&line)?);
                }
            }
        }
        out.jsonl("shots.jsonl", &prov, lines)?;
    }
    let output = McmcbOutput {
        provenance: prov,
        truth: truth(&model)?,
        model,
        result,
    };
    out.json("results.json", &output)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub p: f64,
    /// Seed reproducing this row alone: a `sampled` model with the sweep's
    /// layer and recipe, run by `mcmcb` under this seed.
    pub seed: u64,
    pub f_true: f64,
    pub f_hat: f64,
    pub sigma_hat: f64,
    /// `|F_hat - F_true| / sigma_hat`.
    pub z: f64,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScalingRow {
    pub k: usize,
    pub repetitions: usize,
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScalingOutput {
    pub p: f64,
    pub pool_size: usize,
    pub rows: Vec<KScalingRow>,
    /// Least-squares slope of `ln sigma` against `ln K`.
    pub log_log_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub provenance: Provenance,
    pub rows: Vec<SweepRow>,
    /// Rows with `z <= 1` and `z <= 2.5`.
    pub within_1_sigma: usize,
    pub within_2_5_sigma: usize,
    pub k_scaling: Option<KScalingOutput>,
}

/// Largest analytic pool enumerated for the K-scaling study.
const MAX_POOL: usize = 1 << 16;

fn sweep(ctx: &Context, out: &mut OutDir) -> Result<()> {
    let spec = RunConfig::require(&ctx.config.sweep, "sweep", ctx.command)?;
    let grid = spec.grid.values();
    if grid.is_empty() {
        return Err(config_error("sweep grid is empty"));
    }
    let samplers = grid
        .iter()
        .map(|&p| with_rate(&spec.sampler, p))
        .collect::<Result<Vec<_>>>()?;
    let base = ctx.protocol();
    let rows: Vec<SweepRow> = samplers
        .par_iter()
        .zip(&grid)
        .enumerate()
        .map(|(i, (sampler, &p))| -> Result<SweepRow> {
            let seed = derive_seed(&[ctx.seed(), i as u64]);
            let model = sampled_model(&spec.layer, sampler, spec.spam.as_ref(), seed)?;
            let res = run_mcmcb(&model, &McmcbConfig { seed, ..base.clone() })?;
            let f_true = truth(&model)?.f_true;
            let z = (res.f_hat - f_true).abs() / res.sigma_hat;
            Ok(SweepRow {
                index: i,
                p,
                seed,
                f_true,
                f_hat: res.f_hat,
                sigma_hat: res.sigma_hat,
                z,
                excluded: res.excluded,
            })
        })
        .collect::<Result<_>>()?;
    let prov = ctx.provenance();
    out.csv("sweep.csv", &prov, &rows)?;
    let k_scaling = match &spec.k_scaling {
        Some(k) => {
            let ks = k_scaling(ctx, spec, k)?;
            out.csv("k_scaling.csv", &prov, &ks.rows)?;
            Some(ks)
        }
        None => None,
    };
    let output = SweepOutput {
        provenance: prov,
        within_1_sigma: rows.iter().filter(|r| r.z <= 1.0).count(),
        within_2_5_sigma: rows.iter().filter(|r| r.z <= 2.5).count(),
        rows,
        k_scaling,
    };
    out.json("sweep.json", &output)?;
    Ok(())
}

fn k_scaling(
    ctx: &Context,
    spec: &crate::config::SweepSpec,
    k: &crate::config::KScalingSpec,
) -> Result<KScalingOutput> {
    if k.ks.len() < 2 || k.ks.contains(&0) || k.repetitions < 2 {
        return Err(config_error(
            "k_scaling needs at least two positive K values and two repetitions",
        ));
    }
    let seed = derive_seed(&[ctx.seed(), u64::MAX]);
    let model = sampled_model(
        &spec.layer,
        &with_rate(&spec.sampler, k.p)?,
        spec.spam.as_ref(),
        seed,
    )?;
    let u = twirled_usi(&model)?;
    let (m, kq) = (u.m(), u.k());
    if (1usize << (2 * kq + 2 * m)) > MAX_POOL {
        return Err(config_error(format!(
            "analytic pool for k={kq}, m={m} exceeds {MAX_POOL} triplets"
        )));
    }
    let mut pool = Vec::new();
    for p in PauliOp::all(kq) {
        for c1 in 0..1u64 << m {
            for c2 in 0..1u64 << m {
                pool.push(predict_subexperiment_r(&u, &p, c1, c2, 0.0)?.r);
            }
        }
    }
    let rows: Vec<KScalingRow> =
        k.ks.iter()
            .map(|&kk| {
                let mut rng = labeled_rng(seed, "k-scaling", kk as u64);
                let est: Vec<f64> = (0..k.repetitions)
                    .map(|_| (0..kk).map(|_| pool[rng.gen_range(0..pool.len())]).sum::<f64>() / kk as f64)
                    .collect();
                let n = est.len() as f64;
                let mean = est.iter().sum::<f64>() / n;
                let sigma = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                KScalingRow {
                    k: kk,
                    repetitions: k.repetitions,
                    mean,
                    sigma,
                }
            })
            .collect();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.k as f64).ln(), r.sigma.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(KScalingOutput {
        p: k.p,
        pool_size: pool.len(),
        rows,
        log_log_slope: sxy / sxx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtgOutput {
    pub provenance: Provenance,
    pub report: LearnabilityReport,
}

fn ptg(ctx: &Context, out: &mut OutDir) -> Result<()> {
    let layers = RunConfig::require(&ctx.config.layers, "layers", ctx.command)?.resolve(&ctx.base)?;
    let queries = match &ctx.config.queries {
        Some(q) => q.resolve(&ctx.base)?,
        None => vec![],
    };
    let g = build_ptg(&layers)?;
    let report = learnability_report(&g, &queries)?;
    let prov = ctx.provenance();
    out.dot("ptg.dot", &prov, &g.to_dot())?;
    out.json(
        "ptg_report.json",
        &PtgOutput {
            provenance: prov,
            report,
        },
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LscbOutput {
    pub provenance: Provenance,
    pub result: LscbResult,
}

fn lscb(ctx: &Context, out: &mut OutDir) -> Result<()> {
    let layers = RunConfig::require(&ctx.config.layers, "layers", ctx.command)?.resolve(&ctx.base)?;
    let spec = RunConfig::require(&ctx.config.lscb, "lscb", ctx.command)?;
    let g = build_ptg(&layers)?;
    let cycle = spec
        .cycle
        .iter()
        .map(|l| {
            g.edge_by_label(l)
                .map(|e| e.id)
                .ok_or_else(|| config_error(format!("no edge labelled {l}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = spec.protocol.clone();
    cfg.seed = ctx.seed();
    let result = run_lscb(&g, &cycle, &cfg)?;
    let prov = ctx.provenance();
    out.csv("lscb_decay.csv", &prov, &result.points)?;
    out.json(
        "lscb.json",
        &LscbOutput {
            provenance: prov,
            result,
        },
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmReport {
    pub error_rates: PauliErrorRates,
    pub error_rate_sigma: PauliErrorRates,
    pub flip_probabilities: FlipProbabilities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    pub provenance: Provenance,
    pub source: Provenance,
    pub n: usize,
    pub m: usize,
    pub f_hat: f64,
    pub sigma_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub f_true: f64,
    pub excluded: usize,
    /// Present for single-MCM runs with every triplet measured.
    pub single_mcm: Option<McmReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RateRow {
    class: &'static str,
    pauli: PauliOp,
    rate: f64,
    sigma: f64,
}

/// Summary of an `mcmcb` run; error rates need `m = 1` and exhaustive sampling.
fn report(ctx: &Context, out: &mut OutDir) -> Result<()> {
    let spec = RunConfig::require(&ctx.config.report, "report", ctx.command)?;
    let run: McmcbOutput = read_json(&ctx.base.join(&spec.results))?;
    let res = &run.result;
    let single_mcm = if res.m == 1 && matches!(res.config.sampling, mcmlab::mcmcb::SamplingMode::Exhaustive) {
        let (error_rates, error_rate_sigma) = pauli_error_rates_with_sigma(res)?;
        let flip_probabilities = first_order_flip_probabilities(&decay_table(res), res.n - 1)?;
        Some(McmReport {
            error_rates,
            error_rate_sigma,
            flip_probabilities,
        })
    } else {
        None
    };
    let prov = Provenance::new(ctx.command, run.provenance.seed);
    if let Some(s) = &single_mcm {
        let mut rows = Vec::new();
        for (class, rates, sig) in [
            ("no_flip", &s.error_rates.no_flip, &s.error_rate_sigma.no_flip),
            ("flip", &s.error_rates.flip, &s.error_rate_sigma.flip),
            ("both", &s.error_rates.both, &s.error_rate_sigma.both),
        ] {
            for p in PauliOp::all(res.n - 1) {
                rows.push(RateRow {
                    class,
                    pauli: p,
                    rate: rates.get(&p),
                    sigma: sig.get(&p),
                });
            }
        }
        out.csv("error_rates.csv", &prov, &rows)?;
    }
    let output = ReportOutput {
        provenance: prov,
        source: run.provenance.clone(),
        n: res.n,
        m: res.m,
        f_hat: res.f_hat,
        sigma_hat: res.sigma_hat,
        ci_low: res.ci_low,
        ci_high: res.ci_high,
        f_true: run.truth.f_true,
        excluded: res.excluded,
        single_mcm,
    };
    out.json("report.json", &output)?;
    Ok(())
}
