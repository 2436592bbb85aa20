//! Random error-model recipes.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{MCMLayerSpec, RawInstrumentModel, Spam};
use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliOp, ProbTable};

/// Number of nonzero error terms in a sampled channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermCount {
    /// `3^(n-m)` terms.
    ThreePowUnmeasured,
    /// `2^n` terms.
    TwoPowN,
    Fixed(usize),
}

impl TermCount {
    pub fn resolve(self, n: usize, m: usize) -> usize {
        match self {
            TermCount::ThreePowUnmeasured => 3usize.saturating_pow((n - m) as u32),
            TermCount::TwoPowN => 1usize << n.min(63),
            TermCount::Fixed(c) => c,
        }
    }
}

/// The three fixed models of the sampling-study suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedModel {
    /// Sparse `T` (infidelity 0.04) and sparse `E_pre`, `E_post` (0.01 each), `2^n` terms each.
    Sparse,
    /// Depolarizing `T` (per-qubit mean 0.01, sd 0.002) with sparse `E_pre`, `E_post` (0.01 each).
    DepolarizingMcmCrosstalk,
    /// Depolarizing `T` (mean 0.005, sd 0.0001), sparse `E_pre` (0.02), `E_post = I`.
    DepolarizingPreMcmCrosstalk,
}

fn default_terms() -> TermCount {
    TermCount::ThreePowUnmeasured
}

fn default_crosstalk_terms() -> TermCount {
    TermCount::Fixed(100)
}

fn default_pre_factor() -> f64 {
    5.0
}

fn default_post_factor() -> f64 {
    1.0
}

fn default_sd_fraction() -> f64 {
    0.2
}

/// Recipe for [`sample_random_usi`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "snake_case")]
pub enum SamplerConfig {
    /// `T` with infidelity `p`; `E_pre`, `E_post` with infidelity `p/2`.
    Sparse {
        p: f64,
        #[serde(default = "default_terms")]
        terms: TermCount,
    },
    /// Per-qubit depolarizing `T` with infidelities drawn from
    /// `N(p, (sd_fraction p)^2)`; `E_pre` with infidelity `pre_factor p` and
    /// `E_post` with `post_factor p`.
    DepolarizingCrosstalk {
        p: f64,
        #[serde(default = "default_crosstalk_terms")]
        terms: TermCount,
        #[serde(default = "default_pre_factor")]
        pre_factor: f64,
        #[serde(default = "default_post_factor")]
        post_factor: f64,
        #[serde(default = "default_sd_fraction")]
        sd_fraction: f64,
    },
    Named {
        model: NamedModel,
    },
}

/// Per-qubit SPAM flip targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpamConfig {
    pub prep_mean: f64,
    pub meas_mean: f64,
}

impl Default for SpamConfig {
    fn default() -> Self {
        SpamConfig {
            prep_mean: 0.005,
            meas_mean: 0.01,
        }
    }
}

/// Uniform random per-qubit rates rescaled so their mean is `mean`.
fn spam_vector<R: Rng + ?Sized>(n: usize, mean: f64, rng: &mut R) -> Result<Vec<f64>> {
    if mean == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let draws: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let total: f64 = draws.iter().sum();
    let v: Vec<f64> = draws.into_iter().map(|d| d * mean * n as f64 / total).collect();
    if v.iter().any(|&p| p > 1.0) {
        return Err(Error::Infeasible(format!(
            "mean SPAM rate {mean} produced a flip probability above 1"
        )));
    }
    Ok(v)
}

pub fn sample_spam<R: Rng + ?Sized>(n: usize, cfg: &SpamConfig, rng: &mut R) -> Result<Spam> {
    Ok(Spam {
        prep: spam_vector(n, cfg.prep_mean, rng)?,
        meas: spam_vector(n, cfg.meas_mean, rng)?,
    })
}

/// Candidate error locations for a channel.
enum Support<'a> {
    /// Any non-identity Pauli on `k` qubits.
    Any(usize),
    /// n-qubit Paulis acting nontrivially on at least one measured qubit.
    TouchingMeasured(&'a MCMLayerSpec),
}

impl Support<'_> {
    fn count(&self) -> u128 {
        match self {
            Support::Any(k) => (1u128 << (2 * k)) - 1,
            Support::TouchingMeasured(l) => ((1u128 << (2 * l.m())) - 1) << (2 * l.k()),
        }
    }

    fn nth(&self, i: u128) -> PauliOp {
        match self {
            Support::Any(k) => PauliOp::from_index(*k, (i + 1) as usize),
            Support::TouchingMeasured(l) => {
                let meas_count = (1u128 << (2 * l.m())) - 1;
                let meas = PauliOp::from_index(l.m(), (i % meas_count + 1) as usize);
                let un = PauliOp::from_index(l.k(), (i / meas_count) as usize);
                l.join(&meas, &un)
            }
        }
    }
}

/// Draws `terms` distinct error locations with uniform random weights
/// normalized to total error `infidelity`.
fn sparse_channel<R: Rng + ?Sized>(
    support: Support<'_>,
    width: usize,
    terms: usize,
    infidelity: f64,
    rng: &mut R,
) -> Result<ProbTable<PauliOp>> {
    if !(0.0..=1.0).contains(&infidelity) {
        return Err(Error::Infeasible(format!(
            "infidelity {infidelity} outside [0, 1]"
        )));
    }
    if infidelity == 0.0 || terms == 0 {
        if infidelity > 0.0 {
            return Err(Error::Infeasible(
                "positive infidelity with zero error terms".into(),
            ));
        }
        return Ok(ProbTable::identity_channel(width));
    }
    let available = support.count();
    if terms as u128 > available {
        return Err(Error::Infeasible(format!(
            "{terms} error terms requested but only {available} Paulis available"
        )));
    }
    let picks: Vec<u128> = if available <= usize::MAX as u128 && available <= 1 << 40 {
        index::sample(rng, available as usize, terms)
            .into_iter()
            .map(|i| i as u128)
            .collect()
    } else {
        let mut set = std::collections::BTreeSet::new();
        while set.len() < terms {
            set.insert(rng.gen_range(0..available));
        }
        set.into_iter().collect()
    };
    let weights: Vec<f64> = picks
        .iter()
        .map(|_| rng.gen::<f64>() + f64::MIN_POSITIVE)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut t = ProbTable::new();
    t.add(PauliOp::identity(width), 1.0 - infidelity);
    for (i, w) in picks.into_iter().zip(weights) {
        t.add(support.nth(i), infidelity * w / total);
    }
    Ok(t)
}

/// Tensor product of single-qubit depolarizing channels with the given infidelities.
fn depolarizing_product(infidelities: &[f64]) -> ProbTable<PauliOp> {
    let k = infidelities.len();
    let mut t = ProbTable::identity_channel(k);
    for (q, &e) in infidelities.iter().enumerate() {
        let mut next = ProbTable::new();
        for (p, w) in t.iter() {
            next.add(*p, w * (1.0 - e));
            for l in [Letter::X, Letter::Y, Letter::Z] {
                next.add(p.with_letter(q, l), w * e / 3.0);
            }
        }
        t = next;
    }
    t.prune();
    t
}

fn normal_infidelities<R: Rng + ?Sized>(k: usize, mean: f64, sd: f64, rng: &mut R) -> Vec<f64> {
    (0..k)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (mean + sd * z).clamp(0.0, 0.75)
        })
        .collect()
}

/// Samples a raw layer error model (without SPAM) from a recipe.
pub fn sample_random_usi<R: Rng + ?Sized>(
    layer: &MCMLayerSpec,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<RawInstrumentModel> {
    layer.validate()?;
    let (n, m, k) = (layer.n, layer.m(), layer.k());
    let mut model = RawInstrumentModel::noiseless(layer.clone());
    let touching = || Support::TouchingMeasured(layer);
    match *cfg {
        SamplerConfig::Sparse { p, terms } => {
            let c = terms.resolve(n, m);
            model.t_mid = sparse_channel(Support::Any(k), k, c, p, rng)?;
            model.e_pre = sparse_channel(touching(), n, c, p / 2.0, rng)?;
            model.e_post = sparse_channel(touching(), n, c, p / 2.0, rng)?;
        }
        SamplerConfig::DepolarizingCrosstalk {
            p,
            terms,
            pre_factor,
            post_factor,
            sd_fraction,
        } => {
            let c = terms.resolve(n, m);
            model.t_mid = depolarizing_product(&normal_infidelities(k, p, sd_fraction * p, rng));
            model.e_pre = sparse_channel(touching(), n, c, pre_factor * p, rng)?;
            model.e_post = sparse_channel(touching(), n, c, post_factor * p, rng)?;
        }
        SamplerConfig::Named { model: named } => {
            let c = TermCount::TwoPowN.resolve(n, m);
            match named {
                NamedModel::Sparse => {
                    model.t_mid = sparse_channel(Support::Any(k), k, c, 0.04, rng)?;
                    model.e_pre = sparse_channel(touching(), n, c, 0.01, rng)?;
                    model.e_post = sparse_channel(touching(), n, c, 0.01, rng)?;
                }
                NamedModel::DepolarizingMcmCrosstalk => {
                    model.t_mid = depolarizing_product(&normal_infidelities(k, 0.01, 0.002, rng));
                    model.e_pre = sparse_channel(touching(), n, c, 0.01, rng)?;
                    model.e_post = sparse_channel(touching(), n, c, 0.01, rng)?;
                }
                NamedModel::DepolarizingPreMcmCrosstalk => {
                    model.t_mid = depolarizing_product(&normal_infidelities(k, 0.005, 0.0001, rng));
                    model.e_pre = sparse_channel(touching(), n, c, 0.02, rng)?;
                }
            }
        }
    }
    model.validate()?;
    Ok(model)
}
