//! End-to-end properties of the MCM-CB estimators.

use std::collections::BTreeMap;

use mcmlab::mcmcb::{
    analytic_mcmcb_fidelity, analyze, extract_eigenvalues_m1, first_order_flip_probabilities,
    fit_decay_points, marginal_subsystem_infidelity, mean_reliable, predict_subexperiment_r, run_mcmcb,
    select_triplets, DecayPoint, McmcbConfig, SamplingMode, SubexperimentData, Triplet,
};
use mcmlab::noise::{
    sample_random_usi, twirled_usi, usi_fidelity, MCMLayerSpec, RawInstrumentModel, SamplerConfig, TermCount,
    Usi, UsiKey,
};
use mcmlab::pauli::{PauliOp, ProbTable, ZMask};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn q(s: &str) -> PauliOp {
    s.parse().unwrap()
}

fn all_decays(u: &Usi) -> BTreeMap<Triplet, f64> {
    let (m, k) = (u.m(), u.k());
    let mut out = BTreeMap::new();
    for p in PauliOp::all(k) {
        for c1 in ZMask::all(m) {
            for c2 in ZMask::all(m) {
                out.insert(
                    Triplet { p, c1, c2 },
                    predict_subexperiment_r(u, &p, c1.bits(), c2.bits(), 0.0)
                        .unwrap()
                        .r,
                );
            }
        }
    }
    out
}

#[test]
fn single_mcm_eigenvalue_fixture() {
    // q00 = 0.9, q10 = 0.05, q01 = 0.03, q11 = 0.02, no unmeasured error.
    let layer = MCMLayerSpec::idle(2, 1).unwrap();
    let t: ProbTable<UsiKey> = [((0, 0), 0.9), ((1, 0), 0.05), ((0, 1), 0.03), ((1, 1), 0.02)]
        .into_iter()
        .map(|((a, b), w)| (UsiKey { a, b, q: q("I") }, w))
        .collect();
    let u = Usi::new(layer, t).unwrap();
    let eig = extract_eigenvalues_m1(&all_decays(&u)).unwrap();
    let e = eig[&q("I")];
    assert!((e.lambda00 - 0.25 * (1.0 + 0.84 + 2.0 * (0.9f64 * 0.86).sqrt())).abs() < 1e-12);
    assert!((e.lambda00 - 0.89989).abs() < 1e-5);
    assert!((e.lambda_flip - 0.08).abs() < 1e-12);
    assert!(analytic_mcmcb_fidelity(&u).unwrap() <= usi_fidelity(&u));
}

#[test]
fn marginal_infidelity_localizes_planted_error() {
    // Depolarizing error only on global qubit 1 (the first unmeasured qubit).
    let layer = MCMLayerSpec::new(3, vec![0], vec![]).unwrap();
    let mut model = RawInstrumentModel::noiseless(layer);
    model.t_mid = [(q("II"), 0.97), (q("XI"), 0.01), (q("YI"), 0.01), (q("ZI"), 0.01)]
        .into_iter()
        .collect();
    let cfg = McmcbConfig {
        depths: vec![2, 4, 8, 16],
        circuits_per_depth: 10,
        shots: 300,
        sampling: SamplingMode::Exhaustive,
        bootstrap_resamples: 20,
        seed: 17,
        ..McmcbConfig::default()
    };
    let res = run_mcmcb(&model, &cfg).unwrap();
    let truth = 1.0 - usi_fidelity(&twirled_usi(&model).unwrap());
    let full = marginal_subsystem_infidelity(&res, &[0], &[0, 1, 2]).unwrap();
    assert!((full - (1.0 - res.f_hat)).abs() < 1e-12);
    let on = marginal_subsystem_infidelity(&res, &[0], &[1]).unwrap();
    let off = marginal_subsystem_infidelity(&res, &[0], &[2]).unwrap();
    assert!((on - truth).abs() < 0.006, "{on} vs {truth}");
    assert!((full - truth).abs() < 0.006, "{full} vs {truth}");
    assert_eq!(off, 0.0);
}

#[test]
fn uniform_k_is_unbiased_for_the_exhaustive_mean() {
    let layer = MCMLayerSpec::idle(4, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = sample_random_usi(
        &layer,
        &SamplerConfig::Sparse {
            p: 0.08,
            terms: TermCount::ThreePowUnmeasured,
        },
        &mut rng,
    )
    .unwrap();
    let u = twirled_usi(&model).unwrap();
    let pool = all_decays(&u);
    let target = analytic_mcmcb_fidelity(&u).unwrap();
    let estimates: Vec<f64> = (0..400)
        .map(|s| {
            let cfg = McmcbConfig {
                sampling: SamplingMode::UniformK { k: 50 },
                seed: s,
                ..McmcbConfig::default()
            };
            let picks = select_triplets(&model, &cfg);
            picks.iter().map(|g| pool[&g[0]]).sum::<f64>() / picks.len() as f64
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / 400.0;
    let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 399.0).sqrt();
    assert!((mean - target).abs() <= 3.0 * sd / 20.0, "{mean} vs {target}");
}

/// Synthetic data `r^d + N(0, noise)` per circuit for the triplets of `cfg`.
fn synthetic(
    pool: &BTreeMap<Triplet, f64>,
    model: &RawInstrumentModel,
    cfg: &McmcbConfig,
    noise: f64,
) -> Vec<SubexperimentData> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let normal = Normal::new(0.0, noise).unwrap();
    select_triplets(model, cfg)
        .into_iter()
        .enumerate()
        .map(|(g, t)| {
            let r = pool[&t[0]];
            let circuit_means = cfg
                .depths
                .iter()
                .map(|&d| {
                    (0..cfg.circuits_per_depth)
                        .map(|_| r.powi(d as i32) + normal.sample(&mut rng))
                        .collect()
                })
                .collect();
            SubexperimentData {
                triplet: t[0],
                group: g,
                depths: cfg.depths.clone(),
                circuit_means,
            }
        })
        .collect()
}

#[test]
fn bootstrap_sigma_tracks_repetition_spread() {
    let layer = MCMLayerSpec::idle(4, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = sample_random_usi(
        &layer,
        &SamplerConfig::Sparse {
            p: 0.08,
            terms: TermCount::ThreePowUnmeasured,
        },
        &mut rng,
    )
    .unwrap();
    let pool = all_decays(&twirled_usi(&model).unwrap());
    let base = McmcbConfig {
        circuits_per_depth: 10,
        sampling: SamplingMode::UniformK { k: 100 },
        bootstrap_resamples: 200,
        ..McmcbConfig::default()
    };
    let f_hat = |cfg: &McmcbConfig| {
        let data = synthetic(&pool, &model, cfg, 0.02);
        let fits: Vec<_> = data.iter().map(|d| d.fit(cfg.delta).unwrap()).collect();
        mean_reliable(fits.iter()).0
    };
    let reps: Vec<f64> = (0..400)
        .map(|s| {
            f_hat(&McmcbConfig {
                seed: 1000 + s,
                ..base.clone()
            })
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let empirical = (reps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
    let sigmas: Vec<f64> = (0..10)
        .map(|s| {
            let cfg = McmcbConfig {
                seed: 5000 + s,
                ..base.clone()
            };
            analyze(4, 1, &cfg, synthetic(&pool, &model, &cfg, 0.02))
                .unwrap()
                .sigma_hat
        })
        .collect();
    let sigma = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
    assert!(
        (sigma / empirical - 1.0).abs() <= 0.3,
        "bootstrap {sigma} vs empirical {empirical}"
    );
}

#[test]
fn fit_rejects_decays_below_threshold() {
    let pts: Vec<DecayPoint> = [2, 4, 8]
        .iter()
        .map(|&d| DecayPoint {
            depth: d,
            mean: 0.01f64.powi(d as i32),
            sem: 1e-3,
        })
        .collect();
    let est = fit_decay_points(&pts, 0.05).unwrap();
    assert!(!est.reliable);
}

fn small_usi(k: usize, entries: &[(u64, u64, usize, f64)]) -> (Usi, f64) {
    let layer = MCMLayerSpec::idle(k + 1, 1).unwrap();
    let mut t = ProbTable::new();
    let mut err = 0.0;
    for &(a, b, qi, w) in entries {
        t.add(
            UsiKey {
                a,
                b,
                q: PauliOp::from_index(k, qi),
            },
            w,
        );
        err += w;
    }
    t.add(
        UsiKey {
            a: 0,
            b: 0,
            q: PauliOp::identity(k),
        },
        1.0 - err,
    );
    (Usi::new(layer, t).unwrap(), err)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// First-order expansions of the products learned by MCM-CB.
    #[test]
    fn first_order_products(k in 1usize..=2, raw in proptest::collection::vec((0u64..2, 0u64..2, 0usize..16, 0.0f64..1.0), 1..6), total in 0.0f64..0.02) {
        let raw: Vec<_> = raw.into_iter().map(|(a, b, qi, w)| (a, b, qi % (1 << (2 * k)), w)).filter(|e| (e.0, e.1, e.2) != (0, 0, 0)).collect();
        prop_assume!(!raw.is_empty());
        let scale: f64 = raw.iter().map(|e| e.3).sum();
        prop_assume!(scale > 0.0);
        let entries: Vec<_> = raw.iter().map(|&(a, b, qi, w)| (a, b, qi, w * total / scale)).collect();
        let (u, eps) = small_usi(k, &entries);
        let class = |a: u64, b: u64| -> f64 { u.table().iter().filter(|(key, _)| key.a == a && key.b == b).map(|(_, w)| w).sum() };
        let (p01, p10, p11) = (class(0, 1), class(1, 0), class(1, 1));
        let lt = |p: &PauliOp, c, c2| mcmlab::noise::lambda_tilde(&u, p, c, c2).unwrap();
        let bound = 4.0 * eps * eps + 1e-15;
        let id = PauliOp::identity(k);
        let exact_i = lt(&id, 1, 0) * lt(&id, 0, 1);
        prop_assert!((exact_i - (1.0 - 2.0 * (p01 + p10 + 2.0 * p11))).abs() <= bound);
        for p in PauliOp::all(k).skip(1) {
            let mut anti = 0.0;
            for (key, w) in u.table().iter() {
                let odd = (key.q.x() & p.z() ^ key.q.z() & p.x()).count_ones() % 2 == 1;
                if odd && key.a == key.b {
                    anti += if key.a == 0 { w } else { -w };
                }
            }
            let exact = lt(&p, 1, 0) * lt(&p, 0, 1);
            let first = 1.0 - 2.0 * (p01 + p10 + 2.0 * p11) - 4.0 * anti;
            prop_assert!((exact - first).abs() <= bound, "{}: {} vs {}", p, exact, first);
        }
        // The estimator pair from the identity decays.
        let f = first_order_flip_probabilities(&all_decays(&u), k).unwrap();
        prop_assert!((f.flip - (p01 + p10)).abs() < 1e-12);
        prop_assert!((f.p11 - p11).abs() <= eps * eps + 1e-15);
    }

    #[test]
    fn lower_bound_holds_for_random_tables(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(1..=2);
        let k = rng.gen_range(0..=2);
        let layer = MCMLayerSpec::idle(k + m, m).unwrap();
        // Error mass at most 1/2 keeps every lambda~ nonnegative.
        let err = rng.gen_range(0.0..0.5);
        let mut t = ProbTable::new();
        for _ in 0..rng.gen_range(1..8) {
            let key = UsiKey { a: rng.gen_range(0..1 << m), b: rng.gen_range(0..1 << m), q: PauliOp::from_index(k, rng.gen_range(0..1 << (2 * k))) };
            t.add(key, rng.gen::<f64>());
        }
        let total = t.total();
        t.scale(err / total);
        t.add(UsiKey { a: 0, b: 0, q: PauliOp::identity(k) }, 1.0 - err);
        let u = Usi::new(layer, t).unwrap();
        prop_assert!(analytic_mcmcb_fidelity(&u).unwrap() <= usi_fidelity(&u) + 1e-12);
    }
}
