//! Cross-checks of the analytic instrument algebra and the stabilizer
//! simulator against dense density-matrix evolution.

mod common;

use common::*;
use mcmlab::clifford::{conjugate, Gate, GateApp};
use mcmlab::noise::{
    branch_no_error_probabilities, rc_fidelity_from_raw, twirled_usi, usi_fidelity, usi_from_raw,
    MCMLayerSpec, RawInstrumentModel,
};
use mcmlab::pauli::PauliOp;
use mcmlab::tableau::{PrepState, Tableau};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layers() -> Vec<MCMLayerSpec> {
    vec![
        MCMLayerSpec::new(2, vec![0], vec![GateApp::one(Gate::H, 1)]).unwrap(),
        MCMLayerSpec::new(
            3,
            vec![1],
            vec![GateApp::two(Gate::Cx, 0, 2), GateApp::one(Gate::S, 2)],
        )
        .unwrap(),
        MCMLayerSpec::new(3, vec![0, 2], vec![GateApp::one(Gate::H, 1)]).unwrap(),
    ]
}

fn check_sign_law(r: &RawInstrumentModel) {
    let (branch, collapse) = sign_law_deviation(r);
    assert!(branch < 1e-10, "branch PTM deviates by {branch}");
    assert!(collapse < 1e-10, "summed PTM deviates by {collapse}");
}

#[test]
fn twirled_branches_follow_sign_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for layer in layers() {
        check_sign_law(&random_model(&layer, false, 0.08, &mut rng));
    }
}

#[test]
fn twirled_branches_follow_sign_law_with_conditioned_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for layer in layers() {
        check_sign_law(&random_model(&layer, true, 0.08, &mut rng));
    }
}

#[test]
fn noiseless_twirl_is_ideal_instrument() {
    for layer in layers() {
        let r = RawInstrumentModel::noiseless(layer.clone());
        let n = layer.n;
        for kk in 0..1u64 << layer.m() {
            let a = ptm(n, |rho| twirled_branch(&r, rho, kk));
            let b = ptm(n, |rho| raw_branch(&r, rho, kk));
            for (ra, rb) in a.iter().zip(&b) {
                for (x, y) in ra.iter().zip(rb) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn branch_overlaps_match_no_error_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for layer in layers() {
        for conditioned in [false, true] {
            let r = random_model(&layer, conditioned, 0.08, &mut rng);
            let p = branch_no_error_probabilities(&r).unwrap();
            for (kk, pk) in p.iter().enumerate() {
                let dense = branch_overlap(&r, kk as u64);
                assert!((dense - pk).abs() < 1e-10, "branch {kk}: {dense} vs {pk}");
            }
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            assert!((rc_fidelity_from_raw(&r).unwrap() - mean).abs() < 1e-12);
            assert!((usi_fidelity(&twirled_usi(&r).unwrap()) - mean).abs() < 1e-12);
            if !conditioned {
                assert_eq!(usi_from_raw(&r).unwrap(), twirled_usi(&r).unwrap());
            }
        }
    }
}

fn random_gate<R: Rng>(n: usize, rng: &mut R) -> GateApp {
    const ONE: [Gate; 7] = [Gate::I, Gate::X, Gate::Y, Gate::Z, Gate::H, Gate::S, Gate::Sdg];
    const TWO: [Gate; 3] = [Gate::Cx, Gate::Cz, Gate::Swap];
    if rng.gen_bool(0.4) {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n)) % n;
        GateApp::two(TWO[rng.gen_range(0..3)], a, b)
    } else {
        GateApp::one(ONE[rng.gen_range(0..7)], rng.gen_range(0..n))
    }
}

const PREPS: [PrepState; 6] = [
    PrepState::ZPlus,
    PrepState::ZMinus,
    PrepState::XPlus,
    PrepState::XMinus,
    PrepState::YPlus,
    PrepState::YMinus,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tableau_matches_dense_evolution(seed in any::<u64>(), n in 1usize..=3, len in 0usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states: Vec<PrepState> = (0..n).map(|_| PREPS[rng.gen_range(0..6)]).collect();
        let gates: Vec<GateApp> = if n == 1 {
            (0..len).map(|_| GateApp::one([Gate::H, Gate::S, Gate::Sdg, Gate::X, Gate::Y][rng.gen_range(0..5)], 0)).collect()
        } else {
            (0..len).map(|_| random_gate(n, &mut rng)).collect()
        };
        let mut tab = Tableau::new(n).unwrap();
        tab.prepare(&states).unwrap();
        for g in &gates {
            tab.apply(g).unwrap();
        }
        let extra = PauliOp::from_index(n, rng.gen_range(0..1usize << (2 * n)));
        tab.apply_pauli_op(&extra);
        let mut rho = product_state(&states).conj_by(&circuit_unitary(&gates, n));
        rho = rho.conj_by(&pauli_matrix(&extra));
        for p in PauliOp::all(n) {
            let dense = expectation(&rho, &p);
            let stab = tab.pauli_expectation(&p).map_or(0.0, f64::from);
            prop_assert!((dense - stab).abs() < 1e-10, "{}: dense {} tableau {}", p, dense, stab);
        }
    }

    #[test]
    fn signed_conjugation_matches_dense(seed in any::<u64>(), len in 0usize..12) {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gates: Vec<GateApp> = (0..len).map(|_| random_gate(n, &mut rng)).collect();
        let u = circuit_unitary(&gates, n);
        let p = PauliOp::from_index(n, rng.gen_range(0..64));
        let img = conjugate(&gates, &p).unwrap();
        let mut want = pauli_matrix(&img.pauli);
        want.a.iter_mut().for_each(|x| *x *= img.sign());
        prop_assert!(pauli_matrix(&p).conj_by(&u).max_abs_diff(&want) < 1e-10);
    }
}
