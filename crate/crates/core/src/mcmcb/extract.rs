//! Eigenvalue and error-rate extraction from fitted decays.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{McmcbResult, Triplet};
use crate::error::{Error, Result};
use crate::pauli::{wht_eigenvalues_to_probs, PauliOp, ProbTable, ZMask};

/// Single-MCM eigenvalue classes for one unmeasured Pauli `P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M1Eigenvalues {
    pub lambda00: f64,
    /// `lambda01 + lambda10`; the two are not separately identifiable.
    pub lambda_flip: f64,
    pub lambda11: f64,
}

/// Error rates of the three eigenvalue classes, indexed by unmeasured Pauli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliErrorRates {
    /// `q_{00,Q}`: no outcome flip.
    pub no_flip: ProbTable<PauliOp>,
    /// `q_{01,Q} + q_{10,Q}`.
    pub flip: ProbTable<PauliOp>,
    /// `q_{11,Q}`.
    pub both: ProbTable<PauliOp>,
}

/// First-order flip probabilities of a single MCM (marginal over the
/// unmeasured error).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipProbabilities {
    pub p00: f64,
    /// `p01 + p10`, exact.
    pub flip: f64,
    pub p11: f64,
}

/// Mean reliable `r_hat` per triplet label.
pub fn decay_table(res: &McmcbResult) -> BTreeMap<Triplet, f64> {
    let mut acc: BTreeMap<Triplet, (f64, usize)> = BTreeMap::new();
    for t in res.triplets.iter().filter(|t| t.estimate.reliable) {
        let e = acc.entry(t.triplet).or_default();
        e.0 += t.estimate.r_hat;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
}

/// Standard error of each [`decay_table`] entry, treating repeated fits of a
/// label as independent.
pub fn decay_stderr_table(res: &McmcbResult) -> BTreeMap<Triplet, f64> {
    let mut acc: BTreeMap<Triplet, (f64, usize)> = BTreeMap::new();
    for t in res.triplets.iter().filter(|t| t.estimate.reliable) {
        let e = acc.entry(t.triplet).or_default();
        e.0 += t.estimate.stderr * t.estimate.stderr;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (v, c))| (k, v.sqrt() / c as f64))
        .collect()
}

/// For `m = 1`, with `r(c1, c2)` the decay of circuit label `(P, c1, c2)`:
/// `lambda00 = (r00 + r11 + 2 r10) / 4`, `lambda01 + lambda10 = (r00 - r11) / 2`,
/// `lambda11 = (r00 + r11 - 2 r10) / 4`. `r10` and `r01` estimate the same
/// decay and are averaged when both exist.
pub fn extract_eigenvalues_m1(decays: &BTreeMap<Triplet, f64>) -> Result<BTreeMap<PauliOp, M1Eigenvalues>> {
    let mut by_p: BTreeMap<PauliOp, [Option<f64>; 4]> = BTreeMap::new();
    for (t, &r) in decays {
        if t.c1.len() != 1 {
            return Err(Error::Unsupported(
                "eigenvalue extraction requires exactly one measured qubit".into(),
            ));
        }
        by_p.entry(t.p).or_default()[(t.c1.bits() | t.c2.bits() << 1) as usize] = Some(r);
    }
    let mut out = BTreeMap::new();
    for (p, r) in by_p {
        let missing = |what: &str| Error::MissingKey(format!("decay {what} for {p}"));
        let r00 = r[0].ok_or_else(|| missing("(0,0)"))?;
        let r11 = r[3].ok_or_else(|| missing("(1,1)"))?;
        let off = match (r[1], r[2]) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => return Err(missing("(1,0)")),
        };
        out.insert(
            p,
            M1Eigenvalues {
                lambda00: 0.25 * (r00 + r11 + 2.0 * off),
                lambda_flip: 0.5 * (r00 - r11),
                lambda11: 0.25 * (r00 + r11 - 2.0 * off),
            },
        );
    }
    Ok(out)
}

/// Inverse Walsh-Hadamard transform of each eigenvalue class; needs every
/// `P` on `k` qubits.
pub fn extract_pauli_error_rates(
    eig: &BTreeMap<PauliOp, M1Eigenvalues>,
    k: usize,
) -> Result<PauliErrorRates> {
    let class = |f: fn(&M1Eigenvalues) -> f64| -> Result<ProbTable<PauliOp>> {
        let map: BTreeMap<PauliOp, f64> = eig.iter().map(|(p, e)| (*p, f(e))).collect();
        wht_eigenvalues_to_probs(&map, k)
    };
    Ok(PauliErrorRates {
        no_flip: class(|e| e.lambda00)?,
        flip: class(|e| e.lambda_flip)?,
        both: class(|e| e.lambda11)?,
    })
}

/// Rates and their standard errors, propagated linearly from the fit
/// uncertainties (the extraction is affine in the decays).
pub fn pauli_error_rates_with_sigma(res: &McmcbResult) -> Result<(PauliErrorRates, PauliErrorRates)> {
    let k = res.n - res.m;
    let decays = decay_table(res);
    let se = decay_stderr_table(res);
    let rates = |d: &BTreeMap<Triplet, f64>| extract_pauli_error_rates(&extract_eigenvalues_m1(d)?, k);
    let base = rates(&decays)?;
    let classes = |r: &PauliErrorRates| [r.no_flip.clone(), r.flip.clone(), r.both.clone()];
    let mut var: [BTreeMap<PauliOp, f64>; 3] = Default::default();
    for (t, s) in &se {
        let mut shifted = decays.clone();
        *shifted.get_mut(t).expect("same keys") += s;
        let moved = rates(&shifted)?;
        for ((v, b), m) in var.iter_mut().zip(classes(&base)).zip(classes(&moved)) {
            for p in PauliOp::all(k) {
                *v.entry(p).or_default() += (m.get(&p) - b.get(&p)).powi(2);
            }
        }
    }
    let table = |v: &BTreeMap<PauliOp, f64>| {
        v.iter()
            .map(|(p, x)| (*p, x.sqrt()))
            .collect::<ProbTable<PauliOp>>()
    };
    let sigma = PauliErrorRates {
        no_flip: table(&var[0]),
        flip: table(&var[1]),
        both: table(&var[2]),
    };
    Ok((base, sigma))
}

/// From the `P = I` decays of a single MCM: `p01 + p10 = (1 - r(Z,Z)) / 2`
/// exactly, and `r(Z,I)^2 = 1 - 2 (p01 + p10 + 2 p11)` to first order.
pub fn first_order_flip_probabilities(
    decays: &BTreeMap<Triplet, f64>,
    k: usize,
) -> Result<FlipProbabilities> {
    let id = PauliOp::identity(k);
    let get = |c1: u64, c2: u64| -> Result<f64> {
        let t = Triplet {
            p: id,
            c1: ZMask::new(1, c1)?,
            c2: ZMask::new(1, c2)?,
        };
        decays
            .get(&t)
            .copied()
            .ok_or_else(|| Error::MissingKey(format!("decay ({c1},{c2}) for {id}")))
    };
    let r11 = get(1, 1)?;
    let off = match (get(1, 0), get(0, 1)) {
        (Ok(a), Ok(b)) => 0.5 * (a + b),
        (Ok(a), Err(_)) | (Err(_), Ok(a)) => a,
        (Err(e), Err(_)) => return Err(e),
    };
    let flip = 0.5 * (1.0 - r11);
    let p11 = 0.25 * (1.0 - off * off - 2.0 * flip);
    Ok(FlipProbabilities {
        p00: 1.0 - flip - p11,
        flip,
        p11,
    })
}

/// `1 - mean r` over triplets acting trivially outside `subsystem` (global
/// qubit indices).
pub fn marginal_subsystem_infidelity(
    res: &McmcbResult,
    measured: &[usize],
    subsystem: &[usize],
) -> Result<f64> {
    let unmeasured: Vec<usize> = (0..res.n).filter(|q| !measured.contains(q)).collect();
    let mut un_mask = 0u64;
    for (j, q) in unmeasured.iter().enumerate() {
        if subsystem.contains(q) {
            un_mask |= 1 << j;
        }
    }
    let mut meas_mask = 0u64;
    for (j, q) in measured.iter().enumerate() {
        if subsystem.contains(q) {
            meas_mask |= 1 << j;
        }
    }
    let inside = |t: &Triplet| t.p.support() & !un_mask == 0 && (t.c1.bits() | t.c2.bits()) & !meas_mask == 0;
    let vals: Vec<f64> = decay_table(res)
        .into_iter()
        .filter(|(t, _)| inside(t))
        .map(|(_, r)| r)
        .collect();
    if vals.is_empty() {
        return Err(Error::InsufficientData(
            "no reliable triplet supported on the subsystem".into(),
        ));
    }
    Ok(1.0 - vals.iter().sum::<f64>() / vals.len() as f64)
}
