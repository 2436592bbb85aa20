//! Predicted decay rates from a known USI.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::noise::{lambda_tilde_table, LambdaTildeTable, Usi};
use crate::pauli::{PauliOp, ZMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub r: f64,
    pub reliable: bool,
}

/// Geometric mean over one period of `V` of
/// `lambda~_{V^j[P], (Z(c2)^(j-1) Z(c1), Z(c2)^j Z(c1))}`. The input mask
/// alternates `c1, c1^c2, c1, ...`. A negative product gives a negative `r`
/// of the same magnitude and is flagged unreliable.
pub fn predict_r(u: &Usi, p: &PauliOp, c1: u64, c2: u64, delta: f64) -> Result<Prediction> {
    let table = lambda_tilde_table(u)?;
    predict_r_with(u, &table, p, c1, c2, delta)
}

pub fn predict_r_with(
    u: &Usi,
    table: &LambdaTildeTable,
    p: &PauliOp,
    c1: u64,
    c2: u64,
    delta: f64,
) -> Result<Prediction> {
    let layer = u.layer();
    let l = layer.v_order()?;
    let mut prod = 1.0;
    for j in 1..=l {
        let img = layer.v_power(p, j)?;
        let (cin, cout) = if j % 2 == 1 { (c1, c1 ^ c2) } else { (c1 ^ c2, c1) };
        prod *= table.get(&img, cin, cout).unwrap_or(0.0);
    }
    let r = prod.signum() * prod.abs().powf(1.0 / l as f64);
    Ok(Prediction {
        r,
        reliable: prod > 0.0 && r >= delta,
    })
}

/// Prediction for the benchmark circuit labelled `(P, c1, c2)`, whose analysis
/// uses MCM mask `t = c1 ^ c2` and final mask `c1`. This selects the decay
/// `predict_r(P, c1, c1 ^ c2)`.
pub fn predict_subexperiment_r(u: &Usi, p: &PauliOp, c1: u64, c2: u64, delta: f64) -> Result<Prediction> {
    predict_r(u, p, c1, c1 ^ c2, delta)
}

/// Average predicted decay over every `(P, c1, c2)`.
pub fn analytic_mcmcb_fidelity(u: &Usi) -> Result<f64> {
    let table = lambda_tilde_table(u)?;
    let (m, k) = (u.m(), u.k());
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in PauliOp::all(k) {
        for c1 in ZMask::all(m) {
            for c2 in ZMask::all(m) {
                sum += predict_r_with(u, &table, &p, c1.bits(), c2.bits(), 0.0)?.r;
                count += 1;
            }
        }
    }
    Ok(sum / count as f64)
}
