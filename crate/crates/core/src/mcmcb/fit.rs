//! Weighted Levenberg-Marquardt fit of `f(d) = A r^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest variance used as a weight denominator.
const VAR_FLOOR: f64 = 1e-12;
const MAX_ITER: usize = 200;

/// Mean of the signed outcome at one depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub depth: usize,
    pub mean: f64,
    /// Standard error of `mean` across circuits.
    pub sem: f64,
}

impl DecayPoint {
    /// Mean and standard error of per-circuit averages.
    pub fn from_circuits(depth: usize, values: &[f64]) -> DecayPoint {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sem = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        DecayPoint { depth, mean, sem }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub r_hat: f64,
    pub a_hat: f64,
    pub stderr: f64,
    pub a_stderr: f64,
    pub residuals: Vec<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reliable: bool,
}

impl DecayEstimate {
    fn failed(points: &[DecayPoint]) -> DecayEstimate {
        DecayEstimate {
            r_hat: 0.0,
            a_hat: 0.0,
            stderr: f64::INFINITY,
            a_stderr: f64::INFINITY,
            residuals: points.iter().map(|p| p.mean).collect(),
            chi2: f64::INFINITY,
            iterations: 0,
            converged: false,
            reliable: false,
        }
    }
}

fn weights(points: &[DecayPoint]) -> Vec<f64> {
    points
        .iter()
        .map(|p| 1.0 / (p.sem * p.sem).max(VAR_FLOOR))
        .collect()
}

fn chi2(points: &[DecayPoint], w: &[f64], a: f64, r: f64) -> f64 {
    points
        .iter()
        .zip(w)
        .map(|(p, w)| w * (p.mean - a * r.powi(p.depth as i32)).powi(2))
        .sum()
}

/// Weighted log-linear seed from the points with positive means.
fn seed(points: &[DecayPoint]) -> Option<(f64, f64)> {
    let pos: Vec<&DecayPoint> = points.iter().filter(|p| p.mean > 0.0).collect();
    let distinct = pos
        .iter()
        .map(|p| p.depth)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    if distinct < 2 {
        return None;
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in pos {
        // Delta method: var(ln f) = sem^2 / f^2.
        let w = p.mean * p.mean / (p.sem * p.sem).max(VAR_FLOOR);
        let (x, y) = (p.depth as f64, p.mean.ln());
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return None;
    }
    let slope = (sw * sxy - sx * sy) / det;
    let icept = (sy - slope * sx) / sw;
    Some((icept.exp(), slope.exp().clamp(0.0, 1.0)))
}

/// Fits `A r^d` with `r` constrained to `[0, 1]`; with even depths the sign
/// of `r` is not identifiable, so the nonnegative root is reported.
/// `delta` is the reliability threshold on `r`.
pub fn fit_decay_points(points: &[DecayPoint], delta: f64) -> Result<DecayEstimate> {
    let depths: std::collections::BTreeSet<usize> = points.iter().map(|p| p.depth).collect();
    if depths.len() < 2 {
        return Err(Error::InsufficientData(
            "decay fit needs at least two distinct depths".into(),
        ));
    }
    if points.iter().all(|p| p.mean <= 0.0) {
        return Ok(DecayEstimate::failed(points));
    }
    let w = weights(points);
    let (mut a, mut r) = seed(points).unwrap_or_else(|| {
        let a0 = points.iter().map(|p| p.mean).fold(f64::MIN, f64::max);
        (a0, 0.5)
    });
    let mut cost = chi2(points, &w, a, r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = cost == 0.0;
    while !converged && iterations < MAX_ITER {
        iterations += 1;
        // Normal equations J^T W J and J^T W res for parameters (A, r).
        let (mut h00, mut h01, mut h11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (p, wi) in points.iter().zip(&w) {
            let d = p.depth as i32;
            let rd = r.powi(d);
            let j0 = rd;
            let j1 = if d == 0 { 0.0 } else { a * d as f64 * r.powi(d - 1) };
            let res = p.mean - a * rd;
            h00 += wi * j0 * j0;
            h01 += wi * j0 * j1;
            h11 += wi * j1 * j1;
            g0 += wi * j0 * res;
            g1 += wi * j1 * res;
        }
        let mut improved = false;
        for _ in 0..30 {
            let (m00, m11) = (h00 * (1.0 + lambda), h11 * (1.0 + lambda));
            let det = m00 * m11 - h01 * h01;
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let da = (m11 * g0 - h01 * g1) / det;
            let dr = (m00 * g1 - h01 * g0) / det;
            let (na, nr) = (a + da, (r + dr).clamp(0.0, 1.0));
            let nc = chi2(points, &w, na, nr);
            if nc <= cost {
                let rel = (cost - nc) / cost.max(1e-300);
                let step = (na - a).abs() + (nr - r).abs();
                a = na;
                r = nr;
                cost = nc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-12 || step < 1e-14 || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            converged = true;
        }
    }
    let all_exact = points.iter().all(|p| p.sem == 0.0);
    let (mut var_a, mut var_r) = (0.0, 0.0);
    if !all_exact {
        let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
        for (p, wi) in points.iter().zip(&w) {
            let d = p.depth as i32;
            let j0 = r.powi(d);
            let j1 = if d == 0 { 0.0 } else { a * d as f64 * r.powi(d - 1) };
            h00 += wi * j0 * j0;
            h01 += wi * j0 * j1;
            h11 += wi * j1 * j1;
        }
        let det = h00 * h11 - h01 * h01;
        if det > 0.0 {
            var_a = h11 / det;
            var_r = h00 / det;
        } else {
            var_a = f64::INFINITY;
            var_r = f64::INFINITY;
        }
    }
    let residuals = points
        .iter()
        .map(|p| p.mean - a * r.powi(p.depth as i32))
        .collect();
    let finite = a.is_finite() && r.is_finite();
    Ok(DecayEstimate {
        r_hat: r,
        a_hat: a,
        stderr: var_r.sqrt(),
        a_stderr: var_a.sqrt(),
        residuals,
        chi2: cost,
        iterations,
        converged,
        reliable: finite && r >= delta,
    })
}
