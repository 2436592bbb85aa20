//! Two-level bootstrap of the MCM-CB fidelity.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{fit_decay_points, mean_reliable, DecayPoint, SubexperimentData};
use crate::error::{Error, Result};
use crate::rng::labeled_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub samples: Vec<f64>,
    /// Standard deviation of `samples`.
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Resamples circuits within each depth (shared by triplets of one group),
/// refits every triplet, and, if `resample_triplets`, resamples triplets.
/// Replicates with no reliable triplet are dropped.
pub fn bootstrap_ci(
    data: &[SubexperimentData],
    resample_triplets: bool,
    delta: f64,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    if data.is_empty() {
        return Err(Error::InsufficientData("no subexperiments to bootstrap".into()));
    }
    let mut by_group: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, d) in data.iter().enumerate() {
        by_group.entry(d.group).or_default().push(i);
    }
    let samples: Vec<f64> = {
        use rayon::prelude::*;
        (0..resamples as u64)
            .into_par_iter()
            .map(|b| -> Result<Option<f64>> {
                let mut rng = labeled_rng(seed, "bootstrap", b);
                let mut estimates = vec![None; data.len()];
                for members in by_group.values() {
                    let first = &data[members[0]];
                    let picks: Vec<Vec<usize>> = first
                        .circuit_means
                        .iter()
                        .map(|v| (0..v.len()).map(|_| rng.gen_range(0..v.len())).collect())
                        .collect();
                    for &i in members {
                        let d = &data[i];
                        let points: Vec<DecayPoint> = d
                            .depths
                            .iter()
                            .zip(&d.circuit_means)
                            .zip(&picks)
                            .map(|((&depth, v), idx)| {
                                let vals: Vec<f64> = idx.iter().map(|&j| v[j]).collect();
                                DecayPoint::from_circuits(depth, &vals)
                            })
                            .collect();
                        estimates[i] = Some(fit_decay_points(&points, delta)?);
                    }
                }
                let estimates: Vec<_> = estimates
                    .into_iter()
                    .map(|e| e.expect("every triplet fitted"))
                    .collect();
                let f = if resample_triplets {
                    let k = estimates.len();
                    let chosen: Vec<usize> = (0..k).map(|_| rng.gen_range(0..k)).collect();
                    mean_reliable(chosen.iter().map(|&i| &estimates[i])).0
                } else {
                    mean_reliable(estimates.iter()).0
                };
                Ok(f.is_finite().then_some(f))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect()
    };
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let sigma = if samples.len() > 1 {
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(BootstrapSummary {
        ci_low: percentile(&sorted, 0.025),
        ci_high: percentile(&sorted, 0.975),
        sigma,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmcb::Triplet;
    use crate::pauli::{PauliOp, ZMask};

    #[test]
    fn percentiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.25), 2.0);
        assert!((percentile(&v, 0.975) - 4.9).abs() < 1e-12);
        assert!(percentile(&[], 0.5).is_nan());
    }

    #[test]
    fn spread_reflects_circuit_variance() {
        let t = Triplet {
            p: PauliOp::identity(1),
            c1: ZMask::identity(1),
            c2: ZMask::identity(1),
        };
        let exact = SubexperimentData {
            triplet: t,
            group: 0,
            depths: vec![2, 4],
            circuit_means: vec![vec![0.81; 5], vec![0.6561; 5]],
        };
        let s = bootstrap_ci(&[exact.clone()], true, 0.05, 50, 1).unwrap();
        assert!(s.sigma < 1e-12);
        assert!((s.ci_low - 0.9).abs() < 1e-9 && (s.ci_high - 0.9).abs() < 1e-9);
        let mut noisy = exact;
        noisy.circuit_means = vec![
            vec![0.78, 0.84, 0.8, 0.82, 0.81],
            vec![0.6, 0.7, 0.65, 0.66, 0.67],
        ];
        let s = bootstrap_ci(&[noisy], true, 0.05, 100, 1).unwrap();
        assert!(s.sigma > 1e-4);
        assert!(s.ci_low < s.ci_high);
    }
}
