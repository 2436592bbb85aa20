//! Learnability reports keyed by edge labels.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{ParameterMonomial, Ptg};
use crate::error::Result;

/// Monomial written as `label -> exponent`.
pub type LabelledMonomial = BTreeMap<String, i64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialVerdict {
    pub monomial: LabelledMonomial,
    pub learnable: bool,
    /// Coefficients over `LearnabilityReport::basis`, present iff learnable.
    pub basis_coefficients: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnabilityReport {
    pub n: usize,
    pub vertices: usize,
    pub edges: usize,
    pub components: usize,
    /// `E - V + C`; always equal to `basis.len()`.
    pub basis_size: usize,
    pub basis: Vec<LabelledMonomial>,
    pub verdicts: Vec<MonomialVerdict>,
}

impl Ptg {
    pub fn labelled(&self, mono: &ParameterMonomial) -> Result<LabelledMonomial> {
        mono.iter()
            .map(|(&id, &exp)| Ok((self.edge(id)?.label.clone(), exp)))
            .collect()
    }

    pub fn from_labelled(&self, mono: &LabelledMonomial) -> Result<ParameterMonomial> {
        let terms: Vec<(&str, i64)> = mono.iter().map(|(l, &e)| (l.as_str(), e)).collect();
        self.monomial(&terms)
    }
}

/// Basis and per-query verdicts; unknown labels are an error.
pub fn learnability_report(g: &Ptg, queries: &[LabelledMonomial]) -> Result<LearnabilityReport> {
    let basis = g.learnable_basis();
    let verdicts = queries
        .iter()
        .map(|q| {
            let mono = g.from_labelled(q)?;
            let coeffs = if g.is_learnable(&mono)? {
                g.express_in_basis(&basis, &mono)?
            } else {
                None
            };
            Ok(MonomialVerdict {
                monomial: q.clone(),
                learnable: coeffs.is_some(),
                basis_coefficients: coeffs,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LearnabilityReport {
        n: g.n,
        vertices: g.vertices.len(),
        edges: g.edges.len(),
        components: g.components(),
        basis_size: g.cycle_space_dimension(),
        basis: basis.iter().map(|b| g.labelled(b)).collect::<Result<_>>()?,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ptg::build_ptg;
    use crate::ptg::tests::cz_mcm;

    fn q(labels: &[&str]) -> LabelledMonomial {
        labels.iter().map(|l| (l.to_string(), 1)).collect()
    }

    #[test]
    fn cz_mcm_report() {
        let g = build_ptg(&cz_mcm()).unwrap();
        let r = learnability_report(&g, &[q(&["cz[ZX]", "mcm[X,1,0]"]), q(&["cz[ZX]"])]).unwrap();
        assert_eq!((r.vertices, r.edges, r.components, r.basis_size), (4, 32, 1, 29));
        assert_eq!(r.basis.len(), 29);
        assert!(r.verdicts[0].learnable && r.verdicts[0].basis_coefficients.is_some());
        assert!(!r.verdicts[1].learnable && r.verdicts[1].basis_coefficients.is_none());
    }

    #[test]
    fn unknown_label_is_an_error() {
        let g = build_ptg(&cz_mcm()).unwrap();
        assert!(learnability_report(&g, &[q(&["cz[QQ]"])]).is_err());
    }
}
