//! Pattern transfer graphs of layer sets and cycle-space learnability.
//!
//! Vertices are Pauli supports over all `n` qubits (bit `q` set when qubit
//! `q` is non-identity). A gate layer contributes one edge per Pauli `Q`,
//! from `supp(Q)` to `supp(U Q U^dagger)`, carrying the post-gate eigenvalue
//! at `U Q U^dagger`. An MCM layer contributes one edge per `(P, c1, c2)`,
//! from `supp(P (x) Z(c1))` to `supp(V[P] (x) Z(c2))`, carrying
//! `lambda~_{V[P], (c1, c2)}` and the record mask `c1 ^ c2`.

mod lscb;
mod report;

pub use lscb::{
    build_lscb_circuit, connector_gates, edge_value, predict_lscb_decay, run_lscb, LscbCircuit, LscbConfig,
    LscbResult,
};
pub use report::{learnability_report, LabelledMonomial, LearnabilityReport, MonomialVerdict};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::clifford::{self, GateApp};
use crate::error::{Error, Result};
use crate::noise::RawInstrumentModel;
use crate::pauli::{format_bits, PauliOp, ProbTable, ZMask};

/// Largest register for which graphs are enumerated.
pub const MAX_PTG_QUBITS: usize = 8;

/// A layer of a layer set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerDef {
    /// Clifford gates followed by an optional Pauli channel on all qubits.
    Gate {
        name: String,
        n: usize,
        gates: Vec<GateApp>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        noise: Option<ProbTable<PauliOp>>,
    },
    Mcm {
        name: String,
        model: RawInstrumentModel,
    },
}

impl LayerDef {
    pub fn name(&self) -> &str {
        match self {
            LayerDef::Gate { name, .. } | LayerDef::Mcm { name, .. } => name,
        }
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            LayerDef::Gate { n, .. } => *n,
            LayerDef::Mcm { model, .. } => model.layer.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LayerDef::Gate { n, gates, noise, .. } => {
                for g in gates {
                    g.validate(*n)?;
                }
                if let Some(t) = noise {
                    t.validate_distribution(crate::pauli::PROB_TOL)?;
                    if t.keys().any(|k| k.num_qubits() != *n) {
                        return Err(Error::Dimension(format!(
                            "gate noise of layer {} is not on {n} qubits",
                            self.name()
                        )));
                    }
                }
                Ok(())
            }
            LayerDef::Mcm { model, .. } => model.validate(),
        }
    }
}

/// Parameter carried by an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Parameter {
    /// Post-gate channel eigenvalue at `q`.
    Gate { layer: usize, q: PauliOp },
    /// `lambda~` of an MCM layer for input Pauli `p` on the unmeasured register.
    Mcm {
        layer: usize,
        p: PauliOp,
        c1: ZMask,
        c2: ZMask,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PtgEdge {
    pub id: usize,
    pub layer: usize,
    pub from: u64,
    pub to: u64,
    pub pre: PauliOp,
    /// Image of `pre`, up to sign.
    pub post: PauliOp,
    /// Mask applied to the MCM record of this layer; 0 for gate layers.
    pub t_mcm: u64,
    pub param: Parameter,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ptg {
    pub n: usize,
    pub layers: Vec<LayerDef>,
    pub vertices: Vec<u64>,
    pub edges: Vec<PtgEdge>,
}

/// Integer exponents on edges.
pub type ParameterMonomial = BTreeMap<usize, i64>;

fn gate_label(name: &str, q: &PauliOp) -> String {
    format!("{name}[{q}]")
}

fn mcm_label(name: &str, p: &PauliOp, c1: &ZMask, c2: &ZMask) -> String {
    format!("{name}[{p},{c1},{c2}]")
}

pub fn build_ptg(layers: &[LayerDef]) -> Result<Ptg> {
    let n = layers
        .first()
        .map(LayerDef::num_qubits)
        .ok_or_else(|| Error::InvalidLayer("empty layer set".into()))?;
    if n > MAX_PTG_QUBITS {
        return Err(Error::Dimension(format!(
            "{n} qubits exceeds the graph limit {MAX_PTG_QUBITS}"
        )));
    }
    let mut names = BTreeSet::new();
    for l in layers {
        l.validate()?;
        if l.num_qubits() != n {
            return Err(Error::Dimension(format!(
                "layer {} is not on {n} qubits",
                l.name()
            )));
        }
        if !names.insert(l.name()) {
            return Err(Error::InvalidLayer(format!("duplicate layer name {}", l.name())));
        }
    }
    let mut edges = Vec::new();
    for (li, l) in layers.iter().enumerate() {
        match l {
            LayerDef::Gate { name, gates, .. } => {
                for pre in PauliOp::all(n) {
                    let post = clifford::conjugate_unsigned(gates, &pre)?;
                    edges.push(PtgEdge {
                        id: edges.len(),
                        layer: li,
                        from: pre.support(),
                        to: post.support(),
                        pre,
                        post,
                        t_mcm: 0,
                        param: Parameter::Gate { layer: li, q: post },
                        label: gate_label(name, &post),
                    });
                }
            }
            LayerDef::Mcm { name, model } => {
                let layer = &model.layer;
                let m = layer.m();
                for p in PauliOp::all(layer.k()) {
                    let vp = layer.v_power(&p, 1)?;
                    for c1 in ZMask::all(m) {
                        for c2 in ZMask::all(m) {
                            let pre = layer.join(&c1.as_pauli(), &p);
                            let post = layer.join(&c2.as_pauli(), &vp);
                            edges.push(PtgEdge {
                                id: edges.len(),
                                layer: li,
                                from: pre.support(),
                                to: post.support(),
                                pre,
                                post,
                                t_mcm: c1.bits() ^ c2.bits(),
                                param: Parameter::Mcm { layer: li, p, c1, c2 },
                                label: mcm_label(name, &p, &c1, &c2),
                            });
                        }
                    }
                }
            }
        }
    }
    let vertices: BTreeSet<u64> = edges.iter().flat_map(|e| [e.from, e.to]).collect();
    Ok(Ptg {
        n,
        layers: layers.to_vec(),
        vertices: vertices.into_iter().collect(),
        edges,
    })
}

impl Ptg {
    pub fn edge(&self, id: usize) -> Result<&PtgEdge> {
        self.edges.get(id).ok_or(Error::UnknownEdge(id))
    }

    pub fn edge_by_label(&self, label: &str) -> Option<&PtgEdge> {
        self.edges.iter().find(|e| e.label == label)
    }

    /// Edge of gate layer `layer` carrying the eigenvalue at `q`.
    pub fn gate_edge(&self, layer: &str, q: &PauliOp) -> Option<&PtgEdge> {
        self.edge_by_label(&gate_label(layer, q))
    }

    pub fn mcm_edge(&self, layer: &str, p: &PauliOp, c1: u64, c2: u64) -> Option<&PtgEdge> {
        let li = self.layers.iter().position(|l| l.name() == layer)?;
        let m = match &self.layers[li] {
            LayerDef::Mcm { model, .. } => model.layer.m(),
            LayerDef::Gate { .. } => return None,
        };
        let (c1, c2) = (ZMask::new(m, c1).ok()?, ZMask::new(m, c2).ok()?);
        self.edge_by_label(&mcm_label(layer, p, &c1, &c2))
    }

    /// Number of weakly connected components.
    pub fn components(&self) -> usize {
        let (_, comps) = self.spanning_forest();
        comps
    }

    /// `E - V + C`.
    pub fn cycle_space_dimension(&self) -> usize {
        self.edges.len() + self.components() - self.vertices.len()
    }

    /// Tree edges with, for every vertex, its parent edge; and the component count.
    fn spanning_forest(&self) -> (BTreeMap<u64, Option<usize>>, usize) {
        let mut adj: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(e.from).or_default().push(e.id);
            adj.entry(e.to).or_default().push(e.id);
        }
        let mut parent: BTreeMap<u64, Option<usize>> = BTreeMap::new();
        let mut comps = 0;
        for &root in &self.vertices {
            if parent.contains_key(&root) {
                continue;
            }
            comps += 1;
            parent.insert(root, None);
            let mut queue = VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                for &id in &adj[&v] {
                    let e = &self.edges[id];
                    let w = if e.from == v { e.to } else { e.from };
                    if let std::collections::btree_map::Entry::Vacant(slot) = parent.entry(w) {
                        slot.insert(Some(id));
                        queue.push_back(w);
                    }
                }
            }
        }
        (parent, comps)
    }

    /// Signed tree path from `root` of its component to `v`, as edge exponents.
    fn root_path(
        &self,
        parent: &BTreeMap<u64, Option<usize>>,
        mut v: u64,
        out: &mut ParameterMonomial,
        sign: i64,
    ) {
        while let Some(Some(id)) = parent.get(&v) {
            let e = &self.edges[*id];
            // Walking root -> v crosses e forwards iff e points at v.
            let (dir, next) = if e.to == v { (1, e.from) } else { (-1, e.to) };
            *out.entry(*id).or_insert(0) += sign * dir;
            v = next;
        }
    }

    /// Signed net flow into every vertex; learnable iff all vanish.
    pub fn net_flow(&self, mono: &ParameterMonomial) -> Result<BTreeMap<u64, i64>> {
        let mut flow: BTreeMap<u64, i64> = BTreeMap::new();
        for (&id, &exp) in mono {
            let e = self.edge(id)?;
            *flow.entry(e.to).or_insert(0) += exp;
            *flow.entry(e.from).or_insert(0) -= exp;
        }
        Ok(flow)
    }

    pub fn is_learnable(&self, mono: &ParameterMonomial) -> Result<bool> {
        Ok(self.net_flow(mono)?.values().all(|&f| f == 0))
    }

    /// Fundamental cycles of a spanning forest; one per non-tree edge.
    pub fn learnable_basis(&self) -> Vec<ParameterMonomial> {
        let (parent, _) = self.spanning_forest();
        let tree: BTreeSet<usize> = parent.values().flatten().copied().collect();
        let mut basis = Vec::new();
        for e in self.edges.iter().filter(|e| !tree.contains(&e.id)) {
            // e, then the tree path to -> root -> from.
            let mut mono = ParameterMonomial::new();
            mono.insert(e.id, 1);
            self.root_path(&parent, e.to, &mut mono, -1);
            self.root_path(&parent, e.from, &mut mono, 1);
            mono.retain(|_, v| *v != 0);
            basis.push(mono);
        }
        basis
    }

    /// Integer coefficients expressing a learnable monomial in
    /// [`Ptg::learnable_basis`], or `None` if it is not in the span.
    pub fn express_in_basis(
        &self,
        basis: &[ParameterMonomial],
        mono: &ParameterMonomial,
    ) -> Result<Option<Vec<i64>>> {
        self.net_flow(mono)?;
        let (parent, _) = self.spanning_forest();
        let tree: BTreeSet<usize> = parent.values().flatten().copied().collect();
        let non_tree: Vec<usize> = self
            .edges
            .iter()
            .map(|e| e.id)
            .filter(|id| !tree.contains(id))
            .collect();
        if non_tree.len() != basis.len() {
            return Err(Error::InvalidArgument("basis does not match this graph".into()));
        }
        let coeffs: Vec<i64> = non_tree
            .iter()
            .map(|id| mono.get(id).copied().unwrap_or(0))
            .collect();
        let mut residual = mono.clone();
        for (c, b) in coeffs.iter().zip(basis) {
            for (&id, &v) in b {
                *residual.entry(id).or_insert(0) -= c * v;
            }
        }
        Ok(residual.values().all(|&v| v == 0).then_some(coeffs))
    }

    /// Monomial from `(label, exponent)` pairs.
    pub fn monomial(&self, terms: &[(&str, i64)]) -> Result<ParameterMonomial> {
        let mut mono = ParameterMonomial::new();
        for (label, exp) in terms {
            let e = self
                .edge_by_label(label)
                .ok_or_else(|| Error::MissingKey(format!("no edge labelled {label}")))?;
            *mono.entry(e.id).or_insert(0) += exp;
        }
        mono.retain(|_, v| *v != 0);
        Ok(mono)
    }

    /// Graphviz rendering; parallel edges between a vertex pair are merged
    /// into one labelled arrow.
    pub fn to_dot(&self) -> String {
        let mut grouped: BTreeMap<(u64, u64), Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            grouped.entry((e.from, e.to)).or_default().push(&e.label);
        }
        let mut s = String::from("digraph ptg {\n");
        for v in &self.vertices {
            let _ = writeln!(s, "  \"{}\";", format_bits(*v, self.n));
        }
        for ((a, b), labels) in grouped {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [label=\"{}\"];",
                format_bits(a, self.n),
                format_bits(b, self.n),
                labels.join("\\n")
            );
        }
        s.push_str("}\n");
        s
    }
}

/// Convenience wrapper for [`Ptg::is_learnable`].
pub fn is_learnable(g: &Ptg, mono: &ParameterMonomial) -> Result<bool> {
    g.is_learnable(mono)
}

pub fn learnable_basis(g: &Ptg) -> Vec<ParameterMonomial> {
    g.learnable_basis()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::Gate;
    use crate::noise::MCMLayerSpec;
    use proptest::prelude::*;

    pub(crate) fn cz_mcm() -> Vec<LayerDef> {
        vec![
            LayerDef::Gate {
                name: "cz".into(),
                n: 2,
                gates: vec![GateApp::two(Gate::Cz, 0, 1)],
                noise: None,
            },
            LayerDef::Mcm {
                name: "mcm".into(),
                model: RawInstrumentModel::noiseless(MCMLayerSpec::new(2, vec![0], vec![]).unwrap()),
            },
        ]
    }

    fn p(s: &str) -> PauliOp {
        s.parse().unwrap()
    }

    #[test]
    fn idle_single_qubit() {
        let layers = vec![LayerDef::Gate {
            name: "id".into(),
            n: 1,
            gates: vec![],
            noise: None,
        }];
        let g = build_ptg(&layers).unwrap();
        assert_eq!(g.vertices, vec![0, 1]);
        assert!(g.edges.iter().all(|e| e.from == e.to));
        assert_eq!(g.cycle_space_dimension(), 4);
    }

    #[test]
    fn cz_mcm_counts() {
        let g = build_ptg(&cz_mcm()).unwrap();
        assert_eq!(g.vertices.len(), 4);
        assert_eq!(g.edges.iter().filter(|e| e.layer == 0).count(), 16);
        assert_eq!(g.edges.iter().filter(|e| e.layer == 1).count(), 16);
        assert_eq!(g.components(), 1);
        assert_eq!(g.cycle_space_dimension(), 29);
        assert_eq!(g.learnable_basis().len(), 29);
    }

    #[test]
    fn cz_edge_directions() {
        let g = build_ptg(&cz_mcm()).unwrap();
        // XI -> XZ and ZX -> IX.
        let e = g.edges.iter().find(|e| e.layer == 0 && e.pre == p("XI")).unwrap();
        assert_eq!((e.from, e.to), (0b01, 0b11));
        assert_eq!(e.label, "cz[XZ]");
        let e = g.edges.iter().find(|e| e.layer == 0 && e.pre == p("ZX")).unwrap();
        assert_eq!((e.from, e.to), (0b11, 0b10));
        assert_eq!(e.label, "cz[IX]");
        let e = g.mcm_edge("mcm", &p("X"), 1, 0).unwrap();
        assert_eq!((e.from, e.to, e.t_mcm), (0b11, 0b10, 1));
    }

    #[test]
    fn learnability_verdicts() {
        let g = build_ptg(&cz_mcm()).unwrap();
        let mono = |t: &[(&str, i64)]| g.monomial(t).unwrap();
        assert!(g.is_learnable(&mono(&[("cz[II]", 1)])).unwrap());
        assert!(g.is_learnable(&mono(&[("cz[IX]", 1), ("cz[ZX]", 1)])).unwrap());
        assert!(g
            .is_learnable(&mono(&[("cz[ZX]", 1), ("mcm[X,1,0]", 1)]))
            .unwrap());
        assert!(g
            .is_learnable(&mono(&[("mcm[Y,1,0]", 1), ("mcm[Z,0,1]", 1)]))
            .unwrap());
        for s in ["cz[IX]", "cz[ZX]", "mcm[X,1,0]", "mcm[I,0,1]"] {
            assert!(!g.is_learnable(&mono(&[(s, 1)])).unwrap(), "{s}");
        }
        assert!(matches!(
            g.is_learnable(&BTreeMap::from([(999, 1)])),
            Err(Error::UnknownEdge(999))
        ));
    }

    #[test]
    fn tree_has_empty_basis() {
        let tree = Ptg {
            n: 2,
            layers: vec![],
            vertices: vec![0, 1, 2],
            edges: vec![
                PtgEdge {
                    id: 0,
                    layer: 0,
                    from: 0,
                    to: 1,
                    pre: p("II"),
                    post: p("II"),
                    t_mcm: 0,
                    param: Parameter::Gate { layer: 0, q: p("II") },
                    label: "a".into(),
                },
                PtgEdge {
                    id: 1,
                    layer: 0,
                    from: 1,
                    to: 2,
                    pre: p("II"),
                    post: p("II"),
                    t_mcm: 0,
                    param: Parameter::Gate { layer: 0, q: p("II") },
                    label: "b".into(),
                },
            ],
        };
        assert!(tree.learnable_basis().is_empty());
    }

    #[test]
    fn dot_export() {
        let g = build_ptg(&cz_mcm()).unwrap();
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph ptg {"));
        assert!(dot.contains("\"10\" -> \"11\""));
        assert!(dot.contains("mcm[X,1,0]"));
    }

    proptest! {
        #[test]
        fn basis_elements_are_learnable_and_span(coeffs in proptest::collection::vec(-3i64..=3, 29)) {
            let g = build_ptg(&cz_mcm()).unwrap();
            let basis = g.learnable_basis();
            let mut combo = ParameterMonomial::new();
            for (c, b) in coeffs.iter().zip(&basis) {
                prop_assert!(g.is_learnable(b).unwrap());
                for (&id, &v) in b {
                    *combo.entry(id).or_insert(0) += c * v;
                }
            }
            combo.retain(|_, v| *v != 0);
            prop_assert!(g.is_learnable(&combo).unwrap());
            let got = g.express_in_basis(&basis, &combo).unwrap().unwrap();
            prop_assert_eq!(got, coeffs);
        }

        #[test]
        fn learnability_is_a_group_property(a in 0usize..32, b in 0usize..32, ea in -2i64..=2, eb in -2i64..=2) {
            let g = build_ptg(&cz_mcm()).unwrap();
            let ma: ParameterMonomial = BTreeMap::from([(a, 1)]);
            let loop_b: ParameterMonomial = g.learnable_basis()[b % 29].clone();
            // Multiplying by a learnable monomial never changes the verdict.
            let mut prod = ma.clone();
            for (&id, &v) in &loop_b {
                *prod.entry(id).or_insert(0) += eb * v;
            }
            prop_assert_eq!(g.is_learnable(&ma).unwrap(), g.is_learnable(&prod).unwrap());
            let inv: ParameterMonomial = prod.iter().map(|(&k, &v)| (k, -v)).collect();
            prop_assert_eq!(g.is_learnable(&prod).unwrap(), g.is_learnable(&inv).unwrap());
            let pow: ParameterMonomial = prod.iter().map(|(&k, &v)| (k, v * ea)).collect();
            if ea != 0 {
                prop_assert_eq!(g.is_learnable(&prod).unwrap(), g.is_learnable(&pow).unwrap());
            }
        }
    }
}
