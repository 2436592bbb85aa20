//! Dense density-matrix oracle for small registers (n <= 3).
//!
//! Basis index bit `q` is the computational state of qubit `q`.
#![allow(dead_code)]

use mcmlab::clifford::{conjugate, Gate, GateApp};
use mcmlab::noise::{lambda_tilde, twirled_usi, ConditionedError, MCMLayerSpec, RawInstrumentModel};
use mcmlab::pauli::{PauliOp, ProbTable, ZMask};
use mcmlab::rc::compile_with;
use mcmlab::tableau::PrepState;
use num_complex::Complex64 as C;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub d: usize,
    pub a: Vec<C>,
}

impl Mat {
    pub fn zeros(d: usize) -> Mat {
        Mat {
            d,
            a: vec![C::new(0.0, 0.0); d * d],
        }
    }

    pub fn identity(d: usize) -> Mat {
        let mut m = Mat::zeros(d);
        for i in 0..d {
            m.a[i * d + i] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> C {
        self.a[i * self.d + j]
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        let d = self.d;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let x = self.a[i * d + k];
                if x == C::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    out.a[i * d + j] += x * o.a[k * d + j];
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> Mat {
        let d = self.d;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.a[j * d + i] = self.a[i * d + j].conj();
            }
        }
        out
    }

    pub fn add_scaled(&mut self, o: &Mat, s: f64) {
        for (x, y) in self.a.iter_mut().zip(&o.a) {
            *x += y * s;
        }
    }

    pub fn trace(&self) -> C {
        (0..self.d).map(|i| self.at(i, i)).sum()
    }

    /// `U rho U^dagger`.
    pub fn conj_by(&self, u: &Mat) -> Mat {
        u.mul(self).mul(&u.dagger())
    }

    /// `P rho P` for a Pauli, without forming the matrix.
    pub fn conj_pauli(&self, p: &PauliOp) -> Mat {
        let d = self.d;
        let (x, z) = (p.x() as usize, p.z() as usize);
        let sgn = |i: usize| if (i & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.a[i * d + j] = self.a[(i ^ x) * d + (j ^ x)] * (sgn(i ^ x) * sgn(j ^ x));
            }
        }
        out
    }

    /// `Tr(P rho)` for a Pauli in O(d).
    pub fn pauli_trace(&self, p: &PauliOp) -> C {
        let d = self.d;
        let (x, z) = (p.x() as usize, p.z() as usize);
        let phase = C::new(0.0, 1.0).powu((x & z).count_ones());
        (0..d)
            .map(|col| {
                let sgn = if (col & z).count_ones() % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                phase * sgn * self.a[col * d + (col ^ x)]
            })
            .sum()
    }

    pub fn max_abs_diff(&self, o: &Mat) -> f64 {
        self.a
            .iter()
            .zip(&o.a)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }
}

/// Matrix of an n-qubit Pauli, `X^x Z^z` times `i^{|x & z|}` so that it is Hermitian.
pub fn pauli_matrix(p: &PauliOp) -> Mat {
    let n = p.num_qubits();
    let d = 1usize << n;
    let mut m = Mat::zeros(d);
    let y = (p.x() & p.z()).count_ones();
    let phase = C::new(0.0, 1.0).powu(y);
    for col in 0..d {
        let row = col ^ p.x() as usize;
        let sign = if (col as u64 & p.z()).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        m.a[row * d + col] = phase * sign;
    }
    m
}

fn one_qubit(g: Gate) -> [[C; 2]; 2] {
    let (o, z, i) = (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 1.0));
    let h = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match g {
        Gate::I => [[o, z], [z, o]],
        Gate::X => [[z, o], [o, z]],
        Gate::Y => [[z, -i], [i, z]],
        Gate::Z => [[o, z], [z, -o]],
        Gate::H => [[h, h], [h, -h]],
        Gate::S => [[o, z], [z, i]],
        Gate::Sdg => [[o, z], [z, -i]],
        _ => unreachable!("two-qubit gate"),
    }
}

pub fn gate_matrix(g: &GateApp, n: usize) -> Mat {
    let d = 1usize << n;
    let mut m = Mat::zeros(d);
    match g.gate.arity() {
        1 => {
            let q = g.qubits[0];
            let u = one_qubit(g.gate);
            for col in 0..d {
                let b = (col >> q) & 1;
                for nb in 0..2 {
                    let row = (col & !(1 << q)) | (nb << q);
                    m.a[row * d + col] += u[nb][b];
                }
            }
        }
        _ => {
            let (a, b) = (g.qubits[0], g.qubits[1]);
            for col in 0..d {
                let (ba, bb) = ((col >> a) & 1, (col >> b) & 1);
                let (row, amp) = match g.gate {
                    Gate::Cx => (col ^ (ba << b), 1.0),
                    Gate::Cz => (col, if ba & bb == 1 { -1.0 } else { 1.0 }),
                    Gate::Swap => ((col & !(1 << a) & !(1 << b)) | (bb << a) | (ba << b), 1.0),
                    _ => unreachable!("one-qubit gate"),
                };
                m.a[row * d + col] = C::new(amp, 0.0);
            }
        }
    }
    m
}

pub fn circuit_unitary(gates: &[GateApp], n: usize) -> Mat {
    let mut u = Mat::identity(1 << n);
    for g in gates {
        u = gate_matrix(g, n).mul(&u);
    }
    u
}

/// Applies a Pauli channel whose keys act on `qubits` (in order).
pub fn apply_channel(rho: &Mat, ch: &ProbTable<PauliOp>, qubits: &[usize], n: usize) -> Mat {
    let mut out = Mat::zeros(rho.d);
    for (p, w) in ch.iter() {
        let full = p.embed(qubits, n);
        out.add_scaled(&rho.conj_pauli(&full), w);
    }
    out
}

/// Projects the measured qubits onto raw outcome `k` (bit j = `measured[j]`).
pub fn project(rho: &Mat, measured: &[usize], k: u64) -> Mat {
    let d = rho.d;
    let keep = |i: usize| {
        measured
            .iter()
            .enumerate()
            .all(|(j, &q)| ((i >> q) & 1) as u64 == (k >> j) & 1)
    };
    let mut out = Mat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            if keep(i) && keep(j) {
                out.a[i * d + j] = rho.at(i, j);
            }
        }
    }
    out
}

/// Unnormalized post-measurement state of the untwirled instrument for raw outcome `k`.
pub fn raw_branch(model: &RawInstrumentModel, rho: &Mat, k: u64) -> Mat {
    let layer = &model.layer;
    let n = layer.n;
    let all: Vec<usize> = (0..n).collect();
    let mut s = apply_channel(rho, &model.e_pre, &all, n);
    s = s.conj_by(&circuit_unitary(&layer.v_gates, n));
    s = project(&s, &layer.measured, k);
    s = apply_channel(&s, &model.t_mid, &layer.unmeasured(), n);
    s = apply_channel(&s, &model.e_post, &all, n);
    for c in &model.conditioned {
        if c.applies(k) {
            s = apply_channel(&s, &c.errors, &all, n);
        }
    }
    s
}

/// Randomly compiled branch for recorded outcome `k`, averaged over every
/// twirl and random Z.
pub fn twirled_branch(model: &RawInstrumentModel, rho: &Mat, k: u64) -> Mat {
    let layer = &model.layer;
    let (n, m) = (layer.n, layer.m());
    let mut out = Mat::zeros(rho.d);
    let count = (1usize << (2 * n)) * (1usize << m);
    for t0 in PauliOp::all(n) {
        for z in 0..1u64 << m {
            let c = compile_with(layer, t0, z).unwrap();
            let pre = rho.conj_pauli(&c.pre);
            let raw = k ^ c.flip_mask.bits();
            let s = raw_branch(model, &pre, raw).conj_pauli(&c.post);
            out.add_scaled(&s, 1.0 / count as f64);
        }
    }
    out
}

/// Pauli transfer matrix `R[i][j] = Tr(P_i S(P_j)) / 2^n`, over `PauliOp::all(n)`.
pub fn ptm<F: Fn(&Mat) -> Mat>(n: usize, s: F) -> Vec<Vec<f64>> {
    let ps: Vec<PauliOp> = PauliOp::all(n).collect();
    let d = (1usize << n) as f64;
    let images: Vec<Mat> = ps.iter().map(|pj| s(&pauli_matrix(pj))).collect();
    ps.iter()
        .map(|pi| {
            images
                .iter()
                .map(|img| {
                    let v = img.pauli_trace(pi) / d;
                    assert!(v.im.abs() < 1e-10, "PTM entry not real");
                    v.re
                })
                .collect()
        })
        .collect()
}

/// `Tr(M_k (V^dagger (x) |k>><<k|)) / 4^(n-m)` computed in the matrix-unit basis.
pub fn branch_overlap(model: &RawInstrumentModel, k: u64) -> f64 {
    let layer = &model.layer;
    let n = layer.n;
    let d = 1usize << n;
    let vdag = circuit_unitary(&layer.v_gates, n).dagger();
    let mut tr = C::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let mut e = Mat::zeros(d);
            e.a[i * d + j] = C::new(1.0, 0.0);
            // (V^dagger (x) |k>><<k|)(E) = |k><k| Tr_meas(|k><k| E) conjugated by V^dagger.
            let pre = project(&e, &layer.measured, k).conj_by(&vdag);
            let out = raw_branch(model, &pre, k);
            tr += out.at(i, j);
        }
    }
    tr.re / 4f64.powi(layer.k() as i32)
}

pub fn expectation(rho: &Mat, p: &PauliOp) -> f64 {
    pauli_matrix(p).mul(rho).trace().re
}

pub fn basis_state(n: usize, bits: usize) -> Mat {
    let d = 1usize << n;
    let mut m = Mat::zeros(d);
    m.a[bits * d + bits] = C::new(1.0, 0.0);
    m
}

/// Density matrix of a product of single-qubit stabilizer states.
pub fn product_state(states: &[PrepState]) -> Mat {
    let n = states.len();
    let mut u = Vec::new();
    for (q, s) in states.iter().enumerate() {
        u.extend(s.gates().iter().map(|&g| GateApp::one(g, q)));
    }
    basis_state(n, 0).conj_by(&circuit_unitary(&u, n))
}

/// Random Pauli channel on `n` qubits with `terms` non-identity entries and
/// total error `p`.
pub fn random_channel<R: Rng>(n: usize, terms: usize, p: f64, rng: &mut R) -> ProbTable<PauliOp> {
    let mut t = ProbTable::new();
    if n == 0 {
        t.add(PauliOp::identity(0), 1.0);
        return t;
    }
    let w: Vec<f64> = (0..terms).map(|_| rng.gen::<f64>() + 0.1).collect();
    let total: f64 = w.iter().sum();
    let count = 1usize << (2 * n);
    for wi in w {
        t.add(PauliOp::from_index(n, rng.gen_range(1..count)), p * wi / total);
    }
    t.add(PauliOp::identity(n), 1.0 - p);
    t
}

/// Random model with errors of total weight up to `max_rate` at every site
/// and, optionally, two outcome-conditioned channels.
pub fn random_model<R: Rng>(
    layer: &MCMLayerSpec,
    conditioned: bool,
    max_rate: f64,
    rng: &mut R,
) -> RawInstrumentModel {
    let (n, m, k) = (layer.n, layer.m(), layer.k());
    let lo = max_rate / 8.0;
    let mut r = RawInstrumentModel::noiseless(layer.clone());
    r.e_pre = random_channel(n, 4, rng.gen_range(lo..max_rate), rng);
    r.t_mid = random_channel(k, 3, rng.gen_range(lo..max_rate), rng);
    r.e_post = random_channel(n, 4, rng.gen_range(lo..max_rate), rng);
    if conditioned {
        let full = (1u64 << m) - 1;
        for _ in 0..2 {
            let mask = rng.gen_range(1..=full);
            let value = rng.gen::<u64>() & mask;
            r.conditioned.push(ConditionedError {
                mask: ZMask::new(m, mask).unwrap(),
                value: ZMask::new(m, value).unwrap(),
                errors: random_channel(n, 3, rng.gen_range(lo..max_rate), rng),
            });
        }
    }
    r.validate().unwrap();
    r
}

fn parity(x: u64) -> bool {
    x.count_ones() % 2 == 1
}

/// Largest deviation of the dense twirled-branch PTMs from the analytic
/// form, and of their sum over outcomes from the diagonal-in-`c` form.
///
/// Branch `k` is nonzero only from `P (x) Z(c)` to `V[P] (x) Z(c')`, where
/// it equals `s (-1)^{k.(c^c')} lambda~_{V[P],(c,c')} / 2^m` with `s` the
/// conjugation sign.
pub fn sign_law_deviation(r: &RawInstrumentModel) -> (f64, f64) {
    let layer = &r.layer;
    let (n, m, k) = (layer.n, layer.m(), layer.k());
    let u = twirled_usi(r).unwrap();
    let dim = 1usize << (2 * n);
    let mut expected = vec![vec![vec![0.0; dim]; dim]; 1 << m];
    let mut expected_sum = vec![vec![0.0; dim]; dim];
    for p in PauliOp::all(k) {
        let image = conjugate(&layer.v_local(), &p).unwrap();
        for c in ZMask::all(m) {
            for c2 in ZMask::all(m) {
                let j = layer.join(&c.as_pauli(), &p).index();
                let i = layer.join(&c2.as_pauli(), &image.pauli).index();
                let lt = image.sign() * lambda_tilde(&u, &image.pauli, c.bits(), c2.bits()).unwrap();
                for (kk, e) in expected.iter_mut().enumerate() {
                    let sign = if parity(kk as u64 & (c.bits() ^ c2.bits())) {
                        -1.0
                    } else {
                        1.0
                    };
                    e[i][j] = sign * lt / (1u64 << m) as f64;
                }
                if c == c2 {
                    expected_sum[i][j] = lt;
                }
            }
        }
    }
    let mut total = vec![vec![0.0; dim]; dim];
    let mut branch_dev = 0.0f64;
    for (kk, e) in expected.iter().enumerate() {
        let got = ptm(n, |rho| twirled_branch(r, rho, kk as u64));
        for i in 0..dim {
            for j in 0..dim {
                branch_dev = branch_dev.max((got[i][j] - e[i][j]).abs());
                total[i][j] += got[i][j];
            }
        }
    }
    let mut sum_dev = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            sum_dev = sum_dev.max((total[i][j] - expected_sum[i][j]).abs());
        }
    }
    (branch_dev, sum_dev)
}
