//! Symmetry sectors and symmetric templates for `S`.
//!
//! Every symmetry used here permutes basis states of the chain, so a sector is
//! built orbit by orbit: starting from the smallest unvisited basis state, the
//! orbit under the generators is explored while propagating the coefficient each
//! state must carry for the requested eigenvalues. An orbit contributes one
//! normalized column if those coefficients are consistent and nothing otherwise.
//!
//! Conventions (chain digits big-endian, site 0 first):
//! * `T` shifts every site one step to the right, `T|s_0 … s_{N-1}⟩ = |s_{N-1} s_0 … s_{N-2}⟩`,
//!   and momentum `k` means `T v = e^{2πik/N} v`;
//! * `R` reverses the chain;
//! * AKLT `Q = F R` with `F` the spin flip `|m⟩ → |-m⟩` on every site (the π rotation
//!   about `x` up to the global sign `(-1)^N`, which is dropped);
//! * GHZ `P = Π σ^x`.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, ZERO};
use crate::model::Model;
use crate::parent::{SparseHamiltonian, MAX_HAMILTONIAN_DIM};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sz_total: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_eigen: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reversal: Option<i8>,
}

impl SectorSpec {
    pub fn is_empty(&self) -> bool {
        *self == SectorSpec::default()
    }

    /// Rejects quantum numbers that do not belong to `model` or do not commute.
    pub fn validate(&self, model: Model) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("{what} is not a symmetry of the {} model", model.name())));
        match model {
            Model::Aklt => {
                if self.parity.is_some() {
                    return bad("parity P");
                }
                if self.reversal.is_some() {
                    return bad("bare reversal R");
                }
            }
            Model::Ghz => {
                if self.sz_total.is_some() {
                    return bad("total Sz");
                }
                if self.q_eigen.is_some() {
                    return bad("Q");
                }
            }
            Model::Random => {
                if self.sz_total.is_some() || self.q_eigen.is_some() || self.parity.is_some() || self.reversal.is_some() {
                    return bad("only translation");
                }
            }
        }
        for (name, v) in [("q_eigen", self.q_eigen), ("parity", self.parity), ("reversal", self.reversal)] {
            if let Some(x) = v {
                if x != 1 && x != -1 {
                    return Err(Error::InvalidInput(format!("{name} must be ±1, got {x}")));
                }
            }
        }
        let reflecting = self.q_eigen.is_some() || self.reversal.is_some();
        if reflecting && self.momentum.map_or(false, |k| k != 0) {
            return Err(Error::InvalidInput("reflection-type symmetries only combine with momentum k = 0".into()));
        }
        if self.q_eigen.is_some() && self.sz_total.map_or(false, |s| s != 0) {
            return Err(Error::InvalidInput("Q only preserves the Sz = 0 sector".into()));
        }
        Ok(())
    }
}

/// Basis-state permutations of a periodic chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymOp {
    Translation,
    Reversal,
    /// AKLT `Q = F R`.
    FlipReversal,
    /// GHZ `P = Π σ^x`.
    Parity,
}

impl SymOp {
    pub fn name(self) -> &'static str {
        match self {
            SymOp::Translation => "T",
            SymOp::Reversal => "R",
            SymOp::FlipReversal => "Q",
            SymOp::Parity => "P",
        }
    }

    /// Image of basis state `s` on `n` sites of dimension `d`.
    pub fn apply(self, s: usize, d: usize, n: usize) -> usize {
        let mut digits = [0usize; 64];
        let mut x = s;
        for k in (0..n).rev() {
            digits[k] = x % d;
            x /= d;
        }
        let img = |k: usize| -> usize {
            match self {
                SymOp::Translation => digits[(k + n - 1) % n],
                SymOp::Reversal => digits[n - 1 - k],
                SymOp::FlipReversal => d - 1 - digits[n - 1 - k],
                SymOp::Parity => d - 1 - digits[k],
            }
        };
        (0..n).fold(0, |acc, k| acc * d + img(k))
    }
}

fn chain_sz(s: usize, d: usize, n: usize) -> i64 {
    // AKLT digits (+1, 0, -1) -> m = 1 - digit
    let mut x = s;
    let mut m = 0i64;
    for _ in 0..n {
        m += 1 - (x % d) as i64;
        x /= d;
    }
    m
}

/// Isometry `W` onto a symmetry sector; each full basis state belongs to at most
/// one column.
#[derive(Clone, Debug)]
pub struct SectorMap {
    pub model: Model,
    pub spec: SectorSpec,
    pub d: usize,
    pub n_chain: usize,
    pub full_dim: usize,
    pub d_g: usize,
    /// Column of each full basis state, `u32::MAX` when outside the sector.
    col_of_row: Vec<u32>,
    /// `W[row, col_of_row[row]]`.
    coef: Vec<C64>,
    /// Full basis states in each column, in BFS order.
    columns: Vec<Vec<u32>>,
}

const NONE: u32 = u32::MAX;

/// Builds the sector isometry for `n_sites` physical sites of `model`.
pub fn build_sector(model: Model, n_sites: usize, spec: &SectorSpec) -> Result<SectorMap> {
    spec.validate(model)?;
    let n = model.chain_sites(n_sites)?;
    let d = model.phys_dim();
    if n < 2 || n > 63 {
        return Err(Error::InvalidSize(format!("chain length {n} unsupported")));
    }
    let full_dim = crate::tensor::checked_dim(d, n, MAX_HAMILTONIAN_DIM)?;
    let mut gens: Vec<(SymOp, C64)> = Vec::new();
    if let Some(k) = spec.momentum {
        let theta = 2.0 * std::f64::consts::PI * (k.rem_euclid(n as i64) as f64) / n as f64;
        gens.push((SymOp::Translation, C64::from_polar(1.0, theta)));
    }
    if let Some(q) = spec.q_eigen {
        gens.push((SymOp::FlipReversal, c(q as f64)));
    }
    if let Some(r) = spec.reversal {
        gens.push((SymOp::Reversal, c(r as f64)));
    }
    if let Some(p) = spec.parity {
        gens.push((SymOp::Parity, c(p as f64)));
    }
    let sz_ok = |s: usize| spec.sz_total.map_or(true, |m| chain_sz(s, d, n) == m);

    let mut col_of_row = vec![NONE; full_dim];
    let mut coef = vec![ZERO; full_dim];
    let mut visited = vec![false; full_dim];
    let mut columns: Vec<Vec<u32>> = Vec::new();
    let mut orbit: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    let mut tmp = vec![ZERO; full_dim];
    for seed in 0..full_dim {
        if visited[seed] || !sz_ok(seed) {
            continue;
        }
        orbit.clear();
        queue.clear();
        visited[seed] = true;
        tmp[seed] = c(1.0);
        orbit.push(seed);
        queue.push_back(seed);
        let mut consistent = true;
        while let Some(u) = queue.pop_front() {
            for &(g, e) in &gens {
                let t = g.apply(u, d, n);
                let cand = tmp[u] / e;
                if !visited[t] {
                    if !sz_ok(t) {
                        return Err(Error::InvalidInput(format!("{} does not preserve the Sz filter", g.name())));
                    }
                    visited[t] = true;
                    tmp[t] = cand;
                    orbit.push(t);
                    queue.push_back(t);
                } else if (tmp[t] - cand).norm() > 1e-9 {
                    consistent = false;
                }
            }
        }
        if consistent {
            let col = columns.len() as u32;
            let norm = 1.0 / (orbit.len() as f64).sqrt();
            for &s in &orbit {
                col_of_row[s] = col;
                coef[s] = tmp[s] * norm;
            }
            columns.push(orbit.iter().map(|&s| s as u32).collect());
        }
    }
    if columns.is_empty() {
        return Err(Error::EmptySector(format!(
            "no states of the {} chain with {n} sites carry quantum numbers {spec:?}",
            model.name()
        )));
    }
    Ok(SectorMap { model, spec: spec.clone(), d, n_chain: n, full_dim, d_g: columns.len(), col_of_row, coef, columns })
}

impl SectorMap {
    /// `W x` for a sector vector `x`.
    pub fn lift(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.full_dim];
        for (col, rows) in self.columns.iter().enumerate() {
            for &r in rows {
                y[r as usize] = self.coef[r as usize] * x[col];
            }
        }
        y
    }

    /// `W† x` for a full-space vector `x`.
    pub fn restrict(&self, x: &[C64]) -> Vec<C64> {
        self.columns
            .iter()
            .map(|rows| rows.iter().map(|&r| self.coef[r as usize].conj() * x[r as usize]).sum())
            .collect()
    }

    /// Dense `d^N × d_g` isometry (small systems only).
    pub fn to_dense(&self) -> CMat {
        let mut w = linalg::zeros(self.full_dim, self.d_g);
        for (col, rows) in self.columns.iter().enumerate() {
            for &r in rows {
                w[(r as usize, col)] = self.coef[r as usize];
            }
        }
        w
    }

    /// Compressed operator `W† H W`, Hermitized entrywise.
    pub fn project(&self, h: &SparseHamiltonian) -> Result<SparseHamiltonian> {
        if h.dim != self.full_dim {
            return Err(Error::InvalidInput(format!(
                "operator dimension {} does not match sector ambient dimension {}",
                h.dim, self.full_dim
            )));
        }
        let mut trip: Vec<(u32, u32, C64)> = Vec::new();
        for r in 0..h.dim {
            let a = self.col_of_row[r];
            if a == NONE {
                continue;
            }
            let wr = self.coef[r].conj();
            for (cl, v) in h.row(r) {
                let b = self.col_of_row[cl];
                if b != NONE {
                    trip.push((a, b, wr * v * self.coef[cl]));
                }
            }
        }
        let p = SparseHamiltonian::from_triplets(self.d_g, trip, h.locality, h.n_terms);
        Ok(hermitize(&p))
    }

    pub fn generators(&self) -> Vec<SymOp> {
        spec_ops(&self.spec)
    }
}

fn spec_ops(spec: &SectorSpec) -> Vec<SymOp> {
    let mut ops = Vec::new();
    if spec.momentum.is_some() {
        ops.push(SymOp::Translation);
    }
    if spec.q_eigen.is_some() {
        ops.push(SymOp::FlipReversal);
    }
    if spec.reversal.is_some() {
        ops.push(SymOp::Reversal);
    }
    if spec.parity.is_some() {
        ops.push(SymOp::Parity);
    }
    ops
}

fn lookup(h: &SparseHamiltonian, r: usize, cl: usize) -> C64 {
    let lo = h.row_ptr[r];
    let hi = h.row_ptr[r + 1];
    match h.cols[lo..hi].binary_search(&(cl as u32)) {
        Ok(k) => h.vals[lo + k],
        Err(_) => ZERO,
    }
}

/// `(H + H†)/2` on the union sparsity pattern.
pub fn hermitize(h: &SparseHamiltonian) -> SparseHamiltonian {
    let mut trip = Vec::with_capacity(2 * h.nnz());
    for r in 0..h.dim {
        for (cl, v) in h.row(r) {
            let t = lookup(h, cl, r);
            trip.push((r as u32, cl as u32, (v + t.conj()) * 0.5));
            if t == ZERO {
                trip.push((cl as u32, r as u32, v.conj() * 0.5));
            }
        }
    }
    SparseHamiltonian::from_triplets(h.dim, trip, h.locality, h.n_terms)
}

/// Commutator norms of a full-space Hamiltonian with the symmetries named in `spec`.
#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub commutators: Vec<(String, f64)>,
    pub passes: bool,
}

/// Max-norm of `[H, O]` for every constraint operator of `spec`; passes below `1e-9`.
pub fn symmetrize_check(h: &SparseHamiltonian, model: Model, n_sites: usize, spec: &SectorSpec) -> Result<SymmetryReport> {
    let n = model.chain_sites(n_sites)?;
    let d = model.phys_dim();
    let dim = crate::tensor::checked_dim(d, n, MAX_HAMILTONIAN_DIM)?;
    if dim != h.dim {
        return Err(Error::InvalidInput("Hamiltonian does not live on the full chain space".into()));
    }
    let mut commutators = Vec::new();
    for op in spec_ops(spec) {
        let perm: Vec<usize> = (0..dim).map(|s| op.apply(s, d, n)).collect();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for (cl, v) in h.row(r) {
                worst = worst.max((lookup(h, perm[r], perm[cl]) - v).norm());
            }
        }
        commutators.push((op.name().to_string(), worst));
    }
    if spec.sz_total.is_some() {
        let mut worst = 0.0f64;
        for r in 0..dim {
            let mr = chain_sz(r, d, n);
            for (cl, v) in h.row(r) {
                if chain_sz(cl, d, n) != mr {
                    worst = worst.max(v.norm());
                }
            }
        }
        commutators.push(("Sz".to_string(), worst));
    }
    let passes = commutators.iter().all(|(_, x)| *x < 1e-9);
    Ok(SymmetryReport { commutators, passes })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateKind {
    /// `diag(S_11, S_22, 1 − 2S_11 − 2S_22, S_22, S_11)`.
    AkltDiagonal,
    /// Real `S` commuting with the kernel-basis actions of `P` and `R`.
    GhzSymmetric,
    /// `diag(S_11, ½ − S_11, ½ − S_11, S_11)`.
    GhzDiagonal,
}

/// Affine family `S(p) = S_0 + Σ_j p_j T_j` of trace-one Hermitian matrices.
#[derive(Clone, Debug)]
pub struct STemplate {
    pub kind: TemplateKind,
    pub names: Vec<String>,
    pub offset: CMat,
    pub directions: Vec<CMat>,
    /// Kernel-basis representations of the symmetries `S` must commute with.
    pub constraints: Vec<CMat>,
    pub canonical: Vec<f64>,
}

fn anti_identity(m: usize) -> CMat {
    CMat::from_fn(m, m, |i, j| if i + j == m - 1 { c(1.0) } else { ZERO })
}

/// Kernel-basis action of `R` on the GHZ basis: `φ_2 ↔ −φ_3`.
pub fn ghz_reversal_rep() -> CMat {
    linalg::from_real(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, -1.0, 0.0],
        &[0.0, -1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
    ])
}

impl STemplate {
    pub fn new(kind: TemplateKind) -> Self {
        let e = |m: usize, entries: &[(usize, usize, f64)]| {
            let mut a = linalg::zeros(m, m);
            for &(i, j, v) in entries {
                a[(i, j)] = c(v);
            }
            a
        };
        match kind {
            TemplateKind::AkltDiagonal => STemplate {
                kind,
                names: vec!["s11".into(), "s22".into()],
                offset: e(5, &[(2, 2, 1.0)]),
                directions: vec![
                    e(5, &[(0, 0, 1.0), (2, 2, -2.0), (4, 4, 1.0)]),
                    e(5, &[(1, 1, 1.0), (2, 2, -2.0), (3, 3, 1.0)]),
                ],
                constraints: vec![linalg::diag(&[2.0, 1.0, 0.0, -1.0, -2.0]), anti_identity(5)],
                canonical: vec![0.2, 0.2],
            },
            TemplateKind::GhzSymmetric => STemplate {
                kind,
                names: vec!["s11".into(), "s12".into(), "s14".into(), "s23".into()],
                offset: e(4, &[(1, 1, 0.5), (2, 2, 0.5)]),
                directions: vec![
                    e(4, &[(0, 0, 1.0), (1, 1, -1.0), (2, 2, -1.0), (3, 3, 1.0)]),
                    e(4, &[(0, 1, 1.0), (1, 0, 1.0), (0, 2, -1.0), (2, 0, -1.0), (1, 3, -1.0), (3, 1, -1.0), (2, 3, 1.0), (3, 2, 1.0)]),
                    e(4, &[(0, 3, 1.0), (3, 0, 1.0)]),
                    e(4, &[(1, 2, 1.0), (2, 1, 1.0)]),
                ],
                constraints: vec![anti_identity(4), ghz_reversal_rep()],
                canonical: vec![0.25, 0.0, 0.0, 0.0],
            },
            TemplateKind::GhzDiagonal => STemplate {
                kind,
                names: vec!["s11".into()],
                offset: e(4, &[(1, 1, 0.5), (2, 2, 0.5)]),
                directions: vec![e(4, &[(0, 0, 1.0), (1, 1, -1.0), (2, 2, -1.0), (3, 3, 1.0)])],
                constraints: vec![anti_identity(4), ghz_reversal_rep()],
                canonical: vec![0.25],
            },
        }
    }

    pub fn n_params(&self) -> usize {
        self.directions.len()
    }

    pub fn m(&self) -> usize {
        self.offset.nrows()
    }

    pub fn embed(&self, params: &[f64]) -> Result<CMat> {
        if params.len() != self.n_params() {
            return Err(Error::InvalidInput(format!(
                "template expects {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let m = self.m();
        Ok(linalg::add(&self.offset, &linalg::lin_comb(params, &self.directions, m, m)))
    }

    /// Least-squares parameters of the template point closest to `s`.
    pub fn params_of(&self, s: &CMat) -> Vec<f64> {
        let k = self.n_params();
        let r = linalg::sub(s, &self.offset);
        let ip = |a: &CMat, b: &CMat| -> f64 {
            let mut acc = 0.0;
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    acc += (a[(i, j)].conj() * b[(i, j)]).re;
                }
            }
            acc
        };
        let g = faer::Mat::<f64>::from_fn(k, k, |i, j| ip(&self.directions[i], &self.directions[j]));
        let rhs = faer::Mat::<f64>::from_fn(k, 1, |i, _| ip(&self.directions[i], &r));
        let sol = faer::linalg::solvers::Solve::solve(&g.full_piv_lu(), &rhs);
        (0..k).map(|i| sol[(i, 0)]).collect()
    }

    /// Orthogonal projection of a Hermitian matrix onto `span{S_0, T_1, …}` (Frobenius
    /// real inner product). For the symmetric kinds this span is exactly the set of real
    /// matrices invariant under the constraint group, so the projection equals the group
    /// average.
    pub fn project_hermitian(&self, b: &CMat) -> Result<CMat> {
        let m = self.m();
        if b.nrows() != m || b.ncols() != m {
            return Err(Error::InvalidInput(format!("expected {m}×{m} matrix, got {}×{}", b.nrows(), b.ncols())));
        }
        let mut basis: Vec<CMat> = Vec::new();
        for a in std::iter::once(&self.offset).chain(self.directions.iter()) {
            let mut v = a.clone();
            for q in &basis {
                let p = frob(q, &v);
                v = linalg::sub(&v, &linalg::scale(q, c(p)));
            }
            let nv = frob(&v, &v).sqrt();
            if nv > 1e-12 {
                basis.push(linalg::scale(&v, c(1.0 / nv)));
            }
        }
        let mut out = linalg::zeros(m, m);
        for q in &basis {
            out = linalg::add(&out, &linalg::scale(q, c(frob(q, b))));
        }
        Ok(out)
    }

    /// Max-norm of `[S, C]` over the constraint matrices.
    pub fn commutator_defect(&self, s: &CMat) -> f64 {
        self.constraints
            .iter()
            .map(|k| linalg::max_abs(&linalg::sub(&(s * k), &(k * s))))
            .fold(0.0, f64::max)
    }
}

fn frob(a: &CMat, b: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += (a[(i, j)].conj() * b[(i, j)]).re;
        }
    }
    acc
}

/// Symmetric template of a model: AKLT diagonal, GHZ symmetric. The random family
/// has no template.
pub fn symmetric_s_template(model: Model) -> Result<STemplate> {
    match model {
        Model::Aklt => Ok(STemplate::new(TemplateKind::AkltDiagonal)),
        Model::Ghz => Ok(STemplate::new(TemplateKind::GhzSymmetric)),
        Model::Random => Err(Error::InvalidInput("the random model uses an unconstrained S".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Family;
    use crate::parent::assemble;

    #[test]
    fn aklt_table() {
        let want = [2, 3, 6, 10, 22, 42, 98, 216, 532];
        for (n, &dg) in (2..=10).zip(want.iter()) {
            assert_eq!(build_sector(Model::Aklt, n, &Model::Aklt.ground_sector()).unwrap().d_g, dg, "N={n}");
        }
    }

    #[test]
    fn ghz_table() {
        let want = [2, 4, 4, 8, 9, 18, 23, 44, 63, 122];
        for (n, &dg) in (3..=12).zip(want.iter()) {
            assert_eq!(build_sector(Model::Ghz, n, &Model::Ghz.ground_sector()).unwrap().d_g, dg, "N={n}");
        }
    }

    #[test]
    fn isometry_and_eigen_relations() {
        for (model, n) in [(Model::Aklt, 5), (Model::Ghz, 6)] {
            let spec = model.ground_sector();
            let w = build_sector(model, n, &spec).unwrap();
            let wd = w.to_dense();
            let g = &linalg::adjoint(&wd) * &wd;
            assert!(linalg::max_abs_diff(&g, &linalg::identity(w.d_g)) < 1e-12);
            for op in w.generators() {
                let e = match op {
                    SymOp::Translation => 1.0,
                    SymOp::FlipReversal => spec.q_eigen.unwrap() as f64,
                    SymOp::Reversal => spec.reversal.unwrap() as f64,
                    SymOp::Parity => spec.parity.unwrap() as f64,
                };
                for col in 0..w.d_g {
                    let v = linalg::column(&wd, col);
                    let mut gv = vec![ZERO; v.len()];
                    for (s, &x) in v.iter().enumerate() {
                        gv[op.apply(s, w.d, w.n_chain)] = x;
                    }
                    let diff: f64 = gv.iter().zip(&v).map(|(a, b)| (a - b * e).norm()).fold(0.0, f64::max);
                    assert!(diff < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ghz_complete_decomposition() {
        for n in 3..=8 {
            let mut total = 0;
            for k in 0..n as i64 {
                for p in [1i8, -1] {
                    let spec = SectorSpec { momentum: Some(k), parity: Some(p), ..Default::default() };
                    total += build_sector(Model::Ghz, n, &spec).map(|w| w.d_g).unwrap_or(0);
                }
            }
            assert_eq!(total, 1 << n, "N={n}");
        }
    }

    #[test]
    fn invalid_specs() {
        let s = SectorSpec { parity: Some(1), ..Default::default() };
        assert!(build_sector(Model::Aklt, 4, &s).is_err());
        let s = SectorSpec { momentum: Some(1), reversal: Some(1), ..Default::default() };
        assert!(build_sector(Model::Ghz, 4, &s).is_err());
        let s = SectorSpec { parity: Some(2), ..Default::default() };
        assert!(build_sector(Model::Ghz, 4, &s).is_err());
        let s = SectorSpec { sz_total: Some(9), ..Default::default() };
        assert!(matches!(build_sector(Model::Aklt, 3, &s), Err(Error::EmptySector(_))));
    }

    #[test]
    fn template_examples() {
        let t = symmetric_s_template(Model::Aklt).unwrap();
        let s = t.embed(&[0.2, 0.2]).unwrap();
        assert!(linalg::max_abs_diff(&s, &linalg::scale(&linalg::identity(5), c(0.2))) < 1e-15);
        let bad = t.embed(&[0.5, 0.5]).unwrap();
        assert!((bad[(2, 2)].re + 1.0).abs() < 1e-15);
        let g = STemplate::new(TemplateKind::GhzDiagonal);
        let s = g.embed(&[0.1]).unwrap();
        assert!(linalg::max_abs_diff(&s, &linalg::diag(&[0.1, 0.4, 0.4, 0.1])) < 1e-15);
        assert!(symmetric_s_template(Model::Random).is_err());
        let gs = symmetric_s_template(Model::Ghz).unwrap();
        let s = gs.embed(&gs.canonical).unwrap();
        assert!(linalg::max_abs_diff(&s, &linalg::scale(&linalg::identity(4), c(0.25))) < 1e-15);
        let p = [0.2, 0.03, -0.02, 0.05];
        let s = gs.embed(&p).unwrap();
        assert!((linalg::trace(&s).re - 1.0).abs() < 1e-15);
        assert!(gs.commutator_defect(&s) < 1e-15);
        let back = gs.params_of(&s);
        for (a, b) in back.iter().zip(&p) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn template_commutes_with_hamiltonian_symmetries() {
        let fam = Family::ghz();
        let basis = fam.basis(0.4).unwrap();
        let gs = symmetric_s_template(Model::Ghz).unwrap();
        let s = gs.embed(&[0.2, 0.03, -0.02, 0.05]).unwrap();
        let h = assemble(&basis, &s, 5, None).unwrap();
        let spec = Model::Ghz.ground_sector();
        assert!(symmetrize_check(&h, Model::Ghz, 5, &spec).unwrap().passes);
        // a persymmetric S with independent S_12 and S_13 breaks R
        let mut s2 = s.clone();
        s2[(0, 2)] = c(0.01);
        s2[(2, 0)] = c(0.01);
        s2[(1, 3)] = c(0.01);
        s2[(3, 1)] = c(0.01);
        let h2 = assemble(&basis, &s2, 5, None).unwrap();
        let rep = symmetrize_check(&h2, Model::Ghz, 5, &spec).unwrap();
        let r = rep.commutators.iter().find(|(n, _)| n == "R").unwrap().1;
        let p = rep.commutators.iter().find(|(n, _)| n == "P").unwrap().1;
        assert!(r > 1e-3 && p < 1e-12);

        let fam = Family::aklt();
        let basis = fam.basis(0.7).unwrap();
        let t = symmetric_s_template(Model::Aklt).unwrap();
        let h = assemble(&basis, &t.embed(&[0.15, 0.22]).unwrap(), 5, None).unwrap();
        let rep = symmetrize_check(&h, Model::Aklt, 5, &Model::Aklt.ground_sector()).unwrap();
        assert!(rep.passes, "{rep:?}");
        let mut s = linalg::diag(&[0.1, 0.2, 0.3, 0.25, 0.15]);
        s[(0, 4)] = c(0.02);
        s[(4, 0)] = c(0.02);
        let h = assemble(&basis, &s, 5, None).unwrap();
        let rep = symmetrize_check(&h, Model::Aklt, 5, &Model::Aklt.ground_sector()).unwrap();
        assert!(!rep.passes);
    }

    #[test]
    fn projection_matches_dense() {
        let fam = Family::aklt();
        let basis = fam.basis(0.8).unwrap();
        let t = symmetric_s_template(Model::Aklt).unwrap();
        let h = assemble(&basis, &t.embed(&[0.18, 0.21]).unwrap(), 6, None).unwrap();
        let w = build_sector(Model::Aklt, 6, &Model::Aklt.ground_sector()).unwrap();
        let hs = w.project(&h).unwrap().to_dense();
        let wd = w.to_dense();
        let want = &(&linalg::adjoint(&wd) * &h.to_dense()) * &wd;
        assert!(linalg::max_abs_diff(&hs, &want) < 1e-13);
        assert_eq!(linalg::hermiticity_defect(&hs), 0.0);
        let x: Vec<C64> = (0..w.d_g).map(|i| C64::new(i as f64, 1.0)).collect();
        let back = w.restrict(&w.lift(&x));
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn sector_spectrum_is_contained_in_full_spectrum() {
        for (model, n, lambda) in [(Model::Aklt, 5, 0.6), (Model::Ghz, 6, -0.3)] {
            let fam = Family::new(model, 0, 0.0);
            let basis = fam.basis(lambda).unwrap();
            let t = symmetric_s_template(model).unwrap();
            let s = t.embed(&t.canonical).unwrap();
            let h = assemble(&basis, &s, n, None).unwrap();
            let full = linalg::herm_eigenvalues(&h.to_dense());
            let w = build_sector(model, n, &model.ground_sector()).unwrap();
            let sec = linalg::herm_eigenvalues(&w.project(&h).unwrap().to_dense());
            for e in sec {
                let nearest = full.iter().map(|f| (f - e).abs()).fold(f64::INFINITY, f64::min);
                assert!(nearest < 1e-8, "{e}");
            }
        }
    }

    #[test]
    fn symmetrizing_s_never_lowers_the_gap() {
        use crate::spectra::spectral_gap_dense;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for (model, n, lambda) in [(Model::Aklt, 6, 0.55), (Model::Ghz, 6, 0.4)] {
            let fam = Family::new(model, 0, 0.0);
            let basis = fam.basis(lambda).unwrap();
            let t = symmetric_s_template(model).unwrap();
            let m = basis.m();
            for _ in 0..20 {
                let x: Vec<f64> = (0..m * m).map(|_| rng.random_range(-1.0..1.0)).collect();
                let e = linalg::expm_herm(&linalg::herm_from_coords(&x, m));
                let s = linalg::scale(&e, c(1.0 / linalg::trace(&e).re));
                let sym = t.project_hermitian(&s).unwrap();
                let gap = |s: &CMat| {
                    let h = assemble(&basis, s, n, None).unwrap().to_dense();
                    spectral_gap_dense(&h, 1e-9).unwrap().gap
                };
                assert!(gap(&sym) >= gap(&s) - 1e-9);
            }
        }
    }
}
