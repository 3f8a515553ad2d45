//! Low-lying spectrum, spectral gap and the χ matrix of overlaps between an
//! excited state and the translated kernel vectors.
//!
//! Dense diagonalization is used up to [`EigenSettings::dense_threshold`]; larger
//! operators go through a Lanczos-type solver with full reorthogonalization,
//! thick restarts and locking. Each locked pair is followed by a fresh start vector
//! orthogonal to everything locked so far, which is what lets the solver return
//! every copy of a degenerate eigenvalue.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::parent::{ChainGeometry, KernelBasis, SparseHamiltonian};
use crate::symmetry::SectorMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dense,
    Iterative,
}

#[derive(Clone, Debug)]
pub struct EigenSettings {
    /// Largest dimension handled by dense diagonalization.
    pub dense_threshold: usize,
    /// Residual tolerance relative to `max(1, ‖H‖_est)` for the iterative solver.
    pub tol: f64,
    /// Maximum Krylov basis size before a thick restart.
    pub krylov_dim: usize,
    /// Ritz vectors kept at a restart.
    pub keep: usize,
    /// Matrix-vector products allowed per eigenpair.
    pub max_matvecs: usize,
    pub seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self { dense_threshold: 512, tol: 1e-11, krylov_dim: 48, keep: 8, max_matvecs: 20_000, seed: 0x5eed }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<C64>>,
    pub ground_degeneracy: usize,
    pub solver: SolverKind,
    pub residuals: Vec<f64>,
}

/// `1e-8 · max(1, ‖H‖_est)`.
pub fn default_deg_tol(h: &SparseHamiltonian) -> f64 {
    1e-8 * h.norm_estimate().max(1.0)
}

fn dense_norm_estimate(h: &CMat) -> f64 {
    (0..h.nrows())
        .map(|r| (0..h.ncols()).map(|c| h[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn default_deg_tol_dense(h: &CMat) -> f64 {
    1e-8 * dense_norm_estimate(h).max(1.0)
}

fn residual_dense(h: &CMat, v: &[C64], e: f64) -> f64 {
    let mut hv = linalg::mat_vec(h, v);
    linalg::axpy(linalg::c(-e), v, &mut hv);
    linalg::norm(&hv)
}

/// All eigenpairs of a dense Hermitian matrix; the `k` lowest are returned.
pub fn dense_eigenpairs(h: &CMat, k: usize, deg_tol: f64) -> EigenResult {
    let (vals, vecs) = linalg::herm_eigen(h);
    let k = k.min(vals.len());
    let e0 = vals.first().copied().unwrap_or(0.0);
    let ground_degeneracy = vals.iter().filter(|&&e| e <= e0 + deg_tol).count();
    let eigenvectors: Vec<Vec<C64>> = (0..k).map(|j| linalg::column(&vecs, j)).collect();
    let residuals = (0..k).map(|j| residual_dense(h, &eigenvectors[j], vals[j])).collect();
    EigenResult { eigenvalues: vals[..k].to_vec(), eigenvectors, ground_degeneracy, solver: SolverKind::Dense, residuals }
}

/// The `k` lowest eigenpairs.
pub fn lowest_eigenpairs(h: &SparseHamiltonian, k: usize, deg_tol: f64) -> Result<EigenResult> {
    lowest_eigenpairs_with(h, k, deg_tol, &EigenSettings::default())
}

pub fn lowest_eigenpairs_with(h: &SparseHamiltonian, k: usize, deg_tol: f64, settings: &EigenSettings) -> Result<EigenResult> {
    if k == 0 || k > h.dim {
        return Err(Error::InvalidInput(format!("requested {k} eigenpairs of a {}-dimensional operator", h.dim)));
    }
    if h.dim <= settings.dense_threshold {
        return Ok(dense_eigenpairs(&h.to_dense(), k, deg_tol));
    }
    let mut solver = Locking::new(h, settings);
    while solver.vals.len() < k {
        solver.next_pair()?;
    }
    Ok(solver.result(deg_tol))
}

/// Lanczos-type solver that locks converged pairs one at a time.
struct Locking<'a> {
    h: &'a SparseHamiltonian,
    settings: &'a EigenSettings,
    scale: f64,
    vals: Vec<f64>,
    vecs: Vec<Vec<C64>>,
    residuals: Vec<f64>,
    rng: ChaCha8Rng,
}

impl<'a> Locking<'a> {
    fn new(h: &'a SparseHamiltonian, settings: &'a EigenSettings) -> Self {
        Self {
            h,
            settings,
            scale: h.norm_estimate().max(1.0),
            vals: Vec::new(),
            vecs: Vec::new(),
            residuals: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(settings.seed),
        }
    }

    fn orthogonalize(&self, basis: &[Vec<C64>], w: &mut [C64]) {
        for _ in 0..2 {
            for q in self.vecs.iter().chain(basis.iter()) {
                let p = linalg::dot(q, w);
                linalg::axpy(-p, q, w);
            }
        }
    }

    fn random_start(&mut self, basis: &[Vec<C64>]) -> Option<Vec<C64>> {
        for _ in 0..8 {
            let mut v: Vec<C64> = (0..self.h.dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut self.rng);
                    let im: f64 = StandardNormal.sample(&mut self.rng);
                    C64::new(re, im)
                })
                .collect();
            self.orthogonalize(basis, &mut v);
            if linalg::normalize(&mut v) > 1e-8 {
                return Some(v);
            }
        }
        None
    }

    fn next_pair(&mut self) -> Result<()> {
        let dim = self.h.dim;
        let available = dim - self.vecs.len();
        if available == 0 {
            return Err(Error::InvalidInput("no eigenpairs left".into()));
        }
        let mmax = self.settings.krylov_dim.min(available).max(1);
        let tol = self.settings.tol * self.scale;
        let mut v: Vec<Vec<C64>> = Vec::new();
        let mut hv: Vec<Vec<C64>> = Vec::new();
        let mut t = linalg::zeros(0, 0);
        let mut matvecs = 0usize;
        let mut best_res = f64::INFINITY;
        // best residual at the last restart, and restarts since it last improved
        let mut restart_res = f64::INFINITY;
        let mut stagnant = 0usize;
        let mut pending = self.random_start(&v).ok_or(Error::InvalidInput("cannot build a start vector".into()))?;
        loop {
            // extend the basis by `pending`
            let w = self.h.mul_vec(&pending);
            matvecs += 1;
            let m = v.len();
            let mut tn = linalg::zeros(m + 1, m + 1);
            for i in 0..m {
                for j in 0..m {
                    tn[(i, j)] = t[(i, j)];
                }
            }
            for i in 0..m {
                let x = linalg::dot(&v[i], &w);
                tn[(i, m)] = x;
                tn[(m, i)] = x.conj();
            }
            tn[(m, m)] = linalg::c(linalg::dot(&pending, &w).re);
            t = tn;
            v.push(pending.clone());
            hv.push(w);

            let (theta, y) = linalg::herm_eigen(&t);
            let m = v.len();
            let ritz = |j: usize, src: &Vec<Vec<C64>>| -> Vec<C64> {
                let mut x = vec![ZERO; dim];
                for i in 0..m {
                    linalg::axpy(y[(i, j)], &src[i], &mut x);
                }
                x
            };
            let x = ritz(0, &v);
            let hx = ritz(0, &hv);
            let mut r = hx.clone();
            linalg::axpy(linalg::c(-theta[0]), &x, &mut r);
            // residual within the complement of the locked vectors
            let mut rp = r.clone();
            for q in &self.vecs {
                let p = linalg::dot(q, &rp);
                linalg::axpy(-p, q, &mut rp);
            }
            let res = linalg::norm(&rp);
            best_res = best_res.min(res);
            // rounding in the accumulated H·v stalls the implicit residual near tol;
            // accept a stalled pair once it is within the working-precision floor
            let floor_ok = stagnant >= 3 && res <= 1e3 * tol;
            if res <= tol || m == available || floor_ok {
                let mut x = x;
                self.orthogonalize(&[], &mut x);
                linalg::normalize(&mut x);
                let hx = self.h.mul_vec(&x);
                let e = linalg::dot(&x, &hx).re;
                let mut full = hx;
                linalg::axpy(linalg::c(-e), &x, &mut full);
                self.vals.push(e);
                self.residuals.push(linalg::norm(&full));
                self.vecs.push(x);
                return Ok(());
            }
            if matvecs >= self.settings.max_matvecs {
                return Err(Error::Convergence { iterations: matvecs, residuals: vec![best_res] });
            }
            if m >= mmax {
                if best_res < 0.9 * restart_res {
                    stagnant = 0;
                } else {
                    stagnant += 1;
                }
                restart_res = best_res;
                let keep = self.settings.keep.min(m - 1).max(1);
                let nv: Vec<Vec<C64>> = (0..keep).map(|j| ritz(j, &v)).collect();
                let nh: Vec<Vec<C64>> = (0..keep).map(|j| ritz(j, &hv)).collect();
                v = nv;
                hv = nh;
                t = linalg::diag(&theta[..keep]);
            }
            let mut w = rp;
            self.orthogonalize(&v, &mut w);
            if linalg::normalize(&mut w) < 1e-10 * self.scale {
                // invariant subspace reached: continue from a fresh direction
                pending = match self.random_start(&v) {
                    Some(p) => p,
                    None => return Err(Error::Convergence { iterations: matvecs, residuals: vec![best_res] }),
                };
            } else {
                pending = w;
            }
        }
    }

    fn result(self, deg_tol: f64) -> EigenResult {
        let mut idx: Vec<usize> = (0..self.vals.len()).collect();
        idx.sort_by(|&a, &b| self.vals[a].partial_cmp(&self.vals[b]).unwrap());
        let eigenvalues: Vec<f64> = idx.iter().map(|&i| self.vals[i]).collect();
        let eigenvectors = idx.iter().map(|&i| self.vecs[i].clone()).collect();
        let residuals = idx.iter().map(|&i| self.residuals[i]).collect();
        let e0 = eigenvalues[0];
        let ground_degeneracy = eigenvalues.iter().filter(|&&e| e <= e0 + deg_tol).count();
        EigenResult { eigenvalues, eigenvectors, ground_degeneracy, solver: SolverKind::Iterative, residuals }
    }
}

/// Spectral gap and the state that realizes it.
#[derive(Clone, Debug)]
pub struct GapResult {
    /// `E_1 − E_0`, or `0` when the ground level is degenerate.
    pub gap: f64,
    pub e0: f64,
    /// Second-lowest eigenvalue counted with multiplicity.
    pub e1: f64,
    /// Third-lowest eigenvalue when it was computed.
    pub e2: Option<f64>,
    pub ground: Vec<C64>,
    /// Eigenvector of `e1`.
    pub excited: Vec<C64>,
    pub ground_degeneracy: usize,
    /// True when `E_2 − E_1 < deg_tol` (the gap is not differentiable there).
    pub excited_degenerate: bool,
    pub solver: SolverKind,
    pub residuals: Vec<f64>,
}

impl GapResult {
    pub fn degenerate(&self) -> bool {
        self.ground_degeneracy > 1
    }

    fn from_result(r: EigenResult, deg_tol: f64) -> Self {
        let e0 = r.eigenvalues[0];
        let e1 = r.eigenvalues[1];
        let excited_degenerate = r.eigenvalues.len() > 2 && r.eigenvalues[2] - e1 < deg_tol && r.ground_degeneracy <= 1;
        let gap = if r.ground_degeneracy > 1 { 0.0 } else { e1 - e0 };
        GapResult {
            gap,
            e0,
            e1,
            e2: r.eigenvalues.get(2).copied(),
            ground: r.eigenvectors[0].clone(),
            excited: r.eigenvectors[1].clone(),
            ground_degeneracy: r.ground_degeneracy,
            excited_degenerate,
            solver: r.solver,
            residuals: r.residuals,
        }
    }
}

/// Gap of a dense Hermitian matrix.
pub fn spectral_gap_dense(h: &CMat, deg_tol: f64) -> Result<GapResult> {
    if h.nrows() < 2 {
        return Err(Error::InvalidInput("a gap needs dimension >= 2".into()));
    }
    Ok(GapResult::from_result(dense_eigenpairs(h, h.nrows().min(3), deg_tol), deg_tol))
}

/// Gap of a sparse Hamiltonian: the lowest eigenvalue more than `deg_tol` above `E_0`
/// is located first, so a degenerate ground level is reported as gap `0`.
pub fn spectral_gap(h: &SparseHamiltonian, deg_tol: f64) -> Result<GapResult> {
    spectral_gap_with(h, deg_tol, &EigenSettings::default())
}

pub fn spectral_gap_with(h: &SparseHamiltonian, deg_tol: f64, settings: &EigenSettings) -> Result<GapResult> {
    if h.dim < 2 {
        return Err(Error::InvalidInput("a gap needs dimension >= 2".into()));
    }
    if h.dim <= settings.dense_threshold {
        return spectral_gap_dense(&h.to_dense(), deg_tol);
    }
    let mut solver = Locking::new(h, settings);
    solver.next_pair()?;
    solver.next_pair()?;
    // extend until one level above the ground level and the next one are known
    loop {
        let e0 = solver.vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let above = solver.vals.iter().filter(|&&e| e > e0 + deg_tol).count();
        if above >= 2 || solver.vals.len() == h.dim {
            break;
        }
        solver.next_pair()?;
    }
    Ok(GapResult::from_result(solver.result(deg_tol), deg_tol))
}

/// `χ_{αβ} = Σ_i ⟨Ψ_1|φ_{i,α}⟩⟨φ_{i,β}|Ψ_1⟩`.
#[derive(Clone, Debug)]
pub struct ChiMatrix {
    pub entries: CMat,
    /// Eigenvalue of the excited state; `NaN` until a caller that knows it fills it in.
    pub excited_energy: f64,
}

impl ChiMatrix {
    /// `tr(S χ^T) = Σ_{αβ} S_{αβ} χ_{αβ}`.
    pub fn pair_with(&self, s: &CMat) -> f64 {
        let m = s.nrows();
        let mut acc = ZERO;
        for a in 0..m {
            for b in 0..m {
                acc += s[(a, b)] * self.entries[(a, b)];
            }
        }
        acc.re
    }

    /// Numerical rank relative to the largest eigenvalue.
    pub fn rank(&self, tol: f64) -> usize {
        let ev = linalg::herm_eigenvalues(&self.entries);
        let top = ev.iter().cloned().fold(0.0, f64::max);
        ev.iter().filter(|&&x| x > tol * top.max(f64::MIN_POSITIVE)).count()
    }
}

/// χ for a normalized `excited` state on `n_sites` chain sites, lifted from the
/// sector first when one is given.
pub fn chi_matrix(
    excited: &[C64],
    basis: &KernelBasis,
    n_sites: usize,
    sector: Option<&SectorMap>,
) -> Result<ChiMatrix> {
    let geom = ChainGeometry::new(basis.phys_dim, n_sites, basis.block_len)?;
    let psi = match sector {
        Some(w) => {
            if excited.len() != w.d_g || w.full_dim != geom.dim {
                return Err(Error::InvalidInput("excited state does not match the sector".into()));
            }
            w.lift(excited)
        }
        None => {
            if excited.len() != geom.dim {
                return Err(Error::InvalidInput(format!(
                    "state has length {}, chain space has dimension {}",
                    excited.len(),
                    geom.dim
                )));
            }
            excited.to_vec()
        }
    };
    let m = basis.m();
    let ld = geom.local_dim();
    let phi = &basis.vectors;
    let mut chi = linalg::zeros(m, m);
    let mut g = vec![ZERO; ld];
    let mut x = vec![ZERO; m];
    for i in 0..n_sites {
        for r in 0..geom.dim {
            if geom.local_index(i, r) != 0 {
                continue;
            }
            let mut any = false;
            for (l, gl) in g.iter_mut().enumerate() {
                *gl = psi[geom.replace(i, r, 0, l)];
                any |= *gl != ZERO;
            }
            if !any {
                continue;
            }
            for (a, xa) in x.iter_mut().enumerate() {
                *xa = (0..ld).map(|l| phi[(l, a)].conj() * g[l]).sum();
            }
            for a in 0..m {
                let xa = x[a].conj();
                for b in 0..m {
                    chi[(a, b)] += xa * x[b];
                }
            }
        }
    }
    Ok(ChiMatrix { entries: linalg::hermitian_part(&chi), excited_energy: f64::NAN })
}
