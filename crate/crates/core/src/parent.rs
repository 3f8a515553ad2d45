//! Parent Hamiltonians: kernel bases, the `S` parametrization and sparse assembly
//! of `H = Σ_i shift_i(Φ S Φ†)` on a periodic chain.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, ZERO};
use crate::symmetry::{SectorMap, STemplate};
use crate::tensor::{InjectivityMap, RandomMpsFamily};
use serde::{Deserialize, Serialize};

/// Hamiltonians are only assembled on spaces strictly smaller than this.
pub const MAX_HAMILTONIAN_DIM: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisConvention {
    Svd,
    AkltClosedForm,
    GhzClosedForm,
}

/// Orthonormal basis `Φ` (columns) of the orthogonal complement of the image of the
/// injectivity map.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub block_len: usize,
    pub phys_dim: usize,
    /// `d^L × M`.
    pub vectors: CMat,
    pub lambda_tag: f64,
    pub convention: BasisConvention,
}

impl KernelBasis {
    pub fn m(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn local_dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// `h = Φ S Φ†`, Hermitized so that assembly is exactly Hermitian.
    pub fn local_term(&self, s: &CMat) -> CMat {
        let h = &(&self.vectors * s) * linalg::adjoint(&self.vectors);
        linalg::hermitian_part(&h)
    }

    /// Orthogonal projector `Φ Φ†`.
    pub fn projector(&self) -> CMat {
        &self.vectors * linalg::adjoint(&self.vectors)
    }
}

/// Rotates a vector so its largest-magnitude entry (first on ties) is real positive.
fn fix_phase(v: &mut [C64]) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best_abs + 1e-12 {
            best = i;
            best_abs = z.norm();
        }
    }
    if best_abs > 0.0 {
        let ph = v[best].conj() / v[best].norm();
        for z in v.iter_mut() {
            *z *= ph;
        }
    }
}

/// Left null space of the injectivity map from a full SVD; singular values below
/// `tol · σ_max` count as zero. Each vector is phase-fixed by [`fix_phase`].
pub fn kernel_basis_svd(map: &InjectivityMap, tol: f64, lambda_tag: f64) -> KernelBasis {
    let (s, u) = linalg::svd_left(&map.matrix);
    let smax = s.first().copied().unwrap_or(0.0);
    let r = s.iter().filter(|&&x| smax > 0.0 && x > tol * smax).count();
    let rows = map.matrix.nrows();
    let cols: Vec<Vec<C64>> = (r..rows)
        .map(|j| {
            let mut v = linalg::column(&u, j);
            fix_phase(&mut v);
            v
        })
        .collect();
    KernelBasis {
        block_len: map.block_len,
        phys_dim: map.phys_dim,
        vectors: linalg::from_columns(rows, &cols),
        lambda_tag,
        convention: BasisConvention::Svd,
    }
}

/// Index of a two-qutrit configuration in `(+1, 0, -1)` order.
fn q2(m1: i32, m2: i32) -> usize {
    ((1 - m1) * 3 + (1 - m2)) as usize
}

/// Closed-form AKLT kernel basis `φ_1 … φ_5` (two sites).
pub fn aklt_kernel_basis(lambda: f64) -> KernelBasis {
    let l = lambda;
    let n2 = (1.0 + l * l).sqrt();
    let n3 = (1.0 + 5.0 * l.powi(4)).sqrt();
    let entries: [&[(usize, f64)]; 5] = [
        &[(q2(1, 1), 1.0)],
        &[(q2(1, 0), 1.0 / n2), (q2(0, 1), l / n2)],
        &[(q2(1, -1), 1.0 / n3), (q2(0, 0), 2.0 * l * l / n3), (q2(-1, 1), l * l / n3)],
        &[(q2(0, -1), 1.0 / n2), (q2(-1, 0), l / n2)],
        &[(q2(-1, -1), 1.0)],
    ];
    let mut v = linalg::zeros(9, 5);
    for (j, col) in entries.iter().enumerate() {
        for &(i, x) in col.iter() {
            v[(i, j)] = c(x);
        }
    }
    KernelBasis { block_len: 2, phys_dim: 3, vectors: v, lambda_tag: lambda, convention: BasisConvention::AkltClosedForm }
}

/// Closed-form GHZ/cluster kernel basis `φ_1 … φ_4` (three sites).
pub fn ghz_kernel_basis(lambda: f64) -> KernelBasis {
    let l = lambda;
    let r = (1.0 + l * l).sqrt();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let entries: [&[(usize, f64)]; 4] = [
        &[(0b000, l / r), (0b010, -1.0 / r)],
        &[(0b001, s), (0b011, -s)],
        &[(0b100, -s), (0b110, s)],
        &[(0b101, -1.0 / r), (0b111, l / r)],
    ];
    let mut v = linalg::zeros(8, 4);
    for (j, col) in entries.iter().enumerate() {
        for &(i, x) in col.iter() {
            v[(i, j)] = c(x);
        }
    }
    KernelBasis { block_len: 3, phys_dim: 2, vectors: v, lambda_tag: lambda, convention: BasisConvention::GhzClosedForm }
}

/// Positive-definite, trace-one mixing matrix `S = e^{-B} / tr e^{-B}`.
#[derive(Clone, Debug)]
pub struct SMatrix {
    pub generator: CMat,
    pub s: CMat,
}

impl SMatrix {
    pub fn m(&self) -> usize {
        self.s.nrows()
    }

    /// Builds from an explicit positive-definite `S`, normalizing its trace; the
    /// generator is `-log S`.
    pub fn from_s(s: &CMat) -> Result<Self> {
        if linalg::hermiticity_defect(s) > 1e-10 {
            return Err(Error::InvalidInput("S is not Hermitian".into()));
        }
        let tr = linalg::trace(s).re;
        let sn = linalg::scale(&linalg::hermitian_part(s), c(1.0 / tr));
        let ev = linalg::herm_eigenvalues(&sn);
        if ev.first().map_or(false, |&x| x <= 0.0) {
            return Err(Error::Infeasible(format!("S is not positive definite (min eigenvalue {:e})", ev[0])));
        }
        let generator = linalg::herm_fn(&sn, |x| c(-x.ln()));
        Ok(Self { generator, s: sn })
    }
}

/// `S = e^{-B}/tr e^{-B}`; with a template, `B` is first projected onto the
/// template's linear span.
pub fn s_from_generator(b: &CMat, structure: Option<&STemplate>) -> Result<SMatrix> {
    if b.nrows() != b.ncols() {
        return Err(Error::InvalidInput("generator must be square".into()));
    }
    if linalg::hermiticity_defect(b) > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "generator is not Hermitian (defect {:e})",
            linalg::hermiticity_defect(b)
        )));
    }
    let b = match structure {
        Some(t) => t.project_hermitian(b)?,
        None => linalg::hermitian_part(b),
    };
    if b.nrows() == 0 {
        return Ok(SMatrix { generator: b, s: linalg::zeros(0, 0) });
    }
    let vals = linalg::herm_eigenvalues(&b);
    let bmin = vals[0];
    let e = linalg::herm_fn(&b, |x| c((-(x - bmin)).exp()));
    let tr = linalg::trace(&e).re;
    let s = linalg::hermitian_part(&linalg::scale(&e, c(1.0 / tr)));
    Ok(SMatrix { generator: b, s })
}

/// Hermitian sparse operator in compressed-row form.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<C64>,
    /// Number of blocked physical sites one term acts on.
    pub locality: usize,
    pub n_terms: usize,
}

impl SparseHamiltonian {
    pub fn zero(dim: usize, locality: usize, n_terms: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new(), locality, n_terms }
    }

    /// Compresses coordinate triples, summing duplicates and dropping exact zeros.
    pub fn from_triplets(dim: usize, mut trip: Vec<(u32, u32, C64)>, locality: usize, n_terms: usize) -> Self {
        trip.sort_by_key(|&(r, cl, _)| (r, cl));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, cl, v) in trip {
            if last == Some((r, cl)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(cl);
                vals.push(v);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, cl));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut h = Self { dim, row_ptr, cols, vals, locality, n_terms };
        h.drop_zeros();
        h
    }

    fn drop_zeros(&mut self) {
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != ZERO {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k] as usize, self.vals[k]))
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        for r in 0..self.dim {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[r] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim];
        self.apply(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = linalg::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (cl, v) in self.row(r) {
                m[(r, cl)] += v;
            }
        }
        m
    }

    pub fn from_dense(m: &CMat, locality: usize, n_terms: usize) -> Self {
        let dim = m.nrows();
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..dim {
            for cl in 0..dim {
                let v = m[(r, cl)];
                if v != ZERO {
                    cols.push(cl as u32);
                    vals.push(v);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        Self { dim, row_ptr, cols, vals, locality, n_terms }
    }

    /// Upper bound on the spectral norm (maximum absolute row sum).
    pub fn norm_estimate(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn expectation(&self, x: &[C64]) -> C64 {
        linalg::dot(x, &self.mul_vec(x))
    }
}

/// Geometry of a periodic chain: `n` sites of dimension `d`, terms on `L` consecutive sites.
#[derive(Clone, Debug)]
pub struct ChainGeometry {
    pub d: usize,
    pub n: usize,
    pub block_len: usize,
    pub dim: usize,
    /// `offsets[i][l]`: contribution of local configuration `l` of term `i` to the full index.
    offsets: Vec<Vec<usize>>,
    places: Vec<Vec<usize>>,
}

impl ChainGeometry {
    pub fn new(d: usize, n: usize, block_len: usize) -> Result<Self> {
        if n < block_len + 1 {
            return Err(Error::InvalidSize(format!(
                "chain of {n} sites is too short for overlapping {block_len}-site terms"
            )));
        }
        let dim = crate::tensor::checked_dim(d, n, MAX_HAMILTONIAN_DIM - 1)?;
        let ld = d.pow(block_len as u32);
        let place = |site: usize| d.pow((n - 1 - site) as u32);
        let mut offsets = Vec::with_capacity(n);
        let mut places = Vec::with_capacity(n);
        for i in 0..n {
            let sites: Vec<usize> = (0..block_len).map(|j| (i + j) % n).collect();
            let pl: Vec<usize> = sites.iter().map(|&s| place(s)).collect();
            let off: Vec<usize> = (0..ld)
                .map(|l| {
                    (0..block_len)
                        .map(|j| ((l / d.pow((block_len - 1 - j) as u32)) % d) * pl[j])
                        .sum()
                })
                .collect();
            offsets.push(off);
            places.push(pl);
        }
        Ok(Self { d, n, block_len, dim, offsets, places })
    }

    pub fn local_dim(&self) -> usize {
        self.d.pow(self.block_len as u32)
    }

    /// Local configuration of term `i` in full basis state `r`.
    #[inline]
    pub fn local_index(&self, i: usize, r: usize) -> usize {
        let mut l = 0;
        for &p in &self.places[i] {
            l = l * self.d + (r / p) % self.d;
        }
        l
    }

    /// Full index obtained from `r` by replacing term `i`'s local configuration with `l`.
    #[inline]
    pub fn replace(&self, i: usize, r: usize, l_old: usize, l_new: usize) -> usize {
        r - self.offsets[i][l_old] + self.offsets[i][l_new]
    }

    /// Sparse `Σ_i shift_i(h)` for a local term `h` on `L` consecutive sites.
    pub fn assemble_local(&self, h: &CMat) -> Result<SparseHamiltonian> {
        let ld = self.local_dim();
        if h.nrows() != ld || h.ncols() != ld {
            return Err(Error::InvalidInput(format!(
                "local term is {}×{}, expected {ld}×{ld}",
                h.nrows(),
                h.ncols()
            )));
        }
        let h = linalg::hermitian_part(h);
        let nz: Vec<Vec<(usize, C64)>> = (0..ld)
            .map(|lr| (0..ld).filter_map(|lc| (h[(lr, lc)] != ZERO).then(|| (lc, h[(lr, lc)]))).collect())
            .collect();
        let mut row_ptr = Vec::with_capacity(self.dim + 1);
        row_ptr.push(0usize);
        let mut cols: Vec<u32> = Vec::new();
        let mut vals: Vec<C64> = Vec::new();
        let mut scratch: Vec<(u32, C64)> = Vec::new();
        for r in 0..self.dim {
            scratch.clear();
            for i in 0..self.n {
                let lr = self.local_index(i, r);
                for &(lc, v) in &nz[lr] {
                    scratch.push((self.replace(i, r, lr, lc) as u32, v));
                }
            }
            // stable sort keeps the per-term summation order identical for (r,c) and (c,r)
            scratch.sort_by_key(|&(cl, _)| cl);
            let mut k = 0;
            while k < scratch.len() {
                let cl = scratch[k].0;
                let mut acc = ZERO;
                while k < scratch.len() && scratch[k].0 == cl {
                    acc += scratch[k].1;
                    k += 1;
                }
                if acc != ZERO {
                    cols.push(cl);
                    vals.push(acc);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseHamiltonian { dim: self.dim, row_ptr, cols, vals, locality: self.block_len, n_terms: self.n })
    }

    /// Dense `Σ_i shift_i(h)`.
    pub fn assemble_local_dense(&self, h: &CMat) -> Result<CMat> {
        Ok(self.assemble_local(h)?.to_dense())
    }
}

/// `H = Σ_i shift_i(Φ S Φ†)` on `n_sites` chain sites, optionally compressed to a sector `W† H W`.
pub fn assemble(
    basis: &KernelBasis,
    s: &CMat,
    n_sites: usize,
    sector: Option<&SectorMap>,
) -> Result<SparseHamiltonian> {
    if s.nrows() != basis.m() || s.ncols() != basis.m() {
        return Err(Error::InvalidInput(format!("S is {}×{}, basis has M={}", s.nrows(), s.ncols(), basis.m())));
    }
    let geom = ChainGeometry::new(basis.phys_dim, n_sites, basis.block_len)?;
    let h = if basis.m() == 0 {
        SparseHamiltonian::zero(geom.dim, basis.block_len, n_sites)
    } else {
        geom.assemble_local(&basis.local_term(s))?
    };
    match sector {
        None => Ok(h),
        Some(w) => w.project(&h),
    }
}

/// Spin-1 operators `(S^x, S^y, S^z)` in the `(+1, 0, -1)` basis.
pub fn spin1_ops() -> [CMat; 3] {
    let r = std::f64::consts::SQRT_2;
    let sp = linalg::from_real(&[&[0.0, r, 0.0], &[0.0, 0.0, r], &[0.0, 0.0, 0.0]]);
    let sm = linalg::adjoint(&sp);
    let sx = linalg::scale(&linalg::add(&sp, &sm), c(0.5));
    let sy = linalg::scale(&linalg::sub(&sp, &sm), C64::new(0.0, -0.5));
    let sz = linalg::diag(&[1.0, 0.0, -1.0]);
    [sx, sy, sz]
}

/// `½ S_1·S_2 + ⅙ (S_1·S_2)² + ⅓` on two spin-1 sites.
pub fn aklt_standard_local_term() -> CMat {
    let ops = spin1_ops();
    let mut ss = linalg::zeros(9, 9);
    for o in &ops {
        ss = linalg::add(&ss, &linalg::kron(o, o));
    }
    let ss2 = &ss * &ss;
    let mut h = linalg::scale(&ss, c(0.5));
    h = linalg::add(&h, &linalg::scale(&ss2, c(1.0 / 6.0)));
    linalg::add(&h, &linalg::scale(&linalg::identity(9), c(1.0 / 3.0)))
}

pub fn pauli_x() -> CMat {
    linalg::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_z() -> CMat {
    linalg::diag(&[1.0, -1.0])
}

/// Three-site GHZ/cluster term at `S = 𝟙/4` written with Pauli operators
/// (sites of the block are `i-1, i, i+1`):
/// `1/8 − a X_i − b Z_i (Z_{i-1} + Z_{i+1}) + e Z_{i-1} X_i Z_{i+1}`.
pub fn ghz_closed_form_local_term(lambda: f64) -> CMat {
    let l = lambda;
    let den = 16.0 * (1.0 + l * l);
    let a = (1.0 + l).powi(2) / den;
    let b = (1.0 - l * l) / den;
    let e = (1.0 - l).powi(2) / den;
    let id = linalg::identity(2);
    let (x, z) = (pauli_x(), pauli_z());
    let k3 = |p: &CMat, q: &CMat, r: &CMat| linalg::kron(&linalg::kron(p, q), r);
    let mut h = linalg::scale(&linalg::identity(8), c(0.125));
    h = linalg::sub(&h, &linalg::scale(&k3(&id, &x, &id), c(a)));
    h = linalg::sub(&h, &linalg::scale(&k3(&z, &z, &id), c(b)));
    h = linalg::sub(&h, &linalg::scale(&k3(&id, &z, &z), c(b)));
    linalg::add(&h, &linalg::scale(&k3(&z, &x, &z), c(e)))
}

/// Two-qubit circuit `U = CNOT · (H ⊗ 𝟙) · (X ⊗ X)` with `U|↑↑⟩ = (|↑↓⟩ − |↓↑⟩)/√2`.
pub fn singlet_preparation_unitary() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let had = linalg::from_real(&[&[s, s], &[s, -s]]);
    let xx = linalg::kron(&pauli_x(), &pauli_x());
    let hi = linalg::kron(&had, &linalg::identity(2));
    let cnot = linalg::from_real(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
        &[0.0, 0.0, 1.0, 0.0],
    ]);
    &(&cnot * &hi) * &xx
}

/// Canonical two-block term of the random family, normalized to unit trace:
/// `h = O† Π O` with `O = U^{-1}_{r_1 l_2} (𝒫^{-1} ⊗ 𝒫^{-1})` and `Π = n_{r_1} + n_{l_2}`,
/// spins ordered `(l_1, r_1, l_2, r_2)`, `n = |↓⟩⟨↓|`.
pub fn random_canonical_local_term(family: &RandomMpsFamily, lambda: f64) -> CMat {
    let pinv = family.deformation_inverse(lambda);
    let id2 = linalg::identity(2);
    let uinv = linalg::adjoint(&singlet_preparation_unitary());
    let mid = linalg::kron(&linalg::kron(&id2, &uinv), &id2);
    let o = &mid * &linalg::kron(&pinv, &pinv);
    let n = linalg::diag(&[0.0, 1.0]);
    let n_r1 = linalg::kron(&linalg::kron(&id2, &n), &linalg::identity(4));
    let n_l2 = linalg::kron(&linalg::kron(&linalg::identity(4), &n), &id2);
    let pi = linalg::add(&n_r1, &n_l2);
    let h = &(&linalg::adjoint(&o) * &pi) * &o;
    let tr = linalg::trace(&h).re;
    linalg::hermitian_part(&linalg::scale(&h, c(1.0 / tr)))
}

/// `S` representing a local term `h` supported on `span Φ`: `Φ† h Φ`.
pub fn s_of_local_term(basis: &KernelBasis, h: &CMat) -> CMat {
    linalg::hermitian_part(&(&(&linalg::adjoint(&basis.vectors) * h) * &basis.vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::tensor::{aklt_tensor, block_tensor, contract_to_statevector, ghz_tensor, make_mps, random_family_tensor};

    fn projector_distance(a: &KernelBasis, b: &KernelBasis) -> f64 {
        linalg::max_abs_diff(&a.projector(), &b.projector())
    }

    fn check_basis(b: &KernelBasis, map: &InjectivityMap) {
        let g = &linalg::adjoint(&b.vectors) * &b.vectors;
        assert!(linalg::max_abs_diff(&g, &linalg::identity(b.m())) < 1e-10);
        let ann = &linalg::adjoint(&b.vectors) * &map.matrix;
        assert!(linalg::max_abs(&ann) < 1e-10, "{}", linalg::max_abs(&ann));
    }

    #[test]
    fn svd_kernel_dimensions() {
        let m = block_tensor(&aklt_tensor(1.0), 2).unwrap();
        let b = kernel_basis_svd(&m, 1e-10, 1.0);
        assert_eq!(b.m(), 5);
        check_basis(&b, &m);
        let m = block_tensor(&ghz_tensor(0.5), 3).unwrap();
        let b = kernel_basis_svd(&m, 1e-10, 0.5);
        assert_eq!(b.m(), 4);
        check_basis(&b, &m);
        let fam = RandomMpsFamily::from_seed(1, 0.0);
        let m = block_tensor(&random_family_tensor(&fam, 0.3), 2).unwrap();
        let b = kernel_basis_svd(&m, 1e-10, 0.3);
        assert_eq!(b.m(), 12);
        check_basis(&b, &m);
    }

    #[test]
    fn svd_phase_convention() {
        let m = block_tensor(&ghz_tensor(0.5), 3).unwrap();
        let b = kernel_basis_svd(&m, 1e-10, 0.5);
        for j in 0..b.m() {
            let v = linalg::column(&b.vectors, j);
            // first entry of maximal modulus (ties within 1e-12 go to the lower index)
            let top = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let k = v.iter().position(|z| z.norm() > top - 1e-12).unwrap();
            assert!(v[k].im.abs() < 1e-14 && v[k].re > 0.0);
        }
    }

    #[test]
    fn aklt_closed_form_basis() {
        let b = aklt_kernel_basis(1.0);
        let s6 = 6f64.sqrt();
        assert!((b.vectors[(q2(1, -1), 2)].re - 1.0 / s6).abs() < 1e-15);
        assert!((b.vectors[(q2(0, 0), 2)].re - 2.0 / s6).abs() < 1e-15);
        assert!((b.vectors[(q2(-1, 1), 2)].re - 1.0 / s6).abs() < 1e-15);
        let b0 = aklt_kernel_basis(0.0);
        assert_eq!(b0.vectors[(q2(1, 0), 1)], ONE);
        for k in 1..=20 {
            let lam = k as f64 / 20.0;
            let map = block_tensor(&aklt_tensor(lam), 2).unwrap();
            let cf = aklt_kernel_basis(lam);
            check_basis(&cf, &map);
            assert!(projector_distance(&cf, &kernel_basis_svd(&map, 1e-10, lam)) < 1e-10);
        }
    }

    #[test]
    fn ghz_closed_form_basis() {
        let b = ghz_kernel_basis(1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.vectors[(0b000, 0)].re - s).abs() < 1e-15);
        assert!((b.vectors[(0b010, 0)].re + s).abs() < 1e-15);
        let b0 = ghz_kernel_basis(0.0);
        assert_eq!(b0.vectors[(0b010, 0)], c(-1.0));
        assert_eq!(b0.vectors[(0b000, 0)], ZERO);
        // λ = 0 and λ = 1 are rank-deficient points of the injectivity map
        for lam in [-1.0, -0.7, -0.3, 0.2, 0.5, 0.9] {
            let map = block_tensor(&ghz_tensor(lam), 3).unwrap();
            let cf = ghz_kernel_basis(lam);
            check_basis(&cf, &map);
            assert!(projector_distance(&cf, &kernel_basis_svd(&map, 1e-10, lam)) < 1e-10);
        }
    }

    #[test]
    fn s_from_generator_examples() {
        let s = s_from_generator(&linalg::zeros(5, 5), None).unwrap();
        assert!(linalg::max_abs_diff(&s.s, &linalg::scale(&linalg::identity(5), c(0.2))) < 1e-15);
        let s = s_from_generator(&linalg::diag(&[0.0, 2f64.ln()]), None).unwrap();
        assert!(linalg::max_abs_diff(&s.s, &linalg::diag(&[2.0 / 3.0, 1.0 / 3.0])) < 1e-15);
        let mut bad = linalg::zeros(2, 2);
        bad[(0, 1)] = c(1.0);
        assert!(matches!(s_from_generator(&bad, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn from_s_round_trip() {
        let s = linalg::diag(&[0.5, 0.3, 0.2]);
        let sm = SMatrix::from_s(&s).unwrap();
        let back = s_from_generator(&sm.generator, None).unwrap();
        assert!(linalg::max_abs_diff(&back.s, &s) < 1e-14);
        assert!(SMatrix::from_s(&linalg::diag(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn aklt_kernel_projector_is_spin2_projector() {
        let p = aklt_kernel_basis(1.0).projector();
        assert!(linalg::max_abs_diff(&p, &aklt_standard_local_term()) < 1e-14);
    }

    #[test]
    fn ghz_uniform_term_matches_pauli_form() {
        for lam in [-1.0, -0.4, 0.0, 0.3, 1.0] {
            let b = ghz_kernel_basis(lam);
            let h = b.local_term(&linalg::scale(&linalg::identity(4), c(0.25)));
            assert!(linalg::max_abs_diff(&h, &ghz_closed_form_local_term(lam)) < 1e-12);
        }
    }

    #[test]
    fn assembly_is_hermitian_and_annihilates_mps() {
        let lam = 0.6;
        let basis = aklt_kernel_basis(lam);
        let mut s = linalg::diag(&[0.3, 0.1, 0.25, 0.15, 0.2]);
        s[(0, 2)] = C64::new(0.02, 0.01);
        s[(2, 0)] = C64::new(0.02, -0.01);
        let h = assemble(&basis, &s, 5, None).unwrap();
        let dense = h.to_dense();
        assert_eq!(linalg::hermiticity_defect(&dense), 0.0);
        let psi = contract_to_statevector(&make_mps(&aklt_tensor(lam), 5).unwrap()).unwrap();
        let hp = h.mul_vec(&psi);
        assert!(linalg::norm(&hp) < 1e-12 * linalg::norm(&psi));
    }

    #[test]
    fn assembly_matches_kron_oracle() {
        // N=4 spin-1 chain, local term on (i, i+1): dense Kronecker construction
        let h2 = aklt_standard_local_term();
        let geom = ChainGeometry::new(3, 4, 2).unwrap();
        let h = geom.assemble_local_dense(&h2).unwrap();
        let id3 = linalg::identity(3);
        let mut want = linalg::zeros(81, 81);
        for i in 0..3 {
            let left = linalg::identity(3usize.pow(i as u32));
            let right = linalg::identity(3usize.pow((2 - i) as u32));
            want = linalg::add(&want, &linalg::kron(&linalg::kron(&left, &h2), &right));
        }
        // wrap-around term acting on (3, 0): permute the h2 ⊗ 𝟙 ⊗ 𝟙 term cyclically
        let wrap = linalg::kron(&linalg::kron(&h2, &id3), &id3);
        // the term on sites (3,0) in state r equals wrap acting on the rotated digits (d3,d0,d1,d2)
        let rot = |r: usize| -> usize {
            let d: Vec<usize> = (0..4).map(|k| (r / 3usize.pow(3 - k)) % 3).collect();
            ((d[3] * 3 + d[0]) * 3 + d[1]) * 3 + d[2]
        };
        for r in 0..81 {
            for cc in 0..81 {
                want[(r, cc)] += wrap[(rot(r), rot(cc))];
            }
        }
        assert!(linalg::max_abs_diff(&h, &want) < 1e-14);
    }

    #[test]
    fn zero_kernel_gives_zero_operator() {
        let b = KernelBasis {
            block_len: 2,
            phys_dim: 2,
            vectors: linalg::zeros(4, 0),
            lambda_tag: 0.0,
            convention: BasisConvention::Svd,
        };
        let h = assemble(&b, &linalg::zeros(0, 0), 4, None).unwrap();
        assert_eq!((h.dim, h.nnz()), (16, 0));
    }

    #[test]
    fn assemble_guards() {
        let b = ghz_kernel_basis(0.2);
        let s = linalg::scale(&linalg::identity(4), c(0.25));
        assert!(matches!(assemble(&b, &s, 20, None), Err(Error::TooLarge(_))));
        assert!(matches!(assemble(&b, &s, 3, None), Err(Error::InvalidSize(_))));
        assert!(matches!(assemble(&b, &linalg::identity(3), 6, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn singlet_circuit() {
        let u = singlet_preparation_unitary();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let col: Vec<C64> = (0..4).map(|i| u[(i, 0)]).collect();
        let want = [0.0, s, -s, 0.0];
        for i in 0..4 {
            assert!((col[i] - c(want[i])).norm() < 1e-15);
        }
        let g = &linalg::adjoint(&u) * &u;
        assert!(linalg::max_abs_diff(&g, &linalg::identity(4)) < 1e-15);
    }

    #[test]
    fn random_canonical_term_lies_in_family() {
        let fam = RandomMpsFamily::from_seed(4, 0.3);
        for lam in [0.0, 0.5, 1.0] {
            let map = block_tensor(&random_family_tensor(&fam, lam), 2).unwrap();
            let basis = kernel_basis_svd(&map, 1e-10, lam);
            let h = random_canonical_local_term(&fam, lam);
            assert!((linalg::trace(&h).re - 1.0).abs() < 1e-12);
            // annihilates the image of the two-block map
            assert!(linalg::max_abs(&(&h * &map.matrix)) < 1e-10);
            let s = s_of_local_term(&basis, &h);
            assert!(linalg::max_abs_diff(&basis.local_term(&s), &h) < 1e-10);
            assert!(linalg::herm_eigenvalues(&s)[0] > 0.0);
        }
    }
}
