//! MPS tensors, periodic chains, blocking and the injectivity map, plus the
//! three interpolation families (AKLT, GHZ/cluster, random injective).
//!
//! Index conventions used throughout the crate:
//! * a physical multi-index `σ_0 σ_1 … σ_{n-1}` is flattened big-endian, so site 0
//!   is the most significant digit;
//! * a virtual pair `(α, β)` is flattened row-major, `α·D + β`;
//! * AKLT physical order is `(+1, 0, -1)`; spin-½ order is `(↑, ↓) = (0, 1)`.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, ZERO};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Largest physical dimension `d^N` that is ever materialized as a dense vector.
pub const MAX_STATE_DIM: usize = 1 << 20;

/// One MPS tensor `A^σ_{αβ}` with square bond dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    phys_dim: usize,
    bond_dim: usize,
    entries: Vec<C64>,
}

impl SiteTensor {
    /// Builds a tensor from entries ordered `(σ, α, β)`.
    pub fn new(phys_dim: usize, bond_dim: usize, entries: Vec<C64>) -> Result<Self> {
        if phys_dim < 2 || bond_dim < 1 {
            return Err(Error::InvalidSize(format!(
                "need d >= 2 and D >= 1, got d={phys_dim}, D={bond_dim}"
            )));
        }
        if entries.len() != phys_dim * bond_dim * bond_dim {
            return Err(Error::InvalidSize(format!(
                "expected {} entries, got {}",
                phys_dim * bond_dim * bond_dim,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("tensor has non-finite entries".into()));
        }
        Ok(Self { phys_dim, bond_dim, entries })
    }

    /// Builds a tensor from one `D×D` matrix per physical index.
    pub fn from_matrices(mats: &[CMat]) -> Result<Self> {
        let d = mats.len();
        let bond = mats.first().map(|m| m.nrows()).unwrap_or(0);
        let mut entries = Vec::with_capacity(d * bond * bond);
        for m in mats {
            if m.nrows() != bond || m.ncols() != bond {
                return Err(Error::InvalidSize("matrices must all be D×D".into()));
            }
            for a in 0..bond {
                for b in 0..bond {
                    entries.push(m[(a, b)]);
                }
            }
        }
        Self::new(d, bond, entries)
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, sigma: usize, alpha: usize, beta: usize) -> C64 {
        let dd = self.bond_dim;
        self.entries[sigma * dd * dd + alpha * dd + beta]
    }

    /// The matrix `A^σ`.
    pub fn matrix(&self, sigma: usize) -> CMat {
        CMat::from_fn(self.bond_dim, self.bond_dim, |a, b| self.get(sigma, a, b))
    }

    pub fn matrices(&self) -> Vec<CMat> {
        (0..self.phys_dim).map(|s| self.matrix(s)).collect()
    }
}

/// A periodic chain of site tensors.
#[derive(Clone, Debug)]
pub struct Mps {
    sites: Vec<SiteTensor>,
    translation_invariant: bool,
}

impl Mps {
    pub fn new(sites: Vec<SiteTensor>) -> Result<Self> {
        if sites.len() < 2 {
            return Err(Error::InvalidSize(format!("need at least 2 sites, got {}", sites.len())));
        }
        let n = sites.len();
        for i in 0..n {
            if sites[i].bond_dim != sites[(i + 1) % n].bond_dim {
                return Err(Error::InvalidSize(format!("bond mismatch between sites {i} and {}", (i + 1) % n)));
            }
        }
        let translation_invariant = sites.iter().all(|s| *s == sites[0]);
        Ok(Self { sites, translation_invariant })
    }

    pub fn sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn translation_invariant(&self) -> bool {
        self.translation_invariant
    }
}

/// Translation-invariant periodic MPS with `n_sites` copies of `tensor`.
pub fn make_mps(tensor: &SiteTensor, n_sites: usize) -> Result<Mps> {
    if n_sites < 2 {
        return Err(Error::InvalidSize(format!("n_sites must be >= 2, got {n_sites}")));
    }
    Mps::new(vec![tensor.clone(); n_sites])
}

/// Checked `base^exp`, failing when the result exceeds `limit`.
pub fn checked_dim(base: usize, exp: usize, limit: usize) -> Result<usize> {
    let mut v: usize = 1;
    for _ in 0..exp {
        v = v
            .checked_mul(base)
            .filter(|&x| x <= limit)
            .ok_or_else(|| Error::TooLarge(format!("{base}^{exp} exceeds the limit {limit}")))?;
    }
    Ok(v)
}

/// Amplitudes `tr(A^{σ_0} … A^{σ_{N-1}})` for every physical configuration (unnormalized).
pub fn contract_to_statevector(mps: &Mps) -> Result<Vec<C64>> {
    let n = mps.n_sites();
    let d = mps.sites[0].phys_dim;
    if mps.sites.iter().any(|s| s.phys_dim != d) {
        return Err(Error::InvalidInput("mixed physical dimensions are not supported".into()));
    }
    let dim = checked_dim(d, n, MAX_STATE_DIM)?;
    let mats: Vec<Vec<CMat>> = mps.sites.iter().map(|s| s.matrices()).collect();
    let bond = mps.sites[0].bond_dim;
    let mut out = vec![ZERO; dim];
    // depth-first over configurations, keeping prefix products
    let mut prefix: Vec<CMat> = vec![linalg::identity(bond)];
    let mut digits = vec![0usize; n];
    fn rec(
        site: usize,
        n: usize,
        d: usize,
        index: usize,
        mats: &[Vec<CMat>],
        prefix: &mut Vec<CMat>,
        digits: &mut [usize],
        out: &mut [C64],
    ) {
        if site == n {
            out[index] = linalg::trace(prefix.last().unwrap());
            return;
        }
        for s in 0..d {
            digits[site] = s;
            let p = prefix.last().unwrap() * &mats[site][s];
            prefix.push(p);
            rec(site + 1, n, d, index * d + s, mats, prefix, digits, out);
            prefix.pop();
        }
    }
    rec(0, n, d, 0, &mats, &mut prefix, &mut digits, &mut out);
    Ok(out)
}

/// The map from virtual boundary pairs `(α, β)` to physical block configurations.
#[derive(Clone, Debug)]
pub struct InjectivityMap {
    pub block_len: usize,
    pub phys_dim: usize,
    pub bond_dim: usize,
    /// `d^L × D²`; entry `[(σ_1…σ_L), (α,β)] = (A^{σ_1}…A^{σ_L})_{αβ}`.
    pub matrix: CMat,
}

/// Blocks `L` copies of `tensor` into the injectivity map.
pub fn block_tensor(tensor: &SiteTensor, block_len: usize) -> Result<InjectivityMap> {
    if block_len < 1 {
        return Err(Error::InvalidSize("block length must be >= 1".into()));
    }
    let d = tensor.phys_dim;
    let bond = tensor.bond_dim;
    let rows = checked_dim(d, block_len, MAX_STATE_DIM)?;
    let mats = tensor.matrices();
    let mut products: Vec<CMat> = vec![linalg::identity(bond)];
    for _ in 0..block_len {
        let mut next = Vec::with_capacity(products.len() * d);
        for p in &products {
            for m in &mats {
                next.push(p * m);
            }
        }
        products = next;
    }
    let matrix = CMat::from_fn(rows, bond * bond, |r, col| products[r][(col / bond, col % bond)]);
    Ok(InjectivityMap { block_len, phys_dim: d, bond_dim: bond, matrix })
}

/// True iff the numerical rank of the map (relative tolerance `tol`) equals `D²`.
pub fn is_injective(map: &InjectivityMap, tol: f64) -> bool {
    let dd = map.bond_dim * map.bond_dim;
    map.matrix.nrows() >= dd && linalg::rank(&map.matrix, tol) == dd
}

/// AKLT interpolation tensor, physical order `(+1, 0, -1)`:
/// `A^{+1} = [[0,-λ],[0,0]]`, `A^0 = diag(1,-λ)/√2`, `A^{-1} = [[0,0],[λ,0]]`.
pub fn aklt_tensor(lambda: f64) -> SiteTensor {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let ap = linalg::from_real(&[&[0.0, -lambda], &[0.0, 0.0]]);
    let a0 = linalg::from_real(&[&[r, 0.0], &[0.0, -lambda * r]]);
    let am = linalg::from_real(&[&[0.0, 0.0], &[lambda, 0.0]]);
    SiteTensor::from_matrices(&[ap, a0, am]).expect("valid AKLT tensor")
}

/// GHZ/cluster interpolation tensor `A_0 = [[0,0],[1,1]]`, `A_1 = [[1,λ],[0,0]]`.
///
/// At `λ = 0` this is the GHZ tensor. At `λ = 1` every `A_σ` has rank one and the
/// state is the product state `|+…+⟩`; at `λ = -1` it is the cluster state.
pub fn ghz_tensor(lambda: f64) -> SiteTensor {
    let a0 = linalg::from_real(&[&[0.0, 0.0], &[1.0, 1.0]]);
    let a1 = linalg::from_real(&[&[1.0, lambda], &[0.0, 0.0]]);
    SiteTensor::from_matrices(&[a0, a1]).expect("valid GHZ tensor")
}

/// Random injective MPS built from singlet pairs deformed by `𝒫 = e^{λK_1} e^{iK_2 t}`.
///
/// A blocked site holds two spin-½: the right spin `l` of one pair and the left spin
/// `r` of the next, physical index `σ = 2l + r`. `𝒫` acts on that two-spin block.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomMpsFamily {
    #[serde(with = "mat_serde")]
    pub k1: CMat,
    #[serde(with = "mat_serde")]
    pub k2: CMat,
    pub t: f64,
    pub seed: u64,
    pub pair_state_dim: usize,
}

impl RandomMpsFamily {
    /// Draws `K_1` then `K_2` from a ChaCha8 stream seeded with `seed`: complex
    /// Ginibre `G`, Hermitized as `(G + G†)/2`, scaled to unit spectral radius.
    pub fn from_seed(seed: u64, t: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        let k1 = random_hermitian(&mut rng, d);
        let k2 = random_hermitian(&mut rng, d);
        Self { k1, k2, t, seed, pair_state_dim: d }
    }

    /// `𝒫(λ) = e^{λK_1} e^{iK_2 t}`.
    pub fn deformation(&self, lambda: f64) -> CMat {
        let q = linalg::expm_herm(&linalg::scale(&self.k1, c(lambda)));
        let w = linalg::expm_i_herm(&self.k2, self.t);
        &q * &w
    }

    /// `𝒫(λ)^{-1} = e^{-iK_2 t} e^{-λK_1}`.
    pub fn deformation_inverse(&self, lambda: f64) -> CMat {
        let q = linalg::expm_herm(&linalg::scale(&self.k1, c(-lambda)));
        let w = linalg::expm_i_herm(&self.k2, -self.t);
        &w * &q
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut g = linalg::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            g[(i, j)] = C64::new(re * s, im * s);
        }
    }
    let h = linalg::hermitian_part(&g);
    let radius = linalg::herm_eigenvalues(&h).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    linalg::scale(&h, c(1.0 / radius))
}

/// Undeformed blocked singlet tensor `B^{(l,r)}_{αβ} = ε_{α l} δ_{rβ} / √2`.
pub fn singlet_block_tensor() -> SiteTensor {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let eps = [[0.0, 1.0], [-1.0, 0.0]];
    let mut entries = vec![ZERO; 4 * 4];
    for l in 0..2 {
        for r in 0..2 {
            let sigma = 2 * l + r;
            for a in 0..2 {
                entries[sigma * 4 + a * 2 + r] = c(eps[a][l] * s);
            }
        }
    }
    SiteTensor::new(4, 2, entries).expect("valid singlet tensor")
}

/// Blocked `d = 4, D = 2` tensor of the random family at `λ`.
pub fn random_family_tensor(family: &RandomMpsFamily, lambda: f64) -> SiteTensor {
    let p = family.deformation(lambda);
    let b = singlet_block_tensor();
    let mut entries = vec![ZERO; 16];
    for s in 0..4 {
        for sp in 0..4 {
            let w = p[(s, sp)];
            for k in 0..4 {
                entries[s * 4 + k] += w * b.entries[sp * 4 + k];
            }
        }
    }
    SiteTensor::new(4, 2, entries).expect("valid random tensor")
}

pub(crate) mod mat_serde {
    use crate::linalg::{CMat, C64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    /// Row-major `[[ [re, im], … ], …]`.
    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let r = rows.len();
        let cols = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|x| x.len() != cols) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(CMat::from_fn(r, cols, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }
}
