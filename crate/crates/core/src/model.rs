//! The three interpolation families and their model-level conventions.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};
use crate::parent::{self, KernelBasis};
use crate::symmetry::SectorSpec;
use crate::tensor::{self, RandomMpsFamily, SiteTensor};
use serde::{Deserialize, Serialize};

/// Relative singular-value tolerance used for SVD kernel bases.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Aklt,
    Ghz,
    Random,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Aklt => "aklt",
            Model::Ghz => "ghz",
            Model::Random => "random",
        }
    }

    /// Local dimension of one site of the chain the Hamiltonian acts on.
    pub fn phys_dim(self) -> usize {
        match self {
            Model::Aklt => 3,
            Model::Ghz => 2,
            Model::Random => 4,
        }
    }

    /// Number of chain sites in one local term.
    pub fn block_len(self) -> usize {
        match self {
            Model::Aklt => 2,
            Model::Ghz => 3,
            Model::Random => 2,
        }
    }

    /// Chain length for `n_sites` physical sites. The random family pairs two
    /// spin-½ into one `d = 4` site, so `n_sites` must be even there.
    pub fn chain_sites(self, n_sites: usize) -> Result<usize> {
        match self {
            Model::Random => {
                if n_sites % 2 != 0 {
                    return Err(Error::InvalidSize(format!(
                        "random model needs an even number of spins, got {n_sites}"
                    )));
                }
                Ok(n_sites / 2)
            }
            _ => Ok(n_sites),
        }
    }

    /// Allowed interpolation interval.
    pub fn lambda_range(self) -> (f64, f64) {
        match self {
            Model::Aklt => (0.0, 1.0),
            Model::Ghz => (-1.0, 1.0),
            Model::Random => (0.0, f64::INFINITY),
        }
    }

    /// Symmetry sector containing the MPS ground state.
    pub fn ground_sector(self) -> SectorSpec {
        match self {
            Model::Aklt => SectorSpec { momentum: Some(0), sz_total: Some(0), q_eigen: Some(1), ..Default::default() },
            Model::Ghz => SectorSpec { momentum: Some(0), parity: Some(1), reversal: Some(1), ..Default::default() },
            Model::Random => SectorSpec { momentum: Some(0), ..Default::default() },
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aklt" => Ok(Model::Aklt),
            "ghz" => Ok(Model::Ghz),
            "random" => Ok(Model::Random),
            other => Err(Error::InvalidInput(format!("unknown model `{other}`"))),
        }
    }
}

/// A model together with the data needed to evaluate it at any `λ`.
#[derive(Clone, Debug)]
pub struct Family {
    pub model: Model,
    pub random: Option<RandomMpsFamily>,
}

impl Family {
    pub fn aklt() -> Self {
        Self { model: Model::Aklt, random: None }
    }

    pub fn ghz() -> Self {
        Self { model: Model::Ghz, random: None }
    }

    pub fn random(seed: u64, t: f64) -> Self {
        Self { model: Model::Random, random: Some(RandomMpsFamily::from_seed(seed, t)) }
    }

    pub fn new(model: Model, seed: u64, t: f64) -> Self {
        match model {
            Model::Aklt => Self::aklt(),
            Model::Ghz => Self::ghz(),
            Model::Random => Self::random(seed, t),
        }
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        let (lo, hi) = self.model.lambda_range();
        if !(lambda >= lo - 1e-12 && lambda <= hi + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "λ = {lambda} outside [{lo}, {hi}] for model {}",
                self.model.name()
            )));
        }
        Ok(())
    }

    pub fn tensor(&self, lambda: f64) -> Result<SiteTensor> {
        self.check_lambda(lambda)?;
        Ok(match self.model {
            Model::Aklt => tensor::aklt_tensor(lambda),
            Model::Ghz => tensor::ghz_tensor(lambda),
            Model::Random => tensor::random_family_tensor(self.random.as_ref().expect("random family data"), lambda),
        })
    }

    /// Kernel basis: closed form for AKLT and GHZ, SVD for the random family.
    pub fn basis(&self, lambda: f64) -> Result<KernelBasis> {
        self.check_lambda(lambda)?;
        Ok(match self.model {
            Model::Aklt => parent::aklt_kernel_basis(lambda),
            Model::Ghz => parent::ghz_kernel_basis(lambda),
            Model::Random => {
                let map = tensor::block_tensor(&self.tensor(lambda)?, 2)?;
                parent::kernel_basis_svd(&map, KERNEL_TOL, lambda)
            }
        })
    }

    /// Canonical `S`: `𝟙/M` for AKLT and GHZ; for the random family the
    /// unit-trace canonical two-block term written in the given basis.
    pub fn canonical_s(&self, lambda: f64, basis: &KernelBasis) -> CMat {
        match self.model {
            Model::Aklt | Model::Ghz => {
                let m = basis.m();
                linalg::scale(&linalg::identity(m), c(1.0 / m as f64))
            }
            Model::Random => {
                let h = parent::random_canonical_local_term(self.random.as_ref().unwrap(), lambda);
                parent::s_of_local_term(basis, &h)
            }
        }
    }

    /// Normalized MPS on `n_sites` physical sites, as a vector on the chain Hilbert space.
    pub fn ground_state(&self, lambda: f64, n_sites: usize) -> Result<Vec<C64>> {
        let n = self.model.chain_sites(n_sites)?;
        let mps = tensor::make_mps(&self.tensor(lambda)?, n)?;
        let mut v = tensor::contract_to_statevector(&mps)?;
        if linalg::normalize(&mut v) == 0.0 {
            return Err(Error::InvalidInput("MPS contracts to the zero vector".into()));
        }
        Ok(v)
    }
}
