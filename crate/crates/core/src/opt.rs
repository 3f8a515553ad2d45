//! Gap maximization over the parent-Hamiltonian family at fixed `λ`.
//!
//! Two parametrizations are supported. Without a template the free parameters are
//! the real coordinates of a Hermitian generator `B` with `S = e^{-B}/tr e^{-B}`, so
//! every parameter vector is feasible. With a template the parameters are the affine
//! template coordinates and a log-barrier on `λ_min(S)` keeps iterates inside the cone.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};
use crate::model::Family;
use crate::parent::{assemble, s_from_generator, KernelBasis};
use crate::spectra::{self, chi_matrix, ChiMatrix, EigenSettings, GapResult};
use crate::symmetry::{STemplate, SectorMap};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const BARRIER_WEIGHT: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct ObjectiveOptions {
    pub eigen: EigenSettings,
    /// Fixed degeneracy tolerance; `None` uses `1e-8 · max(1, ‖H‖_est)`.
    pub deg_tol: Option<f64>,
    /// Log-barrier weight for template parametrizations.
    pub barrier: f64,
    /// Largest number of stored complex entries for precomputed dense components.
    pub component_budget: usize,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        Self { eigen: EigenSettings::default(), deg_tol: None, barrier: BARRIER_WEIGHT, component_budget: 1 << 22 }
    }
}

/// How the working-space Hamiltonian is produced for a given `S`.
#[derive(Clone, Debug)]
enum Workspace {
    /// `H = C_0 + Σ_k x_k C_k` with dense components; `x` are template parameters or
    /// Hermitian coordinates of `S`.
    Affine { c0: CMat, ck: Vec<CMat> },
    /// Sparse assembly (and sector projection) for every evaluation.
    Assemble,
}

/// `Δ(Φ(λ), S)` restricted to an optional sector, with an optional template.
#[derive(Clone, Debug)]
pub struct Objective {
    pub family: Family,
    pub lambda: f64,
    /// Physical sites.
    pub n_sites: usize,
    pub n_chain: usize,
    pub basis: KernelBasis,
    pub sector: Option<Arc<SectorMap>>,
    pub template: Option<STemplate>,
    pub options: ObjectiveOptions,
    workspace: Workspace,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub s: CMat,
    pub gap: GapResult,
    pub min_eig_s: f64,
}

/// Objective value and gradient at a parameter vector.
#[derive(Clone, Debug)]
pub struct Point {
    pub params: Vec<f64>,
    pub s: CMat,
    pub gap: f64,
    /// `gap + barrier`.
    pub value: f64,
    pub gradient: Vec<f64>,
    pub eval: Evaluation,
}

impl Point {
    pub fn grad_norm(&self) -> f64 {
        self.gradient.iter().fold(0.0, |a, &g| a.max(g.abs()))
    }
}

impl Objective {
    pub fn new(
        family: &Family,
        lambda: f64,
        n_sites: usize,
        sector: Option<Arc<SectorMap>>,
        template: Option<STemplate>,
        options: ObjectiveOptions,
    ) -> Result<Self> {
        let basis = family.basis(lambda)?;
        Self::with_basis(family, lambda, n_sites, basis, sector, template, options)
    }

    pub fn with_basis(
        family: &Family,
        lambda: f64,
        n_sites: usize,
        basis: KernelBasis,
        sector: Option<Arc<SectorMap>>,
        template: Option<STemplate>,
        options: ObjectiveOptions,
    ) -> Result<Self> {
        let n_chain = family.model.chain_sites(n_sites)?;
        if let Some(w) = &sector {
            if w.model != family.model || w.n_chain != n_chain {
                return Err(Error::InvalidInput("sector was built for a different chain".into()));
            }
        }
        if let Some(t) = &template {
            if t.m() != basis.m() {
                return Err(Error::InvalidInput(format!("template has M={}, basis has M={}", t.m(), basis.m())));
            }
        }
        let full_dim = crate::tensor::checked_dim(basis.phys_dim, n_chain, crate::parent::MAX_HAMILTONIAN_DIM - 1)?;
        let dim = sector.as_ref().map_or(full_dim, |w| w.d_g);
        let mut obj = Self {
            family: family.clone(),
            lambda,
            n_sites,
            n_chain,
            basis,
            sector,
            template,
            options,
            workspace: Workspace::Assemble,
        };
        if dim <= obj.options.eigen.dense_threshold {
            let mats: Option<(CMat, Vec<CMat>)> = match &obj.template {
                Some(t) => Some((t.offset.clone(), t.directions.clone())),
                None => {
                    let m = obj.basis.m();
                    if m * m * dim * dim <= obj.options.component_budget {
                        Some((linalg::zeros(m, m), linalg::herm_basis(m)))
                    } else {
                        None
                    }
                }
            };
            if let Some((k0, ks)) = mats {
                let c0 = obj.working_dense(&k0)?;
                let ck = ks.iter().map(|k| obj.working_dense(k)).collect::<Result<Vec<_>>>()?;
                obj.workspace = Workspace::Affine { c0, ck };
            }
        }
        Ok(obj)
    }

    /// Working-space operator `H(K)` for an arbitrary Hermitian `K`, dense.
    fn working_dense(&self, k: &CMat) -> Result<CMat> {
        Ok(assemble(&self.basis, k, self.n_chain, self.sector.as_deref())?.to_dense())
    }

    pub fn working_dim(&self) -> usize {
        match &self.sector {
            Some(w) => w.d_g,
            None => self.basis.phys_dim.pow(self.n_chain as u32),
        }
    }

    pub fn uses_components(&self) -> bool {
        matches!(self.workspace, Workspace::Affine { .. })
    }

    pub fn n_params(&self) -> usize {
        match &self.template {
            Some(t) => t.n_params(),
            None => self.basis.m() * self.basis.m(),
        }
    }

    /// `S` at a parameter vector (template embedding or normalized `e^{-B}`).
    pub fn s_of(&self, params: &[f64]) -> Result<CMat> {
        if params.len() != self.n_params() {
            return Err(Error::InvalidInput(format!("expected {} parameters, got {}", self.n_params(), params.len())));
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        match &self.template {
            Some(t) => t.embed(params),
            None => Ok(s_from_generator(&linalg::herm_from_coords(params, self.basis.m()), None)?.s),
        }
    }

    /// Parameters representing a given positive-definite `S`.
    pub fn params_of_s(&self, s: &CMat) -> Result<Vec<f64>> {
        match &self.template {
            Some(t) => Ok(t.params_of(s)),
            None => Ok(linalg::herm_coords(&crate::parent::SMatrix::from_s(s)?.generator)),
        }
    }

    /// Canonical starting parameters.
    pub fn canonical_params(&self) -> Result<Vec<f64>> {
        match &self.template {
            Some(t) => Ok(t.canonical.clone()),
            None => self.params_of_s(&self.canonical_s()),
        }
    }

    pub fn canonical_s(&self) -> CMat {
        self.family.canonical_s(self.lambda, &self.basis)
    }

    pub fn feasible(&self, params: &[f64]) -> bool {
        match self.s_of(params) {
            Ok(s) => self.template.is_none() || linalg::herm_eigenvalues(&s)[0] > 0.0,
            Err(_) => false,
        }
    }

    fn coords(&self, params: &[f64], s: &CMat) -> Vec<f64> {
        match &self.template {
            Some(_) => params.to_vec(),
            None => linalg::herm_coords(s),
        }
    }

    fn deg_tol(&self, h_dense: Option<&CMat>, h_sparse: Option<&crate::parent::SparseHamiltonian>) -> f64 {
        if let Some(t) = self.options.deg_tol {
            return t;
        }
        match (h_dense, h_sparse) {
            (Some(h), _) => spectra::default_deg_tol_dense(h),
            (_, Some(h)) => spectra::default_deg_tol(h),
            _ => 1e-8,
        }
    }

    /// Working-space Hamiltonian, dense when components are available.
    pub fn hamiltonian_dense(&self, s: &CMat, coords: &[f64]) -> Result<CMat> {
        match &self.workspace {
            Workspace::Affine { c0, ck } => {
                let mut h = c0.clone();
                for (x, m) in coords.iter().zip(ck) {
                    if *x != 0.0 {
                        h += linalg::scale(m, c(*x));
                    }
                }
                Ok(h)
            }
            Workspace::Assemble => self.working_dense(s),
        }
    }

    fn evaluate_inner(&self, s: &CMat, coords: &[f64]) -> Result<Evaluation> {
        let gap = match &self.workspace {
            Workspace::Affine { .. } => {
                let h = self.hamiltonian_dense(s, coords)?;
                spectra::spectral_gap_dense(&h, self.deg_tol(Some(&h), None))?
            }
            Workspace::Assemble => {
                let h = assemble(&self.basis, s, self.n_chain, self.sector.as_deref())?;
                spectra::spectral_gap_with(&h, self.deg_tol(None, Some(&h)), &self.options.eigen)?
            }
        };
        let min_eig_s = linalg::herm_eigenvalues(s).first().copied().unwrap_or(0.0);
        Ok(Evaluation { s: s.clone(), gap, min_eig_s })
    }

    /// Gap and eigenvectors at an explicit `S` (which must lie in the template if one is set).
    pub fn evaluate_s(&self, s: &CMat) -> Result<Evaluation> {
        let coords = match &self.template {
            Some(t) => t.params_of(s),
            None => linalg::herm_coords(s),
        };
        self.evaluate_inner(s, &coords)
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        let s = self.s_of(params)?;
        let coords = self.coords(params, &s);
        self.evaluate_inner(&s, &coords)
    }

    /// Gap only, via eigenvalues (no eigenvectors); for grid scans.
    pub fn gap_value(&self, params: &[f64]) -> Result<f64> {
        let s = self.s_of(params)?;
        match &self.workspace {
            Workspace::Affine { .. } => {
                let h = self.hamiltonian_dense(&s, &self.coords(params, &s))?;
                let tol = self.deg_tol(Some(&h), None);
                let ev = linalg::herm_eigenvalues(&h);
                Ok(if ev[1] - ev[0] <= tol { 0.0 } else { ev[1] - ev[0] })
            }
            Workspace::Assemble => Ok(self.evaluate(params)?.gap.gap),
        }
    }

    /// χ of the evaluation's excited state, by lifting and summing kernel overlaps.
    pub fn chi(&self, eval: &Evaluation) -> Result<ChiMatrix> {
        let mut chi = chi_matrix(&eval.gap.excited, &self.basis, self.n_chain, self.sector.as_deref())?;
        chi.excited_energy = eval.gap.e1;
        Ok(chi)
    }

    /// `∂Δ/∂x_k` for the affine coordinates (template parameters or Hermitian
    /// coordinates of `S`), by Hellmann-Feynman on the components when available.
    fn coord_gradient(&self, eval: &Evaluation) -> Result<Vec<f64>> {
        let psi = &eval.gap.excited;
        match &self.workspace {
            Workspace::Affine { ck, .. } => Ok(ck.iter().map(|m| linalg::expectation(m, psi).re).collect()),
            Workspace::Assemble => {
                let chi = self.chi(eval)?;
                let ks = match &self.template {
                    Some(t) => t.directions.clone(),
                    None => linalg::herm_basis(self.basis.m()),
                };
                Ok(ks.iter().map(|k| linalg::pair(k, &chi.entries).re).collect())
            }
        }
    }

    /// χ recovered from Hermitian-coordinate derivatives.
    fn chi_from_coords(g: &[f64], m: usize) -> CMat {
        let mut chi = linalg::zeros(m, m);
        for i in 0..m {
            chi[(i, i)] = c(g[i]);
        }
        let mut k = m;
        for i in 0..m {
            for j in i + 1..m {
                let z = C64::new(g[k] / 2.0, -g[k + 1] / 2.0);
                chi[(i, j)] = z;
                chi[(j, i)] = z.conj();
                k += 2;
            }
        }
        chi
    }

    /// Value and gradient at `params`.
    pub fn point(&self, params: &[f64]) -> Result<Point> {
        let s = self.s_of(params)?;
        let coords = self.coords(params, &s);
        let eval = self.evaluate_inner(&s, &coords)?;
        let gap = eval.gap.gap;
        let cg = self.coord_gradient(&eval)?;
        let (value, gradient) = match &self.template {
            Some(t) => {
                let (vals, u) = linalg::herm_eigen(&s);
                if vals[0] <= 0.0 {
                    return Err(Error::Infeasible(format!("λ_min(S) = {:e}", vals[0])));
                }
                let mu = self.options.barrier;
                let v = linalg::column(&u, 0);
                let g = cg
                    .iter()
                    .zip(&t.directions)
                    .map(|(gj, tj)| gj + mu * linalg::expectation(tj, &v).re / vals[0])
                    .collect();
                (gap + mu * vals[0].ln(), g)
            }
            None => {
                let m = self.basis.m();
                let chi = Self::chi_from_coords(&cg, m);
                (gap, generator_gradient(&linalg::herm_from_coords(params, m), &chi))
            }
        };
        Ok(Point { params: params.to_vec(), s, gap, value, gradient, eval })
    }
}

/// `∂Δ/∂(coordinates of B)` for `Δ = tr(S χᵀ)`, `S = e^{-B}/tr e^{-B}` at fixed χ.
pub fn generator_gradient(b: &CMat, chi: &CMat) -> Vec<f64> {
    let m = b.nrows();
    let (bv, u) = linalg::herm_eigen(b);
    let bmin = bv[0];
    let e: Vec<f64> = bv.iter().map(|&x| (-(x - bmin)).exp()).collect();
    let z: f64 = e.iter().sum();
    // S and Δ at fixed χ
    let s = linalg::herm_fn(b, |x| c((-(x - bmin)).exp() / z));
    let chit = linalg::transpose(chi);
    let delta = linalg::pair(&s, chi).re;
    let xt = linalg::adjoint(&u) * &chit * &u;
    let mut k = linalg::zeros(m, m);
    for g in 0..m {
        for d in 0..m {
            let du = bv[g] - bv[d];
            let f = if du.abs() < 1e-12 { -e[d] * (1.0 - du / 2.0) } else { e[d] * (-du).exp_m1() / du };
            let mut val = xt[(d, g)] * f;
            if g == d {
                val -= c(f * delta);
            }
            k[(g, d)] = val / z;
        }
    }
    let gm = &u * linalg::transpose(&k) * linalg::adjoint(&u);
    let mut out: Vec<f64> = (0..m).map(|a| gm[(a, a)].re).collect();
    for a in 0..m {
        for b in a + 1..m {
            out.push((gm[(b, a)] + gm[(a, b)]).re);
            out.push((I * gm[(b, a)] - I * gm[(a, b)]).re);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximizeOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Cap on the Euclidean length of the initial trial step.
    pub max_step: f64,
    /// Sufficient-increase constant.
    pub armijo: f64,
    /// Curvature constant of the weak Wolfe condition.
    pub wolfe: f64,
    pub max_backtracks: usize,
    /// Stop (as non-smooth) when `stall_window` accepted steps gain less than
    /// `stall_rtol · max(1, |f|)` in total.
    pub stall_window: usize,
    pub stall_rtol: f64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-7, max_iter: 500, max_step: 0.1, armijo: 1e-4, wolfe: 0.9, max_backtracks: 50, stall_window: 30, stall_rtol: 1e-10 }
    }
}

/// Tolerances for [`certify`].
pub const CERT_TOL: f64 = 1e-5;
const SUPPORT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// Largest off-diagonal modulus of χᵀ in the eigenbasis of `S_opt`.
    pub off_diag_norm: f64,
    /// Largest `|χ_γγ − Δ_opt|` over the support of `S_opt`.
    pub eigen_spread: f64,
    /// Mean of `χ_γγ` over the support.
    pub common_eigenvalue: f64,
    pub s_rank: usize,
    pub chi_rank: usize,
    /// `None` for unconverged states.
    pub passes: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct OptState {
    pub params: Vec<f64>,
    pub s: CMat,
    pub value: f64,
    pub objective_value: f64,
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    pub iteration: usize,
    pub converged: bool,
    /// Line search failed repeatedly.
    pub non_smooth: bool,
    /// The excited level was degenerate at the final point.
    pub subgradient: bool,
    pub ground_degeneracy: usize,
    pub certificate: OptimalityReport,
    /// Objective values at accepted iterates.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS ascent on `Δ` (descent on `−Δ`) with Armijo backtracking.
pub fn maximize(obj: &Objective, init: &[f64], opts: &MaximizeOptions) -> Result<OptState> {
    if !obj.feasible(init) {
        return Err(Error::Infeasible("initial S is not positive definite".into()));
    }
    let n = init.len();
    let mut p = obj.point(init)?;
    let mut evaluations = 1;
    let mut hinv = vec![vec![0.0; n]; n];
    let reset = |h: &mut Vec<Vec<f64>>, scale: f64| {
        for (i, row) in h.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = if i == j { scale } else { 0.0 };
            }
        }
    };
    reset(&mut hinv, 1.0);
    let mut scaled = false;
    let mut trust = opts.max_step;
    let mut fails = 0;
    let mut stalled = 0;
    let mut non_smooth = false;
    let mut converged = false;
    let mut trace = vec![p.value];
    let mut iteration = 0;
    while iteration < opts.max_iter {
        if p.grad_norm() < opts.grad_tol {
            converged = true;
            break;
        }
        iteration += 1;
        let g = &p.gradient;
        let mut d: Vec<f64> = hinv.iter().map(|row| dot(row, g)).collect();
        if dot(&d, g) <= 0.0 {
            reset(&mut hinv, 1.0);
            scaled = false;
            d = g.clone();
        }
        let dn = dot(&d, &d).sqrt();
        if dn > trust {
            d.iter_mut().for_each(|x| *x *= trust / dn);
        }
        let slope = dot(g, &d);
        let accepted = line_search(obj, &p, &d, slope, opts, &mut evaluations);
        match accepted {
            Some(q) => {
                let s: Vec<f64> = q.params.iter().zip(&p.params).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = p.gradient.iter().zip(&q.gradient).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                    if !scaled {
                        reset(&mut hinv, sy / dot(&y, &y));
                        scaled = true;
                    }
                    bfgs_update(&mut hinv, &s, &y, sy);
                }
                stalled = if q.value > p.value { 0 } else { stalled + 1 };
                p = q;
                trace.push(p.value);
                fails = 0;
                let w = opts.stall_window;
                let creeping = w > 0
                    && trace.len() > w
                    && trace[trace.len() - 1] - trace[trace.len() - 1 - w] < opts.stall_rtol * p.value.abs().max(1.0);
                if stalled >= 10 || creeping {
                    non_smooth = true;
                    break;
                }
            }
            None => {
                fails += 1;
                reset(&mut hinv, 1.0);
                scaled = false;
                if fails == 2 {
                    trust *= 0.5;
                } else if fails >= 3 {
                    non_smooth = true;
                    break;
                }
            }
        }
    }
    if !converged && !p.eval.gap.excited_degenerate && obj.template.is_some() {
        // barrier-dominated directions are flat in value to rounding; finish on the gradient
        let (q, used) = newton_polish(obj, p, opts);
        p = q;
        evaluations += used;
        if p.grad_norm() < opts.grad_tol {
            non_smooth = false;
        }
    }
    if !converged && p.grad_norm() < opts.grad_tol {
        converged = true;
    }
    let chi = obj.chi(&p.eval)?;
    let mut state = OptState {
        params: p.params.clone(),
        s: p.s.clone(),
        value: p.gap,
        objective_value: p.value,
        gradient: p.gradient.clone(),
        grad_norm: p.grad_norm(),
        iteration,
        converged,
        non_smooth,
        subgradient: p.eval.gap.excited_degenerate,
        ground_degeneracy: p.eval.gap.ground_degeneracy,
        certificate: OptimalityReport {
            off_diag_norm: f64::NAN,
            eigen_spread: f64::NAN,
            common_eigenvalue: f64::NAN,
            s_rank: 0,
            chi_rank: 0,
            passes: None,
        },
        trace,
        evaluations,
    };
    state.certificate = certify(&state, &chi);
    Ok(state)
}

/// Largest step along `dir` that keeps `S` well inside the cone (template case).
fn feasible_step(obj: &Objective, params: &[f64], j: usize, h: f64) -> f64 {
    let Some(t) = &obj.template else { return h };
    let s = match obj.s_of(params) {
        Ok(s) => s,
        Err(_) => return h,
    };
    let lmin = linalg::herm_eigenvalues(&s)[0];
    let scale = linalg::herm_eigenvalues(&t.directions[j]).iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        h
    } else {
        h.min(0.01 * lmin / scale)
    }
}

/// Hessian of the (barrier-augmented) objective by central differences of the
/// analytic gradient, symmetrized. Steps shrink near the cone boundary.
pub fn fd_hessian(obj: &Objective, params: &[f64], h_p: f64) -> Result<Vec<Vec<f64>>> {
    let n = params.len();
    let mut hess = vec![vec![0.0; n]; n];
    for j in 0..n {
        let h = feasible_step(obj, params, j, h_p);
        let mut a = params.to_vec();
        let mut b = params.to_vec();
        a[j] += h;
        b[j] -= h;
        let ga = obj.point(&a)?.gradient;
        let gb = obj.point(&b)?.gradient;
        for i in 0..n {
            hess[i][j] = (ga[i] - gb[i]) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = m;
            hess[j][i] = m;
        }
    }
    Ok(hess)
}

/// Solves `A x = b` for a small dense real system; `None` if singular.
pub fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[i][j]);
    let rhs = faer::Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let lu = m.full_piv_lu();
    let x = faer::linalg::solvers::Solve::solve(&lu, &rhs);
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Newton iterations on the gradient with finite-difference Hessians; a step is
/// kept when it reduces `‖g‖_∞` without lowering the objective beyond rounding.
fn newton_polish(obj: &Objective, mut p: Point, opts: &MaximizeOptions) -> (Point, usize) {
    let n = p.params.len();
    let mut used = 0;
    if n > 8 {
        return (p, used);
    }
    for _ in 0..20 {
        if p.grad_norm() < opts.grad_tol {
            break;
        }
        let Ok(hess) = fd_hessian(obj, &p.params, 1e-5) else { break };
        used += 4 * n;
        let neg: Vec<f64> = p.gradient.iter().map(|g| -g).collect();
        let Some(delta) = solve_small(&hess, &neg) else { break };
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let x: Vec<f64> = p.params.iter().zip(&delta).map(|(a, b)| a + t * b).collect();
            if obj.feasible(&x) {
                if let Ok(q) = obj.point(&x) {
                    used += 1;
                    let tol = 1e-14 * p.value.abs().max(1.0);
                    if q.grad_norm() < p.grad_norm() && q.value >= p.value - tol {
                        next = Some(q);
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match next {
            Some(q) => p = q,
            None => break,
        }
    }
    (p, used)
}

/// Weak Wolfe bracketing search along an ascent direction. Steps must strictly
/// increase the objective, so a stalled search at a kink reports failure.
fn line_search(
    obj: &Objective,
    p: &Point,
    d: &[f64],
    slope: f64,
    opts: &MaximizeOptions,
    evaluations: &mut usize,
) -> Option<Point> {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut t = 1.0;
    let mut best: Option<Point> = None;
    for _ in 0..opts.max_backtracks {
        let x: Vec<f64> = p.params.iter().zip(d).map(|(a, b)| a + t * b).collect();
        let q = if obj.feasible(&x) { obj.point(&x).ok() } else { None };
        *evaluations += 1;
        match q {
            // equal values are acceptable when the gradient shrinks: near a barrier-
            // dominated optimum the value is flat to rounding while the gradient is not
            Some(q)
                if q.value >= p.value + opts.armijo * t * slope
                    && (q.value > p.value || q.grad_norm() < p.grad_norm()) =>
            {
                if dot(&q.gradient, d) > opts.wolfe * slope {
                    lo = t;
                    best = Some(q);
                } else {
                    return Some(q);
                }
            }
            _ => hi = t,
        }
        t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo.max(0.5) };
        if hi.is_finite() && hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    best
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Optimality certificate: χᵀ rotated into the eigenbasis of `S_opt` should be
/// diagonal with entries `Δ_opt` on the support of `S_opt`.
pub fn certify(opt: &OptState, chi: &ChiMatrix) -> OptimalityReport {
    let (sv, u) = linalg::herm_eigen(&opt.s);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let xt = linalg::adjoint(&u) * linalg::transpose(&chi.entries) * &u;
    let m = sv.len();
    let support: Vec<usize> = (0..m).filter(|&g| sv[g] > SUPPORT_TOL * smax).collect();
    let mut off = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            if a != b {
                off = off.max(xt[(a, b)].norm());
            }
        }
    }
    let spread = support.iter().map(|&g| (xt[(g, g)].re - opt.value).abs()).fold(0.0, f64::max);
    let common = if support.is_empty() {
        f64::NAN
    } else {
        support.iter().map(|&g| xt[(g, g)].re).sum::<f64>() / support.len() as f64
    };
    let passes = opt.converged.then(|| off < CERT_TOL && spread < CERT_TOL);
    OptimalityReport {
        off_diag_norm: off,
        eigen_spread: spread,
        common_eigenvalue: common,
        s_rank: support.len(),
        chi_rank: chi.rank(1e-8),
        passes,
    }
}

/// Carries `S` from one kernel basis to another through the local term `Φ S Φ†`,
/// then restores positivity and unit trace.
pub fn transport_s(s: &CMat, from: &KernelBasis, to: &KernelBasis) -> CMat {
    let h = from.local_term(s);
    let t = linalg::hermitian_part(&(linalg::adjoint(&to.vectors) * &h * &to.vectors));
    let (vals, u) = linalg::herm_eigen(&t);
    let top = vals.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let floor = 1e-6 * top;
    let clipped = {
        let mut uf = u.clone();
        for j in 0..vals.len() {
            let v = vals[j].max(floor);
            for i in 0..vals.len() {
                uf[(i, j)] *= c(v);
            }
        }
        &uf * linalg::adjoint(&u)
    };
    let tr = linalg::trace(&clipped).re;
    linalg::hermitian_part(&linalg::scale(&clipped, c(1.0 / tr)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;
    use crate::symmetry::{build_sector, symmetric_s_template};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn aklt_objective(n: usize, lambda: f64, barrier: f64) -> Objective {
        let sector = Arc::new(build_sector(Model::Aklt, n, &Model::Aklt.ground_sector()).unwrap());
        let options = ObjectiveOptions { barrier, ..Default::default() };
        Objective::new(&Family::aklt(), lambda, n, Some(sector), Some(symmetric_s_template(Model::Aklt).unwrap()), options)
            .unwrap()
    }

    fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[j] += h;
                b[j] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
        num / den
    }

    #[test]
    fn template_gradient_matches_fd() {
        let obj = aklt_objective(6, 0.4, BARRIER_WEIGHT);
        for p in [[0.15, 0.22], [0.3, 0.05], [0.1, 0.1]] {
            let pt = obj.point(&p).unwrap();
            let fd = fd_grad(|x| obj.point(x).unwrap().value, &p, 1e-6);
            assert!(rel_err(&pt.gradient, &fd) < 1e-6, "{:?} vs {:?}", pt.gradient, fd);
        }
    }

    #[test]
    fn generator_gradient_matches_fd() {
        let fam = Family::random(3, 0.0);
        let obj = Objective::new(&fam, 1.0, 6, None, None, ObjectiveOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = obj.canonical_params().unwrap();
        let p: Vec<f64> = base.iter().map(|x| x + 0.3 * rng.random_range(-1.0..1.0)).collect();
        let pt = obj.point(&p).unwrap();
        assert!(!pt.eval.gap.excited_degenerate);
        let fd = fd_grad(|x| obj.gap_value(x).unwrap(), &p, 1e-5);
        assert!(rel_err(&pt.gradient, &fd) < 1e-5, "rel {}", rel_err(&pt.gradient, &fd));
    }

    #[test]
    fn generator_gradient_vanishes_for_scalar_chi() {
        let m = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords: Vec<f64> = (0..m * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = linalg::herm_from_coords(&coords, m);
        let chi = linalg::scale(&linalg::identity(m), c(0.37));
        let g = generator_gradient(&b, &chi);
        assert!(g.iter().all(|x| x.abs() < 1e-12), "{g:?}");
    }

    #[test]
    fn component_and_lifted_chi_agree() {
        // dense components on one side, sector lift plus kernel overlaps on the other
        let obj = aklt_objective(6, 0.55, 0.0);
        assert!(obj.uses_components());
        let pt = obj.point(&[0.17, 0.21]).unwrap();
        let chi = obj.chi(&pt.eval).unwrap();
        let t = obj.template.as_ref().unwrap();
        for (j, tj) in t.directions.iter().enumerate() {
            let lifted = linalg::pair(tj, &chi.entries).re;
            assert!((lifted - pt.gradient[j]).abs() < 1e-10, "{lifted} vs {}", pt.gradient[j]);
        }
        assert!((chi.pair_with(&pt.s) - pt.gap).abs() < 1e-10);
    }

    #[test]
    fn maximize_beats_coarse_grid() {
        let obj = aklt_objective(6, 0.7, BARRIER_WEIGHT);
        let st = maximize(&obj, &obj.canonical_params().unwrap(), &MaximizeOptions::default()).unwrap();
        assert!(st.converged);
        let k = 30;
        let mut best = f64::NEG_INFINITY;
        for i in 1..k {
            for j in 1..k {
                let (a, b) = (0.5 * i as f64 / k as f64, 0.5 * j as f64 / k as f64);
                if a + b < 0.5 {
                    best = best.max(obj.gap_value(&[a, b]).unwrap());
                }
            }
        }
        assert!(st.value >= best - 1e-9);
        assert!(st.value - best < 5e-3);
        assert_eq!(st.certificate.passes, Some(true));
        assert!((st.certificate.common_eigenvalue - st.value).abs() < 1e-6);
    }

    #[test]
    fn certificate_withheld_when_unconverged() {
        let obj = aklt_objective(6, 0.7, BARRIER_WEIGHT);
        let st = maximize(&obj, &obj.canonical_params().unwrap(), &MaximizeOptions { grad_tol: 1e-300, max_iter: 1, ..Default::default() })
            .unwrap();
        assert!(!st.converged);
        assert_eq!(st.certificate.passes, None);
    }

    #[test]
    fn certificate_support_excludes_null_directions() {
        let s = linalg::diag(&[0.5, 0.5, 0.0]);
        let chi = ChiMatrix { entries: linalg::diag(&[0.2, 0.2, 0.9]), excited_energy: 0.2 };
        let st = OptState {
            params: vec![],
            s,
            value: 0.2,
            objective_value: 0.2,
            gradient: vec![],
            grad_norm: 0.0,
            iteration: 0,
            converged: true,
            non_smooth: false,
            subgradient: false,
            ground_degeneracy: 1,
            certificate: OptimalityReport {
                off_diag_norm: 0.0,
                eigen_spread: 0.0,
                common_eigenvalue: 0.0,
                s_rank: 0,
                chi_rank: 0,
                passes: None,
            },
            trace: vec![],
            evaluations: 0,
        };
        let r = certify(&st, &chi);
        assert_eq!(r.s_rank, 2);
        assert_eq!(r.chi_rank, 3);
        assert!(r.eigen_spread < 1e-14);
        assert_eq!(r.passes, Some(true));
    }

    #[test]
    fn transport_is_identity_on_same_basis() {
        let basis = Family::aklt().basis(0.3).unwrap();
        let s = linalg::diag(&[0.1, 0.3, 0.2, 0.3, 0.1]);
        let t = transport_s(&s, &basis, &basis);
        assert!(linalg::max_abs_diff(&s, &t) < 1e-12);
    }

    #[test]
    fn solve_small_inverts() {
        let a = vec![vec![4.0, 1.0], vec![2.0, 3.0]];
        let x = solve_small(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inert_direction_has_zero_gradient_and_stays_put() {
        let n = 6;
        let mut t = symmetric_s_template(Model::Aklt).unwrap();
        t.names.push("inert".into());
        t.directions.push(linalg::zeros(5, 5));
        t.canonical.push(0.0);
        let sector = Arc::new(build_sector(Model::Aklt, n, &Model::Aklt.ground_sector()).unwrap());
        let obj = Objective::new(&Family::aklt(), 0.7, n, Some(sector), Some(t), ObjectiveOptions::default()).unwrap();
        let init = [0.2, 0.2, 0.3];
        assert_eq!(obj.point(&init).unwrap().gradient[2], 0.0);
        let st = maximize(&obj, &init, &MaximizeOptions::default()).unwrap();
        assert_eq!(st.params[2], 0.3);
        assert!(st.converged);
    }
}
