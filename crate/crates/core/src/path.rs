//! Gap optimization along the interpolation path: pointwise sweeps with warm
//! starts, and integration of the optimal-path ODE
//! `∂_λ p = −𝓗⁻¹ ∂_λ 𝓙` in the template coordinates.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{Family, Model};
use crate::opt::{
    self, fd_hessian, maximize, solve_small, MaximizeOptions, Objective, ObjectiveOptions, OptState,
    OptimalityReport,
};
use crate::parent::KernelBasis;
use crate::spectra::SolverKind;
use crate::symmetry::{build_sector, symmetric_s_template, SectorMap, SectorSpec};
use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub sector: Option<SectorSpec>,
    /// Optimize the model's symmetric template instead of a free generator.
    pub template: bool,
    pub warm_start: bool,
    pub maximize: MaximizeOptions,
    pub objective: ObjectiveOptions,
    /// Threads for cold-start sweeps.
    pub workers: usize,
    /// Parameters for the first grid point instead of the canonical point.
    pub init: Option<Vec<f64>>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            sector: None,
            template: false,
            warm_start: true,
            maximize: MaximizeOptions::default(),
            objective: ObjectiveOptions::default(),
            workers: 1,
            init: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub lambda: f64,
    pub converged: bool,
    pub non_smooth: bool,
    pub subgradient: bool,
    pub n_iter: usize,
    pub grad_norm: f64,
    pub ground_degeneracy: usize,
    pub canonical_ground_degeneracy: usize,
    pub certificate: Option<OptimalityReport>,
    /// A warm start ended below the canonical gap and the point was redone from the canonical point.
    pub restarted_cold: bool,
    pub working_dim: usize,
    pub solver: Option<SolverKind>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathResult {
    pub model: Model,
    pub n_sites: usize,
    pub lambdas: Vec<f64>,
    pub gaps_canonical: Vec<f64>,
    pub gaps_optimized: Vec<f64>,
    pub s_params: Vec<Vec<f64>>,
    /// Row-major `[re, im]` entries of `S_opt` per point.
    pub s_matrices: Vec<Vec<Vec<[f64; 2]>>>,
    pub min_gap_canonical: f64,
    pub min_gap_optimized: f64,
    pub diagnostics: Vec<PointDiagnostics>,
    /// Grid points where the ODE was abandoned for a fresh pointwise optimum.
    #[serde(default)]
    pub ode_restarts: Vec<f64>,
}

impl PathResult {
    pub fn s_matrix(&self, i: usize) -> CMat {
        linalg::from_nested(&self.s_matrices[i])
    }
}

fn min_finite(x: &[f64]) -> f64 {
    x.iter().cloned().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min)
}

/// Everything shared by the points of one path.
struct PathContext {
    family: Family,
    n_sites: usize,
    sector: Option<Arc<SectorMap>>,
    template: Option<crate::symmetry::STemplate>,
    objective: ObjectiveOptions,
}

impl PathContext {
    fn new(family: &Family, n_sites: usize, lambdas: &[f64], opts: &SweepOptions) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidInput("empty λ grid".into()));
        }
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("λ grid must be strictly increasing".into()));
        }
        let sector = match &opts.sector {
            Some(spec) if !spec.is_empty() => Some(Arc::new(build_sector(family.model, n_sites, spec)?)),
            _ => None,
        };
        let template = if opts.template { Some(symmetric_s_template(family.model)?) } else { None };
        Ok(Self { family: family.clone(), n_sites, sector, template, objective: opts.objective.clone() })
    }

    fn objective(&self, lambda: f64) -> Result<Objective> {
        Objective::new(&self.family, lambda, self.n_sites, self.sector.clone(), self.template.clone(), self.objective.clone())
    }
}

struct PointOutcome {
    gap_canonical: f64,
    state: OptState,
    basis: KernelBasis,
    diag: PointDiagnostics,
}

fn solve_point(
    ctx: &PathContext,
    lambda: f64,
    warm: Option<(&CMat, &KernelBasis, &[f64])>,
    init: Option<&[f64]>,
    mopts: &MaximizeOptions,
) -> Result<PointOutcome> {
    let obj = ctx.objective(lambda)?;
    let can = obj.canonical_params()?;
    let can_eval = obj.evaluate(&can)?;
    let gap_canonical = can_eval.gap.gap;
    let start = match (warm, init) {
        (_, Some(p)) => p.to_vec(),
        (Some((s, basis, params)), None) => match &obj.template {
            Some(_) => params.to_vec(),
            None => obj.params_of_s(&opt::transport_s(s, basis, &obj.basis))?,
        },
        (None, None) => can.clone(),
    };
    let start = if obj.feasible(&start) { start } else { can.clone() };
    let mut state = maximize(&obj, &start, mopts)?;
    let mut restarted_cold = false;
    if state.value < gap_canonical && start != can {
        let cold = maximize(&obj, &can, mopts)?;
        restarted_cold = true;
        if cold.value > state.value {
            state = cold;
        }
    }
    let diag = PointDiagnostics {
        lambda,
        converged: state.converged,
        non_smooth: state.non_smooth,
        subgradient: state.subgradient,
        n_iter: state.iteration,
        grad_norm: state.grad_norm,
        ground_degeneracy: state.ground_degeneracy,
        canonical_ground_degeneracy: can_eval.gap.ground_degeneracy,
        certificate: Some(state.certificate.clone()),
        restarted_cold,
        working_dim: obj.working_dim(),
        solver: Some(can_eval.gap.solver),
        error: None,
    };
    debug!(
        "λ={lambda:.6}: canonical {gap_canonical:.6e}, optimized {:.6e} ({} iterations, converged {})",
        state.value, state.iteration, state.converged
    );
    Ok(PointOutcome { gap_canonical, state, basis: obj.basis, diag })
}

fn failed_diag(lambda: f64, e: &Error) -> PointDiagnostics {
    PointDiagnostics {
        lambda,
        converged: false,
        non_smooth: false,
        subgradient: false,
        n_iter: 0,
        grad_norm: f64::NAN,
        ground_degeneracy: 0,
        canonical_ground_degeneracy: 0,
        certificate: None,
        restarted_cold: false,
        working_dim: 0,
        solver: None,
        error: Some(e.to_string()),
    }
}

struct Collector {
    model: Model,
    n_sites: usize,
    lambdas: Vec<f64>,
    gaps_canonical: Vec<f64>,
    gaps_optimized: Vec<f64>,
    s_params: Vec<Vec<f64>>,
    s_matrices: Vec<Vec<Vec<[f64; 2]>>>,
    diagnostics: Vec<PointDiagnostics>,
}

impl Collector {
    fn new(model: Model, n_sites: usize) -> Self {
        Self {
            model,
            n_sites,
            lambdas: Vec::new(),
            gaps_canonical: Vec::new(),
            gaps_optimized: Vec::new(),
            s_params: Vec::new(),
            s_matrices: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn push(&mut self, lambda: f64, out: Result<PointOutcome>) {
        self.lambdas.push(lambda);
        match out {
            Ok(o) => {
                self.gaps_canonical.push(o.gap_canonical);
                self.gaps_optimized.push(o.state.value);
                self.s_params.push(o.state.params.clone());
                self.s_matrices.push(linalg::to_nested(&o.state.s));
                self.diagnostics.push(o.diag);
            }
            Err(e) => {
                warn!("λ={lambda}: {e}");
                self.gaps_canonical.push(f64::NAN);
                self.gaps_optimized.push(f64::NAN);
                self.s_params.push(Vec::new());
                self.s_matrices.push(Vec::new());
                self.diagnostics.push(failed_diag(lambda, &e));
            }
        }
    }

    fn finish(self, ode_restarts: Vec<f64>) -> Result<PathResult> {
        if self.diagnostics.iter().all(|d| d.error.is_some()) {
            let first = self.diagnostics.first().and_then(|d| d.error.clone()).unwrap_or_default();
            return Err(Error::InvalidInput(format!("every sweep point failed; first error: {first}")));
        }
        Ok(PathResult {
            model: self.model,
            n_sites: self.n_sites,
            min_gap_canonical: min_finite(&self.gaps_canonical),
            min_gap_optimized: min_finite(&self.gaps_optimized),
            lambdas: self.lambdas,
            gaps_canonical: self.gaps_canonical,
            gaps_optimized: self.gaps_optimized,
            s_params: self.s_params,
            s_matrices: self.s_matrices,
            diagnostics: self.diagnostics,
            ode_restarts,
        })
    }
}

/// Pointwise maximization over a λ grid. In warm-start mode each point starts from
/// the previous optimum (carried across bases for SVD kernels); in cold-start mode
/// every point starts at the canonical `S` and points may run in parallel.
pub fn sweep(family: &Family, n_sites: usize, lambdas: &[f64], opts: &SweepOptions) -> Result<PathResult> {
    let ctx = PathContext::new(family, n_sites, lambdas, opts)?;
    let mut col = Collector::new(family.model, n_sites);
    info!("sweep: {} over {} points, N={n_sites}", family.model.name(), lambdas.len());
    if opts.warm_start || opts.workers <= 1 {
        let mut prev: Option<(CMat, KernelBasis, Vec<f64>)> = None;
        for (i, &lam) in lambdas.iter().enumerate() {
            let init = if i == 0 { opts.init.as_deref() } else { None };
            let warm = if opts.warm_start { prev.as_ref().map(|(s, b, p)| (s, b, p.as_slice())) } else { None };
            let out = solve_point(&ctx, lam, warm, init, &opts.maximize);
            if let Ok(o) = &out {
                prev = Some((o.state.s.clone(), o.basis.clone(), o.state.params.clone()));
            }
            col.push(lam, out);
        }
    } else {
        let workers = opts.workers.min(lambdas.len()).max(1);
        let mut results: Vec<Option<Result<PointOutcome>>> = (0..lambdas.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let ctx = &ctx;
                    scope.spawn(move || {
                        (w..lambdas.len())
                            .step_by(workers)
                            .map(|i| {
                                let init = if i == 0 { opts.init.as_deref() } else { None };
                                (i, solve_point(ctx, lambdas[i], None, init, &opts.maximize))
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("sweep worker panicked") {
                    results[i] = Some(r);
                }
            }
        });
        for (lam, r) in lambdas.iter().zip(results) {
            col.push(*lam, r.expect("every point is assigned"));
        }
    }
    col.finish(Vec::new())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OdeOptions {
    /// Finite-difference step in the parameters for the Hessian.
    pub h_p: f64,
    /// Finite-difference step in λ for the mixed derivative.
    pub h_lambda: f64,
    /// Re-optimize every `k` grid points (`0` disables).
    pub reproject_every: usize,
    /// Local error tolerance of the step-doubling RK4 integrator.
    pub rk_tol: f64,
    /// Largest acceptable condition number of the Hessian.
    pub cond_tol: f64,
    /// Largest `‖∇‖_∞` accepted at a grid point before restarting from a fresh optimum.
    pub drift_tol: f64,
    /// Smallest `λ_min(S)` at which the ODE is trusted.
    pub margin: f64,
    /// Smallest `E_2 − E_1` (relative to `E_1`) at which the ODE is trusted.
    pub level_window: f64,
    pub max_substeps: usize,
    /// Restart from a pointwise optimum at kinks instead of failing.
    pub restart_on_kink: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            h_p: 1e-4,
            h_lambda: 1e-4,
            reproject_every: 0,
            rk_tol: 1e-7,
            cond_tol: 1e8,
            drift_tol: 1e-4,
            margin: 1e-3,
            level_window: 1e-3,
            max_substeps: 256,
            restart_on_kink: true,
        }
    }
}

struct OdeSystem<'a> {
    ctx: &'a PathContext,
    opts: &'a OdeOptions,
    lo: f64,
    hi: f64,
}

impl OdeSystem<'_> {
    fn gradient(&self, lambda: f64, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.ctx.objective(lambda)?.point(p)?.gradient)
    }

    /// Negative-definite Hessian with bounded condition number, or a stiffness error.
    fn hessian(&self, obj: &Objective, p: &[f64]) -> Result<Vec<Vec<f64>>> {
        let hess = fd_hessian(obj, p, self.opts.h_p)?;
        let n = p.len();
        let m = faer::Mat::<f64>::from_fn(n, n, |i, j| hess[i][j]);
        let ev = m
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|_| Error::Stiff { cond: f64::INFINITY })?;
        let top = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let bottom = ev.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
        let cond = if bottom > 0.0 { top / bottom } else { f64::INFINITY };
        if ev.iter().any(|&x| x >= 0.0) || cond > self.opts.cond_tol {
            return Err(Error::Stiff { cond });
        }
        Ok(hess)
    }

    fn rhs(&self, lambda: f64, p: &[f64]) -> Result<Vec<f64>> {
        let obj = self.ctx.objective(lambda)?;
        if !obj.feasible(p) {
            return Err(Error::Infeasible(format!("S left the positive cone at λ={lambda}")));
        }
        let hess = self.hessian(&obj, p)?;
        let h = self.opts.h_lambda;
        let (a, b) = ((lambda - h).max(self.lo), (lambda + h).min(self.hi));
        let ga = if a == lambda { obj.point(p)?.gradient } else { self.gradient(a, p)? };
        let gb = if b == lambda { obj.point(p)?.gradient } else { self.gradient(b, p)? };
        let mixed: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| -(y - x) / (b - a)).collect();
        solve_small(&hess, &mixed).ok_or(Error::Stiff { cond: f64::INFINITY })
    }

    fn rk4(&self, lambda: f64, p: &[f64], h: f64) -> Result<Vec<f64>> {
        let add = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        let k1 = self.rhs(lambda, p)?;
        let k2 = self.rhs(lambda + h / 2.0, &add(p, &k1, h / 2.0))?;
        let k3 = self.rhs(lambda + h / 2.0, &add(p, &k2, h / 2.0))?;
        let k4 = self.rhs(lambda + h, &add(p, &k3, h))?;
        Ok((0..p.len()).map(|i| p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    /// Adaptive RK4 with step doubling from `a` to `b`.
    fn integrate(&self, a: f64, b: f64, p: &[f64]) -> Result<Vec<f64>> {
        let mut lam = a;
        let mut y = p.to_vec();
        let mut h = b - a;
        let mut steps = 0;
        while lam < b - 1e-14 {
            h = h.min(b - lam);
            let full = self.rk4(lam, &y, h)?;
            let half = self.rk4(lam, &y, h / 2.0)?;
            let two = self.rk4(lam + h / 2.0, &half, h / 2.0)?;
            let err = full.iter().zip(&two).fold(0.0f64, |m, (x, z)| m.max((x - z).abs()));
            steps += 1;
            if steps > self.opts.max_substeps {
                return Err(Error::Stiff { cond: f64::NAN });
            }
            if err <= self.opts.rk_tol {
                y = two.iter().zip(&full).map(|(t, f)| t + (t - f) / 15.0).collect();
                lam += h;
                if err < self.opts.rk_tol / 32.0 {
                    h *= 2.0;
                }
            } else {
                h /= 2.0;
            }
        }
        Ok(y)
    }

    /// Whether the ODE can be trusted at `(λ, p)`: interior point, isolated excited
    /// level and a well-conditioned negative-definite Hessian.
    fn regular(&self, lambda: f64, p: &[f64]) -> bool {
        let Ok(obj) = self.ctx.objective(lambda) else { return false };
        let Ok(pt) = obj.point(p) else { return false };
        if pt.eval.min_eig_s <= self.opts.margin {
            debug!("λ={lambda}: optimum within {} of the cone boundary", self.opts.margin);
            return false;
        }
        let g = &pt.eval.gap;
        if g.degenerate() || g.excited_degenerate {
            debug!("λ={lambda}: degenerate level");
            return false;
        }
        if let Some(e2) = g.e2 {
            if e2 - g.e1 <= self.opts.level_window * g.e1.abs().max(1e-12) {
                debug!("λ={lambda}: excited levels {} and {e2} nearly cross", g.e1);
                return false;
            }
        }
        match self.hessian(&obj, p) {
            Ok(_) => true,
            Err(e) => {
                debug!("λ={lambda}: {e}");
                false
            }
        }
    }
}

/// Follows the optimum along the grid by integrating the optimal-path ODE in
/// template coordinates, starting from the optimum `s_init` at the first point.
/// Kinks (boundary optima, level crossings, ill-conditioned Hessians) end the
/// current ODE segment; the path resumes from a fresh pointwise optimum.
pub fn ode_follow(
    family: &Family,
    n_sites: usize,
    lambdas: &[f64],
    s_init: &[f64],
    opts: &SweepOptions,
    ode: &OdeOptions,
) -> Result<PathResult> {
    if !opts.template {
        return Err(Error::InvalidInput("ODE following works in template coordinates; enable the template".into()));
    }
    let ctx = PathContext::new(family, n_sites, lambdas, opts)?;
    let (lo, hi) = family.model.lambda_range();
    let sys = OdeSystem { ctx: &ctx, opts: ode, lo, hi };
    let mut col = Collector::new(family.model, n_sites);
    let mut restarts = Vec::new();
    let mut p = s_init.to_vec();
    for (i, &lam) in lambdas.iter().enumerate() {
        if i > 0 {
            let a = lambdas[i - 1];
            let integrated = if sys.regular(a, &p) {
                match sys.integrate(a, lam, &p) {
                    Ok(q) => Some(q),
                    Err(e) if ode.restart_on_kink => {
                        debug!("ODE segment [{a}, {lam}] abandoned: {e}");
                        None
                    }
                    Err(e) => return Err(e),
                }
            } else if ode.restart_on_kink {
                None
            } else {
                return Err(Error::Stiff { cond: f64::NAN });
            };
            let obj = ctx.objective(lam)?;
            let fresh = |start: &[f64]| -> Result<Vec<f64>> {
                let start = if obj.feasible(start) { start.to_vec() } else { obj.canonical_params()? };
                Ok(maximize(&obj, &start, &opts.maximize)?.params)
            };
            p = match integrated {
                Some(q) => {
                    let drift = obj.feasible(&q).then(|| obj.point(&q).ok()).flatten().map(|pt| pt.grad_norm());
                    if drift.is_some_and(|d| d <= ode.drift_tol) {
                        if ode.reproject_every > 0 && i % ode.reproject_every == 0 {
                            fresh(&q)?
                        } else {
                            q
                        }
                    } else {
                        debug!("λ={lam}: ODE endpoint drifted from stationarity ({drift:?})");
                        restarts.push(lam);
                        fresh(&q)?
                    }
                }
                None => {
                    restarts.push(lam);
                    fresh(&p)?
                }
            };
        }
        col.push(lam, ode_point(&ctx, lam, &p, ode));
    }
    info!("ODE path: {} restarts over {} points", restarts.len(), lambdas.len());
    col.finish(restarts)
}

fn ode_point(ctx: &PathContext, lambda: f64, p: &[f64], ode: &OdeOptions) -> Result<PointOutcome> {
    let obj = ctx.objective(lambda)?;
    let can = obj.canonical_params()?;
    let can_eval = obj.evaluate(&can)?;
    let pt = obj.point(p)?;
    let chi = obj.chi(&pt.eval)?;
    let converged = pt.grad_norm() <= ode.drift_tol;
    let mut state = OptState {
        params: p.to_vec(),
        s: pt.s.clone(),
        value: pt.gap,
        objective_value: pt.value,
        gradient: pt.gradient.clone(),
        grad_norm: pt.grad_norm(),
        iteration: 0,
        converged,
        non_smooth: false,
        subgradient: pt.eval.gap.excited_degenerate,
        ground_degeneracy: pt.eval.gap.ground_degeneracy,
        certificate: OptimalityReport {
            off_diag_norm: f64::NAN,
            eigen_spread: f64::NAN,
            common_eigenvalue: f64::NAN,
            s_rank: 0,
            chi_rank: 0,
            passes: None,
        },
        trace: vec![pt.value],
        evaluations: 1,
    };
    state.certificate = opt::certify(&state, &chi);
    let diag = PointDiagnostics {
        lambda,
        converged,
        non_smooth: false,
        subgradient: state.subgradient,
        n_iter: 0,
        grad_norm: state.grad_norm,
        ground_degeneracy: state.ground_degeneracy,
        canonical_ground_degeneracy: can_eval.gap.ground_degeneracy,
        certificate: Some(state.certificate.clone()),
        restarted_cold: false,
        working_dim: obj.working_dim(),
        solver: Some(pt.eval.gap.solver),
        error: None,
    };
    Ok(PointOutcome { gap_canonical: can_eval.gap.gap, state, basis: obj.basis, diag })
}

/// Evenly spaced grid including both ends.
pub fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![start];
    }
    (0..steps)
        .map(|i| if i == steps - 1 { stop } else { start + (stop - start) * i as f64 / (steps - 1) as f64 })
        .collect()
}
