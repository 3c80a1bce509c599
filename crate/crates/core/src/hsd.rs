//! Operator-splitting solver on the homogeneous self-dual embedding.
//!
//! For a problem `min cᵀν s.t. Aν + μ = b, μ ∈ V` the embedding is
//!
//! ```text
//! [λ; μ; κ] = Q [ν; η; τ],   Q = [ 0  Aᵀ  c ;  −A  0  b ;  −cᵀ  −bᵀ  0 ]
//! x = (ν, η, τ) ∈ C = Rⁿ × V* × R₊,   y = (λ, μ, κ) ∈ C* = {0}ⁿ × V × R₊
//! ```
//!
//! and every iteration is
//!
//! ```text
//! x̃ ← (I + Q)⁻¹ (x + y)
//! x ← Π_C(x̃ − y)
//! y ← y − x̃ + x
//! ```
//!
//! Optimal points are read off as (ν, η) / τ. When τ collapses relative to
//! κ, the iterates carry a certificate of primal or dual infeasibility.

use std::io::Write;

use crate::cones::{norm2, ConeFactor, ConeProduct};
use crate::error::{check_len, Error, Result};
use crate::linsys::{EmbeddingSystem, LinSolve};
use crate::problem::ConicProblem;
use crate::sparse::CscMatrix;

/// τ ≤ TAU_COLLAPSE · κ switches from optimality to infeasibility checks.
const TAU_COLLAPSE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Relative tolerance on primal residual, dual residual and gap.
    pub eps: f64,
    /// Over-relaxation in [1, 2). 1 is the plain iteration.
    pub alpha: f64,
    pub linsolve: LinSolve,
    /// Residual target of the iterative linear solver.
    pub iterative_tol: f64,
    /// Diagonal equilibration of the data before iterating.
    pub normalize: bool,
    /// Check cone membership, complementarity and the linear-solve residual
    /// after every iteration.
    pub verify_iterates: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            eps: 1e-3,
            alpha: 1.0,
            linsolve: LinSolve::Direct,
            iterative_tol: 1e-9,
            normalize: false,
            verify_iterates: cfg!(debug_assertions),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(1.0..2.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [1, 2), got {}",
                self.alpha
            )));
        }
        if !(self.iterative_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "iterative_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterReached,
    /// A monitor passed to [`HsdSolver::solve_monitored`] asked to stop.
    Stopped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Probe interval and callback; the callback returns true to stop.
type Monitor<'a> = (usize, &'a mut dyn FnMut(&[f64]) -> bool);

/// Embedding iterates x = (ν, η, τ) and y = (λ, μ, κ).
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iteration: usize,
}

impl IterateState {
    /// x = (0, 0, 1), y = (0, 0, 1).
    pub fn initial(n: usize, m: usize) -> Self {
        let mut x = vec![0.0; n + m + 1];
        let mut y = vec![0.0; n + m + 1];
        x[n + m] = 1.0;
        y[n + m] = 1.0;
        Self { x, y, iteration: 0 }
    }

    pub fn tau(&self) -> f64 {
        *self.x.last().expect("nonempty state")
    }

    pub fn kappa(&self) -> f64 {
        *self.y.last().expect("nonempty state")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    /// ν (Optimal only).
    pub primal: Option<Vec<f64>>,
    /// η (Optimal only).
    pub dual: Option<Vec<f64>>,
    /// μ = b − Aν (Optimal only).
    pub slack: Option<Vec<f64>>,
    /// Normalized η with bᵀη = −1 (primal infeasible) or ν with cᵀν = −1
    /// (dual infeasible).
    pub certificate: Option<Vec<f64>>,
    pub residuals: Residuals,
    pub objective: Option<f64>,
    pub iterations: usize,
}

/// Q u for the embedding matrix of `problem`, without forming Q.
pub fn apply_q(problem: &ConicProblem, u: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (problem.n(), problem.m());
    check_len(n + m + 1, u.len())?;
    Ok(apply_q_raw(problem.a(), problem.b(), problem.c(), u))
}

fn apply_q_raw(a: &CscMatrix, b: &[f64], c: &[f64], u: &[f64]) -> Vec<f64> {
    let (n, m) = (a.ncols(), a.nrows());
    let (x, rest) = u.split_at(n);
    let (y, t) = rest.split_at(m);
    let tau = t[0];
    let mut out = vec![0.0; n + m + 1];
    {
        let (ox, rest) = out.split_at_mut(n);
        let (oy, ot) = rest.split_at_mut(m);
        a.gemv_t(1.0, y, ox);
        for (o, ci) in ox.iter_mut().zip(c) {
            *o += ci * tau;
        }
        a.gemv(-1.0, x, oy);
        for (o, bi) in oy.iter_mut().zip(b) {
            *o += bi * tau;
        }
        ot[0] = -dot(c, x) - dot(b, y);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scaled data D A E, s_b D b, s_c E c with D constant on every cone block.
#[derive(Debug, Clone)]
struct Scaling {
    row: Vec<f64>,
    col: Vec<f64>,
    b_scale: f64,
    c_scale: f64,
}

impl Scaling {
    fn identity(m: usize, n: usize) -> Self {
        Self {
            row: vec![1.0; m],
            col: vec![1.0; n],
            b_scale: 1.0,
            c_scale: 1.0,
        }
    }

    fn new(problem: &ConicProblem, settings: &SolverSettings) -> Self {
        if !settings.normalize {
            return Self::identity(problem.m(), problem.n());
        }
        let mut s = Self::equilibrate(problem.a(), problem.cone());
        let nb = norm2(
            &problem
                .b()
                .iter()
                .zip(&s.row)
                .map(|(x, d)| x * d)
                .collect::<Vec<_>>(),
        );
        let nc = norm2(
            &problem
                .c()
                .iter()
                .zip(&s.col)
                .map(|(x, e)| x * e)
                .collect::<Vec<_>>(),
        );
        if nb > 0.0 {
            s.b_scale = 1.0 / nb;
        }
        if nc > 0.0 {
            s.c_scale = 1.0 / nc;
        }
        s
    }

    fn apply(&self, problem: &ConicProblem) -> (CscMatrix, Vec<f64>, Vec<f64>) {
        let mut a = problem.a().clone();
        a.scale(&self.row, &self.col);
        let b = problem
            .b()
            .iter()
            .zip(&self.row)
            .map(|(x, d)| x * d * self.b_scale)
            .collect();
        let c = problem
            .c()
            .iter()
            .zip(&self.col)
            .map(|(x, e)| x * e * self.c_scale)
            .collect();
        (a, b, c)
    }

    fn equilibrate(a: &CscMatrix, cone: &ConeProduct) -> Self {
        const PASSES: usize = 10;
        let (m, n) = (a.nrows(), a.ncols());
        let mut s = Self::identity(m, n);
        let mut work = a.clone();
        for _ in 0..PASSES {
            let mut rnorm = vec![0.0f64; m];
            let mut cnorm = vec![0.0f64; n];
            for (r, c, v) in work.triplets() {
                rnorm[r] = rnorm[r].max(v.abs());
                cnorm[c] = cnorm[c].max(v.abs());
            }
            let mut dr = vec![1.0; m];
            for (off, f) in cone.blocks() {
                let block = &rnorm[off..off + f.dim()];
                let mean = block.iter().sum::<f64>() / f.dim() as f64;
                let d = 1.0 / mean.clamp(1e-4, 1e4).sqrt();
                dr[off..off + f.dim()].fill(d);
            }
            let dc: Vec<f64> = cnorm
                .iter()
                .map(|&c| 1.0 / c.clamp(1e-4, 1e4).sqrt())
                .collect();
            work.scale(&dr, &dc);
            for (x, d) in s.row.iter_mut().zip(&dr) {
                *x *= d;
            }
            for (x, d) in s.col.iter_mut().zip(&dc) {
                *x *= d;
            }
        }
        s
    }
}

/// Problem data as seen by the iteration, with its cached linear solver.
struct Workspace {
    revision: u64,
    normalize: bool,
    linsolve: LinSolve,
    iterative_tol: f64,
    scaling: Scaling,
    a: CscMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    cone_x: ConeProduct,
    cone_y: ConeProduct,
    sys: EmbeddingSystem,
    w: Vec<f64>,
    xt: Vec<f64>,
    u: Vec<f64>,
}

impl Workspace {
    fn build(problem: &ConicProblem, settings: &SolverSettings) -> Result<Self> {
        let (n, m) = (problem.n(), problem.m());
        let scaling = Scaling::new(problem, settings);
        let (a, b, c) = scaling.apply(problem);
        let cone = problem.cone();
        let cone_x = ConeProduct::new(vec![ConeFactor::free(n)])
            .concat(&cone.dual())
            .concat(&ConeProduct::new(vec![ConeFactor::nonneg(1)]));
        let cone_y = ConeProduct::new(vec![ConeFactor::zero(n)])
            .concat(cone)
            .concat(&ConeProduct::new(vec![ConeFactor::nonneg(1)]));
        let sys = EmbeddingSystem::new(&a, &b, &c, settings.linsolve, settings.iterative_tol)?;
        let d = n + m + 1;
        Ok(Self {
            revision: problem.revision(),
            normalize: settings.normalize,
            linsolve: settings.linsolve,
            iterative_tol: settings.iterative_tol,
            scaling,
            a,
            b,
            c,
            cone_x,
            cone_y,
            sys,
            w: vec![0.0; d],
            xt: vec![0.0; d],
            u: vec![0.0; d],
        })
    }

    fn matches(&self, problem: &ConicProblem, settings: &SolverSettings) -> bool {
        self.revision == problem.revision()
            && self.normalize == settings.normalize
            && self.linsolve == settings.linsolve
            && self.iterative_tol == settings.iterative_tol
    }

    /// Re-reads values of a problem with an unchanged pattern and cone.
    fn refresh(&mut self, problem: &ConicProblem, settings: &SolverSettings) -> Result<()> {
        if self.normalize {
            self.scaling = Scaling::new(problem, settings);
        }
        let (a, b, c) = self.scaling.apply(problem);
        self.b = b;
        self.c = c;
        self.sys.update(&a, &self.b, &self.c)?;
        self.a = a;
        self.revision = problem.revision();
        Ok(())
    }

    fn dims(&self) -> (usize, usize) {
        (self.a.ncols(), self.a.nrows())
    }
}

/// Unscaled (ν, η, μ) directions from the raw iterate, without dividing by τ.
struct Unscaled {
    nu: Vec<f64>,
    eta: Vec<f64>,
    mu: Vec<f64>,
}

/// Stateful solver that keeps the factorization of I + Q across calls on
/// the same problem data.
#[derive(Default)]
pub struct HsdSolver {
    ws: Option<Workspace>,
}

impl HsdSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Numeric factorizations performed so far by the cached linear solver.
    pub fn factorizations(&self) -> usize {
        self.ws.as_ref().map_or(0, |w| w.sys.factorizations())
    }

    fn prepare(
        &mut self,
        problem: &ConicProblem,
        settings: &SolverSettings,
    ) -> Result<&mut Workspace> {
        settings.validate()?;
        enum Action {
            Reuse,
            Refresh,
            Rebuild,
        }
        let action = match &self.ws {
            Some(ws) if ws.matches(problem, settings) => Action::Reuse,
            Some(ws)
                if ws.normalize == settings.normalize
                    && ws.linsolve == settings.linsolve
                    && ws.iterative_tol == settings.iterative_tol
                    && ws.a.same_pattern(problem.a())
                    && ws.cone_y.len() == problem.cone().len() + 2
                    && ws.cone_y.factors()[1..=problem.cone().len()]
                        == *problem.cone().factors() =>
            {
                Action::Refresh
            }
            _ => Action::Rebuild,
        };
        match action {
            Action::Reuse => {}
            Action::Refresh => self
                .ws
                .as_mut()
                .expect("workspace")
                .refresh(problem, settings)?,
            Action::Rebuild => self.ws = Some(Workspace::build(problem, settings)?),
        }
        Ok(self.ws.as_mut().expect("workspace"))
    }

    /// Solves (I + Q) z = w for the (possibly equilibrated) data of `problem`.
    pub fn solve_i_plus_q(
        &mut self,
        problem: &ConicProblem,
        settings: &SolverSettings,
        w: &[f64],
    ) -> Result<Vec<f64>> {
        let ws = self.prepare(problem, settings)?;
        let mut z = vec![0.0; w.len()];
        ws.sys.solve(w, &mut z)?;
        Ok(z)
    }

    /// One full update of `state`.
    pub fn iterate(
        &mut self,
        problem: &ConicProblem,
        state: &mut IterateState,
        settings: &SolverSettings,
    ) -> Result<()> {
        let ws = self.prepare(problem, settings)?;
        step(ws, state, settings)
    }

    /// Evaluates the stopping rules on `state`. `None` means continue.
    pub fn check_termination(
        &mut self,
        problem: &ConicProblem,
        state: &IterateState,
        settings: &SolverSettings,
    ) -> Result<(Option<Status>, Residuals)> {
        let ws = self.prepare(problem, settings)?;
        Ok(termination(ws, problem, state, settings.eps).0)
    }

    pub fn solve(
        &mut self,
        problem: &ConicProblem,
        settings: &SolverSettings,
    ) -> Result<SolveResult> {
        self.solve_traced(problem, settings, None)
    }

    /// As [`HsdSolver::solve`], writing `iteration,primal,dual,gap,tau,kappa`
    /// lines to `trace`.
    pub fn solve_traced(
        &mut self,
        problem: &ConicProblem,
        settings: &SolverSettings,
        trace: Option<&mut dyn Write>,
    ) -> Result<SolveResult> {
        let (n, m) = (problem.n(), problem.m());
        let mut state = IterateState::initial(n, m);
        self.run(problem, settings, &mut state, trace, None)
    }

    /// Continues from `state` (use [`IterateState::initial`] for a cold
    /// start), handing the current primal estimate ν/τ in the original
    /// scaling to `monitor` every `every` iterations while τ > 0.
    /// Returning `true` ends the solve with [`Status::Stopped`] and that
    /// estimate as `primal`. `settings.max_iter` bounds the cumulative
    /// `state.iteration`, so a solve that stopped at one tolerance can be
    /// resumed at a tighter one without losing progress.
    pub fn solve_monitored(
        &mut self,
        problem: &ConicProblem,
        settings: &SolverSettings,
        state: &mut IterateState,
        every: usize,
        monitor: &mut dyn FnMut(&[f64]) -> bool,
    ) -> Result<SolveResult> {
        if every == 0 {
            return Err(Error::InvalidConfig(
                "monitor interval must be positive".into(),
            ));
        }
        let len = problem.n() + problem.m() + 1;
        if state.x.len() != len || state.y.len() != len {
            return Err(Error::Dimension {
                expected: len,
                got: state.x.len().min(state.y.len()),
            });
        }
        self.run(problem, settings, state, None, Some((every, monitor)))
    }

    fn run(
        &mut self,
        problem: &ConicProblem,
        settings: &SolverSettings,
        state: &mut IterateState,
        mut trace: Option<&mut dyn Write>,
        mut monitor: Option<Monitor<'_>>,
    ) -> Result<SolveResult> {
        let ws = self.prepare(problem, settings)?;
        let mut last = Residuals::default();
        while state.iteration < settings.max_iter {
            step(ws, state, settings)?;
            let ((status, res), unscaled) = termination(ws, problem, state, settings.eps);
            last = res;
            if let Some(t) = trace.as_deref_mut() {
                writeln!(
                    t,
                    "{},{:e},{:e},{:e},{:e},{:e}",
                    state.iteration,
                    res.primal,
                    res.dual,
                    res.gap,
                    state.tau(),
                    state.kappa()
                )
                .map_err(|e| Error::Numerical(format!("trace sink: {e}")))?;
            }
            if let Some(status) = status {
                return Ok(finish(status, problem, state, unscaled, res));
            }
            if let Some((every, f)) = monitor.as_mut() {
                let tau = state.tau();
                if state.iteration.is_multiple_of(*every) && tau > 0.0 {
                    let nu: Vec<f64> = unscaled.nu.iter().map(|x| x / tau).collect();
                    if f(&nu) {
                        let mut out = finish(Status::Stopped, problem, state, unscaled, res);
                        out.primal = Some(nu);
                        return Ok(out);
                    }
                }
            }
        }
        Ok(SolveResult {
            status: Status::MaxIterReached,
            primal: None,
            dual: None,
            slack: None,
            certificate: None,
            residuals: last,
            objective: None,
            iterations: state.iteration,
        })
    }
}

/// Solves `problem` from the standard starting point.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<SolveResult> {
    HsdSolver::new().solve(problem, settings)
}

fn step(ws: &mut Workspace, state: &mut IterateState, settings: &SolverSettings) -> Result<()> {
    let d = state.x.len();
    check_len(ws.w.len(), d)?;
    for i in 0..d {
        ws.w[i] = state.x[i] + state.y[i];
    }
    ws.sys.solve(&ws.w, &mut ws.xt)?;
    if settings.verify_iterates {
        let mut r = apply_q_raw(&ws.a, &ws.b, &ws.c, &ws.xt);
        for i in 0..d {
            r[i] += ws.xt[i] - ws.w[i];
        }
        let (res, bound) = (norm2(&r), 1e-9 * (1.0 + norm2(&ws.w)));
        if res > bound {
            return Err(Error::Numerical(format!(
                "linear solve residual {res:e} exceeds {bound:e}"
            )));
        }
    }
    if settings.alpha != 1.0 {
        for i in 0..d {
            ws.xt[i] = settings.alpha * ws.xt[i] + (1.0 - settings.alpha) * state.x[i];
        }
    }
    for i in 0..d {
        ws.u[i] = ws.xt[i] - state.y[i];
    }
    ws.cone_x.project_into(&ws.u, &mut state.x)?;
    for i in 0..d {
        state.y[i] = state.y[i] - ws.xt[i] + state.x[i];
    }
    state.iteration += 1;
    if settings.verify_iterates {
        verify_state(ws, state)?;
    }
    Ok(())
}

fn verify_state(ws: &Workspace, state: &IterateState) -> Result<()> {
    let (nx, ny) = (norm2(&state.x), norm2(&state.y));
    let tol = 1e-9 * (1.0 + nx.max(ny));
    if !ws.cone_x.contains(&state.x, tol) {
        return Err(Error::Numerical(format!(
            "iterate x left C at iteration {}",
            state.iteration
        )));
    }
    if !ws.cone_y.contains(&state.y, tol) {
        return Err(Error::Numerical(format!(
            "iterate y left C* at iteration {}",
            state.iteration
        )));
    }
    let xy = dot(&state.x, &state.y);
    if xy.abs() > 1e-8 * (1.0 + nx * ny) {
        return Err(Error::Numerical(format!(
            "complementarity xᵀy = {xy:e} at iteration {}",
            state.iteration
        )));
    }
    Ok(())
}

fn unscale(ws: &Workspace, state: &IterateState) -> Unscaled {
    let (n, m) = ws.dims();
    let s = &ws.scaling;
    let nu = state.x[..n]
        .iter()
        .zip(&s.col)
        .map(|(x, e)| x * e / s.b_scale)
        .collect();
    let eta = state.x[n..n + m]
        .iter()
        .zip(&s.row)
        .map(|(x, d)| x * d / s.c_scale)
        .collect();
    let mu = state.y[n..n + m]
        .iter()
        .zip(&s.row)
        .map(|(y, d)| y / (d * s.b_scale))
        .collect();
    Unscaled { nu, eta, mu }
}

fn termination(
    ws: &Workspace,
    problem: &ConicProblem,
    state: &IterateState,
    eps: f64,
) -> ((Option<Status>, Residuals), Unscaled) {
    let (tau, kappa) = (state.tau(), state.kappa());
    let dir = unscale(ws, state);
    let (a, b, c) = (problem.a(), problem.b(), problem.c());

    // Undefined while τ = 0; reported as infinite.
    let mut res = Residuals {
        primal: f64::INFINITY,
        dual: f64::INFINITY,
        gap: f64::INFINITY,
    };
    if tau > 0.0 {
        let mut pr: Vec<f64> = b
            .iter()
            .zip(&dir.mu)
            .map(|(bi, mi)| mi / tau - bi)
            .collect();
        a.gemv(1.0 / tau, &dir.nu, &mut pr);
        let mut dr = c.to_vec();
        a.gemv_t(1.0 / tau, &dir.eta, &mut dr);
        let cx = dot(c, &dir.nu) / tau;
        let by = dot(b, &dir.eta) / tau;
        res = Residuals {
            primal: norm2(&pr) / (1.0 + norm2(b)),
            dual: norm2(&dr) / (1.0 + norm2(c)),
            gap: (cx + by).abs() / (1.0 + cx.abs() + by.abs()),
        };
        if tau > TAU_COLLAPSE * kappa && res.primal <= eps && res.dual <= eps && res.gap <= eps {
            return ((Some(Status::Optimal), res), dir);
        }
    }
    if tau <= TAU_COLLAPSE * kappa {
        let by = dot(b, &dir.eta);
        if by < 0.0 {
            let mut aty = vec![0.0; problem.n()];
            a.gemv_t(1.0, &dir.eta, &mut aty);
            if norm2(&aty) <= eps * norm2(&dir.eta) {
                return ((Some(Status::PrimalInfeasible), res), dir);
            }
        }
        let cx = dot(c, &dir.nu);
        if cx < 0.0 {
            let mut r = dir.mu.clone();
            a.gemv(1.0, &dir.nu, &mut r);
            if norm2(&r) <= eps * norm2(&dir.nu) {
                return ((Some(Status::DualInfeasible), res), dir);
            }
        }
    }
    ((None, res), dir)
}

fn finish(
    status: Status,
    problem: &ConicProblem,
    state: &IterateState,
    dir: Unscaled,
    res: Residuals,
) -> SolveResult {
    let mut out = SolveResult {
        status,
        primal: None,
        dual: None,
        slack: None,
        certificate: None,
        residuals: res,
        objective: None,
        iterations: state.iteration,
    };
    match status {
        Status::Optimal => {
            let tau = state.tau();
            let nu: Vec<f64> = dir.nu.iter().map(|x| x / tau).collect();
            let mut slack = problem.b().to_vec();
            problem.a().gemv(-1.0, &nu, &mut slack);
            out.objective = Some(dot(problem.c(), &nu));
            out.primal = Some(nu);
            out.dual = Some(dir.eta.iter().map(|x| x / tau).collect());
            out.slack = Some(slack);
        }
        Status::PrimalInfeasible => {
            let s = -dot(problem.b(), &dir.eta);
            out.certificate = Some(dir.eta.iter().map(|x| x / s).collect());
        }
        Status::DualInfeasible => {
            let s = -dot(problem.c(), &dir.nu);
            out.certificate = Some(dir.nu.iter().map(|x| x / s).collect());
        }
        Status::MaxIterReached | Status::Stopped => {}
    }
    out
}
