//! Monotone Picard iteration for the half-space problem with a point source
//! at `e_N`:
//! `v_n = G[v_{n-1}^p] + k G[delta_{e_N}]`, `v_0 = k G[delta_{e_N}]`.
//!
//! Iterates are stored through the ratio `rho = v / G[delta_{e_N}]`, which is
//! bounded and smooth in `(ln R, t)` on the sample grid. One step is then
//! `rho_n = M rho_{n-1}^p + k` with the nonnegative matrix of
//! [`HalfSpaceOperator`], so monotonicity and barrier domination carry over
//! exactly to the discrete iterates.

pub mod grid;
pub mod operator;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelConstants, KernelError, Kernels};
use crate::params::{serrin_exponents, DomainKind, ProblemParams};
use crate::quad::{Bump, QuadError, QuadSpec, RadialLaplacianTable};

pub use grid::{GridError, SampleGrid};
pub use operator::{axisymmetric_rule, HalfSpaceOperator, MeridianNode, OperatorOptions};

/// Safety factor applied to the sampled supremum of `G[G[delta]^p] / G[delta]`.
pub const C14_SAFETY: f64 = 1.1;
/// Consecutive growing increments that count as divergence.
pub const DIVERGENCE_STREAK: usize = 5;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_STOP_TOL: f64 = 1e-6;
/// Relative growth of the sampled supremum under refinement that is read as
/// an unbounded ratio.
pub const SUP_GROWTH_LIMIT: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PicardError {
    #[error("exponent p = {0} must exceed 1")]
    InvalidExponent(f64),
    #[error("p = {p} is outside the existence window [{lower}, {upper})")]
    WindowViolation { p: f64, lower: f64, upper: f64 },
    #[error("the Picard construction is posed on the half space with N >= 2")]
    NotHalfSpace,
    #[error("sampled supremum grows under refinement: {coarse} -> {fine}")]
    SupUnbounded { coarse: f64, fine: f64 },
    #[error("increments grew for {DIVERGENCE_STREAK} consecutive steps (step {n})")]
    IterationDiverged { n: usize },
    #[error("no convergence after {max_iter} steps, last increment {increment}")]
    MaxIterExceeded { max_iter: usize, increment: f64 },
    #[error("iterate decreased at step {n}, grid point {index}")]
    NotMonotone { n: usize, index: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

fn check_problem(params: &ProblemParams) -> Result<(), PicardError> {
    if params.domain() != DomainKind::HalfSpace || params.dim_n() < 2 {
        return Err(PicardError::NotHalfSpace);
    }
    if !(params.p() > 1.0) {
        return Err(PicardError::InvalidExponent(params.p()));
    }
    if !params.in_existence_window() {
        let (upper, lower) = serrin_exponents(params);
        return Err(PicardError::WindowViolation { p: params.p(), lower, upper });
    }
    Ok(())
}

/// Kernels, grid and assembled operator for one parameter set.
#[derive(Debug, Clone)]
pub struct PicardProblem {
    pub kernels: Kernels,
    pub grid: SampleGrid,
    pub operator: HalfSpaceOperator,
}

impl PicardProblem {
    pub fn new(params: ProblemParams, constants: KernelConstants, grid: SampleGrid) -> Result<Self, PicardError> {
        check_problem(&params)?;
        if grid.dim() != params.dim_n() {
            return Err(PicardError::InvalidInput("grid dimension differs from N".into()));
        }
        let kernels = Kernels::new(params, constants)?;
        let operator = HalfSpaceOperator::build(&kernels, &grid);
        Ok(PicardProblem { kernels, grid, operator })
    }

    /// Default constants on the standard grid of the given refinement level.
    pub fn standard(params: ProblemParams, level: u32) -> Result<Self, PicardError> {
        let grid = SampleGrid::standard(params.dim_n(), level)?;
        PicardProblem::new(params, KernelConstants::for_params(&params), grid)
    }

    pub fn params(&self) -> &ProblemParams {
        self.kernels.params()
    }
}

/// Sub-regions of the half space used to report where the ratio peaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `|x - e_N| < 1/2`
    NearSource,
    /// `x_N < 1/4`
    BoundaryLayer,
    /// `|x| > 8`, `x_N >= 1/4`
    FarField,
    Compact,
}

pub fn region_of(x: &[f64]) -> Region {
    let n = x.len();
    let xn = x[n - 1];
    let r_src = (x[..n - 1].iter().map(|v| v * v).sum::<f64>() + (xn - 1.0).powi(2)).sqrt();
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r_src < 0.5 {
        Region::NearSource
    } else if xn < 0.25 {
        Region::BoundaryLayer
    } else if r > 8.0 {
        Region::FarField
    } else {
        Region::Compact
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C14Estimate {
    /// `C14_SAFETY` times the largest sampled ratio.
    pub c14: f64,
    pub sup_ratio: f64,
    /// Largest sampled ratio per region, `None` where no sample falls.
    pub region_sup: Vec<(Region, Option<f64>)>,
    /// Sampled supremum on each grid of the refinement ladder.
    pub ladder: Vec<f64>,
}

/// Samples `R(x) = G[G[delta]^p](x) / G[delta](x)` on each grid of a
/// refinement ladder (coarse first) and returns the safety-scaled supremum of
/// the finest one. A supremum that grows by more than [`SUP_GROWTH_LIMIT`]
/// from one rung to the next is reported as unbounded.
pub fn estimate_c14(ladder: &[&PicardProblem]) -> Result<C14Estimate, PicardError> {
    let finest = ladder.last().ok_or_else(|| PicardError::InvalidInput("empty refinement ladder".into()))?;
    let sups: Vec<f64> = ladder
        .iter()
        .map(|pr| pr.operator.row_sums().into_iter().fold(0.0, f64::max))
        .collect();
    if sups.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(PicardError::SupUnbounded { coarse: sups[0], fine: f64::INFINITY });
    }
    for w in sups.windows(2) {
        if w[1] > w[0] * (1.0 + SUP_GROWTH_LIMIT) {
            return Err(PicardError::SupUnbounded { coarse: w[0], fine: w[1] });
        }
    }
    let rows = finest.operator.row_sums();
    let regions = [Region::NearSource, Region::BoundaryLayer, Region::FarField, Region::Compact];
    let region_sup = regions
        .iter()
        .map(|&reg| {
            let m = finest
                .grid
                .points
                .iter()
                .zip(&rows)
                .filter(|(x, _)| region_of(x) == reg)
                .map(|(_, r)| *r)
                .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
            (reg, m)
        })
        .collect();
    let sup_ratio = *sups.last().unwrap();
    Ok(C14Estimate { c14: C14_SAFETY * sup_ratio, sup_ratio, region_sup, ladder: sups })
}

/// Thresholds for the barrier `w_t = t k^p G[G[delta]^p] + k G[delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub c14: f64,
    pub t: f64,
    pub k: f64,
    pub kp: f64,
    pub tp: f64,
    p: f64,
}

impl BarrierParams {
    /// Same thresholds with source mass `k`.
    pub fn with_k(&self, k: f64) -> Self {
        BarrierParams { k, ..*self }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `(c14 t k^(p-1) + 1)^p - t`; nonpositive when `w_t` is a supersolution.
    pub fn supersolution_gap(&self) -> f64 {
        (self.c14 * self.t * self.k.powf(self.p - 1.0) + 1.0).powf(self.p) - self.t
    }

    /// Relative gap at the critical pair `(kp, tp)`; zero up to rounding.
    pub fn criticality_defect(&self) -> f64 {
        let lhs = (self.c14 * self.tp * self.kp.powf(self.p - 1.0) + 1.0).powf(self.p);
        (lhs - self.tp).abs() / self.tp
    }
}

/// `kp = (1/(c14 p))^(1/(p-1)) (p-1)/p` and `tp = (p/(p-1))^p`, returned
/// with `k = kp`, `t = tp`.
pub fn barrier_thresholds(c14: f64, params: &ProblemParams) -> Result<BarrierParams, PicardError> {
    let p = params.p();
    if !(p > 1.0) {
        return Err(PicardError::InvalidExponent(p));
    }
    if !(c14 > 0.0 && c14.is_finite()) {
        return Err(PicardError::InvalidInput(format!("c14 must be positive, got {c14}")));
    }
    let kp = (1.0 / (c14 * p)).powf(1.0 / (p - 1.0)) * (p - 1.0) / p;
    let tp = (p / (p - 1.0)).powf(p);
    Ok(BarrierParams { c14, t: tp, k: kp, kp, tp, p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardState {
    pub n: usize,
    pub k: f64,
    /// `v_n` at the grid points.
    pub v: Vec<f64>,
    /// `v_n / G[delta_{e_N}]` at the grid points.
    pub ratio: Vec<f64>,
    /// `sup |v_n - v_{n-1}|` for `n = 1, 2, ...`
    pub increments: Vec<f64>,
    /// Barrier `w_t` at the grid points, when one was supplied.
    pub barrier: Option<Vec<f64>>,
    /// Every iterate stayed below the barrier (true when there is none).
    pub barrier_held: bool,
}

impl PicardState {
    pub fn converged_increment(&self) -> f64 {
        self.increments.last().copied().unwrap_or(0.0)
    }

    /// Geometric mean ratio of the last few increments.
    pub fn contraction_rate(&self) -> Option<f64> {
        let inc: Vec<f64> = self.increments.iter().copied().filter(|d| *d > 0.0).collect();
        if inc.len() < 4 {
            return None;
        }
        let m = inc.len();
        let start = m.saturating_sub(10).max(1);
        Some((inc[m - 1] / inc[start - 1]).powf(1.0 / (m - start) as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationControl {
    pub max_iter: usize,
    pub stop_tol: f64,
}

impl Default for IterationControl {
    fn default() -> Self {
        IterationControl { max_iter: DEFAULT_MAX_ITER, stop_tol: DEFAULT_STOP_TOL }
    }
}

/// Discrete barrier ratio `t k^p (M 1) + k`.
pub fn barrier_ratio(operator: &HalfSpaceOperator, barrier: &BarrierParams) -> Vec<f64> {
    let scale = barrier.t * barrier.k.powf(operator.p());
    operator.row_sums().into_iter().map(|m| scale * m + barrier.k).collect()
}

fn sup_increment(gd: &[f64], new: &[f64], old: &[f64]) -> f64 {
    gd.iter().zip(new.iter().zip(old)).map(|(g, (a, b))| g * (a - b).abs()).fold(0.0, f64::max)
}

/// Runs the monotone iteration from `v_0 = k G[delta]`. When `barrier` is
/// given, its `t` is used with the run's `k` and domination is checked at
/// every step.
pub fn picard_run(
    problem: &PicardProblem,
    k: f64,
    barrier: Option<&BarrierParams>,
    control: IterationControl,
) -> Result<PicardState, PicardError> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(PicardError::InvalidInput(format!("source mass must be nonnegative, got {k}")));
    }
    let op = &problem.operator;
    let p = op.p();
    let gd = op.gdelta();
    let n = op.size();
    let omega = barrier.map(|b| barrier_ratio(op, &b.with_k(k)));
    let mut rho = vec![k; n];
    let mut next = vec![0.0; n];
    let mut powered = vec![0.0; n];
    let mut increments = Vec::new();
    let mut barrier_held = omega.as_ref().map_or(true, |w| rho.iter().zip(w).all(|(r, w)| r <= w));
    let mut streak = 0;
    // every iterate equals k at e_N
    let center = k.powf(p);
    for step in 1..=control.max_iter {
        for (q, r) in powered.iter_mut().zip(&rho) {
            *q = r.powf(p);
        }
        op.apply(&powered, center, &mut next);
        for v in next.iter_mut() {
            *v += k;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(PicardError::IterationDiverged { n: step });
        }
        if let Some(index) = next.iter().zip(&rho).position(|(a, b)| a < b) {
            return Err(PicardError::NotMonotone { n: step, index });
        }
        if let Some(w) = &omega {
            barrier_held &= next.iter().zip(w).all(|(r, w)| r <= w);
        }
        let inc = sup_increment(gd, &next, &rho);
        if increments.last().is_some_and(|&last| inc > last) {
            streak += 1;
        } else {
            streak = 0;
        }
        increments.push(inc);
        std::mem::swap(&mut rho, &mut next);
        if streak >= DIVERGENCE_STREAK {
            return Err(PicardError::IterationDiverged { n: step });
        }
        if inc < control.stop_tol {
            let v = rho.iter().zip(gd).map(|(r, g)| r * g).collect();
            let barrier = omega.map(|w| w.iter().zip(gd).map(|(r, g)| r * g).collect());
            return Ok(PicardState { n: step, k, v, ratio: rho, increments, barrier, barrier_held });
        }
    }
    Err(PicardError::MaxIterExceeded { max_iter: control.max_iter, increment: increments.last().copied().unwrap_or(0.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub steps: usize,
    /// Smallest `(descending iterate - converged state) / G[delta]` seen.
    pub min_margin: f64,
    pub holds: bool,
}

/// Iterates downward from the barrier seed and checks that no descending
/// iterate falls below the converged state.
pub fn minimality_check(
    problem: &PicardProblem,
    state: &PicardState,
    barrier: &BarrierParams,
    steps: usize,
) -> MinimalityReport {
    let op = &problem.operator;
    let p = op.p();
    let mut rho = barrier_ratio(op, &barrier.with_k(state.k));
    let mut powered = vec![0.0; rho.len()];
    let mut next = vec![0.0; rho.len()];
    let margin = |r: &[f64]| r.iter().zip(&state.ratio).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    let mut min_margin = margin(&rho);
    let center = state.k.powf(p);
    for _ in 0..steps {
        for (q, r) in powered.iter_mut().zip(&rho) {
            *q = r.powf(p);
        }
        op.apply(&powered, center, &mut next);
        for v in next.iter_mut() {
            *v += state.k;
        }
        std::mem::swap(&mut rho, &mut next);
        min_margin = min_margin.min(margin(&rho));
    }
    MinimalityReport { steps, min_margin, holds: min_margin >= 0.0 }
}

/// Both sides of the weak formulation
/// `int v (-Delta)^a xi = int v^p xi + k xi(e_N)` for a converged state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakFormCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl WeakFormCheck {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    pub fn relative_residual(&self) -> f64 {
        self.residual() / self.lhs.abs().max(self.rhs.abs()).max(f64::MIN_POSITIVE)
    }

    /// `|lhs - rhs| <= tol * max(|lhs|, 1)`
    pub fn passes(&self, tol: f64) -> bool {
        self.residual() <= tol * self.lhs.abs().max(1.0)
    }
}

/// Subdivision of the grid cells for the weak-form integrals.
pub const WEAK_FORM_SPLIT: usize = 6;

/// Evaluates both sides of the weak formulation with `v` interpolated from
/// the grid through the ratio to `G[delta]`. The bump must be centered on the
/// `e_N` axis (the iterates are axially symmetric) and supported in the open
/// half space.
pub fn verify_weak_form(
    problem: &PicardProblem,
    state: &PicardState,
    xi: &Bump,
    spec: &QuadSpec,
) -> Result<WeakFormCheck, PicardError> {
    let params = problem.params();
    let dim = params.dim_n();
    if xi.center.len() != dim || xi.center[..dim - 1].iter().any(|c| *c != 0.0) {
        return Err(PicardError::InvalidInput("bump must be centered on the e_N axis".into()));
    }
    if !(xi.center[dim - 1] > xi.radius) {
        return Err(PicardError::InvalidInput("bump must be supported in the open half space".into()));
    }
    if state.ratio.len() != problem.grid.len() {
        return Err(PicardError::InvalidInput("state does not match the grid".into()));
    }
    let p = params.p();
    let a = params.alpha();
    let n = dim as f64;
    let kernels = &problem.kernels;
    let grid = &problem.grid;
    let center_n = xi.center[dim - 1];
    let v_at = |node: &MeridianNode| {
        let g = kernels.halfspace_green_fast(node.rho * node.rho, node.yn, 1.0);
        grid.interpolate_cubic(&state.ratio, state.k, node.rho, node.t, problem.operator.gamma()) * g
    };
    let dist = |node: &MeridianNode| (node.ys * node.ys + (node.yn - center_n).powi(2)).sqrt();

    let table = RadialLaplacianTable::new(xi, spec, params)?;
    let lhs: f64 = axisymmetric_rule(grid, 2.0 * a, WEAK_FORM_SPLIT)
        .iter()
        .map(|node| node.weight * v_at(node) * table.eval(dist(node)))
        .sum();
    let rhs_int: f64 = axisymmetric_rule(grid, n + (2.0 * a - n) * p, WEAK_FORM_SPLIT)
        .iter()
        .map(|node| {
            let s = dist(node);
            if s >= xi.radius {
                0.0
            } else {
                node.weight * v_at(node).powf(p) * xi.profile(s)
            }
        })
        .sum();
    let mut e_n = vec![0.0; dim];
    e_n[dim - 1] = 1.0;
    Ok(WeakFormCheck { lhs, rhs: rhs_int + state.k * xi.eval(&e_n) })
}

/// Pointwise comparison of a coarse state with a refined one interpolated at
/// the coarse points: `sup |v_fine - v_coarse| / sup |v_coarse|`.
pub fn refinement_difference(coarse: &PicardProblem, cs: &PicardState, fine: &PicardProblem, fs: &PicardState) -> f64 {
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let gd = coarse.operator.gdelta();
    for i in 0..coarse.grid.len() {
        let (r, t) = coarse.grid.polar(i);
        let vf = fine.grid.interpolate(&fs.ratio, r, t) * gd[i];
        diff = diff.max((vf - cs.v[i]).abs());
        scale = scale.max(cs.v[i].abs());
    }
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Integrability ladder `u^p in L^{q_i}` with `p_i = p q_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapTrace {
    /// `(q_i, p_i)` for `i = 0..=i0`.
    pub steps: Vec<(f64, f64)>,
    /// First index with `N - 2 alpha q_i <= 0`.
    pub i0: usize,
    /// `q_{i+1} / q_i`
    pub ratios: Vec<f64>,
    /// `N / (p (N - 2 alpha q_0))`, a lower bound for every ratio.
    pub ratio_bound: f64,
}

/// Bootstrap `p_{i+1} = N q_i / (N - 2 alpha q_i)`, `q_{i+1} = p_{i+1} / p`
/// from `q_0 = (1 + N / (p (N - 2 alpha))) / 2` until `N - 2 alpha q_i <= 0`.
pub fn regularity_bootstrap(params: &ProblemParams) -> Result<BootstrapTrace, PicardError> {
    let n = params.n();
    let a = params.alpha();
    let p = params.p();
    let upper = n / (n - 2.0 * a);
    if !(p > 1.0 && p < upper) {
        return Err(PicardError::InvalidExponent(p));
    }
    let q0 = 0.5 * (1.0 + upper / p);
    let ratio_bound = n / (p * (n - 2.0 * a * q0));
    let mut steps = vec![(q0, p * q0)];
    let mut ratios = Vec::new();
    let mut q = q0;
    while n - 2.0 * a * q > 0.0 {
        let pi = n * q / (n - 2.0 * a * q);
        let qn = pi / p;
        ratios.push(qn / q);
        steps.push((qn, pi));
        q = qn;
        if steps.len() > 10_000 {
            return Err(PicardError::InvalidInput("bootstrap did not terminate".into()));
        }
    }
    Ok(BootstrapTrace { i0: steps.len() - 1, steps, ratios, ratio_bound })
}
