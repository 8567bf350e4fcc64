//! Discrete Dirichlet problem `t sigma_k[u] + (1-t) Lap u = psi`, its
//! Jacobian, damped Newton, continuation in `t`, and the barrier problems.

mod barrier;
mod jacobian;
pub mod linalg;
mod newton;
pub mod psi;

use serde::Serialize;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::geom::{lapse, ExtrinsicState};
use crate::hchart::{FieldRole, Grid, Partials, ScalarField};

pub use barrier::{
    barrier_sandwich_check, frozen_psi, solve_lower_barrier, solve_upper_barrier,
    uniqueness_probe, ProbeRun, SandwichReport, UniquenessReport,
};
pub use jacobian::{analytic_jacobian, analytic_jvp, assemble_jacobian, SparseJacobian};
pub use newton::{
    continuation_solve, continuation_solve_from, damped_newton, harmonic_extension, NewtonReport,
};
pub use psi::{BoundaryData, Expr, PsiFamily, PsiSpec, PsiValue, RadialProfile};

/// Dirichlet problem data on a polar grid.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub k: usize,
    pub psi: PsiSpec,
    pub boundary: BoundaryData,
}

impl ProblemSpec {
    pub fn new(grid: Grid, k: usize, psi: PsiSpec, boundary: BoundaryData) -> Result<Self> {
        let n = grid.chart().dim();
        if n != 2 {
            return Err(Error::Domain(format!("grids are two-dimensional, got n = {n}")));
        }
        if !(1..=n).contains(&k) {
            return Err(Error::OutOfRange(format!("k = {k} must lie in 1..={n}")));
        }
        psi.check_grid(&grid)?;
        let rb = grid.boundary_rho();
        let phi = boundary.boundary_value(rb);
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::Domain(format!("boundary value {phi} must be positive")));
        }
        let slope = boundary.slope_ratio(rb);
        if !(slope < 1.0) {
            return Err(Error::NotSpacelike { node: None, ratio: slope });
        }
        Ok(Self { grid, k, psi, boundary })
    }

    pub fn n(&self) -> usize {
        self.grid.chart().dim()
    }

    /// Prescribed value at a boundary node.
    pub fn phi(&self) -> f64 {
        self.boundary.boundary_value(self.grid.boundary_rho())
    }

    /// Closed-form extension of the boundary data to every node.
    pub fn phi_extension(&self) -> ScalarField {
        let rb = self.grid.boundary_rho();
        ScalarField::from_fn(&self.grid, FieldRole::Diagnostic, |rho, _| {
            self.boundary.extension(rho, rb)
        })
    }

    /// Constant `psi` and constant `phi`, where a hyperboloid solves the problem exactly.
    pub fn is_exact_case(&self) -> bool {
        matches!(self.boundary, BoundaryData::Constant { .. })
            && matches!(&self.psi.family, PsiFamily::Power { p, h: Expr::Const(_) } if *p == 0.0)
    }

    /// `sup |psi|` evaluated on the constant graph `u = phi`.
    pub fn psi_scale(&self) -> f64 {
        let c = self.phi();
        (0..self.grid.len())
            .map(|node| {
                let (rho, ang) = self.grid.position(node);
                self.psi.eval(node, rho, ang, c, c).value.abs()
            })
            .fold(0.0, f64::max)
    }

    /// Same problem with a different order and right-hand side.
    pub fn with_psi(&self, k: usize, psi: PsiSpec) -> Result<Self> {
        Self::new(self.grid.clone(), k, psi, self.boundary.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    /// Residual infinity-norm target; `None` picks the default for the problem.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub max_newton: usize,
    pub damping_floor: f64,
    /// Try Newton at `t = 1` from the initial guess before walking from `t = 0`.
    pub direct_first: bool,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            dt_init: 0.25,
            dt_min: 1e-3,
            tolerance: None,
            max_newton: 25,
            damping_floor: 2f64.powi(-20),
            direct_first: true,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_init > 0.0 && self.dt_init <= 1.0) {
            return Err(Error::OutOfRange(format!("dt_init = {} not in (0, 1]", self.dt_init)));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init) {
            return Err(Error::OutOfRange(format!("dt_min = {} not in (0, dt_init]", self.dt_min)));
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::OutOfRange(format!("tolerance = {tol} must be positive")));
            }
        }
        if self.max_newton == 0 {
            return Err(Error::OutOfRange("max_newton must be positive".into()));
        }
        if !(self.damping_floor > 0.0 && self.damping_floor < 1.0) {
            return Err(Error::OutOfRange(format!(
                "damping_floor = {} not in (0, 1)",
                self.damping_floor
            )));
        }
        Ok(())
    }

    /// `1e-10` for exact-solution cases, `1e-8 sup|psi|` otherwise.
    pub fn tolerance_for(&self, spec: &ProblemSpec) -> f64 {
        self.tolerance.unwrap_or_else(|| {
            if spec.is_exact_case() {
                1e-10
            } else {
                1e-8 * spec.psi_scale().max(f64::MIN_POSITIVE)
            }
        })
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Problem(#[from] Error),
    #[error("inadmissible start: {0}")]
    InadmissibleStart(Error),
    #[error("no convergence after {iterations} Newton iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("damping stalled after {iterations} Newton iterations (residual {residual:e})")]
    Stalled { iterations: usize, residual: f64 },
    #[error("continuation step floor reached at t = {t}")]
    StepFloor { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    StepFloor,
    InadmissibleStart,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub t: f64,
    pub iterations: usize,
    /// Absent when the attempt ended without a residual to report.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Extremes of the node-wise geometry of a solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSummary {
    pub spacelike_gap: f64,
    pub min_v: f64,
    pub sup_w: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub sigma_k_min: f64,
    pub sigma_k_max: f64,
    pub sup_norm_a: f64,
    /// Every interior node lies in the cone of the problem order.
    pub admissible: bool,
}

impl StateSummary {
    pub fn compute(u: &ScalarField, spec: &ProblemSpec) -> Result<Self> {
        let grid = &spec.grid;
        let mut s = StateSummary {
            spacelike_gap: 0.0,
            min_v: f64::INFINITY,
            sup_w: 0.0,
            lambda_max: f64::NEG_INFINITY,
            lambda_min: f64::INFINITY,
            sigma_k_min: f64::INFINITY,
            sigma_k_max: f64::NEG_INFINITY,
            sup_norm_a: 0.0,
            admissible: true,
        };
        for node in 0..grid.len() {
            let (_, st) = node_state(u.values(), grid, node)?;
            s.spacelike_gap = s.spacelike_gap.max((1.0 - st.v * st.v).max(0.0).sqrt());
            s.min_v = s.min_v.min(st.v);
            s.sup_w = s.sup_w.max(st.w);
            if grid.is_boundary(node) {
                continue;
            }
            s.lambda_max = s.lambda_max.max(st.lambda[0]);
            s.lambda_min = s.lambda_min.min(st.lambda[1]);
            let sk = st.sigma_k(spec.k);
            s.sigma_k_min = s.sigma_k_min.min(sk);
            s.sigma_k_max = s.sigma_k_max.max(sk);
            s.sup_norm_a = s.sup_norm_a.max(st.norm_a2.sqrt());
            s.admissible &= st.is_admissible(spec.k);
        }
        Ok(s)
    }
}

/// Outcome of a continuation run. `u` is the last accepted state.
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    #[serde(skip)]
    pub u: ScalarField,
    pub t_reached: f64,
    pub trace: Vec<TraceEntry>,
    pub total_newton_iterations: usize,
    pub tolerance: f64,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<StateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Accepted `t` values never decrease.
    pub fn t_monotone(&self) -> bool {
        let ts: Vec<f64> = self.trace.iter().filter(|e| e.accepted).map(|e| e.t).collect();
        ts.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Partials and geometry at `node`, with the node attached to any error.
pub(crate) fn node_state(values: &[f64], grid: &Grid, node: usize) -> Result<(Partials, ExtrinsicState)> {
    let p = grid.partials(values, node);
    let st = ExtrinsicState::from_partials(&p).map_err(|e| match e {
        Error::InvalidGraph { value, .. } => Error::InvalidGraph { node, value },
        e => e.at_node(node),
    })?;
    Ok((p, st))
}

/// Residual of one row.
pub(crate) fn node_residual(values: &[f64], t: f64, spec: &ProblemSpec, node: usize) -> Result<f64> {
    let grid = &spec.grid;
    if grid.is_boundary(node) {
        return Ok(values[node] - spec.phi());
    }
    let (p, st) = node_state(values, grid, node)?;
    let (rho, ang) = grid.position(node);
    let psi = spec.psi.eval(node, rho, ang, p.u, st.support);
    let mut r = -psi.value;
    if t != 0.0 {
        r += t * st.sigma_k(spec.k);
    }
    if t != 1.0 {
        r += (1.0 - t) * p.laplacian();
    }
    if !r.is_finite() {
        return Err(Error::NonFinite(node));
    }
    Ok(r)
}

/// Residual vector; with `guard`, also demands spacelikeness everywhere and,
/// for `t > 0`, admissibility at interior nodes.
pub(crate) fn residual_vec(values: &[f64], t: f64, spec: &ProblemSpec, guard: bool) -> Result<Vec<f64>> {
    let grid = &spec.grid;
    let mut out = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        if !values[node].is_finite() {
            return Err(Error::NonFinite(node));
        }
        if guard {
            if grid.is_boundary(node) {
                let p = grid.partials(values, node);
                if !(p.u > 0.0) {
                    return Err(Error::InvalidGraph { node, value: p.u });
                }
                lapse(p.u, p.gradient().norm_sq).map_err(|e| e.at_node(node))?;
            } else if t > 0.0 {
                let (_, st) = node_state(values, grid, node)?;
                if !st.is_admissible(spec.k) {
                    return Err(Error::InadmissibleNode { node, k: spec.k });
                }
            }
        }
        out.push(node_residual(values, t, spec, node)?);
    }
    Ok(out)
}

/// `R(u) = t sigma_k[u] + (1-t) Lap u - psi(x, u, theta)` in the interior and
/// `u - phi` on the boundary ring.
pub fn assemble_residual(u: &ScalarField, t: f64, spec: &ProblemSpec) -> Result<ScalarField> {
    if u.len() != spec.grid.len() {
        return Err(Error::Domain("field does not match grid".into()));
    }
    Ok(ScalarField::from_raw(FieldRole::Residual, residual_vec(u.values(), t, spec, false)?))
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Right-hand side that makes the radial profile an exact solution of the
/// order-`k` equation: the geometry kernel applied to analytic derivatives.
pub fn manufactured_psi(grid: &Grid, profile: &RadialProfile, k: usize) -> Result<Vec<f64>> {
    (0..grid.len())
        .map(|node| {
            let rho = grid.position(node).0;
            let p = Partials {
                rho,
                u: profile.value(rho),
                u_r: profile.derivative(rho),
                u_t: 0.0,
                u_rr: profile.second_derivative(rho),
                u_rt: 0.0,
                u_tt: 0.0,
            };
            let st = ExtrinsicState::from_partials(&p).map_err(|e| e.at_node(node))?;
            Ok(st.sigma_k(k))
        })
        .collect()
}

/// `sigma_k` of the sampled profile computed by the discrete geometry kernel
/// on a grid `refine` times finer in both directions, transferred to the
/// nodes of `grid`. With `refine` even every coarse node lies midway between
/// two fine rings on a shared angular ray, and the two values are averaged.
pub fn manufactured_psi_refined(
    grid: &Grid,
    profile: &RadialProfile,
    k: usize,
    refine: usize,
) -> Result<Vec<f64>> {
    if refine == 0 || refine % 2 != 0 {
        return Err(Error::OutOfRange(format!("refinement factor {refine} must be even")));
    }
    let fine = Grid::new(*grid.chart(), grid.n_rho() * refine, grid.n_theta() * refine)?;
    let u = ScalarField::from_fn(&fine, FieldRole::Graph, |rho, _| profile.value(rho));
    let fine_sigma = |m: usize, jf: usize| -> Result<f64> {
        let node = fine.node(m, jf);
        Ok(node_state(u.values(), &fine, node)?.1.sigma_k(k))
    };
    (0..grid.len())
        .map(|node| {
            let (i, j) = grid.coords(node);
            let m0 = refine * i + refine / 2 - 1;
            Ok(0.5 * (fine_sigma(m0, refine * j)? + fine_sigma(m0 + 1, refine * j)?))
        })
        .collect()
}
