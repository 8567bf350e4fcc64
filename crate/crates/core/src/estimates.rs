//! Checks of the a-priori estimates and identities on computed solutions:
//! the gradient bound with explicit constants, curvature ratios, the interior
//! profile of `(phi - u) lambda_1`, the Laplacian of the support quantity and
//! the Maclaurin ordering behind the barriers.

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{extrinsic_states, ExtrinsicState};
use crate::hchart::{FieldRole, Grid, ScalarField};
use crate::solver::ProblemSpec;
use crate::symk::{binomial, newton_maclaurin_check, sigma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientConstants {
    /// `(n+1) / (1 - rho^2)`
    pub c: f64,
    pub s1: f64,
    pub s2: f64,
}

/// `S_1` is the larger root of `S^2 - S = c (2S + 1)`;
/// `S_2 = 1.01 max(sup|D psi| / (k inf psi), S_1)`.
pub fn gradient_constants(
    n: usize,
    rho_gap: f64,
    sup_dpsi: f64,
    inf_psi: f64,
    k: usize,
) -> Result<GradientConstants> {
    if !(0.0..1.0).contains(&rho_gap) {
        return Err(Error::OutOfRange(format!("spacelike gap {rho_gap} not in [0, 1)")));
    }
    if !(inf_psi > 0.0) {
        return Err(Error::Domain(format!("inf psi = {inf_psi} must be positive")));
    }
    if k == 0 || !(sup_dpsi >= 0.0) {
        return Err(Error::OutOfRange("k must be positive and sup|D psi| nonnegative".into()));
    }
    let c = (n as f64 + 1.0) / (1.0 - rho_gap * rho_gap);
    let b = 1.0 + 2.0 * c;
    let s1 = 0.5 * (b + (b * b + 4.0 * c).sqrt());
    let s2 = 1.01 * (sup_dpsi / (k as f64 * inf_psi)).max(s1);
    Ok(GradientConstants { c, s1, s2 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub sup_w: f64,
    pub sup_boundary_w: f64,
    pub sup_boundary_phi: f64,
    pub diameter: f64,
    /// `sup_bd W exp(S_2 (2 sup_bd |phi| + diam))`
    pub bound: f64,
    pub pass: bool,
}

/// `sup W <= sup_bd W exp(S_2 (2 sup_bd |phi| + diam))`.
pub fn gradient_estimate_check(states: &[ExtrinsicState], grid: &Grid, s2: f64) -> GradientCheck {
    let mut sup_w = 0.0f64;
    let mut sup_bw = 0.0f64;
    let mut sup_phi = 0.0f64;
    for (node, st) in states.iter().enumerate() {
        sup_w = sup_w.max(st.w);
        if grid.is_boundary(node) {
            sup_bw = sup_bw.max(st.w);
            sup_phi = sup_phi.max(st.u.abs());
        }
    }
    let diameter = grid.geodesic_diameter();
    let bound = sup_bw * (s2 * (2.0 * sup_phi + diameter)).exp();
    GradientCheck {
        sup_w,
        sup_boundary_w: sup_bw,
        sup_boundary_phi: sup_phi,
        diameter,
        bound,
        pass: sup_w <= bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureRatio {
    pub sup_norm_a: f64,
    pub sup_boundary_norm_a: f64,
    /// `sup ||A|| / (1 + sup_bd ||A||)`
    pub ratio: f64,
}

pub fn curvature_ratio(states: &[ExtrinsicState], grid: &Grid) -> CurvatureRatio {
    let (mut sup, mut sup_b) = (0.0f64, 0.0f64);
    for (node, st) in states.iter().enumerate() {
        let a = st.norm_a2.sqrt();
        if grid.is_boundary(node) {
            sup_b = sup_b.max(a);
        } else {
            sup = sup.max(a);
        }
    }
    CurvatureRatio {
        sup_norm_a: sup,
        sup_boundary_norm_a: sup_b,
        ratio: sup / (1.0 + sup_b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileBand {
    /// Geodesic distance to the boundary circle covered by the band.
    pub distance: [f64; 2],
    pub nodes: usize,
    pub sup_norm_a: f64,
    pub sup_eta_lambda1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorProfile {
    pub bands: Vec<ProfileBand>,
    pub min_eta: f64,
    pub sup_eta_lambda1: f64,
    /// `eta = phi - u` vanishes identically.
    pub degenerate: bool,
    /// `eta < -10 h^2` somewhere.
    pub eta_violation: bool,
}

const BANDS: usize = 5;

/// `sup ||A||` and `sup (phi - u) lambda_1` over five equal shells ordered
/// from the boundary inward. `phi` is extended by its closed form.
pub fn interior_profile(u: &ScalarField, states: &[ExtrinsicState], spec: &ProblemSpec) -> InteriorProfile {
    let grid = &spec.grid;
    let phi = spec.phi_extension();
    let rb = grid.boundary_rho();
    let width = rb / BANDS as f64;
    let mut bands: Vec<ProfileBand> = (0..BANDS)
        .map(|b| ProfileBand {
            distance: [b as f64 * width, (b + 1) as f64 * width],
            nodes: 0,
            sup_norm_a: 0.0,
            sup_eta_lambda1: f64::NEG_INFINITY,
        })
        .collect();
    let (mut min_eta, mut max_abs_eta) = (f64::INFINITY, 0.0f64);
    for node in grid.interior_nodes() {
        let (rho, _) = grid.position(node);
        let d = rb - rho;
        let b = ((d / width) as usize).min(BANDS - 1);
        let eta = phi.values()[node] - u.values()[node];
        min_eta = min_eta.min(eta);
        max_abs_eta = max_abs_eta.max(eta.abs());
        let st = &states[node];
        let band = &mut bands[b];
        band.nodes += 1;
        band.sup_norm_a = band.sup_norm_a.max(st.norm_a2.sqrt());
        band.sup_eta_lambda1 = band.sup_eta_lambda1.max(eta * st.lambda[0]);
    }
    for band in bands.iter_mut().filter(|b| b.nodes == 0) {
        band.sup_eta_lambda1 = 0.0;
    }
    let sup = bands.iter().map(|b| b.sup_eta_lambda1).fold(f64::NEG_INFINITY, f64::max);
    InteriorProfile {
        bands,
        min_eta,
        sup_eta_lambda1: sup,
        degenerate: max_abs_eta <= 1e-12,
        eta_violation: min_eta < -10.0 * grid.d_rho() * grid.d_rho(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportIdentity {
    /// `sup |Lap q - sigma_1 - grad^i sigma_1 <X, X_i> - |A|^2 q|` over
    /// interior nodes, `q = <X, nu> = -u/v`.
    pub residual: f64,
    /// Same expression with `q` replaced by the support function `u/v`.
    pub printed_sign_residual: f64,
    pub note: &'static str,
}

const SIGN_NOTE: &str = "the identity balances for q = <X,nu> = -theta; \
with theta = -<X,nu> in its place the hyperboloid leaves a residual of 2n/R";

/// Discrete check of `Lap_g q = sigma_1 + grad^i sigma_1 <X, X_i> + |A|^2 q`.
///
/// `Lap_g q = g^{ij} (q_{;ij} - C^k_{ij} q_k)` where `C` is the difference of
/// the Levi-Civita connections of `g` and of the hyperbolic metric,
/// `C^k_{ij} = g^{kl} (D_i g_jl + D_j g_il - D_l g_ij) / 2` with
/// `D_k g_ij = 2 u u_k s_ij - u_ik u_j - u_i u_jk`; and `<X, X_i> = -u u_i`.
pub fn support_laplace_identity_check(u: &ScalarField, grid: &Grid) -> Result<SupportIdentity> {
    let states = extrinsic_states(u, grid)?;
    Ok(support_identity_from_states(u, &states, grid))
}

fn support_identity_from_states(u: &ScalarField, states: &[ExtrinsicState], grid: &Grid) -> SupportIdentity {
    let q: Vec<f64> = states.iter().map(|s| -s.support).collect();
    let s1: Vec<f64> = states.iter().map(|s| s.sigma[0]).collect();
    let mut residual = 0.0f64;
    let mut printed = 0.0f64;
    for node in grid.interior_nodes() {
        let st = &states[node];
        let pu = grid.partials(u.values(), node);
        let pq = grid.partials(&q, node);
        let ps = grid.partials(&s1, node);
        let s = pu.rho.sinh();
        let sig = Matrix2::new(1.0, 0.0, 0.0, s * s);
        let du = Vector2::new(pu.u_r, pu.u_t);
        let hu = pu.covariant_hessian();
        // dg[k] = D_k g
        let dg: [Matrix2<f64>; 2] = std::array::from_fn(|k| {
            let col = hu.column(k).into_owned();
            sig * (2.0 * pu.u * du[k]) - col * du.transpose() - du * col.transpose()
        });
        let gi = st.g_inv;
        let dq = Vector2::new(pq.u_r, pq.u_t);
        let mut contraction = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut ck_dq = 0.0;
                for k in 0..2 {
                    let mut c = 0.0;
                    for l in 0..2 {
                        c += gi[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    ck_dq += 0.5 * c * dq[k];
                }
                contraction += gi[(i, j)] * (pq.covariant_hessian()[(i, j)] - ck_dq);
            }
        }
        let ds1 = Vector2::new(ps.u_r, ps.u_t);
        let xxi = -du * pu.u;
        let grad_term = (gi * ds1).dot(&xxi);
        let rhs_common = st.sigma[0] + grad_term;
        residual = residual.max((contraction - rhs_common - st.norm_a2 * q[node]).abs());
        // Laplacian of theta = -q is -contraction
        printed = printed.max((-contraction - rhs_common + st.norm_a2 * q[node]).abs());
    }
    SupportIdentity {
        residual,
        printed_sign_residual: printed,
        note: SIGN_NOTE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaclaurinReport {
    /// Every interior node lies in the cone of the problem order.
    pub admissible: bool,
    pub inadmissible_nodes: usize,
    /// Smallest `(s_k/C)^2 - (s_{k+1}/C)(s_{k-1}/C)` over interior nodes.
    pub newton_slack_min: f64,
    pub newton_holds: bool,
    /// Smallest `sigma_1 - n (sigma_k/C)^{1/k}`.
    pub upper_slack_min: f64,
    /// Smallest `(sigma_k/C)^{n/k} - sigma_n`.
    pub lower_slack_min: f64,
    pub ordering_holds: bool,
}

/// Cone membership, the Newton inequality of order `k` and the Maclaurin
/// ordering `sigma_n <= (sigma_k/C)^{n/k}`, `n (sigma_k/C)^{1/k} <= sigma_1`.
/// Ties are judged with a relative round-off allowance of `1e-12`.
pub fn maclaurin_check(states: &[ExtrinsicState], grid: &Grid, k: usize) -> Result<MaclaurinReport> {
    let mut rep = MaclaurinReport {
        admissible: true,
        inadmissible_nodes: 0,
        newton_slack_min: f64::INFINITY,
        newton_holds: true,
        upper_slack_min: f64::INFINITY,
        lower_slack_min: f64::INFINITY,
        ordering_holds: true,
    };
    for node in grid.interior_nodes() {
        let lambda = &states[node].lambda;
        let n = lambda.len();
        if !crate::symk::gamma_cone_contains(lambda, k) {
            rep.admissible = false;
            rep.inadmissible_nodes += 1;
            continue;
        }
        let (ok, slack) = newton_maclaurin_check(lambda, k)?;
        rep.newton_holds &= ok;
        rep.newton_slack_min = rep.newton_slack_min.min(slack);
        let sk = sigma(lambda, k)? / binomial(n, k);
        let s1 = sigma(lambda, 1)?;
        let sn = sigma(lambda, n)?;
        let upper = s1 - n as f64 * sk.powf(1.0 / k as f64);
        let lower = sk.powf(n as f64 / k as f64) - sn;
        let tol = 1e-12 * s1.abs().max(sn.abs()).max(1.0);
        rep.ordering_holds &= upper >= -tol && lower >= -tol;
        rep.upper_slack_min = rep.upper_slack_min.min(upper);
        rep.lower_slack_min = rep.lower_slack_min.min(lower);
    }
    Ok(rep)
}

/// Everything the harness reports for one solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub spacelike_gap: f64,
    pub sup_dpsi: f64,
    pub inf_psi: f64,
    pub constants: GradientConstants,
    pub gradient: GradientCheck,
    pub curvature: CurvatureRatio,
    pub profile: InteriorProfile,
    pub support_identity: SupportIdentity,
    pub maclaurin: MaclaurinReport,
}

impl EstimateReport {
    pub fn compute(u: &ScalarField, spec: &ProblemSpec) -> Result<Self> {
        let grid = &spec.grid;
        let states = extrinsic_states(u, grid)?;
        let gap = states
            .iter()
            .map(|s| (1.0 - s.v * s.v).max(0.0).sqrt())
            .fold(0.0, f64::max);
        let psi: Vec<f64> = states
            .iter()
            .enumerate()
            .map(|(node, st)| {
                let (rho, ang) = grid.position(node);
                spec.psi.eval(node, rho, ang, st.u, st.support).value
            })
            .collect();
        let psi_field = ScalarField::new(grid, FieldRole::Diagnostic, psi)?;
        let (mut sup_dpsi, mut inf_psi) = (0.0f64, f64::INFINITY);
        for node in grid.interior_nodes() {
            let p = grid.partials(psi_field.values(), node);
            sup_dpsi = sup_dpsi.max(p.gradient().norm_sq.sqrt());
            inf_psi = inf_psi.min(p.u);
        }
        let constants = gradient_constants(spec.n(), gap, sup_dpsi, inf_psi, spec.k)?;
        Ok(Self {
            spacelike_gap: gap,
            sup_dpsi,
            inf_psi,
            constants,
            gradient: gradient_estimate_check(&states, grid, constants.s2),
            curvature: curvature_ratio(&states, grid),
            profile: interior_profile(u, &states, spec),
            support_identity: support_identity_from_states(u, &states, grid),
            maclaurin: maclaurin_check(&states, grid, spec.k)?,
        })
    }
}
