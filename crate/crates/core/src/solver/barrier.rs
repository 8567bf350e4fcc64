use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::newton::continuation_solve_from;
use super::{node_state, ContinuationConfig, ProblemSpec, PsiSpec, SolveError, SolveStatus};
use crate::error::{Error, Result};
use crate::hchart::{FieldRole, ScalarField};
use crate::symk::binomial;

/// `psi(x, u, theta)` evaluated on a fixed graph, one value per node.
pub fn frozen_psi(spec: &ProblemSpec, u: &ScalarField) -> Result<Vec<f64>> {
    let grid = &spec.grid;
    (0..grid.len())
        .map(|node| {
            let (p, st) = node_state(u.values(), grid, node)?;
            let (rho, ang) = grid.position(node);
            Ok(spec.psi.eval(node, rho, ang, p.u, st.support).value)
        })
        .collect()
}

fn solve_frozen(
    spec: &ProblemSpec,
    u_frozen: &ScalarField,
    cfg: &ContinuationConfig,
    order: usize,
    rhs: impl Fn(f64) -> f64,
    label: &str,
) -> std::result::Result<ScalarField, SolveError> {
    let values: Vec<f64> = frozen_psi(spec, u_frozen)?.into_iter().map(rhs).collect();
    if let Some(node) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(node).into());
    }
    let barrier = spec.with_psi(order, PsiSpec::tabulated(values, label))?;
    let res = continuation_solve_from(&barrier, cfg, Some(u_frozen))?;
    match res.status {
        SolveStatus::Converged => Ok(ScalarField::from_raw(FieldRole::Barrier, res.u.into_values())),
        _ => Err(SolveError::StepFloor { t: res.t_reached }),
    }
}

/// `sigma_1[s] = n (psi / C(n,k))^{1/k}` with `s = phi` on the boundary.
pub fn solve_upper_barrier(
    spec: &ProblemSpec,
    u_frozen: &ScalarField,
    cfg: &ContinuationConfig,
) -> std::result::Result<ScalarField, SolveError> {
    let (n, k) = (spec.n(), spec.k);
    let c = binomial(n, k);
    solve_frozen(
        spec,
        u_frozen,
        cfg,
        1,
        |psi| n as f64 * (psi / c).powf(1.0 / k as f64),
        "upper barrier",
    )
}

/// `sigma_n[s] = (psi / C(n,k))^{n/k}` with `s = phi` on the boundary.
pub fn solve_lower_barrier(
    spec: &ProblemSpec,
    u_frozen: &ScalarField,
    cfg: &ContinuationConfig,
) -> std::result::Result<ScalarField, SolveError> {
    let (n, k) = (spec.n(), spec.k);
    let c = binomial(n, k);
    solve_frozen(
        spec,
        u_frozen,
        cfg,
        n,
        |psi| (psi / c).powf(n as f64 / k as f64),
        "lower barrier",
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    /// `min (s+ - u)` over interior nodes.
    pub upper_margin: f64,
    /// `min (u - s-)` over interior nodes.
    pub lower_margin: f64,
    /// `10 h^2` with `h` the radial spacing.
    pub eps_h: f64,
    pub pass: bool,
}

pub fn barrier_sandwich_check(
    spec: &ProblemSpec,
    u: &ScalarField,
    s_minus: &ScalarField,
    s_plus: &ScalarField,
) -> SandwichReport {
    let grid = &spec.grid;
    let (mut upper, mut lower) = (f64::INFINITY, f64::INFINITY);
    for node in grid.interior_nodes() {
        let x = u.values()[node];
        upper = upper.min(s_plus.values()[node] - x);
        lower = lower.min(x - s_minus.values()[node]);
    }
    let eps_h = 10.0 * grid.d_rho() * grid.d_rho();
    SandwichReport {
        upper_margin: upper,
        lower_margin: lower,
        eps_h,
        pass: upper >= -eps_h && lower >= -eps_h,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRun {
    pub status: SolveStatus,
    pub newton_iterations: usize,
    pub t_monotone: bool,
    /// Infinity-norm distance of the start from the constant graph.
    pub start_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub runs: Vec<ProbeRun>,
    /// Largest infinity-norm distance between converged solutions.
    pub max_pairwise_distance: f64,
    pub all_converged: bool,
}

/// Re-solves from `starts` perturbed initial guesses: the constant graph
/// `phi` plus a smooth bump that vanishes on the boundary,
/// `a (1 - (rho/rho_b)^2)(c0 + c1 sinh(rho) cos(theta) + c2 sinh(rho) sin(theta))`.
pub fn uniqueness_probe(
    spec: &ProblemSpec,
    cfg: &ContinuationConfig,
    starts: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    let grid = &spec.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = spec.phi();
    let rb = grid.boundary_rho();
    let amp = 0.05 * phi;
    let mut runs = Vec::with_capacity(starts);
    let mut solutions: Vec<ScalarField> = Vec::new();
    for _ in 0..starts {
        let c: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let start = ScalarField::from_fn(grid, FieldRole::Graph, |rho, th| {
            let s = rho.sinh();
            phi + amp * (1.0 - (rho / rb).powi(2)).max(0.0) * (c[0] + c[1] * s * th.cos() + c[2] * s * th.sin())
        });
        let offset = start.values().iter().fold(0.0f64, |m, v| m.max((v - phi).abs()));
        let res = continuation_solve_from(spec, cfg, Some(&start))?;
        runs.push(ProbeRun {
            status: res.status,
            newton_iterations: res.total_newton_iterations,
            t_monotone: res.t_monotone(),
            start_offset: offset,
        });
        if res.converged() {
            solutions.push(res.u);
        }
    }
    let mut max_d = 0.0f64;
    for (i, a) in solutions.iter().enumerate() {
        for b in &solutions[i + 1..] {
            max_d = max_d.max(a.max_abs_diff(b));
        }
    }
    Ok(UniquenessReport {
        all_converged: solutions.len() == starts,
        runs,
        max_pairwise_distance: max_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hchart::{Grid, PolarChart};
    use crate::solver::BoundaryData;

    fn spec(k: usize, psi: f64, phi: f64) -> ProblemSpec {
        let grid = Grid::new(PolarChart::new(2, 0.8).unwrap(), 12, 12).unwrap();
        ProblemSpec::new(grid, k, PsiSpec::constant(psi), BoundaryData::Constant { c: phi }).unwrap()
    }

    #[test]
    fn hyperboloid_barriers_coincide() {
        let cfg = ContinuationConfig::default();
        for (k, psi, phi) in [(2, 4.0, 0.5), (1, 2.0, 1.0)] {
            let s = spec(k, psi, phi);
            let u = ScalarField::constant(&s.grid, FieldRole::Graph, phi);
            let up = solve_upper_barrier(&s, &u, &cfg).unwrap();
            let lo = solve_lower_barrier(&s, &u, &cfg).unwrap();
            let rep = barrier_sandwich_check(&s, &u, &lo, &up);
            assert!(rep.pass);
            assert!(rep.upper_margin.abs() <= 1e-12 && rep.lower_margin.abs() <= 1e-12, "{rep:?}");
        }
    }

    #[test]
    fn bump_breaks_sandwich() {
        let s = spec(2, 4.0, 0.5);
        let u = ScalarField::constant(&s.grid, FieldRole::Graph, 0.5);
        let mut bumped = u.clone();
        bumped.values_mut()[s.grid.node(2, 3)] += 0.1;
        assert!(!barrier_sandwich_check(&s, &bumped, &u, &u).pass);
    }

    #[test]
    fn probe_on_small_grid() {
        let s = spec(2, 4.0, 0.5);
        let rep = uniqueness_probe(&s, &ContinuationConfig::default(), 3, 7).unwrap();
        assert!(rep.all_converged, "{rep:?}");
        assert!(rep.max_pairwise_distance <= 1e-8, "{rep:?}");
    }
}
