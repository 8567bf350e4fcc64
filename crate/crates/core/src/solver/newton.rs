use serde::Serialize;

use super::jacobian::{analytic_entries, fd_jacobian};
use super::linalg::solve_sparse;
use super::{
    inf_norm, node_state, residual_vec, ContinuationConfig, ProblemSpec, SolveError, SolveResult,
    SolveStatus, StateSummary, TraceEntry,
};
use crate::error::{Error, Result};
use crate::hchart::{FieldRole, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    /// Smallest accepted damping factor.
    pub smallest_step: f64,
    /// Residual norm before the first and after every accepted step.
    pub history: Vec<f64>,
}

impl SolveError {
    fn iterations(&self) -> usize {
        match self {
            SolveError::NonConvergence { iterations, .. } | SolveError::Stalled { iterations, .. } => *iterations,
            _ => 0,
        }
    }

    fn residual(&self) -> Option<f64> {
        match self {
            SolveError::NonConvergence { residual, .. } | SolveError::Stalled { residual, .. } => {
                Some(*residual).filter(|r| r.is_finite())
            }
            _ => None,
        }
    }
}

/// Newton's method with backtracking. A trial step is halved until the
/// iterate is spacelike, admissible for `t > 0`, and strictly lowers the
/// residual infinity-norm.
pub fn damped_newton(
    u0: &ScalarField,
    t: f64,
    spec: &ProblemSpec,
    cfg: &ContinuationConfig,
) -> std::result::Result<(ScalarField, NewtonReport), SolveError> {
    cfg.validate()?;
    if u0.len() != spec.grid.len() {
        return Err(Error::Domain("field does not match grid".into()).into());
    }
    let tol = cfg.tolerance_for(spec);
    let (u, report) = newton(u0.values(), t, spec, cfg, tol)?;
    Ok((ScalarField::from_raw(FieldRole::Graph, u), report))
}

fn newton(
    u0: &[f64],
    t: f64,
    spec: &ProblemSpec,
    cfg: &ContinuationConfig,
    tol: f64,
) -> std::result::Result<(Vec<f64>, NewtonReport), SolveError> {
    let mut u = u0.to_vec();
    let mut r = residual_vec(&u, t, spec, true).map_err(SolveError::InadmissibleStart)?;
    let mut norm = inf_norm(&r);
    let mut report = NewtonReport {
        iterations: 0,
        residual: norm,
        smallest_step: 1.0,
        history: vec![norm],
    };
    while norm > tol {
        if report.iterations >= cfg.max_newton {
            return Err(SolveError::NonConvergence {
                iterations: report.iterations,
                residual: norm,
            });
        }
        let jac = analytic_entries(&u, t, spec)?;
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = solve_sparse(&spec.grid, &jac.entries, &rhs)?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            if let Ok(rt) = residual_vec(&trial, t, spec, true) {
                let nt = inf_norm(&rt);
                if nt < norm {
                    u = trial;
                    r = rt;
                    norm = nt;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < cfg.damping_floor {
                return Err(SolveError::Stalled {
                    iterations: report.iterations,
                    residual: norm,
                });
            }
        }
        report.iterations += 1;
        report.smallest_step = report.smallest_step.min(alpha);
        report.history.push(norm);
    }
    report.residual = norm;
    Ok((u, report))
}

/// Discrete harmonic function with the boundary values of the problem.
pub fn harmonic_extension(spec: &ProblemSpec) -> Result<ScalarField> {
    let grid = &spec.grid;
    let phi = spec.phi();
    let u0 = vec![phi; grid.len()];
    let row = |vals: &[f64], r: usize| -> Result<f64> {
        if grid.is_boundary(r) {
            Ok(vals[r] - phi)
        } else {
            Ok(grid.partials(vals, r).laplacian())
        }
    };
    let r0: Vec<f64> = (0..grid.len()).map(|r| row(&u0, r)).collect::<Result<_>>()?;
    if inf_norm(&r0) == 0.0 {
        return Ok(ScalarField::from_raw(FieldRole::Graph, u0));
    }
    let jac = fd_jacobian(grid, &u0, row)?;
    let rhs: Vec<f64> = r0.iter().map(|x| -x).collect();
    let delta = solve_sparse(grid, &jac.entries, &rhs)?;
    let u: Vec<f64> = u0.iter().zip(&delta).map(|(a, d)| a + d).collect();
    ScalarField::new(grid, FieldRole::Graph, u)
}

fn is_mean_convex(values: &[f64], spec: &ProblemSpec) -> bool {
    spec.grid.interior_nodes().all(|node| {
        node_state(values, &spec.grid, node).is_ok_and(|(_, st)| st.is_admissible(1))
    })
}

/// Harmonic extension, lifted by multiples of `phi / 4` until 1-admissible.
fn laplace_start(spec: &ProblemSpec) -> Result<Vec<f64>> {
    let base = harmonic_extension(spec)?.into_values();
    let step = 0.25 * spec.phi();
    for m in 0..=8 {
        let shifted: Vec<f64> = base.iter().map(|v| v + m as f64 * step).collect();
        if is_mean_convex(&shifted, spec) {
            return Ok(shifted);
        }
    }
    Ok(base)
}

fn constant_guess(spec: &ProblemSpec) -> Vec<f64> {
    vec![spec.phi(); spec.grid.len()]
}

fn entry(t: f64, iterations: usize, residual: Option<f64>, accepted: bool, note: Option<String>) -> TraceEntry {
    TraceEntry {
        t,
        iterations,
        residual,
        accepted,
        note,
    }
}

/// Continuation from the Laplace problem (`t = 0`) to the curvature problem.
pub fn continuation_solve(spec: &ProblemSpec, cfg: &ContinuationConfig) -> Result<SolveResult> {
    continuation_solve_from(spec, cfg, None)
}

/// As [`continuation_solve`]; `initial` (default: the constant `phi`) seeds
/// the direct attempt at `t = 1`.
pub fn continuation_solve_from(
    spec: &ProblemSpec,
    cfg: &ContinuationConfig,
    initial: Option<&ScalarField>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let tol = cfg.tolerance_for(spec);
    let mut trace = Vec::new();
    let mut total = 0;
    let base = match initial {
        Some(f) if f.len() != spec.grid.len() => {
            return Err(Error::Domain("initial guess does not match grid".into()))
        }
        Some(f) => f.values().to_vec(),
        None => constant_guess(spec),
    };

    let finish = |status, u: Vec<f64>, t: f64, trace, total, message: Option<String>| {
        let residual = residual_vec(&u, t, spec, false).map(|r| inf_norm(&r)).unwrap_or(f64::NAN);
        let field = ScalarField::from_raw(FieldRole::Graph, u);
        let summary = StateSummary::compute(&field, spec).ok();
        SolveResult {
            status,
            u: field,
            t_reached: t,
            trace,
            total_newton_iterations: total,
            tolerance: tol,
            residual,
            summary,
            message,
        }
    };

    if cfg.direct_first {
        match newton(&base, 1.0, spec, cfg, tol) {
            Ok((u, rep)) => {
                total += rep.iterations;
                trace.push(entry(1.0, rep.iterations, Some(rep.residual), true, Some("direct".into())));
                return Ok(finish(SolveStatus::Converged, u, 1.0, trace, total, None));
            }
            Err(e) => {
                total += e.iterations();
                trace.push(entry(1.0, e.iterations(), e.residual(), false, Some(format!("direct: {e}"))));
            }
        }
    }

    let start = laplace_start(spec)?;
    let mut u = match newton(&start, 0.0, spec, cfg, tol) {
        Ok((u, rep)) => {
            total += rep.iterations;
            trace.push(entry(0.0, rep.iterations, Some(rep.residual), true, None));
            u
        }
        Err(e) => {
            total += e.iterations();
            let msg = format!("t = 0: {e}");
            trace.push(entry(0.0, e.iterations(), e.residual(), false, Some(msg.clone())));
            return Ok(finish(SolveStatus::InadmissibleStart, start, 0.0, trace, total, Some(msg)));
        }
    };

    let (mut t, mut dt, mut first) = (0.0f64, cfg.dt_init, true);
    while t < 1.0 {
        let tn = (t + dt).min(1.0);
        let mut seed = u.clone();
        let mut note = None;
        if first && residual_vec(&seed, tn, spec, true).is_err() {
            seed = constant_guess(spec);
            note = Some("constant fallback".to_string());
        }
        match newton(&seed, tn, spec, cfg, tol) {
            Ok((un, rep)) => {
                total += rep.iterations;
                trace.push(entry(tn, rep.iterations, Some(rep.residual), true, note));
                u = un;
                t = tn;
                dt = (2.0 * dt).min(cfg.dt_init);
                first = false;
            }
            Err(e) => {
                total += e.iterations();
                trace.push(entry(tn, e.iterations(), e.residual(), false, Some(e.to_string())));
                dt *= 0.5;
                if dt < cfg.dt_min {
                    let msg = SolveError::StepFloor { t }.to_string();
                    return Ok(finish(SolveStatus::StepFloor, u, t, trace, total, Some(msg)));
                }
            }
        }
    }
    Ok(finish(SolveStatus::Converged, u, 1.0, trace, total, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hchart::{Grid, PolarChart};
    use crate::solver::{BoundaryData, PsiSpec};

    fn spec(n: usize, k: usize, psi: f64, phi: f64) -> ProblemSpec {
        let grid = Grid::new(PolarChart::new(2, 0.8).unwrap(), n, n).unwrap();
        ProblemSpec::new(grid, k, PsiSpec::constant(psi), BoundaryData::Constant { c: phi }).unwrap()
    }

    #[test]
    fn perturbed_hyperboloid_converges() {
        let s = spec(16, 1, 2.0, 1.0);
        let u0 = ScalarField::constant(&s.grid, FieldRole::Graph, 1.02);
        let (u, rep) = damped_newton(&u0, 1.0, &s, &ContinuationConfig::default()).unwrap();
        assert!(rep.iterations <= 5, "{rep:?}");
        assert!(rep.residual <= 1e-10);
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn exact_start_takes_no_steps() {
        let s = spec(8, 2, 4.0, 0.5);
        let u0 = ScalarField::constant(&s.grid, FieldRole::Graph, 0.5);
        let (_, rep) = damped_newton(&u0, 1.0, &s, &ContinuationConfig::default()).unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn timelike_start_rejected() {
        let s = spec(8, 1, 2.0, 1.0);
        let mut u0 = ScalarField::constant(&s.grid, FieldRole::Graph, 1.0);
        u0.values_mut()[s.grid.node(3, 0)] = 3.0;
        assert!(matches!(
            damped_newton(&u0, 1.0, &s, &ContinuationConfig::default()),
            Err(SolveError::InadmissibleStart(_))
        ));
    }

    #[test]
    fn laplace_problem_is_one_step() {
        let grid = Grid::new(PolarChart::new(2, 0.8).unwrap(), 12, 12).unwrap();
        let s = ProblemSpec::new(grid, 1, PsiSpec::power(0.0, "0.2*cos(theta)*rho").unwrap(), BoundaryData::Constant {
            c: 1.0,
        })
        .unwrap();
        let u0 = harmonic_extension(&s).unwrap();
        let cfg = ContinuationConfig {
            tolerance: Some(1e-9),
            ..Default::default()
        };
        let (_, rep) = damped_newton(&u0, 0.0, &s, &cfg).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn continuation_without_shortcut() {
        let s = spec(12, 1, 2.0, 1.0);
        let cfg = ContinuationConfig {
            direct_first: false,
            ..Default::default()
        };
        let res = continuation_solve(&s, &cfg).unwrap();
        assert!(res.converged(), "{res:?}");
        assert!(res.t_monotone());
        assert!(res.u.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(res.trace.iter().any(|e| e.t > 0.0 && e.t < 1.0));
    }
}
