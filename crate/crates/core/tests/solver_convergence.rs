use weingarten::hchart::{FieldRole, Grid, PolarChart, ScalarField};
use weingarten::solver::{
    continuation_solve, manufactured_psi, BoundaryData, ContinuationConfig, ProblemSpec, PsiSpec, RadialProfile,
    SolveStatus,
};

fn max_error(n: usize, prof: &RadialProfile, k: usize, cfg: &ContinuationConfig) -> (f64, usize) {
    let grid = Grid::new(PolarChart::new(2, 0.8).unwrap(), n, n).unwrap();
    let psi = manufactured_psi(&grid, prof, k).unwrap();
    let spec = ProblemSpec::new(
        grid.clone(),
        k,
        PsiSpec::tabulated(psi, "quartic"),
        BoundaryData::Radial { profile: prof.clone() },
    )
    .unwrap();
    let res = continuation_solve(&spec, cfg).unwrap();
    assert_eq!(res.status, SolveStatus::Converged);
    let exact = ScalarField::from_fn(&grid, FieldRole::Graph, |r, _| prof.value(r));
    (res.u.max_abs_diff(&exact), res.total_newton_iterations)
}

/// With `psi` taken from the exact derivatives the only error left is the
/// scheme's truncation error, which must be second order.
#[test]
fn scheme_is_second_order_on_quartic_profile() {
    let prof = RadialProfile::new(vec![1.0, 0.0, 0.05, 0.0, 0.02]);
    let cfg = ContinuationConfig {
        tolerance: Some(1e-11),
        ..Default::default()
    };
    for k in [1, 2] {
        let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| max_error(n, &prof, k, &cfg).0).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.8, "k={k}: errors {errs:?}");
        }
    }
}

#[test]
fn walk_from_zero_reaches_manufactured_solution() {
    let prof = RadialProfile::new(vec![1.0, 0.0, 0.05]);
    let direct = ContinuationConfig {
        tolerance: Some(1e-11),
        ..Default::default()
    };
    let walk = ContinuationConfig {
        direct_first: false,
        ..direct.clone()
    };
    let (a, _) = max_error(16, &prof, 2, &direct);
    let (b, iters) = max_error(16, &prof, 2, &walk);
    assert!((a - b).abs() < 1e-9);
    assert!(iters > 0);
}

#[test]
fn hyperplane_data_solves_and_stays_spacelike() {
    let grid = Grid::new(PolarChart::new(2, 0.6).unwrap(), 16, 16).unwrap();
    let spec = ProblemSpec::new(
        grid,
        2,
        PsiSpec::power(2.0, "2 + 0.3*cos(theta)").unwrap(),
        BoundaryData::Hyperplane { c: 0.8 },
    )
    .unwrap();
    let res = continuation_solve(&spec, &ContinuationConfig::default()).unwrap();
    assert!(res.converged());
    assert!(res.t_monotone());
    let summary = res.summary.unwrap();
    assert!(summary.admissible);
    assert!(summary.spacelike_gap < 1.0);
}
