use nalgebra::Matrix2;
use proptest::prelude::*;
use weingarten::hchart::{covariant_hessian, laplace_beltrami, FieldRole, Grid, PolarChart, ScalarField};

fn grid(n_rho: usize, n_theta: usize, rho_max: f64) -> Grid {
    Grid::new(PolarChart::new(2, rho_max).unwrap(), n_rho, n_theta).unwrap()
}

/// `cosh(rho) + b sinh(rho) cos(theta) + c sinh^2(rho) sin(2 theta)`: smooth
/// through the pole, with hand-derived coordinate partials.
struct TestField {
    b: f64,
    c: f64,
}

impl TestField {
    fn value(&self, r: f64, t: f64) -> f64 {
        r.cosh() + self.b * r.sinh() * t.cos() + self.c * r.sinh().powi(2) * (2.0 * t).sin()
    }

    fn hessian(&self, r: f64, t: f64) -> Matrix2<f64> {
        let (s, ch) = (r.sinh(), r.cosh());
        let (b, c) = (self.b, self.c);
        let f_r = s + b * ch * t.cos() + 2.0 * c * s * ch * (2.0 * t).sin();
        let f_t = -b * s * t.sin() + 2.0 * c * s * s * (2.0 * t).cos();
        let f_rr = ch + b * s * t.cos() + 2.0 * c * (ch * ch + s * s) * (2.0 * t).sin();
        let f_rt = -b * ch * t.sin() + 4.0 * c * s * ch * (2.0 * t).cos();
        let f_tt = -b * s * t.cos() - 4.0 * c * s * s * (2.0 * t).sin();
        // Gamma^rho_thth = -s ch, Gamma^th_rhoth = ch/s
        let off = f_rt - ch / s * f_t;
        Matrix2::new(f_rr, off, off, f_tt + s * ch * f_r)
    }
}

fn hessian_error(n: usize, f: &TestField) -> f64 {
    let g = grid(n, n, 0.9);
    let u = ScalarField::from_fn(&g, FieldRole::Graph, |r, t| f.value(r, t));
    (0..g.len())
        .map(|node| {
            let (r, t) = g.position(node);
            (covariant_hessian(&u, &g, node) - f.hessian(r, t)).abs().max()
        })
        .fold(0.0, f64::max)
}

#[test]
fn hessian_converges_at_second_order() {
    let f = TestField { b: 0.3, c: 0.2 };
    let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| hessian_error(n, &f)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio >= 3.5, "errors {errs:?}");
    }
}

#[test]
fn laplacian_of_cosh_matches_closed_form() {
    // Delta cosh = 2 cosh on H^2; error O(h^2).
    let mut errs = Vec::new();
    for n in [16, 32, 64] {
        let g = grid(n, n, 1.0);
        let u = ScalarField::from_fn(&g, FieldRole::Graph, |r, _| r.cosh());
        let lap = laplace_beltrami(&u, &g);
        let e = g
            .interior_nodes()
            .map(|node| (lap.values()[node] - 2.0 * g.position(node).0.cosh()).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    assert!(errs[0] / errs[1] >= 3.5 && errs[1] / errs[2] >= 3.5, "{errs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_fields_have_zero_laplacian(c in -5.0f64..5.0, n in 4usize..20, m in 2usize..12, r in 0.1f64..2.0) {
        let g = grid(n, 2 * m, r);
        let lap = laplace_beltrami(&ScalarField::constant(&g, FieldRole::Graph, c), &g);
        for node in g.interior_nodes() {
            prop_assert_eq!(lap.values()[node], 0.0);
        }
    }

    #[test]
    fn hessian_symmetric_and_traces_to_laplacian(
        b in -1.0f64..1.0,
        c in -1.0f64..1.0,
        seed in prop::collection::vec(-1.0f64..1.0, 64),
        n in 4usize..12,
    ) {
        let g = grid(n, 2 * n, 0.8);
        let f = TestField { b, c };
        // smooth part plus node noise: the identities are algebraic in the stencil values
        let values: Vec<f64> = (0..g.len())
            .map(|node| {
                let (r, t) = g.position(node);
                f.value(r, t) + 0.1 * seed[node % seed.len()]
            })
            .collect();
        let u = ScalarField::new(&g, FieldRole::Graph, values).unwrap();
        let lap = laplace_beltrami(&u, &g);
        for node in g.interior_nodes() {
            let h = covariant_hessian(&u, &g, node);
            prop_assert_eq!(h[(0, 1)], h[(1, 0)]);
            let s = g.position(node).0.sinh();
            let tr = h[(0, 0)] + h[(1, 1)] / (s * s);
            let scale = 1.0 + tr.abs().max(lap.values()[node].abs());
            prop_assert!((tr - lap.values()[node]).abs() <= 1e-11 * scale);
        }
    }
}
