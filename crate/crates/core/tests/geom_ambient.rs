use nalgebra::{Matrix2, Vector3};
use proptest::prelude::*;
use weingarten::geom::{extrinsic_states, spacelike_gap, ExtrinsicState};
use weingarten::hchart::{FieldRole, Grid, Partials, PolarChart, ScalarField};
use weingarten::solver::RadialProfile;

fn lorentz(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.x * b.x + a.y * b.y - a.z * b.z
}

/// Point of the unit hyperboloid and its coordinate derivatives.
struct Frame {
    x: Vector3<f64>,
    x_r: Vector3<f64>,
    x_t: Vector3<f64>,
    x_rr: Vector3<f64>,
    x_rt: Vector3<f64>,
    x_tt: Vector3<f64>,
}

fn frame(r: f64, t: f64) -> Frame {
    let (s, c, ct, st) = (r.sinh(), r.cosh(), t.cos(), t.sin());
    Frame {
        x: Vector3::new(s * ct, s * st, c),
        x_r: Vector3::new(c * ct, c * st, s),
        x_t: Vector3::new(-s * st, s * ct, 0.0),
        x_rr: Vector3::new(s * ct, s * st, c),
        x_rt: Vector3::new(-c * st, c * ct, 0.0),
        x_tt: Vector3::new(-s * ct, -s * st, 0.0),
    }
}

/// Future-directed unit normal to the span of `a`, `b`.
fn normal(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    let cr = a.cross(b);
    let n = Vector3::new(cr.x, cr.y, -cr.z);
    let len = (-lorentz(&n, &n)).sqrt();
    if n.z > 0.0 {
        n / len
    } else {
        -n / len
    }
}

struct Ambient {
    g: Matrix2<f64>,
    h: Matrix2<f64>,
    support: f64,
    nu_norm: f64,
    nu_tangent: [f64; 2],
}

/// Geometry of `X = u x` computed from ambient vectors and the Minkowski product.
fn ambient(p: &Partials, theta: f64) -> Ambient {
    let f = frame(p.rho, theta);
    let xx = f.x * p.u;
    let x_r = f.x * p.u_r + f.x_r * p.u;
    let x_t = f.x * p.u_t + f.x_t * p.u;
    let x_rr = f.x * p.u_rr + f.x_r * (2.0 * p.u_r) + f.x_rr * p.u;
    let x_rt = f.x * p.u_rt + f.x_t * p.u_r + f.x_r * p.u_t + f.x_rt * p.u;
    let x_tt = f.x * p.u_tt + f.x_t * (2.0 * p.u_t) + f.x_tt * p.u;
    let nu = normal(&x_r, &x_t);
    let g = Matrix2::new(
        lorentz(&x_r, &x_r),
        lorentz(&x_r, &x_t),
        lorentz(&x_t, &x_r),
        lorentz(&x_t, &x_t),
    );
    let h = Matrix2::new(
        -lorentz(&x_rr, &nu),
        -lorentz(&x_rt, &nu),
        -lorentz(&x_rt, &nu),
        -lorentz(&x_tt, &nu),
    );
    Ambient {
        g,
        h,
        support: -lorentz(&xx, &nu),
        nu_norm: lorentz(&nu, &nu),
        nu_tangent: [lorentz(&nu, &x_r), lorentz(&nu, &x_t)],
    }
}

fn eigen_desc(g: &Matrix2<f64>, h: &Matrix2<f64>) -> [f64; 2] {
    let m = g.try_inverse().unwrap() * h;
    let tr = m.trace();
    let det = m.determinant();
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    [tr / 2.0 + disc, tr / 2.0 - disc]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn field(g: &Grid, a: [f64; 4]) -> ScalarField {
    ScalarField::from_fn(g, FieldRole::Graph, |r, t| {
        let s = r.sinh();
        a[0] + a[1] * s * t.cos() + a[2] * s * t.sin() + a[3] * r.cosh()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn formulas_match_ambient_embedding(
        a0 in 0.5f64..2.0,
        a1 in -0.15f64..0.15,
        a2 in -0.15f64..0.15,
        a3 in 0.0f64..0.3,
        n in 6usize..14,
    ) {
        let g = Grid::new(PolarChart::new(2, 0.7).unwrap(), n, 2 * n).unwrap();
        let u = field(&g, [a0, a1, a2, a3]);
        let states = extrinsic_states(&u, &g).unwrap();
        for node in 0..g.len() {
            let p = g.partials(u.values(), node);
            let amb = ambient(&p, g.position(node).1);
            let st = &states[node];
            prop_assert!((amb.nu_norm + 1.0).abs() < 1e-12);
            prop_assert!(amb.nu_tangent.iter().all(|x| x.abs() < 1e-12 * (1.0 + p.u)));
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!(close(st.g[(i, j)], amb.g[(i, j)], 1e-12), "g {} {}", st.g, amb.g);
                    prop_assert!(close(st.h[(i, j)], amb.h[(i, j)], 1e-10), "h {} {}", st.h, amb.h);
                }
            }
            prop_assert!(close(st.support, amb.support, 1e-12));
            let lam = eigen_desc(&amb.g, &amb.h);
            prop_assert!(close(st.lambda[0], lam[0], 1e-9) && close(st.lambda[1], lam[1], 1e-9));
        }
    }

    #[test]
    fn constant_graphs_scale_inversely(r in 0.2f64..5.0, c in 0.2f64..5.0) {
        let g = Grid::new(PolarChart::new(2, 0.8).unwrap(), 6, 8).unwrap();
        let base = extrinsic_states(&ScalarField::constant(&g, FieldRole::Graph, r), &g).unwrap();
        let scaled = extrinsic_states(&ScalarField::constant(&g, FieldRole::Graph, c * r), &g).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            for i in 0..2 {
                prop_assert!(close(b.lambda[i], a.lambda[i] / c, 1e-13));
            }
        }
    }

    #[test]
    fn hyperboloid_invariants(r in 0.1f64..10.0) {
        let g = Grid::new(PolarChart::new(2, 0.8).unwrap(), 6, 8).unwrap();
        for st in extrinsic_states(&ScalarField::constant(&g, FieldRole::Graph, r), &g).unwrap() {
            prop_assert!(close(st.sigma[0], 2.0 / r, 1e-14));
            prop_assert!(close(st.sigma[1], 1.0 / (r * r), 1e-14));
            prop_assert_eq!(st.support, r);
            prop_assert!(close(st.norm_a2, 2.0 / (r * r), 1e-14));
            prop_assert_eq!(st.v, 1.0);
        }
    }
}

#[test]
fn manufactured_sff_matches_ambient_finite_differences() {
    let prof = RadialProfile::new(vec![1.0, 0.0, 0.05]);
    let pos = |r: f64, t: f64| frame(r, t).x * prof.value(r);
    let (r, d) = (0.5, 1e-4);
    for t in [0.0, 0.7, 2.0, 4.5] {
        let p = Partials {
            rho: r,
            u: prof.value(r),
            u_r: prof.derivative(r),
            u_t: 0.0,
            u_rr: prof.second_derivative(r),
            u_rt: 0.0,
            u_tt: 0.0,
        };
        let st = ExtrinsicState::from_partials(&p).unwrap();
        let x_r = (pos(r + d, t) - pos(r - d, t)) / (2.0 * d);
        let x_t = (pos(r, t + d) - pos(r, t - d)) / (2.0 * d);
        let x_rr = (pos(r + d, t) - pos(r, t) * 2.0 + pos(r - d, t)) / (d * d);
        let x_tt = (pos(r, t + d) - pos(r, t) * 2.0 + pos(r, t - d)) / (d * d);
        let x_rt = (pos(r + d, t + d) - pos(r + d, t - d) - pos(r - d, t + d) + pos(r - d, t - d)) / (4.0 * d * d);
        let nu = normal(&x_r, &x_t);
        let h = Matrix2::new(
            -lorentz(&x_rr, &nu),
            -lorentz(&x_rt, &nu),
            -lorentz(&x_rt, &nu),
            -lorentz(&x_tt, &nu),
        );
        assert!((st.h - h).abs().max() < 1e-6, "{} vs {}", st.h, h);
    }
}

#[test]
fn manufactured_gap_matches_dense_sampling() {
    let prof = RadialProfile::new(vec![1.0, 0.0, 0.05]);
    let dense = (0..=100_000)
        .map(|i| {
            let r = 0.8 * i as f64 / 100_000.0;
            prof.derivative(r).abs() / prof.value(r)
        })
        .fold(0.0, f64::max);
    for n in [32, 64, 128] {
        let g = Grid::new(PolarChart::new(2, 0.8).unwrap(), n, n).unwrap();
        let u = ScalarField::from_fn(&g, FieldRole::Graph, |r, _| prof.value(r));
        let gap = spacelike_gap(&u, &g).unwrap();
        assert!(gap < 0.2);
        assert!((gap - dense).abs() <= 0.1 * g.d_rho(), "n={n}: {gap} vs {dense}");
    }
}
