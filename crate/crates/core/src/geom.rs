//! Extrinsic geometry of the radial graph `X = u(x) x` over the hyperboloid.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hchart::{Grid, Partials, ScalarField};

/// Largest `|Du|/u` over all nodes. The graph is spacelike iff this is `< 1`.
pub fn spacelike_gap(u: &ScalarField, grid: &Grid) -> Result<f64> {
    let mut gap = 0.0f64;
    for node in 0..grid.len() {
        let p = grid.partials(u.values(), node);
        if p.u <= 0.0 {
            return Err(Error::InvalidGraph { node, value: p.u });
        }
        gap = gap.max(p.gradient().norm_sq.sqrt() / p.u);
    }
    Ok(gap)
}

/// `v = sqrt(1 - |Du|^2 / u^2)`.
pub fn lapse(u: f64, du_sq: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::InvalidGraph { node: 0, value: u });
    }
    let q = du_sq / (u * u);
    if !(q < 1.0) {
        return Err(Error::NotSpacelike { node: None, ratio: q.sqrt() });
    }
    Ok((1.0 - q).sqrt())
}

fn sq_norm(du: [f64; 2], sigma: &Matrix2<f64>) -> Result<f64> {
    let inv = sigma.try_inverse().ok_or(Error::MetricNotDefinite)?;
    Ok(du[0] * (inv[(0, 0)] * du[0] + inv[(0, 1)] * du[1])
        + du[1] * (inv[(1, 0)] * du[0] + inv[(1, 1)] * du[1]))
}

/// Induced metric `g = u^2 sigma - du (x) du` and its closed-form inverse
/// `g^{-1} = u^{-2} (sigma^{-1} + u^i u^j / (u^2 v^2))`.
pub fn induced_metric(
    u: f64,
    du: [f64; 2],
    sigma: &Matrix2<f64>,
) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    let sigma_inv = sigma.try_inverse().ok_or(Error::MetricNotDefinite)?;
    let v = lapse(u, sq_norm(du, sigma)?)?;
    let d = nalgebra::Vector2::new(du[0], du[1]);
    let g = sigma * (u * u) - d * d.transpose();
    let up = sigma_inv * d;
    let g_inv = (sigma_inv + up * up.transpose() / (u * u * v * v)) / (u * u);
    Ok((g, g_inv))
}

/// `h_ij = (u_ij + u sigma_ij - (2/u) u_i u_j) / v`.
pub fn second_fundamental_form(
    u: f64,
    du: [f64; 2],
    hess: &Matrix2<f64>,
    sigma: &Matrix2<f64>,
    v: f64,
) -> Matrix2<f64> {
    let d = nalgebra::Vector2::new(du[0], du[1]);
    (hess + sigma * u - d * d.transpose() * (2.0 / u)) / v
}

/// Roots of `det(h - lambda g) = 0`, descending.
pub fn principal_curvatures(h: &Matrix2<f64>, g: &Matrix2<f64>) -> Result<[f64; 2]> {
    let det_g = g.determinant();
    if !(g[(0, 0)] > 0.0 && det_g > 0.0) {
        return Err(Error::MetricNotDefinite);
    }
    // With g = L L^T the roots are the eigenvalues of the symmetric
    // S = L^-1 h L^-T, whose discriminant is a sum of squares.
    let l11 = g[(0, 0)].sqrt();
    let l21 = g[(0, 1)] / l11;
    let l22 = det_g.sqrt() / l11;
    let s11 = h[(0, 0)] / g[(0, 0)];
    let s12 = (h[(0, 1)] - l21 * s11 * l11) / (l11 * l22);
    let s22 = (h[(1, 1)] - 2.0 * l21 * h[(0, 1)] / l11 + l21 * l21 * s11) / (l22 * l22);
    let mean = 0.5 * (s11 + s22);
    let rad = (0.5 * (s11 - s22)).hypot(s12);
    let (r1, r2) = (mean + rad, mean - rad);
    Ok(if r1 >= r2 { [r1, r2] } else { [r2, r1] })
}

/// `theta = -<X, nu>_L = u / v`.
pub fn support_function(u: f64, v: f64) -> f64 {
    u / v
}

/// Squared norm of the shape operator, `sum lambda_i^2`.
pub fn norm_a(lambda: &[f64]) -> f64 {
    lambda.iter().map(|l| l * l).sum()
}

/// Per-node geometric package of the graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtrinsicState {
    pub u: f64,
    pub du: [f64; 2],
    pub v: f64,
    /// `W = 1/v`
    pub w: f64,
    #[serde(skip)]
    pub g: Matrix2<f64>,
    #[serde(skip)]
    pub g_inv: Matrix2<f64>,
    #[serde(skip)]
    pub h: Matrix2<f64>,
    /// Principal curvatures, descending.
    pub lambda: [f64; 2],
    /// Support function `u/v`.
    pub support: f64,
    /// `||A||^2`
    pub norm_a2: f64,
    /// `[sigma_1, sigma_2]` from the invariants of `g^{-1} h`.
    pub sigma: [f64; 2],
}

impl ExtrinsicState {
    pub fn from_partials(p: &Partials) -> Result<Self> {
        let s = p.rho.sinh();
        let sigma = Matrix2::new(1.0, 0.0, 0.0, s * s);
        let grad = p.gradient();
        let du = [grad.u_rho, grad.u_theta];
        if !(p.u > 0.0) {
            return Err(Error::InvalidGraph { node: 0, value: p.u });
        }
        let v = lapse(p.u, grad.norm_sq)?;
        let (g, g_inv) = induced_metric(p.u, du, &sigma)?;
        let h = second_fundamental_form(p.u, du, &p.covariant_hessian(), &sigma, v);
        let lambda = principal_curvatures(&h, &g)?;
        let shape = g_inv * h;
        Ok(Self {
            u: p.u,
            du,
            v,
            w: 1.0 / v,
            g,
            g_inv,
            h,
            lambda,
            support: support_function(p.u, v),
            norm_a2: norm_a(&lambda),
            sigma: [shape.trace(), h.determinant() / g.determinant()],
        })
    }

    /// `sigma_k` of the principal curvatures for `k` in `0..=2`.
    pub fn sigma_k(&self, k: usize) -> f64 {
        match k {
            0 => 1.0,
            1 => self.sigma[0],
            2 => self.sigma[1],
            _ => 0.0,
        }
    }

    pub fn is_admissible(&self, k: usize) -> bool {
        (1..=k).all(|l| self.sigma_k(l) > 0.0)
    }
}

/// Geometry at every node; the first failing node is reported.
pub fn extrinsic_states(u: &ScalarField, grid: &Grid) -> Result<Vec<ExtrinsicState>> {
    (0..grid.len())
        .map(|node| {
            let p = grid.partials(u.values(), node);
            ExtrinsicState::from_partials(&p).map_err(|e| match e {
                Error::InvalidGraph { value, .. } => Error::InvalidGraph { node, value },
                e => e.at_node(node),
            })
        })
        .collect()
}
