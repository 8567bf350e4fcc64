//! Geodesic-polar chart of the unit hyperboloid and discrete covariant calculus.
//!
//! The chart is `sigma = d rho^2 + sinh^2(rho) d theta^2`. The grid is
//! cell-centred in `rho` (no node at the pole) and periodic in `theta`. Values
//! across the pole are read through the ghost rule
//! `u(-rho, theta) = u(rho, theta + pi)`, which requires an even `theta` count.

use nalgebra::Matrix2;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarChart {
    dim: usize,
    rho_max: f64,
}

/// Nonzero Christoffel symbols of the polar hyperbolic metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffels {
    /// `Gamma^rho_{theta theta} = -sinh(rho) cosh(rho)`
    pub rho_theta_theta: f64,
    /// `Gamma^theta_{rho theta} = Gamma^theta_{theta rho} = coth(rho)`
    pub theta_rho_theta: f64,
}

impl Christoffels {
    /// Full symbol `Gamma^k_{ij}` with index 0 = rho, 1 = theta.
    pub fn component(&self, k: usize, i: usize, j: usize) -> f64 {
        match (k, i, j) {
            (0, 1, 1) => self.rho_theta_theta,
            (1, 0, 1) | (1, 1, 0) => self.theta_rho_theta,
            _ => 0.0,
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive and finite, got {rho}")));
    }
    Ok(())
}

impl PolarChart {
    pub fn new(dim: usize, rho_max: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!("dimension must be >= 2, got {dim}")));
        }
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(Error::Domain(format!("chart radius must be in (0, inf), got {rho_max}")));
        }
        Ok(Self { dim, rho_max })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// Returns `(sigma_rho_rho, sigma_theta_theta) = (1, sinh^2 rho)`.
    pub fn metric_at(&self, rho: f64) -> Result<(f64, f64)> {
        check_rho(rho)?;
        let s = rho.sinh();
        Ok((1.0, s * s))
    }

    pub fn christoffels_at(&self, rho: f64) -> Result<Christoffels> {
        check_rho(rho)?;
        Ok(Christoffels {
            rho_theta_theta: -rho.sinh() * rho.cosh(),
            theta_rho_theta: 1.0 / rho.tanh(),
        })
    }
}

/// Cell-centred polar grid over the geodesic disk of radius `rho_max`.
///
/// Node `(i, j)` sits at `rho_i = (i + 1/2) d_rho`, `theta_j = j d_theta`, and
/// has flat index `i * n_theta + j`. The outermost ring `i = n_rho - 1`
/// carries the Dirichlet data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    chart: PolarChart,
    n_rho: usize,
    n_theta: usize,
    d_rho: f64,
    d_theta: f64,
}

impl Grid {
    pub fn new(chart: PolarChart, n_rho: usize, n_theta: usize) -> Result<Self> {
        if n_rho < 4 {
            return Err(Error::Domain(format!("need at least 4 radial nodes, got {n_rho}")));
        }
        if n_theta < 4 || n_theta % 2 != 0 {
            return Err(Error::Domain(format!(
                "angular node count must be even and >= 4, got {n_theta}"
            )));
        }
        Ok(Self {
            chart,
            n_rho,
            n_theta,
            d_rho: chart.rho_max / n_rho as f64,
            d_theta: 2.0 * PI / n_theta as f64,
        })
    }

    pub fn chart(&self) -> &PolarChart {
        &self.chart
    }

    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn d_rho(&self) -> f64 {
        self.d_rho
    }

    pub fn d_theta(&self) -> f64 {
        self.d_theta
    }

    pub fn len(&self) -> usize {
        self.n_rho * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rho(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.d_rho
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.d_theta
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node / self.n_theta, node % self.n_theta)
    }

    pub fn position(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.coords(node);
        (self.rho(i), self.theta(j))
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        node / self.n_theta == self.n_rho - 1
    }

    /// Radius of the Dirichlet ring.
    pub fn boundary_rho(&self) -> f64 {
        self.rho(self.n_rho - 1)
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        0..(self.n_rho - 1) * self.n_theta
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (self.n_rho - 1) * self.n_theta..self.len()
    }

    /// Diameter of the geodesic disk `rho <= rho_max`.
    pub fn geodesic_diameter(&self) -> f64 {
        2.0 * self.chart.rho_max
    }

    /// Flat index of the value at signed ring `i` (may be -1) and any `j`.
    fn wrap(&self, i: isize, j: isize) -> usize {
        let nt = self.n_theta as isize;
        let (i, j) = if i < 0 {
            debug_assert_eq!(i, -1);
            (0, j + nt / 2)
        } else {
            (i, j)
        };
        self.node(i as usize, j.rem_euclid(nt) as usize)
    }

    /// Nodes whose values enter the derivative stencil at `node`, including
    /// `node` itself. Used for Jacobian sparsity.
    pub fn stencil(&self, node: usize) -> Vec<usize> {
        let (i, j) = self.coords(node);
        let (i, j) = (i as isize, j as isize);
        let mut out = Vec::with_capacity(12);
        if i as usize == self.n_rho - 1 {
            for di in 0..4 {
                for dj in -1..=1 {
                    out.push(self.wrap(i - di, j + dj));
                }
            }
        } else {
            for di in -1..=1 {
                for dj in -1..=1 {
                    out.push(self.wrap(i + di, j + dj));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Raw coordinate partial derivatives of `values` at `node`.
    ///
    /// Centred second-order differences in the interior (pole ghosted);
    /// one-sided second-order differences in `rho` on the boundary ring.
    pub fn partials(&self, values: &[f64], node: usize) -> Partials {
        let (i, j) = self.coords(node);
        let (ii, jj) = (i as isize, j as isize);
        let at = |di: isize, dj: isize| values[self.wrap(ii + di, jj + dj)];
        let hr = self.d_rho;
        let ht = self.d_theta;
        let d_theta_at = |di: isize| (at(di, 1) - at(di, -1)) / (2.0 * ht);
        let u = at(0, 0);
        let u_t = d_theta_at(0);
        let u_tt = (at(0, 1) - 2.0 * u + at(0, -1)) / (ht * ht);
        let (u_r, u_rr, u_rt) = if i == self.n_rho - 1 {
            let (u1, u2, u3) = (at(-1, 0), at(-2, 0), at(-3, 0));
            // written in differences so constants differentiate to exactly zero
            let (d0, d1, d2) = (u - u1, u1 - u2, u2 - u3);
            (
                (3.0 * d0 - d1) / (2.0 * hr),
                (2.0 * d0 - 3.0 * d1 + d2) / (hr * hr),
                (3.0 * (u_t - d_theta_at(-1)) - (d_theta_at(-1) - d_theta_at(-2))) / (2.0 * hr),
            )
        } else {
            let (up, um) = (at(1, 0), at(-1, 0));
            (
                (up - um) / (2.0 * hr),
                (up - 2.0 * u + um) / (hr * hr),
                (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hr * ht),
            )
        };
        Partials {
            rho: self.rho(i),
            u,
            u_r,
            u_t,
            u_rr,
            u_rt,
            u_tt,
        }
    }
}

/// Coordinate partial derivatives of a scalar at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub rho: f64,
    pub u: f64,
    pub u_r: f64,
    pub u_t: f64,
    pub u_rr: f64,
    pub u_rt: f64,
    pub u_tt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub u_rho: f64,
    pub u_theta: f64,
    /// `|Du|^2 = u_rho^2 + u_theta^2 / sinh^2 rho`
    pub norm_sq: f64,
}

impl Partials {
    pub fn gradient(&self) -> Gradient {
        let s = self.rho.sinh();
        Gradient {
            u_rho: self.u_r,
            u_theta: self.u_t,
            norm_sq: self.u_r * self.u_r + self.u_t * self.u_t / (s * s),
        }
    }

    /// Covariant Hessian `u_{;ij}` of the hyperbolic metric.
    pub fn covariant_hessian(&self) -> Matrix2<f64> {
        let (s, c) = (self.rho.sinh(), self.rho.cosh());
        let off = self.u_rt - (c / s) * self.u_t;
        Matrix2::new(self.u_rr, off, off, self.u_tt + s * c * self.u_r)
    }

    pub fn laplacian(&self) -> f64 {
        let s = self.rho.sinh();
        self.u_rr + self.u_r / self.rho.tanh() + self.u_tt / (s * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Graph,
    RightHandSide,
    Residual,
    Barrier,
    Diagnostic,
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    role: FieldRole,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, role: FieldRole, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(node));
        }
        Ok(Self { role, values })
    }

    pub fn from_fn(grid: &Grid, role: FieldRole, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|node| {
                let (r, t) = grid.position(node);
                f(r, t)
            })
            .collect();
        Self { role, values }
    }

    pub fn constant(grid: &Grid, role: FieldRole, c: f64) -> Self {
        Self {
            role,
            values: vec![c; grid.len()],
        }
    }

    pub(crate) fn from_raw(role: FieldRole, values: Vec<f64>) -> Self {
        Self { role, values }
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn covariant_gradient(u: &ScalarField, grid: &Grid, node: usize) -> Gradient {
    grid.partials(u.values(), node).gradient()
}

pub fn covariant_hessian(u: &ScalarField, grid: &Grid, node: usize) -> Matrix2<f64> {
    grid.partials(u.values(), node).covariant_hessian()
}

pub fn laplace_beltrami(u: &ScalarField, grid: &Grid) -> ScalarField {
    let values = (0..grid.len())
        .map(|node| grid.partials(u.values(), node).laplacian())
        .collect();
    ScalarField::from_raw(FieldRole::Diagnostic, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chart() -> PolarChart {
        PolarChart::new(2, 2.0).unwrap()
    }

    // 41 radial nodes over rho_max = 2 put ring 20 exactly at rho = 1.
    fn grid_through_one(n_rho: usize, n_theta: usize) -> (Grid, usize) {
        let g = Grid::new(chart(), n_rho, n_theta).unwrap();
        let i = (0..n_rho).find(|&i| (g.rho(i) - 1.0).abs() < 1e-12).unwrap();
        (g, i)
    }

    #[test]
    fn metric_values() {
        let c = chart();
        let (a, b) = c.metric_at(1.0).unwrap();
        assert_eq!(a, 1.0);
        assert_relative_eq!(b, 1.3810978, epsilon = 1e-7);
        assert_relative_eq!(c.metric_at(0.5).unwrap().1, 0.2715403, epsilon = 1e-7);
        let tiny = 1e-4;
        assert_relative_eq!(c.metric_at(tiny).unwrap().1, tiny * tiny, max_relative = 1e-7);
        assert!(c.metric_at(0.0).is_err());
        assert!(c.metric_at(-1.0).is_err());
        assert!(c.metric_at(f64::NAN).is_err());
    }

    #[test]
    fn christoffel_values() {
        let c = chart();
        let g = c.christoffels_at(1.0).unwrap();
        assert_relative_eq!(g.rho_theta_theta, -1.8134302, epsilon = 1e-7);
        assert_relative_eq!(g.theta_rho_theta, 1.3130353, epsilon = 1e-7);
        assert_eq!(g.component(1, 0, 1), g.component(1, 1, 0));
        assert_eq!(g.component(0, 0, 0), 0.0);
        let far = c.christoffels_at(30.0).unwrap();
        assert_relative_eq!(far.theta_rho_theta, 1.0, epsilon = 1e-12);
        assert!(c.christoffels_at(0.0).is_err());
    }

    #[test]
    fn christoffels_match_metric_derivative() {
        // Gamma^rho_{tt} = -1/2 d/drho sigma_tt, Gamma^t_{rt} = 1/2 sigma^tt d/drho sigma_tt.
        let c = chart();
        for &r in &[0.3, 1.0, 1.7] {
            let h = 1e-5;
            let d = (c.metric_at(r + h).unwrap().1 - c.metric_at(r - h).unwrap().1) / (2.0 * h);
            let g = c.christoffels_at(r).unwrap();
            assert_relative_eq!(g.rho_theta_theta, -0.5 * d, max_relative = 1e-8);
            assert_relative_eq!(
                g.theta_rho_theta,
                0.5 * d / c.metric_at(r).unwrap().1,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(chart(), 3, 8).is_err());
        assert!(Grid::new(chart(), 8, 7).is_err());
        assert!(PolarChart::new(1, 1.0).is_err());
        assert!(PolarChart::new(2, 0.0).is_err());
        assert!(PolarChart::new(2, f64::INFINITY).is_err());
        let g = Grid::new(chart(), 8, 6).unwrap();
        assert_eq!(g.len(), 48);
        assert_relative_eq!(g.rho(0), 0.125);
        assert!(g.is_boundary(g.node(7, 3)));
        assert!(!g.is_boundary(g.node(6, 5)));
        assert_eq!(g.interior_nodes().count() + g.boundary_nodes().count(), g.len());
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let g = Grid::new(chart(), 10, 12).unwrap();
        let u = ScalarField::constant(&g, FieldRole::Graph, 3.7);
        let lap = laplace_beltrami(&u, &g);
        for node in 0..g.len() {
            let gr = covariant_gradient(&u, &g, node);
            assert_eq!((gr.u_rho, gr.u_theta, gr.norm_sq), (0.0, 0.0, 0.0));
            assert_eq!(covariant_hessian(&u, &g, node), Matrix2::zeros());
            assert_eq!(lap.values()[node], 0.0);
        }
    }

    #[test]
    fn rho_squared_at_rho_one() {
        let (g, i) = grid_through_one(81, 16);
        let u = ScalarField::from_fn(&g, FieldRole::Graph, |r, _| r * r);
        let node = g.node(i, 3);
        let gr = covariant_gradient(&u, &g, node);
        let h2 = g.d_rho() * g.d_rho();
        assert_relative_eq!(gr.u_rho, 2.0, epsilon = 10.0 * h2);
        assert_relative_eq!(gr.u_theta, 0.0, epsilon = 1e-12);
        assert_relative_eq!(gr.norm_sq, 4.0, epsilon = 10.0 * h2);
        let hess = covariant_hessian(&u, &g, node);
        assert_relative_eq!(hess[(0, 0)], 2.0, epsilon = 10.0 * h2);
        assert_relative_eq!(hess[(1, 1)], 3.6268604, epsilon = 1e-6 + 10.0 * h2);
        assert_relative_eq!(hess[(0, 1)], 0.0, epsilon = 1e-12);
        let lap = laplace_beltrami(&u, &g);
        assert_relative_eq!(lap.values()[node], 4.6260706, epsilon = 1e-6 + 10.0 * h2);
    }

    #[test]
    fn cos_theta_at_rho_one() {
        let (g, i) = grid_through_one(41, 256);
        let u = ScalarField::from_fn(&g, FieldRole::Graph, |_, t| t.cos());
        let ht2 = g.d_theta() * g.d_theta();
        for j in [0, 17, 64, 100] {
            let node = g.node(i, j);
            let th = g.theta(j);
            let gr = covariant_gradient(&u, &g, node);
            assert_relative_eq!(gr.u_theta, -th.sin(), epsilon = ht2);
            assert_relative_eq!(gr.norm_sq, th.sin().powi(2) / 1.3810978, epsilon = 1e-6 + ht2);
            let hess = covariant_hessian(&u, &g, node);
            assert_relative_eq!(hess[(0, 1)], (1.0f64).tanh().recip() * th.sin(), epsilon = 2.0 * ht2);
        }
    }

    #[test]
    fn cosh_rho_laplacian() {
        let (g, i) = grid_through_one(81, 16);
        let u = ScalarField::from_fn(&g, FieldRole::Graph, |r, _| r.cosh());
        let lap = laplace_beltrami(&u, &g);
        assert_relative_eq!(lap.values()[g.node(i, 0)], 3.0861613, epsilon = 1e-3);
    }

    #[test]
    fn diameter() {
        for (r, d) in [(0.8, 1.6), (1.0, 2.0), (0.4, 0.8)] {
            let g = Grid::new(PolarChart::new(2, r).unwrap(), 8, 8).unwrap();
            assert_relative_eq!(g.geodesic_diameter(), d);
        }
    }

    #[test]
    fn stencil_shapes() {
        let g = Grid::new(chart(), 6, 8).unwrap();
        assert_eq!(g.stencil(g.node(2, 0)).len(), 9);
        assert_eq!(g.stencil(g.node(5, 0)).len(), 12);
        // pole ring reaches across to theta + pi
        let s = g.stencil(g.node(0, 1));
        assert!(s.contains(&g.node(0, 5)));
        assert!(s.contains(&g.node(0, 4)) && s.contains(&g.node(0, 6)));
    }

    #[test]
    fn field_validation() {
        let g = Grid::new(chart(), 4, 4).unwrap();
        assert!(ScalarField::new(&g, FieldRole::Graph, vec![1.0; 15]).is_err());
        let mut v = vec![1.0; 16];
        v[3] = f64::NAN;
        assert_eq!(ScalarField::new(&g, FieldRole::Graph, v), Err(Error::NonFinite(3)));
    }
}
