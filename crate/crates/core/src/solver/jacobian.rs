use nalgebra::{DMatrix, Matrix2};

use super::{node_residual, node_state, ProblemSpec};
use crate::error::{Error, Result};
use crate::hchart::{Grid, ScalarField};

/// Jacobian as `(row, col, value)` triplets in node numbering.
#[derive(Debug, Clone)]
pub struct SparseJacobian {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseJacobian {
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            out[r] += v * w[c];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

/// Columns each residual row reads. Dirichlet rows read only themselves.
fn row_stencil(grid: &Grid, node: usize) -> Vec<usize> {
    if grid.is_boundary(node) {
        vec![node]
    } else {
        grid.stencil(node)
    }
}

struct Coloring {
    col_rows: Vec<Vec<usize>>,
    groups: Vec<Vec<usize>>,
}

/// Greedy distance-2 coloring: no two columns of a group share a row.
fn coloring(grid: &Grid) -> Coloring {
    let n = grid.len();
    let rows: Vec<Vec<usize>> = (0..n).map(|r| row_stencil(grid, r)).collect();
    let mut col_rows = vec![Vec::new(); n];
    for (r, cols) in rows.iter().enumerate() {
        for &c in cols {
            col_rows[c].push(r);
        }
    }
    let mut color = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut forbidden = Vec::new();
    for c in 0..n {
        forbidden.clear();
        for &r in &col_rows[c] {
            for &c2 in &rows[r] {
                if color[c2] != usize::MAX {
                    forbidden.push(color[c2]);
                }
            }
        }
        let pick = (0..).find(|k| !forbidden.contains(k)).unwrap();
        if pick == groups.len() {
            groups.push(Vec::new());
        }
        groups[pick].push(c);
        color[c] = pick;
    }
    Coloring { col_rows, groups }
}

/// Central-difference Jacobian of a row-local residual, one pair of
/// evaluations per color group.
pub(crate) fn fd_jacobian(
    grid: &Grid,
    values: &[f64],
    row: impl Fn(&[f64], usize) -> Result<f64>,
) -> Result<SparseJacobian> {
    let col = coloring(grid);
    let mut work = values.to_vec();
    let eps: Vec<f64> = values.iter().map(|v| 1e-7 * v.abs().max(1.0)).collect();
    let mut entries = Vec::with_capacity(grid.len() * 9);
    let mut plus = vec![0.0; grid.len()];
    for group in &col.groups {
        for &c in group {
            work[c] = values[c] + eps[c];
        }
        for &c in group {
            for &r in &col.col_rows[c] {
                plus[r] = row(&work, r)?;
            }
        }
        for &c in group {
            work[c] = values[c] - eps[c];
        }
        for &c in group {
            // actual spacing after rounding
            let h = (values[c] + eps[c]) - (values[c] - eps[c]);
            for &r in &col.col_rows[c] {
                let minus = row(&work, r)?;
                entries.push((r, c, (plus[r] - minus) / h));
            }
        }
        for &c in group {
            work[c] = values[c];
        }
    }
    Ok(SparseJacobian { n: grid.len(), entries })
}

/// `dR/du` by colored central differences; Dirichlet rows are identity rows.
/// Independent of the chain-rule linearization that drives Newton.
pub fn assemble_jacobian(u: &ScalarField, t: f64, spec: &ProblemSpec) -> Result<SparseJacobian> {
    if u.len() != spec.grid.len() {
        return Err(Error::Domain("field does not match grid".into()));
    }
    let mut jac = fd_jacobian(&spec.grid, u.values(), |vals, r| node_residual(vals, t, spec, r))?;
    for e in jac.entries.iter_mut() {
        if spec.grid.is_boundary(e.0) {
            e.2 = 1.0;
        }
    }
    Ok(jac)
}

/// Entries of the chain-rule linearization, recovered by probing
/// [`analytic_jvp`] with one indicator vector per color group. Used by Newton:
/// near the pole the angular couplings scale like `1/(rho dtheta)^2` and the
/// truncation error of difference quotients is enough to spoil descent.
pub fn analytic_jacobian(u: &ScalarField, t: f64, spec: &ProblemSpec) -> Result<SparseJacobian> {
    if u.len() != spec.grid.len() {
        return Err(Error::Domain("field does not match grid".into()));
    }
    analytic_entries(u.values(), t, spec)
}

pub(crate) fn analytic_entries(values: &[f64], t: f64, spec: &ProblemSpec) -> Result<SparseJacobian> {
    let grid = &spec.grid;
    let col = coloring(grid);
    let mut entries = Vec::with_capacity(grid.len() * 9);
    let mut w = vec![0.0; grid.len()];
    for group in &col.groups {
        for &c in group {
            w[c] = 1.0;
        }
        let jw = jvp(values, &w, t, spec)?;
        for &c in group {
            w[c] = 0.0;
            for &r in &col.col_rows[c] {
                entries.push((r, c, jw[r]));
            }
        }
    }
    Ok(SparseJacobian { n: grid.len(), entries })
}

fn sym_outer(a: [f64; 2], b: [f64; 2]) -> Matrix2<f64> {
    Matrix2::new(
        2.0 * a[0] * b[0],
        a[0] * b[1] + a[1] * b[0],
        a[0] * b[1] + a[1] * b[0],
        2.0 * a[1] * b[1],
    )
}

/// `J w` by linearizing the curvature operator through the chain rule
/// (metric, second fundamental form, shape operator, `sigma_k`).
pub fn analytic_jvp(u: &ScalarField, w: &[f64], t: f64, spec: &ProblemSpec) -> Result<Vec<f64>> {
    if u.len() != spec.grid.len() || w.len() != spec.grid.len() {
        return Err(Error::Domain("field does not match grid".into()));
    }
    jvp(u.values(), w, t, spec)
}

fn jvp(values: &[f64], w: &[f64], t: f64, spec: &ProblemSpec) -> Result<Vec<f64>> {
    let grid = &spec.grid;
    let mut out = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        if grid.is_boundary(node) {
            out.push(w[node]);
            continue;
        }
        let (p, st) = node_state(values, grid, node)?;
        let dp = grid.partials(w, node);
        let (s, u0, v) = (p.rho.sinh(), p.u, st.v);
        let sigma = Matrix2::new(1.0, 0.0, 0.0, s * s);
        let du = dp.u;
        let g1 = [p.u_r, p.u_t];
        let dg1 = [dp.u_r, dp.u_t];
        let n2 = g1[0] * g1[0] + g1[1] * g1[1] / (s * s);
        let dn2 = 2.0 * g1[0] * dg1[0] + 2.0 * g1[1] * dg1[1] / (s * s);
        let dv = (-dn2 / (u0 * u0) + 2.0 * n2 * du / (u0 * u0 * u0)) / (2.0 * v);
        let outer = Matrix2::new(g1[0] * g1[0], g1[0] * g1[1], g1[0] * g1[1], g1[1] * g1[1]);
        let d_outer = sym_outer(g1, dg1);
        let dg = sigma * (2.0 * u0 * du) - d_outer;
        let kmat = p.covariant_hessian() + sigma * u0 - outer * (2.0 / u0);
        let dk = dp.covariant_hessian() + sigma * du - d_outer * (2.0 / u0)
            + outer * (2.0 * du / (u0 * u0));
        let dh = dk / v - kmat * (dv / (v * v));
        let shape = st.g_inv * st.h;
        let ds = st.g_inv * (dh - dg * shape);
        let dsigma = match spec.k {
            1 => ds.trace(),
            2 => ((Matrix2::identity() * shape.trace() - shape) * ds).trace(),
            k => return Err(Error::OutOfRange(format!("k = {k}"))),
        };
        let dtheta = du / v - u0 * dv / (v * v);
        let (rho, ang) = grid.position(node);
        let psi = spec.psi.eval(node, rho, ang, u0, st.support);
        let dpsi = psi.d_u * du + psi.d_theta * dtheta;
        out.push(t * dsigma + (1.0 - t) * dp.laplacian() - dpsi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hchart::{FieldRole, PolarChart};
    use crate::solver::{BoundaryData, PsiSpec};

    #[test]
    fn coloring_is_valid() {
        let grid = Grid::new(PolarChart::new(2, 0.8).unwrap(), 7, 12).unwrap();
        let col = coloring(&grid);
        for group in &col.groups {
            let mut seen = std::collections::HashSet::new();
            for &c in group {
                for &r in &col.col_rows[c] {
                    assert!(seen.insert(r), "row {r} hit twice");
                }
            }
        }
        assert!(col.groups.len() <= 30, "{} colors", col.groups.len());
    }

    #[test]
    fn laplace_jacobian_has_constant_nullspace() {
        let grid = Grid::new(PolarChart::new(2, 0.8).unwrap(), 6, 8).unwrap();
        let spec = ProblemSpec::new(grid.clone(), 1, PsiSpec::constant(0.0), BoundaryData::Constant { c: 1.0 })
            .unwrap();
        let u = ScalarField::constant(&grid, FieldRole::Graph, 1.0);
        let j = assemble_jacobian(&u, 0.0, &spec).unwrap();
        let ones = vec![1.0; grid.len()];
        let jw = j.apply(&ones);
        for node in grid.interior_nodes() {
            assert!(jw[node].abs() < 1e-6, "{}", jw[node]);
        }
        for node in grid.boundary_nodes() {
            assert_eq!(jw[node], 1.0);
        }
    }
}
