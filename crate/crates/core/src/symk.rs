//! Elementary symmetric functions of principal curvatures and the concave
//! operator `F = sigma_k^{1/k}`.
//!
//! Conventions: `sigma_0 = 1` and `sigma_j = 0` for `j > n`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// All of `sigma_0..=sigma_n` by incremental polynomial multiplication
/// `prod_i (1 + lambda_i t)`.
pub fn elementary_all(lambda: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; lambda.len() + 1];
    e[0] = 1.0;
    for (m, &l) in lambda.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            e[j] += l * e[j - 1];
        }
    }
    e
}

/// `sigma_j(lambda)` with the zero convention above `n`.
fn sigma_or_zero(lambda: &[f64], j: usize) -> f64 {
    if j > lambda.len() {
        0.0
    } else {
        elementary_all(lambda)[j]
    }
}

pub fn sigma(lambda: &[f64], k: usize) -> Result<f64> {
    if k > lambda.len() {
        return Err(Error::OutOfRange(format!("k = {k} exceeds n = {}", lambda.len())));
    }
    Ok(elementary_all(lambda)[k])
}

fn without(lambda: &[f64], skip: &[usize]) -> Vec<f64> {
    lambda
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, &l)| l)
        .collect()
}

/// `sigma_k(lambda | i)`: `sigma_k` with `lambda_i` set to zero (0-based `i`).
pub fn sigma_excl(lambda: &[f64], k: usize, i: usize) -> Result<f64> {
    if i >= lambda.len() {
        return Err(Error::OutOfRange(format!("index {i} for n = {}", lambda.len())));
    }
    Ok(sigma_or_zero(&without(lambda, &[i]), k))
}

fn sigma_excl2(lambda: &[f64], k: usize, i: usize, j: usize) -> f64 {
    sigma_or_zero(&without(lambda, &[i, j]), k)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

/// Left-minus-right residuals of the five standard `sigma_k` identities,
/// each maximised over the index `i` where one appears:
///
/// 0. `sigma_{k+1} = sigma_{k+1}(|i) + lambda_i sigma_k(|i)`
/// 1. `sum_i lambda_i sigma_k(|i) = (k+1) sigma_{k+1}`
/// 2. `sum_i sigma_k(|i) = (n-k) sigma_k`
/// 3. `d sigma_{k+1} / d lambda_i = sigma_k(|i)`
/// 4. `sum_i lambda_i^2 sigma_k(|i) = sigma_1 sigma_{k+1} - (k+2) sigma_{k+2}`
///
/// The derivative in 3 is taken as an exact divided difference: `sigma_{k+1}`
/// is affine in each `lambda_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    pub residuals: [f64; 5],
    /// `max(1, |lhs|, |rhs|)` at the worst index, for relative comparison.
    pub scales: [f64; 5],
}

impl IdentityResiduals {
    pub fn max_relative(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.scales)
            .map(|(r, s)| r.abs() / s)
            .fold(0.0, f64::max)
    }
}

pub fn identity_residuals(lambda: &[f64], k: usize) -> Result<IdentityResiduals> {
    let n = lambda.len();
    if n == 0 || k >= n {
        return Err(Error::OutOfRange(format!("identities need 0 <= k <= n-1, got k = {k}, n = {n}")));
    }
    let s = |j: usize| sigma_or_zero(lambda, j);
    let excl: Vec<f64> = (0..n).map(|i| sigma_excl2(lambda, k, i, i)).collect();
    let mut res = [0.0f64; 5];
    let mut scales = [1.0f64; 5];
    let mut record = |slot: usize, lhs: f64, rhs: f64| {
        let r = lhs - rhs;
        let sc = 1.0f64.max(lhs.abs()).max(rhs.abs());
        if r.abs() / sc >= res[slot].abs() / scales[slot] {
            res[slot] = r;
            scales[slot] = sc;
        }
    };
    for i in 0..n {
        let next_excl = sigma_excl2(lambda, k + 1, i, i);
        record(0, s(k + 1), next_excl + lambda[i] * excl[i]);

        let mut plus = lambda.to_vec();
        let mut minus = lambda.to_vec();
        plus[i] += 1.0;
        minus[i] -= 1.0;
        let dd = 0.5 * (sigma_or_zero(&plus, k + 1) - sigma_or_zero(&minus, k + 1));
        record(3, dd, excl[i]);
    }
    let sum_l: f64 = (0..n).map(|i| lambda[i] * excl[i]).sum();
    record(1, sum_l, (k + 1) as f64 * s(k + 1));
    let sum: f64 = excl.iter().sum();
    record(2, sum, (n - k) as f64 * s(k));
    let sum_l2: f64 = (0..n).map(|i| lambda[i] * lambda[i] * excl[i]).sum();
    record(4, sum_l2, s(1) * s(k + 1) - (k + 2) as f64 * s(k + 2));
    Ok(IdentityResiduals {
        residuals: res,
        scales,
    })
}

/// Membership in the Garding cone `Gamma_k = {sigma_1 > 0, ..., sigma_k > 0}`.
pub fn gamma_cone_contains(lambda: &[f64], k: usize) -> bool {
    let e = elementary_all(lambda);
    k >= 1 && k <= lambda.len() && (1..=k).all(|l| e[l] > 0.0)
}

/// `F = sigma_k^{1/k}` with its gradient and Hessian in `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEval {
    pub k: usize,
    /// `sigma_0..=sigma_n`
    pub sigmas: Vec<f64>,
    /// `sigma_{k-1}(lambda | i)`
    pub excl: Vec<f64>,
    pub f: f64,
    /// `P_i = dF/dlambda_i`
    pub grad: Vec<f64>,
    /// `d^2 F / dlambda_i dlambda_j`
    pub hess: DMatrix<f64>,
    /// `cone[l-1]` is membership in `Gamma_l`.
    pub cone: Vec<bool>,
}

pub fn f_eval(lambda: &[f64], k: usize) -> Result<SigmaEval> {
    let n = lambda.len();
    if k == 0 || k > n {
        return Err(Error::OutOfRange(format!("k = {k} for n = {n}")));
    }
    if !gamma_cone_contains(lambda, k) {
        return Err(Error::Inadmissible { k });
    }
    let sigmas = elementary_all(lambda);
    let sk = sigmas[k];
    let kf = k as f64;
    let f = sk.powf(1.0 / kf);
    let excl: Vec<f64> = (0..n).map(|i| sigma_excl2(lambda, k - 1, i, i)).collect();
    let c1 = sk.powf(1.0 / kf - 1.0) / kf;
    let grad: Vec<f64> = excl.iter().map(|e| c1 * e).collect();
    let c2 = (1.0 / kf) * (1.0 / kf - 1.0) * sk.powf(1.0 / kf - 2.0);
    let hess = DMatrix::from_fn(n, n, |i, j| {
        let cross = if i == j || k < 2 {
            0.0
        } else {
            sigma_excl2(lambda, k - 2, i, j)
        };
        c2 * excl[i] * excl[j] + c1 * cross
    });
    let cone = (1..=n).map(|l| (1..=l).all(|m| sigmas[m] > 0.0)).collect();
    Ok(SigmaEval {
        k,
        sigmas,
        excl,
        f,
        grad,
        hess,
        cone,
    })
}

/// The two pieces of `F^{ij,pq} eta_ij eta_pq` at a diagonal point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticForm {
    /// `sum_{i,j} d^2P/dlambda_i dlambda_j eta_ii eta_jj`
    pub hessian_term: f64,
    /// `sum_{i != j} (P_i - P_j)/(lambda_i - lambda_j) eta_ij^2`
    pub quotient_term: f64,
}

impl QuadraticForm {
    pub fn value(&self) -> f64 {
        self.hessian_term + self.quotient_term
    }
}

/// Second derivative of `F` at `diag(lambda)` along a symmetric direction `eta`.
///
/// Coincident eigenvalues (`|lambda_i - lambda_j| < 1e-9 max(1, |lambda_i|, |lambda_j|)`)
/// use the limit `P_ii - P_ij` of the difference quotient.
pub fn lemma41_quadratic_form(lambda: &[f64], k: usize, eta: &DMatrix<f64>) -> Result<QuadraticForm> {
    let n = lambda.len();
    if eta.nrows() != n || eta.ncols() != n {
        return Err(Error::OutOfRange(format!("eta must be {n}x{n}")));
    }
    let ev = f_eval(lambda, k)?;
    let mut hessian_term = 0.0;
    for i in 0..n {
        for j in 0..n {
            hessian_term += ev.hess[(i, j)] * eta[(i, i)] * eta[(j, j)];
        }
    }
    let mut quotient_term = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (li, lj) = (lambda[i], lambda[j]);
            let q = if (li - lj).abs() < 1e-9 * 1.0f64.max(li.abs()).max(lj.abs()) {
                ev.hess[(i, i)] - ev.hess[(i, j)]
            } else {
                (ev.grad[i] - ev.grad[j]) / (li - lj)
            };
            let e = 0.5 * (eta[(i, j)] + eta[(j, i)]);
            quotient_term += q * e * e;
        }
    }
    Ok(QuadraticForm {
        hessian_term,
        quotient_term,
    })
}

/// Newton inequality `(s_{k+1}/C^{k+1})(s_{k-1}/C^{k-1}) <= (s_k/C^k)^2`.
/// Returns `(holds, rhs - lhs)`; `holds` allows relative round-off `1e-12`.
pub fn newton_maclaurin_check(lambda: &[f64], k: usize) -> Result<(bool, f64)> {
    let n = lambda.len();
    if k == 0 || k > n {
        return Err(Error::OutOfRange(format!("k = {k} for n = {n}")));
    }
    let e = elementary_all(lambda);
    let s = |j: usize| if j > n { 0.0 } else { e[j] / binomial(n, j) };
    let lhs = s(k + 1) * s(k - 1);
    let rhs = s(k) * s(k);
    let slack = rhs - lhs;
    Ok((slack >= -1e-12 * lhs.abs().max(rhs.abs()), slack))
}

/// `tr F^{ij} = sum_i P_i`.
pub fn trace_fij(lambda: &[f64], k: usize) -> Result<f64> {
    Ok(f_eval(lambda, k)?.grad.iter().sum())
}

/// Closed form `(n-k+1) sigma_{k-1} / (k f^{k-1})` of the trace.
pub fn trace_fij_closed_form(lambda: &[f64], k: usize) -> Result<f64> {
    let ev = f_eval(lambda, k)?;
    let n = lambda.len();
    Ok((n - k + 1) as f64 * ev.sigmas[k - 1] / (k as f64 * ev.f.powi(k as i32 - 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn subsets_oracle(lambda: &[f64], k: usize) -> f64 {
        let n = lambda.len();
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| lambda[i]).product::<f64>())
            .sum()
    }

    const L: [f64; 3] = [3.0, 2.0, 1.0];

    #[test]
    fn sigma_values() {
        assert_eq!(sigma(&L, 0).unwrap(), 1.0);
        assert_eq!(sigma(&L, 1).unwrap(), 6.0);
        assert_eq!(sigma(&L, 2).unwrap(), subsets_oracle(&L, 2));
        assert_eq!(sigma(&L, 2).unwrap(), 11.0);
        assert_eq!(sigma(&L, 3).unwrap(), 6.0);
        assert!(sigma(&L, 4).is_err());
        let x = [0.3, -1.2, 2.5, 0.7, -0.4];
        for k in 0..=5 {
            assert_relative_eq!(sigma(&x, k).unwrap(), subsets_oracle(&x, k), epsilon = 1e-13);
        }
    }

    #[test]
    fn exclusion_values() {
        assert_eq!(sigma_excl(&L, 2, 2).unwrap(), 6.0);
        assert_eq!(sigma_excl(&L, 0, 1).unwrap(), 1.0);
        let c = [1.7; 4];
        for k in 0..=3 {
            assert_relative_eq!(
                sigma_excl(&c, k, 2).unwrap(),
                binomial(3, k) * 1.7f64.powi(k as i32),
                epsilon = 1e-13
            );
        }
        assert!(sigma_excl(&L, 1, 3).is_err());
    }

    #[test]
    fn identities_on_worked_example() {
        // sigma_2 = sigma_2(|1) + lambda_1 sigma_1(|1): 11 = 2 + 3*3
        assert_eq!(sigma_excl(&L, 2, 0).unwrap(), 2.0);
        assert_eq!(sigma_excl(&L, 1, 0).unwrap(), 3.0);
        // sum lambda_i sigma_1(|i) = 3*3 + 2*4 + 1*5 = 22 = 2 sigma_2
        let s: f64 = (0..3).map(|i| L[i] * sigma_excl(&L, 1, i).unwrap()).sum();
        assert_eq!(s, 22.0);
        for k in 0..3 {
            let r = identity_residuals(&L, k).unwrap();
            assert!(r.max_relative() < 1e-14, "{r:?}");
        }
        let r = identity_residuals(&[0.9; 3], 1).unwrap();
        assert!(r.max_relative() < 1e-14);
        assert!(identity_residuals(&L, 3).is_err());
    }

    #[test]
    fn cone_membership() {
        assert!(gamma_cone_contains(&[2.0, 1.0, -0.5], 2));
        assert!(!gamma_cone_contains(&[1.0, 1.0, -1.0], 2));
        assert!(gamma_cone_contains(&[3.0, -1.0], 1));
        assert!(!gamma_cone_contains(&[3.0, -1.0], 2));
        assert!(!gamma_cone_contains(&[3.0, 1.0], 0));
    }

    #[test]
    fn f_values() {
        let ev = f_eval(&L, 2).unwrap();
        assert_relative_eq!(ev.f, 3.3166248, epsilon = 1e-7);
        assert_relative_eq!(ev.grad[0], 0.4522670, epsilon = 1e-7);
        assert_eq!(ev.cone, vec![true, true, true]);
        let ev = f_eval(&[0.8, 0.8], 1).unwrap();
        assert_relative_eq!(ev.f, 1.6);
        assert_eq!(ev.grad, vec![1.0, 1.0]);
        let ev = f_eval(&[1.0, 1.0, 1.0], 3).unwrap();
        assert_relative_eq!(ev.f, 1.0);
        for p in &ev.grad {
            assert_relative_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(f_eval(&[1.0, 1.0, -1.0], 2), Err(Error::Inadmissible { k: 2 }));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-6;
        let f = |l: &[f64]| sigma(l, 2).unwrap().sqrt();
        let ev = f_eval(&L, 2).unwrap();
        for i in 0..3 {
            let mut p = L.to_vec();
            let mut m = L.to_vec();
            p[i] += h;
            m[i] -= h;
            assert_relative_eq!(ev.grad[i], (f(&p) - f(&m)) / (2.0 * h), max_relative = 1e-8);
        }
    }

    #[test]
    fn quadratic_form_examples() {
        let eta = DMatrix::from_row_slice(3, 3, &[0.3, 1.0, -0.2, 1.0, 0.5, 0.7, -0.2, 0.7, 1.1]);
        let q = lemma41_quadratic_form(&[0.5, 1.5, -0.3], 1, &eta).unwrap();
        assert_relative_eq!(q.value(), 0.0, epsilon = 1e-15);

        let id = DMatrix::identity(3, 3);
        let q = lemma41_quadratic_form(&L, 2, &id).unwrap();
        let ev = f_eval(&L, 2).unwrap();
        assert_relative_eq!(q.value(), ev.hess.sum(), epsilon = 1e-15);
        assert_eq!(q.quotient_term, 0.0);

        let mut e12 = DMatrix::zeros(3, 3);
        e12[(0, 1)] = 1.0;
        e12[(1, 0)] = 1.0;
        let q = lemma41_quadratic_form(&L, 2, &e12).unwrap();
        assert_relative_eq!(q.value(), 2.0 * (ev.grad[0] - ev.grad[1]) / 1.0, epsilon = 1e-15);
        assert!(q.quotient_term <= 0.0);
    }

    #[test]
    fn quadratic_form_limit_branch_is_continuous() {
        let mut eta = DMatrix::zeros(3, 3);
        eta[(0, 1)] = 0.8;
        eta[(1, 0)] = 0.8;
        let at = |d: f64| lemma41_quadratic_form(&[1.2 + d, 1.2, 0.4], 2, &eta).unwrap().value();
        assert_relative_eq!(at(0.0), at(1e-6), max_relative = 1e-5);
        assert_relative_eq!(at(0.0), at(-1e-6), max_relative = 1e-5);
    }

    #[test]
    fn newton_inequality_examples() {
        let (ok, slack) = newton_maclaurin_check(&L, 2).unwrap();
        assert!(ok);
        assert_relative_eq!(slack, 121.0 / 9.0 - 12.0, epsilon = 1e-13);
        assert_relative_eq!(slack, 1.4444444, epsilon = 1e-7);
        for k in 1..=2 {
            let (ok, slack) = newton_maclaurin_check(&[0.7; 3], k).unwrap();
            assert!(ok);
            assert!(slack.abs() < 1e-14);
        }
        let (ok, slack) = newton_maclaurin_check(&[2.0, 1.0, -0.5], 1).unwrap();
        assert!(ok && slack > 0.0);
    }

    #[test]
    fn trace_routes_agree() {
        assert_relative_eq!(trace_fij(&[1.0, 1.0], 1).unwrap(), 2.0);
        let a = trace_fij(&L, 2).unwrap();
        let b = trace_fij_closed_form(&L, 2).unwrap();
        // (3 + 4 + 5) / (2 sqrt 11)
        assert_relative_eq!(a, 6.0 / 11f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(a, 1.8090681, epsilon = 1e-7);
        assert_relative_eq!(a, b, epsilon = 1e-14);
        assert_relative_eq!(trace_fij(&[1.0; 3], 3).unwrap(), 1.0, epsilon = 1e-15);
        assert!(trace_fij(&[1.0, -2.0], 1).is_err());
    }
}
