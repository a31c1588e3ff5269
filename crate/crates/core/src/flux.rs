//! Pointwise nonlinear operators: the double-phase flux and its
//! δ-regularization, the non-divergence operator `F`, the lower-order bound
//! `g`, the growth bound on `f`, and the three-phase flux.
//!
//! Powers of `|ξ|` go through [`pow_abs`]: gradients with `|ξ| < 1e-300`
//! count as zero so that negative exponents never produce NaN.

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::params::{ExponentParams, MultiPhaseParams};

/// Below this norm a gradient is treated as zero.
pub const ZERO_GRADIENT: f64 = 1e-300;

/// `r^e` for `r ≥ 0` via `exp(e·ln r)`, with `r < 1e-300` mapped to 0.
#[inline]
pub fn pow_abs(r: f64, e: f64) -> f64 {
    if r < ZERO_GRADIENT {
        0.0
    } else {
        (e * r.ln()).exp()
    }
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "matrix data has {} entries, expected {}",
                data.len(),
                n * n
            )));
        }
        let m = Self { n, data };
        for i in 0..n {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self { n: 1, data: vec![v] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `ηᵀ X η`.
    pub fn quad(&self, eta: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += eta[i] * self.get(i, j) * eta[j];
            }
        }
        s
    }
}

/// Evaluation state at one space-time point.
#[derive(Debug, Clone)]
pub struct PointState {
    pub x: Vec<f64>,
    pub t: f64,
    pub xi: Vec<f64>,
    pub hessian: Option<SymMatrix>,
    pub a_val: f64,
    pub b_val: Option<f64>,
}

impl PointState {
    pub fn validate(&self) -> Result<()> {
        if self.a_val < 0.0 || self.b_val.is_some_and(|b| b < 0.0) {
            return Err(Error::InvalidInput("coefficient values must be >= 0".into()));
        }
        if self.xi.len() != self.x.len() {
            return Err(Error::InvalidInput("gradient and point dimensions differ".into()));
        }
        if let Some(h) = &self.hessian {
            if h.dim() != self.x.len() {
                return Err(Error::InvalidInput("Hessian dimension mismatch".into()));
            }
        }
        Ok(())
    }
}

/// `H(z, ξ) = |ξ|^p + a|ξ|^q`.
pub fn hamiltonian_h(params: &ExponentParams, a_val: f64, xi: &[f64]) -> f64 {
    let r = norm(xi);
    pow_abs(r, params.p) + a_val * pow_abs(r, params.q)
}

/// Scalar weight `w` with `A(ξ) = w·ξ`: `|ξ|^{p−2} + a|ξ|^{q−2}`.
#[inline]
fn flux_weight(p: f64, q: f64, a_val: f64, r: f64) -> f64 {
    pow_abs(r, p - 2.0) + a_val * pow_abs(r, q - 2.0)
}

/// `A(ξ) = |ξ|^{p−2}ξ + a|ξ|^{q−2}ξ`, zero at `ξ = 0`.
pub fn flux_a(params: &ExponentParams, a_val: f64, xi: &[f64]) -> Vec<f64> {
    let w = flux_weight(params.p, params.q, a_val, norm(xi));
    xi.iter().map(|v| w * v).collect()
}

#[inline]
pub fn flux_a_1d(p: f64, q: f64, a_val: f64, xi: f64) -> f64 {
    flux_weight(p, q, a_val, xi.abs()) * xi
}

/// `(δ + |ξ|²)^{(p−2)/2}ξ + a(δ + |ξ|²)^{(q−2)/2}ξ`.
pub fn flux_regularized(params: &ExponentParams, a_val: f64, xi: &[f64], delta: f64) -> Vec<f64> {
    let s = delta + dot(xi, xi);
    let w = pow_abs(s, 0.5 * (params.p - 2.0)) + a_val * pow_abs(s, 0.5 * (params.q - 2.0));
    xi.iter().map(|v| w * v).collect()
}

/// One-dimensional regularized flux and its derivative in `ξ`.
#[inline]
pub fn flux_regularized_1d(p: f64, q: f64, a_val: f64, xi: f64, delta: f64) -> (f64, f64) {
    let s = delta + xi * xi;
    let (fp, dp) = reg_term(p, s, xi);
    if a_val == 0.0 {
        return (fp, dp);
    }
    let (fq, dq) = reg_term(q, s, xi);
    (fp + a_val * fq, dp + a_val * dq)
}

#[inline]
fn reg_term(r: f64, s: f64, xi: f64) -> (f64, f64) {
    if r == 2.0 {
        return (xi, 1.0);
    }
    // d/dξ [s^{(r-2)/2} ξ] = s^{(r-4)/2} (δ + (r-1) ξ²) with s = δ + ξ²
    let w = pow_abs(s, 0.5 * (r - 2.0));
    let dw = if s > 0.0 { w / s } else { 0.0 };
    let delta = s - xi * xi;
    (w * xi, dw * (delta + (r - 1.0) * xi * xi))
}

/// Non-divergence form of the double-phase operator at a point with gradient
/// `η ≠ 0` and Hessian `X`.
pub fn operator_f(
    params: &ExponentParams,
    coeff: &Coefficient,
    x: &[f64],
    t: f64,
    eta: &[f64],
    hess: &SymMatrix,
) -> Result<f64> {
    let a_val = coeff.eval(x, t);
    operator_f_value(params, a_val, eta, hess)
}

/// [`operator_f`] with the coefficient value supplied.
pub fn operator_f_value(params: &ExponentParams, a_val: f64, eta: &[f64], hess: &SymMatrix) -> Result<f64> {
    let r = norm(eta);
    if r < ZERO_GRADIENT {
        return Err(Error::InvalidInput("operator F is undefined at eta = 0".into()));
    }
    if hess.dim() != eta.len() {
        return Err(Error::InvalidInput("Hessian dimension mismatch".into()));
    }
    let tr = hess.trace();
    let normal = hess.quad(eta) / (r * r);
    let phase = |e: f64| pow_abs(r, e - 2.0) * (tr + (e - 2.0) * normal);
    Ok(phase(params.p) + a_val * phase(params.q))
}

/// `g = ‖Da‖_∞|η|^{q−1} + C_f(1 + |η|^{β1} + a|η|^{β2})`.
pub fn bound_g(params: &ExponentParams, coeff: &Coefficient, x: &[f64], t: f64, eta: &[f64]) -> f64 {
    let a_val = coeff.eval(x, t);
    bound_g_value(params, coeff.lip_space, a_val, eta)
}

pub fn bound_g_value(params: &ExponentParams, lip_space: f64, a_val: f64, eta: &[f64]) -> f64 {
    let r = norm(eta);
    lip_space * pow_abs(r, params.q - 1.0) + rhs_growth_bound_norm(params, a_val, r)
}

/// `C_f(1 + |ξ|^{β1} + a|ξ|^{β2})`.
pub fn rhs_growth_bound(params: &ExponentParams, a_val: f64, xi: &[f64]) -> f64 {
    rhs_growth_bound_norm(params, a_val, norm(xi))
}

#[inline]
pub fn rhs_growth_bound_norm(params: &ExponentParams, a_val: f64, r: f64) -> f64 {
    params.c_f * (1.0 + pow_abs(r, params.beta1) + a_val * pow_abs(r, params.beta2))
}

/// `|ξ|^{p−2}ξ + a|ξ|^{q−2}ξ + b|ξ|^{s−2}ξ`.
pub fn multiphase_flux(params: &MultiPhaseParams, a_val: f64, b_val: f64, xi: &[f64]) -> Vec<f64> {
    let r = norm(xi);
    let w = pow_abs(r, params.p - 2.0) + a_val * pow_abs(r, params.q - 2.0) + b_val * pow_abs(r, params.s - 2.0);
    xi.iter().map(|v| w * v).collect()
}

/// Vector inequalities for the map `ξ ↦ |ξ|^{r−2}ξ`.
pub mod vector_ineq {
    use super::{dot, norm, pow_abs};

    /// `|ξ|^{r−2}ξ`.
    pub fn power_map(xi: &[f64], r: f64) -> Vec<f64> {
        let w = pow_abs(norm(xi), r - 2.0);
        xi.iter().map(|v| w * v).collect()
    }

    /// `(|a|^{r−2}a − |b|^{r−2}b)·(a − b)`.
    pub fn monotonicity_pairing(a: &[f64], b: &[f64], r: f64) -> f64 {
        let pa = power_map(a, r);
        let pb = power_map(b, r);
        let diff: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
        let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        dot(&diff, &ab)
    }

    /// Lower bound for `1 < r < 2`: `(r−1)|a−b|²(1+|a|²+|b|²)^{(r−2)/2}`.
    pub fn singular_lower_bound(a: &[f64], b: &[f64], r: f64) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (r - 1.0) * d2 * (1.0 + dot(a, a) + dot(b, b)).powf(0.5 * (r - 2.0))
    }

    /// Lower bound for `r ≥ 2`: `2^{2−r}|a−b|^r`.
    pub fn degenerate_lower_bound(a: &[f64], b: &[f64], r: f64) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        2f64.powf(2.0 - r) * pow_abs(d, r)
    }

    /// `||a|^{r−2}a − |b|^{r−2}b|`.
    pub fn power_map_difference(a: &[f64], b: &[f64], r: f64) -> f64 {
        let pa = power_map(a, r);
        let pb = power_map(b, r);
        pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    /// Upper bound for `1 < r < 2`: `2^{2−r}|a−b|^{r−1}`.
    pub fn singular_continuity_bound(a: &[f64], b: &[f64], r: f64) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        2f64.powf(2.0 - r) * pow_abs(d, r - 1.0)
    }

    /// Natural magnitude of the pairing, `(|a|^{r−1} + |b|^{r−1})|a − b|`,
    /// used to scale rounding slack.
    pub fn pairing_scale(a: &[f64], b: &[f64], r: f64) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        (pow_abs(norm(a), r - 1.0) + pow_abs(norm(b), r - 1.0)) * d
    }
}
