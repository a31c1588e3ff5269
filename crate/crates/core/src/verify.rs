//! Pass/fail checkers on discrete fields: comparison, class S jets,
//! Caccioppoli energy bounds and `L^{r1,r2}` gradient distances.

use rayon::prelude::*;

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::field::{trapezoid_weight, GridField};
use crate::flux::{bound_g_value, operator_f_value, pow_abs, SymMatrix};
use crate::params::ExponentParams;
use crate::transforms::modular;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub worst_value: f64,
    /// Node `(i, k)` where the worst value occurs.
    pub worst_location: Option<(usize, usize)>,
    pub tolerance: f64,
    pub metadata: Vec<(String, f64)>,
}

impl CheckReport {
    pub fn meta(&self, key: &str) -> Option<f64> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

/// Largest centered spatial difference quotient over interior nodes.
pub fn gradient_sup(u: &GridField) -> f64 {
    let mut m: f64 = 0.0;
    for k in 0..u.nt() {
        let row = u.slice(k);
        for w in row.windows(2) {
            m = m.max((w[1] - w[0]).abs() / u.hx());
        }
    }
    m
}

/// Interior comparison `u ≤ v + tol`, provided it holds on the bottom and
/// lateral faces.
pub fn comparison_check(u: &GridField, v: &GridField, tol: f64) -> Result<CheckReport> {
    u.ensure_same_grid(v)?;
    let (nx, nt) = (u.nx(), u.nt());
    let mut boundary = (f64::NEG_INFINITY, (0, 0));
    let mut interior = (f64::NEG_INFINITY, None);
    for k in 0..nt {
        for i in 0..nx {
            let d = u.get(i, k) - v.get(i, k);
            if k == 0 || i == 0 || i == nx - 1 {
                if d > boundary.0 {
                    boundary = (d, (i, k));
                }
            } else if d > interior.0 {
                interior = (d, Some((i, k)));
            }
        }
    }
    if boundary.0 > tol {
        return Err(Error::BoundaryHypothesis {
            excess: boundary.0,
            location: boundary.1,
        });
    }
    let worst = if interior.1.is_some() {
        interior.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(CheckReport {
        name: "comparison".into(),
        pass: worst <= tol,
        worst_value: worst,
        worst_location: interior.1,
        tolerance: tol,
        metadata: vec![
            ("grad_sup_u".into(), gradient_sup(u)),
            ("grad_sup_v".into(), gradient_sup(v)),
        ],
    })
}

/// Default cutoff `5 h_x^{1/2} osc u` below which gradients count as vanishing.
pub fn default_eta_min(u: &GridField) -> f64 {
    5.0 * u.hx().sqrt() * u.osc()
}

/// Default tolerance `10 (h_x + h_t) osc u`.
pub fn default_class_s_tol(u: &GridField) -> f64 {
    10.0 * (u.hx() + u.ht()) * u.osc()
}

/// Discrete class-S test. At every interior node the jet `(θ, η, X)` comes
/// from centered differences; where `|η| ≥ eta_min` both
/// `θ − F + g ≥ −tol` and `θ − F − g ≤ tol` are required. The reported
/// worst value is the smaller of the two margins.
pub fn class_s_check(
    u: &GridField,
    params: &ExponentParams,
    coeff: &Coefficient,
    eta_min: f64,
    tol: f64,
) -> CheckReport {
    let (nx, nt) = (u.nx(), u.nt());
    let (hx, ht) = (u.hx(), u.ht());
    // (worst margin, its location, tested, skipped) per time level
    type Row = (f64, Option<(usize, usize)>, usize, usize);
    let rows: Vec<Row> = (1..nt.saturating_sub(1))
        .into_par_iter()
        .map(|k| {
            let t = u.t(k);
            let mut worst = (f64::INFINITY, None);
            let (mut tested, mut skipped) = (0, 0);
            for i in 1..nx - 1 {
                let eta = (u.get(i + 1, k) - u.get(i - 1, k)) / (2.0 * hx);
                if eta.abs() < eta_min || eta == 0.0 {
                    skipped += 1;
                    continue;
                }
                tested += 1;
                let theta = (u.get(i, k + 1) - u.get(i, k - 1)) / (2.0 * ht);
                let xx = (u.get(i + 1, k) - 2.0 * u.get(i, k) + u.get(i - 1, k)) / (hx * hx);
                let a_val = coeff.eval_1d(u.x(i), t);
                let f = operator_f_value(params, a_val, &[eta], &SymMatrix::scalar(xx)).expect("eta is nonzero");
                let g = bound_g_value(params, coeff.lip_space, a_val, &[eta]);
                let margin = (theta - f + g).min(g - (theta - f));
                if margin < worst.0 {
                    worst = (margin, Some((i, k)));
                }
            }
            (worst.0, worst.1, tested, skipped)
        })
        .collect();
    let mut worst = (f64::INFINITY, None);
    let (mut tested, mut skipped) = (0usize, 0usize);
    for r in &rows {
        if r.0 < worst.0 {
            worst = (r.0, r.1);
        }
        tested += r.2;
        skipped += r.3;
    }
    let scale = (hx + ht) * u.osc();
    let needed = if worst.0.is_finite() && scale > 0.0 {
        (-worst.0).max(0.0) / scale
    } else {
        0.0
    };
    CheckReport {
        name: "class_s".into(),
        pass: worst.0 >= -tol,
        worst_value: worst.0,
        worst_location: worst.1,
        tolerance: tol,
        metadata: vec![
            ("tested".into(), tested as f64),
            ("skipped".into(), skipped as f64),
            ("eta_min".into(), eta_min),
            // smallest c with worst >= -c (h_x + h_t) osc u
            ("c_needed".into(), needed),
        ],
    }
}

/// Smooth cutoff with values in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// `ψ((x − xc)/rx)`, constant in time.
    Space { xc: f64, rx: f64 },
    /// `ψ((x − xc)/rx) ψ((t − tc)/rt)`.
    Tensor { xc: f64, rx: f64, tc: f64, rt: f64 },
}

/// `ψ(s) = exp(1 − 1/(1 − s²))` on `|s| < 1` and its derivative.
fn psi(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - s * s;
    let v = (1.0 - 1.0 / d).exp();
    (v, -2.0 * s / (d * d) * v)
}

impl Cutoff {
    /// `(ξ, ∂xξ, ∂tξ)`.
    pub fn eval(&self, x: f64, t: f64) -> (f64, f64, f64) {
        match *self {
            Self::Space { xc, rx } => {
                let (v, d) = psi((x - xc) / rx);
                (v, d / rx, 0.0)
            }
            Self::Tensor { xc, rx, tc, rt } => {
                let (a, da) = psi((x - xc) / rx);
                let (b, db) = psi((t - tc) / rt);
                (a * b, da / rx * b, a * db / rt)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaccioppoliReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub cap: f64,
    pub pass: bool,
    /// Observed `sup |u|` on the support of the cutoff.
    pub sup_u: f64,
}

/// Both sides of the energy bound
///
/// ```text
/// ∫ ξ^q (|Du|^p + a|Du|^q)
///   ≤ C ∫ M²|∂t ξ^q| + max(M^p, M^q)(|Dξ|^p + a|Dξ|^q) + (M^{p/(p−β1)} + M^{p/(p−β2)} + M) ξ^q
/// ```
///
/// by trapezoid quadrature with centered gradients of `u`. The ratio
/// `lhs/rhs` passes when it is at most `cap`.
pub fn caccioppoli_check(
    u: &GridField,
    cutoff: &Cutoff,
    coeff: &Coefficient,
    params: &ExponentParams,
    m: f64,
    cap: f64,
) -> Result<CaccioppoliReport> {
    let (p, q) = (params.p, params.q);
    if params.beta1 >= p || params.beta2 >= p {
        return Err(Error::InvalidParams(format!(
            "energy bound needs beta1, beta2 < p (beta1 = {}, beta2 = {}, p = {p})",
            params.beta1, params.beta2
        )));
    }
    let (nx, nt) = (u.nx(), u.nt());
    let (hx, ht) = (u.hx(), u.ht());
    let mut sup_u: f64 = 0.0;
    for k in 0..nt {
        for i in 0..nx {
            if cutoff.eval(u.x(i), u.t(k)).0 > 0.0 {
                sup_u = sup_u.max(u.get(i, k).abs());
            }
        }
    }
    if m < sup_u {
        return Err(Error::InvalidInput(format!(
            "M = {m} is below sup |u| = {sup_u} on the cutoff support"
        )));
    }
    let m_pq = m.powf(p).max(m.powf(q));
    let m_low = m.powf(p / (p - params.beta1)) + m.powf(p / (p - params.beta2)) + m;
    let (lhs, rhs) = (0..nt)
        .into_par_iter()
        .map(|k| {
            let t = u.t(k);
            let wt = trapezoid_weight(k, nt, ht);
            let (mut l, mut r) = (0.0, 0.0);
            for i in 0..nx {
                let x = u.x(i);
                let (xi, dxi, dtxi) = cutoff.eval(x, t);
                if xi == 0.0 && dxi == 0.0 && dtxi == 0.0 {
                    continue;
                }
                let du = if i == 0 {
                    (u.get(1, k) - u.get(0, k)) / hx
                } else if i == nx - 1 {
                    (u.get(i, k) - u.get(i - 1, k)) / hx
                } else {
                    (u.get(i + 1, k) - u.get(i - 1, k)) / (2.0 * hx)
                };
                let a_val = coeff.eval_1d(x, t);
                let xq = pow_abs(xi, q);
                let w = wt * trapezoid_weight(i, nx, hx);
                l += w * xq * (pow_abs(du.abs(), p) + a_val * pow_abs(du.abs(), q));
                // ∂t ξ^q = q ξ^{q−1} ∂t ξ
                let dt_xq = q * pow_abs(xi, q - 1.0) * dtxi;
                r += w
                    * (m * m * dt_xq.abs()
                        + m_pq * (pow_abs(dxi.abs(), p) + a_val * pow_abs(dxi.abs(), q))
                        + m_low * xq);
            }
            (l, r)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
    Ok(CaccioppoliReport {
        lhs,
        rhs,
        ratio,
        cap,
        pass: ratio <= cap,
        sup_u,
    })
}

/// `∫ |Du1 − Du2|^{r1} + a|Du1 − Du2|^{r2}` with forward differences, for
/// `1 < r1 < p` and `1 < r2 < q`.
pub fn lr_modular(
    u1: &GridField,
    u2: &GridField,
    r1: f64,
    r2: f64,
    coeff: &Coefficient,
    params: &ExponentParams,
) -> Result<f64> {
    if !(r1 > 1.0 && r1 < params.p && r2 > 1.0 && r2 < params.q) {
        return Err(Error::InvalidParams(format!(
            "need 1 < r1 < p and 1 < r2 < q (r1 = {r1}, r2 = {r2}, p = {}, q = {})",
            params.p, params.q
        )));
    }
    let diff = u1.zip_with(u2, |a, b| a - b)?.forward_dx()?;
    Ok(modular(&diff, coeff, r1, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SpaceTimeBox;
    use approx::assert_relative_eq;

    fn unit() -> SpaceTimeBox {
        SpaceTimeBox::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn comparison_examples() {
        let u = GridField::from_fn(&unit(), 10, 10, |x, t| x * t).unwrap();
        let r = comparison_check(&u, &u, 0.0).unwrap();
        assert!(r.pass && r.worst_value == 0.0);
        let v = u.map(|x| x + 1.0);
        assert!(comparison_check(&u, &v, 0.0).unwrap().pass);
        assert!(matches!(
            comparison_check(&v, &u, 1e-8),
            Err(Error::BoundaryHypothesis { .. })
        ));
    }

    #[test]
    fn comparison_swap_flips_interior_failure() {
        let u = GridField::from_fn(&unit(), 10, 10, |_, _| 0.0).unwrap();
        let v = GridField::from_fn(&unit(), 10, 10, |x, t| x * (1.0 - x) * t).unwrap();
        assert!(comparison_check(&u, &v, 1e-12).unwrap().pass);
        assert!(!comparison_check(&v, &u, 1e-12).unwrap().pass);
    }

    #[test]
    fn class_s_affine_and_constant() {
        let par = ExponentParams::homogeneous(1.5, 2.0).unwrap();
        let coeff = Coefficient::constant(0.5);
        let u = GridField::from_fn(&unit(), 10, 10, |x, _| 2.0 * x - 1.0).unwrap();
        let r = class_s_check(&u, &par, &coeff, 1e-3, 1e-12);
        assert!(r.pass);
        assert!(r.worst_value.abs() < 1e-12);
        let c = GridField::from_fn(&unit(), 10, 10, |_, _| 4.0).unwrap();
        let r = class_s_check(&c, &par, &coeff, default_eta_min(&c), 1e-12);
        assert!(r.pass);
        assert_eq!(r.meta("tested"), Some(0.0));
        assert_eq!(r.meta("skipped"), Some(81.0));
    }

    #[test]
    fn caccioppoli_constant_field() {
        let par = ExponentParams::homogeneous(2.0, 2.5).unwrap();
        let u = GridField::from_fn(&unit(), 40, 40, |_, _| 0.7).unwrap();
        let cut = Cutoff::Space { xc: 0.5, rx: 0.4 };
        let r = caccioppoli_check(&u, &cut, &Coefficient::constant(1.0), &par, 1.0, 100.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.ratio, 0.0);
        assert!(r.pass);
        assert!(caccioppoli_check(&u, &cut, &Coefficient::constant(1.0), &par, 0.5, 100.0).is_err());
    }

    #[test]
    fn cutoff_derivatives_match_differences() {
        let c = Cutoff::Tensor {
            xc: 0.5,
            rx: 0.4,
            tc: 0.5,
            rt: 0.3,
        };
        let h = 1e-6;
        for &(x, t) in &[(0.4, 0.6), (0.7, 0.35), (0.5, 0.5)] {
            let (_, dx, dt) = c.eval(x, t);
            let fx = (c.eval(x + h, t).0 - c.eval(x - h, t).0) / (2.0 * h);
            let ft = (c.eval(x, t + h).0 - c.eval(x, t - h).0) / (2.0 * h);
            assert_relative_eq!(dx, fx, epsilon = 1e-6);
            assert_relative_eq!(dt, ft, epsilon = 1e-6);
        }
        assert_eq!(c.eval(0.5, 0.5).0, 1.0);
    }

    #[test]
    fn lr_modular_examples() {
        let par = ExponentParams::homogeneous(2.0, 3.0).unwrap();
        let one = Coefficient::constant(1.0);
        let u = GridField::from_fn(&unit(), 32, 16, |x, t| (3.0 * x).sin() + t).unwrap();
        assert_eq!(lr_modular(&u, &u, 1.5, 2.0, &one, &par).unwrap(), 0.0);
        let s = 0.7;
        let v = GridField::from_fn(&unit(), 32, 16, |x, t| (3.0 * x).sin() + t + s * x).unwrap();
        let m = lr_modular(&u, &v, 1.5, 2.0, &one, &par).unwrap();
        assert_relative_eq!(m, s.powf(1.5) + s * s, max_relative = 1e-12);
        assert!(lr_modular(&u, &v, 2.0, 2.0, &one, &par).is_err());
        assert!(lr_modular(&u, &v, 1.5, 3.0, &one, &par).is_err());
    }
}
