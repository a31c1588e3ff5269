//! Exponents and structural constants of the double-phase equation.

use crate::error::{Error, Result};

/// Exponents `p ≤ q`, growth exponents `β1 < p`, `β2 < q` and the growth
/// constant `C_f` of the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentParams {
    pub p: f64,
    pub q: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub c_f: f64,
    /// Accept the borderline gap `q = p + 1` in [`ExponentParams::check_gap`].
    pub borderline_ok: bool,
}

impl ExponentParams {
    pub fn new(p: f64, q: f64, beta1: f64, beta2: f64, c_f: f64) -> Result<Self> {
        let params = Self {
            p,
            q,
            beta1,
            beta2,
            c_f,
            borderline_ok: false,
        };
        params.validate()?;
        Ok(params)
    }

    /// Exponents with `β1 = β2 = 1` and `C_f = 0` (no lower-order term).
    pub fn homogeneous(p: f64, q: f64) -> Result<Self> {
        Self::new(p, q, 1.0, 1.0, 0.0)
    }

    pub fn with_borderline(mut self, ok: bool) -> Self {
        self.borderline_ok = ok;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ExponentParams {
            p,
            q,
            beta1,
            beta2,
            c_f,
            ..
        } = *self;
        if !(p.is_finite() && q.is_finite() && beta1.is_finite() && beta2.is_finite()) {
            return Err(Error::InvalidParams("exponents must be finite".into()));
        }
        if p <= 1.0 {
            return Err(Error::InvalidParams(format!("p > 1 violated (p = {p})")));
        }
        if q < p {
            return Err(Error::InvalidParams(format!("q >= p violated (p = {p}, q = {q})")));
        }
        if !(1.0..p).contains(&beta1) {
            return Err(Error::InvalidParams(format!(
                "1 <= beta1 < p violated (beta1 = {beta1}, p = {p})"
            )));
        }
        if !(1.0..q).contains(&beta2) {
            return Err(Error::InvalidParams(format!(
                "1 <= beta2 < q violated (beta2 = {beta2}, q = {q})"
            )));
        }
        if !(c_f >= 0.0) {
            return Err(Error::InvalidParams(format!("C_f >= 0 violated (C_f = {c_f})")));
        }
        Ok(())
    }

    /// `q ≤ p + 1`.
    pub fn in_gap_range(&self) -> bool {
        self.q <= self.p + 1.0
    }

    /// Strict gap `q < p + 1`; the borderline `q = p + 1` only with `borderline_ok`.
    pub fn check_gap(&self) -> Result<()> {
        if self.q < self.p + 1.0 || (self.q == self.p + 1.0 && self.borderline_ok) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "gap condition q < p + 1 violated (p = {}, q = {})",
                self.p, self.q
            )))
        }
    }

    pub fn is_singular(&self) -> bool {
        self.p < 2.0
    }
}

/// Three-phase exponents `p ≤ q ≤ s` with growth exponents `β1, β2, β3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiPhaseParams {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub c_f: f64,
}

impl MultiPhaseParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(p: f64, q: f64, s: f64, beta1: f64, beta2: f64, beta3: f64, c_f: f64) -> Result<Self> {
        if p <= 1.0 || !(p <= q && q <= s) {
            return Err(Error::InvalidParams(format!(
                "1 < p <= q <= s violated (p = {p}, q = {q}, s = {s})"
            )));
        }
        for (name, beta, top) in [("beta1", beta1, p), ("beta2", beta2, q), ("beta3", beta3, s)] {
            if !(1.0..top).contains(&beta) {
                return Err(Error::InvalidParams(format!(
                    "1 <= {name} < {top} violated ({name} = {beta})"
                )));
            }
        }
        if !(c_f >= 0.0) {
            return Err(Error::InvalidParams(format!("C_f >= 0 violated (C_f = {c_f})")));
        }
        Ok(Self {
            p,
            q,
            s,
            beta1,
            beta2,
            beta3,
            c_f,
        })
    }

    /// `s ≤ p + 1`.
    pub fn in_gap_range(&self) -> bool {
        self.s <= self.p + 1.0
    }
}

/// `γ = max(q − p, β1 − p + 1, β2 − q + 1) + 1`.
pub fn gamma_exponent(params: &ExponentParams) -> f64 {
    let ExponentParams { p, q, beta1, beta2, .. } = *params;
    (q - p).max(beta1 - p + 1.0).max(beta2 - q + 1.0) + 1.0
}

/// Three-phase `γ`: `max(s − p, β1 − p + 1, β2 − q + 1, β3 − s + 1) + 1`.
pub fn gamma_multiphase(params: &MultiPhaseParams) -> f64 {
    let MultiPhaseParams {
        p,
        q,
        s,
        beta1,
        beta2,
        beta3,
        ..
    } = *params;
    (s - p).max(beta1 - p + 1.0).max(beta2 - q + 1.0).max(beta3 - s + 1.0) + 1.0
}

/// Hölder exponent in time of solutions: `p/(p+q)` in the singular range,
/// `1/2` for `p ≥ 2`.
pub fn time_exponent_target(p: f64, q: f64) -> f64 {
    if p < 2.0 {
        p / (p + q)
    } else {
        0.5
    }
}

/// Exponent `β ∈ (1,2)` of the Lipschitz profile `φ(s) = s − κ s^β`.
///
/// Requires `α/2 + (γ−1)(1−α) < 1`. The returned `β` satisfies both
/// `β < α/2 + 1` and `β + α/2 + (γ−1)(1−α) < 2` strictly: it is the smaller
/// of the midpoints of `(1, α/2 + 1)` and `(1, 2 − α/2 − (γ−1)(1−α))`.
pub fn lipschitz_profile_beta(alpha: f64, gamma: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!(
            "alpha must lie in (0, 1) (alpha = {alpha})"
        )));
    }
    if !(gamma >= 1.0) {
        return Err(Error::InvalidParams(format!("gamma >= 1 violated (gamma = {gamma})")));
    }
    let slack = alpha / 2.0 + (gamma - 1.0) * (1.0 - alpha);
    if slack >= 1.0 {
        return Err(Error::InvalidParams(format!(
            "alpha/2 + (gamma-1)(1-alpha) < 1 violated (value {slack})"
        )));
    }
    let first = (1.0 + (alpha / 2.0 + 1.0)) / 2.0;
    let second = (1.0 + (2.0 - slack)) / 2.0;
    Ok(first.min(second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(p: f64, q: f64, b1: f64, b2: f64) -> ExponentParams {
        ExponentParams::new(p, q, b1, b2, 0.0).unwrap()
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_exponent(&params(2.0, 3.0, 1.0, 1.0)), 2.0);
        assert_eq!(gamma_exponent(&params(2.0, 2.0, 1.0, 1.0)), 1.0);
        assert_eq!(gamma_exponent(&params(1.5, 2.5, 1.0, 2.0)), 2.0);
    }

    #[test]
    fn gamma_multiphase_examples() {
        let m = MultiPhaseParams::new(2.0, 2.5, 3.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(gamma_multiphase(&m), 2.0);
        let m = MultiPhaseParams::new(2.0, 2.0, 2.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(gamma_multiphase(&m), 1.0);
        let m = MultiPhaseParams::new(1.5, 2.0, 2.5, 1.2, 1.5, 2.0, 0.0).unwrap();
        assert_relative_eq!(gamma_multiphase(&m), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn time_exponent_examples() {
        assert_relative_eq!(time_exponent_target(1.5, 2.0), 3.0 / 7.0, epsilon = 1e-15);
        assert_eq!(time_exponent_target(3.0, 3.5), 0.5);
        assert_eq!(time_exponent_target(2.0, 2.0), 0.5);
    }

    #[test]
    fn lipschitz_beta_values() {
        // midpoint of (1, 1.25) against 1.375
        assert_relative_eq!(lipschitz_profile_beta(0.5, 1.0).unwrap(), 1.125, epsilon = 1e-15);
        // 2 - (0.45 + 0.05 * 0.1) = 1.545, midpoints 1.225 and 1.2725
        assert_relative_eq!(lipschitz_profile_beta(0.9, 1.05).unwrap(), 1.225, epsilon = 1e-12);
        assert!(lipschitz_profile_beta(0.2, 2.3).is_err());
        assert!(lipschitz_profile_beta(0.5, 2.1).is_ok());
    }

    #[test]
    fn validation_errors_name_the_constraint() {
        let err = ExponentParams::new(2.0, 1.5, 1.0, 1.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("q >= p"));
        assert!(ExponentParams::new(1.0, 2.0, 1.0, 1.0, 0.0).is_err());
        assert!(ExponentParams::new(2.0, 3.0, 2.0, 1.0, 0.0).is_err());
        assert!(ExponentParams::new(2.0, 3.0, 1.0, 3.0, 0.0).is_err());
        assert!(ExponentParams::new(2.0, 3.0, 1.0, 1.0, -1.0).is_err());
        assert!(MultiPhaseParams::new(2.0, 3.0, 2.5, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gap_flag_and_borderline() {
        let p = params(2.0, 3.0, 1.0, 1.0);
        assert!(p.in_gap_range());
        assert!(p.check_gap().is_err());
        assert!(p.with_borderline(true).check_gap().is_ok());
        assert!(params(2.0, 2.5, 1.0, 1.0).check_gap().is_ok());
        assert!(!params(2.0, 3.5, 1.0, 1.0).in_gap_range());
    }

    #[test]
    fn gamma_can_fall_in_q_alone() {
        let base = gamma_exponent(&params(1.05, 1.05, 1.0, 1.045));
        let raised = gamma_exponent(&params(1.05, 1.3, 1.0, 1.045));
        assert!(raised < base);
    }

    proptest! {
        #[test]
        fn gamma_monotone(p in 1.05f64..4.0, dq in 0.0f64..2.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
                          bump in 0.0f64..0.5) {
            let q = p + dq;
            let b1 = 1.0 + t1 * (p - 1.0) * 0.99;
            let b2 = 1.0 + t2 * (q - 1.0) * 0.99;
            let base = gamma_exponent(&params(p, q, b1, b2));
            // the β2 − q + 1 term falls as q grows, so q is raised together with β2
            prop_assert!(gamma_exponent(&params(p, q + bump, b1, b2 + bump)) >= base - 1e-12);
            let b1_up = (b1 + bump).min(1.0 + (p - 1.0) * 0.999);
            prop_assert!(gamma_exponent(&params(p, q, b1_up, b2)) >= base);
            let b2_up = (b2 + bump).min(1.0 + (q - 1.0) * 0.999);
            prop_assert!(gamma_exponent(&params(p, q, b1, b2_up)) >= base);
            // raising p (keeping everything admissible) cannot raise gamma
            let p_up = (p + bump).min(q);
            prop_assert!(gamma_exponent(&params(p_up, q, b1, b2)) <= base + 1e-15);
        }

        #[test]
        fn lipschitz_beta_satisfies_both_inequalities(alpha in 0.01f64..0.99, g in 1.0f64..3.0) {
            let slack = alpha / 2.0 + (g - 1.0) * (1.0 - alpha);
            match lipschitz_profile_beta(alpha, g) {
                Ok(beta) => {
                    prop_assert!(slack < 1.0);
                    prop_assert!(beta > 1.0 && beta < 2.0);
                    prop_assert!(beta < alpha / 2.0 + 1.0);
                    prop_assert!(beta + slack < 2.0);
                }
                Err(_) => prop_assert!(slack >= 1.0),
            }
        }
    }
}
