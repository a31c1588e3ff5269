//! Regularity machinery on solved fields: the doubling functional `Ψ` with
//! Hölder and Lipschitz profiles, time-Hölder barriers with their explicit
//! constants, and modulus-of-continuity fits.

use rayon::prelude::*;

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::field::{GridField, SpaceTimeBox};
use crate::flux::pow_abs;
use crate::params::ExponentParams;
use crate::solver::RhsFn;
use crate::stats::fit_loglog;

/// Concave profile `φ` on `[0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiProfile {
    /// `φ(s) = s^α`.
    Holder { alpha: f64 },
    /// `φ(s) = s − κ s^β` with `κ = β^{-1} 2^{−β−1}`.
    Lipschitz { beta: f64, kappa: f64 },
}

impl PhiProfile {
    pub fn holder(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParams(format!(
                "Hölder exponent must lie in (0, 1) (got {alpha})"
            )));
        }
        Ok(Self::Holder { alpha })
    }

    pub fn lipschitz(beta: f64) -> Result<Self> {
        if !(beta > 1.0 && beta < 2.0) {
            return Err(Error::InvalidParams(format!(
                "Lipschitz profile needs beta in (1, 2) (got {beta})"
            )));
        }
        Ok(Self::Lipschitz {
            beta,
            kappa: 2f64.powf(-beta - 1.0) / beta,
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Self::Holder { alpha } => pow_abs(s, alpha),
            Self::Lipschitz { beta, kappa } => s - kappa * pow_abs(s, beta),
        }
    }

    pub fn d1(&self, s: f64) -> Result<f64> {
        match *self {
            Self::Holder { alpha } => {
                positive(s)?;
                Ok(alpha * s.powf(alpha - 1.0))
            }
            Self::Lipschitz { beta, kappa } => Ok(1.0 - kappa * beta * pow_abs(s, beta - 1.0)),
        }
    }

    pub fn d2(&self, s: f64) -> Result<f64> {
        positive(s)?;
        Ok(match *self {
            Self::Holder { alpha } => alpha * (alpha - 1.0) * s.powf(alpha - 2.0),
            Self::Lipschitz { beta, kappa } => -kappa * beta * (beta - 1.0) * s.powf(beta - 2.0),
        })
    }

    /// Lower bound `c_φ` of `φ′` on `(0, 2]`.
    pub fn c_phi(&self) -> f64 {
        match *self {
            Self::Holder { alpha } => alpha * 2f64.powf(alpha - 1.0),
            Self::Lipschitz { .. } => 0.75,
        }
    }

    /// Checks `φ(0) = 0`, `φ″ < 0 < φ′` and `|φ″(s)| < φ′(s)/s` on `n` points of `(0, 2]`.
    pub fn admissible(&self, n: usize) -> bool {
        if self.eval(0.0) != 0.0 {
            return false;
        }
        (1..=n).all(|j| {
            let s = 2.0 * j as f64 / n as f64;
            match (self.d1(s), self.d2(s)) {
                (Ok(d1), Ok(d2)) => d2 < 0.0 && d1 > 0.0 && d2.abs() < d1 / s,
                _ => false,
            }
        })
    }
}

fn positive(s: f64) -> Result<()> {
    if s > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("profile derivatives need s > 0 (got {s})")))
    }
}

/// Anchor `(x0, y0, t0)` of the quadratic penalties.
pub type Anchor = (f64, f64, f64);

/// `K = 8 osc u`.
pub fn doubling_k(u: &GridField) -> f64 {
    8.0 * u.osc()
}

/// `Ψ(x,y,t) = u(x,t) − u(y,t) − Lφ(|x−y|) − (K/2)(|x−x0|² + |y−y0|² + |t−t0|²)`
/// with `u` read at grid nodes.
#[allow(clippy::too_many_arguments)]
pub fn doubling_psi(
    u: &GridField,
    x: f64,
    y: f64,
    t: f64,
    l: f64,
    profile: &PhiProfile,
    anchor: Anchor,
    k: f64,
) -> Result<f64> {
    let off = || Error::InvalidInput(format!("({x}, {y}, {t}) is not on the grid"));
    let i = u.x_index(x).ok_or_else(off)?;
    let j = u.x_index(y).ok_or_else(off)?;
    let kt = u.t_index(t).ok_or_else(off)?;
    let (x, y, t) = (u.x(i), u.x(j), u.t(kt));
    let (x0, y0, t0) = anchor;
    Ok(u.get(i, kt)
        - u.get(j, kt)
        - l * profile.eval((x - y).abs())
        - 0.5 * k * ((x - x0).powi(2) + (y - y0).powi(2) + (t - t0).powi(2)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiScan {
    pub max_value: f64,
    /// `(i, j, k, anchor index)` of the maximum.
    pub argmax: (usize, usize, usize, usize),
    pub per_anchor: Vec<f64>,
}

fn check_anchors(u: &GridField, anchors: &[Anchor]) -> Result<()> {
    if anchors.is_empty() {
        return Err(Error::InvalidInput("no anchors given".into()));
    }
    let d = u.domain();
    let (xc, rx) = (0.5 * (d.x_min + d.x_max), 0.5 * (d.x_max - d.x_min));
    let span = d.t_end - d.t_start;
    for &(x0, y0, t0) in anchors {
        let inside = (x0 - xc).abs() <= 0.5 * rx + 1e-12
            && (y0 - xc).abs() <= 0.5 * rx + 1e-12
            && t0 >= d.t_end - 0.5 * span - 1e-12
            && t0 <= d.t_end + 1e-12;
        if !inside {
            return Err(Error::InvalidInput(format!(
                "anchor ({x0}, {y0}, {t0}) lies outside the half cylinder"
            )));
        }
    }
    Ok(())
}

/// Exhaustive maximum of `Ψ` over node pairs and times, per anchor, with
/// `K = 8 osc u`.
pub fn psi_max_scan(u: &GridField, l: f64, profile: &PhiProfile, anchors: &[Anchor]) -> Result<PsiScan> {
    check_anchors(u, anchors)?;
    Ok(psi_scan_unchecked(u, l, profile, anchors, doubling_k(u)))
}

fn psi_scan_unchecked(u: &GridField, l: f64, profile: &PhiProfile, anchors: &[Anchor], k: f64) -> PsiScan {
    let (nx, nt) = (u.nx(), u.nt());
    let phi: Vec<f64> = (0..nx).map(|d| l * profile.eval(d as f64 * u.hx())).collect();
    let results: Vec<(f64, (usize, usize, usize))> = anchors
        .iter()
        .map(|&(x0, y0, t0)| {
            let px: Vec<f64> = (0..nx).map(|i| 0.5 * k * (u.x(i) - x0).powi(2)).collect();
            let py: Vec<f64> = (0..nx).map(|j| 0.5 * k * (u.x(j) - y0).powi(2)).collect();
            (0..nt)
                .into_par_iter()
                .map(|kt| {
                    let row = u.slice(kt);
                    let pt = 0.5 * k * (u.t(kt) - t0).powi(2);
                    let mut best = (f64::NEG_INFINITY, (0, 0, kt));
                    for i in 0..nx {
                        let base = row[i] - px[i] - pt;
                        for j in 0..nx {
                            let v = base - row[j] - py[j] - phi[i.abs_diff(j)];
                            if v > best.0 {
                                best = (v, (i, j, kt));
                            }
                        }
                    }
                    best
                })
                .reduce(
                    || (f64::NEG_INFINITY, (0, 0, 0)),
                    |a, b| {
                        if b.0 > a.0 || (b.0 == a.0 && b.1 .2 < a.1 .2) {
                            b
                        } else {
                            a
                        }
                    },
                )
        })
        .collect();
    let mut best = 0;
    for (n, r) in results.iter().enumerate() {
        if r.0 > results[best].0 {
            best = n;
        }
    }
    let (i, j, kt) = results[best].1;
    PsiScan {
        max_value: results[best].0,
        argmax: (i, j, kt, best),
        per_anchor: results.iter().map(|r| r.0).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiThreshold {
    /// Smallest bracketed `L` with `max Ψ ≤ 0`.
    pub l_star: f64,
    /// Largest bracketed `L` with `max Ψ > 0` (zero when `L = 0` already works).
    pub l_below: f64,
    pub scans: usize,
}

/// Bisection for the non-positivity threshold `L*`: check `L = 0`, double
/// from 1 to bracket, then bisect 60 times and return the upper end.
pub fn psi_threshold_search(u: &GridField, profile: &PhiProfile, anchors: &[Anchor]) -> Result<PsiThreshold> {
    check_anchors(u, anchors)?;
    let k = doubling_k(u);
    let mut scans = 1;
    let positive = |l: f64| psi_scan_unchecked(u, l, profile, anchors, k).max_value > 0.0;
    if !positive(0.0) {
        return Ok(PsiThreshold {
            l_star: 0.0,
            l_below: 0.0,
            scans,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut doublings = 0;
    loop {
        scans += 1;
        if !positive(hi) {
            break;
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::SearchCap(format!("Psi stays positive up to L = {hi:.3e}")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        scans += 1;
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PsiThreshold {
        l_star: hi,
        l_below: lo,
        scans,
    })
}

/// Spatial modulus `ω(d·h_x) = max_{k,i} |u(i+d,k) − u(i,k)|` for all lattice distances `d`.
pub fn spatial_modulus_table(u: &GridField) -> Vec<f64> {
    let nx = u.nx();
    (0..nx)
        .into_par_iter()
        .map(|d| {
            let mut m: f64 = 0.0;
            for k in 0..u.nt() {
                let row = u.slice(k);
                for i in 0..nx - d {
                    m = m.max((row[i + d] - row[i]).abs());
                }
            }
            m
        })
        .collect()
}

/// `(φ′(|z|), ω(|z|)/(L|z|))` at the maximiser of a scan with positive
/// maximum and `x ≠ y`; `None` otherwise.
pub fn derivative_bound_at_argmax(u: &GridField, scan: &PsiScan, l: f64, profile: &PhiProfile) -> Option<(f64, f64)> {
    if !(scan.max_value > 0.0) || l <= 0.0 {
        return None;
    }
    let (i, j, _, _) = scan.argmax;
    let d = i.abs_diff(j);
    if d == 0 {
        return None;
    }
    let z = d as f64 * u.hx();
    let omega = spatial_modulus_table(u)[d];
    Some((profile.d1(z).ok()?, omega / (l * z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierRegime {
    Singular,
    Degenerate,
}

/// Constants of the barrier `φ(x,t) = u(0,t0) + A + Θ(t−t0) + K|x|^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    pub regime: BarrierRegime,
    pub p: f64,
    pub q: f64,
    pub t0: f64,
    pub s0: f64,
    pub u_anchor: f64,
    pub a_const: f64,
    pub c0: f64,
    pub k: f64,
    pub theta: f64,
    pub beta: f64,
    pub rho: f64,
}

/// Barrier constants for the cylinder `B_ρ × [t0, s0]`; `Θ` starts at zero.
///
/// Singular (`p < 2`): `β = p/(p−1)`, `A = (s0−t0)^{p/(p+q)}`,
/// `C0 = 2(osc+1)(L+1)^β β`, `K = C0 A^{1−β}`, `ρ = A^{(β−1)/β}`.
/// Degenerate (`p ≥ 2`): `β = 2`, `A = (s0−t0)^{1/2}`,
/// `C0 = 4(osc+1)(L+1)²`, `K = C0/A`, `ρ = 1`.
pub fn barrier_make(
    regime: BarrierRegime,
    params: &ExponentParams,
    t0: f64,
    s0: f64,
    osc_u: f64,
    l: f64,
    u_anchor: f64,
) -> Result<BarrierSpec> {
    let (p, q) = (params.p, params.q);
    if !(t0 < s0 && s0 <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "barrier needs t0 < s0 <= 0 (t0 = {t0}, s0 = {s0})"
        )));
    }
    if !(osc_u >= 0.0 && l >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need osc >= 0 and L >= 0 (osc = {osc_u}, L = {l})"
        )));
    }
    let gap = s0 - t0;
    match regime {
        BarrierRegime::Singular => {
            if p >= 2.0 {
                return Err(Error::InvalidParams(format!(
                    "singular barrier requires p < 2 (p = {p})"
                )));
            }
            let beta = p / (p - 1.0);
            if (beta - 1.0) * (q - 1.0) < 1.0 - 1e-12 {
                return Err(Error::InvalidParams(format!(
                    "(beta - 1)(q - 1) >= 1 violated (beta = {beta}, q = {q})"
                )));
            }
            let a_const = gap.powf(p / (p + q));
            let c0 = 2.0 * (osc_u + 1.0) * (l + 1.0).powf(beta) * beta;
            Ok(BarrierSpec {
                regime,
                p,
                q,
                t0,
                s0,
                u_anchor,
                a_const,
                c0,
                k: c0 * a_const.powf(1.0 - beta),
                theta: 0.0,
                beta,
                rho: a_const.powf((beta - 1.0) / beta),
            })
        }
        BarrierRegime::Degenerate => {
            if p < 2.0 {
                return Err(Error::InvalidParams(format!(
                    "degenerate barrier requires p >= 2 (p = {p})"
                )));
            }
            let a_const = gap.sqrt();
            let c0 = 4.0 * (osc_u + 1.0) * (l + 1.0).powi(2);
            Ok(BarrierSpec {
                regime,
                p,
                q,
                t0,
                s0,
                u_anchor,
                a_const,
                c0,
                k: c0 / a_const,
                theta: 0.0,
                beta: 2.0,
                rho: 1.0,
            })
        }
    }
}

impl BarrierSpec {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.u_anchor + self.a_const + self.theta * (t - self.t0) + self.k * pow_abs(r, self.beta)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let w = self.k * self.beta * pow_abs(r, self.beta - 2.0);
        x.iter().map(|v| w * v).collect()
    }

    /// `div(|Dφ|^{m−2}Dφ)` in closed form:
    /// `(Kβ)^{m−1} r^{(β−1)(m−1)−1} ((m−1)(β−1) + N − 1)`.
    pub fn radial_laplacian(&self, m: f64, r: f64, dim: usize) -> f64 {
        let e = (self.beta - 1.0) * (m - 1.0);
        (self.k * self.beta).powf(m - 1.0) * r.powf(e - 1.0) * (e + dim as f64 - 1.0)
    }

    /// `Θ − [Δ_p φ + aΔ_q φ + |Dφ|^{q−2}Dφ·Da] − f(x, t, Dφ)` at `x ≠ 0`.
    pub fn residual_at(&self, coeff: &Coefficient, rhs: Option<&RhsFn>, x: &[f64], t: f64) -> f64 {
        let dim = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a_val = coeff.eval(x, t);
        let mut da = vec![0.0; dim];
        coeff.grad(x, t, &mut da);
        let eq = (self.beta - 1.0) * (self.q - 1.0);
        // |Dφ|^{q−2}Dφ = (Kβ)^{q−1} r^{(β−1)(q−1)} x/r
        let radial: f64 = x.iter().zip(&da).map(|(xi, d)| xi * d).sum::<f64>() / r;
        let drift = (self.k * self.beta).powf(self.q - 1.0) * r.powf(eq) * radial;
        let div = self.radial_laplacian(self.p, r, dim) + a_val * self.radial_laplacian(self.q, r, dim) + drift;
        let f = rhs.map_or(0.0, |f| f(x, t, &self.gradient(x)));
        self.theta - div - f
    }
}

/// Sample points of `B_ρ × [t0, s0]` in 1D: `x = ±ρ j/m`, `j = 1..=m`, at
/// `n_t` equally spaced times. Points with `|x| < min_abs_x` are dropped.
pub fn barrier_samples(spec: &BarrierSpec, m: usize, n_t: usize, min_abs_x: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2 * m * n_t);
    for kt in 0..n_t {
        let t = if n_t == 1 {
            spec.t0
        } else {
            spec.t0 + (spec.s0 - spec.t0) * kt as f64 / (n_t - 1) as f64
        };
        for j in 1..=m {
            let x = spec.rho * j as f64 / m as f64;
            if x >= min_abs_x {
                out.push((x, t));
                out.push((-x, t));
            }
        }
    }
    out
}

/// Minimum residual over 1D samples.
pub fn barrier_residual(spec: &BarrierSpec, coeff: &Coefficient, rhs: Option<&RhsFn>, samples: &[(f64, f64)]) -> f64 {
    samples
        .par_iter()
        .map(|&(x, t)| spec.residual_at(coeff, rhs, &[x], t))
        .reduce(|| f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSearch {
    pub theta: f64,
    /// `Θ / K^{q/β}`.
    pub c1: f64,
    /// Minimum residual at the returned `Θ` (the certificate).
    pub residual_min: f64,
    pub doublings: usize,
}

/// Smallest `Θ` on a doubling-then-bisection search with
/// `barrier_residual ≥ 0`; the upper bracket is returned.
pub fn barrier_theta_search(
    spec: &BarrierSpec,
    coeff: &Coefficient,
    rhs: Option<&RhsFn>,
    samples: &[(f64, f64)],
) -> Result<ThetaSearch> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no barrier samples".into()));
    }
    let mut s = *spec;
    let ok = |s: &mut BarrierSpec, theta: f64| {
        s.theta = theta;
        barrier_residual(s, coeff, rhs, samples) >= 0.0
    };
    let mut doublings = 0;
    let theta = if ok(&mut s, 0.0) {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        while !ok(&mut s, hi) {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 1000 || !hi.is_finite() {
                return Err(Error::SearchCap(format!(
                    "barrier residual still negative at Theta = {hi:.3e}"
                )));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(&mut s, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    s.theta = theta;
    let residual_min = barrier_residual(&s, coeff, rhs, samples);
    Ok(ThetaSearch {
        theta,
        c1: theta / s.k.powf(s.q / s.beta),
        residual_min,
        doublings,
    })
}

/// Largest `u − φ` over the nodes of `u` inside `B_ρ × [t0, s0]`.
pub fn barrier_excess(u: &GridField, spec: &BarrierSpec) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..u.nt() {
        let t = u.t(k);
        if t < spec.t0 - 1e-12 || t > spec.s0 + 1e-12 {
            continue;
        }
        for i in 0..u.nx() {
            let x = u.x(i);
            if x.abs() <= spec.rho + 1e-12 {
                worst = worst.max(u.get(i, k) - spec.eval(&[x], t));
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusReport {
    pub lip_space_est: f64,
    /// NaN when `alpha_defined` is false.
    pub time_alpha_est: f64,
    pub alpha_defined: bool,
    pub fit_r2: f64,
    pub space_pairs: usize,
    /// `(lag, sup_x |u(x,t+lag) − u(x,t)|)` used in the fit.
    pub time_lags: Vec<(f64, f64)>,
}

/// Spatial Lipschitz estimate and time-Hölder fit on the nodes of `inner`.
/// Pairs closer than two grid spacings are excluded; time lags are dyadic
/// from `2h_t` up to a quarter of the inner time span.
pub fn modulus_estimate(u: &GridField, inner: &SpaceTimeBox) -> Result<ModulusReport> {
    if !inner.strictly_inside(&u.domain()) && *inner != u.domain() {
        return Err(Error::InvalidInput(
            "inner cylinder must lie inside the field domain".into(),
        ));
    }
    let tol = 1e-9;
    let is: Vec<usize> = (0..u.nx())
        .filter(|&i| u.x(i) >= inner.x_min - tol * u.hx() && u.x(i) <= inner.x_max + tol * u.hx())
        .collect();
    let ks: Vec<usize> = (0..u.nt())
        .filter(|&k| u.t(k) >= inner.t_start - tol * u.ht() && u.t(k) <= inner.t_end + tol * u.ht())
        .collect();
    if is.len() < 3 || ks.len() < 2 {
        return Err(Error::InvalidInput("inner cylinder contains too few nodes".into()));
    }
    let (i_lo, i_hi) = (is[0], *is.last().unwrap());
    let (k_lo, k_hi) = (ks[0], *ks.last().unwrap());

    let per_k: Vec<(f64, usize)> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| {
            let row = u.slice(k);
            let mut best: f64 = 0.0;
            let mut count = 0;
            for d in 2..=(i_hi - i_lo) {
                let dx = d as f64 * u.hx();
                for i in i_lo..=i_hi - d {
                    best = best.max((row[i + d] - row[i]).abs() / dx);
                    count += 1;
                }
            }
            (best, count)
        })
        .collect();
    let lip_space_est = per_k.iter().fold(0.0_f64, |m, v| m.max(v.0));
    let space_pairs = per_k.iter().map(|v| v.1).sum();

    let span_steps = k_hi - k_lo;
    let mut time_lags = Vec::new();
    let mut lag = 2;
    while lag * 4 <= span_steps.max(1) {
        let mut sup: f64 = 0.0;
        for k in k_lo..=k_hi - lag {
            for i in i_lo..=i_hi {
                sup = sup.max((u.get(i, k + lag) - u.get(i, k)).abs());
            }
        }
        time_lags.push((lag as f64 * u.ht(), sup));
        lag *= 2;
    }
    let scale = u.sup_abs().max(f64::MIN_POSITIVE);
    let usable = time_lags.iter().filter(|(_, s)| *s > 1e-13 * scale).count();
    let fit = if usable == time_lags.len() && usable >= 2 {
        let (ls, ss): (Vec<f64>, Vec<f64>) = time_lags.iter().copied().unzip();
        fit_loglog(&ls, &ss)
    } else {
        None
    };
    Ok(ModulusReport {
        lip_space_est,
        time_alpha_est: fit.map_or(f64::NAN, |f| f.slope),
        alpha_defined: fit.is_some(),
        fit_r2: fit.map_or(0.0, |f| f.r2),
        space_pairs,
        time_lags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q1() -> SpaceTimeBox {
        SpaceTimeBox::new(-1.0, 1.0, -1.0, 0.0).unwrap()
    }

    #[test]
    fn profile_examples() {
        let h = PhiProfile::holder(0.5).unwrap();
        assert_eq!(h.eval(1.0), 1.0);
        assert_eq!(h.d1(1.0).unwrap(), 0.5);
        assert_eq!(h.d2(1.0).unwrap(), -0.25);
        assert!(h.d1(0.0).is_err());
        let l = PhiProfile::lipschitz(1.5).unwrap();
        let PhiProfile::Lipschitz { kappa, .. } = l else {
            unreachable!()
        };
        assert_relative_eq!(kappa, 0.117_851, epsilon = 1e-6);
        assert_relative_eq!(l.d1(2.0).unwrap(), 0.75, epsilon = 1e-14);
        assert_eq!(l.eval(0.0), 0.0);
        assert!(PhiProfile::holder(1.0).is_err());
        assert!(PhiProfile::lipschitz(2.0).is_err());
    }

    #[test]
    fn profiles_are_admissible() {
        for a in [0.1, 0.43, 0.5, 0.9] {
            assert!(PhiProfile::holder(a).unwrap().admissible(4000));
        }
        for b in [1.01, 1.25, 1.5, 1.99] {
            let p = PhiProfile::lipschitz(b).unwrap();
            assert!(p.admissible(4000));
            for j in 1..=400 {
                let d1 = p.d1(j as f64 / 200.0).unwrap();
                assert!((0.75 - 1e-15..=1.0).contains(&d1));
            }
        }
    }

    #[test]
    fn psi_on_diagonal_and_constants() {
        let u = GridField::from_fn(&q1(), 20, 10, |x, t| x * x + t).unwrap();
        let h = PhiProfile::holder(0.5).unwrap();
        let k = doubling_k(&u);
        let v = doubling_psi(&u, 0.2, 0.2, -0.5, 3.0, &h, (0.0, 0.1, -0.2), k).unwrap();
        assert_relative_eq!(v, -0.5 * k * (0.04 + 0.01 + 0.09), epsilon = 1e-12);
        assert!(doubling_psi(&u, 0.23, 0.2, -0.5, 3.0, &h, (0.0, 0.0, 0.0), k).is_err());
        let c = GridField::from_fn(&q1(), 20, 10, |_, _| 1.0).unwrap();
        let s = psi_max_scan(&c, 0.5, &h, &[(0.0, 0.0, 0.0)]).unwrap();
        assert!(s.max_value <= 0.0);
    }

    #[test]
    fn psi_threshold_brackets() {
        let u = GridField::from_fn(&q1(), 40, 20, |x, t| (2.0 * x).sin() * (1.0 + 0.3 * t)).unwrap();
        let prof = PhiProfile::lipschitz(1.25).unwrap();
        let anchors = [(0.0, 0.0, 0.0), (0.25, -0.25, -0.25)];
        assert!(psi_max_scan(&u, 0.0, &prof, &anchors).unwrap().max_value > 0.0);
        let th = psi_threshold_search(&u, &prof, &anchors).unwrap();
        assert!(th.l_star.is_finite() && th.l_star > 0.0);
        assert!(psi_max_scan(&u, th.l_star, &prof, &anchors).unwrap().max_value <= 0.0);
        assert!(psi_max_scan(&u, th.l_below, &prof, &anchors).unwrap().max_value > 0.0);
        assert!(psi_max_scan(&u, 2.0 * th.l_star, &prof, &anchors).unwrap().max_value <= 0.0);
        assert!(psi_max_scan(&u, 0.0, &prof, &[(0.9, 0.0, 0.0)]).is_err());
        let scan = psi_max_scan(&u, 0.5 * th.l_star, &prof, &anchors).unwrap();
        let (lhs, rhs) = derivative_bound_at_argmax(&u, &scan, 0.5 * th.l_star, &prof).unwrap();
        assert!(lhs <= rhs);
    }

    #[test]
    fn barrier_constants() {
        let par = ExponentParams::homogeneous(2.0, 2.0).unwrap();
        let b = barrier_make(BarrierRegime::Degenerate, &par, -0.04, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(b.a_const, 0.2, epsilon = 1e-14);
        assert_relative_eq!(b.c0, 32.0, epsilon = 1e-14);
        assert_relative_eq!(b.k, 160.0, epsilon = 1e-12);
        let par = ExponentParams::homogeneous(1.5, 2.0).unwrap();
        let b = barrier_make(BarrierRegime::Singular, &par, -0.3, -0.1, 1.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(b.beta, 3.0, epsilon = 1e-14);
        assert_relative_eq!(b.a_const, 0.2f64.powf(3.0 / 7.0), epsilon = 1e-14);
        assert!(b.rho <= 1.0);
        assert!(barrier_make(
            BarrierRegime::Singular,
            &ExponentParams::homogeneous(2.5, 3.0).unwrap(),
            -0.1,
            0.0,
            1.0,
            1.0,
            0.0
        )
        .is_err());
        assert!(barrier_make(BarrierRegime::Degenerate, &par, -0.1, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(barrier_make(BarrierRegime::Singular, &par, 0.0, 0.1, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn heat_barrier_residuals() {
        let par = ExponentParams::homogeneous(2.0, 2.0).unwrap();
        let zero = Coefficient::constant(0.0);
        let mut b = barrier_make(BarrierRegime::Degenerate, &par, -0.04, 0.0, 1.0, 1.0, 0.0).unwrap();
        let samples = barrier_samples(&b, 20, 25, 0.01);
        assert_relative_eq!(barrier_residual(&b, &zero, None, &samples), -2.0 * b.k, epsilon = 1e-9);
        b.theta = 2.0 * b.k;
        assert_eq!(barrier_residual(&b, &zero, None, &samples), 0.0);
        let found = barrier_theta_search(&b, &zero, None, &samples).unwrap();
        assert!(found.theta >= 2.0 * b.k && found.theta <= 4.0 * b.k);
        assert!(found.residual_min >= -1e-10);
    }

    #[test]
    fn radial_laplacian_matches_differences() {
        let par = ExponentParams::homogeneous(1.5, 2.3).unwrap();
        let b = barrier_make(BarrierRegime::Singular, &par, -0.2, 0.0, 0.5, 0.5, 0.0).unwrap();
        for &m in &[1.5, 2.3] {
            let flux = |x: f64| {
                let g = b.gradient(&[x])[0];
                g.abs().powf(m - 2.0) * g
            };
            for &x in &[0.1, 0.3, -0.25] {
                let h = 1e-6;
                let fd = (flux(x + h) - flux(x - h)) / (2.0 * h);
                assert_relative_eq!(b.radial_laplacian(m, x.abs(), 1), fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn modulus_examples() {
        let dom = q1();
        let inner = SpaceTimeBox::new(-0.5, 0.5, -0.5, 0.0).unwrap();
        let u = GridField::from_fn(&dom, 80, 256, |x, _| 3.0 * x).unwrap();
        let r = modulus_estimate(&u, &inner).unwrap();
        assert_relative_eq!(r.lip_space_est, 3.0, epsilon = 1e-12);
        assert!(!r.alpha_defined && r.time_alpha_est.is_nan());
        let u = GridField::from_fn(&dom, 40, 1024, |x, t| t.abs().sqrt() * (2.0 + x.cos())).unwrap();
        let r = modulus_estimate(&u, &inner).unwrap();
        assert!((r.time_alpha_est - 0.5).abs() <= 0.03, "alpha {}", r.time_alpha_est);
        let outer = SpaceTimeBox::new(-2.0, 0.5, -0.5, 0.0).unwrap();
        assert!(modulus_estimate(&u, &outer).is_err());
    }
}
