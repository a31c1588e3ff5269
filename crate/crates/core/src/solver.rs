//! Implicit finite-volume solver for the double-phase equation on 1D
//! space-time boxes.
//!
//! Each step solves the backward-Euler system
//!
//! ```text
//! (u_i − u_i^old)/h_t = (F_{i+1/2} − F_{i−1/2})/h_x + f(x_i, t, (u_{i+1} − u_{i−1})/(2h_x))
//! ```
//!
//! with face fluxes `F_{i+1/2} = A_δ(a(x_{i+1/2}, t), (u_{i+1} − u_i)/h_x)` from
//! [`flux_regularized_1d`]. Damped Newton on the tridiagonal Jacobian is tried
//! first and a lagged-coefficient Picard iteration takes over when the line
//! search stalls.

use std::sync::Arc;

use rayon::prelude::*;

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::field::{trapezoid_weight, GridField, SpaceTimeBox};
use crate::flux::{flux_a_1d, flux_regularized_1d, pow_abs, rhs_growth_bound_norm};
use crate::params::ExponentParams;

/// Right-hand side `f(x, t, ξ)`.
pub type RhsFn = Arc<dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync>;
/// Boundary and initial data `g(x, t)`.
pub type DataFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Cell counts above which residual assembly runs on the rayon pool.
const PAR_CELLS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lateral {
    /// Values prescribed by the data function at both ends.
    Dirichlet,
    /// Reflecting ends with half-cell control volumes.
    ZeroFlux,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Residual tolerance, scaled by `1 + max|u_old|`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub picard_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 60,
            max_halvings: 30,
            picard_iter: 2000,
        }
    }
}

/// A discretized initial-boundary value problem.
#[derive(Clone)]
pub struct Problem {
    pub params: ExponentParams,
    pub coeff: Coefficient,
    pub rhs: Option<RhsFn>,
    pub domain: SpaceTimeBox,
    pub data: DataFn,
    pub lateral: Lateral,
    pub cells_x: usize,
    pub steps_t: usize,
    pub reg_delta: f64,
    pub newton: NewtonOptions,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("params", &self.params)
            .field("coeff", &self.coeff)
            .field("domain", &self.domain)
            .field("lateral", &self.lateral)
            .field("cells_x", &self.cells_x)
            .field("steps_t", &self.steps_t)
            .field("reg_delta", &self.reg_delta)
            .finish_non_exhaustive()
    }
}

/// `1e-8` in the degenerate range, `1e-6` in the singular one.
pub fn default_reg_delta(p: f64) -> f64 {
    if p >= 2.0 {
        1e-8
    } else {
        1e-6
    }
}

impl Problem {
    pub fn new(
        params: ExponentParams,
        coeff: Coefficient,
        domain: SpaceTimeBox,
        cells_x: usize,
        steps_t: usize,
        data: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            reg_delta: default_reg_delta(params.p),
            params,
            coeff,
            rhs: None,
            domain,
            data: Arc::new(data),
            lateral: Lateral::Dirichlet,
            cells_x,
            steps_t,
            newton: NewtonOptions::default(),
        }
    }

    pub fn with_rhs(mut self, rhs: impl Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.rhs = Some(Arc::new(rhs));
        self
    }

    /// `f = C_f(w0 + w1|ξ|^{β1} + w2·a·|ξ|^{β2})` with `|w_k| ≤ 1`, which meets
    /// the growth bound by construction.
    pub fn with_growth_rhs(self, w: [f64; 3]) -> Self {
        let coeff = self.coeff.clone();
        let par = self.params;
        self.with_rhs(move |x, t, xi| {
            let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            par.c_f * (w[0] + w[1] * pow_abs(r, par.beta1) + w[2] * coeff.eval(x, t) * pow_abs(r, par.beta2))
        })
    }

    pub fn with_lateral(mut self, lateral: Lateral) -> Self {
        self.lateral = lateral;
        self
    }

    pub fn with_reg_delta(mut self, delta: f64) -> Self {
        self.reg_delta = delta;
        self
    }

    pub fn hx(&self) -> f64 {
        (self.domain.x_max - self.domain.x_min) / self.cells_x as f64
    }

    pub fn ht(&self) -> f64 {
        (self.domain.t_end - self.domain.t_start) / self.steps_t as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.domain.x_min + i as f64 * self.hx()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.cells_x < 2 || self.steps_t < 1 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 cells and 1 step (cells = {}, steps = {})",
                self.cells_x, self.steps_t
            )));
        }
        if !(self.reg_delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "reg_delta must be > 0 (got {})",
                self.reg_delta
            )));
        }
        Ok(())
    }

    /// Largest value of `|f| − C_f(1 + |ξ|^{β1} + a|ξ|^{β2})` over a sample of
    /// nodes, times and gradients. Non-positive when the growth condition holds.
    pub fn rhs_growth_excess(&self, samples: usize) -> f64 {
        let Some(rhs) = &self.rhs else { return f64::NEG_INFINITY };
        let n = samples.max(2);
        let mut worst = f64::NEG_INFINITY;
        for a in 0..n {
            let x = self.domain.x_min + (self.domain.x_max - self.domain.x_min) * a as f64 / (n - 1) as f64;
            for b in 0..n {
                let t = self.domain.t_start + (self.domain.t_end - self.domain.t_start) * b as f64 / (n - 1) as f64;
                let a_val = self.coeff.eval_1d(x, t);
                for c in 0..n {
                    let xi = -50.0 + 100.0 * c as f64 / (n - 1) as f64;
                    let f = rhs(&[x], t, &[xi]).abs();
                    worst = worst.max(f - rhs_growth_bound_norm(&self.params, a_val, xi.abs()));
                }
            }
        }
        worst
    }

    #[inline]
    fn rhs_at(&self, x: f64, t: f64, xi: f64) -> f64 {
        match &self.rhs {
            Some(f) => f(&[x], t, &[xi]),
            None => 0.0,
        }
    }

    fn rhs_and_slope(&self, x: f64, t: f64, xi: f64) -> (f64, f64) {
        match &self.rhs {
            None => (0.0, 0.0),
            Some(f) => {
                let d = 1e-6 * (1.0 + xi.abs());
                let v = f(&[x], t, &[xi]);
                let s = (f(&[x], t, &[xi + d]) - f(&[x], t, &[xi - d])) / (2.0 * d);
                (v, s)
            }
        }
    }
}

/// Per-step workspace with the coefficient values frozen at `t_next`.
struct Step<'a> {
    pb: &'a Problem,
    old: &'a [f64],
    t: f64,
    hx: f64,
    ht: f64,
    a_face: Vec<f64>,
    xs: Vec<f64>,
}

impl<'a> Step<'a> {
    fn new(pb: &'a Problem, old: &'a [f64], t: f64) -> Self {
        let n = old.len() - 1;
        let hx = pb.hx();
        let a_face = (0..n).map(|i| pb.coeff.eval_1d(pb.x(i) + 0.5 * hx, t)).collect();
        let xs = (0..=n).map(|i| pb.x(i)).collect();
        Self {
            pb,
            old,
            t,
            hx,
            ht: pb.ht(),
            a_face,
            xs,
        }
    }

    fn face_flux(&self, u: &[f64], i: usize) -> (f64, f64) {
        let p = &self.pb.params;
        flux_regularized_1d(p.p, p.q, self.a_face[i], (u[i + 1] - u[i]) / self.hx, self.pb.reg_delta)
    }

    fn gradient(&self, u: &[f64], i: usize) -> f64 {
        let n = u.len() - 1;
        if i == 0 || i == n {
            // reflecting ends mirror the neighbour
            0.0
        } else {
            (u[i + 1] - u[i - 1]) / (2.0 * self.hx)
        }
    }

    /// Control-volume weight relative to `h_x` (half cells at reflecting ends).
    fn volume(&self, i: usize) -> f64 {
        let n = self.old.len() - 1;
        if i == 0 || i == n {
            0.5
        } else {
            1.0
        }
    }

    fn active(&self) -> std::ops::Range<usize> {
        let n = self.old.len() - 1;
        match self.pb.lateral {
            Lateral::Dirichlet => 1..n,
            Lateral::ZeroFlux => 0..n + 1,
        }
    }

    fn residual_at(&self, u: &[f64], fluxes: &[f64], i: usize) -> f64 {
        let n = u.len() - 1;
        let right = if i < n { fluxes[i] } else { 0.0 };
        let left = if i > 0 { fluxes[i - 1] } else { 0.0 };
        let f = self.pb.rhs_at(self.xs[i], self.t, self.gradient(u, i));
        let vol = self.volume(i);
        u[i] - self.old[i] - self.ht * ((right - left) / (vol * self.hx) + f)
    }

    fn fluxes(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len() - 1;
        if n >= PAR_CELLS {
            (0..n).into_par_iter().map(|i| self.face_flux(u, i).0).collect()
        } else {
            (0..n).map(|i| self.face_flux(u, i).0).collect()
        }
    }

    /// Residual on the active nodes (zero elsewhere) and its max norm.
    fn residual(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let fl = self.fluxes(u);
        let mut r = vec![0.0; u.len()];
        let range = self.active();
        if u.len() > PAR_CELLS {
            r[range.clone()]
                .par_iter_mut()
                .enumerate()
                .for_each(|(k, v)| *v = self.residual_at(u, &fl, range.start + k));
        } else {
            for i in range {
                r[i] = self.residual_at(u, &fl, i);
            }
        }
        let norm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (r, norm)
    }

    /// Tridiagonal Jacobian `(lower, diag, upper)` on the active nodes.
    fn jacobian(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = u.len() - 1;
        let dflux: Vec<f64> = (0..n).map(|i| self.face_flux(u, i).1).collect();
        let range = self.active();
        let m = range.len();
        let (mut lo, mut di, mut up) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let c = self.ht / (self.hx * self.hx);
        for (k, i) in range.enumerate() {
            let vol = self.volume(i);
            let dr = if i < n { dflux[i] } else { 0.0 };
            let dl = if i > 0 { dflux[i - 1] } else { 0.0 };
            let (_, fs) = self.pb.rhs_and_slope(self.xs[i], self.t, self.gradient(u, i));
            let fc = if i == 0 || i == n {
                0.0
            } else {
                self.ht * fs / (2.0 * self.hx)
            };
            di[k] = 1.0 + c * (dr + dl) / vol;
            if i > 0 {
                lo[k] = -c * dl / vol + fc;
            }
            if i < n {
                up[k] = -c * dr / vol - fc;
            }
        }
        (lo, di, up)
    }

    /// Linear system of the lagged-coefficient (Picard) iteration.
    fn picard_system(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = u.len() - 1;
        let p = &self.pb.params;
        let weight: Vec<f64> = (0..n)
            .map(|i| {
                let xi = (u[i + 1] - u[i]) / self.hx;
                let s = self.pb.reg_delta + xi * xi;
                pow_abs(s, 0.5 * (p.p - 2.0)) + self.a_face[i] * pow_abs(s, 0.5 * (p.q - 2.0))
            })
            .collect();
        let range = self.active();
        let m = range.len();
        let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let c = self.ht / (self.hx * self.hx);
        for (k, i) in range.enumerate() {
            let vol = self.volume(i);
            let wr = if i < n { weight[i] } else { 0.0 };
            let wl = if i > 0 { weight[i - 1] } else { 0.0 };
            di[k] = 1.0 + c * (wr + wl) / vol;
            lo[k] = -c * wl / vol;
            up[k] = -c * wr / vol;
            rhs[k] = self.old[i] + self.ht * self.pb.rhs_at(self.xs[i], self.t, self.gradient(u, i));
        }
        (lo, di, up, rhs)
    }
}

/// Solves a tridiagonal system in place by the Thomas algorithm; `lower[0]`
/// and `upper[m-1]` are ignored.
pub(crate) fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::InvalidInput("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / denom;
    rhs[0] /= denom;
    for k in 1..m {
        denom = diag[k] - lower[k] * c[k - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::InvalidInput("singular tridiagonal system".into()));
        }
        c[k] = upper[k] / denom;
        rhs[k] = (rhs[k] - lower[k] * rhs[k - 1]) / denom;
    }
    for k in (0..m - 1).rev() {
        rhs[k] -= c[k] * rhs[k + 1];
    }
    Ok(())
}

/// Advances one backward-Euler step from `u_now` to `t_next`.
pub fn step_implicit(problem: &Problem, u_now: &[f64], t_next: f64) -> Result<Vec<f64>> {
    if u_now.len() != problem.cells_x + 1 {
        return Err(Error::GridMismatch(format!(
            "slice has {} nodes, problem has {}",
            u_now.len(),
            problem.cells_x + 1
        )));
    }
    let step = Step::new(problem, u_now, t_next);
    let opts = problem.newton;
    let tol = opts.tol * (1.0 + u_now.iter().fold(0.0_f64, |m, v| m.max(v.abs())));

    let mut u = u_now.to_vec();
    if problem.lateral == Lateral::Dirichlet {
        let n = problem.cells_x;
        u[0] = (problem.data)(problem.x(0), t_next);
        u[n] = (problem.data)(problem.x(n), t_next);
    }
    let range = step.active();

    let (mut r, mut norm) = step.residual(&u);
    let mut iterations = 0;
    let mut stalled = false;
    while norm > tol && iterations < opts.max_iter {
        iterations += 1;
        let (lo, di, up) = step.jacobian(&u);
        let mut d: Vec<f64> = r[range.clone()].iter().map(|v| -v).collect();
        if thomas(&lo, &di, &up, &mut d).is_err() {
            stalled = true;
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = u.clone();
            for (k, i) in range.clone().enumerate() {
                trial[i] += lambda * d[k];
            }
            let (rt, nt) = step.residual(&trial);
            if nt.is_finite() && nt < norm {
                u = trial;
                r = rt;
                norm = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            stalled = true;
            break;
        }
    }
    if norm <= tol {
        return Ok(u);
    }
    if !stalled && !norm.is_finite() {
        return Err(Error::NewtonDivergence {
            t: t_next,
            residual: norm,
            iterations,
        });
    }

    // lagged-coefficient fallback
    let mut picard = 0;
    while norm > tol && picard < opts.picard_iter {
        picard += 1;
        let (lo, di, up, mut rhs) = step.picard_system(&u);
        thomas(&lo, &di, &up, &mut rhs)?;
        for (k, i) in range.clone().enumerate() {
            u[i] = rhs[k];
        }
        norm = step.residual(&u).1;
    }
    if norm <= tol {
        Ok(u)
    } else {
        Err(Error::NewtonDivergence {
            t: t_next,
            residual: norm,
            iterations: iterations + picard,
        })
    }
}

/// Full trajectory: initial slice from the data function, then
/// [`step_implicit`] over the time grid.
pub fn solve(problem: &Problem) -> Result<GridField> {
    problem.validate()?;
    let nx = problem.cells_x + 1;
    let mut field = GridField::zeros(
        nx,
        problem.steps_t + 1,
        problem.domain.x_min,
        problem.hx(),
        problem.domain.t_start,
        problem.ht(),
    )?;
    let t0 = problem.domain.t_start;
    for i in 0..nx {
        field.set(i, 0, (problem.data)(problem.x(i), t0));
    }
    for k in 1..=problem.steps_t {
        let t = field.t(k);
        let next = step_implicit(problem, field.slice(k - 1), t)?;
        field.slice_mut(k).copy_from_slice(&next);
    }
    Ok(field)
}

/// `Σ_i w_i u_i` with trapezoid weights, the quantity conserved under
/// reflecting ends and `f ≡ 0`.
pub fn discrete_mass(slice: &[f64], hx: f64) -> f64 {
    let n = slice.len();
    slice
        .iter()
        .enumerate()
        .map(|(i, v)| trapezoid_weight(i, n, hx) * v)
        .sum()
}

/// Discrete weak residual
/// `∫ −u ∂tφ + A(x, t, Du)·Dφ − φ f(x, t, Du)` with midpoint time levels,
/// face-centered fluxes and trapezoid weights in space.
///
/// `phi` must vanish on the lateral boundary, at the initial time and at the
/// final time.
pub fn residual_weak(u: &GridField, problem: &Problem, phi: &GridField) -> Result<f64> {
    u.ensure_same_grid(phi)?;
    let (nx, nt) = (u.nx(), u.nt());
    if nt < 2 {
        return Err(Error::InvalidInput("need at least two time levels".into()));
    }
    let scale = phi.sup_abs().max(f64::MIN_POSITIVE);
    let trace_tol = 1e-12 * scale;
    let mut worst: f64 = 0.0;
    for i in 0..nx {
        worst = worst.max(phi.get(i, 0).abs()).max(phi.get(i, nt - 1).abs());
    }
    for k in 0..nt {
        worst = worst.max(phi.get(0, k).abs()).max(phi.get(nx - 1, k).abs());
    }
    if worst > trace_tol {
        return Err(Error::InvalidInput(format!(
            "test function has boundary trace {worst:.3e}; it must vanish on the parabolic boundary and at the final time"
        )));
    }
    let (hx, ht) = (u.hx(), u.ht());
    let par = &problem.params;
    let total: f64 = (0..nt - 1)
        .into_par_iter()
        .map(|k| {
            let tm = u.t(k) + 0.5 * ht;
            let ubar: Vec<f64> = (0..nx).map(|i| 0.5 * (u.get(i, k) + u.get(i, k + 1))).collect();
            let pbar: Vec<f64> = (0..nx).map(|i| 0.5 * (phi.get(i, k) + phi.get(i, k + 1))).collect();
            let mut s = 0.0;
            for i in 0..nx {
                let w = trapezoid_weight(i, nx, hx);
                let dphi_t = (phi.get(i, k + 1) - phi.get(i, k)) / ht;
                s -= w * ubar[i] * dphi_t;
                if i > 0 && i + 1 < nx {
                    let xi = (ubar[i + 1] - ubar[i - 1]) / (2.0 * hx);
                    s -= w * pbar[i] * problem.rhs_at(u.x(i), tm, xi);
                }
            }
            for i in 0..nx - 1 {
                let xm = u.x(i) + 0.5 * hx;
                let a_val = problem.coeff.eval_1d(xm, tm);
                let du = (ubar[i + 1] - ubar[i]) / hx;
                let dphi = (pbar[i + 1] - pbar[i]) / hx;
                s += hx * flux_a_1d(par.p, par.q, a_val, du) * dphi;
            }
            s * ht
        })
        .sum();
    Ok(total)
}

/// Strict sub/supersolution pair built around two shifted solves.
#[derive(Debug, Clone)]
pub struct SubSuperPair {
    pub sub: GridField,
    pub sup: GridField,
    /// Solution with right-hand side `f − δ`.
    pub lower_base: GridField,
    /// Solution with right-hand side `f + δ`.
    pub upper_base: GridField,
    /// The shift `δ = ε/(4T²)`.
    pub delta: f64,
}

/// Solves with `f ∓ δ`, `δ = ε/(4T²)`, then applies `∓ε/(T − τ/2)` where
/// `τ = t − t_start` and `T` is the length of the time interval.
pub fn make_sub_super_pair(problem: &Problem, eps: f64) -> Result<SubSuperPair> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("eps must be >= 0 (got {eps})")));
    }
    let span = problem.domain.t_end - problem.domain.t_start;
    let delta = eps / (4.0 * span * span);
    let shifted = |sign: f64| -> Result<GridField> {
        if delta == 0.0 {
            return solve(problem);
        }
        let base = problem.rhs.clone();
        let mut pb = problem.clone();
        pb.rhs = Some(Arc::new(move |x: &[f64], t: f64, xi: &[f64]| {
            base.as_ref().map_or(0.0, |f| f(x, t, xi)) + sign * delta
        }));
        solve(&pb)
    };
    let lower_base = shifted(-1.0)?;
    let upper_base = if delta == 0.0 {
        lower_base.clone()
    } else {
        shifted(1.0)?
    };
    let t0 = problem.domain.t_start;
    let bump = |k: usize, f: &GridField| eps / (span - 0.5 * (f.t(k) - t0));
    let mut sub = lower_base.clone();
    let mut sup = upper_base.clone();
    for k in 0..sub.nt() {
        let b = bump(k, &sub);
        sub.slice_mut(k).iter_mut().for_each(|v| *v -= b);
        sup.slice_mut(k).iter_mut().for_each(|v| *v += b);
    }
    Ok(SubSuperPair {
        sub,
        sup,
        lower_base,
        upper_base,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn heat(cells: usize, steps: usize) -> Problem {
        let dom = SpaceTimeBox::new(0.0, 1.0, 0.0, 0.1).unwrap();
        Problem::new(
            ExponentParams::homogeneous(2.0, 2.0).unwrap(),
            Coefficient::constant(1.0),
            dom,
            cells,
            steps,
            |x, t| if t == 0.0 { (PI * x).sin() } else { 0.0 },
        )
    }

    #[test]
    fn thomas_solves_small_system() {
        let mut rhs = vec![1.0, 2.0, 3.0];
        thomas(&[0.0, -1.0, -1.0], &[2.0, 2.0, 2.0], &[-1.0, -1.0, 0.0], &mut rhs).unwrap();
        let expect = [2.5, 4.0, 3.5];
        for (a, b) in rhs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn constants_are_stationary() {
        for &(p, q) in &[(1.5, 2.0), (3.0, 3.5)] {
            let dom = SpaceTimeBox::new(0.0, 1.0, 0.0, 0.1).unwrap();
            let pb = Problem::new(
                ExponentParams::homogeneous(p, q).unwrap(),
                Coefficient::constant(0.7),
                dom,
                16,
                1,
                |_, _| 2.5,
            );
            let next = step_implicit(&pb, &[2.5; 17], 0.1).unwrap();
            assert!(next.iter().all(|v| (v - 2.5).abs() < 1e-14));
        }
    }

    #[test]
    fn affine_states_are_stationary() {
        let dom = SpaceTimeBox::new(0.0, 1.0, 0.0, 0.1).unwrap();
        let pb = Problem::new(
            ExponentParams::homogeneous(3.0, 3.5).unwrap(),
            Coefficient::constant(0.4),
            dom,
            20,
            1,
            |x, _| 1.0 - 2.0 * x,
        );
        let now: Vec<f64> = (0..=20).map(|i| 1.0 - 2.0 * pb.x(i)).collect();
        let next = step_implicit(&pb, &now, 0.1).unwrap();
        for (a, b) in next.iter().zip(&now) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_single_step_matches_kernel() {
        let pb = heat(128, 1000);
        let ht = pb.ht();
        let now: Vec<f64> = (0..=128).map(|i| (PI * pb.x(i)).sin()).collect();
        let next = step_implicit(&pb, &now, ht).unwrap();
        let decay = (-2.0 * PI * PI * ht).exp();
        let hx = pb.hx();
        let err = (0..=128).fold(0.0_f64, |m, i| m.max((next[i] - decay * (PI * pb.x(i)).sin()).abs()));
        // backward-Euler truncation λ²h_t²/2 with λ = 2π², plus the spatial term
        let lambda = 2.0 * PI * PI;
        assert!(err < lambda * lambda * ht * ht + PI.powi(4) * ht * hx * hx, "err {err}");
    }

    #[test]
    fn zero_flux_conserves_mass() {
        let dom = SpaceTimeBox::new(-1.0, 1.0, 0.0, 0.2).unwrap();
        let pb = Problem::new(
            ExponentParams::homogeneous(1.5, 2.2).unwrap(),
            crate::coefficient::builtin("smooth_bump", &[]).unwrap(),
            dom,
            40,
            20,
            |x, _| (2.0 * x).cos() + x,
        )
        .with_lateral(Lateral::ZeroFlux);
        let u = solve(&pb).unwrap();
        let m0 = discrete_mass(u.slice(0), u.hx());
        for k in 1..u.nt() {
            let mk = discrete_mass(u.slice(k), u.hx());
            assert!((mk - m0).abs() <= 1e-8 * k as f64, "step {k}: {mk} vs {m0}");
        }
    }

    #[test]
    fn weak_residual_vanishes_for_constants() {
        let pb = heat(16, 16);
        let u = GridField::from_fn(&pb.domain, 16, 16, |_, _| 3.0).unwrap();
        let phi = GridField::from_fn(&pb.domain, 16, 16, |x, t| (PI * x).sin() * (PI * t / 0.1).sin()).unwrap();
        assert!(residual_weak(&u, &pb, &phi).unwrap().abs() < 1e-14);
        let bad = GridField::from_fn(&pb.domain, 16, 16, |x, _| x).unwrap();
        assert!(residual_weak(&u, &pb, &bad).is_err());
    }

    #[test]
    fn weak_residual_affine_is_small() {
        let pb = heat(32, 32);
        let u = GridField::from_fn(&pb.domain, 32, 32, |x, _| 2.0 * x - 1.0).unwrap();
        let phi = GridField::from_fn(&pb.domain, 32, 32, |x, t| (PI * x).sin() * (PI * t / 0.1).sin()).unwrap();
        assert!(residual_weak(&u, &pb, &phi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pair_with_zero_eps_is_base() {
        let pb = heat(16, 8);
        let pair = make_sub_super_pair(&pb, 0.0).unwrap();
        assert_eq!(pair.sub, pair.sup);
        assert_eq!(pair.sub, solve(&pb).unwrap());
    }

    #[test]
    fn growth_rhs_meets_bound() {
        let pb = heat(8, 4);
        let par = ExponentParams::new(2.0, 2.5, 1.5, 2.0, 0.8).unwrap();
        let mut pb = pb;
        pb.params = par;
        let pb = pb.with_growth_rhs([1.0, -1.0, 0.7]);
        assert!(pb.rhs_growth_excess(12) <= 1e-12);
    }
}
