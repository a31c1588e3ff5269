//! Approximation devices on grid fields: Steklov averages in time, spatial
//! mollification and the space-time inf-convolution, together with the
//! convergence reports built on them.

use rayon::prelude::*;

use crate::coefficient::{check_time_monotonicity, Coefficient, MonotonicityReport, TimeOrder};
use crate::error::{Error, Result};
use crate::field::{trapezoid_weight, GridField};
use crate::flux::pow_abs;
use crate::params::ExponentParams;
use crate::stats::fit_loglog;

/// Relative slack allowed between successive entries of a "monotone" sequence.
pub const TAIL_NOISE: f64 = 0.05;

fn window_steps(field: &GridField, h: f64) -> Result<usize> {
    let ratio = h / field.ht();
    let m = ratio.round();
    if !(h > 0.0) || m < 1.0 || (ratio - m).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "window {h} is not a positive multiple of the time step {}",
            field.ht()
        )));
    }
    let m = m as usize;
    if m >= field.nt() {
        return Err(Error::InvalidInput(format!(
            "window {h} exceeds the time extent {}",
            field.ht() * (field.nt() - 1) as f64
        )));
    }
    Ok(m)
}

/// Trapezoid average of time levels `k_lo..=k_lo + m`.
fn window_average(field: &GridField, k_lo: usize, m: usize, out: &mut [f64]) {
    out.fill(0.0);
    for j in 0..=m {
        let w = if j == 0 || j == m { 0.5 } else { 1.0 } / m as f64;
        for (o, v) in out.iter_mut().zip(field.slice(k_lo + j)) {
            *o += w * v;
        }
    }
}

/// `[u]_h(x, t) = (1/h)∫_{t−h}^{t} u(x, s) ds`, defined for `t ≥ t_start + h`.
pub fn steklov_left(field: &GridField, h: f64) -> Result<GridField> {
    let m = window_steps(field, h)?;
    let nt = field.nt() - m;
    let mut out = GridField::zeros(field.nx(), nt, field.x(0), field.hx(), field.t(m), field.ht())?;
    for k in 0..nt {
        window_average(field, k, m, out.slice_mut(k));
    }
    Ok(out)
}

/// `(1/h)∫_{t}^{t+h} u(x, s) ds`, defined for `t ≤ t_end − h`.
pub fn steklov_right(field: &GridField, h: f64) -> Result<GridField> {
    let m = window_steps(field, h)?;
    let nt = field.nt() - m;
    let mut out = GridField::zeros(field.nx(), nt, field.x(0), field.hx(), field.t(0), field.ht())?;
    for k in 0..nt {
        window_average(field, k, m, out.slice_mut(k));
    }
    Ok(out)
}

/// `∫ |d|^{r1} + a|d|^{r2}` for a field of cell quantities such as
/// [`GridField::forward_dx`]: each node stands for one cell of width `h_x`,
/// times use trapezoid weights, and a single time level is integrated in
/// space only.
pub fn modular(diff: &GridField, coeff: &Coefficient, r1: f64, r2: f64) -> f64 {
    let nt = diff.nt();
    (0..nt)
        .into_par_iter()
        .map(|k| {
            let wt = if nt == 1 {
                1.0
            } else {
                trapezoid_weight(k, nt, diff.ht())
            };
            let t = diff.t(k);
            let row = diff.slice(k);
            let s: f64 = row
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let r = d.abs();
                    let a = coeff.eval_1d(diff.x(i), t);
                    diff.hx() * (pow_abs(r, r1) + a * pow_abs(r, r2))
                })
                .sum();
            wt * s
        })
        .sum()
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularRow {
    /// Averaging window or mollifier radius.
    pub h: f64,
    /// `∫ |Dv − Du|^p`.
    pub p_term: f64,
    /// `∫ a|Dv − Du|^q`.
    pub a_term: f64,
}

impl ModularRow {
    pub fn total(&self) -> f64 {
        self.p_term + self.a_term
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Rows ordered as the input sequence (coarse to fine).
    pub rows: Vec<ModularRow>,
    pub tol: f64,
    /// Log–log slope of the total modular against `h`.
    pub rate: Option<f64>,
    pub monotone: bool,
    pub below_tol: bool,
    pub pass: bool,
    /// Almost-increasing scans in both time orders, when a coefficient is involved.
    pub monotonicity: Option<[MonotonicityReport; 2]>,
}

/// Monotone decrease up to [`TAIL_NOISE`] relative slack.
pub fn is_monotone_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + TAIL_NOISE))
}

fn finish_report(rows: Vec<ModularRow>, tol: f64, monotonicity: Option<[MonotonicityReport; 2]>) -> ConvergenceReport {
    let totals: Vec<f64> = rows.iter().map(ModularRow::total).collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let rate = fit_loglog(&hs, &totals).map(|f| f.slope);
    let monotone = is_monotone_decreasing(&totals);
    let below_tol = totals.last().is_some_and(|v| *v < tol);
    ConvergenceReport {
        rows,
        tol,
        rate,
        monotone,
        below_tol,
        pass: monotone && below_tol,
        monotonicity,
    }
}

/// Modular distance between `D[u]_h` (left average) and `Du` for each `h`,
/// measured on the common time range `[t_start + max h, t_end]`.
pub fn steklov_wh_convergence(
    field: &GridField,
    coeff: &Coefficient,
    params: &ExponentParams,
    h_sequence: &[f64],
    tol: f64,
) -> Result<ConvergenceReport> {
    if h_sequence.is_empty() {
        return Err(Error::InvalidInput("empty h sequence".into()));
    }
    let h_max = h_sequence.iter().copied().fold(0.0, f64::max);
    let m_max = window_steps(field, h_max)?;
    let du = field.forward_dx()?;
    let k_hi = field.nt() - 1;
    let du_common = du.restrict(0, du.nx() - 1, m_max, k_hi)?;
    let mut rows = Vec::with_capacity(h_sequence.len());
    for &h in h_sequence {
        let m = window_steps(field, h)?;
        let avg = steklov_left(field, h)?.forward_dx()?;
        // level k of the average sits at original level k + m
        let aligned = avg.restrict(0, avg.nx() - 1, m_max - m, k_hi - m)?;
        let diff = aligned.zip_with(&du_common, |a, b| a - b)?;
        let zero = Coefficient::constant(0.0);
        let p_term = modular(&diff, &zero, params.p, params.q);
        rows.push(ModularRow {
            h,
            p_term,
            a_term: modular(&diff, coeff, params.p, params.q) - p_term,
        });
    }
    let dom = field.domain();
    let mono = [
        check_time_monotonicity(coeff, &dom, 12, TimeOrder::EarlierBounded),
        check_time_monotonicity(coeff, &dom, 12, TimeOrder::LaterBounded),
    ];
    Ok(finish_report(rows, tol, Some(mono)))
}

/// Tables from the counter-example with `u = |x|^e max(t, 0)` and
/// `a = max(−t, 0)` on `(−1, 1) × (−h, 0)`.
#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub exponent: f64,
    /// `(n, I_n, P_n)`: cell count, a-weighted integral, p-integral.
    pub rows: Vec<(usize, f64, f64)>,
    pub slope: f64,
    pub reference_slope: f64,
    /// `|P_n − P_{n/2}| / P_n` at the finest grid.
    pub p_rel_change: f64,
    pub slope_ok: bool,
    pub p_bounded: bool,
    pub pass: bool,
}

/// Spatial exponent of the counter-example, `1 − 1/p + ε/q`, chosen so that
/// `|Du|^q ~ |x|^{−q/p + ε}`.
pub fn counterexample_exponent(p: f64, q: f64, small_eps: f64) -> f64 {
    1.0 - 1.0 / p + small_eps / q
}

/// Midpoint sum of `|x|^s` over `n` equal cells of `(−1, 1)`.
fn midpoint_power_sum(n: usize, s: f64) -> f64 {
    let h = 2.0 / n as f64;
    // symmetric: sum the right half twice
    let half = n / 2;
    2.0 * h * (0..half).map(|j| ((j as f64 + 0.5) * h).powf(s)).sum::<f64>()
}

/// Divergence of the a-weighted Steklov modular on refinement.
///
/// On `t ∈ (−h, −h/2)` the left average vanishes, so the right average
/// `[u]_h = |x|^e (t + h)²/(2h)` is used; it is the one that sees the jump of
/// `max(t, 0)` from below. The a-weighted integral `I_n` over that slab uses
/// midpoint quadrature on `n` cells (offset half a cell from `x = 0`) and a
/// fixed 256-cell midpoint rule in time. `P_n = ∫_{(−1,1)×(0,1)} |Du|^p`.
pub fn counterexample_divergence(
    p: f64,
    q: f64,
    small_eps: f64,
    h: f64,
    grid_sequence: &[usize],
) -> Result<CounterexampleReport> {
    if !(p >= 1.0 && p < q) {
        return Err(Error::InvalidParams(format!(
            "counter-example needs 1 <= p < q (p = {p}, q = {q})"
        )));
    }
    let reference_slope = q / p - small_eps - 1.0;
    if !(reference_slope > 0.0) {
        return Err(Error::InvalidParams(format!(
            "q/p - eps = {} <= 1: no divergence expected",
            q / p - small_eps
        )));
    }
    if !(h > 0.0) || grid_sequence.len() < 2 || grid_sequence.iter().any(|n| *n < 2 || n % 2 != 0) {
        return Err(Error::InvalidInput(
            "need h > 0 and at least two even cell counts".into(),
        ));
    }
    let e = counterexample_exponent(p, q, small_eps);
    // time factor ∫_{−h}^{−h/2} (−t) ((t + h)²/(2h))^q dt by midpoint
    let nt = 256;
    let dt = 0.5 * h / nt as f64;
    let time_q: f64 = (0..nt)
        .map(|j| {
            let t = -h + (j as f64 + 0.5) * dt;
            -t * ((t + h).powi(2) / (2.0 * h)).powf(q) * dt
        })
        .sum();
    let time_p = 1.0 / (p + 1.0);
    let rows: Vec<(usize, f64, f64)> = grid_sequence
        .iter()
        .map(|&n| {
            let i_n = e.powf(q) * midpoint_power_sum(n, (e - 1.0) * q) * time_q;
            let p_n = e.powf(p) * midpoint_power_sum(n, (e - 1.0) * p) * time_p;
            (n, i_n, p_n)
        })
        .collect();
    let ns: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let is: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let slope = fit_loglog(&ns, &is).map_or(f64::NAN, |f| f.slope);
    let last = rows[rows.len() - 1].2;
    let prev = rows[rows.len() - 2].2;
    let p_rel_change = (last - prev).abs() / last;
    let slope_ok = (slope - reference_slope).abs() <= 0.1 * reference_slope;
    let p_bounded = p_rel_change < 0.05;
    Ok(CounterexampleReport {
        exponent: e,
        rows,
        slope,
        reference_slope,
        p_rel_change,
        slope_ok,
        p_bounded,
        pass: slope_ok && p_bounded,
    })
}

/// Unnormalized bump `exp(−1/(1 − s²))` on `|s| < 1`.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Kernel weights on offsets `−m..=m`, summing to one.
fn kernel_weights(delta: f64, hx: f64) -> Vec<f64> {
    let m = (delta / hx).floor() as usize;
    let raw: Vec<f64> = (0..=2 * m).map(|j| bump((j as f64 - m as f64) * hx / delta)).collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return vec![1.0];
    }
    raw.into_iter().map(|w| w / total).collect()
}

fn convolve_row(row: &[f64], w: &[f64], out: &mut [f64], outside_zero: bool, offset: usize) {
    let m = w.len() / 2;
    let n = row.len();
    for (o, val) in out.iter_mut().enumerate() {
        let i = o + offset;
        let mut s = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let src = i as isize + j as isize - m as isize;
            if src >= 0 && (src as usize) < n {
                s += wj * row[src as usize];
            } else if !outside_zero {
                unreachable!("interior convolution left the grid");
            }
        }
        *val = s;
    }
}

/// Convolution in space with a bump kernel of radius `delta`, normalized to
/// unit mass on the grid. The support of the field, widened by `delta`, must
/// stay inside the grid.
pub fn mollify_space(field: &GridField, delta: f64) -> Result<GridField> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "mollifier radius must be > 0 (got {delta})"
        )));
    }
    let cut = 1e-14 * field.sup_abs();
    let mut lo = usize::MAX;
    let mut hi = 0;
    for k in 0..field.nt() {
        for (i, v) in field.slice(k).iter().enumerate() {
            if v.abs() > cut {
                lo = lo.min(i);
                hi = hi.max(i);
            }
        }
    }
    if lo != usize::MAX {
        let left = field.x(lo) - field.x(0);
        let right = field.x(field.nx() - 1) - field.x(hi);
        if delta >= left || delta >= right {
            return Err(Error::InvalidInput(format!(
                "mollifier radius {delta} reaches the lateral boundary (support margins {left:.3e}, {right:.3e})"
            )));
        }
    }
    let w = kernel_weights(delta, field.hx());
    let mut values = vec![0.0; field.values().len()];
    values
        .par_chunks_mut(field.nx())
        .enumerate()
        .for_each(|(k, out)| convolve_row(field.slice(k), &w, out, true, 0));
    Ok(field.with_values(values))
}

/// Mollification without the support condition, returned on the nodes whose
/// kernel window fits inside the grid.
pub fn mollify_space_interior(field: &GridField, delta: f64) -> Result<GridField> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "mollifier radius must be > 0 (got {delta})"
        )));
    }
    let w = kernel_weights(delta, field.hx());
    let m = w.len() / 2;
    if 2 * m + 2 > field.nx() {
        return Err(Error::InvalidInput(format!(
            "mollifier radius {delta} leaves no interior nodes"
        )));
    }
    let mut out = field.restrict(m, field.nx() - 1 - m, 0, field.nt() - 1)?;
    let nx_out = out.nx();
    for k in 0..field.nt() {
        let mut row = vec![0.0; nx_out];
        convolve_row(field.slice(k), &w, &mut row, false, m);
        out.slice_mut(k).copy_from_slice(&row);
    }
    Ok(out)
}

/// Spatial modular `∫ |Du − Du_δ|^p + a|Du − Du_δ|^q` for each radius, with
/// both gradients taken on the interior nodes of the widest kernel.
pub fn mollify_wh_convergence(
    field: &GridField,
    coeff: &Coefficient,
    params: &ExponentParams,
    deltas: &[f64],
    tol: f64,
) -> Result<ConvergenceReport> {
    if deltas.is_empty() {
        return Err(Error::InvalidInput("empty delta sequence".into()));
    }
    let d_max = deltas.iter().copied().fold(0.0, f64::max);
    let m_max = kernel_weights(d_max, field.hx()).len() / 2;
    if 2 * m_max + 3 > field.nx() {
        return Err(Error::InvalidInput(format!("radius {d_max} leaves no interior nodes")));
    }
    let common = |g: &GridField, m: usize| -> Result<GridField> {
        let shift = m_max - m;
        g.restrict(shift, g.nx() - 1 - shift, 0, g.nt() - 1)?.forward_dx()
    };
    let du = common(
        &field.restrict(m_max, field.nx() - 1 - m_max, 0, field.nt() - 1)?,
        m_max,
    )?;
    let zero = Coefficient::constant(0.0);
    let mut rows = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let m = kernel_weights(d, field.hx()).len() / 2;
        let moll = mollify_space_interior(field, d)?;
        let dm = common(&moll, m)?;
        let diff = dm.zip_with(&du, |a, b| a - b)?;
        let p_term = modular(&diff, &zero, params.p, params.q);
        rows.push(ModularRow {
            h: d,
            p_term,
            a_term: modular(&diff, coeff, params.p, params.q) - p_term,
        });
    }
    Ok(finish_report(rows, tol, None))
}

/// `δ_ε = (ω^{-1}(ε^{q(ℓ−1)}))² / (2 osc u)`.
pub fn delta_eps(coeff: &Coefficient, eps: f64, q: f64, ell: f64, osc_u: f64) -> Result<f64> {
    if !(eps > 0.0 && osc_u > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need eps > 0 and osc > 0 (eps = {eps}, osc = {osc_u})"
        )));
    }
    let s = coeff.omega_time.inverse(eps.powf(q * (ell - 1.0)))?;
    Ok(s * s / (2.0 * osc_u))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfConvParams {
    pub eps: f64,
    pub ell: f64,
    pub delta_eps: f64,
    pub r_eps: f64,
    pub osc_u: f64,
}

impl InfConvParams {
    /// Parameters with `δ_ε` taken from the coefficient's time modulus.
    pub fn new(coeff: &Coefficient, params: &ExponentParams, eps: f64, ell: f64, osc_u: f64) -> Result<Self> {
        let delta = delta_eps(coeff, eps, params.q, ell, osc_u)?;
        Self::with_delta(params.p, eps, ell, delta, osc_u)
    }

    /// Parameters with an explicit time scale `δ`.
    pub fn with_delta(p: f64, eps: f64, ell: f64, delta: f64, osc_u: f64) -> Result<Self> {
        let ell_min = 3f64.max(p / (p - 1.0));
        if !(ell > ell_min) {
            return Err(Error::InvalidParams(format!(
                "ell > max(3, p/(p-1)) = {ell_min} violated (ell = {ell})"
            )));
        }
        if !(eps > 0.0 && delta > 0.0 && osc_u >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "need eps > 0, delta > 0, osc >= 0 (eps = {eps}, delta = {delta}, osc = {osc_u})"
            )));
        }
        let r_eps = (ell * eps.powf(ell - 1.0) * osc_u)
            .powf(1.0 / ell)
            .max((2.0 * delta * osc_u).sqrt());
        Ok(Self {
            eps,
            ell,
            delta_eps: delta,
            r_eps,
            osc_u,
        })
    }

    /// `C = (ℓ−1) r(ε)^{ℓ−2} / ε^{ℓ−1}`.
    pub fn semiconcavity_constant(&self) -> f64 {
        (self.ell - 1.0) * self.r_eps.powf(self.ell - 2.0) / self.eps.powf(self.ell - 1.0)
    }

    pub fn space_penalty(&self, d: f64) -> f64 {
        d.abs().powf(self.ell) / (self.ell * self.eps.powf(self.ell - 1.0))
    }

    pub fn time_penalty(&self, d: f64) -> f64 {
        d * d / (2.0 * self.delta_eps)
    }
}

#[derive(Debug, Clone)]
pub struct InfConvResult {
    pub value: GridField,
    /// Argmin node `(i, k)` per output node, time-major like the field.
    pub argmin: Vec<(usize, usize)>,
}

impl InfConvResult {
    pub fn argmin_at(&self, i: usize, k: usize) -> (usize, usize) {
        self.argmin[k * self.value.nx() + i]
    }

    /// Coordinates `(x_ε, t_ε)` of the minimizer for node `(i, k)`.
    pub fn argmin_point(&self, i: usize, k: usize) -> (f64, f64) {
        let (a, b) = self.argmin_at(i, k);
        (self.value.x(a), self.value.t(b))
    }
}

/// Brute-force `u_ε(x,t) = min_{(y,s)} u(y,s) + |x−y|^ℓ/(ℓε^{ℓ−1}) + |t−s|²/(2δ_ε)`
/// over all grid nodes. Ties go to the first node in time-major order.
pub fn inf_convolution(field: &GridField, icp: &InfConvParams) -> InfConvResult {
    inf_convolution_with_cutoff(field, icp, None)
}

/// As [`inf_convolution`], optionally restricting candidates to
/// `|x − y|, |t − s| ≤ cutoff`.
pub fn inf_convolution_with_cutoff(field: &GridField, icp: &InfConvParams, cutoff: Option<f64>) -> InfConvResult {
    let (nx, nt) = (field.nx(), field.nt());
    let space: Vec<f64> = (0..nx).map(|d| icp.space_penalty(d as f64 * field.hx())).collect();
    let time: Vec<f64> = (0..nt).map(|d| icp.time_penalty(d as f64 * field.ht())).collect();
    let (ri, rk) = match cutoff {
        Some(c) => (
            ((c / field.hx()).floor() as usize).min(nx - 1),
            ((c / field.ht()).floor() as usize).min(nt - 1),
        ),
        None => (nx - 1, nt - 1),
    };
    let out: Vec<(f64, (usize, usize))> = (0..nx * nt)
        .into_par_iter()
        .map(|idx| {
            let (i, k) = (idx % nx, idx / nx);
            let mut best = f64::INFINITY;
            let mut arg = (i, k);
            for l in k.saturating_sub(rk)..=(k + rk).min(nt - 1) {
                let tp = time[k.abs_diff(l)];
                let row = field.slice(l);
                for j in i.saturating_sub(ri)..=(i + ri).min(nx - 1) {
                    let v = row[j] + space[i.abs_diff(j)] + tp;
                    if v < best {
                        best = v;
                        arg = (j, l);
                    }
                }
            }
            (best, arg)
        })
        .collect();
    let (values, argmin): (Vec<f64>, Vec<(usize, usize)>) = out.into_iter().unzip();
    InfConvResult {
        value: field.with_values(values),
        argmin,
    }
}

/// Largest discrete second difference of `u_ε − C x² − t²/δ_ε` along grid
/// lines in x and in t. The quadratic parts are subtracted in closed form.
pub fn semiconcavity_margin(value: &GridField, icp: &InfConvParams) -> f64 {
    let c = icp.semiconcavity_constant();
    let (nx, nt) = (value.nx(), value.nt());
    let (hx, ht) = (value.hx(), value.ht());
    let qx = 2.0 * c * hx * hx;
    let qt = 2.0 * ht * ht / icp.delta_eps;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..nt {
        for i in 0..nx {
            let u = value.get(i, k);
            if i > 0 && i + 1 < nx {
                worst = worst.max(value.get(i + 1, k) + value.get(i - 1, k) - 2.0 * u - qx);
            }
            if k > 0 && k + 1 < nt {
                worst = worst.max(value.get(i, k + 1) + value.get(i, k - 1) - 2.0 * u - qt);
            }
        }
    }
    worst
}
