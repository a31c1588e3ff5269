//! The modulating coefficient `a(x,t) ≥ 0`, its closed-form families and
//! checkers for the structural hypotheses (spatial Lipschitz bound, time
//! modulus, almost-monotonicity in time).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::SpaceTimeBox;

type EvalFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// Monotone modulus `ω_a` with `ω_a(0) = 0`, used as `|a(x,t) − a(x,s)| ≤ ω_a(|t − s|)`.
#[derive(Clone)]
pub struct TimeModulus {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Right end of the bracket used when inverting.
    s_max: f64,
}

impl fmt::Debug for TimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeModulus")
            .field("s_max", &self.s_max)
            .finish_non_exhaustive()
    }
}

impl TimeModulus {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, s_max: f64) -> Self {
        Self { f: Arc::new(f), s_max }
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0, 1e6)
    }

    /// `ω(s) = c·s`.
    pub fn linear(c: f64) -> Self {
        Self::new(move |s| c * s, 1e6)
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// `ω^{-1}(v) = inf{s ∈ [0, s_max] : ω(s) ≥ v}` by bisection.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::InvalidInput(format!("cannot invert the modulus at {v}")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let sup = self.eval(self.s_max);
        if !(sup >= v) {
            return Err(Error::ModulusRange { value: v, sup });
        }
        let (mut lo, mut hi) = (0.0_f64, self.s_max);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) >= v {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-12 * hi.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(hi)
    }
}

/// Closed-form coefficient with its structural metadata.
#[derive(Clone)]
pub struct Coefficient {
    name: String,
    eval: EvalFn,
    grad: Option<GradFn>,
    /// Bound on `‖Da‖_{L∞}`.
    pub lip_space: f64,
    pub omega_time: TimeModulus,
    /// Almost-monotonicity constant, when known.
    pub c_a: Option<f64>,
    /// Bound on `‖a‖_{L∞}`, when known.
    pub sup: Option<f64>,
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficient")
            .field("name", &self.name)
            .field("lip_space", &self.lip_space)
            .field("c_a", &self.c_a)
            .finish_non_exhaustive()
    }
}

impl Coefficient {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        lip_space: f64,
        omega_time: TimeModulus,
    ) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            grad: None,
            lip_space,
            omega_time,
            c_a: None,
            sup: None,
        }
    }

    pub fn with_grad(mut self, grad: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_c_a(mut self, c_a: f64) -> Self {
        self.c_a = Some(c_a);
        self
    }

    pub fn with_sup(mut self, sup: f64) -> Self {
        self.sup = Some(sup);
        self
    }

    pub fn constant(c: f64) -> Self {
        Coefficient::new("constant", move |_, _| c, 0.0, TimeModulus::zero())
            .with_grad(|_, _, g| g.fill(0.0))
            .with_c_a(1.0)
            .with_sup(c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.eval)(x, t)
    }

    #[inline]
    pub fn eval_1d(&self, x: f64, t: f64) -> f64 {
        (self.eval)(&[x], t)
    }

    /// Spatial gradient; closed form when available, central differences otherwise.
    pub fn grad(&self, x: &[f64], t: f64, out: &mut [f64]) {
        if let Some(g) = &self.grad {
            g(x, t, out);
            return;
        }
        let mut y = x.to_vec();
        for d in 0..x.len() {
            let h = 1e-6 * (1.0 + x[d].abs());
            y[d] = x[d] + h;
            let up = self.eval(&y, t);
            y[d] = x[d] - h;
            let down = self.eval(&y, t);
            y[d] = x[d];
            out[d] = (up - down) / (2.0 * h);
        }
    }

    pub fn grad_1d(&self, x: f64, t: f64) -> f64 {
        let mut g = [0.0];
        self.grad(&[x], t, &mut g);
        g[0]
    }
}

fn lookup(params: &[(&str, f64)], key: &str, default: f64) -> f64 {
    params
        .iter()
        .rev()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .unwrap_or(default)
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 5] = ["constant", "neg_time_ramp", "line_ramp", "smooth_bump", "power_space"];

/// Named closed-form coefficients.
///
/// | name | formula | parameters (defaults) |
/// |------|---------|-----------------------|
/// | `constant` | `c` | `c` (1) |
/// | `neg_time_ramp` | `max(−t, 0)` | none |
/// | `line_ramp` | `max(−(x₁ + t + 1), 0)` | none |
/// | `smooth_bump` | `amp·exp(−|x|²/(2w²)) + rate·max(t + 1, 0)` | `amp` (1), `width` (0.5), `rate` (0) |
/// | `power_space` | `c·|x|^k` on `|x| ≤ radius` | `c` (1), `k` (2), `radius` (1) |
pub fn builtin(name: &str, params: &[(&str, f64)]) -> Result<Coefficient> {
    match name {
        "constant" => {
            let c = lookup(params, "c", 1.0);
            if c < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "constant coefficient must be >= 0 (c = {c})"
                )));
            }
            Ok(Coefficient::constant(c))
        }
        "neg_time_ramp" => Ok(
            Coefficient::new("neg_time_ramp", |_, t| (-t).max(0.0), 0.0, TimeModulus::linear(1.0))
                .with_grad(|_, _, g| g.fill(0.0)),
        ),
        "line_ramp" => Ok(Coefficient::new(
            "line_ramp",
            |x, t| (-(x[0] + t + 1.0)).max(0.0),
            1.0,
            TimeModulus::linear(1.0),
        )
        .with_grad(|x, t, g| {
            g.fill(0.0);
            if x[0] + t + 1.0 < 0.0 {
                g[0] = -1.0;
            }
        })),
        "smooth_bump" => {
            let amp = lookup(params, "amp", 1.0);
            let width = lookup(params, "width", 0.5);
            let rate = lookup(params, "rate", 0.0);
            if amp < 0.0 || rate < 0.0 || width <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "smooth_bump needs amp >= 0, rate >= 0, width > 0 (amp = {amp}, rate = {rate}, width = {width})"
                )));
            }
            let w2 = width * width;
            let omega = if rate > 0.0 {
                TimeModulus::linear(rate)
            } else {
                TimeModulus::zero()
            };
            let mut coeff = Coefficient::new(
                "smooth_bump",
                move |x, t| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    amp * (-r2 / (2.0 * w2)).exp() + rate * (t + 1.0).max(0.0)
                },
                amp * (-0.5_f64).exp() / width,
                omega,
            )
            .with_grad(move |x, _, g| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let e = amp * (-r2 / (2.0 * w2)).exp();
                for (gd, xd) in g.iter_mut().zip(x) {
                    *gd = -e * xd / w2;
                }
            });
            if rate == 0.0 {
                coeff = coeff.with_c_a(1.0);
            }
            Ok(coeff)
        }
        "power_space" => {
            let c = lookup(params, "c", 1.0);
            let k = lookup(params, "k", 2.0);
            let radius = lookup(params, "radius", 1.0);
            if c < 0.0 || k < 1.0 || radius <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "power_space needs c >= 0, k >= 1, radius > 0 (c = {c}, k = {k}, radius = {radius})"
                )));
            }
            Ok(Coefficient::new(
                "power_space",
                move |x, _| {
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    c * r.powf(k)
                },
                c * k * radius.powf(k - 1.0),
                TimeModulus::zero(),
            )
            .with_grad(move |x, _, g| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let scale = if r > 0.0 { c * k * r.powf(k - 2.0) } else { 0.0 };
                for (gd, xd) in g.iter_mut().zip(x) {
                    *gd = scale * xd;
                }
            })
            .with_c_a(1.0)
            .with_sup(c * radius.powf(k)))
        }
        other => Err(Error::UnknownCoefficient(other.to_string())),
    }
}

/// Outcome of an almost-monotonicity scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    pub ok: bool,
    /// Smallest `C ≥ 1` satisfying the sampled inequality (`∞` when none exists).
    pub c_a_observed: f64,
    pub pairs: usize,
}

/// Which ordering of the time arguments the inequality `a(x,t) ≤ C a(x,s)` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeOrder {
    /// `t ≤ s`: `a` may grow in time only up to the factor `C`.
    EarlierBounded,
    /// `s ≤ t`: the mirrored condition.
    LaterBounded,
}

/// Scan `a(x,t) ≤ C a(x,s)` for `t ≤ s` on a `sample_count × sample_count` lattice.
pub fn check_almost_increasing(
    coeff: &Coefficient,
    cylinder: &SpaceTimeBox,
    sample_count: usize,
) -> MonotonicityReport {
    check_time_monotonicity(coeff, cylinder, sample_count, TimeOrder::EarlierBounded)
}

/// The mirrored scan: `a(x,t) ≤ C a(x,s)` for `s ≤ t`.
pub fn check_almost_decreasing(
    coeff: &Coefficient,
    cylinder: &SpaceTimeBox,
    sample_count: usize,
) -> MonotonicityReport {
    check_time_monotonicity(coeff, cylinder, sample_count, TimeOrder::LaterBounded)
}

pub fn check_time_monotonicity(
    coeff: &Coefficient,
    cylinder: &SpaceTimeBox,
    sample_count: usize,
    order: TimeOrder,
) -> MonotonicityReport {
    let n = sample_count.max(2);
    let xs = linspace(cylinder.x_min, cylinder.x_max, n);
    let ts = linspace(cylinder.t_start, cylinder.t_end, n);
    let mut worst = 1.0_f64;
    let mut pairs = 0;
    for &x in &xs {
        let vals: Vec<f64> = ts.iter().map(|&t| coeff.eval_1d(x, t)).collect();
        for i in 0..n {
            for j in i..n {
                // (earlier, later) = (vals[i], vals[j])
                let (num, den) = match order {
                    TimeOrder::EarlierBounded => (vals[i], vals[j]),
                    TimeOrder::LaterBounded => (vals[j], vals[i]),
                };
                pairs += 1;
                if num <= 0.0 {
                    continue;
                }
                if den <= 0.0 {
                    worst = f64::INFINITY;
                } else {
                    worst = worst.max(num / den);
                }
            }
        }
    }
    MonotonicityReport {
        ok: worst.is_finite(),
        c_a_observed: worst,
        pairs,
    }
}

/// Largest `|Δa|/|Δx|` over lattice edges of `region` (1D in space), skipping
/// edges that touch a kink: a node whose one-sided slopes differ by more than
/// `10·h_x·lip_space`.
pub fn spatial_lipschitz_estimate(coeff: &Coefficient, region: &SpaceTimeBox, cells_x: usize, cells_t: usize) -> f64 {
    let nx = cells_x.max(2) + 1;
    let xs = linspace(region.x_min, region.x_max, nx);
    let ts = linspace(region.t_start, region.t_end, cells_t.max(1) + 1);
    let hx = xs[1] - xs[0];
    let kink = 10.0 * hx * coeff.lip_space;
    let mut best = 0.0_f64;
    for &t in &ts {
        let vals: Vec<f64> = xs.iter().map(|&x| coeff.eval_1d(x, t)).collect();
        let slopes: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]) / hx).collect();
        let is_kink =
            |node: usize| -> bool { node > 0 && node + 1 < nx && (slopes[node] - slopes[node - 1]).abs() > kink };
        for (e, s) in slopes.iter().enumerate() {
            if is_kink(e) || is_kink(e + 1) {
                continue;
            }
            best = best.max(s.abs());
        }
    }
    best
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
