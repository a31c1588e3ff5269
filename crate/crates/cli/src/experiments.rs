//! One runner per experiment kind. Each returns a table plus checks.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dplab_core::coefficient::{builtin, Coefficient};
use dplab_core::field::{GridField, SpaceTimeBox};
use dplab_core::flux::vector_ineq::*;
use dplab_core::params::time_exponent_target;
use dplab_core::regularity::*;
use dplab_core::solver::{make_sub_super_pair, solve, Lateral, Problem, RhsFn};
use dplab_core::stats::{fit_loglog, observed_orders};
use dplab_core::transforms::*;
use dplab_core::verify::*;
use dplab_core::ExponentParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Kind};
use crate::error::CliError;
use crate::output::{num, Check, Outcome, PlotSpec, Table};

type Res<T> = Result<T, CliError>;

pub fn run(cfg: &ExperimentConfig) -> Res<Outcome> {
    let start = Instant::now();
    let mut out = match cfg.kind {
        Kind::Solve => run_solve(cfg),
        Kind::Compare => run_compare(cfg),
        Kind::Barrier => run_barrier(cfg),
        Kind::Modulus => run_modulus(cfg),
        Kind::Steklov => run_steklov(cfg),
        Kind::Infconv => run_infconv(cfg),
        Kind::Caccioppoli => run_caccioppoli(cfg),
        Kind::Counterexample => run_counterexample(cfg),
        Kind::PsiScan => run_psi_scan(cfg),
        Kind::VectorIneq => run_vector_ineq(cfg),
        Kind::ClassS => run_class_s(cfg),
    }?;
    if let Some(budget) = cfg.raw("check", "max_seconds") {
        let budget: f64 = budget
            .parse()
            .map_err(|_| CliError::Parse(format!("check.max_seconds: cannot parse '{budget}'")))?;
        let el = start.elapsed();
        out.checks.push(Check::new(
            "runtime",
            el <= Duration::from_secs_f64(budget),
            format!("{:.2}s of {budget}s", el.as_secs_f64()),
        ));
    }
    Ok(out)
}

fn plot(x_col: usize, y_col: usize, logscale: bool) -> PlotSpec {
    PlotSpec { x_col, y_col, logscale }
}

fn domain(cfg: &ExperimentConfig) -> Res<SpaceTimeBox> {
    SpaceTimeBox::new(
        cfg.get_or("domain", "x_min", -1.0)?,
        cfg.get_or("domain", "x_max", 1.0)?,
        cfg.get_or("domain", "t_start", -1.0)?,
        cfg.get_or("domain", "t_end", 0.0)?,
    )
    .map_err(|e| CliError::Parse(e.to_string()))
}

/// Named initial/boundary profiles, scaled by `amplitude`.
fn data_fn(
    cfg: &ExperimentConfig,
    dom: &SpaceTimeBox,
    amplitude: f64,
) -> Res<impl Fn(f64, f64) -> f64 + Send + Sync + 'static> {
    let profile = cfg.raw("data", "profile").unwrap_or("cos_mix").to_string();
    let amp = amplitude * cfg.get_or("data", "amplitude", 1.0)?;
    let (x0, len) = (dom.x_min, dom.x_max - dom.x_min);
    let id = match profile.as_str() {
        "sine" => 0,
        "cos_mix" => 1,
        other => {
            return Err(CliError::Parse(format!(
                "data.profile: unknown profile '{other}' (sine, cos_mix)"
            )))
        }
    };
    Ok(move |x: f64, _t: f64| match id {
        0 => amp * (PI * (x - x0) / len).sin(),
        _ => amp * ((0.5 * PI * x).cos() + 0.3 * (PI * x).sin()),
    })
}

/// `(cells, steps)` pairs from `[grid]`: `steps` as a list (or one value for
/// all meshes), or `dt_scale = c` for `h_t ≈ c h_x²`.
fn meshes(cfg: &ExperimentConfig, dom: &SpaceTimeBox) -> Res<Vec<(usize, usize)>> {
    let cells: Vec<usize> = cfg.list_or("grid", "cells", vec![64])?;
    let span = dom.t_end - dom.t_start;
    let len = dom.x_max - dom.x_min;
    if let Some(steps) = cfg.opt_list::<usize>("grid", "steps")? {
        return match steps.len() {
            1 => Ok(cells.iter().map(|&c| (c, steps[0])).collect()),
            n if n == cells.len() => Ok(cells.into_iter().zip(steps).collect()),
            _ => Err(CliError::Parse(
                "grid.steps must have one entry or one per grid.cells entry".into(),
            )),
        };
    }
    let scale: f64 = cfg.get_or("grid", "dt_scale", 1.0)?;
    if !(scale > 0.0) {
        return Err(CliError::Parse("grid.dt_scale must be positive".into()));
    }
    Ok(cells
        .into_iter()
        .map(|c| {
            let hx = len / c as f64;
            (c, ((span / (scale * hx * hx)).round() as usize).max(1))
        })
        .collect())
}

fn lateral(cfg: &ExperimentConfig) -> Res<Lateral> {
    match cfg.raw("grid", "lateral").unwrap_or("dirichlet") {
        "dirichlet" => Ok(Lateral::Dirichlet),
        "zero_flux" => Ok(Lateral::ZeroFlux),
        other => Err(CliError::Parse(format!(
            "grid.lateral: unknown value '{other}' (dirichlet, zero_flux)"
        ))),
    }
}

fn solved_field(
    cfg: &ExperimentConfig,
    params: ExponentParams,
    coeff: &Coefficient,
    dom: &SpaceTimeBox,
    (cells, steps): (usize, usize),
    amplitude: f64,
) -> Res<GridField> {
    let pb = Problem::new(params, coeff.clone(), *dom, cells, steps, data_fn(cfg, dom, amplitude)?)
        .with_lateral(lateral(cfg)?);
    Ok(solve(&pb)?)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn run_solve(cfg: &ExperimentConfig) -> Res<Outcome> {
    let params = cfg.params()?;
    let coeff = cfg.coefficient()?;
    let dom = domain(cfg)?;
    let meshes = meshes(cfg, &dom)?;
    let exact = cfg.raw("check", "exact").map(str::to_string);
    let decay = match exact.as_deref() {
        None => None,
        Some("heat_sine") => {
            if params.p != 2.0 || params.q != 2.0 || coeff.name() != "constant" || params.c_f != 0.0 {
                return Err(CliError::Parse(
                    "check.exact = heat_sine needs p = q = 2, a constant coefficient and c_f = 0".into(),
                ));
            }
            let len = dom.x_max - dom.x_min;
            Some((1.0 + coeff.eval_1d(0.0, 0.0)) * PI * PI / (len * len))
        }
        Some(other) => {
            return Err(CliError::Parse(format!(
                "check.exact: unknown solution '{other}' (heat_sine)"
            )))
        }
    };
    let amp = cfg.get_or("data", "amplitude", 1.0)?;
    let mut fields = Vec::new();
    for &mesh in &meshes {
        fields.push(solved_field(cfg, params, &coeff, &dom, mesh, 1.0)?);
    }
    let u = fields.last().expect("at least one mesh");
    let mut table = Table::new(&["t", "x", "u"]);
    for k in 0..u.nt() {
        for i in 0..u.nx() {
            table.push(vec![num(u.t(k)), num(u.x(i)), num(u.get(i, k))]);
        }
    }
    let mut checks = Vec::new();
    let mut notes = vec![format!("meshes (cells, steps): {meshes:?}")];
    if let Some(lambda) = decay {
        let (x0, len) = (dom.x_min, dom.x_max - dom.x_min);
        let errs: Vec<f64> = fields
            .iter()
            .map(|f| {
                let mut e: f64 = 0.0;
                for k in 0..f.nt() {
                    let d = amp * (-lambda * (f.t(k) - dom.t_start)).exp();
                    for i in 0..f.nx() {
                        e = e.max((f.get(i, k) - d * (PI * (f.x(i) - x0) / len).sin()).abs());
                    }
                }
                e
            })
            .collect();
        let hs: Vec<f64> = meshes.iter().map(|&(c, _)| len / c as f64).collect();
        notes.push(format!(
            "Linf errors: {}",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
        ));
        let tol: f64 = cfg.get_or("check", "linf_tol", 1e-3)?;
        let last = *errs.last().expect("nonempty");
        checks.push(Check::new(
            "linf_error",
            last <= tol,
            format!("{last:.3e} <= {tol:.1e} at {} cells", meshes.last().unwrap().0),
        ));
        if let Some(min_order) = cfg.raw("check", "min_order") {
            let min_order: f64 = min_order
                .parse()
                .map_err(|_| CliError::Parse("check.min_order: not a number".into()))?;
            let orders = observed_orders(&hs, &errs);
            let ok = !orders.is_empty() && orders.iter().all(|o| *o >= min_order);
            checks.push(Check::new(
                "observed_order",
                ok,
                format!("orders [{}] >= {min_order}", fmt_list(&orders)),
            ));
        }
    }
    Ok(Outcome {
        table,
        checks,
        plot: plot(2, 3, false),
        notes,
    })
}

/// Random problem `index` for a seed: exponents, coefficient, growth source
/// and three-mode data.
fn random_problem(seed: u64, index: u64, cells: usize, steps: usize, t_end: f64) -> Res<(Problem, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(index));
    let p = [1.5, 2.0, 3.0][rng.gen_range(0..3)];
    let q = p + [0.0, 0.5, 0.99][rng.gen_range(0..3)];
    let coeff = if rng.gen_bool(0.5) {
        builtin("smooth_bump", &[("amp", 0.0), ("rate", rng.gen_range(0.2..1.5))])?
    } else {
        Coefficient::constant(rng.gen_range(0.0..2.0))
    };
    let c_f = rng.gen_range(0.0..1.0);
    let beta1 = 1.0 + rng.gen_range(0.0..0.9) * (p - 1.0);
    let beta2 = 1.0 + rng.gen_range(0.0..0.9) * (q - 1.0);
    let params = ExponentParams::new(p, q, beta1, beta2, c_f)?;
    let amps: [f64; 3] = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.3..0.3),
    ];
    let (c0, tilt) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let w = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    let label = coeff.name().to_string();
    let data =
        move |x: f64, _t: f64| c0 + tilt * x + (1..=3).map(|k| amps[k - 1] * (k as f64 * PI * x).sin()).sum::<f64>();
    let pb = Problem::new(
        params,
        coeff,
        SpaceTimeBox::new(0.0, 1.0, 0.0, t_end)?,
        cells,
        steps,
        data,
    )
    .with_growth_rhs(w);
    Ok((pb, label))
}

fn run_compare(cfg: &ExperimentConfig) -> Res<Outcome> {
    let count: u64 = cfg.get("compare", "count")?;
    let eps: f64 = cfg.get_or("compare", "eps", 0.05)?;
    let t_end: f64 = cfg.get_or("compare", "t_end", 0.5)?;
    let cells: usize = cfg.get_or("grid", "cells", 32)?;
    let steps: usize = cfg.get_or("grid", "steps", 40)?;
    let tol: f64 = cfg.get_or("check", "tol", 1e-8)?;
    let seed = cfg.seed;
    // (index, p, q, coefficient, max(sub − super), check passed)
    type Row = (u64, f64, f64, String, f64, bool);
    let rows: Vec<Res<Row>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (pb, label) = random_problem(seed, i, cells, steps, t_end)?;
            let pair = make_sub_super_pair(&pb, eps)?;
            let gap = pair
                .sub
                .values()
                .iter()
                .zip(pair.sup.values())
                .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
            let rep = comparison_check(&pair.sub, &pair.sup, tol)?;
            Ok((i, pb.params.p, pb.params.q, label, gap, rep.pass))
        })
        .collect();
    let mut table = Table::new(&["problem", "p", "q", "coefficient", "max_sub_minus_super"]);
    let (mut worst, mut all) = (f64::NEG_INFINITY, true);
    for r in rows {
        let (i, p, q, label, gap, pass) = r?;
        worst = worst.max(gap);
        all &= pass && gap <= tol;
        table.push(vec![i.to_string(), num(p), num(q), label, num(gap)]);
    }
    Ok(Outcome {
        table,
        checks: vec![Check::new(
            "comparison",
            all,
            format!("{count} problems, max(sub - super) {worst:.3e} <= {tol:.1e}"),
        )],
        plot: plot(1, 5, false),
        notes: vec![format!(
            "seed {seed}, eps {eps}, {cells} cells x {steps} steps on [0,1]x[0,{t_end}]"
        )],
    })
}

fn barrier_rhs(params: ExponentParams, coeff: Coefficient) -> RhsFn {
    Arc::new(move |x: &[f64], t: f64, xi: &[f64]| {
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        params.c_f * (0.5 - 0.8 * r.powf(params.beta1) + 0.6 * coeff.eval(x, t) * r.powf(params.beta2))
    })
}

fn run_barrier(cfg: &ExperimentConfig) -> Res<Outcome> {
    let ps: Vec<f64> = cfg.list_or("barrier", "p_values", vec![])?;
    let dqs: Vec<f64> = cfg.list_or("barrier", "q_offsets", vec![])?;
    let gaps: Vec<f64> = cfg.list_or("barrier", "gaps", vec![0.1])?;
    let osc: f64 = cfg.get_or("barrier", "osc", 1.0)?;
    let lip: f64 = cfg.get_or("barrier", "lip", 1.0)?;
    let c_f: f64 = cfg.get_or("barrier", "c_f", 0.0)?;
    let m: usize = cfg.get_or("barrier", "samples_x", 20)?;
    let n_t: usize = cfg.get_or("barrier", "samples_t", 25)?;
    let min_abs_x: f64 = cfg.get_or("barrier", "min_abs_x", 0.0)?;
    let tol: f64 = cfg.get_or("check", "residual_tol", 1e-10)?;
    let coeff = cfg.coefficient()?;
    let rhs_on = c_f > 0.0;

    let mut table = Table::new(&["p", "q", "gap", "regime", "K", "theta", "c1", "residual_min", "samples"]);
    let mut checks = Vec::new();
    let (mut worst, mut all) = (f64::INFINITY, true);
    let mut scaling = Vec::new();
    for &p in &ps {
        for &dq in &dqs {
            let q = p + dq;
            let params = ExponentParams::new(p, q, 1.0 + 0.5 * (p - 1.0), 1.0 + 0.5 * (q - 1.0), c_f)
                .map_err(|e| CliError::Parse(e.to_string()))?;
            let regime = if p < 2.0 {
                BarrierRegime::Singular
            } else {
                BarrierRegime::Degenerate
            };
            let rhs = rhs_on.then(|| barrier_rhs(params, coeff.clone()));
            let mut found_k = Vec::new();
            for &gap in &gaps {
                let spec = barrier_make(regime, &params, -gap, 0.0, osc, lip, 0.0)?;
                let samples = barrier_samples(&spec, m, n_t, min_abs_x);
                let found = barrier_theta_search(&spec, &coeff, rhs.as_ref(), &samples)?;
                worst = worst.min(found.residual_min);
                all &= found.residual_min >= -tol;
                found_k.push((spec.k, found.theta, spec.beta));
                table.push(vec![
                    num(p),
                    num(q),
                    num(gap),
                    format!("{regime:?}").to_lowercase(),
                    num(spec.k),
                    num(found.theta),
                    num(found.c1),
                    num(found.residual_min),
                    samples.len().to_string(),
                ]);
            }
            scaling.push((p, q, found_k));
        }
    }
    checks.push(Check::new(
        "residual_certificate",
        all,
        format!("min residual {worst:.3e} >= -{tol:.1e}"),
    ));
    if let Some(factor) = cfg.raw("check", "scaling_factor") {
        let factor: f64 = factor
            .parse()
            .map_err(|_| CliError::Parse("check.scaling_factor: not a number".into()))?;
        if gaps.len() != 2 {
            return Err(CliError::Parse(
                "check.scaling_factor needs exactly two barrier.gaps".into(),
            ));
        }
        let mut parts = Vec::new();
        let mut ok = true;
        for (p, q, v) in &scaling {
            let (k1, th1, beta) = v[0];
            let (k2, th2, _) = v[1];
            let r = (th2 / th1) / (k2 / k1).powf(q / beta);
            ok &= r >= 1.0 / factor && r <= factor;
            parts.push(format!("(p={p},q={q}) {r:.3}"));
        }
        checks.push(Check::new(
            "theta_scaling",
            ok,
            format!("observed/predicted within x{factor}: {}", parts.join("; ")),
        ));
    }
    if cfg.get_or("check", "heat_case", false)? {
        let heat = ExponentParams::homogeneous(2.0, 2.0)?;
        let spec = barrier_make(BarrierRegime::Degenerate, &heat, -gaps[0], 0.0, osc, lip, 0.0)?;
        let samples = barrier_samples(&spec, m, n_t, min_abs_x);
        let found = barrier_theta_search(&spec, &Coefficient::constant(0.0), None, &samples)?;
        let exact = 2.0 * spec.k;
        let ok = found.theta >= exact && found.theta <= 2.0 * exact;
        checks.push(Check::new(
            "heat_theta",
            ok,
            format!("Theta/2KN = {:.6} in [1, 2]", found.theta / exact),
        ));
    }
    Ok(Outcome {
        table,
        checks,
        plot: plot(5, 6, true),
        notes: vec![format!(
            "osc {osc}, L {lip}, C_f {c_f}, {m} x-samples per side, {n_t} times, |x| >= {min_abs_x}"
        )],
    })
}

type FieldSetup = (Coefficient, SpaceTimeBox, Vec<(usize, usize)>, Vec<(f64, f64)>);

fn field_setup(cfg: &ExperimentConfig) -> Res<FieldSetup> {
    let dom = domain(cfg)?;
    Ok((cfg.coefficient()?, dom, meshes(cfg, &dom)?, cfg.pairs()?))
}

fn run_modulus(cfg: &ExperimentConfig) -> Res<Outcome> {
    let (coeff, dom, meshes, pairs) = field_setup(cfg)?;
    let inner: Vec<f64> = cfg.list_or("check", "inner", vec![-0.5, 0.5, -0.5, 0.0])?;
    if inner.len() != 4 {
        return Err(CliError::Parse(
            "check.inner must be x_min, x_max, t_start, t_end".into(),
        ));
    }
    let inner = SpaceTimeBox::new(inner[0], inner[1], inner[2], inner[3])?;
    let margin: f64 = cfg.get_or("check", "alpha_margin", 0.05)?;
    let mesh = *meshes.last().expect("nonempty");
    let mut table = Table::new(&["p", "q", "lip_space", "time_alpha", "target", "fit_r2"]);
    let mut checks = Vec::new();
    for (p, q) in pairs {
        let params = cfg.params_for(p, q)?;
        let u = solved_field(cfg, params, &coeff, &dom, mesh, 1.0)?;
        let rep = modulus_estimate(&u, &inner)?;
        let target = time_exponent_target(p, q);
        table.push(vec![
            num(p),
            num(q),
            num(rep.lip_space_est),
            num(rep.time_alpha_est),
            num(target),
            num(rep.fit_r2),
        ]);
        checks.push(Check::new(
            format!("time_alpha p={p} q={q}"),
            rep.alpha_defined && rep.time_alpha_est >= target - margin,
            format!("{:.4} >= {:.4}", rep.time_alpha_est, target - margin),
        ));
    }
    Ok(Outcome {
        table,
        checks,
        plot: plot(1, 4, false),
        notes: vec![format!("mesh {mesh:?}")],
    })
}

fn run_steklov(cfg: &ExperimentConfig) -> Res<Outcome> {
    let params = cfg.params()?;
    let coeff = cfg.coefficient()?;
    let tol: f64 = cfg.get_or("check", "tol", 1e-6)?;
    let nx: usize = cfg.get_or("steklov", "nx", 64)?;
    let nt: usize = cfg.get_or("steklov", "nt", 4096)?;
    let hs: Vec<f64> = cfg.list_or("steklov", "h_values", (2..=10).map(|k| 2f64.powi(-k)).collect())?;
    let mollify_nx: usize = cfg.get_or("steklov", "mollify_nx", 4096)?;
    let deltas: Vec<f64> = cfg.list_or("steklov", "deltas", (2..=7).map(|k| 0.3 * 2f64.powi(-k)).collect())?;
    let dom = SpaceTimeBox::new(-1.0, 1.0, 0.0, 1.0)?;
    let smooth = GridField::from_fn(&dom, nx, nt, |x, t| (PI * x).sin() * (-t).exp() + 0.2 * x * t * t)?;
    let st = steklov_wh_convergence(&smooth, &coeff, &params, &hs, tol)?;
    let bump = GridField::from_fn(&dom, mollify_nx, 2, |x, t| {
        let s = x / 0.6;
        if s.abs() < 1.0 {
            (1.0 + t) * (-1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    })?;
    let mo = mollify_wh_convergence(&bump, &coeff, &params, &deltas, tol)?;
    let mut table = Table::new(&["transform", "h", "p_term", "a_term", "total"]);
    let mut checks = Vec::new();
    for (name, rep) in [("steklov", &st), ("mollifier", &mo)] {
        for r in &rep.rows {
            table.push(vec![
                name.into(),
                num(r.h),
                num(r.p_term),
                num(r.a_term),
                num(r.total()),
            ]);
        }
        let last = rep.rows.last().map_or(f64::NAN, |r| r.total());
        checks.push(Check::new(
            format!("{name}_convergence"),
            rep.pass,
            format!(
                "finest {last:.3e} < {tol:.1e}: {}, monotone (5% tail noise): {}, rate {:.2}",
                rep.below_tol,
                rep.monotone,
                rep.rate.unwrap_or(f64::NAN)
            ),
        ));
    }
    Ok(Outcome {
        table,
        checks,
        plot: plot(2, 5, true),
        notes: vec!["smooth field sin(pi x) exp(-t) + 0.2 x t^2; bump field (1+t) exp(-1/(1-(x/0.6)^2))".into()],
    })
}

fn run_infconv(cfg: &ExperimentConfig) -> Res<Outcome> {
    let params = cfg.params()?;
    let coeff = cfg.coefficient()?;
    let eps: f64 = cfg.get_or("infconv", "eps", 0.2)?;
    let ell: f64 = cfg.get_or("infconv", "ell", 4.0)?;
    let nx: usize = cfg.get_or("infconv", "nx", 100)?;
    let nt: usize = cfg.get_or("infconv", "nt", 50)?;
    let analytic_nx: usize = cfg.get_or("infconv", "analytic_nx", 2000)?;
    let margin_tol: f64 = cfg.get_or("check", "semiconcavity_tol", 1e-9)?;
    let dom = SpaceTimeBox::new(-1.0, 1.0, 0.0, 1.0)?;
    let u = GridField::from_fn(&dom, nx, nt, |x, t| (x - 0.2).abs() + 0.5 * (2.0 * t).sin())?;
    let icp = InfConvParams::new(&coeff, &params, eps, ell, u.osc())?;
    let shift_bound = coeff.omega_time.inverse(eps.powf(params.q * (ell - 1.0)))?;
    let res = inf_convolution(&u, &icp);

    let mut table = Table::new(&["t", "x", "u", "u_eps", "x_eps", "t_eps"]);
    let (mut below, mut dx_max, mut dt_max) = (true, 0.0_f64, 0.0_f64);
    for k in 0..u.nt() {
        for i in 0..u.nx() {
            let (xe, te) = res.argmin_point(i, k);
            let (v, ve) = (u.get(i, k), res.value.get(i, k));
            below &= ve <= v;
            dx_max = dx_max.max((u.x(i) - xe).abs());
            dt_max = dt_max.max((u.t(k) - te).abs());
            table.push(vec![num(u.t(k)), num(u.x(i)), num(v), num(ve), num(xe), num(te)]);
        }
    }
    let margin = semiconcavity_margin(&res.value, &icp);
    let cut = inf_convolution_with_cutoff(&u, &icp, Some(2.0 * icp.r_eps));

    let line = SpaceTimeBox::new(-1.0, 1.0, 0.0, 0.1)?;
    let lin = GridField::from_fn(&line, analytic_nx, 1, |x, _| x)?;
    let icp_lin = InfConvParams::with_delta(params.p, eps, ell, 1.0, lin.osc())?;
    let r_lin = inf_convolution(&lin, &icp_lin);
    let i0 = lin
        .x_index(0.0)
        .ok_or_else(|| CliError::Parse("infconv.analytic_nx must be even".into()))?;
    let analytic_err = (r_lin.value.get(i0, 0) + 0.75 * eps).abs();

    let checks = vec![
        Check::new("below_field", below, "u_eps <= u at every node"),
        Check::new(
            "argmin_radius",
            dx_max <= icp.r_eps && dt_max <= icp.r_eps,
            format!("|x - x_eps| {dx_max:.4}, |t - t_eps| {dt_max:.4} <= r {:.4}", icp.r_eps),
        ),
        Check::new(
            "time_shift",
            dt_max <= shift_bound,
            format!("|t - t_eps| {dt_max:.4} <= {shift_bound:.4}"),
        ),
        Check::new(
            "semiconcavity",
            margin <= margin_tol,
            format!("margin {margin:.3e} <= {margin_tol:.1e}"),
        ),
        Check::new(
            "linear_closed_form",
            analytic_err <= 2.0 * lin.hx(),
            format!("|u_eps(0) + 3 eps/4| = {analytic_err:.3e} <= 2 h_x"),
        ),
        Check::new(
            "cutoff_invariance",
            cut.value == res.value,
            "search window 2r gives identical values",
        ),
    ];
    Ok(Outcome {
        table,
        checks,
        plot: plot(2, 4, false),
        notes: vec![format!(
            "eps {eps}, ell {ell}, delta_eps {:.4e}, r {:.4}",
            icp.delta_eps, icp.r_eps
        )],
    })
}

fn run_caccioppoli(cfg: &ExperimentConfig) -> Res<Outcome> {
    let (coeff, dom, meshes, pairs) = field_setup(cfg)?;
    let cutoff = Cutoff::Tensor {
        xc: cfg.get_or("caccioppoli", "xc", 0.0)?,
        rx: cfg.get_or("caccioppoli", "rx", 0.6)?,
        tc: cfg.get_or("caccioppoli", "tc", -0.5)?,
        rt: cfg.get_or("caccioppoli", "rt", 0.4)?,
    };
    let cap: f64 = cfg.get_or("caccioppoli", "cap", 100.0)?;
    let stability: f64 = cfg.get_or("check", "stability", 0.2)?;
    let mut table = Table::new(&["p", "q", "cells", "lhs", "rhs", "ratio"]);
    let mut checks = Vec::new();
    for (p, q) in pairs {
        let params = cfg.params_for(p, q)?;
        let mut ratios = Vec::new();
        for &mesh in &meshes {
            let u = solved_field(cfg, params, &coeff, &dom, mesh, 1.0)?;
            let rep = caccioppoli_check(&u, &cutoff, &coeff, &params, u.sup_abs(), cap)?;
            table.push(vec![
                num(p),
                num(q),
                mesh.0.to_string(),
                num(rep.lhs),
                num(rep.rhs),
                num(rep.ratio),
            ]);
            checks.push(Check::new(
                format!("ratio p={p} q={q} cells={}", mesh.0),
                rep.pass && rep.ratio.is_finite(),
                format!("{:.4e} <= cap {cap}", rep.ratio),
            ));
            ratios.push(rep.ratio);
        }
        if ratios.len() >= 2 {
            let worst = ratios.windows(2).map(|w| (w[1] / w[0] - 1.0).abs()).fold(0.0, f64::max);
            checks.push(Check::new(
                format!("stability p={p} q={q}"),
                worst <= stability,
                format!(
                    "largest relative change {:.2}% <= {:.0}%",
                    100.0 * worst,
                    100.0 * stability
                ),
            ));
        }
    }
    Ok(Outcome {
        table,
        checks,
        plot: plot(3, 6, false),
        notes: vec![format!("cutoff {cutoff:?}, meshes {meshes:?}")],
    })
}

fn run_counterexample(cfg: &ExperimentConfig) -> Res<Outcome> {
    let p: f64 = cfg.get("params", "p")?;
    let q: f64 = cfg.get("params", "q")?;
    let eps: f64 = cfg.get_or("counterexample", "eps", 0.1)?;
    let h: f64 = cfg.get_or("counterexample", "h", 0.1)?;
    let grids: Vec<usize> = cfg.list_or("counterexample", "grids", (10..=14).map(|k| 1usize << k).collect())?;
    let rep = counterexample_divergence(p, q, eps, h, &grids)?;
    let mut table = Table::new(&["n", "I_n", "P_n", "local_slope"]);
    for (j, &(n, i_n, p_n)) in rep.rows.iter().enumerate() {
        let local = if j == 0 {
            f64::NAN
        } else {
            let (n0, i0, _) = rep.rows[j - 1];
            fit_loglog(&[n0 as f64, n as f64], &[i0, i_n]).map_or(f64::NAN, |f| f.slope)
        };
        table.push(vec![n.to_string(), num(i_n), num(p_n), num(local)]);
    }
    Ok(Outcome {
        table,
        checks: vec![
            Check::new(
                "slope",
                rep.slope_ok,
                format!(
                    "{:.4} within 10% of q/p - eps - 1 = {:.4}",
                    rep.slope, rep.reference_slope
                ),
            ),
            Check::new(
                "p_integral",
                rep.p_bounded,
                format!("relative change {:.2}% < 5%", 100.0 * rep.p_rel_change),
            ),
        ],
        plot: plot(1, 2, true),
        notes: vec![format!("u = |x|^{:.4} max(t,0), a = max(-t,0), h = {h}", rep.exponent)],
    })
}

fn parse_anchors(cfg: &ExperimentConfig) -> Res<Vec<Anchor>> {
    let raw = cfg
        .raw("psi", "anchors")
        .unwrap_or("0:0:0, 0.25:-0.25:-0.25, -0.5:0.5:-0.5");
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v: Vec<f64> = s
                .split(':')
                .map(|c| {
                    c.trim()
                        .parse()
                        .map_err(|_| CliError::Parse(format!("psi.anchors: bad entry '{s}'")))
                })
                .collect::<Res<_>>()?;
            match v[..] {
                [x0, y0, t0] => Ok((x0, y0, t0)),
                _ => Err(CliError::Parse(format!("psi.anchors: '{s}' is not x0:y0:t0"))),
            }
        })
        .collect()
}

fn run_psi_scan(cfg: &ExperimentConfig) -> Res<Outcome> {
    let (coeff, dom, meshes, pairs) = field_setup(cfg)?;
    let anchors = parse_anchors(cfg)?;
    let profile = match cfg.raw("psi", "profile").unwrap_or("lipschitz") {
        "lipschitz" => PhiProfile::lipschitz(cfg.get_or("psi", "beta", 1.25)?)?,
        "holder" => PhiProfile::holder(cfg.get_or("psi", "alpha", 0.5)?)?,
        other => {
            return Err(CliError::Parse(format!(
                "psi.profile: unknown profile '{other}' (lipschitz, holder)"
            )))
        }
    };
    let amps: Vec<f64> = cfg.list_or("psi", "amplitudes", vec![1.0, 2.0])?;
    let mesh = *meshes.last().expect("nonempty");
    let mut table = Table::new(&["p", "q", "amplitude", "l_star", "scan_at_2l_star"]);
    let mut checks = Vec::new();
    for (p, q) in pairs {
        let base = solved_field(cfg, cfg.params_for(p, q)?, &coeff, &dom, mesh, 1.0)?;
        let mut stars = Vec::new();
        for &amp in &amps {
            let u = base.map(|v| amp * v);
            let th = psi_threshold_search(&u, &profile, &anchors)?;
            let at2 = psi_max_scan(&u, 2.0 * th.l_star, &profile, &anchors)?;
            table.push(vec![num(p), num(q), num(amp), num(th.l_star), num(at2.max_value)]);
            checks.push(Check::new(
                format!("nonpositive p={p} q={q} amp={amp}"),
                th.l_star.is_finite() && at2.max_value <= 0.0,
                format!("L* {:.4e}, max Psi at 2L* {:.3e}", th.l_star, at2.max_value),
            ));
            stars.push(th.l_star);
        }
        checks.push(Check::new(
            format!("amplitude_monotone p={p} q={q}"),
            stars.windows(2).all(|w| w[1] >= w[0]),
            format!("L* [{}] for amplitudes [{}]", fmt_list(&stars), fmt_list(&amps)),
        ));
    }
    Ok(Outcome {
        table,
        checks,
        plot: plot(3, 4, false),
        notes: vec![format!("profile {profile:?}, anchors {anchors:?}, mesh {mesh:?}")],
    })
}

fn random_vec(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
    [
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
    ]
}

/// Violations and the largest relative excess over `chunks` seeded streams.
fn sweep(seed: u64, n: usize, check: impl Fn(&mut ChaCha8Rng) -> f64 + Sync) -> (usize, f64) {
    const CHUNKS: u64 = 64;
    (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(CHUNKS).wrapping_add(c));
            let len = n / CHUNKS as usize + usize::from((c as usize) < n % CHUNKS as usize);
            (0..len).fold((0usize, f64::NEG_INFINITY), |(v, w), _| {
                let excess = check(&mut rng);
                (v + usize::from(excess > 0.0), w.max(excess))
            })
        })
        .reduce(|| (0, f64::NEG_INFINITY), |a, b| (a.0 + b.0, a.1.max(b.1)))
}

fn run_vector_ineq(cfg: &ExperimentConfig) -> Res<Outcome> {
    let n: usize = cfg.get("vector_ineq", "samples")?;
    let slack: f64 = cfg.get_or("vector_ineq", "slack", 1e-12)?;
    let seed = cfg.seed;
    // excess over the relative slack; positive means a violation
    let singular = sweep(3 * seed + 1, n, |rng| {
        let r = rng.gen_range(1.0001..1.9999);
        let (a, b) = (random_vec(rng), random_vec(rng));
        (singular_lower_bound(&a, &b, r) - monotonicity_pairing(&a, &b, r)) / pairing_scale(&a, &b, r) - slack
    });
    let degenerate = sweep(3 * seed + 2, n, |rng| {
        let r = rng.gen_range(2.0..6.0);
        let (a, b) = (random_vec(rng), random_vec(rng));
        (degenerate_lower_bound(&a, &b, r) - monotonicity_pairing(&a, &b, r)) / pairing_scale(&a, &b, r) - slack
    });
    let continuity = sweep(3 * seed + 3, n, |rng| {
        let r = rng.gen_range(1.0001..1.9999);
        let (a, b) = (random_vec(rng), random_vec(rng));
        let bound = singular_continuity_bound(&a, &b, r);
        if bound > 0.0 {
            power_map_difference(&a, &b, r) / bound - 1.0 - slack
        } else {
            power_map_difference(&a, &b, r) - slack
        }
    });
    let mut table = Table::new(&["inequality", "samples", "violations", "max_relative_excess"]);
    let mut checks = Vec::new();
    for (name, (v, w)) in [
        ("singular_monotonicity", singular),
        ("degenerate_monotonicity", degenerate),
        ("singular_continuity", continuity),
    ] {
        table.push(vec![name.into(), n.to_string(), v.to_string(), num(w + slack)]);
        checks.push(Check::new(
            name,
            v == 0,
            format!("{v} violations of {n}, worst relative excess {:.3e}", w + slack),
        ));
    }
    Ok(Outcome {
        table,
        checks,
        plot: plot(2, 3, false),
        notes: vec![format!("seed {seed}, relative slack {slack:e}")],
    })
}

fn run_class_s(cfg: &ExperimentConfig) -> Res<Outcome> {
    let (coeff, dom, meshes, pairs) = field_setup(cfg)?;
    let c_tol: f64 = cfg.get_or("check", "tol_constant", 10.0)?;
    let t_from: f64 = cfg.get_or("check", "t_from", dom.t_start)?;
    let mut table = Table::new(&["p", "q", "cells", "tested", "skipped", "worst_margin", "c_needed"]);
    let mut checks = Vec::new();
    for (p, q) in pairs {
        let params = cfg.params_for(p, q)?;
        let mut cs = Vec::new();
        for &mesh in &meshes {
            let full = solved_field(cfg, params, &coeff, &dom, mesh, 1.0)?;
            let k0 = full
                .t_index(t_from)
                .ok_or_else(|| CliError::Parse(format!("check.t_from = {t_from} is not a time node")))?;
            let u = full.restrict(0, full.nx() - 1, k0, full.nt() - 1)?;
            let tol = c_tol * (u.hx() + u.ht()) * u.osc();
            let rep = class_s_check(&u, &params, &coeff, default_eta_min(&u), tol);
            let c = rep.meta("c_needed").unwrap_or(f64::NAN);
            table.push(vec![
                num(p),
                num(q),
                mesh.0.to_string(),
                rep.meta("tested").unwrap_or(0.0).to_string(),
                rep.meta("skipped").unwrap_or(0.0).to_string(),
                num(rep.worst_value),
                num(c),
            ]);
            checks.push(Check::new(
                format!("class_s p={p} q={q} cells={}", mesh.0),
                rep.pass,
                format!("worst margin {:.3e}, needs c = {c:.3} <= {c_tol}", rep.worst_value),
            ));
            cs.push(c);
        }
        checks.push(Check::new(
            format!("mesh_independent p={p} q={q}"),
            cs.iter().all(|c| *c <= c_tol),
            format!("c needed [{}] all <= {c_tol}", fmt_list(&cs)),
        ));
    }
    Ok(Outcome {
        table,
        checks,
        plot: plot(3, 7, false),
        notes: vec![format!("fields restricted to t >= {t_from}; meshes {meshes:?}")],
    })
}
