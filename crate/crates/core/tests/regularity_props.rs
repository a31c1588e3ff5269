use std::f64::consts::PI;
use std::sync::Arc;

use dplab_core::coefficient::builtin;
use dplab_core::field::{GridField, SpaceTimeBox};
use dplab_core::regularity::*;
use dplab_core::solver::{solve, Problem, RhsFn};
use dplab_core::{Coefficient, ExponentParams};

fn q1_field(p: f64, q: f64, cells: usize, steps: usize) -> GridField {
    let coeff = builtin("smooth_bump", &[("amp", 1.0), ("width", 0.5)]).unwrap();
    let pb = Problem::new(
        ExponentParams::homogeneous(p, q).unwrap(),
        coeff,
        SpaceTimeBox::new(-1.0, 1.0, -1.0, 0.0).unwrap(),
        cells,
        steps,
        |x, _| (0.5 * PI * x).cos() + 0.3 * (PI * x).sin(),
    );
    solve(&pb).unwrap()
}

const ANCHORS: [Anchor; 2] = [(0.0, 0.0, 0.0), (0.25, -0.25, -0.25)];

#[test]
fn psi_threshold_gives_nonpositive_scan_on_degenerate_field() {
    let u = q1_field(3.0, 3.5, 48, 48);
    let profile = PhiProfile::holder(0.5).unwrap();
    let th = psi_threshold_search(&u, &profile, &ANCHORS).unwrap();
    let scan = psi_max_scan(&u, th.l_star, &profile, &ANCHORS).unwrap();
    assert!(scan.max_value <= 1e-10, "{}", scan.max_value);
    assert!(th.l_below <= th.l_star);
}

#[test]
fn derivative_bound_holds_at_positive_maxima() {
    let u = q1_field(2.0, 2.5, 48, 48);
    let profile = PhiProfile::lipschitz(1.25).unwrap();
    let th = psi_threshold_search(&u, &profile, &ANCHORS).unwrap();
    let mut checked = 0;
    for frac in [0.1, 0.3, 0.6, 0.9] {
        let l = frac * th.l_star;
        let scan = psi_max_scan(&u, l, &profile, &ANCHORS).unwrap();
        if scan.max_value > 0.0 {
            if let Some((d1, bound)) = derivative_bound_at_argmax(&u, &scan, l, &profile) {
                assert!(d1 <= bound * (1.0 + 1e-12), "L={l}: {d1} > {bound}");
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn psi_threshold_grows_with_oscillation() {
    let u = q1_field(1.5, 2.0, 48, 48);
    let profile = PhiProfile::holder(0.6).unwrap();
    let stars: Vec<f64> = [0.5, 1.0, 3.0]
        .iter()
        .map(|&s| {
            psi_threshold_search(&u.map(|v| s * v), &profile, &ANCHORS)
                .unwrap()
                .l_star
        })
        .collect();
    assert!(stars.windows(2).all(|w| w[1] >= w[0]), "{stars:?}");
}

#[test]
fn barrier_dominates_solved_field() {
    for (p, q, regime) in [
        (3.0, 3.5, BarrierRegime::Degenerate),
        (1.5, 2.0, BarrierRegime::Singular),
    ] {
        let params = ExponentParams::homogeneous(p, q).unwrap();
        let coeff = builtin("smooth_bump", &[("amp", 1.0), ("width", 0.5)]).unwrap();
        let u = q1_field(p, q, 64, 128);
        let (t0, s0) = (-0.5, -0.4);
        let k0 = u.t_index(t0).unwrap();
        let anchor = u.get(u.x_index(0.0).unwrap(), k0);
        let lip = dplab_core::verify::gradient_sup(&u);
        let spec = barrier_make(regime, &params, t0, s0, u.osc(), lip, anchor).unwrap();
        let samples = barrier_samples(&spec, 50, 20, u.hx());
        let found = barrier_theta_search(&spec, &coeff, None, &samples).unwrap();
        let spec = BarrierSpec {
            theta: found.theta,
            ..spec
        };
        let excess = barrier_excess(&u, &spec);
        assert!(
            excess.is_finite() && excess <= 0.0,
            "p={p}: u exceeds the barrier by {excess}"
        );
    }
}

#[test]
fn theta_nondecreasing_in_source_strength() {
    let coeff = Coefficient::constant(1.0);
    let mut thetas = Vec::new();
    for c_f in [0.0, 1.0, 3.0] {
        let params = ExponentParams::new(3.0, 3.5, 2.0, 2.5, c_f).unwrap();
        let spec = barrier_make(BarrierRegime::Degenerate, &params, -0.2, 0.0, 1.0, 1.0, 0.0).unwrap();
        let rhs: RhsFn = Arc::new(move |_x: &[f64], _t: f64, xi: &[f64]| {
            let r = xi[0].abs();
            c_f * (1.0 + r.powf(2.0) + r.powf(2.5))
        });
        let samples = barrier_samples(&spec, 40, 10, 0.01);
        thetas.push(barrier_theta_search(&spec, &coeff, Some(&rhs), &samples).unwrap().theta);
    }
    assert!(thetas.windows(2).all(|w| w[1] >= w[0]), "{thetas:?}");
}

#[test]
fn barrier_constants_follow_their_exponents() {
    let params = ExponentParams::homogeneous(1.5, 2.0).unwrap();
    let a = |gap: f64| barrier_make(BarrierRegime::Singular, &params, -gap, 0.0, 1.0, 1.0, 0.0).unwrap();
    let (s1, s2) = (a(0.1), a(0.05));
    let ratio = 0.5f64;
    assert!((s2.a_const / s1.a_const - ratio.powf(1.5 / 3.5)).abs() < 1e-12);
    assert!((s2.k / s1.k - ratio.powf(1.5 / 3.5 * (1.0 - 3.0))).abs() < 1e-12);
    let params = ExponentParams::homogeneous(2.5, 3.0).unwrap();
    let d = |gap: f64| barrier_make(BarrierRegime::Degenerate, &params, -gap, 0.0, 1.0, 1.0, 0.0).unwrap();
    let (d1, d2) = (d(0.1), d(0.05));
    assert!((d2.a_const / d1.a_const - ratio.sqrt()).abs() < 1e-12);
    assert!((d2.k / d1.k - ratio.powf(-0.5)).abs() < 1e-12);
}

#[test]
fn modulus_recovers_square_root_in_time() {
    let dom = SpaceTimeBox::new(-1.0, 1.0, -1.0, 0.0).unwrap();
    let u = GridField::from_fn(&dom, 64, 1024, |x, t| t.abs().sqrt() * (1.0 + 0.5 * x * x)).unwrap();
    let inner = SpaceTimeBox::new(-0.5, 0.5, -0.5, 0.0).unwrap();
    let rep = modulus_estimate(&u, &inner).unwrap();
    assert!((rep.time_alpha_est - 0.5).abs() < 0.03, "{}", rep.time_alpha_est);
    assert!((0.0..=1.0).contains(&rep.fit_r2));
}

#[test]
fn heat_solution_is_at_least_half_holder() {
    let u = q1_field(2.0, 2.0, 64, 256);
    let inner = SpaceTimeBox::new(-0.5, 0.5, -0.5, 0.0).unwrap();
    let rep = modulus_estimate(&u, &inner).unwrap();
    assert!(rep.time_alpha_est >= 0.45, "{}", rep.time_alpha_est);
}
