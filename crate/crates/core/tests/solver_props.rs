use std::f64::consts::PI;

use dplab_core::coefficient::builtin;
use dplab_core::field::{GridField, SpaceTimeBox};
use dplab_core::solver::{discrete_mass, make_sub_super_pair, residual_weak, solve, Lateral, Problem};
use dplab_core::verify::comparison_check;
use dplab_core::{Coefficient, ExponentParams};
use proptest::prelude::*;

fn unit() -> SpaceTimeBox {
    SpaceTimeBox::new(0.0, 1.0, 0.0, 0.2).unwrap()
}

fn bump_problem(p: f64, q: f64, cells: usize, steps: usize) -> Problem {
    let coeff = builtin("smooth_bump", &[("amp", 1.0), ("width", 0.3)]).unwrap();
    Problem::new(
        ExponentParams::homogeneous(p, q).unwrap(),
        coeff,
        unit(),
        cells,
        steps,
        |x, _| (PI * x).sin() + 0.4 * (2.0 * PI * x).sin(),
    )
}

fn sup_diff(a: &GridField, b: &GridField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn regularization_delta_has_vanishing_effect() {
    for (p, q) in [(1.5, 2.0), (3.0, 3.5)] {
        let base = bump_problem(p, q, 64, 80);
        let fine = solve(&base.clone().with_reg_delta(1e-12)).unwrap();
        let mut last = f64::INFINITY;
        for delta in [1e-4, 1e-6, 1e-8] {
            let d = sup_diff(&solve(&base.clone().with_reg_delta(delta)).unwrap(), &fine);
            assert!(d <= last + 1e-12, "p={p}: {d} after {last}");
            last = d;
        }
        assert!(last < 1e-5, "p={p}: {last}");
    }
}

#[test]
fn degenerate_problem_self_converges() {
    // errors against the finest mesh, sampled on the coarse lattice
    let reference = solve(&bump_problem(3.0, 3.5, 256, 1024)).unwrap();
    let mut errs = Vec::new();
    for cells in [32usize, 64] {
        let u = solve(&bump_problem(3.0, 3.5, cells, cells * cells / 64)).unwrap();
        let (sx, st) = (256 / cells, 1024 / u.nt().saturating_sub(1));
        let mut e: f64 = 0.0;
        for k in 0..u.nt() {
            for i in 0..u.nx() {
                e = e.max((u.get(i, k) - reference.get(i * sx, k * st)).abs());
            }
        }
        errs.push(e);
    }
    assert!(errs[1] < errs[0] * 0.6, "{errs:?}");
}

#[test]
fn solved_fields_are_weak_solutions() {
    let pb = bump_problem(2.0, 2.5, 64, 128);
    let u = solve(&pb).unwrap();
    let phi = GridField::from_fn(&u.domain(), u.nx() - 1, u.nt() - 1, |x, t| {
        (PI * x).sin().powi(2) * (5.0 * PI * t).sin().powi(2)
    })
    .unwrap();
    let r = residual_weak(&u, &pb, &phi).unwrap();
    assert!(r.abs() < 5e-3, "{r}");
}

#[test]
fn zero_flux_conserves_mass_for_double_phase() {
    let pb = bump_problem(1.5, 2.4, 48, 60).with_lateral(Lateral::ZeroFlux);
    let u = solve(&pb).unwrap();
    let m0 = discrete_mass(u.slice(0), u.hx());
    for k in 1..u.nt() {
        let m = discrete_mass(u.slice(k), u.hx());
        assert!((m - m0).abs() < 1e-9, "step {k}: {m} vs {m0}");
    }
}

#[test]
fn maximum_principle_without_source() {
    let u = solve(&bump_problem(2.0, 3.0, 64, 64)).unwrap();
    let init = u.slice(0);
    let (lo, hi) = init.iter().fold((0.0_f64, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(u.max() <= hi + 1e-9 && u.min() >= lo - 1e-9);
}

#[test]
fn sub_super_pair_closed_form_offset() {
    let pb = bump_problem(1.5, 2.3, 32, 40).with_growth_rhs([0.3, -0.2, 0.1]);
    let eps = 0.05;
    let pair = make_sub_super_pair(&pb, eps).unwrap();
    let t_end = 0.2;
    for i in 0..pair.sub.nx() {
        let spread =
            (pair.sup.get(i, 0) - pair.upper_base.get(i, 0)) - (pair.sub.get(i, 0) - pair.lower_base.get(i, 0));
        assert!((spread - 2.0 * eps / t_end).abs() < 1e-12);
    }
    let rep = comparison_check(&pair.sub, &pair.sup, 1e-8).unwrap();
    assert!(rep.pass);
}

#[test]
fn comparison_is_reflexive_and_swap_flips() {
    let u = solve(&bump_problem(2.0, 2.5, 32, 32)).unwrap();
    assert!(comparison_check(&u, &u, 0.0).unwrap().pass);
    let bumped = GridField::from_fn(&u.domain(), u.nx() - 1, u.nt() - 1, |x, t| 0.1 * (PI * x).sin() * t).unwrap();
    let v = u.zip_with(&bumped, |a, b| a + b).unwrap();
    assert!(comparison_check(&u, &v, 1e-12).unwrap().pass);
    assert!(!comparison_check(&v, &u, 1e-12).unwrap().pass);
}

#[test]
fn translation_invariance_without_source() {
    let pb = bump_problem(3.0, 3.5, 32, 32);
    let u = solve(&pb).unwrap();
    let mut shifted = pb.clone();
    shifted.data = std::sync::Arc::new(|x, _| (PI * x).sin() + 0.4 * (2.0 * PI * x).sin() + 1.0);
    let v = solve(&shifted).unwrap();
    assert!(sup_diff(&u.map(|s| s + 1.0), &v) < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ordered_data_give_ordered_solutions(
        p in 1.4f64..3.0,
        dq in 0.0f64..0.99,
        lift in 0.01f64..0.5,
        amp in 0.1f64..1.5,
    ) {
        let params = ExponentParams::homogeneous(p, p + dq).unwrap();
        let coeff = Coefficient::constant(1.0);
        let low = Problem::new(params, coeff.clone(), unit(), 24, 24, move |x, _| amp * (PI * x).sin());
        let high = Problem::new(params, coeff, unit(), 24, 24, move |x, _| amp * (PI * x).sin() + lift);
        let (u, v) = (solve(&low).unwrap(), solve(&high).unwrap());
        let rep = comparison_check(&u, &v, 1e-9).unwrap();
        prop_assert!(rep.pass, "worst {}", rep.worst_value);
    }
}
