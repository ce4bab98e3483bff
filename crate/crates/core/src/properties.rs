//! Randomized invariants across modules.

use std::f64::consts::PI;

use proptest::prelude::*;

use crate::convex::Membership;
use crate::currents::{central_difference_jacobian, weak_current_check, AnalyticField, RegionBox};
use crate::dynamics::{integrate_zne, reversibility_error};
use crate::plane::perp;
use crate::solvers::{
    affine_elliptic_example, bundled, constant_current_route, shoot, Drift, Locus, Scenario, Target,
};
use crate::{ControlSet, CurrentField, Mat2, Vec2};

fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(a, b)| Vec2::new(a, b))
}

fn costate() -> impl Strategy<Value = Vec2> {
    (-PI..PI, -2.0..2.0f64).prop_map(|(phi, e)| Vec2::from_angle(phi) * 10f64.powf(e))
}

fn control_set() -> impl Strategy<Value = ControlSet> {
    prop_oneof![
        (0.2..3.0f64).prop_map(|r| ControlSet::disk(r).unwrap()),
        (0.2..3.0f64, 0.2..3.0f64).prop_map(|(a, b)| ControlSet::ellipse(a, b).unwrap()),
        (0.5..2.0f64, 0.0..0.45f64).prop_map(|(v, e)| ControlSet::egg(v, e).unwrap()),
    ]
}

fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
    (a.x1 - b.x1).abs() <= tol && (a.x2 - b.x2).abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn perp_identities_p1_to_p3(a in vec2(10.0), b in vec2(10.0), c in vec2(10.0)) {
        prop_assert_eq!(perp(perp(a)), -a);
        prop_assert!((perp(a).dot(b) + a.dot(perp(b))).abs() <= 1e-12 * a.norm() * b.norm());
        let lhs = c * a.dot(b) - b * a.dot(c);
        prop_assert!(close(lhs, perp(a) * c.dot(perp(b)), 1e-12 * a.norm() * b.norm() * c.norm()));
    }

    #[test]
    fn support_is_sublinear(set in control_set(), p in costate(), q in costate(), lam in 1e-3..1e3f64) {
        let scale = set.support(p).abs().max(p.norm());
        prop_assert!((set.support(p * lam) - lam * set.support(p)).abs() <= 1e-12 * lam * scale);
        prop_assert!(set.support(p + q) <= set.support(p) + set.support(q) + 1e-12 * (scale + q.norm()));
        let v = set.maximizer(p).unwrap();
        prop_assert_eq!(set.contains(v, 1e-8), Membership::Boundary);
        prop_assert!(set.maximizer(p * lam).unwrap().distance(v) <= 1e-12 * (1.0 + v.norm()));
    }

    #[test]
    fn shifted_gauge_hits_the_shifted_boundary(set in control_set(), phi in -PI..PI, frac in 0.0..0.9f64, psi in -PI..PI) {
        // keep the origin strictly inside the shifted set
        let inner = (0..64)
            .map(|k| set.gauge_along(Vec2::from_angle(k as f64 * PI / 32.0)).unwrap())
            .fold(f64::INFINITY, f64::min);
        let s = Vec2::from_angle(psi) * (frac * inner);
        let shifted = set.clone().shifted(s);
        let d = Vec2::from_angle(phi);
        let lambda = shifted.gauge_along(d).unwrap();
        prop_assert!(lambda > 0.0);
        prop_assert_eq!(set.contains(d * lambda - s, 1e-8), Membership::Boundary);
    }

    #[test]
    fn affine_jacobian_is_position_independent(m in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), b in vec2(1.0), x in vec2(50.0)) {
        let d = Mat2::new(m.0, m.1, m.2, m.3);
        let field = CurrentField::affine(d, b);
        prop_assert_eq!(field.jacobian(x), d);
        prop_assert_eq!(field.jacobian(x), field.jacobian(Vec2::zero()));
    }

    #[test]
    fn finite_difference_matches_declared_jacobian(k in 0.1..2.0f64, w in 0.1..2.0f64, x in vec2(3.0)) {
        let f = move |x: Vec2| Vec2::new((k * x.x2).sin(), (w * x.x1).cos() * x.x2);
        let jac = move |x: Vec2| Mat2::new(0.0, k * (k * x.x2).cos(), -w * (w * x.x1).sin() * x.x2, (w * x.x1).cos());
        let region = RegionBox::new(Vec2::new(-3.0, -3.0), Vec2::new(3.0, 3.0)).unwrap();
        let field = CurrentField::Analytic(AnalyticField::new(f, region).with_jacobian(jac));
        let fd = central_difference_jacobian(f, x);
        let exact = field.jacobian(x);
        for (a, b) in [(fd.m11, exact.m11), (fd.m12, exact.m12), (fd.m21, exact.m21), (fd.m22, exact.m22)] {
            prop_assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn weak_current_check_is_monotone_in_the_region(lo in vec2(2.0), size in (0.5..3.0f64, 0.5..3.0f64), shrink in 0.1..1.0f64) {
        let set = ControlSet::disk(1.0).unwrap();
        let field = CurrentField::affine(Mat2::diag(0.2, -0.1), Vec2::new(0.1, 0.0));
        let hi = lo + Vec2::new(size.0, size.1);
        let big = RegionBox::new(lo, hi).unwrap();
        let small = RegionBox::new(lo, lo + Vec2::new(size.0 * shrink, size.1 * shrink)).unwrap();
        let (rb, rs) = (weak_current_check(&field, &set, &big, 200).unwrap(), weak_current_check(&field, &set, &small, 200).unwrap());
        prop_assert!(!rb.ok || rs.ok);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shooting_matches_route_under_constant_currents(radius in 1.0..2.0f64, s in vec2(0.5), b in vec2(3.0)) {
        prop_assume!(b.norm() > 0.5);
        let target = Target { point: b, radius: bundled::SHOOT_RADIUS };
        let field = CurrentField::constant(s);
        let sc = Scenario::new("random", Locus::Point(Vec2::zero()), target, ControlSet::disk(radius).unwrap(), field, 20.0);
        let route = constant_current_route(&sc).unwrap();
        let shot = shoot(&sc).unwrap();
        prop_assert!((route.t_f - shot.t_f).abs() <= 1e-6, "{} vs {}", route.t_f, shot.t_f);
        prop_assert!(shot.chord_deviation() <= 1e-6 * b.norm());
    }
}

#[test]
fn shooting_never_loses_to_the_constant_control() {
    for (sc, drift) in [(bundled::upstream_ellipse(), Drift::Upstream), (bundled::downstream_ellipse(), Drift::Downstream)] {
        let ex = affine_elliptic_example(0.5, 2.0, drift, Vec2::new(1.0, 1.0)).unwrap();
        let shot = shoot(&sc).unwrap();
        assert!(shot.t_f <= ex.t_const.unwrap() + 1e-6, "{}: {} vs {:?}", sc.name, shot.t_f, ex.t_const);
        assert!(ex.t_opt <= ex.t_const.unwrap() + 1e-12);
    }
}

#[test]
fn pmp_and_zne_trace_the_same_path() {
    let sc = bundled::upstream_ellipse();
    let shot = shoot(&sc).unwrap();
    let samples = &shot.trajectory.samples;
    let theta0 = sc.set.boundary_angle(samples[0].u);
    let zne = integrate_zne(&sc.set, &sc.field, Vec2::zero(), theta0, shot.t_f, Vec2::new(1e3, 1e3), 0.0).unwrap();
    // linear interpolation between ZNE samples (spacing 1e-3) is accurate to ~1e-7
    let zt: Vec<f64> = zne.samples.iter().map(|z| z.t).collect();
    let worst = samples
        .iter()
        .filter(|s| s.t <= zt[zt.len() - 1])
        .map(|s| {
            let k = zt.partition_point(|&t| t < s.t).clamp(1, zt.len() - 1);
            let (a, b) = (&zne.samples[k - 1], &zne.samples[k]);
            let w = if b.t > a.t { (s.t - a.t) / (b.t - a.t) } else { 0.0 };
            (a.x + (b.x - a.x) * w).distance(s.x)
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst:.3e}");
}

#[test]
fn backward_replay_of_shot_recovers_the_start() {
    let shot = shoot(&bundled::upstream_ellipse()).unwrap();
    let s = &shot.trajectory.samples;
    let ts: Vec<f64> = s.iter().map(|p| p.t).collect();
    let xs: Vec<Vec2> = s.iter().map(|p| p.x).collect();
    let us: Vec<Vec2> = s.iter().map(|p| p.u).collect();
    let err = reversibility_error(&ts, &xs, &us, &bundled::upstream_ellipse().field).unwrap();
    assert!(err < 1e-6, "{err:.3e}");
}
