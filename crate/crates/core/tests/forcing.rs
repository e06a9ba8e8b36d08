mod common;

use semiper::forcing::*;
use semiper::linalg::re;
use semiper::models::build_heat_wave_1d;
use semiper::Model;

fn models() -> Vec<Model> {
    vec![common::interval_uniform(50), build_heat_wave_1d(10, 40).unwrap()]
}

fn non_per0(period: f64, v: &semiper::CVec) -> PeriodicForcing {
    let c = PeriodicForcing::cosine(period, 1, v).unwrap();
    PeriodicForcing::linear_combination(vec![(re(1.0), c), (re(1.0), PeriodicForcing::constant(period, v.clone()).unwrap())]).unwrap()
}

#[test]
fn derivatives_commute_with_the_generator_for_per0_forcing() {
    for m in models() {
        let v = common::smooth_vec(m.dim());
        let f = PeriodicForcing::bump(1.0, 3, &v).unwrap();
        assert!(matches!(f.class_tag(), ClassTag::Wk1Per0(k) if k >= 3));
        for k in 1..=3 {
            let r = gain_of_derivatives(&m, &f, k, &DuhamelOptions::default()).unwrap();
            assert!(r.relative_error <= 1e-6, "{} k {k}: {r:?}", m.label());
            assert!(r.endpoint_norm < 1e-10);
        }
    }
}

#[test]
fn identity_fails_without_vanishing_endpoints() {
    for m in models() {
        let v = common::smooth_vec(m.dim());
        let g = non_per0(1.0, &v);
        for k in 1..=3 {
            let r = gain_of_derivatives(&m, &g, k, &DuhamelOptions::default()).unwrap();
            assert!(r.relative_error >= 1e-3, "{} k {k}: {r:?}", m.label());
            assert!(r.corrected_error <= 1e-6, "{} k {k}: {r:?}", m.label());
        }
    }
}

#[test]
fn shifted_derivative_rejects_forcing_outside_class() {
    let m = common::interval_uniform(20);
    let g = non_per0(1.0, &common::smooth_vec(m.dim()));
    let err = shift_derivative_ft(&m, &g, 1, &DuhamelOptions::default()).unwrap_err();
    assert_eq!(err.name(), "forcing::ClassViolation");
}

#[test]
fn quadrature_and_closed_form_agree() {
    let m = common::interval(30);
    let f = PeriodicForcing::bump(1.0, 2, &common::smooth_vec(m.dim())).unwrap();
    let a = duhamel_ft(&m, &f, &DuhamelOptions::default()).unwrap();
    let b = duhamel_ft(&m, &f, &DuhamelOptions::quadrature()).unwrap();
    assert!(m.norm(&(&a - &b)) <= 1e-9 * m.norm(&a));
}

#[test]
fn fourier_norms_match_pointwise_quadrature() {
    let m = common::interval(30);
    let f = PeriodicForcing::bump(1.0, 3, &common::random_vec(m.dim(), 5)).unwrap();
    let wrapped = PeriodicForcing::linear_combination(vec![(re(1.0), f.clone())]).unwrap();
    for j in 0..=3 {
        let a = f.derivative_l1_norm(m.space(), j).unwrap();
        let b = wrapped.derivative_l1_norm(m.space(), j).unwrap();
        assert!(common::rel(a, b) < 1e-9, "j = {j}: {a} vs {b}");
    }
}
