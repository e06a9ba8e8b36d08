mod common;

use semiper::linalg::{c64, re, CMat, CVec};
use semiper::models::{build_damped_wave_interval, build_heat_wave_1d, build_sphere_schrodinger, DampingProfile};
use semiper::stability::*;
use semiper::{Model, StateSpace};

fn diagonal(values: &[semiper::C64]) -> Model {
    let a = CMat::from_diagonal(&CVec::from_row_slice(values));
    Model::new("diag", StateSpace::identity(values.len()), a).unwrap()
}

#[test]
fn two_mode_envelope_follows_slow_mode() {
    let m = diagonal(&[re(-1.0), re(-10.0)]);
    let scan = decay_envelope(&m, 1.0, &[5.0, 10.0, 20.0]).unwrap();
    for (t, h) in scan.abscissae.iter().zip(&scan.values) {
        assert!(common::rel(*h, (-t).exp() / 2.0) < 1e-12);
    }
}

#[test]
fn interval_envelope_decays_exponentially() {
    let m = common::interval_uniform(40);
    let grid = uniform_grid(0.0, 40.0, 81);
    let scan = decay_envelope(&m, 1.0, &grid).unwrap();
    assert!(scan.values.last().unwrap() < &1e-6);
    let tail: Vec<(f64, f64)> = grid.iter().zip(&scan.values).filter(|(t, _)| **t >= 10.0).map(|(t, h)| (*t, h.ln())).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = tail.into_iter().unzip();
    let (slope, _, r2) = semiper::linalg::linear_fit(&x, &y);
    assert!(r2 > 0.99 && slope < 0.0, "{slope} {r2}");
    let power = power_fit(&scan.abscissae, &scan.values, Some((10.0, 40.0))).unwrap();
    assert!(power.r2 < r2);
}

#[test]
fn envelope_ordering_in_alpha() {
    let m = common::interval(30);
    let grid = uniform_grid(0.0, 20.0, 41);
    let h_half = decay_envelope(&m, 0.5, &grid).unwrap();
    let h_one = decay_envelope(&m, 1.0, &grid).unwrap();
    for (a, b) in h_one.values.iter().zip(&h_half.values) {
        assert!(*a <= b * (1.0 + 1e-8));
    }
}

#[test]
fn normal_envelope_is_nonincreasing() {
    let m = synthetic_resolvent_model(1.0, 50).unwrap();
    let scan = decay_envelope(&m, 1.0, &uniform_grid(0.0, 30.0, 61)).unwrap();
    assert!(scan.values.windows(2).all(|w| w[1] <= w[0] + 1e-10));
}

#[test]
fn heat_wave_decay_rate_exceeds_one_sixth() {
    let m = build_heat_wave_1d(20, 160).unwrap();
    let scan = inverse_decay(&m, &geometric_grid(0.5, 60.0, 60), Some(2.0 * 160.0 / 3.0)).unwrap();
    let fit = fit_decay_exponent(&scan, Some((8.0, 60.0))).unwrap();
    assert!(fit.exponent >= 1.0 / 6.0, "beta = {}", fit.exponent);
}

#[test]
fn gamma_sweep_slows_decay() {
    let grid = geometric_grid(1.0, 60.0, 40);
    let mut finals = Vec::new();
    for gamma in [1.0, 2.0, 4.0] {
        let m = build_damped_wave_interval(40, 1.0, &DampingProfile::PowerCutoff { amplitude: 2.0, exponent: gamma, length: 1.0 }).unwrap();
        let scan = inverse_decay(&m, &grid, None).unwrap();
        let fit = power_fit(&scan.abscissae, &scan.values, Some((10.0, 60.0))).unwrap();
        println!("gamma = {gamma}: beta = {:.4} (r2 {:.3})", -fit.exponent, fit.r2);
        assert!(fit.exponent.is_finite());
        finals.push(*scan.values.last().unwrap());
    }
    assert!(finals.windows(2).all(|w| w[1] > w[0]), "{finals:?}");
}

#[test]
fn near_imaginary_pair_peaks_at_one_over_delta() {
    let delta = 1e-2;
    let m = diagonal(&[c64(-delta, 1.0), c64(-delta, -1.0)]);
    let scan = resolvent_scan(&m, &uniform_grid(0.0, 3.0, 301), &ResolventScanOptions::default()).unwrap();
    let (i, peak) = scan.pointwise.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    assert!(common::rel(peak, 1.0 / delta) < 1e-3);
    assert!((scan.abscissae[i] - 1.0).abs() < 1e-12);
    assert!(scan.values.windows(2).all(|w| w[1] >= w[0]));
    assert!(scan.values.iter().zip(&scan.pointwise).all(|(m, p)| m >= p));
}

#[test]
fn sphere_peaks_grow_as_mode_damping_shrinks() {
    let mut peaks = Vec::new();
    for j in [4usize, 6, 8] {
        let block = build_sphere_schrodinger(j + 20, j, &common::cap(), None).unwrap();
        let lambda = block.model.spectral().eigenvalues();
        let slow = lambda.iter().max_by(|a, b| a.re.partial_cmp(&b.re).unwrap()).unwrap();
        let peak = block.model.resolvent_norm(slow.im).unwrap();
        assert!(common::rel(peak, 1.0 / slow.re.abs()) < 0.05);
        assert!((slow.im - (j * (j + 1)) as f64).abs() < 1e-2);
        peaks.push(peak);
    }
    assert!(peaks.windows(2).all(|w| w[1] > w[0]));
}

fn synthetic_options(alpha: f64) -> BtOptions {
    if alpha == 1.0 {
        BtOptions { eta_grid: uniform_grid(0.0, 200.0, 801), eta_window: Some((10.0, 200.0)), t_grid: geometric_grid(1.0, 200.0, 120), t_window: Some((20.0, 200.0)), band: None }
    } else {
        BtOptions { eta_grid: uniform_grid(0.0, 150.0, 801), eta_window: Some((10.0, 150.0)), t_grid: geometric_grid(1.0, 5000.0, 120), t_window: Some((50.0, 5000.0)), band: None }
    }
}

#[test]
fn borichev_tomilov_on_synthetic_models() {
    for (alpha, modes) in [(1.0, 400), (2.0, 300)] {
        let m = synthetic_resolvent_model(alpha, modes).unwrap();
        let (rec, _, _) = bt_crosscheck(&m, &synthetic_options(alpha)).unwrap();
        assert!((0.8..=1.25).contains(&rec.product), "alpha {alpha}: {rec:?}");
        assert!((rec.alpha_hat - alpha).abs() < 0.05);
    }
}

#[test]
fn uniform_damping_gives_bounded_resolvent_and_poor_power_fit() {
    let m = common::interval_uniform(40);
    let scan = resolvent_scan(&m, &uniform_grid(0.0, 100.0, 201), &ResolventScanOptions { window: Some((10.0, 100.0)), include_eigen_frequencies: true }).unwrap();
    assert!(scan.values.last().unwrap() <= &2.5);
    let dec = inverse_decay(&m, &uniform_grid(1.0, 60.0, 60), None).unwrap();
    let power = power_fit(&dec.abscissae, &dec.values, Some((10.0, 60.0))).unwrap();
    let tail: Vec<(f64, f64)> = dec.abscissae.iter().zip(&dec.values).filter(|(t, _)| **t >= 10.0).map(|(t, v)| (*t, v.ln())).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = tail.into_iter().unzip();
    let (_, _, r2) = semiper::linalg::linear_fit(&x, &y);
    assert!(power.r2 < r2, "{} {r2}", power.r2);
}

#[test]
fn heat_wave_borichev_tomilov_product() {
    let m = build_heat_wave_1d(20, 160).unwrap();
    let opts = BtOptions { eta_grid: uniform_grid(0.0, 107.0, 400), eta_window: Some((10.0, 107.0)), t_grid: geometric_grid(0.5, 60.0, 80), t_window: Some((8.0, 60.0)), band: Some(2.0 * 160.0 / 3.0) };
    let (rec, res, dec) = bt_crosscheck(&m, &opts).unwrap();
    assert!((0.7..=1.4).contains(&rec.product), "{rec:?}");
    let ml = mlog_bound_curve(&res, &dec).unwrap();
    assert!(ml.fraction >= 0.95, "fraction {}", ml.fraction);
    assert!(dec.values.last().unwrap() < &(dec.values[0] / 10.0));
}

#[test]
fn scalar_interpolation_ratio_bounded_by_four() {
    let m = common::scalar();
    let c = interpolation_check(&m, 2.0, &uniform_grid(0.0, 30.0, 61)).unwrap();
    assert!(c.sup <= 4.0);
}

#[test]
fn interpolation_ratio_stable_under_extension() {
    let m = common::interval(30);
    let a = interpolation_check(&m, 0.5, &uniform_grid(0.0, 50.0, 101)).unwrap();
    assert!(a.sup.is_finite());
    let hw = build_heat_wave_1d(8, 32).unwrap();
    let short = interpolation_check(&hw, 2.0, &uniform_grid(0.0, 50.0, 101)).unwrap();
    let long = interpolation_check(&hw, 2.0, &uniform_grid(0.0, 100.0, 201)).unwrap();
    assert!(common::rel(long.sup, short.sup) < 0.1);
}

#[test]
fn mlog_scalar_bound_holds() {
    let m = common::scalar();
    let res = resolvent_scan(&m, &uniform_grid(0.0, 50.0, 101), &ResolventScanOptions::default()).unwrap();
    let dec = inverse_decay(&m, &uniform_grid(1.0, 4.5, 41), None).unwrap();
    let ml = mlog_bound_curve(&res, &dec).unwrap();
    assert!(ml.constant > 0.0 && ml.constant.is_finite());
    assert_eq!(ml.fraction_with(1.0), 1.0);
}

#[test]
fn mlog_inverse_matches_predicted_form() {
    let m = synthetic_resolvent_model(2.0, 200).unwrap();
    let res = resolvent_scan(&m, &uniform_grid(0.0, 150.0, 601), &ResolventScanOptions { window: None, include_eigen_frequencies: true }).unwrap();
    let dec = inverse_decay(&m, &geometric_grid(1.0, 2000.0, 40), None).unwrap();
    let ml = mlog_bound_curve(&res, &dec).unwrap();
    let eta = &ml.scan.abscissae;
    let ratios: Vec<f64> = [1e3, 1e4, 1e5]
        .iter()
        .map(|&t: &f64| pchip_eval(&ml.scan.values, eta, t) / (t / t.ln()).sqrt())
        .collect();
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.5, "{ratios:?}");
}

#[test]
fn mlog_rejects_non_monotone_input() {
    let res = ScanResult { kind: ScanKind::Resolvent, abscissae: vec![0.0, 1.0, 2.0], values: vec![5.0, 1.0, 1.0], pointwise: vec![], fit: None };
    let dec = ScanResult { kind: ScanKind::InverseDecay { band: None }, abscissae: vec![1.0, 2.0], values: vec![1.0, 0.5], pointwise: vec![], fit: None };
    assert_eq!(mlog_bound_curve(&res, &dec).unwrap_err().name(), "stability_lab::NonMonotone");
}

#[test]
fn decay_to_a_tenth_on_stable_models() {
    for m in [common::interval(30), build_heat_wave_1d(8, 24).unwrap()] {
        let dec = inverse_decay(&m, &uniform_grid(0.0, 200.0, 21), None).unwrap();
        assert!(dec.values.last().unwrap() < &(dec.values[0] / 10.0), "{}", m.label());
    }
}
