use std::f64::consts::PI;

use semiper::linalg::{self, c64, gauss_legendre, re, CMat, CVec, ZERO};
use semiper::models::*;

#[test]
fn cap_vanishes_on_band() {
    let a = DampingProfile::AxisymmetricCap { amplitude: 1.0, cutoff: 0.8, width: 0.02 };
    assert_eq!(a.eval(0.0), 0.0);
    assert_eq!(a.eval(0.8), 0.0);
    assert!(a.eval(0.95) > 0.0 && a.eval(-0.95) == a.eval(0.95));
    assert_eq!(a.support(-1.0, 1.0), vec![(-1.0, -0.8), (0.8, 1.0)]);
}

#[test]
fn bump_peak_and_support() {
    let a = DampingProfile::Bump { amplitude: 2.0, center: 0.5, width: 0.25 };
    assert!((a.eval(0.5) - 2.0).abs() < 1e-15);
    assert_eq!(a.eval(0.8), 0.0);
    assert_eq!(a.support(0.0, 1.0), vec![(0.25, 0.75)]);
}

#[test]
fn json_round_trip() {
    let a = DampingProfile::PowerCutoff { amplitude: 1.0, exponent: 2.0, length: 1.0 };
    let s = serde_json::to_string(&a).unwrap();
    assert!(s.contains("\"kind\":\"power_cutoff\""));
    let b: DampingProfile = serde_json::from_str(&s).unwrap();
    assert_eq!(a, b);
}

#[test]
fn undamped_string_is_conservative() {
    let m = build_damped_wave_interval(20, 1.0, &DampingProfile::constant(0.0)).unwrap();
    let r = m.spectrum_report();
    assert!(!r.assumptions_ok);
    assert!(r.eigenvalues.iter().all(|l| l.re.abs() < 1e-9 * l.norm().max(1.0)));
}

#[test]
fn uniform_damping_spectrum_and_energy() {
    let c = 0.7;
    let m = build_damped_wave_interval(30, 1.0, &DampingProfile::constant(c)).unwrap();
    let r = m.spectrum_report();
    assert!(r.assumptions_ok);
    for l in &r.eigenvalues {
        assert!(l.re < 0.0 && l.re >= -c - 1e-9, "{l}");
    }
    let x = CVec::from_fn(60, |i, _| c64((i as f64 * 0.37).sin(), 0.0));
    let mut prev = m.norm(&x);
    for k in 1..=40 {
        let e = m.norm(&m.propagate(0.25 * k as f64, &x).unwrap());
        assert!(e <= prev * (1.0 + 1e-12));
        prev = e;
    }
}

#[test]
fn localized_bump_decays() {
    let a = DampingProfile::Bump { amplitude: 4.0, center: 0.125, width: 0.125 };
    let m = build_damped_wave_interval(30, 1.0, &a).unwrap();
    assert!(m.spectrum_report().assumptions_ok);
    let x = CVec::from_fn(60, |i, _| if i < 30 { c64(((i + 1) as f64 * PI / 31.0).sin(), 0.0) } else { ZERO });
    let late = m.norm(&m.propagate(200.0, &x).unwrap());
    assert!(late < 1e-3 * m.norm(&x));
}

#[test]
fn circle_kernel_and_projector() {
    let m = build_damped_wave_circle(16, 2.0 * PI, &DampingProfile::constant(1.0)).unwrap();
    let k = &m.kernel_basis()[0];
    assert!((m.generator() * k).norm() == 0.0);
    let x = CVec::from_fn(32, |i, _| c64((i as f64).cos(), 0.0));
    let p = m.project_kernel(&x);
    let mean = x.iter().map(|z| z.re).sum::<f64>() / 16.0;
    for i in 0..16 {
        assert!((p[i].re - mean).abs() < 1e-13 && p[16 + i].norm() < 1e-15);
    }
    assert!(m.spectrum_report().assumptions_ok);
}

#[test]
fn circle_needs_damping() {
    let e = build_damped_wave_circle(8, 1.0, &DampingProfile::constant(0.0)).unwrap_err();
    assert_eq!(e, ModelError::ZeroDamping);
    assert!(matches!(build_damped_wave_interval(2, 1.0, &DampingProfile::constant(1.0)), Err(ModelError::InvalidGrid(_))));
}

#[test]
fn boundary_lifting_steady_state() {
    let m = build_boundary_forced_wave(25, 1.0, &DampingProfile::constant(1.0), (0.2, 0.6), 0.5).unwrap();
    let b = m.control().unwrap().column(0).into_owned();
    let steady = m.generator().clone().lu().solve(&(-&b)).unwrap();
    let h = 1.0 / 26.0;
    for i in 0..25 {
        let x = (i + 1) as f64 * h;
        assert!((steady[i].re - (1.0 - x)).abs() < 1e-10);
        assert!(steady[25 + i].norm() < 1e-10);
    }
    let weak = build_boundary_forced_wave(10, 1.0, &DampingProfile::constant(0.1), (0.2, 0.6), 0.5);
    assert!(matches!(weak, Err(ModelError::WeakDamping { .. })));
}

#[test]
fn energy_is_dissipated() {
    let m = build_heat_wave_1d(8, 12).unwrap();
    let r = m.spectrum_report();
    assert!(r.assumptions_ok);
    let sym = {
        let g = m.space().gram();
        let a = m.generator();
        g * a + a.adjoint() * g
    };
    let top = linalg::hermitian_eigenvalues(&sym).last().copied().unwrap();
    assert!(top < 1e-10, "{top}");
    let x = CVec::from_fn(m.dim(), |i, _| c64((0.3 * i as f64).sin(), 0.0));
    let mut prev = m.norm(&x);
    for k in 1..=50 {
        let e = m.norm(&m.propagate(0.1 * k as f64, &x).unwrap());
        assert!(e <= prev + 1e-8 * 0.1 * prev);
        prev = e;
    }
}

#[test]
fn rejects_small_grids() {
    assert!(matches!(build_heat_wave_1d(2, 5), Err(ModelError::InvalidGrid(_))));
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `P_l^m` from the power-series coefficients of `d^{l+m}/dx^{l+m} (x²−1)^l / (2^l l!)`.
fn legendre_by_rodrigues(l: usize, m: usize, x: f64) -> f64 {
    let mut coeffs = vec![0.0; 2 * l + 1];
    for k in 0..=l {
        let binom = factorial(l) / (factorial(k) * factorial(l - k));
        let sign = if (l - k) % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[2 * k] = sign * binom;
    }
    for _ in 0..l + m {
        coeffs = (1..coeffs.len()).map(|p| p as f64 * coeffs[p]).collect();
    }
    let poly: f64 = coeffs.iter().enumerate().map(|(p, c)| c * x.powi(p as i32)).sum();
    poly / (2f64.powi(l as i32) * factorial(l)) * (1.0 - x * x).powf(0.5 * m as f64)
}

#[test]
fn normalized_legendre_matches_rodrigues() {
    for m in 0..4 {
        for l in m..7 {
            let norm = ((2 * l + 1) as f64 / 2.0 * factorial(l - m) / factorial(l + m)).sqrt();
            for &x in &[-0.9, -0.3, 0.0, 0.45, 0.99] {
                let p = associated_legendre_normalized(m, 6, x)[l - m];
                let q = norm * legendre_by_rodrigues(l, m, x);
                assert!((p.abs() - q.abs()).abs() < 1e-12, "l={l} m={m} x={x}: {p} vs {q}");
            }
        }
    }
}

#[test]
fn undamped_block_spectrum() {
    let b = build_sphere_schrodinger(12, 3, &DampingProfile::constant(0.0), None).unwrap();
    let mut ev = b.model.spectral().eigenvalues();
    ev.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap());
    for (l, e) in (3..=12).zip(&ev) {
        assert!((e - c64(0.0, (l * (l + 1)) as f64)).norm() < 1e-10);
    }
    let p = b.model.propagator(2.0 * PI);
    assert!(linalg::max_abs(&(p - CMat::identity(10, 10))) < 1e-10);
}

#[test]
fn constant_damping_is_scalar() {
    let b = build_sphere_schrodinger(10, 0, &DampingProfile::constant(0.4), None).unwrap();
    let diff = &b.damping_matrix - CMat::identity(11, 11) * re(0.4);
    assert!(linalg::max_abs(&diff) < 1e-13);
}

#[test]
fn lat_long_grid_oracle() {
    let cap = DampingProfile::AxisymmetricCap { amplitude: 1.0, cutoff: 0.5, width: 0.05 };
    let (m, jmax) = (2, 8);
    let b = build_sphere_schrodinger(jmax, m, &cap, None).unwrap();
    // Composite Simpson in colatitude, uniform rule in longitude with explicit e^{imφ}.
    let nt = 20000;
    let nphi = 2 * m + 8;
    let ht = PI / nt as f64;
    let norm = |l: usize| ((2 * l + 1) as f64 / (4.0 * PI) * factorial(l - m) / factorial(l + m)).sqrt();
    let mut grid = nalgebra::DMatrix::<num_complex::Complex64>::zeros(jmax - m + 1, jmax - m + 1);
    for it in 0..=nt {
        let th = it as f64 * ht;
        let wt = if it == 0 || it == nt { 1.0 } else if it % 2 == 1 { 4.0 } else { 2.0 } * ht / 3.0;
        let mu = th.cos();
        let a = cap.eval(mu);
        if a == 0.0 {
            continue;
        }
        let ys: Vec<f64> = (m..=jmax).map(|l| norm(l) * legendre_by_rodrigues(l, m, mu)).collect();
        for ip in 0..nphi {
            let phi = 2.0 * PI * ip as f64 / nphi as f64;
            let e = c64(0.0, m as f64 * phi).exp();
            let w = wt * th.sin() * 2.0 * PI / nphi as f64 * a;
            for i in 0..ys.len() {
                for j in 0..ys.len() {
                    grid[(i, j)] += (e * ys[i]).conj() * (e * ys[j]) * w;
                }
            }
        }
    }
    let diff = linalg::max_abs(&(&grid - &b.damping_matrix));
    assert!(diff < 1e-8, "{diff}");
    let ev = linalg::hermitian_eigenvalues(&b.damping_matrix);
    assert!(ev[0] > -1e-14);
}

#[test]
fn equatorial_harmonic_is_unit() {
    let b = build_sphere_schrodinger(5, 0, &DampingProfile::constant(0.0), None).unwrap();
    let phi = equatorial_harmonic(&b, 0).unwrap();
    assert_eq!(phi.norm(), 1.0);
    let p = associated_legendre_normalized(0, 0, 0.3)[0];
    assert!((p - 0.5f64.sqrt()).abs() < 1e-15);
    assert!(equatorial_harmonic(&b, 2).is_err());
}

#[test]
fn polar_cap_mass_of_equatorial_harmonic() {
    let r: f64 = 0.6;
    for j in [5usize, 10, 20] {
        let (x, w) = gauss_legendre(400);
        let lo = r.cos();
        let half = 0.5 * (1.0 - lo);
        let mass: f64 = x
            .iter()
            .zip(&w)
            .map(|(xk, wk)| {
                let mu = lo + half * (xk + 1.0);
                half * wk * associated_legendre_normalized(j, j, mu)[0].powi(2)
            })
            .sum();
        let total: f64 = x.iter().zip(&w).map(|(xk, wk)| wk * (1.0 - xk * xk).powi(j as i32)).sum();
        let cj2 = 1.0 / (2.0 * PI * total);
        let leading = PI / (j + 1) as f64 * r.sin().powi(2 * j as i32 + 2) / r.cos() * cj2;
        let rel = mass / leading - 1.0;
        assert!(rel.abs() <= r.tan().powi(2) / (2 * j + 2) as f64, "j={j} rel={rel}");
    }
}
