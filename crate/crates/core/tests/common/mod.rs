#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semiper::linalg::{c64, re};
use semiper::models::*;
use semiper::{CMat, CVec, Model};

pub fn scalar() -> Model {
    Model::scalar(re(-1.0))
}

pub fn interval(n: usize) -> Model {
    build_damped_wave_interval(n, 1.0, &DampingProfile::Bump { amplitude: 2.0, center: 0.4, width: 0.3 }).unwrap()
}

pub fn interval_uniform(n: usize) -> Model {
    build_damped_wave_interval(n, 1.0, &DampingProfile::constant(1.0)).unwrap()
}

pub fn circle(n: usize) -> Model {
    build_damped_wave_circle(n, 1.0, &DampingProfile::Bump { amplitude: 1.0, center: 0.5, width: 0.4 }).unwrap()
}

pub fn heat_wave() -> Model {
    build_heat_wave_1d(8, 24).unwrap()
}

pub fn cap() -> DampingProfile {
    DampingProfile::AxisymmetricCap { amplitude: 1.0, cutoff: 0.8, width: 0.02 }
}

pub fn sphere() -> Model {
    build_sphere_schrodinger(20, 4, &cap(), None).unwrap().model
}

pub fn boundary(n: usize) -> Model {
    build_boundary_forced_wave(n, 1.0, &DampingProfile::constant(1.0), (0.0, 1.0), 1.0).unwrap()
}

/// The model matrix used by invariant suites.
pub fn model_matrix() -> Vec<Model> {
    vec![scalar(), interval(24), circle(24), heat_wave(), sphere(), boundary(24)]
}

pub fn random_vec(dim: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CVec::from_iterator(dim, (0..dim).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
}

/// A spatially smooth real profile, `sin(π(i + 1/2)/n)`.
pub fn smooth_vec(dim: usize) -> CVec {
    CVec::from_iterator(dim, (0..dim).map(|i| re((PI * (i as f64 + 0.5) / dim as f64).sin())))
}

/// Velocity-slot profile for wave layouts, `(0, w)`.
pub fn wave_load(model: &Model, profile: impl Fn(f64) -> f64) -> CVec {
    let mut v = CVec::zeros(model.dim());
    match model.layout() {
        semiper::Layout::Wave { nodes, velocity, .. } => {
            for (i, x) in velocity.clone().zip(nodes) {
                v[i] = re(profile(*x));
            }
        }
        _ => panic!("wave layout expected"),
    }
    v
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `(1/2πi)∮_{|z|=r} (z − A)⁻¹ dz` by the trapezoid rule.
pub fn riesz_projector(a: &CMat, r: f64, nodes: usize) -> CMat {
    let n = a.nrows();
    let mut p = CMat::zeros(n, n);
    for k in 0..nodes {
        let z = c64(0.0, 2.0 * PI * k as f64 / nodes as f64).exp() * r;
        let shifted = CMat::identity(n, n) * z - a;
        p += shifted.lu().try_inverse().unwrap() * (z / nodes as f64);
    }
    p
}

pub fn smallest_nonzero_modulus(m: &Model) -> f64 {
    m.spectral().eigenvalues().iter().map(|l| l.norm()).filter(|r| *r > 1e-8).fold(f64::INFINITY, f64::min)
}
