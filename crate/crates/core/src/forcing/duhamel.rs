use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ForcingError, PeriodicForcing};
use crate::linalg::{self, c64, re, C64, CMat, CVec, ONE};
use crate::operator::{Model, SpectralKind};

type Result<T> = std::result::Result<T, ForcingError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuhamelMethod {
    Auto,
    Quadrature,
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuhamelOptions {
    pub panels: usize,
    pub order: usize,
    /// Accepted relative change under panel doubling.
    pub tol: f64,
    pub max_doublings: usize,
    pub method: DuhamelMethod,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self { panels: 8, order: 16, tol: 1e-12, max_doublings: 8, method: DuhamelMethod::Auto }
    }
}

impl DuhamelOptions {
    pub fn quadrature() -> Self {
        Self { method: DuhamelMethod::Quadrature, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct DuhamelReport {
    pub value: CVec,
    pub method: DuhamelMethod,
    pub panels: usize,
    /// Relative change at the last panel doubling (zero for the closed form).
    pub change: f64,
}

/// `F_T = ∫₀^T e^{A(T−s)} f(s) ds`.
pub fn duhamel_ft(model: &Model, f: &PeriodicForcing, opts: &DuhamelOptions) -> Result<CVec> {
    Ok(duhamel_ft_report(model, f, opts)?.value)
}

pub fn duhamel_ft_report(model: &Model, f: &PeriodicForcing, opts: &DuhamelOptions) -> Result<DuhamelReport> {
    duhamel_window(model, f, 0.0, opts)
}

/// `∫_{t₀}^{t₀+T} e^{A(t₀+T−s)} f(s) ds`.
pub fn duhamel_window(model: &Model, f: &PeriodicForcing, t0: f64, opts: &DuhamelOptions) -> Result<DuhamelReport> {
    if f.dim() != model.dim() {
        return Err(ForcingError::DimensionMismatch { expected: model.dim(), got: f.dim() });
    }
    let closed = match opts.method {
        DuhamelMethod::Quadrature => None,
        DuhamelMethod::ClosedForm => {
            let terms = f.fourier_terms().ok_or_else(|| ForcingError::Invalid("closed form needs a Fourier forcing".into()))?;
            Some(closed_form(model, terms, f.period(), t0).ok_or_else(|| ForcingError::Invalid("closed form is singular at a resonant harmonic".into()))?)
        }
        DuhamelMethod::Auto => f.fourier_terms().and_then(|terms| closed_form(model, terms, f.period(), t0)),
    };
    if let Some(value) = closed {
        return Ok(DuhamelReport { value, method: DuhamelMethod::ClosedForm, panels: 0, change: 0.0 });
    }
    let engine = Engine::new(model);
    let mut panels = opts.panels.max(1);
    let (mut prev, _) = engine.quadrature(f, t0, panels, opts.order);
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_doublings {
        panels *= 2;
        let (next, mass) = engine.quadrature(f, t0, panels, opts.order);
        let denom = model.norm(&next).max(mass).max(f64::MIN_POSITIVE);
        change = model.norm(&(&next - &prev)) / denom;
        if mass == 0.0 {
            change = 0.0;
        }
        prev = next;
        if change <= opts.tol {
            return Ok(DuhamelReport { value: prev, method: DuhamelMethod::Quadrature, panels, change });
        }
    }
    Err(ForcingError::QuadratureUnderResolved { change })
}

/// `F_T(f^{(k)})`, defined for `f` in `W^{k,1}_{per,0}`.
pub fn shift_derivative_ft(model: &Model, f: &PeriodicForcing, k: usize, opts: &DuhamelOptions) -> Result<CVec> {
    let report = f.check_class(model.space(), k, 1e-10)?;
    if !report.class_verified {
        let order = (0..k)
            .find(|&j| {
                let a = f.derivative(j, 0.0).map(|v| v.norm()).unwrap_or(0.0);
                let b = f.derivative(j, f.period()).map(|v| v.norm()).unwrap_or(0.0);
                a.max(b) > 1e-10 * f.derivative_scale(j).max(f64::MIN_POSITIVE)
            })
            .unwrap_or(0);
        return Err(ForcingError::ClassViolation { k, order, magnitude: report.endpoint_max });
    }
    duhamel_ft(model, &f.derivative_forcing(k)?, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub k: usize,
    /// `‖AᵏF_T(f) − F_T(f^{(k)})‖_X / ‖F_T(f^{(k)})‖_X`.
    pub relative_error: f64,
    /// Same, after adding the endpoint terms `Σ_j A^{k−1−j}(I − e^{AT}) f^{(j)}(0)`.
    pub corrected_error: f64,
    pub endpoint_norm: f64,
}

/// Compares `AᵏF_T(f)` with `F_T(f^{(k)})` without any class check.
pub fn gain_of_derivatives(model: &Model, f: &PeriodicForcing, k: usize, opts: &DuhamelOptions) -> Result<GainReport> {
    let a = model.generator();
    let mut lhs = duhamel_ft(model, f, opts)?;
    for _ in 0..k {
        lhs = a * lhs;
    }
    let rhs = duhamel_ft(model, &f.derivative_forcing(k)?, opts)?;
    let mut endpoint = CVec::zeros(model.dim());
    for j in 0..k {
        let fj = f.derivative(j, 0.0)?;
        let mut term = &fj - model.propagate(f.period(), &fj)?;
        for _ in 0..k - 1 - j {
            term = a * term;
        }
        endpoint += term;
    }
    let scale = model.norm(&rhs).max(f64::MIN_POSITIVE);
    Ok(GainReport {
        k,
        relative_error: model.norm(&(&lhs - &rhs)) / scale,
        corrected_error: model.norm(&(&lhs - &rhs + &endpoint)) / scale,
        endpoint_norm: model.norm(&endpoint),
    })
}

/// `∫₀^T e^{λ(T−s)} e^{iωs} ds` for `ωT ∈ 2πℤ`.
fn harmonic_weight(lambda: C64, omega: f64, period: f64) -> C64 {
    let mu = c64(0.0, omega) - lambda;
    let z = mu * period;
    if z.norm() < 1e-3 {
        re(period) * (ONE - z / 2.0 + z * z / 6.0 - z * z * z / 24.0 + z * z * z * z / 120.0)
    } else {
        (ONE - (lambda * period).exp()) / mu
    }
}

fn closed_form(model: &Model, terms: &[(i64, CVec)], period: f64, t0: f64) -> Option<CVec> {
    let spectral = model.spectral();
    let r = model.deflated_dim();
    let mut acc = CVec::zeros(r);
    let mut kernel = CVec::zeros(model.dim());
    match &spectral.kind {
        SpectralKind::Diagonalizable { values, vectors, inverse, .. } => {
            let vc = inverse * model.coprojection();
            let mut coeffs = CVec::zeros(r);
            for (k, fk) in terms {
                let omega = 2.0 * std::f64::consts::PI * *k as f64 / period;
                let phase = c64(0.0, omega * t0).exp();
                let c = &vc * fk;
                for i in 0..r {
                    coeffs[i] += phase * harmonic_weight(values[i], omega, period) * c[i];
                }
            }
            acc += vectors * coeffs;
        }
        SpectralKind::Defective { .. } => {
            let scale = linalg::max_abs(&spectral.t).max(1.0);
            let mono = spectral.exp(period);
            let id = CMat::identity(r, r);
            for (k, fk) in terms {
                let omega = 2.0 * std::f64::consts::PI * *k as f64 / period;
                let z = c64(0.0, omega);
                let gap = (0..r).map(|i| (spectral.t[(i, i)] - z).norm()).fold(f64::INFINITY, f64::min);
                if gap < 1e-12 * scale {
                    return None;
                }
                let phase = (z * t0).exp();
                let rhs = (&id - &mono) * model.deflate(fk);
                acc += spectral.resolvent_apply(z, &rhs) * phase;
            }
        }
    }
    let mut out = model.inflate(&acc);
    if model.has_kernel() {
        for (k, fk) in terms {
            if *k == 0 {
                kernel += fk * re(period);
            }
        }
        out += model.project_kernel(&kernel);
    }
    Some(out)
}

struct Engine<'a> {
    model: &'a Model,
    /// `V^{-1}` composed with the deflating coprojection, when diagonalizable.
    eig_coproj: Option<CMat>,
}

impl<'a> Engine<'a> {
    fn new(model: &'a Model) -> Self {
        let eig_coproj = match &model.spectral().kind {
            SpectralKind::Diagonalizable { inverse, .. } => Some(inverse * model.coprojection()),
            SpectralKind::Defective { .. } => None,
        };
        Self { model, eig_coproj }
    }

    /// Composite Gauss–Legendre value and `∫‖f‖_X` estimate.
    fn quadrature(&self, f: &PeriodicForcing, t0: f64, panels: usize, order: usize) -> (CVec, f64) {
        let model = self.model;
        let period = f.period();
        let tend = t0 + period;
        let (nodes, weights) = linalg::composite_gauss(t0, tend, panels, order);
        let samples: Vec<CVec> = nodes.par_iter().map(|&s| f.eval(s)).collect();
        let mass: f64 = samples.iter().zip(&weights).map(|(v, w)| w * model.norm(v)).sum();
        let r = model.deflated_dim();
        let spectral = model.spectral();
        let y = match (&spectral.kind, &self.eig_coproj) {
            (SpectralKind::Diagonalizable { values, vectors, .. }, Some(vc)) => {
                let contributions: Vec<CVec> = nodes
                    .par_iter()
                    .zip(samples.par_iter())
                    .zip(weights.par_iter())
                    .map(|((&s, fs), &w)| {
                        let mut c = vc * fs;
                        for (ci, l) in c.iter_mut().zip(values) {
                            *ci *= (l * (tend - s)).exp() * w;
                        }
                        c
                    })
                    .collect();
                let mut acc = CVec::zeros(r);
                for c in &contributions {
                    acc += c;
                }
                vectors * acc
            }
            _ => {
                let h = period / panels as f64;
                let step = spectral.exp(h);
                let (x, _) = linalg::gauss_legendre(order);
                let local: Vec<CMat> = x.iter().map(|xk| spectral.exp(h - 0.5 * h * (xk + 1.0))).collect();
                let mut y = CVec::zeros(r);
                for p in 0..panels {
                    let mut add = CVec::zeros(r);
                    for k in 0..order {
                        let idx = p * order + k;
                        add += &local[k] * model.deflate(&samples[idx]) * re(weights[idx]);
                    }
                    y = &step * y + add;
                }
                y
            }
        };
        let mut out = model.inflate(&y);
        if model.has_kernel() {
            let mut total = CVec::zeros(model.dim());
            for (v, w) in samples.iter().zip(&weights) {
                total += v * re(*w);
            }
            out += model.project_kernel(&total);
        }
        (out, mass)
    }
}
