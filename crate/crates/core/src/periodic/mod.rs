//! Periodic initial data `w₀` with `(I − e^{AT}) w₀ = F_T`, orbit checks and variants.

mod boundary;
mod picard;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forcing::{duhamel_ft, duhamel_window, DuhamelOptions, ForcingError, PeriodicForcing};
use crate::linalg::{self, c64, re, CMat, CVec, C64};
use crate::operator::{Model, OperatorError, SpectralKind};

pub use boundary::{admissibility_constant, boundary_periodic_solve, BoundaryReport};
pub use picard::{lawson_rk4_period, picard_epsilon_sweep, picard_nonlinear, EpsilonSweep, NonlinearCoupling, PicardOptions, PicardReport, SweepEntry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("series did not reach tolerance after {n_used} periods (spectral radius {spectral_radius})")]
    SlowConvergence { n_used: usize, spectral_radius: f64 },
    #[error("forcing excites the kernel: ‖Π₀F_T‖ = {magnitude:e}")]
    KernelObstruction { magnitude: f64 },
    #[error("I − e^(AT) is singular (smallest singular value {sigma_min:e})")]
    SingularMonodromy { sigma_min: f64 },
    #[error("harmonic {k} lies on the spectrum (distance {distance:e})")]
    ResonantHarmonic { k: i64, distance: f64 },
    #[error("harmonic balance needs a Fourier forcing")]
    NotFourier,
    #[error("model has no control operator")]
    MissingControl,
    #[error("Picard iteration diverged at iteration {iteration} (ratio {ratio})")]
    Diverged { iteration: usize, ratio: f64 },
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),
    #[error("nonlinear solver needs a kernel-free model")]
    KernelModelUnsupported,
    #[error(transparent)]
    Forcing(#[from] ForcingError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl SolverError {
    pub fn name(&self) -> String {
        let local = match self {
            Self::SlowConvergence { .. } => "SlowConvergence",
            Self::KernelObstruction { .. } => "KernelObstruction",
            Self::SingularMonodromy { .. } => "SingularMonodromy",
            Self::ResonantHarmonic { .. } => "ResonantHarmonic",
            Self::NotFourier => "NotFourier",
            Self::MissingControl => "MissingControl",
            Self::Diverged { .. } => "Diverged",
            Self::InvalidNonlinearity(_) => "InvalidNonlinearity",
            Self::KernelModelUnsupported => "KernelModelUnsupported",
            Self::Forcing(e) => return e.name(),
            Self::Operator(e) => return format!("operator_core::{}", e.name()),
        };
        format!("periodic_solver::{local}")
    }
}

type Result<T> = std::result::Result<T, SolverError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveMethod {
    Series { n_used: usize },
    Direct,
    HarmonicBalance,
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicSolveReport {
    #[serde(with = "crate::io::cvec_serde")]
    pub w0: CVec,
    pub method: SolveMethod,
    /// `‖e^{AT}w₀ + F_T − w₀‖_X`.
    pub residual_per_period: Vec<f64>,
    pub forcing_norm: f64,
    pub norm_ratio: f64,
    pub tail_estimate: Option<f64>,
    /// Smallest singular value of `I − e^{AT}` on the deflated block.
    pub condition: f64,
    /// `‖Π₀F_T‖_X`.
    pub kernel_offset: f64,
    #[serde(with = "crate::io::cvec_serde")]
    pub ft: CVec,
    /// `(k, ‖R(iω_k, A)‖)` for harmonic balance.
    pub amplification: Vec<(i64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Series stops when `‖e^{NAT}F_T‖ ≤ tol ‖F_T‖`.
    pub tol: f64,
    pub n_max: usize,
    /// Relative size of `Π₀F_T` tolerated on kernel models.
    pub kernel_tol: f64,
    pub duhamel: DuhamelOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-14, n_max: 100_000, kernel_tol: 1e-9, duhamel: DuhamelOptions::default() }
    }
}

struct Prepared {
    ft: CVec,
    deflated: CVec,
    kernel_offset: f64,
}

fn prepare(model: &Model, f: &PeriodicForcing, opts: &SolverOptions) -> Result<Prepared> {
    let ft = duhamel_ft(model, f, &opts.duhamel)?;
    let kernel_offset = if model.has_kernel() { model.norm(&model.project_kernel(&ft)) } else { 0.0 };
    if kernel_offset > opts.kernel_tol * model.norm(&ft).max(f64::MIN_POSITIVE) {
        return Err(SolverError::KernelObstruction { magnitude: kernel_offset });
    }
    let deflated = model.deflate(&ft);
    Ok(Prepared { ft, deflated, kernel_offset })
}

fn finish(model: &Model, f: &PeriodicForcing, prep: Prepared, y: CVec, method: SolveMethod, tail: Option<f64>, condition: f64, amplification: Vec<(i64, f64)>) -> Result<PeriodicSolveReport> {
    let w0 = model.inflate(&y);
    let period = f.period();
    let next = model.propagate(period, &w0)? + &prep.ft;
    let residual = model.norm(&(next - &w0));
    let forcing_norm = f.class_norm(model.space());
    let norm_ratio = model.norm(&w0) / forcing_norm.max(f64::MIN_POSITIVE);
    Ok(PeriodicSolveReport {
        w0,
        method,
        residual_per_period: vec![residual],
        forcing_norm,
        norm_ratio,
        tail_estimate: tail,
        condition,
        kernel_offset: prep.kernel_offset,
        ft: prep.ft,
        amplification,
    })
}

/// Smallest singular value of `I − e^{AT}` on the deflated block.
fn monodromy_condition(model: &Model, period: f64) -> f64 {
    match &model.spectral().kind {
        SpectralKind::Diagonalizable { values, vectors, inverse, .. } => {
            let gaps: Vec<C64> = values.iter().map(|l| re(1.0) - (l * period).exp()).collect();
            let smallest = gaps.iter().map(|g| g.norm()).fold(f64::INFINITY, f64::min);
            if gaps.is_empty() {
                return 1.0;
            }
            if smallest < 1e-300 {
                return smallest;
            }
            let scale = |v: CVec, conj: bool| -> CVec { CVec::from_iterator(v.len(), v.iter().zip(&gaps).map(|(x, g)| x / if conj { g.conj() } else { *g })) };
            let inv = linalg::top_singular_value(values.len(), |v| vectors * scale(inverse * v, false), |v| inverse.ad_mul(&scale(vectors.ad_mul(v), true)));
            1.0 / inv
        }
        SpectralKind::Defective { .. } => {
            let mono = model.deflated_propagator(period);
            let r = mono.nrows();
            linalg::singular_values(&(CMat::identity(r, r) - mono)).last().copied().unwrap_or(1.0)
        }
    }
}

/// `w₀ = Σ_n e^{nAT} F_T` on the deflated block.
pub fn periodic_w0_series(model: &Model, f: &PeriodicForcing, opts: &SolverOptions) -> Result<PeriodicSolveReport> {
    let prep = prepare(model, f, opts)?;
    let period = f.period();
    let condition = monodromy_condition(model, period);
    let spectral = model.spectral();
    let dense = (!spectral.is_diagonalizable()).then(|| model.deflated_propagator(period));
    let step = |v: &CVec| match &dense {
        Some(m) => m * v,
        None => spectral.exp_apply(period, v),
    };
    let scale = prep.deflated.norm();
    let mut term = prep.deflated.clone();
    let mut sum = term.clone();
    let mut n = 0;
    while term.norm() > opts.tol * scale {
        if n >= opts.n_max {
            return Err(SolverError::SlowConvergence { n_used: n, spectral_radius: model.deflated_spectral_radius(period) });
        }
        term = step(&term);
        sum += &term;
        n += 1;
    }
    let rho = model.deflated_spectral_radius(period);
    let tail = term.norm() * rho / (1.0 - rho).max(f64::MIN_POSITIVE);
    finish(model, f, prep, sum, SolveMethod::Series { n_used: n }, Some(tail), condition, Vec::new())
}

/// Dense solve of `(I − e^{AT}) w₀ = F_T` on the deflated block.
pub fn periodic_w0_direct(model: &Model, f: &PeriodicForcing, opts: &SolverOptions) -> Result<PeriodicSolveReport> {
    let prep = prepare(model, f, opts)?;
    let period = f.period();
    let condition = monodromy_condition(model, period);
    let mono = model.deflated_propagator(period);
    let mono_norm = linalg::top_singular_value(mono.nrows(), |v| &mono * v, |v| mono.ad_mul(v));
    if condition < 1e-12 * mono_norm.max(1.0) {
        return Err(SolverError::SingularMonodromy { sigma_min: condition });
    }
    let r = mono.nrows();
    let id = CMat::identity(r, r);
    let y = (&id - &mono).lu().solve(&prep.deflated).ok_or(SolverError::SingularMonodromy { sigma_min: condition })?;
    finish(model, f, prep, y, SolveMethod::Direct, None, condition, Vec::new())
}

/// Closed-form periodic trajectory `u(t) = Σ_k e^{iω_k t} R(iω_k, A) f̂_k` plus kernel offsets.
#[derive(Clone, Debug)]
pub struct HarmonicTrajectory {
    pub period: f64,
    pub terms: Vec<(i64, CVec)>,
    /// `Π₀ f̂_k / (iω_k)`; enters as `(e^{iω_k t} − 1)` so that `Π₀ u(0) = 0`.
    pub kernel_terms: Vec<(i64, CVec)>,
}

impl HarmonicTrajectory {
    pub fn eval(&self, t: f64) -> CVec {
        let dim = self.terms.first().map_or(0, |x| x.1.len());
        let mut u = CVec::zeros(dim);
        for (k, v) in &self.terms {
            let w = 2.0 * std::f64::consts::PI * *k as f64 / self.period;
            u += v * c64(0.0, w * t).exp();
        }
        for (k, v) in &self.kernel_terms {
            let w = 2.0 * std::f64::consts::PI * *k as f64 / self.period;
            u += v * (c64(0.0, w * t).exp() - re(1.0));
        }
        u
    }
}

/// `w₀ = Σ_k R(iω_k, A) f̂_k` for trigonometric forcings.
pub fn periodic_w0_harmonic_balance(model: &Model, f: &PeriodicForcing, opts: &SolverOptions) -> Result<(PeriodicSolveReport, HarmonicTrajectory)> {
    let terms = f.fourier_terms().ok_or(SolverError::NotFourier)?;
    let period = f.period();
    let spectral = model.spectral();
    let r = model.deflated_dim();
    let mut y = CVec::zeros(r);
    let mut traj = Vec::new();
    let mut kernel_terms = Vec::new();
    let mut amplification = Vec::new();
    for (k, fk) in terms {
        let omega = f.omega(*k);
        let amp = model.resolvent_norm(omega).map_err(|e| match e {
            OperatorError::OnSpectrum { sigma_min, .. } => SolverError::ResonantHarmonic { k: *k, distance: sigma_min },
            other => other.into(),
        })?;
        amplification.push((*k, amp));
        let yk = spectral.resolvent_apply(c64(0.0, omega), &model.deflate(fk));
        y += &yk;
        traj.push((*k, model.inflate(&yk)));
        if model.has_kernel() {
            let pk = model.project_kernel(fk);
            let size = model.norm(&pk);
            if *k == 0 {
                if size > opts.kernel_tol * model.norm(fk).max(f64::MIN_POSITIVE) {
                    return Err(SolverError::KernelObstruction { magnitude: size * period });
                }
            } else if size > 0.0 {
                kernel_terms.push((*k, pk / c64(0.0, omega)));
            }
        }
    }
    let prep = prepare(model, f, opts)?;
    let condition = monodromy_condition(model, period);
    let report = finish(model, f, prep, y, SolveMethod::HarmonicBalance, None, condition, amplification)?;
    Ok((report, HarmonicTrajectory { period, terms: traj, kernel_terms }))
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitCheck {
    /// `‖u(nT) − w₀‖_X`, `n = 1..=n_periods`.
    pub residuals: Vec<f64>,
    /// Largest relative gap between stepped states and `e^{nAT}w₀ + Σ_{m<n} e^{mAT}F_T`.
    pub closed_form_discrepancy: f64,
}

/// Steps `n_periods` periods from `w0` with a fresh Duhamel quadrature on each window `[nT, (n+1)T]`.
pub fn verify_orbit(model: &Model, f: &PeriodicForcing, w0: &CVec, n_periods: usize, duhamel: &DuhamelOptions) -> Result<OrbitCheck> {
    let period = f.period();
    let quad = DuhamelOptions { method: crate::forcing::DuhamelMethod::Quadrature, ..duhamel.clone() };
    let ft = duhamel_ft(model, f, duhamel)?;
    let mut u = w0.clone();
    let mut residuals = Vec::with_capacity(n_periods);
    let mut discrepancy: f64 = 0.0;
    let scale = model.norm(w0).max(model.norm(&ft)).max(f64::MIN_POSITIVE);
    for n in 1..=n_periods {
        let window = duhamel_window(model, f, (n - 1) as f64 * period, &quad)?;
        u = model.propagate(period, &u)? + window.value;
        residuals.push(model.norm(&(&u - w0)));
        let mut closed = model.propagate(n as f64 * period, w0)?;
        for m in 0..n {
            closed += model.propagate(m as f64 * period, &ft)?;
        }
        discrepancy = discrepancy.max(model.norm(&(&closed - &u)) / scale);
    }
    Ok(OrbitCheck { residuals, closed_form_discrepancy: discrepancy })
}

/// `‖u(nT) − w₀‖_X` for `n = 0..=n_periods` from an arbitrary start `v0`.
pub fn convergence_gap(model: &Model, f: &PeriodicForcing, w0: &CVec, v0: &CVec, n_periods: usize, duhamel: &DuhamelOptions) -> Result<Vec<f64>> {
    let ft = duhamel_ft(model, f, duhamel)?;
    let period = f.period();
    let mut u = v0.clone();
    let mut gaps = vec![model.norm(&(&u - w0))];
    for _ in 0..n_periods {
        u = model.propagate(period, &u)? + &ft;
        gaps.push(model.norm(&(&u - w0)));
    }
    Ok(gaps)
}

/// Geometric-mean contraction `(gap[hi]/gap[lo])^{1/(hi−lo)}`.
pub fn windowed_ratio(gaps: &[f64], lo: usize, hi: usize) -> f64 {
    (gaps[hi] / gaps[lo]).powf(1.0 / (hi - lo) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use std::f64::consts::PI;

    fn scalar_case() -> (Model, PeriodicForcing) {
        (Model::scalar(re(-1.0)), PeriodicForcing::constant(2.0 * PI, CVec::from_element(1, ONE)).unwrap())
    }

    #[test]
    fn scalar_series_direct_harmonic() {
        let (m, f) = scalar_case();
        let opts = SolverOptions::default();
        let s = periodic_w0_series(&m, &f, &opts).unwrap();
        let d = periodic_w0_direct(&m, &f, &opts).unwrap();
        let (h, traj) = periodic_w0_harmonic_balance(&m, &f, &opts).unwrap();
        for w in [&s.w0, &d.w0, &h.w0] {
            assert!((w[0] - ONE).norm() < 1e-12);
        }
        assert!((traj.eval(1.3)[0] - ONE).norm() < 1e-12);
        assert!(s.residual_per_period[0] < 1e-14);
    }

    #[test]
    fn scalar_harmonic_tone() {
        let m = Model::scalar(re(-1.0));
        let f = PeriodicForcing::fourier(2.0 * PI, vec![(1, CVec::from_element(1, ONE))]).unwrap();
        let (h, _) = periodic_w0_harmonic_balance(&m, &f, &SolverOptions::default()).unwrap();
        assert!((h.w0[0] - ONE / c64(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn undamped_rotation_is_singular() {
        let m = Model::scalar(c64(0.0, 1.0));
        let f = PeriodicForcing::constant(2.0 * PI, CVec::from_element(1, ONE)).unwrap();
        let e = periodic_w0_direct(&m, &f, &SolverOptions::default()).unwrap_err();
        assert_eq!(e.name(), "periodic_solver::SingularMonodromy");
        let g = PeriodicForcing::fourier(2.0 * PI, vec![(1, CVec::from_element(1, ONE))]).unwrap();
        let e = periodic_w0_harmonic_balance(&m, &g, &SolverOptions::default()).unwrap_err();
        assert_eq!(e.name(), "periodic_solver::ResonantHarmonic");
    }

    #[test]
    fn scalar_orbit_residuals() {
        let (m, f) = scalar_case();
        let w0 = CVec::from_element(1, ONE);
        let check = verify_orbit(&m, &f, &w0, 20, &DuhamelOptions::default()).unwrap();
        assert!(check.residuals.iter().all(|r| *r < 1e-12));
        assert!(check.closed_form_discrepancy < 1e-12);
    }

    #[test]
    fn start_at_orbit_has_no_gap() {
        let (m, f) = scalar_case();
        let w0 = CVec::from_element(1, ONE);
        let gaps = convergence_gap(&m, &f, &w0, &w0, 5, &DuhamelOptions::default()).unwrap();
        assert!(gaps.iter().all(|g| *g < 1e-14));
    }
}
