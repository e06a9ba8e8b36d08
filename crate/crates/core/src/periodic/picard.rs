use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Result, SolverError};
use crate::forcing::PeriodicForcing;
use crate::linalg::{self, re, CMat, CVec};
use crate::operator::{Layout, Model};

/// Polynomial nonlinearity `g(u)_i = Σ_p c_p u_{read[i]}^p`, added to component `write[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearCoupling {
    pub read: Vec<usize>,
    pub write: Vec<usize>,
    /// `coefficients[p]` multiplies `u^p`; entries 0 and 1 must vanish.
    pub coefficients: Vec<f64>,
}

impl NonlinearCoupling {
    pub fn new(read: Vec<usize>, write: Vec<usize>, coefficients: Vec<f64>) -> Result<Self> {
        if read.len() != write.len() {
            return Err(SolverError::InvalidNonlinearity("read and write index lists differ in length".into()));
        }
        if coefficients.iter().take(2).any(|c| *c != 0.0) {
            return Err(SolverError::InvalidNonlinearity("g(0) = g'(0) = 0 is required".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::InvalidNonlinearity("non-finite coefficient".into()));
        }
        Ok(Self { read, write, coefficients })
    }

    pub fn scalar(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(vec![0], vec![0], coefficients)
    }

    /// Displacement feeds the velocity equation of a wave layout.
    pub fn wave(model: &Model, coefficients: Vec<f64>) -> Result<Self> {
        match model.layout() {
            Layout::Wave { displacement, velocity, .. } => Self::new(displacement.clone().collect(), velocity.clone().collect(), coefficients),
            _ => Err(SolverError::InvalidNonlinearity("model has no wave layout".into())),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.read.iter().chain(&self.write).any(|&i| i >= dim) {
            return Err(SolverError::InvalidNonlinearity(format!("index out of range for dimension {dim}")));
        }
        Ok(())
    }

    pub fn apply(&self, u: &CVec) -> CVec {
        let mut out = CVec::zeros(u.len());
        for (&r, &w) in self.read.iter().zip(&self.write) {
            let x = u[r];
            let mut acc = re(0.0);
            for c in self.coefficients.iter().rev() {
                acc = acc * x + re(*c);
            }
            out[w] += acc;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub nodes: usize,
    /// Gauss points per panel.
    pub order: usize,
    pub max_iter: usize,
    /// Stop once `sup_i ‖u^{m+1}_i − u^m_i‖_X ≤ tol · sup_i ‖u^{m+1}_i‖_X`.
    pub tol: f64,
    /// Lawson RK4 steps per panel for the periodic residual.
    pub residual_substeps: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { nodes: 64, order: 8, max_iter: 50, tol: 1e-12, residual_substeps: 16 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardReport {
    #[serde(with = "crate::io::cvec_serde")]
    pub w0: CVec,
    #[serde(skip)]
    pub trajectory: Vec<CVec>,
    pub times: Vec<f64>,
    pub iterations: usize,
    pub gaps: Vec<f64>,
    /// `gaps[m] / gaps[m−1]`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// `sup‖S(g(2u) − g(u))‖ / sup‖u‖` at the fixed point, with `S` the forcing-free periodic solve.
    pub lipschitz_estimate: f64,
    /// `‖u(T) − w₀‖_X / ‖w₀‖_X` from an independent Lawson RK4 integration.
    pub periodic_residual: f64,
    /// `‖w₀ − w₀^{lin}‖_X`, distance to the linear solution.
    pub nonlinear_correction: f64,
}

struct Stepper {
    period: f64,
    n: usize,
    weights: Vec<f64>,
    offsets: Vec<f64>,
    step: CMat,
    kernels: Vec<CMat>,
    lu: nalgebra::linalg::LU<linalg::C64, nalgebra::Dyn, nalgebra::Dyn>,
    interp: DMatrix<f64>,
    forcing: Vec<CVec>,
}

impl Stepper {
    fn new(model: &Model, f: &PeriodicForcing, opts: &PicardOptions) -> Self {
        let period = f.period();
        let n = opts.nodes;
        let h = period / n as f64;
        let (x, w) = linalg::gauss_legendre(opts.order);
        let offsets: Vec<f64> = x.iter().map(|xi| 0.5 * h * (xi + 1.0)).collect();
        let weights: Vec<f64> = w.iter().map(|wi| 0.5 * h * wi).collect();
        let kernels = offsets.iter().map(|tau| model.propagator(h - tau)).collect();
        let dim = model.dim();
        let mono = model.propagator(period);
        let lu = (CMat::identity(dim, dim) - mono).lu();
        let q = offsets.len();
        let mut interp = DMatrix::zeros(n * q, n);
        let mut forcing = Vec::with_capacity(n * q);
        for i in 0..n {
            for (k, tau) in offsets.iter().enumerate() {
                let t = i as f64 * h + tau;
                forcing.push(f.eval(t));
                for j in 0..n {
                    interp[(i * q + k, j)] = dirichlet_weight(t / period - j as f64 / n as f64, n);
                }
            }
        }
        Self { period, n, weights, offsets, step: model.propagator(h), kernels, lu, interp, forcing }
    }

    /// Linear periodic solve with source `f + interp(g_samples)`; returns node states.
    fn solve(&self, g_samples: Option<&[CVec]>) -> Option<Vec<CVec>> {
        self.solve_with(g_samples, true)
    }

    fn solve_with(&self, g_samples: Option<&[CVec]>, with_forcing: bool) -> Option<Vec<CVec>> {
        let q = self.offsets.len();
        let dim = self.step.nrows();
        let mut panels = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut acc = CVec::zeros(dim);
            for k in 0..q {
                let row = i * q + k;
                let mut s = if with_forcing { self.forcing[row].clone() } else { CVec::zeros(dim) };
                if let Some(gs) = g_samples {
                    for (j, gj) in gs.iter().enumerate() {
                        let c = self.interp[(row, j)];
                        if c != 0.0 {
                            s.axpy(re(c), gj, re(1.0));
                        }
                    }
                }
                acc += &self.kernels[k] * s * re(self.weights[k]);
            }
            panels.push(acc);
        }
        let mut ft = CVec::zeros(dim);
        for p in &panels {
            ft = &self.step * ft + p;
        }
        let w0 = self.lu.solve(&ft)?;
        let mut states = Vec::with_capacity(self.n);
        let mut u = w0;
        for p in &panels {
            states.push(u.clone());
            u = &self.step * u + p;
        }
        Some(states)
    }
}

/// Periodic trigonometric interpolation weight of sample `j` at phase `x` (in periods).
fn dirichlet_weight(x: f64, n: usize) -> f64 {
    let theta = 2.0 * std::f64::consts::PI * x;
    let half = n / 2;
    let mut s = 1.0;
    let top = if n % 2 == 0 { half - 1 } else { half };
    for k in 1..=top {
        s += 2.0 * (k as f64 * theta).cos();
    }
    if n % 2 == 0 {
        s += (half as f64 * theta).cos();
    }
    s / n as f64
}

/// Periodic solution of `u' = Au + f + g(u)` by the contraction `u ↦ T(f + g(u))`.
pub fn picard_nonlinear(model: &Model, f: &PeriodicForcing, g: &NonlinearCoupling, opts: &PicardOptions) -> Result<PicardReport> {
    if model.has_kernel() {
        return Err(SolverError::KernelModelUnsupported);
    }
    if opts.nodes < 2 || opts.order == 0 || opts.max_iter == 0 {
        return Err(SolverError::InvalidNonlinearity("nodes ≥ 2, order ≥ 1, max_iter ≥ 1 required".into()));
    }
    if f.dim() != model.dim() {
        return Err(crate::operator::OperatorError::DimensionMismatch { expected: model.dim(), got: f.dim() }.into());
    }
    g.check(model.dim())?;
    let stepper = Stepper::new(model, f, opts);
    let singular = || SolverError::SingularMonodromy { sigma_min: 0.0 };
    let linear = stepper.solve(None).ok_or_else(singular)?;
    let sup = |traj: &[CVec]| traj.iter().map(|u| model.norm(u)).fold(0.0, f64::max);
    let mut current = linear.clone();
    let mut gaps = Vec::new();
    let mut ratios = Vec::new();
    let mut above = 0;
    let mut converged = false;
    for iteration in 1..=opts.max_iter {
        let samples: Vec<CVec> = current.iter().map(|u| g.apply(u)).collect();
        let next = stepper.solve(Some(&samples)).ok_or_else(singular)?;
        let gap = current.iter().zip(&next).map(|(a, b)| model.norm(&(b - a))).fold(0.0, f64::max);
        if !gap.is_finite() {
            return Err(SolverError::Diverged { iteration, ratio: f64::INFINITY });
        }
        if let Some(prev) = gaps.last().copied() {
            let ratio = if prev > 0.0 { gap / prev } else { 0.0 };
            ratios.push(ratio);
            above = if ratio >= 1.0 { above + 1 } else { 0 };
            if above >= 3 {
                return Err(SolverError::Diverged { iteration, ratio });
            }
        }
        gaps.push(gap);
        let scale = sup(&next).max(f64::MIN_POSITIVE);
        current = next;
        if gap <= opts.tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        let ratio = ratios.last().copied().unwrap_or(f64::NAN);
        return Err(SolverError::SlowConvergence { n_used: opts.max_iter, spectral_radius: ratio });
    }
    let w0 = current[0].clone();
    let end = lawson_rk4_period(model, f, g, &w0, opts.nodes * opts.residual_substeps);
    let periodic_residual = model.norm(&(end - &w0)) / model.norm(&w0).max(f64::MIN_POSITIVE);
    let h = stepper.period / stepper.n as f64;
    let size = sup(&current);
    let lipschitz_estimate = if size > 0.0 {
        let diff: Vec<CVec> = current.iter().map(|u| g.apply(&(u * re(2.0))) - g.apply(u)).collect();
        sup(&stepper.solve_with(Some(&diff), false).ok_or_else(singular)?) / size
    } else {
        0.0
    };
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(PicardReport {
        nonlinear_correction: model.norm(&(&w0 - &linear[0])),
        w0,
        trajectory: current,
        times: (0..stepper.n).map(|i| i as f64 * h).collect(),
        iterations: gaps.len(),
        gaps,
        ratios,
        max_ratio,
        lipschitz_estimate,
        periodic_residual,
    })
}

/// One period of `u' = Au + f + g(u)` from `u0` by integrating-factor RK4.
pub fn lawson_rk4_period(model: &Model, f: &PeriodicForcing, g: &NonlinearCoupling, u0: &CVec, steps: usize) -> CVec {
    let h = f.period() / steps as f64;
    let full = model.propagator(h);
    let half = model.propagator(0.5 * h);
    let rhs = |t: f64, u: &CVec| f.eval(t) + g.apply(u);
    let mut u = u0.clone();
    for n in 0..steps {
        let t = n as f64 * h;
        let k1 = rhs(t, &u);
        let base = &half * &u;
        let k2 = rhs(t + 0.5 * h, &(&base + &half * &k1 * re(0.5 * h)));
        let k3 = rhs(t + 0.5 * h, &(&base + &k2 * re(0.5 * h)));
        let k4 = rhs(t + h, &(&full * &u + &half * &k3 * re(h)));
        u = &full * &u + (&full * k1 + &half * (k2 + k3) * re(2.0) + k4) * re(h / 6.0);
    }
    u
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub converged: bool,
    pub iterations: usize,
    pub max_ratio: f64,
    pub lipschitz_estimate: Option<f64>,
    pub periodic_residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonSweep {
    pub entries: Vec<SweepEntry>,
    /// Smallest amplitude at which the iteration failed.
    pub threshold: Option<f64>,
}

/// Runs `picard_nonlinear` with forcing `ε f` for each `ε`.
pub fn picard_epsilon_sweep(model: &Model, f: &PeriodicForcing, g: &NonlinearCoupling, epsilons: &[f64], opts: &PicardOptions) -> Result<EpsilonSweep> {
    let mut entries = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let scaled = PeriodicForcing::linear_combination(vec![(re(eps), f.clone())])?;
        let entry = match picard_nonlinear(model, &scaled, g, opts) {
            Ok(r) => SweepEntry { epsilon: eps, converged: true, iterations: r.iterations, max_ratio: r.max_ratio, lipschitz_estimate: Some(r.lipschitz_estimate), periodic_residual: Some(r.periodic_residual), error: None },
            Err(e @ (SolverError::Diverged { .. } | SolverError::SlowConvergence { .. })) => {
                let ratio = match e {
                    SolverError::Diverged { ratio, .. } => ratio,
                    SolverError::SlowConvergence { spectral_radius, .. } => spectral_radius,
                    _ => f64::NAN,
                };
                SweepEntry { epsilon: eps, converged: false, iterations: 0, max_ratio: ratio, lipschitz_estimate: None, periodic_residual: None, error: Some(e.name()) }
            }
            Err(e) => return Err(e),
        };
        entries.push(entry);
    }
    let threshold = entries.iter().filter(|e| !e.converged).map(|e| e.epsilon).fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))));
    Ok(EpsilonSweep { entries, threshold })
}
