//! Resonant growth on a damped Schrödinger block of the sphere.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forcing::{adaptive_integral, duhamel_ft, DuhamelOptions, ForcingError, PeriodicForcing};
use crate::io::Table;
use crate::linalg::{self, c64, CVec};
use crate::models::{associated_legendre_normalized, build_sphere_schrodinger, equatorial_harmonic, DampingProfile, ModelError, SphereBlockModel};
use crate::operator::OperatorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResonanceError {
    #[error("backward propagation norm {norm:e} exceeds 1e6")]
    BackwardGrowthExcessive { norm: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl ResonanceError {
    pub fn name(&self) -> String {
        match self {
            Self::BackwardGrowthExcessive { .. } => "resonance_lab::BackwardGrowthExcessive".into(),
            Self::InvalidInput(_) => "resonance_lab::InvalidInput".into(),
            Self::Model(e) => e.name(),
            Self::Forcing(e) => e.name(),
            Self::Operator(e) => format!("operator_core::{}", e.name()),
        }
    }
}

type Result<T> = std::result::Result<T, ResonanceError>;

/// Extra degrees kept above `j` by default.
pub const DEFAULT_TRUNCATION: usize = 60;

/// `d = −log(sin r)` for a polar cap damping vanishing on `|x₃| ≤ cos r`.
pub fn cap_rate(damping: &DampingProfile) -> Option<f64> {
    match damping {
        DampingProfile::AxisymmetricCap { cutoff, .. } => Some(-(1.0 - cutoff * cutoff).sqrt().ln()),
        _ => None,
    }
}

/// `‖aΦ_j‖_{L²(S²)}` by adaptive quadrature in `μ = x₃`.
pub fn concentration_norm(damping: &DampingProfile, j: usize) -> f64 {
    let integrand = |mu: f64| {
        let p = associated_legendre_normalized(j, j, mu)[0];
        let a = damping.eval(mu);
        a * a * p * p
    };
    damping.support(-1.0, 1.0).iter().map(|(lo, hi)| adaptive_integral(&integrand, *lo, *hi, 1e-14)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub j: usize,
    /// `‖aΦ_j‖` in `L²(S²)`.
    pub norm: f64,
    /// `‖M_aΦ_j‖` on the truncated block.
    pub block_norm: f64,
    /// Relative change of `block_norm` when the quadrature node count is doubled.
    pub refinement_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationScan {
    pub rows: Vec<ConcentrationRow>,
    /// Slope of `log ‖aΦ_j‖` against `j`.
    pub slope: f64,
    /// Rate `c` in `‖aΦ_j‖ ≈ C e^{−c√λ_j}`.
    pub c: f64,
    pub r2: f64,
    /// `d = −log(sin r)` when the damping is a cap.
    pub predicted_rate: Option<f64>,
}

/// `‖aΦ_j‖` for each `j`, with fits against `j` and `√(j(j+1))`.
pub fn concentration_scan(extra_degrees: usize, damping: &DampingProfile, j_list: &[usize]) -> Result<ConcentrationScan> {
    if j_list.len() < 2 {
        return Err(ResonanceError::InvalidInput("need at least two degrees".into()));
    }
    let rows: Vec<ConcentrationRow> = j_list
        .iter()
        .map(|&j| {
            let block = build_sphere_schrodinger(j + extra_degrees, j, damping, None)?;
            let phi = equatorial_harmonic(&block, j)?;
            let block_norm = (&block.damping_matrix * &phi).norm();
            let fine = build_sphere_schrodinger(j + extra_degrees, j, damping, Some(2 * block.quadrature_nodes))?;
            let fine_norm = (&fine.damping_matrix * &phi).norm();
            Ok(ConcentrationRow { j, norm: concentration_norm(damping, j), block_norm, refinement_change: (fine_norm - block_norm).abs() / block_norm.max(f64::MIN_POSITIVE) })
        })
        .collect::<Result<_>>()?;
    let logs: Vec<f64> = rows.iter().map(|r| r.norm.ln()).collect();
    let js: Vec<f64> = rows.iter().map(|r| r.j as f64).collect();
    let roots: Vec<f64> = rows.iter().map(|r| ((r.j * (r.j + 1)) as f64).sqrt()).collect();
    let (slope, _, r2) = linalg::linear_fit(&js, &logs);
    let (cs, _, _) = linalg::linear_fit(&roots, &logs);
    Ok(ConcentrationScan { rows, slope, c: -cs, r2, predicted_rate: cap_rate(damping) })
}

#[derive(Clone, Debug)]
pub struct ResonantForcing {
    pub forcing: PeriodicForcing,
    pub c_j: f64,
    pub period: f64,
    /// `sup_{s∈[0,T]} ‖e^{(s−T)A}Φ_j‖_{H^k}`.
    pub orbit_bound: f64,
    /// `‖e^{−TA}‖` on the block.
    pub backward_norm: f64,
    /// `‖f‖_{L¹(0,T;H^k)}`.
    pub l1_norm: f64,
}

fn hk_norm(block: &SphereBlockModel, weights: &[f64], v: &CVec) -> f64 {
    debug_assert_eq!(weights.len(), block.size());
    v.iter().zip(weights).map(|(x, w)| x.norm_sqr() * w * w).sum::<f64>().sqrt()
}

/// `f(s) = C_j e^{(s−T)A}Φ_j / T`, scaled so that `‖f‖_{L¹H^k} ≤ 1`.
pub fn resonant_forcing(block: &SphereBlockModel, j: usize, k: f64, period: f64) -> Result<ResonantForcing> {
    let mut model = block.model.clone();
    model.set_group_allowed(true);
    let backward_norm = model.backward_growth(period);
    if backward_norm > 1e6 {
        return Err(ResonanceError::BackwardGrowthExcessive { norm: backward_norm });
    }
    let phi = equatorial_harmonic(block, j)?;
    let weights = block.sobolev_weights(k);
    let samples = 257;
    let orbit_bound = (0..samples)
        .map(|i| {
            let tau = period * i as f64 / (samples - 1) as f64;
            model.propagate(-tau, &phi).map(|v| hk_norm(block, &weights, &v))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let c_j = 1.0 / orbit_bound;
    let model = Arc::new(model);
    let forcing = PeriodicForcing::pullback(model.clone(), phi, c_j, period)?;
    let norm_at = |s: f64| hk_norm(block, &weights, &forcing.eval(s));
    let l1_norm = adaptive_integral(&norm_at, 0.0, period, 1e-12);
    Ok(ResonantForcing { forcing, c_j, period, orbit_bound, backward_norm, l1_norm })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthExperiment {
    pub j: usize,
    pub jmax: usize,
    pub k: f64,
    pub period: f64,
    pub c_j: f64,
    pub n_grid: Vec<usize>,
    /// `‖u(nT)‖_{L²}`.
    pub norms: Vec<f64>,
    /// `C_j n (1 − nT e^{−c√λ_j})`.
    pub lower_bound_curve: Vec<f64>,
    pub fitted_c: f64,
    /// `‖M_aΦ_j‖`.
    pub concentration: f64,
    /// `‖(e^{mTA} − e^{mTA₀})Φ_j‖`.
    pub error_terms: Vec<f64>,
    /// `mT‖M_aΦ_j‖`.
    pub error_bounds: Vec<f64>,
    /// `⌈λ_j^{k/2+1}⌉`.
    pub n_j: f64,
    /// `‖F_T − C_jΦ_j‖ / C_j`.
    pub ft_error: f64,
    /// Energy share of `u(n_max T)` in the top 10 degrees.
    pub leakage: f64,
    pub forcing_l1_norm: f64,
}

impl GrowthExperiment {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["n", "norm", "lower_bound", "error_term", "error_bound"], &["periods", "L2", "L2", "L2", "L2"]);
        for i in 0..self.n_grid.len() {
            t.push(vec![self.n_grid[i] as f64, self.norms[i], self.lower_bound_curve[i], self.error_terms[i], self.error_bounds[i]]);
        }
        t
    }
}

/// Simulates `u((n+1)T) = e^{AT}u(nT) + F_T` from rest for `n ≤ n_max` under the resonant forcing.
///
/// `c` overrides the concentration rate; by default it is read off `‖M_aΦ_j‖`.
pub fn growth_experiment(block: &SphereBlockModel, j: usize, k: f64, n_max: usize, period: f64, c: Option<f64>) -> Result<GrowthExperiment> {
    if n_max == 0 {
        return Err(ResonanceError::InvalidInput("n_max must be positive".into()));
    }
    let rf = resonant_forcing(block, j, k, period)?;
    let model = &block.model;
    let phi = equatorial_harmonic(block, j)?;
    let ft = duhamel_ft(model, &rf.forcing, &DuhamelOptions::default())?;
    let ft_error = (&ft - &phi * c64(rf.c_j, 0.0)).norm() / rf.c_j;
    let mono = model.propagator(period);
    let concentration = (&block.damping_matrix * &phi).norm();
    let lambda = (j * (j + 1)) as f64;
    let fitted_c = c.unwrap_or_else(|| -concentration.ln() / lambda.sqrt());
    let rate = (-fitted_c * lambda.sqrt()).exp();
    let mut u = CVec::zeros(block.size());
    let mut free = phi.clone();
    let (mut norms, mut lower, mut errs, mut bounds) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for n in 1..=n_max {
        u = &mono * u + &ft;
        norms.push(u.norm());
        let nf = n as f64;
        lower.push(rf.c_j * nf * (1.0 - nf * period * rate));
        free = &mono * free;
        let reference = &phi * c64(0.0, lambda * nf * period).exp();
        errs.push((&free - reference).norm());
        bounds.push(nf * period * concentration);
    }
    let total = u.norm_squared();
    let top: f64 = u.iter().rev().take(10).map(|x| x.norm_sqr()).sum();
    Ok(GrowthExperiment {
        j,
        jmax: block.jmax,
        k,
        period,
        c_j: rf.c_j,
        n_grid: (1..=n_max).collect(),
        norms,
        lower_bound_curve: lower,
        fitted_c,
        concentration,
        error_terms: errs,
        error_bounds: bounds,
        n_j: lambda.powf(0.5 * k + 1.0).ceil(),
        ft_error,
        leakage: if total > 0.0 { top / total } else { 0.0 },
        forcing_l1_norm: rf.l1_norm,
    })
}

/// `2π(1 + 1/(2λ_j))`, where the monodromy sends `Φ_j` to about `−Φ_j`.
pub fn detuned_period(j: usize) -> f64 {
    2.0 * PI * (1.0 + 1.0 / (2.0 * (j * (j + 1)) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undamped_growth_is_linear() {
        let j = 3;
        let block = build_sphere_schrodinger(j + 4, j, &DampingProfile::constant(0.0), None).unwrap();
        let g = growth_experiment(&block, j, 0.0, 20, 2.0 * PI, Some(1.0)).unwrap();
        for (n, v) in g.n_grid.iter().zip(&g.norms) {
            assert!((v - *n as f64).abs() < 1e-10 * *n as f64);
        }
        assert!(g.ft_error < 1e-12);
        assert!(g.error_terms.iter().all(|e| *e < 1e-10));
    }

    #[test]
    fn detuned_period_bounds_response() {
        let j = 3;
        let block = build_sphere_schrodinger(j + 4, j, &DampingProfile::constant(0.0), None).unwrap();
        let g = growth_experiment(&block, j, 0.0, 50, detuned_period(j), Some(1.0)).unwrap();
        let sup = g.norms.iter().copied().fold(0.0, f64::max);
        assert!(sup <= 1.0 + 1e-9);
    }
}
