//! Decay envelopes, resolvent scans and the fits relating them.

mod mlog;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{IoError, Table};
use crate::linalg::{self, c64, re, CMat, CVec, C64};
use crate::operator::{Model, OperatorError, SpectralKind, StateSpace};

pub use mlog::{mlog_bound_curve, pchip_eval, MlogResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("log-log fit is poor (r² = {r2:.4}, slope {slope:.4})")]
    PoorFit { r2: f64, slope: f64 },
    #[error("fit window holds {points} points, at least 10 needed")]
    InsufficientPoints { points: usize },
    #[error("M_log decreases by {violation:e}")]
    NonMonotone { violation: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl StabilityError {
    pub fn name(&self) -> String {
        let local = match self {
            Self::PoorFit { .. } => "PoorFit",
            Self::InsufficientPoints { .. } => "InsufficientPoints",
            Self::NonMonotone { .. } => "NonMonotone",
            Self::InvalidGrid(_) => "InvalidGrid",
            Self::Operator(e) => return format!("operator_core::{}", e.name()),
        };
        format!("stability_lab::{local}")
    }
}

type Result<T> = std::result::Result<T, StabilityError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanKind {
    DecayEnvelope { alpha: f64 },
    /// `‖e^{tA}A^{-1}‖_X`, optionally restricted to `|Im λ| ≤ band`.
    InverseDecay { band: Option<f64> },
    Resolvent,
    Mlog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub exponent: f64,
    pub constant: f64,
    pub window: (f64, f64),
    pub r2: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub kind: ScanKind,
    pub abscissae: Vec<f64>,
    /// Envelope values, or the running maximum `M(η)` for resolvent scans.
    pub values: Vec<f64>,
    /// Pointwise values where these differ from `values`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pointwise: Vec<f64>,
    pub fit: Option<Fit>,
}

impl ScanResult {
    pub fn to_table(&self) -> Table {
        let (x, xu, y) = match self.kind {
            ScanKind::Resolvent | ScanKind::Mlog => ("eta", "1/time", "value"),
            _ => ("t", "time", "value"),
        };
        let mut t = if self.pointwise.is_empty() { Table::new(&[x, y], &[xu, "1"]) } else { Table::new(&[x, y, "pointwise"], &[xu, "1", "1"]) };
        for i in 0..self.abscissae.len() {
            let mut row = vec![self.abscissae[i], self.values[i]];
            if !self.pointwise.is_empty() {
                row.push(self.pointwise[i]);
            }
            t.push(row);
        }
        t
    }

    /// Inverse of `to_table`; the kind and fit travel separately in JSON.
    pub fn from_table(kind: ScanKind, fit: Option<Fit>, table: &Table) -> std::result::Result<Self, IoError> {
        let abscissae = table.rows.iter().map(|r| r[0]).collect();
        let values = table.rows.iter().map(|r| r[1]).collect();
        let pointwise = if table.columns.len() > 2 { table.rows.iter().map(|r| r[2]).collect() } else { Vec::new() };
        Ok(Self { kind, abscissae, values, pointwise, fit })
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(StabilityError::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(StabilityError::InvalidGrid("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `‖e^{tÃ} D R‖₂` on the deflated block for each `t`, where `D` is `Ã^{-1}` if `invert` and `R = right`.
fn family_norms(model: &Model, times: &[f64], right: &CMat, invert: bool, band: Option<f64>) -> Result<Vec<f64>> {
    let spectral = model.spectral();
    let r = spectral.dim();
    if spectral.normal {
        // Unitary eigenbasis: `right` is diagonal there whenever it is a function of Ã.
        let d = spectral.q.adjoint() * right * &spectral.q;
        let off = linalg::max_abs(&(&d - CMat::from_diagonal(&d.diagonal())));
        if off <= 1e-12 * linalg::max_abs(&d).max(f64::MIN_POSITIVE) {
            let values = spectral.eigenvalues();
            return Ok(times
                .iter()
                .map(|&t| {
                    values
                        .iter()
                        .enumerate()
                        .filter(|(_, l)| band.is_none_or(|b| l.im.abs() <= b))
                        .map(|(i, l)| {
                            let e = (l * t).exp() * d[(i, i)];
                            if invert { (e / l).norm() } else { e.norm() }
                        })
                        .fold(0.0, f64::max)
                })
                .collect());
        }
    }
    match &spectral.kind {
        SpectralKind::Diagonalizable { values, vectors, inverse, .. } => {
            let c = inverse * right;
            let ca = c.adjoint();
            let va = vectors.adjoint();
            let keep: Vec<bool> = values.iter().map(|l| band.is_none_or(|b| l.im.abs() <= b)).collect();
            Ok(times
                .par_iter()
                .map(|&t| {
                    let d: Vec<C64> = values
                        .iter()
                        .zip(&keep)
                        .map(|(l, &k)| if !k { C64::new(0.0, 0.0) } else if invert { (l * t).exp() / l } else { (l * t).exp() })
                        .collect();
                    linalg::top_singular_value(
                        r,
                        |v| {
                            let mut w = &c * v;
                            w.iter_mut().zip(&d).for_each(|(x, s)| *x *= s);
                            vectors * w
                        },
                        |v| {
                            let mut w = &va * v;
                            w.iter_mut().zip(&d).for_each(|(x, s)| *x *= s.conj());
                            &ca * w
                        },
                    )
                })
                .collect())
        }
        SpectralKind::Defective { .. } => {
            let base = if invert {
                let inv = spectral.a.clone().lu().try_inverse().ok_or(OperatorError::FactorizationFailed)?;
                inv * right
            } else {
                right.clone()
            };
            Ok(times.par_iter().map(|&t| linalg::spectral_norm(&(spectral.exp(t) * &base))).collect())
        }
    }
}

/// `S = (2(I + P*P))^{-1/2}` with `P = (−Ã)^α`, the unit ball of the domain norm.
fn domain_unit_ball(model: &Model, alpha: f64) -> Result<CMat> {
    let p = model.deflated_power(alpha)?;
    let r = p.nrows();
    let g = (CMat::identity(r, r) + p.adjoint() * &p) * re(2.0);
    linalg::hermitian_inv_sqrt(&g).ok_or(StabilityError::Operator(OperatorError::FactorizationFailed))
}

/// `h_α(t) = sup ‖e^{tA}x‖_X / ‖x‖_{α}` with `‖x‖²_α = 2(‖x‖²_X + ‖(−A)^αx‖²_X)`.
pub fn decay_envelope(model: &Model, alpha: f64, t_grid: &[f64]) -> Result<ScanResult> {
    check_grid(t_grid)?;
    let s = domain_unit_ball(model, alpha)?;
    let values = family_norms(model, t_grid, &s, false, None)?;
    Ok(ScanResult { kind: ScanKind::DecayEnvelope { alpha }, abscissae: t_grid.to_vec(), values, pointwise: Vec::new(), fit: None })
}

/// `‖e^{tA}A^{-1}‖_X` on the deflated block, spectral components with `|Im λ| > band` removed.
pub fn inverse_decay(model: &Model, t_grid: &[f64], band: Option<f64>) -> Result<ScanResult> {
    check_grid(t_grid)?;
    let r = model.deflated_dim();
    let values = family_norms(model, t_grid, &CMat::identity(r, r), true, band)?;
    Ok(ScanResult { kind: ScanKind::InverseDecay { band }, abscissae: t_grid.to_vec(), values, pointwise: Vec::new(), fit: None })
}

fn window_points(x: &[f64], y: &[f64], window: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .zip(y)
        .filter(|(a, b)| **a >= window.0 && **a <= window.1 && **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip()
}

fn default_window(grid: &[f64]) -> (f64, f64) {
    let hi = *grid.last().unwrap_or(&1.0);
    (hi / 10f64.sqrt(), hi)
}

/// Log-log fit of `y ≈ C x^s`; returns `s` as `exponent`.
pub fn power_fit(x: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<Fit> {
    let window = window.unwrap_or_else(|| default_window(x));
    let (lx, ly) = window_points(x, y, window);
    if lx.len() < 10 {
        return Err(StabilityError::InsufficientPoints { points: lx.len() });
    }
    let (slope, intercept, r2) = linalg::linear_fit(&lx, &ly);
    Ok(Fit { exponent: slope, constant: intercept.exp(), window, r2, points: lx.len() })
}

/// `β` in `h(t) ≈ C t^{−β}` over the window, fitted to the running minimum of the envelope.
pub fn fit_decay_exponent(scan: &ScanResult, window: Option<(f64, f64)>) -> Result<Fit> {
    let mut running = scan.values.clone();
    for i in 1..running.len() {
        running[i] = running[i].min(running[i - 1]);
    }
    let mut fit = power_fit(&scan.abscissae, &running, window)?;
    fit.exponent = -fit.exponent;
    if fit.r2 < 0.9 {
        return Err(StabilityError::PoorFit { r2: fit.r2, slope: -fit.exponent });
    }
    Ok(fit)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolventScanOptions {
    pub window: Option<(f64, f64)>,
    /// Add the imaginary parts of eigenvalues inside the grid range as extra abscissae.
    pub include_eigen_frequencies: bool,
}

/// Pointwise `‖R(iη, A)‖` and the running maximum `M(η)`, with a log-log fit of `M`.
pub fn resolvent_scan(model: &Model, eta_grid: &[f64], opts: &ResolventScanOptions) -> Result<ScanResult> {
    check_grid(eta_grid)?;
    let mut grid = eta_grid.to_vec();
    if opts.include_eigen_frequencies {
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        grid.extend(model.spectral().eigenvalues().iter().map(|l| l.im).filter(|x| *x >= lo && *x <= hi));
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    let pointwise: Vec<f64> = grid.par_iter().map(|&eta| model.resolvent_norm(eta)).collect::<std::result::Result<_, _>>()?;
    let mut values = pointwise.clone();
    for i in 1..values.len() {
        values[i] = values[i].max(values[i - 1]);
    }
    let fit = power_fit(&grid, &values, opts.window).ok();
    Ok(ScanResult { kind: ScanKind::Resolvent, abscissae: grid, values, pointwise, fit })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtRecord {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub product: f64,
    pub resolvent_fit: Fit,
    pub decay_fit: Fit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtOptions {
    pub eta_grid: Vec<f64>,
    pub eta_window: Option<(f64, f64)>,
    pub t_grid: Vec<f64>,
    pub t_window: Option<(f64, f64)>,
    pub band: Option<f64>,
}

/// `α̂` from `M(η) ~ η^α`, `β̂` from `‖e^{tA}A^{-1}‖ ~ t^{−β}`, and their product.
pub fn bt_crosscheck(model: &Model, opts: &BtOptions) -> Result<(BtRecord, ScanResult, ScanResult)> {
    let mut res = resolvent_scan(model, &opts.eta_grid, &ResolventScanOptions { window: opts.eta_window, include_eigen_frequencies: true })?;
    let resolvent_fit = power_fit(&res.abscissae, &res.values, opts.eta_window)?;
    if resolvent_fit.r2 < 0.9 {
        return Err(StabilityError::PoorFit { r2: resolvent_fit.r2, slope: resolvent_fit.exponent });
    }
    res.fit = Some(resolvent_fit.clone());
    let mut dec = inverse_decay(model, &opts.t_grid, opts.band)?;
    let decay_fit = fit_decay_exponent(&dec, opts.t_window)?;
    dec.fit = Some(decay_fit.clone());
    let record = BtRecord {
        alpha_hat: resolvent_fit.exponent,
        beta_hat: decay_fit.exponent,
        product: resolvent_fit.exponent * decay_fit.exponent,
        resolvent_fit,
        decay_fit,
    };
    Ok((record, res, dec))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCheck {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub sup: f64,
    pub argmax: f64,
}

/// `r(t) = h_α(t) / h₁(t/⌈α⌉)^α`.
pub fn interpolation_check(model: &Model, alpha: f64, t_grid: &[f64]) -> Result<InterpolationCheck> {
    let m = alpha.ceil().max(1.0);
    let h_alpha = decay_envelope(model, alpha, t_grid)?;
    let scaled: Vec<f64> = t_grid.iter().map(|t| t / m).collect();
    let h_one = decay_envelope(model, 1.0, &scaled)?;
    let ratios: Vec<f64> = h_alpha.values.iter().zip(&h_one.values).map(|(a, b)| a / b.powf(alpha)).collect();
    let (idx, sup) = ratios.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    Ok(InterpolationCheck { alpha, times: t_grid.to_vec(), ratios, sup, argmax: t_grid[idx] })
}

/// Normal model `diag(−k^{−α} + ik)`, `k = 1..=modes`, whose resolvent grows like `η^α`.
pub fn synthetic_resolvent_model(alpha: f64, modes: usize) -> Result<Model> {
    let a = CMat::from_diagonal(&CVec::from_iterator(modes, (1..=modes).map(|k| c64(-(k as f64).powf(-alpha), k as f64))));
    Ok(Model::new(format!("synthetic_alpha_{alpha}"), StateSpace::identity(modes), a)?)
}

/// Geometric grid of `n` points on `[a, b]`.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let r = (b / a).ln() / (n - 1) as f64;
    (0..n).map(|i| a * (r * i as f64).exp()).collect()
}

/// Uniform grid of `n` points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
