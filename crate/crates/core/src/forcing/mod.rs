//! T-periodic source terms, regularity classes and the one-period Duhamel integral.

mod duhamel;
mod sampled;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, c64, re, C64, CMat, CVec, ZERO};
use crate::operator::{Model, OperatorError, StateSpace};

pub use duhamel::{duhamel_ft, duhamel_ft_report, duhamel_window, gain_of_derivatives, shift_derivative_ft, DuhamelMethod, GainReport, DuhamelOptions, DuhamelReport};
pub use sampled::SampledData;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForcingError {
    #[error("derivative of order {requested} requested, only {available} available")]
    DerivativesUnavailable { requested: usize, available: usize },
    #[error("forcing is not per0 of order {k}: derivative {order} has endpoint size {magnitude:e}")]
    ClassViolation { k: usize, order: usize, magnitude: f64 },
    #[error("Duhamel quadrature unresolved (relative change {change:e} after panel doubling)")]
    QuadratureUnderResolved { change: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid forcing: {0}")]
    Invalid(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl ForcingError {
    pub fn name(&self) -> String {
        let local = match self {
            Self::DerivativesUnavailable { .. } => "DerivativesUnavailable",
            Self::ClassViolation { .. } => "ClassViolation",
            Self::QuadratureUnderResolved { .. } => "QuadratureUnderResolved",
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::Invalid(_) => "InvalidForcing",
            Self::Operator(e) => return format!("operator_core::{}", e.name()),
        };
        format!("forcing::{local}")
    }
}

type Result<T> = std::result::Result<T, ForcingError>;

/// Regularity class of a periodic forcing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", content = "k", rename_all = "snake_case")]
pub enum ClassTag {
    L1Per,
    Wk1Per0(usize),
    Wk1Per(usize),
}

/// Largest derivative order probed when tagging classes.
pub const MAX_CLASS_ORDER: usize = 16;

#[derive(Clone, Debug)]
pub enum Representation {
    /// `f(t) = Σ f̂_k e^{2πikt/T}`.
    Fourier { terms: Vec<(i64, CVec)> },
    Sampled(SampledData),
    /// `f(s) = C e^{(s−T)A} φ / T`.
    Pullback { model: Arc<Model>, base: CVec, scale: f64 },
    Sum(Vec<(C64, PeriodicForcing)>),
    /// `f(t) = M g(t)`.
    Mapped { matrix: CMat, inner: Box<PeriodicForcing> },
}

#[derive(Clone, Debug)]
pub struct PeriodicForcing {
    period: f64,
    dim: usize,
    repr: Representation,
    class_tag: ClassTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingNormReport {
    pub l1_norm: f64,
    pub wk1_norm: f64,
    pub class_verified: bool,
    pub endpoint_max: f64,
}

impl PeriodicForcing {
    fn assemble(period: f64, dim: usize, repr: Representation) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(ForcingError::Invalid(format!("period must be positive, got {period}")));
        }
        let mut f = Self { period, dim, repr, class_tag: ClassTag::L1Per };
        f.class_tag = f.compute_class();
        Ok(f)
    }

    /// Trigonometric polynomial with coefficients `f̂_k` at frequencies `2πk/T`.
    pub fn fourier(period: f64, terms: Vec<(i64, CVec)>) -> Result<Self> {
        let dim = terms.first().map(|t| t.1.len()).ok_or_else(|| ForcingError::Invalid("no Fourier terms".into()))?;
        for (_, v) in &terms {
            if v.len() != dim {
                return Err(ForcingError::DimensionMismatch { expected: dim, got: v.len() });
            }
            if !linalg::is_finite_vec(v) {
                return Err(ForcingError::Invalid("non-finite coefficient".into()));
            }
        }
        let mut merged: Vec<(i64, CVec)> = Vec::new();
        for (k, v) in terms {
            match merged.iter_mut().find(|(j, _)| *j == k) {
                Some((_, w)) => *w += v,
                None => merged.push((k, v)),
            }
        }
        merged.sort_by_key(|(k, _)| *k);
        Self::assemble(period, dim, Representation::Fourier { terms: merged })
    }

    pub fn constant(period: f64, v: CVec) -> Result<Self> {
        Self::fourier(period, vec![(0, v)])
    }

    /// `cos(2πkt/T) v`.
    pub fn cosine(period: f64, k: i64, v: &CVec) -> Result<Self> {
        let half = v * re(0.5);
        Self::fourier(period, vec![(k, half.clone()), (-k, half)])
    }

    /// `sin(2πkt/T) v`.
    pub fn sine(period: f64, k: i64, v: &CVec) -> Result<Self> {
        Self::fourier(period, vec![(k, v * c64(0.0, -0.5)), (-k, v * c64(0.0, 0.5))])
    }

    /// Bump in time `sin^{2p}(πt/T) v`; all derivatives below order `2p` vanish at the endpoints.
    pub fn bump(period: f64, p: usize, v: &CVec) -> Result<Self> {
        if p == 0 {
            return Err(ForcingError::Invalid("bump power must be positive".into()));
        }
        let n = 2 * p;
        let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
        let scale = 0.25f64.powi(p as i32);
        let terms = (-(p as i64)..=p as i64)
            .map(|k| {
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let c = sign * binom(n, (p as i64 + k) as usize) * scale;
                (k, v * re(c))
            })
            .collect();
        Self::fourier(period, terms)
    }

    /// Piecewise Hermite interpolant of values and derivative stacks at nodes in `[0, T)`.
    pub fn sampled(period: f64, times: Vec<f64>, stacks: Vec<Vec<CVec>>) -> Result<Self> {
        let data = SampledData::new(period, times, stacks)?;
        let dim = data.dim();
        Self::assemble(period, dim, Representation::Sampled(data))
    }

    /// Samples another forcing with `kmax` derivatives at `n` uniform nodes.
    pub fn sample_from(f: &PeriodicForcing, n: usize, kmax: usize) -> Result<Self> {
        let times: Vec<f64> = (0..n).map(|i| f.period * i as f64 / n as f64).collect();
        let stacks = times.iter().map(|&t| (0..=kmax).map(|j| f.derivative(j, t)).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
        Self::sampled(f.period, times, stacks)
    }

    /// `f(s) = C e^{(s−T)A} φ / T` on a group-propagating model.
    pub fn pullback(model: Arc<Model>, base: CVec, scale: f64, period: f64) -> Result<Self> {
        if base.len() != model.dim() {
            return Err(ForcingError::DimensionMismatch { expected: model.dim(), got: base.len() });
        }
        if !model.group_allowed() {
            return Err(ForcingError::Operator(OperatorError::BackwardTimeDisallowed { t: -period }));
        }
        let dim = base.len();
        Self::assemble(period, dim, Representation::Pullback { model, base, scale })
    }

    /// `Σ c_i f_i`.
    pub fn linear_combination(parts: Vec<(C64, PeriodicForcing)>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| ForcingError::Invalid("empty combination".into()))?;
        let (period, dim) = (first.1.period, first.1.dim);
        for (_, f) in &parts {
            if f.dim != dim {
                return Err(ForcingError::DimensionMismatch { expected: dim, got: f.dim });
            }
            if (f.period - period).abs() > 1e-14 * period {
                return Err(ForcingError::Invalid("periods differ".into()));
            }
        }
        Self::assemble(period, dim, Representation::Sum(parts))
    }

    /// `t ↦ M f(t)`; Fourier forcings stay Fourier.
    pub fn mapped(&self, matrix: &CMat) -> Result<Self> {
        if matrix.ncols() != self.dim {
            return Err(ForcingError::DimensionMismatch { expected: self.dim, got: matrix.ncols() });
        }
        if let Representation::Fourier { terms } = &self.repr {
            return Self::fourier(self.period, terms.iter().map(|(k, v)| (*k, matrix * v)).collect());
        }
        Self::assemble(self.period, matrix.nrows(), Representation::Mapped { matrix: matrix.clone(), inner: Box::new(self.clone()) })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn class_tag(&self) -> ClassTag {
        self.class_tag
    }

    pub fn is_fourier(&self) -> bool {
        matches!(self.repr, Representation::Fourier { .. })
    }

    pub fn fourier_terms(&self) -> Option<&[(i64, CVec)]> {
        match &self.repr {
            Representation::Fourier { terms } => Some(terms),
            _ => None,
        }
    }

    pub fn omega(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.period
    }

    /// Highest derivative order available, `None` when unlimited.
    pub fn max_derivative(&self) -> Option<usize> {
        match &self.repr {
            Representation::Fourier { .. } | Representation::Pullback { .. } => None,
            Representation::Sampled(d) => Some(d.kmax()),
            Representation::Sum(parts) => parts.iter().filter_map(|(_, f)| f.max_derivative()).min(),
            Representation::Mapped { inner, .. } => inner.max_derivative(),
        }
    }

    pub fn eval(&self, t: f64) -> CVec {
        self.derivative(0, t).expect("order zero is always available")
    }

    /// `f^{(j)}(t)`.
    pub fn derivative(&self, j: usize, t: f64) -> Result<CVec> {
        if let Some(kmax) = self.max_derivative() {
            if j > kmax {
                return Err(ForcingError::DerivativesUnavailable { requested: j, available: kmax });
            }
        }
        Ok(match &self.repr {
            Representation::Fourier { terms } => {
                let mut out = CVec::zeros(self.dim);
                for (k, v) in terms {
                    let w = self.omega(*k);
                    let phase = c64(0.0, w * t).exp() * c64(0.0, w).powu(j as u32);
                    out.axpy(phase, v, c64(1.0, 0.0));
                }
                out
            }
            Representation::Sampled(d) => d.derivative(j, t),
            Representation::Pullback { model, base, scale } => {
                let tau = t.rem_euclid(self.period) - self.period;
                let mut v = model.propagate(tau, base)?;
                for _ in 0..j {
                    v = model.generator() * v;
                }
                v * re(scale / self.period)
            }
            Representation::Sum(parts) => {
                let mut out = CVec::zeros(self.dim);
                for (c, f) in parts {
                    out.axpy(*c, &f.derivative(j, t)?, c64(1.0, 0.0));
                }
                out
            }
            Representation::Mapped { matrix, inner } => matrix * inner.derivative(j, t)?,
        })
    }

    /// The forcing `f^{(k)}`.
    pub fn derivative_forcing(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        if let Some(kmax) = self.max_derivative() {
            if k > kmax {
                return Err(ForcingError::DerivativesUnavailable { requested: k, available: kmax });
            }
        }
        let repr = match &self.repr {
            Representation::Fourier { terms } => Representation::Fourier {
                terms: terms.iter().map(|(j, v)| (*j, v * c64(0.0, self.omega(*j)).powu(k as u32))).collect(),
            },
            Representation::Sampled(d) => Representation::Sampled(d.shifted(k)),
            Representation::Pullback { model, base, scale } => {
                let mut b = base.clone();
                for _ in 0..k {
                    b = model.generator() * b;
                }
                Representation::Pullback { model: model.clone(), base: b, scale: *scale }
            }
            Representation::Sum(parts) => Representation::Sum(parts.iter().map(|(c, f)| Ok((*c, f.derivative_forcing(k)?))).collect::<Result<_>>()?),
            Representation::Mapped { matrix, inner } => Representation::Mapped { matrix: matrix.clone(), inner: Box::new(inner.derivative_forcing(k)?) },
        };
        Self::assemble(self.period, self.dim, repr)
    }

    /// Typical size of `f^{(j)}` used to make endpoint tests relative.
    fn derivative_scale(&self, j: usize) -> f64 {
        if let Representation::Fourier { terms } = &self.repr {
            return terms.iter().map(|(k, v)| self.omega(*k).abs().powi(j as i32) * v.norm()).sum();
        }
        (0..64)
            .filter_map(|i| self.derivative(j, self.period * (i as f64 + 0.5) / 64.0).ok())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Number of leading derivatives vanishing at `t = 0` (relative `tol`), capped.
    pub fn vanishing_order(&self, tol: f64) -> usize {
        let cap = self.max_derivative().map_or(MAX_CLASS_ORDER, |k| (k + 1).min(MAX_CLASS_ORDER));
        for j in 0..cap {
            let v = match self.derivative(j, 0.0) {
                Ok(v) => v.norm(),
                Err(_) => return j,
            };
            let scale = self.derivative_scale(j);
            if v > tol * scale.max(f64::MIN_POSITIVE) && v > 0.0 {
                return j;
            }
        }
        cap
    }

    fn compute_class(&self) -> ClassTag {
        let k0 = self.vanishing_order(1e-10);
        if k0 > 0 {
            return ClassTag::Wk1Per0(k0);
        }
        match self.max_derivative() {
            None => ClassTag::Wk1Per(MAX_CLASS_ORDER),
            Some(0) => ClassTag::L1Per,
            Some(k) => ClassTag::Wk1Per(k.min(MAX_CLASS_ORDER)),
        }
    }

    /// `‖f^{(j)}‖_{L¹(0,T;X)}` by adaptive Gauss–Legendre.
    pub fn derivative_l1_norm(&self, space: &StateSpace, j: usize) -> Result<f64> {
        self.derivative(j, 0.0)?;
        if let Representation::Fourier { terms } = &self.repr {
            let coords: Vec<CVec> = terms.iter().map(|(_, v)| space.to_orthonormal(v)).collect();
            let n = terms.len();
            let gram = CMat::from_fn(n, n, |a, b| coords[a].dotc(&coords[b]));
            let omegas: Vec<f64> = terms.iter().map(|(k, _)| self.omega(*k)).collect();
            let g = |t: f64| {
                let c: Vec<C64> = omegas.iter().map(|w| c64(0.0, w * t).exp() * c64(0.0, *w).powu(j as u32)).collect();
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += (c[a].conj() * gram[(a, b)] * c[b]).re;
                    }
                }
                acc.max(0.0).sqrt()
            };
            return Ok(adaptive_integral(&g, 0.0, self.period, 1e-10));
        }
        let g = |t: f64| space.norm(&self.derivative(j, t).expect("checked order"));
        Ok(adaptive_integral(&g, 0.0, self.period, 1e-10))
    }

    pub fn l1_norm(&self, space: &StateSpace) -> f64 {
        self.derivative_l1_norm(space, 0).expect("order zero")
    }

    /// `‖f‖_{L²(0,T)}` with the Euclidean norm on values (scalar boundary data).
    pub fn l2_norm(&self) -> f64 {
        let g = |t: f64| self.eval(t).norm_squared();
        adaptive_integral(&g, 0.0, self.period, 1e-13).sqrt()
    }

    /// Norm in the class of the tag: `L¹` or `W^{k,1}`.
    pub fn class_norm(&self, space: &StateSpace) -> f64 {
        match self.class_tag {
            ClassTag::L1Per => self.l1_norm(space),
            ClassTag::Wk1Per0(k) | ClassTag::Wk1Per(k) => {
                let k = k.min(self.max_derivative().unwrap_or(k)).min(3);
                (0..=k).map(|j| self.derivative_l1_norm(space, j).unwrap_or(0.0)).sum()
            }
        }
    }

    /// Endpoint test for `W^{k,1}_{per,0}` (derivatives `0..k` vanish at `0` and `T`) plus norms.
    pub fn check_class(&self, space: &StateSpace, k: usize, tol: f64) -> Result<ForcingNormReport> {
        if let Some(kmax) = self.max_derivative() {
            if k > kmax {
                return Err(ForcingError::DerivativesUnavailable { requested: k, available: kmax });
            }
        }
        let mut endpoint_max: f64 = 0.0;
        let mut verified = true;
        for j in 0..k {
            let scale = self.derivative_scale(j).max(f64::MIN_POSITIVE);
            let a = self.derivative(j, 0.0)?.norm();
            let b = self.derivative(j, self.period)?.norm();
            let m = a.max(b) / scale;
            endpoint_max = endpoint_max.max(m);
            if a.max(b) > tol * scale {
                verified = false;
            }
        }
        let l1 = self.l1_norm(space);
        let mut wk1 = l1;
        for j in 1..=k {
            wk1 += self.derivative_l1_norm(space, j)?;
        }
        Ok(ForcingNormReport { l1_norm: l1, wk1_norm: wk1, class_verified: verified, endpoint_max })
    }

    /// `sup_s ‖f(s)‖_X` over a uniform sample.
    pub fn sup_norm(&self, space: &StateSpace, samples: usize) -> f64 {
        (0..samples).map(|i| space.norm(&self.eval(self.period * i as f64 / samples as f64))).fold(0.0, f64::max)
    }

    pub fn zero(period: f64, dim: usize) -> Result<Self> {
        Self::constant(period, CVec::from_element(dim, ZERO))
    }
}

/// Adaptive Gauss–Legendre integration of a scalar function.
pub fn adaptive_integral(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (x, w) = linalg::gauss_legendre(10);
    let rule = |lo: f64, hi: f64| -> f64 {
        let h = 0.5 * (hi - lo);
        x.iter().zip(&w).map(|(xk, wk)| h * wk * f(lo + h * (xk + 1.0))).sum()
    };
    let mut total = 0.0;
    let mut stack = vec![(a, b, rule(a, b), 0usize)];
    let scale = stack[0].2.abs().max(1e-300);
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule(lo, mid);
        let right = rule(mid, hi);
        let err = (left + right - whole).abs();
        if err <= tol * scale.max((left + right).abs()) || depth >= 40 {
            total += left + right;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn e1(dim: usize) -> CVec {
        let mut v = CVec::zeros(dim);
        v[0] = ONE;
        v
    }

    #[test]
    fn constant_and_cosine() {
        let c = PeriodicForcing::constant(2.0, CVec::from_element(1, re(3.0))).unwrap();
        assert_eq!(c.eval(0.7)[0], re(3.0));
        let f = PeriodicForcing::cosine(2.0, 1, &e1(2)).unwrap();
        assert!((f.eval(0.0) - e1(2)).norm() < 1e-15);
        assert!((f.eval(2.0) - e1(2)).norm() < 1e-14);
        assert!(f.derivative(1, 0.0).unwrap().norm() < 1e-15);
        assert_eq!(f.class_tag(), ClassTag::Wk1Per(MAX_CLASS_ORDER));
    }

    #[test]
    fn sine_l1_norm() {
        let t = 3.0;
        let f = PeriodicForcing::sine(t, 1, &e1(1)).unwrap();
        let l1 = f.l1_norm(&StateSpace::identity(1));
        assert!((l1 - 2.0 * t / PI).abs() < 1e-10);
    }

    #[test]
    fn bump_matches_closed_form() {
        let t = 1.7;
        let f = PeriodicForcing::bump(t, 3, &e1(1)).unwrap();
        for &s in &[0.1, 0.5, 1.3] {
            let exact = (PI * s / t).sin().powi(6);
            assert!((f.eval(s)[0] - re(exact)).norm() < 1e-14);
        }
        assert_eq!(f.class_tag(), ClassTag::Wk1Per0(6));
    }

    #[test]
    fn per0_checks() {
        let space = StateSpace::identity(1);
        let s2 = PeriodicForcing::bump(1.0, 1, &e1(1)).unwrap();
        let r = s2.check_class(&space, 1, 1e-10).unwrap();
        assert!(r.class_verified && r.wk1_norm >= r.l1_norm);
        assert!(s2.check_class(&space, 2, 1e-10).unwrap().class_verified);
        let s = PeriodicForcing::sine(1.0, 1, &e1(1)).unwrap();
        assert!(s.check_class(&space, 1, 1e-10).unwrap().class_verified);
        assert!(!s.check_class(&space, 2, 1e-10).unwrap().class_verified);
    }

    #[test]
    fn eighth_power_bump_is_per0_of_order_seven() {
        let space = StateSpace::identity(1);
        let f = PeriodicForcing::bump(2.0, 4, &e1(1)).unwrap();
        // Symbolic derivatives of sin^8 vanish at 0 up to order 7.
        for j in 0..8 {
            assert!(f.derivative(j, 0.0).unwrap().norm() < 1e-9 * (PI / 2.0).powi(j as i32));
        }
        assert!(f.derivative(8, 0.0).unwrap().norm() > 1.0);
        assert!(f.check_class(&space, 7, 1e-10).unwrap().class_verified);
    }

    #[test]
    fn periodicity_of_evaluation() {
        let f = PeriodicForcing::fourier(0.8, vec![(2, e1(2) * c64(0.3, 0.1)), (-1, e1(2) * re(0.7))]).unwrap();
        for &t in &[0.0, 0.13, 0.5] {
            assert!((f.eval(t + 0.8) - f.eval(t)).norm() < 1e-10);
        }
    }

    #[test]
    fn sampled_reproduces_smooth_forcing() {
        let f = PeriodicForcing::bump(1.0, 2, &e1(1)).unwrap();
        let s = PeriodicForcing::sample_from(&f, 64, 3).unwrap();
        for &t in &[0.011, 0.37, 0.999, 1.25] {
            assert!((s.eval(t) - f.eval(t)).norm() < 1e-9, "t={t}");
            assert!((s.derivative(1, t).unwrap() - f.derivative(1, t).unwrap()).norm() < 1e-6);
        }
        assert_eq!(s.derivative(4, 0.1).unwrap_err().name(), "forcing::DerivativesUnavailable");
        assert_eq!(s.class_tag(), ClassTag::Wk1Per0(4));
    }
}
