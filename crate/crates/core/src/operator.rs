//! State spaces with energy norms, generators, propagators, resolvents and fractional powers.

use std::ops::Range;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, re, C64, CMat, CVec, ZERO};

/// Eigenvector condition number above which the propagator falls back to Padé exponentials.
pub const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gram matrix is not Hermitian (relative asymmetry {asymmetry:e})")]
    NonHermitian { asymmetry: f64 },
    #[error("gram matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("backward time t = {t} requested on a model without group propagation")]
    BackwardTimeDisallowed { t: f64 },
    #[error("vector has a kernel component of relative size {ratio:e}")]
    KernelComponentPresent { ratio: f64 },
    #[error("i*{eta} lies on the spectrum (smallest singular value {sigma_min:e})")]
    OnSpectrum { eta: f64, sigma_min: f64 },
    #[error("eigenvalue {re} + {im}i of -A lies on the branch cut")]
    SpectrumOnCut { re: f64, im: f64 },
    #[error("generator is not dissipative (spectral abscissa {abscissa:e})")]
    NotDissipative { abscissa: f64 },
    #[error("negative fractional exponent {alpha}")]
    InvalidExponent { alpha: f64 },
    #[error("eigen or Schur factorization failed to converge")]
    FactorizationFailed,
    #[error("projector does not match the kernel basis: {0}")]
    InvalidProjector(String),
}

impl OperatorError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::NonHermitian { .. } => "NonHermitian",
            Self::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Self::NonFiniteInput => "NonFiniteInput",
            Self::BackwardTimeDisallowed { .. } => "BackwardTimeDisallowed",
            Self::KernelComponentPresent { .. } => "KernelComponentPresent",
            Self::OnSpectrum { .. } => "OnSpectrum",
            Self::SpectrumOnCut { .. } => "SpectrumOnCut",
            Self::NotDissipative { .. } => "NotDissipative",
            Self::InvalidExponent { .. } => "InvalidExponent",
            Self::FactorizationFailed => "FactorizationFailed",
            Self::InvalidProjector(_) => "InvalidProjector",
        }
    }
}

type Result<T> = std::result::Result<T, OperatorError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldTag {
    Real,
    Complex,
}

/// Coordinate space normed by a Hermitian positive definite Gram matrix.
#[derive(Clone, Debug)]
pub struct StateSpace {
    dim: usize,
    gram: CMat,
    field: FieldTag,
    /// `L*` where `gram = L L*`.
    chol_adj: CMat,
    /// `L^{-*}`.
    chol_adj_inv: CMat,
}

/// Validates `gram` and returns the space it defines.
pub fn make_state_space(dim: usize, gram: CMat) -> Result<StateSpace> {
    StateSpace::new(dim, gram)
}

impl StateSpace {
    pub fn new(dim: usize, gram: CMat) -> Result<Self> {
        if gram.nrows() != dim || gram.ncols() != dim || dim == 0 {
            return Err(OperatorError::DimensionMismatch { expected: dim, got: gram.nrows() });
        }
        if !linalg::is_finite_mat(&gram) {
            return Err(OperatorError::NonFiniteInput);
        }
        let scale = linalg::max_abs(&gram).max(f64::MIN_POSITIVE);
        let asym = linalg::max_abs(&(&gram - gram.adjoint())) / scale;
        if asym > 1e-12 {
            return Err(OperatorError::NonHermitian { asymmetry: asym });
        }
        let sym = (&gram + gram.adjoint()) * re(0.5);
        let l = nalgebra::Cholesky::new(sym.clone()).map(|c| c.l());
        let valid = l.as_ref().is_some_and(|l| (0..dim).all(|i| l[(i, i)].re > 0.0 && l[(i, i)].im.abs() <= 1e-12 * l[(i, i)].re));
        let l = match l {
            Some(l) if valid => l,
            _ => {
                let min = linalg::hermitian_eigenvalues(&sym)[0];
                return Err(OperatorError::NotPositiveDefinite { min_eigenvalue: min });
            }
        };
        let chol_adj = l.adjoint();
        let chol_adj_inv = linalg::upper_inverse(&chol_adj);
        let field = if gram.iter().all(|z| z.im == 0.0) { FieldTag::Real } else { FieldTag::Complex };
        Ok(Self { dim, gram: sym, field, chol_adj, chol_adj_inv })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, CMat::identity(dim, dim)).expect("identity gram")
    }

    pub fn with_field(mut self, field: FieldTag) -> Self {
        self.field = field;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn norm(&self, x: &CVec) -> f64 {
        (&self.chol_adj * x).norm()
    }

    pub fn inner(&self, x: &CVec, y: &CVec) -> C64 {
        x.dotc(&(&self.gram * y))
    }

    /// Coordinates in which the norm is Euclidean.
    pub fn to_orthonormal(&self, x: &CVec) -> CVec {
        &self.chol_adj * x
    }

    pub fn from_orthonormal(&self, y: &CVec) -> CVec {
        &self.chol_adj_inv * y
    }

    /// Operator norm of `m` on `(C^dim, ‖·‖_X)`.
    pub fn operator_norm(&self, m: &CMat) -> f64 {
        let mt = &self.chol_adj * m * &self.chol_adj_inv;
        linalg::top_singular_value(self.dim, |v| &mt * v, |v| mt.adjoint() * v)
    }

    pub(crate) fn chol_adj(&self) -> &CMat {
        &self.chol_adj
    }

    pub(crate) fn chol_adj_inv(&self) -> &CMat {
        &self.chol_adj_inv
    }
}

/// Index ranges of the physical fields inside the state vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    Plain,
    Wave {
        nodes: Vec<f64>,
        h: f64,
        displacement: Range<usize>,
        velocity: Range<usize>,
    },
    HeatWave {
        heat_nodes: Vec<f64>,
        heat: Range<usize>,
        interface: usize,
        wave_nodes: Vec<f64>,
        displacement: Range<usize>,
        velocity: Range<usize>,
    },
    Sphere {
        m: usize,
        degrees: Vec<usize>,
    },
}

/// Propagator representation of a matrix in orthonormal coordinates.
#[derive(Clone, Debug)]
pub enum SpectralKind {
    Diagonalizable {
        values: Vec<C64>,
        vectors: CMat,
        inverse: CMat,
        cond: f64,
    },
    Defective {
        cond: f64,
    },
}

/// Cached factorization of the (deflated) generator in orthonormal coordinates.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub a: CMat,
    pub q: CMat,
    pub t: CMat,
    pub kind: SpectralKind,
    /// Schur form is diagonal up to `1e-12` relative.
    pub normal: bool,
}

impl Spectral {
    pub fn new(a: CMat) -> Result<Self> {
        let (q, t) = linalg::schur(&a).ok_or(OperatorError::FactorizationFailed)?;
        let n = a.nrows();
        let y = linalg::triangular_eigenvectors(&t);
        let cond = if n == 0 {
            1.0
        } else if linalg::is_finite_mat(&y) {
            let s = linalg::singular_values(&y);
            let c = s[0] / s[n - 1];
            if c.is_finite() { c } else { f64::INFINITY }
        } else {
            f64::INFINITY
        };
        let kind = if cond <= CONDITION_LIMIT {
            let values = (0..n).map(|i| t[(i, i)]).collect();
            let vectors = &q * &y;
            let inverse = linalg::upper_inverse(&y) * q.adjoint();
            SpectralKind::Diagonalizable { values, vectors, inverse, cond }
        } else {
            SpectralKind::Defective { cond }
        };
        let total = t.norm();
        let off: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| t[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        let normal = off <= 1e-12 * total.max(f64::MIN_POSITIVE);
        Ok(Self { a, q, t, kind, normal })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.t[(i, i)]).collect()
    }

    pub fn condition(&self) -> f64 {
        match &self.kind {
            SpectralKind::Diagonalizable { cond, .. } | SpectralKind::Defective { cond } => *cond,
        }
    }

    pub fn is_diagonalizable(&self) -> bool {
        matches!(self.kind, SpectralKind::Diagonalizable { .. })
    }

    pub fn exp(&self, t: f64) -> CMat {
        match &self.kind {
            SpectralKind::Diagonalizable { values, vectors, inverse, .. } => {
                let mut scaled = vectors.clone();
                for (j, l) in values.iter().enumerate() {
                    let e = (l * t).exp();
                    let mut col = scaled.column_mut(j);
                    col *= e;
                }
                scaled * inverse
            }
            SpectralKind::Defective { .. } => linalg::expm(&(&self.a * re(t))),
        }
    }

    pub fn exp_apply(&self, t: f64, y: &CVec) -> CVec {
        match &self.kind {
            SpectralKind::Diagonalizable { values, vectors, inverse, .. } => {
                let mut c = inverse * y;
                for (ci, l) in c.iter_mut().zip(values) {
                    *ci *= (l * t).exp();
                }
                vectors * c
            }
            SpectralKind::Defective { .. } => self.exp(t) * y,
        }
    }

    /// `‖(zI − A)^{-1}‖_2` via the Schur form.
    pub fn resolvent_norm(&self, z: C64) -> std::result::Result<f64, f64> {
        let n = self.dim();
        if n == 0 {
            return Ok(0.0);
        }
        let dmin = (0..n).map(|i| (self.t[(i, i)] - z).norm()).fold(f64::INFINITY, f64::min);
        if dmin < 1e-13 {
            return Err(dmin);
        }
        if self.normal {
            return Ok(1.0 / dmin);
        }
        let t = &self.t;
        let s = linalg::top_singular_value(
            n,
            |v| linalg::upper_solve_shifted(t, z, v),
            |v| linalg::upper_adjoint_solve_shifted(t, z, v),
        );
        if !s.is_finite() || 1.0 / s < 1e-13 {
            return Err(if s.is_finite() { 1.0 / s } else { 0.0 });
        }
        Ok(s)
    }

    /// `(zI − A)^{-1} y`.
    pub fn resolvent_apply(&self, z: C64, y: &CVec) -> CVec {
        let qy = self.q.adjoint() * y;
        let x = linalg::upper_solve_shifted(&self.t, z, &qy);
        -(&self.q * x)
    }

    /// Principal power `(−A)^alpha`.
    pub fn neg_power(&self, alpha: f64) -> Result<CMat> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(OperatorError::InvalidExponent { alpha });
        }
        let n = self.dim();
        let neg = -&self.a;
        if alpha.fract() == 0.0 && alpha <= 64.0 {
            let mut result = CMat::identity(n, n);
            let mut base = neg;
            let mut k = alpha as u64;
            while k > 0 {
                if k & 1 == 1 {
                    result = &result * &base;
                }
                base = &base * &base;
                k >>= 1;
            }
            return Ok(result);
        }
        let scale = linalg::max_abs(&self.t).max(1.0);
        for i in 0..n {
            let mu = -self.t[(i, i)];
            if mu.im.abs() <= 1e-14 * scale && mu.re <= 0.0 {
                return Err(OperatorError::SpectrumOnCut { re: mu.re, im: mu.im });
            }
        }
        match &self.kind {
            SpectralKind::Diagonalizable { values, vectors, inverse, .. } => {
                let mut scaled = vectors.clone();
                for (j, l) in values.iter().enumerate() {
                    let p = ((-l).ln() * alpha).exp();
                    let mut col = scaled.column_mut(j);
                    col *= p;
                }
                Ok(scaled * inverse)
            }
            SpectralKind::Defective { .. } => {
                let log = linalg::logm_upper(&(-&self.t));
                let p = linalg::expm(&(log * re(alpha)));
                Ok(&self.q * p * self.q.adjoint())
            }
        }
    }
}

/// Inputs for [`Model::build`].
#[derive(Clone, Debug)]
pub struct ModelParts {
    pub label: String,
    pub space: StateSpace,
    pub a: CMat,
    pub kernel_basis: Vec<CVec>,
    /// Spectral projector onto the kernel; computed from null spaces when absent.
    pub pi0: Option<CMat>,
    pub control: Option<CMat>,
    pub layout: Layout,
    pub group_allowed: bool,
}

impl ModelParts {
    pub fn new(label: impl Into<String>, space: StateSpace, a: CMat) -> Self {
        Self {
            label: label.into(),
            space,
            a,
            kernel_basis: Vec::new(),
            pi0: None,
            control: None,
            layout: Layout::Plain,
            group_allowed: true,
        }
    }
}

/// Generator over a state space with kernel metadata and cached factorization.
#[derive(Clone, Debug)]
pub struct Model {
    label: String,
    space: StateSpace,
    a: CMat,
    kernel_basis: Vec<CVec>,
    pi0: CMat,
    control: Option<CMat>,
    layout: Layout,
    group_allowed: bool,
    /// Columns: X-orthonormal basis of range(I − Π₀).
    basis: CMat,
    /// Coordinates of (I − Π₀)x in `basis`.
    coproj: CMat,
    spectral: Spectral,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<C64>,
    pub deflated_eigenvalues: Vec<C64>,
    pub spectral_abscissa: f64,
    pub distance_to_imaginary_axis: f64,
    pub kernel_dim: usize,
    pub eigenvector_condition: f64,
    pub dissipative: bool,
    pub assumptions_ok: bool,
}

impl Model {
    /// Kernel-free model with the given Gram-normed space.
    pub fn new(label: impl Into<String>, space: StateSpace, a: CMat) -> Result<Self> {
        Self::build(ModelParts::new(label, space, a))
    }

    /// Scalar model `u' = a u` on `C` with the modulus norm.
    pub fn scalar(a: C64) -> Self {
        let mut m = CMat::zeros(1, 1);
        m[(0, 0)] = a;
        Self::new("scalar", StateSpace::identity(1), m).expect("scalar model")
    }

    pub fn build(parts: ModelParts) -> Result<Self> {
        let ModelParts { label, space, a, kernel_basis, pi0, control, layout, group_allowed } = parts;
        let dim = space.dim();
        if a.nrows() != dim || a.ncols() != dim {
            return Err(OperatorError::DimensionMismatch { expected: dim, got: a.nrows() });
        }
        if !linalg::is_finite_mat(&a) {
            return Err(OperatorError::NonFiniteInput);
        }
        if let Some(b) = &control {
            if b.nrows() != dim {
                return Err(OperatorError::DimensionMismatch { expected: dim, got: b.nrows() });
            }
        }
        let k = kernel_basis.len();
        let pi0 = if k == 0 {
            CMat::zeros(dim, dim)
        } else {
            let p = match pi0 {
                Some(p) => p,
                None => kernel_projector_from_null_spaces(&a, &kernel_basis)?,
            };
            check_projector(&a, &p, &kernel_basis)?;
            p
        };
        let (basis, coproj) = if k == 0 {
            (space.chol_adj_inv().clone(), space.chol_adj().clone())
        } else {
            let id = CMat::identity(dim, dim);
            let comp = &id - &pi0;
            let ph = space.chol_adj() * &comp * space.chol_adj_inv();
            let h = &ph * ph.adjoint();
            let eig = SymmetricEigen::new((&h + h.adjoint()) * re(0.5));
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
            let r = dim - k;
            let mut u = CMat::zeros(dim, r);
            for (c, &i) in order.iter().take(r).enumerate() {
                u.set_column(c, &eig.eigenvectors.column(i));
            }
            let basis = space.chol_adj_inv() * &u;
            let coproj = u.adjoint() * space.chol_adj() * &comp;
            (basis, coproj)
        };
        let reduced = &coproj * &a * &basis;
        let spectral = Spectral::new(reduced)?;
        let model = Self { label, space, a, kernel_basis, pi0, control, layout, group_allowed, basis, coproj, spectral };
        let abscissa = model.spectral.eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        if abscissa > model.dissipativity_tolerance() {
            return Err(OperatorError::NotDissipative { abscissa });
        }
        Ok(model)
    }

    fn dissipativity_tolerance(&self) -> f64 {
        let m = self.spectral.eigenvalues().iter().map(|l| l.norm()).fold(1.0, f64::max);
        1e-10 * m
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Dimension of range(I − Π₀).
    pub fn deflated_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn generator(&self) -> &CMat {
        &self.a
    }

    pub fn control(&self) -> Option<&CMat> {
        self.control.as_ref()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn kernel_basis(&self) -> &[CVec] {
        &self.kernel_basis
    }

    pub fn has_kernel(&self) -> bool {
        !self.kernel_basis.is_empty()
    }

    pub fn group_allowed(&self) -> bool {
        self.group_allowed
    }

    pub fn set_group_allowed(&mut self, allowed: bool) {
        self.group_allowed = allowed;
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn norm(&self, x: &CVec) -> f64 {
        self.space.norm(x)
    }

    /// Orthonormal coordinates of the deflated part of `x`.
    pub fn deflate(&self, x: &CVec) -> CVec {
        &self.coproj * x
    }

    /// State with deflated coordinates `y` and zero kernel component.
    pub fn inflate(&self, y: &CVec) -> CVec {
        &self.basis * y
    }

    pub fn deflation_basis(&self) -> &CMat {
        &self.basis
    }

    pub fn coprojection(&self) -> &CMat {
        &self.coproj
    }

    pub fn project_kernel(&self, x: &CVec) -> CVec {
        &self.pi0 * x
    }

    pub fn kernel_projector(&self) -> CMat {
        self.pi0.clone()
    }

    /// `(1/2πi)∮ (z − A)⁻¹ dz` over `|z| = r`, `r` half the smallest nonzero eigenvalue modulus,
    /// by the trapezoid rule on `nodes` points.
    pub fn contour_kernel_projector(&self, nodes: usize) -> CMat {
        let n = self.dim();
        let a = self.generator();
        let r = 0.5 * self.spectral.eigenvalues().iter().map(|l| l.norm()).filter(|m| *m > 1e-8).fold(f64::INFINITY, f64::min);
        let r = if r.is_finite() { r } else { 1.0 };
        let mut p = CMat::zeros(n, n);
        for k in 0..nodes {
            let z = linalg::c64(0.0, 2.0 * std::f64::consts::PI * k as f64 / nodes as f64).exp() * r;
            if let Some(inv) = (CMat::identity(n, n) * z - a).lu().try_inverse() {
                p += inv * (z / nodes as f64);
            }
        }
        p
    }

    fn check_vector(&self, x: &CVec) -> Result<()> {
        if x.len() != self.dim() {
            return Err(OperatorError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !linalg::is_finite_vec(x) {
            return Err(OperatorError::NonFiniteInput);
        }
        Ok(())
    }

    /// `e^{tA} x`.
    pub fn propagate(&self, t: f64, x: &CVec) -> Result<CVec> {
        self.check_vector(x)?;
        if !t.is_finite() {
            return Err(OperatorError::NonFiniteInput);
        }
        if t < 0.0 && !self.group_allowed {
            return Err(OperatorError::BackwardTimeDisallowed { t });
        }
        let y = self.spectral.exp_apply(t, &self.deflate(x));
        let mut out = self.inflate(&y);
        if self.has_kernel() {
            out += &self.pi0 * x;
        }
        Ok(out)
    }

    /// Matrix of `e^{tA}` in state coordinates.
    pub fn propagator(&self, t: f64) -> CMat {
        let mut m = &self.basis * self.spectral.exp(t) * &self.coproj;
        if self.has_kernel() {
            m += &self.pi0;
        }
        m
    }

    /// `e^{tA}` restricted to the deflated block, orthonormal coordinates.
    pub fn deflated_propagator(&self, t: f64) -> CMat {
        self.spectral.exp(t)
    }

    /// X-operator norm of a state-coordinate matrix.
    pub fn operator_norm(&self, m: &CMat) -> f64 {
        self.space.operator_norm(m)
    }

    /// `‖e^{-τA}‖_X`, logging a warning past `1e6`.
    pub fn backward_growth(&self, tau: f64) -> f64 {
        let e = self.spectral.exp(-tau);
        let g = linalg::top_singular_value(e.nrows(), |v| &e * v, |v| e.adjoint() * v);
        if g > 1e6 {
            log::warn!("backward propagation norm {g:e} at tau = {tau} on {}", self.label);
        }
        g
    }

    /// `sup_t ‖e^{tA}‖_X` over the sampled times.
    pub fn semigroup_bound(&self, times: &[f64]) -> f64 {
        times.iter().map(|&t| self.operator_norm(&self.propagator(t))).fold(0.0, f64::max)
    }

    /// `(−A)^alpha` on the deflated block, orthonormal coordinates.
    pub fn deflated_power(&self, alpha: f64) -> Result<CMat> {
        self.spectral.neg_power(alpha)
    }

    /// `(−A)^alpha` in state coordinates, acting on range(I − Π₀).
    pub fn fractional_power(&self, alpha: f64) -> Result<CMat> {
        let p = self.spectral.neg_power(alpha)?;
        Ok(&self.basis * p * &self.coproj)
    }

    /// `‖x‖_X + ‖(−A)^alpha x‖_X`.
    pub fn norm_domain(&self, alpha: f64, x: &CVec) -> Result<f64> {
        self.check_vector(x)?;
        let nx = self.norm(x);
        if self.has_kernel() {
            let k = self.norm(&(&self.pi0 * x));
            if k > 1e-10 * nx {
                return Err(OperatorError::KernelComponentPresent { ratio: k / nx.max(f64::MIN_POSITIVE) });
            }
        }
        let p = self.spectral.neg_power(alpha)?;
        Ok(nx + (p * self.deflate(x)).norm())
    }

    /// `‖(iηI − A)^{-1}‖_X` on the deflated block.
    pub fn resolvent_norm(&self, eta: f64) -> Result<f64> {
        if !eta.is_finite() {
            return Err(OperatorError::NonFiniteInput);
        }
        self.spectral
            .resolvent_norm(C64::new(0.0, eta))
            .map_err(|sigma_min| OperatorError::OnSpectrum { eta, sigma_min })
    }

    pub fn spectrum_report(&self) -> SpectrumReport {
        let deflated = self.spectral.eigenvalues();
        let mut eigenvalues = deflated.clone();
        eigenvalues.extend(std::iter::repeat_n(ZERO, self.kernel_basis.len()));
        let abscissa = deflated.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let dist = deflated.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
        let scale = deflated.iter().map(|l| l.norm()).fold(1.0, f64::max);
        let full_abscissa = eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        SpectrumReport {
            eigenvalues,
            deflated_eigenvalues: deflated,
            spectral_abscissa: abscissa,
            distance_to_imaginary_axis: dist,
            kernel_dim: self.kernel_basis.len(),
            eigenvector_condition: self.spectral.condition(),
            dissipative: full_abscissa <= 1e-10 * scale,
            assumptions_ok: abscissa < 0.0 && dist > 1e-10 * scale,
        }
    }

    /// Spectral radius of the deflated monodromy `e^{AT}`.
    pub fn deflated_spectral_radius(&self, period: f64) -> f64 {
        self.spectral.eigenvalues().iter().map(|l| (l.re * period).exp()).fold(0.0, f64::max)
    }
}

fn kernel_projector_from_null_spaces(a: &CMat, kernel: &[CVec]) -> Result<CMat> {
    let dim = a.nrows();
    let k = kernel.len();
    let h = a * a.adjoint();
    let eig = SymmetricEigen::new((&h + h.adjoint()) * re(0.5));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let mut left = CMat::zeros(dim, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        left.set_column(c, &eig.eigenvectors.column(i));
    }
    let mut right = CMat::zeros(dim, k);
    for (c, v) in kernel.iter().enumerate() {
        right.set_column(c, v);
    }
    let gram = left.adjoint() * &right;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| OperatorError::InvalidProjector("kernel is not complemented by the range".into()))?;
    Ok(right * inv * left.adjoint())
}

fn check_projector(a: &CMat, p: &CMat, kernel: &[CVec]) -> Result<()> {
    let scale = linalg::max_abs(p).max(1.0);
    let idem = linalg::max_abs(&(p * p - p)) / scale;
    if idem > 1e-10 {
        return Err(OperatorError::InvalidProjector(format!("not idempotent ({idem:e})")));
    }
    let ascale = linalg::max_abs(a).max(1.0) * scale;
    let comm = linalg::max_abs(&(p * a)).max(linalg::max_abs(&(a * p))) / ascale;
    if comm > 1e-10 {
        return Err(OperatorError::InvalidProjector(format!("does not annihilate A ({comm:e})")));
    }
    for v in kernel {
        let d = (p * v - v).norm() / v.norm().max(f64::MIN_POSITIVE);
        if d > 1e-10 {
            return Err(OperatorError::InvalidProjector(format!("kernel vector not fixed ({d:e})")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use linalg::{c64, ONE};

    fn mat(rows: &[&[f64]]) -> CMat {
        CMat::from_fn(rows.len(), rows[0].len(), |i, j| re(rows[i][j]))
    }

    #[test]
    fn scalar_space_norm() {
        let s = make_state_space(1, mat(&[&[1.0]])).unwrap();
        assert_eq!(s.norm(&CVec::from_element(1, c64(-3.0, 4.0))), 5.0);
    }

    #[test]
    fn diagonal_gram_norm() {
        let s = make_state_space(2, mat(&[&[2.0, 0.0], &[0.0, 1.0]])).unwrap();
        let x = CVec::from_vec(vec![ONE, ZERO]);
        assert!((s.norm(&x) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gram_validation_errors() {
        let e = make_state_space(2, mat(&[&[1.0, 0.5], &[0.0, 1.0]])).unwrap_err();
        assert_eq!(e.name(), "NonHermitian");
        let e = make_state_space(2, mat(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap_err();
        match e {
            OperatorError::NotPositiveDefinite { min_eigenvalue } => assert!((min_eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scalar_propagation() {
        let m = Model::scalar(re(-1.0));
        let y = m.propagate(2f64.ln(), &CVec::from_element(1, ONE)).unwrap();
        assert!((y[0] - re(0.5)).norm() < 1e-15);
    }

    #[test]
    fn nilpotent_block_uses_fallback() {
        let m = Model::new("jordan", StateSpace::identity(2), mat(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap();
        assert!(!m.spectral().is_diagonalizable());
        let y = m.propagate(3.0, &CVec::from_vec(vec![ZERO, ONE])).unwrap();
        assert!((y[0] - re(3.0)).norm() < 1e-14 && (y[1] - ONE).norm() < 1e-14);
    }

    #[test]
    fn backward_time_guard() {
        let mut m = Model::scalar(re(-1.0));
        m.set_group_allowed(false);
        let e = m.propagate(-1.0, &CVec::from_element(1, ONE)).unwrap_err();
        assert_eq!(e.name(), "BackwardTimeDisallowed");
        let e = m.propagate(f64::NAN, &CVec::from_element(1, ONE)).unwrap_err();
        assert_eq!(e.name(), "NonFiniteInput");
    }

    #[test]
    fn scalar_resolvent_values() {
        let m = Model::scalar(re(-1.0));
        assert!((m.resolvent_norm(0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((m.resolvent_norm(3.0).unwrap() - 1.0 / 10f64.sqrt()).abs() < 1e-14);
        let rot = Model::scalar(c64(0.0, 1.0));
        assert_eq!(rot.resolvent_norm(1.0).unwrap_err().name(), "OnSpectrum");
    }

    #[test]
    fn powers_of_diagonal() {
        let m = Model::new("diag", StateSpace::identity(2), mat(&[&[-1.0, 0.0], &[0.0, -9.0]])).unwrap();
        let p = m.fractional_power(0.5).unwrap();
        assert!(linalg::max_abs(&(p - mat(&[&[1.0, 0.0], &[0.0, 3.0]]))) < 1e-14);
        let p1 = m.fractional_power(1.0).unwrap();
        assert!(linalg::max_abs(&(p1 + m.generator())) < 1e-14);
    }

    #[test]
    fn power_on_cut_rejected() {
        let m = Model::scalar(re(0.0));
        assert_eq!(m.fractional_power(0.5).unwrap_err().name(), "SpectrumOnCut");
    }

    #[test]
    fn domain_norms() {
        let m = Model::scalar(re(-1.0));
        let x = CVec::from_element(1, ONE);
        assert!((m.norm_domain(1.0, &x).unwrap() - 2.0).abs() < 1e-15);
        assert!((m.norm_domain(0.0, &x).unwrap() - 2.0).abs() < 1e-15);
        let d = Model::new("diag", StateSpace::identity(2), mat(&[&[-1.0, 0.0], &[0.0, -4.0]])).unwrap();
        let x = CVec::from_vec(vec![ONE, ONE]);
        let expected = 2f64.sqrt() + 5f64.sqrt();
        assert!((d.norm_domain(0.5, &x).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn spectrum_reports() {
        let r = Model::scalar(re(-1.0)).spectrum_report();
        assert_eq!(r.spectral_abscissa, -1.0);
        assert!(r.assumptions_ok);
        let r = Model::scalar(c64(0.0, 1.0)).spectrum_report();
        assert!(!r.assumptions_ok && r.dissipative);
    }

    #[test]
    fn growing_generator_rejected() {
        let e = Model::new("bad", StateSpace::identity(1), mat(&[&[0.1]])).unwrap_err();
        assert_eq!(e.name(), "NotDissipative");
    }
}
