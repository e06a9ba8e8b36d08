use super::{DampingProfile, ModelError};
use crate::linalg::{self, c64, gauss_legendre, re, CMat, CVec, ONE};
use crate::operator::{FieldTag, Layout, Model, ModelParts, StateSpace};

/// Azimuthal block of the damped Schrödinger operator on the unit sphere.
#[derive(Clone, Debug)]
pub struct SphereBlockModel {
    pub model: Model,
    pub m: usize,
    pub jmax: usize,
    /// `l(l+1)` for `l = m..=jmax`.
    pub lambda: Vec<f64>,
    /// `⟨Y_{l'}^m, a Y_l^m⟩`.
    pub damping_matrix: CMat,
    pub damping: DampingProfile,
    pub quadrature_nodes: usize,
}

impl SphereBlockModel {
    pub fn degrees(&self) -> std::ops::RangeInclusive<usize> {
        self.m..=self.jmax
    }

    pub fn size(&self) -> usize {
        self.jmax - self.m + 1
    }

    /// Index of degree `l` in the block basis.
    pub fn index_of(&self, l: usize) -> Option<usize> {
        (self.m..=self.jmax).contains(&l).then(|| l - self.m)
    }

    /// Undamped generator `iΛ` of the block.
    pub fn undamped(&self) -> Model {
        let n = self.size();
        let a = CMat::from_fn(n, n, |i, j| if i == j { c64(0.0, self.lambda[i]) } else { re(0.0) });
        let space = StateSpace::identity(n).with_field(FieldTag::Complex);
        let mut parts = ModelParts::new(format!("sphere_undamped(m={})", self.m), space, a);
        parts.layout = self.model.layout().clone();
        Model::build(parts).expect("skew-Hermitian generator")
    }

    /// `H^k` weights `(1 + l(l+1))^{k/2}`.
    pub fn sobolev_weights(&self, k: f64) -> Vec<f64> {
        self.lambda.iter().map(|l| (1.0 + l).powf(0.5 * k)).collect()
    }
}

/// `P̄_l^m(μ)` for `l = m..=jmax`, normalized so that `∫_{-1}^{1} P̄² dμ = 1`.
pub fn associated_legendre_normalized(m: usize, jmax: usize, mu: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(jmax + 1 - m);
    let mut prod = 1.0;
    for k in 1..=m {
        prod *= (2 * k - 1) as f64 / (2 * k) as f64;
    }
    let s2 = (1.0 - mu * mu).max(0.0);
    let pmm = (0.5 * (2 * m + 1) as f64 * prod).sqrt() * s2.powf(0.5 * m as f64);
    out.push(pmm);
    if jmax == m {
        return out;
    }
    out.push(mu * ((2 * m + 3) as f64).sqrt() * pmm);
    for l in m + 2..=jmax {
        let lf = l as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let next = a * (mu * out[l - m - 1] - b * out[l - m - 2]);
        out.push(next);
    }
    out
}

fn damping_matrix(m: usize, jmax: usize, a: &DampingProfile, nodes: usize) -> CMat {
    let n = jmax - m + 1;
    let mut mat = nalgebra::DMatrix::<f64>::zeros(n, n);
    let (x, w) = gauss_legendre(nodes);
    for (lo, hi) in a.support(-1.0, 1.0) {
        let half = 0.5 * (hi - lo);
        for (xk, wk) in x.iter().zip(&w) {
            let mu = lo + half * (xk + 1.0);
            let weight = half * wk * a.eval(mu);
            if weight == 0.0 {
                continue;
            }
            let p = associated_legendre_normalized(m, jmax, mu);
            for i in 0..n {
                let wi = weight * p[i];
                for j in i..n {
                    mat[(i, j)] += wi * p[j];
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            mat[(i, j)] = mat[(j, i)];
        }
    }
    linalg::complexify(&mat)
}

/// Block `m` of `∂ₜu = −iΔu − a u` in the basis `Y_l^m`, `l = m..=jmax`: `A = iΛ − M_a`.
///
/// With `nodes = None` the Gauss–Legendre rule starts at `2 jmax + 16` nodes per support
/// interval and is refined by 50% until entries settle to `1e-10`; a fixed node count is
/// checked once against a 50% refinement.
pub fn build_sphere_schrodinger(jmax: usize, m: usize, damping: &DampingProfile, nodes: Option<usize>) -> Result<SphereBlockModel, ModelError> {
    if m > jmax {
        return Err(ModelError::InvalidGrid(format!("order {m} exceeds jmax {jmax}")));
    }
    damping.validate()?;
    if matches!(damping, DampingProfile::PowerCutoff { .. }) {
        return Err(ModelError::NonAxisymmetricDamping);
    }
    let minimum = 2 * jmax + 16;
    let mut count = nodes.unwrap_or(minimum).max(minimum);
    let attempts = if nodes.is_some() { 1 } else { 8 };
    let mut accepted = None;
    let mut change = f64::INFINITY;
    for _ in 0..attempts {
        let coarse = damping_matrix(m, jmax, damping, count);
        let finer_count = count + count.div_ceil(2);
        let fine = damping_matrix(m, jmax, damping, finer_count);
        change = linalg::max_abs(&(&fine - &coarse));
        if change <= 1e-10 {
            accepted = Some((fine, finer_count));
            break;
        }
        count = finer_count;
    }
    let (ma, used) = accepted.ok_or(ModelError::QuadratureUnderResolved { change })?;
    let n = jmax - m + 1;
    let lambda: Vec<f64> = (m..=jmax).map(|l| (l * (l + 1)) as f64).collect();
    let mut a = -ma.clone();
    for i in 0..n {
        a[(i, i)] += c64(0.0, lambda[i]);
    }
    let space = StateSpace::identity(n).with_field(FieldTag::Complex);
    let mut parts = ModelParts::new(format!("sphere_schrodinger(m={m}, jmax={jmax})"), space, a);
    parts.layout = Layout::Sphere { m, degrees: (m..=jmax).collect() };
    let model = Model::build(parts)?;
    Ok(SphereBlockModel { model, m, jmax, lambda, damping_matrix: ma, damping: damping.clone(), quadrature_nodes: used })
}

/// Coordinates of the normalized equatorial harmonic `Φ_j ∝ (x₁ + i x₂)^j` in block `m = j`.
pub fn equatorial_harmonic(block: &SphereBlockModel, j: usize) -> Result<CVec, ModelError> {
    if block.m != j {
        return Err(ModelError::DegreeMismatch { m: block.m, j });
    }
    let mut v = CVec::zeros(block.size());
    v[0] = ONE;
    Ok(v)
}
