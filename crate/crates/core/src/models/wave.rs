use nalgebra::DMatrix;

use super::{DampingProfile, ModelError};
use crate::linalg::{complexify, re, CMat, CVec};
use crate::operator::{Layout, Model, ModelParts, StateSpace};

type Result<T> = std::result::Result<T, ModelError>;

/// Second-order Dirichlet Laplacian on `n` interior nodes of spacing `h`.
pub fn dirichlet_laplacian(n: usize, h: f64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    let c = 1.0 / (h * h);
    for i in 0..n {
        d[(i, i)] = -2.0 * c;
        if i > 0 {
            d[(i, i - 1)] = c;
        }
        if i + 1 < n {
            d[(i, i + 1)] = c;
        }
    }
    d
}

fn periodic_laplacian(n: usize, h: f64) -> DMatrix<f64> {
    let mut d = dirichlet_laplacian(n, h);
    let c = 1.0 / (h * h);
    d[(0, n - 1)] += c;
    d[(n - 1, 0)] += c;
    d
}

fn check_grid(n: usize, length: f64) -> Result<()> {
    if n < 3 {
        return Err(ModelError::InvalidGrid(format!("need at least 3 nodes, got {n}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(ModelError::InvalidGrid(format!("length must be positive, got {length}")));
    }
    Ok(())
}

/// First-order wave system `(u, v)' = (v, Δu − a v)` and its energy Gram matrix.
fn wave_system(lap: &DMatrix<f64>, damping: &[f64], h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = damping.len();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        a[(n + i, n + i)] = -damping[i];
        g[(n + i, n + i)] = h;
        for j in 0..n {
            a[(n + i, j)] = lap[(i, j)];
            g[(i, j)] = -h * lap[(i, j)];
        }
    }
    (a, g)
}

/// Damped wave on `(0, L)` with Dirichlet ends, `n` interior nodes.
pub fn build_damped_wave_interval(n: usize, length: f64, damping: &DampingProfile) -> Result<Model> {
    check_grid(n, length)?;
    damping.validate()?;
    let h = length / (n + 1) as f64;
    let nodes: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
    let a: Vec<f64> = nodes.iter().map(|&x| damping.eval(x)).collect();
    let (gen, gram) = wave_system(&dirichlet_laplacian(n, h), &a, h);
    let space = StateSpace::new(2 * n, complexify(&gram))?;
    let mut parts = ModelParts::new(format!("damped_wave_interval(n={n})"), space, complexify(&gen));
    parts.layout = Layout::Wave { nodes, h, displacement: 0..n, velocity: n..2 * n };
    Ok(Model::build(parts)?)
}

/// Damped wave on the circle of circumference `L`, `n` periodic nodes.
///
/// The Gram matrix adds `L p(x)²` to the energy, where `p` is the conserved
/// weighted mean defining the kernel projector.
pub fn build_damped_wave_circle(n: usize, length: f64, damping: &DampingProfile) -> Result<Model> {
    check_grid(n, length)?;
    damping.validate()?;
    let h = length / n as f64;
    let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let a: Vec<f64> = nodes.iter().map(|&x| damping.eval(x)).collect();
    let total: f64 = a.iter().map(|v| h * v).sum();
    if !(total > 0.0) {
        return Err(ModelError::ZeroDamping);
    }
    let (gen, mut gram) = wave_system(&periodic_laplacian(n, h), &a, h);
    let mut q = vec![0.0; 2 * n];
    for i in 0..n {
        q[i] = h * a[i] / total;
        q[n + i] = h / total;
    }
    let mut kernel = CVec::zeros(2 * n);
    let mut pi0 = CMat::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        for j in 0..2 * n {
            gram[(i, j)] += length * q[i] * q[j];
        }
    }
    for i in 0..n {
        kernel[i] = re(1.0);
        for j in 0..2 * n {
            pi0[(i, j)] = re(q[j]);
        }
    }
    let space = StateSpace::new(2 * n, complexify(&gram))?;
    let mut parts = ModelParts::new(format!("damped_wave_circle(n={n})"), space, complexify(&gen));
    parts.kernel_basis = vec![kernel];
    parts.pi0 = Some(pi0);
    parts.layout = Layout::Wave { nodes, h, displacement: 0..n, velocity: n..2 * n };
    Ok(Model::build(parts)?)
}

/// Interval damped wave with Dirichlet data `u(0) = g(t)` entering through `B = e_{v₁}/h²`.
///
/// Requires `a ≥ eta` at every node of `region`.
pub fn build_boundary_forced_wave(n: usize, length: f64, damping: &DampingProfile, region: (f64, f64), eta: f64) -> Result<Model> {
    check_grid(n, length)?;
    damping.validate()?;
    let h = length / (n + 1) as f64;
    let inside: Vec<f64> = (1..=n).map(|i| i as f64 * h).filter(|&x| x >= region.0 && x <= region.1).collect();
    if inside.is_empty() {
        return Err(ModelError::InvalidGrid(format!("control region [{}, {}] contains no node", region.0, region.1)));
    }
    let min = inside.iter().map(|&x| damping.eval(x)).fold(f64::INFINITY, f64::min);
    if !(eta > 0.0) || min < eta {
        return Err(ModelError::WeakDamping { min, eta });
    }
    let base = build_damped_wave_interval(n, length, damping)?;
    let mut b = CMat::zeros(2 * n, 1);
    b[(n, 0)] = re(1.0 / (h * h));
    let mut parts = ModelParts::new(format!("boundary_forced_wave(n={n})"), base.space().clone(), base.generator().clone());
    parts.layout = base.layout().clone();
    parts.control = Some(b);
    Ok(Model::build(parts)?)
}
