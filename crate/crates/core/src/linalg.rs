//! Dense complex linear algebra helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn complexify(m: &DMatrix<f64>) -> CMat {
    m.map(re)
}

pub fn complexify_vec(v: &[f64]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|&x| re(x)))
}

pub fn is_finite_mat(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_finite_vec(v: &CVec) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Matrix 1-norm (max column sum).
pub fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Complex Schur form `a = q t q*` with `t` upper triangular.
pub fn schur(a: &CMat) -> Option<(CMat, CMat)> {
    let n = a.nrows();
    if n == 0 {
        return Some((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    let s = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 0)?;
    let (q, mut t) = s.unpack();
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = ZERO;
        }
    }
    if !is_finite_mat(&t) || !is_finite_mat(&q) {
        return None;
    }
    Some((q, t))
}

/// Solves `(t - z I) x = b` for upper triangular `t`.
pub fn upper_solve_shifted(t: &CMat, z: C64, b: &CVec) -> CVec {
    let n = t.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= t[(i, j)] * x[j];
        }
        x[i] = s / (t[(i, i)] - z);
    }
    x
}

/// Solves `(t - z I)* x = b` for upper triangular `t`.
pub fn upper_adjoint_solve_shifted(t: &CMat, z: C64, b: &CVec) -> CVec {
    let n = t.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut s = x[i];
        for j in 0..i {
            s -= t[(j, i)].conj() * x[j];
        }
        x[i] = s / (t[(i, i)] - z).conj();
    }
    x
}

/// Inverse of an upper triangular matrix by back substitution.
pub fn upper_inverse(t: &CMat) -> CMat {
    let n = t.nrows();
    let mut inv = CMat::zeros(n, n);
    for k in 0..n {
        inv[(k, k)] = ONE / t[(k, k)];
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in i + 1..=k {
                s += t[(i, j)] * inv[(j, k)];
            }
            inv[(i, k)] = -s / t[(i, i)];
        }
    }
    inv
}

/// Eigenvectors of an upper triangular matrix, columns normalized to unit length.
pub fn triangular_eigenvectors(t: &CMat) -> CMat {
    let n = t.nrows();
    let scale = max_abs(t).max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * scale;
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = ONE;
        let lk = t[(k, k)];
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in i + 1..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let mut d = t[(i, i)] - lk;
            if d.norm() < smin {
                d = re(smin);
            }
            y[(i, k)] = -s / d;
        }
        let nrm = y.column(k).norm();
        if nrm.is_finite() && nrm > 0.0 {
            let mut col = y.column_mut(k);
            col /= re(nrm);
        }
    }
    y
}

/// Principal square root of an upper triangular matrix.
pub fn sqrtm_upper(t: &CMat) -> CMat {
    let n = t.nrows();
    let mut r = CMat::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = t[(i, i)].sqrt();
    }
    for j in 0..n {
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            r[(i, j)] = s / (r[(i, i)] + r[(j, j)]);
        }
    }
    r
}

/// Principal logarithm of an upper triangular matrix by inverse scaling and squaring.
pub fn logm_upper(t: &CMat) -> CMat {
    let n = t.nrows();
    let id = CMat::identity(n, n);
    let mut x = t.clone();
    let mut s = 0;
    while norm1(&(&x - &id)) > 0.1 && s < 64 {
        x = sqrtm_upper(&x);
        s += 1;
    }
    let d = &x - &id;
    let mut term = d.clone();
    let mut sum = d.clone();
    for k in 2..200 {
        term = &term * &d;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        let add = &term * re(sign / k as f64);
        let small = norm1(&add) <= 1e-18 * norm1(&sum).max(1e-300);
        sum += add;
        if small {
            break;
        }
    }
    sum * re(2f64.powi(s))
}

pub fn expm(a: &CMat) -> CMat {
    if a.nrows() == 0 {
        return a.clone();
    }
    a.exp()
}

/// Inverse square root of a Hermitian positive definite matrix.
pub fn hermitian_inv_sqrt(h: &CMat) -> Option<CMat> {
    let n = h.nrows();
    let sym = (h + h.adjoint()) * re(0.5);
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..n {
        let f = 1.0 / eig.eigenvalues[j].sqrt();
        let mut col = scaled.column_mut(j);
        col *= re(f);
    }
    Some(&scaled * eig.eigenvectors.adjoint())
}

pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    let sym = (h + h.adjoint()) * re(0.5);
    let mut v: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Deterministic unit start vector for Krylov iterations.
pub fn probe_vector(n: usize, salt: u64) -> CVec {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v = CVec::from_fn(n, |_, _| C64::new(next(), next()));
    let nrm = v.norm();
    v /= re(nrm);
    v
}

/// Largest singular value of the operator `apply` (with adjoint `apply_adj`) on `C^n`.
///
/// Lanczos on `B*B` with full reorthogonalization; stops once the Ritz residual
/// bound is below `1e-12` relative.
pub fn top_singular_value<F, G>(n: usize, apply: F, apply_adj: G) -> f64
where
    F: Fn(&CVec) -> CVec,
    G: Fn(&CVec) -> CVec,
{
    if n == 0 {
        return 0.0;
    }
    if n <= 16 {
        let mut m = CMat::zeros(0, 0);
        for j in 0..n {
            let mut e = CVec::zeros(n);
            e[j] = ONE;
            let col = apply(&e);
            if j == 0 {
                m = CMat::zeros(col.len(), n);
            }
            m.set_column(j, &col);
        }
        return spectral_norm(&m);
    }
    let max_iter = n.min(400);
    let mut basis: Vec<CVec> = Vec::with_capacity(max_iter + 1);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    basis.push(probe_vector(n, n as u64));
    let mut theta = 0.0f64;
    for k in 0..max_iter {
        let mut w = apply_adj(&apply(&basis[k]));
        let a = basis[k].dotc(&w).re;
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&w);
                w.axpy(-c, q, ONE);
            }
        }
        let b = w.norm();
        let m = alpha.len();
        if m > 24 && m % 6 != 0 && m != n && b > 1e-14 * theta.abs().max(f64::MIN_POSITIVE) {
            beta.push(b);
            basis.push(w / re(b));
            continue;
        }
        let mut tri = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            tri[(i, i)] = alpha[i];
            if i + 1 < m {
                tri[(i, i + 1)] = beta[i];
                tri[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let (idx, &top) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .unwrap();
        theta = top;
        let resid = b * eig.eigenvectors[(m - 1, idx)].abs();
        if resid <= 1e-12 * theta.abs() || b <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) || m == n {
            break;
        }
        beta.push(b);
        basis.push(w / re(b));
    }
    theta.max(0.0).sqrt()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels of `order` nodes.
pub fn composite_gauss(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for k in 0..order {
            nodes.push(lo + 0.5 * h * (x[k] + 1.0));
            weights.push(0.5 * h * w[k]);
        }
    }
    (nodes, weights)
}

/// `(e^z - 1)/z`, accurate near zero.
pub fn exprel(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        ONE + z / 2.0 + z * z / 6.0 + z * z * z / 24.0
    } else {
        (z.exp() - ONE) / z
    }
}

/// Least-squares line `y = intercept + slope x`, returning `(slope, intercept, r2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
