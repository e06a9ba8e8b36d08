use serde::Serialize;

use super::{periodic_w0_direct, periodic_w0_series, PeriodicSolveReport, Result, SolveMethod, SolverError, SolverOptions};
use crate::forcing::PeriodicForcing;
use crate::linalg::{self, exprel, re, CMat};
use crate::operator::{Model, SpectralKind};

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryReport {
    pub report: PeriodicSolveReport,
    /// `‖g‖_{L²(0,T)}`.
    pub input_norm: f64,
    /// `‖w₀‖_X / ‖g‖_{L²(0,T)}`.
    pub ratio: f64,
    /// `sup ‖Φ_T u‖_X / ‖u‖_{L²(0,T)}`.
    pub admissibility: f64,
}

/// `C_T = ‖Φ_T‖_{L²(0,T) → X}`, the square root of the largest eigenvalue of the controllability Gramian.
pub fn admissibility_constant(model: &Model, period: f64) -> Result<f64> {
    let b = model.control().ok_or(SolverError::MissingControl)?;
    let bt = model.coprojection() * b;
    let spectral = model.spectral();
    let r = bt.nrows();
    let gram = match &spectral.kind {
        SpectralKind::Diagonalizable { values, vectors, inverse, .. } => {
            let c = inverse * &bt;
            let cc = &c * c.adjoint();
            let mut inner = CMat::zeros(r, r);
            for i in 0..r {
                for j in 0..r {
                    let z = (values[i] + values[j].conj()) * period;
                    inner[(i, j)] = cc[(i, j)] * exprel(z) * period;
                }
            }
            vectors * inner * vectors.adjoint()
        }
        SpectralKind::Defective { .. } => {
            let (nodes, weights) = linalg::composite_gauss(0.0, period, 64, 16);
            let mut acc = CMat::zeros(r, r);
            for (s, w) in nodes.iter().zip(&weights) {
                let x = spectral.exp(*s) * &bt;
                acc += &x * x.adjoint() * re(*w);
            }
            acc
        }
    };
    let herm = (&gram + gram.adjoint()) * re(0.5);
    let top = linalg::hermitian_eigenvalues(&herm).into_iter().fold(0.0, f64::max);
    Ok(top.sqrt())
}

/// Periodic datum for `u' = Au + Bg`, with `F_T = Φ_T(g)`.
pub fn boundary_periodic_solve(model: &Model, g: &PeriodicForcing, method: SolveMethod, opts: &SolverOptions) -> Result<BoundaryReport> {
    let b = model.control().ok_or(SolverError::MissingControl)?;
    let f = g.mapped(b)?;
    let report = match method {
        SolveMethod::Series { .. } => periodic_w0_series(model, &f, opts)?,
        _ => periodic_w0_direct(model, &f, opts)?,
    };
    let input_norm = g.l2_norm();
    let ratio = if input_norm > 0.0 { model.norm(&report.w0) / input_norm } else { 0.0 };
    let admissibility = admissibility_constant(model, g.period())?;
    Ok(BoundaryReport { report, input_norm, ratio, admissibility })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CVec, ONE};
    use crate::operator::{ModelParts, StateSpace};

    #[test]
    fn scalar_gramian() {
        let space = StateSpace::identity(1);
        let mut parts = ModelParts::new("scalar", space, CMat::from_element(1, 1, re(-1.0)));
        parts.control = Some(CMat::from_element(1, 1, ONE));
        let m = Model::build(parts).unwrap();
        let c = admissibility_constant(&m, 2.0).unwrap();
        let exact = ((1.0 - (-4.0f64).exp()) / 2.0).sqrt();
        assert!((c - exact).abs() < 1e-14);
        let g = PeriodicForcing::constant(2.0, CVec::from_element(1, ONE)).unwrap();
        let rep = boundary_periodic_solve(&m, &g, SolveMethod::Direct, &SolverOptions::default()).unwrap();
        assert!((rep.report.w0[0] - ONE).norm() < 1e-13);
    }
}
