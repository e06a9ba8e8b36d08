use nalgebra::DMatrix;

use super::ModelError;
use crate::linalg::complexify;
use crate::operator::{Layout, Model, ModelParts, StateSpace};

/// Heat equation on `(−1, 0)` coupled to a wave equation on `(0, 1)`.
///
/// Lumped-mass finite elements with a shared interface node `z = u(0) = ẇ(0)`;
/// the interface row balances the heat flux against the wave stress, which gives
/// exact discrete energy dissipation `dE/dt = −Σ (u_{i+1} − u_i)²/h_H`.
/// State: `u_1..u_{nH−1}, z, w_0..w_{nW−1}, ẇ_1..ẇ_{nW−1}`.
pub fn build_heat_wave_1d(n_heat: usize, n_wave: usize) -> Result<Model, ModelError> {
    if n_heat < 3 || n_wave < 3 {
        return Err(ModelError::InvalidGrid(format!("need nH, nW >= 3, got {n_heat}, {n_wave}")));
    }
    let hh = 1.0 / n_heat as f64;
    let hw = 1.0 / n_wave as f64;
    let nu = n_heat - 1;
    let nv = n_wave - 1;
    let iz = nu;
    let iw = |j: usize| nu + 1 + j;
    let iv = |j: usize| nu + 1 + n_wave + j - 1;
    let dim = nu + 1 + n_wave + nv;
    let uidx = |i: usize| -> Option<usize> {
        if i == 0 {
            None
        } else if i == n_heat {
            Some(iz)
        } else {
            Some(i - 1)
        }
    };
    let widx = |j: usize| -> Option<usize> { (j < n_wave).then(|| iw(j)) };
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 1..n_heat {
        for (k, c) in [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)] {
            if let Some(col) = uidx(k) {
                a[(i - 1, col)] += c / (hh * hh);
            }
        }
    }
    let mass = 0.5 * (hh + hw);
    a[(iz, iz)] -= 1.0 / (hh * mass);
    a[(iz, nu - 1)] += 1.0 / (hh * mass);
    a[(iz, iw(1))] += 1.0 / (hw * mass);
    a[(iz, iw(0))] -= 1.0 / (hw * mass);
    a[(iw(0), iz)] = 1.0;
    for j in 1..n_wave {
        a[(iw(j), iv(j))] = 1.0;
        for (k, c) in [(j - 1, 1.0), (j, -2.0), (j + 1, 1.0)] {
            if let Some(col) = widx(k) {
                a[(iv(j), col)] += c / (hw * hw);
            }
        }
    }
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..nu {
        g[(i, i)] += hh;
    }
    g[(iz, iz)] += mass;
    for j in 0..n_wave {
        let ends = [(widx(j), -1.0), (widx(j + 1), 1.0)];
        for (p, sp) in ends {
            for (q, sq) in ends {
                if let (Some(p), Some(q)) = (p, q) {
                    g[(p, q)] += sp * sq / hw;
                }
            }
        }
    }
    for j in 1..n_wave {
        g[(iv(j), iv(j))] += hw;
    }
    g *= 0.5;
    let space = StateSpace::new(dim, complexify(&g))?;
    let mut parts = ModelParts::new(format!("heat_wave(nH={n_heat}, nW={n_wave})"), space, complexify(&a));
    parts.layout = Layout::HeatWave {
        heat_nodes: (1..n_heat).map(|i| -1.0 + i as f64 * hh).collect(),
        heat: 0..nu,
        interface: iz,
        wave_nodes: (0..n_wave).map(|j| j as f64 * hw).collect(),
        displacement: iw(0)..iw(0) + n_wave,
        velocity: iv(1)..iv(1) + nv,
    };
    Ok(Model::build(parts)?)
}
