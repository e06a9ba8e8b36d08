use serde::{Deserialize, Serialize};

use super::{Result, ScanKind, ScanResult, StabilityError};

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant through `(xs, ys)`, evaluated at `x`.
pub fn pchip_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 1 || x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|v| *v <= x) - 1;
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = ys.windows(2).zip(&h).map(|(w, h)| (w[1] - w[0]) / h).collect();
    let slope = |k: usize| -> f64 {
        if k == 0 {
            return end_slope(h[0], h.get(1).copied(), d[0], d.get(1).copied());
        }
        if k == n - 1 {
            return end_slope(h[n - 2], (n > 2).then(|| h[n - 3]), d[n - 2], (n > 2).then(|| d[n - 3]));
        }
        let (a, b) = (d[k - 1], d[k]);
        if a * b <= 0.0 {
            return 0.0;
        }
        let (w1, w2) = (2.0 * h[k] + h[k - 1], h[k] + 2.0 * h[k - 1]);
        (w1 + w2) / (w1 / a + w2 / b)
    };
    let (m0, m1) = (slope(i), slope(i + 1));
    let s = (x - xs[i]) / h[i];
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * ys[i] + h10 * h[i] * m0 + h01 * ys[i + 1] + h11 * h[i] * m1
}

fn end_slope(h0: f64, h1: Option<f64>, d0: f64, d1: Option<f64>) -> f64 {
    let (Some(h1), Some(d1)) = (h1, d1) else { return d0 };
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlogResult {
    /// `M_log(η)` on the resolvent grid.
    pub scan: ScanResult,
    pub constant: f64,
    /// Share of validation points where the bound holds.
    pub fraction: f64,
    pub times: Vec<f64>,
    pub measured: Vec<f64>,
    /// `C / M_log^{-1}(t/C)`; NaN past the end of the `η` grid.
    pub bound: Vec<f64>,
    /// Index of the first validation time.
    pub validation_start: usize,
}

impl MlogResult {
    /// The overlay with constant `c` in place of the fitted one.
    pub fn bound_with(&self, c: f64) -> Vec<f64> {
        self.times.iter().map(|&t| bound_at(&self.scan.values, &self.scan.abscissae, c, t)).collect()
    }

    /// Share of all times where `measured <= bound_with(c)`.
    pub fn fraction_with(&self, c: f64) -> f64 {
        let b = self.bound_with(c);
        let ok = self.measured.iter().zip(&b).filter(|(m, b)| !b.is_nan() && **m <= **b * (1.0 + 1e-12)).count();
        ok as f64 / self.times.len().max(1) as f64
    }
}

fn invert(ml: &[f64], eta: &[f64], s: f64) -> Option<f64> {
    if s > *ml.last()? {
        return None;
    }
    Some(pchip_eval(ml, eta, s))
}

fn bound_at(ml: &[f64], eta: &[f64], c: f64, t: f64) -> f64 {
    match invert(ml, eta, t / c) {
        Some(e) if e > 0.0 => c / e,
        Some(_) => f64::INFINITY,
        None => f64::NAN,
    }
}

/// Overlays `C / M_log^{-1}(t/C)` on `decay` (a `‖e^{tA}A^{-1}‖` scan).
///
/// `C` is the smallest constant for which the bound holds on the first half of the
/// decay grid; the second half is used to report the fraction.
pub fn mlog_bound_curve(resolvent: &ScanResult, decay: &ScanResult) -> Result<MlogResult> {
    let eta = &resolvent.abscissae;
    let ml: Vec<f64> = resolvent.values.iter().zip(eta).map(|(m, e)| m * ((1.0 + m).ln() + (1.0 + e).ln())).collect();
    for w in ml.windows(2) {
        if w[1] < w[0] - 1e-9 * w[0].abs() {
            return Err(StabilityError::NonMonotone { violation: w[0] - w[1] });
        }
    }
    let times = &decay.abscissae;
    let measured = &decay.values;
    let split = times.len() / 2;
    let holds = |c: f64, i: usize| {
        let b = bound_at(&ml, eta, c, times[i]);
        !b.is_nan() && measured[i] <= b * (1.0 + 1e-12)
    };
    let feasible = |c: f64| (0..split).all(|i| holds(c, i));
    let mut hi = 1.0;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(StabilityError::InvalidGrid("no constant satisfies the bound; extend the eta grid".into()));
        }
    }
    let mut lo = hi / 2.0;
    while feasible(lo) && lo > 1e-15 {
        lo /= 2.0;
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let c = hi;
    let checked = times.len() - split;
    let ok = (split..times.len()).filter(|&i| holds(c, i)).count();
    let bound = times.iter().map(|&t| bound_at(&ml, eta, c, t)).collect();
    let scan = ScanResult { kind: ScanKind::Mlog, abscissae: eta.clone(), values: ml, pointwise: Vec::new(), fit: None };
    Ok(MlogResult {
        scan,
        constant: c,
        fraction: if checked == 0 { 1.0 } else { ok as f64 / checked as f64 },
        times: times.clone(),
        measured: measured.clone(),
        bound,
        validation_start: split,
    })
}
