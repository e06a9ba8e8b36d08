use nalgebra::DMatrix;

use super::ForcingError;
use crate::linalg::{re, CVec};

/// Node values with derivative stacks, interpolated by two-point Hermite polynomials.
#[derive(Clone, Debug)]
pub struct SampledData {
    period: f64,
    times: Vec<f64>,
    stacks: Vec<Vec<CVec>>,
    /// Maps endpoint data (scaled derivatives) to monomial coefficients on `[0, 1]`.
    hermite: DMatrix<f64>,
}

fn falling(i: usize, q: usize) -> f64 {
    (0..q).fold(1.0, |acc, r| acc * (i - r) as f64)
}

impl SampledData {
    pub fn new(period: f64, times: Vec<f64>, stacks: Vec<Vec<CVec>>) -> Result<Self, ForcingError> {
        if times.is_empty() || times.len() != stacks.len() {
            return Err(ForcingError::Invalid("times and stacks must be nonempty and of equal length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 || *times.last().unwrap() >= period {
            return Err(ForcingError::Invalid("node times must increase strictly inside [0, T)".into()));
        }
        let depth = stacks[0].len();
        if depth == 0 || stacks.iter().any(|s| s.len() != depth) {
            return Err(ForcingError::Invalid("derivative stacks must share a positive depth".into()));
        }
        let dim = stacks[0][0].len();
        if stacks.iter().flatten().any(|v| v.len() != dim) {
            return Err(ForcingError::DimensionMismatch { expected: dim, got: 0 });
        }
        let m = depth - 1;
        let size = 2 * m + 2;
        let mut mat = DMatrix::<f64>::zeros(size, size);
        for j in 0..=m {
            mat[(j, j)] = falling(j, j);
            for i in j..size {
                mat[(m + 1 + j, i)] = falling(i, j);
            }
        }
        let hermite = mat.try_inverse().ok_or_else(|| ForcingError::Invalid("singular Hermite system".into()))?;
        Ok(Self { period, times, stacks, hermite })
    }

    pub fn dim(&self) -> usize {
        self.stacks[0][0].len()
    }

    pub fn kmax(&self) -> usize {
        self.stacks[0].len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn stacks(&self) -> &[Vec<CVec>] {
        &self.stacks
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Same nodes with the stacks shifted down by `k` orders.
    pub fn shifted(&self, k: usize) -> Self {
        let stacks: Vec<Vec<CVec>> = self.stacks.iter().map(|s| s[k..].to_vec()).collect();
        Self::new(self.period, self.times.clone(), stacks).expect("valid shifted stacks")
    }

    pub fn derivative(&self, q: usize, t: f64) -> CVec {
        let tau = t.rem_euclid(self.period);
        let n = self.times.len();
        let (ia, ta, ib, tb) = match self.times.iter().rposition(|&s| s <= tau) {
            Some(i) if i + 1 < n => (i, self.times[i], i + 1, self.times[i + 1]),
            Some(i) => (i, self.times[i], 0, self.times[0] + self.period),
            None => (n - 1, self.times[n - 1] - self.period, 0, self.times[0]),
        };
        let h = tb - ta;
        let x = (tau - ta) / h;
        let m = self.kmax();
        let size = 2 * m + 2;
        let mut data: Vec<CVec> = Vec::with_capacity(size);
        for j in 0..=m {
            data.push(&self.stacks[ia][j] * re(h.powi(j as i32)));
        }
        for j in 0..=m {
            data.push(&self.stacks[ib][j] * re(h.powi(j as i32)));
        }
        let mut out = CVec::zeros(self.dim());
        for i in q..size {
            let basis = falling(i, q) * x.powi((i - q) as i32) / h.powi(q as i32);
            if basis == 0.0 {
                continue;
            }
            for (r, d) in data.iter().enumerate() {
                let c = self.hermite[(i, r)] * basis;
                if c != 0.0 {
                    out.axpy(re(c), d, re(1.0));
                }
            }
        }
        out
    }
}
