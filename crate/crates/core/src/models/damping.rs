use serde::{Deserialize, Serialize};

use super::ModelError;

/// Nonnegative damping coefficient `a(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DampingProfile {
    Constant {
        amplitude: f64,
    },
    /// Smooth bump `A exp(1 − 1/(1 − s²))`, `s = (x − center)/width`.
    Bump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `A (x/L)^γ` on `[0, L]`.
    PowerCutoff {
        amplitude: f64,
        exponent: f64,
        length: f64,
    },
    /// `A exp(−w/(|x₃| − s₀))` for `|x₃| > s₀`, zero on the equatorial band.
    AxisymmetricCap {
        amplitude: f64,
        cutoff: f64,
        width: f64,
    },
}

impl DampingProfile {
    pub fn constant(amplitude: f64) -> Self {
        Self::Constant { amplitude }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { amplitude } => amplitude,
            Self::Bump { amplitude, center, width } => {
                let s = (x - center) / width;
                if s.abs() < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
            Self::PowerCutoff { amplitude, exponent, length } => amplitude * (x / length).clamp(0.0, 1.0).powf(exponent),
            Self::AxisymmetricCap { amplitude, cutoff, width } => {
                let d = x.abs() - cutoff;
                if d > 0.0 {
                    amplitude * (-width / d).exp()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidDamping(msg.to_string()));
        match *self {
            Self::Constant { amplitude } if !(amplitude >= 0.0 && amplitude.is_finite()) => bad("amplitude must be nonnegative"),
            Self::Bump { amplitude, width, .. } if !(amplitude >= 0.0 && width > 0.0) => bad("bump needs amplitude >= 0 and width > 0"),
            Self::PowerCutoff { amplitude, exponent, length } if !(amplitude >= 0.0 && exponent >= 0.0 && length > 0.0) => {
                bad("power cutoff needs amplitude, exponent >= 0 and length > 0")
            }
            Self::AxisymmetricCap { amplitude, cutoff, width } if !(amplitude >= 0.0 && (0.0..1.0).contains(&cutoff) && width > 0.0) => {
                bad("cap needs amplitude >= 0, cutoff in [0, 1) and width > 0")
            }
            _ => Ok(()),
        }
    }

    /// Subintervals of `[lo, hi]` outside which the profile vanishes.
    pub fn support(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        match *self {
            Self::Bump { center, width, .. } => {
                let a = (center - width).max(lo);
                let b = (center + width).min(hi);
                if a < b { vec![(a, b)] } else { Vec::new() }
            }
            Self::AxisymmetricCap { cutoff, .. } => {
                let mut out = Vec::new();
                if lo < -cutoff {
                    out.push((lo, (-cutoff).min(hi)));
                }
                if hi > cutoff {
                    out.push((cutoff.max(lo), hi));
                }
                out
            }
            _ => vec![(lo, hi)],
        }
    }
}
