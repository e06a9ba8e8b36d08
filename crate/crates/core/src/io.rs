//! CSV and JSON emitters and readers for reports and curves.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c64, CVec};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    File(#[from] std::io::Error),
}

impl IoError {
    pub fn name(&self) -> String {
        let local = match self {
            Self::Csv(_) => "Csv",
            Self::Json(_) => "Json",
            Self::File(_) => "File",
        };
        format!("io::{local}")
    }
}

/// Complex vectors as `{"re": [...], "im": [...]}`.
pub mod cvec_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        re: Vec<f64>,
        im: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        Parts { re: v.iter().map(|z| z.re).collect(), im: v.iter().map(|z| z.im).collect() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        let p = Parts::deserialize(d)?;
        if p.re.len() != p.im.len() {
            return Err(serde::de::Error::custom("re and im lengths differ"));
        }
        Ok(CVec::from_iterator(p.re.len(), p.re.iter().zip(&p.im).map(|(a, b)| c64(*a, *b))))
    }
}

/// A table of named columns with units.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str], units: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), units: units.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Header line, a `# units:` line, then rows at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        let _ = writeln!(out, "# units: {}", self.units.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format_float(*x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, IoError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| IoError::Csv("empty input".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut units = vec![String::new(); columns.len()];
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            if let Some(u) = line.strip_prefix("# units: ") {
                units = u.split(',').map(str::to_string).collect();
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| IoError::Csv(format!("line {}: {e}", n + 2)))?;
            if row.len() != columns.len() {
                return Err(IoError::Csv(format!("line {}: {} cells, expected {}", n + 2, row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Self { columns, units, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Pretty JSON with struct field order preserved.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    Ok(serde_json::to_string_pretty(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Table::new(&["t", "value"], &["s", "1"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![1e-300, -2.5e17]);
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn cvec_json_round_trip() {
        #[derive(Serialize, Deserialize)]
        struct W {
            #[serde(with = "cvec_serde")]
            v: CVec,
        }
        let w = W { v: CVec::from_vec(vec![c64(1.0, -2.0), c64(0.1, 0.3)]) };
        let s = serde_json::to_string(&w).unwrap();
        let back: W = serde_json::from_str(&s).unwrap();
        assert_eq!(back.v, w.v);
    }
}
