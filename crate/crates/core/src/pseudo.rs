use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

/// Functional of the survival curve that pseudo-observations are computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// `S(t)` at a fixed time.
    Survival(f64),
    /// `RMST(tau) = int_0^tau S(u) du`; `tau` may be infinite for parametric fits.
    Rmst(f64),
}

impl Target {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Target::Survival(t) if !(t.is_finite() && t >= 0.0) => Err(Error::InvalidTime(t)),
            Target::Rmst(tau) if !(tau > 0.0) => Err(Error::InvalidTau(tau)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Survival(t) => write!(f, "survival(t={t})"),
            Target::Rmst(tau) => write!(f, "rmst(tau={tau})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// First-order expansion evaluated on the full-sample fit.
    Fast,
    /// Exact leave-one-out recomputation.
    Jackknife,
}

/// Per-subject pseudo-observations, index-aligned with the input records.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoVector {
    pub values: Vec<f64>,
    pub target: Target,
    pub method: Method,
    /// Full-sample plug-in estimate of the target.
    pub estimate: f64,
}

impl PseudoVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mean over finite entries.
    pub fn mean(&self) -> f64 {
        let (sum, count) = self
            .values
            .iter()
            .filter(|v| v.is_finite())
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        sum / count as f64
    }

    /// CSV `id,pseudo` with 1-based ids.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "pseudo"])
            .map_err(|e| Error::Io(e.to_string()))?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format!("{v}")])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
