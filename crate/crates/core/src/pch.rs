//! Piecewise-constant hazard model.
//!
//! The hazard is `alpha_k` on the piece `(c_{k-1}, c_k]`, with `c_0 = 0` and
//! `c_K = inf`. Everything a likelihood fit and the parametric pseudo-observations
//! need lives here: survival evaluation, the mixed interval-censored log-density
//! with its analytic score and Hessian, and closed-form RMST integrals.
//!
//! Pieces are indexed from 0 in code.

use nalgebra::{DMatrix, DVector};

use crate::dataset::IntervalRecord;
use crate::error::{Error, Result};

/// Interior cut points `0 < c_1 < ... < c_{K-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutGrid {
    cuts: Vec<f64>,
}

impl CutGrid {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(Error::InvalidCuts(format!(
                "cuts must be finite and positive, got {cuts:?}"
            )));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCuts(format!(
                "cuts must be strictly increasing, got {cuts:?}"
            )));
        }
        Ok(Self { cuts })
    }

    /// A single piece: the exponential model.
    pub fn single() -> Self {
        Self { cuts: Vec::new() }
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of pieces `K`.
    pub fn pieces(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn lower(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cuts[k - 1]
        }
    }

    pub fn upper(&self, k: usize) -> f64 {
        self.cuts.get(k).copied().unwrap_or(f64::INFINITY)
    }

    /// Index of the piece `(c_{k-1}, c_k]` containing `t`. Time 0 maps to the first piece.
    pub fn piece_of(&self, t: f64) -> usize {
        self.cuts.partition_point(|&c| c < t)
    }

    /// Time spent in each piece on `[0, t]`, i.e. the gradient of `Lambda(t)` in `alpha`.
    pub fn exposure(&self, t: f64) -> Vec<f64> {
        (0..self.pieces())
            .map(|k| (self.upper(k).min(t) - self.lower(k)).max(0.0))
            .collect()
    }

    /// Length of `(left, right] ∩ (c_{k-1}, c_k]` for each piece.
    pub fn overlap(&self, left: f64, right: f64) -> Vec<f64> {
        (0..self.pieces())
            .map(|k| (self.upper(k).min(right) - self.lower(k).max(left)).max(0.0))
            .collect()
    }

    /// Cuts at the given quantile levels of `values`, deduplicated.
    pub fn from_quantiles(values: &[f64], pieces: usize) -> Result<Self> {
        if values.is_empty() || pieces == 0 {
            return Err(Error::EmptyInput);
        }
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut cuts: Vec<f64> = Vec::with_capacity(pieces - 1);
        for j in 1..pieces {
            let pos = j as f64 / pieces as f64 * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let q = sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64);
            if q > 0.0 && cuts.last().is_none_or(|&c| q > c) {
                cuts.push(q);
            }
        }
        Self::new(cuts)
    }
}

/// `(1 - exp(-x)) / x`, continuous at 0.
fn phi1(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - x / 2.0 + x * x / 6.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - exp(-x)(1 + x)) / x^2`, continuous at 0.
fn phi2(x: f64) -> f64 {
    if x < 0.1 {
        // sum_{m>=2} (-1)^m (m-1)/m! x^{m-2}
        let mut term = 1.0; // x^{m-2} / m! * (-1)^m, starting at m = 2 with 1/2!
        let mut fact = 2.0;
        let mut sum = 0.0;
        for m in 2..20 {
            if m > 2 {
                fact *= m as f64;
                term *= -x;
            }
            sum += term * (m as f64 - 1.0) / fact;
        }
        sum
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (x * x)
    }
}

/// Hazard, cumulative hazard and survival at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub hazard: f64,
    pub cum_hazard: f64,
    pub survival: f64,
}

/// A piecewise-constant hazard model with strictly positive rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PchModel {
    grid: CutGrid,
    rates: Vec<f64>,
}

impl PchModel {
    pub fn new(grid: CutGrid, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != grid.pieces() {
            return Err(Error::DimensionMismatch(format!(
                "{} rates for {} pieces",
                rates.len(),
                grid.pieces()
            )));
        }
        if rates.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidRates(format!(
                "rates must be finite and positive, got {rates:?}"
            )));
        }
        Ok(Self { grid, rates })
    }

    pub fn grid(&self) -> &CutGrid {
        &self.grid
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn pieces(&self) -> usize {
        self.rates.len()
    }

    pub fn cum_hazard(&self, t: f64) -> f64 {
        self.grid
            .exposure(t)
            .iter()
            .zip(&self.rates)
            .fold(0.0, |acc, (e, a)| acc + e * a)
    }

    pub fn hazard(&self, t: f64) -> f64 {
        self.rates[self.grid.piece_of(t)]
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cum_hazard(t)).exp()
    }

    pub fn evaluate(&self, t: f64) -> Result<Evaluation> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidTime(t));
        }
        let cum_hazard = self.cum_hazard(t);
        Ok(Evaluation {
            hazard: self.hazard(t),
            cum_hazard,
            survival: (-cum_hazard).exp(),
        })
    }

    /// `d Lambda(t) / d alpha_k` for each piece.
    pub fn grad_cum_hazard(&self, t: f64) -> Result<DVector<f64>> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidTime(t));
        }
        Ok(DVector::from_vec(self.grid.exposure(t)))
    }

    /// For each piece clipped to `[0, tau]`: `int S`, `int (t - start) S`, and the
    /// clipped width. Pieces starting at or after `tau` are omitted.
    fn piece_integrals(&self, tau: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.pieces());
        let mut log_s = 0.0f64;
        for k in 0..self.pieces() {
            let a = self.grid.lower(k);
            if tau <= a {
                break;
            }
            let b = self.grid.upper(k).min(tau);
            let alpha = self.rates[k];
            let s_a = (-log_s).exp();
            let (plain, first_moment) = if b.is_infinite() {
                (s_a / alpha, s_a / (alpha * alpha))
            } else {
                let w = b - a;
                let x = alpha * w;
                (s_a * w * phi1(x), s_a * w * w * phi2(x))
            };
            out.push((plain, first_moment, b - a));
            if b.is_finite() {
                log_s += alpha * (b - a);
            }
        }
        out
    }

    /// `int_0^tau S(t) dt` in closed form; `tau` may be infinite.
    pub fn rmst(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0) {
            return Err(Error::InvalidTau(tau));
        }
        Ok(self.piece_integrals(tau).iter().map(|p| p.0).sum())
    }

    /// `int_0^tau S(t) dLambda(t)/dalpha_k dt` for each piece `k`.
    ///
    /// Piece `k` contributes its full width times the survival mass of every later
    /// piece, plus `int (t - c_{k-1}) S(t) dt` over its own span.
    pub fn rmst_gradient(&self, tau: f64) -> Result<DVector<f64>> {
        if !(tau > 0.0) {
            return Err(Error::InvalidTau(tau));
        }
        let parts = self.piece_integrals(tau);
        let mut grad = DVector::zeros(self.pieces());
        let mut later_mass = 0.0;
        for k in (0..parts.len()).rev() {
            let (plain, first_moment, width) = parts[k];
            grad[k] = first_moment;
            if later_mass > 0.0 {
                grad[k] += width * later_mass;
            }
            later_mass += plain;
        }
        Ok(grad)
    }

    /// `log f(record)`; for right-censored records `-Lambda(L)`.
    pub fn log_density(&self, record: &IntervalRecord) -> Result<f64> {
        let mut scratch = RecordTerms::new(self.pieces());
        self.record_terms(record, &mut scratch)?;
        Ok(scratch.log_density)
    }

    pub fn score(&self, record: &IntervalRecord) -> Result<DVector<f64>> {
        let mut scratch = RecordTerms::new(self.pieces());
        self.record_terms(record, &mut scratch)?;
        Ok(DVector::from_vec(scratch.score))
    }

    pub fn hessian(&self, record: &IntervalRecord) -> Result<DMatrix<f64>> {
        let k = self.pieces();
        let mut scratch = RecordTerms::new(k);
        self.record_terms(record, &mut scratch)?;
        let mut h = DMatrix::zeros(k, k);
        scratch.add_hessian_to(&mut h, 1.0);
        Ok(h)
    }

    /// Fill `out` with the log-density, the score and the data needed to form the
    /// Hessian of one record.
    pub(crate) fn record_terms(
        &self,
        record: &IntervalRecord,
        out: &mut RecordTerms,
    ) -> Result<()> {
        let k = self.pieces();
        let (left, right) = (record.left, record.right);
        out.hessian_kind = HessianKind::Zero;
        let lambda_left: f64 = self.cum_hazard(left);
        for j in 0..k {
            out.score[j] = -(self.grid.upper(j).min(left) - self.grid.lower(j)).max(0.0);
        }
        if right == f64::INFINITY {
            out.log_density = -lambda_left;
        } else if left == right {
            let piece = self.grid.piece_of(left);
            let alpha = self.rates[piece];
            out.log_density = alpha.ln() - lambda_left;
            out.score[piece] += 1.0 / alpha;
            out.hessian_kind = HessianKind::Diagonal {
                piece,
                value: -1.0 / (alpha * alpha),
            };
        } else {
            for j in 0..k {
                out.overlap[j] =
                    (self.grid.upper(j).min(right) - self.grid.lower(j).max(left)).max(0.0);
            }
            // mass exponent D = Lambda(R) - Lambda(L), from the overlaps directly
            let d: f64 = out
                .overlap
                .iter()
                .zip(&self.rates)
                .map(|(g, a)| g * a)
                .sum();
            let em1 = d.exp_m1();
            if !(d > 0.0) || em1 == 0.0 {
                return Err(Error::DegenerateInterval { left, right });
            }
            // log(1 - exp(-D))
            out.log_density = -lambda_left + (-(-d).exp_m1()).ln();
            let q = 1.0 / em1;
            for j in 0..k {
                out.score[j] += out.overlap[j] * q;
            }
            out.hessian_kind = HessianKind::Rank1 {
                weight: -q * (1.0 + q),
            };
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum HessianKind {
    Zero,
    Diagonal {
        piece: usize,
        value: f64,
    },
    /// `weight * overlap overlap^T`
    Rank1 {
        weight: f64,
    },
}

/// Reusable per-record derivative buffers.
#[derive(Debug, Clone)]
pub(crate) struct RecordTerms {
    pub log_density: f64,
    pub score: Vec<f64>,
    pub overlap: Vec<f64>,
    pub hessian_kind: HessianKind,
}

impl RecordTerms {
    pub fn new(pieces: usize) -> Self {
        Self {
            log_density: 0.0,
            score: vec![0.0; pieces],
            overlap: vec![0.0; pieces],
            hessian_kind: HessianKind::Zero,
        }
    }

    /// `h += scale * hessian(record)`.
    pub fn add_hessian_to(&self, h: &mut DMatrix<f64>, scale: f64) {
        match self.hessian_kind {
            HessianKind::Zero => {}
            HessianKind::Diagonal { piece, value } => h[(piece, piece)] += scale * value,
            HessianKind::Rank1 { weight } => {
                let k = self.overlap.len();
                for i in 0..k {
                    let gi = self.overlap[i];
                    if gi == 0.0 {
                        continue;
                    }
                    for j in 0..k {
                        h[(i, j)] += scale * weight * gi * self.overlap[j];
                    }
                }
            }
        }
    }
}

/// Empirical check of the two necessary identifiability conditions for one piece.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceCondition {
    /// 0-based piece index.
    pub piece: usize,
    /// Records with finite `R` whose `[L, R]` meets `(c_{k-1}, c_k]`.
    pub finite_hits: usize,
    /// Records with `L > c_{k-1}`.
    pub left_beyond: usize,
}

impl PieceCondition {
    /// No finite interval touches the piece: the information matrix is singular there.
    pub fn lacks_information(&self) -> bool {
        self.finite_hits == 0
    }

    /// Nobody is known to survive past the piece start: its rate can grow without bound.
    pub fn lacks_survivors(&self) -> bool {
        self.left_beyond == 0
    }

    pub fn violated(&self) -> bool {
        self.lacks_information() || self.lacks_survivors()
    }
}

/// Per-piece diagnostic counts; advisory only.
pub fn check_conditions(records: &[IntervalRecord], grid: &CutGrid) -> Vec<PieceCondition> {
    (0..grid.pieces())
        .map(|k| {
            let (lo, hi) = (grid.lower(k), grid.upper(k));
            let finite_hits = records
                .iter()
                .filter(|r| r.right.is_finite() && r.right > lo && r.left <= hi)
                .count();
            let left_beyond = records.iter().filter(|r| r.left > lo).count();
            PieceCondition {
                piece: k,
                finite_hits,
                left_beyond,
            }
        })
        .collect()
}
