//! Pseudo-value regression: generalized estimating equations with working
//! independence, Fisher scoring, and the sandwich covariance.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Link between the linear predictor and the mean pseudo-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    /// `g(theta) = log(-log(theta))`, so `theta = exp(-exp(eta))`.
    Cloglog,
}

impl Link {
    pub fn link(&self, theta: f64) -> f64 {
        match self {
            Link::Identity => theta,
            Link::Cloglog => (-theta.ln()).ln(),
        }
    }

    pub fn inverse(&self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Cloglog => (-eta.exp()).exp(),
        }
    }

    /// `d theta / d eta`.
    pub fn derivative(&self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Cloglog => {
                let e = eta.exp();
                -e * (-e).exp()
            }
        }
    }
}

impl std::str::FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Link::Identity),
            "cloglog" => Ok(Link::Cloglog),
            other => Err(Error::Parse {
                row: 0,
                message: format!("unknown link {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeeOptions {
    /// Tolerance on the sup-norm of the estimating function.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GeeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeeFit {
    pub beta: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub se: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub names: Vec<String>,
    pub link: Link,
}

/// Relative singular-value threshold for declaring the design rank deficient.
const RANK_TOL: f64 = 1e-10;

fn check_design(z: &DMatrix<f64>) -> Result<()> {
    if z.ncols() == 0 || z.nrows() < z.ncols() {
        return Err(Error::SingularDesign);
    }
    let sv = z.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= RANK_TOL * max {
        return Err(Error::SingularDesign);
    }
    Ok(())
}

/// `U(beta)`, the Fisher matrix `M = sum d_l d_l^T`, and the residuals.
fn score_terms(
    y: &[f64],
    z: &DMatrix<f64>,
    link: Link,
    beta: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let eta = z * beta;
    let deriv = DVector::from_iterator(eta.len(), eta.iter().map(|&e| link.derivative(e)));
    let resid = DVector::from_iterator(
        eta.len(),
        eta.iter().zip(y).map(|(&e, &yl)| yl - link.inverse(e)),
    );
    // rows d_l = theta'(eta_l) z_l
    let mut d = z.clone();
    for (i, mut row) in d.row_iter_mut().enumerate() {
        row *= deriv[i];
    }
    let u = d.tr_mul(&resid);
    let m = d.tr_mul(&d);
    (u, m, d, resid)
}

/// `M^{-1} (sum_l d_l r_l^2 d_l^T) M^{-1}`.
pub fn sandwich_variance(
    y: &[f64],
    z: &DMatrix<f64>,
    link: Link,
    beta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if y.len() != z.nrows() || beta.len() != z.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses, {}x{} design, {} coefficients",
            y.len(),
            z.nrows(),
            z.ncols(),
            beta.len()
        )));
    }
    let (_, m, d, resid) = score_terms(y, z, link, beta);
    let m_inv = m.cholesky().ok_or(Error::SingularDesign)?.inverse();
    let mut weighted = d.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= resid[i] * resid[i];
    }
    let meat = d.tr_mul(&weighted);
    let cov = &m_inv * meat * &m_inv;
    Ok((&cov + cov.transpose()) * 0.5)
}

fn starting_beta(y: &[f64], z: &DMatrix<f64>, link: Link) -> DVector<f64> {
    let mut beta = DVector::zeros(z.ncols());
    if link == Link::Cloglog {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let clamped = mean.clamp(1e-6, 1.0 - 1e-6);
        // put the overall level in an intercept column if one exists
        if let Some(j) = (0..z.ncols()).find(|&j| z.column(j).iter().all(|&v| v == 1.0)) {
            beta[j] = link.link(clamped);
        }
    }
    beta
}

/// Solve `U(beta) = sum_l d_l (y_l - theta_l(beta)) = 0` by Fisher scoring.
pub fn fit_gee(
    y: &[f64],
    z: &DMatrix<f64>,
    names: Option<Vec<String>>,
    link: Link,
    options: &GeeOptions,
) -> Result<GeeFit> {
    if y.len() != z.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {} design rows",
            y.len(),
            z.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse {
            row: y.iter().position(|v| !v.is_finite()).unwrap() + 1,
            message: "non-finite response".into(),
        });
    }
    check_design(z)?;
    let p = z.ncols();
    let names = names.unwrap_or_else(|| (0..p).map(|j| format!("x{j}")).collect());
    if names.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {p} coefficients",
            names.len()
        )));
    }

    let sum_sq = |beta: &DVector<f64>| -> f64 {
        (z * beta)
            .iter()
            .zip(y)
            .map(|(&e, &yl)| (yl - link.inverse(e)).powi(2))
            .sum()
    };

    let mut beta = starting_beta(y, z, link);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let (u, m, _, _) = score_terms(y, z, link, &beta);
        if u.amax() <= options.tol {
            converged = true;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }
        iterations += 1;
        let step = m.cholesky().ok_or(Error::SingularDesign)?.solve(&u);
        if link == Link::Identity {
            // U is linear in beta: one exact step
            beta += step;
            continue;
        }
        let current = sum_sq(&beta);
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = &beta + &step * scale;
            let value = sum_sq(&trial);
            if value.is_finite() && value <= current {
                beta = trial;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if !converged {
        // identity-link fits land on the exact solution; rounding may keep U above tol
        let (u, _, _, _) = score_terms(y, z, link, &beta);
        let scale = z.amax() * y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if !(link == Link::Identity && u.amax() <= 1e-9 * scale * y.len() as f64) {
            return Err(Error::DidNotConverge(crate::error::FitDiagnostics {
                alpha: beta.iter().copied().collect(),
                loglik: -sum_sq(&beta),
                grad_norm: u.amax(),
                iterations,
            }));
        }
        converged = true;
    }

    let cov = sandwich_variance(y, z, link, &beta)?;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let se: Vec<f64> = (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let zs: Vec<f64> = (0..p).map(|j| beta[j] / se[j]).collect();
    let ps: Vec<f64> = zs.iter().map(|z| 2.0 * normal.sf(z.abs())).collect();
    Ok(GeeFit {
        beta,
        cov,
        se,
        z: zs,
        p: ps,
        converged,
        iterations,
        names,
        link,
    })
}

impl GeeFit {
    /// Wald table as CSV: `term,estimate,se,z,p`.
    pub fn write_wald_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["term", "estimate", "se", "z", "p"])
            .map_err(io)?;
        for j in 0..self.beta.len() {
            w.write_record([
                self.names[j].clone(),
                format!("{}", self.beta[j]),
                format!("{}", self.se[j]),
                format!("{}", self.z[j]),
                format!("{}", self.p[j]),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}
