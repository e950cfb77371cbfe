//! Pseudo-observations for survival probabilities and restricted mean survival
//! time without the jackknife.
//!
//! - [`km`]: Kaplan-Meier based pseudo-values for right-censored data.
//! - [`pch`], [`fit`], [`param_pseudo`]: piecewise-constant hazard model for
//!   interval-censored data, its maximum likelihood fit, and pseudo-values from the
//!   fitted model.
//! - [`jackknife`]: exact leave-one-out pseudo-values, the slow reference.
//! - [`gee`]: regression of pseudo-values on covariates with sandwich errors.
//! - [`sim`]: simulation scenarios, Monte-Carlo comparison and timing.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod fit;
pub mod gee;
pub mod jackknife;
pub mod km;
pub mod param_pseudo;
pub mod pch;
pub mod pseudo;
pub mod sim;

pub use dataset::{
    censoring_summary, load_interval_dataset, load_right_censored_dataset, CensoringClass,
    CensoringSummary, Covariates, Dataset, IntervalDataset, IntervalRecord, RightCensoredDataset,
    RightCensoredRecord,
};
pub use error::{Error, Result};
pub use fit::{fit, observed_information, FitOptions, PchFit};
pub use gee::{fit_gee, sandwich_variance, GeeFit, GeeOptions, Link};
pub use jackknife::{jackknife_km, jackknife_pch, JackknifeOutcome};
pub use km::{km_fit, km_pseudo_rmst, km_pseudo_survival, KmFit};
pub use param_pseudo::{pseudo_alpha, pseudo_rmst, pseudo_survival};
pub use pch::{check_conditions, CutGrid, PchModel};
pub use pseudo::{Method, PseudoVector, Target};
