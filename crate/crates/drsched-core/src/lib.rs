//! Distributionally robust CVaR self-scheduling for a price-taker GENCO
//! under electricity-price uncertainty.
//!
//! * [`system_model`] — network cases and the DC self-scheduling feasible set.
//! * [`pricing`] — price scenarios, moments, support box, ambiguity parameters.
//! * [`dr_exact`] — the exact moment-robust CVaR SDP and the CVaR oracles.
//! * [`dr_split`] — whitened vector-splitting upper approximation.
//! * [`dr_admm`] — region-partition approximation solved by consensus ADMM.
//! * [`experiments`] — LP baselines, parameter sweeps, gap metric.
//! * [`report`] — solution report serialization.

pub mod dr_admm;
pub mod dr_exact;
pub mod dr_split;
pub mod experiments;
pub mod pricing;
pub mod report;
pub mod system_model;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("io error: {0}")]
    Io(String),
    #[error("case schema error: {0}")]
    Schema(String),
    #[error("case validation error: {0}")]
    Validation(String),
    #[error("line {0} has zero reactance (singular)")]
    SingularLine(usize),
    #[error("parameter error: {0}")]
    Parameter(String),
}

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("io error: {0}")]
    Io(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error(transparent)]
    Case(CaseError),
    #[error(transparent)]
    Conic(conic::ConicError),
    #[error("base dispatch failed: {0}")]
    BaseDispatch(String),
    #[error("ambiguity parameters invalid: insufficient samples (need M > {m_bar:.3e}; alpha_bar = {alpha_bar:.4}, beta_bar = {beta_bar:.4})")]
    InvalidAmbiguity { m_bar: f64, alpha_bar: f64, beta_bar: f64 },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Conic(#[from] conic::ConicError),
    #[error("solve ended with status {status}: primal {primal:.3e}, dual {dual:.3e}, gap {gap:.3e}")]
    SolveFailed { status: &'static str, primal: f64, dual: f64, gap: f64 },
    #[error("solution rejected: {0}")]
    Rejected(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error("partition error: {0}")]
    Partition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("io error: {0}")]
    Io(String),
}

/// Path of a bundled fixture (case files, partitions).
pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
