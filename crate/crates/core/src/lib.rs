//! Survival modelling toolkit for multicentre CT cohorts.
//!
//! The crate covers the full tabular/image pipeline around a penalized Cox
//! proportional-hazards model:
//!
//! - [`dataio`]: feature/outcome tables, raw voxel volumes, cohort curation
//! - [`rkn`]: reconstruction-kernel normalization of CT volumes (frequency-band
//!   energy matching against a reference)
//! - [`cac`]: Agatston coronary-calcium scoring from a volume + artery mask
//! - [`combat`]: reference-batch empirical-Bayes ComBat feature harmonization
//! - [`featsel`]: imputation, variance/correlation filters, cross-validated
//!   stability selection, PCA
//! - [`cox`]: elastic-net Cox fitting, risk prediction, baseline survival,
//!   hyperparameter search
//! - [`metrics`]: C-index, Kaplan-Meier, log-rank, hazard ratios, IPCW
//!   time-dependent AUC, bootstrap confidence machinery
//! - [`consensus`]: Youden-thresholded horizon classification, strict
//!   multi-model consensus, soft-voting ensembles
//! - [`explain`]: exact additive attributions for linear Cox risk scores
//! - [`synth`]: synthetic cohorts and calcium phantoms with ground truth
//! - [`pipeline`]: config-driven end-to-end runs with deterministic reports

pub mod cac;
pub mod combat;
pub mod consensus;
pub mod cox;
pub mod dataio;
pub mod error;
pub mod explain;
pub mod featsel;
pub(crate) mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod rkn;
pub mod synth;

pub use error::{Error, Result};

pub use dataio::{FeatureTable, Mask, OutcomeTable, Volume};
