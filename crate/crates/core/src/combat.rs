//! Reference-batch parametric empirical-Bayes ComBat harmonization.
//!
//! Each feature is modelled as
//!
//! ```text
//! y = alpha + X * beta + gamma_batch + delta_batch * eps
//! ```
//!
//! with `gamma` and `delta` the additive and multiplicative scanner effects.
//! Estimation is anchored to a reference batch: `alpha` is the reference
//! batch's intercept, the standardization scale is the reference batch's
//! residual SD, and after empirical-Bayes shrinkage the reference batch is
//! pinned to `gamma* = 0`, `delta* = 1`, so reference rows pass through
//! unchanged.
//!
//! Fitting can be train-only (unseen batches are a hard error at apply time)
//! or pooled/transductive (fit on train and test rows together, for cohorts
//! whose test set contains a centre with no training subjects).

use crate::dataio::FeatureTable;
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Where the fitting rows come from; recorded on the model so downstream
/// leakage audits can tell the two apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombatMode {
    /// Fit on training rows only; applying to an unseen batch is an error.
    TrainOnly,
    /// Transductive fit on all rows (train + test) so every batch is seen.
    Pooled,
}

/// Harmonization settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonizationConfig {
    pub reference_batch: String,
    #[serde(default)]
    pub covariate_names: Vec<String>,
    pub mode: CombatMode,
    /// Parametric empirical-Bayes shrinkage of the batch estimates
    /// (on by default; off uses the per-batch moments directly).
    #[serde(default = "default_true")]
    pub empirical_bayes: bool,
}

fn default_true() -> bool {
    true
}

impl HarmonizationConfig {
    pub fn new(reference_batch: &str) -> Self {
        Self {
            reference_batch: reference_batch.to_string(),
            covariate_names: Vec::new(),
            mode: CombatMode::Pooled,
            empirical_bayes: true,
        }
    }
}

/// Per-batch location/scale adjustments for one batch across all features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchAdjustment {
    pub batch: String,
    /// Posterior additive effect in standardized units (0 for the reference).
    pub gamma_star: Vec<f64>,
    /// Posterior multiplicative scale, SD units (1 for the reference).
    pub delta_star: Vec<f64>,
}

/// Fitted ComBat model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombatModel {
    pub feature_names: Vec<String>,
    pub reference_batch: String,
    pub covariate_names: Vec<String>,
    pub mode: CombatMode,
    pub empirical_bayes: bool,
    /// Reference-batch intercept per feature.
    pub alpha: Vec<f64>,
    /// Covariate coefficients, row-major (feature x covariate).
    pub beta: Vec<Vec<f64>>,
    /// Reference-batch residual SD per feature (standardization scale).
    pub sigma: Vec<f64>,
    pub batches: Vec<BatchAdjustment>,
}

impl CombatModel {
    pub fn batch_index(&self, label: &str) -> Option<usize> {
        self.batches.iter().position(|b| b.batch == label)
    }
}

struct DesignInfo {
    /// Distinct batch labels in first-appearance order.
    batch_labels: Vec<String>,
    /// Per-row batch index into `batch_labels`.
    row_batch: Vec<usize>,
    /// n x (n_batches + n_covariates) design matrix.
    design: Array2<f64>,
    covariates: Array2<f64>,
}

fn build_design(table: &FeatureTable, config: &HarmonizationConfig) -> Result<DesignInfo> {
    let batch = table.batch().ok_or(Error::MissingBatchLabels)?;
    let n = table.n_subjects();

    let mut batch_labels: Vec<String> = Vec::new();
    let mut row_batch = Vec::with_capacity(n);
    for label in batch {
        let idx = match batch_labels.iter().position(|b| b == label) {
            Some(i) => i,
            None => {
                batch_labels.push(label.clone());
                batch_labels.len() - 1
            }
        };
        row_batch.push(idx);
    }

    let mut covariates = Array2::zeros((n, config.covariate_names.len()));
    for (k, name) in config.covariate_names.iter().enumerate() {
        let cov = table
            .covariates()
            .iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        for (i, &v) in cov.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::MissingValues("combat covariates"));
            }
            covariates[[i, k]] = v;
        }
    }

    let n_b = batch_labels.len();
    let q = config.covariate_names.len();
    let mut design = Array2::zeros((n, n_b + q));
    for (i, &b) in row_batch.iter().enumerate() {
        design[[i, b]] = 1.0;
        for k in 0..q {
            design[[i, n_b + k]] = covariates[[i, k]];
        }
    }
    Ok(DesignInfo {
        batch_labels,
        row_batch,
        design,
        covariates,
    })
}

/// Fit the ComBat model on `features` (the training rows in train-only mode,
/// or the pooled rows in transductive mode).
pub fn combat_fit(features: &FeatureTable, config: &HarmonizationConfig) -> Result<CombatModel> {
    if features.n_missing() > 0 {
        return Err(Error::MissingValues("combat_fit"));
    }
    let info = build_design(features, config)?;
    let reference = info
        .batch_labels
        .iter()
        .position(|b| b == &config.reference_batch)
        .ok_or_else(|| Error::ReferenceBatchMissing(config.reference_batch.clone()))?;

    let n = features.n_subjects();
    let p = features.n_features();
    let n_b = info.batch_labels.len();
    let q = config.covariate_names.len();

    let mut batch_counts = vec![0usize; n_b];
    for &b in &info.row_batch {
        batch_counts[b] += 1;
    }
    for (b, &count) in batch_counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::BatchTooSmall {
                batch: info.batch_labels[b].clone(),
                count,
            });
        }
    }

    // Least squares of every feature on [batch one-hots | covariates].
    let y = features.complete_values()?.to_owned();
    let dtd = info.design.t().dot(&info.design);
    let dty = info.design.t().dot(&y);
    let coef = crate::linalg::solve_multi(&dtd, &dty)?; // (n_b + q) x p

    let mut alpha = vec![0.0; p];
    let mut beta = vec![vec![0.0; q]; p];
    for j in 0..p {
        alpha[j] = coef[[reference, j]];
        for k in 0..q {
            beta[j][k] = coef[[n_b + k, j]];
        }
    }

    // Standardization scale: reference-batch residual SD (population).
    let mut sigma = vec![0.0; p];
    let n_ref = batch_counts[reference] as f64;
    for j in 0..p {
        let mut ss = 0.0;
        for i in 0..n {
            if info.row_batch[i] == reference {
                let mut fitted = alpha[j];
                for k in 0..q {
                    fitted += beta[j][k] * info.covariates[[i, k]];
                }
                ss += (y[[i, j]] - fitted).powi(2);
            }
        }
        let var = ss / n_ref;
        if var < 1e-12 {
            return Err(Error::ZeroReferenceVariance(
                features.feature_names()[j].clone(),
            ));
        }
        sigma[j] = var.sqrt();
    }

    // Standardize and take per-batch moments of z.
    let mut z = Array2::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            let mut fitted = alpha[j];
            for k in 0..q {
                fitted += beta[j][k] * info.covariates[[i, k]];
            }
            z[[i, j]] = (y[[i, j]] - fitted) / sigma[j];
        }
    }

    let mut gamma_hat = vec![vec![0.0; p]; n_b]; // per-batch mean of z
    let mut delta2_hat = vec![vec![0.0; p]; n_b]; // per-batch sample variance of z
    for b in 0..n_b {
        let rows: Vec<usize> = (0..n).filter(|&i| info.row_batch[i] == b).collect();
        let nb = rows.len() as f64;
        for j in 0..p {
            let mean: f64 = rows.iter().map(|&i| z[[i, j]]).sum::<f64>() / nb;
            gamma_hat[b][j] = mean;
            let ss: f64 = rows.iter().map(|&i| (z[[i, j]] - mean).powi(2)).sum();
            delta2_hat[b][j] = ss / (nb - 1.0);
        }
    }

    let mut batches = Vec::with_capacity(n_b);
    for b in 0..n_b {
        let (gamma_star, delta2_star) = if b == reference {
            (vec![0.0; p], vec![1.0; p])
        } else if config.empirical_bayes && p >= 2 {
            eb_posterior(
                &gamma_hat[b],
                &delta2_hat[b],
                &z,
                &info.row_batch,
                b,
                batch_counts[b],
            )
        } else {
            (gamma_hat[b].clone(), delta2_hat[b].clone())
        };
        batches.push(BatchAdjustment {
            batch: info.batch_labels[b].clone(),
            gamma_star,
            delta_star: delta2_star.iter().map(|&v| v.sqrt()).collect(),
        });
    }

    Ok(CombatModel {
        feature_names: features.feature_names().to_vec(),
        reference_batch: config.reference_batch.clone(),
        covariate_names: config.covariate_names.clone(),
        mode: config.mode,
        empirical_bayes: config.empirical_bayes,
        alpha,
        beta,
        sigma,
        batches,
    })
}

/// Coupled posterior updates for one batch: normal prior on gamma
/// (moments across features), inverse-gamma prior on delta^2
/// (method-of-moments shape/scale), iterated to a fixed point.
fn eb_posterior(
    gamma_hat: &[f64],
    delta2_hat: &[f64],
    z: &Array2<f64>,
    row_batch: &[usize],
    batch: usize,
    n_batch: usize,
) -> (Vec<f64>, Vec<f64>) {
    let p = gamma_hat.len();
    let nb = n_batch as f64;
    let pf = p as f64;

    let gamma_bar: f64 = gamma_hat.iter().sum::<f64>() / pf;
    let tau2: f64 = gamma_hat
        .iter()
        .map(|&g| (g - gamma_bar).powi(2))
        .sum::<f64>()
        / (pf - 1.0);

    let d_mean: f64 = delta2_hat.iter().sum::<f64>() / pf;
    let d_var: f64 = delta2_hat
        .iter()
        .map(|&d| (d - d_mean).powi(2))
        .sum::<f64>()
        / (pf - 1.0);

    // Degenerate cross-feature spread: the prior is a point mass, so the
    // moment formulas blow up; fall back to the naive estimates.
    if d_var < 1e-30 {
        return (gamma_hat.to_vec(), delta2_hat.to_vec());
    }
    let aprior = (2.0 * d_var + d_mean * d_mean) / d_var;
    let bprior = (d_mean * d_var + d_mean.powi(3)) / d_var;

    let rows: Vec<usize> = (0..row_batch.len())
        .filter(|&i| row_batch[i] == batch)
        .collect();

    let mut gamma_star = gamma_hat.to_vec();
    let mut delta2_star = delta2_hat.to_vec();
    for j in 0..p {
        let mut g_old = gamma_hat[j];
        let mut d_old = delta2_hat[j];
        for _ in 0..500 {
            let g_new = if tau2 == 0.0 {
                gamma_bar
            } else {
                (nb * tau2 * gamma_hat[j] + d_old * gamma_bar) / (nb * tau2 + d_old)
            };
            let sum2: f64 = rows
                .iter()
                .map(|&i| (z[[i, j]] - g_new).powi(2))
                .sum();
            let d_new = (0.5 * sum2 + bprior) / (nb / 2.0 + aprior - 1.0);
            let change = rel_change(g_new, g_old).max(rel_change(d_new, d_old));
            g_old = g_new;
            d_old = d_new;
            if change < 1e-6 {
                break;
            }
        }
        gamma_star[j] = g_old;
        delta2_star[j] = d_old;
    }
    (gamma_star, delta2_star)
}

fn rel_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-12)
}

/// Harmonize a table with a fitted model:
/// `y_harm = sigma * (z - gamma*) / delta* + alpha + X * beta`.
pub fn combat_apply(model: &CombatModel, features: &FeatureTable) -> Result<FeatureTable> {
    if features.n_missing() > 0 {
        return Err(Error::MissingValues("combat_apply"));
    }
    if features.feature_names() != model.feature_names.as_slice() {
        return Err(Error::FeatureMismatch(format!(
            "model has {} features, table has {}",
            model.feature_names.len(),
            features.n_features()
        )));
    }
    let batch = features.batch().ok_or(Error::MissingBatchLabels)?;
    let mut row_batch = Vec::with_capacity(features.n_subjects());
    for label in batch {
        let idx = model
            .batch_index(label)
            .ok_or_else(|| Error::UnseenBatch(label.clone()))?;
        row_batch.push(idx);
    }

    let q = model.covariate_names.len();
    let mut covariates = Array2::zeros((features.n_subjects(), q));
    for (k, name) in model.covariate_names.iter().enumerate() {
        let cov = features
            .covariates()
            .iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        for (i, &v) in cov.values.iter().enumerate() {
            covariates[[i, k]] = v;
        }
    }

    let y = features.complete_values()?;
    let mut out = Array2::zeros(y.raw_dim());
    for i in 0..features.n_subjects() {
        let adj = &model.batches[row_batch[i]];
        for j in 0..features.n_features() {
            let mut fitted = model.alpha[j];
            for k in 0..q {
                fitted += model.beta[j][k] * covariates[[i, k]];
            }
            let z = (y[[i, j]] - fitted) / model.sigma[j];
            out[[i, j]] = model.sigma[j] * (z - adj.gamma_star[j]) / adj.delta_star[j] + fitted;
        }
    }
    features.with_values(out)
}
