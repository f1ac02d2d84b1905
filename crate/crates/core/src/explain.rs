//! Exact additive attributions for linear Cox risk scores.
//!
//! For a model that is linear in its covariates the Shapley attribution has a
//! closed form under feature independence:
//!
//! ```text
//! phi[i][j] = beta[j] * (x[i][j] - background_mean[j])
//! ```
//!
//! so per subject the attributions sum exactly to the log partial hazard
//! minus the base value. Values are reported on the log-hazard scale, the
//! model's natural linear scale.

use crate::cox::CoxModel;
use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Per-subject, per-feature attributions in log-hazard units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attribution {
    pub feature_names: Vec<String>,
    /// Row-major phi matrix (subject x feature).
    pub phi: Vec<Vec<f64>>,
    pub background_means: Vec<f64>,
    /// Log partial hazard at the background point.
    pub base_value: f64,
}

/// Attributions for every row of `x`. The background defaults to the model's
/// training means, which makes the base value 0.
pub fn shap_linear(
    model: &CoxModel,
    x: ArrayView2<'_, f64>,
    background_means: Option<&[f64]>,
) -> Result<Attribution> {
    let p = model.beta.len();
    if x.ncols() != p {
        return Err(Error::LengthMismatch(format!(
            "{} columns vs {} coefficients",
            x.ncols(),
            p
        )));
    }
    let background: Vec<f64> = match background_means {
        Some(b) => {
            if b.len() != p {
                return Err(Error::LengthMismatch(format!(
                    "{} background means vs {} coefficients",
                    b.len(),
                    p
                )));
            }
            b.to_vec()
        }
        None => model.train_means.clone(),
    };
    let base_value: f64 = model
        .beta
        .iter()
        .zip(&background)
        .zip(&model.train_means)
        .map(|((&b, &mu), &m)| b * (mu - m))
        .sum();
    let phi = (0..x.nrows())
        .map(|i| {
            (0..p)
                .map(|j| model.beta[j] * (x[[i, j]] - background[j]))
                .collect()
        })
        .collect();
    Ok(Attribution {
        feature_names: model.feature_names.clone(),
        phi,
        background_means: background,
        base_value,
    })
}

/// One row of the ranked summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapSummaryEntry {
    pub feature: String,
    pub mean_abs_phi: f64,
    pub mean_phi: f64,
    /// The per-subject phi values, for downstream plotting.
    pub phi_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapSummary {
    pub entries: Vec<ShapSummaryEntry>,
}

/// Rank features by mean |phi| descending (ties by name ascending) and keep
/// the top k.
pub fn shap_summary(attr: &Attribution, k: usize) -> ShapSummary {
    let n = attr.phi.len().max(1) as f64;
    let p = attr.feature_names.len();
    let mut entries: Vec<ShapSummaryEntry> = (0..p)
        .map(|j| {
            let phi_values: Vec<f64> = attr.phi.iter().map(|row| row[j]).collect();
            let mean_abs = phi_values.iter().map(|v| v.abs()).sum::<f64>() / n;
            let mean = phi_values.iter().sum::<f64>() / n;
            ShapSummaryEntry {
                feature: attr.feature_names[j].clone(),
                mean_abs_phi: mean_abs,
                mean_phi: mean,
                phi_values,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.mean_abs_phi
            .partial_cmp(&a.mean_abs_phi)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    entries.truncate(k);
    ShapSummary { entries }
}

/// Convenience: log partial hazards of rows of `x` (for the local-accuracy
/// identity checks).
pub fn log_partial_hazards(model: &CoxModel, x: ArrayView2<'_, f64>) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            model
                .beta
                .iter()
                .zip(x.row(i))
                .zip(&model.train_means)
                .map(|((&b, &v), &m)| b * (v - m))
                .sum()
        })
        .collect()
}

/// Build an Array2 from row-major data (test/CLI helper).
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Array2<f64> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((n, p), |(i, j)| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::{CoxModel, FitDiagnostics};
    use ndarray::array;

    fn model(beta: Vec<f64>, means: Vec<f64>) -> CoxModel {
        let p = beta.len();
        CoxModel {
            feature_names: (0..p).map(|j| format!("f{j}")).collect(),
            beta,
            train_means: means,
            baseline_cumhaz: vec![],
            penalty: 0.0,
            l1_ratio: 0.0,
            diagnostics: FitDiagnostics {
                objective: 0.0,
                iterations: 1,
                converged: true,
            },
        }
    }

    #[test]
    fn zero_at_background() {
        let m = model(vec![1.0, -2.0], vec![0.5, 1.5]);
        let x = array![[0.5, 1.5]];
        let a = shap_linear(&m, x.view(), None).unwrap();
        assert_eq!(a.phi[0], vec![0.0, 0.0]);
        assert_eq!(a.base_value, 0.0);
    }

    #[test]
    fn closed_form_single_feature() {
        let m = model(vec![2.0], vec![0.0]);
        let x = array![[3.0]];
        let a = shap_linear(&m, x.view(), Some(&[0.0])).unwrap();
        assert_eq!(a.phi[0][0], 6.0);
    }

    #[test]
    fn local_accuracy_holds_exactly() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(808);
        let p = 6;
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let means: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = model(beta, means);
        let mut x = Array2::zeros((100, p));
        for i in 0..100 {
            for j in 0..p {
                x[[i, j]] = rng.random_range(-3.0..3.0);
            }
        }
        // Default background (train means).
        let a = shap_linear(&m, x.view(), None).unwrap();
        let lp = log_partial_hazards(&m, x.view());
        for i in 0..100 {
            let total: f64 = a.phi[i].iter().sum::<f64>() + a.base_value;
            assert!((total - lp[i]).abs() < 1e-12);
        }
        // Custom background shifts the base value but keeps the identity.
        let bg: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a2 = shap_linear(&m, x.view(), Some(&bg)).unwrap();
        for i in 0..100 {
            let total: f64 = a2.phi[i].iter().sum::<f64>() + a2.base_value;
            assert!((total - lp[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_features_get_equal_phi() {
        let m = model(vec![1.5, 1.5], vec![0.0, 0.0]);
        let x = array![[2.0, 2.0], [-1.0, -1.0]];
        let a = shap_linear(&m, x.view(), None).unwrap();
        for row in &a.phi {
            assert_eq!(row[0], row[1]);
        }
    }

    #[test]
    fn summary_ranking_and_ties() {
        let m = model(vec![3.0, 0.1, 0.1], vec![0.0, 0.0, 0.0]);
        let x = array![[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]];
        let a = shap_linear(&m, x.view(), None).unwrap();
        let s = shap_summary(&a, 20);
        assert_eq!(s.entries[0].feature, "f0");
        // f1 and f2 tie on mean |phi|; name order breaks the tie.
        assert_eq!(s.entries[1].feature, "f1");
        assert_eq!(s.entries[2].feature, "f2");
        // All-zero attributions: name-ordered with zeros.
        let mz = model(vec![0.0, 0.0], vec![0.0, 0.0]);
        let az = shap_linear(&mz, array![[1.0, 2.0]].view(), None).unwrap();
        let sz = shap_summary(&az, 2);
        assert_eq!(sz.entries[0].feature, "f0");
        assert_eq!(sz.entries[0].mean_abs_phi, 0.0);

        // Ranking equals an independent sort oracle on mean |phi|.
        let vals: Vec<(String, f64)> = s
            .entries
            .iter()
            .map(|e| (e.feature.clone(), e.mean_abs_phi))
            .collect();
        let mut oracle = vals.clone();
        oracle.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| a.0.cmp(&b.0))
        });
        assert_eq!(vals, oracle);
    }

    #[test]
    fn feature_at_background_everywhere_is_zero() {
        let m = model(vec![1.0, 2.0], vec![0.7, 0.0]);
        let x = array![[0.7, 1.0], [0.7, -2.0], [0.7, 0.5]];
        let a = shap_linear(&m, x.view(), None).unwrap();
        for row in &a.phi {
            assert_eq!(row[0], 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = model(vec![1.0], vec![0.0]);
        let x = array![[1.0, 2.0]];
        assert!(shap_linear(&m, x.view(), None).is_err());
    }
}
