//! Horizon classification, strict multi-model consensus, and soft-voting
//! ensembles.
//!
//! A model's survival probability S(t) at a horizon is thresholded with a
//! model-specific cutoff tau chosen by maximizing Youden's index on the
//! training set:
//!
//! ```text
//! label = 1  if S(t) < tau    (predicted event by the horizon)
//! label = 0  if S(t) >= tau
//! ```
//!
//! A subject enters the consensus subset only if every model emits the same
//! label; coverage is the retained fraction of valid subjects. Subjects
//! censored before the horizon have no defined truth label and are excluded
//! as invalid.

use crate::dataio::OutcomeTable;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Validity and truth labels of subjects at a horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonValidity {
    pub horizon_months: f64,
    /// Valid iff the outcome determines event-by-horizon status.
    pub valid: Vec<bool>,
    /// 1 = event by the horizon; meaningful only where valid.
    pub truth: Vec<u8>,
}

/// A subject is valid iff it died by the horizon or was followed past it;
/// censored-before-horizon subjects are invalid.
pub fn valid_at_horizon(outcomes: &OutcomeTable, horizon_months: f64) -> HorizonValidity {
    let mut valid = Vec::with_capacity(outcomes.len());
    let mut truth = Vec::with_capacity(outcomes.len());
    for i in 0..outcomes.len() {
        let t = outcomes.times()[i];
        let e = outcomes.events()[i];
        if e == 1 && t <= horizon_months {
            valid.push(true);
            truth.push(1);
        } else if t > horizon_months {
            valid.push(true);
            truth.push(0);
        } else {
            valid.push(false);
            truth.push(0);
        }
    }
    HorizonValidity {
        horizon_months,
        valid,
        truth,
    }
}

/// Chosen threshold and the Youden index it achieves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YoudenThreshold {
    pub tau: f64,
    pub j: f64,
}

/// Maximize J = sensitivity + specificity - 1 for the rule
/// "predict event iff S < tau" over candidate cuts: 0, midpoints of sorted
/// distinct S values, and 2 (the finite stand-ins for the -inf/+inf
/// sentinels on [0, 1]). Ties go to the smallest tau.
pub fn youden_threshold(survival_probs: &[f64], truth: &[u8]) -> Result<YoudenThreshold> {
    if survival_probs.len() != truth.len() {
        return Err(Error::LengthMismatch("youden inputs".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t == 1).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut distinct: Vec<f64> = survival_probs.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let mut candidates = Vec::with_capacity(distinct.len() + 1);
    candidates.push(0.0);
    for w in distinct.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    candidates.push(2.0);

    let mut best = YoudenThreshold {
        tau: candidates[0],
        j: f64::NEG_INFINITY,
    };
    for &tau in &candidates {
        let mut tp = 0usize;
        let mut tn = 0usize;
        for (&s, &t) in survival_probs.iter().zip(truth) {
            let pred = u8::from(s < tau);
            if pred == 1 && t == 1 {
                tp += 1;
            } else if pred == 0 && t == 0 {
                tn += 1;
            }
        }
        let j = tp as f64 / n_pos as f64 + tn as f64 / n_neg as f64 - 1.0;
        if j > best.j {
            best = YoudenThreshold { tau, j };
        }
    }
    Ok(best)
}

/// Predicted label per subject: 1 iff S < tau (strict).
pub fn classify_at_horizon(survival_probs: &[f64], tau: f64) -> Vec<u8> {
    survival_probs.iter().map(|&s| u8::from(s < tau)).collect()
}

/// Subjects on which all models agree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsensusSubset {
    /// Positions (into the aligned label vectors) of retained subjects.
    pub indices: Vec<usize>,
    /// The shared label per retained subject.
    pub labels: Vec<u8>,
    /// Retained fraction of the aligned subjects.
    pub coverage: f64,
}

/// Strict agreement across aligned per-model label vectors.
pub fn consensus_subset(label_vectors: &[Vec<u8>]) -> Result<ConsensusSubset> {
    if label_vectors.len() < 2 {
        return Err(Error::TooFewModels(label_vectors.len()));
    }
    let n = label_vectors[0].len();
    if label_vectors.iter().any(|v| v.len() != n) {
        return Err(Error::LengthMismatch("consensus label vectors".into()));
    }
    let mut indices = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let first = label_vectors[0][i];
        if label_vectors.iter().all(|v| v[i] == first) {
            indices.push(i);
            labels.push(first);
        }
    }
    let coverage = if n == 0 {
        0.0
    } else {
        indices.len() as f64 / n as f64
    };
    Ok(ConsensusSubset {
        indices,
        labels,
        coverage,
    })
}

/// Confusion-matrix ratios plus the horizon t-AUC on the same subjects.
/// Sensitivity/specificity are `None` when the respective class is absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub t_auc: Option<f64>,
}

/// Standard confusion ratios; `t_auc` is the IPCW cumulative/dynamic AUC of
/// `risks` on the subset outcomes (None when it is undefined there).
pub fn classification_metrics(
    pred: &[u8],
    truth: &[u8],
    risks: &[f64],
    subset_outcomes: &OutcomeTable,
    train_outcomes: &OutcomeTable,
    horizon_months: f64,
) -> Result<ClassificationMetrics> {
    let n = pred.len();
    if truth.len() != n || risks.len() != n || subset_outcomes.len() != n {
        return Err(Error::LengthMismatch("classification inputs".into()));
    }
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fp += 1,
            _ => fn_ += 1,
        }
    }
    let accuracy = (tp + tn) as f64 / n as f64;
    let sensitivity = if tp + fn_ > 0 {
        Some(tp as f64 / (tp + fn_) as f64)
    } else {
        None
    };
    let specificity = if tn + fp > 0 {
        Some(tn as f64 / (tn + fp) as f64)
    } else {
        None
    };
    let t_auc = crate::metrics::cumulative_dynamic_auc(
        train_outcomes,
        subset_outcomes.times(),
        subset_outcomes.events(),
        risks,
        horizon_months,
    )
    .ok();
    Ok(ClassificationMetrics {
        accuracy,
        sensitivity,
        specificity,
        t_auc,
    })
}

/// Elementwise arithmetic mean of aligned per-model risk vectors
/// (soft voting).
pub fn ensemble_mean(risk_vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    if risk_vectors.len() < 2 {
        return Err(Error::TooFewModels(risk_vectors.len()));
    }
    let n = risk_vectors[0].len();
    if risk_vectors.iter().any(|v| v.len() != n) {
        return Err(Error::LengthMismatch("ensemble risk vectors".into()));
    }
    let k = risk_vectors.len() as f64;
    Ok((0..n)
        .map(|i| risk_vectors.iter().map(|v| v[i]).sum::<f64>() / k)
        .collect())
}

/// Variant that standardizes each model's risks with its training mean/SD
/// before averaging, for models whose partial hazards live on incomparable
/// scales. The choice is flagged in output metadata by the caller.
pub fn ensemble_zscored(
    train_risk_vectors: &[Vec<f64>],
    eval_risk_vectors: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if eval_risk_vectors.len() < 2 {
        return Err(Error::TooFewModels(eval_risk_vectors.len()));
    }
    if train_risk_vectors.len() != eval_risk_vectors.len() {
        return Err(Error::LengthMismatch(
            "train/eval model counts differ".into(),
        ));
    }
    let n = eval_risk_vectors[0].len();
    if eval_risk_vectors.iter().any(|v| v.len() != n) {
        return Err(Error::LengthMismatch("ensemble risk vectors".into()));
    }
    let mut standardized = Vec::with_capacity(eval_risk_vectors.len());
    for (train, eval) in train_risk_vectors.iter().zip(eval_risk_vectors) {
        let m = train.iter().sum::<f64>() / train.len() as f64;
        let var = train.iter().map(|x| (x - m).powi(2)).sum::<f64>() / train.len() as f64;
        let sd = var.sqrt();
        if sd == 0.0 {
            return Err(Error::ConstantColumn("ensemble member risks".into()));
        }
        standardized.push(eval.iter().map(|&x| (x - m) / sd).collect::<Vec<f64>>());
    }
    ensemble_mean(&standardized)
}
