//! Elastic-net Cox proportional-hazards fitting and prediction.
//!
//! The hazard for a subject with covariates x is
//!
//! ```text
//! h(t | x) = h0(t) * exp(beta . x)
//! ```
//!
//! Fitting maximizes the Efron-tie-corrected partial log-likelihood averaged
//! per subject, minus `penalty * (l1_ratio * |beta|_1 + (1 - l1_ratio)/2 * |beta|_2^2)`.
//! Averaging makes penalty values transfer across cohort sizes. The solver is
//! a proximal Newton outer loop (quadratic expansion of the smooth part)
//! with soft-threshold coordinate updates inside and a halving line search,
//! so the penalized objective never increases. Covariates are centered by
//! their training means before fitting; the baseline cumulative hazard is the
//! Breslow estimator on the centered design.

use crate::dataio::OutcomeTable;
use crate::error::{Error, Result};
use crate::featsel::{pca_fit, pca_transform, stratified_folds};
use crate::metrics::concordance;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Solver diagnostics attached to every fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fitted Cox model: coefficients in log-hazard units per feature unit,
/// training means used for centering, and the Breslow baseline cumulative
/// hazard as a right-continuous step function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoxModel {
    pub feature_names: Vec<String>,
    pub beta: Vec<f64>,
    pub train_means: Vec<f64>,
    /// Sorted (time, cumulative hazard) steps.
    pub baseline_cumhaz: Vec<(f64, f64)>,
    pub penalty: f64,
    pub l1_ratio: f64,
    pub diagnostics: FitDiagnostics,
}

/// Event-time grouping shared by the likelihood, gradient, and Hessian.
struct RiskGroups {
    /// Subject indices sorted by descending time.
    order: Vec<usize>,
    /// (start, end) ranges in `order` per distinct time, ascending risk-set
    /// growth (descending time), plus the event indices at that time.
    groups: Vec<(usize, usize, Vec<usize>)>,
}

fn group_by_time(outcomes: &OutcomeTable) -> RiskGroups {
    let n = outcomes.len();
    let times = outcomes.times();
    let events = outcomes.events();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).unwrap());
    let mut groups = Vec::new();
    let mut start = 0;
    while start < n {
        let t = times[order[start]];
        let mut end = start;
        while end < n && times[order[end]] == t {
            end += 1;
        }
        let deaths: Vec<usize> = order[start..end]
            .iter()
            .copied()
            .filter(|&i| events[i] == 1)
            .collect();
        groups.push((start, end, deaths));
        start = end;
    }
    RiskGroups { order, groups }
}

/// Efron partial log-likelihood (sum over subjects, not averaged) of the
/// linear predictors `eta`.
pub fn efron_loglik(eta: &[f64], outcomes: &OutcomeTable) -> f64 {
    let rg = group_by_time(outcomes);
    let theta: Vec<f64> = eta.iter().map(|&e| e.exp()).collect();
    let mut s0 = 0.0;
    let mut ll = 0.0;
    for &(start, end, ref deaths) in &rg.groups {
        for &i in &rg.order[start..end] {
            s0 += theta[i];
        }
        let m = deaths.len();
        if m == 0 {
            continue;
        }
        let s0_d: f64 = deaths.iter().map(|&i| theta[i]).sum();
        for &i in deaths {
            ll += eta[i];
        }
        for l in 0..m {
            let frac = l as f64 / m as f64;
            ll -= (s0 - frac * s0_d).ln();
        }
    }
    ll
}

/// Analytic gradient of the Efron partial log-likelihood with respect to
/// beta, for centered covariates `x` (sum over subjects, not averaged).
pub fn efron_gradient(x: ArrayView2<'_, f64>, beta: &[f64], outcomes: &OutcomeTable) -> Vec<f64> {
    let (grad, _) = efron_derivatives(x, beta, outcomes, false);
    grad
}

/// Observed information (negative Hessian of the Efron partial
/// log-likelihood, sum form) at `beta`.
pub fn observed_information(
    x: ArrayView2<'_, f64>,
    beta: &[f64],
    outcomes: &OutcomeTable,
) -> Array2<f64> {
    let (_, hess) = efron_derivatives(x, beta, outcomes, true);
    hess.expect("hessian requested")
}

fn linear_predictors(x: ArrayView2<'_, f64>, beta: &[f64]) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            beta.iter()
                .enumerate()
                .map(|(j, &b)| b * x[[i, j]])
                .sum::<f64>()
        })
        .collect()
}

/// Gradient and (optionally) negative Hessian of the Efron log-likelihood.
fn efron_derivatives(
    x: ArrayView2<'_, f64>,
    beta: &[f64],
    outcomes: &OutcomeTable,
    with_hessian: bool,
) -> (Vec<f64>, Option<Array2<f64>>) {
    let p = x.ncols();
    let rg = group_by_time(outcomes);
    let eta = linear_predictors(x, beta);
    let theta: Vec<f64> = eta.iter().map(|&e| e.exp()).collect();

    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = if with_hessian {
        Some(Array2::<f64>::zeros((p, p)))
    } else {
        None
    };
    let mut grad = vec![0.0; p];
    let mut info = if with_hessian {
        Some(Array2::<f64>::zeros((p, p)))
    } else {
        None
    };

    for &(start, end, ref deaths) in &rg.groups {
        for &i in &rg.order[start..end] {
            s0 += theta[i];
            for j in 0..p {
                s1[j] += theta[i] * x[[i, j]];
            }
            if let Some(s2m) = s2.as_mut() {
                for a in 0..p {
                    let ta = theta[i] * x[[i, a]];
                    for b in a..p {
                        s2m[[a, b]] += ta * x[[i, b]];
                    }
                }
            }
        }
        let m = deaths.len();
        if m == 0 {
            continue;
        }
        let s0_d: f64 = deaths.iter().map(|&i| theta[i]).sum();
        let mut s1_d = vec![0.0; p];
        for &i in deaths {
            for j in 0..p {
                s1_d[j] += theta[i] * x[[i, j]];
                grad[j] += x[[i, j]];
            }
        }
        let mut s2_d = if with_hessian {
            let mut m2 = Array2::<f64>::zeros((p, p));
            for &i in deaths {
                for a in 0..p {
                    let ta = theta[i] * x[[i, a]];
                    for b in a..p {
                        m2[[a, b]] += ta * x[[i, b]];
                    }
                }
            }
            Some(m2)
        } else {
            None
        };
        if let (Some(s2m), Some(s2dm)) = (s2.as_mut(), s2_d.as_mut()) {
            // Mirror the upper triangles once per group.
            for a in 0..p {
                for b in 0..a {
                    s2m[[a, b]] = s2m[[b, a]];
                    s2dm[[a, b]] = s2dm[[b, a]];
                }
            }
        }
        for l in 0..m {
            let frac = l as f64 / m as f64;
            let z = s0 - frac * s0_d;
            let u: Vec<f64> = (0..p).map(|j| s1[j] - frac * s1_d[j]).collect();
            for j in 0..p {
                grad[j] -= u[j] / z;
            }
            if let (Some(infom), Some(s2m), Some(s2dm)) =
                (info.as_mut(), s2.as_ref(), s2_d.as_ref())
            {
                for a in 0..p {
                    for b in 0..p {
                        let v = s2m[[a, b]] - frac * s2dm[[a, b]];
                        infom[[a, b]] += v / z - u[a] * u[b] / (z * z);
                    }
                }
            }
        }
    }
    (grad, info)
}

fn penalized_objective(
    x: ArrayView2<'_, f64>,
    beta: &[f64],
    outcomes: &OutcomeTable,
    l1: f64,
    l2: f64,
) -> f64 {
    let n = outcomes.len() as f64;
    let eta = linear_predictors(x, beta);
    let ll = efron_loglik(&eta, outcomes);
    let pen: f64 = beta
        .iter()
        .map(|&b| l1 * b.abs() + 0.5 * l2 * b * b)
        .sum();
    -ll / n + pen
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

const MAX_OUTER_ITERS: usize = 100;
const OUTER_TOL: f64 = 1e-7;

/// Fit an elastic-net Cox model on a feature matrix and aligned outcomes.
///
/// `penalty >= 0` is the overall regularization strength, `l1_ratio` in
/// [0, 1] mixes lasso and ridge. Non-convergence is reported in the
/// diagnostics, not raised.
pub fn cox_fit(
    x: ArrayView2<'_, f64>,
    outcomes: &OutcomeTable,
    penalty: f64,
    l1_ratio: f64,
    feature_names: &[String],
) -> Result<CoxModel> {
    let n = x.nrows();
    let p = x.ncols();
    if n != outcomes.len() {
        return Err(Error::LengthMismatch(format!(
            "{n} feature rows vs {} outcomes",
            outcomes.len()
        )));
    }
    if feature_names.len() != p {
        return Err(Error::LengthMismatch(format!(
            "{p} columns vs {} names",
            feature_names.len()
        )));
    }
    if outcomes.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cox design matrix"));
    }

    // Center by training means; reject constant columns.
    let mut means = vec![0.0; p];
    for j in 0..p {
        means[j] = x.column(j).sum() / n as f64;
    }
    let mut xc = x.to_owned();
    for j in 0..p {
        let mut constant = true;
        let first = x[[0, j]];
        for i in 0..n {
            xc[[i, j]] -= means[j];
            if x[[i, j]] != first {
                constant = false;
            }
        }
        if constant {
            return Err(Error::ConstantColumn(feature_names[j].clone()));
        }
    }

    let l1 = penalty * l1_ratio;
    let l2 = penalty * (1.0 - l1_ratio);
    let nf = n as f64;

    let mut beta = vec![0.0; p];
    let mut objective = penalized_objective(xc.view(), &beta, outcomes, l1, l2);
    let mut converged = false;
    let mut iterations = 0;

    for outer in 0..MAX_OUTER_ITERS {
        iterations = outer + 1;
        let (grad_sum, info) = efron_derivatives(xc.view(), &beta, outcomes, true);
        // Smooth part is -ll/n: gradient and Hessian flip sign and scale.
        let g: Vec<f64> = grad_sum.iter().map(|&v| -v / nf).collect();
        let h = info.expect("hessian") / nf;

        // Inner coordinate descent on the quadratic model + penalties.
        let mut z = beta.clone();
        let mut r = vec![0.0; p]; // H (z - beta)
        for _sweep in 0..100 {
            let mut max_change = 0.0f64;
            for j in 0..p {
                let a = (h[[j, j]] + l2).max(1e-12);
                let c = g[j] + r[j] - h[[j, j]] * (z[j] - beta[j]);
                let new = soft_threshold(h[[j, j]] * beta[j] - c, l1) / a;
                let delta = new - z[j];
                if delta != 0.0 {
                    for k in 0..p {
                        r[k] += h[[k, j]] * delta;
                    }
                    max_change = max_change.max(delta.abs());
                    z[j] = new;
                }
            }
            if max_change < 1e-10 {
                break;
            }
        }

        // Backtracking line search along z - beta keeps the objective
        // nonincreasing.
        let direction: Vec<f64> = z.iter().zip(&beta).map(|(&zi, &bi)| zi - bi).collect();
        let step_norm = direction.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        if step_norm < OUTER_TOL {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<f64> = beta
                .iter()
                .zip(&direction)
                .map(|(&b, &d)| b + alpha * d)
                .collect();
            let f_new = penalized_objective(xc.view(), &candidate, outcomes, l1, l2);
            if f_new <= objective + 1e-12 {
                beta = candidate;
                objective = f_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break; // stuck; report the best point found
        }
        if alpha * step_norm < OUTER_TOL {
            converged = true;
            break;
        }
    }

    // Breslow baseline cumulative hazard on the centered design.
    let baseline_cumhaz = breslow_baseline(xc.view(), &beta, outcomes);

    Ok(CoxModel {
        feature_names: feature_names.to_vec(),
        beta,
        train_means: means,
        baseline_cumhaz,
        penalty,
        l1_ratio,
        diagnostics: FitDiagnostics {
            objective,
            iterations,
            converged,
        },
    })
}

fn breslow_baseline(
    xc: ArrayView2<'_, f64>,
    beta: &[f64],
    outcomes: &OutcomeTable,
) -> Vec<(f64, f64)> {
    let rg = group_by_time(outcomes);
    let eta = linear_predictors(xc, beta);
    let theta: Vec<f64> = eta.iter().map(|&e| e.exp()).collect();
    let times = outcomes.times();

    // Walk descending time accumulating the risk-set sum, recording steps at
    // event times; then flip to ascending cumulative form.
    let mut s0 = 0.0;
    let mut increments: Vec<(f64, f64)> = Vec::new();
    for &(start, end, ref deaths) in &rg.groups {
        for &i in &rg.order[start..end] {
            s0 += theta[i];
        }
        if !deaths.is_empty() {
            let t = times[rg.order[start]];
            increments.push((t, deaths.len() as f64 / s0));
        }
    }
    increments.reverse();
    let mut cum = 0.0;
    increments
        .into_iter()
        .map(|(t, inc)| {
            cum += inc;
            (t, cum)
        })
        .collect()
}

impl CoxModel {
    /// exp(beta . (x - train_means)).
    pub fn partial_hazard(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::LengthMismatch(format!(
                "{} values for {} coefficients",
                x.len(),
                self.beta.len()
            )));
        }
        let lp: f64 = self
            .beta
            .iter()
            .zip(x)
            .zip(&self.train_means)
            .map(|((&b, &v), &m)| b * (v - m))
            .sum();
        Ok(lp.exp())
    }

    /// Partial hazards for every row of a matrix.
    pub fn partial_hazards(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        (0..x.nrows())
            .map(|i| self.partial_hazard(x.row(i).as_slice().expect("contiguous row")))
            .collect()
    }

    /// Right-continuous step lookup of the baseline cumulative hazard.
    pub fn baseline_at(&self, t: f64) -> f64 {
        let mut h = 0.0;
        for &(time, value) in &self.baseline_cumhaz {
            if time <= t {
                h = value;
            } else {
                break;
            }
        }
        h
    }

    /// S(t | x) = exp(-H0(t) * partial_hazard(x)); S(0) = 1.
    pub fn survival_function(&self, x: &[f64], t: f64) -> Result<f64> {
        let risk = self.partial_hazard(x)?;
        Ok((-self.baseline_at(t) * risk).exp())
    }

    /// Survival probability from a precomputed partial hazard.
    pub fn survival_at(&self, partial_hazard: f64, t: f64) -> f64 {
        (-self.baseline_at(t) * partial_hazard).exp()
    }
}

/// High/low risk labels against the median training risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskGroup {
    High,
    Low,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MedianRiskGroups {
    pub threshold: f64,
    pub labels: Vec<RiskGroup>,
}

/// Median of a slice (average of the two middle order statistics for even
/// lengths).
fn median_of(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Dichotomize evaluation subjects at the median training partial hazard.
/// A subject is high-risk iff risk > threshold (ties at the median go low).
pub fn median_risk_groups(
    model: &CoxModel,
    x_train: ArrayView2<'_, f64>,
    x_eval: ArrayView2<'_, f64>,
) -> Result<MedianRiskGroups> {
    let train_risks = model.partial_hazards(x_train)?;
    let threshold = median_of(&train_risks);
    let labels = model
        .partial_hazards(x_eval)?
        .into_iter()
        .map(|r| if r > threshold { RiskGroup::High } else { RiskGroup::Low })
        .collect();
    Ok(MedianRiskGroups { threshold, labels })
}

/// Search space for `tune`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneSpace {
    /// Log-uniform range for the penalty.
    pub penalty_range: (f64, f64),
    /// Uniform range for the L1 ratio.
    pub l1_ratio_range: (f64, f64),
    /// Optional PCA component grid (deep-feature models).
    #[serde(default)]
    pub pca_grid: Option<Vec<usize>>,
}

impl Default for TuneSpace {
    fn default() -> Self {
        Self {
            penalty_range: (1e-4, 10.0),
            l1_ratio_range: (0.0, 1.0),
            pca_grid: None,
        }
    }
}

/// One sampled configuration and its cross-validated score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub penalty: f64,
    pub l1_ratio: f64,
    pub pca_k: Option<usize>,
    pub mean_cv_c_index: f64,
}

/// Outcome of the random hyperparameter search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: TrialRecord,
    pub trials: Vec<TrialRecord>,
    pub seed: u64,
    pub n_trials: usize,
    pub n_folds: usize,
}

/// Seeded random search over the space, scored by mean C-index over
/// stratified cross-validation folds. Ties on the CV score go to the
/// lowest trial index. PCA, when in the space, is fitted on each fold's
/// training split only.
pub fn tune(
    x: ArrayView2<'_, f64>,
    outcomes: &OutcomeTable,
    space: &TuneSpace,
    n_trials: usize,
    n_folds: usize,
    seed: u64,
) -> Result<TuneResult> {
    let n = x.nrows();
    if n != outcomes.len() {
        return Err(Error::LengthMismatch(format!(
            "{n} feature rows vs {} outcomes",
            outcomes.len()
        )));
    }
    if outcomes.n_events() < n_folds {
        return Err(Error::TooFewPerStratum {
            needed: n_folds,
            events: outcomes.n_events(),
            censored: n - outcomes.n_events(),
        });
    }

    let folds = stratified_folds(outcomes.events(), n_folds, seed ^ 0x666f_6c64); // "fold"
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();

    let mut trials = Vec::with_capacity(n_trials);
    for trial in 0..n_trials {
        // Per-trial RNG stream so trials are order-independent.
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let (lo, hi) = space.penalty_range;
        let penalty = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
        let (rlo, rhi) = space.l1_ratio_range;
        let l1_ratio = rlo + rng.random::<f64>() * (rhi - rlo);
        let pca_k = space
            .pca_grid
            .as_ref()
            .map(|grid| grid[rng.random_range(0..grid.len())]);

        let mut scores = Vec::with_capacity(n_folds);
        for fold in 0..n_folds {
            let train_rows: Vec<usize> = (0..n).filter(|&i| folds[i] != fold).collect();
            let val_rows: Vec<usize> = (0..n).filter(|&i| folds[i] == fold).collect();
            let train_out = outcomes.select(&train_rows)?;
            let val_out = outcomes.select(&val_rows)?;
            if train_out.n_events() == 0 {
                return Err(Error::NoEvents);
            }
            let take = |rows: &[usize]| {
                let mut sub = Array2::zeros((rows.len(), x.ncols()));
                for (ii, &i) in rows.iter().enumerate() {
                    sub.row_mut(ii).assign(&x.row(i));
                }
                sub
            };
            let x_train = take(&train_rows);
            let x_val = take(&val_rows);

            let (x_train, x_val, fit_names) = match pca_k {
                Some(k) => {
                    // Clamp to what is identifiable on this fold.
                    let k_eff = k.min(x.ncols()).min(x_train.nrows().saturating_sub(1)).max(1);
                    let pca = pca_fit(x_train.view(), k_eff)?;
                    let names: Vec<String> = (0..k_eff).map(|c| format!("pc{c}")).collect();
                    (
                        pca_transform(&pca, x_train.view()),
                        pca_transform(&pca, x_val.view()),
                        names,
                    )
                }
                None => (x_train, x_val, names.clone()),
            };

            let model = cox_fit(x_train.view(), &train_out, penalty, l1_ratio, &fit_names)?;
            let risks = model.partial_hazards(x_val.view())?;
            let c = concordance(val_out.times(), val_out.events(), &risks)?;
            scores.push(c);
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        trials.push(TrialRecord {
            trial,
            penalty,
            l1_ratio,
            pca_k,
            mean_cv_c_index: mean,
        });
    }

    let best = trials
        .iter()
        .cloned()
        .max_by(|a, b| {
            a.mean_cv_c_index
                .partial_cmp(&b.mean_cv_c_index)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.trial.cmp(&a.trial)) // ties: lowest trial index wins
        })
        .expect("at least one trial");

    Ok(TuneResult {
        best,
        trials,
        seed,
        n_trials,
        n_folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn outcomes(times: &[f64], events: &[u8]) -> OutcomeTable {
        OutcomeTable::new(
            (0..times.len()).map(|i| format!("s{i}")).collect(),
            times.to_vec(),
            events.to_vec(),
        )
        .unwrap()
    }

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("f{j}")).collect()
    }

    #[test]
    fn constant_column_rejected() {
        let x = array![[5.0], [5.0], [5.0]];
        let o = outcomes(&[1.0, 2.0, 3.0], &[1, 1, 1]);
        assert!(matches!(
            cox_fit(x.view(), &o, 0.1, 0.5, &names(1)).unwrap_err(),
            Error::ConstantColumn(_)
        ));
    }

    #[test]
    fn no_events_rejected() {
        let x = array![[1.0], [2.0]];
        let o = outcomes(&[1.0, 2.0], &[0, 0]);
        assert!(matches!(
            cox_fit(x.view(), &o, 0.1, 0.5, &names(1)).unwrap_err(),
            Error::NoEvents
        ));
    }

    #[test]
    fn flat_likelihood_yields_zero_beta() {
        // Tied event times with symmetric covariates: the partial likelihood
        // is symmetric around 0, so with any penalty the fit stays at 0.
        let x = array![[1.0], [-1.0]];
        let o = outcomes(&[1.0, 1.0], &[1, 1]);
        let m = cox_fit(x.view(), &o, 0.1, 0.5, &names(1)).unwrap();
        assert!(m.beta[0].abs() < 1e-9, "beta = {}", m.beta[0]);
    }

    #[test]
    fn partial_hazard_closed_forms() {
        let x = array![[0.0], [2.0]];
        let o = outcomes(&[1.0, 2.0], &[1, 1]);
        let mut m = cox_fit(x.view(), &o, 1e-6, 0.0, &names(1)).unwrap();
        // x = train means gives exactly 1.
        assert_eq!(m.partial_hazard(&m.train_means.clone()).unwrap(), 1.0);
        // Hand-set coefficients: beta = ln 2, x - mean = 1 gives 2.
        m.beta = vec![2.0f64.ln()];
        m.train_means = vec![0.0];
        let r = m.partial_hazard(&[1.0]).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        // Monotone in a positive-beta feature.
        assert!(m.partial_hazard(&[2.0]).unwrap() > r);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 40;
        let p = 3;
        let mut x = Array2::zeros((n, p));
        for i in 0..n {
            for j in 0..p {
                x[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let events: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.7)).collect();
        let o = outcomes(&times, &events);

        for _ in 0..10 {
            let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let analytic = efron_gradient(x.view(), &beta, &o);
            for j in 0..p {
                let h = 1e-5;
                let mut bp = beta.clone();
                bp[j] += h;
                let mut bm = beta.clone();
                bm[j] -= h;
                let lp = efron_loglik(&linear_predictors(x.view(), &bp), &o);
                let lm = efron_loglik(&linear_predictors(x.view(), &bm), &o);
                let numeric = (lp - lm) / (2.0 * h);
                let rel = (analytic[j] - numeric).abs() / numeric.abs().max(1.0);
                assert!(rel < 1e-5, "coord {j}: analytic {} vs numeric {numeric}", analytic[j]);
            }
        }
    }

    #[test]
    fn l1_path_shrinks_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 50;
        let mut x = Array2::zeros((n, 2));
        for i in 0..n {
            x[[i, 0]] = rng.random_range(-1.0..1.0);
            x[[i, 1]] = rng.random_range(-1.0..1.0);
        }
        let times: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 0.3).collect();
        let events = vec![1u8; n];
        let o = outcomes(&times, &events);
        let m = cox_fit(x.view(), &o, 100.0, 1.0, &names(2)).unwrap();
        assert_eq!(m.beta, vec![0.0, 0.0]);
    }

    #[test]
    fn baseline_with_zero_beta_is_km_like() {
        // With beta = 0 the Breslow baseline is sum(d_k / n_at_risk) and the
        // survival function is nonincreasing.
        let x = array![[0.1], [0.4], [-0.2], [0.9], [0.3]];
        let o = outcomes(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1, 0, 1, 1, 0]);
        let mut m = cox_fit(x.view(), &o, 1e3, 1.0, &names(1)).unwrap();
        assert_eq!(m.beta, vec![0.0]);
        m.train_means = vec![0.0];
        // Hand Breslow: t=1 d=1 n=5; t=3 d=1 n=3; t=4 d=1 n=2.
        let expected = [
            (1.0, 1.0 / 5.0),
            (3.0, 1.0 / 5.0 + 1.0 / 3.0),
            (4.0, 1.0 / 5.0 + 1.0 / 3.0 + 1.0 / 2.0),
        ];
        assert_eq!(m.baseline_cumhaz.len(), 3);
        for ((t, h), (et, eh)) in m.baseline_cumhaz.iter().zip(expected) {
            assert_eq!(*t, et);
            assert!((h - eh).abs() < 1e-12);
        }
        let mut prev = 1.0;
        for t in [0.0, 0.5, 1.0, 2.5, 3.0, 4.0, 10.0] {
            let s = m.survival_function(&[0.0], t).unwrap();
            assert!(s <= prev + 1e-15);
            prev = s;
        }
        assert_eq!(m.survival_function(&[0.0], 0.0).unwrap(), 1.0);
        // Beyond the last event time the step function is flat.
        let tail = m.survival_function(&[0.0], 4.0).unwrap();
        assert_eq!(m.survival_function(&[0.0], 99.0).unwrap(), tail);
    }

    #[test]
    fn breslow_matches_hand_computation_at_event_times() {
        // n = 50 synthetic cohort; S(t | x-bar) must match a direct Breslow
        // sum over risk sets at three event times.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 50;
        let mut x = Array2::zeros((n, 2));
        for i in 0..n {
            x[[i, 0]] = rng.random_range(-1.0..1.0);
            x[[i, 1]] = rng.random_range(-1.0..1.0);
        }
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..20.0)).collect();
        let events: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.6)).collect();
        let o = outcomes(&times, &events);
        let m = cox_fit(x.view(), &o, 1e-6, 0.0, &names(2)).unwrap();

        // Oracle: direct risk-set sums on the centered design.
        let means = m.train_means.clone();
        let theta: Vec<f64> = (0..n)
            .map(|i| {
                (m.beta[0] * (x[[i, 0]] - means[0]) + m.beta[1] * (x[[i, 1]] - means[1])).exp()
            })
            .collect();
        let mut event_times: Vec<f64> = (0..n).filter(|&i| events[i] == 1).map(|i| times[i]).collect();
        event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        event_times.dedup();
        for &t_check in event_times.iter().take(3) {
            let mut h = 0.0;
            for &te in event_times.iter().filter(|&&te| te <= t_check) {
                let d = (0..n).filter(|&i| events[i] == 1 && times[i] == te).count() as f64;
                let risk: f64 = (0..n).filter(|&i| times[i] >= te).map(|i| theta[i]).sum();
                h += d / risk;
            }
            let s_oracle = (-h).exp(); // at x = x-bar the partial hazard is 1
            let s = m.survival_function(&means, t_check).unwrap();
            assert!((s - s_oracle).abs() < 1e-8, "t={t_check}: {s} vs {s_oracle}");
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let n = 80;
        let mut x = Array2::zeros((n, 3));
        for i in 0..n {
            for j in 0..3 {
                x[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..30.0)).collect();
        let events: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.6)).collect();
        let o = outcomes(&times, &events);
        // The line search enforces monotone descent; verify the final
        // objective is no worse than at beta = 0.
        for (pen, ratio) in [(0.0, 0.0), (0.05, 0.5), (0.5, 1.0)] {
            let m = cox_fit(x.view(), &o, pen, ratio, &names(3)).unwrap();
            let l1 = pen * ratio;
            let l2 = pen * (1.0 - ratio);
            let mut xc = x.clone();
            for j in 0..3 {
                let mean = m.train_means[j];
                for i in 0..n {
                    xc[[i, j]] -= mean;
                }
            }
            let at_zero = penalized_objective(xc.view(), &[0.0; 3], &o, l1, l2);
            assert!(m.diagnostics.objective <= at_zero + 1e-12);
            assert!(m.diagnostics.converged);
        }
    }

    #[test]
    fn risk_ranking_invariant_to_covariate_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let n = 30;
        let mut x = Array2::zeros((n, 2));
        for i in 0..n {
            for j in 0..2 {
                x[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..20.0)).collect();
        let events: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.7)).collect();
        let o = outcomes(&times, &events);
        let m1 = cox_fit(x.view(), &o, 0.01, 0.5, &names(2)).unwrap();
        let shifted = &x + 100.0;
        let m2 = cox_fit(shifted.view(), &o, 0.01, 0.5, &names(2)).unwrap();
        let r1 = m1.partial_hazards(x.view()).unwrap();
        let r2 = m2.partial_hazards(shifted.view()).unwrap();
        let rank = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
            idx
        };
        assert_eq!(rank(&r1), rank(&r2));
    }

    #[test]
    fn median_groups() {
        let x_train = array![[1.0], [2.0], [3.0], [4.0]];
        let o = outcomes(&[4.0, 3.0, 2.0, 1.0], &[1, 1, 1, 1]);
        let m = cox_fit(x_train.view(), &o, 1e-6, 0.0, &names(1)).unwrap();
        assert!(m.beta[0] > 0.0);

        // Train risks are ordered with x; the threshold is the median of 4
        // distinct values, so exactly half the training set sits on each side.
        let g = median_risk_groups(&m, x_train.view(), x_train.view()).unwrap();
        let high = g.labels.iter().filter(|&&l| l == RiskGroup::High).count();
        assert_eq!(high, 2);

        // An eval subject strictly above the median risk goes high.
        let eval = array![[3.0]];
        let ge = median_risk_groups(&m, x_train.view(), eval.view()).unwrap();
        assert_eq!(ge.labels, vec![RiskGroup::High]);

        // All-equal risks: nothing exceeds the median, so everyone is low.
        // (Constant eval columns are fine; only training columns are checked.)
        let eval_equal = array![[2.5], [2.5]];
        let g2 = median_risk_groups(&m, x_train.view(), eval_equal.view()).unwrap();
        let m_risk = m.partial_hazard(&[2.5]).unwrap();
        let expected = if m_risk > g2.threshold { RiskGroup::High } else { RiskGroup::Low };
        assert!(g2.labels.iter().all(|&l| l == expected));
    }

    #[test]
    fn tune_singleton_space_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 60;
        let mut x = Array2::zeros((n, 2));
        for i in 0..n {
            for j in 0..2 {
                x[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..20.0)).collect();
        let events: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let o = outcomes(&times, &events);

        let singleton = TuneSpace {
            penalty_range: (0.1, 0.1),
            l1_ratio_range: (0.5, 0.5),
            pca_grid: None,
        };
        let r = tune(x.view(), &o, &singleton, 1, 3, 11).unwrap();
        assert_eq!(r.best.trial, 0);
        assert!((r.best.penalty - 0.1).abs() < 1e-12);
        assert!((r.best.l1_ratio - 0.5).abs() < 1e-12);

        let space = TuneSpace::default();
        let a = tune(x.view(), &o, &space, 8, 3, 13).unwrap();
        let b = tune(x.view(), &o, &space, 8, 3, 13).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
