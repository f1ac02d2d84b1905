//! Survival evaluation: concordance, Kaplan-Meier, log-rank, hazard ratios,
//! IPCW time-dependent AUC, and bootstrap confidence machinery.

use crate::dataio::OutcomeTable;
use crate::error::{Error, Result};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Fenwick tree over compressed risk ranks, counting inserted subjects.
struct RankCounter {
    tree: Vec<u64>,
}

impl RankCounter {
    fn new(n_ranks: usize) -> Self {
        Self {
            tree: vec![0; n_ranks + 1],
        }
    }

    fn insert(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks <= rank.
    fn prefix(&self, rank: usize) -> u64 {
        let mut i = rank + 1;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Harrell's concordance index: (correct + 0.5 * tied-risk) / comparable.
///
/// A pair is comparable iff the earlier time belongs to an event; pairs with
/// equal times where exactly one is an event are comparable with the event
/// ranked earlier, tied event times are not comparable. Correct means the
/// earlier-event subject has strictly higher risk.
pub fn concordance(times: &[f64], events: &[u8], risks: &[f64]) -> Result<f64> {
    let n = times.len();
    if events.len() != n || risks.len() != n {
        return Err(Error::LengthMismatch("concordance inputs".into()));
    }
    if risks.iter().any(|r| r.is_nan()) {
        return Err(Error::NonFinite("risks"));
    }

    // Compress risks to ranks.
    let mut sorted_risks: Vec<f64> = risks.to_vec();
    sorted_risks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted_risks.dedup();
    let rank_of = |r: f64| sorted_risks.partition_point(|&x| x < r);

    // Process distinct times in descending order. Before scoring the events
    // at time t the tree holds everyone with a later time plus the censored
    // subjects at t itself; events at t are inserted afterwards so tied
    // event pairs never see each other.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).unwrap());

    let mut counter = RankCounter::new(sorted_risks.len());
    let mut correct = 0u64;
    let mut tied = 0u64;
    let mut comparable = 0u64;
    let mut inserted = 0u64;

    let mut g = 0;
    while g < n {
        let t = times[order[g]];
        let mut h = g;
        while h < n && times[order[h]] == t {
            h += 1;
        }
        let group = &order[g..h];
        for &i in group.iter().filter(|&&i| events[i] == 0) {
            counter.insert(rank_of(risks[i]));
            inserted += 1;
        }
        for &i in group.iter().filter(|&&i| events[i] == 1) {
            let rank = rank_of(risks[i]);
            let le = counter.prefix(rank);
            let lt = if rank == 0 { 0 } else { counter.prefix(rank - 1) };
            correct += lt;
            tied += le - lt;
            comparable += inserted;
        }
        for &i in group.iter().filter(|&&i| events[i] == 1) {
            counter.insert(rank_of(risks[i]));
            inserted += 1;
        }
        g = h;
    }

    if comparable == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok((correct as f64 + 0.5 * tied as f64) / comparable as f64)
}

/// Kaplan-Meier product-limit curve. Steps occur at event times only;
/// censored subjects leave the risk set after their time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KmCurve {
    pub event_times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    /// Greenwood variance of S at each step (0 where S = 0).
    pub greenwood_var: Vec<f64>,
}

impl KmCurve {
    /// Right-continuous lookup; 1 before the first event time.
    pub fn survival_at(&self, t: f64) -> f64 {
        let mut s = 1.0;
        for (i, &time) in self.event_times.iter().enumerate() {
            if time <= t {
                s = self.survival[i];
            } else {
                break;
            }
        }
        s
    }
}

pub fn km_curve(times: &[f64], events: &[u8]) -> Result<KmCurve> {
    let n = times.len();
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    if events.len() != n {
        return Err(Error::LengthMismatch("km inputs".into()));
    }
    let mut distinct: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(_, &e)| e == 1)
        .map(|(&t, _)| t)
        .collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();

    let mut survival = Vec::with_capacity(distinct.len());
    let mut at_risk = Vec::with_capacity(distinct.len());
    let mut greenwood = Vec::with_capacity(distinct.len());
    let mut s = 1.0;
    let mut gw_sum = 0.0;
    for &t in &distinct {
        let nk = times.iter().filter(|&&ti| ti >= t).count();
        let dk = times
            .iter()
            .zip(events)
            .filter(|(&ti, &e)| ti == t && e == 1)
            .count();
        s *= 1.0 - dk as f64 / nk as f64;
        at_risk.push(nk);
        survival.push(s);
        if nk > dk {
            gw_sum += dk as f64 / (nk as f64 * (nk - dk) as f64);
            greenwood.push(s * s * gw_sum);
        } else {
            // Final step to S = 0: the variance of an exactly-zero estimate.
            greenwood.push(0.0);
        }
    }
    Ok(KmCurve {
        event_times: distinct,
        survival,
        at_risk,
        greenwood_var: greenwood,
    })
}

/// Two-group log-rank test: chi-square statistic with 1 df and its p-value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRankResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn log_rank(
    times_a: &[f64],
    events_a: &[u8],
    times_b: &[f64],
    events_b: &[u8],
) -> Result<LogRankResult> {
    if times_a.is_empty() || times_b.is_empty() {
        return Err(Error::DegenerateGroups);
    }
    let mut event_times: Vec<f64> = times_a
        .iter()
        .zip(events_a)
        .chain(times_b.iter().zip(events_b))
        .filter(|(_, &e)| e == 1)
        .map(|(&t, _)| t)
        .collect();
    if event_times.is_empty() {
        return Err(Error::NoEvents);
    }
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    event_times.dedup();

    let mut observed_a = 0.0;
    let mut expected_a = 0.0;
    let mut variance = 0.0;
    for &t in &event_times {
        let n1 = times_a.iter().filter(|&&ti| ti >= t).count() as f64;
        let n2 = times_b.iter().filter(|&&ti| ti >= t).count() as f64;
        let d1 = times_a
            .iter()
            .zip(events_a)
            .filter(|(&ti, &e)| ti == t && e == 1)
            .count() as f64;
        let d2 = times_b
            .iter()
            .zip(events_b)
            .filter(|(&ti, &e)| ti == t && e == 1)
            .count() as f64;
        let n = n1 + n2;
        let d = d1 + d2;
        if n1 == 0.0 || n2 == 0.0 {
            continue;
        }
        observed_a += d1;
        expected_a += d * n1 / n;
        if n > 1.0 {
            variance += d * (n1 / n) * (n2 / n) * (n - d) / (n - 1.0);
        }
    }
    if variance == 0.0 {
        return Ok(LogRankResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let statistic = (observed_a - expected_a).powi(2) / variance;
    let chi2 = ChiSquared::new(1.0).expect("df 1");
    Ok(LogRankResult {
        statistic,
        p_value: chi2.sf(statistic),
    })
}

/// Univariable Cox hazard ratio for a binary group, with a Wald CI and
/// p-value from the observed-information inverse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HazardRatioResult {
    pub hazard_ratio: f64,
    pub ci95: (f64, f64),
    pub p_value: f64,
    pub log_hr: f64,
    pub se: f64,
    /// Complete separation in time: the likelihood is monotone in beta and
    /// the CI is reported unbounded.
    pub monotone_likelihood: bool,
}

pub fn hazard_ratio(times: &[f64], events: &[u8], group: &[u8]) -> Result<HazardRatioResult> {
    let n = times.len();
    if events.len() != n || group.len() != n {
        return Err(Error::LengthMismatch("hazard_ratio inputs".into()));
    }
    let n1 = group.iter().filter(|&&g| g == 1).count();
    if n1 == 0 || n1 == n {
        return Err(Error::DegenerateGroups);
    }
    let outcomes = OutcomeTable::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        times.to_vec(),
        events.to_vec(),
    )?;
    let x = Array2::from_shape_fn((n, 1), |(i, _)| group[i] as f64);
    let model = crate::cox::cox_fit(x.view(), &outcomes, 0.0, 0.0, &["group".to_string()])?;
    let beta = model.beta[0];

    // SE from the unaveraged observed information (shift-invariant, so the
    // raw 0/1 column is fine here).
    let info = crate::cox::observed_information(x.view(), &model.beta, &outcomes);
    let se = (1.0 / info[[0, 0]]).sqrt();

    let monotone = !model.diagnostics.converged && beta.abs() > 10.0 || beta.abs() > 15.0;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = beta / se;
    let p_value = 2.0 * normal.cdf(-z.abs());
    let ci95 = if monotone {
        (0.0, f64::INFINITY)
    } else {
        ((beta - 1.96 * se).exp(), (beta + 1.96 * se).exp())
    };
    Ok(HazardRatioResult {
        hazard_ratio: beta.exp(),
        ci95,
        p_value,
        log_hr: beta,
        se,
        monotone_likelihood: monotone,
    })
}

/// Censoring-survival step function G(t) estimated on training outcomes with
/// the event indicator flipped (reverse Kaplan-Meier). Ascending step arrays.
fn censoring_survival_steps(times: &[f64], events: &[u8]) -> (Vec<f64>, Vec<f64>) {
    let mut censor_times: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(_, &e)| e == 0)
        .map(|(&t, _)| t)
        .collect();
    censor_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    censor_times.dedup();
    let mut steps = Vec::with_capacity(censor_times.len());
    let mut g = 1.0;
    for &t in &censor_times {
        let nk = times.iter().filter(|&&ti| ti >= t).count() as f64;
        let dk = times
            .iter()
            .zip(events)
            .filter(|(&ti, &e)| ti == t && e == 0)
            .count() as f64;
        g *= 1.0 - dk / nk;
        steps.push(g);
    }
    (censor_times, steps)
}

/// Left-limit lookup G(t-): the product of factors at censoring times
/// strictly before t.
fn censoring_survival_before(step_times: &[f64], steps: &[f64], t: f64) -> f64 {
    let mut g = 1.0;
    for (i, &time) in step_times.iter().enumerate() {
        if time < t {
            g = steps[i];
        } else {
            break;
        }
    }
    g
}

/// IPCW cumulative/dynamic AUC at a horizon. Cases are events with
/// time <= horizon, controls are subjects with time > horizon; case pairs
/// are weighted by the inverse censoring-survival left limit estimated on
/// the training outcomes. Tied risks contribute 0.5.
pub fn cumulative_dynamic_auc(
    train: &OutcomeTable,
    test_times: &[f64],
    test_events: &[u8],
    risks: &[f64],
    horizon: f64,
) -> Result<f64> {
    let n = test_times.len();
    if test_events.len() != n || risks.len() != n {
        return Err(Error::LengthMismatch("cumulative_dynamic_auc inputs".into()));
    }
    let cases: Vec<usize> = (0..n)
        .filter(|&i| test_events[i] == 1 && test_times[i] <= horizon)
        .collect();
    let controls: Vec<usize> = (0..n).filter(|&i| test_times[i] > horizon).collect();
    if cases.is_empty() {
        return Err(Error::NoCasesOrControls {
            horizon,
            missing: "cases",
        });
    }
    if controls.is_empty() {
        return Err(Error::NoCasesOrControls {
            horizon,
            missing: "controls",
        });
    }

    let (g_times, g_steps) = censoring_survival_steps(train.times(), train.events());

    // Sorted control risks for rank counting; the weighted sum itself runs in
    // subject order so results are reproducible term for term.
    let mut control_risks: Vec<f64> = controls.iter().map(|&j| risks[j]).collect();
    control_risks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_controls = controls.len() as f64;

    let mut numerator = 0.0;
    let mut weight_sum = 0.0;
    for &i in &cases {
        let g = censoring_survival_before(&g_times, &g_steps, test_times[i]);
        if g <= 0.0 {
            return Err(Error::ZeroIpcwWeight(test_times[i]));
        }
        let w = 1.0 / g;
        let r = risks[i];
        let lower = control_risks.partition_point(|&x| x < r);
        let le = control_risks.partition_point(|&x| x <= r);
        let equal = le - lower;
        numerator += w * (lower as f64 + 0.5 * equal as f64);
        weight_sum += w;
    }
    Ok(numerator / (weight_sum * n_controls))
}

/// Bootstrap summary: percentile CI plus the literal "share of replicates
/// below 0.5" p-value and a two-sided variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub point: f64,
    pub ci95: (f64, f64),
    /// Fraction of replicate values strictly below 0.5.
    pub p_below_half: f64,
    /// 2 * min(frac below 0.5, frac above 0.5).
    pub p_two_sided: f64,
    pub n_replicates: usize,
    pub n_used: usize,
    pub skipped: usize,
    pub seed: u64,
}

/// Linearly interpolated quantile of sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Seeded with-replacement bootstrap over subject indices. The metric
/// returns `None` on degenerate resamples, which are skipped and counted.
/// Replicate r draws from its own RNG stream keyed by (seed, r), so results
/// are a pure function of (data, seed, n).
pub fn bootstrap<F>(n_subjects: usize, metric: F, n_replicates: usize, seed: u64) -> Result<BootstrapSummary>
where
    F: Fn(&[usize]) -> Option<f64>,
{
    let identity: Vec<usize> = (0..n_subjects).collect();
    let point = metric(&identity).ok_or(Error::DegeneratePointEstimate)?;

    let mut values = Vec::with_capacity(n_replicates);
    let mut skipped = 0usize;
    for r in 0..n_replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ (r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(r as u64),
        );
        let indices: Vec<usize> = (0..n_subjects)
            .map(|_| rng.random_range(0..n_subjects))
            .collect();
        match metric(&indices) {
            Some(v) => values.push(v),
            None => skipped += 1,
        }
    }
    if skipped * 2 > n_replicates {
        return Err(Error::TooManyDegenerateReplicates {
            skipped,
            total: n_replicates,
        });
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci95 = (
        quantile_sorted(&values, 0.025),
        quantile_sorted(&values, 0.975),
    );
    debug_assert!(ci95.0 <= ci95.1);
    let n_used = values.len();
    let below = values.iter().filter(|&&v| v < 0.5).count() as f64 / n_used as f64;
    let above = values.iter().filter(|&&v| v > 0.5).count() as f64 / n_used as f64;
    Ok(BootstrapSummary {
        point,
        ci95,
        p_below_half: below,
        p_two_sided: 2.0 * below.min(above),
        n_replicates,
        n_used,
        skipped,
        seed,
    })
}
