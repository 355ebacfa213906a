use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least 2 points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in correlation input"));
    }
    Ok(())
}

/// Sample Pearson correlation. Errors when either vector is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation undefined for a constant vector"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&rank_average(x), &rank_average(y))
}

pub fn mse_rmse(pred: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::invalid("prediction and truth must be non-empty and aligned"));
    }
    let mse = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    Ok((mse, mse.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    /// False when the group is too small (n < 2) for correlations.
    pub available: bool,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub mse: f64,
    pub rmse: f64,
    pub per_complex_abs_error: BTreeMap<String, f64>,
}

/// Score predictions against truth over the predicted ids.
pub fn evaluate(pred: &BTreeMap<String, f64>, truth: &BTreeMap<String, f64>) -> Result<EvaluationReport> {
    let missing: Vec<String> = pred.keys().filter(|k| !truth.contains_key(*k)).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::missing("ground-truth label", missing));
    }
    if pred.is_empty() {
        return Err(Error::invalid("no predictions to evaluate"));
    }
    let p: Vec<f64> = pred.values().copied().collect();
    let t: Vec<f64> = pred.keys().map(|k| truth[k]).collect();
    let (mse, rmse) = mse_rmse(&p, &t)?;
    let available = p.len() >= 2;
    Ok(EvaluationReport {
        n: p.len(),
        available,
        pearson: available.then(|| pearson(&p, &t).ok()).flatten(),
        spearman: available.then(|| spearman(&p, &t).ok()).flatten(),
        mse,
        rmse,
        per_complex_abs_error: pred
            .iter()
            .map(|(k, v)| (k.clone(), (v - truth[k]).abs()))
            .collect(),
    })
}

/// Reports per group; `group_of` maps a complex id to its group label.
pub fn grouped_report(
    pred: &BTreeMap<String, f64>,
    truth: &BTreeMap<String, f64>,
    group_of: impl Fn(&str) -> Option<String>,
) -> Result<BTreeMap<String, EvaluationReport>> {
    let mut groups: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (id, v) in pred {
        if let Some(g) = group_of(id) {
            groups.entry(g).or_default().insert(id.clone(), *v);
        }
    }
    groups
        .into_iter()
        .map(|(g, p)| evaluate(&p, truth).map(|r| (g, r)))
        .collect()
}

/// Empirical distribution of Pearson r over random subsamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub subset_size: usize,
    pub full_sample_r: f64,
    /// Sorted ascending.
    pub samples: Vec<f64>,
}

impl NullDistribution {
    /// Linearly interpolated quantile, `q` in [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let pos = q * (self.samples.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        self.samples[lo] + (self.samples[hi] - self.samples[lo]) * frac
    }

    /// Fraction of null samples at or above `r`.
    pub fn upper_tail(&self, r: f64) -> f64 {
        self.samples.iter().filter(|&&s| s >= r).count() as f64 / self.samples.len() as f64
    }
}

/// Pearson r on `iters` uniform without-replacement subsamples of size `subset_size`.
pub fn monte_carlo_subsample_null(
    pred: &[f64],
    truth: &[f64],
    subset_size: usize,
    iters: usize,
    master_seed: u64,
) -> Result<NullDistribution> {
    use rayon::prelude::*;

    check_pair(pred, truth)?;
    if subset_size < 3 {
        return Err(Error::invalid("subset size must be at least 3"));
    }
    if subset_size > pred.len() {
        return Err(Error::invalid(format!(
            "subset size {subset_size} exceeds sample size {}",
            pred.len()
        )));
    }
    if iters == 0 {
        return Err(Error::invalid("at least one iteration is required"));
    }
    let full_sample_r = pearson(pred, truth)?;
    let mut samples = (0..iters)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::derived_rng(master_seed, "mc-null", i as u64);
            let mut idx = index::sample(&mut rng, pred.len(), subset_size).into_vec();
            idx.sort_unstable();
            let p: Vec<f64> = idx.iter().map(|&k| pred[k]).collect();
            let t: Vec<f64> = idx.iter().map(|&k| truth[k]).collect();
            pearson(&p, &t)
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(f64::total_cmp);
    Ok(NullDistribution {
        subset_size,
        full_sample_r,
        samples,
    })
}
