//! Linear meta-regressors: ordinary least squares, LASSO and ElasticNet.
//!
//! All three z-score the features with training statistics; coefficients are
//! stored in standardized units next to the [`Standardizer`] that produced
//! them. The intercept is unpenalized (it equals the training label mean for
//! the penalized models).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cd::{coordinate_descent, CdSettings, Design};
use super::Protocol;
use crate::pipeline::cv::{complement, shuffled_folds};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearAlgorithm {
    Ols,
    Lasso,
    ElasticNet,
}

/// Per-feature centering and scaling learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; zero-variance features get 1.
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let (means, scales) = x
            .column_iter()
            .map(|c| {
                let m = c.sum() / n;
                let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let sd = var.sqrt();
                // Tiny relative spread is numerical noise around a constant.
                let sd = if sd <= 1e-12 * m.abs().max(1.0) { 1.0 } else { sd };
                (m, sd)
            })
            .unzip();
        Standardizer { means, scales }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    /// Index of the chosen candidate among all CV runs.
    pub candidate: usize,
    pub candidates: usize,
    pub l1_ratio: f64,
    pub alpha: f64,
    pub cv_mse: f64,
    pub criterion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDiagnostics {
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub selection: Option<CvSelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub algorithm: LinearAlgorithm,
    /// Coefficients on standardized features.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub l1_ratio: f64,
    pub standardizer: Standardizer,
    pub diagnostics: LinearDiagnostics,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Schema(format!(
                "linear model expects {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        let z = self.standardizer.transform(x);
        Ok((0..z.nrows())
            .map(|i| {
                self.intercept
                    + self
                        .coefficients
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b * z[(i, j)])
                        .sum::<f64>()
            })
            .collect())
    }

    /// Slopes and intercept on the original feature scale.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let slopes: Vec<f64> = self
            .coefficients
            .iter()
            .zip(&self.standardizer.scales)
            .map(|(b, s)| b / s)
            .collect();
        let shift: f64 = slopes
            .iter()
            .zip(&self.standardizer.means)
            .map(|(b, m)| b * m)
            .sum();
        (slopes, self.intercept - shift)
    }
}

fn validate(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::invalid("cannot fit on zero rows"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in training data"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Least squares with a minimum-norm solution when the design is rank deficient.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel> {
    validate(x, y)?;
    let standardizer = Standardizer::fit(x);
    let z = standardizer.transform(x);
    let y_mean = mean(y);
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    let coefficients = if z.ncols() == 0 {
        Vec::new()
    } else {
        let svd = z.clone().svd(true, true);
        let s_max = svd.singular_values.max();
        let eps = s_max * f64::EPSILON * z.nrows().max(z.ncols()) as f64;
        let beta = svd
            .solve(&yc, eps)
            .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
        beta.iter().copied().collect()
    };
    Ok(LinearModel {
        algorithm: LinearAlgorithm::Ols,
        coefficients,
        intercept: y_mean,
        alpha: 0.0,
        l1_ratio: 0.0,
        standardizer,
        diagnostics: LinearDiagnostics {
            duality_gap: 0.0,
            iterations: 0,
            converged: true,
            selection: None,
        },
    })
}

/// Elastic net at a fixed penalty on standardized features.
pub fn fit_enet_cd(
    x: &DMatrix<f64>,
    y: &[f64],
    alpha: f64,
    l1_ratio: f64,
    settings: CdSettings,
) -> Result<LinearModel> {
    validate(x, y)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::invalid(format!("l1_ratio must be in [0, 1], got {l1_ratio}")));
    }
    let standardizer = Standardizer::fit(x);
    let z = standardizer.transform(x);
    let y_mean = mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let sol = coordinate_descent(&Design::new(&z), &yc, alpha, l1_ratio, settings, None);
    if !sol.converged {
        log::warn!(
            "coordinate descent stopped after {} sweeps with duality gap {:.3e}",
            sol.sweeps,
            sol.gap
        );
    }
    Ok(LinearModel {
        algorithm: if l1_ratio == 1.0 {
            LinearAlgorithm::Lasso
        } else {
            LinearAlgorithm::ElasticNet
        },
        coefficients: sol.coef,
        intercept: y_mean,
        alpha,
        l1_ratio,
        standardizer,
        diagnostics: LinearDiagnostics {
            duality_gap: sol.gap,
            iterations: sol.sweeps,
            converged: sol.converged,
            selection: None,
        },
    })
}

/// LASSO at a fixed penalty: `(1/(2n))||y - Xb||² + alpha·||b||₁`.
pub fn fit_lasso_cd(x: &DMatrix<f64>, y: &[f64], alpha: f64, settings: CdSettings) -> Result<LinearModel> {
    fit_enet_cd(x, y, alpha, 1.0, settings)
}

/// Smallest penalty at which every coefficient is zero, on standardized data.
pub fn alpha_max(z: &DMatrix<f64>, yc: &[f64], l1_ratio: f64) -> f64 {
    let n = z.nrows() as f64;
    z.column_iter()
        .map(|c| c.iter().zip(yc).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
        / (n * l1_ratio)
}

/// Geometric grid from `alpha_max` down to `min_ratio · alpha_max`.
pub fn alpha_grid(alpha_max: f64, n_alphas: usize, min_ratio: f64) -> Vec<f64> {
    if n_alphas <= 1 {
        return vec![alpha_max];
    }
    let (hi, lo) = (alpha_max.ln(), (alpha_max * min_ratio).ln());
    (0..n_alphas)
        .map(|i| (hi + (lo - hi) * i as f64 / (n_alphas - 1) as f64).exp())
        .collect()
}

/// Mean validation MSE per alpha over a shuffled k-fold split.
fn cv_mse_path(
    x: &DMatrix<f64>,
    y: &[f64],
    alphas: &[f64],
    l1_ratio: f64,
    folds: usize,
    fold_seed: u64,
    settings: CdSettings,
) -> Result<Vec<f64>> {
    let n = x.nrows();
    let blocks = shuffled_folds(n, folds, fold_seed)?;
    let mut total = vec![0.0; alphas.len()];
    for test in &blocks {
        let train = complement(n, test);
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let std = Standardizer::fit(&xt);
        let zt = std.transform(&xt);
        let ym = mean(&yt);
        let ytc: Vec<f64> = yt.iter().map(|v| v - ym).collect();
        let zv = std.transform(&x.select_rows(test));
        let yv: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let design = Design::new(&zt);
        let mut warm: Option<Vec<f64>> = None;
        for (a, alpha) in alphas.iter().enumerate() {
            let sol = coordinate_descent(&design, &ytc, *alpha, l1_ratio, settings, warm.as_deref());
            let mse = (0..zv.nrows())
                .map(|i| {
                    let pred = ym + sol.coef.iter().enumerate().map(|(j, b)| b * zv[(i, j)]).sum::<f64>();
                    (pred - yv[i]).powi(2)
                })
                .sum::<f64>()
                / zv.nrows() as f64;
            total[a] += mse;
            warm = Some(sol.coef);
        }
    }
    Ok(total.into_iter().map(|t| t / blocks.len() as f64).collect())
}

struct Candidate {
    l1_ratio: f64,
    alpha: f64,
    cv_mse: f64,
    model: LinearModel,
}

fn run_candidate(
    x: &DMatrix<f64>,
    y: &[f64],
    l1_ratio: f64,
    protocol: &Protocol,
    fold_seed: u64,
) -> Result<Candidate> {
    let standardizer = Standardizer::fit(x);
    let z = standardizer.transform(x);
    let ym = mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let a_max = alpha_max(&z, &yc, l1_ratio);
    if a_max <= 0.0 {
        // Nothing to explain: the null model is optimal for every alpha.
        let model = fit_enet_cd(x, y, 0.0, l1_ratio, protocol.cd)?;
        return Ok(Candidate {
            l1_ratio,
            alpha: 0.0,
            cv_mse: 0.0,
            model,
        });
    }
    let alphas = alpha_grid(a_max, protocol.n_alphas, protocol.alpha_min_ratio);
    let mse = cv_mse_path(x, y, &alphas, l1_ratio, protocol.folds, fold_seed, protocol.cd)?;
    let best = (0..alphas.len())
        .min_by(|&a, &b| mse[a].total_cmp(&mse[b]).then(a.cmp(&b)))
        .expect("non-empty alpha grid");
    let model = fit_enet_cd(x, y, alphas[best], l1_ratio, protocol.cd)?;
    Ok(Candidate {
        l1_ratio,
        alpha: alphas[best],
        cv_mse: mse[best],
        model,
    })
}

fn pick_by_gap(candidates: Vec<Candidate>, algorithm: LinearAlgorithm) -> LinearModel {
    let total = candidates.len();
    let (idx, best) = candidates
        .into_iter()
        .enumerate()
        .reduce(|best, cur| {
            if cur.1.model.diagnostics.duality_gap < best.1.model.diagnostics.duality_gap {
                cur
            } else {
                best
            }
        })
        .expect("at least one candidate");
    let mut model = best.model;
    model.algorithm = algorithm;
    model.diagnostics.selection = Some(CvSelection {
        candidate: idx,
        candidates: total,
        l1_ratio: best.l1_ratio,
        alpha: best.alpha,
        cv_mse: best.cv_mse,
        criterion: "min-duality-gap".to_string(),
    });
    model
}

/// Repeated shuffled k-fold LASSO: each repeat picks alpha by mean validation
/// MSE and refits on all rows; the refit with the smallest duality gap wins
/// (earliest repeat on ties).
pub fn fit_lasso_cv(x: &DMatrix<f64>, y: &[f64], protocol: &Protocol, master_seed: u64) -> Result<LinearModel> {
    validate(x, y)?;
    if x.nrows() < protocol.folds {
        return Err(Error::invalid(format!(
            "{} rows cannot fill {} folds",
            x.nrows(),
            protocol.folds
        )));
    }
    let candidates = (0..protocol.lasso_repeats.max(1))
        .into_par_iter()
        .map(|r| run_candidate(x, y, 1.0, protocol, seed::derive(master_seed, "lasso-cv", r as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_by_gap(candidates, LinearAlgorithm::Lasso))
}

/// ElasticNet over the protocol's l1 ratios, with shuffled k-fold CV repeated
/// per ratio; final choice by smallest duality gap across all candidates.
pub fn fit_elasticnet_cv(x: &DMatrix<f64>, y: &[f64], protocol: &Protocol, master_seed: u64) -> Result<LinearModel> {
    validate(x, y)?;
    if x.nrows() < protocol.folds {
        return Err(Error::invalid(format!(
            "{} rows cannot fill {} folds",
            x.nrows(),
            protocol.folds
        )));
    }
    if protocol.l1_ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
        return Err(Error::invalid("l1 ratios must lie in (0, 1]"));
    }
    let repeats = protocol.enet_repeats_per_ratio.max(1);
    let jobs: Vec<(usize, f64, usize)> = protocol
        .l1_ratios
        .iter()
        .enumerate()
        .flat_map(|(ri, &ratio)| (0..repeats).map(move |r| (ri, ratio, r)))
        .collect();
    let candidates = jobs
        .into_par_iter()
        .map(|(ri, ratio, r)| {
            let s = seed::derive(master_seed, "enet-cv", (ri * repeats + r) as u64);
            run_candidate(x, y, ratio, protocol, s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_by_gap(candidates, LinearAlgorithm::ElasticNet))
}
