//! Principal components of base-prediction matrices.
//!
//! Columns are centered but not scaled: every prediction column lives on the
//! same log-affinity scale. Each component is sign-fixed so that its loadings
//! sum to a non-negative value, which makes PC1 track the mean prediction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::evaluate::pearson;
use crate::{Error, Result};

pub const SIGN_CONVENTION: &str = "loading-sum-nonnegative";

/// Which prediction block a basis was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PcaSource {
    D1FP,
    D2FP,
    D3P,
    DAP,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub source_group: PcaSource,
    pub column_ids: Vec<String>,
    pub column_means: Vec<f64>,
    /// One loading vector per component, row-major, ordered by variance.
    pub components: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub n_rows: usize,
    pub sign_convention: String,
}

impl PcaBasis {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn width(&self) -> usize {
        self.column_means.len()
    }

    /// Variance captured by each component (`s² / (n - 1)`).
    pub fn explained_variance(&self) -> Vec<f64> {
        let denom = (self.n_rows.max(2) - 1) as f64;
        self.singular_values.iter().map(|s| s * s / denom).collect()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let ev = self.explained_variance();
        let total: f64 = ev.iter().sum();
        ev.iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect()
    }

    /// Keep the leading `k` components (singular values included).
    pub fn truncated(&self, k: usize) -> PcaBasis {
        let k = k.min(self.n_components());
        PcaBasis {
            components: self.components[..k].to_vec(),
            singular_values: self.singular_values[..k].to_vec(),
            ..self.clone()
        }
    }
}

/// Fit a basis on `data` (rows = complexes, columns = prediction instances).
pub fn fit_pca(data: &DMatrix<f64>, column_ids: Vec<String>, source: PcaSource) -> Result<PcaBasis> {
    let (n, p) = data.shape();
    if n < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 rows, got {n}")));
    }
    if p == 0 {
        return Err(Error::invalid("PCA needs at least 1 column"));
    }
    if column_ids.len() != p {
        return Err(Error::Schema(format!(
            "{} column ids for a {p}-column matrix",
            column_ids.len()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("PCA input contains non-finite values"));
    }
    let means: Vec<f64> = data.column_iter().map(|c| c.mean()).collect();
    let mut centered = data.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }

    // Thin SVD; nalgebra handles wide matrices by working on the transpose.
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(order.len());
    let mut singular_values = Vec::with_capacity(order.len());
    for &i in &order {
        let mut loading: Vec<f64> = v_t.row(i).iter().copied().collect();
        if loading.iter().sum::<f64>() < 0.0 {
            loading.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(loading);
        singular_values.push(svd.singular_values[i]);
    }
    Ok(PcaBasis {
        source_group: source,
        column_ids,
        column_means: means,
        components,
        singular_values,
        n_rows: n,
        sign_convention: SIGN_CONVENTION.to_string(),
    })
}

/// Scores of `rows` on the first `k` components: `(rows - means) · V_k`.
pub fn project(basis: &PcaBasis, rows: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if rows.ncols() != basis.width() {
        return Err(Error::Schema(format!(
            "PCA basis expects {} columns, got {}",
            basis.width(),
            rows.ncols()
        )));
    }
    if k == 0 || k > basis.n_components() {
        return Err(Error::invalid(format!(
            "component count {k} outside 1..={}",
            basis.n_components()
        )));
    }
    let n = rows.nrows();
    let mut out = DMatrix::zeros(n, k);
    for c in 0..k {
        let loading = &basis.components[c];
        for r in 0..n {
            let mut acc = 0.0;
            for (j, w) in loading.iter().enumerate() {
                acc += (rows[(r, j)] - basis.column_means[j]) * w;
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Result of a PC-count sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcSweep {
    pub best_k: usize,
    /// Validation Pearson for k = 1..=k_max.
    pub pearson_by_k: Vec<f64>,
}

/// Choose how many leading PCs to feed a learner.
///
/// For each `k` in `1..=k_max` the learner is trained on `fixed` plus the first
/// `k` score columns of the training rows and scored by Pearson correlation on
/// the validation rows. The largest correlation wins; ties go to the smaller k.
/// `fit_predict(train_x, train_y, val_x)` returns validation predictions.
pub fn optimize_pc_count<F>(
    fixed: &DMatrix<f64>,
    scores: &DMatrix<f64>,
    labels: &[f64],
    k_max: usize,
    train_rows: &[usize],
    val_rows: &[usize],
    fit_predict: F,
) -> Result<PcSweep>
where
    F: Fn(&DMatrix<f64>, &[f64], &DMatrix<f64>) -> Result<Vec<f64>> + Sync,
{
    use rayon::prelude::*;

    let k_max = k_max.min(scores.ncols());
    if k_max == 0 {
        return Err(Error::invalid("no principal components available"));
    }
    let val_y: Vec<f64> = val_rows.iter().map(|&r| labels[r]).collect();
    if val_y.iter().all(|&v| v == val_y[0]) {
        return Err(Error::invalid("validation split has constant labels"));
    }
    let train_y: Vec<f64> = train_rows.iter().map(|&r| labels[r]).collect();
    let build = |rows: &[usize], k: usize| {
        let width = fixed.ncols() + k;
        DMatrix::from_fn(rows.len(), width, |i, j| {
            if j < fixed.ncols() {
                fixed[(rows[i], j)]
            } else {
                scores[(rows[i], j - fixed.ncols())]
            }
        })
    };
    let pearson_by_k = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let pred = fit_predict(&build(train_rows, k), &train_y, &build(val_rows, k))?;
            // A constant prediction carries no signal.
            Ok(pearson(&pred, &val_y).unwrap_or(f64::NEG_INFINITY))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best_k = 1;
    for (i, &r) in pearson_by_k.iter().enumerate() {
        if r > pearson_by_k[best_k - 1] {
            best_k = i + 1;
        }
    }
    Ok(PcSweep {
        best_k,
        pearson_by_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ids(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("c{j}")).collect()
    }

    fn wavy(n: usize, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |i, j| ((i * 7 + j * 3) as f64 * 0.37).sin() + (i as f64) * 0.1 * (j + 1) as f64)
    }

    #[test]
    fn rank_one_matrix_has_single_direction() {
        let data = DMatrix::from_fn(8, 4, |i, j| (i as f64 - 2.0) * (j + 1) as f64);
        let basis = fit_pca(&data, ids(4), PcaSource::DAP).unwrap();
        assert_abs_diff_eq!(basis.explained_variance_ratio()[0], 1.0, epsilon = 1e-10);
        let scores = project(&basis, &data, 1).unwrap();
        for i in 0..8 {
            for j in 0..4 {
                let recon = basis.column_means[j] + scores[(i, 0)] * basis.components[0][j];
                assert_abs_diff_eq!(recon, data[(i, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn components_are_orthonormal_and_sign_fixed() {
        let data = wavy(12, 5);
        let basis = fit_pca(&data, ids(5), PcaSource::D3P).unwrap();
        for a in 0..basis.n_components() {
            assert!(basis.components[a].iter().sum::<f64>() >= 0.0);
            for b in 0..basis.n_components() {
                let dot: f64 = basis.components[a].iter().zip(&basis.components[b]).map(|(x, y)| x * y).sum();
                assert_abs_diff_eq!(dot, if a == b { 1.0 } else { 0.0 }, epsilon = 1e-8);
            }
        }
        let ev = basis.explained_variance();
        assert!(ev.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn full_projection_reconstructs_and_is_centered() {
        let data = wavy(10, 4);
        let basis = fit_pca(&data, ids(4), PcaSource::DAP).unwrap();
        let k = basis.n_components();
        let scores = project(&basis, &data, k).unwrap();
        for c in 0..k {
            assert_abs_diff_eq!(scores.column(c).mean(), 0.0, epsilon = 1e-10);
        }
        for i in 0..10 {
            for j in 0..4 {
                let recon: f64 = (0..k).map(|c| scores[(i, c)] * basis.components[c][j]).sum();
                assert_abs_diff_eq!(recon, data[(i, j)] - basis.column_means[j], epsilon = 1e-8);
            }
        }
        let total_var: f64 = (0..4)
            .map(|j| {
                let m = basis.column_means[j];
                data.column(j).iter().map(|v| (v - m).powi(2)).sum::<f64>() / 9.0
            })
            .sum();
        let ev_sum: f64 = basis.explained_variance().iter().sum();
        assert_abs_diff_eq!(ev_sum / total_var, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn projection_prefixes_and_mean_row() {
        let data = wavy(9, 6);
        let basis = fit_pca(&data, ids(6), PcaSource::DAP).unwrap();
        let p2 = project(&basis, &data, 2).unwrap();
        let p3 = project(&basis, &data, 3).unwrap();
        assert_eq!(p2, p3.columns(0, 2).into_owned());
        let mean_row = DMatrix::from_row_slice(1, 6, &basis.column_means);
        let z = project(&basis, &mean_row, 3).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn errors() {
        let one = DMatrix::from_element(1, 3, 1.0);
        assert!(fit_pca(&one, ids(3), PcaSource::DAP).is_err());
        let data = wavy(5, 3);
        let basis = fit_pca(&data, ids(3), PcaSource::DAP).unwrap();
        assert!(matches!(project(&basis, &wavy(5, 2), 1), Err(Error::Schema(_))));
        assert!(project(&basis, &data, 0).is_err());
    }

    #[test]
    fn zero_variance_is_degenerate_but_valid() {
        let data = DMatrix::from_element(4, 3, 2.5);
        let basis = fit_pca(&data, ids(3), PcaSource::DAP).unwrap();
        assert!(basis.singular_values.iter().all(|&s| s.abs() < 1e-12));
        assert!(basis.explained_variance_ratio().iter().all(|&r| r == 0.0));
    }
}
