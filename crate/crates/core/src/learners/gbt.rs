//! Gradient-boosted regression trees on squared error.
//!
//! Each round fits an exact-greedy tree to the current residuals on a row
//! subsample (without replacement) and a per-tree column subsample. Split gain
//! is measured in half-squared-error units, so `gamma` is the minimum loss
//! reduction a split has to achieve, as in xgboost with zero L2 penalty.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pipeline::cv::{complement, shuffled_folds};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtHyperparams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Fraction of rows drawn for each tree.
    pub subsample: f64,
    /// Fraction of columns drawn for each tree.
    pub colsample_bytree: f64,
    /// Minimum gain for a split to be kept.
    pub gamma: f64,
}

impl Default for GbtHyperparams {
    fn default() -> Self {
        GbtHyperparams {
            n_estimators: 100,
            max_depth: 3,
            learning_rate: 0.1,
            subsample: 0.5,
            colsample_bytree: 0.5,
            gamma: 0.0,
        }
    }
}

impl GbtHyperparams {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| v > 0.0 && v <= 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !frac(self.subsample) || !frac(self.colsample_bytree) {
            return Err(Error::invalid("subsample and colsample_bytree must lie in (0, 1]"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Closed ranges sampled uniformly by the random search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtSearchSpace {
    pub n_estimators: (usize, usize),
    pub max_depth: (usize, usize),
    pub learning_rate: (f64, f64),
    pub gamma: (f64, f64),
    pub colsample_bytree: (f64, f64),
    pub subsample: (f64, f64),
}

impl Default for GbtSearchSpace {
    fn default() -> Self {
        GbtSearchSpace {
            n_estimators: (100, 150),
            max_depth: (2, 6),
            learning_rate: (0.02, 0.3),
            gamma: (0.0, 0.5),
            colsample_bytree: (0.2, 0.8),
            subsample: (0.3, 0.7),
        }
    }
}

impl GbtSearchSpace {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> GbtHyperparams {
        let mut uniform = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
        let learning_rate = uniform(self.learning_rate);
        let gamma = uniform(self.gamma);
        let colsample_bytree = uniform(self.colsample_bytree);
        let subsample = uniform(self.subsample);
        let n_estimators = rng.random_range(self.n_estimators.0..=self.n_estimators.1);
        let max_depth = rng.random_range(self.max_depth.0..=self.max_depth.1);
        GbtHyperparams {
            n_estimators,
            max_depth,
            learning_rate,
            subsample,
            colsample_bytree,
            gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A regression tree stored as a flat node list with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row(feature) < threshold { left } else { right },
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub n_features: usize,
    /// Training-label mean.
    pub base_prediction: f64,
    pub hyperparams: GbtHyperparams,
    pub seed: u64,
    pub trees: Vec<Tree>,
    /// Training MSE after each round.
    pub train_loss: Vec<f64>,
}

impl GbtModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::Schema(format!(
                "tree model expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok((0..x.nrows()).map(|i| self.predict_row(|j| x[(i, j)])).collect())
    }

    fn predict_row(&self, row: impl Fn(usize) -> f64 + Copy) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        self.base_prediction + self.hyperparams.learning_rate * sum
    }
}

/// Per-feature row orders, presorted once per fit.
struct Presorted {
    orders: Vec<Vec<usize>>,
}

impl Presorted {
    fn new(x: &DMatrix<f64>) -> Self {
        let orders = x
            .column_iter()
            .map(|c| {
                let mut idx: Vec<usize> = (0..c.len()).collect();
                idx.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { orders }
    }
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Grower<'a> {
    x: &'a DMatrix<f64>,
    residual: &'a [f64],
    max_depth: usize,
    gamma: f64,
    nodes: Vec<Node>,
    /// Scratch flag per row: true when the row goes left at the current split.
    goes_left: Vec<bool>,
}

impl Grower<'_> {
    fn sum(&self, rows: &[usize]) -> f64 {
        rows.iter().map(|&r| self.residual[r]).sum()
    }

    fn best_split(&self, sorted: &[Vec<usize>], features: &[usize]) -> Option<BestSplit> {
        let rows = &sorted[0];
        let n = rows.len() as f64;
        let total = self.sum(rows);
        let parent = total * total / n;
        let mut best: Option<BestSplit> = None;
        for (slot, &f) in features.iter().enumerate() {
            let order = &sorted[slot];
            let mut left = 0.0;
            for i in 0..order.len() - 1 {
                left += self.residual[order[i]];
                let (a, b) = (self.x[(order[i], f)], self.x[(order[i + 1], f)]);
                if a == b {
                    continue;
                }
                let nl = (i + 1) as f64;
                let right = total - left;
                let gain = 0.5 * (left * left / nl + right * right / (n - nl) - parent);
                if best.as_ref().is_none_or(|s| gain > s.gain) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid > a { mid } else { b };
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    /// Grow the subtree for the rows in `sorted` (one sorted list per feature
    /// slot) and return its node index.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, features: &[usize], depth: usize) -> usize {
        let at = self.nodes.len();
        let rows = &sorted[0];
        let value = self.sum(rows) / rows.len() as f64;
        self.nodes.push(Node::Leaf { value });
        if depth >= self.max_depth || rows.len() < 2 {
            return at;
        }
        let Some(split) = self.best_split(&sorted, features) else {
            return at;
        };
        if !(split.gain > 0.0 && split.gain >= self.gamma) {
            return at;
        }
        for &r in rows {
            self.goes_left[r] = self.x[(r, split.feature)] < split.threshold;
        }
        let (mut lefts, mut rights) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
        for order in &sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&r| self.goes_left[r]);
            lefts.push(l);
            rights.push(r);
        }
        drop(sorted);
        let left = self.grow(lefts, features, depth + 1);
        let right = self.grow(rights, features, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

fn draw_count(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64).round() as usize).clamp(1, total)
}

fn draw_sorted<R: Rng>(rng: &mut R, total: usize, amount: usize) -> Vec<usize> {
    if amount == total {
        return (0..total).collect();
    }
    let mut picked = rand::seq::index::sample(rng, total, amount).into_vec();
    picked.sort_unstable();
    picked
}

fn check_data(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if x.nrows() < 2 {
        return Err(Error::invalid("tree boosting needs at least 2 rows"));
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("tree boosting needs at least 1 feature"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in training data"));
    }
    Ok(())
}

fn fit_presorted(x: &DMatrix<f64>, y: &[f64], pre: &Presorted, hp: &GbtHyperparams, seed: u64) -> GbtModel {
    let (n, p) = x.shape();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut residual: Vec<f64> = y.iter().map(|v| v - base).collect();
    let n_rows = draw_count(hp.subsample, n);
    let n_cols = draw_count(hp.colsample_bytree, p);
    let mut in_sample = vec![false; n];
    let mut trees = Vec::with_capacity(hp.n_estimators);
    let mut train_loss = Vec::with_capacity(hp.n_estimators);
    for t in 0..hp.n_estimators {
        let mut rng = seed::derived_rng(seed, "gbt-tree", t as u64);
        let rows = draw_sorted(&mut rng, n, n_rows);
        let features = draw_sorted(&mut rng, p, n_cols);
        in_sample.iter_mut().for_each(|v| *v = false);
        rows.iter().for_each(|&r| in_sample[r] = true);
        let sorted: Vec<Vec<usize>> = features
            .iter()
            .map(|&f| pre.orders[f].iter().copied().filter(|&r| in_sample[r]).collect())
            .collect();
        let mut grower = Grower {
            x,
            residual: &residual,
            max_depth: hp.max_depth,
            gamma: hp.gamma,
            nodes: Vec::new(),
            goes_left: vec![false; n],
        };
        grower.grow(sorted, &features, 0);
        let tree = Tree { nodes: grower.nodes };
        for i in 0..n {
            pred[i] += hp.learning_rate * tree.predict_row(|j| x[(i, j)]);
            residual[i] = y[i] - pred[i];
        }
        train_loss.push(residual.iter().map(|r| r * r).sum::<f64>() / n as f64);
        trees.push(tree);
    }
    GbtModel {
        n_features: p,
        base_prediction: base,
        hyperparams: *hp,
        seed,
        trees,
        train_loss,
    }
}

/// Fit a boosted ensemble with fixed hyperparameters.
pub fn fit_gbt(x: &DMatrix<f64>, y: &[f64], hp: &GbtHyperparams, seed: u64) -> Result<GbtModel> {
    check_data(x, y)?;
    hp.validate()?;
    Ok(fit_presorted(x, y, &Presorted::new(x), hp, seed))
}

/// Coefficient of determination; a constant target scores 1 only when matched exactly.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> f64 {
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtSearch {
    pub model: GbtModel,
    pub best: GbtHyperparams,
    pub best_index: usize,
    pub best_score: f64,
    /// Mean validation R² per drawn candidate.
    pub scores: Vec<f64>,
}

/// Randomized hyperparameter search scored by mean validation R² over one
/// shuffled k-fold split shared by all candidates; the winner (earliest on
/// ties) is refit on all rows.
pub fn random_search_gbt(
    x: &DMatrix<f64>,
    y: &[f64],
    space: &GbtSearchSpace,
    n_iter: usize,
    folds: usize,
    master_seed: u64,
) -> Result<GbtSearch> {
    check_data(x, y)?;
    if n_iter == 0 {
        return Err(Error::invalid("random search needs at least one iteration"));
    }
    let n = x.nrows();
    let blocks = shuffled_folds(n, folds, seed::derive(master_seed, "gbt-folds", 0))?;
    let splits: Vec<_> = blocks
        .iter()
        .map(|test| {
            let train = complement(n, test);
            let xt = x.select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let pre = Presorted::new(&xt);
            let xv = x.select_rows(test);
            let yv: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            (xt, yt, pre, xv, yv)
        })
        .collect();
    let candidates: Vec<GbtHyperparams> = (0..n_iter)
        .map(|i| space.sample(&mut seed::derived_rng(master_seed, "gbt-search", i as u64)))
        .collect();
    for hp in &candidates {
        hp.validate()?;
    }
    let scores: Vec<f64> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, hp)| {
            let fit_seed = seed::derive(master_seed, "gbt-cv", i as u64);
            let total: f64 = splits
                .iter()
                .map(|(xt, yt, pre, xv, yv)| {
                    let model = fit_presorted(xt, yt, pre, hp, fit_seed);
                    let pred = model.predict(xv).expect("fold width matches");
                    r_squared(&pred, yv)
                })
                .sum();
            total / splits.len() as f64
        })
        .collect();
    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best_index] {
            best_index = i;
        }
    }
    let best = candidates[best_index];
    let model = fit_gbt(x, y, &best, seed::derive(master_seed, "gbt-refit", 0))?;
    Ok(GbtSearch {
        model,
        best,
        best_index,
        best_score: scores[best_index],
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(n_estimators: usize, max_depth: usize, learning_rate: f64, gamma: f64) -> GbtHyperparams {
        GbtHyperparams {
            n_estimators,
            max_depth,
            learning_rate,
            subsample: 1.0,
            colsample_bytree: 1.0,
            gamma,
        }
    }

    #[test]
    fn hand_built_stump() {
        let model = GbtModel {
            n_features: 1,
            base_prediction: 0.0,
            hyperparams: full(1, 1, 0.1, 0.0),
            seed: 0,
            trees: vec![Tree {
                nodes: vec![
                    Node::Split {
                        feature: 0,
                        threshold: 0.5,
                        left: 1,
                        right: 2,
                    },
                    Node::Leaf { value: -1.0 },
                    Node::Leaf { value: 1.0 },
                ],
            }],
            train_loss: vec![],
        };
        let x = DMatrix::from_column_slice(2, 1, &[0.2, 0.8]);
        let pred = model.predict(&x).unwrap();
        assert!((pred[0] + 0.1).abs() < 1e-15 && (pred[1] - 0.1).abs() < 1e-15);
        assert!(model.predict(&DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn step_function_in_one_tree() {
        let xs = [0.1, 0.2, 0.3, 0.6, 0.7, 0.9];
        let x = DMatrix::from_column_slice(6, 1, &xs);
        let y: Vec<f64> = xs.iter().map(|&v| if v < 0.5 { 1.0 } else { 4.0 }).collect();
        let m = fit_gbt(&x, &y, &full(1, 2, 1.0, 0.0), 3).unwrap();
        let pred = m.predict(&x).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-12);
        }
        assert!(m.trees[0].depth() <= 2);
    }

    #[test]
    fn empty_ensemble_and_large_gamma_predict_mean() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i * 3 + j) as f64).sin());
        let y: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let mean = y.iter().sum::<f64>() / 20.0;
        let none = fit_gbt(&x, &y, &full(0, 3, 0.1, 0.0), 1).unwrap();
        assert!(none.predict(&x).unwrap().iter().all(|&p| p == mean));
        let blocked = fit_gbt(&x, &y, &full(10, 3, 0.3, 1e9), 1).unwrap();
        assert!(blocked.trees.iter().all(|t| t.nodes.len() == 1));
        assert!(blocked.predict(&x).unwrap().iter().all(|&p| (p - mean).abs() < 1e-12));
    }

    #[test]
    fn loss_is_monotone_with_full_sampling() {
        let x = DMatrix::from_fn(60, 4, |i, j| ((i * 5 + j * 11) as f64 * 0.13).cos());
        let y: Vec<f64> = (0..60).map(|i| x[(i, 0)] * 2.0 + x[(i, 2)].powi(2)).collect();
        let m = fit_gbt(&x, &y, &full(40, 3, 0.2, 0.0), 9).unwrap();
        assert!(m.train_loss.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(m.trees.iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn fits_are_seed_deterministic() {
        let x = DMatrix::from_fn(40, 5, |i, j| ((i * 7 + j * 3) as f64 * 0.29).sin());
        let y: Vec<f64> = (0..40).map(|i| x[(i, 1)] - x[(i, 3)]).collect();
        let hp = GbtHyperparams::default();
        let a = serde_json::to_string(&fit_gbt(&x, &y, &hp, 5).unwrap()).unwrap();
        let b = serde_json::to_string(&fit_gbt(&x, &y, &hp, 5).unwrap()).unwrap();
        assert_eq!(a, b);
        let search = |s| random_search_gbt(&x, &y, &GbtSearchSpace::default(), 3, 5, s).unwrap();
        assert_eq!(search(11), search(11));
        let one = random_search_gbt(&x, &y, &GbtSearchSpace::default(), 1, 5, 2).unwrap();
        assert_eq!(one.best_index, 0);
        assert_eq!(
            one.best,
            GbtSearchSpace::default().sample(&mut seed::derived_rng(2, "gbt-search", 0))
        );
    }

    #[test]
    fn sampled_hyperparams_stay_in_range() {
        let space = GbtSearchSpace::default();
        let mut rng = seed::rng(4);
        for _ in 0..500 {
            let hp = space.sample(&mut rng);
            assert!((100..=150).contains(&hp.n_estimators));
            assert!((2..=6).contains(&hp.max_depth));
            assert!((0.02..=0.3).contains(&hp.learning_rate));
            assert!((0.0..=0.5).contains(&hp.gamma));
            assert!((0.2..=0.8).contains(&hp.colsample_bytree));
            assert!((0.3..=0.7).contains(&hp.subsample));
        }
    }

    #[test]
    fn r_squared_edge_cases() {
        assert_eq!(r_squared(&[1.0, 1.0], &[1.0, 1.0]), 1.0);
        assert_eq!(r_squared(&[1.0, 2.0], &[1.0, 1.0]), 0.0);
        assert!((r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
