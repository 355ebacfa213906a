//! Shuffled k-fold and repeated k-fold partitions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_SEED: u64 = 1701;

/// Split a shuffled `0..n` into `folds` contiguous test blocks. The first
/// `n % folds` blocks get one extra row. Each block is returned sorted.
pub fn shuffled_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if n < folds {
        return Err(Error::invalid(format!("{n} rows cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        let mut block = order[start..start + size].to_vec();
        block.sort_unstable();
        out.push(block);
        start += size;
    }
    Ok(out)
}

/// Complement of a sorted test block within `0..n`.
pub fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in test {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_rows: usize,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    /// `assignments[repeat][fold]` is the sorted test-row set.
    pub assignments: Vec<Vec<Vec<usize>>>,
}

impl CvPlan {
    pub fn test_rows(&self, repeat: usize, fold: usize) -> &[usize] {
        &self.assignments[repeat][fold]
    }

    pub fn train_rows(&self, repeat: usize, fold: usize) -> Vec<usize> {
        complement(self.n_rows, self.test_rows(repeat, fold))
    }

    /// All `(repeat, fold)` cells in order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.repeats).flat_map(move |r| (0..self.folds).map(move |f| (r, f)))
    }
}

/// Deterministic repeated k-fold plan; repeat `r` shuffles with a stream
/// derived from `(seed, r)`.
pub fn repeated_kfold(n: usize, folds: usize, repeats: usize, seed: u64) -> Result<CvPlan> {
    if repeats == 0 {
        return Err(Error::invalid("need at least one repeat"));
    }
    let assignments = (0..repeats)
        .map(|r| shuffled_folds(n, folds, seed::derive(seed, "repeated-kfold", r as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CvPlan {
        n_rows: n,
        folds,
        repeats,
        seed,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_rows_five_folds_ten_repeats() {
        let plan = repeated_kfold(10, 5, 10, DEFAULT_SEED).unwrap();
        assert_eq!(plan.cells().count(), 50);
        assert!(plan.cells().all(|(r, f)| plan.test_rows(r, f).len() == 2));
        let mut hits = [0; 10];
        for (r, f) in plan.cells() {
            for &i in plan.test_rows(r, f) {
                hits[i] += 1;
            }
        }
        assert!(hits.iter().all(|&h| h == 10));
        assert_eq!(plan, repeated_kfold(10, 5, 10, DEFAULT_SEED).unwrap());
        assert_ne!(plan, repeated_kfold(10, 5, 10, 7).unwrap());
    }

    #[test]
    fn uneven_sizes_and_errors() {
        let folds = shuffled_folds(12, 5, 3).unwrap();
        let sizes: Vec<_> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, [3, 3, 2, 2, 2]);
        assert!(shuffled_folds(4, 5, 0).is_err());
        assert!(repeated_kfold(4, 5, 1, 0).is_err());
        assert_eq!(complement(5, &[1, 3]), [0, 2, 4]);
    }
}
