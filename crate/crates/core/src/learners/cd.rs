//! Cyclic coordinate descent for the elastic-net objective
//!
//! ```text
//! (1/(2n)) ||y - Xw||² + alpha·l1_ratio·||w||₁ + alpha·(1 - l1_ratio)/2·||w||²
//! ```
//!
//! No intercept is fitted here; callers center `X` and `y` first.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdSettings {
    /// Converged once the duality gap of the n-scaled problem drops below
    /// `tol · ||y||²`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdSettings {
    fn default() -> Self {
        CdSettings {
            tol: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdSolution {
    pub coef: Vec<f64>,
    /// Duality gap of the (1/(2n))-scaled objective.
    pub gap: f64,
    pub sweeps: usize,
    pub converged: bool,
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Column-major view of the design with cached squared norms.
pub struct Design<'a> {
    x: &'a DMatrix<f64>,
    norms: Vec<f64>,
}

impl<'a> Design<'a> {
    pub fn new(x: &'a DMatrix<f64>) -> Self {
        let norms = x.column_iter().map(|c| c.norm_squared()).collect();
        Design { x, norms }
    }

    fn col(&self, j: usize) -> &[f64] {
        let n = self.x.nrows();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Duality gap of the n-scaled problem
/// `0.5||y - Xw||² + l1·||w||₁ + 0.5·l2·||w||²`.
fn duality_gap(design: &Design, y: &[f64], w: &[f64], r: &[f64], l1: f64, l2: f64) -> f64 {
    let mut dual_norm = 0.0f64;
    for (j, wj) in w.iter().enumerate() {
        let xta = dot(design.col(j), r) - l2 * wj;
        dual_norm = dual_norm.max(xta.abs());
    }
    let r_norm2 = dot(r, r);
    let w_norm2 = dot(w, w);
    let (scale, mut gap) = if dual_norm > l1 {
        let c = l1 / dual_norm;
        (c, 0.5 * (r_norm2 + r_norm2 * c * c))
    } else {
        (1.0, r_norm2)
    };
    let l1_norm: f64 = w.iter().map(|v| v.abs()).sum();
    gap += l1 * l1_norm - scale * dot(r, y) + 0.5 * l2 * (1.0 + scale * scale) * w_norm2;
    gap
}

/// Solve the elastic-net problem on a prepared design, optionally warm-started.
pub fn coordinate_descent(
    design: &Design,
    y: &[f64],
    alpha: f64,
    l1_ratio: f64,
    settings: CdSettings,
    warm: Option<&[f64]>,
) -> CdSolution {
    let (n, p) = design.x.shape();
    let nf = n as f64;
    let l1 = alpha * l1_ratio * nf;
    let l2 = alpha * (1.0 - l1_ratio) * nf;
    let mut w = warm.map_or_else(|| vec![0.0; p], <[f64]>::to_vec);
    let mut r = y.to_vec();
    for (j, &wj) in w.iter().enumerate() {
        if wj != 0.0 {
            for (ri, xi) in r.iter_mut().zip(design.col(j)) {
                *ri -= wj * xi;
            }
        }
    }
    let threshold = settings.tol * dot(y, y);
    let mut gap = f64::INFINITY;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < settings.max_sweeps {
        sweeps += 1;
        let mut w_max = 0.0f64;
        let mut dw_max = 0.0f64;
        #[allow(clippy::needless_range_loop)]
        for j in 0..p {
            let norm = design.norms[j];
            if norm == 0.0 {
                continue;
            }
            let col = design.col(j);
            let old = w[j];
            let rho = dot(col, &r) + norm * old;
            let new = soft_threshold(rho, l1) / (norm + l2);
            if new != old {
                let delta = new - old;
                for (ri, xi) in r.iter_mut().zip(col) {
                    *ri -= delta * xi;
                }
                w[j] = new;
            }
            dw_max = dw_max.max((new - old).abs());
            w_max = w_max.max(new.abs());
        }
        if w_max == 0.0 || dw_max / w_max < settings.tol || sweeps == settings.max_sweeps {
            gap = duality_gap(design, y, &w, &r, l1, l2);
            if gap <= threshold {
                converged = true;
                break;
            }
        }
    }
    CdSolution {
        coef: w,
        gap: gap / nf,
        sweeps,
        converged,
    }
}
