//! Meta-regressors and their training protocols.

pub mod cd;
pub mod gbt;
pub mod linear;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use cd::{coordinate_descent, soft_threshold, CdSettings, CdSolution, Design};
pub use gbt::{fit_gbt, r_squared, random_search_gbt, GbtHyperparams, GbtModel, GbtSearch, GbtSearchSpace, Node, Tree};
pub use linear::{
    alpha_grid, alpha_max, fit_elasticnet_cv, fit_enet_cd, fit_lasso_cd, fit_lasso_cv, fit_ols, CvSelection,
    LinearAlgorithm, LinearDiagnostics, LinearModel, Standardizer,
};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    LinReg,
    Lasso,
    ElasticNet,
    #[serde(rename = "XGB")]
    Xgb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::LinReg, Algorithm::Lasso, Algorithm::ElasticNet, Algorithm::Xgb];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::LinReg => "LinReg",
            Algorithm::Lasso => "Lasso",
            Algorithm::ElasticNet => "ElasticNet",
            Algorithm::Xgb => "XGB",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linreg" | "ols" | "linear" => Ok(Algorithm::LinReg),
            "lasso" => Ok(Algorithm::Lasso),
            "elasticnet" | "enet" => Ok(Algorithm::ElasticNet),
            "xgb" | "gbt" => Ok(Algorithm::Xgb),
            _ => Err(Error::invalid(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Effort settings for every learner's CV or search protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Protocol {
    pub folds: usize,
    pub lasso_repeats: usize,
    pub enet_repeats_per_ratio: usize,
    pub l1_ratios: Vec<f64>,
    pub n_alphas: usize,
    pub alpha_min_ratio: f64,
    pub cd: CdSettings,
    pub gbt_iterations: usize,
    pub gbt_space: GbtSearchSpace,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            folds: 5,
            lasso_repeats: 100,
            enet_repeats_per_ratio: 10,
            l1_ratios: vec![0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0],
            n_alphas: 100,
            alpha_min_ratio: 1e-3,
            cd: CdSettings::default(),
            gbt_iterations: 100,
            gbt_space: GbtSearchSpace::default(),
        }
    }
}

impl Protocol {
    /// Lighter settings for the inner fits of the PC-count sweep, which
    /// trains one model per candidate count.
    pub fn sweep() -> Self {
        Protocol {
            lasso_repeats: 5,
            enet_repeats_per_ratio: 1,
            gbt_iterations: 10,
            ..Protocol::default()
        }
    }
}

/// A fitted regressor of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Gbt(GbtModel),
}

impl Model {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            Model::Linear(m) => m.predict(x),
            Model::Gbt(m) => m.predict(x),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.n_features(),
            Model::Gbt(m) => m.n_features,
        }
    }
}

/// Run an algorithm's full protocol.
pub fn fit_algorithm(
    algorithm: Algorithm,
    x: &DMatrix<f64>,
    y: &[f64],
    protocol: &Protocol,
    seed: u64,
) -> Result<Model> {
    Ok(match algorithm {
        Algorithm::LinReg => Model::Linear(fit_ols(x, y)?),
        Algorithm::Lasso => Model::Linear(fit_lasso_cv(x, y, protocol, seed)?),
        Algorithm::ElasticNet => Model::Linear(fit_elasticnet_cv(x, y, protocol, seed)?),
        Algorithm::Xgb => {
            let search = random_search_gbt(x, y, &protocol.gbt_space, protocol.gbt_iterations, protocol.folds, seed)?;
            Model::Gbt(search.model)
        }
    })
}
