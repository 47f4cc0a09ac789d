//! Statistical inference: Kruskal-Wallis rank tests across languages and
//! against random baselines, and beta regression with language/model
//! predictors.

pub mod beta;
pub mod design;
pub mod kw;
pub mod linalg;
pub mod special;

pub use beta::{fit_beta_regression, squeeze_to_open_interval, BetaFit, Coefficient};
pub use design::{build_design, DesignMatrix, RegressionRecord};
pub use kw::{kruskal_wallis, kw_language_screen, KwResult, LanguageScreen, RandomShape};
