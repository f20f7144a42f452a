//! Structural analysis of time-series collections via compositional Gaussian
//! process kernels.
//!
//! The pipeline fits every candidate kernel from a small compositional grammar
//! to every series in a dataset, records the BIC of each fit in a matrix
//! (rows = series, columns = kernels), and uses the row-standardized matrix as
//! an embedding in which series with similar structure sit close together.
//! Clustering that embedding uncovers structural sub-populations; the kernel
//! with the lowest summed BIC over a sub-population describes it, and each
//! kernel maps to a short natural-language summary of its additive components.
//!
//! Modules follow the pipeline stages:
//!
//! - [`series`]: containers, standardization, CSV ingestion, synthetic data.
//! - [`grammar`]: kernel expression algebra and candidate enumeration.
//! - [`gp`]: covariance assembly, marginal likelihood, fitting, the BIC sweep.
//! - [`embedding`]: row standardization and pairwise distances.
//! - [`clustering`]: HDBSCAN, single-linkage HAC, kernel selection.
//! - [`evaluation`]: homogeneity / completeness / V-measure.
//! - [`baselines`]: DTW and SAX bag-of-patterns distance representations.

pub mod baselines;
pub mod clustering;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod gp;
pub mod grammar;
pub mod seed;
pub mod series;

pub use error::{Error, Result};
