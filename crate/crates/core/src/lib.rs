//! Used-car price regression pipeline.
//!
//! The crate is organised as a straight pipeline:
//!
//! * [`dataset`] parses the raw listings dump, applies the cleaning rules,
//!   derives the predictor columns and label-encodes the categoricals.
//! * [`eda`] computes the descriptive statistics of a cleaned dataset.
//! * [`forest`] holds the regression trees and the bagged random forest.
//! * [`evaluation`] scores models (R²), runs the tree-count grid search and
//!   fits the ordinary-least-squares baseline.
//! * [`model`] bundles a fitted forest with its feature schema and reads and
//!   writes the binary model file.

pub mod dataset;
pub mod eda;
pub mod error;
pub mod evaluation;
pub mod forest;
pub mod matrix;
pub mod model;
pub mod seed;

pub use error::{Error, Result};
pub use matrix::Matrix;
