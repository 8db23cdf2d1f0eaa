//! Cellwise outlier detection and robust covariance estimation.
//!
//! [`cellhandler`] flags the outlying cells of a row given a location and
//! covariance model. [`estimator`] alternates that detection with
//! imputation-based re-estimation to obtain a robust model from
//! contaminated data. [`evalkit`] and [`simulation`] provide synthetic
//! models, contamination schemes and scores for evaluating both.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cellhandler;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod evalkit;
pub mod io;
pub mod larpath;
pub mod model;
pub mod numkit;
pub mod simulation;
pub mod table;

pub use cellhandler::{flag_domain_scan, handle_row, FlagLabel, GridSpec, RowDetection};
pub use error::{Error, Result};
pub use estimator::{di_estimate, DiConfig, DiResult, InitialMethod};
pub use evalkit::{discrepancy, ContaminationMode, ContaminationSpec, ScoreReport};
pub use model::CovModel;
pub use numkit::SymMatrix;
pub use table::DataTable;
