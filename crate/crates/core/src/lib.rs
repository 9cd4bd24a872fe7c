//! Comparability toolkit for NILM datasets and evaluation setups.
//!
//! Quantifies how comparable energy datasets and disaggregation studies
//! are: dataset characterization (durations, sampling, events,
//! noise-to-aggregate ratio), the context ratios TSR and EVR, and
//! standardized CO/FHMM disaggregation experiments reporting RMSE together
//! with those ratios under noised and denoised testing.

pub mod disagg;
pub mod error;
pub mod events;
pub mod experiment;
pub mod ingestion;
pub mod metrics;
pub mod report;
pub mod timeseries;

pub use error::NilmError;
