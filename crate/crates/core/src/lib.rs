//! IPO aftermarket performance in event time and a GARCH(1,1) test of
//! whether dividend periods move a stock's conditional variance.
//!
//! The pipeline runs [`data`] (ingest and calendar alignment) into
//! [`event`] (event-month returns, cumulative and buy-and-hold returns,
//! wealth relatives, grade cohorts) and [`garch`] (quasi-maximum-likelihood
//! estimation with a dividend dummy). [`simulate`] generates data from known
//! parameters to validate the estimator, and [`report`] renders results to
//! files.

pub mod data;
pub mod error;
pub mod event;
pub mod garch;
pub mod optim;
pub mod pipeline;
pub mod report;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
