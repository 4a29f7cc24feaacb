//! Parsing and batch processing of SCINDA GNSS ionospheric scintillation
//! data: `.scn` record parsing, T20/61p/TwD corrections, per-satellite
//! splitting, 1-minute and 1-hour aggregation, and the processed file
//! layout.

pub mod aggregate;
pub mod calendar;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod preprocess;
pub mod record;
pub mod synth;

pub use error::{Error, Result};
