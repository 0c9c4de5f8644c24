//! PCA-based dataset harmonization for ultrasound tumor segmentation.
//!
//! The crate covers the full evaluation workflow around a segmentation
//! trainer that lives outside this process:
//!
//! - [`ingest`]: PNG loading, normalization to `[0, 1]`, resizing, seeded
//!   70/10/20 splits and the `UMX1` matrix format.
//! - [`pca`]: per-dataset PCA (Gram-matrix route for `n < d`), Kaiser-Guttman
//!   and cumulative-variance component selection, reconstruction, and the
//!   `UPM1` model format.
//! - [`metrics`]: confusion counts, recall / precision / Dice, and a reference
//!   implementation of the combined Dice + BCE loss.
//! - [`stats`]: descriptive summaries and two-tailed paired / Welch / pooled
//!   t-tests backed by a regularized incomplete beta function.
//! - [`experiment`]: the cross-dataset model/dataset matrix, recall-decline
//!   analysis, report rendering and the file-based trainer orchestration.

pub mod error;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod pca;
pub mod stats;

pub use error::{Error, Result};
