//! Host-side companion to `eventfeat-core`: event datasets on disk, the
//! synthetic benchmark, model and feature files, the end-to-end training
//! pipeline, metrics and the `eventfeat` command line.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod benchmark;
pub mod config;
pub mod container;
pub mod dataset;
pub mod dump;
pub mod error;
pub mod feature_file;
pub mod metrics;
pub mod pipeline;
pub mod sweep;

pub use config::{EncoderKind, Formulation, PipelineConfig, VolumeShape};
pub use container::{Basis, ModelContainer};
pub use error::{HarnessError, Result};
