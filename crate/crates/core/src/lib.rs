//! Activity recognition from 2D skeleton sequences.
//!
//! The pipeline runs keypoint ingestion and confidence masking
//! ([`pose_ingest`]), frame dropout, augmentation and batching
//! ([`sequence_ops`]), a from-scratch bidirectional LSTM classifier
//! ([`neural_core`]) and a training/evaluation layer with a multi-step
//! classification head ([`training`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod neural_core;
pub mod pose_ingest;
pub mod rng;
pub mod sequence_ops;
pub mod training;

pub use error::{Error, Result};
