//! Sequence-level transforms: frame dropout, augmentation, synthetic data
//! and padded batching.

mod augment;
mod batch;
mod dataset;
mod dfd;
mod synth;

pub use augment::{
    augment_dataset, augment_noise, augment_scale, augment_translate, AugmentCopies, AugmentMode,
    AugmentSpec,
};
pub use batch::{pad_and_batch, Batch};
pub use dataset::{Dataset, Provenance};
pub use dfd::{
    dfd_dataset, dfd_kept_indices, dynamic_frame_dropout, frame_distance, DfdConfig, DfdStats,
};
pub use synth::{synth_generate, MotionParams, SynthConfig};
