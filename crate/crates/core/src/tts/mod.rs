//! Duration predictor and the length regulator that consumes its output.

mod model;
mod train;

pub use model::{
    fuse_embeddings, length_regulate, to_frames, tts_loss, tts_loss_tape, DurationCheckpointMeta, DurationModel,
    DurationModelConfig, NEUTRAL_STYLE,
};
pub use train::{
    duration_mae, train_duration_model, DurationExample, DurationReport, DurationTrainConfig, DurationTrainOutcome,
};

/// Target feature for the reconstruction term (`M x T`, stored frame-major).
pub type TargetFeature<S> = crate::features::FeatureMatrix<S>;
