//! Phoneme duration alignment from a CTC-trained recurrent frame classifier.
//!
//! The pipeline: acoustic features ([`features`]) feed a two-layer bidirectional
//! LSTM ([`acoustic`]) trained with CTC ([`ctc`]); per-phoneme durations are read
//! off its likelihood matrix by argmax-and-collapse, with a forced Viterbi
//! fallback; the durations then train a small duration predictor ([`tts`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common choices.

pub mod acoustic;
pub mod audio;
pub mod autodiff;
pub mod ctc;
pub mod error;
pub mod features;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod train;
pub mod tts;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tensor64 = autodiff::Tensor<f64>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type LikelihoodMatrix32 = acoustic::LikelihoodMatrix<f32>;
pub type LikelihoodMatrix64 = acoustic::LikelihoodMatrix<f64>;
pub type AsrModel32 = acoustic::AsrModel<f32>;
pub type AsrModel64 = acoustic::AsrModel<f64>;
pub type DurationModel32 = tts::DurationModel<f32>;
