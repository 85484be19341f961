//! Phoneme inventory, the bidirectional LSTM frame classifier and its CTC training loop.

mod inventory;
mod likelihood;
mod model;
mod train;

pub use inventory::{PhonemeInventory, BLANK_SYMBOL};
pub use likelihood::LikelihoodMatrix;
pub use model::{asr_forward, sidecar_path, AsrCheckpointMeta, AsrConfig, AsrModel, Dropout, DEFAULT_HIDDEN};
pub use train::{train_asr, utterance_gradients, AsrExample, AsrTrainOutcome, EpochReport, TrainConfig};

#[cfg(test)]
mod tests;
