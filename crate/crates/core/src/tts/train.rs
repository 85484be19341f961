use std::collections::BTreeSet;

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{tts_loss_tape, DurationModel, DurationModelConfig, NEUTRAL_STYLE};
use crate::acoustic::PhonemeInventory;
use crate::autodiff::{adam_step, clip_global_norm, AdamConfig, AdamState, Tape, Tensor};
use crate::ctc::AlignmentRecord;
use crate::error::{contract_err, Error, Result};
use crate::scalar::Scalar;
use crate::train::warmup_lr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DurationTrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub dropout: f64,
    pub seed: u64,
    pub clip_norm: f64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Share of utterances held out for the error report.
    pub holdout_fraction: f64,
}

impl Default for DurationTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 60,
            peak_lr: 5e-3,
            warmup_steps: 50,
            dropout: 0.1,
            seed: 0,
            clip_norm: 5.0,
            embed_dim: 32,
            hidden_dim: 64,
            holdout_fraction: 0.1,
        }
    }
}

impl DurationTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 || self.warmup_steps == 0 || self.epochs == 0 {
            return bad("batch_size, warmup_steps and epochs must be >= 1");
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return bad("peak_lr must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad("holdout_fraction must be in [0, 1)");
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return bad("embed_dim and hidden_dim must be >= 1");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

/// One utterance of duration targets.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationExample {
    pub utterance_id: String,
    pub phonemes: Vec<String>,
    pub styles: Vec<String>,
    pub durations: Vec<usize>,
}

impl DurationExample {
    pub fn from_record(record: &AlignmentRecord) -> Result<Self> {
        record.validate()?;
        Ok(Self {
            utterance_id: record.utterance_id.clone(),
            phonemes: record.phonemes.clone(),
            styles: record
                .styles
                .clone()
                .unwrap_or_else(|| vec![NEUTRAL_STYLE.to_string(); record.phonemes.len()]),
            durations: record.durations.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationReport {
    pub train_utterances: usize,
    pub heldout_utterances: Vec<String>,
    pub loss_history: Vec<f64>,
    /// Mean `|predicted - target|` frames over held-out phonemes.
    pub heldout_mae_frames: Option<f64>,
    pub train_mae_frames: f64,
}

#[derive(Debug, Clone)]
pub struct DurationTrainOutcome<S> {
    pub model: DurationModel<S>,
    pub report: DurationReport,
}

/// Mean absolute frame error of `model` over `examples`.
pub fn duration_mae<S: Scalar>(model: &DurationModel<S>, examples: &[&DurationExample]) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for ex in examples {
        let pred = model.predict(&ex.phonemes, Some(&ex.styles))?;
        for (p, r) in pred.iter().zip(&ex.durations) {
            sum += p.abs_diff(*r) as f64;
            n += 1;
        }
    }
    if n == 0 {
        return contract_err("no phonemes to score");
    }
    Ok(sum / n as f64)
}

/// Trains phoneme/style embeddings and the predictor by MAE on `log1p` durations.
/// Positions are independent, so a batch is the concatenation of its utterances.
pub fn train_duration_model<S: Scalar>(
    examples: &[DurationExample],
    config: &DurationTrainConfig,
) -> Result<DurationTrainOutcome<S>> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Training("no alignments to train on".into()));
    }
    for ex in examples {
        if ex.phonemes.len() != ex.durations.len() || ex.styles.len() != ex.phonemes.len() || ex.phonemes.is_empty() {
            return contract_err(format!("utterance {}: inconsistent lengths", ex.utterance_id));
        }
    }
    let inventory = PhonemeInventory::from_sequences(examples.iter().map(|e| e.phonemes.as_slice()))?;
    let mut styles: BTreeSet<String> = examples.iter().flat_map(|e| e.styles.iter().cloned()).collect();
    styles.insert(NEUTRAL_STYLE.to_string());
    let styles: Vec<String> = styles.into_iter().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by(|&a, &b| examples[a].utterance_id.cmp(&examples[b].utterance_id));
    order.shuffle(&mut rng);
    let holdout = if examples.len() >= 2 {
        ((examples.len() as f64 * config.holdout_fraction).round() as usize).min(examples.len() - 1)
    } else {
        0
    };
    let (held, train) = order.split_at(holdout);
    let train: Vec<&DurationExample> = train.iter().map(|&i| &examples[i]).collect();
    let mut held: Vec<&DurationExample> = held.iter().map(|&i| &examples[i]).collect();
    held.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));

    let all_targets: Vec<f64> = train.iter().flat_map(|e| e.durations.iter().map(|&d| (d as f64).ln_1p())).collect();
    let mean = all_targets.iter().sum::<f64>() / all_targets.len() as f64;
    let model_config = DurationModelConfig {
        embed_dim: config.embed_dim,
        hidden_dim: config.hidden_dim,
    };
    let mut model = DurationModel::<S>::new(inventory, styles, model_config, mean, config.seed)?;
    let encoded: Vec<(Vec<usize>, Vec<usize>)> = train
        .iter()
        .map(|e| model.encode(&e.phonemes, Some(&e.styles)))
        .collect::<Result<_>>()?;

    let mut adam = AdamState::new(model.params.tensors());
    let mut history = Vec::with_capacity(config.epochs);
    let empty = Tensor::<S>::zeros(&[1, 1]);
    for epoch in 1..=config.epochs {
        let mut idx: Vec<usize> = (0..train.len()).collect();
        idx.shuffle(&mut rng);
        let (mut loss_sum, mut batches) = (0.0, 0usize);
        for batch in idx.chunks(config.batch_size) {
            let mut x = Vec::new();
            let mut s = Vec::new();
            let mut l = Vec::new();
            for &i in batch {
                x.extend_from_slice(&encoded[i].0);
                s.extend_from_slice(&encoded[i].1);
                l.extend_from_slice(&train[i].durations);
            }
            let mask = (config.dropout > 0.0).then(|| {
                let keep = S::lit(1.0 / (1.0 - config.dropout));
                Tensor::from_fn(&[x.len(), config.hidden_dim], |_| {
                    if rng.random::<f64>() < config.dropout {
                        S::zero()
                    } else {
                        keep
                    }
                })
            });
            let tape = Tape::new();
            let params = model.bind(&tape, true);
            let pred = model.forward_tape(&params, &x, &s, mask)?;
            let loss = tts_loss_tape(tape.constant(empty.clone()), &empty, pred, &l)?;
            loss_sum += loss.item().to_f64_lossy();
            batches += 1;
            let mut grads = tape.backward(loss)?;
            let mut g: Vec<Tensor<S>> = params.iter().map(|&p| grads.take(p)).collect();
            clip_global_norm(&mut g, config.clip_norm);
            let lr = warmup_lr(config.peak_lr, config.warmup_steps, adam.step + 1);
            adam_step(model.params.tensors_mut(), &g, &mut adam, lr, AdamConfig::default())?;
        }
        let mean_loss = loss_sum / batches as f64;
        if epoch == 1 || epoch % 10 == 0 || epoch == config.epochs {
            info!("duration epoch {epoch}: mean log1p MAE {mean_loss:.4}");
        }
        history.push(mean_loss);
    }

    let report = DurationReport {
        train_utterances: train.len(),
        heldout_utterances: held.iter().map(|e| e.utterance_id.clone()).collect(),
        loss_history: history,
        heldout_mae_frames: if held.is_empty() { None } else { Some(duration_mae(&model, &held)?) },
        train_mae_frames: duration_mae(&model, &train)?,
    };
    Ok(DurationTrainOutcome { model, report })
}
