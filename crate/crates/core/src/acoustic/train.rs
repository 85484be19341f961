use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{AsrModel, Dropout, DEFAULT_HIDDEN};
use super::{LikelihoodMatrix, PhonemeInventory};
use crate::autodiff::{adam_step, clip_global_norm, AdamConfig, AdamState, Tape, Tensor};
use crate::ctc::{ctc_loss, TargetSequence};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureKind, FeatureMatrix, FeatureStats};
use crate::scalar::Scalar;
use crate::train::{bucketed_batches, mean_gradients, warmup_lr};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub peak_lr: f64,
    pub warmup_steps: usize,
    /// Dropout on input frames and between recurrent layers.
    pub dropout: f64,
    pub seed: u64,
    pub clip_norm: f64,
    pub hidden_dim: usize,
    /// Frames per length bucket when forming batches.
    pub bucket_width: usize,
    /// Initial projection bias of the blank class.
    pub blank_bias_init: f64,
    /// Independently initialized candidates (seeds `seed`, `seed + 1`, ...).
    /// Each trains for `restart_epochs`; the one with the lowest mean training
    /// loss in its last probe epoch continues to `epochs`.
    pub restarts: usize,
    pub restart_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 30,
            peak_lr: 2e-3,
            warmup_steps: 100,
            dropout: 0.1,
            seed: 0,
            clip_norm: 5.0,
            hidden_dim: DEFAULT_HIDDEN,
            bucket_width: 16,
            blank_bias_init: -8.0,
            restarts: 1,
            restart_epochs: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.warmup_steps == 0 {
            return bad("warmup_steps must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return bad("peak_lr must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be >= 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be >= 1");
        }
        if self.restarts > 1 && !(1..=self.epochs).contains(&self.restart_epochs) {
            return bad("restart_epochs must be in 1..=epochs");
        }
        Ok(())
    }

    /// Epochs of computation including discarded candidates.
    pub fn total_epochs(&self) -> usize {
        if self.restarts > 1 {
            self.epochs + (self.restarts - 1) * self.restart_epochs
        } else {
            self.epochs
        }
    }
}

/// One training utterance.
#[derive(Debug, Clone)]
pub struct AsrExample<S> {
    pub utterance_id: String,
    pub features: FeatureMatrix<S>,
    pub phonemes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub steps: u64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct AsrTrainOutcome<S> {
    pub model: AsrModel<S>,
    pub loss_history: Vec<f64>,
    /// Initialization seed of the kept candidate.
    pub selected_seed: u64,
    /// Utterances left out because they are too short for their phoneme sequence.
    pub skipped: Vec<String>,
}

/// Loss and parameter gradients for one utterance.
pub fn utterance_gradients<S: Scalar>(
    model: &AsrModel<S>,
    input: &Tensor<S>,
    target: &TargetSequence,
    dropout: Option<Dropout<'_>>,
) -> Result<(S, Vec<Tensor<S>>)> {
    let tape = Tape::new();
    let params = model.bind(&tape, true);
    let log_probs = model.forward_tape(&tape, &params, input.clone(), dropout)?;
    let (loss, grad) = {
        let v = log_probs.value();
        let (frames, classes) = v.dims2()?;
        let c = LikelihoodMatrix::new(classes, frames, v.data().to_vec(), 0.0)?;
        let out = ctc_loss(&c, target)?;
        (out.loss, Tensor::matrix(frames, classes, out.grad)?)
    };
    let loss_var = log_probs.external_scalar(loss, grad)?;
    let mut grads = tape.backward(loss_var)?;
    Ok((loss, params.iter().map(|&p| grads.take(p)).collect()))
}

/// Trains a fresh model with mini-batch CTC. `on_epoch` runs after every epoch
/// of the kept run with its reports so far (the last one is current); it can
/// checkpoint, log or abort by returning an error. With `restarts > 1` it
/// first fires once the probe phase has picked a candidate.
pub fn train_asr<S: Scalar>(
    examples: &[AsrExample<S>],
    inventory: &PhonemeInventory,
    feature_config: &FeatureConfig,
    feature_kind: FeatureKind,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&AsrModel<S>, &[EpochReport]) -> Result<()>,
) -> Result<AsrTrainOutcome<S>> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Training("no training utterances".into()));
    }
    let dim = examples[0].features.dim();
    let mut usable = Vec::new();
    let mut skipped = Vec::new();
    for ex in examples {
        if ex.features.dim() != dim {
            return Err(Error::Shape(format!(
                "utterance {} has {}-dim features, expected {dim}",
                ex.utterance_id,
                ex.features.dim()
            )));
        }
        let target = TargetSequence::new(inventory.encode(&ex.phonemes)?, inventory.blank_id())?;
        if target.check_feasible(ex.features.frames()).is_err() {
            warn!(
                "skipping {}: {} frames cannot carry {} phonemes (need {})",
                ex.utterance_id,
                ex.features.frames(),
                target.len(),
                target.min_frames()
            );
            skipped.push(ex.utterance_id.clone());
            continue;
        }
        usable.push((ex, target));
    }
    if usable.is_empty() {
        return Err(Error::Training("every training utterance is infeasible for CTC".into()));
    }

    let stats = FeatureStats::compute(usable.iter().map(|(ex, _)| &ex.features))?;
    let new_run = |seed: u64| -> Result<Run<S>> {
        let mut model = AsrModel::new(
            inventory.clone(),
            feature_config.clone(),
            feature_kind,
            dim,
            config.hidden_dim,
            seed,
        )?;
        model.set_blank_bias(S::lit(config.blank_bias_init));
        model.stats = stats.clone();
        Ok(Run {
            adam: AdamState::new(model.params.tensors()),
            model,
            batch_rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            reports: Vec::with_capacity(config.epochs),
        })
    };
    let template = new_run(config.seed)?;
    let data = Data {
        inputs: usable
            .iter()
            .map(|(ex, _)| template.model.prepare_input(&ex.features))
            .collect::<Result<_>>()?,
        lengths: usable.iter().map(|(ex, _)| ex.features.frames()).collect(),
        usable: &usable,
    };

    let mut run = if config.restarts > 1 {
        let mut best: Option<Run<S>> = None;
        for r in 0..config.restarts {
            let mut cand = if r == 0 {
                template.clone()
            } else {
                new_run(config.seed.wrapping_add(r as u64))?
            };
            for _ in 0..config.restart_epochs {
                cand.epoch(&data, config)?;
            }
            let loss = cand.last_loss();
            info!("candidate seed {}: loss {loss:.4} after {} epochs", cand.seed, config.restart_epochs);
            if best.as_ref().map_or(true, |b| loss < b.last_loss()) {
                best = Some(cand);
            }
        }
        let best = best.expect("restarts >= 1");
        info!("continuing candidate seed {}", best.seed);
        on_epoch(&best.model, &best.reports)?;
        best
    } else {
        template
    };
    while run.reports.len() < config.epochs {
        run.epoch(&data, config)?;
        on_epoch(&run.model, &run.reports)?;
    }
    Ok(AsrTrainOutcome {
        loss_history: run.reports.iter().map(|r| r.mean_loss).collect(),
        selected_seed: run.seed,
        model: run.model,
        skipped,
    })
}

struct Data<'a, S> {
    inputs: Vec<Tensor<S>>,
    lengths: Vec<usize>,
    usable: &'a [(&'a AsrExample<S>, TargetSequence)],
}

/// One initialization's training state.
#[derive(Clone)]
struct Run<S> {
    model: AsrModel<S>,
    adam: AdamState<S>,
    batch_rng: ChaCha8Rng,
    seed: u64,
    reports: Vec<EpochReport>,
}

impl<S: Scalar> Run<S> {
    fn last_loss(&self) -> f64 {
        self.reports.last().map_or(f64::INFINITY, |r| r.mean_loss)
    }

    fn epoch(&mut self, data: &Data<'_, S>, config: &TrainConfig) -> Result<()> {
        let epoch = self.reports.len() + 1;
        let batches = bucketed_batches(&data.lengths, config.batch_size, config.bucket_width, &mut self.batch_rng);
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        let mut lr = 0.0;
        for batch in batches {
            let model = &self.model;
            let seed = self.seed;
            let results: Vec<Result<(S, Vec<Tensor<S>>)>> = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(((epoch as u64) << 32) | i as u64);
                    let dropout = (config.dropout > 0.0).then_some(Dropout {
                        rate: config.dropout,
                        rng: &mut rng,
                    });
                    utterance_gradients(model, &data.inputs[i], &data.usable[i].1, dropout)
                })
                .collect();
            let mut grads = Vec::with_capacity(results.len());
            for (r, &i) in results.into_iter().zip(&batch) {
                let (loss, g) = r?;
                let loss = loss.to_f64_lossy();
                if !loss.is_finite() || !g.iter().all(Tensor::all_finite) {
                    warn!(
                        "non-finite loss or gradient for {}, excluded from this step",
                        data.usable[i].0.utterance_id
                    );
                    continue;
                }
                loss_sum += loss;
                loss_count += 1;
                grads.push(g);
            }
            let Some(mut mean) = mean_gradients(grads) else { continue };
            clip_global_norm(&mut mean, config.clip_norm);
            lr = warmup_lr(config.peak_lr, config.warmup_steps, self.adam.step + 1);
            adam_step(self.model.params.tensors_mut(), &mean, &mut self.adam, lr, AdamConfig::default())?;
        }
        if loss_count == 0 {
            return Err(Error::Training(format!("epoch {epoch}: no finite losses")));
        }
        let report = EpochReport {
            epoch,
            mean_loss: loss_sum / loss_count as f64,
            steps: self.adam.step,
            learning_rate: lr,
        };
        info!("epoch {epoch}: mean CTC loss {:.4} (lr {:.2e})", report.mean_loss, lr);
        self.reports.push(report);
        Ok(())
    }
}
