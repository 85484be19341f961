use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LikelihoodMatrix, PhonemeInventory};
use crate::autodiff::{concat, ParamStore, Tape, Tensor, Var};
use crate::error::{shape_err, Error, Result};
use crate::features::{FeatureConfig, FeatureKind, FeatureMatrix, FeatureStats};
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN: usize = 128;
const LAYERS: usize = 2;
const DIRECTIONS: [&str; 2] = ["fwd", "bwd"];

/// Shape of the recurrent classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
}

/// Two bidirectional LSTM layers followed by a linear projection and log-softmax.
///
/// Parameters are stored as `l{layer}.{fwd,bwd}.{w_ih,w_hh,b}` and `proj.{w,b}`,
/// with gate blocks ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct AsrModel<S> {
    pub config: AsrConfig,
    pub params: ParamStore<S>,
    pub stats: FeatureStats,
    pub inventory: PhonemeInventory,
    pub feature_config: FeatureConfig,
    pub feature_kind: FeatureKind,
}

/// Everything except the weights, stored next to the tensor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrCheckpointMeta {
    pub config: AsrConfig,
    pub inventory: PhonemeInventory,
    pub feature_config: FeatureConfig,
    pub feature_kind: FeatureKind,
    pub stats: FeatureStats,
    #[serde(default)]
    pub train_config: Option<super::TrainConfig>,
    #[serde(default)]
    pub epoch: usize,
    #[serde(default)]
    pub loss_history: Vec<f64>,
}

/// Sidecar path for a checkpoint tensor file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Dropout applied during a training forward pass.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

impl Dropout<'_> {
    fn mask<S: Scalar>(&mut self, rows: usize, cols: usize) -> Tensor<S> {
        let keep = S::lit(1.0 / (1.0 - self.rate));
        let rate = self.rate;
        let rng = &mut *self.rng;
        Tensor::from_fn(&[rows, cols], |_| if rng.random::<f64>() < rate { S::zero() } else { keep })
    }
}

fn param_names() -> Vec<String> {
    let mut names = Vec::new();
    for layer in 1..=LAYERS {
        for dir in DIRECTIONS {
            for p in ["w_ih", "w_hh", "b"] {
                names.push(format!("l{layer}.{dir}.{p}"));
            }
        }
    }
    names.push("proj.w".into());
    names.push("proj.b".into());
    names
}

fn expected_shape(config: &AsrConfig, name: &str) -> Vec<usize> {
    let h = config.hidden_dim;
    match name {
        "proj.w" => vec![2 * h, config.num_classes],
        "proj.b" => vec![1, config.num_classes],
        _ => {
            let input = if name.starts_with("l1.") { config.input_dim } else { 2 * h };
            match name.rsplit('.').next() {
                Some("w_ih") => vec![input, 4 * h],
                Some("w_hh") => vec![h, 4 * h],
                _ => vec![1, 4 * h],
            }
        }
    }
}

impl<S: Scalar> AsrModel<S> {
    /// Randomly initialized model: LSTM weights uniform in `±1/sqrt(hidden)`, forget-gate
    /// bias 1, other biases 0; projection uniform in `±1/sqrt(2 hidden)`.
    pub fn new(
        inventory: PhonemeInventory,
        feature_config: FeatureConfig,
        feature_kind: FeatureKind,
        input_dim: usize,
        hidden_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Config("input and hidden dimensions must be positive".into()));
        }
        let config = AsrConfig {
            input_dim,
            hidden_dim,
            num_classes: inventory.num_classes(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for name in param_names() {
            let shape = expected_shape(&config, &name);
            let tensor = if name == "proj.b" {
                Tensor::zeros(&shape)
            } else if name.ends_with(".b") {
                let h = hidden_dim;
                Tensor::from_fn(&shape, |i| if (h..2 * h).contains(&i) { S::one() } else { S::zero() })
            } else {
                let k = if name == "proj.w" {
                    1.0 / ((2 * hidden_dim) as f64).sqrt()
                } else {
                    1.0 / (hidden_dim as f64).sqrt()
                };
                Tensor::from_fn(&shape, |_| S::lit(rng.random_range(-k..k)))
            };
            params.insert(name, tensor);
        }
        Ok(Self {
            config,
            params,
            stats: FeatureStats::identity(input_dim),
            inventory,
            feature_config,
            feature_kind,
        })
    }

    /// Overwrites the projection bias of the blank class.
    pub fn set_blank_bias(&mut self, value: S) {
        let blank = self.inventory.blank_id();
        let slot = self.params.index_of("proj.b").expect("projection bias present");
        self.params.tensors_mut()[slot].data_mut()[blank] = value;
    }

    pub fn from_parts(
        meta: AsrCheckpointMeta,
        params: ParamStore<S>,
    ) -> Result<Self> {
        let names = param_names();
        if params.names() != names.as_slice() {
            return Err(Error::Format(format!("checkpoint tensors {:?} do not match the model layout", params.names())));
        }
        for (name, t) in params.names().iter().zip(params.tensors()) {
            let want = expected_shape(&meta.config, name);
            if t.shape() != want.as_slice() {
                return Err(Error::Format(format!("tensor {name} has shape {:?}, expected {want:?}", t.shape())));
            }
        }
        if meta.config.num_classes != meta.inventory.num_classes() || meta.stats.dim() != meta.config.input_dim {
            return Err(Error::Format("checkpoint metadata is inconsistent with its tensors".into()));
        }
        Ok(Self {
            config: meta.config,
            params,
            stats: meta.stats,
            inventory: meta.inventory,
            feature_config: meta.feature_config,
            feature_kind: meta.feature_kind,
        })
    }

    pub fn meta(&self) -> AsrCheckpointMeta {
        AsrCheckpointMeta {
            config: self.config,
            inventory: self.inventory.clone(),
            feature_config: self.feature_config.clone(),
            feature_kind: self.feature_kind,
            stats: self.stats.clone(),
            train_config: None,
            epoch: 0,
            loss_history: Vec::new(),
        }
    }

    /// Writes `path` (tensor container) and its JSON sidecar.
    pub fn save(&self, path: &Path, meta: &AsrCheckpointMeta) -> Result<()> {
        self.params.save(path)?;
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, AsrCheckpointMeta)> {
        let params = ParamStore::load(path)?;
        let text = std::fs::read_to_string(sidecar_path(path))?;
        let meta: AsrCheckpointMeta =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("checkpoint sidecar: {e}")))?;
        Ok((Self::from_parts(meta.clone(), params)?, meta))
    }

    pub fn cast<U: Scalar>(&self) -> AsrModel<U> {
        AsrModel {
            config: self.config,
            params: self.params.cast(),
            stats: self.stats.clone(),
            inventory: self.inventory.clone(),
            feature_config: self.feature_config.clone(),
            feature_kind: self.feature_kind,
        }
    }

    /// Registers every parameter on `tape`, in storage order.
    pub fn bind<'t>(&self, tape: &'t Tape<S>, trainable: bool) -> Vec<Var<'t, S>> {
        self.params
            .tensors()
            .iter()
            .map(|t| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) })
            .collect()
    }

    /// Normalizes `features` with the stored statistics into a `T x N` matrix.
    pub fn prepare_input(&self, features: &FeatureMatrix<S>) -> Result<Tensor<S>> {
        if features.dim() != self.config.input_dim {
            return shape_err(format!(
                "features have {} dims, model expects {}",
                features.dim(),
                self.config.input_dim
            ));
        }
        Tensor::matrix(features.frames(), features.dim(), self.stats.apply(features)?)
    }

    /// Forward pass on `tape` from an already normalized `T x N` input, returning
    /// `T x (P+1)` log-probabilities.
    pub fn forward_tape<'t>(
        &self,
        tape: &'t Tape<S>,
        params: &[Var<'t, S>],
        mut input: Tensor<S>,
        mut dropout: Option<Dropout<'_>>,
    ) -> Result<Var<'t, S>> {
        let (frames, _) = input.dims2()?;
        if let Some(d) = dropout.as_mut() {
            let mask = d.mask::<S>(frames, self.config.input_dim);
            for (x, m) in input.data_mut().iter_mut().zip(mask.data()) {
                *x *= *m;
            }
        }
        let mut x = tape.constant(input);
        for layer in 0..LAYERS {
            if layer > 0 {
                if let Some(d) = dropout.as_mut() {
                    let mask = tape.constant(d.mask(frames, 2 * self.config.hidden_dim));
                    x = x.mul(mask)?;
                }
            }
            let base = layer * 6;
            let fwd = self.lstm_direction(x, &params[base..base + 3], false)?;
            let bwd = self.lstm_direction(x, &params[base + 3..base + 6], true)?;
            x = concat(&[fwd, bwd], 1)?;
        }
        let logits = x.matmul(params[12])?.add(params[13].repeat_rows(frames)?)?;
        logits.log_softmax(1)
    }

    fn lstm_direction<'t>(&self, x: Var<'t, S>, p: &[Var<'t, S>], reverse: bool) -> Result<Var<'t, S>> {
        let h_dim = self.config.hidden_dim;
        let frames = x.shape()[0];
        let (w_ih, w_hh, b) = (p[0], p[1], p[2]);
        let projected = x.matmul(w_ih)?.add(b.repeat_rows(frames)?)?;
        let mut outputs: Vec<Option<Var<'t, S>>> = vec![None; frames];
        let mut state: Option<(Var<'t, S>, Var<'t, S>)> = None;
        for step in 0..frames {
            let t = if reverse { frames - 1 - step } else { step };
            let mut pre = projected.slice(0, t, 1)?;
            if let Some((h, _)) = state {
                pre = pre.add(h.matmul(w_hh)?)?;
            }
            let i = pre.slice(1, 0, h_dim)?.sigmoid();
            let g = pre.slice(1, 2 * h_dim, h_dim)?.tanh();
            let o = pre.slice(1, 3 * h_dim, h_dim)?.sigmoid();
            let mut c = i.mul(g)?;
            if let Some((_, c_prev)) = state {
                let f = pre.slice(1, h_dim, h_dim)?.sigmoid();
                c = c.add(f.mul(c_prev)?)?;
            }
            let h = o.mul(c.tanh())?;
            outputs[t] = Some(h);
            state = Some((h, c));
        }
        let outputs: Vec<Var<'t, S>> = outputs.into_iter().map(|h| h.expect("every frame visited")).collect();
        concat(&outputs, 0)
    }

    /// Inference: normalized features through the network to a likelihood matrix.
    pub fn forward(&self, features: &FeatureMatrix<S>) -> Result<LikelihoodMatrix<S>> {
        let input = self.prepare_input(features)?;
        let tape = Tape::new();
        let params = self.bind(&tape, false);
        let out = self.forward_tape(&tape, &params, input, None)?;
        let value = out.value();
        let (frames, classes) = value.dims2()?;
        LikelihoodMatrix::new(classes, frames, value.data().to_vec(), features.frame_hop_seconds)
    }
}

/// Runs `model` over `features`; see [`AsrModel::forward`].
pub fn asr_forward<S: Scalar>(model: &AsrModel<S>, features: &FeatureMatrix<S>) -> Result<LikelihoodMatrix<S>> {
    model.forward(features)
}
