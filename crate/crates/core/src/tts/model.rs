use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustic::{sidecar_path, PhonemeInventory};
use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{contract_err, Error, Result};
use crate::scalar::Scalar;

/// Style used when an utterance carries no style marks.
pub const NEUTRAL_STYLE: &str = "_";

const PARAM_NAMES: [&str; 6] = ["phoneme_emb", "style_emb", "ff.w1", "ff.b1", "ff.w2", "ff.b2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl Default for DurationModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            hidden_dim: 64,
        }
    }
}

/// Phoneme and style embeddings summed per position, then a two-layer ReLU network
/// predicting `log(1 + duration)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationModel<S> {
    pub config: DurationModelConfig,
    pub inventory: PhonemeInventory,
    pub styles: Vec<String>,
    pub params: ParamStore<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationCheckpointMeta {
    pub config: DurationModelConfig,
    pub inventory: PhonemeInventory,
    pub styles: Vec<String>,
    #[serde(default)]
    pub train_config: Option<super::DurationTrainConfig>,
    #[serde(default)]
    pub report: Option<super::DurationReport>,
}

impl<S: Scalar> DurationModel<S> {
    /// Embeddings and weights uniform in `±1/sqrt(fan_in)`; output bias `log1p_mean`.
    pub fn new(
        inventory: PhonemeInventory,
        styles: Vec<String>,
        config: DurationModelConfig,
        log1p_mean: f64,
        seed: u64,
    ) -> Result<Self> {
        if config.embed_dim == 0 || config.hidden_dim == 0 {
            return Err(Error::Config("embedding and hidden dimensions must be positive".into()));
        }
        if styles.is_empty() {
            return Err(Error::Config("style list is empty".into()));
        }
        let (d, h) = (config.embed_dim, config.hidden_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |shape: &[usize], k: f64| Tensor::from_fn(shape, |_| S::lit(rng.random_range(-k..k)));
        let kd = 1.0 / (d as f64).sqrt();
        let kh = 1.0 / (h as f64).sqrt();
        let mut params = ParamStore::new();
        params.insert("phoneme_emb", uniform(&[inventory.len(), d], kd));
        params.insert("style_emb", uniform(&[styles.len(), d], kd));
        params.insert("ff.w1", uniform(&[d, h], kd));
        params.insert("ff.b1", Tensor::zeros(&[1, h]));
        params.insert("ff.w2", uniform(&[h, 1], kh));
        params.insert("ff.b2", Tensor::full(&[1, 1], S::lit(log1p_mean)));
        Ok(Self {
            config,
            inventory,
            styles,
            params,
        })
    }

    pub fn from_parts(meta: DurationCheckpointMeta, params: ParamStore<S>) -> Result<Self> {
        if params.names() != PARAM_NAMES {
            return Err(Error::Format(format!("checkpoint tensors {:?} do not match the model layout", params.names())));
        }
        let (d, h) = (meta.config.embed_dim, meta.config.hidden_dim);
        let want: [Vec<usize>; 6] = [
            vec![meta.inventory.len(), d],
            vec![meta.styles.len(), d],
            vec![d, h],
            vec![1, h],
            vec![h, 1],
            vec![1, 1],
        ];
        for ((name, t), w) in params.names().iter().zip(params.tensors()).zip(&want) {
            if t.shape() != w.as_slice() {
                return Err(Error::Format(format!("tensor {name} has shape {:?}, expected {w:?}", t.shape())));
            }
        }
        Ok(Self {
            config: meta.config,
            inventory: meta.inventory,
            styles: meta.styles,
            params,
        })
    }

    pub fn meta(&self) -> DurationCheckpointMeta {
        DurationCheckpointMeta {
            config: self.config,
            inventory: self.inventory.clone(),
            styles: self.styles.clone(),
            train_config: None,
            report: None,
        }
    }

    pub fn save(&self, path: &Path, meta: &DurationCheckpointMeta) -> Result<()> {
        self.params.save(path)?;
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, DurationCheckpointMeta)> {
        let params = ParamStore::load(path)?;
        let text = std::fs::read_to_string(sidecar_path(path))?;
        let meta: DurationCheckpointMeta =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("checkpoint sidecar: {e}")))?;
        Ok((Self::from_parts(meta.clone(), params)?, meta))
    }

    pub fn style_id(&self, style: &str) -> Option<usize> {
        self.styles.iter().position(|s| s == style)
    }

    /// Phoneme and style ids; a missing style list means neutral style throughout.
    pub fn encode(&self, phonemes: &[String], styles: Option<&[String]>) -> Result<(Vec<usize>, Vec<usize>)> {
        let x = self.inventory.encode(phonemes)?;
        let s = match styles {
            Some(styles) => {
                if styles.len() != phonemes.len() {
                    return contract_err(format!("{} styles for {} phonemes", styles.len(), phonemes.len()));
                }
                styles
                    .iter()
                    .map(|st| {
                        self.style_id(st)
                            .ok_or_else(|| Error::Contract(format!("style '{st}' is not in the model's style list")))
                    })
                    .collect::<Result<_>>()?
            }
            None => {
                let neutral = self
                    .style_id(NEUTRAL_STYLE)
                    .ok_or_else(|| Error::Contract("model has no neutral style".into()))?;
                vec![neutral; phonemes.len()]
            }
        };
        Ok((x, s))
    }

    pub fn bind<'t>(&self, tape: &'t Tape<S>, trainable: bool) -> Vec<Var<'t, S>> {
        self.params
            .tensors()
            .iter()
            .map(|t| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) })
            .collect()
    }

    /// Predicted `log(1 + duration)` per position as a `|X| x 1` column. `dropout_mask`
    /// scales the hidden layer when training.
    pub fn forward_tape<'t>(
        &self,
        params: &[Var<'t, S>],
        x: &[usize],
        s: &[usize],
        dropout_mask: Option<Tensor<S>>,
    ) -> Result<Var<'t, S>> {
        if x.len() != s.len() {
            return contract_err(format!("{} phoneme ids but {} style ids", x.len(), s.len()));
        }
        let n = x.len();
        let e = params[0].embedding_lookup(x)?.add(params[1].embedding_lookup(s)?)?;
        let mut h = e.matmul(params[2])?.add(params[3].repeat_rows(n)?)?.relu();
        if let Some(mask) = dropout_mask {
            h = h.mul(params[0].tape_ref().constant(mask))?;
        }
        h.matmul(params[4])?.add(params[5].repeat_rows(n)?)
    }

    /// Raw log-domain predictions.
    pub fn predict_log(&self, x: &[usize], s: &[usize]) -> Result<Vec<S>> {
        let tape = Tape::new();
        let params = self.bind(&tape, false);
        let out = self.forward_tape(&params, x, s, None)?;
        let v = out.value().data().to_vec();
        Ok(v)
    }

    /// Frame durations: `round(expm1(prediction))`, at least 1.
    pub fn predict(&self, phonemes: &[String], styles: Option<&[String]>) -> Result<Vec<usize>> {
        let (x, s) = self.encode(phonemes, styles)?;
        Ok(self.predict_log(&x, &s)?.into_iter().map(to_frames).collect())
    }
}

/// `round(expm1(v))` clamped to at least one frame.
pub fn to_frames<S: Scalar>(v: S) -> usize {
    let d = v.to_f64_lossy().exp_m1().round();
    if d.is_finite() && d >= 1.0 {
        d as usize
    } else {
        1
    }
}

/// `E = embed(X) + embed(S)`, one row per position.
pub fn fuse_embeddings<S: Scalar>(model: &DurationModel<S>, x: &[usize], s: &[usize]) -> Result<Tensor<S>> {
    if x.len() != s.len() {
        return contract_err(format!("{} phoneme ids but {} style ids", x.len(), s.len()));
    }
    let tape = Tape::new();
    let params = model.bind(&tape, false);
    let e = params[0].embedding_lookup(x)?.add(params[1].embedding_lookup(s)?)?;
    let v = e.value().clone();
    Ok(v)
}

/// Repeats row `i` of `e` `durations[i]` times.
pub fn length_regulate<S: Scalar>(e: &Tensor<S>, durations: &[usize]) -> Result<Tensor<S>> {
    let (rows, d) = e.dims2()?;
    if rows != durations.len() {
        return contract_err(format!("{rows} embeddings but {} durations", durations.len()));
    }
    let total: usize = durations.iter().sum();
    let mut out = Vec::with_capacity(total * d);
    for (i, &n) in durations.iter().enumerate() {
        let row = &e.data()[i * d..(i + 1) * d];
        for _ in 0..n {
            out.extend_from_slice(row);
        }
    }
    Tensor::matrix(total, d, out)
}

/// Feature MSE plus mean absolute duration error in `log1p` space.
pub fn tts_loss<S: Scalar>(h_pred: &Tensor<S>, h_ref: &Tensor<S>, l_pred: &[S], l_ref: &[usize]) -> Result<S> {
    if h_pred.shape() != h_ref.shape() {
        return contract_err(format!("feature shapes {:?} and {:?} differ", h_pred.shape(), h_ref.shape()));
    }
    if l_pred.len() != l_ref.len() || l_ref.is_empty() {
        return contract_err(format!("{} predicted durations for {} references", l_pred.len(), l_ref.len()));
    }
    let mse = if h_ref.numel() == 0 {
        S::zero()
    } else {
        h_pred.data().iter().zip(h_ref.data()).map(|(&a, &b)| (a - b) * (a - b)).sum::<S>()
            / S::of_usize(h_ref.numel())
    };
    let mae = l_pred
        .iter()
        .zip(l_ref)
        .map(|(&p, &r)| (p - S::lit((r as f64).ln_1p())).abs())
        .sum::<S>()
        / S::of_usize(l_ref.len());
    Ok(mse + mae)
}

/// Differentiable form of [`tts_loss`]: `h_pred` and `l_pred` (a column) live on the tape.
pub fn tts_loss_tape<'t, S: Scalar>(
    h_pred: Var<'t, S>,
    h_ref: &Tensor<S>,
    l_pred: Var<'t, S>,
    l_ref: &[usize],
) -> Result<Var<'t, S>> {
    let tape = h_pred.tape_ref();
    if h_pred.shape() != h_ref.shape() {
        return contract_err(format!("feature shapes {:?} and {:?} differ", h_pred.shape(), h_ref.shape()));
    }
    let target = Tensor::matrix(l_ref.len(), 1, l_ref.iter().map(|&r| S::lit((r as f64).ln_1p())).collect())?;
    if l_pred.shape() != target.shape() {
        return contract_err(format!("{:?} predicted durations for {} references", l_pred.shape(), l_ref.len()));
    }
    let diff = h_pred.sub(tape.constant(h_ref.clone()))?;
    let mse = diff.mul(diff)?.mean();
    let mae = l_pred.sub(tape.constant(target))?.abs().mean();
    mse.add(mae)
}
