use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::gradcheck::{finite_difference, max_relative_error};
use crate::autodiff::Tensor;
use crate::ctc::TargetSequence;
use crate::features::{FeatureConfig, FeatureKind, FeatureMatrix};

fn inventory(p: usize) -> PhonemeInventory {
    PhonemeInventory::new((0..p).map(|k| format!("p{k}")).collect()).unwrap()
}

fn model<S: crate::Scalar>(n: usize, h: usize, p: usize, seed: u64) -> AsrModel<S> {
    AsrModel::new(inventory(p), FeatureConfig::default(), FeatureKind::Mfcc, n, h, seed).unwrap()
}

fn features<S: crate::Scalar>(n: usize, t: usize, seed: u64) -> FeatureMatrix<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * t).map(|_| S::lit(rng.random_range(-1.0..1.0))).collect();
    FeatureMatrix::from_frames(n, t, values, FeatureKind::Mfcc, 0.01, "x").unwrap()
}

#[test]
fn zero_parameters_give_uniform_columns() {
    let mut m = model::<f64>(3, 4, 2, 0);
    for t in m.params.tensors_mut() {
        t.scale_assign(0.0);
    }
    let c = m.forward(&features(3, 6, 1)).unwrap();
    assert_eq!((c.classes(), c.frames()), (3, 6));
    for &v in c.values() {
        assert!((v + 3f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn single_frame_is_normalized() {
    let m = model::<f64>(5, 6, 3, 2);
    let c = m.forward(&features(5, 1, 3)).unwrap();
    assert_eq!((c.classes(), c.frames()), (4, 1));
    assert!(c.max_normalization_error() < 1e-12);
}

#[test]
fn random_models_emit_normalized_columns() {
    for seed in 0..5 {
        let m = model::<f64>(4, 5, 3, seed);
        let c = m.forward(&features(4, 9, seed + 10)).unwrap();
        assert!(c.max_normalization_error() < 1e-6);
    }
}

#[test]
fn wrong_input_dimension_is_shape_error() {
    let m = model::<f64>(4, 5, 3, 0);
    assert!(matches!(m.forward(&features(3, 9, 0)), Err(crate::Error::Shape(_))));
}

/// Swaps rows `0..h` with `h..2h` of a `2h x c` matrix.
fn swap_row_halves(t: &Tensor<f64>, h: usize) -> Tensor<f64> {
    let (r, c) = t.dims2().unwrap();
    assert_eq!(r, 2 * h);
    let d = t.data();
    Tensor::from_fn(&[r, c], |i| {
        let (row, col) = (i / c, i % c);
        let src = if row < h { row + h } else { row - h };
        d[src * c + col]
    })
}

#[test]
fn bidirectional_symmetry() {
    let h = 4;
    let m = model::<f64>(3, h, 2, 7);
    let mut swapped = m.clone();
    let names: Vec<String> = m.params.names().to_vec();
    for (i, name) in names.iter().enumerate() {
        let partner = if name.contains(".fwd.") {
            Some(name.replace(".fwd.", ".bwd."))
        } else if name.contains(".bwd.") {
            Some(name.replace(".bwd.", ".fwd."))
        } else {
            None
        };
        let mut t = match &partner {
            Some(p) => m.params.get(p).unwrap().clone(),
            None => m.params.tensors()[i].clone(),
        };
        if name.starts_with("l2.") && name.ends_with("w_ih") || name == "proj.w" {
            t = swap_row_halves(&t, h);
        }
        swapped.params.tensors_mut()[i] = t;
    }
    let x = features::<f64>(3, 7, 8);
    let reversed_values: Vec<f64> = (0..7).rev().flat_map(|t| x.frame(t).to_vec()).collect();
    let xr = FeatureMatrix::from_frames(3, 7, reversed_values, FeatureKind::Mfcc, 0.01, "xr").unwrap();
    let a = m.forward(&x).unwrap();
    let b = swapped.forward(&xr).unwrap();
    for t in 0..7 {
        for (u, v) in a.frame(t).iter().zip(b.frame(6 - t)) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let m = model::<f64>(3, 4, 2, 5);
    let x = features::<f64>(3, 5, 6);
    let input = m.prepare_input(&x).unwrap();
    let target = TargetSequence::new(vec![0, 1], 2).unwrap();
    let (_, analytic) = utterance_gradients(&m, &input, &target, None).unwrap();
    let numeric = finite_difference(m.params.tensors(), 1e-5, |params| {
        let mut probe = m.clone();
        for (dst, src) in probe.params.tensors_mut().iter_mut().zip(params) {
            *dst = src.clone();
        }
        utterance_gradients(&probe, &input, &target, None).unwrap().0
    });
    let err = max_relative_error(&analytic, &numeric, 1e-4);
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("asr.tnsr");
    let mut m = model::<f32>(4, 5, 3, 9);
    m.stats.mean = vec![0.5, -0.25, 1.0, 0.0];
    m.stats.std = vec![2.0, 1.0, 0.5, 3.0];
    let mut meta = m.meta();
    meta.epoch = 4;
    meta.loss_history = vec![3.0, 2.0];
    m.save(&path, &meta).unwrap();
    let (loaded, loaded_meta) = AsrModel::<f32>::load(&path).unwrap();
    assert_eq!(loaded_meta, meta);
    assert_eq!(loaded, m);
    let x = features::<f32>(4, 11, 1);
    let a = m.forward(&x).unwrap();
    let b = loaded.forward(&x).unwrap();
    let bits = |c: &LikelihoodMatrix<f32>| c.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn corrupt_sidecar_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("asr.tnsr");
    let m = model::<f32>(4, 5, 3, 9);
    m.save(&path, &m.meta()).unwrap();
    std::fs::write(sidecar_path(&path), "{not json").unwrap();
    assert!(matches!(AsrModel::<f32>::load(&path), Err(crate::Error::Format(_))));
}

fn toy_examples(n: usize) -> Vec<AsrExample<f64>> {
    (0..n)
        .map(|i| {
            let t = 6 + i % 3;
            AsrExample {
                utterance_id: format!("u{i}"),
                features: features(3, t, i as u64),
                phonemes: vec!["p0".into(), if i % 2 == 0 { "p1" } else { "p2" }.into()],
            }
        })
        .collect()
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        batch_size: 2,
        epochs: 3,
        warmup_steps: 2,
        hidden_dim: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic() {
    let ex = toy_examples(6);
    let run = || {
        train_asr(&ex, &inventory(3), &FeatureConfig::default(), FeatureKind::Mfcc, &toy_config(), |_, _| Ok(()))
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.loss_history, b.loss_history);
    assert_eq!(a.model.params, b.model.params);
    assert_eq!(a.loss_history.len(), 3);
}

#[test]
fn training_errors() {
    let inv = inventory(3);
    let fc = FeatureConfig::default();
    let cfg = toy_config();
    let empty: Vec<AsrExample<f64>> = Vec::new();
    assert!(matches!(
        train_asr(&empty, &inv, &fc, FeatureKind::Mfcc, &cfg, |_, _| Ok(())),
        Err(crate::Error::Training(_))
    ));
    let mut short = toy_examples(2);
    for ex in &mut short {
        ex.features = features(3, 1, 0);
    }
    assert!(matches!(
        train_asr(&short, &inv, &fc, FeatureKind::Mfcc, &cfg, |_, _| Ok(())),
        Err(crate::Error::Training(_))
    ));
    let mut mixed = toy_examples(3);
    mixed[1].features = features(3, 1, 0);
    let out = train_asr(&mixed, &inv, &fc, FeatureKind::Mfcc, &cfg, |_, _| Ok(())).unwrap();
    assert_eq!(out.skipped, vec!["u1".to_string()]);
    let bad = TrainConfig { batch_size: 0, ..cfg };
    assert!(train_asr(&toy_examples(2), &inv, &fc, FeatureKind::Mfcc, &bad, |_, _| Ok(()))
        .unwrap_err()
        .is_config());
}

#[test]
fn epoch_callback_sees_every_epoch() {
    let mut seen = Vec::new();
    train_asr(
        &toy_examples(4),
        &inventory(3),
        &FeatureConfig::default(),
        FeatureKind::Mfcc,
        &toy_config(),
        |_, r| {
            seen.push(r.last().unwrap().epoch);
            assert_eq!(r.len(), r.last().unwrap().epoch);
            Ok(())
        },
    )
    .unwrap();
    assert_eq!(seen, vec![1, 2, 3]);
}

#[test]
fn restarts_keep_the_lowest_probe_loss() {
    let ex = toy_examples(6);
    let (inv, fc) = (inventory(3), FeatureConfig::default());
    let cfg = TrainConfig {
        epochs: 4,
        seed: 11,
        restarts: 3,
        restart_epochs: 2,
        ..toy_config()
    };
    let mut fired = Vec::new();
    let out = train_asr(&ex, &inv, &fc, FeatureKind::Mfcc, &cfg, |_, r| {
        fired.push(r.len());
        Ok(())
    })
    .unwrap();
    assert_eq!(fired, vec![2, 3, 4]);
    assert_eq!(out.loss_history.len(), 4);
    assert_eq!(cfg.total_epochs(), 8);

    // Oracle: probe every seed on its own and pick the smallest loss.
    let probe = |seed: u64| {
        let c = TrainConfig { epochs: 2, seed, restarts: 1, ..cfg.clone() };
        *train_asr(&ex, &inv, &fc, FeatureKind::Mfcc, &c, |_, _| Ok(())).unwrap().loss_history.last().unwrap()
    };
    let losses: Vec<f64> = (11..14).map(probe).collect();
    let best = (0..3).fold(0, |b, i| if losses[i] < losses[b] { i } else { b });
    assert_eq!(out.selected_seed, 11 + best as u64);

    // Continuing the winner is the same as training its seed alone.
    let alone = TrainConfig { seed: out.selected_seed, restarts: 1, ..cfg.clone() };
    let solo = train_asr(&ex, &inv, &fc, FeatureKind::Mfcc, &alone, |_, _| Ok(())).unwrap();
    assert_eq!(solo.loss_history, out.loss_history);
    assert_eq!(solo.model.params, out.model.params);
}

#[test]
fn restart_config_validated() {
    let bad = |c: TrainConfig| c.validate().unwrap_err().is_config();
    assert!(bad(TrainConfig { restarts: 0, ..toy_config() }));
    assert!(bad(TrainConfig { restarts: 2, restart_epochs: 0, ..toy_config() }));
    assert!(bad(TrainConfig { restarts: 2, restart_epochs: 4, ..toy_config() }));
    assert!(TrainConfig { restarts: 1, restart_epochs: 0, ..toy_config() }.validate().is_ok());
    assert_eq!(toy_config().total_epochs(), 3);
}
