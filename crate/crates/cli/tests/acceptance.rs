//! Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero if any fail.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use aligner_core::acoustic::{
    train_asr, utterance_gradients, AsrModel, LikelihoodMatrix, PhonemeInventory, TrainConfig,
};
use aligner_core::audio::{
    generate_synthetic_corpus, read_manifest, write_manifest, SyntheticCorpusSpec, UtteranceManifestEntry,
};
use aligner_core::autodiff::gradcheck::{check_case, finite_difference, max_relative_error, op_cases};
use aligner_core::autodiff::{concat, Tape, Tensor, Var};
use aligner_core::ctc::{
    ctc_loss, forced_viterbi, pda, pda_from_labels, read_alignments, write_alignments, AlignPolicy, AlignmentRecord,
    PdaOutcome, TargetSequence,
};
use aligner_core::features::{load_features, save_features, FeatureConfig, FeatureKind, FeatureMatrix};
use aligner_core::metrics::{error_rate, interior_boundary_errors, mcd, MCD_SCALE};
use aligner_core::pipeline::{align_corpus, extract_corpus_features, training_examples, AlignmentRun};
use aligner_core::tts::{
    fuse_embeddings, length_regulate, train_duration_model, DurationExample, DurationModel, DurationTrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// ---------------------------------------------------------------------------
// brute-force CTC oracles

fn ctc_collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

fn for_each_path(classes: usize, frames: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0; frames];
    for mut n in 0..classes.pow(frames as u32) {
        for slot in path.iter_mut() {
            *slot = n % classes;
            n /= classes;
        }
        f(&path);
    }
}

struct Instance {
    c: LikelihoodMatrix<f64>,
    x: TargetSequence,
}

fn random_probs(rng: &mut ChaCha8Rng, classes: usize, frames: usize) -> Vec<Vec<f64>> {
    (0..frames)
        .map(|_| {
            let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.02..1.0)).collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

/// T <= 6, P <= 3, |X| <= 3, always feasible.
fn ctc_instances(seed: u64, n: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let frames = rng.random_range(1..=6);
        let phonemes = rng.random_range(1..=3);
        let len = rng.random_range(1..=3);
        let ids: Vec<usize> = (0..len).map(|_| rng.random_range(0..phonemes)).collect();
        let x = TargetSequence::new(ids, phonemes).unwrap();
        if x.min_frames() > frames {
            continue;
        }
        let c = LikelihoodMatrix::from_probs(&random_probs(&mut rng, phonemes + 1, frames), 0.01).unwrap();
        out.push(Instance { c, x });
    }
    out
}

/// (sum, max) of path probabilities over every path that collapses to X.
fn enumerate(inst: &Instance) -> (f64, f64) {
    let blank = inst.c.blank_id();
    let mut total = 0.0;
    let mut best = f64::NEG_INFINITY;
    for_each_path(inst.c.classes(), inst.c.frames(), |p| {
        if ctc_collapse(p, blank) == inst.x.ids() {
            let lp: f64 = p.iter().enumerate().map(|(t, &k)| inst.c.log_prob(k, t)).sum();
            total += lp.exp();
            best = best.max(lp);
        }
    });
    (total, best)
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for inst in ctc_instances(101, 200) {
        let (total, _) = enumerate(&inst);
        let loss = ctc_loss(&inst.c, &inst.x).map_err(|e| e.to_string())?.loss;
        worst = worst.max((loss + total.ln()).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-9 && within(elapsed, 10.0),
        format!("200 instances, max |loss + ln sum| = {worst:.2e} (tol 1e-9), {elapsed:.2?} (limit 10 s)"),
    )
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for inst in ctc_instances(203, 20) {
        let out = ctc_loss(&inst.c, &inst.x).map_err(|e| e.to_string())?;
        for i in 0..inst.c.values().len() {
            let mut up = inst.c.clone();
            up.values_mut()[i] += h;
            let mut down = inst.c.clone();
            down.values_mut()[i] -= h;
            let fd = (ctc_loss(&up, &inst.x).unwrap().loss - ctc_loss(&down, &inst.x).unwrap().loss) / (2.0 * h);
            let rel = (fd - out.grad[i]).abs() / fd.abs().max(out.grad[i].abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }

    // through a tiny BiLSTM: N=3, hidden=4
    let mut worst_e2e: f64 = 0.0;
    for k in 0..3u64 {
        let phonemes = 2 + k as usize % 2;
        let symbols = (0..phonemes).map(|i| format!("p{i}")).collect();
        let inventory = PhonemeInventory::new(symbols).unwrap();
        let model =
            AsrModel::<f64>::new(inventory, FeatureConfig::default(), FeatureKind::Mfcc, 3, 4, 40 + k).unwrap();
        let frames = rng.random_range(4..=7);
        let values: Vec<f64> = (0..3 * frames).map(|_| rng.random_range(-1.0..1.0)).collect();
        let feats = FeatureMatrix::from_frames(3, frames, values, FeatureKind::Mfcc, 0.01, "u").unwrap();
        let input = model.prepare_input(&feats).unwrap();
        let ids: Vec<usize> = (0..2).map(|i| (i + k as usize) % phonemes).collect();
        let target = TargetSequence::new(ids, phonemes).unwrap();
        let (_, analytic) = utterance_gradients(&model, &input, &target, None).unwrap();
        let numeric = finite_difference(model.params.tensors(), 1e-5, |params| {
            let mut probe = model.clone();
            for (dst, src) in probe.params.tensors_mut().iter_mut().zip(params) {
                *dst = src.clone();
            }
            utterance_gradients(&probe, &input, &target, None).unwrap().0
        });
        worst_e2e = worst_e2e.max(max_relative_error(&analytic, &numeric, 1e-4));
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-6 && worst_e2e <= 1e-4 && within(elapsed, 60.0),
        format!(
            "log-prob inputs max rel err {worst:.2e} (tol 1e-6); BiLSTM N=3 H=4 max rel err {worst_e2e:.2e} (tol 1e-4); {elapsed:.2?} (limit 60 s)"
        ),
    )
}

fn ac3() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut bound_violations = 0;
    for inst in ctc_instances(101, 200) {
        let (_, best) = enumerate(&inst);
        let v = forced_viterbi(&inst.c, &inst.x).map_err(|e| e.to_string())?;
        worst = worst.max((v.log_prob - best).abs());
        let loss = ctc_loss(&inst.c, &inst.x).unwrap().loss;
        if v.log_prob.exp() > (-loss).exp() * (1.0 + 1e-12) {
            bound_violations += 1;
        }
    }
    check(
        worst <= 1e-9 && bound_violations == 0,
        format!("AC-1 set: max |viterbi - brute max| = {worst:.2e} (tol 1e-9); {bound_violations} exceed exp(-loss)"),
    )
}

// ---------------------------------------------------------------------------
// PDA reference: a single left-to-right pass written independently of the library

#[derive(Debug, PartialEq)]
enum Reference {
    Durations(Vec<usize>),
    Mismatch { collapsed: Vec<usize>, divergence: usize },
}

fn reference_pda(labels: &[usize], blank: usize, expected: &[usize]) -> Reference {
    let mut symbols: Vec<usize> = Vec::new();
    let mut lengths: Vec<usize> = Vec::new();
    let mut leading = 0;
    for &l in labels {
        match symbols.last() {
            None if l == blank => leading += 1,
            None => {
                symbols.push(l);
                lengths.push(leading + 1);
            }
            Some(&last) if l == blank || l == last => *lengths.last_mut().unwrap() += 1,
            Some(_) => {
                symbols.push(l);
                lengths.push(1);
            }
        }
    }
    if symbols == expected {
        return Reference::Durations(lengths);
    }
    let mut divergence = symbols.len().min(expected.len());
    for i in 0..divergence {
        if symbols[i] != expected[i] {
            divergence = i;
            break;
        }
    }
    Reference::Mismatch { collapsed: symbols, divergence }
}

fn reference_argmax(c: &LikelihoodMatrix<f64>) -> Vec<usize> {
    (0..c.frames())
        .map(|t| {
            let mut best = 0;
            for k in 1..c.classes() {
                if c.log_prob(k, t) > c.log_prob(best, t) {
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn as_reference(outcome: &PdaOutcome) -> Reference {
    match outcome {
        PdaOutcome::Match(d) => Reference::Durations(d.durations().to_vec()),
        PdaOutcome::Mismatch(m) => Reference::Mismatch {
            collapsed: m.collapsed.clone(),
            divergence: m.divergence,
        },
    }
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut disagreements = 0;
    let mut bad_tiling = 0;
    let mut matches = 0;
    for i in 0..500 {
        let phonemes = rng.random_range(1..=4);
        let blank = phonemes;
        let frames = rng.random_range(1..=25);
        let len = rng.random_range(1..=5);
        let x = TargetSequence::new((0..len).map(|_| rng.random_range(0..phonemes)).collect(), blank).unwrap();
        // half the sequences spell the target along a random path so both outcomes are exercised
        let labels: Vec<usize> = if i % 2 == 0 {
            (0..frames).map(|_| rng.random_range(0..=blank)).collect()
        } else {
            let mut path = Vec::new();
            for &id in x.ids() {
                for _ in 0..rng.random_range(0..3) {
                    path.push(blank);
                }
                for _ in 0..rng.random_range(1..4) {
                    path.push(id);
                }
            }
            path
        };
        let expected = reference_pda(&labels, blank, x.ids());
        let got = as_reference(&pda_from_labels(&labels, &x).map_err(|e| e.to_string())?);
        if got != expected {
            disagreements += 1;
        }
        // the same labels as the argmax of a likelihood matrix
        let probs: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                let mut col: Vec<f64> = (0..=blank).map(|_| rng.random_range(0.01..0.1)).collect();
                col[l] = 0.5;
                col
            })
            .collect();
        let c = LikelihoodMatrix::from_probs(&probs, 0.01).unwrap();
        let outcome = pda(&c, &x).map_err(|e| e.to_string())?;
        if as_reference(&outcome) != reference_pda(&reference_argmax(&c), blank, x.ids()) {
            disagreements += 1;
        }
        if let PdaOutcome::Match(d) = &outcome {
            matches += 1;
            if d.total_frames() != labels.len()
                || d.durations().iter().sum::<usize>() != labels.len()
                || d.len() != x.len()
            {
                bad_tiling += 1;
            }
        }
    }
    check(
        disagreements == 0 && bad_tiling == 0 && matches > 0,
        format!("500 sequences ({matches} matches): {disagreements} disagreements with reference, {bad_tiling} bad tilings"),
    )
}

// ---------------------------------------------------------------------------
// autodiff

type Builder = Box<dyn for<'t> Fn(&[Var<'t, f64>]) -> aligner_core::Result<Var<'t, f64>>>;

fn weighted_sum<'t>(v: Var<'t, f64>) -> aligner_core::Result<Var<'t, f64>> {
    let w = Tensor::from_fn(&v.shape(), |i| (1.3 * i as f64 + 0.2).cos() + 0.05);
    v.mul(v.tape_ref().constant(w)).map(|p| p.sum())
}

/// Ops under a random shape: (name, input shapes, builder).
fn random_shape_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Vec<Vec<usize>>, Builder)> {
    let mut d = || rng.random_range(1..=4usize);
    let (r, c, k, r2, c2) = (d(), d(), d(), d(), d());
    let len = rng.random_range(1..=c);
    let start = rng.random_range(0..=c - len);
    let idx: Vec<usize> = (0..k + 1).map(|i| (i * 7 + r2) % r).collect();
    vec![
        ("matmul", vec![vec![r, k], vec![k, c]], Box::new(|x| weighted_sum(x[0].matmul(x[1])?))),
        ("add", vec![vec![r, c], vec![r, c]], Box::new(|x| weighted_sum(x[0].add(x[1])?))),
        ("sub", vec![vec![r, c], vec![r, c]], Box::new(|x| weighted_sum(x[0].sub(x[1])?))),
        ("mul", vec![vec![r, c], vec![r, c]], Box::new(|x| weighted_sum(x[0].mul(x[1])?))),
        ("sigmoid", vec![vec![r, c]], Box::new(|x| weighted_sum(x[0].sigmoid()))),
        ("tanh", vec![vec![r, c]], Box::new(|x| weighted_sum(x[0].tanh()))),
        ("log_softmax", vec![vec![r, c]], Box::new(|x| weighted_sum(x[0].log_softmax(1)?))),
        ("transpose", vec![vec![r, c]], Box::new(|x| weighted_sum(x[0].transpose()?))),
        ("concat", vec![vec![r, c], vec![r2, c]], Box::new(|x| weighted_sum(concat(&[x[0], x[1]], 0)?))),
        ("concat_cols", vec![vec![r, c], vec![r, c2]], Box::new(|x| weighted_sum(concat(&[x[0], x[1]], 1)?))),
        (
            "slice",
            vec![vec![r, c]],
            Box::new(move |x| weighted_sum(x[0].slice(1, start, len)?)),
        ),
        (
            "embedding_lookup",
            vec![vec![r, c]],
            Box::new(move |x| weighted_sum(x[0].embedding_lookup(&idx)?)),
        ),
        ("repeat_rows", vec![vec![1, c]], Box::new(move |x| weighted_sum(x[0].repeat_rows(k)?))),
        ("mean", vec![vec![r, c]], Box::new(|x| Ok(x[0].mul(x[0])?.mean()))),
    ]
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let mag = rng.random_range(0.1..1.0);
        if rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    })
}

fn tiny_asr_corpus(dir: &Path, count: usize) -> (Vec<UtteranceManifestEntry>, Vec<FeatureMatrix<f32>>, SyntheticCorpusSpec) {
    let spec = SyntheticCorpusSpec {
        inventory_size: 3,
        utterance_count: count,
        duration_range: [4, 8],
        phonemes_per_utterance: [2, 4],
        seed: 5,
        ..Default::default()
    };
    let entries = generate_synthetic_corpus(&spec, dir).unwrap();
    let feats = extract_corpus_features::<f32>(&dir.join("manifest.jsonl"), &entries, &spec.features, FeatureKind::Mfcc)
        .unwrap()
        .into_iter()
        .map(Result::unwrap)
        .collect();
    (entries, feats, spec)
}

fn ac5() -> Outcome {
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut worst_name = "";
    let mut checks = 0;
    for case in op_cases() {
        for seed in 0..5 {
            let err = check_case(&case, seed, eps).map_err(|e| e.to_string())?;
            checks += 1;
            if err > worst {
                worst = err;
                worst_name = case.name;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..10 {
        for (name, shapes, build) in random_shape_cases(&mut rng) {
            let inputs: Vec<Tensor<f64>> = shapes.iter().map(|s| random_tensor(&mut rng, s)).collect();
            let tape = Tape::new();
            let vars: Vec<Var<'_, f64>> = inputs.iter().map(|t| tape.param(t.clone())).collect();
            let loss = build(&vars).map_err(|e| format!("{name}: {e}"))?;
            let grads = tape.backward(loss).map_err(|e| e.to_string())?;
            let analytic: Vec<Tensor<f64>> = vars.iter().map(|&v| grads.wrt(v)).collect();
            let numeric = finite_difference(&inputs, eps, |xs| {
                let tape = Tape::new();
                let vars: Vec<Var<'_, f64>> = xs.iter().map(|t| tape.constant(t.clone())).collect();
                build(&vars).unwrap().item()
            });
            let err = max_relative_error(&analytic, &numeric, 1e-3);
            checks += 1;
            if err > worst {
                worst = err;
                worst_name = name;
            }
        }
    }

    // seeded training twice
    let dir = tempfile::tempdir().unwrap();
    let (entries, feats, spec) = tiny_asr_corpus(dir.path(), 16);
    let examples = training_examples(&entries, feats.into_iter().map(Ok).collect());
    let inventory = PhonemeInventory::from_sequences(entries.iter().map(|e| e.phonemes.as_slice())).unwrap();
    let config = TrainConfig {
        epochs: 2,
        batch_size: 4,
        hidden_dim: 8,
        seed: 9,
        restarts: 2,
        restart_epochs: 1,
        ..Default::default()
    };
    let run = || {
        train_asr(&examples, &inventory, &spec.features, FeatureKind::Mfcc, &config, |_, _| Ok(())).unwrap()
    };
    let bits = |m: &AsrModel<f32>| -> Vec<u32> {
        m.params.tensors().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
    };
    let (a, b) = (run(), run());
    let asr_identical = bits(&a.model) == bits(&b.model) && a.loss_history == b.loss_history;

    let durations: Vec<DurationExample> = entries
        .iter()
        .map(|e| DurationExample {
            utterance_id: e.utterance_id.clone(),
            phonemes: e.phonemes.clone(),
            styles: vec!["_".into(); e.phonemes.len()],
            durations: e.reference_durations.clone().unwrap(),
        })
        .collect();
    let dcfg = DurationTrainConfig {
        epochs: 3,
        seed: 9,
        ..Default::default()
    };
    let d1 = train_duration_model::<f32>(&durations, &dcfg).unwrap();
    let d2 = train_duration_model::<f32>(&durations, &dcfg).unwrap();
    let dbits = |m: &DurationModel<f32>| -> Vec<u32> {
        m.params.tensors().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
    };
    let duration_identical = dbits(&d1.model) == dbits(&d2.model);

    check(
        worst <= 1e-4 && asr_identical && duration_identical,
        format!(
            "{checks} op checks, worst rel err {worst:.2e} ({worst_name}, tol 1e-4, eps 1e-5); seeded reruns bit-identical: asr {asr_identical}, duration {duration_identical}"
        ),
    )
}

// ---------------------------------------------------------------------------
// end-to-end alignment on the synthetic corpus

struct Corpus {
    _dir: tempfile::TempDir,
    manifest: PathBuf,
    entries: Vec<UtteranceManifestEntry>,
    spec: SyntheticCorpusSpec,
    setup: Duration,
}

fn corpus() -> Corpus {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticCorpusSpec {
        inventory_size: 5,
        utterance_count: 250,
        duration_range: [5, 20],
        phonemes_per_utterance: [3, 8],
        noise_level: 0.01,
        duration_jitter: Some(2),
        seed: 2024,
        ..Default::default()
    };
    let entries = generate_synthetic_corpus(&spec, dir.path()).unwrap();
    Corpus {
        manifest: dir.path().join("manifest.jsonl"),
        _dir: dir,
        entries,
        spec,
        setup: start.elapsed(),
    }
}

const TRAIN: usize = 200;

struct EndToEnd {
    model: AsrModel<f32>,
    test_run: AlignmentRun,
    within_2: f64,
    mismatch_rate: f64,
    /// Epochs computed, discarded candidates included.
    epochs: usize,
    selected_seed: u64,
    elapsed: Duration,
}

fn end_to_end(corpus: &Corpus, kind: FeatureKind) -> EndToEnd {
    let start = Instant::now();
    let feats =
        extract_corpus_features::<f32>(&corpus.manifest, &corpus.entries, &corpus.spec.features, kind).unwrap();
    let mut train_feats = feats;
    let test_feats = train_feats.split_off(TRAIN);
    let (train_entries, test_entries) = corpus.entries.split_at(TRAIN);
    let examples = training_examples(train_entries, train_feats);
    let inventory = PhonemeInventory::from_sequences(corpus.entries.iter().map(|e| e.phonemes.as_slice())).unwrap();
    let config = TrainConfig {
        epochs: 20,
        batch_size: 8,
        hidden_dim: 64,
        peak_lr: 3e-3,
        warmup_steps: 50,
        seed: 1,
        restarts: 3,
        restart_epochs: 3,
        ..Default::default()
    };
    let outcome = train_asr(&examples, &inventory, &corpus.spec.features, kind, &config, |_, _| Ok(())).unwrap();
    let test_run = align_corpus(&outcome.model, test_entries, &test_feats, AlignPolicy::PdaThenViterbi);

    // unaligned test utterances count as misses
    let by_id: HashMap<&str, &AlignmentRecord> =
        test_run.records.iter().map(|r| (r.utterance_id.as_str(), r)).collect();
    let mut total = 0;
    let mut hits = 0;
    for e in test_entries {
        let truth = e.reference_durations.as_ref().unwrap();
        total += truth.len() - 1;
        if let Some(rec) = by_id.get(e.utterance_id.as_str()) {
            hits += interior_boundary_errors(&rec.durations, truth).iter().filter(|&&d| d <= 2).count();
        }
    }
    EndToEnd {
        model: outcome.model,
        within_2: 100.0 * hits as f64 / total as f64,
        mismatch_rate: test_run.summary.mismatch_rate,
        test_run,
        epochs: config.total_epochs(),
        selected_seed: outcome.selected_seed,
        elapsed: start.elapsed() + corpus.setup,
    }
}

fn ac6(e2e: &EndToEnd) -> Outcome {
    check(
        e2e.within_2 >= 90.0 && e2e.mismatch_rate <= 0.10 && e2e.epochs <= 30 && within(e2e.elapsed, 900.0),
        format!(
            "melspec, {} epochs incl. restarts (kept seed {}): {:.1}% of test boundaries within +-2 frames (need >= 90), PDA mismatch rate {:.1}% (need <= 10), {} Viterbi fallbacks, {:.1?} (limit 15 min)",
            e2e.epochs,
            e2e.selected_seed,
            e2e.within_2,
            100.0 * e2e.mismatch_rate,
            e2e.test_run.summary.viterbi_fallbacks,
            e2e.elapsed
        ),
    )
}

fn ac7(mel: &EndToEnd, mfcc: &EndToEnd) -> Outcome {
    let gap = mel.within_2 - mfcc.within_2;
    let ordering = if gap >= 0.0 { "melspec >= mfcc" } else { "mfcc > melspec (non-binding)" };
    check(
        gap.abs() <= 15.0,
        format!(
            "mfcc {:.1}% vs melspec {:.1}% within +-2, gap {:.1} pp (limit 15); {ordering}; mfcc mismatch rate {:.1}%",
            mfcc.within_2,
            mel.within_2,
            gap.abs(),
            100.0 * mfcc.mismatch_rate
        ),
    )
}

fn ac8(corpus: &Corpus, mel: &EndToEnd) -> Outcome {
    let feats = extract_corpus_features::<f32>(
        &corpus.manifest,
        &corpus.entries,
        &corpus.spec.features,
        FeatureKind::Melspec,
    )
    .unwrap();
    let run = align_corpus(&mel.model, &corpus.entries, &feats, AlignPolicy::PdaThenViterbi);
    let examples: Vec<DurationExample> =
        run.records.iter().map(|r| DurationExample::from_record(r).unwrap()).collect();
    let outcome = train_duration_model::<f32>(&examples, &DurationTrainConfig::default()).map_err(|e| e.to_string())?;
    let mae = outcome.report.heldout_mae_frames.ok_or("no held-out split")?;

    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut short = 0;
    let mut phonemes = 0;
    for rec in &run.records {
        let predicted = outcome.model.predict(&rec.phonemes, None).unwrap();
        let (x, s) = outcome.model.encode(&rec.phonemes, None).unwrap();
        let e = fuse_embeddings(&outcome.model, &x, &s).unwrap();
        let regulated = length_regulate(&e, &predicted).unwrap();
        phonemes += predicted.len();
        short += predicted.iter().filter(|&&d| d < 1).count();
        if regulated.shape()[0] != predicted.iter().sum::<usize>() {
            short += 1;
        }
    }
    // random phoneme strings, including ones never seen together
    let symbols = outcome.model.inventory.symbols().to_vec();
    for _ in 0..200 {
        let len = rng.random_range(1..=12);
        let seq: Vec<String> = (0..len).map(|_| symbols[rng.random_range(0..symbols.len())].clone()).collect();
        let predicted = outcome.model.predict(&seq, None).unwrap();
        phonemes += predicted.len();
        short += predicted.iter().filter(|&&d| d < 1).count();
    }
    check(
        mae <= 3.0 && short == 0,
        format!(
            "held-out MAE {mae:.2} frames over {} utterances (limit 3); {short} of {phonemes} predicted phonemes below 1 frame",
            outcome.report.heldout_utterances.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// metrics

fn edit_oracle(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if let Some(&v) = memo.get(&(a.len(), b.len())) {
        return v;
    }
    let v = if a[0] == b[0] {
        edit_oracle(&a[1..], &b[1..], memo)
    } else {
        1 + edit_oracle(&a[1..], b, memo)
            .min(edit_oracle(a, &b[1..], memo))
            .min(edit_oracle(&a[1..], &b[1..], memo))
    };
    memo.insert((a.len(), b.len()), v);
    v
}

fn all_strings(max_len: usize, alphabet: u8) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in 0..alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn ac9() -> Outcome {
    let strings = all_strings(5, 3);
    let mut pairs = 0;
    let mut wrong = 0;
    for r in &strings {
        for h in &strings {
            pairs += 1;
            let got = error_rate(r, h);
            if r.is_empty() {
                wrong += usize::from(got.is_ok());
                continue;
            }
            let Ok(rep) = got else {
                wrong += 1;
                continue;
            };
            let d = edit_oracle(r, h, &mut HashMap::new());
            let consistent = rep.errors() == d
                && rep.reference_length == r.len()
                && r.len() + rep.insertions - rep.deletions == h.len()
                && (rep.rate - d as f64 / r.len() as f64).abs() < 1e-15;
            wrong += usize::from(!consistent);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let values: Vec<f64> = (0..13 * 20).map(|_| rng.random_range(-5.0..5.0)).collect();
    let m = FeatureMatrix::from_frames(13, 20, values, FeatureKind::Mfcc, 0.01, "a").unwrap();
    let zero = mcd(&m, &m, false).unwrap().abs() + mcd(&m, &m, true).unwrap().abs();
    let a = FeatureMatrix::from_frames(2, 1, vec![0.3, 1.0], FeatureKind::Mfcc, 0.01, "a").unwrap();
    let b = FeatureMatrix::from_frames(2, 1, vec![-4.0, 0.0], FeatureKind::Mfcc, 0.01, "b").unwrap();
    let single = mcd(&a, &b, false).unwrap();
    let expected = 10.0 / std::f64::consts::LN_10 * 2f64.sqrt();
    let single_err = (single - expected).abs();
    check(
        wrong == 0 && zero == 0.0 && single_err <= 1e-9 && (MCD_SCALE - expected).abs() < 1e-15,
        format!(
            "{pairs} pairs (len <= 5, 3 symbols): {wrong} disagree with oracle; mcd(x, x) = {zero}; single coefficient {single:.12} vs {expected:.12} (|d| {single_err:.1e})"
        ),
    )
}

// ---------------------------------------------------------------------------
// formats and the CLI contract

fn aligner(ws: &Path, args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_aligner"))
        .env("ALIGNER_WORKSPACE", ws)
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .expect("spawn aligner");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn ac10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (entries, feats, _) = tiny_asr_corpus(&root.join("corpus"), 8);
    let mut failures: Vec<String> = Vec::new();

    // feature files, both precisions
    for f in &feats {
        let p = root.join(format!("{}.feat", f.source_id));
        save_features(f, &p).unwrap();
        let back: FeatureMatrix<f32> = load_features(&p).unwrap();
        let same = back.values().iter().map(|v| v.to_bits()).eq(f.values().iter().map(|v| v.to_bits()))
            && back.kind == f.kind
            && back.frame_hop_seconds == f.frame_hop_seconds;
        let f64m = f.cast::<f64>();
        save_features(&f64m, &p).unwrap();
        let back64: FeatureMatrix<f64> = load_features(&p).unwrap();
        if !same || back64 != f64m {
            failures.push(format!("feature file {}", f.source_id));
        }
    }

    // checkpoints
    let inventory = PhonemeInventory::from_sequences(entries.iter().map(|e| e.phonemes.as_slice())).unwrap();
    let asr = AsrModel::<f32>::new(inventory, FeatureConfig::default(), FeatureKind::Mfcc, feats[0].dim(), 6, 3).unwrap();
    let ckpt = root.join("asr.tnsr");
    asr.save(&ckpt, &asr.meta()).unwrap();
    let (asr_back, meta_back) = AsrModel::<f32>::load(&ckpt).unwrap();
    let bytes = fs::read(&ckpt).unwrap();
    asr_back.save(&ckpt, &meta_back).unwrap();
    if asr_back != asr || meta_back != asr.meta() || fs::read(&ckpt).unwrap() != bytes {
        failures.push("asr checkpoint".into());
    }
    let durations: Vec<DurationExample> = entries
        .iter()
        .map(|e| DurationExample {
            utterance_id: e.utterance_id.clone(),
            phonemes: e.phonemes.clone(),
            styles: vec!["_".into(); e.phonemes.len()],
            durations: e.reference_durations.clone().unwrap(),
        })
        .collect();
    let dm = train_duration_model::<f32>(&durations, &DurationTrainConfig { epochs: 1, ..Default::default() })
        .unwrap()
        .model;
    let dpath = root.join("duration.tnsr");
    dm.save(&dpath, &dm.meta()).unwrap();
    let (dm_back, _) = DurationModel::<f32>::load(&dpath).unwrap();
    if dm_back != dm {
        failures.push("duration checkpoint".into());
    }

    // manifests
    let mpath = root.join("copy.jsonl");
    write_manifest(&mpath, &entries).unwrap();
    let mbytes = fs::read(&mpath).unwrap();
    let mback = read_manifest(&mpath).unwrap();
    write_manifest(&mpath, &mback).unwrap();
    if mback != entries || fs::read(&mpath).unwrap() != mbytes {
        failures.push("manifest".into());
    }

    // alignments
    let records: Vec<AlignmentRecord> = entries
        .iter()
        .map(|e| AlignmentRecord {
            utterance_id: e.utterance_id.clone(),
            method: aligner_core::ctc::AlignMethod::ForcedViterbi,
            frame_hop_seconds: 0.0125,
            phonemes: e.phonemes.clone(),
            styles: None,
            durations: e.reference_durations.clone().unwrap(),
        })
        .collect();
    let apath = root.join("alignments.jsonl");
    write_alignments(&apath, &records).unwrap();
    let abytes = fs::read(&apath).unwrap();
    let aback = read_alignments(&apath).unwrap();
    write_alignments(&apath, &aback).unwrap();
    if aback != records || fs::read(&apath).unwrap() != abytes {
        failures.push("alignments".into());
    }

    // exit codes
    let ws = root.join("ws");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let manifest = s(&root.join("corpus/manifest.jsonl"));
    let spec_ok = root.join("spec.toml");
    fs::write(&spec_ok, "inventory_size = 3\nutterance_count = 4\nduration_range = [4, 6]\nphonemes_per_utterance = [2, 3]\n").unwrap();
    let spec_bad = root.join("bad.toml");
    fs::write(&spec_bad, "duration_range = [0, 6]\n").unwrap();
    let bad_config = root.join("pipeline.toml");
    fs::write(&bad_config, "[asr]\nlearning_rate = 1.0\n").unwrap();
    let refs = root.join("ref.tsv");
    let hyps = root.join("hyp.tsv");
    fs::write(&refs, "a\tx y\nb\tx\n").unwrap();
    fs::write(&hyps, "a\tx y\nc\tx\n").unwrap();
    let broken = root.join("broken");
    fs::create_dir_all(broken.join("wav")).unwrap();
    fs::copy(root.join("corpus/manifest.jsonl"), broken.join("manifest.jsonl")).unwrap();
    let empty = root.join("empty");
    fs::create_dir_all(&empty).unwrap();
    let early = root.join("early.tnsr");
    let feats_dir = s(&ws.join("features/mfcc"));

    let cases: Vec<(&str, Vec<String>, i32)> = vec![
        ("synth ok", vec!["synth".into(), "--spec".into(), s(&spec_ok), "--out".into(), s(&root.join("c2"))], 0),
        ("synth invalid spec", vec!["synth".into(), "--spec".into(), s(&spec_bad), "--out".into(), s(&root.join("c3"))], 2),
        ("unknown config key", vec!["--config".into(), s(&bad_config), "eval".into()], 2),
        ("features latent", vec!["features".into(), "--manifest".into(), manifest.clone(), "--kind".into(), "latent".into()], 2),
        ("features missing audio", vec!["features".into(), "--manifest".into(), s(&broken.join("manifest.jsonl"))], 1),
        ("features ok", vec!["features".into(), "--manifest".into(), manifest.clone(), "--kind".into(), "mfcc".into()], 0),
        ("train-asr missing manifest", vec!["train-asr".into(), "--manifest".into(), s(&root.join("none.jsonl"))], 1),
        (
            "train-asr one epoch",
            vec!["train-asr".into(), "--manifest".into(), manifest.clone(), "--kind".into(), "mfcc".into(),
                 "--features-dir".into(), feats_dir.clone(), "--epochs".into(), "1".into(), "--hidden".into(), "6".into(),
                 "--out".into(), s(&early)],
            0,
        ),
        (
            "align pda_only under-trained",
            vec!["align".into(), "--manifest".into(), manifest.clone(), "--checkpoint".into(), s(&early),
                 "--policy".into(), "pda_only".into(), "--features-dir".into(), feats_dir.clone()],
            0,
        ),
        (
            "align every utterance failing",
            vec!["align".into(), "--manifest".into(), manifest.clone(), "--checkpoint".into(), s(&early),
                 "--features-dir".into(), s(&empty)],
            1,
        ),
        ("align unknown policy", vec!["align".into(), "--policy".into(), "best".into()], 2),
        ("train-duration missing alignments", vec!["train-duration".into(), "--alignments".into(), s(&root.join("none.jsonl"))], 1),
        ("eval without inputs", vec!["eval".into()], 2),
        ("eval mismatched ids", vec!["eval".into(), "--ref-transcripts".into(), s(&refs), "--hyp-transcripts".into(), s(&hyps)], 1),
    ];
    let mut rate = 0.0;
    for (name, args, expected) in &cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (got, stdout) = aligner(&ws, &args);
        if got != *expected {
            failures.push(format!("{name}: exit {got}, expected {expected}"));
        }
        if name.contains("pda_only") {
            let summary: serde_json::Value = serde_json::from_slice(&stdout).unwrap_or_default();
            rate = summary["mismatch_rate"].as_f64().unwrap_or(0.0);
        }
    }
    if rate <= 0.0 {
        failures.push("under-trained pda_only run reported no mismatches".into());
    }

    check(
        failures.is_empty(),
        format!(
            "features/checkpoints/manifests/alignments round-trip; {} CLI exit-code paths; under-trained pda_only mismatch rate {:.0}%{}",
            cases.len(),
            100.0 * rate,
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default()
        )),
    }
}

fn report(id: &str, outcome: &Outcome) {
    match outcome {
        Ok(d) => println!("{id} PASS  {d}"),
        Err(d) => println!("{id} FAIL  {d}"),
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters: this target has a single logical test.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut all_ok = true;
    let mut record = |id: &str, outcome: Outcome| {
        all_ok &= outcome.is_ok();
        report(id, &outcome);
    };
    record("AC-1", guarded(ac1));
    record("AC-2", guarded(ac2));
    record("AC-3", guarded(ac3));
    record("AC-4", guarded(ac4));
    record("AC-5", guarded(ac5));

    let corpus = catch_unwind(corpus).ok();
    let mel = corpus
        .as_ref()
        .and_then(|c| catch_unwind(AssertUnwindSafe(|| end_to_end(c, FeatureKind::Melspec))).ok());
    let mfcc = corpus
        .as_ref()
        .and_then(|c| catch_unwind(AssertUnwindSafe(|| end_to_end(c, FeatureKind::Mfcc))).ok());
    record("AC-6", mel.as_ref().map_or(Err("melspec pipeline panicked".into()), |m| guarded(|| ac6(m))));
    record(
        "AC-7",
        match (&mel, &mfcc) {
            (Some(a), Some(b)) => guarded(|| ac7(a, b)),
            _ => Err("an end-to-end pipeline panicked".into()),
        },
    );
    record(
        "AC-8",
        match (&corpus, &mel) {
            (Some(c), Some(m)) => guarded(|| ac8(c, m)),
            _ => Err("AC-6 model unavailable".into()),
        },
    );
    record("AC-9", guarded(ac9));
    record("AC-10", guarded(ac10));

    if all_ok {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria failed");
        ExitCode::FAILURE
    }
}
