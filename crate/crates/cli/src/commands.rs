use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use aligner_core::acoustic::{train_asr as fit_asr, AsrModel, PhonemeInventory};
use aligner_core::audio::{generate_synthetic_corpus, read_manifest, SyntheticCorpusSpec, UtteranceManifestEntry};
use aligner_core::ctc::{read_alignments, write_alignment_tsv, write_alignments};
use aligner_core::features::{load_features, save_features, FeatureKind, FeatureMatrix};
use aligner_core::metrics::{
    boundary_accuracy, mcd, read_transcripts, transcript_error_rates, write_eval_tsv, ErrorRateReport, EvalReport,
    UtteranceEval,
};
use aligner_core::pipeline::{align_corpus, extract_corpus_features, load_feature_dir, training_examples};
use aligner_core::tts::{train_duration_model as fit_duration, DurationExample};
use log::{error, info};
use serde::Serialize;

use crate::config::load_document;
use crate::error::{CliError, CliResult};
use crate::workspace::RunManifest;
use crate::{AlignArgs, Context, EvalArgs, FeaturesArgs, SynthArgs, TrainAsrArgs, TrainDurationArgs};

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(aligner_core::Error::from)?;
    println!("{text}");
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(aligner_core::Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn manifest_path(ctx: &Context, flag: Option<PathBuf>) -> CliResult<PathBuf> {
    flag.or_else(|| ctx.config.paths.corpus_dir.as_ref().map(|d| d.join("manifest.jsonl")))
        .ok_or_else(|| CliError::Config("no --manifest given and no [paths] corpus_dir configured".into()))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CorpusStats {
    manifest: PathBuf,
    utterances: usize,
    phonemes: usize,
    frames: usize,
    mean_phoneme_frames: f64,
    inventory: Vec<String>,
}

pub fn synth(ctx: Context, args: SynthArgs) -> CliResult<()> {
    let mut spec: SyntheticCorpusSpec = load_document(&args.spec)?;
    if let Some(seed) = ctx.config.seed {
        spec.seed = seed;
    }
    let mut run = RunManifest::new("synth", &ctx.config);
    run.input(&args.spec)?;
    let entries = generate_synthetic_corpus(&spec, &args.out)?;
    let manifest = args.out.join("manifest.jsonl");
    let durations: Vec<usize> = entries
        .iter()
        .flat_map(|e| e.reference_durations.iter().flatten().copied())
        .collect();
    let frames: usize = durations.iter().sum();
    let inventory: BTreeSet<&String> = entries.iter().flat_map(|e| &e.phonemes).collect();
    let stats = CorpusStats {
        manifest: manifest.clone(),
        utterances: entries.len(),
        phonemes: durations.len(),
        frames,
        mean_phoneme_frames: frames as f64 / durations.len().max(1) as f64,
        inventory: inventory.into_iter().cloned().collect(),
    };
    run.output(&manifest);
    ctx.workspace.record_run(&run)?;
    print_json(&stats)
}

fn failure_list(failed: &[(String, String)]) -> String {
    failed
        .iter()
        .map(|(id, e)| format!("{id} ({e})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn features(ctx: Context, args: FeaturesArgs) -> CliResult<()> {
    let kind = args.kind.unwrap_or(ctx.config.feature_kind);
    if kind == FeatureKind::Latent {
        return Err(CliError::Config(
            "latent features are load-only; supply them with --features-dir instead".into(),
        ));
    }
    let manifest = manifest_path(&ctx, args.manifest)?;
    let out = match args.out {
        Some(dir) => dir,
        None => ctx.workspace.features(kind.name())?,
    };
    fs::create_dir_all(&out)?;
    let mut run = RunManifest::new("features", &ctx.config);
    run.input(&manifest)?;
    let entries = read_manifest(&manifest)?;
    let feats = extract_corpus_features::<f32>(&manifest, &entries, &ctx.config.features, kind)?;
    let mut failed = Vec::new();
    let mut written = 0;
    for (entry, feat) in entries.iter().zip(feats) {
        match feat {
            Ok(m) => {
                save_features(&m, out.join(format!("{}.feat", entry.utterance_id)))?;
                written += 1;
            }
            Err(e) => {
                error!("{}: {e}", entry.utterance_id);
                failed.push((entry.utterance_id.clone(), e.to_string()));
            }
        }
    }
    run.output(&out);
    ctx.workspace.record_run(&run)?;
    if !failed.is_empty() {
        return Err(CliError::Stage(format!(
            "{} of {} utterances failed: {}",
            failed.len(),
            entries.len(),
            failure_list(&failed)
        )));
    }
    print_json(&serde_json::json!({ "out": out, "kind": kind.name(), "files": written }))
}

/// Features for `entries`, either loaded from `dir` or extracted from audio.
fn corpus_features(
    manifest: &Path,
    entries: &[UtteranceManifestEntry],
    dir: Option<&Path>,
    config: &aligner_core::features::FeatureConfig,
    kind: FeatureKind,
) -> CliResult<Vec<aligner_core::Result<FeatureMatrix<f32>>>> {
    match dir {
        Some(dir) => {
            let mut feats = load_feature_dir::<f32>(dir, entries);
            if kind == FeatureKind::Latent {
                for m in feats.iter_mut().flatten() {
                    m.kind = FeatureKind::Latent;
                }
            }
            for m in feats.iter().flatten() {
                if m.kind != kind {
                    return Err(CliError::Config(format!(
                        "{} holds {} features but {} were requested",
                        dir.display(),
                        m.kind.name(),
                        kind.name()
                    )));
                }
            }
            Ok(feats)
        }
        None if kind == FeatureKind::Latent => Err(CliError::Config(
            "latent features cannot be extracted from audio; pass --features-dir".into(),
        )),
        None => Ok(extract_corpus_features(manifest, entries, config, kind)?),
    }
}

fn write_loss_tsv(path: &Path, rows: &[(usize, f64, f64, u64)]) -> CliResult<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "epoch\tmean_loss\tlearning_rate\tsteps")?;
    for (epoch, loss, lr, steps) in rows {
        writeln!(w, "{epoch}\t{loss}\t{lr}\t{steps}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn train_asr(mut ctx: Context, args: TrainAsrArgs) -> CliResult<()> {
    let asr = &mut ctx.config.asr;
    asr.epochs = args.epochs.unwrap_or(asr.epochs);
    asr.hidden_dim = args.hidden.unwrap_or(asr.hidden_dim);
    asr.batch_size = args.batch_size.unwrap_or(asr.batch_size);
    asr.peak_lr = args.lr.unwrap_or(asr.peak_lr);
    asr.validate()?;
    let kind = args.kind.unwrap_or(ctx.config.feature_kind);
    ctx.config.feature_kind = kind;

    let manifest = manifest_path(&ctx, args.manifest)?;
    let out = match args.out {
        Some(p) => p,
        None => ctx.workspace.checkpoints()?.join("asr.tnsr"),
    };
    ensure_parent(&out)?;
    let loss_tsv = ctx.workspace.reports()?.join("asr-loss.tsv");
    let mut run = RunManifest::new("train-asr", &ctx.config);
    run.input(&manifest)?;
    if let Some(dir) = &args.features_dir {
        run.input(dir)?;
    }

    let entries = read_manifest(&manifest)?;
    let feats = corpus_features(
        &manifest,
        &entries,
        args.features_dir.as_deref(),
        &ctx.config.features,
        kind,
    )?;
    let examples = training_examples(&entries, feats);
    let inventory = PhonemeInventory::from_sequences(entries.iter().map(|e| e.phonemes.as_slice()))?;
    let train_config = ctx.config.asr.clone();
    let mut rows = Vec::new();
    let outcome = fit_asr(
        &examples,
        &inventory,
        &ctx.config.features,
        kind,
        &train_config,
        |model, reports| {
            let report = reports.last().expect("at least one epoch");
            info!("epoch {} loss {:.4}", report.epoch, report.mean_loss);
            rows = reports
                .iter()
                .map(|r| (r.epoch, r.mean_loss, r.learning_rate, r.steps))
                .collect();
            let mut meta = model.meta();
            meta.train_config = Some(train_config.clone());
            meta.epoch = report.epoch;
            meta.loss_history = reports.iter().map(|r| r.mean_loss).collect();
            model.save(&out, &meta)
        },
    )?;
    write_loss_tsv(&loss_tsv, &rows)?;
    run.output(&out);
    run.output(&loss_tsv);
    ctx.workspace.record_run(&run)?;
    print_json(&serde_json::json!({
        "checkpoint": out,
        "epochs": outcome.loss_history.len(),
        "final_loss": outcome.loss_history.last(),
        "selected_seed": outcome.selected_seed,
        "skipped": outcome.skipped,
    }))
}

pub fn align(ctx: Context, args: AlignArgs) -> CliResult<()> {
    let policy = args.policy.unwrap_or(ctx.config.align.policy);
    let manifest = manifest_path(&ctx, args.manifest)?;
    let checkpoint = match args.checkpoint {
        Some(p) => p,
        None => ctx.workspace.root().join("checkpoints/asr.tnsr"),
    };
    let out = match args.out {
        Some(p) => p,
        None => ctx.workspace.alignments()?.join("alignments.jsonl"),
    };
    ensure_parent(&out)?;
    let tsv = out.with_extension("tsv");
    let summary_path = ctx.workspace.reports()?.join("align-summary.json");
    let mut run = RunManifest::new("align", &ctx.config);
    run.input(&manifest)?;
    run.input(&checkpoint)?;
    if let Some(dir) = &args.features_dir {
        run.input(dir)?;
    }

    let (model, _) = AsrModel::<f32>::load(&checkpoint)?;
    let entries = read_manifest(&manifest)?;
    let feats = corpus_features(
        &manifest,
        &entries,
        args.features_dir.as_deref(),
        &model.feature_config,
        model.feature_kind,
    )?;
    let result = align_corpus(&model, &entries, &feats, policy);
    write_alignments(&out, &result.records)?;
    write_alignment_tsv(&tsv, &result.records)?;
    write_json(&summary_path, &result.summary)?;
    run.output(&out);
    run.output(&tsv);
    run.output(&summary_path);
    ctx.workspace.record_run(&run)?;
    let s = &result.summary;
    if s.utterances > 0 && s.failures.len() == s.utterances {
        return Err(CliError::Stage(format!(
            "every utterance failed to align, e.g. {}: {}",
            s.failures[0].utterance_id, s.failures[0].reason
        )));
    }
    print_json(s)
}

pub fn train_duration(mut ctx: Context, args: TrainDurationArgs) -> CliResult<()> {
    let dur = &mut ctx.config.duration;
    dur.epochs = args.epochs.unwrap_or(dur.epochs);
    dur.validate()?;
    let alignments = match args.alignments {
        Some(p) => p,
        None => ctx.workspace.root().join("alignments/alignments.jsonl"),
    };
    let out = match args.out {
        Some(p) => p,
        None => ctx.workspace.checkpoints()?.join("duration.tnsr"),
    };
    ensure_parent(&out)?;
    let report_path = ctx.workspace.reports()?.join("duration-report.json");
    let mut run = RunManifest::new("train-duration", &ctx.config);
    run.input(&alignments)?;

    let mut records = read_alignments(&alignments)?;
    if let Some(manifest) = &args.manifest {
        run.input(manifest)?;
        let styles: HashMap<String, Vec<String>> = read_manifest(manifest)?
            .into_iter()
            .filter_map(|e| e.styles.map(|s| (e.utterance_id, s)))
            .collect();
        for rec in records.iter_mut().filter(|r| r.styles.is_none()) {
            rec.styles = styles.get(&rec.utterance_id).cloned();
        }
    }
    let examples = records
        .iter()
        .map(DurationExample::from_record)
        .collect::<aligner_core::Result<Vec<_>>>()?;
    let outcome = fit_duration::<f32>(&examples, &ctx.config.duration)?;
    let mut meta = outcome.model.meta();
    meta.train_config = Some(ctx.config.duration.clone());
    meta.report = Some(outcome.report.clone());
    outcome.model.save(&out, &meta)?;
    write_json(&report_path, &outcome.report)?;
    run.output(&out);
    run.output(&report_path);
    ctx.workspace.record_run(&run)?;
    print_json(&outcome.report)
}

fn feature_ids(dir: &Path) -> CliResult<BTreeSet<String>> {
    let mut ids = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::Stage(format!("cannot list {}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.extension().is_some_and(|x| x == "feat") {
            if let Some(stem) = path.file_stem() {
                ids.insert(stem.to_string_lossy().into_owned());
            }
        }
    }
    Ok(ids)
}

fn row<'a>(rows: &'a mut BTreeMap<String, UtteranceEval>, id: &str) -> &'a mut UtteranceEval {
    rows.entry(id.to_string()).or_insert_with(|| UtteranceEval {
        utterance_id: id.to_string(),
        ..Default::default()
    })
}

pub fn eval(ctx: Context, args: EvalArgs) -> CliResult<()> {
    let has_boundary = args.alignments.is_some();
    let has_transcripts = args.ref_transcripts.is_some();
    let has_features = args.ref_features.is_some();
    if !(has_boundary || has_transcripts || has_features) {
        return Err(CliError::Config(
            "nothing to evaluate: pass --alignments, --ref-transcripts/--hyp-transcripts or --ref-features/--hyp-features"
                .into(),
        ));
    }
    if has_boundary != args.manifest.is_some() {
        return Err(CliError::Config("--alignments and --manifest must be given together".into()));
    }
    let reports = ctx.workspace.reports()?;
    let mut run = RunManifest::new("eval", &ctx.config);
    let mut report = EvalReport::default();
    let mut rows: BTreeMap<String, UtteranceEval> = BTreeMap::new();

    if let (Some(alignments), Some(manifest)) = (&args.alignments, &args.manifest) {
        run.input(alignments)?;
        run.input(manifest)?;
        let boundary = boundary_accuracy(&read_alignments(alignments)?, &read_manifest(manifest)?)?;
        for u in &boundary.utterances {
            let r = row(&mut rows, &u.utterance_id);
            if !u.errors.is_empty() {
                r.boundary_mean_error = Some(u.errors.iter().sum::<usize>() as f64 / u.errors.len() as f64);
            }
            r.boundary_max_error = u.errors.iter().max().copied();
        }
        report.boundary = Some(boundary);
    }

    if let (Some(rp), Some(hp)) = (&args.ref_transcripts, &args.hyp_transcripts) {
        run.input(rp)?;
        run.input(hp)?;
        let rates = transcript_error_rates(&read_transcripts(rp)?, &read_transcripts(hp)?)?;
        for (id, [w, p, s]) in &rates {
            let r = row(&mut rows, id);
            r.wer = Some(w.rate);
            r.wer_p = Some(p.rate);
            r.wer_s = Some(s.rate);
        }
        let pooled = |k: usize| ErrorRateReport::pooled(rates.iter().map(|(_, r)| &r[k]));
        report.wer = Some(pooled(0));
        report.wer_p = Some(pooled(1));
        report.wer_s = Some(pooled(2));
    }

    if let (Some(rd), Some(hd)) = (&args.ref_features, &args.hyp_features) {
        run.input(rd)?;
        run.input(hd)?;
        let ref_ids = feature_ids(rd)?;
        let hyp_ids = feature_ids(hd)?;
        if ref_ids != hyp_ids {
            let diff: Vec<&String> = ref_ids.symmetric_difference(&hyp_ids).take(5).collect();
            return Err(aligner_core::Error::Contract(format!(
                "reference and hypothesis feature ids differ (e.g. {diff:?})"
            ))
            .into());
        }
        if ref_ids.is_empty() {
            return Err(CliError::Stage(format!("no .feat files in {}", rd.display())));
        }
        let mut total = 0.0;
        for id in &ref_ids {
            let a = load_features::<f64>(rd.join(format!("{id}.feat")))?;
            let b = load_features::<f64>(hd.join(format!("{id}.feat")))?;
            let d = mcd(&a, &b, args.dtw)?;
            row(&mut rows, id).mcd = Some(d);
            total += d;
        }
        report.mcd = Some(total / ref_ids.len() as f64);
    }

    let json_path = reports.join("eval.json");
    let tsv_path = reports.join("eval.tsv");
    write_json(&json_path, &report)?;
    write_eval_tsv(&tsv_path, &rows.into_values().collect::<Vec<_>>())?;
    run.output(&json_path);
    run.output(&tsv_path);
    ctx.workspace.record_run(&run)?;
    print_json(&report)
}
