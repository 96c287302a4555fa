use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use segmatch::embed::{load_checkpoint, save_checkpoint, CheckpointMeta, TwoBranchParams};
use segmatch::evaluation::{reports_to_csv, run_eval, EvalReport, Scenario};
use segmatch::features::{generate_synthetic_catalog, ClipManifest, Modality, SyntheticSpec};
use segmatch::pipeline::{
    embed_catalog, load_embeddings, load_segments, save_embeddings, save_segments, segment_manifest, write_json,
    write_train_log, RunConfig,
};
use segmatch::ranking::{rank_catalog, Distance};
use segmatch::train::{catalog_dims, net_spec_for, train};

use crate::{Cli, Command, EmbedArgs, EvaluateArgs, RankArgs, SegmentArgs, SynthArgs, TrainArgs, ValidateArgs};

/// Bad command-line input; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if cli.no_timing {
        config.record_timing = false;
    }
    match &cli.command {
        Command::Synth(a) => synth(cli, &config, a),
        Command::Validate(a) => validate(cli, &config, a),
        Command::Segment(a) => segment(cli, config, a),
        Command::Train(a) => train_cmd(cli, config, a),
        Command::Embed(a) => embed(cli, config, a),
        Command::Rank(a) => rank(cli, config, a),
        Command::Evaluate(a) => evaluate(cli, config, a),
    }
}

/// Prints `summary` as JSON with `--json`, otherwise the human text.
fn report(cli: &Cli, summary: &Value, human: impl FnOnce() -> String) -> Result<()> {
    if cli.json {
        println!("{}", serde_json::to_string_pretty(summary)?);
    } else {
        println!("{}", human());
    }
    Ok(())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn synth(cli: &Cli, config: &RunConfig, a: &SynthArgs) -> Result<()> {
    if a.clips == 0 {
        return Err(usage("--clips must be at least 1"));
    }
    if a.val + a.test >= a.clips {
        return Err(usage("--val plus --test must leave at least one training clip"));
    }
    let mut spec = SyntheticSpec {
        num_clips: a.clips,
        seed: config.seed,
        ..SyntheticSpec::default()
    };
    set(&mut spec.seed, a.seed);
    set(&mut spec.audio_dim, a.audio_dim);
    set(&mut spec.video_dim, a.video_dim);
    set(&mut spec.latent_dim, a.latent_dim);
    set(&mut spec.noise_std, a.noise);
    set(&mut spec.latent_vocabulary, a.vocabulary);
    set(&mut spec.vocabulary_jitter, a.jitter);
    set(&mut spec.segments_per_clip.0, a.min_segments);
    set(&mut spec.segments_per_clip.1, a.max_segments);
    set(&mut spec.segment_duration_s.0, a.min_duration);
    set(&mut spec.segment_duration_s.1, a.max_duration);
    let catalog = generate_synthetic_catalog(&spec).map_err(|e| usage(e.to_string()))?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let n_train = a.clips - a.val - a.test;
    let splits = [
        ("train", 0..n_train),
        ("val", n_train..n_train + a.val),
        ("test", n_train + a.val..a.clips),
    ];
    let mut written = serde_json::Map::new();
    for (name, range) in splits {
        if range.is_empty() {
            continue;
        }
        let (manifest, _) = catalog.write_subset(&a.out, range.clone())?;
        let file = if a.val == 0 && a.test == 0 {
            "manifest.json".to_string()
        } else {
            format!("{name}.json")
        };
        manifest.save(a.out.join(&file))?;
        written.insert(name.into(), json!({"manifest": file, "clips": range.len()}));
    }
    write_json(a.out.join("synth.json"), &spec)?;
    info!("wrote {} clips to {}", a.clips, a.out.display());
    let summary = json!({"out": a.out, "spec": spec, "splits": written});
    report(cli, &summary, || {
        format!("wrote {} synthetic clips to {}", a.clips, a.out.display())
    })
}

fn manifest_path(config: &RunConfig, given: &Option<std::path::PathBuf>) -> Result<std::path::PathBuf> {
    given
        .clone()
        .or_else(|| config.manifest.clone())
        .ok_or_else(|| usage("no manifest given (--manifest or config `manifest`)"))
}

fn validate(cli: &Cli, config: &RunConfig, a: &ValidateArgs) -> Result<()> {
    let path = manifest_path(config, &a.manifest)?;
    let manifest = ClipManifest::load(&path)?;
    let problems = manifest.validate();
    let summary = json!({"manifest": path, "clips": manifest.len(), "problems": problems});
    report(cli, &summary, || {
        if problems.is_empty() {
            format!("{}: {} clips, ok", path.display(), manifest.len())
        } else {
            problems.join("\n")
        }
    })?;
    if !problems.is_empty() {
        bail!("{} problem(s) in {}", problems.len(), path.display());
    }
    Ok(())
}

fn segment(cli: &Cli, mut config: RunConfig, a: &SegmentArgs) -> Result<()> {
    let path = manifest_path(&config, &a.manifest)?;
    config.manifest = Some(path.clone());
    let seg = &mut config.segmenter;
    if let Some(s) = &a.segmenter {
        seg.kind = s.parse().map_err(|e: segmatch::Error| usage(e.to_string()))?;
    }
    if let Some(s) = &a.source {
        seg.source = s.parse::<Modality>().map_err(|e| usage(e.to_string()))?;
    }
    set(&mut seg.foote.kernel_half_width, a.kernel_half_width);
    set(&mut seg.foote.gaussian_taper_std, a.taper_std);
    set(&mut seg.foote.peak_threshold, a.peak_threshold);
    set(&mut seg.min_segment_frames, a.min_segment_frames);
    set(&mut seg.fixed_length_frames, a.fixed_length);

    let manifest = ClipManifest::load(&path)?;
    let run = segment_manifest(&manifest, &config.segmenter);
    for (id, e) in &run.errors {
        eprintln!("{id}: {e}");
    }
    if !run.errors.is_empty() {
        bail!("{} of {} clips failed to segment", run.errors.len(), manifest.len());
    }
    let fallbacks = run.clips.iter().filter(|c| c.boundaries.fallback).count();
    if fallbacks > 0 {
        warn!("{fallbacks} clips were too short for the segmenter and kept whole");
    }
    save_segments(&a.out, &run.clips, &config.to_value())?;
    if let Some(b) = &a.boundaries {
        let all: Vec<_> = run.clips.iter().map(|c| &c.boundaries).collect();
        write_json(b, &all)?;
    }
    let segments: usize = run.clips.iter().map(|c| c.num_segments()).sum();
    let summary = json!({
        "out": a.out,
        "segmenter": config.segmenter.kind.to_string(),
        "clips": run.clips.len(),
        "segments": segments,
        "fallbacks": fallbacks,
    });
    report(cli, &summary, || {
        format!(
            "{} clips, {segments} segments ({:.2} per clip) -> {}",
            run.clips.len(),
            segments as f64 / run.clips.len() as f64,
            a.out.display()
        )
    })
}

fn train_cmd(cli: &Cli, mut config: RunConfig, a: &TrainArgs) -> Result<()> {
    let t = &mut config.train;
    set(&mut t.batch_size, a.batch_size);
    set(&mut t.learning_rate, a.learning_rate);
    set(&mut t.margin, a.margin);
    set(&mut t.lambda_vm, a.lambda_vm);
    set(&mut t.lambda_mv, a.lambda_mv);
    set(&mut t.dropout, a.dropout);
    set(&mut t.max_epochs, a.epochs);
    set(&mut t.patience, a.patience);
    set(&mut t.min_delta, a.min_delta);
    set(&mut t.seed, a.seed);
    if a.same_clip_negatives {
        t.same_clip_negatives = true;
    }
    t.validate().map_err(|e| usage(e.to_string()))?;
    config.checkpoint = Some(a.out.clone());

    let (mut train_set, seg_config) = load_segments(&a.segments)?;
    let val_set = match &a.val_segments {
        Some(p) => load_segments(p)?.0,
        None => {
            let held = (train_set.len() / 10).max(2);
            if train_set.len() < held + 2 {
                return Err(usage("too few clips to hold out a validation set"));
            }
            train_set.split_off(train_set.len() - held)
        }
    };
    if let Ok(seg) = serde_json::from_value::<RunConfig>(seg_config) {
        config.segmenter = seg.segmenter;
        config.manifest = seg.manifest;
    }
    let segmenter = train_set[0].boundaries.segmenter.clone();
    if let Some(bad) = val_set.iter().find(|c| c.boundaries.segmenter != segmenter) {
        bail!(segmatch::Error::SegmenterMismatch {
            trained: segmenter.to_string(),
            requested: bad.boundaries.segmenter.to_string(),
        });
    }
    let (md, vd) = catalog_dims(&train_set)?;
    let init = TwoBranchParams::init(net_spec_for(md, vd, &config.train), config.train.seed)?;
    info!(
        "training on {} clips, validating on {}, {} trainable parameters",
        train_set.len(),
        val_set.len(),
        init.trainable_count()
    );
    let quiet = cli.json;
    let outcome = train(&config.train, init, &train_set, &val_set, |r| {
        if !quiet {
            eprintln!(
                "epoch {:>4}  train {:>10}  val {:.6}",
                r.epoch,
                r.train_loss.map_or("-".to_string(), |l| format!("{l:.6}")),
                r.val_loss
            );
        }
    })?;
    let meta = CheckpointMeta {
        segmenter: segmenter.clone(),
        epoch: outcome.best_epoch,
        hyperparameters: serde_json::to_value(&config.train)?,
        run_config: config.to_value(),
    };
    save_checkpoint(&outcome.params, &meta, &a.out)?;
    if let Some(log) = &a.log {
        write_train_log(log, &outcome.log, config.record_timing)?;
    }
    let summary = json!({
        "checkpoint": a.out,
        "segmenter": segmenter.to_string(),
        "best_epoch": outcome.best_epoch,
        "best_val_loss": outcome.best_val_loss,
        "epochs_run": outcome.log.len() - 1,
        "stopped_early": outcome.stopped_early,
    });
    report(cli, &summary, || {
        format!(
            "best epoch {} (val loss {:.6}) -> {}",
            outcome.best_epoch,
            outcome.best_val_loss,
            a.out.display()
        )
    })
}

fn embed(cli: &Cli, mut config: RunConfig, a: &EmbedArgs) -> Result<()> {
    let ckpt = a
        .checkpoint
        .clone()
        .or_else(|| config.checkpoint.clone())
        .ok_or_else(|| usage("no checkpoint given (--checkpoint or config `checkpoint`)"))?;
    let (clips, seg_config) = load_segments(&a.segments)?;
    let segmenter = clips[0].boundaries.segmenter.clone();
    let (params, meta) = load_checkpoint(&ckpt, Some(&segmenter), a.force)?;
    if let Ok(trained) = serde_json::from_value::<RunConfig>(meta.run_config) {
        config.train = trained.train;
    }
    if let Ok(seg) = serde_json::from_value::<RunConfig>(seg_config) {
        config.segmenter = seg.segmenter;
        config.manifest = seg.manifest;
    }
    config.checkpoint = Some(ckpt);
    let mut catalog = embed_catalog(&params, &clips)?;
    if a.force && meta.segmenter != segmenter {
        warn!(
            "embedding `{segmenter}` segments with a network trained on `{}`",
            meta.segmenter
        );
        catalog.segmenter = segmenter.clone();
    }
    save_embeddings(&a.out, &catalog, &config.to_value())?;
    let summary = json!({"out": a.out, "clips": catalog.len(), "segmenter": segmenter.to_string()});
    report(cli, &summary, || {
        format!("embedded {} clips -> {}", catalog.len(), a.out.display())
    })
}

fn catalog_limit(n: Option<usize>, available: usize) -> Result<usize> {
    let n = n.unwrap_or(available);
    if n == 0 || n > available {
        return Err(usage(format!("catalog size {n} not in 1..={available}")));
    }
    Ok(n)
}

fn write_or_print<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(p) => write_json(p, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn rank(_cli: &Cli, mut config: RunConfig, a: &RankArgs) -> Result<()> {
    let distance: Distance = a.distance.parse().map_err(|e: segmatch::Error| usage(e.to_string()))?;
    let (catalog, emb_config) = load_embeddings(&a.embeddings)?;
    if let Ok(c) = serde_json::from_value::<RunConfig>(emb_config) {
        config.segmenter = c.segmenter;
        config.train = c.train;
        config.checkpoint = c.checkpoint;
        config.manifest = c.manifest;
    }
    let n = catalog_limit(a.catalog_size.or(config.catalog_size), catalog.len())?;
    config.catalog_size = Some(n);
    config.distances = vec![distance];
    let q = catalog
        .position(&a.query)
        .ok_or_else(|| usage(format!("query `{}` is not in {}", a.query, a.embeddings.display())))?;
    let ranked = rank_catalog(&catalog.video[q], &catalog.music[..n], distance, &config.alignment)?;
    let mut out = ranked.to_output(Some(a.top));
    if !config.record_timing {
        out.wall_ms = None;
    }
    out.config = Some(config.to_value());
    write_or_print(a.out.as_deref(), &out)?;
    if a.out.is_some() {
        println!("{}", serde_json::to_string_pretty(&out.results)?);
    }
    Ok(())
}

fn evaluate(cli: &Cli, mut config: RunConfig, a: &EvaluateArgs) -> Result<()> {
    let (catalog, emb_config) = load_embeddings(&a.embeddings)?;
    if let Ok(c) = serde_json::from_value::<RunConfig>(emb_config) {
        config.segmenter = c.segmenter;
        config.train = c.train;
        config.checkpoint = c.checkpoint;
        config.manifest = c.manifest;
    }
    if let Some(ds) = &a.distances {
        config.distances = ds
            .iter()
            .map(|d| d.parse())
            .collect::<segmatch::Result<_>>()
            .map_err(|e| usage(e.to_string()))?;
    }
    set(&mut config.alignment.nw_indel, a.nw_indel);
    set(&mut config.alignment.sw_indel, a.sw_indel);
    let scenarios = match a.scenario.as_deref() {
        Some("all") => Scenario::ALL.to_vec(),
        Some(s) => vec![s.parse().map_err(|e: segmatch::Error| usage(e.to_string()))?],
        None => vec![config.scenario],
    };
    let n = catalog_limit(a.catalog_size.or(config.catalog_size), catalog.len())?;
    config.catalog_size = Some(n);

    let mut reports: Vec<EvalReport> = Vec::new();
    for sc in scenarios {
        config.scenario = sc;
        let cfg = config.to_value();
        for r in run_eval(
            &catalog.video,
            &catalog.music,
            Some(n),
            sc,
            &config.distances,
            &config.alignment,
        )? {
            let mut r = if config.record_timing { r } else { r.without_timing() };
            r.config = Some(cfg.clone());
            reports.push(r);
        }
    }
    if let Some(p) = &a.out {
        write_json(p, &reports)?;
    }
    if let Some(p) = &a.csv {
        fs::write(p, reports_to_csv(&reports)).with_context(|| format!("writing {}", p.display()))?;
    }
    if cli.json {
        let brief: Vec<Value> = reports
            .iter()
            .map(|r| {
                json!({
                    "scenario": r.scenario, "distance": r.distance, "segmenter": r.segmenter,
                    "n": r.n, "n_queries": r.n_queries, "excluded": r.excluded,
                    "r_at_1": r.r_at_1, "r_at_10": r.r_at_10, "r_at_25": r.r_at_25,
                    "mean_rank": r.mean_rank, "ci95": r.ci95,
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&brief)?);
    } else {
        print!("{}", reports_to_csv(&reports));
    }
    Ok(())
}
