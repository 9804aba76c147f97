//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use xplmark_core::maskio::{
    aggregate_multiscale, load_mask_sequence, load_png_video, load_signed_sequence, normalize_extreme, normalize_max,
    overlay as blend, sample_indices, save_mask_sequence, save_png_video, save_signed_sequence, sorted_files,
    split_signed, video_id_for, MaskPack, MaskSequence, RgbVideo, SequenceFormat,
};
use xplmark_core::metrics::{evaluate_sequence, MetricsConfig, MetricsReport, PooledStat};
use xplmark_core::predictor::{
    CommandPredictor, Predictor, PredictorKind, PredictorSpec, ToyBrightness, ToyLinear, ToyLinearWeights,
};
use xplmark_core::segment::{label_change_fraction, mean_color, slic2d_per_frame, slic3d, LabelVolume, SlicParams};
use xplmark_core::selection::{filter_pool, read_bbox_csv};
use xplmark_core::shapkernel::{explain_framewise, explain_videowise, shap_to_masks, ExplainConfig, ScoreSpace, ShapMode};
use xplmark_core::stats::{
    balanced_accuracy, read_scores_csv, roc_auc, sign_test_all_pairs, sign_test_named, vote_counts, SignTestResult,
    VoteTable,
};

use crate::failure::Failure;
use crate::{
    AggregateArgs, AucArgs, Globals, InputArgs, MetricsArgs, NormalizeArgs, NormalizeMode, OverlayArgs, Outcome,
    PoolFilterArgs, SampleFramesArgs, ScoreSpaceArg, SegmentArgs, SegmentMode, SeqFormat, ShapArgs, ShapModeArg,
    SigntestArgs, SplitArgs,
};

type Res = Result<Outcome, Failure>;

fn require_out(g: &Globals, cmd: &str) -> Result<PathBuf, Failure> {
    g.out
        .clone()
        .ok_or_else(|| Failure::Usage(format!("{cmd} requires --out")))
}

fn open(path: &Path) -> Result<fs::File, Failure> {
    fs::File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Writes the JSON report to --out when given.
fn report(g: &Globals, json: serde_json::Value, text: String, inputs: Vec<PathBuf>) -> Res {
    let mut artifacts = Vec::new();
    if let Some(out) = &g.out {
        write_json(out, &json)?;
        artifacts.push(out.clone());
    }
    Ok(Outcome {
        json,
        text,
        artifacts,
        inputs,
    })
}

fn detect(path: &Path, forced: Option<SeqFormat>) -> SequenceFormat {
    match forced {
        Some(SeqFormat::Mskp) => SequenceFormat::MaskPack,
        Some(SeqFormat::Pgm) => SequenceFormat::PgmDir,
        None => SequenceFormat::detect(path),
    }
}

fn load_masks(path: &Path) -> Result<MaskSequence, Failure> {
    if !path.exists() {
        return Err(Failure::Data(format!("{}: no such file or directory", path.display())));
    }
    Ok(load_mask_sequence(path, SequenceFormat::detect(path))?)
}

/// Directories holding .mskp files expand to those files.
fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in inputs {
        if !p.exists() {
            return Err(Failure::Data(format!("{}: no such file or directory", p.display())));
        }
        match p.is_dir().then(|| sorted_files(p, "mskp")) {
            Some(Ok(files)) => out.extend(files),
            _ => out.push(p.clone()),
        }
    }
    Ok(out)
}

fn fmt_stat(name: &str, s: &PooledStat) -> String {
    match s.mean {
        Some(m) => format!("{name:<12} {m:>10.6}  ({} videos, {} skipped)\n", s.videos_used, s.videos_skipped),
        None => format!("{name:<12} {:>10}  ({} videos, {} skipped)\n", "n/a", s.videos_used, s.videos_skipped),
    }
}

pub fn metrics(a: &MetricsArgs, g: &Globals) -> Res {
    let cfg = MetricsConfig {
        shift_fraction: a.shift_fraction,
        inner_area_fraction: a.inner_area,
    };
    cfg.validate()?;
    let paths = expand_inputs(&a.input)?;
    // each worker holds one sequence at a time
    let videos = paths
        .par_iter()
        .map(|p| {
            let seq = load_mask_sequence(p, detect(p, a.format))
                .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            Ok(evaluate_sequence(&seq, &cfg))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let report_data = MetricsReport::new(cfg, videos)?;
    let p = &report_data.pooled;
    let text = format!(
        "{} videos\n{}{}{}{}",
        p.videos,
        fmt_stat("variance", &p.variance),
        fmt_stat("inter-frame", &p.inter_frame),
        fmt_stat("intra-frame", &p.intra_frame),
        fmt_stat("centredness", &p.centredness),
    );
    let json = serde_json::to_value(&report_data).expect("report serializes");
    report(g, json, text, paths)
}

pub fn segment(a: &SegmentArgs, g: &Globals) -> Res {
    let out = require_out(g, "segment")?;
    let params = SlicParams {
        k_target: a.segments,
        compactness: a.compactness,
        iterations: a.iterations,
        temporal_scale: a.temporal_scale,
    };
    params.validate()?;
    let video = load_png_video(&a.video)?;
    let labels = match a.mode {
        SegmentMode::TwoD => slic2d_per_frame(&video, &params)?,
        SegmentMode::ThreeD => slic3d(&video, &params)?,
    };
    fs::write(&out, labels.to_pack().encode()).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    let (t, h, w) = labels.dims();
    let change = label_change_fraction(&labels);
    let json = json!({
        "segments": labels.k(),
        "frames": t,
        "height": h,
        "width": w,
        "label_change_fraction": change,
        "output": out,
    });
    Ok(Outcome {
        json,
        text: format!("{} segments over {t}x{h}x{w}, label change fraction {change:.6}", labels.k()),
        artifacts: vec![out],
        inputs: vec![a.video.clone()],
    })
}

fn build_predictor(
    spec: &PredictorSpec,
    video: &RgbVideo,
    labels: &LabelVolume,
) -> Result<Box<dyn Predictor>, Failure> {
    Ok(match &spec.kind {
        PredictorKind::ToyLinear { weights } => {
            let w = ToyLinearWeights::load(weights)
                .map_err(|e| Failure::Data(format!("{}: {e}", weights.display())))?;
            Box::new(ToyLinear::new(w, labels.clone(), mean_color(video)).map_err(|e| Failure::Data(e.to_string()))?)
        }
        PredictorKind::ToyBrightness => Box::new(ToyBrightness),
        PredictorKind::External { argv } => Box::new(CommandPredictor::spawn(argv, spec.batch_size)?),
    })
}

pub fn shap(a: &ShapArgs, g: &Globals) -> Res {
    let out = require_out(g, "shap")?;
    let seed = g
        .seed
        .ok_or_else(|| Failure::Usage("shap is randomized and requires --seed".into()))?;
    if a.samples < 2 {
        return Err(Failure::Usage("--samples must be >= 2".into()));
    }
    let spec = PredictorSpec::parse(&a.predictor, a.batch_size)?;
    let video = load_png_video(&a.video)?;
    let pack = MaskPack::decode(&fs::read(&a.labels).map_err(|e| Failure::Data(format!("{}: {e}", a.labels.display())))?)?;
    let labels = LabelVolume::from_pack(&pack)?;
    let predictor = build_predictor(&spec, &video, &labels)?;

    let mode = match a.mode {
        ShapModeArg::Videowise => ShapMode::Videowise,
        ShapModeArg::Framewise => ShapMode::Framewise,
    };
    let mut cfg = ExplainConfig::new(a.samples, seed);
    cfg.space = match a.score_space {
        ScoreSpaceArg::Raw => ScoreSpace::Raw,
        ScoreSpaceArg::Logit => ScoreSpace::Logit,
    };
    // bound the number of frames resident per request
    cfg.chunk = match mode {
        ShapMode::Videowise => (a.batch_size / video.len()).max(1),
        ShapMode::Framewise => a.batch_size,
    };
    let result = match mode {
        ShapMode::Videowise => explain_videowise(&video, &labels, predictor.as_ref(), &cfg)?,
        ShapMode::Framewise => explain_framewise(&video, &labels, predictor.as_ref(), &cfg)?,
    };
    let id = video_id_for(&a.video);
    let maps = shap_to_masks(&result, &labels, &id)?;
    save_signed_sequence(&out, &maps)?;
    let sidecar = out.with_extension("json");
    let json = json!({
        "video_id": id,
        "mode": result.mode,
        "score_space": result.space,
        "seed": seed,
        "samples_requested": a.samples,
        "samples_used": result.samples_used(),
        "base_value": result.base_value(),
        "efficiency_residual": result.efficiency_residual(),
        "attributions": result.attributions,
        "volume_stats": result.volume_stats,
    });
    write_json(&sidecar, &json)?;
    let text = format!(
        "{} segments, base value {:.6}, efficiency residual {:.3e}; wrote {} and {}",
        labels.k(),
        result.base_value(),
        result.efficiency_residual(),
        out.display(),
        sidecar.display()
    );
    Ok(Outcome {
        json,
        text,
        artifacts: vec![out, sidecar],
        inputs: vec![a.video.clone(), a.labels.clone()],
    })
}

pub fn normalize(a: &NormalizeArgs, g: &Globals) -> Res {
    let out = require_out(g, "normalize")?;
    if !a.input.exists() {
        return Err(Failure::Data(format!("{}: no such file or directory", a.input.display())));
    }
    let format = SequenceFormat::detect(&a.input);
    let frames = match a.mode {
        NormalizeMode::Extreme => {
            let seq = normalize_extreme(&load_signed_sequence(&a.input, format)?);
            save_signed_sequence(&out, &seq)?;
            seq.len()
        }
        NormalizeMode::Max => {
            let seq = normalize_max(&load_mask_sequence(&a.input, format)?);
            save_mask_sequence(&out, &seq)?;
            seq.len()
        }
    };
    Ok(Outcome {
        json: json!({ "frames": frames, "output": out }),
        text: format!("normalized {frames} frames into {}", out.display()),
        artifacts: vec![out],
        inputs: vec![a.input.clone()],
    })
}

pub fn split(a: &SplitArgs, g: &Globals) -> Res {
    let dir = require_out(g, "split")?;
    if !a.input.exists() {
        return Err(Failure::Data(format!("{}: no such file or directory", a.input.display())));
    }
    let seq = load_signed_sequence(&a.input, SequenceFormat::detect(&a.input))?;
    let (fake, real) = split_signed(&seq)?;
    fs::create_dir_all(&dir)?;
    let id = seq.video_id();
    let fake_path = dir.join(format!("{id}_fake.mskp"));
    let real_path = dir.join(format!("{id}_real.mskp"));
    save_mask_sequence(&fake_path, &fake)?;
    save_mask_sequence(&real_path, &real)?;
    Ok(Outcome {
        json: json!({ "fake": fake_path, "real": real_path, "frames": seq.len() }),
        text: format!("wrote {} and {}", fake_path.display(), real_path.display()),
        artifacts: vec![fake_path, real_path],
        inputs: vec![a.input.clone()],
    })
}

pub fn aggregate(a: &AggregateArgs, g: &Globals) -> Res {
    let out = require_out(g, "aggregate")?;
    let maps = a.input.iter().map(|p| load_masks(p)).collect::<Result<Vec<_>, _>>()?;
    let merged = aggregate_multiscale(&maps)?;
    save_mask_sequence(&out, &merged)?;
    let (h, w) = merged.dims();
    Ok(Outcome {
        json: json!({ "inputs": maps.len(), "frames": merged.len(), "height": h, "width": w, "output": out }),
        text: format!("aggregated {} maps at {h}x{w} into {}", maps.len(), out.display()),
        artifacts: vec![out],
        inputs: a.input.clone(),
    })
}

fn signtest_rows(results: &[SignTestResult]) -> (serde_json::Value, String) {
    let rows: Vec<_> = results
        .iter()
        .map(|r| {
            json!({
                "hypothesis": format!("{} > {}", r.hypothesis.0, r.hypothesis.1),
                "a_gt_b": r.a_wins,
                "b_gt_a": r.b_wins,
                "p": r.p_two_tail,
                "alpha_corrected": r.alpha_corrected,
                "passed": r.passed,
            })
        })
        .collect();
    let mut text = format!("{:<32} {:>6} {:>6} {:>12} {:>6}\n", "hypothesis", "A>B", "B>A", "p", "passed");
    for r in results {
        text.push_str(&format!(
            "{:<32} {:>6} {:>6} {:>12.6} {:>6}\n",
            format!("{} > {}", r.hypothesis.0, r.hypothesis.1),
            r.a_wins,
            r.b_wins,
            r.p_two_tail,
            if r.passed { "yes" } else { "no" }
        ));
    }
    (json!(rows), text)
}

pub fn signtest(a: &SigntestArgs, g: &Globals) -> Res {
    let (results, inputs) = match (&a.votes, a.a_wins, a.b_wins) {
        (Some(path), _, _) => (sign_test_all_pairs(&VoteTable::from_csv(open(path)?)?, a.alpha)?, vec![path.clone()]),
        (None, Some(wa), Some(wb)) => {
            let (na, nb) = match &a.names {
                Some(n) => (n[0].as_str(), n[1].as_str()),
                None => ("A", "B"),
            };
            (vec![sign_test_named((na, nb), wa, wb, a.alpha, a.bonferroni)?], Vec::new())
        }
        _ => return Err(Failure::Usage("give --a-wins and --b-wins, or --votes".into())),
    };
    let (rows, text) = signtest_rows(&results);
    let json = if a.votes.is_some() {
        rows
    } else {
        rows[0].clone()
    };
    report(g, json, text, inputs)
}

pub fn votes(a: &InputArgs, g: &Globals) -> Res {
    let table = VoteTable::from_csv(open(&a.input)?)?;
    let counts = vote_counts(&table)?;
    let mut text = String::new();
    for c in &counts {
        text.push_str(&format!("{:<16} {:>6} {:>4}%\n", c.explainer, c.votes, c.percent));
    }
    report(g, serde_json::to_value(&counts).expect("counts serialize"), text, vec![a.input.clone()])
}

pub fn auc(a: &AucArgs, g: &Globals) -> Res {
    let (scores, labels) = read_scores_csv(open(&a.input)?)?;
    let auc = roc_auc(&scores, &labels)?;
    let ba = balanced_accuracy(&scores, &labels, a.threshold)?;
    let positives = labels.iter().filter(|&&l| l).count();
    let json = json!({
        "auc": auc,
        "balanced_accuracy": ba,
        "threshold": a.threshold,
        "n": scores.len(),
        "positives": positives,
    });
    report(g, json, format!("AUC {auc:.6}\nbalanced accuracy {ba:.6} at threshold {}", a.threshold), vec![a.input.clone()])
}

pub fn pool_filter(a: &PoolFilterArgs, g: &Globals) -> Res {
    let seqs = read_bbox_csv(open(&a.input)?)?;
    let sel = filter_pool(&seqs, a.threshold);
    let mut text = format!("{} accepted, {} rejected\n", sel.accepted.len(), sel.rejected.len());
    for e in &sel.accepted {
        text.push_str(&format!("accept {}\n", e.video_id));
    }
    for e in &sel.rejected {
        text.push_str(&format!("reject {}: {}\n", e.video_id, e.reason.as_deref().unwrap_or("")));
    }
    report(g, serde_json::to_value(&sel).expect("selection serializes"), text, vec![a.input.clone()])
}

pub fn overlay(a: &OverlayArgs, g: &Globals) -> Res {
    let out = require_out(g, "overlay")?;
    let video = load_png_video(&a.video)?;
    let mask = load_masks(&a.mask)?;
    let blended = blend(&video, &mask)?;
    save_png_video(&out, &blended)?;
    Ok(Outcome {
        json: json!({ "frames": blended.len(), "output": out }),
        text: format!("wrote {} overlay frames to {}", blended.len(), out.display()),
        artifacts: vec![out],
        inputs: vec![a.video.clone(), a.mask.clone()],
    })
}

pub fn sample_frames(a: &SampleFramesArgs, g: &Globals) -> Res {
    let out = require_out(g, "sample-frames")?;
    if a.count == 0 {
        return Err(Failure::Usage("--count must be >= 1".into()));
    }
    let is_png_dir = a.input.is_dir() && sorted_files(&a.input, "png").is_ok();
    let indices = if is_png_dir {
        let video = load_png_video(&a.input)?;
        let idx = sample_indices(video.len(), a.count);
        let frames = idx.iter().map(|&i| video.frames()[i].clone()).collect();
        save_png_video(&out, &RgbVideo::new(frames)?)?;
        idx
    } else {
        let seq = load_masks(&a.input)?;
        let idx = sample_indices(seq.len(), a.count);
        let frames = idx.iter().map(|&i| seq.frames()[i].clone()).collect();
        save_mask_sequence(&out, &MaskSequence::new(seq.video_id(), frames)?)?;
        idx
    };
    Ok(Outcome {
        json: json!({ "indices": indices, "output": out }),
        text: format!("sampled frames {indices:?}"),
        artifacts: vec![out],
        inputs: vec![a.input.clone()],
    })
}
