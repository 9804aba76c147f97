use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use xplmark_core::maskio::{load_mask_sequence, load_signed_sequence, save_png_video, MaskPack, RgbFrame, RgbVideo, SequenceFormat};
use xplmark_core::predictor::{wire, CommandPredictor, FrameInput, Predictor};
use xplmark_core::segment::LabelVolume;

fn xplmark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xplmark"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = xplmark(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

/// Four coloured quadrants that drift one pixel right per frame.
fn write_video(dir: &Path, frames: usize) {
    let (h, w) = (24, 24);
    let video = RgbVideo::new(
        (0..frames)
            .map(|t| {
                let mut f = RgbFrame::filled(h, w, [0, 0, 0]).unwrap();
                for y in 0..h {
                    for x in 0..w {
                        let xs = (x + w - t % w) % w;
                        let c = match (y < h / 2, xs < w / 2) {
                            (true, true) => [220, 30, 30],
                            (true, false) => [30, 200, 40],
                            (false, true) => [40, 40, 210],
                            (false, false) => [230, 230, 20],
                        };
                        f.set_pixel(y, x, c);
                    }
                }
                f
            })
            .collect(),
    )
    .unwrap();
    save_png_video(dir, &video).unwrap();
}

#[test]
fn usage_and_data_errors() {
    assert_eq!(xplmark(&["metrics", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(xplmark(&[]).status.code(), Some(1));
    assert_eq!(xplmark(&["--version"]).status.code(), Some(0));
    assert_eq!(xplmark(&["metrics", "--input", "missing.mskp"]).status.code(), Some(2));
    assert_eq!(xplmark(&["signtest", "--a-wins", "0", "--b-wins", "0"]).status.code(), Some(2));
}

#[test]
fn signtest_reports_table_row() {
    let v = ok(&["signtest", "--a-wins", "210", "--b-wins", "154", "--alpha", "0.05", "--bonferroni", "6", "--json"]);
    assert_eq!(v["passed"], true);
    let p = v["p"].as_f64().unwrap();
    assert!((p - 0.003881).abs() / 0.003881 < 0.15, "{p}");
    assert_eq!(v["a_gt_b"], 210);
}

#[test]
fn csv_commands() {
    let dir = tempfile::tempdir().unwrap();
    let votes = dir.path().join("votes.csv");
    let mut csv = String::from("question_id,user_id,explainer,agreed\n");
    for u in 0..10 {
        csv.push_str(&format!("q1,u{u},shap,{}\n", u32::from(u < 9)));
        csv.push_str(&format!("q1,u{u},gradcam,{}\n", u32::from(u < 2)));
    }
    fs::write(&votes, csv).unwrap();
    let counts = ok(&["votes", "--input", votes.to_str().unwrap(), "--json"]);
    assert_eq!(counts.as_array().unwrap().len(), 2);
    let tests = ok(&["signtest", "--votes", votes.to_str().unwrap(), "--json"]);
    assert_eq!(tests[0]["hypothesis"], "gradcam > shap");
    assert_eq!(tests[0]["b_gt_a"], 7);

    let scores = dir.path().join("scores.csv");
    fs::write(&scores, "score,label\n0.9,1\n0.8,1\n0.3,0\n0.6,0\n").unwrap();
    let out = dir.path().join("auc.json");
    let v = ok(&["auc", "--input", scores.to_str().unwrap(), "--json", "--out", out.to_str().unwrap()]);
    assert_eq!(v["auc"], 1.0);
    assert_eq!(v["balanced_accuracy"], 0.75);
    assert!(out.exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("auc.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "auc");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);

    let boxes = dir.path().join("boxes.csv");
    let mut csv = String::from("video_id,frame_idx,left,top,right,bottom,frame_w,frame_h\n");
    for t in 0..5 {
        csv.push_str(&format!("still,{t},10,10,50,50,1000,1000\n"));
        csv.push_str(&format!("shaky,{t},{},10,50,50,1000,1000\n", 10 + 30 * (t % 2)));
    }
    fs::write(&boxes, csv).unwrap();
    let sel = ok(&["pool-filter", "--input", boxes.to_str().unwrap(), "--json"]);
    assert_eq!(sel["accepted"][0]["video_id"], "still");
    assert_eq!(sel["rejected"][0]["video_id"], "shaky");
}

#[test]
fn segmentation_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let video = dir.path().join("clip");
    write_video(&video, 6);
    let mut packs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("labels{threads}.mskp"));
        ok(&[
            "segment", "--video", video.to_str().unwrap(), "--mode", "3d", "--segments", "8",
            "--threads", threads, "--out", out.to_str().unwrap(), "--json",
        ]);
        packs.push(fs::read(&out).unwrap());
    }
    assert_eq!(packs[0], packs[1]);
    let labels = LabelVolume::from_pack(&MaskPack::decode(&packs[0]).unwrap()).unwrap();
    assert_eq!(labels.dims(), (6, 24, 24));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    write_video(&dir.path().join("clip"), 4);

    let seg = ok(&["segment", "--video", &p("clip"), "--segments", "4", "--out", &p("labels.mskp"), "--json"]);
    let k = seg["segments"].as_u64().unwrap() as usize;
    let weights: Vec<f64> = (0..k).map(|i| i as f64 - 1.0).collect();
    fs::write(p("w.json"), serde_json::json!({ "bias": 0.2, "weights": weights }).to_string()).unwrap();

    let predictor = format!("toy:linear:{}", p("w.json"));
    let shap = ok(&[
        "shap", "--video", &p("clip"), "--labels", &p("labels.mskp"), "--predictor", &predictor,
        "--score-space", "logit", "--seed", "5", "--out", &p("phi.mskp"), "--json",
    ]);
    assert!(shap["efficiency_residual"].as_f64().unwrap() <= 1e-9);
    assert!(Path::new(&p("phi.json")).exists());
    assert!(Path::new(&p("phi.mskp.manifest.json")).exists());
    let phi = load_signed_sequence(Path::new(&p("phi.mskp")), SequenceFormat::MaskPack).unwrap();
    assert_eq!(phi.len(), 4);

    ok(&["normalize", "--input", &p("phi.mskp"), "--mode", "extreme", "--out", &p("norm.mskp"), "--json"]);
    let split = ok(&["split", "--input", &p("norm.mskp"), "--out", &p("split"), "--json"]);
    let fake = split["fake"].as_str().unwrap().to_string();
    ok(&["aggregate", "--input", &fake, &fake, "--out", &p("agg.mskp"), "--json"]);
    let m = ok(&["metrics", "--input", &p("agg.mskp"), &fake, "--json"]);
    assert_eq!(m["pooled"]["videos"], 2);
    let v = m["pooled"]["variance"]["mean"].as_f64().unwrap();
    assert!((0.0..=0.25).contains(&v));

    ok(&["overlay", "--video", &p("clip"), "--mask", &fake, "--out", &p("overlay"), "--json"]);
    assert_eq!(fs::read_dir(p("overlay")).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count(), 4);
    let s = ok(&["sample-frames", "--input", &p("agg.mskp"), "--count", "2", "--out", &p("two.mskp"), "--json"]);
    assert_eq!(s["indices"], serde_json::json!([0, 3]));
    assert_eq!(load_mask_sequence(Path::new(&p("two.mskp")), SequenceFormat::MaskPack).unwrap().len(), 2);
}

#[test]
fn shap_through_external_predictor() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    write_video(&dir.path().join("clip"), 2);
    ok(&["segment", "--video", &p("clip"), "--segments", "4", "--out", &p("labels.mskp"), "--json"]);
    let cmd = format!("cmd:{}", env!("CARGO_BIN_EXE_xplmark-echo"));
    let v = ok(&[
        "shap", "--video", &p("clip"), "--labels", &p("labels.mskp"), "--predictor", &cmd,
        "--mode", "framewise", "--samples", "50", "--seed", "1", "--out", &p("phi.mskp"), "--json",
    ]);
    assert_eq!(v["attributions"].as_array().unwrap().len(), 2);

    let broken = "cmd:sh -c 'cat >/dev/null'";
    let out = Command::new(env!("CARGO_BIN_EXE_xplmark"))
        .env("XPLMARK_PREDICTOR_TIMEOUT_MS", "200")
        .args([
            "shap", "--video", &p("clip"), "--labels", &p("labels.mskp"), "--predictor", broken,
            "--seed", "1", "--out", &p("x.mskp"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn echo_loopback_matches_in_process_mean() {
    let p = CommandPredictor::spawn(&[env!("CARGO_BIN_EXE_xplmark-echo").to_string()], 3).unwrap();
    let frames: Vec<RgbFrame> = (0..7u8)
        .map(|i| {
            let data = (0..5 * 6 * 3).map(|j| (j as u8).wrapping_mul(37).wrapping_add(i * 11)).collect();
            RgbFrame::new(5, 6, data).unwrap()
        })
        .collect();
    let inputs: Vec<FrameInput<'_>> = frames.iter().enumerate().map(|(frame_index, frame)| FrameInput { frame_index, frame }).collect();
    let scores = p.predict_frames(&inputs).unwrap();
    for (s, f) in scores.iter().zip(&frames) {
        assert_eq!(*s as f32, wire::mean_pixel(f));
    }
}
