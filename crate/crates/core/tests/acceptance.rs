//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xplmark_core::maskio::{
    aggregate_multiscale, normalize_extreme, normalize_max, split_signed, Grid, MaskFrame, MaskPack, MaskSequence,
    RgbFrame, RgbVideo, SignedMapFrame, SignedMapSequence,
};
use xplmark_core::metrics::{
    autocorr, centredness_frame, evaluate_sequence, frame_variance, inner_crop, intra_frame_consistency, pcc, pool,
    MetricsConfig,
};
use xplmark_core::predictor::{ToyLinear, ToyLinearWeights};
use xplmark_core::segment::{label_change_fraction, mean_color, slic3d, LabelVolume, SlicParams};
use xplmark_core::selection::{filter_pool, BBox, BBoxSequence, DEFAULT_THRESHOLD};
use xplmark_core::shapkernel::{
    brute_force_shapley, explain_videowise, sample_coalitions, shap_to_masks, solve_shap, ExplainConfig, ScoreSpace,
};
use xplmark_core::stats::{percentages, sign_test_named};

type Verdict = Result<String, String>;

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn table5() -> Verdict {
    let rows = [
        ("SHAP", "Bonettini", 212, 176, 0.075456, false),
        ("SHAP", "GradCAM", 210, 154, 0.003881, true),
        ("SHAP", "LTPA", 212, 128, 0.000006, true),
        ("Bonettini", "GradCAM", 178, 154, 0.299944, false),
        ("Bonettini", "LTPA", 177, 129, 0.007115, true),
        ("GradCAM", "LTPA", 156, 128, 0.108958, false),
    ];
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for (a, b, wa, wb, p_pub, passed_pub) in rows {
        let r = sign_test_named((a, b), wa, wb, 0.05, 6).map_err(|e| e.to_string())?;
        let err = rel(r.p_two_tail, p_pub);
        details.push(format!("{a}>{b} p={:.6} ({:+.1}%)", r.p_two_tail, 100.0 * (r.p_two_tail - p_pub) / p_pub));
        if r.passed != passed_pub {
            failures.push(format!("{a}>{b}: passed={} expected {passed_pub}", r.passed));
        }
        if err > 0.15 {
            failures.push(format!("{a}>{b}: p={:.6} vs published {p_pub} ({:.1}% off)", r.p_two_tail, 100.0 * err));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        failures.push(format!("runtime {elapsed:?}"));
    }
    if failures.is_empty() {
        Ok(details.join("; "))
    } else {
        Err(failures.join("; "))
    }
}

fn bonferroni() -> Verdict {
    let r = sign_test_named(("A", "B"), 10, 5, 0.05, 6).map_err(|e| e.to_string())?;
    let printed = format!("{:.5}", r.alpha_corrected);
    check(printed == "0.00833", format!("alpha/6 = {} -> {printed}", r.alpha_corrected))
}

fn table4() -> Verdict {
    let counts: Vec<(String, u64)> = [("GradCAM", 165), ("SHAP", 221), ("LTPA", 137), ("Bonettini", 185)]
        .iter()
        .map(|(n, c)| (n.to_string(), *c))
        .collect();
    let got: Vec<u64> = percentages(&counts).iter().map(|c| c.percent).collect();
    check(got == [23, 31, 19, 26], format!("percentages {got:?}"))
}

fn shap_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_err, mut worst_res) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let m = 2 + case % 11;
        let table: Vec<f64> = (0..1usize << m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |bits: &[bool]| {
            let idx = bits.iter().enumerate().fold(0usize, |acc, (i, &b)| acc | (usize::from(b) << i));
            table[idx]
        };
        let exact = brute_force_shapley(f, m).map_err(|e| e.to_string())?;
        let design = sample_coalitions(m, (1 << m) - 2, case as u64);
        if design.len() != (1 << m) - 2 {
            return Err(format!("M={m}: design has {} rows, expected full enumeration", design.len()));
        }
        let y: Vec<f64> = design.coalitions.iter().map(|c| f(c.bits())).collect();
        let (full, empty) = (f(&vec![true; m]), f(&vec![false; m]));
        let phi = solve_shap(m, &design.coalitions, &design.weights, &y, full, empty).map_err(|e| e.to_string())?;
        let err = phi.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let res = (empty + phi.iter().sum::<f64>() - full).abs();
        worst_err = worst_err.max(err);
        worst_res = worst_res.max(res);
    }
    let elapsed = start.elapsed();
    check(
        worst_err <= 1e-6 && worst_res <= 1e-9 && elapsed < Duration::from_secs(30),
        format!("max |phi - exact| {worst_err:.2e}, max residual {worst_res:.2e}, {elapsed:.2?}"),
    )
}

/// Twenty coloured blocks (4 rows x 5 columns), each its own supervoxel,
/// constant over `frames` frames.
fn block_video(frames: usize) -> (RgbVideo, LabelVolume) {
    let (bh, bw) = (6, 6);
    let (h, w) = (4 * bh, 5 * bw);
    let colour = |b: usize| -> [u8; 3] {
        let b = b as u32;
        [((b * 53 + 17) % 256) as u8, ((b * 97 + 80) % 256) as u8, ((b * 29 + 140) % 256) as u8]
    };
    let mut labels = Vec::with_capacity(frames * h * w);
    let mut frame = RgbFrame::filled(h, w, [0, 0, 0]).unwrap();
    for y in 0..h {
        for x in 0..w {
            frame.set_pixel(y, x, colour((y / bh) * 5 + x / bw));
        }
    }
    for _ in 0..frames {
        for y in 0..h {
            for x in 0..w {
                labels.push(((y / bh) * 5 + x / bw) as u32);
            }
        }
    }
    let video = RgbVideo::new(vec![frame; frames]).unwrap();
    (video, LabelVolume::new(frames, h, w, labels).unwrap())
}

fn shap_linear_recovery() -> Verdict {
    let (video, labels) = block_video(3);
    if labels.k() != 20 {
        return Err(format!("fixture has {} supervoxels", labels.k()));
    }
    let mute = mean_color(&video);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let weights = ToyLinearWeights {
        bias: -0.3,
        weights: (0..20).map(|_| rng.random_range(-1.5..1.5)).collect(),
    };
    let predictor = ToyLinear::new(weights.clone(), labels.clone(), mute).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut cfg = ExplainConfig::new(2000, seed);
        cfg.space = ScoreSpace::Logit;
        let r = explain_videowise(&video, &labels, &predictor, &cfg).map_err(|e| e.to_string())?;
        let err = r.attributions[0]
            .phi
            .iter()
            .zip(&weights.weights)
            .map(|(p, w)| (p - w).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    check(worst <= 1e-3, format!("max |phi - w| over 10 seeds {worst:.2e}"))
}

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Grid {
    Grid::new(h, w, (0..h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn metrics_properties() -> Verdict {
    let cfg = MetricsConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = Vec::new();

    // variance range and zero iff constant
    for case in 0..1000 {
        let (t, h, w) = (rng.random_range(1..4), rng.random_range(2..9), rng.random_range(2..9));
        let constant = case % 4 == 0;
        let frames: Vec<MaskFrame> = (0..t)
            .map(|_| {
                if constant {
                    MaskFrame::new(h, w, vec![rng.random::<f64>(); h * w]).unwrap()
                } else {
                    MaskFrame::from_grid(random_mask(&mut rng, h, w)).unwrap()
                }
            })
            .collect();
        let seq = MaskSequence::new("v", frames).unwrap();
        let v = evaluate_sequence(&seq, &cfg).variance;
        let all_constant = seq.frames().iter().all(|f| f.is_constant());
        if !(0.0..=0.25).contains(&v) || ((v == 0.0) != all_constant) {
            failures.push(format!("variance {v} (constant={all_constant})"));
            break;
        }
    }

    // PCC bounded and invariant under positive affine maps
    for _ in 0..1000 {
        let (h, w) = (rng.random_range(2..9), rng.random_range(2..9));
        let (x, y) = (random_mask(&mut rng, h, w), random_mask(&mut rng, h, w));
        let (a, b) = (rng.random_range(0.1..3.0), rng.random_range(-2.0..2.0));
        let ay = Grid::new(h, w, y.values().iter().map(|v| a * v + b).collect()).unwrap();
        let p = pcc(&x, &y).unwrap().unwrap();
        let q = pcc(&x, &ay).unwrap().unwrap();
        if p.abs() > 1.0 || (p - q).abs() > 1e-9 {
            failures.push(format!("pcc {p} vs affine {q}"));
            break;
        }
    }

    // autocorrelation dominated by lag zero, so rho is within [-1, 1]
    for _ in 0..1000 {
        let (h, w) = (rng.random_range(2..12), rng.random_range(2..12));
        let x = random_mask(&mut rng, h, w);
        let a0 = autocorr(&x, 0, 0).unwrap();
        let (di, dj) = (
            rng.random_range(-(h as i64 - 1)..h as i64) as isize,
            rng.random_range(-(w as i64 - 1)..w as i64) as isize,
        );
        let a = autocorr(&x, di, dj).unwrap();
        let rho = intra_frame_consistency(&x, &cfg).unwrap();
        if a.abs() > a0 * (1.0 + 1e-12) || !(-1.0..=1.0).contains(&rho) {
            failures.push(format!("a({di},{dj}) = {a} vs a00 = {a0}, rho = {rho}"));
            break;
        }
    }

    // centredness in [0, 1]; all mass inside the crop gives exactly 1
    for case in 0..1000 {
        let l = rng.random_range(2..16);
        let x = random_mask(&mut rng, l, l);
        let mu = centredness_frame(&x, &cfg).unwrap().unwrap();
        let (s, off) = inner_crop(l, &cfg);
        let mut inside = vec![0.0; l * l];
        for r in off..off + s {
            for c in off..off + s {
                inside[r * l + c] = rng.random_range(0.01..1.0);
            }
        }
        let mu_in = centredness_frame(&Grid::new(l, l, inside).unwrap(), &cfg).unwrap();
        if !(0.0..=1.0).contains(&mu) || (s > 0 && mu_in != Some(1.0)) {
            failures.push(format!("case {case}: mu {mu}, inside {mu_in:?}"));
            break;
        }
    }

    // i.i.d. noise has rho near zero
    let mut total = 0.0;
    for seed in 0..10 {
        let mut r = ChaCha8Rng::seed_from_u64(1000 + seed);
        total += intra_frame_consistency(&random_mask(&mut r, 380, 380), &cfg).unwrap().abs();
    }
    let noise = total / 10.0;
    if noise >= 0.02 {
        failures.push(format!("noise mean |rho| {noise}"));
    }

    if failures.is_empty() {
        Ok(format!("4x1000 cases, noise mean |rho| {noise:.4}"))
    } else {
        Err(failures.join("; "))
    }
}

fn pool_filter() -> Verdict {
    let seq = |id: &str, f: &dyn Fn(f64) -> f64| BBoxSequence {
        video_id: id.into(),
        frame_width: 1000.0,
        frame_height: 1000.0,
        boxes: (0..10)
            .map(|t| {
                let d = f(t as f64);
                BBox {
                    left: 100.0 + d,
                    top: 200.0 + d,
                    right: 300.0 + d,
                    bottom: 400.0 + d,
                }
            })
            .collect(),
    };
    let sel = filter_pool(
        &[seq("static", &|_| 0.0), seq("drift", &|t| t), seq("boundary", &|t| 2.0 * t)],
        DEFAULT_THRESHOLD,
    );
    let accepted: Vec<&str> = sel.accepted.iter().map(|e| e.video_id.as_str()).collect();
    let rejected: Vec<&str> = sel.rejected.iter().map(|e| e.video_id.as_str()).collect();
    let boundary = sel.rejected.first().and_then(|e| e.statistic);
    check(
        accepted == ["static", "drift"] && rejected == ["boundary"] && boundary == Some(0.002),
        format!("accepted {accepted:?}, rejected {rejected:?} at {boundary:?}"),
    )
}

fn textured_video(frames: usize, h: usize, w: usize, moving: bool) -> RgbVideo {
    RgbVideo::new(
        (0..frames)
            .map(|t| {
                let shift = if moving { t } else { 0 };
                let mut f = RgbFrame::filled(h, w, [0, 0, 0]).unwrap();
                for y in 0..h {
                    for x in 0..w {
                        let xs = x + shift;
                        f.set_pixel(y, x, [(xs * 255 / (w + frames)) as u8, (y * 255 / h) as u8, ((xs / 7 + y / 5) % 2 * 200) as u8]);
                    }
                }
                f
            })
            .collect(),
    )
    .unwrap()
}

fn is_partition(l: &LabelVolume) -> bool {
    LabelVolume::new(l.frames(), l.height(), l.width(), l.labels().to_vec()).is_ok_and(|v| v.k() == l.k())
        && l.histogram().iter().all(|&c| c > 0)
}

fn segmentation() -> Verdict {
    let params = SlicParams {
        k_target: 8,
        ..SlicParams::default()
    };
    let still = textured_video(8, 32, 32, false);
    let labels = slic3d(&still, &params).map_err(|e| e.to_string())?;
    let change = label_change_fraction(&labels);

    let moving = textured_video(6, 30, 40, true);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| slic3d(&moving, &SlicParams { k_target: 12, ..SlicParams::default() }))
    };
    let one = run(1).map_err(|e| e.to_string())?;
    let four = run(4).map_err(|e| e.to_string())?;
    check(
        change == 0.0 && is_partition(&labels) && is_partition(&one) && one == four,
        format!(
            "static change fraction {change}, k = {}, moving k = {}, 1 vs 4 threads identical: {}",
            labels.k(),
            one.k(),
            one == four
        ),
    )
}

fn round_trips() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let (t, h, w) = (rng.random_range(1..4), rng.random_range(1..7), rng.random_range(1..7));
        let signed = SignedMapSequence::new(
            "s",
            (0..t)
                .map(|_| SignedMapFrame::new(h, w, (0..h * w).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap())
                .collect(),
        )
        .unwrap();
        let once = normalize_extreme(&signed);
        if normalize_extreme(&once) != once {
            return Err("normalize_extreme not idempotent".into());
        }
        let (fake, real) = split_signed(&once).map_err(|e| e.to_string())?;
        for ((f, r), s) in fake.frames().iter().zip(real.frames()).zip(once.frames()) {
            if f.values().iter().zip(r.values()).zip(s.values()).any(|((a, b), v)| a - b != *v) {
                return Err("fake - real != input".into());
            }
        }
        let once = normalize_max(&fake);
        if normalize_max(&once) != once {
            return Err("normalize_max not idempotent".into());
        }
        let bytes = MaskPack::from_mask_sequence(&once).encode();
        let again = MaskPack::decode(&bytes).map_err(|e| e.to_string())?.encode();
        if bytes != again {
            return Err("MaskPack bytes changed on reload".into());
        }
    }
    Ok("200 random sequences".into())
}

fn smoke() -> Verdict {
    let start = Instant::now();
    let video = textured_video(16, 48, 48, true);
    let labels = slic3d(&video, &SlicParams { k_target: 24, ..SlicParams::default() }).map_err(|e| e.to_string())?;
    if !is_partition(&labels) {
        return Err("segmentation is not a partition".into());
    }
    let weights = ToyLinearWeights {
        bias: 0.1,
        weights: (0..labels.k()).map(|i| ((i * 7) % 5) as f64 / 2.0 - 1.0).collect(),
    };
    let predictor = ToyLinear::new(weights, labels.clone(), mean_color(&video)).map_err(|e| e.to_string())?;
    let mut cfg = ExplainConfig::new(500, 1);
    cfg.space = ScoreSpace::Logit;
    let result = explain_videowise(&video, &labels, &predictor, &cfg).map_err(|e| e.to_string())?;
    if result.efficiency_residual() > 1e-9 {
        return Err(format!("efficiency residual {}", result.efficiency_residual()));
    }
    let maps = shap_to_masks(&result, &labels, "smoke").map_err(|e| e.to_string())?;
    let normalized = normalize_extreme(&maps);
    if normalized.frames().iter().any(|f| f.max_abs() > 1.0) {
        return Err("normalized map exceeds 1".into());
    }
    let (fake, real) = split_signed(&normalized).map_err(|e| e.to_string())?;
    let half: Vec<MaskFrame> = fake
        .frames()
        .iter()
        .map(|f| xplmark_core::maskio::resize_bilinear(f, 24, 24).unwrap())
        .collect();
    let half = MaskSequence::new("smoke", half).unwrap();
    let merged = aggregate_multiscale(&[fake.clone(), half]).map_err(|e| e.to_string())?;
    let cfg = MetricsConfig::default();
    let videos: Vec<_> = [&fake, &real, &merged].iter().map(|s| evaluate_sequence(s, &cfg)).collect();
    for v in &videos {
        if !(0.0..=0.25).contains(&v.variance)
            || v.inter_frame.is_some_and(|x| x.abs() > 1.0)
            || v.intra_frame.is_some_and(|x| x.abs() > 1.0)
            || v.centredness.is_some_and(|x| !(0.0..=1.0).contains(&x))
        {
            return Err(format!("metric out of range: {v:?}"));
        }
    }
    pool(&videos).map_err(|e| e.to_string())?;
    let variance: f64 = fake.frames().iter().map(|f| frame_variance(f)).sum::<f64>() / 16.0;
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(120),
        format!("k = {}, fake-mask variance {variance:.4}, {elapsed:.2?}", labels.k()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("sign test table reproduction", table5),
        ("Bonferroni constant", bonferroni),
        ("vote percentages", table4),
        ("SHAP oracle equivalence", shap_oracle),
        ("SHAP linear recovery", shap_linear_recovery),
        ("metrics property suite", metrics_properties),
        ("pool filter", pool_filter),
        ("segmentation", segmentation),
        ("idempotence and round-trips", round_trips),
        ("end-to-end smoke", smoke),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
