//! Command-line surface: generate synthetic corpora, run tracking, evaluate
//! trajectories, run cycle-consistency self-checks and render overlays.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 internal invariant
//! violation.

mod io;
mod overlay;
mod spec;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use adatrack::eval::{cycle_check, metric_suite, metrics_report, GtEntry};
use adatrack::geometry::BBox;
use adatrack::tracker::{TrackResult, TrackStatus, Tracker, TrackerConfig};

#[derive(Parser)]
#[command(name = "adatrack", version, about = "Deterministic patch tracker for deformable regions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequence with ground-truth sidecars.
    Synth {
        /// JSON generator spec.
        #[arg(long)]
        spec: PathBuf,
        /// Output sequence directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Track a box through a sequence directory.
    Track {
        /// Sequence directory with %06d.png frames.
        #[arg(long)]
        seq: PathBuf,
        /// Initial box as `x,y,w,h` on frame 0.
        #[arg(long)]
        init_box: String,
        /// Tracker config JSON (flat object of config field names).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pipeline mode: inter_frame_only, template_only or full.
        #[arg(long)]
        mode: Option<String>,
        /// Template fusion weight.
        #[arg(long)]
        alpha: Option<f32>,
        /// Occlusion threshold.
        #[arg(long)]
        beta: Option<f32>,
        /// Flow refinement iterations per pyramid level.
        #[arg(long)]
        iters: Option<usize>,
        /// Output trajectory CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predicted trajectory against ground truth.
    Eval {
        /// Prediction CSV from `track`.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth CSV (`boxes_gt.csv`).
        #[arg(long)]
        gt: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sequence name in the report (defaults to the pred file stem).
        #[arg(long)]
        name: Option<String>,
    },
    /// Render frames with prediction (and ground-truth) box outlines.
    Overlay {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cycle-consistency check over a sequence and print residuals.
    Selfcheck {
        #[arg(long)]
        seq: PathBuf,
        /// Initial box `x,y,w,h`; required when the sequence has no
        /// ground-truth boxes.
        #[arg(long)]
        init_box: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Evaluate every n-th triple.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => {}
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
        Err(_) => {
            eprintln!("error: internal invariant violation");
            std::process::exit(3);
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { spec, out, seed } => cmd_synth(&spec, &out, seed),
        Command::Track { seq, init_box, config, mode, alpha, beta, iters, out } => {
            let cfg = build_config(config.as_deref(), mode.as_deref(), alpha, beta, iters)?;
            cmd_track(&seq, &init_box, cfg, &out)
        }
        Command::Eval { pred, gt, out, name } => cmd_eval(&pred, &gt, out.as_deref(), name),
        Command::Overlay { seq, pred, out } => cmd_overlay(&seq, &pred, &out),
        Command::Selfcheck { seq, init_box, config, stride } => {
            let cfg = build_config(config.as_deref(), None, None, None, None)?;
            cmd_selfcheck(&seq, init_box.as_deref(), cfg, stride.max(1))
        }
    }
}

fn build_config(
    config: Option<&Path>,
    mode: Option<&str>,
    alpha: Option<f32>,
    beta: Option<f32>,
    iters: Option<usize>,
) -> Result<TrackerConfig<f32>> {
    let mut cfg = TrackerConfig::default();
    if let Some(path) = config {
        spec::ConfigFile::load(path)?.apply(&mut cfg)?;
    }
    if let Some(m) = mode {
        cfg.mode = spec::parse_mode(m)?;
    }
    if let Some(a) = alpha {
        cfg.alpha = a;
    }
    if let Some(b) = beta {
        cfg.beta = b;
    }
    if let Some(i) = iters {
        cfg.flow_iters = i;
    }
    Ok(cfg)
}

fn parse_box(text: &str) -> Result<BBox<f32>> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        bail!("init box must be x,y,w,h");
    }
    let nums: Vec<f32> = parts
        .iter()
        .map(|p| p.trim().parse::<f32>())
        .collect::<std::result::Result<_, _>>()
        .context("init box must be numeric x,y,w,h")?;
    if nums[2] <= 0.0 || nums[3] <= 0.0 {
        bail!("init box extents must be positive");
    }
    Ok(BBox::new(nums[0], nums[1], nums[2], nums[3]))
}

fn cmd_synth(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let raw: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(spec_path)
            .with_context(|| format!("cannot read spec file {}", spec_path.display()))?,
    )
    .with_context(|| format!("invalid spec file {}", spec_path.display()))?;
    let spec = spec::SpecFile::load(spec_path)?;
    let synth_spec = spec.into_synth_spec(seed)?;
    let frames = adatrack::synth::generate(&synth_spec)?;

    std::fs::create_dir_all(out)?;
    std::fs::create_dir_all(out.join("flow"))?;

    // frame encoding parallelized under the worker cap
    let cap = io::thread_cap();
    let chunk = frames.len().div_ceil(cap);
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for (ci, chunk_frames) in frames.chunks(chunk).enumerate() {
            let out = out.to_path_buf();
            handles.push(scope.spawn(move || -> Result<()> {
                for (j, f) in chunk_frames.iter().enumerate() {
                    io::save_gray(&io::frame_path(&out, ci * chunk + j), &f.image)?;
                }
                Ok(())
            }));
        }
        for h in handles {
            h.join().map_err(|_| anyhow!("frame writer panicked"))??;
        }
        Ok(())
    })?;

    let gt_rows: Vec<(usize, BBox<f32>, bool, f32)> = frames
        .iter()
        .enumerate()
        .map(|(t, f)| (t, f.gt_box, f.visible(), f.gt_box_occluded_fraction))
        .collect();
    std::fs::write(out.join("boxes_gt.csv"), io::format_gt(&gt_rows))?;

    for (t, f) in frames.iter().enumerate().skip(1) {
        let path = out.join("flow").join(format!("{t:06}.adfl"));
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        adatrack::flow::write_flow(&f.gt_flow_from_prev, &mut file)?;
        file.flush()?;
    }

    let meta = serde_json::json!({
        "width": synth_spec.width,
        "height": synth_spec.height,
        "frames": synth_spec.frames,
        "seed": synth_spec.seed,
        "spec": raw,
    });
    std::fs::write(out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    println!("wrote {} frames to {}", frames.len(), out.display());
    Ok(())
}

fn cmd_track(seq: &Path, init_box: &str, cfg: TrackerConfig<f32>, out: &Path) -> Result<()> {
    let n = io::count_frames(seq)?;
    if n < 2 {
        bail!("sequence needs at least 2 frames, found {n}");
    }
    let b0 = parse_box(init_box)?;
    let frame0 = io::load_gray(&io::frame_path(seq, 0))?;
    let mut tracker = Tracker::init(&frame0, b0, cfg)?;
    let mut results = Vec::with_capacity(n - 1);
    for t in 1..n {
        let frame = io::load_gray(&io::frame_path(seq, t))?;
        results.push(tracker.step(&frame)?);
    }
    std::fs::write(out, io::format_predictions(&results))?;
    println!("tracked {} frames, wrote {}", n - 1, out.display());
    Ok(())
}

fn cmd_eval(pred: &Path, gt: &Path, out: Option<&Path>, name: Option<String>) -> Result<()> {
    let pred_text = std::fs::read_to_string(pred)
        .with_context(|| format!("cannot read {}", pred.display()))?;
    let predictions = io::parse_predictions(&pred_text)?;
    if predictions.is_empty() {
        bail!("prediction file {} has no rows", pred.display());
    }
    let gt_text =
        std::fs::read_to_string(gt).with_context(|| format!("cannot read {}", gt.display()))?;
    let gt_rows: BTreeMap<usize, GtEntry<f32>> = io::parse_gt(&gt_text)?.into_iter().collect();
    let mut gt_aligned = Vec::with_capacity(predictions.len());
    for p in &predictions {
        match gt_rows.get(&p.frame_index) {
            Some(entry) => gt_aligned.push(*entry),
            None => bail!("ground truth has no frame {}", p.frame_index),
        }
    }
    let metrics = metric_suite(&predictions, &gt_aligned)?;
    let seq_name = name.unwrap_or_else(|| {
        pred.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "seq".into())
    });
    let report = metrics_report(&[(seq_name, metrics)]);
    print!("{report}");
    if let Some(path) = out {
        std::fs::write(path, &report)?;
    }
    Ok(())
}

fn cmd_overlay(seq: &Path, pred: &Path, out: &Path) -> Result<()> {
    let n = io::count_frames(seq)?;
    let pred_text = std::fs::read_to_string(pred)
        .with_context(|| format!("cannot read {}", pred.display()))?;
    let by_frame: BTreeMap<usize, TrackResult<f32>> =
        io::parse_predictions(&pred_text)?.into_iter().map(|r| (r.frame_index, r)).collect();
    let gt_path = seq.join("boxes_gt.csv");
    let gt_by_frame: BTreeMap<usize, GtEntry<f32>> = if gt_path.exists() {
        io::parse_gt(&std::fs::read_to_string(&gt_path)?)?.into_iter().collect()
    } else {
        BTreeMap::new()
    };
    std::fs::create_dir_all(out)?;
    for t in 0..n {
        let mut frame = io::load_rgb(&io::frame_path(seq, t))?;
        if let Some(gt) = gt_by_frame.get(&t) {
            overlay::draw_rect(&mut frame, &gt.bbox, overlay::GT_COLOR);
        }
        match by_frame.get(&t) {
            Some(r) => match (&r.status, r.bbox.as_ref()) {
                (TrackStatus::Tracked, Some(b)) => {
                    overlay::draw_rect(&mut frame, b, overlay::PRED_COLOR);
                }
                _ => overlay::draw_occlusion_marker(&mut frame, overlay::OCCLUDED_COLOR),
            },
            None => {}
        }
        frame
            .save(io::frame_path(out, t))
            .with_context(|| format!("cannot write frame {t}"))?;
    }
    println!("wrote {} overlay frames to {}", n, out.display());
    Ok(())
}

fn cmd_selfcheck(
    seq: &Path,
    init_box: Option<&str>,
    cfg: TrackerConfig<f32>,
    stride: usize,
) -> Result<()> {
    let n = io::count_frames(seq)?;
    if n < 3 {
        bail!("selfcheck needs at least 3 frames, found {n}");
    }
    let frames: Vec<_> = (0..n)
        .map(|t| io::load_gray(&io::frame_path(seq, t)))
        .collect::<Result<_>>()?;
    // per-frame reference boxes: ground truth when present, otherwise the
    // tracker's own trajectory from the given init box
    let gt_path = seq.join("boxes_gt.csv");
    let boxes: Vec<BBox<f32>> = if gt_path.exists() {
        let rows: BTreeMap<usize, GtEntry<f32>> =
            io::parse_gt(&std::fs::read_to_string(&gt_path)?)?.into_iter().collect();
        (0..n)
            .map(|t| rows.get(&t).map(|e| e.bbox).ok_or_else(|| anyhow!("gt missing frame {t}")))
            .collect::<Result<_>>()?
    } else {
        let b0 = parse_box(init_box.ok_or_else(|| {
            anyhow!("sequence has no boxes_gt.csv; pass --init-box to track a reference")
        })?)?;
        let mut tracker = Tracker::init(&frames[0], b0, cfg.clone())?;
        let mut boxes = vec![b0];
        for frame in &frames[1..] {
            let r = tracker.step(frame)?;
            boxes.push(r.bbox.unwrap_or(*boxes.last().unwrap()));
        }
        boxes
    };

    println!("t,giou_term,l1_term,recon_term");
    let mut sums = [0f32; 3];
    let mut count = 0f32;
    let mut t = 1usize;
    while t + 1 < n {
        let triple = [frames[t - 1].clone(), frames[t].clone(), frames[t + 1].clone()];
        let report = cycle_check(&triple, boxes[t - 1], &cfg)?;
        println!(
            "{t},{:.4},{:.4},{:.4}",
            report.giou_term, report.l1_term, report.recon_term
        );
        sums[0] += report.giou_term;
        sums[1] += report.l1_term;
        sums[2] += report.recon_term;
        count += 1.0;
        t += stride;
    }
    println!(
        "MEAN,{:.4},{:.4},{:.4}",
        sums[0] / count,
        sums[1] / count,
        sums[2] / count
    );
    Ok(())
}
