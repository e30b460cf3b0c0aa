//! Sequence directories, PNG frames and trajectory CSV files.
//!
//! A sequence directory holds frames named `000000.png`, `000001.png`, ...
//! (8-bit, contiguous from 0, equal dimensions), an optional `boxes_gt.csv`,
//! optional ground-truth flow dumps under `flow/`, and a `meta.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use adatrack::eval::GtEntry;
use adatrack::geometry::BBox;
use adatrack::image::Image;
use adatrack::tracker::{TrackResult, TrackStatus};

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("{index:06}.png"))
}

/// Count contiguous frames starting at 000000.png.
pub fn count_frames(dir: &Path) -> Result<usize> {
    let mut n = 0;
    while frame_path(dir, n).exists() {
        n += 1;
    }
    if n == 0 {
        bail!("no frames found in {}", dir.display());
    }
    Ok(n)
}

pub fn load_gray(path: &Path) -> Result<Image<f32>> {
    let img = image::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let gray = img.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data = gray.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    Ok(Image::from_vec(w, h, 1, data))
}

pub fn load_rgb(path: &Path) -> Result<image::RgbImage> {
    Ok(image::open(path).with_context(|| format!("cannot read {}", path.display()))?.to_rgb8())
}

pub fn save_gray(path: &Path, img: &Image<f32>) -> Result<()> {
    let luma = img.to_luma();
    let mut out = image::GrayImage::new(img.width() as u32, img.height() as u32);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = (luma.get(x, y, 0).clamp(0.0, 1.0) * 255.0).round() as u8;
            out.put_pixel(x as u32, y as u32, image::Luma([v]));
        }
    }
    out.save(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn fmt_field(v: f32) -> String {
    format!("{v:.3}")
}

/// `frame,x,y,w,h,status,occ_fraction,confidence` with status T/O and empty
/// box fields on occluded frames.
pub fn format_predictions(results: &[TrackResult<f32>]) -> String {
    let mut out = String::from("frame,x,y,w,h,status,occ_fraction,confidence\n");
    for r in results {
        match (&r.status, r.bbox.as_ref()) {
            (TrackStatus::Tracked, Some(b)) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},T,{},{}",
                    r.frame_index,
                    fmt_field(b.x),
                    fmt_field(b.y),
                    fmt_field(b.w),
                    fmt_field(b.h),
                    fmt_field(r.occlusion_fraction),
                    fmt_field(r.match_confidence),
                );
            }
            _ => {
                let _ = writeln!(
                    out,
                    "{},,,,,O,{},{}",
                    r.frame_index,
                    fmt_field(r.occlusion_fraction),
                    fmt_field(r.match_confidence),
                );
            }
        }
    }
    out
}

pub fn parse_predictions(text: &str) -> Result<Vec<TrackResult<f32>>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("frame,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            bail!("line {}: expected 8 fields, got {}", ln + 1, fields.len());
        }
        let frame_index: usize = fields[0].parse().with_context(|| format!("line {}", ln + 1))?;
        let occlusion_fraction: f32 =
            fields[6].parse().with_context(|| format!("line {}", ln + 1))?;
        let match_confidence: f32 =
            fields[7].parse().with_context(|| format!("line {}", ln + 1))?;
        let result = match fields[5] {
            "T" => {
                let nums: Vec<f32> = fields[1..5]
                    .iter()
                    .map(|f| f.parse::<f32>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| format!("line {}", ln + 1))?;
                TrackResult {
                    frame_index,
                    bbox: Some(BBox::new(nums[0], nums[1], nums[2], nums[3])),
                    status: TrackStatus::Tracked,
                    occlusion_fraction,
                    match_confidence,
                }
            }
            "O" => TrackResult {
                frame_index,
                bbox: None,
                status: TrackStatus::Occluded,
                occlusion_fraction,
                match_confidence,
            },
            other => bail!("line {}: unknown status {other:?}", ln + 1),
        };
        out.push(result);
    }
    Ok(out)
}

/// `frame,x,y,w,h,visible,occ_frac` rows for ground-truth boxes.
pub fn format_gt(rows: &[(usize, BBox<f32>, bool, f32)]) -> String {
    let mut out = String::from("frame,x,y,w,h,visible,occ_frac\n");
    for (frame, b, visible, occ) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            frame,
            fmt_field(b.x),
            fmt_field(b.y),
            fmt_field(b.w),
            fmt_field(b.h),
            u8::from(*visible),
            fmt_field(*occ),
        );
    }
    out
}

/// Parse ground truth indexed by frame number.
pub fn parse_gt(text: &str) -> Result<Vec<(usize, GtEntry<f32>)>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("frame,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 6 {
            bail!("line {}: expected at least 6 fields", ln + 1);
        }
        let frame: usize = fields[0].parse().with_context(|| format!("line {}", ln + 1))?;
        let nums: Vec<f32> = fields[1..5]
            .iter()
            .map(|f| f.parse::<f32>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("line {}", ln + 1))?;
        let visible = fields[5] != "0";
        out.push((
            frame,
            GtEntry { bbox: BBox::new(nums[0], nums[1], nums[2], nums[3]), visible },
        ));
    }
    Ok(out)
}

/// Worker cap from `ADATRACK_THREADS` (defaults to the CPU count, capped at 8).
pub fn thread_cap() -> usize {
    if let Ok(v) = std::env::var("ADATRACK_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}
