//! Trajectory metrics and loss-style diagnostics.
//!
//! Metric definitions (fixed here so results are reproducible): a frame is a
//! success when the tracker reported a box and its IoU with the ground truth
//! is positive; frames whose ground truth is occluded are skipped entirely.
//! `rob2d` is the success fraction over visible frames, `acc2d` the mean IoU
//! over successes, `err2d` the mean and standard deviation of the center
//! distance over successes, and `eao` averages per-frame IoU from anchor
//! starts at 0, N/4 and N/2 with every frame from the first failure onward
//! scored zero.
//!
//! The loss quantities mirror the tracking-objective structure (cycle
//! consistency, augmentation, occlusion-aware photometric, edge-weighted
//! smoothness) as pure diagnostics; nothing here takes gradients.

use crate::error::{Error, Result};
use crate::flow::{ConfidenceMap, FlowField, OcclusionMap};
use crate::geometry::BBox;
use crate::image::Image;
use crate::scalar::Scalar;
use crate::tracker::{Tracker, TrackResult, TrackStatus, TrackerConfig};

/// Ground-truth entry for one frame.
#[derive(Debug, Clone, Copy)]
pub struct GtEntry<T> {
    pub bbox: BBox<T>,
    pub visible: bool,
}

/// Scores of one predicted trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics2D<T> {
    pub acc2d: T,
    pub rob2d: T,
    pub err2d_mean: T,
    pub err2d_std: T,
    pub eao: T,
}

/// Score a trajectory against per-frame ground truth (equal lengths).
pub fn metric_suite<T: Scalar>(
    pred: &[TrackResult<T>],
    gt: &[GtEntry<T>],
) -> Result<Metrics2D<T>> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::ExtentMismatch {
            expected_w: gt.len(),
            expected_h: 1,
            got_w: pred.len(),
            got_h: 1,
        });
    }
    let mut visible = 0usize;
    let mut successes = 0usize;
    let mut iou_sum = T::zero();
    let mut dists: Vec<T> = Vec::new();
    for (p, g) in pred.iter().zip(gt.iter()) {
        if !g.visible {
            continue;
        }
        visible += 1;
        if let (TrackStatus::Tracked, Some(b)) = (p.status, p.bbox.as_ref()) {
            let iou = b.iou(&g.bbox);
            if iou > T::zero() {
                successes += 1;
                iou_sum += iou;
                dists.push(b.center_distance(&g.bbox));
            }
        }
    }
    let rob2d =
        if visible > 0 { T::of(successes) / T::of(visible) } else { T::zero() };
    let acc2d = if successes > 0 { iou_sum / T::of(successes) } else { T::zero() };
    let (err_mean, err_std) = mean_std(&dists);
    let eao = expected_average_overlap(pred, gt);
    Ok(Metrics2D { acc2d, rob2d, err2d_mean: err_mean, err2d_std: err_std, eao })
}

fn mean_std<T: Scalar>(vals: &[T]) -> (T, T) {
    if vals.is_empty() {
        return (T::zero(), T::zero());
    }
    let n = T::of(vals.len());
    let mut mean = T::zero();
    for v in vals {
        mean += *v;
    }
    mean /= n;
    let mut var = T::zero();
    for v in vals {
        let d = *v - mean;
        var += d * d;
    }
    (mean, (var / n).sqrt())
}

fn expected_average_overlap<T: Scalar>(pred: &[TrackResult<T>], gt: &[GtEntry<T>]) -> T {
    let n = pred.len();
    let anchors = [0usize, n / 4, n / 2];
    let mut total = T::zero();
    let mut used = 0usize;
    for &a in &anchors {
        if a >= n {
            continue;
        }
        let mut acc = T::zero();
        let mut counted = 0usize;
        let mut failed = false;
        for i in a..n {
            if !gt[i].visible {
                continue;
            }
            counted += 1;
            if failed {
                continue;
            }
            let iou = match (&pred[i].status, pred[i].bbox.as_ref()) {
                (TrackStatus::Tracked, Some(b)) => b.iou(&gt[i].bbox),
                _ => T::zero(),
            };
            if iou > T::zero() {
                acc += iou;
            } else {
                failed = true;
            }
        }
        if counted > 0 {
            total += acc / T::of(counted);
            used += 1;
        }
    }
    if used > 0 {
        total / T::of(used)
    } else {
        T::zero()
    }
}

/// One line of the metrics report: `name,acc2d,rob2d,err2d_mean,err2d_std,eao`
/// with three decimals.
pub fn metrics_line<T: Scalar>(name: &str, m: &Metrics2D<T>) -> String {
    format!(
        "{name},{:.3},{:.3},{:.3},{:.3},{:.3}",
        m.acc2d.as_f64(),
        m.rob2d.as_f64(),
        m.err2d_mean.as_f64(),
        m.err2d_std.as_f64(),
        m.eao.as_f64()
    )
}

/// Full report: one line per sequence plus an `ALL` aggregate (field means).
pub fn metrics_report<T: Scalar>(entries: &[(String, Metrics2D<T>)]) -> String {
    let mut out = String::from("name,acc2d,rob2d,err2d_mean,err2d_std,eao\n");
    let mut agg = [0f64; 5];
    for (name, m) in entries {
        out.push_str(&metrics_line(name, m));
        out.push('\n');
        agg[0] += m.acc2d.as_f64();
        agg[1] += m.rob2d.as_f64();
        agg[2] += m.err2d_mean.as_f64();
        agg[3] += m.err2d_std.as_f64();
        agg[4] += m.eao.as_f64();
    }
    let n = entries.len().max(1) as f64;
    out.push_str(&format!(
        "ALL,{:.3},{:.3},{:.3},{:.3},{:.3}\n",
        agg[0] / n,
        agg[1] / n,
        agg[2] / n,
        agg[3] / n,
        agg[4] / n
    ));
    out
}

/// Cycle-consistency residuals of one forward-backward tracking loop.
#[derive(Debug, Clone, Copy)]
pub struct CycleReport<T> {
    pub b_cycle: BBox<T>,
    /// `1 - giou(b_cycle, b)`.
    pub giou_term: T,
    /// Mean absolute corner difference normalized by the box size.
    pub l1_term: T,
    /// Mean absolute difference between the template re-cropped at the
    /// cycled box and the original template.
    pub recon_term: T,
}

impl<T: Scalar> CycleReport<T> {
    pub fn l_cycle(&self) -> T {
        self.giou_term + self.l1_term + self.recon_term
    }
}

/// Track `b` forward through three consecutive frames, then backward to the
/// start, and measure how far the returned box and template drifted.
pub fn cycle_check<T: Scalar>(
    frames: &[Image<T>; 3],
    b: BBox<T>,
    config: &TrackerConfig<T>,
) -> Result<CycleReport<T>> {
    let forward_end = run_leg(&frames[0], &[&frames[1], &frames[2]], b, config)?;
    let b_cycle = run_leg(&frames[2], &[&frames[1], &frames[0]], forward_end, config)?;
    let giou_term = T::one() - b_cycle.giou(&b);
    let l1_term = corner_l1(&b_cycle, &b);
    let size = crate::tracker::TEMPLATE_SIZE;
    let p = frames[0].crop_resample(&b, size, size);
    let p_cycle = frames[0].crop_resample(&b_cycle, size, size);
    let mut acc = T::zero();
    for (a, c) in p.data().iter().zip(p_cycle.data().iter()) {
        acc += (*a - *c).abs();
    }
    let recon_term = acc / T::of(p.data().len());
    Ok(CycleReport { b_cycle, giou_term, l1_term, recon_term })
}

/// Mean absolute corner-coordinate difference, normalized by the mean box
/// extent.
pub fn corner_l1<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let quarter = T::c(0.25);
    let sum = (a.x - b.x).abs()
        + (a.y - b.y).abs()
        + (a.right() - b.right()).abs()
        + (a.bottom() - b.bottom()).abs();
    let scale = (b.w + b.h) * T::c(0.5);
    sum * quarter / scale
}

/// Run one leg of the cycle: init at `start`, step through `rest`, holding
/// the previous box through occluded frames.
fn run_leg<T: Scalar>(
    start: &Image<T>,
    rest: &[&Image<T>],
    b: BBox<T>,
    config: &TrackerConfig<T>,
) -> Result<BBox<T>> {
    let mut tracker = Tracker::init(start, b, config.clone())?;
    let mut last = b;
    for frame in rest {
        let r = tracker.step(frame)?;
        if let Some(bb) = r.bbox {
            last = bb;
        }
    }
    Ok(last)
}

/// Loss weights of the combined diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights<T> {
    pub cycle: T,
    pub aug: T,
    pub photo: T,
    pub smooth: T,
}

impl<T: Scalar> Default for LossWeights<T> {
    fn default() -> Self {
        LossWeights { cycle: T::c(0.5), aug: T::c(0.1), photo: T::c(0.1), smooth: T::c(0.001) }
    }
}

/// Combined diagnostic losses.
#[derive(Debug, Clone, Copy)]
pub struct LossReport<T> {
    pub l_cycle: T,
    pub giou_term: T,
    pub l1_term: T,
    pub recon_term: T,
    pub l_aug: T,
    pub l_photo: T,
    pub l_smooth: T,
    pub total: T,
}

impl<T: Scalar> LossReport<T> {
    /// Assemble the weighted total from raw components.
    pub fn from_components(
        l_cycle: T,
        l_aug: T,
        l_photo: T,
        l_smooth: T,
        w: &LossWeights<T>,
    ) -> Self {
        LossReport {
            l_cycle,
            giou_term: T::zero(),
            l1_term: T::zero(),
            recon_term: T::zero(),
            l_aug,
            l_photo,
            l_smooth,
            total: w.cycle * l_cycle + w.aug * l_aug + w.photo * l_photo + w.smooth * l_smooth,
        }
    }
}

const CHARBONNIER_EPS: f64 = 1e-3;
const EDGE_WEIGHT_SCALE: f64 = 10.0;

/// Occlusion-aware photometric, smoothness, augmentation and cycle
/// diagnostics combined per the configured weights. `conf` is accepted for
/// interface parity with the flow backend; the diagnostics are unweighted.
#[allow(clippy::too_many_arguments)]
pub fn diagnostic_losses<T: Scalar>(
    flow: &FlowField<T>,
    conf: &ConfidenceMap<T>,
    occ_f: &OcclusionMap,
    occ_b: &OcclusionMap,
    img_pair: (&Image<T>, &Image<T>),
    cycle: &CycleReport<T>,
    aug: (&BBox<T>, &BBox<T>),
    weights: &LossWeights<T>,
) -> Result<LossReport<T>> {
    let (prev, cur) = img_pair;
    if flow.width() != prev.width()
        || flow.height() != prev.height()
        || prev.width() != cur.width()
        || prev.height() != cur.height()
        || occ_f.width() != flow.width()
        || occ_f.height() != flow.height()
    {
        return Err(Error::ExtentMismatch {
            expected_w: prev.width(),
            expected_h: prev.height(),
            got_w: flow.width(),
            got_h: flow.height(),
        });
    }
    let _ = conf;
    let l_photo = photometric_loss(flow, occ_f, occ_b, prev, cur);
    let l_smooth = smoothness_loss(flow, prev);
    let (pred, pseudo) = aug;
    let l_aug = (T::one() - pred.giou(pseudo)) + corner_l1(pred, pseudo);
    let l_cycle = cycle.l_cycle();
    let mut report = LossReport::from_components(l_cycle, l_aug, l_photo, l_smooth, weights);
    report.giou_term = cycle.giou_term;
    report.l1_term = cycle.l1_term;
    report.recon_term = cycle.recon_term;
    Ok(report)
}

/// Zero-anchored Charbonnier penalty: exactly 0 at 0.
fn charbonnier<T: Scalar>(d: T) -> T {
    let eps = T::c(CHARBONNIER_EPS);
    (d * d + eps * eps).sqrt() - eps
}

fn photometric_loss<T: Scalar>(
    flow: &FlowField<T>,
    occ_f: &OcclusionMap,
    occ_b: &OcclusionMap,
    prev: &Image<T>,
    cur: &Image<T>,
) -> T {
    let gray_prev = prev.to_luma();
    let gray_cur = cur.to_luma();
    let w = flow.width();
    let h = flow.height();
    let max_x = T::of(w - 1);
    let max_y = T::of(h - 1);
    let mut acc = T::zero();
    let mut n = T::zero();
    for y in 0..h {
        for x in 0..w {
            if occ_f.at(x, y) {
                continue;
            }
            let (u, v) = flow.at(x, y);
            let tx = T::of(x) + u;
            let ty = T::of(y) + v;
            if tx < T::zero() || tx > max_x || ty < T::zero() || ty > max_y {
                continue;
            }
            let bx = (tx.round().as_f64() as usize).min(w - 1);
            let by = (ty.round().as_f64() as usize).min(h - 1);
            if occ_b.at(bx, by) {
                continue;
            }
            let d = gray_prev.get(x, y, 0) - gray_cur.sample(tx, ty, 0);
            acc += charbonnier(d);
            n += T::one();
        }
    }
    if n > T::zero() {
        acc / n
    } else {
        T::zero()
    }
}

/// Edge-weighted first-order smoothness: forward differences of the flow
/// weighted by `exp(-10 |grad I|)` of the previous image.
fn smoothness_loss<T: Scalar>(flow: &FlowField<T>, prev: &Image<T>) -> T {
    let gray = prev.to_luma();
    let w = flow.width();
    let h = flow.height();
    let scale = T::c(EDGE_WEIGHT_SCALE);
    let mut acc = T::zero();
    let mut n = T::zero();
    for y in 0..h {
        for x in 0..w {
            let gx = gray.get_clamped(x as isize + 1, y as isize, 0) - gray.get(x, y, 0);
            let gy = gray.get_clamped(x as isize, y as isize + 1, 0) - gray.get(x, y, 0);
            let weight = (-(gx.abs() + gy.abs()) * scale).exp();
            let (u, v) = flow.at(x, y);
            let mut grad = T::zero();
            if x + 1 < w {
                let (un, vn) = flow.at(x + 1, y);
                grad += (un - u).abs() + (vn - v).abs();
            }
            if y + 1 < h {
                let (un, vn) = flow.at(x, y + 1);
                grad += (un - u).abs() + (vn - v).abs();
            }
            acc += weight * grad;
            n += T::one();
        }
    }
    acc / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tracked<T: Scalar>(frame_index: usize, b: BBox<T>) -> TrackResult<T> {
        TrackResult {
            frame_index,
            bbox: Some(b),
            status: TrackStatus::Tracked,
            occlusion_fraction: T::zero(),
            match_confidence: T::one(),
        }
    }

    fn occluded<T: Scalar>(frame_index: usize) -> TrackResult<T> {
        TrackResult {
            frame_index,
            bbox: None,
            status: TrackStatus::Occluded,
            occlusion_fraction: T::one(),
            match_confidence: T::zero(),
        }
    }

    #[test]
    fn identity_metrics() {
        let gt: Vec<GtEntry<f64>> = (0..8)
            .map(|i| GtEntry { bbox: BBox::new(i as f64, 0.0, 10.0, 10.0), visible: true })
            .collect();
        let pred: Vec<TrackResult<f64>> =
            gt.iter().enumerate().map(|(i, g)| tracked(i + 1, g.bbox)).collect();
        let m = metric_suite(&pred, &gt).unwrap();
        assert_eq!(m.acc2d, 1.0);
        assert_eq!(m.rob2d, 1.0);
        assert_eq!(m.err2d_mean, 0.0);
        assert_eq!(m.err2d_std, 0.0);
        assert_eq!(m.eao, 1.0);
    }

    #[test]
    fn all_occluded_pred() {
        let gt: Vec<GtEntry<f64>> = (0..6)
            .map(|_| GtEntry { bbox: BBox::new(0.0, 0.0, 10.0, 10.0), visible: true })
            .collect();
        let pred: Vec<TrackResult<f64>> = (0..6).map(|i| occluded(i + 1)).collect();
        let m = metric_suite(&pred, &gt).unwrap();
        assert_eq!(m.rob2d, 0.0);
        assert_eq!(m.eao, 0.0);
    }

    #[test]
    fn half_failure_hand_computed() {
        // 10 frames: first 5 at IoU exactly 0.5, last 5 failed
        let gt: Vec<GtEntry<f64>> = (0..10)
            .map(|_| GtEntry { bbox: BBox::new(0.0, 0.0, 10.0, 10.0), visible: true })
            .collect();
        let mut pred: Vec<TrackResult<f64>> = Vec::new();
        for i in 0..5 {
            pred.push(tracked(i + 1, BBox::new(0.0, 0.0, 5.0, 10.0)));
        }
        for i in 5..10 {
            pred.push(occluded(i + 1));
        }
        let m = metric_suite(&pred, &gt).unwrap();
        assert_relative_eq!(m.rob2d, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.acc2d, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.err2d_mean, 2.5, epsilon = 1e-12);
        assert_relative_eq!(m.err2d_std, 0.0, epsilon = 1e-12);
        // anchors 0, 2, 5: 2.5/10 + 1.5/8 + 0, averaged
        assert_relative_eq!(m.eao, (0.25 + 0.1875 + 0.0) / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eao_monotone_in_frame_iou() {
        let gt: Vec<GtEntry<f64>> = (0..8)
            .map(|_| GtEntry { bbox: BBox::new(0.0, 0.0, 10.0, 10.0), visible: true })
            .collect();
        let mut pred: Vec<TrackResult<f64>> =
            (0..8).map(|i| tracked(i + 1, BBox::new(3.0, 0.0, 10.0, 10.0))).collect();
        let base = metric_suite(&pred, &gt).unwrap().eao;
        // improve frame 4's overlap
        pred[4] = tracked(5, BBox::new(1.0, 0.0, 10.0, 10.0));
        let better = metric_suite(&pred, &gt).unwrap().eao;
        assert!(better >= base);
    }

    #[test]
    fn invisible_frames_skipped() {
        let mut gt: Vec<GtEntry<f64>> = (0..6)
            .map(|_| GtEntry { bbox: BBox::new(0.0, 0.0, 10.0, 10.0), visible: true })
            .collect();
        gt[2].visible = false;
        let mut pred: Vec<TrackResult<f64>> =
            gt.iter().enumerate().map(|(i, g)| tracked(i + 1, g.bbox)).collect();
        pred[2] = occluded(3); // coincides with invisible gt, must not count
        let m = metric_suite(&pred, &gt).unwrap();
        assert_eq!(m.rob2d, 1.0);
        assert_eq!(m.eao, 1.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let gt: Vec<GtEntry<f64>> =
            vec![GtEntry { bbox: BBox::new(0.0, 0.0, 2.0, 2.0), visible: true }];
        assert!(metric_suite::<f64>(&[], &gt).is_err());
    }

    #[test]
    fn loss_arithmetic_paper_weights() {
        let w = LossWeights::<f64>::default();
        let r = LossReport::from_components(1.0, 1.0, 1.0, 1.0, &w);
        assert_relative_eq!(r.total, 0.701, epsilon = 1e-12);
        // linearity in each component
        for i in 0..4 {
            let mut c = [1.0f64; 4];
            c[i] += 0.25;
            let r2 = LossReport::from_components(c[0], c[1], c[2], c[3], &w);
            let lambda = [w.cycle, w.aug, w.photo, w.smooth][i];
            assert_relative_eq!(r2.total - r.total, lambda * 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn photometric_zero_on_identity() {
        let img = Image::<f64>::from_fn(32, 32, |x, y| ((x * 7 + y * 3) % 11) as f64 / 11.0);
        let flow = FlowField::zeros(32, 32);
        let occ = OcclusionMap::new(32, 32, false);
        let cycle = CycleReport {
            b_cycle: BBox::new(0.0, 0.0, 1.0, 1.0),
            giou_term: 0.0,
            l1_term: 0.0,
            recon_term: 0.0,
        };
        let b = BBox::new(0.0, 0.0, 4.0, 4.0);
        let conf = ConfidenceMap::new(32, 32, 1.0);
        let r = diagnostic_losses(
            &flow,
            &conf,
            &occ,
            &occ,
            (&img, &img),
            &cycle,
            (&b, &b),
            &LossWeights::default(),
        )
        .unwrap();
        assert_eq!(r.l_photo, 0.0);
        assert_eq!(r.l_smooth, 0.0);
        assert_eq!(r.l_aug, 0.0);
    }

    #[test]
    fn smoothness_zero_on_uniform_flow() {
        let img = Image::<f64>::from_fn(24, 24, |x, y| ((x + 2 * y) % 9) as f64 / 9.0);
        let flow = FlowField::from_fn(24, 24, |_, _| (5.0, -3.0));
        assert_eq!(smoothness_loss(&flow, &img), 0.0);
    }

    #[test]
    fn photometric_monotone_toward_truth() {
        // shifted pair: flow closer to the true (2, 0) scores lower
        let base = Image::<f64>::from_fn(48, 48, |x, y| {
            (((x as f64 * 0.37).sin() + (y as f64 * 0.53).cos()) * 0.25 + 0.5).clamp(0.0, 1.0)
        });
        let shifted = Image::<f64>::from_fn(48, 48, |x, y| {
            let sx = x as f64 - 2.0;
            (((sx * 0.37).sin() + (y as f64 * 0.53).cos()) * 0.25 + 0.5).clamp(0.0, 1.0)
        });
        let occ = OcclusionMap::new(48, 48, false);
        let losses: Vec<f64> = [0.0, 1.0, 2.0]
            .iter()
            .map(|s| {
                let flow = FlowField::from_fn(48, 48, |_, _| (*s, 0.0));
                photometric_loss(&flow, &occ, &occ, &base, &shifted)
            })
            .collect();
        assert!(losses[0] > losses[1], "{losses:?}");
        assert!(losses[1] > losses[2], "{losses:?}");
    }

    #[test]
    fn smoothness_zero_iff_piecewise_constant_on_smooth_regions() {
        let img = Image::<f64>::from_fn(24, 24, |_, _| 0.5);
        let mut flow = FlowField::from_fn(24, 24, |_, _| (1.0, 0.0));
        assert_eq!(smoothness_loss(&flow, &img), 0.0);
        flow.set(10, 10, 3.0, 0.0);
        assert!(smoothness_loss(&flow, &img) > 0.0);
    }
}
