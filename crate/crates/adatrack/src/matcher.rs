//! Anchor-based template matching: correlate the updated template features
//! against the coarse-ROI features and iteratively refine only the two box
//! corners; interior cells carry the bilinear interpolation of the corner
//! flows into the next lookup round.

use crate::error::{Error, Result};
use crate::features::{FeatureMap, STRIDE};
use crate::flow::{build_cost_volume, CostVolume};
use crate::geometry::{BBox, Point2};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct MatchParams<T> {
    /// Lookup radius in ROI cells.
    pub radius: usize,
    /// Softmax temperature shaping the sub-cell centroid around the peak.
    pub tau: T,
    /// Corner updates smaller than this snap to zero (cells).
    pub snap: T,
    /// Both corner deltas below this norm stop the iteration (cells).
    pub early_stop: T,
    /// Corner evidence aggregates this many cells per axis at each corner.
    pub corner_block: usize,
}

impl<T: Scalar> Default for MatchParams<T> {
    fn default() -> Self {
        MatchParams {
            radius: 4,
            tau: T::c(0.05),
            snap: T::c(1e-4),
            early_stop: T::c(0.05),
            corner_block: 3,
        }
    }
}

/// Outcome of the anchor matching.
#[derive(Debug, Clone)]
pub struct MatchResult<T> {
    /// Refined box in search-patch pixel coordinates.
    pub bbox: BBox<T>,
    /// Final top-left corner flow in pixels.
    pub corner_flow_tl: Point2<T>,
    /// Final bottom-right corner flow in pixels.
    pub corner_flow_br: Point2<T>,
    /// Mean template-cell correlation at the final flow, clamped to [0, 1].
    pub confidence: T,
    pub iterations_run: usize,
    /// Mean corner correlation after each iteration (diagnostic).
    pub score_trace: Vec<T>,
}

/// Axis-separable interpolation of the two corner flows at relative position
/// `(s, t)` in `[0, 1]^2`: `u` blends by the horizontal fraction only, `v`
/// by the vertical fraction only.
pub fn interpolate_corner_flow<T: Scalar>(
    tl: Point2<T>,
    br: Point2<T>,
    s: T,
    t: T,
) -> Point2<T> {
    Point2::new(tl.x + s * (br.x - tl.x), tl.y + t * (br.y - tl.y))
}

/// Match the template features inside the ROI feature grid starting from
/// `init_box` (ROI-patch pixel coordinates). The context features (same
/// extent as the ROI) act as a lookup-weight prior: ROI cells whose context
/// similarity to the template border falls below the median get half weight.
pub fn match_anchor<T: Scalar>(
    f_template: &FeatureMap<T>,
    f_roi: &FeatureMap<T>,
    f_context: &FeatureMap<T>,
    init_box: &BBox<T>,
    iters: usize,
    params: &MatchParams<T>,
) -> Result<MatchResult<T>> {
    if iters == 0 {
        return Err(Error::ZeroIterations);
    }
    if f_template.width() > f_roi.width() || f_template.height() > f_roi.height() {
        return Err(Error::TemplateExceedsSearch);
    }
    if f_context.width() != f_roi.width() || f_context.height() != f_roi.height() {
        return Err(Error::ExtentMismatch {
            expected_w: f_roi.width(),
            expected_h: f_roi.height(),
            got_w: f_context.width(),
            got_h: f_context.height(),
        });
    }
    // degenerate inputs: nothing to correlate against
    if f_roi.is_all_zero() || f_template.is_all_zero() {
        return Ok(MatchResult {
            bbox: *init_box,
            corner_flow_tl: Point2::default(),
            corner_flow_br: Point2::default(),
            confidence: T::zero(),
            iterations_run: 0,
            score_trace: Vec::new(),
        });
    }
    let volume = build_cost_volume(f_template, f_roi, 1)?;
    let prior = context_prior(f_template, f_context);
    let geom = Geometry::new(f_template, init_box);

    let mut tl = Point2::new(T::zero(), T::zero());
    let mut br = Point2::new(T::zero(), T::zero());
    let mut iterations_run = 0;
    let mut score_trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let d_tl = corner_delta(&volume, &geom, &prior, params, tl, br, Corner::TopLeft);
        let d_br = corner_delta(&volume, &geom, &prior, params, tl, br, Corner::BottomRight);
        tl = Point2::new(tl.x + d_tl.x, tl.y + d_tl.y);
        br = Point2::new(br.x + d_br.x, br.y + d_br.y);
        iterations_run += 1;
        score_trace.push(corner_score(&volume, &geom, tl, br));
        if d_tl.norm() < params.early_stop && d_br.norm() < params.early_stop {
            break;
        }
    }

    let stride = T::of(STRIDE);
    let corner_flow_tl = Point2::new(tl.x * stride, tl.y * stride);
    let corner_flow_br = Point2::new(br.x * stride, br.y * stride);
    let tl_px = Point2::new(init_box.x + corner_flow_tl.x, init_box.y + corner_flow_tl.y);
    let br_px = Point2::new(
        init_box.right() + corner_flow_br.x,
        init_box.bottom() + corner_flow_br.y,
    );
    let min_ext = T::c(1e-3);
    let bbox = BBox::new(
        tl_px.x,
        tl_px.y,
        (br_px.x - tl_px.x).max(min_ext),
        (br_px.y - tl_px.y).max(min_ext),
    );

    // mean template-cell correlation at the final interpolated flow
    let mut acc = T::zero();
    for j in 0..geom.th {
        for i in 0..geom.tw {
            let pos = geom.cell_position(i, j, tl, br);
            let corr = volume.sample_dst(0, i, j, pos.x, pos.y);
            acc += corr.max(T::zero()).min(T::one());
        }
    }
    let confidence = acc / T::of(geom.tw * geom.th);

    Ok(MatchResult { bbox, corner_flow_tl, corner_flow_br, confidence, iterations_run, score_trace })
}

enum Corner {
    TopLeft,
    BottomRight,
}

/// Template-to-ROI placement derived from the init box.
struct Geometry<T> {
    tw: usize,
    th: usize,
    /// ROI cell coordinates of template cell (0, 0) under the init box.
    base_x: T,
    base_y: T,
    /// ROI cells per template cell.
    step_x: T,
    step_y: T,
}

impl<T: Scalar> Geometry<T> {
    fn new(f_template: &FeatureMap<T>, init_box: &BBox<T>) -> Self {
        let tw = f_template.width();
        let th = f_template.height();
        let stride = T::of(STRIDE);
        let half = T::c(0.5);
        let step_x = init_box.w / stride / T::of(tw);
        let step_y = init_box.h / stride / T::of(th);
        let base_x = init_box.x / stride + half * step_x - half;
        let base_y = init_box.y / stride + half * step_y - half;
        Geometry { tw, th, base_x, base_y, step_x, step_y }
    }

    fn fraction(&self, i: usize, j: usize) -> (T, T) {
        let s = if self.tw > 1 { T::of(i) / T::of(self.tw - 1) } else { T::zero() };
        let t = if self.th > 1 { T::of(j) / T::of(self.th - 1) } else { T::zero() };
        (s, t)
    }

    /// Current ROI cell position of template cell (i, j) under the
    /// interpolated corner flows.
    fn cell_position(&self, i: usize, j: usize, tl: Point2<T>, br: Point2<T>) -> Point2<T> {
        let (s, t) = self.fraction(i, j);
        let flow = interpolate_corner_flow(tl, br, s, t);
        Point2::new(
            self.base_x + T::of(i) * self.step_x + flow.x,
            self.base_y + T::of(j) * self.step_y + flow.y,
        )
    }
}

/// Per-ROI-cell lookup prior from the context features: cells whose context
/// similarity to the mean template-border descriptor is below the median get
/// half weight.
fn context_prior<T: Scalar>(f_template: &FeatureMap<T>, f_context: &FeatureMap<T>) -> Vec<T> {
    let tw = f_template.width();
    let th = f_template.height();
    let nc = f_template.channels();
    let mut border = vec![T::zero(); nc];
    let mut count = T::zero();
    for j in 0..th {
        for i in 0..tw {
            if i != 0 && i != tw - 1 && j != 0 && j != th - 1 {
                continue;
            }
            let cell = f_template.cell(i, j);
            for c in 0..nc {
                border[c] += cell[c];
            }
            count += T::one();
        }
    }
    let mut norm2 = T::zero();
    for v in &border {
        norm2 += *v * *v;
    }
    let _ = count;
    let norm = norm2.sqrt();
    let w = f_context.width();
    let h = f_context.height();
    if norm <= T::c(1e-9) || f_context.channels() != nc {
        return vec![T::one(); w * h];
    }
    for v in border.iter_mut() {
        *v /= norm;
    }
    let mut sims = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let cell = f_context.cell(x, y);
            let mut dot = T::zero();
            for c in 0..nc {
                dot += cell[c] * border[c];
            }
            sims[y * w + x] = dot;
        }
    }
    let mut sorted = sims.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    sims.iter().map(|s| if *s >= median { T::one() } else { T::c(0.5) }).collect()
}

/// Soft-argmax delta of one corner, aggregating the lookup scores of the
/// corner's cell block.
fn corner_delta<T: Scalar>(
    volume: &CostVolume<T>,
    geom: &Geometry<T>,
    prior: &[T],
    params: &MatchParams<T>,
    tl: Point2<T>,
    br: Point2<T>,
    corner: Corner,
) -> Point2<T> {
    let r = params.radius as isize;
    let cb = params.corner_block.max(1);
    let (dw, dh) = volume.dst_extent(0);
    let cells = corner_cells(geom, cb, &corner);

    // Every block cell casts an independent vote: the soft-argmax of its own
    // correlation neighborhood on the integer lattice around its rounded
    // position, refined per axis by an asymmetric-slope tent fit. The corner
    // delta is the component-wise median of the votes, which single
    // false-peak locks cannot sway. Votes are relative to current positions,
    // so a converged corner reproduces a zero median exactly.
    let side = (2 * r + 1) as usize;
    let mut votes_x: Vec<T> = Vec::with_capacity(cells.len());
    let mut votes_y: Vec<T> = Vec::with_capacity(cells.len());
    let mut scores = vec![T::zero(); side * side];
    for &(i, j) in &cells {
        let pos = geom.cell_position(i, j, tl, br);
        let qx = (pos.x.round().as_f64() as isize).clamp(0, dw as isize - 1);
        let qy = (pos.y.round().as_f64() as isize).clamp(0, dh as isize - 1);
        // low-prior cells carry a small log-prior penalty in peak selection,
        // so context only breaks near-ties, never overrules a real peak
        let mut best = (0isize, 0isize);
        let mut best_sel = T::neg_infinity();
        for dy in -r..=r {
            for dx in -r..=r {
                let cx = (qx + dx).clamp(0, dw as isize - 1) as usize;
                let cy = (qy + dy).clamp(0, dh as isize - 1) as usize;
                let s = volume.at(0, i, j, cx, cy);
                scores[((dy + r) as usize) * side + (dx + r) as usize] = s;
                let sel = s + params.tau * prior[cy * dw + cx].ln();
                if sel > best_sel {
                    best_sel = sel;
                    best = (dx, dy);
                }
            }
        }
        let sample = |dx: isize, dy: isize| -> T {
            let cx = dx.clamp(-r, r);
            let cy = dy.clamp(-r, r);
            scores[((cy + r) as usize) * side + (cx + r) as usize]
        };
        let s_peak = sample(best.0, best.1);
        // Asymmetric-slope tent fit through the peak: the outer samples
        // estimate the two fall-off slopes, so a peak sitting exactly on the
        // lattice yields offset zero even when correlation decays faster on
        // one side (as it does at template boundaries). Profiles that do not
        // decay away from the peak are off-peak noise and vote integer.
        let tent = |sm2: T, sm1: T, sp1: T, sp2: T| -> T {
            let eps = T::c(1e-6);
            let a_pos = sp1 - sp2;
            let a_neg = sm1 - sm2;
            if s_peak <= eps
                || s_peak < sp1
                || s_peak < sm1
                || a_pos <= eps
                || a_neg <= eps
                || sp1.min(sm1) < s_peak * T::c(0.5)
            {
                return T::zero();
            }
            let q = (sp1 - sm1 - (a_neg - a_pos)) / (a_pos + a_neg);
            q.max(-T::c(0.49)).min(T::c(0.49))
        };
        let cx_off = tent(
            sample(best.0 - 2, best.1),
            sample(best.0 - 1, best.1),
            sample(best.0 + 1, best.1),
            sample(best.0 + 2, best.1),
        );
        let cy_off = tent(
            sample(best.0, best.1 - 2),
            sample(best.0, best.1 - 1),
            sample(best.0, best.1 + 1),
            sample(best.0, best.1 + 2),
        );
        votes_x.push(T::c((qx + best.0) as f64) + cx_off - pos.x);
        votes_y.push(T::c((qy + best.1) as f64) + cy_off - pos.y);
    }
    let median = |mut v: Vec<T>| -> T {
        v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let mut du = median(votes_x);
    let mut dv = median(votes_y);
    if du.abs() < params.snap {
        du = T::zero();
    }
    if dv.abs() < params.snap {
        dv = T::zero();
    }
    Point2::new(du, dv)
}

fn corner_cells<T: Scalar>(geom: &Geometry<T>, cb: usize, corner: &Corner) -> Vec<(usize, usize)> {
    let tw = geom.tw;
    let th = geom.th;
    let cb_x = cb.min(tw);
    let cb_y = cb.min(th);
    let mut cells = Vec::with_capacity(cb_x * cb_y);
    match corner {
        Corner::TopLeft => {
            for j in 0..cb_y {
                for i in 0..cb_x {
                    cells.push((i, j));
                }
            }
        }
        Corner::BottomRight => {
            for j in th - cb_y..th {
                for i in tw - cb_x..tw {
                    cells.push((i, j));
                }
            }
        }
    }
    cells
}

/// Mean correlation over both corner blocks at the current flows.
fn corner_score<T: Scalar>(
    volume: &CostVolume<T>,
    geom: &Geometry<T>,
    tl: Point2<T>,
    br: Point2<T>,
) -> T {
    let mut acc = T::zero();
    let mut n = T::zero();
    for corner in [Corner::TopLeft, Corner::BottomRight] {
        for (i, j) in corner_cells(geom, 2, &corner) {
            let pos = geom.cell_position(i, j, tl, br);
            acc += volume.sample_dst(0, i, j, pos.x, pos.y);
            n += T::one();
        }
    }
    acc / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit_map(w: usize, h: usize, seed: u64) -> FeatureMap<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = FeatureMap::new(w, h, 16);
        for v in m.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        m.normalize_cells();
        m
    }

    /// ROI containing an exact copy of the template at cell offset (ox, oy).
    fn paste(template: &FeatureMap<f64>, roi_w: usize, roi_h: usize, ox: usize, oy: usize, seed: u64)
        -> FeatureMap<f64>
    {
        let mut roi = random_unit_map(roi_w, roi_h, seed);
        for j in 0..template.height() {
            for i in 0..template.width() {
                let src = template.cell(i, j).to_vec();
                roi.cell_mut(ox + i, oy + j).copy_from_slice(&src);
            }
        }
        roi
    }

    #[test]
    fn exact_paste_is_fixed_point() {
        let template = random_unit_map(6, 6, 1);
        let roi = paste(&template, 16, 16, 5, 4, 2);
        let init = BBox::new(5.0 * 8.0, 4.0 * 8.0, 48.0, 48.0);
        let r = match_anchor(&template, &roi, &roi, &init, 8, &MatchParams::default()).unwrap();
        assert!(r.iterations_run <= 2, "iterations {}", r.iterations_run);
        assert!((r.bbox.x - init.x).abs() < 0.1);
        assert!((r.bbox.y - init.y).abs() < 0.1);
        assert!((r.bbox.w - init.w).abs() < 0.2);
        assert!((r.bbox.h - init.h).abs() < 0.2);
        assert!(r.confidence >= 0.95, "confidence {}", r.confidence);
    }

    #[test]
    fn displaced_paste_recovered() {
        let template = random_unit_map(6, 6, 3);
        // copy displaced by (+2, +1) cells = (+16, +8) px from the init box
        let roi = paste(&template, 20, 18, 7, 5, 4);
        let init = BBox::new(5.0 * 8.0, 4.0 * 8.0, 48.0, 48.0);
        let r = match_anchor(&template, &roi, &roi, &init, 8, &MatchParams::default()).unwrap();
        assert!((r.bbox.x - (init.x + 16.0)).abs() <= 1.0, "x {}", r.bbox.x);
        assert!((r.bbox.y - (init.y + 8.0)).abs() <= 1.0, "y {}", r.bbox.y);
        assert!((r.bbox.w - init.w).abs() <= 2.0);
        assert!((r.bbox.h - init.h).abs() <= 2.0);
    }

    #[test]
    fn textureless_roi_returns_init() {
        let template = random_unit_map(4, 4, 5);
        let roi = FeatureMap::<f64>::new(12, 12, 16);
        let ctx = FeatureMap::<f64>::new(12, 12, 16);
        let init = BBox::new(24.0, 24.0, 32.0, 32.0);
        let r = match_anchor(&template, &roi, &ctx, &init, 8, &MatchParams::default()).unwrap();
        assert_eq!(r.bbox, init);
        assert_eq!(r.confidence, 0.0);
        assert_eq!(r.iterations_run, 0);
    }

    #[test]
    fn corner_interpolation_matches_bilinear_blend() {
        let tl = Point2::new(2.0, -1.0);
        let br = Point2::new(-0.5, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let s: f64 = rng.gen_range(0.0..1.0);
            let t: f64 = rng.gen_range(0.0..1.0);
            let got = interpolate_corner_flow(tl, br, s, t);
            // brute-force bilinear blend with implied corners
            // TR = (br.u, tl.v), BL = (tl.u, br.v)
            let u = (1.0 - s) * (1.0 - t) * tl.x
                + s * (1.0 - t) * br.x
                + (1.0 - s) * t * tl.x
                + s * t * br.x;
            let v = (1.0 - s) * (1.0 - t) * tl.y
                + (1.0 - s) * t * br.y
                + s * (1.0 - t) * tl.y
                + s * t * br.y;
            assert_relative_eq!(got.x, u, epsilon = 1e-6);
            assert_relative_eq!(got.y, v, epsilon = 1e-6);
        }
    }

    #[test]
    fn monotone_corner_score_on_paste() {
        let template = random_unit_map(6, 6, 7);
        let roi = paste(&template, 20, 18, 6, 6, 8);
        let init = BBox::new(4.0 * 8.0, 4.0 * 8.0, 48.0, 48.0);
        let r = match_anchor(&template, &roi, &roi, &init, 8, &MatchParams::default()).unwrap();
        for k in 1..r.score_trace.len() {
            assert!(
                r.score_trace[k] >= r.score_trace[k - 1] - 1e-9,
                "trace {:?}",
                r.score_trace
            );
        }
    }

    #[test]
    fn bookkeeping_identity() {
        let template = random_unit_map(5, 5, 9);
        let roi = paste(&template, 18, 18, 7, 6, 10);
        let init = BBox::new(4.0 * 8.0, 4.0 * 8.0, 40.0, 40.0);
        let r = match_anchor(&template, &roi, &roi, &init, 6, &MatchParams::default()).unwrap();
        assert_eq!(r.bbox.x, init.x + r.corner_flow_tl.x);
        assert_eq!(r.bbox.y, init.y + r.corner_flow_tl.y);
        assert_eq!(r.bbox.right(), init.right() + r.corner_flow_br.x);
        assert_eq!(r.bbox.bottom(), init.bottom() + r.corner_flow_br.y);
    }

    #[test]
    fn error_paths() {
        let template = random_unit_map(6, 6, 11);
        let roi = random_unit_map(4, 4, 12);
        let init = BBox::new(0.0, 0.0, 16.0, 16.0);
        assert!(matches!(
            match_anchor(&template, &roi, &roi, &init, 4, &MatchParams::default()),
            Err(Error::TemplateExceedsSearch)
        ));
        let roi = random_unit_map(12, 12, 13);
        assert!(matches!(
            match_anchor(&template, &roi, &roi, &init, 0, &MatchParams::default()),
            Err(Error::ZeroIterations)
        ));
        let ctx = random_unit_map(10, 12, 14);
        assert!(matches!(
            match_anchor(&template, &roi, &ctx, &init, 4, &MatchParams::default()),
            Err(Error::ExtentMismatch { .. })
        ));
    }
}
