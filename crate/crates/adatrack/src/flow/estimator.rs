//! Deterministic dense flow estimator.
//!
//! Coarse-to-fine over an image pyramid: at each level the stride-8 feature
//! grids of both images are correlated into a cost volume, and per-cell flow
//! is refined by moving to the soft-argmax of a correlation neighborhood
//! around the current estimate. Neighborhood scores are symmetrized with the
//! reverse-lookup term `C[x - d, x + f]`, which makes the self-correlation
//! neighborhood of an identical pair exactly even in `d`; together with the
//! sub-threshold snap this pins the identity pair to a bit-exact zero field.
//! Each level ends with one weighted-median smoothing pass. The finest cell
//! field is upsampled to pixel resolution and polished by a few dense
//! photometric (Lucas-Kanade style) steps for sub-cell accuracy; a zero
//! residual produces a zero update, so exact fixed points survive.
//!
//! Confidence per pixel is `exp(-|fb|^2 / sigma_c^2) * peak_ratio`, where
//! `fb` is the forward-backward residual and `peak_ratio` rates the
//! correlation peak against the strongest score outside its 3x3 surround.

use crate::error::{Error, Result};
use crate::features::{encode_with, FeatureMap, DEFAULT_CHANNELS, STRIDE};
use crate::flow::cost::{build_cost_volume, CostVolume};
use crate::flow::field::{ConfidenceMap, ConsistencyParams, FlowField};
use crate::image::Image;
use crate::scalar::Scalar;

/// Tuning knobs of the correlation-flow backend.
#[derive(Debug, Clone)]
pub struct FlowParams<T> {
    /// Image pyramid depth (each level halves the resolution).
    pub pyramid_levels: usize,
    /// Default soft-argmax iterations per level when the caller passes none.
    pub iters: usize,
    /// Lookup radius in cells.
    pub radius: usize,
    /// Softmax temperature shaping the sub-cell centroid around the peak.
    pub tau: T,
    /// Updates smaller than this (cells, per component) snap to zero.
    pub snap: T,
    /// Peak-ratio scale: `ratio = clamp((best - second) / peak_scale, 0, 1)`.
    pub peak_scale: T,
    /// Forward-backward residual scale for the confidence map, in pixels.
    pub sigma_c: T,
    /// Forward-backward occlusion thresholds.
    pub consistency: ConsistencyParams<T>,
    /// Dense photometric polish iterations at pixel resolution.
    pub lk_iters: usize,
    /// Photometric window half-size in pixels.
    pub lk_radius: usize,
    /// Feature channels used by the internal encoder.
    pub channels: usize,
}

impl<T: Scalar> Default for FlowParams<T> {
    fn default() -> Self {
        FlowParams {
            pyramid_levels: 3,
            iters: 4,
            radius: 4,
            tau: T::c(0.1),
            snap: T::c(1e-4),
            peak_scale: T::c(0.05),
            sigma_c: T::c(1.5),
            consistency: ConsistencyParams::default(),
            lk_iters: 3,
            lk_radius: 1,
            channels: DEFAULT_CHANNELS,
        }
    }
}

/// Forward and backward flow of an image pair with per-direction confidence.
#[derive(Debug, Clone)]
pub struct BidirectionalFlow<T> {
    pub forward: FlowField<T>,
    pub backward: FlowField<T>,
    pub conf_forward: ConfidenceMap<T>,
    pub conf_backward: ConfidenceMap<T>,
}

/// Pluggable dense flow backend. Anything honoring this contract can replace
/// the built-in estimator.
pub trait FlowEstimator<T: Scalar> {
    /// Dense flow from `src` to `dst` at pixel resolution plus a confidence
    /// map in `[0, 1]`. `iters` is the per-level refinement count.
    fn estimate_flow(
        &self,
        src: &Image<T>,
        dst: &Image<T>,
        iters: usize,
    ) -> Result<(FlowField<T>, ConfidenceMap<T>)>;

    /// Both directions at once. The default runs two independent estimates;
    /// backends may share work.
    fn estimate_pair(
        &self,
        src: &Image<T>,
        dst: &Image<T>,
        iters: usize,
    ) -> Result<BidirectionalFlow<T>> {
        let (forward, conf_forward) = self.estimate_flow(src, dst, iters)?;
        let (backward, conf_backward) = self.estimate_flow(dst, src, iters)?;
        Ok(BidirectionalFlow { forward, backward, conf_forward, conf_backward })
    }
}

/// Built-in correlation-volume estimator.
#[derive(Debug, Clone)]
pub struct CorrelationFlow<T> {
    pub params: FlowParams<T>,
}

impl<T: Scalar> Default for CorrelationFlow<T> {
    fn default() -> Self {
        CorrelationFlow { params: FlowParams::default() }
    }
}

impl<T: Scalar> CorrelationFlow<T> {
    pub fn new(params: FlowParams<T>) -> Self {
        CorrelationFlow { params }
    }

    fn check_inputs(&self, src: &Image<T>, dst: &Image<T>, iters: usize) -> Result<()> {
        if iters == 0 {
            return Err(Error::ZeroIterations);
        }
        if src.width() != dst.width() || src.height() != dst.height() {
            return Err(Error::ExtentMismatch {
                expected_w: src.width(),
                expected_h: src.height(),
                got_w: dst.width(),
                got_h: dst.height(),
            });
        }
        if src.width() < STRIDE || src.height() < STRIDE {
            return Err(Error::PatchTooSmall {
                width: src.width(),
                height: src.height(),
                min: STRIDE,
            });
        }
        Ok(())
    }

    fn run_pair(
        &self,
        src: &Image<T>,
        dst: &Image<T>,
        iters: usize,
    ) -> Result<BidirectionalFlow<T>> {
        let p = &self.params;
        let gray_src = src.to_luma();
        let gray_dst = dst.to_luma();
        let pyr_src = build_pyramid(&gray_src, p.pyramid_levels);
        let pyr_dst = build_pyramid(&gray_dst, p.pyramid_levels);
        let feat_src: Vec<FeatureMap<T>> = pyr_src
            .iter()
            .map(|im| encode_with(im, p.channels))
            .collect::<Result<_>>()?;
        let feat_dst: Vec<FeatureMap<T>> = pyr_dst
            .iter()
            .map(|im| encode_with(im, p.channels))
            .collect::<Result<_>>()?;

        let volumes: Vec<CostVolume<T>> = feat_src
            .iter()
            .zip(feat_dst.iter())
            .map(|(fs, fd)| build_cost_volume(fs, fd, 1).expect("channel counts match"))
            .collect();
        let fwd_cells = self.refine_direction(&feat_src, &volumes, false, iters);
        let bwd_cells = self.refine_direction(&feat_dst, &volumes, true, iters);

        let w = src.width();
        let h = src.height();
        let mut forward = upsample_cells_to_pixels(&fwd_cells.flow, w, h);
        let mut backward = upsample_cells_to_pixels(&bwd_cells.flow, w, h);
        self.photometric_polish(&gray_src, &gray_dst, &mut forward);
        self.photometric_polish(&gray_dst, &gray_src, &mut backward);

        let conf_forward = self.confidence(&forward, &backward, &fwd_cells.peak_ratio, w, h);
        let conf_backward = self.confidence(&backward, &forward, &bwd_cells.peak_ratio, w, h);
        Ok(BidirectionalFlow { forward, backward, conf_forward, conf_backward })
    }

    /// Coarse-to-fine refinement in feature-cell units. With `backward` the
    /// volumes are read transposed, so one build serves both directions.
    fn refine_direction(
        &self,
        feat_src: &[FeatureMap<T>],
        volumes: &[CostVolume<T>],
        backward: bool,
        iters: usize,
    ) -> CellFlow<T> {
        let coarsest = feat_src.len() - 1;
        let view = VolView::new(&volumes[coarsest], backward);
        let mut flow = global_translation_seed(&view);
        let mut peaks = vec![T::zero(); flow.width() * flow.height()];
        for level in (0..=coarsest).rev() {
            let fs = &feat_src[level];
            let view = VolView::new(&volumes[level], backward);
            if flow.width() != fs.width() || flow.height() != fs.height() {
                // Cell grids between pyramid levels relate through the pixel
                // chain: fine cell c sits at fine pixel 8c+3.5, which is
                // coarse pixel (8c+3)/2, i.e. coarse cell 0.5c - 0.25.
                let quarter = T::c(0.25);
                let half = T::c(0.5);
                flow = flow.resample_with(fs.width(), fs.height(), T::c(2.0), |x, y| {
                    (x * half - quarter, y * half - quarter)
                });
            }
            peaks = vec![T::zero(); fs.width() * fs.height()];
            for _ in 0..iters {
                let mut next = flow.clone();
                for cy in 0..fs.height() {
                    for cx in 0..fs.width() {
                        let (du, dv, peak) = self.cell_update(&view, &flow, cx, cy);
                        next.set(cx, cy, du, dv);
                        peaks[cy * fs.width() + cx] = peak;
                    }
                }
                // smoothing after every round keeps ambiguous cells from
                // locking onto repeated-texture false peaks
                flow = weighted_median_pass(&next, &peaks, 1);
            }
            // a wider pass clears small blobs of false-peak locks
            flow = weighted_median_pass(&flow, &peaks, 2);
        }
        // score the final smoothed flow for the confidence peak ratio
        let fs = &feat_src[0];
        let view = VolView::new(&volumes[0], backward);
        let mut peak_ratio = ConfidenceMap::new(fs.width(), fs.height(), T::zero());
        for cy in 0..fs.height() {
            for cx in 0..fs.width() {
                peak_ratio.set(cx, cy, self.peak_ratio(&view, &flow, cx, cy));
            }
        }
        CellFlow { flow, peak_ratio }
    }

    /// Symmetrized neighborhood score at integer offset `(dx, dy)` from the
    /// current target position `(bx, by)` of source cell `(cx, cy)`.
    #[inline]
    fn score(
        &self,
        view: &VolView<'_, T>,
        cx: usize,
        cy: usize,
        bx: T,
        by: T,
        dx: isize,
        dy: isize,
    ) -> T {
        let half = T::c(0.5);
        let (sw, sh) = view.src_extent();
        let fwd = view.sample_dst(cx, cy, bx + T::c(dx as f64), by + T::c(dy as f64));
        let rx = (cx as isize - dx).clamp(0, sw as isize - 1) as usize;
        let ry = (cy as isize - dy).clamp(0, sh as isize - 1) as usize;
        let rev = view.sample_dst(rx, ry, bx, by);
        (fwd + rev) * half
    }

    /// One refinement step of a cell: soft-argmax of the correlation
    /// neighborhood, localized at its peak so multi-modal score fields never
    /// blend into spurious in-between positions. The 3x3 score-weighted
    /// centroid around the argmax provides the sub-cell component; on an
    /// identical pair the symmetrized scores make it exactly zero.
    fn cell_update(
        &self,
        view: &VolView<'_, T>,
        flow: &FlowField<T>,
        cx: usize,
        cy: usize,
    ) -> (T, T, T) {
        let p = &self.params;
        let r = p.radius as isize;
        let (fu, fv) = flow.at(cx, cy);
        let bx = T::of(cx) + fu;
        let by = T::of(cy) + fv;
        let side = (2 * r + 1) as usize;
        let mut scores = vec![T::zero(); side * side];
        let mut smax = T::neg_infinity();
        let mut best = (0isize, 0isize);
        for dy in -r..=r {
            for dx in -r..=r {
                let s = self.score(view, cx, cy, bx, by, dx, dy);
                scores[((dy + r) as usize) * side + (dx + r) as usize] = s;
                if s > smax {
                    smax = s;
                    best = (dx, dy);
                }
            }
        }
        let mut wsum = T::zero();
        let mut wx = T::zero();
        let mut wy = T::zero();
        for dy in (best.1 - 1).max(-r)..=(best.1 + 1).min(r) {
            for dx in (best.0 - 1).max(-r)..=(best.0 + 1).min(r) {
                let s = scores[((dy + r) as usize) * side + (dx + r) as usize];
                let w = ((s - smax) / p.tau).exp();
                wsum += w;
                wx += w * T::c((dx - best.0) as f64);
                wy += w * T::c((dy - best.1) as f64);
            }
        }
        let mut du = T::c(best.0 as f64);
        let mut dv = T::c(best.1 as f64);
        if wsum > T::zero() {
            du += wx / wsum;
            dv += wy / wsum;
        }
        if du.abs() < p.snap {
            du = T::zero();
        }
        if dv.abs() < p.snap {
            dv = T::zero();
        }
        // keep the target position inside the search grid
        let (dw, dh) = view.dst_extent();
        let nu = (fu + du).max(-T::of(cx)).min(T::of(dw - 1) - T::of(cx));
        let nv = (fv + dv).max(-T::of(cy)).min(T::of(dh - 1) - T::of(cy));
        (nu, nv, smax)
    }

    /// Peak quality at the final flow: best symmetrized score against the
    /// strongest score at Chebyshev distance >= 2 from the best offset.
    fn peak_ratio(
        &self,
        view: &VolView<'_, T>,
        flow: &FlowField<T>,
        cx: usize,
        cy: usize,
    ) -> T {
        let p = &self.params;
        let r = p.radius as isize;
        let (fu, fv) = flow.at(cx, cy);
        let bx = T::of(cx) + fu;
        let by = T::of(cy) + fv;
        let mut best = T::neg_infinity();
        let mut best_at = (0isize, 0isize);
        let side = (2 * r + 1) as usize;
        let mut scores = vec![T::zero(); side * side];
        for dy in -r..=r {
            for dx in -r..=r {
                let s = self.score(view, cx, cy, bx, by, dx, dy);
                scores[((dy + r) as usize) * side + (dx + r) as usize] = s;
                if s > best {
                    best = s;
                    best_at = (dx, dy);
                }
            }
        }
        let mut second = T::neg_infinity();
        for dy in -r..=r {
            for dx in -r..=r {
                if (dx - best_at.0).abs().max((dy - best_at.1).abs()) < 2 {
                    continue;
                }
                let s = scores[((dy + r) as usize) * side + (dx + r) as usize];
                if s > second {
                    second = s;
                }
            }
        }
        if !second.is_finite() {
            return T::zero();
        }
        ((best - second) / p.peak_scale).max(T::zero()).min(T::one())
    }

    /// Dense forward-additive photometric refinement at pixel resolution.
    /// A zero residual yields a zero update, so exact fixed points persist.
    /// The bilinear fraction is shared by the whole window (integer window
    /// offsets), so the interpolation weights are hoisted per iteration.
    fn photometric_polish(&self, src: &Image<T>, dst: &Image<T>, flow: &mut FlowField<T>) {
        let p = &self.params;
        if p.lk_iters == 0 {
            return;
        }
        let w = src.width();
        let h = src.height();
        let (gx, gy) = central_gradients(dst);
        let sd = src.data();
        let dd = dst.data();
        let gxd = gx.data();
        let gyd = gy.data();
        let r = p.lk_radius as isize;
        let det_eps = T::c(1e-9);
        let step_cap = T::c(1.5);
        let wi = w as isize;
        let hi = h as isize;
        let one = T::one();
        for py in 0..h as isize {
            for px in 0..w as isize {
                let (mut fu, mut fv) = flow.at(px as usize, py as usize);
                for _ in 0..p.lk_iters {
                    let iu = fu.floor();
                    let iv = fv.floor();
                    let fx = fu - iu;
                    let fy = fv - iv;
                    let iu = iu.as_f64() as isize;
                    let iv = iv.as_f64() as isize;
                    let w00 = (one - fx) * (one - fy);
                    let w10 = fx * (one - fy);
                    let w01 = (one - fx) * fy;
                    let w11 = fx * fy;
                    let mut gxx = T::zero();
                    let mut gxy = T::zero();
                    let mut gyy = T::zero();
                    let mut bx = T::zero();
                    let mut by = T::zero();
                    for dy in -r..=r {
                        let qy = (py + dy).clamp(0, hi - 1);
                        let ty0 = (qy + iv).clamp(0, hi - 1) as usize;
                        let ty1 = (qy + iv + 1).clamp(0, hi - 1) as usize;
                        for dx in -r..=r {
                            let qx = (px + dx).clamp(0, wi - 1);
                            let tx0 = (qx + iu).clamp(0, wi - 1) as usize;
                            let tx1 = (qx + iu + 1).clamp(0, wi - 1) as usize;
                            let i00 = ty0 * w + tx0;
                            let i10 = ty0 * w + tx1;
                            let i01 = ty1 * w + tx0;
                            let i11 = ty1 * w + tx1;
                            let g_x = gxd[i00] * w00
                                + gxd[i10] * w10
                                + gxd[i01] * w01
                                + gxd[i11] * w11;
                            let g_y = gyd[i00] * w00
                                + gyd[i10] * w10
                                + gyd[i01] * w01
                                + gyd[i11] * w11;
                            let warped = dd[i00] * w00
                                + dd[i10] * w10
                                + dd[i01] * w01
                                + dd[i11] * w11;
                            let resid = sd[(qy as usize) * w + qx as usize] - warped;
                            gxx += g_x * g_x;
                            gxy += g_x * g_y;
                            gyy += g_y * g_y;
                            bx += g_x * resid;
                            by += g_y * resid;
                        }
                    }
                    let det = gxx * gyy - gxy * gxy;
                    if det < det_eps {
                        break;
                    }
                    let du = ((gyy * bx - gxy * by) / det).max(-step_cap).min(step_cap);
                    let dv = ((gxx * by - gxy * bx) / det).max(-step_cap).min(step_cap);
                    fu += du;
                    fv += dv;
                }
                flow.set(px as usize, py as usize, fu, fv);
            }
        }
    }

    fn confidence(
        &self,
        fwd: &FlowField<T>,
        bwd: &FlowField<T>,
        peak_ratio_cells: &ConfidenceMap<T>,
        w: usize,
        h: usize,
    ) -> ConfidenceMap<T> {
        let p = &self.params;
        let sigma2 = p.sigma_c * p.sigma_c;
        let mut conf = ConfidenceMap::new(w, h, T::zero());
        let max_x = T::of(w - 1);
        let max_y = T::of(h - 1);
        let inv_stride = T::one() / T::of(STRIDE);
        let center = T::c((STRIDE as f64 - 1.0) / 2.0);
        for py in 0..h {
            for px in 0..w {
                let (fu, fv) = fwd.at(px, py);
                let tx = T::of(px) + fu;
                let ty = T::of(py) + fv;
                if tx < T::zero() || tx > max_x || ty < T::zero() || ty > max_y {
                    continue;
                }
                let (bu, bv) = bwd.sample(tx, ty);
                let ru = fu + bu;
                let rv = fv + bv;
                let fb2 = ru * ru + rv * rv;
                let cell_x = (T::of(px) - center) * inv_stride;
                let cell_y = (T::of(py) - center) * inv_stride;
                let ratio = sample_conf(peak_ratio_cells, cell_x, cell_y);
                let c = (-(fb2 / sigma2)).exp() * ratio;
                conf.set(px, py, c.max(T::zero()).min(T::one()));
            }
        }
        conf
    }
}

impl<T: Scalar> FlowEstimator<T> for CorrelationFlow<T> {
    fn estimate_flow(
        &self,
        src: &Image<T>,
        dst: &Image<T>,
        iters: usize,
    ) -> Result<(FlowField<T>, ConfidenceMap<T>)> {
        let pair = self.estimate_pair(src, dst, iters)?;
        Ok((pair.forward, pair.conf_forward))
    }

    fn estimate_pair(
        &self,
        src: &Image<T>,
        dst: &Image<T>,
        iters: usize,
    ) -> Result<BidirectionalFlow<T>> {
        self.check_inputs(src, dst, iters)?;
        self.run_pair(src, dst, iters)
    }
}

struct CellFlow<T> {
    flow: FlowField<T>,
    peak_ratio: ConfidenceMap<T>,
}

/// Image pyramid by 2x2 average pooling; levels with fewer than 8x8 feature
/// cells are dropped (tiny correlation grids are too ambiguous to seed the
/// finer levels).
fn build_pyramid<T: Scalar>(gray: &Image<T>, levels: usize) -> Vec<Image<T>> {
    let mut pyr = vec![gray.clone()];
    for _ in 1..levels {
        let prev = pyr.last().unwrap();
        let nw = prev.width() / 2;
        let nh = prev.height() / 2;
        if nw < 8 * STRIDE || nh < 8 * STRIDE {
            break;
        }
        let quarter = T::c(0.25);
        let mut img = Image::new(nw, nh, 1);
        for y in 0..nh {
            for x in 0..nw {
                let v = (prev.get(2 * x, 2 * y, 0)
                    + prev.get(2 * x + 1, 2 * y, 0)
                    + prev.get(2 * x, 2 * y + 1, 0)
                    + prev.get(2 * x + 1, 2 * y + 1, 0))
                    * quarter;
                img.set(x, y, 0, v);
            }
        }
        pyr.push(img);
    }
    pyr
}

/// Cell-resolution flow (cell units) to pixel-resolution flow (pixel units).
/// Cell k is centered at pixel 8k + 3.5.
fn upsample_cells_to_pixels<T: Scalar>(cells: &FlowField<T>, w: usize, h: usize) -> FlowField<T> {
    let center = T::c((STRIDE as f64 - 1.0) / 2.0);
    let inv = T::one() / T::of(STRIDE);
    cells.resample_with(w, h, T::of(STRIDE), |x, y| ((x - center) * inv, (y - center) * inv))
}

/// Directional view over a shared cost volume: the backward direction reads
/// the forward volume transposed.
enum VolView<'a, T> {
    Forward(&'a CostVolume<T>),
    Backward(&'a CostVolume<T>),
}

impl<'a, T: Scalar> VolView<'a, T> {
    fn new(volume: &'a CostVolume<T>, backward: bool) -> Self {
        if backward {
            VolView::Backward(volume)
        } else {
            VolView::Forward(volume)
        }
    }

    fn src_extent(&self) -> (usize, usize) {
        match self {
            VolView::Forward(v) => (v.src_width(), v.src_height()),
            VolView::Backward(v) => v.dst_extent(0),
        }
    }

    fn dst_extent(&self) -> (usize, usize) {
        match self {
            VolView::Forward(v) => v.dst_extent(0),
            VolView::Backward(v) => (v.src_width(), v.src_height()),
        }
    }

    #[inline]
    fn at(&self, sx: usize, sy: usize, dx: usize, dy: usize) -> T {
        match self {
            VolView::Forward(v) => v.at(0, sx, sy, dx, dy),
            VolView::Backward(v) => v.at(0, dx, dy, sx, sy),
        }
    }

    #[inline]
    fn sample_dst(&self, sx: usize, sy: usize, dx: T, dy: T) -> T {
        match self {
            VolView::Forward(v) => v.sample_dst(0, sx, sy, dx, dy),
            VolView::Backward(v) => v.sample_src(0, dx, dy, sx, sy),
        }
    }
}

/// Uniform translation consensus at the coarsest level: every cell votes
/// with its full-grid argmax displacement and the component-wise median
/// seeds the refinement. This disambiguates repeated textures whose local
/// correlation neighborhoods carry near-tied false peaks.
fn global_translation_seed<T: Scalar>(view: &VolView<'_, T>) -> FlowField<T> {
    let (sw, sh) = view.src_extent();
    let (dw, dh) = view.dst_extent();
    let mut votes_u: Vec<T> = Vec::with_capacity(sw * sh);
    let mut votes_v: Vec<T> = Vec::with_capacity(sw * sh);
    for sy in 0..sh {
        for sx in 0..sw {
            let mut best = T::neg_infinity();
            let mut at = (0usize, 0usize);
            for dy in 0..dh {
                for dx in 0..dw {
                    let s = view.at(sx, sy, dx, dy);
                    if s > best {
                        best = s;
                        at = (dx, dy);
                    }
                }
            }
            // flat cells carry no signal
            if best > T::c(0.1) {
                votes_u.push(T::of(at.0) - T::of(sx));
                votes_v.push(T::of(at.1) - T::of(sy));
            }
        }
    }
    let mut flow = FlowField::zeros(sw, sh);
    if votes_u.is_empty() {
        return flow;
    }
    let median = |mut v: Vec<T>| -> T {
        v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let mu = median(votes_u);
    let mv = median(votes_v);
    for y in 0..flow.height() {
        for x in 0..flow.width() {
            // keep the seeded target inside the grid
            let u = mu.max(-T::of(x)).min(T::of(dw - 1) - T::of(x));
            let v = mv.max(-T::of(y)).min(T::of(dh - 1) - T::of(y));
            flow.set(x, y, u, v);
        }
    }
    flow
}

/// Central-difference gradient planes of a single-channel image.
fn central_gradients<T: Scalar>(img: &Image<T>) -> (Image<T>, Image<T>) {
    let w = img.width();
    let h = img.height();
    let half = T::c(0.5);
    let mut gx = Image::new(w, h, 1);
    let mut gy = Image::new(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let dx = (img.get_clamped(x as isize + 1, y as isize, 0)
                - img.get_clamped(x as isize - 1, y as isize, 0))
                * half;
            let dy = (img.get_clamped(x as isize, y as isize + 1, 0)
                - img.get_clamped(x as isize, y as isize - 1, 0))
                * half;
            gx.set(x, y, 0, dx);
            gy.set(x, y, 0, dy);
        }
    }
    (gx, gy)
}

fn sample_conf<T: Scalar>(map: &ConfidenceMap<T>, x: T, y: T) -> T {
    let max_x = T::of(map.width() - 1);
    let max_y = T::of(map.height() - 1);
    let x = x.max(T::zero()).min(max_x);
    let y = y.max(T::zero()).min(max_y);
    let x0f = x.floor();
    let y0f = y.floor();
    let fx = x - x0f;
    let fy = y - y0f;
    let x0 = x0f.as_f64() as usize;
    let y0 = y0f.as_f64() as usize;
    let x1 = (x0 + 1).min(map.width() - 1);
    let y1 = (y0 + 1).min(map.height() - 1);
    let one = T::one();
    let top = map.at(x0, y0) * (one - fx) + map.at(x1, y0) * fx;
    let bot = map.at(x0, y1) * (one - fx) + map.at(x1, y1) * fx;
    top * (one - fy) + bot * fy
}

/// Weighted-median smoothing pass per component over a square window.
/// Weights are the per-cell peak scores clamped to be positive.
fn weighted_median_pass<T: Scalar>(flow: &FlowField<T>, peaks: &[T], radius: isize) -> FlowField<T> {
    let w = flow.width();
    let h = flow.height();
    let mut out = flow.clone();
    let eps = T::c(1e-6);
    let mut vals: Vec<(T, T)> = Vec::with_capacity((2 * radius as usize + 1).pow(2));
    for cy in 0..h {
        for cx in 0..w {
            for comp in 0..2 {
                vals.clear();
                let mut total = T::zero();
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let nx = cx as isize + dx;
                        let ny = cy as isize + dy;
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let (u, v) = flow.at(nx as usize, ny as usize);
                        let val = if comp == 0 { u } else { v };
                        let weight = peaks[ny as usize * w + nx as usize].max(T::zero()) + eps;
                        vals.push((val, weight));
                        total += weight;
                    }
                }
                vals.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let half = total * T::c(0.5);
                let mut acc = T::zero();
                let mut median = vals[vals.len() / 2].0;
                for (val, weight) in &vals {
                    acc += *weight;
                    if acc >= half {
                        median = *val;
                        break;
                    }
                }
                let (u, v) = out.at(cx, cy);
                if comp == 0 {
                    out.set(cx, cy, median, v);
                } else {
                    out.set(cx, cy, u, median);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::synth::{generate, Deform, Illumination, Motion, SynthSpec, Texture};

    fn textured(seed: u64, size: usize) -> Image<f64> {
        let spec = SynthSpec {
            seed,
            frames: 2,
            width: size,
            height: size,
            texture: Texture::Perlin { octaves: 4, base_period: 48.0 },
            motion: Motion::default(),
            deform: Deform::None,
            illumination: Illumination::default(),
            occluder: None,
            init_box: BBox::new(2.0, 2.0, 4.0, 4.0),
        };
        generate(&spec).unwrap().remove(0).image
    }

    fn shifted_pair(seed: u64, size: usize, dx: f64, dy: f64) -> (Image<f64>, Image<f64>) {
        let spec = SynthSpec {
            seed,
            frames: 2,
            width: size,
            height: size,
            texture: Texture::Perlin { octaves: 4, base_period: 48.0 },
            motion: Motion { shift: (dx, dy), ..Motion::default() },
            deform: Deform::None,
            illumination: Illumination::default(),
            occluder: None,
            init_box: BBox::new(2.0, 2.0, 4.0, 4.0),
        };
        let frames = generate(&spec).unwrap();
        (frames[0].image.clone(), frames[1].image.clone())
    }

    fn mean_epe(flow: &FlowField<f64>, du: f64, dv: f64, margin: usize) -> f64 {
        let mut acc = 0.0;
        let mut n = 0.0;
        for y in margin..flow.height() - margin {
            for x in margin..flow.width() - margin {
                let (u, v) = flow.at(x, y);
                acc += ((u - du).powi(2) + (v - dv).powi(2)).sqrt();
                n += 1.0;
            }
        }
        acc / n
    }

    #[test]
    fn identity_pair_zero_flow_exact() {
        let img = textured(1, 128);
        let est = CorrelationFlow::<f64>::default();
        let (flow, conf) = est.estimate_flow(&img, &img, 4).unwrap();
        for y in 0..flow.height() {
            for x in 0..flow.width() {
                assert_eq!(flow.at(x, y), (0.0, 0.0), "({x},{y})");
            }
        }
        let mean_conf = conf.mean();
        assert!(mean_conf >= 0.9, "mean confidence {mean_conf}");
    }

    #[test]
    fn translation_recovered() {
        let (a, b) = shifted_pair(2, 128, 5.0, 0.0);
        let est = CorrelationFlow::<f64>::default();
        let (flow, _) = est.estimate_flow(&a, &b, 4).unwrap();
        let epe = mean_epe(&flow, 5.0, 0.0, 12);
        assert!(epe <= 0.5, "epe {epe}");
    }

    #[test]
    fn fractional_translation_recovered() {
        let (a, b) = shifted_pair(3, 128, 3.5, -2.25);
        let est = CorrelationFlow::<f64>::default();
        let (flow, _) = est.estimate_flow(&a, &b, 4).unwrap();
        let epe = mean_epe(&flow, 3.5, -2.25, 12);
        assert!(epe <= 0.5, "epe {epe}");
    }

    #[test]
    fn zoom_recovered_in_center() {
        let size = 128usize;
        let spec = SynthSpec {
            seed: 4,
            frames: 2,
            width: size,
            height: size,
            texture: Texture::Perlin { octaves: 4, base_period: 48.0 },
            motion: Motion { zoom: 1.1, ..Motion::default() },
            deform: Deform::None,
            illumination: Illumination::default(),
            occluder: None,
            init_box: BBox::new(2.0, 2.0, 4.0, 4.0),
        };
        let frames = generate(&spec).unwrap();
        let est = CorrelationFlow::<f64>::default();
        let (flow, _) = est.estimate_flow(&frames[0].image, &frames[1].image, 4).unwrap();
        // central 50% region against the analytic radial field
        let c = (size - 1) as f64 / 2.0;
        let q = size / 4;
        let mut acc = 0.0;
        let mut n = 0.0;
        for y in q..size - q {
            for x in q..size - q {
                let (u, v) = flow.at(x, y);
                let (gu, gv) = frames[1].gt_flow_from_prev.at(x, y);
                acc += ((u - gu).powi(2) + (v - gv).powi(2)).sqrt();
                n += 1.0;
                let _ = c;
            }
        }
        let epe = acc / n;
        assert!(epe <= 0.7, "central epe {epe}");
    }

    #[test]
    fn confidence_decreases_with_noise() {
        use rand::{Rng, SeedableRng};
        let (a, b) = shifted_pair(5, 96, 2.0, 1.0);
        let est = CorrelationFlow::<f64>::default();
        let mut means = Vec::new();
        for level in 0..3 {
            let amp = level as f64 * 0.08;
            let mut acc = 0.0;
            for seed in 0..5u64 {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(900 + seed);
                let mut noisy = b.clone();
                for v in noisy.data_mut() {
                    *v = (*v + rng.gen_range(-amp..=amp.max(1e-12))).clamp(0.0, 1.0);
                }
                let (_, conf) = est.estimate_flow(&a, &noisy, 3).unwrap();
                acc += conf.mean();
            }
            means.push(acc / 5.0);
        }
        assert!(means[0] >= means[1] && means[1] >= means[2], "{means:?}");
    }

    #[test]
    fn input_validation() {
        let img = textured(6, 64);
        let small = textured(6, 96);
        let est = CorrelationFlow::<f64>::default();
        assert!(matches!(
            est.estimate_flow(&img, &small, 4),
            Err(crate::Error::ExtentMismatch { .. })
        ));
        assert!(matches!(est.estimate_flow(&img, &img, 0), Err(crate::Error::ZeroIterations)));
    }

    #[test]
    fn shift_equivariance_large_integer_shift() {
        let (a, b) = shifted_pair(7, 160, 24.0, 0.0);
        let est = CorrelationFlow::<f64>::default();
        let (flow, _) = est.estimate_flow(&a, &b, 4).unwrap();
        let epe = mean_epe(&flow, 24.0, 0.0, 32);
        assert!(epe <= 0.5, "epe {epe}");
    }
}
