//! Two-stage per-frame tracking pipeline: inter-frame flow matching extracts
//! a coarse ROI and gates on occlusion, then adaptive-template anchor
//! matching refines the target box.
//!
//! Working resolutions are fixed so correlation-volume sizes stay bounded:
//! the search patch (4x the previous box) resamples to 256x256, the template
//! to 96x96 (12x12 feature cells) and the coarse ROI crop to 192x192 (24x24
//! cells), which places the template exactly on the center half-size anchor
//! of the ROI. Because consecutive patches are cropped around the tracked
//! box, the accumulated template flow only carries residual motion; the
//! similarity component is removed by the crop itself and by the
//! scale-invariant warp.

use crate::error::{Error, Result};
use crate::features::encode_with;
use crate::flow::{
    compose_flow, fb_occlusion, occlusion_fraction, ConsistencyParams, CorrelationFlow,
    FlowEstimator, FlowField,
};
use crate::geometry::{min_max_enclose, BBox, Point2};
use crate::image::{Image, PatchMap};
use crate::matcher::{match_anchor, MatchParams};
use crate::scalar::Scalar;
use crate::template::{fuse_features, scale_ratio, warp_template, TemplateState};

/// Search patch working resolution.
pub const SEARCH_SIZE: usize = 256;
/// Template patch working resolution.
pub const TEMPLATE_SIZE: usize = 96;
/// Coarse-ROI crop working resolution (2x the template, so the template
/// anchors on the ROI's center half-size box).
pub const ROI_SIZE: usize = 192;

/// Spacing of the advected grid used by the Min-Max ROI update, in search
/// patch pixels.
const ADVECT_STEP: usize = 4;
/// Consecutive frames with the box center outside the frame before the
/// tracker declares itself lost.
const LOST_PATIENCE: usize = 10;

/// Pipeline ablation modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Stage 1 only: advect the previous box with inter-frame flow.
    InterFrameOnly,
    /// Anchor matching against the static template; no flow accumulation,
    /// no ROI advection.
    TemplateOnly,
    /// Full pipeline.
    Full,
}

#[derive(Debug, Clone)]
pub struct TrackerConfig<T> {
    /// Template fusion weight toward the warped original template.
    pub alpha: T,
    /// Occlusion gate: no prediction when the occluded fraction of the
    /// previous box exceeds this.
    pub beta: T,
    /// Flow refinement iterations per pyramid level.
    pub flow_iters: usize,
    /// Anchor matching iterations.
    pub match_iters: usize,
    /// Descriptor channels.
    pub feature_channels: usize,
    pub mode: Mode,
    /// Search region expansion over the previous box.
    pub search_factor: T,
    /// Coarse ROI expansion over the previous box.
    pub roi_factor: T,
}

impl<T: Scalar> Default for TrackerConfig<T> {
    fn default() -> Self {
        TrackerConfig {
            alpha: T::c(0.5),
            beta: T::c(0.5),
            flow_iters: 4,
            match_iters: 8,
            feature_channels: 32,
            mode: Mode::Full,
            search_factor: T::c(4.0),
            roi_factor: T::c(2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerStatus {
    Tracking,
    Occluded,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tracked,
    Occluded,
}

/// Per-frame tracking outcome. A box is present exactly when the status is
/// `Tracked`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult<T> {
    pub frame_index: usize,
    pub bbox: Option<BBox<T>>,
    pub status: TrackStatus,
    pub occlusion_fraction: T,
    pub match_confidence: T,
}

/// Cross-frame state owned by one tracker.
#[derive(Debug, Clone)]
pub struct TrackerState<T> {
    pub template: TemplateState<T>,
    /// Last predicted box in frame coordinates.
    pub prev_bbox: BBox<T>,
    /// Last coarse ROI in frame coordinates.
    pub prev_roi: BBox<T>,
    /// Previous frame cropped by the current search box.
    pub prev_patch: Image<T>,
    /// Context features: previous ROI crop encoded at ROI resolution.
    pub prev_features: crate::features::FeatureMap<T>,
    /// Search box (frame coordinates) used to crop `prev_patch`; the next
    /// frame is cropped with the same box.
    pub search_box: BBox<T>,
    pub frame_index: usize,
    pub status: TrackerStatus,
    frame_w: usize,
    frame_h: usize,
    out_of_frame: usize,
}

pub struct Tracker<T, E = CorrelationFlow<T>> {
    pub config: TrackerConfig<T>,
    pub match_params: MatchParams<T>,
    pub consistency: ConsistencyParams<T>,
    estimator: E,
    state: TrackerState<T>,
}

impl<T: Scalar> Tracker<T, CorrelationFlow<T>> {
    /// Initialize on the first frame with the given target box.
    pub fn init(frame0: &Image<T>, b0: BBox<T>, config: TrackerConfig<T>) -> Result<Self> {
        let mut estimator = CorrelationFlow::default();
        estimator.params.channels = config.feature_channels;
        Tracker::with_estimator(frame0, b0, config, estimator)
    }
}

impl<T: Scalar, E: FlowEstimator<T>> Tracker<T, E> {
    pub fn with_estimator(
        frame0: &Image<T>,
        b0: BBox<T>,
        config: TrackerConfig<T>,
        estimator: E,
    ) -> Result<Self> {
        let bounds = (T::of(frame0.width()), T::of(frame0.height()));
        if !b0.inside(bounds) {
            return Err(Error::BoxOutsideFrame);
        }
        if b0.w.as_f64() < 16.0 || b0.h.as_f64() < 16.0 {
            return Err(Error::BoxTooSmall);
        }
        let p0 = frame0.crop_resample(&b0, TEMPLATE_SIZE, TEMPLATE_SIZE);
        let template = TemplateState::new(p0, config.feature_channels)?;
        let search_box = b0.expand(config.search_factor, bounds);
        let prev_patch = frame0.crop_resample(&search_box, SEARCH_SIZE, SEARCH_SIZE);
        let prev_roi = b0.expand(config.roi_factor, bounds);
        let patch_map = PatchMap::new(&search_box, SEARCH_SIZE, SEARCH_SIZE);
        let roi_patch = patch_map.box_to_patch(&prev_roi);
        let prev_features = encode_with(
            &prev_patch.crop_resample(&roi_patch, ROI_SIZE, ROI_SIZE),
            config.feature_channels,
        )?;
        let state = TrackerState {
            template,
            prev_bbox: b0,
            prev_roi,
            prev_patch,
            prev_features,
            search_box,
            frame_index: 0,
            status: TrackerStatus::Tracking,
            frame_w: frame0.width(),
            frame_h: frame0.height(),
            out_of_frame: 0,
        };
        Ok(Tracker {
            config,
            match_params: MatchParams::default(),
            consistency: ConsistencyParams::default(),
            estimator,
            state,
        })
    }

    pub fn state(&self) -> &TrackerState<T> {
        &self.state
    }

    /// Process the next frame.
    pub fn step(&mut self, frame: &Image<T>) -> Result<TrackResult<T>> {
        if self.state.status == TrackerStatus::Lost {
            return Err(Error::TrackerLost);
        }
        if frame.width() != self.state.frame_w || frame.height() != self.state.frame_h {
            return Err(Error::ExtentMismatch {
                expected_w: self.state.frame_w,
                expected_h: self.state.frame_h,
                got_w: frame.width(),
                got_h: frame.height(),
            });
        }
        let frame_index = self.state.frame_index + 1;
        let bounds = (T::of(self.state.frame_w), T::of(self.state.frame_h));
        let search = self.state.search_box;
        let patch_map = PatchMap::new(&search, SEARCH_SIZE, SEARCH_SIZE);
        let patch = frame.crop_resample(&search, SEARCH_SIZE, SEARCH_SIZE);

        // stage 1: inter-frame flow, confidence and occlusion
        let pair =
            self.estimator.estimate_pair(&self.state.prev_patch, &patch, self.config.flow_iters)?;
        let occ_fwd = fb_occlusion(&pair.forward, &pair.backward, self.consistency)?;
        let box_patch = patch_map.box_to_patch(&self.state.prev_bbox);
        let occ_frac = occlusion_fraction(&occ_fwd, &box_patch)?;
        if occ_frac > self.config.beta {
            // no prediction; freeze everything but the frame counter
            self.state.frame_index = frame_index;
            self.state.status = TrackerStatus::Occluded;
            return Ok(TrackResult {
                frame_index,
                bbox: None,
                status: TrackStatus::Occluded,
                occlusion_fraction: occ_frac,
                match_confidence: T::zero(),
            });
        }

        let result_box: BBox<T>;
        let match_confidence: T;
        match self.config.mode {
            Mode::InterFrameOnly => {
                let advected = advect_box_grid(&box_patch, &pair.forward);
                let b_patch = min_max_enclose(&advected)?;
                result_box = patch_map.box_to_source(&b_patch).clip(bounds);
                let conf = pair
                    .conf_forward
                    .resample_region(&box_patch, TEMPLATE_SIZE / 8, TEMPLATE_SIZE / 8);
                match_confidence = conf.mean();
            }
            Mode::TemplateOnly | Mode::Full => {
                // coarse ROI
                let roi_patch = if self.config.mode == Mode::Full {
                    let roi_prev_patch = patch_map.box_to_patch(&self.state.prev_roi);
                    let advected = advect_box_grid(&roi_prev_patch, &pair.forward);
                    min_max_enclose(&advected)?
                        .clip((T::of(SEARCH_SIZE), T::of(SEARCH_SIZE)))
                } else {
                    patch_map.box_to_patch(&self.state.prev_roi)
                };

                // stage 2: adaptive template update
                let grid = self.state.template.g.width();
                if self.config.mode == Mode::Full {
                    let v_grid = self.flow_on_template_grid(&pair.forward, &patch_map);
                    let composed = compose_flow(&self.state.template.g, &v_grid)?;
                    self.state.template.g = composed;
                    if let Ok(s) = scale_ratio(&self.state.template.g, self.state.template.center)
                    {
                        self.state.template.scale = s;
                    }
                }
                let warped = warp_template(&self.state.template);
                let f_warped = encode_with(&warped, self.config.feature_channels)?;
                let prev_box_crop = self
                    .state
                    .prev_patch
                    .crop_resample(&box_patch, TEMPLATE_SIZE, TEMPLATE_SIZE);
                let f_prev_box = encode_with(&prev_box_crop, self.config.feature_channels)?;
                let u_map = pair.conf_forward.resample_region(&box_patch, grid, grid);
                let o_map = occ_fwd.resample_region(&box_patch, grid, grid);
                let fused =
                    fuse_features(&f_warped, &f_prev_box, &u_map, &o_map, self.config.alpha)?;

                // stage 2: anchor matching inside the ROI crop
                let roi_crop = patch.crop_resample(&roi_patch, ROI_SIZE, ROI_SIZE);
                let f_roi = encode_with(&roi_crop, self.config.feature_channels)?;
                let quarter = T::of(ROI_SIZE / 4);
                let half = T::of(ROI_SIZE / 2);
                let init_box = BBox::new(quarter, quarter, half, half);
                let matched = match_anchor(
                    &fused,
                    &f_roi,
                    &self.state.prev_features,
                    &init_box,
                    self.config.match_iters,
                    &self.match_params,
                )?;
                let roi_map = PatchMap::new(&roi_patch, ROI_SIZE, ROI_SIZE);
                let in_patch = roi_map.box_to_source(&matched.bbox);
                result_box = patch_map.box_to_source(&in_patch).clip(bounds);
                match_confidence = matched.confidence;
            }
        }

        // Re-anchor the accumulated flow from the old box to the new one:
        // the tracked similarity component moves into the anchor itself,
        // keeping the stored field bounded; rotations and deformations,
        // which the box cannot express, stay in the field.
        if self.config.mode == Mode::Full {
            self.state.template.g =
                reanchor_template_flow(&self.state.template.g, &self.state.prev_bbox, &result_box);
        }

        // lost bookkeeping on the unclipped center
        let center = result_box.center();
        let inside = center.x >= T::zero()
            && center.y >= T::zero()
            && center.x < bounds.0
            && center.y < bounds.1;
        if inside {
            self.state.out_of_frame = 0;
        } else {
            self.state.out_of_frame += 1;
        }

        // advance caches
        self.state.prev_bbox = result_box;
        self.state.prev_roi = result_box.expand(self.config.roi_factor, bounds);
        self.state.search_box = result_box.expand(self.config.search_factor, bounds);
        self.state.prev_patch = frame.crop_resample(&self.state.search_box, SEARCH_SIZE, SEARCH_SIZE);
        let next_map = PatchMap::new(&self.state.search_box, SEARCH_SIZE, SEARCH_SIZE);
        let roi_in_patch = next_map.box_to_patch(&self.state.prev_roi);
        self.state.prev_features = encode_with(
            &self.state.prev_patch.crop_resample(&roi_in_patch, ROI_SIZE, ROI_SIZE),
            self.config.feature_channels,
        )?;
        self.state.frame_index = frame_index;
        self.state.status = if self.state.out_of_frame >= LOST_PATIENCE {
            TrackerStatus::Lost
        } else {
            TrackerStatus::Tracking
        };

        Ok(TrackResult {
            frame_index,
            bbox: Some(result_box),
            status: TrackStatus::Tracked,
            occlusion_fraction: occ_frac,
            match_confidence,
        })
    }

    /// Inter-frame flow resampled onto the template feature grid, in
    /// template-cell units. The template grid is anchored to the previous
    /// box, so the crop-relative flow composes coherently with the
    /// accumulated residual flow.
    fn flow_on_template_grid(
        &self,
        fwd: &FlowField<T>,
        patch_map: &PatchMap<T>,
    ) -> FlowField<T> {
        let g = &self.state.template.g;
        let (gw, gh) = (g.width(), g.height());
        let box_patch = patch_map.box_to_patch(&self.state.prev_bbox);
        // template pixel grid (TEMPLATE_SIZE) mapped onto the previous box
        let tmap = PatchMap::new(&box_patch, TEMPLATE_SIZE, TEMPLATE_SIZE);
        let stride = T::of(crate::features::STRIDE);
        let half_off = T::c((crate::features::STRIDE as f64 - 1.0) / 2.0);
        let mut v = FlowField::zeros(gw, gh);
        for cy in 0..gh {
            for cx in 0..gw {
                // cell center in template pixels, then search-patch pixels
                let tpx = T::of(cx) * stride + half_off;
                let tpy = T::of(cy) * stride + half_off;
                let (px, py) = tmap.to_source(tpx, tpy);
                let (du, dv) = fwd.sample(px, py);
                // patch px -> template px -> cell units
                let u_cells = du / tmap.scale_x / stride;
                let v_cells = dv / tmap.scale_y / stride;
                v.set(cx, cy, u_cells, v_cells);
            }
        }
        v
    }
}

/// Re-express an accumulated template flow relative to a new anchor box.
/// Cell coordinates map through template pixels to frame coordinates under
/// the old box, then back under the new box.
fn reanchor_template_flow<T: Scalar>(
    g: &FlowField<T>,
    from: &BBox<T>,
    to: &BBox<T>,
) -> FlowField<T> {
    let from_map = PatchMap::new(from, TEMPLATE_SIZE, TEMPLATE_SIZE);
    let to_map = PatchMap::new(to, TEMPLATE_SIZE, TEMPLATE_SIZE);
    let stride = T::of(crate::features::STRIDE);
    let half_off = T::c((crate::features::STRIDE as f64 - 1.0) / 2.0);
    let mut out = FlowField::zeros(g.width(), g.height());
    for cy in 0..g.height() {
        for cx in 0..g.width() {
            let (gu, gv) = g.at(cx, cy);
            // current position in old-box cell coords -> template px
            let px = (T::of(cx) + gu) * stride + half_off;
            let py = (T::of(cy) + gv) * stride + half_off;
            let (fx, fy) = from_map.to_source(px, py);
            let (nx, ny) = to_map.to_patch(fx, fy);
            out.set(
                cx,
                cy,
                (nx - half_off) / stride - T::of(cx),
                (ny - half_off) / stride - T::of(cy),
            );
            out.set_valid(cx, cy, g.is_valid(cx, cy));
        }
    }
    out
}

/// Sample a box region every `ADVECT_STEP` pixels plus its four corners and
/// advect the samples with the flow field. Samples whose displacement falls
/// far from the robust consensus (median plus a MAD-scaled band) are dropped
/// so single false matches cannot inflate the enclosing rectangle; genuine
/// deformation spread widens the band and survives.
fn advect_box_grid<T: Scalar>(b: &BBox<T>, flow: &FlowField<T>) -> Vec<Point2<T>> {
    let mut points = Vec::new();
    let step = T::of(ADVECT_STEP);
    let mut y = b.y;
    loop {
        let mut x = b.x;
        loop {
            points.push(Point2::new(x, y));
            if x >= b.right() {
                break;
            }
            x = (x + step).min(b.right());
        }
        if y >= b.bottom() {
            break;
        }
        y = (y + step).min(b.bottom());
    }
    for p in [
        b.top_left(),
        Point2::new(b.right(), b.y),
        Point2::new(b.x, b.bottom()),
        b.bottom_right(),
    ] {
        points.push(p);
    }
    let flows: Vec<(T, T)> = points.iter().map(|p| flow.sample(p.x, p.y)).collect();
    let median = |vals: &mut Vec<T>| -> T {
        vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        vals[vals.len() / 2]
    };
    let mut us: Vec<T> = flows.iter().map(|f| f.0).collect();
    let mut vs: Vec<T> = flows.iter().map(|f| f.1).collect();
    let mu = median(&mut us);
    let mv = median(&mut vs);
    let mut devs: Vec<T> =
        flows.iter().map(|f| (f.0 - mu).abs().max((f.1 - mv).abs())).collect();
    let mut sorted = devs.clone();
    let mad = median(&mut sorted);
    let threshold = (mad * T::c(3.0)).max(T::c(2.0));
    let mut out = Vec::with_capacity(points.len());
    for ((p, f), dev) in points.iter().zip(flows.iter()).zip(devs.drain(..)) {
        if dev <= threshold {
            out.push(Point2::new(p.x + f.0, p.y + f.1));
        }
    }
    if out.len() < points.len() / 4 {
        return points
            .iter()
            .zip(flows.iter())
            .map(|(p, f)| Point2::new(p.x + f.0, p.y + f.1))
            .collect();
    }
    out
}

/// Batch driver: initialize on the first frame and step through the rest.
pub fn track_sequence<T: Scalar>(
    frames: &[Image<T>],
    b0: BBox<T>,
    config: TrackerConfig<T>,
) -> Result<Vec<TrackResult<T>>> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames { need: 2, got: frames.len() });
    }
    let mut tracker = Tracker::init(&frames[0], b0, config)?;
    let mut results = Vec::with_capacity(frames.len() - 1);
    for frame in &frames[1..] {
        results.push(tracker.step(frame)?);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, standard_benchmark_spec, Deform, Motion, SynthSpec, Texture};

    fn small_spec(shift: (f64, f64), frames: usize, seed: u64) -> SynthSpec<f64> {
        SynthSpec {
            seed,
            frames,
            width: 160,
            height: 160,
            texture: Texture::Perlin { octaves: 4, base_period: 40.0 },
            motion: Motion { shift, ..Motion::default() },
            deform: Deform::None,
            illumination: crate::synth::Illumination::default(),
            occluder: None,
            init_box: BBox::new(56.0, 56.0, 48.0, 48.0),
        }
    }

    #[test]
    fn init_validation() {
        let img = Image::<f64>::from_fn(64, 64, |x, y| ((x + y) % 9) as f64 / 9.0);
        let cfg = TrackerConfig::default();
        assert!(matches!(
            Tracker::init(&img, BBox::new(-5.0, 0.0, 20.0, 20.0), cfg.clone()),
            Err(Error::BoxOutsideFrame)
        ));
        assert!(matches!(
            Tracker::init(&img, BBox::new(0.0, 0.0, 8.0, 8.0), cfg.clone()),
            Err(Error::BoxTooSmall)
        ));
        let t = Tracker::init(&img, BBox::new(10.0, 10.0, 20.0, 20.0), cfg).unwrap();
        assert_eq!(t.state().frame_index, 0);
        assert_eq!(t.state().status, TrackerStatus::Tracking);
        assert_eq!(t.state().template.scale, 1.0);
        assert!(t.state().template.g.u_plane().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn static_frame_is_fixed_point() {
        let frames = generate(&small_spec((0.0, 0.0), 3, 11)).unwrap();
        let b0 = BBox::new(56.0, 56.0, 48.0, 48.0);
        let mut tracker = Tracker::init(&frames[0].image, b0, TrackerConfig::default()).unwrap();
        let r = tracker.step(&frames[1].image).unwrap();
        assert_eq!(r.status, TrackStatus::Tracked);
        let b = r.bbox.unwrap();
        assert!((b.x - b0.x).abs() <= 0.5, "x {}", b.x);
        assert!((b.y - b0.y).abs() <= 0.5, "y {}", b.y);
        assert!((b.w - b0.w).abs() <= 1.0, "w {}", b.w);
        assert!(b.iou(&b0) >= 0.95);
    }

    #[test]
    fn translation_tracked() {
        let frames = generate(&small_spec((3.0, 2.0), 6, 12)).unwrap();
        let b0 = frames[0].gt_box;
        let cfg = TrackerConfig::default();
        let results =
            track_sequence(&frames.iter().map(|f| f.image.clone()).collect::<Vec<_>>(), b0, cfg)
                .unwrap();
        for (t, r) in results.iter().enumerate() {
            assert_eq!(r.status, TrackStatus::Tracked, "frame {}", t + 1);
            let b = r.bbox.unwrap();
            let gt = &frames[t + 1].gt_box;
            let dc = b.center().sub(gt.center()).norm();
            assert!(dc <= 2.0, "frame {}: center error {dc}", t + 1);
            assert!(b.iou(gt) >= 0.7, "frame {}: iou {}", t + 1, b.iou(gt));
        }
    }

    #[test]
    fn occlusion_gate_triggers() {
        let mut spec = small_spec((0.0, 0.0), 4, 13);
        spec.occluder = Some(crate::synth::Occluder {
            shape: crate::synth::SpriteShape::Square,
            size: 44.0,
            entry_frame: 2,
            velocity: (0.0, 0.0),
            start: Some((80.0, 80.0)),
        });
        let frames = generate(&spec).unwrap();
        let b0 = BBox::new(56.0, 56.0, 48.0, 48.0);
        let mut tracker = Tracker::init(&frames[0].image, b0, TrackerConfig::default()).unwrap();
        let r1 = tracker.step(&frames[1].image).unwrap();
        assert_eq!(r1.status, TrackStatus::Tracked);
        // sprite covers ~70% of the box area at frame 2
        let r2 = tracker.step(&frames[2].image).unwrap();
        assert_eq!(r2.status, TrackStatus::Occluded, "occ {}", r2.occlusion_fraction);
        assert!(r2.bbox.is_none());
        assert!(r2.occlusion_fraction > 0.5);
        // state frozen except the frame counter
        assert_eq!(tracker.state().prev_bbox, r1.bbox.unwrap());
        assert_eq!(tracker.state().frame_index, 2);
    }

    #[test]
    fn occlusion_fraction_status_consistency() {
        // gate is exactly occ_frac > beta
        let mut spec = small_spec((0.0, 0.0), 4, 14);
        spec.occluder = Some(crate::synth::Occluder {
            shape: crate::synth::SpriteShape::Square,
            size: 40.0,
            entry_frame: 2,
            velocity: (0.0, 0.0),
            start: Some((80.0, 80.0)),
        });
        let frames = generate(&spec).unwrap();
        let b0 = BBox::new(56.0, 56.0, 48.0, 48.0);
        for beta in [0.1, 0.5, 0.9] {
            let mut cfg = TrackerConfig::<f64>::default();
            cfg.beta = beta;
            let mut tracker = Tracker::init(&frames[0].image, b0, cfg).unwrap();
            for f in &frames[1..] {
                let r = tracker.step(&f.image).unwrap();
                let expect_occluded = r.occlusion_fraction > beta;
                assert_eq!(r.status == TrackStatus::Occluded, expect_occluded);
                assert_eq!(r.bbox.is_none(), expect_occluded);
            }
        }
    }

    #[test]
    fn modes_run_and_are_deterministic() {
        let spec = standard_benchmark_spec::<f64>(3, 8);
        let frames = generate(&spec).unwrap();
        let images: Vec<_> = frames.iter().map(|f| f.image.clone()).collect();
        let b0 = frames[0].gt_box;
        for mode in [Mode::InterFrameOnly, Mode::TemplateOnly, Mode::Full] {
            let mut cfg = TrackerConfig::<f64>::default();
            cfg.mode = mode;
            let a = track_sequence(&images, b0, cfg.clone()).unwrap();
            let b = track_sequence(&images, b0, cfg).unwrap();
            assert_eq!(a, b, "mode {mode:?} not deterministic");
            assert!(a.iter().all(|r| r.status == TrackStatus::Tracked));
        }
    }

    #[test]
    fn step_after_lost_errors() {
        let frames = generate(&small_spec((0.0, 0.0), 3, 15)).unwrap();
        let b0 = BBox::new(56.0, 56.0, 48.0, 48.0);
        let mut tracker = Tracker::init(&frames[0].image, b0, TrackerConfig::default()).unwrap();
        tracker.state.status = TrackerStatus::Lost;
        assert!(matches!(tracker.step(&frames[1].image), Err(Error::TrackerLost)));
    }

    #[test]
    fn too_few_frames() {
        let img = Image::<f64>::from_fn(64, 64, |x, _| x as f64 / 64.0);
        assert!(matches!(
            track_sequence(&[img], BBox::new(10.0, 10.0, 20.0, 20.0), TrackerConfig::default()),
            Err(Error::TooFewFrames { .. })
        ));
    }
}
