//! Flow fields, confidence and occlusion maps, and the consistency checks
//! built on them.

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::image::PatchMap;
use crate::scalar::Scalar;

/// Per-pixel displacement field. Positive `u` points right, positive `v`
/// points down. `valid` marks pixels whose displacement is meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    width: usize,
    height: usize,
    u: Vec<T>,
    v: Vec<T>,
    valid: Vec<bool>,
}

impl<T: Scalar> FlowField<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![T::zero(); width * height],
            v: vec![T::zero(); width * height],
            valid: vec![true; width * height],
        }
    }

    /// Build from a displacement function of pixel coordinates.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (T, T)) -> Self {
        let mut out = FlowField::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let (du, dv) = f(x, y);
                out.u[y * width + x] = du;
                out.v[y * width + x] = dv;
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (T, T) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, du: T, dv: T) {
        let i = y * self.width + x;
        self.u[i] = du;
        self.v[i] = dv;
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    #[inline]
    pub fn set_valid(&mut self, x: usize, y: usize, valid: bool) {
        self.valid[y * self.width + x] = valid;
    }

    pub fn u_plane(&self) -> &[T] {
        &self.u
    }

    pub fn v_plane(&self) -> &[T] {
        &self.v
    }

    pub fn valid_plane(&self) -> &[bool] {
        &self.valid
    }

    /// Bilinear sample of the displacement at continuous coordinates,
    /// clamped to the field extent.
    pub fn sample(&self, x: T, y: T) -> (T, T) {
        let max_x = T::of(self.width - 1);
        let max_y = T::of(self.height - 1);
        let x = x.max(T::zero()).min(max_x);
        let y = y.max(T::zero()).min(max_y);
        let x0f = x.floor();
        let y0f = y.floor();
        let fx = x - x0f;
        let fy = y - y0f;
        let x0 = x0f.as_f64() as usize;
        let y0 = y0f.as_f64() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let one = T::one();
        let blend = |p00: T, p10: T, p01: T, p11: T| -> T {
            if fx == T::zero() && fy == T::zero() {
                return p00;
            }
            let top = p00 * (one - fx) + p10 * fx;
            let bot = p01 * (one - fx) + p11 * fx;
            top * (one - fy) + bot * fy
        };
        let i = |xx: usize, yy: usize| yy * self.width + xx;
        (
            blend(self.u[i(x0, y0)], self.u[i(x1, y0)], self.u[i(x0, y1)], self.u[i(x1, y1)]),
            blend(self.v[i(x0, y0)], self.v[i(x1, y0)], self.v[i(x0, y1)], self.v[i(x1, y1)]),
        )
    }

    /// Validity at the nearest integer position.
    pub fn valid_near(&self, x: T, y: T) -> bool {
        let xi = (x.round().as_f64() as isize).clamp(0, self.width as isize - 1) as usize;
        let yi = (y.round().as_f64() as isize).clamp(0, self.height as isize - 1) as usize;
        self.valid[yi * self.width + xi]
    }

    /// Resample onto a new grid. `map` sends an output position to source
    /// coordinates; sampled displacements are multiplied by `gain` (the unit
    /// change between the grids).
    pub fn resample_with(
        &self,
        out_w: usize,
        out_h: usize,
        gain: T,
        map: impl Fn(T, T) -> (T, T),
    ) -> FlowField<T> {
        let mut out = FlowField::zeros(out_w, out_h);
        for y in 0..out_h {
            for x in 0..out_w {
                let (src_x, src_y) = map(T::of(x), T::of(y));
                let (du, dv) = self.sample(src_x, src_y);
                out.set(x, y, du * gain, dv * gain);
                out.set_valid(x, y, self.valid_near(src_x, src_y));
            }
        }
        out
    }

    fn check_same_extent(&self, other: &FlowField<T>) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ExtentMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            });
        }
        Ok(())
    }
}

/// Per-pixel reliability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> ConfidenceMap<T> {
    pub fn new(width: usize, height: usize, value: T) -> Self {
        ConfidenceMap { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height);
        ConfidenceMap { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn mean(&self) -> T {
        let mut acc = T::zero();
        for v in &self.data {
            acc += *v;
        }
        acc / T::of(self.data.len())
    }

    /// Bilinear resample of the region under `bbox` to a new extent.
    pub fn resample_region(&self, bbox: &BBox<T>, out_w: usize, out_h: usize) -> ConfidenceMap<T> {
        let map = PatchMap::new(bbox, out_w, out_h);
        let mut out = ConfidenceMap::new(out_w, out_h, T::zero());
        for y in 0..out_h {
            for x in 0..out_w {
                let (sx, sy) = map.to_source(T::of(x), T::of(y));
                let max_x = T::of(self.width - 1);
                let max_y = T::of(self.height - 1);
                let sx = sx.max(T::zero()).min(max_x);
                let sy = sy.max(T::zero()).min(max_y);
                let x0 = sx.floor();
                let y0 = sy.floor();
                let fx = sx - x0;
                let fy = sy - y0;
                let x0 = x0.as_f64() as usize;
                let y0 = y0.as_f64() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let y1 = (y0 + 1).min(self.height - 1);
                let one = T::one();
                let top = self.at(x0, y0) * (one - fx) + self.at(x1, y0) * fx;
                let bot = self.at(x0, y1) * (one - fx) + self.at(x1, y1) * fx;
                out.set(x, y, top * (one - fy) + bot * fy);
            }
        }
        out
    }
}

/// Per-pixel occlusion flags (true = occluded).
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionMap {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl OcclusionMap {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        OcclusionMap { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height);
        OcclusionMap { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count_occluded(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    /// Nearest-neighbor resample of the region under `bbox`, avoiding
    /// fractional occlusion states.
    pub fn resample_region<T: Scalar>(
        &self,
        bbox: &BBox<T>,
        out_w: usize,
        out_h: usize,
    ) -> OcclusionMap {
        let map = PatchMap::new(bbox, out_w, out_h);
        let mut out = OcclusionMap::new(out_w, out_h, false);
        for y in 0..out_h {
            for x in 0..out_w {
                let (sx, sy) = map.to_source(T::of(x), T::of(y));
                let xi = (sx.round().as_f64() as isize).clamp(0, self.width as isize - 1) as usize;
                let yi = (sy.round().as_f64() as isize).clamp(0, self.height as isize - 1) as usize;
                out.set(x, y, self.at(xi, yi));
            }
        }
        out
    }
}

/// Flow composition: `g_t(x) = g_prev(x) + v(x + g_prev(x))` with bilinear
/// lookup of `v`. Positions landing outside `v` are marked invalid.
pub fn compose_flow<T: Scalar>(g_prev: &FlowField<T>, v: &FlowField<T>) -> Result<FlowField<T>> {
    g_prev.check_same_extent(v)?;
    let w = g_prev.width();
    let h = g_prev.height();
    let mut out = FlowField::zeros(w, h);
    let max_x = T::of(w - 1);
    let max_y = T::of(h - 1);
    for y in 0..h {
        for x in 0..w {
            let (gu, gv) = g_prev.at(x, y);
            let px = T::of(x) + gu;
            let py = T::of(y) + gv;
            let inside =
                px >= T::zero() && px <= max_x && py >= T::zero() && py <= max_y;
            let (du, dv) = v.sample(px, py);
            out.set(x, y, gu + du, gv + dv);
            out.set_valid(
                x,
                y,
                g_prev.is_valid(x, y) && inside && v.valid_near(px, py),
            );
        }
    }
    Ok(out)
}

/// Thresholds of the forward-backward consistency test.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyParams<T> {
    /// Relative term weight.
    pub a: T,
    /// Absolute slack in squared pixels.
    pub b: T,
}

impl<T: Scalar> Default for ConsistencyParams<T> {
    fn default() -> Self {
        ConsistencyParams { a: T::c(0.01), b: T::c(0.5) }
    }
}

/// Forward-backward consistency check: pixel `x` is occluded iff
/// `|fwd(x) + bwd(x + fwd(x))|^2 > a (|fwd(x)|^2 + |bwd(x+fwd(x))|^2) + b`,
/// or its forward target leaves the frame, or its flow is invalid.
pub fn fb_occlusion<T: Scalar>(
    fwd: &FlowField<T>,
    bwd: &FlowField<T>,
    params: ConsistencyParams<T>,
) -> Result<OcclusionMap> {
    fwd.check_same_extent(bwd)?;
    let w = fwd.width();
    let h = fwd.height();
    let mut occ = OcclusionMap::new(w, h, false);
    let max_x = T::of(w - 1);
    let max_y = T::of(h - 1);
    for y in 0..h {
        for x in 0..w {
            if !fwd.is_valid(x, y) {
                occ.set(x, y, true);
                continue;
            }
            let (fu, fv) = fwd.at(x, y);
            let tx = T::of(x) + fu;
            let ty = T::of(y) + fv;
            if tx < T::zero() || tx > max_x || ty < T::zero() || ty > max_y {
                occ.set(x, y, true);
                continue;
            }
            let (bu, bv) = bwd.sample(tx, ty);
            let ru = fu + bu;
            let rv = fv + bv;
            let resid = ru * ru + rv * rv;
            let mag = fu * fu + fv * fv + bu * bu + bv * bv;
            occ.set(x, y, resid > params.a * mag + params.b);
        }
    }
    Ok(occ)
}

/// Fraction of pixels inside `bbox` flagged occluded. Pixels are counted by
/// centers: pixel (x, y) belongs to the box iff its center (x+0.5, y+0.5)
/// lies in `[b.x, b.x + b.w) x [b.y, b.y + b.h)`.
pub fn occlusion_fraction<T: Scalar>(occ: &OcclusionMap, bbox: &BBox<T>) -> Result<T> {
    let half = 0.5f64;
    let bx = bbox.x.as_f64();
    let by = bbox.y.as_f64();
    let bx2 = bbox.right().as_f64();
    let by2 = bbox.bottom().as_f64();
    let x0 = (bx - half).ceil().max(0.0) as usize;
    let y0 = (by - half).ceil().max(0.0) as usize;
    let x1 = (bx2 - half).ceil().min(occ.width() as f64) as usize;
    let y1 = (by2 - half).ceil().min(occ.height() as f64) as usize;
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::EmptyIntersection);
    }
    let mut flagged = 0usize;
    let mut total = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            total += 1;
            if occ.at(x, y) {
                flagged += 1;
            }
        }
    }
    Ok(T::of(flagged) / T::of(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn compose_identity_prev() {
        let v = FlowField::from_fn(8, 8, |x, y| (x as f64 * 0.1, y as f64 * -0.05));
        let g = FlowField::zeros(8, 8);
        let out = compose_flow(&g, &v).unwrap();
        assert_eq!(out.u_plane(), v.u_plane());
        assert_eq!(out.v_plane(), v.v_plane());
    }

    #[test]
    fn compose_uniform_translations_adds() {
        let a = FlowField::from_fn(16, 16, |_, _| (2.0, 0.0));
        let b = FlowField::from_fn(16, 16, |_, _| (3.0, 0.0));
        let out = compose_flow(&a, &b).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                let (u, v) = out.at(x, y);
                assert_eq!((u, v), (5.0, 0.0));
            }
        }
    }

    #[test]
    fn compose_zooms_multiplies() {
        let w = 33usize;
        let c = (w - 1) as f64 / 2.0;
        let s1 = 1.05;
        let s2 = 1.08;
        let zoom = |s: f64| {
            FlowField::from_fn(w, w, move |x, y| {
                ((s - 1.0) * (x as f64 - c), (s - 1.0) * (y as f64 - c))
            })
        };
        let out = compose_flow(&zoom(s1), &zoom(s2)).unwrap();
        let s = s1 * s2;
        for y in 0..w {
            for x in 0..w {
                if !out.is_valid(x, y) {
                    continue;
                }
                let (u, v) = out.at(x, y);
                let eu = (s - 1.0) * (x as f64 - c);
                let ev = (s - 1.0) * (y as f64 - c);
                assert!(
                    ((u - eu).powi(2) + (v - ev).powi(2)).sqrt() <= 0.2,
                    "({x},{y}): got ({u},{v}), want ({eu},{ev})"
                );
            }
        }
    }

    #[test]
    fn compose_marks_outside_invalid() {
        let g = FlowField::from_fn(8, 8, |_, _| (100.0, 0.0));
        let v = FlowField::zeros(8, 8);
        let out = compose_flow(&g, &v).unwrap();
        assert!(out.valid_plane().iter().all(|v| !v));
    }

    #[test]
    fn compose_extent_mismatch() {
        let g = FlowField::<f64>::zeros(8, 8);
        let v = FlowField::<f64>::zeros(9, 8);
        assert!(matches!(compose_flow(&g, &v), Err(Error::ExtentMismatch { .. })));
    }

    #[test]
    fn fb_occlusion_exact_inverse() {
        let w = 32usize;
        let fwd = FlowField::from_fn(w, w, |_, _| (3.0, 0.0));
        let bwd = FlowField::from_fn(w, w, |_, _| (-3.0, 0.0));
        let occ = fb_occlusion(&fwd, &bwd, ConsistencyParams::default()).unwrap();
        for y in 0..w {
            for x in 0..w {
                let expect = x as f64 + 3.0 > (w - 1) as f64;
                assert_eq!(occ.at(x, y), expect, "({x},{y})");
            }
        }
        // rightmost 3-px band occluded, rest clear
        assert_eq!(occ.count_occluded(), 3 * w);
    }

    #[test]
    fn fb_occlusion_zero_flow() {
        let z = FlowField::<f64>::zeros(16, 16);
        let occ = fb_occlusion(&z, &z, ConsistencyParams::default()).unwrap();
        assert_eq!(occ.count_occluded(), 0);
    }

    #[test]
    fn occlusion_fraction_counting() {
        let mut occ = OcclusionMap::new(10, 10, false);
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(occlusion_fraction(&occ, &b).unwrap(), 0.0);
        for y in 0..10 {
            for x in 0..5 {
                occ.set(x, y, true);
            }
        }
        assert_eq!(occlusion_fraction(&occ, &b).unwrap(), 0.5);
    }

    #[test]
    fn occlusion_fraction_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut occ = OcclusionMap::new(40, 30, false);
        for y in 0..30 {
            for x in 0..40 {
                occ.set(x, y, rng.gen_bool(0.3));
            }
        }
        let b = BBox::new(3.0, 5.0, 20.0, 12.0);
        let frac: f64 = occlusion_fraction(&occ, &b).unwrap();
        let mut hits = 0;
        let mut n = 0;
        for y in 0..30 {
            for x in 0..40 {
                let cx = x as f64 + 0.5;
                let cy = y as f64 + 0.5;
                if cx >= 3.0 && cx < 23.0 && cy >= 5.0 && cy < 17.0 {
                    n += 1;
                    if occ.at(x, y) {
                        hits += 1;
                    }
                }
            }
        }
        assert_relative_eq!(frac, hits as f64 / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn occlusion_fraction_empty_intersection() {
        let occ = OcclusionMap::new(10, 10, false);
        let b = BBox::new(50.0, 50.0, 5.0, 5.0);
        assert!(matches!(
            occlusion_fraction::<f64>(&occ, &b),
            Err(Error::EmptyIntersection)
        ));
    }

    #[test]
    fn resample_scales_displacements() {
        let f = FlowField::from_fn(9, 9, |_, _| (1.0, 2.0));
        let up = f.resample_with(17, 17, 2.0, |x, y| (x * 0.5, y * 0.5));
        for y in 0..17 {
            for x in 0..17 {
                let (u, v) = up.at(x, y);
                assert_relative_eq!(u, 2.0, epsilon = 1e-9);
                assert_relative_eq!(v, 4.0, epsilon = 1e-9);
            }
        }
    }
}
