//! Adaptive template maintenance: similarity-normalized warping of the
//! original template patch by the accumulated flow, and occlusion- and
//! confidence-gated feature fusion.
//!
//! The accumulated flow lives on the template feature grid (one sample per
//! 8x8 cell, values in cell units). The warp removes the global similarity
//! component — translation via the recentering term, isotropic zoom via the
//! scale ratio — so camera-like motion cancels while rotations and local
//! deformations survive in the warped patch.

use crate::error::{Error, Result};
use crate::features::{encode_with, FeatureMap, STRIDE};
use crate::flow::{ConfidenceMap, FlowField, OcclusionMap};
use crate::geometry::Point2;
use crate::image::Image;
use crate::scalar::Scalar;

/// Template state owned by one tracker: the original patch, its features,
/// the accumulated flow on the feature grid and the current scale ratio.
#[derive(Debug, Clone)]
pub struct TemplateState<T> {
    pub p0: Image<T>,
    pub f0: FeatureMap<T>,
    /// Accumulated flow on the feature grid, in cell units.
    pub g: FlowField<T>,
    /// Grid center in cell coordinates.
    pub center: Point2<T>,
    /// Current scale ratio; 1 at initialization.
    pub scale: T,
}

impl<T: Scalar> TemplateState<T> {
    pub fn new(p0: Image<T>, channels: usize) -> Result<Self> {
        let f0 = encode_with(&p0, channels)?;
        let g = FlowField::zeros(f0.width(), f0.height());
        let half = T::c(0.5);
        let center = Point2::new(
            T::of(f0.width() - 1) * half,
            T::of(f0.height() - 1) * half,
        );
        Ok(TemplateState { p0, f0, g, center, scale: T::one() })
    }
}

/// Mean radial stretch of the accumulated flow about the drifting center:
/// with `c_y = center + mean(g)`, the mean over grid points of
/// `|x + g(x) - c_y| / |x - center|`. Uniform translations give exactly 1;
/// an isotropic zoom by `s` gives `s`.
pub fn scale_ratio<T: Scalar>(g: &FlowField<T>, center: Point2<T>) -> Result<T> {
    let w = g.width();
    let h = g.height();
    let mut mean_u = T::zero();
    let mut mean_v = T::zero();
    let mut n = T::zero();
    for y in 0..h {
        for x in 0..w {
            if !g.is_valid(x, y) {
                continue;
            }
            let (u, v) = g.at(x, y);
            mean_u += u;
            mean_v += v;
            n += T::one();
        }
    }
    if n == T::zero() {
        return Err(Error::DegenerateGrid);
    }
    mean_u /= n;
    mean_v /= n;
    let cy = Point2::new(center.x + mean_u, center.y + mean_v);
    let eps = T::c(1e-9);
    let mut acc = T::zero();
    let mut count = T::zero();
    for y in 0..h {
        for x in 0..w {
            if !g.is_valid(x, y) {
                continue;
            }
            let p = Point2::new(T::of(x), T::of(y));
            let base = p.sub(center).norm();
            if base < eps {
                continue;
            }
            let (u, v) = g.at(x, y);
            let moved = Point2::new(p.x + u - cy.x, p.y + v - cy.y).norm();
            acc += moved / base;
            count += T::one();
        }
    }
    if count == T::zero() {
        return Err(Error::DegenerateGrid);
    }
    Ok(acc / count)
}

/// Warp the original template by the residual of the accumulated flow after
/// removing the global similarity: `R(x) = (x + g(x) - c_y)/S - (x - c)`,
/// sampled first-order inverse as `p0(x - R(x))`. Exact similarities
/// (translation + isotropic zoom) give back `p0` unchanged.
pub fn warp_template<T: Scalar>(state: &TemplateState<T>) -> Image<T> {
    let p0 = &state.p0;
    let g = &state.g;
    let c0 = state.center;
    let scale = state.scale;
    // drifted center from the mean of the accumulated flow
    let mut mean_u = T::zero();
    let mut mean_v = T::zero();
    let mut n = T::zero();
    for y in 0..g.height() {
        for x in 0..g.width() {
            if !g.is_valid(x, y) {
                continue;
            }
            let (u, v) = g.at(x, y);
            mean_u += u;
            mean_v += v;
            n += T::one();
        }
    }
    if n > T::zero() {
        mean_u /= n;
        mean_v /= n;
    }
    let cy = Point2::new(c0.x + mean_u, c0.y + mean_v);

    let stride = T::of(STRIDE);
    let half_off = T::c((STRIDE as f64 - 1.0) / 2.0);
    let mut out = Image::new(p0.width(), p0.height(), p0.channels());
    for py in 0..p0.height() {
        for px in 0..p0.width() {
            // pixel position in cell coordinates
            let xc = (T::of(px) - half_off) / stride;
            let yc = (T::of(py) - half_off) / stride;
            let (gu, gv) = g.sample(xc, yc);
            let rx = (xc + gu - cy.x) / scale - (xc - c0.x);
            let ry = (yc + gv - cy.y) / scale - (yc - c0.y);
            let sx = T::of(px) - rx * stride;
            let sy = T::of(py) - ry * stride;
            for c in 0..p0.channels() {
                out.set(px, py, c, p0.sample(sx, sy, c));
            }
        }
    }
    out
}

/// Occlusion- and confidence-weighted feature fusion, before the final
/// per-cell renormalization: `F = alpha * f_warped + (1 - alpha) * u (1 - o)
/// f_prev`. Exposed for the affine-in-alpha property.
pub fn fuse_features_unnormalized<T: Scalar>(
    f_warped: &FeatureMap<T>,
    f_prev_roi: &FeatureMap<T>,
    u: &ConfidenceMap<T>,
    o: &OcclusionMap,
    alpha: T,
) -> Result<FeatureMap<T>> {
    let w = f_warped.width();
    let h = f_warped.height();
    let nc = f_warped.channels();
    if f_prev_roi.width() != w
        || f_prev_roi.height() != h
        || u.width() != w
        || u.height() != h
        || o.width() != w
        || o.height() != h
    {
        return Err(Error::ExtentMismatch {
            expected_w: w,
            expected_h: h,
            got_w: f_prev_roi.width(),
            got_h: f_prev_roi.height(),
        });
    }
    if f_prev_roi.channels() != nc {
        return Err(Error::ChannelMismatch { src: nc, dst: f_prev_roi.channels() });
    }
    let one = T::one();
    let mut out = FeatureMap::new(w, h, nc);
    for y in 0..h {
        for x in 0..w {
            let gate = if o.at(x, y) { T::zero() } else { u.at(x, y) };
            let wv = f_warped.cell(x, y);
            let pv = f_prev_roi.cell(x, y);
            let cell = out.cell_mut(x, y);
            for c in 0..nc {
                cell[c] = alpha * wv[c] + (one - alpha) * gate * pv[c];
            }
        }
    }
    Ok(out)
}

/// Fused template feature, renormalized per cell (flat cells stay zero).
pub fn fuse_features<T: Scalar>(
    f_warped: &FeatureMap<T>,
    f_prev_roi: &FeatureMap<T>,
    u: &ConfidenceMap<T>,
    o: &OcclusionMap,
    alpha: T,
) -> Result<FeatureMap<T>> {
    let mut fused = fuse_features_unnormalized(f_warped, f_prev_roi, u, o, alpha)?;
    fused.normalize_cells();
    Ok(fused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, Deform, Illumination, Motion, SynthSpec, Texture};
    use crate::geometry::BBox;
    use approx::assert_relative_eq;

    fn perlin_patch(seed: u64, size: usize) -> Image<f64> {
        let spec = SynthSpec {
            seed,
            frames: 2,
            width: size,
            height: size,
            texture: Texture::Perlin { octaves: 3, base_period: 36.0 },
            motion: Motion::default(),
            deform: Deform::None,
            illumination: Illumination::default(),
            occluder: None,
            init_box: BBox::new(2.0, 2.0, 4.0, 4.0),
        };
        generate(&spec).unwrap().remove(0).image
    }

    fn state_with_flow(
        patch: Image<f64>,
        f: impl Fn(f64, f64, Point2<f64>) -> (f64, f64),
    ) -> TemplateState<f64> {
        let mut st = TemplateState::new(patch, 32).unwrap();
        let c = st.center;
        let (w, h) = (st.g.width(), st.g.height());
        for y in 0..h {
            for x in 0..w {
                let (u, v) = f(x as f64, y as f64, c);
                st.g.set(x, y, u, v);
            }
        }
        st.scale = scale_ratio(&st.g, st.center).unwrap();
        st
    }

    #[test]
    fn scale_ratio_identity_translation_zoom() {
        let patch = perlin_patch(1, 96);
        let st = TemplateState::new(patch.clone(), 32).unwrap();
        assert_eq!(scale_ratio(&st.g, st.center).unwrap(), 1.0);

        let st = state_with_flow(patch.clone(), |_, _, _| (10.0, 0.0));
        assert_relative_eq!(st.scale, 1.0, epsilon = 1e-9);

        let st = state_with_flow(patch, |x, y, c| (0.5 * (x - c.x), 0.5 * (y - c.y)));
        assert_relative_eq!(st.scale, 1.5, epsilon = 1e-3);
    }

    #[test]
    fn scale_ratio_translation_invariant() {
        let patch = perlin_patch(2, 96);
        let zoomish = state_with_flow(patch.clone(), |x, y, c| {
            (0.2 * (x - c.x) + 0.3 * (y - c.y).sin(), 0.2 * (y - c.y))
        });
        let shifted = state_with_flow(patch, |x, y, c| {
            (0.2 * (x - c.x) + 0.3 * (y - c.y).sin() + 7.25, 0.2 * (y - c.y) - 3.5)
        });
        assert_relative_eq!(zoomish.scale, shifted.scale, epsilon = 1e-9);
    }

    #[test]
    fn warp_identity_bit_exact() {
        let patch = perlin_patch(3, 96);
        let st = TemplateState::new(patch.clone(), 32).unwrap();
        let w = warp_template(&st);
        assert_eq!(w.data(), patch.data());
    }

    #[test]
    fn warp_cancels_zoom() {
        let patch = perlin_patch(4, 96);
        let st = state_with_flow(patch.clone(), |x, y, c| (0.25 * (x - c.x), 0.25 * (y - c.y)));
        assert_relative_eq!(st.scale, 1.25, epsilon = 1e-3);
        let w = warp_template(&st);
        let p = crate::image::psnr(&w, &patch).unwrap();
        assert!(p >= 40.0, "psnr {p}");
    }

    #[test]
    fn warp_cancels_translation() {
        let patch = perlin_patch(5, 96);
        let st = state_with_flow(patch.clone(), |_, _, _| (1.5, -0.75));
        let w = warp_template(&st);
        let p = crate::image::psnr(&w, &patch).unwrap();
        assert!(p >= 40.0, "psnr {p}");
    }

    #[test]
    fn warp_preserves_rotation() {
        let patch = perlin_patch(6, 96);
        let theta = 10.0f64.to_radians();
        let (sin, cos) = theta.sin_cos();
        let st = state_with_flow(patch.clone(), |x, y, c| {
            let dx = x - c.x;
            let dy = y - c.y;
            (cos * dx - sin * dy - dx, sin * dx + cos * dy - dy)
        });
        assert_relative_eq!(st.scale, 1.0, epsilon = 1e-3);
        let w = warp_template(&st);
        // analytic pull-back rotation of the patch about its pixel center
        let cpx = (96.0 - 1.0) / 2.0;
        let mut oracle = Image::new(96, 96, 1);
        for py in 0..96 {
            for px in 0..96 {
                let dx = px as f64 - cpx;
                let dy = py as f64 - cpx;
                let sx = cpx + cos * dx + sin * dy;
                let sy = cpx - sin * dx + cos * dy;
                oracle.set(px, py, 0, patch.sample(sx, sy, 0));
            }
        }
        let s = crate::image::ssim_central(&w, &oracle, 0.7).unwrap();
        assert!(s >= 0.9, "ssim {s}");
    }

    #[test]
    fn fuse_basic_cases() {
        let patch = perlin_patch(7, 64);
        let roi = perlin_patch(8, 64);
        let fw = encode_with(&patch, 32).unwrap();
        let fp = encode_with(&roi, 32).unwrap();
        let (w, h) = (fw.width(), fw.height());
        let ones = ConfidenceMap::new(w, h, 1.0);
        let clear = OcclusionMap::new(w, h, false);
        let blocked = OcclusionMap::new(w, h, true);

        // alpha = 1: the warped features pass through
        let f = fuse_features(&fw, &fp, &ones, &clear, 1.0).unwrap();
        for (a, b) in f.data().iter().zip(fw.data().iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-6);
        }
        // alpha = 0, fully occluded: zero output
        let f = fuse_features(&fw, &fp, &ones, &blocked, 0.0).unwrap();
        assert!(f.is_all_zero());
        // alpha = 0, visible, full confidence: previous features pass
        let f = fuse_features(&fw, &fp, &ones, &clear, 0.0).unwrap();
        for (a, b) in f.data().iter().zip(fp.data().iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-6);
        }
    }

    #[test]
    fn fuse_affine_in_alpha() {
        let patch = perlin_patch(9, 64);
        let roi = perlin_patch(10, 64);
        let fw = encode_with(&patch, 32).unwrap();
        let fp = encode_with(&roi, 32).unwrap();
        let (w, h) = (fw.width(), fw.height());
        let mut u = ConfidenceMap::new(w, h, 0.0);
        for y in 0..h {
            for x in 0..w {
                u.set(x, y, ((x * 13 + y * 7) % 10) as f64 / 10.0);
            }
        }
        let mut o = OcclusionMap::new(w, h, false);
        for y in 0..h {
            o.set(y % w, y, true);
        }
        let f0 = fuse_features_unnormalized(&fw, &fp, &u, &o, 0.0).unwrap();
        let f1 = fuse_features_unnormalized(&fw, &fp, &u, &o, 1.0).unwrap();
        for alpha in [0.25, 0.5, 0.8] {
            let fa = fuse_features_unnormalized(&fw, &fp, &u, &o, alpha).unwrap();
            for i in 0..fa.data().len() {
                let blend = alpha * f1.data()[i] + (1.0 - alpha) * f0.data()[i];
                assert_relative_eq!(fa.data()[i], blend, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn occluded_cells_never_contribute() {
        let patch = perlin_patch(11, 64);
        let roi = perlin_patch(12, 64);
        let fw = encode_with(&patch, 32).unwrap();
        let mut fp = encode_with(&roi, 32).unwrap();
        let (w, h) = (fw.width(), fw.height());
        let u = ConfidenceMap::new(w, h, 0.9);
        let mut o = OcclusionMap::new(w, h, false);
        o.set(2, 3, true);
        o.set(5, 1, true);
        let before = fuse_features(&fw, &fp, &u, &o, 0.4).unwrap();
        // perturb the previous features only at occluded cells
        for (cx, cy) in [(2usize, 3usize), (5, 1)] {
            for c in 0..fp.channels() {
                fp.cell_mut(cx, cy)[c] = 123.0 + c as f64;
            }
        }
        let after = fuse_features(&fw, &fp, &u, &o, 0.4).unwrap();
        assert_eq!(before.data(), after.data());
    }
}
