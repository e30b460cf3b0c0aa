//! Dense multi-channel images with bilinear sampling and box resampling.
//!
//! Pixel values live in `[0, 1]`. Data is row-major with interleaved
//! channels. Sampling outside the image replicates the border.

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(width > 0 && height > 0 && channels > 0);
        Image { width, height, channels, data: vec![T::zero(); width * height * channels] }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height * channels);
        Image { width, height, channels, data }
    }

    /// Build a single-channel image from a function of pixel coordinates.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut img = Image::new(width, height, 1);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                img.data[y * width + x] = v;
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Clamped integer access (border replication).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> T {
        let xi = x.clamp(0, self.width as isize - 1) as usize;
        let yi = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xi, yi, c)
    }

    /// Bilinear sample at continuous coordinates with border replication.
    /// Integer coordinates return the exact stored pixel.
    pub fn sample(&self, u: T, v: T, c: usize) -> T {
        let max_x = T::of(self.width - 1);
        let max_y = T::of(self.height - 1);
        let u = u.max(T::zero()).min(max_x);
        let v = v.max(T::zero()).min(max_y);
        let x0 = u.floor();
        let y0 = v.floor();
        let fx = u - x0;
        let fy = v - y0;
        let x0 = x0.as_f64() as usize;
        let y0 = y0.as_f64() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p00 = self.get(x0, y0, c);
        if fx == T::zero() && fy == T::zero() {
            return p00;
        }
        let p10 = self.get(x1, y0, c);
        let p01 = self.get(x0, y1, c);
        let p11 = self.get(x1, y1, c);
        let one = T::one();
        let top = p00 * (one - fx) + p10 * fx;
        let bot = p01 * (one - fx) + p11 * fx;
        top * (one - fy) + bot * fy
    }

    /// Resample the region under `bbox` to `out_w x out_h`. The output grid
    /// spans pixel centers `[b.x, b.x + b.w - 1]` (and likewise vertically),
    /// so resampling the full image to its own size is the identity and
    /// bilinear interpolation stays exact on affine signals for any interior
    /// box.
    pub fn crop_resample(&self, bbox: &BBox<T>, out_w: usize, out_h: usize) -> Image<T> {
        assert!(out_w >= 1 && out_h >= 1);
        let map = PatchMap::new(bbox, out_w, out_h);
        let mut out = Image::new(out_w, out_h, self.channels);
        for y in 0..out_h {
            for x in 0..out_w {
                let (u, v) = map.to_source(T::of(x), T::of(y));
                for c in 0..self.channels {
                    out.set(x, y, c, self.sample(u, v, c));
                }
            }
        }
        out
    }

    /// Collapse channels to a single intensity plane (mean over channels).
    pub fn to_luma(&self) -> Image<T> {
        if self.channels == 1 {
            return self.clone();
        }
        let inv = T::one() / T::of(self.channels);
        let mut out = Image::new(self.width, self.height, 1);
        for i in 0..self.width * self.height {
            let mut acc = T::zero();
            for c in 0..self.channels {
                acc += self.data[i * self.channels + c];
            }
            out.data[i] = acc * inv;
        }
        out
    }
}

/// Affine map between patch pixel coordinates and source coordinates used by
/// `crop_resample`: `source = origin + patch * scale` per axis.
#[derive(Debug, Clone, Copy)]
pub struct PatchMap<T> {
    pub origin_x: T,
    pub origin_y: T,
    pub scale_x: T,
    pub scale_y: T,
}

impl<T: Scalar> PatchMap<T> {
    pub fn new(bbox: &BBox<T>, out_w: usize, out_h: usize) -> Self {
        let one = T::one();
        let span_x = bbox.w - one;
        let span_y = bbox.h - one;
        let (origin_x, scale_x) = if out_w > 1 {
            (bbox.x, span_x / T::of(out_w - 1))
        } else {
            (bbox.x + span_x * T::c(0.5), T::one())
        };
        let (origin_y, scale_y) = if out_h > 1 {
            (bbox.y, span_y / T::of(out_h - 1))
        } else {
            (bbox.y + span_y * T::c(0.5), T::one())
        };
        PatchMap { origin_x, origin_y, scale_x, scale_y }
    }

    #[inline]
    pub fn to_source(&self, px: T, py: T) -> (T, T) {
        (self.origin_x + px * self.scale_x, self.origin_y + py * self.scale_y)
    }

    #[inline]
    pub fn to_patch(&self, sx: T, sy: T) -> (T, T) {
        ((sx - self.origin_x) / self.scale_x, (sy - self.origin_y) / self.scale_y)
    }

    /// Map a box given in source coordinates into patch coordinates.
    pub fn box_to_patch(&self, b: &BBox<T>) -> BBox<T> {
        let (x, y) = self.to_patch(b.x, b.y);
        BBox::new(x, y, b.w / self.scale_x, b.h / self.scale_y)
    }

    /// Map a box given in patch coordinates back to source coordinates.
    pub fn box_to_source(&self, b: &BBox<T>) -> BBox<T> {
        let (x, y) = self.to_source(b.x, b.y);
        BBox::new(x, y, b.w * self.scale_x, b.h * self.scale_y)
    }
}

/// Peak signal-to-noise ratio in dB over all channels, with unit peak.
/// Identical images give infinity.
pub fn psnr<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check_same_extent(a, b)?;
    let mut acc = 0.0f64;
    for (pa, pb) in a.data().iter().zip(b.data().iter()) {
        let d = pa.as_f64() - pb.as_f64();
        acc += d * d;
    }
    let mse = acc / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

/// Mean structural similarity over sliding 7x7 windows on the intensity
/// plane (uniform window, k1 = 0.01, k2 = 0.03, unit dynamic range).
pub fn ssim<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check_same_extent(a, b)?;
    let la = a.to_luma();
    let lb = b.to_luma();
    let w = la.width();
    let h = la.height();
    let half = 3isize;
    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;
    let mut total = 0.0;
    let mut count = 0usize;
    for cy in 0..h {
        for cx in 0..w {
            let mut sa = 0.0;
            let mut sb = 0.0;
            let mut saa = 0.0;
            let mut sbb = 0.0;
            let mut sab = 0.0;
            let mut n = 0.0;
            for dy in -half..=half {
                for dx in -half..=half {
                    let va = la.get_clamped(cx as isize + dx, cy as isize + dy, 0).as_f64();
                    let vb = lb.get_clamped(cx as isize + dx, cy as isize + dy, 0).as_f64();
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                    n += 1.0;
                }
            }
            let ma = sa / n;
            let mb = sb / n;
            let va = (saa / n - ma * ma).max(0.0);
            let vb = (sbb / n - mb * mb).max(0.0);
            let cov = sab / n - ma * mb;
            let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM restricted to the centered fraction of the image (e.g. 0.7 keeps the
/// central 70% per axis).
pub fn ssim_central<T: Scalar>(a: &Image<T>, b: &Image<T>, fraction: f64) -> Result<f64> {
    check_same_extent(a, b)?;
    let w = a.width();
    let h = a.height();
    let cw = ((w as f64 * fraction).round() as usize).clamp(1, w);
    let ch = ((h as f64 * fraction).round() as usize).clamp(1, h);
    let bx = T::of((w - cw) / 2);
    let by = T::of((h - ch) / 2);
    let region = BBox::new(bx, by, T::of(cw), T::of(ch));
    let ca = a.crop_resample(&region, cw, ch);
    let cb = b.crop_resample(&region, cw, ch);
    ssim(&ca, &cb)
}

fn check_same_extent<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::ExtentMismatch {
            expected_w: a.width(),
            expected_h: a.height(),
            got_w: b.width(),
            got_h: b.height(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp(w: usize, h: usize, ax: f64, ay: f64, b: f64) -> Image<f64> {
        Image::from_fn(w, h, |x, y| ax * x as f64 + ay * y as f64 + b)
    }

    #[test]
    fn identity_resample() {
        let img = Image::from_fn(16, 12, |x, y| ((x * 31 + y * 17) % 97) as f64 / 97.0);
        let full = BBox::new(0.0, 0.0, 16.0, 12.0);
        let out = img.crop_resample(&full, 16, 12);
        assert_eq!(out, img);
    }

    #[test]
    fn constant_stays_constant() {
        let img = Image::from_vec(10, 10, 1, vec![0.42; 100]);
        let out = img.crop_resample(&BBox::new(1.3, 2.7, 5.1, 4.2), 7, 9);
        for v in out.data() {
            assert_relative_eq!(*v, 0.42, epsilon = 1e-12);
        }
    }

    #[test]
    fn upsample_exact_on_ramp() {
        let img = ramp(16, 16, 0.01, 0.02, 0.1);
        let full = BBox::new(0.0, 0.0, 16.0, 16.0);
        let up = img.crop_resample(&full, 32, 32);
        for y in 0..32 {
            for x in 0..32 {
                let u = x as f64 * 15.0 / 31.0;
                let v = y as f64 * 15.0 / 31.0;
                assert_relative_eq!(up.get(x, y, 0), 0.01 * u + 0.02 * v + 0.1, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn affine_exact_for_random_boxes() {
        let img = ramp(40, 30, 0.013, -0.007, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = rng.gen_range(0.0..20.0);
            let y = rng.gen_range(0.0..15.0);
            let w = rng.gen_range(2.0..(39.0 - x));
            let h = rng.gen_range(2.0..(29.0 - y));
            let bb = BBox::new(x, y, w, h);
            let ow = rng.gen_range(2..25);
            let oh = rng.gen_range(2..25);
            let out = img.crop_resample(&bb, ow, oh);
            let map = PatchMap::new(&bb, ow, oh);
            for py in 0..oh {
                for px in 0..ow {
                    let (u, v) = map.to_source(px as f64, py as f64);
                    let expect = 0.013 * u - 0.007 * v + 0.5;
                    assert!((out.get(px, py, 0) - expect).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn sample_exact_at_integer_coords() {
        let img = Image::from_fn(8, 8, |x, y| (x * 8 + y) as f64 / 64.0);
        assert_eq!(img.sample(3.0, 5.0, 0), img.get(3, 5, 0));
    }

    #[test]
    fn patch_map_roundtrip() {
        let bb = BBox::new(4.5, 8.25, 33.0, 21.0);
        let map = PatchMap::new(&bb, 64, 48);
        let (u, v) = map.to_source(10.0, 20.0);
        let (px, py) = map.to_patch(u, v);
        assert_relative_eq!(px, 10.0, epsilon = 1e-9);
        assert_relative_eq!(py, 20.0, epsilon = 1e-9);
        let inner = BBox::new(10.0, 12.0, 8.0, 6.0);
        let round = map.box_to_source(&map.box_to_patch(&inner));
        assert_relative_eq!(round.x, inner.x, epsilon = 1e-9);
        assert_relative_eq!(round.w, inner.w, epsilon = 1e-9);
    }

    #[test]
    fn psnr_and_ssim_identity() {
        let img = Image::from_fn(24, 24, |x, y| ((x + y) % 13) as f64 / 13.0);
        assert!(psnr(&img, &img).unwrap().is_infinite());
        assert_relative_eq!(ssim(&img, &img).unwrap(), 1.0, epsilon = 1e-9);
    }
}
