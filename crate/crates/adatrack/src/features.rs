//! Handcrafted dense feature encoder producing stride-8 descriptor maps for
//! the flow backend and the anchor matcher.
//!
//! Each 8x8 cell aggregates three families of measurements:
//!
//! * census sign means at pixel offsets of 1, 2 and 4 px in 8 directions —
//!   invariant to uniform brightness offsets;
//! * gradient-orientation histograms (8 bins) at derivative scales 1 and 2;
//! * intensity statistics: standard deviation and contrast of the cell mean
//!   against its 3x3 cell neighborhood.
//!
//! The full bank holds 42 channels; an encoder configured with fewer
//! channels keeps a fixed prefix of the priority order below. Cell vectors
//! are L2-normalized; cells in flat regions stay all-zero and correlate to 0
//! by convention.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

/// Feature grid stride in pixels.
pub const STRIDE: usize = 8;

/// Number of channels in the full descriptor bank.
pub const MAX_CHANNELS: usize = 42;

/// Default number of channels kept from the bank.
pub const DEFAULT_CHANNELS: usize = 32;

/// Cell vectors with L2 norm below this are treated as flat and left zero.
const NORM_EPS: f64 = 1e-4;

const DIRS: [(isize, isize); 8] =
    [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// One entry of the descriptor bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Mean census sign at `scale * DIRS[dir]`.
    Census { scale: usize, dir: usize },
    /// Gradient-orientation histogram bin at derivative step `scale`.
    Gradient { scale: usize, bin: usize },
    /// Standard deviation of intensity within the cell.
    IntensityStd,
    /// Cell mean minus the mean over the 3x3 cell neighborhood.
    LocalContrast,
}

/// Priority-ordered bank; encoders keep the first `channels` entries.
pub fn channel_bank() -> Vec<Channel> {
    let mut bank = Vec::with_capacity(MAX_CHANNELS);
    for dir in 0..8 {
        bank.push(Channel::Census { scale: 1, dir });
    }
    for bin in 0..8 {
        bank.push(Channel::Gradient { scale: 1, bin });
    }
    bank.push(Channel::IntensityStd);
    bank.push(Channel::LocalContrast);
    for bin in 0..8 {
        bank.push(Channel::Gradient { scale: 2, bin });
    }
    for dir in 0..8 {
        bank.push(Channel::Census { scale: 2, dir });
    }
    for dir in 0..8 {
        bank.push(Channel::Census { scale: 4, dir });
    }
    bank
}

/// Indices of the census channels for a given channel count (used by tests
/// asserting brightness-offset invariance channel-wise).
pub fn census_channel_indices(channels: usize) -> Vec<usize> {
    channel_bank()
        .iter()
        .take(channels)
        .enumerate()
        .filter(|(_, c)| matches!(c, Channel::Census { .. }))
        .map(|(i, _)| i)
        .collect()
}

/// Indices of the gradient-histogram channels for a given channel count.
pub fn gradient_channel_indices(channels: usize) -> Vec<usize> {
    channel_bank()
        .iter()
        .take(channels)
        .enumerate()
        .filter(|(_, c)| matches!(c, Channel::Gradient { .. }))
        .map(|(i, _)| i)
        .collect()
}

/// Dense descriptor grid at 1/8 image resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        FeatureMap { width, height, channels, data: vec![T::zero(); width * height * channels] }
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
    pub fn cell(&self, x: usize, y: usize) -> &[T] {
        let base = (y * self.width + x) * self.channels;
        &self.data[base..base + self.channels]
    }

    #[inline]
    pub fn cell_mut(&mut self, x: usize, y: usize) -> &mut [T] {
        let base = (y * self.width + x) * self.channels;
        &mut self.data[base..base + self.channels]
    }

    /// Dot product between a cell here and a cell of another map.
    pub fn dot(&self, x: usize, y: usize, other: &FeatureMap<T>, ox: usize, oy: usize) -> T {
        let a = self.cell(x, y);
        let b = other.cell(ox, oy);
        let mut acc = T::zero();
        for (va, vb) in a.iter().zip(b.iter()) {
            acc += *va * *vb;
        }
        acc
    }

    /// L2-normalize every cell, leaving near-zero cells untouched.
    pub fn normalize_cells(&mut self) {
        let eps = T::c(NORM_EPS);
        for i in 0..self.width * self.height {
            let base = i * self.channels;
            let mut norm2 = T::zero();
            for c in 0..self.channels {
                let v = self.data[base + c];
                norm2 += v * v;
            }
            let norm = norm2.sqrt();
            if norm > eps {
                for c in 0..self.channels {
                    self.data[base + c] /= norm;
                }
            } else {
                for c in 0..self.channels {
                    self.data[base + c] = T::zero();
                }
            }
        }
    }

    /// True when every cell is the zero vector.
    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|v| *v == T::zero())
    }
}

/// Encode with the default channel count.
pub fn encode<T: Scalar>(img: &Image<T>) -> Result<FeatureMap<T>> {
    encode_with(img, DEFAULT_CHANNELS)
}

/// Encode an image into a stride-8 feature map with `channels` descriptor
/// channels (1..=42). Deterministic: the same input yields bit-identical
/// output.
pub fn encode_with<T: Scalar>(img: &Image<T>, channels: usize) -> Result<FeatureMap<T>> {
    if channels == 0 || channels > MAX_CHANNELS {
        return Err(Error::InvalidParameter(format!(
            "feature channels must be in 1..={MAX_CHANNELS}, got {channels}"
        )));
    }
    let w = img.width();
    let h = img.height();
    if w < STRIDE || h < STRIDE {
        return Err(Error::PatchTooSmall { width: w, height: h, min: STRIDE });
    }
    let luma = img.to_luma();
    let cw = w.div_ceil(STRIDE);
    let ch = h.div_ceil(STRIDE);
    let bank: Vec<Channel> = channel_bank().into_iter().take(channels).collect();
    let mut map = FeatureMap::new(cw, ch, channels);

    // Cell means are needed by LocalContrast before the main pass.
    let mut cell_means = vec![T::zero(); cw * ch];
    for cy in 0..ch {
        for cx in 0..cw {
            let (x0, x1, y0, y1) = cell_extent(cx, cy, w, h);
            let mut sum = T::zero();
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += luma.get(x, y, 0);
                }
            }
            cell_means[cy * cw + cx] = sum / T::of((x1 - x0) * (y1 - y0));
        }
    }

    // bank entries needed, grouped so each pixel is visited once per cell
    let mut census_entries: Vec<(usize, usize, usize)> = Vec::new(); // (channel, scale, dir)
    let mut grad_scales: Vec<usize> = Vec::new();
    let mut grad_slots = [[usize::MAX; 8]; 3]; // [scale index][bin] -> channel
    let mut std_slot = usize::MAX;
    let mut contrast_slot = usize::MAX;
    for (ci, chan) in bank.iter().enumerate() {
        match *chan {
            Channel::Census { scale, dir } => census_entries.push((ci, scale, dir)),
            Channel::Gradient { scale, bin } => {
                let si = match grad_scales.iter().position(|s| *s == scale) {
                    Some(si) => si,
                    None => {
                        grad_scales.push(scale);
                        grad_scales.len() - 1
                    }
                };
                grad_slots[si][bin] = ci;
            }
            Channel::IntensityStd => std_slot = ci,
            Channel::LocalContrast => contrast_slot = ci,
        }
    }

    for cy in 0..ch {
        for cx in 0..cw {
            let (x0, x1, y0, y1) = cell_extent(cx, cy, w, h);
            let count = T::of((x1 - x0) * (y1 - y0));
            let mean = cell_means[cy * cw + cx];
            let mut acc = vec![T::zero(); channels];
            let mut var = T::zero();
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = luma.get(x, y, 0);
                    for &(ci, scale, dir) in &census_entries {
                        let (dx, dy) = DIRS[dir];
                        let q = luma.get_clamped(
                            x as isize + dx * scale as isize,
                            y as isize + dy * scale as isize,
                            0,
                        );
                        if q > p {
                            acc[ci] += T::one();
                        } else if q < p {
                            acc[ci] -= T::one();
                        }
                    }
                    for (si, &scale) in grad_scales.iter().enumerate() {
                        let s = scale as isize;
                        let gx = luma.get_clamped(x as isize + s, y as isize, 0)
                            - luma.get_clamped(x as isize - s, y as isize, 0);
                        let gy = luma.get_clamped(x as isize, y as isize + s, 0)
                            - luma.get_clamped(x as isize, y as isize - s, 0);
                        let mag = (gx * gx + gy * gy).sqrt();
                        if mag > T::zero() {
                            let theta = gy.as_f64().atan2(gx.as_f64());
                            let b = (((theta + std::f64::consts::PI)
                                / (std::f64::consts::PI / 4.0))
                                .floor() as usize)
                                .min(7);
                            if grad_slots[si][b] != usize::MAX {
                                acc[grad_slots[si][b]] += mag;
                            }
                        }
                    }
                    if std_slot != usize::MAX {
                        let d = p - mean;
                        var += d * d;
                    }
                }
            }
            let feat = map.cell_mut(cx, cy);
            for ci in 0..channels {
                feat[ci] = acc[ci] / count;
            }
            if std_slot != usize::MAX {
                feat[std_slot] = (var / count).sqrt();
            }
            if contrast_slot != usize::MAX {
                let mut nsum = T::zero();
                let mut n = T::zero();
                for ny in cy.saturating_sub(1)..(cy + 2).min(ch) {
                    for nx in cx.saturating_sub(1)..(cx + 2).min(cw) {
                        nsum += cell_means[ny * cw + nx];
                        n += T::one();
                    }
                }
                feat[contrast_slot] = mean - nsum / n;
            }
        }
    }
    map.normalize_cells();
    Ok(map)
}

fn cell_extent(cx: usize, cy: usize, w: usize, h: usize) -> (usize, usize, usize, usize) {
    let x0 = cx * STRIDE;
    let y0 = cy * STRIDE;
    (x0, (x0 + STRIDE).min(w), y0, (y0 + STRIDE).min(h))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Texture with values quantized to 1/128 so brightness offsets cannot
    /// flip pixel-order comparisons through rounding.
    fn quantized_texture(w: usize, h: usize) -> Image<f64> {
        Image::from_fn(w, h, |x, y| {
            let v = ((x * 37 + y * 61 + (x * y) % 23) % 97) as f64 / 97.0;
            (v * 110.0).round() / 128.0 + 0.05
        })
    }

    #[test]
    fn shape_contract() {
        let img = quantized_texture(256, 256);
        let f = encode(&img).unwrap();
        assert_eq!((f.width(), f.height(), f.channels()), (32, 32, 32));
        let f = encode_with(&quantized_texture(60, 41), 16).unwrap();
        assert_eq!((f.width(), f.height(), f.channels()), (8, 6, 16));
    }

    #[test]
    fn too_small_rejected() {
        let img = Image::<f64>::new(7, 20, 1);
        assert!(matches!(encode(&img), Err(crate::Error::PatchTooSmall { .. })));
    }

    #[test]
    fn unit_norm_or_zero() {
        let f = encode(&quantized_texture(96, 88)).unwrap();
        for cy in 0..f.height() {
            for cx in 0..f.width() {
                let n: f64 = f.cell(cx, cy).iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(n == 0.0 || (n - 1.0).abs() < 1e-5, "norm {n}");
            }
        }
    }

    #[test]
    fn census_invariant_to_brightness_offset() {
        let img = quantized_texture(80, 80);
        let mut brighter = img.clone();
        for v in brighter.data_mut() {
            *v += 0.08;
        }
        let fa = encode(&img).unwrap();
        let fb = encode(&brighter).unwrap();
        let census = census_channel_indices(fa.channels());
        assert!(!census.is_empty());
        for cy in 0..fa.height() {
            for cx in 0..fa.width() {
                let a = fa.cell(cx, cy);
                let b = fb.cell(cx, cy);
                for &c in &census {
                    assert!(
                        (a[c] - b[c]).abs() < 1e-9,
                        "cell ({cx},{cy}) channel {c}: {} vs {}",
                        a[c],
                        b[c]
                    );
                }
            }
        }
    }

    #[test]
    fn constant_image_gives_zero_vectors() {
        let img = Image::from_vec(64, 64, 1, vec![0.37; 64 * 64]);
        let f = encode(&img).unwrap();
        assert!(f.is_all_zero());
        let f32_img = crate::ImageF::from_vec(64, 64, 1, vec![0.37f32; 64 * 64]);
        assert!(encode(&f32_img).unwrap().is_all_zero());
    }

    #[test]
    fn translation_equivariance_at_cell_granularity() {
        let big = quantized_texture(160, 160);
        // two 128x128 windows offset by exactly 8 px
        let a = big.crop_resample(&crate::geometry::BBox::new(0.0, 0.0, 128.0, 128.0), 128, 128);
        let b = big.crop_resample(&crate::geometry::BBox::new(8.0, 8.0, 128.0, 128.0), 128, 128);
        let fa = encode(&a).unwrap();
        let fb = encode(&b).unwrap();
        // interior cells: fb(x, y) == fa(x + 1, y + 1), bit-identical
        for cy in 2..fa.height() - 3 {
            for cx in 2..fa.width() - 3 {
                assert_eq!(fb.cell(cx, cy), fa.cell(cx + 1, cy + 1), "cell ({cx},{cy})");
            }
        }
    }

    #[test]
    fn deterministic() {
        let img = quantized_texture(96, 64);
        let f1 = encode(&img).unwrap();
        let f2 = encode(&img).unwrap();
        assert_eq!(f1.data(), f2.data());
    }
}
