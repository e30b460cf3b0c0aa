//! 4-D correlation cost volume between two feature grids, with an
//! average-pooled pyramid over the target dimensions.

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::scalar::Scalar;

/// Correlation volume: entry `(sx, sy, dx, dy)` holds the dot product of the
/// source cell `(sx, sy)` descriptor with the target cell `(dx, dy)`
/// descriptor. Level `l` pools the target dimensions by `2^l` (2x2 average,
/// floor-halved, minimum 1). With L2-normalized descriptors every entry lies
/// in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct CostVolume<T> {
    src_w: usize,
    src_h: usize,
    levels: Vec<Level<T>>,
}

#[derive(Debug, Clone)]
struct Level<T> {
    dst_w: usize,
    dst_h: usize,
    /// Layout: `[src_index * dst_w * dst_h + dy * dst_w + dx]`.
    data: Vec<T>,
}

impl<T: Scalar> CostVolume<T> {
    pub fn src_width(&self) -> usize {
        self.src_w
    }

    pub fn src_height(&self) -> usize {
        self.src_h
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dst_extent(&self, level: usize) -> (usize, usize) {
        let l = &self.levels[level];
        (l.dst_w, l.dst_h)
    }

    /// Raw entry at integer indices.
    #[inline]
    pub fn at(&self, level: usize, sx: usize, sy: usize, dx: usize, dy: usize) -> T {
        let l = &self.levels[level];
        l.data[(sy * self.src_w + sx) * l.dst_w * l.dst_h + dy * l.dst_w + dx]
    }

    /// Bilinear sample over the source dimensions at a fractional position,
    /// for a fixed integer target cell. This reads the same storage as a
    /// transposed volume would, so the reverse direction of a feature pair
    /// never needs its own build.
    pub fn sample_src(&self, level: usize, sx: T, sy: T, dx: usize, dy: usize) -> T {
        let l = &self.levels[level];
        let plane = l.dst_w * l.dst_h;
        let off = dy * l.dst_w + dx;
        let max_x = T::of(self.src_w - 1);
        let max_y = T::of(self.src_h - 1);
        let sx = sx.max(T::zero()).min(max_x);
        let sy = sy.max(T::zero()).min(max_y);
        let x0f = sx.floor();
        let y0f = sy.floor();
        let fx = sx - x0f;
        let fy = sy - y0f;
        let x0 = x0f.as_f64() as usize;
        let y0 = y0f.as_f64() as usize;
        let x1 = (x0 + 1).min(self.src_w - 1);
        let y1 = (y0 + 1).min(self.src_h - 1);
        let read = |x: usize, y: usize| l.data[(y * self.src_w + x) * plane + off];
        let p00 = read(x0, y0);
        if fx == T::zero() && fy == T::zero() {
            return p00;
        }
        let one = T::one();
        let top = p00 * (one - fx) + read(x1, y0) * fx;
        let bot = read(x0, y1) * (one - fx) + read(x1, y1) * fx;
        top * (one - fy) + bot * fy
    }

    /// Bilinear sample over the target dimensions at a fractional position,
    /// clamped to the target extent.
    pub fn sample_dst(&self, level: usize, sx: usize, sy: usize, dx: T, dy: T) -> T {
        let l = &self.levels[level];
        let base = (sy * self.src_w + sx) * l.dst_w * l.dst_h;
        let max_x = T::of(l.dst_w - 1);
        let max_y = T::of(l.dst_h - 1);
        let dx = dx.max(T::zero()).min(max_x);
        let dy = dy.max(T::zero()).min(max_y);
        let x0f = dx.floor();
        let y0f = dy.floor();
        let fx = dx - x0f;
        let fy = dy - y0f;
        let x0 = x0f.as_f64() as usize;
        let y0 = y0f.as_f64() as usize;
        let x1 = (x0 + 1).min(l.dst_w - 1);
        let y1 = (y0 + 1).min(l.dst_h - 1);
        let p00 = l.data[base + y0 * l.dst_w + x0];
        if fx == T::zero() && fy == T::zero() {
            return p00;
        }
        let p10 = l.data[base + y0 * l.dst_w + x1];
        let p01 = l.data[base + y1 * l.dst_w + x0];
        let p11 = l.data[base + y1 * l.dst_w + x1];
        let one = T::one();
        let top = p00 * (one - fx) + p10 * fx;
        let bot = p01 * (one - fx) + p11 * fx;
        top * (one - fy) + bot * fy
    }
}

/// Build the all-pairs correlation volume between `src` and `dst` feature
/// grids with `levels` pooled pyramid levels (level 0 is unpooled).
pub fn build_cost_volume<T: Scalar>(
    src: &FeatureMap<T>,
    dst: &FeatureMap<T>,
    levels: usize,
) -> Result<CostVolume<T>> {
    if src.channels() != dst.channels() {
        return Err(Error::ChannelMismatch { src: src.channels(), dst: dst.channels() });
    }
    if levels == 0 {
        return Err(Error::ZeroIterations);
    }
    let sw = src.width();
    let sh = src.height();
    let dw = dst.width();
    let dh = dst.height();
    let nc = src.channels();
    let mut base = vec![T::zero(); sw * sh * dw * dh];
    let dst_data = dst.data();
    for sy in 0..sh {
        for sx in 0..sw {
            let sf = src.cell(sx, sy);
            let out = &mut base[(sy * sw + sx) * dw * dh..(sy * sw + sx + 1) * dw * dh];
            for di in 0..dw * dh {
                let df = &dst_data[di * nc..(di + 1) * nc];
                let mut acc = T::zero();
                for c in 0..nc {
                    acc += sf[c] * df[c];
                }
                out[di] = acc;
            }
        }
    }
    let mut vol = CostVolume {
        src_w: sw,
        src_h: sh,
        levels: vec![Level { dst_w: dw, dst_h: dh, data: base }],
    };
    let quarter = T::c(0.25);
    for _ in 1..levels {
        let prev = vol.levels.last().unwrap();
        let (pw, ph) = (prev.dst_w, prev.dst_h);
        let nw = (pw / 2).max(1);
        let nh = (ph / 2).max(1);
        let mut data = vec![T::zero(); sw * sh * nw * nh];
        for si in 0..sw * sh {
            let src_slice = &prev.data[si * pw * ph..(si + 1) * pw * ph];
            let out = &mut data[si * nw * nh..(si + 1) * nw * nh];
            for ny in 0..nh {
                for nx in 0..nw {
                    let x0 = (2 * nx).min(pw - 1);
                    let x1 = (2 * nx + 1).min(pw - 1);
                    let y0 = (2 * ny).min(ph - 1);
                    let y1 = (2 * ny + 1).min(ph - 1);
                    out[ny * nw + nx] = (src_slice[y0 * pw + x0]
                        + src_slice[y0 * pw + x1]
                        + src_slice[y1 * pw + x0]
                        + src_slice[y1 * pw + x1])
                        * quarter;
                }
            }
        }
        vol.levels.push(Level { dst_w: nw, dst_h: nh, data });
    }
    Ok(vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMap;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit_map(w: usize, h: usize, c: usize, seed: u64) -> FeatureMap<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = FeatureMap::new(w, h, c);
        for v in m.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        m.normalize_cells();
        m
    }

    #[test]
    fn self_correlation_peaks_on_diagonal() {
        let m = random_unit_map(6, 5, 8, 1);
        let vol = build_cost_volume(&m, &m, 1).unwrap();
        for sy in 0..5 {
            for sx in 0..6 {
                let self_corr = vol.at(0, sx, sy, sx, sy);
                assert_relative_eq!(self_corr, 1.0, epsilon = 1e-9);
                for dy in 0..5 {
                    for dx in 0..6 {
                        assert!(vol.at(0, sx, sy, dx, dy) <= self_corr + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn orthogonal_features_give_zero() {
        let mut a = FeatureMap::<f64>::new(3, 3, 4);
        let mut b = FeatureMap::new(3, 3, 4);
        for i in 0..9 {
            a.data_mut()[i * 4] = 1.0;
            b.data_mut()[i * 4 + 1] = 1.0;
        }
        let vol = build_cost_volume(&a, &b, 2).unwrap();
        for l in 0..2 {
            let (dw, dh) = vol.dst_extent(l);
            for sy in 0..3 {
                for sx in 0..3 {
                    for dy in 0..dh {
                        for dx in 0..dw {
                            assert_eq!(vol.at(l, sx, sy, dx, dy), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn entries_match_brute_force() {
        let a = random_unit_map(4, 4, 6, 2);
        let b = random_unit_map(4, 4, 6, 3);
        let vol = build_cost_volume(&a, &b, 1).unwrap();
        for sy in 0..4 {
            for sx in 0..4 {
                for dy in 0..4 {
                    for dx in 0..4 {
                        let mut dot = 0.0;
                        for c in 0..6 {
                            dot += a.cell(sx, sy)[c] * b.cell(dx, dy)[c];
                        }
                        assert_relative_eq!(vol.at(0, sx, sy, dx, dy), dot, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn pooled_level_is_2x2_average() {
        let a = random_unit_map(2, 2, 4, 4);
        let b = random_unit_map(8, 6, 4, 5);
        let vol = build_cost_volume(&a, &b, 3).unwrap();
        assert_eq!(vol.dst_extent(0), (8, 6));
        assert_eq!(vol.dst_extent(1), (4, 3));
        assert_eq!(vol.dst_extent(2), (2, 1));
        for sy in 0..2 {
            for sx in 0..2 {
                for ny in 0..3 {
                    for nx in 0..4 {
                        let avg = (vol.at(0, sx, sy, 2 * nx, 2 * ny)
                            + vol.at(0, sx, sy, 2 * nx + 1, 2 * ny)
                            + vol.at(0, sx, sy, 2 * nx, 2 * ny + 1)
                            + vol.at(0, sx, sy, 2 * nx + 1, 2 * ny + 1))
                            / 4.0;
                        assert_relative_eq!(vol.at(1, sx, sy, nx, ny), avg, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let a = FeatureMap::<f64>::new(2, 2, 4);
        let b = FeatureMap::<f64>::new(2, 2, 5);
        assert!(matches!(
            build_cost_volume(&a, &b, 1),
            Err(crate::Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn values_bounded_for_unit_vectors() {
        let a = random_unit_map(5, 5, 8, 6);
        let b = random_unit_map(5, 5, 8, 7);
        let vol = build_cost_volume(&a, &b, 2).unwrap();
        for l in 0..2 {
            let (dw, dh) = vol.dst_extent(l);
            for sy in 0..5 {
                for sx in 0..5 {
                    for dy in 0..dh {
                        for dx in 0..dw {
                            let v = vol.at(l, sx, sy, dx, dy);
                            assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&v));
                        }
                    }
                }
            }
        }
    }
}
