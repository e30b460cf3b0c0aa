//! Box and marker drawing on RGB frames.

use adatrack::geometry::BBox;
use image::{Rgb, RgbImage};

pub const PRED_COLOR: Rgb<u8> = Rgb([66, 135, 245]);
pub const GT_COLOR: Rgb<u8> = Rgb([80, 220, 100]);
pub const OCCLUDED_COLOR: Rgb<u8> = Rgb([235, 64, 52]);

/// 2-px box outline, clamped to the frame.
pub fn draw_rect(img: &mut RgbImage, b: &BBox<f32>, color: Rgb<u8>) {
    let w = img.width() as i64;
    let h = img.height() as i64;
    let x0 = b.x.round() as i64;
    let y0 = b.y.round() as i64;
    let x1 = (b.x + b.w).round() as i64;
    let y1 = (b.y + b.h).round() as i64;
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < w && y < h {
            img.put_pixel(x as u32, y as u32, color);
        }
    };
    for t in 0..2i64 {
        for x in x0..=x1 {
            put(x, y0 + t);
            put(x, y1 - t);
        }
        for y in y0..=y1 {
            put(x0 + t, y);
            put(x1 - t, y);
        }
    }
}

/// Filled corner marker stamped on frames without a prediction.
pub fn draw_occlusion_marker(img: &mut RgbImage, color: Rgb<u8>) {
    for y in 4..14u32 {
        for x in 4..14u32 {
            if x < img.width() && y < img.height() {
                img.put_pixel(x, y, color);
            }
        }
    }
}
