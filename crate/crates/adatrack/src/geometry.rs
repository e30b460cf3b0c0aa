//! Box and grid arithmetic shared by every stage: IoU/GIoU, box expansion,
//! min-max enclosure of point sets.
//!
//! Boxes are stored sub-pixel; rasterization happens only when something is
//! actually sampled.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Axis-aligned box: left, top, width, height in pixels (sub-pixel allowed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

/// A 2-D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> T {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn sub(self, o: Point2<T>) -> Point2<T> {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point2<T>) -> Point2<T> {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> BBox<T> {
    /// Build a box; width and height must be positive and all fields finite.
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        debug_assert!(w > T::zero() && h > T::zero(), "box extents must be positive");
        debug_assert!(
            x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite(),
            "box fields must be finite"
        );
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> T {
        self.x + self.w
    }

    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn center(&self) -> Point2<T> {
        let half = T::c(0.5);
        Point2::new(self.x + self.w * half, self.y + self.h * half)
    }

    pub fn top_left(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }

    pub fn bottom_right(&self) -> Point2<T> {
        Point2::new(self.right(), self.bottom())
    }

    /// Intersection area with another box; zero when disjoint.
    pub fn intersection_area(&self, o: &BBox<T>) -> T {
        let ix = self.right().min(o.right()) - self.x.max(o.x);
        let iy = self.bottom().min(o.bottom()) - self.y.max(o.y);
        if ix > T::zero() && iy > T::zero() {
            ix * iy
        } else {
            T::zero()
        }
    }

    /// Intersection over union; 0 when disjoint.
    pub fn iou(&self, o: &BBox<T>) -> T {
        let inter = self.intersection_area(o);
        let union = self.area() + o.area() - inter;
        inter / union
    }

    /// Generalized IoU: `iou - (enclosing - union) / enclosing`, in (-1, 1].
    pub fn giou(&self, o: &BBox<T>) -> T {
        let inter = self.intersection_area(o);
        let union = self.area() + o.area() - inter;
        let ex = self.right().max(o.right()) - self.x.min(o.x);
        let ey = self.bottom().max(o.bottom()) - self.y.min(o.y);
        let enclosing = ex * ey;
        inter / union - (enclosing - union) / enclosing
    }

    /// Euclidean distance between box centers.
    pub fn center_distance(&self, o: &BBox<T>) -> T {
        self.center().sub(o.center()).norm()
    }

    /// Scale the box about its center by `factor`, then translate it back
    /// inside `bounds` (width, height) rather than shrinking it, so the
    /// expanded region keeps its size near borders. Only when the expanded
    /// box exceeds the whole frame is it clipped to the frame.
    pub fn expand(&self, factor: T, bounds: (T, T)) -> BBox<T> {
        debug_assert!(factor > T::zero());
        let (bw, bh) = bounds;
        let c = self.center();
        let mut w = self.w * factor;
        let mut h = self.h * factor;
        w = w.min(bw);
        h = h.min(bh);
        let half = T::c(0.5);
        let mut x = c.x - w * half;
        let mut y = c.y - h * half;
        x = x.max(T::zero()).min(bw - w);
        y = y.max(T::zero()).min(bh - h);
        BBox::new(x, y, w, h)
    }

    /// Clip the box to `bounds`, keeping at least 1 px extent.
    pub fn clip(&self, bounds: (T, T)) -> BBox<T> {
        let one = T::one();
        let (bw, bh) = bounds;
        let x0 = self.x.max(T::zero()).min(bw - one);
        let y0 = self.y.max(T::zero()).min(bh - one);
        let x1 = self.right().min(bw).max(x0 + one);
        let y1 = self.bottom().min(bh).max(y0 + one);
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// True when the box lies fully inside `bounds`.
    pub fn inside(&self, bounds: (T, T)) -> bool {
        self.x >= T::zero()
            && self.y >= T::zero()
            && self.right() <= bounds.0
            && self.bottom() <= bounds.1
    }
}

/// Smallest axis-aligned box containing all points. Zero-extent boxes are
/// floored to 1x1 px so downstream crops stay valid.
pub fn min_max_enclose<T: Scalar>(points: &[Point2<T>]) -> Result<BBox<T>> {
    if points.is_empty() {
        return Err(Error::NoPoints);
    }
    let mut min_x = points[0].x;
    let mut max_x = points[0].x;
    let mut min_y = points[0].y;
    let mut max_y = points[0].y;
    for p in &points[1..] {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    let one = T::one();
    let w = (max_x - min_x).max(one);
    let h = (max_y - min_y).max(one);
    Ok(BBox::new(min_x, min_y, w, h))
}
