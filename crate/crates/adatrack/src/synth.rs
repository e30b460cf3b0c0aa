//! Synthetic deformable-sequence generator with analytic ground truth.
//!
//! Frame `t` renders the base texture through the inverse of the cumulative
//! warp `phi_t = D_t . M_t`, where `M_t` composes per-frame similarities
//! (shift, zoom, rotation) and `D_t` adds a smooth displacement field
//! (sinusoidal or thin-plate drift). Because the texture is evaluated
//! analytically at warped coordinates, no resampling error accumulates
//! across frames. Ground-truth flow between consecutive frames is
//! `phi_t(phi_{t-1}^{-1}(x)) - x` with the inverse computed by Newton
//! iteration. Occluder sprites are composited after warping, so flow
//! describes surface motion while the occlusion mask marks sprite coverage.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{FlowField, OcclusionMap};
use crate::geometry::{min_max_enclose, BBox, Point2};
use crate::image::Image;
use crate::scalar::Scalar;

/// Boundary samples used to derive the ground-truth box of a warped region.
pub const BOUNDARY_SAMPLES: usize = 1000;

#[derive(Debug, Clone)]
pub struct SynthSpec<T> {
    pub seed: u64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub texture: Texture<T>,
    pub motion: Motion<T>,
    pub deform: Deform<T>,
    pub illumination: Illumination<T>,
    pub occluder: Option<Occluder<T>>,
    pub init_box: BBox<T>,
}

#[derive(Debug, Clone)]
pub enum Texture<T> {
    /// Band-limited gradient noise; `base_period` is the coarsest octave
    /// wavelength in pixels.
    Perlin { octaves: usize, base_period: T },
    Checker { period: T },
    /// Arbitrary image sampled bilinearly (clamped outside).
    Image(Image<T>),
}

/// Per-frame similarity increments. `shift_turn_deg` rotates the shift
/// direction every frame, which keeps long constant-speed trajectories
/// inside the frame.
#[derive(Debug, Clone)]
pub struct Motion<T> {
    pub shift: (T, T),
    pub shift_turn_deg: T,
    pub zoom: T,
    pub rot_deg: T,
}

impl<T: Scalar> Default for Motion<T> {
    fn default() -> Self {
        Motion { shift: (T::zero(), T::zero()), shift_turn_deg: T::zero(), zoom: T::one(), rot_deg: T::zero() }
    }
}

#[derive(Debug, Clone)]
pub enum Deform<T> {
    None,
    /// Sinusoidal displacement field with a temporal envelope that vanishes
    /// at frame 0.
    Sinusoid { amplitude: T, spatial_period: T, temporal_period: T },
    /// Thin-plate spline interpolation of `points` control displacements
    /// performing a seeded random walk of `drift` px per frame.
    ThinPlate { points: usize, drift: T },
}

#[derive(Debug, Clone)]
pub struct Illumination<T> {
    pub gain_per_frame: T,
    pub bias_per_frame: T,
}

impl<T: Scalar> Default for Illumination<T> {
    fn default() -> Self {
        Illumination { gain_per_frame: T::zero(), bias_per_frame: T::zero() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpriteShape {
    Square,
    Disc,
}

#[derive(Debug, Clone)]
pub struct Occluder<T> {
    pub shape: SpriteShape,
    pub size: T,
    pub entry_frame: usize,
    pub velocity: (T, T),
    /// Sprite center at the entry frame; defaults to just left of the frame
    /// at the initial box height.
    pub start: Option<(T, T)>,
}

#[derive(Debug, Clone)]
pub struct SynthFrame<T> {
    pub image: Image<T>,
    /// Flow from frame `t-1` to `t`; zeros on frame 0.
    pub gt_flow_from_prev: FlowField<T>,
    /// Sprite coverage at this frame.
    pub gt_occlusion: OcclusionMap,
    pub gt_box: BBox<T>,
    /// Fraction of `gt_box` (its in-frame pixels) covered by the sprite.
    pub gt_box_occluded_fraction: T,
}

impl<T: Scalar> SynthFrame<T> {
    /// A frame counts as visible when at most half of its box is covered.
    pub fn visible(&self) -> bool {
        self.gt_box_occluded_fraction.as_f64() <= 0.5
    }
}

/// 2-D affine map `x -> A x + t`.
#[derive(Debug, Clone, Copy)]
struct Affine<T> {
    a: T,
    b: T,
    c: T,
    d: T,
    tx: T,
    ty: T,
}

impl<T: Scalar> Affine<T> {
    fn identity() -> Self {
        Affine { a: T::one(), b: T::zero(), c: T::zero(), d: T::one(), tx: T::zero(), ty: T::zero() }
    }

    /// Rotation by `angle` radians and isotropic scale about `center`, then
    /// translation by `shift`.
    fn similarity(center: Point2<T>, angle: T, scale: T, shift: (T, T)) -> Self {
        let (s, c) = (angle.sin() * scale, angle.cos() * scale);
        // x' = R(x - center) + center + shift
        let tx = center.x - (c * center.x - s * center.y) + shift.0;
        let ty = center.y - (s * center.x + c * center.y) + shift.1;
        Affine { a: c, b: -s, c: s, d: c, tx, ty }
    }

    fn apply(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(self.a * p.x + self.b * p.y + self.tx, self.c * p.x + self.d * p.y + self.ty)
    }

    /// `self . other` (apply `other` first).
    fn compose(&self, other: &Affine<T>) -> Affine<T> {
        Affine {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
            tx: self.a * other.tx + self.b * other.ty + self.tx,
            ty: self.c * other.tx + self.d * other.ty + self.ty,
        }
    }

    fn inverse(&self) -> Affine<T> {
        let det = self.a * self.d - self.b * self.c;
        let ia = self.d / det;
        let ib = -self.b / det;
        let ic = -self.c / det;
        let id = self.a / det;
        Affine {
            a: ia,
            b: ib,
            c: ic,
            d: id,
            tx: -(ia * self.tx + ib * self.ty),
            ty: -(ic * self.tx + id * self.ty),
        }
    }
}

/// Seeded gradient-noise texture evaluable at arbitrary coordinates.
#[derive(Debug, Clone)]
pub struct Perlin {
    perm: Vec<usize>,
}

impl Perlin {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut perm: Vec<usize> = (0..256).collect();
        perm.shuffle(rng);
        perm.extend_from_within(0..256);
        Perlin { perm }
    }

    fn grad(&self, ix: i64, iy: i64) -> (f64, f64) {
        let h = self.perm[(self.perm[(ix & 255) as usize] + (iy & 255) as usize) & 255];
        let angle = h as f64 * (std::f64::consts::TAU / 256.0);
        (angle.cos(), angle.sin())
    }

    /// Single-octave noise, roughly in [-0.75, 0.75].
    pub fn noise(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (ix, iy) = (x0 as i64, y0 as i64);
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let u = fade(fx);
        let v = fade(fy);
        let dot = |gx: i64, gy: i64, dx: f64, dy: f64| {
            let g = self.grad(gx, gy);
            g.0 * dx + g.1 * dy
        };
        let n00 = dot(ix, iy, fx, fy);
        let n10 = dot(ix + 1, iy, fx - 1.0, fy);
        let n01 = dot(ix, iy + 1, fx, fy - 1.0);
        let n11 = dot(ix + 1, iy + 1, fx - 1.0, fy - 1.0);
        let nx0 = n00 + u * (n10 - n00);
        let nx1 = n01 + u * (n11 - n01);
        nx0 + v * (nx1 - nx0)
    }

    /// Multi-octave fractal noise mapped into (0, 1).
    pub fn fbm(&self, x: f64, y: f64, octaves: usize, base_period: f64) -> f64 {
        let mut acc = 0.0;
        let mut amp = 1.0;
        let mut norm = 0.0;
        let mut period = base_period;
        for _ in 0..octaves.max(1) {
            acc += amp * self.noise(x / period, y / period);
            norm += amp;
            amp *= 0.55;
            period *= 0.5;
            if period < 6.0 {
                break;
            }
        }
        (0.5 + 0.55 * acc / norm).clamp(0.02, 0.98)
    }
}

struct TextureSampler<'a, T> {
    texture: &'a Texture<T>,
    perlin: Perlin,
}

impl<'a, T: Scalar> TextureSampler<'a, T> {
    fn sample(&self, p: Point2<T>) -> T {
        match self.texture {
            Texture::Perlin { octaves, base_period } => T::c(self.perlin.fbm(
                p.x.as_f64(),
                p.y.as_f64(),
                *octaves,
                base_period.as_f64(),
            )),
            Texture::Checker { period } => {
                let px = (p.x.as_f64() / period.as_f64()).floor() as i64;
                let py = (p.y.as_f64() / period.as_f64()).floor() as i64;
                if (px + py).rem_euclid(2) == 0 {
                    T::c(0.3)
                } else {
                    T::c(0.75)
                }
            }
            Texture::Image(img) => img.sample(p.x, p.y, 0),
        }
    }
}

/// Cumulative warp state for all frames of a spec.
struct WarpStack<T> {
    affines: Vec<Affine<T>>,
    inverses: Vec<Affine<T>>,
    deform: DeformEval<T>,
}

enum DeformEval<T> {
    None,
    Sinusoid { amplitude: T, spatial_period: T, temporal_period: T },
    ThinPlate(ThinPlateDrift<T>),
}

impl<T: Scalar> WarpStack<T> {
    fn displacement(&self, p: Point2<T>, t: usize) -> (T, T) {
        match &self.deform {
            DeformEval::None => (T::zero(), T::zero()),
            DeformEval::Sinusoid { amplitude, spatial_period, temporal_period } => {
                let tau = std::f64::consts::TAU;
                let env = (tau * t as f64 / temporal_period.as_f64()).sin();
                let k = tau / spatial_period.as_f64();
                let dx = amplitude.as_f64() * env * (k * p.y.as_f64() + 1.3).sin();
                let dy = amplitude.as_f64() * env * (k * p.x.as_f64() + 2.1).sin();
                (T::c(dx), T::c(dy))
            }
            DeformEval::ThinPlate(tps) => tps.displacement(p, t),
        }
    }

    /// Jacobian of the displacement field (numeric for thin-plate).
    fn displacement_jacobian(&self, p: Point2<T>, t: usize) -> [[T; 2]; 2] {
        match &self.deform {
            DeformEval::None => [[T::zero(), T::zero()], [T::zero(), T::zero()]],
            DeformEval::Sinusoid { amplitude, spatial_period, temporal_period } => {
                let tau = std::f64::consts::TAU;
                let env = (tau * t as f64 / temporal_period.as_f64()).sin();
                let k = tau / spatial_period.as_f64();
                let dxy = amplitude.as_f64() * env * k * (k * p.y.as_f64() + 1.3).cos();
                let dyx = amplitude.as_f64() * env * k * (k * p.x.as_f64() + 2.1).cos();
                [[T::zero(), T::c(dxy)], [T::c(dyx), T::zero()]]
            }
            DeformEval::ThinPlate(_) => {
                let h = T::c(0.05);
                let two_h = T::c(0.1);
                let (dx_px, dy_px) = self.displacement(Point2::new(p.x + h, p.y), t);
                let (dx_mx, dy_mx) = self.displacement(Point2::new(p.x - h, p.y), t);
                let (dx_py, dy_py) = self.displacement(Point2::new(p.x, p.y + h), t);
                let (dx_my, dy_my) = self.displacement(Point2::new(p.x, p.y - h), t);
                [
                    [(dx_px - dx_mx) / two_h, (dx_py - dx_my) / two_h],
                    [(dy_px - dy_mx) / two_h, (dy_py - dy_my) / two_h],
                ]
            }
        }
    }

    /// Forward warp of base coordinates into frame `t`.
    fn forward(&self, p: Point2<T>, t: usize) -> Point2<T> {
        let m = self.affines[t].apply(p);
        let (dx, dy) = self.displacement(m, t);
        Point2::new(m.x + dx, m.y + dy)
    }

    /// Inverse warp by Newton iteration on the displacement stage, then the
    /// exact affine inverse.
    fn inverse(&self, x: Point2<T>, t: usize) -> Point2<T> {
        let mut y = x;
        for _ in 0..30 {
            let (dx, dy) = self.displacement(y, t);
            let rx = y.x + dx - x.x;
            let ry = y.y + dy - x.y;
            let jac = self.displacement_jacobian(y, t);
            // J = I + grad d
            let a = T::one() + jac[0][0];
            let b = jac[0][1];
            let c = jac[1][0];
            let d = T::one() + jac[1][1];
            let det = a * d - b * c;
            let sx = (d * rx - b * ry) / det;
            let sy = (a * ry - c * rx) / det;
            y = Point2::new(y.x - sx, y.y - sy);
            if sx.abs().max(sy.abs()) < T::c(1e-11) {
                break;
            }
        }
        self.inverses[t].apply(y)
    }
}

/// Thin-plate spline displacements driven by randomly drifting controls.
struct ThinPlateDrift<T> {
    controls: Vec<Point2<T>>,
    /// Per frame: solved TPS coefficients for x and y displacement.
    coeffs: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> ThinPlateDrift<T> {
    fn build(
        rng: &mut ChaCha8Rng,
        points: usize,
        drift: T,
        frames: usize,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let k = points.max(3);
        let margin = 0.1;
        let controls: Vec<Point2<T>> = (0..k)
            .map(|_| {
                Point2::new(
                    T::c(rng.gen_range(width as f64 * margin..width as f64 * (1.0 - margin))),
                    T::c(rng.gen_range(height as f64 * margin..height as f64 * (1.0 - margin))),
                )
            })
            .collect();
        let mut disp = vec![(T::zero(), T::zero()); k];
        let mut coeffs = Vec::with_capacity(frames);
        let limit = (width.min(height) as f64) / 8.0;
        for t in 0..frames {
            if t > 0 {
                for d in disp.iter_mut() {
                    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                    d.0 += drift * T::c(angle.cos());
                    d.1 += drift * T::c(angle.sin());
                }
            }
            if disp.iter().any(|d| d.0.abs().as_f64() > limit || d.1.abs().as_f64() > limit) {
                return Err(Error::DeformationTooLarge);
            }
            let cx = solve_tps(&controls, &disp.iter().map(|d| d.0).collect::<Vec<_>>());
            let cy = solve_tps(&controls, &disp.iter().map(|d| d.1).collect::<Vec<_>>());
            coeffs.push((cx, cy));
        }
        Ok(ThinPlateDrift { controls, coeffs })
    }

    fn displacement(&self, p: Point2<T>, t: usize) -> (T, T) {
        let (cx, cy) = &self.coeffs[t];
        (tps_eval(&self.controls, cx, p), tps_eval(&self.controls, cy, p))
    }
}

fn tps_kernel<T: Scalar>(r2: T) -> T {
    if r2 <= T::zero() {
        T::zero()
    } else {
        r2 * (r2.sqrt().ln())
    }
}

/// Solve for thin-plate coefficients interpolating `values` at `controls`.
/// Returns `[w_0..w_k, a0, ax, ay]`.
fn solve_tps<T: Scalar>(controls: &[Point2<T>], values: &[T]) -> Vec<T> {
    let k = controls.len();
    let n = k + 3;
    let mut m = vec![T::zero(); n * n];
    let mut rhs = vec![T::zero(); n];
    for i in 0..k {
        for j in 0..k {
            let d = controls[i].sub(controls[j]);
            m[i * n + j] = tps_kernel(d.x * d.x + d.y * d.y);
        }
        m[i * n + k] = T::one();
        m[i * n + k + 1] = controls[i].x;
        m[i * n + k + 2] = controls[i].y;
        m[k * n + i] = T::one();
        m[(k + 1) * n + i] = controls[i].x;
        m[(k + 2) * n + i] = controls[i].y;
        rhs[i] = values[i];
    }
    gauss_solve(&mut m, &mut rhs, n);
    rhs
}

fn tps_eval<T: Scalar>(controls: &[Point2<T>], coeffs: &[T], p: Point2<T>) -> T {
    let k = controls.len();
    let mut acc = coeffs[k] + coeffs[k + 1] * p.x + coeffs[k + 2] * p.y;
    for (i, c) in controls.iter().enumerate() {
        let d = p.sub(*c);
        acc += coeffs[i] * tps_kernel(d.x * d.x + d.y * d.y);
    }
    acc
}

/// In-place Gaussian elimination with partial pivoting.
fn gauss_solve<T: Scalar>(m: &mut [T], rhs: &mut [T], n: usize) {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if m[row * n + col].abs() > m[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            rhs.swap(col, pivot);
        }
        let diag = m[col * n + col];
        if diag.abs() < T::c(1e-12) {
            continue;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = m[row * n + col] / diag;
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                let v = m[col * n + j] * factor;
                m[row * n + j] -= v;
            }
            let v = rhs[col] * factor;
            rhs[row] -= v;
        }
    }
    for i in 0..n {
        let diag = m[i * n + i];
        if diag.abs() >= T::c(1e-12) {
            rhs[i] /= diag;
        }
    }
}

fn validate<T: Scalar>(spec: &SynthSpec<T>) -> Result<()> {
    if spec.frames < 2 {
        return Err(Error::TooFewFrames { need: 2, got: spec.frames });
    }
    if spec.width < 16 || spec.height < 16 {
        return Err(Error::InvalidParameter("frame size below 16x16".into()));
    }
    let limit = spec.width.min(spec.height) as f64 / 8.0;
    match &spec.deform {
        Deform::None => {}
        Deform::Sinusoid { amplitude, spatial_period, .. } => {
            let a = amplitude.as_f64();
            let gradient = a * std::f64::consts::TAU / spatial_period.as_f64();
            if a > limit || gradient > 0.7 {
                return Err(Error::DeformationTooLarge);
            }
        }
        Deform::ThinPlate { points, drift } => {
            if *points == 0 {
                return Err(Error::InvalidParameter("thin-plate needs control points".into()));
            }
            if drift.as_f64() * spec.frames as f64 > limit {
                return Err(Error::DeformationTooLarge);
            }
        }
    }
    if !spec.init_box.inside((T::of(spec.width), T::of(spec.height))) {
        return Err(Error::BoxOutsideFrame);
    }
    Ok(())
}

/// Generate the full frame stack with ground truth. The seed fully
/// determines the output.
pub fn generate<T: Scalar>(spec: &SynthSpec<T>) -> Result<Vec<SynthFrame<T>>> {
    validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let perlin = Perlin::new(&mut rng);
    let sampler = TextureSampler { texture: &spec.texture, perlin };

    // cumulative similarities
    let center = Point2::new(T::c(spec.width as f64 / 2.0), T::c(spec.height as f64 / 2.0));
    let mut affines = Vec::with_capacity(spec.frames);
    affines.push(Affine::identity());
    let deg = std::f64::consts::PI / 180.0;
    for t in 1..spec.frames {
        let turn = spec.motion.shift_turn_deg.as_f64() * deg * (t - 1) as f64;
        let (s, c) = turn.sin_cos();
        let shift = (
            spec.motion.shift.0 * T::c(c) - spec.motion.shift.1 * T::c(s),
            spec.motion.shift.0 * T::c(s) + spec.motion.shift.1 * T::c(c),
        );
        let step = Affine::similarity(
            center,
            T::c(spec.motion.rot_deg.as_f64() * deg),
            spec.motion.zoom,
            shift,
        );
        affines.push(step.compose(&affines[t - 1]));
    }
    let inverses = affines.iter().map(|a| a.inverse()).collect();
    let deform = match &spec.deform {
        Deform::None => DeformEval::None,
        Deform::Sinusoid { amplitude, spatial_period, temporal_period } => DeformEval::Sinusoid {
            amplitude: *amplitude,
            spatial_period: *spatial_period,
            temporal_period: *temporal_period,
        },
        Deform::ThinPlate { points, drift } => DeformEval::ThinPlate(ThinPlateDrift::build(
            &mut rng,
            *points,
            *drift,
            spec.frames,
            spec.width,
            spec.height,
        )?),
    };
    let warp = WarpStack { affines, inverses, deform };

    // boundary points of the initial box, walked uniformly
    let boundary = box_boundary(&spec.init_box, BOUNDARY_SAMPLES);

    let mut frames = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let gain = T::one() + spec.illumination.gain_per_frame * T::of(t);
        let bias = spec.illumination.bias_per_frame * T::of(t);
        let mut image = Image::new(spec.width, spec.height, 1);
        for y in 0..spec.height {
            for x in 0..spec.width {
                let p = warp.inverse(Point2::new(T::of(x), T::of(y)), t);
                let v = sampler.sample(p) * gain + bias;
                image.set(x, y, 0, v.max(T::zero()).min(T::one()));
            }
        }

        let mut occ = OcclusionMap::new(spec.width, spec.height, false);
        if let Some(sprite) = &spec.occluder {
            if t >= sprite.entry_frame {
                let start = sprite.start.map(|(x, y)| Point2::new(x, y)).unwrap_or_else(|| {
                    Point2::new(-sprite.size, spec.init_box.center().y)
                });
                let age = T::of(t - sprite.entry_frame);
                let cx = start.x + sprite.velocity.0 * age;
                let cy = start.y + sprite.velocity.1 * age;
                let half = sprite.size * T::c(0.5);
                for y in 0..spec.height {
                    for x in 0..spec.width {
                        let dx = T::of(x) - cx;
                        let dy = T::of(y) - cy;
                        let inside = match sprite.shape {
                            SpriteShape::Square => dx.abs() <= half && dy.abs() <= half,
                            SpriteShape::Disc => dx * dx + dy * dy <= half * half,
                        };
                        if inside {
                            occ.set(x, y, true);
                            image.set(x, y, 0, sprite_texture::<T>(x, y, spec.seed));
                        }
                    }
                }
            }
        }

        // ground-truth flow from the previous frame
        let flow = if t == 0 {
            FlowField::zeros(spec.width, spec.height)
        } else {
            let mut f = FlowField::zeros(spec.width, spec.height);
            for y in 0..spec.height {
                for x in 0..spec.width {
                    let base = warp.inverse(Point2::new(T::of(x), T::of(y)), t - 1);
                    let target = warp.forward(base, t);
                    f.set(x, y, target.x - T::of(x), target.y - T::of(y));
                }
            }
            f
        };

        let warped: Vec<Point2<T>> = boundary.iter().map(|p| warp.forward(*p, t)).collect();
        let gt_box = min_max_enclose(&warped)?;
        let frac = box_occluded_fraction(&occ, &gt_box);

        frames.push(SynthFrame {
            image,
            gt_flow_from_prev: flow,
            gt_occlusion: occ,
            gt_box,
            gt_box_occluded_fraction: frac,
        });
    }
    Ok(frames)
}

/// Uniformly spaced samples along the box perimeter.
pub fn box_boundary<T: Scalar>(b: &BBox<T>, samples: usize) -> Vec<Point2<T>> {
    let per_edge = (samples / 4).max(1);
    let mut pts = Vec::with_capacity(per_edge * 4);
    for i in 0..per_edge {
        let f = T::of(i) / T::of(per_edge);
        pts.push(Point2::new(b.x + b.w * f, b.y));
        pts.push(Point2::new(b.right(), b.y + b.h * f));
        pts.push(Point2::new(b.right() - b.w * f, b.bottom()));
        pts.push(Point2::new(b.x, b.bottom() - b.h * f));
    }
    pts
}

fn box_occluded_fraction<T: Scalar>(occ: &OcclusionMap, b: &BBox<T>) -> T {
    match crate::flow::occlusion_fraction(occ, b) {
        Ok(f) => f,
        Err(_) => T::zero(),
    }
}

/// Deterministic sprite fill pattern, visually distinct from tissue-like
/// textures.
fn sprite_texture<T: Scalar>(x: usize, y: usize, seed: u64) -> T {
    let mut h = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ seed;
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    T::c(0.08 + 0.08 * (h % 1000) as f64 / 1000.0)
}

/// Fixed benchmark family used by the ablation comparison: moderate rotating
/// shift, slow zoom and a sinusoidal deformation over a Perlin texture.
pub fn standard_benchmark_spec<T: Scalar>(seed: u64, frames: usize) -> SynthSpec<T> {
    SynthSpec {
        seed,
        frames,
        width: 192,
        height: 192,
        texture: Texture::Perlin { octaves: 4, base_period: T::c(48.0) },
        motion: Motion {
            shift: (T::c(1.8), T::c(0.3)),
            shift_turn_deg: T::c(5.0),
            zoom: T::c(1.002),
            rot_deg: T::c(0.05),
        },
        deform: Deform::Sinusoid {
            amplitude: T::c(2.5),
            spatial_period: T::c(64.0),
            temporal_period: T::c(28.0),
        },
        illumination: Illumination { gain_per_frame: T::c(-0.0008), bias_per_frame: T::c(0.0004) },
        occluder: None,
        init_box: BBox::new(T::c(70.0), T::c(70.0), T::c(52.0), T::c(52.0)),
    }
}
