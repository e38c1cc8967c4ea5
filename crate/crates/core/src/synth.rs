//! Synthetic light fields with exact ground truth.
//!
//! Scenes are textured background planes plus fronto-parallel billboard
//! occluders, ray-cast through a rectified linear rig. Everything is a pure
//! function of the [`SceneSpec`], so equal specs render equal bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::MIN_IMAGE_SIZE;
use crate::frame::LightFieldFrame;
use crate::geometry::{rectified_rig, CameraIntrinsics, CameraRig, PixelCoord, MAX_CAMERAS};
use crate::raster::{Plane, RgbImage};
use crate::solver::SegmentationPriorMaps;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    /// Two-octave value noise with lattice spacing `cell`.
    Noise,
    /// Crossed sinusoids with period `cell`.
    Sinusoid,
    Checker,
    Plain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureSpec {
    pub kind: TextureKind,
    pub seed: u64,
    /// Feature size in meters on the surface.
    pub cell: f64,
    /// Peak deviation from `base`, in gray levels.
    pub amplitude: f64,
    pub base: [f64; 3],
    /// Reference-pixel rectangle `[u0, u1, v0, v1]`; surface points seen
    /// there by the reference camera are painted flat `base`.
    pub plain_window: Option<[f64; 4]>,
}

impl Default for TextureSpec {
    fn default() -> Self {
        TextureSpec {
            kind: TextureKind::Noise,
            seed: 0,
            cell: 0.04,
            amplitude: 90.0,
            base: [128.0, 128.0, 128.0],
            plain_window: None,
        }
    }
}

/// Background surface `Z = depth + slope_x * X + slope_y * Y` in the
/// reference frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneSpec {
    pub depth: f64,
    pub slope_x: f64,
    pub slope_y: f64,
    pub texture: TextureSpec,
}

impl Default for PlaneSpec {
    fn default() -> Self {
        PlaneSpec {
            depth: 2.5,
            slope_x: 0.0,
            slope_y: 0.0,
            texture: TextureSpec::default(),
        }
    }
}

/// Fronto-parallel rectangle at `depth`, sized so that it covers
/// `size` pixels around `center` in the reference view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccluderSpec {
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub depth: f64,
    pub texture: TextureSpec,
}

impl Default for OccluderSpec {
    fn default() -> Self {
        OccluderSpec {
            center: [160.0, 120.0],
            size: [80.0, 240.0],
            depth: 0.375,
            texture: TextureSpec {
                kind: TextureKind::Checker,
                cell: 0.006,
                amplitude: 60.0,
                base: [190.0, 70.0, 60.0],
                ..TextureSpec::default()
            },
        }
    }
}

/// Rectified linear array: camera `k` sits `k * baseline` to the right of
/// the reference, which is camera 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigSpec {
    pub num_cameras: usize,
    pub baseline: f64,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
}

impl Default for RigSpec {
    fn default() -> Self {
        RigSpec {
            num_cameras: 5,
            baseline: 0.05,
            width: 320,
            height: 240,
            focal: 300.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorNoise {
    pub p_flip: f64,
    pub blur_radius: usize,
}

impl Default for PriorNoise {
    fn default() -> Self {
        PriorNoise {
            p_flip: 0.0,
            blur_radius: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub rig: RigSpec,
    pub planes: Vec<PlaneSpec>,
    pub occluders: Vec<OccluderSpec>,
    pub prior_noise: PriorNoise,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            rig: RigSpec::default(),
            planes: vec![PlaneSpec::default()],
            occluders: Vec::new(),
            prior_noise: PriorNoise::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// Reference-view disparity of the background (occluders ignored).
    pub disparity: Plane<f64>,
    /// Reference view rendered without occluders.
    pub background: RgbImage,
    /// Reference pixels whose background carries texture.
    pub textured: Plane<bool>,
    /// Per view: pixel center sees an occluder.
    pub masks: Vec<Plane<bool>>,
}

impl GroundTruth {
    /// Exact static-probability maps (1 off the occluders, 0 on them).
    pub fn exact_priors(&self) -> SegmentationPriorMaps {
        SegmentationPriorMaps::new(self.masks.iter().map(|m| m.map(|&o| if o { 0.0 } else { 1.0 })).collect())
            .expect("binary maps are valid probabilities")
    }
}

/// A rendered scene with its rig and (possibly corrupted) priors.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub rig: CameraRig,
    pub frame: LightFieldFrame,
    pub truth: GroundTruth,
    pub priors: SegmentationPriorMaps,
}

impl SceneSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::scene(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene specs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rig;
        if !(1..=MAX_CAMERAS).contains(&r.num_cameras) {
            return Err(Error::scene(format!("rig.num_cameras must lie in 1..={MAX_CAMERAS}")));
        }
        if r.width < MIN_IMAGE_SIZE || r.height < MIN_IMAGE_SIZE {
            return Err(Error::scene(format!("rig.width and rig.height must be at least {MIN_IMAGE_SIZE}")));
        }
        if !(r.baseline > 0.0 && r.focal > 0.0) {
            return Err(Error::scene("rig.baseline and rig.focal must be positive"));
        }
        if self.planes.is_empty() {
            return Err(Error::scene("at least one background plane is required"));
        }
        for (i, p) in self.planes.iter().enumerate() {
            if !(p.depth > 0.0) {
                return Err(Error::scene(format!("planes[{i}].depth must be positive")));
            }
            check_texture(&p.texture, &format!("planes[{i}]"))?;
        }
        let nearest_plane = self.planes.iter().map(|p| p.depth).fold(f64::INFINITY, f64::min);
        for (i, o) in self.occluders.iter().enumerate() {
            if !(o.depth > 0.0) {
                return Err(Error::scene(format!("occluders[{i}].depth must be positive")));
            }
            if o.depth >= nearest_plane {
                return Err(Error::scene(format!("occluders[{i}].depth must be less than every background depth")));
            }
            if !(o.size[0] > 0.0 && o.size[1] > 0.0) {
                return Err(Error::scene(format!("occluders[{i}].size must be positive")));
            }
            check_texture(&o.texture, &format!("occluders[{i}]"))?;
        }
        let n = &self.prior_noise;
        if !(0.0..0.5).contains(&n.p_flip) {
            return Err(Error::scene("prior_noise.p_flip must lie in [0, 0.5)"));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let r = &self.rig;
        CameraIntrinsics::new(
            r.focal,
            r.focal,
            (r.width as f64 - 1.0) / 2.0,
            (r.height as f64 - 1.0) / 2.0,
            r.width,
            r.height,
        )
    }

    pub fn build_rig(&self) -> Result<CameraRig> {
        self.validate()?;
        let positions: Vec<f64> = (0..self.rig.num_cameras).map(|k| k as f64 * self.rig.baseline).collect();
        rectified_rig(self.intrinsics()?, &positions, self.rig.baseline)
    }

    /// Reference-pixel area of the occluders' union.
    pub fn occluder_fraction(&self) -> f64 {
        let (w, h) = (self.rig.width as f64, self.rig.height as f64);
        self.occluders.iter().map(|o| o.size[0] * o.size[1]).sum::<f64>() / (w * h)
    }
}

fn check_texture(t: &TextureSpec, owner: &str) -> Result<()> {
    if t.kind != TextureKind::Plain && !(t.cell > 0.0) {
        return Err(Error::scene(format!("{owner}.texture.cell must be positive")));
    }
    if !(t.amplitude >= 0.0) {
        return Err(Error::scene(format!("{owner}.texture.amplitude must be non-negative")));
    }
    Ok(())
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lattice value in [-1, 1].
#[inline]
fn lattice(seed: u64, ix: i64, iy: i64, ch: u64) -> f64 {
    let h = splitmix(seed ^ splitmix(ix as u64 ^ splitmix(iy as u64 ^ splitmix(ch))));
    (h >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn value_noise(seed: u64, x: f64, y: f64, ch: u64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (tx, ty) = (s(x - fx), s(y - fy));
    let a = lattice(seed, ix, iy, ch);
    let b = lattice(seed, ix + 1, iy, ch);
    let c = lattice(seed, ix, iy + 1, ch);
    let d = lattice(seed, ix + 1, iy + 1, ch);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

impl TextureSpec {
    /// Whether the surface point `(x, y, z)` (reference frame) carries texture.
    fn is_textured(&self, p: [f64; 3], ref_intr: &CameraIntrinsics) -> bool {
        self.kind != TextureKind::Plain && self.amplitude > 0.0 && !self.in_window(p, ref_intr)
    }

    fn in_window(&self, p: [f64; 3], ref_intr: &CameraIntrinsics) -> bool {
        let Some([u0, u1, v0, v1]) = self.plain_window else { return false };
        let u = ref_intr.fx * p[0] / p[2] + ref_intr.cx;
        let v = ref_intr.fy * p[1] / p[2] + ref_intr.cy;
        (u0..u1).contains(&u) && (v0..v1).contains(&v)
    }

    fn color(&self, p: [f64; 3], ref_intr: &CameraIntrinsics) -> [f64; 3] {
        if !self.is_textured(p, ref_intr) {
            return self.base;
        }
        let (x, y) = (p[0] / self.cell, p[1] / self.cell);
        let a = self.amplitude;
        core::array::from_fn(|ch| {
            let c = ch as u64;
            let v = match self.kind {
                TextureKind::Noise => {
                    (value_noise(self.seed, x, y, c) + 0.5 * value_noise(self.seed ^ 0x5555, 2.0 * x, 2.0 * y, c)) / 1.5
                }
                TextureKind::Sinusoid => {
                    let phase = lattice(self.seed, 0, 0, c) * std::f64::consts::PI;
                    0.5 * ((std::f64::consts::TAU * x + phase).sin() + (std::f64::consts::TAU * y * 0.73 + phase).sin())
                }
                TextureKind::Checker => {
                    if (x.floor() as i64 + y.floor() as i64).rem_euclid(2) == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                TextureKind::Plain => 0.0,
            };
            self.base[ch] + a * v
        })
    }
}

struct Hit {
    t: f64,
    point: [f64; 3],
    surface: Surface,
}

#[derive(Clone, Copy, PartialEq)]
enum Surface {
    Plane(usize),
    Occluder(usize),
}

struct Tracer<'a> {
    spec: &'a SceneSpec,
    intr: CameraIntrinsics,
    /// Occluder rectangles `[x0, x1, y0, y1]` in meters at their depth.
    rects: Vec<[f64; 4]>,
}

impl<'a> Tracer<'a> {
    fn new(spec: &'a SceneSpec) -> Result<Self> {
        let intr = spec.intrinsics()?;
        let rects = spec
            .occluders
            .iter()
            .map(|o| {
                let s = o.depth / intr.fx;
                [
                    (o.center[0] - o.size[0] / 2.0 - intr.cx) * s,
                    (o.center[0] + o.size[0] / 2.0 - intr.cx) * s,
                    (o.center[1] - o.size[1] / 2.0 - intr.cy) * o.depth / intr.fy,
                    (o.center[1] + o.size[1] / 2.0 - intr.cy) * o.depth / intr.fy,
                ]
            })
            .collect();
        Ok(Tracer { spec, intr, rects })
    }

    fn ray(&self, cam_x: f64, u: f64, v: f64) -> ([f64; 3], [f64; 3]) {
        ([cam_x, 0.0, 0.0], [(u - self.intr.cx) / self.intr.fx, (v - self.intr.cy) / self.intr.fy, 1.0])
    }

    fn background(&self, c: [f64; 3], dir: [f64; 3]) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, p) in self.spec.planes.iter().enumerate() {
            let denom = dir[2] - p.slope_x * dir[0] - p.slope_y * dir[1];
            if denom.abs() < 1e-12 {
                continue;
            }
            let t = (p.depth + p.slope_x * c[0] + p.slope_y * c[1] - c[2]) / denom;
            if t > 0.0 && best.as_ref().is_none_or(|b| t < b.t) {
                let point = [c[0] + t * dir[0], c[1] + t * dir[1], c[2] + t * dir[2]];
                best = Some(Hit {
                    t,
                    point,
                    surface: Surface::Plane(i),
                });
            }
        }
        best
    }

    fn occluder(&self, c: [f64; 3], dir: [f64; 3]) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, (o, r)) in self.spec.occluders.iter().zip(&self.rects).enumerate() {
            let t = (o.depth - c[2]) / dir[2];
            let (x, y) = (c[0] + t * dir[0], c[1] + t * dir[1]);
            if t > 0.0 && x >= r[0] && x < r[1] && y >= r[2] && y < r[3] && best.as_ref().is_none_or(|b| t < b.t) {
                best = Some(Hit {
                    t,
                    point: [x, y, o.depth],
                    surface: Surface::Occluder(i),
                });
            }
        }
        best
    }

    fn nearest(&self, c: [f64; 3], dir: [f64; 3], occluders: bool) -> Option<Hit> {
        let bg = self.background(c, dir);
        let occ = if occluders { self.occluder(c, dir) } else { None };
        match (bg, occ) {
            (Some(b), Some(o)) => Some(if o.t < b.t { o } else { b }),
            (b, o) => b.or(o),
        }
    }

    fn shade(&self, hit: &Option<Hit>) -> [f64; 3] {
        match hit {
            None => [0.0; 3],
            Some(h) => match h.surface {
                Surface::Plane(i) => self.spec.planes[i].texture.color(h.point, &self.intr),
                Surface::Occluder(i) => self.spec.occluders[i].texture.color(h.point, &self.intr),
            },
        }
    }
}

fn quantize(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| v.round().clamp(0.0, 255.0) as u8)
}

/// Ray-casts every view. Pixel centers decide occluder masks; pixels on a
/// mask boundary are 2x2 supersampled.
pub fn render(spec: &SceneSpec) -> Result<(LightFieldFrame, GroundTruth)> {
    spec.validate()?;
    let tracer = Tracer::new(spec)?;
    let (w, h) = (spec.rig.width, spec.rig.height);
    let mut views = Vec::with_capacity(spec.rig.num_cameras);
    let mut masks = Vec::with_capacity(spec.rig.num_cameras);
    for k in 0..spec.rig.num_cameras {
        let cam_x = k as f64 * spec.rig.baseline;
        let centers: Plane<(bool, [f64; 3])> = Plane::par_from_fn(w, h, |x, y| {
            let (c, dir) = tracer.ray(cam_x, x as f64, y as f64);
            let hit = tracer.nearest(c, dir, true);
            let occluded = matches!(hit, Some(Hit { surface: Surface::Occluder(_), .. }));
            (occluded, tracer.shade(&hit))
        });
        let mask = centers.map(|p| p.0);
        let image = Plane::par_from_fn(w, h, |x, y| {
            let m = *mask.get(x, y);
            let boundary = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dx, dy)| mask.get_checked(x as i64 + dx, y as i64 + dy).is_some_and(|&n| n != m));
            if !boundary {
                return quantize(centers.get(x, y).1);
            }
            let mut sum = [0.0; 3];
            for (ox, oy) in [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
                let (c, dir) = tracer.ray(cam_x, x as f64 + ox, y as f64 + oy);
                let s = tracer.shade(&tracer.nearest(c, dir, true));
                for ch in 0..3 {
                    sum[ch] += s[ch] / 4.0;
                }
            }
            quantize(sum)
        });
        views.push(image);
        masks.push(mask);
    }

    let fb = spec.rig.focal * spec.rig.baseline;
    let reference: Plane<(f64, [u8; 3], bool)> = Plane::par_from_fn(w, h, |x, y| {
        let (c, dir) = tracer.ray(0.0, x as f64, y as f64);
        let hit = tracer.nearest(c, dir, false);
        let color = quantize(tracer.shade(&hit));
        match hit {
            Some(hh) => {
                let Surface::Plane(i) = hh.surface else { unreachable!() };
                let textured = spec.planes[i].texture.is_textured(hh.point, &tracer.intr);
                (fb / hh.point[2], color, textured)
            }
            None => (f64::NAN, color, false),
        }
    });
    let truth = GroundTruth {
        disparity: reference.map(|p| p.0),
        background: reference.map(|p| p.1),
        textured: reference.map(|p| p.2),
        masks,
    };
    Ok((LightFieldFrame::new(views)?, truth))
}

/// Renders and builds the rig and corrupted priors in one go.
pub fn generate(spec: &SceneSpec) -> Result<SynthScene> {
    let rig = spec.build_rig()?;
    let (frame, truth) = render(spec)?;
    let priors = corrupt_prior(&truth.masks, &spec.prior_noise, spec.seed);
    Ok(SynthScene {
        rig,
        frame,
        truth,
        priors,
    })
}

fn view_rng(seed: u64, view: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ (view as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Static labels from an occluder mask, each flipped with probability `p_flip`.
pub fn flip_labels(mask: &Plane<bool>, p_flip: f64, rng: &mut impl Rng) -> Plane<bool> {
    mask.map(|&occluded| {
        let flip = p_flip > 0.0 && rng.random_bool(p_flip);
        !occluded ^ flip
    })
}

/// Mean over the clipped `(2r+1)^2` window.
pub fn box_blur(p: &Plane<f32>, radius: usize) -> Plane<f32> {
    if radius == 0 {
        return p.clone();
    }
    let (w, h) = p.dims();
    // summed-area table with a zero row and column in front
    let mut sat = vec![0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += *p.get(x, y) as f64;
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    Plane::par_from_fn(w, h, |x, y| {
        let (x0, x1) = (x.saturating_sub(radius), (x + radius + 1).min(w));
        let (y0, y1) = (y.saturating_sub(radius), (y + radius + 1).min(h));
        let s = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
        (s / ((x1 - x0) * (y1 - y0)) as f64) as f32
    })
}

/// Noisy segmentation priors: exact labels, random flips, box blur, clamp.
pub fn corrupt_prior(masks: &[Plane<bool>], noise: &PriorNoise, seed: u64) -> SegmentationPriorMaps {
    let maps = masks
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let labels = flip_labels(m, noise.p_flip, &mut view_rng(seed, k));
            let p = labels.map(|&s| if s { 1.0f32 } else { 0.0 });
            box_blur(&p, noise.blur_radius).map(|v| v.clamp(0.0, 1.0))
        })
        .collect();
    SegmentationPriorMaps::new(maps).expect("blurred binary maps stay in [0, 1]")
}

/// Ready-made scenes used by the tests and the `synth --preset` command.
pub mod presets {
    use super::*;

    /// Noise lattice spacing, in reference pixels at the nominal depth.
    const CELL_PIXELS: f64 = 8.0;

    pub const NAMES: [&str; 4] = ["two-plane", "occluder", "noisy-occluder", "low-texture"];

    pub fn by_name(name: &str) -> Option<SceneSpec> {
        match name {
            "two-plane" => Some(two_plane(320, 240)),
            "occluder" => Some(occluder(320, 240, 0.25)),
            "noisy-occluder" => Some(noisy(occluder(320, 240, 0.25))),
            "low-texture" => Some(low_texture(320, 240)),
            _ => None,
        }
    }

    fn rig(width: usize, height: usize) -> RigSpec {
        RigSpec {
            num_cameras: 5,
            baseline: 0.05,
            width,
            height,
            // keeps disparities comparable across resolutions
            focal: 300.0 * width as f64 / 320.0,
        }
    }

    fn noise(seed: u64, cell: f64) -> TextureSpec {
        TextureSpec {
            kind: TextureKind::Noise,
            seed,
            cell,
            amplitude: 90.0,
            base: [128.0, 128.0, 128.0],
            plain_window: None,
        }
    }

    /// Concave corner: two slanted walls meeting at the image center,
    /// disparity about 4 at the corner rising to about 8 at the sides.
    pub fn two_plane(width: usize, height: usize) -> SceneSpec {
        let rig = rig(width, height);
        let fb = rig.focal * rig.baseline;
        let z0 = fb / 4.0;
        let cell = CELL_PIXELS * z0 / rig.focal;
        SceneSpec {
            seed: 1,
            planes: vec![
                PlaneSpec {
                    depth: z0,
                    slope_x: 1.875,
                    slope_y: 0.0,
                    texture: noise(11, cell),
                },
                PlaneSpec {
                    depth: z0,
                    slope_x: -1.875,
                    slope_y: 0.0,
                    texture: noise(12, cell),
                },
            ],
            rig,
            occluders: Vec::new(),
            prior_noise: PriorNoise::default(),
        }
    }

    /// Slightly slanted wall near disparity 6 behind a full-height billboard
    /// at disparity 40 covering `fraction` of the reference view.
    pub fn occluder(width: usize, height: usize, fraction: f64) -> SceneSpec {
        let rig = rig(width, height);
        let fb = rig.focal * rig.baseline;
        let z_bg = fb / 6.0;
        let z_occ = fb / 40.0;
        let occ_w = (fraction * width as f64).round();
        let cell = CELL_PIXELS * z_bg / rig.focal;
        SceneSpec {
            seed: 2,
            planes: vec![PlaneSpec {
                depth: z_bg,
                slope_x: 0.3,
                slope_y: 0.1,
                texture: noise(21, cell),
            }],
            occluders: vec![OccluderSpec {
                // centers on half pixels keep billboard edges between pixel centers
                center: [(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0],
                size: [occ_w, height as f64],
                depth: z_occ,
                texture: TextureSpec {
                    kind: TextureKind::Noise,
                    seed: 22,
                    cell: cell * z_occ / z_bg,
                    amplitude: 60.0,
                    base: [190.0, 80.0, 60.0],
                    plain_window: None,
                },
            }],
            rig,
            prior_noise: PriorNoise::default(),
        }
    }

    pub fn noisy(mut spec: SceneSpec) -> SceneSpec {
        spec.prior_noise = PriorNoise {
            p_flip: 0.1,
            blur_radius: 2,
        };
        spec
    }

    /// Slanted wall whose central window (half the reference area) is flat.
    pub fn low_texture(width: usize, height: usize) -> SceneSpec {
        let rig = rig(width, height);
        let fb = rig.focal * rig.baseline;
        let z = fb / 6.0;
        let cell = CELL_PIXELS * z / rig.focal;
        let s = 0.5f64.sqrt();
        let (ww, wh) = (width as f64 * s, height as f64 * s);
        let (cu, cv) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        let mut texture = noise(31, cell);
        texture.plain_window = Some([cu - ww / 2.0, cu + ww / 2.0, cv - wh / 2.0, cv + wh / 2.0]);
        SceneSpec {
            seed: 3,
            planes: vec![PlaneSpec {
                depth: z,
                slope_x: 0.4,
                slope_y: 0.15,
                texture,
            }],
            rig,
            occluders: Vec::new(),
            prior_noise: PriorNoise::default(),
        }
    }
}

/// Pixel position of the reference-frame point `p` in camera `k`.
pub fn project_point(rig: &CameraRig, k: usize, p: [f64; 3]) -> Option<PixelCoord> {
    rig.project(k, &nalgebra::Vector3::new(p[0], p[1], p[2]))
}
