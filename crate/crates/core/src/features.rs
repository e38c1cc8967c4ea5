//! Sobel-based per-pixel descriptors.
//!
//! Each descriptor holds the horizontal and vertical 3x3 Sobel responses
//! (divided by 4, biased by 128, clamped to `0..=255`) sampled at eight fixed
//! offsets inside a 5x5 neighborhood: entries `0..8` are horizontal
//! responses, entries `8..16` vertical, both in [`SAMPLE_OFFSETS`] order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{bilinear_cell, GrayImage, Plane};

pub const DESCRIPTOR_LEN: usize = 16;

/// Pixels closer than this to any border have no descriptor.
pub const DESCRIPTOR_RADIUS: usize = 3;

pub const MIN_IMAGE_SIZE: usize = 2 * DESCRIPTOR_RADIUS + 1;

pub const SAMPLE_OFFSETS: [(i32, i32); 8] = [(0, -2), (-1, -1), (1, -1), (-2, 0), (2, 0), (-1, 1), (1, 1), (0, 2)];

pub type Descriptor = [u8; DESCRIPTOR_LEN];

/// Descriptor interpolated at a sub-pixel location.
pub type Feature = [f32; DESCRIPTOR_LEN];

const NEUTRAL: Descriptor = [128; DESCRIPTOR_LEN];

#[derive(Clone, Debug)]
pub struct DescriptorMap {
    descriptors: Plane<Descriptor>,
}

#[inline]
fn bias(response: i32) -> u8 {
    (128 + response / 4).clamp(0, 255) as u8
}

/// Horizontal and vertical Sobel response planes; one-pixel border is neutral.
pub fn sobel_responses(image: &GrayImage) -> (Plane<u8>, Plane<u8>) {
    let (w, h) = image.dims();
    let px = image.as_slice();
    let mut du = Plane::new(w, h, 128u8);
    let mut dv = Plane::new(w, h, 128u8);
    if w < 3 || h < 3 {
        return (du, dv);
    }
    du.as_mut_slice()
        .par_chunks_mut(w)
        .zip(dv.as_mut_slice().par_chunks_mut(w))
        .enumerate()
        .skip(1)
        .take(h - 2)
        .for_each(|(y, (row_u, row_v))| {
            let at = |x: usize, yy: usize| px[yy * w + x] as i32;
            for x in 1..w - 1 {
                let gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                    - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
                let gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                    - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
                row_u[x] = bias(gx);
                row_v[x] = bias(gy);
            }
        });
    (du, dv)
}

pub fn compute_descriptors(image: &GrayImage) -> Result<DescriptorMap> {
    let (w, h) = image.dims();
    if w < MIN_IMAGE_SIZE || h < MIN_IMAGE_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: MIN_IMAGE_SIZE,
        });
    }
    let (du, dv) = sobel_responses(image);
    let r = DESCRIPTOR_RADIUS;
    let descriptors = Plane::par_from_fn(w, h, |x, y| {
        if x < r || y < r || x >= w - r || y >= h - r {
            return NEUTRAL;
        }
        let mut d = [0u8; DESCRIPTOR_LEN];
        for (i, &(ox, oy)) in SAMPLE_OFFSETS.iter().enumerate() {
            let sx = (x as i32 + ox) as usize;
            let sy = (y as i32 + oy) as usize;
            d[i] = *du.get(sx, sy);
            d[i + 8] = *dv.get(sx, sy);
        }
        d
    });
    Ok(DescriptorMap { descriptors })
}

/// Sum of absolute differences over all entries.
#[inline]
pub fn descriptor_distance(a: &Descriptor, b: &Descriptor) -> u32 {
    a.iter().zip(b).map(|(&x, &y)| (x as i32 - y as i32).unsigned_abs()).sum()
}

/// Sum of `|entry - 128|`; zero on untextured patches.
#[inline]
pub fn descriptor_texture(d: &Descriptor) -> u32 {
    d.iter().map(|&x| (x as i32 - 128).unsigned_abs()).sum()
}

impl DescriptorMap {
    pub fn width(&self) -> usize {
        self.descriptors.width()
    }

    pub fn height(&self) -> usize {
        self.descriptors.height()
    }

    #[inline]
    pub fn is_valid(&self, x: i64, y: i64) -> bool {
        let r = DESCRIPTOR_RADIUS as i64;
        x >= r && y >= r && x < self.width() as i64 - r && y < self.height() as i64 - r
    }

    /// Descriptor at an integer pixel; `None` in the border band.
    #[inline]
    pub fn get(&self, x: i64, y: i64) -> Option<&Descriptor> {
        if self.is_valid(x, y) {
            Some(self.descriptors.get(x as usize, y as usize))
        } else {
            None
        }
    }

    /// Raw access including border pixels (which hold the neutral descriptor).
    pub fn raw(&self) -> &Plane<Descriptor> {
        &self.descriptors
    }

    #[inline]
    fn cell(&self, u: f64, v: f64) -> Option<(usize, usize, i64, i64, f64, f64)> {
        let (x0, y0, fx, fy) = bilinear_cell(u, v, self.width(), self.height())?;
        let (x0i, y0i) = (x0 as i64, y0 as i64);
        // the (x0+1, y0+1) corner is only needed when its weight is non-zero,
        // which keeps integer coordinates on the last valid row/column usable
        let x1 = if fx > 0.0 { x0i + 1 } else { x0i };
        let y1 = if fy > 0.0 { y0i + 1 } else { y0i };
        if !self.is_valid(x0i, y0i) || !self.is_valid(x1, y1) {
            return None;
        }
        Some((x0, y0, x1, y1, fx, fy))
    }

    /// Whether [`Self::sample_bilinear`] would succeed at `(u, v)`.
    #[inline]
    pub fn covers(&self, u: f64, v: f64) -> bool {
        self.cell(u, v).is_some()
    }

    /// Bilinear interpolation; `None` unless all four neighbors are valid.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<Feature> {
        let (x0, y0, x1, y1, fx, fy) = self.cell(u, v)?;
        let p00 = self.descriptors.get(x0, y0);
        let p10 = self.descriptors.get(x1 as usize, y0);
        let p01 = self.descriptors.get(x0, y1 as usize);
        let p11 = self.descriptors.get(x1 as usize, y1 as usize);
        let (fx, fy) = (fx as f32, fy as f32);
        let w00 = (1.0 - fx) * (1.0 - fy);
        let w10 = fx * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w11 = fx * fy;
        let mut out = [0f32; DESCRIPTOR_LEN];
        for i in 0..DESCRIPTOR_LEN {
            out[i] = w00 * p00[i] as f32 + w10 * p10[i] as f32 + w01 * p01[i] as f32 + w11 * p11[i] as f32;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Plane::from_fn(w, h, |_, _| rng.random())
    }

    #[test]
    fn too_small_is_rejected() {
        let img = Plane::new(6, 10, 0u8);
        assert!(matches!(compute_descriptors(&img), Err(Error::ImageTooSmall { .. })));
        assert!(compute_descriptors(&Plane::new(7, 7, 0u8)).is_ok());
    }

    #[test]
    fn constant_image_is_neutral() {
        let map = compute_descriptors(&Plane::new(20, 15, 77u8)).unwrap();
        for y in 0..15 {
            for x in 0..20 {
                assert_eq!(*map.raw().get(x, y), NEUTRAL);
            }
        }
    }

    #[test]
    fn vertical_step_edge() {
        // columns < 10 are dark, >= 10 bright
        let img = Plane::from_fn(20, 20, |x, _| if x < 10 { 0 } else { 255 });
        let map = compute_descriptors(&img).unwrap();
        let d = map.get(10, 10).unwrap();
        for (i, &(ox, _)) in SAMPLE_OFFSETS.iter().enumerate() {
            // Sobel at column c sees the step iff c is 9 or 10
            let col = 10 + ox;
            let expected = if col == 9 || col == 10 { 255 } else { 128 };
            assert_eq!(d[i], expected, "horizontal entry {i}");
            assert_eq!(d[i + 8], 128, "vertical entry {i}");
        }
    }

    #[test]
    fn matches_direct_convolution() {
        let img = random_image(32, 32, 3);
        let map = compute_descriptors(&img).unwrap();
        let kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
        let ky = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]];
        let conv = |k: &[[i32; 3]; 3], cx: i32, cy: i32| -> u8 {
            let mut s = 0;
            for j in 0..3 {
                for i in 0..3 {
                    s += k[j][i] * *img.get((cx + i as i32 - 1) as usize, (cy + j as i32 - 1) as usize) as i32;
                }
            }
            (128 + s / 4).clamp(0, 255) as u8
        };
        for y in 3..29 {
            for x in 3..29 {
                let d = map.get(x, y).unwrap();
                for (i, &(ox, oy)) in SAMPLE_OFFSETS.iter().enumerate() {
                    let (sx, sy) = (x as i32 + ox, y as i32 + oy);
                    assert_eq!(d[i], conv(&kx, sx, sy));
                    assert_eq!(d[i + 8], conv(&ky, sx, sy));
                }
            }
        }
        assert!(map.get(2, 10).is_none());
        assert!(map.get(29, 10).is_none());
    }

    #[test]
    fn distance_examples() {
        let a = [0u8; 16];
        let b = [255u8; 16];
        assert_eq!(descriptor_distance(&a, &a), 0);
        assert_eq!(descriptor_distance(&a, &b), 4080);
        let c: Descriptor = core::array::from_fn(|i| (i * 13) as u8);
        assert_eq!(descriptor_distance(&b, &c), descriptor_distance(&c, &b));
    }

    #[test]
    fn bilinear_sampling_reproduces_integers() {
        let map = compute_descriptors(&random_image(20, 20, 5)).unwrap();
        let s = map.sample_bilinear(10.0, 12.0).unwrap();
        let d = map.get(10, 12).unwrap();
        for i in 0..16 {
            assert_eq!(s[i], d[i] as f32);
        }
        assert!(map.sample_bilinear(16.0, 16.0).is_some());
        assert!(map.sample_bilinear(16.5, 10.0).is_none());
        assert!(map.sample_bilinear(2.5, 10.0).is_none());
    }

    proptest! {
        #[test]
        fn translation_equivariance(seed in 0u64..500, dx in 0usize..5, dy in 0usize..5) {
            let big = random_image(40, 40, seed);
            let a = Plane::from_fn(30, 30, |x, y| *big.get(x, y));
            let b = Plane::from_fn(30, 30, |x, y| *big.get(x + dx, y + dy));
            let ma = compute_descriptors(&a).unwrap();
            let mb = compute_descriptors(&b).unwrap();
            for y in 3..27 - dy as i64 {
                for x in 3..27 - dx as i64 {
                    prop_assert_eq!(mb.get(x, y), ma.get(x + dx as i64, y + dy as i64));
                }
            }
        }

        #[test]
        fn brightness_offset_invariance(seed in 0u64..500, offset in 0u8..60) {
            let base = random_image(24, 24, seed).map(|&p| p / 2);
            let lifted = base.map(|&p| p + offset);
            let a = compute_descriptors(&base).unwrap();
            let b = compute_descriptors(&lifted).unwrap();
            prop_assert_eq!(a.raw(), b.raw());
        }
    }
}
