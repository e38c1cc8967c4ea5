//! Dense row-major pixel buffers and sub-pixel sampling.
//!
//! Pixel `(x, y)` has its center at continuous coordinate `(x, y)`; bilinear
//! sampling at integer coordinates returns the stored value exactly.

use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type GrayImage = Plane<u8>;
pub type RgbImage = Plane<[u8; 3]>;

impl<T: Clone> Plane<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Plane {
            width,
            height,
            data: vec![fill; width * height],
        }
    }
}

impl<T> Plane<T> {
    /// Wraps an existing row-major buffer. Panics if the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer length");
        Plane {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    /// Row-parallel construction; `f` must be pure for the result to be deterministic.
    pub fn par_from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> T + Sync) -> Self
    where
        T: Send,
    {
        let data: Vec<T> = (0..width * height)
            .into_par_iter()
            .map(|i| f(i % width, i / width))
            .collect();
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.index(x, y)]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        let i = self.index(x, y);
        &mut self.data[i]
    }

    /// Bounds-checked access with signed coordinates.
    #[inline]
    pub fn get_checked(&self, x: i64, y: i64) -> Option<&T> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(&self.data[y as usize * self.width + x as usize])
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, T> {
        self.data.chunks(self.width.max(1))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Plane<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Integer corner and fractional weights for a bilinear read, or `None` if
/// `(u, v)` lies outside `[0, w-1] x [0, h-1]`.
#[inline]
pub(crate) fn bilinear_cell(u: f64, v: f64, width: usize, height: usize) -> Option<(usize, usize, f64, f64)> {
    if !(u >= 0.0 && v >= 0.0) {
        return None;
    }
    let max_u = (width - 1) as f64;
    let max_v = (height - 1) as f64;
    if u > max_u || v > max_v {
        return None;
    }
    let x0 = (u.floor() as usize).min(width.saturating_sub(2));
    let y0 = (v.floor() as usize).min(height.saturating_sub(2));
    Some((x0, y0, u - x0 as f64, v - y0 as f64))
}

impl Plane<f32> {
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<f64> {
        if self.width < 2 || self.height < 2 {
            return self.get_checked(u.round() as i64, v.round() as i64).map(|&p| p as f64);
        }
        let (x0, y0, fx, fy) = bilinear_cell(u, v, self.width, self.height)?;
        let i = y0 * self.width + x0;
        let p00 = self.data[i] as f64;
        let p10 = self.data[i + 1] as f64;
        let p01 = self.data[i + self.width] as f64;
        let p11 = self.data[i + self.width + 1] as f64;
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        Some(top + (bottom - top) * fy)
    }
}

impl Plane<[u8; 3]> {
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<[f64; 3]> {
        if self.width < 2 || self.height < 2 {
            return self
                .get_checked(u.round() as i64, v.round() as i64)
                .map(|p| p.map(f64::from));
        }
        let (x0, y0, fx, fy) = bilinear_cell(u, v, self.width, self.height)?;
        let i = y0 * self.width + x0;
        let (p00, p10) = (self.data[i], self.data[i + 1]);
        let (p01, p11) = (self.data[i + self.width], self.data[i + self.width + 1]);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] as f64 + (p10[c] as f64 - p00[c] as f64) * fx;
            let bottom = p01[c] as f64 + (p11[c] as f64 - p01[c] as f64) * fx;
            out[c] = top + (bottom - top) * fy;
        }
        Some(out)
    }
}

/// ITU-R BT.601 luma, rounded to nearest.
pub fn rgb_to_gray(img: &RgbImage) -> GrayImage {
    img.map(|&[r, g, b]| {
        let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
        y.round().clamp(0.0, 255.0) as u8
    })
}
