//! Background synthesis: average the static rays at the solved disparity,
//! then despeckle with a per-channel median.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::LightFieldFrame;
use crate::geometry::{CameraRig, PixelCoord};
use crate::prior::is_static;
use crate::raster::{Plane, RgbImage};
use crate::solver::{DisparityMap, RayMask, SegmentationState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Average of this many static rays.
    Refocused(u8),
    /// Static pixel left as the reference value in dynamic-only mode.
    Copied,
    /// Too few static rays; reference value retained.
    Fallback,
    /// No usable disparity; reference value retained.
    Invalid,
}

impl Provenance {
    /// 8-bit code for the provenance map: 0 invalid, 128 fallback, 255 otherwise.
    pub fn code(self) -> u8 {
        match self {
            Provenance::Invalid => 0,
            Provenance::Fallback => 128,
            Provenance::Refocused(_) | Provenance::Copied => 255,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefocusedImage {
    pub color: RgbImage,
    pub provenance: Plane<Provenance>,
}

impl RefocusedImage {
    pub fn provenance_map(&self) -> Plane<u8> {
        self.provenance.map(|p| p.code())
    }

    pub fn count(&self, pred: impl Fn(Provenance) -> bool) -> usize {
        self.provenance.as_slice().iter().filter(|&&p| pred(p)).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefocusParams {
    pub median_radius: usize,
    pub min_static_rays: usize,
    /// Refocus only pixels whose reference prior is below `threshold`.
    pub dynamic_only: bool,
    pub threshold: f64,
}

impl Default for RefocusParams {
    fn default() -> Self {
        RefocusParams {
            median_radius: 1,
            min_static_rays: 2,
            dynamic_only: false,
            threshold: 0.7,
        }
    }
}

/// Mean of the static rays of reference pixel `(x, y)` at disparity `d`,
/// bilinearly sampled and rounded per channel.
pub fn refocus_pixel(
    frame: &LightFieldFrame,
    rig: &CameraRig,
    x: usize,
    y: usize,
    d: f64,
    mask: RayMask,
    min_static_rays: usize,
) -> ([u8; 3], Provenance) {
    let reference = *frame.view(rig.ref_index()).get(x, y);
    if !(d > 0.0 && d.is_finite()) {
        return (reference, Provenance::Invalid);
    }
    let xc = PixelCoord::new(x as f64, y as f64);
    let mut sum = [0.0f64; 3];
    let mut n = 0u8;
    for k in 0..frame.num_views() {
        if mask >> k & 1 == 0 {
            continue;
        }
        let Some(c) = rig.warp(xc, d, k).and_then(|p| frame.view(k).sample_bilinear(p.u, p.v)) else {
            continue;
        };
        for (s, v) in sum.iter_mut().zip(c) {
            *s += v;
        }
        n += 1;
    }
    if (n as usize) < min_static_rays || n == 0 {
        return (reference, Provenance::Fallback);
    }
    let color = sum.map(|s| (s / n as f64).round().clamp(0.0, 255.0) as u8);
    (color, Provenance::Refocused(n))
}

/// Per-channel median over the clipped `(2r+1)^2` window, applied to
/// refocused and fallback pixels only.
pub fn median_filter(img: &RefocusedImage, radius: usize) -> RefocusedImage {
    let (w, h) = img.color.dims();
    median_filter_partitioned(img, radius, &Plane::new(w, h, 0))
}

/// As [`median_filter`], but a window only draws from pixels of the same
/// `class` as its center. Invalid pixels never contribute.
pub fn median_filter_partitioned(img: &RefocusedImage, radius: usize, class: &Plane<u8>) -> RefocusedImage {
    if radius == 0 {
        return img.clone();
    }
    let (w, h) = img.color.dims();
    let r = radius as i64;
    let color = Plane::par_from_fn(w, h, |x, y| {
        let center = *img.color.get(x, y);
        if !matches!(img.provenance.get(x, y), Provenance::Refocused(_) | Provenance::Fallback) {
            return center;
        }
        let c = *class.get(x, y);
        let mut samples: [Vec<u8>; 3] = Default::default();
        for yy in (y as i64 - r).max(0)..=(y as i64 + r).min(h as i64 - 1) {
            for xx in (x as i64 - r).max(0)..=(x as i64 + r).min(w as i64 - 1) {
                let (xx, yy) = (xx as usize, yy as usize);
                if *class.get(xx, yy) != c || *img.provenance.get(xx, yy) == Provenance::Invalid {
                    continue;
                }
                let v = img.color.get(xx, yy);
                for ch in 0..3 {
                    samples[ch].push(v[ch]);
                }
            }
        }
        core::array::from_fn(|ch| {
            let s = &mut samples[ch];
            s.sort_unstable();
            s[s.len() / 2]
        })
    });
    RefocusedImage {
        color,
        provenance: img.provenance.clone(),
    }
}

/// Refocuses every pixel (or only prior-dynamic ones in dynamic-only mode,
/// copying the rest from the reference view), then median-filters. The
/// median never mixes prior-static and prior-dynamic pixels, so both modes
/// agree exactly on the dynamic region.
pub fn synthesize(
    frame: &LightFieldFrame,
    rig: &CameraRig,
    disparity: &DisparityMap,
    seg: &SegmentationState,
    ref_prior: &Plane<f32>,
    params: &RefocusParams,
) -> Result<RefocusedImage> {
    let dims = frame.view(rig.ref_index()).dims();
    for (what, d) in [
        ("disparity map", disparity.dims()),
        ("segmentation", seg.dims()),
        ("reference prior", ref_prior.dims()),
    ] {
        if d != dims {
            return Err(Error::SizeMismatch {
                what: what.into(),
                expected: format!("{}x{}", dims.0, dims.1),
                found: format!("{}x{}", d.0, d.1),
            });
        }
    }
    let (w, h) = dims;
    let class = ref_prior.map(|&p| is_static(p, params.threshold) as u8);
    let reference = frame.view(rig.ref_index());
    let pixels: Vec<([u8; 3], Provenance)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if params.dynamic_only && *class.get(x, y) == 1 {
                return (*reference.get(x, y), Provenance::Copied);
            }
            refocus_pixel(
                frame,
                rig,
                x,
                y,
                *disparity.disparity.get(x, y),
                seg.static_rays(x, y),
                params.min_static_rays,
            )
        })
        .collect();
    let (color, provenance): (Vec<_>, Vec<_>) = pixels.into_iter().unzip();
    let raw = RefocusedImage {
        color: Plane::from_vec(w, h, color),
        provenance: Plane::from_vec(w, h, provenance),
    };
    Ok(median_filter_partitioned(&raw, params.median_radius, &class))
}
