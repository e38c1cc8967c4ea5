//! Accuracy metrics against synthetic ground truth.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{CameraRig, PixelCoord};
use crate::prior::is_static;
use crate::raster::{Plane, RgbImage};
use crate::refocus::Provenance;
use crate::solver::{SegmentationPriorMaps, SegmentationState};

/// Disparity errors above this count as bad pixels.
pub const BAD_PIXEL_THRESHOLD: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DisparityErrors {
    pub mae: f64,
    pub bad_rate: f64,
    pub pixels: usize,
}

/// Mean absolute error and bad-pixel rate over pixels where `mask` holds
/// and the truth is finite.
pub fn disparity_errors(pred: &Plane<f64>, truth: &Plane<f64>, mask: Option<&Plane<bool>>) -> Result<DisparityErrors> {
    same_dims("disparity", pred.dims(), truth.dims())?;
    if let Some(m) = mask {
        same_dims("evaluation mask", m.dims(), truth.dims())?;
    }
    let mut sum = 0.0;
    let mut bad = 0usize;
    let mut n = 0usize;
    for (i, (&p, &t)) in pred.as_slice().iter().zip(truth.as_slice()).enumerate() {
        if !t.is_finite() || mask.is_some_and(|m| !m.as_slice()[i]) {
            continue;
        }
        let e = (p - t).abs();
        let e = if e.is_finite() { e } else { f64::INFINITY };
        sum += e;
        bad += (e > BAD_PIXEL_THRESHOLD) as usize;
        n += 1;
    }
    Ok(if n == 0 {
        DisparityErrors::default()
    } else {
        DisparityErrors {
            mae: sum / n as f64,
            bad_rate: bad as f64 / n as f64,
            pixels: n,
        }
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RefocusErrors {
    /// Root-mean-square error on the 0..1 intensity scale.
    pub rmse: f64,
    pub pixels: usize,
    pub fallback_pixels: usize,
}

/// RMSE over pixels refocused from at least `min_rays` rays (and inside
/// `region` if given); fallback pixels are counted, not scored.
pub fn refocus_errors(
    img: &RgbImage,
    provenance: &Plane<Provenance>,
    truth: &RgbImage,
    min_rays: usize,
    region: Option<&Plane<bool>>,
) -> Result<RefocusErrors> {
    same_dims("refocused image", img.dims(), truth.dims())?;
    same_dims("provenance", provenance.dims(), truth.dims())?;
    let mut ss = 0.0;
    let mut n = 0usize;
    let mut fallback = 0usize;
    for i in 0..truth.len() {
        if region.is_some_and(|r| !r.as_slice()[i]) {
            continue;
        }
        match provenance.as_slice()[i] {
            Provenance::Refocused(k) if k as usize >= min_rays => {
                let (a, b) = (img.as_slice()[i], truth.as_slice()[i]);
                for c in 0..3 {
                    let e = (a[c] as f64 - b[c] as f64) / 255.0;
                    ss += e * e;
                }
                n += 1;
            }
            Provenance::Fallback => fallback += 1,
            _ => {}
        }
    }
    Ok(RefocusErrors {
        rmse: if n == 0 { 0.0 } else { (ss / (3 * n) as f64).sqrt() },
        pixels: n,
        fallback_pixels: fallback,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SegmentationAccuracy {
    /// Thresholded prior at the same rays.
    pub before: f64,
    pub after: f64,
    pub rays: usize,
}

/// Per-ray label accuracy. Each valid ray of each reference pixel is
/// followed at the final disparity into its view and compared with the
/// occluder mask at the nearest pixel.
pub fn segmentation_accuracy(
    rig: &CameraRig,
    disparity: &Plane<f64>,
    seg: &SegmentationState,
    priors: &SegmentationPriorMaps,
    threshold: f64,
    truth_masks: &[Plane<bool>],
) -> Result<SegmentationAccuracy> {
    if truth_masks.len() != rig.num_cameras() {
        return Err(Error::SizeMismatch {
            what: "ground-truth masks".into(),
            expected: rig.num_cameras().to_string(),
            found: truth_masks.len().to_string(),
        });
    }
    let (w, h) = disparity.dims();
    let (mut before, mut after, mut rays) = (0usize, 0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            let d = *disparity.get(x, y);
            let valid = seg.valid_rays(x, y);
            let labels = seg.static_rays(x, y);
            let xc = PixelCoord::new(x as f64, y as f64);
            for (k, mask) in truth_masks.iter().enumerate() {
                if valid >> k & 1 == 0 {
                    continue;
                }
                let Some(p) = rig.warp(xc, d, k) else { continue };
                let (u, v) = p.round();
                let Some(&occluded) = mask.get_checked(u, v) else { continue };
                let prior = priors.get(k).sample_bilinear(p.u, p.v).unwrap_or(0.0);
                before += (is_static(prior as f32, threshold) != occluded) as usize;
                after += ((labels >> k & 1 == 1) != occluded) as usize;
                rays += 1;
            }
        }
    }
    let r = rays.max(1) as f64;
    Ok(SegmentationAccuracy {
        before: before as f64 / r,
        after: after as f64 / r,
        rays,
    })
}

fn same_dims(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::SizeMismatch {
            what: what.into(),
            expected: format!("{}x{}", b.0, b.1),
            found: format!("{}x{}", a.0, a.1),
        });
    }
    Ok(())
}

/// Everything `evaluate` reports. Optional fields are absent when the
/// prediction directory lacks the corresponding artifact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub disparity: DisparityErrors,
    pub refocus: Option<RefocusErrors>,
    pub segmentation: Option<SegmentationAccuracy>,
    pub iterations: Option<usize>,
    /// `(stage, seconds)` copied from the prediction's timing log.
    pub timings: Vec<(String, f64)>,
}

impl EvalReport {
    /// Line-oriented `key=value` text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let d = &self.disparity;
        let _ = writeln!(s, "disparity_mae={:.6}", d.mae);
        let _ = writeln!(s, "bad_pixel_rate={:.6}", d.bad_rate);
        let _ = writeln!(s, "evaluated_pixels={}", d.pixels);
        if let Some(r) = &self.refocus {
            let _ = writeln!(s, "refocus_rmse={:.6}", r.rmse);
            let _ = writeln!(s, "refocus_pixels={}", r.pixels);
            let _ = writeln!(s, "fallback_pixels={}", r.fallback_pixels);
        }
        if let Some(a) = &self.segmentation {
            let _ = writeln!(s, "segmentation_accuracy_before={:.6}", a.before);
            let _ = writeln!(s, "segmentation_accuracy_after={:.6}", a.after);
            let _ = writeln!(s, "segmentation_rays={}", a.rays);
        }
        if let Some(i) = self.iterations {
            let _ = writeln!(s, "iterations={i}");
        }
        for (k, v) in &self.timings {
            let _ = writeln!(s, "time_{k}={v:.6}");
        }
        s
    }
}
