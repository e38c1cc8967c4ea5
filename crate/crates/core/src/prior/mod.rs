//! Piecewise-planar disparity prior.
//!
//! Sparse support points are matched in every view, points on dynamic
//! objects are dropped, points seen only behind occluders are carried into
//! the reference view, and the survivors become vertices of a Delaunay mesh
//! whose per-triangle planes give the prior mean `mu` at every pixel.

pub mod delaunay;
mod mesh;
mod support;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use mesh::{triangulate, SupportIndex, TriangulationPrior};
pub use support::{
    build_support_set, detect_support_candidates, match_support_point, reproject_occluded_support, MatchScan,
};

use crate::error::{Error, Result};
use crate::raster::Plane;

/// Sparse matched pixel. `(u, v)` are pixel coordinates in `source_view`
/// until the point is carried into the reference view, after which they are
/// reference coordinates; `d` is always expressed in the view the
/// coordinates belong to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub u: i64,
    pub v: i64,
    pub d: f64,
    pub source_view: usize,
}

impl SupportPoint {
    pub fn new(u: i64, v: i64, d: f64, source_view: usize) -> Self {
        SupportPoint { u, v, d, source_view }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorParams {
    /// Gaussian width in disparity units.
    pub sigma: f64,
    /// Uniform floor of the prior mixture.
    pub gamma: f64,
    /// Disparity search ceiling.
    pub d_max: f64,
    /// Support points within this many pixels contribute candidate disparities.
    pub neighborhood_radius: f64,
}

impl Default for PriorParams {
    fn default() -> Self {
        PriorParams {
            sigma: 2.0,
            gamma: 0.05,
            d_max: 64.0,
            neighborhood_radius: 20.0,
        }
    }
}

impl PriorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.gamma > 0.0) || !(self.d_max > 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma, gamma and d_max must be positive (got {}, {}, {})",
                self.sigma, self.gamma, self.d_max
            )));
        }
        if !(self.neighborhood_radius >= 0.0) {
            return Err(Error::InvalidParams("neighborhood_radius must be non-negative".into()));
        }
        Ok(())
    }
}

/// Tunables of support detection, matching and cleanup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupportParams {
    /// Candidate grid stride in pixels.
    pub grid_stride: usize,
    /// Minimum `sum |entry - 128|` for a candidate descriptor.
    pub min_texture: u32,
    /// Accept a match only if `best <= ratio * second_best`.
    pub uniqueness_ratio: f64,
    /// Allowed disagreement (disparity units) of the reverse match, and the
    /// exclusion window around the best match when picking the runner-up.
    pub lr_tolerance: f64,
    /// Disparity step of the matching scan.
    pub disparity_step: f64,
    /// Neighboring support points whose disparities differ by more than this
    /// are inconsistent and only one survives.
    pub consistency_gap: f64,
}

impl Default for SupportParams {
    fn default() -> Self {
        SupportParams {
            grid_stride: 5,
            min_texture: 10,
            uniqueness_ratio: 0.9,
            lr_tolerance: 1.0,
            disparity_step: 0.5,
            consistency_gap: 2.0,
        }
    }
}

impl SupportParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_stride == 0 || !(self.disparity_step > 0.0) {
            return Err(Error::InvalidParams("grid_stride and disparity_step must be positive".into()));
        }
        if !(self.uniqueness_ratio > 0.0 && self.uniqueness_ratio <= 1.0) {
            return Err(Error::InvalidParams("uniqueness_ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Threshold test on a stored static probability. The comparison happens in
/// `f32` so that a stored 0.7 counts as static at threshold 0.7.
#[inline]
pub fn is_static(p: f32, threshold: f64) -> bool {
    p >= threshold as f32
}

/// Keeps points whose static probability (in their detection view) is at
/// least `threshold`.
pub fn filter_dynamic(points: &[SupportPoint], seg_prior: &Plane<f32>, threshold: f64) -> Vec<SupportPoint> {
    points
        .iter()
        .filter(|p| {
            seg_prior
                .get_checked(p.u, p.v)
                .is_some_and(|&s| is_static(s, threshold))
        })
        .copied()
        .collect()
}

/// Like [`filter_dynamic`], but every pixel within `radius` (Chebyshev,
/// clipped to the image) must be static too. Points whose descriptor window
/// overlaps a dynamic region tend to lock onto the occluder's edge.
pub fn filter_dynamic_footprint(
    points: &[SupportPoint],
    seg_prior: &Plane<f32>,
    threshold: f64,
    radius: usize,
) -> Vec<SupportPoint> {
    let r = radius as i64;
    filter_dynamic(points, seg_prior, threshold)
        .into_iter()
        .filter(|p| {
            (p.v - r..=p.v + r).all(|v| {
                (p.u - r..=p.u + r).all(|u| seg_prior.get_checked(u, v).is_none_or(|&s| is_static(s, threshold)))
            })
        })
        .collect()
}

/// At most one point per pixel; 8-adjacent points whose disparities differ by
/// more than `gap` are resolved in favor of the reference view, then the
/// smaller (farther) disparity.
pub fn deduplicate(points: &[SupportPoint], ref_index: usize, gap: f64) -> Vec<SupportPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let rank = |p: &SupportPoint| p.source_view != ref_index;
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        rank(pa)
            .cmp(&rank(pb))
            .then(pa.d.total_cmp(&pb.d))
            .then((pa.v, pa.u).cmp(&(pb.v, pb.u)))
            .then(pa.source_view.cmp(&pb.source_view))
            .then(a.cmp(&b))
    });

    let mut taken: HashMap<(i64, i64), f64> = HashMap::with_capacity(points.len());
    let mut keep = vec![false; points.len()];
    'next: for &i in &order {
        let p = &points[i];
        if taken.contains_key(&(p.u, p.v)) {
            continue;
        }
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(&d) = taken.get(&(p.u + dx, p.v + dy)) {
                    if (d - p.d).abs() > gap {
                        continue 'next;
                    }
                }
            }
        }
        taken.insert((p.u, p.v), p.d);
        keep[i] = true;
    }
    let mut out: Vec<SupportPoint> = points.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
    out.sort_by_key(|p| (p.v, p.u));
    out
}

/// `ln(gamma + exp(-(d - mu)^2 / (2 sigma^2)))`.
#[inline]
pub fn prior_log_density(d: f64, mu: f64, params: &PriorParams) -> f64 {
    let z = d - mu;
    (params.gamma + (-(z * z) / (2.0 * params.sigma * params.sigma)).exp()).ln()
}

/// Step of the Gaussian band around `mu`.
pub const BAND_STEP: f64 = 0.5;
/// Thinning of the coarse `1..=d_max` grid.
pub const COARSE_STEP: usize = 4;

const CANDIDATE_EPS: f64 = 1e-9;

/// Candidate disparities for one pixel, ascending, within `(0, d_max]`:
/// the band `mu + j * 0.5` for `|j| <= 2 sigma / 0.5`, the disparities of
/// nearby support points, and the grid `1, 5, 9, ...`.
pub fn candidate_disparities(mu: f64, neighbors: &[f64], params: &PriorParams) -> Vec<f64> {
    candidates_into(mu, neighbors, params, Vec::new())
}

/// Like [`candidate_disparities`] but reuses `out`'s allocation.
pub fn candidates_into(mu: f64, neighbors: &[f64], params: &PriorParams, mut out: Vec<f64>) -> Vec<f64> {
    out.clear();
    let half = (2.0 * params.sigma / BAND_STEP + CANDIDATE_EPS).floor() as i64;
    if mu.is_finite() {
        out.extend((-half..=half).map(|j| mu + j as f64 * BAND_STEP));
    }
    out.extend(neighbors.iter().copied());
    let top = params.d_max.floor().max(0.0) as usize;
    out.extend((1..=top).step_by(COARSE_STEP).map(|d| d as f64));
    out.retain(|&d| d > 0.0 && d <= params.d_max);
    out.sort_by(f64::total_cmp);
    out.dedup_by(|b, a| (*b - *a).abs() <= CANDIDATE_EPS);
    out
}
