use rayon::prelude::*;

use super::{deduplicate, filter_dynamic_footprint, is_static, PriorParams, SupportParams, SupportPoint};
use crate::features::{descriptor_texture, DescriptorMap, Feature, DESCRIPTOR_RADIUS};
use crate::geometry::{CameraRig, PixelCoord};
use crate::raster::Plane;

/// Grid-strided pixels whose descriptor carries enough texture, in `(v, u)` order.
pub fn detect_support_candidates(descr: &DescriptorMap, params: &SupportParams) -> Vec<(i64, i64)> {
    let stride = params.grid_stride.max(1);
    let mut out = Vec::new();
    for y in (0..descr.height()).step_by(stride) {
        for x in (0..descr.width()).step_by(stride) {
            if let Some(d) = descr.get(x as i64, y as i64) {
                if descriptor_texture(d) >= params.min_texture {
                    out.push((x as i64, y as i64));
                }
            }
        }
    }
    out
}

/// Outcome of one epipolar scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchScan {
    pub disparity: f64,
    /// L1 distance to the bilinearly sampled target descriptor.
    pub cost: f32,
    /// Lowest cost outside the exclusion window around the winner.
    pub runner_up: Option<f32>,
    /// Target location of the winning disparity.
    pub target: PixelCoord,
}

fn feature_distance(a: &Feature, b: &Feature) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn scan(
    rig: &CameraRig,
    from: usize,
    to: usize,
    px: PixelCoord,
    desc: &Feature,
    target: &DescriptorMap,
    d_max: f64,
    params: &SupportParams,
) -> Option<MatchScan> {
    let warp = rig.pair_warp(from, to);
    let steps = (d_max / params.disparity_step + 1e-9).floor() as usize;
    let mut costs: Vec<(f64, f32, PixelCoord)> = Vec::with_capacity(steps);
    for j in 1..=steps {
        let d = j as f64 * params.disparity_step;
        let Some(w) = warp.apply(px, d) else { continue };
        if let Some(td) = target.sample_bilinear(w.u, w.v) {
            costs.push((d, feature_distance(desc, &td), w));
        }
    }
    // strict comparison: ties go to the smaller disparity
    let &(disparity, cost, target) = costs.iter().fold(None, |best: Option<&(f64, f32, PixelCoord)>, c| match best {
        Some(b) if b.1 <= c.1 => Some(b),
        _ => Some(c),
    })?;
    let runner_up = costs
        .iter()
        .filter(|c| (c.0 - disparity).abs() > params.lr_tolerance)
        .map(|c| c.1)
        .min_by(f32::total_cmp);
    Some(MatchScan {
        disparity,
        cost,
        runner_up,
        target,
    })
}

/// Matches pixel `p` of view `source` against view `target` along its
/// epipolar locus. Returns the source-view disparity, or `None` when the
/// match is ambiguous (uniqueness ratio) or inconsistent (left-right check).
#[allow(clippy::too_many_arguments)]
pub fn match_support_point(
    p: (i64, i64),
    source: usize,
    target: usize,
    descr_source: &DescriptorMap,
    descr_target: &DescriptorMap,
    rig: &CameraRig,
    d_max: f64,
    params: &SupportParams,
) -> Option<f64> {
    let desc = descr_source.get(p.0, p.1)?.map(f32::from);
    let px = PixelCoord::new(p.0 as f64, p.1 as f64);
    let fwd = scan(rig, source, target, px, &desc, descr_target, d_max, params)?;
    let runner_up = fwd.runner_up?;
    // a zero-cost tie elsewhere on the line is ambiguous too
    if !(fwd.cost < runner_up && fwd.cost as f64 <= params.uniqueness_ratio * runner_up as f64) {
        return None;
    }

    let q = fwd.target;
    let back_desc = descr_target.sample_bilinear(q.u, q.v)?;
    let back = scan(rig, target, source, q, &back_desc, descr_source, d_max, params)?;
    // express the reverse match in source-view disparity units
    let point = rig.backproject(target, q, back.disparity).ok()?;
    let d_back = rig.depth_to_disparity_in(source, rig.depth_in(source, &point)).ok()?;
    if (d_back - fwd.disparity).abs() > params.lr_tolerance {
        return None;
    }
    Some(fwd.disparity)
}

/// Carries view-`j` support points into the reference view, keeping those
/// that land in bounds on pixels the reference prior marks as dynamic
/// (static probability below `threshold`).
pub fn reproject_occluded_support(
    points: &[SupportPoint],
    rig: &CameraRig,
    ref_prior: &Plane<f32>,
    threshold: f64,
    d_max: f64,
) -> Vec<SupportPoint> {
    let r = rig.ref_index();
    points
        .iter()
        .filter_map(|p| {
            let x = PixelCoord::new(p.u as f64, p.v as f64);
            let point = rig.backproject(p.source_view, x, p.d).ok()?;
            let x_ref = rig.project(r, &point)?;
            let (u, v) = x_ref.round();
            let s = *ref_prior.get_checked(u, v)?;
            if is_static(s, threshold) {
                return None;
            }
            let d = rig.depth_to_disparity(rig.depth_in(r, &point)).ok()?;
            (d > 0.0 && d <= d_max).then_some(SupportPoint::new(u, v, d, p.source_view))
        })
        .collect()
}

/// Full support pipeline: detect and match in every view against its
/// nearest neighbor, drop points whose descriptor window touches a dynamic
/// pixel in either view, carry other views' points into occluded reference regions,
/// deduplicate.
pub fn build_support_set(
    rig: &CameraRig,
    descriptors: &[DescriptorMap],
    priors: &[Plane<f32>],
    threshold: f64,
    prior_params: &PriorParams,
    params: &SupportParams,
) -> Vec<SupportPoint> {
    let r = rig.ref_index();
    let mut all = Vec::new();
    for view in 0..rig.num_cameras() {
        let neighbor = rig.nearest_neighbor(view);
        let candidates = detect_support_candidates(&descriptors[view], params);
        let matched: Vec<SupportPoint> = candidates
            .par_iter()
            .filter_map(|&p| {
                match_support_point(
                    p,
                    view,
                    neighbor,
                    &descriptors[view],
                    &descriptors[neighbor],
                    rig,
                    prior_params.d_max,
                    params,
                )
                .map(|d| SupportPoint::new(p.0, p.1, d, view))
            })
            .collect();
        let kept = filter_dynamic_footprint(&matched, &priors[view], threshold, DESCRIPTOR_RADIUS);
        // the matched location must be background in the neighbor as well
        let warp = rig.pair_warp(view, neighbor);
        let kept: Vec<SupportPoint> = kept
            .into_iter()
            .filter(|p| {
                warp.apply(PixelCoord::new(p.u as f64, p.v as f64), p.d).is_some_and(|t| {
                    let (u, v) = t.round();
                    let probe = [SupportPoint::new(u, v, p.d, neighbor)];
                    !filter_dynamic_footprint(&probe, &priors[neighbor], threshold, DESCRIPTOR_RADIUS).is_empty()
                })
            })
            .collect();
        if view == r {
            all.extend(kept);
        } else {
            all.extend(reproject_occluded_support(&kept, rig, &priors[r], threshold, prior_params.d_max));
        }
    }
    deduplicate(&all, r, params.consistency_gap)
}
