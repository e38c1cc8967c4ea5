//! Hard-assignment EM over per-pixel disparity and per-ray segmentation.
//!
//! Every reference pixel `x` is solved independently. The M-step picks the
//! disparity minimizing `beta * Var(static rays) - ln p(d | mu)` over a small
//! candidate set; the E-step picks the static/dynamic labelling of the rays
//! sampled at that disparity maximizing `exp(-beta * Var) * p(S | S_P)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DescriptorMap, Feature, DESCRIPTOR_LEN};
use crate::geometry::{CameraRig, PixelCoord, MAX_CAMERAS};
use crate::prior::{candidates_into, is_static, prior_log_density, PriorParams, TriangulationPrior};
use crate::raster::Plane;

/// Bit `k` set iff the ray into view `k` is selected.
pub type RayMask = u8;

/// Largest two-ray variance of 16 byte-valued entries, `16 * 255^2 / 4`.
pub const VARIANCE_PENALTY: f64 = 4.0 * 255.0 * 255.0;

/// Fraction of pixels allowed to move by more than [`CHANGE_TOLERANCE`]
/// between iterations at convergence.
pub const CONVERGENCE_FRACTION: f64 = 1e-3;
pub const CHANGE_TOLERANCE: f64 = 0.5;

/// Per-view static probability maps.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationPriorMaps {
    maps: Vec<Plane<f32>>,
}

impl SegmentationPriorMaps {
    pub fn new(maps: Vec<Plane<f32>>) -> Result<Self> {
        for (k, m) in maps.iter().enumerate() {
            if let Some(p) = m.as_slice().iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidParams(format!("prior {k} holds {p}, outside [0, 1]")));
            }
        }
        Ok(SegmentationPriorMaps { maps })
    }

    /// All-static priors of the given size.
    pub fn all_static(views: usize, width: usize, height: usize) -> Self {
        SegmentationPriorMaps {
            maps: vec![Plane::new(width, height, 1.0); views],
        }
    }

    pub fn num_views(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[Plane<f32>] {
        &self.maps
    }

    pub fn get(&self, k: usize) -> &Plane<f32> {
        &self.maps[k]
    }

    pub fn into_maps(self) -> Vec<Plane<f32>> {
        self.maps
    }

    pub fn check_rig(&self, rig: &CameraRig) -> Result<()> {
        if self.maps.len() != rig.num_cameras() {
            return Err(Error::SizeMismatch {
                what: "prior count".into(),
                expected: rig.num_cameras().to_string(),
                found: self.maps.len().to_string(),
            });
        }
        for (k, m) in self.maps.iter().enumerate() {
            let intr = &rig.camera(k).intrinsics;
            if m.dims() != (intr.width, intr.height) {
                return Err(Error::SizeMismatch {
                    what: format!("prior {k}"),
                    expected: format!("{}x{}", intr.width, intr.height),
                    found: format!("{}x{}", m.width(), m.height()),
                });
            }
        }
        Ok(())
    }
}

/// Per reference pixel: which rays are static, and which were in bounds at
/// the disparity the labels were computed for. `static_mask ⊆ valid_mask`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationState {
    pub static_mask: Plane<RayMask>,
    pub valid_mask: Plane<RayMask>,
}

impl SegmentationState {
    pub fn dims(&self) -> (usize, usize) {
        self.static_mask.dims()
    }

    pub fn static_rays(&self, x: usize, y: usize) -> RayMask {
        *self.static_mask.get(x, y)
    }

    pub fn valid_rays(&self, x: usize, y: usize) -> RayMask {
        *self.valid_mask.get(x, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Inverse temperature of the photo-consistency likelihood.
    pub beta: f64,
    /// Static-probability threshold for the initial labels.
    pub threshold: f64,
    pub max_iters: usize,
    pub min_static_rays: usize,
    /// Floor (and `1 - ceiling`) of per-ray prior probabilities.
    pub epsilon_prior: f64,
    /// Solve only pixels whose reference prior is below `threshold`.
    pub dynamic_only: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            beta: 1.0 / (16.0 * 20.0 * 20.0),
            threshold: 0.7,
            max_iters: 5,
            min_static_rays: 2,
            epsilon_prior: 0.01,
            dynamic_only: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(2..=MAX_CAMERAS).contains(&self.min_static_rays) {
            return bad("min_static_rays must lie in 2..=8");
        }
        if !(self.epsilon_prior > 0.0 && self.epsilon_prior < 0.5) {
            return bad("epsilon_prior must lie in (0, 0.5)");
        }
        Ok(())
    }

    fn penalty(&self) -> f64 {
        self.beta * VARIANCE_PENALTY
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisparityStatus {
    Valid,
    /// No candidate disparity was available.
    LowTexture,
    /// Fewer than `min_static_rays` static rays at the chosen disparity; the
    /// value comes from the prior alone.
    NoStaticEvidence,
    /// Not solved (static pixel in dynamic-only mode); holds `mu`.
    Interpolated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap {
    pub disparity: Plane<f64>,
    pub status: Plane<DisparityStatus>,
}

impl DisparityMap {
    pub fn dims(&self) -> (usize, usize) {
        self.disparity.dims()
    }
}

/// Statistics of one M-step + E-step round.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationStats {
    /// Mean energy of the previous disparities under this round's labels
    /// (absent in the first round).
    pub energy_before: Option<f64>,
    pub energy_after: f64,
    /// Pixels whose new energy exceeds the old one under fixed labels.
    pub descent_violations: usize,
    /// Fraction of solved pixels moving by more than 0.5 (absent in round 1).
    pub changed_fraction: Option<f64>,
    /// Rays whose label the E-step changed.
    pub relabeled_rays: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmReport {
    pub iterations: usize,
    pub converged: bool,
    pub solved_pixels: usize,
    pub per_iteration: Vec<IterationStats>,
}

#[derive(Clone, Debug)]
pub struct EmResult {
    pub disparity: DisparityMap,
    pub segmentation: SegmentationState,
    pub report: EmReport,
}

/// Two-pass masked variance: mean squared distance of the selected
/// descriptors to their mean. `None` with fewer than two selected.
pub fn masked_variance(features: &[Feature], mask: RayMask) -> Option<f64> {
    let mut picked = [[0f32; DESCRIPTOR_LEN]; MAX_CAMERAS];
    let mut n = 0;
    for (k, f) in features.iter().enumerate().take(MAX_CAMERAS) {
        if mask >> k & 1 == 1 {
            picked[n] = *f;
            n += 1;
        }
    }
    (n >= 2).then(|| variance_of(&picked[..n]))
}

#[inline]
fn variance_of(features: &[Feature]) -> f64 {
    let n = features.len() as f64;
    let mut mean = [0f64; DESCRIPTOR_LEN];
    for f in features {
        for i in 0..DESCRIPTOR_LEN {
            mean[i] += f[i] as f64;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut ss = 0.0;
    for f in features {
        for i in 0..DESCRIPTOR_LEN {
            let e = f[i] as f64 - mean[i];
            ss += e * e;
        }
    }
    ss / n
}

/// Read-only inputs shared by every pixel.
#[derive(Clone, Copy)]
pub struct SolverInputs<'a> {
    pub rig: &'a CameraRig,
    pub descriptors: &'a [DescriptorMap],
    pub priors: &'a SegmentationPriorMaps,
}

/// How the M-step chooses static rays at each candidate disparity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaskSource {
    /// A label mask from the E-step, intersected with the in-bounds rays.
    Fixed(RayMask),
    /// Rays whose sampled prior reaches the threshold.
    Thresholded(f64),
}

/// Energy of one candidate and the rays behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateEnergy {
    pub energy: f64,
    pub valid: RayMask,
    pub used: RayMask,
}

impl<'a> SolverInputs<'a> {
    pub fn new(rig: &'a CameraRig, descriptors: &'a [DescriptorMap], priors: &'a SegmentationPriorMaps) -> Result<Self> {
        if descriptors.len() != rig.num_cameras() {
            return Err(Error::SizeMismatch {
                what: "descriptor map count".into(),
                expected: rig.num_cameras().to_string(),
                found: descriptors.len().to_string(),
            });
        }
        for (k, d) in descriptors.iter().enumerate() {
            let intr = &rig.camera(k).intrinsics;
            if (d.width(), d.height()) != (intr.width, intr.height) {
                return Err(Error::SizeMismatch {
                    what: format!("descriptor map {k}"),
                    expected: format!("{}x{}", intr.width, intr.height),
                    found: format!("{}x{}", d.width(), d.height()),
                });
            }
        }
        priors.check_rig(rig)?;
        Ok(SolverInputs { rig, descriptors, priors })
    }

    fn num_views(&self) -> usize {
        self.rig.num_cameras()
    }

    /// Position of the ray into view `k`, if its descriptor can be sampled.
    #[inline]
    pub fn ray(&self, x: PixelCoord, d: f64, k: usize) -> Option<PixelCoord> {
        let p = self.rig.warp(x, d, k)?;
        self.descriptors[k].covers(p.u, p.v).then_some(p)
    }

    /// In-bounds rays at disparity `d`.
    pub fn valid_rays(&self, x: PixelCoord, d: f64) -> RayMask {
        (0..self.num_views()).fold(0, |m, k| m | (self.ray(x, d, k).is_some() as RayMask) << k)
    }

    /// In-bounds rays whose bilinearly sampled prior reaches `threshold`.
    pub fn threshold_mask(&self, x: PixelCoord, d: f64, threshold: f64) -> RayMask {
        let mut m = 0;
        for k in 0..self.num_views() {
            if let Some(p) = self.ray(x, d, k) {
                let s = self.priors.get(k).sample_bilinear(p.u, p.v).unwrap_or(0.0);
                if is_static(s as f32, threshold) {
                    m |= 1 << k;
                }
            }
        }
        m
    }

    /// Energy at one candidate; rays outside the source mask are never sampled.
    pub fn candidate_energy(
        &self,
        x: PixelCoord,
        d: f64,
        mu: f64,
        source: MaskSource,
        params: &SolverParams,
        prior_params: &PriorParams,
    ) -> CandidateEnergy {
        let mut feats = [[0f32; DESCRIPTOR_LEN]; MAX_CAMERAS];
        let (mut n, mut valid, mut used) = (0, 0, 0);
        for k in 0..self.num_views() {
            let Some(p) = self.ray(x, d, k) else { continue };
            valid |= 1 << k;
            let take = match source {
                MaskSource::Fixed(m) => m >> k & 1 == 1,
                MaskSource::Thresholded(t) => {
                    let s = self.priors.get(k).sample_bilinear(p.u, p.v).unwrap_or(0.0);
                    is_static(s as f32, t)
                }
            };
            if take {
                // covers() held, so the sample exists
                feats[n] = self.descriptors[k].sample_bilinear(p.u, p.v).unwrap_or_default();
                n += 1;
                used |= 1 << k;
            }
        }
        let data = if n >= params.min_static_rays {
            params.beta * variance_of(&feats[..n])
        } else {
            params.penalty()
        };
        CandidateEnergy {
            energy: data - prior_log_density(d, mu, prior_params),
            valid,
            used,
        }
    }

    /// Features and clamped-free prior probabilities of the rays at `d`.
    pub fn sample_rays(&self, x: PixelCoord, d: f64) -> (RayMask, [Feature; MAX_CAMERAS], [f64; MAX_CAMERAS]) {
        let mut feats = [[0f32; DESCRIPTOR_LEN]; MAX_CAMERAS];
        let mut probs = [0f64; MAX_CAMERAS];
        let mut valid = 0;
        for k in 0..self.num_views() {
            if let Some(p) = self.ray(x, d, k) {
                valid |= 1 << k;
                feats[k] = self.descriptors[k].sample_bilinear(p.u, p.v).unwrap_or_default();
                probs[k] = self.priors.get(k).sample_bilinear(p.u, p.v).unwrap_or(0.0);
            }
        }
        (valid, feats, probs)
    }
}

/// `beta * Var - ln p(d | mu)` with the static rays `mask ∧ valid(d)`; the
/// variance term becomes `beta * VARIANCE_PENALTY` below `min_static_rays`.
pub fn pixel_energy(
    inputs: &SolverInputs,
    x: PixelCoord,
    d: f64,
    mask: RayMask,
    mu: f64,
    params: &SolverParams,
    prior_params: &PriorParams,
) -> f64 {
    inputs
        .candidate_energy(x, d, mu, MaskSource::Fixed(mask), params, prior_params)
        .energy
}

/// Outcome of a per-pixel M-step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MStep {
    pub disparity: f64,
    pub energy: f64,
    pub valid: RayMask,
    pub used: RayMask,
}

/// Minimizes the energy over `candidates` (ascending); ties keep the
/// smaller disparity. `None` for an empty candidate set.
pub fn m_step(
    inputs: &SolverInputs,
    x: PixelCoord,
    source: MaskSource,
    mu: f64,
    candidates: &[f64],
    params: &SolverParams,
    prior_params: &PriorParams,
) -> Option<MStep> {
    let mut best: Option<MStep> = None;
    for &d in candidates {
        let c = inputs.candidate_energy(x, d, mu, source, params, prior_params);
        if best.is_none_or(|b| c.energy < b.energy) {
            best = Some(MStep {
                disparity: d,
                energy: c.energy,
                valid: c.valid,
                used: c.used,
            });
        }
    }
    best
}

/// Log-score of one labelling: `-beta * Var(mask) + sum_k ln q_k`, summed
/// over the valid rays.
pub fn mask_score(features: &[Feature], probs: &[f64], valid: RayMask, mask: RayMask, params: &SolverParams) -> f64 {
    let (lo, hi) = (params.epsilon_prior, 1.0 - params.epsilon_prior);
    let mut picked = [[0f32; DESCRIPTOR_LEN]; MAX_CAMERAS];
    let mut n = 0;
    let mut log_prior = 0.0;
    for k in 0..features.len().min(MAX_CAMERAS) {
        if valid >> k & 1 == 0 {
            continue;
        }
        if mask >> k & 1 == 1 {
            picked[n] = features[k];
            n += 1;
            log_prior += probs[k].clamp(lo, hi).ln();
        } else {
            log_prior += (1.0 - probs[k]).clamp(lo, hi).ln();
        }
    }
    let data = if n >= params.min_static_rays {
        params.beta * variance_of(&picked[..n])
    } else {
        params.penalty()
    };
    log_prior - data
}

/// `true` if `a` beats `b` on a score tie: more static rays, then the mask
/// holding the lowest-indexed differing ray.
#[inline]
fn tie_prefers(a: RayMask, b: RayMask) -> bool {
    let (ca, cb) = (a.count_ones(), b.count_ones());
    if ca != cb {
        return ca > cb;
    }
    let diff = a ^ b;
    diff != 0 && a & (diff & diff.wrapping_neg()) != 0
}

/// Exhaustive E-step over every subset of `valid`.
pub fn best_mask(features: &[Feature], probs: &[f64], valid: RayMask, params: &SolverParams) -> RayMask {
    let mut best = valid;
    let mut best_score = mask_score(features, probs, valid, valid, params);
    // walk the proper subsets of `valid` downwards, ending at 0
    let mut sub = valid;
    while sub != 0 {
        sub = (sub - 1) & valid;
        let s = mask_score(features, probs, valid, sub, params);
        if s > best_score || (s == best_score && tie_prefers(sub, best)) {
            best = sub;
            best_score = s;
        }
    }
    best
}

/// Relabels the rays of pixel `x` sampled at `d_old`; returns `(static, valid)`.
pub fn e_step(inputs: &SolverInputs, x: PixelCoord, d_old: f64, params: &SolverParams) -> (RayMask, RayMask) {
    let k = inputs.num_views();
    let (valid, feats, probs) = inputs.sample_rays(x, d_old);
    (best_mask(&feats[..k], &probs[..k], valid, params), valid)
}

#[derive(Clone, Copy)]
struct PixelSolve {
    d: f64,
    status: DisparityStatus,
    /// Rays the M-step scored at `d`; what the E-step must reproduce for a
    /// fixed point.
    used: RayMask,
    energy: f64,
    energy_before: f64,
}

/// Full EM: thresholded-prior initialization, then alternate M- and E-steps
/// until the labels stop changing, fewer than 0.1% of pixels move by more
/// than 0.5, or `max_iters` rounds ran.
pub fn em_solve(
    inputs: &SolverInputs,
    tri: &TriangulationPrior,
    params: &SolverParams,
    prior_params: &PriorParams,
) -> Result<EmResult> {
    params.validate()?;
    prior_params.validate()?;
    let (w, h) = inputs.rig.image_dims();
    if tri.dims() != (w, h) {
        return Err(Error::SizeMismatch {
            what: "triangulation".into(),
            expected: format!("{w}x{h}"),
            found: format!("{}x{}", tri.dims().0, tri.dims().1),
        });
    }
    let n = w * h;
    let coord = |i: usize| PixelCoord::new((i % w) as f64, (i / w) as f64);
    let ref_prior = inputs.priors.get(inputs.rig.ref_index());
    let solve: Vec<bool> = ref_prior
        .as_slice()
        .iter()
        .map(|&p| !params.dynamic_only || !is_static(p, params.threshold))
        .collect();
    let solved_pixels = solve.iter().filter(|&&s| s).count();

    let mut disparity: Vec<f64> = Vec::new();
    let mut labels: Vec<(RayMask, RayMask)> = Vec::new();
    let mut status: Vec<DisparityStatus> = Vec::new();
    let mut per_iteration = Vec::new();
    let mut converged = false;

    for iter in 1..=params.max_iters {
        let first = iter == 1;
        let m: Vec<PixelSolve> = (0..n)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(neigh, cand): &mut (Vec<f64>, Vec<f64>), i| {
                    let x = coord(i);
                    let mu = tri.interpolate_mu(x);
                    if !solve[i] {
                        let d = if first { mu } else { disparity[i] };
                        return PixelSolve {
                            d,
                            status: DisparityStatus::Interpolated,
                            used: 0,
                            energy: 0.0,
                            energy_before: 0.0,
                        };
                    }
                    let source = if first {
                        MaskSource::Thresholded(params.threshold)
                    } else {
                        MaskSource::Fixed(labels[i].0)
                    };
                    neigh.clear();
                    tri.support_index()
                        .disparities_within(x, prior_params.neighborhood_radius, neigh);
                    *cand = candidates_into(mu, neigh, prior_params, std::mem::take(cand));
                    let energy_before = if first {
                        0.0
                    } else {
                        inputs
                            .candidate_energy(x, disparity[i], mu, source, params, prior_params)
                            .energy
                    };
                    match m_step(inputs, x, source, mu, cand, params, prior_params) {
                        Some(best) => PixelSolve {
                            d: best.disparity,
                            status: if (best.used.count_ones() as usize) < params.min_static_rays {
                                DisparityStatus::NoStaticEvidence
                            } else {
                                DisparityStatus::Valid
                            },
                            used: best.used,
                            energy: best.energy,
                            energy_before,
                        },
                        None => PixelSolve {
                            d: mu.clamp(f64::MIN_POSITIVE, prior_params.d_max),
                            status: DisparityStatus::LowTexture,
                            used: 0,
                            energy: 0.0,
                            energy_before,
                        },
                    }
                },
            )
            .collect();

        let new_labels: Vec<(RayMask, RayMask)> = m
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let x = coord(i);
                if solve[i] {
                    e_step(inputs, x, p.d, params)
                } else {
                    (inputs.threshold_mask(x, p.d, params.threshold), inputs.valid_rays(x, p.d))
                }
            })
            .collect();

        // sequential reductions keep the statistics independent of thread count
        let mut energy_after = 0.0;
        let mut energy_before = 0.0;
        let mut violations = 0;
        let mut moved = 0;
        let mut relabeled = 0;
        let mut labels_fixed = true;
        for i in (0..n).filter(|&i| solve[i]) {
            let p = &m[i];
            energy_after += p.energy;
            if !first {
                energy_before += p.energy_before;
                if p.energy > p.energy_before {
                    violations += 1;
                }
                if (p.d - disparity[i]).abs() > CHANGE_TOLERANCE {
                    moved += 1;
                }
            }
            let changed = (new_labels[i].0 ^ p.used).count_ones() as usize;
            relabeled += changed;
            labels_fixed &= changed == 0;
        }
        let denom = solved_pixels.max(1) as f64;
        let changed_fraction = (!first).then(|| moved as f64 / denom);
        per_iteration.push(IterationStats {
            energy_before: (!first).then(|| energy_before / denom),
            energy_after: energy_after / denom,
            descent_violations: violations,
            changed_fraction,
            relabeled_rays: relabeled,
        });
        log::debug!("EM round {iter}: {:?}", per_iteration.last());

        disparity = m.iter().map(|p| p.d).collect();
        status = m.iter().map(|p| p.status).collect();
        labels = new_labels;
        if labels_fixed || changed_fraction.is_some_and(|f| f < CONVERGENCE_FRACTION) {
            converged = true;
            break;
        }
    }

    let iterations = per_iteration.len();
    let (static_mask, valid_mask): (Vec<RayMask>, Vec<RayMask>) = labels.into_iter().unzip();
    Ok(EmResult {
        disparity: DisparityMap {
            disparity: Plane::from_vec(w, h, disparity),
            status: Plane::from_vec(w, h, status),
        },
        segmentation: SegmentationState {
            static_mask: Plane::from_vec(w, h, static_mask),
            valid_mask: Plane::from_vec(w, h, valid_mask),
        },
        report: EmReport {
            iterations,
            converged,
            solved_pixels,
            per_iteration,
        },
    })
}
