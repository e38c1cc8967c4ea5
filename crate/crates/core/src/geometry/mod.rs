//! Pinhole cameras, the calibrated rig, and the disparity-parameterized warp.
//!
//! Extrinsics map reference-frame points into each camera:
//! `X_k = R_k * X_ref + t_k`. A camera whose center sits `b` meters to the
//! right of the reference therefore has `t = (-b, 0, 0)`.
//!
//! Disparity is expressed in units of `unit_baseline`: a point at depth `Z`
//! (in the frame of the view the disparity refers to) has disparity
//! `d = fx * unit_baseline / Z`, i.e. the pixel shift it would induce in a
//! rectified camera one unit baseline away.

mod calib;

pub use calib::{parse_calibration, read_calibration, write_calibration};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Hard cap on rig size; segmentation masks are stored as one bit per view
/// and the E-step enumerates every subset.
pub const MAX_CAMERAS: usize = 8;

/// Orthonormality tolerance enforced on stored rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    #[inline]
    pub const fn new(u: f64, v: f64) -> Self {
        PixelCoord { u, v }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Nearest integer pixel, if non-negative.
    #[inline]
    pub fn round(&self) -> (i64, i64) {
        (self.u.round() as i64, self.v.round() as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let intr = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image dimensions must be non-zero".into()));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidCamera(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Projects a point given in this camera's frame. `None` if `Z <= 0`.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<PixelCoord> {
        if p.z <= 0.0 {
            return None;
        }
        Some(PixelCoord::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Point at depth `z` along the ray through `x`, in this camera's frame.
    #[inline]
    pub fn unproject(&self, x: PixelCoord, z: f64) -> Vector3<f64> {
        Vector3::new((x.u - self.cx) / self.fx * z, (x.v - self.cy) / self.fy * z, z)
    }
}

/// True iff `margin <= u < width - margin` and `margin <= v < height - margin`.
#[inline]
pub fn is_in_bounds(x: PixelCoord, intr: &CameraIntrinsics, margin: f64) -> bool {
    x.u >= margin
        && x.v >= margin
        && x.u < intr.width as f64 - margin
        && x.v < intr.height as f64 - margin
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraExtrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraExtrinsics {
    pub fn identity() -> Self {
        CameraExtrinsics {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation, ROTATION_TOLERANCE).map_err(Error::InvalidCamera)?;
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidCamera("translation must be finite".into()));
        }
        Ok(CameraExtrinsics {
            rotation,
            translation,
        })
    }

    /// Extrinsics of a camera centered at `center` (reference frame) with
    /// reference-to-camera rotation `rotation`.
    pub fn from_center(rotation: Matrix3<f64>, center: Vector3<f64>) -> Result<Self> {
        Self::new(rotation, -(rotation * center))
    }

    /// Camera center expressed in the reference frame.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Vector3::zeros()
    }

    #[inline]
    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Returns a description of the violated constraint, if any.
pub(crate) fn check_rotation(r: &Matrix3<f64>, tol: f64) -> std::result::Result<(), String> {
    if !r.iter().all(|x| x.is_finite()) {
        return Err("rotation has non-finite entries".into());
    }
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if err > tol {
        return Err(format!("rotation is not orthonormal (max |R^T R - I| = {err:.3e})"));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tol {
        return Err(format!("rotation determinant is {det}, expected 1"));
    }
    Ok(())
}

/// Nearest rotation in the Frobenius sense.
pub(crate) fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = u * vt;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * vt;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

/// Precomputed plane-sweep homography between two views.
///
/// For a pixel `x` of the source view with source-view disparity `d`, the
/// target pixel is the dehomogenized `H * [u, v, 1] + d * e`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairWarp {
    h: [f64; 9],
    e: [f64; 3],
    identity: bool,
}

impl PairWarp {
    fn between(from: &Camera, to: &Camera, unit_baseline: f64, identity: bool) -> Self {
        let r_from = from.extrinsics.rotation;
        let r_rel = to.extrinsics.rotation * r_from.transpose();
        let t_rel = to.extrinsics.translation - r_rel * from.extrinsics.translation;
        let k_to = to.intrinsics.matrix();
        let h = k_to * r_rel * from.intrinsics.inverse_matrix();
        let e = k_to * t_rel / (from.intrinsics.fx * unit_baseline);
        PairWarp {
            h: [h[(0, 0)], h[(0, 1)], h[(0, 2)], h[(1, 0)], h[(1, 1)], h[(1, 2)], h[(2, 0)], h[(2, 1)], h[(2, 2)]],
            e: [e.x, e.y, e.z],
            identity,
        }
    }

    /// Maps `x` at disparity `d`. `None` when the point lies on or behind
    /// the target camera's image plane.
    #[inline]
    pub fn apply(&self, x: PixelCoord, d: f64) -> Option<PixelCoord> {
        if self.identity {
            return Some(x);
        }
        let h = &self.h;
        let w = h[6] * x.u + h[7] * x.v + h[8] + d * self.e[2];
        if w <= 0.0 {
            return None;
        }
        let px = h[0] * x.u + h[1] * x.v + h[2] + d * self.e[0];
        let py = h[3] * x.u + h[4] * x.v + h[5] + d * self.e[1];
        Some(PixelCoord::new(px / w, py / w))
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }
}

/// K calibrated cameras with all poses expressed relative to the reference.
#[derive(Clone, Debug)]
pub struct CameraRig {
    cameras: Vec<Camera>,
    ref_index: usize,
    unit_baseline: f64,
    // row-major K x K table of pairwise warps
    warps: Vec<PairWarp>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>, ref_index: usize, unit_baseline: f64) -> Result<Self> {
        let k = cameras.len();
        if k < 2 {
            return Err(Error::InvalidRig(format!("need at least 2 cameras, got {k}")));
        }
        if k > MAX_CAMERAS {
            return Err(Error::InvalidRig(format!("at most {MAX_CAMERAS} cameras supported, got {k}")));
        }
        if ref_index >= k {
            return Err(Error::InvalidRig(format!("ref_index {ref_index} out of range for {k} cameras")));
        }
        if !(unit_baseline > 0.0 && unit_baseline.is_finite()) {
            return Err(Error::InvalidRig(format!("unit_baseline must be positive, got {unit_baseline}")));
        }
        for (i, cam) in cameras.iter().enumerate() {
            cam.intrinsics
                .validate()
                .map_err(|e| Error::InvalidRig(format!("camera {i}: {e}")))?;
            check_rotation(&cam.extrinsics.rotation, ROTATION_TOLERANCE)
                .map_err(|e| Error::InvalidRig(format!("camera {i}: {e}")))?;
        }
        if !cameras[ref_index].extrinsics.is_identity() {
            return Err(Error::InvalidRig(
                "reference camera must have identity rotation and zero translation".into(),
            ));
        }
        let mut warps = Vec::with_capacity(k * k);
        for from in 0..k {
            for to in 0..k {
                warps.push(PairWarp::between(&cameras[from], &cameras[to], unit_baseline, from == to));
            }
        }
        Ok(CameraRig {
            cameras,
            ref_index,
            unit_baseline,
            warps,
        })
    }

    /// Re-expresses all poses relative to camera `ref_index`.
    pub fn rebased(cameras: &[Camera], ref_index: usize, unit_baseline: f64) -> Result<Self> {
        let anchor = cameras
            .get(ref_index)
            .ok_or_else(|| Error::InvalidRig(format!("ref_index {ref_index} out of range")))?
            .extrinsics;
        let r0t = anchor.rotation.transpose();
        let rebased = cameras
            .iter()
            .enumerate()
            .map(|(i, cam)| {
                let extrinsics = if i == ref_index {
                    CameraExtrinsics::identity()
                } else {
                    let rotation = orthonormalize(&(cam.extrinsics.rotation * r0t));
                    let translation = cam.extrinsics.translation - rotation * anchor.translation;
                    CameraExtrinsics {
                        rotation,
                        translation,
                    }
                };
                Camera {
                    intrinsics: cam.intrinsics,
                    extrinsics,
                }
            })
            .collect();
        Self::new(rebased, ref_index, unit_baseline)
    }

    #[inline]
    pub fn num_cameras(&self) -> usize {
        self.cameras.len()
    }

    #[inline]
    pub fn ref_index(&self) -> usize {
        self.ref_index
    }

    #[inline]
    pub fn unit_baseline(&self) -> f64 {
        self.unit_baseline
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    #[inline]
    pub fn camera(&self, k: usize) -> &Camera {
        &self.cameras[k]
    }

    #[inline]
    pub fn reference(&self) -> &Camera {
        &self.cameras[self.ref_index]
    }

    /// `Z = fx_ref * unit_baseline / d`.
    pub fn disparity_to_depth(&self, d: f64) -> Result<f64> {
        self.disparity_to_depth_in(self.ref_index, d)
    }

    pub fn depth_to_disparity(&self, z: f64) -> Result<f64> {
        self.depth_to_disparity_in(self.ref_index, z)
    }

    /// Depth of a view-`k` disparity, measured in camera `k`'s frame.
    pub fn disparity_to_depth_in(&self, k: usize, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::NonPositiveDisparity(d));
        }
        Ok(self.cameras[k].intrinsics.fx * self.unit_baseline / d)
    }

    pub fn depth_to_disparity_in(&self, k: usize, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::NonPositiveDepth(z));
        }
        Ok(self.cameras[k].intrinsics.fx * self.unit_baseline / z)
    }

    #[inline]
    pub fn pair_warp(&self, from: usize, to: usize) -> &PairWarp {
        &self.warps[from * self.cameras.len() + to]
    }

    /// Maps a reference pixel at reference disparity `d` into view `k`.
    /// Exact identity for `k == ref_index`; `None` if the point falls on or
    /// behind camera `k`.
    #[inline]
    pub fn warp(&self, x_ref: PixelCoord, d: f64, k: usize) -> Option<PixelCoord> {
        self.pair_warp(self.ref_index, k).apply(x_ref, d)
    }

    /// Maps a view-`from` pixel with view-`from` disparity into view `to`.
    #[inline]
    pub fn warp_between(&self, from: usize, to: usize, x: PixelCoord, d: f64) -> Option<PixelCoord> {
        self.pair_warp(from, to).apply(x, d)
    }

    /// Projects a reference-frame point into view `k`.
    pub fn project(&self, k: usize, p_ref: &Vector3<f64>) -> Option<PixelCoord> {
        let cam = &self.cameras[k];
        cam.intrinsics.project(&cam.extrinsics.transform(p_ref))
    }

    /// Lifts a view-`k` pixel with view-`k` disparity to a reference-frame point.
    pub fn backproject(&self, k: usize, x: PixelCoord, d: f64) -> Result<Vector3<f64>> {
        let z = self.disparity_to_depth_in(k, d)?;
        let cam = &self.cameras[k];
        let p_cam = cam.intrinsics.unproject(x, z);
        Ok(cam.extrinsics.rotation.transpose() * (p_cam - cam.extrinsics.translation))
    }

    /// Depth of a reference-frame point in camera `k`'s frame.
    pub fn depth_in(&self, k: usize, p_ref: &Vector3<f64>) -> f64 {
        self.cameras[k].extrinsics.transform(p_ref).z
    }

    /// Camera whose center is closest to camera `k` (lowest index on ties).
    pub fn nearest_neighbor(&self, k: usize) -> usize {
        let ck = self.cameras[k].extrinsics.center();
        (0..self.cameras.len())
            .filter(|&j| j != k)
            .min_by(|&a, &b| {
                let da = (self.cameras[a].extrinsics.center() - ck).norm();
                let db = (self.cameras[b].extrinsics.center() - ck).norm();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("rig has at least two cameras")
    }

    /// Every view must share the reference dimensions for the dense stages.
    pub fn image_dims(&self) -> (usize, usize) {
        let r = &self.reference().intrinsics;
        (r.width, r.height)
    }
}

/// Rig with identical intrinsics and camera centers at `positions[k] * x̂`
/// (meters), no rotation; camera 0 must sit at the origin.
pub fn rectified_rig(intrinsics: CameraIntrinsics, positions: &[f64], unit_baseline: f64) -> Result<CameraRig> {
    let cameras = positions
        .iter()
        .map(|&b| {
            Ok(Camera {
                intrinsics,
                extrinsics: CameraExtrinsics::from_center(Matrix3::identity(), Vector3::new(b, 0.0, 0.0))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CameraRig::new(cameras, 0, unit_baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 159.5, 119.5, 320, 240).unwrap()
    }

    fn line_rig(n: usize) -> CameraRig {
        let pos: Vec<f64> = (0..n).map(|k| 0.1 * k as f64).collect();
        rectified_rig(intr(), &pos, 0.1).unwrap()
    }

    #[test]
    fn disparity_depth_examples() {
        let rig = line_rig(2);
        assert_relative_eq!(rig.disparity_to_depth(1.0).unwrap(), 10.0, epsilon = 1e-12);
        assert_relative_eq!(rig.disparity_to_depth(2.0).unwrap(), 5.0, epsilon = 1e-12);
        for d in [0.5, 1.0, 7.25] {
            let z = rig.disparity_to_depth(d).unwrap();
            assert_relative_eq!(rig.depth_to_disparity(z).unwrap(), d, epsilon = 1e-12);
        }
        let err = rig.disparity_to_depth(0.0).unwrap_err();
        assert!(err.to_string().contains("non-positive disparity has no depth"));
        assert!(rig.disparity_to_depth(-1.0).is_err());
    }

    #[test]
    fn reference_warp_is_exact_identity() {
        let rig = line_rig(3);
        let x = PixelCoord::new(12.345678901, 200.1);
        assert_eq!(rig.warp(x, 3.7, 0), Some(x));
    }

    #[test]
    fn rectified_warp_is_horizontal_shift() {
        let rig = rectified_rig(intr(), &[0.0, 0.1, 0.25], 0.1).unwrap();
        let x = PixelCoord::new(100.0, 50.0);
        let w1 = rig.warp(x, 4.0, 1).unwrap();
        assert_relative_eq!(w1.u, 100.0 - 4.0, epsilon = 1e-9);
        assert_relative_eq!(w1.v, 50.0, epsilon = 1e-9);
        let w2 = rig.warp(x, 4.0, 2).unwrap();
        assert_relative_eq!(w2.u, 100.0 - 4.0 * 2.5, epsilon = 1e-9);
    }

    #[test]
    fn behind_camera_is_out_of_frustum() {
        // camera 1 looks backwards
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), std::f64::consts::PI).into_inner();
        let cams = vec![
            Camera { intrinsics: intr(), extrinsics: CameraExtrinsics::identity() },
            Camera { intrinsics: intr(), extrinsics: CameraExtrinsics::new(r, Vector3::zeros()).unwrap() },
        ];
        let rig = CameraRig::new(cams, 0, 0.1).unwrap();
        assert_eq!(rig.warp(PixelCoord::new(160.0, 120.0), 2.0, 1), None);
    }

    #[test]
    fn in_bounds_examples() {
        let i = intr();
        assert!(is_in_bounds(PixelCoord::new(0.0, 0.0), &i, 0.0));
        assert!(!is_in_bounds(PixelCoord::new(320.0, 5.0), &i, 0.0));
        assert!(!is_in_bounds(PixelCoord::new(2.0, 2.0), &i, 3.0));
        assert!(is_in_bounds(PixelCoord::new(3.0, 3.0), &i, 3.0));
    }

    #[test]
    fn rig_validation() {
        let c = Camera { intrinsics: intr(), extrinsics: CameraExtrinsics::identity() };
        assert!(CameraRig::new(vec![c], 0, 0.1).is_err());
        assert!(CameraRig::new(vec![c, c], 2, 0.1).is_err());
        assert!(CameraRig::new(vec![c, c], 0, 0.0).is_err());
        let shifted = Camera {
            intrinsics: intr(),
            extrinsics: CameraExtrinsics::new(Matrix3::identity(), Vector3::new(0.1, 0.0, 0.0)).unwrap(),
        };
        assert!(CameraRig::new(vec![shifted, c], 0, 0.1).is_err());
        assert!(CameraIntrinsics::new(-1.0, 1.0, 0.0, 0.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 10.0, 0.0, 10, 10).is_err());
        let skew = Matrix3::new(1.0, 0.01, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraExtrinsics::new(skew, Vector3::zeros()).is_err());
    }

    #[test]
    fn nearest_neighbor_by_center_distance() {
        let rig = rectified_rig(intr(), &[0.0, 0.1, 0.15, 0.4], 0.1).unwrap();
        assert_eq!(rig.nearest_neighbor(0), 1);
        assert_eq!(rig.nearest_neighbor(1), 2);
        assert_eq!(rig.nearest_neighbor(3), 2);
    }

    #[test]
    fn rebased_rig_moves_reference() {
        let rig = line_rig(3);
        let re = CameraRig::rebased(rig.cameras(), 1, 0.1).unwrap();
        assert!(re.reference().extrinsics.is_identity());
        let c0 = re.camera(0).extrinsics.center();
        assert_relative_eq!(c0.x, -0.1, epsilon = 1e-12);
    }

    pub(crate) fn random_rig(rng: &mut ChaCha8Rng, k: usize, max_deg: f64) -> CameraRig {
        let mut cams = Vec::new();
        for i in 0..k {
            let fx = rng.random_range(200.0..600.0);
            let intr = CameraIntrinsics::new(
                fx,
                fx * rng.random_range(0.95..1.05),
                rng.random_range(300.0..340.0),
                rng.random_range(220.0..260.0),
                640,
                480,
            )
            .unwrap();
            let extrinsics = if i == 0 {
                CameraExtrinsics::identity()
            } else {
                let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let angle = rng.random_range(0.0..max_deg).to_radians();
                let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).into_inner();
                let c = Vector3::new(0.1 * i as f64 + rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
                CameraExtrinsics::from_center(r, c).unwrap()
            };
            cams.push(Camera { intrinsics: intr, extrinsics });
        }
        CameraRig::new(cams, 0, 0.1).unwrap()
    }

    #[test]
    fn warp_matches_direct_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let rig = random_rig(&mut rng, 4, 5.0);
            let p = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5), rng.random_range(2.0..30.0));
            let x_ref = rig.project(0, &p).unwrap();
            let d = rig.depth_to_disparity(p.z).unwrap();
            for k in 1..4 {
                let direct = rig.project(k, &p).unwrap();
                let warped = rig.warp(x_ref, d, k).unwrap();
                assert!((direct.u - warped.u).abs() < 1e-6 && (direct.v - warped.v).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn warp_identity_for_reference(u in -1e3f64..1e3, v in -1e3f64..1e3, d in 1e-3f64..500.0) {
            let rig = line_rig(3);
            let x = PixelCoord::new(u, v);
            prop_assert_eq!(rig.warp(x, d, 0), Some(x));
        }

        #[test]
        fn rectified_parallax_grows_with_disparity(u in 0f64..320.0, d in 0.1f64..60.0, step in 0.01f64..5.0, b in 0.01f64..1.0) {
            let rig = rectified_rig(intr(), &[0.0, b], 0.1).unwrap();
            let x = PixelCoord::new(u, 10.0);
            let near = rig.warp(x, d, 1).unwrap();
            let far = rig.warp(x, d + step, 1).unwrap();
            prop_assert!((u - far.u).abs() > (u - near.u).abs());
        }

        #[test]
        fn epipolar_locus_is_a_line(seed in 0u64..1000, u in 50f64..590.0, v in 50f64..430.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rig = random_rig(&mut rng, 2, 5.0);
            let x = PixelCoord::new(u, v);
            let pts: Vec<PixelCoord> = [0.5, 3.0, 9.0, 20.0, 40.0]
                .iter()
                .filter_map(|&d| rig.warp(x, d, 1))
                .collect();
            prop_assume!(pts.len() == 5);
            let (a, b) = (pts[0], pts[4]);
            let len = ((b.u - a.u).powi(2) + (b.v - a.v).powi(2)).sqrt();
            prop_assume!(len > 1e-3);
            for p in &pts[1..4] {
                let cross = ((b.u - a.u) * (p.v - a.v) - (b.v - a.v) * (p.u - a.u)) / len;
                prop_assert!(cross.abs() < 1e-6, "off-line by {}", cross);
            }
        }
    }
}
