use crate::error::{Error, Result};
use crate::features::{compute_descriptors, DescriptorMap};
use crate::geometry::{CameraRig, MAX_CAMERAS};
use crate::raster::{rgb_to_gray, GrayImage, RgbImage};

/// One synchronized capture: a color image per camera, in rig order.
#[derive(Clone, Debug, PartialEq)]
pub struct LightFieldFrame {
    views: Vec<RgbImage>,
}

impl LightFieldFrame {
    pub fn new(views: Vec<RgbImage>) -> Result<Self> {
        if views.is_empty() || views.len() > MAX_CAMERAS {
            return Err(Error::InvalidParams(format!(
                "a frame needs 1 to {MAX_CAMERAS} views, got {}",
                views.len()
            )));
        }
        let (w, h) = views[0].dims();
        for (k, v) in views.iter().enumerate().skip(1) {
            if v.dims() != (w, h) {
                return Err(Error::SizeMismatch {
                    what: format!("view {k}"),
                    expected: format!("{w}x{h}"),
                    found: format!("{}x{}", v.width(), v.height()),
                });
            }
        }
        Ok(LightFieldFrame { views })
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[RgbImage] {
        &self.views
    }

    pub fn view(&self, k: usize) -> &RgbImage {
        &self.views[k]
    }

    pub fn dims(&self) -> (usize, usize) {
        self.views[0].dims()
    }

    pub fn gray(&self, k: usize) -> GrayImage {
        rgb_to_gray(&self.views[k])
    }

    /// Checks view count and per-view size against the calibration.
    pub fn check_rig(&self, rig: &CameraRig) -> Result<()> {
        if self.num_views() != rig.num_cameras() {
            return Err(Error::SizeMismatch {
                what: "view count".into(),
                expected: rig.num_cameras().to_string(),
                found: self.num_views().to_string(),
            });
        }
        for (k, v) in self.views.iter().enumerate() {
            let intr = &rig.camera(k).intrinsics;
            if v.dims() != (intr.width, intr.height) {
                return Err(Error::SizeMismatch {
                    what: format!("view {k}"),
                    expected: format!("{}x{}", intr.width, intr.height),
                    found: format!("{}x{}", v.width(), v.height()),
                });
            }
        }
        Ok(())
    }

    pub fn descriptors(&self) -> Result<Vec<DescriptorMap>> {
        (0..self.num_views()).map(|k| compute_descriptors(&self.gray(k))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rectified_rig, CameraIntrinsics};
    use crate::raster::Plane;

    #[test]
    fn size_mismatch_names_the_view() {
        let a = Plane::new(10, 8, [0u8; 3]);
        let b = Plane::new(10, 9, [0u8; 3]);
        let err = LightFieldFrame::new(vec![a.clone(), a.clone(), b]).unwrap_err();
        assert!(err.to_string().starts_with("view 2:"), "{err}");
        assert!(LightFieldFrame::new(vec![]).is_err());
    }

    #[test]
    fn rig_check() {
        let intr = CameraIntrinsics::new(10.0, 10.0, 5.0, 4.0, 10, 8).unwrap();
        let rig = rectified_rig(intr, &[0.0, 1.0], 1.0).unwrap();
        let img = Plane::new(10, 8, [0u8; 3]);
        assert!(LightFieldFrame::new(vec![img.clone(), img.clone()]).unwrap().check_rig(&rig).is_ok());
        let three = LightFieldFrame::new(vec![img.clone(), img.clone(), img]).unwrap();
        assert!(three.check_rig(&rig).is_err());
    }
}
