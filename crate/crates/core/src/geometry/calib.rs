//! Calibration file reader/writer.
//!
//! ```toml
//! ref_index = 0
//! unit_baseline = 0.1
//!
//! [[camera]]
//! fx = 300.0
//! fy = 300.0
//! cx = 159.5
//! cy = 119.5
//! width = 320
//! height = 240
//! rotation = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]  # row-major, reference-to-camera
//! translation = [0.0, 0.0, 0.0]                               # meters
//! ```
//!
//! Rotations must be orthonormal within 1e-6; accepted rotations are snapped
//! to the nearest proper rotation. Poses need not be relative to the chosen
//! reference; they are re-expressed relative to `ref_index` on load.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;
use toml::Spanned;

use super::{check_rotation, orthonormalize, Camera, CameraExtrinsics, CameraIntrinsics, CameraRig};
use crate::error::{Error, Result};

const PARSE_ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibFile {
    ref_index: Spanned<usize>,
    unit_baseline: Spanned<f64>,
    camera: Vec<Spanned<CameraRecord>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRecord {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    rotation: Spanned<Vec<f64>>,
    translation: Spanned<Vec<f64>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses calibration text. `ref_override` replaces the file's `ref_index`.
pub fn parse_calibration(text: &str, ref_override: Option<usize>) -> Result<CameraRig> {
    let file: CalibFile = toml::from_str(text).map_err(|e| Error::Calibration {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    let at = |span: std::ops::Range<usize>, message: String| Error::Calibration {
        line: line_of(text, span.start),
        message,
    };

    let mut cameras = Vec::with_capacity(file.camera.len());
    for (i, rec) in file.camera.iter().enumerate() {
        let span = rec.span();
        let rec = rec.get_ref();
        let intrinsics = CameraIntrinsics::new(rec.fx, rec.fy, rec.cx, rec.cy, rec.width, rec.height)
            .map_err(|e| at(span.clone(), format!("camera {i}: {e}")))?;
        let rot = rec.rotation.get_ref();
        if rot.len() != 9 {
            return Err(at(
                rec.rotation.span(),
                format!("camera {i}: rotation needs 9 entries, got {}", rot.len()),
            ));
        }
        let rotation = Matrix3::from_row_slice(rot);
        check_rotation(&rotation, PARSE_ROTATION_TOLERANCE)
            .map_err(|m| at(rec.rotation.span(), format!("camera {i}: {m}")))?;
        let t = rec.translation.get_ref();
        if t.len() != 3 || !t.iter().all(|x| x.is_finite()) {
            return Err(at(
                rec.translation.span(),
                format!("camera {i}: translation needs 3 finite entries"),
            ));
        }
        cameras.push(Camera {
            intrinsics,
            extrinsics: CameraExtrinsics {
                rotation: orthonormalize(&rotation),
                translation: Vector3::new(t[0], t[1], t[2]),
            },
        });
    }

    let ref_index = ref_override.unwrap_or(*file.ref_index.get_ref());
    if ref_index >= cameras.len() {
        return Err(at(
            file.ref_index.span(),
            format!("ref_index {ref_index} out of range for {} cameras", cameras.len()),
        ));
    }
    let unit_baseline = *file.unit_baseline.get_ref();
    CameraRig::rebased(&cameras, ref_index, unit_baseline).map_err(|e| match e {
        Error::InvalidRig(m) => at(file.unit_baseline.span(), m),
        other => other,
    })
}

pub fn read_calibration(path: &Path, ref_override: Option<usize>) -> Result<CameraRig> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_owned()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration(&text, ref_override)
}

/// Serializes a rig; floats use the shortest round-trip representation.
pub fn write_calibration(rig: &CameraRig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ref_index = {}", rig.ref_index());
    let _ = writeln!(s, "unit_baseline = {:?}", rig.unit_baseline());
    for cam in rig.cameras() {
        let i = &cam.intrinsics;
        let r = &cam.extrinsics.rotation;
        let t = &cam.extrinsics.translation;
        let _ = writeln!(s, "\n[[camera]]");
        let _ = writeln!(s, "fx = {:?}\nfy = {:?}\ncx = {:?}\ncy = {:?}", i.fx, i.fy, i.cx, i.cy);
        let _ = writeln!(s, "width = {}\nheight = {}", i.width, i.height);
        let rows: Vec<String> = (0..3)
            .flat_map(|row| (0..3).map(move |col| (row, col)))
            .map(|(row, col)| format!("{:?}", r[(row, col)]))
            .collect();
        let _ = writeln!(s, "rotation = [{}]", rows.join(", "));
        let _ = writeln!(s, "translation = [{:?}, {:?}, {:?}]", t.x, t.y, t.z);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rectified_rig;

    const GOOD: &str = r#"ref_index = 0
unit_baseline = 0.1

[[camera]]
fx = 300.0
fy = 300.0
cx = 159.5
cy = 119.5
width = 320
height = 240
rotation = [1, 0, 0, 0, 1, 0, 0, 0, 1]
translation = [0.0, 0.0, 0.0]

[[camera]]
fx = 300.0
fy = 300.0
cx = 159.5
cy = 119.5
width = 320
height = 240
rotation = [1, 0, 0, 0, 1, 0, 0, 0, 1]
translation = [-0.1, 0.0, 0.0]
"#;

    #[test]
    fn parses_and_round_trips() {
        let rig = parse_calibration(GOOD, None).unwrap();
        assert_eq!(rig.num_cameras(), 2);
        assert_eq!(rig.camera(1).extrinsics.center().x, 0.1);
        let again = parse_calibration(&write_calibration(&rig), None).unwrap();
        assert_eq!(again.cameras(), rig.cameras());
    }

    #[test]
    fn rejects_skewed_rotation_with_line_number() {
        let bad = GOOD.replacen(
            "rotation = [1, 0, 0, 0, 1, 0, 0, 0, 1]\ntranslation = [-0.1",
            "rotation = [1, 0.01, 0, 0, 1, 0, 0, 0, 1]\ntranslation = [-0.1",
            1,
        );
        match parse_calibration(&bad, None) {
            Err(Error::Calibration { line, message }) => {
                assert_eq!(line, 21, "{message}");
                assert!(message.contains("orthonormal"));
            }
            other => panic!("expected calibration error, got {other:?}"),
        }
    }

    #[test]
    fn tolerates_tiny_rotation_noise() {
        let noisy = GOOD.replacen("rotation = [1, 0, 0,", "rotation = [1, 0.0000001, 0,", 1);
        let rig = parse_calibration(&noisy, None).unwrap();
        assert!(check_rotation(&rig.camera(0).extrinsics.rotation, 1e-9).is_ok());
    }

    #[test]
    fn reports_missing_field_and_bad_ref() {
        let missing = GOOD.replace("fy = 300.0\n", "");
        assert!(matches!(parse_calibration(&missing, None), Err(Error::Calibration { .. })));
        let bad_ref = GOOD.replace("ref_index = 0", "ref_index = 5");
        match parse_calibration(&bad_ref, None) {
            Err(Error::Calibration { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ref_override_rebases() {
        let rig = parse_calibration(GOOD, Some(1)).unwrap();
        assert_eq!(rig.ref_index(), 1);
        assert!(rig.reference().extrinsics.is_identity());
        assert!((rig.camera(0).extrinsics.center().x + 0.1).abs() < 1e-12);
    }

    #[test]
    fn writer_output_is_stable() {
        let intr = CameraIntrinsics::new(300.0, 300.0, 159.5, 119.5, 320, 240).unwrap();
        let rig = rectified_rig(intr, &[0.0, 0.1], 0.1).unwrap();
        assert_eq!(write_calibration(&rig), write_calibration(&rig.clone()));
        assert!(write_calibration(&rig).starts_with("ref_index = 0\nunit_baseline = 0.1\n"));
    }
}
