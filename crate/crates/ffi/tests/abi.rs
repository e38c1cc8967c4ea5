//! Drives the C ABI from Rust exactly as a C caller would.

use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use lfstatic::geometry::write_calibration;
use lfstatic::pipeline::{self, RunConfig};
use lfstatic::synth::{self, presets, SynthScene};
use lfstatic_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(lf_last_error_message()) }.to_string_lossy().into_owned()
}

fn small_scene() -> SynthScene {
    synth::generate(&presets::occluder(96, 72, 0.25)).unwrap()
}

fn rig_of(scene: &SynthScene) -> *mut LfRig {
    let text = CString::new(write_calibration(&scene.rig)).unwrap();
    let mut rig = ptr::null_mut();
    assert_eq!(unsafe { lf_rig_parse(text.as_ptr(), -1, &mut rig) }, LfStatus::Ok, "{}", last_error());
    assert!(!rig.is_null());
    rig
}

fn frame_of(rig: *const LfRig, scene: &SynthScene) -> *mut LfFrame {
    let mut frame = ptr::null_mut();
    unsafe {
        assert_eq!(lf_frame_new(rig, &mut frame), LfStatus::Ok);
        for (k, view) in scene.frame.views().iter().enumerate() {
            let bytes: Vec<u8> = view.as_slice().iter().flatten().copied().collect();
            assert_eq!(lf_frame_set_view(frame, k as u32, bytes.as_ptr(), bytes.len()), LfStatus::Ok);
        }
        for (k, p) in scene.priors.maps().iter().enumerate() {
            let s = p.as_slice();
            assert_eq!(lf_frame_set_prior(frame, k as u32, s.as_ptr(), s.len()), LfStatus::Ok);
        }
    }
    frame
}

#[test]
fn reconstruction_matches_the_library() {
    let scene = small_scene();
    let rig = rig_of(&scene);
    let frame = frame_of(rig, &scene);
    let mut params = unsafe { std::mem::zeroed::<LfParams>() };
    let mut result = ptr::null_mut();
    unsafe {
        assert_eq!(lf_params_default(&mut params), LfStatus::Ok);
        params.threads = 1;
        assert_eq!(lf_reconstruct(rig, frame, &params, &mut result), LfStatus::Ok, "{}", last_error());
    }
    let (mut w, mut h) = (0u32, 0u32);
    assert_eq!(unsafe { lf_result_size(result, &mut w, &mut h) }, LfStatus::Ok);
    assert_eq!((w, h), (96, 72));
    let n = (w * h) as usize;

    let mut disparity = vec![0.0f64; n];
    let mut color = vec![0u8; n * 3];
    let mut codes = vec![0u8; n];
    let mut masks = vec![0u16; n];
    let (mut iterations, mut converged, mut support) = (0u32, 0u8, 0u32);
    unsafe {
        assert_eq!(lf_result_disparity(result, disparity.as_mut_ptr(), n), LfStatus::Ok);
        assert_eq!(lf_result_refocused(result, color.as_mut_ptr(), n * 3), LfStatus::Ok);
        assert_eq!(lf_result_provenance(result, codes.as_mut_ptr(), n), LfStatus::Ok);
        assert_eq!(lf_result_ray_masks(result, masks.as_mut_ptr(), n), LfStatus::Ok);
        assert_eq!(lf_result_iterations(result, &mut iterations, &mut converged), LfStatus::Ok);
        assert_eq!(lf_result_support_count(result, &mut support), LfStatus::Ok);
    }

    let cfg = RunConfig::default();
    let direct = pipeline::reconstruct(&scene.rig, &scene.frame, &scene.priors, &cfg.params()).unwrap();
    assert_eq!(disparity, direct.disparity.disparity.as_slice());
    let direct_color: Vec<u8> = direct.refocused.color.as_slice().iter().flatten().copied().collect();
    assert_eq!(color, direct_color);
    assert_eq!(codes, direct.refocused.provenance_map().as_slice());
    for (i, &m) in masks.iter().enumerate() {
        assert_eq!(m & 0xff, direct.segmentation.static_mask.as_slice()[i] as u16);
        assert_eq!(m >> 8, direct.segmentation.valid_mask.as_slice()[i] as u16);
    }
    assert_eq!(iterations as usize, direct.report.iterations);
    assert_eq!(converged != 0, direct.report.converged);
    assert_eq!(support as usize, direct.support.len());

    unsafe {
        lf_result_free(result);
        lf_frame_free(frame);
        lf_rig_free(rig);
    }
}

#[test]
fn rig_queries_and_warp() {
    let scene = small_scene();
    let rig = rig_of(&scene);
    let (mut k, mut r, mut w, mut h) = (0u32, 0u32, 0u32, 0u32);
    let (mut u, mut v, mut visible) = (0.0, 0.0, 0u8);
    unsafe {
        assert_eq!(lf_rig_num_cameras(rig, &mut k), LfStatus::Ok);
        assert_eq!(lf_rig_ref_index(rig, &mut r), LfStatus::Ok);
        assert_eq!(lf_rig_image_size(rig, &mut w, &mut h), LfStatus::Ok);
        assert_eq!((k, r, w, h), (5, 0, 96, 72));
        // camera 2 sits two baselines to the right: a rectified shift of 2d
        assert_eq!(lf_rig_warp(rig, 40.0, 30.0, 3.0, 2, &mut u, &mut v, &mut visible), LfStatus::Ok);
        assert_eq!(visible, 1);
        assert!((u - 34.0).abs() < 1e-9 && (v - 30.0).abs() < 1e-9, "({u}, {v})");
        assert_eq!(lf_rig_warp(rig, 40.0, 30.0, 3.0, 5, &mut u, &mut v, &mut visible), LfStatus::InvalidArgument);
        assert!(last_error().contains("camera 5"));
        lf_rig_free(rig);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let scene = small_scene();
    let rig = rig_of(&scene);
    let frame = frame_of(rig, &scene);
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(lf_rig_num_cameras(ptr::null(), &mut 0), LfStatus::NullPointer);
        assert!(last_error().contains("rig is null"));

        let missing = CString::new("/nonexistent/calib.toml").unwrap();
        assert_eq!(lf_rig_load(missing.as_ptr(), -1, &mut out), LfStatus::Io);
        assert!(out.is_null());
        assert!(last_error().contains("calib.toml"));

        let bad = CString::new("this is not = = toml").unwrap();
        assert_eq!(lf_rig_parse(bad.as_ptr(), -1, &mut out), LfStatus::Calibration);

        let short = [0u8; 30];
        assert_eq!(lf_frame_set_view(frame, 1, short.as_ptr(), short.len()), LfStatus::SizeMismatch);
        assert!(last_error().contains("view 1"), "{}", last_error());

        let prior = vec![1.5f32; 96 * 72];
        assert_eq!(lf_frame_set_prior(frame, 0, prior.as_ptr(), prior.len()), LfStatus::InvalidArgument);
        assert_eq!(lf_frame_set_prior(frame, 9, prior.as_ptr(), prior.len()), LfStatus::InvalidArgument);

        let mut params = std::mem::zeroed::<LfParams>();
        lf_params_default(&mut params);
        params.sigma = -1.0;
        let mut result = ptr::null_mut();
        assert_eq!(lf_reconstruct(rig, frame, &params, &mut result), LfStatus::InvalidArgument);
        assert!(result.is_null());
        assert!(!last_error().is_empty());

        lf_params_default(&mut params);
        params.threads = 1;
        assert_eq!(lf_reconstruct(rig, frame, &params, &mut result), LfStatus::Ok);
        assert!(last_error().is_empty());
        let mut small = vec![0.0f64; 10];
        assert_eq!(lf_result_disparity(result, small.as_mut_ptr(), small.len()), LfStatus::SizeMismatch);

        lf_result_free(result);
        lf_frame_free(frame);
        lf_rig_free(rig);
        lf_rig_free(ptr::null_mut());
        lf_frame_free(ptr::null_mut());
        lf_result_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::TempDir::new().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"lfstatic.h\"\n\
         int main(void) {\n\
           LfParams p;\n\
           LfRig *rig = 0;\n\
           LfStatus s = LF_STATUS_OK;\n\
           (void)p; (void)rig; (void)s;\n\
           return (int)LF_STATUS_PANIC - 7;\n\
         }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("skipping C compile check: no C compiler ({e})");
            return;
        }
    };
    assert!(status.success());
}
