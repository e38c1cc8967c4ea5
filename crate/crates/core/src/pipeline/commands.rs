//! The `reconstruct`, `synth` and `evaluate` commands, working on files.
//!
//! A dataset directory (as written by `synth`) holds
//! `calib.toml`, `frames/view_{k}.ppm`, `priors/prior_{k}.pgm` and, for
//! synthetic data, `scene.toml` plus `truth/`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::eval::{disparity_errors, refocus_errors, segmentation_accuracy, EvalReport};
use super::io::{self, mask_file, prior_file, view_file};
use super::{reconstruct, with_threads, Reconstruction, RunConfig};
use crate::error::{Error, Result};
use crate::frame::LightFieldFrame;
use crate::geometry::{read_calibration, write_calibration, CameraRig};
use crate::raster::Plane;
use crate::refocus::Provenance;
use crate::solver::{SegmentationPriorMaps, SegmentationState};
use crate::synth::{self, SceneSpec};

pub const CALIB_FILE: &str = "calib.toml";
pub const SCENE_FILE: &str = "scene.toml";
pub const FRAMES_DIR: &str = "frames";
pub const PRIORS_DIR: &str = "priors";
pub const TRUTH_DIR: &str = "truth";

/// Command-line overrides for `reconstruct`; unset fields fall back to the
/// config file, then to defaults.
#[derive(Clone, Debug, Default)]
pub struct ReconstructArgs {
    pub config: Option<PathBuf>,
    pub calib: Option<PathBuf>,
    pub frames: Option<PathBuf>,
    pub priors: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub ref_index: Option<usize>,
    pub dynamic_only: bool,
    pub threads: Option<usize>,
    /// Also write the triangulation mesh.
    pub debug: bool,
}

impl ReconstructArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) if !p.exists() => return Err(Error::MissingArtifact(p.clone())),
            Some(p) => RunConfig::read(p)?,
            None => RunConfig::default(),
        };
        let pick = |flag: &Option<PathBuf>, file: &mut Option<PathBuf>| {
            if flag.is_some() {
                *file = flag.clone();
            }
        };
        pick(&self.calib, &mut cfg.calib);
        pick(&self.frames, &mut cfg.frames);
        pick(&self.priors, &mut cfg.priors);
        pick(&self.out, &mut cfg.out);
        cfg.ref_index = self.ref_index.or(cfg.ref_index);
        cfg.dynamic_only |= self.dynamic_only;
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        for (name, v) in [("calib", &cfg.calib), ("frames", &cfg.frames), ("priors", &cfg.priors), ("out", &cfg.out)] {
            if v.is_none() {
                return Err(Error::InvalidParams(format!("no {name} path given")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SynthArgs {
    pub scene: Option<PathBuf>,
    /// Name from `synth::presets::NAMES`, used when no scene file is given.
    pub preset: Option<String>,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

pub fn load_frame(dir: &Path, num_views: usize) -> Result<LightFieldFrame> {
    let views = (0..num_views)
        .map(|k| io::read_rgb(&dir.join(view_file(k))))
        .collect::<Result<Vec<_>>>()?;
    LightFieldFrame::new(views)
}

pub fn load_priors(dir: &Path, num_views: usize) -> Result<SegmentationPriorMaps> {
    let maps = (0..num_views)
        .map(|k| io::read_prior(&dir.join(prior_file(k))))
        .collect::<Result<Vec<_>>>()?;
    SegmentationPriorMaps::new(maps)
}

/// Reads the inputs named by `cfg`, reconstructs and writes every artifact
/// into `cfg.out`.
pub fn cmd_reconstruct(cfg: &RunConfig, debug: bool) -> Result<Reconstruction> {
    cfg.validate()?;
    let need = |p: &Option<PathBuf>, name: &str| {
        p.clone()
            .ok_or_else(|| Error::InvalidParams(format!("no {name} path given")))
    };
    let (calib, frames, priors, out) = (
        need(&cfg.calib, "calib")?,
        need(&cfg.frames, "frames")?,
        need(&cfg.priors, "priors")?,
        need(&cfg.out, "out")?,
    );
    let rig = read_calibration(&calib, cfg.ref_index)?;
    let frame = load_frame(&frames, rig.num_cameras())?;
    frame.check_rig(&rig)?;
    let priors = load_priors(&priors, rig.num_cameras())?;
    priors.check_rig(&rig)?;

    let params = cfg.params();
    let rec = with_threads(cfg.threads, || reconstruct(&rig, &frame, &priors, &params))??;
    write_reconstruction(&out, &rig, &rec, debug)?;
    Ok(rec)
}

/// 16-bit per-pixel ray labels: high byte valid mask, low byte static mask,
/// bit k for view k.
pub fn pack_ray_masks(seg: &SegmentationState) -> Plane<u16> {
    let (w, h) = seg.dims();
    Plane::from_fn(w, h, |x, y| (seg.valid_rays(x, y) as u16) << 8 | seg.static_rays(x, y) as u16)
}

/// Fraction of valid rays labelled static, scaled to 0..255 (0 where no ray
/// is valid).
pub fn segmentation_image(seg: &SegmentationState) -> Plane<u8> {
    let (w, h) = seg.dims();
    Plane::from_fn(w, h, |x, y| {
        let valid = seg.valid_rays(x, y);
        let n = valid.count_ones();
        if n == 0 {
            0
        } else {
            let s = (seg.static_rays(x, y) & valid).count_ones();
            ((s * 255) as f64 / n as f64).round() as u8
        }
    })
}

pub fn write_reconstruction(out: &Path, rig: &CameraRig, rec: &Reconstruction, debug: bool) -> Result<()> {
    io::ensure_dir(out)?;
    io::write_disparity(out, "disparity", &rec.disparity.disparity)?;
    io::write_ppm(&out.join("refocused.ppm"), &rec.refocused.color)?;
    io::write_pgm(&out.join("provenance.pgm"), &rec.refocused.provenance_map())?;
    io::write_pgm(&out.join("segmentation.pgm"), &segmentation_image(&rec.segmentation))?;
    io::write_pgm16(&out.join("ray_masks.pgm"), &pack_ray_masks(&rec.segmentation))?;

    let t = &rec.timings;
    let mut timing = String::new();
    for (k, v) in [
        ("features", t.features),
        ("support", t.support),
        ("triangulation", t.triangulation),
        ("solver", t.solver),
        ("refocus", t.refocus),
        ("total", t.total()),
    ] {
        let _ = writeln!(timing, "{k}={v:.6}");
    }
    io::write_text(&out.join("timing.txt"), &timing)?;

    let r = &rec.report;
    let mut report = String::new();
    let _ = writeln!(report, "reference_view={}", rig.ref_index());
    let _ = writeln!(report, "support_points={}", rec.support.len());
    let _ = writeln!(report, "triangles={}", rec.triangulation.triangles().len());
    let _ = writeln!(report, "iterations={}", r.iterations);
    let _ = writeln!(report, "converged={}", r.converged);
    let _ = writeln!(report, "solved_pixels={}", r.solved_pixels);
    for (i, s) in r.per_iteration.iter().enumerate() {
        if let Some(e) = s.energy_before {
            let _ = writeln!(report, "energy_before_{}={e:.9}", i + 1);
        }
        let _ = writeln!(report, "energy_after_{}={:.9}", i + 1, s.energy_after);
        let _ = writeln!(report, "descent_violations_{}={}", i + 1, s.descent_violations);
        let _ = writeln!(report, "relabeled_rays_{}={}", i + 1, s.relabeled_rays);
    }
    let fallback = rec.refocused.count(|p| p == Provenance::Fallback);
    let invalid = rec.refocused.count(|p| p == Provenance::Invalid);
    let _ = writeln!(report, "fallback_pixels={fallback}");
    let _ = writeln!(report, "invalid_pixels={invalid}");
    io::write_text(&out.join("report.txt"), &report)?;

    let mut csv = String::from("u,v,d,source_view\n");
    for p in &rec.support {
        let _ = writeln!(csv, "{},{},{:.6},{}", p.u, p.v, p.d, p.source_view);
    }
    io::write_text(&out.join("support.csv"), &csv)?;
    if debug {
        io::write_text(&out.join("triangulation.obj"), &rec.triangulation.to_obj())?;
    }
    Ok(())
}

/// Renders a scene (file, preset or the default two-plane preset) into a
/// dataset directory. Returns the scene actually rendered.
pub fn cmd_synth(args: &SynthArgs) -> Result<SceneSpec> {
    let mut spec = match (&args.scene, &args.preset) {
        (Some(p), _) => SceneSpec::from_toml(&io::read_text(p)?)?,
        (None, Some(name)) => synth::presets::by_name(name).ok_or_else(|| {
            Error::InvalidParams(format!(
                "unknown preset {name:?} (known: {})",
                synth::presets::NAMES.join(", ")
            ))
        })?,
        (None, None) => synth::presets::by_name("two-plane").expect("built-in preset"),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let scene = synth::generate(&spec)?;
    write_dataset(&args.out, &spec, &scene)?;
    Ok(spec)
}

pub fn write_dataset(out: &Path, spec: &SceneSpec, scene: &synth::SynthScene) -> Result<()> {
    let frames = io::ensure_dir(&out.join(FRAMES_DIR))?;
    let priors = io::ensure_dir(&out.join(PRIORS_DIR))?;
    let truth = io::ensure_dir(&out.join(TRUTH_DIR))?;
    io::write_text(&out.join(CALIB_FILE), &write_calibration(&scene.rig))?;
    io::write_text(&out.join(SCENE_FILE), &spec.to_toml())?;
    for (k, view) in scene.frame.views().iter().enumerate() {
        io::write_ppm(&frames.join(view_file(k)), view)?;
    }
    for (k, p) in scene.priors.maps().iter().enumerate() {
        io::write_pgm(&priors.join(prior_file(k)), &io::prior_to_gray(p))?;
    }
    let gt = &scene.truth;
    io::write_disparity(&truth, "disparity", &gt.disparity)?;
    io::write_ppm(&truth.join("background.ppm"), &gt.background)?;
    io::write_pgm(&truth.join("textured.pgm"), &gt.textured.map(|&t| if t { 255 } else { 0 }))?;
    for (k, m) in gt.masks.iter().enumerate() {
        io::write_pgm(&truth.join(mask_file(k)), &m.map(|&o| if o { 255 } else { 0 }))?;
    }
    Ok(())
}

fn read_mask(path: &Path) -> Result<Plane<bool>> {
    Ok(io::read_gray(path)?.map(|&v| v >= 128))
}

/// Scores a `reconstruct` output directory against a `synth` dataset.
///
/// Disparity is scored over textured ground-truth pixels. Refocusing is
/// scored where the provenance code is 255 and the ray-mask file shows at
/// least `min_static_rays` static rays. Segmentation accuracy needs the
/// dataset's priors and masks plus the predicted ray masks; it is skipped
/// when any of them is absent.
pub fn cmd_evaluate(pred: &Path, dataset: &Path, cfg: &RunConfig) -> Result<EvalReport> {
    let truth_dir = dataset.join(TRUTH_DIR);
    let truth_d = io::read_disparity(&truth_dir.join("disparity.pgm"))?;
    let textured = read_mask(&truth_dir.join("textured.pgm"))?;
    let pred_d = io::read_disparity(&pred.join("disparity.pgm"))?;
    let mut report = EvalReport {
        disparity: disparity_errors(&pred_d, &truth_d, Some(&textured))?,
        ..EvalReport::default()
    };

    let ray_masks_path = pred.join("ray_masks.pgm");
    let ray_masks = if ray_masks_path.exists() {
        let m = io::read_gray16(&ray_masks_path)?;
        check_dims("ray masks", m.dims(), truth_d.dims())?;
        Some(m)
    } else {
        None
    };

    let refocused_path = pred.join("refocused.ppm");
    let background_path = truth_dir.join("background.ppm");
    if refocused_path.exists() && background_path.exists() {
        let img = io::read_rgb(&refocused_path)?;
        let codes = io::read_gray(&pred.join("provenance.pgm"))?;
        check_dims("provenance", codes.dims(), img.dims())?;
        let provenance = Plane::from_fn(codes.width(), codes.height(), |x, y| match *codes.get(x, y) {
            0 => Provenance::Invalid,
            128 => Provenance::Fallback,
            _ => {
                let rays = ray_masks.as_ref().map_or(u8::MAX as u32, |m| {
                    let v = *m.get(x, y);
                    ((v >> 8) & v & 0xff).count_ones()
                });
                Provenance::Refocused(rays as u8)
            }
        });
        let truth = io::read_rgb(&background_path)?;
        report.refocus = Some(refocus_errors(&img, &provenance, &truth, cfg.min_static_rays, None)?);
    }

    let calib = dataset.join(CALIB_FILE);
    let priors_dir = dataset.join(PRIORS_DIR);
    if let (Some(m), true, true) = (&ray_masks, calib.exists(), priors_dir.exists()) {
        let rig = read_calibration(&calib, cfg.ref_index)?;
        let priors = load_priors(&priors_dir, rig.num_cameras())?;
        let masks = (0..rig.num_cameras())
            .map(|k| read_mask(&truth_dir.join(mask_file(k))))
            .collect::<Result<Vec<_>>>()?;
        let seg = SegmentationState {
            static_mask: m.map(|&v| v as u8),
            valid_mask: m.map(|&v| (v >> 8) as u8),
        };
        report.segmentation = Some(segmentation_accuracy(
            &rig,
            &pred_d,
            &seg,
            &priors,
            cfg.threshold,
            &masks,
        )?);
    }

    let read_kv = |name: &str| -> Result<Vec<(String, String)>> {
        let p = pred.join(name);
        if p.exists() {
            Ok(io::parse_key_values(&io::read_text(&p)?))
        } else {
            Ok(Vec::new())
        }
    };
    report.iterations = read_kv("report.txt")?
        .into_iter()
        .find(|(k, _)| k == "iterations")
        .and_then(|(_, v)| v.parse().ok());
    report.timings = read_kv("timing.txt")?
        .into_iter()
        .filter_map(|(k, v)| Some((k, v.parse::<f64>().ok()?)))
        .collect();
    Ok(report)
}

fn check_dims(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::SizeMismatch {
            what: what.into(),
            expected: format!("{}x{}", b.0, b.1),
            found: format!("{}x{}", a.0, a.1),
        });
    }
    Ok(())
}

/// Process exit status for an error: 1 for I/O failures, 2 for invalid
/// input or configuration.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Image { .. } => 1,
        _ => 2,
    }
}
