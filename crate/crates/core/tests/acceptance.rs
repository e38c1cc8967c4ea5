//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lfstatic::features::{compute_descriptors, DescriptorMap, Feature, DESCRIPTOR_LEN};
use lfstatic::geometry::{rectified_rig, Camera, CameraExtrinsics, CameraIntrinsics, CameraRig, PixelCoord};
use lfstatic::pipeline::eval::{disparity_errors, refocus_errors, segmentation_accuracy};
use lfstatic::pipeline::{self, ReconstructParams, Reconstruction};
use lfstatic::prior::{self, SupportPoint};
use lfstatic::raster::Plane;
use lfstatic::solver::{e_step, SegmentationPriorMaps, SolverInputs, SolverParams, VARIANCE_PENALTY};
use lfstatic::synth::{self, presets, SynthScene};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- geometry

fn random_rig(rng: &mut ChaCha8Rng) -> CameraRig {
    let (w, h) = (640, 480);
    let cams = (0..5)
        .map(|k| {
            let fx = rng.random_range(200.0..800.0);
            let intr = CameraIntrinsics::new(
                fx,
                fx * rng.random_range(0.95..1.05),
                rng.random_range(300.0..340.0),
                rng.random_range(220.0..260.0),
                w,
                h,
            )
            .unwrap();
            let extr = if k == 0 {
                CameraExtrinsics::identity()
            } else {
                let axis = Unit::new_normalize(Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0f64),
                ));
                let angle = rng.random_range(0.0..5.0f64).to_radians();
                let t = Vector3::new(
                    -0.1 * k as f64 + rng.random_range(-0.02..0.02),
                    rng.random_range(-0.02..0.02),
                    rng.random_range(-0.02..0.02),
                );
                CameraExtrinsics::new(*Rotation3::from_axis_angle(&axis, angle).matrix(), t).unwrap()
            };
            Camera {
                intrinsics: intr,
                extrinsics: extr,
            }
        })
        .collect();
    CameraRig::new(cams, 0, 0.1).unwrap()
}

/// Pinhole projection written out by hand.
fn pinhole(c: &Camera, p: &Vector3<f64>) -> Option<(f64, f64)> {
    let r: &Matrix3<f64> = &c.extrinsics.rotation;
    let q = r * p + c.extrinsics.translation;
    (q.z > 0.0).then(|| {
        (
            c.intrinsics.fx * q.x / q.z + c.intrinsics.cx,
            c.intrinsics.fy * q.y / q.z + c.intrinsics.cy,
        )
    })
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut mismatched_visibility = 0;
    for _ in 0..1000 {
        let rig = random_rig(&mut rng);
        let r = rig.reference();
        let z = rng.random_range(1.0..20.0);
        let u = rng.random_range(0.0..640.0);
        let v = rng.random_range(0.0..480.0);
        let p = Vector3::new((u - r.intrinsics.cx) / r.intrinsics.fx * z, (v - r.intrinsics.cy) / r.intrinsics.fy * z, z);
        let (u0, v0) = pinhole(r, &p).unwrap();
        let d = r.intrinsics.fx * rig.unit_baseline() / z;
        for k in 0..rig.num_cameras() {
            let direct = pinhole(rig.camera(k), &p);
            let warped = rig.warp(PixelCoord::new(u0, v0), d, k);
            match (direct, warped) {
                (Some(a), Some(b)) => {
                    worst = worst.max((a.0 - b.u).abs()).max((a.1 - b.v).abs());
                    checked += 1;
                }
                (None, None) => {}
                _ => mismatched_visibility += 1,
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && mismatched_visibility == 0 && secs < 1.0,
        format!("{checked} projections, max error {worst:.2e} px, {secs:.3}s"),
    )
}

// ---------------------------------------------------------------- delaunay

fn incircle_i128(a: [i64; 2], b: [i64; 2], c: [i64; 2], d: [i64; 2]) -> i128 {
    let row = |p: [i64; 2]| {
        let (x, y) = ((p[0] - d[0]) as i128, (p[1] - d[1]) as i128);
        (x, y, x * x + y * y)
    };
    let (ax, ay, a2) = row(a);
    let (bx, by, b2) = row(b);
    let (cx, cy, c2) = row(c);
    ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
}

fn cross(o: [i64; 2], a: [i64; 2], b: [i64; 2]) -> i128 {
    (a[0] - o[0]) as i128 * (b[1] - o[1]) as i128 - (a[1] - o[1]) as i128 * (b[0] - o[0]) as i128
}

/// Twice the convex hull area (monotone chain).
fn hull_area2(points: &[[i64; 2]]) -> i128 {
    let mut p = points.to_vec();
    p.sort();
    p.dedup();
    let mut hull: Vec<[i64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[i64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    (0..hull.len()).map(|i| cross([0, 0], hull[i], hull[(i + 1) % hull.len()])).sum()
}

/// Side of the square image the point sets live in.
const IMAGE_SIDE: usize = 1000;
/// Largest support set; the four corner anchors bring the mesh to at most 500 vertices.
const MAX_SUPPORT: usize = 496;

fn point_set(rng: &mut ChaCha8Rng, i: usize) -> Vec<[i64; 2]> {
    match i % 4 {
        0 => {
            let n = rng.random_range(3..=MAX_SUPPORT);
            (0..n).map(|_| [rng.random_range(0..1000), rng.random_range(0..1000)]).collect()
        }
        // square lattice: every cell is cocircular
        1 => {
            let s = rng.random_range(2..=22);
            (0..s * s).map(|j| [(j % s) as i64 * 7, (j / s) as i64 * 7]).collect()
        }
        // all lattice points on a circle of radius 65, plus the center and a few random points
        2 => {
            let mut pts: Vec<[i64; 2]> = Vec::new();
            for x in -65i64..=65 {
                for y in -65i64..=65 {
                    if x * x + y * y == 65 * 65 {
                        pts.push([x + 500, y + 500]);
                    }
                }
            }
            pts.push([500, 500]);
            for _ in 0..rng.random_range(0..20) {
                pts.push([rng.random_range(400..600), rng.random_range(400..600)]);
            }
            pts
        }
        // coarse random grid with duplicates and collinear runs
        _ => {
            let n = rng.random_range(3..=MAX_SUPPORT);
            (0..n).map(|_| [rng.random_range(0..12) * 10, rng.random_range(0..12) * 10]).collect()
        }
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut triangles = 0;
    for i in 0..100 {
        let support: Vec<SupportPoint> = point_set(&mut rng, i)
            .into_iter()
            .map(|[u, v]| SupportPoint::new(u, v, rng.random_range(0.0..40.0), 0))
            .collect();
        let mesh = match prior::triangulate(&support, IMAGE_SIDE, IMAGE_SIDE) {
            Ok(m) => m,
            Err(e) => {
                failures.push(format!("set {i}: {e}"));
                continue;
            }
        };
        let pts: Vec<[i64; 2]> = mesh.vertices().iter().map(|p| [p.u, p.v]).collect();
        let mut unique = pts.clone();
        unique.sort();
        unique.dedup();
        triangles += mesh.triangles().len();
        let mut area2 = 0i128;
        for t in mesh.triangles() {
            let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
            let o = cross(a, b, c);
            if o <= 0 {
                failures.push(format!("set {i}: degenerate or clockwise triangle {t:?}"));
            }
            area2 += o;
            for (j, &q) in unique.iter().enumerate() {
                if q == a || q == b || q == c {
                    continue;
                }
                if incircle_i128(a, b, c, q) > 0 {
                    failures.push(format!("set {i}: point {j} inside circumcircle of {t:?}"));
                    break;
                }
            }
        }
        if area2 != hull_area2(&pts) {
            failures.push(format!("set {i}: triangles do not tile the hull"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 10.0,
        format!(
            "100 sets, {triangles} triangles, {} failures{}, {secs:.3}s",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- e-step

fn random_gray(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane<u8> {
    Plane::from_fn(w, h, |_, _| rng.random())
}

/// Exhaustive scorer over all 2^K labelings of the valid rays.
fn exhaustive_e_step(feats: &[Feature], probs: &[f64], valid: u8, p: &SolverParams) -> u8 {
    let k = feats.len();
    let clamp = |q: f64| q.clamp(p.epsilon_prior, 1.0 - p.epsilon_prior);
    let score = |mask: u8| {
        let mut log_prior = 0.0;
        let mut chosen: Vec<&Feature> = Vec::new();
        for j in 0..k {
            if valid & (1 << j) == 0 {
                continue;
            }
            if mask & (1 << j) != 0 {
                log_prior += clamp(probs[j]).ln();
                chosen.push(&feats[j]);
            } else {
                log_prior += clamp(1.0 - probs[j]).ln();
            }
        }
        let data = if chosen.len() >= p.min_static_rays {
            let n = chosen.len() as f64;
            let mut mean = [0f64; DESCRIPTOR_LEN];
            for f in &chosen {
                for (m, &x) in mean.iter_mut().zip(f.iter()) {
                    *m += x as f64;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut ss = 0.0;
            for f in &chosen {
                for (m, &x) in mean.iter().zip(f.iter()) {
                    ss += (x as f64 - m) * (x as f64 - m);
                }
            }
            p.beta * (ss / n)
        } else {
            p.beta * VARIANCE_PENALTY
        };
        log_prior - data
    };
    let mut best: Option<(f64, u8)> = None;
    for mask in 0..(1u16 << k) {
        let mask = mask as u8;
        if mask & !valid != 0 {
            continue;
        }
        let s = score(mask);
        let better = match best {
            None => true,
            Some((bs, bm)) => {
                if s != bs {
                    s > bs
                } else if mask.count_ones() != bm.count_ones() {
                    mask.count_ones() > bm.count_ones()
                } else {
                    // lexicographic: the mask owning the lowest differing ray wins
                    let low = (mask ^ bm).trailing_zeros();
                    mask & (1 << low) != 0
                }
            }
        };
        if better {
            best = Some((s, mask));
        }
    }
    best.map_or(0, |b| b.1)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (w, h) = (48, 40);
    let intr = CameraIntrinsics::new(60.0, 60.0, 23.5, 19.5, w, h).unwrap();
    let rig = rectified_rig(intr, &[0.0, 1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
    let params = SolverParams::default();
    let start = Instant::now();
    let mut instances = 0;
    let mut mismatches = 0;
    let mut partial = 0;
    for round in 0..100 {
        let descr: Vec<DescriptorMap> = (0..5).map(|_| compute_descriptors(&random_gray(&mut rng, w, h)).unwrap()).collect();
        let maps: Vec<Plane<f32>> = (0..5)
            .map(|_| {
                let extreme = round % 3 == 0;
                Plane::from_fn(w, h, |_, _| {
                    if extreme {
                        rng.random_range(0..2) as f32
                    } else {
                        rng.random::<f32>()
                    }
                })
            })
            .collect();
        let priors = SegmentationPriorMaps::new(maps).unwrap();
        let inputs = SolverInputs::new(&rig, &descr, &priors).unwrap();
        for _ in 0..100 {
            let x = PixelCoord::new(rng.random_range(0.0..(w - 1) as f64), rng.random_range(0.0..(h - 1) as f64));
            let d = rng.random_range(0.25..6.0);
            let (got, got_valid) = e_step(&inputs, x, d, &params);

            let mut feats = [[0f32; DESCRIPTOR_LEN]; 5];
            let mut probs = [0f64; 5];
            let mut valid = 0u8;
            for k in 0..5 {
                let Some(p) = rig.warp(x, d, k) else { continue };
                if let Some(f) = descr[k].sample_bilinear(p.u, p.v) {
                    feats[k] = f;
                    probs[k] = priors.get(k).sample_bilinear(p.u, p.v).unwrap_or(0.0);
                    valid |= 1 << k;
                }
            }
            partial += (valid != 0b11111) as usize;
            let want = exhaustive_e_step(&feats, &probs, valid, &params);
            if got != want || got_valid != valid {
                mismatches += 1;
            }
            instances += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 5.0,
        format!("{instances} instances ({partial} with out-of-view rays), {mismatches} mismatches, {secs:.3}s"),
    )
}

// ---------------------------------------------------------------- scenes

struct Run {
    scene: SynthScene,
    rec: Reconstruction,
    secs: f64,
}

fn run_scene(spec: &synth::SceneSpec, params: &ReconstructParams) -> Run {
    let scene = synth::generate(spec).expect("preset renders");
    let start = Instant::now();
    let rec = pipeline::reconstruct(&scene.rig, &scene.frame, &scene.priors, params).expect("reconstruction runs");
    Run {
        scene,
        rec,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn criterion_4(run: &Run) -> Outcome {
    let t = &run.scene.truth;
    let e = disparity_errors(&run.rec.disparity.disparity, &t.disparity, Some(&t.textured)).unwrap();
    outcome(
        e.mae < 0.5 && e.bad_rate < 0.05 && run.secs < 10.0,
        format!(
            "MAE {:.3}, bad-pixel rate {:.2}% over {} textured pixels, {:.2}s",
            e.mae,
            e.bad_rate * 100.0,
            e.pixels,
            run.secs
        ),
    )
}

fn refocus_rmse(run: &Run) -> lfstatic::pipeline::eval::RefocusErrors {
    refocus_errors(
        &run.rec.refocused.color,
        &run.rec.refocused.provenance,
        &run.scene.truth.background,
        2,
        None,
    )
    .unwrap()
}

fn criterion_5(run: &Run) -> Outcome {
    let r = refocus_rmse(run);
    let covered = run.scene.truth.masks[0].as_slice().iter().filter(|&&m| m).count() as f64
        / run.scene.truth.masks[0].len() as f64;
    outcome(
        r.rmse < 5.0 / 255.0,
        format!(
            "occluder covers {:.1}% of the reference view; RMSE {:.2}/255 over {} pixels, {} fallback pixels excluded",
            covered * 100.0,
            r.rmse * 255.0,
            r.pixels,
            r.fallback_pixels
        ),
    )
}

fn criterion_6(noisy: &Run, perfect: &Run) -> Outcome {
    let it = noisy.rec.report.iterations;
    let converged = noisy.rec.report.converged;
    let acc = segmentation_accuracy(
        &noisy.scene.rig,
        &noisy.rec.disparity.disparity,
        &noisy.rec.segmentation,
        &noisy.scene.priors,
        SolverParams::default().threshold,
        &noisy.scene.truth.masks,
    )
    .unwrap();
    let (rn, rp) = (refocus_rmse(noisy).rmse, refocus_rmse(perfect).rmse);
    outcome(
        converged && it <= 3 && acc.after > acc.before && rn <= 1.5 * rp,
        format!(
            "{it} iterations (converged: {converged}); ray-label accuracy {:.4} -> {:.4} over {} rays; RMSE {:.2}/255 vs {:.2}/255 perfect ({:.2}x)",
            acc.before,
            acc.after,
            acc.rays,
            rn * 255.0,
            rp * 255.0,
            rn / rp
        ),
    )
}

fn criterion_7(run: &Run) -> Outcome {
    let t = &run.scene.truth;
    let plain = t.textured.map(|&x| !x);
    let e = disparity_errors(&run.rec.disparity.disparity, &t.disparity, Some(&plain)).unwrap();
    let share = e.pixels as f64 / plain.len() as f64;
    outcome(
        e.pixels > 0 && e.bad_rate < 0.15,
        format!(
            "plain region {:.1}% of the view; bad-pixel rate there {:.2}% (MAE {:.3})",
            share * 100.0,
            e.bad_rate * 100.0,
            e.mae
        ),
    )
}

fn output_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.txt")
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn criterion_8(runs: &[(&str, &Run)]) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, run) in runs {
        let stats = &run.rec.report.per_iteration;
        let mut violations = 0;
        for s in stats {
            if let Some(before) = s.energy_before {
                violations += (s.energy_after > before) as usize + s.descent_violations;
            }
        }
        ok &= violations == 0;
        notes.push(format!("{name} {} it/{violations} violations", stats.len()));
    }

    // same scene, different worker counts, compared byte for byte
    let spec = presets::noisy(presets::occluder(320, 240, 0.25));
    let scene = synth::generate(&spec).unwrap();
    let params = ReconstructParams::default();
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in [1, 3] {
        let rec = pipeline::with_threads(threads, || pipeline::reconstruct(&scene.rig, &scene.frame, &scene.priors, &params))
            .unwrap()
            .unwrap();
        let dir = tmp.path().join(format!("t{threads}"));
        pipeline::write_reconstruction(&dir, &scene.rig, &rec, true).unwrap();
        outputs.push(output_bytes(&dir));
    }
    let identical = outputs[0] == outputs[1];
    ok &= identical;
    outcome(
        ok,
        format!(
            "{}; 1 vs 3 threads: {} files {}",
            notes.join(", "),
            outputs[0].len(),
            if identical { "byte-identical" } else { "DIFFER" }
        ),
    )
}

fn criterion_9() -> Outcome {
    let params = ReconstructParams::default().with_dynamic_only(true);
    let mut solver_secs = Vec::new();
    for frac in [0.1, 0.4] {
        let run = run_scene(&presets::occluder(320, 240, frac), &params);
        solver_secs.push((frac, run.rec.timings.solver, run.rec.report.solved_pixels));
    }
    let monotone = solver_secs[0].1 < solver_secs[1].1;

    let big = run_scene(&presets::occluder(720, 540, 0.25), &ReconstructParams::default());
    let soft = big.secs < 60.0;
    outcome(
        monotone,
        format!(
            "dynamic-only solver {:.3}s ({} px) at 10% vs {:.3}s ({} px) at 40%; soft target: full 720x540 K=5 in {:.2}s ({})",
            solver_secs[0].1,
            solver_secs[0].2,
            solver_secs[1].1,
            solver_secs[1].2,
            big.secs,
            if soft { "met" } else { "missed" }
        ),
    )
}

fn main() -> ExitCode {
    // `cargo test -- <filter>` style arguments are ignored; `--list` keeps
    // test discovery tools happy.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n, name, o: Outcome| {
        println!("[{}] criterion {n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    report(1, "geometry oracle", criterion_1());
    report(2, "delaunay correctness", criterion_2());
    report(3, "e-step brute force", criterion_3());

    let params = ReconstructParams::default();
    let two_plane = run_scene(&presets::two_plane(320, 240), &params);
    report(4, "static-scene disparity", criterion_4(&two_plane));
    let occluder = run_scene(&presets::occluder(320, 240, 0.25), &params);
    report(5, "see-through reconstruction", criterion_5(&occluder));
    let noisy = run_scene(&presets::noisy(presets::occluder(320, 240, 0.25)), &params);
    report(6, "EM robustness", criterion_6(&noisy, &occluder));
    let low = run_scene(&presets::low_texture(320, 240), &params);
    report(7, "low-texture resilience", criterion_7(&low));
    report(
        8,
        "M-step descent and determinism",
        criterion_8(&[("two-plane", &two_plane), ("occluder", &occluder), ("noisy", &noisy), ("low-texture", &low)]),
    );
    report(9, "fast-path scaling", criterion_9());

    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
