//! End-to-end reconstruction, configuration, file formats and evaluation.

mod config;
pub mod eval;
pub mod io;
mod commands;

use std::time::Instant;

pub use commands::{
    cmd_evaluate, cmd_reconstruct, cmd_synth, exit_code, load_frame, load_priors, write_dataset, write_reconstruction,
    ReconstructArgs, SynthArgs,
};
pub use config::RunConfig;

use crate::error::Result;
use crate::features::DescriptorMap;
use crate::frame::LightFieldFrame;
use crate::geometry::CameraRig;
use crate::prior::{build_support_set, triangulate, PriorParams, SupportParams, SupportPoint, TriangulationPrior};
use crate::refocus::{synthesize, RefocusParams, RefocusedImage};
use crate::solver::{em_solve, DisparityMap, EmReport, SegmentationPriorMaps, SegmentationState, SolverInputs, SolverParams};

/// Every tunable of one reconstruction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReconstructParams {
    pub solver: SolverParams,
    pub prior: PriorParams,
    pub support: SupportParams,
    pub refocus: RefocusParams,
}

impl ReconstructParams {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.prior.validate()?;
        self.support.validate()
    }

    /// Keeps the shared settings of the solver and refocus stages in step.
    pub fn with_dynamic_only(mut self, on: bool) -> Self {
        self.solver.dynamic_only = on;
        self.refocus.dynamic_only = on;
        self
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub features: f64,
    pub support: f64,
    pub triangulation: f64,
    pub solver: f64,
    pub refocus: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.features + self.support + self.triangulation + self.solver + self.refocus
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub disparity: DisparityMap,
    pub segmentation: SegmentationState,
    pub refocused: RefocusedImage,
    pub support: Vec<SupportPoint>,
    pub triangulation: TriangulationPrior,
    pub report: EmReport,
    pub timings: StageTimings,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    log::debug!("stage took {:.3}s", *slot);
    out
}

/// Features, support points, triangulation, EM, refocusing. Falls back to a
/// flat prior at `d_max / 2` when no support point survives.
pub fn reconstruct(
    rig: &CameraRig,
    frame: &LightFieldFrame,
    priors: &SegmentationPriorMaps,
    params: &ReconstructParams,
) -> Result<Reconstruction> {
    params.validate()?;
    frame.check_rig(rig)?;
    priors.check_rig(rig)?;
    let mut t = StageTimings::default();
    let (w, h) = rig.image_dims();

    let descriptors: Vec<DescriptorMap> = timed(&mut t.features, || frame.descriptors())?;
    let support = timed(&mut t.support, || {
        build_support_set(
            rig,
            &descriptors,
            priors.maps(),
            params.solver.threshold,
            &params.prior,
            &params.support,
        )
    });
    let triangulation = timed(&mut t.triangulation, || {
        if support.is_empty() {
            log::warn!("no support points; using a flat prior");
            TriangulationPrior::flat(params.prior.d_max / 2.0, w, h)
        } else {
            triangulate(&support, w, h)
        }
    })?;
    let inputs = SolverInputs::new(rig, &descriptors, priors)?;
    let em = timed(&mut t.solver, || em_solve(&inputs, &triangulation, &params.solver, &params.prior))?;
    let refocused = timed(&mut t.refocus, || {
        synthesize(
            frame,
            rig,
            &em.disparity,
            &em.segmentation,
            priors.get(rig.ref_index()),
            &params.refocus,
        )
    })?;
    log::info!(
        "{} support points, {} EM rounds, {:.2}s total",
        support.len(),
        em.report.iterations,
        t.total()
    );
    Ok(Reconstruction {
        disparity: em.disparity,
        segmentation: em.segmentation,
        refocused,
        support,
        triangulation,
        report: em.report,
        timings: t,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::error::Error::InvalidParams(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
