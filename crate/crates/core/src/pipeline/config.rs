use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReconstructParams;
use crate::error::{Error, Result};
use crate::prior::{PriorParams, SupportParams};
use crate::refocus::RefocusParams;
use crate::solver::SolverParams;

/// Flat key/value run configuration, read from TOML. Command-line flags
/// override the path, reference, thread and fast-path keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub calib: Option<PathBuf>,
    pub frames: Option<PathBuf>,
    pub priors: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub ref_index: Option<usize>,
    /// Worker threads; 0 picks one per core.
    pub threads: usize,

    pub beta: f64,
    pub threshold: f64,
    pub max_iters: usize,
    pub min_static_rays: usize,
    pub epsilon_prior: f64,
    pub dynamic_only: bool,

    pub sigma: f64,
    pub gamma: f64,
    pub d_max: f64,
    pub neighborhood_radius: f64,

    pub grid_stride: usize,
    pub min_texture: u32,
    pub uniqueness_ratio: f64,
    pub lr_tolerance: f64,
    pub disparity_step: f64,
    pub consistency_gap: f64,

    pub median_radius: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverParams::default();
        let p = PriorParams::default();
        let m = SupportParams::default();
        let r = RefocusParams::default();
        RunConfig {
            calib: None,
            frames: None,
            priors: None,
            out: None,
            ref_index: None,
            threads: 0,
            beta: s.beta,
            threshold: s.threshold,
            max_iters: s.max_iters,
            min_static_rays: s.min_static_rays,
            epsilon_prior: s.epsilon_prior,
            dynamic_only: s.dynamic_only,
            sigma: p.sigma,
            gamma: p.gamma,
            d_max: p.d_max,
            neighborhood_radius: p.neighborhood_radius,
            grid_stride: m.grid_stride,
            min_texture: m.min_texture,
            uniqueness_ratio: m.uniqueness_ratio,
            lr_tolerance: m.lr_tolerance,
            disparity_step: m.disparity_step,
            consistency_gap: m.consistency_gap,
            median_radius: r.median_radius,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn params(&self) -> ReconstructParams {
        ReconstructParams {
            solver: SolverParams {
                beta: self.beta,
                threshold: self.threshold,
                max_iters: self.max_iters,
                min_static_rays: self.min_static_rays,
                epsilon_prior: self.epsilon_prior,
                dynamic_only: self.dynamic_only,
            },
            prior: PriorParams {
                sigma: self.sigma,
                gamma: self.gamma,
                d_max: self.d_max,
                neighborhood_radius: self.neighborhood_radius,
            },
            support: SupportParams {
                grid_stride: self.grid_stride,
                min_texture: self.min_texture,
                uniqueness_ratio: self.uniqueness_ratio,
                lr_tolerance: self.lr_tolerance,
                disparity_step: self.disparity_step,
                consistency_gap: self.consistency_gap,
            },
            refocus: RefocusParams {
                median_radius: self.median_radius,
                min_static_rays: self.min_static_rays,
                dynamic_only: self.dynamic_only,
                threshold: self.threshold,
            },
        }
    }

    /// Checks parameter ranges and that every configured input path exists.
    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        for p in [&self.calib, &self.frames, &self.priors].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::MissingArtifact(p.clone()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_module_defaults() {
        let c = RunConfig::default();
        let p = c.params();
        assert_eq!(p.solver, SolverParams::default());
        assert_eq!(p.prior, PriorParams::default());
        assert_eq!(p.support, SupportParams::default());
        assert_eq!(p.refocus, RefocusParams::default());
    }

    #[test]
    fn partial_file_and_unknown_keys() {
        let c = RunConfig::from_toml("sigma = 3.0\ndynamic_only = true\n", Path::new("c.toml")).unwrap();
        assert_eq!(c.sigma, 3.0);
        assert!(c.params().solver.dynamic_only && c.params().refocus.dynamic_only);
        assert_eq!(c.beta, RunConfig::default().beta);
        let e = RunConfig::from_toml("sigmaa = 3.0\n", Path::new("c.toml")).unwrap_err().to_string();
        assert!(e.contains("c.toml") && e.contains("sigmaa"), "{e}");
        let back = RunConfig::from_toml(&c.to_toml(), Path::new("x")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation() {
        let c = RunConfig {
            gamma: 0.0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            calib: Some(PathBuf::from("/nonexistent/calib.toml")),
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::MissingArtifact(_))));
    }
}
