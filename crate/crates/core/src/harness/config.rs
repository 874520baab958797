use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraModel, Vec3};
use crate::planner::{PlanParams, Strategy, SwitchParams};
use crate::scene::{generate_floorplan, load_scene, GroundTruthScene, SceneError};
use crate::surface::UncertaintyParams;
use crate::taskgen::GenParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Ablation variants, from plain frontier exploration (V1) to the full
/// adaptive planner (V5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    V1,
    V2,
    V3,
    V4,
    V5,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::V1, Variant::V2, Variant::V3, Variant::V4, Variant::V5];

    pub fn strategy(self) -> Strategy {
        match self {
            Variant::V1 | Variant::V2 => Strategy::ExplorationOnly,
            Variant::V3 => Strategy::ReconstructionOnly,
            Variant::V4 => Strategy::Merged,
            Variant::V5 => Strategy::Adaptive,
        }
    }

    /// V1 flies level: every view has zero pitch.
    pub fn level_only(self) -> bool {
        self == Variant::V1
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Variant {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::Invalid(format!("unknown variant {s:?}")))
    }
}

/// Where the ground truth comes from: a scene file, or the floorplan
/// generator when no file is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSource {
    pub file: Option<PathBuf>,
    pub seed: u64,
    pub rooms: usize,
    pub extent: [f64; 3],
    pub resolution: f64,
}

impl Default for SceneSource {
    fn default() -> Self {
        Self {
            file: None,
            seed: 1,
            rooms: 3,
            extent: [10.0, 8.0, 3.0],
            resolution: 0.1,
        }
    }
}

impl SceneSource {
    pub fn load(&self) -> Result<GroundTruthScene, ConfigError> {
        match &self.file {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                Ok(load_scene(&bytes)?)
            }
            None => Ok(generate_floorplan(
                self.seed,
                self.rooms,
                Vec3::from(self.extent),
                self.resolution,
            )?),
        }
    }
}

/// Surface uncertainty settings; `d_opt` defaults to the middle of the
/// viewing shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    pub sigma0: f64,
    pub sigma_min: f64,
    pub eta: f64,
    pub d_opt: Option<f64>,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        let p = UncertaintyParams::default();
        Self {
            sigma0: p.sigma0,
            sigma_min: p.sigma_min,
            eta: p.eta,
            d_opt: None,
        }
    }
}

pub fn default_camera() -> CameraModel {
    CameraModel {
        horizontal_fov: 90f64.to_radians(),
        vertical_fov: 70f64.to_radians(),
        image_width: 128,
        image_height: 96,
        max_range: 4.5,
        depth_noise_sigma: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub name: String,
    pub variant: Variant,
    pub view_budget: usize,
    pub rng_seed: u64,
    /// Points sampled per surface for the geometry metrics.
    pub metric_samples: usize,
    pub scene: SceneSource,
    pub camera: CameraModel,
    pub gen: GenParams,
    pub switch: SwitchParams,
    pub plan: PlanParams,
    pub uncertainty: UncertaintyConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            name: "episode".into(),
            variant: Variant::V5,
            view_budget: 150,
            rng_seed: 0,
            metric_samples: 30_000,
            scene: SceneSource::default(),
            camera: default_camera(),
            gen: GenParams::default(),
            switch: SwitchParams::default(),
            plan: PlanParams::default(),
            uncertainty: UncertaintyConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative scene path is taken relative to it.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(file), Some(dir)) = (&cfg.scene.file, path.parent()) {
            if file.is_relative() {
                cfg.scene.file = Some(dir.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.view_budget == 0 {
            return bad("view_budget must be at least 1");
        }
        self.camera
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let g = &self.gen;
        if !(g.d_r > 0.0 && g.d_r <= g.d_f) {
            return bad("need 0 < d_r <= d_f");
        }
        if !(g.d_s >= 0.0 && g.r_loc > 0.0 && g.r_clu > 0.0) {
            return bad("d_s, R_loc and R_clu must be positive");
        }
        if g.n_r == 0 || g.n_az == 0 || g.n_polar == 0 {
            return bad("shell lattice counts must be positive");
        }
        if !(self.plan.l_exec > 0.0 && self.plan.l_res > 0.0 && self.plan.split_extent > 0.0) {
            return bad("L_exec, l_res and split_extent must be positive");
        }
        if !(self.switch.d_near > 0.0 && self.switch.alpha >= 1.0) {
            return bad("need d_near > 0 and alpha >= 1");
        }
        let u = &self.uncertainty;
        if !(u.sigma_min > 0.0 && u.sigma_min <= u.sigma0 && u.eta > 0.0 && u.eta < 1.0) {
            return bad("need 0 < sigma_min <= sigma0 and 0 < eta < 1");
        }
        Ok(())
    }

    pub fn uncertainty_params(&self) -> UncertaintyParams {
        let u = &self.uncertainty;
        UncertaintyParams {
            sigma0: u.sigma0,
            sigma_min: u.sigma_min,
            eta: u.eta,
            d_opt: u.d_opt.unwrap_or(0.5 * (self.gen.d_r + self.gen.d_f)),
        }
    }

    /// Generation parameters with the variant's pitch rule applied.
    pub fn gen_params(&self) -> GenParams {
        let mut g = self.gen;
        if self.variant.level_only() {
            g.exploration_pitch = Some(0.0);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_keys_parse() {
        let cfg = EpisodeConfig::from_toml(
            "view_budget = 80\n[gen]\nd_r = 0.5\nd_f = 1.5\nR_loc = 1.5\nR_clu = 1.0\nN_rec = 10\nN_min = 15\n\
             [switch]\nd_near = 1.0\n[plan]\nL_exec = 4.0\n",
        )
        .unwrap();
        assert_eq!(cfg.view_budget, 80);
        assert_eq!(cfg.gen.r_loc, 1.5);
        assert_eq!(cfg.gen.n_min, 15);
        assert_eq!(cfg.switch.d_near, 1.0);
        assert_eq!(cfg.plan.l_exec, 4.0);
        assert_eq!(cfg.plan.l_res, 0.2);
        assert_eq!(cfg.uncertainty_params().d_opt, 1.0);
    }

    #[test]
    fn round_trips_and_rejects_junk() {
        let cfg = EpisodeConfig::default();
        assert_eq!(EpisodeConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(EpisodeConfig::from_toml("view_budget = 0").is_err());
        assert!(EpisodeConfig::from_toml("bogus = 1").is_err());
        assert!(EpisodeConfig::from_toml("[gen]\nd_r = 3.0").is_err());
    }

    #[test]
    fn variants() {
        assert_eq!("v3".parse::<Variant>().unwrap(), Variant::V3);
        assert!("V6".parse::<Variant>().is_err());
        let mut cfg = EpisodeConfig {
            variant: Variant::V1,
            ..Default::default()
        };
        assert_eq!(cfg.gen_params().exploration_pitch, Some(0.0));
        cfg.variant = Variant::V2;
        assert_eq!(cfg.gen_params().exploration_pitch, None);
    }
}
