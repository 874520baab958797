use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{GridSpec, Vec3, VoxelId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    ExplorationOnly,
    Merged,
    FinalRecon,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::ExplorationOnly => "EXPLORATION_ONLY",
            Mode::Merged => "MERGED",
            Mode::FinalRecon => "FINAL_RECON",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchParams {
    /// Radius of the nearby-frontier ball.
    pub d_near: f64,
    pub n_near_threshold: usize,
    pub beta_threshold: f64,
    /// Amplification applied in the final reconstruction phase.
    pub alpha: f64,
}

impl Default for SwitchParams {
    fn default() -> Self {
        Self {
            d_near: 2.0,
            n_near_threshold: 3,
            beta_threshold: 0.2,
            alpha: 3.0,
        }
    }
}

/// Mode from the number of nearby frontier cells and the total count.
pub fn mode_from_counts(n_near: usize, total: usize, params: &SwitchParams) -> Mode {
    if total == 0 {
        return Mode::FinalRecon;
    }
    let beta = n_near as f64 / total as f64;
    if n_near > params.n_near_threshold && beta > params.beta_threshold {
        Mode::ExplorationOnly
    } else {
        Mode::Merged
    }
}

/// Counts frontier cells whose centers lie within `d_near` of `p0`.
pub fn count_near(spec: &GridSpec, frontiers: &BTreeSet<VoxelId>, p0: Vec3, d_near: f64) -> usize {
    frontiers
        .iter()
        .filter(|&&id| (spec.center_of(id) - p0).norm() <= d_near)
        .count()
}

pub fn select_mode(spec: &GridSpec, frontiers: &BTreeSet<VoxelId>, p0: Vec3, params: &SwitchParams) -> Mode {
    mode_from_counts(count_near(spec, frontiers, p0, params.d_near), frontiers.len(), params)
}
