use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::surface::write_mesh_text;

use super::episode::Episode;

pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MESH_FILE: &str = "mesh.txt";
pub const MAP_FILE: &str = "map.vmap";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the episode's files into `dir`. Everything but the timings file
/// depends only on the config.
pub fn export_artifacts(ep: &Episode, dir: &Path) -> Result<(), ExportError> {
    fs::create_dir_all(dir)?;
    write_csv(
        &dir.join(ITERATIONS_FILE),
        &[
            "iteration",
            "mode",
            "amplified",
            "n_exploration",
            "n_reconstruction",
            "n_dormant",
            "n_executed",
            "n_frontiers",
            "views",
            "total_views",
            "path_length",
            "coverage",
            "mean_sigma",
        ],
        ep.iterations.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                r.mode.to_string(),
                r.amplified.to_string(),
                r.n_exploration.to_string(),
                r.n_reconstruction.to_string(),
                r.n_dormant.to_string(),
                r.n_executed.to_string(),
                r.n_frontiers.to_string(),
                r.views.to_string(),
                r.total_views.to_string(),
                r.path_length.to_string(),
                r.coverage.to_string(),
                r.mean_sigma.to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.join(TIMINGS_FILE),
        &["iteration", "t_task", "t_atsp", "t_switch", "t_sp"],
        ep.iterations.iter().map(|r| {
            let t = r.timing;
            vec![
                r.iteration.to_string(),
                t.t_task.to_string(),
                t.t_atsp.to_string(),
                t.t_switch.to_string(),
                t.t_sp().to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.join(TRAJECTORY_FILE),
        &["view", "iteration", "x", "y", "z", "pitch", "yaw"],
        ep.views.iter().enumerate().map(|(i, v)| {
            let p = v.pose;
            vec![
                i.to_string(),
                v.iteration.to_string(),
                p.position.x.to_string(),
                p.position.y.to_string(),
                p.position.z.to_string(),
                p.pitch.to_string(),
                p.yaw.to_string(),
            ]
        }),
    )?;
    let m = &ep.metrics;
    let g = m.geometry;
    write_csv(
        &dir.join(SUMMARY_FILE),
        &[
            "name",
            "variant",
            "views_used",
            "iterations",
            "termination",
            "path_length_m",
            "coverage_ratio",
            "accuracy_cm",
            "completion_cm",
            "recall",
        ],
        [vec![
            ep.config.name.clone(),
            ep.config.variant.to_string(),
            m.views_used.to_string(),
            m.iterations.to_string(),
            m.termination.as_str().to_string(),
            m.path_length_m.to_string(),
            m.coverage_ratio.to_string(),
            opt(g.map(|g| g.accuracy_cm)),
            opt(g.map(|g| g.completion_cm)),
            opt(g.map(|g| g.recall)),
        ]],
    )?;
    let mesh_path = dir.join(MESH_FILE);
    if ep.mesh.is_empty() {
        if mesh_path.exists() {
            fs::remove_file(&mesh_path)?;
        }
    } else {
        fs::write(&mesh_path, write_mesh_text(&ep.mesh, &ep.vertex_sigmas))?;
    }
    let last = ep.views.last().map_or(ep.spawn, |v| v.pose);
    fs::write(dir.join(MAP_FILE), ep.map.to_dump_bytes(&last))?;
    Ok(())
}
