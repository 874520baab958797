use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use scanplan::harness::{compute_metrics, export_artifacts, Episode, EpisodeConfig, Variant};
use scanplan::scene::{generate_floorplan, load_scene, save_scene, GroundTruthScene};
use scanplan::surface::read_mesh_text;
use scanplan::Vec3;

#[derive(Parser)]
#[command(name = "scanplan", version, about = "Indoor scan planning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the variant named in the config.
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every config in a directory under each listed variant.
    Sweep {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "V1,V2,V3,V4,V5")]
        variants: Vec<Variant>,
    },
    /// Geometry metrics of a mesh file against a scene file.
    Metrics {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 30_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate or inspect scene files.
    Scene {
        #[command(subcommand)]
        command: SceneCommand,
    },
}

#[derive(Subcommand)]
enum SceneCommand {
    Gen {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        rooms: usize,
        /// Box size in meters, as x,y,z.
        #[arg(long, value_delimiter = ',', default_value = "10,8,3")]
        extent: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        res: f64,
        #[arg(long)]
        out: PathBuf,
    },
    Info {
        file: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, variant, out } => {
            let mut cfg = EpisodeConfig::load(&config)?;
            if let Some(v) = variant {
                cfg.variant = v;
            }
            let ep = run_and_export(&cfg, &out)?;
            println!("{}", summary_line(&cfg, &ep));
        }
        Command::Sweep { configs, out, variants } => sweep(&configs, &out, &variants)?,
        Command::Metrics { mesh, scene, samples, seed } => {
            let text = fs::read_to_string(&mesh).with_context(|| format!("reading {}", mesh.display()))?;
            let (mesh, _) = read_mesh_text(&text)?;
            let scene = read_scene(&scene)?;
            let m = compute_metrics(&mesh, &scene, samples, seed)?;
            println!("accuracy_cm {:.3}", m.accuracy_cm);
            println!("completion_cm {:.3}", m.completion_cm);
            println!("recall {:.4}", m.recall);
        }
        Command::Scene { command } => match command {
            SceneCommand::Gen { seed, rooms, extent, res, out } => {
                if extent.len() != 3 {
                    bail!("--extent takes three values, got {}", extent.len());
                }
                let scene = generate_floorplan(seed, rooms, Vec3::new(extent[0], extent[1], extent[2]), res)?;
                fs::write(&out, save_scene(&scene)).with_context(|| format!("writing {}", out.display()))?;
                print_info(&scene);
            }
            SceneCommand::Info { file } => print_info(&read_scene(&file)?),
        },
    }
    Ok(())
}

fn read_scene(path: &Path) -> Result<GroundTruthScene> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(load_scene(&bytes)?)
}

fn print_info(scene: &GroundTruthScene) {
    let s = scene.spec();
    let sp = scene.spawn();
    println!("dims {} {} {}", s.dims[0], s.dims[1], s.dims[2]);
    println!("resolution {}", s.resolution);
    println!("origin {} {} {}", s.origin.x, s.origin.y, s.origin.z);
    println!(
        "spawn {} {} {} pitch {} yaw {}",
        sp.position.x, sp.position.y, sp.position.z, sp.pitch, sp.yaw
    );
    println!("solid {}", scene.solid_count());
    println!("reachable_free {}", scene.reachable_free().iter().filter(|&&r| r).count());
}

fn run_and_export(cfg: &EpisodeConfig, out: &Path) -> Result<Episode> {
    let ep = scanplan::run_episode(cfg)?;
    export_artifacts(&ep, out)?;
    Ok(ep)
}

fn summary_line(cfg: &EpisodeConfig, ep: &Episode) -> String {
    let m = &ep.metrics;
    let geo = match &m.geometry {
        Some(g) => format!("acc {:.2} cm comp {:.2} cm recall {:.3}", g.accuracy_cm, g.completion_cm, g.recall),
        None => "no mesh".into(),
    };
    format!(
        "{} {}: coverage {:.3} {} path {:.1} m views {} iterations {} ({})",
        cfg.name,
        cfg.variant,
        m.coverage_ratio,
        geo,
        m.path_length_m,
        m.views_used,
        m.iterations,
        m.termination.as_str()
    )
}

fn sweep(dir: &Path, out: &Path, variants: &[Variant]) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "toml"));
    files.sort();
    if files.is_empty() {
        bail!("no .toml configs in {}", dir.display());
    }
    fs::create_dir_all(out)?;
    let mut table = csv::Writer::from_path(out.join("sweep.csv"))?;
    table.write_record([
        "config",
        "variant",
        "coverage_ratio",
        "accuracy_cm",
        "completion_cm",
        "recall",
        "path_length_m",
        "views_used",
        "iterations",
        "termination",
    ])?;
    for file in &files {
        let base = EpisodeConfig::load(file)?;
        let stem = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        for &v in variants {
            let cfg = EpisodeConfig { variant: v, ..base.clone() };
            let ep = run_and_export(&cfg, &out.join(&stem).join(v.to_string()))?;
            println!("{}", summary_line(&cfg, &ep));
            let m = &ep.metrics;
            let g = |f: fn(&scanplan::harness::GeometryMetrics) -> f64| {
                m.geometry.as_ref().map(|x| f(x).to_string()).unwrap_or_default()
            };
            table.write_record([
                stem.clone(),
                v.to_string(),
                m.coverage_ratio.to_string(),
                g(|x| x.accuracy_cm),
                g(|x| x.completion_cm),
                g(|x| x.recall),
                m.path_length_m.to_string(),
                m.views_used.to_string(),
                m.iterations.to_string(),
                m.termination.as_str().to_string(),
            ])?;
            table.flush()?;
        }
    }
    Ok(())
}
