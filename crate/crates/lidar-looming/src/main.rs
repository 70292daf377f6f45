//! Command-line driver for the looming pipeline: simulate synthetic
//! scans, project clouds, estimate looming by either method, classify
//! threat zones, evaluate against ground truth, and benchmark.
//!
//! Exit codes: 0 on success, 1 on validation or parse errors, 2 when an
//! evaluation or benchmark bound is not met.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use lidar_looming::config::{self, RunConfig};
use lidar_looming::io;
use lidar_looming::looming::{
    classify_threat, compare_maps, loom_from_grids_clamped, loom_from_velocity_clamped, EdgeMask,
    LoomingMap, DEFAULT_EDGE_JUMP,
};
use lidar_looming::range_image::{decimate, fill_gaps, project_with, ProjectOptions, RangeImage};
use lidar_looming::synth::{
    ground_truth_map_clamped, simulate_scan_with, Scene, SimOptions, VehicleState,
};
use lidar_looming::Vec3;

#[derive(Parser)]
#[command(
    name = "looming",
    version,
    about = "Looming estimation from LiDAR range data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Config file (flat key=value); flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Grid dimensions as WxH.
    #[arg(long, global = true, value_name = "WxH")]
    grid: Option<String>,

    /// Scan separation in seconds.
    #[arg(long, global = true, value_name = "S")]
    dt: Option<f64>,

    /// Threat thresholds as L1,L2,L3 (s⁻¹).
    #[arg(long, global = true, value_name = "L1,L2,L3")]
    thresholds: Option<String>,

    /// Symmetric looming clamp (s⁻¹).
    #[arg(long, global = true, value_name = "L")]
    clamp: Option<f64>,

    /// Max row gap filled by interpolation, cells (0 = off).
    #[arg(long, global = true, value_name = "N")]
    fill: Option<usize>,

    /// Decimation factors as A,B (azimuth, elevation).
    #[arg(long, global = true, value_name = "A,B")]
    decimate: Option<String>,

    /// Color scale saturation (s⁻¹).
    #[arg(long, global = true, value_name = "L")]
    scale: Option<f64>,

    /// Simulated range noise sigma in meters.
    #[arg(long, global = true, value_name = "SIGMA")]
    noise: Option<f64>,

    /// Random seed for simulated noise.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Edge exclusion radius for evaluation, cells.
    #[arg(long, global = true, value_name = "N")]
    edge: Option<usize>,

    /// Sensor-frame translation velocity as X,Y,Z (m/s).
    #[arg(long, global = true, value_name = "X,Y,Z")]
    velocity: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render synthetic scans and ground-truth looming maps per frame.
    Simulate {
        /// Output directory for scan_####.rgrid / truth_####.lgrid.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Scene file; the built-in demo scene when omitted.
        #[arg(long, value_name = "FILE")]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 2, value_name = "N")]
        frames: usize,
        /// Initial vehicle position as X,Y,Z.
        #[arg(long, value_name = "X,Y,Z")]
        start: Option<String>,
        /// Initial heading about z, radians.
        #[arg(long, default_value_t = 0.0, value_name = "RAD")]
        heading: f64,
        /// Yaw rate about z, rad/s.
        #[arg(long, default_value_t = 0.0, value_name = "RAD_S")]
        yaw_rate: f64,
    },
    /// Project a Velodyne .bin cloud onto a range-image grid.
    Project {
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Timestamp stored in the grid header, seconds.
        #[arg(long, default_value_t = 0.0, value_name = "S")]
        timestamp: f64,
    },
    /// Looming from two consecutive range grids.
    LoomGrid {
        prev: PathBuf,
        curr: PathBuf,
        /// Output .lgrid path; a .ppm rendering lands next to it.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Instantaneous looming from per-point range plus ego velocity.
    LoomImu {
        /// A .bin cloud or a .rgrid scan.
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Ego-motion CSV; --velocity is used when omitted.
        #[arg(long, value_name = "FILE")]
        ego: Option<PathBuf>,
        /// Lookup time into the ego-motion log, seconds.
        #[arg(long, value_name = "S")]
        time: Option<f64>,
    },
    /// Classify a looming map into threat zones.
    Threat {
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Compare an estimated looming map against a reference.
    Eval {
        est: PathBuf,
        truth: PathBuf,
        /// Range grid used to exclude cells near occlusion edges.
        #[arg(long, value_name = "RGRID")]
        ranges: Option<PathBuf>,
        #[arg(long, value_name = "V")]
        max_median: Option<f64>,
        #[arg(long, value_name = "V")]
        max_p90: Option<f64>,
        #[arg(long, value_name = "V")]
        min_frac10: Option<f64>,
    },
    /// Time one project + grid-looming pair.
    Bench {
        prev: PathBuf,
        curr: PathBuf,
        #[arg(long, default_value_t = 20, value_name = "N")]
        iterations: usize,
        /// Fail (exit 2) if the median total exceeds this budget.
        #[arg(long, value_name = "MS")]
        budget_ms: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(grid) = &cli.grid {
        let (w, h) = config::parse_grid_dims(grid).map_err(|e| anyhow!(e))?;
        cfg.width = w;
        cfg.height = h;
    }
    if let Some(dt) = cli.dt {
        cfg.dt = dt;
    }
    if let Some(th) = &cli.thresholds {
        cfg.thresholds = config::parse_triple_nums(th).map_err(|e| anyhow!(e))?;
    }
    if let Some(clamp) = cli.clamp {
        cfg.clamp = clamp;
    }
    if let Some(fill) = cli.fill {
        cfg.fill = fill;
    }
    if let Some(dec) = &cli.decimate {
        cfg.decimate = config::parse_int_pair(dec).map_err(|e| anyhow!(e))?;
    }
    if let Some(scale) = cli.scale {
        cfg.scale = scale;
    }
    if let Some(noise) = cli.noise {
        cfg.noise_sigma = noise;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(edge) = cli.edge {
        cfg.edge = edge;
    }
    if let Some(vel) = &cli.velocity {
        cfg.velocity = config::parse_velocity(vel).map_err(|e| anyhow!(e))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    let dt_flag = cli.dt;
    match cli.cmd {
        Cmd::Simulate {
            out,
            scene,
            frames,
            start,
            heading,
            yaw_rate,
        } => cmd_simulate(
            &cfg,
            &out,
            scene.as_deref(),
            frames,
            start.as_deref(),
            heading,
            yaw_rate,
        ),
        Cmd::Project {
            input,
            out,
            timestamp,
        } => cmd_project(&cfg, &input, &out, timestamp),
        Cmd::LoomGrid { prev, curr, out } => cmd_loom_grid(&cfg, &prev, &curr, &out, dt_flag),
        Cmd::LoomImu {
            input,
            out,
            ego,
            time,
        } => cmd_loom_imu(&cfg, &input, &out, ego.as_deref(), time),
        Cmd::Threat { input, out } => cmd_threat(&cfg, &input, &out),
        Cmd::Eval {
            est,
            truth,
            ranges,
            max_median,
            max_p90,
            min_frac10,
        } => cmd_eval(
            &cfg,
            &est,
            &truth,
            ranges.as_deref(),
            max_median,
            max_p90,
            min_frac10,
        ),
        Cmd::Bench {
            prev,
            curr,
            iterations,
            budget_ms,
        } => cmd_bench(&cfg, &prev, &curr, iterations, budget_ms),
    }
}

fn cmd_simulate(
    cfg: &RunConfig,
    out: &Path,
    scene_path: Option<&Path>,
    frames: usize,
    start: Option<&str>,
    heading: f64,
    yaw_rate: f64,
) -> Result<ExitCode> {
    let scene = match scene_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading scene {}", path.display()))?;
            Scene::parse(&text)?
        }
        None => Scene::demo(),
    };
    let position = match start {
        Some(s) => config::parse_velocity(s).map_err(|e| anyhow!(e))?,
        None => Vec3::ZERO,
    };
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let spec = cfg.grid_spec()?;
    let mut state = VehicleState::new(position, heading, cfg.velocity, yaw_rate);
    for frame in 0..frames {
        let at_time = frame as f64 * cfg.dt;
        let opts = SimOptions {
            r_max: cfg.r_max,
            noise_sigma: cfg.noise_sigma,
            seed: cfg.seed.wrapping_add(frame as u64),
        };
        let scan = simulate_scan_with(&scene, &state, spec, at_time, opts);
        let truth = ground_truth_map_clamped(&scene, &state, spec, at_time, cfg.r_max, cfg.clamp);
        io::write_range_grid(&scan, &out.join(format!("scan_{frame:04}.rgrid")))?;
        io::write_looming_grid(&truth, &out.join(format!("truth_{frame:04}.lgrid")))?;
        state = state.advanced(cfg.dt);
    }
    println!("frames={frames} out={}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_project(cfg: &RunConfig, input: &Path, out: &Path, timestamp: f64) -> Result<ExitCode> {
    let (mut cloud, dropped_non_finite) =
        io::read_velodyne_bin(input).with_context(|| format!("reading {}", input.display()))?;
    cloud.timestamp = timestamp;
    let opts = ProjectOptions {
        r_max: cfg.r_max,
        ..Default::default()
    };
    let (img, stats) = project_with(&cloud, cfg.grid_spec()?, opts);
    io::write_range_grid(&img, out)?;
    println!(
        "binned={} dropped_fov={} dropped_range={} dropped_origin={} dropped_non_finite={}",
        stats.binned,
        stats.dropped_out_of_fov,
        stats.dropped_beyond_range,
        stats.dropped_at_origin,
        dropped_non_finite
    );
    Ok(ExitCode::SUCCESS)
}

/// Apply the configured conditioning (gap fill, decimation) to a scan.
fn condition(cfg: &RunConfig, img: RangeImage) -> Result<RangeImage> {
    let filled = if cfg.fill > 0 {
        fill_gaps(&img, cfg.fill)
    } else {
        img
    };
    if cfg.decimate != (1, 1) {
        Ok(decimate(&filled, cfg.decimate.0, cfg.decimate.1)?)
    } else {
        Ok(filled)
    }
}

fn cmd_loom_grid(
    cfg: &RunConfig,
    prev_path: &Path,
    curr_path: &Path,
    out: &Path,
    dt_flag: Option<f64>,
) -> Result<ExitCode> {
    let prev = io::read_range_grid(prev_path)
        .with_context(|| format!("reading {}", prev_path.display()))?;
    let curr = io::read_range_grid(curr_path)
        .with_context(|| format!("reading {}", curr_path.display()))?;
    let header_dt = curr.timestamp - prev.timestamp;
    let dt = match dt_flag {
        Some(dt) => dt,
        None if header_dt > 0.0 => header_dt,
        None => cfg.dt,
    };
    let prev = condition(cfg, prev)?;
    let curr = condition(cfg, curr)?;
    let map = loom_from_grids_clamped(&prev, &curr, dt, cfg.clamp)?;
    write_map_outputs(cfg, &map, out)?;
    println!(
        "cells={} clamped={} dt={}",
        map.valid_count(),
        map.clamped,
        dt
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_loom_imu(
    cfg: &RunConfig,
    input: &Path,
    out: &Path,
    ego: Option<&Path>,
    time: Option<f64>,
) -> Result<ExitCode> {
    let is_bin = input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("bin"));
    let (cloud, spec) = if is_bin {
        let (cloud, _) =
            io::read_velodyne_bin(input).with_context(|| format!("reading {}", input.display()))?;
        (cloud, cfg.grid_spec()?)
    } else {
        let img =
            io::read_range_grid(input).with_context(|| format!("reading {}", input.display()))?;
        let spec = *img.spec();
        (img.to_point_cloud(), spec)
    };
    let t = match ego {
        Some(path) => {
            let log =
                io::read_ego_motion(path).with_context(|| format!("reading {}", path.display()))?;
            log.velocity_at(time.unwrap_or(cloud.timestamp))
        }
        None => cfg.velocity,
    };
    let map = loom_from_velocity_clamped(&cloud, t, spec, cfg.r_max, cfg.clamp);
    write_map_outputs(cfg, &map, out)?;
    println!(
        "cells={} clamped={} velocity={},{},{}",
        map.valid_count(),
        map.clamped,
        t.x,
        t.y,
        t.z
    );
    Ok(ExitCode::SUCCESS)
}

fn write_map_outputs(cfg: &RunConfig, map: &LoomingMap, out: &Path) -> Result<()> {
    io::write_looming_grid(map, out)?;
    let scale = io::ColorScale::new(cfg.scale)?;
    io::write_looming_ppm(map, scale, &out.with_extension("ppm"))?;
    Ok(())
}

fn cmd_threat(cfg: &RunConfig, input: &Path, out: &Path) -> Result<ExitCode> {
    let map =
        io::read_looming_grid(input).with_context(|| format!("reading {}", input.display()))?;
    let threat = classify_threat(&map, cfg.threat_thresholds()?);
    io::write_threat_ppm(&threat, out)?;
    let [none, low, medium, high] = threat.class_counts();
    println!("none={none} low={low} medium={medium} high={high}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(
    cfg: &RunConfig,
    est_path: &Path,
    truth_path: &Path,
    ranges: Option<&Path>,
    max_median: Option<f64>,
    max_p90: Option<f64>,
    min_frac10: Option<f64>,
) -> Result<ExitCode> {
    let est = io::read_looming_grid(est_path)
        .with_context(|| format!("reading {}", est_path.display()))?;
    let truth = io::read_looming_grid(truth_path)
        .with_context(|| format!("reading {}", truth_path.display()))?;
    let mask = match ranges {
        Some(path) => {
            let img =
                io::read_range_grid(path).with_context(|| format!("reading {}", path.display()))?;
            Some(EdgeMask::from_range_discontinuities(
                &img,
                DEFAULT_EDGE_JUMP,
                cfg.edge,
            ))
        }
        None => None,
    };
    let stats = compare_maps(&est, &truth, mask.as_ref())?;
    println!(
        "median={} p90={} frac10={} cells={} clamped={}",
        stats.median_abs, stats.p90_abs, stats.frac_within_10pct, stats.cells, est.clamped
    );
    if stats.is_empty() {
        eprintln!("no comparable cells: the valid sets are disjoint");
        return Ok(ExitCode::from(2));
    }
    let mut failed = false;
    if let Some(bound) = max_median {
        if stats.median_abs.is_nan() || stats.median_abs > bound {
            eprintln!("bound failed: median {} > {}", stats.median_abs, bound);
            failed = true;
        }
    }
    if let Some(bound) = max_p90 {
        if stats.p90_abs.is_nan() || stats.p90_abs > bound {
            eprintln!("bound failed: p90 {} > {}", stats.p90_abs, bound);
            failed = true;
        }
    }
    if let Some(bound) = min_frac10 {
        if stats.frac_within_10pct.is_nan() || stats.frac_within_10pct < bound {
            eprintln!(
                "bound failed: frac10 {} < {}",
                stats.frac_within_10pct, bound
            );
            failed = true;
        }
    }
    Ok(if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn load_scan_for_bench(cfg: &RunConfig, path: &Path) -> Result<RangeImage> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("bin"))
    {
        let (cloud, _) =
            io::read_velodyne_bin(path).with_context(|| format!("reading {}", path.display()))?;
        let opts = ProjectOptions {
            r_max: cfg.r_max,
            ..Default::default()
        };
        Ok(project_with(&cloud, cfg.grid_spec()?, opts).0)
    } else {
        Ok(io::read_range_grid(path).with_context(|| format!("reading {}", path.display()))?)
    }
}

fn median_ms(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    samples[(samples.len() - 1) / 2]
}

fn cmd_bench(
    cfg: &RunConfig,
    prev_path: &Path,
    curr_path: &Path,
    iterations: usize,
    budget_ms: Option<f64>,
) -> Result<ExitCode> {
    if iterations == 0 {
        bail!("iterations must be >= 1");
    }
    let prev = load_scan_for_bench(cfg, prev_path)?;
    let curr = load_scan_for_bench(cfg, curr_path)?;
    if prev.spec() != curr.spec() {
        bail!("scan grids do not match");
    }
    let spec = *prev.spec();
    let cloud = curr.to_point_cloud();
    let opts = ProjectOptions {
        r_max: cfg.r_max,
        ..Default::default()
    };
    let mut project_samples = Vec::with_capacity(iterations);
    let mut loom_samples = Vec::with_capacity(iterations);
    let mut cells = 0usize;
    for _ in 0..iterations {
        let start = Instant::now();
        let img = project_with(&cloud, spec, opts).0;
        let mid = Instant::now();
        let map = loom_from_grids_clamped(&prev, &img, cfg.dt, cfg.clamp)?;
        let end = Instant::now();
        project_samples.push(mid.duration_since(start).as_secs_f64() * 1e3);
        loom_samples.push(end.duration_since(mid).as_secs_f64() * 1e3);
        cells = map.valid_count();
    }
    let project_ms = median_ms(&mut project_samples);
    let loom_ms = median_ms(&mut loom_samples);
    let total_ms = project_ms + loom_ms;
    println!(
        "project_ms={project_ms:.3} loom_ms={loom_ms:.3} total_ms={total_ms:.3} \
         iterations={iterations} grid={}x{} cells={cells}",
        spec.width, spec.height
    );
    if let Some(budget) = budget_ms {
        if total_ms > budget {
            eprintln!("bound failed: total {total_ms:.3} ms > budget {budget} ms");
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}
