//! Implementations behind the `preint` subcommands. Everything is
//! deterministic given its configuration; randomness enters only through the
//! simulate seed.

use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::Vector3;

use preint_core::dataset::{
    acceleration_cdf, cdf_percentile, export_features, load_imu, load_trajectory, make_labels,
    write_canonical_imu, write_canonical_trajectory,
};
use preint_core::eval::{kitti_relative_errors, normalized_displacement_error, KITTI_LENGTHS};
use preint_core::imu::{corrupt, simulate_trajectory, Gravity, ImuSample, NoiseSpec, PoseState};
use preint_core::oracle::integrate_fine_extrapolated;
use preint_core::preint::{preintegrate, window_features, Method};
use preint_core::{Error, Result};

use crate::config::{pick, resolve_input, FileConfig, SegmentSpec};

fn parse_vec3(s: &str) -> std::result::Result<Vector3<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected `x,y,z`, found `{s}`"));
    }
    let mut v = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse()
            .map_err(|e| format!("component {i}: {e}"))?;
    }
    Ok(Vector3::from(v))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Motion preset: stationary | circle | dynamic (or configure segments in
    /// the config file)
    #[arg(long)]
    pub preset: Option<String>,
    /// Duration in seconds (presets only)
    #[arg(long)]
    pub duration: Option<f64>,
    /// Sample rate in Hz
    #[arg(long)]
    pub rate: Option<f64>,
    /// RNG seed for the noise model
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gravity vector `gx,gy,gz` (m/s²)
    #[arg(long, value_parser = parse_vec3)]
    pub gravity: Option<Vector3<f64>>,
    /// Gyro noise std (rad/s)
    #[arg(long)]
    pub noise_gyro: Option<f64>,
    /// Accelerometer noise std (m/s²)
    #[arg(long)]
    pub noise_accel: Option<f64>,
    /// Gyro bias random-walk std (rad/s per √s)
    #[arg(long)]
    pub walk_gyro: Option<f64>,
    /// Accelerometer bias random-walk std (m/s² per √s)
    #[arg(long)]
    pub walk_accel: Option<f64>,
    /// Output IMU CSV path
    #[arg(long, default_value = "imu.csv")]
    pub out_imu: PathBuf,
    /// Output trajectory CSV path
    #[arg(long, default_value = "trajectory.csv")]
    pub out_traj: PathBuf,
}

struct Preset {
    segments: Vec<SegmentSpec>,
    initial: PoseState,
    gravity: Gravity,
}

fn preset(name: &str, duration: f64) -> Result<Preset> {
    let constant = |gyro: [f64; 3], accel: [f64; 3]| SegmentSpec {
        duration,
        gyro,
        accel,
    };
    match name {
        "stationary" => Ok(Preset {
            segments: vec![constant([0.0; 3], [0.0; 3])],
            initial: PoseState::origin(0.0),
            gravity: Gravity::standard(),
        }),
        // level circle of radius 2 m at 1 rad/s; gravity off so the commanded
        // body signals stay exactly constant
        "circle" => Ok(Preset {
            segments: vec![constant([0.0, 0.0, 1.0], [2.0, 0.0, 0.0])],
            initial: PoseState::new(
                0.0,
                preint_core::Rotation::identity(),
                Vector3::new(0.0, -2.0, 0.0),
                Vector3::zeros(),
            ),
            gravity: Gravity::zero(),
        }),
        "dynamic" => Ok(Preset {
            segments: vec![constant([0.9, -0.6, 1.2], [1.5, -0.8, 0.6])],
            initial: PoseState::origin(0.0),
            gravity: Gravity::standard(),
        }),
        other => Err(Error::invalid(format!(
            "unknown preset `{other}` (expected stationary | circle | dynamic)"
        ))),
    }
}

pub fn cmd_simulate(args: &SimulateArgs, file: &FileConfig) -> Result<()> {
    let cfg = &file.simulate;
    let rate = pick(args.rate, cfg.rate, 100.0);
    let seed = pick(args.seed, cfg.seed, 0);
    let duration = pick(args.duration, cfg.duration, 10.0);

    let (segments, initial, mut gravity) =
        if let Some(name) = args.preset.clone().or_else(|| cfg.preset.clone()) {
            let p = preset(&name, duration)?;
            (p.segments, p.initial, p.gravity)
        } else if !cfg.segments.is_empty() {
            (
                cfg.segments.clone(),
                PoseState::origin(0.0),
                Gravity::standard(),
            )
        } else {
            return Err(Error::invalid(
                "simulate: give --preset or a [[simulate.segments]] list in the config file",
            ));
        };
    if let Some(g) = args.gravity.or(cfg.gravity.map(Vector3::from)) {
        gravity = Gravity(g);
    }

    let segments: Vec<_> = segments.iter().map(SegmentSpec::to_segment).collect();
    let (trajectory, clean) = simulate_trajectory(&segments, &initial, rate, &gravity)?;

    let noise = NoiseSpec {
        gyro_noise_std: pick(args.noise_gyro, cfg.noise_gyro, 0.0),
        accel_noise_std: pick(args.noise_accel, cfg.noise_accel, 0.0),
        gyro_bias_walk_std: pick(args.walk_gyro, cfg.walk_gyro, 0.0),
        accel_bias_walk_std: pick(args.walk_accel, cfg.walk_accel, 0.0),
        initial_gyro_bias: Vector3::zeros(),
        initial_accel_bias: Vector3::zeros(),
        seed,
    };
    noise.validate()?;
    let samples = corrupt(&clean, &noise);

    write_canonical_imu(&samples, &args.out_imu)?;
    write_canonical_trajectory(&trajectory, &args.out_traj)?;
    println!(
        "simulated {} samples at {rate} Hz ({} poses) -> {}, {}",
        samples.len(),
        trajectory.len(),
        args.out_imu.display(),
        args.out_traj.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// extract

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// IMU input path
    #[arg(long)]
    pub imu: PathBuf,
    /// IMU input format: canonical | kitti_oxts | oxford_io
    #[arg(long, default_value = "canonical")]
    pub format: String,
    /// Ground-truth trajectory path
    #[arg(long)]
    pub gt: PathBuf,
    /// Ground-truth format: canonical | kitti_poses
    #[arg(long, default_value = "canonical")]
    pub gt_format: String,
    /// Preintegration method: forster | accurate
    #[arg(long)]
    pub method: Option<String>,
    /// Window length in samples
    #[arg(long)]
    pub window: Option<usize>,
    /// Preintegration step in samples
    #[arg(long)]
    pub step: Option<usize>,
    /// Output feature CSV path
    #[arg(long, default_value = "features.csv")]
    pub out: PathBuf,
}

pub fn cmd_extract(args: &ExtractArgs, file: &FileConfig) -> Result<()> {
    let cfg = &file.extract;
    let method: Method = pick(args.method.clone(), cfg.method.clone(), "forster".into()).parse()?;
    let window = pick(args.window, cfg.window, 200);
    let step = pick(args.step, cfg.step, 10);

    let stream = load_imu(&resolve_input(&args.imu), args.format.parse()?)?;
    let gt = load_trajectory(&resolve_input(&args.gt), args.gt_format.parse()?)?;

    // keep only samples whose hold interval the ground truth can label
    let dt = if stream.samples.len() >= 2 {
        median_dt(&stream.samples)
    } else {
        0.0
    };
    let usable: Vec<ImuSample> = stream
        .samples
        .iter()
        .copied()
        .filter(|s| s.t >= gt.start_time() && s.t + dt <= gt.end_time() + 1e-9)
        .collect();
    let dropped = stream.samples.len() - usable.len();
    if dropped > 0 {
        eprintln!("warning: dropped {dropped} samples outside the ground-truth span");
    }

    let windows = window_features(&usable, window, step, method)?;
    let chunks_per_window = window / step;
    let n_chunks = if windows.is_empty() {
        0
    } else {
        windows.len() + chunks_per_window - 1
    };

    let labels = if n_chunks > 0 {
        let mut times: Vec<f64> = (0..n_chunks).map(|c| usable[c * step].t).collect();
        times.push(usable[(n_chunks - 1) * step].t + step as f64 * dt);
        make_labels(&gt, &times)?
    } else {
        eprintln!(
            "warning: stream of {} usable samples is shorter than one {window}-sample window",
            usable.len()
        );
        Vec::new()
    };

    let rows = export_features(&windows, &labels, &args.out)?;
    println!(
        "effective rate: {:.3} Hz, windows: {}, features per window: {}, rows written: {rows} -> {}",
        stream.effective_rate_hz,
        windows.len(),
        chunks_per_window,
        args.out.display()
    );
    Ok(())
}

fn median_dt(samples: &[ImuSample]) -> f64 {
    let mut gaps: Vec<f64> = samples.windows(2).map(|p| p[1].t - p[0].t).collect();
    gaps.sort_by(f64::total_cmp);
    gaps[gaps.len() / 2]
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Predicted trajectory path
    #[arg(long)]
    pub pred: PathBuf,
    /// Predicted trajectory format: canonical | kitti_poses
    #[arg(long, default_value = "canonical")]
    pub pred_format: String,
    /// Ground-truth trajectory path
    #[arg(long)]
    pub gt: PathBuf,
    /// Ground-truth format: canonical | kitti_poses
    #[arg(long, default_value = "canonical")]
    pub gt_format: String,
    /// Metric: kitti | displacement
    #[arg(long)]
    pub metric: String,
    /// Sub-sequence lengths in meters (kitti metric)
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<f64>>,
    /// Batch size in IMU samples (displacement metric)
    #[arg(long)]
    pub batch: Option<usize>,
    /// Samples per trajectory step (displacement metric)
    #[arg(long)]
    pub step: Option<usize>,
    /// Optional report CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs, file: &FileConfig) -> Result<()> {
    let cfg = &file.evaluate;
    let pred = load_trajectory(&resolve_input(&args.pred), args.pred_format.parse()?)?;
    let gt = load_trajectory(&resolve_input(&args.gt), args.gt_format.parse()?)?;
    let seq = args
        .pred
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pred".into());

    let csv = match args.metric.as_str() {
        "kitti" => {
            let lengths = pick(
                args.lengths.clone(),
                cfg.lengths.clone(),
                KITTI_LENGTHS.to_vec(),
            );
            let report = kitti_relative_errors(&pred, &gt, &lengths)?;
            if report.is_empty() {
                eprintln!("warning: trajectory shorter than the smallest sub-sequence length");
            }
            print!("{}", report.table(&seq));
            report.to_csv(&seq)
        }
        "displacement" => {
            let batch = pick(args.batch, cfg.batch, 200);
            let step = pick(args.step, cfg.step, 10);
            let report = normalized_displacement_error(&pred, &gt, batch, step)?;
            if report.batches_skipped > 0 {
                eprintln!(
                    "note: skipped {} near-stationary batches",
                    report.batches_skipped
                );
            }
            print!("{}", report.table(&seq));
            report.to_csv(&seq)
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown metric `{other}` (expected kitti | displacement)"
            )))
        }
    };
    if let Some(out) = &args.out {
        write_text(out, &csv)?;
        println!("report -> {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// compare

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Motion preset generating constant body-frame signals (default dynamic)
    #[arg(long)]
    pub preset: Option<String>,
    /// Compare on a recorded stream instead (single row at its native rate)
    #[arg(long)]
    pub imu: Option<PathBuf>,
    /// IMU input format for --imu
    #[arg(long, default_value = "canonical")]
    pub format: String,
    /// Sample intervals to sweep (s), preset mode
    #[arg(long, value_delimiter = ',')]
    pub dts: Option<Vec<f64>>,
    /// Batch duration per sweep point (s)
    #[arg(long)]
    pub duration: Option<f64>,
    /// Oracle substeps per sample (Richardson-extrapolated)
    #[arg(long)]
    pub substeps: Option<usize>,
    /// Output CSV path
    #[arg(long, default_value = "compare.csv")]
    pub out: PathBuf,
}

pub const COMPARE_HEADER: &str = "dt,dp_err_forster,dp_err_accurate,dv_err_forster,dv_err_accurate";

fn compare_row(samples: &[ImuSample], dt: f64, substeps: usize) -> Result<String> {
    let forster = preintegrate(samples, dt, Method::Forster)?;
    let accurate = preintegrate(samples, dt, Method::Accurate)?;
    // From a zeroed state with g = 0 the oracle's end state *is* the feature.
    let oracle = integrate_fine_extrapolated(
        &PoseState::origin(samples[0].t),
        samples,
        dt,
        substeps,
        &Gravity::zero(),
    );
    Ok(format!(
        "{dt},{:.12e},{:.12e},{:.12e},{:.12e}",
        (forster.delta_p - oracle.position).norm(),
        (accurate.delta_p - oracle.position).norm(),
        (forster.delta_v - oracle.velocity).norm(),
        (accurate.delta_v - oracle.velocity).norm(),
    ))
}

pub fn cmd_compare(args: &CompareArgs, file: &FileConfig) -> Result<()> {
    let cfg = &file.compare;
    let substeps = pick(args.substeps, cfg.substeps, 10_000);
    let mut lines = vec![COMPARE_HEADER.to_string()];

    if let Some(imu) = &args.imu {
        let stream = load_imu(&resolve_input(imu), args.format.parse()?)?;
        if stream.samples.len() < 2 {
            return Err(Error::invalid("compare: stream too short"));
        }
        let dt = median_dt(&stream.samples);
        lines.push(compare_row(&stream.samples, dt, substeps)?);
    } else {
        let name = args.preset.clone().unwrap_or_else(|| "dynamic".into());
        let duration = pick(args.duration, cfg.duration, 1.0);
        let p = preset(&name, duration)?;
        let seg = p.segments[0].to_segment();
        let dts = pick(
            args.dts.clone(),
            cfg.dts.clone(),
            vec![0.2, 0.1, 0.05, 0.025, 0.0125],
        );
        for &dt in &dts {
            if dt.is_nan() || dt <= 0.0 {
                return Err(Error::invalid(format!("compare: bad dt {dt}")));
            }
            let n = (duration / dt).round().max(1.0) as usize;
            let samples: Vec<ImuSample> = (0..n)
                .map(|k| ImuSample::new(k as f64 * dt, seg.gyro, seg.accel))
                .collect();
            lines.push(compare_row(&samples, dt, substeps)?);
        }
    }

    let text = lines.join("\n") + "\n";
    write_text(&args.out, &text)?;
    print!("{text}");
    Ok(())
}

// ---------------------------------------------------------------------------
// cdf

#[derive(Args, Debug)]
pub struct CdfArgs {
    /// IMU input path
    #[arg(long)]
    pub imu: PathBuf,
    /// IMU input format: canonical | kitti_oxts | oxford_io
    #[arg(long, default_value = "canonical")]
    pub format: String,
    /// Ground-truth trajectory path (orientation source)
    #[arg(long)]
    pub gt: PathBuf,
    /// Ground-truth format: canonical | kitti_poses
    #[arg(long, default_value = "canonical")]
    pub gt_format: String,
    /// Gravity vector `gx,gy,gz` (m/s²)
    #[arg(long, value_parser = parse_vec3)]
    pub gravity: Option<Vector3<f64>>,
    /// Clip the stream to the ground-truth span instead of failing
    #[arg(long)]
    pub clip: bool,
    /// Output CDF CSV path
    #[arg(long, default_value = "cdf.csv")]
    pub out: PathBuf,
}

pub fn cmd_cdf(args: &CdfArgs, _file: &FileConfig) -> Result<()> {
    let stream = load_imu(&resolve_input(&args.imu), args.format.parse()?)?;
    let gt = load_trajectory(&resolve_input(&args.gt), args.gt_format.parse()?)?;
    let gravity = Gravity(args.gravity.unwrap_or(Gravity::standard().0));

    let samples: Vec<ImuSample> = if args.clip {
        let kept: Vec<ImuSample> = stream
            .samples
            .iter()
            .copied()
            .filter(|s| s.t >= gt.start_time() && s.t <= gt.end_time())
            .collect();
        let dropped = stream.samples.len() - kept.len();
        if dropped > 0 {
            eprintln!("warning: clipped {dropped} samples outside the ground-truth span");
        }
        kept
    } else {
        stream.samples
    };

    let cdf = acceleration_cdf(&samples, &gravity, &gt)?;
    let mut text = String::from("threshold_mps2,cumulative_fraction\n");
    for (thr, frac) in &cdf {
        text.push_str(&format!("{thr:.9e},{frac:.9}\n"));
    }
    write_text(&args.out, &text)?;

    for q in [0.5, 0.9, 0.99] {
        if let Some(p) = cdf_percentile(&cdf, q) {
            println!("p{:02.0}: {p:.4} m/s²", q * 100.0);
        }
    }
    println!("max: {:.4} m/s² -> {}", cdf[99].0, args.out.display());
    Ok(())
}
