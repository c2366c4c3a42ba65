//! IMU stream loaders and the canonical CSV writer.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::imu::ImuSample;

pub const CANONICAL_IMU_HEADER: &str = "t,gx,gy,gz,ax,ay,az";

/// Source format of an IMU stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImuFormat {
    /// Canonical CSV, header `t,gx,gy,gz,ax,ay,az`.
    Canonical,
    /// KITTI raw OXTS directory (`timestamps.txt` + `data/*.txt`): body-frame
    /// rates `wf,wl,wu` (fields 20–22) and accelerations `af,al,au`
    /// (fields 14–16); timestamps become seconds since the first record.
    KittiOxts,
    /// OxfordIO (OxIOD) IMU CSV: 16 header-less columns
    /// `time, attitude(3), rotation_rate(3), gravity(3), user_acc(3),
    /// magnetic(3)`; the specific force is `(user_acc + gravity)·9.80665`.
    OxfordIo,
}

impl std::str::FromStr for ImuFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(ImuFormat::Canonical),
            "kitti_oxts" => Ok(ImuFormat::KittiOxts),
            "oxford_io" => Ok(ImuFormat::OxfordIo),
            other => Err(Error::invalid(format!("unknown IMU format `{other}`"))),
        }
    }
}

/// A loaded stream plus bookkeeping from the loader.
#[derive(Clone, Debug)]
pub struct ImuStream {
    pub samples: Vec<ImuSample>,
    /// `(n-1) / (t_last - t_first)`; 0 for streams under two samples.
    pub effective_rate_hz: f64,
    /// Byte-identical duplicate rows dropped (adapter formats only).
    pub deduplicated: usize,
}

/// Loads an IMU stream. The result is strictly increasing in time; corrupt
/// input (out-of-order or conflicting timestamps, non-finite values) is an
/// error carrying the offending location.
pub fn load_imu(path: &Path, format: ImuFormat) -> Result<ImuStream> {
    let (samples, strict) = match format {
        ImuFormat::Canonical => (load_canonical(path)?, true),
        ImuFormat::KittiOxts => (load_kitti_oxts(path)?, false),
        ImuFormat::OxfordIo => (load_oxford_io(path)?, false),
    };
    finalize(samples, strict, path)
}

fn finalize(samples: Vec<ImuSample>, strict: bool, path: &Path) -> Result<ImuStream> {
    let mut out: Vec<ImuSample> = Vec::with_capacity(samples.len());
    let mut deduplicated = 0usize;
    for (row, s) in samples.into_iter().enumerate() {
        if let Some(last) = out.last() {
            if s.t == last.t && !strict {
                if s == *last {
                    deduplicated += 1;
                    continue;
                }
                return Err(Error::parse(
                    path,
                    row + 1,
                    format!("conflicting records share timestamp t = {}", s.t),
                ));
            }
            if s.t <= last.t {
                return Err(Error::parse(
                    path,
                    row + 1,
                    format!("non-monotone time: t = {} after t = {}", s.t, last.t),
                ));
            }
        }
        out.push(s);
    }
    let effective_rate_hz = if out.len() >= 2 {
        (out.len() - 1) as f64 / (out[out.len() - 1].t - out[0].t)
    } else {
        0.0
    };
    Ok(ImuStream {
        samples: out,
        effective_rate_hz,
        deduplicated,
    })
}

pub(crate) fn parse_field(path: &Path, line: usize, name: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("column {name}: cannot parse `{raw}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            path,
            line,
            format!("column {name}: non-finite value `{raw}`"),
        ));
    }
    Ok(v)
}

fn load_canonical(path: &Path) -> Result<Vec<ImuSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))?;
    let mut samples = Vec::new();
    let names = ["t", "gx", "gy", "gz", "ax", "ay", "az"];

    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(i + 1);
        if i == 0 {
            let header = record.iter().collect::<Vec<_>>().join(",");
            if header != CANONICAL_IMU_HEADER {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected header `{CANONICAL_IMU_HEADER}`, found `{header}`"),
                ));
            }
            continue;
        }
        if record.len() != 7 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 7 columns, found {}", record.len()),
            ));
        }
        let mut v = [0.0f64; 7];
        for (j, raw) in record.iter().enumerate() {
            v[j] = parse_field(path, line, names[j], raw)?;
        }
        samples.push(ImuSample::new(
            v[0],
            Vector3::new(v[1], v[2], v[3]),
            Vector3::new(v[4], v[5], v[6]),
        ));
    }
    Ok(samples)
}

/// Writes the canonical IMU CSV with 17-significant-digit floats, so a
/// write/read cycle reproduces every f64 exactly.
pub fn write_canonical_imu(samples: &[ImuSample], path: &Path) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{CANONICAL_IMU_HEADER}").map_err(|e| Error::io(path, e))?;
    for s in samples {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.t, s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// KITTI OXTS: field indices in each per-frame text file (30 values).
const OXTS_AF: usize = 14;
const OXTS_WF: usize = 20;
const OXTS_MIN_FIELDS: usize = 23;

fn load_kitti_oxts(dir: &Path) -> Result<Vec<ImuSample>> {
    let timestamps_path = dir.join("timestamps.txt");
    let stamps_raw =
        std::fs::read_to_string(&timestamps_path).map_err(|e| Error::io(&timestamps_path, e))?;
    let mut stamps = Vec::new();
    for (i, line) in stamps_raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let dt = chrono::NaiveDateTime::parse_from_str(line, "%Y-%m-%d %H:%M:%S%.f")
            .map_err(|e| Error::parse(&timestamps_path, i + 1, format!("bad timestamp: {e}")))?;
        stamps.push(dt);
    }
    if stamps.is_empty() {
        return Err(Error::parse(&timestamps_path, 1, "no timestamps"));
    }

    let data_dir = dir.join("data");
    let mut files: Vec<_> = std::fs::read_dir(&data_dir)
        .map_err(|e| Error::io(&data_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    if files.len() != stamps.len() {
        return Err(Error::invalid(format!(
            "kitti_oxts: {} timestamps but {} data files in {}",
            stamps.len(),
            files.len(),
            data_dir.display()
        )));
    }

    let t0 = stamps[0];
    let mut samples = Vec::with_capacity(files.len());
    for (file, stamp) in files.iter().zip(&stamps) {
        let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() < OXTS_MIN_FIELDS {
            return Err(Error::parse(
                file,
                1,
                format!(
                    "expected >= {OXTS_MIN_FIELDS} OXTS fields, found {}",
                    fields.len()
                ),
            ));
        }
        let get = |idx: usize, name: &str| parse_field(file, 1, name, fields[idx]);
        let accel = Vector3::new(
            get(OXTS_AF, "af")?,
            get(OXTS_AF + 1, "al")?,
            get(OXTS_AF + 2, "au")?,
        );
        let gyro = Vector3::new(
            get(OXTS_WF, "wf")?,
            get(OXTS_WF + 1, "wl")?,
            get(OXTS_WF + 2, "wu")?,
        );
        let t = (*stamp - t0)
            .num_nanoseconds()
            .map(|ns| ns as f64 * 1e-9)
            .ok_or_else(|| Error::parse(file, 1, "timestamp span overflows"))?;
        samples.push(ImuSample::new(t, gyro, accel));
    }
    Ok(samples)
}

const OXIOD_COLUMNS: usize = 16;
const STANDARD_GRAVITY: f64 = crate::imu::STANDARD_GRAVITY;

fn load_oxford_io(path: &Path) -> Result<Vec<ImuSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))?;
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(i + 1);
        if record.len() != OXIOD_COLUMNS {
            return Err(Error::parse(
                path,
                line,
                format!(
                    "expected {OXIOD_COLUMNS} OxfordIO columns, found {}",
                    record.len()
                ),
            ));
        }
        let mut v = [0.0f64; OXIOD_COLUMNS];
        for (j, raw) in record.iter().enumerate() {
            v[j] = parse_field(path, line, &format!("{j}"), raw)?;
        }
        // rotation_rate: cols 4..7 (rad/s); specific force = (user_acc +
        // gravity) in G units, cols 10..13 and 7..10.
        let gyro = Vector3::new(v[4], v[5], v[6]);
        let accel = Vector3::new(
            (v[10] + v[7]) * STANDARD_GRAVITY,
            (v[11] + v[8]) * STANDARD_GRAVITY,
            (v[12] + v[9]) * STANDARD_GRAVITY,
        );
        samples.push(ImuSample::new(v[0], gyro, accel));
    }
    Ok(samples)
}

pub(crate) fn csv_open_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, 0, format!("{other:?}")),
    }
}
