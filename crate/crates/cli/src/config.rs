//! Layered run configuration: command-line flags override config-file values,
//! which override built-in defaults. Unknown config keys are rejected.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Deserialize;

use preint_core::{Error, Result};

/// Environment variable naming the dataset root; relative *input* paths are
/// resolved against it when set.
pub const DATA_ROOT_ENV: &str = "PREINT_DATA_ROOT";

/// Resolves an input path against [`DATA_ROOT_ENV`] when it is relative.
pub fn resolve_input(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

/// Flag value if given, else config-file value, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub extract: ExtractSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub cdf: CdfSection,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub preset: Option<String>,
    pub duration: Option<f64>,
    pub rate: Option<f64>,
    pub seed: Option<u64>,
    pub gravity: Option<[f64; 3]>,
    pub noise_gyro: Option<f64>,
    pub noise_accel: Option<f64>,
    pub walk_gyro: Option<f64>,
    pub walk_accel: Option<f64>,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub duration: f64,
    pub gyro: [f64; 3],
    pub accel: [f64; 3],
}

impl SegmentSpec {
    pub fn to_segment(&self) -> preint_core::MotionSegment {
        preint_core::MotionSegment {
            duration: self.duration,
            gyro: Vector3::from(self.gyro),
            accel: Vector3::from(self.accel),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub method: Option<String>,
    pub window: Option<usize>,
    pub step: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub lengths: Option<Vec<f64>>,
    pub batch: Option<usize>,
    pub step: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub dts: Option<Vec<f64>>,
    pub duration: Option<f64>,
    pub substeps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdfSection {}
