//! Preintegrated IMU motion features and the surrounding pipeline.
//!
//! The crate covers four layers:
//!
//! - [`lie`]: SO(3)/SE(3) primitives plus the integral correctives Γ and Λ.
//! - [`imu`]: the sensor model — synthetic trajectory/measurement generation,
//!   noise injection, and discrete full-state propagation.
//! - [`preint`]: preintegrated (PI) features in both the Forster and the
//!   switched-linear ("accurate") formulation, with composition and the
//!   200-sample / 10-step windowing used for learned odometry front-ends.
//! - [`dataset`] and [`eval`]: dataset ingestion (canonical CSV, KITTI OXTS,
//!   OxfordIO), odometry labels, feature export, and the trajectory error
//!   metrics (KITTI relative errors, normalized displacement error, geodesic
//!   loss).
//!
//! [`oracle`] holds deliberately naive brute-force integrators that tests and
//! the `compare` command use as an independent reference; it shares nothing
//! with the closed-form implementations beyond `hat`/`exp`.

// reference-valued operator calls keep Copy matrices out of the argument
// copies; negated comparisons deliberately reject NaN
#![allow(clippy::op_ref, clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod imu;
pub mod lie;
pub mod oracle;
pub mod preint;

pub use dataset::{ImuFormat, OdometryLabel, TrajectoryFormat};
pub use error::{Error, Result};
pub use eval::{DisplacementReport, LossWeights, RelErrorReport};
pub use imu::{Gravity, ImuSample, MotionSegment, NoiseSpec, PoseState, Trajectory};
pub use lie::{Rotation, Transform, Twist};
pub use preint::{FeatureWindow, Method, PiFeature};
