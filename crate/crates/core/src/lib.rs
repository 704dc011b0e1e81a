//! Analysis, reconstruction and retargeting of joint-space motions of serial
//! chains as sequences of geodesic synergies on the kinetic-energy manifold.

pub mod chain;
pub mod error;
pub mod geometry;
pub mod io;
pub mod pose;
pub mod retarget;
pub mod segmentation;
pub mod synergy;
pub mod synth;

pub use chain::{load_model, KinematicModel, Link};
pub use error::{Error, Result};
pub use geometry::{ConstantMetric, GeodesicCurve, MetricField, SampledPath};
pub use pose::TaskPose;
pub use segmentation::{JointTrajectory, Segment, SegmentBoundaryList};
pub use synergy::{Mode, ReconstructedMotion, SynergySegment, TemporalProfile};
pub use retarget::{RetargetOptions, RetargetResult};
