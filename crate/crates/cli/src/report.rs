//! JSON documents written by the commands.

use geosyn_core::retarget::SynergyReport;
use serde::Serialize;

pub use geosyn_core::io::SCHEMA_VERSION;

#[derive(Debug, Serialize)]
pub struct SegmentDoc {
    pub g: usize,
    pub start: usize,
    pub end: usize,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Serialize)]
pub struct SegmentationDoc {
    pub method: &'static str,
    pub count: usize,
    pub segments: Vec<SegmentDoc>,
}

#[derive(Debug, Serialize)]
pub struct AnalyzeDoc {
    pub schema_version: u32,
    pub command: &'static str,
    pub model: String,
    pub samples: usize,
    pub dt: f64,
    pub delta_theta: f64,
    pub velocity_source: &'static str,
    pub riemannian: SegmentationDoc,
    pub zero_velocity: SegmentationDoc,
    pub velocity_table: &'static str,
    pub angle_table: &'static str,
}

#[derive(Debug, Serialize)]
pub struct SynergyDoc {
    pub g: usize,
    pub t_i: f64,
    pub t_f: f64,
    pub length: f64,
    pub speed_start: f64,
    pub speed_end: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricsDoc {
    pub joint_error_rad: f64,
    pub position_error_m: f64,
    pub orientation_error_rad: f64,
}

#[derive(Debug, Serialize)]
pub struct IkDoc {
    pub saturated: bool,
    pub max_position_error_m: f64,
    pub max_orientation_error_rad: f64,
}

#[derive(Debug, Serialize)]
pub struct ReconstructDoc {
    pub schema_version: u32,
    pub command: &'static str,
    pub mode: String,
    pub model: String,
    pub delta_theta: f64,
    pub velocity_source: &'static str,
    pub segments: Vec<SynergyDoc>,
    pub metrics: MetricsDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ik: Option<IkDoc>,
}

#[derive(Debug, Serialize)]
pub struct ModeFailure {
    pub mode: String,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct CompareRow {
    pub motion: String,
    pub riemannian_joint_rad: Option<f64>,
    pub euclidean_joint_rad: Option<f64>,
    pub ik_joint_rad: Option<f64>,
    pub riemannian_position_m: Option<f64>,
    pub euclidean_position_m: Option<f64>,
    pub riemannian_orientation_rad: Option<f64>,
    pub euclidean_orientation_rad: Option<f64>,
}

impl CompareRow {
    pub const HEADER: [&'static str; 8] = [
        "motion",
        "riemannian_joint_rad",
        "euclidean_joint_rad",
        "ik_joint_rad",
        "riemannian_position_m",
        "euclidean_position_m",
        "riemannian_orientation_rad",
        "euclidean_orientation_rad",
    ];

    pub fn cells(&self) -> Vec<Option<f64>> {
        vec![
            self.riemannian_joint_rad,
            self.euclidean_joint_rad,
            self.ik_joint_rad,
            self.riemannian_position_m,
            self.euclidean_position_m,
            self.riemannian_orientation_rad,
            self.euclidean_orientation_rad,
        ]
    }
}

#[derive(Debug, Serialize)]
pub struct CompareDoc {
    pub schema_version: u32,
    pub command: &'static str,
    pub model: String,
    pub table: &'static str,
    pub rows: Vec<CompareRow>,
    pub failures: Vec<ModeFailure>,
}

#[derive(Debug, Serialize)]
pub struct RetargetDoc {
    pub schema_version: u32,
    pub command: &'static str,
    pub source_model: String,
    pub target_model: String,
    pub merge_threshold: f64,
    pub initial_residual_m: f64,
    pub initial_residual_rad: f64,
    pub converged: usize,
    pub synergies: Vec<SynergyReport>,
}

#[derive(Debug, Serialize)]
pub struct SynthesisDoc {
    pub schema_version: u32,
    pub command: &'static str,
    pub seed: u64,
    pub model: String,
    pub dt: f64,
    pub knots: Vec<usize>,
    pub turn_angles: Vec<f64>,
}
