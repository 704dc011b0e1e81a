//! Geodesic synergies: spatial path from the logarithmic map, temporal course
//! minimizing the integrated squared acceleration, and whole-motion
//! reconstruction under the Riemannian, Euclidean and IK models.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::KinematicModel;
use crate::error::{Error, Result};
use crate::geometry::{self, ConstantMetric, LogMapOptions, MetricField, SampledPath};
use crate::pose::{orientation_distance, pose_error_world, TaskPose};
use crate::segmentation::{JointTrajectory, SegmentBoundaryList};

/// Cubic time course `s(t) = a0 + a1 t + a2 t² + a3 t³` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    pub duration: f64,
    pub coefficients: [f64; 4],
    /// False when `ṡ` dips below zero somewhere on the interval.
    pub monotone: bool,
}

impl TemporalProfile {
    pub fn position(&self, t: f64) -> f64 {
        let [a0, a1, a2, a3] = self.coefficients;
        a0 + t * (a1 + t * (a2 + t * a3))
    }

    pub fn speed(&self, t: f64) -> f64 {
        let [_, a1, a2, a3] = self.coefficients;
        a1 + t * (2.0 * a2 + 3.0 * a3 * t)
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        let [_, _, a2, a3] = self.coefficients;
        2.0 * a2 + 6.0 * a3 * t
    }

    /// `∫₀ᵀ s̈² dt`.
    pub fn cost(&self) -> f64 {
        let [_, _, a2, a3] = self.coefficients;
        let t = self.duration;
        4.0 * a2 * a2 * t + 12.0 * a2 * a3 * t * t + 12.0 * a3 * a3 * t * t * t
    }

    fn min_speed(&self) -> f64 {
        let [_, _, a2, a3] = self.coefficients;
        let mut m = self.speed(0.0).min(self.speed(self.duration));
        if a3 != 0.0 {
            let tc = -a2 / (3.0 * a3);
            if tc > 0.0 && tc < self.duration {
                m = m.min(self.speed(tc));
            }
        }
        m
    }
}

/// Minimum-acceleration time course covering `length` in `duration` with the
/// given boundary speeds. The Euler-Lagrange condition `s⁗ = 0` makes it the
/// unique cubic meeting `s(0) = 0, s(T) = ℓ, ṡ(0) = v_start, ṡ(T) = v_end`.
pub fn temporal_profile(length: f64, duration: f64, v_start: f64, v_end: f64) -> Result<TemporalProfile> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    if !(length >= 0.0 && v_start >= 0.0 && v_end >= 0.0) {
        return Err(Error::InvalidArgument(
            "length and boundary speeds must be non-negative".into(),
        ));
    }
    let t = duration;
    let a2 = (3.0 * length - (2.0 * v_start + v_end) * t) / (t * t);
    let a3 = ((v_start + v_end) * t - 2.0 * length) / (t * t * t);
    let mut p = TemporalProfile {
        duration,
        coefficients: [0.0, v_start, a2, a3],
        monotone: true,
    };
    let scale = v_start.max(v_end).max(length / t);
    p.monotone = p.min_speed() >= -1e-12 * scale.max(f64::MIN_POSITIVE);
    Ok(p)
}

/// Boundary data of one synergy as extracted from an observed motion.
#[derive(Debug, Clone, PartialEq)]
pub struct SynergyBoundary {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub q_start: DVector<f64>,
    pub q_end: DVector<f64>,
    pub speed_start: f64,
    pub speed_end: f64,
}

/// One planned geodesic synergy.
#[derive(Debug, Clone, PartialEq)]
pub struct SynergySegment {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub q_start: DVector<f64>,
    pub q_end: DVector<f64>,
    pub speed_start: f64,
    pub speed_end: f64,
    /// Geodesic length ℓ.
    pub length: f64,
    /// Log-map velocity at `q_start` spanning the path on unit time.
    pub initial_velocity: DVector<f64>,
    pub profile: TemporalProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub steps: usize,
    pub log: LogMapOptions,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            steps: geometry::DEFAULT_STEPS,
            log: LogMapOptions::default(),
        }
    }
}

/// A geodesic that can be evaluated at any parameter, including outside [0, 1]
/// when a non-monotone profile overshoots its ends.
struct GeodesicLookup {
    forward: SampledPath,
    backward: Option<SampledPath>,
}

impl GeodesicLookup {
    fn build<M: MetricField + ?Sized>(
        metric: &M,
        q0: &DVector<f64>,
        v0: &DVector<f64>,
        tau_min: f64,
        tau_max: f64,
        steps: usize,
    ) -> Result<Self> {
        let span = |t: f64| ((steps as f64 * t).ceil() as usize).max(1);
        let forward = geometry::integrate_geodesic(metric, q0, v0, tau_max, span(tau_max))?.path;
        let backward = if tau_min < 0.0 {
            Some(geometry::integrate_geodesic(metric, q0, &-v0, -tau_min, span(-tau_min))?.path)
        } else {
            None
        };
        Ok(Self { forward, backward })
    }

    fn at(&self, tau: f64) -> (DVector<f64>, DVector<f64>) {
        match &self.backward {
            Some(b) if tau < 0.0 => {
                let (q, v) = b.sample(-tau);
                (q, -v)
            }
            _ => self.forward.sample(tau),
        }
    }
}

/// Samples `q(s(t))` at spacing `dt` along the geodesic from `q_start` with
/// unit-time velocity `v`, whose length is `length`.
pub(crate) fn sample_synergy<M: MetricField + ?Sized>(
    metric: &M,
    q_start: &DVector<f64>,
    v: &DVector<f64>,
    length: f64,
    profile: &TemporalProfile,
    dt: f64,
    steps: usize,
) -> Result<SampledPath> {
    let count = (profile.duration / dt).round() as usize;
    let times: Vec<f64> = (0..=count).map(|k| (k as f64 * dt).min(profile.duration)).collect();
    if length <= 0.0 || v.iter().all(|&x| x == 0.0) {
        let n = q_start.len();
        return SampledPath::new(dt, vec![q_start.clone(); count + 1], vec![DVector::zeros(n); count + 1]);
    }
    let taus: Vec<f64> = times.iter().map(|&t| profile.position(t) / length).collect();
    let tau_min = taus.iter().copied().fold(0.0, f64::min);
    let tau_max = taus.iter().copied().fold(1.0, f64::max);
    let lookup = GeodesicLookup::build(metric, q_start, v, tau_min, tau_max, steps)?;
    let mut positions = Vec::with_capacity(count + 1);
    let mut velocities = Vec::with_capacity(count + 1);
    for (&t, &tau) in times.iter().zip(&taus) {
        let (q, dq) = lookup.at(tau);
        positions.push(q);
        velocities.push(dq * (profile.speed(t) / length));
    }
    SampledPath::new(dt, positions, velocities)
}

/// Plans one synergy: geodesic from the logarithmic map, length from the
/// sampled geodesic, minimum-acceleration timing from the boundary speeds.
/// The dense path is sampled at `dt` over the synergy's duration.
pub fn plan_synergy<M: MetricField + ?Sized>(
    metric: &M,
    boundary: &SynergyBoundary,
    dt: f64,
    opts: &PlanOptions,
) -> Result<(SynergySegment, SampledPath)> {
    let run = || -> Result<(SynergySegment, SampledPath)> {
        let duration = boundary.t_end - boundary.t_start;
        let v = geometry::log_map(metric, &boundary.q_start, &boundary.q_end, &opts.log)?;
        let length = if v.iter().all(|&x| x == 0.0) {
            0.0
        } else {
            geometry::curve_length(metric, &geometry::exp_map(metric, &boundary.q_start, &v, opts.steps)?.path)?
        };
        let profile = temporal_profile(length, duration, boundary.speed_start, boundary.speed_end)?;
        let path = sample_synergy(metric, &boundary.q_start, &v, length, &profile, dt, opts.steps)?;
        let seg = SynergySegment {
            index: boundary.index,
            t_start: boundary.t_start,
            t_end: boundary.t_end,
            q_start: boundary.q_start.clone(),
            q_end: boundary.q_end.clone(),
            speed_start: boundary.speed_start,
            speed_end: boundary.speed_end,
            length,
            initial_velocity: v,
            profile,
        };
        Ok((seg, path))
    };
    run().map_err(|e| e.in_segment(boundary.index))
}

/// Which model produced a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Riemannian,
    Euclidean,
    Ik,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Riemannian => "riemannian",
            Mode::Euclidean => "euclidean",
            Mode::Ik => "ik",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riemannian" => Ok(Mode::Riemannian),
            "euclidean" => Ok(Mode::Euclidean),
            "ik" => Ok(Mode::Ik),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedMotion {
    pub mode: Mode,
    /// Joint trajectory with velocities, sampled like the input.
    pub trajectory: JointTrajectory,
    /// End-effector poses, forward kinematics of `trajectory`.
    pub poses: Vec<TaskPose>,
    pub segments: Vec<SynergySegment>,
}

/// End-effector poses along a joint trajectory.
pub fn pose_trajectory(model: &KinematicModel, traj: &JointTrajectory) -> Result<Vec<TaskPose>> {
    traj.positions().iter().map(|q| model.forward_kinematics(q)).collect()
}

/// Rebuilds a motion as a chain of planned synergies between the knots of
/// `boundaries` (see [`SegmentBoundaryList::knots`]). Riemannian mode plans
/// geodesics of `metric`; Euclidean mode plans straight joint-space lines with
/// Euclidean boundary speeds. Both use the minimum-acceleration timing.
pub fn reconstruct<M: MetricField + ?Sized>(
    model: &KinematicModel,
    metric: &M,
    traj: &JointTrajectory,
    boundaries: &SegmentBoundaryList,
    mode: Mode,
    opts: &PlanOptions,
) -> Result<ReconstructedMotion> {
    match mode {
        Mode::Riemannian => reconstruct_with(model, metric, traj, boundaries, mode, opts),
        Mode::Euclidean => {
            let flat = ConstantMetric::identity(traj.dof());
            reconstruct_with(model, &flat, traj, boundaries, mode, opts)
        }
        Mode::Ik => Err(Error::InvalidArgument(
            "IK reconstruction tracks poses; use ik_track".into(),
        )),
    }
}

fn reconstruct_with<M: MetricField + ?Sized>(
    model: &KinematicModel,
    metric: &M,
    traj: &JointTrajectory,
    boundaries: &SegmentBoundaryList,
    mode: Mode,
    opts: &PlanOptions,
) -> Result<ReconstructedMotion> {
    if traj.dof() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            actual: traj.dof(),
        });
    }
    if boundaries.last_sample() + 1 != traj.len() {
        return Err(Error::InvalidArgument(format!(
            "boundaries cover {} samples, trajectory has {}",
            boundaries.last_sample() + 1,
            traj.len()
        )));
    }
    let vel = traj.require_velocities()?;
    let q = traj.positions();
    let dt = traj.dt();
    let knots = boundaries.knots();
    let speed = |k: usize| geometry::norm(metric, &q[k], &vel[k]);

    let mut positions = vec![q[0].clone()];
    let mut velocities = vec![vel[0].clone()];
    let mut segments = Vec::with_capacity(knots.len().saturating_sub(1));
    for (g, w) in knots.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let boundary = SynergyBoundary {
            index: g,
            t_start: traj.time(a),
            t_end: traj.time(b),
            q_start: q[a].clone(),
            q_end: q[b].clone(),
            speed_start: speed(a)?,
            speed_end: speed(b)?,
        };
        let (seg, path) = plan_synergy(metric, &boundary, dt, opts)?;
        if path.len() != b - a + 1 {
            return Err(Error::Segment {
                segment: g,
                source: Box::new(Error::InvalidArgument("synergy duration is not a whole number of samples".into())),
            });
        }
        if g == 0 {
            velocities[0] = path.velocities[0].clone();
        }
        positions.extend(path.positions.into_iter().skip(1));
        velocities.extend(path.velocities.into_iter().skip(1));
        segments.push(seg);
    }
    let trajectory = JointTrajectory::new(dt, positions)?.with_velocities(velocities)?;
    let poses = pose_trajectory(model, &trajectory)?;
    Ok(ReconstructedMotion {
        mode,
        trajectory,
        poses,
        segments,
    })
}

/// Damped least-squares inverse `(Jᵀ W J + λ I)⁻¹ Jᵀ W` applied to `e`.
pub(crate) fn damped_pinv_apply(
    jac: &nalgebra::Matrix6xX<f64>,
    weights: &nalgebra::Vector6<f64>,
    damping: f64,
    e: &nalgebra::Vector6<f64>,
) -> Result<DVector<f64>> {
    let n = jac.ncols();
    let jw = DMatrix::from_fn(6, n, |r, c| jac[(r, c)] * weights[r]);
    let lhs = jac.transpose() * &jw + DMatrix::identity(n, n) * damping;
    let rhs = jw.transpose() * DVector::from_column_slice(e.as_slice());
    lhs.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or(Error::NotPositiveDefinite)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    /// Proportional gain on the pose error (1/s); `None` means `1 / dt`.
    pub gain: Option<f64>,
    pub damping: f64,
    /// Pose errors above these bounds abort tracking.
    pub position_bound: f64,
    pub orientation_bound: f64,
    /// Residuals above these flag the track as saturated.
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            gain: None,
            damping: 1e-4,
            position_bound: 1.0,
            orientation_bound: std::f64::consts::PI,
            position_tolerance: 1e-3,
            orientation_tolerance: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkTrack {
    pub motion: ReconstructedMotion,
    pub max_position_error: f64,
    pub max_orientation_error: f64,
    /// The residual exceeded the tolerance at some sample (e.g. target out of reach).
    pub saturated: bool,
}

/// Jacobian-based velocity controller following a pose sequence sampled at `dt`.
/// Each step applies `q̇ = J†(q) k_p e` for one sample, with `e` the base-frame
/// pose error toward the next target.
pub fn ik_track(
    model: &KinematicModel,
    targets: &[TaskPose],
    dt: f64,
    q0: &DVector<f64>,
    opts: &IkOptions,
) -> Result<IkTrack> {
    model.check_configuration(q0)?;
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no target poses".into()));
    }
    let gain = opts.gain.unwrap_or(1.0 / dt);
    let unit = nalgebra::Vector6::repeat(1.0);
    let mut q = q0.clone();
    let mut positions = vec![q.clone()];
    let mut velocities = Vec::with_capacity(targets.len());
    let mut poses = vec![model.forward_kinematics(&q)?];
    let (mut max_p, mut max_o) = (0.0_f64, 0.0_f64);
    let mut check = |k: usize, pose: &TaskPose, target: &TaskPose| -> Result<()> {
        let p = (target.position - pose.position).norm();
        let o = orientation_distance(&target.orientation, &pose.orientation);
        max_p = max_p.max(p);
        max_o = max_o.max(o);
        if p > opts.position_bound || o > opts.orientation_bound {
            return Err(Error::Diverged {
                sample: k,
                position: p,
                orientation: o,
            });
        }
        Ok(())
    };
    check(0, &poses[0], &targets[0])?;
    for (k, target) in targets.iter().enumerate().skip(1) {
        let pose = model.forward_kinematics(&q)?;
        let e = pose_error_world(&pose, target) * gain;
        let qdot = damped_pinv_apply(&model.geometric_jacobian(&q)?, &unit, opts.damping, &e)?;
        q += &qdot * dt;
        let reached = model.forward_kinematics(&q)?;
        check(k, &reached, target)?;
        positions.push(q.clone());
        velocities.push(qdot);
        poses.push(reached);
    }
    let first = velocities.first().cloned().unwrap_or_else(|| DVector::zeros(q.len()));
    velocities.insert(0, first);
    let trajectory = JointTrajectory::new(dt, positions)?.with_velocities(velocities)?;
    Ok(IkTrack {
        motion: ReconstructedMotion {
            mode: Mode::Ik,
            trajectory,
            poses,
            segments: Vec::new(),
        },
        saturated: max_p > opts.position_tolerance || max_o > opts.orientation_tolerance,
        max_position_error: max_p,
        max_orientation_error: max_o,
    })
}

/// Mean absolute joint-angle deviation over all samples and joints (rad).
pub fn joint_error(a: &JointTrajectory, b: &JointTrajectory) -> Result<f64> {
    if a.len() != b.len() || a.dof() != b.dof() {
        return Err(Error::InvalidArgument(format!(
            "trajectory shapes differ: {}x{} vs {}x{}",
            a.len(),
            a.dof(),
            b.len(),
            b.dof()
        )));
    }
    let total: f64 = a
        .positions()
        .iter()
        .zip(b.positions())
        .map(|(x, y)| (x - y).abs().sum())
        .sum();
    Ok(total / (a.len() * a.dof()) as f64)
}

/// Mean position distance (m) and mean rotation distance (rad) between two pose sequences.
pub fn pose_error(a: &[TaskPose], b: &[TaskPose]) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "pose sequences must be non-empty and equally long ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let (p, o) = a.iter().zip(b).fold((0.0, 0.0), |(p, o), (x, y)| {
        (
            p + (x.position - y.position).norm(),
            o + orientation_distance(&x.orientation, &y.orientation),
        )
    });
    let n = a.len() as f64;
    Ok((p / n, o / n))
}
