//! Transfer of a segmented motion to another chain: key task poses are scaled
//! to the target's arm, small synergies are merged, and each synergy is solved
//! as a target-chain geodesic whose endpoint reaches the next key pose.

use nalgebra::{DVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::chain::KinematicModel;
use crate::error::{Error, Result};
use crate::geometry::{self, GeodesicCurve, MetricField};
use crate::pose::{orientation_distance, pose_error_world, TaskPose};
use crate::segmentation::{JointTrajectory, Segment, SegmentBoundaryList};
use crate::synergy::{self, damped_pinv_apply, ik_track, IkOptions, PlanOptions, TemporalProfile};

pub use crate::pose::pose_log;

pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.05;

/// Scales positions about `shoulder` by `target_arm_length / source_arm_length`.
/// Orientations are unchanged.
pub fn scale_to_agent(
    poses: &[TaskPose],
    source_arm_length: f64,
    target_arm_length: f64,
    shoulder: &TaskPose,
) -> Result<Vec<TaskPose>> {
    transfer_poses(poses, source_arm_length, target_arm_length, shoulder, shoulder)
}

/// Expresses poses in `source_shoulder`, scales positions by the arm-length
/// ratio and places the result at `target_shoulder`.
pub fn transfer_poses(
    poses: &[TaskPose],
    source_arm_length: f64,
    target_arm_length: f64,
    source_shoulder: &TaskPose,
    target_shoulder: &TaskPose,
) -> Result<Vec<TaskPose>> {
    if !(source_arm_length > 0.0 && target_arm_length > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "arm lengths must be positive, got {source_arm_length} and {target_arm_length}"
        )));
    }
    let ratio = target_arm_length / source_arm_length;
    let src = source_shoulder.to_isometry();
    let tgt = target_shoulder.to_isometry();
    let turn = tgt.rotation * src.rotation.inverse();
    Ok(poses
        .iter()
        .map(|p| {
            let local = src.inverse_transform_point(&p.position.into()).coords * ratio;
            TaskPose::new(tgt.transform_point(&local.into()).coords, turn * p.orientation)
        })
        .collect())
}

/// Greedy left-to-right merge of segments whose joint-space chord is shorter
/// than `min_joint_distance`. A short segment joins its successor, or its
/// predecessor when it is the last one, until every segment passes or one remains.
pub fn merge_synergies(
    boundaries: &SegmentBoundaryList,
    traj: &JointTrajectory,
    min_joint_distance: f64,
) -> Result<SegmentBoundaryList> {
    if !(min_joint_distance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "merge threshold must be non-negative, got {min_joint_distance}"
        )));
    }
    if boundaries.last_sample() + 1 != traj.len() {
        return Err(Error::InvalidArgument("boundaries do not cover the trajectory".into()));
    }
    let q = traj.positions();
    let chord = |s: &Segment| (&q[s.end] - &q[s.start]).norm();
    let mut segs = boundaries.segments().to_vec();
    while segs.len() > 1 {
        let Some(i) = segs.iter().position(|s| chord(s) < min_joint_distance) else {
            break;
        };
        if i + 1 < segs.len() {
            segs[i + 1].start = segs[i].start;
        } else {
            segs[i - 1].end = segs[i].end;
        }
        segs.remove(i);
    }
    SegmentBoundaryList::new(segs, boundaries.last_sample())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    pub steps: usize,
    pub damping: f64,
    /// Weight of orientation error against position error (m/rad).
    pub orientation_weight: f64,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    pub max_iterations: usize,
    /// Line-search halvings before a step is given up.
    pub max_halvings: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            steps: geometry::DEFAULT_STEPS,
            damping: 1e-4,
            orientation_weight: 0.1,
            position_tolerance: 1e-3,
            orientation_tolerance: 1e-2,
            max_iterations: 200,
            max_halvings: 30,
        }
    }
}

impl ShootOptions {
    fn weights(&self) -> Vector6<f64> {
        let w2 = self.orientation_weight * self.orientation_weight;
        Vector6::new(1.0, 1.0, 1.0, w2, w2, w2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootResult {
    pub initial_velocity: DVector<f64>,
    pub curve: GeodesicCurve,
    pub achieved: TaskPose,
    pub residual_position: f64,
    pub residual_orientation: f64,
    /// Accepted descent steps.
    pub iterations: usize,
    pub converged: bool,
}

struct Probe {
    curve: GeodesicCurve,
    pose: TaskPose,
    cost: f64,
}

fn probe<M: MetricField + ?Sized>(
    model: &KinematicModel,
    metric: &M,
    q0: &DVector<f64>,
    v: &DVector<f64>,
    target: &TaskPose,
    opts: &ShootOptions,
) -> Result<Probe> {
    let curve = geometry::exp_map(metric, q0, v, opts.steps)?;
    let pose = model.forward_kinematics(curve.endpoint())?;
    let e = pose_log(&pose, target);
    let w = opts.weights();
    let cost = e.component_mul(&e).dot(&w);
    Ok(Probe { curve, pose, cost })
}

/// Weighted squared pose residual `‖p_err‖² + w_o² ‖θ_err‖²` at the endpoint of
/// the geodesic leaving `q0` with velocity `v`.
pub fn shooting_cost<M: MetricField + ?Sized>(
    model: &KinematicModel,
    metric: &M,
    q0: &DVector<f64>,
    v: &DVector<f64>,
    target: &TaskPose,
    opts: &ShootOptions,
) -> Result<f64> {
    Ok(probe(model, metric, q0, v, target, opts)?.cost)
}

/// Joint-space descent direction for the endpoint residual, pulled back through
/// the damped pseudo-inverse at the endpoint and transported back to `q0`.
fn descent_direction<M: MetricField + ?Sized>(
    model: &KinematicModel,
    metric: &M,
    curve: &GeodesicCurve,
    pose: &TaskPose,
    target: &TaskPose,
    opts: &ShootOptions,
) -> Result<DVector<f64>> {
    let q1 = curve.endpoint();
    let e = pose_error_world(pose, target);
    let step = damped_pinv_apply(&model.geometric_jacobian(q1)?, &opts.weights(), opts.damping, &e)?;
    let d = if curve.initial_velocity().iter().all(|&x| x == 0.0) {
        step
    } else {
        geometry::parallel_transport(metric, &curve.path.reversed(), &step)?
    };
    if !d.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(d)
}

/// Approximate gradient of [`shooting_cost`] with respect to `v`: the negated,
/// doubled transported pull-back of the endpoint pose error.
pub fn shooting_gradient<M: MetricField + ?Sized>(
    model: &KinematicModel,
    metric: &M,
    q0: &DVector<f64>,
    v: &DVector<f64>,
    target: &TaskPose,
    opts: &ShootOptions,
) -> Result<DVector<f64>> {
    let p = probe(model, metric, q0, v, target, opts)?;
    Ok(descent_direction(model, metric, &p.curve, &p.pose, target, opts)? * -2.0)
}

/// Finds an initial velocity at `q0` whose geodesic ends at a configuration
/// reaching `target`. Descent with backtracking, starting from `v = 0`; the first
/// step is thus one damped IK step at `q0`. Unreachable targets come back with
/// `converged = false` and the best residual found.
pub fn shoot_synergy<M: MetricField + ?Sized>(
    model: &KinematicModel,
    metric: &M,
    q0: &DVector<f64>,
    target: &TaskPose,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    model.check_configuration(q0)?;
    let reached = |pose: &TaskPose| {
        let p = (target.position - pose.position).norm();
        let o = orientation_distance(&target.orientation, &pose.orientation);
        (p, o, p < opts.position_tolerance && o < opts.orientation_tolerance)
    };
    let mut v = DVector::zeros(q0.len());
    let mut best = probe(model, metric, q0, &v, target, opts)?;
    let mut iterations = 0;
    while !reached(&best.pose).2 && iterations < opts.max_iterations {
        let d = descent_direction(model, metric, &best.curve, &best.pose, target, opts)?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial_v = &v + &d * alpha;
            // A trial that leaves the region where the metric is usable counts as a failed step.
            if let Ok(trial) = probe(model, metric, q0, &trial_v, target, opts) {
                if trial.cost < best.cost {
                    accepted = Some((trial_v, trial));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((nv, np)) = accepted else { break };
        v = nv;
        best = np;
        iterations += 1;
    }
    let (p, o, converged) = reached(&best.pose);
    Ok(ShootResult {
        initial_velocity: v,
        curve: best.curve,
        achieved: best.pose,
        residual_position: p,
        residual_orientation: o,
        iterations,
        converged,
    })
}

/// Desired task-space motion of one synergy on the target chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskTarget {
    pub index: usize,
    pub initial: TaskPose,
    pub target: TaskPose,
    pub duration: f64,
}

/// Per-synergy outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyReport {
    pub g: usize,
    pub desired: crate::pose::PoseRecord,
    pub achieved: crate::pose::PoseRecord,
    pub residual_m: f64,
    pub residual_rad: f64,
    pub iterations: usize,
    pub converged: bool,
    pub monotone_timing: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetargetOptions {
    pub merge_threshold: f64,
    pub shoot: ShootOptions,
    pub plan: PlanOptions,
    /// Target-chain configuration at the first sample. When absent it is solved
    /// by IK on the first key pose starting from `ik_seed`.
    pub initial_configuration: Option<DVector<f64>>,
    /// IK starting point; `None` means every joint at 0.3 rad.
    pub ik_seed: Option<DVector<f64>>,
    pub ik_settle_samples: usize,
}

impl Default for RetargetOptions {
    fn default() -> Self {
        Self {
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
            shoot: ShootOptions::default(),
            plan: PlanOptions::default(),
            initial_configuration: None,
            ik_seed: None,
            ik_settle_samples: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetargetResult {
    /// Segmentation after merging, on the source samples.
    pub boundaries: SegmentBoundaryList,
    pub targets: Vec<TaskTarget>,
    pub initial_velocities: Vec<DVector<f64>>,
    pub profiles: Vec<TemporalProfile>,
    /// Dense target-chain trajectory on the source time grid.
    pub trajectory: JointTrajectory,
    /// Forward kinematics of `trajectory`.
    pub poses: Vec<TaskPose>,
    pub reports: Vec<SynergyReport>,
    /// Pose error of the initial configuration against the first key pose (m, rad).
    pub initial_residual: (f64, f64),
}

impl RetargetResult {
    pub fn all_converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }
}

fn initial_configuration(model: &KinematicModel, first: &TaskPose, opts: &RetargetOptions) -> Result<DVector<f64>> {
    if let Some(q) = &opts.initial_configuration {
        model.check_configuration(q)?;
        return Ok(q.clone());
    }
    let seed = opts
        .ik_seed
        .clone()
        .unwrap_or_else(|| DVector::from_element(model.dof(), 0.3));
    let targets = vec![*first; opts.ik_settle_samples.max(2)];
    let ik = IkOptions {
        gain: Some(10.0),
        position_bound: f64::INFINITY,
        orientation_bound: f64::INFINITY,
        ..IkOptions::default()
    };
    let track = ik_track(model, &targets, 0.01, &seed, &ik)?;
    Ok(track.motion.trajectory.positions().last().expect("non-empty").clone())
}

/// Transfers a segmented source motion onto `target`. Key poses are the source
/// end-effector poses at the merged synergy knots, scaled to the target arm.
/// Each synergy is shot from the previous endpoint; durations are copied from
/// the source and boundary speeds are the source knot speeds scaled by the
/// ratio of total target to total source path length, so adjacent synergies
/// share their boundary speeds. A failing synergy is reported and the chain
/// continues from its best iterate.
pub fn retarget_motion(
    source: &KinematicModel,
    traj: &JointTrajectory,
    boundaries: &SegmentBoundaryList,
    target: &KinematicModel,
    opts: &RetargetOptions,
) -> Result<RetargetResult> {
    if traj.dof() != source.dof() {
        return Err(Error::DimensionMismatch {
            expected: source.dof(),
            actual: traj.dof(),
        });
    }
    let vel = traj.require_velocities()?;
    let merged = merge_synergies(boundaries, traj, opts.merge_threshold)?;
    let knots = merged.knots();
    let q = traj.positions();
    let dt = traj.dt();

    let human_poses = knots
        .iter()
        .map(|&k| source.forward_kinematics(&q[k]))
        .collect::<Result<Vec<_>>>()?;
    let key_poses = transfer_poses(
        &human_poses,
        source.arm_length(),
        target.arm_length(),
        &source.shoulder_frame(),
        &target.shoulder_frame(),
    )?;
    let human_speeds = knots
        .iter()
        .map(|&k| geometry::norm(source, &q[k], &vel[k]))
        .collect::<Result<Vec<_>>>()?;
    let human_length: f64 = {
        let speeds = (0..traj.len())
            .map(|k| geometry::norm(source, &q[k], &vel[k]))
            .collect::<Result<Vec<_>>>()?;
        speeds.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum()
    };

    let q_init = initial_configuration(target, &key_poses[0], opts)?;
    let start_pose = target.forward_kinematics(&q_init)?;
    let initial_residual = (
        (start_pose.position - key_poses[0].position).norm(),
        orientation_distance(&start_pose.orientation, &key_poses[0].orientation),
    );

    let mut targets = Vec::new();
    let mut shots = Vec::new();
    let mut reports = Vec::new();
    let mut q_cur = q_init.clone();
    for (g, w) in knots.windows(2).enumerate() {
        let tt = TaskTarget {
            index: g,
            initial: key_poses[g],
            target: key_poses[g + 1],
            duration: traj.time(w[1]) - traj.time(w[0]),
        };
        let (v, q_next, report) = match shoot_synergy(target, target, &q_cur, &tt.target, &opts.shoot) {
            Ok(s) => {
                let report = SynergyReport {
                    g,
                    desired: (&tt.target).into(),
                    achieved: (&s.achieved).into(),
                    residual_m: s.residual_position,
                    residual_rad: s.residual_orientation,
                    iterations: s.iterations,
                    converged: s.converged,
                    monotone_timing: true,
                    error: None,
                };
                (s.initial_velocity, s.curve.endpoint().clone(), report)
            }
            Err(e) => {
                let here = target.forward_kinematics(&q_cur)?;
                let report = SynergyReport {
                    g,
                    desired: (&tt.target).into(),
                    achieved: (&here).into(),
                    residual_m: (here.position - tt.target.position).norm(),
                    residual_rad: orientation_distance(&here.orientation, &tt.target.orientation),
                    iterations: 0,
                    converged: false,
                    monotone_timing: true,
                    error: Some(e.in_segment(g).to_string()),
                };
                (DVector::zeros(target.dof()), q_cur.clone(), report)
            }
        };
        let length = geometry::norm(target, &q_cur, &v)?;
        shots.push((q_cur.clone(), v, length));
        targets.push(tt);
        reports.push(report);
        q_cur = q_next;
    }

    let robot_length: f64 = shots.iter().map(|s| s.2).sum();
    let kappa = if human_length > 0.0 { robot_length / human_length } else { 0.0 };
    let mut positions = vec![q_init.clone()];
    let mut velocities = vec![DVector::zeros(target.dof())];
    let mut profiles = Vec::new();
    let mut initial_velocities = Vec::new();
    for (g, (q0, v, length)) in shots.into_iter().enumerate() {
        let profile = synergy::temporal_profile(
            length,
            targets[g].duration,
            kappa * human_speeds[g],
            kappa * human_speeds[g + 1],
        )
        .map_err(|e| e.in_segment(g))?;
        reports[g].monotone_timing = profile.monotone;
        let path = synergy::sample_synergy(target, &q0, &v, length, &profile, dt, opts.plan.steps)
            .map_err(|e| e.in_segment(g))?;
        if g == 0 {
            velocities[0] = path.velocities[0].clone();
        }
        positions.extend(path.positions.into_iter().skip(1));
        velocities.extend(path.velocities.into_iter().skip(1));
        profiles.push(profile);
        initial_velocities.push(v);
    }
    let trajectory = JointTrajectory::new(dt, positions)?.with_velocities(velocities)?;
    let poses = synergy::pose_trajectory(target, &trajectory)?;
    Ok(RetargetResult {
        boundaries: merged,
        targets,
        initial_velocities,
        profiles,
        trajectory,
        poses,
        reports,
        initial_residual,
    })
}
