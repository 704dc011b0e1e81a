//! Velocity estimation and motion segmentation.
//!
//! [`segment_riemannian`] splits a motion wherever the observed velocity stops
//! pointing along the parallel-transported initial velocity of the current
//! synergy. [`segment_zero_velocity`] is the classical baseline that cuts
//! wherever several joints reverse within a short window.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{self, MetricField, SampledPath};

/// Velocity norm under which a sample carries no usable direction.
pub const VELOCITY_FLOOR: f64 = 1e-8;

pub const DEFAULT_DELTA_THETA: f64 = 0.1;
pub const DEFAULT_SG_WINDOW: usize = 21;
pub const DEFAULT_SG_ORDER: usize = 2;
pub const DEFAULT_CROSSING_COUNT: usize = 3;
pub const DEFAULT_CROSSING_WINDOW: f64 = 0.05;

/// Uniformly sampled joint-space motion.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    dt: f64,
    positions: Vec<DVector<f64>>,
    velocities: Option<Vec<DVector<f64>>>,
}

impl JointTrajectory {
    pub fn new(dt: f64, positions: Vec<DVector<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Trajectory(format!("sample period must be positive, got {dt}")));
        }
        let Some(first) = positions.first() else {
            return Err(Error::Trajectory("trajectory has no samples".into()));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::Trajectory("trajectory has no joints".into()));
        }
        for (t, q) in positions.iter().enumerate() {
            if q.len() != n {
                return Err(Error::Trajectory(format!("sample {t} has {} joints, expected {n}", q.len())));
            }
            if !q.iter().all(|x| x.is_finite()) {
                return Err(Error::Trajectory(format!("sample {t} is not finite")));
            }
        }
        Ok(Self {
            dt,
            positions,
            velocities: None,
        })
    }

    pub fn with_velocities(mut self, velocities: Vec<DVector<f64>>) -> Result<Self> {
        if velocities.len() != self.positions.len() {
            return Err(Error::Trajectory(format!(
                "{} velocity samples for {} positions",
                velocities.len(),
                self.positions.len()
            )));
        }
        for (t, v) in velocities.iter().enumerate() {
            if v.len() != self.dof() || !v.iter().all(|x| x.is_finite()) {
                return Err(Error::Trajectory(format!("velocity sample {t} is malformed")));
            }
        }
        self.velocities = Some(velocities);
        Ok(self)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of samples, `T + 1`.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.positions[0].len()
    }

    pub fn time(&self, t: usize) -> f64 {
        t as f64 * self.dt
    }

    pub fn positions(&self) -> &[DVector<f64>] {
        &self.positions
    }

    pub fn velocities(&self) -> Option<&[DVector<f64>]> {
        self.velocities.as_deref()
    }

    pub(crate) fn require_velocities(&self) -> Result<&[DVector<f64>]> {
        self.velocities()
            .ok_or_else(|| Error::Trajectory("velocities are required; estimate them first".into()))
    }

    /// The trajectory as a sampled path (requires velocities).
    pub fn path(&self) -> Result<SampledPath> {
        SampledPath::new(self.dt, self.positions.clone(), self.require_velocities()?.to_vec())
    }
}

/// One synergy's sample range, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

/// Ordered segments partitioning the samples `0..=T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentBoundaryList {
    segments: Vec<Segment>,
}

impl SegmentBoundaryList {
    /// Validates that `segments` partition `0..=last`.
    pub fn new(segments: Vec<Segment>, last: usize) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("segment boundaries: {m}")));
        if segments.is_empty() {
            return bad("empty list".into());
        }
        if segments[0].start != 0 {
            return bad("first segment must start at sample 0".into());
        }
        for (g, s) in segments.iter().enumerate() {
            if s.end < s.start {
                return bad(format!("segment {g} is empty"));
            }
            if g > 0 && s.start != segments[g - 1].end + 1 {
                return bad(format!("segment {g} does not follow segment {}", g - 1));
            }
        }
        if segments.last().map(|s| s.end) != Some(last) {
            return bad(format!("last segment must end at sample {last}"));
        }
        Ok(Self { segments })
    }

    /// Builds the partition of `0..=last` whose segments begin at `starts`
    /// (sample 0 implied).
    pub fn from_starts(starts: &[usize], last: usize) -> Result<Self> {
        let mut bounds: Vec<usize> = std::iter::once(0).chain(starts.iter().copied().filter(|&s| s > 0)).collect();
        bounds.dedup();
        let segments = bounds
            .iter()
            .enumerate()
            .map(|(g, &s)| Segment {
                start: s,
                end: bounds.get(g + 1).map_or(last, |n| n - 1),
            })
            .collect();
        Self::new(segments, last)
    }

    /// The single segment covering the whole motion.
    pub fn whole(last: usize) -> Self {
        Self {
            segments: vec![Segment { start: 0, end: last }],
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn last_sample(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    /// Knot samples `[0, t_f(1), …, t_f(G)]`. Synergy `g` is reproduced between
    /// knots `g` and `g + 1`, so consecutive synergies share configurations.
    /// A leading zero-length span (first segment ending at sample 0) is dropped.
    pub fn knots(&self) -> Vec<usize> {
        let mut k = vec![0];
        for s in &self.segments {
            if s.end > *k.last().unwrap() {
                k.push(s.end);
            }
        }
        k
    }
}

/// Derivative weights of a Savitzky-Golay fit for a window of `window` samples
/// evaluated at window position `at`, unit sample spacing.
fn sg_derivative_weights(window: usize, order: usize, at: usize) -> DVector<f64> {
    let a = DMatrix::from_fn(window, order + 1, |m, k| (m as f64 - at as f64).powi(k as i32));
    let pinv = a.pseudo_inverse(1e-13).expect("Vandermonde pseudo-inverse");
    pinv.row(1).transpose()
}

/// Joint velocities from the analytic derivative of local least-squares
/// polynomial fits. Samples near the ends use one-sided windows.
pub fn estimate_velocities(traj: &JointTrajectory, window: usize, poly_order: usize) -> Result<JointTrajectory> {
    if window % 2 == 0 {
        return Err(Error::InvalidArgument(format!("window must be odd, got {window}")));
    }
    if poly_order < 1 || window < poly_order + 1 {
        return Err(Error::InvalidArgument(format!(
            "window {window} too small for polynomial order {poly_order}"
        )));
    }
    let len = traj.len();
    if len < window {
        return Err(Error::Trajectory(format!(
            "trajectory has {len} samples, shorter than the {window}-sample window"
        )));
    }
    let half = window / 2;
    let weights: Vec<DVector<f64>> = (0..window).map(|at| sg_derivative_weights(window, poly_order, at)).collect();
    let q = traj.positions();
    let velocities = (0..len)
        .map(|t| {
            let start = t.saturating_sub(half).min(len - window);
            let w = &weights[t - start];
            let mut v = DVector::zeros(traj.dof());
            for (m, wm) in w.iter().enumerate() {
                v.axpy(*wm, &q[start + m], 1.0);
            }
            v / traj.dt()
        })
        .collect();
    traj.clone().with_velocities(velocities)
}

/// Riemannian segmentation result together with the per-sample angle between
/// the transported reference velocity and the observed one (`None` where the
/// test was skipped).
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannianSegmentation {
    pub boundaries: SegmentBoundaryList,
    pub angles: Vec<Option<f64>>,
}

/// Splits a motion into geodesic synergies.
///
/// The initial velocity of the current synergy is carried sample to sample
/// along the observed path by parallel transport. When its angle to the
/// observed velocity at sample `t` exceeds `delta_theta`, the synergy ends at
/// `t` and the next begins at `t + 1`. Samples slower than [`VELOCITY_FLOOR`]
/// stay in the current synergy without being tested; a synergy starting at
/// rest takes its reference from its first moving sample.
pub fn segment_riemannian<M: MetricField + ?Sized>(
    metric: &M,
    traj: &JointTrajectory,
    delta_theta: f64,
) -> Result<RiemannianSegmentation> {
    if !(delta_theta > 0.0 && delta_theta < std::f64::consts::PI) {
        return Err(Error::InvalidArgument(format!("delta_theta must lie in (0, π), got {delta_theta}")));
    }
    if traj.dof() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            actual: traj.dof(),
        });
    }
    let vel = traj.require_velocities()?;
    let q = traj.positions();
    if traj.len() < 2 {
        return Err(Error::Trajectory("segmentation needs at least two samples".into()));
    }
    let last = traj.len() - 1;
    let moving = |t: usize| -> Result<Option<DVector<f64>>> {
        Ok((geometry::norm(metric, &q[t], &vel[t])? > VELOCITY_FLOOR).then(|| vel[t].clone()))
    };

    let mut angles = vec![None; traj.len()];
    let mut starts = Vec::new();
    let mut reference = moving(0)?;
    let mut t = 1;
    while t <= last {
        if let Some(r) = reference.take() {
            reference = Some(geometry::transport_step(
                metric,
                (&q[t - 1], &vel[t - 1]),
                (&q[t], &vel[t]),
                traj.dt(),
                &r,
            )?);
        }
        let g = metric.metric(&q[t])?;
        let observed_norm = vel[t].dot(&(&g * &vel[t])).max(0.0).sqrt();
        match &reference {
            None => {
                if observed_norm > VELOCITY_FLOOR {
                    reference = Some(vel[t].clone());
                }
            }
            Some(r) if observed_norm > VELOCITY_FLOOR => {
                let theta = match geometry::angle_with(&g, r, &vel[t]) {
                    Ok(a) => a,
                    Err(Error::ZeroVector) => {
                        // Transported reference decayed numerically: restart it here.
                        reference = Some(vel[t].clone());
                        t += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                angles[t] = Some(theta);
                if theta > delta_theta && t < last {
                    starts.push(t + 1);
                    reference = moving(t + 1)?;
                    t += 2;
                    continue;
                }
            }
            Some(_) => {}
        }
        t += 1;
    }
    Ok(RiemannianSegmentation {
        boundaries: SegmentBoundaryList::from_starts(&starts, last)?,
        angles,
    })
}

fn reverses(prev: f64, cur: f64) -> bool {
    (prev > 0.0 && cur <= 0.0) || (prev < 0.0 && cur >= 0.0)
}

/// Zero-velocity-crossing segmentation: a segment starts at sample `t` when
/// more than `crossing_count` distinct joints reverse within the window
/// `[t, t + window)` opened by a reversal at `t`. Triggers inside an open
/// window collapse into that window's boundary.
pub fn segment_zero_velocity(
    traj: &JointTrajectory,
    crossing_count: usize,
    window: f64,
) -> Result<SegmentBoundaryList> {
    let vel = traj.require_velocities()?;
    let w = (window / traj.dt()).round() as usize;
    if w < 2 {
        return Err(Error::InvalidArgument(format!(
            "crossing window of {window} s spans {w} samples; at least 2 are required"
        )));
    }
    let last = traj.len() - 1;
    // Joints reversing at each sample.
    let events: Vec<Vec<usize>> = (0..=last)
        .map(|t| {
            if t == 0 {
                return Vec::new();
            }
            (0..traj.dof())
                .filter(|&j| reverses(vel[t - 1][j], vel[t][j]))
                .collect()
        })
        .collect();
    let mut starts = Vec::new();
    let mut t = 1;
    while t <= last {
        if events[t].is_empty() {
            t += 1;
            continue;
        }
        let mut joints: Vec<usize> = events[t..(t + w).min(last + 1)].iter().flatten().copied().collect();
        joints.sort_unstable();
        joints.dedup();
        if joints.len() > crossing_count {
            starts.push(t);
            t += w;
        } else {
            t += 1;
        }
    }
    SegmentBoundaryList::from_starts(&starts, last)
}
