//! Seeded generators for test chains and ground-truth motions.

use nalgebra::{DVector, Isometry3, Matrix3, Translation3, Unit, UnitQuaternion, Vector3};
use rand::Rng;

use crate::chain::{KinematicModel, Link};
use crate::error::{Error, Result};
use crate::geometry::{self, MetricField};
use crate::segmentation::JointTrajectory;
use crate::synergy::{temporal_profile, TemporalProfile};

fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random spatial serial chain with `dof` revolute joints, full rigid-body
/// inertias and a tool frame. Link lengths 0.15-0.35 m, masses 0.5-2 kg.
pub fn random_chain<R: Rng + ?Sized>(dof: usize, rng: &mut R) -> Result<KinematicModel> {
    if dof == 0 {
        return Err(Error::InvalidArgument("a chain needs at least one joint".into()));
    }
    let mut links = Vec::with_capacity(dof + 1);
    for k in 0..dof {
        let offset = if k == 0 {
            Vector3::zeros()
        } else {
            unit_vector(rng) * rng.gen_range(0.15..0.35)
        };
        let rotation = UnitQuaternion::from_axis_angle(&Unit::new_normalize(unit_vector(rng)), rng.gen_range(0.0..std::f64::consts::PI));
        let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        links.push(Link {
            name: format!("link{}", k + 1),
            parent: None,
            axis: Some(Unit::new_normalize(unit_vector(rng))),
            origin: Isometry3::from_parts(Translation3::from(offset), rotation),
            mass: rng.gen_range(0.5..2.0),
            com: Vector3::from_fn(|_, _| rng.gen_range(-0.1..0.1)),
            inertia: a * a.transpose() * 0.01 + Matrix3::identity() * 0.002,
        });
    }
    links.push(Link::fixed("tool", unit_vector(rng) * 0.1));
    let ee = links.len() - 1;
    KinematicModel::new(format!("random{dof}"), links, ee)
}

/// Uniform random configuration with every joint in `[-bound, bound]`.
pub fn random_configuration<R: Rng + ?Sized>(dof: usize, bound: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dof, |_, _| rng.gen_range(-bound..=bound))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub dt: f64,
    /// Inclusive range of samples per synergy.
    pub samples: (usize, usize),
    /// Range of the Riemannian speed at synergy boundaries.
    pub knot_speed: (f64, f64),
    /// Range of the direction change at each boundary (rad).
    pub turn_angle: (f64, f64),
    /// Integration steps per geodesic.
    pub steps: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            samples: (40, 80),
            knot_speed: (0.5, 1.0),
            turn_angle: (0.5, 1.0),
            steps: geometry::DEFAULT_STEPS,
        }
    }
}

/// Ground-truth motion made of geodesic synergies with cubic timing.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMotion {
    /// Positions and exact velocities. At an inner knot the velocity is the
    /// initial velocity of the synergy that starts there.
    pub trajectory: JointTrajectory,
    /// Sample indices of the synergy ends, first and last sample included.
    pub knots: Vec<usize>,
    /// Direction change at each inner knot (rad).
    pub turn_angles: Vec<f64>,
    pub profiles: Vec<TemporalProfile>,
}

/// Concatenates `synergies` geodesics of `metric` starting at `q0`. Speeds are
/// continuous across knots; directions turn by a random angle in
/// `opts.turn_angle`. Each geodesic is timed by the minimum-acceleration cubic
/// through its boundary speeds, with its length drawn so that the mean speed is
/// within 20% of the mean boundary speed.
pub fn piecewise_geodesic<M: MetricField + ?Sized, R: Rng + ?Sized>(
    metric: &M,
    q0: &DVector<f64>,
    synergies: usize,
    opts: &SynthesisOptions,
    rng: &mut R,
) -> Result<SyntheticMotion> {
    if synergies == 0 {
        return Err(Error::InvalidArgument("at least one synergy is required".into()));
    }
    let n = metric.dim();
    let speeds: Vec<f64> = (0..=synergies)
        .map(|_| rng.gen_range(opts.knot_speed.0..=opts.knot_speed.1))
        .collect();
    let random_dir = |rng: &mut R| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));

    let mut q = q0.clone();
    let mut d = random_dir(rng);
    d /= geometry::norm(metric, &q, &d)?;
    let mut positions = Vec::new();
    let mut velocities = Vec::new();
    let mut knots = vec![0];
    let mut turn_angles = Vec::new();
    let mut profiles = Vec::new();
    for g in 0..synergies {
        let count = rng.gen_range(opts.samples.0..=opts.samples.1);
        let duration = count as f64 * opts.dt;
        let (va, vb) = (speeds[g], speeds[g + 1]);
        let length = rng.gen_range(0.8..1.2) * 0.5 * (va + vb) * duration;
        let profile = temporal_profile(length, duration, va, vb)?;
        // Unit-speed geodesic, parametrized by arc length.
        let curve = geometry::integrate_geodesic(metric, &q, &d, length, opts.steps)?;
        let last = g + 1 == synergies;
        for k in 0..=count {
            if k == count && !last {
                break;
            }
            let t = k as f64 * opts.dt;
            let (p, dp) = curve.path.sample(profile.position(t));
            positions.push(p);
            velocities.push(dp * profile.speed(t));
        }
        knots.push(positions.len() - usize::from(last));
        profiles.push(profile);
        q = curve.endpoint().clone();
        let end_dir = curve.terminal_velocity().clone();
        if !last {
            let phi = rng.gen_range(opts.turn_angle.0..=opts.turn_angle.1);
            let g_end = metric.metric(&q)?;
            let ip = |a: &DVector<f64>, b: &DVector<f64>| a.dot(&(&g_end * b));
            let e = &end_dir / ip(&end_dir, &end_dir).sqrt();
            let mut u = random_dir(rng);
            u -= &e * ip(&u, &e);
            u /= ip(&u, &u).sqrt();
            d = e * phi.cos() + u * phi.sin();
            turn_angles.push(phi);
        }
    }
    let trajectory = JointTrajectory::new(opts.dt, positions)?.with_velocities(velocities)?;
    Ok(SyntheticMotion {
        trajectory,
        knots,
        turn_angles,
        profiles,
    })
}
