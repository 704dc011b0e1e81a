//! Serial revolute chains: forward kinematics, geometric Jacobian and the
//! joint-space mass-inertia matrix (composite rigid body algorithm) together
//! with its configuration derivatives.
//!
//! Spatial quantities are handled in Plücker coordinates expressed in the base
//! frame, angular part first: a motion vector is `(ω; v_O)` where `v_O` is the
//! velocity of the body point currently at the base origin.

mod document;
mod spatial;

use nalgebra::{
    DMatrix, DVector, Isometry3, Matrix3, Matrix6, Matrix6xX, Translation3, Unit, UnitQuaternion,
    Vector3, Vector6,
};

use crate::error::{Error, Result};
use crate::geometry::MetricField;
use crate::pose::TaskPose;

pub use document::load_model;
use spatial::{crf, crm, spatial_inertia};

/// Relative tolerance used when checking unit axes and quaternions.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Step of the central finite-difference reference for metric derivatives (rad).
pub const METRIC_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    /// Index of the parent link, `None` for the link attached to the base.
    pub parent: Option<usize>,
    /// Revolute joint axis in the link frame; `None` for a rigidly attached link.
    pub axis: Option<Unit<Vector3<f64>>>,
    /// Placement of the link frame in the parent frame at zero joint angle.
    pub origin: Isometry3<f64>,
    pub mass: f64,
    /// Center of mass in the link frame.
    pub com: Vector3<f64>,
    /// Inertia tensor about the center of mass, link frame.
    pub inertia: Matrix3<f64>,
}

impl Link {
    /// A revolute link carrying a point mass.
    pub fn revolute(name: &str, axis: Vector3<f64>, offset: Vector3<f64>, mass: f64, com: Vector3<f64>) -> Self {
        Self {
            name: name.to_owned(),
            parent: None,
            axis: Some(Unit::new_normalize(axis)),
            origin: Isometry3::from_parts(Translation3::from(offset), UnitQuaternion::identity()),
            mass,
            com,
            inertia: Matrix3::zeros(),
        }
    }

    /// A massless frame rigidly attached to its parent, e.g. a tool tip.
    pub fn fixed(name: &str, offset: Vector3<f64>) -> Self {
        Self {
            name: name.to_owned(),
            parent: None,
            axis: None,
            origin: Isometry3::from_parts(Translation3::from(offset), UnitQuaternion::identity()),
            mass: 0.0,
            com: Vector3::zeros(),
            inertia: Matrix3::zeros(),
        }
    }

    pub fn is_joint(&self) -> bool {
        self.axis.is_some()
    }
}

/// A validated serial chain of revolute joints.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicModel {
    name: String,
    links: Vec<Link>,
    end_effector: usize,
    /// Link index of each joint, in joint order.
    joints: Vec<usize>,
}

/// Kinematic state of every link at one configuration.
struct ChainState {
    frames: Vec<Isometry3<f64>>,
    /// Motion subspace of each joint, base frame.
    subspaces: Vec<Vector6<f64>>,
}

impl KinematicModel {
    /// Builds a model from links listed base to tip. Parent indices are
    /// assigned to form the chain.
    pub fn new(name: impl Into<String>, mut links: Vec<Link>, end_effector: usize) -> Result<Self> {
        for (i, l) in links.iter_mut().enumerate() {
            l.parent = i.checked_sub(1);
        }
        let model = Self {
            name: name.into(),
            joints: links
                .iter()
                .enumerate()
                .filter(|(_, l)| l.is_joint())
                .map(|(i, _)| i)
                .collect(),
            links,
            end_effector,
        };
        model.validate()?;
        Ok(model)
    }

    /// Planar chain rotating about z with point masses at the link tips and a
    /// massless tool frame at the tip of the last link.
    pub fn planar(name: &str, lengths: &[f64], masses: &[f64]) -> Result<Self> {
        if lengths.len() != masses.len() || lengths.is_empty() {
            return Err(Error::InvalidArgument(
                "planar chain needs one mass per link length".into(),
            ));
        }
        let mut links = Vec::with_capacity(lengths.len() + 1);
        let mut offset = 0.0;
        for (i, (&l, &m)) in lengths.iter().zip(masses).enumerate() {
            links.push(Link::revolute(
                &format!("link{}", i + 1),
                Vector3::z(),
                Vector3::new(offset, 0.0, 0.0),
                m,
                Vector3::new(l, 0.0, 0.0),
            ));
            offset = l;
        }
        links.push(Link::fixed("tool", Vector3::new(offset, 0.0, 0.0)));
        let ee = links.len() - 1;
        Self::new(name, links, ee)
    }

    fn validate(&self) -> Result<()> {
        if self.links.is_empty() {
            return Err(Error::Document("model has no links".into()));
        }
        if self.joints.is_empty() {
            return Err(Error::Document("model has no revolute joints".into()));
        }
        if self.end_effector >= self.links.len() {
            return Err(Error::Document(format!(
                "end effector index {} out of range",
                self.end_effector
            )));
        }
        for (i, l) in self.links.iter().enumerate() {
            let bad = |reason: &str| Error::InvalidLink {
                link: l.name.clone(),
                reason: reason.to_owned(),
            };
            if l.parent != i.checked_sub(1) {
                return Err(bad("parent is not the previous link; only serial chains are supported"));
            }
            if let Some(axis) = &l.axis {
                if !axis.iter().all(|x| x.is_finite()) {
                    return Err(bad("non-finite joint axis"));
                }
            }
            let t = l.origin.translation.vector;
            if !t.iter().all(|x| x.is_finite()) {
                return Err(bad("non-finite origin"));
            }
            if !(l.mass.is_finite() && l.mass >= 0.0) {
                return Err(bad("mass must be finite and non-negative"));
            }
            if !l.com.iter().all(|x| x.is_finite()) || !l.inertia.iter().all(|x| x.is_finite()) {
                return Err(bad("non-finite inertial parameters"));
            }
            check_inertia(&l.inertia).map_err(bad)?;
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn end_effector(&self) -> usize {
        self.end_effector
    }

    /// Number of revolute joints.
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn check_configuration(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                actual: q.len(),
            });
        }
        if !q.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("configuration has non-finite entries".into()));
        }
        Ok(())
    }

    fn state(&self, q: &DVector<f64>) -> ChainState {
        let mut frames: Vec<Isometry3<f64>> = Vec::with_capacity(self.links.len());
        let mut subspaces = Vec::with_capacity(self.joints.len());
        let mut j = 0;
        for l in &self.links {
            let parent = frames.last().copied().unwrap_or_else(Isometry3::identity);
            let mut frame = parent * l.origin;
            if let Some(axis) = &l.axis {
                frame *= UnitQuaternion::from_axis_angle(axis, q[j]);
                let z = frame.rotation * axis.into_inner();
                let p = frame.translation.vector;
                let s = p.cross(&z);
                subspaces.push(Vector6::new(z.x, z.y, z.z, s.x, s.y, s.z));
                j += 1;
            }
            frames.push(frame);
        }
        ChainState { frames, subspaces }
    }

    /// Base-frame placement of every link frame.
    pub fn link_frames(&self, q: &DVector<f64>) -> Result<Vec<Isometry3<f64>>> {
        self.check_configuration(q)?;
        Ok(self.state(q).frames)
    }

    /// Pose of the end-effector frame in the base frame.
    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<TaskPose> {
        self.check_configuration(q)?;
        Ok(TaskPose::from_isometry(&self.state(q).frames[self.end_effector]))
    }

    /// Geometric Jacobian, linear rows on top, angular rows below, both in the base frame.
    /// Joints distal to the end-effector link contribute zero columns.
    pub fn geometric_jacobian(&self, q: &DVector<f64>) -> Result<Matrix6xX<f64>> {
        self.check_configuration(q)?;
        let st = self.state(q);
        let p_ee = st.frames[self.end_effector].translation.vector;
        let mut jac = Matrix6xX::zeros(self.dof());
        for (j, &li) in self.joints.iter().enumerate() {
            if li > self.end_effector {
                continue;
            }
            let z = st.subspaces[j].fixed_rows::<3>(0).into_owned();
            let p = st.frames[li].translation.vector;
            let lin = z.cross(&(p_ee - p));
            jac.fixed_view_mut::<3, 1>(0, j).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, j).copy_from(&z);
        }
        Ok(jac)
    }

    /// Composite spatial inertia of each joint's subtree, base frame.
    fn composites(&self, st: &ChainState) -> Vec<Matrix6<f64>> {
        let mut acc = Matrix6::zeros();
        let mut per_link = vec![Matrix6::zeros(); self.links.len()];
        for (i, l) in self.links.iter().enumerate().rev() {
            if l.mass > 0.0 || l.inertia != Matrix3::zeros() {
                acc += spatial_inertia(&st.frames[i], l.mass, &l.com, &l.inertia);
            }
            per_link[i] = acc;
        }
        self.joints.iter().map(|&li| per_link[li]).collect()
    }

    /// Joint-space mass-inertia matrix via the composite rigid body algorithm.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_configuration(q)?;
        let g = self.mass_matrix_unchecked(q);
        check_positive_definite(&g)?;
        Ok(g)
    }

    fn mass_matrix_unchecked(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let st = self.state(q);
        let ic = self.composites(&st);
        let n = self.dof();
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            let f = ic[j] * st.subspaces[j];
            for i in 0..=j {
                let v = st.subspaces[i].dot(&f);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Slices `∂G/∂q_k`, `k = 0..n`, propagated analytically through the
    /// composite inertias.
    pub fn mass_matrix_derivatives(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_configuration(q)?;
        let st = self.state(q);
        let ic = self.composites(&st);
        let forces: Vec<Vector6<f64>> = (0..self.dof()).map(|j| ic[j] * st.subspaces[j]).collect();
        Ok(self.derivatives_from(&st, &ic, &forces))
    }

    /// `G` and its derivative slices from one pass over the chain. `G` is not
    /// checked for definiteness here; factorizing callers do that.
    fn mass_matrix_with_derivatives(&self, q: &DVector<f64>) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        self.check_configuration(q)?;
        let st = self.state(q);
        let ic = self.composites(&st);
        let n = self.dof();
        let forces: Vec<Vector6<f64>> = (0..n).map(|j| ic[j] * st.subspaces[j]).collect();
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = st.subspaces[i].dot(&forces[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok((g, self.derivatives_from(&st, &ic, &forces)))
    }

    fn derivatives_from(&self, st: &ChainState, ic: &[Matrix6<f64>], forces: &[Vector6<f64>]) -> Vec<DMatrix<f64>> {
        let n = self.dof();
        let s = &st.subspaces;
        let mut out = vec![DMatrix::zeros(n, n); n];
        for k in 0..n {
            let xf = crf(&s[k]);
            // Rate of change of the composite distal to k.
            let b = xf * ic[k] - ic[k] * crm(&s[k]);
            let d = &mut out[k];
            for j in 0..n {
                // Only pairs i < k contribute.
                if j >= k {
                    let rot = xf * forces[j];
                    for i in 0..k.min(j + 1) {
                        let v = s[i].dot(&rot);
                        d[(i, j)] = v;
                        d[(j, i)] = v;
                    }
                } else {
                    let bs = b * s[j];
                    for i in 0..=j {
                        let v = s[i].dot(&bs);
                        d[(i, j)] = v;
                        d[(j, i)] = v;
                    }
                }
            }
        }
        out
    }

    /// Central finite differences of [`Self::mass_matrix`] with step
    /// [`METRIC_FD_STEP`]; the reference the analytic derivatives are held to.
    pub fn mass_matrix_derivatives_fd(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_configuration(q)?;
        let h = METRIC_FD_STEP;
        (0..self.dof())
            .map(|k| {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[k] += h;
                qm[k] -= h;
                Ok((self.mass_matrix_unchecked(&qp) - self.mass_matrix_unchecked(&qm)) / (2.0 * h))
            })
            .collect()
    }

    /// Sum of the link offsets from the first joint to the end effector (m).
    pub fn arm_length(&self) -> f64 {
        let first = self.joints[0];
        self.links[first + 1..=self.end_effector.max(first)]
            .iter()
            .map(|l| l.origin.translation.vector.norm())
            .sum()
    }

    /// Base-frame placement of the first joint, which does not depend on q.
    pub fn shoulder_frame(&self) -> TaskPose {
        let first = self.joints[0];
        let iso = self.links[..=first]
            .iter()
            .fold(Isometry3::identity(), |acc, l| acc * l.origin);
        TaskPose::from_isometry(&iso)
    }
}

impl MetricField for KinematicModel {
    fn dim(&self) -> usize {
        self.dof()
    }

    fn metric(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.mass_matrix(q)
    }

    fn metric_derivatives(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.mass_matrix_derivatives(q)
    }

    fn metric_and_derivatives(&self, q: &DVector<f64>) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        self.mass_matrix_with_derivatives(q)
    }
}

fn check_inertia(inertia: &Matrix3<f64>) -> std::result::Result<(), &'static str> {
    let scale = inertia.amax().max(1.0);
    if (inertia - inertia.transpose()).amax() > 1e-9 * scale {
        return Err("inertia tensor is not symmetric");
    }
    let eig = inertia.symmetric_eigenvalues();
    if eig.min() < -1e-12 * scale {
        return Err("inertia tensor is not positive semi-definite");
    }
    Ok(())
}

/// Cholesky succeeds and every pivot exceeds `1e-12 · trace`.
pub(crate) fn check_positive_definite(g: &DMatrix<f64>) -> Result<()> {
    let floor = 1e-12 * g.trace().abs();
    match g.clone().cholesky() {
        Some(ch) if ch.l_dirty().diagonal().iter().all(|&d| d * d > floor) => Ok(()),
        _ => Err(Error::NotPositiveDefinite),
    }
}
