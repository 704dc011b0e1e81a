//! JSON model documents.
//!
//! ```json
//! {
//!   "name": "pendulum",
//!   "end_effector": "rod",
//!   "links": [
//!     { "name": "rod", "parent": null, "axis": [0, 0, 1],
//!       "origin": { "xyz": [0, 0, 0], "quat": [1, 0, 0, 0] },
//!       "mass": 1.0, "com": [1, 0, 0], "inertia": [0, 0, 0, 0, 0, 0, 0, 0, 0] }
//!   ]
//! }
//! ```
//!
//! A link whose `axis` is `null` or absent is rigidly attached to its parent.

use nalgebra::{Isometry3, Matrix3, Quaternion, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{KinematicModel, Link, UNIT_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    name: String,
    end_effector: String,
    links: Vec<LinkDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    name: String,
    parent: Option<String>,
    #[serde(default)]
    axis: Option<[f64; 3]>,
    origin: OriginDoc,
    mass: f64,
    com: [f64; 3],
    inertia: [f64; 9],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OriginDoc {
    xyz: [f64; 3],
    quat: [f64; 4],
}

/// Parses and validates a model document.
pub fn load_model(document: &str) -> Result<KinematicModel> {
    let doc: ModelDoc =
        serde_json::from_str(document).map_err(|e| Error::Document(e.to_string()))?;
    KinematicModel::from_doc(doc)
}

impl KinematicModel {
    pub fn from_json(document: &str) -> Result<Self> {
        load_model(document)
    }

    fn from_doc(doc: ModelDoc) -> Result<Self> {
        let mut links: Vec<Link> = Vec::with_capacity(doc.links.len());
        for (i, l) in doc.links.into_iter().enumerate() {
            let bad = |reason: String| Error::InvalidLink {
                link: l.name.clone(),
                reason,
            };
            let expected_parent = i.checked_sub(1).map(|p: usize| links[p].name.clone());
            match (&l.parent, expected_parent) {
                (None, None) => {}
                (Some(p), Some(e)) if *p == e => {}
                (p, _) => {
                    return Err(bad(format!(
                        "broken chain: parent {:?} is not the previous link",
                        p
                    )))
                }
            }
            let axis = match l.axis {
                None => None,
                Some(a) => {
                    let v = Vector3::from(a);
                    if (v.norm() - 1.0).abs() > UNIT_TOLERANCE {
                        return Err(bad("non-unit joint axis".into()));
                    }
                    Some(Unit::new_unchecked(v))
                }
            };
            let [w, x, y, z] = l.origin.quat;
            let quat = Quaternion::new(w, x, y, z);
            if (quat.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(bad("non-unit origin quaternion".into()));
            }
            links.push(Link {
                name: l.name.clone(),
                parent: i.checked_sub(1),
                axis,
                origin: Isometry3::from_parts(
                    Translation3::from(Vector3::from(l.origin.xyz)),
                    UnitQuaternion::new_unchecked(quat),
                ),
                mass: l.mass,
                com: Vector3::from(l.com),
                inertia: Matrix3::from_row_slice(&l.inertia),
            });
        }
        let mut names = std::collections::HashSet::new();
        for l in &links {
            if !names.insert(l.name.as_str()) {
                return Err(Error::InvalidLink {
                    link: l.name.clone(),
                    reason: "duplicate link name".into(),
                });
            }
        }
        let ee = links
            .iter()
            .position(|l| l.name == doc.end_effector)
            .ok_or_else(|| {
                Error::Document(format!("end effector `{}` is not a link", doc.end_effector))
            })?;
        KinematicModel::new(doc.name, links, ee)
    }

    /// Serializes the model back to its document form.
    pub fn to_json(&self) -> String {
        let links = self
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let q = l.origin.rotation.quaternion();
                let t = l.origin.translation.vector;
                let inertia: Vec<f64> = l.inertia.transpose().iter().copied().collect();
                LinkDoc {
                    name: l.name.clone(),
                    parent: i.checked_sub(1).map(|p| self.links[p].name.clone()),
                    axis: l.axis.map(|a| [a.x, a.y, a.z]),
                    origin: OriginDoc {
                        xyz: [t.x, t.y, t.z],
                        quat: [q.w, q.i, q.j, q.k],
                    },
                    mass: l.mass,
                    com: [l.com.x, l.com.y, l.com.z],
                    inertia: inertia.try_into().expect("3x3"),
                }
            })
            .collect();
        let doc = ModelDoc {
            name: self.name.clone(),
            end_effector: self.links[self.end_effector].name.clone(),
            links,
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }
}
