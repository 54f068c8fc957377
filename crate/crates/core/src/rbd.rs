//! Tree-structured rigid-body kinematics: forward kinematics, CoM Jacobians,
//! joint-space mass matrix, kinetic energy and centroidal momentum.
//!
//! Every branch is a serial chain hanging off the floating base. A joint's
//! frame sits at `origin_translation` in its parent body frame; the joint
//! moves about (revolute) or along (prismatic) `axis`, expressed in the
//! parent frame, and the child body frame is then rotated by
//! `origin_rotation`:
//!
//! ```text
//! X_child = X_parent · Trans(t_o) · Motion(axis, q) · Rot(R_o)
//! ```
//!
//! Joint-space quantities are expressed in the base frame; base velocities in
//! [`RobotState`] are world-frame.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodySpec<T: Real> {
    pub name: String,
    pub mass: T,
    /// Principal moments about the CoM.
    pub inertia_diag: Vector3<T>,
    /// Columns are the principal axes expressed in the body frame.
    pub principal_axes: Matrix3<T>,
    pub com_offset: Vector3<T>,
}

impl<T: Real> BodySpec<T> {
    /// Rotational inertia about the CoM in the body frame.
    pub fn inertia(&self) -> Matrix3<T> {
        self.principal_axes * Matrix3::from_diagonal(&self.inertia_diag) * self.principal_axes.transpose()
    }

    fn validate(&self) -> Result<()> {
        let tol = T::tol(1e-10);
        if self.mass < T::zero() || self.inertia_diag.iter().any(|&x| x < T::zero()) {
            return Err(invalid(format!("body `{}` has negative mass or inertia", self.name)));
        }
        let defect = (self.principal_axes.transpose() * self.principal_axes - Matrix3::identity()).amax();
        if defect > tol {
            return Err(invalid(format!("principal axes of `{}` are not orthogonal", self.name)));
        }
        if self.mass > T::zero() {
            let d = self.inertia_diag;
            let slack = T::tol(1e-12) * d.amax().max(T::one());
            for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                if d[a] + d[b] + slack < d[c] {
                    return Err(invalid(format!(
                        "principal moments of `{}` violate the triangle inequality",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec<T: Real> {
    pub name: String,
    pub kind: JointKind,
    /// Unit axis in the parent body frame.
    pub axis: Vector3<T>,
    pub origin_rotation: Matrix3<T>,
    pub origin_translation: Vector3<T>,
}

/// One serial chain. `joints[i]` moves `bodies[i]`; the parent of joint 0 is
/// the base and the parent of joint `i > 0` is `bodies[i - 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch<T: Real> {
    pub type_id: String,
    pub label: String,
    pub joints: Vec<JointSpec<T>>,
    pub bodies: Vec<BodySpec<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel<T: Real> {
    pub name: String,
    pub base: BodySpec<T>,
    pub branches: Vec<Branch<T>>,
    offsets: Vec<usize>,
    nj: usize,
}

/// Floating-base state. Base twist is world-frame; `q`, `v` are joint space.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotState<T: Real> {
    pub base_rotation: Matrix3<T>,
    pub base_position: Vector3<T>,
    pub base_angular: Vector3<T>,
    pub base_linear: Vector3<T>,
    pub q: DVector<T>,
    pub v: DVector<T>,
}

impl<T: Real> RobotState<T> {
    /// Base at the world origin, at rest.
    pub fn fixed_base(q: DVector<T>, v: DVector<T>) -> Self {
        RobotState {
            base_rotation: Matrix3::identity(),
            base_position: Vector3::zeros(),
            base_angular: Vector3::zeros(),
            base_linear: Vector3::zeros(),
            q,
            v,
        }
    }
}

/// World-frame (or base-frame, depending on the producer) pose.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

/// Base-frame kinematics of one non-base body.
#[derive(Clone, Debug)]
pub struct BodyKinematics<T: Real> {
    pub branch: usize,
    pub index: usize,
    pub rotation: Matrix3<T>,
    pub position: Vector3<T>,
    pub com: Vector3<T>,
    /// Rotational inertia about the CoM, base frame.
    pub inertia: Matrix3<T>,
}

/// Base-frame location and direction of one joint.
#[derive(Clone, Debug)]
pub struct JointKinematics<T: Real> {
    pub origin: Vector3<T>,
    pub axis: Vector3<T>,
}

/// Base-frame CoM Jacobians of one body (`3 x nj`).
#[derive(Clone, Debug)]
pub struct BodyJacobian<T: Real> {
    pub branch: usize,
    pub index: usize,
    pub j_pos: DMatrix<T>,
    pub j_ori: DMatrix<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticEnergy<T> {
    /// Sum of every body's kinetic energy, with full floating-base coupling.
    pub total: T,
    /// `½ m_B |v_com|² + ½ ωᵀ I_B ω` for the base body alone.
    pub base: T,
    /// `½ vᵀ M̄(q) v`.
    pub joint_space: T,
}

impl<T: Real> RobotModel<T> {
    pub fn new(name: impl Into<String>, base: BodySpec<T>, branches: Vec<Branch<T>>) -> Result<Self> {
        base.validate()?;
        let mut offsets = Vec::with_capacity(branches.len());
        let mut nj = 0;
        for b in &branches {
            if b.joints.is_empty() || b.joints.len() != b.bodies.len() {
                return Err(invalid(format!(
                    "branch `{}` needs one body per joint and at least one joint",
                    b.label
                )));
            }
            for j in &b.joints {
                if (j.axis.norm() - T::one()).abs() > T::tol(1e-10) {
                    return Err(invalid(format!("axis of joint `{}` is not unit length", j.name)));
                }
                let d = (j.origin_rotation.transpose() * j.origin_rotation - Matrix3::identity()).amax();
                if d > T::tol(1e-10) || j.origin_rotation.determinant() < T::zero() {
                    return Err(invalid(format!("origin rotation of joint `{}` is not a rotation", j.name)));
                }
            }
            for body in &b.bodies {
                body.validate()?;
            }
            offsets.push(nj);
            nj += b.joints.len();
        }
        let mut labels: Vec<&str> = branches.iter().map(|b| b.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("branch labels must be unique"));
        }
        Ok(RobotModel {
            name: name.into(),
            base,
            branches,
            offsets,
            nj,
        })
    }

    pub fn nj(&self) -> usize {
        self.nj
    }

    /// Index of the first joint of branch `b` in the joint-space vector.
    pub fn joint_offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    pub fn branch_index(&self, label: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.label == label)
    }

    /// Branch type ids in order of first appearance.
    pub fn branch_types(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for b in &self.branches {
            if !out.contains(&b.type_id) {
                out.push(b.type_id.clone());
            }
        }
        out
    }

    /// Indices of the instances of one branch type, in model order.
    pub fn instances(&self, type_id: &str) -> Vec<usize> {
        (0..self.branches.len())
            .filter(|&b| self.branches[b].type_id == type_id)
            .collect()
    }

    pub fn total_mass(&self) -> T {
        self.branches
            .iter()
            .flat_map(|b| b.bodies.iter())
            .fold(self.base.mass, |acc, body| acc + body.mass)
    }

    /// Describes every way instances of the same branch type differ in joint
    /// kinds, masses or principal inertias. Empty for a properly replicated
    /// model. Loading does not enforce replication so deliberately perturbed
    /// models stay expressible.
    pub fn replication_mismatches(&self) -> Vec<String> {
        let mut out = Vec::new();
        let tol = T::tol(1e-12);
        for ty in self.branch_types() {
            let inst = self.instances(&ty);
            let first = &self.branches[inst[0]];
            for &b in &inst[1..] {
                let other = &self.branches[b];
                if other.joints.len() != first.joints.len() {
                    out.push(format!("`{}` and `{}` have different DoF", first.label, other.label));
                    continue;
                }
                for (i, (ja, jb)) in first.joints.iter().zip(&other.joints).enumerate() {
                    if ja.kind != jb.kind {
                        out.push(format!("joint {i} kind differs between `{}` and `{}`", first.label, other.label));
                    }
                }
                for (i, (ba, bb)) in first.bodies.iter().zip(&other.bodies).enumerate() {
                    if (ba.mass - bb.mass).abs() > tol * ba.mass.max(T::one())
                        || (ba.inertia_diag - bb.inertia_diag).amax() > tol * ba.inertia_diag.amax().max(T::one())
                    {
                        out.push(format!(
                            "body {i} mass or inertia differs between `{}` and `{}`",
                            first.label, other.label
                        ));
                    }
                }
            }
        }
        out
    }

    /// Copy with one body's mass scaled (the body's inertia is unchanged).
    pub fn with_scaled_mass(&self, label: &str, body: usize, factor: T) -> Result<Self> {
        let b = self
            .branch_index(label)
            .ok_or_else(|| invalid(format!("no branch labelled `{label}`")))?;
        let mut out = self.clone();
        let target = out.branches[b]
            .bodies
            .get_mut(body)
            .ok_or_else(|| invalid(format!("branch `{label}` has no body {body}")))?;
        target.mass *= factor;
        Ok(out)
    }

    fn check_q(&self, q: &DVector<T>) -> Result<()> {
        if q.len() != self.nj {
            return Err(invalid(format!(
                "joint vector of length {} for a model with {} joints",
                q.len(),
                self.nj
            )));
        }
        Ok(())
    }

    fn check_state(&self, s: &RobotState<T>) -> Result<()> {
        self.check_q(&s.q)?;
        self.check_q(&s.v)?;
        let r = s.base_rotation;
        if (r.transpose() * r - Matrix3::identity()).amax() > T::tol(1e-10) || r.determinant() < T::zero() {
            return Err(invalid("base orientation is not a rotation matrix"));
        }
        Ok(())
    }

    /// Base-frame poses of all non-base bodies and all joints.
    pub fn base_frame_kinematics(&self, q: &DVector<T>) -> Result<(Vec<BodyKinematics<T>>, Vec<JointKinematics<T>>)> {
        self.check_q(q)?;
        let mut bodies = Vec::new();
        let mut joints = Vec::with_capacity(self.nj);
        for (bi, branch) in self.branches.iter().enumerate() {
            let mut rot = Matrix3::<T>::identity();
            let mut pos = Vector3::<T>::zeros();
            for (k, (joint, body)) in branch.joints.iter().zip(&branch.bodies).enumerate() {
                let qi = q[self.offsets[bi] + k];
                let origin = pos + rot * joint.origin_translation;
                let axis = rot * joint.axis;
                joints.push(JointKinematics { origin, axis });
                match joint.kind {
                    JointKind::Revolute => {
                        let motion = Rotation3::from_axis_angle(&Unit::new_unchecked(joint.axis), qi);
                        pos = origin;
                        rot = rot * motion.into_inner() * joint.origin_rotation;
                    }
                    JointKind::Prismatic => {
                        pos = origin + axis * qi;
                        rot *= joint.origin_rotation;
                    }
                }
                bodies.push(BodyKinematics {
                    branch: bi,
                    index: k,
                    rotation: rot,
                    position: pos,
                    com: pos + rot * body.com_offset,
                    inertia: rot * body.inertia() * rot.transpose(),
                });
            }
        }
        Ok((bodies, joints))
    }

    /// World-frame poses: the base first, then every branch body in order.
    pub fn forward_kinematics(&self, state: &RobotState<T>) -> Result<Vec<Pose<T>>> {
        self.check_state(state)?;
        let (bodies, _) = self.base_frame_kinematics(&state.q)?;
        let (rb, pb) = (state.base_rotation, state.base_position);
        let mut out = vec![Pose {
            rotation: rb,
            translation: pb,
        }];
        out.extend(bodies.iter().map(|b| Pose {
            rotation: rb * b.rotation,
            translation: pb + rb * b.position,
        }));
        Ok(out)
    }

    /// Base-frame CoM Jacobians of every non-base body.
    pub fn body_jacobians(&self, q: &DVector<T>) -> Result<Vec<BodyJacobian<T>>> {
        let (bodies, joints) = self.base_frame_kinematics(q)?;
        Ok(self.jacobians_from(&bodies, &joints))
    }

    fn jacobians_from(&self, bodies: &[BodyKinematics<T>], joints: &[JointKinematics<T>]) -> Vec<BodyJacobian<T>> {
        bodies
            .iter()
            .map(|b| {
                let mut j_pos = DMatrix::zeros(3, self.nj);
                let mut j_ori = DMatrix::zeros(3, self.nj);
                let off = self.offsets[b.branch];
                for k in 0..=b.index {
                    let col = off + k;
                    let jk = &joints[col];
                    match self.branches[b.branch].joints[k].kind {
                        JointKind::Revolute => {
                            let lin = jk.axis.cross(&(b.com - jk.origin));
                            j_pos.fixed_view_mut::<3, 1>(0, col).copy_from(&lin);
                            j_ori.fixed_view_mut::<3, 1>(0, col).copy_from(&jk.axis);
                        }
                        JointKind::Prismatic => {
                            j_pos.fixed_view_mut::<3, 1>(0, col).copy_from(&jk.axis);
                        }
                    }
                }
                BodyJacobian {
                    branch: b.branch,
                    index: b.index,
                    j_pos,
                    j_ori,
                }
            })
            .collect()
    }

    fn body_spec(&self, branch: usize, index: usize) -> &BodySpec<T> {
        &self.branches[branch].bodies[index]
    }

    /// `M̄(q) = Σ_k m_k J_posᵀ J_pos + J_oriᵀ I_k J_ori`, base frame.
    pub fn mass_matrix(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        let (bodies, joints) = self.base_frame_kinematics(q)?;
        let jac = self.jacobians_from(&bodies, &joints);
        let mut m = DMatrix::zeros(self.nj, self.nj);
        for (b, j) in bodies.iter().zip(&jac) {
            let mass = self.body_spec(b.branch, b.index).mass;
            let inertia = DMatrix::from_iterator(3, 3, b.inertia.iter().copied());
            m += j.j_pos.transpose() * &j.j_pos * mass;
            m += j.j_ori.transpose() * inertia * &j.j_ori;
        }
        let sym = (&m + m.transpose()) * T::lit(0.5);
        Ok(sym)
    }

    /// World-frame CoM linear and angular velocity of every body, base first.
    pub fn body_velocities(&self, state: &RobotState<T>) -> Result<Vec<(Vector3<T>, Vector3<T>)>> {
        self.check_state(state)?;
        let (bodies, joints) = self.base_frame_kinematics(&state.q)?;
        let jac = self.jacobians_from(&bodies, &joints);
        let rb = state.base_rotation;
        let (w, vb) = (state.base_angular, state.base_linear);
        let mut out = vec![(vb + w.cross(&(rb * self.base.com_offset)), w)];
        for (b, j) in bodies.iter().zip(&jac) {
            let lin = &j.j_pos * &state.v;
            let ang = &j.j_ori * &state.v;
            let lin = Vector3::new(lin[0], lin[1], lin[2]);
            let ang = Vector3::new(ang[0], ang[1], ang[2]);
            out.push((vb + w.cross(&(rb * b.com)) + rb * lin, w + rb * ang));
        }
        Ok(out)
    }

    /// World-frame CoM positions and inertias of every body, base first.
    fn world_mass_properties(&self, state: &RobotState<T>) -> Result<Vec<(T, Vector3<T>, Matrix3<T>)>> {
        let (bodies, _) = self.base_frame_kinematics(&state.q)?;
        let (rb, pb) = (state.base_rotation, state.base_position);
        let mut out = vec![(
            self.base.mass,
            pb + rb * self.base.com_offset,
            rb * self.base.inertia() * rb.transpose(),
        )];
        for b in &bodies {
            out.push((
                self.body_spec(b.branch, b.index).mass,
                pb + rb * b.com,
                rb * b.inertia * rb.transpose(),
            ));
        }
        Ok(out)
    }

    pub fn kinetic_energy(&self, state: &RobotState<T>) -> Result<KineticEnergy<T>> {
        let vel = self.body_velocities(state)?;
        let props = self.world_mass_properties(state)?;
        let half = T::lit(0.5);
        let body_energy = |(m, _, i): &(T, Vector3<T>, Matrix3<T>), (v, w): &(Vector3<T>, Vector3<T>)| {
            half * *m * v.dot(v) + half * w.dot(&(i * w))
        };
        let total = props
            .iter()
            .zip(&vel)
            .fold(T::zero(), |acc, (p, v)| acc + body_energy(p, v));
        let base = body_energy(&props[0], &vel[0]);
        let m = self.mass_matrix(&state.q)?;
        let joint_space = half * state.v.dot(&(m * &state.v));
        Ok(KineticEnergy {
            total,
            base,
            joint_space,
        })
    }

    /// `½ vᵀ M̄(q) v`.
    pub fn joint_space_energy(&self, q: &DVector<T>, v: &DVector<T>) -> Result<T> {
        self.check_q(v)?;
        let m = self.mass_matrix(q)?;
        Ok(T::lit(0.5) * v.dot(&(m * v)))
    }

    /// World-frame linear momentum and angular momentum about the CoM.
    pub fn centroidal_momentum(&self, state: &RobotState<T>) -> Result<(Vector3<T>, Vector3<T>)> {
        let total_mass = self.total_mass();
        if total_mass <= T::zero() {
            return Err(Error::UndefinedCom);
        }
        let vel = self.body_velocities(state)?;
        let props = self.world_mass_properties(state)?;
        let com = props
            .iter()
            .fold(Vector3::zeros(), |acc, (m, c, _)| acc + c * *m)
            / total_mass;
        let mut l = Vector3::zeros();
        let mut k = Vector3::zeros();
        for ((m, c, i), (v, w)) in props.iter().zip(&vel) {
            l += v * *m;
            k += i * w + (c - com).cross(&(v * *m));
        }
        Ok((l, k))
    }

    /// World-frame centre of mass.
    pub fn center_of_mass(&self, state: &RobotState<T>) -> Result<Vector3<T>> {
        let total_mass = self.total_mass();
        if total_mass <= T::zero() {
            return Err(Error::UndefinedCom);
        }
        self.check_state(state)?;
        let props = self.world_mass_properties(state)?;
        Ok(props.iter().fold(Vector3::zeros(), |acc, (m, c, _)| acc + c * *m) / total_mass)
    }
}

// ---- TOML file format ------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BodyFile {
    name: String,
    mass: f64,
    inertia_diag: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    principal_axes: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    com_offset: Option<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct JointFile {
    name: String,
    kind: JointKind,
    axis: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin_translation: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin_rotation: Option<[[f64; 3]; 3]>,
}

#[derive(Serialize, Deserialize)]
struct BranchFile {
    #[serde(rename = "type")]
    type_id: String,
    label: String,
    joint: Vec<JointFile>,
    body: Vec<BodyFile>,
}

#[derive(Serialize, Deserialize)]
struct RobotFile {
    #[serde(default)]
    name: String,
    base: BodyFile,
    #[serde(default)]
    branch: Vec<BranchFile>,
}

fn mat3<T: Real>(m: Option<[[f64; 3]; 3]>) -> Matrix3<T> {
    match m {
        Some(r) => Matrix3::from_fn(|i, j| T::lit(r[i][j])),
        None => Matrix3::identity(),
    }
}

fn vec3<T: Real>(v: Option<[f64; 3]>) -> Vector3<T> {
    v.map(|v| Vector3::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2])))
        .unwrap_or_else(Vector3::zeros)
}

fn mat_out<T: Real>(m: &Matrix3<T>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)].to_f64_lossy()))
}

fn vec_out<T: Real>(v: &Vector3<T>) -> [f64; 3] {
    std::array::from_fn(|i| v[i].to_f64_lossy())
}

impl BodyFile {
    fn into_spec<T: Real>(self) -> BodySpec<T> {
        BodySpec {
            name: self.name,
            mass: T::lit(self.mass),
            inertia_diag: vec3(Some(self.inertia_diag)),
            principal_axes: mat3(self.principal_axes),
            com_offset: vec3(self.com_offset),
        }
    }

    fn from_spec<T: Real>(b: &BodySpec<T>) -> Self {
        BodyFile {
            name: b.name.clone(),
            mass: b.mass.to_f64_lossy(),
            inertia_diag: vec_out(&b.inertia_diag),
            principal_axes: Some(mat_out(&b.principal_axes)),
            com_offset: Some(vec_out(&b.com_offset)),
        }
    }
}

impl<T: Real> RobotModel<T> {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: RobotFile = toml::from_str(text).map_err(|e| Error::Format {
            path: String::new(),
            reason: e.to_string(),
        })?;
        let base_name = file.base.name.clone();
        let base = file.base.into_spec();
        let mut branches = Vec::with_capacity(file.branch.len());
        for b in file.branch {
            let mut parent = base_name.clone();
            let mut joints = Vec::with_capacity(b.joint.len());
            for (j, body) in b.joint.iter().zip(&b.body) {
                if let Some(p) = &j.parent {
                    if *p != parent {
                        return Err(invalid(format!(
                            "joint `{}` names parent `{p}` but its chain predecessor is `{parent}`",
                            j.name
                        )));
                    }
                }
                parent = body.name.clone();
            }
            for j in b.joint {
                joints.push(JointSpec {
                    name: j.name,
                    kind: j.kind,
                    axis: vec3(Some(j.axis)),
                    origin_rotation: mat3(j.origin_rotation),
                    origin_translation: vec3(j.origin_translation),
                });
            }
            branches.push(Branch {
                type_id: b.type_id,
                label: b.label,
                joints,
                bodies: b.body.into_iter().map(BodyFile::into_spec).collect(),
            });
        }
        RobotModel::new(file.name, base, branches)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Format { reason, .. } => Error::Format {
                path: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let file = RobotFile {
            name: self.name.clone(),
            base: BodyFile::from_spec(&self.base),
            branch: self
                .branches
                .iter()
                .map(|b| BranchFile {
                    type_id: b.type_id.clone(),
                    label: b.label.clone(),
                    joint: b
                        .joints
                        .iter()
                        .map(|j| JointFile {
                            name: j.name.clone(),
                            kind: j.kind,
                            axis: vec_out(&j.axis),
                            parent: None,
                            origin_translation: Some(vec_out(&j.origin_translation)),
                            origin_rotation: Some(mat_out(&j.origin_rotation)),
                        })
                        .collect(),
                    body: b.bodies.iter().map(BodyFile::from_spec).collect(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("robot model serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn body(name: &str, mass: f64, diag: [f64; 3], com: [f64; 3]) -> BodySpec<f64> {
        BodySpec {
            name: name.into(),
            mass,
            inertia_diag: Vector3::from(diag),
            principal_axes: Matrix3::identity(),
            com_offset: Vector3::from(com),
        }
    }

    fn joint(name: &str, kind: JointKind, axis: [f64; 3], t: [f64; 3]) -> JointSpec<f64> {
        JointSpec {
            name: name.into(),
            kind,
            axis: Vector3::from(axis),
            origin_rotation: Matrix3::identity(),
            origin_translation: Vector3::from(t),
        }
    }

    /// Planar arm with links along +x and both joints about z.
    fn two_link(m1: f64, m2: f64, l1: f64, c1: f64, c2: f64, i1: f64, i2: f64) -> RobotModel<f64> {
        let base = body("base", 0.0, [0.0; 3], [0.0; 3]);
        let arm = Branch {
            type_id: "arm".into(),
            label: "A".into(),
            joints: vec![
                joint("j1", JointKind::Revolute, [0.0, 0.0, 1.0], [0.0; 3]),
                joint("j2", JointKind::Revolute, [0.0, 0.0, 1.0], [l1, 0.0, 0.0]),
            ],
            bodies: vec![
                body("l1", m1, [i1, i1, i1], [c1, 0.0, 0.0]),
                body("l2", m2, [i2, i2, i2], [c2, 0.0, 0.0]),
            ],
        };
        RobotModel::new("2R", base, vec![arm]).unwrap()
    }

    #[test]
    fn planar_arm_forward_kinematics() {
        let (l1, l2) = (0.7, 0.4);
        let model = two_link(1.0, 1.0, l1, 0.3, 0.2, 0.01, 0.01);
        let q = DVector::from_vec(vec![std::f64::consts::FRAC_PI_2, 0.0]);
        let state = RobotState::fixed_base(q, DVector::zeros(2));
        let poses = model.forward_kinematics(&state).unwrap();
        let tip = poses[2].translation + poses[2].rotation * Vector3::new(l2, 0.0, 0.0);
        assert!((tip - Vector3::new(0.0, l1 + l2, 0.0)).norm() < 1e-12);

        let mut moved = state.clone();
        moved.base_position = Vector3::new(1.0, -2.0, 0.5);
        let shifted = model.forward_kinematics(&moved).unwrap();
        for (a, b) in poses.iter().zip(&shifted) {
            assert_eq!(b.translation - a.translation, moved.base_position);
        }
    }

    #[test]
    fn planar_arm_mass_matrix_matches_closed_form() {
        let (m1, m2, l1, c1, c2, i1, i2) = (1.3, 0.8, 0.6, 0.25, 0.3, 0.02, 0.015);
        let model = two_link(m1, m2, l1, c1, c2, i1, i2);
        for k in 0..10 {
            let q1 = 0.37 * k as f64 - 1.2;
            let q2 = (1.7 * k as f64).sin() * 2.5;
            let m = model.mass_matrix(&DVector::from_vec(vec![q1, q2])).unwrap();
            let cq = q2.cos();
            let m11 = m1 * c1 * c1 + i1 + m2 * (l1 * l1 + c2 * c2 + 2.0 * l1 * c2 * cq) + i2;
            let m12 = m2 * (c2 * c2 + l1 * c2 * cq) + i2;
            let m22 = m2 * c2 * c2 + i2;
            assert!((m[(0, 0)] - m11).abs() < 1e-12);
            assert!((m[(0, 1)] - m12).abs() < 1e-12);
            assert!((m[(1, 0)] - m12).abs() < 1e-12);
            assert!((m[(1, 1)] - m22).abs() < 1e-12);
        }
    }

    #[test]
    fn pendulum() {
        let (m, l, iz) = (2.0, 0.5, 0.03);
        let base = body("base", 1.0, [0.1, 0.1, 0.1], [0.0; 3]);
        let arm = Branch {
            type_id: "p".into(),
            label: "P".into(),
            joints: vec![joint("j", JointKind::Revolute, [0.0, 1.0, 0.0], [0.1, 0.0, 0.0])],
            bodies: vec![body("bob", m, [iz, iz, iz], [0.0, 0.0, -l])],
        };
        let model = RobotModel::new("pendulum", base, vec![arm]).unwrap();
        let q = DVector::from_vec(vec![0.3]);
        let mm = model.mass_matrix(&q).unwrap();
        assert!((mm[(0, 0)] - (m * l * l + iz)).abs() < 1e-12);
        let jac = &model.body_jacobians(&q).unwrap()[0];
        let (bodies, joints) = model.base_frame_kinematics(&q).unwrap();
        let expected = joints[0].axis.cross(&(bodies[0].com - joints[0].origin));
        for r in 0..3 {
            assert!((jac.j_pos[(r, 0)] - expected[r]).abs() < 1e-15);
            assert_eq!(jac.j_ori[(r, 0)], joints[0].axis[r]);
        }
    }

    #[test]
    fn free_base_energy_and_zero_model() {
        let base = body("base", 2.0, [0.1, 0.2, 0.25], [0.0; 3]);
        let model = RobotModel::<f64>::new("box", base, vec![]).unwrap();
        let mut s = RobotState::fixed_base(DVector::zeros(0), DVector::zeros(0));
        s.base_linear = Vector3::new(1.0, 0.0, 0.0);
        let e = model.kinetic_energy(&s).unwrap();
        assert!((e.total - 1.0).abs() < 1e-15 && (e.base - 1.0).abs() < 1e-15);
        assert_eq!(e.joint_space, 0.0);
        let (l, k) = model.centroidal_momentum(&s).unwrap();
        assert_eq!(l, Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(k, Vector3::zeros());

        let zero = two_link(0.0, 0.0, 1.0, 0.5, 0.5, 0.0, 0.0);
        let m = zero.mass_matrix(&DVector::from_vec(vec![0.4, -0.2])).unwrap();
        assert!(m.iter().all(|&x| x == 0.0));
        let st = RobotState::fixed_base(DVector::zeros(2), DVector::zeros(2));
        assert!(matches!(zero.centroidal_momentum(&st), Err(Error::UndefinedCom)));
    }

    #[test]
    fn dimension_and_validation_errors() {
        let model = two_link(1.0, 1.0, 0.5, 0.2, 0.2, 0.01, 0.01);
        assert!(model.mass_matrix(&DVector::zeros(3)).is_err());
        let mut bad = model.branches[0].clone();
        bad.joints[0].axis = Vector3::new(1.0, 1.0, 0.0);
        assert!(RobotModel::new("bad", model.base.clone(), vec![bad]).is_err());
        let flat = body("flat", 1.0, [0.1, 0.1, 0.5], [0.0; 3]);
        assert!(RobotModel::<f64>::new("bad", flat, vec![]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let model = two_link(1.0, 2.0, 0.5, 0.2, 0.3, 0.01, 0.02);
        let text = model.to_toml_string();
        let back = RobotModel::<f64>::from_toml_str(&text).unwrap();
        assert_eq!(back, model);
    }
}
