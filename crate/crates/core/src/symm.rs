//! Morphological symmetries: the group action on a robot's state, candidate
//! enumeration from the base inertia, sampled verification and the full
//! identification procedure.
//!
//! A group element acts by an orthogonal map `R` of the base frame, a
//! permutation of branch instances of each type and a signed permutation of
//! joints within a branch. Base-frame CoM velocities are compared: the image
//! of body `n` in branch `j` is body `n` in branch `g(j)`, and
//!
//! ```text
//! J_{g(j),n}(ρ_M(g) q) ρ_M(g) v = R_g J_{j,n}(q) v           (linear)
//! J_{g(j),n}(ρ_M(g) q) ρ_M(g) v = det(R_g) R_g J_{j,n}(q) v  (angular)
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::groups::{FiniteGroup, GroupElement};
use crate::isotypic::{decompose, IsotypicDecomposition};
use crate::linalg;
use crate::rbd::{JointKind, RobotModel};
use crate::reps::Representation;
use crate::scalar::Real;

/// Absolute tolerance (meters, unit vectors) for geometric matching.
const GEOMETRY_TOL: f64 = 1e-8;

/// One branch instance as listed in a symmetry spec.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchDecl {
    #[serde(rename = "type")]
    pub type_id: String,
    pub label: String,
    pub dof: usize,
}

/// Action of one generator on the instances of one branch type.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchAction {
    /// `perm[i]` is the image of the `i`-th instance of the type (instances
    /// counted in declaration order).
    pub perm: Vec<usize>,
    /// Signed permutation on the branch's joints; solved from the joint axes
    /// when absent.
    pub joint_rep: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub name: String,
    /// Linear part of the Euclidean isometry, base frame.
    pub spatial: Matrix3<f64>,
    pub branches: BTreeMap<String, BranchAction>,
}

/// Declarative description of a morphological symmetry group: one entry per
/// generator of `group`, in the group's generator order.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrySpec {
    pub group: String,
    pub branches: Vec<BranchDecl>,
    pub generators: Vec<GeneratorSpec>,
}

#[derive(Serialize, Deserialize)]
struct BranchActionFile {
    perm: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joint_rep: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorFile {
    name: String,
    spatial: [[f64; 3]; 3],
    #[serde(default)]
    branch: BTreeMap<String, BranchActionFile>,
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    group: String,
    #[serde(default)]
    branch: Vec<BranchDecl>,
    #[serde(default)]
    generator: Vec<GeneratorFile>,
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(invalid("joint_rep must be a square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl SymmetrySpec {
    pub fn parse_group(&self) -> Result<FiniteGroup> {
        FiniteGroup::parse(&self.group)
    }

    pub fn types(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for b in &self.branches {
            if !out.contains(&b.type_id) {
                out.push(b.type_id.clone());
            }
        }
        out
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::Format {
            path: String::new(),
            reason: e.to_string(),
        })?;
        let generators = file
            .generator
            .into_iter()
            .map(|g| {
                let branches = g
                    .branch
                    .into_iter()
                    .map(|(ty, a)| {
                        let joint_rep = a.joint_rep.as_deref().map(rows_to_matrix).transpose()?;
                        Ok((ty, BranchAction { perm: a.perm, joint_rep }))
                    })
                    .collect::<Result<BTreeMap<_, _>>>()?;
                Ok(GeneratorSpec {
                    name: g.name,
                    spatial: Matrix3::from_fn(|i, j| g.spatial[i][j]),
                    branches,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SymmetrySpec {
            group: file.group,
            branches: file.branch,
            generators,
        })
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
        let file = SpecFile {
            group: self.group.clone(),
            branch: self.branches.clone(),
            generator: self
                .generators
                .iter()
                .map(|g| GeneratorFile {
                    name: g.name.clone(),
                    spatial: std::array::from_fn(|i| std::array::from_fn(|j| clean_zero(g.spatial[(i, j)]))),
                    branch: g
                        .branches
                        .iter()
                        .map(|(ty, a)| {
                            (
                                ty.clone(),
                                BranchActionFile {
                                    perm: a.perm.clone(),
                                    joint_rep: a.joint_rep.as_ref().map(|m| {
                                        (0..m.nrows())
                                            .map(|i| (0..m.ncols()).map(|j| clean_zero(m[(i, j)])).collect())
                                            .collect()
                                    }),
                                },
                            )
                        })
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("symmetry spec serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    /// Spec of the trivial group for a model.
    pub fn trivial<T: Real>(model: &RobotModel<T>) -> Self {
        SymmetrySpec {
            group: "C1".into(),
            branches: branch_decls(model),
            generators: Vec::new(),
        }
    }
}

/// Avoids printing `-0` in spec files.
fn clean_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

pub fn branch_decls<T: Real>(model: &RobotModel<T>) -> Vec<BranchDecl> {
    model
        .branches
        .iter()
        .map(|b| BranchDecl {
            type_id: b.type_id.clone(),
            label: b.label.clone(),
            dof: b.joints.len(),
        })
        .collect()
}

/// The group action described by a spec with every joint rep present.
#[derive(Clone, Debug)]
pub struct GroupAction<T: Real> {
    group: Arc<FiniteGroup>,
    branches: Vec<BranchDecl>,
    offsets: Vec<usize>,
    nj: usize,
    spatial: Representation<T>,
    branch_perms: BTreeMap<String, Representation<T>>,
    joint_reps: BTreeMap<String, Representation<T>>,
    /// Per element, the image of every branch (global indices).
    branch_maps: Vec<Vec<usize>>,
    joint_space: Representation<T>,
}

impl<T: Real> GroupAction<T> {
    pub fn from_spec(spec: &SymmetrySpec) -> Result<Self> {
        let group = Arc::new(spec.parse_group()?);
        if spec.generators.len() != group.generators().len() {
            return Err(invalid(format!(
                "{} lists {} generators, the spec gives {}",
                group,
                group.generators().len(),
                spec.generators.len()
            )));
        }
        let types = spec.types();
        let instances: BTreeMap<&str, Vec<usize>> = types
            .iter()
            .map(|t| {
                let idx = (0..spec.branches.len())
                    .filter(|&b| spec.branches[b].type_id == *t)
                    .collect();
                (t.as_str(), idx)
            })
            .collect();
        for t in &types {
            let dofs: Vec<usize> = instances[t.as_str()].iter().map(|&b| spec.branches[b].dof).collect();
            if dofs.windows(2).any(|w| w[0] != w[1]) {
                return Err(invalid(format!("instances of branch type `{t}` have different DoF")));
            }
        }
        let mut offsets = Vec::with_capacity(spec.branches.len());
        let mut nj = 0;
        for b in &spec.branches {
            offsets.push(nj);
            nj += b.dof;
        }

        let spatial_gens: Vec<DMatrix<T>> = spec
            .generators
            .iter()
            .map(|g| DMatrix::from_fn(3, 3, |i, j| T::lit(g.spatial[(i, j)])))
            .collect();
        for (g, m) in spec.generators.iter().zip(&spatial_gens) {
            if linalg::orthogonality_defect(m) > T::tol(1e-10) {
                return Err(invalid(format!("spatial matrix of generator `{}` is not orthogonal", g.name)));
            }
        }
        let spatial = Representation::from_generators_dim(group.clone(), &spatial_gens, 3)?;

        let mut branch_perms = BTreeMap::new();
        let mut joint_reps = BTreeMap::new();
        for t in &types {
            let inst = &instances[t.as_str()];
            let dof = spec.branches[inst[0]].dof;
            let mut perms = Vec::new();
            let mut mats = Vec::new();
            for g in &spec.generators {
                let action = g.branches.get(t).ok_or_else(|| {
                    Error::MissingBranchSpec(format!("generator `{}` has no action for branch type `{t}`", g.name))
                })?;
                if action.perm.len() != inst.len() || action.perm.iter().any(|&p| p >= inst.len()) {
                    return Err(Error::InvalidPermutation(format!(
                        "generator `{}` permutes {} instances of `{t}` but the type has {}",
                        g.name,
                        action.perm.len(),
                        inst.len()
                    )));
                }
                perms.push(action.perm.clone());
                let jr = action.joint_rep.as_ref().ok_or_else(|| {
                    Error::MissingBranchSpec(format!(
                        "generator `{}` has no joint_rep for branch type `{t}`",
                        g.name
                    ))
                })?;
                if jr.nrows() != dof {
                    return Err(invalid(format!(
                        "joint_rep of `{}` for `{t}` is {}x{}, the branch has {dof} DoF",
                        g.name,
                        jr.nrows(),
                        jr.ncols()
                    )));
                }
                let m = jr.map(T::lit);
                if linalg::signed_permutation(&m).is_none() {
                    return Err(invalid(format!(
                        "joint_rep of `{}` for `{t}` is not a signed permutation",
                        g.name
                    )));
                }
                mats.push(m);
            }
            let perm_rep = Representation::permutation_from_generators(group.clone(), &perms, inst.len())?;
            let joint_rep = Representation::from_generators_dim(group.clone(), &mats, dof)?;
            branch_perms.insert(t.clone(), perm_rep);
            joint_reps.insert(t.clone(), joint_rep);
        }
        for g in &spec.generators {
            if let Some(t) = g.branches.keys().find(|t| !instances.contains_key(t.as_str())) {
                return Err(Error::InvalidPermutation(format!(
                    "generator `{}` acts on unknown branch type `{t}`",
                    g.name
                )));
            }
        }

        let mut branch_maps = Vec::with_capacity(group.order());
        let mut joint_mats = Vec::with_capacity(group.order());
        for g in group.elements() {
            let mut map = vec![0; spec.branches.len()];
            let mut rho = DMatrix::<T>::zeros(nj, nj);
            for t in &types {
                let inst = &instances[t.as_str()];
                let (rows, _) = branch_perms[t]
                    .signed_permutation(g)
                    .expect("permutation representation");
                let jr = joint_reps[t].matrix(g);
                for (i, &b) in inst.iter().enumerate() {
                    let img = inst[rows[i]];
                    map[b] = img;
                    rho.view_mut((offsets[img], offsets[b]), (jr.nrows(), jr.ncols()))
                        .copy_from(jr);
                }
            }
            branch_maps.push(map);
            joint_mats.push(rho);
        }
        let joint_space = Representation::from_generators_dim(
            group.clone(),
            &group
                .generators()
                .iter()
                .map(|g| joint_mats[g.0].clone())
                .collect::<Vec<_>>(),
            nj,
        )?;
        Ok(GroupAction {
            group,
            branches: spec.branches.clone(),
            offsets,
            nj,
            spatial,
            branch_perms,
            joint_reps,
            branch_maps,
            joint_space,
        })
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn branches(&self) -> &[BranchDecl] {
        &self.branches
    }

    pub fn nj(&self) -> usize {
        self.nj
    }

    pub fn joint_offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    /// `R_g` acting on polar vectors.
    pub fn vector_rep(&self) -> &Representation<T> {
        &self.spatial
    }

    /// `det(R_g)·R_g`, the action on axial vectors.
    pub fn pseudovector_rep(&self) -> Representation<T> {
        let mats: Vec<DMatrix<T>> = self
            .group
            .generators()
            .iter()
            .map(|&g| {
                let r = self.spatial.matrix(g);
                r * r.determinant().signum()
            })
            .collect();
        Representation::from_generators_dim(self.group.clone(), &mats, 3)
            .expect("pseudovector rep of a valid spatial rep")
    }

    pub fn spatial_matrix(&self, g: GroupElement) -> Matrix3<T> {
        let m = self.spatial.matrix(g);
        Matrix3::from_fn(|i, j| m[(i, j)])
    }

    pub fn joint_space_rep(&self) -> &Representation<T> {
        &self.joint_space
    }

    pub fn branch_perm_rep(&self, type_id: &str) -> Option<&Representation<T>> {
        self.branch_perms.get(type_id)
    }

    pub fn joint_rep(&self, type_id: &str) -> Option<&Representation<T>> {
        self.joint_reps.get(type_id)
    }

    /// Global index of the branch that `b` is mapped to by `g`.
    pub fn branch_image(&self, g: GroupElement, b: usize) -> usize {
        self.branch_maps[g.0][b]
    }

    /// Indices (in spec order) of branches of a type.
    pub fn instances(&self, type_id: &str) -> Vec<usize> {
        (0..self.branches.len())
            .filter(|&b| self.branches[b].type_id == type_id)
            .collect()
    }

    fn check_model(&self, model: &RobotModel<T>) -> Result<()> {
        check_decls(&self.branches, model)
    }
}

fn check_decls<T: Real>(decls: &[BranchDecl], model: &RobotModel<T>) -> Result<()> {
    let model_decls = branch_decls(model);
    for d in &model_decls {
        if !decls.iter().any(|s| s.type_id == d.type_id) {
            return Err(Error::MissingBranchSpec(format!(
                "the symmetry spec does not cover branch type `{}`",
                d.type_id
            )));
        }
    }
    if decls.len() != model_decls.len() {
        return Err(Error::MissingBranchSpec(format!(
            "the symmetry spec lists {} branches, the model has {}",
            decls.len(),
            model_decls.len()
        )));
    }
    for (s, d) in decls.iter().zip(&model_decls) {
        if s.label != d.label {
            return Err(invalid(format!(
                "spec branch `{}` does not match model branch `{}` at the same position",
                s.label, d.label
            )));
        }
        if s.type_id != d.type_id {
            return Err(Error::InvalidPermutation(format!(
                "branch `{}` has type `{}` in the spec but `{}` in the model",
                s.label, s.type_id, d.type_id
            )));
        }
        if s.dof != d.dof {
            return Err(invalid(format!("branch `{}` DoF differs between spec and model", s.label)));
        }
    }
    Ok(())
}

/// Joint-space representation `ρ_M` of a spec on a model. Missing joint reps
/// are solved from the joint axes.
pub fn build_joint_space_rep<T: Real>(model: &RobotModel<T>, spec: &SymmetrySpec) -> Result<Representation<T>> {
    let spec = resolve_joint_reps(model, spec)?;
    let action = GroupAction::<T>::from_spec(&spec)?;
    Ok(action.joint_space_rep().clone())
}

/// Fills in every missing `joint_rep` by matching transformed joint axes.
pub fn resolve_joint_reps<T: Real>(model: &RobotModel<T>, spec: &SymmetrySpec) -> Result<SymmetrySpec> {
    check_decls(&spec.branches, model)?;
    let geometry = Geometry::new(model)?;
    let mut out = spec.clone();
    for g in out.generators.iter_mut() {
        let r = g.spatial.map(T::lit);
        for t in model.branch_types() {
            let inst = model.instances(&t);
            let action = g.branches.get_mut(&t).ok_or_else(|| {
                Error::MissingBranchSpec(format!("generator `{}` has no action for branch type `{t}`", g.name))
            })?;
            if action.joint_rep.is_some() {
                continue;
            }
            if action.perm.len() != inst.len() || action.perm.iter().any(|&p| p >= inst.len()) {
                return Err(Error::InvalidPermutation(format!(
                    "generator `{}` permutes {} instances of `{t}` but the type has {}",
                    g.name,
                    action.perm.len(),
                    inst.len()
                )));
            }
            let pairs: Vec<(usize, usize)> = inst
                .iter()
                .enumerate()
                .map(|(i, &b)| (b, inst[action.perm[i]]))
                .collect();
            let signs = geometry.solve_signs(model, &r, &pairs).ok_or_else(|| {
                invalid(format!(
                    "generator `{}` maps joint axes of `{t}` onto no signed axis permutation",
                    g.name
                ))
            })?;
            action.joint_rep = Some(DMatrix::from_diagonal(&DVector::from_iterator(
                signs.len(),
                signs.iter().map(|s| s.to_f64_lossy()),
            )));
        }
    }
    Ok(out)
}

// ---- candidates ------------------------------------------------------------

/// Signed permutations preserving a diagonal inertia tensor.
#[derive(Clone, Debug)]
pub struct InertiaCandidates<T: Real> {
    pub matrices: Vec<Matrix3<T>>,
    /// Repeated principal moments: the true symmetry group is continuous and
    /// only its signed-permutation part is searched.
    pub degenerate: bool,
}

const PERMS3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// All `P` among the 48 signed permutations with `P·diag(I)·Pᵀ = diag(I)`
/// exactly, permutations in lexicographic order and sign patterns in binary
/// order within each (identity first).
pub fn base_inertia_candidates<T: Real>(inertia_diag: &Vector3<T>) -> InertiaCandidates<T> {
    let d = inertia_diag;
    let mut matrices = Vec::new();
    for sigma in PERMS3 {
        if (0..3).any(|i| d[sigma[i]] != d[i]) {
            continue;
        }
        for mask in 0..8u32 {
            let mut p = Matrix3::zeros();
            for i in 0..3 {
                p[(sigma[i], i)] = if mask >> i & 1 == 1 { -T::one() } else { T::one() };
            }
            matrices.push(p);
        }
    }
    let degenerate = d[0] == d[1] || d[1] == d[2] || d[0] == d[2];
    InertiaCandidates { matrices, degenerate }
}

// ---- verification ----------------------------------------------------------

/// Largest residuals observed for one group element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementEvidence {
    pub element: String,
    /// CoM position and linear/angular velocity mismatch (absolute).
    pub kinematic: f64,
    /// `|T(q,v) − T(gq,gv)| / max(1, T)`.
    pub energy: f64,
}

impl ElementEvidence {
    pub fn worst(&self) -> f64 {
        self.kinematic.max(self.energy)
    }
}

/// Zero-configuration geometry used for matching branches and axes.
struct Geometry<T: Real> {
    root_origins: Vec<Vector3<T>>,
    axes: Vec<Vector3<T>>,
}

impl<T: Real> Geometry<T> {
    fn new(model: &RobotModel<T>) -> Result<Self> {
        let (_, joints) = model.base_frame_kinematics(&DVector::zeros(model.nj()))?;
        Ok(Geometry {
            root_origins: (0..model.branches.len())
                .map(|b| joints[model.joint_offset(b)].origin)
                .collect(),
            axes: joints.iter().map(|j| j.axis).collect(),
        })
    }

    /// Per-joint sign `s` of a branch type such that every `(b, image)` pair
    /// satisfies `det(R)·R·a = s·a'` (revolute) or `R·a = s·a'` (prismatic).
    fn solve_signs(&self, model: &RobotModel<T>, r: &Matrix3<T>, pairs: &[(usize, usize)]) -> Option<Vec<T>> {
        let det = r.determinant().signum();
        let tol = T::lit(GEOMETRY_TOL);
        let (b0, _) = pairs[0];
        let dof = model.branches[b0].joints.len();
        let mut signs = Vec::with_capacity(dof);
        for k in 0..dof {
            let mut chosen: Option<T> = None;
            for &(b, img) in pairs {
                let kind = model.branches[b].joints[k].kind;
                if model.branches[img].joints[k].kind != kind {
                    return None;
                }
                let a = self.axes[model.joint_offset(b) + k];
                let a_img = self.axes[model.joint_offset(img) + k];
                let mapped = match kind {
                    JointKind::Revolute => r * a * det,
                    JointKind::Prismatic => r * a,
                };
                let s = if (mapped - a_img).amax() <= tol {
                    T::one()
                } else if (mapped + a_img).amax() <= tol {
                    -T::one()
                } else {
                    return None;
                };
                match chosen {
                    None => chosen = Some(s),
                    Some(c) if c != s => return None,
                    _ => {}
                }
            }
            signs.push(chosen.expect("at least one instance"));
        }
        Some(signs)
    }
}

/// Kinematic snapshot of one sampled state.
struct Sample<T: Real> {
    q: DVector<T>,
    v: DVector<T>,
    com: Vec<Vector3<T>>,
    lin: Vec<Vector3<T>>,
    ang: Vec<Vector3<T>>,
    energy: T,
}

/// Base-frame CoM positions and velocities of every non-base body, in model
/// body order (branch-major).
fn snapshot<T: Real>(model: &RobotModel<T>, q: DVector<T>, v: DVector<T>) -> Result<Sample<T>> {
    let (bodies, _) = model.base_frame_kinematics(&q)?;
    let jac = model.body_jacobians(&q)?;
    let to3 = |x: DVector<T>| Vector3::new(x[0], x[1], x[2]);
    let lin = jac.iter().map(|j| to3(&j.j_pos * &v)).collect();
    let ang = jac.iter().map(|j| to3(&j.j_ori * &v)).collect();
    let energy = model.joint_space_energy(&q, &v)?;
    Ok(Sample {
        com: bodies.iter().map(|b| b.com).collect(),
        q,
        v,
        lin,
        ang,
        energy,
    })
}

/// Uniform random joint states: `q ∈ [-π, π]`, `v ∈ [-1, 1]`.
pub fn sample_states<T: Real>(nj: usize, n: usize, seed: u64) -> Vec<(DVector<T>, DVector<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = std::f64::consts::PI;
    (0..n)
        .map(|_| {
            let q = DVector::from_fn(nj, |_, _| T::lit(rng.random_range(-pi..=pi)));
            let v = DVector::from_fn(nj, |_, _| T::lit(rng.random_range(-1.0..=1.0)));
            (q, v)
        })
        .collect()
}

/// One candidate element: spatial map, branch map and joint-space matrix.
#[derive(Clone, Debug)]
struct ElementAction<T: Real> {
    r: Matrix3<T>,
    branch_map: Vec<usize>,
    rho: DMatrix<T>,
    /// Per branch type, the instance-local permutation and joint signs.
    perms: BTreeMap<String, Vec<usize>>,
    signs: BTreeMap<String, Vec<T>>,
}

fn body_starts<T: Real>(model: &RobotModel<T>) -> Vec<usize> {
    let mut out = Vec::with_capacity(model.branches.len());
    let mut acc = 0;
    for b in &model.branches {
        out.push(acc);
        acc += b.bodies.len();
    }
    out
}

fn element_evidence<T: Real>(
    model: &RobotModel<T>,
    samples: &[Sample<T>],
    r: &Matrix3<T>,
    branch_map: &[usize],
    rho: &DMatrix<T>,
    name: &str,
) -> Result<ElementEvidence> {
    let det = r.determinant().signum();
    let starts = body_starts(model);
    let mut kin = T::zero();
    let mut energy = T::zero();
    for s in samples {
        let image = snapshot(model, rho * &s.q, rho * &s.v)?;
        for (b, branch) in model.branches.iter().enumerate() {
            let img = branch_map[b];
            for k in 0..branch.bodies.len() {
                let (src, dst) = (starts[b] + k, starts[img] + k);
                kin = kin
                    .max((image.com[dst] - r * s.com[src]).amax())
                    .max((image.lin[dst] - r * s.lin[src]).amax())
                    .max((image.ang[dst] - r * s.ang[src] * det).amax());
            }
        }
        let rel = (image.energy - s.energy).abs() / s.energy.abs().max(T::one());
        energy = energy.max(rel);
    }
    Ok(ElementEvidence {
        element: name.to_string(),
        kinematic: kin.to_f64_lossy(),
        energy: energy.to_f64_lossy(),
    })
}

fn samples_for<T: Real>(model: &RobotModel<T>, n_samples: usize, seed: u64) -> Result<Vec<Sample<T>>> {
    sample_states::<T>(model.nj(), n_samples, seed)
        .into_par_iter()
        .map(|(q, v)| snapshot(model, q, v))
        .collect()
}

/// Checks every element of a spec's group against the model at `n_samples`
/// seeded random states. Returns whether all residuals are below `tol` and
/// the per-element evidence in group element order.
pub fn verify_candidate<T: Real>(
    model: &RobotModel<T>,
    spec: &SymmetrySpec,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<(bool, Vec<ElementEvidence>)> {
    let spec = resolve_joint_reps(model, spec)?;
    let action = GroupAction::<T>::from_spec(&spec)?;
    action.check_model(model)?;
    let samples = samples_for(model, n_samples, seed)?;
    let group = action.group().clone();
    let evidence = group
        .elements()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|g| {
            element_evidence(
                model,
                &samples,
                &action.spatial_matrix(g),
                &action.branch_maps[g.0],
                action.joint_space_rep().matrix(g),
                group.element_name(g),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let ok = evidence.iter().all(|e| e.worst() < tol);
    Ok((ok, evidence))
}

// ---- identified groups -----------------------------------------------------

/// A symmetry group together with the evidence gathered for it on a model.
#[derive(Clone, Debug)]
pub struct MorphologicalSymmetryGroup<T: Real> {
    spec: SymmetrySpec,
    action: GroupAction<T>,
    verified: bool,
    evidence: Vec<ElementEvidence>,
    tol: f64,
    n_samples: usize,
    seed: u64,
    degenerate_inertia: bool,
}

impl<T: Real> MorphologicalSymmetryGroup<T> {
    /// Verifies `spec` on `model`; the result records whether it passed.
    pub fn verify(model: &RobotModel<T>, spec: &SymmetrySpec, n_samples: usize, tol: f64, seed: u64) -> Result<Self> {
        let spec = resolve_joint_reps(model, spec)?;
        let (verified, evidence) = verify_candidate(model, &spec, n_samples, tol, seed)?;
        let action = GroupAction::from_spec(&spec)?;
        Ok(MorphologicalSymmetryGroup {
            spec,
            action,
            verified,
            evidence,
            tol,
            n_samples,
            seed,
            degenerate_inertia: base_inertia_candidates(&model.base.inertia_diag).degenerate,
        })
    }

    pub fn spec(&self) -> &SymmetrySpec {
        &self.spec
    }

    pub fn action(&self) -> &GroupAction<T> {
        &self.action
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        self.action.group()
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn evidence(&self) -> &[ElementEvidence] {
        &self.evidence
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn degenerate_inertia(&self) -> bool {
        self.degenerate_inertia
    }

    pub fn joint_space_rep(&self) -> &Representation<T> {
        self.action.joint_space_rep()
    }

    pub fn base_rep(&self, g: GroupElement) -> Matrix3<T> {
        self.action.spatial_matrix(g)
    }
}

/// Enumerates all bijections of instances onto instances such that every
/// root-joint origin maps onto its image's origin. Lowest image index first.
fn consistent_perms<T: Real>(geo: &Geometry<T>, r: &Matrix3<T>, inst: &[usize]) -> Vec<Vec<usize>> {
    let tol = T::lit(GEOMETRY_TOL);
    let allowed: Vec<Vec<usize>> = inst
        .iter()
        .map(|&b| {
            let mapped = r * geo.root_origins[b];
            (0..inst.len())
                .filter(|&i| (mapped - geo.root_origins[inst[i]]).amax() <= tol)
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(inst.len());
    let mut used = vec![false; inst.len()];
    fn rec(allowed: &[Vec<usize>], current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let i = current.len();
        if i == allowed.len() {
            out.push(current.clone());
            return;
        }
        for &j in &allowed[i] {
            if !used[j] {
                used[j] = true;
                current.push(j);
                rec(allowed, current, used, out);
                current.pop();
                used[j] = false;
            }
        }
    }
    rec(&allowed, &mut current, &mut used, &mut out);
    out
}

/// Whether a spatial map preserves every body of single-instance branches
/// (and the base CoM) at the zero configuration.
fn preserves_unique_bodies<T: Real>(model: &RobotModel<T>, r: &Matrix3<T>) -> Result<bool> {
    let tol = T::lit(GEOMETRY_TOL);
    if (r * model.base.com_offset - model.base.com_offset).amax() > tol {
        return Ok(false);
    }
    let (bodies, _) = model.base_frame_kinematics(&DVector::zeros(model.nj()))?;
    for ty in model.branch_types() {
        let inst = model.instances(&ty);
        if inst.len() != 1 {
            continue;
        }
        for b in bodies.iter().filter(|b| b.branch == inst[0]) {
            let scale = b.inertia.amax().max(T::one());
            if (r * b.com - b.com).amax() > tol || (r * b.inertia * r.transpose() - b.inertia).amax() > tol * scale {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn assemble_rho<T: Real>(model: &RobotModel<T>, branch_map: &[usize], signs: &BTreeMap<String, Vec<T>>) -> DMatrix<T> {
    let nj = model.nj();
    let mut rho = DMatrix::zeros(nj, nj);
    for (b, branch) in model.branches.iter().enumerate() {
        let img = branch_map[b];
        let s = &signs[&branch.type_id];
        for (k, &sk) in s.iter().enumerate() {
            rho[(model.joint_offset(img) + k, model.joint_offset(b) + k)] = sk;
        }
    }
    rho
}

/// Every element action consistent with `r`: branch assignments whose root
/// origins match and whose joint axes admit signs.
fn element_actions<T: Real>(model: &RobotModel<T>, geo: &Geometry<T>, r: &Matrix3<T>) -> Vec<ElementAction<T>> {
    let types = model.branch_types();
    let per_type: Vec<Vec<(Vec<usize>, Vec<T>)>> = types
        .iter()
        .map(|t| {
            let inst = model.instances(t);
            consistent_perms(geo, r, &inst)
                .into_iter()
                .filter_map(|perm| {
                    let pairs: Vec<(usize, usize)> =
                        inst.iter().enumerate().map(|(i, &b)| (b, inst[perm[i]])).collect();
                    geo.solve_signs(model, r, &pairs).map(|s| (perm, s))
                })
                .collect()
        })
        .collect();
    if per_type.iter().any(|o| o.is_empty()) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; types.len()];
    loop {
        let mut branch_map = vec![0; model.branches.len()];
        let mut perms = BTreeMap::new();
        let mut signs = BTreeMap::new();
        for (ti, t) in types.iter().enumerate() {
            let (perm, s) = &per_type[ti][choice[ti]];
            let inst = model.instances(t);
            for (i, &b) in inst.iter().enumerate() {
                branch_map[b] = inst[perm[i]];
            }
            perms.insert(t.clone(), perm.clone());
            signs.insert(t.clone(), s.clone());
        }
        let rho = assemble_rho(model, &branch_map, &signs);
        out.push(ElementAction {
            r: *r,
            branch_map,
            rho,
            perms,
            signs,
        });
        // odometer over per-type choices, last type fastest
        let mut k = types.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < per_type[k].len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

fn same_element<T: Real>(a: &ElementAction<T>, r: &Matrix3<T>, rho: &DMatrix<T>) -> bool {
    (a.r - r).amax() <= T::lit(GEOMETRY_TOL) && a.rho == *rho
}

/// Multiplication table of the verified elements; `None` where a product
/// falls outside the set.
fn partial_table<T: Real>(elems: &[ElementAction<T>]) -> Vec<Vec<Option<usize>>> {
    elems
        .iter()
        .map(|a| {
            elems
                .iter()
                .map(|b| {
                    let r = a.r * b.r;
                    let rho = &a.rho * &b.rho;
                    elems.iter().position(|c| same_element(c, &r, &rho))
                })
                .collect()
        })
        .collect()
}

/// Closure of `gens` under the partial table, or `None` if it leaves the set.
fn closure_in(table: &[Vec<Option<usize>>], gens: &[usize]) -> Option<Vec<usize>> {
    let mut members = vec![0usize];
    let mut seen = vec![false; table.len()];
    seen[0] = true;
    let mut i = 0;
    while i < members.len() {
        let a = members[i];
        for &g in gens {
            let p = table[a][g]?;
            if !seen[p] {
                seen[p] = true;
                members.push(p);
            }
        }
        i += 1;
    }
    members.sort_unstable();
    Some(members)
}

/// Identifies the morphological symmetry group of a model.
///
/// Candidates are the signed permutations of the base principal frame that
/// preserve the base inertia, filtered by the base CoM and the bodies of
/// single-instance branches. For each candidate all branch assignments
/// consistent with the root joint origins are tried, joint signs are solved
/// from the axes, and the first assignment passing the sampled kinematic and
/// energy checks is kept. The verified set is closed under composition (or
/// reduced to its largest closed subset) and matched to a named group.
pub fn identify<T: Real>(model: &RobotModel<T>, n_samples: usize, tol: f64, seed: u64) -> Result<MorphologicalSymmetryGroup<T>> {
    if model.branches.iter().any(|b| b.label.trim().is_empty() || b.type_id.trim().is_empty()) {
        return Err(Error::MissingMetadata("every branch needs a type and a label".into()));
    }
    let cands = base_inertia_candidates(&model.base.inertia_diag);
    let a = model.base.principal_axes;
    let geo = Geometry::new(model)?;
    let samples = samples_for(model, n_samples, seed)?;

    let spatial: Vec<Matrix3<T>> = cands
        .matrices
        .iter()
        .map(|p| a * p * a.transpose())
        .collect();
    let verified: Vec<Option<(ElementAction<T>, ElementEvidence)>> = spatial
        .par_iter()
        .map(|r| -> Result<_> {
            if !preserves_unique_bodies(model, r)? {
                return Ok(None);
            }
            for act in element_actions(model, &geo, r) {
                let ev = element_evidence(model, &samples, &act.r, &act.branch_map, &act.rho, "")?;
                if ev.worst() < tol {
                    return Ok(Some((act, ev)));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?;
    let (elems, evs): (Vec<_>, Vec<_>) = verified.into_iter().flatten().unzip();
    debug_assert!(elems.first().map(|e| e.rho == DMatrix::identity(model.nj(), model.nj())).unwrap_or(false));

    let table = partial_table(&elems);
    let subgroup = largest_named_subgroup(&table);
    let (named, members, map) = subgroup;
    // map: named element i -> members[map[i]]
    let elem_of = |i: usize| &elems[members[map[i]]];
    let generators = named
        .generators()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let e = elem_of(g.0);
            GeneratorSpec {
                name: format!("g{}", k + 1),
                spatial: e.r.map(|x| x.to_f64_lossy()),
                branches: e
                    .perms
                    .iter()
                    .map(|(t, perm)| {
                        let s = &e.signs[t];
                        let jr = DMatrix::from_diagonal(&DVector::from_iterator(
                            s.len(),
                            s.iter().map(|x| x.to_f64_lossy()),
                        ));
                        (
                            t.clone(),
                            BranchAction {
                                perm: perm.clone(),
                                joint_rep: Some(jr),
                            },
                        )
                    })
                    .collect(),
            }
        })
        .collect();
    let spec = SymmetrySpec {
        group: named.name(),
        branches: branch_decls(model),
        generators,
    };
    let action = GroupAction::<T>::from_spec(&spec)?;
    let evidence = (0..named.order())
        .map(|i| {
            let mut ev = evs[members[map[i]]].clone();
            ev.element = named.element_name(GroupElement(i)).to_string();
            debug_assert!(action.joint_space_rep().matrix(GroupElement(i)) == &elem_of(i).rho);
            ev
        })
        .collect();
    Ok(MorphologicalSymmetryGroup {
        spec,
        action,
        verified: true,
        evidence,
        tol,
        n_samples,
        seed,
        degenerate_inertia: cands.degenerate,
    })
}

/// Largest subgroup of the verified set that is isomorphic to a named group.
/// Returns the named group, the member indices, and the map from named
/// element index to position in `members`.
fn largest_named_subgroup(table: &[Vec<Option<usize>>]) -> (FiniteGroup, Vec<usize>, Vec<usize>) {
    let n = table.len();
    let mut subgroups: Vec<Vec<usize>> = Vec::new();
    let all: Vec<usize> = (0..n).collect();
    if closure_in(table, &all).is_some_and(|c| c.len() == n) {
        subgroups.push(all);
    }
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                if let Some(c) = closure_in(table, &[i, j, k]) {
                    if !subgroups.contains(&c) {
                        subgroups.push(c);
                    }
                }
            }
        }
    }
    // stable sort keeps discovery order among equal sizes
    subgroups.sort_by_key(|s| std::cmp::Reverse(s.len()));
    for members in subgroups {
        let m = members.len();
        let local = |x: usize| members.iter().position(|&y| y == x).expect("closed subset");
        let cayley: Vec<Vec<usize>> = members
            .iter()
            .map(|&a| members.iter().map(|&b| local(table[a][b].expect("closed subset"))).collect())
            .collect();
        let gens: Vec<usize> = (1..m).collect();
        let group = FiniteGroup::from_cayley(cayley, gens, None).expect("closed subset is a group");
        if let Some((named, map)) = group.identify_named() {
            return (named, members, map);
        }
    }
    let trivial = FiniteGroup::cyclic(1).expect("order 1");
    (trivial, vec![0], vec![0])
}

// ---- equivariance suite ----------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ElementMassResidual {
    pub element: String,
    /// `max_q ‖ρ(g)·M̄(q)·ρ(g)⁻¹ − M̄(ρ(g)q)‖_F`.
    pub mass_matrix: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivarianceReport {
    pub tol: f64,
    pub elements: Vec<ElementMassResidual>,
    /// Isotypic off-block Frobenius norm of `M̄(q)` per sample.
    pub off_block: Vec<f64>,
    /// The same norm at the group-averaged configuration `(1/|G|)·Σ ρ(g)q`,
    /// a fixed point of every element. Only there does equivariance force
    /// `M̄` to commute with `ρ` and hence to be block-diagonal.
    pub fixed_off_block: Vec<f64>,
    /// Mass-matrix residuals and fixed-point off-blocks all below `tol`.
    pub passed: bool,
}

impl EquivarianceReport {
    pub fn max_mass_residual(&self) -> f64 {
        self.elements.iter().fold(0.0, |a, e| a.max(e.mass_matrix))
    }

    pub fn max_off_block(&self) -> f64 {
        self.off_block.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_fixed_off_block(&self) -> f64 {
        self.fixed_off_block.iter().copied().fold(0.0, f64::max)
    }
}

/// Mass-matrix equivariance and isotypic block-diagonality of `M̄(q)` at
/// sampled configurations.
pub fn verify_equivariance_suite<T: Real>(
    model: &RobotModel<T>,
    msg: &MorphologicalSymmetryGroup<T>,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<EquivarianceReport> {
    if !msg.is_verified() {
        return Err(Error::PreconditionViolation(
            "the symmetry group has not been verified on a model".into(),
        ));
    }
    msg.action().check_model(model)?;
    let rep = msg.joint_space_rep();
    let dec: IsotypicDecomposition<T> = decompose(rep)?;
    let group = msg.group().clone();
    let states = sample_states::<T>(model.nj(), n_samples, seed);
    let scale = T::one() / T::lit(group.order() as f64);
    let per_sample: Vec<(Vec<f64>, f64, f64)> = states
        .par_iter()
        .map(|(q, _)| -> Result<_> {
            let m = model.mass_matrix(q)?;
            let mut res = Vec::with_capacity(group.order());
            for g in group.elements() {
                let r = rep.matrix(g);
                let rinv = rep.matrix(group.inverse(g)?);
                let lhs = r * &m * rinv;
                let rhs = model.mass_matrix(&(r * q))?;
                res.push((lhs - rhs).norm().to_f64_lossy());
            }
            let mut q_fix = DVector::zeros(q.len());
            for g in group.elements() {
                q_fix += rep.matrix(g) * q;
            }
            q_fix *= scale;
            let m_fix = model.mass_matrix(&q_fix)?;
            Ok((
                res,
                dec.off_block_norm(&m)?.to_f64_lossy(),
                dec.off_block_norm(&m_fix)?.to_f64_lossy(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let elements = group
        .elements()
        .map(|g| ElementMassResidual {
            element: group.element_name(g).to_string(),
            mass_matrix: per_sample.iter().fold(0.0, |a, (r, _, _)| a.max(r[g.0])),
        })
        .collect::<Vec<_>>();
    let off_block: Vec<f64> = per_sample.iter().map(|(_, o, _)| *o).collect();
    let fixed_off_block: Vec<f64> = per_sample.iter().map(|(_, _, o)| *o).collect();
    let passed = elements.iter().all(|e| e.mass_matrix < tol) && fixed_off_block.iter().all(|&o| o < tol);
    Ok(EquivarianceReport {
        tol,
        elements,
        off_block,
        fixed_off_block,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inertia_candidate_counts() {
        let c = base_inertia_candidates(&Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(c.matrices.len(), 8);
        assert!(!c.degenerate);
        assert!(c.matrices.iter().all(|m| (m - Matrix3::from_diagonal(&m.diagonal())).amax() == 0.0));
        assert_eq!(c.matrices[0], Matrix3::identity());
        let c = base_inertia_candidates(&Vector3::new(1.0, 1.0, 3.0));
        assert_eq!(c.matrices.len(), 16);
        assert!(c.degenerate);
        let c = base_inertia_candidates(&Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(c.matrices.len(), 48);
    }

    #[test]
    fn candidates_form_groups() {
        for d in [[1.0, 2.0, 3.0], [1.0, 1.0, 3.0], [2.0, 2.0, 2.0], [5.0, 1.0, 5.0]] {
            let diag = Vector3::from(d);
            let c = base_inertia_candidates(&diag);
            for a in &c.matrices {
                let dm = Matrix3::from_diagonal(&diag);
                assert_eq!(a * dm * a.transpose(), dm);
                for b in &c.matrices {
                    assert!(c.matrices.contains(&(a * b)));
                }
            }
        }
    }

    #[test]
    fn spec_toml_round_trip() {
        let text = r#"
group = "C2"

[[branch]]
type = "arm"
label = "L"
dof = 2

[[branch]]
type = "arm"
label = "R"
dof = 2

[[generator]]
name = "s"
spatial = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]

[generator.branch.arm]
perm = [1, 0]
joint_rep = [[-1.0, 0.0], [0.0, 1.0]]
"#;
        let spec = SymmetrySpec::from_toml_str(text).unwrap();
        assert_eq!(spec.generators.len(), 1);
        let back = SymmetrySpec::from_toml_str(&spec.to_toml_string()).unwrap();
        assert_eq!(back, spec);
        let action = GroupAction::<f64>::from_spec(&spec).unwrap();
        let rho = action.joint_space_rep().matrix(GroupElement(1));
        assert_eq!(rho[(2, 0)], -1.0);
        assert_eq!(rho[(3, 1)], 1.0);
        assert_eq!(rho[(0, 2)], -1.0);
        assert_eq!(action.branch_image(GroupElement(1), 0), 1);
    }

    #[test]
    fn spec_errors() {
        let base = |perm: &str, jr: &str| {
            format!(
                "group = \"C2\"\n[[branch]]\ntype=\"a\"\nlabel=\"L\"\ndof=1\n[[branch]]\ntype=\"a\"\nlabel=\"R\"\ndof=1\n\
                 [[generator]]\nname=\"s\"\nspatial=[[1.0,0.0,0.0],[0.0,-1.0,0.0],[0.0,0.0,1.0]]\n\
                 [generator.branch.a]\nperm={perm}\n{jr}\n"
            )
        };
        let ok = SymmetrySpec::from_toml_str(&base("[1,0]", "joint_rep=[[1.0]]")).unwrap();
        assert!(GroupAction::<f64>::from_spec(&ok).is_ok());
        let bad = SymmetrySpec::from_toml_str(&base("[1,0,2]", "joint_rep=[[1.0]]")).unwrap();
        assert!(matches!(GroupAction::<f64>::from_spec(&bad), Err(Error::InvalidPermutation(_))));
        let missing = SymmetrySpec::from_toml_str(&base("[1,0]", "")).unwrap();
        assert!(matches!(GroupAction::<f64>::from_spec(&missing), Err(Error::MissingBranchSpec(_))));
        // a reflection cannot be realized by an order-3 generator
        let wrong_order = base("[1,0]", "joint_rep=[[1.0]]").replace("\"C2\"", "\"C3\"");
        let spec = SymmetrySpec::from_toml_str(&wrong_order).unwrap();
        assert!(GroupAction::<f64>::from_spec(&spec).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_states::<f64>(5, 3, 7);
        let b = sample_states::<f64>(5, 3, 7);
        assert_eq!(a, b);
        assert_ne!(a, sample_states::<f64>(5, 3, 8));
    }
}
