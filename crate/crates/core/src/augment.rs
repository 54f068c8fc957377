//! Schema-driven data augmentation along group orbits.
//!
//! Every dataset column is declared with a semantic kind, from which its
//! representation is derived. A record is then mapped to its `|G|` images.
//! Whether the generated samples belong to the data distribution is the
//! caller's concern; only the correctness of the group action is
//! guaranteed here.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Quaternion, Rotation3, UnitQuaternion};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::groups::{FiniteGroup, GroupElement};
use crate::reps::{permutation_matrix, Representation};
use crate::scalar::Real;
use crate::symm::{GroupAction, MorphologicalSymmetryGroup};

const ROTATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RotationEncoding {
    /// Row-major 3×3.
    #[default]
    Matrix,
    /// Unit quaternion stored `w, x, y, z`.
    Quaternion,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldKind {
    JointPos,
    JointVel,
    Vec3,
    Pseudovec3,
    BaseRotation(RotationEncoding),
    BasePosition,
    PerBranchScalar(String),
    PerBranchVec3(String),
    InvariantScalar,
    ContactStateOnehot(String),
}

impl FieldKind {
    pub fn tag(&self) -> &'static str {
        match self {
            FieldKind::JointPos => "joint_pos",
            FieldKind::JointVel => "joint_vel",
            FieldKind::Vec3 => "vec3",
            FieldKind::Pseudovec3 => "pseudovec3",
            FieldKind::BaseRotation(_) => "base_rotation",
            FieldKind::BasePosition => "base_position",
            FieldKind::PerBranchScalar(_) => "per_branch_scalar",
            FieldKind::PerBranchVec3(_) => "per_branch_vec3",
            FieldKind::InvariantScalar => "invariant_scalar",
            FieldKind::ContactStateOnehot(_) => "contact_state_onehot",
        }
    }

    pub fn branch_type(&self) -> Option<&str> {
        match self {
            FieldKind::PerBranchScalar(t) | FieldKind::PerBranchVec3(t) | FieldKind::ContactStateOnehot(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSchema {
    pub name: String,
    pub kind: FieldKind,
    /// Number of CSV columns the field expands to.
    pub width: usize,
    /// Expanded column names, e.g. `foot_LF_x`.
    pub columns: Vec<String>,
}

#[derive(Deserialize, Serialize)]
struct SchemaFile {
    #[serde(rename = "field", default)]
    fields: Vec<FieldEntry>,
}

#[derive(Deserialize, Serialize)]
struct FieldEntry {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    branch_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation_encoding: Option<RotationEncoding>,
}

/// Field declarations as written in a schema file, before being bound to a
/// symmetry group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub kind: FieldKind,
}

impl FieldDecl {
    pub fn new(name: impl Into<String>, kind: FieldKind) -> Self {
        FieldDecl { name: name.into(), kind }
    }
}

pub fn parse_schema(text: &str) -> Result<Vec<FieldDecl>> {
    let file: SchemaFile = toml::from_str(text).map_err(|e| Error::InvalidSchema(e.to_string()))?;
    file.fields
        .into_iter()
        .map(|f| {
            let need_branch = || {
                f.branch_type
                    .clone()
                    .ok_or_else(|| Error::InvalidSchema(format!("field `{}` needs a branch_type", f.name)))
            };
            let kind = match f.kind.as_str() {
                "joint_pos" => FieldKind::JointPos,
                "joint_vel" => FieldKind::JointVel,
                "vec3" => FieldKind::Vec3,
                "pseudovec3" => FieldKind::Pseudovec3,
                "base_rotation" => FieldKind::BaseRotation(f.rotation_encoding.unwrap_or_default()),
                "base_position" => FieldKind::BasePosition,
                "per_branch_scalar" => FieldKind::PerBranchScalar(need_branch()?),
                "per_branch_vec3" => FieldKind::PerBranchVec3(need_branch()?),
                "invariant_scalar" => FieldKind::InvariantScalar,
                "contact_state_onehot" => FieldKind::ContactStateOnehot(need_branch()?),
                other => return Err(Error::InvalidSchema(format!("unknown field kind `{other}`"))),
            };
            Ok(FieldDecl { name: f.name, kind })
        })
        .collect()
}

pub fn schema_to_toml(decls: &[FieldDecl]) -> String {
    let file = SchemaFile {
        fields: decls
            .iter()
            .map(|d| FieldEntry {
                name: d.name.clone(),
                kind: d.kind.tag().to_string(),
                branch_type: d.kind.branch_type().map(str::to_string),
                rotation_encoding: match d.kind {
                    FieldKind::BaseRotation(e) => Some(e),
                    _ => None,
                },
            })
            .collect(),
    };
    toml::to_string(&file).expect("schema serializes")
}

#[derive(Clone, Debug)]
enum Transform<T: Real> {
    Linear(Representation<T>),
    Rotation(RotationEncoding),
    /// Per element, `perm[i]` is the image of one-hot index `i`.
    IndexPerm(Vec<Vec<usize>>),
}

/// A field schema bound to a symmetry group, with one transform per field.
#[derive(Clone, Debug)]
pub struct DatasetSchema<T: Real> {
    fields: Vec<FieldSchema>,
    transforms: Vec<Transform<T>>,
    offsets: Vec<usize>,
    width: usize,
    action: GroupAction<T>,
}

impl<T: Real> DatasetSchema<T> {
    pub fn new(decls: &[FieldDecl], msg: &MorphologicalSymmetryGroup<T>) -> Result<Self> {
        Self::from_action(decls, msg.action().clone())
    }

    pub fn from_action(decls: &[FieldDecl], action: GroupAction<T>) -> Result<Self> {
        let mut fields = Vec::with_capacity(decls.len());
        let mut transforms = Vec::with_capacity(decls.len());
        let mut offsets = Vec::with_capacity(decls.len());
        let mut width = 0;
        let mut seen = std::collections::HashSet::new();
        for d in decls {
            if !seen.insert(d.name.clone()) {
                return Err(Error::InvalidSchema(format!("duplicate field `{}`", d.name)));
            }
            let columns = expand_columns(&d.name, &d.kind, &action)?;
            let transform = build_transform(&d.kind, &action)?;
            offsets.push(width);
            width += columns.len();
            fields.push(FieldSchema {
                name: d.name.clone(),
                kind: d.kind.clone(),
                width: columns.len(),
                columns,
            });
            transforms.push(transform);
        }
        let columns: Vec<&String> = fields.iter().flat_map(|f| f.columns.iter()).collect();
        let mut uniq = std::collections::HashSet::new();
        for c in columns {
            if !uniq.insert(c) {
                return Err(Error::InvalidSchema(format!("column `{c}` is produced by two fields")));
            }
        }
        Ok(DatasetSchema {
            fields,
            transforms,
            offsets,
            width,
            action,
        })
    }

    pub fn load(path: &Path, msg: &MorphologicalSymmetryGroup<T>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::new(&parse_schema(&text)?, msg)
    }

    pub fn fields(&self) -> &[FieldSchema] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&FieldSchema> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Column range of a field inside a record.
    pub fn field_range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let i = self.fields.iter().position(|f| f.name == name)?;
        Some(self.offsets[i]..self.offsets[i] + self.fields[i].width)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn columns(&self) -> Vec<String> {
        self.fields.iter().flat_map(|f| f.columns.iter().cloned()).collect()
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        self.action.group()
    }

    pub fn action(&self) -> &GroupAction<T> {
        &self.action
    }

    /// Representation acting on a field's columns.
    ///
    /// Base rotations are linear too: conjugation acts on a row-major matrix
    /// as `R ⊗ R`, and on a quaternion `(w, v)` as `1 ⊕ det(R)·R`. Records are
    /// still transformed by conjugation so that the orthonormality check and
    /// quaternion canonicalization apply.
    pub fn field_rep(&self, name: &str) -> Result<Representation<T>> {
        let i = self
            .fields
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::InvalidSchema(format!("no field named `{name}`")))?;
        let group = self.group().clone();
        match &self.transforms[i] {
            Transform::Linear(rep) => Ok(rep.clone()),
            Transform::IndexPerm(perms) => Representation::permutation(group, perms),
            Transform::Rotation(enc) => {
                let mats: Vec<DMatrix<T>> = group
                    .elements()
                    .map(|g| {
                        let r = self.action.vector_rep().matrix(g);
                        match enc {
                            RotationEncoding::Matrix => r.kronecker(r),
                            RotationEncoding::Quaternion => {
                                let s = r.determinant().signum();
                                crate::linalg::block_diag(&DMatrix::identity(1, 1), &(r * s))
                            }
                        }
                    })
                    .collect();
                let gens: Vec<DMatrix<T>> = group.generators().iter().map(|g| mats[g.0].clone()).collect();
                Representation::from_generators_dim(group, &gens, mats[0].nrows())
            }
        }
    }

    /// Image of one record under `g`.
    pub fn transform_record(&self, record: &[T], g: GroupElement) -> Result<Vec<T>> {
        if record.len() != self.width {
            return Err(invalid(format!(
                "record has {} values, schema expects {}",
                record.len(),
                self.width
            )));
        }
        self.group().element(g.0)?;
        let identity = g == self.group().identity();
        let mut out = record.to_vec();
        for (i, f) in self.fields.iter().enumerate() {
            let range = self.offsets[i]..self.offsets[i] + f.width;
            let x = &record[range.clone()];
            let dst = &mut out[range];
            match &self.transforms[i] {
                Transform::Linear(rep) => {
                    if !identity {
                        let y = rep.apply(g, &DVector::from_column_slice(x))?;
                        dst.copy_from_slice(y.as_slice());
                    }
                }
                Transform::IndexPerm(perms) => {
                    for (j, &img) in perms[g.0].iter().enumerate() {
                        dst[img] = x[j];
                    }
                }
                Transform::Rotation(RotationEncoding::Matrix) => {
                    let rb = Matrix3::from_row_slice(x);
                    let defect = (rb.transpose() * rb - Matrix3::identity())
                        .iter()
                        .fold(T::zero(), |a, v| a.max(v.abs()));
                    if defect > T::lit(ROTATION_TOL) {
                        return Err(Error::CorruptRecord(format!(
                            "field `{}` is not orthonormal (defect {:e})",
                            f.name,
                            defect.to_f64_lossy()
                        )));
                    }
                    if !identity {
                        let r = self.action.spatial_matrix(g);
                        let y = r * rb * r.transpose();
                        for a in 0..3 {
                            for b in 0..3 {
                                dst[3 * a + b] = y[(a, b)];
                            }
                        }
                    }
                }
                Transform::Rotation(RotationEncoding::Quaternion) => {
                    let q = Quaternion::new(x[0], x[1], x[2], x[3]);
                    let n = q.norm();
                    if (n - T::one()).abs() > T::lit(ROTATION_TOL) {
                        return Err(Error::CorruptRecord(format!(
                            "field `{}` is not a unit quaternion (norm {})",
                            f.name,
                            n.to_f64_lossy()
                        )));
                    }
                    let y = if identity {
                        q
                    } else {
                        let r = self.action.spatial_matrix(g);
                        // conjugation by an improper R equals conjugation by -R
                        let proper = r * r.determinant().signum();
                        let qg = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(proper));
                        let qb = UnitQuaternion::new_normalize(q);
                        (qg * qb * qg.inverse()).into_inner()
                    };
                    let y = if y.w < T::zero() { -y } else { y };
                    dst.copy_from_slice(&[y.w, y.i, y.j, y.k]);
                }
            }
        }
        Ok(out)
    }

    /// All `|G|` images of every record, grouped per input record in element
    /// index order.
    pub fn orbit_dataset(&self, dataset: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let group = self.group().clone();
        let per_record: Vec<Vec<Vec<T>>> = dataset
            .par_iter()
            .enumerate()
            .map(|(row, rec)| {
                group
                    .elements()
                    .map(|g| self.transform_record(rec, g))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::Row {
                        row,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(per_record.into_iter().flatten().collect())
    }

    /// Reads a CSV whose header lists exactly the schema's expanded columns,
    /// in any order. Rows come back in schema column order.
    pub fn read_dataset(&self, path: &Path) -> Result<Vec<Vec<T>>> {
        let file = std::fs::File::open(path)?;
        self.read_dataset_from(file)
    }

    pub fn read_dataset_from<R: std::io::Read>(&self, reader: R) -> Result<Vec<Vec<T>>> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let expected = self.columns();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for (i, h) in header.iter().enumerate() {
            if !expected.iter().any(|c| c == h) {
                return Err(Error::Schema {
                    column: h.clone(),
                    reason: "not declared by the schema".into(),
                });
            }
            if pos.insert(h.as_str(), i).is_some() {
                return Err(Error::Schema {
                    column: h.clone(),
                    reason: "appears twice in the header".into(),
                });
            }
        }
        let mut source = Vec::with_capacity(expected.len());
        for c in &expected {
            match pos.get(c.as_str()) {
                Some(&i) => source.push(i),
                None => {
                    return Err(Error::Schema {
                        column: c.clone(),
                        reason: "missing from the header".into(),
                    })
                }
            }
        }
        let mut rows = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                row: r,
                column: String::new(),
                reason: e.to_string(),
            })?;
            let mut row = Vec::with_capacity(expected.len());
            for (c, &i) in expected.iter().zip(&source) {
                let cell = rec.get(i).unwrap_or("");
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: r,
                    column: c.clone(),
                    reason: format!("`{cell}` is not a number"),
                })?;
                row.push(T::lit(v));
            }
            rows.push(row);
        }
        Ok(rows)
    }

    pub fn write_dataset(&self, path: &Path, dataset: &[Vec<T>]) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_dataset_to(file, dataset)
    }

    /// Values are written in shortest round-trip form.
    pub fn write_dataset_to<W: std::io::Write>(&self, writer: W, dataset: &[Vec<T>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns())?;
        for (r, row) in dataset.iter().enumerate() {
            if row.len() != self.width {
                return Err(Error::Row {
                    row: r,
                    source: Box::new(invalid(format!("{} values, expected {}", row.len(), self.width))),
                });
            }
            w.write_record(row.iter().map(|v| format!("{}", v.to_f64_lossy())))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn branch_labels<T: Real>(action: &GroupAction<T>, type_id: &str) -> Result<Vec<usize>> {
    let inst = action.instances(type_id);
    if inst.is_empty() {
        return Err(Error::InvalidSchema(format!(
            "branch type `{type_id}` is not part of the symmetry spec"
        )));
    }
    Ok(inst)
}

fn expand_columns<T: Real>(name: &str, kind: &FieldKind, action: &GroupAction<T>) -> Result<Vec<String>> {
    const XYZ: [&str; 3] = ["x", "y", "z"];
    Ok(match kind {
        FieldKind::JointPos | FieldKind::JointVel => (0..action.nj()).map(|i| format!("{name}_{i}")).collect(),
        FieldKind::Vec3 | FieldKind::Pseudovec3 | FieldKind::BasePosition => {
            XYZ.iter().map(|a| format!("{name}_{a}")).collect()
        }
        FieldKind::BaseRotation(RotationEncoding::Matrix) => (0..3)
            .flat_map(|i| (0..3).map(move |j| format!("{name}_r{i}{j}")))
            .collect(),
        FieldKind::BaseRotation(RotationEncoding::Quaternion) => {
            ["w", "x", "y", "z"].iter().map(|a| format!("{name}_{a}")).collect()
        }
        FieldKind::InvariantScalar => vec![name.to_string()],
        FieldKind::PerBranchScalar(t) => branch_labels(action, t)?
            .iter()
            .map(|&b| format!("{name}_{}", action.branches()[b].label))
            .collect(),
        FieldKind::PerBranchVec3(t) => branch_labels(action, t)?
            .iter()
            .flat_map(|&b| {
                let label = &action.branches()[b].label;
                XYZ.iter().map(move |a| format!("{name}_{label}_{a}"))
            })
            .collect(),
        FieldKind::ContactStateOnehot(t) => {
            let k = branch_labels(action, t)?.len();
            if k > 16 {
                return Err(Error::InvalidSchema(format!(
                    "contact one-hot over {k} branches would need 2^{k} columns"
                )));
            }
            (0..1usize << k).map(|i| format!("{name}_{i:0k$b}")).collect()
        }
    })
}

/// Local permutation of a type's instances: `p[i]` is the position of the
/// image of instance `i`.
fn local_perm<T: Real>(action: &GroupAction<T>, inst: &[usize], g: GroupElement) -> Vec<usize> {
    inst.iter()
        .map(|&b| {
            let img = action.branch_image(g, b);
            inst.iter().position(|&c| c == img).expect("branch maps within its type")
        })
        .collect()
}

/// Image of a one-hot contact index under an instance permutation. Bit
/// `k-1-i` of the index holds the state of instance `i`.
pub fn contact_index_image(index: usize, perm: &[usize]) -> usize {
    let k = perm.len();
    let mut out = 0;
    for (i, &p) in perm.iter().enumerate() {
        if index >> (k - 1 - i) & 1 == 1 {
            out |= 1 << (k - 1 - p);
        }
    }
    out
}

fn build_transform<T: Real>(kind: &FieldKind, action: &GroupAction<T>) -> Result<Transform<T>> {
    let group = action.group().clone();
    let perm_rep = |t: &str| -> Result<Representation<T>> {
        let inst = branch_labels(action, t)?;
        let actions: Vec<Vec<usize>> = group.elements().map(|g| local_perm(action, &inst, g)).collect();
        Representation::permutation(group.clone(), &actions)
    };
    Ok(match kind {
        FieldKind::JointPos | FieldKind::JointVel => Transform::Linear(action.joint_space_rep().clone()),
        FieldKind::Vec3 | FieldKind::BasePosition => Transform::Linear(action.vector_rep().clone()),
        FieldKind::Pseudovec3 => Transform::Linear(action.pseudovector_rep()),
        FieldKind::BaseRotation(enc) => Transform::Rotation(*enc),
        FieldKind::InvariantScalar => Transform::Linear(Representation::trivial(group, 1)),
        FieldKind::PerBranchScalar(t) => Transform::Linear(perm_rep(t)?),
        FieldKind::PerBranchVec3(t) => Transform::Linear(perm_rep(t)?.kron(action.vector_rep())?),
        FieldKind::ContactStateOnehot(t) => {
            let inst = branch_labels(action, t)?;
            let perms = group
                .elements()
                .map(|g| {
                    let p = local_perm(action, &inst, g);
                    (0..1usize << inst.len()).map(|i| contact_index_image(i, &p)).collect()
                })
                .collect();
            Transform::IndexPerm(perms)
        }
    })
}

/// Permutation matrix of a one-hot index map, exposed for inspection.
pub fn index_perm_matrix<T: Real>(perm: &[usize]) -> DMatrix<T> {
    permutation_matrix(perm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contact_code_swaps_pairs() {
        // LF↔RF, LH↔RH: b_LF b_RF b_LH b_RH → b_RF b_LF b_RH b_LH
        let p = [1, 0, 3, 2];
        for idx in 0..16usize {
            let b: Vec<usize> = (0..4).map(|i| idx >> (3 - i) & 1).collect();
            let expect = b[1] << 3 | b[0] << 2 | b[3] << 1 | b[2];
            assert_eq!(contact_index_image(idx, &p), expect);
        }
    }

    #[test]
    fn schema_parses_and_round_trips() {
        let text = r#"
[[field]]
name = "q"
kind = "joint_pos"
[[field]]
name = "orient"
kind = "base_rotation"
rotation_encoding = "quaternion"
[[field]]
name = "foot"
kind = "per_branch_vec3"
branch_type = "leg"
"#;
        let decls = parse_schema(text).unwrap();
        assert_eq!(decls[1].kind, FieldKind::BaseRotation(RotationEncoding::Quaternion));
        assert_eq!(parse_schema(&schema_to_toml(&decls)).unwrap(), decls);
        let bad = "[[field]]\nname = \"c\"\nkind = \"contact_state_onehot\"\n";
        assert!(matches!(parse_schema(bad), Err(Error::InvalidSchema(_))));
    }
}
