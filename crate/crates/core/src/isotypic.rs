//! Real isotypic decomposition via character projectors.

use std::f64::consts::PI;
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::groups::{FiniteGroup, GroupKind};
use crate::linalg;
use crate::reps::Representation;
use crate::scalar::Real;

/// One real irreducible character.
#[derive(Clone, Debug, PartialEq)]
pub struct RealIrrep {
    pub id: usize,
    pub label: String,
    pub dim: usize,
    /// `(1/|G|) Σ_g χ(g)²`: 1 for real-type irreps, 2 for merged conjugate pairs.
    pub schur: usize,
    pub character: Vec<f64>,
}

impl RealIrrep {
    pub fn is_trivial(&self) -> bool {
        self.dim == 1 && self.character.iter().all(|&x| (x - 1.0).abs() < 1e-12)
    }
}

#[derive(Clone, Debug)]
pub struct IrrepTable {
    pub group_name: String,
    pub order: usize,
    /// Trivial irrep first.
    pub irreps: Vec<RealIrrep>,
}

/// Complex irreducible character with a label, before merging into real ones.
struct ComplexChar {
    label: String,
    dim: usize,
    values: Vec<Complex64>,
}

fn kind_order(kind: &GroupKind) -> Option<usize> {
    match kind {
        GroupKind::Cyclic(n) => Some(*n),
        GroupKind::Dihedral(n) => Some(2 * n),
        GroupKind::Product(a, b) => Some(kind_order(a)? * kind_order(b)?),
        GroupKind::Generic => None,
    }
}

fn strip_parens(s: &str) -> &str {
    s.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(s)
}

fn complex_characters(kind: &GroupKind) -> Option<Vec<ComplexChar>> {
    match kind {
        GroupKind::Cyclic(n) => {
            let n = *n;
            Some(
                (0..n)
                    .map(|k| ComplexChar {
                        label: k.to_string(),
                        dim: 1,
                        values: (0..n)
                            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (k * j % n) as f64 / n as f64))
                            .collect(),
                    })
                    .collect(),
            )
        }
        GroupKind::Dihedral(n) => {
            let n = *n;
            let real = |label: String, dim: usize, f: &dyn Fn(bool, usize) -> f64| ComplexChar {
                label,
                dim,
                values: (0..2 * n)
                    .map(|x| Complex64::new(f(x >= n, x % n), 0.0))
                    .collect(),
            };
            let parity = |j: usize| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
            let mut out = vec![
                real("A1".into(), 1, &|_, _| 1.0),
                real("A2".into(), 1, &|s, _| if s { -1.0 } else { 1.0 }),
            ];
            if n % 2 == 0 {
                out.push(real("B1".into(), 1, &|_, j| parity(j)));
                out.push(real("B2".into(), 1, &|s, j| if s { -parity(j) } else { parity(j) }));
            }
            for k in 1..n.div_ceil(2) {
                if 2 * k == n {
                    continue;
                }
                out.push(real(format!("E{k}"), 2, &|s, j| {
                    if s {
                        0.0
                    } else {
                        2.0 * (2.0 * PI * (k * j % n) as f64 / n as f64).cos()
                    }
                }));
            }
            Some(out)
        }
        GroupKind::Product(a, b) => {
            let ca = complex_characters(a)?;
            let cb = complex_characters(b)?;
            let nb = kind_order(b)?;
            let na = kind_order(a)?;
            let mut out = Vec::with_capacity(ca.len() * cb.len());
            for x in &ca {
                for y in &cb {
                    out.push(ComplexChar {
                        label: format!("({},{})", strip_parens(&x.label), strip_parens(&y.label)),
                        dim: x.dim * y.dim,
                        values: (0..na * nb)
                            .map(|g| x.values[g / nb] * y.values[g % nb])
                            .collect(),
                    });
                }
            }
            Some(out)
        }
        GroupKind::Generic => None,
    }
}

/// Real irreducible characters of a group built from cyclic, dihedral and
/// direct-product constructors. Complex-conjugate pairs are merged into one
/// real irrep whose character is the pair sum.
pub fn real_character_table(group: &FiniteGroup) -> Result<IrrepTable> {
    let complex = complex_characters(group.kind()).ok_or_else(|| {
        Error::UnsupportedGroup(format!(
            "{} has no analytic character table (built from a raw Cayley table)",
            group
        ))
    })?;
    let n = group.order();
    let mut taken = vec![false; complex.len()];
    let mut irreps = Vec::new();
    for i in 0..complex.len() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let c = &complex[i];
        let is_real = c.values.iter().all(|z| z.im.abs() < 1e-9);
        if is_real {
            irreps.push(RealIrrep {
                id: 0,
                label: c.label.clone(),
                dim: c.dim,
                schur: 1,
                character: c.values.iter().map(|z| clean(z.re)).collect(),
            });
            continue;
        }
        let partner = (i + 1..complex.len()).find(|&j| {
            !taken[j]
                && complex[j]
                    .values
                    .iter()
                    .zip(&c.values)
                    .all(|(a, b)| (a - b.conj()).norm() < 1e-9)
        });
        let j = partner.ok_or_else(|| {
            Error::DecompositionFailure(format!("character {} has no conjugate partner", c.label))
        })?;
        taken[j] = true;
        irreps.push(RealIrrep {
            id: 0,
            label: format!("{}+{}", c.label, complex[j].label),
            dim: 2 * c.dim,
            schur: 2,
            character: c.values.iter().map(|z| clean(2.0 * z.re)).collect(),
        });
    }
    if let Some(pos) = irreps.iter().position(RealIrrep::is_trivial) {
        let t = irreps.remove(pos);
        irreps.insert(0, t);
    }
    for (id, irrep) in irreps.iter_mut().enumerate() {
        irrep.id = id;
    }
    debug_assert_eq!(
        irreps.iter().map(|r| r.dim * r.dim / r.schur).sum::<usize>(),
        n
    );
    Ok(IrrepTable {
        group_name: group.name(),
        order: n,
        irreps,
    })
}

/// Snaps values within 1e-12 of an integer, so analytic tables print cleanly.
fn clean(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-12 {
        r + 0.0
    } else {
        x
    }
}

/// Placement of one isotypic subspace inside the change of basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subspace {
    pub irrep_id: usize,
    pub irrep_label: String,
    pub irrep_dim: usize,
    pub multiplicity: usize,
    pub dim: usize,
    pub row_start: usize,
    pub row_end: usize,
}

impl Subspace {
    pub fn rows(&self) -> Range<usize> {
        self.row_start..self.row_end
    }
}

/// Orthogonal `T` with `T·ρ(g)·Tᵀ` block diagonal, one block per isotypic
/// subspace (trivial irrep first).
#[derive(Clone, Debug)]
pub struct IsotypicDecomposition<T: Real> {
    t: DMatrix<T>,
    subspaces: Vec<Subspace>,
    source: Representation<T>,
}

/// Decomposes an orthogonal representation into its isotypic subspaces.
pub fn decompose<T: Real>(rep: &Representation<T>) -> Result<IsotypicDecomposition<T>> {
    if !rep.is_orthogonal() {
        return Err(invalid("isotypic decomposition needs an orthogonal representation"));
    }
    let group = rep.group();
    let table = real_character_table(group)?;
    let order = T::lit(group.order() as f64);
    let n = rep.dim();
    let traces = rep.character();
    let mut rows: Vec<DVector<T>> = Vec::with_capacity(n);
    let mut subspaces = Vec::new();
    for irrep in &table.irreps {
        let chi: Vec<T> = irrep.character.iter().map(|&x| T::lit(x)).collect();
        let raw = chi
            .iter()
            .zip(&traces)
            .fold(T::zero(), |acc, (&c, &t)| acc + c * t)
            / (T::lit(irrep.schur as f64) * order);
        let rounded = raw.round();
        if (raw - rounded).abs() > T::tol(1e-6) || rounded < T::zero() {
            return Err(Error::DecompositionFailure(format!(
                "multiplicity of irrep {} is {} (not an integer)",
                irrep.label,
                raw.to_f64_lossy()
            )));
        }
        let m = rounded.to_f64_lossy() as usize;
        if m == 0 {
            continue;
        }
        let mut p = DMatrix::<T>::zeros(n, n);
        for (g, &c) in chi.iter().enumerate() {
            if c != T::zero() {
                p += rep.matrices()[g].clone() * c;
            }
        }
        p *= T::lit(irrep.dim as f64) / (T::lit(irrep.schur as f64) * order);
        let idem = crate::scalar::max_abs_diff(&(&p * &p), &p).unwrap_or(T::zero());
        if idem > T::tol(1e-8) {
            return Err(Error::DecompositionFailure(format!(
                "projector for irrep {} is not idempotent (residual {:e})",
                irrep.label,
                idem.to_f64_lossy()
            )));
        }
        let count = m * irrep.dim;
        let (basis, left) = linalg::pivoted_orthonormal_columns(&p, count);
        if basis.len() != count || left > T::tol(1e-6) {
            return Err(Error::DecompositionFailure(format!(
                "projector for irrep {} has rank different from {count}",
                irrep.label
            )));
        }
        let start = rows.len();
        rows.extend(basis);
        subspaces.push(Subspace {
            irrep_id: irrep.id,
            irrep_label: irrep.label.clone(),
            irrep_dim: irrep.dim,
            multiplicity: m,
            dim: count,
            row_start: start,
            row_end: rows.len(),
        });
    }
    if rows.len() != n {
        return Err(Error::DecompositionFailure(format!(
            "isotypic subspaces cover {} of {n} dimensions",
            rows.len()
        )));
    }
    let mut t = DMatrix::zeros(n, n);
    for (i, r) in rows.iter().enumerate() {
        t.set_row(i, &r.transpose());
    }
    let dec = IsotypicDecomposition {
        t,
        subspaces,
        source: rep.clone(),
    };
    if linalg::orthogonality_defect(&dec.t) > T::tol(1e-10) {
        return Err(Error::DecompositionFailure("change of basis is not orthogonal".into()));
    }
    for m in rep.matrices() {
        let off = dec.off_block_norm(m)?;
        if off > T::tol(1e-8) {
            return Err(Error::DecompositionFailure(format!(
                "representation is not block diagonal in the isotypic basis (off-block {:e})",
                off.to_f64_lossy()
            )));
        }
    }
    Ok(dec)
}

impl<T: Real> IsotypicDecomposition<T> {
    pub fn t(&self) -> &DMatrix<T> {
        &self.t
    }

    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    pub fn source(&self) -> &Representation<T> {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    fn subspace(&self, k: usize) -> Result<&Subspace> {
        self.subspaces.get(k).ok_or_else(|| {
            invalid(format!(
                "subspace index {k} out of range ({} subspaces)",
                self.subspaces.len()
            ))
        })
    }

    /// Coordinates of `x` in subspace `k`: the rows of `T` for that subspace
    /// applied to `x`.
    pub fn project_component(&self, x: &DVector<T>, k: usize) -> Result<DVector<T>> {
        if x.len() != self.dim() {
            return Err(invalid(format!(
                "vector of length {} for a decomposition of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let s = self.subspace(k)?;
        Ok(self.t.rows(s.row_start, s.dim) * x)
    }

    /// `T·x` split per subspace.
    pub fn project(&self, x: &DVector<T>) -> Result<Vec<DVector<T>>> {
        (0..self.subspaces.len())
            .map(|k| self.project_component(x, k))
            .collect()
    }

    /// `T·A·Tᵀ`.
    pub fn to_isotypic_basis(&self, a: &DMatrix<T>) -> Result<DMatrix<T>> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(invalid("matrix size does not match the decomposition"));
        }
        Ok(&self.t * a * self.t.transpose())
    }

    /// Frobenius norm of the entries of `T·A·Tᵀ` outside the diagonal blocks.
    pub fn off_block_norm(&self, a: &DMatrix<T>) -> Result<T> {
        let iso = self.to_isotypic_basis(a)?;
        let mut block_of = vec![0; self.dim()];
        for (k, s) in self.subspaces.iter().enumerate() {
            for r in s.rows() {
                block_of[r] = k;
            }
        }
        let mut acc = T::zero();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if block_of[i] != block_of[j] {
                    acc += iso[(i, j)] * iso[(i, j)];
                }
            }
        }
        Ok(acc.sqrt())
    }

    /// Diagonal block `k` of `T·A·Tᵀ`.
    pub fn diagonal_block(&self, a: &DMatrix<T>, k: usize) -> Result<DMatrix<T>> {
        let s = self.subspace(k)?;
        let rows = self.t.rows(s.row_start, s.dim);
        Ok(rows * a * rows.transpose())
    }

    /// CSV of `T` (row-major, no header).
    pub fn t_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{}", self.t[(i, j)].to_f64_lossy()))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes `T` as CSV to `path` and the subspace list as JSON next to it
    /// (same stem, `.json` extension).
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.t_csv())?;
        let meta = serde_json::json!({
            "group": self.source.group().name(),
            "dim": self.dim(),
            "subspaces": self.subspaces,
        });
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::GroupElement;
    use std::sync::Arc;

    fn table(lit: &str) -> IrrepTable {
        real_character_table(&FiniteGroup::parse(lit).unwrap()).unwrap()
    }

    fn swap_rep() -> Representation<f64> {
        let g = Arc::new(FiniteGroup::cyclic(2).unwrap());
        Representation::from_generators(g, &[DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])])
            .unwrap()
    }

    #[test]
    fn c2_and_k4_tables() {
        let t = table("C2");
        let chars: Vec<_> = t.irreps.iter().map(|r| r.character.clone()).collect();
        assert_eq!(chars, vec![vec![1.0, 1.0], vec![1.0, -1.0]]);
        let k4 = table("K4");
        assert_eq!(k4.irreps.len(), 4);
        let mut patterns: Vec<Vec<i32>> = k4
            .irreps
            .iter()
            .map(|r| r.character.iter().map(|&x| x as i32).collect())
            .collect();
        patterns.sort();
        patterns.dedup();
        assert_eq!(patterns.len(), 4);
        assert!(k4.irreps.iter().all(|r| r.dim == 1 && r.schur == 1));
    }

    #[test]
    fn c3_merges_conjugate_pair() {
        let t = table("C3");
        assert_eq!(t.irreps.len(), 2);
        assert_eq!(t.irreps[0].character, vec![1.0, 1.0, 1.0]);
        assert_eq!(t.irreps[1].dim, 2);
        assert_eq!(t.irreps[1].schur, 2);
        assert_eq!(t.irreps[1].character, vec![2.0, -1.0, -1.0]);
    }

    #[test]
    fn orthogonality_relations() {
        for lit in ["C1", "C2", "C3", "C4", "C5", "C6", "D6", "D8", "D10", "D12", "K4", "C2xC2xC2", "C3xC3", "C4xC2", "C3xD6", "C2xD8"] {
            let t = table(lit);
            let n = t.order as f64;
            let total: usize = t.irreps.iter().map(|r| r.dim * r.dim / r.schur).sum();
            assert_eq!(total, t.order, "{lit}");
            for a in &t.irreps {
                for b in &t.irreps {
                    let ip: f64 = a.character.iter().zip(&b.character).map(|(x, y)| x * y).sum::<f64>() / n;
                    let expected = if a.id == b.id { a.schur as f64 } else { 0.0 };
                    assert!((ip - expected).abs() < 1e-10, "{lit} {} {}", a.label, b.label);
                }
            }
            assert!(t.irreps[0].is_trivial());
        }
    }

    #[test]
    fn generic_groups_unsupported() {
        let c2 = FiniteGroup::cyclic(2).unwrap();
        let g = FiniteGroup::from_cayley(c2.cayley_table(), vec![1], None).unwrap();
        assert!(matches!(real_character_table(&g), Err(Error::UnsupportedGroup(_))));
    }

    #[test]
    fn swap_decomposition() {
        let dec = decompose(&swap_rep()).unwrap();
        assert_eq!(dec.subspaces().len(), 2);
        let s = 1.0 / 2f64.sqrt();
        let t = dec.t();
        assert!((t[(0, 0)].abs() - s).abs() < 1e-12 && (t[(0, 0)] - t[(0, 1)]).abs() < 1e-12);
        assert!((t[(1, 0)] + t[(1, 1)]).abs() < 1e-12);
        let x = DVector::from_vec(vec![3.0, 3.0]);
        let triv = dec.project_component(&x, 0).unwrap();
        assert!((triv[0].abs() - 3.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(dec.project_component(&x, 1).unwrap()[0].abs() < 1e-12);
        assert!(dec.project_component(&x, 2).is_err());
        let zero = dec.project(&DVector::zeros(2)).unwrap();
        assert!(zero.iter().all(|c| c.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn trivial_rep_is_single_subspace() {
        let g = Arc::new(FiniteGroup::cyclic(3).unwrap());
        let rep = Representation::<f64>::trivial(g, 5);
        let dec = decompose(&rep).unwrap();
        assert_eq!(dec.subspaces().len(), 1);
        assert_eq!(dec.subspaces()[0].dim, 5);
        assert!(crate::scalar::max_abs_diff(dec.t(), &DMatrix::identity(5, 5)).unwrap() < 1e-12);
    }

    #[test]
    fn regular_rep_of_d6_and_schur() {
        let g = Arc::new(FiniteGroup::dihedral(3).unwrap());
        let reg = Representation::<f64>::regular(g.clone());
        let dec = decompose(&reg).unwrap();
        let dims: Vec<_> = dec.subspaces().iter().map(|s| (s.irrep_dim, s.multiplicity)).collect();
        assert_eq!(dims, vec![(1, 1), (1, 1), (2, 2)]);
        // an equivariant endomorphism is block diagonal in the isotypic basis
        let mut a = DMatrix::<f64>::zeros(6, 6);
        let w = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        for x in g.elements() {
            a += reg.conj_action(x, &w).unwrap();
        }
        assert!(dec.off_block_norm(&a).unwrap() < 1e-7);
        assert!(dec.off_block_norm(&w).unwrap() > 1e-3);
        let x = DVector::from_fn(6, |i, _| (i as f64).sin());
        let norm2: f64 = dec.project(&x).unwrap().iter().map(|c| c.norm_squared()).sum();
        assert!((norm2 - x.norm_squared()).abs() < 1e-12);
        let _ = GroupElement::IDENTITY;
    }

    #[test]
    fn non_orthogonal_rep_rejected() {
        let g = Arc::new(FiniteGroup::cyclic(2).unwrap());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, -1.0]);
        let rep = Representation::from_generators(g, &[m]).unwrap();
        assert!(matches!(decompose(&rep), Err(Error::InvalidArgument(_))));
    }
}
