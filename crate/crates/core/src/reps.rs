//! Real matrix representations of finite groups.
//!
//! `ρ(g)` acts on column vectors from the left, so a representation maps
//! `x ↦ ρ(g)·x` and composition reads `ρ(a∘b) = ρ(a)·ρ(b)`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::groups::{FiniteGroup, GroupElement};
use crate::linalg;
use crate::scalar::Real;

/// How a Euclidean isometry acts on a geometric quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpatialRepKind {
    /// Polar vectors: `R`.
    Vector,
    /// Axial vectors such as angular momentum: `det(R)·R`.
    Pseudovector,
    /// Homogeneous transforms `[[R, t], [0, 1]]`.
    Homogeneous,
}

#[derive(Clone, Debug)]
pub struct Representation<T: Real> {
    group: Arc<FiniteGroup>,
    dim: usize,
    matrices: Vec<DMatrix<T>>,
    orthogonal: bool,
    /// Per-element signed-permutation structure when every matrix is one.
    monomial: Option<Vec<(Vec<usize>, Vec<T>)>>,
}

impl<T: Real> Representation<T> {
    /// Validates a full per-element matrix list and wraps it.
    fn from_matrices(group: Arc<FiniteGroup>, dim: usize, matrices: Vec<DMatrix<T>>) -> Result<Self> {
        let rep = Self::assemble(group, dim, matrices);
        let residual = rep.homomorphism_residual();
        if residual > T::tol(1e-8) {
            return Err(Error::InconsistentGenerators {
                residual: residual.to_f64_lossy(),
            });
        }
        Ok(rep)
    }

    fn assemble(group: Arc<FiniteGroup>, dim: usize, matrices: Vec<DMatrix<T>>) -> Self {
        let orthogonal = matrices
            .iter()
            .all(|m| linalg::orthogonality_defect(m) <= T::tol(1e-10));
        let monomial = matrices
            .iter()
            .map(linalg::signed_permutation)
            .collect::<Option<Vec<_>>>();
        Representation {
            group,
            dim,
            matrices,
            orthogonal,
            monomial,
        }
    }

    /// Builds every element's matrix by multiplying generator matrices along
    /// a spanning tree of the Cayley graph, then verifies the homomorphism
    /// property over the whole table.
    pub fn from_generators(group: Arc<FiniteGroup>, generators: &[DMatrix<T>]) -> Result<Self> {
        let group_gens = group.generators();
        if generators.len() != group_gens.len() {
            return Err(invalid(format!(
                "{} generator matrices supplied for a group with {} generators",
                generators.len(),
                group_gens.len()
            )));
        }
        let dim = match generators.first() {
            Some(m) => m.nrows(),
            None => return Ok(Self::trivial(group, 1)),
        };
        for m in generators {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(invalid("generator matrices must be square and of equal size"));
            }
            let scale = crate::scalar::max_abs(m).max(T::one());
            if linalg::min_singular_value(m) <= T::tol(1e-12) * scale {
                return Err(invalid("generator matrix is not invertible"));
            }
        }
        let (visit, via) = group.generator_tree();
        let mut matrices = vec![DMatrix::identity(dim, dim); group.order()];
        for &h in visit.iter().skip(1) {
            let (parent, slot) = via[h].expect("spanning tree covers the group");
            matrices[h] = &matrices[parent] * &generators[slot];
        }
        Self::from_matrices(group, dim, matrices)
    }

    /// Like [`Self::from_generators`] but for the trivial group accepts an
    /// explicit dimension.
    pub fn from_generators_dim(
        group: Arc<FiniteGroup>,
        generators: &[DMatrix<T>],
        dim: usize,
    ) -> Result<Self> {
        if generators.is_empty() && group.generators().is_empty() {
            return Ok(Self::trivial(group, dim));
        }
        let rep = Self::from_generators(group, generators)?;
        if rep.dim != dim {
            return Err(invalid(format!(
                "generator matrices have dimension {}, expected {dim}",
                rep.dim
            )));
        }
        Ok(rep)
    }

    /// Identity matrices of size `dim` for every element.
    pub fn trivial(group: Arc<FiniteGroup>, dim: usize) -> Self {
        let matrices = vec![DMatrix::identity(dim, dim); group.order()];
        Self::assemble(group, dim, matrices)
    }

    /// Permutation representation from per-element label actions, where
    /// `actions[g][i]` is the image of label `i` under `g`.
    pub fn permutation(group: Arc<FiniteGroup>, actions: &[Vec<usize>]) -> Result<Self> {
        if actions.len() != group.order() {
            return Err(invalid("one permutation per group element is required"));
        }
        let k = actions.first().map(|p| p.len()).unwrap_or(0);
        for p in actions {
            if !is_bijection(p, k) {
                return Err(invalid(format!("{p:?} is not a bijection on 0..{k}")));
            }
        }
        for a in group.elements() {
            for b in group.elements() {
                let ab = group.mul(a.0, b.0);
                let composed: Vec<usize> = (0..k).map(|i| actions[a.0][actions[b.0][i]]).collect();
                if composed != actions[ab] {
                    return Err(Error::InconsistentAction(format!(
                        "action of {} differs from the composition of {} and {}",
                        group.element_name(GroupElement(ab)),
                        group.element_name(a),
                        group.element_name(b)
                    )));
                }
            }
        }
        let matrices = actions.iter().map(|p| permutation_matrix(p)).collect();
        Ok(Self::assemble(group, k, matrices))
    }

    /// Permutation representation generated by one label permutation per
    /// group generator.
    pub fn permutation_from_generators(
        group: Arc<FiniteGroup>,
        generator_perms: &[Vec<usize>],
        labels: usize,
    ) -> Result<Self> {
        for p in generator_perms {
            if !is_bijection(p, labels) {
                return Err(invalid(format!("{p:?} is not a bijection on 0..{labels}")));
            }
        }
        let mats: Vec<DMatrix<T>> = generator_perms.iter().map(|p| permutation_matrix(p)).collect();
        Self::from_generators_dim(group, &mats, labels).map_err(|e| match e {
            Error::InconsistentGenerators { .. } => Error::InconsistentAction(
                "generator permutations violate the group relations".into(),
            ),
            other => other,
        })
    }

    /// Left-regular representation: `g` maps basis vector `e_h` to `e_{g∘h}`.
    pub fn regular(group: Arc<FiniteGroup>) -> Self {
        let n = group.order();
        let matrices = group
            .elements()
            .map(|g| {
                let p: Vec<usize> = (0..n).map(|h| group.mul(g.0, h)).collect();
                permutation_matrix(&p)
            })
            .collect();
        Self::assemble(group, n, matrices)
    }

    /// Representation of a Euclidean isometry on vectors, pseudovectors or
    /// homogeneous coordinates. One `(R, t)` pair per group generator.
    pub fn spatial(
        group: Arc<FiniteGroup>,
        kind: SpatialRepKind,
        generator_isometries: &[(DMatrix<T>, DVector<T>)],
    ) -> Result<Self> {
        let mut dim = None;
        let mut gens = Vec::with_capacity(generator_isometries.len());
        for (r, t) in generator_isometries {
            let d = r.nrows();
            if !(d == 2 || d == 3) || r.ncols() != d || t.len() != d {
                return Err(invalid("isometries must be 2D or 3D with matching translation"));
            }
            if *dim.get_or_insert(d) != d {
                return Err(invalid("all isometries must share a dimension"));
            }
            if linalg::orthogonality_defect(r) > T::tol(1e-10) {
                return Err(invalid("isometry linear part is not orthogonal"));
            }
            gens.push(spatial_matrix(kind, r, t));
        }
        let d = dim.unwrap_or(3);
        let out_dim = if kind == SpatialRepKind::Homogeneous { d + 1 } else { d };
        Self::from_generators_dim(group, &gens, out_dim)
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    /// `true` when every matrix is a signed permutation.
    pub fn is_signed_permutation(&self) -> bool {
        self.monomial.is_some()
    }

    pub fn matrix(&self, g: GroupElement) -> &DMatrix<T> {
        &self.matrices[g.0]
    }

    pub fn matrices(&self) -> &[DMatrix<T>] {
        &self.matrices
    }

    /// `ρ(g)·x`. Signed-permutation matrices are applied by moving entries,
    /// which keeps the result bit-exact.
    pub fn apply(&self, g: GroupElement, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "vector of length {} for representation of dimension {}",
                x.len(),
                self.dim
            )));
        }
        self.group.element(g.0)?;
        Ok(match &self.monomial {
            Some(perms) => {
                let (rows, signs) = &perms[g.0];
                let mut out = DVector::zeros(self.dim);
                for j in 0..self.dim {
                    out[rows[j]] = if signs[j] == T::one() { x[j] } else { -x[j] };
                }
                out
            }
            None => &self.matrices[g.0] * x,
        })
    }

    /// Signed-permutation structure of `ρ(g)`, if available.
    pub fn signed_permutation(&self, g: GroupElement) -> Option<(&[usize], &[T])> {
        self.monomial
            .as_ref()
            .map(|m| (m[g.0].0.as_slice(), m[g.0].1.as_slice()))
    }

    /// Largest entrywise deviation `|ρ(a∘b) − ρ(a)ρ(b)|` over all pairs.
    pub fn homomorphism_residual(&self) -> T {
        let mut worst = T::zero();
        let n = self.group.order();
        let id = DMatrix::<T>::identity(self.dim, self.dim);
        if let Some(d) = crate::scalar::max_abs_diff(&self.matrices[0], &id) {
            worst = worst.max(d);
        }
        for a in 0..n {
            for b in 0..n {
                let ab = self.group.mul(a, b);
                let prod = &self.matrices[a] * &self.matrices[b];
                if let Some(d) = crate::scalar::max_abs_diff(&self.matrices[ab], &prod) {
                    worst = worst.max(d);
                }
            }
        }
        worst
    }

    /// Trace of every element's matrix.
    pub fn character(&self) -> Vec<T> {
        self.matrices.iter().map(|m| m.trace()).collect()
    }

    fn same_group(&self, other: &Representation<T>) -> Result<()> {
        if Arc::ptr_eq(&self.group, &other.group) || *self.group == *other.group {
            Ok(())
        } else {
            Err(invalid(format!(
                "representations over different groups ({} vs {})",
                self.group, other.group
            )))
        }
    }

    /// Block-diagonal direct sum `ρ_a ⊕ ρ_b`.
    pub fn direct_sum(&self, other: &Representation<T>) -> Result<Self> {
        self.same_group(other)?;
        let matrices = self
            .matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| linalg::block_diag(a, b))
            .collect();
        Ok(Self::assemble(self.group.clone(), self.dim + other.dim, matrices))
    }

    /// Kronecker (tensor) product `ρ_a ⊗ ρ_b`.
    pub fn kron(&self, other: &Representation<T>) -> Result<Self> {
        self.same_group(other)?;
        let matrices = self
            .matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| linalg::kron(a, b))
            .collect();
        Ok(Self::assemble(self.group.clone(), self.dim * other.dim, matrices))
    }

    /// Equivalent representation `T·ρ(g)·Tᵀ` for an orthogonal `T`.
    pub fn conjugate_by_basis(&self, basis: &DMatrix<T>) -> Result<Self> {
        if basis.nrows() != self.dim || basis.ncols() != self.dim {
            return Err(invalid("change of basis has the wrong size"));
        }
        if linalg::orthogonality_defect(basis) > T::tol(1e-10) {
            return Err(invalid("change of basis is not orthogonal"));
        }
        let bt = basis.transpose();
        let matrices = self.matrices.iter().map(|m| basis * m * &bt).collect();
        Ok(Self::assemble(self.group.clone(), self.dim, matrices))
    }

    /// Conjugate action `ρ(g)·A·ρ(g)⁻¹`.
    pub fn conj_action(&self, g: GroupElement, a: &DMatrix<T>) -> Result<DMatrix<T>> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(invalid("matrix size does not match the representation"));
        }
        let g = self.group.element(g.0)?;
        let inv = self.group.inv(g.0);
        Ok(&self.matrices[g.0] * a * &self.matrices[inv])
    }

    /// Restriction to a new group through an injective homomorphism given as
    /// the image in `self.group()` of every element of `subgroup`.
    pub fn restrict(&self, subgroup: Arc<FiniteGroup>, embedding: &[usize]) -> Result<Self> {
        if embedding.len() != subgroup.order() || embedding.iter().any(|&x| x >= self.group.order())
        {
            return Err(invalid("embedding does not match the subgroup order"));
        }
        let matrices = embedding.iter().map(|&x| self.matrices[x].clone()).collect();
        Self::from_matrices(subgroup, self.dim, matrices)
    }
}

/// `max_g ‖ρ_out(g)·W − W·ρ_in(g)‖_∞`.
pub fn equivariance_residual<T: Real>(
    w: &DMatrix<T>,
    rep_in: &Representation<T>,
    rep_out: &Representation<T>,
) -> Result<T> {
    rep_in.same_group(rep_out)?;
    if w.nrows() != rep_out.dim || w.ncols() != rep_in.dim {
        return Err(invalid(format!(
            "map is {}x{} but representations need {}x{}",
            w.nrows(),
            w.ncols(),
            rep_out.dim,
            rep_in.dim
        )));
    }
    let mut worst = T::zero();
    for (a, b) in rep_out.matrices.iter().zip(&rep_in.matrices) {
        let d = a * w - w * b;
        worst = worst.max(crate::scalar::max_abs(&d));
    }
    Ok(worst)
}

/// Whether `W` intertwines the two representations within `tol`.
pub fn is_equivariant_map<T: Real>(
    w: &DMatrix<T>,
    rep_in: &Representation<T>,
    rep_out: &Representation<T>,
    tol: T,
) -> Result<bool> {
    Ok(equivariance_residual(w, rep_in, rep_out)? <= tol)
}

/// Group-averaging projector `W ↦ (1/|G|) Σ_g ρ_out(g)⁻¹·W·ρ_in(g)`.
pub fn average_to_equivariant<T: Real>(
    w: &DMatrix<T>,
    rep_in: &Representation<T>,
    rep_out: &Representation<T>,
) -> Result<DMatrix<T>> {
    rep_in.same_group(rep_out)?;
    if w.nrows() != rep_out.dim || w.ncols() != rep_in.dim {
        return Err(invalid("map shape does not match the representations"));
    }
    let group = &rep_in.group;
    let mut acc = DMatrix::zeros(w.nrows(), w.ncols());
    for g in group.elements() {
        let inv = group.inv(g.0);
        acc += &rep_out.matrices[inv] * w * &rep_in.matrices[g.0];
    }
    Ok(acc / T::lit(group.order() as f64))
}

/// Sparse orthonormal basis of the space of equivariant `m x n` matrices.
///
/// Each element is stored as `(row, col, value)` triplets. Orthonormality is
/// with respect to the Frobenius inner product.
#[derive(Clone, Debug)]
pub struct EquivariantBasis<T: Real> {
    rows: usize,
    cols: usize,
    elements: Vec<Vec<(usize, usize, T)>>,
}

impl<T: Real> EquivariantBasis<T> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn element(&self, p: usize) -> &[(usize, usize, T)] {
        &self.elements[p]
    }

    pub fn matrix(&self, p: usize) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.elements[p] {
            m[(i, j)] += v;
        }
        m
    }

    pub fn matrices(&self) -> Vec<DMatrix<T>> {
        (0..self.len()).map(|p| self.matrix(p)).collect()
    }

    /// `Σ_p coeffs[p]·B_p`.
    pub fn realize(&self, coeffs: &[T]) -> DMatrix<T> {
        assert_eq!(coeffs.len(), self.len(), "one coefficient per basis element");
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (elem, &c) in self.elements.iter().zip(coeffs) {
            for &(i, j, v) in elem {
                m[(i, j)] += c * v;
            }
        }
        m
    }

    /// Frobenius inner products `⟨A, B_p⟩` for every basis element.
    pub fn project(&self, a: &DMatrix<T>) -> Vec<T> {
        self.elements
            .iter()
            .map(|elem| elem.iter().fold(T::zero(), |acc, &(i, j, v)| acc + v * a[(i, j)]))
            .collect()
    }
}

/// Orthonormal basis of `{W : ρ_out(g)·W = W·ρ_in(g) ∀g}`.
///
/// The averaging projector is applied to every coordinate matrix `E_ij`.
/// For signed-permutation representations the projected matrices are
/// normalised orbit sums with disjoint supports, so the span is read off
/// directly; otherwise the projected matrices are stacked and an SVD keeps
/// directions above `1e-8` of the largest singular value (or of one, when
/// the projector vanishes).
pub fn equivariant_basis<T: Real>(
    rep_in: &Representation<T>,
    rep_out: &Representation<T>,
) -> Result<EquivariantBasis<T>> {
    rep_in.same_group(rep_out)?;
    let (m, n) = (rep_out.dim, rep_in.dim);
    let elements = match (&rep_in.monomial, &rep_out.monomial) {
        (Some(pin), Some(pout)) => monomial_basis(&rep_in.group, pin, pout, m, n),
        _ => dense_basis(rep_in, rep_out),
    };
    Ok(EquivariantBasis {
        rows: m,
        cols: n,
        elements,
    })
}

fn monomial_basis<T: Real>(
    group: &FiniteGroup,
    pin: &[(Vec<usize>, Vec<T>)],
    pout: &[(Vec<usize>, Vec<T>)],
    m: usize,
    n: usize,
) -> Vec<Vec<(usize, usize, T)>> {
    // inverse column maps: for ρ(g)ᵀ e_i we need the column k whose image row is i
    let inv_rows = |perm: &(Vec<usize>, Vec<T>)| {
        let mut inv = vec![0usize; perm.0.len()];
        for (col, &row) in perm.0.iter().enumerate() {
            inv[row] = col;
        }
        inv
    };
    let out_inv: Vec<Vec<usize>> = pout.iter().map(inv_rows).collect();
    let in_inv: Vec<Vec<usize>> = pin.iter().map(inv_rows).collect();
    let scale = T::one() / T::lit(group.order() as f64);
    let mut visited = vec![false; m * n];
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if visited[i * n + j] {
                continue;
            }
            // (1/|G|) Σ_g ρ_out(g)ᵀ E_ij ρ_in(g): ρ_out(g)ᵀ e_i = s·e_k and
            // e_jᵀ ρ_in(g) = s'·e_lᵀ
            let mut acc: HashMap<(usize, usize), T> = HashMap::new();
            for g in 0..group.order() {
                let k = out_inv[g][i];
                let s = pout[g].1[k];
                let l = in_inv[g][j];
                let s2 = pin[g].1[l];
                *acc.entry((k, l)).or_insert(T::zero()) += s * s2 * scale;
            }
            let mut entries: Vec<(usize, usize, T)> = acc
                .into_iter()
                .map(|((k, l), v)| {
                    visited[k * n + l] = true;
                    (k, l, v)
                })
                .filter(|&(_, _, v)| v.abs() > T::tol(1e-12))
                .collect();
            if entries.is_empty() {
                continue;
            }
            entries.sort_by_key(|&(k, l, _)| (k, l));
            let norm = entries.iter().fold(T::zero(), |a, &(_, _, v)| a + v * v).sqrt();
            for e in entries.iter_mut() {
                e.2 /= norm;
            }
            out.push(entries);
        }
    }
    out
}

fn dense_basis<T: Real>(
    rep_in: &Representation<T>,
    rep_out: &Representation<T>,
) -> Vec<Vec<(usize, usize, T)>> {
    let (m, n) = (rep_out.dim, rep_in.dim);
    let group = &rep_in.group;
    let scale = T::one() / T::lit(group.order() as f64);
    let mut stacked = DMatrix::<T>::zeros(m * n, m * n);
    for g in 0..group.order() {
        let a = &rep_out.matrices[group.inv(g)];
        let b = &rep_in.matrices[g];
        for i in 0..m {
            for j in 0..n {
                let col = i * n + j;
                // column i of a times row j of b
                for r in 0..m {
                    let ar = a[(r, i)];
                    if ar == T::zero() {
                        continue;
                    }
                    for c in 0..n {
                        stacked[(r * n + c, col)] += ar * b[(j, c)] * scale;
                    }
                }
            }
        }
    }
    linalg::svd_column_space(&stacked, T::tol(1e-8))
        .into_iter()
        .map(|v| {
            let mut entries = Vec::new();
            for r in 0..m {
                for c in 0..n {
                    let x = v[r * n + c];
                    if x != T::zero() {
                        entries.push((r, c, x));
                    }
                }
            }
            entries
        })
        .collect()
}

pub(crate) fn permutation_matrix<T: Real>(p: &[usize]) -> DMatrix<T> {
    let k = p.len();
    let mut m = DMatrix::zeros(k, k);
    for (i, &pi) in p.iter().enumerate() {
        m[(pi, i)] = T::one();
    }
    m
}

fn is_bijection(p: &[usize], k: usize) -> bool {
    if p.len() != k {
        return false;
    }
    let mut hit = vec![false; k];
    for &x in p {
        if x >= k || hit[x] {
            return false;
        }
        hit[x] = true;
    }
    true
}

fn spatial_matrix<T: Real>(kind: SpatialRepKind, r: &DMatrix<T>, t: &DVector<T>) -> DMatrix<T> {
    match kind {
        SpatialRepKind::Vector => r.clone(),
        SpatialRepKind::Pseudovector => {
            let det = r.determinant();
            let sign = if det < T::zero() { -T::one() } else { T::one() };
            r * sign
        }
        SpatialRepKind::Homogeneous => {
            let d = r.nrows();
            let mut h = DMatrix::identity(d + 1, d + 1);
            h.view_mut((0, 0), (d, d)).copy_from(r);
            h.view_mut((0, d), (d, 1)).copy_from(t);
            h
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(n: usize) -> Arc<FiniteGroup> {
        Arc::new(FiniteGroup::cyclic(n).unwrap())
    }

    fn mat(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, data.len() / rows, data)
    }

    fn swap_rep() -> Representation<f64> {
        Representation::from_generators(c(2), &[mat(2, &[0.0, 1.0, 1.0, 0.0])]).unwrap()
    }

    fn rot2(theta: f64) -> DMatrix<f64> {
        mat(2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn dense_basis_is_empty_without_equivariant_maps() {
        // rotations of the plane by 120 degrees fix no vector
        let rot = Representation::from_generators(c(3), &[rot2(2.0 * PI / 3.0)]).unwrap();
        assert!(!rot.is_signed_permutation());
        let triv = Representation::trivial(c(3), 1);
        assert!(equivariant_basis(&triv, &rot).unwrap().is_empty());
        assert!(equivariant_basis(&rot, &triv).unwrap().is_empty());
    }

    #[test]
    fn sign_and_swap_reps() {
        let sign = Representation::from_generators(c(2), &[mat(1, &[-1.0])]).unwrap();
        assert_eq!(sign.matrix(GroupElement(0))[(0, 0)], 1.0);
        assert_eq!(sign.matrix(GroupElement(1))[(0, 0)], -1.0);
        let swap = swap_rep();
        assert_eq!(swap.character(), vec![2.0, 0.0]);
        assert!(swap.is_orthogonal());
        assert!(swap.is_signed_permutation());
    }

    #[test]
    fn rotation_rep_of_c3() {
        let rep = Representation::from_generators(c(3), &[rot2(2.0 * PI / 3.0)]).unwrap();
        let r = rep.matrix(GroupElement(1));
        let cube = r * r * r;
        assert!(crate::scalar::max_abs_diff(&cube, &DMatrix::identity(2, 2)).unwrap() < 1e-12);
        let chi = rep.character();
        assert!((chi[0] - 2.0).abs() < 1e-12);
        assert!((chi[1] + 1.0).abs() < 1e-12);
        assert!((chi[2] + 1.0).abs() < 1e-12);
        assert!(rep.homomorphism_residual() < 1e-10);
    }

    #[test]
    fn inconsistent_and_singular_generators() {
        // a 90 degree rotation does not have order 3
        let err = Representation::from_generators(c(3), &[rot2(PI / 2.0)]).unwrap_err();
        assert!(matches!(err, Error::InconsistentGenerators { .. }));
        let err = Representation::from_generators(c(2), &[mat(2, &[1.0, 0.0, 0.0, 0.0])])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        assert!(Representation::<f64>::from_generators(c(2), &[]).is_err());
    }

    #[test]
    fn permutation_reps() {
        let swap = Representation::<f64>::permutation(c(2), &[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(swap.matrix(GroupElement(1)), &mat(2, &[0.0, 1.0, 1.0, 0.0]));
        let triv = Representation::<f64>::permutation(c(2), &[vec![0, 1], vec![0, 1]]).unwrap();
        assert_eq!(triv.matrix(GroupElement(1)), &DMatrix::identity(2, 2));
        let cyc = Representation::<f64>::permutation(
            c(3),
            &[vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]],
        )
        .unwrap();
        let r = cyc.matrix(GroupElement(1));
        assert_eq!(r[(1, 0)], 1.0);
        assert_eq!(r[(2, 1)], 1.0);
        assert_eq!(r[(0, 2)], 1.0);
        assert!(matches!(
            Representation::<f64>::permutation(c(2), &[vec![0, 1], vec![1, 1]]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            Representation::<f64>::permutation(c(3), &[vec![0, 1, 2], vec![1, 0, 2], vec![2, 0, 1]]),
            Err(Error::InconsistentAction(_))
        ));
    }

    #[test]
    fn direct_sum_and_kron() {
        let sign = Representation::from_generators(c(2), &[mat(1, &[-1.0])]).unwrap();
        let ss = sign.direct_sum(&sign).unwrap();
        assert_eq!(ss.matrix(GroupElement(1)), &mat(2, &[-1.0, 0.0, 0.0, -1.0]));
        let empty = Representation::<f64>::trivial(c(2), 0);
        let swap = swap_rep();
        assert_eq!(swap.direct_sum(&empty).unwrap().matrices(), swap.matrices());
        let one = Representation::<f64>::trivial(c(2), 1);
        assert_eq!(swap.kron(&one).unwrap().matrices(), swap.matrices());
        let k = swap.kron(&swap).unwrap();
        // (0,1) <-> (2,3) block swap with inner swap: index 2a+b -> 2(1-a)+(1-b)
        let expected = mat(
            4,
            &[
                0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
            ],
        );
        assert_eq!(k.matrix(GroupElement(1)), &expected);
        let other = Representation::<f64>::trivial(c(3), 1);
        assert!(swap.direct_sum(&other).is_err());
        assert!(swap.kron(&other).is_err());
    }

    #[test]
    fn change_of_basis() {
        let swap = swap_rep();
        let s = 1.0 / 2f64.sqrt();
        let t = mat(2, &[s, s, s, -s]);
        let conj = swap.conjugate_by_basis(&t).unwrap();
        let d = conj.matrix(GroupElement(1));
        assert!((d[(0, 0)] - 1.0).abs() < 1e-15 && (d[(1, 1)] + 1.0).abs() < 1e-15);
        assert!(d[(0, 1)].abs() < 1e-15 && d[(1, 0)].abs() < 1e-15);
        let back = conj.conjugate_by_basis(&t.transpose()).unwrap();
        for (a, b) in back.matrices().iter().zip(swap.matrices()) {
            assert!(crate::scalar::max_abs_diff(a, b).unwrap() < 1e-12);
        }
        assert_eq!(
            swap.conjugate_by_basis(&DMatrix::identity(2, 2)).unwrap().matrices(),
            swap.matrices()
        );
        assert!(swap.conjugate_by_basis(&mat(2, &[1.0, 1.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn conjugate_action() {
        let swap = swap_rep();
        let a = mat(2, &[2.0, 0.0, 0.0, 5.0]);
        assert_eq!(swap.conj_action(GroupElement(0), &a).unwrap(), a);
        assert_eq!(
            swap.conj_action(GroupElement(1), &a).unwrap(),
            mat(2, &[5.0, 0.0, 0.0, 2.0])
        );
        let rep = Representation::from_generators(c(3), &[rot2(2.0 * PI / 3.0)]).unwrap();
        let b = mat(2, &[1.0, 2.0, 3.0, 4.0]);
        let g = GroupElement(1);
        let once = rep.conj_action(GroupElement(2), &b).unwrap();
        let back = rep.conj_action(g, &once).unwrap();
        assert!(crate::scalar::max_abs_diff(&back, &b).unwrap() < 1e-12);
        assert!(swap.conj_action(g, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn equivariance_checks() {
        let swap = swap_rep();
        assert!(is_equivariant_map(&DMatrix::identity(2, 2), &swap, &swap, 1e-12).unwrap());
        assert!(!is_equivariant_map(&mat(2, &[1.0, 0.0, 0.0, 2.0]), &swap, &swap, 1e-12).unwrap());
        for (a, b) in [(0.3, -1.7), (2.0, 2.0), (-4.0, 0.5)] {
            assert!(is_equivariant_map(&mat(2, &[a, b, b, a]), &swap, &swap, 1e-12).unwrap());
        }
        assert!(is_equivariant_map(&DMatrix::zeros(3, 2), &swap, &swap, 1e-12).is_err());
    }

    #[test]
    fn basis_examples() {
        let triv = Representation::<f64>::trivial(c(1), 3);
        let triv2 = Representation::<f64>::trivial(c(1), 2);
        assert_eq!(equivariant_basis(&triv, &triv2).unwrap().len(), 6);

        let swap = swap_rep();
        let basis = equivariant_basis(&swap, &swap).unwrap();
        assert_eq!(basis.len(), 2);
        let one = Representation::<f64>::trivial(c(2), 1);
        let inv = equivariant_basis(&swap, &one).unwrap();
        assert_eq!(inv.len(), 1);
        let v = inv.matrix(0);
        assert!((v[(0, 0)] - v[(0, 1)]).abs() < 1e-15);
        assert!((v.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_and_monomial_paths_agree() {
        let g = Arc::new(FiniteGroup::dihedral(4).unwrap());
        let perm = Representation::<f64>::permutation(
            g.clone(),
            &g.elements()
                .map(|x| (0..8).map(|h| g.mul(x.0, h) % 8).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let fast = equivariant_basis(&perm, &perm).unwrap();
        let slow = dense_basis(&perm, &perm);
        assert_eq!(fast.len(), slow.len());
        assert_eq!(fast.len(), 8);
    }

    #[test]
    fn spatial_kinds() {
        let reflect = mat(3, &[-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let t = DVector::zeros(3);
        let v = Representation::spatial(c(2), SpatialRepKind::Vector, &[(reflect.clone(), t.clone())])
            .unwrap();
        let p = Representation::spatial(c(2), SpatialRepKind::Pseudovector, &[(reflect.clone(), t.clone())])
            .unwrap();
        assert_eq!(v.matrix(GroupElement(1)), &reflect);
        assert_eq!(p.matrix(GroupElement(1)), &(-reflect.clone()));
        let h = Representation::spatial(c(2), SpatialRepKind::Homogeneous, &[(reflect.clone(), t)])
            .unwrap();
        assert_eq!(h.dim(), 4);

        let rz = mat(3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        let z = DVector::zeros(3);
        let v = Representation::spatial(c(2), SpatialRepKind::Vector, &[(rz.clone(), z.clone())]).unwrap();
        let p = Representation::spatial(c(2), SpatialRepKind::Pseudovector, &[(rz, z)]).unwrap();
        assert_eq!(v.matrices(), p.matrices());

        let id = DMatrix::<f64>::identity(3, 3);
        for kind in [SpatialRepKind::Vector, SpatialRepKind::Pseudovector, SpatialRepKind::Homogeneous] {
            let r = Representation::spatial(c(2), kind, &[(id.clone(), DVector::zeros(3))]).unwrap();
            for m in r.matrices() {
                assert_eq!(m, &DMatrix::identity(r.dim(), r.dim()));
            }
        }
        let shear = mat(3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(Representation::spatial(c(2), SpatialRepKind::Vector, &[(shear, DVector::zeros(3))]).is_err());
    }

    #[test]
    fn apply_is_exact_for_signed_permutations() {
        let swap = swap_rep();
        let x = DVector::from_vec(vec![-0.0, 1.0 / 3.0]);
        let y = swap.apply(GroupElement(1), &x).unwrap();
        assert_eq!(y[0], 1.0 / 3.0);
        assert!(y[1] == 0.0 && y[1].is_sign_negative());
    }

    #[test]
    fn f32_representations_work() {
        let g = c(3);
        let th = 2.0 * std::f32::consts::PI / 3.0;
        let r = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let rep = Representation::<f32>::from_generators(g, &[r]).unwrap();
        assert!(rep.is_orthogonal());
        assert_eq!(equivariant_basis(&rep, &rep).unwrap().len(), 2);
    }
}
