//! Small dense linear-algebra helpers not provided by nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

pub fn kron<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

pub fn block_diag<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

/// Signed-permutation structure of a square matrix: for every column `j`,
/// the row holding its single `±1` entry and that sign. `None` if the
/// matrix is not exactly monomial with unit entries.
pub fn signed_permutation<T: Real>(m: &DMatrix<T>) -> Option<(Vec<usize>, Vec<T>)> {
    if !m.is_square() {
        return None;
    }
    let n = m.nrows();
    let mut rows = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    let mut row_used = vec![false; n];
    for j in 0..n {
        let mut found = None;
        for i in 0..n {
            let x = m[(i, j)];
            if x == T::zero() {
                continue;
            }
            if found.is_some() || (x != T::one() && x != -T::one()) {
                return None;
            }
            found = Some((i, x));
        }
        let (i, s) = found?;
        if row_used[i] {
            return None;
        }
        row_used[i] = true;
        rows.push(i);
        signs.push(s);
    }
    Some((rows, signs))
}

/// `‖MᵀM − I‖_∞` (max entry).
pub fn orthogonality_defect<T: Real>(m: &DMatrix<T>) -> T {
    let g = m.transpose() * m;
    let mut worst = T::zero();
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Orthonormal basis for the span of the columns of `m`, extracted by
/// Gram–Schmidt with column pivoting: at each step the column with the
/// largest residual norm is taken, ties resolved towards the lowest index.
///
/// Exactly `count` vectors are extracted. Returns them together with the
/// largest residual column norm left after the last step (zero when
/// `count` equals the rank).
pub fn pivoted_orthonormal_columns<T: Real>(
    m: &DMatrix<T>,
    count: usize,
) -> (Vec<DVector<T>>, T) {
    let mut residual: Vec<DVector<T>> = m.column_iter().map(|c| c.into_owned()).collect();
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best = None;
        let mut best_norm = T::zero();
        for (j, r) in residual.iter().enumerate() {
            let nrm = r.norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        let mut q = residual[j].clone();
        // two passes of re-orthogonalisation keep the basis orthonormal to
        // working precision
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&q);
                q.axpy(-c, b, T::one());
            }
        }
        let nrm = q.norm();
        if nrm == T::zero() {
            break;
        }
        q /= nrm;
        for r in residual.iter_mut() {
            let c = q.dot(r);
            r.axpy(-c, &q, T::one());
        }
        basis.push(q);
    }
    let left = residual
        .iter()
        .fold(T::zero(), |acc, r| acc.max(r.norm()));
    (basis, left)
}

/// Orthonormal basis of the column space via SVD, keeping singular values
/// above `rel_threshold` times the largest one, or times one when all are
/// smaller. The floor suits idempotents, whose nonzero singular values are
/// at least one, so a numerically zero projector yields no directions.
pub fn svd_column_space<T: Real>(m: &DMatrix<T>, rel_threshold: T) -> Vec<DVector<T>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("U requested");
    let smax = svd
        .singular_values
        .iter()
        .fold(T::zero(), |acc, s| acc.max(*s));
    let cut = rel_threshold * smax.max(T::one());
    let mut idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cut)
        .collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx.into_iter().map(|i| u.column(i).into_owned()).collect()
}

/// Smallest singular value of a square matrix.
pub fn min_singular_value<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 {
        return T::one();
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().skip(1).fold(sv[0], |acc, s| acc.min(*s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_detection() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let (rows, signs) = signed_permutation(&m).unwrap();
        assert_eq!(rows, vec![1, 0, 2]);
        assert_eq!(signs, vec![1.0, -1.0, 1.0]);
        let not = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]);
        assert!(signed_permutation(&not).is_none());
        let dup = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        assert!(signed_permutation(&dup).is_none());
    }

    #[test]
    fn pivoting_prefers_largest_then_lowest_index() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let (basis, left) = pivoted_orthonormal_columns(&m, 2);
        assert_eq!(basis.len(), 2);
        assert_eq!(basis[0], DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(basis[1], DVector::from_vec(vec![0.0, 1.0]));
        assert!(left < 1e-15);
    }

    #[test]
    fn block_diag_shapes() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let b = DMatrix::<f64>::zeros(0, 0);
        assert_eq!(block_diag(&a, &b), a);
    }
}
