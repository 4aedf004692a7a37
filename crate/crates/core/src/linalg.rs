//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here works for both `f64` and `Complex64` entries. Numerical
//! rank uses a relative cutoff on the singular values.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

/// Singular values below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Full SVD data for any shape: singular values (length `ncols`, padded with
/// zeros) and the full right-singular basis as columns of `v`.
fn full_right_svd<T>(a: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>)
where
    T: ComplexField<RealField = f64>,
{
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = DMatrix::<T>::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut pairs: Vec<(f64, DVector<T>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, v_t.row(i).adjoint()))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let sigma: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let cols: Vec<DVector<T>> = pairs.into_iter().map(|p| p.1).collect();
    (sigma, DMatrix::from_columns(&cols))
}

/// Numerical rank with the relative cutoff `rel_tol`.
pub fn rank<T>(a: &DMatrix<T>, rel_tol: f64) -> usize
where
    T: ComplexField<RealField = f64>,
{
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Singular values sorted in descending order.
pub fn singular_values<T>(a: &DMatrix<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64>,
{
    let mut sv: Vec<f64> = a.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Orthonormal basis (as columns) of the right nullspace of `a`.
pub fn nullspace<T>(a: &DMatrix<T>, rel_tol: f64) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let (sigma, v) = full_right_svd(a);
    let smax = sigma.first().cloned().unwrap_or(0.0);
    let keep: Vec<usize> = (0..n)
        .filter(|&i| smax == 0.0 || sigma[i] <= rel_tol * smax)
        .collect();
    let cols: Vec<DVector<T>> = keep.iter().map(|&i| v.column(i).into_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Minimum-norm least-squares solution of `a x = b` and the achieved residual
/// norm `|a x - b|`.
pub fn lstsq_min_norm<T>(a: &DMatrix<T>, b: &DVector<T>, rel_tol: f64) -> (DVector<T>, f64)
where
    T: ComplexField<RealField = f64>,
{
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let x = if smax == 0.0 {
        DVector::zeros(a.ncols())
    } else {
        svd.solve(b, rel_tol * smax)
            .expect("both singular bases were computed")
    };
    let r = (a * &x - b).norm();
    (x, r)
}

/// Basis of the orthogonal complement of the row space of `rows` (each row a
/// covector in R^p). Columns of the result are orthonormal.
pub fn orthogonal_complement(rows: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    nullspace(rows, rel_tol)
}

/// Euclidean distance from `v` to the span of the columns of `basis`.
pub fn distance_from_span(v: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let (_, r) = lstsq_min_norm(basis, v, 1e-13);
    r
}

/// Ratio of smallest to largest singular value (1 for well-conditioned
/// orthogonal columns, 0 for dependent ones).
pub fn inverse_condition(a: &DMatrix<f64>) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn to_complex_vec(v: &DVector<f64>) -> DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn nullspace_of_rank_deficient_square() {
        let a: DMatrix<f64> = dmatrix![1.0, 2.0, 3.0; 2.0, 4.0, 6.0; 1.0, 0.0, 1.0];
        let ns = nullspace(&a, RANK_TOL);
        assert_eq!(ns.ncols(), 1);
        assert!((&a * &ns).norm() < 1e-12);
        assert!((ns.column(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nullspace_of_wide_matrix_is_complete() {
        let a: DMatrix<f64> = dmatrix![1.0, 0.0, 1.0, 0.0; 0.0, 1.0, 0.0, 1.0];
        let ns = nullspace(&a, RANK_TOL);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-12);
        let gram = ns.transpose() * &ns;
        assert!((gram - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn nonsingular_has_empty_nullspace() {
        let a = dmatrix![2.0, 1.0; 1.0, 3.0];
        assert_eq!(nullspace(&a, RANK_TOL).ncols(), 0);
        assert_eq!(rank(&a, RANK_TOL), 2);
    }

    #[test]
    fn complex_nullspace() {
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        // rows (1, i) and (i, -1) are dependent
        let a = DMatrix::from_row_slice(2, 2, &[one, i, i, -one]);
        let ns = nullspace(&a, RANK_TOL);
        assert_eq!(ns.ncols(), 1);
        assert!((&a * &ns).norm() < 1e-12);
    }

    #[test]
    fn min_norm_least_squares() {
        let a = dmatrix![1.0, 1.0];
        let b = DVector::from_vec(vec![2.0]);
        let (x, r) = lstsq_min_norm(&a, &b, RANK_TOL);
        assert!(r < 1e-14);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn span_distance() {
        let basis = dmatrix![1.0; 0.0; 0.0];
        let v = DVector::from_vec(vec![3.0, 4.0, 0.0]);
        assert!((distance_from_span(&v, &basis) - 4.0).abs() < 1e-12);
    }
}
