//! Rank, ranges, Hermitian eigensystems and Gibbs-factor splitting.

use num_traits::{One, Zero};
use nalgebra::ComplexField;
use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{real, Real, RealOf, Scalar};

/// Singular values in decreasing order.
pub fn singular_values<K: Scalar>(m: &DMatrix<K>) -> Vec<RealOf<K>> {
    if m.is_empty() {
        return vec![];
    }
    let mut s: Vec<RealOf<K>> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Number of singular values above `rtol` times the largest one.
pub fn rank<K: Scalar>(m: &DMatrix<K>, rtol: RealOf<K>) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > RealOf::<K>::zero() => s.iter().filter(|&&x| x > rtol * top).count(),
        _ => 0,
    }
}

/// Multiplies each column by a unit phase so that its largest-magnitude entry
/// (the first one, among near-ties) is real and positive.
pub fn fix_phases<K: Scalar>(m: &mut DMatrix<K>) {
    let slack: RealOf<K> = real(1.0 - 1e-9);
    for mut col in m.column_iter_mut() {
        let top = col
            .iter()
            .map(|x| x.modulus())
            .fold(RealOf::<K>::zero(), |a, b| if b > a { b } else { a });
        if top == RealOf::<K>::zero() {
            continue;
        }
        let pivot = *col.iter().find(|x| x.modulus() >= top * slack).unwrap();
        let phase = pivot.conjugate().unscale(pivot.modulus());
        col *= phase;
    }
}

/// Orthonormal basis (as columns) of the column space, keeping singular
/// directions above `rtol` times the largest singular value.
pub fn orthonormal_range<K: Scalar>(m: &DMatrix<K>, rtol: RealOf<K>) -> DMatrix<K> {
    let rows = m.nrows();
    if m.is_empty() {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s = svd.singular_values;
    let top = s.iter().copied().fold(RealOf::<K>::zero(), |a, b| if b > a { b } else { a });
    let mut keep: Vec<usize> = (0..s.len())
        .filter(|&i| top > RealOf::<K>::zero() && s[i] > rtol * top)
        .collect();
    keep.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut basis = u.select_columns(keep.iter());
    fix_phases(&mut basis);
    basis
}

/// Orthonormal basis of the row space, returned as columns (conjugated rows).
pub fn orthonormal_corange<K: Scalar>(m: &DMatrix<K>, rtol: RealOf<K>) -> DMatrix<K> {
    orthonormal_range(&m.adjoint(), rtol)
}

/// Symmetrized decomposition. The implicit QR iteration can stall on exact
/// zero eigenvalues; the retry shifts the spectrum into `[b, 3b]`.
fn symmetric_eigen<K: Scalar>(m: &DMatrix<K>) -> SymmetricEigen<K, Dyn> {
    let n = m.nrows();
    let sym = (m + m.adjoint()).unscale(real(2.0));
    let eps = <RealOf<K> as Real>::epsilon();
    if let Some(e) = SymmetricEigen::try_new(sym.clone(), eps, 64 * n.max(8)) {
        return e;
    }
    let bound = sym
        .row_iter()
        .map(|r| r.iter().fold(RealOf::<K>::zero(), |a, x| a + x.modulus()))
        .fold(RealOf::<K>::zero(), |a, b| if b > a { b } else { a });
    let shift = bound + bound + RealOf::<K>::one();
    let mut shifted = sym;
    for i in 0..n {
        shifted[(i, i)] += K::from_real(shift);
    }
    let mut e = SymmetricEigen::try_new(shifted, eps, 0).expect("unbounded iteration returns");
    e.eigenvalues.iter_mut().for_each(|x| *x -= shift);
    e
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen<K: Scalar>(m: &DMatrix<K>) -> (Vec<RealOf<K>>, DMatrix<K>) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], DMatrix::zeros(0, 0));
    }
    let eig = symmetric_eigen(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues<K: Scalar>(m: &DMatrix<K>) -> Vec<RealOf<K>> {
    if m.nrows() == 0 {
        return vec![];
    }
    let mut v: Vec<RealOf<K>> = symmetric_eigen(m).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Orthonormal eigenvectors of a Hermitian matrix with eigenvalue `≤ tol`.
pub fn low_eigenspace<K: Scalar>(m: &DMatrix<K>, tol: RealOf<K>) -> DMatrix<K> {
    let (values, vectors) = hermitian_eigen(m);
    let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] <= tol).collect();
    vectors.select_columns(keep.iter())
}

/// Kronecker product with the first factor most significant.
pub fn kron<K: Scalar>(a: &DMatrix<K>, b: &DMatrix<K>) -> DMatrix<K> {
    a.kronecker(b)
}

pub fn identity<K: Scalar>(n: usize) -> DMatrix<K> {
    DMatrix::identity(n, n)
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff<K: Scalar>(a: &DMatrix<K>, b: &DMatrix<K>) -> RealOf<K> {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y).modulus())
        .fold(RealOf::<K>::zero(), |m, x| if x > m { x } else { m })
}

/// Spectral norm.
pub fn spectral_norm<K: Scalar>(m: &DMatrix<K>) -> RealOf<K> {
    singular_values(m).first().copied().unwrap_or_else(RealOf::<K>::zero)
}

/// Appends to `basis` the orthonormal directions of `block` not yet spanned.
///
/// The block is orthogonalized against the basis twice, then its remaining
/// singular directions above `rtol * scale` are kept. Returns the number of
/// columns added.
pub fn extend_basis<K: Scalar>(
    basis: &mut DMatrix<K>,
    block: &DMatrix<K>,
    rtol: RealOf<K>,
    scale: RealOf<K>,
) -> usize {
    assert_eq!(basis.nrows(), block.nrows());
    let mut residual = block.clone();
    for _ in 0..2 {
        if basis.ncols() > 0 {
            let coeffs = basis.adjoint() * &residual;
            residual -= &*basis * coeffs;
        }
    }
    let svd = residual.svd(true, false);
    let u = svd.u.unwrap();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rtol * scale)
        .collect();
    if keep.is_empty() {
        return 0;
    }
    let mut fresh = u.select_columns(keep.iter());
    // One more pass keeps the enlarged basis orthonormal to working precision.
    if basis.ncols() > 0 {
        let coeffs = basis.adjoint() * &fresh;
        fresh -= &*basis * coeffs;
        for mut c in fresh.column_iter_mut() {
            let n = c.norm();
            c.unscale_mut(n);
        }
    }
    let old = basis.ncols();
    let mut grown = DMatrix::zeros(basis.nrows(), old + keep.len());
    grown.columns_mut(0, old).copy_from(basis);
    grown.columns_mut(old, keep.len()).copy_from(&fresh);
    *basis = grown;
    keep.len()
}

/// Splits a Gibbs-factor matrix `m` as `φ_left · φ_right`.
///
/// Symmetric real matrices use their eigendecomposition, so that
/// `φ_right = φ_leftᵀ`; a negative eigenvalue contributes a factor `i` to both
/// sides, which requires a complex scalar. Other matrices use the singular
/// value decomposition. Only the `target_rank` leading directions are kept, and
/// dropping a direction above `rtol` of the leading one is an error.
pub fn factor_symmetric<K: Scalar>(
    m: &DMatrix<K>,
    target_rank: usize,
    rtol: RealOf<K>,
) -> Result<(DMatrix<K>, DMatrix<K>)> {
    let d = m.nrows();
    if m.ncols() != d || d == 0 {
        return Err(Error::mismatch("factor_symmetric needs a nonempty square matrix"));
    }
    if target_rank > d || target_rank == 0 {
        return Err(Error::invalid(format!(
            "target rank {target_rank} must lie in 1..={d}"
        )));
    }
    let zero = RealOf::<K>::zero();
    let is_real_symmetric = m.iter().all(|x| x.imaginary() == zero)
        && max_abs_diff(m, &m.transpose()) == zero;
    if is_real_symmetric {
        let (values, vectors) = hermitian_eigen(m);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            values[b]
                .abs()
                .partial_cmp(&values[a].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        check_truncation(order.iter().map(|&i| values[i].abs()), target_rank, rtol)?;
        let mut v = vectors.select_columns(order[..target_rank].iter());
        fix_phases(&mut v);
        let mut left = v.clone();
        for (k, &i) in order[..target_rank].iter().enumerate() {
            let lambda = values[i];
            let root = if lambda >= zero {
                K::from_real(lambda.sqrt())
            } else if K::IS_COMPLEX {
                K::from_parts(zero, (-lambda).sqrt())
            } else {
                return Err(Error::invalid(
                    "Gibbs factor has a negative eigenvalue; use a complex scalar type",
                ));
            };
            left.column_mut(k).scale_mut_by(root);
        }
        let right = left.transpose();
        return Ok((left, right));
    }
    let svd = m.clone().svd(true, true);
    let (u, vt, s) = (svd.u.unwrap(), svd.v_t.unwrap(), svd.singular_values);
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    check_truncation(order.iter().map(|&i| s[i]), target_rank, rtol)?;
    let mut left = u.select_columns(order[..target_rank].iter());
    let mut right = vt.select_rows(order[..target_rank].iter());
    for (k, &i) in order[..target_rank].iter().enumerate() {
        let root = K::from_real(s[i].sqrt());
        left.column_mut(k).scale_mut_by(root);
        right.row_mut(k).scale_mut_by(root);
    }
    Ok((left, right))
}

fn check_truncation<R: crate::scalar::Real>(
    sorted: impl Iterator<Item = R>,
    keep: usize,
    rtol: R,
) -> Result<()> {
    let all: Vec<R> = sorted.collect();
    let top = all.first().copied().unwrap_or_else(R::zero);
    if let Some(&dropped) = all.get(keep) {
        if dropped > rtol * top {
            return Err(Error::invalid(format!(
                "target rank {keep} drops a direction of relative weight {:e}",
                crate::scalar::to_f64(dropped / top)
            )));
        }
    }
    Ok(())
}

trait ScaleBy<K> {
    fn scale_mut_by(&mut self, k: K);
}

impl<K: Scalar, R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::StorageMut<K, R, C>> ScaleBy<K>
    for nalgebra::Matrix<K, R, C, S>
{
    fn scale_mut_by(&mut self, k: K) {
        for x in self.iter_mut() {
            *x *= k;
        }
    }
}

/// Normalizes a vector; returns `None` for the zero vector.
pub fn normalized<K: Scalar>(v: &DVector<K>) -> Option<DVector<K>> {
    let n = v.norm();
    (n > RealOf::<K>::zero()).then(|| v.unscale(n))
}

/// `|⟨a|b⟩| / (‖a‖‖b‖)`.
pub fn overlap<K: Scalar>(a: &DVector<K>, b: &DVector<K>) -> RealOf<K> {
    let (na, nb) = (a.norm(), b.norm());
    if na == RealOf::<K>::zero() || nb == RealOf::<K>::zero() {
        return RealOf::<K>::zero();
    }
    a.dotc(b).modulus() / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Complex64;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| C::gaussian(&mut rng))
    }

    #[test]
    fn rank_basics() {
        assert_eq!(rank(&DMatrix::<f64>::identity(5, 5), 1e-10), 5);
        assert_eq!(rank(&DMatrix::<f64>::zeros(4, 3), 1e-10), 0);
        let beta: f64 = 1.0;
        let (s, c) = ((beta / 2.0).sinh().sqrt(), (beta / 2.0).cosh().sqrt());
        let phi = DMatrix::from_row_slice(2, 2, &[s, c, -s, c]);
        assert_eq!(rank(&phi, 1e-10), 2);
        let low = random(6, 2, 1) * random(2, 7, 2);
        assert_eq!(rank(&low, 1e-10), 2);
        assert_eq!(rank(&low.transpose(), 1e-10), 2);
        assert_eq!(rank(&low.adjoint(), 1e-10), 2);
    }

    #[test]
    fn range_of_identity_and_outer_product() {
        let id = orthonormal_range(&DMatrix::<C>::identity(3, 3), 1e-10);
        assert!(max_abs_diff(&(&id * id.adjoint()), &DMatrix::identity(3, 3)) < 1e-14);
        let u = random(4, 1, 3);
        let v = random(5, 1, 4);
        let r = orthonormal_range(&(&u * v.adjoint()), 1e-10);
        assert_eq!(r.ncols(), 1);
        assert!((overlap(&r.column(0).into_owned(), &u.column(0).into_owned()) - 1.0).abs() < 1e-12);
        let top = r.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(r.iter().any(|x| (x.re - top).abs() < 1e-15 && x.im == 0.0));
    }

    #[test]
    fn eigen_sorted() {
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let back = &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)) * vecs.transpose();
        assert!(max_abs_diff(&back, &m) < 1e-14);
    }

    #[test]
    fn factor_identity_and_gibbs() {
        let (l, r) = factor_symmetric(&DMatrix::<f64>::identity(2, 2), 2, 1e-10).unwrap();
        assert!(max_abs_diff(&l, &DMatrix::identity(2, 2)) < 1e-14);
        assert!(max_abs_diff(&r, &DMatrix::identity(2, 2)) < 1e-14);
        let b: f64 = 0.5;
        let g = DMatrix::from_row_slice(2, 2, &[b.exp(), (-b).exp(), (-b).exp(), b.exp()]);
        let (l, r) = factor_symmetric(&g, 2, 1e-10).unwrap();
        assert!(max_abs_diff(&(l * r), &g) < 1e-12);
    }

    #[test]
    fn factor_indefinite_needs_complex() {
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(factor_symmetric(&m, 2, 1e-10).is_err());
        let mc = m.map(|x| C::new(x, 0.0));
        let (l, r) = factor_symmetric(&mc, 2, 1e-10).unwrap();
        assert!(max_abs_diff(&(&l * &r), &mc) < 1e-12);
        assert!(max_abs_diff(&r, &l.transpose()) < 1e-15);
    }

    #[test]
    fn factor_lossy_is_flagged() {
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(factor_symmetric(&m, 1, 1e-10).is_err());
        let rank_one = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (l, r) = factor_symmetric(&rank_one, 1, 1e-10).unwrap();
        assert!(max_abs_diff(&(l * r), &rank_one) < 1e-14);
        let skew = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 2.0, 0.5, 1.0]);
        let (l, r) = factor_symmetric(&skew, 2, 1e-10).unwrap();
        assert!(max_abs_diff(&(l * r), &skew) < 1e-13);
    }

    #[test]
    fn extend_basis_grows_to_rank() {
        let target = random(30, 5, 9) * random(5, 40, 10);
        let mut basis = DMatrix::<C>::zeros(30, 0);
        let mut added = 0;
        for k in 0..8 {
            added += extend_basis(&mut basis, &target.columns(5 * k, 5).into_owned(), 1e-10, 1.0);
        }
        assert_eq!(added, 5);
        assert!(max_abs_diff(&(basis.adjoint() * &basis), &DMatrix::identity(5, 5)) < 1e-12);
    }
}
