//! Subspaces of tensor-product spaces.

use num_traits::{One, Zero};
use nalgebra::ComplexField;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{extend_basis, fix_phases, hermitian_eigen, low_eigenspace, orthonormal_range};
use crate::scalar::{real, Real, RealOf, Scalar};
use crate::tensor::DenseTensor;

/// A subspace stored by an orthonormal basis of columns.
#[derive(Clone, Debug)]
pub struct Subspace<K: Scalar> {
    basis: DMatrix<K>,
    tol: RealOf<K>,
}

impl<K: Scalar> Subspace<K> {
    /// Wraps a basis that the caller guarantees to be orthonormal.
    pub fn from_orthonormal(basis: DMatrix<K>, tol: RealOf<K>) -> Self {
        Subspace { basis, tol }
    }

    /// Checked version of [`Subspace::from_orthonormal`].
    pub fn new(basis: DMatrix<K>, tol: RealOf<K>) -> Result<Self> {
        let gram = basis.adjoint() * &basis;
        let off = crate::linalg::max_abs_diff(&gram, &DMatrix::identity(basis.ncols(), basis.ncols()));
        if off > real(1e-10) {
            return Err(Error::invalid(format!(
                "basis is not orthonormal (Gram deviation {:e})",
                crate::scalar::to_f64(off)
            )));
        }
        Ok(Subspace { basis, tol })
    }

    /// Column space of `m` at relative tolerance `rtol`.
    pub fn range_of(m: &DMatrix<K>, rtol: RealOf<K>) -> Self {
        Subspace {
            basis: orthonormal_range(m, rtol),
            tol: rtol,
        }
    }

    pub fn full(n: usize) -> Self {
        Subspace {
            basis: DMatrix::identity(n, n),
            tol: K::RealField::default_rtol(),
        }
    }

    pub fn zero(n: usize) -> Self {
        Subspace {
            basis: DMatrix::zeros(n, 0),
            tol: K::RealField::default_rtol(),
        }
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<K> {
        &self.basis
    }

    pub fn into_basis(self) -> DMatrix<K> {
        self.basis
    }

    pub fn tol(&self) -> RealOf<K> {
        self.tol
    }

    pub fn projector(&self) -> DMatrix<K> {
        &self.basis * self.basis.adjoint()
    }

    /// `1 - P`.
    pub fn complement_projector(&self) -> DMatrix<K> {
        DMatrix::identity(self.ambient(), self.ambient()) - self.projector()
    }

    pub fn project(&self, v: &DVector<K>) -> DVector<K> {
        &self.basis * (self.basis.adjoint() * v)
    }

    /// `‖(1 - P) v‖ / ‖v‖`.
    pub fn relative_residual(&self, v: &DVector<K>) -> RealOf<K> {
        let n = v.norm();
        if n == RealOf::<K>::zero() {
            return n;
        }
        (v - self.project(v)).norm() / n
    }

    fn check_ambient(&self, other: &Self) -> Result<()> {
        if self.ambient() != other.ambient() {
            return Err(Error::mismatch(format!(
                "subspaces live in spaces of dimension {} and {}",
                self.ambient(),
                other.ambient()
            )));
        }
        Ok(())
    }

    /// `‖(1 - P_self) U_other‖`, the sine of the largest angle by which
    /// `other` leaves `self`; zero iff `other ⊆ self`.
    pub fn excess(&self, other: &Self) -> Result<RealOf<K>> {
        self.check_ambient(other)?;
        if other.dim() == 0 {
            return Ok(RealOf::<K>::zero());
        }
        let w = self.basis.adjoint() * &other.basis;
        let r = &other.basis - &self.basis * w;
        let gram = r.adjoint() * &r;
        let top = crate::linalg::hermitian_eigenvalues(&gram)
            .last()
            .copied()
            .unwrap_or_else(RealOf::<K>::zero);
        Ok(if top > RealOf::<K>::zero() { top.sqrt() } else { RealOf::<K>::zero() })
    }

    /// Spectral-norm distance of the two projectors: 1 when the dimensions
    /// differ, otherwise the sine of the largest principal angle.
    pub fn distance(&self, other: &Self) -> Result<RealOf<K>> {
        self.check_ambient(other)?;
        if self.dim() != other.dim() {
            return Ok(RealOf::<K>::one());
        }
        self.excess(other)
    }

    /// Whether `self ⊆ other` up to `tol` in [`Subspace::excess`].
    pub fn is_within(&self, other: &Self, tol: RealOf<K>) -> Result<bool> {
        Ok(other.excess(self)? <= tol)
    }

    /// Intersection: the vectors of `self` whose component outside `other`
    /// vanishes, i.e. the kernel of the compression of `1 - P_other` onto
    /// `self`, thresholded at `tol`.
    pub fn intersection(&self, other: &Self, tol: RealOf<K>) -> Result<Self> {
        self.check_ambient(other)?;
        let (small, large) = if self.dim() <= other.dim() {
            (self, other)
        } else {
            (other, self)
        };
        if small.dim() == 0 {
            return Ok(Subspace::zero(self.ambient()));
        }
        let w = large.basis.adjoint() * &small.basis;
        let r = &small.basis - &large.basis * w;
        let gram = r.adjoint() * &r;
        let coeffs = low_eigenspace(&gram, tol);
        let mut basis = &small.basis * coeffs;
        reorthonormalize(&mut basis);
        fix_phases(&mut basis);
        Ok(Subspace { basis, tol })
    }

    /// Orthogonal complement.
    pub fn complement(&self) -> Self {
        let n = self.ambient();
        let p = self.complement_projector();
        let (values, vectors) = hermitian_eigen(&p);
        let half: RealOf<K> = real(0.5);
        let keep: Vec<usize> = (0..n).filter(|&i| values[i] > half).collect();
        let mut basis = vectors.select_columns(keep.iter());
        fix_phases(&mut basis);
        Subspace {
            basis,
            tol: self.tol,
        }
    }

    /// Image under a linear map, at relative tolerance `rtol`.
    pub fn image(&self, map: &DMatrix<K>, rtol: RealOf<K>) -> Result<Self> {
        if map.ncols() != self.ambient() {
            return Err(Error::mismatch("map and subspace dimensions differ"));
        }
        Ok(Subspace::range_of(&(map * &self.basis), rtol))
    }

    /// `self ⊗ H_rest` inside the space of `dims.len()` sites, where `self`
    /// lives on `sites` (in that order).
    pub fn embed(&self, sites: &[usize], dims: &[usize]) -> Result<Self> {
        Ok(Subspace {
            basis: embed_columns(&self.basis, sites, dims)?,
            tol: self.tol,
        })
    }

    /// Adds the span of `block`'s columns; returns how many directions were new.
    pub fn extend(&mut self, block: &DMatrix<K>, rtol: RealOf<K>, scale: RealOf<K>) -> usize {
        extend_basis(&mut self.basis, block, rtol, scale)
    }
}

fn reorthonormalize<K: Scalar>(basis: &mut DMatrix<K>) {
    if basis.ncols() == 0 {
        return;
    }
    let qr = basis.clone().qr();
    *basis = qr.q().columns(0, basis.ncols()).into_owned();
}

fn split_sites(sites: &[usize], dims: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; dims.len()];
    for &s in sites {
        if s >= dims.len() || std::mem::replace(&mut seen[s], true) {
            return Err(Error::invalid(format!("site list {sites:?} is invalid")));
        }
    }
    Ok((0..dims.len()).filter(|&s| !seen[s]).collect())
}

/// Column space embedding: for `m` with rows indexed by the sites `sites` (in
/// that order), returns the matrix whose columns span `range(m) ⊗ H_rest` in
/// the space of all sites ordered `0..dims.len()`.
pub fn embed_columns<K: Scalar>(m: &DMatrix<K>, sites: &[usize], dims: &[usize]) -> Result<DMatrix<K>> {
    let rest = split_sites(sites, dims)?;
    let local_dims: Vec<usize> = sites.iter().map(|&s| dims[s]).collect();
    let rest_dims: Vec<usize> = rest.iter().map(|&s| dims[s]).collect();
    if m.nrows() != local_dims.iter().product::<usize>() {
        return Err(Error::mismatch("matrix rows differ from the local space dimension"));
    }
    let rest_size: usize = rest_dims.iter().product();
    let a = DenseTensor::from_matrix(m, &local_dims, &[m.ncols()])?;
    let b = DenseTensor::from_matrix(&DMatrix::<K>::identity(rest_size, rest_size), &rest_dims, &[rest_size])?;
    let t = a.outer(&b);
    let k = sites.len();
    let mut perm = Vec::with_capacity(dims.len() + 2);
    for s in 0..dims.len() {
        perm.push(match sites.iter().position(|&x| x == s) {
            Some(p) => p,
            None => k + 1 + rest.iter().position(|&x| x == s).unwrap(),
        });
    }
    perm.push(k);
    perm.push(k + 1 + rest.len());
    let total: usize = dims.iter().product();
    let p = t.permute(&perm)?;
    Ok(DMatrix::from_row_slice(total, m.ncols() * rest_size, p.data()))
}

/// `op ⊗ 1_rest` for an operator acting on `sites`, as a dense matrix over all
/// sites ordered `0..dims.len()`.
pub fn embed_operator<K: Scalar>(op: &DMatrix<K>, sites: &[usize], dims: &[usize]) -> Result<DMatrix<K>> {
    let rest = split_sites(sites, dims)?;
    let local_dims: Vec<usize> = sites.iter().map(|&s| dims[s]).collect();
    let rest_dims: Vec<usize> = rest.iter().map(|&s| dims[s]).collect();
    let local: usize = local_dims.iter().product();
    if op.nrows() != local || op.ncols() != local {
        return Err(Error::mismatch("operator size differs from the local space dimension"));
    }
    let rest_size: usize = rest_dims.iter().product();
    let a = DenseTensor::from_matrix(op, &local_dims, &local_dims)?;
    let b = DenseTensor::from_matrix(&DMatrix::<K>::identity(rest_size, rest_size), &rest_dims, &rest_dims)?;
    let t = a.outer(&b);
    let (k, r) = (sites.len(), rest.len());
    let locate = |s: usize, out: bool| match sites.iter().position(|&x| x == s) {
        Some(p) => if out { p } else { k + p },
        None => {
            let q = rest.iter().position(|&x| x == s).unwrap();
            2 * k + if out { q } else { r + q }
        }
    };
    let mut perm: Vec<usize> = (0..dims.len()).map(|s| locate(s, true)).collect();
    perm.extend((0..dims.len()).map(|s| locate(s, false)));
    let total: usize = dims.iter().product();
    let p = t.permute(&perm)?;
    Ok(DMatrix::from_row_slice(total, total, p.data()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Complex64;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| C::gaussian(&mut rng))
    }

    #[test]
    fn projector_is_idempotent() {
        let s = Subspace::range_of(&random(12, 5, 1), 1e-10);
        let p = s.projector();
        assert!(max_abs_diff(&(&p * &p), &p) < 1e-12);
        assert!(max_abs_diff(&p.adjoint(), &p) < 1e-12);
    }

    #[test]
    fn intersection_of_planes() {
        let shared = random(10, 2, 2);
        let a = Subspace::range_of(&DMatrix::from_columns(&[shared.column(0), shared.column(1), random(10, 1, 3).column(0)]), 1e-10);
        let b = Subspace::range_of(&DMatrix::from_columns(&[shared.column(0), shared.column(1), random(10, 1, 4).column(0), random(10, 1, 5).column(0)]), 1e-10);
        let i = a.intersection(&b, 1e-10).unwrap();
        assert_eq!(i.dim(), 2);
        let expected = Subspace::range_of(&shared, 1e-10);
        assert!(i.distance(&expected).unwrap() < 1e-10);
        assert!(i.is_within(&a, 1e-10).unwrap() && i.is_within(&b, 1e-10).unwrap());
        assert_eq!(a.distance(&b).unwrap(), 1.0);
    }

    #[test]
    fn complement_dimension() {
        let s = Subspace::range_of(&random(8, 3, 6), 1e-10);
        let c = s.complement();
        assert_eq!(c.dim(), 5);
        assert!(max_abs_diff(&(s.projector() + c.projector()), &DMatrix::identity(8, 8)) < 1e-12);
    }

    #[test]
    fn embedding_matches_kronecker() {
        let op = random(2, 2, 7);
        let dims = [2, 3, 2];
        let e = embed_operator(&op, &[0], &dims).unwrap();
        assert!(max_abs_diff(&e, &op.kronecker(&DMatrix::identity(6, 6))) < 1e-15);
        let e = embed_operator(&op, &[2], &dims).unwrap();
        assert!(max_abs_diff(&e, &DMatrix::<C>::identity(6, 6).kronecker(&op)) < 1e-15);
        let two = random(4, 4, 8);
        let swapped = embed_operator(&two, &[2, 0], &[2, 2, 2]).unwrap();
        let swap = DMatrix::<C>::from_fn(4, 4, |r, c| if (r >> 1) == (c & 1) && (r & 1) == (c >> 1) { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) });
        let direct = embed_operator(&(&swap * &two * &swap), &[0, 2], &[2, 2, 2]).unwrap();
        assert!(max_abs_diff(&swapped, &direct) < 1e-14);
        let cols = embed_columns(&random(2, 1, 9), &[1], &[2, 2]).unwrap();
        assert_eq!(cols.shape(), (4, 2));
    }
}
