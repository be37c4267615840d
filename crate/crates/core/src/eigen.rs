//! Lowest eigenpairs of Hermitian operators: dense decomposition for small
//! dimensions, restarted Lanczos with locking above.

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::scalar::{real, to_f64, RealOf, Scalar};

/// A Hermitian linear map given by its action.
pub trait HermitianOperator<K: Scalar> {
    fn dim(&self) -> usize;

    /// `out = H x`.
    fn apply(&self, x: &DVector<K>) -> DVector<K>;

    /// Any upper bound on `‖H‖`.
    fn norm_bound(&self) -> RealOf<K>;

    fn to_dense(&self) -> DMatrix<K> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = K::one();
            m.set_column(j, &self.apply(&e));
        }
        m
    }
}

/// A dense Hermitian matrix as an operator.
pub struct DenseOperator<K: Scalar>(pub DMatrix<K>);

impl<K: Scalar> HermitianOperator<K> for DenseOperator<K> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &DVector<K>) -> DVector<K> {
        &self.0 * x
    }

    fn norm_bound(&self) -> RealOf<K> {
        self.0.norm()
    }

    fn to_dense(&self) -> DMatrix<K> {
        self.0.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenSettings {
    /// Dimensions up to this use the dense decomposition.
    pub dense_max: usize,
    /// Hard limit for the dense path.
    pub dense_cap: usize,
    /// Hard limit for the iterative path.
    pub iterative_cap: usize,
    /// Residual target relative to the norm bound.
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings {
            dense_max: 1024,
            dense_cap: 1 << 14,
            iterative_cap: 1 << 20,
            tol: 1e-10,
            krylov_dim: 64,
            max_restarts: 400,
            seed: 0xe16e,
        }
    }
}

/// Lowest eigenpairs in ascending order.
#[derive(Clone, Debug)]
pub struct Eigenpairs<K: Scalar> {
    pub values: Vec<RealOf<K>>,
    /// One column per eigenvalue.
    pub vectors: DMatrix<K>,
    /// Largest `‖Hv − λv‖`.
    pub max_residual: f64,
    pub dense: bool,
}

/// The `k` lowest eigenpairs of `h`.
pub fn lowest_eigenpairs<K: Scalar, H: HermitianOperator<K> + ?Sized>(
    h: &H,
    k: usize,
    settings: &EigenSettings,
) -> Result<Eigenpairs<K>> {
    let n = h.dim();
    let k = k.min(n);
    if n <= settings.dense_max {
        return dense_lowest(h, k, settings);
    }
    if n > settings.iterative_cap {
        return Err(Error::cap("operator dimension", n as u128, settings.iterative_cap as u128));
    }
    lanczos_lowest(h, k, settings)
}

/// Dense path regardless of `dense_max`, still bounded by `dense_cap`.
pub fn dense_lowest<K: Scalar, H: HermitianOperator<K> + ?Sized>(
    h: &H,
    k: usize,
    settings: &EigenSettings,
) -> Result<Eigenpairs<K>> {
    let n = h.dim();
    if n > settings.dense_cap {
        return Err(Error::cap("dense operator dimension", n as u128, settings.dense_cap as u128));
    }
    let k = k.min(n);
    let m = h.to_dense();
    let (values, vectors) = hermitian_eigen(&m);
    let vectors = vectors.columns(0, k).into_owned();
    let values: Vec<RealOf<K>> = values[..k].to_vec();
    let max_residual = residual(h, &values, &vectors);
    Ok(Eigenpairs {
        values,
        vectors,
        max_residual,
        dense: true,
    })
}

fn residual<K: Scalar, H: HermitianOperator<K> + ?Sized>(
    h: &H,
    values: &[RealOf<K>],
    vectors: &DMatrix<K>,
) -> f64 {
    let mut worst = 0.0f64;
    for (i, &l) in values.iter().enumerate() {
        let v = vectors.column(i).into_owned();
        let r = h.apply(&v) - v.scale(l);
        worst = worst.max(to_f64(r.norm()));
    }
    worst
}

/// Orthogonalizes `w` against the columns of `basis` (twice).
fn orthogonalize<K: Scalar>(w: &mut DVector<K>, basis: &[DVector<K>]) {
    for _ in 0..2 {
        for b in basis {
            let c = b.dotc(w);
            w.axpy(-c, b, K::one());
        }
    }
}

fn random_unit<K: Scalar>(n: usize, rng: &mut ChaCha8Rng, locked: &[DVector<K>]) -> DVector<K> {
    loop {
        let mut v = DVector::from_fn(n, |_, _| K::gaussian(rng));
        orthogonalize(&mut v, locked);
        let norm = v.norm();
        if norm > real(1e-3) {
            return v.unscale(norm);
        }
    }
}

/// Iterative path: one eigenpair at a time by thick-restart Lanczos inside
/// the orthogonal complement of the pairs already found.
pub fn lanczos_lowest<K: Scalar, H: HermitianOperator<K> + ?Sized>(
    h: &H,
    k: usize,
    settings: &EigenSettings,
) -> Result<Eigenpairs<K>> {
    let n = h.dim();
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let scale = to_f64(h.norm_bound()).max(1e-300);
    let target = settings.tol * scale;
    let mut locked: Vec<DVector<K>> = Vec::new();
    let mut values: Vec<RealOf<K>> = Vec::new();
    let mut worst = 0.0f64;
    while locked.len() < k {
        let (l, v, r) = lowest_in_complement(h, &locked, &mut rng, settings, target)?;
        worst = worst.max(r);
        values.push(l);
        locked.push(v);
    }
    // Locking can leave pairs slightly out of order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut vectors = DMatrix::zeros(n, k);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &locked[i]);
    }
    let values = order.iter().map(|&i| values[i]).collect();
    Ok(Eigenpairs {
        values,
        vectors,
        max_residual: worst,
        dense: false,
    })
}

fn lowest_in_complement<K: Scalar, H: HermitianOperator<K> + ?Sized>(
    h: &H,
    locked: &[DVector<K>],
    rng: &mut ChaCha8Rng,
    settings: &EigenSettings,
    target: f64,
) -> Result<(RealOf<K>, DVector<K>, f64)> {
    let n = h.dim();
    let m = settings.krylov_dim.max(4).min(n - locked.len()).max(1);
    let keep = (m / 4).max(1);
    let project = |mut w: DVector<K>| {
        orthogonalize(&mut w, locked);
        w
    };
    let mut basis: Vec<DVector<K>> = vec![random_unit(n, rng, locked)];
    let mut images: Vec<DVector<K>> = Vec::new();
    let mut best = (RealOf::<K>::zero(), basis[0].clone(), f64::INFINITY);
    for _ in 0..settings.max_restarts.max(1) {
        while basis.len() <= m {
            let last = basis.len() - 1;
            if images.len() <= last {
                images.push(project(h.apply(&basis[last])));
            }
            if basis.len() == m {
                break;
            }
            let mut w = images[last].clone();
            let before = to_f64(w.norm());
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, locked);
            let norm = w.norm();
            // An invariant subspace was reached; continue from a fresh direction.
            let w = if to_f64(norm) > 1e-12 * before.max(1e-300) {
                w.unscale(norm)
            } else {
                let mut r = random_unit(n, rng, locked);
                orthogonalize(&mut r, &basis);
                let nr = r.norm();
                if to_f64(nr) < 1e-8 {
                    break;
                }
                r.unscale(nr)
            };
            basis.push(w);
        }
        while images.len() < basis.len() {
            let i = images.len();
            images.push(project(h.apply(&basis[i])));
        }
        let b = basis.len();
        let mut t = DMatrix::zeros(b, b);
        for i in 0..b {
            for j in 0..b {
                t[(i, j)] = basis[i].dotc(&images[j]);
            }
        }
        let (theta, s) = hermitian_eigen(&t);
        let combine = |vs: &[DVector<K>], c: usize| {
            let mut out = DVector::zeros(n);
            for (i, v) in vs.iter().enumerate() {
                out.axpy(s[(i, c)], v, K::one());
            }
            out
        };
        let y = combine(&basis, 0);
        let hy = combine(&images, 0);
        let r = to_f64((&hy - y.scale(theta[0])).norm());
        if r < best.2 {
            best = (theta[0], y.clone(), r);
        }
        if r <= target || b >= n - locked.len() {
            let norm = y.norm();
            return Ok((theta[0], y.unscale(norm), r));
        }
        // Thick restart: keep the lowest Ritz vectors and the newest residual direction.
        let mut next_basis = Vec::with_capacity(keep + 1);
        let mut next_images = Vec::with_capacity(keep + 1);
        for c in 0..keep.min(b) {
            next_basis.push(combine(&basis, c));
            next_images.push(combine(&images, c));
        }
        let mut f = &hy - y.scale(theta[0]);
        orthogonalize(&mut f, &next_basis);
        orthogonalize(&mut f, locked);
        let nf = f.norm();
        if to_f64(nf) > 1e-300 {
            next_basis.push(f.unscale(nf));
        }
        basis = next_basis;
        images = next_images;
    }
    Err(Error::NotConverged {
        residual: best.2,
    })
}

/// Eigenvalue formatting with 15 significant digits.
pub fn format_eigenvalue(x: f64) -> String {
    format!("{x:.14e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::Rng;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&a + a.adjoint()).scale(0.5)
    }

    #[test]
    fn zero_operator_has_zero_spectrum() {
        let h = DenseOperator(DMatrix::<f64>::zeros(6, 6));
        let e = lowest_eigenpairs(&h, 3, &EigenSettings::default()).unwrap();
        assert!(e.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rank_one_complement_spectrum() {
        let n = 8;
        let phi = DVector::from_fn(n, |i, _| (i + 1) as f64).normalize();
        let h = DMatrix::identity(n, n) - &phi * phi.transpose();
        let e = lowest_eigenpairs(&DenseOperator(h), 3, &EigenSettings::default()).unwrap();
        assert!(e.values[0].abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12 && (e.values[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense_with_degeneracy() {
        let n = 300;
        let mut m = random_hermitian(n, 5);
        // Force a doubly degenerate bottom.
        let (vals, vecs) = hermitian_eigen(&m);
        let shift = vals[1] - vals[0];
        let v0 = vecs.column(0).into_owned();
        m += (&v0 * v0.adjoint()).scale(shift);
        let settings = EigenSettings {
            dense_max: 0,
            ..EigenSettings::default()
        };
        let h = DenseOperator(m.clone());
        let it = lowest_eigenpairs(&h, 4, &settings).unwrap();
        let exact = crate::linalg::hermitian_eigenvalues(&m);
        for i in 0..4 {
            assert!((it.values[i] - exact[i]).abs() < 1e-8, "{i}: {} vs {}", it.values[i], exact[i]);
        }
        assert!((it.values[0] - it.values[1]).abs() < 1e-8);
        assert!(!it.dense);
    }

    #[test]
    fn iterative_cap_is_enforced() {
        let h = DenseOperator(DMatrix::<f64>::zeros(10, 10));
        let settings = EigenSettings {
            dense_max: 0,
            iterative_cap: 5,
            ..EigenSettings::default()
        };
        assert!(matches!(lowest_eigenpairs(&h, 1, &settings), Err(Error::CapExceeded { .. })));
    }
}
