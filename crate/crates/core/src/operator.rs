//! Sums of operators acting on few sites of a tensor-product space, applied
//! without forming the full matrix.

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;

use crate::eigen::HermitianOperator;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::scalar::{RealOf, Scalar};
use crate::subspace::embed_operator;

/// A matrix acting on the listed sites (first site most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator<K: Scalar> {
    pub sites: Vec<usize>,
    pub matrix: DMatrix<K>,
}

/// `Σ_t op_t ⊗ 1` on sites with local dimensions `dims` (site 0 most significant).
#[derive(Clone, Debug)]
pub struct OperatorSum<K: Scalar> {
    dims: Vec<usize>,
    terms: Vec<LocalOperator<K>>,
    norm_bound: RealOf<K>,
}

impl<K: Scalar> OperatorSum<K> {
    pub fn new(dims: Vec<usize>, terms: Vec<LocalOperator<K>>, cap: u128) -> Result<Self> {
        let total = dims
            .iter()
            .try_fold(1u128, |acc, &d| acc.checked_mul(d as u128))
            .unwrap_or(u128::MAX);
        if total > cap {
            return Err(Error::cap("Hilbert space dimension", total, cap));
        }
        let mut norm_bound = RealOf::<K>::zero();
        for t in &terms {
            let mut seen = vec![false; dims.len()];
            for &s in &t.sites {
                if s >= dims.len() || std::mem::replace(&mut seen[s], true) {
                    return Err(Error::invalid(format!("bad site list {:?}", t.sites)));
                }
            }
            let local: usize = t.sites.iter().map(|&s| dims[s]).product();
            if t.matrix.nrows() != local || t.matrix.ncols() != local {
                return Err(Error::mismatch(format!(
                    "term on {:?} is {}×{}, expected {local}",
                    t.sites,
                    t.matrix.nrows(),
                    t.matrix.ncols()
                )));
            }
            norm_bound += spectral_norm(&t.matrix);
        }
        Ok(OperatorSum {
            dims,
            terms,
            norm_bound,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn terms(&self) -> &[LocalOperator<K>] {
        &self.terms
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    /// Adds `op_t x` to `out` for the single term `t`.
    pub fn apply_term_into(&self, t: usize, x: &DVector<K>, out: &mut DVector<K>) {
        let term = &self.terms[t];
        let strides = self.strides();
        let local = offsets(&term.sites, &self.dims, &strides);
        let rest_sites: Vec<usize> = (0..self.dims.len()).filter(|s| !term.sites.contains(s)).collect();
        let rest = offsets(&rest_sites, &self.dims, &strides);
        let gathered = DMatrix::from_fn(local.len(), rest.len(), |a, r| x[local[a] + rest[r]]);
        let y = &term.matrix * gathered;
        for (r, &ro) in rest.iter().enumerate() {
            for (a, &lo) in local.iter().enumerate() {
                out[lo + ro] += y[(a, r)];
            }
        }
    }

    /// `⟨x|op_t|x⟩`.
    pub fn term_expectation(&self, t: usize, x: &DVector<K>) -> K {
        let mut y = DVector::zeros(x.len());
        self.apply_term_into(t, x, &mut y);
        x.dotc(&y)
    }

    /// Dense matrix; the caller is responsible for the size.
    pub fn dense(&self) -> Result<DMatrix<K>> {
        let n: usize = self.dims.iter().product();
        let mut m = DMatrix::zeros(n, n);
        for t in &self.terms {
            m += embed_operator(&t.matrix, &t.sites, &self.dims)?;
        }
        Ok(m)
    }
}

/// Flat offsets of all configurations of `sites`, first site most significant.
fn offsets(sites: &[usize], dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &s in sites {
        let mut next = Vec::with_capacity(out.len() * dims[s]);
        for &o in &out {
            for i in 0..dims[s] {
                next.push(o + i * strides[s]);
            }
        }
        out = next;
    }
    out
}

impl<K: Scalar> HermitianOperator<K> for OperatorSum<K> {
    fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn apply(&self, x: &DVector<K>) -> DVector<K> {
        let mut out = DVector::zeros(x.len());
        for t in 0..self.terms.len() {
            self.apply_term_into(t, x, &mut out);
        }
        out
    }

    fn norm_bound(&self) -> RealOf<K> {
        self.norm_bound
    }

    fn to_dense(&self) -> DMatrix<K> {
        self.dense().expect("terms validated on construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matrix_free_matches_dense_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dims = vec![2, 3, 2, 2];
        let mk = |sites: Vec<usize>, rng: &mut ChaCha8Rng| {
            let n: usize = sites.iter().map(|&s| dims[s]).product();
            let a = DMatrix::from_fn(n, n, |_, _| Complex64::gaussian(rng));
            LocalOperator {
                sites,
                matrix: &a + a.adjoint(),
            }
        };
        let terms = vec![mk(vec![2, 0], &mut rng), mk(vec![1, 3], &mut rng), mk(vec![3], &mut rng)];
        let h = OperatorSum::new(dims, terms, 1 << 20).unwrap();
        let dense = h.dense().unwrap();
        let x = DVector::from_fn(24, |_, _| Complex64::gaussian(&mut rng));
        let y = h.apply(&x);
        let diff = (&dense * &x - y).norm();
        assert!(diff < 1e-12);
        assert!(max_abs_diff(&dense, &dense.adjoint()) < 1e-12);
    }

    #[test]
    fn rejects_repeated_sites_and_caps() {
        let t = LocalOperator {
            sites: vec![0, 0],
            matrix: DMatrix::<f64>::identity(4, 4),
        };
        assert!(OperatorSum::new(vec![2, 2], vec![t], 1 << 10).is_err());
        assert!(OperatorSum::<f64>::new(vec![2; 12], vec![], 1 << 10).is_err());
    }
}
