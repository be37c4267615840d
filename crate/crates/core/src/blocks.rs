//! Block decomposition of operators that act diagonally on most sites.
//!
//! Sites are split into *active* sites and *spectators*. An operator that
//! is diagonal on every spectator is a direct sum over spectator
//! configurations `σ` of blocks on the active sites; the block for `σ` is
//! indexed by the active configuration, first active site most significant.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, max_abs_diff};
use crate::operator::LocalOperator;
use crate::scalar::{real, to_f64, Scalar};
use crate::subspace::{embed_operator, Subspace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    num_sites: usize,
    d: usize,
    active: Vec<usize>,
    spectators: Vec<usize>,
}

impl BlockLayout {
    pub fn new(num_sites: usize, d: usize, active: &[usize]) -> Result<Self> {
        let mut active = active.to_vec();
        active.sort_unstable();
        active.dedup();
        if active.iter().any(|&s| s >= num_sites) {
            return Err(Error::invalid("active site out of range"));
        }
        let spectators = (0..num_sites).filter(|s| active.binary_search(s).is_err()).collect();
        Ok(BlockLayout {
            num_sites,
            d,
            active,
            spectators,
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn spectators(&self) -> &[usize] {
        &self.spectators
    }

    pub fn num_blocks(&self) -> usize {
        self.d.pow(self.spectators.len() as u32)
    }

    pub fn block_dim(&self) -> usize {
        self.d.pow(self.active.len() as u32)
    }

    /// Value of every site under spectator configuration `sigma`
    /// (`None` on active sites).
    fn assignment(&self, sigma: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; self.num_sites];
        let mut rest = sigma;
        for &s in self.spectators.iter().rev() {
            out[s] = Some(rest % self.d);
            rest /= self.d;
        }
        out
    }

    /// Rows of a matrix indexed by the configurations of `sites` that agree
    /// with `sigma`, enumerated over the active sites among `sites`. Also
    /// returns the positions of those active sites within `self.active`.
    fn local_rows(&self, sites: &[usize], sigma: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let fixed = self.assignment(sigma);
        let local_active: Vec<usize> = sites.iter().copied().filter(|s| fixed[*s].is_none()).collect();
        let mut rows = Vec::with_capacity(self.d.pow(local_active.len() as u32));
        let count = self.d.pow(local_active.len() as u32);
        for a in 0..count {
            let mut values = vec![0usize; local_active.len()];
            let mut rest = a;
            for k in (0..local_active.len()).rev() {
                values[k] = rest % self.d;
                rest /= self.d;
            }
            let mut row = 0usize;
            for &s in sites {
                if s >= self.num_sites {
                    return Err(Error::invalid("site out of range"));
                }
                let x = match fixed[s] {
                    Some(x) => x,
                    None => values[local_active.iter().position(|&t| t == s).unwrap()],
                };
                row = row * self.d + x;
            }
            rows.push(row);
        }
        // Positions within the sorted active list; the local order follows `sites`.
        let positions = local_active
            .iter()
            .map(|s| self.active.binary_search(s).unwrap())
            .collect();
        Ok((rows, positions))
    }

    fn lift<K: Scalar>(&self, local: &DMatrix<K>, positions: &[usize]) -> Result<DMatrix<K>> {
        embed_operator(local, positions, &vec![self.d; self.active.len()])
    }

    /// Diagonal block `σ` of `op ⊗ 1`. Meaningful when `op` is diagonal on
    /// the spectators it touches (see [`BlockLayout::operator_leak`]).
    pub fn operator_block<K: Scalar>(&self, op: &LocalOperator<K>, sigma: usize) -> Result<DMatrix<K>> {
        let (rows, positions) = self.local_rows(&op.sites, sigma)?;
        let local = DMatrix::from_fn(rows.len(), rows.len(), |i, j| op.matrix[(rows[i], rows[j])]);
        self.lift(&local, &positions)
    }

    /// Largest entry of `op` that couples different values of a spectator.
    pub fn operator_leak<K: Scalar>(&self, op: &LocalOperator<K>) -> f64 {
        let n = op.sites.len();
        let spectator_slots: Vec<usize> = (0..n)
            .filter(|&k| self.active.binary_search(&op.sites[k]).is_err())
            .collect();
        let digits = |mut x: usize| {
            let mut v = vec![0usize; n];
            for k in (0..n).rev() {
                v[k] = x % self.d;
                x /= self.d;
            }
            v
        };
        let mut worst = 0.0f64;
        for r in 0..op.matrix.nrows() {
            let dr = digits(r);
            for c in 0..op.matrix.ncols() {
                let dc = digits(c);
                if spectator_slots.iter().any(|&k| dr[k] != dc[k]) {
                    worst = worst.max(to_f64(op.matrix[(r, c)].modulus()));
                }
            }
        }
        worst
    }

    /// Block `σ` of the projector onto `span(basis) ⊗ H_rest`, where the rows
    /// of `basis` are indexed by the configurations of `sites`.
    pub fn projector_block<K: Scalar>(&self, basis: &DMatrix<K>, sites: &[usize], sigma: usize) -> Result<DMatrix<K>> {
        let (rows, positions) = self.local_rows(sites, sigma)?;
        let u = basis.select_rows(rows.iter());
        self.lift(&(&u * u.adjoint()), &positions)
    }

    /// Largest `‖B_σ² − B_σ‖_max` over all blocks of the projector onto
    /// `span(basis)`: zero iff that projector is block diagonal.
    pub fn projector_leak<K: Scalar>(&self, basis: &DMatrix<K>, sites: &[usize]) -> Result<f64> {
        let mut worst = 0.0f64;
        for sigma in 0..self.num_blocks() {
            let b = self.projector_block(basis, sites, sigma)?;
            worst = worst.max(to_f64(max_abs_diff(&(&b * &b), &b)));
        }
        Ok(worst)
    }
}

/// Range of a Hermitian projector block (eigenvalues above ½).
pub fn block_range<K: Scalar>(p: &DMatrix<K>, tol: f64) -> Subspace<K> {
    let (values, vectors) = hermitian_eigen(p);
    let keep: Vec<usize> = (0..values.len()).filter(|&i| to_f64(values[i]) > 0.5).collect();
    Subspace::from_orthonormal(vectors.select_columns(keep.iter()), real(tol))
}
