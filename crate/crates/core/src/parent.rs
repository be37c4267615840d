//! Parent Hamiltonians: kernel projectors on unions of neighboring regions,
//! their sum, exact diagonalization and the ground-space identities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::eigen::{lowest_eigenpairs, EigenSettings, Eigenpairs, HermitianOperator};
use crate::error::{Error, Result};
use crate::injectivity::{check_injective, Covering};
use crate::lattice::{LatticeGraph, Region};
use crate::linalg::{hermitian_eigenvalues, max_abs_diff};
use crate::operator::{LocalOperator, OperatorSum};
use crate::peps::{Peps, Settings};
use crate::scalar::{real, to_f64, RealOf, Scalar};
use crate::subspace::Subspace;

/// `1 − P_{G_R}` on the sites of `R`.
#[derive(Clone, Debug)]
pub struct LocalTerm<K: Scalar> {
    pub region: Region,
    pub operator: DMatrix<K>,
    /// `G_R`, the kernel of the operator.
    pub kernel: Subspace<K>,
}

impl<K: Scalar> LocalTerm<K> {
    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.operator)
            .first()
            .map(|&x| to_f64(x))
            .unwrap_or(0.0)
    }

    /// `‖T² − T‖_max`.
    pub fn idempotency_error(&self) -> f64 {
        to_f64(max_abs_diff(&(&self.operator * &self.operator), &self.operator))
    }

    /// Projector distance between the numerical kernel and `G_R`.
    pub fn kernel_error(&self) -> Result<f64> {
        let n = self.operator.nrows();
        let eig = crate::linalg::low_eigenspace(&self.operator, real(0.5));
        let kernel = Subspace::from_orthonormal(eig, self.kernel.tol());
        debug_assert_eq!(kernel.ambient(), n);
        Ok(to_f64(kernel.distance(&self.kernel)?))
    }
}

/// The canonical term for region `r`: the projector onto `G_R^⊥`.
pub fn local_projector<K: Scalar>(p: &Peps<K>, r: &Region, settings: &Settings) -> Result<LocalTerm<K>> {
    let (rows, _) = p.boundary_shape(r)?;
    let entries = rows.saturating_mul(rows);
    if entries > settings.matrix_cap {
        return Err(Error::cap("local term entries", entries, settings.matrix_cap));
    }
    let kernel = p.range_space(r, settings)?;
    Ok(LocalTerm {
        region: r.clone(),
        operator: kernel.complement_projector(),
        kernel,
    })
}

/// `H = Σ_t T_t ⊗ 1` over the whole lattice.
#[derive(Clone, Debug)]
pub struct AssembledHamiltonian<K: Scalar> {
    graph: LatticeGraph,
    phys_dim: usize,
    terms: Vec<LocalTerm<K>>,
    sum: OperatorSum<K>,
}

impl<K: Scalar> AssembledHamiltonian<K> {
    pub fn from_terms(graph: LatticeGraph, phys_dim: usize, terms: Vec<LocalTerm<K>>, settings: &Settings) -> Result<Self> {
        let ops = terms
            .iter()
            .map(|t| LocalOperator {
                sites: t.region.members().to_vec(),
                matrix: t.operator.clone(),
            })
            .collect();
        let sum = OperatorSum::new(vec![phys_dim; graph.num_vertices()], ops, settings.state_cap)?;
        Ok(AssembledHamiltonian {
            graph,
            phys_dim,
            terms,
            sum,
        })
    }

    pub fn graph(&self) -> &LatticeGraph {
        &self.graph
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn terms(&self) -> &[LocalTerm<K>] {
        &self.terms
    }

    pub fn operator_sum(&self) -> &OperatorSum<K> {
        &self.sum
    }

    /// Dense matrix, bounded by `cap` rows.
    pub fn dense(&self, cap: usize) -> Result<DMatrix<K>> {
        let n = self.sum.dim();
        if n > cap {
            return Err(Error::cap("dense Hamiltonian dimension", n as u128, cap as u128));
        }
        self.sum.dense()
    }

    /// `⟨φ|T_t|φ⟩/⟨φ|φ⟩` for every term.
    pub fn term_energies(&self, phi: &DVector<K>) -> Vec<f64> {
        let nn = to_f64(phi.norm_squared());
        (0..self.terms.len())
            .map(|t| to_f64(self.sum.term_expectation(t, phi).real()) / nn)
            .collect()
    }

    /// Replaces every term `h` by `h + h Q h` with a random `Q ≥ 0`; the
    /// kernels, hence the ground space, are unchanged.
    pub fn perturbed<G: Rng + ?Sized>(&self, rng: &mut G, settings: &Settings) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let n = t.operator.nrows();
                let g = DMatrix::from_fn(n, n, |_, _| K::gaussian(rng));
                let q = &g * g.adjoint();
                let q = q.unscale(real(n as f64));
                let h = &t.operator;
                LocalTerm {
                    region: t.region.clone(),
                    operator: h + h * q * h,
                    kernel: t.kernel.clone(),
                }
            })
            .collect();
        Self::from_terms(self.graph.clone(), self.phys_dim, terms, settings)
    }

    /// One record per term: region and dense matrix.
    pub fn export(&self) -> Vec<TermRecord> {
        self.terms
            .iter()
            .map(|t| TermRecord {
                region: t.region.members().to_vec(),
                dim: t.operator.nrows(),
                entries: t
                    .operator
                    .transpose()
                    .iter()
                    .map(|&x| {
                        let (re, im) = x.parts();
                        [to_f64(re), to_f64(im)]
                    })
                    .collect(),
            })
            .collect()
    }
}

impl<K: Scalar> HermitianOperator<K> for AssembledHamiltonian<K> {
    fn dim(&self) -> usize {
        self.sum.dim()
    }

    fn apply(&self, x: &DVector<K>) -> DVector<K> {
        self.sum.apply(x)
    }

    fn norm_bound(&self) -> RealOf<K> {
        self.sum.norm_bound()
    }

    fn to_dense(&self) -> DMatrix<K> {
        self.sum.to_dense()
    }
}

/// A term as exported: row-major `[re, im]` entries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermRecord {
    pub region: Vec<usize>,
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

/// One projector per super-lattice edge, on `R_α ∪ R_β`. A covering by a
/// single region yields the single term on that region.
pub fn assemble<K: Scalar>(p: &Peps<K>, covering: &Covering, settings: &Settings) -> Result<AssembledHamiltonian<K>> {
    let regions = if covering.regions().len() == 1 {
        covering.regions().to_vec()
    } else {
        covering.edge_regions()?
    };
    let terms = regions
        .iter()
        .map(|r| local_projector(p, r, settings))
        .collect::<Result<Vec<_>>>()?;
    AssembledHamiltonian::from_terms(p.graph().clone(), p.phys_dim(), terms, settings)
}

/// One projector per listed region; together they must cover every vertex.
pub fn assemble_regions<K: Scalar>(p: &Peps<K>, regions: &[Region], settings: &Settings) -> Result<AssembledHamiltonian<K>> {
    let mut covered = vec![false; p.num_sites()];
    for r in regions {
        for &v in r.members() {
            covered[v] = true;
        }
    }
    if let Some(v) = covered.iter().position(|&c| !c) {
        return Err(Error::invalid(format!("vertex {v} is not covered by any term")));
    }
    let terms = regions
        .iter()
        .map(|r| local_projector(p, r, settings))
        .collect::<Result<Vec<_>>>()?;
    AssembledHamiltonian::from_terms(p.graph().clone(), p.phys_dim(), terms, settings)
}

/// The `k` lowest eigenpairs of `h`.
pub fn ground_space<K: Scalar>(
    h: &AssembledHamiltonian<K>,
    k: usize,
    settings: &EigenSettings,
) -> Result<Eigenpairs<K>> {
    lowest_eigenpairs(h, k, settings)
}

/// Eigenvalues counted as ground energy: below `max(1e-10, 1e-6 λ_last)`.
pub fn degeneracy(values: &[f64]) -> (usize, f64) {
    let last = values.last().copied().unwrap_or(0.0);
    let threshold = 1e-10f64.max(1e-6 * last);
    (values.iter().filter(|&&x| x < threshold).count(), threshold)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub eigenvalues: Vec<f64>,
    pub lambda0: f64,
    pub lambda1: f64,
    /// `‖P_ground φ‖ / ‖φ‖` with the ground space from the count below.
    pub overlap: f64,
    pub degeneracy: usize,
    /// True when every computed eigenvalue fell below the threshold, so the
    /// count is only a lower bound.
    pub degeneracy_saturated: bool,
    pub threshold: f64,
    pub max_term_energy: f64,
    /// `‖Hφ‖ / ‖φ‖`.
    pub state_residual: f64,
    pub eigen_residual: f64,
    pub dense: bool,
    pub unique: bool,
}

/// ED check that the PEPS is the unique ground state of `h`.
pub fn verify_uniqueness<K: Scalar>(
    p: &Peps<K>,
    h: &AssembledHamiltonian<K>,
    k: usize,
    settings: &Settings,
    eigen: &EigenSettings,
) -> Result<UniquenessReport> {
    let phi = p.state_vector(settings)?;
    let nphi = to_f64(phi.norm());
    let pairs = ground_space(h, k.max(2), eigen)?;
    let values: Vec<f64> = pairs.values.iter().map(|&x| to_f64(x)).collect();
    let (deg, threshold) = degeneracy(&values);
    let ground = pairs.vectors.columns(0, deg.max(1));
    let overlap = to_f64((ground.adjoint() * &phi).norm()) / nphi;
    let energies = h.term_energies(&phi);
    let max_term_energy = energies.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let state_residual = to_f64(h.apply(&phi).norm()) / nphi;
    Ok(UniquenessReport {
        lambda0: values[0],
        lambda1: values[1],
        overlap,
        degeneracy: deg,
        degeneracy_saturated: deg == values.len(),
        threshold,
        max_term_energy,
        state_residual,
        eigen_residual: pairs.max_residual,
        dense: pairs.dense,
        unique: deg == 1 && overlap >= 1.0 - 1e-8,
        eigenvalues: values,
    })
}

/// Re-embeds a subspace living on the sorted sites `from` into the sorted
/// superset `to`.
fn widen<K: Scalar>(s: &Subspace<K>, from: &[usize], to: &[usize], d: usize) -> Result<Subspace<K>> {
    let positions: Vec<usize> = from
        .iter()
        .map(|v| to.binary_search(v).map_err(|_| Error::invalid("support is not a superset")))
        .collect::<Result<_>>()?;
    s.embed(&positions, &vec![d; to.len()])
}

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

/// `∩_t (G_{R_t} ⊗ H_rest)`, built by growing the support one region at a
/// time (next region: largest overlap with the current support, lowest index
/// on ties). Returns the sites of the final support and the subspace on them.
pub fn intersect_ranges<K: Scalar>(
    p: &Peps<K>,
    regions: &[Region],
    settings: &Settings,
) -> Result<(Vec<usize>, Subspace<K>)> {
    if regions.is_empty() {
        return Err(Error::invalid("no regions to intersect"));
    }
    let d = p.phys_dim();
    let tol: RealOf<K> = settings.rtol();
    let mut used = vec![false; regions.len()];
    used[0] = true;
    let mut support = regions[0].members().to_vec();
    let mut space = p.range_space(&regions[0], settings)?;
    while let Some(next) = (0..regions.len())
        .filter(|&i| !used[i])
        .max_by_key(|&i| {
            let overlap = regions[i].members().iter().filter(|v| support.binary_search(v).is_ok()).count();
            (overlap, std::cmp::Reverse(i))
        })
    {
        used[next] = true;
        let members = regions[next].members();
        let grown = sorted_union(&support, members);
        let total = (d as u128).saturating_pow(grown.len() as u32);
        if total > settings.state_cap {
            return Err(Error::cap("intersection ambient dimension", total, settings.state_cap));
        }
        let a = widen(&space, &support, &grown, d)?;
        let b = widen(&p.range_space(&regions[next], settings)?, members, &grown, d)?;
        space = a.intersection(&b, tol)?;
        support = grown;
    }
    Ok((support, space))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntersectionReport {
    pub intersection_dim: usize,
    pub full_dim: usize,
    pub distance: f64,
    pub holds: bool,
}

/// Compares `∩_{(α,β)} G_{R_α ∪ R_β}` with `G` of the whole lattice.
pub fn intersection_identity_check<K: Scalar>(
    p: &Peps<K>,
    covering: &Covering,
    settings: &Settings,
) -> Result<IntersectionReport> {
    let regions = if covering.regions().len() == 1 {
        covering.regions().to_vec()
    } else {
        covering.edge_regions()?
    };
    let (support, lhs) = intersect_ranges(p, &regions, settings)?;
    if support.len() != p.num_sites() {
        return Err(Error::invalid("the super-lattice edges do not cover the lattice"));
    }
    let rhs = p.range_space(&p.graph().full_region(), settings)?;
    let distance = to_f64(lhs.distance(&rhs)?);
    Ok(IntersectionReport {
        intersection_dim: lhs.dim(),
        full_dim: rhs.dim(),
        distance,
        holds: distance <= 1e-8,
    })
}

/// Checks of the three-region intersection statements for disjoint `R₁, R₂, R₃`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TripleReport {
    pub dim_123: usize,
    /// `‖(1 − P_{A∩B}) P_{G₁₂₃}‖` with `A = G₁₂ ⊗ H₃`, `B = H₁ ⊗ G₂₃`.
    pub containment_excess: f64,
    pub dim_ab: usize,
    /// `R₁, R₃` not adjacent and `R₂, R₃` injective.
    pub pair_hypothesis: bool,
    pub pair_distance: f64,
    pub injective: [bool; 3],
    pub dim_abc: usize,
    /// Distance to `A ∩ B ∩ (G₁₃ ⊗ H₂)`.
    pub triple_distance: f64,
}

pub fn triple_intersection_check<K: Scalar>(
    p: &Peps<K>,
    r1: &Region,
    r2: &Region,
    r3: &Region,
    settings: &Settings,
) -> Result<TripleReport> {
    if !r1.is_disjoint(r2)? || !r1.is_disjoint(r3)? || !r2.is_disjoint(r3)? {
        return Err(Error::invalid("regions must be pairwise disjoint"));
    }
    let d = p.phys_dim();
    let tol: RealOf<K> = settings.rtol();
    let all = r1.union(r2)?.union(r3)?;
    let g123 = p.range_space(&all, settings)?;
    let lift = |r: Region| -> Result<Subspace<K>> {
        widen(&p.range_space(&r, settings)?, r.members(), all.members(), d)
    };
    let a = lift(r1.union(r2)?)?;
    let b = lift(r2.union(r3)?)?;
    let c = lift(r1.union(r3)?)?;
    let ab = a.intersection(&b, tol)?;
    let abc = ab.intersection(&c, tol)?;
    let injective = [
        check_injective(p, r1, settings)?.injective,
        check_injective(p, r2, settings)?.injective,
        check_injective(p, r3, settings)?.injective,
    ];
    let adjacent_13 = !p.graph().crossing_edges(r1, r3).is_empty();
    Ok(TripleReport {
        dim_123: g123.dim(),
        containment_excess: to_f64(ab.excess(&g123)?),
        dim_ab: ab.dim(),
        pair_hypothesis: !adjacent_13 && injective[1] && injective[2],
        pair_distance: to_f64(g123.distance(&ab)?),
        injective,
        dim_abc: abc.dim(),
        triple_distance: to_f64(g123.distance(&abc)?),
    })
}

/// Dimension of the intersection of the term kernels, for comparison with
/// the ED ground-state degeneracy.
pub fn kernel_intersection_dim<K: Scalar>(h: &AssembledHamiltonian<K>, settings: &Settings) -> Result<usize> {
    let d = h.phys_dim();
    let tol: RealOf<K> = settings.rtol();
    let n = h.graph().num_vertices();
    let all: Vec<usize> = (0..n).collect();
    let mut space = Subspace::full((d as u128).pow(n as u32) as usize);
    for t in h.terms() {
        let k = widen(&t.kernel, t.region.members(), &all, d)?;
        space = space.intersection(&k, tol)?;
        if space.dim() == 0 {
            break;
        }
    }
    Ok(space.dim())
}
