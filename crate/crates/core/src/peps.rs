//! PEPS on a [`LatticeGraph`]: amplitudes, state vectors, boundary maps and
//! their range spaces.
//!
//! The tensor at vertex `v` has shape `[d, D, …, D]` with one virtual leg per
//! entry of [`LatticeGraph::incident_legs`]. Physical configurations flatten
//! row-major with vertex 0 most significant. A boundary map `Γ_R` has rows
//! indexed by the physical configuration of the members of `R` (in increasing
//! order) and columns by the boundary legs in global leg order.

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Axis, GraphDocument, LatticeGraph, Leg, Region};
use crate::scalar::{lit, real, to_f64, RealOf, Scalar};
use crate::subspace::Subspace;
use crate::tensor::{contract, DenseTensor, LegRef, TensorDocument};

/// Numerical limits and tolerances shared by the whole pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Relative singular-value cutoff.
    pub rtol: f64,
    /// Largest state vector `d^n` that may be built.
    pub state_cap: u128,
    /// Largest boundary map (rows × columns) whose rank may be computed.
    pub matrix_cap: u128,
    /// Largest boundary map that is materialized; bigger ones are sampled.
    pub dense_limit: u128,
    /// Columns drawn per round when sampling a range.
    pub sketch_batch: usize,
    /// Seed of every internal random choice.
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            rtol: 1e-10,
            state_cap: 1 << 20,
            matrix_cap: 1 << 28,
            dense_limit: 1 << 20,
            sketch_batch: 48,
            seed: 0x5eed,
        }
    }
}

impl Settings {
    pub fn rtol<R: crate::scalar::Real>(&self) -> R {
        real(self.rtol)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Peps<K: Scalar> {
    graph: LatticeGraph,
    phys_dim: usize,
    tensors: Vec<DenseTensor<K>>,
}

/// Contraction plan of a region: member tensors, internal pairings and where
/// each boundary leg sits.
struct RegionPlan {
    members: Vec<usize>,
    pairings: Vec<(LegRef, LegRef)>,
    /// For each boundary leg in global order: (member position, tensor leg).
    boundary: Vec<LegRef>,
}

fn checked_pow(base: usize, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

impl<K: Scalar> Peps<K> {
    pub fn new(graph: LatticeGraph, phys_dim: usize, tensors: Vec<DenseTensor<K>>) -> Result<Self> {
        if phys_dim == 0 {
            return Err(Error::invalid("physical dimension must be positive"));
        }
        if tensors.len() != graph.num_vertices() {
            return Err(Error::mismatch(format!(
                "{} tensors for {} vertices",
                tensors.len(),
                graph.num_vertices()
            )));
        }
        for (v, t) in tensors.iter().enumerate() {
            let mut expected = vec![phys_dim];
            expected.extend(std::iter::repeat_n(graph.bond_dim(), graph.num_legs(v)));
            if t.shape() != expected.as_slice() {
                return Err(Error::mismatch(format!(
                    "tensor at vertex {v} has shape {:?}, expected {:?}",
                    t.shape(),
                    expected
                )));
            }
            if t.is_zero() {
                return Err(Error::invalid(format!("tensor at vertex {v} is identically zero")));
            }
        }
        Ok(Peps {
            graph,
            phys_dim,
            tensors,
        })
    }

    /// Independent Gaussian entries.
    pub fn random<G: Rng + ?Sized>(graph: LatticeGraph, phys_dim: usize, rng: &mut G) -> Result<Self> {
        let tensors = (0..graph.num_vertices())
            .map(|v| DenseTensor::random(Self::shape_for(&graph, phys_dim, v), rng))
            .collect();
        Self::new(graph, phys_dim, tensors)
    }

    /// Tensors given entrywise by `f(vertex, [i, j_1, …, j_e])`.
    pub fn from_fn(
        graph: LatticeGraph,
        phys_dim: usize,
        mut f: impl FnMut(usize, &[usize]) -> K,
    ) -> Result<Self> {
        let tensors = (0..graph.num_vertices())
            .map(|v| DenseTensor::from_fn(Self::shape_for(&graph, phys_dim, v), |idx| f(v, idx)))
            .collect();
        Self::new(graph, phys_dim, tensors)
    }

    fn shape_for(graph: &LatticeGraph, phys_dim: usize, v: usize) -> Vec<usize> {
        let mut s = vec![phys_dim];
        s.extend(std::iter::repeat_n(graph.bond_dim(), graph.num_legs(v)));
        s
    }

    pub fn graph(&self) -> &LatticeGraph {
        &self.graph
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn bond_dim(&self) -> usize {
        self.graph.bond_dim()
    }

    pub fn num_sites(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn tensor(&self, v: usize) -> &DenseTensor<K> {
        &self.tensors[v]
    }

    pub fn tensors(&self) -> &[DenseTensor<K>] {
        &self.tensors
    }

    /// Copy with the tensor at `v` replaced.
    pub fn with_tensor(&self, v: usize, t: DenseTensor<K>) -> Result<Self> {
        let mut tensors = self.tensors.clone();
        tensors[v] = t;
        Self::new(self.graph.clone(), self.phys_dim, tensors)
    }

    /// Position of `leg` among the legs of the tensor at `v` (0 is physical).
    pub fn leg_position(&self, v: usize, leg: Leg) -> usize {
        1 + self
            .graph
            .incident_legs(v)
            .iter()
            .position(|&l| l == leg)
            .expect("leg is incident to the vertex")
    }

    /// Total Hilbert-space dimension `d^n`, saturating.
    pub fn total_dim(&self) -> u128 {
        checked_pow(self.phys_dim, self.num_sites())
    }

    fn plan(&self, region: &Region) -> Result<RegionPlan> {
        let boundary = self.graph.boundary(region)?;
        let members = region.members().to_vec();
        let position = |v: usize| members.binary_search(&v).unwrap();
        let mut pairings = Vec::new();
        for i in self.graph.internal_edges(region)? {
            let e = self.graph.edge(i);
            pairings.push((
                (position(e.a), self.leg_position(e.a, Leg::Edge(i))),
                (position(e.b), self.leg_position(e.b, Leg::Edge(i))),
            ));
        }
        let boundary = boundary
            .legs
            .iter()
            .map(|&leg| {
                let v = self.graph.inside_end(region, leg);
                (position(v), self.leg_position(v, leg))
            })
            .collect();
        Ok(RegionPlan {
            members,
            pairings,
            boundary,
        })
    }

    /// Physical dimension and boundary dimension of `Γ_R`.
    pub fn boundary_shape(&self, region: &Region) -> Result<(u128, u128)> {
        let e = self.graph.boundary(region)?.legs.len();
        Ok((
            checked_pow(self.phys_dim, region.len()),
            checked_pow(self.bond_dim(), e),
        ))
    }

    /// `Γ_R` as a tensor with legs `[i_{r_1}, …, i_{r_k}, ᾱ_1, …, ᾱ_E]`.
    pub fn boundary_tensor(&self, region: &Region) -> Result<DenseTensor<K>> {
        if region.is_empty() {
            return Err(Error::invalid("region is empty"));
        }
        let plan = self.plan(region)?;
        let network: Vec<DenseTensor<K>> =
            plan.members.iter().map(|&v| self.tensors[v].clone()).collect();
        let result = contract(&network, &plan.pairings)?;
        // Free legs come out ordered by (member, leg); put physical legs first
        // and the boundary legs in global order.
        let mut free: Vec<LegRef> = Vec::new();
        for (p, &v) in plan.members.iter().enumerate() {
            for l in 0..self.tensors[v].ndim() {
                let paired = plan
                    .pairings
                    .iter()
                    .any(|&(x, y)| x == (p, l) || y == (p, l));
                if !paired {
                    free.push((p, l));
                }
            }
        }
        let mut perm: Vec<usize> = (0..plan.members.len())
            .map(|p| free.iter().position(|&f| f == (p, 0)).unwrap())
            .collect();
        perm.extend(
            plan.boundary
                .iter()
                .map(|b| free.iter().position(|f| f == b).unwrap()),
        );
        result.permute(&perm)
    }

    /// `Γ_R` as a `d^{|R|} × D^{|E|}` matrix.
    pub fn boundary_map(&self, region: &Region, settings: &Settings) -> Result<DMatrix<K>> {
        let (rows, cols) = self.boundary_shape(region)?;
        let size = rows.saturating_mul(cols);
        let cap = settings.dense_limit.max(settings.matrix_cap.min(1 << 24));
        if size > cap {
            return Err(Error::cap("boundary map entries", size, cap));
        }
        let t = self.boundary_tensor(region)?;
        Ok(DMatrix::from_row_slice(rows as usize, cols as usize, t.data()))
    }

    /// `Γ_R ω` for a product vector `ω = ⊗_e ω_e` on the boundary legs (one
    /// vector per leg, in global order).
    pub fn apply_boundary_product(&self, region: &Region, vectors: &[Vec<K>]) -> Result<DVector<K>> {
        let plan = self.plan(region)?;
        if vectors.len() != plan.boundary.len() {
            return Err(Error::mismatch("one vector per boundary leg is required"));
        }
        self.apply_with_plan(&plan, vectors)
    }

    fn apply_with_plan(&self, plan: &RegionPlan, vectors: &[Vec<K>]) -> Result<DVector<K>> {
        // Absorb boundary vectors leg by leg, highest leg first so that the
        // remaining leg positions stay valid.
        let mut network: Vec<DenseTensor<K>> =
            plan.members.iter().map(|&v| self.tensors[v].clone()).collect();
        let mut removed: Vec<Vec<usize>> = vec![Vec::new(); network.len()];
        let mut order: Vec<usize> = (0..plan.boundary.len()).collect();
        order.sort_by_key(|&k| std::cmp::Reverse(plan.boundary[k]));
        for k in order {
            let (p, l) = plan.boundary[k];
            network[p] = network[p].contract_vector(l, &vectors[k])?;
            removed[p].push(l);
        }
        let shift = |p: usize, l: usize| l - removed[p].iter().filter(|&&r| r < l).count();
        let pairings: Vec<(LegRef, LegRef)> = plan
            .pairings
            .iter()
            .map(|&((p, l), (q, m))| ((p, shift(p, l)), (q, shift(q, m))))
            .collect();
        let result = contract(&network, &pairings)?;
        Ok(DVector::from_vec(result.into_data()))
    }

    /// `G_R`, the range of `Γ_R`. Large maps are sampled with random product
    /// vectors until a full round adds no new direction.
    pub fn range_space(&self, region: &Region, settings: &Settings) -> Result<Subspace<K>> {
        let (rows, cols) = self.boundary_shape(region)?;
        let size = rows.saturating_mul(cols);
        if size > settings.matrix_cap {
            return Err(Error::cap("boundary map entries", size, settings.matrix_cap));
        }
        if size <= settings.dense_limit {
            let m = self.boundary_map(region, settings)?;
            return Ok(Subspace::range_of(&m, settings.rtol()));
        }
        self.sampled_range(region, settings, (rows as usize).min(cols as usize))
    }

    fn sampled_range(&self, region: &Region, settings: &Settings, max_dim: usize) -> Result<Subspace<K>> {
        let plan = self.plan(region)?;
        let rows = checked_pow(self.phys_dim, region.len()) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ region_seed(region));
        let mut space = Subspace::from_orthonormal(DMatrix::zeros(rows, 0), settings.rtol());
        let mut scale = RealOf::<K>::zero();
        let batch = settings.sketch_batch.max(1);
        let d = self.bond_dim();
        loop {
            let mut block = DMatrix::zeros(rows, batch);
            for c in 0..batch {
                let vectors: Vec<Vec<K>> = (0..plan.boundary.len())
                    .map(|_| (0..d).map(|_| K::gaussian(&mut rng)).collect())
                    .collect();
                let col = self.apply_with_plan(&plan, &vectors)?;
                let n = col.norm();
                if n > scale {
                    scale = n;
                }
                block.set_column(c, &col);
            }
            let added = space.extend(&block, settings.rtol(), scale);
            if added == 0 || space.dim() >= max_dim {
                break;
            }
        }
        Ok(space)
    }

    /// Amplitude of one physical configuration. Requires a graph without open legs.
    pub fn amplitude(&self, config: &[usize]) -> Result<K> {
        if self.graph.total_open_legs() > 0 {
            return Err(Error::invalid("amplitude needs a graph without open legs"));
        }
        if config.len() != self.num_sites() {
            return Err(Error::mismatch("one physical index per vertex is required"));
        }
        if let Some(&i) = config.iter().find(|&&i| i >= self.phys_dim) {
            return Err(Error::invalid(format!("physical index {i} out of range")));
        }
        let full = self.graph.full_region();
        let plan = self.plan(&full)?;
        let network: Vec<DenseTensor<K>> = plan
            .members
            .iter()
            .map(|&v| self.tensors[v].fix_leg(0, config[v]))
            .collect::<Result<_>>()?;
        let pairings: Vec<(LegRef, LegRef)> = plan
            .pairings
            .iter()
            .map(|&((p, l), (q, m))| ((p, l - 1), (q, m - 1)))
            .collect();
        Ok(contract(&network, &pairings)?.data()[0])
    }

    /// Unnormalized state vector of length `d^n`.
    pub fn state_vector(&self, settings: &Settings) -> Result<DVector<K>> {
        if self.graph.total_open_legs() > 0 {
            return Err(Error::invalid("state vector needs a graph without open legs"));
        }
        let dim = self.total_dim();
        if dim > settings.state_cap {
            return Err(Error::cap("state vector length", dim, settings.state_cap));
        }
        let t = self.boundary_tensor(&self.graph.full_region())?;
        Ok(DVector::from_vec(t.into_data()))
    }

    /// `S_R`, the support of the reduced density operator on `R`.
    pub fn reduced_support(&self, region: &Region, settings: &Settings) -> Result<Subspace<K>> {
        let psi = self.state_vector(settings)?;
        let m = bipartition(&psi, self.phys_dim, self.num_sites(), region.members())?;
        Ok(Subspace::range_of(&m, settings.rtol()))
    }

    /// Renumbers vertices: old vertex `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let graph = self.graph.relabel(perm)?;
        let n = self.num_sites();
        let mut inverse = vec![0; n];
        for (v, &p) in perm.iter().enumerate() {
            inverse[p] = v;
        }
        let mut tensors = Vec::with_capacity(n);
        for new_v in 0..n {
            let old_v = inverse[new_v];
            // Map each new leg to the old leg it came from.
            let old_legs = self.graph.incident_legs(old_v);
            let mut legs_perm = vec![0usize];
            for &leg in graph.incident_legs(new_v) {
                let key = graph.leg_key(leg);
                let k = old_legs
                    .iter()
                    .position(|&ol| relabeled_key(&self.graph, ol, perm) == key)
                    .expect("relabeled leg exists");
                legs_perm.push(1 + k);
            }
            tensors.push(self.tensors[old_v].permute(&legs_perm)?);
        }
        Peps::new(graph, self.phys_dim, tensors)
    }

    /// Merges disjoint equal-size blocks covering every vertex into single
    /// sites of physical dimension `d^{block size}`.
    pub fn regroup(&self, blocks: &[Vec<usize>], settings: &Settings) -> Result<Self> {
        let n = self.num_sites();
        let mut owner = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            for &v in block {
                if v >= n || owner[v] != usize::MAX {
                    return Err(Error::invalid("blocks must be disjoint lists of existing vertices"));
                }
                owner[v] = b;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(Error::invalid("blocks must cover every vertex"));
        }
        let size = blocks[0].len();
        if blocks.iter().any(|b| b.len() != size) {
            return Err(Error::invalid("blocks must have equal size"));
        }
        let mut pairs = Vec::new();
        let mut new_edge_of = vec![None; self.graph.edges().len()];
        let mut slot_count = std::collections::HashMap::new();
        for (i, e) in self.graph.edges().iter().enumerate() {
            let (a, b) = (owner[e.a], owner[e.b]);
            if a != b {
                let key = (a.min(b), a.max(b));
                let slot = slot_count.entry(key).or_insert(0usize);
                new_edge_of[i] = Some((key.0, key.1, *slot));
                *slot += 1;
                pairs.push((a, b));
            }
        }
        let open: Vec<usize> = blocks
            .iter()
            .map(|b| b.iter().map(|&v| self.graph.open_legs(v)).sum())
            .collect();
        let graph = LatticeGraph::new(blocks.len(), &pairs, open, self.bond_dim())?;
        let mut tensors = Vec::with_capacity(blocks.len());
        for (b, block) in blocks.iter().enumerate() {
            let region = self.graph.region(block.iter().copied())?;
            let bt = self.boundary_tensor(&region)?;
            let legs = self.graph.boundary(&region)?.legs;
            let mut open_seen = 0usize;
            let new_keys: Vec<(usize, usize, usize)> = legs
                .iter()
                .map(|&leg| match leg {
                    Leg::Edge(i) => new_edge_of[i].expect("boundary edge crosses blocks"),
                    Leg::Open { .. } => {
                        open_seen += 1;
                        (b, usize::MAX, open_seen - 1)
                    }
                })
                .collect();
            let k = region.len();
            let mut order: Vec<usize> = (0..legs.len()).collect();
            order.sort_by_key(|&j| new_keys[j]);
            let mut perm: Vec<usize> = (0..k).collect();
            perm.extend(order.iter().map(|&j| k + j));
            let t = bt.permute(&perm)?;
            let mut shape = vec![checked_pow(self.phys_dim, k) as usize];
            shape.extend(std::iter::repeat_n(self.bond_dim(), legs.len()));
            tensors.push(t.reshape(shape)?);
        }
        let _ = settings;
        Peps::new(graph, checked_pow(self.phys_dim, size) as usize, tensors)
    }

    /// Whether the state is invariant under both unit translations of a
    /// square torus, to relative tolerance `tol`.
    pub fn is_translation_invariant(&self, tol: f64, settings: &Settings) -> Result<bool> {
        let (rows, cols) = torus_dims(&self.graph)?;
        let psi = self.state_vector(settings)?;
        let norm = to_f64(psi.norm());
        for (dr, dc) in [(0, 1), (1, 0)] {
            let map: Vec<usize> = (0..rows * cols)
                .map(|v| ((v / cols + dr) % rows) * cols + (v % cols + dc) % cols)
                .collect();
            let shifted = permute_sites(&psi, self.phys_dim, &map);
            if to_f64((&shifted - &psi).norm()) > tol * norm {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Site-independent representation of a translation-invariant PEPS on an
    /// `N × M` square torus. Each vertex gets the same tensor
    /// `S_i = (NM)^{-1/NM} Σ_{j,k} A^{(j,k)}_{i;u,d,l,r} |j,k,l⟩⟨j,k+1,r| ⊗ |k,j,u⟩⟨k,j+1,d|`,
    /// with position tags taken modulo the torus size, on bonds of dimension `NMD`.
    pub fn site_independent_form(&self, check_ti: bool, settings: &Settings) -> Result<SiteIndependent<K>> {
        let (rows, cols) = torus_dims(&self.graph)?;
        if rows < 2 || cols < 2 {
            return Err(Error::invalid("site-independent form needs a torus with both sides ≥ 2"));
        }
        if check_ti && !self.is_translation_invariant(1e-10, settings)? {
            return Err(Error::invalid("state is not translation invariant"));
        }
        let d = self.bond_dim();
        let big = rows * cols * d;
        let positions = self.graph.positions().expect("generated torus has positions");
        let prefactor: K = lit(((rows * cols) as f64).powf(-1.0 / (rows * cols) as f64));
        let roles: Vec<[usize; 4]> = (0..self.num_sites())
            .map(|v| leg_roles(&self.graph, v))
            .collect::<Result<_>>()?;
        let shape = vec![self.phys_dim, big, big, big, big];
        let strides = crate::tensor::strides(&shape);
        let mut data = vec![K::zero(); shape.iter().product()];
        let tag_h = |j: usize, k: usize, x: usize| ((j % rows) * cols + (k % cols)) * d + x;
        let tag_v = |k: usize, j: usize, x: usize| ((k % cols) * rows + (j % rows)) * d + x;
        for v in 0..self.num_sites() {
            let [j, k] = positions[v];
            let (j, k) = (j as usize, k as usize);
            for (flat, &value) in self.tensors[v].data().iter().enumerate() {
                if value.is_zero() {
                    continue;
                }
                let mut rem = flat;
                let mut idx = [0usize; 5];
                for pos in (1..5).rev() {
                    idx[pos] = rem % d;
                    rem /= d;
                }
                idx[0] = rem;
                let mut off = idx[0] * strides[0];
                for (slot, &role) in roles[v].iter().enumerate() {
                    let x = idx[slot + 1];
                    let t = match role {
                        LEFT => tag_h(j, k, x),
                        RIGHT => tag_h(j, k + 1, x),
                        UP => tag_v(k, j, x),
                        _ => tag_v(k, j + 1, x),
                    };
                    off += t * strides[1 + role];
                }
                data[off] += value * prefactor;
            }
        }
        let shared = DenseTensor::new(shape, data)?;
        let graph = self.graph.with_bond_dim(big)?;
        let peps = Peps::from_shared_tensor(graph, &shared)?;
        Ok(SiteIndependent { peps, tensor: shared })
    }
}

/// Leg roles on an oriented square lattice, in the order of a shared tensor.
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const UP: usize = 2;
pub const DOWN: usize = 3;

/// Role of each virtual leg of `v`, in the vertex's leg order.
pub fn leg_roles(graph: &LatticeGraph, v: usize) -> Result<[usize; 4]> {
    let legs = graph.incident_legs(v);
    if legs.len() != 4 {
        return Err(Error::invalid("every vertex needs exactly four legs"));
    }
    let mut roles = [0usize; 4];
    for (slot, &leg) in legs.iter().enumerate() {
        let Leg::Edge(i) = leg else {
            return Err(Error::invalid("shared tensors need a graph without open legs"));
        };
        let dir = graph
            .edge(i)
            .direction
            .ok_or_else(|| Error::invalid("shared tensors need oriented lattice edges"))?;
        roles[slot] = match (dir.axis, dir.tail == v) {
            (Axis::Horizontal, true) => RIGHT,
            (Axis::Horizontal, false) => LEFT,
            (Axis::Vertical, true) => DOWN,
            (Axis::Vertical, false) => UP,
        };
    }
    let mut sorted = roles;
    sorted.sort_unstable();
    if sorted != [LEFT, RIGHT, UP, DOWN] {
        return Err(Error::invalid("every vertex needs one left, right, up and down leg"));
    }
    Ok(roles)
}

impl<K: Scalar> Peps<K> {
    /// Places one tensor with legs `[physical, left, right, up, down]` at every
    /// vertex of an oriented square lattice.
    pub fn from_shared_tensor(graph: LatticeGraph, shared: &DenseTensor<K>) -> Result<Self> {
        if shared.ndim() != 5 {
            return Err(Error::mismatch("a shared tensor has one physical and four virtual legs"));
        }
        let d = shared.shape()[0];
        let tensors = (0..graph.num_vertices())
            .map(|v| {
                let roles = leg_roles(&graph, v)?;
                let mut perm = vec![0];
                perm.extend(roles.iter().map(|&r| 1 + r));
                shared.permute(&perm)
            })
            .collect::<Result<_>>()?;
        Peps::new(graph, d, tensors)
    }
}

/// Output of [`Peps::site_independent_form`].
#[derive(Clone, Debug)]
pub struct SiteIndependent<K: Scalar> {
    pub peps: Peps<K>,
    pub tensor: DenseTensor<K>,
}

fn relabeled_key(graph: &LatticeGraph, leg: Leg, perm: &[usize]) -> (usize, usize, usize) {
    match leg {
        Leg::Edge(i) => {
            let e = graph.edge(i);
            let (a, b) = (perm[e.a], perm[e.b]);
            (a.min(b), a.max(b), e.slot)
        }
        Leg::Open { vertex, slot } => (perm[vertex], usize::MAX, slot),
    }
}

fn region_seed(region: &Region) -> u64 {
    region
        .members()
        .iter()
        .fold(0x9e37_79b9_7f4a_7c15u64, |h, &v| (h ^ v as u64).wrapping_mul(0x0100_0000_01b3))
}

fn torus_dims(graph: &LatticeGraph) -> Result<(usize, usize)> {
    match graph.generator() {
        Some(g) if g.kind == crate::lattice::LatticeKind::SquareTorus => Ok((g.dims[0], g.dims[1])),
        _ => Err(Error::invalid("operation needs a generated square-torus lattice")),
    }
}

/// Reorders a state so that site `v` moves to site `map[v]`.
pub fn permute_sites<K: Scalar>(psi: &DVector<K>, d: usize, map: &[usize]) -> DVector<K> {
    let n = map.len();
    let mut out = DVector::zeros(psi.len());
    let mut digits = vec![0usize; n];
    for (x, &amp) in psi.iter().enumerate() {
        let mut rem = x;
        for v in (0..n).rev() {
            digits[v] = rem % d;
            rem /= d;
        }
        let mut y = 0usize;
        let mut moved = vec![0usize; n];
        for v in 0..n {
            moved[map[v]] = digits[v];
        }
        for &m in &moved {
            y = y * d + m;
        }
        out[y] = amp;
    }
    out
}

/// Matricizes a state with rows indexed by `sites` (in the given order) and
/// columns by the remaining sites.
pub fn bipartition<K: Scalar>(psi: &DVector<K>, d: usize, n: usize, sites: &[usize]) -> Result<DMatrix<K>> {
    let rest: Vec<usize> = (0..n).filter(|v| !sites.contains(v)).collect();
    let t = DenseTensor::new(vec![d; n], psi.as_slice().to_vec())?;
    let perm: Vec<usize> = sites.iter().chain(&rest).copied().collect();
    let p = t.permute(&perm)?;
    let rows = checked_pow(d, sites.len()) as usize;
    Ok(DMatrix::from_row_slice(rows, psi.len() / rows, p.data()))
}

/// Serialized PEPS. With `shared_tensor` set, `tensors` holds one tensor used
/// at every vertex.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PepsDocument {
    pub graph: GraphDocument,
    pub phys_dim: usize,
    #[serde(default)]
    pub shared_tensor: bool,
    pub tensors: Vec<TensorDocument>,
}

impl PepsDocument {
    pub fn from_peps<K: Scalar>(p: &Peps<K>) -> Self {
        PepsDocument {
            graph: p.graph.clone().into(),
            phys_dim: p.phys_dim,
            shared_tensor: false,
            tensors: p.tensors.iter().map(TensorDocument::from).collect(),
        }
    }

    /// Document of a site-independent PEPS storing only the shared tensor.
    pub fn from_shared<K: Scalar>(ti: &SiteIndependent<K>) -> Self {
        PepsDocument {
            graph: ti.peps.graph.clone().into(),
            phys_dim: ti.peps.phys_dim,
            shared_tensor: true,
            tensors: vec![TensorDocument::from(&ti.tensor)],
        }
    }

    pub fn to_peps<K: Scalar>(&self) -> Result<Peps<K>> {
        let graph = LatticeGraph::try_from(self.graph.clone())?;
        if self.shared_tensor {
            if self.tensors.len() != 1 {
                return Err(Error::invalid("a shared-tensor document holds exactly one tensor"));
            }
            let p = Peps::from_shared_tensor(graph, &self.tensors[0].to_tensor()?)?;
            if p.phys_dim != self.phys_dim {
                return Err(Error::mismatch("shared tensor physical dimension differs"));
            }
            return Ok(p);
        }
        let tensors = self.tensors.iter().map(|t| t.to_tensor()).collect::<Result<_>>()?;
        Peps::new(graph, self.phys_dim, tensors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{generate_lattice, ring, LatticeKind, LatticeSpec};
    use num_complex::Complex64;

    type C = Complex64;

    fn torus(n: usize, m: usize, bond: usize) -> LatticeGraph {
        generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[n, m]).bond_dim(bond)).unwrap()
    }

    #[test]
    fn single_vertex_amplitudes() {
        let g = LatticeGraph::isolated(1, 2).unwrap();
        let psi = [C::new(0.3, 0.1), C::new(-1.0, 0.5), C::new(0.0, 2.0)];
        let p = Peps::from_fn(g, 3, |_, i| psi[i[0]]).unwrap();
        for i in 0..3 {
            assert_eq!(p.amplitude(&[i]).unwrap(), psi[i]);
        }
    }

    #[test]
    fn product_state_vector() {
        let g = LatticeGraph::isolated(2, 2).unwrap();
        let a = [1.0, 2.0];
        let b = [3.0, -1.0, 0.5];
        let p = Peps::<f64>::new(
            g,
            2,
            vec![DenseTensor::new(vec![2], a.to_vec()).unwrap(), DenseTensor::new(vec![2], b[..2].to_vec()).unwrap()],
        )
        .unwrap();
        let v = p.state_vector(&Settings::default()).unwrap();
        assert_eq!(v.as_slice(), &[3.0, -1.0, 6.0, -2.0]);
    }

    #[test]
    fn state_vector_matches_amplitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Peps::<C>::random(torus(2, 3, 2), 2, &mut rng).unwrap();
        let v = p.state_vector(&Settings::default()).unwrap();
        for x in 0..64usize {
            let config: Vec<usize> = (0..6).map(|k| (x >> (5 - k)) & 1).collect();
            assert!((p.amplitude(&config).unwrap() - v[x]).norm() < 1e-12);
        }
    }

    #[test]
    fn whole_graph_boundary_map_is_the_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = Peps::<C>::random(ring(4, 2).unwrap(), 2, &mut rng).unwrap();
        let s = Settings::default();
        let gamma = p.boundary_map(&p.graph().full_region(), &s).unwrap();
        assert_eq!(gamma.shape(), (16, 1));
        let v = p.state_vector(&s).unwrap();
        assert!((gamma.column(0) - v).norm() < 1e-13);
        assert_eq!(p.range_space(&p.graph().full_region(), &s).unwrap().dim(), 1);
    }

    #[test]
    fn single_vertex_boundary_map_is_the_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = Peps::<C>::random(torus(3, 3, 2), 3, &mut rng).unwrap();
        let r = p.graph().region([4]).unwrap();
        let gamma = p.boundary_map(&r, &Settings::default()).unwrap();
        let direct = p.tensor(4).matrix(&[0], &[1, 2, 3, 4]).unwrap();
        assert!(crate::linalg::max_abs_diff(&gamma, &direct) < 1e-15);
    }

    #[test]
    fn sampled_range_agrees_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareOpen, &[2, 2])).unwrap();
        let p = Peps::<C>::random(g, 3, &mut rng).unwrap();
        let r = p.graph().region([0, 1, 2]).unwrap();
        let dense = Settings::default();
        let sampled = Settings {
            dense_limit: 0,
            sketch_batch: 7,
            ..Settings::default()
        };
        let a = p.range_space(&r, &dense).unwrap();
        let b = p.range_space(&r, &sampled).unwrap();
        assert_eq!(a.dim(), 27);
        assert!(a.distance(&b).unwrap() < 1e-10);
        let low = Peps::<C>::random(
            generate_lattice(&LatticeSpec::new(LatticeKind::SquareOpen, &[1, 2])).unwrap(),
            2,
            &mut rng,
        )
        .unwrap();
        let r = low.graph().region([0]).unwrap();
        let b = low.range_space(&r, &sampled).unwrap();
        assert_eq!(b.dim(), 2);
    }

    #[test]
    fn reduced_support_of_product_state() {
        let g = ring(4, 1).unwrap();
        let p = Peps::<f64>::from_fn(g, 2, |v, i| 1.0 + (v + i[0]) as f64).unwrap();
        let s = Settings::default();
        for members in [vec![0], vec![1, 2], vec![0, 2, 3]] {
            let r = p.graph().region(members).unwrap();
            assert_eq!(p.reduced_support(&r, &s).unwrap().dim(), 1);
        }
    }

    #[test]
    fn caps_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = Peps::<f64>::random(torus(3, 3, 2), 2, &mut rng).unwrap();
        let tight = Settings {
            state_cap: 256,
            ..Settings::default()
        };
        assert!(matches!(p.state_vector(&tight), Err(Error::CapExceeded { .. })));
        assert!(p.amplitude(&[0; 8]).is_err());
        assert!(p.amplitude(&[2; 9]).is_err());
        let open = generate_lattice(&LatticeSpec::new(LatticeKind::SquareOpen, &[2, 2])).unwrap();
        let q = Peps::<f64>::random(open, 2, &mut rng).unwrap();
        assert!(q.amplitude(&[0; 4]).is_err());
        let zero = DenseTensor::zeros(vec![2, 2, 2, 2, 2]);
        assert!(p.with_tensor(0, zero).is_err());
    }

    #[test]
    fn relabel_preserves_the_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = Peps::<C>::random(torus(2, 3, 2), 2, &mut rng).unwrap();
        let perm = [3, 0, 5, 1, 4, 2];
        let q = p.relabel(&perm).unwrap();
        let s = Settings::default();
        let moved = permute_sites(&p.state_vector(&s).unwrap(), 2, &perm);
        assert!((moved - q.state_vector(&s).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn regroup_preserves_the_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = Peps::<C>::random(torus(2, 3, 2), 2, &mut rng).unwrap();
        let s = Settings::default();
        let blocks = vec![vec![0, 3], vec![1, 4], vec![2, 5]];
        let q = p.regroup(&blocks, &s).unwrap();
        assert_eq!(q.phys_dim(), 4);
        // Block order (0,3),(1,4),(2,5) corresponds to the site order 0,3,1,4,2,5.
        let order = [0, 2, 4, 1, 3, 5];
        let moved = permute_sites(&p.state_vector(&s).unwrap(), 2, &order);
        assert!((moved - q.state_vector(&s).unwrap()).norm() < 1e-11);
    }

    #[test]
    fn non_invariant_state_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = Peps::<C>::random(torus(2, 2, 2), 2, &mut rng).unwrap();
        let s = Settings::default();
        assert!(!p.is_translation_invariant(1e-10, &s).unwrap());
        assert!(p.site_independent_form(true, &s).is_err());
    }

    #[test]
    fn shared_tensor_input_converts_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = DenseTensor::<C>::random(vec![2, 2, 2, 2, 2], &mut rng);
        let p = Peps::from_shared_tensor(torus(2, 2, 2), &t).unwrap();
        let s = Settings::default();
        assert!(p.is_translation_invariant(1e-10, &s).unwrap());
        let ti = p.site_independent_form(true, &s).unwrap();
        assert_eq!(ti.peps.bond_dim(), 8);
        let a = p.state_vector(&s).unwrap();
        let b = ti.peps.state_vector(&s).unwrap();
        assert!((&a - &b).norm() / a.norm() < 1e-10);
        let doc = PepsDocument::from_shared(&ti);
        let back = doc.to_peps::<C>().unwrap();
        assert_eq!(back, ti.peps);
    }

    #[test]
    fn document_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = Peps::<C>::random(torus(2, 2, 2), 2, &mut rng).unwrap();
        let doc = PepsDocument::from_peps(&p);
        let text = serde_json::to_string(&doc).unwrap();
        let back: PepsDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_peps::<C>().unwrap(), p);
    }
}
