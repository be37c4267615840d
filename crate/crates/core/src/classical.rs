//! PEPS built from classical nearest-neighbor models: the amplitude of a
//! configuration `x` is proportional to `exp(−β/2 H(x))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blocks::{block_range, BlockLayout};
use crate::error::{Error, Result};
use crate::lattice::{generate_lattice, LatticeGraph, LatticeKind, LatticeSpec, Leg, Region};
use crate::linalg::{factor_symmetric, max_abs_diff, rank, spectral_norm};
use crate::peps::{Peps, Settings};
use crate::scalar::{lit, to_f64, RealOf, Scalar};
use crate::subspace::{embed_operator, Subspace};

/// `½ ln(2 + √3)`, the critical inverse temperature of the isotropic Ising
/// model on the honeycomb lattice.
pub fn hexagonal_critical_beta() -> f64 {
    0.5 * (2.0 + 3f64.sqrt()).ln()
}

/// `½ ln(1 + √2)`, the critical inverse temperature of the square-lattice
/// Ising model.
pub fn square_critical_beta() -> f64 {
    0.5 * (1.0 + 2f64.sqrt()).ln()
}

/// `½ (1 + √2)`, an alternative closed form kept alongside
/// [`square_critical_beta`] for comparison only.
pub fn square_critical_beta_alt() -> f64 {
    0.5 * (1.0 + 2f64.sqrt())
}

/// A classical model `H(x) = Σ_(i,j) h(x_i, x_j)` on the edges of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalModel {
    pub states: usize,
    pub graph: LatticeGraph,
    /// `h(x_a, x_b)` with `a` the smaller endpoint.
    pub potential: DMatrix<f64>,
    /// Per-edge tables overriding `potential`, indexed like the edges.
    pub edge_potentials: Option<Vec<DMatrix<f64>>>,
    pub beta: f64,
    /// Use the closed-form Ising factor instead of a numerical split.
    pub ising: bool,
}

impl ClassicalModel {
    pub fn new(states: usize, graph: &LatticeGraph, potential: DMatrix<f64>, beta: f64) -> Result<Self> {
        if states == 0 {
            return Err(Error::invalid("a classical model needs at least one state"));
        }
        if potential.nrows() != states || potential.ncols() != states {
            return Err(Error::mismatch("potential table must be states × states"));
        }
        if potential.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("potential table has a non-finite entry"));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("β must be finite and nonnegative, got {beta}")));
        }
        Ok(ClassicalModel {
            states,
            graph: graph.with_bond_dim(states)?,
            potential,
            edge_potentials: None,
            beta,
            ising: false,
        })
    }

    /// Ferromagnetic Ising model `H = −Σ x_i x_j`, state 0 ↔ `+1`, 1 ↔ `−1`.
    pub fn ising(graph: &LatticeGraph, beta: f64) -> Result<Self> {
        let h = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let mut m = Self::new(2, graph, h, beta)?;
        m.ising = true;
        Ok(m)
    }

    pub fn with_edge_potentials(mut self, tables: Vec<DMatrix<f64>>) -> Result<Self> {
        if tables.len() != self.graph.edges().len() {
            return Err(Error::mismatch("one potential table per edge is required"));
        }
        for t in &tables {
            if t.nrows() != self.states || t.ncols() != self.states || t.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("edge potential tables must be finite states × states"));
            }
        }
        self.edge_potentials = Some(tables);
        self.ising = false;
        Ok(self)
    }

    pub fn edge_potential(&self, e: usize) -> &DMatrix<f64> {
        match &self.edge_potentials {
            Some(t) => &t[e],
            None => &self.potential,
        }
    }

    /// `H(x)`.
    pub fn energy(&self, config: &[usize]) -> f64 {
        self.graph
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| self.edge_potential(i)[(config[e.a], config[e.b])])
            .sum()
    }

    /// `exp(−β/2 h(x, x'))` for edge `e`.
    pub fn gibbs_factor(&self, e: usize) -> DMatrix<f64> {
        self.edge_potential(e).map(|h| (-0.5 * self.beta * h).exp())
    }

    /// Spin value of state `x`: `+1, −1` for Ising, otherwise `x` itself.
    pub fn value(&self, x: usize) -> f64 {
        if self.ising {
            if x == 0 {
                1.0
            } else {
                -1.0
            }
        } else {
            x as f64
        }
    }
}

/// Input document of a classical model with a uniform potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalModelDocument {
    pub states: usize,
    pub beta: f64,
    /// Rows of `h(x, x')`; omitted for the Ising model.
    #[serde(default)]
    pub potential: Option<Vec<Vec<f64>>>,
    pub lattice: LatticeSpec,
}

impl ClassicalModelDocument {
    pub fn to_model(&self) -> Result<ClassicalModel> {
        let graph = generate_lattice(&self.lattice.clone().bond_dim(self.states))?;
        match &self.potential {
            None if self.states == 2 => ClassicalModel::ising(&graph, self.beta),
            None => Err(Error::invalid("a potential table is required unless states = 2")),
            Some(rows) => {
                if rows.len() != self.states || rows.iter().any(|r| r.len() != self.states) {
                    return Err(Error::mismatch("potential table must be states × states"));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                ClassicalModel::new(self.states, &graph, DMatrix::from_row_slice(self.states, self.states, &flat), self.beta)
            }
        }
    }
}

/// The closed-form Ising factor: rows indexed by the state, columns by the bond.
pub fn ising_phi(beta: f64) -> DMatrix<f64> {
    let s = (0.5 * beta).sinh().sqrt();
    let c = (0.5 * beta).cosh().sqrt();
    DMatrix::from_row_slice(2, 2, &[s, c, -s, c])
}

/// Edge-end factors with `left(e) · right(e)` equal to the Gibbs factor of
/// edge `e`. `left` rows are states of the smaller endpoint; `right` columns
/// are states of the larger one.
#[derive(Clone, Debug)]
pub struct PhiFactors<K: Scalar> {
    pub left: Vec<DMatrix<K>>,
    pub right: Vec<DMatrix<K>>,
    /// Factor used on open legs.
    pub open: DMatrix<K>,
    /// Edges whose Gibbs factor has rank below the number of states.
    pub degenerate_edges: Vec<usize>,
}

impl<K: Scalar> PhiFactors<K> {
    pub fn new(m: &ClassicalModel, settings: &Settings) -> Result<Self> {
        let to_k = |w: &DMatrix<f64>| w.map(|x| lit::<K>(x));
        let split = |w: &DMatrix<f64>| -> Result<(DMatrix<K>, DMatrix<K>)> {
            if m.ising {
                let phi = to_k(&ising_phi(m.beta));
                let right = phi.transpose();
                Ok((phi, right))
            } else {
                factor_symmetric(&to_k(w), m.states, settings.rtol())
            }
        };
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut degenerate_edges = Vec::new();
        for e in 0..m.graph.edges().len() {
            let w = m.gibbs_factor(e);
            if rank(&w, settings.rtol) < m.states {
                degenerate_edges.push(e);
            }
            let (l, r) = split(&w)?;
            left.push(l);
            right.push(r);
        }
        let (open, _) = split(&m.potential.map(|h| (-0.5 * m.beta * h).exp()))?;
        Ok(PhiFactors {
            left,
            right,
            open,
            degenerate_edges,
        })
    }

    /// `⟨φ^leg_x|α⟩` for `leg` seen from vertex `v`.
    pub fn entry(&self, graph: &LatticeGraph, v: usize, leg: Leg, x: usize, alpha: usize) -> K {
        match leg {
            Leg::Edge(i) => {
                if graph.edge(i).a == v {
                    self.left[i][(x, alpha)]
                } else {
                    self.right[i][(alpha, x)]
                }
            }
            Leg::Open { .. } => self.open[(x, alpha)],
        }
    }

    /// Largest deviation of `left · right` from the Gibbs factors.
    pub fn reconstruction_error(&self, m: &ClassicalModel) -> f64 {
        (0..self.left.len())
            .map(|e| {
                let w = m.gibbs_factor(e).map(|x| lit::<K>(x));
                to_f64(max_abs_diff(&(&self.left[e] * &self.right[e]), &w))
            })
            .fold(0.0, f64::max)
    }
}

/// The PEPS of a classical model together with its factors.
#[derive(Clone, Debug)]
pub struct ClassicalPeps<K: Scalar> {
    pub peps: Peps<K>,
    pub factors: PhiFactors<K>,
}

/// Vertex tensors `A_{x; α_1…α_n} = Π_e ⟨φ^e_x|α_e⟩`, with physical and bond
/// dimension equal to the number of states.
pub fn build_classical_peps<K: Scalar>(m: &ClassicalModel, settings: &Settings) -> Result<ClassicalPeps<K>> {
    let factors = PhiFactors::<K>::new(m, settings)?;
    let graph = &m.graph;
    let peps = Peps::from_fn(graph.clone(), m.states, |v, idx| {
        let x = idx[0];
        graph
            .incident_legs(v)
            .iter()
            .zip(&idx[1..])
            .fold(K::one(), |acc, (&leg, &alpha)| acc * factors.entry(graph, v, leg, x, alpha))
    })?;
    Ok(ClassicalPeps { peps, factors })
}

/// The rule: every member has at most one outgoing leg.
pub fn geometric_injectivity(graph: &LatticeGraph, r: &Region) -> Result<bool> {
    Ok(graph.outgoing_counts(r)?.iter().all(|&k| k <= 1))
}

/// Entrywise check of `⟨x|Γ_R|ᾱ⟩ = C(x) ⟨x̄|F|ᾱ⟩`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorizedReport {
    pub region: Vec<usize>,
    pub boundary_legs: usize,
    pub boundary_vertices: Vec<usize>,
    /// `|E| = |R̄|`.
    pub square: bool,
    /// Largest deviation between `Γ_R` and `C(x) F`.
    pub max_error: f64,
    pub min_abs_c: f64,
    pub zero_c_count: usize,
    pub f_rank: usize,
    pub f_rows: usize,
    pub f_cols: usize,
    pub f_invertible: bool,
    pub gamma_rank: usize,
}

pub fn factorized_boundary_check<K: Scalar>(
    m: &ClassicalModel,
    cp: &ClassicalPeps<K>,
    r: &Region,
    settings: &Settings,
) -> Result<FactorizedReport> {
    let graph = &m.graph;
    let d = m.states;
    let boundary = graph.boundary(r)?;
    let members = r.members();
    let gamma = cp.peps.boundary_map(r, settings)?;
    let rbar = &boundary.vertices;
    let legs = &boundary.legs;
    let rows_f = d.pow(rbar.len() as u32);
    let cols_f = d.pow(legs.len() as u32);
    let f_cols_cap = settings.dense_limit as usize;
    if rows_f.saturating_mul(cols_f) > f_cols_cap {
        return Err(Error::cap("F entries", (rows_f * cols_f) as u128, settings.dense_limit));
    }
    let leg_owner: Vec<usize> = legs
        .iter()
        .map(|&l| {
            let v = graph.inside_end(r, l);
            rbar.binary_search(&v).unwrap()
        })
        .collect();
    let digits = |mut x: usize, n: usize| {
        let mut out = vec![0usize; n];
        for k in (0..n).rev() {
            out[k] = x % d;
            x /= d;
        }
        out
    };
    let f = DMatrix::<K>::from_fn(rows_f, cols_f, |xr, ac| {
        let xb = digits(xr, rbar.len());
        let al = digits(ac, legs.len());
        (0..legs.len()).fold(K::one(), |acc, k| {
            let v = rbar[leg_owner[k]];
            acc * cp.factors.entry(graph, v, legs[k], xb[leg_owner[k]], al[k])
        })
    });
    let internal = graph.internal_edges(r)?;
    let pos = |v: usize| members.binary_search(&v).unwrap();
    let rbar_pos: Vec<usize> = rbar.iter().map(|&v| pos(v)).collect();
    let mut max_error = 0.0f64;
    let mut min_abs_c = f64::INFINITY;
    let mut zero_c_count = 0;
    let c_scale = 1e-300f64;
    for xr in 0..gamma.nrows() {
        let x = digits(xr, members.len());
        let c = internal.iter().fold(K::one(), |acc, &i| {
            let e = graph.edge(i);
            acc * cp.factors.left[i].row(x[pos(e.a)]).transpose().dot(&cp.factors.right[i].column(x[pos(e.b)]))
        });
        let cabs = to_f64(c.modulus());
        min_abs_c = min_abs_c.min(cabs);
        if cabs <= c_scale {
            zero_c_count += 1;
        }
        let xb = rbar_pos.iter().fold(0usize, |acc, &p| acc * d + x[p]);
        for ac in 0..gamma.ncols() {
            let expect = c * f[(xb, ac)];
            max_error = max_error.max(to_f64((gamma[(xr, ac)] - expect).modulus()));
        }
    }
    let f_rank = rank(&f, settings.rtol());
    Ok(FactorizedReport {
        region: members.to_vec(),
        boundary_legs: legs.len(),
        boundary_vertices: rbar.clone(),
        square: legs.len() == rbar.len(),
        max_error,
        min_abs_c,
        zero_c_count,
        f_rank,
        f_rows: rows_f,
        f_cols: cols_f,
        f_invertible: rows_f == cols_f && f_rank == rows_f,
        gamma_rank: rank(&gamma, settings.rtol()),
    })
}

/// `⟨ψ| v(x̂_i) v(x̂_j) |ψ⟩ / ⟨ψ|ψ⟩` for the diagonal observable with values
/// `values[x]`, on a state vector of `n` sites.
pub fn diagonal_correlation<K: Scalar>(psi: &DVector<K>, d: usize, n: usize, i: usize, j: usize, values: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (idx, a) in psi.iter().enumerate() {
        let w = to_f64(a.modulus_squared());
        let xi = (idx / d.pow((n - 1 - i) as u32)) % d;
        let xj = (idx / d.pow((n - 1 - j) as u32)) % d;
        num += w * values[xi] * values[xj];
        den += w;
    }
    num / den
}

/// Subspace dimensions and identities for the Ising PEPS on open square patches.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SquareDimensionReport {
    pub beta: f64,
    /// `dim G` of the 3×4 patch.
    pub dim_patch_3x4: usize,
    /// `dim G` of a 3×3 patch.
    pub dim_patch_3x3: usize,
    /// `dim (1 ⊗ |0⟩⟨0|_a) G` with `a` the center of the 3×3 patch.
    pub compressed_center: usize,
    /// Same with `a` the middle of the patch's right column.
    pub compressed_side: usize,
    /// `dim (G_left ⊗ H) ∩ (H ⊗ G_right)` inside the 3×4 patch.
    pub intersection_dim: usize,
    /// Projector distance between that intersection and `G` of the 3×4 patch.
    pub intersection_distance: f64,
    /// Largest failure of block diagonality in the decomposition used above.
    pub block_leak: f64,
    pub dim_cross: usize,
    /// `‖P_{3×3} − P_{cross} ⊗ 1‖`.
    pub cross_projector_distance: f64,
    pub square_critical_beta: f64,
    pub square_critical_beta_alt: f64,
}

/// Cutoff on the singular values of a compressed orthonormal basis. They are
/// cosines in `[0, 1]`; basis noise grows like the condition number of `Γ`.
const COMPRESSION_TOL: f64 = 1e-6;

/// Zeroes every row whose configuration has site `pos` (of `n`) different from 0.
fn compress_site<K: Scalar>(basis: &DMatrix<K>, d: usize, n: usize, pos: usize) -> DMatrix<K> {
    let stride = d.pow((n - 1 - pos) as u32);
    let mut out = basis.clone();
    for r in 0..out.nrows() {
        if !(r / stride).is_multiple_of(d) {
            out.row_mut(r).fill(K::zero());
        }
    }
    out
}

pub fn square_dimension_arguments<K: Scalar>(beta: f64, settings: &Settings) -> Result<SquareDimensionReport> {
    let wide = generate_lattice(&LatticeSpec::new(LatticeKind::SquareOpen, &[3, 4]))?;
    let m = ClassicalModel::ising(&wide, beta)?;
    let p = build_classical_peps::<K>(&m, settings)?.peps;
    let at = |r: usize, c: usize| r * 4 + c;
    let cols = |c0: usize| -> Result<Region> {
        wide.region((0..3).flat_map(|r| (c0..c0 + 3).map(move |c| at(r, c))))
    };
    let (left, right) = (cols(0)?, cols(1)?);
    let full = wide.full_region();
    let g_full = p.range_space(&full, settings)?;
    let g_left = p.range_space(&left, settings)?;
    let g_right = p.range_space(&right, settings)?;
    let a = at(1, 2);
    let rtol: RealOf<K> = settings.rtol();
    let pos_in = |r: &Region| r.members().binary_search(&a).unwrap();
    let ctol: RealOf<K> = crate::scalar::real(COMPRESSION_TOL);
    let compressed_side = rank(&compress_site(g_left.basis(), 2, 9, pos_in(&left)), ctol);
    let compressed_center = rank(&compress_site(g_right.basis(), 2, 9, pos_in(&right)), ctol);

    // Every operator below is diagonal outside the two central sites.
    let layout = BlockLayout::new(12, 2, &[at(1, 1), at(1, 2)])?;
    let mut block_leak = 0.0f64;
    for (basis, sites) in [
        (g_full.basis(), full.members()),
        (g_left.basis(), left.members()),
        (g_right.basis(), right.members()),
    ] {
        block_leak = block_leak.max(layout.projector_leak(basis, sites)?);
    }
    let mut intersection_dim = 0;
    let mut intersection_distance = 0.0f64;
    for sigma in 0..layout.num_blocks() {
        let pa = layout.projector_block(g_left.basis(), left.members(), sigma)?;
        let pb = layout.projector_block(g_right.basis(), right.members(), sigma)?;
        let pf = layout.projector_block(g_full.basis(), full.members(), sigma)?;
        let inter = block_range(&pa, settings.rtol).intersection(&block_range(&pb, settings.rtol), rtol)?;
        intersection_dim += inter.dim();
        let dist = to_f64(spectral_norm(&(inter.projector() - pf)));
        intersection_distance = intersection_distance.max(dist);
    }

    let square = generate_lattice(&LatticeSpec::new(LatticeKind::SquareOpen, &[3, 3]))?;
    let m3 = ClassicalModel::ising(&square, beta)?;
    let p3 = build_classical_peps::<K>(&m3, settings)?.peps;
    let cross_sites = [1usize, 3, 4, 5, 7];
    let g_block: Subspace<K> = p3.range_space(&square.full_region(), settings)?;
    let g_cross: Subspace<K> = p3.range_space(&square.region(cross_sites)?, settings)?;
    let lifted = embed_operator(&g_cross.complement_projector(), &cross_sites, &[2; 9])?;
    let cross_projector_distance = to_f64(spectral_norm(&(g_block.complement_projector() - lifted)));

    Ok(SquareDimensionReport {
        beta,
        dim_patch_3x4: g_full.dim(),
        dim_patch_3x3: g_left.dim(),
        compressed_center,
        compressed_side,
        intersection_dim,
        intersection_distance,
        block_leak,
        dim_cross: g_cross.dim(),
        cross_projector_distance,
        square_critical_beta: square_critical_beta(),
        square_critical_beta_alt: square_critical_beta_alt(),
    })
}

/// Sizes of regions grown greedily (breadth-first from the lowest uncovered
/// vertex) until the geometric rule holds, on a possibly diluted lattice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometricGrowthReport {
    pub sizes: Vec<usize>,
    pub failures: usize,
    pub mean_size: f64,
}

pub fn geometric_region_growth(graph: &LatticeGraph, cap: usize) -> Result<GeometricGrowthReport> {
    let n = graph.num_vertices();
    let mut covered = vec![false; n];
    let mut sizes = Vec::new();
    let mut failures = 0;
    while let Some(seed) = covered.iter().position(|&c| !c) {
        let mut members = vec![seed];
        let mut frontier = std::collections::VecDeque::from([seed]);
        let mut ok = geometric_injectivity(graph, &graph.region(members.iter().copied())?)?;
        while !ok && members.len() < cap {
            let Some(v) = frontier.pop_front() else { break };
            for u in graph.neighbors(v) {
                if !covered[u] && !members.contains(&u) && members.len() < cap {
                    members.push(u);
                    frontier.push_back(u);
                }
            }
            ok = geometric_injectivity(graph, &graph.region(members.iter().copied())?)?;
        }
        for &v in &members {
            covered[v] = true;
        }
        if ok {
            sizes.push(members.len());
        } else {
            failures += 1;
        }
    }
    let mean_size = if sizes.is_empty() {
        0.0
    } else {
        sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
    };
    Ok(GeometricGrowthReport {
        sizes,
        failures,
        mean_size,
    })
}

/// Order-of-magnitude size `(1 − p)² / p³` of injective regions on a square
/// lattice with bond-deletion probability `p`.
pub fn defect_region_estimate(p: f64) -> f64 {
    (1.0 - p).powi(2) / p.powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::hexagon_cell;

    #[test]
    fn critical_constants() {
        assert!((hexagonal_critical_beta() - 0.658_478_948_462_408_4).abs() < 1e-15);
        assert!((square_critical_beta() - 0.440_686_793_509_771_5).abs() < 1e-15);
    }

    #[test]
    fn ising_phi_reproduces_gibbs_factor() {
        for beta in [0.0, 0.3, hexagonal_critical_beta(), 2.0] {
            let phi = ising_phi(beta);
            let w = &phi * phi.transpose();
            let expect = DMatrix::from_row_slice(2, 2, &[(beta / 2.0).exp(), (-beta / 2.0).exp(), (-beta / 2.0).exp(), (beta / 2.0).exp()]);
            assert!(max_abs_diff(&w, &expect) < 1e-12);
        }
    }

    #[test]
    fn zero_beta_gives_uniform_amplitudes() {
        let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[2, 2])).unwrap();
        let m = ClassicalModel::ising(&g, 0.0).unwrap();
        let cp = build_classical_peps::<f64>(&m, &Settings::default()).unwrap();
        assert_eq!(cp.factors.degenerate_edges.len(), g.edges().len());
        let psi = cp.peps.state_vector(&Settings::default()).unwrap();
        let first = psi[0];
        assert!(psi.iter().all(|&a| (a - first).abs() < 1e-12 * first.abs()));
    }

    #[test]
    fn generic_potential_factorizes() {
        let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[2, 3])).unwrap();
        let h = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, -1.0, 0.5, 2.0, 0.5, 0.3]);
        let m = ClassicalModel::new(3, &g, h, 0.7).unwrap();
        let s = Settings::default();
        let cp = build_classical_peps::<num_complex::Complex64>(&m, &s).unwrap();
        assert!(cp.factors.reconstruction_error(&m) < 1e-12);
        let psi = cp.peps.state_vector(&s).unwrap();
        let cfg0 = vec![0usize; 6];
        let mut cfg = vec![0usize; 6];
        for idx in [1usize, 17, 300, 728] {
            let mut rest = idx;
            for k in (0..6).rev() {
                cfg[k] = rest % 3;
                rest /= 3;
            }
            let ratio = psi[idx] / psi[0];
            let expect = (-0.5 * m.beta * (m.energy(&cfg) - m.energy(&cfg0))).exp();
            assert!((ratio.re - expect).abs() < 1e-10 * expect && ratio.im.abs() < 1e-10);
        }
    }

    #[test]
    fn hexagon_cell_is_injective_at_criticality() {
        let g = generate_lattice(&LatticeSpec::new(LatticeKind::HexagonalOpen, &[2, 2])).unwrap();
        let cell = g.region(hexagon_cell(&g, 0, 0).unwrap()).unwrap();
        assert!(geometric_injectivity(&g, &cell).unwrap());
        let m = ClassicalModel::ising(&g, hexagonal_critical_beta()).unwrap();
        let s = Settings::default();
        let cp = build_classical_peps::<f64>(&m, &s).unwrap();
        let rep = factorized_boundary_check(&m, &cp, &cell, &s).unwrap();
        assert!(rep.square && rep.f_invertible && rep.min_abs_c > 0.0);
        assert!(rep.max_error < 1e-12);
        assert_eq!(rep.gamma_rank, 64);
    }

    #[test]
    fn square_site_fails_the_rule() {
        let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[3, 3])).unwrap();
        assert!(!geometric_injectivity(&g, &g.region([4]).unwrap()).unwrap());
        let iso = LatticeGraph::isolated(3, 2).unwrap();
        assert!(geometric_injectivity(&iso, &iso.region([0, 2]).unwrap()).unwrap());
    }
}
