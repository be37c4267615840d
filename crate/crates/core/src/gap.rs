//! Sufficient condition for a uniform spectral gap of a translation-invariant
//! frustration-free Hamiltonian on the square lattice, and the Metropolis
//! generator of the Ising model compared with the parent Hamiltonian.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::blocks::BlockLayout;
use crate::classical::{build_classical_peps, ClassicalModel};
use crate::error::{Error, Result};
use crate::lattice::{generate_lattice, LatticeKind, LatticeSpec};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, max_abs_diff};
use crate::operator::LocalOperator;
use crate::peps::Settings;
use crate::scalar::{lit, real, to_f64, Scalar};

/// Shift by `columns` columns and `rows` rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Offset {
    pub columns: i64,
    pub rows: i64,
}

impl Offset {
    pub fn new(columns: i64, rows: i64) -> Self {
        Offset { columns, rows }
    }
}

/// An operator on plane sites `[row, column]` (first site most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneOperator<K: Scalar> {
    pub coords: Vec<[i64; 2]>,
    pub matrix: DMatrix<K>,
    pub d: usize,
}

impl<K: Scalar> PlaneOperator<K> {
    pub fn new(coords: Vec<[i64; 2]>, matrix: DMatrix<K>, d: usize) -> Result<Self> {
        let distinct: BTreeSet<[i64; 2]> = coords.iter().copied().collect();
        if distinct.len() != coords.len() {
            return Err(Error::invalid("repeated site in plane operator"));
        }
        let dim = d.pow(coords.len() as u32);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::mismatch(format!("operator on {} sites must be {dim}×{dim}", coords.len())));
        }
        Ok(PlaneOperator { coords, matrix, d })
    }

    pub fn translate(&self, o: Offset) -> Self {
        PlaneOperator {
            coords: self.coords.iter().map(|&[r, c]| [r + o.rows, c + o.columns]).collect(),
            matrix: self.matrix.clone(),
            d: self.d,
        }
    }

    /// Local operator on the index set `support`.
    fn localize(&self, support: &[[i64; 2]]) -> LocalOperator<K> {
        LocalOperator {
            sites: self
                .coords
                .iter()
                .map(|c| support.binary_search(c).unwrap())
                .collect(),
            matrix: self.matrix.clone(),
        }
    }
}

/// Slots of `op` at which it is not diagonal (couples different values).
fn nondiagonal_slots<K: Scalar>(op: &LocalOperator<K>, d: usize, tol: f64) -> Vec<usize> {
    let n = op.sites.len();
    let mut out = Vec::new();
    for k in 0..n {
        let stride = d.pow((n - 1 - k) as u32);
        let mut off = false;
        'scan: for r in 0..op.matrix.nrows() {
            for c in 0..op.matrix.ncols() {
                if (r / stride) % d != (c / stride) % d && to_f64(op.matrix[(r, c)].modulus()) > tol {
                    off = true;
                    break 'scan;
                }
            }
        }
        if off {
            out.push(k);
        }
    }
    out
}

/// Support, local operators and block layout shared by several plane operators.
struct Joint<K: Scalar> {
    support: Vec<[i64; 2]>,
    ops: Vec<LocalOperator<K>>,
    layout: BlockLayout,
}

const LEAK_TOL: f64 = 1e-10;

fn joint<K: Scalar>(ops: &[PlaneOperator<K>], max_block: usize) -> Result<Joint<K>> {
    let d = ops[0].d;
    let support: Vec<[i64; 2]> = ops
        .iter()
        .flat_map(|o| o.coords.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let locals: Vec<LocalOperator<K>> = ops.iter().map(|o| o.localize(&support)).collect();
    let mut active = BTreeSet::new();
    for op in &locals {
        for k in nondiagonal_slots(op, d, LEAK_TOL) {
            active.insert(op.sites[k]);
        }
    }
    let active: Vec<usize> = active.into_iter().collect();
    let layout = BlockLayout::new(support.len(), d, &active)?;
    if layout.block_dim() > max_block {
        return Err(Error::cap("active block dimension", layout.block_dim() as u128, max_block as u128));
    }
    Ok(Joint {
        support,
        ops: locals,
        layout,
    })
}

/// Largest block handled by the gap computations.
pub const MAX_BLOCK_DIM: usize = 1 << 11;

/// Nonzero offsets whose translate of `h` shares a site with `h`.
pub fn candidate_offsets<K: Scalar>(h: &PlaneOperator<K>) -> Vec<Offset> {
    let mut out = BTreeSet::new();
    for a in &h.coords {
        for b in &h.coords {
            let o = Offset::new(a[1] - b[1], a[0] - b[0]);
            if o != Offset::new(0, 0) {
                out.insert(o);
            }
        }
    }
    let mut v: Vec<Offset> = out.into_iter().collect();
    v.sort_by_key(|o| (o.rows, o.columns));
    v
}

/// Whether `h h_o` is positive semidefinite (in particular Hermitian).
pub fn product_is_psd<K: Scalar>(h: &PlaneOperator<K>, o: Offset, tol: f64) -> Result<bool> {
    let t = h.translate(o);
    let j = joint(&[h.clone(), t], MAX_BLOCK_DIM)?;
    for sigma in 0..j.layout.num_blocks() {
        let a = j.layout.operator_block(&j.ops[0], sigma)?;
        let b = j.layout.operator_block(&j.ops[1], sigma)?;
        let p = &a * &b;
        if to_f64(max_abs_diff(&p, &p.adjoint())) > tol {
            return Ok(false);
        }
        if let Some(&m) = hermitian_eigenvalues(&p).first() {
            if to_f64(m) < -tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Candidate offsets and the subset `I` that remains after removing every
/// offset with `h h_o ≥ 0`.
pub fn translate_set<K: Scalar>(h: &PlaneOperator<K>, tol: f64) -> Result<(Vec<Offset>, Vec<Offset>)> {
    let candidates = candidate_offsets(h);
    let mut kept = Vec::new();
    for &o in &candidates {
        if !product_is_psd(h, o, tol)? {
            kept.push(o);
        }
    }
    Ok((candidates, kept))
}

#[derive(Clone, Debug)]
pub struct GapCertificateInput<K: Scalar> {
    pub h: PlaneOperator<K>,
    pub offsets: Vec<Offset>,
    /// `α₀₀` followed by one weight per offset; `None` means all ones.
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCertificate {
    pub holds: bool,
    /// Smallest eigenvalue of `M` on the support of `h + Σ h_o`.
    pub margin: f64,
    pub offsets: Vec<Offset>,
    pub weights: Vec<f64>,
    pub support_size: usize,
    pub active_sites: usize,
    pub blocks: usize,
}

/// Strictness threshold for the margin.
pub const MARGIN_TOL: f64 = 1e-10;

/// Evaluates `M = Σ_o (h h_o + h_o h) + (α₀₀ h + Σ_o α_o h_o) / Σα` and
/// certifies the gap condition when `M` is positive on the support of
/// `h + Σ_o h_o` (on the common kernel `M` vanishes identically).
pub fn gap_condition<K: Scalar>(input: &GapCertificateInput<K>) -> Result<GapCertificate> {
    let n_off = input.offsets.len();
    let weights = match &input.weights {
        Some(w) => w.clone(),
        None => vec![1.0; n_off + 1],
    };
    if weights.len() != n_off + 1 {
        return Err(Error::mismatch("need one weight for h and one per offset"));
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::invalid("weights must be positive"));
    }
    if input.offsets.iter().any(|&o| o == Offset::new(0, 0)) {
        return Err(Error::invalid("the zero offset is not allowed"));
    }
    let mut plane = vec![input.h.clone()];
    plane.extend(input.offsets.iter().map(|&o| input.h.translate(o)));
    let j = joint(&plane, MAX_BLOCK_DIM)?;
    let total: f64 = weights.iter().sum();
    let mut margin = f64::INFINITY;
    for sigma in 0..j.layout.num_blocks() {
        let blocks: Vec<DMatrix<K>> = j
            .ops
            .iter()
            .map(|op| j.layout.operator_block(op, sigma))
            .collect::<Result<_>>()?;
        let h = &blocks[0];
        let mut m = DMatrix::<K>::zeros(h.nrows(), h.ncols());
        let mut k = h.clone();
        let mut rhs = h.scale(real(weights[0]));
        for (t, b) in blocks[1..].iter().enumerate() {
            m += h * b + b * h;
            k += b;
            rhs += b.scale(real(weights[t + 1]));
        }
        m += rhs.unscale(real(total));
        let (kv, kvec) = hermitian_eigen(&k);
        let top = kv.last().map(|&x| to_f64(x)).unwrap_or(0.0);
        let keep: Vec<usize> = (0..kv.len())
            .filter(|&i| to_f64(kv[i]) > 1e-9 * top.max(1.0))
            .collect();
        if keep.is_empty() {
            continue;
        }
        let u = kvec.select_columns(keep.iter());
        let compressed = u.adjoint() * m * &u;
        if let Some(&low) = hermitian_eigenvalues(&compressed).first() {
            margin = margin.min(to_f64(low));
        }
    }
    if !margin.is_finite() {
        return Err(Error::invalid("h and its translates vanish identically"));
    }
    Ok(GapCertificate {
        holds: margin > MARGIN_TOL,
        margin,
        offsets: input.offsets.clone(),
        weights,
        support_size: j.support.len(),
        active_sites: j.layout.active().len(),
        blocks: j.layout.num_blocks(),
    })
}

/// The parent term of the square-lattice Ising PEPS on a site and its four
/// neighbors: the projector onto the complement of `G` of that cross.
pub fn ising_cross_projector<K: Scalar>(beta: f64, settings: &Settings) -> Result<PlaneOperator<K>> {
    let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareOpen, &[3, 3]))?;
    let m = ClassicalModel::ising(&g, beta)?;
    let p = build_classical_peps::<K>(&m, settings)?.peps;
    let cross = g.region([1, 3, 4, 5, 7])?;
    let space = p.range_space(&cross, settings)?;
    let coords = cross
        .members()
        .iter()
        .map(|&v| [(v / 3) as i64 - 1, (v % 3) as i64 - 1])
        .collect();
    PlaneOperator::new(coords, space.complement_projector(), 2)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub beta: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Gap condition for the Ising cross projector at every `β` of a sorted grid,
/// with `I` from [`translate_set`] at each point.
pub fn gap_threshold_scan(betas: &[f64], weights: Option<&[f64]>, settings: &Settings) -> Result<Vec<ScanPoint>> {
    if betas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("β grid must be sorted"));
    }
    betas
        .iter()
        .map(|&beta| {
            let h = ising_cross_projector::<f64>(beta, settings)?;
            let (_, offsets) = translate_set(&h, 1e-10)?;
            let cert = gap_condition(&GapCertificateInput {
                h,
                offsets,
                weights: weights.map(|w| w.to_vec()),
            })?;
            Ok(ScanPoint {
                beta,
                margin: cert.margin,
                holds: cert.holds,
            })
        })
        .collect()
}

/// `beta,margin,holds` lines with a header.
pub fn scan_csv(points: &[ScanPoint]) -> String {
    let mut s = String::from("beta,margin,holds\n");
    for p in points {
        s.push_str(&format!("{},{:.15e},{}\n", p.beta, p.margin, p.holds));
    }
    s
}

/// Consecutive grid points where `holds` flips.
pub fn sign_changes(points: &[ScanPoint]) -> Vec<(f64, f64)> {
    points
        .windows(2)
        .filter(|w| w[0].holds != w[1].holds)
        .map(|w| (w[0].beta, w[1].beta))
        .collect()
}

/// Metropolis spin-flip generator of a two-state model, acting on
/// probability vectors over `2^n` configurations (site 0 most significant).
#[derive(Clone, Debug)]
pub struct StochasticGenerator {
    pub num_sites: usize,
    /// `rates[i][x] = c(i, x)`.
    pub rates: Vec<Vec<f64>>,
    /// Gibbs weights `e^{−βH(x)}`, normalized to sum 1.
    pub gibbs: Vec<f64>,
    /// Neighbors of each site in the interaction graph.
    pub neighbors: Vec<Vec<usize>>,
}

/// Largest configuration space handled by the generator.
pub const GENERATOR_CAP: usize = 1 << 12;

pub fn metropolis_generator(m: &ClassicalModel) -> Result<StochasticGenerator> {
    if m.states != 2 {
        return Err(Error::invalid("the spin-flip generator needs two states per site"));
    }
    let n = m.graph.num_vertices();
    let size = 1usize
        .checked_shl(n as u32)
        .filter(|&s| s <= GENERATOR_CAP)
        .ok_or_else(|| Error::cap("configuration space", 1u128 << n.min(127), GENERATOR_CAP as u128))?;
    let config = |x: usize| -> Vec<usize> { (0..n).map(|i| (x >> (n - 1 - i)) & 1).collect() };
    let energies: Vec<f64> = (0..size).map(|x| m.energy(&config(x))).collect();
    let flip = |x: usize, i: usize| x ^ (1 << (n - 1 - i));
    let rates = (0..n)
        .map(|i| {
            (0..size)
                .map(|x| (-m.beta * (energies[flip(x, i)] - energies[x])).exp().min(1.0))
                .collect()
        })
        .collect();
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut gibbs: Vec<f64> = energies.iter().map(|&e| (-m.beta * (e - e0)).exp()).collect();
    let z: f64 = gibbs.iter().sum();
    gibbs.iter_mut().for_each(|w| *w /= z);
    let neighbors = (0..n).map(|v| m.graph.neighbors(v)).collect();
    Ok(StochasticGenerator {
        num_sites: n,
        rates,
        gibbs,
        neighbors,
    })
}

impl StochasticGenerator {
    pub fn dim(&self) -> usize {
        1 << self.num_sites
    }

    fn flip(&self, x: usize, i: usize) -> usize {
        x ^ (1 << (self.num_sites - 1 - i))
    }

    /// `Q_i` as a dense matrix: `⟨x|Q_i|x⟩ = −c(i,x)`, `⟨x^i|Q_i|x⟩ = c(i,x)`.
    pub fn site_matrix(&self, i: usize) -> DMatrix<f64> {
        let n = self.dim();
        let mut q = DMatrix::zeros(n, n);
        for x in 0..n {
            let c = self.rates[i][x];
            q[(x, x)] -= c;
            q[(self.flip(x, i), x)] += c;
        }
        q
    }

    /// `Q = Σ_i Q_i`.
    pub fn matrix(&self) -> DMatrix<f64> {
        (0..self.num_sites).fold(DMatrix::zeros(self.dim(), self.dim()), |acc, i| acc + self.site_matrix(i))
    }

    /// `−D^{−1/2} Q D^{1/2}` with `D = diag(Gibbs weights)`: symmetric,
    /// nonnegative, and annihilates the amplitude vector `√π`.
    pub fn symmetrized(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let s: Vec<f64> = self.gibbs.iter().map(|w| w.sqrt()).collect();
        DMatrix::from_fn(q.nrows(), q.ncols(), |y, x| -q[(y, x)] * s[x] / s[y])
    }

    /// `H_Q`.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        self.symmetrized(&self.matrix())
    }

    /// The amplitude vector `√π`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.gibbs.iter().map(|w| w.sqrt()).collect()
    }

    /// Checks of the Q-matrix axioms, locality and stationarity.
    pub fn properties(&self) -> GeneratorReport {
        let n = self.dim();
        let q = self.matrix();
        let mut axiom_violation = 0.0f64;
        let mut site_spectrum = (f64::INFINITY, f64::NEG_INFINITY);
        let mut locality_violation = 0.0f64;
        let mut raw_stationarity = 0.0f64;
        let mut symmetric_stationarity = 0.0f64;
        let mut sum = DMatrix::zeros(n, n);
        let amp = nalgebra::DVector::from_vec(self.amplitudes());
        let pi = nalgebra::DVector::from_vec(self.gibbs.clone());
        for i in 0..self.num_sites {
            let qi = self.site_matrix(i);
            axiom_violation = axiom_violation.max(q_matrix_violation(&qi));
            let hi = self.symmetrized(&qi);
            for &l in &hermitian_eigenvalues(&hi) {
                site_spectrum = (site_spectrum.0.min(l), site_spectrum.1.max(l));
            }
            raw_stationarity = raw_stationarity.max((&qi * &pi).amax());
            symmetric_stationarity = symmetric_stationarity.max((&hi * &amp).amax());
            for x in 0..n {
                for k in 0..self.num_sites {
                    if k != i && !self.neighbors[i].contains(&k) {
                        let d = (self.rates[i][x] - self.rates[i][self.flip(x, k)]).abs();
                        locality_violation = locality_violation.max(d);
                    }
                }
            }
            sum += qi;
        }
        axiom_violation = axiom_violation.max(q_matrix_violation(&q));
        let spectrum = hermitian_eigenvalues(&self.symmetrized(&q));
        GeneratorReport {
            axiom_violation,
            sum_error: max_abs_diff(&sum, &q),
            locality_violation,
            raw_stationarity,
            symmetric_stationarity,
            min_site_eigenvalue: site_spectrum.0,
            max_site_eigenvalue: site_spectrum.1,
            min_eigenvalue: spectrum[0],
            gap: spectrum.get(1).copied().unwrap_or(0.0),
            symmetry_error: {
                let h = self.symmetrized(&q);
                max_abs_diff(&h, &h.transpose())
            },
        }
    }
}

/// Largest violation of `q_ii ≤ 0`, `q_ij ≥ 0`, `Σ_i q_ij = 0`.
pub fn q_matrix_violation(q: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..q.ncols() {
        let mut col = 0.0;
        for i in 0..q.nrows() {
            let v = q[(i, j)];
            col += v;
            if i == j {
                worst = worst.max(v);
            } else {
                worst = worst.max(-v);
            }
        }
        worst = worst.max(col.abs());
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub axiom_violation: f64,
    /// `‖Σ_i Q_i − Q‖_max`.
    pub sum_error: f64,
    /// Largest change of `c(i, x)` under a flip outside `i` and its neighbors.
    pub locality_violation: f64,
    /// `max_i ‖Q_i π‖_∞` for the Gibbs weights `π`.
    pub raw_stationarity: f64,
    /// `max_i ‖H_{Q_i} √π‖_∞`.
    pub symmetric_stationarity: f64,
    pub min_site_eigenvalue: f64,
    pub max_site_eigenvalue: f64,
    /// Smallest eigenvalue of `H_Q`.
    pub min_eigenvalue: f64,
    /// Second smallest eigenvalue of `H_Q`.
    pub gap: f64,
    pub symmetry_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingReport {
    /// Smallest `c` with `a ≤ c b`, if `ker b ⊆ ker a`.
    pub c_min: Option<f64>,
    pub ordered: bool,
    /// `‖a P_{ker b}‖`.
    pub kernel_leak: f64,
    pub kernel_dim: usize,
    pub gap_a: f64,
    pub gap_b: f64,
}

/// Whether `a ≤ c·b` for some finite `c` (both Hermitian and `≥ 0`).
pub fn operator_ordering<K: Scalar>(a: &DMatrix<K>, b: &DMatrix<K>, tol: f64) -> Result<OrderingReport> {
    if a.shape() != b.shape() {
        return Err(Error::mismatch("operators act on different spaces"));
    }
    let (bv, bvec) = hermitian_eigen(b);
    let top = bv.last().map(|&x| to_f64(x)).unwrap_or(0.0).max(1.0);
    let kernel: Vec<usize> = (0..bv.len()).filter(|&i| to_f64(bv[i]) <= tol * top).collect();
    let support: Vec<usize> = (0..bv.len()).filter(|&i| to_f64(bv[i]) > tol * top).collect();
    let vk = bvec.select_columns(kernel.iter());
    let kernel_leak = if kernel.is_empty() {
        0.0
    } else {
        to_f64(crate::linalg::spectral_norm(&(a * &vk)))
    };
    let gap_of = |m: &DMatrix<K>| {
        let v = hermitian_eigenvalues(m);
        let t = v.last().map(|&x| to_f64(x)).unwrap_or(0.0).max(1.0);
        v.iter().map(|&x| to_f64(x)).find(|&x| x > tol * t).unwrap_or(0.0)
    };
    let ordered = kernel_leak <= 1e-8 * top;
    let c_min = if ordered && !support.is_empty() {
        let vs = bvec.select_columns(support.iter());
        let inv_sqrt = DMatrix::<K>::from_diagonal(&nalgebra::DVector::from_iterator(
            support.len(),
            support.iter().map(|&i| lit::<K>(1.0 / to_f64(bv[i]).sqrt())),
        ));
        let c = &inv_sqrt * vs.adjoint() * a * &vs * &inv_sqrt;
        hermitian_eigenvalues(&c).last().map(|&x| to_f64(x))
    } else {
        None
    };
    Ok(OrderingReport {
        c_min,
        ordered,
        kernel_leak,
        kernel_dim: kernel.len(),
        gap_a: gap_of(a),
        gap_b: gap_of(b),
    })
}
