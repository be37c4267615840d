//! Reference implementations used as test oracles. They share no code with
//! the library beyond plain data access.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use peps_core::lattice::{LatticeGraph, Leg};
use peps_core::scalar::to_f64;
use peps_core::{ClassicalModel, Peps, Scalar};

/// Amplitude by summing over every assignment of the virtual edges.
pub fn nested_loop_amplitude<K: Scalar>(p: &Peps<K>, config: &[usize]) -> K {
    let g = p.graph();
    let ne = g.edges().len();
    let d = g.bond_dim();
    let mut total = K::zero();
    let mut bonds = vec![0usize; ne];
    loop {
        let mut prod = K::one();
        for v in 0..g.num_vertices() {
            let mut idx = vec![config[v]];
            for leg in g.incident_legs(v) {
                match leg {
                    Leg::Edge(i) => idx.push(bonds[*i]),
                    Leg::Open { .. } => panic!("oracle needs a closed graph"),
                }
            }
            prod *= p.tensor(v).get(&idx);
        }
        total += prod;
        let mut k = 0;
        while k < ne {
            bonds[k] += 1;
            if bonds[k] < d {
                break;
            }
            bonds[k] = 0;
            k += 1;
        }
        if k == ne {
            return total;
        }
    }
}

/// Digits of `x` in base `d`, first digit most significant.
pub fn digits(mut x: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for k in (0..n).rev() {
        out[k] = x % d;
        x /= d;
    }
    out
}

/// State vector from the nested-loop amplitude.
pub fn nested_loop_state<K: Scalar>(p: &Peps<K>) -> DVector<K> {
    let n = p.num_sites();
    let d = p.phys_dim();
    let total = d.pow(n as u32);
    DVector::from_fn(total, |x, _| nested_loop_amplitude(p, &digits(x, d, n)))
}

/// `tr(A^{x_1} ⋯ A^{x_n})` for an MPS on a ring.
pub fn mps_trace_state(a: &[DMatrix<Complex64>], n: usize) -> DVector<Complex64> {
    let d = a.len();
    let total = d.pow(n as u32);
    DVector::from_fn(total, |x, _| {
        let mut m = DMatrix::<Complex64>::identity(a[0].nrows(), a[0].nrows());
        for s in digits(x, d, n) {
            m *= &a[s];
        }
        m.trace()
    })
}

/// Orthonormal basis of the column span by modified Gram–Schmidt with one
/// reorthogonalization pass.
pub fn gram_schmidt<K: Scalar>(m: &DMatrix<K>, rtol: f64) -> DMatrix<K> {
    let scale = (0..m.ncols())
        .map(|j| to_f64(m.column(j).norm()))
        .fold(0.0, f64::max);
    let mut basis: Vec<DVector<K>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v: DVector<K> = m.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let n = to_f64(v.norm());
        if n > rtol * scale.max(f64::MIN_POSITIVE) * 1e3 {
            basis.push(v.unscale(v.norm()));
        }
    }
    let mut out = DMatrix::zeros(m.nrows(), basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

pub fn projector<K: Scalar>(basis: &DMatrix<K>) -> DMatrix<K> {
    basis * basis.adjoint()
}

/// Largest entry modulus of `a − b`.
pub fn max_diff<K: Scalar>(a: &DMatrix<K>, b: &DMatrix<K>) -> f64 {
    (a - b).iter().map(|x| to_f64(x.modulus())).fold(0.0, f64::max)
}

/// Spectral norm via the dense eigensolver of the Hermitian square.
pub fn operator_norm<K: Scalar>(m: &DMatrix<K>) -> f64 {
    let h = m.adjoint() * m;
    let e = nalgebra::linalg::SymmetricEigen::new(h);
    e.eigenvalues.iter().map(|&x| to_f64(x)).fold(0.0, f64::max).sqrt()
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn eigenvalues<K: Scalar>(m: &DMatrix<K>) -> Vec<f64> {
    let e = nalgebra::linalg::SymmetricEigen::new(m.clone());
    let mut v: Vec<f64> = e.eigenvalues.iter().map(|&x| to_f64(x)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Spin value of a two-state configuration entry (state 0 is +1).
pub fn spin(x: usize) -> f64 {
    if x == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `⟨x_i x_j⟩` of the Ising Gibbs distribution by enumeration.
pub fn gibbs_correlation(g: &LatticeGraph, beta: f64, i: usize, j: usize) -> f64 {
    let n = g.num_vertices();
    let (mut num, mut z) = (0.0, 0.0);
    for x in 0..1usize << n {
        let c = digits(x, 2, n);
        let energy: f64 = g.edges().iter().map(|e| -spin(c[e.a]) * spin(c[e.b])).sum();
        let w = (-beta * energy).exp();
        num += w * spin(c[i]) * spin(c[j]);
        z += w;
    }
    num / z
}

/// `⟨x_0 x_r⟩` on an Ising ring of `n` spins from the transfer matrix.
pub fn transfer_matrix_correlation(n: usize, beta: f64, r: usize) -> f64 {
    let t = DMatrix::from_row_slice(2, 2, &[beta.exp(), (-beta).exp(), (-beta).exp(), beta.exp()]);
    let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let pow = |k: usize| (0..k).fold(DMatrix::<f64>::identity(2, 2), |acc, _| acc * &t);
    (&s * pow(r) * &s * pow(n - r)).trace() / pow(n).trace()
}

/// Gibbs weights `e^{−βH(x)}`, unnormalized, for a model on a closed graph.
pub fn gibbs_weights(m: &ClassicalModel) -> Vec<f64> {
    let n = m.graph.num_vertices();
    (0..m.states.pow(n as u32))
        .map(|x| (-m.beta * m.energy(&digits(x, m.states, n))).exp())
        .collect()
}

/// Metropolis generator from its defining formula, with the Ising energy
/// written out edge by edge.
pub fn dense_metropolis(g: &LatticeGraph, beta: f64) -> DMatrix<f64> {
    let n = g.num_vertices();
    let size = 1usize << n;
    let energy = |c: &[usize]| -> f64 { g.edges().iter().map(|e| -spin(c[e.a]) * spin(c[e.b])).sum() };
    let mut q = DMatrix::zeros(size, size);
    for x in 0..size {
        let c = digits(x, 2, n);
        for i in 0..n {
            let mut f = c.clone();
            f[i] ^= 1;
            let y = f.iter().fold(0, |acc, &b| acc * 2 + b);
            let rate = (-beta * (energy(&f) - energy(&c))).exp().min(1.0);
            q[(y, x)] += rate;
            q[(x, x)] -= rate;
        }
    }
    q
}

/// Ring PEPS whose vertex tensors are `A^{x}[left, right]`.
pub fn mps_ring_peps(a: &[DMatrix<Complex64>], n: usize) -> Peps<Complex64> {
    let g = peps_core::lattice::ring(n, a[0].nrows()).unwrap();
    let right_first: Vec<bool> = (0..n)
        .map(|v| {
            let pos = g
                .incident_legs(v)
                .iter()
                .position(|leg| matches!(leg, Leg::Edge(i) if g.edge(*i).other(v) == (v + 1) % n))
                .unwrap();
            pos == 0
        })
        .collect();
    Peps::from_fn(g, a.len(), |v, idx| {
        let (l, r) = if right_first[v] { (idx[2], idx[1]) } else { (idx[1], idx[2]) };
        a[idx[0]][(l, r)]
    })
    .unwrap()
}

/// Random complex `D × D` matrices, one per physical value.
pub fn random_mps(d: usize, bond: usize, seed: u64) -> Vec<DMatrix<Complex64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..d)
        .map(|_| DMatrix::from_fn(bond, bond, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
        .collect()
}

/// `1 − P` onto the span of `{A^x A^y}` on two neighboring sites, from
/// Gram–Schmidt on the matrix entries.
pub fn mps_pair_term(a: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let d = a.len();
    let bond = a[0].nrows();
    let cols = DMatrix::from_fn(d * d, bond * bond, |xy, ab| {
        let m = &a[xy / d] * &a[xy % d];
        m[(ab / bond, ab % bond)]
    });
    let q = gram_schmidt(&cols, 1e-10);
    DMatrix::identity(d * d, d * d) - projector(&q)
}

/// Dense `Σ_i h_{i,i+1}` on a ring with a two-site term `h`.
pub fn ring_hamiltonian(h: &DMatrix<Complex64>, d: usize, n: usize) -> DMatrix<Complex64> {
    let total = d.pow(n as u32);
    let mut out = DMatrix::zeros(total, total);
    for i in 0..n {
        let j = (i + 1) % n;
        for x in 0..total {
            let cx = digits(x, d, n);
            for y in 0..total {
                let cy = digits(y, d, n);
                if (0..n).any(|k| k != i && k != j && cx[k] != cy[k]) {
                    continue;
                }
                out[(x, y)] += h[(cx[i] * d + cx[j], cy[i] * d + cy[j])];
            }
        }
    }
    out
}
