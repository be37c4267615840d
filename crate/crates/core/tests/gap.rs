mod common;

use common::*;
use nalgebra::DMatrix;
use peps_core::gap::{
    gap_condition, gap_threshold_scan, ising_cross_projector, metropolis_generator, operator_ordering, sign_changes,
    translate_set, GapCertificateInput, Offset, PlaneOperator,
};
use peps_core::lattice::ring;
use peps_core::parent::assemble_regions;
use peps_core::{build_classical_peps, generate_lattice, ClassicalModel, LatticeGraph, LatticeKind, LatticeSpec, Settings};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `op` on `coords` embedded into the sorted site list `support`.
fn embed(coords: &[[i64; 2]], op: &DMatrix<f64>, support: &[[i64; 2]]) -> DMatrix<f64> {
    let n = support.len();
    let pos: Vec<usize> = coords.iter().map(|c| support.iter().position(|s| s == c).unwrap()).collect();
    let size = 1usize << n;
    DMatrix::from_fn(size, size, |x, y| {
        let (cx, cy) = (digits(x, 2, n), digits(y, 2, n));
        if (0..n).any(|k| !pos.contains(&k) && cx[k] != cy[k]) {
            return 0.0;
        }
        let local = |c: &[usize]| pos.iter().fold(0, |acc, &k| acc * 2 + c[k]);
        op[(local(&cx), local(&cy))]
    })
}

/// Margin of the gap condition from full-space matrices.
fn dense_margin(h: &PlaneOperator<f64>, offsets: &[Offset], weights: &[f64]) -> f64 {
    let mut plane = vec![h.clone()];
    plane.extend(offsets.iter().map(|&o| h.translate(o)));
    let mut support: Vec<[i64; 2]> = plane.iter().flat_map(|p| p.coords.clone()).collect();
    support.sort();
    support.dedup();
    let mats: Vec<DMatrix<f64>> = plane.iter().map(|p| embed(&p.coords, &p.matrix, &support)).collect();
    let total: f64 = weights.iter().sum();
    let h0 = &mats[0];
    let mut m = h0 * weights[0] / total;
    let mut k = h0.clone();
    for (t, b) in mats[1..].iter().enumerate() {
        m += h0 * b + b * h0 + b * weights[t + 1] / total;
        k += b;
    }
    let e = nalgebra::SymmetricEigen::new(k);
    let keep: Vec<usize> = (0..e.eigenvalues.len()).filter(|&i| e.eigenvalues[i] > 1e-9).collect();
    let u = e.eigenvectors.select_columns(keep.iter());
    eigenvalues(&(u.transpose() * m * &u))[0]
}

fn random_projector(dim: usize, rank: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, rank, |_, _| rng.random::<f64>() - 0.5);
    projector(&gram_schmidt(&a, 1e-12))
}

#[test]
fn block_margin_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // Diagonal on the first site, generic on the second: the outer sites of
    // the translated chain are spectators.
    let flag = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    for _ in 0..4 {
        let p = random_projector(2, 1, &mut rng);
        let h = PlaneOperator::new(vec![[0, 0], [0, 1]], flag.kronecker(&p), 2).unwrap();
        let offsets = vec![Offset::new(1, 0), Offset::new(-1, 0), Offset::new(0, 1)];
        let weights = vec![2.0, 1.0, 0.5, 1.5];
        let c = gap_condition(&GapCertificateInput {
            h: h.clone(),
            offsets: offsets.clone(),
            weights: Some(weights.clone()),
        })
        .unwrap();
        assert!(c.blocks > 1);
        assert!((c.margin - dense_margin(&h, &offsets, &weights)).abs() < 1e-10);
    }
}

#[test]
fn generic_margin_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for rank in 1..4 {
        let p = random_projector(4, rank, &mut rng);
        let h = PlaneOperator::new(vec![[0, 0], [0, 1]], p, 2).unwrap();
        let offsets = vec![Offset::new(1, 0), Offset::new(-1, 0)];
        let c = gap_condition(&GapCertificateInput {
            h: h.clone(),
            offsets: offsets.clone(),
            weights: None,
        })
        .unwrap();
        assert!((c.margin - dense_margin(&h, &offsets, &[1.0; 3])).abs() < 1e-10);
    }
}

#[test]
fn cross_projector_margin_at_weak_coupling() {
    let s = Settings::default();
    let h = ising_cross_projector::<f64>(0.05, &s).unwrap();
    let (_, offsets) = translate_set(&h, 1e-10).unwrap();
    let c = gap_condition(&GapCertificateInput { h, offsets, weights: None }).unwrap();
    assert_eq!((c.support_size, c.active_sites), (13, 5));
    assert!(c.holds);
}

#[test]
fn scan_margin_decreases() {
    let betas: Vec<f64> = (0..6).map(|k| 0.1 + 0.08 * k as f64).collect();
    let pts = gap_threshold_scan(&betas, None, &Settings::default()).unwrap();
    assert!(pts.windows(2).all(|w| w[1].margin < w[0].margin));
    assert_eq!(sign_changes(&pts).len(), 1);
}

fn torus(dims: &[usize]) -> LatticeGraph {
    generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, dims)).unwrap()
}

#[test]
fn generator_matches_defining_formula() {
    for g in [ring(4, 2).unwrap(), torus(&[2, 2]), torus(&[2, 3])] {
        for beta in [0.2, 0.4] {
            let m = ClassicalModel::ising(&g, beta).unwrap();
            let q = metropolis_generator(&m).unwrap();
            let oracle = dense_metropolis(&g, beta);
            assert!(max_diff(&q.matrix(), &oracle) < 1e-13);
            let r = q.properties();
            assert!(r.axiom_violation < 1e-13 && r.sum_error == 0.0 && r.locality_violation < 1e-13);
            assert!(r.raw_stationarity < 1e-13 && r.symmetric_stationarity < 1e-13);
            assert!(r.min_site_eigenvalue > -1e-12 && r.min_eigenvalue.abs() < 1e-12);
            let pi: Vec<f64> = gibbs_weights(&m);
            let z: f64 = pi.iter().sum();
            let h = DMatrix::from_fn(oracle.nrows(), oracle.ncols(), |y, x| {
                -oracle[(y, x)] * (pi[x] / z).sqrt() / (pi[y] / z).sqrt()
            });
            assert!((r.gap - eigenvalues(&h)[1]).abs() < 1e-10);
        }
    }
}

/// Parent Hamiltonian of the Ising PEPS from closed neighborhoods.
fn star_parent(g: &LatticeGraph, beta: f64) -> DMatrix<f64> {
    let s = Settings::default();
    let m = ClassicalModel::ising(g, beta).unwrap();
    let p = build_classical_peps::<f64>(&m, &s).unwrap().peps;
    let regions: Vec<_> = (0..g.num_vertices())
        .map(|v| {
            let mut members = g.neighbors(v);
            members.push(v);
            g.region(members).unwrap()
        })
        .collect();
    assemble_regions(&p, &regions, &s).unwrap().dense(1 << 12).unwrap()
}

#[test]
fn generator_and_parent_are_mutually_bounded() {
    for dims in [[2, 2], [2, 3]] {
        let g = torus(&dims);
        let m = ClassicalModel::ising(&g, 0.3).unwrap();
        let hq = metropolis_generator(&m).unwrap().hamiltonian();
        let hp = star_parent(&g, 0.3);
        let up = operator_ordering(&hq, &hp, 1e-10).unwrap();
        let down = operator_ordering(&hp, &hq, 1e-10).unwrap();
        assert!(up.ordered && down.ordered);
        assert_eq!((up.kernel_dim, down.kernel_dim), (1, 1));
        let (a, b) = (up.c_min.unwrap(), down.c_min.unwrap());
        assert!(a * b >= 1.0 - 1e-9);
        assert!(up.gap_a <= a * up.gap_b + 1e-9);
    }
}

#[test]
fn mismatched_temperatures_are_not_ordered() {
    let g = torus(&[2, 2]);
    let hq = metropolis_generator(&ClassicalModel::ising(&g, 0.2).unwrap()).unwrap().hamiltonian();
    let hp = star_parent(&g, 0.4);
    assert!(!operator_ordering(&hq, &hp, 1e-10).unwrap().ordered);
    assert!(!operator_ordering(&hp, &hq, 1e-10).unwrap().ordered);
    let same = operator_ordering(&hq, &hq, 1e-10).unwrap();
    assert!((same.c_min.unwrap() - 1.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn margin_is_insensitive_to_offset_order(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_projector(4, 2, &mut rng);
        let h = PlaneOperator::new(vec![[0, 0], [1, 0]], p, 2).unwrap();
        let a = vec![Offset::new(0, 1), Offset::new(0, -1)];
        let b = vec![Offset::new(0, -1), Offset::new(0, 1)];
        let ca = gap_condition(&GapCertificateInput { h: h.clone(), offsets: a, weights: None }).unwrap();
        let cb = gap_condition(&GapCertificateInput { h, offsets: b, weights: None }).unwrap();
        prop_assert!((ca.margin - cb.margin).abs() < 1e-10);
    }

    #[test]
    fn generator_is_reversible(beta in 0.0f64..1.5) {
        let g = torus(&[2, 2]);
        let q = metropolis_generator(&ClassicalModel::ising(&g, beta).unwrap()).unwrap();
        let qm = q.matrix();
        for x in 0..q.dim() {
            for y in 0..q.dim() {
                prop_assert!((qm[(y, x)] * q.gibbs[x] - qm[(x, y)] * q.gibbs[y]).abs() < 1e-14);
            }
        }
    }
}
