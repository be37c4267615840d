mod common;

use common::*;
use num_complex::Complex64;
use peps_core::lattice::ring;
use peps_core::peps::{permute_sites, PepsDocument};
use peps_core::{generate_lattice, LatticeGraph, LatticeKind, LatticeSpec, Peps, PepsC64, Settings};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_peps(g: LatticeGraph, d: usize, seed: u64) -> PepsC64 {
    Peps::random(g, d, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn rel_diff(a: &nalgebra::DVector<Complex64>, b: &nalgebra::DVector<Complex64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn state_vector_matches_nested_loops() {
    let s = Settings::default();
    let graphs = vec![
        ring(4, 2).unwrap(),
        generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[2, 2])).unwrap(),
        LatticeGraph::new(3, &[(0, 1), (0, 1), (1, 2), (0, 2)], vec![0; 3], 2).unwrap(),
    ];
    for (k, g) in graphs.into_iter().enumerate() {
        let p = random_peps(g, 2, 40 + k as u64);
        let psi = p.state_vector(&s).unwrap();
        assert!(rel_diff(&psi, &nested_loop_state(&p)) < 1e-12, "graph {k}");
    }
}

#[test]
fn ring_peps_is_trace_of_matrix_product() {
    let n = 5;
    let a = random_mps(3, 2, 3);
    let p = mps_ring_peps(&a, n);
    let psi = p.state_vector(&Settings::default()).unwrap();
    assert!(rel_diff(&psi, &mps_trace_state(&a, n)) < 1e-12);
}

#[test]
fn two_vertex_double_bond_of_copy_tensors() {
    let g = LatticeGraph::new(2, &[(0, 1), (0, 1)], vec![0, 0], 2).unwrap();
    let p: Peps<f64> = Peps::from_fn(g, 2, |_, idx| if idx[0] == idx[1] && idx[1] == idx[2] { 1.0 } else { 0.0 }).unwrap();
    let psi = p.state_vector(&Settings::default()).unwrap();
    // Golden from the nested-loop oracle: only matching virtual pairs survive.
    let expect = nested_loop_state(&p);
    assert_eq!(psi, expect);
    assert_eq!(psi.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn single_vertex_amplitude_is_its_vector() {
    let g = LatticeGraph::isolated(1, 2).unwrap();
    let p: Peps<f64> = Peps::from_fn(g, 3, |_, idx| [0.5, -1.0, 2.0][idx[0]]).unwrap();
    assert_eq!(p.amplitude(&[2]).unwrap(), 2.0);
}

#[test]
fn document_round_trip_preserves_state() {
    let p = random_peps(generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[2, 3])).unwrap(), 2, 8);
    let json = serde_json::to_string(&PepsDocument::from_peps(&p)).unwrap();
    let back: PepsC64 = serde_json::from_str::<PepsDocument>(&json).unwrap().to_peps().unwrap();
    let s = Settings::default();
    assert_eq!(back.state_vector(&s).unwrap(), p.state_vector(&s).unwrap());
}

#[test]
fn regrouped_peps_has_the_same_state() {
    let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[2, 4])).unwrap();
    let p = random_peps(g, 2, 12);
    let s = Settings::default();
    let blocks = vec![vec![0, 1, 4, 5], vec![2, 3, 6, 7]];
    let q = p.regroup(&blocks, &s).unwrap();
    assert_eq!(q.phys_dim(), 16);
    // Site order of the regrouped state: block members in listed order.
    let map = [0, 1, 4, 5, 2, 3, 6, 7];
    let lhs = permute_sites(&p.state_vector(&s).unwrap(), 2, &map);
    assert!(rel_diff(&q.state_vector(&s).unwrap(), &lhs) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn amplitude_is_linear_in_each_tensor(seed in 0u64..1000, v in 0usize..4, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[2, 2])).unwrap();
        let p = random_peps(g.clone(), 2, seed);
        let q = random_peps(g, 2, seed + 7919);
        let mix = p.tensor(v).clone().scale(Complex64::new(a, 0.0));
        let other = q.tensor(v).clone().scale(Complex64::new(b, 0.0));
        let data: Vec<Complex64> = mix.data().iter().zip(other.data()).map(|(x, y)| x + y).collect();
        let t = peps_core::DenseTensor::new(mix.shape().to_vec(), data).unwrap();
        prop_assume!(!t.is_zero());
        let combined = p.with_tensor(v, t).unwrap();
        let pq = p.with_tensor(v, q.tensor(v).clone()).unwrap();
        let config = [1, 0, 1, 1];
        let lhs = combined.amplitude(&config).unwrap();
        let rhs = p.amplitude(&config).unwrap() * a + pq.amplitude(&config).unwrap() * b;
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn relabeling_permutes_the_state(seed in 0u64..1000, rot in 1usize..5) {
        let p = random_peps(ring(5, 2).unwrap(), 2, seed);
        let perm: Vec<usize> = (0..5).map(|v| (v + rot) % 5).collect();
        let q = p.relabel(&perm).unwrap();
        let s = Settings::default();
        let moved = permute_sites(&p.state_vector(&s).unwrap(), 2, &perm);
        prop_assert!(rel_diff(&q.state_vector(&s).unwrap(), &moved) < 1e-12);
    }
}
