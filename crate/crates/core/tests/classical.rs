mod common;

use common::*;
use nalgebra::DMatrix;
use peps_core::classical::{
    diagonal_correlation, factorized_boundary_check, geometric_injectivity, hexagonal_critical_beta, ising_phi,
    PhiFactors,
};
use peps_core::lattice::{hexagon_cell, ring};
use peps_core::{build_classical_peps, check_injective, generate_lattice, ClassicalModel, LatticeKind, LatticeSpec, Settings};
use proptest::prelude::*;

fn ising_state(g: &peps_core::LatticeGraph, beta: f64) -> nalgebra::DVector<f64> {
    let m = ClassicalModel::ising(g, beta).unwrap();
    build_classical_peps::<f64>(&m, &Settings::default())
        .unwrap()
        .peps
        .state_vector(&Settings::default())
        .unwrap()
}

#[test]
fn amplitudes_are_square_roots_of_gibbs_weights() {
    let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[2, 2])).unwrap();
    let m = ClassicalModel::ising(&g, 0.5).unwrap();
    let psi = ising_state(&g, 0.5);
    let w = gibbs_weights(&m);
    let scale = psi[0] / w[0].sqrt();
    for (a, wx) in psi.iter().zip(&w) {
        assert!((a - scale * wx.sqrt()).abs() < 1e-12 * a.abs());
    }
}

#[test]
fn ring_correlations_match_transfer_matrix() {
    let n = 8;
    let g = ring(n, 2).unwrap();
    for beta in [0.1, 0.3, 1.0] {
        let psi = ising_state(&g, beta);
        for r in 1..n {
            let got = diagonal_correlation(&psi, 2, n, 0, r, &[1.0, -1.0]);
            assert!((got - transfer_matrix_correlation(n, beta, r)).abs() < 1e-12);
        }
    }
}

#[test]
fn correlations_on_hexagonal_patch() {
    let g = generate_lattice(&LatticeSpec::new(LatticeKind::HexagonalOpen, &[1, 2]))
        .unwrap()
        .without_open_legs();
    let n = g.num_vertices();
    let beta = hexagonal_critical_beta();
    let psi = ising_state(&g, beta);
    for j in 1..n {
        let got = diagonal_correlation(&psi, 2, n, 0, j, &[1.0, -1.0]);
        assert!((got - gibbs_correlation(&g, beta, 0, j)).abs() < 1e-10);
    }
}

#[test]
fn potts_factors_reproduce_the_gibbs_factor() {
    let g = ring(4, 3).unwrap();
    let h = DMatrix::from_fn(3, 3, |a, b| if a == b { -1.0 } else { 0.0 });
    let m = ClassicalModel::new(3, &g, h, 0.8).unwrap();
    let f = PhiFactors::<f64>::new(&m, &Settings::default()).unwrap();
    assert!(f.reconstruction_error(&m) < 1e-12);
    assert!(f.degenerate_edges.is_empty());
}

#[test]
fn ising_phi_is_invertible_for_positive_beta() {
    for beta in [1e-3, 0.5, 1.0, 3.0] {
        assert!(ising_phi(beta).determinant().abs() > 0.0);
    }
    let w = ising_phi(1.0) * ising_phi(1.0).transpose();
    let expect = DMatrix::from_row_slice(2, 2, &[0.5f64.exp(), (-0.5f64).exp(), (-0.5f64).exp(), 0.5f64.exp()]);
    assert!(max_diff(&w, &expect) < 1e-12);
}

#[test]
fn boundary_map_factorizes_on_hexagon_cell() {
    let g = generate_lattice(&LatticeSpec::new(LatticeKind::HexagonalOpen, &[2, 2])).unwrap();
    let cell = g.region(hexagon_cell(&g, 0, 0).unwrap()).unwrap();
    let s = Settings::default();
    for beta in [0.1, 0.3, hexagonal_critical_beta()] {
        let m = ClassicalModel::ising(&g, beta).unwrap();
        let cp = build_classical_peps::<f64>(&m, &s).unwrap();
        let rep = factorized_boundary_check(&m, &cp, &cell, &s).unwrap();
        assert!(rep.max_error < 1e-12 && rep.f_invertible);
        assert!(check_injective(&cp.peps, &cell, &s).unwrap().injective);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn geometric_rule_predicts_rank(beta in 0.05f64..1.5, mask in 1u32..(1 << 8)) {
        let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareOpen, &[2, 4])).unwrap();
        let members: Vec<usize> = (0..8).filter(|v| mask >> v & 1 == 1).collect();
        prop_assume!(members.len() <= 6);
        let r = g.region(members).unwrap();
        let m = ClassicalModel::ising(&g, beta).unwrap();
        let s = Settings::default();
        let cp = build_classical_peps::<f64>(&m, &s).unwrap();
        let rule = geometric_injectivity(&g, &r).unwrap();
        let rank = check_injective(&cp.peps, &r, &s).unwrap().injective;
        prop_assert_eq!(rule, rank);
    }

    #[test]
    fn torus_correlations_match_enumeration(beta in 0.0f64..1.2, j in 1usize..6) {
        let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[2, 3])).unwrap();
        let psi = ising_state(&g, beta);
        let got = diagonal_correlation(&psi, 2, 6, 0, j, &[1.0, -1.0]);
        prop_assert!((got - gibbs_correlation(&g, beta, 0, j)).abs() < 1e-10);
    }
}
