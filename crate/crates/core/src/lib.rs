//! Projected entangled pair states on arbitrary graphs: injectivity of
//! regions, parent Hamiltonians with unique ground states, the PEPS
//! representation of classical Gibbs states, and a computable spectral gap
//! certificate.
//!
//! Numerical code is generic over [`Scalar`] (`f32`, `f64` and their complex
//! counterparts). The aliases below fix the scalar for the common cases.
//!
//! ```
//! use peps_core::{generate_lattice, LatticeKind, LatticeSpec, ClassicalModel, Settings};
//!
//! let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[2, 2])).unwrap();
//! let m = ClassicalModel::ising(&g, 0.3).unwrap();
//! let p = peps_core::build_classical_peps::<f64>(&m, &Settings::default()).unwrap().peps;
//! assert_eq!(p.num_sites(), 4);
//! ```

pub mod blocks;
pub mod classical;
pub mod eigen;
pub mod error;
pub mod gap;
pub mod injectivity;
pub mod lattice;
pub mod linalg;
pub mod operator;
pub mod parent;
pub mod peps;
pub mod scalar;
pub mod subspace;
pub mod tensor;

pub use classical::{build_classical_peps, ClassicalModel, ClassicalPeps};
pub use eigen::{lowest_eigenpairs, EigenSettings, Eigenpairs, HermitianOperator};
pub use error::{Error, Result};
pub use gap::{gap_condition, metropolis_generator, GapCertificate, GapCertificateInput, StochasticGenerator};
pub use injectivity::{check_injective, find_injective_tiling, Covering, InjectivityReport, TilingOutcome};
pub use lattice::{generate_lattice, LatticeGraph, LatticeKind, LatticeSpec, Region};
pub use parent::{assemble, verify_uniqueness, AssembledHamiltonian};
pub use peps::{Peps, Settings};
pub use scalar::Scalar;
pub use subspace::Subspace;
pub use tensor::DenseTensor;

pub type C64 = num_complex::Complex64;

pub type Peps64 = Peps<f64>;
pub type PepsC64 = Peps<C64>;
pub type Tensor64 = DenseTensor<f64>;
pub type TensorC64 = DenseTensor<C64>;
pub type Subspace64 = Subspace<f64>;
pub type SubspaceC64 = Subspace<C64>;
pub type Hamiltonian64 = AssembledHamiltonian<f64>;
pub type HamiltonianC64 = AssembledHamiltonian<C64>;
