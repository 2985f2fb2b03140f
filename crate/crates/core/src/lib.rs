//! Effective coupling between qubits in separate circuit-QED cavities joined
//! by a bridge qubit.
//!
//! The single-excitation Hamiltonian is block-diagonalized by two closed-form
//! orthogonal transforms. [`solver`] finds the rotation angles, [`effective`]
//! evaluates the resulting couplings and energies, and [`observables`] turns
//! them into W-state fidelities, decay rates and labeled spectra. [`oracle`]
//! holds the independent numeric routines every closed form is checked
//! against.
//!
//! ```
//! use qbridge::{analyze, SolverConfig, SystemParams};
//!
//! let a = analyze(&SystemParams::new(2, 0.3, 0.3), &SolverConfig::default()).unwrap();
//! assert!(a.solution.residual < 1e-9);
//! println!("J_2 = {:.3e}", a.model.j_n);
//! ```

pub mod cli;
pub mod effective;
pub mod error;
pub mod matrix;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod solver;
pub mod transform;
pub mod verify;

pub use effective::{analyze, effective_model, Analysis, EffectiveModel};
pub use error::{Error, Result};
pub use matrix::SquareMatrix;
pub use model::{basis_index, build_hamiltonian, ExcitationState, SystemParams};
pub use observables::{DecayRates, LabeledSpectrum, WStateDecomposition};
pub use solver::{solve, solve_conditions, Branch, Solution, SolverConfig};
pub use transform::TransformAngles;
