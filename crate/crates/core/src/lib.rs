//! Matrix-product-state engine for tracking participation entropy and
//! stabilizer Renyi entropy in U(1)-symmetric spin chains.

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod exact;
pub mod mpo;
pub mod mps;
pub mod participation;
pub mod sampling;
pub mod stabilizer;
pub mod tensor;

pub use error::{Error, Result};
pub use evolution::{domain_wall_state, evolve, DisorderSpec, TrotterEvolver, TrotterSchedule, XXZModel};
pub use mpo::{apply_mpo, MatrixProductOperator};
pub use mps::{CanonicalForm, MatrixProductState};
pub use participation::{participation_entropy, replica_state};
pub use stabilizer::{pauli_mps, stabilizer_renyi_entropy, Pauli, PauliMps, PauliString};
pub use tensor::{Tensor, TruncationSpec, C64};
