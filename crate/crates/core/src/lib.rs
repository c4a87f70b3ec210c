//! Synthesis, verification and complexity bounds for time-reversal and
//! decoupling pulse schemes acting on `n` coupled spins.
//!
//! Couplings are handled in coupling space: a Hamiltonian
//! `H_J = Σ_{k<l} Σ_{αβ} J_{kl;αβ} σ_α⁽ᵏ⁾ σ_β⁽ˡ⁾` is represented by its symmetric
//! `3n × 3n` matrix `J`, and a step of local unitaries acts on it by
//! conjugation with a block-diagonal rotation. A scheme inverts `J` to first
//! order when its time-weighted average of conjugated couplings equals `−J`.
//! The [`hilbert`] module checks those coupling-space statements against the
//! exact `2ⁿ`-dimensional dynamics for small `n`.

pub mod bounds;
pub mod coupling;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod rotalg;
pub mod schemes;
pub mod nnls;
pub mod search;

pub use coupling::{
    classify_type, complete_weights, dipole_type, scalar_type, tensor_coupling, CaseLabel,
    CouplingMatrix, CouplingSpec, TypeMatrix, WeightMatrix,
};
pub use error::{Error, Result};
pub use rotalg::{axis_cycle, so3_to_su2, su2_to_so3, sym_eig, Axis, Rotation3, SpinUnitary};
pub use schemes::{Scheme, SchemeKind, SchemeStats, Step};
