//! Concrete Hamiltonian systems.

pub mod schwinger;
pub mod solar;
pub mod toy;
