//! Magnon dispersion, two-mode hybridization and the multimode Hamiltonian.

mod dispersion;
mod hamiltonian;
mod hybrid;

pub use dispersion::{exchange_mode_frequency, kittel_frequency, thickness_wavevector};
pub use hamiltonian::{build_hamiltonian, eigenspectrum, write_eigenspectra, EigenSpectrum};
pub use hybrid::{
    branch_linewidths, complex_branch_frequencies, coupled_branch_frequencies, BranchPair,
};
