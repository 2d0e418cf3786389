//! Exact diagonalization of the anharmonic Lipkin–Meshkov–Glick model:
//! spectra, quench dynamics, Loschmidt echoes and microcanonical
//! out-of-time-order correlators.
//!
//! ```
//! use almg_core::{diagonalize, ModelParams};
//!
//! let spec = diagonalize(&ModelParams::new(2, 0.0, 0.0).unwrap()).unwrap();
//! assert_eq!(spec.energies, vec![0.0, 1.0, 2.0]);
//! ```

pub mod cache;
pub mod cli;
pub mod echo;
pub mod error;
pub mod model;
pub mod otoc;
pub mod output;
pub mod quench;
pub mod spectra;
pub mod tridiag;

pub use cache::SpectralCache;
pub use echo::{loschmidt_echo, time_averaged_echo, EchoAverage, EchoSpec, EchoSystem};
pub use error::{Error, Result};
pub use model::{
    build_block_hamiltonian, build_full_operator, dense_hamiltonian, BasisU1, CriticalEnergies, ModelParams, Parity,
    ParityBlock, SpinOperator, SpinOperatorKind,
};
pub use otoc::{
    microcanonical_otoc, squared_commutator, steady_state_otoc, steady_state_otoc_exact, OtocRequest, OtocSeries,
    OtocSystem,
};
pub use quench::{
    critical_xi_from_ground, critical_xi_from_highest, detect_collapse, quench_coefficients, survival_probability,
    CriticalQuench, Ldos, QuenchSpec, TimeGrid, TimeSeries,
};
pub use spectra::{diagonalize, hf_slope, participation_ratio, SpectralData, StateSelector};
