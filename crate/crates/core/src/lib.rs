pub mod chaos;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod linalg;
pub mod observables;
pub mod orbitals;
pub mod series;
pub mod stochastic;

pub use dynamics::{evolve, run_protocol, KrylovConfig, Protocol, ProtocolRecord, QuantumState};
pub use error::{Error, Result};
pub use fock::{BasisIndex, FockKet, Probe};
pub use hamiltonian::{ModelSpec, SparseOperator};
pub use observables::{purity, reduce, ReducedDensity};
pub use orbitals::{CouplingTensor, Grid1D, HubbardParams, OrbitalSet, TrapPotential};
pub use series::TimeSeries;
