//! Single-photon transport through a chiral waveguide-QED ladder.
//!
//! A chain of identical two-level emitters is side-coupled to two parallel
//! waveguides. A photon enters the bottom guide from the left (port 1) and
//! leaves through port 2 (bottom, transmitted), port 4 (top, transmitted) or
//! one of the reflection ports. Emitters interact through the free-space
//! dipole-dipole coupling, and their positions may be randomized to study
//! position disorder.
//!
//! Rates and detunings are in units of the free-space decay rate `Γ0`;
//! positions are in nanometres.

pub mod closedform;
pub mod ddi;
pub mod disorder;
pub mod ensemble;
pub mod error;
pub mod observables;
pub mod params;
pub mod scatter;
pub mod validate;

pub use ddi::{ddi_coupling, ddi_matrix, DdiMatrix};
pub use disorder::{sample_chain, DisorderSpec};
pub use ensemble::{run_ensemble, EnsembleStats, PortEnsemble};
pub use error::{Error, Result};
pub use observables::{routing_efficiency, PmaxResult, Spectrum};
pub use params::{
    build_periodic_chain, coupling_amplitude, ChiralityMode, EmitterChain, EmitterParams,
    UnitSystem,
};
pub use scatter::{solve_transport, PhaseConvention, PortProbabilities, ScatterProblem, TransportSolution};
