//! Finite-volume thermodynamics of quantum spin lattices.

pub mod entropy;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod mpo;
pub mod operator;
pub mod perturbation;
pub mod pauli;
pub mod random;
pub mod region;
pub mod series;
pub mod states;
pub mod thermo;

pub use error::{Error, Result};
pub use lattice::{ModelSpec, Potential, Preset};
pub use operator::{LocalOperator, SpectralDecomposition};
pub use region::{Region, Site};
pub use series::ExtrapolationSeries;
pub use states::{DensityMatrix, GibbsState, StateFamily};
