//! Spectral localization of Hamiltonians onto few-body Pauli bases.
//!
//! Given a target spectrum, find couplings of a 2-local Hamiltonian whose
//! eigenvalues match it, then study how rigid that solution is.

pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod localizer;
pub mod optimize;
pub mod pauli;
pub mod scalar;
pub mod spectra;
pub mod spectral_stats;
pub mod stability;
pub mod sw;

pub use error::{Error, Result};
pub use localizer::{CouplingMatrixJ, Init, LocalizationProblem, LocalizationResult, Settings, Variant};
pub use pauli::{
    pair_trace, project_onto_subspace, string_product, Axis, BasisFlavor, LocalHamiltonian, PauliString,
    StringBasis,
};
pub use scalar::{Entry, Real};
pub use spectra::{EnsembleConfig, Generator, Spectrum};
pub use spectral_stats::SffCurve;
pub use stability::{EigenOperator, MetricMatrix};

/// Crate version recorded in every serialized result.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Spectrum64 = Spectrum<f64>;
pub type Spectrum32 = Spectrum<f32>;
pub type LocalHamiltonian64 = LocalHamiltonian<f64>;
pub type LocalizationProblem64 = LocalizationProblem<f64>;
pub type LocalizationResult64 = LocalizationResult<f64>;
pub type CouplingMatrixJ64 = CouplingMatrixJ<f64>;
pub type MetricMatrix64 = MetricMatrix<f64>;
pub type EigenOperator64 = EigenOperator<f64>;
pub type SwSettings64 = sw::SwSettings<f64>;
