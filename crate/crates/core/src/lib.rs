//! Numerical core of levlab: biorthogonal eigensystems of non-Hermitian
//! matrices, the resonator models, synthetic response campaigns, recovery
//! of left and right eigenvectors from those responses, and Berry phases
//! along parameter loops.
//!
//! Everything is generic over the real scalar ([`scalar::Real`], `f32` or
//! `f64`); the aliases below fix it to `f64`.

pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod models;
pub mod response;
pub mod retrieval;
pub mod scalar;

pub use error::{Error, Result};

pub type Complex64 = scalar::C<f64>;
pub type CMatrix64 = linalg::CMatrix<f64>;
pub type Hamiltonian64 = linalg::Hamiltonian<f64>;
pub type EigenSystem64 = linalg::EigenSystem<f64>;
pub type TwoLevelParams64 = models::TwoLevelParams<f64>;
pub type SshParams64 = models::SshParams<f64>;
pub type ResponseSpectrum64 = response::ResponseSpectrum<f64>;
pub type Campaign64 = response::Campaign<f64>;
pub type FitModel64 = retrieval::FitModel<f64>;
pub type RetrievedMode64 = retrieval::RetrievedMode<f64>;
pub type ParametricLoop64 = geometry::ParametricLoop<f64>;
pub type TransportedStates64 = geometry::TransportedStates<f64>;
pub type BerryResult64 = geometry::BerryResult<f64>;
