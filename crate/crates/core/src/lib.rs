//! Frequency-resolved detection statistics of biphoton Gaussian states.
//!
//! A pair source is described by its joint spectral amplitude ([`spectral`]),
//! turned into a renormalized covariance ([`covariance`]), sent through
//! linear optics ([`transforms`]) and detected ([`detection`]). Error
//! certificates for every approximation live in [`bounds`]; [`oracle`] holds
//! dense reference implementations.

pub mod bounds;
pub mod covariance;
pub mod detection;
pub mod error;
pub mod layout;
pub mod linalg;
pub mod oracle;
pub mod series;
pub mod spectral;
pub mod transforms;

pub use covariance::{ProcessType, RenormalizedCovariance, SqueezingSpectrum};
pub use error::{Error, Result};
pub use layout::{Dof, Domain, ModeLayout};
pub use spectral::{DiscretizedJsa, FrequencyGrid, GaussianJsaModel, SchmidtSpectrum};
