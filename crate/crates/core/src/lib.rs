//! Discretized coherent-state path integrals for open quantum systems.
//!
//! Boson (linearly coupled harmonic bath) and fermion (dot hybridized with free
//! levels) environments on the imaginary axis, the Keldysh contour and the
//! L-shaped Kadanoff-Baym contour. The environment is integrated out exactly into
//! an influence kernel; the system is then summed over paths (bosons) or reduced
//! to determinants (fermions). The [`oracle`] and [`grassmann`] modules provide
//! independent references for every identity the engine relies on.

pub mod contour;
pub mod error;
pub mod gaussian;
pub mod grassmann;
pub mod greens;
pub mod influence;
pub mod linalg;
pub mod observables;
pub mod oracle;
pub mod pathsum;

pub use num_complex::Complex64 as C64;

pub use contour::{Branch, ContourGrid, ContourPoint, GridKind, Step};
pub use error::{Error, Result};
pub use gaussian::{ActionMatrix, Convention};
pub use grassmann::GrassmannPoly;
pub use greens::{Bath, Mode, SpectralFunction, Statistics};
pub use influence::{FermionPairing, KernelMatrix, PathConfiguration};
pub use observables::{CorrelatorProvider, FermionCurrent, ProviderSource, TableProvider};
pub use pathsum::{FermionDot, PathSumMethod, PathSumResult, SystemModel};

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);
