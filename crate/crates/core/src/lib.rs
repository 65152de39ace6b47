//! Polarization-resolved absorption line shapes of a J=1/2 → J=3/2 optical
//! transition in an anisotropic matrix.
//!
//! An anisotropic environment acts on the J=3/2 excited level as a rank-2
//! (quadrupolar) tensor perturbation and splits it into two Kramers doublets,
//! so the absorption line acquires two components whose relative weights
//! depend on the excitation and detection polarizations. This crate provides
//!
//! * exact angular-momentum algebra for small half-integer J ([`angular`]),
//! * tensor perturbation Hamiltonians and their Kramers structure ([`crystal`]),
//! * detected component intensities for the fixed lab geometry
//!   (excitation along x̂, fluorescence detection along ŷ) ([`optics`]),
//! * Monte Carlo line-shape generation over random domain orientations and
//!   fluctuating anisotropy tensors ([`ensemble`]),
//! * two-Gaussian spectral decomposition ([`fit`]),
//! * spectrum / config / report file formats ([`io`]).
//!
//! Energies are in cm⁻¹ throughout; wavelength (nm) axes are converted at the
//! file boundary ([`units`]).

pub mod angular;
pub mod crystal;
pub mod ensemble;
pub mod fit;
pub mod io;
pub mod optics;
pub mod units;
