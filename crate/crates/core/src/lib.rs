//! Spectra, heat invariants and zeta-regularized determinants of Laplacians on
//! genus-0 branched covers of the round sphere with conical singularities.

pub mod cli;
pub mod local_frame;
pub mod perturbation;
pub mod rational_map;
pub mod spectral;
pub mod tau_genus0;
pub mod zeta_det;
